use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use hgnd::bench::config::{parse_eps_grid, parse_reals};
use hgnd::bench::{self, sample_vertex_indices, BenchmarkConfig, SweepAxis};
use hgnd::descriptor::io::{read_descriptors, write_descriptors, DescriptorRecord};
use hgnd::matching::{build_index, match_descriptors, nearest_neighbors};
use hgnd::mesh::ply::load_ply;
use hgnd::pipeline::{describe_keypoints, FeatureParams};
use hgnd::{DescriptorSet, Error, MeshResolution, Normalization, Point3};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "hgnd", version, about = "HGND local 3D descriptors and matching benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute descriptors at keypoints of a PLY mesh.
    Describe(DescribeArgs),
    /// Ratio-test match scene descriptors against model descriptors.
    Match(MatchArgs),
    /// Build the configured scene and write it with its ground truth.
    Synth(ConfigArgs),
    /// Run the full benchmark and write curve, timings and manifest.
    Bench(ConfigArgs),
    /// Run the benchmark once per value of one parameter.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
struct FeatureArgs {
    /// Support radius in mr.
    #[arg(long)]
    radius_mr: Option<f64>,
    /// Distance weight width of the reference frame, in mr.
    #[arg(long)]
    sigma_d_lrf_mr: Option<f64>,
    /// Length weight width of the histograms, in mr.
    #[arg(long)]
    sigma_d_hist_mr: Option<f64>,
    /// Direction weight width.
    #[arg(long)]
    sigma_theta: Option<f64>,
    /// Keep raw histogram magnitudes instead of unit-length descriptors.
    #[arg(long)]
    no_normalize: bool,
}

impl FeatureArgs {
    fn apply(&self, p: &mut FeatureParams) {
        if let Some(v) = self.radius_mr {
            p.descriptor.support_radius_mr = v;
        }
        if let Some(v) = self.sigma_d_lrf_mr {
            p.lrf.sigma_d_lrf_mr = v;
        }
        if let Some(v) = self.sigma_d_hist_mr {
            p.descriptor.sigma_d_hist_mr = v;
        }
        if let Some(v) = self.sigma_theta {
            p.descriptor.sigma_theta = v;
        }
        if self.no_normalize {
            p.descriptor.normalize = Normalization::None;
        }
    }
}

#[derive(Args, Debug)]
struct DescribeArgs {
    mesh: PathBuf,
    /// Output descriptor file; `.bin`/`.hgnd` select the binary layout, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    /// Number of vertices to sample as keypoints (default: every vertex).
    #[arg(long, conflicts_with = "keypoint_file")]
    keypoints: Option<usize>,
    /// Text file of keypoints, one `x y z` per line.
    #[arg(long)]
    keypoint_file: Option<PathBuf>,
    /// Length unit for all mr parameters (default: the mesh's own resolution).
    #[arg(long)]
    mr: Option<f64>,
    /// CSV of dropped keypoints with reason codes.
    #[arg(long)]
    drop_log: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct MatchArgs {
    scene: PathBuf,
    model: PathBuf,
    /// Ratio threshold; candidates need `d1 / d2 < eps`.
    #[arg(long, default_value_t = 0.8)]
    eps: f64,
    /// Emit every nearest neighbour regardless of the ratio.
    #[arg(long)]
    all: bool,
    /// Candidates CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Count `n` for the grid `k/n`, or a comma separated list.
    #[arg(long)]
    eps_grid: Option<String>,
    #[arg(long)]
    tolerance_mr: Option<f64>,
    #[arg(long)]
    noise_sigma_mr: Option<f64>,
    #[arg(long)]
    density_factor: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureArgs,
}

impl ConfigArgs {
    fn load(&self) -> Result<BenchmarkConfig, Error> {
        let mut c = BenchmarkConfig::load(&self.config)?;
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.jobs {
            c.jobs = Some(v);
        }
        if let Some(v) = &self.eps_grid {
            c.eps_grid = parse_eps_grid(v)?;
        }
        if let Some(v) = self.tolerance_mr {
            c.tolerance_mr = v;
        }
        if let Some(v) = self.noise_sigma_mr {
            c.noise_sigma_mr = v;
        }
        if let Some(v) = self.density_factor {
            c.density_factor = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        self.features.apply(&mut c.features);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: ConfigArgs,
    /// radius, sigma_d or sigma_theta.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma separated values.
    #[arg(long)]
    values: String,
}

fn init_pool(jobs: Option<usize>) -> Result<(), Error> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?;
    }
    Ok(())
}

fn read_keypoint_file(path: &Path) -> Result<Vec<Point3>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_reals(line).as_deref() {
            Some(&[x, y, z]) => points.push(Point3::new(x, y, z)),
            _ => {
                return Err(Error::Format {
                    location: format!("{}: line {}", path.display(), i + 1),
                    message: "expected three coordinates".into(),
                })
            }
        }
    }
    Ok(points)
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn describe(args: &DescribeArgs) -> Result<(), Error> {
    init_pool(args.jobs)?;
    let mesh = load_ply(&args.mesh)?;
    let mut params = FeatureParams::default();
    args.features.apply(&mut params);
    params.validate()?;
    let mr = match args.mr {
        Some(v) => MeshResolution::new(v)?,
        None => mesh.resolution()?,
    };
    let (ids, keypoints): (Vec<u64>, Vec<Point3>) = match (&args.keypoint_file, args.keypoints) {
        (Some(path), _) => read_keypoint_file(path)?.into_iter().enumerate().map(|(i, p)| (i as u64, p)).unzip(),
        (None, count) => {
            let count = count.unwrap_or(mesh.vertex_count());
            sample_vertex_indices(&mesh, count, args.seed, 0)
                .into_iter()
                .map(|i| (i as u64, mesh.vertices()[i]))
                .unzip()
        }
    };
    info!("{}: {} keypoints, mr {}", args.mesh.display(), keypoints.len(), mr.value());
    let described = describe_keypoints(&mesh, &keypoints, mr, &params)?;

    let mut records = Vec::new();
    let mut drops = String::from("index,x,y,z,reason\n");
    let mut dropped = 0;
    for ((id, kp), d) in ids.iter().zip(&keypoints).zip(&described) {
        match d {
            Ok(d) => records.push(DescriptorRecord {
                index: *id,
                keypoint: *kp,
                values: d.bins().to_vec(),
            }),
            Err(reason) => {
                dropped += 1;
                info!("keypoint {id} dropped: {reason}");
                drops.push_str(&format!("{id},{},{},{},{reason}\n", kp.x, kp.y, kp.z));
            }
        }
    }
    if dropped > 0 {
        warn!("{dropped} of {} keypoints dropped", keypoints.len());
    }
    write_descriptors(&args.out, &records)?;
    if let Some(path) = &args.drop_log {
        fs::write(path, drops).map_err(io_err(path))?;
    }
    info!("wrote {} descriptors to {}", records.len(), args.out.display());
    Ok(())
}

fn run_match(args: &MatchArgs) -> Result<(), Error> {
    init_pool(args.jobs)?;
    let scene = DescriptorSet::from_records("scene", &read_descriptors(&args.scene)?)?;
    let model = DescriptorSet::from_records("model", &read_descriptors(&args.model)?)?;
    let index = build_index(model)?;
    let candidates = if args.all {
        nearest_neighbors(&scene, &index)?
    } else {
        match_descriptors(&scene, &index, args.eps)?
    };
    info!("{} candidates from {} scene descriptors", candidates.len(), scene.len());
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "scene_index,model_index,scene_keypoint,model_keypoint,d1,d2,ratio")?;
        for c in &candidates {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.scene_index,
                c.model_index,
                scene.ids()[c.scene_index],
                index.set().ids()[c.model_index],
                c.d1,
                c.d2,
                c.ratio
            )?;
        }
        w.flush()
    };
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            write(&mut BufWriter::new(file)).map_err(io_err(path))
        }
        None => write(&mut io::stdout().lock()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn synth(args: &ConfigArgs) -> Result<(), Error> {
    let config = args.load()?;
    init_pool(config.jobs)?;
    let scene = bench::write_scene(&config)?;
    info!(
        "scene: {} vertices, {} triangles, written to {}",
        scene.mesh.vertex_count(),
        scene.mesh.triangle_count(),
        config.out.display()
    );
    Ok(())
}

fn run_bench(args: &ConfigArgs) -> Result<(), Error> {
    let config = args.load()?;
    let report = bench::run_benchmark(&config)?;
    let curve = &report.outcome.curve;
    info!(
        "peak recall {:.4}; report in {}",
        curve.peak_recall(),
        report.dir.display()
    );
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<(), Error> {
    let config = args.run.load()?;
    let values = parse_reals(&args.values)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::InvalidParameter(format!("bad --values `{}`", args.values)))?;
    let entries = bench::sweep(&config, args.axis, &values)?;
    let failed = entries.iter().filter(|e| e.result.is_err()).count();
    if failed > 0 {
        warn!("{failed} of {} sweep runs failed; see summary.csv", entries.len());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Config { .. } | Error::InvalidParameter(_) | Error::InvalidTransform(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HGND_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Describe(a) => describe(a),
        Command::Match(a) => run_match(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => run_bench(a),
        Command::Sweep(a) => run_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
