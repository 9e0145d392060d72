//! Cluttered-scene matching benchmark.
//!
//! Models are placed into one scene, the scene is optionally decimated and
//! perturbed with noise, keypoints are drawn from every model and from the
//! scene, and scene descriptors are matched against the pooled model
//! descriptors. Sweeping the ratio threshold yields a Recall vs 1-Precision
//! curve.

pub mod config;
pub mod eval;
pub mod keypoints;
pub mod scene;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matching::{nearest_neighbors, DescriptorSet, IndexOptions, SearchIndex};
use crate::mesh::ply::{write_ply, write_ply_to};
use crate::mesh::TriangleMesh;
use crate::pipeline::{describe_keypoints_timed, Described, StageTimes};
use crate::Point3;

pub use config::{BenchmarkConfig, ModelSource};
pub use eval::{
    ground_truth_correspondences, pr_curve, pr_curve_from_neighbors, uniform_eps_grid, CorrespondenceSet,
    PrCurve, PrPoint,
};
pub use keypoints::{sample_indices, sample_keypoints, sample_vertex_indices};
pub use scene::{decimate, synthesize_scene, Placement, Scene, SceneSpec};

/// RNG stream for scene keypoints; model `m` uses `MODEL_KEYPOINT_STREAM + m`.
const SCENE_KEYPOINT_STREAM: u64 = 2;
const MODEL_KEYPOINT_STREAM: u64 = 100;

/// Ordered `(stage, duration)` list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings(pub Vec<(String, Duration)>);

impl Timings {
    pub fn record(&mut self, stage: &str, d: Duration) {
        self.0.push((stage.to_string(), d));
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.record(stage, t.elapsed());
        out
    }

    fn record_workers(&mut self, prefix: &str, t: &StageTimes) {
        self.record(&format!("{prefix}_crop_worker"), t.crop);
        self.record(&format!("{prefix}_lrf_worker"), t.lrf);
        self.record(&format!("{prefix}_histogram_worker"), t.histogram);
    }

    pub fn get(&self, stage: &str) -> Option<Duration> {
        self.0.iter().find(|(s, _)| s == stage).map(|(_, d)| *d)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,milliseconds\n");
        for (stage, d) in &self.0 {
            let _ = writeln!(s, "{stage},{:.3}", d.as_secs_f64() * 1e3);
        }
        s
    }
}

/// Everything a protocol run produced.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub curve: PrCurve,
    pub ground_truth: CorrespondenceSet,
    pub scene: Scene,
    pub model_keypoints: usize,
    pub scene_keypoints: usize,
    pub model_descriptors: usize,
    pub scene_descriptors: usize,
}

fn collect_set(label: &str, described: &Described, keypoints: &[Point3], offset: usize) -> (DescriptorSet, Vec<usize>) {
    let mut set = DescriptorSet::new(crate::DESCRIPTOR_LEN, label);
    let mut ids = Vec::new();
    for (i, d) in described.iter().enumerate() {
        if let Ok(d) = d {
            set.push((offset + i) as u64, keypoints[i], d.bins())
                .expect("fixed descriptor length");
            ids.push(offset + i);
        }
    }
    (set, ids)
}

fn append(into: &mut DescriptorSet, from: &DescriptorSet) {
    for i in 0..from.len() {
        into.push(from.ids()[i], from.keypoints()[i], from.descriptor(i))
            .expect("same dimension");
    }
}

/// `keypoints_per_model` scene vertices from each placed model, drawn with
/// the random stream of that model's own keypoints. At full density the
/// scene vertices of a placement are its model's vertices in the same order,
/// so the draws coincide with the model keypoints.
fn stratified_scene_keypoints(scene: &Scene, config: &BenchmarkConfig) -> Vec<usize> {
    let mut ids = Vec::new();
    for (p, placement) in scene.placements.iter().enumerate() {
        let block = scene.placement_vertices(p);
        let stream = MODEL_KEYPOINT_STREAM + placement.model as u64;
        let picks = sample_indices(block.len(), config.keypoints_per_model, config.seed, stream);
        ids.extend(picks.into_iter().map(|i| block[i]));
    }
    ids.sort_unstable();
    ids
}

/// Runs the matching protocol on loaded models. Model `i` is placed with
/// `config.transform(i)`; stage timings are appended to `timings`.
///
/// Model descriptors use each model's own resolution; scene descriptors and
/// the noise level use the resolution of the composed scene before
/// decimation, so the support regions stay the same physical size. The
/// correspondence tolerance uses the final scene resolution.
pub fn run_protocol(models: &[TriangleMesh], config: &BenchmarkConfig, timings: &mut Timings) -> Result<BenchOutcome> {
    config.validate()?;
    if models.len() != config.models.len() {
        return Err(Error::InvalidParameter(format!(
            "{} models loaded for {} configured",
            models.len(),
            config.models.len()
        )));
    }
    let spec = SceneSpec::one_each(
        (0..models.len()).map(|i| config.transform(i)).collect(),
        config.noise_sigma_mr,
        config.density_factor,
        config.seed,
    );
    let scene = timings.time("synthesize_scene", || synthesize_scene(models, &spec))?;

    let (model_kps, scene_kps) = timings.time("sample_keypoints", || {
        let model_kps: Vec<Vec<Point3>> = models
            .iter()
            .enumerate()
            .map(|(m, mesh)| {
                let ids = sample_vertex_indices(mesh, config.keypoints_per_model, config.seed, MODEL_KEYPOINT_STREAM + m as u64);
                ids.iter().map(|&i| mesh.vertices()[i]).collect()
            })
            .collect();
        let ids = match config.scene_keypoints {
            Some(count) => sample_vertex_indices(&scene.mesh, count, config.seed, SCENE_KEYPOINT_STREAM),
            None => stratified_scene_keypoints(&scene, config),
        };
        let scene_kps: Vec<Point3> = ids.iter().map(|&i| scene.mesh.vertices()[i]).collect();
        (model_kps, scene_kps)
    });

    // Pooled model descriptors; keypoints are numbered across models.
    let t = Instant::now();
    let mut pooled = DescriptorSet::new(crate::DESCRIPTOR_LEN, "models");
    let mut model_ids = Vec::new();
    let mut worker = StageTimes::default();
    let mut offset = 0;
    for (m, mesh) in models.iter().enumerate() {
        let (described, times) = describe_keypoints_timed(mesh, &model_kps[m], mesh.resolution()?, &config.features)?;
        worker.crop += times.crop;
        worker.lrf += times.lrf;
        worker.histogram += times.histogram;
        let (set, ids) = collect_set("model", &described, &model_kps[m], offset);
        append(&mut pooled, &set);
        model_ids.extend(ids);
        offset += model_kps[m].len();
    }
    timings.record("describe_models", t.elapsed());
    timings.record_workers("describe_models", &worker);
    let model_keypoints = offset;

    let t = Instant::now();
    let (described, times) = describe_keypoints_timed(&scene.mesh, &scene_kps, scene.reference_mr, &config.features)?;
    let (scene_set, scene_ids) = collect_set("scene", &described, &scene_kps, 0);
    timings.record("describe_scene", t.elapsed());
    timings.record_workers("describe_scene", &times);
    info!(
        "descriptors: {} of {} model keypoints, {} of {} scene keypoints",
        pooled.len(),
        model_keypoints,
        scene_set.len(),
        scene_kps.len()
    );

    let model_descriptors = pooled.len();
    let index = timings.time("build_index", || SearchIndex::build(pooled, IndexOptions::default()))?;
    let neighbors = timings.time("match", || nearest_neighbors(&scene_set, &index))?;

    let t = Instant::now();
    let mut targets = Vec::with_capacity(model_keypoints);
    for (m, kps) in model_kps.iter().enumerate() {
        let tr = config.transform(m);
        targets.extend(kps.iter().map(|p| tr.apply(p)));
    }
    let tolerance = scene.mr.to_model(config.tolerance_mr);
    let ground_truth = ground_truth_correspondences(&targets, &scene_kps, tolerance)?;
    info!("ground truth: {} correspondences", ground_truth.len());
    let curve = pr_curve_from_neighbors(&neighbors, &model_ids, &scene_ids, &config.eps_grid, &ground_truth)?;
    timings.record("evaluate", t.elapsed());

    Ok(BenchOutcome {
        curve,
        ground_truth,
        scene,
        model_keypoints,
        scene_keypoints: scene_kps.len(),
        model_descriptors,
        scene_descriptors: scene_set.len(),
    })
}

/// Loads every configured model and a SHA-256 of its source bytes.
pub fn load_models(config: &BenchmarkConfig) -> Result<Vec<(TriangleMesh, String)>> {
    config
        .models
        .iter()
        .map(|src| {
            let mesh = src.load()?;
            let bytes = match src {
                ModelSource::File(p) => fs::read(p).map_err(|e| Error::io(p, e))?,
                ModelSource::Builtin(_) => {
                    let mut buf = Vec::new();
                    write_ply_to(&mesh, &mut buf).expect("writing to memory");
                    buf
                }
            };
            Ok((mesh, hex::encode(Sha256::digest(&bytes))))
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Paths written by [`run_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub outcome: BenchOutcome,
    pub timings: Timings,
    pub dir: PathBuf,
}

/// Full run: load models, run the protocol and write `curve.csv`,
/// `timings.csv` and `manifest.txt` into `config.out`.
///
/// On failure the timings gathered so far and a manifest with a
/// `status = failed` line are still written.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchReport> {
    config.validate()?;
    let dir = config.out.clone();
    create_dir(&dir)?;
    let mut timings = Timings::default();
    let total = Instant::now();
    let result = with_pool(config.jobs, || -> Result<(Vec<String>, BenchOutcome, Timings)> {
        let mut timings = Timings::default();
        let loaded = timings.time("load_models", || load_models(config))?;
        let (models, hashes): (Vec<TriangleMesh>, Vec<String>) = loaded.into_iter().unzip();
        let outcome = run_protocol(&models, config, &mut timings)?;
        Ok((hashes, outcome, timings))
    })
    .and_then(|r| r);

    let mut manifest = String::new();
    let _ = writeln!(manifest, "hgnd_version = {}", env!("CARGO_PKG_VERSION"));
    manifest.push_str(&config.to_text());
    match result {
        Ok((hashes, outcome, run_timings)) => {
            timings.0.extend(run_timings.0);
            timings.record("total", total.elapsed());
            write_file(&dir.join("curve.csv"), &outcome.curve.to_csv())?;
            write_file(&dir.join("timings.csv"), &timings.to_csv())?;
            for (src, h) in config.models.iter().zip(&hashes) {
                let _ = writeln!(manifest, "model_sha256 = {h}  {}", src.label());
            }
            let s = &outcome.scene;
            let _ = writeln!(manifest, "scene_vertices = {}", s.mesh.vertex_count());
            let _ = writeln!(manifest, "scene_triangles = {}", s.mesh.triangle_count());
            let _ = writeln!(manifest, "reference_mr = {}", s.reference_mr.value());
            let _ = writeln!(manifest, "scene_mr = {}", s.mr.value());
            let _ = writeln!(manifest, "model_keypoints = {}", outcome.model_keypoints);
            let _ = writeln!(manifest, "scene_keypoints_drawn = {}", outcome.scene_keypoints);
            let _ = writeln!(manifest, "model_descriptors = {}", outcome.model_descriptors);
            let _ = writeln!(manifest, "scene_descriptors = {}", outcome.scene_descriptors);
            let _ = writeln!(manifest, "ground_truth = {}", outcome.ground_truth.len());
            let _ = writeln!(manifest, "status = ok");
            write_file(&dir.join("manifest.txt"), &manifest)?;
            Ok(BenchReport { outcome, timings, dir })
        }
        Err(e) => {
            timings.record("total", total.elapsed());
            let _ = writeln!(manifest, "status = failed: {e}");
            if let Err(w) = write_file(&dir.join("manifest.txt"), &manifest)
                .and_then(|_| write_file(&dir.join("timings.csv"), &timings.to_csv()))
            {
                warn!("could not record failure: {w}");
            }
            Err(e)
        }
    }
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Support radius, mr.
    Radius,
    /// Histogram length-weight width, mr.
    SigmaD,
    SigmaTheta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Radius => "radius",
            SweepAxis::SigmaD => "sigma_d",
            SweepAxis::SigmaTheta => "sigma_theta",
        }
    }

    pub fn apply(self, config: &mut BenchmarkConfig, value: f64) {
        let d = &mut config.features.descriptor;
        match self {
            SweepAxis::Radius => d.support_radius_mr = value,
            SweepAxis::SigmaD => d.sigma_d_hist_mr = value,
            SweepAxis::SigmaTheta => d.sigma_theta = value,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "radius" => Ok(SweepAxis::Radius),
            "sigma_d" => Ok(SweepAxis::SigmaD),
            "sigma_theta" => Ok(SweepAxis::SigmaTheta),
            _ => Err(format!("unknown axis `{s}` (expected radius, sigma_d or sigma_theta)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub value: f64,
    pub dir: PathBuf,
    /// The curve, or the error message of a failed run.
    pub result: std::result::Result<PrCurve, String>,
}

/// One benchmark per value with every other parameter held fixed. Each run
/// writes into `<out>/<axis>_<value>/`; `<out>/summary.csv` lists every run.
/// Failed runs are recorded and the sweep continues.
pub fn sweep(config: &BenchmarkConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep has no values"));
    }
    create_dir(&config.out)?;
    let mut entries = Vec::new();
    for &value in values {
        let mut c = config.clone();
        axis.apply(&mut c, value);
        c.out = config.out.join(format!("{}_{value}", axis.name()));
        info!("sweep {} = {value}", axis.name());
        let result = match run_benchmark(&c) {
            Ok(r) => Ok(r.outcome.curve),
            Err(e) if e.is_io() => return Err(e),
            Err(e) => {
                warn!("sweep {} = {value} failed: {e}", axis.name());
                Err(e.to_string())
            }
        };
        entries.push(SweepEntry {
            value,
            dir: c.out,
            result,
        });
    }
    let mut summary = String::from("axis,value,status,peak_recall,curve\n");
    for e in &entries {
        let dir = e.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match &e.result {
            Ok(curve) => {
                let _ = writeln!(summary, "{},{},ok,{:.6},{dir}/curve.csv", axis.name(), e.value, curve.peak_recall());
            }
            Err(msg) => {
                let _ = writeln!(summary, "{},{},failed: {},,", axis.name(), e.value, msg.replace(',', ";"));
            }
        }
    }
    write_file(&config.out.join("summary.csv"), &summary)?;
    Ok(entries)
}

/// Builds the configured scene and writes `scene.ply` and
/// `ground_truth.txt` into `config.out`.
pub fn write_scene(config: &BenchmarkConfig) -> Result<Scene> {
    config.validate()?;
    let loaded = load_models(config)?;
    let models: Vec<TriangleMesh> = loaded.into_iter().map(|(m, _)| m).collect();
    let spec = SceneSpec::one_each(
        (0..models.len()).map(|i| config.transform(i)).collect(),
        config.noise_sigma_mr,
        config.density_factor,
        config.seed,
    );
    let scene = synthesize_scene(&models, &spec)?;
    create_dir(&config.out)?;
    write_ply(&scene.mesh, config.out.join("scene.ply"))?;
    let mut gt = String::new();
    for (i, src) in config.models.iter().enumerate() {
        let t: Vec<String> = config.transform(i).to_row_major().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(gt, "model = {}", src.label());
        let _ = writeln!(gt, "transform = {}", t.join(" "));
    }
    let _ = writeln!(gt, "reference_mr = {}", scene.reference_mr.value());
    let _ = writeln!(gt, "scene_mr = {}", scene.mr.value());
    let _ = writeln!(gt, "tolerance_mr = {}", config.tolerance_mr);
    write_file(&config.out.join("ground_truth.txt"), &gt)?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::RigidTransform;
    use crate::shapes;

    fn small_config() -> (Vec<TriangleMesh>, BenchmarkConfig) {
        let models = vec![
            shapes::rescaled_to_resolution(&shapes::bumpy_sphere(14, 18, 1.0, 0.25, 4), 1.0),
            shapes::rescaled_to_resolution(&shapes::bumpy_torus(24, 12, 3.0, 1.0, 0.25, 5), 1.0),
        ];
        let c = BenchmarkConfig {
            models: vec![ModelSource::Builtin("blob".into()), ModelSource::Builtin("torus".into())],
            transforms: vec![
                RigidTransform::identity(),
                RigidTransform::from_axis_angle(Point3::new(0.0, 1.0, 1.0), 0.7, Point3::new(60.0, 0.0, 0.0)).unwrap(),
            ],
            eps_grid: uniform_eps_grid(10),
            ..BenchmarkConfig::default()
        };
        (models, c)
    }

    #[test]
    fn clean_scene_matches_itself() {
        let (models, c) = small_config();
        let out = run_protocol(&models, &c, &mut Timings::default()).unwrap();
        assert_eq!(out.ground_truth.len(), out.model_keypoints);
        let p = out.curve.at(0.8).unwrap();
        assert!(p.recall > 0.9, "{p:?}");
        for w in out.curve.points.windows(2) {
            assert!(w[0].recall <= w[1].recall);
            assert_eq!(w[0].tp + w[0].fn_, w[1].tp + w[1].fn_);
        }
    }

    #[test]
    fn protocol_is_deterministic() {
        let (models, mut c) = small_config();
        c.noise_sigma_mr = 0.2;
        c.density_factor = 0.5;
        let a = run_protocol(&models, &c, &mut Timings::default()).unwrap();
        let b = run_protocol(&models, &c, &mut Timings::default()).unwrap();
        assert_eq!(a.curve.to_csv(), b.curve.to_csv());
    }

    #[test]
    fn timings_csv_has_header() {
        let mut t = Timings::default();
        t.record("x", Duration::from_millis(3));
        assert_eq!(t.to_csv(), "stage,milliseconds\nx,3.000\n");
    }

    #[test]
    fn axis_names_parse() {
        for a in [SweepAxis::Radius, SweepAxis::SigmaD, SweepAxis::SigmaTheta] {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("colour".parse::<SweepAxis>().is_err());
    }
}
