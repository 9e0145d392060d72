//! Benchmark configuration: a plain `key = value` text file.
//!
//! ```text
//! # three models, spaced apart
//! model = bunny.ply
//! transform = 1 0 0 0  0 1 0 0  0 0 1 0
//! model = builtin:torus
//! transform = 1 0 0 40  0 1 0 0  0 0 1 0
//! noise_sigma_mr = 0.1
//! density_factor = 1
//! seed = 42
//! eps_grid = 50
//! out = results/run1
//! ```
//!
//! `model` and `transform` repeat; the n-th transform places the n-th model
//! (12 reals, row-major `[R | t]`) and models without one stay at the
//! identity. `builtin:blob`, `builtin:torus` and `builtin:capsule` name the
//! procedural models of [`crate::shapes::benchmark_models`]. Relative paths
//! are resolved against the config file's directory. `eps_grid` is either a
//! count `n` (giving `k/n` for `k = 1..=n`) or an explicit comma separated list.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bench::eval::uniform_eps_grid;
use crate::descriptor::Normalization;
use crate::error::{Error, Result};
use crate::mesh::ply::load_ply;
use crate::mesh::{RigidTransform, TriangleMesh};
use crate::pipeline::FeatureParams;
use crate::shapes;
use crate::Point3;

pub const BUILTIN_MODELS: [&str; 3] = shapes::BENCHMARK_MODEL_NAMES;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSource {
    File(PathBuf),
    Builtin(String),
}

impl ModelSource {
    pub fn parse(value: &str, base: &Path) -> Result<Self> {
        match value.strip_prefix("builtin:") {
            Some(name) if BUILTIN_MODELS.contains(&name) => Ok(ModelSource::Builtin(name.to_string())),
            Some(name) => Err(Error::InvalidParameter(format!(
                "unknown builtin model `{name}` (known: {})",
                BUILTIN_MODELS.join(", ")
            ))),
            None => {
                let p = Path::new(value);
                Ok(ModelSource::File(if p.is_absolute() { p.to_path_buf() } else { base.join(p) }))
            }
        }
    }

    pub fn load(&self) -> Result<TriangleMesh> {
        match self {
            ModelSource::File(path) => load_ply(path),
            ModelSource::Builtin(name) => {
                shapes::benchmark_model(name).ok_or_else(|| Error::InvalidParameter(format!("unknown builtin model `{name}`")))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSource::File(p) => p.display().to_string(),
            ModelSource::Builtin(n) => format!("builtin:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelSource>,
    /// One per model; shorter lists leave the remaining models at the identity.
    pub transforms: Vec<RigidTransform>,
    pub noise_sigma_mr: f64,
    pub density_factor: f64,
    pub seed: u64,
    pub features: FeatureParams,
    pub eps_grid: Vec<f64>,
    pub tolerance_mr: f64,
    pub out: PathBuf,
    pub keypoints_per_model: usize,
    /// Scene keypoints drawn uniformly from the whole scene. `None` draws
    /// `keypoints_per_model` from the vertices of each placed model instead.
    pub scene_keypoints: Option<usize>,
    pub jobs: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            models: Vec::new(),
            transforms: Vec::new(),
            noise_sigma_mr: 0.0,
            density_factor: 1.0,
            seed: 0,
            features: FeatureParams::default(),
            eps_grid: uniform_eps_grid(50),
            tolerance_mr: 2.0,
            out: PathBuf::from("hgnd-bench"),
            keypoints_per_model: 1000,
            scene_keypoints: None,
            jobs: None,
        }
    }
}

impl BenchmarkConfig {
    /// The three builtin models, each rotated and placed well apart.
    pub fn builtin_scene() -> Self {
        let place = |axis: [f64; 3], angle: f64, t: [f64; 3]| {
            RigidTransform::from_axis_angle(Point3::from(axis), angle, Point3::from(t)).expect("non-zero axis")
        };
        BenchmarkConfig {
            models: BUILTIN_MODELS
                .iter()
                .map(|n| ModelSource::Builtin(n.to_string()))
                .collect(),
            transforms: vec![
                place([1.0, 2.0, 0.5], 0.9, [0.0, 0.0, 0.0]),
                place([-0.3, 1.0, 1.0], 2.1, [240.0, 5.0, 0.0]),
                place([0.0, 0.2, 1.0], -1.3, [96.0, 240.0, -4.0]),
            ],
            ..BenchmarkConfig::default()
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("`{key}` expects a number, got `{value}`"),
    })
}

pub fn parse_reals(text: &str) -> Option<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect()
}

/// `n` gives the uniform grid `k/n`; anything else must be a list of values.
pub fn parse_eps_grid(value: &str) -> Result<Vec<f64>> {
    let grid = match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => uniform_eps_grid(n),
        _ => parse_reals(value)
            .ok_or_else(|| Error::InvalidParameter(format!("bad eps_grid `{value}`")))?,
    };
    check_eps_grid(&grid)?;
    Ok(grid)
}

fn check_eps_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("eps_grid is empty".into()));
    }
    if grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "eps_grid values must be increasing and lie in (0, 1]".into(),
        ));
    }
    Ok(())
}

pub fn parse_transform(value: &str) -> Result<RigidTransform> {
    let v = parse_reals(value)
        .filter(|v| v.len() == 12)
        .ok_or_else(|| Error::InvalidTransform(format!("expected 12 reals, got `{value}`")))?;
    RigidTransform::from_row_major(&v.try_into().expect("length checked"))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config {
            line,
            message: format!("`{key}` expects true or false, got `{value}`"),
        }),
    }
}

impl BenchmarkConfig {
    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = BenchmarkConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: Error| Error::Config {
                line,
                message: e.to_string(),
            };
            match key {
                "model" => c.models.push(ModelSource::parse(value, base).map_err(wrap)?),
                "transform" => c.transforms.push(parse_transform(value).map_err(wrap)?),
                "noise_sigma_mr" => c.noise_sigma_mr = parse_num(line, key, value)?,
                "density_factor" => c.density_factor = parse_num(line, key, value)?,
                "seed" => c.seed = parse_num(line, key, value)?,
                "radius_mr" => c.features.descriptor.support_radius_mr = parse_num(line, key, value)?,
                "sigma_d_lrf_mr" => c.features.lrf.sigma_d_lrf_mr = parse_num(line, key, value)?,
                "sigma_d_hist_mr" => c.features.descriptor.sigma_d_hist_mr = parse_num(line, key, value)?,
                "sigma_theta" => c.features.descriptor.sigma_theta = parse_num(line, key, value)?,
                "normalize" => {
                    c.features.descriptor.normalize = if parse_bool(line, key, value)? {
                        Normalization::L2
                    } else {
                        Normalization::None
                    }
                }
                "eps_grid" => c.eps_grid = parse_eps_grid(value).map_err(wrap)?,
                "tolerance_mr" => c.tolerance_mr = parse_num(line, key, value)?,
                "out" => c.out = base.join(value),
                "keypoints_per_model" => c.keypoints_per_model = parse_num(line, key, value)?,
                "scene_keypoints" => c.scene_keypoints = Some(parse_num(line, key, value)?),
                "jobs" => c.jobs = Some(parse_num(line, key, value)?),
                _ => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        if c.transforms.len() > c.models.len() {
            return Err(Error::Config {
                line: 0,
                message: format!("{} transforms for {} models", c.transforms.len(), c.models.len()),
            });
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Checks everything that does not need the model files.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::EmptyInput("config names no model"));
        }
        self.features.validate()?;
        check_eps_grid(&self.eps_grid)?;
        if !(self.tolerance_mr > 0.0 && self.tolerance_mr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance_mr must be positive, got {}",
                self.tolerance_mr
            )));
        }
        if !(self.noise_sigma_mr >= 0.0 && self.noise_sigma_mr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sigma_mr must be non-negative, got {}",
                self.noise_sigma_mr
            )));
        }
        if !(self.density_factor > 0.0 && self.density_factor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density_factor must lie in (0, 1], got {}",
                self.density_factor
            )));
        }
        if self.keypoints_per_model == 0 || self.scene_keypoints == Some(0) {
            return Err(Error::InvalidParameter("keypoint counts must be at least 1".into()));
        }
        Ok(())
    }

    /// Placement of model `i`.
    pub fn transform(&self, i: usize) -> RigidTransform {
        self.transforms.get(i).copied().unwrap_or_default()
    }

    pub fn scene_keypoint_count(&self) -> usize {
        self.scene_keypoints
            .unwrap_or(self.keypoints_per_model * self.models.len())
    }

    /// Canonical text form; parses back to the same configuration apart
    /// from path resolution.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, m) in self.models.iter().enumerate() {
            let _ = writeln!(s, "model = {}", m.label());
            let t = self.transform(i).to_row_major();
            let t: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "transform = {}", t.join(" "));
        }
        let d = &self.features.descriptor;
        let eps: Vec<String> = self.eps_grid.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "noise_sigma_mr = {}", self.noise_sigma_mr);
        let _ = writeln!(s, "density_factor = {}", self.density_factor);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "radius_mr = {}", d.support_radius_mr);
        let _ = writeln!(s, "sigma_d_lrf_mr = {}", self.features.lrf.sigma_d_lrf_mr);
        let _ = writeln!(s, "sigma_d_hist_mr = {}", d.sigma_d_hist_mr);
        let _ = writeln!(s, "sigma_theta = {}", d.sigma_theta);
        let _ = writeln!(s, "normalize = {}", d.normalize == Normalization::L2);
        let _ = writeln!(s, "eps_grid = {}", eps.join(","));
        let _ = writeln!(s, "tolerance_mr = {}", self.tolerance_mr);
        let _ = writeln!(s, "keypoints_per_model = {}", self.keypoints_per_model);
        if let Some(n) = self.scene_keypoints {
            let _ = writeln!(s, "scene_keypoints = {n}");
        }
        s
    }
}
