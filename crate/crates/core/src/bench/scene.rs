//! Scene synthesis: placement, density reduction and noise.

use std::collections::HashMap;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mesh::{MeshResolution, RigidTransform, Triangle, TriangleMesh};
use crate::Point3;

/// RNG stream used for vertex noise.
pub(crate) const NOISE_STREAM: u64 = 1;

/// One model instance in the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub model: usize,
    pub transform: RigidTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub placements: Vec<Placement>,
    pub noise_sigma_mr: f64,
    /// Target fraction of the vertex count kept, in `(0, 1]`.
    pub density_factor: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Model `i` placed with `transforms[i]`.
    pub fn one_each(transforms: Vec<RigidTransform>, noise_sigma_mr: f64, density_factor: f64, seed: u64) -> Self {
        SceneSpec {
            placements: transforms
                .into_iter()
                .enumerate()
                .map(|(model, transform)| Placement { model, transform })
                .collect(),
            noise_sigma_mr,
            density_factor,
            seed,
        }
    }

    pub fn validate(&self, model_count: usize) -> Result<()> {
        if self.placements.is_empty() {
            return Err(Error::EmptyInput("scene has no placed models"));
        }
        if let Some(p) = self.placements.iter().find(|p| p.model >= model_count) {
            return Err(Error::InvalidParameter(format!(
                "placement refers to model {} but only {model_count} models are loaded",
                p.model
            )));
        }
        if !(self.noise_sigma_mr >= 0.0 && self.noise_sigma_mr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sigma_mr must be non-negative, got {}",
                self.noise_sigma_mr
            )));
        }
        check_factor(self.density_factor)
    }
}

fn check_factor(factor: f64) -> Result<()> {
    if factor > 0.0 && factor <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("density_factor must lie in (0, 1], got {factor}")))
    }
}

/// Synthesized scene and what is known about how it was built.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriangleMesh,
    pub placements: Vec<Placement>,
    /// Resolution of the composed scene before decimation and noise; the
    /// unit of the noise level.
    pub reference_mr: MeshResolution,
    /// Resolution of the final scene mesh.
    pub mr: MeshResolution,
    /// Index into `placements` of the model each scene vertex came from.
    pub vertex_placement: Vec<usize>,
}

impl Scene {
    /// Scene vertices contributed by placement `p`, ascending.
    pub fn placement_vertices(&self, p: usize) -> Vec<usize> {
        (0..self.vertex_placement.len())
            .filter(|&v| self.vertex_placement[v] == p)
            .collect()
    }
}

/// Places every model, merges them, reduces the density and adds i.i.d.
/// Gaussian noise of standard deviation `noise_sigma_mr * reference_mr` to
/// every vertex coordinate.
pub fn synthesize_scene(models: &[TriangleMesh], spec: &SceneSpec) -> Result<Scene> {
    spec.validate(models.len())?;
    let placed: Vec<TriangleMesh> = spec
        .placements
        .iter()
        .map(|p| models[p.model].transformed(&p.transform))
        .collect();
    let merged = TriangleMesh::merge(&placed);
    let owners: Vec<usize> = placed
        .iter()
        .enumerate()
        .flat_map(|(p, m)| std::iter::repeat_n(p, m.vertex_count()))
        .collect();
    let reference_mr = merged.resolution()?;
    let (mut mesh, sources) = decimate_with_sources(&merged, spec.density_factor)?;
    let vertex_placement = sources.iter().map(|&v| owners[v]).collect();
    if spec.noise_sigma_mr > 0.0 {
        let sigma = reference_mr.to_model(spec.noise_sigma_mr);
        mesh = add_noise(&mesh, sigma, spec.seed)?;
    }
    let mr = mesh.resolution()?;
    debug!(
        "scene: {} vertices, {} triangles, mr {} (reference {})",
        mesh.vertex_count(),
        mesh.triangle_count(),
        mr.value(),
        reference_mr.value()
    );
    Ok(Scene {
        mesh,
        placements: spec.placements.clone(),
        reference_mr,
        mr,
        vertex_placement,
    })
}

/// Adds independent `N(0, sigma^2)` noise to each vertex coordinate.
pub fn add_noise(mesh: &TriangleMesh, sigma: f64, seed: u64) -> Result<TriangleMesh> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    let vertices = mesh
        .vertices()
        .iter()
        .map(|v| v + Point3::from_fn(|_, _| normal.sample(&mut rng)))
        .collect();
    mesh.with_vertices(vertices)
}

/// Vertex-clustering simplification to about `factor` times the vertex count.
///
/// Vertices are binned on a cubic grid whose cell size is searched so the
/// number of surviving vertices lands near the target; each cluster is
/// replaced by its mean. Triangles that collapse or duplicate another are
/// dropped and unreferenced clusters removed.
pub fn decimate(mesh: &TriangleMesh, factor: f64) -> Result<TriangleMesh> {
    decimate_with_sources(mesh, factor).map(|(m, _)| m)
}

/// [`decimate`], also returning for every output vertex the first input
/// vertex of its cluster.
pub fn decimate_with_sources(mesh: &TriangleMesh, factor: f64) -> Result<(TriangleMesh, Vec<usize>)> {
    check_factor(factor)?;
    if factor == 1.0 {
        return Ok((mesh.clone(), (0..mesh.vertex_count()).collect()));
    }
    let target = factor * mesh.vertex_count() as f64;
    let Some((lo, hi)) = mesh.bounds() else {
        return Err(Error::DegenerateOutput("cannot decimate an empty mesh".into()));
    };
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(Error::DegenerateOutput("mesh has zero extent".into()));
    }

    // Vertex count shrinks (not strictly) as the cell grows; bisect on log scale.
    let mut small = extent * 1e-9;
    let mut large = extent * 2.0;
    let mut best: Option<(f64, (TriangleMesh, Vec<usize>))> = None;
    for _ in 0..60 {
        let cell = (small * large).sqrt();
        let candidate = cluster(mesh, lo, cell);
        let n = candidate.0.vertex_count() as f64;
        let miss = (n - target).abs();
        if best.as_ref().is_none_or(|(m, _)| miss < *m) {
            best = Some((miss, candidate));
        }
        if n > target {
            small = cell;
        } else {
            large = cell;
        }
        if large / small < 1.0 + 1e-9 {
            break;
        }
    }
    let (miss, (out, sources)) = best.expect("at least one iteration");
    if out.vertex_count() < 4 {
        return Err(Error::DegenerateOutput(format!(
            "decimation by {factor} leaves {} vertices",
            out.vertex_count()
        )));
    }
    if miss > 0.1 * target {
        warn!(
            "decimation reached {} vertices for a target of {target:.0}",
            out.vertex_count()
        );
    }
    Ok((out, sources))
}

fn cluster(mesh: &TriangleMesh, origin: Point3, cell: f64) -> (TriangleMesh, Vec<usize>) {
    let key = |v: &Point3| {
        let c = (v - origin) / cell;
        (c.x.floor() as i64, c.y.floor() as i64, c.z.floor() as i64)
    };
    let mut ids: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut sums: Vec<(Point3, usize)> = Vec::new();
    let mut first = Vec::new();
    let assignment: Vec<usize> = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let id = *ids.entry(key(v)).or_insert_with(|| {
                sums.push((Point3::zeros(), 0));
                sums.len() - 1
            });
            if id == first.len() {
                first.push(i);
            }
            sums[id].0 += v;
            sums[id].1 += 1;
            id
        })
        .collect();

    let mut seen = std::collections::HashSet::new();
    let mut used = vec![usize::MAX; sums.len()];
    let mut vertices = Vec::new();
    let mut sources = Vec::new();
    let mut triangles = Vec::new();
    for t in mesh.triangles() {
        let c = t.0.map(|i| assignment[i]);
        if c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
            continue;
        }
        let mut sorted = c;
        sorted.sort_unstable();
        if !seen.insert(sorted) {
            continue;
        }
        let t = c.map(|id| {
            if used[id] == usize::MAX {
                used[id] = vertices.len();
                vertices.push(sums[id].0 / sums[id].1 as f64);
                sources.push(first[id]);
            }
            used[id]
        });
        triangles.push(Triangle(t));
    }
    let mesh = TriangleMesh::new(vertices, triangles).expect("cluster indices are valid and distinct");
    (mesh, sources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn identity_scene_equals_model() {
        let model = shapes::bumpy_sphere(10, 12, 3.0, 0.1, 1);
        let spec = SceneSpec::one_each(vec![RigidTransform::identity()], 0.0, 1.0, 7);
        let scene = synthesize_scene(std::slice::from_ref(&model), &spec).unwrap();
        assert_eq!(scene.mesh, model);
    }

    #[test]
    fn merged_models_keep_their_triangles() {
        let a = shapes::bumpy_sphere(10, 12, 3.0, 0.1, 1);
        let b = shapes::bumpy_torus(12, 8, 4.0, 1.0, 0.1, 2);
        let t = RigidTransform::translation_only(Point3::new(20.0, 0.0, 0.0));
        let spec = SceneSpec::one_each(vec![RigidTransform::identity(), t], 0.0, 1.0, 7);
        let scene = synthesize_scene(&[a.clone(), b.clone()], &spec).unwrap();
        assert_eq!(scene.mesh.triangle_count(), a.triangle_count() + b.triangle_count());
        let placed = &scene.mesh.vertices()[a.vertex_count()..];
        for (p, v) in placed.iter().zip(b.vertices()) {
            assert_eq!(*p, t.apply(v));
        }
    }

    #[test]
    fn empty_scene_is_rejected() {
        let spec = SceneSpec::one_each(vec![], 0.0, 1.0, 7);
        assert!(synthesize_scene(&[], &spec).is_err());
    }

    #[test]
    fn decimation_hits_target_and_coarsens() {
        let mesh = shapes::bumpy_torus(120, 60, 10.0, 3.0, 0.2, 3);
        let n = mesh.vertex_count() as f64;
        let mut last_mr = mesh.resolution().unwrap().value();
        for factor in [0.5, 0.25, 0.125] {
            let d = decimate(&mesh, factor).unwrap();
            let got = d.vertex_count() as f64;
            assert!((got - factor * n).abs() <= 0.1 * factor * n, "{factor}: {got}");
            let mr = d.resolution().unwrap().value();
            assert!(mr > last_mr);
            last_mr = mr;
        }
    }

    #[test]
    fn tiny_factor_collapses() {
        let mesh = shapes::bumpy_sphere(6, 6, 1.0, 0.0, 1);
        assert!(matches!(decimate(&mesh, 0.01), Err(Error::DegenerateOutput(_))));
    }

    #[test]
    fn noise_is_seeded() {
        let mesh = shapes::grid(10, 10, 1.0);
        assert_eq!(add_noise(&mesh, 0.1, 3).unwrap(), add_noise(&mesh, 0.1, 3).unwrap());
        assert_ne!(add_noise(&mesh, 0.1, 3).unwrap(), add_noise(&mesh, 0.1, 4).unwrap());
    }
}
