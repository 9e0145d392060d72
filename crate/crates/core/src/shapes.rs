//! Procedural test surfaces.
//!
//! Deterministic closed and open meshes with random smooth surface relief,
//! used by the tests, the benchmark examples and anyone who wants to exercise
//! the pipeline without a scanned dataset at hand.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Triangle, TriangleMesh};
use crate::Point3;

/// Smooth random scalar field: a sum of plane waves with random directions,
/// frequencies and phases.
#[derive(Debug, Clone)]
pub struct Relief {
    waves: Vec<(Point3, f64, f64)>,
}

impl Relief {
    pub fn new(waves: usize, max_frequency: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..waves)
            .map(|_| {
                let dir = random_unit(&mut rng);
                let freq = rng.random_range(0.3..1.0) * max_frequency;
                let phase = rng.random_range(0.0..TAU);
                let amp = rng.random_range(0.3..1.0);
                (dir * freq, phase, amp)
            })
            .collect();
        Relief { waves }
    }

    /// Value in roughly `[-1, 1]`.
    pub fn at(&self, p: &Point3) -> f64 {
        let total: f64 = self.waves.iter().map(|(_, _, a)| a).sum();
        self.waves
            .iter()
            .map(|(k, phase, a)| a * (k.dot(p) + phase).sin())
            .sum::<f64>()
            / total.max(1e-300)
    }
}

/// Uniformly distributed unit vector.
pub fn random_unit(rng: &mut impl Rng) -> Point3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let s = (1.0 - z * z).sqrt();
    Point3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Flat `nx` x `ny` vertex grid in the XY plane with the given spacing.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    height_field(nx, ny, spacing, |_, _| 0.0)
}

/// `nx` x `ny` vertex grid with heights `z = f(x, y)`.
pub fn height_field(nx: usize, ny: usize, spacing: f64, f: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (i as f64 * spacing, j as f64 * spacing);
            vertices.push(Point3::new(x, y, f(x, y)));
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx.saturating_sub(1) * ny.saturating_sub(1));
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let a = j * nx + i;
            let (b, c, d) = (a + 1, a + nx, a + nx + 1);
            triangles.push(Triangle::new(a, b, d));
            triangles.push(Triangle::new(a, d, c));
        }
    }
    TriangleMesh::new(vertices, triangles).expect("grid indices are valid")
}

/// Random rough terrain patch: a jittered grid with relief. Useful for
/// building asymmetric local surface patches.
pub fn rough_terrain(n: usize, amplitude: f64, seed: u64) -> TriangleMesh {
    let relief = Relief::new(6, 0.6, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mesh = height_field(n, n, 1.0, |x, y| amplitude * relief.at(&Point3::new(x, y, 0.0)));
    let jittered = mesh
        .vertices()
        .iter()
        .map(|v| {
            v + Point3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.05..0.05),
            )
        })
        .collect();
    mesh.with_vertices(jittered).expect("same vertex count")
}

/// Latitude/longitude sphere with radial relief of relative `amplitude`.
/// Has `rings * segments + 2` vertices.
pub fn bumpy_sphere(rings: usize, segments: usize, radius: f64, amplitude: f64, seed: u64) -> TriangleMesh {
    sphere_with_relief(rings, segments, radius, amplitude, &Relief::new(8, 2.5, seed))
}

/// [`bumpy_sphere`] with a given relief, evaluated on the unit sphere.
pub fn sphere_with_relief(rings: usize, segments: usize, radius: f64, amplitude: f64, relief: &Relief) -> TriangleMesh {
    let displace = |dir: Point3| dir * radius * (1.0 + amplitude * relief.at(&dir));
    let mut vertices = vec![displace(Point3::z())];
    for r in 0..rings {
        let theta = PI * (r + 1) as f64 / (rings + 1) as f64;
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            let dir = Point3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            vertices.push(displace(dir));
        }
    }
    vertices.push(displace(-Point3::z()));
    let south = vertices.len() - 1;
    let at = |r: usize, s: usize| 1 + r * segments + s % segments;

    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push(Triangle::new(0, at(0, s), at(0, s + 1)));
    }
    for r in 0..rings.saturating_sub(1) {
        for s in 0..segments {
            let (a, b, c, d) = (at(r, s), at(r, s + 1), at(r + 1, s), at(r + 1, s + 1));
            triangles.push(Triangle::new(a, c, d));
            triangles.push(Triangle::new(a, d, b));
        }
    }
    for s in 0..segments {
        triangles.push(Triangle::new(south, at(rings - 1, s + 1), at(rings - 1, s)));
    }
    TriangleMesh::new(vertices, triangles).expect("sphere indices are valid")
}

/// Torus with `major * minor` vertices and relief of absolute `amplitude`
/// along the tube normal.
pub fn bumpy_torus(
    major: usize,
    minor: usize,
    major_radius: f64,
    minor_radius: f64,
    amplitude: f64,
    seed: u64,
) -> TriangleMesh {
    let relief = Relief::new(8, 1.5 / minor_radius.max(1e-9), seed);
    torus_with_relief(major, minor, major_radius, minor_radius, amplitude, &relief)
}

/// [`bumpy_torus`] with a given relief, evaluated at the undisplaced surface.
pub fn torus_with_relief(
    major: usize,
    minor: usize,
    major_radius: f64,
    minor_radius: f64,
    amplitude: f64,
    relief: &Relief,
) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(major * minor);
    for i in 0..major {
        let u = TAU * i as f64 / major as f64;
        let center = Point3::new(u.cos(), u.sin(), 0.0) * major_radius;
        for j in 0..minor {
            let v = TAU * j as f64 / minor as f64;
            let normal = Point3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin());
            let p = center + normal * minor_radius;
            vertices.push(p + normal * amplitude * relief.at(&p));
        }
    }
    let at = |i: usize, j: usize| (i % major) * minor + j % minor;
    let mut triangles = Vec::with_capacity(2 * major * minor);
    for i in 0..major {
        for j in 0..minor {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            triangles.push(Triangle::new(a, b, d));
            triangles.push(Triangle::new(a, d, c));
        }
    }
    TriangleMesh::new(vertices, triangles).expect("torus indices are valid")
}

/// Uniformly rescales `mesh` about its vertex mean so its mesh resolution
/// becomes `target_mr`.
pub fn rescaled_to_resolution(mesh: &TriangleMesh, target_mr: f64) -> TriangleMesh {
    let mr = mesh.resolution().expect("mesh has triangles").value();
    let center = mesh.vertices().iter().sum::<Point3>() / mesh.vertex_count() as f64;
    let s = target_mr / mr;
    let vertices = mesh.vertices().iter().map(|v| (v - center) * s).collect();
    mesh.with_vertices(vertices).expect("same vertex count")
}

/// Three distinct closed models of about 64k vertices each, rescaled to a
/// mesh resolution of 1.
///
/// Stand-ins for scanned objects: a lumpy ellipsoidal blob, a squashed torus and
/// an elongated bumpy capsule. The relief has a wavelength of a few tens of
/// mesh resolutions, so support patches of the default radius are curved but
/// not periodic.
pub fn benchmark_models() -> Vec<TriangleMesh> {
    BENCHMARK_MODEL_NAMES
        .iter()
        .map(|n| benchmark_model(n).expect("known name"))
        .collect()
}

/// Names accepted by [`benchmark_model`], in the order of [`benchmark_models`].
pub const BENCHMARK_MODEL_NAMES: [&str; 3] = ["blob", "torus", "capsule"];

/// One of the [`benchmark_models`] by name.
pub fn benchmark_model(name: &str) -> Option<TriangleMesh> {
    let mesh = match name {
        "blob" => {
            let m = sphere_with_relief(208, 304, 1.0, 0.6, &Relief::new(16, 40.0, 101));
            stretch(&m, Point3::new(1.0, 0.8, 0.65))
        }
        "torus" => {
            let m = torus_with_relief(320, 200, 3.0, 1.1, 0.66, &Relief::new(16, 20.0, 202));
            stretch(&m, Point3::new(1.0, 0.75, 1.0))
        }
        "capsule" => {
            let m = sphere_with_relief(240, 264, 1.0, 0.48, &Relief::new(16, 40.0, 303));
            stretch(&m, Point3::new(0.55, 0.6, 1.6))
        }
        _ => return None,
    };
    Some(rescaled_to_resolution(&mesh, 1.0))
}

fn stretch(mesh: &TriangleMesh, scale: Point3) -> TriangleMesh {
    let vertices = mesh.vertices().iter().map(|v| v.component_mul(&scale)).collect();
    mesh.with_vertices(vertices).expect("same vertex count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_models_have_unit_resolution() {
        let models = benchmark_models();
        assert_eq!(models.len(), 3);
        for m in &models {
            assert!((60_000..=65_000).contains(&m.vertex_count()), "{} vertices", m.vertex_count());
            assert!((m.resolution().unwrap().value() - 1.0).abs() < 1e-12);
            assert!(m.normals().iter().all(Option::is_some));
        }
    }

    #[test]
    fn shapes_are_deterministic() {
        assert_eq!(bumpy_torus(10, 6, 3.0, 1.0, 0.2, 5), bumpy_torus(10, 6, 3.0, 1.0, 0.2, 5));
        assert_ne!(bumpy_torus(10, 6, 3.0, 1.0, 0.2, 5), bumpy_torus(10, 6, 3.0, 1.0, 0.2, 6));
    }
}
