#![allow(dead_code)]

use std::f64::consts::PI;

use hgnd::mesh::crop_patch;
use hgnd::shapes::{self, random_unit};
use hgnd::{LocalSurfacePatch, Point3, RigidTransform, TriangleMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random rotation axis and angle, translation in a 20-unit cube.
pub fn random_transform(rng: &mut impl Rng) -> RigidTransform {
    let axis = random_unit(rng);
    let angle = rng.random_range(0.0..PI);
    let t = Point3::from_fn(|_, _| rng.random_range(-10.0..10.0));
    RigidTransform::from_axis_angle(axis, angle, t).unwrap()
}

/// Unit-resolution source meshes of different character.
pub fn source_meshes() -> Vec<TriangleMesh> {
    vec![
        shapes::rough_terrain(40, 3.0, 11),
        shapes::rescaled_to_resolution(&shapes::bumpy_sphere(30, 40, 1.0, 0.3, 12), 1.0),
        shapes::rescaled_to_resolution(&shapes::bumpy_torus(60, 30, 3.0, 1.0, 0.3, 13), 1.0),
    ]
}

/// `count` patches of `radius_mr` around random vertices of the source meshes.
pub fn random_patches(count: usize, radius_mr: f64, seed: u64) -> Vec<LocalSurfacePatch> {
    let meshes = source_meshes();
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let mesh = &meshes[rng.random_range(0..meshes.len())];
            let mr = mesh.resolution().unwrap();
            let kp = mesh.vertices()[rng.random_range(0..mesh.vertex_count())];
            crop_patch(mesh, kp, radius_mr, mr).unwrap()
        })
        .collect()
}

/// A random non-degenerate triangle and a point near it.
pub fn random_triangle(rng: &mut impl Rng) -> ([Point3; 3], Point3) {
    loop {
        let c: [Point3; 3] = std::array::from_fn(|_| Point3::from_fn(|_, _| rng.random_range(-2.0..2.0)));
        if (c[1] - c[0]).cross(&(c[2] - c[0])).norm() > 0.1 {
            let p = Point3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            return (c, p);
        }
    }
}

/// Stratified Monte-Carlo estimate of the mean of `(q - p)(q - p)^T` over
/// the triangle: the triangle is split into `n^2` congruent sub-triangles
/// and one uniform point is drawn in each.
pub fn monte_carlo_scatter(tri: &[Point3; 3], p: &Point3, n: usize, rng: &mut impl Rng) -> nalgebra::Matrix3<f64> {
    let [a, b, c] = *tri;
    let (eu, ev) = ((b - a) / n as f64, (c - a) / n as f64);
    let mut acc = nalgebra::Matrix3::zeros();
    let mut add = |o: Point3, e1: Point3, e2: Point3, rng: &mut dyn rand::RngCore| {
        let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
        if s + t > 1.0 {
            (s, t) = (1.0 - s, 1.0 - t);
        }
        let d = o + e1 * s + e2 * t - p;
        acc += d * d.transpose();
    };
    for i in 0..n {
        for j in 0..n - i {
            let o = a + eu * i as f64 + ev * j as f64;
            add(o, eu, ev, rng);
            if i + j + 1 < n {
                // Inverted cell sharing the diagonal.
                add(o + eu + ev, -eu, -ev, rng);
            }
        }
    }
    acc / (n * n) as f64
}

pub fn relative_frobenius(estimate: &nalgebra::Matrix3<f64>, exact: &nalgebra::Matrix3<f64>) -> f64 {
    (estimate - exact).norm() / exact.norm()
}
