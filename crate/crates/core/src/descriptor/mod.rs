//! The 96-bin HGND descriptor.
//!
//! The patch is expressed in its local reference frame, then each triangle's
//! centroid and unit normal are projected onto the XY, XZ and YZ planes. In
//! each plane the centroid picks one of four quadrants and the projected
//! normal one of eight 45 degree direction sectors. The triangle adds
//! `w_length * w_direction` to its (quadrant, sector) bin and the same amount
//! to the opposite sector of the same quadrant, which makes the histogram
//! independent of the normal's sign.

pub mod io;

use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::lrf::Lrf;
use crate::mesh::{triangle_geometry, LocalSurfacePatch};
use crate::Point3;

pub const PLANES: usize = 3;
pub const QUADRANTS: usize = 4;
pub const DIRECTIONS: usize = 8;
pub const PLANE_LEN: usize = QUADRANTS * DIRECTIONS;
pub const DESCRIPTOR_LEN: usize = PLANES * PLANE_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    #[default]
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorParams {
    /// Support radius in mr units.
    pub support_radius_mr: f64,
    /// Width of the projected-centroid ("length") Gaussian, in mr units.
    pub sigma_d_hist_mr: f64,
    /// Width of the normal ("direction") Gaussian; dimensionless.
    pub sigma_theta: f64,
    pub normalize: Normalization,
    /// Projected normals shorter than this are skipped.
    pub min_proj_norm: f64,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            support_radius_mr: 8.5,
            sigma_d_hist_mr: 500.0,
            sigma_theta: 500.0,
            normalize: Normalization::L2,
            min_proj_norm: 1e-8,
        }
    }
}

impl DescriptorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("support_radius_mr", self.support_radius_mr),
            ("sigma_d_hist_mr", self.sigma_d_hist_mr),
            ("sigma_theta", self.sigma_theta),
            ("min_proj_norm", self.min_proj_norm),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Coordinate plane of the local frame; the name lists the kept axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::XY, Plane::XZ, Plane::YZ];

    pub fn index(self) -> usize {
        match self {
            Plane::XY => 0,
            Plane::XZ => 1,
            Plane::YZ => 2,
        }
    }
}

/// Drops the out-of-plane coordinate.
pub fn project(v: &Point3, plane: Plane) -> (f64, f64) {
    match plane {
        Plane::XY => (v.x, v.y),
        Plane::XZ => (v.x, v.z),
        Plane::YZ => (v.y, v.z),
    }
}

/// Patch geometry expressed in its local reference frame; the keypoint sits
/// at the origin.
#[derive(Debug, Clone)]
pub struct TransformedPatch {
    pub centroids: Vec<Point3>,
    /// Unit normals recomputed from the transformed corners; `None` for
    /// degenerate triangles.
    pub normals: Vec<Option<Point3>>,
}

/// Maps every corner `v` to `((v - p).x_l, (v - p).y_l, (v - p).z_l)` and
/// recomputes centroids and normals from the mapped corners.
pub fn transform_to_lrf(patch: &LocalSurfacePatch, lrf: &Lrf) -> TransformedPatch {
    let mesh = patch.mesh();
    let p = patch.keypoint();
    let local: Vec<Point3> = mesh.vertices().iter().map(|v| lrf.to_local(&(v - p))).collect();
    let mut centroids = Vec::with_capacity(mesh.triangle_count());
    let mut normals = Vec::with_capacity(mesh.triangle_count());
    for t in mesh.triangles() {
        let [a, b, c] = t.0.map(|i| local[i]);
        let (centroid, _, normal) = triangle_geometry(&a, &b, &c);
        centroids.push(centroid);
        normals.push(normal);
    }
    TransformedPatch { centroids, normals }
}

/// `exp(-(u^2 + w^2) / (2 sigma_d)^2)` for a projected centroid; the projected
/// keypoint is the origin.
pub fn length_weight(proj_centroid: (f64, f64), sigma_d: f64) -> f64 {
    let (u, w) = proj_centroid;
    let two_sigma = 2.0 * sigma_d;
    (-(u * u + w * w) / (two_sigma * two_sigma)).exp()
}

/// `exp(-1 / (2 cos(theta) sigma_theta)^2)`, `theta` being the angle between
/// the projected normal and its sector's center line.
pub fn direction_weight(cos_theta: f64, sigma_theta: f64) -> f64 {
    assert!(
        cos_theta > 0.0 && cos_theta <= 1.0 + 1e-12,
        "cos(theta) = {cos_theta} outside (0, 1]"
    );
    let d = 2.0 * cos_theta * sigma_theta;
    (-1.0 / (d * d)).exp()
}

/// [`direction_weight`] divided by its value at `theta = 0`, i.e.
/// `exp(-tan(theta)^2 / (2 sigma_theta)^2)`.
///
/// The common factor cancels under L2 normalization, and this form does not
/// underflow to zero for small `sigma_theta`.
pub fn relative_direction_weight(cos_theta: f64, sigma_theta: f64) -> f64 {
    assert!(
        cos_theta > 0.0 && cos_theta <= 1.0 + 1e-12,
        "cos(theta) = {cos_theta} outside (0, 1]"
    );
    let tan_sq = (1.0 / (cos_theta * cos_theta) - 1.0).max(0.0);
    let d = 2.0 * sigma_theta;
    (-tan_sq / (d * d)).exp()
}

/// Quadrant of a projected centroid; zero coordinates count as non-negative.
pub fn quadrant(u: f64, w: f64) -> usize {
    match (u >= 0.0, w >= 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// Direction sector of a 2D vector and the cosine of its angle to the
/// sector's center line.
///
/// Sector `k` is centered on `k * 45` degrees counter-clockwise from the +u
/// axis and spans +-22.5 degrees; a vector on a boundary belongs to the next
/// sector counter-clockwise.
pub fn direction_sector(nu: f64, nw: f64) -> (usize, f64) {
    let angle = nw.atan2(nu).rem_euclid(std::f64::consts::TAU);
    let k = ((angle + FRAC_PI_4 / 2.0) / FRAC_PI_4).floor() as usize % DIRECTIONS;
    let center = k as f64 * FRAC_PI_4;
    let len = nu.hypot(nw);
    let cos_theta = ((nu * center.cos() + nw * center.sin()) / len).min(1.0);
    (k, cos_theta)
}

/// One plane's 4 x 8 histogram, quadrant-major.
///
/// With [`Normalization::L2`] the direction weights are taken relative to
/// their maximum (see [`relative_direction_weight`]); the normalized result
/// is the same.
pub fn accumulate_plane(
    tp: &TransformedPatch,
    plane: Plane,
    sigma_d: f64,
    params: &DescriptorParams,
) -> [f64; PLANE_LEN] {
    let mut bins = [0.0; PLANE_LEN];
    for (c, n) in tp.centroids.iter().zip(&tp.normals) {
        let Some(n) = n else { continue };
        let (nu, nw) = project(n, plane);
        if nu.hypot(nw) < params.min_proj_norm {
            continue;
        }
        let (u, w) = project(c, plane);
        let q = quadrant(u, w);
        let (d, cos_theta) = direction_sector(nu, nw);
        let direction = match params.normalize {
            Normalization::None => direction_weight(cos_theta, params.sigma_theta),
            Normalization::L2 => relative_direction_weight(cos_theta, params.sigma_theta),
        };
        let amount = length_weight((u, w), sigma_d) * direction;
        bins[q * DIRECTIONS + d] += amount;
        bins[q * DIRECTIONS + (d + DIRECTIONS / 2) % DIRECTIONS] += amount;
    }
    bins
}

/// 96 non-negative bins laid out `[plane][quadrant][direction]` with planes
/// in XY, XZ, YZ order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgndDescriptor(pub [f64; DESCRIPTOR_LEN]);

impl HgndDescriptor {
    pub fn bins(&self) -> &[f64] {
        &self.0
    }

    pub fn plane(&self, plane: Plane) -> &[f64] {
        let start = plane.index() * PLANE_LEN;
        &self.0[start..start + PLANE_LEN]
    }

    pub fn bin(&self, plane: Plane, quadrant: usize, direction: usize) -> f64 {
        self.0[plane.index() * PLANE_LEN + quadrant * DIRECTIONS + direction]
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Descriptor of `patch` in frame `lrf`. Fails with
/// [`Error::EmptyDescriptor`] when no triangle contributed.
pub fn compute_descriptor(
    patch: &LocalSurfacePatch,
    lrf: &Lrf,
    params: &DescriptorParams,
) -> Result<HgndDescriptor> {
    params.validate()?;
    let tp = transform_to_lrf(patch, lrf);
    let sigma_d = patch.mr().to_model(params.sigma_d_hist_mr);
    let mut bins = [0.0; DESCRIPTOR_LEN];
    for plane in Plane::ALL {
        let start = plane.index() * PLANE_LEN;
        bins[start..start + PLANE_LEN].copy_from_slice(&accumulate_plane(&tp, plane, sigma_d, params));
    }
    let norm = bins.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::EmptyDescriptor);
    }
    if params.normalize == Normalization::L2 {
        bins.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(HgndDescriptor(bins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lrf::{compute_lrf, LrfParams};
    use crate::mesh::{MeshResolution, Triangle, TriangleMesh};
    use crate::shapes;

    fn identity_lrf() -> Lrf {
        Lrf {
            x_axis: Point3::x(),
            y_axis: Point3::y(),
            z_axis: Point3::z(),
            eigenvalues: [0.0; 3],
            x_orientation: 1.0,
            y_orientation: 1.0,
        }
    }

    #[test]
    fn projections_drop_one_axis() {
        let v = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(project(&v, Plane::XY), (1.0, 2.0));
        assert_eq!(project(&v, Plane::XZ), (1.0, 3.0));
        assert_eq!(project(&v, Plane::YZ), (2.0, 3.0));
    }

    #[test]
    fn length_weight_values() {
        assert_eq!(length_weight((0.0, 0.0), 3.0), 1.0);
        assert!((length_weight((6.0, 0.0), 3.0) - (-1f64).exp()).abs() < 1e-15);
        assert!((length_weight((0.0, 1.8), 0.3 * 3.0) - (-1f64).exp()).abs() < 1e-15);
        // Default widths over a default support radius: nearly uniform.
        assert!(length_weight((8.5, 0.0), 500.0) >= (-(8.5f64 / 1000.0).powi(2)).exp() - 1e-15);
        assert!(length_weight((8.5, 0.0), 500.0) > 0.99992);
    }

    #[test]
    fn direction_weight_values() {
        assert!((direction_weight(1.0, 500.0) - (-1e-6f64).exp()).abs() < 1e-15);
        assert!((direction_weight(1.0, 500.0) - 0.999999).abs() < 1e-9);
        let c = 22.5f64.to_radians().cos();
        let w = direction_weight(c, 500.0);
        assert!((w - (-1.0 / (2.0 * c * 500.0f64).powi(2)).exp()).abs() < 1e-15);
        assert!((w - 0.9999988).abs() < 1e-7);
        // Narrow widths underflow in the literal form but not relative to the peak.
        assert_eq!(direction_weight(c, 0.005), 0.0);
        let t = 10f64.to_radians();
        let rel = relative_direction_weight(t.cos(), 0.005);
        assert!((rel - (-t.tan().powi(2) / 0.01f64.powi(2)).exp()).abs() < 1e-300);
        assert!(rel > 0.0);
        assert_eq!(relative_direction_weight(1.0, 0.005), 1.0);
        for s in [0.05, 5.0, 500.0] {
            let r = direction_weight(c, s) / direction_weight(1.0, s);
            assert!((relative_direction_weight(c, s) - r).abs() < 1e-12);
        }
        assert!(relative_direction_weight(c, 0.05) < relative_direction_weight(c, 500.0));
    }

    #[test]
    #[should_panic]
    fn direction_weight_rejects_non_positive_cosine() {
        direction_weight(0.0, 1.0);
    }

    #[test]
    fn quadrant_boundaries_are_closed_on_nonnegative() {
        assert_eq!(quadrant(0.0, 0.0), 0);
        assert_eq!(quadrant(-1.0, 0.0), 1);
        assert_eq!(quadrant(-1.0, -1.0), 2);
        assert_eq!(quadrant(0.0, -1.0), 3);
    }

    #[test]
    fn sectors_are_centered_on_multiples_of_45_degrees() {
        for k in 0..8 {
            let a = (k as f64 * 45.0).to_radians();
            let (s, c) = direction_sector(a.cos(), a.sin());
            assert_eq!(s, k);
            assert!((c - 1.0).abs() < 1e-12);
            let (s, c) = direction_sector((a + 0.3).cos(), (a + 0.3).sin());
            assert_eq!(s, k);
            assert!((c - 0.3f64.cos()).abs() < 1e-12);
        }
        // Boundary at +22.5 degrees goes counter-clockwise.
        let b = 22.5f64.to_radians() + 1e-12;
        assert_eq!(direction_sector(b.cos(), b.sin()).0, 1);
        let b = -22.5f64.to_radians() + 1e-12;
        assert_eq!(direction_sector(b.cos(), b.sin()).0, 0);
    }

    fn single_triangle_patch(v: [Point3; 3]) -> LocalSurfacePatch {
        let mesh = TriangleMesh::new(v.to_vec(), vec![Triangle::new(0, 1, 2)]).unwrap();
        LocalSurfacePatch::from_mesh(mesh, Point3::zeros(), 100.0, MeshResolution::new(1.0).unwrap()).unwrap()
    }

    #[test]
    fn single_triangle_double_counts() {
        // Triangle in the plane x = 1 facing +x, centroid in the first quadrant of XY.
        let patch = single_triangle_patch([
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, 2.0, 1.0),
            Point3::new(1.0, 1.0, 2.0),
        ]);
        let tp = transform_to_lrf(&patch, &identity_lrf());
        assert!((tp.normals[0].unwrap() - Point3::x()).norm() < 1e-15);
        let params = DescriptorParams {
            normalize: Normalization::None,
            ..DescriptorParams::default()
        };
        let bins = accumulate_plane(&tp, Plane::XY, 500.0, &params);
        let c = tp.centroids[0];
        let w = length_weight((c.x, c.y), 500.0) * direction_weight(1.0, 500.0);
        assert_eq!(bins[0], w);
        assert_eq!(bins[4], w);
        assert_eq!(bins.iter().sum::<f64>(), 2.0 * w);

        // Normal along +x is perpendicular to the YZ plane: nothing lands there.
        let yz = accumulate_plane(&tp, Plane::YZ, 500.0, &params);
        assert!(yz.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn all_skipped_patch_is_an_error() {
        let patch = single_triangle_patch([Point3::zeros(), Point3::x(), Point3::x() * 2.0]);
        assert!(matches!(
            compute_descriptor(&patch, &identity_lrf(), &DescriptorParams::default()),
            Err(Error::EmptyDescriptor)
        ));
    }

    #[test]
    fn identity_frame_at_origin_keeps_coordinates() {
        let mesh = shapes::rough_terrain(6, 0.5, 2);
        let patch = LocalSurfacePatch::from_mesh(mesh.clone(), Point3::zeros(), 100.0, MeshResolution::new(1.0).unwrap())
            .unwrap();
        let tp = transform_to_lrf(&patch, &identity_lrf());
        assert_eq!(tp.centroids, mesh.centroids());
        for (a, b) in tp.normals.iter().zip(mesh.normals()) {
            assert!((a.unwrap() - b.unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn transformed_normals_are_rotated_world_normals() {
        let mesh = shapes::rough_terrain(25, 2.0, 8);
        let mr = mesh.resolution().unwrap();
        let patch = mesh.crop_patch(mesh.vertices()[300], 8.5, mr).unwrap();
        let lrf = compute_lrf(&patch, &LrfParams::default()).unwrap();
        let tp = transform_to_lrf(&patch, &lrf);
        let r = lrf.rotation();
        assert!(tp.centroids.iter().all(|c| c.norm() <= patch.radius() * (1.0 + 1e-9)));
        for (local, world) in tp.normals.iter().zip(patch.mesh().normals()) {
            // The frame is left-handed (z = y x x), so cross products flip.
            let expected = -(r * world.unwrap());
            assert!((local.unwrap() - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn descriptor_shape_and_norm() {
        let mesh = shapes::rough_terrain(25, 2.0, 8);
        let mr = mesh.resolution().unwrap();
        let patch = mesh.crop_patch(mesh.vertices()[312], 8.5, mr).unwrap();
        let lrf = compute_lrf(&patch, &LrfParams::default()).unwrap();
        let d = compute_descriptor(&patch, &lrf, &DescriptorParams::default()).unwrap();
        assert_eq!(d.bins().len(), 96);
        assert!(d.bins().iter().all(|&b| b >= 0.0));
        assert!((d.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_triangles_give_same_normalized_descriptor() {
        let mesh = shapes::rough_terrain(25, 2.0, 8);
        let mr = mesh.resolution().unwrap();
        let patch = mesh.crop_patch(mesh.vertices()[312], 8.5, mr).unwrap();
        let lrf = compute_lrf(&patch, &LrfParams::default()).unwrap();
        let doubled_mesh = {
            let pm = patch.mesh();
            let mut t = pm.triangles().to_vec();
            t.extend_from_slice(pm.triangles());
            TriangleMesh::new(pm.vertices().to_vec(), t).unwrap()
        };
        let doubled = LocalSurfacePatch::from_mesh(doubled_mesh, patch.keypoint(), 8.5, mr).unwrap();
        let params = DescriptorParams::default();
        let a = compute_descriptor(&patch, &lrf, &params).unwrap();
        let b = compute_descriptor(&doubled, &lrf, &params).unwrap();
        for (x, y) in a.bins().iter().zip(b.bins()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
