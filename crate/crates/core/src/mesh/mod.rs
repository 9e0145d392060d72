//! Indexed triangle meshes, mesh resolution, rigid transforms and
//! support-radius patch cropping.

mod grid;
pub mod ply;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::Point3;

pub use grid::CentroidGrid;

/// Triangles whose area is below this fraction of their squared longest edge
/// are treated as degenerate: they stay in the mesh but carry no normal and
/// are skipped by every weighted sum downstream.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-14;

/// Vertex indices of one triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triangle(pub [usize; 3]);

impl Triangle {
    pub fn new(v0: usize, v1: usize, v2: usize) -> Self {
        Triangle([v0, v1, v2])
    }

    /// Same triangle with the winding reversed.
    pub fn flipped(self) -> Self {
        let [a, b, c] = self.0;
        Triangle([a, c, b])
    }

    fn is_valid(&self, vertex_count: usize) -> bool {
        let [a, b, c] = self.0;
        a < vertex_count && b < vertex_count && c < vertex_count && a != b && b != c && a != c
    }
}

/// Indexed triangle surface with cached per-triangle centroid, area and normal.
///
/// Immutable after construction; every transformation returns a new mesh with
/// its caches rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<Triangle>,
    centroids: Vec<Point3>,
    areas: Vec<f64>,
    normals: Vec<Option<Point3>>,
}

impl TriangleMesh {
    /// Builds a mesh and its caches. Fails on non-finite coordinates, indices
    /// out of range or triangles that repeat a vertex.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<Triangle>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} has a non-finite coordinate")));
        }
        if let Some(i) = triangles.iter().position(|t| !t.is_valid(vertices.len())) {
            return Err(Error::InvalidMesh(format!(
                "triangle {i} {:?} is out of range or repeats a vertex ({} vertices)",
                triangles[i].0,
                vertices.len()
            )));
        }
        Ok(Self::new_unchecked(vertices, triangles))
    }

    fn new_unchecked(vertices: Vec<Point3>, triangles: Vec<Triangle>) -> Self {
        let n = triangles.len();
        let mut centroids = Vec::with_capacity(n);
        let mut areas = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for t in &triangles {
            let [p1, p2, p3] = t.0.map(|i| vertices[i]);
            let (centroid, area, normal) = triangle_geometry(&p1, &p2, &p3);
            centroids.push(centroid);
            areas.push(area);
            normals.push(normal);
        }
        TriangleMesh {
            vertices,
            triangles,
            centroids,
            areas,
            normals,
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn centroids(&self) -> &[Point3] {
        &self.centroids
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Unit normals, `None` for degenerate triangles.
    pub fn normals(&self) -> &[Option<Point3>] {
        &self.normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_degenerate(&self, triangle: usize) -> bool {
        self.normals[triangle].is_none()
    }

    /// The three corner positions of a triangle.
    pub fn corners(&self, triangle: usize) -> [Point3; 3] {
        self.triangles[triangle].0.map(|i| self.vertices[i])
    }

    /// Mean length over all `3 * triangle_count` triangle edges.
    pub fn resolution(&self) -> Result<MeshResolution> {
        mesh_resolution(self)
    }

    /// Maps every vertex through `t` and rebuilds the caches.
    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        if t.is_identity() {
            return self.clone();
        }
        let vertices = self.vertices.iter().map(|v| t.apply(v)).collect();
        TriangleMesh::new_unchecked(vertices, self.triangles.clone())
    }

    /// Same geometry with every triangle's winding reversed.
    pub fn flipped(&self) -> TriangleMesh {
        let triangles = self.triangles.iter().map(|t| t.flipped()).collect();
        TriangleMesh::new_unchecked(self.vertices.clone(), triangles)
    }

    /// Same topology with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<TriangleMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        TriangleMesh::new(vertices, self.triangles.clone())
    }

    /// Disjoint union; vertex indices of later meshes are offset.
    pub fn merge<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let offset = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| Triangle(t.0.map(|i| i + offset))));
        }
        TriangleMesh::new_unchecked(vertices, triangles)
    }

    /// Sub-mesh made of the listed triangles, in the given order, with the
    /// vertex list compacted to the referenced vertices.
    pub fn submesh(&self, triangle_ids: &[usize]) -> TriangleMesh {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(triangle_ids.len());
        for &ti in triangle_ids {
            let t = self.triangles[ti].0.map(|vi| {
                if remap[vi] == usize::MAX {
                    remap[vi] = vertices.len();
                    vertices.push(self.vertices[vi]);
                }
                remap[vi]
            });
            triangles.push(Triangle(t));
        }
        TriangleMesh::new_unchecked(vertices, triangles)
    }

    /// Axis-aligned bounding box as `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Crops the triangles whose centroid lies within `radius_mr * mr` of `keypoint`.
    ///
    /// Linear scan over every triangle; use [`CentroidGrid`] when cropping many
    /// patches from the same mesh.
    pub fn crop_patch(
        &self,
        keypoint: Point3,
        radius_mr: f64,
        mr: MeshResolution,
    ) -> Result<LocalSurfacePatch> {
        check_radius(radius_mr)?;
        let radius = radius_mr * mr.value();
        let r2 = radius * radius;
        let ids: Vec<usize> = self
            .centroids
            .iter()
            .enumerate()
            .filter(|(_, c)| in_sphere(c, &keypoint, r2))
            .map(|(i, _)| i)
            .collect();
        LocalSurfacePatch::from_ids(self, keypoint, radius_mr, mr, ids)
    }
}

/// Centroid, area and unit normal of a triangle.
///
/// The area is `|(p2 - p1) x (p3 - p2)| / 2`; the normal is `None` when the
/// triangle is degenerate (see [`DEGENERATE_AREA_RATIO`]).
pub fn triangle_geometry(p1: &Point3, p2: &Point3, p3: &Point3) -> (Point3, f64, Option<Point3>) {
    let centroid = (p1 + p2 + p3) / 3.0;
    let cross = (p2 - p1).cross(&(p3 - p2));
    let norm = cross.norm();
    let area = norm / 2.0;
    let longest = (p2 - p1)
        .norm_squared()
        .max((p3 - p2).norm_squared())
        .max((p1 - p3).norm_squared());
    let normal = if longest > 0.0 && area > DEGENERATE_AREA_RATIO * longest {
        Some(cross / norm)
    } else {
        None
    };
    (centroid, area, normal)
}

#[inline]
pub(crate) fn in_sphere(c: &Point3, center: &Point3, r2: f64) -> bool {
    (c - center).norm_squared() <= r2
}

fn check_radius(radius_mr: f64) -> Result<()> {
    if radius_mr > 0.0 && radius_mr.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "support radius must be positive, got {radius_mr}"
        )))
    }
}

/// Mesh resolution: mean triangle edge length, in model units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MeshResolution(f64);

impl MeshResolution {
    pub fn new(mr: f64) -> Result<Self> {
        if mr > 0.0 && mr.is_finite() {
            Ok(MeshResolution(mr))
        } else {
            Err(Error::InvalidParameter(format!(
                "mesh resolution must be positive, got {mr}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Converts a length in mr units to model units.
    pub fn to_model(self, length_mr: f64) -> f64 {
        length_mr * self.0
    }
}

/// Mean of all `3 * |triangles|` edge lengths; shared edges count once per
/// incident triangle.
pub fn mesh_resolution(mesh: &TriangleMesh) -> Result<MeshResolution> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyInput("mesh has no triangles"));
    }
    let total: f64 = mesh
        .triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.0.map(|i| mesh.vertices[i]);
            (b - a).norm() + (c - b).norm() + (a - c).norm()
        })
        .sum();
    MeshResolution::new(total / (3 * mesh.triangles.len()) as f64)
        .map_err(|_| Error::InvalidMesh("every edge has zero length".into()))
}

/// Rotation followed by translation: `v -> R v + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Point3,
}

impl RigidTransform {
    pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

    pub fn new(rotation: Matrix3<f64>, translation: Point3) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(err <= Self::ORTHONORMAL_TOLERANCE) {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max |R^T R - I| = {err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > Self::ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidTransform(format!("rotation determinant is {det}")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Point3::zeros(),
        }
    }

    pub fn translation_only(translation: Point3) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Point3, angle: f64, translation: Point3) -> Result<Self> {
        let axis = nalgebra::Unit::try_new(axis, 1e-300)
            .ok_or_else(|| Error::InvalidTransform("zero rotation axis".into()))?;
        let rotation = nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
        RigidTransform::new(rotation, translation)
    }

    /// Parses the 3x4 matrix `[R | t]` given row-major.
    pub fn from_row_major(values: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8],
            values[9], values[10],
        );
        let translation = Point3::new(values[3], values[7], values[11]);
        RigidTransform::new(rotation, translation)
    }

    /// The 3x4 matrix `[R | t]` in row-major order.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Point3 {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Point3::zeros()
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    /// Rotates a direction; translation does not apply.
    pub fn apply_vector(&self, v: &Point3) -> Point3 {
        self.rotation * v
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// `mesh` with every vertex mapped through `t`.
pub fn apply_transform(mesh: &TriangleMesh, t: &RigidTransform) -> TriangleMesh {
    mesh.transformed(t)
}

/// Sub-mesh cut out by the support sphere around a keypoint.
#[derive(Debug, Clone)]
pub struct LocalSurfacePatch {
    keypoint: Point3,
    radius_mr: f64,
    mr: MeshResolution,
    mesh: TriangleMesh,
    source_triangles: Vec<usize>,
}

impl LocalSurfacePatch {
    fn from_ids(
        parent: &TriangleMesh,
        keypoint: Point3,
        radius_mr: f64,
        mr: MeshResolution,
        ids: Vec<usize>,
    ) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyPatch);
        }
        Ok(LocalSurfacePatch {
            keypoint,
            radius_mr,
            mr,
            mesh: parent.submesh(&ids),
            source_triangles: ids,
        })
    }

    /// Wraps an already cut mesh as a patch around `keypoint`. Every
    /// centroid must lie within the support radius.
    pub fn from_mesh(
        mesh: TriangleMesh,
        keypoint: Point3,
        radius_mr: f64,
        mr: MeshResolution,
    ) -> Result<Self> {
        check_radius(radius_mr)?;
        if mesh.triangle_count() == 0 {
            return Err(Error::EmptyPatch);
        }
        let r2 = mr.to_model(radius_mr).powi(2);
        if let Some(i) = mesh.centroids().iter().position(|c| !in_sphere(c, &keypoint, r2)) {
            return Err(Error::InvalidMesh(format!(
                "triangle {i} centroid lies outside the support radius"
            )));
        }
        let source_triangles = (0..mesh.triangle_count()).collect();
        Ok(LocalSurfacePatch {
            keypoint,
            radius_mr,
            mr,
            mesh,
            source_triangles,
        })
    }

    pub fn keypoint(&self) -> Point3 {
        self.keypoint
    }

    pub fn radius_mr(&self) -> f64 {
        self.radius_mr
    }

    /// Support radius in model units.
    pub fn radius(&self) -> f64 {
        self.mr.to_model(self.radius_mr)
    }

    pub fn mr(&self) -> MeshResolution {
        self.mr
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Index of each patch triangle in the mesh it was cropped from.
    pub fn source_triangles(&self) -> &[usize] {
        &self.source_triangles
    }

    /// The patch mapped through `t`; the keypoint moves with it.
    pub fn transformed(&self, t: &RigidTransform) -> LocalSurfacePatch {
        LocalSurfacePatch {
            keypoint: t.apply(&self.keypoint),
            radius_mr: self.radius_mr,
            mr: self.mr,
            mesh: self.mesh.transformed(t),
            source_triangles: self.source_triangles.clone(),
        }
    }

    /// Same patch with reversed triangle windings.
    pub fn flipped(&self) -> LocalSurfacePatch {
        LocalSurfacePatch {
            mesh: self.mesh.flipped(),
            ..self.clone()
        }
    }
}

/// Crops the patch of `radius_mr` around `keypoint` by a linear scan.
pub fn crop_patch(
    mesh: &TriangleMesh,
    keypoint: Point3,
    radius_mr: f64,
    mr: MeshResolution,
) -> Result<LocalSurfacePatch> {
    mesh.crop_patch(keypoint, radius_mr, mr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn tri_mesh(points: [[f64; 3]; 3]) -> TriangleMesh {
        TriangleMesh::new(
            points.iter().map(|p| Point3::from(*p)).collect(),
            vec![Triangle::new(0, 1, 2)],
        )
        .unwrap()
    }

    #[test]
    fn resolution_of_345_triangle() {
        let m = tri_mesh([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 4.0, 0.0]]);
        assert_eq!(m.resolution().unwrap().value(), 4.0);
    }

    #[test]
    fn resolution_of_equilateral_triangles() {
        let h = 3f64.sqrt() / 2.0;
        let m = tri_mesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]]);
        assert!((m.resolution().unwrap().value() - 1.0).abs() < 1e-15);

        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(1.0, 2.0 * h, 0.0),
        ];
        let two = TriangleMesh::new(v, vec![Triangle::new(0, 1, 2), Triangle::new(0, 2, 1)])
            .unwrap();
        assert!((two.resolution().unwrap().value() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_mesh_has_no_resolution() {
        let m = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(m.resolution(), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn rejects_bad_triangles() {
        let v = vec![Point3::zeros(), Point3::x(), Point3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![Triangle::new(0, 1, 3)]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![Triangle::new(0, 1, 1)]).is_err());
        let mut bad = v;
        bad[2].z = f64::NAN;
        assert!(TriangleMesh::new(bad, vec![Triangle::new(0, 1, 2)]).is_err());
    }

    #[test]
    fn caches_follow_definitions() {
        let m = shapes::bumpy_torus(12, 8, 3.0, 1.0, 0.2, 7);
        for i in 0..m.triangle_count() {
            let [a, b, c] = m.corners(i);
            let mean = (a + b + c) / 3.0;
            assert!((m.centroids()[i] - mean).norm() <= 1e-12 * mean.norm().max(1.0));
            assert_eq!(m.areas()[i], (b - a).cross(&(c - b)).norm() / 2.0);
            let n = m.normals()[i].unwrap();
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_triangle_is_degenerate() {
        let m = tri_mesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(m.is_degenerate(0));
        assert_eq!(m.areas()[0], 0.0);
    }

    #[test]
    fn identity_transform_keeps_vertices_bitwise() {
        let m = shapes::bumpy_sphere(6, 8, 1.0, 0.1, 3);
        let t = m.transformed(&RigidTransform::identity());
        assert_eq!(m.vertices(), t.vertices());
    }

    #[test]
    fn translation_preserves_areas_and_resolution() {
        let m = shapes::bumpy_sphere(6, 8, 1.0, 0.1, 3);
        let t = m.transformed(&RigidTransform::translation_only(Point3::new(10.0, -3.0, 2.5)));
        for (a, b) in m.areas().iter().zip(t.areas()) {
            assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
        }
        let (r0, r1) = (m.resolution().unwrap().value(), t.resolution().unwrap().value());
        assert!((r0 - r1).abs() <= 1e-9 * r0);
    }

    #[test]
    fn rotation_rotates_normals() {
        let m = shapes::bumpy_sphere(6, 8, 1.0, 0.1, 3);
        let rt = RigidTransform::from_axis_angle(Point3::new(1.0, 2.0, -0.5), 1.1, Point3::new(1.0, 2.0, 3.0))
            .unwrap();
        let t = m.transformed(&rt);
        for (n0, n1) in m.normals().iter().zip(t.normals()) {
            let expected = rt.apply_vector(&n0.unwrap());
            assert!((expected - n1.unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn transform_round_trips_through_row_major() {
        let rt = RigidTransform::from_axis_angle(Point3::new(0.3, -1.0, 0.2), 2.0, Point3::new(4.0, 5.0, 6.0))
            .unwrap();
        let back = RigidTransform::from_row_major(&rt.to_row_major()).unwrap();
        assert_eq!(rt, back);
        let p = Point3::new(1.0, -2.0, 0.5);
        assert!((rt.inverse().apply(&rt.apply(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn rejects_reflection() {
        let mut r = Matrix3::identity();
        r[(2, 2)] = -1.0;
        assert!(RigidTransform::new(r, Point3::zeros()).is_err());
        assert!(RigidTransform::new(Matrix3::identity() * 2.0, Point3::zeros()).is_err());
    }

    #[test]
    fn crop_with_huge_radius_keeps_everything() {
        let m = shapes::bumpy_sphere(6, 8, 1.0, 0.1, 3);
        let mr = m.resolution().unwrap();
        let center = m.vertices().iter().sum::<Point3>() / m.vertex_count() as f64;
        let patch = m.crop_patch(center, 1e6, mr).unwrap();
        assert_eq!(patch.mesh().triangle_count(), m.triangle_count());
        assert_eq!(patch.mesh().vertex_count(), m.vertex_count());
    }

    #[test]
    fn crop_with_tiny_radius_is_empty() {
        let m = shapes::bumpy_sphere(6, 8, 1.0, 0.1, 3);
        let mr = m.resolution().unwrap();
        let far = Point3::new(100.0, 0.0, 0.0);
        assert!(matches!(m.crop_patch(far, 1.0, mr), Err(Error::EmptyPatch)));
        assert!(m.crop_patch(far, 0.0, mr).is_err());
    }

    #[test]
    fn crop_of_planar_grid_matches_brute_force_count() {
        let m = shapes::grid(21, 21, 1.0);
        let mr = m.resolution().unwrap();
        let center = Point3::new(10.0, 10.0, 0.0);
        let radius_mr = 10.0 / mr.value();
        let radius = radius_mr * mr.value();
        let expected = m
            .triangles()
            .iter()
            .filter(|t| {
                let [a, b, c] = t.0.map(|i| m.vertices()[i]);
                let cx = (a.x + b.x + c.x) / 3.0 - center.x;
                let cy = (a.y + b.y + c.y) / 3.0 - center.y;
                (cx * cx + cy * cy).sqrt() <= radius
            })
            .count();
        let patch = m.crop_patch(center, radius_mr, mr).unwrap();
        assert_eq!(patch.mesh().triangle_count(), expected);
        for c in patch.mesh().centroids() {
            assert!((c - center).norm() <= radius * (1.0 + 1e-12));
        }
    }
}
