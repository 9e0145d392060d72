use std::collections::HashMap;

use super::{check_radius, in_sphere, LocalSurfacePatch, MeshResolution, TriangleMesh};
use crate::error::Result;
use crate::Point3;

type Cell = (i64, i64, i64);

/// Uniform hash grid over triangle centroids for repeated patch cropping.
///
/// Produces exactly the triangle set of [`TriangleMesh::crop_patch`], in the
/// same (ascending) order.
pub struct CentroidGrid<'a> {
    mesh: &'a TriangleMesh,
    cell: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> CentroidGrid<'a> {
    /// `cell_size` is in model units; the support radius is a good choice.
    pub fn new(mesh: &'a TriangleMesh, cell_size: f64) -> Self {
        let cell = if cell_size > 0.0 && cell_size.is_finite() {
            cell_size
        } else {
            1.0
        };
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, c) in mesh.centroids().iter().enumerate() {
            cells.entry(cell_of(c, cell)).or_default().push(i);
        }
        CentroidGrid { mesh, cell, cells }
    }

    pub fn mesh(&self) -> &'a TriangleMesh {
        self.mesh
    }

    pub fn crop(
        &self,
        keypoint: Point3,
        radius_mr: f64,
        mr: MeshResolution,
    ) -> Result<LocalSurfacePatch> {
        check_radius(radius_mr)?;
        let radius = radius_mr * mr.value();
        let r2 = radius * radius;
        let lo = cell_of(&keypoint.add_scalar(-radius), self.cell);
        let hi = cell_of(&keypoint.add_scalar(radius), self.cell);
        let span = (hi.0 - lo.0 + 1) * (hi.1 - lo.1 + 1) * (hi.2 - lo.2 + 1);

        let centroids = self.mesh.centroids();
        let mut ids: Vec<usize> = if span as usize > self.cells.len() {
            (0..centroids.len())
                .filter(|&i| in_sphere(&centroids[i], &keypoint, r2))
                .collect()
        } else {
            let mut ids = Vec::new();
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        if let Some(bucket) = self.cells.get(&(x, y, z)) {
                            ids.extend(
                                bucket
                                    .iter()
                                    .copied()
                                    .filter(|&i| in_sphere(&centroids[i], &keypoint, r2)),
                            );
                        }
                    }
                }
            }
            ids.sort_unstable();
            ids
        };
        ids.dedup();
        LocalSurfacePatch::from_ids(self.mesh, keypoint, radius_mr, mr, ids)
    }
}

fn cell_of(p: &Point3, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}
