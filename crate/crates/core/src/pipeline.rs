//! Keypoint description: patch cropping, frame and descriptor per keypoint.

use std::fmt;
use std::time::{Duration, Instant};

use log::debug;
use rayon::prelude::*;

use crate::descriptor::{compute_descriptor, DescriptorParams, HgndDescriptor};
use crate::error::{Error, Result};
use crate::lrf::{compute_lrf, LrfParams};
use crate::mesh::{CentroidGrid, MeshResolution, TriangleMesh};
use crate::Point3;

/// Why a keypoint produced no descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    EmptyPatch,
    DegeneratePatch,
    IllConditionedLrf,
    EmptyDescriptor,
}

impl DropReason {
    pub fn code(self) -> &'static str {
        match self {
            DropReason::EmptyPatch => "empty_patch",
            DropReason::DegeneratePatch => "degenerate_patch",
            DropReason::IllConditionedLrf => "ill_conditioned_lrf",
            DropReason::EmptyDescriptor => "empty_descriptor",
        }
    }

    fn from_error(e: &Error) -> Option<DropReason> {
        match e {
            Error::EmptyPatch => Some(DropReason::EmptyPatch),
            Error::DegeneratePatch => Some(DropReason::DegeneratePatch),
            Error::IllConditioned { .. } => Some(DropReason::IllConditionedLrf),
            Error::EmptyDescriptor => Some(DropReason::EmptyDescriptor),
            _ => None,
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Frame and histogram parameters used together.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureParams {
    pub lrf: LrfParams,
    pub descriptor: DescriptorParams,
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        self.lrf.validate()?;
        self.descriptor.validate()
    }
}

/// Worker time spent per stage, summed over keypoints (and so over threads).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub crop: Duration,
    pub lrf: Duration,
    pub histogram: Duration,
}

impl StageTimes {
    fn add(mut self, o: StageTimes) -> StageTimes {
        self.crop += o.crop;
        self.lrf += o.lrf;
        self.histogram += o.histogram;
        self
    }
}

/// Descriptor of one keypoint.
pub fn describe_keypoint(
    grid: &CentroidGrid<'_>,
    keypoint: Point3,
    mr: MeshResolution,
    params: &FeatureParams,
) -> Result<HgndDescriptor> {
    describe_timed(grid, keypoint, mr, params, &mut StageTimes::default())
}

fn describe_timed(
    grid: &CentroidGrid<'_>,
    keypoint: Point3,
    mr: MeshResolution,
    params: &FeatureParams,
    times: &mut StageTimes,
) -> Result<HgndDescriptor> {
    let t = Instant::now();
    let patch = grid.crop(keypoint, params.descriptor.support_radius_mr, mr);
    times.crop += t.elapsed();
    let patch = patch?;
    let t = Instant::now();
    let lrf = compute_lrf(&patch, &params.lrf);
    times.lrf += t.elapsed();
    let lrf = lrf?;
    let t = Instant::now();
    let d = compute_descriptor(&patch, &lrf, &params.descriptor);
    times.histogram += t.elapsed();
    d
}

/// Outcome per keypoint, in keypoint order.
pub type Described = Vec<Result<HgndDescriptor, DropReason>>;

/// Describes every keypoint in parallel, preserving order. `mr` scales all
/// mr-unit parameters; pass the mesh's own resolution unless a shared
/// reference scale is wanted.
///
/// Per-keypoint failures become [`DropReason`]s; invalid parameters fail the call.
pub fn describe_keypoints(
    mesh: &TriangleMesh,
    keypoints: &[Point3],
    mr: MeshResolution,
    params: &FeatureParams,
) -> Result<Described> {
    describe_keypoints_timed(mesh, keypoints, mr, params).map(|(d, _)| d)
}

/// [`describe_keypoints`] with the per-stage worker times.
pub fn describe_keypoints_timed(
    mesh: &TriangleMesh,
    keypoints: &[Point3],
    mr: MeshResolution,
    params: &FeatureParams,
) -> Result<(Described, StageTimes)> {
    params.validate()?;
    let grid = CentroidGrid::new(mesh, mr.to_model(params.descriptor.support_radius_mr));
    let results: Vec<(Result<Result<HgndDescriptor, DropReason>>, StageTimes)> = keypoints
        .par_iter()
        .enumerate()
        .map(|(i, kp)| {
            let mut times = StageTimes::default();
            let out = match describe_timed(&grid, *kp, mr, params, &mut times) {
                Ok(d) => Ok(Ok(d)),
                Err(e) => match DropReason::from_error(&e) {
                    Some(reason) => {
                        debug!("keypoint {i} dropped: {reason}");
                        Ok(Err(reason))
                    }
                    None => Err(e),
                },
            };
            (out, times)
        })
        .collect();
    let mut total = StageTimes::default();
    let mut described = Vec::with_capacity(results.len());
    for (r, t) in results {
        total = total.add(t);
        described.push(r?);
    }
    Ok((described, total))
}
