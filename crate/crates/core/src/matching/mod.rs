//! Nearest/second-nearest descriptor matching with the ratio test.
//!
//! Every scene descriptor is queried against the model set; it yields a
//! candidate correspondence to its nearest model descriptor when
//! `d1 / d2 < epsilon`. Distances are Euclidean and the search is exact.
//! Equal distances are broken towards the lower model index.

pub mod kdtree;

use log::debug;
use rayon::prelude::*;

use crate::descriptor::io::DescriptorRecord;
use crate::descriptor::HgndDescriptor;
use crate::error::{Error, Result};
use crate::Point3;

pub use kdtree::{linear_nearest_two, KdTree, Neighbor, TwoBest};

/// Descriptors of one mesh with their keypoints, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    values: Vec<f64>,
    keypoints: Vec<Point3>,
    ids: Vec<u64>,
    pub label: String,
}

impl DescriptorSet {
    pub fn new(dim: usize, label: impl Into<String>) -> Self {
        DescriptorSet {
            dim,
            values: Vec::new(),
            keypoints: Vec::new(),
            ids: Vec::new(),
            label: label.into(),
        }
    }

    /// Appends one descriptor. `id` is the caller's keypoint identifier
    /// (for example a vertex index).
    pub fn push(&mut self, id: u64, keypoint: Point3, values: &[f64]) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: values.len(),
            });
        }
        self.values.extend_from_slice(values);
        self.keypoints.push(keypoint);
        self.ids.push(id);
        Ok(())
    }

    pub fn from_descriptors<'a>(
        label: impl Into<String>,
        items: impl IntoIterator<Item = (u64, Point3, &'a HgndDescriptor)>,
    ) -> Self {
        let mut set = DescriptorSet::new(crate::DESCRIPTOR_LEN, label);
        for (id, kp, d) in items {
            set.push(id, kp, d.bins()).expect("HGND descriptors have a fixed length");
        }
        set
    }

    /// Builds a set from file records; all records must share one dimension.
    pub fn from_records(label: impl Into<String>, records: &[DescriptorRecord]) -> Result<Self> {
        let dim = records.first().map_or(crate::DESCRIPTOR_LEN, |r| r.values.len());
        let mut set = DescriptorSet::new(dim, label);
        for r in records {
            set.push(r.index, r.keypoint, &r.values)?;
        }
        Ok(set)
    }

    pub fn to_records(&self) -> Vec<DescriptorRecord> {
        (0..self.len())
            .map(|i| DescriptorRecord {
                index: self.ids[i],
                keypoint: self.keypoints[i],
                values: self.descriptor(i).to_vec(),
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn keypoints(&self) -> &[Point3] {
        &self.keypoints
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// K-D tree unless the dimension exceeds [`IndexOptions::max_tree_dim`].
    #[default]
    Auto,
    KdTree,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    pub strategy: SearchStrategy,
    pub leaf_size: usize,
    /// Above this dimension `Auto` falls back to a linear scan.
    pub max_tree_dim: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            strategy: SearchStrategy::Auto,
            leaf_size: KdTree::DEFAULT_LEAF_SIZE,
            max_tree_dim: 256,
        }
    }
}

/// Immutable exact 2-NN index over a model descriptor set.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    set: DescriptorSet,
    tree: Option<KdTree>,
}

impl SearchIndex {
    pub fn build(set: DescriptorSet, options: IndexOptions) -> Result<Self> {
        if set.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: set.len(),
            });
        }
        let use_tree = match options.strategy {
            SearchStrategy::KdTree => true,
            SearchStrategy::Linear => false,
            SearchStrategy::Auto => set.dim <= options.max_tree_dim,
        };
        let tree = use_tree.then(|| KdTree::build(&set.values, set.dim, options.leaf_size));
        Ok(SearchIndex { set, tree })
    }

    pub fn set(&self) -> &DescriptorSet {
        &self.set
    }

    pub fn uses_tree(&self) -> bool {
        self.tree.is_some()
    }

    /// Nearest and second-nearest model rows of `query`.
    pub fn nearest_two(&self, query: &[f64]) -> Result<[Neighbor; 2]> {
        if query.len() != self.set.dim {
            return Err(Error::DimensionMismatch {
                expected: self.set.dim,
                got: query.len(),
            });
        }
        let best = match &self.tree {
            Some(tree) => tree.nearest_two(&self.set.values, query),
            None => linear_nearest_two(&self.set.values, self.set.dim, query),
        };
        Ok(best.0)
    }
}

/// Builds an index with default options.
pub fn build_index(set: DescriptorSet) -> Result<SearchIndex> {
    SearchIndex::build(set, IndexOptions::default())
}

/// Nearest-neighbour result of one scene descriptor. Indices are row
/// positions in the scene and model sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub scene_index: usize,
    pub model_index: usize,
    pub d1: f64,
    pub d2: f64,
    /// `d1 / d2`, or 0 when both distances are 0.
    pub ratio: f64,
}

impl MatchCandidate {
    pub fn accepted(&self, epsilon: f64) -> bool {
        self.ratio < epsilon
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")))
    }
}

/// Nearest model descriptor and distance ratio for every scene descriptor,
/// in scene order, without thresholding.
pub fn nearest_neighbors(scene: &DescriptorSet, model: &SearchIndex) -> Result<Vec<MatchCandidate>> {
    if scene.dim() != model.set().dim() {
        return Err(Error::DimensionMismatch {
            expected: model.set().dim(),
            got: scene.dim(),
        });
    }
    (0..scene.len())
        .into_par_iter()
        .map(|i| {
            let [n1, n2] = model.nearest_two(scene.descriptor(i))?;
            let (d1, d2) = (n1.dist_sq.sqrt(), n2.dist_sq.sqrt());
            let ratio = if d2 > 0.0 {
                d1 / d2
            } else {
                debug!("scene descriptor {i}: duplicate model descriptors at distance 0");
                0.0
            };
            Ok(MatchCandidate {
                scene_index: i,
                model_index: n1.index,
                d1,
                d2,
                ratio,
            })
        })
        .collect()
}

/// Ratio-test matches: at most one candidate per scene descriptor, kept when
/// `d1 / d2 < epsilon`.
pub fn match_descriptors(
    scene: &DescriptorSet,
    model: &SearchIndex,
    epsilon: f64,
) -> Result<Vec<MatchCandidate>> {
    check_epsilon(epsilon)?;
    Ok(nearest_neighbors(scene, model)?
        .into_iter()
        .filter(|c| c.accepted(epsilon))
        .collect())
}
