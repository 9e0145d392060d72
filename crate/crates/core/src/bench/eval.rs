//! Ground-truth correspondences and Recall vs 1-Precision curves.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::matching::MatchCandidate;
use crate::Point3;

/// Relevant (model keypoint, scene keypoint) pairs; TP + FN of the protocol.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pairs: Vec<(usize, usize)>,
    lookup: HashSet<(usize, usize)>,
}

impl CorrespondenceSet {
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Self {
        let lookup = pairs.iter().copied().collect();
        CorrespondenceSet { pairs, lookup }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, model: usize, scene: usize) -> bool {
        self.lookup.contains(&(model, scene))
    }
}

/// Greedy one-to-one pairing of `targets` (model keypoints already mapped
/// into the scene) with scene keypoints closer than `tolerance`.
///
/// All pairs within tolerance are taken in ascending distance (ties by
/// target index, then scene index); a pair is kept when neither side has been
/// used yet.
pub fn ground_truth_correspondences(
    targets: &[Point3],
    scene: &[Point3],
    tolerance: f64,
) -> Result<CorrespondenceSet> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
    }
    let cell = |p: &Point3| {
        let c = p / tolerance;
        (c.x.floor() as i64, c.y.floor() as i64, c.z.floor() as i64)
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (j, s) in scene.iter().enumerate() {
        buckets.entry(cell(s)).or_default().push(j);
    }
    let t2 = tolerance * tolerance;
    let mut within = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        let (cx, cy, cz) = cell(t);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(js) = buckets.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in js {
                        let d2 = (scene[j] - t).norm_squared();
                        if d2 <= t2 {
                            within.push((d2, i, j));
                        }
                    }
                }
            }
        }
    }
    Ok(greedy(within, targets.len(), scene.len()))
}

fn greedy(mut within: Vec<(f64, usize, usize)>, n_targets: usize, n_scene: usize) -> CorrespondenceSet {
    within.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut target_used = vec![false; n_targets];
    let mut scene_used = vec![false; n_scene];
    let mut pairs = Vec::new();
    for (_, i, j) in within {
        if !target_used[i] && !scene_used[j] {
            target_used[i] = true;
            scene_used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    CorrespondenceSet::from_pairs(pairs)
}

/// One point of the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub epsilon: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub recall: f64,
    /// `FP / (FP + TP)`, or 0 when there are no candidates.
    pub one_minus_precision: f64,
}

impl PrPoint {
    pub fn from_counts(epsilon: f64, tp: usize, fp: usize, fn_: usize) -> Self {
        let recall = tp as f64 / (tp + fn_) as f64;
        let one_minus_precision = if tp + fp == 0 {
            0.0
        } else {
            fp as f64 / (tp + fp) as f64
        };
        PrPoint {
            epsilon,
            tp,
            fp,
            fn_,
            recall,
            one_minus_precision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn peak_recall(&self) -> f64 {
        self.points.iter().map(|p| p.recall).fold(0.0, f64::max)
    }

    /// Point whose epsilon is closest to `epsilon`.
    pub fn at(&self, epsilon: f64) -> Option<&PrPoint> {
        self.points
            .iter()
            .min_by(|a, b| (a.epsilon - epsilon).abs().total_cmp(&(b.epsilon - epsilon).abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,tp,fp,fn,recall,one_minus_precision\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{:.6},{:.6}\n",
                p.epsilon, p.tp, p.fp, p.fn_, p.recall, p.one_minus_precision
            ));
        }
        s
    }
}

/// Curve from explicit candidate sets, one `(epsilon, pairs)` entry per
/// threshold; pairs are `(model keypoint, scene keypoint)`.
pub fn pr_curve(candidates_by_eps: &[(f64, Vec<(usize, usize)>)], gt: &CorrespondenceSet) -> Result<PrCurve> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let points = candidates_by_eps
        .iter()
        .map(|(eps, cands)| {
            let tp = cands.iter().filter(|(m, s)| gt.contains(*m, *s)).count();
            let fp = cands.len() - tp;
            PrPoint::from_counts(*eps, tp, fp, gt.len() - tp.min(gt.len()))
        })
        .collect();
    Ok(PrCurve { points })
}

/// Curve from the unthresholded nearest-neighbour results: at each epsilon
/// the candidates are those with `ratio < epsilon`. `model_ids` and
/// `scene_ids` map descriptor rows to keypoint indices.
pub fn pr_curve_from_neighbors(
    neighbors: &[MatchCandidate],
    model_ids: &[usize],
    scene_ids: &[usize],
    eps_grid: &[f64],
    gt: &CorrespondenceSet,
) -> Result<PrCurve> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let scored: Vec<(f64, bool)> = neighbors
        .iter()
        .map(|c| (c.ratio, gt.contains(model_ids[c.model_index], scene_ids[c.scene_index])))
        .collect();
    let points = eps_grid
        .iter()
        .map(|&eps| {
            let (mut tp, mut fp) = (0, 0);
            for &(ratio, correct) in &scored {
                if ratio < eps {
                    if correct {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            PrPoint::from_counts(eps, tp, fp, gt.len() - tp)
        })
        .collect();
    Ok(PrCurve { points })
}

/// `k / n` for `k = 1..=n`.
pub fn uniform_eps_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(targets: &[Point3], scene: &[Point3], tol: f64) -> CorrespondenceSet {
        let mut within = Vec::new();
        for (i, t) in targets.iter().enumerate() {
            for (j, s) in scene.iter().enumerate() {
                let d2 = (s - t).norm_squared();
                if d2 <= tol * tol {
                    within.push((d2, i, j));
                }
            }
        }
        greedy(within, targets.len(), scene.len())
    }

    #[test]
    fn exact_copies_pair_one_to_one() {
        let pts: Vec<Point3> = (0..30).map(|i| Point3::new(i as f64 * 3.0, 0.0, 1.0)).collect();
        let gt = ground_truth_correspondences(&pts, &pts, 2.0).unwrap();
        assert_eq!(gt.pairs(), (0..30).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn displaced_scene_has_no_correspondences() {
        let pts = vec![Point3::zeros(), Point3::new(1.0, 0.0, 0.0)];
        let far: Vec<Point3> = pts.iter().map(|p| p + Point3::new(0.0, 5.0, 0.0)).collect();
        assert!(ground_truth_correspondences(&pts, &far, 2.0).unwrap().is_empty());
    }

    #[test]
    fn grid_lookup_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let targets: Vec<Point3> = (0..400)
            .map(|_| Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-2.0..2.0)))
            .collect();
        let scene: Vec<Point3> = targets
            .iter()
            .map(|t| t + Point3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0))
            .collect();
        for tol in [0.2, 0.5, 1.0, 2.0] {
            assert_eq!(ground_truth_correspondences(&targets, &scene, tol).unwrap(), brute_force(&targets, &scene, tol));
        }
    }

    #[test]
    fn counts_give_recall_and_precision() {
        let p = PrPoint::from_counts(0.5, 3, 1, 1);
        assert_eq!(p.recall, 0.75);
        assert_eq!(p.one_minus_precision, 0.25);
        assert_eq!(PrPoint::from_counts(0.1, 0, 0, 4).one_minus_precision, 0.0);
    }

    #[test]
    fn explicit_candidates_curve() {
        let gt = CorrespondenceSet::from_pairs(vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        let curve = pr_curve(
            &[(0.5, vec![(0, 0)]), (1.0, vec![(0, 0), (1, 1), (2, 2), (3, 1)])],
            &gt,
        )
        .unwrap();
        assert_eq!((curve.points[0].tp, curve.points[0].fp, curve.points[0].fn_), (1, 0, 3));
        assert_eq!((curve.points[1].tp, curve.points[1].fp, curve.points[1].fn_), (3, 1, 1));
        assert!(pr_curve(&[], &CorrespondenceSet::default()).is_err());
    }

    #[test]
    fn eps_grid_is_exact_at_fiftieths() {
        let g = uniform_eps_grid(50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[39], 0.8);
        assert_eq!(g[49], 1.0);
    }
}
