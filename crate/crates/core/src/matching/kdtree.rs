//! Exact K-D tree for two-nearest-neighbour queries in `D` dimensions.

use std::cmp::Ordering;

/// A neighbour candidate; ordered by squared distance, then by index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    const NONE: Neighbor = Neighbor {
        index: usize::MAX,
        dist_sq: f64::INFINITY,
    };

    fn precedes(&self, other: &Neighbor) -> bool {
        match self.dist_sq.total_cmp(&other.dist_sq) {
            Ordering::Less => true,
            Ordering::Equal => self.index < other.index,
            Ordering::Greater => false,
        }
    }
}

/// Running best two neighbours.
#[derive(Debug, Clone, Copy)]
pub struct TwoBest(pub [Neighbor; 2]);

impl TwoBest {
    pub fn new() -> Self {
        TwoBest([Neighbor::NONE; 2])
    }

    #[inline]
    pub fn offer(&mut self, index: usize, dist_sq: f64) {
        let n = Neighbor { index, dist_sq };
        if n.precedes(&self.0[0]) {
            self.0[1] = self.0[0];
            self.0[0] = n;
        } else if n.precedes(&self.0[1]) {
            self.0[1] = n;
        }
    }

    fn bound(&self) -> f64 {
        self.0[1].dist_sq
    }
}

impl Default for TwoBest {
    fn default() -> Self {
        Self::new()
    }
}

/// Squared Euclidean distance, summed in index order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// K-D tree over rows of a flat row-major matrix. Splits on the axis of
/// largest spread at the median; queries are exact.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub const DEFAULT_LEAF_SIZE: usize = 8;

    pub fn build(points: &[f64], dim: usize, leaf_size: usize) -> KdTree {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build_node(points, 0, n, leaf_size.max(1));
        }
        tree
    }

    fn build_node(&mut self, points: &[f64], start: usize, end: usize, leaf_size: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= leaf_size {
            return id;
        }
        let dim = self.dim;
        let row = |i: usize| &points[i * dim..(i + 1) * dim];
        let mut best_axis = 0;
        let mut best_spread = 0.0;
        for axis in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = row(i)[axis];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_axis = axis;
            }
        }
        if !(best_spread > 0.0) {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            row(a)[best_axis]
                .total_cmp(&row(b)[best_axis])
                .then(a.cmp(&b))
        });
        let value = row(self.order[mid])[best_axis];
        let left = self.build_node(points, start, mid, leaf_size);
        let right = self.build_node(points, mid, end, leaf_size);
        self.nodes[id] = Node::Split {
            axis: best_axis,
            value,
            left,
            right,
        };
        id
    }

    /// Two nearest rows of `points` (the same slice the tree was built from).
    pub fn nearest_two(&self, points: &[f64], query: &[f64]) -> TwoBest {
        let mut best = TwoBest::new();
        if !self.nodes.is_empty() {
            self.search(points, query, 0, &mut best);
        }
        best
    }

    fn search(&self, points: &[f64], query: &[f64], node: usize, best: &mut TwoBest) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let row = &points[i * self.dim..(i + 1) * self.dim];
                    best.offer(i, squared_distance(query, row));
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(points, query, near, best);
                // `<=` keeps equal-distance, lower-index rows reachable.
                if diff * diff <= best.bound() {
                    self.search(points, query, far, best);
                }
            }
        }
    }
}

/// Exhaustive two-nearest-neighbour scan.
pub fn linear_nearest_two(points: &[f64], dim: usize, query: &[f64]) -> TwoBest {
    let mut best = TwoBest::new();
    for (i, row) in points.chunks_exact(dim).enumerate() {
        best.offer(i, squared_distance(query, row));
    }
    best
}
