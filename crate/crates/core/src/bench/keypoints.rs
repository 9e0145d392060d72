//! Uniform keypoint sampling over mesh vertices.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::TriangleMesh;
use crate::Point3;

/// Indices of `count` distinct vertices drawn uniformly without replacement,
/// in ascending order. Every vertex is returned when `count` exceeds the
/// vertex count. `stream` selects an independent random sequence for the
/// same seed.
pub fn sample_vertex_indices(mesh: &TriangleMesh, count: usize, seed: u64, stream: u64) -> Vec<usize> {
    sample_indices(mesh.vertex_count(), count, seed, stream)
}

/// `count` distinct values of `0..n`, ascending; all of them when `count >= n`.
pub fn sample_indices(n: usize, count: usize, seed: u64, stream: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut ids = index::sample(&mut rng, n, count).into_vec();
    ids.sort_unstable();
    ids
}

/// Positions of [`sample_vertex_indices`].
pub fn sample_keypoints(mesh: &TriangleMesh, count: usize, seed: u64) -> Vec<Point3> {
    sample_vertex_indices(mesh, count, seed, 0)
        .into_iter()
        .map(|i| mesh.vertices()[i])
        .collect()
}
