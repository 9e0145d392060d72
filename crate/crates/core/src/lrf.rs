//! Local reference frame from the distance- and area-weighted triangle
//! scatter matrix, with sign disambiguation of the two principal axes.
//!
//! The frame of a patch around keypoint `p` is built in three steps:
//!
//! 1. every triangle contributes the closed-form second moment `M_i` of its
//!    surface about `p`, weighted by a Gaussian of its centroid distance
//!    (`w_d`) and by its share of the total area (`w_s`);
//! 2. the eigenvectors of the two largest eigenvalues give the x and y axis
//!    candidates;
//! 3. each candidate is oriented towards the weighted mass of the centroid
//!    offsets, and `z = y x x`.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mesh::LocalSurfacePatch;
use crate::Point3;

/// Relative eigen-gap `(l1 - l2) / l1` below which the frame is rejected.
pub const MIN_RELATIVE_EIGEN_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrfParams {
    /// Width of the centroid-distance Gaussian, in mr units.
    pub sigma_d_lrf_mr: f64,
}

impl Default for LrfParams {
    fn default() -> Self {
        LrfParams { sigma_d_lrf_mr: 5.0 }
    }
}

impl LrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_d_lrf_mr > 0.0 && self.sigma_d_lrf_mr.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "sigma_d_lrf must be positive, got {}",
                self.sigma_d_lrf_mr
            )))
        }
    }
}

/// Symmetric positive semi-definite 3x3 second-moment matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterMatrix(pub Matrix3<f64>);

impl ScatterMatrix {
    pub fn zeros() -> Self {
        ScatterMatrix(Matrix3::zeros())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Closed-form scatter of a triangle about `p`:
/// `(1/12) * (sum_m sum_n d_m d_n^T + sum_m d_m d_m^T)` with `d_m = p_m - p`.
///
/// This is the mean of `(q - p)(q - p)^T` over points `q` uniformly
/// distributed on the triangle.
pub fn triangle_scatter(p1: &Point3, p2: &Point3, p3: &Point3, p: &Point3) -> ScatterMatrix {
    let d = [p1 - p, p2 - p, p3 - p];
    let sum = d[0] + d[1] + d[2];
    let mut m = sum * sum.transpose();
    for dm in &d {
        m += dm * dm.transpose();
    }
    ScatterMatrix(m / 12.0)
}

/// Gaussian centroid weight `exp(-|p_c - p|^2 / (2 sigma_d)^2)`.
pub fn distance_weight(centroid: &Point3, p: &Point3, sigma_d: f64) -> f64 {
    let two_sigma = 2.0 * sigma_d;
    (-(centroid - p).norm_squared() / (two_sigma * two_sigma)).exp()
}

/// Per-triangle distance and area weights of a patch. Degenerate triangles
/// get zero weight and are left out of both sums.
#[derive(Debug, Clone)]
pub struct TriangleWeights {
    pub distance: Vec<f64>,
    pub area: Vec<f64>,
    pub distance_sum: f64,
    pub area_sum: f64,
}

impl TriangleWeights {
    pub fn new(patch: &LocalSurfacePatch, params: &LrfParams) -> Result<Self> {
        params.validate()?;
        let mesh = patch.mesh();
        let sigma_d = patch.mr().to_model(params.sigma_d_lrf_mr);
        let p = patch.keypoint();

        let total_area: f64 = (0..mesh.triangle_count())
            .filter(|&i| !mesh.is_degenerate(i))
            .map(|i| mesh.areas()[i])
            .sum();
        if !(total_area > 0.0) {
            return Err(Error::DegeneratePatch);
        }
        let mut distance = vec![0.0; mesh.triangle_count()];
        let mut area = vec![0.0; mesh.triangle_count()];
        for i in (0..mesh.triangle_count()).filter(|&i| !mesh.is_degenerate(i)) {
            distance[i] = distance_weight(&mesh.centroids()[i], &p, sigma_d);
            area[i] = mesh.areas()[i] / total_area;
        }
        let distance_sum = distance.iter().sum();
        let area_sum = area.iter().sum();
        if !(distance_sum > 0.0) {
            return Err(Error::DegeneratePatch);
        }
        Ok(TriangleWeights {
            distance,
            area,
            distance_sum,
            area_sum,
        })
    }

    fn normalizer(&self) -> f64 {
        1.0 / self.area_sum / self.distance_sum
    }
}

/// `(1 / sum w_s) (1 / sum w_d) sum w_d w_s M_i` over `(w_d, w_s, M_i)` terms.
pub fn combine_scatter(terms: impl IntoIterator<Item = (f64, f64, ScatterMatrix)>) -> ScatterMatrix {
    let (mut sum_d, mut sum_s) = (0.0, 0.0);
    let mut acc = Matrix3::zeros();
    for (wd, ws, m) in terms {
        sum_d += wd;
        sum_s += ws;
        acc += m.0 * (wd * ws);
    }
    ScatterMatrix(acc / sum_s / sum_d)
}

/// Weighted scatter matrix of the whole patch about its keypoint.
pub fn patch_scatter(patch: &LocalSurfacePatch, params: &LrfParams) -> Result<ScatterMatrix> {
    let w = TriangleWeights::new(patch, params)?;
    Ok(scatter_with_weights(patch, &w))
}

fn scatter_with_weights(patch: &LocalSurfacePatch, w: &TriangleWeights) -> ScatterMatrix {
    let mesh = patch.mesh();
    let p = patch.keypoint();
    let mut acc = Matrix3::zeros();
    for i in (0..mesh.triangle_count()).filter(|&i| !mesh.is_degenerate(i)) {
        let [a, b, c] = mesh.corners(i);
        acc += triangle_scatter(&a, &b, &c, &p).0 * (w.distance[i] * w.area[i]);
    }
    ScatterMatrix(acc * w.normalizer())
}

/// Eigen-decomposition of a scatter matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenAxes {
    pub values: [f64; 3],
    /// Unit eigenvectors; the component of largest magnitude is positive.
    pub vectors: [Point3; 3],
}

impl EigenAxes {
    /// `(l1 - l2) / l1`; zero for a zero matrix.
    pub fn relative_gap(&self) -> f64 {
        let [l1, l2, _] = self.values;
        if l1 > 0.0 {
            (l1 - l2) / l1
        } else {
            0.0
        }
    }

    /// True when the first two axes cannot be told apart.
    pub fn is_degenerate(&self) -> bool {
        !(self.relative_gap() >= MIN_RELATIVE_EIGEN_GAP)
    }
}

/// Symmetric 3x3 eigen-decomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come out descending (stable for ties); each eigenvector is
/// unit length with its largest-magnitude component made positive.
pub fn eigen_axes(m: &ScatterMatrix) -> EigenAxes {
    let (values, vectors) = jacobi_eigen(&m.0);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let vectors = order.map(|k| canonical_sign(vectors.column(k).normalize()));
    EigenAxes {
        values: order.map(|k| values[k]),
        vectors,
    }
}

fn canonical_sign(v: Point3) -> Point3 {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

fn jacobi_eigen(m: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Matrix3::<f64>::identity();
    for _sweep in 0..64 {
        let off = a[(0, 1)].abs() + a[(0, 2)].abs() + a[(1, 2)].abs();
        if off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let (app, aqq) = (a[(p, p)], a[(q, q)]);
            // Negligible next to both diagonal entries: zero it.
            let g = 100.0 * apq.abs();
            if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                continue;
            }
            let theta = (aqq - app) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = Matrix3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = s;
            j[(q, p)] = -s;
            a = j.transpose() * a * j;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= j;
        }
    }
    ([a[(0, 0)], a[(1, 1)], a[(2, 2)]], v)
}

/// Orthonormal frame at a keypoint with `z = y x x`, which makes it
/// left-handed: `rotation()` has determinant -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lrf {
    pub x_axis: Point3,
    pub y_axis: Point3,
    pub z_axis: Point3,
    /// Eigenvalues of the scatter matrix, descending.
    pub eigenvalues: [f64; 3],
    /// Weighted projections that fixed the x and y signs.
    pub x_orientation: f64,
    pub y_orientation: f64,
}

impl Lrf {
    /// Rows are the frame axes; maps world offsets into frame coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.x_axis.transpose(),
            self.y_axis.transpose(),
            self.z_axis.transpose(),
        ])
    }

    /// Coordinates of world offset `v` in this frame.
    pub fn to_local(&self, v: &Point3) -> Point3 {
        Point3::new(v.dot(&self.x_axis), v.dot(&self.y_axis), v.dot(&self.z_axis))
    }

    pub fn axes(&self) -> [Point3; 3] {
        [self.x_axis, self.y_axis, self.z_axis]
    }
}

/// Orients `e1` and `e2` towards the weighted centroid offsets of the patch.
///
/// `x_ori = (1/sum w_s)(1/sum w_d) sum w_d w_s (p_c - p) . e1`, `x = sgn(x_ori) e1`,
/// likewise for `y` with `e2`; `sgn(0)` is `+1`. Finally `z = y x x`.
pub fn disambiguate(
    patch: &LocalSurfacePatch,
    e1: &Point3,
    e2: &Point3,
    params: &LrfParams,
) -> Result<Lrf> {
    let w = TriangleWeights::new(patch, params)?;
    Ok(disambiguate_with_weights(patch, e1, e2, &w, [0.0; 3]))
}

fn disambiguate_with_weights(
    patch: &LocalSurfacePatch,
    e1: &Point3,
    e2: &Point3,
    w: &TriangleWeights,
    eigenvalues: [f64; 3],
) -> Lrf {
    let mesh = patch.mesh();
    let p = patch.keypoint();
    let (mut x_sum, mut y_sum) = (0.0, 0.0);
    for i in (0..mesh.triangle_count()).filter(|&i| !mesh.is_degenerate(i)) {
        let weight = w.distance[i] * w.area[i];
        let offset = mesh.centroids()[i] - p;
        x_sum += weight * offset.dot(e1);
        y_sum += weight * offset.dot(e2);
    }
    let x_orientation = x_sum * w.normalizer();
    let y_orientation = y_sum * w.normalizer();
    let x_axis = (e1 * sign(x_orientation)).normalize();
    let y_axis = (e2 * sign(y_orientation)).normalize();
    Lrf {
        x_axis,
        y_axis,
        z_axis: y_axis.cross(&x_axis),
        eigenvalues,
        x_orientation,
        y_orientation,
    }
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Full frame computation: weighted scatter, principal axes, sign disambiguation.
///
/// Fails with [`Error::DegeneratePatch`] when no triangle has positive area and
/// with [`Error::IllConditioned`] when the two largest eigenvalues coincide.
pub fn compute_lrf(patch: &LocalSurfacePatch, params: &LrfParams) -> Result<Lrf> {
    let w = TriangleWeights::new(patch, params)?;
    let scatter = scatter_with_weights(patch, &w);
    let eig = eigen_axes(&scatter);
    if eig.is_degenerate() {
        return Err(Error::IllConditioned {
            relative_gap: eig.relative_gap(),
        });
    }
    Ok(disambiguate_with_weights(
        patch,
        &eig.vectors[0],
        &eig.vectors[1],
        &w,
        eig.values,
    ))
}
