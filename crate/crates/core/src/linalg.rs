//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Cholesky factor of a symmetric matrix, or `None` when it is not positive definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
}

/// `(m + m') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    cholesky(m).map(|c| symmetrize(&c.inverse()))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Companion matrix of a VAR with lag matrices `lags[0..p]`, each N×N.
pub fn companion(lags: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = lags.len();
    let n = lags[0].nrows();
    let mut c = DMatrix::zeros(n * p, n * p);
    for (l, phi) in lags.iter().enumerate() {
        c.view_mut((0, l * n), (n, n)).copy_from(phi);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    c
}

/// Ratio of the largest to smallest singular value of `x` after scaling
/// every column to unit Euclidean norm.
pub fn scaled_condition_number(x: &DMatrix<f64>) -> f64 {
    let mut scaled = x.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Least squares via Householder QR: `(β, (X'X)⁻¹)`. `None` when `R` has a
/// zero pivot. Callers screen conditioning first.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty)?;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(r.nrows(), r.ncols()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Some((beta, symmetrize(&xtx_inv)))
}

/// Sample mean and (n−1) standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Linear-interpolation quantile of an ascending-sorted slice (q in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
