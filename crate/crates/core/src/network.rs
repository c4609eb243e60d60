//! Generalized variance decompositions and the connectedness measures built on them.
//!
//! For a stable VAR with VMA coefficients `Ψ_h` and innovation covariance `Σ`,
//! the horizon-`H` generalized decomposition is
//!
//! ```text
//! θ_{j,k} = σ_kk⁻¹ Σ_{h=0..H} ([Ψ_h Σ]_{j,k})²  /  Σ_{h=0..H} [Ψ_h Σ Ψ_h']_{j,j}
//! ```
//!
//! Row-normalizing `θ` gives a weighted directed adjacency matrix `θ̃`. From it
//! come total connectedness `C`, and per node FROM, TO, NET = TO − FROM and
//! AGG = TO + FROM, all in percent.

use crate::industry_panel::IndustryPanel;
use crate::linalg::{cholesky, mean_sd, quantile_sorted};
use crate::tvp_var::{PosteriorDraw, PosteriorDrawSet, VarDesign};
use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default forecast horizon of the decomposition.
pub const DEFAULT_HORIZON: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("forecast-error variance of variable {0} is zero")]
    ZeroDenominator(usize),
    #[error("row {0} of the decomposition sums to zero")]
    ZeroRow(usize),
    #[error("innovation covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("connectedness needs at least two variables, got {0}")]
    TooFewVariables(usize),
    #[error("no draws available for {0}")]
    EmptyDrawSet(NaiveDate),
    #[error("window of {window} observations is invalid: {reason}")]
    InvalidWindow { window: usize, reason: String },
    #[error("singular design in window ending {0}")]
    SingularDesign(NaiveDate),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

/// Truncated moving-average coefficients `Ψ_0 = I, Ψ_1, …, Ψ_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct VmaCoeffs {
    pub psi: Vec<DMatrix<f64>>,
}

impl VmaCoeffs {
    pub fn horizon(&self) -> usize {
        self.psi.len() - 1
    }
}

/// `Ψ_h = Σ_{i=1}^{min(h,p)} Φ_i Ψ_{h−i}`; intercepts play no role.
pub fn vma_from_lags(lags: &[DMatrix<f64>], horizon: usize) -> VmaCoeffs {
    let n = lags[0].nrows();
    let mut psi = Vec::with_capacity(horizon + 1);
    psi.push(DMatrix::identity(n, n));
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(n, n);
        for (i, phi) in lags.iter().enumerate().take(h) {
            acc += phi * &psi[h - 1 - i];
        }
        psi.push(acc);
    }
    VmaCoeffs { psi }
}

pub fn vma_coefficients(draw: &PosteriorDraw, horizon: usize) -> VmaCoeffs {
    vma_from_lags(&draw.lags, horizon)
}

/// Unnormalized generalized decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Gfevd {
    pub theta: DMatrix<f64>,
    pub horizon: usize,
}

pub fn gfevd(vma: &VmaCoeffs, sigma: &DMatrix<f64>) -> Result<Gfevd> {
    let n = sigma.nrows();
    if sigma.ncols() != n || vma.psi[0].nrows() != n {
        return Err(NetworkError::Dimension(format!(
            "Σ is {}×{}, Ψ is {}×{}",
            sigma.nrows(),
            sigma.ncols(),
            vma.psi[0].nrows(),
            vma.psi[0].ncols()
        )));
    }
    if cholesky(sigma).is_none() {
        return Err(NetworkError::NotPositiveDefinite);
    }
    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut den = vec![0.0; n];
    for psi in &vma.psi {
        let ps = psi * sigma;
        for j in 0..n {
            for k in 0..n {
                num[(j, k)] += ps[(j, k)] * ps[(j, k)];
            }
            // [Ψ Σ Ψ']_{jj} = Σ_k [ΨΣ]_{jk} Ψ_{jk}
            den[j] += (0..n).map(|k| ps[(j, k)] * psi[(j, k)]).sum::<f64>();
        }
    }
    for (j, d) in den.iter().enumerate() {
        if !(*d > 0.0 && d.is_finite()) {
            return Err(NetworkError::ZeroDenominator(j));
        }
    }
    let theta = DMatrix::from_fn(n, n, |j, k| num[(j, k)] / (sigma[(k, k)] * den[j]));
    Ok(Gfevd { theta, horizon: vma.horizon() })
}

/// Row-stochastic adjacency matrix with node labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    pub theta_tilde: DMatrix<f64>,
    pub horizon: usize,
    pub labels: Vec<String>,
}

impl AdjacencyMatrix {
    pub fn n_nodes(&self) -> usize {
        self.theta_tilde.nrows()
    }
}

pub fn row_normalize(theta: &Gfevd, labels: &[String]) -> Result<AdjacencyMatrix> {
    let n = theta.theta.nrows();
    if labels.len() != n {
        return Err(NetworkError::Dimension(format!("{} labels for {n} nodes", labels.len())));
    }
    let mut tt = theta.theta.clone();
    for j in 0..n {
        let s: f64 = tt.row(j).sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(NetworkError::ZeroRow(j));
        }
        tt.row_mut(j).unscale_mut(s);
    }
    Ok(AdjacencyMatrix { theta_tilde: tt, horizon: theta.horizon, labels: labels.to_vec() })
}

/// Numbered labels `V1 … VN` for unlabeled systems.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("V{i}")).collect()
}

/// `100 · Σ_{j≠k} θ̃_{jk} / Σ_{j,k} θ̃_{jk}`.
///
/// Both sums are carried in double-double arithmetic and the quotient is
/// refined by one residual step, so the result is the rounded value of the
/// exact ratio of the stored entries (a uniform matrix gives exactly
/// `100(N−1)/N`).
pub fn total_connectedness(adj: &AdjacencyMatrix) -> f64 {
    let m = &adj.theta_tilde;
    let n = m.nrows();
    let mut off = DoubleDouble::default();
    let mut total = DoubleDouble::default();
    for j in 0..n {
        for k in 0..n {
            total.add(m[(j, k)]);
            if j != k {
                off.add(m[(j, k)]);
            }
        }
    }
    if off.hi == 0.0 {
        return 0.0;
    }
    let (num_hi, num_lo) = two_prod(100.0, off.hi);
    let num_lo = num_lo + 100.0 * off.lo;
    let q = num_hi / total.hi;
    let (p_hi, p_lo) = two_prod(q, total.hi);
    let resid = ((num_hi - p_hi) - p_lo) + num_lo - q * total.lo;
    q + resid / total.hi
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi) / 2`.
#[derive(Debug, Default, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = two_sum(s, e + self.lo);
        self.hi = hi;
        self.lo = lo;
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessStats {
    pub total: f64,
    pub to: Vec<f64>,
    pub from: Vec<f64>,
    pub net: Vec<f64>,
    pub agg: Vec<f64>,
}

/// FROM, TO, NET and AGG per node, divided by `N` (the matrix sum after row
/// normalization) so that `C = Σ FROM = Σ TO`.
pub fn directional(adj: &AdjacencyMatrix) -> ConnectednessStats {
    let m = &adj.theta_tilde;
    let n = m.nrows();
    let denom = n as f64;
    let mut from = vec![0.0; n];
    let mut to = vec![0.0; n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                from[j] += m[(j, k)];
                to[k] += m[(j, k)];
            }
        }
    }
    for j in 0..n {
        from[j] *= 100.0 / denom;
        to[j] *= 100.0 / denom;
    }
    let net = to.iter().zip(&from).map(|(t, f)| t - f).collect();
    let agg = to.iter().zip(&from).map(|(t, f)| t + f).collect();
    ConnectednessStats { total: total_connectedness(adj), to, from, net, agg }
}

/// Full chain for one parameter set: VMA → GFEVD → adjacency → statistics.
pub fn draw_connectedness(
    lags: &[DMatrix<f64>],
    sigma: &DMatrix<f64>,
    horizon: usize,
    labels: &[String],
) -> Result<(AdjacencyMatrix, ConnectednessStats)> {
    let theta = gfevd(&vma_from_lags(lags, horizon), sigma)?;
    let adj = row_normalize(&theta, labels)?;
    let stats = directional(&adj);
    Ok((adj, stats))
}

/// Posterior summary of a scalar statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
    pub p025: f64,
    pub p975: f64,
}

impl StatSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mean, sd) = mean_sd(values);
        Self {
            median: quantile_sorted(&sorted, 0.5),
            mean,
            sd,
            p025: quantile_sorted(&sorted, 0.025),
            p975: quantile_sorted(&sorted, 0.975),
        }
    }

    pub fn point(value: f64) -> Self {
        Self { median: value, mean: value, sd: 0.0, p025: value, p975: value }
    }

    /// Width of the 2.5–97.5 percentile band.
    pub fn band_width(&self) -> f64 {
        self.p975 - self.p025
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessPoint {
    pub date: NaiveDate,
    pub total: StatSummary,
    pub to: Vec<StatSummary>,
    pub from: Vec<StatSummary>,
    pub net: Vec<StatSummary>,
    pub agg: Vec<StatSummary>,
    pub draws_used: usize,
    /// Set when fewer than half of the draws were stable and all were used.
    pub used_unstable: bool,
}

impl ConnectednessPoint {
    fn from_stats(date: NaiveDate, stats: &[ConnectednessStats], used_unstable: bool) -> Self {
        let n = stats[0].to.len();
        let per_node = |f: &dyn Fn(&ConnectednessStats) -> &Vec<f64>| -> Vec<StatSummary> {
            (0..n).map(|j| StatSummary::from_values(&stats.iter().map(|s| f(s)[j]).collect::<Vec<_>>())).collect()
        };
        Self {
            date,
            total: StatSummary::from_values(&stats.iter().map(|s| s.total).collect::<Vec<_>>()),
            to: per_node(&|s| &s.to),
            from: per_node(&|s| &s.from),
            net: per_node(&|s| &s.net),
            agg: per_node(&|s| &s.agg),
            draws_used: stats.len(),
            used_unstable,
        }
    }
}

/// Daily connectedness statistics with posterior bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessSeries {
    pub labels: Vec<String>,
    pub horizon: usize,
    pub points: Vec<ConnectednessPoint>,
}

impl ConnectednessSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    /// Posterior-median total connectedness per date.
    pub fn total_medians(&self) -> Vec<(NaiveDate, f64)> {
        self.points.iter().map(|p| (p.date, p.total.median)).collect()
    }
}

/// Summaries of every statistic over the draws of one date.
///
/// Unstable draws are dropped when at least half of the set is stable;
/// otherwise everything is used and the point is flagged.
pub fn summarize_draws(
    date: NaiveDate,
    set: &PosteriorDrawSet,
    horizon: usize,
    labels: &[String],
) -> Result<ConnectednessPoint> {
    if set.draws.is_empty() {
        return Err(NetworkError::EmptyDrawSet(date));
    }
    let n = set.draws[0].n_vars();
    if n < 2 {
        return Err(NetworkError::TooFewVariables(n));
    }
    let stable = set.stable_count();
    let use_all = 2 * stable < set.draws.len();
    if use_all {
        log::warn!("{date}: only {stable}/{} stable draws, using all", set.draws.len());
    }
    let stats = set
        .draws
        .iter()
        .filter(|d| use_all || d.stable)
        .map(|d| draw_connectedness(&d.lags, &d.sigma, horizon, labels).map(|(_, s)| s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConnectednessPoint::from_stats(date, &stats, use_all))
}

/// Connectedness series from per-date draw sets, in input order.
pub fn network_series(
    draw_sets: &[(NaiveDate, &PosteriorDrawSet)],
    horizon: usize,
    labels: &[String],
) -> Result<ConnectednessSeries> {
    let points = draw_sets
        .par_iter()
        .map(|(date, set)| summarize_draws(*date, set, horizon, labels))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConnectednessSeries { labels: labels.to_vec(), horizon, points })
}

/// Moving-window baseline: constant-coefficient VAR(p) by OLS on each window
/// of `window` observations, reported at the window's last date.
pub fn rolling_window_baseline(
    panel: &IndustryPanel,
    window: usize,
    lags: usize,
    horizon: usize,
) -> Result<ConnectednessSeries> {
    let (t_len, n) = panel.values.shape();
    if n < 2 {
        return Err(NetworkError::TooFewVariables(n));
    }
    if window < 10 * n {
        return Err(NetworkError::InvalidWindow { window, reason: format!("shorter than 10·N = {}", 10 * n) });
    }
    if window > t_len {
        return Err(NetworkError::InvalidWindow { window, reason: format!("longer than the sample ({t_len})") });
    }
    let labels = panel.industries.clone();
    let ends: Vec<usize> = (window - 1..t_len).collect();
    let points = ends
        .par_iter()
        .map(|&end| {
            let date = panel.dates[end];
            let data = panel.values.rows(end + 1 - window, window).into_owned();
            let (var_lags, sigma) = ols_var(&data, lags).ok_or(NetworkError::SingularDesign(date))?;
            let (_, stats) = draw_connectedness(&var_lags, &sigma, horizon, &labels)?;
            Ok(ConnectednessPoint::from_stats(date, &[stats], false))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConnectednessSeries { labels, horizon, points })
}

/// OLS VAR(p) with intercept: lag matrices and residual covariance (dof-corrected).
pub fn ols_var(data: &DMatrix<f64>, lags: usize) -> Option<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let design = VarDesign::new(data, lags).ok()?;
    let a = &design.regressors;
    let chol = cholesky(&(a.transpose() * a))?;
    let coef = chol.solve(&(a.transpose() * &design.response));
    let resid = &design.response - a * &coef;
    let dof = design.rows().checked_sub(design.n_coefs()).filter(|d| *d > 0)?;
    let sigma = resid.transpose() * resid / dof as f64;
    let draw = PosteriorDraw::from_coefficients(&coef, sigma, 1.0);
    Some((draw.lags, draw.sigma))
}
