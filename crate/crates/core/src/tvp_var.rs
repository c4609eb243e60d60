//! Quasi-Bayesian local-likelihood (QBLL) estimation of a time-varying VAR.
//!
//! For every target time point `k` the VAR(p) likelihood is reweighted with a
//! Gaussian kernel centred on `k`, combined with a Minnesota Normal-Wishart
//! prior, and the resulting Normal-Wishart quasi posterior is sampled
//! directly. Time points are independent of one another, so [`estimate_path`]
//! fans out across them.
//!
//! Conventions used throughout:
//!
//! * The regressor row for observation `t` is `(1, x_{t-1}', …, x_{t-p}')`, so
//!   there are `K = N·p + 1` coefficients per equation and the coefficient
//!   matrix `B` is `K × N` (column `i` is equation `i`).
//! * The Wishart variate is the innovation precision. Conditional on it,
//!   `vec(B) ~ N(vec(B̃), Σ ⊗ Ξ̃⁻¹)` and the covariance `Σ` is inverse-Wishart
//!   with scale `Γ̃` and `α̃` degrees of freedom, so `E[Σ] = Γ̃ / (α̃ − N − 1)`.
//! * Time indices are zero-based positions in the panel; estimable points are
//!   `p..T`.

use crate::linalg::{cholesky, companion, least_squares, mean_sd, spectral_radius, symmetrize};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TvpVarError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("panel too short: {rows} usable rows for {params} parameters per equation")]
    PanelTooShort { rows: usize, params: usize },
    #[error("degenerate panel: residual variance of variable {0} is zero")]
    DegeneratePanel(usize),
    #[error("weighted design matrix is singular")]
    SingularDesign,
    #[error("posterior scale matrix is not positive definite")]
    NonPosDefScale,
    #[error("time index {index} outside estimable range {lo}..{hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },
}

pub type Result<T> = std::result::Result<T, TvpVarError>;

/// How raw Gaussian kernel weights are rescaled before entering the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightNormalization {
    /// `ϱ_t = w_t · (Σ w) / (Σ w²)`: weights sum to the Kish effective sample
    /// size `(Σ w)² / Σ w²`, which equals `T` for a flat kernel.
    #[default]
    EffectiveSampleSize,
    /// `ϱ_t = T · w_t / Σ w`: weights always sum to `T`.
    SampleSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvpVarSpec {
    pub lags: usize,
    /// Kernel bandwidth in observations; `None` means `⌈√T⌉`.
    pub kernel_bandwidth: Option<f64>,
    pub shrinkage: f64,
    pub own_lag_prior_mean: f64,
    pub n_draws: usize,
    pub stability_cap: f64,
    pub seed: u64,
    pub weight_normalization: WeightNormalization,
}

impl Default for TvpVarSpec {
    fn default() -> Self {
        Self {
            lags: 2,
            kernel_bandwidth: None,
            shrinkage: 0.05,
            own_lag_prior_mean: 0.1,
            n_draws: 500,
            stability_cap: 0.999,
            seed: 0,
            weight_normalization: WeightNormalization::default(),
        }
    }
}

impl TvpVarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lags < 1 {
            return Err(TvpVarError::InvalidSpec("lags must be at least 1".into()));
        }
        if self.n_draws < 1 {
            return Err(TvpVarError::InvalidSpec("n_draws must be at least 1".into()));
        }
        if !(self.stability_cap > 0.0 && self.stability_cap < 1.0) {
            return Err(TvpVarError::InvalidSpec(format!("stability cap {} outside (0, 1)", self.stability_cap)));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage.is_finite()) {
            return Err(TvpVarError::InvalidSpec("shrinkage must be positive".into()));
        }
        if let Some(h) = self.kernel_bandwidth {
            if !(h > 0.0) {
                return Err(TvpVarError::InvalidSpec("bandwidth must be positive".into()));
            }
        }
        Ok(())
    }

    /// Bandwidth used for a panel of `t_len` observations.
    pub fn bandwidth_for(&self, t_len: usize) -> f64 {
        self.kernel_bandwidth.unwrap_or_else(|| (t_len as f64).sqrt().ceil())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    pub target: usize,
    pub weights: Vec<f64>,
}

impl KernelWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Normalized Gaussian kernel weights over `t_len` observations centred on
/// `target` (zero-based).
pub fn kernel_weights(
    t_len: usize,
    target: usize,
    bandwidth: f64,
    normalization: WeightNormalization,
) -> KernelWeights {
    assert!(target < t_len, "kernel target {target} outside 0..{t_len}");
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let raw: Vec<f64> = (0..t_len)
        .map(|t| {
            let z = (target as f64 - t as f64) / bandwidth;
            norm * (-0.5 * z * z).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    let scale = match normalization {
        WeightNormalization::SampleSize => t_len as f64 / sum,
        WeightNormalization::EffectiveSampleSize => {
            let sum_sq: f64 = raw.iter().map(|w| w * w).sum();
            sum / sum_sq
        }
    };
    KernelWeights { target, weights: raw.into_iter().map(|w| w * scale).collect() }
}

/// Regressor and response matrices of a VAR(p) with intercept.
#[derive(Debug, Clone)]
pub struct VarDesign {
    /// `(T − p) × (N·p + 1)`
    pub regressors: DMatrix<f64>,
    /// `(T − p) × N`
    pub response: DMatrix<f64>,
    pub lags: usize,
}

impl VarDesign {
    /// `data` is `T × N`, one row per observation.
    pub fn new(data: &DMatrix<f64>, lags: usize) -> Result<Self> {
        let (t_len, n) = data.shape();
        let k = n * lags + 1;
        if t_len <= lags || t_len - lags < k {
            return Err(TvpVarError::PanelTooShort { rows: t_len.saturating_sub(lags), params: k });
        }
        let rows = t_len - lags;
        let mut a = DMatrix::zeros(rows, k);
        let mut y = DMatrix::zeros(rows, n);
        for r in 0..rows {
            let t = r + lags;
            a[(r, 0)] = 1.0;
            for l in 1..=lags {
                for j in 0..n {
                    a[(r, 1 + (l - 1) * n + j)] = data[(t - l, j)];
                }
            }
            for j in 0..n {
                y[(r, j)] = data[(t, j)];
            }
        }
        Ok(Self { regressors: a, response: y, lags })
    }

    pub fn rows(&self) -> usize {
        self.response.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.response.ncols()
    }

    pub fn n_coefs(&self) -> usize {
        self.regressors.ncols()
    }
}

/// Row of the coefficient matrix holding lag `lag` (1-based) of variable `var`.
pub fn lag_row(n_vars: usize, lag: usize, var: usize) -> usize {
    1 + (lag - 1) * n_vars + var
}

/// Normal-Wishart prior `(B₀, Ξ₀, α₀, Γ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinnesotaPrior {
    /// `K × N` prior mean.
    pub coef_mean: DMatrix<f64>,
    /// `K × K` prior precision shared by all equations.
    pub coef_precision: DMatrix<f64>,
    pub wishart_dof: f64,
    /// `N × N` inverse-Wishart scale of the covariance.
    pub wishart_scale: DMatrix<f64>,
    /// Univariate AR(p) residual variances used for scaling.
    pub residual_variances: Vec<f64>,
}

impl MinnesotaPrior {
    /// Implied prior variance of coefficient `row` in equation `eq`,
    /// `E[σ_ii] / Ξ₀[row,row]`.
    pub fn coefficient_variance(&self, row: usize, eq: usize) -> f64 {
        let n = self.wishart_scale.nrows() as f64;
        let sigma_mean = self.wishart_scale[(eq, eq)] / (self.wishart_dof - n - 1.0);
        sigma_mean / self.coef_precision[(row, row)]
    }

    /// Multiplies the coefficient precision by `factor`.
    pub fn scale_precision(mut self, factor: f64) -> Self {
        self.coef_precision *= factor;
        self
    }
}

fn ar_residual_variance(series: &[f64], lags: usize) -> Option<f64> {
    let data = DMatrix::from_column_slice(series.len(), 1, series);
    let design = VarDesign::new(&data, lags).ok()?;
    let rows = design.rows();
    let dof = rows.checked_sub(design.n_coefs())?;
    if dof == 0 {
        return None;
    }
    let (mean, sd) = mean_sd(design.response.as_slice());
    if sd <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        return Some(0.0);
    }
    let (beta, _) = least_squares(&design.regressors, &design.response)?;
    let resid = &design.response - &design.regressors * beta;
    Some(resid.norm_squared() / dof as f64)
}

/// Minnesota prior with Normal-Wishart structure.
///
/// Own first lags are centred on `own_lag_prior_mean`, everything else on
/// zero. Lag `l` of variable `j` gets prior variance `φ s_i² / (l² s_j²)` in
/// equation `i` (so `φ / l²` on own lags), intercepts `100 s_i²`, where `s_i²`
/// is the residual variance of a univariate AR(p) fit.
pub fn minnesota_prior(data: &DMatrix<f64>, spec: &TvpVarSpec) -> Result<MinnesotaPrior> {
    spec.validate()?;
    let (_, n) = data.shape();
    let p = spec.lags;
    let k = n * p + 1;
    let mut s2 = Vec::with_capacity(n);
    for i in 0..n {
        let col: Vec<f64> = data.column(i).iter().copied().collect();
        let v = ar_residual_variance(&col, p)
            .ok_or(TvpVarError::PanelTooShort { rows: data.nrows().saturating_sub(p), params: p + 1 })?;
        if !(v > 0.0 && v.is_finite()) || v < 1e-14 * col.iter().map(|x| x * x).sum::<f64>() {
            return Err(TvpVarError::DegeneratePanel(i));
        }
        s2.push(v);
    }

    let mut coef_mean = DMatrix::zeros(k, n);
    for i in 0..n {
        coef_mean[(lag_row(n, 1, i), i)] = spec.own_lag_prior_mean;
    }
    let mut precision = DMatrix::zeros(k, k);
    precision[(0, 0)] = 1.0 / 100.0;
    for l in 1..=p {
        for (j, s) in s2.iter().enumerate() {
            let r = lag_row(n, l, j);
            precision[(r, r)] = (l * l) as f64 * s / spec.shrinkage;
        }
    }
    let dof = n as f64 + 2.0;
    let scale = DMatrix::from_diagonal(&DVector::from_vec(s2.clone())) * (dof - n as f64 - 1.0);
    Ok(MinnesotaPrior {
        coef_mean,
        coef_precision: precision,
        wishart_dof: dof,
        wishart_scale: scale,
        residual_variances: s2,
    })
}

/// Quasi posterior `(B̃, Ξ̃, α̃, Γ̃)` at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorParams {
    /// `K × N`
    pub coef_mean: DMatrix<f64>,
    /// `K × K`
    pub coef_precision: DMatrix<f64>,
    pub wishart_dof: f64,
    /// `N × N`
    pub wishart_scale: DMatrix<f64>,
}

impl PosteriorParams {
    /// Coefficients stacked equation by equation, length `N·K`.
    pub fn coef_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.coef_mean.as_slice())
    }

    pub fn n_vars(&self) -> usize {
        self.wishart_scale.nrows()
    }

    pub fn lags(&self) -> usize {
        (self.coef_mean.nrows() - 1) / self.n_vars()
    }

    /// Analytic posterior mean of the innovation covariance.
    pub fn sigma_mean(&self) -> DMatrix<f64> {
        let n = self.n_vars() as f64;
        &self.wishart_scale / (self.wishart_dof - n - 1.0)
    }
}

/// Conjugate update of the prior with the kernel-weighted likelihood.
///
/// `weights` has one entry per design row.
pub fn posterior_update(design: &VarDesign, weights: &[f64], prior: &MinnesotaPrior) -> Result<PosteriorParams> {
    assert_eq!(weights.len(), design.rows(), "one weight per design row");
    let a = &design.regressors;
    let y = &design.response;
    let mut da = a.clone();
    for (r, w) in weights.iter().enumerate() {
        da.row_mut(r).scale_mut(*w);
    }
    let ata = a.transpose() * &da;
    let aty = da.transpose() * y;

    let xi = symmetrize(&(&prior.coef_precision + ata));
    let chol = cholesky(&xi).ok_or(TvpVarError::SingularDesign)?;
    let rhs = aty + &prior.coef_precision * &prior.coef_mean;
    let coef = chol.solve(&rhs);
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(TvpVarError::SingularDesign);
    }

    // Γ̃ = Γ₀ + Y'DY + B₀'Ξ₀B₀ − B̃'Ξ̃B̃, evaluated in the equivalent
    // residual form, which is positive semi-definite term by term.
    let resid = y - a * &coef;
    let mut dresid = resid.clone();
    for (r, w) in weights.iter().enumerate() {
        dresid.row_mut(r).scale_mut(*w);
    }
    let shift = &coef - &prior.coef_mean;
    let gamma = symmetrize(
        &(&prior.wishart_scale + resid.transpose() * dresid + shift.transpose() * &prior.coef_precision * &shift),
    );
    let gamma = if cholesky(&gamma).is_some() {
        gamma
    } else {
        let n = gamma.nrows();
        let jitter = 1e-10 * gamma.trace().abs().max(f64::MIN_POSITIVE);
        let bumped = gamma + DMatrix::identity(n, n) * jitter;
        if cholesky(&bumped).is_none() {
            return Err(TvpVarError::NonPosDefScale);
        }
        bumped
    };

    Ok(PosteriorParams {
        coef_mean: coef,
        coef_precision: xi,
        wishart_dof: prior.wishart_dof + weights.iter().sum::<f64>(),
        wishart_scale: gamma,
    })
}

/// One joint draw of VAR coefficients and innovation covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub intercept: DVector<f64>,
    /// `Φ_1 … Φ_p`, each `N × N`; `Φ_l[(i, j)]` is the effect of `x_{j,t−l}` on `x_{i,t}`.
    pub lags: Vec<DMatrix<f64>>,
    /// Innovation covariance.
    pub sigma: DMatrix<f64>,
    pub spectral_radius: f64,
    pub stable: bool,
}

impl PosteriorDraw {
    /// Splits a `K × N` coefficient matrix into intercept and lag matrices.
    pub fn from_coefficients(coef: &DMatrix<f64>, sigma: DMatrix<f64>, stability_cap: f64) -> Self {
        let n = coef.ncols();
        let p = (coef.nrows() - 1) / n;
        let intercept = coef.row(0).transpose();
        let lags: Vec<DMatrix<f64>> = (1..=p).map(|l| coef.rows(lag_row(n, l, 0), n).transpose()).collect();
        let rho = spectral_radius(&companion(&lags));
        Self { intercept, lags, sigma, spectral_radius: rho, stable: rho < stability_cap }
    }

    pub fn n_vars(&self) -> usize {
        self.sigma.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDrawSet {
    pub index: usize,
    pub draws: Vec<PosteriorDraw>,
    pub attempts: usize,
    pub rejected: usize,
}

impl PosteriorDrawSet {
    pub fn rejection_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.rejected as f64 / self.attempts as f64
        }
    }

    pub fn stable_count(&self) -> usize {
        self.draws.iter().filter(|d| d.stable).count()
    }
}

/// Precomputed factors for repeated Normal-Wishart sampling.
pub struct PosteriorSampler<'a> {
    params: &'a PosteriorParams,
    /// Lower Cholesky factor of `Γ̃⁻¹` (the Wishart scale of the precision).
    precision_scale_chol: DMatrix<f64>,
    /// Lower Cholesky factor of `Ξ̃`.
    xi_chol: DMatrix<f64>,
}

impl<'a> PosteriorSampler<'a> {
    pub fn new(params: &'a PosteriorParams) -> Result<Self> {
        let n = params.n_vars() as f64;
        if !(params.wishart_dof > n - 1.0) {
            return Err(TvpVarError::InvalidSpec(format!("Wishart dof {} must exceed N − 1", params.wishart_dof)));
        }
        let gamma_inv = cholesky(&params.wishart_scale).ok_or(TvpVarError::NonPosDefScale)?.inverse();
        let precision_scale_chol = cholesky(&gamma_inv).ok_or(TvpVarError::NonPosDefScale)?.l();
        let xi_chol = cholesky(&params.coef_precision).ok_or(TvpVarError::SingularDesign)?.l();
        Ok(Self { params, precision_scale_chol, xi_chol })
    }

    /// Innovation covariance: inverse of a Wishart(α̃, Γ̃⁻¹) precision, via
    /// the Bartlett decomposition.
    pub fn draw_sigma<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let n = self.params.n_vars();
        let dof = self.params.wishart_dof;
        let mut bartlett = DMatrix::zeros(n, n);
        for i in 0..n {
            let chi = ChiSquared::new(dof - i as f64).expect("dof checked at construction");
            bartlett[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                bartlett[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        // precision = M M', M lower triangular ⇒ Σ = M'⁻¹ M⁻¹
        let m = &self.precision_scale_chol * bartlett;
        let m_inv =
            m.solve_lower_triangular(&DMatrix::identity(n, n)).expect("Bartlett factor has a positive diagonal");
        symmetrize(&(m_inv.transpose() * m_inv))
    }

    /// Coefficients given the covariance: `B̃ + Ξ̃^{-1/2} Z Σ^{1/2}'`.
    pub fn draw_coefficients<R: Rng + ?Sized>(&self, sigma: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
        let (k, n) = self.params.coef_mean.shape();
        let z = DMatrix::from_fn(k, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let row_part = self.xi_chol.transpose().solve_upper_triangular(&z).expect("Ξ̃ factor has a positive diagonal");
        let sigma_chol = cholesky(sigma)
            .map(|c| c.l())
            .unwrap_or_else(|| DMatrix::from_diagonal(&sigma.diagonal().map(|v| v.max(0.0).sqrt())));
        &self.params.coef_mean + row_part * sigma_chol.transpose()
    }
}

/// Draws `spec.n_draws` coefficient/covariance pairs from the quasi posterior.
///
/// Draws whose companion spectral radius reaches `spec.stability_cap` are
/// rejected and redrawn, up to `10 × n_draws` attempts; if the budget runs
/// out, the earliest rejected draws fill the remaining slots, flagged unstable.
pub fn sample_posterior<R: Rng + ?Sized>(
    params: &PosteriorParams,
    spec: &TvpVarSpec,
    index: usize,
    rng: &mut R,
) -> Result<PosteriorDrawSet> {
    let sampler = PosteriorSampler::new(params)?;
    let budget = 10 * spec.n_draws;
    let mut accepted = Vec::with_capacity(spec.n_draws);
    let mut unstable = Vec::new();
    let mut attempts = 0;
    while accepted.len() < spec.n_draws && attempts < budget {
        attempts += 1;
        let sigma = sampler.draw_sigma(rng);
        let coef = sampler.draw_coefficients(&sigma, rng);
        let draw = PosteriorDraw::from_coefficients(&coef, sigma, spec.stability_cap);
        if draw.stable {
            accepted.push(draw);
        } else if unstable.len() < spec.n_draws {
            unstable.push(draw);
        }
    }
    let rejected = attempts - accepted.len();
    let missing = spec.n_draws - accepted.len();
    if missing > 0 {
        log::warn!(
            "time index {index}: only {} stable draws after {attempts} attempts; keeping {missing} unstable",
            accepted.len()
        );
        accepted.extend(unstable.into_iter().take(missing));
    }
    Ok(PosteriorDrawSet { index, draws: accepted, attempts, rejected })
}

/// SplitMix64 finalizer used to derive independent per-index streams.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for time index `index` under master seed `seed`.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    mix64(mix64(seed) ^ mix64(index as u64 ^ 0xD1B5_4A32_D192_ED03))
}

/// Shared, immutable inputs of a path estimation.
pub struct QbllEstimator {
    design: VarDesign,
    prior: MinnesotaPrior,
    spec: TvpVarSpec,
    bandwidth: f64,
    t_len: usize,
}

impl QbllEstimator {
    pub fn new(data: &DMatrix<f64>, spec: &TvpVarSpec) -> Result<Self> {
        spec.validate()?;
        let prior = minnesota_prior(data, spec)?;
        Self::with_prior(data, spec, prior)
    }

    pub fn with_prior(data: &DMatrix<f64>, spec: &TvpVarSpec, prior: MinnesotaPrior) -> Result<Self> {
        spec.validate()?;
        let design = VarDesign::new(data, spec.lags)?;
        Ok(Self { bandwidth: spec.bandwidth_for(data.nrows()), t_len: data.nrows(), design, prior, spec: spec.clone() })
    }

    pub fn prior(&self) -> &MinnesotaPrior {
        &self.prior
    }

    pub fn design(&self) -> &VarDesign {
        &self.design
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Estimable time indices `p..T`.
    pub fn index_range(&self) -> std::ops::Range<usize> {
        self.spec.lags..self.t_len
    }

    fn check_index(&self, index: usize) -> Result<()> {
        let range = self.index_range();
        if range.contains(&index) {
            Ok(())
        } else {
            Err(TvpVarError::IndexOutOfRange { index, lo: range.start, hi: range.end })
        }
    }

    pub fn weights(&self, index: usize) -> Result<KernelWeights> {
        self.check_index(index)?;
        Ok(kernel_weights(self.design.rows(), index - self.spec.lags, self.bandwidth, self.spec.weight_normalization))
    }

    pub fn posterior(&self, index: usize) -> Result<PosteriorParams> {
        let w = self.weights(index)?;
        posterior_update(&self.design, &w.weights, &self.prior)
    }

    /// Posterior and draws for one time index, seeded from `(spec.seed, index)`.
    pub fn estimate_point(&self, index: usize) -> Result<PosteriorDrawSet> {
        let params = self.posterior(index)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.spec.seed, index));
        sample_posterior(&params, &self.spec, index, &mut rng)
    }
}

/// Independent QBLL estimation at each requested time index.
///
/// Errors are reported per index. Output is identical for any ordering of
/// `indices` and any rayon pool size.
pub fn estimate_path(
    data: &DMatrix<f64>,
    spec: &TvpVarSpec,
    indices: &[usize],
) -> Result<BTreeMap<usize, Result<PosteriorDrawSet>>> {
    let est = QbllEstimator::new(data, spec)?;
    let mut unique: Vec<usize> = indices.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let results: Vec<(usize, Result<PosteriorDrawSet>)> =
        unique.par_iter().map(|&i| (i, est.estimate_point(i))).collect();
    Ok(results.into_iter().collect())
}
