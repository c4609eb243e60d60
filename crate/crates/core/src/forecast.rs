//! Predictive regressions of macro targets on aggregated connectedness.

use crate::linalg::{least_squares, scaled_condition_number};
use crate::network::ConnectednessSeries;
use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Expansion/recession split point for the three-month CFNAI average.
pub const CFNAI_THRESHOLD: f64 = -0.72;
/// Expansion/recession split point for the ADS index.
pub const ADS_THRESHOLD: f64 = -0.80;
pub const DEFAULT_HORIZONS: [usize; 5] = [1, 3, 6, 9, 12];
/// Column-scaled condition number above which a design is rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("insufficient sample: {available} observations, {needed} required")]
    InsufficientSample { needed: usize, available: usize },
    #[error("collinear design (scaled condition number {0:e})")]
    CollinearDesign(f64),
    #[error("non-positive level {value} at {period}")]
    NonPositiveLevel { period: Period, value: f64 },
    #[error("series {0} has a different frequency")]
    FrequencyMismatch(String),
    #[error("invalid period {0:?}")]
    InvalidPeriod(String),
    #[error("series {id}: periods not strictly increasing at {period}")]
    UnorderedPeriods { id: String, period: Period },
    #[error("non-finite value in series {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, ForecastError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Monthly,
    Quarterly,
}

/// A calendar month or quarter, ordered by an ordinal count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Period {
    pub frequency: Frequency,
    /// `12·year + month − 1` or `4·year + quarter − 1`.
    pub ordinal: i32,
}

impl Period {
    pub fn month(year: i32, month: u32) -> Self {
        Self { frequency: Frequency::Monthly, ordinal: year * 12 + month as i32 - 1 }
    }

    pub fn quarter(year: i32, quarter: u32) -> Self {
        Self { frequency: Frequency::Quarterly, ordinal: year * 4 + quarter as i32 - 1 }
    }

    pub fn of_date(date: NaiveDate, frequency: Frequency) -> Self {
        match frequency {
            Frequency::Monthly => Self::month(date.year(), date.month()),
            Frequency::Quarterly => Self::quarter(date.year(), (date.month() - 1) / 3 + 1),
        }
    }

    pub fn year(&self) -> i32 {
        let per_year = match self.frequency {
            Frequency::Monthly => 12,
            Frequency::Quarterly => 4,
        };
        self.ordinal.div_euclid(per_year)
    }

    /// Month (1–12) or quarter (1–4) within the year.
    pub fn sub_period(&self) -> u32 {
        let per_year = match self.frequency {
            Frequency::Monthly => 12,
            Frequency::Quarterly => 4,
        };
        self.ordinal.rem_euclid(per_year) as u32 + 1
    }

    pub fn offset(&self, steps: i32) -> Self {
        Self { frequency: self.frequency, ordinal: self.ordinal + steps }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frequency {
            Frequency::Monthly => write!(f, "{:04}-{:02}", self.year(), self.sub_period()),
            Frequency::Quarterly => write!(f, "{:04}Q{}", self.year(), self.sub_period()),
        }
    }
}

impl FromStr for Period {
    type Err = ForecastError;

    /// Accepts `YYYY-MM`, `YYYYQn` and `YYYY-Qn`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ForecastError::InvalidPeriod(s.to_string());
        let t = s.trim();
        if let Some(pos) = t.find(['Q', 'q']) {
            let year: i32 = t[..pos].trim_end_matches('-').parse().map_err(|_| bad())?;
            let q: u32 = t[pos + 1..].parse().map_err(|_| bad())?;
            if !(1..=4).contains(&q) {
                return Err(bad());
            }
            return Ok(Self::quarter(year, q));
        }
        let (y, m) = t.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) || y.len() != 4 {
            return Err(bad());
        }
        Ok(Self::month(year, month))
    }
}

/// Transformation applied to raw levels before a series enters a regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Level,
    Diff,
    LogDiff,
    /// Percentage change.
    Growth,
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "level" => Ok(Transform::Level),
            "diff" => Ok(Transform::Diff),
            "log_diff" => Ok(Transform::LogDiff),
            "growth" => Ok(Transform::Growth),
            other => Err(format!("unknown transform {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSeries {
    pub id: String,
    pub frequency: Frequency,
    pub observations: Vec<(Period, f64)>,
    /// Pending transformation; [`MacroSeries::transformed`] applies it.
    pub transform: Transform,
}

impl MacroSeries {
    /// Validates ordering and frequency; values must be finite.
    pub fn new(id: impl Into<String>, frequency: Frequency, observations: Vec<(Period, f64)>) -> Result<Self> {
        let id = id.into();
        for (p, v) in &observations {
            if p.frequency != frequency {
                return Err(ForecastError::FrequencyMismatch(id));
            }
            if !v.is_finite() {
                return Err(ForecastError::NonFinite(id));
            }
        }
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ForecastError::UnorderedPeriods { id, period: w[1].0 });
            }
        }
        Ok(Self { id, frequency, observations, transform: Transform::Level })
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|(_, v)| *v).collect()
    }

    pub fn get(&self, period: Period) -> Option<f64> {
        self.observations.binary_search_by(|(p, _)| p.cmp(&period)).ok().map(|i| self.observations[i].1)
    }

    /// Applies the pending transform. Differences use consecutive periods
    /// only, so the first observation (and any after a gap) is lost.
    pub fn transformed(&self) -> Result<MacroSeries> {
        let f: fn(f64, f64) -> f64 = match self.transform {
            Transform::Level => return Ok(self.clone()),
            Transform::Diff => |a, b| b - a,
            Transform::LogDiff => |a, b| (b / a).ln(),
            Transform::Growth => |a, b| 100.0 * (b / a - 1.0),
        };
        if matches!(self.transform, Transform::LogDiff | Transform::Growth) {
            if let Some((p, v)) = self.observations.iter().find(|(_, v)| *v <= 0.0) {
                return Err(ForecastError::NonPositiveLevel { period: *p, value: *v });
            }
        }
        let obs = self
            .observations
            .windows(2)
            .filter(|w| w[1].0.ordinal == w[0].0.ordinal + 1)
            .map(|w| (w[1].0, f(w[0].1, w[1].1)))
            .collect();
        Ok(MacroSeries {
            id: self.id.clone(),
            frequency: self.frequency,
            observations: obs,
            transform: Transform::Level,
        })
    }
}

/// Period means of a dated daily series. Periods without data are absent.
pub fn aggregate_daily(id: &str, daily: &[(NaiveDate, f64)], frequency: Frequency) -> MacroSeries {
    let mut buckets: BTreeMap<Period, (f64, usize)> = BTreeMap::new();
    for (d, v) in daily {
        let e = buckets.entry(Period::of_date(*d, frequency)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let obs: Vec<(Period, f64)> = buckets.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect();
    for w in obs.windows(2) {
        for missing in w[0].0.ordinal + 1..w[1].0.ordinal {
            log::warn!("{id}: no observations in {}, period dropped", Period { frequency, ordinal: missing });
        }
    }
    MacroSeries { id: id.to_string(), frequency, observations: obs, transform: Transform::Level }
}

/// Calendar-month mean of the daily posterior-median total connectedness.
pub fn monthly_aggregate(daily: &ConnectednessSeries, id: &str) -> MacroSeries {
    aggregate_daily(id, &daily.total_medians(), Frequency::Monthly)
}

/// Quarter mean of the daily posterior-median total connectedness.
pub fn quarterly_aggregate(daily: &ConnectednessSeries, id: &str) -> MacroSeries {
    aggregate_daily(id, &daily.total_medians(), Frequency::Quarterly)
}

/// Censors `y` at `tau`: `(max(y, τ), min(y, τ))`.
pub fn threshold_decompose(y: &MacroSeries, tau: f64) -> (MacroSeries, MacroSeries) {
    let side = |suffix: &str, f: fn(f64, f64) -> f64| MacroSeries {
        id: format!("{}_{suffix}", y.id),
        frequency: y.frequency,
        observations: y.observations.iter().map(|(p, v)| (*p, f(*v, tau))).collect(),
        transform: y.transform,
    };
    (side("exp", f64::max), side("rec", f64::min))
}

/// `g_t = log(GDP_{t+1} / GDP_t)` dated at `t`; pairs must be consecutive.
pub fn gdp_growth(gdp: &MacroSeries) -> Result<MacroSeries> {
    if let Some((p, v)) = gdp.observations.iter().find(|(_, v)| *v <= 0.0) {
        return Err(ForecastError::NonPositiveLevel { period: *p, value: *v });
    }
    let obs = gdp
        .observations
        .windows(2)
        .filter(|w| w[1].0.ordinal == w[0].0.ordinal + 1)
        .map(|w| (w[0].0, (w[1].1 / w[0].1).ln()))
        .collect();
    Ok(MacroSeries {
        id: format!("{}_growth", gdp.id),
        frequency: gdp.frequency,
        observations: obs,
        transform: Transform::Level,
    })
}

/// Rolling `(n−1)` standard deviation over `window` observations, times
/// `√window`, dated at the window's last period.
pub fn gdp_volatility(growth: &MacroSeries, window: usize) -> Result<MacroSeries> {
    if window < 2 || growth.len() < window {
        return Err(ForecastError::InsufficientSample { needed: window.max(2), available: growth.len() });
    }
    let scale = (window as f64).sqrt();
    let obs = growth
        .observations
        .windows(window)
        .map(|w| {
            let vals: Vec<f64> = w.iter().map(|(_, v)| *v).collect();
            (w[window - 1].0, scale * crate::linalg::mean_sd(&vals).1)
        })
        .collect();
    Ok(MacroSeries {
        id: format!("{}_vol", growth.id),
        frequency: growth.frequency,
        observations: obs,
        transform: Transform::Level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeKind {
    #[default]
    Classical,
    /// Newey–West with Bartlett weights and lag equal to the horizon.
    Hac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegressionOptions {
    /// Standard errors behind t statistics and stars.
    pub se_kind: SeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se_classical: f64,
    pub se_hac: f64,
    /// Reported standard error, per [`RegressionOptions::se_kind`].
    pub se: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl Coefficient {
    /// `***`, `**`, `*` at 1%, 5%, 10%.
    pub fn stars(&self) -> &'static str {
        match self.p_value {
            p if p < 0.01 => "***",
            p if p < 0.05 => "**",
            p if p < 0.10 => "*",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub target: String,
    pub horizon: usize,
    pub se_kind: SeKind,
    /// Intercept first, then predictors in input order.
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n_obs: usize,
    /// Predictor dates of the first and last aligned rows.
    pub first_period: Period,
    pub last_period: Period,
    #[serde(skip_serializing, default)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Rows `t` where every predictor is observed at `t` and `y` at `t + h`.
fn align(y: &MacroSeries, predictors: &[MacroSeries], h: usize) -> Result<(Vec<Period>, DVector<f64>, DMatrix<f64>)> {
    for s in predictors {
        if s.frequency != y.frequency {
            return Err(ForecastError::FrequencyMismatch(s.id.clone()));
        }
    }
    let base: Vec<Period> = match predictors.first() {
        Some(s) => s.observations.iter().map(|(p, _)| *p).collect(),
        None => y.observations.iter().map(|(p, _)| *p).collect(),
    };
    let mut periods = Vec::new();
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for t in base {
        let Some(target) = y.get(t.offset(h as i32)) else { continue };
        let row: Option<Vec<f64>> = predictors.iter().map(|s| s.get(t)).collect();
        if let Some(row) = row {
            periods.push(t);
            ys.push(target);
            xs.push(1.0);
            xs.extend(row);
        }
    }
    let k = predictors.len() + 1;
    let n = periods.len();
    Ok((periods, DVector::from_vec(ys), DMatrix::from_row_slice(n, k, &xs)))
}

/// OLS of `y_{t+h}` on an intercept and the predictors at `t`.
pub fn predictive_regression(
    y: &MacroSeries,
    predictors: &[MacroSeries],
    h: usize,
    options: &RegressionOptions,
) -> Result<RegressionResult> {
    let (periods, yv, x) = align(y, predictors, h)?;
    let n = yv.len();
    let k = x.ncols();
    if n < k + 2 {
        return Err(ForecastError::InsufficientSample { needed: k + 2, available: n });
    }
    let cond = scaled_condition_number(&x);
    if !(cond <= MAX_CONDITION_NUMBER) {
        return Err(ForecastError::CollinearDesign(cond));
    }
    let y_mat = DMatrix::from_column_slice(n, 1, yv.as_slice());
    let (beta, xtx_inv) = least_squares(&x, &y_mat).ok_or(ForecastError::CollinearDesign(cond))?;
    let beta = beta.column(0).into_owned();

    let resid = &yv - &x * &beta;
    let dof = (n - k) as f64;
    let ssr = resid.norm_squared();
    let mean = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / dof;

    let classical = &xtx_inv * (ssr / dof);
    let hac = newey_west(&x, &resid, h, &xtx_inv) * (n as f64 / dof);

    let tdist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    let names = std::iter::once("const".to_string()).chain(predictors.iter().map(|s| s.id.clone()));
    let coefficients = names
        .enumerate()
        .map(|(i, name)| {
            let se_classical = classical[(i, i)].max(0.0).sqrt();
            let se_hac = hac[(i, i)].max(0.0).sqrt();
            let se = match options.se_kind {
                SeKind::Classical => se_classical,
                SeKind::Hac => se_hac,
            };
            let t_stat = beta[i] / se;
            let p_value = if t_stat.is_finite() { 2.0 * tdist.sf(t_stat.abs()) } else { 0.0 };
            Coefficient { name, estimate: beta[i], se_classical, se_hac, se, t_stat, p_value }
        })
        .collect();
    Ok(RegressionResult {
        target: y.id.clone(),
        horizon: h,
        se_kind: options.se_kind,
        coefficients,
        r2,
        adj_r2,
        n_obs: n,
        first_period: periods[0],
        last_period: periods[n - 1],
        residuals: resid.iter().copied().collect(),
    })
}

/// Bartlett-weighted sandwich `(X'X)⁻¹ S (X'X)⁻¹` with `lag` autocovariances.
fn newey_west(x: &DMatrix<f64>, resid: &DVector<f64>, lag: usize, xtx_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let scores = DMatrix::from_fn(n, x.ncols(), |t, j| x[(t, j)] * resid[t]);
    let mut s = scores.transpose() * &scores;
    for l in 1..=lag.min(n - 1) {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let gamma = scores.rows(l, n - l).transpose() * scores.rows(0, n - l);
        s += (&gamma + gamma.transpose()) * w;
    }
    xtx_inv * s * xtx_inv
}

/// One regression per horizon; horizons are independent.
pub fn horizon_suite(
    y: &MacroSeries,
    predictors: &[MacroSeries],
    horizons: &[usize],
    options: &RegressionOptions,
) -> BTreeMap<usize, Result<RegressionResult>> {
    horizons.par_iter().map(|&h| (h, predictive_regression(y, predictors, h, options))).collect()
}
