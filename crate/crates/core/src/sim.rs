//! Synthetic data: VARs with drifting parameters, Black–Scholes option
//! chains, and the small end-to-end demo dataset.

use crate::forecast::{Frequency, MacroSeries, Period, Transform};
use crate::industry_panel::{CapObservation, MembershipInterval};
use crate::linalg::{cholesky, companion, spectral_radius};
use crate::network::{draw_connectedness, AdjacencyMatrix, ConnectednessStats, NetworkError};
use crate::options_iv::{bs_price, FirmVixPoint, OptionChain, OptionKind, OptionQuote};
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unstable parameters at u = {u} (spectral radius {radius})")]
    UnstableSpec { u: f64, radius: f64 },
    #[error("innovation covariance is not positive definite at u = {0}")]
    NonPosDefSigma(f64),
    #[error("invalid specification: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Intercept, lag matrices and innovation covariance of one VAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    pub intercept: DVector<f64>,
    /// `lags[l][(i, j)]` is the effect of `x_{j,t−l−1}` on `x_{i,t}`.
    pub lags: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
}

impl VarParams {
    pub fn var1(phi: DMatrix<f64>, sigma: DMatrix<f64>) -> Self {
        Self { intercept: DVector::zeros(phi.nrows()), lags: vec![phi], sigma }
    }

    pub fn n_vars(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&companion(&self.lags))
    }

    fn lerp(&self, other: &Self, w: f64) -> Self {
        let mix = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * (1.0 - w) + b * w;
        Self {
            intercept: &self.intercept * (1.0 - w) + &other.intercept * w,
            lags: self.lags.iter().zip(&other.lags).map(|(a, b)| mix(a, b)).collect(),
            sigma: mix(&self.sigma, &other.sigma),
        }
    }
}

/// Parameters as a function of rescaled time `u = t / T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamPath {
    Constant(VarParams),
    /// `(u_start, params)` regimes with ascending starts; the first starts at 0.
    Piecewise(Vec<(f64, VarParams)>),
    /// Linear interpolation from `start` at u = 0 to `end` at u = 1.
    Linear {
        start: VarParams,
        end: VarParams,
    },
}

impl ParamPath {
    pub fn at(&self, u: f64) -> VarParams {
        match self {
            ParamPath::Constant(p) => p.clone(),
            ParamPath::Piecewise(regimes) => {
                regimes.iter().rev().find(|(start, _)| *start <= u).unwrap_or(&regimes[0]).1.clone()
            }
            ParamPath::Linear { start, end } => start.lerp(end, u.clamp(0.0, 1.0)),
        }
    }

    fn anchors(&self) -> Vec<(f64, &VarParams)> {
        match self {
            ParamPath::Constant(p) => vec![(0.0, p)],
            ParamPath::Piecewise(r) => r.iter().map(|(u, p)| (*u, p)).collect(),
            ParamPath::Linear { start, end } => vec![(0.0, start), (1.0, end)],
        }
    }

    /// Checks dimensions, stability and positive-definite covariances.
    /// A linear path is checked on a fine grid, since convex combinations of
    /// stable matrices need not be stable.
    pub fn validate(&self) -> Result<()> {
        let anchors = self.anchors();
        if anchors.is_empty() {
            return Err(SimError::Invalid("empty parameter path".into()));
        }
        let (n, p) = (anchors[0].1.n_vars(), anchors[0].1.lags.len());
        if n == 0 || p == 0 {
            return Err(SimError::Invalid("need at least one variable and one lag".into()));
        }
        for (_, a) in &anchors {
            if a.n_vars() != n
                || a.lags.len() != p
                || a.intercept.len() != n
                || a.lags.iter().any(|l| l.shape() != (n, n))
            {
                return Err(SimError::Invalid("inconsistent dimensions".into()));
            }
        }
        let grid: Vec<f64> = match self {
            ParamPath::Linear { .. } => (0..=100).map(|i| i as f64 / 100.0).collect(),
            _ => anchors.iter().map(|(u, _)| *u).collect(),
        };
        for u in grid {
            let params = self.at(u);
            let radius = params.spectral_radius();
            if radius >= 1.0 {
                return Err(SimError::UnstableSpec { u, radius });
            }
            if cholesky(&params.sigma).is_none() {
                return Err(SimError::NonPosDefSigma(u));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSimSpec {
    pub path: ParamPath,
    pub t_len: usize,
    /// Discarded initial steps simulated with the `u = 0` parameters.
    pub burn_in: usize,
}

/// `T × N` sample of `x_t = c(u) + Σ_l Φ_l(u) x_{t−l} + Σ(u)^{1/2} ε_t`, `u = t / T`.
pub fn simulate_var(spec: &VarSimSpec, seed: u64) -> Result<DMatrix<f64>> {
    spec.path.validate()?;
    let first = spec.path.at(0.0);
    let (n, p) = (first.n_vars(), first.lags.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(n); p];
    let mut out = DMatrix::zeros(spec.t_len, n);
    let mut cached: Option<(VarParams, DMatrix<f64>)> = None;
    for step in 0..spec.burn_in + spec.t_len {
        let u = step.saturating_sub(spec.burn_in) as f64 / spec.t_len.max(1) as f64;
        let params = spec.path.at(u);
        let chol = match &cached {
            Some((prev, l)) if prev.sigma == params.sigma => l.clone(),
            _ => cholesky(&params.sigma).ok_or(SimError::NonPosDefSigma(u))?.l(),
        };
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = &params.intercept + &chol * z;
        for (l, phi) in params.lags.iter().enumerate() {
            x += phi * &history[history.len() - 1 - l];
        }
        history.remove(0);
        history.push(x.clone());
        if step >= spec.burn_in {
            out.row_mut(step - spec.burn_in).copy_from(&x.transpose());
        }
        cached = Some((params, chol));
    }
    Ok(out)
}

/// True parameters and implied network at one time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub index: usize,
    pub u: f64,
    pub params: VarParams,
    pub adjacency: AdjacencyMatrix,
    pub stats: ConnectednessStats,
}

pub fn truth_at(
    path: &ParamPath,
    t_len: usize,
    indices: &[usize],
    horizon: usize,
    labels: &[String],
) -> Result<Vec<TruthPoint>> {
    indices
        .iter()
        .map(|&index| {
            let u = index as f64 / t_len as f64;
            let params = path.at(u);
            let (adjacency, stats) = draw_connectedness(&params.lags, &params.sigma, horizon, labels)?;
            Ok(TruthPoint { index, u, params, adjacency, stats })
        })
        .collect()
}

/// Volatility as a function of the trading-day position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolPath {
    Flat(f64),
    Linear { start: f64, end: f64 },
    Series(Vec<f64>),
}

impl VolPath {
    pub fn at(&self, day: usize, n_days: usize) -> f64 {
        match self {
            VolPath::Flat(v) => *v,
            VolPath::Linear { start, end } => {
                let w = if n_days > 1 { day as f64 / (n_days - 1) as f64 } else { 0.0 };
                start + (end - start) * w
            }
            VolPath::Series(v) => v[day.min(v.len() - 1)],
        }
    }
}

/// Strike grid and quoting rules of a synthetic chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGrid {
    /// Grid half-width in standard deviations of log price at expiry.
    pub width_sd: f64,
    /// Strike spacing as a fraction of spot.
    pub spacing_frac: f64,
    /// Half the bid-ask spread as a fraction of the model price.
    pub half_spread: f64,
    /// Outermost strikes per wing quoted with a zero bid.
    pub zero_bid_wings: usize,
}

impl Default for ChainGrid {
    fn default() -> Self {
        Self { width_sd: 5.0, spacing_frac: 1.0 / 200.0, half_spread: 0.0, zero_bid_wings: 0 }
    }
}

/// Strikes at multiples of `spot · spacing_frac` within `±width_sd` standard
/// deviations of log price; always includes a strike at or next to spot.
pub fn strike_grid(spot: f64, vol: f64, t: f64, grid: &ChainGrid) -> Vec<f64> {
    let step = spot * grid.spacing_frac;
    let sd = vol * t.sqrt();
    let lo = (spot * (-grid.width_sd * sd).exp() / step).ceil() as i64;
    let hi = (spot * (grid.width_sd * sd).exp() / step).floor() as i64;
    (lo.max(1)..=hi).map(|i| i as f64 * step).collect()
}

/// Puts and calls at every strike priced by Black–Scholes.
pub fn bs_chain(
    firm_id: &str,
    quote_date: NaiveDate,
    days_to_expiry: i64,
    spot: f64,
    rate: f64,
    vol: f64,
    grid: &ChainGrid,
) -> OptionChain {
    let t = days_to_expiry as f64 / crate::options_iv::DAYS_PER_YEAR;
    let strikes = strike_grid(spot, vol, t, grid);
    let wings = grid.zero_bid_wings.min(strikes.len() / 2);
    let mut quotes = Vec::with_capacity(2 * strikes.len());
    for (i, &k) in strikes.iter().enumerate() {
        let in_wing = i < wings || i >= strikes.len() - wings;
        for kind in [OptionKind::Put, OptionKind::Call] {
            let price = bs_price(spot, k, rate, t, vol, kind).expect("valid inputs");
            let bid = if in_wing { 0.0 } else { price * (1.0 - grid.half_spread) };
            let ask = price * (1.0 + grid.half_spread);
            quotes.push(OptionQuote::new(k, bid, ask.max(bid), kind).expect("valid quote"));
        }
    }
    OptionChain::new(firm_id, quote_date, quote_date + Duration::days(days_to_expiry), spot, rate, quotes)
        .expect("valid chain")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSimSpec {
    pub firm_id: String,
    pub start: NaiveDate,
    /// Number of weekday quote dates.
    pub n_days: usize,
    pub spot: f64,
    pub rate: f64,
    pub days_to_expiry: i64,
    pub vol: VolPath,
    pub grid: ChainGrid,
}

impl Default for ChainSimSpec {
    fn default() -> Self {
        Self {
            firm_id: "SIM".into(),
            start: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
            n_days: 20,
            spot: 100.0,
            rate: 0.01,
            days_to_expiry: 30,
            vol: VolPath::Flat(0.2),
            grid: ChainGrid::default(),
        }
    }
}

/// Weekdays from `start` (inclusive), `n` of them.
pub fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start.iter_days().filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)).take(n).collect()
}

/// One chain per weekday; spot follows a driftless lognormal walk at the
/// day's volatility.
pub fn simulate_chains(spec: &ChainSimSpec, seed: u64) -> Result<Vec<OptionChain>> {
    if !(spec.spot > 0.0) || spec.days_to_expiry <= 0 || !(spec.grid.spacing_frac > 0.0) {
        return Err(SimError::Invalid("spot, expiry and strike spacing must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spot = spec.spot;
    let mut chains = Vec::with_capacity(spec.n_days);
    for (day, date) in weekdays_from(spec.start, spec.n_days).into_iter().enumerate() {
        let vol = spec.vol.at(day, spec.n_days);
        if !(vol > 0.0 && vol.is_finite()) {
            return Err(SimError::Invalid(format!("volatility {vol} on day {day}")));
        }
        if day > 0 {
            let z: f64 = rng.sample(StandardNormal);
            let dt = 1.0 / 252.0;
            spot *= (-0.5 * vol * vol * dt + vol * dt.sqrt() * z).exp();
        }
        chains.push(bs_chain(&spec.firm_id, date, spec.days_to_expiry, spot, spec.rate, vol, &spec.grid));
    }
    Ok(chains)
}

/// Inputs of the bundled end-to-end example.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoData {
    pub firm_vix: Vec<FirmVixPoint>,
    pub caps: Vec<CapObservation>,
    pub membership: Vec<MembershipInterval>,
    pub macro_series: Vec<MacroSeries>,
    /// Latent industry volatility levels behind the firm values.
    pub latent: DMatrix<f64>,
    pub industries: Vec<String>,
    pub dates: Vec<NaiveDate>,
}

pub const DEMO_INDUSTRIES: [&str; 6] = ["CD", "E", "F", "IN", "IT", "U"];
pub const DEMO_DAYS: usize = 600;
const OWN_LAG: f64 = 0.8;
const SPILL_CALM: f64 = 0.03;
const SPILL_STRESS: f64 = 0.08;

/// Six industries of two or three firms over 600 weekdays from mid-2006,
/// which spans an expansion, an inversion and a recession in the bundled
/// calendar. Log industry volatility follows a VAR(1) whose spillovers out
/// of IT and IN strengthen from 2008; firm values add idiosyncratic noise
/// and about 1% of firm-days are missing.
pub fn demo_dataset(seed: u64) -> DemoData {
    let n = DEMO_INDUSTRIES.len();
    let dates = weekdays_from(NaiveDate::from_ymd_opt(2006, 6, 1).expect("valid"), DEMO_DAYS);
    let shift =
        dates.iter().position(|d| *d >= NaiveDate::from_ymd_opt(2008, 1, 1).expect("valid")).unwrap_or(DEMO_DAYS);
    let hubs = [3usize, 4];
    let phi = |spill: f64| {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                OWN_LAG
            } else if hubs.contains(&j) {
                spill
            } else {
                0.0
            }
        })
    };
    let sigma = DMatrix::from_fn(n, n, |i, j| 0.0025 * if i == j { 1.0 } else { 0.3 });
    let mu = (0.25f64).ln();
    let calm = VarParams { intercept: DVector::zeros(n), lags: vec![phi(SPILL_CALM)], sigma: sigma.clone() };
    let stressed = VarParams { intercept: DVector::zeros(n), lags: vec![phi(SPILL_STRESS)], sigma: sigma * 1.5 };
    let path = ParamPath::Piecewise(vec![(0.0, calm), (shift as f64 / DEMO_DAYS as f64, stressed)]);
    let dev = simulate_var(&VarSimSpec { path, t_len: DEMO_DAYS, burn_in: 200 }, seed).expect("stable demo spec");
    let latent = dev.map(|x| (mu + x).exp());

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_DA7A);
    let mut firm_vix = Vec::new();
    let mut caps = Vec::new();
    let mut membership = Vec::new();
    let start = dates[0];
    for (j, ind) in DEMO_INDUSTRIES.iter().enumerate() {
        let n_firms = if *ind == "F" { 3 } else { 2 };
        for f in 0..n_firms {
            let firm = format!("{ind}{}", f + 1);
            let entry = if f == 2 { dates[DEMO_DAYS / 2] } else { start };
            membership.push(MembershipInterval {
                firm_id: firm.clone(),
                industry_id: ind.to_string(),
                start: entry,
                end: NaiveDate::MAX,
            });
            let mut cap = 50.0 + 100.0 * rng.random::<f64>();
            for (t, d) in dates.iter().enumerate() {
                cap *= (0.01 * rng.sample::<f64, _>(StandardNormal)).exp();
                let noise: f64 = rng.sample(StandardNormal);
                let missing = rng.random::<f64>() < 0.01;
                if *d < entry || missing {
                    continue;
                }
                firm_vix.push(FirmVixPoint {
                    firm_id: firm.clone(),
                    date: *d,
                    vix: latent[(t, j)] * (0.03 * noise).exp(),
                });
                caps.push(CapObservation { firm_id: firm.clone(), date: *d, market_cap: cap });
            }
        }
    }

    // Monthly targets respond to last month's average volatility.
    let mut monthly: BTreeMap<Period, (f64, usize)> = BTreeMap::new();
    for (t, d) in dates.iter().enumerate() {
        let e = monthly.entry(Period::of_date(*d, Frequency::Monthly)).or_insert((0.0, 0));
        e.0 += latent.row(t).mean();
        e.1 += 1;
    }
    let months: Vec<(Period, f64)> = monthly.into_iter().map(|(p, (s, c))| (p, s / c as f64)).collect();
    let mut cfnai = Vec::new();
    let mut ts = Vec::new();
    let mut ur = Vec::new();
    let mut oil = Vec::new();
    let (mut ur_level, mut oil_level) = (4.5, 60.0);
    for (i, (p, vol)) in months.iter().enumerate() {
        let prev_vol = if i > 0 { months[i - 1].1 } else { *vol };
        let slump = if i > 18 { 0.8 } else { 0.0 };
        cfnai.push((*p, 0.2 - 30.0 * (prev_vol - 0.25) - slump + 0.3 * rng.sample::<f64, _>(StandardNormal)));
        ts.push((*p, 1.5 - 0.05 * i as f64 + 0.1 * rng.sample::<f64, _>(StandardNormal)));
        ur_level += 0.05 * rng.sample::<f64, _>(StandardNormal) + if i > 18 { 0.1 } else { 0.0 };
        ur.push((*p, ur_level));
        oil_level *= (0.05 * rng.sample::<f64, _>(StandardNormal)).exp();
        oil.push((*p, oil_level));
    }
    let series = |id: &str, obs: Vec<(Period, f64)>, tr: Transform| {
        MacroSeries::new(id, Frequency::Monthly, obs).expect("ordered").with_transform(tr)
    };
    let macro_series = vec![
        series("CFNAI", cfnai, Transform::Level),
        series("OIL", oil, Transform::LogDiff),
        series("TS", ts, Transform::Level),
        series("UR", ur, Transform::Level),
    ];
    DemoData {
        firm_vix,
        caps,
        membership,
        macro_series,
        latent,
        industries: DEMO_INDUSTRIES.iter().map(|s| s.to_string()).collect(),
        dates,
    }
}
