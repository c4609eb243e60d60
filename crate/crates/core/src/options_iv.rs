//! Model-free implied volatility for a single underlying.
//!
//! A chain of out-of-the-money call and put quotes for one expiry is turned
//! into the variance of the log price over the life of the option:
//!
//! ```text
//! σ²_T = 2 Σ_i (ΔK_i / K_i²) e^{rT} Q(K_i) − (F/K0 − 1)²
//! F    = e^{rT} (C_mid − P_mid) + K        (strike with the smallest |C − P|)
//! VIX  = sqrt(365 / days · σ²_T)
//! ```
//!
//! `σ²_T` is the variance over the option horizon, i.e. `T` times the
//! annualized quantity; annualization happens in [`annualize_vix`].
//!
//! The closed-form Black-Scholes pricer [`bs_price`] lives here too; every
//! synthetic chain used to check the extraction is priced with it.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Days per year used for both time-to-expiry and annualization.
pub const DAYS_PER_YEAR: f64 = 365.0;
/// Target horizon of the volatility index, in calendar days.
pub const TARGET_HORIZON_DAYS: i64 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvError {
    #[error("no strike has both a call and a put with a positive mid-quote")]
    NoParityStrike,
    #[error("every strike lies above the forward {forward}")]
    NoK0 { forward: f64 },
    #[error("no out-of-the-money quote survives filtering")]
    EmptySelection,
    #[error("only {found} strikes selected, at least {required} required")]
    TooFewStrikes { found: usize, required: usize },
    #[error("implied variance {0} is not positive (correction term dominates)")]
    NegativeVariance(f64),
    #[error("negative input {0}")]
    NegativeInput(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("malformed quote: {0}")]
    MalformedQuote(String),
    #[error("malformed chain: {0}")]
    MalformedChain(String),
}

pub type Result<T> = std::result::Result<T, IvError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptionKind::Call => f.write_str("call"),
            OptionKind::Put => f.write_str("put"),
        }
    }
}

impl FromStr for OptionKind {
    type Err = IvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" | "c" => Ok(OptionKind::Call),
            "put" | "p" => Ok(OptionKind::Put),
            other => Err(IvError::MalformedQuote(format!("unknown option kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    pub kind: OptionKind,
}

impl OptionQuote {
    /// Validated constructor; crossed or negative quotes are rejected.
    pub fn new(strike: f64, bid: f64, ask: f64, kind: OptionKind) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(IvError::MalformedQuote(format!("strike {strike} must be positive")));
        }
        if !(bid.is_finite() && ask.is_finite()) || bid < 0.0 {
            return Err(IvError::MalformedQuote(format!("bid {bid} / ask {ask} invalid")));
        }
        if bid > ask {
            return Err(IvError::MalformedQuote(format!("crossed quote: bid {bid} > ask {ask}")));
        }
        Ok(Self { strike, bid, ask, kind })
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }
}

/// All quotes for one underlying, one quote date and one expiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub underlying_id: String,
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub spot: f64,
    pub risk_free_rate: f64,
    quotes: Vec<OptionQuote>,
}

impl OptionChain {
    /// Builds a chain, sorting quotes by (kind, strike) and keeping one quote
    /// per (strike, kind): the one with the narrowest spread, higher bid on ties.
    pub fn new(
        underlying_id: impl Into<String>,
        quote_date: NaiveDate,
        expiry_date: NaiveDate,
        spot: f64,
        risk_free_rate: f64,
        quotes: Vec<OptionQuote>,
    ) -> Result<Self> {
        if expiry_date <= quote_date {
            return Err(IvError::MalformedChain(format!("expiry {expiry_date} is not after quote date {quote_date}")));
        }
        if !(spot.is_finite() && spot > 0.0) {
            return Err(IvError::MalformedChain(format!("spot {spot} must be positive")));
        }
        if !risk_free_rate.is_finite() {
            return Err(IvError::MalformedChain("risk-free rate is not finite".into()));
        }
        let mut quotes = quotes;
        quotes.sort_by(|a, b| {
            a.kind
                .cmp(&b.kind)
                .then(a.strike.total_cmp(&b.strike))
                .then((a.ask - a.bid).total_cmp(&(b.ask - b.bid)))
                .then(b.bid.total_cmp(&a.bid))
        });
        quotes.dedup_by(|later, earlier| later.kind == earlier.kind && later.strike == earlier.strike);
        Ok(Self { underlying_id: underlying_id.into(), quote_date, expiry_date, spot, risk_free_rate, quotes })
    }

    pub fn quotes(&self) -> &[OptionQuote] {
        &self.quotes
    }

    pub fn days_to_expiry(&self) -> i64 {
        (self.expiry_date - self.quote_date).num_days()
    }

    /// Time to expiry in years (calendar days / 365).
    pub fn time_to_expiry(&self) -> f64 {
        self.days_to_expiry() as f64 / DAYS_PER_YEAR
    }

    /// Quotes paired by strike, ascending.
    fn strike_rows(&self) -> Vec<StrikeRow> {
        let mut rows: Vec<StrikeRow> = Vec::new();
        let mut strikes: Vec<f64> = self.quotes.iter().map(|q| q.strike).collect();
        strikes.sort_by(f64::total_cmp);
        strikes.dedup();
        for k in strikes {
            rows.push(StrikeRow { strike: k, call: None, put: None });
        }
        for q in &self.quotes {
            let idx = rows.binary_search_by(|r| r.strike.total_cmp(&q.strike)).expect("strike present");
            match q.kind {
                OptionKind::Call => rows[idx].call = Some(*q),
                OptionKind::Put => rows[idx].put = Some(*q),
            }
        }
        rows
    }
}

#[derive(Debug, Clone, Copy)]
struct StrikeRow {
    strike: f64,
    call: Option<OptionQuote>,
    put: Option<OptionQuote>,
}

/// Quote-filtering knobs. Defaults follow the exchange methodology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvConfig {
    /// Consecutive zero-bid strikes that terminate a wing.
    pub zero_bid_run: usize,
    /// Minimum number of selected strikes for a variance estimate.
    pub min_strikes: usize,
}

impl Default for IvConfig {
    fn default() -> Self {
        Self { zero_bid_run: 2, min_strikes: 3 }
    }
}

/// Out-of-the-money strip: `(strike, Q)` pairs ascending in strike, plus K0.
#[derive(Debug, Clone, PartialEq)]
pub struct OtmSelection {
    pub k0: f64,
    pub quotes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTerms {
    /// `2 Σ ΔK/K² e^{rT} Q`
    pub summation: f64,
    /// `(F/K0 − 1)²`
    pub correction: f64,
}

impl VarianceTerms {
    pub fn variance(&self) -> f64 {
        self.summation - self.correction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmVixPoint {
    pub firm_id: String,
    pub date: NaiveDate,
    pub vix: f64,
}

/// Forward level from put-call parity at the strike where |C_mid − P_mid| is smallest.
pub fn forward_price(chain: &OptionChain) -> Result<f64> {
    let t = chain.time_to_expiry();
    let best = chain
        .strike_rows()
        .into_iter()
        .filter_map(|row| match (row.call, row.put) {
            (Some(c), Some(p)) if c.mid() > 0.0 && p.mid() > 0.0 => Some((row.strike, c.mid() - p.mid())),
            _ => None,
        })
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .ok_or(IvError::NoParityStrike)?;
    Ok((chain.risk_free_rate * t).exp() * best.1 + best.0)
}

/// Picks the OTM strip around K0 (the largest strike not above `forward`).
///
/// Puts below K0, calls above, and the call/put mid average at K0. Zero-bid
/// quotes are skipped; a wing ends after `cfg.zero_bid_run` consecutive
/// zero bids.
pub fn select_otm_quotes(chain: &OptionChain, forward: f64, cfg: &IvConfig) -> Result<OtmSelection> {
    let rows = chain.strike_rows();
    let k0_idx = rows.iter().rposition(|r| r.strike <= forward).ok_or(IvError::NoK0 { forward })?;
    let k0 = rows[k0_idx].strike;
    let run_limit = cfg.zero_bid_run.max(1);

    let mut below = Vec::new();
    let mut zeros = 0;
    for row in rows[..k0_idx].iter().rev() {
        let Some(put) = row.put else { continue };
        if put.bid <= 0.0 {
            zeros += 1;
            if zeros >= run_limit {
                break;
            }
            continue;
        }
        zeros = 0;
        below.push((row.strike, put.mid()));
    }

    let mut above = Vec::new();
    zeros = 0;
    for row in &rows[k0_idx + 1..] {
        let Some(call) = row.call else { continue };
        if call.bid <= 0.0 {
            zeros += 1;
            if zeros >= run_limit {
                break;
            }
            continue;
        }
        zeros = 0;
        above.push((row.strike, call.mid()));
    }

    let at_k0: Vec<f64> =
        [rows[k0_idx].call, rows[k0_idx].put].into_iter().flatten().filter(|q| q.bid > 0.0).map(|q| q.mid()).collect();

    let mut quotes = below;
    quotes.reverse();
    if !at_k0.is_empty() {
        quotes.push((k0, at_k0.iter().sum::<f64>() / at_k0.len() as f64));
    }
    quotes.extend(above);
    if quotes.is_empty() {
        return Err(IvError::EmptySelection);
    }
    debug_assert!(quotes.windows(2).all(|w| w[0].0 < w[1].0));
    Ok(OtmSelection { k0, quotes })
}

/// Summation and correction terms for an already selected strip.
///
/// Interior strikes use the centred ΔK; the two wing strikes use one-sided
/// differences.
pub fn variance_terms(selection: &OtmSelection, forward: f64, rate: f64, t: f64) -> VarianceTerms {
    let q = &selection.quotes;
    let n = q.len();
    let growth = (rate * t).exp();
    let mut sum = 0.0;
    for i in 0..n {
        let dk = if n == 1 {
            0.0
        } else if i == 0 {
            q[1].0 - q[0].0
        } else if i == n - 1 {
            q[n - 1].0 - q[n - 2].0
        } else {
            0.5 * (q[i + 1].0 - q[i - 1].0)
        };
        let k = q[i].0;
        sum += dk / (k * k) * growth * q[i].1;
    }
    let ratio = forward / selection.k0 - 1.0;
    VarianceTerms { summation: 2.0 * sum, correction: ratio * ratio }
}

/// Variance of the log price over the chain's horizon (not annualized).
pub fn implied_variance(chain: &OptionChain, cfg: &IvConfig) -> Result<f64> {
    let forward = forward_price(chain)?;
    let selection = select_otm_quotes(chain, forward, cfg)?;
    if selection.quotes.len() < cfg.min_strikes {
        return Err(IvError::TooFewStrikes { found: selection.quotes.len(), required: cfg.min_strikes });
    }
    let terms = variance_terms(&selection, forward, chain.risk_free_rate, chain.time_to_expiry());
    let var = terms.variance();
    if !(var > 0.0 && var.is_finite()) {
        return Err(IvError::NegativeVariance(var));
    }
    Ok(var)
}

/// `sqrt(365 / horizon_days · sigma2)`.
pub fn annualize_vix(sigma2: f64, horizon_days: i64) -> Result<f64> {
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(IvError::NegativeInput(sigma2));
    }
    if horizon_days <= 0 {
        return Err(IvError::DomainError(format!("horizon {horizon_days} days")));
    }
    Ok((DAYS_PER_YEAR / horizon_days as f64 * sigma2).sqrt())
}

/// Firm-level index for one chain, annualized over the chain's own horizon.
pub fn firm_vix(chain: &OptionChain, cfg: &IvConfig) -> Result<FirmVixPoint> {
    let var = implied_variance(chain, cfg)?;
    let vix = annualize_vix(var, chain.days_to_expiry())?;
    Ok(FirmVixPoint { firm_id: chain.underlying_id.clone(), date: chain.quote_date, vix })
}

/// Index of the expiry closest to 30 calendar days; ties go to the longer expiry.
pub fn closest_expiry(chains: &[OptionChain]) -> Option<usize> {
    chains
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (a.days_to_expiry() - TARGET_HORIZON_DAYS).abs();
            let db = (b.days_to_expiry() - TARGET_HORIZON_DAYS).abs();
            da.cmp(&db).then(b.days_to_expiry().cmp(&a.days_to_expiry()))
        })
        .map(|(i, _)| i)
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Closed-form European option price (no dividends).
pub fn bs_price(spot: f64, strike: f64, rate: f64, t: f64, vol: f64, kind: OptionKind) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && t > 0.0 && vol > 0.0) {
        return Err(IvError::DomainError(format!(
            "spot {spot}, strike {strike}, T {t}, vol {vol} must all be positive"
        )));
    }
    let sd = vol * t.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * t) / sd;
    let d2 = d1 - sd;
    let disc = (-rate * t).exp();
    Ok(match kind {
        OptionKind::Call => spot * norm_cdf(d1) - strike * disc * norm_cdf(d2),
        OptionKind::Put => strike * disc * norm_cdf(-d2) - spot * norm_cdf(-d1),
    })
}
