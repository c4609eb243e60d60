//! Cap-weighted industry uncertainty panel built from firm-level indexes.

use crate::options_iv::FirmVixPoint;
use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("no member firm with a market cap for this industry and date")]
    EmptyIndustryDay,
    #[error("weights and index values cover different firms")]
    MismatchedFirms,
    #[error("industry {industry} cannot be filled on {date}")]
    UnfillableGap { industry: String, date: NaiveDate },
    #[error("firm {0} belongs to two industries on the same date")]
    OverlappingMembership(String),
    #[error("duplicate observation for firm {firm} on {date}")]
    DuplicateObservation { firm: String, date: NaiveDate },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("panel has no retained dates")]
    EmptyPanel,
}

pub type Result<T> = std::result::Result<T, PanelError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipInterval {
    pub firm_id: String,
    pub industry_id: String,
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
}

impl MembershipInterval {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapObservation {
    pub firm_id: String,
    pub date: NaiveDate,
    pub market_cap: f64,
}

/// Aligned `T × N` matrix of industry index levels.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustryPanel {
    pub dates: Vec<NaiveDate>,
    pub industries: Vec<String>,
    pub values: DMatrix<f64>,
}

impl IndustryPanel {
    pub fn new(dates: Vec<NaiveDate>, industries: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != (dates.len(), industries.len()) {
            return Err(PanelError::InvalidInput(format!(
                "values are {:?}, expected {}×{}",
                values.shape(),
                dates.len(),
                industries.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PanelError::InvalidInput("dates must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PanelError::InvalidInput("panel values must be positive and finite".into()));
        }
        let unique: BTreeSet<&String> = industries.iter().collect();
        if unique.len() != industries.len() {
            return Err(PanelError::InvalidInput("duplicate industry labels".into()));
        }
        Ok(Self { dates, industries, values })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_industries(&self) -> usize {
        self.industries.len()
    }

    /// Column subset in the requested order; dates are preserved.
    pub fn select(&self, industries: &[String]) -> Result<Self> {
        let cols = industries
            .iter()
            .map(|name| {
                self.industries
                    .iter()
                    .position(|i| i == name)
                    .ok_or_else(|| PanelError::InvalidInput(format!("unknown industry {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self.values.select_columns(&cols);
        Ok(Self { dates: self.dates.clone(), industries: industries.to_vec(), values })
    }
}

/// Market-cap weights `cap_s / Σ cap`.
pub fn cap_weights(caps: &[f64]) -> Result<Vec<f64>> {
    if caps.is_empty() {
        return Err(PanelError::EmptyIndustryDay);
    }
    if caps.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(PanelError::InvalidInput("market caps must be positive".into()));
    }
    let total: f64 = caps.iter().sum();
    Ok(caps.iter().map(|c| c / total).collect())
}

/// Weighted average of firm indexes; both maps must cover the same firms.
pub fn aggregate_industry(firm_vix: &BTreeMap<String, f64>, weights: &BTreeMap<String, f64>) -> Result<f64> {
    if firm_vix.len() != weights.len() || firm_vix.keys().zip(weights.keys()).any(|(a, b)| a != b) {
        return Err(PanelError::MismatchedFirms);
    }
    Ok(firm_vix.iter().map(|(firm, v)| v * weights[firm]).sum())
}

/// Which dates make up the trading calendar.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TradingCalendar {
    /// Every date on which any firm index is observed.
    #[default]
    Observed,
    /// Monday to Friday between the first and last observed date.
    Weekdays,
    Explicit(Vec<NaiveDate>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfillablePolicy {
    /// Drop the date for all industries.
    #[default]
    DropDate,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalendarPolicy {
    pub calendar: TradingCalendar,
    /// Maximum number of trading days an observation is carried forward.
    pub fill_limit: usize,
    pub on_unfillable: UnfillablePolicy,
}

impl Default for CalendarPolicy {
    fn default() -> Self {
        Self { calendar: TradingCalendar::Observed, fill_limit: 5, on_unfillable: UnfillablePolicy::DropDate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedDate {
    pub date: NaiveDate,
    pub industry: String,
}

/// Panel plus the bookkeeping behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelBuild {
    pub panel: IndustryPanel,
    /// Per retained date and industry: `(firm, weight)` pairs, firms sorted.
    pub weights: Vec<Vec<Vec<(String, f64)>>>,
    pub dropped: Vec<DroppedDate>,
}

/// Forward-fillable observations of one quantity for one firm.
struct FilledSeries {
    /// Calendar position of each observation and its value, ascending.
    obs: Vec<(usize, f64)>,
}

impl FilledSeries {
    fn value_at(&self, pos: usize, fill_limit: usize) -> Option<f64> {
        let idx = self.obs.partition_point(|(p, _)| *p <= pos);
        if idx == 0 {
            return None;
        }
        let (p, v) = self.obs[idx - 1];
        (pos - p <= fill_limit).then_some(v)
    }
}

fn index_series<'a>(
    calendar: &[NaiveDate],
    rows: impl Iterator<Item = (&'a str, NaiveDate, f64)>,
) -> Result<BTreeMap<String, FilledSeries>> {
    let mut by_firm: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for (firm, date, value) in rows {
        if by_firm.entry(firm.to_string()).or_default().insert(date, value).is_some() {
            return Err(PanelError::DuplicateObservation { firm: firm.to_string(), date });
        }
    }
    Ok(by_firm
        .into_iter()
        .map(|(firm, obs)| {
            let obs = obs
                .into_iter()
                .filter_map(|(date, v)| {
                    // position of the last calendar day on or before the observation
                    let pos = calendar.partition_point(|d| *d <= date);
                    (pos > 0).then(|| (pos - 1, v))
                })
                .fold(Vec::<(usize, f64)>::new(), |mut acc, (pos, v)| {
                    // several off-calendar observations can map to one day; keep the latest
                    match acc.last_mut() {
                        Some(last) if last.0 == pos => last.1 = v,
                        _ => acc.push((pos, v)),
                    }
                    acc
                });
            (firm, FilledSeries { obs })
        })
        .collect())
}

fn check_membership(membership: &[MembershipInterval]) -> Result<()> {
    let mut by_firm: BTreeMap<&str, Vec<&MembershipInterval>> = BTreeMap::new();
    for m in membership {
        if m.start > m.end {
            return Err(PanelError::InvalidInput(format!(
                "membership of {} in {} starts after it ends",
                m.firm_id, m.industry_id
            )));
        }
        by_firm.entry(&m.firm_id).or_default().push(m);
    }
    for (firm, mut spans) in by_firm {
        spans.sort_by_key(|m| (m.start, m.end));
        for pair in spans.windows(2) {
            if pair[1].start <= pair[0].end && pair[1].industry_id != pair[0].industry_id {
                return Err(PanelError::OverlappingMembership(firm.to_string()));
            }
        }
    }
    Ok(())
}

fn weekdays_between(first: NaiveDate, last: NaiveDate) -> Vec<NaiveDate> {
    first
        .iter_days()
        .take_while(|d| *d <= last)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// Assembles the industry panel.
///
/// Industries are the sorted distinct `industry_id`s of `membership`. On each
/// calendar date, an industry's value is the cap-weighted mean over member
/// firms that have both an index value and a cap, each carried forward at most
/// `fill_limit` trading days. Input row order never matters.
pub fn build_panel(
    firm_vix: &[FirmVixPoint],
    caps: &[CapObservation],
    membership: &[MembershipInterval],
    policy: &CalendarPolicy,
) -> Result<PanelBuild> {
    check_membership(membership)?;
    if firm_vix.iter().any(|p| !(p.vix.is_finite() && p.vix > 0.0)) {
        return Err(PanelError::InvalidInput("firm index values must be positive".into()));
    }
    if caps.iter().any(|c| !(c.market_cap.is_finite() && c.market_cap > 0.0)) {
        return Err(PanelError::InvalidInput("market caps must be positive".into()));
    }
    let observed: BTreeSet<NaiveDate> = firm_vix.iter().map(|p| p.date).collect();
    let calendar: Vec<NaiveDate> = match &policy.calendar {
        TradingCalendar::Observed => observed.iter().copied().collect(),
        TradingCalendar::Weekdays => match (observed.first(), observed.last()) {
            (Some(a), Some(b)) => weekdays_between(*a, *b),
            _ => Vec::new(),
        },
        TradingCalendar::Explicit(days) => {
            let set: BTreeSet<NaiveDate> = days.iter().copied().collect();
            set.into_iter().collect()
        }
    };
    let vix = index_series(&calendar, firm_vix.iter().map(|p| (p.firm_id.as_str(), p.date, p.vix)))?;
    let cap = index_series(&calendar, caps.iter().map(|c| (c.firm_id.as_str(), c.date, c.market_cap)))?;
    let industries: Vec<String> =
        membership.iter().map(|m| m.industry_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if industries.is_empty() {
        return Err(PanelError::InvalidInput("membership is empty".into()));
    }

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut weights = Vec::new();
    let mut dropped = Vec::new();
    for (pos, &date) in calendar.iter().enumerate() {
        let mut row = Vec::with_capacity(industries.len());
        let mut row_weights = Vec::with_capacity(industries.len());
        let mut missing = None;
        for industry in &industries {
            let mut members: Vec<&str> = membership
                .iter()
                .filter(|m| &m.industry_id == industry && m.contains(date))
                .map(|m| m.firm_id.as_str())
                .collect();
            members.sort_unstable();
            members.dedup();
            let mut firm_values = BTreeMap::new();
            let mut firm_caps = Vec::new();
            for firm in members {
                let v = vix.get(firm).and_then(|s| s.value_at(pos, policy.fill_limit));
                let c = cap.get(firm).and_then(|s| s.value_at(pos, policy.fill_limit));
                if let (Some(v), Some(c)) = (v, c) {
                    firm_values.insert(firm.to_string(), v);
                    firm_caps.push(c);
                }
            }
            if firm_values.is_empty() {
                missing = Some(industry.clone());
                break;
            }
            let w = cap_weights(&firm_caps)?;
            let w: BTreeMap<String, f64> = firm_values.keys().cloned().zip(w).collect();
            row.push(aggregate_industry(&firm_values, &w)?);
            row_weights.push(w.into_iter().collect::<Vec<_>>());
        }
        match missing {
            Some(industry) => match policy.on_unfillable {
                UnfillablePolicy::Error => return Err(PanelError::UnfillableGap { industry, date }),
                UnfillablePolicy::DropDate => dropped.push(DroppedDate { date, industry }),
            },
            None => {
                dates.push(date);
                rows.push(row);
                weights.push(row_weights);
            }
        }
    }
    if dates.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    let values = DMatrix::from_fn(dates.len(), industries.len(), |t, j| rows[t][j]);
    Ok(PanelBuild { panel: IndustryPanel::new(dates, industries, values)?, weights, dropped })
}
