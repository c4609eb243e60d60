//! Business-cycle phases, phase-averaged node statistics and hub classification.

use crate::industry_panel::IndustryPanel;
use crate::network::ConnectednessSeries;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Calendar shipped with the crate: inversions and recessions, expansion elsewhere.
pub const DEFAULT_CALENDAR_CSV: &str = include_str!("../data/phase_calendar.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CyclesError {
    #[error("no observations fall in the {0} phase")]
    EmptyPhase(Phase),
    #[error("rule selects {requested} industries but only {available} exist")]
    RuleExceedsUniverse { requested: usize, available: usize },
    #[error("selection is empty")]
    EmptySelection,
    #[error("calendar intervals overlap at {0}")]
    OverlappingIntervals(NaiveDate),
    #[error("invalid calendar: {0}")]
    InvalidCalendar(String),
    #[error("industry {0} missing from the table")]
    UnknownIndustry(String),
}

pub type Result<T> = std::result::Result<T, CyclesError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Inversion,
    Recession,
    Expansion,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Inversion, Phase::Recession, Phase::Expansion];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Inversion => "inversion",
            Phase::Recession => "recession",
            Phase::Expansion => "expansion",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = CyclesError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inversion" => Ok(Phase::Inversion),
            "recession" => Ok(Phase::Recession),
            "expansion" => Ok(Phase::Expansion),
            other => Err(CyclesError::InvalidCalendar(format!("unknown phase {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub start: NaiveDate,
    /// Inclusive; `None` runs to the end of any sample.
    pub end: Option<NaiveDate>,
    pub phase: Phase,
}

impl PhaseInterval {
    fn end_or_max(&self) -> NaiveDate {
        self.end.unwrap_or(NaiveDate::MAX)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end_or_max()
    }
}

/// Ordered, non-overlapping phase intervals. Dates outside every listed
/// interval are expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCalendar {
    intervals: Vec<PhaseInterval>,
}

impl PhaseCalendar {
    pub fn new(mut intervals: Vec<PhaseInterval>) -> Result<Self> {
        intervals.sort_by_key(|i| i.start);
        for i in &intervals {
            if let Some(end) = i.end {
                if end < i.start {
                    return Err(CyclesError::InvalidCalendar(format!(
                        "interval starting {} ends before it starts",
                        i.start
                    )));
                }
            }
        }
        for pair in intervals.windows(2) {
            if pair[1].start <= pair[0].end_or_max() {
                return Err(CyclesError::OverlappingIntervals(pair[1].start));
            }
        }
        Ok(Self { intervals })
    }

    /// The bundled calendar.
    pub fn bundled() -> Self {
        crate::io::read_calendar(DEFAULT_CALENDAR_CSV.as_bytes()).expect("bundled calendar is valid")
    }

    pub fn intervals(&self) -> &[PhaseInterval] {
        &self.intervals
    }

    pub fn phase_of(&self, date: NaiveDate) -> Phase {
        self.intervals.iter().find(|i| i.contains(date)).map(|i| i.phase).unwrap_or(Phase::Expansion)
    }

    /// Explicit partition of `[first, last]`, expansions filled in.
    pub fn covering(&self, first: NaiveDate, last: NaiveDate) -> Vec<PhaseInterval> {
        let mut out = Vec::new();
        let mut cursor = first;
        for iv in &self.intervals {
            if iv.end_or_max() < first || iv.start > last {
                continue;
            }
            if iv.start > cursor {
                out.push(PhaseInterval { start: cursor, end: iv.start.pred_opt(), phase: Phase::Expansion });
            }
            let start = iv.start.max(cursor);
            let end = iv.end_or_max().min(last);
            out.push(PhaseInterval { start, end: Some(end), phase: iv.phase });
            match end.succ_opt() {
                Some(next) => cursor = next,
                None => return out,
            }
            if cursor > last {
                return out;
            }
        }
        if cursor <= last {
            out.push(PhaseInterval { start: cursor, end: Some(last), phase: Phase::Expansion });
        }
        out
    }
}

impl Default for PhaseCalendar {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Period label of a phase-table block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Phase(Phase),
    Total,
}

impl Period {
    pub fn as_str(&self) -> &'static str {
        match self {
            Period::Phase(p) => p.as_str(),
            Period::Total => "total",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeAverages {
    pub net: f64,
    pub agg: f64,
    /// `100 · AGG_j / Σ AGG`.
    pub agg_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBlock {
    pub period: Period,
    pub days: usize,
    pub nodes: Vec<NodeAverages>,
}

/// Phase-averaged NET and AGG per industry, plus the total period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub industries: Vec<String>,
    pub blocks: Vec<PhaseBlock>,
}

impl PhaseTable {
    pub fn block(&self, period: Period) -> Option<&PhaseBlock> {
        self.blocks.iter().find(|b| b.period == period)
    }

    /// `(industry, total-period AGG)` pairs.
    pub fn total_agg(&self) -> Vec<(String, f64)> {
        let total = self.block(Period::Total).expect("total block always present");
        self.industries.iter().cloned().zip(total.nodes.iter().map(|n| n.agg)).collect()
    }
}

fn block(period: Period, rows: &[(&[f64], &[f64])]) -> PhaseBlock {
    let n = rows[0].0.len();
    let days = rows.len();
    let mut net = vec![0.0; n];
    let mut agg = vec![0.0; n];
    for (r_net, r_agg) in rows {
        for j in 0..n {
            net[j] += r_net[j];
            agg[j] += r_agg[j];
        }
    }
    let agg_total: f64 = agg.iter().map(|a| a / days as f64).sum();
    let nodes = (0..n)
        .map(|j| {
            let a = agg[j] / days as f64;
            NodeAverages {
                net: net[j] / days as f64,
                agg: a,
                agg_share: if agg_total > 0.0 { 100.0 * a / agg_total } else { 0.0 },
            }
        })
        .collect();
    PhaseBlock { period, days, nodes }
}

/// Means of the daily posterior-median NET and AGG per phase and overall.
///
/// Phases the calendar places inside the series' date span must contain at
/// least one observation; phases outside the span are omitted.
pub fn phase_averages(series: &ConnectednessSeries, calendar: &PhaseCalendar) -> Result<PhaseTable> {
    let first = series.points.first().ok_or(CyclesError::EmptyPhase(Phase::Expansion))?.date;
    let last = series.points.last().expect("non-empty").date;
    let medians: Vec<(NaiveDate, Vec<f64>, Vec<f64>)> = series
        .points
        .iter()
        .map(|p| (p.date, p.net.iter().map(|s| s.median).collect(), p.agg.iter().map(|s| s.median).collect()))
        .collect();
    let expected: BTreeSet<Phase> = calendar.covering(first, last).iter().map(|i| i.phase).collect();
    let mut blocks = Vec::new();
    for phase in Phase::ALL {
        let rows: Vec<(&[f64], &[f64])> = medians
            .iter()
            .filter(|(d, _, _)| calendar.phase_of(*d) == phase)
            .map(|(_, n, a)| (n.as_slice(), a.as_slice()))
            .collect();
        if rows.is_empty() {
            if expected.contains(&phase) {
                return Err(CyclesError::EmptyPhase(phase));
            }
            continue;
        }
        blocks.push(block(Period::Phase(phase), &rows));
    }
    let all: Vec<(&[f64], &[f64])> = medians.iter().map(|(_, n, a)| (n.as_slice(), a.as_slice())).collect();
    blocks.push(block(Period::Total, &all));
    Ok(PhaseTable { industries: series.labels.clone(), blocks })
}

/// Rank thresholds for hub classification on total-period AGG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubRule {
    pub metric: RankMetric,
    pub top_k: usize,
    pub bottom_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    TotalAgg,
}

impl HubRule {
    pub fn new(top_k: usize, bottom_k: usize) -> Self {
        Self { metric: RankMetric::TotalAgg, top_k, bottom_k }
    }

    /// Three hubs, three non-hubs.
    pub fn strict() -> Self {
        Self::new(3, 3)
    }
}

impl Default for HubRule {
    fn default() -> Self {
        Self::new(5, 4)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubClassification {
    pub rule: HubRule,
    pub hubs: BTreeSet<String>,
    pub non_hubs: BTreeSet<String>,
    pub middle: BTreeSet<String>,
    /// Industries in rank order, highest AGG first.
    pub ranking: Vec<String>,
}

/// Ranks industries by AGG (descending, ties by symbol) and cuts the ends.
pub fn classify_hubs(total_agg: &[(String, f64)], rule: &HubRule) -> Result<HubClassification> {
    let n = total_agg.len();
    if rule.top_k + rule.bottom_k > n {
        return Err(CyclesError::RuleExceedsUniverse { requested: rule.top_k + rule.bottom_k, available: n });
    }
    let mut ranked: Vec<&(String, f64)> = total_agg.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let ranking: Vec<String> = ranked.iter().map(|(s, _)| s.clone()).collect();
    Ok(HubClassification {
        rule: *rule,
        hubs: ranking[..rule.top_k].iter().cloned().collect(),
        non_hubs: ranking[n - rule.bottom_k..].iter().cloned().collect(),
        middle: ranking[rule.top_k..n - rule.bottom_k].iter().cloned().collect(),
        ranking,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subnetwork {
    Hubs,
    NonHubs,
}

/// Panel restricted to hubs or non-hubs, columns kept in panel order.
pub fn subnetwork_panel(
    panel: &IndustryPanel,
    classification: &HubClassification,
    which: Subnetwork,
) -> Result<IndustryPanel> {
    let set = match which {
        Subnetwork::Hubs => &classification.hubs,
        Subnetwork::NonHubs => &classification.non_hubs,
    };
    let cols: Vec<String> = panel.industries.iter().filter(|i| set.contains(*i)).cloned().collect();
    if cols.is_empty() {
        return Err(CyclesError::EmptySelection);
    }
    if let Some(missing) = set.iter().find(|s| !panel.industries.contains(s)) {
        return Err(CyclesError::UnknownIndustry(missing.clone()));
    }
    panel.select(&cols).map_err(|_| CyclesError::EmptySelection)
}

/// Averages of the total-period table keyed by industry.
pub fn total_agg_map(table: &PhaseTable) -> BTreeMap<String, f64> {
    table.total_agg().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ConnectednessPoint, StatSummary};
    use approx::assert_relative_eq;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn point(date: NaiveDate, net: &[f64], agg: &[f64]) -> ConnectednessPoint {
        let s = |v: &[f64]| v.iter().map(|x| StatSummary::point(*x)).collect::<Vec<_>>();
        ConnectednessPoint {
            date,
            total: StatSummary::point(agg.iter().sum::<f64>() / 2.0),
            to: s(agg),
            from: s(agg),
            net: s(net),
            agg: s(agg),
            draws_used: 1,
            used_unstable: false,
        }
    }

    fn series(points: Vec<ConnectednessPoint>) -> ConnectednessSeries {
        ConnectednessSeries { labels: vec!["A".into(), "B".into()], horizon: 10, points }
    }

    #[test]
    fn bundled_calendar_dates() {
        let cal = PhaseCalendar::bundled();
        assert_eq!(cal.phase_of(d("2000-06-30")), Phase::Expansion);
        assert_eq!(cal.phase_of(d("2000-07-01")), Phase::Inversion);
        assert_eq!(cal.phase_of(d("2001-03-31")), Phase::Inversion);
        assert_eq!(cal.phase_of(d("2001-04-01")), Phase::Recession);
        assert_eq!(cal.phase_of(d("2001-11-30")), Phase::Recession);
        assert_eq!(cal.phase_of(d("2001-12-01")), Phase::Expansion);
        assert_eq!(cal.phase_of(d("2006-09-01")), Phase::Inversion);
        assert_eq!(cal.phase_of(d("2008-01-01")), Phase::Recession);
        assert_eq!(cal.phase_of(d("2009-06-30")), Phase::Recession);
        assert_eq!(cal.phase_of(d("2009-07-01")), Phase::Expansion);
        assert_eq!(cal.phase_of(d("2020-01-31")), Phase::Expansion);
        assert_eq!(cal.phase_of(d("2020-05-29")), Phase::Recession);
    }

    #[test]
    fn covering_partitions_sample() {
        let cal = PhaseCalendar::bundled();
        let parts = cal.covering(d("2000-01-03"), d("2020-05-29"));
        assert_eq!(parts.first().unwrap().start, d("2000-01-03"));
        assert_eq!(parts.last().unwrap().end, Some(d("2020-05-29")));
        for w in parts.windows(2) {
            assert_eq!(w[0].end.unwrap().succ_opt().unwrap(), w[1].start);
        }
        let phases: Vec<Phase> = parts.iter().map(|p| p.phase).collect();
        use Phase::*;
        assert_eq!(
            phases,
            vec![Expansion, Inversion, Recession, Expansion, Inversion, Recession, Expansion, Recession]
        );
    }

    #[test]
    fn overlapping_calendar_rejected() {
        let iv = |s: &str, e: &str, p| PhaseInterval { start: d(s), end: Some(d(e)), phase: p };
        let r = PhaseCalendar::new(vec![
            iv("2001-01-01", "2001-06-30", Phase::Recession),
            iv("2001-06-30", "2001-12-31", Phase::Inversion),
        ]);
        assert_eq!(r, Err(CyclesError::OverlappingIntervals(d("2001-06-30"))));
    }

    #[test]
    fn constant_series_averages() {
        let pts = ["2008-02-01", "2009-08-03", "2007-03-01"]
            .iter()
            .map(|s| point(d(s), &[1.0, -1.0], &[20.0, 30.0]))
            .collect::<Vec<_>>();
        let mut pts = pts;
        pts.sort_by_key(|p| p.date);
        let t = phase_averages(&series(pts), &PhaseCalendar::bundled()).unwrap();
        for b in &t.blocks {
            assert_eq!(b.nodes[0].net, 1.0);
            assert_eq!(b.nodes[1].agg, 30.0);
            assert_relative_eq!(b.nodes[0].agg_share + b.nodes[1].agg_share, 100.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn split_days_equal_their_phase() {
        let pts = vec![
            point(d("2009-06-30"), &[2.0, -2.0], &[10.0, 10.0]),
            point(d("2009-07-01"), &[4.0, -4.0], &[30.0, 10.0]),
        ];
        let t = phase_averages(&series(pts), &PhaseCalendar::bundled()).unwrap();
        assert_eq!(t.block(Period::Phase(Phase::Recession)).unwrap().nodes[0].net, 2.0);
        assert_eq!(t.block(Period::Phase(Phase::Expansion)).unwrap().nodes[0].net, 4.0);
        assert_eq!(t.block(Period::Total).unwrap().nodes[0].net, 3.0);
        assert_eq!(t.block(Period::Phase(Phase::Expansion)).unwrap().nodes[0].agg_share, 75.0);
        assert!(t.block(Period::Phase(Phase::Inversion)).is_none());
    }

    #[test]
    fn phase_inside_span_without_days_is_an_error() {
        let iv = PhaseInterval { start: d("2020-01-04"), end: Some(d("2020-01-05")), phase: Phase::Recession };
        let cal = PhaseCalendar::new(vec![iv]).unwrap();
        let pts =
            vec![point(d("2020-01-03"), &[0.0, 0.0], &[1.0, 1.0]), point(d("2020-01-06"), &[0.0, 0.0], &[1.0, 1.0])];
        assert_eq!(phase_averages(&series(pts), &cal), Err(CyclesError::EmptyPhase(Phase::Recession)));
    }

    fn table2() -> Vec<(String, f64)> {
        [
            ("CD", 29.61),
            ("CM", 30.49),
            ("CS", 24.27),
            ("E", 28.27),
            ("F", 22.15),
            ("HC", 26.45),
            ("IN", 31.47),
            ("IT", 33.71),
            ("M", 15.84),
            ("RE", 14.22),
            ("U", 9.59),
        ]
        .iter()
        .map(|(s, v)| (s.to_string(), *v))
        .collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn reference_hub_lists() {
        let c = classify_hubs(&table2(), &HubRule::default()).unwrap();
        assert_eq!(c.hubs, set(&["IT", "IN", "CM", "CD", "E"]));
        assert_eq!(c.non_hubs, set(&["F", "M", "RE", "U"]));
        assert_eq!(c.middle, set(&["HC", "CS"]));
        let s = classify_hubs(&table2(), &HubRule::strict()).unwrap();
        assert_eq!(s.hubs, set(&["IT", "IN", "CM"]));
        assert_eq!(s.non_hubs, set(&["U", "RE", "M"]));
    }

    #[test]
    fn ties_break_alphabetically() {
        let flat: Vec<(String, f64)> = ["D", "B", "A", "C"].iter().map(|s| (s.to_string(), 5.0)).collect();
        let c = classify_hubs(&flat, &HubRule::new(1, 2)).unwrap();
        assert_eq!(c.ranking, vec!["A", "B", "C", "D"]);
        assert_eq!(c.hubs, set(&["A"]));
        assert_eq!(c.non_hubs, set(&["C", "D"]));
    }

    #[test]
    fn rule_larger_than_universe() {
        assert_eq!(
            classify_hubs(&table2()[..6], &HubRule::default()),
            Err(CyclesError::RuleExceedsUniverse { requested: 9, available: 6 })
        );
    }

    #[test]
    fn subpanels_partition_columns() {
        use nalgebra::DMatrix;
        let names: Vec<String> = table2().into_iter().map(|(s, _)| s).collect();
        let panel = IndustryPanel::new(
            vec![d("2020-01-02"), d("2020-01-03")],
            names.clone(),
            DMatrix::from_fn(2, 11, |t, j| 1.0 + (t * 11 + j) as f64),
        )
        .unwrap();
        let c = classify_hubs(&table2(), &HubRule::default()).unwrap();
        let hubs = subnetwork_panel(&panel, &c, Subnetwork::Hubs).unwrap();
        let non = subnetwork_panel(&panel, &c, Subnetwork::NonHubs).unwrap();
        assert_eq!(hubs.n_industries(), 5);
        assert_eq!(non.n_industries(), 4);
        let mut union: BTreeSet<String> = hubs.industries.iter().chain(&non.industries).cloned().collect();
        union.extend(c.middle.iter().cloned());
        assert_eq!(union, names.iter().cloned().collect());
        let empty = HubClassification { hubs: BTreeSet::new(), ..c };
        assert_eq!(subnetwork_panel(&panel, &empty, Subnetwork::Hubs), Err(CyclesError::EmptySelection));
    }
}
