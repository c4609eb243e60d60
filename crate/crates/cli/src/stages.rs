//! Pipeline steps shared by the subcommands and the full pipeline.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use ivnet_core::forecast::{
    horizon_suite, monthly_aggregate, threshold_decompose, MacroSeries, RegressionOptions, RegressionResult, SeKind,
    Transform,
};
use ivnet_core::industry_panel::IndustryPanel;
use ivnet_core::network::{draw_connectedness, network_series, AdjacencyMatrix, ConnectednessSeries};
use ivnet_core::options_iv::{closest_expiry, firm_vix, FirmVixPoint, IvConfig, OptionChain};
use ivnet_core::tvp_var::{estimate_path, PosteriorDrawSet, QbllEstimator, TvpVarSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{CliError, Context, Result};

/// Firm index per (firm, quote date) from the expiry closest to 30 days.
/// Chains that fail are skipped with a warning.
pub fn firm_vix_from_chains(
    chains: Vec<OptionChain>,
    cfg: &IvConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<FirmVixPoint>> {
    let mut groups: BTreeMap<(String, NaiveDate), Vec<OptionChain>> = BTreeMap::new();
    for c in chains {
        groups.entry((c.underlying_id.clone(), c.quote_date)).or_default().push(c);
    }
    if groups.is_empty() {
        return Err(CliError::input("no option chains"));
    }
    let results: Vec<_> = groups
        .par_iter()
        .map(|((firm, date), group)| {
            let i = closest_expiry(group).expect("groups are non-empty");
            (firm, date, firm_vix(&group[i], cfg))
        })
        .collect();
    let mut points = Vec::new();
    let mut first_err = None;
    for (firm, date, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                warnings.push(format!("{firm} {date}: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    if points.is_empty() {
        return Err(first_err.map(CliError::from).unwrap_or_else(|| CliError::numerical("no index computed")));
    }
    Ok(points)
}

/// Posterior draw sets at every `step`-th estimable date, in date order.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub labels: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub sets: Vec<PosteriorDrawSet>,
}

impl Estimates {
    pub fn dated(&self) -> Vec<(NaiveDate, &PosteriorDrawSet)> {
        self.dates.iter().copied().zip(self.sets.iter()).collect()
    }
}

pub fn estimate_panel(
    panel: &IndustryPanel,
    spec: &TvpVarSpec,
    step: usize,
    log_levels: bool,
    warnings: &mut Vec<String>,
) -> Result<Estimates> {
    let data = if log_levels { panel.values.map(f64::ln) } else { panel.values.clone() };
    let indices: Vec<usize> = QbllEstimator::new(&data, spec)?.index_range().step_by(step.max(1)).collect();
    let mut dates = Vec::new();
    let mut sets = Vec::new();
    let mut first_err = None;
    for (i, r) in estimate_path(&data, spec, &indices)? {
        let date = panel.dates[i];
        match r {
            Ok(set) => {
                if set.stable_count() * 2 < set.draws.len() {
                    warnings.push(format!("{date}: {} of {} draws stable", set.stable_count(), set.draws.len()));
                }
                dates.push(date);
                sets.push(set);
            }
            Err(e) => {
                warnings.push(format!("{date}: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    if sets.is_empty() {
        return Err(first_err.map(CliError::from).unwrap_or_else(|| CliError::input("no estimable dates")));
    }
    Ok(Estimates { labels: panel.industries.clone(), dates, sets })
}

pub fn connectedness(est: &Estimates, horizon: usize) -> Result<ConnectednessSeries> {
    Ok(network_series(&est.dated(), horizon, &est.labels)?)
}

/// Network of the posterior-mean parameters at each date, over stable
/// draws when there are any.
pub fn mean_adjacency(est: &Estimates, horizon: usize) -> Result<Vec<(NaiveDate, AdjacencyMatrix)>> {
    est.dated()
        .par_iter()
        .map(|(date, set)| {
            let any_stable = set.stable_count() > 0;
            let used: Vec<_> = set.draws.iter().filter(|d| d.stable || !any_stable).collect();
            let n = used[0].n_vars();
            let m = used.len() as f64;
            let lags: Vec<DMatrix<f64>> = (0..used[0].lags.len())
                .map(|l| used.iter().fold(DMatrix::zeros(n, n), |acc, d| acc + &d.lags[l]) / m)
                .collect();
            let sigma = used.iter().fold(DMatrix::zeros(n, n), |acc, d| acc + &d.sigma) / m;
            let (adj, _) = draw_connectedness(&lags, &sigma, horizon, &est.labels).context(date)?;
            Ok((*date, adj))
        })
        .collect()
}

/// Monthly means of the daily median total connectedness.
pub fn monthly_total(series: &ConnectednessSeries, id: &str) -> MacroSeries {
    monthly_aggregate(series, id)
}

pub struct PredictSpec<'a> {
    pub target: &'a str,
    pub controls: &'a [String],
    pub threshold: Option<f64>,
    pub horizons: &'a [usize],
    pub se: SeKind,
    pub transforms: &'a BTreeMap<String, Transform>,
}

fn prepared(
    series: &BTreeMap<String, MacroSeries>,
    id: &str,
    transforms: &BTreeMap<String, Transform>,
) -> Result<MacroSeries> {
    let s = series.get(id).ok_or_else(|| CliError::input(format!("macro series {id} not found")))?;
    let t = transforms.get(id).copied().unwrap_or(Transform::Level);
    s.clone().with_transform(t).transformed().context(id)
}

/// Regressions of the target (or its censored parts) on `network` then the
/// controls, at every horizon. Horizons that fail are skipped with a warning.
pub fn predict(
    macro_series: &BTreeMap<String, MacroSeries>,
    network: &[MacroSeries],
    spec: &PredictSpec,
    warnings: &mut Vec<String>,
) -> Result<Vec<RegressionResult>> {
    let y = prepared(macro_series, spec.target, spec.transforms)?;
    let targets = match spec.threshold {
        Some(tau) => {
            let (e, r) = threshold_decompose(&y, tau);
            vec![e, r]
        }
        None => vec![y],
    };
    let mut predictors = network.to_vec();
    for c in spec.controls {
        predictors.push(prepared(macro_series, c, spec.transforms)?);
    }
    let options = RegressionOptions { se_kind: spec.se };
    let mut out = Vec::new();
    let mut first_err = None;
    for target in &targets {
        for (h, r) in horizon_suite(target, &predictors, spec.horizons, &options) {
            match r {
                Ok(res) => out.push(res),
                Err(e) => {
                    warnings.push(format!("{} h={h}: {e}", target.id));
                    first_err.get_or_insert(e);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(first_err.map(CliError::from).unwrap_or_else(|| CliError::input("no horizons requested")));
    }
    Ok(out)
}
