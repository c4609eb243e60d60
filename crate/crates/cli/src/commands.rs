use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ivnet_core::cycles::{classify_hubs, phase_averages, HubRule};
use ivnet_core::forecast::{SeKind, Transform, CFNAI_THRESHOLD};
use ivnet_core::industry_panel::{build_panel, CalendarPolicy, IndustryPanel, UnfillablePolicy};
use ivnet_core::io;
use ivnet_core::network::{default_labels, DEFAULT_HORIZON};
use ivnet_core::options_iv::IvConfig;
use ivnet_core::sim::{self, ChainGrid, ChainSimSpec, ParamPath, VarParams, VarSimSpec, VolPath};
use ivnet_core::tvp_var::{PosteriorDrawSet, TvpVarSpec, WeightNormalization};
use nalgebra::{DMatrix, DVector};

use crate::config::{CalendarKind, PipelineConfig, CONFIG_ENV};
use crate::error::{CliError, Context, Result};
use crate::manifest::write_atomic;
use crate::pipeline::{open, run_pipeline, with_workers};
use crate::stages::{self, Estimates, PredictSpec};

#[derive(Debug, Parser)]
#[command(name = "ivnet", version, about = "Implied-volatility industry networks")]
pub struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Firm-level implied volatility indices from option chains.
    Vix(VixArgs),
    /// Cap-weighted industry panel from firm indices.
    Panel(PanelArgs),
    /// Posterior draws of the time-varying VAR at selected dates.
    Estimate(EstimateArgs),
    /// Connectedness series from posterior draws.
    Network(NetworkArgs),
    /// Phase averages and hub classification from a connectedness series.
    Classify(ClassifyArgs),
    /// Predictive regressions of a macro target on monthly connectedness.
    Predict(PredictArgs),
    /// Every stage from a config file, with a run manifest.
    Pipeline(PipelineArgs),
    /// Simulated VAR panel plus the true networks behind it.
    SimulateVar(SimulateVarArgs),
    /// Black-Scholes option chains.
    SimulateChains(SimulateChainsArgs),
    /// Writes the synthetic demo dataset and its config.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct VixArgs {
    #[arg(long)]
    pub chains: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Abort on the first malformed row instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = IvConfig::default().zero_bid_run)]
    pub zero_bid_run: usize,
    #[arg(long, default_value_t = IvConfig::default().min_strikes)]
    pub min_strikes: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnfillableArg {
    DropDate,
    Error,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CalendarArg {
    Observed,
    Weekdays,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[arg(long)]
    pub firm_vix: PathBuf,
    #[arg(long)]
    pub caps: PathBuf,
    #[arg(long)]
    pub membership: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = CalendarPolicy::default().fill_limit)]
    pub fill_limit: usize,
    #[arg(long, value_enum, default_value = "observed")]
    pub trading_calendar: CalendarArg,
    #[arg(long, value_enum, default_value = "drop-date")]
    pub on_unfillable: UnfillableArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    EffectiveSampleSize,
    SampleSize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub panel: PathBuf,
    /// Directory for `labels.csv` and one `posterior_<date>.csv` per date.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = TvpVarSpec::default().lags)]
    pub lags: usize,
    /// Kernel bandwidth in observations; defaults to ⌈√T⌉.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = TvpVarSpec::default().shrinkage)]
    pub shrinkage: f64,
    #[arg(long, default_value_t = TvpVarSpec::default().own_lag_prior_mean)]
    pub own_lag_prior_mean: f64,
    #[arg(long, default_value_t = TvpVarSpec::default().n_draws)]
    pub draws: usize,
    #[arg(long, default_value_t = TvpVarSpec::default().stability_cap)]
    pub stability_cap: f64,
    #[arg(long, value_enum, default_value = "effective-sample-size")]
    pub normalization: NormalizationArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimate at every `step`-th date.
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Estimate on the levels as given instead of their logs.
    #[arg(long)]
    pub no_log: bool,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[arg(long)]
    pub posterior_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the posterior-mean adjacency matrices here.
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub connectedness: PathBuf,
    #[arg(long)]
    pub calendar: PathBuf,
    /// Receives `phase_table.csv` and `classification.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = HubRule::default().top_k)]
    pub top_k: usize,
    #[arg(long, default_value_t = HubRule::default().bottom_k)]
    pub bottom_k: usize,
    /// Three hubs and three non-hubs; overrides the counts.
    #[arg(long)]
    pub strict_rule: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SeArg {
    Classical,
    Hac,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long = "macro")]
    pub macro_path: PathBuf,
    /// Network measure; regressed alone.
    #[arg(long)]
    pub connectedness: PathBuf,
    /// Hub and non-hub networks; when both are given they are also regressed jointly.
    #[arg(long, requires = "nonhubs")]
    pub hubs: Option<PathBuf>,
    #[arg(long, requires = "hubs")]
    pub nonhubs: Option<PathBuf>,
    #[arg(long, default_value = "CFNAI")]
    pub target: String,
    #[arg(long = "control")]
    pub controls: Vec<String>,
    /// `ID=level|diff|log_diff|growth`; unlisted series enter in levels.
    #[arg(long = "transform", value_parser = parse_transform)]
    pub transforms: Vec<(String, Transform)>,
    #[arg(long, value_delimiter = ',', default_values_t = ivnet_core::forecast::DEFAULT_HORIZONS)]
    pub horizons: Vec<usize>,
    #[arg(long, default_value_t = CFNAI_THRESHOLD, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Regress the target itself rather than its censored parts.
    #[arg(long)]
    pub no_threshold: bool,
    #[arg(long, value_enum, default_value = "classical")]
    pub se: SeArg,
    /// Coefficient table; the full results go to the same path with a `.json` extension.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_transform(s: &str) -> std::result::Result<(String, Transform), String> {
    let (id, t) = s.split_once('=').ok_or_else(|| format!("{s:?} is not ID=transform"))?;
    Ok((id.trim().to_string(), t.parse()?))
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, env = CONFIG_ENV)]
    pub config: PathBuf,
    /// `section.key=value` override; repeatable.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    /// Replaces `output.dir`; relative to the working directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateVarArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub t: usize,
    /// Own-lag coefficient.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub diag: f64,
    /// Off-diagonal coefficient.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub cross: f64,
    /// Off-diagonal coefficient of a second regime.
    #[arg(long, allow_negative_numbers = true)]
    pub cross_after: Option<f64>,
    /// Rescaled time at which the second regime starts.
    #[arg(long, default_value_t = 0.5)]
    pub break_at: f64,
    /// Move linearly between the regimes instead of switching.
    #[arg(long, requires = "cross_after")]
    pub smooth: bool,
    /// Only node 1 spills over: the cross coefficients apply to column 1 alone.
    #[arg(long)]
    pub one_way: bool,
    /// Innovation correlation.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Truth is reported at every `truth_every`-th index.
    #[arg(long, default_value_t = 50)]
    pub truth_every: usize,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
    /// Panel of `exp(x)`, so that estimating on logs recovers the VAR.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateChainsArgs {
    #[arg(long, default_value = "SIM")]
    pub firm: String,
    #[arg(long, default_value = "2020-01-02")]
    pub start: NaiveDate,
    #[arg(long, default_value_t = 20)]
    pub days: usize,
    #[arg(long, default_value_t = 100.0)]
    pub spot: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub rate: f64,
    #[arg(long, default_value_t = 30)]
    pub expiry_days: i64,
    #[arg(long, default_value_t = 0.2)]
    pub vol: f64,
    /// Final volatility of a linear path starting at `vol`.
    #[arg(long)]
    pub vol_end: Option<f64>,
    #[arg(long, default_value_t = ChainGrid::default().width_sd)]
    pub width_sd: f64,
    #[arg(long, default_value_t = ChainGrid::default().spacing_frac)]
    pub spacing_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    pub half_spread: f64,
    #[arg(long, default_value_t = 0)]
    pub zero_bid_wings: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = DEMO_SEED)]
    pub seed: u64,
}

pub const DEMO_SEED: u64 = 20_060_601;

/// Config shipped with the demo dataset.
pub const DEMO_CONFIG: &str = r#"# Synthetic six-industry demo. Paths are relative to this file.

[inputs]
firm_vix = "firm_vix.csv"
caps = "caps.csv"
membership = "membership.csv"
calendar = "calendar.csv"
macro = "macro.csv"

[panel]
fill_limit = 5
trading_calendar = "observed"
on_unfillable = "drop_date"

[tvp_var]
lags = 1
shrinkage = 0.05
own_lag_prior_mean = 0.1
n_draws = 200
stability_cap = 0.999
weight_normalization = "effective_sample_size"
log_levels = true
step = 5

[network]
horizon = 10

[classify]
top_k = 2
bottom_k = 2

[predict]
target = "CFNAI"
controls = ["OIL", "TS", "UR"]
threshold = -0.72
horizons = [1, 3, 6]
se = "classical"

[transforms]
OIL = "log_diff"

[output]
dir = "out"

[run]
seed = 7
"#;

pub fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Pipeline(a) => cmd_pipeline(a, workers),
        other => with_workers(workers, move || dispatch(other))?,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Vix(a) => cmd_vix(a),
        Command::Panel(a) => cmd_panel(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Network(a) => cmd_network(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Predict(a) => cmd_predict(a),
        Command::SimulateVar(a) => cmd_simulate_var(a),
        Command::SimulateChains(a) => cmd_simulate_chains(a),
        Command::Demo(a) => cmd_demo(a),
        Command::Pipeline(_) => unreachable!("handled by run"),
    }
}

fn report(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

pub fn cmd_vix(a: VixArgs) -> Result<()> {
    let (chains, issues) = io::read_chains(open(&a.chains)?, a.strict).context(a.chains.display())?;
    let mut warnings: Vec<String> = issues.iter().map(|i| format!("line {}: {}", i.line, i.message)).collect();
    let cfg = IvConfig { zero_bid_run: a.zero_bid_run, min_strikes: a.min_strikes };
    let points = stages::firm_vix_from_chains(chains, &cfg, &mut warnings)?;
    report(&warnings);
    write_atomic(&a.out, |w| Ok(io::write_firm_vix(w, &points)?))?;
    Ok(())
}

pub fn cmd_panel(a: PanelArgs) -> Result<()> {
    let firm_vix = io::read_firm_vix(open(&a.firm_vix)?).context(a.firm_vix.display())?;
    let caps = io::read_caps(open(&a.caps)?).context(a.caps.display())?;
    let membership = io::read_membership(open(&a.membership)?).context(a.membership.display())?;
    let calendar = match a.trading_calendar {
        CalendarArg::Observed => CalendarKind::Observed,
        CalendarArg::Weekdays => CalendarKind::Weekdays,
    };
    let mut policy = CalendarPolicy { fill_limit: a.fill_limit, ..CalendarPolicy::default() };
    policy.calendar = match calendar {
        CalendarKind::Observed => ivnet_core::industry_panel::TradingCalendar::Observed,
        CalendarKind::Weekdays => ivnet_core::industry_panel::TradingCalendar::Weekdays,
    };
    policy.on_unfillable = match a.on_unfillable {
        UnfillableArg::DropDate => UnfillablePolicy::DropDate,
        UnfillableArg::Error => UnfillablePolicy::Error,
    };
    let built = build_panel(&firm_vix, &caps, &membership, &policy)?;
    for d in &built.dropped {
        log::warn!("{}: {} unfillable, date dropped", d.date, d.industry);
    }
    write_atomic(&a.out, |w| Ok(io::write_panel(w, &built.panel)?))?;
    Ok(())
}

const LABELS_FILE: &str = "labels.csv";

fn posterior_name(date: NaiveDate) -> String {
    format!("posterior_{date}.csv")
}

pub fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let panel = io::read_panel(open(&a.panel)?).context(a.panel.display())?;
    let spec = TvpVarSpec {
        lags: a.lags,
        kernel_bandwidth: a.bandwidth,
        shrinkage: a.shrinkage,
        own_lag_prior_mean: a.own_lag_prior_mean,
        n_draws: a.draws,
        stability_cap: a.stability_cap,
        seed: a.seed,
        weight_normalization: match a.normalization {
            NormalizationArg::EffectiveSampleSize => WeightNormalization::EffectiveSampleSize,
            NormalizationArg::SampleSize => WeightNormalization::SampleSize,
        },
    };
    spec.validate()?;
    if a.step == 0 {
        return Err(CliError::input("--step must be at least 1"));
    }
    let mut warnings = Vec::new();
    let est = stages::estimate_panel(&panel, &spec, a.step, !a.no_log, &mut warnings)?;
    report(&warnings);
    write_atomic(&a.out_dir.join(LABELS_FILE), |w| {
        writeln!(w, "label").context(LABELS_FILE)?;
        for l in &est.labels {
            writeln!(w, "{l}").context(LABELS_FILE)?;
        }
        Ok(())
    })?;
    for (date, set) in est.dated() {
        write_atomic(&a.out_dir.join(posterior_name(date)), |w| Ok(io::write_posterior(w, &set.draws)?))?;
    }
    Ok(())
}

fn read_estimates(dir: &Path) -> Result<Estimates> {
    let labels_path = dir.join(LABELS_FILE);
    let text = std::fs::read_to_string(&labels_path).context(format!("reading {}", labels_path.display()))?;
    let labels: Vec<String> = text.lines().skip(1).map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    let mut files: Vec<(NaiveDate, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).context(format!("listing {}", dir.display()))? {
        let path = entry.context(dir.display())?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(date) = name.strip_prefix("posterior_").and_then(|s| s.strip_suffix(".csv")) {
            let date = date.parse().map_err(|_| CliError::input(format!("{name}: bad date in file name")))?;
            files.push((date, path));
        }
    }
    if files.is_empty() {
        return Err(CliError::input(format!("{}: no posterior_<date>.csv files", dir.display())));
    }
    files.sort();
    let mut dates = Vec::new();
    let mut sets = Vec::new();
    for (i, (date, path)) in files.into_iter().enumerate() {
        let draws = io::read_posterior(open(&path)?).context(path.display())?;
        if draws.iter().any(|d| d.n_vars() != labels.len()) {
            return Err(CliError::input(format!("{}: draws do not match {} labels", path.display(), labels.len())));
        }
        let attempts = draws.len();
        dates.push(date);
        sets.push(PosteriorDrawSet { index: i, draws, attempts, rejected: 0 });
    }
    Ok(Estimates { labels, dates, sets })
}

pub fn cmd_network(a: NetworkArgs) -> Result<()> {
    let est = read_estimates(&a.posterior_dir)?;
    let series = stages::connectedness(&est, a.horizon)?;
    write_atomic(&a.out, |w| Ok(io::write_connectedness(w, &series)?))?;
    if let Some(path) = &a.adjacency {
        let adj = stages::mean_adjacency(&est, a.horizon)?;
        write_atomic(path, |w| Ok(io::write_adjacency(w, &adj)?))?;
    }
    Ok(())
}

pub fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let series = io::read_connectedness(open(&a.connectedness)?, DEFAULT_HORIZON).context(a.connectedness.display())?;
    let calendar = io::read_calendar(open(&a.calendar)?).context(a.calendar.display())?;
    let table = phase_averages(&series, &calendar)?;
    let rule = if a.strict_rule { HubRule::strict() } else { HubRule::new(a.top_k, a.bottom_k) };
    let class = classify_hubs(&table.total_agg(), &rule)?;
    write_atomic(&a.out_dir.join("phase_table.csv"), |w| Ok(io::write_phase_table(w, &table)?))?;
    write_atomic(&a.out_dir.join("classification.json"), |w| Ok(io::write_classification(w, &class)?))?;
    Ok(())
}

pub fn cmd_predict(a: PredictArgs) -> Result<()> {
    let macro_series = io::read_macro(open(&a.macro_path)?).context(a.macro_path.display())?;
    let read_monthly = |path: &Path, id: &str| -> Result<_> {
        let s = io::read_connectedness(open(path)?, DEFAULT_HORIZON).context(path.display())?;
        Ok(stages::monthly_total(&s, id))
    };
    let mut models = vec![vec![read_monthly(&a.connectedness, "C")?]];
    if let (Some(h), Some(n)) = (&a.hubs, &a.nonhubs) {
        models.push(vec![read_monthly(h, "C_hub")?, read_monthly(n, "C_nonhub")?]);
    }
    if a.horizons.is_empty() || a.horizons.contains(&0) {
        return Err(CliError::input("--horizons must be positive"));
    }
    let transforms = a.transforms.iter().cloned().collect();
    let spec = PredictSpec {
        target: &a.target,
        controls: &a.controls,
        threshold: (!a.no_threshold).then_some(a.threshold),
        horizons: &a.horizons,
        se: match a.se {
            SeArg::Classical => SeKind::Classical,
            SeArg::Hac => SeKind::Hac,
        },
        transforms: &transforms,
    };
    let mut warnings = Vec::new();
    let mut results = Vec::new();
    for network in &models {
        results.extend(stages::predict(&macro_series, network, &spec, &mut warnings)?);
    }
    report(&warnings);
    let rows = io::regression_rows(&results);
    write_atomic(&a.out, |w| Ok(io::write_regression_rows(w, &rows)?))?;
    write_atomic(&a.out.with_extension("json"), |w| Ok(io::write_regressions_json(w, &results)?))?;
    Ok(())
}

pub fn cmd_pipeline(a: PipelineArgs, workers: usize) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config, &a.overrides)?;
    if let Some(dir) = a.out_dir {
        cfg.output.dir = dir;
    }
    if workers > 0 {
        cfg.run.workers = workers;
    }
    run_pipeline(&cfg).map(|_| ())
}

fn var_params(n: usize, diag: f64, cross: f64, one_way: bool, sigma: &DMatrix<f64>) -> VarParams {
    let phi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if !one_way || j == 0 {
            cross
        } else {
            0.0
        }
    });
    VarParams { intercept: DVector::zeros(n), lags: vec![phi], sigma: sigma.clone() }
}

pub fn cmd_simulate_var(a: SimulateVarArgs) -> Result<()> {
    if a.n < 2 || a.t < 2 {
        return Err(CliError::input("--n and --t must be at least 2"));
    }
    if !(0.0..1.0).contains(&a.break_at) || a.truth_every == 0 || a.horizon == 0 {
        return Err(CliError::input("--break-at must lie in [0, 1); --truth-every and --horizon must be positive"));
    }
    let sigma = DMatrix::from_fn(a.n, a.n, |i, j| if i == j { 1.0 } else { a.rho });
    let first = var_params(a.n, a.diag, a.cross, a.one_way, &sigma);
    let path = match a.cross_after {
        None => ParamPath::Constant(first),
        Some(c) => {
            let second = var_params(a.n, a.diag, c, a.one_way, &sigma);
            if a.smooth {
                ParamPath::Linear { start: first, end: second }
            } else {
                ParamPath::Piecewise(vec![(0.0, first), (a.break_at, second)])
            }
        }
    };
    let spec = VarSimSpec { path, t_len: a.t, burn_in: a.burn_in };
    let x = sim::simulate_var(&spec, a.seed)?;
    let labels = default_labels(a.n);
    let indices: Vec<usize> = (0..a.t).step_by(a.truth_every).collect();
    let truth = sim::truth_at(&spec.path, a.t, &indices, a.horizon, &labels)?;
    let dates = sim::weekdays_from(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), a.t);
    let panel = IndustryPanel::new(dates, labels, x.map(f64::exp))
        .map_err(|e| CliError::numerical(format!("simulated values overflow: {e}")))?;
    write_atomic(&a.out, |w| Ok(io::write_panel(w, &panel)?))?;
    write_atomic(&a.truth, |w| Ok(serde_json::to_writer_pretty(w, &truth)?))?;
    Ok(())
}

pub fn cmd_simulate_chains(a: SimulateChainsArgs) -> Result<()> {
    let vol = match a.vol_end {
        Some(end) => VolPath::Linear { start: a.vol, end },
        None => VolPath::Flat(a.vol),
    };
    let spec = ChainSimSpec {
        firm_id: a.firm,
        start: a.start,
        n_days: a.days,
        spot: a.spot,
        rate: a.rate,
        days_to_expiry: a.expiry_days,
        vol,
        grid: ChainGrid {
            width_sd: a.width_sd,
            spacing_frac: a.spacing_frac,
            half_spread: a.half_spread,
            zero_bid_wings: a.zero_bid_wings,
        },
    };
    let chains = sim::simulate_chains(&spec, a.seed)?;
    write_atomic(&a.out, |w| Ok(io::write_chains(w, &chains)?))?;
    Ok(())
}

pub fn cmd_demo(a: DemoArgs) -> Result<()> {
    let d = sim::demo_dataset(a.seed);
    let dir = &a.out_dir;
    write_atomic(&dir.join("firm_vix.csv"), |w| Ok(io::write_firm_vix(w, &d.firm_vix)?))?;
    write_atomic(&dir.join("caps.csv"), |w| Ok(io::write_caps(w, &d.caps)?))?;
    write_atomic(&dir.join("membership.csv"), |w| Ok(io::write_membership(w, &d.membership)?))?;
    write_atomic(&dir.join("calendar.csv"), |w| {
        Ok(io::write_calendar(w, &ivnet_core::cycles::PhaseCalendar::bundled())?)
    })?;
    write_atomic(&dir.join("macro.csv"), |w| Ok(io::write_macro(w, &d.macro_series)?))?;
    write_atomic(&dir.join("config.toml"), |w| w.write_all(DEMO_CONFIG.as_bytes()).context("config.toml"))?;
    Ok(())
}
