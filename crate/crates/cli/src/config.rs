//! Pipeline configuration: a TOML file of flat `[section]` tables plus
//! `section.key=value` overrides from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ivnet_core::cycles::HubRule;
use ivnet_core::forecast::{SeKind, Transform, CFNAI_THRESHOLD};
use ivnet_core::industry_panel::{CalendarPolicy, TradingCalendar, UnfillablePolicy};
use ivnet_core::options_iv::IvConfig;
use ivnet_core::tvp_var::{TvpVarSpec, WeightNormalization};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "IVNET_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Raw option chains; when set, firm indices are computed from them.
    pub chains: Option<PathBuf>,
    /// Precomputed firm indices, used when `chains` is absent.
    pub firm_vix: Option<PathBuf>,
    pub caps: PathBuf,
    pub membership: PathBuf,
    pub calendar: PathBuf,
    pub r#macro: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VixSection {
    pub strict: bool,
    pub zero_bid_run: usize,
    pub min_strikes: usize,
}

impl Default for VixSection {
    fn default() -> Self {
        let d = IvConfig::default();
        Self { strict: false, zero_bid_run: d.zero_bid_run, min_strikes: d.min_strikes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarKind {
    #[default]
    Observed,
    Weekdays,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanelSection {
    pub fill_limit: usize,
    pub trading_calendar: CalendarKind,
    pub on_unfillable: UnfillablePolicy,
}

impl Default for PanelSection {
    fn default() -> Self {
        let d = CalendarPolicy::default();
        Self { fill_limit: d.fill_limit, trading_calendar: CalendarKind::Observed, on_unfillable: d.on_unfillable }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvpVarSection {
    pub lags: usize,
    pub bandwidth: Option<f64>,
    pub shrinkage: f64,
    pub own_lag_prior_mean: f64,
    pub n_draws: usize,
    pub stability_cap: f64,
    pub weight_normalization: WeightNormalization,
    /// Estimate on natural logs of the industry levels.
    pub log_levels: bool,
    /// Estimate at every `step`-th date.
    pub step: usize,
}

impl Default for TvpVarSection {
    fn default() -> Self {
        let d = TvpVarSpec::default();
        Self {
            lags: d.lags,
            bandwidth: d.kernel_bandwidth,
            shrinkage: d.shrinkage,
            own_lag_prior_mean: d.own_lag_prior_mean,
            n_draws: d.n_draws,
            stability_cap: d.stability_cap,
            weight_normalization: d.weight_normalization,
            log_levels: true,
            step: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub horizon: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self { horizon: ivnet_core::network::DEFAULT_HORIZON }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub top_k: usize,
    pub bottom_k: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let d = HubRule::default();
        Self { top_k: d.top_k, bottom_k: d.bottom_k }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub target: String,
    pub controls: Vec<String>,
    /// Censoring threshold; when set, the target is split into expansion
    /// and recession parts and each is regressed separately.
    pub threshold: Option<f64>,
    pub horizons: Vec<usize>,
    pub se: SeKind,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            target: "CFNAI".into(),
            controls: Vec::new(),
            threshold: Some(CFNAI_THRESHOLD),
            horizons: ivnet_core::forecast::DEFAULT_HORIZONS.to_vec(),
            se: SeKind::Classical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide. Never affects outputs.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    #[serde(default)]
    pub vix: VixSection,
    #[serde(default)]
    pub panel: PanelSection,
    #[serde(default)]
    pub tvp_var: TvpVarSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub predict: PredictSection,
    /// Transform per macro series id; unlisted series enter in levels.
    #[serde(default)]
    pub transforms: BTreeMap<String, Transform>,
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Sets `section.key` in `table` from a `section.key=value` override. The
/// value is parsed as a TOML value and taken as a string if that fails.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("override {assignment:?} is not key=value")))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::input(format!("override key {key:?} is not section.key")))?;
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::input(format!("{section} is not a section"))),
    }
}

impl PipelineConfig {
    /// Parses `text`, applies overrides, and resolves relative paths against `base`.
    pub fn from_str_with(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).context("parsing config")?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: PipelineConfig = table.try_into().context("config")?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).context(format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with(&text, overrides, base)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        for p in [i.chains.as_mut(), i.firm_vix.as_mut(), i.r#macro.as_mut()].into_iter().flatten() {
            fix(p);
        }
        fix(&mut i.caps);
        fix(&mut i.membership);
        fix(&mut i.calendar);
        fix(&mut self.output.dir);
    }

    /// Input files in a fixed order, for digests.
    pub fn input_paths(&self) -> Vec<(&'static str, &Path)> {
        let i = &self.inputs;
        let mut out = Vec::new();
        if let Some(p) = &i.chains {
            out.push(("chains", p.as_path()));
        } else if let Some(p) = &i.firm_vix {
            out.push(("firm_vix", p.as_path()));
        }
        out.push(("caps", i.caps.as_path()));
        out.push(("membership", i.membership.as_path()));
        out.push(("calendar", i.calendar.as_path()));
        if let Some(p) = &i.r#macro {
            out.push(("macro", p.as_path()));
        }
        out
    }

    /// Checks paths and numeric ranges without reading any data.
    pub fn validate(&self) -> Result<()> {
        if self.inputs.chains.is_none() && self.inputs.firm_vix.is_none() {
            return Err(CliError::input("inputs: one of chains or firm_vix is required"));
        }
        for (name, path) in self.input_paths() {
            if !path.is_file() {
                return Err(CliError::input(format!("inputs.{name}: {} does not exist", path.display())));
            }
        }
        self.tvp_spec().validate().context("tvp_var")?;
        let t = &self.tvp_var;
        if t.step == 0 {
            return Err(CliError::input("tvp_var.step must be at least 1"));
        }
        if self.network.horizon == 0 {
            return Err(CliError::input("network.horizon must be at least 1"));
        }
        if self.classify.top_k == 0 || self.classify.bottom_k == 0 {
            return Err(CliError::input("classify.top_k and classify.bottom_k must be at least 1"));
        }
        if self.inputs.r#macro.is_some() {
            let p = &self.predict;
            if p.horizons.is_empty() || p.horizons.contains(&0) {
                return Err(CliError::input("predict.horizons must be non-empty and positive"));
            }
            if p.threshold.is_some_and(|x| !x.is_finite()) {
                return Err(CliError::input("predict.threshold must be finite"));
            }
        }
        if self.vix.min_strikes == 0 || self.vix.zero_bid_run == 0 {
            return Err(CliError::input("vix.min_strikes and vix.zero_bid_run must be at least 1"));
        }
        Ok(())
    }

    pub fn tvp_spec(&self) -> TvpVarSpec {
        let t = &self.tvp_var;
        TvpVarSpec {
            lags: t.lags,
            kernel_bandwidth: t.bandwidth,
            shrinkage: t.shrinkage,
            own_lag_prior_mean: t.own_lag_prior_mean,
            n_draws: t.n_draws,
            stability_cap: t.stability_cap,
            seed: self.run.seed,
            weight_normalization: t.weight_normalization,
        }
    }

    pub fn iv_config(&self) -> IvConfig {
        IvConfig { zero_bid_run: self.vix.zero_bid_run, min_strikes: self.vix.min_strikes }
    }

    pub fn calendar_policy(&self) -> CalendarPolicy {
        let calendar = match self.panel.trading_calendar {
            CalendarKind::Observed => TradingCalendar::Observed,
            CalendarKind::Weekdays => TradingCalendar::Weekdays,
        };
        CalendarPolicy { calendar, fill_limit: self.panel.fill_limit, on_unfillable: self.panel.on_unfillable }
    }

    pub fn hub_rule(&self) -> HubRule {
        HubRule::new(self.classify.top_k, self.classify.bottom_k)
    }

    /// SHA-256 of the resolved configuration; the worker count is excluded
    /// because it never changes outputs.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.workers = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(json))
    }
}
