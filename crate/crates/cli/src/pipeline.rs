//! End-to-end run: firm indices → panel → networks → phases and hubs →
//! monthly aggregates → predictive regressions.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ivnet_core::cycles::{classify_hubs, phase_averages, subnetwork_panel, Subnetwork};
use ivnet_core::industry_panel::build_panel;
use ivnet_core::io;
use ivnet_core::tvp_var::derive_seed;

use crate::config::PipelineConfig;
use crate::error::{CliError, Context, Result};
use crate::manifest::RunManifest;
use crate::stages::{self, PredictSpec};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).context(format!("opening {}", path.display()))?))
}

/// Rayon pool with `workers` threads; 0 means the rayon default.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the pipeline and writes the manifest whether or not it succeeds.
/// Validation happens before any input is read.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    let mut manifest = RunManifest::start("pipeline", cfg.hash(), cfg.run.workers);
    let out_dir = cfg.output.dir.clone();
    let result = manifest
        .stage("validate", |_| cfg.validate().map(|_| ((), 0)))
        .and_then(|_| with_workers(cfg.run.workers, || run_stages(cfg, &mut manifest)).and_then(|r| r));
    manifest.finish(&out_dir)?;
    result.map(|_| manifest)
}

fn run_stages(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<()> {
    let dir = cfg.output.dir.as_path();
    for (name, path) in cfg.input_paths() {
        m.record_input(name, path)?;
    }

    let firm_vix = if let Some(path) = &cfg.inputs.chains {
        let points = m.stage("vix", |w| {
            let (chains, issues) = io::read_chains(open(path)?, cfg.vix.strict).context(path.display())?;
            w.extend(issues.iter().map(|i| format!("{}: line {}: {}", path.display(), i.line, i.message)));
            let pts = stages::firm_vix_from_chains(chains, &cfg.iv_config(), w)?;
            let n = pts.len();
            Ok((pts, n))
        })?;
        m.write_output(dir, "firm_vix.csv", points.len(), |w| Ok(io::write_firm_vix(w, &points)?))?;
        points
    } else {
        let path = cfg.inputs.firm_vix.as_ref().expect("validated");
        m.stage("load_firm_vix", |_| {
            let pts = io::read_firm_vix(open(path)?).context(path.display())?;
            let n = pts.len();
            Ok((pts, n))
        })?
    };

    let panel = m.stage("panel", |w| {
        let caps = io::read_caps(open(&cfg.inputs.caps)?).context(cfg.inputs.caps.display())?;
        let membership = io::read_membership(open(&cfg.inputs.membership)?).context(cfg.inputs.membership.display())?;
        let built = build_panel(&firm_vix, &caps, &membership, &cfg.calendar_policy())?;
        w.extend(built.dropped.iter().map(|d| format!("{}: {} unfillable, date dropped", d.date, d.industry)));
        let n = built.panel.n_dates();
        Ok((built.panel, n))
    })?;
    m.write_output(dir, "panel.csv", panel.n_dates(), |w| Ok(io::write_panel(w, &panel)?))?;

    let spec = cfg.tvp_spec();
    let horizon = cfg.network.horizon;
    let (step, log_levels) = (cfg.tvp_var.step, cfg.tvp_var.log_levels);
    let full = m.stage("estimate_full", |w| {
        let e = stages::estimate_panel(&panel, &spec, step, log_levels, w)?;
        let n = e.sets.len();
        Ok((e, n))
    })?;
    let series = m.stage("network_full", |_| {
        let s = stages::connectedness(&full, horizon)?;
        let n = s.points.len();
        Ok((s, n))
    })?;
    let adjacency = m.stage("adjacency_full", |_| {
        let a = stages::mean_adjacency(&full, horizon)?;
        let n = a.len();
        Ok((a, n))
    })?;
    drop(full);
    m.write_output(dir, "connectedness_full.csv", series.points.len(), |w| Ok(io::write_connectedness(w, &series)?))?;
    m.write_output(dir, "adjacency_full.csv", adjacency.len() * panel.n_industries(), |w| {
        Ok(io::write_adjacency(w, &adjacency)?)
    })?;

    let table = m.stage("phases", |_| {
        let calendar = io::read_calendar(open(&cfg.inputs.calendar)?).context(cfg.inputs.calendar.display())?;
        let t = phase_averages(&series, &calendar)?;
        let n = t.blocks.len();
        Ok((t, n))
    })?;
    m.write_output(dir, "phase_table.csv", table.industries.len(), |w| Ok(io::write_phase_table(w, &table)?))?;

    let class = m.stage("classify", |_| {
        let c = classify_hubs(&table.total_agg(), &cfg.hub_rule())?;
        let n = c.ranking.len();
        Ok((c, n))
    })?;
    m.write_output(dir, "classification.json", class.ranking.len(), |w| Ok(io::write_classification(w, &class)?))?;

    let mut sub_series = Vec::new();
    for (k, (which, name)) in [(Subnetwork::Hubs, "hubs"), (Subnetwork::NonHubs, "nonhubs")].into_iter().enumerate() {
        let sub = subnetwork_panel(&panel, &class, which)?;
        let sub_spec = ivnet_core::tvp_var::TvpVarSpec { seed: derive_seed(spec.seed, usize::MAX - k), ..spec.clone() };
        let est = m.stage(&format!("estimate_{name}"), |w| {
            let e = stages::estimate_panel(&sub, &sub_spec, step, log_levels, w)?;
            let n = e.sets.len();
            Ok((e, n))
        })?;
        let s = m.stage(&format!("network_{name}"), |_| {
            let s = stages::connectedness(&est, horizon)?;
            let n = s.points.len();
            Ok((s, n))
        })?;
        m.write_output(dir, &format!("connectedness_{name}.csv"), s.points.len(), |w| {
            Ok(io::write_connectedness(w, &s)?)
        })?;
        sub_series.push(s);
    }

    let monthly = m.stage("aggregate", |_| {
        let v = vec![
            stages::monthly_total(&series, "C"),
            stages::monthly_total(&sub_series[0], "C_hub"),
            stages::monthly_total(&sub_series[1], "C_nonhub"),
        ];
        let n = v.iter().map(|s| s.len()).sum();
        Ok((v, n))
    })?;
    m.write_output(dir, "monthly_connectedness.csv", monthly.iter().map(|s| s.len()).sum(), |w| {
        Ok(io::write_macro(w, &monthly)?)
    })?;

    if let Some(path) = &cfg.inputs.r#macro {
        let macro_series = m.stage("load_macro", |_| {
            let s = io::read_macro(open(path)?).context(path.display())?;
            let n = s.values().map(|x| x.len()).sum();
            Ok((s, n))
        })?;
        let p = &cfg.predict;
        let spec = PredictSpec {
            target: &p.target,
            controls: &p.controls,
            threshold: p.threshold,
            horizons: &p.horizons,
            se: p.se,
            transforms: &cfg.transforms,
        };
        for (name, network) in [("total", &monthly[..1]), ("hubs", &monthly[1..])] {
            let results = m.stage(&format!("predict_{name}"), |w| {
                let r = stages::predict(&macro_series, network, &spec, w)?;
                let n = r.len();
                Ok((r, n))
            })?;
            let rows = io::regression_rows(&results);
            m.write_output(dir, &format!("regressions_{name}.csv"), rows.len(), |w| {
                Ok(io::write_regression_rows(w, &rows)?)
            })?;
            m.write_output(dir, &format!("regressions_{name}.json"), results.len(), |w| {
                Ok(io::write_regressions_json(w, &results)?)
            })?;
        }
    }
    Ok(())
}
