//! CSV and JSON readers and writers for every on-disk format.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so every writer/reader pair round-trips byte for byte.

use crate::cycles::{
    HubClassification, NodeAverages, Period as TablePeriod, Phase, PhaseBlock, PhaseCalendar, PhaseInterval, PhaseTable,
};
use crate::forecast::{Frequency, MacroSeries, Period, RegressionResult};
use crate::industry_panel::{CapObservation, IndustryPanel, MembershipInterval};
use crate::network::{AdjacencyMatrix, ConnectednessPoint, ConnectednessSeries, StatSummary};
use crate::options_iv::{FirmVixPoint, OptionChain, OptionKind, OptionQuote};
use crate::tvp_var::PosteriorDraw;
use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}: input is empty")]
    EmptyInput(&'static str),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// A skipped input row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if found.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(IoError::Header { expected: expected.join(","), found: found.join(",") });
    }
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("")
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    s.parse().map_err(|_| format!("invalid date {s:?}"))
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("invalid number {s:?}"))
}

fn row_err(rec: &csv::StringRecord, message: String) -> IoError {
    IoError::Row { line: line_of(rec), message }
}

/// Parses each record; lenient mode logs and skips bad rows, strict mode fails.
fn parse_rows<R: Read, T>(
    rdr: &mut csv::Reader<R>,
    strict: bool,
    issues: &mut Vec<RowIssue>,
    mut parse: impl FnMut(&csv::StringRecord) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if !strict => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                issues.push(RowIssue { line, message: e.to_string() });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        match parse(&rec) {
            Ok(v) => out.push(v),
            Err(message) if strict => return Err(row_err(&rec, message)),
            Err(message) => {
                log::warn!("line {}: {message}, row skipped", line_of(&rec));
                issues.push(RowIssue { line: line_of(&rec), message });
            }
        }
    }
    Ok(out)
}

const CHAIN_HEADER: [&str; 9] =
    ["quote_date", "expiry_date", "firm_id", "spot", "rate", "strike", "kind", "bid", "ask"];

/// Option chains grouped by (firm, quote date, expiry), sorted by that key.
pub fn read_chains<R: Read>(r: R, strict: bool) -> Result<(Vec<OptionChain>, Vec<RowIssue>)> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &CHAIN_HEADER)?;
    let mut issues = Vec::new();
    type Key = (String, NaiveDate, NaiveDate);
    let rows = parse_rows(&mut rdr, strict, &mut issues, |rec| {
        if rec.len() != CHAIN_HEADER.len() {
            return Err(format!("expected {} fields, found {}", CHAIN_HEADER.len(), rec.len()));
        }
        let quote_date = parse_date(field(rec, 0))?;
        let expiry = parse_date(field(rec, 1))?;
        let firm = field(rec, 2).to_string();
        if firm.is_empty() {
            return Err("empty firm_id".into());
        }
        let spot = parse_f64(field(rec, 3))?;
        let rate = parse_f64(field(rec, 4))?;
        let kind: OptionKind = field(rec, 6).parse().map_err(|e: crate::options_iv::IvError| e.to_string())?;
        let quote =
            OptionQuote::new(parse_f64(field(rec, 5))?, parse_f64(field(rec, 7))?, parse_f64(field(rec, 8))?, kind)
                .map_err(|e| e.to_string())?;
        Ok(((firm, quote_date, expiry), spot, rate, quote, line_of(rec)))
    })?;
    if rows.is_empty() && issues.is_empty() {
        return Err(IoError::EmptyInput("option chains"));
    }
    let mut groups: BTreeMap<Key, (f64, f64, u64, Vec<OptionQuote>)> = BTreeMap::new();
    for (key, spot, rate, quote, line) in rows {
        let g = groups.entry(key).or_insert((spot, rate, line, Vec::new()));
        if g.0 != spot || g.1 != rate {
            let message = format!("spot/rate differ from line {} of the same chain", g.2);
            if strict {
                return Err(IoError::Row { line, message });
            }
            issues.push(RowIssue { line, message });
            continue;
        }
        g.3.push(quote);
    }
    let mut chains = Vec::with_capacity(groups.len());
    for ((firm, qd, ed), (spot, rate, line, quotes)) in groups {
        match OptionChain::new(firm, qd, ed, spot, rate, quotes) {
            Ok(c) => chains.push(c),
            Err(e) if strict => return Err(IoError::Row { line, message: e.to_string() }),
            Err(e) => issues.push(RowIssue { line, message: e.to_string() }),
        }
    }
    Ok((chains, issues))
}

pub fn write_chains<W: Write>(w: W, chains: &[OptionChain]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CHAIN_HEADER)?;
    for c in chains {
        for q in c.quotes() {
            wtr.write_record([
                c.quote_date.to_string(),
                c.expiry_date.to_string(),
                c.underlying_id.clone(),
                c.spot.to_string(),
                c.risk_free_rate.to_string(),
                q.strike.to_string(),
                q.kind.to_string(),
                q.bid.to_string(),
                q.ask.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

const VIX_HEADER: [&str; 3] = ["firm_id", "date", "vix"];

pub fn read_firm_vix<R: Read>(r: R) -> Result<Vec<FirmVixPoint>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &VIX_HEADER)?;
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        Ok(FirmVixPoint {
            firm_id: field(rec, 0).to_string(),
            date: parse_date(field(rec, 1))?,
            vix: parse_f64(field(rec, 2))?,
        })
    })?;
    if rows.is_empty() {
        return Err(IoError::EmptyInput("firm index values"));
    }
    Ok(rows)
}

pub fn write_firm_vix<W: Write>(w: W, points: &[FirmVixPoint]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(VIX_HEADER)?;
    for p in points {
        wtr.write_record([p.firm_id.clone(), p.date.to_string(), p.vix.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

const CAPS_HEADER: [&str; 3] = ["firm_id", "date", "market_cap"];

pub fn read_caps<R: Read>(r: R) -> Result<Vec<CapObservation>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &CAPS_HEADER)?;
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        Ok(CapObservation {
            firm_id: field(rec, 0).to_string(),
            date: parse_date(field(rec, 1))?,
            market_cap: parse_f64(field(rec, 2))?,
        })
    })?;
    if rows.is_empty() {
        return Err(IoError::EmptyInput("market caps"));
    }
    Ok(rows)
}

pub fn write_caps<W: Write>(w: W, caps: &[CapObservation]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CAPS_HEADER)?;
    for c in caps {
        wtr.write_record([c.firm_id.clone(), c.date.to_string(), c.market_cap.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

const MEMBERSHIP_HEADER: [&str; 4] = ["firm_id", "industry_id", "start", "end"];

/// An empty `end` means the membership is still open.
pub fn read_membership<R: Read>(r: R) -> Result<Vec<MembershipInterval>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &MEMBERSHIP_HEADER)?;
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        let end = match field(rec, 3) {
            "" => NaiveDate::MAX,
            s => parse_date(s)?,
        };
        Ok(MembershipInterval {
            firm_id: field(rec, 0).to_string(),
            industry_id: field(rec, 1).to_string(),
            start: parse_date(field(rec, 2))?,
            end,
        })
    })?;
    if rows.is_empty() {
        return Err(IoError::EmptyInput("membership"));
    }
    Ok(rows)
}

pub fn write_membership<W: Write>(w: W, rows: &[MembershipInterval]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(MEMBERSHIP_HEADER)?;
    for m in rows {
        let end = if m.end == NaiveDate::MAX { String::new() } else { m.end.to_string() };
        wtr.write_record([m.firm_id.clone(), m.industry_id.clone(), m.start.to_string(), end])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_panel<R: Read>(r: R) -> Result<IndustryPanel> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(|h| h.to_ascii_lowercase()) != Some("date".into()) || headers.len() < 2 {
        return Err(IoError::Header {
            expected: "date,<industry>...".into(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let industries: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let n = industries.len();
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        if rec.len() != n + 1 {
            return Err(format!("expected {} fields, found {}", n + 1, rec.len()));
        }
        let date = parse_date(field(rec, 0))?;
        let vals = (1..=n).map(|j| parse_f64(field(rec, j))).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((date, vals))
    })?;
    if rows.is_empty() {
        return Err(IoError::EmptyInput("panel"));
    }
    let dates = rows.iter().map(|(d, _)| *d).collect();
    let values = DMatrix::from_fn(rows.len(), n, |t, j| rows[t].1[j]);
    IndustryPanel::new(dates, industries, values).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn write_panel<W: Write>(w: W, panel: &IndustryPanel) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(std::iter::once("date".to_string()).chain(panel.industries.iter().cloned()))?;
    for (t, d) in panel.dates.iter().enumerate() {
        let row =
            std::iter::once(d.to_string()).chain((0..panel.n_industries()).map(|j| panel.values[(t, j)].to_string()));
        wtr.write_record(row)?;
    }
    wtr.flush()?;
    Ok(())
}

const TOTAL_COLS: [&str; 6] = ["date", "C_median", "C_mean", "C_sd", "C_p2.5", "C_p97.5"];
const NODE_STATS: [&str; 4] = ["to", "from", "net", "agg"];

/// Total connectedness with its band, then per-node posterior medians.
pub fn write_connectedness<W: Write>(w: W, series: &ConnectednessSeries) -> Result<()> {
    let mut wtr = writer(w);
    let mut header: Vec<String> = TOTAL_COLS.iter().map(|s| s.to_string()).collect();
    for label in &series.labels {
        header.extend(NODE_STATS.iter().map(|s| format!("{label}_{s}")));
    }
    wtr.write_record(&header)?;
    for p in &series.points {
        let mut row = vec![
            p.date.to_string(),
            p.total.median.to_string(),
            p.total.mean.to_string(),
            p.total.sd.to_string(),
            p.total.p025.to_string(),
            p.total.p975.to_string(),
        ];
        for j in 0..series.labels.len() {
            for v in [&p.to, &p.from, &p.net, &p.agg] {
                row.push(v[j].median.to_string());
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Inverse of [`write_connectedness`]. Node statistics come back as point
/// summaries at their medians; draw counts are not stored.
pub fn read_connectedness<R: Read>(r: R, horizon: usize) -> Result<ConnectednessSeries> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    let bad_header = || IoError::Header { expected: TOTAL_COLS.join(",") + ",<node>_to,...", found: found.join(",") };
    if found.len() < TOTAL_COLS.len()
        || found[..TOTAL_COLS.len()] != TOTAL_COLS
        || !(found.len() - TOTAL_COLS.len()).is_multiple_of(4)
    {
        return Err(bad_header());
    }
    let mut labels = Vec::new();
    for chunk in found[TOTAL_COLS.len()..].chunks(4) {
        let label = chunk[0].strip_suffix("_to").ok_or_else(bad_header)?;
        for (c, s) in chunk.iter().zip(NODE_STATS) {
            if *c != format!("{label}_{s}") {
                return Err(bad_header());
            }
        }
        labels.push(label.to_string());
    }
    let n = labels.len();
    let points = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        if rec.len() != TOTAL_COLS.len() + 4 * n {
            return Err("wrong field count".into());
        }
        let v = |i: usize| parse_f64(field(rec, i));
        let total = StatSummary { median: v(1)?, mean: v(2)?, sd: v(3)?, p025: v(4)?, p975: v(5)? };
        let mut stats: [Vec<StatSummary>; 4] = Default::default();
        for j in 0..n {
            for (k, s) in stats.iter_mut().enumerate() {
                s.push(StatSummary::point(v(TOTAL_COLS.len() + 4 * j + k)?));
            }
        }
        let [to, from, net, agg] = stats;
        Ok(ConnectednessPoint {
            date: parse_date(field(rec, 0))?,
            total,
            to,
            from,
            net,
            agg,
            draws_used: 0,
            used_unstable: false,
        })
    })?;
    Ok(ConnectednessSeries { labels, horizon, points })
}

/// Stacked adjacency matrices: one row per (date, receiving node).
pub fn write_adjacency<W: Write>(w: W, snapshots: &[(NaiveDate, AdjacencyMatrix)]) -> Result<()> {
    let mut wtr = writer(w);
    let labels = snapshots.first().map(|(_, a)| a.labels.clone()).unwrap_or_default();
    wtr.write_record(["date", "horizon", "node"].iter().map(|s| s.to_string()).chain(labels.iter().cloned()))?;
    for (date, adj) in snapshots {
        if adj.labels != labels {
            return Err(IoError::Invalid("snapshots have different node labels".into()));
        }
        for (i, label) in labels.iter().enumerate() {
            let row = [date.to_string(), adj.horizon.to_string(), label.clone()]
                .into_iter()
                .chain((0..labels.len()).map(|j| adj.theta_tilde[(i, j)].to_string()));
            wtr.write_record(row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_adjacency<R: Read>(r: R) -> Result<Vec<(NaiveDate, AdjacencyMatrix)>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 4 || headers.iter().take(3).ne(["date", "horizon", "node"]) {
        return Err(IoError::Header {
            expected: "date,horizon,node,<node>...".into(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let labels: Vec<String> = headers.iter().skip(3).map(String::from).collect();
    let n = labels.len();
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        let date = parse_date(field(rec, 0))?;
        let h: usize = field(rec, 1).parse().map_err(|_| "invalid horizon".to_string())?;
        let vals = (0..n).map(|j| parse_f64(field(rec, 3 + j))).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((date, h, field(rec, 2).to_string(), vals))
    })?;
    if rows.len() % n != 0 {
        return Err(IoError::Invalid("incomplete adjacency matrix".into()));
    }
    rows.chunks(n)
        .map(|block| {
            let (date, h) = (block[0].0, block[0].1);
            for (i, (d, hh, node, _)) in block.iter().enumerate() {
                if *d != date || *hh != h || *node != labels[i] {
                    return Err(IoError::Invalid(format!("malformed adjacency block at {date}")));
                }
            }
            let theta_tilde = DMatrix::from_fn(n, n, |i, j| block[i].3[j]);
            Ok((date, AdjacencyMatrix { theta_tilde, horizon: h, labels: labels.clone() }))
        })
        .collect()
}

/// One row per draw: intercepts, lag coefficients, the lower triangle of Σ
/// (column-major), spectral radius and stability flag.
pub fn write_posterior<W: Write>(w: W, draws: &[PosteriorDraw]) -> Result<()> {
    let mut wtr = writer(w);
    let Some(first) = draws.first() else {
        return Err(IoError::Invalid("no draws to export".into()));
    };
    let n = first.n_vars();
    let p = first.lags.len();
    let mut header = vec!["draw_id".to_string()];
    header.extend((0..n).map(|i| format!("c_{i}")));
    for l in 1..=p {
        for i in 0..n {
            header.extend((0..n).map(|j| format!("phi{l}_{i}_{j}")));
        }
    }
    for j in 0..n {
        header.extend((j..n).map(|i| format!("sigma_{i}_{j}")));
    }
    header.push("spectral_radius".into());
    header.push("stable".into());
    wtr.write_record(&header)?;
    for (id, d) in draws.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(d.intercept.iter().map(f64::to_string));
        for phi in &d.lags {
            for i in 0..n {
                row.extend((0..n).map(|j| phi[(i, j)].to_string()));
            }
        }
        for j in 0..n {
            row.extend((j..n).map(|i| d.sigma[(i, j)].to_string()));
        }
        row.push(d.spectral_radius.to_string());
        row.push(d.stable.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_posterior<R: Read>(r: R) -> Result<Vec<PosteriorDraw>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let n = headers.iter().filter(|h| h.starts_with("c_")).count();
    let n_phi = headers.iter().filter(|h| h.starts_with("phi")).count();
    if n == 0 || n_phi % (n * n) != 0 || headers.len() != 1 + n + n_phi + n * (n + 1) / 2 + 2 {
        return Err(IoError::Header {
            expected: "draw_id,c_*,phi*,sigma_*,spectral_radius,stable".into(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let p = n_phi / (n * n);
    parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        let mut it = rec.iter().skip(1);
        let mut next = || parse_f64(it.next().unwrap_or(""));
        let intercept = DVector::from_vec((0..n).map(|_| next()).collect::<std::result::Result<Vec<_>, _>>()?);
        let mut lags = Vec::with_capacity(p);
        for _ in 0..p {
            let vals = (0..n * n).map(|_| next()).collect::<std::result::Result<Vec<_>, _>>()?;
            lags.push(DMatrix::from_row_slice(n, n, &vals));
        }
        let mut sigma = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = next()?;
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        let spectral_radius = next()?;
        let stable = field(rec, rec.len() - 1).parse::<bool>().map_err(|_| "invalid stable flag".to_string())?;
        Ok(PosteriorDraw { intercept, lags, sigma, spectral_radius, stable })
    })
}

const CALENDAR_HEADER: [&str; 3] = ["start", "end", "phase"];

pub fn read_calendar<R: Read>(r: R) -> Result<PhaseCalendar> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &CALENDAR_HEADER)?;
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        let end = match field(rec, 1) {
            "" => None,
            s => Some(parse_date(s)?),
        };
        let phase: Phase = field(rec, 2).parse().map_err(|e: crate::cycles::CyclesError| e.to_string())?;
        Ok(PhaseInterval { start: parse_date(field(rec, 0))?, end, phase })
    })?;
    PhaseCalendar::new(rows).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn write_calendar<W: Write>(w: W, calendar: &PhaseCalendar) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CALENDAR_HEADER)?;
    for i in calendar.intervals() {
        wtr.write_record([i.start.to_string(), i.end.map(|d| d.to_string()).unwrap_or_default(), i.phase.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Wide layout: one row per industry, `net`, `agg`, `agg_pct` per period,
/// followed by a `days` row holding each period's observation count in
/// its `net` column.
pub fn write_phase_table<W: Write>(w: W, table: &PhaseTable) -> Result<()> {
    let mut wtr = writer(w);
    let mut header = vec!["industry".to_string()];
    for b in &table.blocks {
        for s in ["net", "agg", "agg_pct"] {
            header.push(format!("{}_{s}", b.period.as_str()));
        }
    }
    wtr.write_record(&header)?;
    for (j, ind) in table.industries.iter().enumerate() {
        let mut row = vec![ind.clone()];
        for b in &table.blocks {
            let n = &b.nodes[j];
            row.extend([n.net.to_string(), n.agg.to_string(), n.agg_share.to_string()]);
        }
        wtr.write_record(&row)?;
    }
    let mut days = vec!["days".to_string()];
    for b in &table.blocks {
        days.extend([b.days.to_string(), String::new(), String::new()]);
    }
    wtr.write_record(&days)?;
    wtr.flush()?;
    Ok(())
}

pub fn read_phase_table<R: Read>(r: R) -> Result<PhaseTable> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let bad = || IoError::Header {
        expected: "industry,<period>_net,<period>_agg,<period>_agg_pct,...".into(),
        found: cols.join(","),
    };
    if cols.first() != Some(&"industry") || !(cols.len() - 1).is_multiple_of(3) {
        return Err(bad());
    }
    let mut periods = Vec::new();
    for chunk in cols[1..].chunks(3) {
        let name = chunk[0].strip_suffix("_net").ok_or_else(bad)?;
        if chunk[1] != format!("{name}_agg") || chunk[2] != format!("{name}_agg_pct") {
            return Err(bad());
        }
        periods.push(match name {
            "total" => TablePeriod::Total,
            other => TablePeriod::Phase(other.parse().map_err(|_| bad())?),
        });
    }
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let (last, body) = records.split_last().ok_or(IoError::EmptyInput("phase table"))?;
    if field(last, 0) != "days" {
        return Err(row_err(last, "missing days row".into()));
    }
    let mut blocks: Vec<PhaseBlock> = periods
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let days = field(last, 1 + 3 * k).parse().map_err(|_| row_err(last, "invalid day count".into()))?;
            Ok(PhaseBlock { period: *p, days, nodes: Vec::new() })
        })
        .collect::<Result<_>>()?;
    let mut industries = Vec::new();
    for rec in body {
        industries.push(field(rec, 0).to_string());
        for (k, b) in blocks.iter_mut().enumerate() {
            let v = |i: usize| parse_f64(field(rec, 1 + 3 * k + i)).map_err(|m| row_err(rec, m));
            b.nodes.push(NodeAverages { net: v(0)?, agg: v(1)?, agg_share: v(2)? });
        }
    }
    Ok(PhaseTable { industries, blocks })
}

pub fn write_classification<W: Write>(w: W, c: &HubClassification) -> Result<()> {
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, c)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_classification<R: Read>(r: R) -> Result<HubClassification> {
    Ok(serde_json::from_reader(r)?)
}

const MACRO_HEADER: [&str; 3] = ["id", "period", "value"];

/// Series keyed by id. Frequency is taken from the period format; rows may
/// come in any order but each (id, period) at most once.
pub fn read_macro<R: Read>(r: R) -> Result<BTreeMap<String, MacroSeries>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &MACRO_HEADER)?;
    let rows = parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        let period: Period = field(rec, 1).parse().map_err(|e: crate::forecast::ForecastError| e.to_string())?;
        Ok((field(rec, 0).to_string(), period, parse_f64(field(rec, 2))?, line_of(rec)))
    })?;
    if rows.is_empty() {
        return Err(IoError::EmptyInput("macro series"));
    }
    let mut grouped: BTreeMap<String, BTreeMap<Period, f64>> = BTreeMap::new();
    for (id, period, value, line) in rows {
        if grouped.entry(id.clone()).or_default().insert(period, value).is_some() {
            return Err(IoError::Row { line, message: format!("duplicate period {period} for {id}") });
        }
    }
    grouped
        .into_iter()
        .map(|(id, obs)| {
            let frequency = obs.keys().next().map(|p| p.frequency).unwrap_or(Frequency::Monthly);
            let series = MacroSeries::new(id.clone(), frequency, obs.into_iter().collect())
                .map_err(|e| IoError::Invalid(e.to_string()))?;
            Ok((id, series))
        })
        .collect()
}

pub fn write_macro<'a, W: Write>(w: W, series: impl IntoIterator<Item = &'a MacroSeries>) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(MACRO_HEADER)?;
    for s in series {
        for (p, v) in &s.observations {
            wtr.write_record([s.id.clone(), p.to_string(), v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One regression table row: a coefficient at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRow {
    pub target: String,
    pub horizon: usize,
    pub regressor: String,
    pub estimate: f64,
    pub se: f64,
    pub stars: String,
    pub adj_r2: f64,
    pub n_obs: usize,
}

const REGRESSION_HEADER: [&str; 8] =
    ["target", "horizon", "regressor", "coefficient", "se", "stars", "adj_r2", "n_obs"];

pub fn regression_rows(results: &[RegressionResult]) -> Vec<RegressionRow> {
    results
        .iter()
        .flat_map(|r| {
            r.coefficients.iter().map(move |c| RegressionRow {
                target: r.target.clone(),
                horizon: r.horizon,
                regressor: c.name.clone(),
                estimate: c.estimate,
                se: c.se,
                stars: c.stars().to_string(),
                adj_r2: r.adj_r2,
                n_obs: r.n_obs,
            })
        })
        .collect()
}

pub fn write_regression_rows<W: Write>(w: W, rows: &[RegressionRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(REGRESSION_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.target.clone(),
            r.horizon.to_string(),
            r.regressor.clone(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.stars.clone(),
            r.adj_r2.to_string(),
            r.n_obs.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_regression_rows<R: Read>(r: R) -> Result<Vec<RegressionRow>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &REGRESSION_HEADER)?;
    parse_rows(&mut rdr, true, &mut Vec::new(), |rec| {
        let int = |i: usize| field(rec, i).parse::<usize>().map_err(|_| format!("invalid integer {:?}", field(rec, i)));
        Ok(RegressionRow {
            target: field(rec, 0).to_string(),
            horizon: int(1)?,
            regressor: field(rec, 2).to_string(),
            estimate: parse_f64(field(rec, 3))?,
            se: parse_f64(field(rec, 4))?,
            stars: field(rec, 5).to_string(),
            adj_r2: parse_f64(field(rec, 6))?,
            n_obs: int(7)?,
        })
    })
}

pub fn write_regressions_json<W: Write>(w: W, results: &[RegressionResult]) -> Result<()> {
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, results)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_regressions_json<R: Read>(r: R) -> Result<Vec<RegressionResult>> {
    Ok(serde_json::from_reader(r)?)
}
