//! report.json, trajectories.csv and the optional SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::experiments::Outcome;

pub const REPORT: &str = "report.json";
pub const TRAJECTORIES: &str = "trajectories.csv";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    pub config: ExperimentConfig,
    pub resolved: Value,
    pub aggregates: Value,
    pub csv_columns: Vec<&'static str>,
    /// SHA-256 of this report serialised without the hash and the timestamp.
    pub determinism_hash: String,
    pub timestamp_unix: u64,
}

#[derive(Serialize)]
struct Hashed<'a> {
    tool: &'a str,
    version: &'a str,
    kind: &'a str,
    config: &'a ExperimentConfig,
    resolved: &'a Value,
    aggregates: &'a Value,
    csv_columns: &'a [&'static str],
}

pub fn build_report(cfg: &ExperimentConfig, outcome: &Outcome, timestamp_unix: u64) -> Result<Report, CliError> {
    let hashed = Hashed {
        tool: "unirec",
        version: env!("CARGO_PKG_VERSION"),
        kind: cfg.kind.name(),
        config: cfg,
        resolved: &outcome.resolved,
        aggregates: &outcome.aggregates,
        csv_columns: &outcome.columns,
    };
    let digest = Sha256::digest(serde_json::to_vec(&hashed)?);
    let determinism_hash = digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    Ok(Report {
        tool: "unirec",
        version: env!("CARGO_PKG_VERSION"),
        kind: cfg.kind.name(),
        config: cfg.clone(),
        resolved: outcome.resolved.clone(),
        aggregates: outcome.aggregates.clone(),
        csv_columns: outcome.columns.clone(),
        determinism_hash,
        timestamp_unix,
    })
}

pub fn write_all(dir: &Path, report: &Report, outcome: &Outcome, plots: bool) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join(REPORT), json)?;
    let mut w = csv::Writer::from_path(dir.join(TRAJECTORIES))?;
    w.write_record(&outcome.columns)?;
    for row in &outcome.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    if plots {
        write_plots(dir, report.config.kind)?;
    }
    Ok(())
}

/// Plots read back the CSV so they never carry information it lacks.
fn write_plots(dir: &Path, kind: ExperimentKind) -> Result<(), CliError> {
    let mut rdr = csv::Reader::from_path(dir.join(TRAJECTORIES))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    let get = |r: &csv::StringRecord, i: usize| r.get(i).and_then(|s| s.parse::<f64>().ok());
    let plot_dir = dir.join("plots");
    let (name, svg) = match kind {
        ExperimentKind::Estimate => {
            let (tr, t, e, env) = (col("trial").unwrap(), col("t").unwrap(), col("error_norm").unwrap(), col("envelope").unwrap());
            let first: Vec<&csv::StringRecord> = records.iter().filter(|r| r.get(tr) == Some("0")).collect();
            let err: Vec<(f64, f64)> = first.iter().filter_map(|r| Some((get(r, t)?, get(r, e)?))).collect();
            let bound: Vec<(f64, f64)> = first.iter().filter_map(|r| Some((get(r, t)?, get(r, env)?))).collect();
            ("error_vs_envelope.svg", line_chart("estimation error vs envelope (trial 0)", "t", "norm", &[("error", err), ("envelope", bound)], false, true))
        }
        ExperimentKind::MirrorDescent => {
            let (tr, t, w) = (col("trial").unwrap(), col("t").unwrap(), col("witness").unwrap());
            let pts: Vec<(f64, f64)> = records.iter().filter(|r| r.get(tr) == Some("0")).filter_map(|r| Some((get(r, t)? + 1.0, get(r, w)?))).collect();
            ("witness_vs_t.svg", line_chart("stationarity witness (trial 0)", "t", "witness", &[("witness", pts)], true, true))
        }
        ExperimentKind::Sweep => {
            let (h, m) = (col("horizon").unwrap(), col("metric").unwrap());
            let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
            for r in &records {
                if let (Some(t), Some(v)) = (r.get(h).and_then(|s| s.parse::<u64>().ok()), get(r, m)) {
                    let e = acc.entry(t).or_insert((0.0, 0));
                    e.0 += v;
                    e.1 += 1;
                }
            }
            let pts: Vec<(f64, f64)> = acc.iter().map(|(t, (s, n))| (*t as f64, s / *n as f64)).collect();
            ("metric_vs_horizon.svg", line_chart("mean metric vs T", "T", "metric", &[("mean", pts)], true, true))
        }
        ExperimentKind::Freedman => {
            let v = col("violation").unwrap();
            let n = records.len().max(1) as f64;
            let rate = records.iter().filter(|r| r.get(v) == Some("1")).count() as f64 / n;
            ("violation_rate.svg", bar_chart("violation rate", &[("empirical", rate)]))
        }
        ExperimentKind::Sgm => {
            let (g, h) = (col("f_gap").unwrap(), col("h_value").unwrap());
            let gaps: Vec<f64> = records.iter().filter_map(|r| get(r, g)).collect();
            let hs: Vec<f64> = records.iter().filter_map(|r| get(r, h)).collect();
            let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            ("sgm_outcomes.svg", bar_chart("mean f-gap and h", &[("f_gap", avg(&gaps)), ("h_value", avg(&hs))]))
        }
    };
    std::fs::create_dir_all(&plot_dir)?;
    std::fs::write(plot_dir.join(name), svg)?;
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)], log_x: bool, log_y: bool) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter())
        .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
        .map(|&(x, y)| (tx(x), ty(y)))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold((f64::MAX, f64::MIN, f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1)));
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(title);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}{}</text>"#, W / 2.0, H - 12.0, if log_x { " (log10)" } else { "" });
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{ylabel}{}</text>"#, H / 2.0, H / 2.0, if log_y { " (log10)" } else { "" });
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="10">{x0:.3}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.3}</text>"#, H - PAD + 14.0, W - PAD, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.3}</text><text x="{}" y="{PAD}" font-size="10" text-anchor="end">{y1:.3}</text>"#, PAD - 4.0, H - PAD, PAD - 4.0);
    for (k, (name, data)) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let path: Vec<String> = data
            .iter()
            .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(tx(x)), sy(ty(y))))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{colour}" font-size="12">{name}</text>"#, W - PAD - 90.0, PAD + 16.0 * k as f64);
    }
    s.push_str("</svg>\n");
    s
}

fn bar_chart(title: &str, bars: &[(&str, f64)]) -> String {
    let top = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-12);
    let width = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    let mut s = header(title);
    for (k, (name, v)) in bars.iter().enumerate() {
        let h = v / top * (H - 2.0 * PAD);
        let x = PAD + k as f64 * width + 0.15 * width;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/><text x="{:.2}" y="{}" text-anchor="middle" font-size="12">{name} = {v:.4e}</text>"#,
            H - PAD - h,
            0.7 * width,
            COLOURS[k % COLOURS.len()],
            x + 0.35 * width,
            H - PAD + 16.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn header(title: &str) -> String {
    let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif">"#);
    s.push('\n');
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##, W - 2.0 * PAD, H - 2.0 * PAD);
    s
}
