//! Plot-ready CSV and JSON writers. Works are in units of k_BT ln 2, information in bits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use szilard::engine::WorkBreakdown;
use szilard::units::E1;

use crate::config::{Format, RunConfig};

const LN2: f64 = std::f64::consts::LN_2;

/// One output row.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub label: String,
    /// k_BT/E1.
    pub t: f64,
    /// g/g0.
    pub g: f64,
    pub ins: Option<f64>,
    /// W/W1.
    pub ratio: Option<f64>,
    pub w_steps: Option<f64>,
    pub w_insert: Option<f64>,
    pub w_measure: Option<f64>,
    pub w_expand: Option<f64>,
    pub w_remove: Option<f64>,
    pub info_bits: Option<f64>,
    pub p: Vec<f64>,
    pub rem: Vec<f64>,
    pub residual: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

impl Record {
    pub fn from_breakdown(label: &str, temperature: f64, g: f64, w: &WorkBreakdown) -> Self {
        Record {
            label: label.to_string(),
            t: temperature / E1,
            g,
            ins: Some(w.plan.insertion),
            ratio: Some(w.ratio),
            w_steps: Some(w.w_step_sum / LN2),
            w_insert: Some(w.w_insert / LN2),
            w_measure: Some(w.w_measure / LN2),
            w_expand: Some(w.w_expand / LN2),
            w_remove: Some(w.w_remove / LN2),
            info_bits: Some(w.info / LN2),
            p: w.probabilities.clone(),
            rem: w.plan.removals.clone(),
            residual: Some(w.residual),
            converged: w.converged,
            error: None,
        }
    }

    pub fn failed(label: &str, temperature: f64, g: f64, ins: Option<f64>, error: String) -> Self {
        Record {
            label: label.to_string(),
            t: temperature / E1,
            g,
            ins,
            ratio: None,
            w_steps: None,
            w_insert: None,
            w_measure: None,
            w_expand: None,
            w_remove: None,
            info_bits: None,
            p: Vec::new(),
            rem: Vec::new(),
            residual: None,
            converged: false,
            error: Some(error),
        }
    }
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    version: &'a str,
    command: &'a str,
    config: BTreeMap<&'static str, String>,
    summary: &'a BTreeMap<String, String>,
    records: &'a [Record],
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv<W: Write>(
    out: W,
    command: &str,
    cfg: &RunConfig,
    summary: &BTreeMap<String, String>,
    records: &[Record],
) -> Result<()> {
    let mut out = out;
    writeln!(out, "# szilard {} {}", env!("CARGO_PKG_VERSION"), command)?;
    let echo: Vec<String> = cfg
        .echo()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    writeln!(out, "# {}", echo.join(" "))?;
    for (k, v) in summary {
        writeln!(out, "# {k}={v}")?;
    }
    let n = cfg.n;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "label",
        "t",
        "g",
        "ins",
        "ratio",
        "w_steps",
        "w_insert",
        "w_measure",
        "w_expand",
        "w_remove",
        "info_bits",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..=n).map(|i| format!("p_{i}")));
    header.extend((0..=n).map(|i| format!("rem_{i}")));
    header.extend(
        ["residual", "converged", "error"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.label.clone(),
            r.t.to_string(),
            r.g.to_string(),
            opt(r.ins),
            opt(r.ratio),
            opt(r.w_steps),
            opt(r.w_insert),
            opt(r.w_measure),
            opt(r.w_expand),
            opt(r.w_remove),
            opt(r.info_bits),
        ];
        row.extend((0..=n).map(|i| opt(r.p.get(i).copied())));
        row.extend((0..=n).map(|i| opt(r.rem.get(i).copied())));
        row.push(opt(r.residual));
        row.push(r.converged.to_string());
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<W: Write>(
    mut out: W,
    command: &str,
    cfg: &RunConfig,
    summary: &BTreeMap<String, String>,
    records: &[Record],
) -> Result<()> {
    let doc = JsonDoc {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg.echo().into_iter().collect(),
        summary,
        records,
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

/// Writes `records` to `--out` or standard output in the configured format.
pub fn emit(
    command: &str,
    cfg: &RunConfig,
    summary: &BTreeMap<String, String>,
    records: &[Record],
) -> Result<()> {
    let sink: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let sink = io::BufWriter::new(sink);
    match cfg.format {
        Format::Csv => write_csv(sink, command, cfg, summary, records),
        Format::Json => write_json(sink, command, cfg, summary, records),
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}
