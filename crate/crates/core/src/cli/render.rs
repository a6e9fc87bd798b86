//! Report rendering. Text rounds to 3 decimals; csv and jsonl carry the
//! shortest representation that round-trips the `f64`.

use std::fmt::Write as _;

use serde_json::json;

use super::args::Format;
use crate::error::{Error, Result};
use crate::power::PowerResult;
use crate::score_test::PhTestReport;

/// One line of a test report.
pub struct Row {
    pub label: String,
    pub outcome: Result<PhTestReport>,
}

pub struct TestSummary {
    pub n: usize,
    pub dropped: usize,
    pub events: usize,
    pub iterations: usize,
    pub loglik: f64,
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        format!("{p:.1e}")
    } else {
        format!("{p:.3}")
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

pub fn test_report(format: Format, summary: &TestSummary, rows: &[Row]) -> String {
    match format {
        Format::Text => test_text(summary, rows),
        Format::Csv => test_csv(rows),
        Format::Jsonl => test_jsonl(rows),
    }
}

fn test_text(s: &TestSummary, rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "n = {} ({} dropped), {} events, Cox fit in {} iterations, log partial likelihood {:.3}",
        s.n, s.dropped, s.events, s.iterations, s.loglik
    );
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(
        out,
        "{:<width$}  {:>10}  {:>3}  {:>8}  reject",
        "covariate", "statistic", "df", "p-value"
    );
    for row in rows {
        match &row.outcome {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>10.3}  {:>3}  {:>8}  {}",
                    row.label,
                    r.statistic,
                    r.df,
                    p_text(r.p_value),
                    if r.reject { "yes" } else { "no" }
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{:<width$}  error: {e}", row.label);
            }
        }
    }
    out
}

fn test_csv(rows: &[Row]) -> String {
    let mut out = csv_line(
        &[
            "set",
            "statistic",
            "df",
            "p_value",
            "reject",
            "alpha",
            "n",
            "error",
        ]
        .map(String::from),
    );
    for row in rows {
        let fields = match &row.outcome {
            Ok(r) => vec![
                row.label.clone(),
                r.statistic.to_string(),
                r.df.to_string(),
                r.p_value.to_string(),
                r.reject.to_string(),
                r.alpha.to_string(),
                r.n.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut v = vec![row.label.clone()];
                v.extend(std::iter::repeat_n(String::new(), 6));
                v.push(e.to_string());
                v
            }
        };
        out.push_str(&csv_line(&fields));
    }
    out
}

fn test_jsonl(rows: &[Row]) -> String {
    let mut out = String::new();
    for row in rows {
        let value = match &row.outcome {
            Ok(r) => {
                let mut v = serde_json::to_value(r).expect("report serializes");
                v["set"] = json!(row.label);
                v
            }
            Err(e) => json!({ "set": row.label, "error": e.to_string() }),
        };
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}

/// Summary of the test over simulated replicates.
#[derive(Debug, serde::Serialize)]
pub struct BatchSummary {
    pub set: String,
    pub n: usize,
    pub replicates: usize,
    pub failed: usize,
    pub alpha: f64,
    pub rejection_rate: f64,
    pub mean_statistic: f64,
    pub sd_statistic: f64,
    /// Kolmogorov–Smirnov test of the p-values against U(0,1).
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

pub fn batch_report(format: Format, b: &BatchSummary) -> Result<String> {
    Ok(match format {
        Format::Text => format!(
            "set {} over {} replicates of n = {} ({} failed)\n\
             rejection rate at alpha = {}: {:.3}\n\
             statistic mean {:.3}, sd {:.3}\n\
             KS test of p-values against U(0,1): D = {:.3}, p = {}\n",
            b.set,
            b.replicates,
            b.n,
            b.failed,
            b.alpha,
            b.rejection_rate,
            b.mean_statistic,
            b.sd_statistic,
            b.ks_statistic,
            p_text(b.ks_p_value)
        ),
        Format::Csv => to_csv(b)?,
        Format::Jsonl => to_jsonl(b)?,
    })
}

pub fn power_report(format: Format, r: &PowerResult) -> Result<String> {
    Ok(match format {
        Format::Text => {
            let scaling = |s| {
                serde_json::to_value(s)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default()
            };
            format!(
                "local alternative c = {}, n = {}, alpha = {}\n\
                 d = {:.3}, D = {:.3} (se {:.3})\n\
                 mu ({}) = {:.3}, analytic power {:.3}\n\
                 mu (other scaling) = {:.3}, analytic power {:.3}\n\
                 Monte Carlo power {:.3} +/- {:.3} over {} replicates ({} failed)\n",
                r.c,
                r.n,
                r.alpha,
                r.d,
                r.big_d,
                r.big_d_se,
                scaling(r.scaling),
                r.mu,
                r.analytic_power,
                r.alt_mu,
                r.alt_analytic_power,
                r.mc_power,
                r.ci_half_width,
                r.replicates,
                r.failed
            )
        }
        Format::Csv => to_csv(r)?,
        Format::Jsonl => to_jsonl(r)?,
    })
}

fn to_csv<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(value)
        .map_err(|e| Error::Data(format!("csv serialization: {e}")))?;
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

fn to_jsonl<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Sample as `time,status,z1..zm`.
pub fn sample_csv(sample: &crate::sample::SurvivalSample) -> String {
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend(sample.names().iter().cloned());
    let mut out = csv_line(&header);
    for i in 0..sample.len() {
        let mut fields = vec![
            sample.times()[i].to_string(),
            u8::from(sample.events()[i]).to_string(),
        ];
        fields.extend(sample.covariate(i).iter().map(f64::to_string));
        out.push_str(&csv_line(&fields));
    }
    out
}
