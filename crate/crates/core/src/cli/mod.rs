//! Command line front end: CSV ingestion, orchestration, rendering.

pub mod args;
pub mod ingest;
pub mod render;

use std::io::Write;
use std::path::Path;

use crate::cox::{fit, FitOptions};
use crate::error::{Error, Result};
use crate::numeric::ks_test;
use crate::power::{mc_power, PowerOptions};
use crate::score_test::{test_with_fit, TestOptions};
use crate::simulate::{replicate_tests, simulate, AltModelSpec};

use args::{Cli, Command, Common, PowerArgs, SimulateArgs, TestArgs};
use ingest::{read_sample_from_path, ColumnSpec};
use render::{BatchSummary, Row, TestSummary};

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Test(a) => cmd_test(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Power(a) => cmd_power(&a),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read_spec(path: &Path) -> Result<AltModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read {}: {e}", path.display()),
        ))
    })?;
    AltModelSpec::from_toml(&text)
}

/// The covariate sets to test, as index lists with labels.
fn resolve_sets(names: &[String], requested: &[String]) -> Result<Vec<(String, Vec<usize>)>> {
    if requested.is_empty() {
        let mut sets: Vec<_> = names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), vec![j]))
            .collect();
        if names.len() > 1 {
            sets.push(("global".to_string(), (0..names.len()).collect()));
        }
        return Ok(sets);
    }
    requested
        .iter()
        .map(|set| {
            let idx = set
                .split(',')
                .map(|name| {
                    names.iter().position(|n| n == name.trim()).ok_or_else(|| {
                        Error::Data(format!(
                            "tested covariate `{name}` is not in the model ({})",
                            names.join(", ")
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((set.clone(), idx))
        })
        .collect()
}

fn cmd_test(a: &TestArgs) -> Result<i32> {
    check_alpha(a.common.alpha)?;
    let columns = ColumnSpec {
        time: a.time_col.clone(),
        status: a.status_col.clone(),
        covariates: a.covariates.clone(),
    };
    let sample = read_sample_from_path(&a.input, &columns, a.missing.into())?;
    let sets = resolve_sets(sample.names(), &a.test_sets)?;
    let options = TestOptions {
        fhat_side: a.common.fhat_side.into(),
        fit: FitOptions::default(),
    };
    let cox = fit(&sample, &options.fit)?;
    let rows: Vec<Row> = sets
        .into_iter()
        .map(|(label, idx)| Row {
            label,
            outcome: test_with_fit(&sample, &cox, &idx, a.common.alpha, options.fhat_side),
        })
        .collect();
    let summary = TestSummary {
        n: sample.len(),
        dropped: sample.dropped_count(),
        events: sample.event_count(),
        iterations: cox.iterations,
        loglik: cox.loglik,
    };
    emit(
        &a.common,
        &render::test_report(a.common.format, &summary, &rows),
    )?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    Ok(if failed > 0 { 3 } else { 0 })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    check_alpha(a.common.alpha)?;
    if a.n < 2 {
        return Err(Error::Usage(format!("--n must be at least 2, got {}", a.n)));
    }
    let spec = read_spec(&a.spec)?;
    let Some(replicates) = a.replicates else {
        let sample = simulate(a.n, &spec, a.seed)?;
        emit(&a.common, &render::sample_csv(&sample))?;
        return Ok(0);
    };
    if spec.tested.is_empty() {
        return Err(Error::Usage(
            "batch mode needs `tested` indices in the spec".into(),
        ));
    }
    let options = TestOptions {
        fhat_side: a.common.fhat_side.into(),
        fit: FitOptions::default(),
    };
    let batch = replicate_tests(
        &spec,
        a.n,
        replicates,
        &spec.tested,
        a.common.alpha,
        a.seed,
        &options,
    )?;
    let k = batch.statistics.len() as f64;
    let mean = batch.statistics.iter().sum::<f64>() / k;
    let var = batch
        .statistics
        .iter()
        .map(|t| (t - mean).powi(2))
        .sum::<f64>()
        / (k - 1.0).max(1.0);
    let ks = ks_test(&batch.p_values, |p| p.clamp(0.0, 1.0));
    let summary = BatchSummary {
        set: spec
            .tested
            .iter()
            .map(|j| format!("z{}", j + 1))
            .collect::<Vec<_>>()
            .join("+"),
        n: a.n,
        replicates,
        failed: batch.failed,
        alpha: a.common.alpha,
        rejection_rate: batch.rejection_rate(),
        mean_statistic: mean,
        sd_statistic: var.sqrt(),
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
    };
    emit(&a.common, &render::batch_report(a.common.format, &summary)?)?;
    Ok(0)
}

fn cmd_power(a: &PowerArgs) -> Result<i32> {
    check_alpha(a.common.alpha)?;
    if a.n < 2 {
        return Err(Error::Usage(format!("--n must be at least 2, got {}", a.n)));
    }
    let spec = read_spec(&a.spec)?;
    let opts = PowerOptions {
        n: a.n,
        replicates: a.replicates,
        alpha: a.common.alpha,
        n_plugin: a.n_plugin,
        scaling: a.mu_scaling.into(),
        seed: a.seed,
    };
    let test = TestOptions {
        fhat_side: a.common.fhat_side.into(),
        fit: FitOptions::default(),
    };
    let result = mc_power(&spec, &opts, &test)?;
    emit(&a.common, &render::power_report(a.common.format, &result)?)?;
    Ok(0)
}
