//! Power against local alternatives `γ = c/√n`.
//!
//! Under the null at `β₀` the noncentrality is
//! `d = c[∫F² v_jj s⁰ dΛ − ∫F v_jᵀ s⁰ dΛ Σ⁻¹ ∫F v_j s⁰ dΛ]`. The limit
//! functions are replaced by their empirical versions on one large simulated
//! null sample: `s⁰ dΛ` becomes `dN/n`, so every integral is an event sum.
//! The bracket is then the limit `D_j` of the variance estimator, i.e.
//! `d = c·D_j`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{
    rcond_spd, std_normal_cdf, std_normal_quantile, Cholesky, Matrix, RCOND_THRESHOLD,
};
use crate::sample::SurvivalSample;
use crate::score_test::TestOptions;
use crate::simulate::{replicate_tests, simulate, AltModelSpec, Alternative};

/// How the noncentrality enters the power function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MuScaling {
    /// `μ = d/D_j`
    #[default]
    Printed,
    /// `μ = d/√D_j`, the mean of the standardized statistic.
    Standardized,
}

impl std::str::FromStr for MuScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(MuScaling::Printed),
            "standardized" => Ok(MuScaling::Standardized),
            other => Err(Error::Usage(format!(
                "unknown mu scaling `{other}` (expected printed or standardized)"
            ))),
        }
    }
}

impl MuScaling {
    pub fn mu(self, d: f64, big_d: f64) -> f64 {
        match self {
            MuScaling::Printed => d / big_d,
            MuScaling::Standardized => d / big_d.sqrt(),
        }
    }
}

/// Plug-in estimate of `d` and `D_j`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Noncentrality {
    pub c: f64,
    pub d: f64,
    pub big_d: f64,
    /// Standard error of `D_j` from batch means over the plug-in sample.
    pub big_d_se: f64,
    pub n_plugin: usize,
}

impl Noncentrality {
    pub fn mu(&self, scaling: MuScaling) -> f64 {
        scaling.mu(self.d, self.big_d)
    }
}

const BATCHES: usize = 10;

/// `D_j` at the true `β₀` on one sample, with `F = 1 − e^{−Λ̂}` taken
/// after the jump.
pub fn plugin_variance(sample: &SurvivalSample, beta0: &[f64], j: usize) -> Result<f64> {
    let m = sample.dim();
    let path = sample.risk_path(beta0);
    let inv_n = 1.0 / sample.len() as f64;
    let mut a = 0.0;
    let mut b = vec![0.0; m];
    let mut sigma = Matrix::zeros(m, m);
    let mut cum = 0.0;
    for ev in &path {
        let d = ev.deaths as f64;
        cum += d * (-ev.log_s0).exp();
        let f = -(-cum).exp_m1();
        a += d * f * f * ev.v[(j, j)];
        for (r, br) in b.iter_mut().enumerate() {
            *br += d * f * ev.v[(r, j)];
        }
        sigma.add_scaled(&ev.v, d);
    }
    let sigma = sigma.scaled(inv_n);
    let chol = Cholesky::factor(&sigma).ok_or(Error::Singular {
        what: "plug-in Sigma",
        rcond: 0.0,
        threshold: RCOND_THRESHOLD,
    })?;
    let rcond = rcond_spd(&sigma, &chol);
    if rcond < RCOND_THRESHOLD {
        return Err(Error::Singular {
            what: "plug-in Sigma",
            rcond,
            threshold: RCOND_THRESHOLD,
        });
    }
    let b: Vec<f64> = b.iter().map(|x| x * inv_n).collect();
    let x = chol.solve_vec(&b);
    let corr: f64 = b.iter().zip(&x).map(|(u, v)| u * v).sum();
    Ok(a * inv_n - corr)
}

fn single_local(spec: &AltModelSpec) -> Result<(usize, f64)> {
    match (&spec.alternative, spec.tested.as_slice()) {
        (Alternative::Local { c }, &[j]) => Ok((j, c[0])),
        _ => Err(Error::Usage(
            "power analysis needs one tested index and a local alternative `c`".into(),
        )),
    }
}

/// Estimates `d` and `D_j` from a null sample of size `n_plugin`.
pub fn noncentrality(spec: &AltModelSpec, n_plugin: usize, seed: u64) -> Result<Noncentrality> {
    spec.validate()?;
    let (j, c) = single_local(spec)?;
    if n_plugin < 20 * BATCHES {
        return Err(Error::Usage(format!(
            "n_plugin must be at least {}",
            20 * BATCHES
        )));
    }
    let sample = simulate(n_plugin, &spec.null(), seed)?;
    let big_d = plugin_variance(&sample, &spec.beta, j)?;

    let block = n_plugin / BATCHES;
    let mut parts = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let idx: Vec<usize> = (b * block..(b + 1) * block).collect();
        let sub = sample.subset(&idx)?;
        parts.push(plugin_variance(&sub, &spec.beta, j)?);
    }
    let mean = parts.iter().sum::<f64>() / BATCHES as f64;
    let var = parts.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(Noncentrality {
        c,
        d: c * big_d,
        big_d,
        big_d_se: (var / BATCHES as f64).sqrt(),
        n_plugin,
    })
}

/// `2 − Φ(z_{α/2} − μ) − Φ(z_{α/2} + μ)`
pub fn analytic_power(mu: f64, alpha: f64) -> f64 {
    let z = std_normal_quantile(1.0 - alpha / 2.0);
    std_normal_cdf(mu - z) + std_normal_cdf(-mu - z)
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerResult {
    pub n: usize,
    pub c: f64,
    pub alpha: f64,
    pub d: f64,
    pub big_d: f64,
    pub big_d_se: f64,
    pub scaling: MuScaling,
    pub mu: f64,
    pub analytic_power: f64,
    /// Power under the other scaling, for comparison.
    pub alt_mu: f64,
    pub alt_analytic_power: f64,
    pub mc_power: f64,
    pub ci_half_width: f64,
    pub replicates: usize,
    pub failed: usize,
}

impl PowerResult {
    /// Distance of the Monte Carlo power from `power`, in CI half-widths.
    pub fn discrepancy(&self, power: f64) -> f64 {
        (self.mc_power - power).abs() / self.ci_half_width
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub n: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub n_plugin: usize,
    pub scaling: MuScaling,
    pub seed: u64,
}

/// Monte Carlo power at sample size `n` alongside the analytic power.
pub fn mc_power(
    spec: &AltModelSpec,
    opts: &PowerOptions,
    test: &TestOptions,
) -> Result<PowerResult> {
    if opts.replicates < 100 {
        return Err(Error::Usage(format!(
            "at least 100 replicates are needed, got {}",
            opts.replicates
        )));
    }
    let nc = noncentrality(spec, opts.n_plugin, opts.seed)?;
    let batch = replicate_tests(
        spec,
        opts.n,
        opts.replicates,
        &spec.tested,
        opts.alpha,
        opts.seed.wrapping_add(1),
        test,
    )?;
    let p = batch.rejection_rate();
    let other = match opts.scaling {
        MuScaling::Printed => MuScaling::Standardized,
        MuScaling::Standardized => MuScaling::Printed,
    };
    let mu = nc.mu(opts.scaling);
    let alt_mu = nc.mu(other);
    Ok(PowerResult {
        n: opts.n,
        c: nc.c,
        alpha: opts.alpha,
        d: nc.d,
        big_d: nc.big_d,
        big_d_se: nc.big_d_se,
        scaling: opts.scaling,
        mu,
        analytic_power: analytic_power(mu, opts.alpha),
        alt_mu,
        alt_analytic_power: analytic_power(alt_mu, opts.alpha),
        mc_power: p,
        ci_half_width: 1.96 * (p * (1.0 - p) / batch.statistics.len() as f64).sqrt(),
        replicates: opts.replicates,
        failed: batch.failed,
    })
}
