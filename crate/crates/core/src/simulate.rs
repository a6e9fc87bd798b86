//! Sampling from the non-proportional hazards model
//!
//! `λ(t|z) = g(z, Λ(t), β, γ) λ(t)` with
//! `g = e^{βᵀz} e^{aΛ} / (1 + a(e^{aΛ} − 1))` and `a = e^{γᵀz̄}`, where `z̄`
//! holds the tested coordinates of `z`. With `γ = 0` this is the Cox model.
//! Integrating gives `H(t|z) = e^{βᵀz} a⁻² ln(1 + a(e^{aΛ(t)} − 1))`, which
//! inverts in closed form, so survival times are drawn exactly.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;
use crate::sample::{dot, SurvivalSample};
use crate::score_test::{test, TestOptions};

/// Baseline cumulative hazard `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Baseline {
    /// `Λ(t) = rate·t`
    Exponential { rate: f64 },
    /// `Λ(t) = (t/scale)^shape`
    Weibull { shape: f64, scale: f64 },
    /// `Λ(t) = total·(1 − e^{−rate·t})`: bounded, so a fraction never fails.
    Cure { total: f64, rate: f64 },
}

impl Baseline {
    pub fn cum_hazard(&self, t: f64) -> f64 {
        match *self {
            Baseline::Exponential { rate } => rate * t,
            Baseline::Weibull { shape, scale } => (t / scale).powf(shape),
            Baseline::Cure { total, rate } => -total * (-rate * t).exp_m1(),
        }
    }

    /// `Λ⁻¹(v)`, infinite when `v` lies beyond the total hazard.
    pub fn inverse(&self, v: f64) -> f64 {
        match *self {
            Baseline::Exponential { rate } => v / rate,
            Baseline::Weibull { shape, scale } => scale * v.powf(1.0 / shape),
            Baseline::Cure { total, rate } => {
                if v >= total {
                    f64::INFINITY
                } else {
                    -(-v / total).ln_1p() / rate
                }
            }
        }
    }

    fn is_bounded(&self) -> bool {
        matches!(self, Baseline::Cure { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        let fine = match *self {
            Baseline::Exponential { rate } => ok(rate),
            Baseline::Weibull { shape, scale } => ok(shape) && ok(scale),
            Baseline::Cure { total, rate } => ok(total) && ok(rate),
        };
        if fine {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "baseline parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Independent censoring law.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Censoring {
    #[default]
    None,
    /// Uniform on `(0, max)`.
    Uniform {
        max: f64,
    },
    Exponential {
        rate: f64,
    },
}

impl Censoring {
    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Censoring::None => f64::INFINITY,
            Censoring::Uniform { max } => max * (1.0 - rng.gen::<f64>()),
            Censoring::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
        }
    }
}

/// Marginal law of one covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum ColumnLaw {
    Bernoulli {
        p: f64,
    },
    Normal {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ColumnLaw {
    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            ColumnLaw::Bernoulli { p } => f64::from(u8::from(rng.gen::<f64>() < p)),
            ColumnLaw::Normal { mean, sd } => {
                let x: f64 = StandardNormal.sample(rng);
                mean + sd * x
            }
        }
    }
}

/// Covariate generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Design {
    /// Independent columns.
    Independent { columns: Vec<ColumnLaw> },
    /// Fixed rows, recycled when `n` exceeds their number.
    Fixed { rows: Vec<Vec<f64>> },
}

impl Design {
    fn dim(&self) -> usize {
        match self {
            Design::Independent { columns } => columns.len(),
            Design::Fixed { rows } => rows.first().map_or(0, Vec::len),
        }
    }
}

/// Size of the departure from proportional hazards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Alternative {
    Fixed {
        gamma: Vec<f64>,
    },
    /// `γ = c/√n`
    Local {
        c: Vec<f64>,
    },
}

impl Default for Alternative {
    fn default() -> Self {
        Alternative::Fixed { gamma: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltModelSpec {
    pub beta: Vec<f64>,
    /// 0-based indices of the coordinates entering `γᵀz̄`.
    #[serde(default)]
    pub tested: Vec<usize>,
    #[serde(default)]
    pub alternative: Alternative,
    pub baseline: Baseline,
    #[serde(default)]
    pub censoring: Censoring,
    pub design: Design,
    /// Administrative end of follow-up.
    #[serde(default)]
    pub horizon: Option<f64>,
}

impl AltModelSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self =
            toml::from_str(text).map_err(|e| Error::Usage(format!("invalid model spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// `γ` for a sample of size `n`; zeros when the alternative is left empty.
    pub fn gamma(&self, n: usize) -> Vec<f64> {
        match &self.alternative {
            Alternative::Fixed { gamma } if gamma.is_empty() => vec![0.0; self.tested.len()],
            Alternative::Fixed { gamma } => gamma.clone(),
            Alternative::Local { c } => {
                let root = (n as f64).sqrt();
                c.iter().map(|c| c / root).collect()
            }
        }
    }

    /// The same spec with `γ = 0`.
    pub fn null(&self) -> Self {
        Self {
            alternative: Alternative::Fixed {
                gamma: vec![0.0; self.tested.len()],
            },
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Usage(msg));
        let m = self.dim();
        if m == 0 {
            return bad("beta must have at least one entry".into());
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        if self.design.dim() != m {
            return bad(format!(
                "design has {} columns but beta has {m}",
                self.design.dim()
            ));
        }
        match &self.design {
            Design::Fixed { rows } => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != m) {
                    return bad("fixed design rows must all have length of beta".into());
                }
                if rows.iter().flatten().any(|x| !x.is_finite()) {
                    return bad("fixed design must be finite".into());
                }
            }
            Design::Independent { columns } => {
                for law in columns {
                    match *law {
                        ColumnLaw::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                            return bad(format!("Bernoulli p must lie in [0, 1], got {p}"));
                        }
                        ColumnLaw::Normal { mean, sd } if !(mean.is_finite() && sd >= 0.0) => {
                            return bad(format!("invalid normal column: mean {mean}, sd {sd}"));
                        }
                        _ => {}
                    }
                }
            }
        }
        let mut seen = vec![false; m];
        for &j in &self.tested {
            if j >= m || std::mem::replace(&mut seen[j], true) {
                return bad(format!("tested indices must be distinct and below {m}"));
            }
        }
        let width = match &self.alternative {
            Alternative::Fixed { gamma } if gamma.is_empty() => self.tested.len(),
            Alternative::Fixed { gamma } => gamma.len(),
            Alternative::Local { c } => c.len(),
        };
        if width != self.tested.len() {
            return bad(format!(
                "alternative has {width} entries for {} tested indices",
                self.tested.len()
            ));
        }
        if self.gamma(1).iter().any(|g| !g.is_finite()) {
            return bad("gamma must be finite".into());
        }
        self.baseline.validate()?;
        match self.censoring {
            Censoring::Uniform { max } if !(max.is_finite() && max > 0.0) => {
                return bad(format!("uniform censoring needs a positive max, got {max}"));
            }
            Censoring::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                return bad(format!("censoring rate must be positive, got {rate}"));
            }
            _ => {}
        }
        match self.horizon {
            Some(h) if !(h.is_finite() && h > 0.0) => {
                bad(format!("horizon must be positive, got {h}"))
            }
            None if self.baseline.is_bounded() && self.censoring == Censoring::None => {
                bad("a bounded baseline without censoring needs a horizon".into())
            }
            _ => Ok(()),
        }
    }

    fn tilt(&self, z: &[f64], gamma: &[f64]) -> f64 {
        self.tested.iter().zip(gamma).map(|(&j, g)| g * z[j]).sum()
    }
}

/// `ln(1 + a(e^x − 1))` for `x ≥ 0`, `a > 0`.
fn log_mix(x: f64, a: f64) -> f64 {
    if x > 1.0 {
        x + a.ln() + ((1.0 - a) / a * (-x).exp()).ln_1p()
    } else {
        (a * x.exp_m1()).ln_1p()
    }
}

/// `ln g(z, Λ, β, γ)`.
pub fn log_g_factor(z: &[f64], cum_baseline: f64, spec: &AltModelSpec, gamma: &[f64]) -> f64 {
    let lin = dot(&spec.beta, z);
    let log_a = spec.tilt(z, gamma);
    if log_a == 0.0 {
        return lin;
    }
    let a = log_a.exp();
    let x = a * cum_baseline;
    lin + x - log_mix(x, a)
}

/// Hazard multiplier `g(z, Λ, β, γ)`.
pub fn g_factor(z: &[f64], cum_baseline: f64, spec: &AltModelSpec, gamma: &[f64]) -> f64 {
    log_g_factor(z, cum_baseline, spec, gamma).exp()
}

/// `H(·|z)` expressed through `v = Λ(t)`.
pub fn cum_hazard_from_baseline(z: &[f64], v: f64, spec: &AltModelSpec, gamma: &[f64]) -> f64 {
    let lin = dot(&spec.beta, z);
    let log_a = spec.tilt(z, gamma);
    if log_a == 0.0 {
        return lin.exp() * v;
    }
    let a = log_a.exp();
    (lin - 2.0 * log_a).exp() * log_mix(a * v, a)
}

/// Cumulative hazard `H(t|z)` of the alternative model.
pub fn cum_hazard_alt(t: f64, z: &[f64], spec: &AltModelSpec, gamma: &[f64]) -> f64 {
    cum_hazard_from_baseline(z, spec.baseline.cum_hazard(t), spec, gamma)
}

/// Solves `H(t|z) = h` for `Λ(t)`.
pub fn baseline_level_for(z: &[f64], h: f64, spec: &AltModelSpec, gamma: &[f64]) -> f64 {
    let lin = dot(&spec.beta, z);
    let log_a = spec.tilt(z, gamma);
    let a = log_a.exp();
    let u = h * (2.0 * log_a - lin).exp();
    // Λ = a⁻¹ ln(1 + (e^u − 1)/a)
    let l = if u > 1.0 {
        u - log_a + ((a - 1.0) * (-u).exp()).ln_1p()
    } else {
        (u.exp_m1() / a).ln_1p()
    };
    l / a
}

/// Inverse of `H(·|z)`; infinite when `h` is never reached.
pub fn inverse_cum_hazard(z: &[f64], h: f64, spec: &AltModelSpec, gamma: &[f64]) -> f64 {
    spec.baseline.inverse(baseline_level_for(z, h, spec, gamma))
}

fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `n` records. Record `i` uses its own stream of the seeded generator,
/// so the output does not depend on how the work is scheduled.
pub fn simulate(n: usize, spec: &AltModelSpec, seed: u64) -> Result<SurvivalSample> {
    if n < 2 {
        return Err(Error::Usage(format!("n must be at least 2, got {n}")));
    }
    spec.validate()?;
    let m = spec.dim();
    let gamma = spec.gamma(n);
    let horizon = spec.horizon.unwrap_or(f64::INFINITY);
    let records: Vec<(f64, bool, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = record_rng(seed, i as u64);
            let z: Vec<f64> = match &spec.design {
                Design::Independent { columns } => {
                    columns.iter().map(|c| c.draw(&mut rng)).collect()
                }
                Design::Fixed { rows } => rows[i % rows.len()].clone(),
            };
            let e: f64 = Exp1.sample(&mut rng);
            let t = inverse_cum_hazard(&z, e, spec, &gamma);
            let c = spec.censoring.draw(&mut rng).min(horizon);
            (t.min(c), t <= c, z)
        })
        .collect();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let mut cov = Matrix::zeros(n, m);
    for (i, (x, d, z)) in records.into_iter().enumerate() {
        times.push(x);
        events.push(d);
        for (j, v) in z.into_iter().enumerate() {
            cov[(i, j)] = v;
        }
    }
    let names = (1..=m).map(|j| format!("z{j}")).collect();
    SurvivalSample::new(times, events, cov, names)
}

/// `c(t) = λ(t|z₂)/λ(t|z₁)` on a time grid.
pub fn hazard_ratio_curve(
    z1: &[f64],
    z2: &[f64],
    spec: &AltModelSpec,
    gamma: &[f64],
    grid: &[f64],
) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&t| {
            let v = spec.baseline.cum_hazard(t);
            let r = log_g_factor(z2, v, spec, gamma) - log_g_factor(z1, v, spec, gamma);
            (t, r.exp())
        })
        .collect()
}

/// Outcome of running the test on many simulated samples.
#[derive(Debug, Clone)]
pub struct ReplicateBatch {
    /// Test statistic per successful replicate, in replicate order.
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub rejections: usize,
    pub failed: usize,
    pub replicates: usize,
}

impl ReplicateBatch {
    pub fn rejection_rate(&self) -> f64 {
        self.rejections as f64 / self.statistics.len() as f64
    }
}

/// Seed of replicate `r`, drawn from its own stream of the master seed.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    record_rng(seed, r as u64).next_u64()
}

/// Simulates `replicates` samples of size `n` and tests `tested` in each.
/// More than 5% failed replicates is an error.
pub fn replicate_tests(
    spec: &AltModelSpec,
    n: usize,
    replicates: usize,
    tested: &[usize],
    alpha: f64,
    seed: u64,
    options: &TestOptions,
) -> Result<ReplicateBatch> {
    if replicates == 0 {
        return Err(Error::Usage("replicates must be positive".into()));
    }
    spec.validate()?;
    let outcomes: Vec<Option<(f64, f64, bool)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let sample = simulate(n, spec, replicate_seed(seed, r)).ok()?;
            let report = test(&sample, tested, alpha, options).ok()?;
            Some((report.statistic, report.p_value, report.reject))
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    if failed * 20 > replicates {
        return Err(Error::TooManyFailures { failed, replicates });
    }
    let ok: Vec<_> = outcomes.into_iter().flatten().collect();
    Ok(ReplicateBatch {
        statistics: ok.iter().map(|o| o.0).collect(),
        p_values: ok.iter().map(|o| o.1).collect(),
        rejections: ok.iter().filter(|o| o.2).count(),
        failed,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ks_test;

    fn spec(beta: Vec<f64>, tested: Vec<usize>, gamma: Vec<f64>) -> AltModelSpec {
        let m = beta.len();
        AltModelSpec {
            beta,
            tested,
            alternative: Alternative::Fixed { gamma },
            baseline: Baseline::Exponential { rate: 1.0 },
            censoring: Censoring::None,
            design: Design::Independent {
                columns: vec![ColumnLaw::Bernoulli { p: 0.5 }; m],
            },
            horizon: None,
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn g_reduces_to_cox_without_gamma() {
        let s = spec(vec![0.7, -0.4], vec![1], vec![0.0]);
        let z = [1.0, 2.5];
        for v in [0.0, 0.3, 5.0, 800.0] {
            assert!(close(
                g_factor(&z, v, &s, &[0.0]),
                (0.7f64 - 1.0).exp(),
                1e-15
            ));
            let h = cum_hazard_from_baseline(&z, v, &s, &[0.0]);
            assert!(close(h, (0.7f64 - 1.0).exp() * v, 1e-14), "{v}: {h}");
        }
    }

    #[test]
    fn hazard_ratio_endpoints() {
        let (b, g, dz) = (0.8, 1.3, 1.5);
        let s = spec(vec![b], vec![0], vec![g]);
        let curve = hazard_ratio_curve(&[0.0], &[dz], &s, &[g], &[0.0, 1e3]);
        assert!(close(curve[0].1, (b * dz).exp(), 1e-14));
        assert!(close(curve[1].1, ((b - g) * dz).exp(), 1e-12));

        // β = γ: curves meet at infinity.
        let s = spec(vec![g], vec![0], vec![g]);
        let curve = hazard_ratio_curve(&[0.0], &[1.0], &s, &[g], &[1e3]);
        assert!(close(curve[0].1, 1.0, 1e-12));

        // β = 0, γ < 0: ratio starts at 1 and grows.
        let s = spec(vec![0.0], vec![0], vec![-0.6]);
        let curve = hazard_ratio_curve(&[0.0], &[1.0], &s, &[-0.6], &[0.0, 0.5, 50.0]);
        assert!(close(curve[0].1, 1.0, 1e-15));
        assert!(curve[1].1 > 1.0 && curve[2].1 > curve[1].1);
    }

    #[test]
    fn cum_hazard_closed_form_case() {
        // β = 0, a = 2, Λ = 1: (1/4) ln(1 + 2(e² − 1))
        let s = spec(vec![0.0], vec![0], vec![2f64.ln()]);
        let h = cum_hazard_from_baseline(&[1.0], 1.0, &s, &[2f64.ln()]);
        let want = 0.25 * (1.0 + 2.0 * (2f64.exp() - 1.0)).ln();
        assert!(close(h, want, 1e-15));
        assert_eq!(cum_hazard_alt(0.0, &[1.0], &s, &[2f64.ln()]), 0.0);
    }

    #[test]
    fn inverse_round_trips() {
        for (g, z) in [(0.0, 1.0), (1.2, 1.0), (-2.0, 1.0), (0.5, -3.0)] {
            let s = spec(vec![0.3], vec![0], vec![g]);
            for t in [1e-6, 0.01, 0.7, 4.0, 60.0] {
                let h = cum_hazard_alt(t, &[z], &s, &[g]);
                let back = inverse_cum_hazard(&[z], h, &s, &[g]);
                assert!(close(back, t, 1e-11), "g={g} t={t} back={back}");
            }
        }
    }

    #[test]
    fn bounded_baseline_censors_at_horizon() {
        let mut s = spec(vec![0.0], vec![], vec![]);
        s.baseline = Baseline::Cure {
            total: 0.5,
            rate: 1.0,
        };
        assert!(s.validate().is_err());
        s.horizon = Some(10.0);
        let sample = simulate(400, &s, 3).unwrap();
        let cured = sample.events().iter().filter(|&&d| !d).count();
        // P(no failure) = e^{-0.5(1 - e^{-10})} ≈ 0.607
        assert!((cured as f64 / 400.0 - 0.607).abs() < 0.08, "{cured}");
        assert!(sample.times().iter().all(|&t| t <= 10.0));
    }

    #[test]
    fn same_seed_same_sample() {
        let mut s = spec(vec![0.5, -0.2], vec![0], vec![0.4]);
        s.censoring = Censoring::Uniform { max: 2.0 };
        let a = simulate(200, &s, 11).unwrap();
        let b = simulate(200, &s, 11).unwrap();
        let c = simulate(200, &s, 12).unwrap();
        assert_eq!(a.times(), b.times());
        assert_eq!(a.covariates(), b.covariates());
        assert_ne!(a.times(), c.times());
    }

    #[test]
    fn null_draws_are_exponential_given_z() {
        let s = spec(vec![0.9], vec![], vec![]);
        let sample = simulate(10_000, &s, 5).unwrap();
        // T·e^{βz} is standard exponential.
        let scaled: Vec<f64> = (0..sample.len())
            .map(|i| sample.times()[i] * (0.9 * sample.covariate(i)[0]).exp())
            .collect();
        let ks = ks_test(&scaled, |x| -(-x).exp_m1());
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn spec_parses_from_toml() {
        let text = r#"
            beta = [0.5, -0.3]
            tested = [0]
            horizon = 8.0
            alternative = { kind = "local", c = [2.0] }
            baseline = { kind = "weibull", shape = 1.5, scale = 2.0 }
            censoring = { kind = "uniform", max = 6.0 }
            [design]
            kind = "independent"
            columns = [{ law = "bernoulli", p = 0.4 }, { law = "normal" }]
        "#;
        let s = AltModelSpec::from_toml(text).unwrap();
        assert_eq!(s.gamma(100), vec![0.2]);
        assert_eq!(
            s.design,
            Design::Independent {
                columns: vec![
                    ColumnLaw::Bernoulli { p: 0.4 },
                    ColumnLaw::Normal { mean: 0.0, sd: 1.0 }
                ]
            }
        );
        let bad = text.replace("tested = [0]", "tested = [3]");
        assert!(matches!(
            AltModelSpec::from_toml(&bad),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|r| replicate_seed(9, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
