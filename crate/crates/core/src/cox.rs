//! Cox partial likelihood, Newton fit, Breslow cumulative hazard.

use crate::error::{Error, Result};
use crate::numeric::linalg::rcond_spd;
use crate::numeric::{symmetric_eigenvalues, Cholesky, Matrix, RCOND_THRESHOLD};
use crate::sample::{EventRisk, SurvivalSample};

/// Right-continuous step function, zero before the first knot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(knots.len(), values.len());
        debug_assert!(knots.windows(2).all(|w| w[0] < w[1]));
        Self { knots, values }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new(), Vec::new())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t`, including a jump located exactly at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Limit from the left at `t`, excluding a jump located at `t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k < t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            self.knots.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Newton solver settings.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Convergence when `‖score‖∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; zeros when `None`.
    pub init: Option<Vec<f64>>,
    /// Separation is declared once `‖β‖∞` exceeds this bound.
    pub divergence_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            init: None,
            divergence_bound: 50.0,
        }
    }
}

const MAX_HALVINGS: usize = 30;

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct CoxFit {
    pub beta_hat: Vec<f64>,
    pub score_at_hat: Vec<f64>,
    /// `−ℓ̈(β̂)`, not normalized by `n`.
    pub information: Matrix,
    pub loglik: f64,
    /// `ℓ(0)`, for reference.
    pub loglik_null: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Breslow estimate `Λ̂` at `β̂`.
    pub breslow: StepFunction,
    /// `F̂ = 1 − exp(−Λ̂)`.
    pub baseline_cdf: StepFunction,
}

impl CoxFit {
    pub fn score_norm(&self) -> f64 {
        max_abs(&self.score_at_hat)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

struct Evaluation {
    loglik: f64,
    score: Vec<f64>,
    information: Matrix,
}

fn evaluate_path(path: &[EventRisk], m: usize) -> Evaluation {
    let mut loglik = 0.0;
    let mut score = vec![0.0; m];
    let mut information = Matrix::zeros(m, m);
    for er in path {
        let d = er.deaths as f64;
        loglik += er.failing_eta - d * er.log_s0;
        for ((s, f), e) in score.iter_mut().zip(&er.failing_sum).zip(&er.e) {
            *s += f - d * e;
        }
        information.add_scaled(&er.v, d);
    }
    Evaluation {
        loglik,
        score,
        information,
    }
}

fn evaluate(sample: &SurvivalSample, beta: &[f64]) -> Evaluation {
    evaluate_path(&sample.risk_path(beta), sample.dim())
}

/// `ℓ(β) = Σ_events [βᵀz_fail − ln S⁽⁰⁾(t, β)]`, ties summed at a shared risk set.
pub fn log_partial_likelihood(sample: &SurvivalSample, beta: &[f64]) -> f64 {
    sample
        .risk_path(beta)
        .iter()
        .map(|er| er.failing_eta - er.deaths as f64 * er.log_s0)
        .sum()
}

/// Gradient of [`log_partial_likelihood`]: `Σ_events (z_fail − E(t, β))`.
pub fn score(sample: &SurvivalSample, beta: &[f64]) -> Vec<f64> {
    evaluate(sample, beta).score
}

/// `−ℓ̈(β) = Σ_events V(t, β)`.
pub fn information(sample: &SurvivalSample, beta: &[f64]) -> Matrix {
    evaluate(sample, beta).information
}

/// Breslow estimator `Λ̂(t) = Σ_{t_k ≤ t} d_k / S⁽⁰⁾(t_k, β)`.
pub fn breslow_cumhaz(sample: &SurvivalSample, beta: &[f64]) -> StepFunction {
    breslow_from_path(&sample.risk_path(beta))
}

pub(crate) fn breslow_from_path(path: &[EventRisk]) -> StepFunction {
    let mut acc = 0.0;
    let mut knots = Vec::with_capacity(path.len());
    let mut values = Vec::with_capacity(path.len());
    for er in path {
        acc += er.deaths as f64 * (-er.log_s0).exp();
        knots.push(er.time);
        values.push(acc);
    }
    StepFunction::new(knots, values)
}

/// `F̂ = 1 − e^{−Λ̂}`, pointwise.
pub fn baseline_cdf(cumhaz: &StepFunction) -> StepFunction {
    cumhaz.map(|h| -(-h).exp_m1())
}

/// Maximizes the partial likelihood by Newton's method with step halving.
pub fn fit(sample: &SurvivalSample, options: &FitOptions) -> Result<CoxFit> {
    let m = sample.dim();
    let mut beta = match &options.init {
        Some(b) if b.len() == m => b.clone(),
        Some(b) => {
            return Err(Error::Usage(format!(
                "initial beta has {} entries, sample has {m} covariates",
                b.len()
            )))
        }
        None => vec![0.0; m],
    };
    let loglik_null = log_partial_likelihood(sample, &vec![0.0; m]);
    let mut current = evaluate(sample, &beta);
    let initial_information = current.information.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut prev_step_norm = f64::INFINITY;

    loop {
        let score_norm = max_abs(&current.score);
        if score_norm <= options.tol && prev_step_norm <= 1e-6 * (1.0 + max_abs(&beta)) {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        let chol = Cholesky::factor(&current.information).ok_or(Error::Singular {
            what: "information matrix",
            rcond: 0.0,
            threshold: RCOND_THRESHOLD,
        })?;
        let rcond = rcond_spd(&current.information, &chol);
        if rcond < RCOND_THRESHOLD {
            return Err(Error::Singular {
                what: "information matrix",
                rcond,
                threshold: RCOND_THRESHOLD,
            });
        }
        let step = chol.solve_vec(&current.score);
        iterations += 1;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let eval = evaluate(sample, &trial);
            let slack = 1e-12 * current.loglik.abs().max(1.0);
            if eval.loglik.is_finite() && eval.loglik >= current.loglik - slack {
                accepted = Some((trial, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, eval)) = accepted else {
            // No ascent along the Newton direction: we are at round-off level.
            break;
        };
        prev_step_norm = scale * max_abs(&step);
        beta = trial;
        current = eval;
        if max_abs(&beta) > options.divergence_bound {
            return Err(Error::Separation {
                iterations,
                beta_norm: max_abs(&beta),
            });
        }
    }

    // Under monotone likelihood the score underflows to zero while the
    // information collapses along the diverging direction.
    let info_scale = symmetric_eigenvalues(&initial_information)
        .last()
        .copied()
        .unwrap_or(0.0);
    let info_min = symmetric_eigenvalues(&current.information)[0];
    if !(info_min > RCOND_THRESHOLD * info_scale) {
        if max_abs(&beta) > 1.0 {
            return Err(Error::Separation {
                iterations,
                beta_norm: max_abs(&beta),
            });
        }
        return Err(Error::Singular {
            what: "information matrix",
            rcond: if info_scale > 0.0 {
                info_min / info_scale
            } else {
                0.0
            },
            threshold: RCOND_THRESHOLD,
        });
    }
    if !converged && max_abs(&current.score) <= options.tol {
        converged = true;
    }
    if !converged && max_abs(&beta) > 0.5 * options.divergence_bound {
        return Err(Error::Separation {
            iterations,
            beta_norm: max_abs(&beta),
        });
    }

    let breslow = breslow_cumhaz(sample, &beta);
    let baseline_cdf = baseline_cdf(&breslow);
    Ok(CoxFit {
        beta_hat: beta,
        score_at_hat: current.score,
        information: current.information,
        loglik: current.loglik,
        loglik_null,
        iterations,
        converged,
        breslow,
        baseline_cdf,
    })
}
