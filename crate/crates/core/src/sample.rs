//! Right-censored regression data and counting-process risk-set sums.
//!
//! A [`SurvivalSample`] holds `n` records `(Xᵢ, δᵢ, z⁽ⁱ⁾)`. The risk set at
//! time `t` is `{i : Xᵢ ≥ t}` (closed on the left, so records failing at `t`
//! are still at risk at `t`). Tied failure times share one risk set.

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// What to do with a row that has a missing or non-finite field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Listwise deletion; the number of removed rows is kept in the sample.
    #[default]
    DropIncomplete,
    FailOnIncomplete,
}

/// One raw input row before validation. `None` marks a missing field.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub time: Option<f64>,
    pub status: Option<f64>,
    pub covariates: Vec<Option<f64>>,
    /// Source line, used in error messages.
    pub line: u64,
}

impl RawRecord {
    pub fn complete(time: f64, status: f64, covariates: &[f64]) -> Self {
        Self {
            time: Some(time),
            status: Some(status),
            covariates: covariates.iter().copied().map(Some).collect(),
            line: 0,
        }
    }

    fn is_incomplete(&self) -> bool {
        let bad = |v: &Option<f64>| !matches!(v, Some(x) if x.is_finite());
        bad(&self.time) || bad(&self.status) || self.covariates.iter().any(bad)
    }
}

/// Validated, immutable right-censored sample.
#[derive(Debug, Clone)]
pub struct SurvivalSample {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Matrix,
    names: Vec<String>,
    tau: f64,
    dropped: usize,
    /// Record indices sorted by decreasing time (ties by index).
    descending: Vec<usize>,
    /// Column means, used as a centring point for the risk-set moments.
    centre: Vec<f64>,
}

impl SurvivalSample {
    /// Builds a sample from already clean columns.
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Matrix,
        names: Vec<String>,
    ) -> Result<Self> {
        Self::with_dropped(times, events, covariates, names, 0)
    }

    fn with_dropped(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Matrix,
        names: Vec<String>,
        dropped: usize,
    ) -> Result<Self> {
        let n = times.len();
        let m = covariates.cols();
        if events.len() != n || covariates.rows() != n {
            return Err(Error::Data(format!(
                "column lengths disagree: {} times, {} statuses, {} covariate rows",
                n,
                events.len(),
                covariates.rows()
            )));
        }
        if names.len() != m {
            return Err(Error::Data(format!(
                "{} covariate names for {} covariate columns",
                names.len(),
                m
            )));
        }
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 records, got {n}")));
        }
        if m < 1 {
            return Err(Error::Data("need at least one covariate".into()));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Data(format!(
                "record {} has time {}; times must be finite and positive",
                i + 1,
                times[i]
            )));
        }
        if !covariates.is_finite() {
            return Err(Error::Data("covariates contain non-finite values".into()));
        }
        if !events.iter().any(|&e| e) {
            return Err(Error::NoEvents);
        }
        let tau = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut descending: Vec<usize> = (0..n).collect();
        descending.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
        let centre = (0..m)
            .map(|j| (0..n).map(|i| covariates[(i, j)]).sum::<f64>() / n as f64)
            .collect();
        Ok(Self {
            times,
            events,
            covariates,
            names,
            tau,
            dropped,
            descending,
            centre,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of covariates `m`.
    pub fn dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Observation horizon, the largest observed time.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Rows removed by listwise deletion.
    pub fn dropped_count(&self) -> usize {
        self.dropped
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    /// Index of a covariate by name.
    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Same records with every time mapped through `f` (which should be
    /// strictly increasing and keep times positive).
    pub fn map_times(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let times = self.times.iter().map(|&t| f(t)).collect();
        Self::with_dropped(
            times,
            self.events.clone(),
            self.covariates.clone(),
            self.names.clone(),
            self.dropped,
        )
    }

    /// Same records in the order given by `perm` (a permutation of `0..n`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.len());
        self.subset(perm)
    }

    /// The records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let rows: Vec<&[f64]> = indices.iter().map(|&i| self.covariate(i)).collect();
        Self::with_dropped(
            indices.iter().map(|&i| self.times[i]).collect(),
            indices.iter().map(|&i| self.events[i]).collect(),
            Matrix::from_rows(&rows),
            self.names.clone(),
            self.dropped,
        )
    }

    /// Same records with covariate `j` multiplied by `factor`.
    pub fn with_scaled_covariate(&self, j: usize, factor: f64) -> Result<Self> {
        let mut z = self.covariates.clone();
        for i in 0..self.len() {
            z[(i, j)] *= factor;
        }
        Self::with_dropped(
            self.times.clone(),
            self.events.clone(),
            z,
            self.names.clone(),
            self.dropped,
        )
    }

    /// Distinct failure times with multiplicities.
    pub fn event_table(&self) -> EventTable {
        let mut failures: Vec<usize> = (0..self.len()).filter(|&i| self.events[i]).collect();
        failures.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]).then(a.cmp(&b)));
        let mut table = EventTable::default();
        for i in failures {
            let t = self.times[i];
            if table.times.last() == Some(&t) {
                *table.counts.last_mut().unwrap() += 1;
                table.failing.last_mut().unwrap().push(i);
            } else {
                table.times.push(t);
                table.counts.push(1);
                table.failing.push(vec![i]);
            }
        }
        table
    }

    /// Linear predictors `βᵀz⁽ⁱ⁾` and their maximum.
    fn linear_predictors(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(beta.len(), self.dim(), "beta has wrong dimension");
        let eta: Vec<f64> = (0..self.len())
            .map(|i| dot(self.covariate(i), beta))
            .collect();
        let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (eta, max)
    }

    /// Risk-set sums at one time point, computed directly over all records.
    pub fn risk_aggregates(&self, beta: &[f64], t: f64) -> RiskAggregates {
        let (eta, offset) = self.linear_predictors(beta);
        let mut acc = MomentAccumulator::new(&self.centre);
        for i in (0..self.len()).filter(|&i| self.times[i] >= t) {
            acc.add(self.covariate(i), (eta[i] - offset).exp());
        }
        acc.aggregates(offset)
    }

    /// Risk-set sums at every distinct failure time, in increasing time
    /// order, in one backwards sweep over the records.
    pub fn risk_path(&self, beta: &[f64]) -> Vec<EventRisk> {
        let (eta, offset) = self.linear_predictors(beta);
        let table = self.event_table();
        let m = self.dim();
        let mut acc = MomentAccumulator::new(&self.centre);
        let mut next = 0;
        let mut path = Vec::with_capacity(table.len());
        for k in (0..table.len()).rev() {
            let t = table.times[k];
            while next < self.len() && self.times[self.descending[next]] >= t {
                let i = self.descending[next];
                acc.add(self.covariate(i), (eta[i] - offset).exp());
                next += 1;
            }
            let mut failing_sum = vec![0.0; m];
            let mut failing_eta = 0.0;
            for &i in &table.failing[k] {
                for (s, z) in failing_sum.iter_mut().zip(self.covariate(i)) {
                    *s += z;
                }
                failing_eta += eta[i];
            }
            let agg = acc.aggregates(offset);
            let moments = agg
                .moments
                .expect("a failing record is always in its own risk set");
            path.push(EventRisk {
                time: t,
                deaths: table.counts[k],
                at_risk: agg.at_risk,
                failing_sum,
                failing_eta,
                log_s0: moments.log_s0,
                e: moments.e,
                v: moments.v,
            });
        }
        path.reverse();
        path
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted sums around a fixed centre `c`:
/// `a0 = Σw`, `a1 = Σw(z−c)`, `a2 = Σw(z−c)(z−c)ᵀ`.
struct MomentAccumulator<'a> {
    centre: &'a [f64],
    count: usize,
    a0: f64,
    a1: Vec<f64>,
    a2: Matrix,
    scratch: Vec<f64>,
}

impl<'a> MomentAccumulator<'a> {
    fn new(centre: &'a [f64]) -> Self {
        let m = centre.len();
        Self {
            centre,
            count: 0,
            a0: 0.0,
            a1: vec![0.0; m],
            a2: Matrix::zeros(m, m),
            scratch: vec![0.0; m],
        }
    }

    fn add(&mut self, z: &[f64], w: f64) {
        self.count += 1;
        self.a0 += w;
        for (d, (zj, cj)) in self.scratch.iter_mut().zip(z.iter().zip(self.centre)) {
            *d = zj - cj;
        }
        let m = self.centre.len();
        for a in 0..m {
            let wa = w * self.scratch[a];
            self.a1[a] += wa;
            for b in 0..=a {
                self.a2[(a, b)] += wa * self.scratch[b];
            }
        }
    }

    /// `offset` is the log-scale that was subtracted from every weight.
    fn aggregates(&self, offset: f64) -> RiskAggregates {
        if self.count == 0 {
            return RiskAggregates {
                at_risk: 0,
                moments: None,
            };
        }
        let m = self.centre.len();
        let log_s0 = self.a0.ln() + offset;
        let s0 = log_s0.exp();
        let mean_dev: Vec<f64> = self.a1.iter().map(|x| x / self.a0).collect();
        let e: Vec<f64> = mean_dev
            .iter()
            .zip(self.centre)
            .map(|(d, c)| c + d)
            .collect();
        let mut v = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let val = self.a2[(a, b)] / self.a0 - mean_dev[a] * mean_dev[b];
                v[(a, b)] = val;
                v[(b, a)] = val;
            }
        }
        let s1: Vec<f64> = e.iter().map(|x| s0 * x).collect();
        let mut s2 = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                s2[(a, b)] = s0 * (v[(a, b)] + e[a] * e[b]);
            }
        }
        RiskAggregates {
            at_risk: self.count,
            moments: Some(RiskMoments {
                s0,
                log_s0,
                s1,
                s2,
                e,
                v,
            }),
        }
    }
}

/// `S⁽⁰⁾, S⁽¹⁾, S⁽²⁾, E, V` at one `(t, β)`.
#[derive(Debug, Clone)]
pub struct RiskAggregates {
    /// `Y(t)`, the number of records at risk.
    pub at_risk: usize,
    /// `None` when the risk set is empty.
    pub moments: Option<RiskMoments>,
}

impl RiskAggregates {
    pub fn is_empty(&self) -> bool {
        self.moments.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct RiskMoments {
    pub s0: f64,
    /// `ln S⁽⁰⁾`, finite even when `s0` itself would overflow.
    pub log_s0: f64,
    pub s1: Vec<f64>,
    pub s2: Matrix,
    /// `E = S⁽¹⁾/S⁽⁰⁾`
    pub e: Vec<f64>,
    /// `V = S⁽²⁾/S⁽⁰⁾ − E Eᵀ`
    pub v: Matrix,
}

/// Risk-set summary at one distinct failure time.
#[derive(Debug, Clone)]
pub struct EventRisk {
    pub time: f64,
    /// Number of failures at `time`.
    pub deaths: usize,
    pub at_risk: usize,
    /// Sum of the covariate vectors of the records failing at `time`.
    pub failing_sum: Vec<f64>,
    /// Sum of the linear predictors of the failing records.
    pub failing_eta: f64,
    pub log_s0: f64,
    pub e: Vec<f64>,
    pub v: Matrix,
}

/// Jump points of the pooled counting process `N(t)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTable {
    pub times: Vec<f64>,
    pub counts: Vec<usize>,
    pub failing: Vec<Vec<usize>>,
}

impl EventTable {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Validates raw rows into a sample.
pub fn build_sample(
    records: &[RawRecord],
    names: Vec<String>,
    policy: MissingPolicy,
) -> Result<SurvivalSample> {
    let m = names.len();
    let mut times = Vec::with_capacity(records.len());
    let mut events = Vec::with_capacity(records.len());
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for (idx, r) in records.iter().enumerate() {
        let line = if r.line == 0 { idx as u64 + 1 } else { r.line };
        if r.covariates.len() != m {
            return Err(Error::Data(format!(
                "line {line}: {} covariate fields, expected {m}",
                r.covariates.len()
            )));
        }
        if r.is_incomplete() {
            match policy {
                MissingPolicy::DropIncomplete => {
                    dropped += 1;
                    continue;
                }
                MissingPolicy::FailOnIncomplete => {
                    return Err(Error::Data(format!(
                        "line {line}: missing or non-finite value"
                    )));
                }
            }
        }
        let time = r.time.unwrap();
        if time <= 0.0 {
            return Err(Error::Data(format!(
                "line {line}: time {time} is not positive"
            )));
        }
        let status = r.status.unwrap();
        let event = if status == 1.0 {
            true
        } else if status == 0.0 {
            false
        } else {
            return Err(Error::Data(format!(
                "line {line}: status {status} is not 0 or 1"
            )));
        };
        times.push(time);
        events.push(event);
        rows.push(r.covariates.iter().map(|v| v.unwrap()).collect());
    }
    if times.is_empty() {
        return Err(Error::AllDropped { dropped });
    }
    let covariates = if rows.is_empty() {
        Matrix::zeros(0, m)
    } else {
        Matrix::from_rows(&rows)
    };
    SurvivalSample::with_dropped(times, events, covariates, names, dropped)
}
