#![allow(dead_code)]

use std::path::PathBuf;

use phtest::cli::ingest::{read_sample_from_path, ColumnSpec};
use phtest::cox::CoxFit;
use phtest::numeric::Matrix;
use phtest::sample::{MissingPolicy, SurvivalSample};
use phtest::score_test::{FhatSide, SigmaSet};
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn load(name: &str, time: &str, status: &str, cov: &[&str]) -> SurvivalSample {
    let spec = ColumnSpec {
        time: time.into(),
        status: status.into(),
        covariates: Some(cov.iter().map(|s| s.to_string()).collect()),
    };
    read_sample_from_path(&data_path(name), &spec, MissingPolicy::DropIncomplete).unwrap()
}

pub const ROSSI_COLS: [&str; 7] = ["fin", "age", "race", "wexp", "mar", "paro", "prio"];
pub const UIS_COLS: [&str; 10] = [
    "age", "beck", "ndr1", "ndr2", "ivhx3", "race", "treat", "site", "agexs", "racexs",
];

pub fn rossi() -> SurvivalSample {
    load("rossi.csv", "week", "arrest", &ROSSI_COLS)
}

pub fn gastric() -> SurvivalSample {
    load("gastric.csv", "time", "status", &["group"])
}

pub fn uis() -> SurvivalSample {
    load("uis.csv", "time", "censor", &UIS_COLS)
}

/// Published per-covariate statistics and p-values for the recidivism data.
pub const TABLE1: [(&str, f64, f64); 7] = [
    ("fin", 0.162, 0.872),
    ("age", 2.464, 0.014),
    ("race", 1.423, 0.155),
    ("wexp", -2.033, 0.042),
    ("mar", -1.017, 0.309),
    ("paro", -0.222, 0.824),
    ("prio", 0.672, 0.502),
];

/// Random right-censored sample with ties in time and bounded covariates.
pub fn random_sample(rng: &mut impl Rng, n: usize, m: usize) -> SurvivalSample {
    loop {
        let tied = rng.gen_bool(0.5);
        let times: Vec<f64> = (0..n)
            .map(|_| {
                if tied {
                    f64::from(rng.gen_range(1..=8))
                } else {
                    rng.gen_range(0.01..10.0)
                }
            })
            .collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        let data: Vec<f64> = (0..n * m)
            .map(|k| {
                if k % m == 0 {
                    f64::from(u8::from(rng.gen_bool(0.5)))
                } else {
                    rng.gen_range(-2.0..2.0)
                }
            })
            .collect();
        let names = (1..=m).map(|j| format!("z{j}")).collect();
        if let Ok(s) = SurvivalSample::new(times, events, Matrix::from_row_major(n, m, data), names)
        {
            return s;
        }
    }
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `Σ̂` blocks by brute force: every risk-set sum is recomputed from the
/// raw records at each distinct failure time, with no centring or sweep.
pub fn sigma_oracle(
    sample: &SurvivalSample,
    fit: &CoxFit,
    tested: &[usize],
    side: FhatSide,
) -> SigmaSet {
    let n = sample.len();
    let m = sample.dim();
    let k = tested.len();
    let beta = &fit.beta_hat;
    let mut event_times: Vec<f64> = (0..n)
        .filter(|&i| sample.events()[i])
        .map(|i| sample.times()[i])
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let mut sigma_jj = Matrix::zeros(k, k);
    let mut sigma_j = Matrix::zeros(m, k);
    let mut sigma = Matrix::zeros(m, m);
    let mut cum = 0.0f64;
    for &t in &event_times {
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; m];
        let mut s2 = vec![vec![0.0; m]; m];
        for i in (0..n).filter(|&i| sample.times()[i] >= t) {
            let z = sample.covariate(i);
            let w = z.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>().exp();
            s0 += w;
            for a in 0..m {
                s1[a] += w * z[a];
                for b in 0..m {
                    s2[a][b] += w * z[a] * z[b];
                }
            }
        }
        let deaths = (0..n)
            .filter(|&i| sample.events()[i] && sample.times()[i] == t)
            .count() as f64;
        let before = 1.0 - (-cum).exp();
        cum += deaths / s0;
        let after = 1.0 - (-cum).exp();
        let f = match side {
            FhatSide::Left => before,
            FhatSide::Right => after,
        };
        let v = |a: usize, b: usize| s2[a][b] / s0 - s1[a] * s1[b] / (s0 * s0);
        for a in 0..m {
            for b in 0..m {
                sigma[(a, b)] += deaths * v(a, b) / n as f64;
            }
            for (c, &j) in tested.iter().enumerate() {
                sigma_j[(a, c)] += deaths * f * v(a, j) / n as f64;
            }
        }
        for (r, &jr) in tested.iter().enumerate() {
            for (c, &jc) in tested.iter().enumerate() {
                sigma_jj[(r, c)] += deaths * f * f * v(jr, jc) / n as f64;
            }
        }
    }
    SigmaSet {
        sigma_jj,
        sigma_j,
        sigma,
    }
}

/// Largest entrywise difference relative to the largest entry.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.sub(b).max_abs() / scale
}
