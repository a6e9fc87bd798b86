//! Central finite differences, used to check analytic derivatives.

/// Central-difference gradient. Coordinate `i` uses the step `h·(1 + |xᵢ|)`.
pub fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = h * (1.0 + x[i].abs());
            xp[i] = x[i] + hi;
            let fp = f(&xp);
            xp[i] = x[i] - hi;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * hi)
        })
        .collect()
}

/// Central-difference Hessian, row-major `n×n`, symmetrized.
pub fn hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|xi| h * (1.0 + xi.abs())).collect();
    let mut xp = x.to_vec();
    let f0 = f(x);
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        let hi = steps[i];
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        out[i][i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * hi;
                xp[j] = x[j] + sj * hj;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hi * hj);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(x: &[f64]) -> f64 {
        3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] - x[1] * x[1] + 4.0 * x[0] - 7.0
    }

    #[test]
    fn quadratic_is_exact() {
        let x = [0.7, -1.3];
        let g = gradient(quad, &x, 1e-3);
        assert!((g[0] - (6.0 * 0.7 + 2.0 * -1.3 + 4.0)).abs() < 1e-9);
        assert!((g[1] - (2.0 * 0.7 + 2.0 * 1.3)).abs() < 1e-9);
        let h = hessian(quad, &x, 1e-3);
        assert!((h[0][0] - 6.0).abs() < 1e-6);
        assert!((h[0][1] - 2.0).abs() < 1e-6);
        assert!((h[1][1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn error_is_second_order() {
        let f = |x: &[f64]| x[0].sin() * x[0].exp();
        let x = [0.4];
        let exact = 0.4_f64.exp() * (0.4_f64.sin() + 0.4_f64.cos());
        let e1 = (gradient(f, &x, 1e-2)[0] - exact).abs();
        let e2 = (gradient(f, &x, 5e-3)[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}
