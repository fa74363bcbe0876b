//! Least-squares fits of log-log scaling data.

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero when fewer than three points.
    pub stderr: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return LineFit {
            slope: 0.0,
            intercept: my,
            stderr: 0.0,
        };
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - intercept - slope * a;
                e * e
            })
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        stderr,
    }
}

/// Slopes between consecutive points.
pub fn two_point_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (ys[1] - ys[0]) / (xs[1] - xs[0]))
        .collect()
}

/// Min and max of the last `window` consecutive-pair slopes.
pub fn window_extremes(x: &[f64], y: &[f64], window: usize) -> (f64, f64) {
    let slopes = two_point_slopes(x, y);
    let tail = &slopes[slopes.len().saturating_sub(window)..];
    tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    })
}

/// Fit of energies to `A r^s + B r^t` with `s` known and `t` free.
///
/// The smaller of the two exponents (with a positive coefficient) is the scaling
/// exponent of the energy as `r -> 0`; the other one describes the pre-asymptotic
/// correction. `t == s` is the logarithmic member `r^s (A + B ln(1/r))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPowerFit {
    /// Exponent of the dominant term as `r -> 0`.
    pub leading: f64,
    /// The free exponent `t`.
    pub free_exponent: f64,
    /// Coefficients on the basis `r^s` and `(r^t - r^s) / (s - t)`.
    pub coef: [f64; 2],
    /// Sum of squared relative residuals.
    pub rss: f64,
    /// Approximate standard error of `free_exponent` from the residual curvature.
    pub stderr: f64,
}

impl TwoPowerFit {
    /// Model value divided by its dominant term at `ell = ln(1/r)`.
    pub fn correction_ratio(&self, s: f64, ell: f64) -> f64 {
        let model = self.coef[0] * basis_lead(s, ell) + self.coef[1] * basis_free(s, self.free_exponent, ell);
        model / self.dominant(s, ell)
    }

    fn dominant(&self, s: f64, ell: f64) -> f64 {
        let t = self.free_exponent;
        if t > s {
            (self.coef[0] + self.coef[1] / (t - s)) * basis_lead(s, ell)
        } else {
            self.coef[1] * basis_free(s, t, ell)
        }
    }
}

#[inline]
fn basis_lead(s: f64, ell: f64) -> f64 {
    (-s * ell).exp()
}

#[inline]
fn basis_free(s: f64, t: f64, ell: f64) -> f64 {
    let dt = s - t;
    if dt.abs() < 1e-9 {
        ell * (-s * ell).exp()
    } else {
        ((-t * ell).exp() - (-s * ell).exp()) / dt
    }
}

/// Least squares of `1 ~ c0 u + c1 v` over the rows `(u, v)`; returns coefficients and rss.
fn solve_two_columns(rows: &[(f64, f64)]) -> Option<([f64; 2], f64)> {
    let (mut a00, mut a01, mut a11, mut y0, mut y1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    // column scaling keeps the normal equations well conditioned
    let n0 = rows.iter().map(|r| r.0 * r.0).sum::<f64>().sqrt();
    let n1 = rows.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt();
    if n0 == 0.0 || n1 == 0.0 || !n0.is_finite() || !n1.is_finite() {
        return None;
    }
    for &(u, v) in rows {
        let (u, v) = (u / n0, v / n1);
        a00 += u * u;
        a01 += u * v;
        a11 += v * v;
        y0 += u;
        y1 += v;
    }
    let det = a00 * a11 - a01 * a01;
    if det.abs() < 1e-14 {
        return None;
    }
    let c0 = (a11 * y0 - a01 * y1) / det / n0;
    let c1 = (a00 * y1 - a01 * y0) / det / n1;
    let rss = rows
        .iter()
        .map(|&(u, v)| {
            let e = c0 * u + c1 * v - 1.0;
            e * e
        })
        .sum();
    Some(([c0, c1], rss))
}

fn solve_two(s: f64, t: f64, ell: &[f64], energy: &[f64]) -> Option<([f64; 2], f64)> {
    let rows: Vec<(f64, f64)> = ell
        .iter()
        .zip(energy)
        .map(|(&l, &e)| (basis_lead(s, l) / e, basis_free(s, t, l) / e))
        .collect();
    solve_two_columns(&rows)
}

fn dominant_positive(s: f64, t: f64, c: [f64; 2]) -> bool {
    if t > s {
        c[0] + c[1] / (t - s) > 0.0
    } else {
        c[1] > 0.0
    }
}

/// Fits `E(r) ~ A r^s + B r^t` over `t` in `(0, t_max]` by grid search and golden-section
/// refinement. `ell` holds `ln(1/r)`. Returns `None` when no admissible fit exists.
pub fn two_power_fit(s: f64, ell: &[f64], energy: &[f64], t_max: f64) -> Option<TwoPowerFit> {
    const T_MIN: f64 = 0.005;
    const STEP: f64 = 0.0025;
    let eval = |t: f64| -> Option<([f64; 2], f64)> {
        solve_two(s, t, ell, energy).filter(|(c, _)| dominant_positive(s, t, *c))
    };
    let score = |t: f64| eval(t).map_or(f64::INFINITY, |(_, r)| r);
    let mut t = minimize_1d(T_MIN, t_max, STEP, score)?;
    // the logarithmic member sits between grid points in general
    if s <= t_max && score(s) < score(t) {
        t = s;
    }
    let (coef, rss) = eval(t)?;
    Some(TwoPowerFit {
        leading: t.min(s),
        free_exponent: t,
        coef,
        rss,
        stderr: curvature_stderr(&score, t, rss, ell.len()),
    })
}

/// Grid search over `[lo, hi]` followed by golden-section refinement of the best cell.
fn minimize_1d(lo: f64, hi: f64, step: f64, score: impl Fn(f64) -> f64) -> Option<f64> {
    let steps = ((hi - lo) / step).ceil() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let x = (lo + i as f64 * step).min(hi);
        let v = score(x);
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((x, v));
        }
    }
    let (x0, v0) = best?;
    let (mut a, mut b) = ((x0 - step).max(lo), (x0 + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let p = b - phi * (b - a);
        let q = a + phi * (b - a);
        if score(p) <= score(q) {
            b = q;
        } else {
            a = p;
        }
    }
    let x = 0.5 * (a + b);
    Some(if score(x) <= v0 { x } else { x0 })
}

/// Fit of covering counts to `A r^-d + B` with `A > 0`.
///
/// The constant absorbs the bounded number of extra mesh cells picked up at the edges
/// of the set, which otherwise biases short log-log fits downwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetPowerFit {
    pub exponent: f64,
    /// `[A, B]`.
    pub coef: [f64; 2],
    pub rss: f64,
    pub stderr: f64,
}

/// Fits `N(r) ~ A r^-d + B` for `d` in `(0, d_max]`; `ell` holds `ln(1/r)`.
pub fn offset_power_fit(ell: &[f64], counts: &[f64], d_max: f64) -> Option<OffsetPowerFit> {
    const STEP: f64 = 0.0025;
    let eval = |d: f64| -> Option<([f64; 2], f64)> {
        let rows: Vec<(f64, f64)> = ell
            .iter()
            .zip(counts)
            .map(|(&l, &n)| ((d * l).exp() / n, 1.0 / n))
            .collect();
        solve_two_columns(&rows).filter(|(c, _)| c[0] > 0.0)
    };
    let score = |d: f64| eval(d).map_or(f64::INFINITY, |(_, r)| r);
    let d = minimize_1d(STEP, d_max.max(2.0 * STEP), STEP, score)?;
    let (coef, rss) = eval(d)?;
    Some(OffsetPowerFit {
        exponent: d,
        coef,
        rss,
        stderr: curvature_stderr(&score, d, rss, ell.len()),
    })
}

/// Standard error of a one-parameter nonlinear fit from the curvature of its rss.
fn curvature_stderr(score: &impl Fn(f64) -> f64, x: f64, rss: f64, k: usize) -> f64 {
    let h = 1e-3;
    let curv = (score(x + h) - 2.0 * rss + score(x - h)) / (h * h);
    if k > 3 && curv.is_finite() && curv > 0.0 {
        (2.0 * rss / (k as f64 - 3.0) / curv).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = ols(&x, &y);
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-14);
        assert!(fit.stderr < 1e-12);
    }

    #[test]
    fn stderr_of_noisy_line() {
        // residuals (+1, -1, -1, +1) around y = x: rss 4, sxx 5
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 1.0, 4.0];
        let fit = ols(&x, &y);
        assert_relative_eq!(fit.slope, 1.0, epsilon = 1e-14);
        assert_relative_eq!(fit.stderr, (4.0f64 / 2.0 / 5.0).sqrt(), epsilon = 1e-14);
    }

    fn synth(model: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let ell: Vec<f64> = (3..11).map(|i| i as f64 * 2f64.ln()).collect();
        let e = ell.iter().map(|&l| model((-l).exp())).collect();
        (ell, e)
    }

    #[test]
    fn two_power_recovers_subleading_structure() {
        // s < t: leading exponent is s
        let (ell, e) = synth(|r| 2.7 * r.powf(0.5) - 2.0 * r);
        let fit = two_power_fit(0.5, &ell, &e, 2.0).unwrap();
        assert!((fit.leading - 0.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.free_exponent - 1.0).abs() < 1e-4, "{fit:?}");

        // s > t: leading exponent is t
        let (ell, e) = synth(|r| 3.0 * r.powf(0.63) - 0.5 * r * r);
        let fit = two_power_fit(2.0, &ell, &e, 3.0).unwrap();
        assert!((fit.leading - 0.63).abs() < 1e-4, "{fit:?}");

        // s == t: logarithmic factor
        let (ell, e) = synth(|r| r * (0.4 + 2.0 * (1.0 / r).ln()));
        let fit = two_power_fit(1.0, &ell, &e, 2.0).unwrap();
        assert!((fit.leading - 1.0).abs() < 1e-4, "{fit:?}");
        for &l in &ell {
            let ratio = fit.correction_ratio(1.0, l);
            assert!(ratio.is_finite() && ratio > 0.0);
        }
    }

    #[test]
    fn offset_fit_recovers_interval_counts() {
        // mesh counts of [0, 1] at r = 2^-k are 2^k + 1
        let ell: Vec<f64> = (0..8).map(|k| k as f64 * 2f64.ln()).collect();
        let n: Vec<f64> = (0..8).map(|k| (1u32 << k) as f64 + 1.0).collect();
        let fit = offset_power_fit(&ell, &n, 1.0).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-6, "{fit:?}");
        assert_relative_eq!(fit.coef[1], 1.0, epsilon = 1e-4);
        assert!(ols(&ell, &n.iter().map(|v| v.ln()).collect::<Vec<_>>()).slope < 0.9);
    }

    #[test]
    fn window() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 5.0, 6.0, 8.0, 9.0];
        assert_eq!(two_point_slopes(&x, &y), vec![5.0, 1.0, 2.0, 1.0]);
        assert_eq!(window_extremes(&x, &y, 3), (1.0, 2.0));
    }
}
