//! Capacity scale sweeps, s-box dimension profile estimates and the checks built on them:
//! comparability of capacities with covering numbers, and the profile inequalities.

use serde::Serialize;

use crate::boxcount::{mesh_count, ScaleGrid, SLOPE_WINDOW};
use crate::capacity::{equilibrium, KernelSpec, SolverOptions};
use crate::error::{contract, domain, Error, Result};
use crate::pointcloud::{resolution, PointSet};
use crate::regression::{ols, two_point_slopes, two_power_fit};
use crate::report::{Check, CheckStatus};
use crate::scalar::Scalar;

/// Scales above this fraction of the diameter are left out of the profile fit: the
/// kernel is flat across most of the set there and the small-`r` expansion does not apply.
pub const FIT_DIAMETER_FRACTION: f64 = 0.125;
/// Fewest scales any estimate is computed from.
pub const MIN_SCALES: usize = 4;
/// Largest allowed disagreement between covering-number and capacity slopes.
pub const SANDWICH_SLOPE_TOL: f64 = 0.07;
/// Multiplicative slack on the ratio constants fitted from the coarse scales.
pub const SANDWICH_SLACK: f64 = 2.0;
/// Additive tolerance on the estimated profile inequalities.
pub const PROFILE_TOL: f64 = 0.05;
/// Additive tolerance on the reciprocal chain.
pub const CHAIN_TOL: f64 = 0.05;
/// Below this estimate the reciprocal chain is reported inconclusive.
pub const CHAIN_FLOOR: f64 = 0.1;

/// Estimated scaling exponent with lower and upper estimates.
///
/// `lower <= slope <= upper` and `lower >= 0` always hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionEstimate<T> {
    pub slope: T,
    pub lower: T,
    pub upper: T,
    pub stderr: T,
    pub window: usize,
    /// Plain least-squares slope of the log-log data.
    pub ols_slope: T,
    /// Exponent of the correction term, for profile estimates.
    pub free_exponent: Option<T>,
    /// Number of scales that entered the fit.
    pub fitted_scales: usize,
}

impl<T: Scalar> DimensionEstimate<T> {
    pub(crate) fn clipped(
        slope: f64,
        window_lo: f64,
        window_hi: f64,
        stderr: f64,
        window: usize,
        extra: Option<(f64, Option<f64>, usize)>,
        cap: f64,
    ) -> Self {
        let clip = |v: f64| v.max(0.0).min(cap);
        let slope = clip(slope);
        let (ols_slope, free, fitted) = extra.unwrap_or((slope, None, 0));
        Self {
            slope: T::lit(slope),
            lower: T::lit(clip(window_lo).min(slope)),
            upper: T::lit(clip(window_hi).max(slope)),
            stderr: T::lit(stderr.max(0.0)),
            window,
            ols_slope: T::lit(ols_slope),
            free_exponent: free.map(T::lit),
            fitted_scales: fitted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepEntry<T> {
    pub r: T,
    pub capacity: T,
    pub gap: T,
    pub iterations: usize,
}

/// Equilibrium capacities at each scale of a grid, for one kernel exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySweep<T> {
    pub s: T,
    pub ambient_dim: usize,
    pub diameter: T,
    pub tol: T,
    pub entries: Vec<SweepEntry<T>>,
}

impl<T: Scalar> CapacitySweep<T> {
    pub fn capacities(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.capacity).collect()
    }

    /// Consecutive scale pairs where capacity drops by more than `2 tol` as `r` shrinks.
    pub fn monotonicity_violations(&self) -> Vec<(T, T)> {
        let slack = T::one() + T::lit(2.0) * self.tol;
        self.entries
            .windows(2)
            .filter(|w| w[1].r < w[0].r && w[1].capacity * slack < w[0].capacity)
            .map(|w| (w[0].r, w[1].r))
            .collect()
    }
}

fn solve_scales<T: Scalar>(p: &PointSet<T>, s: T, scales: &[T], opts: &SolverOptions<T>) -> Result<Vec<SweepEntry<T>>> {
    scales
        .iter()
        .map(|&r| {
            let k = KernelSpec::new(s, r)?;
            let eq = equilibrium(p, &k, opts).map_err(|e| match e {
                Error::Convergence { best, .. } => Error::Convergence {
                    best,
                    scale: Some(r.as_f64()),
                },
                other => other,
            })?;
            Ok(SweepEntry {
                r,
                capacity: eq.capacity,
                gap: eq.gap,
                iterations: eq.iterations,
            })
        })
        .collect()
}

/// Equilibrium capacity at every scale of `g`. Refuses grids that undercut the resolution guard.
pub fn capacity_sweep<T: Scalar>(
    p: &PointSet<T>,
    s: T,
    g: &ScaleGrid<T>,
    opts: &SolverOptions<T>,
) -> Result<CapacitySweep<T>> {
    let stats = resolution(p);
    stats.check_scale(g.finest())?;
    sweep_with_diameter(p, s, g.scales(), opts, stats.diameter)
}

fn sweep_with_diameter<T: Scalar>(
    p: &PointSet<T>,
    s: T,
    scales: &[T],
    opts: &SolverOptions<T>,
    diameter: T,
) -> Result<CapacitySweep<T>> {
    if !(s > T::zero()) {
        return Err(domain(format!("kernel exponent s = {s} must be positive")));
    }
    Ok(CapacitySweep {
        s,
        ambient_dim: p.ambient_dim(),
        diameter,
        tol: opts.tol,
        entries: solve_scales(p, s, scales, opts)?,
    })
}

/// Estimated s-box dimension profile from a capacity sweep.
///
/// The energies `1/C_r` are fitted by `A r^s + B r^t` with `t` free; the exponent of the
/// dominant term is the estimate. Lower and upper estimates are the extreme two-point
/// slopes over the last [`SLOPE_WINDOW`] scale pairs after dividing out the fitted
/// correction term. Everything is clipped to `[0, min(s, n)]`.
pub fn profile_estimate<T: Scalar>(sweep: &CapacitySweep<T>) -> Result<DimensionEstimate<T>> {
    if sweep.entries.len() < MIN_SCALES {
        return Err(contract(format!(
            "profile estimate needs at least {MIN_SCALES} scales, got {}",
            sweep.entries.len()
        )));
    }
    let s = sweep.s.as_f64();
    let cap = s.min(sweep.ambient_dim as f64);
    let mut entries: Vec<&SweepEntry<T>> = sweep.entries.iter().collect();
    entries.sort_by(|a, b| b.r.partial_cmp(&a.r).expect("finite scales"));
    let cutoff = FIT_DIAMETER_FRACTION * sweep.diameter.as_f64();
    let fine: Vec<&SweepEntry<T>> = entries.iter().copied().filter(|e| e.r.as_f64() <= cutoff).collect();
    let used = if fine.len() >= MIN_SCALES {
        fine
    } else {
        entries[entries.len() - MIN_SCALES..].to_vec()
    };

    let ell: Vec<f64> = used.iter().map(|e| -e.r.as_f64().ln()).collect();
    let log_c: Vec<f64> = used.iter().map(|e| e.capacity.as_f64().ln()).collect();
    let line = ols(&ell, &log_c);
    let k = used.len();
    let (c_min, c_max) = log_c
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if c_max - c_min <= 1e-12 {
        return Ok(DimensionEstimate::clipped(
            0.0,
            0.0,
            0.0,
            0.0,
            SLOPE_WINDOW,
            Some((0.0, None, k)),
            cap,
        ));
    }

    let energy: Vec<f64> = log_c.iter().map(|v| (-v).exp()).collect();
    let t_max = s.max(sweep.ambient_dim as f64) + 1.0;
    let (slope, corrected, stderr, free) = match two_power_fit(s, &ell, &energy, t_max) {
        Some(fit) => {
            let corrected: Vec<f64> = ell
                .iter()
                .zip(&log_c)
                .map(|(&l, &y)| y + fit.correction_ratio(s, l).ln())
                .collect();
            (fit.leading, corrected, fit.stderr, Some(fit.free_exponent))
        }
        None => (line.slope, log_c.clone(), line.stderr, None),
    };
    let slopes = two_point_slopes(&ell, &corrected);
    let tail = &slopes[slopes.len().saturating_sub(SLOPE_WINDOW)..];
    let (lo, hi) = tail
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (slope, slope) };
    Ok(DimensionEstimate::clipped(
        slope,
        lo,
        hi,
        stderr,
        SLOPE_WINDOW,
        Some((line.slope, free, k)),
        cap,
    ))
}

/// Covering number and capacity at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichScale<T> {
    pub r: T,
    pub count: usize,
    pub capacity: T,
    pub ratio: T,
    /// `max(1, log2(diam / r) + 1)` when `s = n`, otherwise 1.
    pub log_factor: T,
}

/// Comparison of mesh counts `N_r` with capacities `C_r^s` for `s >= n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport<T> {
    pub s: T,
    pub ambient_dim: usize,
    pub scales: Vec<SandwichScale<T>>,
    /// Least-squares slopes of `ln N_r`, `ln C_r` and `ln (C_r L_r)` against `-ln r`.
    pub count_slope: T,
    pub capacity_slope: T,
    pub corrected_capacity_slope: T,
    /// Distance from the count slope to the interval spanned by the two capacity slopes.
    pub slope_difference: T,
    pub lower_constant: T,
    pub upper_constant: T,
    pub checks: Vec<Check>,
}

fn slope_of<T: Scalar>(scales: &[T], values: impl Iterator<Item = f64>) -> f64 {
    let x: Vec<f64> = scales.iter().map(|r| -r.as_f64().ln()).collect();
    let y: Vec<f64> = values.map(f64::ln).collect();
    ols(&x, &y).slope
}

/// Compares covering numbers with capacities over the scales of `g`.
///
/// Every scale is used, including ones finer than the point spacing: the comparison
/// holds for the finite set itself. When `s = n` the capacity may fall short of the
/// covering number by the logarithmic factor, so the count slope is compared against
/// the band between the slopes of `C_r` and `C_r L_r`.
pub fn sandwich_report<T: Scalar>(
    p: &PointSet<T>,
    s: T,
    g: &ScaleGrid<T>,
    opts: &SolverOptions<T>,
) -> Result<SandwichReport<T>> {
    let n = p.ambient_dim();
    if s < T::from_count(n) {
        return Err(domain(format!(
            "sandwich needs s >= ambient dimension {n}, got s = {s}"
        )));
    }
    let critical = s == T::from_count(n);
    let diameter = resolution(p).diameter.as_f64();
    let sweep = solve_scales(p, s, g.scales(), opts)?;
    let scales: Vec<SandwichScale<T>> = sweep
        .iter()
        .map(|e| {
            let count = mesh_count(p, e.r)?.count;
            let log_factor = if critical && diameter > 0.0 {
                ((diameter / e.r.as_f64()).log2() + 1.0).max(1.0)
            } else {
                1.0
            };
            Ok(SandwichScale {
                r: e.r,
                count,
                capacity: e.capacity,
                ratio: T::from_count(count) / e.capacity,
                log_factor: T::lit(log_factor),
            })
        })
        .collect::<Result<_>>()?;

    let rs = g.scales();
    let count_slope = slope_of(rs, scales.iter().map(|x| x.count as f64));
    let capacity_slope = slope_of(rs, scales.iter().map(|x| x.capacity.as_f64()));
    let corrected_slope = slope_of(rs, scales.iter().map(|x| (x.capacity * x.log_factor).as_f64()));
    let (band_lo, band_hi) = (capacity_slope.min(corrected_slope), capacity_slope.max(corrected_slope));
    let slope_difference = (band_lo - count_slope).max(count_slope - band_hi).max(0.0);

    let coarse = &scales[..scales.len().div_ceil(2)];
    let ratio = |x: &SandwichScale<T>| x.ratio.as_f64();
    let scaled = |x: &SandwichScale<T>| (x.ratio / x.log_factor).as_f64();
    let lower_constant = coarse.iter().map(ratio).fold(f64::INFINITY, f64::min);
    let upper_constant = coarse.iter().map(scaled).fold(f64::NEG_INFINITY, f64::max);
    let below: Vec<f64> = scales
        .iter()
        .filter(|x| ratio(x) * SANDWICH_SLACK < lower_constant)
        .map(|x| x.r.as_f64())
        .collect();
    let above: Vec<f64> = scales
        .iter()
        .filter(|x| scaled(x) > SANDWICH_SLACK * upper_constant)
        .map(|x| x.r.as_f64())
        .collect();
    let tol = opts.tol.as_f64();
    let undercut: Vec<f64> = scales
        .iter()
        .filter(|x| (x.count as f64) < x.capacity.as_f64() * (1.0 - 2.0 * tol))
        .map(|x| x.r.as_f64())
        .collect();

    let checks = vec![
        Check::expect(
            "count_dominates_capacity",
            undercut.is_empty(),
            format!("N_r >= C_r at every scale; violations at r = {undercut:?}"),
        ),
        Check::expect(
            "ratio_lower_bound",
            below.is_empty(),
            format!("N_r/C_r >= {lower_constant:.6} / {SANDWICH_SLACK}; violations at r = {below:?}"),
        ),
        Check::expect(
            "ratio_upper_bound",
            above.is_empty(),
            format!("N_r/(C_r L_r) <= {SANDWICH_SLACK} * {upper_constant:.6}; violations at r = {above:?}"),
        ),
        Check::expect(
            "slope_agreement",
            slope_difference <= SANDWICH_SLOPE_TOL,
            format!(
                "count slope {count_slope:.4}, capacity slopes [{band_lo:.4}, {band_hi:.4}], \
                 difference {slope_difference:.4} (tolerance {SANDWICH_SLOPE_TOL})"
            ),
        ),
    ];
    Ok(SandwichReport {
        s,
        ambient_dim: n,
        scales,
        count_slope: T::lit(count_slope),
        capacity_slope: T::lit(capacity_slope),
        corrected_capacity_slope: T::lit(corrected_slope),
        slope_difference: T::lit(slope_difference),
        lower_constant: T::lit(lower_constant),
        upper_constant: T::lit(upper_constant),
        checks,
    })
}

/// Estimated profiles at several kernel exponents and the inequalities between them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport<T> {
    pub s_list: Vec<T>,
    pub estimates: Vec<DimensionEstimate<T>>,
    pub sweeps: Vec<CapacitySweep<T>>,
    pub checks: Vec<Check>,
}

/// Sweeps every exponent of `s_list` over `g` and checks
/// `0 <= d(s) <= d(t) <= n`, `d(s) <= s` and `1/d(s) - 1/s <= 1/d(t) - 1/t` on the
/// estimates, plus the exact ordering `C_r^s <= C_r^t` of the capacities themselves.
pub fn inequality_report<T: Scalar>(
    p: &PointSet<T>,
    s_list: &[T],
    g: &ScaleGrid<T>,
    opts: &SolverOptions<T>,
) -> Result<InequalityReport<T>> {
    if s_list.len() < 2 || s_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(contract("s_list must be strictly increasing with at least two entries"));
    }
    let sweeps: Vec<CapacitySweep<T>> = s_list
        .iter()
        .map(|&s| capacity_sweep(p, s, g, opts))
        .collect::<Result<_>>()?;
    let estimates: Vec<DimensionEstimate<T>> = sweeps.iter().map(profile_estimate).collect::<Result<_>>()?;
    let s: Vec<f64> = s_list.iter().map(|v| v.as_f64()).collect();
    let d: Vec<f64> = estimates.iter().map(|e| e.slope.as_f64()).collect();
    let n = p.ambient_dim() as f64;
    let tol = opts.tol.as_f64();

    let mut monotone = Vec::new();
    let mut chain = Vec::new();
    let mut chain_skipped = Vec::new();
    let mut capacity_order = Vec::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if d[i] > d[j] + PROFILE_TOL {
                monotone.push((s[i], s[j]));
            }
            if d[i] < CHAIN_FLOOR || d[j] < CHAIN_FLOOR {
                chain_skipped.push((s[i], s[j]));
            } else if 1.0 / d[i] - 1.0 / s[i] > 1.0 / d[j] - 1.0 / s[j] + CHAIN_TOL {
                chain.push((s[i], s[j]));
            }
        }
        if i + 1 < s.len() {
            for (a, b) in sweeps[i].entries.iter().zip(&sweeps[i + 1].entries) {
                if a.capacity.as_f64() > b.capacity.as_f64() * (1.0 + 2.0 * tol) {
                    capacity_order.push((s[i], s[i + 1], a.r.as_f64()));
                }
            }
        }
    }
    let above_s: Vec<f64> = s
        .iter()
        .zip(&d)
        .filter(|(s, d)| **d > **s + PROFILE_TOL)
        .map(|(s, _)| *s)
        .collect();
    let above_n: Vec<f64> = s.iter().zip(&d).filter(|(_, d)| **d > n).map(|(s, _)| *s).collect();
    let chain_check = if !chain.is_empty() {
        Check::new(
            "reciprocal_chain",
            CheckStatus::Fail,
            format!("violated for (s, t) = {chain:?}"),
        )
    } else if !chain_skipped.is_empty() {
        Check::new(
            "reciprocal_chain",
            CheckStatus::Inconclusive,
            format!("estimates below {CHAIN_FLOOR} for (s, t) = {chain_skipped:?}; remaining pairs hold"),
        )
    } else {
        Check::new(
            "reciprocal_chain",
            CheckStatus::Pass,
            format!("holds within {CHAIN_TOL} for all pairs"),
        )
    };
    let checks = vec![
        Check::expect(
            "capacity_monotone_in_s",
            capacity_order.is_empty(),
            format!("C_r^s <= C_r^t within 2 tol at every scale; violations (s, t, r) = {capacity_order:?}"),
        ),
        Check::expect(
            "profile_monotone",
            monotone.is_empty(),
            format!("d(s) <= d(t) + {PROFILE_TOL}; violations (s, t) = {monotone:?}"),
        ),
        Check::expect(
            "profile_below_s",
            above_s.is_empty(),
            format!("d(s) <= s + {PROFILE_TOL}; violations at s = {above_s:?}"),
        ),
        Check::expect(
            "profile_below_n",
            above_n.is_empty(),
            format!("d(s) <= {n}; violations at s = {above_n:?}"),
        ),
        chain_check,
    ];
    Ok(InequalityReport {
        s_list: s_list.to_vec(),
        estimates,
        sweeps,
        checks,
    })
}
