//! Covering numbers from half-open coordinate mesh cubes and box-counting dimensions.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{contract, domain, Result};
use crate::pointcloud::{resolution, PointSet};
use crate::profile::DimensionEstimate;
use crate::regression::{offset_power_fit, ols, window_extremes};
use crate::scalar::Scalar;

/// Number of trailing consecutive-scale slopes used for the lower/upper estimates.
pub const SLOPE_WINDOW: usize = 3;
/// Values this close to an integer cell boundary are snapped onto it.
pub const BOUNDARY_TIE: f64 = 1e-12;

/// Dyadic scales `r_max * 2^-i` for `i = 0..levels`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleGrid<T> {
    r_max: T,
    levels: usize,
    scales: Vec<T>,
}

impl<T: Scalar> ScaleGrid<T> {
    pub fn new(r_max: T, levels: usize) -> Result<Self> {
        if !(r_max > T::zero() && r_max.is_finite()) {
            return Err(domain(format!("r_max = {r_max} must be positive")));
        }
        if levels < 2 {
            return Err(domain("a scale grid needs at least two levels"));
        }
        let half = T::lit(0.5);
        let scales: Vec<T> = (0..levels).map(|i| r_max * half.powi(i as i32)).collect();
        if scales.iter().any(|&r| r <= T::zero()) {
            return Err(domain("scale grid underflows"));
        }
        Ok(Self { r_max, levels, scales })
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn scales(&self) -> &[T] {
        &self.scales
    }

    pub fn finest(&self) -> T {
        self.scales[self.levels - 1]
    }
}

/// Mesh-cube surrogate for the covering number at scale `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverCount<T> {
    pub r: T,
    pub count: usize,
}

/// Cell index of a coordinate already divided by the cube side.
#[inline]
fn cell_index(v: f64) -> i64 {
    let nearest = v.round();
    if (v - nearest).abs() <= BOUNDARY_TIE * nearest.abs().max(1.0) {
        nearest as i64
    } else {
        v.floor() as i64
    }
}

/// Number of half-open mesh cubes of diameter `r` (side `r / sqrt(n)`) meeting `p`.
pub fn mesh_count<T: Scalar>(p: &PointSet<T>, r: T) -> Result<CoverCount<T>> {
    if !(r > T::zero() && r.is_finite()) {
        return Err(domain(format!("mesh scale r = {r} must be positive")));
    }
    let n = p.ambient_dim();
    let inv_side = (T::from_count(n).sqrt() / r).as_f64();
    let mut cells: HashSet<Vec<i64>> = HashSet::with_capacity(p.len());
    for x in p.iter() {
        cells.insert(x.iter().map(|&c| cell_index(c.as_f64() * inv_side)).collect());
    }
    Ok(CoverCount { r, count: cells.len() })
}

/// Mesh counts at every scale of `g`, without the resolution guard.
pub fn mesh_counts<T: Scalar>(p: &PointSet<T>, g: &ScaleGrid<T>) -> Result<Vec<CoverCount<T>>> {
    g.scales().iter().map(|&r| mesh_count(p, r)).collect()
}

/// Dimension estimate from covering counts.
///
/// The central estimate is the exponent `d` of the fit `N(r) ~ A r^-d + B`; lower and
/// upper estimates are the extreme two-point slopes over the last [`SLOPE_WINDOW`] scale
/// pairs of the counts with the fitted offset removed. Clipped to `[0, cap]`.
pub(crate) fn count_estimate<T: Scalar>(scales: &[T], counts: &[f64], cap: f64) -> DimensionEstimate<T> {
    let ell: Vec<f64> = scales.iter().map(|r| -r.as_f64().ln()).collect();
    let y: Vec<f64> = counts.iter().map(|v| v.ln()).collect();
    let line = ols(&ell, &y);
    let k = counts.len();
    let flat = counts.iter().all(|&c| c == counts[0]);
    if flat {
        return DimensionEstimate::clipped(0.0, 0.0, 0.0, 0.0, SLOPE_WINDOW, Some((0.0, None, k)), cap);
    }
    let (slope, stderr, corrected) = match offset_power_fit(&ell, counts, cap) {
        Some(fit) => {
            let [a, b] = fit.coef;
            let corrected: Vec<f64> = ell
                .iter()
                .zip(&y)
                .map(|(&l, &v)| {
                    let main = a * (fit.exponent * l).exp();
                    let share = main / (main + b);
                    if share.is_finite() && share > 0.0 {
                        v + share.ln()
                    } else {
                        v
                    }
                })
                .collect();
            (fit.exponent, fit.stderr, corrected)
        }
        None => (line.slope, line.stderr, y.clone()),
    };
    let (lo, hi) = window_extremes(&ell, &corrected, SLOPE_WINDOW);
    DimensionEstimate::clipped(slope, lo, hi, stderr, SLOPE_WINDOW, Some((line.slope, None, k)), cap)
}

/// Box-counting dimension estimate over the scales of `g`.
///
/// The central estimate is the exponent of the fit `N(r) ~ A r^-d + B`, so that the few
/// extra cells met at the edges of a set do not drag the slope down at coarse scales.
/// `ols_slope` keeps the plain least-squares slope of `ln N` against `-ln r`.
pub fn box_dimension<T: Scalar>(p: &PointSet<T>, g: &ScaleGrid<T>) -> Result<DimensionEstimate<T>> {
    if g.levels() < 4 {
        return Err(contract("box dimension needs at least four scales"));
    }
    resolution(p).check_scale(g.finest())?;
    let counts = mesh_counts(p, g)?;
    let values: Vec<f64> = counts.iter().map(|c| c.count as f64).collect();
    Ok(count_estimate(g.scales(), &values, p.ambient_dim() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::Generator;
    use crate::Error;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_scales() {
        let g = ScaleGrid::new(1.0, 4).unwrap();
        assert_eq!(g.scales(), &[1.0, 0.5, 0.25, 0.125]);
        assert!(ScaleGrid::new(1.0, 1).is_err());
        assert!(ScaleGrid::new(-1.0, 4).is_err());
    }

    #[test]
    fn mesh_count_examples() {
        let single = PointSet::new(2, vec![vec![0.3, 0.9]], "").unwrap();
        assert_eq!(mesh_count(&single, 0.01).unwrap().count, 1);

        let fine: PointSet<f64> = Generator::default().grid(1, 101).unwrap();
        assert_eq!(mesh_count(&fine, 0.25).unwrap().count, 5);

        let sq: PointSet<f64> = Generator::default().grid(2, 101).unwrap();
        assert_eq!(mesh_count(&sq, 2f64.sqrt() / 4.0).unwrap().count, 25);
    }

    #[test]
    fn boundary_ties_snap_to_the_boundary_cell() {
        assert_eq!(cell_index(3.9999999999999996), 4);
        assert_eq!(cell_index(4.0), 4);
        assert_eq!(cell_index(3.999), 3);
        assert_eq!(cell_index(-0.5), -1);
    }

    #[test]
    fn singleton_dimension_is_zero() {
        let p = PointSet::new(1, vec![vec![0.5]], "").unwrap();
        let est = box_dimension(&p, &ScaleGrid::new(1.0, 6).unwrap()).unwrap();
        assert_eq!((est.slope, est.lower, est.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn interval_dimension() {
        let p: PointSet<f64> = Generator::default().grid(1, 4097).unwrap();
        let est = box_dimension(&p, &ScaleGrid::new(1.0, 8).unwrap()).unwrap();
        assert_abs_diff_eq!(est.slope, 1.0, epsilon = 0.05);
        assert!(est.lower <= est.slope && est.slope <= est.upper);
    }

    #[test]
    fn cantor_dimension() {
        let p: PointSet<f64> = Generator::default().cantor(1.0 / 3.0, 12).unwrap();
        let est = box_dimension(&p, &ScaleGrid::new(1.0, 10).unwrap()).unwrap();
        assert_abs_diff_eq!(est.slope, 2f64.ln() / 3f64.ln(), epsilon = 0.05);
    }

    #[test]
    fn guard_is_enforced() {
        let p: PointSet<f64> = Generator::default().grid(1, 101).unwrap();
        match box_dimension(&p, &ScaleGrid::new(1.0, 8).unwrap()) {
            Err(Error::Resolution { r, guard }) => {
                assert_abs_diff_eq!(r, 1.0 / 128.0);
                assert_abs_diff_eq!(guard, 0.08, epsilon = 1e-12);
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_levels() {
        let p: PointSet<f64> = Generator::default().grid(1, 101).unwrap();
        assert!(matches!(
            box_dimension(&p, &ScaleGrid::new(1.0, 3).unwrap()),
            Err(Error::Contract(_))
        ));
    }
}
