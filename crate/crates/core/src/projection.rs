//! Random subspaces, orthogonal projections, the tube estimate and the projection experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::boxcount::{box_dimension, ScaleGrid};
use crate::capacity::{kernel_value, KernelSpec, SolverOptions};
use crate::error::{contract, domain, Result};
use crate::pointcloud::PointSet;
use crate::profile::{capacity_sweep, profile_estimate, DimensionEstimate};
use crate::report::Check;
use crate::scalar::Scalar;

/// Pivot norm below which a Gaussian draw is treated as rank deficient.
const PIVOT_FLOOR: f64 = 1e-12;
/// Orthonormality tolerance for user-supplied bases.
pub const BASIS_TOL: f64 = 1e-10;
/// Fewest Monte Carlo trials accepted by [`tube_fraction`].
pub const MIN_TRIALS: usize = 10_000;
/// Largest distance between a projection's dimension and the profile counted as agreement.
pub const AGREEMENT_TOL: f64 = 0.1;
/// Fraction of sampled subspaces that must agree with the profile.
pub const AGREEMENT_MIN_FRACTION: f64 = 0.9;
/// Fewest subspaces a projection experiment samples.
pub const MIN_SUBSPACES: usize = 10;

/// An `m`-dimensional subspace of `R^n` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subspace<T> {
    n: usize,
    basis: Vec<Vec<T>>,
}

impl<T: Scalar> Subspace<T> {
    /// Validates that `basis` holds orthonormal vectors of length `n`.
    pub fn new(n: usize, basis: Vec<Vec<T>>) -> Result<Self> {
        let m = basis.len();
        if m == 0 || m > n {
            return Err(domain(format!("subspace dimension {m} not in 1..={n}")));
        }
        if basis.iter().any(|b| b.len() != n) {
            return Err(contract("basis vectors must have the ambient dimension"));
        }
        let tol = BASIS_TOL.max(16.0 * T::epsilon().as_f64());
        for i in 0..m {
            for j in i..m {
                let d: f64 = basis[i]
                    .iter()
                    .zip(&basis[j])
                    .map(|(a, b)| a.as_f64() * b.as_f64())
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (d - want).abs() > tol {
                    return Err(domain(format!("basis not orthonormal: <b{i}, b{j}> = {d}")));
                }
            }
        }
        Ok(Self { n, basis })
    }

    /// Span of the first `m` coordinate axes.
    pub fn coordinate(n: usize, m: usize) -> Result<Self> {
        let basis = (0..m)
            .map(|k| (0..n).map(|i| if i == k { T::one() } else { T::zero() }).collect())
            .collect();
        Self::new(n, basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// Coordinates of the orthogonal projection of `x` against the basis.
    pub fn coordinates(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.write_coordinates(x, &mut out);
        out
    }

    fn write_coordinates(&self, x: &[T], out: &mut [T]) {
        for (o, b) in out.iter_mut().zip(&self.basis) {
            *o = T::lit(b.iter().zip(x).map(|(a, c)| a.as_f64() * c.as_f64()).sum());
        }
    }
}

/// Gram-Schmidt on `m` Gaussian vectors in `R^n`, redrawing any vector whose residual
/// norm falls below the pivot floor.
fn gaussian_frame<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < PIVOT_FLOOR {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Subspace drawn from the rotation-invariant distribution on `G(n, m)`.
pub fn sample_subspace<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<Subspace<T>> {
    sample_subspace_in_stream(n, m, seed, 0)
}

/// As [`sample_subspace`], drawing from an independent random stream of the same seed.
pub fn sample_subspace_in_stream<T: Scalar>(n: usize, m: usize, seed: u64, stream: u64) -> Result<Subspace<T>> {
    if m == 0 || m > n {
        return Err(domain(format!("subspace dimension {m} not in 1..={n}")));
    }
    let frame = gaussian_frame(n, m, &mut stream_rng(seed, stream));
    Ok(Subspace {
        n,
        basis: frame.into_iter().map(|b| b.into_iter().map(T::lit).collect()).collect(),
    })
}

/// Orthogonal projection of every point onto `v`, in coordinates of its basis.
pub fn project<T: Scalar>(p: &PointSet<T>, v: &Subspace<T>) -> Result<PointSet<T>> {
    if p.ambient_dim() != v.ambient_dim() {
        return Err(contract(format!(
            "cannot project a cloud in R^{} onto a subspace of R^{}",
            p.ambient_dim(),
            v.ambient_dim()
        )));
    }
    let label = format!("projection of {} onto a {}-plane", p.label(), v.dim());
    p.map_points(v.dim(), |x, out| v.write_coordinates(x, out), label)
}

/// Monte Carlo estimate of the fraction of subspaces `V` with `|pi_V x| <= r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeCheck {
    pub x: Vec<f64>,
    pub r: f64,
    pub trials: usize,
    pub fraction: f64,
    /// Binomial standard error of `fraction`.
    pub stderr: f64,
    /// `phi_r^m(x)`.
    pub kernel: f64,
    /// Extremes of `fraction / kernel`; over a sweep these span all of its scales.
    pub ratio_low: f64,
    pub ratio_high: f64,
}

/// Fraction of `trials` random `m`-planes in `R^n` whose projection of `x` has norm at most `r`.
pub fn tube_fraction(n: usize, m: usize, x: &[f64], r: f64, trials: usize, seed: u64) -> Result<TubeCheck> {
    if x.len() != n {
        return Err(contract("x must have the ambient dimension"));
    }
    if m == 0 || m > n {
        return Err(domain(format!("subspace dimension {m} not in 1..={n}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(domain(format!("tube radius {r} must be positive")));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(domain("x = 0 lies in every tube"));
    }
    if trials < MIN_TRIALS {
        return Err(domain(format!("at least {MIN_TRIALS} trials are needed, got {trials}")));
    }
    let mut rng = stream_rng(seed, 0);
    let r2 = r * r;
    let hits = (0..trials)
        .filter(|_| {
            let frame = gaussian_frame(n, m, &mut rng);
            let proj: f64 = frame
                .iter()
                .map(|b| {
                    let d: f64 = b.iter().zip(x).map(|(u, v)| u * v).sum();
                    d * d
                })
                .sum();
            proj <= r2
        })
        .count();
    let fraction = hits as f64 / trials as f64;
    let kernel = kernel_value(&KernelSpec::new(m as f64, r)?, x);
    let ratio = fraction / kernel;
    Ok(TubeCheck {
        x: x.to_vec(),
        r,
        trials,
        fraction,
        stderr: (fraction * (1.0 - fraction) / trials as f64).sqrt(),
        kernel,
        ratio_low: ratio,
        ratio_high: ratio,
    })
}

/// [`tube_fraction`] at each radius, each from its own random stream, with the
/// comparability constants taken over the whole sweep.
pub fn tube_sweep(n: usize, m: usize, x: &[f64], radii: &[f64], trials: usize, seed: u64) -> Result<Vec<TubeCheck>> {
    let mut checks: Vec<TubeCheck> = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| tube_fraction(n, m, x, r, trials, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let lo = checks.iter().map(|c| c.ratio_low).fold(f64::INFINITY, f64::min);
    let hi = checks.iter().map(|c| c.ratio_high).fold(f64::NEG_INFINITY, f64::max);
    for c in &mut checks {
        c.ratio_low = lo;
        c.ratio_high = hi;
    }
    Ok(checks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedDimension<T> {
    pub index: usize,
    pub basis: Vec<Vec<T>>,
    pub estimate: DimensionEstimate<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport<T> {
    pub m: usize,
    pub seed: u64,
    /// Estimated `d(m)` of the original cloud.
    pub profile: DimensionEstimate<T>,
    pub per_subspace: Vec<ProjectedDimension<T>>,
    pub agreement_fraction: f64,
    pub max_dimension: f64,
    pub checks: Vec<Check>,
}

/// Box dimensions of projections onto `num_subspaces` random `m`-planes against the
/// capacity profile `d(m)` of the cloud, both over the scales of `g`.
///
/// Subspace `i` is drawn from random stream `i` of `seed`.
pub fn projection_experiment<T: Scalar>(
    p: &PointSet<T>,
    m: usize,
    num_subspaces: usize,
    g: &ScaleGrid<T>,
    seed: u64,
    opts: &SolverOptions<T>,
) -> Result<ProjectionReport<T>> {
    let n = p.ambient_dim();
    if m == 0 || m >= n {
        return Err(domain(format!("projection dimension {m} not in 1..{n}")));
    }
    if num_subspaces < MIN_SUBSPACES {
        return Err(domain(format!("at least {MIN_SUBSPACES} subspaces are needed")));
    }
    let profile = profile_estimate(&capacity_sweep(p, T::from_count(m), g, opts)?)?;
    let per_subspace: Vec<ProjectedDimension<T>> = (0..num_subspaces)
        .map(|i| {
            let v = sample_subspace_in_stream(n, m, seed, i as u64)?;
            let estimate = box_dimension(&project(p, &v)?, g)?;
            Ok(ProjectedDimension {
                index: i,
                basis: v.basis,
                estimate,
            })
        })
        .collect::<Result<_>>()?;

    let d = profile.slope.as_f64();
    let dims: Vec<f64> = per_subspace.iter().map(|x| x.estimate.slope.as_f64()).collect();
    let agreeing = dims.iter().filter(|&&v| (v - d).abs() <= AGREEMENT_TOL).count();
    let agreement_fraction = agreeing as f64 / dims.len() as f64;
    let max_dimension = dims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exceeding: Vec<usize> = dims
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > d + AGREEMENT_TOL)
        .map(|(i, _)| i)
        .collect();
    let checks = vec![
        Check::expect(
            "typical_projection_matches_profile",
            agreement_fraction >= AGREEMENT_MIN_FRACTION,
            format!(
                "{agreeing}/{} projections within {AGREEMENT_TOL} of d({m}) = {d:.4} (need {AGREEMENT_MIN_FRACTION})",
                dims.len()
            ),
        ),
        Check::expect(
            "every_projection_below_profile",
            exceeding.is_empty(),
            format!("max dimension {max_dimension:.4} vs d({m}) + {AGREEMENT_TOL}; exceeding subspaces {exceeding:?}"),
        ),
    ];
    Ok(ProjectionReport {
        m,
        seed,
        profile,
        per_subspace,
        agreement_fraction,
        max_dimension,
        checks,
    })
}
