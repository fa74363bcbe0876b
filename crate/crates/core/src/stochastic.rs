//! Fractional Brownian images and Hölder maps of point clouds.
//!
//! An index-`alpha` fractional Brownian field on a cloud is sampled exactly by factoring
//! its covariance matrix; images are then compared with the capacity profile of the
//! source through `dim_B X(E) = d(m alpha) / alpha`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::boxcount::{box_dimension, ScaleGrid};
use crate::capacity::SolverOptions;
use crate::error::{domain, Error, Result};
use crate::pointcloud::PointSet;
use crate::profile::{capacity_sweep, profile_estimate, DimensionEstimate};
use crate::report::Check;
use crate::scalar::{dist, norm, Scalar};

/// Largest cloud whose covariance is factored densely.
pub const FBM_POINT_BUDGET: usize = 3000;
/// Negative eigenvalues down to `-CLIP_TOL * trace` are treated as rounding and set to 0.
pub const CLIP_TOL: f64 = 1e-10;
/// Allowed distance between the mean fBm image dimension and its prediction.
pub const IMAGE_TOL: f64 = 0.15;
/// Slack on the one-sided Hölder image bound.
pub const HOLDER_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbmSpec {
    pub alpha: f64,
    pub m: usize,
    pub seed: u64,
}

impl FbmSpec {
    pub fn new(alpha: f64, m: usize, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("fBm index alpha = {alpha} not in (0, 1)")));
        }
        if m == 0 {
            return Err(domain("fBm target dimension must be at least 1"));
        }
        Ok(Self { alpha, m, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderSpec {
    pub alpha: f64,
}

impl HolderSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(domain(format!("Hölder exponent alpha = {alpha} not in (0, 1]")));
        }
        Ok(Self { alpha })
    }
}

/// Index of the point nearest the origin; the first one on ties.
fn anchor_index<T: Scalar>(p: &PointSet<T>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, x) in p.iter().enumerate() {
        let d = norm(x).as_f64();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Factored covariance of an fBm field over a fixed cloud, reusable across seeds.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    alpha: f64,
    len: usize,
    anchor: usize,
    /// Points other than the anchor, in cloud order.
    free: Vec<usize>,
    /// `V diag(sqrt(lambda))` of the covariance restricted to `free`.
    factor: DMatrix<f64>,
    clipped: usize,
}

impl FbmSampler {
    /// Builds the covariance `(|x-a|^2α + |y-a|^2α - |x-y|^2α) / 2` relative to the anchor
    /// `a` (the point nearest the origin) and factors it by a symmetric eigendecomposition.
    pub fn new<T: Scalar>(p: &PointSet<T>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("fBm index alpha = {alpha} not in (0, 1)")));
        }
        if p.len() > FBM_POINT_BUDGET {
            return Err(Error::Size {
                what: "fBm covariance",
                needed: p.len() as u128,
                budget: FBM_POINT_BUDGET,
            });
        }
        let anchor = anchor_index(p);
        let a = p.point(anchor);
        let free: Vec<usize> = (0..p.len()).filter(|&i| i != anchor).collect();
        let two_alpha = 2.0 * alpha;
        let radial: Vec<f64> = free
            .iter()
            .map(|&i| dist(p.point(i), a).as_f64().powf(two_alpha))
            .collect();
        let k = free.len();
        let cov = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                radial[i]
            } else {
                let d = dist(p.point(free[i]), p.point(free[j])).as_f64().powf(two_alpha);
                0.5 * (radial[i] + radial[j] - d)
            }
        });
        let trace = cov.trace();
        let eig = SymmetricEigen::new(cov);
        let floor = -CLIP_TOL * trace.max(f64::MIN_POSITIVE);
        let mut clipped = 0;
        let mut roots = Vec::with_capacity(k);
        for &lambda in eig.eigenvalues.iter() {
            if lambda < floor {
                return Err(Error::Numeric(format!(
                    "fBm covariance has eigenvalue {lambda:e} below the clipping floor {floor:e}"
                )));
            }
            if lambda < 0.0 {
                clipped += 1;
            }
            roots.push(lambda.max(0.0).sqrt());
        }
        let mut factor = eig.eigenvectors;
        for (j, r) in roots.iter().enumerate() {
            factor.column_mut(j).scale_mut(*r);
        }
        Ok(Self {
            alpha,
            len: p.len(),
            anchor,
            free,
            factor,
            clipped,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// Number of slightly negative eigenvalues that were set to zero.
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped
    }

    /// One scalar field per coordinate, coordinate `i` drawn from random stream `i` of `seed`.
    /// Row `j` holds the image of point `j`; the anchor maps to the origin.
    pub fn sample_fields(&self, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; m]; self.len];
        for c in 0..m {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let z = DVector::from_fn(self.free.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let field = &self.factor * z;
            for (row, &i) in self.free.iter().enumerate() {
                out[i][c] = field[row];
            }
        }
        out
    }

    /// Image of the cloud in `R^m`.
    pub fn sample<T: Scalar>(&self, m: usize, seed: u64) -> Result<PointSet<T>> {
        let rows = self
            .sample_fields(m, seed)
            .into_iter()
            .map(|r| r.into_iter().map(T::lit).collect())
            .collect();
        PointSet::new(m, rows, format!("fbm(alpha={}, m={m}, seed={seed})", self.alpha))
    }
}

/// Image of `p` under an index-`alpha` fBm into `R^m`, anchored at the point nearest the origin.
pub fn fbm_image<T: Scalar>(p: &PointSet<T>, spec: &FbmSpec) -> Result<PointSet<T>> {
    FbmSampler::new(p, spec.alpha)?.sample(spec.m, spec.seed)
}

/// Image under `t -> sign(t) |t|^alpha` in every coordinate, and the smallest constant
/// `c` with `|f(x) - f(y)| <= c |x - y|^alpha` over all pairs of `p`.
pub fn holder_snowflake<T: Scalar>(p: &PointSet<T>, spec: &HolderSpec) -> Result<(PointSet<T>, f64)> {
    let a = spec.alpha;
    let f = |t: T| {
        let v = t.as_f64();
        T::lit(v.signum() * v.abs().powf(a))
    };
    let label = format!("snowflake(alpha={a}) of {}", p.label());
    let image = p.map_points(
        p.ambient_dim(),
        |x, out| {
            for (o, &t) in out.iter_mut().zip(x) {
                *o = f(t);
            }
        },
        label,
    )?;
    // map_points drops repeated images; measure the constant on the full mapping
    let mapped: Vec<Vec<f64>> = p.iter().map(|x| x.iter().map(|&t| f(t).as_f64()).collect()).collect();
    let mut c: f64 = 0.0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            let d = dist(p.point(i), p.point(j)).as_f64();
            let e: f64 = mapped[i]
                .iter()
                .zip(&mapped[j])
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            c = c.max(e / d.powf(a));
        }
    }
    Ok((image, c))
}

/// Which random or deterministic map an image experiment applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ImageMap {
    Fbm(FbmSpec),
    Holder(HolderSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport<T> {
    pub map: ImageMap,
    /// `d(m alpha) / alpha`.
    pub predicted: f64,
    pub profile: DimensionEstimate<T>,
    pub per_seed_dimensions: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    /// Empirical Hölder constant, for deterministic maps.
    pub holder_constant: Option<f64>,
    pub checks: Vec<Check>,
}

/// Compares box dimensions of images of `p` with `d(m alpha) / alpha`.
///
/// The profile is estimated over `source` scales of `p` and image dimensions over
/// `image` scales. For fBm the seeds `spec.seed .. spec.seed + seeds` are averaged and
/// the mean must lie within [`IMAGE_TOL`] of the prediction; a Hölder map is deterministic
/// and only the upper bound is checked.
pub fn image_dimension_experiment<T: Scalar>(
    p: &PointSet<T>,
    map: ImageMap,
    seeds: usize,
    source: &ScaleGrid<T>,
    image: &ScaleGrid<T>,
    opts: &SolverOptions<T>,
) -> Result<ImageReport<T>> {
    let (alpha, m) = match map {
        ImageMap::Fbm(spec) => (spec.alpha, spec.m),
        ImageMap::Holder(spec) => (spec.alpha, p.ambient_dim()),
    };
    let profile = profile_estimate(&capacity_sweep(p, T::lit(m as f64 * alpha), source, opts)?)?;
    let predicted = profile.slope.as_f64() / alpha;

    let (dims, holder_constant) = match map {
        ImageMap::Fbm(spec) => {
            if seeds == 0 {
                return Err(domain("at least one seed is needed"));
            }
            let sampler = FbmSampler::new(p, spec.alpha)?;
            let dims = (0..seeds as u64)
                .map(|k| {
                    let img: PointSet<T> = sampler.sample(spec.m, spec.seed.wrapping_add(k))?;
                    Ok(box_dimension(&img, image)?.slope.as_f64())
                })
                .collect::<Result<Vec<f64>>>()?;
            (dims, None)
        }
        ImageMap::Holder(spec) => {
            let (img, c) = holder_snowflake(p, &spec)?;
            (vec![box_dimension(&img, image)?.slope.as_f64()], Some(c))
        }
    };
    let k = dims.len() as f64;
    let mean = dims.iter().sum::<f64>() / k;
    let stddev = if dims.len() > 1 {
        (dims.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let checks = match map {
        ImageMap::Fbm(_) => vec![Check::expect(
            "mean_image_dimension",
            (mean - predicted).abs() <= IMAGE_TOL,
            format!(
                "mean {mean:.4} over {} seeds vs predicted {predicted:.4} (tolerance {IMAGE_TOL})",
                dims.len()
            ),
        )],
        ImageMap::Holder(_) => vec![Check::expect(
            "holder_upper_bound",
            dims[0] <= predicted + HOLDER_TOL,
            format!(
                "image dimension {:.4} <= predicted {predicted:.4} + {HOLDER_TOL}",
                dims[0]
            ),
        )],
    };
    Ok(ImageReport {
        map,
        predicted,
        profile,
        per_seed_dimensions: dims,
        mean,
        stddev,
        holder_constant,
        checks,
    })
}

/// Sample moments of the increments `X(x_i) - X(x_j)` of the first coordinate over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementStats {
    pub i: usize,
    pub j: usize,
    /// `|x_i - x_j|^(2 alpha)`.
    pub expected_variance: f64,
    /// Mean of the squared increments (the mean is known to be zero).
    pub variance: f64,
    /// Standard error of `variance` under the chi-square law, `expected * sqrt(2 / seeds)`.
    pub stderr: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl IncrementStats {
    /// Distance of the observed variance from the law in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.variance - self.expected_variance) / self.stderr
    }
}

/// Increment statistics for each pair over seeds `base_seed .. base_seed + seeds`.
pub fn increment_statistics<T: Scalar>(
    sampler: &FbmSampler,
    p: &PointSet<T>,
    pairs: &[(usize, usize)],
    seeds: usize,
    base_seed: u64,
) -> Result<Vec<IncrementStats>> {
    if seeds < 2 {
        return Err(domain("increment statistics need at least two seeds"));
    }
    if pairs.iter().any(|&(i, j)| i >= p.len() || j >= p.len() || i == j) {
        return Err(domain("pairs must index distinct points of the cloud"));
    }
    let mut samples = vec![Vec::with_capacity(seeds); pairs.len()];
    for k in 0..seeds as u64 {
        let fields = sampler.sample_fields(1, base_seed.wrapping_add(k));
        for (s, &(i, j)) in samples.iter_mut().zip(pairs) {
            s.push(fields[i][0] - fields[j][0]);
        }
    }
    let n = seeds as f64;
    Ok(pairs
        .iter()
        .zip(&samples)
        .map(|(&(i, j), xs)| {
            let expected = dist(p.point(i), p.point(j)).as_f64().powf(2.0 * sampler.alpha());
            let mean = xs.iter().sum::<f64>() / n;
            let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            IncrementStats {
                i,
                j,
                expected_variance: expected,
                variance: xs.iter().map(|x| x * x).sum::<f64>() / n,
                stderr: expected * (2.0 / n).sqrt(),
                skewness: m3 / m2.powf(1.5),
                excess_kurtosis: m4 / (m2 * m2) - 3.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::Generator;

    #[test]
    fn anchor_maps_to_origin() {
        let p = PointSet::new(1, vec![vec![0.7], vec![0.2], vec![0.9], vec![0.4]], "").unwrap();
        let sampler = FbmSampler::new(&p, 0.5).unwrap();
        assert_eq!(sampler.anchor(), 1);
        for seed in 0..5 {
            let f = sampler.sample_fields(2, seed);
            assert_eq!(f[1], vec![0.0, 0.0]);
        }
    }

    #[test]
    fn same_seed_same_image() {
        let p: PointSet<f64> = Generator::default().grid(1, 33).unwrap();
        let spec = FbmSpec::new(0.3, 2, 9).unwrap();
        assert_eq!(fbm_image(&p, &spec).unwrap(), fbm_image(&p, &spec).unwrap());
    }

    #[test]
    fn budget_and_domain() {
        let p: PointSet<f64> = Generator::default().grid(1, FBM_POINT_BUDGET + 1).unwrap();
        assert!(matches!(FbmSampler::new(&p, 0.5), Err(Error::Size { .. })));
        assert!(FbmSpec::new(1.0, 1, 0).is_err());
        assert!(FbmSpec::new(0.5, 0, 0).is_err());
        assert!(HolderSpec::new(0.0).is_err());
        assert!(HolderSpec::new(1.0).is_ok());
    }

    #[test]
    fn snowflake_examples() {
        let p = PointSet::new(1, vec![vec![0.0], vec![1.0]], "").unwrap();
        for a in [0.2, 0.5, 1.0] {
            let (img, _) = holder_snowflake(&p, &HolderSpec::new(a).unwrap()).unwrap();
            assert_eq!(img.to_rows(), vec![vec![0.0], vec![1.0]]);
        }
        let q = PointSet::new(2, vec![vec![-0.3, 0.25], vec![0.5, 0.125]], "").unwrap();
        let (img, c) = holder_snowflake(&q, &HolderSpec::new(1.0).unwrap()).unwrap();
        assert_eq!(img, q.clone().with_label(img.label()));
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_root_constant_on_a_grid() {
        let p: PointSet<f64> = Generator::default().grid(1, 201).unwrap();
        let (_, c) = holder_snowflake(&p, &HolderSpec::new(0.5).unwrap()).unwrap();
        assert!(c <= 1.0 + 1e-9, "{c}");
    }
}
