//! Finite point clouds standing in for compact sets, their generators and CSV storage.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{contract, domain, Error, Result};
use crate::scalar::{dist_sq, Scalar};

/// Default maximum number of points a generator may produce.
pub const DEFAULT_POINT_BUDGET: usize = 20_000;

/// Scales below this multiple of the median nearest-neighbour distance are refused
/// by every dimension estimator.
pub const GUARD_FACTOR: f64 = 8.0;

/// A nonempty finite subset of `R^n` with pairwise distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T> {
    ambient_dim: usize,
    coords: Vec<T>,
    label: String,
}

impl<T: Scalar> PointSet<T> {
    /// Builds a point set from row vectors, dropping exact duplicates (first occurrence wins).
    pub fn new(ambient_dim: usize, points: Vec<Vec<T>>, label: impl Into<String>) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * ambient_dim);
        for (i, pt) in points.iter().enumerate() {
            if pt.len() != ambient_dim {
                return Err(contract(format!(
                    "point {i} has {} coordinates, expected {ambient_dim}",
                    pt.len()
                )));
            }
            coords.extend_from_slice(pt);
        }
        Self::from_flat(ambient_dim, coords, label)
    }

    /// Builds a point set from row-major coordinates.
    pub fn from_flat(ambient_dim: usize, coords: Vec<T>, label: impl Into<String>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(contract("ambient dimension must be positive"));
        }
        if coords.is_empty() {
            return Err(contract("point set must be nonempty"));
        }
        if coords.len() % ambient_dim != 0 {
            return Err(contract(format!(
                "{} coordinates do not split into points of dimension {ambient_dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(contract("coordinates must be finite"));
        }
        let coords = dedup(ambient_dim, coords);
        Ok(Self {
            ambient_dim,
            coords,
            label: label.into(),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.iter().map(<[T]>::to_vec).collect()
    }

    /// Applies `f` to every point; the image is deduplicated.
    pub fn map_points<F>(&self, out_dim: usize, mut f: F, label: impl Into<String>) -> Result<Self>
    where
        F: FnMut(&[T], &mut [T]),
    {
        let mut coords = vec![T::zero(); self.len() * out_dim];
        for (src, dst) in self.iter().zip(coords.chunks_exact_mut(out_dim)) {
            f(src, dst);
        }
        Self::from_flat(out_dim, coords, label)
    }

    /// Translates every point by `offset`.
    pub fn translate(&self, offset: &[T]) -> Result<Self> {
        if offset.len() != self.ambient_dim {
            return Err(contract("translation dimension mismatch"));
        }
        self.map_points(
            self.ambient_dim,
            |x, y| {
                for ((yi, &xi), &oi) in y.iter_mut().zip(x).zip(offset) {
                    *yi = xi + oi;
                }
            },
            self.label.clone(),
        )
    }

    /// Keeps the first `k` coordinates of every point.
    pub fn leading_coordinates(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.ambient_dim {
            return Err(contract(format!("cannot keep {k} of {} coordinates", self.ambient_dim)));
        }
        self.map_points(k, |x, y| y.copy_from_slice(&x[..k]), self.label.clone())
    }
}

fn dedup<T: Scalar>(dim: usize, coords: Vec<T>) -> Vec<T> {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(coords.len() / dim);
    let mut out = Vec::with_capacity(coords.len());
    for pt in coords.chunks_exact(dim) {
        // +0.0 folds -0.0 onto 0.0 so that equal values share a key
        let key: Vec<u64> = pt.iter().map(|&c| (c.as_f64() + 0.0).to_bits()).collect();
        if seen.insert(key) {
            out.extend_from_slice(pt);
        }
    }
    out
}

/// Diameter and spacing summary of a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionStats<T> {
    pub diameter: T,
    pub median_nn_dist: T,
    pub count: usize,
}

impl<T: Scalar> ResolutionStats<T> {
    /// Smallest scale a dimension estimator may use on this cloud.
    pub fn guard(&self) -> T {
        T::lit(GUARD_FACTOR) * self.median_nn_dist
    }

    /// Fails with a resolution error if `r` undercuts the guard.
    pub fn check_scale(&self, r: T) -> Result<()> {
        let guard = self.guard();
        // relative slack so that r == guard computed two ways is accepted
        if r < guard * (T::one() - T::lit(1e-12)) {
            return Err(Error::Resolution {
                r: r.as_f64(),
                guard: guard.as_f64(),
            });
        }
        Ok(())
    }
}

/// Exact diameter, median nearest-neighbour distance and point count.
pub fn resolution<T: Scalar>(p: &PointSet<T>) -> ResolutionStats<T> {
    let n = p.len();
    if n == 1 {
        return ResolutionStats {
            diameter: T::zero(),
            median_nn_dist: T::zero(),
            count: 1,
        };
    }
    let (diameter, mut nn) = if p.ambient_dim() == 1 {
        resolution_1d(p)
    } else {
        resolution_brute(p)
    };
    nn.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median_nn_dist = if n % 2 == 1 {
        nn[n / 2]
    } else {
        (nn[n / 2 - 1] + nn[n / 2]) / T::lit(2.0)
    };
    ResolutionStats {
        diameter,
        median_nn_dist,
        count: n,
    }
}

fn resolution_1d<T: Scalar>(p: &PointSet<T>) -> (T, Vec<T>) {
    let mut xs: Vec<T> = p.coords().to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let n = xs.len();
    let gaps: Vec<T> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let nn = (0..n)
        .map(|i| match (i.checked_sub(1).map(|j| gaps[j]), gaps.get(i)) {
            (Some(a), Some(&b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => T::zero(),
        })
        .collect();
    (xs[n - 1] - xs[0], nn)
}

fn resolution_brute<T: Scalar>(p: &PointSet<T>) -> (T, Vec<T>) {
    let n = p.len();
    let mut nn_sq = vec![T::infinity(); n];
    let mut diam_sq = T::zero();
    for i in 0..n {
        let xi = p.point(i);
        for j in (i + 1)..n {
            let d2 = dist_sq(xi, p.point(j));
            diam_sq = diam_sq.max(d2);
            if d2 < nn_sq[i] {
                nn_sq[i] = d2;
            }
            if d2 < nn_sq[j] {
                nn_sq[j] = d2;
            }
        }
    }
    (diam_sq.sqrt(), nn_sq.into_iter().map(T::sqrt).collect())
}

/// A contracting similarity `x -> ratio * R x + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Similarity<T> {
    pub ratio: T,
    /// Row-major `n x n` orthogonal matrix.
    pub rotation: Vec<T>,
    pub translation: Vec<T>,
}

impl<T: Scalar> Similarity<T> {
    /// Similarity without rotation.
    pub fn scaling(ratio: T, translation: Vec<T>) -> Self {
        let n = translation.len();
        let mut rotation = vec![T::zero(); n * n];
        for i in 0..n {
            rotation[i * n + i] = T::one();
        }
        Self {
            ratio,
            rotation,
            translation,
        }
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        let n = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.rotation[i * n..(i + 1) * n];
            let rx = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            *o = self.ratio * rx + self.translation[i];
        }
    }
}

/// Iterated function system of similarities on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSystem<T> {
    maps: Vec<Similarity<T>>,
    ambient_dim: usize,
}

impl<T: Scalar> IfsSystem<T> {
    pub fn new(ambient_dim: usize, maps: Vec<Similarity<T>>) -> Result<Self> {
        if ambient_dim == 0 || maps.is_empty() {
            return Err(domain("an IFS needs a positive dimension and at least one map"));
        }
        let tol = T::lit(1e-12);
        for (k, m) in maps.iter().enumerate() {
            if !(m.ratio > T::zero() && m.ratio < T::one()) {
                return Err(domain(format!("map {k}: ratio {} not in (0, 1)", m.ratio)));
            }
            if m.translation.len() != ambient_dim || m.rotation.len() != ambient_dim * ambient_dim {
                return Err(domain(format!("map {k}: shape does not match dimension {ambient_dim}")));
            }
            let n = ambient_dim;
            for i in 0..n {
                for j in 0..n {
                    let dot = (0..n).fold(T::zero(), |acc, l| acc + m.rotation[i * n + l] * m.rotation[j * n + l]);
                    let target = if i == j { T::one() } else { T::zero() };
                    if (dot - target).abs() > tol {
                        return Err(domain(format!("map {k}: rotation is not orthonormal")));
                    }
                }
            }
        }
        Ok(Self { maps, ambient_dim })
    }

    /// Planar system of four corner maps with the given ratio.
    pub fn four_corner(ratio: T) -> Result<Self> {
        let far = T::one() - ratio;
        let z = T::zero();
        let maps = [(z, z), (far, z), (z, far), (far, far)]
            .into_iter()
            .map(|(a, b)| Similarity::scaling(ratio, vec![a, b]))
            .collect();
        Self::new(2, maps)
    }

    pub fn maps(&self) -> &[Similarity<T>] {
        &self.maps
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
}

/// Deterministic fixture generators bounded by a point budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generator {
    pub budget: usize,
}

impl Default for Generator {
    fn default() -> Self {
        Self {
            budget: DEFAULT_POINT_BUDGET,
        }
    }
}

impl Generator {
    pub fn with_budget(budget: usize) -> Self {
        Self { budget }
    }

    fn ensure(&self, what: &'static str, needed: u128) -> Result<()> {
        if needed > self.budget as u128 {
            return Err(Error::Size {
                what,
                needed,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// The `side^n` evenly spaced lattice points of `[0,1]^n`.
    pub fn grid<T: Scalar>(&self, n: usize, side: usize) -> Result<PointSet<T>> {
        if n == 0 || side < 2 {
            return Err(domain("grid needs n >= 1 and side_count >= 2"));
        }
        self.ensure("grid", (side as u128).saturating_pow(n as u32))?;
        let total = side.pow(n as u32);
        let step = T::one() / T::from_count(side - 1);
        let mut coords = Vec::with_capacity(total * n);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            coords.extend(idx.iter().map(|&i| {
                if i == side - 1 {
                    T::one()
                } else {
                    T::from_count(i) * step
                }
            }));
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < side {
                    break;
                }
                idx[d] = 0;
            }
        }
        PointSet::from_flat(n, coords, format!("grid(n={n}, side={side})"))
    }

    /// Left endpoints of the level-`level` intervals of the two-map Cantor set with the given ratio.
    pub fn cantor<T: Scalar>(&self, ratio: T, level: u32) -> Result<PointSet<T>> {
        if !(ratio > T::zero() && ratio <= T::lit(0.5)) {
            return Err(domain(format!("cantor ratio {ratio} not in (0, 1/2]")));
        }
        self.ensure("cantor", 1u128.checked_shl(level).unwrap_or(u128::MAX))?;
        let shift = T::one() - ratio;
        let count = 1usize << level;
        let coords = (0..count)
            .map(|code| {
                // innermost map first: bit 0 of `code` is the last map applied
                (0..level).fold(T::zero(), |x, k| {
                    let bit = (code >> k) & 1;
                    ratio * x + if bit == 1 { shift } else { T::zero() }
                })
            })
            .collect();
        PointSet::from_flat(1, coords, format!("cantor(ratio={ratio}, level={level})"))
    }

    /// All `depth`-fold compositions of the system's maps applied to `seed`,
    /// ordered lexicographically by map index (outermost map first).
    pub fn ifs<T: Scalar>(&self, system: &IfsSystem<T>, depth: u32, seed: &[T]) -> Result<PointSet<T>> {
        let n = system.ambient_dim();
        if seed.len() != n {
            return Err(contract("seed point dimension mismatch"));
        }
        let k = system.maps().len();
        self.ensure("ifs", (k as u128).saturating_pow(depth))?;
        let mut current: Vec<T> = seed.to_vec();
        // build from the innermost map outward; prefixing keeps lexicographic order
        for _ in 0..depth {
            let mut next = vec![T::zero(); current.len() * k];
            let block = current.len();
            for (m, map) in system.maps().iter().enumerate() {
                for (src, dst) in current
                    .chunks_exact(n)
                    .zip(next[m * block..(m + 1) * block].chunks_exact_mut(n))
                {
                    map.apply(src, dst);
                }
            }
            current = next;
        }
        PointSet::from_flat(n, current, format!("ifs(maps={k}, depth={depth})"))
    }

    /// `count` equally spaced points on the unit circle.
    pub fn circle<T: Scalar>(&self, count: usize) -> Result<PointSet<T>> {
        if count == 0 {
            return Err(domain("circle needs at least one point"));
        }
        self.ensure("circle", count as u128)?;
        let step = T::TAU() / T::from_count(count);
        let coords = (0..count)
            .flat_map(|k| {
                let t = step * T::from_count(k);
                [t.cos(), t.sin()]
            })
            .collect();
        PointSet::from_flat(2, coords, format!("circle(count={count})"))
    }

    /// Cartesian product; coordinates of `a` come first.
    pub fn product<T: Scalar>(&self, a: &PointSet<T>, b: &PointSet<T>) -> Result<PointSet<T>> {
        self.ensure("product", a.len() as u128 * b.len() as u128)?;
        let dim = a.ambient_dim() + b.ambient_dim();
        let mut coords = Vec::with_capacity(a.len() * b.len() * dim);
        for x in a.iter() {
            for y in b.iter() {
                coords.extend_from_slice(x);
                coords.extend_from_slice(y);
            }
        }
        PointSet::from_flat(dim, coords, format!("{} x {}", a.label(), b.label()))
    }
}

/// Writes one point per line with 17 significant digits; the label goes in a leading comment.
pub fn write_csv<T: Scalar, W: Write>(p: &PointSet<T>, mut w: W) -> Result<()> {
    let mut line = String::new();
    if !p.label().is_empty() {
        writeln!(w, "# {}", p.label().replace('\n', " "))?;
    }
    for pt in p.iter() {
        line.clear();
        for (i, c) in pt.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{c:.16e}").expect("writing to a String");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses the CSV layout produced by [`write_csv`]. Lines starting with `#` are comments;
/// the first comment before any data is taken as the label.
pub fn read_csv<T: Scalar, R: Read>(r: R) -> Result<PointSet<T>> {
    let reader = BufReader::new(r);
    let mut dim: Option<usize> = None;
    let mut coords = Vec::new();
    let mut label: Option<String> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if dim.is_none() && label.is_none() {
                label = Some(comment.trim().to_string());
            }
            continue;
        }
        let mut row = 0usize;
        for field in trimmed.split(',') {
            let field = field.trim();
            let v: T = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric field {field:?}"),
            })?;
            coords.push(v);
            row += 1;
        }
        match dim {
            None => dim = Some(row),
            Some(d) if d != row => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {d} fields, found {row}"),
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or(Error::Parse {
        line: 0,
        msg: "no data rows".into(),
    })?;
    PointSet::from_flat(dim, coords, label.unwrap_or_default())
}

pub fn save_csv<T: Scalar>(p: &PointSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(p, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<PointSet<T>> {
    read_csv(std::fs::File::open(path)?)
}
