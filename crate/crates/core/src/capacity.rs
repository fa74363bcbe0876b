//! Bounded potential kernel `min{1, (r/|x|)^s}`, energies, potentials and equilibrium measures.
//!
//! Sums over atoms are accumulated in `f64` in index order, so results are reproducible
//! bit for bit and independent of how a caller splits work.

use serde::Serialize;

use crate::error::{contract, domain, BestIterate, Error, Result};
use crate::pointcloud::PointSet;
use crate::scalar::{dist_sq, Scalar};

/// Above this many atoms the kernel matrix is never stored.
pub const DEFAULT_DENSE_LIMIT: usize = 8192;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Iteration cap per atom when no explicit cap is given.
pub const DEFAULT_ITER_PER_ATOM: usize = 200;

/// Exponent `s` and scale `r` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec<T> {
    s: T,
    r: T,
}

#[derive(Debug, Clone, Copy)]
enum PowForm {
    Linear,
    Sqrt,
    General,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(s: T, r: T) -> Result<Self> {
        if !(s > T::zero() && s.is_finite()) {
            return Err(domain(format!("kernel exponent s = {s} must be positive")));
        }
        if !(r > T::zero() && r.is_finite()) {
            return Err(domain(format!("kernel scale r = {r} must be positive")));
        }
        Ok(Self { s, r })
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn r(&self) -> T {
        self.r
    }

    fn pow_form(&self) -> PowForm {
        if self.s == T::lit(2.0) {
            PowForm::Linear
        } else if self.s == T::one() {
            PowForm::Sqrt
        } else {
            PowForm::General
        }
    }

    /// Kernel value for a squared distance.
    #[inline]
    pub fn at_dist_sq(&self, d2: T) -> T {
        let r2 = self.r * self.r;
        if d2 <= r2 {
            T::one()
        } else {
            (r2 / d2).powf(self.s / T::lit(2.0))
        }
    }

    /// Kernel value at displacement `x`.
    pub fn value(&self, x: &[T]) -> T {
        let d2 = x.iter().fold(T::zero(), |acc, &v| acc + v * v);
        self.at_dist_sq(d2)
    }
}

/// `min{1, (r/|x|)^s}`; equals 1 whenever `|x| <= r`.
pub fn kernel_value<T: Scalar>(k: &KernelSpec<T>, x: &[T]) -> T {
    k.value(x)
}

/// Specialised evaluation used in the hot loops.
#[derive(Debug, Clone, Copy)]
struct FastKernel<T> {
    r2: T,
    half_s: T,
    form: PowForm,
}

impl<T: Scalar> FastKernel<T> {
    fn new(k: &KernelSpec<T>) -> Self {
        Self {
            r2: k.r * k.r,
            half_s: k.s / T::lit(2.0),
            form: k.pow_form(),
        }
    }

    #[inline(always)]
    fn eval(&self, d2: T) -> T {
        if d2 <= self.r2 {
            return T::one();
        }
        let q = self.r2 / d2;
        match self.form {
            PowForm::Linear => q,
            PowForm::Sqrt => q.sqrt(),
            PowForm::General => q.powf(self.half_s),
        }
    }
}

/// Probability weights aligned with the atoms of a point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(contract("weight vector must be nonempty"));
        }
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(contract("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().map(|w| w.as_f64()).sum();
        if (sum - 1.0).abs() > sum_tolerance::<T>(weights.len()) {
            return Err(contract(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![T::one() / T::from_count(n); n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut w = vec![T::zero(); n];
        w[at] = T::one();
        Self(w)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

fn sum_tolerance<T: Scalar>(n: usize) -> f64 {
    1e-12f64.max(4.0 * n as f64 * T::epsilon().as_f64())
}

fn check_aligned<T: Scalar>(p: &PointSet<T>, w: &WeightVector<T>) -> Result<()> {
    if p.len() != w.len() {
        return Err(contract(format!("{} weights for {} atoms", w.len(), p.len())));
    }
    Ok(())
}

/// `sum_j w_j phi(x - p_j)`.
pub fn potential<T: Scalar>(p: &PointSet<T>, w: &WeightVector<T>, k: &KernelSpec<T>, x: &[T]) -> Result<T> {
    check_aligned(p, w)?;
    if x.len() != p.ambient_dim() {
        return Err(contract("evaluation point dimension mismatch"));
    }
    let fk = FastKernel::new(k);
    let acc: f64 = p
        .iter()
        .zip(w.as_slice())
        .map(|(y, &wy)| wy.as_f64() * fk.eval(dist_sq(x, y)).as_f64())
        .sum();
    Ok(T::lit(acc))
}

/// Potentials of `w` at every atom of `p`, computed without storing the kernel matrix.
pub fn atom_potentials<T: Scalar>(p: &PointSet<T>, w: &WeightVector<T>, k: &KernelSpec<T>) -> Result<Vec<T>> {
    check_aligned(p, w)?;
    Ok(potentials_matrix_free(p, &FastKernel::new(k), w.as_slice()))
}

/// `sum_i sum_j w_i w_j phi(p_i - p_j)`, matrix free.
pub fn energy<T: Scalar>(p: &PointSet<T>, w: &WeightVector<T>, k: &KernelSpec<T>) -> Result<T> {
    let pot = atom_potentials(p, w, k)?;
    Ok(T::lit(dot(w.as_slice(), &pot)))
}

/// Relative duality gap `2 (E - min_j U_j) / E`; zero exactly at the discrete equilibrium.
pub fn certificate_gap<T: Scalar>(p: &PointSet<T>, k: &KernelSpec<T>, w: &WeightVector<T>) -> Result<T> {
    let pot = atom_potentials(p, w, k)?;
    let e = dot(w.as_slice(), &pot);
    let min = pot.iter().map(|v| v.as_f64()).fold(f64::INFINITY, f64::min);
    Ok(T::lit((2.0 * (e - min) / e).max(0.0)))
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum()
}

fn potentials_matrix_free<T: Scalar>(p: &PointSet<T>, fk: &FastKernel<T>, w: &[T]) -> Vec<T> {
    let n = p.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let xi = p.point(i);
        let mut acc = 0.0f64;
        for (j, &wj) in w.iter().enumerate() {
            if wj > T::zero() {
                acc += wj.as_f64() * fk.eval(dist_sq(xi, p.point(j))).as_f64();
            }
        }
        out.push(T::lit(acc));
    }
    out
}

/// Kernel matrix access, cached when small enough.
enum KernelOperator<'a, T> {
    Dense { n: usize, data: Vec<T> },
    MatrixFree { p: &'a PointSet<T>, fk: FastKernel<T> },
}

impl<'a, T: Scalar> KernelOperator<'a, T> {
    fn new(p: &'a PointSet<T>, k: &KernelSpec<T>, dense_limit: usize) -> Self {
        let fk = FastKernel::new(k);
        let n = p.len();
        if n > dense_limit {
            return Self::MatrixFree { p, fk };
        }
        let mut data = vec![T::one(); n * n];
        for i in 0..n {
            let xi = p.point(i);
            for j in (i + 1)..n {
                let v = fk.eval(dist_sq(xi, p.point(j)));
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::Dense { n, data }
    }

    fn entry(&self, i: usize, j: usize) -> T {
        match self {
            Self::Dense { n, data } => data[i * n + j],
            Self::MatrixFree { p, fk } => fk.eval(dist_sq(p.point(i), p.point(j))),
        }
    }

    /// Adds `step * (K[:, plus] - K[:, minus])` to `pot`.
    fn shift(&self, pot: &mut [T], plus: usize, minus: usize, step: T) {
        match self {
            Self::Dense { n, data } => {
                // symmetric: column == row
                let rp = &data[plus * n..(plus + 1) * n];
                let rm = &data[minus * n..(minus + 1) * n];
                for ((u, &a), &b) in pot.iter_mut().zip(rp).zip(rm) {
                    *u = *u + step * (a - b);
                }
            }
            Self::MatrixFree { p, fk } => {
                let xp = p.point(plus);
                let xm = p.point(minus);
                for (i, u) in pot.iter_mut().enumerate() {
                    let xi = p.point(i);
                    let a = fk.eval(dist_sq(xi, xp));
                    let b = fk.eval(dist_sq(xi, xm));
                    *u = *u + step * (a - b);
                }
            }
        }
    }

    fn potentials(&self, w: &[T]) -> Vec<T> {
        match self {
            Self::Dense { n, data } => data.chunks_exact(*n).map(|row| T::lit(dot(row, w))).collect(),
            Self::MatrixFree { p, fk } => potentials_matrix_free(p, fk, w),
        }
    }
}

/// Stopping and sizing controls for [`equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Relative duality gap at which the solver stops.
    pub tol: T,
    /// Iteration cap; `None` means 200 per atom.
    pub max_iter: Option<usize>,
    /// Largest atom count for which the kernel matrix is cached.
    pub dense_limit: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iter: None,
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return Err(domain(format!("tolerance {} not in (0, 1)", self.tol)));
        }
        Ok(())
    }
}

/// Energy-minimising probability weights and the capacity they certify.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult<T> {
    pub weights: WeightVector<T>,
    pub energy: T,
    pub capacity: T,
    pub gap: T,
    pub iterations: usize,
}

struct State<T> {
    w: Vec<T>,
    pot: Vec<T>,
    energy: f64,
}

impl<T: Scalar> State<T> {
    fn refresh(&mut self, op: &KernelOperator<'_, T>) {
        let sum: f64 = self.w.iter().map(|v| v.as_f64()).sum();
        for v in &mut self.w {
            *v = T::lit(v.as_f64() / sum);
        }
        self.pot = op.potentials(&self.w);
        self.energy = dot(&self.w, &self.pot);
    }

    /// (argmin potential, argmax potential over the support, largest potential excess
    /// over atoms heavier than `heavy`).
    fn extremes(&self, heavy: T) -> (usize, usize, f64) {
        let mut jmin = 0;
        let mut amax = usize::MAX;
        let mut excess = f64::NEG_INFINITY;
        for (i, (&u, &wi)) in self.pot.iter().zip(&self.w).enumerate() {
            if u < self.pot[jmin] {
                jmin = i;
            }
            if wi > T::zero() && (amax == usize::MAX || u > self.pot[amax]) {
                amax = i;
            }
            if wi > heavy {
                excess = excess.max(u.as_f64() - self.energy);
            }
        }
        (jmin, amax, excess)
    }

    fn gap(&self, jmin: usize) -> f64 {
        (2.0 * (self.energy - self.pot[jmin].as_f64()) / self.energy).max(0.0)
    }

    fn best(&self, iterations: usize) -> BestIterate {
        let (j, _, _) = self.extremes(T::one());
        BestIterate {
            weights: self.w.iter().map(|v| v.as_f64()).collect(),
            energy: self.energy,
            gap: self.gap(j),
            iterations,
        }
    }
}

/// Minimises the kernel energy over probability weights on the atoms of `p`.
///
/// Conditional gradient started from uniform weights. Each iteration finds the atom of
/// minimal potential and moves mass onto it from the heaviest-potential atom of the
/// current support, with the exact quadratic line search. Stops once the relative
/// duality gap is at most `tol` and every atom of weight above `tol` has potential
/// within `tol * energy` of the energy; both are checked on freshly recomputed
/// potentials.
pub fn equilibrium<T: Scalar>(
    p: &PointSet<T>,
    k: &KernelSpec<T>,
    opts: &SolverOptions<T>,
) -> Result<EquilibriumResult<T>> {
    opts.validate()?;
    let n = p.len();
    let max_iter = opts.max_iter.unwrap_or(DEFAULT_ITER_PER_ATOM * n);
    if n == 1 {
        return Ok(EquilibriumResult {
            weights: WeightVector::point_mass(1, 0),
            energy: T::one(),
            capacity: T::one(),
            gap: T::zero(),
            iterations: 0,
        });
    }
    let op = KernelOperator::new(p, k, opts.dense_limit);
    let mut st = State {
        w: WeightVector::<T>::uniform(n).into_inner(),
        pot: Vec::new(),
        energy: 0.0,
    };
    st.refresh(&op);
    let tol = opts.tol.as_f64();
    let refresh_every = n.max(256);
    let mut since_refresh = 0usize;
    let mut iter = 0usize;

    loop {
        let (j, a, excess) = st.extremes(opts.tol);
        let gap = st.gap(j);
        if gap <= tol && excess <= tol * st.energy {
            if since_refresh == 0 {
                break;
            }
            st.refresh(&op);
            since_refresh = 0;
            continue;
        }
        if iter >= max_iter {
            return Err(Error::Convergence {
                best: Box::new(st.best(iter)),
                scale: None,
            });
        }
        iter += 1;

        let delta = st.pot[a] - st.pot[j];
        let curvature = T::lit(2.0) * (T::one() - op.entry(a, j));
        let w_a = st.w[a];
        let step = if curvature > T::zero() {
            (delta / curvature).min(w_a)
        } else {
            w_a
        };
        if step <= T::zero() {
            // potentials have drifted below resolution; resynchronise
            st.refresh(&op);
            since_refresh = 0;
            continue;
        }
        st.w[j] = st.w[j] + step;
        st.w[a] = if step == w_a { T::zero() } else { w_a - step };
        op.shift(&mut st.pot, j, a, step);
        st.energy = dot(&st.w, &st.pot);
        since_refresh += 1;
        if since_refresh >= refresh_every {
            st.refresh(&op);
            since_refresh = 0;
        }
    }

    let (j, _, _) = st.extremes(T::one());
    let gap = st.gap(j);
    let energy = T::lit(st.energy);
    Ok(EquilibriumResult {
        weights: WeightVector(st.w),
        energy,
        capacity: T::one() / energy,
        gap: T::lit(gap),
        iterations: iter,
    })
}
