//! The semigroup `e^{-tA}`, `A = -b Laplacian`, with complex coefficient `b`.
//!
//! Three realisations are available:
//!
//! * `Fourier`: periodic box, constant `b`; multiplies DFT coefficients by
//!   `exp(-t b |k|^2)` with `k = pi m / R`. Spectrally exact on the torus.
//! * `Kernel`: free space, constant `b`; discrete convolution with the heat
//!   kernel on a zero-padded `(2n)^d` grid, cropped back to the box. When the
//!   sampled kernel is narrower than a few cells it is replaced by its
//!   band-limited counterpart `exp(-t b xi^2)` (which tends to a discrete
//!   delta instead of blowing up).
//! * `Dense`: any `b`, small grids; matrix exponential of the periodic
//!   centered-difference operator `-diag(b) Laplacian_h`.
//!
//! All three are diagonal or matrix operators on a transform-space
//! representation; [`Plan`] exposes that structure to the Duhamel solver.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fft::{crop, pad, FftNd};
use crate::field::{lorentz_norm, Field, GridSpec, LorentzExponents};
use crate::fit::loglog_fit;
use crate::quadrature::HistoryQuadrature;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Largest grid handled by the dense backend.
pub const DENSE_MAX_POINTS: usize = 4096;

/// Diffusion coefficient with `Re b >= delta > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant { b: C, delta: f64 },
    Variable { b: Field, delta: f64 },
}

impl Coefficient {
    pub fn constant(b: C, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(b.re.is_finite() && b.im.is_finite()) {
            return invalid("coefficient must be finite");
        }
        if b.re < delta {
            return Err(Error::Constraint(format!(
                "Re b >= delta violated: Re b = {}, delta = {delta}",
                b.re
            )));
        }
        Ok(Coefficient::Constant { b, delta })
    }

    pub fn variable(b: Field, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if let Some(v) = b.values().iter().find(|v| v.re < delta) {
            return Err(Error::Constraint(format!(
                "Re b >= delta violated: Re b = {}, delta = {delta}",
                v.re
            )));
        }
        Ok(Coefficient::Variable { b, delta })
    }

    pub fn delta(&self) -> f64 {
        match self {
            Coefficient::Constant { delta, .. } | Coefficient::Variable { delta, .. } => *delta,
        }
    }

    pub fn constant_value(&self) -> Option<C> {
        match self {
            Coefficient::Constant { b, .. } => Some(*b),
            Coefficient::Variable { .. } => None,
        }
    }

    /// `sup |b|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Coefficient::Constant { b, .. } => b.norm(),
            Coefficient::Variable { b, .. } => b.sup_abs(),
        }
    }

    /// The conjugate coefficient `b-bar`.
    pub fn conj(&self) -> Self {
        match self {
            Coefficient::Constant { b, delta } => Coefficient::Constant {
                b: b.conj(),
                delta: *delta,
            },
            Coefficient::Variable { b, delta } => Coefficient::Variable {
                b: Field::from_values(*b.grid(), b.values().iter().map(|v| v.conj()).collect())
                    .expect("conjugation keeps values finite"),
                delta: *delta,
            },
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Constraint(format!(
            "delta > 0 violated: delta = {delta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Fourier,
    Kernel,
    Dense,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Fourier => "fourier",
            Backend::Kernel => "kernel",
            Backend::Dense => "dense",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(Backend::Fourier),
            "kernel" => Ok(Backend::Kernel),
            "dense" => Ok(Backend::Dense),
            _ => invalid(format!(
                "unknown backend '{s}' (expected fourier, kernel or dense)"
            )),
        }
    }
}

/// Coefficient, backend and grid of one realisation of `e^{-tA}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSpec {
    coeff: Coefficient,
    backend: Backend,
    grid: GridSpec,
    adjoint: bool,
}

impl SemigroupSpec {
    pub fn new(coeff: Coefficient, backend: Backend, grid: GridSpec) -> Result<Self> {
        match (&coeff, backend) {
            (Coefficient::Variable { .. }, Backend::Fourier | Backend::Kernel) => {
                return Err(Error::Backend(format!(
                    "the {} backend needs a constant coefficient",
                    backend.name()
                )))
            }
            (Coefficient::Variable { b, .. }, Backend::Dense) if *b.grid() != grid => {
                return Err(Error::GridMismatch(
                    "coefficient field is not on the semigroup grid".into(),
                ))
            }
            _ => {}
        }
        if backend == Backend::Dense && grid.len() > DENSE_MAX_POINTS {
            return Err(Error::Backend(format!(
                "the dense backend is limited to {DENSE_MAX_POINTS} points, grid has {}",
                grid.len()
            )));
        }
        Ok(Self {
            coeff,
            backend,
            grid,
            adjoint: false,
        })
    }

    pub fn coeff(&self) -> &Coefficient {
        &self.coeff
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// The adjoint semigroup `e^{-tA'}`: conjugated coefficient, and for the
    /// dense backend the conjugate-transposed matrix.
    pub fn dual(&self) -> Self {
        Self {
            coeff: self.coeff.conj(),
            backend: self.backend,
            grid: self.grid,
            adjoint: !self.adjoint,
        }
    }
}

/// A linear operator on the transform-space representation.
#[derive(Debug, Clone)]
pub(crate) enum Op {
    Diag(Vec<C>),
    Mat(DMatrix<C>),
}

impl Op {
    /// `acc += c * op(rep)`.
    pub(crate) fn apply_acc(&self, rep: &[C], c: C, acc: &mut [C]) {
        match self {
            Op::Diag(d) => {
                for ((a, x), m) in acc.iter_mut().zip(rep).zip(d) {
                    *a += c * m * x;
                }
            }
            Op::Mat(mat) => {
                let x = DVector::from_column_slice(rep);
                let y = mat * x;
                for (a, v) in acc.iter_mut().zip(y.iter()) {
                    *a += c * v;
                }
            }
        }
    }

    pub(crate) fn apply(&self, rep: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; rep.len()];
        self.apply_acc(rep, ONE, &mut out);
        out
    }

    /// `self += w * other`.
    pub(crate) fn add_scaled(&mut self, other: &Op, w: f64) {
        match (self, other) {
            (Op::Diag(a), Op::Diag(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y * w),
            (Op::Mat(a), Op::Mat(b)) => *a += b * C::new(w, 0.0),
            _ => unreachable!("operators of one plan share a kind"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpectralKind {
    Periodic,
    FreeSpace,
}

pub(crate) struct SpectralPlan {
    kind: SpectralKind,
    grid: GridSpec,
    b: C,
    /// Transform size per axis: `n` (periodic) or `2n` (zero padded).
    m: usize,
    fft: FftNd,
    /// Angular wavenumber of each transform index along one axis.
    xi: Vec<f64>,
}

impl SpectralPlan {
    fn new(kind: SpectralKind, grid: GridSpec, b: C) -> Self {
        let n = grid.points_per_axis();
        let m = if kind == SpectralKind::Periodic {
            n
        } else {
            2 * n
        };
        let period = m as f64 * grid.spacing();
        let xi = (0..m)
            .map(|j| {
                let jj = if j < m / 2 {
                    j as f64
                } else {
                    j as f64 - m as f64
                };
                2.0 * PI * jj / period
            })
            .collect();
        Self {
            kind,
            grid,
            b,
            m,
            fft: FftNd::new(m, grid.dim()),
            xi,
        }
    }

    /// One-dimensional symbol of `e^{-sA}` along an axis.
    fn axis_symbol(&self, s: f64) -> Vec<C> {
        if s == 0.0 {
            return vec![ONE; self.m];
        }
        let h = self.grid.spacing();
        let resolved = s * self.b.re * (PI / h).powi(2) >= 36.0;
        if self.kind == SpectralKind::Periodic || !resolved {
            return self
                .xi
                .iter()
                .map(|x| (-self.b * s * x * x).exp())
                .collect();
        }
        // sampled free-space kernel, truncated to offsets |x| < 2R
        let n = self.grid.points_per_axis() as isize;
        let four_bs = 4.0 * self.b * s;
        let amp = (PI * four_bs).powf(-0.5) * h;
        let mut g: Vec<C> = (0..self.m as isize)
            .map(|j| {
                let off = if j < n { j } else { j - 2 * n } as f64 * h;
                amp * (-(off * off) / four_bs).exp()
            })
            .collect();
        let plan = FftNd::new(self.m, 1);
        plan.forward(&mut g);
        g
    }

    fn op(&self, s: f64) -> Vec<C> {
        let sym = self.axis_symbol(s);
        let m = self.m;
        match self.grid.dim() {
            1 => sym,
            2 => {
                let mut out = Vec::with_capacity(m * m);
                for a in &sym {
                    out.extend(sym.iter().map(|b| a * b));
                }
                out
            }
            _ => {
                let mut out = Vec::with_capacity(m * m * m);
                for a in &sym {
                    for b in &sym {
                        let ab = a * b;
                        out.extend(sym.iter().map(|c| ab * c));
                    }
                }
                out
            }
        }
    }

    fn to_rep(&self, u: &[C]) -> Vec<C> {
        let mut data = match self.kind {
            SpectralKind::Periodic => u.to_vec(),
            SpectralKind::FreeSpace => pad(u, self.grid.points_per_axis(), self.m, self.grid.dim()),
        };
        self.fft.forward(&mut data);
        data
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_rep(&self, mut rep: Vec<C>) -> Vec<C> {
        self.fft.inverse(&mut rep);
        match self.kind {
            SpectralKind::Periodic => rep,
            SpectralKind::FreeSpace => {
                crop(&rep, self.grid.points_per_axis(), self.m, self.grid.dim())
            }
        }
    }
}

pub(crate) struct DensePlan {
    a: DMatrix<C>,
}

impl DensePlan {
    fn new(spec: &SemigroupSpec) -> Self {
        let g = spec.grid;
        let len = g.len();
        let n = g.points_per_axis();
        let h2 = g.spacing() * g.spacing();
        let mut lap = DMatrix::<C>::zeros(len, len);
        for i in 0..len {
            let idx = g.unflatten(i);
            lap[(i, i)] -= C::new(2.0 * g.dim() as f64 / h2, 0.0);
            for axis in 0..g.dim() {
                for step in [1, n - 1] {
                    let mut j = idx;
                    j[axis] = (j[axis] + step) % n;
                    lap[(i, g.flatten(&j[..g.dim()]))] += C::new(1.0 / h2, 0.0);
                }
            }
        }
        let b: Vec<C> = match &spec.coeff {
            Coefficient::Constant { b, .. } => vec![*b; len],
            Coefficient::Variable { b, .. } => b.values().to_vec(),
        };
        let db = DMatrix::from_diagonal(&DVector::from_vec(b));
        // the coefficient already holds b-bar for the adjoint
        let a = if spec.adjoint {
            -(&lap * &db)
        } else {
            -(&db * &lap)
        };
        Self { a }
    }

    fn op(&self, s: f64) -> DMatrix<C> {
        if s == 0.0 {
            return DMatrix::identity(self.a.nrows(), self.a.ncols());
        }
        (&self.a * C::new(-s, 0.0)).exp()
    }
}

/// Prepared realisation of `e^{-tA}` for repeated use.
pub(crate) enum Plan {
    Spectral(SpectralPlan),
    Dense(DensePlan),
}

impl Plan {
    pub(crate) fn new(spec: &SemigroupSpec) -> Self {
        match (spec.backend, spec.coeff.constant_value()) {
            (Backend::Fourier, Some(b)) => {
                Plan::Spectral(SpectralPlan::new(SpectralKind::Periodic, spec.grid, b))
            }
            (Backend::Kernel, Some(b)) => {
                Plan::Spectral(SpectralPlan::new(SpectralKind::FreeSpace, spec.grid, b))
            }
            _ => Plan::Dense(DensePlan::new(spec)),
        }
    }

    pub(crate) fn to_rep(&self, u: &[C]) -> Vec<C> {
        match self {
            Plan::Spectral(p) => p.to_rep(u),
            Plan::Dense(_) => u.to_vec(),
        }
    }

    #[allow(clippy::wrong_self_convention)]
    pub(crate) fn from_rep(&self, rep: Vec<C>) -> Vec<C> {
        match self {
            Plan::Spectral(p) => p.from_rep(rep),
            Plan::Dense(_) => rep,
        }
    }

    pub(crate) fn rep_len(&self) -> usize {
        match self {
            Plan::Spectral(p) => p.fft.len(),
            Plan::Dense(d) => d.a.nrows(),
        }
    }

    pub(crate) fn op(&self, s: f64) -> Op {
        match self {
            Plan::Spectral(p) => Op::Diag(p.op(s)),
            Plan::Dense(d) => Op::Mat(d.op(s)),
        }
    }

    pub(crate) fn zero_op(&self) -> Op {
        match self {
            Plan::Spectral(p) => Op::Diag(vec![ZERO; p.fft.len()]),
            Plan::Dense(d) => Op::Mat(DMatrix::zeros(d.a.nrows(), d.a.ncols())),
        }
    }

    /// `e^{-sA} u` in physical space.
    pub(crate) fn apply(&self, s: f64, u: &[C]) -> Vec<C> {
        match self {
            Plan::Dense(d) => {
                let y = d.op(s) * DVector::from_column_slice(u);
                y.iter().copied().collect()
            }
            Plan::Spectral(_) => self.from_rep(self.op(s).apply(&self.to_rep(u))),
        }
    }
}

/// `e^{-tA} u`. `t = 0` returns `u` unchanged.
pub fn apply(spec: &SemigroupSpec, t: f64, u: &Field) -> Result<Field> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    if *u.grid() != spec.grid {
        return Err(Error::GridMismatch(
            "field is not on the semigroup grid".into(),
        ));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    Field::from_values(spec.grid, Plan::new(spec).apply(t, u.values()))
}

/// `A e^{-tA} u` on the periodic backend (multiplier `b|k|^2 e^{-tb|k|^2}`).
pub fn apply_generator(spec: &SemigroupSpec, t: f64, u: &Field) -> Result<Field> {
    let Plan::Spectral(p) = Plan::new(spec) else {
        return Err(Error::Backend(
            "the generator is only available on spectral backends".into(),
        ));
    };
    if p.kind != SpectralKind::Periodic {
        return Err(Error::Backend(
            "the generator is only available on the fourier backend".into(),
        ));
    }
    if *u.grid() != spec.grid {
        return Err(Error::GridMismatch(
            "field is not on the semigroup grid".into(),
        ));
    }
    let mut rep = p.to_rep(u.values());
    let m = p.m;
    for (i, v) in rep.iter_mut().enumerate() {
        let mut k2 = 0.0;
        let mut rem = i;
        for _ in 0..spec.grid.dim() {
            let x = p.xi[rem % m];
            k2 += x * x;
            rem /= m;
        }
        let z = p.b * k2;
        *v *= z * (-z * t).exp();
    }
    Field::from_values(spec.grid, p.from_rep(rep))
}

/// Heat kernel `(4 pi b t)^{-d/2} exp(-|x-y|^2 / (4bt))`, principal branch.
pub fn kernel_eval(coeff: &Coefficient, t: f64, x: &[f64], y: &[f64]) -> Result<C> {
    let Some(b) = coeff.constant_value() else {
        return Err(Error::Backend(
            "no closed-form kernel for a variable coefficient".into(),
        ));
    };
    if !(t > 0.0) {
        return invalid(format!("kernel time must be positive, got {t}"));
    }
    if x.len() != y.len() || x.is_empty() {
        return invalid("kernel points must share a positive dimension");
    }
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let d = x.len() as f64;
    Ok((4.0 * PI * b * t).powf(-d / 2.0) * (-r2 / (4.0 * b * t)).exp())
}

/// Constants `(M, a)` of `|K(t,x,y)| <= M t^{-d/2} exp(-a |x-y|^2 / t)`.
/// For constant `b` the bound holds with equality.
pub fn gaussian_bound_constants(b: C, d: usize) -> (f64, f64) {
    (
        (4.0 * PI * b).norm().powf(-(d as f64) / 2.0),
        (1.0 / (4.0 * b)).re,
    )
}

/// Random tensor-product `cos^2` bumps used as compactly supported inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFamily {
    /// Centers are uniform in `[-c, c]^d`.
    pub center_half_range: f64,
    /// Half-widths are uniform in `[lo, hi]` per axis.
    pub width_lo: f64,
    pub width_hi: f64,
    /// Multiply the half-widths by `sqrt(t)`, so inputs track the diffusion length.
    pub scale_with_sqrt_t: bool,
}

impl Default for BumpFamily {
    fn default() -> Self {
        Self {
            center_half_range: 0.5,
            width_lo: 0.5,
            width_hi: 2.0,
            scale_with_sqrt_t: true,
        }
    }
}

impl BumpFamily {
    /// Bump drawn from `ChaCha8Rng::seed_from_u64(seed)`, scaled for time `t`.
    pub fn draw(&self, grid: &GridSpec, seed: u64, t: f64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = grid.dim();
        let c = self.center_half_range;
        let centers: Vec<f64> = (0..d).map(|_| rng.random_range(-c..=c)).collect();
        let scale = if self.scale_with_sqrt_t {
            t.sqrt()
        } else {
            1.0
        };
        let widths: Vec<f64> = (0..d)
            .map(|_| rng.random_range(self.width_lo..=self.width_hi) * scale)
            .collect();
        bump(grid, &centers, &widths)
    }
}

/// `prod_i cos^2(pi (x_i - c_i) / (2 w_i))` on `|x_i - c_i| < w_i`, zero outside.
pub fn bump(grid: &GridSpec, centers: &[f64], widths: &[f64]) -> Field {
    let n = grid.points_per_axis();
    let profiles: Vec<Vec<f64>> = (0..grid.dim())
        .map(|a| {
            (0..n)
                .map(|j| {
                    let z = grid.axis_coord(j) - centers[a];
                    if z.abs() < widths[a] {
                        (PI * z / (2.0 * widths[a])).cos().powi(2)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let values = (0..grid.len())
        .map(|i| {
            let idx = grid.unflatten(i);
            C::new((0..grid.dim()).map(|a| profiles[a][idx[a]]).product(), 0.0)
        })
        .collect();
    Field::from_values(*grid, values).expect("bump values are finite")
}

/// Measured `L^p -> L^q` smoothing of the semigroup over time.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingReport {
    pub input: LorentzExponents,
    pub output: LorentzExponents,
    pub t_samples: Vec<f64>,
    /// Largest ratio `||e^{-tA}u||_out / ||u||_in` over the trials at each time.
    pub norms: Vec<f64>,
    pub fitted_exponent: f64,
    pub fitted_constant: f64,
}

/// [`smoothing_measurement_multi`] for a single output space with the default
/// bump family.
pub fn smoothing_measurement(
    spec: &SemigroupSpec,
    p_in: LorentzExponents,
    p_out: LorentzExponents,
    t_samples: &[f64],
    trials: usize,
    rng_seed: u64,
) -> Result<SmoothingReport> {
    let mut r = smoothing_measurement_multi(
        spec,
        p_in,
        &[p_out],
        t_samples,
        trials,
        rng_seed,
        &BumpFamily::default(),
    )?;
    Ok(r.remove(0))
}

/// Measures several output norms from the same semigroup applications.
///
/// Trial `k` uses `ChaCha8Rng::seed_from_u64(rng_seed + k)` at every time, so
/// the same bump shapes (rescaled) are reused across `t_samples`.
pub fn smoothing_measurement_multi(
    spec: &SemigroupSpec,
    p_in: LorentzExponents,
    p_outs: &[LorentzExponents],
    t_samples: &[f64],
    trials: usize,
    rng_seed: u64,
    family: &BumpFamily,
) -> Result<Vec<SmoothingReport>> {
    if t_samples.len() < 2 || t_samples[0] <= 0.0 || t_samples.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("time samples must be positive and strictly increasing");
    }
    if t_samples[t_samples.len() - 1] < 10.0 * t_samples[0] {
        return invalid("time samples must span at least one decade");
    }
    if trials == 0 {
        return invalid("at least one trial is needed");
    }
    if let Some(e) = p_outs.iter().find(|e| e.p() < p_in.p()) {
        return invalid(format!(
            "output exponent {} is below the input exponent {}",
            e.p(),
            p_in.p()
        ));
    }
    let plan = Plan::new(spec);
    let grid = spec.grid;
    let mut norms = vec![vec![0.0; t_samples.len()]; p_outs.len()];
    for (ti, &t) in t_samples.iter().enumerate() {
        let op = plan.op(t);
        let ratios: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let u = family.draw(&grid, rng_seed.wrapping_add(k as u64), t);
                let nu = lorentz_norm(&u, p_in);
                let v = plan.from_rep(op.apply(&plan.to_rep(u.values())));
                let sorted = crate::field::rearrange(&v);
                p_outs
                    .iter()
                    .map(|e| {
                        crate::field::lorentz_norm_sorted(&sorted, grid.cell_volume(), *e) / nu
                    })
                    .collect()
            })
            .collect();
        for row in ratios {
            for (j, r) in row.into_iter().enumerate() {
                norms[j][ti] = f64::max(norms[j][ti], r);
            }
        }
    }
    p_outs
        .iter()
        .zip(norms)
        .map(|(e, n)| {
            let fit = loglog_fit(t_samples, &n)?;
            Ok(SmoothingReport {
                input: p_in,
                output: *e,
                t_samples: t_samples.to_vec(),
                norms: n,
                fitted_exponent: fit.slope,
                fitted_constant: fit.constant(),
            })
        })
        .collect()
}

/// `int_0^H ||e^{-tA'} psi||_{X'} dt` on the default graded mesh.
pub fn dual_time_integral(
    spec: &SemigroupSpec,
    psi: &Field,
    dual_x: LorentzExponents,
    h: f64,
) -> Result<f64> {
    dual_time_integral_with(spec, psi, dual_x, &HistoryQuadrature::with_defaults(h)?)
}

/// [`dual_time_integral`] on a caller-supplied mesh.
pub fn dual_time_integral_with(
    spec: &SemigroupSpec,
    psi: &Field,
    dual_x: LorentzExponents,
    quad: &HistoryQuadrature,
) -> Result<f64> {
    if *psi.grid() != spec.grid {
        return Err(Error::GridMismatch(
            "test function is not on the semigroup grid".into(),
        ));
    }
    let dual = spec.dual();
    let plan = Plan::new(&dual);
    let rep = plan.to_rep(psi.values());
    let cells = quad.cells()?;
    let terms: Vec<f64> = cells
        .par_iter()
        .map(|c| {
            let v = plan.from_rep(plan.op(c.s()).apply(&rep));
            let sorted = crate::field::rearrange(&v);
            c.weight() * crate::field::lorentz_norm_sorted(&sorted, spec.grid.cell_volume(), dual_x)
        })
        .collect();
    Ok(terms.into_iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(backend: Backend, d: usize, n: usize, r: f64, b: C) -> SemigroupSpec {
        let g = GridSpec::new(d, n, r).unwrap();
        SemigroupSpec::new(Coefficient::constant(b, 0.1).unwrap(), backend, g).unwrap()
    }

    #[test]
    fn coefficient_validation() {
        assert!(Coefficient::constant(C::new(0.05, 1.0), 0.1).is_err());
        assert!(Coefficient::constant(C::new(1.0, 0.0), 0.0).is_err());
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let b = Field::from_real_fn(g, |x| 1.0 + x[0] * x[0]).unwrap();
        let c = Coefficient::variable(b, 0.5).unwrap();
        assert!(SemigroupSpec::new(c.clone(), Backend::Fourier, g).is_err());
        assert!(SemigroupSpec::new(c.clone(), Backend::Dense, g).is_ok());
        let big = GridSpec::new(3, 17, 1.0).unwrap();
        let one = Coefficient::constant(ONE, 0.5).unwrap();
        assert!(matches!(
            SemigroupSpec::new(one, Backend::Dense, big),
            Err(Error::Backend(_))
        ));
    }

    #[test]
    fn kernel_values_and_bound() {
        let c = Coefficient::constant(ONE, 0.5).unwrap();
        let k = kernel_eval(&c, 1.0, &[0.3], &[0.3]).unwrap();
        assert!((k.re - (4.0 * PI).powf(-0.5)).abs() < 1e-15 && k.im == 0.0);
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let var = Coefficient::variable(Field::from_real_fn(g, |_| 1.0).unwrap(), 0.5).unwrap();
        assert!(kernel_eval(&var, 1.0, &[0.0], &[0.0]).is_err());
        assert!(kernel_eval(&c, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn delta_spreads_to_heat_kernel() {
        for backend in [Backend::Fourier, Backend::Kernel] {
            let s = spec(backend, 1, 256, 16.0, ONE);
            let g = *s.grid();
            let mut u = Field::zeros(g);
            u.values_mut()[128] = C::new(1.0 / g.spacing(), 0.0);
            let v = apply(&s, 1.0, &u).unwrap();
            for (i, val) in v.values().iter().enumerate() {
                let x = g.axis_coord(i);
                let exact = (4.0 * PI).powf(-0.5) * (-x * x / 4.0).exp();
                assert!(
                    (val - exact).norm() < 1e-10,
                    "{backend:?} at {x}: {val} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn time_zero_is_identity() {
        for backend in [Backend::Fourier, Backend::Kernel, Backend::Dense] {
            let s = spec(backend, 2, 8, 1.0, C::new(1.0, 0.5));
            let u = Field::from_real_fn(*s.grid(), |x| x[0] - x[1] * x[1]).unwrap();
            assert_eq!(apply(&s, 0.0, &u).unwrap(), u);
            assert!(apply(&s, -1.0, &u).is_err());
        }
    }

    #[test]
    fn fourier_eigenfunction() {
        let s = spec(Backend::Fourier, 2, 16, PI, ONE);
        let g = *s.grid();
        let u = Field::from_fn(g, |x| C::from_polar(1.0, 2.0 * x[0] - 3.0 * x[1])).unwrap();
        let v = apply(&s, 0.1, &u).unwrap();
        let expect = u.scaled(C::new((-0.1 * 13.0f64).exp(), 0.0));
        for (a, b) in v.values().iter().zip(expect.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn semigroup_law_across_backends() {
        let t1 = 0.3;
        let t2 = 0.45;
        // the kernel backend crops to the box between the two applications
        for (backend, n, tol) in [
            (Backend::Fourier, 16, 1e-12),
            (Backend::Dense, 16, 1e-10),
            (Backend::Kernel, 32, 1e-6),
        ] {
            let s = spec(backend, 2, n, 8.0, C::new(1.0, 0.4));
            let u = bump(s.grid(), &[0.2, -0.1], &[1.5, 1.0]);
            let a = apply(&s, t1, &apply(&s, t2, &u).unwrap()).unwrap();
            let b = apply(&s, t1 + t2, &u).unwrap();
            let err = a.sub(&b).unwrap().sup_abs();
            assert!(err < tol, "{backend:?}: {err}");
        }
    }

    #[test]
    fn dense_matches_fourier_for_small_times() {
        // the centered-difference symbol approaches |k|^2 for smooth data
        let f = spec(Backend::Fourier, 1, 64, PI, ONE);
        let d = spec(Backend::Dense, 1, 64, PI, ONE);
        let u = Field::from_real_fn(*f.grid(), |x| x[0].sin()).unwrap();
        let a = apply(&f, 0.5, &u).unwrap();
        let b = apply(&d, 0.5, &u).unwrap();
        assert!(a.sub(&b).unwrap().sup_abs() < 1e-3);
    }

    #[test]
    fn mass_conservation_for_real_b() {
        let s = spec(Backend::Fourier, 2, 32, 4.0, C::new(0.7, 0.0));
        let u = bump(s.grid(), &[0.3, 0.0], &[1.0, 2.0]);
        let v = apply(&s, 1.3, &u).unwrap();
        assert!((v.integral() - u.integral()).norm() < 1e-10);
        let k = spec(Backend::Kernel, 1, 512, 16.0, ONE);
        let mut delta = Field::zeros(*k.grid());
        delta.values_mut()[256] = C::new(1.0 / k.grid().spacing(), 0.0);
        let v = apply(&k, 2.0, &delta).unwrap();
        assert!((v.integral().re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_kernel_tends_to_identity() {
        let s = spec(Backend::Kernel, 1, 64, 4.0, ONE);
        let u = bump(s.grid(), &[0.0], &[2.0]);
        let v = apply(&s, 1e-7, &u).unwrap();
        assert!(v.sub(&u).unwrap().sup_abs() < 1e-5);
    }

    #[test]
    fn dual_uses_conjugate() {
        let s = spec(Backend::Fourier, 1, 16, 1.0, C::new(1.0, 2.0));
        assert_eq!(s.dual().coeff().constant_value(), Some(C::new(1.0, -2.0)));
        assert_eq!(s.dual().dual(), s);
    }

    #[test]
    fn dense_adjoint_is_conjugate_transpose() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let b = Field::from_fn(g, |x| C::new(1.0 + 0.5 * x[0].sin(), 0.3 * x[0])).unwrap();
        let s =
            SemigroupSpec::new(Coefficient::variable(b, 0.4).unwrap(), Backend::Dense, g).unwrap();
        let u = Field::from_fn(g, |x| C::new(x[0], 1.0)).unwrap();
        let w = Field::from_fn(g, |x| C::new(x[0].cos(), -x[0])).unwrap();
        let lhs: C = apply(&s, 0.2, &u)
            .unwrap()
            .values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| a * b.conj())
            .sum();
        let rhs: C = u
            .values()
            .iter()
            .zip(apply(&s.dual(), 0.2, &w).unwrap().values())
            .map(|(a, b)| a * b.conj())
            .sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn generator_decay_slope() {
        let s = spec(Backend::Fourier, 1, 64, PI, C::new(1.0, 1.0));
        let u = Field::from_real_fn(*s.grid(), |x| x[0].sin() + 0.5 * (3.0 * x[0]).cos()).unwrap();
        let ts: Vec<f64> = (0..6).map(|i| 0.005 * 2f64.powi(i)).collect();
        let norms: Vec<f64> = ts
            .iter()
            .map(|&t| apply_generator(&s, t, &u).unwrap().l2_norm())
            .collect();
        let fit = loglog_fit(&ts, &norms).unwrap();
        assert!(fit.slope >= -1.05, "{}", fit.slope);
        // operator norm: sup_k |z e^{-z}| / t with arg z = arg b, at most 1/(e cos(arg b))
        let g = *s.grid();
        let mut delta = Field::zeros(g);
        delta.values_mut()[0] = ONE;
        let bound = 1.0 / (std::f64::consts::E * (PI / 4.0).cos());
        for &t in &ts {
            let ratio = apply_generator(&s, t, &delta).unwrap().l2_norm() / delta.l2_norm();
            assert!(t * ratio <= bound * (1.0 + 1e-12), "{t}: {}", t * ratio);
        }
    }

    #[test]
    fn smoothing_rejects_bad_samples() {
        let s = spec(Backend::Kernel, 1, 64, 8.0, ONE);
        let p = LorentzExponents::weak(2.0).unwrap();
        assert!(smoothing_measurement(&s, p, p, &[1.0, 0.5], 2, 0).is_err());
        assert!(smoothing_measurement(&s, p, p, &[1.0, 2.0], 2, 0).is_err());
        let q = LorentzExponents::weak(1.5).unwrap();
        assert!(smoothing_measurement(&s, p, q, &[0.1, 2.0], 2, 0).is_err());
    }

    #[test]
    fn smoothing_one_dimensional_exponent() {
        let s = spec(Backend::Kernel, 1, 1024, 64.0, ONE);
        let p2 = LorentzExponents::new(2.0, 2.0).unwrap();
        let p16 = LorentzExponents::new(16.0, 16.0).unwrap();
        let ts: Vec<f64> = (0..6).map(|i| 0.5 * 2f64.powi(i)).collect();
        let r = smoothing_measurement(&s, p2, p16, &ts, 8, 7).unwrap();
        let expect = -0.5 * (0.5 - 1.0 / 16.0);
        assert!(
            (r.fitted_exponent - expect).abs() < 0.1 * expect.abs(),
            "{}",
            r.fitted_exponent
        );
        let same = smoothing_measurement(&s, p2, p2, &ts, 8, 7).unwrap();
        assert!(
            same.fitted_exponent.abs() < 0.05,
            "{}",
            same.fitted_exponent
        );
    }

    #[test]
    fn dual_integral_zero_and_homogeneous() {
        let s = spec(Backend::Kernel, 2, 16, 4.0, C::new(1.0, 0.2));
        let e = LorentzExponents::new(3.0, 1.0).unwrap();
        let zero = Field::zeros(*s.grid());
        assert_eq!(dual_time_integral(&s, &zero, e, 4.0).unwrap(), 0.0);
        let psi = bump(s.grid(), &[0.0, 0.1], &[1.0, 1.5]);
        let a = dual_time_integral(&s, &psi, e, 4.0).unwrap();
        let b = dual_time_integral(&s, &psi.scaled(C::new(0.0, -2.5)), e, 4.0).unwrap();
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }
}
