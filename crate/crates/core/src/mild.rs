//! The linear solution operator `S(f)(t) = int_0^H e^{-sA} f(t - s) ds`.
//!
//! The forcing is linearly interpolated between its snapshots and the history
//! integral is discretised on the graded mesh of [`HistoryQuadrature`], split
//! at every multiple of the forcing step `dt`. Output times are nodes of the
//! forcing grid, so the interpolation fractions of a quadrature node do not
//! depend on the output time and the whole rule collapses to one operator per
//! lag:
//!
//! ```text
//! u_i = sum_l C_l f_{i-l},   C_l = sum_j w_j lambda_{jl} e^{-s_j A}
//! ```
//!
//! with `lambda_{jl}` the hat-function weights. Each `C_l` is diagonal in the
//! transform space of the spectral backends.
//!
//! In truncated mode the history is cut at the first forcing snapshot, which
//! is what a forward Duhamel step from that time needs.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, LorentzExponents};
use crate::io::format_g17;
use crate::pap::{
    ap_test, mean_value_curve, pap0_test, APReport, MeanValueCurve, Pap0Report, SpaceNorm,
    TimeGrid, Trajectory,
};
use crate::quadrature::HistoryQuadrature;
use crate::semigroup::{Op, Plan, SemigroupSpec};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Lag operators of the discrete Duhamel rule.
pub(crate) struct LagOperators {
    pub(crate) plan: Plan,
    /// `C_l`, `l = 0..=L`.
    full: Vec<Op>,
    /// Part of `C_l` that comes from the cell `[(l-1) dt, l dt]` (truncated mode).
    lo: Option<Vec<Op>>,
}

impl LagOperators {
    pub(crate) fn new(
        spec: &SemigroupSpec,
        quad: &HistoryQuadrature,
        dt: f64,
        truncated: bool,
    ) -> Result<Self> {
        let plan = Plan::new(spec);
        let cells = quad.cells_with_breaks(Some(dt))?;
        let lags = cells
            .iter()
            .map(|c| (c.s() / dt).floor() as usize + 1)
            .max()
            .unwrap_or(0);
        let mut full: Vec<Op> = (0..=lags).map(|_| plan.zero_op()).collect();
        let mut lo: Option<Vec<Op>> =
            truncated.then(|| (0..=lags).map(|_| plan.zero_op()).collect());
        for chunk in cells.chunks(16) {
            let ops: Vec<Op> = chunk.par_iter().map(|c| plan.op(c.s())).collect();
            for (c, op) in chunk.iter().zip(&ops) {
                let x = c.s() / dt;
                let q = x.floor() as usize;
                let phi = x - q as f64;
                let w = c.weight();
                full[q].add_scaled(op, w * (1.0 - phi));
                if phi > 0.0 {
                    full[q + 1].add_scaled(op, w * phi);
                    if let Some(lo) = lo.as_mut() {
                        lo[q + 1].add_scaled(op, w * phi);
                    }
                }
            }
        }
        Ok(Self { plan, full, lo })
    }

    /// Largest lag `L`.
    pub(crate) fn max_lag(&self) -> usize {
        self.full.len() - 1
    }

    /// `sum_l C_l reps[now - l]` in physical space; needs `now >= L`.
    fn full_output(&self, reps: &[Vec<C>], now: usize) -> Vec<C> {
        let mut acc = vec![ZERO; self.plan.rep_len()];
        for (l, op) in self.full.iter().enumerate() {
            op.apply_acc(&reps[now - l], C::new(1.0, 0.0), &mut acc);
        }
        self.plan.from_rep(acc)
    }

    /// Output `i` with history cut at `reps[0]`.
    pub(crate) fn truncated_output(&self, reps: &[Vec<C>], i: usize) -> Vec<C> {
        let mut acc = vec![ZERO; self.plan.rep_len()];
        let top = i.min(self.max_lag() + 1);
        for l in 0..top {
            self.full[l].apply_acc(&reps[i - l], C::new(1.0, 0.0), &mut acc);
        }
        if i <= self.max_lag() && i > 0 {
            let lo = self
                .lo
                .as_ref()
                .expect("truncated mode keeps the boundary operators");
            lo[i].apply_acc(&reps[0], C::new(1.0, 0.0), &mut acc);
        }
        self.plan.from_rep(acc)
    }

    /// Transform of every snapshot of a trajectory.
    pub(crate) fn reps(&self, f: &Trajectory, range: std::ops::Range<usize>) -> Vec<Vec<C>> {
        range
            .into_par_iter()
            .map(|k| self.plan.to_rep(f.snapshot(k)))
            .collect()
    }

    /// Truncated-history solution on the forcing grid.
    pub(crate) fn solve_truncated(&self, f: &Trajectory) -> Vec<C> {
        let reps = self.reps(f, 0..f.time().len());
        let outs: Vec<Vec<C>> = (0..f.time().len())
            .into_par_iter()
            .map(|i| self.truncated_output(&reps, i))
            .collect();
        outs.concat()
    }
}

/// Forcing of the linear problem.
#[derive(Debug, Clone, Copy)]
pub enum Forcing<'a> {
    /// Densely stored snapshots.
    Sampled(&'a Trajectory),
    /// `sum_r a_r(t) g_r(x)`.
    Separable(&'a SeparableForcing),
}

/// Time amplitude of one separable term.
pub type Amplitude = Box<dyn Fn(f64) -> C>;

/// A forcing `f(t, x) = sum_r a_r(t) g_r(x)` stored by its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableForcing {
    time: TimeGrid,
    terms: Vec<(Vec<C>, Field)>,
    norm: SpaceNorm,
}

impl SeparableForcing {
    pub fn new(time: TimeGrid, terms: Vec<(Vec<C>, Field)>, norm: SpaceNorm) -> Result<Self> {
        if terms.is_empty() {
            return invalid("a separable forcing needs at least one term");
        }
        let grid = *terms[0].1.grid();
        for (a, g) in &terms {
            if a.len() != time.len() {
                return invalid("amplitude length does not match the time grid");
            }
            if *g.grid() != grid {
                return Err(Error::GridMismatch(
                    "separable terms live on different grids".into(),
                ));
            }
            if a.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return invalid("amplitudes must be finite");
            }
        }
        Ok(Self { time, terms, norm })
    }

    /// Samples each amplitude `a_r(t)` on `time`.
    pub fn from_fns(
        time: TimeGrid,
        terms: Vec<(Amplitude, Field)>,
        norm: SpaceNorm,
    ) -> Result<Self> {
        let terms = terms
            .into_iter()
            .map(|(a, g)| (time.times().into_iter().map(&a).collect(), g))
            .collect();
        Self::new(time, terms, norm)
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn terms(&self) -> &[(Vec<C>, Field)] {
        &self.terms
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let grid = *self.terms[0].1.grid();
        let pts = grid.len();
        let mut data = vec![ZERO; pts * self.time.len()];
        for (i, chunk) in data.chunks_mut(pts).enumerate() {
            for (a, g) in &self.terms {
                for (d, v) in chunk.iter_mut().zip(g.values()) {
                    *d += a[i] * v;
                }
            }
        }
        Trajectory::from_raw(self.time, Some(grid), data, self.norm).expect("consistent shapes")
    }
}

impl Forcing<'_> {
    fn time(&self) -> &TimeGrid {
        match self {
            Forcing::Sampled(f) => f.time(),
            Forcing::Separable(f) => &f.time,
        }
    }

    fn grid(&self) -> Option<crate::field::GridSpec> {
        match self {
            Forcing::Sampled(f) => f.space().copied(),
            Forcing::Separable(f) => Some(*f.terms[0].1.grid()),
        }
    }

    /// `sup_t ||f(t)||_X` over the whole forcing grid.
    fn sup_norm(&self) -> f64 {
        match self {
            Forcing::Sampled(f) => f.sup_norm(),
            Forcing::Separable(f) => f.to_trajectory().sup_norm(),
        }
    }
}

/// Result of a linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveReport {
    /// Solution snapshots, tagged with the `Y` norm.
    pub trajectory: Trajectory,
    /// `||u(t)||_Y` at each output time.
    pub y_norms: Vec<f64>,
    pub sup_y_norm: f64,
    pub forcing_sup_x_norm: f64,
    /// `sup_y_norm / forcing_sup_x_norm` (zero for zero forcing).
    pub measured_ltilde: f64,
    /// `Y` norm of the extra history `(H, 2H]`, with the forcing frozen at
    /// each snapshot in turn.
    pub tail_estimate: f64,
    /// Set when `tail_estimate` exceeds 10% of `sup_y_norm`.
    pub tail_warning: bool,
}

impl LinearSolveReport {
    /// CSV with columns `t,Y_norm,tail_estimate`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,Y_norm,tail_estimate\n");
        for (i, y) in self.y_norms.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{}\n",
                format_g17(self.trajectory.time().time(i)),
                format_g17(*y),
                format_g17(self.tail_estimate)
            ));
        }
        s
    }
}

fn check_grid(spec: &SemigroupSpec, forcing: &Forcing) -> Result<()> {
    match forcing.grid() {
        Some(g) if g == *spec.grid() => Ok(()),
        Some(_) => Err(Error::GridMismatch(
            "forcing is not on the semigroup grid".into(),
        )),
        None => invalid("the forcing must be a field trajectory"),
    }
}

/// `sup_k || T f(t_k) ||_Y` with `T = int_H^{2H} e^{-sA} ds`: the history
/// that a doubled horizon would add if the forcing were frozen at each of its
/// snapshots.
fn tail_estimate(
    plan: &Plan,
    forcing: &Forcing,
    quad: &HistoryQuadrature,
    y: LorentzExponents,
    spec: &SemigroupSpec,
) -> Result<f64> {
    let mut tail = plan.zero_op();
    for c in quad.with_h(2.0 * quad.h())?.cells_above(quad.h())? {
        tail.add_scaled(&plan.op(c.s()), c.weight());
    }
    let norm = SpaceNorm::Lorentz(y);
    let grid = spec.grid();
    let steps = forcing.time().len();
    let per_step: Vec<f64> = match forcing {
        Forcing::Sampled(f) => (0..steps)
            .into_par_iter()
            .map(|k| {
                norm.eval(
                    &plan.from_rep(tail.apply(&plan.to_rep(f.snapshot(k)))),
                    Some(grid),
                )
            })
            .collect(),
        Forcing::Separable(f) => {
            let tg: Vec<Vec<C>> = f
                .terms
                .iter()
                .map(|(_, g)| plan.from_rep(tail.apply(&plan.to_rep(g.values()))))
                .collect();
            (0..steps)
                .into_par_iter()
                .map(|k| {
                    let mut v = vec![ZERO; grid.len()];
                    for ((a, _), t) in f.terms.iter().zip(&tg) {
                        v.iter_mut().zip(t).for_each(|(x, y)| *x += a[k] * y);
                    }
                    norm.eval(&v, Some(grid))
                })
                .collect()
        }
    };
    Ok(per_step.into_iter().fold(0.0, f64::max))
}

fn finish(
    spec: &SemigroupSpec,
    plan: &Plan,
    forcing: &Forcing,
    quad: &HistoryQuadrature,
    window: TimeGrid,
    data: Vec<C>,
    y: LorentzExponents,
) -> Result<LinearSolveReport> {
    let trajectory = Trajectory::from_raw(window, Some(*spec.grid()), data, SpaceNorm::Lorentz(y))?;
    let y_norms = trajectory.snapshot_norms();
    let sup_y_norm = y_norms.iter().copied().fold(0.0, f64::max);
    let forcing_sup_x_norm = forcing.sup_norm();
    let measured_ltilde = if forcing_sup_x_norm > 0.0 {
        sup_y_norm / forcing_sup_x_norm
    } else {
        0.0
    };
    let tail = tail_estimate(plan, forcing, quad, y, spec)?;
    Ok(LinearSolveReport {
        trajectory,
        y_norms,
        sup_y_norm,
        forcing_sup_x_norm,
        measured_ltilde,
        tail_estimate: tail,
        tail_warning: tail > 0.1 * sup_y_norm,
    })
}

/// `u = S(f)` on `out_window` with full history of length `H`.
///
/// The output window must be aligned with the forcing grid (same `dt`, nodes
/// on forcing nodes) and the forcing must cover
/// `[out.t_min - H, out.t_max]`.
pub fn solve(
    spec: &SemigroupSpec,
    forcing: Forcing,
    quad: &HistoryQuadrature,
    out_window: &TimeGrid,
    y: LorentzExponents,
) -> Result<LinearSolveReport> {
    check_grid(spec, &forcing)?;
    let ft = *forcing.time();
    let offset = ft.aligned_offset(out_window)?;
    let ops = LagOperators::new(spec, quad, ft.dt(), false)?;
    let lags = ops.max_lag() as isize;
    if offset < lags || offset as usize + out_window.steps() > ft.steps() {
        return Err(Error::Coverage(format!(
            "forcing on [{}, {}] does not cover [{}, {}] with history {}",
            ft.t_min(),
            ft.t_max(),
            out_window.t_min() - quad.h(),
            out_window.t_max(),
            quad.h()
        )));
    }
    let first = (offset - lags) as usize;
    let last = offset as usize + out_window.steps();
    let data: Vec<C> = match forcing {
        Forcing::Sampled(f) => {
            let reps = ops.reps(f, first..last + 1);
            let outs: Vec<Vec<C>> = (0..out_window.len())
                .into_par_iter()
                .map(|i| ops.full_output(&reps, i + lags as usize))
                .collect();
            outs.concat()
        }
        Forcing::Separable(f) => {
            // d[r][l] = C_l g_r in physical space
            let blocks: Vec<Vec<Vec<C>>> = f
                .terms
                .iter()
                .map(|(_, g)| {
                    let rep = ops.plan.to_rep(g.values());
                    ops.full
                        .par_iter()
                        .map(|op| ops.plan.from_rep(op.apply(&rep)))
                        .collect()
                })
                .collect();
            let pts = spec.grid().len();
            let outs: Vec<Vec<C>> = (0..out_window.len())
                .into_par_iter()
                .map(|i| {
                    let now = offset as usize + i;
                    let mut acc = vec![ZERO; pts];
                    for ((a, _), blk) in f.terms.iter().zip(&blocks) {
                        for (l, d) in blk.iter().enumerate() {
                            let c = a[now - l];
                            for (x, v) in acc.iter_mut().zip(d) {
                                *x += c * v;
                            }
                        }
                    }
                    acc
                })
                .collect();
            outs.concat()
        }
    };
    finish(spec, &ops.plan, &forcing, quad, *out_window, data, y)
}

/// [`solve`] for a sampled forcing trajectory.
pub fn solve_linear(
    spec: &SemigroupSpec,
    f: &Trajectory,
    quad: &HistoryQuadrature,
    out_window: &TimeGrid,
    y: LorentzExponents,
) -> Result<LinearSolveReport> {
    solve(spec, Forcing::Sampled(f), quad, out_window, y)
}

/// `S(f)` on the forcing grid with the history cut at the first snapshot.
pub fn solve_linear_truncated(
    spec: &SemigroupSpec,
    f: &Trajectory,
    quad: &HistoryQuadrature,
    y: LorentzExponents,
) -> Result<LinearSolveReport> {
    let forcing = Forcing::Sampled(f);
    check_grid(spec, &forcing)?;
    let ops = LagOperators::new(spec, quad, f.time().dt(), true)?;
    let data = ops.solve_truncated(f);
    finish(spec, &ops.plan, &forcing, quad, *f.time(), data, y)
}

/// Outcome of [`linearity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearityReport {
    /// `sup |S(a f1 + f2) - a S(f1) - S(f2)|`.
    pub defect: f64,
    /// `sup |S(a f1 + f2)|`, for scale.
    pub scale: f64,
    pub ok: bool,
}

/// Checks `S(a f1 + f2) = a S(f1) + S(f2)` up to `tol (1 + scale)`.
#[allow(clippy::too_many_arguments)]
pub fn linearity_check(
    spec: &SemigroupSpec,
    f1: &Trajectory,
    f2: &Trajectory,
    a: C,
    quad: &HistoryQuadrature,
    window: &TimeGrid,
    y: LorentzExponents,
    tol: f64,
) -> Result<LinearityReport> {
    let combo = f1.scaled(a).add(f2)?;
    let s = solve_linear(spec, &combo, quad, window, y)?.trajectory;
    let s1 = solve_linear(spec, f1, quad, window, y)?.trajectory;
    let s2 = solve_linear(spec, f2, quad, window, y)?.trajectory;
    let rhs = s1.scaled(a).add(&s2)?;
    let defect = s
        .data()
        .iter()
        .zip(rhs.data())
        .fold(0.0f64, |m, (p, q)| m.max((p - q).norm()));
    let scale = s.data().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    Ok(LinearityReport {
        defect,
        scale,
        ok: defect <= tol * (1.0 + scale),
    })
}

/// Safety factor applied to the output level of the AP preservation check.
pub const AP_SAFETY: f64 = 1.5;

/// Outcome of [`ap_preservation_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApPreservationReport {
    pub input: APReport,
    pub output: APReport,
    /// `eps * measured_ltilde * AP_SAFETY`.
    pub output_epsilon: f64,
    pub measured_ltilde: f64,
    /// `sup_T defect_out(T) / defect_in(T)` over the input almost periods
    /// inside the output range with a non-zero input defect.
    pub amplification_ratio: f64,
    pub passed: bool,
    pub solution: LinearSolveReport,
}

/// Solves with an almost periodic forcing and runs the almost-period search
/// on the solution at the level `eps * L * 1.5`.
#[allow(clippy::too_many_arguments)]
pub fn ap_preservation_check(
    spec: &SemigroupSpec,
    g: Forcing,
    eps: f64,
    l_max: f64,
    quad: &HistoryQuadrature,
    window: &TimeGrid,
    y: LorentzExponents,
) -> Result<ApPreservationReport> {
    let input_traj = match g {
        Forcing::Sampled(f) => f.clone(),
        Forcing::Separable(f) => f.to_trajectory(),
    };
    let input = ap_test(&input_traj, eps, l_max)?;
    let solution = solve(spec, g, quad, window, y)?;
    let output_epsilon = eps * solution.measured_ltilde * AP_SAFETY;
    let out_traj = &solution.trajectory;
    let output = if output_epsilon > 0.0 {
        ap_test(out_traj, output_epsilon, l_max)?
    } else {
        // zero solution: every shift is exact
        ap_test(out_traj, f64::MIN_POSITIVE, l_max)?
    };
    let dt = window.dt();
    let mut amplification_ratio: f64 = 0.0;
    for (t, d_in) in input.almost_periods.iter().zip(&input.defects) {
        let m = (t / dt).round().abs() as usize;
        if *d_in > 0.0 && m > 0 && m <= window.steps() {
            let d_out = crate::pap::translation_defect(out_traj, *t)?;
            amplification_ratio = amplification_ratio.max(d_out / d_in);
        }
    }
    Ok(ApPreservationReport {
        passed: output.passed(),
        input,
        output,
        output_epsilon,
        measured_ltilde: solution.measured_ltilde,
        amplification_ratio,
        solution,
    })
}

/// Outcome of [`pap0_preservation_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pap0PreservationReport {
    pub curve: MeanValueCurve,
    pub test: Pap0Report,
    pub solution: LinearSolveReport,
}

/// Solves with an ergodic forcing and runs the vanishing-mean test on
/// `||S(phi)(t)||_Y`.
#[allow(clippy::too_many_arguments)]
pub fn pap0_preservation_check(
    spec: &SemigroupSpec,
    phi: Forcing,
    quad: &HistoryQuadrature,
    window: &TimeGrid,
    window_lengths: &[f64],
    tol: f64,
    y: LorentzExponents,
) -> Result<Pap0PreservationReport> {
    let solution = solve(spec, phi, quad, window, y)?;
    let curve = mean_value_curve(&solution.trajectory, window_lengths)?;
    let test = pap0_test(&curve, tol)?;
    Ok(Pap0PreservationReport {
        curve,
        test,
        solution,
    })
}
