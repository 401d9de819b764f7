//! The power nonlinearity `G(u) = |u|^{m-1} u + F`, the Picard iteration for
//! bounded mild solutions and the forward stability experiment.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, GridSpec, LorentzExponents};
use crate::fit::loglog_fit;
use crate::interp::ApplicationExponents;
use crate::io::Csv;
use crate::mild::LagOperators;
use crate::pap::{SpaceNorm, TimeGrid, Trajectory};
use crate::quadrature::HistoryQuadrature;
use crate::semigroup::{bump, SemigroupSpec};

type C = Complex64;

/// `|v|^{m-1} v`.
fn power(v: C, m: u32) -> C {
    v * v.norm().powi(m as i32 - 1)
}

/// `|u|^{m-1} u + F`, tagged with the norm of `F`.
pub fn nemytskii(u: &Trajectory, forcing: &Trajectory, m: u32) -> Result<Trajectory> {
    if m < 2 {
        return invalid(format!("the power must be at least 2, got {m}"));
    }
    if u.time() != forcing.time() || u.space() != forcing.space() {
        return Err(Error::GridMismatch(
            "state and forcing have different shapes".into(),
        ));
    }
    let data: Vec<C> = u
        .data()
        .par_iter()
        .zip(forcing.data())
        .map(|(v, f)| power(*v, m) + f)
        .collect();
    Trajectory::from_raw(*u.time(), u.space().copied(), data, forcing.norm())
}

fn sup_distance_in(a: &[C], b: &[C], pts: usize, norm: SpaceNorm, grid: &GridSpec) -> f64 {
    a.par_chunks(pts)
        .zip(b.par_chunks(pts))
        .map(|(x, y)| {
            let d: Vec<C> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            norm.eval(&d, Some(grid))
        })
        .reduce(|| 0.0, f64::max)
}

/// Settings of [`picard_solve`].
#[derive(Debug, Clone)]
pub struct PicardConfig {
    /// Radius of the ball in `sup_t ||.||_Y`; `None` picks
    /// `rho = (1 / (2 m L))^{1/(m-1)}`, which makes `L C = 1/2`.
    pub rho: Option<f64>,
    pub max_iters: usize,
    /// Stop when the sup-in-time `Y` increment falls below this.
    pub tol: f64,
    /// Starting point; zero when absent.
    pub start: Option<Trajectory>,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            rho: None,
            max_iters: 200,
            tol: 1e-9,
            start: None,
        }
    }
}

/// Outcome of [`picard_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// The fixed point, tagged with the `Y` norm.
    pub solution: Trajectory,
    /// `sup_t ||u_{k+1} - u_k||_Y` per iteration.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    /// Geometric mean of `ratios` (zero when there are none).
    pub measured_ratio: f64,
    /// Linear bound measured on the calibration forcing.
    pub measured_ltilde: f64,
    pub rho: f64,
    /// `C = m rho^{m-1}`.
    pub lipschitz: f64,
    /// `L C`.
    pub contraction: f64,
    /// `sup_t ||u - S(G(u))||_Y`.
    pub residual: f64,
    pub converged: bool,
}

impl PicardReport {
    /// CSV with columns `iter,increment,ratio`; the first ratio is NaN.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["iter", "increment", "ratio"]);
        for (k, inc) in self.increments.iter().enumerate() {
            let ratio = if k == 0 { f64::NAN } else { self.ratios[k - 1] };
            csv.row(&[(k + 1) as f64, *inc, ratio]);
        }
        csv.finish()
    }
}

/// Applies `S` with the history cut at the first snapshot.
struct TruncatedSolver {
    ops: LagOperators,
}

impl TruncatedSolver {
    fn apply(&self, f: &Trajectory) -> Vec<C> {
        self.ops.solve_truncated(f)
    }
}

fn ltilde_with(
    solver: &TruncatedSolver,
    grid: &GridSpec,
    forcing: &Trajectory,
    exponents: &ApplicationExponents,
) -> Result<f64> {
    let xn = SpaceNorm::Lorentz(exponents.x());
    let yn = SpaceNorm::Lorentz(exponents.y());
    let forcing = forcing.clone().with_norm(xn)?;
    let calib = if forcing.sup_norm() > 0.0 {
        forcing
    } else {
        let c = vec![0.0; grid.dim()];
        let w = vec![grid.half_width() / 2.0; grid.dim()];
        Trajectory::separable(
            *forcing.time(),
            |_| C::new(1.0, 0.0),
            &bump(grid, &c, &w),
            xn,
        )
    };
    let out = Trajectory::from_raw(*calib.time(), Some(*grid), solver.apply(&calib), yn)?;
    Ok(out.sup_norm() / calib.sup_norm())
}

/// `sup_t ||S f||_Y / sup_t ||f||_X` for the truncated-history operator used
/// by [`picard_solve`]; a time-constant bump stands in for `f = 0`.
pub fn measure_ltilde(
    spec: &SemigroupSpec,
    exponents: &ApplicationExponents,
    forcing: &Trajectory,
    quad: &HistoryQuadrature,
) -> Result<f64> {
    if forcing.space() != Some(spec.grid()) {
        return Err(Error::GridMismatch(
            "forcing is not on the semigroup grid".into(),
        ));
    }
    let solver = TruncatedSolver {
        ops: LagOperators::new(spec, quad, forcing.time().dt(), true)?,
    };
    ltilde_with(&solver, spec.grid(), forcing, exponents)
}

/// Finds the bounded mild solution of `u' + Au = |u|^{m-1} u + F` on the
/// forcing's time grid by Picard iteration in `sup_t ||.||_Y`.
///
/// The history integral starts at the first forcing snapshot, so the forcing
/// grid should begin at least one horizon `H` before the times of interest.
/// The linear bound `L` is measured on `F` (on a time-constant bump when
/// `F = 0`); the hypotheses `L C < 0.9` and `L (||F|| + C rho) < rho` are
/// checked before iterating.
pub fn picard_solve(
    spec: &SemigroupSpec,
    exponents: &ApplicationExponents,
    forcing: &Trajectory,
    quad: &HistoryQuadrature,
    cfg: &PicardConfig,
) -> Result<PicardReport> {
    let grid = *spec.grid();
    if forcing.space() != Some(&grid) {
        return Err(Error::GridMismatch(
            "forcing is not on the semigroup grid".into(),
        ));
    }
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return invalid("tolerance and iteration budget must be positive");
    }
    let m = exponents.m;
    let xn = SpaceNorm::Lorentz(exponents.x());
    let yn = SpaceNorm::Lorentz(exponents.y());
    let forcing = forcing.clone().with_norm(xn)?;
    let solver = TruncatedSolver {
        ops: LagOperators::new(spec, quad, forcing.time().dt(), true)?,
    };
    let pts = grid.len();

    let f_norm = forcing.sup_norm();
    let ltilde = ltilde_with(&solver, &grid, &forcing, exponents)?;

    let rho = match cfg.rho {
        Some(r) if r > 0.0 => r,
        Some(r) => return invalid(format!("rho must be positive, got {r}")),
        None => (0.5 / (m as f64 * ltilde)).powf(1.0 / (m as f64 - 1.0)),
    };
    let lipschitz = m as f64 * rho.powi(m as i32 - 1);
    let contraction = ltilde * lipschitz;
    if !(contraction < 0.9) {
        return Err(Error::Hypothesis(format!(
            "L̃C < 0.9 violated: L̃C = {contraction}"
        )));
    }
    let image = ltilde * (f_norm + lipschitz * rho);
    if !(image < rho) {
        return Err(Error::Hypothesis(format!(
            "L̃(‖G(0)‖ + Cρ) < ρ violated: {image} >= {rho}"
        )));
    }

    let mut u = match &cfg.start {
        Some(s) => {
            if s.time() != forcing.time() || s.space() != Some(&grid) {
                return Err(Error::GridMismatch(
                    "start is not on the forcing grid".into(),
                ));
            }
            s.clone().with_norm(yn)?
        }
        None => forcing.zeros_like().with_norm(yn)?,
    };
    let mut increments: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let g = nemytskii(&u, &forcing, m)?;
        let next = Trajectory::from_raw(*forcing.time(), Some(grid), solver.apply(&g), yn)?;
        let inc = sup_distance_in(next.data(), u.data(), pts, yn, &grid);
        u = next;
        if let Some(&prev) = increments.last() {
            if !(inc < prev) && inc >= cfg.tol {
                increments.push(inc);
                return Err(Error::Divergence(format!(
                    "increment grew from {prev} to {inc} at iteration {}",
                    increments.len()
                )));
            }
        }
        increments.push(inc);
        if inc < cfg.tol {
            converged = true;
            break;
        }
    }
    let g = nemytskii(&u, &forcing, m)?;
    let residual = sup_distance_in(&solver.apply(&g), u.data(), pts, yn, &grid);
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let usable: Vec<f64> = ratios.iter().copied().filter(|r| *r > 0.0).collect();
    let measured_ratio = if usable.is_empty() {
        0.0
    } else {
        (usable.iter().map(|r| r.ln()).sum::<f64>() / usable.len() as f64).exp()
    };
    Ok(PicardReport {
        solution: u,
        increments,
        ratios,
        measured_ratio,
        measured_ltilde: ltilde,
        rho,
        lipschitz,
        contraction,
        residual,
        converged,
    })
}

/// Settings of [`duhamel_forward`].
#[derive(Debug, Clone, Copy)]
pub struct ForwardConfig {
    /// Absolute stopping level of the sup-in-time increment.
    pub tol: f64,
    pub max_iters: usize,
    /// Norm used for increments and for the result's tag.
    pub norm: SpaceNorm,
}

/// Outcome of [`duhamel_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardReport {
    pub trajectory: Trajectory,
    pub increments: Vec<f64>,
}

/// Solves `v(t) = e^{-tA} v0 + int_0^t e^{-(t-s)A} G(s, v(s)) ds` on `window`
/// (which must start at 0) by fixed-point iteration over the whole window.
///
/// `forcing(i, v)` returns `G(t_i, v)` for the state `v` at node `i`.
pub fn duhamel_forward<G>(
    spec: &SemigroupSpec,
    v0: &Field,
    window: &TimeGrid,
    quad: &HistoryQuadrature,
    forcing: G,
    cfg: &ForwardConfig,
) -> Result<ForwardReport>
where
    G: Fn(usize, &[C]) -> Vec<C> + Sync,
{
    let grid = *spec.grid();
    if *v0.grid() != grid {
        return Err(Error::GridMismatch(
            "initial value is not on the semigroup grid".into(),
        ));
    }
    if window.t_min().abs() > 1e-12 {
        return invalid(format!(
            "forward windows start at 0, got {}",
            window.t_min()
        ));
    }
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return invalid("tolerance and iteration budget must be positive");
    }
    if quad.h() < window.t_max() * (1.0 - 1e-12) {
        return invalid(format!(
            "history length {} is shorter than the window [0, {}]",
            quad.h(),
            window.t_max()
        ));
    }
    let ops = LagOperators::new(spec, quad, window.dt(), true)?;
    let pts = grid.len();
    let rep0 = ops.plan.to_rep(v0.values());
    let free: Vec<C> = (0..window.len())
        .into_par_iter()
        .map(|i| ops.plan.from_rep(ops.plan.op(window.time(i)).apply(&rep0)))
        .collect::<Vec<_>>()
        .concat();

    let mut v = free.clone();
    let mut increments: Vec<f64> = Vec::new();
    for _ in 0..cfg.max_iters {
        let g: Vec<C> = v
            .par_chunks(pts)
            .enumerate()
            .map(|(i, s)| forcing(i, s))
            .collect::<Vec<_>>()
            .concat();
        if g.len() != v.len() {
            return invalid("forcing closure returned a snapshot of the wrong length");
        }
        let g = Trajectory::from_raw(*window, Some(grid), g, cfg.norm)
            .map_err(|_| Error::Divergence("nonlinearity produced non-finite values".into()))?;
        let duh = ops.solve_truncated(&g);
        let next: Vec<C> = free.par_iter().zip(&duh).map(|(a, b)| a + b).collect();
        let inc = sup_distance_in(&next, &v, pts, cfg.norm, &grid);
        v = next;
        if !inc.is_finite() {
            return Err(Error::Divergence("increment is not finite".into()));
        }
        if let Some(&prev) = increments.last() {
            if inc > prev && inc >= cfg.tol {
                increments.push(inc);
                return Err(Error::Divergence(format!(
                    "increment grew from {prev} to {inc}"
                )));
            }
        }
        increments.push(inc);
        if inc < cfg.tol {
            let trajectory = Trajectory::from_raw(*window, Some(grid), v, cfg.norm)?;
            return Ok(ForwardReport {
                trajectory,
                increments,
            });
        }
    }
    Err(Error::Divergence(format!(
        "no convergence in {} iterations",
        cfg.max_iters
    )))
}

/// Settings of [`stability_experiment`].
#[derive(Debug, Clone)]
pub struct StabilityConfig {
    /// Exponent of the decay norm `L^{r,inf}`.
    pub r: f64,
    /// Initial perturbation `v(0)`.
    pub perturbation: Field,
    /// Times used for the power-law fit; must span a factor of 10.
    pub fit_window: (f64, f64),
    pub tol: f64,
    pub max_iters: usize,
}

/// Outcome of [`stability_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// `||v(t)||_{r,inf}`.
    pub q_norms: Vec<f64>,
    /// `gamma = 1/(m-1) - d/(2r)`.
    pub gamma_predicted: f64,
    /// Slope of `log ||v(t)||` against `log t` over the fit window.
    pub fitted_slope: Option<f64>,
    /// `exp(intercept)` of that fit.
    pub fitted_constant: Option<f64>,
    /// `slope <= -gamma + 0.1`; trivially true for a zero perturbation.
    pub ok: bool,
    pub iterations: usize,
    fit_window: (f64, f64),
}

impl StabilityReport {
    /// CSV with columns `t,Q_norm,fitted_slope_so_far`; the running slope uses
    /// the fit-window samples up to `t` and is NaN before two are available.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["t", "Q_norm", "fitted_slope_so_far"]);
        let (lo, hi) = self.fit_window;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (t, q) in self.times.iter().zip(&self.q_norms) {
            if *t >= lo * (1.0 - 1e-12) && *t <= hi * (1.0 + 1e-12) && *q > 0.0 {
                xs.push(*t);
                ys.push(*q);
            }
            let slope = if xs.len() >= 2 {
                loglog_fit(&xs, &ys).map_or(f64::NAN, |f| f.slope)
            } else {
                f64::NAN
            };
            csv.row(&[*t, *q, slope]);
        }
        csv.finish()
    }
}

/// Evolves a perturbation `v` of a reference solution `u_hat` under
/// `v' + Av = G(v + u_hat) - G(u_hat)` on `u_hat`'s time grid (starting at 0)
/// and fits the decay of `||v(t)||_{r,inf}`.
pub fn stability_experiment(
    spec: &SemigroupSpec,
    exponents: &ApplicationExponents,
    u_hat: &Trajectory,
    quad: &HistoryQuadrature,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    let (d, m) = (exponents.d, exponents.m);
    if !(cfg.r > d as f64 * (m as f64 - 1.0) / 2.0) {
        return Err(Error::Constraint("r > d(m-1)/2".into()));
    }
    let (lo, hi) = cfg.fit_window;
    if !(lo > 0.0 && hi >= 10.0 * lo) {
        return invalid(format!("fit window [{lo}, {hi}] must span a factor of 10"));
    }
    let window = *u_hat.time();
    if hi > window.t_max() * (1.0 + 1e-12) {
        return invalid("fit window extends past the reference trajectory");
    }
    if u_hat.space() != Some(spec.grid()) {
        return Err(Error::GridMismatch(
            "reference solution is not on the semigroup grid".into(),
        ));
    }
    let q = SpaceNorm::Lorentz(LorentzExponents::weak(cfg.r)?);
    let gamma_predicted = 1.0 / (m as f64 - 1.0) - d as f64 / (2.0 * cfg.r);
    let times = window.times();
    if cfg.perturbation.sup_abs() == 0.0 {
        return Ok(StabilityReport {
            q_norms: vec![0.0; times.len()],
            times,
            gamma_predicted,
            fitted_slope: None,
            fitted_constant: None,
            ok: true,
            iterations: 0,
            fit_window: cfg.fit_window,
        });
    }
    let g = |i: usize, v: &[C]| -> Vec<C> {
        u_hat
            .snapshot(i)
            .iter()
            .zip(v)
            .map(|(uh, vv)| power(uh + vv, m) - power(*uh, m))
            .collect()
    };
    let fc = ForwardConfig {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        norm: q,
    };
    let run =
        duhamel_forward(spec, &cfg.perturbation, &window, quad, g, &fc).map_err(|e| match e {
            Error::Divergence(msg) => {
                Error::Hypothesis(format!("perturbation does not stay small: {msg}"))
            }
            other => other,
        })?;
    let q_norms = run.trajectory.snapshot_norms();
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&q_norms)
        .filter(|(t, v)| **t >= lo * (1.0 - 1e-12) && **t <= hi * (1.0 + 1e-12) && **v > 0.0)
        .map(|(t, v)| (*t, *v))
        .unzip();
    let fit = loglog_fit(&xs, &ys)?;
    Ok(StabilityReport {
        times,
        q_norms,
        gamma_predicted,
        fitted_slope: Some(fit.slope),
        fitted_constant: Some(fit.constant()),
        ok: fit.slope <= -gamma_predicted + 0.1,
        iterations: run.increments.len(),
        fit_window: cfg.fit_window,
    })
}
