//! The experiment families: typed parameters, validation and execution.

use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;

use num_complex::Complex64 as C;
use thiserror::Error;

use pap_core::field::{lorentz_norm, Field, GridSpec, LorentzExponents, MaskPolicy};
use pap_core::interp::{derive_application_exponents, ApplicationExponents};
use pap_core::io::{read_field, read_trajectory, Csv};
use pap_core::mild::{
    ap_preservation_check, pap0_preservation_check, solve, solve_linear, Amplitude, Forcing,
    SeparableForcing,
};
use pap_core::pap::{ap_test, mean_value_curve, pap0_test, SpaceNorm, TimeGrid, Trajectory};
use pap_core::quadrature::HistoryQuadrature;
use pap_core::semigroup::{
    bump, dual_time_integral_with, smoothing_measurement_multi, Backend, BumpFamily, Coefficient,
    SemigroupSpec,
};
use pap_core::semilinear::{
    measure_ltilde, picard_solve, stability_experiment, PicardConfig, StabilityConfig,
};

use crate::config::{Config, ConfigError, Reader};
use crate::report::{short, Check, Outcome};

/// Why an experiment did not produce an [`Outcome`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Hypothesis(_) => 3,
        }
    }
}

impl From<pap_core::Error> for RunError {
    fn from(e: pap_core::Error) -> Self {
        use pap_core::Error as E;
        match e {
            E::Hypothesis(s) => RunError::Hypothesis(s),
            E::Constraint(s) => RunError::Hypothesis(format!("constraint violated: {s}")),
            E::Divergence(s) => RunError::Hypothesis(format!("divergence: {s}")),
            other => RunError::Config(ConfigError::Invalid(other.to_string())),
        }
    }
}

fn cfg_err(e: pap_core::Error) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

/// Grid and semigroup keys shared by most experiments.
fn space(r: &Reader, d: usize) -> Result<SemigroupSpec, ConfigError> {
    let n = r.usize("n")?;
    let half_width = r.f64("half_width")?;
    let b = r.complex("b")?;
    let delta = r.f64_or("delta", b.re)?;
    let backend: Backend = r
        .choice("backend", &["fourier", "kernel", "dense"], Some("kernel"))?
        .parse()
        .map_err(cfg_err)?;
    let grid = GridSpec::new(d, n, half_width).map_err(cfg_err)?;
    let coeff = Coefficient::constant(b, delta).map_err(cfg_err)?;
    SemigroupSpec::new(coeff, backend, grid).map_err(cfg_err)
}

fn quadrature(
    r: &Reader,
    sigma: f64,
    t_floor: f64,
    max_width: Option<f64>,
) -> Result<HistoryQuadrature, ConfigError> {
    let h = r.f64("H")?;
    let q = HistoryQuadrature::new(
        h,
        r.f64_or("sigma", sigma)?,
        r.f64_or("t_floor", t_floor)?,
        100_000,
    )
    .map_err(cfg_err)?;
    match r.opt_f64("max_width")?.or(max_width) {
        Some(w) => q.with_max_width(w).map_err(cfg_err),
        None => Ok(q),
    }
}

fn dim(r: &Reader) -> Result<usize, ConfigError> {
    let d = r.usize("d")?;
    if !(1..=3).contains(&d) {
        return Err(ConfigError::Invalid(format!(
            "d must be 1, 2 or 3, got {d}"
        )));
    }
    Ok(d)
}

fn power(r: &Reader) -> Result<u32, ConfigError> {
    let m = r.usize("m")?;
    u32::try_from(m).map_err(|_| ConfigError::Invalid(format!("m = {m} is out of range")))
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid(format!(
            "{key} must be positive and finite, got {v}"
        )))
    }
}

fn window_lengths(r: &Reader) -> Result<Vec<f64>, ConfigError> {
    if r.opt_str("windows").is_some() {
        r.f64_list("windows")
    } else {
        Ok(vec![12.5, 25.0, 50.0, 100.0])
    }
}

#[derive(Debug, Clone)]
pub struct NormsParams {
    pub grid: GridSpec,
    pub p: f64,
    pub q: f64,
    pub mask: MaskPolicy,
    pub tol: f64,
    pub field_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExponentParams {
    pub d: u32,
    pub m: u32,
    pub r: f64,
}

#[derive(Debug, Clone)]
pub struct PapTestParams {
    pub time: TimeGrid,
    pub epsilon: f64,
    pub l_max: f64,
    pub windows: Vec<f64>,
    pub tol: f64,
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum SmoothingMode {
    Rates {
        ts: Vec<f64>,
        trials: usize,
        rate_tol: f64,
        git_tol: f64,
    },
    Dual {
        quad: HistoryQuadrature,
        psi_count: usize,
        dual_tol: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SmoothingParams {
    pub spec: SemigroupSpec,
    pub exps: ExponentParams,
    pub seed: u64,
    pub mode: SmoothingMode,
}

#[derive(Debug, Clone)]
pub enum LinearMode {
    Oracle {
        omega: f64,
        modes: usize,
        out_steps: usize,
        tol: f64,
    },
    Bound {
        exps: ExponentParams,
        out_steps: usize,
        tol: f64,
    },
    Pap {
        exps: ExponentParams,
        t_min: f64,
        t_max: f64,
        epsilon: f64,
        l_max: f64,
        windows: Vec<f64>,
        tol: f64,
    },
}

#[derive(Debug, Clone)]
pub struct LinearParams {
    pub spec: SemigroupSpec,
    pub quad: HistoryQuadrature,
    pub dt: f64,
    pub mode: LinearMode,
}

#[derive(Debug, Clone)]
pub struct PicardParams {
    pub spec: SemigroupSpec,
    pub exps: ExponentParams,
    pub quad: HistoryQuadrature,
    pub time: TimeGrid,
    /// `None` for automatic selection.
    pub rho: Option<f64>,
    pub forcing_level: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub ratio_slack: f64,
    pub residual_tol: f64,
    pub iter_limit: usize,
}

#[derive(Debug, Clone)]
pub enum Reference {
    Zero,
    Picard {
        rho: Option<f64>,
        forcing_level: f64,
    },
}

#[derive(Debug, Clone)]
pub struct StabilityParams {
    pub spec: SemigroupSpec,
    pub exps: ExponentParams,
    pub quad: HistoryQuadrature,
    pub window: TimeGrid,
    pub fit: (f64, f64),
    pub perturbation: f64,
    pub width: f64,
    pub reference: Reference,
    pub tol: f64,
    pub max_iters: usize,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub enum Experiment {
    Norms(NormsParams),
    Exponents(ExponentParams),
    PapTest(PapTestParams),
    Smoothing(SmoothingParams),
    Linear(LinearParams),
    Picard(PicardParams),
    Stability(StabilityParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Norms(_) => "norms",
            Experiment::Exponents(_) => "exponents",
            Experiment::PapTest(_) => "pap-test",
            Experiment::Smoothing(_) => "smoothing",
            Experiment::Linear(_) => "linear",
            Experiment::Picard(_) => "picard",
            Experiment::Stability(_) => "stability",
        }
    }
}

/// A validated run: what to compute and where to write it.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub experiment: Experiment,
    pub outdir: PathBuf,
}

fn exponent_keys(r: &Reader, d: usize) -> Result<ExponentParams, ConfigError> {
    Ok(ExponentParams {
        d: d as u32,
        m: power(r)?,
        r: r.f64("r")?,
    })
}

fn rho_key(r: &Reader) -> Result<Option<f64>, ConfigError> {
    match r.str("rho")?.as_str() {
        "auto" => Ok(None),
        s => {
            let v: f64 = s.parse().map_err(|_| {
                ConfigError::Invalid(format!("rho must be a number or 'auto', got '{s}'"))
            })?;
            positive("rho", v).map(Some)
        }
    }
}

/// Reads and checks every key. Nothing is computed here.
pub fn validate(cfg: &Config) -> Result<RunPlan, ConfigError> {
    let r = cfg.reader();
    let name = r.choice(
        "experiment",
        &[
            "norms",
            "exponents",
            "pap-test",
            "smoothing",
            "linear",
            "picard",
            "stability",
        ],
        None,
    )?;
    let outdir = PathBuf::from(r.str("outdir")?);
    let experiment = match name.as_str() {
        "norms" => {
            let d = dim(&r)?;
            let grid = GridSpec::new(d, r.usize("n")?, r.f64("half_width")?).map_err(cfg_err)?;
            let p = r.f64("p")?;
            let q = r.f64_or("q", f64::INFINITY)?;
            LorentzExponents::new(p, q).map_err(cfg_err)?;
            let mask = match r
                .choice("mask", &["zero", "nearest"], Some("zero"))?
                .as_str()
            {
                "zero" => MaskPolicy::Zero,
                _ => MaskPolicy::NearestFinite,
            };
            let tol = positive("tol", r.f64_or("tol", 0.15)?)?;
            Experiment::Norms(NormsParams {
                grid,
                p,
                q,
                mask,
                tol,
                field_file: r.opt_str("field_file").map(PathBuf::from),
            })
        }
        "exponents" => Experiment::Exponents(exponent_keys(&r, r.usize("d")?)?),
        "pap-test" => {
            let time = TimeGrid::new(
                r.f64_or("t_min", -200.0)?,
                r.f64_or("t_max", 200.0)?,
                r.usize_or("steps", 4000)?,
            )
            .map_err(cfg_err)?;
            Experiment::PapTest(PapTestParams {
                time,
                epsilon: positive("epsilon", r.f64_or("epsilon", 0.1)?)?,
                l_max: positive("l_max", r.f64_or("l_max", 20.0)?)?,
                windows: window_lengths(&r)?,
                tol: positive("tol", r.f64_or("tol", 1e-3)?)?,
                input: r.opt_str("input").map(PathBuf::from),
            })
        }
        "smoothing" => {
            let d = dim(&r)?;
            let exps = exponent_keys(&r, d)?;
            let spec = space(&r, d)?;
            let seed = r.u64_or("seed", 0)?;
            let mode = match r
                .choice("mode", &["rates", "dual"], Some("rates"))?
                .as_str()
            {
                "rates" => {
                    let (t0, t1) = (r.f64_or("t_min", 0.25)?, r.f64_or("t_max", 8.0)?);
                    let count = r.usize_or("t_count", 8)?;
                    if !(t0 > 0.0 && t1 >= 10.0 * t0 && count >= 2) {
                        return Err(ConfigError::Invalid(
                            "smoothing times need 0 < t_min, t_max >= 10 t_min, t_count >= 2"
                                .into(),
                        ));
                    }
                    let ts = (0..count)
                        .map(|i| t0 * (t1 / t0).powf(i as f64 / (count - 1) as f64))
                        .collect();
                    SmoothingMode::Rates {
                        ts,
                        trials: r.usize_or("trials", 16)?.max(1),
                        rate_tol: positive("rate_tol", r.f64_or("rate_tol", 0.1)?)?,
                        git_tol: r.f64_or("git_tol", 0.05)?,
                    }
                }
                _ => SmoothingMode::Dual {
                    quad: quadrature(&r, 0.85, 1e-6, None)?,
                    psi_count: r.usize_or("psi_count", 5)?.max(1),
                    dual_tol: positive("dual_tol", r.f64_or("dual_tol", 0.02)?)?,
                },
            };
            Experiment::Smoothing(SmoothingParams {
                spec,
                exps,
                seed,
                mode,
            })
        }
        "linear" => {
            let d = dim(&r)?;
            let spec = space(&r, d)?;
            let mode = r.choice("mode", &["oracle", "bound", "pap"], None)?;
            let (sigma, max_width) = if mode == "oracle" {
                (0.98, Some(0.02))
            } else {
                (0.85, None)
            };
            let quad = quadrature(&r, sigma, 1e-6, max_width)?;
            let dt = positive("dt", r.f64("dt")?)?;
            let mode = match mode.as_str() {
                "oracle" => {
                    if spec.backend() != Backend::Fourier {
                        return Err(ConfigError::Invalid(
                            "the oracle needs backend = fourier".into(),
                        ));
                    }
                    LinearMode::Oracle {
                        omega: r.f64_or("omega", 1.0)?,
                        modes: r.usize_or("modes", 4)?.max(1),
                        out_steps: r.usize_or("out_steps", 100)?.max(8),
                        tol: positive("tol", r.f64_or("tol", 1e-4)?)?,
                    }
                }
                "bound" => LinearMode::Bound {
                    exps: exponent_keys(&r, d)?,
                    out_steps: r.usize_or("out_steps", 16)?.max(8),
                    tol: positive("tol", r.f64_or("tol", 0.15)?)?,
                },
                _ => LinearMode::Pap {
                    exps: exponent_keys(&r, d)?,
                    t_min: r.f64_or("t_min", -100.0)?,
                    t_max: r.f64_or("t_max", 100.0)?,
                    epsilon: positive("epsilon", r.f64_or("epsilon", 0.5)?)?,
                    l_max: positive("l_max", r.f64_or("l_max", 50.0)?)?,
                    windows: window_lengths(&r)?,
                    tol: positive("tol", r.f64_or("tol", 1e-3)?)?,
                },
            };
            Experiment::Linear(LinearParams {
                spec,
                quad,
                dt,
                mode,
            })
        }
        "picard" => {
            let d = dim(&r)?;
            let exps = exponent_keys(&r, d)?;
            let spec = space(&r, d)?;
            let quad = quadrature(&r, 0.85, 1e-3, None)?;
            let dt = positive("dt", r.f64("dt")?)?;
            let (t0, t1) = (r.f64("t_min")?, r.f64("t_max")?);
            let steps = ((t1 - t0) / dt).round();
            if !(steps >= 8.0 && ((t1 - t0) / dt - steps).abs() < 1e-9) {
                return Err(ConfigError::Invalid(
                    "t_max - t_min must be a multiple (>= 8) of dt".into(),
                ));
            }
            Experiment::Picard(PicardParams {
                spec,
                exps,
                quad,
                time: TimeGrid::with_step(t0, dt, steps as usize).map_err(cfg_err)?,
                rho: rho_key(&r)?,
                forcing_level: positive("forcing_level", r.f64_or("forcing_level", 0.5)?)?,
                tol: positive("tol", r.f64_or("tol", 1e-9)?)?,
                max_iters: r.usize_or("max_iters", 50)?.max(1),
                ratio_slack: r.f64_or("ratio_slack", 0.05)?,
                residual_tol: positive("residual_tol", r.f64_or("residual_tol", 1e-6)?)?,
                iter_limit: r.usize_or("iter_limit", 25)?,
            })
        }
        "stability" => {
            let d = dim(&r)?;
            let exps = exponent_keys(&r, d)?;
            let spec = space(&r, d)?;
            let quad = quadrature(&r, 0.85, 1e-3, None)?;
            let dt = positive("dt", r.f64("dt")?)?;
            let t_end = positive("t_end", r.f64_or("t_end", 16.0)?)?;
            let steps = (t_end / dt).round();
            if !(steps >= 8.0 && (t_end / dt - steps).abs() < 1e-9) {
                return Err(ConfigError::Invalid(
                    "t_end must be a multiple (>= 8) of dt".into(),
                ));
            }
            let reference = match r
                .choice("reference", &["zero", "picard"], Some("zero"))?
                .as_str()
            {
                "zero" => Reference::Zero,
                _ => Reference::Picard {
                    rho: rho_key(&r)?,
                    forcing_level: positive("forcing_level", r.f64_or("forcing_level", 0.5)?)?,
                },
            };
            Experiment::Stability(StabilityParams {
                spec,
                exps,
                quad,
                window: TimeGrid::with_step(0.0, dt, steps as usize).map_err(cfg_err)?,
                fit: (r.f64_or("fit_lo", 1.0)?, r.f64_or("fit_hi", t_end)?),
                perturbation: r.f64_or("perturbation", 0.05)?,
                width: positive("width", r.f64_or("width", 1.0)?)?,
                reference,
                tol: positive("tol", r.f64_or("tol", 1e-10)?)?,
                max_iters: r.usize_or("max_iters", 100)?.max(1),
            })
        }
        _ => unreachable!("choice() restricts the experiment name"),
    };
    r.finish()?;
    Ok(RunPlan { experiment, outdir })
}

/// Runs a validated experiment.
pub fn execute(exp: &Experiment) -> Result<Outcome, RunError> {
    match exp {
        Experiment::Norms(p) => norms(p),
        Experiment::Exponents(p) => exponents(p),
        Experiment::PapTest(p) => pap_test(p),
        Experiment::Smoothing(p) => smoothing(p),
        Experiment::Linear(p) => linear(p),
        Experiment::Picard(p) => picard(p),
        Experiment::Stability(p) => stability(p),
    }
}

fn outcome(exp: &str, csv: String, checks: Vec<Check>, info: Vec<(String, String)>) -> Outcome {
    Outcome {
        experiment: exp.into(),
        csv,
        checks,
        info,
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

fn norms(p: &NormsParams) -> Result<Outcome, RunError> {
    // |x|^{-d/p} has weak norm |B_1|^{1/p} as long as the box holds its level sets
    let d = p.grid.dim();
    let expected = unit_ball_volume(d).powf(1.0 / p.p);
    let weak = LorentzExponents::weak(p.p)?;
    let mut csv = Csv::new(&["n", "measured", "expected", "rel_err"]);
    let mut last = f64::NAN;
    let n = p.grid.points_per_axis();
    for k in (0..4).rev() {
        let nk = n >> k;
        if nk < 4 {
            continue;
        }
        let g = GridSpec::new(d, nk, p.grid.half_width())?;
        let u = Field::from_fn_masked(g, p.mask, |x| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            C::new(r.powf(-(d as f64) / p.p), 0.0)
        })?;
        let measured = lorentz_norm(&u, weak);
        last = (measured - expected).abs() / expected;
        csv.row(&[nk as f64, measured, expected, last]);
    }
    let mut checks = vec![Check::at_most("weak_norm_rel_err", last, p.tol)];
    let mut info = vec![("expected".into(), short(expected))];
    if let Some(path) = &p.field_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        let u = read_field(&text)?;
        let e = LorentzExponents::new(p.p, p.q)?;
        let v = lorentz_norm(&u, e);
        info.push(("field_norm".into(), pap_core::io::format_g17(v)));
        checks.push(Check::new("field_norm_finite", v, "finite", v.is_finite()));
    }
    Ok(outcome("norms", csv.finish(), checks, info))
}

fn pack(p: &ExponentParams) -> Result<ApplicationExponents, RunError> {
    Ok(derive_application_exponents(p.d, p.m, p.r)?)
}

fn exponents(p: &ExponentParams) -> Result<Outcome, RunError> {
    let e = pack(p)?;
    let mut csv = String::from("key,value\n");
    let mut info = Vec::new();
    for (k, v) in e.key_values() {
        csv.push_str(&format!("{k},{}\n", pap_core::io::format_g17(v)));
        info.push((k.to_string(), short(v)));
    }
    let identity = (1.0 - e.theta) * e.alpha1 + e.theta * e.alpha2;
    let beta = (1.0 - e.theta_tilde) * e.beta1 + e.theta_tilde * e.beta2;
    let checks = vec![
        Check::near("alpha1", e.alpha1, 1.25, 1e-12),
        Check::near("alpha2", e.alpha2, 0.75, 1e-12),
        Check::near("alpha_identity", identity, 1.0, 1e-12),
        Check::near("beta_identity", beta, 1.0, 1e-12),
        Check::new(
            "gamma_in_unit_interval",
            e.gamma,
            "in (0, 1)",
            e.gamma > 0.0 && e.gamma < 1.0,
        ),
    ];
    Ok(outcome("exponents", csv, checks, info))
}

fn pap_test(p: &PapTestParams) -> Result<Outcome, RunError> {
    if let Some(path) = &p.input {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        let f = read_trajectory(&text)?;
        let ap = ap_test(&f, p.epsilon, p.l_max)?;
        let curve = mean_value_curve(&f, &p.windows)?;
        let z = pap0_test(&curve, p.tol)?;
        let mut csv = Csv::new(&["L", "M"]);
        for (l, m) in curve.window_lengths.iter().zip(&curve.values) {
            csv.row(&[*l, *m]);
        }
        let checks = vec![
            Check::new(
                "ap_test",
                ap.inclusion_length.unwrap_or(f64::INFINITY),
                format!("<= {}", p.l_max),
                ap.passed(),
            ),
            Check::new(
                "pap0_test",
                z.slope.unwrap_or(f64::NAN),
                "slope <= -0.5 or tail < tol",
                z.passed,
            ),
        ];
        return Ok(outcome("pap-test", csv.finish(), checks, vec![]));
    }
    let ap = Trajectory::scalar_fn(p.time, |t| C::new(t.sin() + (SQRT_2 * t).sin(), 0.0))?;
    let erg = Trajectory::scalar_fn(p.time, |t| C::new(1.0 / (1.0 + t * t), 0.0))?;
    let total = ap.add(&erg)?;
    let ap_rep = ap_test(&ap, p.epsilon, p.l_max)?;
    let curves = [
        mean_value_curve(&ap, &p.windows)?,
        mean_value_curve(&erg, &p.windows)?,
        mean_value_curve(&total, &p.windows)?,
    ];
    let erg_rep = pap0_test(&curves[1], p.tol)?;
    let total_rep = pap0_test(&curves[2], p.tol)?;
    let mut csv = Csv::new(&["L", "M_ap", "M_ergodic", "M_total"]);
    for (i, l) in p.windows.iter().enumerate() {
        csv.row(&[
            *l,
            curves[0].values[i],
            curves[1].values[i],
            curves[2].values[i],
        ]);
    }
    let checks = vec![
        Check::new(
            "ap_part_inclusion_length",
            ap_rep.inclusion_length.unwrap_or(f64::INFINITY),
            format!("<= {}", p.l_max),
            ap_rep.passed(),
        ),
        Check::new(
            "ergodic_part_slope",
            erg_rep.slope.unwrap_or(f64::NAN),
            "<= -0.5 or tail < tol",
            erg_rep.passed,
        ),
        Check::new(
            "total_mean_persists",
            total_rep.tail,
            "pap0 rejected",
            !total_rep.passed,
        ),
    ];
    Ok(outcome("pap-test", csv.finish(), checks, vec![]))
}

fn smoothing(p: &SmoothingParams) -> Result<Outcome, RunError> {
    let e = pack(&p.exps)?;
    match &p.mode {
        SmoothingMode::Rates {
            ts,
            trials,
            rate_tol,
            git_tol,
        } => {
            let reps = smoothing_measurement_multi(
                &p.spec,
                e.x(),
                &[e.y1(), e.y2(), e.y()],
                ts,
                *trials,
                p.seed,
                &BumpFamily::default(),
            )?;
            let mut csv = Csv::new(&["t", "M_X_Y1", "M_X_Y2", "M_X_Y", "interp_bound"]);
            let mut worst: f64 = 0.0;
            for (i, t) in ts.iter().enumerate() {
                let bound = reps[0].norms[i].powf(1.0 - e.theta) * reps[1].norms[i].powf(e.theta);
                worst = worst.max(reps[2].norms[i] / bound);
                csv.row(&[
                    *t,
                    reps[0].norms[i],
                    reps[1].norms[i],
                    reps[2].norms[i],
                    bound,
                ]);
            }
            let checks = vec![
                Check::near(
                    "rate_X_Y1",
                    reps[0].fitted_exponent,
                    -e.alpha1,
                    rate_tol * e.alpha1,
                ),
                Check::near(
                    "rate_X_Y2",
                    reps[1].fitted_exponent,
                    -e.alpha2,
                    rate_tol * e.alpha2,
                ),
                Check::at_most("interp_ratio_max", worst, 1.0 + git_tol),
            ];
            let info = vec![
                ("constant_X_Y1".into(), short(reps[0].fitted_constant)),
                ("constant_X_Y2".into(), short(reps[1].fitted_constant)),
            ];
            Ok(outcome("smoothing", csv.finish(), checks, info))
        }
        SmoothingMode::Dual {
            quad,
            psi_count,
            dual_tol,
        } => {
            let grid = *p.spec.grid();
            let family = BumpFamily {
                center_half_range: 0.5,
                width_lo: 0.5,
                width_hi: 1.5,
                scale_with_sqrt_t: false,
            };
            let z = LorentzExponents::new(e.p_z, 1.0)?;
            let dual_x = e.x_dual();
            let long = quad.with_h(2.0 * quad.h())?;
            let mut csv = Csv::new(&["psi", "I_H", "I_2H", "rel_change"]);
            let mut worst: f64 = 0.0;
            for k in 0..*psi_count {
                let psi = family.draw(&grid, p.seed.wrapping_add(k as u64), 1.0);
                let psi = psi.scaled(C::new(1.0 / lorentz_norm(&psi, z), 0.0));
                let a = dual_time_integral_with(&p.spec, &psi, dual_x, quad)?;
                let b = dual_time_integral_with(&p.spec, &psi, dual_x, &long)?;
                let rel = (b - a).abs() / b;
                worst = worst.max(rel);
                csv.row(&[k as f64, a, b, rel]);
            }
            let checks = vec![Check::at_most("dual_integral_rel_change", worst, *dual_tol)];
            Ok(outcome("smoothing", csv.finish(), checks, vec![]))
        }
    }
}

/// Forcing grid from `t0 - H` (rounded out to the step) through `t1`.
fn forcing_grid(t0: f64, t1: f64, dt: f64, h: f64) -> Result<TimeGrid, RunError> {
    let back = (h / dt).ceil() as usize + 1;
    let fwd = ((t1 - t0) / dt).round() as usize;
    Ok(TimeGrid::with_step(t0 - back as f64 * dt, dt, back + fwd)?)
}

fn linear(p: &LinearParams) -> Result<Outcome, RunError> {
    let grid = *p.spec.grid();
    let b = p
        .spec
        .coeff()
        .constant_value()
        .expect("the CLI builds constant coefficients");
    match &p.mode {
        LinearMode::Oracle {
            omega,
            modes,
            out_steps,
            tol,
        } => {
            // f = e^{i w t} g with g a sum of Fourier modes along the first axis;
            // u = e^{i w t} sum c_k e^{i xi_k x} / (b xi_k^2 + i w)
            let r = grid.half_width();
            let coeffs: Vec<(f64, C)> = (1..=*modes)
                .map(|k| (PI * k as f64 / r, C::new(1.0 / k as f64, 0.5 / k as f64)))
                .collect();
            let g = Field::from_fn(grid, |x| {
                coeffs
                    .iter()
                    .map(|(xi, c)| c * C::new(0.0, xi * x[0]).exp())
                    .sum()
            })?;
            let exact_g = Field::from_fn(grid, |x| {
                coeffs
                    .iter()
                    .map(|(xi, c)| {
                        c * C::new(0.0, xi * x[0]).exp() / (b * xi * xi + C::new(0.0, *omega))
                    })
                    .sum()
            })?;
            let out = TimeGrid::with_step(0.0, p.dt, *out_steps)?;
            let ft = forcing_grid(0.0, out.t_max(), p.dt, p.quad.h())?;
            let w = *omega;
            let f = Trajectory::separable(ft, |t| C::new(0.0, w * t).exp(), &g, SpaceNorm::Modulus);
            let y = LorentzExponents::weak(2.0)?;
            let rep = solve_linear(&p.spec, &f, &p.quad, &out, y)?;
            let mut csv = Csv::new(&["t", "rel_err", "tail_estimate"]);
            let scale = exact_g.sup_abs();
            let mut worst: f64 = 0.0;
            for i in 0..out.len() {
                let t = out.time(i);
                let phase = C::new(0.0, w * t).exp();
                let err = rep
                    .trajectory
                    .snapshot(i)
                    .iter()
                    .zip(exact_g.values())
                    .fold(0.0f64, |m, (u, e)| m.max((u - e * phase).norm()))
                    / scale;
                worst = worst.max(err);
                csv.row(&[t, err, rep.tail_estimate]);
            }
            let checks = vec![Check::at_most("oracle_rel_sup_err", worst, *tol)];
            Ok(outcome("linear", csv.finish(), checks, vec![]))
        }
        LinearMode::Bound {
            exps,
            out_steps,
            tol,
        } => {
            let e = pack(exps)?;
            let xn = SpaceNorm::Lorentz(e.x());
            let out = TimeGrid::with_step(0.0, p.dt, *out_steps)?;
            let ft = forcing_grid(0.0, out.t_max(), p.dt, p.quad.h())?;
            let d = grid.dim();
            let at = |v: f64| vec![v; d];
            let mut off = at(0.0);
            off[0] = 0.25;
            let mut aniso = vec![1.0, 1.2, 0.9];
            aniso.truncate(d);
            let families: Vec<(&str, Amplitude, Field)> = vec![
                (
                    "constant",
                    Box::new(|_| C::new(1.0, 0.0)),
                    bump(&grid, &at(0.0), &at(1.0)),
                ),
                (
                    "ramp",
                    Box::new(|t: f64| C::new(0.5 * (1.0 + (t / 2.0 + 4.0).tanh()), 0.0)),
                    bump(&grid, &off, &at(1.0)),
                ),
                (
                    "phase",
                    Box::new(|t: f64| C::new(0.0, 0.05 * t).exp()),
                    bump(&grid, &at(0.0), &at(1.2)),
                ),
                (
                    "dips",
                    Box::new(|t: f64| C::new(1.0 - 0.3 * (0.1 * t).sin().powi(2), 0.0)),
                    bump(&grid, &at(0.0), &at(0.9)),
                ),
                (
                    "decay",
                    Box::new(|t: f64| {
                        C::new(if t < 0.0 { 1.0 } else { 1.0 / (1.0 + 0.1 * t) }, 0.0)
                    }),
                    bump(&grid, &at(0.0), &aniso),
                ),
            ];
            let mut csv = Csv::new(&["family", "sup_X_forcing", "sup_Y_solution", "Ltilde"]);
            let mut ls = Vec::new();
            for (i, (_, a, g)) in families.into_iter().enumerate() {
                let raw = SeparableForcing::from_fns(ft, vec![(a, g)], xn)?;
                let norm = raw.to_trajectory().sup_norm();
                let terms = raw
                    .terms()
                    .iter()
                    .map(|(a, g)| (a.clone(), g.scaled(C::new(1.0 / norm, 0.0))))
                    .collect();
                let f = SeparableForcing::new(ft, terms, xn)?;
                let rep = solve(&p.spec, Forcing::Separable(&f), &p.quad, &out, e.y())?;
                csv.row(&[
                    i as f64,
                    rep.forcing_sup_x_norm,
                    rep.sup_y_norm,
                    rep.measured_ltilde,
                ]);
                ls.push(rep.measured_ltilde);
            }
            let lo = ls.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ls.iter().copied().fold(0.0, f64::max);
            let spread = hi / lo - 1.0;
            let checks = vec![Check::at_most("ltilde_spread", spread, *tol)];
            let info = vec![
                ("ltilde_min".into(), short(lo)),
                ("ltilde_max".into(), short(hi)),
            ];
            Ok(outcome("linear", csv.finish(), checks, info))
        }
        LinearMode::Pap {
            exps,
            t_min,
            t_max,
            epsilon,
            l_max,
            windows,
            tol,
        } => {
            let e = pack(exps)?;
            let xn = SpaceNorm::Lorentz(e.x());
            let d = grid.dim();
            let g1 = bump(&grid, &vec![0.0; d], &vec![1.5; d]);
            let g1 = g1.scaled(C::new(1.0 / lorentz_norm(&g1, e.x()), 0.0));
            let mut c2 = vec![0.0; d];
            c2[0] = 1.0;
            let g2 = bump(&grid, &c2, &vec![1.0; d]);
            let g2 = g2.scaled(C::new(1.0 / lorentz_norm(&g2, e.x()), 0.0));
            let out = TimeGrid::with_step(*t_min, p.dt, ((t_max - t_min) / p.dt).round() as usize)?;
            let ft = forcing_grid(*t_min, out.t_max(), p.dt, p.quad.h())?;
            let ap = SeparableForcing::from_fns(
                ft,
                vec![(
                    Box::new(|t: f64| C::new(t.sin() + (SQRT_2 * t).sin(), 0.0)),
                    g1,
                )],
                xn,
            )?;
            let erg = SeparableForcing::from_fns(
                ft,
                vec![(Box::new(|t: f64| C::new(1.0 / (1.0 + t * t), 0.0)), g2)],
                xn,
            )?;
            let a = ap_preservation_check(
                &p.spec,
                Forcing::Separable(&ap),
                *epsilon,
                *l_max,
                &p.quad,
                &out,
                e.y(),
            )?;
            let z = pap0_preservation_check(
                &p.spec,
                Forcing::Separable(&erg),
                &p.quad,
                &out,
                windows,
                *tol,
                e.y(),
            )?;
            let mut csv = Csv::new(&["t", "Y_norm_ap", "Y_norm_ergodic", "Y_norm_total"]);
            let total = a.solution.trajectory.add(&z.solution.trajectory)?;
            let tn = total.snapshot_norms();
            for (i, total) in tn.iter().enumerate() {
                csv.row(&[
                    out.time(i),
                    a.solution.y_norms[i],
                    z.solution.y_norms[i],
                    *total,
                ]);
            }
            let checks = vec![
                Check::new(
                    "ap_part_inclusion_length",
                    a.output.inclusion_length.unwrap_or(f64::INFINITY),
                    format!("<= {l_max} at eps_out = {}", short(a.output_epsilon)),
                    a.passed,
                ),
                Check::at_most("ergodic_part_slope", z.test.slope.unwrap_or(f64::NAN), -0.5),
            ];
            let info = vec![
                ("ltilde_ap".into(), short(a.measured_ltilde)),
                ("amplification_ratio".into(), short(a.amplification_ratio)),
                ("tail_estimate_ap".into(), short(a.solution.tail_estimate)),
                ("ergodic_tail".into(), short(z.test.tail)),
            ];
            Ok(outcome("linear", csv.finish(), checks, info))
        }
    }
}

/// Unit-size PAP forcing `(sin t + sin sqrt2 t)/2 g1 + g2/(1+t^2)`, both
/// profiles normalised in `X`.
fn pap_forcing(
    grid: &GridSpec,
    time: TimeGrid,
    e: &ApplicationExponents,
) -> Result<Trajectory, RunError> {
    let d = grid.dim();
    let g1 = bump(grid, &vec![0.0; d], &vec![1.5; d]);
    let mut c2 = vec![0.0; d];
    c2[0] = 1.0;
    let g2 = bump(grid, &c2, &vec![1.0; d]);
    let xn = SpaceNorm::Lorentz(e.x());
    let f = SeparableForcing::from_fns(
        time,
        vec![
            (
                Box::new(|t: f64| C::new(0.5 * (t.sin() + (SQRT_2 * t).sin()), 0.0)),
                g1,
            ),
            (Box::new(|t: f64| C::new(1.0 / (1.0 + t * t), 0.0)), g2),
        ],
        xn,
    )?
    .to_trajectory();
    let n = f.sup_norm();
    Ok(f.scaled(C::new(1.0 / n, 0.0)))
}

/// Forcing scaled so that `L ||F|| = level * rho (1 - L C)`, plus `rho`.
fn scaled_forcing(
    spec: &SemigroupSpec,
    e: &ApplicationExponents,
    quad: &HistoryQuadrature,
    time: TimeGrid,
    rho: Option<f64>,
    level: f64,
) -> Result<(Trajectory, f64), RunError> {
    let unit = pap_forcing(spec.grid(), time, e)?;
    let l = measure_ltilde(spec, e, &unit, quad)?;
    let m = e.m as f64;
    let rho = rho.unwrap_or_else(|| (0.5 / (m * l)).powf(1.0 / (m - 1.0)));
    let lc = l * m * rho.powf(m - 1.0);
    let size = level * rho * (1.0 - lc).max(1e-3) / l;
    Ok((unit.scaled(C::new(size, 0.0)), rho))
}

fn picard(p: &PicardParams) -> Result<Outcome, RunError> {
    let e = pack(&p.exps)?;
    let (f, rho) = scaled_forcing(&p.spec, &e, &p.quad, p.time, p.rho, p.forcing_level)?;
    let cfg = PicardConfig {
        rho: Some(rho),
        max_iters: p.max_iters,
        tol: p.tol,
        start: None,
    };
    let r = picard_solve(&p.spec, &e, &f, &p.quad, &cfg)?;
    let max_ratio = r.ratios.iter().copied().fold(0.0, f64::max);
    let checks = vec![
        Check::at_most(
            "max_increment_ratio",
            max_ratio,
            r.contraction + p.ratio_slack,
        ),
        Check::at_most("residual", r.residual, p.residual_tol),
        Check::at_most("iterations", r.increments.len() as f64, p.iter_limit as f64),
    ];
    let info = vec![
        ("ltilde".into(), short(r.measured_ltilde)),
        ("rho".into(), short(r.rho)),
        ("contraction".into(), short(r.contraction)),
        ("measured_ratio".into(), short(r.measured_ratio)),
        ("converged".into(), r.converged.to_string()),
    ];
    Ok(outcome("picard", r.to_csv(), checks, info))
}

fn stability(p: &StabilityParams) -> Result<Outcome, RunError> {
    let e = pack(&p.exps)?;
    let grid = *p.spec.grid();
    let u_hat = match &p.reference {
        Reference::Zero => Trajectory::separable(
            p.window,
            |_| C::new(0.0, 0.0),
            &Field::zeros(grid),
            SpaceNorm::Modulus,
        ),
        Reference::Picard { rho, forcing_level } => {
            let ft = forcing_grid(0.0, p.window.t_max(), p.window.dt(), p.quad.h())?;
            let (f, rho) = scaled_forcing(&p.spec, &e, &p.quad, ft, *rho, *forcing_level)?;
            let cfg = PicardConfig {
                rho: Some(rho),
                ..PicardConfig::default()
            };
            let sol = picard_solve(&p.spec, &e, &f, &p.quad, &cfg)?.solution;
            let i0 = ft.index_of(0.0).expect("the forcing grid has a node at 0");
            sol.slice(i0, ft.steps())?
        }
    };
    let d = grid.dim();
    let v0 = bump(&grid, &vec![0.0; d], &vec![p.width; d]).scaled(C::new(p.perturbation, 0.0));
    let cfg = StabilityConfig {
        r: p.exps.r,
        perturbation: v0,
        fit_window: p.fit,
        tol: p.tol,
        max_iters: p.max_iters,
    };
    let rep = stability_experiment(&p.spec, &e, &u_hat, &p.quad, &cfg)?;
    let slope = rep.fitted_slope.unwrap_or(f64::NEG_INFINITY);
    let checks = vec![Check::new(
        "decay_slope",
        slope,
        format!("<= {}", short(-rep.gamma_predicted + 0.1)),
        rep.ok,
    )];
    let mut info = vec![
        ("gamma".into(), short(rep.gamma_predicted)),
        ("iterations".into(), rep.iterations.to_string()),
    ];
    if let Some(c) = rep.fitted_constant {
        info.push(("fitted_constant".into(), short(c)));
    }
    Ok(outcome("stability", rep.to_csv(), checks, info))
}
