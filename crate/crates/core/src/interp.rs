//! Real interpolation exponent algebra and the exponent pack of the rough
//! diffusion application.
//!
//! Exponents that depend only on the dimension `d` and the power `m` are
//! computed in exact rational arithmetic. Those that also depend on `r` use
//! rationals when `r` is a moderate integer and `f64` otherwise.

use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;

use crate::error::{invalid, Error, Result};
use crate::field::LorentzExponents;

/// Default relative slack of [`git_bound_check`].
pub const DEFAULT_GIT_TOL: f64 = 0.05;

/// Returns `p` with `1/p = (1 - theta)/p0 + theta/p1`.
pub fn interpolate_exponent(p0: f64, p1: f64, theta: f64) -> Result<f64> {
    if !(p0 > 1.0 && p1 > 1.0) {
        return invalid(format!("exponents must exceed 1, got {p0} and {p1}"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return invalid(format!("theta must lie in (0, 1), got {theta}"));
    }
    Ok(1.0 / ((1.0 - theta) / p0 + theta / p1))
}

/// A Lorentz couple `(L^{p0}, L^{p1})` together with its interpolation space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationCouple {
    pub e0: LorentzExponents,
    pub e1: LorentzExponents,
    pub theta: f64,
    /// `(L^{p0}, L^{p1})_{theta, q} = L^{p, q}`.
    pub eq: LorentzExponents,
}

impl InterpolationCouple {
    pub fn new(e0: LorentzExponents, e1: LorentzExponents, theta: f64, q: f64) -> Result<Self> {
        let p = interpolate_exponent(e0.p(), e1.p(), theta)?;
        Ok(Self {
            e0,
            e1,
            theta,
            eq: LorentzExponents::new(p, q)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GitBoundReport {
    /// `M0^{1-theta} M1^theta`.
    pub bound: f64,
    pub measured: f64,
    pub ok: bool,
}

/// Checks `M <= M0^{1-theta} M1^theta (1 + tol)`.
pub fn git_bound_check(m0: f64, m1: f64, m: f64, theta: f64, tol: f64) -> Result<GitBoundReport> {
    if !(m0 >= 0.0 && m1 >= 0.0) {
        return invalid(format!(
            "operator norms must be non-negative, got {m0} and {m1}"
        ));
    }
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("theta must lie in [0, 1], got {theta}"));
    }
    let bound = m0.powf(1.0 - theta) * m1.powf(theta);
    Ok(GitBoundReport {
        bound,
        measured: m,
        ok: m <= bound * (1.0 + tol),
    })
}

/// The full exponent pack for the power nonlinearity `|u|^{m-1} u` in
/// dimension `d` with stability exponent `r`.
///
/// All `p*` fields are Lebesgue indices of the weak spaces
/// `L^{p,inf}` (the predual indices `pZ*` go with second index 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationExponents {
    pub d: u32,
    pub m: u32,
    pub r: f64,
    /// Space of the nonlinearity, `d(m-1)/(2m)`.
    pub p_x: f64,
    /// Solution space, `d(m-1)/2`.
    pub p_y: f64,
    pub p_y1: f64,
    pub p_y2: f64,
    pub p_z1: f64,
    pub p_z2: f64,
    /// Predual of the solution space, `pY/(pY-1)`.
    pub p_z: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub theta: f64,
    /// `dr/(d+2r)`.
    pub p_t: f64,
    pub q1: f64,
    pub q2: f64,
    pub theta_tilde: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Polynomial decay rate `1/(m-1) - d/(2r)`.
    pub gamma: f64,
}

impl ApplicationExponents {
    pub fn x(&self) -> LorentzExponents {
        weak(self.p_x)
    }

    pub fn y(&self) -> LorentzExponents {
        weak(self.p_y)
    }

    pub fn y1(&self) -> LorentzExponents {
        weak(self.p_y1)
    }

    pub fn y2(&self) -> LorentzExponents {
        weak(self.p_y2)
    }

    /// The stability norm `L^{r,inf}`.
    pub fn q(&self) -> LorentzExponents {
        weak(self.r)
    }

    /// Dual of `X`, i.e. `L^{pX', 1}`.
    pub fn x_dual(&self) -> LorentzExponents {
        self.x().dual()
    }

    /// Flat `key=value` listing in a fixed order.
    pub fn key_values(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("d", self.d as f64),
            ("m", self.m as f64),
            ("r", self.r),
            ("pX", self.p_x),
            ("pY", self.p_y),
            ("pY1", self.p_y1),
            ("pY2", self.p_y2),
            ("pZ1", self.p_z1),
            ("pZ2", self.p_z2),
            ("pZ", self.p_z),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("theta", self.theta),
            ("pT", self.p_t),
            ("q1", self.q1),
            ("q2", self.q2),
            ("theta_tilde", self.theta_tilde),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
        ]
    }
}

fn weak(p: f64) -> LorentzExponents {
    LorentzExponents::weak(p).expect("derived exponents exceed 1")
}

type Q = Ratio<i64>;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

/// Minimal field interface shared by exact and floating evaluation.
trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn int(n: i64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn int(n: i64) -> Self {
        n as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Q {
    fn int(n: i64) -> Self {
        q(n)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

struct RParts {
    p_t: f64,
    q1: f64,
    q2: f64,
    theta_tilde: f64,
    beta1: f64,
    beta2: f64,
    gamma: f64,
    /// `(1 - theta_tilde) beta1 + theta_tilde beta2 - 1`, exact in the rational path.
    beta_identity_defect: f64,
}

fn r_parts<S: Scalar>(d: i64, m: i64, r: S) -> RParts {
    let one = S::int(1);
    let two = S::int(2);
    let ds = S::int(d);
    let inv_lo = one;
    let inv_mid = (r - one) / r;
    let top = ds * (r - one) - two * r;
    let zero = S::int(0);
    let inv_hi = if top > zero { top / (ds * r) } else { zero };
    let inv_q1 = (inv_lo + inv_mid) / two;
    let inv_q2 = (inv_mid + inv_hi) / two;
    // (r-1)/r = (1 - th) inv_q1 + th inv_q2
    let theta_tilde = (inv_q1 - inv_mid) / (inv_q1 - inv_q2);
    let shift = top / (ds * r);
    let beta1 = ds / two * (inv_q1 - shift);
    let beta2 = ds / two * (inv_q2 - shift);
    let gamma = one / S::int(m - 1) - ds / (two * r);
    let p_t = ds * r / (ds + two * r);
    let defect = (one - theta_tilde) * beta1 + theta_tilde * beta2 - one;
    RParts {
        p_t: p_t.to_f64(),
        q1: (one / inv_q1).to_f64(),
        q2: (one / inv_q2).to_f64(),
        theta_tilde: theta_tilde.to_f64(),
        beta1: beta1.to_f64(),
        beta2: beta2.to_f64(),
        gamma: gamma.to_f64(),
        beta_identity_defect: defect.to_f64(),
    }
}

/// Evaluates every exponent formula without checking the admissibility
/// constraints. Fails only where a formula divides by zero.
pub fn compute_application_exponents(d: u32, m: u32, r: f64) -> Result<ApplicationExponents> {
    if d == 0 || !(2..5).contains(&m) {
        return invalid(format!(
            "formulas need d >= 1 and 2 <= m < 5, got d={d}, m={m}"
        ));
    }
    if !(r.is_finite() && r > 1.0) {
        return invalid(format!("r must be finite and exceed 1, got {r}"));
    }
    let (di, mi) = (d as i64, m as i64);
    let z1_den = (2 * di + 1) * (mi - 1) - 4;
    let z2_den = (2 * di - 1) * (mi - 1) - 4;
    if z1_den <= 0 || z2_den <= 0 {
        return invalid("predual exponents are undefined for this (d, m)");
    }
    let base = q(2 * di * (mi - 1));
    let p_x = q(di * (mi - 1)) / q(2 * mi);
    let p_y = q(di * (mi - 1)) / q(2);
    let p_y1 = base / q(5 - mi);
    let p_y2 = base / q(mi + 3);
    let p_z1 = base / q(z1_den);
    let p_z2 = base / q(z2_den);
    let p_z = p_y / (p_y - q(1));
    let alpha1 = q(5) / q(4);
    let alpha2 = q(3) / q(4);
    let theta = q(1) / q(2);

    let rp = if r.fract() == 0.0 && r <= 1.0e4 {
        r_parts(di, mi, q(r as i64))
    } else {
        r_parts(di, mi, r)
    };
    Ok(ApplicationExponents {
        d,
        m,
        r,
        p_x: p_x.to_f64(),
        p_y: p_y.to_f64(),
        p_y1: p_y1.to_f64(),
        p_y2: p_y2.to_f64(),
        p_z1: p_z1.to_f64(),
        p_z2: p_z2.to_f64(),
        p_z: p_z.to_f64(),
        alpha1: alpha1.to_f64(),
        alpha2: alpha2.to_f64(),
        theta: theta.to_f64(),
        p_t: rp.p_t,
        q1: rp.q1,
        q2: rp.q2,
        theta_tilde: rp.theta_tilde,
        beta1: rp.beta1,
        beta2: rp.beta2,
        gamma: rp.gamma,
    })
}

fn violated(what: &str) -> Error {
    Error::Constraint(what.to_string())
}

/// Validates `(d, m, r)` and derives the complete exponent pack.
///
/// The smoothing identities `(d/2)(1/pX - 1/pY_j) = alpha_j` and the
/// interpolation identities are verified, exactly where rational.
pub fn derive_application_exponents(d: u32, m: u32, r: f64) -> Result<ApplicationExponents> {
    if d < 3 {
        return Err(violated("d >= 3"));
    }
    if m >= 5 {
        return Err(violated("m < 5"));
    }
    // m > d/(d-2)  <=>  m (d-2) > d
    if (m as i64) * (d as i64 - 2) <= d as i64 {
        return Err(violated("m > d/(d-2)"));
    }
    let (di, mi) = (d as i64, m as i64);
    if !(r.is_finite() && r > (di * (mi - 1)) as f64 / 2.0) {
        return Err(violated("r > d(m-1)/2"));
    }
    let e = compute_application_exponents(d, m, r)?;

    // Exact checks of the (d, m) identities.
    let half_d = q(di) / q(2);
    let inv_x = q(2 * mi) / q(di * (mi - 1));
    let inv_y1 = q(5 - mi) / q(2 * di * (mi - 1));
    let inv_y2 = q(mi + 3) / q(2 * di * (mi - 1));
    let alpha1 = half_d * (inv_x - inv_y1);
    let alpha2 = half_d * (inv_x - inv_y2);
    if alpha1 != q(5) / q(4) || alpha2 != q(3) / q(4) {
        return Err(violated("smoothing identities for alpha1, alpha2"));
    }
    if (q(1) - q(1) / q(2)) * alpha1 + q(1) / q(2) * alpha2 != q(1) {
        return Err(violated("(1 - theta) alpha1 + theta alpha2 = 1"));
    }

    let rp = if r.fract() == 0.0 && r <= 1.0e4 {
        r_parts(di, mi, q(r as i64))
    } else {
        r_parts(di, mi, r)
    };
    if rp.beta_identity_defect.abs() > 1e-12 {
        return Err(violated("(1 - theta_tilde) beta1 + theta_tilde beta2 = 1"));
    }
    if !(e.theta_tilde > 0.0 && e.theta_tilde < 1.0) {
        return Err(violated("0 < theta_tilde < 1"));
    }
    if !(e.beta2 > 0.0 && e.beta2 < 1.0 && e.beta1 > 1.0) {
        return Err(violated("0 < beta2 < 1 < beta1"));
    }
    if !(e.gamma > 0.0 && e.gamma < 1.0) {
        return Err(violated("0 < gamma < 1"));
    }
    let r_conj = r / (r - 1.0);
    if !(e.q1 > 1.0 && e.q1 < r_conj && e.q2 > r_conj) {
        return Err(violated("1 < q1 < r/(r-1) < q2"));
    }
    Ok(e)
}
