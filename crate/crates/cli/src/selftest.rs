//! Fast invariant suite.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C;

use pap_core::field::{lorentz_norm, Field, GridSpec, LorentzExponents, MaskPolicy};
use pap_core::interp::derive_application_exponents;
use pap_core::mild::linearity_check;
use pap_core::pap::{translation_defect, SpaceNorm, TimeGrid, Trajectory};
use pap_core::quadrature::HistoryQuadrature;
use pap_core::semigroup::{apply, bump, kernel_eval, Backend, Coefficient, SemigroupSpec};

use crate::report::{Check, Outcome};

/// Deliberate faults for checking that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Scale the reference heat kernel by 1%.
    KernelConstant,
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Runs every check; `fault` injects a defect into the reference values.
pub fn selftest(fault: Option<Fault>) -> Outcome {
    let mut checks = Vec::new();
    let b = C::new(1.0, 0.3);

    // weak norm of |x|^{-1/2} in 1d is sqrt(2)
    let g = GridSpec::new(1, 1024, 1.0).expect("valid grid");
    let u = Field::from_fn_masked(g, MaskPolicy::Zero, |x| C::new(x[0].abs().powf(-0.5), 0.0))
        .expect("masked");
    let w = lorentz_norm(&u, LorentzExponents::weak(2.0).expect("p > 1"));
    checks.push(Check::at_most(
        "weak_norm_oracle",
        (w - SQRT_2).abs() / SQRT_2,
        0.15,
    ));

    // semigroup law on the periodic backend
    let g = GridSpec::new(1, 64, PI).expect("valid grid");
    let spec = SemigroupSpec::new(
        Coefficient::constant(b, 0.5).expect("elliptic"),
        Backend::Fourier,
        g,
    )
    .expect("spec");
    let u = bump(&g, &[0.3], &[1.2]);
    let once = apply(&spec, 0.7, &u).expect("apply");
    let twice = apply(&spec, 0.4, &apply(&spec, 0.3, &u).expect("apply")).expect("apply");
    checks.push(Check::at_most(
        "semigroup_law",
        max_diff(&once, &twice),
        1e-12,
    ));

    // free-space backend against a direct kernel sum
    let g = GridSpec::new(1, 64, 8.0).expect("valid grid");
    let coeff = Coefficient::constant(b, 0.5).expect("elliptic");
    let spec = SemigroupSpec::new(coeff.clone(), Backend::Kernel, g).expect("spec");
    let u = bump(&g, &[0.5], &[2.0]);
    let t = 0.5;
    let scale = if fault == Some(Fault::KernelConstant) {
        1.01
    } else {
        1.0
    };
    let direct = Field::from_fn(g, |x| {
        (0..g.len())
            .map(|j| {
                let y = g.coords(j);
                kernel_eval(&coeff, t, x, &y[..1]).expect("kernel")
                    * u.values()[j]
                    * g.cell_volume()
                    * scale
            })
            .sum()
    })
    .expect("finite");
    let fast = apply(&spec, t, &u).expect("apply");
    checks.push(Check::at_most(
        "kernel_constant",
        max_diff(&direct, &fast) / direct.sup_abs(),
        1e-9,
    ));

    // linearity of the solution operator
    let g = GridSpec::new(1, 16, PI).expect("valid grid");
    let spec = SemigroupSpec::new(
        Coefficient::constant(b, 0.5).expect("elliptic"),
        Backend::Fourier,
        g,
    )
    .expect("spec");
    let time = TimeGrid::with_step(-3.0, 0.1, 40).expect("grid");
    let p1 = Field::from_real_fn(g, |x| x[0].sin()).expect("finite");
    let p2 = Field::from_real_fn(g, |x| (2.0 * x[0]).cos()).expect("finite");
    let f1 = Trajectory::separable(time, |t| C::new(t.sin(), 0.0), &p1, SpaceNorm::Modulus);
    let f2 = Trajectory::separable(
        time,
        |t| C::new(1.0 / (1.0 + t * t), 0.0),
        &p2,
        SpaceNorm::Modulus,
    );
    let quad = HistoryQuadrature::with_defaults(2.0).expect("quadrature");
    let out = TimeGrid::with_step(-1.0, 0.1, 10).expect("grid");
    let lin = linearity_check(
        &spec,
        &f1,
        &f2,
        C::new(2.0, -1.0),
        &quad,
        &out,
        LorentzExponents::weak(2.0).expect("p > 1"),
        1e-10,
    )
    .expect("solve");
    checks.push(Check::at_most(
        "linearity",
        lin.defect / (1.0 + lin.scale),
        1e-10,
    ));

    // translation defect: zero shift, symmetry, exact period
    let time = TimeGrid::new(0.0, 8.0 * PI, 256).expect("grid");
    let f = Trajectory::scalar_fn(time, |t| C::new(t.sin() + 0.5 * (3.0 * t).cos(), 0.0))
        .expect("finite");
    let at = |s: f64| translation_defect(&f, s).expect("overlap");
    checks.push(Check::at_most("defect_zero_shift", at(0.0), 0.0));
    checks.push(Check::at_most(
        "defect_symmetry",
        (at(1.0) - at(-1.0)).abs(),
        0.0,
    ));
    checks.push(Check::at_most("defect_period", at(2.0 * PI), 1e-12));

    let e = derive_application_exponents(3, 4, 9.0).expect("admissible");
    checks.push(Check::near("gamma_d3_m4_r9", e.gamma, 1.0 / 6.0, 1e-12));

    Outcome {
        experiment: "selftest".into(),
        csv: String::new(),
        checks,
        info: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes_and_fault_is_caught() {
        let ok = selftest(None);
        assert!(ok.passed(), "{}", ok.summary());
        let bad = selftest(Some(Fault::KernelConstant));
        assert!(!bad.passed());
        assert_eq!(bad.checks.iter().filter(|c| !c.passed).count(), 1);
        assert_eq!(ok.summary(), selftest(None).summary());
    }
}
