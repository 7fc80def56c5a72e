//! Built-in self-checks: one fast invariant per corner of the library,
//! runnable from the command line to verify an installation end to end
//! in a few seconds. Each check is independent and reports a pass flag
//! plus a one-line numeric detail; errors are folded into failures
//! rather than propagated.

use num_complex::Complex64;

use crate::conformable::{
    conformable_derivative, conformable_integral, fractional_wronskian, FractionalOrder,
    SmoothFunction,
};
use crate::error::Result;
use crate::problem::{self, ProblemSpec, ShiftMode};
use crate::quad::{gauss10_panels, oscillatory_panels};
use crate::rng::SplitMix64;
use crate::solver;
use crate::spectrum;
use crate::trace;

use std::f64::consts::PI;

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match body() {
        Ok((passed, detail)) => CheckResult {
            name,
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_spec(rng: &mut SplitMix64) -> Result<ProblemSpec> {
    let alpha = [0.5, 0.8, 1.0][rng.below(3)];
    let p = format!("{:.6}*sin(t)", rng.range(-0.3, 0.3));
    let q = format!("{:.6}*cos(t)", rng.range(-0.5, 0.5));
    ProblemSpec::new(alpha, &p, &q, rng.range(-0.5, 0.5), rng.range(-0.5, 0.5))
}

fn inverse_identities(rng: &mut SplitMix64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &alpha in &[0.5, 1.0] {
        let order = FractionalOrder::new(alpha)?;
        let (a, b, c) = (
            rng.range(-1.0, 1.0),
            rng.range(-1.0, 1.0),
            rng.range(-0.5, 0.5),
        );
        let f = SmoothFunction::from_fn(move |x| a + b * (x).sin() + c * x * x);
        for &x in &[0.7, 2.1] {
            // d/dx^alpha of the alpha-integral recovers the integrand.
            let g = SmoothFunction::from_fn(move |t| {
                let inner = SmoothFunction::from_fn(move |s| a + b * (s).sin() + c * s * s);
                conformable_integral(&inner, t, order).unwrap_or(f64::NAN)
            });
            let d1 = conformable_derivative(&g, x, order)? - f.value(x);
            // The alpha-integral of the alpha-derivative loses only f(0).
            let d = SmoothFunction::from_fn(move |t| {
                let inner = SmoothFunction::from_fn(move |s| a + b * (s).sin() + c * s * s);
                conformable_derivative(&inner, t, order).unwrap_or(f64::NAN)
            });
            let d2 = conformable_integral(&d, x, order)? - (f.value(x) - f.value(0.0));
            worst = worst.max(d1.abs()).max(d2.abs());
        }
    }
    Ok((
        worst < 1e-7,
        format!("max residual {worst:.2e} (limit 1e-7)"),
    ))
}

fn free_solution_oracle() -> Result<(bool, String)> {
    let spec = ProblemSpec::new(0.7, "0", "0", 0.3, 0.0)?;
    let lambda = 3.0;
    let u_cap = spec.u_cap();
    let traj = solver::solve_phi(&spec, Complex64::new(lambda, 0.0))?;
    let got = traj.samples.last().unwrap().y.re;
    let want = (lambda * u_cap).cos() + spec.h() / lambda * (lambda * u_cap).sin();
    let err = (got - want).abs();
    Ok((err < 1e-9, format!("phi(pi) error {err:.2e} (limit 1e-9)")))
}

fn characteristic_consistency(rng: &mut SplitMix64) -> Result<(bool, String)> {
    let spec = random_spec(rng)?;
    let lambda = rng.range(1.0, 8.0);
    let value = solver::delta(&spec, Complex64::new(lambda, 0.0))?;
    let d = value.discrepancy;
    Ok((
        d < 1e-7,
        format!("two-route mismatch {d:.2e} at lambda {lambda:.3} (limit 1e-7)"),
    ))
}

fn wronskian_constancy(rng: &mut SplitMix64) -> Result<(bool, String)> {
    let spec = random_spec(rng)?;
    let lambda = Complex64::new(rng.range(1.0, 6.0), 0.0);
    let phi = solver::solve_phi(&spec, lambda)?;
    let psi = solver::solve_psi(&spec, lambda)?;
    let n = phi.samples.len().min(psi.samples.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in [0, n / 3, n / 2, 2 * n / 3, n - 1] {
        let w = fractional_wronskian(&phi.state(i), &psi.state(i));
        lo = lo.min(w);
        hi = hi.max(w);
    }
    let drift = (hi - lo) / (1.0 + hi.abs().max(lo.abs()));
    Ok((
        drift < 1e-7,
        format!("relative drift {drift:.2e} (limit 1e-7)"),
    ))
}

fn constant_potential_spectrum() -> Result<(bool, String)> {
    let spec = ProblemSpec::new(1.0, "0", "0.1", 0.0, 0.0)?;
    let s = spectrum::find_eigenvalues(&spec, 3)?;
    let mut worst = 0.0f64;
    for k in 1..=3i64 {
        let want = ((k * k) as f64 + 0.1).sqrt();
        worst = worst.max((s.entries[&k] - want).abs());
        worst = worst.max((s.entries[&-k] + want).abs());
    }
    worst = worst.max((s.zero_pair.0 - 0.1f64.sqrt()).abs());
    let ok = worst < 1e-8 && s.certified_count == 8;
    Ok((
        ok,
        format!(
            "max eigenvalue error {worst:.2e} (limit 1e-8), certified {}",
            s.certified_count
        ),
    ))
}

fn complex_pair_certification() -> Result<(bool, String)> {
    let spec = ProblemSpec::new(1.0, "0.2*sin(t)", "cos(t)", 0.3, 0.3)?;
    let s = spectrum::find_eigenvalues(&spec, 2)?;
    let ok = s.certified_count == 6 && s.zero_pair_imag > 0.0;
    Ok((
        ok,
        format!(
            "certified {} of 6, central pair {:.6} +- {:.6}i",
            s.certified_count, s.zero_pair.0, s.zero_pair_imag
        ),
    ))
}

fn trivial_trace_residual() -> Result<(bool, String)> {
    let spec = ProblemSpec::new(0.5, "0", "0", 0.0, 0.0)?;
    let r = trace::trace1_sides(&spec, 8, ShiftMode::MeanShift)?;
    let err = r.residual.abs();
    Ok((
        err < 1e-9,
        format!("free-problem residual {err:.2e} (limit 1e-9)"),
    ))
}

fn cot_contour_cancellation() -> Result<(bool, String)> {
    let v = trace::cot_contour_value(1.0, 6).norm();
    Ok((v < 1e-6, format!("contour magnitude {v:.2e} (limit 1e-6)")))
}

fn oscillatory_quadrature() -> Result<(bool, String)> {
    let freq = 40.0;
    let panels = oscillatory_panels(freq, PI);
    let got = gauss10_panels(&|u| (freq * u).sin(), 0.0, PI, panels);
    let want = (1.0 - (freq * PI).cos()) / freq;
    let err = (got - want).abs();
    Ok((
        err < 1e-12,
        format!("sin({freq}u) integral error {err:.2e} (limit 1e-12)"),
    ))
}

fn eigenvalue_guess_consistency() -> Result<(bool, String)> {
    // The closed-form first-order guess must sit within half a spacing
    // of the located eigenvalue well into the spectrum.
    let spec = ProblemSpec::new(1.0, "0.2*sin(t)", "cos(t)", 0.3, 0.3)?;
    let s = spectrum::find_eigenvalues(&spec, 6)?;
    let spacing = problem::leading_frequency(&spec, 1);
    let mut worst = 0.0f64;
    for k in [5i64, 6, -5, -6] {
        let gap = (s.entries[&k] - problem::eigen_guess(&spec, k)?).abs();
        worst = worst.max(gap / spacing);
    }
    Ok((
        worst < 0.5,
        format!("max |eigenvalue - guess| = {worst:.3} spacings (limit 0.5)"),
    ))
}

/// Run every self-check. The seed feeds the randomized ones so a
/// failure can be reproduced exactly.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut rng = SplitMix64::new(seed);
    vec![
        check("calculus-inverse-identities", || {
            inverse_identities(&mut rng)
        }),
        check("free-solution-oracle", free_solution_oracle),
        check("characteristic-consistency", || {
            characteristic_consistency(&mut rng)
        }),
        check("wronskian-constancy", || wronskian_constancy(&mut rng)),
        check("constant-potential-spectrum", constant_potential_spectrum),
        check("complex-pair-certification", complex_pair_certification),
        check("trivial-trace-residual", trivial_trace_residual),
        check("cot-contour-cancellation", cot_contour_cancellation),
        check("oscillatory-quadrature", oscillatory_quadrature),
        check("eigenvalue-guess-consistency", eigenvalue_guess_consistency),
    ]
}
