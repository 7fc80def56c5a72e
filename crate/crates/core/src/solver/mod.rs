//! Shooting solver for the pencil in the substituted coordinate.
//!
//! With `u = x^alpha / alpha` the pencil becomes the classical system
//! `y''(u) = (2 lambda p(x(u)) + q(x(u)) - lambda^2) y(u)` on `[0, U]`,
//! `U = pi^alpha / alpha`, and the conformable derivative turns into
//! `d/du`. Two initial-value solutions are produced:
//!
//! * `phi`: `y(0) = 1`, `y'(0) = h`, integrated left to right;
//! * `psi`: `y(U) = 1`, `y'(U) = -H`, integrated right to left.
//!
//! The characteristic function is `Delta(lambda) = phi'(U) + H phi(U)`,
//! and by Wronskian constancy it equals `-(psi'(0) - h psi(0))`; both
//! routes are evaluated on every call and their mismatch is reported.

pub mod magnus;
mod rk;

pub use rk::integrate_second_order;
pub use rk::StepStats as IntegratorStats;

use num_complex::Complex64;

use crate::conformable::PencilState;
use crate::error::{CfdoError, Result};
use crate::problem::ProblemSpec;
use crate::quad::{gauss10_panels, oscillatory_panels};

/// Relative mismatch between the forward and backward routes to
/// `Delta(lambda)` above which the evaluation is rejected.
pub const DELTA_CONSISTENCY_LIMIT: f64 = 1e-7;

/// One stored point of an initial-value solution in the substituted
/// coordinate. `d2y` is recomputed from the differential equation, so the
/// triple `(y, dy, d2y)` supports quintic reconstruction between samples.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub u: f64,
    pub x: f64,
    pub y: Complex64,
    pub dy: Complex64,
    pub d2y: Complex64,
}

/// A fundamental solution sampled on a uniform grid in `u`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub lambda: Complex64,
    /// Samples in strictly increasing `u` (equivalently `x`).
    pub samples: Vec<TrajectorySample>,
    pub stats: IntegratorStats,
    /// True for the left-normalized solution, false for the right one.
    pub forward: bool,
}

impl Trajectory {
    /// Boundary-ready view of sample `i`; imaginary parts are dropped, so
    /// this is meaningful for real `lambda` only.
    pub fn state(&self, i: usize) -> PencilState {
        let s = &self.samples[i];
        PencilState {
            x: s.x,
            y: s.y.re,
            dy_alpha: s.dy.re,
        }
    }
}

/// Both routes to the characteristic function at one `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct CharacteristicValue {
    pub lambda: Complex64,
    /// `phi'(U) + H phi(U)`.
    pub delta: Complex64,
    /// `-(psi'(0) - h psi(0))`.
    pub delta_alt: Complex64,
    /// `|delta - delta_alt| / (1 + |delta|)`.
    pub discrepancy: f64,
}

/// Sample count scaling with the oscillation count `|lambda| U / 2 pi`,
/// at least 24 samples per oscillation and never fewer than 257 points.
fn sample_count(lambda_abs: f64, u_cap: f64) -> usize {
    let oscillations = (lambda_abs * u_cap / (2.0 * std::f64::consts::PI)).ceil();
    (24 * oscillations as usize + 1).max(257)
}

fn build_w(spec: &ProblemSpec, lambda: Complex64) -> impl Fn(f64) -> Complex64 + '_ {
    move |u: f64| {
        let p = spec.p_hat_direct(u);
        let q = spec.q_hat_direct(u);
        2.0 * lambda * p + q - lambda * lambda
    }
}

/// Left-normalized solution: `phi(0) = 1`, `phi'(0) = h`.
pub fn solve_phi(spec: &ProblemSpec, lambda: Complex64) -> Result<Trajectory> {
    let u_cap = spec.u_cap();
    let n = sample_count(lambda.norm(), u_cap);
    let w = build_w(spec, lambda);
    let (points, stats) = rk::integrate_second_order(
        &w,
        Complex64::new(1.0, 0.0),
        Complex64::new(spec.h(), 0.0),
        u_cap,
        spec.settings().ode_rel_tol,
        n,
    )?;
    let samples = points
        .into_iter()
        .map(|(u, y, dy)| TrajectorySample {
            u,
            x: spec.map().x_of_u(u),
            y,
            dy,
            d2y: w(u) * y,
        })
        .collect();
    Ok(Trajectory {
        lambda,
        samples,
        stats,
        forward: true,
    })
}

/// Right-normalized solution: `psi(U) = 1`, `psi'(U) = -H`. Computed by
/// integrating `z(v) = psi(U - v)` forward in `v` and un-reflecting, so
/// the returned samples are again in increasing `u`.
pub fn solve_psi(spec: &ProblemSpec, lambda: Complex64) -> Result<Trajectory> {
    let u_cap = spec.u_cap();
    let n = sample_count(lambda.norm(), u_cap);
    let w = build_w(spec, lambda);
    let wz = |v: f64| w(u_cap - v);
    let (points, stats) = rk::integrate_second_order(
        &wz,
        Complex64::new(1.0, 0.0),
        Complex64::new(spec.big_h(), 0.0),
        u_cap,
        spec.settings().ode_rel_tol,
        n,
    )?;
    let mut samples: Vec<TrajectorySample> = points
        .into_iter()
        .map(|(v, z, dz)| {
            let u = (u_cap - v).max(0.0);
            TrajectorySample {
                u,
                x: spec.map().x_of_u(u),
                y: z,
                dy: -dz,
                d2y: wz(v) * z,
            }
        })
        .collect();
    samples.reverse();
    Ok(Trajectory {
        lambda,
        samples,
        stats,
        forward: false,
    })
}

/// Evaluate `Delta(lambda)` by both shooting directions and check the
/// routes against each other. A mismatch past
/// [`DELTA_CONSISTENCY_LIMIT`] is an evaluation failure, not a value.
pub fn delta(spec: &ProblemSpec, lambda: Complex64) -> Result<CharacteristicValue> {
    let phi = solve_phi(spec, lambda)?;
    let psi = solve_psi(spec, lambda)?;
    let end = phi.samples.last().expect("trajectory is never empty");
    let start = psi.samples.first().expect("trajectory is never empty");
    let d = end.dy + spec.big_h() * end.y;
    let d_alt = spec.h() * start.y - start.dy;
    let discrepancy = (d - d_alt).norm() / (1.0 + d.norm());
    if !discrepancy.is_finite() || discrepancy >= DELTA_CONSISTENCY_LIMIT {
        return Err(CfdoError::Consistency {
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            discrepancy,
            limit: DELTA_CONSISTENCY_LIMIT,
        });
    }
    Ok(CharacteristicValue {
        lambda,
        delta: d,
        delta_alt: d_alt,
        discrepancy,
    })
}

/// Quintic Hermite reconstruction on one cell from endpoint value, first
/// and second derivative; `t` in [0, 1], `h` the cell width.
#[inline]
fn quintic_cell(f0: f64, d0: f64, s0: f64, f1: f64, d1: f64, s1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * t3 - t4 + 0.5 * t5;
    f0 * h00 + h * d0 * h10 + h * h * s0 * h20 + f1 * h01 + h * d1 * h11 + h * h * s1 * h21
}

/// Self-consistency residual of the left solution against its Volterra
/// representation
///
/// ```text
/// phi(x) = cos(lambda u - Q(u)) + h / (lambda - p(0)) sin(lambda u - Q(u))
///   + int_0^u sin(lambda (u - v) - Q(u) + Q(v)) / (lambda - p(v))
///       * [ (q + p^2)(v) phi(v)
///           + (D^a p)(v) / (lambda - p(v)) * phi'(v) ] dv
/// ```
///
/// (all coefficient functions in the substituted coordinate, `Q` the
/// running integral of `p`). The representation needs
/// `|lambda| > 2 max |p| + 1` to keep the denominators away from zero;
/// smaller `lambda` is a domain error. Returns the maximum absolute
/// mismatch over the 33-point grid `x_j = j pi / 32`.
pub fn integral_equation_residual(spec: &ProblemSpec, lambda: f64) -> Result<f64> {
    let bound = 2.0 * spec.max_abs_p() + 1.0;
    if !(lambda.abs() > bound) || !lambda.is_finite() {
        return Err(CfdoError::Domain(format!(
            "integral representation needs |lambda| > {bound:.6}, got {lambda:.6}"
        )));
    }
    let u_cap = spec.u_cap();
    let traj = solve_phi(spec, Complex64::new(lambda, 0.0))?;
    let n = traj.samples.len();
    let hu = u_cap / (n - 1) as f64;
    let alpha = spec.alpha();

    // Uniform-grid views plus the third derivative from differentiating
    // the equation: y''' = w' y + w y'.
    let mut ys = Vec::with_capacity(n);
    let mut dys = Vec::with_capacity(n);
    let mut d2ys = Vec::with_capacity(n);
    let mut d3ys = Vec::with_capacity(n);
    for s in &traj.samples {
        let wdot = {
            let dqa = if s.x > 0.0 {
                s.x.powf(1.0 - alpha) * spec.dq_at(s.x)
            } else if alpha == 1.0 {
                spec.dq_at(0.0)
            } else {
                0.0
            };
            2.0 * lambda * spec.dpa_hat(s.u) + dqa
        };
        let w = 2.0 * lambda * spec.p_hat_direct(s.u) + spec.q_hat_direct(s.u) - lambda * lambda;
        ys.push(s.y.re);
        dys.push(s.dy.re);
        d2ys.push(s.d2y.re);
        d3ys.push(wdot * s.y.re + w * s.dy.re);
    }

    let cell = |u: f64| -> (usize, f64) {
        let raw = (u / hu).floor() as isize;
        let k = raw.clamp(0, (n - 2) as isize) as usize;
        (k, (u - k as f64 * hu) / hu)
    };
    let phi_at = |u: f64| -> f64 {
        let (k, t) = cell(u);
        quintic_cell(
            ys[k],
            dys[k],
            d2ys[k],
            ys[k + 1],
            dys[k + 1],
            d2ys[k + 1],
            hu,
            t,
        )
    };
    let dphi_at = |u: f64| -> f64 {
        let (k, t) = cell(u);
        quintic_cell(
            dys[k],
            d2ys[k],
            d3ys[k],
            dys[k + 1],
            d2ys[k + 1],
            d3ys[k + 1],
            hu,
            t,
        )
    };

    let p0 = spec.p_at(0.0);
    let mut worst = 0.0f64;
    for j in 0..=32 {
        let x_j = std::f64::consts::PI * j as f64 / 32.0;
        let u_j = spec.map().u_of_x(x_j);
        let q_j = spec.q_cum_hat(u_j);
        let free =
            (lambda * u_j - q_j).cos() + spec.h() / (lambda - p0) * (lambda * u_j - q_j).sin();
        let kernel = |v: f64| {
            let pv = spec.p_hat(v);
            let denom = lambda - pv;
            let phase = lambda * (u_j - v) - q_j + spec.q_cum_hat(v);
            phase.sin() / denom
                * (spec.qpp_hat(v) * phi_at(v) + spec.dpa_hat(v) / denom * dphi_at(v))
        };
        let integral = if u_j > 0.0 {
            gauss10_panels(
                &kernel,
                0.0,
                u_j,
                oscillatory_panels(2.2 * lambda.abs(), u_j),
            )
        } else {
            0.0
        };
        let residual = (free + integral - phi_at(u_j)).abs();
        worst = worst.max(residual);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;

    fn spec_of(alpha: f64, p: &str, q: &str, h: f64, big_h: f64) -> ProblemSpec {
        ProblemSpec::new(alpha, p, q, h, big_h).unwrap()
    }

    fn test_problem() -> ProblemSpec {
        spec_of(1.0, "0.2*sin(t)", "cos(t)", 0.3, 0.3)
    }

    #[test]
    fn phi_matches_free_cosine() {
        for &alpha in &[1.0, 0.5] {
            let spec = spec_of(alpha, "0", "0", 0.0, 0.0);
            let lam = Complex64::new(3.0, 0.0);
            let traj = solve_phi(&spec, lam).unwrap();
            for s in &traj.samples {
                let exact = (3.0 * s.u).cos();
                assert!((s.y.re - exact).abs() < 1e-9, "alpha={alpha} u={}", s.u);
                assert!(s.y.im == 0.0);
            }
        }
    }

    #[test]
    fn phi_with_boundary_slope() {
        let spec = spec_of(1.0, "0", "0", 0.75, 0.0);
        let lam = 2.5;
        let traj = solve_phi(&spec, Complex64::new(lam, 0.0)).unwrap();
        for s in &traj.samples {
            let exact = (lam * s.u).cos() + 0.75 / lam * (lam * s.u).sin();
            assert!((s.y.re - exact).abs() < 1e-9);
            let exact_d = -lam * (lam * s.u).sin() + 0.75 * (lam * s.u).cos();
            assert!((s.dy.re - exact_d).abs() < 1e-8);
        }
    }

    #[test]
    fn phi_constant_p_closed_form() {
        // Constant p shifts the square of the frequency:
        // y'' = (2 lambda c - lambda^2) y, phi = cos(sqrt(lambda^2 - 2 lambda c) u).
        for &alpha in &[1.0, 0.5] {
            let spec = spec_of(alpha, "0.3", "0", 0.0, 0.0);
            let lam = 5.0f64;
            let omega = (lam * lam - 2.0 * lam * 0.3).sqrt();
            let traj = solve_phi(&spec, Complex64::new(lam, 0.0)).unwrap();
            let end = traj.samples.last().unwrap();
            assert!(
                (end.y.re - (omega * spec.u_cap()).cos()).abs() < 1e-9,
                "alpha={alpha}"
            );
        }
    }

    #[test]
    fn psi_matches_reflected_cosine() {
        let spec = spec_of(1.0, "0", "0", 0.0, 2.0);
        let lam = 3.0;
        let u_cap = spec.u_cap();
        let traj = solve_psi(&spec, Complex64::new(lam, 0.0)).unwrap();
        assert!(!traj.forward);
        for s in &traj.samples {
            let span = u_cap - s.u;
            let exact = (lam * span).cos() + 2.0 / lam * (lam * span).sin();
            assert!((s.y.re - exact).abs() < 1e-9, "u={}", s.u);
            let exact_d = lam * (lam * span).sin() - 2.0 * (lam * span).cos();
            assert!((s.dy.re - exact_d).abs() < 1e-8, "u={}", s.u);
        }
        // Normalization at the right end.
        let last = traj.samples.last().unwrap();
        assert!((last.y.re - 1.0).abs() < 1e-10);
        assert!((last.dy.re + 2.0).abs() < 1e-9);
    }

    #[test]
    fn trajectories_are_monotone_in_x() {
        let spec = test_problem();
        for traj in [
            solve_phi(&spec, Complex64::new(6.0, 0.0)).unwrap(),
            solve_psi(&spec, Complex64::new(6.0, 0.0)).unwrap(),
        ] {
            assert!(traj.samples.len() >= 257);
            for pair in traj.samples.windows(2) {
                assert!(pair[1].x > pair[0].x);
                assert!(pair[1].u > pair[0].u);
            }
            let st = traj.state(0);
            assert_eq!(st.x, traj.samples[0].x);
        }
    }

    #[test]
    fn delta_free_examples() {
        // p = q = 0, h = H = 0: Delta = -lambda sin(lambda U).
        for &alpha in &[1.0, 0.5] {
            let spec = spec_of(alpha, "0", "0", 0.0, 0.0);
            let u_cap = spec.u_cap();
            for &lam in &[0.3, 1.7, 9.2] {
                let cv = delta(&spec, Complex64::new(lam, 0.0)).unwrap();
                let exact = -lam * (lam * u_cap).sin();
                assert!(
                    (cv.delta.re - exact).abs() < 1e-8 * (1.0 + lam * lam),
                    "alpha={alpha} lambda={lam}"
                );
                assert!(cv.discrepancy < 1e-9);
            }
        }
    }

    #[test]
    fn delta_with_robin_constants() {
        // h = 1, H = 2, lambda = 4, alpha = 1: phi(pi) = 1, phi'(pi) = 1,
        // so Delta = 1 + 2 = 3.
        let spec = spec_of(1.0, "0", "0", 1.0, 2.0);
        let cv = delta(&spec, Complex64::new(4.0, 0.0)).unwrap();
        assert!((cv.delta.re - 3.0).abs() < 1e-8);
        assert!((cv.delta_alt.re - 3.0).abs() < 1e-8);
    }

    #[test]
    fn delta_routes_agree_on_generic_problem() {
        let spec = test_problem();
        for &lam in &[0.4, 7.3, 23.0] {
            let cv = delta(&spec, Complex64::new(lam, 0.0)).unwrap();
            assert!(cv.discrepancy < 1e-9, "lambda={lam}: {}", cv.discrepancy);
        }
    }

    #[test]
    fn delta_respects_conjugation() {
        let spec = test_problem();
        let a = delta(&spec, Complex64::new(2.0, 0.5)).unwrap();
        let b = delta(&spec, Complex64::new(2.0, -0.5)).unwrap();
        assert!((a.delta - b.delta.conj()).norm() < 1e-10 * a.delta.norm().max(1.0));
    }

    #[test]
    fn residual_vanishes_without_potential() {
        let spec = spec_of(1.0, "0", "0", 0.4, 0.0);
        let res = integral_equation_residual(&spec, 5.0).unwrap();
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn residual_small_on_generic_problem() {
        let spec = test_problem();
        let r20 = integral_equation_residual(&spec, 20.0).unwrap();
        assert!(r20 < 1e-6, "residual at 20: {r20}");
        let r40 = integral_equation_residual(&spec, 40.0).unwrap();
        assert!(r40 < 1e-6, "residual at 40: {r40}");
    }

    #[test]
    fn residual_rejects_small_lambda() {
        let spec = test_problem();
        let err = integral_equation_residual(&spec, 1.0).unwrap_err();
        assert!(matches!(err, CfdoError::Domain(_)));
    }
}
