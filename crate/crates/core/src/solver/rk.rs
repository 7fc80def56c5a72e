//! Adaptive Dormand-Prince 5(4) integration of the second-order system
//! `y''(u) = w(u) y(u)` with complex state, used as the accuracy oracle
//! for every characteristic-function evaluation path.

use num_complex::Complex64;

use crate::error::{CfdoError, Result};

/// Integrator statistics carried on a trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub steps: u64,
    pub rejected: u64,
    /// Largest accepted scaled local error estimate (1.0 = at tolerance).
    pub max_local_error: f64,
}

/// Butcher tableau of the Dormand-Prince 5(4) pair.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
/// 5th-order weights (row 7 of A; FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
/// Embedded 4th-order weights.
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

type State = [Complex64; 2];

#[inline]
fn rhs(w: &dyn Fn(f64) -> Complex64, u: f64, s: &State) -> State {
    [s[1], w(u) * s[0]]
}

#[inline]
fn axpy(s: &State, coeffs: &[(f64, &State)], h: f64) -> State {
    let mut out = *s;
    for &(c, k) in coeffs {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate `y'' = w(u) y` from u = 0 to `u_end` > 0, returning
/// `(u, y, y')` at `n_samples` equally spaced points (endpoints included).
/// Local error is controlled to `rel_tol` relative / `rel_tol / 100`
/// absolute per step by a PI controller.
pub fn integrate_second_order(
    w: &dyn Fn(f64) -> Complex64,
    y0: Complex64,
    dy0: Complex64,
    u_end: f64,
    rel_tol: f64,
    n_samples: usize,
) -> Result<(Vec<(f64, Complex64, Complex64)>, StepStats)> {
    assert!(u_end > 0.0 && n_samples >= 2);
    let atol = rel_tol * 1e-2;
    let h_min = 1e-14 * u_end;
    const MAX_STEPS: u64 = 20_000_000;

    let mut stats = StepStats::default();
    let mut out = Vec::with_capacity(n_samples);
    out.push((0.0, y0, dy0));

    let mut u = 0.0f64;
    let mut s: State = [y0, dy0];
    let mut k1 = rhs(w, u, &s);
    // Conservative opening step; the controller recovers quickly.
    let mut h = (u_end / (n_samples - 1) as f64)
        .min(0.1 / (1.0 + w(0.0).norm().sqrt()))
        .max(h_min * 16.0);
    let mut err_prev = 1.0f64;

    for j in 1..n_samples {
        let target = u_end * j as f64 / (n_samples - 1) as f64;
        while u < target {
            if stats.steps + stats.rejected > MAX_STEPS {
                return Err(CfdoError::Integration {
                    location: u,
                    message: "step budget exhausted".into(),
                });
            }
            let clipped = h.min(target - u);
            let hs = clipped;

            let s2 = axpy(&s, &[(A21, &k1)], hs);
            let k2 = rhs(w, u + C2 * hs, &s2);
            let s3 = axpy(&s, &[(A31, &k1), (A32, &k2)], hs);
            let k3 = rhs(w, u + C3 * hs, &s3);
            let s4 = axpy(&s, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs);
            let k4 = rhs(w, u + C4 * hs, &s4);
            let s5 = axpy(&s, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs);
            let k5 = rhs(w, u + C5 * hs, &s5);
            let s6 = axpy(
                &s,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                hs,
            );
            let k6 = rhs(w, u + hs, &s6);
            let s_new = axpy(
                &s,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                hs,
            );
            let k7 = rhs(w, u + hs, &s_new);
            let s_low = axpy(
                &s,
                &[
                    (E1, &k1),
                    (E3, &k3),
                    (E4, &k4),
                    (E5, &k5),
                    (E6, &k6),
                    (E7, &k7),
                ],
                hs,
            );

            let mut err = 0.0f64;
            for i in 0..2 {
                let sc = atol + rel_tol * s[i].norm().max(s_new[i].norm());
                let e = (s_new[i] - s_low[i]).norm() / sc;
                err += e * e;
            }
            let err = (err / 2.0).sqrt();

            if err.is_finite() && err <= 1.0 {
                u += hs;
                if target - u < 1e-14 * u_end {
                    u = target;
                }
                s = s_new;
                k1 = k7;
                stats.steps += 1;
                stats.max_local_error = stats.max_local_error.max(err);
                let factor =
                    (0.9 * err.max(1e-10).powf(-0.2) * err_prev.powf(0.04)).clamp(0.2, 5.0);
                err_prev = err.max(1e-10);
                // Grow from the attempted step, not the clipped remainder.
                h = (hs.max(h * 0.999)) * factor;
            } else {
                stats.rejected += 1;
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h = hs * factor;
                if h < h_min {
                    return Err(CfdoError::Integration {
                        location: u,
                        message: format!("step size collapsed to {h:.3e}"),
                    });
                }
            }
        }
        out.push((target, s[0], s[1]));
    }
    Ok((out, stats))
}
