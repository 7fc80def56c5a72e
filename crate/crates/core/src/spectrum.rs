//! Eigenvalue enumeration with argument-principle certification.
//!
//! The pencil has exactly `2N + 2` eigenvalues inside the circle of
//! radius `mu_1 (N + 1/2)` around the origin, where `mu_1` is the
//! leading eigenvalue spacing: the two tails `lambda_{+-n}` for
//! `1 <= n <= N` plus one extra pair near the spectral center. Roots are
//! located on the real axis from the second-order asymptotic guesses,
//! refined by Brent and a Newton polish on the high-accuracy evaluation
//! tier, and the count is certified independently by a winding-number
//! integral of `Delta'/Delta` over the circle. A disagreement between
//! the two counts is reported as an error naming the suspect window, not
//! patched over.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CfdoError, Result};
use crate::problem::{self, ProblemSpec};
use crate::quad::NeumaierSum;
use crate::solver::magnus::DeltaEngine;

/// Circle used for counting eigenvalues.
#[derive(Debug, Clone, Copy)]
pub struct ContourSpec {
    /// Index of the outermost eigenvalue pair meant to be enclosed.
    pub n_max: usize,
    pub radius: f64,
    /// Quadrature nodes on the circle.
    pub nodes: usize,
}

impl ContourSpec {
    /// Standard contour for the first `n_max` pairs: radius halfway
    /// between the leading-order positions of `lambda_{n_max}` and
    /// `lambda_{n_max + 1}`.
    pub fn for_index(spec: &ProblemSpec, n_max: usize) -> Self {
        Self {
            n_max,
            radius: contour_radius(spec, n_max),
            nodes: winding_nodes(n_max),
        }
    }
}

/// One accepted eigenvalue with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct EigenDetail {
    /// Sequence index; the extra pair near the spectral center is
    /// reported twice under `n = 0`.
    pub n: i64,
    pub lambda: f64,
    /// Asymptotic guess the search started from.
    pub guess: f64,
    /// `|Delta|` at the accepted root on the fine evaluation tier.
    pub abs_residual_delta: f64,
    /// Signed distance `lambda - guess`.
    pub gap_to_guess: f64,
}

/// The certified eigenvalue list inside one counting circle.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// `lambda_n` for `1 <= |n| <= n_max`.
    pub entries: BTreeMap<i64, f64>,
    /// The additional pair near the spectral center, `(larger, smaller)`.
    /// When the pair is a complex conjugate pair `a +- i b`, both
    /// components hold the common real part `a`.
    pub zero_pair: (f64, f64),
    /// Imaginary part `b >= 0` of the central pair; zero when the pair
    /// sits on the real axis. Symmetric functions of the pair (sum, sum
    /// of squares) stay real either way.
    pub zero_pair_imag: f64,
    /// Winding-number count over the certification circle; equals
    /// `entries.len() + 2` when this value is returned at all.
    pub certified_count: usize,
    /// Radius actually used for certification (possibly nudged off a
    /// root).
    pub winding_radius: f64,
    /// Ascending-`lambda` table for reporting, pair rows at `n = 0`.
    pub details: Vec<EigenDetail>,
    /// Human-readable remarks about non-default decisions taken.
    pub notes: Vec<String>,
}

/// Radius of the standard counting circle for index `n_max`.
pub fn contour_radius(spec: &ProblemSpec, n_max: usize) -> f64 {
    problem::leading_frequency(spec, 1) * (n_max as f64 + 0.5)
}

fn winding_nodes(n_max: usize) -> usize {
    (16 * (n_max + 1)).max(64)
}

/// Count pencil eigenvalues strictly inside the given circle by the
/// argument principle. The winding integral must land within `1e-3` of
/// an integer; the node count is doubled up to three times to get there,
/// after which the failure is reported. A root sitting essentially on
/// the circle (within `1e-6` of the radius at a real-axis crossing)
/// makes the count ill-posed, so the radius is stepped a quarter gap
/// off such a root first.
pub fn count_eigenvalues_inside(spec: &ProblemSpec, contour: &ContourSpec) -> Result<usize> {
    let engine = DeltaEngine::new(spec);
    let crossing_distance = |r: f64| -> f64 {
        let mut c = f64::INFINITY;
        for s in [r, -r] {
            let d = 1e-4 * s.abs().max(1.0);
            let f = engine.eval_real(s);
            let df = (engine.eval_real(s + d) - engine.eval_real(s - d)) / (2.0 * d);
            if df != 0.0 && df.is_finite() {
                c = c.min((f / df).abs());
            }
        }
        c
    };
    let spacing = problem::leading_frequency(spec, 1);
    let mut radius = contour.radius;
    if crossing_distance(radius) < 1e-6 * radius {
        for off in [0.25, -0.25] {
            let r = contour.radius + off * spacing;
            if r > 0.0 && crossing_distance(r) >= 1e-6 * r {
                radius = r;
                break;
            }
        }
    }
    winding_count(&engine, radius, contour.nodes)
}

fn winding_count(engine: &DeltaEngine, radius: f64, nodes: usize) -> Result<usize> {
    let mut m = nodes.max(16);
    let mut achieved = f64::INFINITY;
    for _ in 0..4 {
        if let Some(w) = winding_integral(engine, radius, m) {
            let rounded = w.round();
            achieved = (w - rounded).abs();
            if achieved <= 1e-3 && rounded >= 0.0 {
                return Ok(rounded as usize);
            }
        }
        m *= 2;
    }
    Err(CfdoError::Accuracy {
        context: format!("winding integral on circle of radius {radius:.6}"),
        requested: 1e-3,
        achieved,
    })
}

/// Winding number of `Delta` around the circle, from summed phase
/// increments between consecutive midpoint nodes (the two real-axis
/// crossings, where eigenvalues live, fall between nodes). Any hop of
/// `0.9 pi` or more means the sampling may have skipped a phase turn,
/// so the result is discarded and the caller doubles the node count.
/// Small hops quantize the sum to an exact multiple of `2 pi`, so the
/// evaluation only has to keep every hop honest, not the values
/// accurate; a quarter of the usual panel budget is still orders of
/// magnitude inside that margin.
fn winding_integral(engine: &DeltaEngine, radius: f64, m: usize) -> Option<f64> {
    let panels = (engine.panels_for(radius) / 4).max(64);
    let values: Vec<_> = (0..m)
        .into_par_iter()
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
            let node = Complex64::new(radius * theta.cos(), radius * theta.sin());
            engine.eval_complex_fixed(node, panels)
        })
        .collect();
    let mut total = NeumaierSum::new();
    for j in 0..m {
        let hop = values[(j + 1) % m].div(values[j]).ln().im;
        if !hop.is_finite() || hop.abs() >= 0.9 * std::f64::consts::PI {
            return None;
        }
        total.add(hop);
    }
    Some(total.total() / (2.0 * std::f64::consts::PI))
}

/// Brent root refinement on a bracketing interval of `f`.
fn brent(f: &dyn Fn(f64) -> f64, x1: f64, x2: f64, f1: f64, f2: f64, xtol_coeff: f64) -> f64 {
    debug_assert!(f1 * f2 <= 0.0);
    let (mut a, mut b, mut c) = (x1, x2, x2);
    let (mut fa, mut fb, mut fc) = (f1, f2, f2);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..120 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol_coeff * b.abs().max(1.0);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Try secant / inverse-quadratic interpolation.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb = f(b);
    }
    b
}

/// Newton polish on the fine evaluation tier; converges to the fine
/// root from a Brent-accurate start in a couple of steps. Only
/// improving steps are accepted, so the iteration stops at the
/// roundoff floor of the evaluation.
fn polish(engine: &DeltaEngine, mut x: f64) -> (f64, f64) {
    let mut fx = engine.eval_real_fine(x);
    // The derivative only steers the Newton step, so the cheap tier at
    // ~1e-6 relative accuracy is plenty; freezing it outside the loop
    // leaves one expensive evaluation per iteration.
    let scale = x.abs().max(1.0);
    let dstep = 1e-6 * scale;
    let df = (engine.eval_real(x + dstep) - engine.eval_real(x - dstep)) / (2.0 * dstep);
    if df == 0.0 || !df.is_finite() {
        return (x, fx.abs());
    }
    for _ in 0..6 {
        let step = fx / df;
        if !step.is_finite() {
            break;
        }
        let x_new = x - step;
        let fx_new = engine.eval_real_fine(x_new);
        if !fx_new.is_finite() || fx_new.abs() >= fx.abs() {
            break;
        }
        x = x_new;
        fx = fx_new;
        if step.abs() < 4e-14 * scale {
            break;
        }
    }
    (x, fx.abs())
}

/// All refined roots found by a uniform scan of `[lo, hi]` with
/// `points` samples on the coarse tier.
fn scan_roots(engine: &DeltaEngine, lo: f64, hi: f64, points: usize, xtol_coeff: f64) -> Vec<f64> {
    let mut values = Vec::with_capacity(points);
    for i in 0..points {
        let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        values.push((t, engine.eval_real(t)));
    }
    let mut roots = Vec::new();
    for w in values.windows(2) {
        let (a, fa) = w[0];
        let (b, fb) = w[1];
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(brent(&|t| engine.eval_real(t), a, b, fa, fb, xtol_coeff));
        }
    }
    if let Some(&(t, ft)) = values.last() {
        if ft == 0.0 {
            roots.push(t);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10 * a.abs().max(1.0));
    roots
}

/// Secant iteration from the asymptotic guess on the cheap evaluation
/// tier. The trust region excludes the neighbouring roots, so a
/// converged point has the right index by construction; acceptance
/// additionally demands a sign change across a tiny bracket, which the
/// deterministic evaluation makes exact. Returns None when the
/// iteration leaves the region, stalls, or exhausts its budget.
fn secant_from_guess(engine: &DeltaEngine, guess: f64, trust: f64, xtol_coeff: f64) -> Option<f64> {
    let scale = guess.abs().max(1.0);
    let mut t0 = guess;
    let mut f0 = engine.eval_real(t0);
    if !f0.is_finite() {
        return None;
    }
    if f0 == 0.0 {
        return Some(t0);
    }
    let mut t1 = guess + 1e-3 * trust;
    let mut f1 = engine.eval_real(t1);
    if !f1.is_finite() {
        return None;
    }
    for _ in 0..16 {
        let denom = f1 - f0;
        if denom == 0.0 {
            return None;
        }
        let t2 = t1 - f1 * (t1 - t0) / denom;
        if !t2.is_finite() || (t2 - guess).abs() > trust {
            return None;
        }
        let f2 = engine.eval_real(t2);
        if !f2.is_finite() {
            return None;
        }
        let converged = (t2 - t1).abs() <= xtol_coeff * scale;
        t0 = t1;
        f0 = f1;
        t1 = t2;
        f1 = f2;
        if converged {
            let d = 1e-4 * trust;
            let (fa, fb) = (engine.eval_real(t1 - d), engine.eval_real(t1 + d));
            return (fa.is_finite() && fb.is_finite() && fa * fb <= 0.0).then_some(t1);
        }
    }
    None
}

/// Locate the eigenvalue of index `n`: first try a secant iteration
/// straight from the guess, then fall back to scanning a window around
/// it, refining every sign change, and claiming the root nearest the
/// guess. The window is widened up to four times if the scan comes
/// back empty.
fn locate_indexed(
    engine: &DeltaEngine,
    n: i64,
    guess: f64,
    half_width: f64,
    xtol_coeff: f64,
) -> Result<EigenDetail> {
    if let Some(claim) = secant_from_guess(engine, guess, 0.9 * half_width, xtol_coeff) {
        let (lambda, residual) = polish(engine, claim);
        return Ok(EigenDetail {
            n,
            lambda,
            guess,
            abs_residual_delta: residual,
            gap_to_guess: lambda - guess,
        });
    }
    let mut w = half_width;
    for _ in 0..5 {
        let roots = scan_roots(engine, guess - w, guess + w, 17, xtol_coeff);
        if let Some(&claim) = roots
            .iter()
            .min_by(|a, b| (*a - guess).abs().total_cmp(&(*b - guess).abs()))
        {
            let (lambda, residual) = polish(engine, claim);
            return Ok(EigenDetail {
                n,
                lambda,
                guess,
                abs_residual_delta: residual,
                gap_to_guess: lambda - guess,
            });
        }
        w *= 1.5;
    }
    Err(CfdoError::Search {
        index: n,
        lo: guess - w,
        hi: guess + w,
    })
}

/// Certification radius for an already-located spectrum: the midpoint
/// of the radial gap between the outermost stored eigenvalue and the
/// asymptotic guess for the next pair out. This keeps exactly the
/// stored set inside the circle with the largest possible clearance; a
/// fixed nudge could silently trade an outermost root for the next one
/// in when the spectrum is shifted off the symmetric positions.
fn certification_radius(
    spec: &ProblemSpec,
    base: f64,
    spacing: f64,
    r_in: f64,
    n_max: usize,
) -> Result<(f64, Option<String>)> {
    let g_plus = problem::eigen_guess(spec, n_max as i64 + 1)?;
    let g_minus = problem::eigen_guess(spec, -(n_max as i64 + 1))?;
    let r_out = g_plus.abs().min(g_minus.abs());
    if r_out > r_in + 1e-9 * r_in.max(1.0) {
        let mid = 0.5 * (r_in + r_out);
        let note = ((mid - base).abs() > 0.05 * spacing).then(|| {
            format!("certification radius set to {mid:.6}, the midpoint of the outermost gap")
        });
        Ok((mid, note))
    } else {
        Ok((
            base,
            Some(format!(
                "stored eigenvalues are not radially separable from the next pair \
                 (outermost stored modulus {r_in:.6}, next guess modulus {r_out:.6}); \
                 certifying on the nominal circle"
            )),
        ))
    }
}

/// Enumerate and certify the `2 n_max + 2` eigenvalues inside the
/// standard counting circle.
///
/// Each indexed eigenvalue is claimed as the refined root nearest its
/// asymptotic guess; the remaining pair is recovered from the window
/// between the innermost indexed guesses. The total is then certified
/// against the winding-number count; a mismatch is a hard error naming
/// the widest gap in the accepted sequence, where a miss is most likely.
pub fn find_eigenvalues(spec: &ProblemSpec, n_max: usize) -> Result<Spectrum> {
    if n_max == 0 {
        return Err(CfdoError::Validation(
            "eigenvalue enumeration needs n_max >= 1".into(),
        ));
    }
    let engine = DeltaEngine::new(spec);
    let constants = spec.constants()?;
    let gamma = constants.gamma;
    let spacing = problem::leading_frequency(spec, 1);
    let xtol_coeff = spec.settings().root_tol_coeff;
    let mut notes = Vec::new();

    let indices: Vec<i64> = (1..=n_max as i64).flat_map(|n| [n, -n]).collect();
    let guesses: Vec<(i64, f64)> = indices
        .iter()
        .map(|&n| Ok((n, problem::eigen_guess(spec, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let located: Vec<EigenDetail> = guesses
        .par_iter()
        .map(|&(n, g)| locate_indexed(&engine, n, g, 0.5 * spacing, xtol_coeff))
        .collect::<Result<Vec<_>>>()?;

    let mut entries = BTreeMap::new();
    for d in &located {
        entries.insert(d.n, d.lambda);
    }

    // The extra pair lives between the innermost indexed eigenvalues.
    let lam_m1 = entries[&-1];
    let lam_p1 = entries[&1];
    let g_m1 = guesses.iter().find(|(n, _)| *n == -1).unwrap().1;
    let g_p1 = guesses.iter().find(|(n, _)| *n == 1).unwrap().1;
    let zero_lo = g_m1.min(lam_m1);
    let zero_hi = g_p1.max(lam_p1);
    let mut candidates = scan_roots(&engine, zero_lo, zero_hi, 33, xtol_coeff);
    candidates.retain(|&r| {
        (r - lam_m1).abs() > 1e-8 * r.abs().max(1.0) && (r - lam_p1).abs() > 1e-8 * r.abs().max(1.0)
    });
    let (zero_pair, zero_pair_imag) = match candidates.len() {
        2 => {
            let a = polish(&engine, candidates[0]);
            let b = polish(&engine, candidates[1]);
            ((a.0.max(b.0), a.0.min(b.0)), 0.0)
        }
        0 => {
            // No sign change: either a double root (|Delta| touches
            // zero) or the pair has left the real axis. Try the
            // tangency first, then a complex Newton iteration seeded
            // from the |Delta| minimum with a curvature-based
            // imaginary offset.
            match double_root(&engine, zero_lo, zero_hi, lam_m1, lam_p1) {
                Some(r) => {
                    notes.push(format!("central pair found as a double root at {r:.12}"));
                    ((r, r), 0.0)
                }
                None => {
                    let recovered = complex_pair_root(&engine, zero_lo, zero_hi, lam_m1, lam_p1);
                    match recovered {
                        Some((re, im, _resid)) if im > 1e-9 * re.abs().max(1.0) => {
                            notes.push(format!(
                                "central pair is complex: {re:.12} +- {im:.12}i; reporting the common real part doubled"
                            ));
                            ((re, re), im)
                        }
                        Some((re, _, _)) => {
                            notes.push(format!("central pair found as a double root at {re:.12}"));
                            ((re, re), 0.0)
                        }
                        None => {
                            return Err(CfdoError::Search {
                                index: 0,
                                lo: zero_lo,
                                hi: zero_hi,
                            });
                        }
                    }
                }
            }
        }
        1 => {
            let r = polish(&engine, candidates[0]).0;
            notes.push(format!(
                "central window yielded a single crossing at {r:.12}; reporting it doubled"
            ));
            ((r, r), 0.0)
        }
        k => {
            notes.push(format!(
                "central window yielded {k} candidates; keeping the two nearest the spectral center {gamma:.6}"
            ));
            candidates.sort_by(|a, b| (a - gamma).abs().total_cmp(&(b - gamma).abs()));
            let a = polish(&engine, candidates[0]).0;
            let b = polish(&engine, candidates[1]).0;
            ((a.max(b), a.min(b)), 0.0)
        }
    };

    // Assemble the report table in ascending lambda order.
    let mut details = Vec::with_capacity(located.len() + 2);
    for n in (1..=n_max as i64).rev() {
        details.push(*located.iter().find(|d| d.n == -n).unwrap());
    }
    for lambda in [zero_pair.1, zero_pair.0] {
        let abs_residual_delta = if zero_pair_imag > 0.0 {
            engine
                .eval_complex(Complex64::new(lambda, zero_pair_imag))
                .to_plain()
                .norm()
        } else {
            engine.eval_real_fine(lambda).abs()
        };
        details.push(EigenDetail {
            n: 0,
            lambda,
            guess: gamma,
            abs_residual_delta,
            gap_to_guess: lambda - gamma,
        });
    }
    for n in 1..=n_max as i64 {
        details.push(*located.iter().find(|d| d.n == n).unwrap());
    }
    let mut sorted = details.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    if sorted
        .iter()
        .zip(details.iter())
        .any(|(s, d)| s.lambda != d.lambda)
    {
        notes.push(
            "accepted eigenvalues are not ordered by index; table kept in index order".into(),
        );
    }

    // Independent count over the certification circle.
    let base_radius = contour_radius(spec, n_max);
    let r_in = details
        .iter()
        .map(|d| {
            if d.n == 0 {
                d.lambda.hypot(zero_pair_imag)
            } else {
                d.lambda.abs()
            }
        })
        .fold(0.0f64, f64::max);
    let (radius, nudge_note) = certification_radius(spec, base_radius, spacing, r_in, n_max)?;
    if let Some(nn) = nudge_note {
        notes.push(nn);
    }
    let expected = 2 * n_max + 2;
    let counted = winding_count(&engine, radius, winding_nodes(n_max))?;
    if counted != expected {
        let window = widest_gap_window(&sorted);
        return Err(CfdoError::Completeness {
            expected: expected as i64,
            found: counted as i64,
            window,
        });
    }

    Ok(Spectrum {
        entries,
        zero_pair,
        zero_pair_imag,
        certified_count: counted,
        winding_radius: radius,
        details,
        notes,
    })
}

/// Double-root detection in the central window: golden-section descent
/// of `|Delta|` away from the two already-claimed roots; accepted when
/// the minimum is consistent with a tangency at working precision.
fn double_root(engine: &DeltaEngine, lo: f64, hi: f64, excl_a: f64, excl_b: f64) -> Option<f64> {
    let score = |t: f64| {
        let guard = 0.05 * (hi - lo);
        if (t - excl_a).abs() < guard || (t - excl_b).abs() < guard {
            f64::INFINITY
        } else {
            engine.eval_real(t).abs()
        }
    };
    // Coarse argmin over the window, then golden-section shrink.
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for i in 0..=256 {
        let t = lo + (hi - lo) * i as f64 / 256.0;
        let s = score(t);
        if s < best.0 {
            best = (s, t);
        }
    }
    let span = (hi - lo) / 256.0;
    let (mut a, mut b) = (best.1 - span, best.1 + span);
    let phi = 0.5 * (3.0 - 5f64.sqrt());
    let mut x1 = a + phi * (b - a);
    let mut x2 = b - phi * (b - a);
    let mut f1 = score(x1);
    let mut f2 = score(x2);
    for _ in 0..90 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + phi * (b - a);
            f1 = score(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - phi * (b - a);
            f2 = score(x2);
        }
        if b - a < 1e-13 * b.abs().max(1.0) {
            break;
        }
    }
    let t = 0.5 * (a + b);
    let v = engine.eval_real_fine(t).abs();
    (v <= 1e-6 * t.abs().max(1.0)).then_some(t)
}

/// Recover a central pair that has left the real axis. `Delta` is real
/// on the real axis, so any non-real zero comes with its conjugate; it
/// is enough to find the upper-half-plane member. The start point is
/// the real `|Delta|` minimum lifted by the imaginary offset a local
/// parabolic model of `Delta` predicts for the zero; a complex Newton
/// iteration with improving-steps bookkeeping does the rest. Returns
/// `(re, im >= 0, |Delta|)` at the accepted zero, or `None` when the
/// iteration stalls away from a zero or collapses onto one of the
/// already-claimed real roots.
fn complex_pair_root(
    engine: &DeltaEngine,
    lo: f64,
    hi: f64,
    excl_a: f64,
    excl_b: f64,
) -> Option<(f64, f64, f64)> {
    // Near a conjugate pair a +- ib, Delta(x) ~ C ((x - a)^2 + b^2) on
    // the axis, so |Delta| has an interior local minimum at x ~ a. The
    // guarded global minimum would instead sit at a guard edge, where
    // |Delta| decays toward an already-claimed real root; only grid
    // points that dip below both neighbors qualify as seeds.
    let n_pts = 257usize;
    let guard = 0.05 * (hi - lo);
    let unguarded = |t: f64| (t - excl_a).abs() >= guard && (t - excl_b).abs() >= guard;
    let mut vals = Vec::with_capacity(n_pts);
    for i in 0..n_pts {
        let t = lo + (hi - lo) * i as f64 / (n_pts - 1) as f64;
        vals.push((t, engine.eval_real(t).abs()));
    }
    let mut seed: Option<(f64, f64)> = None;
    for i in 1..n_pts - 1 {
        let (t, v) = vals[i];
        if !unguarded(t) || !unguarded(vals[i - 1].0) || !unguarded(vals[i + 1].0) {
            continue;
        }
        if v <= vals[i - 1].1 && v <= vals[i + 1].1 && seed.is_none_or(|(_, sv)| v < sv) {
            seed = Some((t, v));
        }
    }
    let t = match seed {
        Some((t, _)) => t,
        // Flat or monotone window: start from the midpoint.
        None => 0.5 * (lo + hi),
    };
    let scale = t.abs().max(1.0);
    // Local model Delta(t + x) = f0 + d2 x^2 / 2 puts the zeros at
    // x = +- i sqrt(2 f0 / d2) when f0 and d2 share a sign.
    let dstep = 1e-3 * scale;
    let f0 = engine.eval_real(t);
    let d2 =
        (engine.eval_real(t + dstep) - 2.0 * f0 + engine.eval_real(t - dstep)) / (dstep * dstep);
    let ratio = if d2 != 0.0 { 2.0 * f0 / d2 } else { -1.0 };
    let im0 = if ratio > 0.0 {
        ratio.sqrt()
    } else {
        0.25 * (hi - lo)
    };

    let eval = |z: Complex64| engine.eval_complex(z).to_plain();
    for seed_factor in [1.0, 2.0, 4.0] {
        let mut z = Complex64::new(t, (seed_factor * im0).max(1e-3));
        let mut fz = eval(z);
        let mut best = (z, fz.norm());
        for _ in 0..40 {
            let h = 1e-6 * (1.0 + z.norm());
            // Real-direction central difference; equals the complex
            // derivative by analyticity.
            let df = (eval(z + h) - eval(z - h)) / (2.0 * h);
            if !df.is_finite() || df.norm() == 0.0 {
                break;
            }
            let step = fz / df;
            if !step.is_finite() {
                break;
            }
            z -= step;
            fz = eval(z);
            if !fz.is_finite() {
                break;
            }
            if fz.norm() < best.1 {
                best = (z, fz.norm());
            }
            if step.norm() < 1e-13 * (1.0 + z.norm()) {
                break;
            }
        }
        let (z, resid) = best;
        let landed_on_claimed = z.im.abs() <= 1e-9 * z.re.abs().max(1.0)
            && ((z.re - excl_a).abs() < 1e-6 * scale || (z.re - excl_b).abs() < 1e-6 * scale);
        if !landed_on_claimed && resid <= 1e-6 * z.norm().max(1.0) {
            return Some((z.re, z.im.abs(), resid));
        }
    }
    None
}

fn widest_gap_window(sorted: &[EigenDetail]) -> String {
    let mut widest = (0.0f64, 0.0f64, 0.0f64);
    for w in sorted.windows(2) {
        let gap = w[1].lambda - w[0].lambda;
        if gap > widest.0 {
            widest = (gap, w[0].lambda, w[1].lambda);
        }
    }
    format!("({:.6}, {:.6})", widest.1, widest.2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_of(alpha: f64, p: &str, q: &str, h: f64, big_h: f64) -> ProblemSpec {
        ProblemSpec::new(alpha, p, q, h, big_h).unwrap()
    }

    #[test]
    fn contour_radius_examples() {
        let unit = spec_of(1.0, "0", "0", 0.0, 0.0);
        assert!((contour_radius(&unit, 0) - 0.5).abs() < 1e-15);
        assert!((contour_radius(&unit, 2) - 2.5).abs() < 1e-15);
        let half = spec_of(0.5, "0", "0", 0.0, 0.0);
        let expect = 0.75 * std::f64::consts::PI.sqrt();
        assert!((contour_radius(&half, 1) - expect).abs() < 1e-14);
    }

    #[test]
    fn counts_free_problem() {
        let spec = spec_of(1.0, "0", "0", 0.0, 0.0);
        let c3 = ContourSpec::for_index(&spec, 3);
        assert_eq!(count_eigenvalues_inside(&spec, &c3).unwrap(), 8);
        let c0 = ContourSpec::for_index(&spec, 0);
        assert_eq!(count_eigenvalues_inside(&spec, &c0).unwrap(), 2);
    }

    #[test]
    fn counts_with_potential() {
        let spec = spec_of(1.0, "0.2*sin(t)", "cos(t)", 0.3, 0.3);
        let c = ContourSpec::for_index(&spec, 2);
        assert_eq!(count_eigenvalues_inside(&spec, &c).unwrap(), 6);
    }

    #[test]
    fn free_spectrum_is_integers() {
        let spec = spec_of(1.0, "0", "0", 0.0, 0.0);
        let s = find_eigenvalues(&spec, 5).unwrap();
        assert_eq!(s.certified_count, 12);
        for n in 1..=5i64 {
            assert!((s.entries[&n] - n as f64).abs() < 1e-10, "n={n}");
            assert!((s.entries[&-n] + n as f64).abs() < 1e-10, "n=-{n}");
        }
        // Double root at the origin.
        assert!(s.zero_pair.0.abs() < 1e-6);
        assert!(s.zero_pair.1.abs() < 1e-6);
        assert_eq!(s.zero_pair_imag, 0.0);
    }

    #[test]
    fn constant_potential_matches_closed_form() {
        // q constant: lambda_n = sign(n) sqrt(n^2 + q0), pair at
        // +- sqrt(q0).
        let q0 = 0.1f64;
        let spec = spec_of(1.0, "0", "0.1", 0.0, 0.0);
        let s = find_eigenvalues(&spec, 20).unwrap();
        assert_eq!(s.certified_count, 42);
        for n in 1..=20i64 {
            let exact = ((n * n) as f64 + q0).sqrt();
            assert!((s.entries[&n] - exact).abs() < 1e-9, "n={n}");
            assert!((s.entries[&-n] + exact).abs() < 1e-9, "n=-{n}");
        }
        assert!((s.zero_pair.0 - q0.sqrt()).abs() < 1e-9);
        assert!((s.zero_pair.1 + q0.sqrt()).abs() < 1e-9);
        assert_eq!(s.zero_pair_imag, 0.0);
    }

    #[test]
    fn robin_spectrum_zeroes_the_closed_form() {
        // p = q = 0, h = 1, H = 2: Delta has the exact closed form
        // -lambda sin(lambda pi) + 3 cos(lambda pi)
        //   + (2 / lambda) sin(lambda pi).
        let spec = spec_of(1.0, "0", "0", 1.0, 2.0);
        let s = find_eigenvalues(&spec, 5).unwrap();
        assert_eq!(s.certified_count, 12);
        for d in &s.details {
            let lam = d.lambda;
            if lam.abs() < 1e-9 {
                continue;
            }
            let closed = -lam * (lam * std::f64::consts::PI).sin()
                + 3.0 * (lam * std::f64::consts::PI).cos()
                + 2.0 / lam * (lam * std::f64::consts::PI).sin();
            assert!(
                closed.abs() < 1e-7 * lam.abs().max(1.0),
                "lambda={lam}: {closed}"
            );
        }
    }

    #[test]
    fn unit_impulse_spectrum_and_pair() {
        // p = 1, q = 0, alpha = 1/2, h = H = 0: in the substituted
        // coordinate the problem is constant-coefficient, so
        // lambda_n = 1 +- sqrt(1 + mu_n^2) and the central pair is (2, 0).
        let spec = spec_of(0.5, "1", "0", 0.0, 0.0);
        let s = find_eigenvalues(&spec, 3).unwrap();
        assert_eq!(s.certified_count, 8);
        for n in 1..=3i64 {
            let mu = problem::leading_frequency(&spec, n);
            let plus = 1.0 + (1.0 + mu * mu).sqrt();
            let minus = 1.0 - (1.0 + mu * mu).sqrt();
            assert!(
                (s.entries[&n] - plus).abs() < 1e-9,
                "n={n}: {}",
                s.entries[&n]
            );
            assert!((s.entries[&-n] - minus).abs() < 1e-9, "n=-{n}");
        }
        assert!((s.zero_pair.0 - 2.0).abs() < 1e-9, "{:?}", s.zero_pair);
        assert!(s.zero_pair.1.abs() < 1e-9, "{:?}", s.zero_pair);
        assert_eq!(s.zero_pair_imag, 0.0);
    }

    #[test]
    fn details_are_ascending_and_complete() {
        // This problem's central pair is a complex conjugate pair; the
        // table reports the common real part doubled and the residual
        // is evaluated at the off-axis zero.
        let spec = spec_of(1.0, "0.2*sin(t)", "cos(t)", 0.3, 0.3);
        let s = find_eigenvalues(&spec, 4).unwrap();
        assert_eq!(s.details.len(), 10);
        for w in s.details.windows(2) {
            assert!(w[1].lambda >= w[0].lambda);
        }
        for d in &s.details {
            assert!(d.abs_residual_delta < 1e-6 * d.lambda.abs().max(1.0));
        }
        assert_eq!(s.certified_count, 10);
        assert_eq!(s.zero_pair.0, s.zero_pair.1);
        assert!(s.zero_pair_imag > 1e-3, "imag = {}", s.zero_pair_imag);
        assert!(
            s.notes.iter().any(|n| n.contains("complex")),
            "{:?}",
            s.notes
        );
    }

    #[test]
    fn shifted_spectrum_is_translated() {
        let spec = spec_of(1.0, "0.2*sin(t)", "cos(t)", 0.3, 0.3);
        let (shifted, s_val) =
            problem::shift_problem(&spec, crate::problem::ShiftMode::MeanShift).unwrap();
        let base = find_eigenvalues(&spec, 3).unwrap();
        let moved = find_eigenvalues(&shifted, 3).unwrap();
        for n in [-3i64, -2, -1, 1, 2, 3] {
            assert!(
                (moved.entries[&n] - (base.entries[&n] - s_val)).abs() < 1e-8,
                "n={n}"
            );
        }
        // The complex pair translates with the spectrum; its imaginary
        // part is shift-invariant.
        assert!((moved.zero_pair.0 - (base.zero_pair.0 - s_val)).abs() < 1e-8);
        assert!((moved.zero_pair.1 - (base.zero_pair.1 - s_val)).abs() < 1e-8);
        assert!((moved.zero_pair_imag - base.zero_pair_imag).abs() < 1e-8);
        assert!(base.zero_pair_imag > 1e-3);
    }
}
