//! Conformable calculus primitives: the order-a derivative
//! `D^a f(x) = x^(1-a) f'(x)`, its inverse integral against the weight
//! `t^(a-1) dt`, the weighted inner product, the fractional Wronskian, and
//! the coordinate change `u = x^a / a` that removes the `x^(1-a)`
//! singularity from every differential equation in the crate.

use std::fmt;
use std::sync::Arc;

use crate::error::{CfdoError, Result};
use crate::expr::{self, ExprAst};
use crate::quad::adaptive_gk;

/// The order parameter a, constrained to (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    alpha: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CfdoError::Validation(format!(
                "order must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn get(self) -> f64 {
        self.alpha
    }
}

/// The substitution u = x^a / a mapping [0, pi] onto [0, U], U = pi^a / a.
/// In the u variable the conformable derivative becomes d/du.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateMap {
    alpha: f64,
    u_cap: f64,
}

impl CoordinateMap {
    pub fn new(order: FractionalOrder) -> Self {
        let alpha = order.get();
        Self {
            alpha,
            u_cap: std::f64::consts::PI.powf(alpha) / alpha,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Length of the transformed interval, U = pi^a / a.
    pub fn u_cap(&self) -> f64 {
        self.u_cap
    }

    pub fn u_of_x(&self, x: f64) -> f64 {
        if self.alpha == 1.0 {
            x
        } else {
            x.powf(self.alpha) / self.alpha
        }
    }

    pub fn x_of_u(&self, u: f64) -> f64 {
        if self.alpha == 1.0 {
            u
        } else if u <= 0.0 {
            0.0
        } else {
            (self.alpha * u).powf(1.0 / self.alpha)
        }
    }
}

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A scalar function on [0, pi], optionally carrying a closed-form
/// classical derivative. Closed-form derivatives are preferred by
/// [`conformable_derivative`]; without one a high-order finite difference
/// is used.
#[derive(Clone)]
pub struct SmoothFunction {
    f: Arc<RealFn>,
    df: Option<Arc<RealFn>>,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("closed_derivative", &self.df.is_some())
            .finish()
    }
}

impl SmoothFunction {
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn with_derivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Some(Arc::new(df)),
        }
    }

    /// Wrap a parsed expression. Evaluation errors surface as NaN, which
    /// downstream finiteness checks convert into domain errors.
    pub fn from_expr(ast: &ExprAst) -> Self {
        let ast = ast.clone();
        Self {
            f: Arc::new(move |x| ast.eval(x).unwrap_or(f64::NAN)),
            df: None,
        }
    }

    /// Wrap a parsed expression together with its symbolic derivative when
    /// the expression is differentiable (everything except `abs`).
    pub fn from_expr_symbolic(ast: &ExprAst) -> Self {
        let df = expr::differentiate(ast).ok().map(|d| {
            let d = d.clone();
            Arc::new(move |x: f64| d.eval(x).unwrap_or(f64::NAN)) as Arc<RealFn>
        });
        let ast = ast.clone();
        Self {
            f: Arc::new(move |x| ast.eval(x).unwrap_or(f64::NAN)),
            df,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn has_closed_derivative(&self) -> bool {
        self.df.is_some()
    }

    /// Ordinary derivative f'(x): the closed form when one is attached,
    /// otherwise a 4th-order finite difference.
    pub fn derivative_value(&self, x: f64) -> f64 {
        self.classical_derivative(x)
    }

    fn classical_derivative(&self, x: f64) -> f64 {
        match &self.df {
            Some(df) => df(x),
            None => {
                // 4th-order central difference; shrink the step near the
                // left endpoint so the stencil stays inside the domain.
                let mut h = 1e-6 * (1.0 + x.abs()).max(1.0);
                if x > 0.0 && x < 2.0 * h {
                    h = x / 2.5;
                }
                let f = &self.f;
                (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
            }
        }
    }
}

/// Aitken delta-squared acceleration of a three-term sequence.
fn aitken(a0: f64, a1: f64, a2: f64) -> f64 {
    let d1 = a1 - a0;
    let d2 = a2 - a1;
    let den = d2 - d1;
    if den.abs() <= 1e-14 * (d1.abs() + d2.abs()) || den == 0.0 {
        a2
    } else {
        a2 - d2 * d2 / den
    }
}

/// `D^a f(x) = x^(1-a) f'(x)` for x > 0; at x = 0 the right-hand limit,
/// obtained by extrapolating over x = 1e-3, 1e-4, 1e-5.
pub fn conformable_derivative(f: &SmoothFunction, x: f64, order: FractionalOrder) -> Result<f64> {
    let alpha = order.get();
    let value = if x > 0.0 {
        x.powf(1.0 - alpha) * f.classical_derivative(x)
    } else if alpha == 1.0 && f.has_closed_derivative() {
        f.classical_derivative(0.0)
    } else {
        let g = |s: f64| s.powf(1.0 - alpha) * f.classical_derivative(s);
        aitken(g(1e-3), g(1e-4), g(1e-5))
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CfdoError::Domain(format!(
            "non-finite conformable derivative at x = {x}"
        )))
    }
}

/// `I_a f(x) = integral of t^(a-1) f(t) dt over [0, x]`, computed after the
/// substitution `t = (a u)^(1/a)` which removes the endpoint weight, with a
/// caller-chosen relative tolerance.
pub fn conformable_integral_tol(
    f: &SmoothFunction,
    x: f64,
    order: FractionalOrder,
    rel_tol: f64,
) -> Result<f64> {
    if !(0.0..=std::f64::consts::PI + 1e-12).contains(&x) {
        return Err(CfdoError::Domain(format!(
            "integration endpoint {x} outside [0, pi]"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let map = CoordinateMap::new(order);
    let upper = map.u_of_x(x);
    let integrand = move |u: f64| f.value(map.x_of_u(u));
    adaptive_gk(&integrand, 0.0, upper, rel_tol, 1e-14)
}

/// `I_a f(x)` at the default relative tolerance 1e-10.
pub fn conformable_integral(f: &SmoothFunction, x: f64, order: FractionalOrder) -> Result<f64> {
    conformable_integral_tol(f, x, order, 1e-10)
}

/// Weighted inner product of real functions over [0, pi]:
/// `integral of f(t) g(t) t^(a-1) dt`.
pub fn inner_product_alpha(
    f: &SmoothFunction,
    g: &SmoothFunction,
    order: FractionalOrder,
) -> Result<f64> {
    let f = f.clone();
    let g = g.clone();
    let product = SmoothFunction::from_fn(move |x| f.value(x) * g.value(x));
    conformable_integral(&product, std::f64::consts::PI, order)
}

/// Solution sample: value and conformable derivative at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilState {
    pub x: f64,
    pub y: f64,
    pub dy_alpha: f64,
}

/// `W_a[y, z] = y D^a z - z D^a y`, evaluated from two states sampled at
/// the same point. Constant in x when y and z solve the same pencil
/// equation.
pub fn fractional_wronskian(y: &PencilState, z: &PencilState) -> f64 {
    debug_assert!(
        (y.x - z.x).abs() <= 1e-12 * (1.0 + y.x.abs()),
        "states sampled at different points"
    );
    y.y * z.dy_alpha - z.y * y.dy_alpha
}
