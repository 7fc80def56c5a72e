//! Overflow-safe complex arithmetic for contour work.
//!
//! On a circle of radius R the characteristic function grows like
//! `|lambda| e^(|Im lambda| U)`, which exceeds f64 range once R U is a few
//! hundred. Values are therefore carried as `mantissa * exp(log_scale)`
//! with the mantissa kept near unit magnitude, and the trigonometric
//! factors are evaluated pre-divided by `e^(|Im z|)`.

use num_complex::Complex64;

/// A complex value `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub fn new(mantissa: Complex64, log_scale: f64) -> Self {
        Self {
            mantissa,
            log_scale,
        }
    }

    pub fn from_plain(v: Complex64) -> Self {
        Self {
            mantissa: v,
            log_scale: 0.0,
        }
    }

    /// Bring the mantissa magnitude back near 1, folding it into the scale.
    pub fn renormalized(self) -> Self {
        let n = self.mantissa.norm();
        if n == 0.0 || !n.is_finite() {
            return self;
        }
        Self {
            mantissa: self.mantissa / n,
            log_scale: self.log_scale + n.ln(),
        }
    }

    /// Plain value; may overflow to infinity for large scales.
    pub fn to_plain(self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    /// Natural logarithm with the principal branch of the mantissa.
    /// The caller is responsible for unwrapping the imaginary part along a
    /// contour.
    pub fn ln(self) -> Complex64 {
        Complex64::new(
            self.mantissa.norm().ln() + self.log_scale,
            self.mantissa.arg(),
        )
    }

    pub fn mul(self, other: ScaledComplex) -> ScaledComplex {
        ScaledComplex {
            mantissa: self.mantissa * other.mantissa,
            log_scale: self.log_scale + other.log_scale,
        }
    }

    pub fn div(self, other: ScaledComplex) -> ScaledComplex {
        ScaledComplex {
            mantissa: self.mantissa / other.mantissa,
            log_scale: self.log_scale - other.log_scale,
        }
    }
}

/// `sin(z) * exp(-|Im z|)`: bounded by 1 in magnitude for all z.
pub fn scaled_sin(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let damp = (-2.0 * b.abs()).exp();
    // cosh(b) e^{-|b|} = (1 + e^{-2|b|})/2,  sinh(b) e^{-|b|} = sgn(b)(1 - e^{-2|b|})/2.
    let cosh_s = 0.5 * (1.0 + damp);
    let sinh_s = 0.5 * b.signum() * (1.0 - damp);
    Complex64::new(a.sin() * cosh_s, a.cos() * sinh_s)
}

/// `cos(z) * exp(-|Im z|)`: bounded by 1 in magnitude for all z.
pub fn scaled_cos(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let damp = (-2.0 * b.abs()).exp();
    let cosh_s = 0.5 * (1.0 + damp);
    let sinh_s = 0.5 * b.signum() * (1.0 - damp);
    Complex64::new(a.cos() * cosh_s, -a.sin() * sinh_s)
}

/// `sin(z)` as a scaled value, exact for any magnitude of Im z.
pub fn sin_scaled(z: Complex64) -> ScaledComplex {
    ScaledComplex::new(scaled_sin(z), z.im.abs())
}

/// `cos(z)` as a scaled value.
pub fn cos_scaled(z: Complex64) -> ScaledComplex {
    ScaledComplex::new(scaled_cos(z), z.im.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn matches_plain_trig_for_moderate_imaginary_part() {
        for &(re, im) in &[(0.3, 0.0), (1.7, 2.0), (-4.0, -3.5), (10.0, 1.0)] {
            let z = Complex64::new(re, im);
            let damp = (-im.abs() as f64).exp();
            assert!(close(scaled_sin(z), z.sin() * damp, 1e-14), "sin at {z}");
            assert!(close(scaled_cos(z), z.cos() * damp, 1e-14), "cos at {z}");
        }
    }

    #[test]
    fn bounded_for_huge_imaginary_part() {
        let z = Complex64::new(3.0, 5000.0);
        assert!(scaled_sin(z).norm() <= 1.0 + 1e-12);
        assert!(scaled_cos(z).norm() <= 1.0 + 1e-12);
        // Plain evaluation would overflow; the scaled form reproduces the log.
        let s = sin_scaled(z);
        assert!((s.ln().re - (5000.0 - std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn scaled_product_and_log() {
        let a = ScaledComplex::new(Complex64::new(0.6, 0.8), 100.0);
        let b = ScaledComplex::new(Complex64::new(0.0, 1.0), -40.0);
        let p = a.mul(b);
        assert!((p.log_scale - 60.0).abs() < 1e-12);
        let l = p.ln();
        assert!((l.re - 60.0).abs() < 1e-12);
        // arg(0.6+0.8i) + pi/2
        let expected_arg = (0.8f64).atan2(0.6) + std::f64::consts::FRAC_PI_2;
        assert!((l.im - expected_arg).abs() < 1e-12);
    }

    #[test]
    fn renormalize_preserves_value() {
        let v = ScaledComplex::new(Complex64::new(3e8, -4e8), 2.0);
        let r = v.renormalized();
        assert!((r.mantissa.norm() - 1.0).abs() < 1e-12);
        assert!(close(r.to_plain(), v.to_plain(), 1e-12));
    }
}
