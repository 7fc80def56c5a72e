//! Run configuration: one JSON document, fully validated before any
//! computation starts so bad input never burns solver time.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer};

use cfdo_core::problem::{NumericalSettings, ProblemSpec, ShiftMode};
use cfdo_core::{expr, CfdoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    Trace1,
    Trace2,
    AuditAll,
    Asymptotics,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Spectrum => "spectrum",
            Mode::Trace1 => "trace1",
            Mode::Trace2 => "trace2",
            Mode::AuditAll => "audit-all",
            Mode::Asymptotics => "asymptotics",
        })
    }
}

/// Tolerance knobs forwarded to the numerical core; every field is
/// optional and defaults to the library setting.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_ode")]
    pub ode: f64,
    #[serde(default = "default_quadrature")]
    pub quadrature: f64,
    #[serde(default = "default_root")]
    pub root: f64,
}

fn default_ode() -> f64 {
    NumericalSettings::default().ode_rel_tol
}

fn default_quadrature() -> f64 {
    NumericalSettings::default().quad_rel_tol
}

fn default_root() -> f64 {
    NumericalSettings::default().root_tol_coeff
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: default_ode(),
            quadrature: default_quadrature(),
            root: default_root(),
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("cfdo-out")
}

fn shift_mode_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ShiftMode, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn default_shift_mode() -> ShiftMode {
    ShiftMode::MeanShift
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    /// Impulse coefficient p as expression text in the variable `t`.
    pub p: String,
    /// Potential q as expression text in the variable `t`.
    pub q: String,
    pub h: f64,
    #[serde(rename = "H")]
    pub big_h: f64,
    pub mode: Mode,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_shift_mode", deserialize_with = "shift_mode_de")]
    pub shift_mode: ShiftMode,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Only randomized self-checks consume the seed; run modes are
    /// deterministic. Recorded in the log for provenance.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn settings(&self) -> NumericalSettings {
        NumericalSettings {
            ode_rel_tol: self.tolerances.ode,
            quad_rel_tol: self.tolerances.quadrature,
            root_tol_coeff: self.tolerances.root,
        }
    }

    /// Every invariant checkable without running the solvers: parameter
    /// ranges, tolerance windows, and expression syntax.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CfdoError::Validation(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.n < 1 {
            return Err(CfdoError::Validation("N must be at least 1".into()));
        }
        for (name, v) in [("h", self.h), ("H", self.big_h)] {
            if !v.is_finite() {
                return Err(CfdoError::Validation(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        self.settings().validate()?;
        expr::parse(&self.p)?;
        expr::parse(&self.q)?;
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        ProblemSpec::from_parts(
            self.alpha,
            expr::parse(&self.p)?,
            expr::parse(&self.q)?,
            self.h,
            self.big_h,
            self.settings(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(mode: &str) -> String {
        format!(
            r#"{{"alpha": 1.0, "p": "0", "q": "0", "h": 0.0, "H": 0.0, "mode": "{mode}", "N": 5}}"#
        )
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c: RunConfig = serde_json::from_str(&minimal("spectrum")).unwrap();
        assert_eq!(c.mode, Mode::Spectrum);
        assert_eq!(c.shift_mode, ShiftMode::MeanShift);
        assert_eq!(c.output, PathBuf::from("cfdo-out"));
        assert_eq!(c.seed, 0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn mode_labels_round_trip() {
        for (label, mode) in [
            ("spectrum", Mode::Spectrum),
            ("trace1", Mode::Trace1),
            ("trace2", Mode::Trace2),
            ("audit-all", Mode::AuditAll),
            ("asymptotics", Mode::Asymptotics),
        ] {
            let c: RunConfig = serde_json::from_str(&minimal(label)).unwrap();
            assert_eq!(c.mode, mode);
            assert_eq!(mode.to_string(), label);
        }
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let mut c: RunConfig = serde_json::from_str(&minimal("spectrum")).unwrap();
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        c.alpha = 0.0;
        assert!(c.validate().is_err());
        let mut c: RunConfig = serde_json::from_str(&minimal("spectrum")).unwrap();
        c.n = 0;
        assert!(c.validate().is_err());
        let mut c: RunConfig = serde_json::from_str(&minimal("spectrum")).unwrap();
        c.tolerances.root = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_expressions() {
        let with_extra = r#"{"alpha": 1.0, "p": "0", "q": "0", "h": 0, "H": 0, "mode": "spectrum", "N": 5, "banana": 1}"#;
        assert!(serde_json::from_str::<RunConfig>(with_extra).is_err());
        let mut c: RunConfig = serde_json::from_str(&minimal("spectrum")).unwrap();
        c.p = "0.2*sin(".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn shift_mode_parses_both_labels() {
        let lit = r#"{"alpha": 1.0, "p": "0", "q": "0", "h": 0, "H": 0, "mode": "trace1", "N": 8, "shift_mode": "literal-paper"}"#;
        let c: RunConfig = serde_json::from_str(lit).unwrap();
        assert_eq!(c.shift_mode, ShiftMode::LiteralPaper);
        let bad = r#"{"alpha": 1.0, "p": "0", "q": "0", "h": 0, "H": 0, "mode": "trace1", "N": 8, "shift_mode": "centered"}"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
    }
}
