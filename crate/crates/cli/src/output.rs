//! Artifact writers. Every float is serialized with 17 significant
//! digits, CSV uses '.' decimals, ',' separators, and LF endings, and
//! JSON keys keep a fixed order, so identical runs produce identical
//! bytes. Timestamps are confined to the log.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cfdo_core::problem::PencilConstants;
use cfdo_core::spectrum::Spectrum;
use cfdo_core::trace::{self, PartialSumSeries, TraceReport};

/// Paths written by a run. Entries are `None` when the mode does not
/// produce that artifact.
#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub spectrum_csv: PathBuf,
    pub trace_json: Option<PathBuf>,
    pub convergence_csv: Option<PathBuf>,
    pub log: PathBuf,
}

impl OutputBundle {
    pub fn declared(&self) -> Vec<&Path> {
        let mut v = vec![self.spectrum_csv.as_path()];
        if let Some(p) = &self.trace_json {
            v.push(p);
        }
        if let Some(p) = &self.convergence_csv {
            v.push(p);
        }
        v.push(self.log.as_path());
        v
    }

    /// Success contract: every declared file exists and is non-empty.
    pub fn verify(&self) -> io::Result<()> {
        for p in self.declared() {
            let meta = fs::metadata(p)?;
            if meta.len() == 0 {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    format!("artifact {} is empty", p.display()),
                ));
            }
        }
        Ok(())
    }
}

/// 17 significant digits; the shortest representation that survives a
/// round trip is not used because its length varies between values.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON number or null when the value does not exist in JSON's grammar.
fn json_num(v: f64) -> String {
    if v.is_finite() {
        num(v)
    } else {
        "null".into()
    }
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> io::Result<()> {
    let mut out = String::from("n,lambda,guess,abs_residual_delta,gap_to_guess\n");
    for d in &spectrum.details {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.n,
            num(d.lambda),
            num(d.guess),
            num(d.abs_residual_delta),
            num(d.gap_to_guess)
        ));
    }
    fs::write(path, out)
}

fn report_json(report: &TraceReport, constants: &PencilConstants, indent: &str) -> String {
    let flags = report
        .flags
        .iter()
        .map(|f| format!("\"{}\"", json_escape(f)))
        .collect::<Vec<_>>()
        .join(", ");
    let c2 = match constants.c2 {
        Some(v) => json_num(v),
        None => "null".into(),
    };
    let opt = |v: Option<f64>| v.map(json_num).unwrap_or_else(|| "null".into());
    format!(
        "{indent}{{\n\
         {indent}  \"formula\": \"{}\",\n\
         {indent}  \"shift_mode\": \"{}\",\n\
         {indent}  \"N\": {},\n\
         {indent}  \"lhs\": {},\n\
         {indent}  \"rhs\": {},\n\
         {indent}  \"residual\": {},\n\
         {indent}  \"convergence_delta\": {},\n\
         {indent}  \"flags\": [{}],\n\
         {indent}  \"constants\": {{\"c0\": {}, \"c1\": {}, \"c2\": {}, \"c3\": {}, \"gamma\": {}}},\n\
         {indent}  \"rhs_alt\": {},\n\
         {indent}  \"lhs_alt\": {}\n\
         {indent}}}",
        report.formula,
        report.shift_mode,
        report.n_used,
        json_num(report.lhs_extrapolated),
        json_num(report.rhs_closed_form),
        json_num(report.residual),
        json_num(report.convergence_delta),
        flags,
        json_num(constants.c0),
        json_num(constants.c1),
        c2,
        json_num(constants.c3),
        json_num(constants.gamma),
        opt(report.rhs_alt),
        opt(report.lhs_alt),
    )
}

/// One report serializes as a single object; several (audit-all) as an
/// array in execution order.
pub fn write_trace_json(
    path: &Path,
    reports: &[TraceReport],
    constants: &PencilConstants,
) -> io::Result<()> {
    let body = match reports {
        [one] => format!("{}\n", report_json(one, constants, "")),
        many => {
            let inner = many
                .iter()
                .map(|r| report_json(r, constants, "  "))
                .collect::<Vec<_>>()
                .join(",\n");
            format!("[\n{inner}\n]\n")
        }
    };
    fs::write(path, body)
}

/// Tail extrapolation of the first `k` partial sums, recomputed exactly
/// as the report does it; defined from depth 8 upward.
fn extrapolated_at_depth(series: &PartialSumSeries, k: usize) -> Option<f64> {
    if k < 8 {
        return None;
    }
    let mut clipped = PartialSumSeries {
        terms: series.terms[..k].to_vec(),
        head: series.head,
        partials: series.partials[..k].to_vec(),
        extrapolated: 0.0,
        tail_model: (0.0, 0.0),
    };
    trace::extrapolate_tail(&mut clipped).ok()
}

pub fn write_convergence_csv(path: &Path, reports: &[TraceReport]) -> io::Result<()> {
    let mut out = String::from("formula,n,partial_sum,extrapolated\n");
    for r in reports {
        for k in 8..=r.series.partials.len() {
            let Some(l) = extrapolated_at_depth(&r.series, k) else {
                continue;
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.formula,
                k,
                num(r.series.partials[k - 1]),
                num(l)
            ));
        }
    }
    fs::write(path, out)
}

/// Closed-form accuracy ladder for asymptotics mode: modulus of the
/// probe point against the relative error of the leading-order
/// characteristic value there.
pub fn write_asymptotics_csv(path: &Path, rows: &[(f64, f64)]) -> io::Result<()> {
    let mut out = String::from("lambda,relative_error\n");
    for (lambda, err) in rows {
        out.push_str(&format!("{},{}\n", num(*lambda), num(*err)));
    }
    fs::write(path, out)
}

pub fn write_log(path: &Path, lines: &[String]) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    for line in lines {
        writeln!(f, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfdo_core::problem::{ProblemSpec, ShiftMode};
    use cfdo_core::trace::TraceFormula;

    #[test]
    fn float_format_has_seventeen_significant_digits() {
        assert_eq!(num(0.2), "2.0000000000000001e-1");
        assert_eq!(num(0.0), "0.0000000000000000e0");
        assert_eq!(num(-1.5e-12), "-1.5000000000000001e-12");
    }

    #[test]
    fn json_escape_handles_quotes_and_control() {
        assert_eq!(json_escape("a\"b\\c\nd"), "a\\\"b\\\\c\\u000ad");
    }

    #[test]
    fn trace_json_is_valid_and_keeps_key_order() {
        let spec = ProblemSpec::new(1.0, "0", "0.1", 0.0, 0.0).unwrap();
        let report = trace::trace1_sides(&spec, 16, ShiftMode::MeanShift).unwrap();
        assert_eq!(report.formula, TraceFormula::Trace1);
        let dir = std::env::temp_dir().join("cfdo-json-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.json");
        write_trace_json(&path, &[report], spec.constants().unwrap()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["formula"], "trace1");
        assert_eq!(v["N"], 16);
        assert!(v["constants"]["gamma"].is_number());
        let formula_at = text.find("\"formula\"").unwrap();
        let lhs_at = text.find("\"lhs\"").unwrap();
        assert!(formula_at < lhs_at);
    }
}
