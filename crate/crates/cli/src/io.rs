//! Problem files, per-curve CSV series and JSON rate summaries.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use saddle_flow_core::diagnostics::DiagnosticsSeries;
use saddle_flow_core::experiments::{Curve, RateSummary};
use saddle_flow_core::{LinearConstraint, Matrix, ModelError, PrimalDualState, QuadraticObjective, SaddleProblem};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Header of every per-curve CSV file.
pub const CSV_HEADER: &str = "t,gap,vel_sq,err_sq_full,err_sq_primal,cesaro_gap";

/// Quadratic program `min ½xᵀQx + qᵀx + c0` subject to `Ax = b`, as stored on
/// disk. `x0` and `lambda0` optionally set the initial point of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "Q")]
    pub hessian: Vec<Vec<f64>>,
    #[serde(rename = "q", default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<f64>>,
    #[serde(default)]
    pub c0: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], what: &'static str) -> Result<Matrix, CliError> {
    Matrix::from_rows(rows).ok_or_else(|| CliError::Input(format!("{what} has rows of different lengths")))
}

impl ProblemFile {
    pub fn from_problem(p: &SaddleProblem, initial: Option<&PrimalDualState>) -> Self {
        Self {
            hessian: p.objective.hessian().to_rows(),
            linear: Some(p.objective.linear().to_vec()),
            c0: p.objective.constant(),
            a: p.constraint.a.to_rows(),
            b: p.constraint.b.clone(),
            x0: initial.map(|s| s.x.clone()),
            lambda0: initial.map(|s| s.lambda.clone()),
        }
    }

    pub fn to_problem(&self) -> Result<SaddleProblem, CliError> {
        let q = matrix(&self.hessian, "Q")?;
        let a = matrix(&self.a, "A")?;
        let linear = self.linear.clone().unwrap_or_else(|| vec![0.0; q.rows()]);
        let objective = QuadraticObjective::new(q, linear, self.c0)?;
        Ok(SaddleProblem::new(objective, LinearConstraint::new(a, self.b.clone())?)?)
    }

    /// Initial point from the file, zero where absent.
    pub fn initial(&self, p: &SaddleProblem) -> Result<PrimalDualState, CliError> {
        let x = self.x0.clone().unwrap_or_else(|| vec![0.0; p.n()]);
        let lambda = self.lambda0.clone().unwrap_or_else(|| vec![0.0; p.m()]);
        let z = PrimalDualState::new(x, lambda);
        p.check_state(&z)?;
        Ok(z)
    }
}

pub fn load_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Decimal with 17 significant digits; non-finite values print as `NaN`,
/// `inf` or `-inf`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn write_csv<W: Write>(mut w: W, s: &DiagnosticsSeries) -> io::Result<()> {
    let mut buf = String::with_capacity(64 * (s.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for i in 0..s.len() {
        let row = [s.times[i], s.gap[i], s.vel_sq[i], s.err_sq_full[i], s.err_sq_primal[i], s.cesaro_gap[i]];
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                buf.push(',');
            }
            let _ = write!(buf, "{}", format_f64(*v));
        }
        buf.push('\n');
    }
    w.write_all(buf.as_bytes())
}

/// Parses a CSV written by [`write_csv`] back into columns.
pub fn read_csv(text: &str) -> Result<Vec<[f64; 6]>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Input(String::from("unexpected CSV header")));
    }
    lines
        .map(|line| {
            let mut row = [0.0; 6];
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(CliError::Input(format!("expected 6 fields, got {}", fields.len())));
            }
            for (slot, f) in row.iter_mut().zip(fields) {
                *slot = f.parse().map_err(|_| CliError::Input(format!("bad number {f:?}")))?;
            }
            Ok(row)
        })
        .collect()
}

/// One entry of a rate summary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub curve: String,
    pub fitted_rate: f64,
    pub theoretical_rate: f64,
    pub r_squared: f64,
    pub regime: String,
}

impl From<&RateSummary> for SummaryRecord {
    fn from(s: &RateSummary) -> Self {
        Self {
            curve: s.curve.clone(),
            fitted_rate: s.fitted_rate,
            theoretical_rate: s.theoretical_rate,
            r_squared: s.r_squared,
            regime: s.regime.clone(),
        }
    }
}

pub fn summary_json(curves: &[Curve]) -> String {
    let records: Vec<SummaryRecord> = curves.iter().flat_map(|c| c.summaries.iter().map(SummaryRecord::from)).collect();
    let mut s = serde_json::to_string_pretty(&records).expect("records serialize");
    s.push('\n');
    s
}

/// Full series of a single run, for `--format json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord<'a> {
    pub problem: &'a str,
    pub flow: &'a str,
    pub saddle_x: &'a [f64],
    pub saddle_lambda: &'a [f64],
    pub t: &'a [f64],
    pub gap: &'a [f64],
    pub vel_sq: &'a [f64],
    pub err_sq_full: &'a [f64],
    pub err_sq_primal: &'a [f64],
    /// The undefined first entry serializes as `null`.
    pub cesaro_gap: &'a [f64],
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use saddle_flow_core::experiments::example1;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(f64::NAN), "NaN");
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn problem_file_round_trip() {
        let ex = example1();
        let pf = ProblemFile::from_problem(&ex.problem, Some(&ex.initial));
        let text = serde_json::to_string(&pf).unwrap();
        let back: ProblemFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_problem().unwrap(), ex.problem);
        assert_eq!(back.initial(&ex.problem).unwrap(), ex.initial);
    }

    #[test]
    fn problem_file_defaults_and_errors() {
        let pf: ProblemFile = serde_json::from_str(r#"{"Q": [[1]], "A": [[1]], "b": [2]}"#).unwrap();
        let p = pf.to_problem().unwrap();
        assert_eq!(p.objective.linear(), &[0.0]);
        assert_eq!(pf.initial(&p).unwrap(), PrimalDualState::zeros(1, 1));
        assert!(serde_json::from_str::<ProblemFile>(r#"{"Q": [[1]], "A": [[1]], "b": [2], "z": 1}"#).is_err());
        let ragged: ProblemFile = serde_json::from_str(r#"{"Q": [[1, 0], [0]], "A": [[1, 0]], "b": [2]}"#).unwrap();
        assert!(ragged.to_problem().is_err());
        let nonconvex: ProblemFile = serde_json::from_str(r#"{"Q": [[-1]], "A": [[1]], "b": [2]}"#).unwrap();
        assert!(matches!(nonconvex.to_problem(), Err(CliError::Numerical(_))));
    }
}
