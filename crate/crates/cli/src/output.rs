//! On-disk solution formats: CSV fields with a JSON report sidecar, or a single JSON file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sonic_annulus::fields::{write_atomic, FieldArrays, Format};
use sonic_annulus::verify::VerificationReport;
use sonic_annulus::{Diagnostics, Regime};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub regime: Regime,
    /// last continuation parameter (j or k)
    pub reg_param: f64,
    pub fields: FieldArrays,
    pub diagnostics: Diagnostics,
    pub verification: VerificationReport,
}

/// Sidecar of a CSV output: everything but the arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub regime: Regime,
    pub reg_param: f64,
    pub diagnostics: Diagnostics,
    pub verification: VerificationReport,
}

/// `out/sol.csv` -> `out/sol.<tag>.json`
pub fn sidecar(path: &Path, tag: &str) -> PathBuf {
    path.with_extension(format!("{tag}.json"))
}

/// Explicit format, else `.json` extension means JSON, else CSV.
pub fn detect_format(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    })
}

pub fn write_solution(out: &Path, format: Format, file: &SolutionFile) -> sonic_annulus::Result<Vec<PathBuf>> {
    match format {
        Format::Csv => {
            write_atomic(out, file.fields.to_csv().as_bytes())?;
            let report = ReportFile {
                regime: file.regime,
                reg_param: file.reg_param,
                diagnostics: file.diagnostics.clone(),
                verification: file.verification.clone(),
            };
            let side = sidecar(out, "report");
            write_atomic(&side, serde_json::to_string_pretty(&report)?.as_bytes())?;
            Ok(vec![out.to_path_buf(), side])
        }
        Format::Json => {
            write_atomic(out, serde_json::to_string_pretty(file)?.as_bytes())?;
            Ok(vec![out.to_path_buf()])
        }
    }
}

/// Arrays and, for JSON files, the stored regime.
pub fn read_solution(path: &Path, format: Format) -> sonic_annulus::Result<(FieldArrays, Option<Regime>)> {
    let text = std::fs::read_to_string(path)?;
    match format {
        Format::Csv => Ok((FieldArrays::from_csv(&text)?, None)),
        Format::Json => {
            let file: SolutionFile = serde_json::from_str(&text)?;
            Ok((file.fields, Some(file.regime)))
        }
    }
}
