//! CSV table plus TOML report. Wall-clock timestamps go to their own file so
//! the table and report stay byte-identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SweepResult;

pub const CSV_NAME: &str = "sweep.csv";
pub const REPORT_NAME: &str = "report.toml";
pub const TIMESTAMPS_NAME: &str = "timestamps.toml";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    epsilon: f64,
    #[serde(rename = "T_num")]
    t_num: Option<f64>,
    #[serde(rename = "T_uncertainty")]
    t_uncertainty: Option<f64>,
    status: &'a str,
}

impl SweepResult {
    /// `epsilon,T_num,T_uncertainty,status`, one row per ε in descending order.
    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["epsilon", "T_num", "T_uncertainty", "status"])
            .expect("in-memory write");
        for r in &rows {
            w.serialize(CsvRow {
                epsilon: r.epsilon,
                t_num: r.t_num,
                t_uncertainty: r.uncertainty,
                status: r.status.as_str(),
            })
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn report_toml(&self) -> String {
        toml::to_string(self).expect("sweep result serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timestamps {
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
}

/// Writes `sweep.csv` and `report.toml` into `dir`, and `timestamps.toml`
/// when given.
pub fn export(result: &SweepResult, dir: &Path, timestamps: Option<&Timestamps>) -> Result<(), ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(CSV_NAME);
    fs::write(&csv_path, result.csv_bytes()).map_err(io_err(&csv_path))?;
    let report_path = dir.join(REPORT_NAME);
    fs::write(&report_path, result.report_toml()).map_err(io_err(&report_path))?;
    if let Some(ts) = timestamps {
        let p = dir.join(TIMESTAMPS_NAME);
        let text = toml::to_string(ts).map_err(|e| ExportError::Format {
            path: p.clone(),
            reason: e.to_string(),
        })?;
        fs::write(&p, text).map_err(io_err(&p))?;
    }
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<SweepResult, ExportError> {
    let path = dir.join(REPORT_NAME);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    toml::from_str(&text).map_err(|e| ExportError::Format {
        path,
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn result(rows: Vec<SweepRow>) -> SweepResult {
        let points: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.t_num.map(|t| (r.epsilon, t))).collect();
        let law = LawKind::Power { exponent: 0.5 };
        SweepResult {
            fits: fit_candidates(&points, Some(&law), 0.15),
            rows,
            expected: Some(ScalingLaw {
                kind: law,
                provenance: "Zhou92".into(),
                condition: "B-only".into(),
            }),
            prediction_note: None,
            verdict: Verdict::Consistent,
            excluded: vec![],
            monotone: true,
            provenance: Provenance {
                config_hash: "00".into(),
                code_version: CODE_VERSION.into(),
            },
        }
    }

    fn row(e: f64) -> SweepRow {
        SweepRow {
            epsilon: e,
            t_num: Some(3.0 * e.powf(-0.5)),
            uncertainty: Some(0.01),
            status: CellStatus::BlownUp,
            threshold_sensitivity: Some(0.02),
            message: None,
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        let r = result(vec![]);
        assert_eq!(String::from_utf8(r.csv_bytes()).unwrap(), "epsilon,T_num,T_uncertainty,status\n");
    }

    #[test]
    fn rows_come_out_sorted_descending() {
        let eps = [0.05, 0.4, 0.1, 0.2, 0.3, 0.07];
        let r = result(eps.iter().map(|&e| row(e)).collect());
        let text = String::from_utf8(r.csv_bytes()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        let parsed: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(parsed.windows(2).all(|w| w[0] > w[1]));
        assert!(lines[1].ends_with(",blown_up"));
    }

    #[test]
    fn report_round_trips_and_exports_are_identical() {
        let r = result([0.4, 0.3, 0.2, 0.1].iter().map(|&e| row(e)).collect());
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        export(&r, &a, Some(&Timestamps { started: 1, finished: 2 })).unwrap();
        export(&r, &b, Some(&Timestamps { started: 5, finished: 9 })).unwrap();
        for name in [CSV_NAME, REPORT_NAME] {
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        }
        assert_eq!(read_report(&a).unwrap(), r);
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = export(&result(vec![]), &blocker.join("sub"), None).unwrap_err();
        assert!(err.to_string().contains("file"));
    }
}
