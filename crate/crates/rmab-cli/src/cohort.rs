//! Cohort CSV format: `arm_id,p01p,p11p,p01a,p11a` with a mandatory
//! header, one validated transition model per row, unique arm ids.

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use rmab_core::model::{ModelError, Strictness, TransitionModel};
use rmab_core::util::format_sig;

pub const COHORT_HEADER: [&str; 5] = ["arm_id", "p01p", "p11p", "p01a", "p11a"];

/// One cohort member: identifier plus validated model.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortArm {
    pub arm_id: String,
    pub model: TransitionModel,
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad cohort header {found:?}; expected {COHORT_HEADER:?}")]
    BadHeader { found: Vec<String> },
    #[error("line {line}: {source}")]
    Parse { line: u64, source: csv::Error },
    #[error("arm {arm_id}: {source}")]
    InvalidModel { arm_id: String, source: ModelError },
    #[error("duplicate arm_id {arm_id}")]
    DuplicateArmId { arm_id: String },
    #[error("cohort file has no rows")]
    Empty,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    arm_id: String,
    p01p: f64,
    p11p: f64,
    p01a: f64,
    p11a: f64,
}

/// Parses and validates a cohort from any reader.
pub fn read_cohort<R: Read>(reader: R, strictness: Strictness) -> Result<Vec<CohortArm>, CohortError> {
    let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv_reader
        .headers()
        .map_err(|source| CohortError::Parse { line: 1, source })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != COHORT_HEADER {
        return Err(CohortError::BadHeader { found: header });
    }
    let mut arms = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, row) in csv_reader.deserialize::<RawRow>().enumerate() {
        let line = i as u64 + 2; // header occupies line 1
        let row = row.map_err(|source| CohortError::Parse { line, source })?;
        if !seen.insert(row.arm_id.clone()) {
            return Err(CohortError::DuplicateArmId { arm_id: row.arm_id });
        }
        let model = TransitionModel::new(row.p01p, row.p11p, row.p01a, row.p11a, strictness)
            .map_err(|source| CohortError::InvalidModel {
                arm_id: row.arm_id.clone(),
                source,
            })?;
        arms.push(CohortArm {
            arm_id: row.arm_id,
            model,
        });
    }
    if arms.is_empty() {
        return Err(CohortError::Empty);
    }
    Ok(arms)
}

pub fn read_cohort_file(path: &Path, strictness: Strictness) -> Result<Vec<CohortArm>, CohortError> {
    let file = std::fs::File::open(path).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_cohort(std::io::BufReader::new(file), strictness)
}

/// Emits the cohort with 12-significant-digit probabilities, so a
/// read-back reproduces the models at that precision.
pub fn write_cohort<W: Write>(writer: &mut W, arms: &[CohortArm]) -> std::io::Result<()> {
    writeln!(writer, "{}", COHORT_HEADER.join(","))?;
    for arm in arms {
        writeln!(
            writer,
            "{},{},{},{},{}",
            arm.arm_id,
            format_sig(arm.model.p01p(), 12),
            format_sig(arm.model.p11p(), 12),
            format_sig(arm.model.p01a(), 12),
            format_sig(arm.model.p11a(), 12),
        )?;
    }
    Ok(())
}

pub fn write_cohort_file(path: &Path, arms: &[CohortArm]) -> Result<(), CohortError> {
    let mut file = std::fs::File::create(path).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_cohort(&mut file, arms).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Wraps bare models with sequential ids `0..n`.
pub fn with_sequential_ids(models: Vec<TransitionModel>) -> Vec<CohortArm> {
    models
        .into_iter()
        .enumerate()
        .map(|(i, model)| CohortArm {
            arm_id: i.to_string(),
            model,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_single_row() {
        let arms = vec![CohortArm {
            arm_id: "m1".into(),
            model: TransitionModel::strict_natural(0.2, 0.6, 0.5, 0.8).unwrap(),
        }];
        let mut buf = Vec::new();
        write_cohort(&mut buf, &arms).unwrap();
        let back = read_cohort(buf.as_slice(), Strictness::StrictNatural).unwrap();
        assert_eq!(back, arms);
    }

    #[test]
    fn round_trip_preserves_twelve_significant_digits() {
        let arms: Vec<CohortArm> = [
            (0.123456789012345, 0.567890123456789, 0.3456789, 0.98765432101),
            (0.001234567890123, 0.7, 0.25, 0.75),
        ]
        .iter()
        .enumerate()
        .map(|(i, &(a, b, c, d))| CohortArm {
            arm_id: format!("arm{i}"),
            model: TransitionModel::strict_natural(a, b, c, d).unwrap(),
        })
        .collect();
        let mut buf = Vec::new();
        write_cohort(&mut buf, &arms).unwrap();
        let back = read_cohort(buf.as_slice(), Strictness::StrictNatural).unwrap();
        for (orig, parsed) in arms.iter().zip(&back) {
            for (x, y) in [
                (orig.model.p01p(), parsed.model.p01p()),
                (orig.model.p11p(), parsed.model.p11p()),
                (orig.model.p01a(), parsed.model.p01a()),
                (orig.model.p11a(), parsed.model.p11a()),
            ] {
                assert!(((x - y) / x).abs() < 1e-11, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn zero_probability_row_is_rejected() {
        let text = "arm_id,p01p,p11p,p01a,p11a\na,0,0.6,0.5,0.8\n";
        let err = read_cohort(text.as_bytes(), Strictness::StrictNatural).unwrap_err();
        match err {
            CohortError::InvalidModel { arm_id, source } => {
                assert_eq!(arm_id, "a");
                assert!(source.to_string().contains("nonzero"));
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn duplicate_arm_id_is_rejected() {
        let text = "arm_id,p01p,p11p,p01a,p11a\na,0.2,0.6,0.5,0.8\na,0.2,0.6,0.5,0.8\n";
        let err = read_cohort(text.as_bytes(), Strictness::StrictNatural).unwrap_err();
        assert!(matches!(err, CohortError::DuplicateArmId { arm_id } if arm_id == "a"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "id,p01p,p11p,p01a,p11a\na,0.2,0.6,0.5,0.8\n";
        assert!(matches!(
            read_cohort(text.as_bytes(), Strictness::StrictNatural),
            Err(CohortError::BadHeader { .. })
        ));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = "arm_id,p01p,p11p,p01a,p11a\na,0.2,0.6,0.5,0.8\nb,not_a_number,0.6,0.5,0.8\n";
        let err = read_cohort(text.as_bytes(), Strictness::StrictNatural).unwrap_err();
        assert!(matches!(err, CohortError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn relaxed_mode_admits_equal_rows() {
        let text = "arm_id,p01p,p11p,p01a,p11a\na,0.2,0.6,0.2,0.6\n";
        assert!(read_cohort(text.as_bytes(), Strictness::StrictNatural).is_err());
        assert!(read_cohort(text.as_bytes(), Strictness::Relaxed).is_ok());
    }
}
