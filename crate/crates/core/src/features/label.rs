use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FeatureVector;
use crate::classes::{UnknownClass, WindowClass};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    UnknownClass(#[from] UnknownClass),
    #[error("ground truth row {row}: {reason}")]
    Invalid { row: usize, reason: String },
    #[error("ground truth intervals {first} and {second} overlap within the same tier")]
    Overlap { first: usize, second: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A labeled event interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthInterval {
    pub class: WindowClass,
    pub start: u64,
    pub end: u64,
}

impl GroundTruthInterval {
    /// Builds an interval from a class token such as `slammer` or `outage_r1r2`.
    pub fn parse(class: &str, start: u64, end: u64) -> Result<Self, LabelError> {
        let class: WindowClass = class.parse()?;
        Ok(Self { class, start, end })
    }

    fn contains(&self, t: f64) -> bool {
        self.start as f64 <= t && t < self.end as f64
    }
}

/// Assigns every window the class of the interval containing its midpoint.
///
/// Uncovered windows are `Normal`. Where tiers overlap, intrusion beats
/// outage. Overlap inside one tier is rejected.
pub fn label_windows(
    vectors: &[FeatureVector],
    window_seconds: u64,
    ground_truth: &[GroundTruthInterval],
) -> Result<Vec<WindowClass>, LabelError> {
    for (i, a) in ground_truth.iter().enumerate() {
        if a.start >= a.end {
            return Err(LabelError::Invalid {
                row: i + 1,
                reason: format!("empty interval [{}, {})", a.start, a.end),
            });
        }
        if a.class == WindowClass::Normal {
            return Err(LabelError::Invalid {
                row: i + 1,
                reason: "normal is the default label, not an event class".into(),
            });
        }
        for (j, b) in ground_truth.iter().enumerate().skip(i + 1) {
            if a.class.tier() == b.class.tier() && a.start < b.end && b.start < a.end {
                return Err(LabelError::Overlap {
                    first: i + 1,
                    second: j + 1,
                });
            }
        }
    }
    Ok(vectors
        .iter()
        .map(|fv| {
            let mid = fv.window_start as f64 + window_seconds as f64 / 2.0;
            ground_truth
                .iter()
                .filter(|g| g.contains(mid))
                .map(|g| g.class)
                .max_by_key(|c| c.tier())
                .unwrap_or(WindowClass::Normal)
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct GroundTruthRow {
    class: String,
    start: u64,
    end: u64,
}

pub fn read_ground_truth<R: Read>(reader: R) -> Result<Vec<GroundTruthInterval>, LabelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<GroundTruthRow>().enumerate() {
        let row = row?;
        out.push(
            GroundTruthInterval::parse(&row.class, row.start, row.end).map_err(|e| LabelError::Invalid {
                row: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn read_ground_truth_file(path: &Path) -> Result<Vec<GroundTruthInterval>, LabelError> {
    read_ground_truth(std::fs::File::open(path)?)
}

pub fn write_ground_truth<W: Write>(writer: W, intervals: &[GroundTruthInterval]) -> Result<(), LabelError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for g in intervals {
        wtr.serialize(GroundTruthRow {
            class: g.class.name().to_string(),
            start: g.start,
            end: g.end,
        })?;
    }
    wtr.flush()?;
    Ok(())
}
