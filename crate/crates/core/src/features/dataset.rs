//! CSV datasets: header `t,f01,...,f37[,label]`, one window per row.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{FeatureVector, FEATURE_COUNT};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("header mismatch: expected `t,f01,...,f37[,label]`, found `{0}`")]
    Header(String),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn expected_header(with_label: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=FEATURE_COUNT).map(|i| format!("f{i:02}")));
    if with_label {
        h.push("label".to_string());
    }
    h
}

/// Rounds to nine significant digits and prints the shortest form that
/// reads back to the rounded value.
fn format_value(v: f64) -> String {
    format!("{}", to_file_precision(v))
}

/// The value a dataset file stores for `v`.
pub fn to_file_precision(v: f64) -> f64 {
    format!("{v:.8e}").parse().unwrap_or(v)
}

pub fn write_dataset<W: Write>(writer: W, vectors: &[FeatureVector]) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(expected_header(true))?;
    let mut row = Vec::with_capacity(FEATURE_COUNT + 2);
    for (i, fv) in vectors.iter().enumerate() {
        row.clear();
        row.push(fv.window_start.to_string());
        for &v in &fv.values {
            if !v.is_finite() {
                return Err(DatasetError::Row {
                    row: i + 1,
                    reason: format!("non-finite value {v}"),
                });
            }
            row.push(format_value(v));
        }
        row.push(fv.label.map(|l| l.to_string()).unwrap_or_default());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a dataset; the `label` column is optional and empty cells mean
/// "unlabeled". Row numbers in errors count data rows from 1.
pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<FeatureVector>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let with_label = if header == expected_header(true) {
        true
    } else if header == expected_header(false) {
        false
    } else {
        return Err(DatasetError::Header(header.join(",")));
    };
    let width = header.len();
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let bad = |reason: String| DatasetError::Row { row, reason };
        if record.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", record.len())));
        }
        let window_start: u64 = record[0]
            .parse()
            .map_err(|_| bad(format!("bad window start {:?}", &record[0])))?;
        let mut values = [0.0; FEATURE_COUNT];
        for (k, slot) in values.iter_mut().enumerate() {
            let cell = &record[k + 1];
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("bad value {cell:?} in f{:02}", k + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value in f{:02}", k + 1)));
            }
            *slot = v;
        }
        let label = if with_label && !record[width - 1].is_empty() {
            let cell = &record[width - 1];
            Some(cell.parse().map_err(|_| bad(format!("bad label {cell:?}")))?)
        } else {
            None
        };
        out.push(FeatureVector {
            window_start,
            values,
            label,
        });
    }
    Ok(out)
}

pub fn write_dataset_file(path: &Path, vectors: &[FeatureVector]) -> Result<(), DatasetError> {
    write_dataset(std::io::BufWriter::new(std::fs::File::create(path)?), vectors)
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<FeatureVector>, DatasetError> {
    read_dataset(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<FeatureVector> {
        (0..n)
            .map(|i| {
                let mut fv = FeatureVector::zeros(60 * i as u64);
                for (k, v) in fv.values.iter_mut().enumerate() {
                    *v = (i * 37 + k) as f64 / 7.0;
                }
                fv.values[0] = i as f64;
                fv.with_label((i % 4) as u32)
            })
            .collect()
    }

    fn nine_digits(v: &[FeatureVector]) -> Vec<FeatureVector> {
        v.iter()
            .map(|fv| {
                let mut fv = fv.clone();
                for x in fv.values.iter_mut() {
                    *x = to_file_precision(*x);
                }
                fv
            })
            .collect()
    }

    #[test]
    fn round_trip_ten_rows() {
        let data = nine_digits(&sample(10));
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
        // Writing what was read reproduces the same bytes.
        let mut again = Vec::new();
        write_dataset(&mut again, &read_dataset(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_spelling() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,f01,f02,"));
        assert!(text.trim_end().ends_with("f36,f37,label"));
    }

    #[test]
    fn unlabeled_file() {
        let header = expected_header(false).join(",");
        let row: Vec<String> = std::iter::once("120".to_string())
            .chain((0..FEATURE_COUNT).map(|k| k.to_string()))
            .collect();
        let text = format!("{header}\n{}\n", row.join(","));
        let data = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].label, None);
        assert_eq!(data[0].values[36], 36.0);
    }

    #[test]
    fn short_row_names_row() {
        let header = expected_header(true).join(",");
        let good: Vec<String> = std::iter::once("0".to_string())
            .chain((0..FEATURE_COUNT).map(|_| "1".to_string()))
            .chain(std::iter::once("0".to_string()))
            .collect();
        let short: Vec<String> = std::iter::once("60".to_string())
            .chain((0..FEATURE_COUNT - 1).map(|_| "1".to_string()))
            .chain(std::iter::once("0".to_string()))
            .collect();
        let text = format!("{header}\n{}\n{}\n", good.join(","), short.join(","));
        match read_dataset(text.as_bytes()) {
            Err(DatasetError::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_non_finite() {
        assert!(matches!(
            read_dataset("a,b,c\n".as_bytes()),
            Err(DatasetError::Header(_))
        ));
        let mut data = sample(1);
        data[0].values[3] = f64::NAN;
        assert!(write_dataset(Vec::new(), &data).is_err());
        let header = expected_header(true).join(",");
        let row: Vec<String> = std::iter::once("0".to_string())
            .chain((0..FEATURE_COUNT).map(|k| if k == 5 { "inf".into() } else { "1".into() }))
            .chain(std::iter::once("0".to_string()))
            .collect();
        let text = format!("{header}\n{}\n", row.join(","));
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(DatasetError::Row { row: 1, .. })
        ));
    }
}
