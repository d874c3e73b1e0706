//! CSV datasets: header `f0,…,f{d-1},label`, one sample per row. An empty label
//! field marks an unlabeled sample; a file must be entirely labeled or entirely
//! unlabeled.

use std::path::Path;

use ndarray::Array2;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::gmm::LabeledDataset;
use crate::scalar::Scalar;

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<LabeledDataset<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file)
}

pub fn read_csv<T: Scalar>(reader: impl std::io::Read) -> Result<LabeledDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    let n_cols = header.len();
    if n_cols < 2 || header.get(n_cols - 1).map(str::trim) != Some("label") {
        return Err(Error::Parse { line: 1, message: "header must end with a `label` column".into() });
    }
    for (j, name) in header.iter().take(n_cols - 1).enumerate() {
        if name.trim() != format!("f{j}") {
            return Err(Error::Parse { line: 1, message: format!("expected column `f{j}`, found `{name}`") });
        }
    }
    let d = n_cols - 1;

    let mut values = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n_cols {
            return Err(parse_error(line, format!("expected {n_cols} fields, found {}", record.len())));
        }
        for (j, field) in record.iter().take(d).enumerate() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(line, format!("feature f{j} is not a number: `{field}`")))?;
            if !x.is_finite() {
                return Err(parse_error(line, format!("feature f{j} is not finite")));
            }
            values.push(T::lit(x));
        }
        let token = record.get(d).unwrap_or("").trim();
        let label = if token.is_empty() {
            None
        } else {
            Some(token.parse::<usize>().map_err(|_| parse_error(line, format!("unknown label `{token}`")))?)
        };
        if let Some(first) = labels.first() {
            if first.is_some() != label.is_some() {
                return Err(parse_error(line, "file mixes labeled and unlabeled rows"));
            }
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::input("dataset file has no rows"));
    }
    let features = Array2::from_shape_vec((labels.len(), d), values).expect("row-major fill");
    if labels[0].is_some() {
        LabeledDataset::labeled(features, labels.into_iter().map(|l| l.expect("checked")).collect())
    } else {
        LabeledDataset::unlabeled(features)
    }
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn write_csv<T: Scalar>(data: &LabeledDataset<T>, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_io)?;
    let labels = data.labels();
    for (i, row) in data.features().rows().into_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|x| x.to_f64_lossy().to_string()).collect();
        fields.push(labels.map_or(String::new(), |l| l[i].to_string()));
        w.write_record(&fields).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes the dataset atomically.
pub fn save_csv<T: Scalar>(data: &LabeledDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(data, &mut buf)?;
    write_atomic(path, &buf)
}
