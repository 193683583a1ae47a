use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use wowflow_core::{MetaMeasure, PointCloud};

use super::{sort_labels, DataError, LabeledMixture, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Truncate every class to the smallest class count instead of failing.
    pub allow_ragged: bool,
}

/// Reads a `class,x0,…,x{d-1}` file into one uniform cloud per class.
pub fn load_csv_dataset(path: impl AsRef<Path>, opts: CsvOptions) -> Result<LabeledMixture> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_csv_dataset(file, opts)
}

pub fn read_csv_dataset(input: impl Read, opts: CsvOptions) -> Result<LabeledMixture> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| DataError::Parse { line: 1, message: e.to_string() })?.clone();
    if header.get(0) != Some("class") || header.len() < 2 {
        return Err(DataError::Parse { line: 1, message: "header must be class,x0,x1,...".into() });
    }
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("x{k}") {
            return Err(DataError::Parse { line: 1, message: format!("column {} should be x{k}, found `{name}`", k + 1) });
        }
    }
    let dim = header.len() - 1;

    let mut by_class: HashMap<String, Vec<f64>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim + 1 {
            return Err(DataError::Parse { line, message: format!("expected {} fields, found {}", dim + 1, record.len()) });
        }
        let class = record[0].to_string();
        if class.is_empty() {
            return Err(DataError::Parse { line, message: "empty class label".into() });
        }
        let coords = by_class.entry(class).or_default();
        for field in record.iter().skip(1) {
            let x: f64 = field.parse().map_err(|_| DataError::Parse { line, message: format!("`{field}` is not a number") })?;
            if !x.is_finite() {
                return Err(DataError::Parse { line, message: format!("`{field}` is not finite") });
            }
            coords.push(x);
        }
    }
    if by_class.is_empty() {
        return Err(DataError::Parse { line: 2, message: "no data rows".into() });
    }

    let mut labels: Vec<String> = by_class.keys().cloned().collect();
    sort_labels(&mut labels);
    let counts: Vec<(String, usize)> = labels.iter().map(|l| (l.clone(), by_class[l].len() / dim)).collect();
    let min = counts.iter().map(|c| c.1).min().unwrap_or(0);
    if counts.iter().any(|c| c.1 != min) && !opts.allow_ragged {
        return Err(DataError::RaggedClasses { counts });
    }
    let clouds = labels
        .iter()
        .map(|l| {
            let mut pts = by_class.remove(l).unwrap_or_default();
            pts.truncate(min * dim);
            PointCloud::uniform(pts, dim)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(LabeledMixture { labels, measure: MetaMeasure::uniform(clouds)? })
}

/// Writes one row per point with full round-trip precision.
pub fn write_csv_dataset(out: impl Write, labels: &[String], measure: &MetaMeasure) -> Result<()> {
    let io_err = |e: csv::Error| DataError::Parse { line: 0, message: e.to_string() };
    let mut writer = csv::Writer::from_writer(out);
    let dim = measure.dim();
    let mut header = vec!["class".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    writer.write_record(&header).map_err(io_err)?;
    for (label, cloud) in labels.iter().zip(measure.clouds()) {
        for i in 0..cloud.len() {
            let mut row = vec![label.clone()];
            row.extend(cloud.point(i).iter().map(|x| x.to_string()));
            writer.write_record(&row).map_err(io_err)?;
        }
    }
    writer.flush().map_err(|e| DataError::Parse { line: 0, message: e.to_string() })?;
    Ok(())
}
