//! `.wowz` snapshot streams: one JSON object per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use wowflow_core::{MetaMeasure, PointCloud};

use super::{DataError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRecord {
    pub iteration: usize,
    pub objective: f64,
    pub mix_weights: Vec<f64>,
    /// `clouds[c][i]` is point `i` of cloud `c`.
    pub clouds: Vec<Vec<Vec<f64>>>,
}

impl SnapshotRecord {
    pub fn from_measure(iteration: usize, objective: f64, measure: &MetaMeasure) -> Self {
        let clouds = measure
            .clouds()
            .iter()
            .map(|c| (0..c.len()).map(|i| c.point(i).to_vec()).collect())
            .collect();
        Self { iteration, objective, mix_weights: measure.mix_weights().to_vec(), clouds }
    }

    /// Rebuilds the mixture (clouds uniformly weighted).
    pub fn to_measure(&self) -> Result<MetaMeasure> {
        let clouds = self
            .clouds
            .iter()
            .map(|rows| Ok(PointCloud::from_rows(rows)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetaMeasure::new(clouds, self.mix_weights.clone())?)
    }
}

pub fn write_snapshot(record: &SnapshotRecord, out: &mut impl Write) -> Result<()> {
    let io = |e: std::io::Error| DataError::Io { path: "<snapshot stream>".into(), source: e };
    serde_json::to_writer(&mut *out, record).map_err(|e| DataError::Io { path: "<snapshot stream>".into(), source: e.into() })?;
    out.write_all(b"\n").map_err(io)
}

/// Line reader that tracks byte offsets for error reporting.
pub struct SnapshotReader<R> {
    inner: R,
    offset: u64,
    line: String,
}

impl<R: BufRead> SnapshotReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0, line: String::new() }
    }

    /// Next record, or `None` at end of stream. Blank lines are skipped.
    pub fn next_record(&mut self) -> Result<Option<SnapshotRecord>> {
        loop {
            self.line.clear();
            let start = self.offset;
            let read = self
                .inner
                .read_line(&mut self.line)
                .map_err(|e| DataError::MalformedRecord { offset: start, message: e.to_string() })?;
            if read == 0 {
                return Ok(None);
            }
            self.offset += read as u64;
            let text = self.line.trim();
            if text.is_empty() {
                continue;
            }
            return serde_json::from_str(text)
                .map(Some)
                .map_err(|e| DataError::MalformedRecord { offset: start, message: e.to_string() });
        }
    }
}

impl<R: BufRead> Iterator for SnapshotReader<R> {
    type Item = Result<SnapshotRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Reads one record from the start of `input`.
pub fn read_snapshot(input: impl BufRead) -> Result<Option<SnapshotRecord>> {
    SnapshotReader::new(input).next_record()
}
