//! Dataset ingestion, synthetic generators and snapshot files.

mod csv_dataset;
mod idx;
mod snapshot;

use std::io;
use std::path::PathBuf;

use thiserror::Error;
use wowflow_core::MetaMeasure;

pub use csv_dataset::{load_csv_dataset, read_csv_dataset, write_csv_dataset, CsvOptions};
pub use idx::{decode_idx_images, decode_idx_labels, load_idx_images, sample_per_class, IdxImages};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotReader, SnapshotRecord};
pub use wowflow_core::synth::{make_gaussian_blobs, make_ring_sources, make_rings};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("classes have unequal point counts ({})", format_counts(.counts))]
    RaggedClasses { counts: Vec<(String, usize)> },
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("file truncated: needed {needed} bytes, found {found}")]
    TruncatedFile { needed: usize, found: usize },
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("malformed snapshot record at byte {offset}: {message}")]
    MalformedRecord { offset: u64, message: String },
    #[error(transparent)]
    Core(#[from] wowflow_core::Error),
}

fn format_counts(counts: &[(String, usize)]) -> String {
    counts.iter().map(|(c, n)| format!("class {c}: {n}")).collect::<Vec<_>>().join(", ")
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// A mixture together with the class label of each cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMixture {
    pub labels: Vec<String>,
    pub measure: MetaMeasure,
}

/// Class labels in cloud order: numeric order when every label is an
/// integer, lexicographic otherwise.
pub(crate) fn sort_labels(labels: &mut [String]) {
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<i64>().unwrap());
    } else {
        labels.sort();
    }
}
