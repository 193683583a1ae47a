//! Output directories and the snapshot-writing flow driver shared by the commands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use wowflow_core::{run_flow, run_reweighted_flow, FlowConfig, FlowState, MetaMeasure, ReweightConfig, Snapshot};

use super::{canonical_args, CliError, Result, TOOL};
use crate::data_io::{write_snapshot, SnapshotRecord};
use crate::manifest::{sha256_file, RunManifest, MANIFEST_FILE};

pub(crate) const SNAPSHOTS_FILE: &str = "snapshots.wowz";
pub(crate) const OBJECTIVE_FILE: &str = "objective.csv";
pub(crate) const SUMMARY_FILE: &str = "summary.json";

/// An output directory that remembers which files were written into it.
pub(crate) struct OutDir {
    path: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(CliError::io(path))?;
        Ok(Self { path: path.to_path_buf(), files: Vec::new() })
    }

    pub fn path_of(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn create_file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path_of(name);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(BufWriter::new(file))
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.path_of(name);
        let mut w = self.create_file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(&path)(e.into()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(CliError::io(&path))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path_of(name);
        let mut w = self.create_file(name)?;
        w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(CliError::io(&path))
    }

    /// Writes `manifest.json` with digests of every file written so far.
    pub fn finish(self, command: &str, config: &impl Serialize, inputs: &[PathBuf]) -> Result<RunManifest> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut outputs = BTreeMap::new();
        for name in &self.files {
            let path = self.path_of(name);
            outputs.insert(name.clone(), sha256_file(&path).map_err(CliError::io(&path))?);
        }
        let mut input_digests = BTreeMap::new();
        for path in inputs {
            input_digests.insert(path.display().to_string(), sha256_file(path).map_err(CliError::io(path))?);
        }
        let manifest = RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: canonical_args(command, &config),
            config,
            inputs: input_digests,
            outputs,
        };
        let path = self.path_of(MANIFEST_FILE);
        manifest.write(&path).map_err(CliError::io(&path))?;
        Ok(manifest)
    }
}

fn sink_error(e: impl std::fmt::Display) -> wowflow_core::Error {
    wowflow_core::Error::Sink(e.to_string())
}

/// Runs the flow (reweighted when `rcfg` is set), writing `snapshots.wowz`
/// every `record_every` steps plus the final state, and `objective.csv`.
/// `on_record` sees each recorded snapshot.
pub(crate) fn run_recorded<F>(
    p0: MetaMeasure,
    q: &MetaMeasure,
    cfg: &FlowConfig,
    rcfg: Option<&ReweightConfig>,
    record_every: usize,
    dir: &mut OutDir,
    mut on_record: F,
) -> Result<FlowState>
where
    F: FnMut(&Snapshot<'_>) -> Result<()>,
{
    let mut snapshots = dir.create_file(SNAPSHOTS_FILE)?;
    let last = cfg.iterations;
    let sink = |s: &Snapshot<'_>| -> wowflow_core::Result<()> {
        if !s.iteration.is_multiple_of(record_every) && s.iteration != last {
            return Ok(());
        }
        let record = SnapshotRecord::from_measure(s.iteration, s.objective, s.measure);
        write_snapshot(&record, &mut snapshots).map_err(sink_error)?;
        on_record(s).map_err(sink_error)
    };
    let state = match rcfg {
        Some(r) => run_reweighted_flow(p0, q, cfg, r, sink)?,
        None => run_flow(p0, q, cfg, sink)?,
    };
    let path = dir.path_of(SNAPSHOTS_FILE);
    snapshots.flush().map_err(CliError::io(&path))?;

    let path = dir.path_of(OBJECTIVE_FILE);
    let mut w = dir.create_file(OBJECTIVE_FILE)?;
    let mut text = String::from("iteration,objective\n");
    for (k, v) in &state.objective_trace {
        text.push_str(&format!("{k},{v}\n"));
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(CliError::io(&path))?;
    Ok(state)
}
