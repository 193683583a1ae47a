use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::index;
use serde::Serialize;
use serde_json::json;
use wowflow_core::matching::cost_matrix;
use wowflow_core::oracles::{gradcheck as fd_check, jitter, DEFAULT_FD_STEP, DEFAULT_JITTER};
use wowflow_core::rng::{derive_seed, substream};
use wowflow_core::sliced::sw2_squared;
use wowflow_core::{align_labels, sample_projections, wow_distance, Assignment, KernelSpec, MetaMeasure, PointCloud};

use super::runner::{run_recorded, OutDir, SUMMARY_FILE};
use super::{
    CliError, Command, DistillArgs, FlowArgs, GradcheckArgs, InputFlags, MatchArgs, Result, RerunArgs, RingsArgs,
};
use crate::data_io::{
    decode_idx_images, decode_idx_labels, load_csv_dataset, make_gaussian_blobs, make_ring_sources, make_rings,
    sample_per_class, write_csv_dataset, CsvOptions, DataError, LabeledMixture,
};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub(crate) const TRACE_FILE: &str = "trace.csv";
pub(crate) const ALIGNED_FILE: &str = "aligned.csv";
pub(crate) const ALIGNMENT_FILE: &str = "alignment.csv";
pub(crate) const DISTILLED_FILE: &str = "distilled.csv";
pub(crate) const MATCH_FILE: &str = "match.txt";
pub(crate) const REPORT_FILE: &str = "report.json";

// Sub-streams of the run seed, so that data, projections and evaluation never share draws.
const SOURCE_STREAM: u64 = 1 << 40;
const TARGET_STREAM: u64 = (1 << 40) + 1;
const EVAL_STREAM: u64 = (1 << 40) + 2;

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>"))
}

/// Reads a CSV path or an `idx:IMAGES:LABELS` pair; also returns the files read.
fn load_dataset(spec: &str, input: &InputFlags, seed: u64) -> Result<(LabeledMixture, Vec<PathBuf>)> {
    if let Some(rest) = spec.strip_prefix("idx:") {
        let (images, labels) = rest
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("`{spec}`: expected idx:IMAGES:LABELS")))?;
        let (images, labels) = (PathBuf::from(images), PathBuf::from(labels));
        let image_bytes = fs::read(&images).map_err(CliError::io(&images))?;
        let label_bytes = fs::read(&labels).map_err(CliError::io(&labels))?;
        let decoded = decode_idx_images(&image_bytes)?;
        let label_values = decode_idx_labels(&label_bytes)?;
        let per_class = match input.idx_per_class {
            Some(p) => p,
            None => {
                let mut counts = BTreeMap::<u8, usize>::new();
                for &l in &label_values {
                    *counts.entry(l).or_default() += 1;
                }
                counts.values().copied().min().unwrap_or(0)
            }
        };
        let data = sample_per_class(&decoded, &label_values, per_class, seed)?;
        Ok((data, vec![images, labels]))
    } else {
        let path = PathBuf::from(spec);
        let data = load_csv_dataset(&path, CsvOptions { allow_ragged: input.allow_ragged })?;
        Ok((data, vec![path]))
    }
}

fn sw2_to(cloud: &PointCloud, target: &PointCloud, proj: &wowflow_core::ProjectionSet) -> Result<f64> {
    Ok(sw2_squared(cloud, target, proj)?.sqrt())
}

fn final_objective(state: &wowflow_core::FlowState) -> f64 {
    state.objective_trace.last().map_or(f64::NAN, |&(_, v)| v)
}

pub(crate) fn rings(a: &RingsArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.flow.flow_config()?;
    let rcfg = a.reweight.config();
    let seed = a.flow.seed;
    let target = make_rings(a.n_per_ring, a.rings, seed)?;
    let source = make_ring_sources(a.sources.unwrap_or(a.rings), a.n_per_ring, a.spread, derive_seed(seed, SOURCE_STREAM))?;
    let eval = sample_projections(a.eval_projections, 2, derive_seed(seed, EVAL_STREAM))?;

    let mut dir = OutDir::create(&a.out)?;
    let trace_path = dir.path_of(TRACE_FILE);
    let mut trace = dir.create_file(TRACE_FILE)?;
    let mut trace_text = String::from("iteration,cloud,target,sw2,weight\n");
    let mut last: Vec<(usize, f64)> = Vec::new();
    let state = run_recorded(source, &target, &cfg, rcfg.as_ref(), a.flow.record_every, &mut dir, |s| {
        let align = align_labels(s.measure, &target)?;
        last.clear();
        for (c, cloud) in s.measure.clouds().iter().enumerate() {
            let sw2 = sw2_to(cloud, target.cloud(align[c]), &eval)?;
            let w = s.measure.mix_weights()[c];
            trace_text.push_str(&format!("{},{c},{},{sw2},{w}\n", s.iteration, align[c]));
            last.push((align[c], sw2));
        }
        Ok(())
    })?;
    trace.write_all(trace_text.as_bytes()).and_then(|_| trace.flush()).map_err(CliError::io(&trace_path))?;

    let summary = json!({
        "iterations": state.iteration,
        "final_objective": final_objective(&state),
        "weights": state.measure.mix_weights(),
        "alignment": last.iter().map(|p| p.0).collect::<Vec<_>>(),
        "sw2": last.iter().map(|p| p.1).collect::<Vec<_>>(),
        "marginal_error": state.marginal_error,
    });
    dir.write_json(SUMMARY_FILE, &summary)?;
    dir.finish("rings", a, &[])?;

    let mut text = format!("final objective {:e}\n", final_objective(&state));
    for (c, (t, sw2)) in last.iter().enumerate() {
        text.push_str(&format!("cloud {c} -> ring {t}: SW2 {sw2:.4}, weight {:.4}\n", state.measure.mix_weights()[c]));
    }
    say(out, &text)
}

pub(crate) fn flow(a: &FlowArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.flow.flow_config()?;
    let rcfg = a.reweight.config();
    let seed = a.flow.seed;
    let (source, mut inputs) = load_dataset(&a.source, &a.input, derive_seed(seed, SOURCE_STREAM))?;
    let (target, more) = load_dataset(&a.target, &a.input, derive_seed(seed, TARGET_STREAM))?;
    inputs.extend(more);

    let mut dir = OutDir::create(&a.out)?;
    let state = run_recorded(source.measure, &target.measure, &cfg, rcfg.as_ref(), a.flow.record_every, &mut dir, |_| Ok(()))?;
    let align = align_labels(&state.measure, &target.measure)?;
    let aligned_labels: Vec<String> = align.iter().map(|&t| target.labels[t].clone()).collect();

    let path = dir.path_of(ALIGNED_FILE);
    let mut w = dir.create_file(ALIGNED_FILE)?;
    write_csv_dataset(&mut w, &aligned_labels, &state.measure)?;
    w.flush().map_err(CliError::io(&path))?;

    let mut table = String::from("cloud,source_label,target_label,weight\n");
    for (c, label) in source.labels.iter().enumerate() {
        table.push_str(&format!("{c},{label},{},{}\n", aligned_labels[c], state.measure.mix_weights()[c]));
    }
    dir.write_text(ALIGNMENT_FILE, &table)?;
    let summary = json!({
        "iterations": state.iteration,
        "final_objective": final_objective(&state),
        "weights": state.measure.mix_weights(),
        "alignment": align,
        "marginal_error": state.marginal_error,
    });
    dir.write_json(SUMMARY_FILE, &summary)?;
    dir.finish("flow", a, &inputs)?;
    say(out, &format!("final objective {:e}\n{table}", final_objective(&state)))
}

/// `per_class` points of every cloud, drawn without replacement.
fn subsample(data: &LabeledMixture, per_class: usize, seed: u64) -> Result<MetaMeasure> {
    let clouds = data
        .measure
        .clouds()
        .iter()
        .enumerate()
        .map(|(c, cloud)| {
            if cloud.len() < per_class {
                return Err(CliError::Data(DataError::CountMismatch(format!(
                    "class {} has {} points, fewer than --per-class {per_class}",
                    data.labels[c],
                    cloud.len()
                ))));
            }
            let mut rng = substream(seed, c as u64);
            let mut pts = Vec::with_capacity(per_class * cloud.dim());
            for i in index::sample(&mut rng, cloud.len(), per_class) {
                pts.extend_from_slice(cloud.point(i));
            }
            Ok(PointCloud::uniform(pts, cloud.dim())?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaMeasure::uniform(clouds)?)
}

pub(crate) fn distill(a: &DistillArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.flow.flow_config()?;
    let seed = a.flow.seed;
    let (target, inputs) = load_dataset(&a.target, &a.input, derive_seed(seed, TARGET_STREAM))?;
    let p0 = subsample(&target, a.per_class, derive_seed(seed, SOURCE_STREAM))?;

    let mut dir = OutDir::create(&a.out)?;
    let state = run_recorded(p0, &target.measure, &cfg, None, a.flow.record_every, &mut dir, |_| Ok(()))?;
    let path = dir.path_of(DISTILLED_FILE);
    let mut w = dir.create_file(DISTILLED_FILE)?;
    write_csv_dataset(&mut w, &target.labels, &state.measure)?;
    w.flush().map_err(CliError::io(&path))?;
    let summary = json!({
        "iterations": state.iteration,
        "final_objective": final_objective(&state),
        "per_class": a.per_class,
        "classes": target.labels,
    });
    dir.write_json(SUMMARY_FILE, &summary)?;
    dir.finish("distill", a, &inputs)?;
    say(
        out,
        &format!(
            "distilled {} classes × {} points, final objective {:e}\n",
            target.labels.len(),
            a.per_class,
            final_objective(&state)
        ),
    )
}

pub(crate) fn match_datasets(a: &MatchArgs, out: &mut dyn Write) -> Result<()> {
    let (da, mut inputs) = load_dataset(&a.a, &a.input, derive_seed(a.seed, SOURCE_STREAM))?;
    let (db, more) = load_dataset(&a.b, &a.input, derive_seed(a.seed, TARGET_STREAM))?;
    inputs.extend(more);
    let (dist2, assignment) = wow_distance(&da.measure, &db.measure)?;
    let costs = cost_matrix(&da.measure, &db.measure)?;

    let mut text = format!("wow_distance {}\nwow_distance_squared {dist2}\n", dist2.sqrt());
    match &assignment {
        Assignment::Permutation { perm, .. } => {
            text.push_str("assignment\n");
            for (i, &j) in perm.iter().enumerate() {
                text.push_str(&format!("{} -> {}\n", da.labels[i], db.labels[j]));
            }
        }
        Assignment::Plan { plan, rows, cols, .. } => {
            text.push_str("plan\n");
            for i in 0..*rows {
                for j in 0..*cols {
                    let m = plan[i * cols + j];
                    if m > 0.0 {
                        text.push_str(&format!("{} -> {}: {m}\n", da.labels[i], db.labels[j]));
                    }
                }
            }
        }
    }
    text.push_str("cost_matrix\n");
    text.push_str(&format!("a\\b,{}\n", db.labels.join(",")));
    for i in 0..costs.rows() {
        let row: Vec<String> = (0..costs.cols()).map(|j| costs.get(i, j).to_string()).collect();
        text.push_str(&format!("{},{}\n", da.labels[i], row.join(",")));
    }
    if let Some(dir) = &a.out {
        let mut dir = OutDir::create(dir)?;
        dir.write_text(MATCH_FILE, &text)?;
        dir.finish("match", a, &inputs)?;
    }
    say(out, &text)
}

/// Seeded blob instance used by `gradcheck`: jittered source, independent target.
pub fn gradcheck_instance(c: usize, n: usize, d: usize, seed: u64) -> Result<(MetaMeasure, MetaMeasure)> {
    let p = jitter(&make_gaussian_blobs(c, n, d, 0.5, seed)?, DEFAULT_JITTER, seed)?;
    let q = make_gaussian_blobs(c, n, d, 0.5, derive_seed(seed, TARGET_STREAM))?;
    Ok((p, q))
}

#[derive(Serialize)]
struct GradcheckReportOut {
    kernel: String,
    max_relative_error: f64,
    worst_coordinate: (usize, usize, usize),
    step_h: f64,
    tol: f64,
    pass: bool,
}

pub(crate) fn gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let kernel: KernelSpec = a.kernel.parse().map_err(|e: wowflow_core::Error| CliError::Usage(e.to_string()))?;
    let (p, q) = gradcheck_instance(a.clouds, a.n, a.d, a.seed)?;
    let proj = sample_projections(a.projections, a.d, a.seed)?;
    let r = fd_check(&p, &q, &kernel, &proj, DEFAULT_FD_STEP)?;
    let report = GradcheckReportOut {
        kernel: kernel.to_string(),
        max_relative_error: r.max_relative_error,
        worst_coordinate: r.worst_coordinate,
        step_h: r.step_h,
        tol: a.tol,
        pass: r.max_relative_error < a.tol,
    };
    if let Some(dir) = &a.out {
        let mut dir = OutDir::create(dir)?;
        dir.write_json(REPORT_FILE, &report)?;
        dir.finish("gradcheck", a, &[])?;
    }
    let (c, i, k) = r.worst_coordinate;
    say(
        out,
        &format!(
            "{} C={} n={} d={} L={}: max relative error {:e} at cloud {c} point {i} axis {k} (h={:e}) {}\n",
            report.kernel,
            a.clouds,
            a.n,
            a.d,
            a.projections,
            r.max_relative_error,
            r.step_h,
            if report.pass { "PASS" } else { "FAIL" }
        ),
    )?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::GradcheckFailed { error: r.max_relative_error, tol: a.tol })
    }
}

fn command_from_manifest(m: &RunManifest, out: PathBuf) -> Result<Command> {
    let bad = |e: serde_json::Error| CliError::Usage(format!("manifest config for `{}`: {e}", m.command));
    let config = m.config.clone();
    Ok(match m.command.as_str() {
        "rings" => Command::Rings(RingsArgs { out, ..serde_json::from_value(config).map_err(bad)? }),
        "flow" => Command::Flow(FlowArgs { out, ..serde_json::from_value(config).map_err(bad)? }),
        "distill" => Command::Distill(DistillArgs { out, ..serde_json::from_value(config).map_err(bad)? }),
        "match" => Command::Match(MatchArgs { out: Some(out), ..serde_json::from_value(config).map_err(bad)? }),
        "gradcheck" => Command::Gradcheck(GradcheckArgs { out: Some(out), ..serde_json::from_value(config).map_err(bad)? }),
        other => return Err(CliError::Usage(format!("manifest names unknown command `{other}`"))),
    })
}

pub(crate) fn rerun(a: &RerunArgs, out: &mut dyn Write) -> Result<()> {
    let original = RunManifest::read(&a.manifest).map_err(CliError::io(&a.manifest))?;
    for (path, digest) in &original.inputs {
        let now = crate::manifest::sha256_file(path.as_ref()).map_err(CliError::io(path))?;
        if &now != digest {
            return Err(CliError::RerunMismatch(vec![format!("input {path}")]));
        }
    }
    let command = command_from_manifest(&original, a.out.clone())?;
    // A failing gradcheck still writes its outputs, which is what gets compared.
    match super::execute(command, &mut std::io::sink()) {
        Ok(()) | Err(CliError::GradcheckFailed { .. }) => {}
        Err(e) => return Err(e),
    }
    let bad = original.mismatches(&a.out);
    let repeat_path = a.out.join(MANIFEST_FILE);
    let repeat = RunManifest::read(&repeat_path).map_err(CliError::io(&repeat_path))?;
    let mut text = String::new();
    for name in original.outputs.keys() {
        let status = if bad.contains(name) { "DIFFERS" } else { "identical" };
        text.push_str(&format!("{name}: {status}\n"));
    }
    say(out, &text)?;
    if bad.is_empty() && repeat.outputs == original.outputs {
        Ok(())
    } else {
        let mut names = bad;
        names.extend(repeat.outputs.keys().filter(|k| !original.outputs.contains_key(*k)).cloned());
        Err(CliError::RerunMismatch(names))
    }
}
