use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::pipeline::{PipelineError, RunArtifacts};
use crate::assembly::render_markdown;

/// What [`emit_report`] wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    /// Contents of `summary.json`.
    pub json: Value,
    /// Human-readable summary for the console, wall time included.
    pub text: String,
    pub files: Vec<PathBuf>,
}

/// Lowercase ASCII letters and digits joined by single hyphens.
pub fn dataset_slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "dataset".into()
    } else {
        out
    }
}

fn write(path: &Path, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)?;
    files.push(path.to_path_buf());
    Ok(())
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("artifacts serialize");
    bytes.push(b'\n');
    bytes
}

/// Summary document: per-dataset scores, counts, token totals and cost.
/// Everything here is a function of the run's inputs, so repeated runs
/// produce the same bytes; wall time lives in `timing.json`.
pub fn summary_json(run: &RunArtifacts) -> Value {
    let datasets: Vec<Value> = run
        .datasets
        .iter()
        .map(|o| {
            json!({
                "dataset": o.dataset,
                "coverage": o.report.coverage,
                "latest": o.report.latest,
                "structure": o.report.structure,
                "multiaspect": o.report.multiaspect,
                "p_used": o.report.p_used,
                "p_total": o.report.p_total,
                "p_new": o.report.p_new,
                "rows": o.board.rows.len(),
                "columns": o.board.columns.iter().map(|c| &c.canonical_name).collect::<Vec<_>>(),
                "primary_metric": o.board.primary_metric,
                "best_candidate": o.best_index,
            })
        })
        .collect();
    json!({
        "topic": run.topic,
        "cutoff_date": run.cutoff_date,
        "counts": run.counts,
        "census": run.census,
        "datasets": datasets,
        "multiaspect": run.multiaspect,
        "usage": run.usage,
        "estimated_cost": run.cost.display_3dp(),
        "skipped": run.skipped,
    })
}

fn summary_markdown(run: &RunArtifacts) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Leaderboards: {}\n", run.topic);
    let _ = writeln!(s, "Papers published on or after {}.\n", run.cutoff_date);
    let _ = writeln!(s, "| Dataset | Rows | Coverage | Latest | Structure | Multi-aspect |");
    let _ = writeln!(s, "| --- | --- | --- | --- | --- | --- |");
    for o in &run.datasets {
        let r = &o.report;
        let _ = writeln!(
            s,
            "| {} | {} | {:.3} | {:.3} | {} | {:.3} |",
            o.dataset,
            o.board.rows.len(),
            r.coverage.to_f64(),
            r.latest.to_f64(),
            r.structure,
            r.multiaspect.to_f64()
        );
    }
    let _ = writeln!(s, "\nOverall multi-aspect score: {:.3}\n", run.multiaspect.to_f64());
    let c = &run.counts;
    let _ = writeln!(
        s,
        "Papers: {} retrieved, {} relevant, {} recent, {} parsed, {} digests.\n",
        c.retrieved, c.relevant, c.recent, c.parsed, c.digests
    );
    let u = &run.usage.total;
    let _ = writeln!(
        s,
        "Tokens: {} in, {} out over {} requests. Estimated cost: {}.",
        u.input_tokens,
        u.output_tokens,
        u.requests,
        run.cost.display_3dp()
    );
    if !run.skipped.is_empty() {
        let _ = writeln!(s, "\nSkipped {} item(s); see summary.json.", run.skipped.len());
    }
    for o in &run.datasets {
        let _ = writeln!(s, "\n## {}\n\n{}", o.dataset, render_markdown(&o.board).trim_end());
        for f in &o.board.flags {
            let _ = writeln!(s, "\nNote: {f}");
        }
    }
    s
}

/// Writes every artifact under `out_dir`:
/// `<dataset>/board.md`, `board.json`, `report.json`, `candidates.json`,
/// then `summary.json`, `summary.md` and `timing.json`.
pub fn emit_report(run: &RunArtifacts, out_dir: &Path) -> Result<ReportSummary, PipelineError> {
    let mut files = Vec::new();
    let mut used = BTreeSet::new();
    for o in &run.datasets {
        let base = dataset_slug(&o.dataset);
        let mut slug = base.clone();
        let mut n = 2;
        while !used.insert(slug.clone()) {
            slug = format!("{base}-{n}");
            n += 1;
        }
        let dir = out_dir.join(&slug);
        write(&dir.join("board.md"), render_markdown(&o.board).as_bytes(), &mut files)?;
        write(&dir.join("board.json"), &pretty(&o.board), &mut files)?;
        write(&dir.join("report.json"), &pretty(&o.report), &mut files)?;
        let candidates = json!({
            "iters": o.candidates.iters,
            "best_index": o.best_index,
            "candidates": o.candidates.candidates,
            "iterations": o.iterations,
            "conflicts": o.conflicts,
        });
        write(&dir.join("candidates.json"), &pretty(&candidates), &mut files)?;
        for r in &o.digests {
            let name = format!("{}.json", r.paper_id.replace('/', "_"));
            write(
                &dir.join("digests").join(name),
                &pretty(&r.digest.to_schema_json()),
                &mut files,
            )?;
        }
    }
    let json = summary_json(run);
    write(&out_dir.join("summary.json"), &pretty(&json), &mut files)?;
    write(
        &out_dir.join("summary.md"),
        summary_markdown(run).as_bytes(),
        &mut files,
    )?;
    write(&out_dir.join("timing.json"), &pretty(&run.timing), &mut files)?;

    let mut text = String::new();
    for o in &run.datasets {
        let r = &o.report;
        let _ = writeln!(
            text,
            "{}: {} rows, coverage {:.3}, latest {:.3}, structure {}, multi-aspect {:.3}",
            o.dataset,
            o.board.rows.len(),
            r.coverage.to_f64(),
            r.latest.to_f64(),
            r.structure,
            r.multiaspect.to_f64()
        );
    }
    let u = &run.usage.total;
    let _ = writeln!(
        text,
        "multi-aspect over {} dataset(s): {:.3}",
        run.datasets.len(),
        run.multiaspect.to_f64()
    );
    let _ = writeln!(
        text,
        "wall time {:.2}s ({} provider calls); tokens {} in / {} out; estimated cost {}",
        run.timing.total_seconds,
        run.timing.provider_calls,
        u.input_tokens,
        u.output_tokens,
        run.cost.display_3dp()
    );
    let _ = writeln!(text, "artifacts in {}", out_dir.display());
    Ok(ReportSummary { json, text, files })
}
