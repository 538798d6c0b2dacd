//! `run` and `sweep`: expand the config into cells, execute them on a
//! thread pool and write CSV tables plus `manifest.json`.
//!
//! A run is a sweep with a single cell and no axes, so both share the
//! same seeding: cell `i` uses `derive_seed(seed, CELL_TAG, i)`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use iscpt::scenario::derive_seed;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::commands::{run_cell, CellOutput};
use crate::config::{ConfigDocument, ExperimentConfig, Overrides};
use crate::error::CliError;
use crate::table::{Table, SCHEMA_VERSION};

pub const CELL_TAG: u64 = 0x5ce11;
pub const OUT_DIR_ENV: &str = "ISCPT_OUT_DIR";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub struct Cell {
    pub index: usize,
    pub seed: u64,
    pub replicate: usize,
    pub axes: Vec<(String, toml::Value)>,
    pub config: ExperimentConfig,
}

pub struct Summary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub cells: usize,
}

/// `--out`, then `output_dir` from the config, then `$ISCPT_OUT_DIR`,
/// then `results`.
pub fn output_dir(flag: Option<&Path>, cfg: &ExperimentConfig, base_dir: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return base_dir.join(p);
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("results"),
    }
}

/// Expands the axis cross product, first axis outermost and replicates
/// innermost. Every cell config is parsed and validated before anything
/// runs.
pub fn expand(doc: &ConfigDocument, mode: Mode) -> Result<(ExperimentConfig, Vec<Cell>), CliError> {
    let base = doc.parse()?;
    let mut stripped = doc.clone();
    stripped.value.remove("sweep");
    let (axes, replicates) = match (mode, &base.sweep) {
        (Mode::Run, _) => (Vec::new(), 1),
        (Mode::Sweep, Some(s)) => (s.axes.clone(), s.replicates),
        (Mode::Sweep, None) => return Err(CliError::config("sweep", "missing: a sweep needs a [sweep] table")),
    };
    if replicates == 0 {
        return Err(CliError::config("sweep.replicates", "must be at least 1"));
    }
    for (i, axis) in axes.iter().enumerate() {
        if axis.values.is_empty() {
            return Err(CliError::config(&format!("sweep.axes[{i}].values"), "empty"));
        }
        if axis.name.starts_with("sweep") || axis.name == "command" {
            return Err(CliError::config(&format!("sweep.axes[{i}].name"), format!("`{}` cannot be swept", axis.name)));
        }
    }
    let combos: usize = axes.iter().map(|a| a.values.len()).product();
    let mut cells = Vec::with_capacity(combos * replicates);
    for combo in 0..combos {
        let mut rem = combo;
        let mut picks = vec![0; axes.len()];
        for (d, axis) in axes.iter().enumerate().rev() {
            picks[d] = rem % axis.values.len();
            rem /= axis.values.len();
        }
        let mut cell_doc = stripped.clone();
        let mut chosen = Vec::new();
        for (axis, &k) in axes.iter().zip(&picks) {
            cell_doc = cell_doc.with(&axis.name, axis.values[k].clone())?;
            chosen.push((axis.name.clone(), axis.values[k].clone()));
        }
        let config = cell_doc.parse().map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("sweep cell {}: {m}", cells.len())),
            other => other,
        })?;
        for replicate in 0..replicates {
            let index = cells.len();
            cells.push(Cell {
                index,
                seed: derive_seed(base.seed, CELL_TAG, index as u64),
                replicate,
                axes: chosen.clone(),
                config: config.clone(),
            });
        }
    }
    Ok((base, cells))
}

pub fn execute(args: &RunArgs, mode: Mode) -> Result<Summary, CliError> {
    let start = Instant::now();
    let mut doc = ConfigDocument::load(&args.config)?;
    doc.apply(&args.overrides);
    let (base, cells) = expand(&doc, mode)?;
    let out_dir = output_dir(args.out.as_deref(), &base, &doc.base_dir);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let results: Vec<(CellOutput, f64)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let t = Instant::now();
                run_cell(&cell.config, &doc.base_dir, cell.seed).map(|out| (out, t.elapsed().as_secs_f64()))
            })
            .collect::<Result<_, _>>()
    })?;

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let tables = match mode {
        Mode::Run => results[0].0.tables.clone(),
        Mode::Sweep => long_format(&cells, &results),
    };
    let mut files = Vec::new();
    let mut table_meta = Vec::new();
    for t in &tables {
        let file = match mode {
            Mode::Run => format!("{}.csv", t.name),
            Mode::Sweep => format!("sweep_{}.csv", t.name),
        };
        let path = out_dir.join(&file);
        t.write(&path)?;
        files.push(path);
        table_meta.push(json!({
            "name": t.name,
            "file": file,
            "schema_version": SCHEMA_VERSION,
            "columns": t.header,
            "rows": t.rows.len(),
        }));
    }

    let cell_meta: Vec<Value> = cells
        .iter()
        .zip(&results)
        .map(|(cell, (out, secs))| {
            json!({
                "index": cell.index,
                "seed": cell.seed,
                "replicate": cell.replicate,
                "axes": cell.axes.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect::<serde_json::Map<_, _>>(),
                "wall_clock_s": secs,
                "reports": out.reports,
            })
        })
        .collect();
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": base.command.name(),
        "mode": mode.name(),
        "seed": base.seed,
        "threads": threads,
        "config_hash": doc.hash(),
        "config": toml_to_json(&toml::Value::Table(doc.value.clone())),
        "tables": table_meta,
        "cells": cell_meta,
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    let path = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    files.push(path);
    Ok(Summary {
        out_dir,
        files,
        cells: cells.len(),
    })
}

/// Concatenates each table across cells with `cell,cell_seed,replicate`
/// and one column per axis in front.
fn long_format(cells: &[Cell], results: &[(CellOutput, f64)]) -> Vec<Table> {
    let axis_names: Vec<&str> = cells[0].axes.iter().map(|(k, _)| k.as_str()).collect();
    let mut out: Vec<Table> = Vec::new();
    for (cell, (res, _)) in cells.iter().zip(results) {
        for t in &res.tables {
            let idx = match out.iter().position(|o| o.name == t.name) {
                Some(i) => i,
                None => {
                    let mut header = vec!["cell".to_string(), "cell_seed".into(), "replicate".into()];
                    header.extend(axis_names.iter().map(|s| s.to_string()));
                    header.extend(t.header.iter().cloned());
                    out.push(Table {
                        name: t.name.clone(),
                        header,
                        rows: Vec::new(),
                    });
                    out.len() - 1
                }
            };
            let mut prefix = vec![cell.index.to_string(), cell.seed.to_string(), cell.replicate.to_string()];
            prefix.extend(cell.axes.iter().map(|(_, v)| render(v)));
            for row in &t.rows {
                let mut r = prefix.clone();
                r.extend(row.iter().cloned());
                out[idx].rows.push(r);
            }
        }
    }
    out
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn toml_to_json(v: &toml::Value) -> Value {
    match v {
        toml::Value::String(s) => json!(s),
        toml::Value::Integer(i) => json!(i),
        toml::Value::Float(f) => json!(f),
        toml::Value::Boolean(b) => json!(b),
        toml::Value::Datetime(d) => json!(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect()),
    }
}
