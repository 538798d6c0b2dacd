//! Figure-ready CSV emitters over a results directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::CliError;
use crate::runner::MANIFEST;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Rate over the (CRB bound, energy bound) grid, from `pareto`.
    Fig2,
    /// CRB against the SINR target per receiver mode, from `multiuser`.
    Fig3,
    /// Desired, sensing-only and joint beampatterns, from `beampattern`.
    Fig4,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    fn source(self) -> (&'static str, &'static str) {
        match self {
            Figure::Fig2 => ("pareto", "pareto"),
            Figure::Fig3 => ("multiuser", "multiuser"),
            Figure::Fig4 => ("beampattern", "beampattern"),
        }
    }
}

pub fn plot(figure: Figure, input: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let manifest_path = input.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let (command, table_name) = figure.source();
    let found = manifest["command"].as_str().unwrap_or("");
    if found != command {
        return Err(CliError::Config(format!(
            "{} needs results of `{command}`, but {} holds `{found}`",
            figure.name(),
            input.display()
        )));
    }
    let file = manifest["tables"]
        .as_array()
        .and_then(|ts| ts.iter().find(|t| t["name"] == table_name))
        .and_then(|t| t["file"].as_str())
        .ok_or_else(|| CliError::Config(format!("manifest lists no `{table_name}` table")))?;
    let table = Table::read(table_name, &input.join(file))?;
    let result = match figure {
        Figure::Fig2 => fig2(&table)?,
        Figure::Fig3 => fig3(&table)?,
        Figure::Fig4 => fig4(&table)?,
    };
    let out_dir = out.unwrap_or(input);
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", figure.name()));
    result.write(&path)?;
    Ok(path)
}

fn columns(table: &Table, names: &[&str]) -> Result<Vec<usize>, CliError> {
    names
        .iter()
        .map(|n| {
            table
                .column(n)
                .ok_or_else(|| CliError::Runtime(format!("table `{}` lacks column `{n}`", table.name)))
        })
        .collect()
}

/// Leading sweep columns, if the table is in long format.
fn prefix_len(table: &Table, first_data_column: &str) -> usize {
    table.column(first_data_column).unwrap_or(0)
}

fn fig2(t: &Table) -> Result<Table, CliError> {
    let cols = columns(t, &["gamma", "e_min", "feasible", "rate", "crb_achieved", "energy_achieved"])?;
    let prefix = prefix_len(t, "gamma");
    let mut header: Vec<&str> = t.header[..prefix].iter().map(String::as_str).collect();
    header.extend(["crb_bound", "energy_bound", "feasible", "rate", "crb", "energy"]);
    let mut out = Table::new("fig2", &header);
    for row in &t.rows {
        let mut r = row[..prefix].to_vec();
        r.extend(cols.iter().map(|&c| row[c].clone()));
        out.push(r);
    }
    Ok(out)
}

/// Mean, min and max CRB over cells for every (axes, mode, SINR) group;
/// infeasible cells count towards `cells` only.
fn fig3(t: &Table) -> Result<Table, CliError> {
    let cols = columns(t, &["mode", "gamma", "feasible", "crb"])?;
    let prefix = prefix_len(t, "mode");
    let keep: Vec<usize> = (0..prefix)
        .filter(|&i| !matches!(t.header[i].as_str(), "cell" | "cell_seed" | "replicate"))
        .collect();
    let mut header: Vec<&str> = keep.iter().map(|&i| t.header[i].as_str()).collect();
    header.extend(["mode", "gamma_db", "cells", "feasible_cells", "crb_mean", "crb_min", "crb_max"]);

    let mut groups: Vec<(Vec<String>, Vec<Option<f64>>)> = Vec::new();
    let mut index: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for row in &t.rows {
        let gamma: f64 = parse(&row[cols[1]])?;
        let mut key: Vec<String> = keep.iter().map(|&i| row[i].clone()).collect();
        key.push(row[cols[0]].clone());
        key.push(fmt_db(10.0 * gamma.log10()));
        let crb = if row[cols[2]] == "1" { Some(parse(&row[cols[3]])?) } else { None };
        let i = *index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(crb);
    }
    let mut out = Table::new("fig3", &header);
    for (key, crbs) in groups {
        let feasible: Vec<f64> = crbs.iter().flatten().copied().collect();
        let (mean, min, max) = if feasible.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                feasible.iter().sum::<f64>() / feasible.len() as f64,
                feasible.iter().copied().fold(f64::INFINITY, f64::min),
                feasible.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let mut r = key;
        r.push(crbs.len().to_string());
        r.push(feasible.len().to_string());
        r.extend([mean, min, max].map(fmt_num));
        out.push(r);
    }
    Ok(out)
}

fn fig4(t: &Table) -> Result<Table, CliError> {
    let cols = columns(t, &["theta", "desired", "sensing_only_pattern", "iscpt_pattern"])?;
    let mut out = Table::new("fig4", &["theta", "desired", "sensing_only_pattern", "iscpt_pattern"]);
    for row in &t.rows {
        out.push(cols.iter().map(|&c| row[c].clone()).collect());
    }
    Ok(out)
}

fn parse(s: &str) -> Result<f64, CliError> {
    s.parse().map_err(|_| CliError::Runtime(format!("not a number: `{s}`")))
}

fn fmt_db(x: f64) -> String {
    // 10 log10(10^(d/10)) is only d up to rounding
    format!("{}", (x * 1e9).round() / 1e9 + 0.0)
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.10e}")
    }
}
