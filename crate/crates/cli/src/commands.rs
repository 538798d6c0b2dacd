//! One experiment cell per command: builds the inputs, calls the library
//! and returns its tables. Infeasible designs become table rows.

use std::path::Path;

use iscpt::beampattern::{
    desired_pattern, iscpt_pattern_design, prominent_peaks, sensing_only_design, uniform_grid, write_pattern_csv,
    PEAK_MIN_HEIGHT, PEAK_MIN_PROMINENCE,
};
use iscpt::metrics::{beampattern, evaluate, harvested_energy, sensing_crb, SensingMetric};
use iscpt::multiuser::{sweep_sinr, write_sweep_csv, MultiuserOptions};
use iscpt::pareto::{trace_boundary, vertex_communication, vertex_power, vertex_sensing, write_boundary_csv, ParetoOptions};
use iscpt::scenario::derive_seed;
use iscpt::signal_chain::{fmcw_range, harvest_dc, qpsk_evm, qpsk_ser_theory};
use iscpt::wpt_isac::{joint_allocate, write_allocation_csv, WptIsacBuilder};
use iscpt::Error;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};
use crate::error::CliError;
use crate::table::Table;

pub struct CellOutput {
    pub tables: Vec<Table>,
    /// Solver reports and other per-cell diagnostics for the manifest.
    pub reports: Value,
}

pub fn run_cell(cfg: &ExperimentConfig, base_dir: &Path, seed: u64) -> Result<CellOutput, CliError> {
    match cfg.command {
        Command::Pareto => pareto(cfg, base_dir, seed),
        Command::Multiuser => multiuser(cfg, base_dir, seed),
        Command::Beampattern => beampattern_cell(cfg, base_dir, seed),
        Command::WptIsac => wpt_isac(cfg, seed),
        Command::SignalChain => signal_chain(cfg, seed),
    }
}

fn pareto(cfg: &ExperimentConfig, base_dir: &Path, seed: u64) -> Result<CellOutput, CliError> {
    let p = cfg.pareto.as_ref().expect("validated");
    let s = cfg.scenario(base_dir, seed)?;
    let metric = SensingMetric::from(p.metric);
    let er = s
        .ers
        .get(p.er_index)
        .ok_or_else(|| CliError::config("pareto.er_index", "no such energy receiver"))?;
    if p.ir_index >= s.irs.len() {
        return Err(CliError::config("pareto.ir_index", "no such information receiver"));
    }
    let (crb_unit, energy_unit) = if p.relative {
        (
            sensing_crb(&s, &vertex_sensing(&s), metric)?,
            harvested_energy(er, vertex_power(&s, p.er_index)?.matrix())?,
        )
    } else {
        (1.0, 1.0)
    };
    let crb_grid: Vec<f64> = p.crb_grid.iter().map(|g| g * crb_unit).collect();
    let energy_grid: Vec<f64> = p.energy_grid.iter().map(|e| e * energy_unit).collect();
    let options = ParetoOptions {
        metric,
        ir_index: p.ir_index,
        er_index: p.er_index,
        solver: cfg.solver.options(seed),
        parallel: true,
    };
    let cells = trace_boundary(&s, &crb_grid, &energy_grid, &options)?;
    let boundary = Table::capture("pareto", |w| write_boundary_csv(&cells, w))?;

    let mut vertices = Table::new("vertices", &["vertex", "crb", "rate", "energy"]);
    let designs = [
        ("sensing", vertex_sensing(&s)),
        ("communication", vertex_communication(&s, p.ir_index)?),
        ("power", vertex_power(&s, p.er_index)?),
    ];
    for (name, cov) in designs {
        let m = evaluate(&s, &cov, metric, p.ir_index)?;
        vertices.push(vec![
            name.into(),
            num(m.sensing_crb),
            num(m.rate),
            num(m.energy[p.er_index]),
        ]);
    }
    let reports = cells
        .iter()
        .map(|c| match &c.point {
            Some(pt) => json!({
                "crb_bound": c.crb_bound,
                "energy_bound": c.energy_bound,
                "feasible": true,
                "converged": pt.report.converged,
                "certified": pt.certified,
                "kkt_residual": pt.report.kkt_residual,
                "iterations": pt.report.iterations,
            }),
            None => json!({"crb_bound": c.crb_bound, "energy_bound": c.energy_bound, "feasible": false}),
        })
        .collect();
    Ok(CellOutput {
        tables: vec![boundary, vertices],
        reports: Value::Array(reports),
    })
}

fn multiuser(cfg: &ExperimentConfig, base_dir: &Path, seed: u64) -> Result<CellOutput, CliError> {
    let m = cfg.multiuser.as_ref().expect("validated");
    let s = cfg.scenario(base_dir, seed)?;
    let options = MultiuserOptions {
        metric: m.metric.into(),
        cancel_energy_interference: m.cancel_energy_interference,
        solver: cfg.solver.options(seed),
        rounding: m.rounding.into(),
        ..Default::default()
    };
    let gammas: Vec<f64> = m.gamma_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let energy = vec![m.energy; s.ers.len()];
    let mut rows = Vec::new();
    for &mode in &m.modes {
        rows.extend(sweep_sinr(&s, &gammas, &energy, mode.into(), &options)?);
    }
    let table = Table::capture("multiuser", |w| write_sweep_csv(&rows, w))?;
    let feasible = rows.iter().filter(|r| r.feasible).count();
    Ok(CellOutput {
        tables: vec![table],
        reports: json!({"rows": rows.len(), "feasible_rows": feasible}),
    })
}

fn beampattern_cell(cfg: &ExperimentConfig, base_dir: &Path, seed: u64) -> Result<CellOutput, CliError> {
    let b = cfg.beampattern.as_ref().expect("validated");
    let s = cfg.scenario(base_dir, seed)?;
    let grid = uniform_grid(b.grid_step_deg);
    let pattern = desired_pattern(&b.targets_deg, &grid, b.width_deg)?;
    let options = MultiuserOptions {
        solver: cfg.solver.options(seed),
        ..Default::default()
    };
    let sensing = sensing_only_design(&pattern, &s.tx_geometry, s.power_budget, &options.solver)?;
    let sensing_pattern = beampattern(&sensing.covariance, &s.tx_geometry, &grid);
    let gamma = vec![b.sinr; s.irs.len()];
    let energy = vec![b.energy; s.ers.len()];
    let joint = match iscpt_pattern_design(&s, &pattern, &gamma, &energy, &options) {
        Ok(d) => Some(d),
        Err(Error::Infeasible { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let joint_pattern = joint
        .as_ref()
        .map(|d| beampattern(&d.beams.total_cov, &s.tx_geometry, &grid));
    let placeholder = joint_pattern.as_ref().unwrap_or(&sensing_pattern);
    let mut table = Table::capture("beampattern", |w| {
        write_pattern_csv(&grid, &pattern.desired, &sensing_pattern, placeholder, b.db, w)
    })?;
    if joint_pattern.is_none() {
        for row in &mut table.rows {
            row[3] = "nan".into();
        }
    }

    let mut summary = Table::new("beampattern_summary", &["design", "feasible", "matching_error", "peaks", "peak_angles"]);
    let peaks_row = |name: &str, error: f64, values: &[f64]| {
        let peaks = prominent_peaks(&grid, values, PEAK_MIN_HEIGHT, PEAK_MIN_PROMINENCE);
        let angles: Vec<String> = peaks.iter().map(|p| p.to_string()).collect();
        vec![name.into(), "1".into(), num(error), peaks.len().to_string(), angles.join(";")]
    };
    summary.push(peaks_row("sensing_only", sensing.error, &sensing_pattern));
    match (&joint, &joint_pattern) {
        (Some(d), Some(p)) => summary.push(peaks_row("iscpt", d.objective, p)),
        _ => summary.push(vec!["iscpt".into(), "0".into(), "nan".into(), "0".into(), String::new()]),
    }
    let reports = json!({
        "sensing_only": {"converged": sensing.report.converged, "kkt_residual": sensing.report.kkt_residual},
        "iscpt": joint.as_ref().map(|d| json!({"converged": d.report.converged, "kkt_residual": d.report.kkt_residual})),
    });
    Ok(CellOutput {
        tables: vec![table, summary],
        reports,
    })
}

fn wpt_isac(cfg: &ExperimentConfig, seed: u64) -> Result<CellOutput, CliError> {
    let w = cfg.wpt_isac.as_ref().expect("validated");
    let mut b = WptIsacBuilder::new(w.beacon_antennas, w.device_antennas.clone());
    macro_rules! copy {
        ($($f:ident),*) => { $( if let Some(v) = w.$f { b.$f = v; } )* };
    }
    copy!(n_rx_sense, sinr_req, comm_noise, sensing_noise, harvest_gain, comm_gain, eh_efficiency, snapshots);
    let solver = cfg.solver.options(seed);
    let mut table = Table::new("wpt_isac", &["beacon_power", "tau", "device", "p_d", "beta", "mse", "sinr"]);
    let mut reports = Vec::new();
    for &power in &w.beacon_power {
        b.beacon_power = power;
        let scenario = b.build(seed);
        match joint_allocate(&scenario, &solver) {
            Ok(alloc) => {
                reports.push(json!({"beacon_power": power, "feasible": true, "tau": alloc.tau, "max_mse": alloc.max_mse, "evaluations": alloc.evaluations}));
                let part = Table::capture("wpt_isac", |out| write_allocation_csv(&[(power, alloc)], out))?;
                table.rows.extend(part.rows);
            }
            Err(Error::Infeasible { constraint, .. }) => {
                reports.push(json!({"beacon_power": power, "feasible": false, "constraint": constraint}));
                for d in 0..scenario.devices.len() {
                    let mut row = vec![power.to_string(), "nan".into(), d.to_string()];
                    row.extend(std::iter::repeat_n("nan".to_string(), 4));
                    table.push(row);
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(CellOutput {
        tables: vec![table],
        reports: Value::Array(reports),
    })
}

fn signal_chain(cfg: &ExperimentConfig, seed: u64) -> Result<CellOutput, CliError> {
    let sc = cfg.signal_chain.as_ref().expect("validated");
    let mut tables = Vec::new();
    if !sc.ranges_m.is_empty() {
        let mut t = Table::new("fmcw", &["true_range", "estimated_range", "error", "peak_bin"]);
        for (i, &r) in sc.ranges_m.iter().enumerate() {
            let est = fmcw_range(&sc.chirp, r, sc.fmcw_snr_db, derive_seed(seed, 31, i as u64))
                .map_err(|e| CliError::config(&format!("signal_chain.ranges_m[{i}]"), e))?;
            t.push(vec![num(r), num(est.range), num(est.range - r), est.peak_bin.to_string()]);
        }
        tables.push(t);
    }
    if !sc.qpsk_snr_db.is_empty() {
        let mut t = Table::new(
            "qpsk",
            &["snr_db", "evm_percent", "evm_theory_percent", "ser", "ser_theory", "symbol_errors"],
        );
        for (i, &snr) in sc.qpsk_snr_db.iter().enumerate() {
            let stats = qpsk_evm(snr, sc.qpsk_symbols, derive_seed(seed, 32, i as u64));
            t.push(vec![
                num(snr),
                num(stats.evm_percent),
                num(100.0 / 10f64.powf(snr / 20.0)),
                num(stats.ser),
                num(qpsk_ser_theory(snr)),
                stats.symbol_errors.to_string(),
            ]);
        }
        tables.push(t);
    }
    let mut reports = json!({});
    if sc.harvest_duration_s > 0.0 {
        let steps = (sc.harvest_duration_s / sc.harvester.timestep).round() as usize;
        let trace = harvest_dc(&sc.harvester, &vec![sc.harvest_input_dbm; steps.max(1)])?;
        reports = json!({
            "harvest_input_dbm": sc.harvest_input_dbm,
            "final_voltage": trace.voltage.last(),
            "load_energy_j": trace.load_energy(sc.harvester.timestep),
            "dc_energy_j": trace.dc_energy(sc.harvester.timestep),
        });
        tables.push(Table::capture("harvester", |w| trace.write_csv(w))?);
    }
    if tables.is_empty() {
        return Err(CliError::config("signal_chain", "nothing to run: set ranges_m, qpsk_snr_db or harvest_duration_s"));
    }
    Ok(CellOutput { tables, reports })
}

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
