//! Vertex designs and the sensing / rate / energy boundary tracer.
//!
//! The boundary is sampled by constraint sweeping: every `(Γ, E)` cell
//! maximizes the rate subject to `CRB ≤ Γ`, `energy ≥ E` and the power
//! budget. Cells that admit no design are kept and marked infeasible.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{energy_of_total, rate_of_total, sensing_of_total};
use crate::linalg::{c, CMat, HermitianEigen};
use crate::metrics::{evaluate, SensingMetric, TransmitCovariance};
use crate::scenario::Scenario;
use crate::solver::{
    dominant_eigenpair, maximize_covariance, water_filling, ConstraintSpec, SolveOptions, SolveReport,
};

/// Isotropic transmission `(P/N) I`.
pub fn vertex_sensing(scenario: &Scenario) -> TransmitCovariance {
    TransmitCovariance::isotropic(scenario.n_tx(), scenario.power_budget)
}

/// Eigenmode transmission over `HᴴH` with water-filled powers.
pub fn vertex_communication(scenario: &Scenario, ir_index: usize) -> Result<TransmitCovariance> {
    let ir = scenario
        .irs
        .get(ir_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no information receiver {ir_index}")))?;
    let gram = ir.channel.adjoint() * &ir.channel;
    let eig = HermitianEigen::new(&gram);
    let gains: Vec<f64> = eig.values.iter().map(|&g| g.max(0.0)).collect();
    let powers = water_filling(&gains, scenario.power_budget, ir.noise_power);
    let n = scenario.n_tx();
    let mut s = CMat::zeros(n, n);
    for (j, &p) in powers.iter().enumerate() {
        if p > 0.0 {
            let v = eig.vector(j);
            s += (&v * v.adjoint()) * c(p, 0.0);
        }
    }
    Ok(TransmitCovariance::new_unchecked(s))
}

/// Strongest-eigenmode transmission `P v vᴴ` towards energy receiver `er_index`.
pub fn vertex_power(scenario: &Scenario, er_index: usize) -> Result<TransmitCovariance> {
    let er = scenario
        .ers
        .get(er_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no energy receiver {er_index}")))?;
    let (_, v) = dominant_eigenpair(&(er.channel.adjoint() * &er.channel));
    Ok(TransmitCovariance::new_unchecked(
        (&v * v.adjoint()) * c(scenario.power_budget, 0.0),
    ))
}

#[derive(Debug, Clone)]
pub struct ParetoOptions {
    pub metric: SensingMetric,
    pub ir_index: usize,
    pub er_index: usize,
    pub solver: SolveOptions,
    pub parallel: bool,
}

impl Default for ParetoOptions {
    fn default() -> Self {
        Self {
            metric: SensingMetric::Trm,
            ir_index: 0,
            er_index: 0,
            solver: SolveOptions::default(),
            parallel: true,
        }
    }
}

/// One sample of the boundary with the design achieving it.
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub crb: f64,
    pub rate: f64,
    pub energy: f64,
    pub design: TransmitCovariance,
    /// `(Γ, E_min)` of the cell that produced this point.
    pub constraints_used: (f64, f64),
    pub report: SolveReport,
    /// False when the sensing constraint is nonconvex (point target), where
    /// only a best-of-starts local optimum is claimed.
    pub certified: bool,
}

/// A grid cell; `point` is `None` when the constraints are infeasible.
#[derive(Debug, Clone)]
pub struct BoundaryCell {
    pub crb_bound: f64,
    pub energy_bound: f64,
    pub point: Option<ParetoPoint>,
}

impl BoundaryCell {
    pub fn feasible(&self) -> bool {
        self.point.is_some()
    }

    /// Achieved rate, `-∞` for infeasible cells.
    pub fn rate(&self) -> f64 {
        self.point.as_ref().map_or(f64::NEG_INFINITY, |p| p.rate)
    }
}

/// Maximizes the rate under `CRB ≤ crb_bound`, `energy ≥ energy_bound`.
pub fn solve_cell(scenario: &Scenario, crb_bound: f64, energy_bound: f64, options: &ParetoOptions) -> Result<BoundaryCell> {
    let ir = scenario
        .irs
        .get(options.ir_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no information receiver {}", options.ir_index)))?;
    let er = scenario
        .ers
        .get(options.er_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no energy receiver {}", options.er_index)))?;
    let objective = rate_of_total(ir.channel.clone(), ir.noise_power);
    let mut constraints = Vec::new();
    if crb_bound.is_finite() {
        constraints.push(ConstraintSpec {
            name: "sensing_crb".into(),
            functional: sensing_of_total(scenario, options.metric)?,
            bound: crb_bound,
            direction: crate::solver::Direction::AtMost,
            tolerance: 1e-6,
        });
    }
    if energy_bound > 0.0 {
        constraints.push(ConstraintSpec::at_least("energy", energy_of_total(er, 1), energy_bound));
    }
    let mut solver = options.solver.clone();
    if options.metric == SensingMetric::PointTarget {
        solver.starts = solver.starts.max(8);
    }
    match maximize_covariance(&objective, &constraints, scenario.n_tx(), scenario.power_budget, &solver) {
        Ok((design, report)) => {
            let metrics = evaluate(scenario, &design, options.metric, options.ir_index)?;
            Ok(BoundaryCell {
                crb_bound,
                energy_bound,
                point: Some(ParetoPoint {
                    crb: metrics.sensing_crb,
                    rate: metrics.rate,
                    energy: metrics.energy[options.er_index],
                    design,
                    constraints_used: (crb_bound, energy_bound),
                    certified: options.metric == SensingMetric::Trm && report.global_optimal,
                    report,
                }),
            })
        }
        Err(Error::Infeasible { .. }) => Ok(BoundaryCell {
            crb_bound,
            energy_bound,
            point: None,
        }),
        Err(e) => Err(e),
    }
}

/// Sweeps the `(Γ, E)` grid; cells are returned row-major with the CRB
/// bound as the outer index, independent of evaluation order.
pub fn trace_boundary(
    scenario: &Scenario,
    crb_grid: &[f64],
    energy_grid: &[f64],
    options: &ParetoOptions,
) -> Result<Vec<BoundaryCell>> {
    if crb_grid.is_empty() || energy_grid.is_empty() {
        return Err(Error::InvalidArgument("empty boundary grid".into()));
    }
    if scenario.irs.is_empty() || scenario.ers.is_empty() || scenario.targets.is_empty() {
        return Err(Error::InvalidArgument(
            "boundary tracing needs at least one IR, one ER and one target".into(),
        ));
    }
    let cells: Vec<(f64, f64)> = crb_grid
        .iter()
        .flat_map(|&g| energy_grid.iter().map(move |&e| (g, e)))
        .collect();
    let solve = |&(g, e): &(f64, f64)| solve_cell(scenario, g, e, options);
    if options.parallel {
        cells.par_iter().map(solve).collect()
    } else {
        cells.iter().map(solve).collect()
    }
}

/// CSV with columns `Γ,E_min,feasible,rate,crb_achieved,energy_achieved`.
/// Infeasible cells carry `feasible = 0` and `nan` metrics.
pub fn write_boundary_csv<W: Write>(cells: &[BoundaryCell], mut out: W) -> std::io::Result<()> {
    writeln!(out, "gamma,e_min,feasible,rate,crb_achieved,energy_achieved")?;
    for cell in cells {
        match &cell.point {
            Some(p) => writeln!(
                out,
                "{},{},1,{},{},{}",
                cell.crb_bound, cell.energy_bound, p.rate, p.crb, p.energy
            )?,
            None => writeln!(out, "{},{},0,nan,nan,nan", cell.crb_bound, cell.energy_bound)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_re;
    use crate::metrics::{crb_trm, harvested_energy, rate};
    use crate::scenario::{sample_channel, ChannelModel, ScenarioBuilder};

    #[test]
    fn sensing_vertex_uses_full_budget() {
        let mut b = ScenarioBuilder::new(4);
        b.power_budget = 2.0;
        b.snapshots = 10;
        let s = b.build(1);
        let v = vertex_sensing(&s);
        assert!((v.trace() - 2.0).abs() < 1e-15);
        assert!((crb_trm(&v, 1.0, 10, 4) - 3.2).abs() < 1e-12);
    }

    #[test]
    fn rank_one_channel_gets_single_mode() {
        let mut s = ScenarioBuilder::new(4).build(3);
        s.irs[0].channel = sample_channel(0, ChannelModel::LineOfSight { angle: 0.2 }, 2, 4);
        let v = vertex_communication(&s, 0).unwrap();
        let eig = HermitianEigen::new(&v);
        assert!(eig.values[..3].iter().all(|l| l.abs() < 1e-10));
        assert!((eig.max() - s.power_budget).abs() < 1e-10);
    }

    #[test]
    fn power_vertex_matches_singular_value() {
        let mut b = ScenarioBuilder::new(4);
        b.er_antennas = vec![3];
        let s = b.build(8);
        let v = vertex_power(&s, 0).unwrap();
        let er = &s.ers[0];
        let smax = er.channel.clone().singular_values().max();
        let e = harvested_energy(er, &v).unwrap();
        assert!((e - er.eh_efficiency * s.power_budget * smax * smax).abs() < 1e-10 * e);
        assert!((trace_re(&v) - s.power_budget).abs() < 1e-12);
    }

    #[test]
    fn communication_vertex_beats_isotropic() {
        let mut b = ScenarioBuilder::new(4);
        b.ir_antennas = vec![2];
        for seed in 0..20 {
            let s = b.build(seed);
            let ir = &s.irs[0];
            let wf = rate(&ir.channel, &vertex_communication(&s, 0).unwrap(), ir.noise_power).unwrap();
            let iso = rate(&ir.channel, &vertex_sensing(&s), ir.noise_power).unwrap();
            assert!(wf >= iso - 1e-12);
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let s = ScenarioBuilder::new(2).build(0);
        assert!(trace_boundary(&s, &[], &[0.0], &ParetoOptions::default()).is_err());
    }
}
