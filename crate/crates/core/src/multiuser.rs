//! CRB-minimizing multiuser beamforming with per-IR SINR and per-ER energy
//! constraints, for separated receivers and for co-located receivers that
//! power-split their input.
//!
//! The design is relaxed to `W_k ⪰ 0` (one block per IR) plus an energy
//! covariance `V ⪰ 0`, where every SINR constraint is linear. The relaxed
//! solution is factorized into beams `w_k = W_k h_k / √(h_kᴴ W_k h_k)`; the
//! remainder `W_k - w_k w_kᴴ` moves into `V`, which leaves the total
//! covariance and every received signal/interference power unchanged, so the
//! rounding is lossless. [`Rounding::Dc`] runs the DC rank-one iteration on
//! the relaxed blocks before the factorization instead.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{negated, sensing_of_total};
use crate::linalg::{c, hermitian_part, quad_form, trace_re, vec_norm, CMat, CVec};
use crate::metrics::{harvested_energy, sensing_crb, sinr_ir_with, SensingMetric};
use crate::scenario::Scenario;
use crate::solver::{
    dc_rank_one_round, find_feasible_point, maximize_psd, total, ConstraintSpec, DcStep, FeasibleSet, FnFunctional, Functional,
    LinearFunctional, PenaltySchedule, PsdProblem, SolveOptions, SolveReport,
};

/// Information beams, lumped energy covariance and (co-located) split ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub info_beams: Vec<CVec>,
    pub energy_cov: CMat,
    pub split_ratios: Option<Vec<f64>>,
    pub total_cov: CMat,
}

impl BeamformerSet {
    pub fn new(info_beams: Vec<CVec>, energy_cov: CMat, split_ratios: Option<Vec<f64>>) -> Self {
        let mut total_cov = energy_cov.clone();
        for w in &info_beams {
            total_cov += w * w.adjoint();
        }
        Self {
            info_beams,
            energy_cov,
            split_ratios,
            total_cov,
        }
    }

    /// `Σ ‖w_k‖² + tr V`.
    pub fn power(&self) -> f64 {
        self.info_beams.iter().map(|w| vec_norm(w).powi(2)).sum::<f64>() + trace_re(&self.energy_cov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverMode {
    Separated,
    CoLocated,
}

impl ReceiverMode {
    pub fn name(self) -> &'static str {
        match self {
            ReceiverMode::Separated => "separated",
            ReceiverMode::CoLocated => "colocated",
        }
    }
}

/// How relaxed information covariances become beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// Exact factorization of the relaxed blocks; the DC routine only
    /// certifies the resulting rank-one matrices.
    #[default]
    Exact,
    /// DC rank-one iteration on the relaxed blocks, then factorization.
    Dc,
}

#[derive(Debug, Clone)]
pub struct MultiuserOptions {
    pub metric: SensingMetric,
    /// Treat energy signals as known (cancelled) at the IRs.
    pub cancel_energy_interference: bool,
    pub solver: SolveOptions,
    pub dc: PenaltySchedule,
    pub rounding: Rounding,
    pub max_alternations: usize,
    /// Relative CRB improvement below which the co-located alternation stops.
    pub alternation_tol: f64,
    pub parallel: bool,
}

impl Default for MultiuserOptions {
    fn default() -> Self {
        Self {
            metric: SensingMetric::Trm,
            cancel_energy_interference: false,
            solver: SolveOptions::default(),
            dc: PenaltySchedule::default(),
            rounding: Rounding::default(),
            max_alternations: 30,
            alternation_tol: 1e-8,
            parallel: true,
        }
    }
}

/// Summary of the DC rank-one stage.
#[derive(Debug, Clone, Default)]
pub struct RankOneSummary {
    pub converged: bool,
    pub iterations: usize,
    pub rank_gap: f64,
    pub history: Vec<DcStep>,
}

#[derive(Debug, Clone)]
pub struct BeamDesign {
    pub beams: BeamformerSet,
    /// Design objective at the returned beams (CRB or matching error).
    pub objective: f64,
    pub report: SolveReport,
    pub rank_one: RankOneSummary,
    /// SINR and energy re-evaluated through the metrics module.
    pub sinr: Vec<f64>,
    pub energy: Vec<f64>,
    /// Objective after each co-located alternation (empty when separated).
    pub alternation_history: Vec<f64>,
}

/// Objective over the total covariance for [`design_beams`]; maximized.
pub(crate) struct BeamProblem<'a> {
    pub scenario: &'a Scenario,
    pub objective: &'a dyn Functional,
    pub sinr_targets: &'a [f64],
    pub energy_targets: &'a [f64],
    /// Power-splitting ratios; `None` for separated receivers.
    pub split: Option<&'a [f64]>,
    pub set: FeasibleSet,
    pub cancel_energy_interference: bool,
}

/// `Σ c_i / ℓ_i(X)` over positive linear functionals `ℓ_i`; infinite once
/// any `ℓ_i` leaves the positive half-line.
struct SplitBudget {
    terms: Vec<(f64, LinearFunctional)>,
}

impl Functional for SplitBudget {
    fn value(&self, x: &[CMat]) -> f64 {
        let mut v = 0.0;
        for (num, lin) in &self.terms {
            let d = lin.value(x);
            if d <= 0.0 {
                return f64::INFINITY;
            }
            v += num / d;
        }
        v
    }

    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        let mut v = 0.0;
        let mut grad: Vec<CMat> = x.iter().map(|b| CMat::zeros(b.nrows(), b.ncols())).collect();
        for (num, lin) in &self.terms {
            let (d, g) = lin.value_and_gradient(x);
            if d <= 0.0 {
                return (f64::INFINITY, grad);
            }
            v += num / d;
            let w = c(-num / (d * d), 0.0);
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi * w;
            }
        }
        (v, grad)
    }
}

impl BeamProblem<'_> {
    fn n_ir(&self) -> usize {
        self.scenario.irs.len()
    }

    /// `s_k - γ_k i_k` as a linear functional of the blocks.
    fn sinr_margin(&self, k: usize) -> Result<LinearFunctional> {
        let gamma = self.sinr_targets[k];
        let h = self.scenario.irs[k].miso_vector()?;
        let hh = &h * h.adjoint();
        let mut coeffs: Vec<Option<CMat>> = (0..self.n_ir())
            .map(|j| Some(if j == k { hh.clone() } else { &hh * c(-gamma, 0.0) }))
            .collect();
        coeffs.push(if self.cancel_energy_interference {
            None
        } else {
            Some(&hh * c(-gamma, 0.0))
        });
        Ok(LinearFunctional::new(coeffs))
    }

    fn harvest(&self, j: usize, share: f64) -> LinearFunctional {
        let g = crate::metrics::energy_gradient(&self.scenario.ers[j]) * c(share, 0.0);
        LinearFunctional::new((0..=self.n_ir()).map(|_| Some(g.clone())).collect())
    }

    fn constraints(&self) -> Result<Vec<ConstraintSpec>> {
        let mut out = Vec::new();
        for (k, ir) in self.scenario.irs.iter().enumerate() {
            let gamma = self.sinr_targets[k];
            if gamma <= 0.0 {
                continue;
            }
            let rho = self.split.map_or(1.0, |s| s[k]);
            out.push(ConstraintSpec::at_least(
                format!("sinr[{k}]"),
                self.sinr_margin(k)?,
                gamma * ir.noise_power / rho,
            ));
        }
        for j in 0..self.scenario.ers.len() {
            let e = self.energy_targets[j];
            if e <= 0.0 {
                continue;
            }
            let share = self.split.map_or(1.0, |s| 1.0 - s[j]);
            out.push(ConstraintSpec::at_least(format!("energy[{j}]"), self.harvest(j, share), e));
        }
        Ok(out)
    }

    /// Co-located constraints with the split ratio eliminated: some `ρ_k`
    /// serves receiver `k` iff `γσ²/(s_k - γ i_k) + e_k/E_k ≤ 1`, which is
    /// convex in the blocks.
    fn split_budget_constraints(&self) -> Result<Vec<ConstraintSpec>> {
        let mut out = Vec::new();
        for (k, ir) in self.scenario.irs.iter().enumerate() {
            let gamma = self.sinr_targets[k];
            let e = self.energy_targets[k];
            let mut terms = Vec::new();
            if gamma > 0.0 {
                terms.push((gamma * ir.noise_power, self.sinr_margin(k)?));
            }
            if e > 0.0 {
                terms.push((e, self.harvest(k, 1.0)));
            }
            if !terms.is_empty() {
                out.push(ConstraintSpec::at_most(format!("split[{k}]"), SplitBudget { terms }, 1.0));
            }
        }
        Ok(out)
    }

    fn solve_relaxed(&self, start: Option<&[CMat]>, options: &SolveOptions) -> Result<(Vec<CMat>, SolveReport)> {
        let constraints = self.constraints()?;
        let n = self.scenario.n_tx();
        let problem = PsdProblem {
            objective: self.objective,
            constraints: &constraints,
            block_sizes: vec![n; self.n_ir() + 1],
            set: self.set,
        };
        maximize_psd(&problem, start, options)
    }

    /// Rounds the relaxed blocks to beams plus an energy covariance.
    fn round(
        &self,
        relaxed: Vec<CMat>,
        options: &SolveOptions,
        schedule: &PenaltySchedule,
        rounding: Rounding,
    ) -> Result<(Vec<CVec>, CMat, RankOneSummary)> {
        let k_total = self.n_ir();
        if rounding == Rounding::Exact {
            let (beams, energy_cov) = extract_beams(self.scenario, &relaxed)?;
            let rank_one: Vec<CMat> = beams.iter().map(|w| w * w.adjoint()).collect();
            let f0 = -self.objective.value(&relaxed);
            let outcome = dc_rank_one_round(rank_one, f0, |sub| Ok((sub.current.to_vec(), f0)), schedule)?;
            let summary = RankOneSummary {
                converged: outcome.converged,
                iterations: outcome.iterations,
                rank_gap: outcome.rank_gap,
                history: outcome.history,
            };
            return Ok((beams, energy_cov, summary));
        }
        let constraints = self.constraints()?;
        let n = self.scenario.n_tx();
        let mut full = relaxed;
        let f0 = -self.objective.value(&full);
        let init: Vec<CMat> = full[..k_total].to_vec();
        let outcome = {
            let full_ref = &mut full;
            dc_rank_one_round(
                init,
                f0,
                |sub| {
                    let penalties: Vec<CMat> = (0..k_total).map(|k| sub.penalty_gradient(k)).collect();
                    let penalized = Penalized {
                        inner: self.objective,
                        penalties,
                    };
                    let problem = PsdProblem {
                        objective: &penalized,
                        constraints: &constraints,
                        block_sizes: vec![n; k_total + 1],
                        set: self.set,
                    };
                    let (x, _) = maximize_psd(&problem, Some(full_ref.as_slice()), options)?;
                    let f = -self.objective.value(&x);
                    *full_ref = x;
                    Ok((full_ref[..k_total].to_vec(), f))
                },
                schedule,
            )?
        };
        let summary = RankOneSummary {
            converged: outcome.converged,
            iterations: outcome.iterations,
            rank_gap: outcome.rank_gap,
            history: outcome.history,
        };
        let (beams, energy_cov) = extract_beams(self.scenario, &full)?;
        Ok((beams, energy_cov, summary))
    }
}

/// Objective minus the linearized DC penalty `Σ_k ⟨P_k, W_k⟩`.
struct Penalized<'a> {
    inner: &'a dyn Functional,
    penalties: Vec<CMat>,
}

impl Functional for Penalized<'_> {
    fn value(&self, x: &[CMat]) -> f64 {
        let pen: f64 = self.penalties.iter().zip(x).map(|(p, w)| crate::linalg::inner(p, w)).sum();
        self.inner.value(x) - pen
    }

    fn value_and_gradient(&self, x: &[CMat]) -> (f64, Vec<CMat>) {
        let (v, mut g) = self.inner.value_and_gradient(x);
        let mut pen = 0.0;
        for (k, p) in self.penalties.iter().enumerate() {
            pen += crate::linalg::inner(p, &x[k]);
            g[k] -= p;
        }
        (v - pen, g)
    }
}

/// Exact factorization `w_k = W_k h_k / √(h_kᴴ W_k h_k)` with the remainder
/// moved into the energy covariance.
pub fn extract_beams(scenario: &Scenario, blocks: &[CMat]) -> Result<(Vec<CVec>, CMat)> {
    let k_total = scenario.irs.len();
    let mut energy_cov = blocks[k_total].clone();
    let mut beams = Vec::with_capacity(k_total);
    for (k, ir) in scenario.irs.iter().enumerate() {
        let h = ir.miso_vector()?;
        let wk = &blocks[k];
        let gain = quad_form(wk, &h);
        let n = h.len();
        let beam = if gain > 1e-300 {
            (wk * &h) * c(1.0 / gain.sqrt(), 0.0)
        } else {
            CVec::zeros(n)
        };
        energy_cov += wk - &beam * beam.adjoint();
        beams.push(beam);
    }
    // remainder is PSD up to rounding; clip tiny negative eigenvalues
    let eig = crate::linalg::HermitianEigen::new(&hermitian_part(&energy_cov));
    let energy_cov = eig.reconstruct_with(|l| l.max(0.0));
    Ok((beams, energy_cov))
}

pub(crate) fn verify(
    scenario: &Scenario,
    beams: &BeamformerSet,
    cancel: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rho = |k: usize| beams.split_ratios.as_ref().map_or(1.0, |s| s[k]);
    let sinr = (0..scenario.irs.len())
        .map(|k| sinr_ir_with(&scenario.irs, k, &beams.info_beams, &beams.energy_cov, rho(k), cancel))
        .collect::<Result<Vec<_>>>()?;
    let energy = scenario
        .ers
        .iter()
        .enumerate()
        .map(|(j, er)| {
            let share = beams.split_ratios.as_ref().map_or(1.0, |s| 1.0 - s[j]);
            harvested_energy(er, &beams.total_cov).map(|e| share * e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sinr, energy))
}

pub(crate) fn check_requirements(scenario: &Scenario, gamma: &[f64], energy: &[f64]) -> Result<()> {
    if gamma.len() != scenario.irs.len() {
        return Err(Error::Dimension(format!(
            "{} SINR targets for {} IRs",
            gamma.len(),
            scenario.irs.len()
        )));
    }
    if energy.len() != scenario.ers.len() {
        return Err(Error::Dimension(format!(
            "{} energy targets for {} ERs",
            energy.len(),
            scenario.ers.len()
        )));
    }
    if scenario.irs.is_empty() {
        return Err(Error::InvalidArgument("scenario has no information receivers".into()));
    }
    if gamma.iter().chain(energy).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("requirements must be nonnegative".into()));
    }
    for (k, ir) in scenario.irs.iter().enumerate() {
        let h = ir.miso_vector()?;
        let max_sinr = scenario.power_budget * vec_norm(&h).powi(2) / ir.noise_power;
        if gamma[k] > max_sinr {
            return Err(Error::Infeasible {
                constraint: format!("sinr[{k}]"),
                violation: gamma[k] / max_sinr - 1.0,
            });
        }
    }
    Ok(())
}

pub(crate) fn design_beams(
    problem: &BeamProblem<'_>,
    start: Option<&[CMat]>,
    options: &SolveOptions,
    schedule: &PenaltySchedule,
    rounding: Rounding,
) -> Result<(BeamformerSet, SolveReport, RankOneSummary, Vec<CMat>)> {
    let (relaxed, report) = problem.solve_relaxed(start, options)?;
    let (beams, energy_cov, summary) = problem.round(relaxed.clone(), options, schedule, rounding)?;
    let set = BeamformerSet::new(beams, energy_cov, problem.split.map(|s| s.to_vec()));
    Ok((set, report, summary, relaxed))
}

fn sensing_objective(scenario: &Scenario, metric: SensingMetric) -> Result<FnFunctional> {
    Ok(negated(sensing_of_total(scenario, metric)?))
}

/// Separated IRs and ERs: minimize the sensing CRB of the total covariance
/// subject to `SINR_k ≥ γ_k`, `E_j ≥ e_j` and the power budget.
pub fn design_separated(
    scenario: &Scenario,
    gamma: &[f64],
    energy: &[f64],
    options: &MultiuserOptions,
) -> Result<BeamDesign> {
    check_requirements(scenario, gamma, energy)?;
    let objective = sensing_objective(scenario, options.metric)?;
    let problem = BeamProblem {
        scenario,
        objective: &objective,
        sinr_targets: gamma,
        energy_targets: energy,
        split: None,
        set: FeasibleSet::at_most(scenario.power_budget),
        cancel_energy_interference: options.cancel_energy_interference,
    };
    let mut solver = options.solver.clone();
    if options.metric == SensingMetric::PointTarget {
        solver.starts = solver.starts.max(8);
        solver.convex = true;
    }
    let (beams, report, rank_one, _) = design_beams(&problem, None, &solver, &options.dc, options.rounding)?;
    let (sinr, energy_out) = verify(scenario, &beams, options.cancel_energy_interference)?;
    let objective = sensing_crb(scenario, &beams.total_cov, options.metric)?;
    Ok(BeamDesign {
        beams,
        objective,
        report,
        rank_one,
        sinr,
        energy: energy_out,
        alternation_history: Vec::new(),
    })
}

/// Smallest `ρ` meeting `ρ s / (ρ i + σ²) ≥ γ`: `ρ = γσ² / (s - γ i)`.
pub fn minimal_split(signal: f64, interference: f64, noise: f64, gamma: f64) -> Option<f64> {
    if gamma <= 0.0 {
        return Some(MIN_SPLIT);
    }
    let margin = signal - gamma * interference;
    if margin <= 0.0 {
        return None;
    }
    let rho = gamma * noise / margin;
    if rho > 1.0 + 1e-12 {
        None
    } else {
        Some(rho.clamp(MIN_SPLIT, 1.0))
    }
}

const MIN_SPLIT: f64 = 1e-6;
/// Relative split change below which the fixed-split problem is unchanged.
const SPLIT_RTOL: f64 = 1e-6;
/// Effort of the split-eliminated seed solve.
const JOINT_KKT_TOL: f64 = 1e-3;
const JOINT_MAX_INNER: usize = 1000;
const JOINT_MAX_OUTER: usize = 10;

fn minimal_split_each(scenario: &Scenario, blocks: &[CMat], gamma: &[f64], cancel: bool) -> Result<Vec<Option<f64>>> {
    let k_total = scenario.irs.len();
    let r = total(blocks);
    scenario
        .irs
        .iter()
        .enumerate()
        .map(|(k, ir)| {
            let h = ir.miso_vector()?;
            let signal = quad_form(&blocks[k], &h);
            let mut interference = quad_form(&r, &h) - signal;
            if cancel {
                interference -= quad_form(&blocks[k_total], &h);
            }
            Ok(minimal_split(signal, interference.max(0.0), ir.noise_power, gamma[k]))
        })
        .collect()
}

fn minimal_splits(scenario: &Scenario, blocks: &[CMat], gamma: &[f64], cancel: bool) -> Result<Option<Vec<f64>>> {
    Ok(minimal_split_each(scenario, blocks, gamma, cancel)?.into_iter().collect())
}

/// Per receiver, the interval of split ratios for which `blocks` meets both
/// its SINR and energy targets; returns the midpoints when every interval is
/// nonempty.
fn split_interval_midpoints(
    scenario: &Scenario,
    blocks: &[CMat],
    gamma: &[f64],
    energy: &[f64],
    cancel: bool,
) -> Result<Option<Vec<f64>>> {
    let k_total = scenario.irs.len();
    let r = total(blocks);
    let mut out = Vec::with_capacity(k_total);
    for (k, ir) in scenario.irs.iter().enumerate() {
        let h = ir.miso_vector()?;
        let signal = quad_form(&blocks[k], &h);
        let mut interference = quad_form(&r, &h) - signal;
        if cancel {
            interference -= quad_form(&blocks[k_total], &h);
        }
        let Some(lo) = minimal_split(signal, interference.max(0.0), ir.noise_power, gamma[k]) else {
            return Ok(None);
        };
        let harvested = harvested_energy(&scenario.ers[k], &r)?;
        let hi = if energy[k] > 0.0 { 1.0 - energy[k] / harvested } else { 1.0 };
        if hi < lo {
            return Ok(None);
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(Some(out))
}

/// Co-located receivers: receiver `k` is both `irs[k]` and `ers[k]` and
/// splits a fraction `ρ_k` of its input to the decoder. Alternates a convex
/// beam design at fixed `ρ` with the minimal-`ρ` update.
pub fn design_colocated(
    scenario: &Scenario,
    gamma: &[f64],
    energy: &[f64],
    options: &MultiuserOptions,
) -> Result<BeamDesign> {
    if scenario.irs.len() != scenario.ers.len() {
        return Err(Error::InvalidArgument(format!(
            "co-located mode pairs IRs with ERs, got {} IRs and {} ERs",
            scenario.irs.len(),
            scenario.ers.len()
        )));
    }
    check_requirements(scenario, gamma, energy)?;
    let k_total = scenario.irs.len();
    let objective = sensing_objective(scenario, options.metric)?;
    let set = FeasibleSet::at_most(scenario.power_budget);
    let mut solver = options.solver.clone();
    if options.metric == SensingMetric::PointTarget {
        solver.starts = solver.starts.max(8);
    }

    // SINR alone at ρ = 1 decides hard infeasibility
    let zeros = vec![0.0; energy.len()];
    let ones = vec![1.0; k_total];
    let sinr_only = BeamProblem {
        scenario,
        objective: &objective,
        sinr_targets: gamma,
        energy_targets: &zeros,
        split: Some(&ones),
        set,
        cancel_energy_interference: options.cancel_energy_interference,
    };
    {
        let constraints = sinr_only.constraints()?;
        let problem = PsdProblem {
            objective: &objective,
            constraints: &constraints,
            block_sizes: vec![scenario.n_tx(); k_total + 1],
            set,
        };
        find_feasible_point(&problem, &solver)?;
    }

    // Any co-located design is feasible for the separated problem on the same
    // channels, so its solution seeds both the blocks and the split ratios.
    let separated = BeamProblem {
        energy_targets: energy,
        split: None,
        ..sinr_only
    };
    let (seed_blocks, _) = separated.solve_relaxed(None, &solver)?;
    let seed_split = split_interval_midpoints(scenario, &seed_blocks, gamma, energy, options.cancel_energy_interference)?;

    // The split-eliminated problem is convex and its solution is a fixed
    // point of the alternation; the separated blocks lie inside its domain.
    let joint = {
        let constraints = separated.split_budget_constraints()?;
        let problem = PsdProblem {
            objective: &objective,
            constraints: &constraints,
            block_sizes: vec![scenario.n_tx(); k_total + 1],
            set,
        };
        // only the split ratios are kept and the fixed-split solves below
        // certify, so a coarse solve suffices
        let mut loose = solver.clone();
        loose.kkt_tol = loose.kkt_tol.max(JOINT_KKT_TOL);
        loose.max_inner = loose.max_inner.min(JOINT_MAX_INNER);
        loose.max_outer = loose.max_outer.min(JOINT_MAX_OUTER);
        match maximize_psd(&problem, Some(&seed_blocks), &loose) {
            Ok((blocks, _)) => minimal_splits(scenario, &blocks, gamma, options.cancel_energy_interference)?
                .map(|split| (split, blocks)),
            Err(Error::Infeasible { .. }) => None,
            Err(e) => return Err(e),
        }
    };

    let mut trials: Vec<(Vec<f64>, Option<&[CMat]>)> = Vec::new();
    if let Some((split, blocks)) = &joint {
        trials.push((split.clone(), Some(blocks.as_slice())));
    }
    if let Some(split) = seed_split {
        trials.push((split, Some(seed_blocks.as_slice())));
    }
    for rho0 in [0.5, 0.8, 0.3, 0.95, 0.1] {
        trials.push((vec![rho0; k_total], None));
    }
    let mut split = Vec::new();
    let mut last_err = None;
    let mut state = None;
    for (trial, start) in trials {
        let problem = BeamProblem {
            split: Some(&trial),
            energy_targets: energy,
            ..sinr_only
        };
        match problem.solve_relaxed(start, &solver) {
            Ok(s) => {
                split = trial;
                state = Some(s);
                break;
            }
            Err(e @ Error::Infeasible { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let Some((mut blocks, mut report)) = state else {
        return Err(last_err.expect("at least one split ratio was tried"));
    };

    let mut history = vec![-objective.value(&blocks)];
    for _ in 0..options.max_alternations {
        let mut next_split = split.clone();
        for (k, rho) in minimal_split_each(scenario, &blocks, gamma, options.cancel_energy_interference)?
            .into_iter()
            .enumerate()
        {
            // keep the current ratio when rounding leaves no closed-form solution
            if let Some(rho) = rho {
                next_split[k] = rho.min(split[k]);
            }
        }
        if next_split.iter().zip(&split).all(|(a, b)| *a >= b * (1.0 - SPLIT_RTOL)) {
            // the bounds move by less than the constraint tolerance
            break;
        }
        let problem = BeamProblem {
            split: Some(&next_split),
            energy_targets: energy,
            ..sinr_only
        };
        let (next_blocks, next_report) = match problem.solve_relaxed(Some(&blocks), &solver) {
            Ok(v) => v,
            Err(Error::Infeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        let crb = -objective.value(&next_blocks);
        let prev = *history.last().expect("history is non-empty");
        if crb > prev {
            // rounding-level regression: keep the previous design
            break;
        }
        blocks = next_blocks;
        report = next_report;
        split = next_split;
        history.push(crb);
        if prev - crb <= options.alternation_tol * prev.abs() {
            break;
        }
    }

    let problem = BeamProblem {
        split: Some(&split),
        energy_targets: energy,
        ..sinr_only
    };
    let (beams, energy_cov, rank_one) = problem.round(blocks, &solver, &options.dc, options.rounding)?;
    let beams = BeamformerSet::new(beams, energy_cov, Some(split));
    let (sinr, energy_out) = verify(scenario, &beams, options.cancel_energy_interference)?;
    let objective = sensing_crb(scenario, &beams.total_cov, options.metric)?;
    Ok(BeamDesign {
        beams,
        objective,
        report,
        rank_one,
        sinr,
        energy: energy_out,
        alternation_history: history,
    })
}

/// One row of an SINR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: ReceiverMode,
    pub gamma: f64,
    pub feasible: bool,
    pub crb: f64,
    pub min_sinr: f64,
    pub min_energy: f64,
}

/// Sweeps a common SINR requirement (ascending) with fixed energy targets.
pub fn sweep_sinr(
    scenario: &Scenario,
    gammas: &[f64],
    energy: &[f64],
    mode: ReceiverMode,
    options: &MultiuserOptions,
) -> Result<Vec<SweepRow>> {
    if gammas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("SINR list must be ascending".into()));
    }
    let run = |&g: &f64| -> Result<SweepRow> {
        let targets = vec![g; scenario.irs.len()];
        let design = match mode {
            ReceiverMode::Separated => design_separated(scenario, &targets, energy, options),
            ReceiverMode::CoLocated => design_colocated(scenario, &targets, energy, options),
        };
        match design {
            Ok(d) => Ok(SweepRow {
                mode,
                gamma: g,
                feasible: true,
                crb: d.objective,
                min_sinr: d.sinr.iter().cloned().fold(f64::INFINITY, f64::min),
                min_energy: d.energy.iter().cloned().fold(f64::INFINITY, f64::min),
            }),
            Err(Error::Infeasible { .. }) => Ok(SweepRow {
                mode,
                gamma: g,
                feasible: false,
                crb: f64::INFINITY,
                min_sinr: f64::NAN,
                min_energy: f64::NAN,
            }),
            Err(e) => Err(e),
        }
    };
    if options.parallel {
        gammas.par_iter().map(run).collect()
    } else {
        gammas.iter().map(run).collect()
    }
}

/// CSV with columns `mode,gamma,feasible,crb,min_sinr_achieved,min_energy_achieved`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "mode,gamma,feasible,crb,min_sinr_achieved,min_energy_achieved")?;
    for r in rows {
        if r.feasible {
            writeln!(
                out,
                "{},{},1,{},{},{}",
                r.mode.name(),
                r.gamma,
                r.crb,
                r.min_sinr,
                r.min_energy
            )?;
        } else {
            writeln!(out, "{},{},0,nan,nan,nan", r.mode.name(), r.gamma)?;
        }
    }
    Ok(())
}
