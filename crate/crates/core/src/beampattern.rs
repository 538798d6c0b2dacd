//! Multi-target transmit beampattern matching, with and without information
//! and energy receivers.
//!
//! The scale `α` is eliminated in closed form inside the objective, so the
//! error of a covariance is `‖(I - d dᵀ/‖d‖²) p(R)‖²`, a convex quadratic in `R`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{c, identity, CMat};
use crate::metrics::{beampattern, desired_indicator, matching_error_against, MatchingObjective};
use crate::multiuser::{check_requirements, design_beams, verify, BeamDesign, BeamProblem, MultiuserOptions};
use crate::scenario::{Scenario, UlaGeometry};
use crate::solver::{maximize_psd, FeasibleSet, FnFunctional, OfTotal, PsdProblem, SolveOptions, SolveReport};

/// Desired indicator pattern on an angle grid (degrees).
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpec {
    pub grid_deg: Vec<f64>,
    pub desired: Vec<f64>,
    pub targets_deg: Vec<f64>,
    pub width_deg: f64,
}

/// `[-90, 90]` in steps of `step_deg`.
pub fn uniform_grid(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n).map(|i| -90.0 + i as f64 * step_deg).collect()
}

pub fn desired_pattern(targets_deg: &[f64], grid_deg: &[f64], width_deg: f64) -> Result<PatternSpec> {
    if grid_deg.is_empty() {
        return Err(Error::InvalidArgument("empty angle grid".into()));
    }
    if grid_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("angle grid must be strictly increasing".into()));
    }
    if !(width_deg > 0.0) {
        return Err(Error::InvalidArgument("pattern width must be positive".into()));
    }
    if let Some(t) = targets_deg.iter().find(|t| !(t.abs() < 90.0)) {
        return Err(Error::InvalidArgument(format!("target angle {t}° outside (-90°, 90°)")));
    }
    Ok(PatternSpec {
        grid_deg: grid_deg.to_vec(),
        desired: desired_indicator(targets_deg, grid_deg, width_deg),
        targets_deg: targets_deg.to_vec(),
        width_deg,
    })
}

/// Negated matching error of the total covariance, for maximization.
fn matching_functional(geometry: &UlaGeometry, pattern: &PatternSpec) -> FnFunctional {
    let m = MatchingObjective::new(geometry, &pattern.grid_deg, &pattern.desired);
    let total = OfTotal::new(move |s: &CMat| {
        let (e, g) = m.value_and_gradient(s);
        (-e, -g)
    });
    FnFunctional::from_value_grad(move |x| crate::solver::Functional::value_and_gradient(&total, x))
}

#[derive(Debug, Clone)]
pub struct PatternDesign {
    pub covariance: CMat,
    pub error: f64,
    pub scale: f64,
    pub report: SolveReport,
}

/// Minimizes the matching error over `{R ⪰ 0, tr R = P}`.
pub fn sensing_only_design(
    pattern: &PatternSpec,
    geometry: &UlaGeometry,
    power: f64,
    options: &SolveOptions,
) -> Result<PatternDesign> {
    if !(power > 0.0) {
        return Err(Error::InvalidArgument("power budget must be positive".into()));
    }
    let n = geometry.num_elements;
    let objective = matching_functional(geometry, pattern);
    let problem = PsdProblem {
        objective: &objective,
        constraints: &[],
        block_sizes: vec![n],
        set: FeasibleSet::exactly(power),
    };
    let start = [identity(n) * c(power / n as f64, 0.0)];
    let (mut blocks, report) = maximize_psd(&problem, Some(&start), options)?;
    let covariance = blocks.remove(0);
    let (error, scale) = pattern_error(&covariance, geometry, pattern)?;
    Ok(PatternDesign { covariance, error, scale, report })
}

/// Matching error and optimal scale of `r` against `pattern`.
pub fn pattern_error(r: &CMat, geometry: &UlaGeometry, pattern: &PatternSpec) -> Result<(f64, f64)> {
    matching_error_against(&beampattern(r, geometry, &pattern.grid_deg), &pattern.desired)
}

/// Matching-error design of information beams and energy covariance under
/// per-IR SINR and per-ER energy requirements, with the full power `P` spent.
pub fn iscpt_pattern_design(
    scenario: &Scenario,
    pattern: &PatternSpec,
    gamma: &[f64],
    energy: &[f64],
    options: &MultiuserOptions,
) -> Result<BeamDesign> {
    check_requirements(scenario, gamma, energy)?;
    let objective = matching_functional(&scenario.tx_geometry, pattern);
    let problem = BeamProblem {
        scenario,
        objective: &objective,
        sinr_targets: gamma,
        energy_targets: energy,
        split: None,
        // the error is homogeneous in R, so an inequality budget would favour R = 0
        set: FeasibleSet::exactly(scenario.power_budget),
        cancel_energy_interference: options.cancel_energy_interference,
    };
    let (beams, report, rank_one, _) = design_beams(&problem, None, &options.solver, &options.dc, options.rounding)?;
    let (sinr, energy_out) = verify(scenario, &beams, options.cancel_energy_interference)?;
    let (error, _) = pattern_error(&beams.total_cov, &scenario.tx_geometry, pattern)?;
    Ok(BeamDesign {
        beams,
        objective: error,
        report,
        rank_one,
        sinr,
        energy: energy_out,
        alternation_history: Vec::new(),
    })
}

/// Angles of interior local maxima whose value is at least `floor` times
/// the global maximum.
pub fn local_maxima(grid_deg: &[f64], values: &[f64], floor: f64) -> Vec<f64> {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1] && values[i] >= floor * top)
        .map(|i| grid_deg[i])
        .collect()
}

/// Main-lobe criteria for [`prominent_peaks`]: half the global maximum in
/// height and a tenth of it in prominence.
pub const PEAK_MIN_HEIGHT: f64 = 0.5;
pub const PEAK_MIN_PROMINENCE: f64 = 0.1;

/// Angles of local maxima at least `min_height` times the global maximum
/// whose topographic prominence is at least `min_prominence` times it.
/// Prominence is the drop to the higher of the two minima separating a peak
/// from taller terrain (or the grid edge), so ripple on top of a lobe is not
/// counted as a peak.
pub fn prominent_peaks(grid_deg: &[f64], values: &[f64], min_height: f64, min_prominence: f64) -> Vec<f64> {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = values.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(values[i] > values[i - 1] && values[i] >= values[i + 1] && values[i] >= min_height * top) {
            continue;
        }
        let base = |range: &mut dyn Iterator<Item = usize>| {
            let mut low = values[i];
            for j in range {
                if values[j] > values[i] {
                    break;
                }
                low = low.min(values[j]);
            }
            low
        };
        let left = base(&mut (0..i).rev());
        let right = base(&mut (i + 1..n));
        if values[i] - left.max(right) >= min_prominence * top {
            peaks.push(grid_deg[i]);
        }
    }
    peaks
}

/// Writes `theta,desired,sensing_only_pattern,iscpt_pattern`. With `db`
/// each pattern is normalized to its own peak and given in dB.
pub fn write_pattern_csv<W: Write>(
    grid_deg: &[f64],
    desired: &[f64],
    sensing_only: &[f64],
    iscpt: &[f64],
    db: bool,
    mut out: W,
) -> std::io::Result<()> {
    let scale = |v: &[f64]| -> Vec<f64> {
        if !db {
            return v.to_vec();
        }
        let peak = v.iter().cloned().fold(0.0, f64::max);
        v.iter().map(|p| 10.0 * (p / peak).max(1e-30).log10()).collect()
    };
    let (s, i) = (scale(sensing_only), scale(iscpt));
    writeln!(out, "theta,desired,sensing_only_pattern,iscpt_pattern")?;
    for k in 0..grid_deg.len() {
        writeln!(out, "{},{},{:.10e},{:.10e}", grid_deg[k], desired[k], s[k], i[k])?;
    }
    Ok(())
}
