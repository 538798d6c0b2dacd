//! Difference-of-convex rank-one recovery.
//!
//! The rank-one requirement on `W_k ⪰ 0` is written as
//! `tr W_k - λ_max(W_k) = 0`; the concave part `-λ_max` is linearized at the
//! current dominant eigenvector `v_k`, giving the convex penalty
//! `μ Σ_k (tr W_k - v_kᴴ W_k v_k)` that the caller's inner problem adds to its
//! objective.

use super::projection::dominant_eigenpair;
use crate::error::Result;
use crate::linalg::{c, trace_re, CMat, CVec};

#[derive(Debug, Clone)]
pub struct PenaltySchedule {
    /// Initial penalty weight, relative to `|f(W₀)| / Σ tr W₀`.
    pub initial: f64,
    /// Multiplier applied when the rank gap fails to halve.
    pub growth: f64,
    pub max_penalty: f64,
    pub max_iterations: usize,
    /// Stop when `Σ (tr W_k - λ_max W_k) < rank_tol · Σ tr W_k`.
    pub rank_tol: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            growth: 4.0,
            max_penalty: 1e6,
            max_iterations: 30,
            rank_tol: 1e-6,
        }
    }
}

/// Linearized subproblem handed to the caller.
pub struct DcSubproblem<'a> {
    pub current: &'a [CMat],
    /// Dominant unit eigenvector of each current matrix.
    pub directions: &'a [CVec],
    /// Absolute penalty weight `μ`.
    pub penalty: f64,
}

impl DcSubproblem<'_> {
    /// Gradient of the linearized penalty for block `k`: `μ (I - v_k v_kᴴ)`.
    pub fn penalty_gradient(&self, k: usize) -> CMat {
        let v = &self.directions[k];
        let n = v.len();
        (CMat::identity(n, n) - v * v.adjoint()) * c(self.penalty, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcStep {
    pub penalty: f64,
    /// `f(W_t) + μ gap(W_t)`.
    pub objective_before: f64,
    /// `f(W_{t+1}) + μ gap(W_{t+1})`, same `μ`.
    pub objective_after: f64,
    pub rank_gap: f64,
}

#[derive(Debug, Clone)]
pub struct DcOutcome {
    /// Rank-one matrices `w_k w_kᴴ`.
    pub matrices: Vec<CMat>,
    /// Beams `w_k = √λ_max v_k`.
    pub beams: Vec<CVec>,
    /// Matrices of the final iterate before truncation.
    pub iterate: Vec<CMat>,
    pub converged: bool,
    pub iterations: usize,
    pub rank_gap: f64,
    pub history: Vec<DcStep>,
}

/// `Σ_k (tr W_k - λ_max W_k)`.
pub fn rank_gap(matrices: &[CMat]) -> f64 {
    matrices
        .iter()
        .map(|w| (trace_re(w) - dominant_eigenpair(w).0).max(0.0))
        .sum()
}

/// Runs the DC iteration. `inner` solves the convex subproblem (objective
/// `f` plus the linearized penalty) and returns the new matrices and their
/// unpenalized objective `f`. `initial_objective` is `f(init)`.
pub fn dc_rank_one_round<F>(
    init: Vec<CMat>,
    initial_objective: f64,
    mut inner: F,
    schedule: &PenaltySchedule,
) -> Result<DcOutcome>
where
    F: FnMut(&DcSubproblem<'_>) -> Result<(Vec<CMat>, f64)>,
{
    let total_trace = |w: &[CMat]| w.iter().map(trace_re).sum::<f64>().max(1e-300);
    let mut current = init;
    let mut objective = initial_objective;
    let mut gap = rank_gap(&current);
    let mut penalty = schedule.initial * initial_objective.abs().max(1e-12) / total_trace(&current);
    let mut history = Vec::new();
    let mut iterations = 1;
    let mut converged = gap < schedule.rank_tol * total_trace(&current);

    while !converged && iterations <= schedule.max_iterations {
        let directions: Vec<CVec> = current.iter().map(|w| dominant_eigenpair(w).1).collect();
        let sub = DcSubproblem {
            current: &current,
            directions: &directions,
            penalty,
        };
        let (next, next_objective) = inner(&sub)?;
        let next_gap = rank_gap(&next);
        history.push(DcStep {
            penalty,
            objective_before: objective + penalty * gap,
            objective_after: next_objective + penalty * next_gap,
            rank_gap: next_gap,
        });
        if next_gap > 0.5 * gap {
            penalty = (penalty * schedule.growth).min(schedule.max_penalty.max(penalty));
        }
        current = next;
        objective = next_objective;
        gap = next_gap;
        iterations += 1;
        converged = gap < schedule.rank_tol * total_trace(&current);
    }

    let (beams, matrices): (Vec<CVec>, Vec<CMat>) = current
        .iter()
        .map(|w| {
            let (l, v) = dominant_eigenpair(w);
            let beam = v * c(l.max(0.0).sqrt(), 0.0);
            let m = &beam * beam.adjoint();
            (beam, m)
        })
        .unzip();
    Ok(DcOutcome {
        matrices,
        beams,
        iterate: current,
        converged,
        iterations,
        rank_gap: gap,
        history,
    })
}
