//! Augmented-Lagrangian projected-gradient maximization over
//! `{X_b ⪰ 0, Σ_b tr X_b ≤ P}` (or `= P`).
//!
//! Internally variables are scaled by the budget so the feasible set has unit
//! trace, the objective is scaled by its gradient norm at the isotropic point
//! and each constraint by its own gradient norm there (at the start point when
//! the isotropic point leaves its domain). Satisfaction is always judged
//! relative to the bound. All tolerances and the reported KKT residual refer
//! to this normalized problem.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::functional::Functional;
use super::projection::project_blocks;
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, identity, inner, CMat};
use crate::metrics::TransmitCovariance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AtMost,
    AtLeast,
}

/// Inequality constraint `g(X) ≤ bound` or `g(X) ≥ bound`, checked with a
/// tolerance relative to `|bound|` (absolute when the bound is zero).
pub struct ConstraintSpec {
    pub name: String,
    pub functional: Box<dyn Functional>,
    pub bound: f64,
    pub direction: Direction,
    pub tolerance: f64,
}

impl ConstraintSpec {
    pub fn at_least(name: impl Into<String>, functional: impl Functional + 'static, bound: f64) -> Self {
        Self {
            name: name.into(),
            functional: Box::new(functional),
            bound,
            direction: Direction::AtLeast,
            tolerance: 1e-6,
        }
    }

    pub fn at_most(name: impl Into<String>, functional: impl Functional + 'static, bound: f64) -> Self {
        Self {
            name: name.into(),
            functional: Box::new(functional),
            bound,
            direction: Direction::AtMost,
            tolerance: 1e-6,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        assert!(tolerance > 0.0, "constraint tolerance must be positive");
        self.tolerance = tolerance;
        self
    }

    fn scale(&self) -> f64 {
        if self.bound.abs() > 1e-300 { self.bound.abs() } else { 1.0 }
    }

    /// Normalized slack: nonnegative iff satisfied.
    pub fn slack(&self, value: f64) -> f64 {
        let s = match self.direction {
            Direction::AtLeast => value - self.bound,
            Direction::AtMost => self.bound - value,
        } / self.scale();
        if s.is_nan() { f64::NEG_INFINITY } else { s }
    }

    /// Normalized violation `max(0, -slack)`.
    pub fn residual(&self, value: f64) -> f64 {
        (-self.slack(value)).max(0.0)
    }

    pub fn is_satisfied(&self, x: &[CMat]) -> bool {
        self.residual(self.functional.value(x)) <= self.tolerance
    }
}

/// Feasible set `{X_b ⪰ 0, Σ tr X_b ≤ budget}`, or with trace equality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleSet {
    pub budget: f64,
    pub equality: bool,
}

impl FeasibleSet {
    pub fn at_most(budget: f64) -> Self {
        Self { budget, equality: false }
    }

    pub fn exactly(budget: f64) -> Self {
        Self { budget, equality: true }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub kkt_tol: f64,
    /// Overrides every constraint's own tolerance when set.
    pub constraint_tol: Option<f64>,
    pub max_outer: usize,
    pub max_inner: usize,
    pub starts: usize,
    pub seed: u64,
    /// Caller asserts the problem is convex; converged solves are then
    /// reported as globally optimal.
    pub convex: bool,
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            constraint_tol: None,
            max_outer: 200,
            max_inner: 5000,
            starts: 1,
            seed: 0,
            convex: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub outer: usize,
    pub inner: usize,
    pub augmented_lagrangian: f64,
    pub objective: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub objective_value: f64,
    pub constraint_residuals: Vec<f64>,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub global_optimal: bool,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.constraint_residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Writes the iteration trace as `iteration,objective,max_residual`.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,objective,max_residual")?;
        for (i, t) in self.trace.iter().enumerate() {
            writeln!(out, "{i},{},{}", t.objective, t.max_residual)?;
        }
        Ok(())
    }
}

/// A maximization problem over PSD blocks.
pub struct PsdProblem<'a> {
    pub objective: &'a dyn Functional,
    pub constraints: &'a [ConstraintSpec],
    pub block_sizes: Vec<usize>,
    pub set: FeasibleSet,
}

type Blocks = Vec<CMat>;

const FEASIBILITY_MARGIN: f64 = 1e-3;
/// Sufficient-decrease constant of the line search.
const ARMIJO: f64 = 1e-4;
/// Relative increase of the merit value attributed to rounding.
const VALUE_ROUNDOFF: f64 = 1e-12;
const STALL_OUTERS: usize = 3;
const STATIONARITY_EVERY: usize = 4;

fn add_scaled(y: &[CMat], g: &[CMat], t: f64) -> Blocks {
    y.iter().zip(g).map(|(a, b)| a + b * c(t, 0.0)).collect()
}

fn axpy_blocks(y: &mut [CMat], g: &[CMat], t: f64) {
    for (a, b) in y.iter_mut().zip(g) {
        a.zip_apply(b, |p, q| *p += q * t);
    }
}

fn diff(a: &[CMat], b: &[CMat]) -> Blocks {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| inner(x, y)).sum()
}

fn norm(a: &[CMat]) -> f64 {
    a.iter().map(|x| frobenius(x).powi(2)).sum::<f64>().sqrt()
}

struct Normalized<'a> {
    problem: &'a PsdProblem<'a>,
    power: f64,
    f_scale: f64,
    /// Internal tolerance per constraint (bound-relative tolerance rescaled).
    tolerances: Vec<f64>,
    /// `bound scale / gradient scale` per constraint.
    c_ratio: Vec<f64>,
}

struct InnerOutcome {
    y: Blocks,
    iterations: usize,
}

impl<'a> Normalized<'a> {
    fn x_of(&self, y: &[CMat]) -> Blocks {
        y.iter().map(|b| b * c(self.power, 0.0)).collect()
    }

    fn project(&self, y: &[CMat]) -> Blocks {
        project_blocks(y, 1.0, self.problem.set.equality)
    }

    /// Minimization objective `-f / f_scale`.
    fn objective(&self, y: &[CMat]) -> f64 {
        let v = -self.problem.objective.value(&self.x_of(y)) / self.f_scale;
        if v.is_nan() { f64::INFINITY } else { v }
    }

    fn objective_grad(&self, y: &[CMat]) -> (f64, Blocks) {
        let (v, g) = self.problem.objective.value_and_gradient(&self.x_of(y));
        let k = -self.power / self.f_scale;
        (-v / self.f_scale, g.into_iter().map(|b| b * c(k, 0.0)).collect())
    }

    fn slack_at(&self, j: usize, x: &[CMat]) -> f64 {
        let con = &self.problem.constraints[j];
        con.slack(con.functional.value(x)) * self.c_ratio[j]
    }

    /// Normalized slack at `x` with its gradient with respect to `y`.
    fn slack_grad_at(&self, j: usize, x: &[CMat]) -> (f64, Blocks) {
        let con = &self.problem.constraints[j];
        let (v, mut g) = con.functional.value_and_gradient(x);
        let sign = match con.direction {
            Direction::AtLeast => 1.0,
            Direction::AtMost => -1.0,
        };
        let k = c(sign * self.power / con.scale() * self.c_ratio[j], 0.0);
        for b in &mut g {
            *b *= k;
        }
        (con.slack(v) * self.c_ratio[j], g)
    }

    fn slack_grad(&self, j: usize, y: &[CMat]) -> (f64, Blocks) {
        self.slack_grad_at(j, &self.x_of(y))
    }

    fn slacks(&self, y: &[CMat]) -> Vec<f64> {
        let x = self.x_of(y);
        (0..self.problem.constraints.len()).map(|j| self.slack_at(j, &x)).collect()
    }

    fn max_violation(&self, slacks: &[f64]) -> (usize, f64) {
        slacks
            .iter()
            .enumerate()
            .map(|(j, s)| (j, (-s).max(0.0) / self.tolerances[j]))
            .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc })
    }

    fn satisfied(&self, slacks: &[f64]) -> bool {
        slacks
            .iter()
            .zip(&self.tolerances)
            .all(|(s, t)| (-s).max(0.0) <= *t)
    }

    fn al_value(&self, y: &[CMat], lam: &[f64], rho: f64) -> f64 {
        let mut v = self.objective(y);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        let x = self.x_of(y);
        for (j, &l) in lam.iter().enumerate() {
            let s = self.slack_at(j, &x);
            if !s.is_finite() && s < 0.0 {
                return f64::INFINITY;
            }
            let t = (l - rho * s).max(0.0);
            v += (t * t - l * l) / (2.0 * rho);
        }
        v
    }

    fn al_value_grad(&self, y: &[CMat], lam: &[f64], rho: f64) -> (f64, Blocks) {
        let (mut v, mut g) = self.objective_grad(y);
        let x = self.x_of(y);
        for (j, &l) in lam.iter().enumerate() {
            let s = self.slack_at(j, &x);
            let t = (l - rho * s).max(0.0);
            v += (t * t - l * l) / (2.0 * rho);
            if t > 0.0 {
                let (_, gs) = self.slack_grad_at(j, &x);
                axpy_blocks(&mut g, &gs, -t);
            }
        }
        (v, g)
    }

    fn feasibility_value(&self, y: &[CMat], margin: f64) -> f64 {
        let mut v = 0.0;
        let x = self.x_of(y);
        for j in 0..self.problem.constraints.len() {
            let s = self.slack_at(j, &x);
            if s.is_infinite() && s < 0.0 {
                return f64::INFINITY;
            }
            let viol = (margin - s).max(0.0);
            v += 0.5 * viol * viol;
        }
        v
    }

    fn feasibility_value_grad(&self, y: &[CMat], margin: f64) -> (f64, Blocks) {
        let mut v = 0.0;
        let mut g: Blocks = y.iter().map(|b| CMat::zeros(b.nrows(), b.ncols())).collect();
        let x = self.x_of(y);
        for j in 0..self.problem.constraints.len() {
            let s = self.slack_at(j, &x);
            let viol = (margin - s).max(0.0);
            if viol > 0.0 {
                v += 0.5 * viol * viol;
                let (_, gs) = self.slack_grad_at(j, &x);
                axpy_blocks(&mut g, &gs, -viol);
            }
        }
        (v, g)
    }

    fn stationarity(&self, y: &[CMat], g: &[CMat]) -> f64 {
        norm(&diff(y, &self.project(&add_scaled(y, g, -1.0))))
    }

    /// Monotone projected gradient with Barzilai–Borwein trial steps and
    /// Armijo backtracking.
    fn projected_gradient(
        &self,
        y0: Blocks,
        value: &dyn Fn(&[CMat]) -> f64,
        value_grad: &dyn Fn(&[CMat]) -> (f64, Blocks),
        tol: f64,
        max_iter: usize,
        stop: &dyn Fn(&[CMat]) -> bool,
        mut log: Option<&mut dyn FnMut(&[CMat], f64)>,
    ) -> InnerOutcome {
        let mut y = y0;
        let (mut fy, mut g) = value_grad(&y);
        let mut step = 1.0;
        let mut iterations = 0;
        while iterations < max_iter {
            // the stationarity test costs a projection, so it is not run every step
            if stop(&y) || (iterations % STATIONARITY_EVERY == 0 && self.stationarity(&y, &g) <= tol) {
                break;
            }
            iterations += 1;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = self.project(&add_scaled(&y, &g, -step));
                let d = diff(&trial, &y);
                let gd = dot(&g, &d);
                let ft = value(&trial);
                if ft.is_finite() && ft <= fy + ARMIJO * gd {
                    accepted = Some((trial, d, None));
                    break;
                }
                // near a minimizer the decrease drops below the rounding error of
                // the value; fall back to the derivative form of the Armijo test
                if ft.is_finite() && ft <= fy + VALUE_ROUNDOFF * fy.abs().max(1.0) {
                    let (f_t, g_t) = value_grad(&trial);
                    if gd < 0.0 && dot(&g_t, &d) <= (1.0 - 2.0 * ARMIJO) * gd.abs() {
                        accepted = Some((trial, d, Some((f_t, g_t))));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((next, d, evaluated)) = accepted else { break };
            let (f_next, g_next) = evaluated.unwrap_or_else(|| value_grad(&next));
            let yk = diff(&g_next, &g);
            let sy = dot(&d, &yk);
            let ss = dot(&d, &d);
            step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (step * 4.0).min(1e12) };
            if ss == 0.0 {
                break;
            }
            y = next;
            fy = f_next;
            g = g_next;
            if let Some(log) = log.as_mut() {
                log(&y, fy);
            }
        }
        InnerOutcome { y, iterations }
    }

    /// Minimizes the squared violation in gradient-normalized units. Returns
    /// the final point and whether every constraint is within tolerance. A
    /// short first pass aims for a small margin so that the point is not left
    /// on the constraint boundary.
    fn find_feasible(&self, y0: Blocks, max_iter: usize) -> (Blocks, bool) {
        if self.satisfied(&self.slacks(&y0)) {
            return (y0, true);
        }
        let margined = self.projected_gradient(
            y0.clone(),
            &|p| self.feasibility_value(p, FEASIBILITY_MARGIN),
            &|p| self.feasibility_value_grad(p, FEASIBILITY_MARGIN),
            1e-10,
            max_iter / 10,
            &|p| self.slacks(p).iter().all(|s| *s >= 0.5 * FEASIBILITY_MARGIN),
            None,
        );
        if self.satisfied(&self.slacks(&margined.y)) {
            return (margined.y, true);
        }
        let mut y = y0;
        // restarts let BB recover after long stalls near the boundary
        for _ in 0..2 {
            let out = self.projected_gradient(
                y,
                &|p| self.feasibility_value(p, 0.0),
                &|p| self.feasibility_value_grad(p, 0.0),
                1e-12,
                max_iter,
                &|p| self.satisfied(&self.slacks(p)),
                None,
            );
            y = out.y;
            if self.satisfied(&self.slacks(&y)) {
                return (y, true);
            }
            if out.iterations < max_iter {
                break;
            }
        }
        let ok = self.satisfied(&self.slacks(&y));
        (y, ok)
    }

    /// The feasibility phase may stop on the boundary of the cone where
    /// barrier-like objectives (CRBs) are infinite. Moves towards the
    /// isotropic point as far as the constraints allow.
    fn pull_inward(&self, y: Blocks, sizes: &[usize]) -> Blocks {
        if self.objective(&y).is_finite() {
            return y;
        }
        let iso = isotropic_start(sizes);
        let mut t = 0.5;
        for _ in 0..40 {
            let mixed: Blocks = y
                .iter()
                .zip(&iso)
                .map(|(a, b)| a * c(1.0 - t, 0.0) + b * c(t, 0.0))
                .collect();
            if self.satisfied(&self.slacks(&mixed)) && self.objective(&mixed).is_finite() {
                return mixed;
            }
            t *= 0.5;
        }
        y
    }

    fn solve_from(&self, y0: Blocks, options: &SolveOptions, outer_offset: usize) -> (Blocks, SolveReport) {
        let m = self.problem.constraints.len();
        let mut lam = vec![0.0; m];
        let mut rho = 10.0;
        let mut y = y0;
        let mut report = SolveReport::default();
        let mut prev_viol = f64::INFINITY;
        let mut best_kkt = f64::INFINITY;
        let mut stalled = 0;
        let mut trace = Vec::new();
        for outer in 0..options.max_outer {
            let inner_tol = (0.1 * options.kkt_tol).max(1e-2 * 0.2_f64.powi(outer as i32));
            let lam_now = lam.clone();
            let record = options.record_trace;
            let mut logger = |p: &[CMat], al: f64| {
                if record {
                    let x = self.x_of(p);
                    let residual = self
                        .problem
                        .constraints
                        .iter()
                        .map(|con| con.residual(con.functional.value(&x)))
                        .fold(0.0, f64::max);
                    trace.push(TraceEntry {
                        outer: outer + outer_offset,
                        inner: trace.len(),
                        augmented_lagrangian: al,
                        objective: self.problem.objective.value(&x),
                        max_residual: residual,
                    });
                }
            };
            let out = self.projected_gradient(
                y,
                &|p| self.al_value(p, &lam_now, rho),
                &|p| self.al_value_grad(p, &lam_now, rho),
                inner_tol,
                options.max_inner,
                &|_| false,
                Some(&mut logger),
            );
            y = out.y;
            report.iterations += out.iterations;
            report.outer_iterations = outer + 1;

            let slacks = self.slacks(&y);
            let viol = slacks.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max);
            let lam_new: Vec<f64> = lam.iter().zip(&slacks).map(|(l, s)| (l - rho * s).max(0.0)).collect();
            let (_, mut grad) = self.objective_grad(&y);
            for (j, &l) in lam_new.iter().enumerate() {
                if l > 0.0 {
                    let (_, gs) = self.slack_grad(j, &y);
                    grad = add_scaled(&grad, &gs, -l);
                }
            }
            let stationarity = self.stationarity(&y, &grad);
            let complementarity = lam_new
                .iter()
                .zip(&slacks)
                .map(|(l, s)| (l * s).abs())
                .fold(0.0, f64::max);
            report.kkt_residual = stationarity.max(complementarity);
            lam = lam_new;
            if self.satisfied(&slacks) && report.kkt_residual <= options.kkt_tol {
                report.converged = true;
                break;
            }
            // exhausted inner budgets without KKT progress: more outer
            // iterations only inflate ρ, so give up unconverged
            if out.iterations >= options.max_inner && report.kkt_residual > 0.5 * best_kkt {
                stalled += 1;
                if stalled >= STALL_OUTERS {
                    break;
                }
            } else {
                stalled = 0;
            }
            best_kkt = best_kkt.min(report.kkt_residual);
            if !self.satisfied(&slacks) && viol > 0.25 * prev_viol {
                rho = (rho * 5.0).min(1e9);
            }
            prev_viol = viol;
        }
        report.trace = trace;
        (y, report)
    }
}

/// Objective scale `P ‖∇f‖` taken at the isotropic point, so that the
/// normalized tolerances do not depend on how close to the cone boundary a
/// start lies; falls back to the start when the isotropic gradient is unusable.
fn objective_scale(problem: &PsdProblem<'_>, probe: &Normalized<'_>, y: &[CMat]) -> f64 {
    let iso = isotropic_start(&problem.block_sizes);
    let (_, g_iso) = problem.objective.value_and_gradient(&probe.x_of(&iso));
    let mut n = norm(&g_iso);
    if !(n.is_finite() && n > 0.0) {
        let (_, g0) = problem.objective.value_and_gradient(&probe.x_of(y));
        n = norm(&g0);
    }
    if n.is_finite() { (probe.power * n).max(1e-12) } else { 1.0 }
}

/// Per constraint, bound over `P ‖∇g‖` at the isotropic point, or at the
/// start when the constraint is not differentiable there.
fn constraint_ratios(problem: &PsdProblem<'_>, power: f64, start: Option<&[CMat]>) -> Vec<f64> {
    let iso: Blocks = isotropic_start(&problem.block_sizes)
        .into_iter()
        .map(|b| b * c(power, 0.0))
        .collect();
    let ratio = |con: &ConstraintSpec, x: &[CMat]| {
        let (v, g) = con.functional.value_and_gradient(x);
        let gs = power * norm(&g);
        (v.is_finite() && gs.is_finite() && gs > 0.0).then(|| con.scale() / gs)
    };
    problem
        .constraints
        .iter()
        .map(|con| {
            ratio(con, &iso)
                .or_else(|| start.and_then(|x| ratio(con, x)))
                .unwrap_or(1.0)
        })
        .collect()
}

fn isotropic_start(sizes: &[usize]) -> Blocks {
    let total: usize = sizes.iter().sum();
    sizes
        .iter()
        .map(|&n| identity(n) * c(1.0 / total as f64, 0.0))
        .collect()
}

fn random_start(sizes: &[usize], rng: &mut ChaCha8Rng, equality: bool) -> Blocks {
    let blocks: Blocks = sizes
        .iter()
        .map(|&n| {
            let g = CMat::from_fn(n, n, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                c(re, im)
            });
            &g * g.adjoint() + identity(n) * c(0.1, 0.0)
        })
        .collect();
    let tr: f64 = blocks.iter().map(crate::linalg::trace_re).sum();
    let target = if equality { 1.0 } else { 0.9 };
    blocks.into_iter().map(|b| b * c(target / tr, 0.0)).collect()
}

/// Runs only the feasibility phase from the isotropic point and returns a
/// point satisfying every constraint, or [`Error::Infeasible`].
pub fn find_feasible_point(problem: &PsdProblem<'_>, options: &SolveOptions) -> Result<Vec<CMat>> {
    if !(problem.set.budget > 0.0) {
        return Err(Error::InvalidArgument("power budget must be positive".into()));
    }
    let power = problem.set.budget;
    let c_ratio = constraint_ratios(problem, power, None);
    let probe = Normalized {
        problem,
        power,
        f_scale: 1.0,
        tolerances: problem
            .constraints
            .iter()
            .zip(&c_ratio)
            .map(|(con, r)| options.constraint_tol.unwrap_or(con.tolerance) * r)
            .collect(),
        c_ratio,
    };
    let (y, feasible) = probe.find_feasible(isotropic_start(&problem.block_sizes), 20_000);
    if feasible {
        return Ok(probe.x_of(&y));
    }
    let slacks = probe.slacks(&y);
    let (j, _) = probe.max_violation(&slacks);
    Err(Error::Infeasible {
        constraint: problem.constraints[j].name.clone(),
        violation: (-slacks[j] / probe.c_ratio[j]).max(0.0),
    })
}

/// Maximizes `problem.objective` subject to its constraints over the PSD
/// blocks. Infeasible constraint sets are reported as [`Error::Infeasible`]
/// naming the most violated constraint after the feasibility phase.
pub fn maximize_psd(
    problem: &PsdProblem<'_>,
    start: Option<&[CMat]>,
    options: &SolveOptions,
) -> Result<(Vec<CMat>, SolveReport)> {
    let set = problem.set;
    if !(set.budget > 0.0) {
        return Err(Error::InvalidArgument("power budget must be positive".into()));
    }
    if problem.block_sizes.is_empty() || problem.block_sizes.contains(&0) {
        return Err(Error::InvalidArgument("block sizes must be positive".into()));
    }
    let power = set.budget;
    let tolerances: Vec<f64> = problem
        .constraints
        .iter()
        .map(|con| options.constraint_tol.unwrap_or(con.tolerance))
        .collect();
    let mut starts: Vec<Blocks> = Vec::new();
    match start {
        Some(s) => {
            if s.len() != problem.block_sizes.len()
                || s.iter().zip(&problem.block_sizes).any(|(b, &n)| b.nrows() != n || b.ncols() != n)
            {
                return Err(Error::Dimension("start blocks do not match block sizes".into()));
            }
            let scaled: Blocks = s.iter().map(|b| b * c(1.0 / power, 0.0)).collect();
            starts.push(project_blocks(&scaled, 1.0, set.equality));
        }
        None => starts.push(isotropic_start(&problem.block_sizes)),
    }
    let c_ratio = constraint_ratios(problem, power, start);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    while starts.len() < options.starts.max(1) {
        starts.push(random_start(&problem.block_sizes, &mut rng, set.equality));
    }

    let mut best: Option<(Blocks, SolveReport)> = None;
    let mut last_infeasible: Option<(String, f64)> = None;
    for y0 in starts {
        let probe = Normalized {
            problem,
            power,
            f_scale: 1.0,
            tolerances: tolerances.iter().zip(&c_ratio).map(|(t, r)| t * r).collect(),
            c_ratio: c_ratio.clone(),
        };
        let (y_feas, feasible) = probe.find_feasible(y0.clone(), 20_000);
        if !feasible {
            let slacks = probe.slacks(&y_feas);
            let (j, _) = probe.max_violation(&slacks);
            last_infeasible = Some((problem.constraints[j].name.clone(), (-slacks[j] / c_ratio[j]).max(0.0)));
            continue;
        }
        let f_scale = objective_scale(problem, &probe, &y_feas);
        let normalized = Normalized { f_scale, ..probe };
        // The feasibility phase only certifies feasibility: its output tends
        // to sit near the cone boundary where CRB-type objectives are badly
        // conditioned, so the original start is tried first.
        let from_start = if normalized.objective(&y0).is_finite() {
            let (y, report) = normalized.solve_from(y0, options, 0);
            let ok = report.converged && normalized.satisfied(&normalized.slacks(&y));
            Some((y, report, ok))
        } else {
            None
        };
        let (y, mut report) = match from_start {
            Some((y, report, true)) => (y, report),
            other => {
                let y_in = normalized.pull_inward(y_feas, &problem.block_sizes);
                let (y, report) = normalized.solve_from(y_in, options, 0);
                match other {
                    Some((y_s, report_s, _))
                        if !report.converged
                            && normalized.satisfied(&normalized.slacks(&y_s))
                            && normalized.objective(&y_s) < normalized.objective(&y) =>
                    {
                        (y_s, report_s)
                    }
                    _ => (y, report),
                }
            }
        };
        let x = normalized.x_of(&y);
        report.objective_value = problem.objective.value(&x);
        report.constraint_residuals = problem
            .constraints
            .iter()
            .map(|con| con.residual(con.functional.value(&x)))
            .collect();
        report.global_optimal = report.converged && options.convex;
        let better = match &best {
            None => true,
            Some((_, b)) => {
                let feasible_now = normalized.satisfied(&normalized.slacks(&y));
                let b_feasible = b.constraint_residuals.iter().zip(&tolerances).all(|(r, t)| r <= t);
                (feasible_now && !b_feasible)
                    || (feasible_now == b_feasible && report.objective_value > b.objective_value)
            }
        };
        if better {
            best = Some((x, report));
        }
    }
    match best {
        Some(b) => Ok(b),
        None => {
            let (constraint, violation) = last_infeasible.unwrap_or_default();
            Err(Error::Infeasible { constraint, violation })
        }
    }
}

/// Minimizes instead of maximizes; the report's objective is in original units.
pub fn minimize_psd(
    problem: &PsdProblem<'_>,
    start: Option<&[CMat]>,
    options: &SolveOptions,
) -> Result<(Vec<CMat>, SolveReport)> {
    let negated = super::functional::Scaled {
        inner: problem.objective,
        factor: -1.0,
    };
    let flipped = PsdProblem {
        objective: &negated,
        constraints: problem.constraints,
        block_sizes: problem.block_sizes.clone(),
        set: problem.set,
    };
    let (x, mut report) = maximize_psd(&flipped, start, options)?;
    report.objective_value = -report.objective_value;
    for t in &mut report.trace {
        t.objective = -t.objective;
    }
    Ok((x, report))
}

/// Single-covariance convenience wrapper over [`maximize_psd`].
pub fn maximize_covariance(
    objective: &dyn Functional,
    constraints: &[ConstraintSpec],
    n: usize,
    budget: f64,
    options: &SolveOptions,
) -> Result<(TransmitCovariance, SolveReport)> {
    let problem = PsdProblem {
        objective,
        constraints,
        block_sizes: vec![n],
        set: FeasibleSet::at_most(budget),
    };
    let (mut x, report) = maximize_psd(&problem, None, options)?;
    Ok((TransmitCovariance::new_unchecked(x.remove(0)), report))
}
