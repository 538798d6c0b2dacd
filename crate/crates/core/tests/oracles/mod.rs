//! Reference computations that do not go through the solver. Shared by
//! the core test suites and the CLI acceptance suite.
#![allow(dead_code)]

use iscpt::error::Error;
use iscpt::functionals::{energy_of_total, rate_of_total, trm_crb_of_total};
use iscpt::linalg::{c, identity, inverse_hpd, psd_sqrt, CMat, HermitianEigen};
use iscpt::metrics::{crb_trm, PointTargetModel};
use iscpt::pareto::{vertex_power, vertex_sensing};
use iscpt::metrics::harvested_energy;
use iscpt::scenario::{sample_channel, steering_vector, ChannelModel, ErSpec, Scenario, ScenarioBuilder};
use iscpt::solver::{maximize_covariance, ConstraintSpec, SolveOptions, SolveReport};
use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Circularly symmetric Gaussian entries with variance `var`.
pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, var: f64) -> CMat {
    let s = (var / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(s * re, s * im)
    })
}

/// Full-rank PSD matrix with trace `power`.
pub fn random_psd(seed: u64, n: usize, power: f64) -> CMat {
    let g = sample_channel(seed, ChannelModel::Rayleigh, n, n);
    let s = &g * g.adjoint() + identity(n) * c(0.05, 0.0);
    let tr: f64 = (0..n).map(|i| s[(i, i)].re).sum();
    s * c(power / tr, 0.0)
}

/// PSD matrix of random rank with trace `power`.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, power: f64) -> CMat {
    let rank = rng.random_range(1..=n);
    let g = sample_channel(rng.random(), ChannelModel::Rayleigh, n, rank);
    let s = &g * g.adjoint();
    let tr: f64 = (0..n).map(|i| s[(i, i)].re).sum();
    s * c(power / tr, 0.0)
}

/// Empirical MSE of the least-squares estimate of an n_rx × N response
/// from L snapshots X with XXᴴ = L S.
pub fn ls_trm_mse(rng: &mut ChaCha8Rng, s: &CMat, noise: f64, l: usize, n_rx: usize, draws: usize) -> f64 {
    let n = s.nrows();
    // X = √L S^{1/2} U with U (N×L) having orthonormal rows
    let q = gaussian(rng, l, n, 1.0).qr().q();
    let x = psd_sqrt(s) * q.adjoint() * c((l as f64).sqrt(), 0.0);
    let gram_inv = inverse_hpd(&(&x * x.adjoint())).unwrap();
    let h = gaussian(rng, n_rx, n, 1.0);
    let mut mse = 0.0;
    for _ in 0..draws {
        let y = &h * &x + gaussian(rng, n_rx, l, noise);
        let h_ls = y * x.adjoint() * &gram_inv;
        mse += (h_ls - &h).norm_squared() / draws as f64;
    }
    mse
}

/// FIM of (θ, Re b, Im b) from central differences of the noiseless echo.
pub fn finite_difference_fisher(model: &PointTargetModel, s: &CMat) -> Matrix3<f64> {
    let l = model.snapshots as f64;
    let x = psd_sqrt(s) * c(l.sqrt(), 0.0);
    let mean = |p: [f64; 3]| {
        let ar = steering_vector(&model.rx, p[0]);
        let at = steering_vector(&model.tx, p[0]);
        (&ar * at.adjoint() * &x) * c(p[1], p[2])
    };
    let base = [model.angle, model.reflection.re, model.reflection.im];
    let h = 1e-5;
    let derivs: Vec<CMat> = (0..3)
        .map(|k| {
            let (mut up, mut down) = (base, base);
            up[k] += h;
            down[k] -= h;
            (mean(up) - mean(down)) * c(1.0 / (2.0 * h), 0.0)
        })
        .collect();
    Matrix3::from_fn(|p, q| 2.0 / model.noise * (derivs[p].adjoint() * &derivs[q]).trace().re)
}

pub const NOISE: f64 = 0.5;
pub const SENSE: (f64, usize, usize) = (1.0, 16, 2);

/// Rate maximization over 2×2 covariances with a TRM-CRB ceiling and an
/// energy floor.
pub struct Instance {
    pub h: CMat,
    pub er: ErSpec,
    pub power: f64,
    pub crb_bound: f64,
    pub energy_bound: f64,
}

pub fn instance(seed: u64) -> Instance {
    let power = 2.0;
    let er = ErSpec {
        channel: sample_channel(seed + 100, ChannelModel::Rayleigh, 1, 2),
        eh_efficiency: 0.5,
        required_energy: None,
    };
    let g = er.channel.adjoint() * &er.channel;
    let e_max = 0.5 * power * HermitianEigen::new(&g).max();
    let crb_min = crb_trm(&(identity(2) * c(power / 2.0, 0.0)), SENSE.0, SENSE.1, SENSE.2);
    Instance {
        h: sample_channel(seed, ChannelModel::Rayleigh, 2, 2),
        er,
        power,
        crb_bound: 1.6 * crb_min,
        energy_bound: 0.6 * e_max,
    }
}

pub fn solve(inst: &Instance) -> Result<(CMat, SolveReport), Error> {
    let objective = rate_of_total(inst.h.clone(), NOISE);
    let constraints = vec![
        ConstraintSpec::at_most("crb", trm_crb_of_total(SENSE.0, SENSE.1, SENSE.2), inst.crb_bound),
        ConstraintSpec::at_least("energy", energy_of_total(&inst.er, 1), inst.energy_bound),
    ];
    let (s, report) = maximize_covariance(&objective, &constraints, 2, inst.power, &SolveOptions::default())?;
    Ok((s.into_inner(), report))
}

/// Exhaustive search over S = [[a, z], [z̄, P - a]]. Rate and energy grow
/// with power and the CRB falls, so the optimum uses the full budget.
/// With G = HᴴH: det(I + SG/σ²) = 1 + tr(SG)/σ² + det S det G/σ⁴ and
/// tr S⁻¹ = P / det S.
pub fn brute_force(inst: &Instance) -> f64 {
    let p = inst.power;
    let g = inst.h.adjoint() * &inst.h;
    let ge = inst.er.channel.adjoint() * &inst.er.channel * c(inst.er.eh_efficiency, 0.0);
    let det_g = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
    let k = SENSE.0 * SENSE.2 as f64 / SENSE.1 as f64;
    let min_det = k * p / inst.crb_bound;
    let eval = |a: f64, re: f64, im: f64| -> Option<f64> {
        let det_s = a * (p - a) - re * re - im * im;
        if !(a >= 0.0 && a <= p && det_s >= min_det) {
            return None;
        }
        let cross = |m: &CMat| 2.0 * (re * m[(1, 0)].re - im * m[(1, 0)].im);
        let energy = a * ge[(0, 0)].re + (p - a) * ge[(1, 1)].re + cross(&ge);
        if energy < inst.energy_bound {
            return None;
        }
        let tr_sg = a * g[(0, 0)].re + (p - a) * g[(1, 1)].re + cross(&g);
        Some((1.0 + tr_sg / NOISE + det_s * det_g / (NOISE * NOISE)).log2())
    };
    let half = p / 2.0;
    let (mut center, mut radius) = ([half, 0.0, 0.0], [half, half, half]);
    let mut best = f64::NEG_INFINITY;
    let steps = 60;
    for _ in 0..12 {
        let mut arg = center;
        for i in 0..=steps {
            for j in 0..=steps {
                for l in 0..=steps {
                    let t = |v: usize, d: usize| center[d] + radius[d] * (2.0 * v as f64 / steps as f64 - 1.0);
                    let x = [t(i, 0), t(j, 1), t(l, 2)];
                    if let Some(v) = eval(x[0], x[1], x[2]) {
                        if v > best {
                            best = v;
                            arg = x;
                        }
                    }
                }
            }
        }
        center = arg;
        radius = radius.map(|r| r * 0.25);
    }
    best
}

pub fn scenario_crb(s: &Scenario, cov: &CMat) -> f64 {
    crb_trm(cov, s.sensing_noise, s.snapshots, s.n_rx_sense())
}

/// Seeded 4-antenna scenario with one 2-antenna IR.
pub fn pareto_scenario() -> Scenario {
    let mut b = ScenarioBuilder::new(4);
    b.ir_antennas = vec![2];
    b.ir_noise = 0.2;
    b.build(21)
}

/// Γ from the isotropic CRB up to unconstrained, E from zero up to the
/// power-vertex energy.
pub fn pareto_grids(s: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let crb_min = scenario_crb(s, &vertex_sensing(s));
    let e_max = harvested_energy(&s.ers[0], &vertex_power(s, 0).unwrap()).unwrap();
    let crb_grid = vec![crb_min, 1.2 * crb_min, 1.5 * crb_min, 2.0 * crb_min, 4.0 * crb_min, f64::INFINITY];
    let energy_grid = (0..6).map(|j| e_max * j as f64 / 5.0).collect();
    (crb_grid, energy_grid)
}

/// 2-antenna scenario with real channels.
pub fn real_instance(seed: u64) -> Scenario {
    let mut b = ScenarioBuilder::new(2);
    b.ir_antennas = vec![2];
    b.ir_noise = 0.3;
    let mut s = b.build(seed);
    s.irs[0].channel = s.irs[0].channel.map(|z| c(z.re, 0.0));
    s.ers[0].channel = s.ers[0].channel.map(|z| c(z.re, 0.0));
    s
}

/// The 6×6 grid used on [`real_instance`], kept clear of the exact
/// feasibility edges where the ±1e-6 constraint tolerance decides a cell.
pub fn real_grids(s: &Scenario) -> ([f64; 6], [f64; 6]) {
    let crb_min = scenario_crb(s, &identity(2));
    let e_max = harvested_energy(&s.ers[0], &vertex_power(s, 0).unwrap()).unwrap();
    (
        [1.05, 1.3, 1.6, 2.0, 3.0, 6.0].map(|f| f * crb_min),
        [0.0, 0.2, 0.4, 0.6, 0.75, 0.9].map(|f| f * e_max),
    )
}

/// Dense search over real S = [[a, b], [b, P - a]]. For real channels the
/// problem is invariant under conjugation and concave, so a real optimum
/// exists; rate and energy rise with power and the CRB falls, so it uses
/// the full budget.
pub fn real_grid_oracle(s: &Scenario, crb_bound: f64, energy_bound: f64) -> Option<f64> {
    let p = s.power_budget;
    let ir = &s.irs[0];
    let g = ir.channel.adjoint() * &ir.channel;
    let ge = s.ers[0].channel.adjoint() * &s.ers[0].channel * c(s.ers[0].eh_efficiency, 0.0);
    let det_g = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
    let k = s.sensing_noise * s.n_rx_sense() as f64 / s.snapshots as f64;
    let sigma = ir.noise_power;
    let eval = |a: f64, b: f64| -> Option<f64> {
        let det = a * (p - a) - b * b;
        if !(a >= 0.0 && a <= p && det >= 0.0) || k * p > crb_bound * det {
            return None;
        }
        let lin = |m: &CMat| a * m[(0, 0)].re + (p - a) * m[(1, 1)].re + 2.0 * b * m[(1, 0)].re;
        if lin(&ge) < energy_bound {
            return None;
        }
        Some((1.0 + lin(&g) / sigma + det * det_g / (sigma * sigma)).log2())
    };
    let (mut center, mut radius) = ([p / 2.0, 0.0], [p / 2.0; 2]);
    let mut best: Option<f64> = None;
    let steps = 400;
    for _ in 0..10 {
        let mut arg = center;
        for i in 0..=steps {
            for j in 0..=steps {
                let t = |v: usize, d: usize| center[d] + radius[d] * (2.0 * v as f64 / steps as f64 - 1.0);
                if let Some(v) = eval(t(i, 0), t(j, 1)) {
                    if best.is_none_or(|b| v > b) {
                        best = Some(v);
                        arg = [t(i, 0), t(j, 1)];
                    }
                }
            }
        }
        center = arg;
        radius = radius.map(|r| r * 0.1);
    }
    best
}

/// `k` single-antenna users whose IR and ER share a channel.
pub fn colocated(n: usize, k: usize, seed: u64) -> Scenario {
    let mut b = ScenarioBuilder::new(n);
    b.ir_antennas = vec![1; k];
    b.er_antennas = vec![1; k];
    b.ir_noise = 0.1;
    let mut s = b.build(seed);
    for (er, ir) in s.ers.iter_mut().zip(&s.irs) {
        er.channel = ir.channel.clone();
    }
    s
}

/// P(X ≥ k) for X ~ Binomial(n, 1/2).
pub fn sign_test_p(k: usize, n: usize) -> f64 {
    let mut coef = 1.0f64;
    let mut tail = 0.0;
    for i in 0..=n {
        if i > 0 {
            coef = coef * (n - i + 1) as f64 / i as f64;
        }
        if i >= k {
            tail += coef;
        }
    }
    tail / 2f64.powi(n as i32)
}
