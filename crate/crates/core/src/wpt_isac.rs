//! Wireless-powered ISAC: a multi-antenna beacon charges devices during a
//! fraction `τ` of the frame; each device then spends the harvested energy
//! on its own sensing-and-communication transmission.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{c, identity, quad_form, trace_re, vec_norm, CMat, CVec};
use crate::metrics::trm_mse_ls;
use crate::scenario::{derive_seed, sample_channel, ChannelModel};
use crate::solver::{minimize_psd, ConstraintSpec, FeasibleSet, LinearFunctional, PsdProblem, SolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub n_antennas: usize,
    /// Beacon-to-device channel (beacon antennas).
    pub harvest_channel: CVec,
    /// Device-to-access-point channel (device antennas).
    pub comm_channel: CVec,
    /// Receive antennas of the device's sensing array.
    pub n_rx_sense: usize,
    pub sinr_req: f64,
    pub comm_noise: f64,
    pub sensing_noise: f64,
}

impl DeviceSpec {
    fn validate(&self, beacon_antennas: usize, index: usize) -> Result<()> {
        let err = |m: String| Err(Error::Validation(format!("device {index}: {m}")));
        if self.n_antennas == 0 || self.n_rx_sense == 0 {
            return err("antenna counts must be positive".into());
        }
        if self.comm_channel.len() != self.n_antennas {
            return err(format!("comm channel has {} entries, expected {}", self.comm_channel.len(), self.n_antennas));
        }
        if self.harvest_channel.len() != beacon_antennas {
            return err(format!("harvest channel has {} entries, expected {beacon_antennas}", self.harvest_channel.len()));
        }
        if !(self.sinr_req >= 0.0) {
            return err("sinr requirement must be nonnegative".into());
        }
        if !(self.comm_noise > 0.0 && self.sensing_noise > 0.0) {
            return err("noise powers must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WptIsacScenario {
    pub beacon_antennas: usize,
    pub beacon_power: f64,
    pub devices: Vec<DeviceSpec>,
    /// Charging fraction used by [`evaluate_at`]; [`joint_allocate`] searches its own.
    pub tau: f64,
    pub eh_efficiency: f64,
    pub snapshots: usize,
}

impl WptIsacScenario {
    pub fn validate(&self) -> Result<()> {
        if self.beacon_antennas == 0 {
            return Err(Error::Validation("beacon needs at least one antenna".into()));
        }
        if !(self.beacon_power > 0.0) {
            return Err(Error::Validation("beacon power must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Validation(format!("time split {} outside (0, 1)", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.eh_efficiency) {
            return Err(Error::Validation("harvesting efficiency must lie in [0, 1]".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::Validation("snapshots must be positive".into()));
        }
        for (i, d) in self.devices.iter().enumerate() {
            d.validate(self.beacon_antennas, i)?;
        }
        Ok(())
    }
}

/// Seeded random scenarios: i.i.d. Rayleigh channels, with every comm
/// channel rescaled to squared norm `comm_gain` so that devices with
/// different antenna counts see the same total gain.
#[derive(Debug, Clone)]
pub struct WptIsacBuilder {
    pub beacon_antennas: usize,
    pub beacon_power: f64,
    pub device_antennas: Vec<usize>,
    pub n_rx_sense: usize,
    pub sinr_req: f64,
    pub comm_noise: f64,
    pub sensing_noise: f64,
    pub harvest_gain: f64,
    pub comm_gain: f64,
    pub tau: f64,
    pub eh_efficiency: f64,
    pub snapshots: usize,
}

impl WptIsacBuilder {
    pub fn new(beacon_antennas: usize, device_antennas: Vec<usize>) -> Self {
        Self {
            beacon_antennas,
            beacon_power: 1.0,
            device_antennas,
            n_rx_sense: 2,
            sinr_req: 1.0,
            comm_noise: 1e-2,
            sensing_noise: 1e-2,
            harvest_gain: 1.0,
            comm_gain: 1.0,
            tau: 0.5,
            eh_efficiency: 0.5,
            snapshots: 16,
        }
    }

    pub fn build(&self, seed: u64) -> WptIsacScenario {
        let devices = self
            .device_antennas
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let g = sample_channel(derive_seed(seed, 11, i as u64), ChannelModel::Rayleigh, self.beacon_antennas, 1);
                let h = sample_channel(derive_seed(seed, 12, i as u64), ChannelModel::Rayleigh, n, 1);
                let g: CVec = g.column(0).into_owned() * c(self.harvest_gain.sqrt(), 0.0);
                let h: CVec = h.column(0).into_owned();
                let h = &h * c(self.comm_gain.sqrt() / vec_norm(&h), 0.0);
                DeviceSpec {
                    n_antennas: n,
                    harvest_channel: g,
                    comm_channel: h,
                    n_rx_sense: self.n_rx_sense,
                    sinr_req: self.sinr_req,
                    comm_noise: self.comm_noise,
                    sensing_noise: self.sensing_noise,
                }
            })
            .collect();
        WptIsacScenario {
            beacon_antennas: self.beacon_antennas,
            beacon_power: self.beacon_power,
            devices,
            tau: self.tau,
            eh_efficiency: self.eh_efficiency,
            snapshots: self.snapshots,
        }
    }
}

/// Device transmit power `ζ τ gᴴ S_b g / (1 - τ)` that spends the energy
/// harvested in the charging phase over the ISAC phase.
pub fn harvested_budget(beacon_cov: &CMat, device: &DeviceSpec, tau: f64, efficiency: f64) -> Result<f64> {
    if beacon_cov.nrows() != device.harvest_channel.len() || !beacon_cov.is_square() {
        return Err(Error::Dimension(format!(
            "beacon covariance is {}x{}, harvest channel has {} entries",
            beacon_cov.nrows(),
            beacon_cov.ncols(),
            device.harvest_channel.len()
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("time split {tau} outside (0, 1)")));
    }
    Ok(efficiency * tau * quad_form(beacon_cov, &device.harvest_channel).max(0.0) / (1.0 - tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceMetrics {
    pub mse: f64,
    pub sinr: f64,
}

/// `S_d = β (p/n) I + (1 - β) p u uᴴ` with `u` matched to the comm channel.
pub fn device_covariance(device: &DeviceSpec, power: f64, beta: f64) -> CMat {
    let n = device.n_antennas;
    let h = &device.comm_channel;
    let u = h * c(1.0 / vec_norm(h), 0.0);
    identity(n) * c(beta * power / n as f64, 0.0) + (&u * u.adjoint()) * c((1.0 - beta) * power, 0.0)
}

pub fn device_design(device: &DeviceSpec, power: f64, beta: f64, snapshots: usize) -> Result<(CMat, DeviceMetrics)> {
    if !(power > 0.0) {
        return Err(Error::InvalidArgument("device power must be positive".into()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("mixing weight {beta} outside [0, 1]")));
    }
    let s = device_covariance(device, power, beta);
    let mse = trm_mse_ls(&s, device.sensing_noise, snapshots, device.n_rx_sense);
    let sinr = quad_form(&s, &device.comm_channel) / device.comm_noise;
    Ok((s, DeviceMetrics { mse, sinr }))
}

/// Largest `β ∈ [0, 1]` meeting the SINR requirement at power `p`, or `None`
/// when even the matched beam (`β = 0`) falls short. SINR is affine in `β`:
/// `p‖h‖²/σ² · (1 - β (1 - 1/n))`.
pub fn max_isotropy(device: &DeviceSpec, power: f64) -> Option<f64> {
    let full = power * vec_norm(&device.comm_channel).powi(2) / device.comm_noise;
    if full < device.sinr_req {
        return None;
    }
    let n = device.n_antennas as f64;
    if n == 1.0 || full == 0.0 {
        return Some(1.0);
    }
    Some(((1.0 - device.sinr_req / full) / (1.0 - 1.0 / n)).clamp(0.0, 1.0))
}

/// Beacon covariance maximizing the smallest `gᴴ S g` over devices. The
/// problem is homogeneous, so it is solved as `min tr S` subject to
/// `g_dᴴ S g_d ≥ 1` and rescaled to the beacon power.
pub fn max_min_beacon(scenario: &WptIsacScenario, options: &SolveOptions) -> Result<CMat> {
    let n = scenario.beacon_antennas;
    let power = scenario.beacon_power;
    let weakest = scenario
        .devices
        .iter()
        .map(|d| vec_norm(&d.harvest_channel).powi(2))
        .fold(f64::INFINITY, f64::min);
    if scenario.devices.is_empty() {
        return Ok(identity(n) * c(power / n as f64, 0.0));
    }
    if !(weakest > 0.0) {
        return Err(Error::Infeasible {
            constraint: "beacon harvest".into(),
            violation: 1.0,
        });
    }
    let objective = LinearFunctional::new(vec![Some(identity(n))]);
    let constraints: Vec<ConstraintSpec> = scenario
        .devices
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let g = &d.harvest_channel;
            ConstraintSpec::at_least(format!("energy[{i}]"), LinearFunctional::new(vec![Some(g * g.adjoint())]), 1.0)
        })
        .collect();
    // the isotropic point with trace n/min‖g‖² is feasible, so twice that
    // budget never binds
    let budget = 2.0 * n as f64 / weakest;
    let problem = PsdProblem {
        objective: &objective,
        constraints: &constraints,
        block_sizes: vec![n],
        set: FeasibleSet::at_most(budget),
    };
    let start = [identity(n) * c(1.0 / weakest, 0.0)];
    let (mut blocks, _) = minimize_psd(&problem, Some(&start), options)?;
    let s = blocks.remove(0);
    Ok(&s * c(power / trace_re(&s), 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOutcome {
    pub power: f64,
    pub beta: f64,
    pub mse: f64,
    pub sinr: f64,
}

#[derive(Debug, Clone)]
pub struct Allocation {
    pub beacon_cov: CMat,
    pub tau: f64,
    pub devices: Vec<DeviceOutcome>,
    pub max_mse: f64,
    /// Objective evaluations spent by the τ search.
    pub evaluations: usize,
}

pub const TAU_RANGE: (f64, f64) = (0.05, 0.95);
const TAU_TOL: f64 = 1e-6;

/// Per-device outcome at a fixed `τ` and beacon covariance; `Err` names the
/// first device whose SINR cannot be met.
pub fn evaluate_at(scenario: &WptIsacScenario, beacon_cov: &CMat, tau: f64) -> Result<Vec<DeviceOutcome>> {
    scenario
        .devices
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let p = harvested_budget(beacon_cov, d, tau, scenario.eh_efficiency)?;
            let beta = (p > 0.0).then(|| max_isotropy(d, p)).flatten().ok_or_else(|| {
                let full = p * vec_norm(&d.comm_channel).powi(2) / d.comm_noise;
                Error::Infeasible {
                    constraint: format!("device {i} sinr"),
                    violation: (d.sinr_req - full) / d.sinr_req.max(1e-300),
                }
            })?;
            let (_, m) = device_design(d, p, beta, scenario.snapshots)?;
            Ok(DeviceOutcome { power: p, beta, mse: m.mse, sinr: m.sinr })
        })
        .collect()
}

fn max_mse(devices: &[DeviceOutcome]) -> f64 {
    devices.iter().map(|d| d.mse).fold(0.0, f64::max)
}

/// Minimizes the largest device MSE over the time split (golden-section
/// search on [`TAU_RANGE`]), the beacon covariance (max-min harvest) and the
/// per-device mixing weights (largest `β` meeting SINR).
pub fn joint_allocate(scenario: &WptIsacScenario, options: &SolveOptions) -> Result<Allocation> {
    scenario.validate()?;
    let beacon_cov = max_min_beacon(scenario, options)?;
    // the harvest grows with τ, so the upper end decides feasibility
    evaluate_at(scenario, &beacon_cov, TAU_RANGE.1)?;
    let mut evaluations = 0;
    let mut f = |tau: f64| {
        evaluations += 1;
        evaluate_at(scenario, &beacon_cov, tau).map_or(f64::INFINITY, |d| max_mse(&d))
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = TAU_RANGE;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > TAU_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    // the bracket endpoints are candidates too: the objective may be monotone
    let mut best = (f64::INFINITY, 0.5 * (a + b));
    for tau in [0.5 * (a + b), TAU_RANGE.0, TAU_RANGE.1] {
        let v = f(tau);
        if v < best.0 {
            best = (v, tau);
        }
    }
    let tau = best.1;
    let devices = evaluate_at(scenario, &beacon_cov, tau)?;
    Ok(Allocation {
        max_mse: max_mse(&devices),
        beacon_cov,
        tau,
        devices,
        evaluations,
    })
}

/// Writes `beacon_power,tau,device,p_d,beta,mse,sinr`, one row per device.
pub fn write_allocation_csv<W: Write>(rows: &[(f64, Allocation)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "beacon_power,tau,device,p_d,beta,mse,sinr")?;
    for (pb, alloc) in rows {
        for (i, d) in alloc.devices.iter().enumerate() {
            writeln!(
                out,
                "{pb},{:.10e},{i},{:.10e},{:.10e},{:.10e},{:.10e}",
                alloc.tau, d.power, d.beta, d.mse, d.sinr
            )?;
        }
    }
    Ok(())
}
