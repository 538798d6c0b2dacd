//! RF-to-DC harvesting into a storage capacitor feeding a resistive load.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Received beam power at the harvester in the bundled link-budget demo:
/// 2 W transmitted, about 4 dBm measured at 2 m.
pub const LINK_BUDGET_RX_DBM: f64 = 4.0;
pub const LINK_BUDGET_TX_WATTS: f64 = 2.0;
pub const LINK_BUDGET_DISTANCE_M: f64 = 2.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarvesterConfig {
    /// `(input dBm, efficiency)` knots, strictly increasing in dBm; held
    /// constant outside the knot range.
    pub efficiency_curve: Vec<(f64, f64)>,
    pub capacitance: f64,
    pub cap_rating: f64,
    pub load: f64,
    pub timestep: f64,
    /// Voltage below which the rectifier behaves as a current source.
    pub v_floor: f64,
}

impl Default for HarvesterConfig {
    fn default() -> Self {
        Self {
            efficiency_curve: vec![(-20.0, 0.0), (0.0, 0.5), (10.0, 0.6)],
            capacitance: 0.1,
            cap_rating: 4.2,
            load: 198.7,
            timestep: 0.1,
            v_floor: 0.05,
        }
    }
}

impl HarvesterConfig {
    pub fn validate(&self) -> Result<()> {
        let curve = &self.efficiency_curve;
        if curve.is_empty() {
            return Err(Error::Validation("efficiency_curve needs at least one knot".into()));
        }
        if curve.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Validation("efficiency_curve knots must be strictly increasing in dBm".into()));
        }
        if curve.iter().any(|(_, e)| !(0.0..=1.0).contains(e)) {
            return Err(Error::Validation("efficiency_curve values must lie in [0, 1]".into()));
        }
        if curve.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::Validation("efficiency_curve must be nondecreasing".into()));
        }
        for (name, v) in [
            ("capacitance", self.capacitance),
            ("cap_rating", self.cap_rating),
            ("load", self.load),
            ("timestep", self.timestep),
            ("v_floor", self.v_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite")));
            }
        }
        let limit = self.load * self.capacitance / 100.0;
        if self.timestep > limit {
            return Err(Error::Validation(format!("timestep {} exceeds RC/100 = {limit}", self.timestep)));
        }
        Ok(())
    }

    pub fn efficiency(&self, dbm: f64) -> f64 {
        let curve = &self.efficiency_curve;
        let (first, last) = (curve[0], curve[curve.len() - 1]);
        if !(dbm > first.0) {
            return first.1;
        }
        if dbm >= last.0 {
            return last.1;
        }
        let i = curve.partition_point(|k| k.0 <= dbm);
        let ((x0, y0), (x1, y1)) = (curve[i - 1], curve[i]);
        y0 + (y1 - y0) * (dbm - x0) / (x1 - x0)
    }

    /// DC power delivered by the rectifier for an RF input of `dbm`.
    pub fn dc_power(&self, dbm: f64) -> f64 {
        self.efficiency(dbm) * dbm_to_watts(dbm)
    }

    /// Smallest RF input (dBm) whose DC output reaches `p_dc` watts, by
    /// bisection on the nondecreasing map `dbm ↦ η(dbm)·p(dbm)`.
    pub fn input_for_dc_power(&self, p_dc: f64) -> Result<f64> {
        let (mut lo, mut hi) = (-100.0, 100.0);
        if self.dc_power(hi) < p_dc {
            return Err(Error::InvalidArgument(format!("DC power {p_dc} W unreachable below {hi} dBm")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.dc_power(mid) >= p_dc {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestTrace {
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub power: Vec<f64>,
    pub dc_in: Vec<f64>,
}

impl HarvestTrace {
    /// Energy dissipated in the load.
    pub fn load_energy(&self, dt: f64) -> f64 {
        self.power.iter().sum::<f64>() * dt
    }

    pub fn dc_energy(&self, dt: f64) -> f64 {
        self.dc_in.iter().sum::<f64>() * dt
    }

    /// Writes `time,V,I,P`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,V,I,P")?;
        for k in 0..self.time.len() {
            writeln!(
                out,
                "{:.6},{:.10e},{:.10e},{:.10e}",
                self.time[k], self.voltage[k], self.current[k], self.power[k]
            )?;
        }
        Ok(())
    }
}

/// Explicit Euler on `C dV/dt = P_dc / max(V, V_floor) - V/R`, starting
/// from an empty capacitor, one step per input sample. Row `k` reports the
/// state after step `k`; the load power of that step is taken at the
/// voltage it started from.
pub fn harvest_dc(cfg: &HarvesterConfig, p_in_dbm: &[f64]) -> Result<HarvestTrace> {
    cfg.validate()?;
    let n = p_in_dbm.len();
    let mut trace = HarvestTrace {
        time: Vec::with_capacity(n),
        voltage: Vec::with_capacity(n),
        current: Vec::with_capacity(n),
        power: Vec::with_capacity(n),
        dc_in: Vec::with_capacity(n),
    };
    let (r, dt) = (cfg.load, cfg.timestep);
    let mut v = 0.0f64;
    for (k, &dbm) in p_in_dbm.iter().enumerate() {
        let p_dc = cfg.dc_power(dbm);
        let charge = p_dc / v.max(cfg.v_floor);
        let load_power = v * v / r;
        v = (v + dt / cfg.capacitance * (charge - v / r)).clamp(0.0, cfg.cap_rating);
        trace.time.push((k + 1) as f64 * dt);
        trace.voltage.push(v);
        trace.current.push(v / r);
        trace.power.push(load_power);
        trace.dc_in.push(p_dc);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_curve_knots() {
        let cfg = HarvesterConfig::default();
        assert_eq!(cfg.efficiency(-30.0), 0.0);
        assert!((cfg.efficiency(-10.0) - 0.25).abs() < 1e-15);
        assert!((cfg.efficiency(5.0) - 0.55).abs() < 1e-15);
        assert_eq!(cfg.efficiency(20.0), 0.6);
    }

    #[test]
    fn rejects_coarse_timestep() {
        let cfg = HarvesterConfig { timestep: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn input_for_dc_power_inverts() {
        let cfg = HarvesterConfig::default();
        let dbm = cfg.input_for_dc_power(2e-3).unwrap();
        assert!((cfg.dc_power(dbm) - 2e-3).abs() < 1e-12);
    }
}
