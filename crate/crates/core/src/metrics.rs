//! Sensing, communication and power-transfer performance functionals.
//!
//! Every functional used as an optimization objective or constraint also has
//! a `*_gradient` companion returning the Hermitian gradient with respect to
//! the covariance under `<A, B> = Re tr(Aᴴ B)`.

use std::f64::consts::LN_2;
use std::ops::Deref;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_deviation, hermitian_part, identity, inner, inverse_hpd, ln_det_hpd, quad_form,
    trace_re, CMat, CVec, HermitianEigen, C64,
};
use crate::scenario::{steering_derivative, steering_vector, ErSpec, IrSpec, Scenario, TargetSpec, UlaGeometry};

/// Hermitian PSD transmit covariance (watts).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance(CMat);

impl TransmitCovariance {
    /// Validates Hermitian symmetry and positive semidefiniteness (tolerance
    /// 1e-10 relative to the largest entry, floor 1).
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "covariance must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let dev = hermitian_deviation(&matrix);
        if dev > 1e-10 * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let matrix = hermitian_part(&matrix);
        let min_eig = HermitianEigen::new(&matrix).min();
        if min_eig < -1e-10 * scale {
            return Err(Error::Validation(format!(
                "covariance has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn new_unchecked(matrix: CMat) -> Self {
        Self(matrix)
    }

    pub fn isotropic(n: usize, power: f64) -> Self {
        Self(identity(n) * c(power / n as f64, 0.0))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.0)
    }

    pub fn check_budget(&self, power_budget: f64) -> Result<()> {
        if self.trace() > power_budget + 1e-8 {
            return Err(Error::Validation(format!(
                "covariance trace {} exceeds power budget {power_budget}",
                self.trace()
            )));
        }
        Ok(())
    }
}

impl Deref for TransmitCovariance {
    type Target = CMat;
    fn deref(&self) -> &CMat {
        &self.0
    }
}

/// Which sensing functional a design targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensingMetric {
    /// CRB of the extended-target response matrix (convex in `S`).
    #[default]
    Trm,
    /// CRB of the angle of the scenario's point target.
    PointTarget,
}

/// Evaluated sensing / communication / power metrics of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTriple {
    pub sensing_crb: f64,
    pub rate: f64,
    pub energy: Vec<f64>,
}

fn check_cols(what: &str, m: &CMat, n: usize) -> Result<()> {
    if m.ncols() != n {
        return Err(Error::Dimension(format!(
            "{what} has {} columns, covariance is {n}x{n}",
            m.ncols()
        )));
    }
    Ok(())
}

fn check_square(s: &CMat) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "covariance must be square, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Communication
// ---------------------------------------------------------------------------

/// `log2 det(I + H S Hᴴ / σ²)` in bits per channel use.
pub fn rate(h: &CMat, s: &CMat, noise: f64) -> Result<f64> {
    check_square(s)?;
    check_cols("channel", h, s.nrows())?;
    if !(noise > 0.0) {
        return Err(Error::InvalidArgument("noise power must be positive".into()));
    }
    let m = identity(h.nrows()) + h * s * h.adjoint() * c(1.0 / noise, 0.0);
    Ok((ln_det_hpd(&m) / LN_2).max(0.0))
}

pub fn rate_gradient(h: &CMat, s: &CMat, noise: f64) -> CMat {
    let m = identity(h.nrows()) * c(noise, 0.0) + h * s * h.adjoint();
    let inv = inverse_hpd(&m).expect("σ²I + HSHᴴ is positive definite");
    hermitian_part(&(h.adjoint() * inv * h)) * c(1.0 / LN_2, 0.0)
}

/// SINR of information receiver `k` under linear information beams, an
/// energy covariance `V` and power-splitting ratio `rho` (1 when separated).
///
/// `ρ|h_kᴴw_k|² / (ρ(Σ_{j≠k}|h_kᴴw_j|² + h_kᴴ V h_k) + σ_k²)`
pub fn sinr_ir(irs: &[IrSpec], k: usize, info_beams: &[CVec], energy_cov: &CMat, rho: f64) -> Result<f64> {
    sinr_ir_with(irs, k, info_beams, energy_cov, rho, false)
}

/// As [`sinr_ir`]; with `cancel_energy` the energy-beam term is removed from
/// the interference (energy signals known to the receiver).
pub fn sinr_ir_with(
    irs: &[IrSpec],
    k: usize,
    info_beams: &[CVec],
    energy_cov: &CMat,
    rho: f64,
    cancel_energy: bool,
) -> Result<f64> {
    let ir = irs
        .get(k)
        .ok_or_else(|| Error::InvalidArgument(format!("no information receiver {k}")))?;
    let w_k = info_beams
        .get(k)
        .ok_or_else(|| Error::Dimension(format!("no information beam for receiver {k}")))?;
    let h = ir.miso_vector()?;
    let n = h.len();
    if info_beams.iter().any(|w| w.len() != n) {
        return Err(Error::Dimension(format!("information beams must have length {n}")));
    }
    if energy_cov.nrows() != n || energy_cov.ncols() != n {
        return Err(Error::Dimension(format!("energy covariance must be {n}x{n}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument("splitting ratio must lie in [0, 1]".into()));
    }
    let gain = |w: &CVec| h.dotc(w).norm_sqr();
    let signal = gain(w_k);
    let mut interference: f64 = info_beams
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, w)| gain(w))
        .sum();
    if !cancel_energy {
        interference += quad_form(energy_cov, &h);
    }
    Ok(rho * signal / (rho * interference + ir.noise_power))
}

// ---------------------------------------------------------------------------
// Power transfer
// ---------------------------------------------------------------------------

/// `ζ tr(H_E S H_Eᴴ)`.
pub fn harvested_energy(er: &ErSpec, s: &CMat) -> Result<f64> {
    check_square(s)?;
    check_cols("energy channel", &er.channel, s.nrows())?;
    let gram = er.channel.adjoint() * &er.channel;
    Ok((er.eh_efficiency * inner(&gram, s)).max(0.0))
}

pub fn energy_gradient(er: &ErSpec) -> CMat {
    hermitian_part(&(er.channel.adjoint() * &er.channel)) * c(er.eh_efficiency, 0.0)
}

// ---------------------------------------------------------------------------
// Sensing
// ---------------------------------------------------------------------------

/// Geometry and noise of the mono-static point-target model
/// `Y = α a_r(θ) a_t(θ)ᴴ X + Z`, `XXᴴ = L S`.
#[derive(Debug, Clone, Copy)]
pub struct PointTargetModel {
    pub tx: UlaGeometry,
    pub rx: UlaGeometry,
    pub angle: f64,
    pub reflection: C64,
    pub snapshots: usize,
    pub noise: f64,
}

impl PointTargetModel {
    pub fn from_scenario(scenario: &Scenario, target: &TargetSpec) -> Result<Self> {
        match target {
            TargetSpec::Point { angle, reflection } => Ok(Self {
                tx: scenario.tx_geometry,
                rx: scenario.sense_rx_geometry,
                angle: *angle,
                reflection: *reflection,
                snapshots: scenario.snapshots,
                noise: scenario.sensing_noise,
            }),
            TargetSpec::Extended { .. } => Err(Error::InvalidArgument(
                "point-target CRB requested for an extended target".into(),
            )),
        }
    }

    /// Response matrix `A(θ) = a_r a_tᴴ` and its angle derivative.
    pub fn response(&self, theta: f64) -> (CMat, CMat) {
        let ar = steering_vector(&self.rx, theta);
        let at = steering_vector(&self.tx, theta);
        let dar = steering_derivative(&self.rx, theta);
        let dat = steering_derivative(&self.tx, theta);
        let a = &ar * at.adjoint();
        let da = &dar * at.adjoint() + &ar * dat.adjoint();
        (a, da)
    }

    /// Fisher information over `(θ, Re α, Im α)`.
    pub fn fisher(&self, s: &CMat) -> Result<Matrix3<f64>> {
        check_square(s)?;
        if s.nrows() != self.tx.num_elements {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, transmit array has {} elements",
                s.nrows(),
                s.ncols(),
                self.tx.num_elements
            )));
        }
        let (a, da) = self.response(self.angle);
        let derivs = [da * self.reflection, a.clone(), a * c(0.0, 1.0)];
        let scale = 2.0 * self.snapshots as f64 / self.noise;
        let mut f = Matrix3::zeros();
        for p in 0..3 {
            for q in p..3 {
                let v = scale * (derivs[p].adjoint() * &derivs[q] * s).trace().re;
                f[(p, q)] = v;
                f[(q, p)] = v;
            }
        }
        Ok(f)
    }

    /// `[F⁻¹]_θθ`, or [`Error::SingularFisher`].
    pub fn crb_checked(&self, s: &CMat) -> Result<f64> {
        let f = self.fisher(s)?;
        let scale = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::SingularFisher);
        }
        let schur = self.schur(s);
        if !(schur > 1e-12 * scale) {
            return Err(Error::SingularFisher);
        }
        let inv = f.try_inverse().ok_or(Error::SingularFisher)?;
        let v = inv[(0, 0)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::SingularFisher);
        }
        Ok(v)
    }

    /// Schur complement of the angle entry, `1 / CRB`.
    fn schur(&self, s: &CMat) -> f64 {
        let (t_dd, t_da, t_aa) = self.traces(s);
        let k = 2.0 * self.snapshots as f64 / self.noise * self.reflection.norm_sqr();
        if t_aa <= 0.0 {
            return 0.0;
        }
        k * (t_dd - t_da.norm_sqr() / t_aa)
    }

    fn traces(&self, s: &CMat) -> (f64, C64, f64) {
        let (a, da) = self.response(self.angle);
        let t_dd = (da.adjoint() * &da * s).trace().re;
        let t_da = (da.adjoint() * &a * s).trace();
        let t_aa = (a.adjoint() * &a * s).trace().re;
        (t_dd, t_da, t_aa)
    }

    /// CRB value and gradient from the Schur-complement closed form.
    pub fn crb_and_gradient(&self, s: &CMat) -> (f64, CMat) {
        let n = s.nrows();
        let (a, da) = self.response(self.angle);
        let g_dd = da.adjoint() * &da;
        let g_aa = a.adjoint() * &a;
        let m = da.adjoint() * &a;
        let t_dd = inner(&g_dd, s);
        let t_da = (&m * s).trace();
        let t_aa = inner(&g_aa, s);
        let k = 2.0 * self.snapshots as f64 / self.noise * self.reflection.norm_sqr();
        if !(t_aa > 0.0) {
            return (f64::INFINITY, CMat::zeros(n, n));
        }
        let schur = k * (t_dd - t_da.norm_sqr() / t_aa);
        if !(schur > 1e-14 * k * t_dd.abs().max(1e-300)) {
            return (f64::INFINITY, CMat::zeros(n, n));
        }
        let g_cross = &m * t_da.conj() + m.adjoint() * t_da;
        let g_schur = (g_dd - (g_cross * c(t_aa, 0.0) - &g_aa * c(t_da.norm_sqr(), 0.0)) * c(1.0 / (t_aa * t_aa), 0.0))
            * c(k, 0.0);
        let crb = 1.0 / schur;
        (crb, hermitian_part(&g_schur) * c(-crb * crb, 0.0))
    }
}

/// Angle CRB of a point target; `+∞` when the Fisher information is singular.
pub fn crb_point_target(scenario: &Scenario, s: &CMat, target: &TargetSpec) -> Result<f64> {
    let model = PointTargetModel::from_scenario(scenario, target)?;
    match model.crb_checked(s) {
        Ok(v) => Ok(v),
        Err(Error::SingularFisher) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `σs² n_rx tr((L S)⁻¹)`; `+∞` for singular `S`.
pub fn crb_trm(s: &CMat, sensing_noise: f64, snapshots: usize, n_rx_sense: usize) -> f64 {
    if !s.is_square() || s.nrows() == 0 {
        return f64::INFINITY;
    }
    match inverse_hpd(s) {
        Some(inv) => sensing_noise * n_rx_sense as f64 * trace_re(&inv) / snapshots as f64,
        None => f64::INFINITY,
    }
}

/// Gradient of [`crb_trm`]: `-σs² n_rx/L · S⁻²`. `None` when `S` is singular.
pub fn crb_trm_gradient(s: &CMat, sensing_noise: f64, snapshots: usize, n_rx_sense: usize) -> Option<CMat> {
    let inv = inverse_hpd(s)?;
    let k = -sensing_noise * n_rx_sense as f64 / snapshots as f64;
    Some(hermitian_part(&(&inv * &inv)) * c(k, 0.0))
}

/// [`crb_trm`] and its gradient from a single inverse; `(+∞, 0)` when singular.
pub fn crb_trm_and_gradient(s: &CMat, sensing_noise: f64, snapshots: usize, n_rx_sense: usize) -> (f64, CMat) {
    let k = sensing_noise * n_rx_sense as f64 / snapshots as f64;
    match inverse_hpd(s) {
        Some(inv) => (k * trace_re(&inv), hermitian_part(&(&inv * &inv)) * c(-k, 0.0)),
        None => (f64::INFINITY, CMat::zeros(s.nrows(), s.ncols())),
    }
}

/// MSE of the least-squares TRM estimator. It is efficient under the
/// Gaussian linear model, so the value coincides with [`crb_trm`].
pub fn trm_mse_ls(s: &CMat, sensing_noise: f64, snapshots: usize, n_rx_sense: usize) -> f64 {
    crb_trm(s, sensing_noise, snapshots, n_rx_sense)
}

// ---------------------------------------------------------------------------
// Beampattern
// ---------------------------------------------------------------------------

/// `a(θ)ᴴ R a(θ)` on a grid of angles given in degrees.
pub fn beampattern(r: &CMat, geometry: &UlaGeometry, grid_deg: &[f64]) -> Vec<f64> {
    grid_deg
        .iter()
        .map(|&deg| quad_form(r, &steering_vector(geometry, deg.to_radians())).max(0.0))
        .collect()
}

/// Indicator pattern: 1 within `±width/2` of any target angle, else 0 (degrees).
pub fn desired_indicator(targets_deg: &[f64], grid_deg: &[f64], width_deg: f64) -> Vec<f64> {
    grid_deg
        .iter()
        .map(|&g| {
            let hit = targets_deg
                .iter()
                .any(|&t| (g - t).abs() <= width_deg / 2.0 + 1e-9);
            if hit { 1.0 } else { 0.0 }
        })
        .collect()
}

/// Least-squares matching of a beampattern to `desired` with optimal scale:
/// returns `(Σ (α* d_i - P_i)², α*)` where `α* = Σ d_i P_i / Σ d_i²`
/// (0 when `d ≡ 0`).
pub fn matching_error_against(pattern: &[f64], desired: &[f64]) -> Result<(f64, f64)> {
    if pattern.is_empty() {
        return Err(Error::InvalidArgument("empty angle grid".into()));
    }
    if pattern.len() != desired.len() {
        return Err(Error::Dimension("pattern and desired lengths differ".into()));
    }
    let dd: f64 = desired.iter().map(|d| d * d).sum();
    let dp: f64 = desired.iter().zip(pattern).map(|(d, p)| d * p).sum();
    let alpha = if dd > 0.0 { dp / dd } else { 0.0 };
    let err = desired
        .iter()
        .zip(pattern)
        .map(|(d, p)| (alpha * d - p).powi(2))
        .sum::<f64>();
    Ok((err, alpha))
}

/// Matching error of `R` against the indicator pattern of `targets_deg`.
pub fn matching_error(
    r: &CMat,
    geometry: &UlaGeometry,
    targets_deg: &[f64],
    grid_deg: &[f64],
    width_deg: f64,
) -> Result<(f64, f64)> {
    if grid_deg.is_empty() {
        return Err(Error::InvalidArgument("empty angle grid".into()));
    }
    if !(width_deg > 0.0) {
        return Err(Error::InvalidArgument("pattern width must be positive".into()));
    }
    let desired = desired_indicator(targets_deg, grid_deg, width_deg);
    matching_error_against(&beampattern(r, geometry, grid_deg), &desired)
}

/// Precomputed steering outer products for repeated matching-error
/// evaluation inside the optimizer.
#[derive(Debug, Clone)]
pub struct MatchingObjective {
    steering: Vec<CVec>,
    desired: Vec<f64>,
}

impl MatchingObjective {
    pub fn new(geometry: &UlaGeometry, grid_deg: &[f64], desired: &[f64]) -> Self {
        Self {
            steering: grid_deg
                .iter()
                .map(|d| steering_vector(geometry, d.to_radians()))
                .collect(),
            desired: desired.to_vec(),
        }
    }

    pub fn pattern(&self, r: &CMat) -> Vec<f64> {
        self.steering.iter().map(|a| quad_form(r, a)).collect()
    }

    /// Error minimized over the scale, and its gradient (envelope theorem:
    /// `-2 Σ (α* d_i - P_i) a_i a_iᴴ`).
    pub fn value_and_gradient(&self, r: &CMat) -> (f64, CMat) {
        let p = self.pattern(r);
        let (err, alpha) =
            matching_error_against(&p, &self.desired).expect("grid is non-empty by construction");
        let n = r.nrows();
        let mut g = CMat::zeros(n, n);
        for ((a, d), pi) in self.steering.iter().zip(&self.desired).zip(&p) {
            let w = -2.0 * (alpha * d - pi);
            if w != 0.0 {
                g += (a * a.adjoint()) * c(w, 0.0);
            }
        }
        (err, g)
    }
}

// ---------------------------------------------------------------------------
// Aggregate
// ---------------------------------------------------------------------------

/// Sensing CRB of `s` for the scenario's first target under `metric`.
pub fn sensing_crb(scenario: &Scenario, s: &CMat, metric: SensingMetric) -> Result<f64> {
    match metric {
        SensingMetric::Trm => Ok(crb_trm(
            s,
            scenario.sensing_noise,
            scenario.snapshots,
            scenario.n_rx_sense(),
        )),
        SensingMetric::PointTarget => {
            let target = scenario
                .targets
                .iter()
                .find(|t| matches!(t, TargetSpec::Point { .. }))
                .ok_or_else(|| Error::InvalidArgument("scenario has no point target".into()))?;
            crb_point_target(scenario, s, target)
        }
    }
}

/// Evaluates the full metric triple of `s` (rate towards `ir_index`).
pub fn evaluate(scenario: &Scenario, s: &CMat, metric: SensingMetric, ir_index: usize) -> Result<MetricTriple> {
    let sensing_crb = sensing_crb(scenario, s, metric)?;
    let rate = match scenario.irs.get(ir_index) {
        Some(ir) => rate(&ir.channel, s, ir.noise_power)?,
        None => 0.0,
    };
    let energy = scenario
        .ers
        .iter()
        .map(|er| harvested_energy(er, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricTriple {
        sensing_crb,
        rate,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use crate::scenario::{sample_channel, ChannelModel};

    fn diag(v: &[f64]) -> CMat {
        CMat::from_fn(v.len(), v.len(), |i, j| if i == j { c(v[i], 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn rate_of_zero_covariance_is_zero() {
        let h = sample_channel(1, ChannelModel::Rayleigh, 2, 3);
        assert_eq!(rate(&h, &CMat::zeros(3, 3), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_and_diagonal_rates() {
        let h = CMat::from_element(1, 1, c(1.0, 0.0));
        let p = 3.7;
        let r = rate(&h, &diag(&[p]), 1.0).unwrap();
        assert!((r - (1.0 + p).log2()).abs() < 1e-12);
        let r2 = rate(&identity(2), &diag(&[1.0, 3.0]), 1.0).unwrap();
        assert!((r2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rate_rejects_mismatched_dims() {
        let h = sample_channel(1, ChannelModel::Rayleigh, 2, 3);
        assert!(matches!(rate(&h, &identity(4), 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn energy_of_matched_single_antenna_receiver() {
        let hrow = sample_channel(5, ChannelModel::Rayleigh, 1, 4);
        let hv: CVec = hrow.row(0).adjoint();
        let norm2 = hv.norm_squared();
        let p = 2.0;
        let s = outer(&hv, &hv) * c(p / norm2, 0.0);
        let er = ErSpec { channel: hrow, eh_efficiency: 0.3, required_energy: None };
        let e = harvested_energy(&er, &s).unwrap();
        assert!((e - 0.3 * p * norm2).abs() < 1e-12);
        let off = ErSpec { eh_efficiency: 0.0, ..er };
        assert_eq!(harvested_energy(&off, &s).unwrap(), 0.0);
    }

    #[test]
    fn energy_matches_rowwise_sum() {
        let hm = sample_channel(9, ChannelModel::Rayleigh, 4, 4);
        let x = sample_channel(10, ChannelModel::Rayleigh, 4, 4);
        let s = &x * x.adjoint();
        let er = ErSpec { channel: hm.clone(), eh_efficiency: 0.7, required_energy: None };
        let mut brute = 0.0;
        for i in 0..4 {
            let row = hm.row(i);
            let mut acc = c(0.0, 0.0);
            for a in 0..4 {
                for b in 0..4 {
                    acc += row[a] * s[(a, b)] * row[b].conj();
                }
            }
            brute += 0.7 * acc.norm();
        }
        let e = harvested_energy(&er, &s).unwrap();
        assert!((e - brute).abs() < 1e-10 * brute);
    }

    #[test]
    fn sinr_single_user_and_orthogonal_interference() {
        let h = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let ir = IrSpec { channel: CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]), noise_power: 0.5, required_sinr: None };
        let w = CVec::from_vec(vec![c(0.0, 2.0), c(1.0, 0.0)]);
        let s = sinr_ir(std::slice::from_ref(&ir), 0, std::slice::from_ref(&w), &CMat::zeros(2, 2), 1.0).unwrap();
        assert!((s - h.dotc(&w).norm_sqr() / 0.5).abs() < 1e-12);

        let w2 = CVec::from_vec(vec![c(0.0, 0.0), c(3.0, 0.0)]);
        let irs = vec![ir.clone(), ir];
        let s2 = sinr_ir(&irs, 0, &[w.clone(), w2], &CMat::zeros(2, 2), 1.0).unwrap();
        assert!((s2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_nondecreasing_in_split_ratio() {
        let ch = sample_channel(3, ChannelModel::Rayleigh, 1, 3);
        let irs = vec![IrSpec { channel: ch, noise_power: 0.2, required_sinr: None }];
        let w = vec![sample_channel(4, ChannelModel::Rayleigh, 3, 1).column(0).into_owned()];
        let v = sample_channel(6, ChannelModel::Rayleigh, 3, 3);
        let v = &v * v.adjoint();
        let mut prev = 0.0;
        for i in 1..=20 {
            let s = sinr_ir(&irs, 0, &w, &v, i as f64 / 20.0).unwrap();
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn energy_interference_cancellation_raises_sinr() {
        let ch = sample_channel(3, ChannelModel::Rayleigh, 1, 3);
        let irs = vec![IrSpec { channel: ch, noise_power: 0.2, required_sinr: None }];
        let w = vec![sample_channel(4, ChannelModel::Rayleigh, 3, 1).column(0).into_owned()];
        let v = identity(3);
        let a = sinr_ir_with(&irs, 0, &w, &v, 1.0, false).unwrap();
        let b = sinr_ir_with(&irs, 0, &w, &v, 1.0, true).unwrap();
        assert!(b > a);
    }

    #[test]
    fn trm_crb_closed_form_and_singular() {
        let s = identity(4) * c(0.5, 0.0);
        assert!((crb_trm(&s, 1.0, 10, 4) - 3.2).abs() < 1e-12);
        assert!((trm_mse_ls(&s, 1.0, 10, 4) - 3.2).abs() < 1e-12);
        let halved = trm_mse_ls(&(s.clone() * c(2.0, 0.0)), 1.0, 10, 4);
        assert!((halved - 1.6).abs() < 1e-12);
        let v = CVec::from_element(4, c(0.5, 0.0));
        assert!(crb_trm(&outer(&v, &v), 1.0, 10, 4).is_infinite());
    }

    #[test]
    fn trm_gradient_matches_finite_difference() {
        let x = sample_channel(12, ChannelModel::Rayleigh, 3, 3);
        let s = &x * x.adjoint() + identity(3);
        let g = crb_trm_gradient(&s, 0.7, 5, 2).unwrap();
        let d = sample_channel(13, ChannelModel::Rayleigh, 3, 3);
        let d = hermitian_part(&d);
        let h = 1e-6;
        let fd = (crb_trm(&(&s + &d * c(h, 0.0)), 0.7, 5, 2) - crb_trm(&(&s - &d * c(h, 0.0)), 0.7, 5, 2)) / (2.0 * h);
        assert!((fd - inner(&g, &d)).abs() < 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn rate_gradient_matches_finite_difference() {
        let hm = sample_channel(14, ChannelModel::Rayleigh, 2, 3);
        let x = sample_channel(15, ChannelModel::Rayleigh, 3, 3);
        let s = &x * x.adjoint();
        let d = hermitian_part(&sample_channel(16, ChannelModel::Rayleigh, 3, 3));
        let g = rate_gradient(&hm, &s, 0.5);
        let h = 1e-6;
        let fd = (rate(&hm, &(&s + &d * c(h, 0.0)), 0.5).unwrap() - rate(&hm, &(&s - &d * c(h, 0.0)), 0.5).unwrap()) / (2.0 * h);
        assert!((fd - inner(&g, &d)).abs() < 1e-6);
    }

    #[test]
    fn point_crb_gradient_matches_finite_difference() {
        let model = PointTargetModel {
            tx: UlaGeometry::new(4),
            rx: UlaGeometry::new(4),
            angle: 0.3,
            reflection: c(0.8, 0.3),
            snapshots: 32,
            noise: 0.5,
        };
        let x = sample_channel(17, ChannelModel::Rayleigh, 4, 4);
        let s = &x * x.adjoint() * c(0.1, 0.0);
        let (v, g) = model.crb_and_gradient(&s);
        assert!((v - model.crb_checked(&s).unwrap()).abs() < 1e-10 * v);
        let d = hermitian_part(&sample_channel(18, ChannelModel::Rayleigh, 4, 4));
        let h = 1e-7;
        let fd = (model.crb_and_gradient(&(&s + &d * c(h, 0.0))).0 - model.crb_and_gradient(&(&s - &d * c(h, 0.0))).0) / (2.0 * h);
        assert!((fd - inner(&g, &d)).abs() < 1e-5 * fd.abs().max(1e-12), "{fd} vs {}", inner(&g, &d));
    }

    #[test]
    fn point_crb_singular_is_infinite() {
        let model = PointTargetModel {
            tx: UlaGeometry::new(4),
            rx: UlaGeometry::new(4),
            angle: 0.2,
            reflection: c(1.0, 0.0),
            snapshots: 8,
            noise: 1.0,
        };
        assert!(matches!(model.crb_checked(&CMat::zeros(4, 4)), Err(Error::SingularFisher)));
        assert!(matches!(model.crb_checked(&identity(3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn isotropic_beampattern_is_flat() {
        let g = UlaGeometry::new(6);
        let grid: Vec<f64> = (-89..=89).map(|d| d as f64).collect();
        for v in beampattern(&identity(6), &g, &grid) {
            assert!((v - 6.0).abs() < 1e-10);
        }
        let a = steering_vector(&g, 25f64.to_radians());
        let p = beampattern(&outer(&a, &a), &g, &[25.0]);
        assert!((p[0] - 36.0).abs() < 1e-9);
    }

    #[test]
    fn matching_error_edge_cases() {
        let g = UlaGeometry::new(4);
        let grid: Vec<f64> = (-90..=90).map(|d| d as f64).collect();
        let r = identity(4);
        let (err, alpha) = matching_error(&r, &g, &[], &grid, 10.0).unwrap();
        assert_eq!(alpha, 0.0);
        let sum_sq: f64 = beampattern(&r, &g, &grid).iter().map(|p| p * p).sum();
        assert!((err - sum_sq).abs() < 1e-8);
        assert!(matches!(matching_error(&r, &g, &[0.0], &[], 10.0), Err(Error::InvalidArgument(_))));
        let all: Vec<f64> = vec![1.0; grid.len()];
        let (e1, a1) = matching_error_against(&beampattern(&r, &g, &grid), &all).unwrap();
        assert!(e1 < 1e-16);
        assert!((a1 - 4.0).abs() < 1e-12);
    }
}
