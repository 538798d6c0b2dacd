//! Physical inputs: array geometry, steering vectors, channels, targets and
//! receivers, plus deterministic channel sampling and scenario files.
//!
//! Angles are measured from broadside in radians on `(-π/2, π/2)`. A channel
//! from the transmitter towards a receiver in direction `θ` is the row
//! `a(θ)ᴴ`, so the power radiated towards `θ` by a covariance `R` is
//! `a(θ)ᴴ R a(θ)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64};

/// Current scenario file format.
pub const FORMAT_VERSION: u32 = 1;

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaGeometry {
    pub num_elements: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl UlaGeometry {
    pub fn new(num_elements: usize) -> Self {
        Self {
            num_elements,
            spacing: 0.5,
        }
    }

    pub fn with_spacing(num_elements: usize, spacing: f64) -> Self {
        Self {
            num_elements,
            spacing,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.num_elements == 0 {
            return Err(Error::Validation(format!("{what}.num_elements must be at least 1")));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Validation(format!("{what}.spacing must be positive")));
        }
        Ok(())
    }
}

/// Information receiver. `channel` has one row per receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct IrSpec {
    pub channel: CMat,
    pub noise_power: f64,
    pub required_sinr: Option<f64>,
}

impl IrSpec {
    /// Row of a single-antenna receiver as a column vector `h` with `y = hᴴ x`.
    pub fn miso_vector(&self) -> Result<CVec> {
        if self.channel.nrows() != 1 {
            return Err(Error::Dimension(format!(
                "single-antenna IR expected, channel has {} rows",
                self.channel.nrows()
            )));
        }
        Ok(self.channel.row(0).adjoint())
    }
}

/// Energy receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ErSpec {
    pub channel: CMat,
    pub eh_efficiency: f64,
    pub required_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Point { angle: f64, reflection: C64 },
    Extended { trm: CMat },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tx_geometry: UlaGeometry,
    pub sense_rx_geometry: UlaGeometry,
    pub irs: Vec<IrSpec>,
    pub ers: Vec<ErSpec>,
    pub targets: Vec<TargetSpec>,
    pub power_budget: f64,
    pub snapshots: usize,
    pub sensing_noise: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn n_tx(&self) -> usize {
        self.tx_geometry.num_elements
    }

    pub fn n_rx_sense(&self) -> usize {
        self.sense_rx_geometry.num_elements
    }

    pub fn validate(&self) -> Result<()> {
        self.tx_geometry.validate("tx_geometry")?;
        self.sense_rx_geometry.validate("sense_rx_geometry")?;
        if !(self.power_budget > 0.0) || !self.power_budget.is_finite() {
            return Err(Error::Validation("power_budget must be positive".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::Validation("snapshots must be at least 1".into()));
        }
        if !(self.sensing_noise > 0.0) {
            return Err(Error::Validation("sensing_noise must be positive".into()));
        }
        let n = self.n_tx();
        for (k, ir) in self.irs.iter().enumerate() {
            if ir.channel.ncols() != n || ir.channel.nrows() == 0 {
                return Err(Error::Validation(format!(
                    "irs[{k}].channel must have {n} columns"
                )));
            }
            if ir.channel.iter().all(|z| z.norm() == 0.0) {
                return Err(Error::Validation(format!("irs[{k}].channel is all zero")));
            }
            if !(ir.noise_power > 0.0) {
                return Err(Error::Validation(format!("irs[{k}].noise_power must be positive")));
            }
            if let Some(g) = ir.required_sinr {
                if !(g >= 0.0) {
                    return Err(Error::Validation(format!(
                        "irs[{k}].required_sinr must be nonnegative"
                    )));
                }
            }
        }
        for (j, er) in self.ers.iter().enumerate() {
            if er.channel.ncols() != n || er.channel.nrows() == 0 {
                return Err(Error::Validation(format!(
                    "ers[{j}].channel must have {n} columns"
                )));
            }
            if !(0.0..=1.0).contains(&er.eh_efficiency) {
                return Err(Error::Validation(format!(
                    "ers[{j}].eh_efficiency must lie in [0, 1]"
                )));
            }
            if let Some(e) = er.required_energy {
                if !(e >= 0.0) {
                    return Err(Error::Validation(format!(
                        "ers[{j}].required_energy must be nonnegative"
                    )));
                }
            }
        }
        for (t, target) in self.targets.iter().enumerate() {
            match target {
                TargetSpec::Point { angle, .. } => {
                    if !(angle.abs() < FRAC_PI_2) {
                        return Err(Error::Validation(format!(
                            "targets[{t}].angle must lie in (-pi/2, pi/2)"
                        )));
                    }
                }
                TargetSpec::Extended { trm } => {
                    if trm.nrows() != self.n_rx_sense() || trm.ncols() != n {
                        return Err(Error::Validation(format!(
                            "targets[{t}].trm must be {}x{n}",
                            self.n_rx_sense()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// ULA steering vector; element `n` is `exp(i 2π d n sin θ)`.
pub fn steering_vector(geometry: &UlaGeometry, theta: f64) -> CVec {
    let phase = 2.0 * PI * geometry.spacing * theta.sin();
    CVec::from_fn(geometry.num_elements, |n, _| C64::from_polar(1.0, phase * n as f64))
}

/// Derivative of [`steering_vector`] with respect to `θ`.
pub fn steering_derivative(geometry: &UlaGeometry, theta: f64) -> CVec {
    let k = 2.0 * PI * geometry.spacing;
    let phase = k * theta.sin();
    let dphase = k * theta.cos();
    CVec::from_fn(geometry.num_elements, |n, _| {
        let n = n as f64;
        C64::new(0.0, dphase * n) * C64::from_polar(1.0, phase * n)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// i.i.d. CN(0, 1) entries.
    Rayleigh,
    /// `a_r(θ) a_t(θ)ᴴ` with half-wavelength arrays on both sides.
    LineOfSight { angle: f64 },
}

/// Deterministic channel draw: a pure function of `(seed, model, rows, cols)`.
pub fn sample_channel(seed: u64, model: ChannelModel, rows: usize, cols: usize) -> CMat {
    match model {
        ChannelModel::Rayleigh => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            CMat::from_fn(rows, cols, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(re * s, im * s)
            })
        }
        ChannelModel::LineOfSight { angle } => {
            let ar = steering_vector(&UlaGeometry::new(rows), angle);
            let at = steering_vector(&UlaGeometry::new(cols), angle);
            &ar * at.adjoint()
        }
    }
}

/// SplitMix64 mixing of a master seed with a stream tag and index.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

type ComplexPair = [f64; 2];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    num_elements: usize,
    #[serde(default = "default_spacing")]
    spacing: f64,
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IrFile {
    channel: Vec<Vec<ComplexPair>>,
    noise_power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    required_sinr: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErFile {
    channel: Vec<Vec<ComplexPair>>,
    eh_efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    required_energy: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reflection: Option<ComplexPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trm: Option<Vec<Vec<ComplexPair>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: u32,
    seed: u64,
    power_budget: f64,
    snapshots: usize,
    sensing_noise: f64,
    tx_geometry: GeometryFile,
    sense_rx_geometry: GeometryFile,
    #[serde(default)]
    irs: Vec<IrFile>,
    #[serde(default)]
    ers: Vec<ErFile>,
    #[serde(default)]
    targets: Vec<TargetFile>,
}

fn matrix_to_file(m: &CMat) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn matrix_from_file(rows: &[Vec<ComplexPair>], field: &str) -> Result<CMat> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Parse(format!("field `{field}`: matrix must be non-empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("field `{field}`: ragged matrix rows")));
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl Scenario {
    fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            format_version: FORMAT_VERSION,
            seed: self.seed,
            power_budget: self.power_budget,
            snapshots: self.snapshots,
            sensing_noise: self.sensing_noise,
            tx_geometry: GeometryFile {
                num_elements: self.tx_geometry.num_elements,
                spacing: self.tx_geometry.spacing,
            },
            sense_rx_geometry: GeometryFile {
                num_elements: self.sense_rx_geometry.num_elements,
                spacing: self.sense_rx_geometry.spacing,
            },
            irs: self
                .irs
                .iter()
                .map(|ir| IrFile {
                    channel: matrix_to_file(&ir.channel),
                    noise_power: ir.noise_power,
                    required_sinr: ir.required_sinr,
                })
                .collect(),
            ers: self
                .ers
                .iter()
                .map(|er| ErFile {
                    channel: matrix_to_file(&er.channel),
                    eh_efficiency: er.eh_efficiency,
                    required_energy: er.required_energy,
                })
                .collect(),
            targets: self
                .targets
                .iter()
                .map(|t| match t {
                    TargetSpec::Point { angle, reflection } => TargetFile {
                        kind: "point".into(),
                        angle: Some(*angle),
                        reflection: Some([reflection.re, reflection.im]),
                        trm: None,
                    },
                    TargetSpec::Extended { trm } => TargetFile {
                        kind: "extended".into(),
                        angle: None,
                        reflection: None,
                        trm: Some(matrix_to_file(trm)),
                    },
                })
                .collect(),
        }
    }

    fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "field `format_version`: unsupported version {}",
                file.format_version
            )));
        }
        let irs = file
            .irs
            .iter()
            .enumerate()
            .map(|(k, ir)| {
                Ok(IrSpec {
                    channel: matrix_from_file(&ir.channel, &format!("irs[{k}].channel"))?,
                    noise_power: ir.noise_power,
                    required_sinr: ir.required_sinr,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ers = file
            .ers
            .iter()
            .enumerate()
            .map(|(j, er)| {
                Ok(ErSpec {
                    channel: matrix_from_file(&er.channel, &format!("ers[{j}].channel"))?,
                    eh_efficiency: er.eh_efficiency,
                    required_energy: er.required_energy,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = file
            .targets
            .iter()
            .enumerate()
            .map(|(t, tf)| match tf.kind.as_str() {
                "point" => {
                    let angle = tf.angle.ok_or_else(|| {
                        Error::Parse(format!("field `targets[{t}].angle` missing for point target"))
                    })?;
                    let r = tf.reflection.unwrap_or([1.0, 0.0]);
                    Ok(TargetSpec::Point {
                        angle,
                        reflection: c(r[0], r[1]),
                    })
                }
                "extended" => {
                    let trm = tf.trm.as_ref().ok_or_else(|| {
                        Error::Parse(format!("field `targets[{t}].trm` missing for extended target"))
                    })?;
                    Ok(TargetSpec::Extended {
                        trm: matrix_from_file(trm, &format!("targets[{t}].trm"))?,
                    })
                }
                other => Err(Error::Parse(format!(
                    "field `targets[{t}].kind`: unknown target kind `{other}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            tx_geometry: UlaGeometry::with_spacing(
                file.tx_geometry.num_elements,
                file.tx_geometry.spacing,
            ),
            sense_rx_geometry: UlaGeometry::with_spacing(
                file.sense_rx_geometry.num_elements,
                file.sense_rx_geometry.spacing,
            ),
            irs,
            ers,
            targets,
            power_budget: file.power_budget,
            snapshots: file.snapshots,
            sensing_noise: file.sensing_noise,
            seed: file.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    scenario.validate()?;
    std::fs::write(path, scenario.to_toml_string()?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml_str(&text)
}

/// Seeded Rayleigh scenario generator used by demos, sweeps and tests.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    pub n_tx: usize,
    pub n_rx_sense: usize,
    pub ir_antennas: Vec<usize>,
    pub er_antennas: Vec<usize>,
    pub ir_noise: f64,
    pub eh_efficiency: f64,
    pub target: TargetSpec,
    pub power_budget: f64,
    pub snapshots: usize,
    pub sensing_noise: f64,
}

impl ScenarioBuilder {
    pub fn new(n_tx: usize) -> Self {
        Self {
            n_tx,
            n_rx_sense: n_tx,
            ir_antennas: vec![1],
            er_antennas: vec![1],
            ir_noise: 1.0,
            eh_efficiency: 0.5,
            target: TargetSpec::Extended {
                trm: CMat::zeros(n_tx, n_tx),
            },
            power_budget: 1.0,
            snapshots: 16,
            sensing_noise: 1.0,
        }
    }

    pub fn build(&self, seed: u64) -> Scenario {
        let irs = self
            .ir_antennas
            .iter()
            .enumerate()
            .map(|(k, &rows)| IrSpec {
                channel: sample_channel(derive_seed(seed, 1, k as u64), ChannelModel::Rayleigh, rows, self.n_tx),
                noise_power: self.ir_noise,
                required_sinr: None,
            })
            .collect();
        let ers = self
            .er_antennas
            .iter()
            .enumerate()
            .map(|(j, &rows)| ErSpec {
                channel: sample_channel(derive_seed(seed, 2, j as u64), ChannelModel::Rayleigh, rows, self.n_tx),
                eh_efficiency: self.eh_efficiency,
                required_energy: None,
            })
            .collect();
        let target = match &self.target {
            TargetSpec::Extended { trm } if trm.nrows() != self.n_rx_sense || trm.ncols() != self.n_tx => {
                TargetSpec::Extended {
                    trm: CMat::zeros(self.n_rx_sense, self.n_tx),
                }
            }
            t => t.clone(),
        };
        Scenario {
            tx_geometry: UlaGeometry::new(self.n_tx),
            sense_rx_geometry: UlaGeometry::new(self.n_rx_sense),
            irs,
            ers,
            targets: vec![target],
            power_budget: self.power_budget,
            snapshots: self.snapshots,
            sensing_noise: self.sensing_noise,
            seed,
        }
    }
}
