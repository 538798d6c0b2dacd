//! Experiment configuration files.
//!
//! A config is a TOML document with a mandatory `command` and `seed`, an
//! optional scenario source (`scenario = "file.toml"` or a `[generator]`
//! table), solver overrides and one section named after the command.
//! Sweep axes are dotted paths into this same document.

use std::path::{Path, PathBuf};

use iscpt::linalg::c;
use iscpt::metrics::SensingMetric;
use iscpt::multiuser::{ReceiverMode, Rounding};
use iscpt::scenario::{load_scenario, Scenario, ScenarioBuilder, TargetSpec};
use iscpt::signal_chain::{ChirpConfig, HarvesterConfig, LINK_BUDGET_RX_DBM};
use iscpt::solver::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pareto,
    Multiuser,
    Beampattern,
    WptIsac,
    SignalChain,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pareto => "pareto",
            Command::Multiuser => "multiuser",
            Command::Beampattern => "beampattern",
            Command::WptIsac => "wpt-isac",
            Command::SignalChain => "signal-chain",
        }
    }

    fn section(self) -> &'static str {
        match self {
            Command::WptIsac => "wpt_isac",
            Command::SignalChain => "signal_chain",
            other => other.name(),
        }
    }

    fn needs_scenario(self) -> bool {
        matches!(self, Command::Pareto | Command::Multiuser | Command::Beampattern)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto: Option<ParetoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiuser: Option<MultiuserSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beampattern: Option<BeampatternSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wpt_isac: Option<WptIsacSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_chain: Option<SignalChainSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kkt_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub starts: Option<usize>,
}

impl SolverConfig {
    pub fn options(&self, seed: u64) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            kkt_tol: self.kkt_tol.unwrap_or(d.kkt_tol),
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            max_inner: self.max_inner.unwrap_or(d.max_inner),
            starts: self.starts.unwrap_or(d.starts),
            seed,
            ..d
        }
    }
}

/// Seeded Rayleigh scenario; see [`ScenarioBuilder`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_tx: usize,
    pub n_rx_sense: Option<usize>,
    /// Shorthand for `users` single-antenna IRs and ERs.
    pub users: Option<usize>,
    pub ir_antennas: Option<Vec<usize>>,
    pub er_antennas: Option<Vec<usize>>,
    /// Receiver k's energy channel is its information channel.
    #[serde(default)]
    pub colocated: bool,
    pub ir_noise: Option<f64>,
    pub eh_efficiency: Option<f64>,
    pub power_budget: Option<f64>,
    pub snapshots: Option<usize>,
    pub sensing_noise: Option<f64>,
    /// Point target angle in degrees; an extended target otherwise.
    pub point_target_deg: Option<f64>,
    pub reflection: Option<[f64; 2]>,
}

impl GeneratorConfig {
    pub fn build(&self, seed: u64) -> Result<Scenario, CliError> {
        let mut b = ScenarioBuilder::new(self.n_tx);
        if let Some(n) = self.n_rx_sense {
            b.n_rx_sense = n;
        }
        if let Some(k) = self.users {
            if self.ir_antennas.is_some() || self.er_antennas.is_some() {
                return Err(CliError::config("generator.users", "conflicts with ir_antennas / er_antennas"));
            }
            b.ir_antennas = vec![1; k];
            b.er_antennas = vec![1; k];
        }
        if let Some(v) = &self.ir_antennas {
            b.ir_antennas = v.clone();
        }
        if let Some(v) = &self.er_antennas {
            b.er_antennas = v.clone();
        }
        macro_rules! copy {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { b.$f = v; } )* };
        }
        copy!(ir_noise, eh_efficiency, power_budget, snapshots, sensing_noise);
        if let Some(deg) = self.point_target_deg {
            let [re, im] = self.reflection.unwrap_or([1.0, 0.0]);
            b.target = TargetSpec::Point {
                angle: deg.to_radians(),
                reflection: c(re, im),
            };
        }
        let mut s = b.build(seed);
        if self.colocated {
            if b.ir_antennas != b.er_antennas {
                return Err(CliError::config("generator.colocated", "needs identical IR and ER antenna lists"));
            }
            for (er, ir) in s.ers.iter_mut().zip(&s.irs) {
                er.channel = ir.channel.clone();
            }
        }
        s.validate().map_err(|e| CliError::config("generator", e))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Repetitions of every axis combination, each with its own cell seed.
    #[serde(default = "one")]
    pub replicates: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path into the config, e.g. `generator.users`.
    pub name: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    #[default]
    Trm,
    Point,
}

impl From<MetricName> for SensingMetric {
    fn from(m: MetricName) -> Self {
        match m {
            MetricName::Trm => SensingMetric::Trm,
            MetricName::Point => SensingMetric::PointTarget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoSection {
    #[serde(default)]
    pub metric: MetricName,
    pub crb_grid: Vec<f64>,
    pub energy_grid: Vec<f64>,
    /// Grids are multiples of the isotropic CRB and fractions of the
    /// power-vertex energy.
    #[serde(default = "yes")]
    pub relative: bool,
    #[serde(default)]
    pub ir_index: usize,
    #[serde(default)]
    pub er_index: usize,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Separated,
    Colocated,
}

impl From<ModeName> for ReceiverMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Separated => ReceiverMode::Separated,
            ModeName::Colocated => ReceiverMode::CoLocated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundingName {
    #[default]
    Exact,
    Dc,
}

impl From<RoundingName> for Rounding {
    fn from(r: RoundingName) -> Self {
        match r {
            RoundingName::Exact => Rounding::Exact,
            RoundingName::Dc => Rounding::Dc,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiuserSection {
    #[serde(default = "separated")]
    pub modes: Vec<ModeName>,
    /// Common SINR requirement in dB, ascending.
    pub gamma_db: Vec<f64>,
    /// Energy requirement of every ER.
    #[serde(default)]
    pub energy: f64,
    #[serde(default)]
    pub metric: MetricName,
    #[serde(default)]
    pub rounding: RoundingName,
    #[serde(default)]
    pub cancel_energy_interference: bool,
}

fn separated() -> Vec<ModeName> {
    vec![ModeName::Separated]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeampatternSection {
    pub targets_deg: Vec<f64>,
    #[serde(default = "ten")]
    pub width_deg: f64,
    #[serde(default = "unit")]
    pub grid_step_deg: f64,
    /// SINR requirement of every IR (linear).
    #[serde(default)]
    pub sinr: f64,
    /// Energy requirement of every ER.
    #[serde(default)]
    pub energy: f64,
    /// Write patterns normalized to their peak, in dB.
    #[serde(default)]
    pub db: bool,
}

fn ten() -> f64 {
    10.0
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WptIsacSection {
    pub beacon_antennas: usize,
    pub device_antennas: Vec<usize>,
    /// One allocation per beacon power.
    pub beacon_power: Vec<f64>,
    pub n_rx_sense: Option<usize>,
    pub sinr_req: Option<f64>,
    pub comm_noise: Option<f64>,
    pub sensing_noise: Option<f64>,
    pub harvest_gain: Option<f64>,
    pub comm_gain: Option<f64>,
    pub eh_efficiency: Option<f64>,
    pub snapshots: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalChainSection {
    #[serde(default)]
    pub chirp: ChirpConfig,
    #[serde(default)]
    pub ranges_m: Vec<f64>,
    #[serde(default = "twenty")]
    pub fmcw_snr_db: f64,
    #[serde(default)]
    pub qpsk_snr_db: Vec<f64>,
    #[serde(default = "symbols")]
    pub qpsk_symbols: usize,
    #[serde(default)]
    pub harvester: HarvesterConfig,
    /// Constant rectifier input; defaults to the link-budget value.
    #[serde(default = "link_budget")]
    pub harvest_input_dbm: f64,
    /// Simulated time in seconds; 0 skips the harvester.
    #[serde(default)]
    pub harvest_duration_s: f64,
}

fn twenty() -> f64 {
    20.0
}

fn symbols() -> usize {
    100_000
}

fn link_budget() -> f64 {
    LINK_BUDGET_RX_DBM
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: SolverConfig,
}

/// A parsed config document plus the directory relative paths resolve from.
#[derive(Debug, Clone)]
pub struct ConfigDocument {
    pub value: toml::Table,
    pub base_dir: PathBuf,
}

impl ConfigDocument {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { value, base_dir })
    }

    pub fn from_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        Ok(Self {
            value,
            base_dir: base_dir.into(),
        })
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.value.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        let s = &overrides.solver;
        let entries = [
            ("kkt_tol", s.kkt_tol.map(toml::Value::Float)),
            ("max_outer", s.max_outer.map(|v| toml::Value::Integer(v as i64))),
            ("max_inner", s.max_inner.map(|v| toml::Value::Integer(v as i64))),
            ("starts", s.starts.map(|v| toml::Value::Integer(v as i64))),
        ];
        for (key, value) in entries {
            if let Some(v) = value {
                set_path(&mut self.value, &format!("solver.{key}"), v).expect("solver is a table");
            }
        }
    }

    pub fn parse(&self) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(self.value.clone()))
            .map_err(|e| {
                let path = e.path().to_string();
                let msg = e.into_inner().message().to_string();
                if path == "." {
                    CliError::Config(msg)
                } else {
                    CliError::Config(format!("field `{path}`: {msg}"))
                }
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The document with `path` set to `value`.
    pub fn with(&self, path: &str, value: toml::Value) -> Result<Self, CliError> {
        let mut out = self.clone();
        set_path(&mut out.value, path, value)?;
        Ok(out)
    }

    /// Hash of everything that can change the numbers: the document
    /// without `output_dir`.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut v = self.value.clone();
        v.remove("output_dir");
        let text = toml::to_string(&v).unwrap_or_default();
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::config("sweep.axes", "empty axis name"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(path, format!("`{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let sections = [
            ("pareto", self.pareto.is_some()),
            ("multiuser", self.multiuser.is_some()),
            ("beampattern", self.beampattern.is_some()),
            ("wpt_isac", self.wpt_isac.is_some()),
            ("signal_chain", self.signal_chain.is_some()),
        ];
        for (name, present) in sections {
            if present && name != self.command.section() {
                return Err(CliError::config(
                    name,
                    format!("section does not belong to command `{}`", self.command.name()),
                ));
            }
        }
        if self.command.needs_scenario() {
            match (&self.scenario, &self.generator) {
                (Some(_), Some(_)) => return Err(CliError::config("scenario", "give either a scenario file or [generator], not both")),
                (None, None) => return Err(CliError::config("scenario", "missing: give a scenario file or a [generator] table")),
                _ => {}
            }
        }
        let s = &self.solver;
        if s.kkt_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(CliError::config("solver.kkt_tol", "must be positive"));
        }
        if s.starts == Some(0) || s.max_outer == Some(0) || s.max_inner == Some(0) {
            return Err(CliError::config("solver", "iteration counts and starts must be at least 1"));
        }
        if let Some(sw) = &self.sweep {
            if sw.replicates == 0 {
                return Err(CliError::config("sweep.replicates", "must be at least 1"));
            }
            for (i, a) in sw.axes.iter().enumerate() {
                if a.values.is_empty() {
                    return Err(CliError::config(&format!("sweep.axes[{i}].values"), "must not be empty"));
                }
                if a.name.starts_with("sweep") || a.name == "command" {
                    return Err(CliError::config(&format!("sweep.axes[{i}].name"), format!("cannot sweep `{}`", a.name)));
                }
                if a.values.iter().any(|v| v.as_float().is_some_and(|f| !f.is_finite())) {
                    return Err(CliError::config(&format!("sweep.axes[{i}].values"), "must be finite"));
                }
            }
        }
        match self.command {
            Command::Pareto => {
                let p = self.pareto.as_ref().ok_or_else(|| CliError::config("pareto", "section missing"))?;
                if p.crb_grid.is_empty() || p.energy_grid.is_empty() {
                    return Err(CliError::config("pareto", "crb_grid and energy_grid must be non-empty"));
                }
                if p.crb_grid.iter().any(|v| !(*v > 0.0)) {
                    return Err(CliError::config("pareto.crb_grid", "values must be positive"));
                }
                if p.energy_grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(CliError::config("pareto.energy_grid", "values must be finite and nonnegative"));
                }
            }
            Command::Multiuser => {
                let m = self.multiuser.as_ref().ok_or_else(|| CliError::config("multiuser", "section missing"))?;
                if m.gamma_db.is_empty() || m.gamma_db.windows(2).any(|w| !(w[1] >= w[0])) {
                    return Err(CliError::config("multiuser.gamma_db", "must be a non-empty ascending list"));
                }
                if m.modes.is_empty() {
                    return Err(CliError::config("multiuser.modes", "must not be empty"));
                }
                if !(m.energy >= 0.0) {
                    return Err(CliError::config("multiuser.energy", "must be nonnegative"));
                }
            }
            Command::Beampattern => {
                let b = self.beampattern.as_ref().ok_or_else(|| CliError::config("beampattern", "section missing"))?;
                if !(b.grid_step_deg > 0.0) {
                    return Err(CliError::config("beampattern.grid_step_deg", "must be positive"));
                }
                if !(b.sinr >= 0.0) || !(b.energy >= 0.0) {
                    return Err(CliError::config("beampattern", "sinr and energy must be nonnegative"));
                }
            }
            Command::WptIsac => {
                let w = self.wpt_isac.as_ref().ok_or_else(|| CliError::config("wpt_isac", "section missing"))?;
                if w.beacon_power.is_empty() || w.beacon_power.iter().any(|p| !(*p > 0.0)) {
                    return Err(CliError::config("wpt_isac.beacon_power", "must be a non-empty list of positive powers"));
                }
                if w.device_antennas.is_empty() || w.device_antennas.contains(&0) || w.beacon_antennas == 0 {
                    return Err(CliError::config("wpt_isac.device_antennas", "antenna counts must be positive"));
                }
            }
            Command::SignalChain => {
                let s = self.signal_chain.as_ref().ok_or_else(|| CliError::config("signal_chain", "section missing"))?;
                s.chirp.validate().map_err(|e| CliError::config("signal_chain.chirp", e))?;
                s.harvester.validate().map_err(|e| CliError::config("signal_chain.harvester", e))?;
                if s.qpsk_symbols == 0 {
                    return Err(CliError::config("signal_chain.qpsk_symbols", "must be positive"));
                }
                if !(s.harvest_duration_s >= 0.0) {
                    return Err(CliError::config("signal_chain.harvest_duration_s", "must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// The scenario for one cell: the file as given, or generated from
    /// the cell seed.
    pub fn scenario(&self, base_dir: &Path, cell_seed: u64) -> Result<Scenario, CliError> {
        match (&self.scenario, &self.generator) {
            (Some(path), _) => {
                let full = base_dir.join(path);
                load_scenario(&full).map_err(|e| CliError::config("scenario", format!("{}: {e}", full.display())))
            }
            (None, Some(g)) => g.build(cell_seed),
            (None, None) => Err(CliError::config("scenario", "missing")),
        }
    }
}
