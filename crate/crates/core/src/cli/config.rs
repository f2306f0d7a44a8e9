//! Experiment configuration files.

use crate::error::{Error, Result};
use crate::fock::Qubit;
use crate::hamiltonians::{params_to_effective, EffectiveParams, PhysicalParams, DEFAULT_LAMB_DICKE_ORDER};
use crate::spectrum::CutoffPolicy;
use crate::dynamics::ConstMethod;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Dynamics(DynamicsConfig),
    FullModel(FullModelConfig),
    Spectrum(SpectrumConfig),
    Adiabatic(AdiabaticConfig),
    Measure(MeasureConfig),
    Classify(ClassifyConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Dynamics(_) => "dynamics",
            Experiment::FullModel(_) => "full_model",
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Adiabatic(_) => "adiabatic",
            Experiment::Measure(_) => "measure",
            Experiment::Classify(_) => "classify",
        }
    }
}

/// Either the effective model directly or trapped-ion drive parameters
/// mapped onto it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamsBlock {
    Effective(EffectiveParams),
    Physical(PhysicalParams),
}

impl ParamsBlock {
    pub fn effective(&self) -> EffectiveParams {
        match self {
            ParamsBlock::Effective(e) => e.clone(),
            ParamsBlock::Physical(p) => params_to_effective(p),
        }
    }
}

/// Product basis state `|q_1 … q_N, n⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisState {
    pub qubits: Vec<Qubit>,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.t_end > self.t_start) || self.samples < 2 {
            return Err(Error::Config("time grid needs t_end > t_start and at least 2 samples".into()));
        }
        Ok(crate::dynamics::linspace(self.t_start, self.t_end, self.samples))
    }
}

/// Lindblad channels in SI units; requires parameters in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationConfig {
    #[serde(default)]
    pub t1_s: Option<f64>,
    #[serde(default)]
    pub t2_s: Option<f64>,
    #[serde(default)]
    pub heating_per_s: Option<f64>,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_convergence() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub params: ParamsBlock,
    pub cutoff: usize,
    pub initial: BasisState,
    pub grid: TimeGrid,
    #[serde(default)]
    pub method: ConstMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub dissipation: Option<DissipationConfig>,
    /// Rerun at doubled cutoff and flag observables that move by more
    /// than `convergence_threshold`.
    #[serde(default)]
    pub check_cutoff: bool,
    #[serde(default = "default_convergence")]
    pub convergence_threshold: f64,
}

fn default_ld_order() -> usize {
    DEFAULT_LAMB_DICKE_ORDER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullModelConfig {
    pub params: PhysicalParams,
    pub cutoff: usize,
    pub initial: BasisState,
    /// Times in seconds.
    pub grid: TimeGrid,
    #[serde(default = "default_ld_order")]
    pub lamb_dicke_order: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config("g grid needs finite bounds and at least one point".into()));
        }
        Ok(crate::dynamics::linspace(self.start, self.stop, self.points))
    }
}

fn default_levels() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub params: EffectiveParams,
    pub g_grid: GGrid,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub cutoff_policy: CutoffPolicy,
}

fn default_samples() -> usize {
    101
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticConfig {
    pub params: EffectiveParams,
    pub cutoff: usize,
    pub g_end: f64,
    pub duration: f64,
    pub initial_indices: Vec<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Number of duration doublings to run after the main ramp.
    #[serde(default)]
    pub ladder_rungs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    /// Slope of `⟨σ_z⟩` under the readout Hamiltonian.
    Derivative {
        params: EffectiveParams,
        cutoff: usize,
        state: Vec<StateTerm>,
        #[serde(default)]
        site: usize,
        #[serde(default)]
        fd_step: Option<f64>,
    },
    /// Generalized parity from the four-term protocol.
    Parity {
        cutoff: usize,
        state: Vec<StateTerm>,
        #[serde(default)]
        dispersive: Option<DispersiveConfig>,
    },
    /// Full drive against the second-order effective Hamiltonian.
    Dispersive {
        cutoff: usize,
        initial: BasisState,
        drive: DispersiveConfig,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersiveConfig {
    pub delta: f64,
    pub omega0: f64,
    pub eta: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub include_squeezing: bool,
}

/// Amplitude `re + i im` on a product basis state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateTerm {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub qubits: Vec<Qubit>,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub g: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem for all artifacts.
    pub name: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            name: "run".into(),
        }
    }
}

fn default_max_dim() -> usize {
    4096
}

/// Limits on dense work. Runs whose dense dimension (the Hilbert-space
/// dimension, squared for density matrices) exceeds `max_dense_dim` fail
/// with the budget exit code.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "default_max_dim")]
    pub max_dense_dim: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_dense_dim: default_max_dim(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON of the experiment block, truncated to
    /// 16 hex digits. Output settings do not enter the hash.
    pub fn physics_hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.experiment).expect("config serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DYN: &str = r#"{
        "experiment": {
            "kind": "dynamics",
            "params": {"effective": {"omega": 1.0, "omega_q": [2.0], "g": [0.01]}},
            "cutoff": 12,
            "initial": {"qubits": ["g"], "n": 2},
            "grid": {"t_end": 10.0, "samples": 5}
        },
        "output": {"dir": "x", "name": "ion_run"}
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(DYN).unwrap();
        let Experiment::Dynamics(d) = &c.experiment else { panic!() };
        assert_eq!(d.tol, 1e-9);
        assert_eq!(d.method, ConstMethod::Eig);
        assert_eq!(d.initial.qubits, vec![Qubit::Ground]);
        assert_eq!(c.budget.max_dense_dim, 4096);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DYN.replace("\"cutoff\": 12", "\"cutoff\": 12, \"cutof\": 3");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = DYN.replace("\"name\": \"ion_run\"", "\"name\": \"ion_run\", \"format\": \"csv\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = DYN.replace("\"dynamics\"", "\"dynamic\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn hash_ignores_output_and_tracks_physics() {
        let a = ExperimentConfig::from_json(DYN).unwrap();
        let b = ExperimentConfig::from_json(&DYN.replace("ion_run", "other")).unwrap();
        let c = ExperimentConfig::from_json(&DYN.replace("[0.01]", "[0.02]")).unwrap();
        assert_eq!(a.physics_hash(), b.physics_hash());
        assert_ne!(a.physics_hash(), c.physics_hash());
        assert_eq!(a.physics_hash().len(), 16);
    }

    #[test]
    fn physical_block_maps_to_effective() {
        let j = r#"{"physical": {"nu_over_2pi_hz": 1e6, "delta_r_over_2pi_hz": 0, "delta_b_over_2pi_hz": -16e3, "eta": 0.04, "rabi_over_2pi_hz": 1e5}}"#;
        let p: ParamsBlock = serde_json::from_str(j).unwrap();
        let e = p.effective();
        assert!((e.omega / std::f64::consts::TAU - 4e3).abs() < 1e-9);
    }
}
