use std::path::Path;

use puflab::attacks::AttackKind;
use puflab::compose::{DesignSpec, PufKind};
use puflab::crpgen::LcgOverrides;
use puflab::delay::{sigma_delta, DelayModuleSpec, GateKind, NOISE_RATIO};
use serde::Deserialize;

use crate::Fail;

pub const SCHEMA_VERSION: u32 = 1;

/// Experiment configuration. Every section and key is optional except
/// `version`; a `null` value means the calibrated default.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub module: ModuleSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub kind: PufKind,
    pub k: usize,
    pub n: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self { kind: PufKind::Apuf, k: 1, n: 64 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModuleSection {
    pub gate_kind: GateKind,
    pub gate_count: u32,
    /// Per-gate delay; calibrated against the chain spread when absent.
    pub gate_delay: Option<f64>,
}

impl Default for ModuleSection {
    fn default() -> Self {
        Self { gate_kind: GateKind::Not, gate_count: 2, gate_delay: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub weight_sigma: f64,
    /// Calibrated from the chain spread when absent.
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { weight_sigma: 1.0, noise_sigma: None, seed: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    pub count: u64,
    pub repeats: u32,
    pub lcg_a: Option<u64>,
    pub lcg_g: Option<u64>,
    /// Noise sigma for stored repeats; the model's own when absent.
    pub eval_noise: Option<f64>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self { count: 10_000, repeats: 0, lcg_a: None, lcg_g: None, eval_noise: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub kind: AttackKind,
    pub schedule: Vec<u64>,
    pub cap: u64,
    pub instances: usize,
    pub test_size: u64,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackKind::Lr,
            schedule: vec![1_000, 2_000, 5_000, 10_000, 20_000, 50_000, 100_000, 200_000, 500_000, 1_000_000],
            cap: 1_000_000,
            instances: 20,
            test_size: 10_000,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<String>,
}

impl ExperimentConfig {
    pub fn defaults() -> Self {
        Self { version: SCHEMA_VERSION, ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self, Fail> {
        let text = std::fs::read_to_string(path).map_err(|e| Fail::missing(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Fail> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Fail::config(format!("config: {e}")))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(Fail::config(format!("config: unsupported version {}, expected {SCHEMA_VERSION}", cfg.version)));
        }
        Ok(cfg)
    }

    pub fn module(&self) -> Result<DelayModuleSpec, Fail> {
        let m = &self.module;
        match m.gate_delay {
            Some(g) => Ok(DelayModuleSpec::new(m.gate_kind, m.gate_count, g)?),
            None => Ok(DelayModuleSpec::calibrated(m.gate_kind, m.gate_count, self.design.n, self.simulation.weight_sigma)),
        }
    }

    pub fn design(&self) -> Result<DesignSpec, Fail> {
        let d = &self.design;
        Ok(DesignSpec::new(d.kind, d.k, d.n, self.module()?)?)
    }

    pub fn noise_sigma(&self) -> f64 {
        self.simulation.noise_sigma.unwrap_or(NOISE_RATIO * sigma_delta(self.design.n, self.simulation.weight_sigma))
    }

    pub fn lcg(&self) -> LcgOverrides {
        LcgOverrides { a: self.generation.lcg_a, g: self.generation.lcg_g }
    }
}
