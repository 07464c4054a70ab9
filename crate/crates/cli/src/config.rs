//! Experiment configuration: defaults, flag overrides, config-file
//! overrides (highest precedence), validation, and the canonical hash that
//! makes runs reproducible.

use std::path::{Path, PathBuf};

use balred::plant::PlantConfig;
use balred::reduction::ReductionMethod;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Where the full-order model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantSource {
    /// A named built-in: "scalar", "s2", or "plant" (the 2-D
    /// convection-diffusion grid, configured by `plant_config`).
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plant_config: Option<PlantConfig>,
    },
    /// Dense matrices read from three DMAT files.
    Dmat { a: PathBuf, b: PathBuf, c: PathBuf },
}

/// Snapshot counts and sampling period; unset fields fall back to the
/// decay-horizon heuristic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_o: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
}

/// Fully resolved experiment description. Serialized canonically into the
/// manifest, so identical experiments hash identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plant: PlantSource,
    #[serde(default)]
    pub sampling: SamplingConfig,
    /// Number of output-projection modes; none disables projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<usize>,
    pub methods: Vec<String>,
    /// Reduction orders; empty means the singular-value tail rule decides.
    #[serde(default)]
    pub orders: Vec<usize>,
    #[serde(default)]
    pub adjoint_eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Partial form used both for flag collection and for config files; set
/// fields override the base configuration.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct PartialConfig {
    pub plant: Option<PlantSource>,
    pub sampling: Option<SamplingConfig>,
    pub projection: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub orders: Option<Vec<usize>>,
    pub adjoint_eps: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults() -> Self {
        Self {
            plant: PlantSource::Builtin {
                name: "plant".into(),
                plant_config: None,
            },
            sampling: SamplingConfig::default(),
            projection: None,
            methods: vec!["era".into()],
            orders: Vec::new(),
            adjoint_eps: 0.0,
            seed: 0,
            out: None,
        }
    }

    /// Applies the set fields of `overlay` on top of this configuration.
    pub fn apply(&mut self, overlay: PartialConfig) {
        if let Some(plant) = overlay.plant {
            self.plant = plant;
        }
        if let Some(sampling) = overlay.sampling {
            if sampling.m_c.is_some() {
                self.sampling.m_c = sampling.m_c;
            }
            if sampling.m_o.is_some() {
                self.sampling.m_o = sampling.m_o;
            }
            if sampling.period.is_some() {
                self.sampling.period = sampling.period;
            }
        }
        if let Some(projection) = overlay.projection {
            self.projection = Some(projection);
        }
        if let Some(methods) = overlay.methods {
            self.methods = methods;
        }
        if let Some(orders) = overlay.orders {
            self.orders = orders;
        }
        if let Some(eps) = overlay.adjoint_eps {
            self.adjoint_eps = eps;
        }
        if let Some(seed) = overlay.seed {
            self.seed = seed;
        }
        if let Some(out) = overlay.out {
            self.out = Some(out);
        }
    }

    /// Validates fields that no later stage re-checks.
    pub fn validate(&self) -> Result<Vec<ReductionMethod>, String> {
        if self.methods.is_empty() {
            return Err("at least one reduction method is required".into());
        }
        let mut parsed = Vec::new();
        for name in &self.methods {
            match ReductionMethod::parse(name) {
                Ok(method) => parsed.push(method),
                Err(_) => return Err(format!("unknown method '{name}'")),
            }
        }
        if let PlantSource::Builtin { name, .. } = &self.plant {
            if !matches!(name.as_str(), "scalar" | "s2" | "plant") {
                return Err(format!(
                    "unknown builtin plant '{name}' (expected scalar, s2, or plant)"
                ));
            }
        }
        if self.adjoint_eps < 0.0 {
            return Err("adjoint perturbation must be nonnegative".into());
        }
        if self.orders.iter().any(|&r| r == 0) {
            return Err("orders must be positive".into());
        }
        if self.projection == Some(0) {
            return Err("projection mode count must be positive".into());
        }
        Ok(parsed)
    }

    /// SHA-256 over the canonical JSON serialization (excluding the output
    /// directory, which does not affect results).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        format!("{digest:x}")
    }
}

pub fn load_partial(path: &Path) -> Result<PartialConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
}
