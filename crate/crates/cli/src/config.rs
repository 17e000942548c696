//! Experiment configuration: schema, parsing and static validation.

use std::path::{Path, PathBuf};

use ifx_core::models::Params;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelRef,
    pub task: Task,
    /// Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    pub name: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

/// Random compactly supported term added to the model, symmetric under the
/// model's flags (self-adjoint, and odd under the grading for chiral models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub radius: i64,
    /// Bound on the operator norm of the added term.
    #[serde(default = "default_norm")]
    pub norm: f64,
}

fn default_radius() -> i64 {
    5
}

fn default_norm() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    EssentialSpectrum(SpectrumTask),
    TruncationSpectrum(TruncationTask),
    Convergence(ConvergenceTask),
    Index(IndexTask),
    DomainWallDecomposition(IndexTask),
    ConeDecomposition(IndexTask),
    NonPropagation(NonPropagationTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::EssentialSpectrum(_) => "essential_spectrum",
            Task::TruncationSpectrum(_) => "truncation_spectrum",
            Task::Convergence(_) => "convergence",
            Task::Index(_) => "index",
            Task::DomainWallDecomposition(_) => "domain_wall_decomposition",
            Task::ConeDecomposition(_) => "cone_decomposition",
            Task::NonPropagation(_) => "non_propagation",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTask {
    /// Bloch points per axis; defaults by dimension.
    #[serde(default)]
    pub grid_points: Option<usize>,
    /// Directions sampled on the circle at infinity in 2D.
    #[serde(default)]
    pub sphere_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationTask {
    pub half_width: usize,
    /// Energy window for the in-gap state search.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceTask {
    pub half_widths: Vec<usize>,
    #[serde(default)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexTask {
    pub half_width: usize,
    #[serde(default)]
    pub zero_window: Option<f64>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub winding_points: Option<usize>,
    /// Skip the stability check at a second box size.
    #[serde(default)]
    pub single_size: bool,
    /// Runs every ordered pair (m_left, m_right) of distinct values.
    #[serde(default)]
    pub mass_grid: Option<Vec<f64>>,
    /// Odd step count for the chiral spectral flow cross-check.
    #[serde(default)]
    pub flow_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonPropagationTask {
    pub half_width: usize,
    pub target: String,
    /// η is a smooth bump on this open interval (eigenphases for walks).
    pub support: [f64; 2],
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub radii: Option<Vec<usize>>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub steps: Option<u64>,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub source: Source,
}

fn default_epsilon() -> f64 {
    1e-2
}

/// Initial state δ_x ⊗ e_component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    #[serde(default)]
    pub site: Option<Vec<i64>>,
    #[serde(default)]
    pub component: usize,
}

impl Default for Source {
    fn default() -> Self {
        Self { site: None, component: 0 }
    }
}

/// Problem with the config itself; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let cfg = Self::parse(&text, ext).map_err(|e| bad(format!("{}: {}", path.display(), e.0)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses JSON or TOML; `ext` picks the syntax, anything else is sniffed.
    pub fn parse(text: &str, ext: &str) -> Result<Self, ConfigError> {
        let json = || serde_json::from_str::<Self>(text).map_err(|e| bad(format!("JSON: {e}")));
        let toml = || toml::from_str::<Self>(text).map_err(|e| bad(format!("TOML: {}", e.message())));
        match ext {
            "json" => json(),
            "toml" => toml(),
            _ if text.trim_start().starts_with('{') => json(),
            _ => toml(),
        }
    }

    /// SHA-256 of the canonical JSON form; identical for equivalent JSON and TOML.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks that do not need the model.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(p) = &self.model.perturbation {
            if p.radius < 0 || !(p.norm > 0.0 && p.norm.is_finite()) {
                return Err(bad("perturbation needs radius >= 0 and a positive finite norm"));
            }
        }
        let grid = |g: Option<usize>| match g {
            Some(n) if n < 8 => Err(bad(format!("grid_points = {n} is below the minimum of 8"))),
            _ => Ok(()),
        };
        match &self.task {
            Task::EssentialSpectrum(s) => {
                grid(s.grid_points)?;
                if matches!(s.sphere_points, Some(n) if n < 4) {
                    return Err(bad("sphere_points must be at least 4"));
                }
            }
            Task::TruncationSpectrum(t) => {
                positive(t.half_width, "half_width")?;
                if let Some([a, b]) = t.window {
                    if !(a < b) {
                        return Err(bad(format!("window [{a}, {b}] is empty")));
                    }
                }
            }
            Task::Convergence(c) => {
                grid(c.grid_points)?;
                if c.half_widths.len() < 2 || c.half_widths.windows(2).any(|w| w[0] >= w[1]) || c.half_widths[0] == 0 {
                    return Err(bad("half_widths must list at least two increasing positive sizes"));
                }
            }
            Task::Index(i) | Task::DomainWallDecomposition(i) | Task::ConeDecomposition(i) => {
                positive(i.half_width, "half_width")?;
                grid(i.grid_points)?;
                if matches!(i.zero_window, Some(w) if !(w > 0.0)) {
                    return Err(bad("zero_window must be positive"));
                }
                if matches!(i.winding_points, Some(n) if n < 16) {
                    return Err(bad("winding_points must be at least 16"));
                }
                if matches!(i.flow_steps, Some(n) if n % 2 == 0) {
                    return Err(bad("flow_steps must be odd"));
                }
                if let Some(g) = &i.mass_grid {
                    if g.len() < 2 {
                        return Err(bad("mass_grid needs at least two values"));
                    }
                    if self.model.name != "ssh_wall" {
                        return Err(bad("mass_grid applies to the ssh_wall model only"));
                    }
                }
            }
            Task::NonPropagation(n) => {
                positive(n.half_width, "half_width")?;
                let [a, b] = n.support;
                if !(a < b) {
                    return Err(bad(format!("support [{a}, {b}] is empty")));
                }
                if !(n.epsilon > 0.0 && n.epsilon < 1.0) {
                    return Err(bad("epsilon must lie in (0, 1)"));
                }
                if n.t_max.is_some() == n.steps.is_some() {
                    return Err(bad("give exactly one of t_max (self-adjoint) or steps (unitary)"));
                }
                if matches!(n.t_max, Some(t) if !(t > 0.0 && t.is_finite())) {
                    return Err(bad("t_max must be positive"));
                }
                if let Some(r) = &n.radii {
                    if r.is_empty() || r.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(bad("radii must be non-empty and strictly increasing"));
                    }
                }
                if matches!(n.budget, Some(b) if !(b > 0.0 && b < 1.0)) {
                    return Err(bad("budget must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

fn positive(n: usize, what: &str) -> Result<(), ConfigError> {
    if n == 0 {
        return Err(bad(format!("{what} must be positive")));
    }
    Ok(())
}
