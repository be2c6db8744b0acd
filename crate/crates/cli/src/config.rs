//! Run configuration: a single TOML file plus flag overrides (flags win).

use optomotor::dynamics::{DissipationParams, QubitState};
use optomotor::models::{EffectiveModelParams, FullModelParams};
use serde::{Deserialize, Serialize};

/// Drift threshold of the truncation convergence guard (sup norm over all
/// recorded series).
pub const CONVERGENCE_DRIFT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Effective,
    Full,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n1: usize,
    pub n2: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self { n1: 6, n2: 6 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub points: usize,
    pub m_levels: usize,
    /// Interior-minimum prominence below which a gap feature is noise.
    #[serde(default = "default_prominence")]
    pub min_prominence: f64,
}

fn default_prominence() -> f64 {
    1e-4
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            delta_lo: 0.0,
            delta_hi: 2.0,
            points: 101,
            m_levels: 5,
            min_prominence: default_prominence(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialQubit {
    Ground,
    Excited,
}

impl From<InitialQubit> for QubitState {
    fn from(v: InitialQubit) -> Self {
        match v {
            InitialQubit::Ground => QubitState::Ground,
            InitialQubit::Excited => QubitState::Excited,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Horizon in units of 1/ω₂; when absent, defaults to 10/κ.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_tpoints")]
    pub points: usize,
    /// Initial thermal occupation of both resonator factors; defaults to the
    /// dissipation n_th.
    #[serde(default)]
    pub n_init: Option<f64>,
    #[serde(default = "default_initial_qubit")]
    pub initial_qubit: InitialQubit,
    /// Rerun at (n1+2, n2+2) and report the observable drift.
    #[serde(default = "default_true")]
    pub convergence_guard: bool,
    /// Subset of series labels to write; everything when absent.
    #[serde(default)]
    pub observables: Option<Vec<String>>,
}

fn default_tpoints() -> usize {
    2000
}

fn default_initial_qubit() -> InitialQubit {
    InitialQubit::Excited
}

fn default_true() -> bool {
    true
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            t_max: None,
            points: default_tpoints(),
            n_init: None,
            initial_qubit: default_initial_qubit(),
            convergence_guard: true,
            observables: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Config {
    pub tau_max: f64,
    pub points: usize,
}

impl Default for G2Config {
    fn default() -> Self {
        Self {
            tau_max: 2000.0,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

fn default_dissipation() -> DissipationParams {
    DissipationParams {
        kappa1: 0.001,
        kappa2: 0.001,
        gamma: 0.001,
        gamma_phi: 0.01,
        n_th: 0.15,
    }
}

fn default_effective() -> Option<EffectiveModelParams> {
    Some(EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 0.1, 0.1))
}

/// Complete description of one batch run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default = "default_effective")]
    pub effective: Option<EffectiveModelParams>,
    #[serde(default)]
    pub full: Option<FullModelParams>,
    #[serde(default = "default_dissipation")]
    pub dissipation: DissipationParams,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub g2: G2Config,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Effective,
            layout: LayoutConfig::default(),
            effective: default_effective(),
            full: None,
            dissipation: default_dissipation(),
            sweep: SweepConfig::default(),
            trajectory: TrajectoryConfig::default(),
            g2: G2Config::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a TOML config file body.
    pub fn from_toml(body: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(body).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check that the selected model's parameters are present and the layout
    /// usable.
    pub fn validate(&self) -> Result<(), String> {
        match self.model {
            ModelKind::Effective if self.effective.is_none() => {
                return Err("model = \"effective\" requires an [effective] section".into())
            }
            ModelKind::Full if self.full.is_none() => {
                return Err("model = \"full\" requires a [full] section".into())
            }
            _ => {}
        }
        if self.layout.n1 < 2 || self.layout.n2 < 2 {
            return Err(format!(
                "layout truncations must be >= 2, got ({}, {})",
                self.layout.n1, self.layout.n2
            ));
        }
        if self.sweep.points < 2 {
            return Err("sweep.points must be >= 2".into());
        }
        if self.trajectory.points < 1 {
            return Err("trajectory.points must be >= 1".into());
        }
        Ok(())
    }

    /// Horizon resolved against the dissipation rates: 10/κ by default.
    pub fn resolved_t_max(&self) -> f64 {
        self.trajectory.t_max.unwrap_or_else(|| {
            let kappa = self.dissipation.kappa1.max(self.dissipation.kappa2);
            if kappa > 0.0 {
                10.0 / kappa
            } else {
                1000.0
            }
        })
    }

    /// Initial thermal occupation resolved against n_th.
    pub fn resolved_n_init(&self) -> f64 {
        self.trajectory.n_init.unwrap_or(self.dissipation.n_th)
    }

    /// Render as TOML (used by `presets <name>`).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Built-in parameter sets for the reference figures. Frequencies are in
/// units of ω₂ with ω = ω₁ = ω₂ = 1; figure-2 presets carry the reference
/// dissipation rates κ₁ = κ₂ = 0.001, γ = 0.001, γ_φ = 0.01, n_th = 0.15.
pub const PRESET_NAMES: [&str; 6] = ["fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig2c"];

/// Look up a preset by name; the error lists the available names.
pub fn preset(name: &str) -> Result<RunConfig, String> {
    let (k, j, is_sweep) = match name {
        "fig1a" => (0.1, 0.1, true),
        "fig1b" => (0.1, 1.0, true),
        "fig1c" => (1.0, 1.0, true),
        "fig2a" => (0.5, 1.0, false),
        "fig2b" => (0.5, 0.5, false),
        "fig2c" => (1.0, 1.0, false),
        _ => {
            return Err(format!(
                "unknown preset {name:?}; available: {}",
                PRESET_NAMES.join(", ")
            ))
        }
    };
    let mut cfg = RunConfig {
        effective: Some(EffectiveModelParams::symmetric(1.0, 1.0, 1.0, k, j)),
        ..RunConfig::default()
    };
    if !is_sweep {
        // horizon sized to reach the quasi-steady regime at the reference
        // rates while staying tractable at the default truncation
        cfg.trajectory.t_max = Some(800.0);
        cfg.trajectory.points = 1600;
    }
    Ok(cfg)
}

/// One-line parameter echo for the preset listing.
pub fn preset_summary(name: &str) -> Result<String, String> {
    let cfg = preset(name)?;
    let p = cfg.effective.expect("presets use the effective model");
    let d = cfg.dissipation;
    Ok(format!(
        "{name}: effective model, k1 = k2 = {}, J = {}, omega = omega1 = omega2 = 1; \
         kappa1 = kappa2 = {}, gamma = {}, gamma_phi = {}, n_th = {}",
        p.k1, p.j_coupling, d.kappa1, d.gamma, d.gamma_phi, d.n_th
    ))
}
