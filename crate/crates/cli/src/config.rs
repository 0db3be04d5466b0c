//! JSON run configurations. Unknown fields are rejected so that typos surface
//! as input errors instead of silently falling back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dnls_core::dynamics::{self, EvolutionConfig, Scheme};
use dnls_core::grid::{Field, Grid};
use dnls_core::waves::{self, Omega, Params};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 12345;

fn default_n() -> usize {
    2048
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_scheme() -> Scheme {
    Scheme::IntegratingFactorRK4
}
fn default_true() -> bool {
    true
}
fn default_monitor_every() -> usize {
    100
}
fn default_drift_tolerance() -> f64 {
    1e-7
}
fn default_max_halvings() -> u32 {
    6
}
fn default_distance_factor() -> f64 {
    10.0
}

/// Frequency pair, coupling and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub omega0: f64,
    pub omega1: f64,
    pub b: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Half-length of the periodic box; defaults to the decay-based rule.
    #[serde(default)]
    pub half_length: Option<f64>,
}

impl WaveSpec {
    pub fn omega(&self) -> CliResult<Omega> {
        Ok(Omega::new(self.omega0, self.omega1)?)
    }

    pub fn params(&self) -> CliResult<Params> {
        Ok(Params::new(self.b)?)
    }

    pub fn grid(&self) -> CliResult<Grid> {
        let omega = self.omega()?;
        let l = self.half_length.unwrap_or_else(|| waves::default_half_length(&omega));
        Ok(Grid::new(l, self.n)?)
    }
}

/// Evolution settings as written in a config file; `dt` may be left to the default rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_monitor_every")]
    pub monitor_every: usize,
    #[serde(default = "default_drift_tolerance")]
    pub drift_tolerance: f64,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: u32,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

impl EvolutionSpec {
    pub fn new(dt: Option<f64>, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: default_scheme(),
            dealias: true,
            monitor_every: default_monitor_every(),
            drift_tolerance: default_drift_tolerance(),
            max_halvings: default_max_halvings(),
            snapshot_every: None,
        }
    }

    pub fn resolve(&self, u0: &Field) -> CliResult<EvolutionConfig> {
        let cfg = EvolutionConfig {
            dt: self.dt.unwrap_or_else(|| dynamics::default_dt(u0)),
            t_end: self.t_end,
            scheme: self.scheme,
            dealias: self.dealias,
            monitor_every: self.monitor_every,
            drift_tolerance: self.drift_tolerance,
            max_halvings: self.max_halvings,
            snapshot_every: self.snapshot_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Along the unstable direction psi.
    #[serde(alias = "psi")]
    #[value(alias = "psi")]
    PsiDirection,
    /// `(1 + lambda) phi`.
    Scaling,
    /// Seeded band-limited random field with the H1 norm of phi.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Soliton,
    Perturbed {
        perturbation: PerturbationKind,
        lambda: f64,
    },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Soliton
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub wave: WaveSpec,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub evolution: EvolutionSpec,
    #[serde(default)]
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityExperimentConfig {
    pub wave: WaveSpec,
    /// Signed perturbation amplitude, `|lambda| <= 0.1`.
    pub lambda: f64,
    pub kind: PerturbationKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub evolution: EvolutionSpec,
    /// Report when the orbital distance exceeds this multiple of its initial value.
    #[serde(default = "default_distance_factor")]
    pub distance_factor: f64,
    /// Stop the run as soon as the distance factor is exceeded.
    #[serde(default = "default_true")]
    pub stop_when_exceeded: bool,
    #[serde(default)]
    pub plot: bool,
}

impl StabilityExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.lambda.abs() <= 0.1) || self.lambda == 0.0 {
            return Err(CliError::Input(format!(
                "perturbation amplitude must satisfy 0 < |lambda| <= 0.1, got {}",
                self.lambda
            )));
        }
        if !(self.distance_factor > 1.0) {
            return Err(CliError::Input(format!(
                "distance factor must exceed 1, got {}",
                self.distance_factor
            )));
        }
        self.wave.omega()?;
        self.wave.params()?;
        Ok(())
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Input(format!("config file {} not found", path.display()))
        } else {
            CliError::io(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Config {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evolve_config_defaults() {
        let cfg: EvolveConfig = serde_json::from_str(
            r#"{"wave":{"omega0":1,"omega1":0.5,"b":0.1875},"evolution":{"t_end":1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.initial, InitialData::Soliton);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.wave.n, 2048);
        assert_eq!(cfg.evolution.scheme, Scheme::IntegratingFactorRK4);
        assert!(cfg.evolution.dt.is_none());
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: Result<EvolveConfig, _> = serde_json::from_str(
            r#"{"wave":{"omega0":1,"omega1":0.5,"b":0.1875,"nn":3},"evolution":{"t_end":1}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn perturbed_initial_data_parses() {
        let cfg: EvolveConfig = serde_json::from_str(
            r#"{"wave":{"omega0":1,"omega1":1.6,"b":0.1875},
                "initial":{"kind":"perturbed","perturbation":"psi","lambda":0.001},
                "evolution":{"t_end":1,"dt":0.002}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.initial,
            InitialData::Perturbed {
                perturbation: PerturbationKind::PsiDirection,
                lambda: 0.001
            }
        );
    }

    #[test]
    fn experiment_validation() {
        let mut cfg = StabilityExperimentConfig {
            wave: WaveSpec {
                omega0: 1.0,
                omega1: 0.0,
                b: 0.1875,
                n: 1024,
                half_length: None,
            },
            lambda: 0.01,
            kind: PerturbationKind::Random,
            seed: 1,
            evolution: EvolutionSpec::new(Some(1e-3), 1.0),
            distance_factor: 5.0,
            stop_when_exceeded: true,
            plot: false,
        };
        assert!(cfg.validate().is_ok());
        cfg.lambda = 0.2;
        assert!(matches!(cfg.validate(), Err(CliError::Input(_))));
        cfg.lambda = 0.01;
        cfg.distance_factor = 1.0;
        assert!(cfg.validate().is_err());
        cfg.distance_factor = 2.0;
        cfg.wave.omega1 = 3.0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }
}
