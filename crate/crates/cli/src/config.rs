//! Run configuration for `simulate` (schema version 1).

use serde::Deserialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    pub mode: ModeSection,
    pub control: ControlSection,
    #[serde(default)]
    pub physical: Option<PhysicalSection>,
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub n: u32,
    pub ell: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub tau: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub l: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub dx: f64,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub snap_dt_to_delay: bool,
}

/// Quasimode amplitudes: `u0 = zeta0 sin`, `u1 = zeta1 sin`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "one")]
    pub zeta0: f64,
    #[serde(default)]
    pub zeta1: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            zeta0: 1.0,
            zeta1: 0.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn unit_stride() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "unit_stride")]
    pub energy_stride: usize,
    /// Fit window for the energy decay rate; defaults to `[2 tau_eff, t_final]`.
    #[serde(default)]
    pub decay_window: Option<[f64; 2]>,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            directory: None,
            snapshot_times: Vec::new(),
            energy_stride: 1,
            decay_window: None,
        }
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfigFile = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut numbers = vec![
            self.mode.ell,
            self.control.tau,
            self.control.alpha,
            self.discretization.dx,
            self.discretization.dt,
            self.discretization.t_final,
            self.initial.zeta0,
            self.initial.zeta1,
        ];
        if let Some(p) = &self.physical {
            numbers.extend([p.l, p.c]);
        }
        numbers.extend(&self.outputs.snapshot_times);
        numbers.extend(self.outputs.decay_window.iter().flatten());
        if numbers.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Input("all numbers must be finite".into()));
        }
        if self.mode.n == 0 {
            return Err(CliError::Input("mode.n must be at least 1".into()));
        }
        if self.outputs.energy_stride == 0 {
            return Err(CliError::Input(
                "outputs.energy_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
