//! TOML run configuration.
//!
//! Every section is optional and falls back to the library defaults. Unknown
//! keys anywhere are rejected. Panel and converter parameters use SI units
//! and kelvin; scenario and training-grid temperatures are in °C.

use std::path::{Path, PathBuf};

use mppt_core::buck::BuckParams;
use mppt_core::controllers::{ControllerConfig, ControllerKind};
use mppt_core::inverter::{RlLoad, SinePwm};
use mppt_core::neural::{grid, LmOptions, NeuralConfig, DEFAULT_HIDDEN, DEFAULT_SEED};
use mppt_core::pv_model::{EnvConditions, PanelParams};
use mppt_core::sim::{ProfileSegment, ScenarioProfile, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/models`.
    pub model_dir: Option<PathBuf>,
    pub panel: PanelParams,
    pub buck: BuckParams,
    pub controller: ControllerSection,
    pub neural: NeuralSection,
    pub scenario: ScenarioSection,
    pub inverter: InverterSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            model_dir: None,
            panel: PanelParams::default(),
            buck: BuckParams::default(),
            controller: ControllerSection::default(),
            neural: NeuralSection::default(),
            scenario: ScenarioSection::default(),
            inverter: InverterSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub gamma: f64,
    pub sample_period_s: f64,
    pub dead_band: f64,
    pub initial_duty: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControllerConfig::default();
        ControllerSection {
            kind: c.kind,
            gamma: c.gamma,
            sample_period_s: c.sample_period_s,
            dead_band: c.dead_band,
            initial_duty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralSection {
    pub hidden: usize,
    pub max_epochs: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub tol: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub g_step: f64,
    pub t_min_c: f64,
    pub t_max_c: f64,
    pub t_step_c: f64,
}

impl Default for NeuralSection {
    fn default() -> Self {
        let lm = LmOptions::default();
        NeuralSection {
            hidden: DEFAULT_HIDDEN,
            max_epochs: lm.max_epochs,
            lambda0: lm.lambda0,
            lambda_up: lm.lambda_up,
            lambda_down: lm.lambda_down,
            tol: lm.tol,
            g_min: 200.0,
            g_max: 1000.0,
            g_step: 50.0,
            t_min_c: 15.0,
            t_max_c: 75.0,
            t_step_c: 5.0,
        }
    }
}

impl NeuralSection {
    pub fn to_config(&self) -> Result<NeuralConfig> {
        if self.hidden == 0 {
            return Err(CliError::Config("neural.hidden must be at least 1".into()));
        }
        if !(self.lambda0 > 0.0 && self.lambda_up >= 1.0 && self.lambda_down >= 1.0 && self.tol >= 0.0) {
            return Err(CliError::Config(
                "neural: lambda0 must be > 0, lambda_up and lambda_down >= 1, tol >= 0".into(),
            ));
        }
        let g_grid = grid(self.g_min, self.g_max, self.g_step);
        let t_grid: Vec<f64> = grid(self.t_min_c, self.t_max_c, self.t_step_c)
            .into_iter()
            .map(|c| c + 273.15)
            .collect();
        if g_grid.is_empty() || t_grid.is_empty() || self.g_min <= 0.0 {
            return Err(CliError::Config(
                "neural grid needs g_min > 0, min <= max and positive steps".into(),
            ));
        }
        Ok(NeuralConfig {
            hidden: self.hidden,
            lm: LmOptions {
                max_epochs: self.max_epochs,
                lambda0: self.lambda0,
                lambda_up: self.lambda_up,
                lambda_down: self.lambda_down,
                tol: self.tol,
            },
            g_grid,
            t_grid,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// `stc` or `step_irradiance`. Mutually exclusive with `segments`.
    pub preset: Option<String>,
    /// Required with `segments`.
    pub duration: Option<f64>,
    pub segments: Vec<SegmentSection>,
}

/// A profile segment; `g_end` / `t_end_c` turn it into a ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub start: f64,
    pub g: f64,
    pub t_c: f64,
    pub g_end: Option<f64>,
    pub t_end_c: Option<f64>,
}

impl ScenarioSection {
    pub fn to_profile(&self) -> Result<ScenarioProfile> {
        let profile = match (&self.preset, self.segments.is_empty()) {
            (Some(_), false) => {
                return Err(CliError::Config(
                    "scenario: give either preset or segments, not both".into(),
                ))
            }
            (Some(name), true) => {
                let mut p = ScenarioProfile::preset(name)
                    .ok_or_else(|| CliError::Config(format!("scenario: unknown preset `{name}`")))?;
                if let Some(d) = self.duration {
                    p.duration = d;
                }
                p
            }
            (None, true) => {
                let mut p = ScenarioProfile::stc();
                if let Some(d) = self.duration {
                    p.duration = d;
                }
                p
            }
            (None, false) => {
                let duration = self
                    .duration
                    .ok_or_else(|| CliError::Config("scenario: segments need a duration".into()))?;
                let segments = self
                    .segments
                    .iter()
                    .map(|s| {
                        let from = EnvConditions::from_celsius(s.g, s.t_c);
                        let to = EnvConditions::from_celsius(s.g_end.unwrap_or(s.g), s.t_end_c.unwrap_or(s.t_c));
                        ProfileSegment::ramp(s.start, from, to)
                    })
                    .collect();
                ScenarioProfile { duration, segments }
            }
        };
        profile
            .validate()
            .map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverterSection {
    pub enabled: bool,
    pub m: f64,
    pub f_out: f64,
    pub f_carrier: f64,
    /// Load resistance [Ω].
    pub r: f64,
    /// Load inductance [H].
    pub l: f64,
    /// Switching simulation step [s].
    pub dt: f64,
    /// Keep one inverter sample every this many steps.
    pub sample_every: usize,
}

impl Default for InverterSection {
    fn default() -> Self {
        let pwm = SinePwm::default();
        let load = RlLoad::default();
        InverterSection {
            enabled: false,
            m: pwm.m,
            f_out: pwm.f_out,
            f_carrier: pwm.f_carrier,
            r: load.r,
            l: load.l,
            dt: 1e-6,
            sample_every: 10,
        }
    }
}

impl InverterSection {
    pub fn pwm(&self) -> SinePwm {
        SinePwm {
            m: self.m,
            f_out: self.f_out,
            f_carrier: self.f_carrier,
        }
    }

    pub fn load(&self) -> RlLoad {
        RlLoad { r: self.r, l: self.l }
    }

    fn validate(&self) -> Result<()> {
        self.pwm()
            .validate()
            .map_err(|e| CliError::Config(format!("inverter: {e}")))?;
        if !(self.r > 0.0 && self.l > 0.0 && self.dt > 0.0 && self.sample_every > 0) {
            return Err(CliError::Config(
                "inverter: r, l, dt must be > 0 and sample_every >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl RunConfig {
    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn model_dir(&self) -> PathBuf {
        self.model_dir.clone().unwrap_or_else(|| self.output_dir.join("models"))
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let c = &self.controller;
        let cfg = SimConfig {
            panel: self.panel,
            buck: self.buck,
            controller: ControllerConfig {
                kind: c.kind,
                gamma: c.gamma,
                sample_period_s: c.sample_period_s,
                dead_band: c.dead_band,
            },
            neural: self.neural.to_config()?,
            initial_duty: c.initial_duty,
            seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Checks every section, so no run starts on a half-valid config.
    pub fn validate(&self) -> Result<()> {
        self.sim_config()?;
        self.scenario.to_profile()?;
        self.inverter.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[buck]\nl = 1e-3\ninductance = 2\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("inductance"), "{err}");
        let err = RunConfig::parse("sed = 4\n").unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = RunConfig::parse(
            r#"
seed = 7
[controller]
kind = "ampo_ann"
gamma = 0.02
[scenario]
preset = "step_irradiance"
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.controller.kind, ControllerKind::AmpoAnn);
        assert_eq!(cfg.controller.gamma, 0.02);
        assert_eq!(cfg.controller.sample_period_s, 1e-3);
        assert_eq!(cfg.scenario.to_profile().unwrap(), ScenarioProfile::step_irradiance());
    }

    #[test]
    fn inline_segments_use_celsius() {
        let cfg = RunConfig::parse(
            r#"
[scenario]
duration = 0.3
segments = [
  { start = 0.0, g = 800, t_c = 30 },
  { start = 0.1, g = 800, t_c = 30, g_end = 400 },
]
"#,
        )
        .unwrap();
        let p = cfg.scenario.to_profile().unwrap();
        assert_eq!(p.segments.len(), 2);
        assert!((p.eval(0.05).unwrap().t - 303.15).abs() < 1e-12);
        assert!((p.eval(0.2).unwrap().g - 600.0).abs() < 1e-9);
    }

    #[test]
    fn preset_and_segments_conflict() {
        let cfg = RunConfig::parse(
            "[scenario]\npreset = \"stc\"\nduration = 1.0\nsegments = [{ start = 0.0, g = 1000, t_c = 25 }]\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "[buck]\nl = -1.0\n",
            "[controller]\ngamma = 0.0\n",
            "[scenario]\npreset = \"noon\"\n",
            "[neural]\nhidden = 0\n",
            "[inverter]\nm = 1.5\n",
        ] {
            let err = RunConfig::parse(text).unwrap().validate().unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}
