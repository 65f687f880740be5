//! Run configuration: a nested TOML file, optionally layered over a named preset.
//!
//! ```toml
//! preset = "cylinder"        # cylinder | multilayer | none
//! scale = 0.25
//!
//! [solver]                   # any SolverConfig field
//! num_periods = 40
//!
//! [sampling]
//! ranges = [[1.0, 5.0]]
//! counts = [9]
//! snapshots_per_period = 64
//!
//! [pod.ez]
//! epsilon_t = 1e-3
//! epsilon_theta = 1e-4
//!
//! [[modes.ez.entries]]
//! max_index = 5
//! delta = 1e-4
//!
//! [gpr]
//! restarts = 3
//! max_iters = 200
//! seed = 0
//!
//! [paths]
//! workspace = "podgpr-work"
//!
//! [evaluation]
//! thetas = [[1.5], [2.75]]
//! ```
//!
//! Keys present in the file replace the preset's values; arrays are replaced whole.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{build_parameter_grid, SamplingGrid};
use crate::error::{Error, Result};
use crate::fom::{FdtdSolver, GeometrySpec, SolverConfig};
use crate::gpr::GprOptions;
use crate::modes::ToleranceSchedule;
use crate::rom::{BuildOptions, PerComponent, PodTolerances};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Cylinder,
    Multilayer,
    #[default]
    None,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cylinder" => Ok(Preset::Cylinder),
            "multilayer" => Ok(Preset::Multilayer),
            "none" => Ok(Preset::None),
            other => Err(Error::Config(format!(
                "preset: unknown preset {other:?} (expected cylinder, multilayer or none)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Cylinder => "cylinder",
            Preset::Multilayer => "multilayer",
            Preset::None => "none",
        })
    }
}

/// Tensor grid of training parameters and the snapshot count per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub ranges: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
    /// `N_l`: equidistant snapshots over the final period.
    pub snapshots_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub workspace: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            workspace: PathBuf::from("podgpr-work"),
        }
    }
}

/// Default untrained parameter points for `evaluate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub thetas: Vec<Vec<f64>>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Preset,
    #[serde(default = "unit")]
    pub scale: f64,
    pub solver: SolverConfig,
    pub sampling: Sampling,
    pub pod: PerComponent<PodTolerances>,
    pub modes: PerComponent<ToleranceSchedule>,
    #[serde(default)]
    pub gpr: GprOptions,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub evaluation: Evaluation,
}

/// Solver, sampling grid and build options derived from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub solver: SolverConfig,
    pub grid: SamplingGrid,
    pub options: BuildOptions,
}

fn scaled(base: f64, scale: f64) -> usize {
    (base * scale).round() as usize
}

impl RunConfig {
    /// Preset settings at resolution `scale` (1 = full size).
    pub fn preset(preset: Preset, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && scale <= 4.0) {
            return Err(Error::Config(format!("scale = {scale} outside (0, 4]")));
        }
        let ppw = scaled(80.0, scale).max(10);
        let n_l = scaled(256.0, scale).clamp(4, 218);
        let solver = |half_width: f64, geometry: GeometrySpec| SolverConfig {
            domain_half_width: half_width,
            grid_points_per_wavelength: ppw,
            cfl_factor: 0.9,
            frequency: 1.0,
            num_periods: 50,
            geometry,
            mu_r: 1.0,
            steps_per_period: None,
        };
        let pod = |epsilon_t, epsilon_theta| {
            PerComponent::uniform(PodTolerances {
                epsilon_t,
                epsilon_theta,
            })
        };
        let config = match preset {
            Preset::Cylinder => Self {
                preset,
                scale,
                solver: solver(2.6, GeometrySpec::cylinder(0.6, 3.0)),
                sampling: Sampling {
                    ranges: vec![[1.0, 5.0]],
                    counts: vec![1 + scaled(80.0, scale.powf(5.0 / 3.0))],
                    snapshots_per_period: n_l,
                },
                pod: pod(1e-3, 1e-4),
                modes: PerComponent::uniform(ToleranceSchedule::cylinder()),
                gpr: GprOptions::default(),
                paths: Paths::default(),
                evaluation: Evaluation {
                    thetas: vec![vec![1.5], vec![2.75], vec![4.25]],
                },
            },
            Preset::Multilayer => {
                let ranges = vec![[5.0, 5.6], [3.25, 3.75], [2.0, 2.5], [1.25, 1.75]];
                let geometry = GeometrySpec {
                    layer_radii: vec![0.15, 0.3, 0.45, 0.6],
                    layer_permittivities: ranges.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect(),
                    background_permittivity: 1.0,
                };
                Self {
                    preset,
                    scale,
                    solver: solver(3.2, geometry),
                    sampling: Sampling {
                        counts: vec![scaled(3.0, scale).max(2); ranges.len()],
                        ranges,
                        snapshots_per_period: n_l,
                    },
                    pod: pod(5e-4, 1e-5),
                    modes: PerComponent::uniform(ToleranceSchedule::multilayer()),
                    gpr: GprOptions::default(),
                    paths: Paths::default(),
                    evaluation: Evaluation {
                        thetas: vec![vec![5.15, 3.375, 2.125, 1.375]],
                    },
                }
            }
            Preset::None => {
                return Err(Error::Config("preset none has no built-in settings; pass --config".into()))
            }
        };
        Ok(config)
    }

    /// Parse configuration text, layering it over its preset if it names one.
    ///
    /// `preset` and `scale` override the values in the text.
    pub fn from_toml(text: &str, preset: Option<Preset>, scale: Option<f64>) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e.message())))?;
        let preset = match preset {
            Some(p) => p,
            None => match table.get("preset") {
                Some(v) => v
                    .as_str()
                    .ok_or_else(|| Error::Config("preset must be a string".into()))?
                    .parse()?,
                None => Preset::None,
            },
        };
        let scale = match scale {
            Some(s) => s,
            None => match table.get("scale") {
                Some(v) => v
                    .as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .ok_or_else(|| Error::Config("scale must be a number".into()))?,
                None => 1.0,
            },
        };
        table.insert("preset".into(), toml::Value::String(preset.to_string()));
        table.insert("scale".into(), toml::Value::Float(scale));
        let merged = match preset {
            Preset::None => {
                if scale != 1.0 {
                    return Err(Error::Config("scale: only presets can be rescaled".into()));
                }
                table
            }
            p => {
                let base = Self::preset(p, scale)?;
                let mut base = toml::Table::try_from(&base)
                    .map_err(|e| Error::Config(format!("serializing preset: {e}")))?;
                merge(&mut base, table);
                base
            }
        };
        let config: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    /// Configuration from an optional file plus command-line overrides.
    pub fn load(path: Option<&Path>, preset: Option<Preset>, scale: Option<f64>) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None if preset.is_some_and(|p| p != Preset::None) => String::new(),
            None => return Err(Error::Config("need --config or --preset".into())),
        };
        Self::from_toml(&text, preset, scale).map_err(|e| match path {
            Some(p) => e.context(format!("reading {}", p.display())),
            None => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let s = &self.sampling;
        if s.ranges.is_empty() || s.ranges.len() != s.counts.len() {
            return Err(Error::Config(format!(
                "sampling: {} ranges but {} counts",
                s.ranges.len(),
                s.counts.len()
            )));
        }
        if s.ranges.len() != self.solver.geometry.layer_count() {
            return Err(Error::Config(format!(
                "sampling.ranges has {} dimensions but the geometry has {} layers",
                s.ranges.len(),
                self.solver.geometry.layer_count()
            )));
        }
        if let Some(m) = s.ranges.iter().position(|[lo, hi]| !(*lo >= 1.0 && lo <= hi)) {
            return Err(Error::Config(format!(
                "sampling.ranges[{m}] = {:?} must satisfy 1 <= lo <= hi",
                s.ranges[m]
            )));
        }
        if s.snapshots_per_period < 2 {
            return Err(Error::Config("sampling.snapshots_per_period must be >= 2".into()));
        }
        if let Some(spp) = self.solver.steps_per_period {
            if spp % s.snapshots_per_period != 0 {
                return Err(Error::Config(format!(
                    "solver.steps_per_period = {spp} is not a multiple of sampling.snapshots_per_period = {}",
                    s.snapshots_per_period
                )));
            }
        }
        if let Some(t) = self.evaluation.thetas.iter().find(|t| t.len() != s.ranges.len()) {
            return Err(Error::Config(format!(
                "evaluation.thetas: {t:?} does not have {} entries",
                s.ranges.len()
            )));
        }
        self.build_options().validate()
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            pod: self.pod.clone(),
            schedules: self.modes.clone(),
            gpr: self.gpr,
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let mut solver = self.solver.clone();
        let n_l = self.sampling.snapshots_per_period;
        if solver.steps_per_period.is_none() {
            solver.steps_per_period = Some(FdtdSolver::steps_per_period_for(&solver, n_l));
        }
        let points = build_parameter_grid(&self.sampling.ranges, &self.sampling.counts)?;
        let grid = SamplingGrid::shared(points, solver.last_period_times(n_l));
        Ok(Resolved {
            solver,
            grid,
            options: self.build_options(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }
}

/// Recursively overlay `top` onto `base`; non-table values replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::Component;

    #[test]
    fn cylinder_scale_quarter() {
        let c = RunConfig::preset(Preset::Cylinder, 0.25).unwrap();
        assert_eq!(c.sampling.counts, vec![9]);
        assert_eq!(c.sampling.snapshots_per_period, 64);
        assert_eq!(c.solver.grid_points_per_wavelength, 20);
        let r = c.resolve().unwrap();
        assert_eq!(r.grid.parameter_points.len(), 9);
        assert_eq!(r.grid.parameter_points[8], vec![5.0]);
        assert_eq!(r.solver.steps_per_period.unwrap() % 64, 0);
    }

    #[test]
    fn full_scale_presets() {
        let c = RunConfig::preset(Preset::Cylinder, 1.0).unwrap();
        assert_eq!(c.sampling.counts, vec![81]);
        assert_eq!(c.sampling.snapshots_per_period, 218);
        let m = RunConfig::preset(Preset::Multilayer, 1.0).unwrap();
        assert_eq!(m.sampling.counts, vec![3; 4]);
        assert_eq!(m.resolve().unwrap().grid.parameter_points.len(), 81);
        assert_eq!(m.modes.get(Component::Hy), &ToleranceSchedule::multilayer());
    }

    #[test]
    fn file_overrides_preset() {
        let text = "preset = \"cylinder\"\nscale = 0.25\n[solver]\nnum_periods = 7\n[sampling]\ncounts = [3]\n";
        let c = RunConfig::from_toml(text, None, None).unwrap();
        assert_eq!(c.solver.num_periods, 7);
        assert_eq!(c.sampling.counts, vec![3]);
        assert_eq!(c.sampling.snapshots_per_period, 64);
        assert_eq!(c.solver.domain_half_width, 2.6);
        let c = RunConfig::from_toml(text, Some(Preset::Cylinder), Some(0.5)).unwrap();
        assert_eq!(c.sampling.snapshots_per_period, 128);
    }

    #[test]
    fn round_trip_without_preset() {
        let c = RunConfig::preset(Preset::Multilayer, 0.25).unwrap();
        let mut text = c.to_toml().unwrap();
        text = text.replace("preset = \"multilayer\"", "preset = \"none\"").replace("scale = 0.25", "scale = 1.0");
        let back = RunConfig::from_toml(&text, None, None).unwrap();
        assert_eq!(back.solver, c.solver);
        assert_eq!(back.modes, c.modes);
    }

    #[test]
    fn malformed_configs_name_the_field() {
        let err = RunConfig::from_toml("preset = \"cylinder\"\n[solver]\ncfl_factor = 2.0\n", None, None).unwrap_err();
        assert!(err.to_string().contains("cfl_factor"), "{err}");
        let err = RunConfig::from_toml("preset = \"cylinder\"\n[solver]\ncfl_factor = \"x\"\n", None, None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = RunConfig::from_toml("preset = \"cylinder\"\n[sampling]\nbogus = 1\n", None, None).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = RunConfig::from_toml("preset = \"sphere\"\n", None, None).unwrap_err();
        assert!(err.to_string().contains("sphere"));
        assert!(RunConfig::from_toml("[solver]\n", None, None).is_err());
        assert!(RunConfig::preset(Preset::Cylinder, 0.0).is_err());
    }
}
