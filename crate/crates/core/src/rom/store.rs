//! On-disk layout of a reduced model:
//!
//! ```text
//! manifest.toml
//! <component>/basis.fmx
//! <component>/coeff_<l>/...   one mode surrogate per coefficient
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{config_fingerprint, BuildOptions, BuildTimings, ComponentModel, RomModel};
use crate::dataset::{load_matrix, save_matrix, SamplingGrid};
use crate::error::{Error, Result};
use crate::fom::{Component, SolverConfig};
use crate::modes::ModeSurrogate;
use crate::pod::{ProjectionBound, ReducedBasis};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    fingerprint: String,
    dims: [usize; 3],
    timings: BuildTimings,
    config: SolverConfig,
    grid: SamplingGrid,
    options: BuildOptions,
    components: Vec<ComponentRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ComponentRecord {
    component: Component,
    dim: usize,
    mode_counts: Vec<usize>,
    singular_values: Vec<f64>,
    tolerance_t: f64,
    tolerance_theta: f64,
    first_step_dims: Vec<usize>,
    bound: ProjectionBound,
    zero_blocks: Vec<usize>,
}

fn format_error(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

impl RomModel {
    /// Persist into `dir`, replacing any model already there.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut records = Vec::with_capacity(3);
        for cm in &self.components {
            let cdir = dir.join(cm.component.name());
            if cdir.exists() {
                fs::remove_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
            }
            fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
            save_matrix(cdir.join("basis.fmx"), &cm.basis.basis)?;
            for s in &cm.surrogates {
                s.save(cdir.join(format!("coeff_{}", s.index)))?;
            }
            records.push(ComponentRecord {
                component: cm.component,
                dim: cm.dim(),
                mode_counts: cm.mode_counts(),
                singular_values: cm.basis.singular_values.clone(),
                tolerance_t: cm.basis.tolerance_t,
                tolerance_theta: cm.basis.tolerance_theta,
                first_step_dims: cm.basis.first_step_dims.clone(),
                bound: cm.basis.bound,
                zero_blocks: cm.zero_blocks.clone(),
            });
        }
        let manifest = Manifest {
            fingerprint: self.fingerprint.clone(),
            dims: self.dims(),
            timings: self.timings,
            config: self.config.clone(),
            grid: self.grid.clone(),
            options: self.options.clone(),
            components: records,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Numerical(format!("serializing manifest: {e}")))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Load a model, checking that its stored fingerprint matches its stored configuration.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| format_error(&path, e.to_string()))?;
        if config_fingerprint(&manifest.config) != manifest.fingerprint {
            return Err(format_error(&path, "fingerprint does not match the stored solver configuration"));
        }
        if manifest.components.len() != 3 {
            return Err(format_error(&path, "expected three component records"));
        }
        let mut components = Vec::with_capacity(3);
        for (c, rec) in Component::ALL.into_iter().zip(manifest.components) {
            if rec.component != c {
                return Err(format_error(&path, format!("component records out of order at {c}")));
            }
            let cdir = dir.join(c.name());
            let basis = load_matrix(cdir.join("basis.fmx"))?;
            if basis.ncols() != rec.dim {
                return Err(format_error(&path, format!("{c} basis has {} columns, manifest says {}", basis.ncols(), rec.dim)));
            }
            let surrogates = (1..=rec.dim)
                .map(|l| ModeSurrogate::load(cdir.join(format!("coeff_{l}"))))
                .collect::<Result<Vec<_>>>()?;
            if surrogates.iter().map(ModeSurrogate::q).ne(rec.mode_counts.iter().copied()) {
                return Err(format_error(&path, format!("{c} mode counts disagree with stored surrogates")));
            }
            components.push(ComponentModel {
                component: c,
                basis: ReducedBasis {
                    basis,
                    singular_values: rec.singular_values,
                    tolerance_t: rec.tolerance_t,
                    tolerance_theta: rec.tolerance_theta,
                    first_step_dims: rec.first_step_dims,
                    bound: rec.bound,
                },
                surrogates,
                zero_blocks: rec.zero_blocks,
            });
        }
        let mut it = components.into_iter();
        let components = [(); 3].map(|_| it.next().expect("three components"));
        Ok(RomModel {
            config: manifest.config,
            fingerprint: manifest.fingerprint,
            grid: manifest.grid,
            options: manifest.options,
            components,
            timings: manifest.timings,
        })
    }

    /// Error unless the model was built for `config`.
    pub fn ensure_fresh(&self, config: &SolverConfig) -> Result<()> {
        let expected = config_fingerprint(config);
        if expected != self.fingerprint {
            return Err(Error::Validation(format!(
                "model is stale: built for configuration {} but current configuration is {}",
                &self.fingerprint[..12],
                &expected[..12]
            )));
        }
        Ok(())
    }
}
