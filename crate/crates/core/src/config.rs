//! TOML configuration.
//!
//! ```toml
//! [model]
//! kind = "sequence"          # sequence | kernel | functional | example1 | example2
//! sigma = [1.0, 2.0, 3.0]    # or { csv = "sigma.csv", column = "sigma" }
//! mu = [0.5, 0.1, 0.0]       # optional, zeros when absent
//! delta = 1e-4
//! cutoffs = [3, 2, 1]
//!
//! [calibration]
//! r = 0.5
//! alpha = 1.0
//! replications = 50000
//! seed = 1
//!
//! [experiment]
//! family = "example1"        # example1 | example2 | custom (uses [model])
//! n = 50
//! num_models = 10
//! num_runs = 500
//! deltas = [1e-4, 1e-5, 1e-6]
//! oracle_budget = 1.0
//! oracle_strict = true
//! model_seed = 1
//! run_seed = 2
//! ```
//!
//! CSV paths are resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bench::{ExperimentSpec, ModelFamily};
use crate::calibrate::CalibrationConfig;
use crate::error::{Error, Result};
use crate::family::{
    design_functional, design_kernel, design_sequence, FamilyDesign, FunctionalModelSpec, Kernel,
    KernelModelSpec, SequenceModelSpec, SequenceShape, TruthProfile,
};
use crate::io::read_column;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Vector {
    Inline(Vec<f64>),
    Column { csv: PathBuf, column: String },
}

impl Vector {
    fn resolve(&self, base: &Path) -> Result<Vec<f64>> {
        match self {
            Vector::Inline(v) => Ok(v.clone()),
            Vector::Column { csv, column } => read_column(&base.join(csv), &[column.as_str()]),
        }
    }
}

fn default_delta() -> f64 {
    1.0
}

fn default_n() -> usize {
    50
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSection {
    Sequence {
        sigma: Vector,
        #[serde(default)]
        mu: Option<Vector>,
        #[serde(default = "default_delta")]
        delta: f64,
        cutoffs: Vec<usize>,
    },
    Kernel {
        design_points: Vector,
        point: f64,
        bandwidths: Vec<f64>,
        kernel: Kernel,
        noise_sd: f64,
        #[serde(default)]
        f_values: Option<Vector>,
        #[serde(default)]
        target: f64,
    },
    Functional {
        phi: Vec<Vec<f64>>,
        noise_cov_diag: Vector,
        #[serde(default)]
        target_coeffs: Option<Vector>,
        #[serde(default)]
        theta: Option<f64>,
    },
    Example1 {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        mu: Option<Vector>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Example2 {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        mu: Option<Vector>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Example1,
    Example2,
    Custom,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub family: FamilyName,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub num_models: Option<usize>,
    #[serde(default)]
    pub num_runs: Option<usize>,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub oracle_budget: Option<f64>,
    #[serde(default)]
    pub oracle_strict: Option<bool>,
    #[serde(default)]
    pub model_seed: Option<u64>,
    #[serde(default)]
    pub run_seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
    #[serde(skip)]
    base: PathBuf,
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base = base.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn model_section(&self) -> Result<&ModelSection> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("missing [model] section".into()))
    }

    fn mu_or_zero(&self, mu: &Option<Vector>, n: usize) -> Result<Vec<f64>> {
        match mu {
            Some(v) => v.resolve(&self.base),
            None => Ok(vec![0.0; n]),
        }
    }

    fn preset(&self, shape: SequenceShape, mu: &Option<Vector>, delta: f64) -> Result<(FamilyDesign, TruthProfile)> {
        let mu = self.mu_or_zero(mu, shape.sigma.len())?;
        design_sequence(&SequenceModelSpec {
            sigma: shape.sigma,
            mu,
            delta,
            cutoffs: shape.cutoffs,
        })
    }

    /// Design and truth of the `[model]` section.
    pub fn model(&self) -> Result<(FamilyDesign, TruthProfile)> {
        let base = &self.base;
        match self.model_section()? {
            ModelSection::Sequence {
                sigma,
                mu,
                delta,
                cutoffs,
            } => {
                let sigma = sigma.resolve(base)?;
                let mu = self.mu_or_zero(mu, sigma.len())?;
                design_sequence(&SequenceModelSpec {
                    sigma,
                    mu,
                    delta: *delta,
                    cutoffs: cutoffs.clone(),
                })
            }
            ModelSection::Kernel {
                design_points,
                point,
                bandwidths,
                kernel,
                noise_sd,
                f_values,
                target,
            } => {
                let design_points = design_points.resolve(base)?;
                let f_values = self.mu_or_zero(f_values, design_points.len())?;
                design_kernel(&KernelModelSpec {
                    design_points,
                    point: *point,
                    bandwidths: bandwidths.clone(),
                    kernel: *kernel,
                    noise_sd: *noise_sd,
                    f_values,
                    target: *target,
                })
            }
            ModelSection::Functional {
                phi,
                noise_cov_diag,
                target_coeffs,
                theta,
            } => {
                let noise_cov_diag = noise_cov_diag.resolve(base)?;
                let target_coeffs = self.mu_or_zero(target_coeffs, noise_cov_diag.len())?;
                design_functional(&FunctionalModelSpec {
                    phi: phi.clone(),
                    noise_cov_diag,
                    target_coeffs,
                    theta: *theta,
                })
            }
            ModelSection::Example1 { n, k, mu, delta } => {
                self.preset(SequenceShape::severely_ill_posed(*n, k.unwrap_or(20))?, mu, *delta)
            }
            ModelSection::Example2 { n, k, mu, delta } => {
                self.preset(SequenceShape::mildly_ill_posed(*n, k.unwrap_or(15))?, mu, *delta)
            }
        }
    }

    /// Experiment spec from `[experiment]` and `[calibration]`.
    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
        let mut spec = match e.family {
            FamilyName::Example1 => ExperimentSpec::example1(),
            FamilyName::Example2 => ExperimentSpec::example2(),
            FamilyName::Custom => {
                let shape = match self.model_section()? {
                    ModelSection::Sequence { sigma, cutoffs, .. } => SequenceShape {
                        sigma: sigma.resolve(&self.base)?,
                        cutoffs: cutoffs.clone(),
                    },
                    _ => {
                        return Err(Error::Config(
                            "custom experiments need a [model] of kind \"sequence\"".into(),
                        ))
                    }
                };
                ExperimentSpec {
                    n: shape.sigma.len(),
                    k: shape.cutoffs.len(),
                    family: ModelFamily::Custom(shape),
                    ..ExperimentSpec::example1()
                }
            }
        };
        spec.calib = self.calibration.clone();
        if let Some(n) = e.n {
            spec.n = n;
        }
        if let Some(k) = e.k {
            spec.k = k;
        }
        if let Some(v) = e.num_models {
            spec.num_models = v;
        }
        if let Some(v) = e.num_runs {
            spec.num_runs = v;
        }
        if let Some(v) = &e.deltas {
            spec.deltas = v.clone();
        }
        if let Some(v) = e.oracle_budget {
            spec.oracle_budget = v;
        }
        if let Some(v) = e.oracle_strict {
            spec.oracle_strict = v;
        }
        if let Some(v) = e.model_seed {
            spec.model_seed = v;
        }
        if let Some(v) = e.run_seed {
            spec.run_seed = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_inline() {
        let cfg = Config::parse(
            "[model]\nkind = \"sequence\"\nsigma = [1.0, 1.0, 1.0]\nmu = [1.0, 2.0, 4.0]\ncutoffs = [3, 2, 1]\n",
            Path::new("."),
        )
        .unwrap();
        let (design, truth) = cfg.model().unwrap();
        assert_eq!(design.variances(), &[3.0, 2.0, 1.0]);
        assert_eq!(truth.bias, vec![0.0, -4.0, -6.0]);
        assert_eq!(cfg.calibration, CalibrationConfig::default());
    }

    #[test]
    fn csv_columns_resolve_against_the_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.csv"), "# noise\nsd\n1\n2\n").unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "[model]\nkind = \"sequence\"\nsigma = { csv = \"s.csv\", column = \"sd\" }\ncutoffs = [2, 1]\ndelta = 0.5\n\
             [calibration]\nr = 1.0\nreplications = 2000\n",
        )
        .unwrap();
        let cfg = Config::load(&path).unwrap();
        let (design, _) = cfg.model().unwrap();
        assert_eq!(design.variances(), &[1.25, 0.25]);
        assert_eq!(cfg.calibration.r, 1.0);
        assert_eq!(cfg.calibration.replications, 2000);
    }

    #[test]
    fn experiment_overrides() {
        let cfg = Config::parse(
            "[experiment]\nfamily = \"example2\"\nnum_runs = 7\ndeltas = [1e-3]\n",
            Path::new("."),
        )
        .unwrap();
        let spec = cfg.experiment().unwrap();
        assert_eq!(spec.family, ModelFamily::Example2);
        assert_eq!((spec.num_runs, spec.num_models, spec.k), (7, 10, 15));
        assert_eq!(spec.deltas, vec![1e-3]);
    }

    #[test]
    fn presets_and_errors() {
        let cfg = Config::parse("[model]\nkind = \"example1\"\ndelta = 1e-4\n", Path::new(".")).unwrap();
        assert_eq!(cfg.model().unwrap().0.len(), 20);
        assert!(Config::parse("[model]\nkind = \"nope\"\n", Path::new(".")).is_err());
        assert!(Config::parse("[calibration]\nbogus = 1\n", Path::new(".")).is_err());
        let cfg = Config::parse("[experiment]\nfamily = \"custom\"\n", Path::new(".")).unwrap();
        assert!(cfg.experiment().is_err());
    }
}
