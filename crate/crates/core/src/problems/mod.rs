//! Built-in benchmark problems.

pub mod diffusion;
pub mod image;
pub mod linear_gaussian;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BayesModel, GaussianErrorModel};
use crate::scalar::Real;

pub use diffusion::{diffusion_forward, DiffusionConfig, DiffusionForward, DiffusionProblem, Parameterization};
pub use image::{image_probabilities, ImageConfig, ImageParam, ImageProbabilities, ImageProblem};
pub use linear_gaussian::{LinearForwardKind, LinearGaussianConfig, LinearGaussianProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    LinearGaussian,
    Image,
    Diffusion,
}

impl std::fmt::Display for ProblemName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemName::LinearGaussian => "linear_gaussian",
            ProblemName::Image => "image",
            ProblemName::Diffusion => "diffusion",
        })
    }
}

impl std::str::FromStr for ProblemName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_gaussian" => Ok(ProblemName::LinearGaussian),
            "image" => Ok(ProblemName::Image),
            "diffusion" => Ok(ProblemName::Diffusion),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem '{other}' (expected linear_gaussian, image or diffusion)"
            ))),
        }
    }
}

/// The `[problem]` configuration section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: ProblemName,
    #[serde(default)]
    pub linear_gaussian: LinearGaussianConfig,
    #[serde(default)]
    pub image: ImageConfig,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
}

impl ProblemConfig {
    pub fn with_defaults(name: ProblemName) -> Self {
        ProblemConfig {
            name,
            linear_gaussian: LinearGaussianConfig::default(),
            image: ImageConfig::default(),
            diffusion: DiffusionConfig::default(),
        }
    }

    /// Field errors of the selected problem's section, prefixed by path.
    pub fn validate(&self) -> Vec<String> {
        let (section, errs) = match self.name {
            ProblemName::LinearGaussian => ("linear_gaussian", self.linear_gaussian.validate()),
            ProblemName::Image => ("image", self.image.validate()),
            ProblemName::Diffusion => ("diffusion", self.diffusion.validate()),
        };
        errs.into_iter().map(|e| format!("problem.{section}: {e}")).collect()
    }
}

#[derive(Clone, Debug)]
pub enum Problem<T: Real> {
    LinearGaussian(LinearGaussianProblem<T>),
    Image(ImageProblem<T>),
    Diffusion(DiffusionProblem<T>),
}

impl<T: Real> Problem<T> {
    pub fn name(&self) -> ProblemName {
        match self {
            Problem::LinearGaussian(_) => ProblemName::LinearGaussian,
            Problem::Image(_) => ProblemName::Image,
            Problem::Diffusion(_) => ProblemName::Diffusion,
        }
    }

    pub fn model(&self) -> &dyn BayesModel<T> {
        match self {
            Problem::LinearGaussian(p) => p,
            Problem::Image(p) => p,
            Problem::Diffusion(p) => p,
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianErrorModel<T>> {
        match self {
            Problem::LinearGaussian(p) => Some(p.model()),
            Problem::Image(_) => None,
            Problem::Diffusion(p) => Some(p.model()),
        }
    }
}

pub fn build_problem<T: Real>(cfg: &ProblemConfig) -> Result<Problem<T>> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::InvalidArgument(errs.join("; ")));
    }
    Ok(match cfg.name {
        ProblemName::LinearGaussian => Problem::LinearGaussian(LinearGaussianProblem::new(&cfg.linear_gaussian)?),
        ProblemName::Image => Problem::Image(ImageProblem::new(&cfg.image)?),
        ProblemName::Diffusion => Problem::Diffusion(DiffusionProblem::new(&cfg.diffusion)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_defaults() {
        for (name, d, m) in [
            ("linear_gaussian", 50, 50),
            ("image", 3, 1024),
            ("diffusion", 100, 100),
        ] {
            let p = build_problem::<f64>(&ProblemConfig::with_defaults(name.parse().unwrap())).unwrap();
            assert_eq!((p.model().dim_x(), p.model().dim_y()), (d, m));
            assert_eq!(p.name().to_string(), name);
        }
        assert!("elasticity".parse::<ProblemName>().is_err());
    }

    #[test]
    fn invalid_fields_are_listed() {
        let mut cfg = ProblemConfig::with_defaults(ProblemName::Diffusion);
        cfg.diffusion.dt = -1.0;
        cfg.diffusion.sigma_noise = 0.0;
        let errs = cfg.validate();
        assert_eq!(errs.len(), 2);
        assert!(build_problem::<f64>(&cfg).is_err());
    }
}
