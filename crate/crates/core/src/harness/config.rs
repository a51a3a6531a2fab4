//! Experiment configuration: a versioned JSON document with every tuning
//! value spelled out or defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::study::{CvStudy, CvTarget, LepskiStudy, TruthSource};
use crate::cv::{linspace, BandwidthGrid, CvConfig, MinimumStrategy, WeightFunction};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lepski::{GeometricGrid, LrvParams};
use crate::moments::{Composition, MomentFunctional};
use crate::processes::{CoefficientCurve, DEFAULT_BURN_IN};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn burn_in() -> usize {
    DEFAULT_BURN_IN
}
fn replications() -> usize {
    200
}
fn u_grid_points() -> usize {
    201
}
fn weight_gamma() -> f64 {
    0.05
}
fn kernel() -> String {
    "epanechnikov".into()
}
fn g_default() -> String {
    "cov:1".into()
}
fn grid_size() -> usize {
    50
}
fn theta_bound() -> f64 {
    10.0
}
fn theta_points() -> usize {
    41
}
fn c_sharp() -> f64 {
    0.8
}
fn ratio() -> f64 {
    0.9
}
fn h_lower() -> f64 {
    0.9f64.powi(29)
}
fn eta() -> f64 {
    LrvParams::default().eta
}
fn lag_window() -> usize {
    LrvParams::default().lag_window
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub curve: CoefficientCurve,
    pub n: usize,
    #[serde(default = "burn_in")]
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    #[serde(default = "theta_bound")]
    pub bound: f64,
    #[serde(default = "theta_points")]
    pub points: usize,
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec {
            bound: theta_bound(),
            points: theta_points(),
        }
    }
}

/// `g` as a functional string (`mean`, `cov:1`, `corr`, ...), optionally with
/// a composition (`identity`, `ratio`) or a symmetric `θ`-grid. With `theta`
/// set, `g` is ignored and the target is `θ ↦ E cos(θX)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    #[serde(default = "g_default")]
    pub g: String,
    #[serde(default)]
    pub composition: Option<String>,
    #[serde(default)]
    pub theta: Option<ThetaSpec>,
}

impl Default for FunctionalSpec {
    fn default() -> Self {
        FunctionalSpec {
            g: g_default(),
            composition: None,
            theta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    /// Grid `{k/m : k = 1..m}`.
    #[serde(default = "grid_size")]
    pub grid_size: usize,
    /// Leave-out truncation cutoff, in kernel-argument units.
    pub cutoff: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub strategy: MinimumStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LepskiSpec {
    #[serde(default = "c_sharp")]
    pub c_sharp: f64,
    #[serde(default = "ratio")]
    pub ratio: f64,
    #[serde(default = "h_lower")]
    pub h_lower: f64,
    #[serde(default = "eta")]
    pub eta: f64,
    #[serde(default = "lag_window")]
    pub lag_window: usize,
    #[serde(default = "yes")]
    pub centered: bool,
}

impl Default for LepskiSpec {
    fn default() -> Self {
        LepskiSpec {
            c_sharp: c_sharp(),
            ratio: ratio(),
            h_lower: h_lower(),
            eta: eta(),
            lag_window: lag_window(),
            centered: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SelectorSpec {
    Cv(CvSpec),
    Lepski(LepskiSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub functional: FunctionalSpec,
    pub selector: SelectorSpec,
    #[serde(default = "replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "u_grid_points")]
    pub u_grid_points: usize,
    #[serde(default = "weight_gamma")]
    pub weight_gamma: f64,
    #[serde(default = "kernel")]
    pub kernel: String,
    #[serde(default)]
    pub truth: TruthSource,
    /// Worker threads; `None` uses the rayon default.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// A configured study, ready to replicate.
#[derive(Debug, Clone)]
pub enum Study {
    Cv(Box<CvStudy>),
    Lepski(Box<LepskiStudy>),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The config with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.model.n < 10 {
            return bad(format!("n = {} is too short", self.model.n));
        }
        if self.model.burn_in < DEFAULT_BURN_IN {
            return bad(format!("burn_in must be at least {DEFAULT_BURN_IN}"));
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.u_grid_points < 2 {
            return bad("u_grid_points must be at least 2".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if let Some(t) = &self.functional.theta {
            if !(t.bound > 0.0) || t.points < 2 {
                return bad("theta grid needs bound > 0 and at least 2 points".into());
            }
            if self.functional.composition.is_some() {
                return bad("theta and composition are mutually exclusive".into());
            }
        }
        self.kernel()?;
        self.functional()?;
        self.composition()?;
        self.weight()?;
        match &self.selector {
            SelectorSpec::Cv(_) => {
                self.cv_config()?;
            }
            SelectorSpec::Lepski(l) => {
                if self.functional.theta.is_some() || self.functional.composition.is_some() {
                    return bad("the local selector takes a plain functional".into());
                }
                GeometricGrid::new(l.ratio, l.h_lower).map_err(config_error)?;
                if !(l.c_sharp > 0.0) || !(l.eta > 0.0) {
                    return bad("c_sharp and eta must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        self.kernel.parse().map_err(config_error)
    }

    pub fn functional(&self) -> Result<MomentFunctional> {
        self.functional.g.parse().map_err(config_error)
    }

    pub fn composition(&self) -> Result<Option<Composition>> {
        let Some(name) = &self.functional.composition else {
            return Ok(None);
        };
        let d = self.functional()?.output_dim();
        let f = match name.as_str() {
            "identity" => Composition::identity(d),
            "ratio" if d == 2 => Composition::ratio(),
            "ratio" => return Err(Error::Config("ratio needs a two-dimensional functional".into())),
            other => return Err(Error::Config(format!("unknown composition `{other}`"))),
        };
        Ok(Some(f))
    }

    pub fn weight(&self) -> Result<WeightFunction> {
        WeightFunction::new(self.weight_gamma).map_err(config_error)
    }

    pub fn u_grid(&self) -> Vec<f64> {
        linspace(0.0, 1.0, self.u_grid_points)
    }

    pub fn thetas(&self) -> Option<Vec<f64>> {
        self.functional
            .theta
            .as_ref()
            .map(|t| linspace(-t.bound, t.bound, t.points))
    }

    pub fn cv_config(&self) -> Result<CvConfig> {
        let SelectorSpec::Cv(spec) = &self.selector else {
            return Err(Error::Config("selector is not cross validation".into()));
        };
        let grid = BandwidthGrid::uniform(spec.grid_size).map_err(config_error)?;
        let mut cfg = CvConfig::new(spec.cutoff)
            .map_err(config_error)?
            .with_grid(grid)
            .with_strategy(spec.strategy)
            .with_weight(self.weight()?);
        cfg.epsilon = spec.epsilon;
        cfg.kernel = self.kernel()?;
        cfg.truncated_kernel().map_err(config_error)?;
        Ok(cfg)
    }

    pub fn cv_target(&self) -> Result<CvTarget> {
        if let Some(thetas) = self.thetas() {
            return Ok(CvTarget::Functional { thetas });
        }
        let g = self.functional()?;
        Ok(match self.composition()? {
            Some(f) => CvTarget::Composition { g, f },
            None => CvTarget::Plain(g),
        })
    }

    /// Builds the study, computing the ground truth once.
    pub fn study(&self) -> Result<Study> {
        self.validate()?;
        let curve = self.model.curve.clone();
        let n = self.model.n;
        match &self.selector {
            SelectorSpec::Cv(_) => {
                let mut s = CvStudy::new(curve, n, self.cv_target()?, self.cv_config()?, self.u_grid(), &self.truth)?;
                s.burn_in = self.model.burn_in;
                Ok(Study::Cv(Box::new(s)))
            }
            SelectorSpec::Lepski(l) => {
                let lrv = LrvParams {
                    eta: l.eta,
                    lag_window: l.lag_window,
                    centered: l.centered,
                };
                let mut s = LepskiStudy::new(
                    curve,
                    n,
                    self.functional()?,
                    GeometricGrid::new(l.ratio, l.h_lower)?,
                    l.c_sharp,
                    lrv,
                    self.u_grid(),
                    self.weight()?,
                    &self.truth,
                )?;
                s.burn_in = self.model.burn_in;
                s.kernel = self.kernel()?;
                Ok(Study::Lepski(Box::new(s)))
            }
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
