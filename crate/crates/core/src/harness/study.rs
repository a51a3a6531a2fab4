//! One replication of a selection study: simulate, select, score.

use serde::{Deserialize, Serialize};

use crate::cv::{
    composition_plugin, select_cv, select_cv_composition, select_cv_functional, theta_components, CharCosFamily,
    CvConfig, CvResult, WeightFunction,
};
use crate::error::{Error, Result};
use crate::evaluation::{argmin_larger, distance_components, distance_dm, distance_dm_comp, h_opt_global};
use crate::kernels::Kernel;
use crate::lepski::{estimate_longrun_variance, select_from_estimates, GeometricGrid, LrvParams};
use crate::moments::{Composition, EstimateCurve, Estimator, MomentFunctional, MomentSeries, Variant};
use crate::processes::{
    closed_form_truth, mc_ground_truth, simulate_tvar, CoefficientCurve, GroundTruth, McTruthConfig, StreamSeed,
    DEFAULT_BURN_IN,
};

/// Where the ground truth comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TruthSource {
    ClosedForm,
    MonteCarlo(McTruthConfig),
}

impl Default for TruthSource {
    fn default() -> Self {
        TruthSource::ClosedForm
    }
}

pub fn build_truth(
    curve: &CoefficientCurve,
    g: &MomentFunctional,
    u_grid: &[f64],
    source: &TruthSource,
) -> Result<GroundTruth> {
    match source {
        TruthSource::ClosedForm => closed_form_truth(curve, g, u_grid),
        TruthSource::MonteCarlo(cfg) => mc_ground_truth(curve, g, u_grid, cfg),
    }
}

#[derive(Debug, Clone)]
pub enum CvTarget {
    /// `G` itself.
    Plain(MomentFunctional),
    /// `F(G)` with Jacobian-weighted residuals.
    Composition { g: MomentFunctional, f: Composition },
    /// `θ ↦ E cos(θ X)` integrated over a `θ`-grid.
    Functional { thetas: Vec<f64> },
}

impl CvTarget {
    /// The functional whose truth is needed; for a `θ`-family, one
    /// component per distinct `|θ|`.
    pub fn functional(&self) -> MomentFunctional {
        match self {
            CvTarget::Plain(g) | CvTarget::Composition { g, .. } => g.clone(),
            CvTarget::Functional { thetas } => MomentFunctional::char_cos_family(&theta_components(thetas).0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvStudy {
    pub curve: CoefficientCurve,
    pub n: usize,
    pub burn_in: usize,
    pub target: CvTarget,
    pub cv: CvConfig,
    pub u_grid: Vec<f64>,
    pub truth: GroundTruth,
}

/// Outcome of one cross-validation replication. `distances[i]` is the
/// target distance at `cv.grid[i]` (`None` if it could not be scored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub h_hat: f64,
    pub fallback: bool,
    pub local_minima: Vec<f64>,
    pub h_star: f64,
    pub d_hat: f64,
    pub d_star: f64,
    pub ratio: f64,
    pub distances: Vec<Option<f64>>,
}

impl CvStudy {
    pub fn new(
        curve: CoefficientCurve,
        n: usize,
        target: CvTarget,
        cv: CvConfig,
        u_grid: Vec<f64>,
        truth: &TruthSource,
    ) -> Result<Self> {
        let truth = build_truth(&curve, &target.functional(), &u_grid, truth)?;
        Ok(CvStudy {
            curve,
            n,
            burn_in: DEFAULT_BURN_IN,
            target,
            cv,
            u_grid,
            truth,
        })
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.cv.weight
    }

    /// Formula bandwidth for plain targets, from the stored truth.
    pub fn h_opt_formula(&self) -> Option<f64> {
        match self.target {
            CvTarget::Plain(_) => h_opt_global(&self.truth, &self.cv.kernel, self.n, &self.cv.weight).ok(),
            _ => None,
        }
    }

    /// Selection and the target distance at every grid bandwidth.
    pub fn run_path(&self, x: &[f64]) -> Result<(CvResult, Vec<Option<f64>>)> {
        let raw = Estimator::Raw(self.cv.kernel.clone());
        let w = &self.cv.weight;
        let grid = self.cv.grid.values();
        let score = |series: &MomentSeries, f: &dyn Fn(&EstimateCurve) -> Result<f64>| -> Result<Vec<Option<f64>>> {
            grid.iter()
                .map(|&h| {
                    let est = series.estimate_curve(&self.u_grid, h, &raw)?;
                    match f(&est) {
                        Ok(d) => Ok(Some(d)),
                        Err(Error::MissingEstimate(_)) | Err(Error::NonFinite(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        };
        match &self.target {
            CvTarget::Plain(g) => {
                let series = MomentSeries::new(x, g);
                let res = select_cv(&series, &self.cv)?;
                let d = score(&series, &|e| distance_dm(e, &self.truth, w))?;
                Ok((res, d))
            }
            CvTarget::Composition { g, f } => {
                let series = MomentSeries::new(x, g);
                let (plugin, _) = composition_plugin(&series, &self.cv)?;
                let res = select_cv_composition(&series, f, &plugin, &self.cv)?;
                let d = score(&series, &|e| distance_dm_comp(e, &self.truth, f, w))?;
                Ok((res, d))
            }
            CvTarget::Functional { thetas } => {
                let family = CharCosFamily::new(x, thetas)?;
                let res = select_cv_functional(&family, &self.cv)?;
                let d = score(&family.series, &|e| {
                    Ok(family.integrate(&distance_components(e, &self.truth, w)?))
                })?;
                Ok((res, d))
            }
        }
    }

    pub fn replicate(&self, seed: StreamSeed) -> Result<CvRecord> {
        let path = simulate_tvar(&self.curve, self.n, seed, self.burn_in)?;
        let (res, distances) = self.run_path(&path.values)?;
        let grid = self.cv.grid.values();
        let best = argmin_larger(grid, &distances).ok_or(Error::AllInfeasible)?;
        let d_star = distances[best].expect("argmin is scored");
        let i_hat = grid.iter().position(|&h| h == res.h_hat).expect("ĥ lies on the grid");
        let d_hat = distances[i_hat].ok_or(Error::MissingEstimate(res.h_hat))?;
        Ok(CvRecord {
            h_hat: res.h_hat,
            fallback: res.fallback,
            local_minima: res.local_minima,
            h_star: grid[best],
            d_hat,
            d_star,
            ratio: d_hat / d_star,
            distances,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LepskiStudy {
    pub curve: CoefficientCurve,
    pub n: usize,
    pub burn_in: usize,
    pub g: MomentFunctional,
    pub grid: GeometricGrid,
    pub c_sharp: f64,
    pub lrv: LrvParams,
    pub kernel: Kernel,
    pub u_grid: Vec<f64>,
    pub weight: WeightFunction,
    pub truth: GroundTruth,
}

/// Outcome of one local-selection replication, with the best constant
/// bandwidth of the same grid as a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LepskiRecord {
    pub h_hat: Vec<f64>,
    /// `Ĝ°_{ĥ(u)}(u)`, first component.
    pub estimate: Vec<f64>,
    pub d_local: f64,
    /// Constant bandwidth minimizing the same distance on this path.
    pub h_star: f64,
    pub d_star: f64,
    pub oracle_estimate: Vec<Option<f64>>,
    pub at_minimum: usize,
    pub trace_clamped: usize,
}

impl LepskiStudy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        curve: CoefficientCurve,
        n: usize,
        g: MomentFunctional,
        grid: GeometricGrid,
        c_sharp: f64,
        lrv: LrvParams,
        u_grid: Vec<f64>,
        weight: WeightFunction,
        truth: &TruthSource,
    ) -> Result<Self> {
        let truth = build_truth(&curve, &g, &u_grid, truth)?;
        Ok(LepskiStudy {
            curve,
            n,
            burn_in: DEFAULT_BURN_IN,
            g,
            grid,
            c_sharp,
            lrv,
            kernel: Kernel::epanechnikov(),
            u_grid,
            weight,
            truth,
        })
    }

    pub fn run_path(&self, x: &[f64]) -> Result<LepskiRecord> {
        let series = MomentSeries::new(x, &self.g);
        let normalized = Estimator::Normalized(self.kernel.clone());
        // Ĝ°_h(u) for every grid h, shared by the selector and the benchmark
        let table: Vec<EstimateCurve> = self
            .grid
            .values()
            .iter()
            .map(|&h| series.estimate_curve(&self.u_grid, h, &normalized))
            .collect::<Result<_>>()?;
        let mut h_hat = Vec::with_capacity(self.u_grid.len());
        let mut values = Vec::with_capacity(self.u_grid.len());
        let (mut at_minimum, mut trace_clamped) = (0, 0);
        for (i, &u) in self.u_grid.iter().enumerate() {
            let column: Vec<Option<Vec<f64>>> = table.iter().map(|c| c.values[i].clone()).collect();
            let lrv = estimate_longrun_variance(&series, u, &self.lrv, &self.kernel)?;
            let sel = select_from_estimates(u, &self.grid, &column, self.c_sharp, &lrv, &self.kernel, series.len())?;
            at_minimum += usize::from(sel.at_grid_minimum(&self.grid));
            trace_clamped += usize::from(sel.trace_clamped);
            h_hat.push(sel.h_hat);
            values.push(Some(sel.estimate));
        }
        let local = EstimateCurve {
            u_grid: self.u_grid.clone(),
            values,
            h: f64::NAN,
            variant: Variant::Normalized,
            dim: series.dim(),
        };
        let d_local = distance_dm(&local, &self.truth, &self.weight)?;
        let distances: Vec<Option<f64>> = table
            .iter()
            .map(|c| match distance_dm(c, &self.truth, &self.weight) {
                Ok(d) => Ok(Some(d)),
                Err(Error::MissingEstimate(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let best = argmin_larger(self.grid.values(), &distances).ok_or(Error::AllInfeasible)?;
        Ok(LepskiRecord {
            estimate: local.values.iter().map(|v| v.as_ref().map_or(f64::NAN, |v| v[0])).collect(),
            h_hat,
            d_local,
            h_star: self.grid.values()[best],
            d_star: distances[best].expect("argmin is scored"),
            oracle_estimate: table[best].values.iter().map(|v| v.as_ref().map(|v| v[0])).collect(),
            at_minimum,
            trace_clamped,
        })
    }

    pub fn replicate(&self, seed: StreamSeed) -> Result<LepskiRecord> {
        let path = simulate_tvar(&self.curve, self.n, seed, self.burn_in)?;
        self.run_path(&path.values)
    }
}
