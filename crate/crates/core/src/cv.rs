//! Global bandwidth choice by leave-out cross validation.
//!
//! The objective for a bandwidth `h` is
//! `H(h) = (1/n) Σ_t |g(Y_t) - Ĝ⁻_h(t/n)|² w(t/n)`, with variants that
//! weight the residual by a Jacobian (composed targets) or integrate over
//! a family `g_θ` (functional targets).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, TruncatedKernel};
use crate::moments::{Composition, EstimateCurve, MomentFunctional, MomentSeries, SampleFit, Variant};

/// Share of weighted points allowed to have zero leave-out mass.
pub const INFEASIBLE_SHARE: f64 = 0.01;

/// `w = 1{γ <= u <= 1-γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub gamma: f64,
}

impl WeightFunction {
    /// `γ ∈ [0, 1/2)`; `γ = 0` covers the whole interval and is only meant
    /// for distances, not for cross validation.
    pub fn new(gamma: f64) -> Result<Self> {
        if (0.0..0.5).contains(&gamma) {
            Ok(WeightFunction { gamma })
        } else {
            Err(Error::InvalidParameter(format!("weight trim γ = {gamma} outside [0, 1/2)")))
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u >= self.gamma && u <= 1.0 - self.gamma {
            1.0
        } else {
            0.0
        }
    }

    /// Weight at the sample point `t/n`, one-based `t`.
    #[inline]
    fn at_sample(&self, t: usize, n: usize) -> f64 {
        self.eval(t as f64 / n as f64)
    }
}

impl Default for WeightFunction {
    fn default() -> Self {
        WeightFunction { gamma: 0.05 }
    }
}

/// Candidate bandwidths in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BandwidthGrid(Vec<f64>);

impl BandwidthGrid {
    /// `{k/m : k = 1..m}`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(BandwidthGrid((1..=m).map(|k| k as f64 / m as f64).collect()))
    }

    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(h) = values.iter().find(|h| !(**h > 0.0 && **h <= 1.0)) {
            return Err(Error::InvalidBandwidth(*h));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(BandwidthGrid(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Spacing of a uniform grid (first gap).
    pub fn step(&self) -> f64 {
        if self.0.len() > 1 {
            self.0[1] - self.0[0]
        } else {
            self.0[0]
        }
    }
}

impl TryFrom<Vec<f64>> for BandwidthGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        BandwidthGrid::new(v)
    }
}

impl From<BandwidthGrid> for Vec<f64> {
    fn from(g: BandwidthGrid) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimumStrategy {
    #[default]
    LargestLocalMin,
    SmallestLocalMin,
    GlobalMin,
}

impl fmt::Display for MinimumStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MinimumStrategy::LargestLocalMin => "largest_local_min",
            MinimumStrategy::SmallestLocalMin => "smallest_local_min",
            MinimumStrategy::GlobalMin => "global_min",
        })
    }
}

impl FromStr for MinimumStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest_local_min" | "largest" => Ok(MinimumStrategy::LargestLocalMin),
            "smallest_local_min" | "smallest" => Ok(MinimumStrategy::SmallestLocalMin),
            "global_min" | "global" => Ok(MinimumStrategy::GlobalMin),
            _ => Err(Error::Config(format!("unknown minimum strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub grid: BandwidthGrid,
    /// Truncation cutoff of the leave-out kernel in kernel-argument units.
    pub cutoff: f64,
    pub epsilon: f64,
    pub weight: WeightFunction,
    pub strategy: MinimumStrategy,
    pub kernel: Kernel,
}

impl CvConfig {
    pub fn new(cutoff: f64) -> Result<Self> {
        let cfg = CvConfig {
            grid: BandwidthGrid::uniform(50)?,
            cutoff,
            epsilon: 0.0,
            weight: WeightFunction::default(),
            strategy: MinimumStrategy::default(),
            kernel: Kernel::epanechnikov(),
        };
        cfg.truncated_kernel()?;
        Ok(cfg)
    }

    pub fn with_grid(mut self, grid: BandwidthGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_strategy(mut self, strategy: MinimumStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_weight(mut self, weight: WeightFunction) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn truncated_kernel(&self) -> Result<TruncatedKernel> {
        if self.weight.gamma <= 0.0 {
            return Err(Error::InvalidParameter("cross validation needs a weight trim γ > 0".into()));
        }
        TruncatedKernel::new(self.kernel.clone(), self.cutoff, self.epsilon)
    }
}

/// Objective value at one bandwidth, with feasibility bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub h: f64,
    /// `None` when the bandwidth is infeasible.
    pub value: Option<f64>,
    /// Weighted points dropped for zero mass or a non-finite Jacobian.
    pub excluded: usize,
    pub weighted: usize,
}

impl ObjectivePoint {
    fn from_sums(h: f64, total: f64, excluded: usize, weighted: usize, n: usize) -> Self {
        let feasible = weighted > 0 && (excluded as f64) <= INFEASIBLE_SHARE * weighted as f64;
        ObjectivePoint {
            h,
            value: feasible.then(|| total / n as f64),
            excluded,
            weighted,
        }
    }

    pub fn require(self) -> Result<f64> {
        self.value.ok_or(Error::InfeasibleBandwidth {
            h: self.h,
            zero_mass: self.excluded,
            weighted: self.weighted,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub h_hat: f64,
    pub objective: Vec<ObjectivePoint>,
    pub local_minima: Vec<f64>,
    pub strategy_used: MinimumStrategy,
    /// No interior local minimum existed; the global minimum was used.
    pub fallback: bool,
    pub cutoff: f64,
}

impl CvResult {
    pub fn objective_at(&self, h: f64) -> Option<f64> {
        self.objective.iter().find(|p| p.h == h).and_then(|p| p.value)
    }

    /// CSV rows `h,objective` followed by a `# h_hat=…` summary comment.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "h,objective,excluded,weighted")?;
        for p in &self.objective {
            let v = p.value.map_or("NaN".to_string(), |v| v.to_string());
            writeln!(out, "{},{},{},{}", p.h, v, p.excluded, p.weighted)?;
        }
        writeln!(
            out,
            "# h_hat={},strategy={},fallback={},cutoff={},local_minima={}",
            self.h_hat,
            self.strategy_used,
            self.fallback,
            self.cutoff,
            self.local_minima.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(";")
        )?;
        Ok(())
    }
}

/// Sum over weighted `t` of `|residual|²`, where `residual` maps `(t, g_t, fit_t)`
/// to a squared norm or `None` (excluded point).
fn accumulate(
    series: &MomentSeries,
    fit: &SampleFit,
    weight: &WeightFunction,
    mut sq_norm: impl FnMut(usize, &[f64], &[f64]) -> Option<f64>,
) -> (f64, usize, usize) {
    let n = series.len();
    let (mut total, mut excluded, mut weighted) = (0.0, 0, 0);
    for t in 0..n {
        let w = weight.at_sample(t + 1, n);
        if w == 0.0 {
            continue;
        }
        weighted += 1;
        match fit.row(t).and_then(|f| sq_norm(t, series.row(t), f)) {
            Some(r) if r.is_finite() => total += w * r,
            _ => excluded += 1,
        }
    }
    (total, excluded, weighted)
}

fn squared_residual(g: &[f64], fit: &[f64]) -> f64 {
    g.iter().zip(fit).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `H(Ĝ⁻_h)` for one bandwidth.
pub fn cv_objective(series: &MomentSeries, h: f64, config: &CvConfig) -> Result<ObjectivePoint> {
    let tk = config.truncated_kernel()?;
    let fit = series.leaveout_at_samples(h, &tk)?;
    let (total, excluded, weighted) = accumulate(series, &fit, &config.weight, |_, g, f| Some(squared_residual(g, f)));
    Ok(ObjectivePoint::from_sums(h, total, excluded, weighted, series.len()))
}

/// Per-component objective sums for every component in one pass.
fn component_objectives(series: &MomentSeries, h: f64, config: &CvConfig) -> Result<(Vec<f64>, usize, usize)> {
    let tk = config.truncated_kernel()?;
    let fit = series.leaveout_at_samples(h, &tk)?;
    let d = series.dim();
    let mut sums = vec![0.0; d];
    let (_, excluded, weighted) = accumulate(series, &fit, &config.weight, |_, g, f| {
        for j in 0..d {
            sums[j] += (g[j] - f[j]).powi(2);
        }
        Some(0.0)
    });
    let n = series.len() as f64;
    Ok((sums.into_iter().map(|s| s / n).collect(), excluded, weighted))
}

/// Objective over the whole grid.
pub fn objective_curve(series: &MomentSeries, config: &CvConfig) -> Result<Vec<ObjectivePoint>> {
    config.grid.values().iter().map(|&h| cv_objective(series, h, config)).collect()
}

/// Interior strict local minima of a curve ordered by `h`. Infeasible points
/// are skipped; a plateau counts once, represented by its largest `h`.
pub fn local_minima(points: &[ObjectivePoint]) -> Vec<f64> {
    let feasible: Vec<(f64, f64)> = points.iter().filter_map(|p| p.value.map(|v| (p.h, v))).collect();
    let mut minima = Vec::new();
    let mut i = 0;
    while i < feasible.len() {
        let mut j = i;
        while j + 1 < feasible.len() && feasible[j + 1].1 == feasible[i].1 {
            j += 1;
        }
        let left_higher = i > 0 && feasible[i - 1].1 > feasible[i].1;
        let right_higher = j + 1 < feasible.len() && feasible[j + 1].1 > feasible[i].1;
        if left_higher && right_higher {
            minima.push(feasible[j].0);
        }
        i = j + 1;
    }
    minima
}

/// Global minimizer; ties go to the larger `h`.
pub fn global_minimum(points: &[ObjectivePoint]) -> Option<f64> {
    points
        .iter()
        .filter_map(|p| p.value.map(|v| (p.h, v)))
        .fold(None, |best: Option<(f64, f64)>, (h, v)| match best {
            Some((_, bv)) if v > bv => best,
            _ => Some((h, v)),
        })
        .map(|(h, _)| h)
}

/// Applies `strategy` to an evaluated objective curve.
pub fn choose(points: Vec<ObjectivePoint>, strategy: MinimumStrategy, cutoff: f64) -> Result<CvResult> {
    let global = global_minimum(&points).ok_or(Error::AllInfeasible)?;
    let minima = local_minima(&points);
    let local = match strategy {
        MinimumStrategy::LargestLocalMin => minima.last().copied(),
        MinimumStrategy::SmallestLocalMin => minima.first().copied(),
        MinimumStrategy::GlobalMin => Some(global),
    };
    let (h_hat, strategy_used, fallback) = match local {
        Some(h) => (h, strategy, false),
        None => (global, MinimumStrategy::GlobalMin, true),
    };
    Ok(CvResult {
        h_hat,
        objective: points,
        local_minima: minima,
        strategy_used,
        fallback,
        cutoff,
    })
}

pub fn select_cv(series: &MomentSeries, config: &CvConfig) -> Result<CvResult> {
    choose(objective_curve(series, config)?, config.strategy, config.cutoff)
}

/// Values `G(t/n)` at every sample point, used inside Jacobian weights.
pub type PluginCurve = EstimateCurve;

/// Sample points `t/n`, `t = 1..n`.
pub fn sample_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|t| t as f64 / n as f64).collect()
}

/// Pilot curve for composed targets: each component gets its own plain CV
/// bandwidth, then `Ĝ°` at that bandwidth is evaluated at every `t/n`.
pub fn composition_plugin(series: &MomentSeries, config: &CvConfig) -> Result<(PluginCurve, Vec<f64>)> {
    let n = series.len();
    let d = series.dim();
    let mut pilot_h = Vec::with_capacity(d);
    let mut columns = Vec::with_capacity(d);
    for j in 0..d {
        let comp = series.component(j);
        let h = select_cv(&comp, config)?.h_hat;
        pilot_h.push(h);
        columns.push(comp.normalized_at_samples(h, &config.kernel)?);
    }
    let values = (0..n)
        .map(|t| columns.iter().map(|c| c.row(t).map(|r| r[0])).collect::<Option<Vec<f64>>>())
        .collect();
    Ok((
        EstimateCurve {
            u_grid: sample_grid(n),
            values,
            h: f64::NAN,
            variant: Variant::Normalized,
            dim: d,
        },
        pilot_h,
    ))
}

/// `(1/n) Σ_t |dF(G(t/n)) (g(Y_t) - Ĝ⁻_h(t/n))|² w(t/n)`.
pub fn cv_objective_composition(
    series: &MomentSeries,
    f: &Composition,
    plugin: &PluginCurve,
    h: f64,
    config: &CvConfig,
) -> Result<ObjectivePoint> {
    let n = series.len();
    if plugin.values.len() != n {
        return Err(Error::GridMismatch(format!(
            "plug-in curve has {} points, expected one per observation ({n})",
            plugin.values.len()
        )));
    }
    if f.input_dim != series.dim() {
        return Err(Error::GridMismatch(format!(
            "composition expects dimension {}, functional has {}",
            f.input_dim,
            series.dim()
        )));
    }
    let tk = config.truncated_kernel()?;
    let fit = series.leaveout_at_samples(h, &tk)?;
    let d = series.dim();
    let mut resid = vec![0.0; d];
    let (total, excluded, weighted) = accumulate(series, &fit, &config.weight, |t, g, fv| {
        let point = plugin.values[t].as_ref()?;
        let jac = f.jacobian(point);
        if jac.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for j in 0..d {
            resid[j] = g[j] - fv[j];
        }
        Some(
            (0..f.output_dim)
                .map(|i| {
                    let row = &jac[i * d..(i + 1) * d];
                    let v: f64 = row.iter().zip(&resid).map(|(a, b)| a * b).sum();
                    v * v
                })
                .sum(),
        )
    });
    Ok(ObjectivePoint::from_sums(h, total, excluded, weighted, n))
}

pub fn select_cv_composition(
    series: &MomentSeries,
    f: &Composition,
    plugin: &PluginCurve,
    config: &CvConfig,
) -> Result<CvResult> {
    let points = config
        .grid
        .values()
        .iter()
        .map(|&h| cv_objective_composition(series, f, plugin, h, config))
        .collect::<Result<Vec<_>>>()?;
    choose(points, config.strategy, config.cutoff)
}

/// Trapezoid weights for a sorted, uniformly spaced grid. A single point
/// gets weight 1.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    match grid.len() {
        0 => vec![],
        1 => vec![1.0],
        m => (0..m)
            .map(|i| {
                let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
                let right = if i + 1 < m { grid[i + 1] - grid[i] } else { 0.0 };
                (left + right) / 2.0
            })
            .collect(),
    }
}

/// Uniform grid of `m` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![lo],
        _ => (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect(),
    }
}

/// Distinct `|θ|` values in order of appearance, and the position of each
/// `θ` among them.
pub fn theta_components(thetas: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut abs_thetas: Vec<f64> = Vec::new();
    let index = thetas
        .iter()
        .map(|t| {
            let a = t.abs();
            abs_thetas.iter().position(|&v| v == a).unwrap_or_else(|| {
                abs_thetas.push(a);
                abs_thetas.len() - 1
            })
        })
        .collect();
    (abs_thetas, index)
}

/// A family `θ ↦ cos(θ X_t)` integrated over `θ`. Since the cosine is even,
/// `±θ` share one series component.
#[derive(Debug, Clone)]
pub struct CharCosFamily {
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Distinct `|θ|` values, one series component each.
    pub abs_thetas: Vec<f64>,
    /// Component index for each entry of `thetas`.
    pub index: Vec<usize>,
    pub series: MomentSeries,
}

impl CharCosFamily {
    pub fn new(x: &[f64], thetas: &[f64]) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let (abs_thetas, index) = theta_components(thetas);
        let g = MomentFunctional::char_cos_family(&abs_thetas);
        Ok(CharCosFamily {
            thetas: thetas.to_vec(),
            weights: trapezoid_weights(thetas),
            abs_thetas,
            index,
            series: MomentSeries::new(x, &g),
        })
    }

    /// Uniform `m`-point grid on `[-bound, bound]`.
    pub fn symmetric(x: &[f64], bound: f64, m: usize) -> Result<Self> {
        Self::new(x, &linspace(-bound, bound, m))
    }

    /// Combines per-component values by the trapezoid rule over `θ`.
    pub fn integrate(&self, per_component: &[f64]) -> f64 {
        self.index.iter().zip(&self.weights).map(|(&i, w)| w * per_component[i]).sum()
    }
}

/// `∫_Θ H(Ĝ⁻_{h,θ}) dθ` by the trapezoid rule.
pub fn cv_objective_functional(family: &CharCosFamily, h: f64, config: &CvConfig) -> Result<ObjectivePoint> {
    let (per, excluded, weighted) = component_objectives(&family.series, h, config)?;
    let mut point = ObjectivePoint::from_sums(h, 0.0, excluded, weighted, family.series.len());
    point.value = point.value.map(|_| family.integrate(&per));
    Ok(point)
}

pub fn select_cv_functional(family: &CharCosFamily, config: &CvConfig) -> Result<CvResult> {
    let points = config
        .grid
        .values()
        .iter()
        .map(|&h| cv_objective_functional(family, h, config))
        .collect::<Result<Vec<_>>>()?;
    choose(points, config.strategy, config.cutoff)
}

/// Objective curve for one truncation cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCurve {
    pub cutoff: f64,
    pub objective: Vec<ObjectivePoint>,
    pub local_minima: Vec<f64>,
}

impl AlphaCurve {
    pub fn all_infeasible(&self) -> bool {
        self.objective.iter().all(|p| p.value.is_none())
    }
}

/// Recomputes the objective curve for each cutoff.
pub fn alpha_sweep(series: &MomentSeries, cutoffs: &[f64], config: &CvConfig) -> Result<Vec<AlphaCurve>> {
    cutoffs
        .iter()
        .map(|&c| {
            let cfg = config.clone().with_cutoff(c);
            let objective = objective_curve(series, &cfg)?;
            Ok(AlphaCurve {
                cutoff: c,
                local_minima: local_minima(&objective),
                objective,
            })
        })
        .collect()
}

/// `{0.01, 0.02, …, 0.35}`.
pub fn default_alpha_cutoffs() -> Vec<f64> {
    (1..=35).map(|k| k as f64 / 100.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{simulate_tvar, CoefficientCurve};

    fn pts(values: &[Option<f64>]) -> Vec<ObjectivePoint> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| ObjectivePoint {
                h: (i + 1) as f64 / 10.0,
                value: *v,
                excluded: 0,
                weighted: 1,
            })
            .collect()
    }

    #[test]
    fn local_minimum_rules() {
        let p = pts(&[Some(5.0), Some(3.0), Some(4.0), Some(2.0), Some(2.0), Some(6.0), Some(1.0)]);
        assert_eq!(local_minima(&p), vec![0.2, 0.5]);
        assert_eq!(choose(p.clone(), MinimumStrategy::LargestLocalMin, 0.1).unwrap().h_hat, 0.5);
        assert_eq!(choose(p.clone(), MinimumStrategy::SmallestLocalMin, 0.1).unwrap().h_hat, 0.2);
        assert_eq!(choose(p, MinimumStrategy::GlobalMin, 0.1).unwrap().h_hat, 0.7);

        let decreasing = pts(&[Some(4.0), Some(3.0), Some(2.0)]);
        let r = choose(decreasing, MinimumStrategy::LargestLocalMin, 0.1).unwrap();
        assert!(r.fallback);
        assert_eq!(r.h_hat, 0.3);
        assert_eq!(r.strategy_used, MinimumStrategy::GlobalMin);

        let dip = pts(&[Some(4.0), Some(1.0), Some(2.0)]);
        for s in [MinimumStrategy::LargestLocalMin, MinimumStrategy::SmallestLocalMin, MinimumStrategy::GlobalMin] {
            assert_eq!(choose(dip.clone(), s, 0.1).unwrap().h_hat, 0.2);
        }
        let tie = pts(&[Some(1.0), Some(2.0), Some(1.0)]);
        assert_eq!(global_minimum(&tie), Some(0.3));
        assert!(matches!(choose(pts(&[None, None]), MinimumStrategy::GlobalMin, 0.1), Err(Error::AllInfeasible)));
    }

    #[test]
    fn constant_path_has_zero_objective() {
        let s = MomentSeries::new(&vec![1.7; 400], &MomentFunctional::Mean);
        let cfg = CvConfig::new(0.12).unwrap();
        for p in objective_curve(&s, &cfg).unwrap() {
            if let Some(v) = p.value {
                assert!(v.abs() < 1e-24);
            }
        }
    }

    #[test]
    fn large_h_on_white_noise_is_sample_variance() {
        let p = simulate_tvar(&CoefficientCurve::Constant(0.0), 4000, 5, 10).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::Mean);
        let cfg = CvConfig::new(0.05).unwrap();
        let v = cv_objective(&s, 1.0, &cfg).unwrap().require().unwrap();
        let w: Vec<f64> = (1..=4000)
            .filter(|t| cfg.weight.eval(*t as f64 / 4000.0) > 0.0)
            .map(|t| p.values[t - 1])
            .collect();
        let m = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4000.0;
        assert!((v - var).abs() / var < 0.05, "{v} vs {var}");
    }

    #[test]
    fn infeasible_when_window_is_dead() {
        // cutoff at the support edge kills every weight
        let s = MomentSeries::new(&vec![1.0; 200], &MomentFunctional::Mean);
        let cfg = CvConfig::new(0.5).unwrap();
        let curve = alpha_sweep(&s, &[0.5], &cfg).unwrap();
        assert!(curve[0].all_infeasible());
        assert!(matches!(select_cv(&s, &cfg), Err(Error::AllInfeasible)));
        assert!(cv_objective(&s, 0.3, &cfg).unwrap().require().is_err());
    }

    #[test]
    fn identity_composition_matches_plain() {
        let p = simulate_tvar(&CoefficientCurve::SinScaled, 500, 21, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::correlation_pair());
        let cfg = CvConfig::new(0.08).unwrap();
        let (plugin, _) = composition_plugin(&s, &cfg).unwrap();
        let id = Composition::identity(2);
        for &h in &[0.1, 0.3, 0.8] {
            let a = cv_objective(&s, h, &cfg).unwrap().value.unwrap();
            let b = cv_objective_composition(&s, &id, &plugin, h, &cfg).unwrap().value.unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn ratio_composition_matches_displayed_formula() {
        // with the true c(u,0), c(u,1) as plug-in
        let curve = CoefficientCurve::SinScaled;
        let n = 500;
        let p = simulate_tvar(&curve, n, 4, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::correlation_pair());
        let cfg = CvConfig::new(0.08).unwrap();
        let plugin = EstimateCurve {
            u_grid: sample_grid(n),
            values: sample_grid(n)
                .iter()
                .map(|&u| {
                    let a = curve.value(u);
                    Some(vec![1.0 / (1.0 - a * a), a / (1.0 - a * a)])
                })
                .collect(),
            h: f64::NAN,
            variant: Variant::Normalized,
            dim: 2,
        };
        let h = 0.2;
        let got = cv_objective_composition(&s, &Composition::ratio(), &plugin, h, &cfg).unwrap().value.unwrap();
        let tk = cfg.truncated_kernel().unwrap();
        let fit = s.leaveout_at_samples(h, &tk).unwrap();
        let mut expected = 0.0;
        for t in 1..n {
            let u = (t + 1) as f64 / n as f64;
            if cfg.weight.eval(u) == 0.0 {
                continue;
            }
            let a = curve.value(u);
            let (c0, c1) = (1.0 / (1.0 - a * a), a / (1.0 - a * a));
            let f = fit.row(t).unwrap();
            let (x, xl) = (p.values[t], p.values[t - 1]);
            // dF·(g - Ĝ⁻) with g = (X_{t-1}², X_t X_{t-1})
            let lin = -c1 / (c0 * c0) * (xl * xl - f[0]) + (x * xl - f[1]) / c0;
            expected += lin * lin;
        }
        expected /= n as f64;
        assert!((got - expected).abs() < 1e-12 * expected);
        // with exact Ĝ⁻ = G the residual reduces to X_{t-1}²/c0² (X_t - γ X_{t-1})²
        let (x, xl, c0, c1) = (0.4f64, 1.3f64, 2.0f64, 0.8f64);
        let lin = -c1 / (c0 * c0) * (xl * xl - c0) + (x * xl - c1) / c0;
        let displayed = xl * xl / (c0 * c0) * (x - c1 / c0 * xl).powi(2);
        assert!((lin * lin - displayed).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_rules() {
        assert_eq!(trapezoid_weights(&[3.0]), vec![1.0]);
        let w = trapezoid_weights(&linspace(-10.0, 10.0, 41));
        assert!((w.iter().sum::<f64>() - 20.0).abs() < 1e-12);
        assert_eq!(w[0], 0.25);
        assert_eq!(w[1], 0.5);
    }

    #[test]
    fn functional_objective_is_even_and_stable() {
        let p = simulate_tvar(&CoefficientCurve::SinFull, 500, 9, 1000).unwrap();
        let cfg = CvConfig::new(0.10).unwrap();
        let fam = CharCosFamily::symmetric(&p.values, 10.0, 41).unwrap();
        assert_eq!(fam.abs_thetas.len(), 21);
        assert_eq!(fam.index[0], fam.index[40]);
        let single = CharCosFamily::new(&p.values, &[1.5]).unwrap();
        let plain = cv_objective(&MomentSeries::new(&p.values, &MomentFunctional::CharCos(1.5)), 0.2, &cfg)
            .unwrap()
            .value
            .unwrap();
        assert!((cv_objective_functional(&single, 0.2, &cfg).unwrap().value.unwrap() - plain).abs() < 1e-14);
        // doubling the θ resolution moves the objective by < 1%
        let fine = CharCosFamily::symmetric(&p.values, 10.0, 81).unwrap();
        for &h in &[0.1, 0.3] {
            let a = cv_objective_functional(&fam, h, &cfg).unwrap().value.unwrap();
            let b = cv_objective_functional(&fine, h, &cfg).unwrap().value.unwrap();
            assert!((a - b).abs() / b < 0.01, "h={h}: {a} vs {b}");
        }
    }

    #[test]
    fn sweep_with_one_cutoff_matches_curve() {
        let p = simulate_tvar(&CoefficientCurve::SinFull, 500, 1, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::CovarianceLag(1));
        let cfg = CvConfig::new(0.12).unwrap();
        let sweep = alpha_sweep(&s, &[0.12], &cfg).unwrap();
        assert_eq!(sweep[0].objective, objective_curve(&s, &cfg).unwrap());
        assert_eq!(default_alpha_cutoffs().len(), 35);
    }

    #[test]
    fn grid_validation() {
        assert_eq!(BandwidthGrid::uniform(50).unwrap().len(), 50);
        assert!(BandwidthGrid::new(vec![]).is_err());
        assert!(BandwidthGrid::new(vec![0.5, 1.2]).is_err());
        assert!(WeightFunction::new(0.5).is_err());
        let w = WeightFunction::new(0.05).unwrap();
        assert_eq!((w.eval(0.0), w.eval(1.0), w.eval(0.5)), (0.0, 0.0, 1.0));
        assert!(matches!("global".parse::<MinimumStrategy>(), Ok(MinimumStrategy::GlobalMin)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn objective_scales_with_fourth_power(seed in 0u64..500, a in 0.2f64..5.0, k in 0usize..3) {
                let p = simulate_tvar(&CoefficientCurve::SinScaled, 300, seed, 200).unwrap();
                let scaled: Vec<f64> = p.values.iter().map(|x| a * x).collect();
                let g = MomentFunctional::CovarianceLag(k);
                let cfg = CvConfig::new(0.12).unwrap().with_grid(BandwidthGrid::uniform(20).unwrap());
                let r0 = select_cv(&MomentSeries::new(&p.values, &g), &cfg).unwrap();
                let r1 = select_cv(&MomentSeries::new(&scaled, &g), &cfg).unwrap();
                let a4 = a.powi(4);
                for (p0, p1) in r0.objective.iter().zip(&r1.objective) {
                    let (v0, v1) = (p0.value.unwrap(), p1.value.unwrap());
                    prop_assert!(v0 >= 0.0);
                    prop_assert!((v1 - a4 * v0).abs() <= 1e-9 * v1.abs().max(1e-300));
                }
                prop_assert_eq!(r0.h_hat, r1.h_hat);
                prop_assert_eq!(r0.local_minima, r1.local_minima);
            }
        }
    }
}
