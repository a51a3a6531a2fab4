//! Pointwise bandwidth choice by contrast minimization.
//!
//! On a decreasing geometric grid, `ĥ(u)` is the largest `h` whose estimate
//! stays within `C# · v̂(h', u) · λ(h')` of every estimate at a smaller `h'`,
//! where `v̂²(h, u) = σ_K² tr Σ̂(u) / (nh)` is built from a kernel-weighted
//! long-run variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, Kernel};
use crate::moments::MomentSeries;

const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

/// `max(1, sqrt(log(1/h)))`.
pub fn lambda(h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    Ok((-h.ln()).sqrt().max(1.0))
}

/// Kernel-weighted long-run covariance `Σ̂(u)` as a row-major `d × d` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunVarianceEstimate {
    pub u: f64,
    pub sigma: Vec<f64>,
    pub dim: usize,
    pub eta: f64,
    pub lag_window: usize,
    pub centered: bool,
    /// The trace came out negative and was clamped to zero.
    pub clamped: bool,
}

impl LongRunVarianceEstimate {
    pub fn raw_trace(&self) -> f64 {
        (0..self.dim).map(|i| self.sigma[i * self.dim + i]).sum()
    }

    /// Trace, clamped at zero.
    pub fn trace(&self) -> f64 {
        self.raw_trace().max(0.0)
    }
}

/// Pilot settings for `Σ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrvParams {
    pub eta: f64,
    pub lag_window: usize,
    pub centered: bool,
}

impl Default for LrvParams {
    fn default() -> Self {
        LrvParams {
            eta: 0.35,
            lag_window: 18,
            centered: true,
        }
    }
}

/// `Σ_{k=-r}^{r} (1/n) Σ_t K_η(t/n - u) (g_t - m)(g_{t+k} - m)'`, with
/// `m = Ĝ°_η(u)` when centered and `m = 0` otherwise. Terms with `t + k`
/// outside the sample are dropped. The result is symmetrized.
pub fn estimate_longrun_variance(
    series: &MomentSeries,
    u: f64,
    params: &LrvParams,
    kernel: &Kernel,
) -> Result<LongRunVarianceEstimate> {
    let (eta, r) = (params.eta, params.lag_window);
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidBandwidth(eta));
    }
    let n = series.len();
    if r >= n {
        return Err(Error::InvalidParameter(format!("lag window {r} must be below n = {n}")));
    }
    let d = series.dim();
    let mean = if params.centered {
        series.estimate_normalized(u, eta, kernel)?
    } else {
        if series.kernel_mass(u, eta, kernel)? <= 0.0 {
            return Err(Error::ZeroMass { u, h: eta });
        }
        vec![0.0; d]
    };
    let nf = n as f64;
    let (un, neta) = (u * nf, nf * eta);
    let lo = ((un - neta / 2.0).floor().max(1.0) as usize).saturating_sub(1);
    let hi = ((un + neta / 2.0).ceil() as usize).min(n);
    // centered rows for every index a lag can reach
    let (first_row, last_row) = (lo.saturating_sub(r), (hi + r).min(n));
    let mut rows = vec![0.0; (last_row - first_row) * d];
    for t in first_row..last_row {
        for (j, (g, m)) in series.row(t).iter().zip(&mean).enumerate() {
            rows[(t - first_row) * d + j] = g - m;
        }
    }
    let row = |t: usize| &rows[(t - first_row) * d..(t - first_row + 1) * d];

    let mut sigma = vec![0.0; d * d];
    for t in lo..hi {
        let w = kernel.eval(((t + 1) as f64 - un) / neta);
        if w == 0.0 {
            continue;
        }
        let gt = row(t);
        let first = t.saturating_sub(r);
        let last = (t + r).min(n - 1);
        for s in first..=last {
            let gs = row(s);
            for i in 0..d {
                for j in 0..d {
                    sigma[i * d + j] += w * gt[i] * gs[j];
                }
            }
        }
    }
    let scale = 1.0 / (nf * eta);
    for i in 0..d {
        for j in i..d {
            let v = 0.5 * (sigma[i * d + j] + sigma[j * d + i]) * scale;
            sigma[i * d + j] = v;
            sigma[j * d + i] = v;
        }
    }
    let mut est = LongRunVarianceEstimate {
        u,
        sigma,
        dim: d,
        eta,
        lag_window: r,
        centered: params.centered,
        clamped: false,
    };
    est.clamped = est.raw_trace() < 0.0;
    Ok(est)
}

/// `sqrt(σ_K² tr Σ̂ / (nh))`; a negative trace counts as zero.
pub fn v_hat(h: f64, trace: f64, kernel: &Kernel, n: usize) -> Result<f64> {
    check_bandwidth(h)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok((kernel.constants().sigma_k_sq * trace.max(0.0) / (n as f64 * h)).sqrt())
}

/// `{a^k : k >= 0} ∩ [h_lower, 1]` in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricGrid {
    pub ratio: f64,
    pub h_lower: f64,
    values: Vec<f64>,
}

impl GeometricGrid {
    pub fn new(ratio: f64, h_lower: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("grid ratio {ratio} outside (0, 1)")));
        }
        if !(h_lower > 0.0 && h_lower <= 1.0) {
            return Err(Error::InvalidBandwidth(h_lower));
        }
        // relative slack so that h_lower = a^K itself is kept
        let floor = h_lower * (1.0 - 1e-12);
        let values = (0..)
            .map(|k| ratio.powi(k))
            .take_while(|&h| h >= floor)
            .collect();
        Ok(GeometricGrid { ratio, h_lower, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("grid holds at least 1")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub h: f64,
    pub h_prime: f64,
    pub contrast: f64,
    pub threshold: f64,
}

impl PairCheck {
    pub fn passed(&self) -> bool {
        self.contrast <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSelection {
    pub u: f64,
    pub h_hat: f64,
    /// `Ĝ°_{ĥ}(u)`.
    pub estimate: Vec<f64>,
    pub c_sharp: f64,
    pub sigma_trace: f64,
    pub trace_clamped: bool,
    /// Every comparison made for the accepted `ĥ`.
    pub accepted_pairs: Vec<PairCheck>,
    /// First failing comparison of each rejected larger candidate.
    pub rejected_pairs: Vec<PairCheck>,
    /// Grid bandwidths with zero kernel mass at `u`.
    pub infeasible: Vec<f64>,
}

impl LocalSelection {
    pub fn at_grid_minimum(&self, grid: &GeometricGrid) -> bool {
        self.h_hat == grid.smallest()
    }
}

/// Largest grid `h` passing all comparisons against smaller grid values.
pub fn select_local(
    series: &MomentSeries,
    u: f64,
    grid: &GeometricGrid,
    c_sharp: f64,
    lrv: &LongRunVarianceEstimate,
    kernel: &Kernel,
) -> Result<LocalSelection> {
    let estimates = grid
        .values()
        .iter()
        .map(|&h| match series.estimate_normalized(u, h, kernel) {
            Ok(est) => Ok(Some(est)),
            Err(Error::ZeroMass { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    select_from_estimates(u, grid, &estimates, c_sharp, lrv, kernel, series.len())
}

/// The selection rule on precomputed `Ĝ°_h(u)`, one entry per grid value
/// (`None` for zero mass).
pub fn select_from_estimates(
    u: f64,
    grid: &GeometricGrid,
    estimates: &[Option<Vec<f64>>],
    c_sharp: f64,
    lrv: &LongRunVarianceEstimate,
    kernel: &Kernel,
    n: usize,
) -> Result<LocalSelection> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if estimates.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} estimates for {} bandwidths", estimates.len(), grid.len())));
    }
    if !(c_sharp > 0.0) {
        return Err(Error::InvalidParameter(format!("C# = {c_sharp} must be positive")));
    }
    let trace = lrv.trace();
    let mut feasible: Vec<(f64, &Vec<f64>, f64)> = Vec::with_capacity(grid.len());
    let mut infeasible = Vec::new();
    for (&h, est) in grid.values().iter().zip(estimates) {
        match est {
            Some(est) => feasible.push((h, est, c_sharp * v_hat(h, trace, kernel, n)? * lambda(h)?)),
            None => infeasible.push(h),
        }
    }
    if feasible.is_empty() {
        return Err(Error::AllInfeasible);
    }
    let mut rejected_pairs = Vec::new();
    for (i, (h, est, _)) in feasible.iter().enumerate() {
        let mut accepted = Vec::with_capacity(feasible.len() - i - 1);
        let mut failure = None;
        for (hp, est_p, threshold) in &feasible[i + 1..] {
            let contrast = est.iter().zip(est_p.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            // rounding slack: two weighted means of identical data differ in the last bits
            let scale = est.iter().chain(est_p.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            let check = PairCheck {
                h: *h,
                h_prime: *hp,
                contrast,
                threshold: *threshold + ROUNDING_SLACK * scale,
            };
            if !check.passed() {
                failure = Some(check);
                break;
            }
            accepted.push(check);
        }
        match failure {
            Some(f) => rejected_pairs.push(f),
            None => {
                return Ok(LocalSelection {
                    u,
                    h_hat: *h,
                    estimate: (*est).clone(),
                    c_sharp,
                    sigma_trace: trace,
                    trace_clamped: lrv.clamped,
                    accepted_pairs: accepted,
                    rejected_pairs,
                    infeasible,
                })
            }
        }
    }
    unreachable!("the smallest feasible bandwidth passes vacuously")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalCurve {
    pub selections: Vec<LocalSelection>,
    /// Points whose `ĥ(u)` is the smallest grid element, the symptom of a
    /// lower grid bound that is too small.
    pub at_minimum: usize,
}

impl LocalCurve {
    pub fn h_hat(&self) -> Vec<f64> {
        self.selections.iter().map(|s| s.h_hat).collect()
    }

    /// Per-`u` CSV: `u,h_hat,estimate_1..d,sigma_trace,flags`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let d = self.selections.first().map_or(1, |s| s.estimate.len());
        let cols: Vec<String> = (1..=d).map(|j| format!("estimate_{j}")).collect();
        writeln!(out, "u,h_hat,{},sigma_trace,flags", cols.join(","))?;
        for s in &self.selections {
            let mut flags = Vec::new();
            if s.trace_clamped {
                flags.push("trace_clamped");
            }
            if !s.infeasible.is_empty() {
                flags.push("infeasible_h");
            }
            let est: Vec<String> = s.estimate.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{},{},{}", s.u, s.h_hat, est.join(","), s.sigma_trace, flags.join("|"))?;
        }
        Ok(())
    }
}

/// `ĥ(u)` over a `u`-grid with one `Σ̂(u)` per point.
pub fn select_local_curve(
    series: &MomentSeries,
    u_grid: &[f64],
    grid: &GeometricGrid,
    c_sharp: f64,
    kernel: &Kernel,
    lrv: &LrvParams,
) -> Result<LocalCurve> {
    let selections = u_grid
        .iter()
        .map(|&u| {
            let sigma = estimate_longrun_variance(series, u, lrv, kernel)?;
            select_local(series, u, grid, c_sharp, &sigma, kernel)
        })
        .collect::<Result<Vec<_>>>()?;
    let at_minimum = selections.iter().filter(|s| s.at_grid_minimum(grid)).count();
    Ok(LocalCurve { selections, at_minimum })
}

/// Pointwise MSE-optimal bandwidth
/// `(4 σ_K² tr Σ / (μ_K² |∂²G|²))^{1/5} · r_n` with `r_n = n^{-1/5}`, or
/// `(log n / n)^{1/5}` when `log_factor` is set.
pub fn h_opt_local(sigma_trace: f64, curvature_sq: f64, kernel: &Kernel, n: usize, log_factor: bool) -> Result<f64> {
    if !(curvature_sq > 0.0) {
        return Err(Error::ZeroCurvature(curvature_sq));
    }
    let c = kernel.constants();
    let nf = n as f64;
    let rate = if log_factor { nf.ln() / nf } else { 1.0 / nf };
    Ok((4.0 * c.sigma_k_sq * sigma_trace / (c.mu_k * c.mu_k * curvature_sq)).powf(0.2) * rate.powf(0.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MomentFunctional;
    use crate::processes::{simulate_tvar, CoefficientCurve};

    #[test]
    fn lambda_values() {
        assert_eq!(lambda(1.0).unwrap(), 1.0);
        assert!((lambda((-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-12);
        assert!((lambda((-4.0f64).exp()).unwrap() - 2.0).abs() < 1e-12);
        assert!(lambda(0.0).is_err());
        assert!(lambda(1.5).is_err());
    }

    #[test]
    fn v_hat_values() {
        let k = Kernel::epanechnikov();
        assert!((v_hat(0.1, 100.0, &k, 1000).unwrap() - 1.2f64.sqrt()).abs() < 1e-12);
        assert_eq!(v_hat(0.1, 0.0, &k, 1000).unwrap(), 0.0);
        let ratio = v_hat(0.1, 3.0, &k, 1000).unwrap() / v_hat(0.2, 3.0, &k, 1000).unwrap();
        assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn geometric_grid_values() {
        let g = GeometricGrid::new(0.9, 0.9f64.powi(29)).unwrap();
        assert_eq!(g.len(), 30);
        assert!((g.smallest() - 0.0471).abs() < 1e-4);
        assert_eq!(GeometricGrid::new(0.5, 0.2).unwrap().values(), &[1.0, 0.5, 0.25]);
        assert_eq!(GeometricGrid::new(0.5, 1.0).unwrap().values(), &[1.0]);
        assert!(GeometricGrid::new(1.0, 0.2).is_err());
        for w in g.values().windows(2) {
            assert!((w[1] / w[0] - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn h_opt_local_values() {
        let k = Kernel::epanechnikov();
        let h = h_opt_local(1.0, 1.0, &k, 500, false).unwrap();
        assert!((h - (3.84f64).powf(0.2)).abs() < 1e-12);
        assert!((h - 1.3086).abs() < 1e-3);
        let h32 = h_opt_local(1.0, 1.0, &k, 500 * 32, false).unwrap();
        assert!((h / h32 - 2.0).abs() < 1e-12);
        assert!(h_opt_local(1.0, 0.0, &k, 500, false).is_err());
        assert!(h_opt_local(1.0, 1.0, &k, 500, true).unwrap() > h);
    }

    #[test]
    fn longrun_variance_simple_cases() {
        let k = Kernel::epanechnikov();
        let c = MomentSeries::new(&vec![2.0; 1000], &MomentFunctional::Mean);
        let raw = LrvParams {
            eta: 0.3,
            lag_window: 0,
            centered: false,
        };
        let est = estimate_longrun_variance(&c, 0.5, &raw, &k).unwrap();
        let mass = c.kernel_mass(0.5, 0.3, &k).unwrap();
        assert!((est.trace() - 4.0 * mass).abs() < 1e-12);
        assert!((est.trace() - 4.0).abs() < 0.01);

        let p = simulate_tvar(&CoefficientCurve::Constant(0.0), 20_000, 3, 10).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::Mean);
        let centered = LrvParams {
            eta: 0.5,
            lag_window: 0,
            centered: true,
        };
        let e = estimate_longrun_variance(&s, 0.5, &centered, &k).unwrap();
        assert!((e.trace() - 1.0).abs() < 0.05, "{}", e.trace());
    }

    #[test]
    fn centering_is_neutral_on_demeaned_data() {
        let k = Kernel::epanechnikov();
        let p = simulate_tvar(&CoefficientCurve::SinScaled, 2000, 7, 1000).unwrap();
        let (u, eta) = (0.4, 0.3);
        let s = MomentSeries::from_path(&p, &MomentFunctional::Mean);
        let m = s.estimate_normalized(u, eta, &k).unwrap()[0];
        let shifted: Vec<f64> = p.values.iter().map(|x| x - m).collect();
        let s0 = MomentSeries::new(&shifted, &MomentFunctional::Mean);
        let mk = |centered| LrvParams {
            eta,
            lag_window: 10,
            centered,
        };
        let a = estimate_longrun_variance(&s0, u, &mk(true), &k).unwrap();
        let b = estimate_longrun_variance(&s0, u, &mk(false), &k).unwrap();
        assert!((a.trace() - b.trace()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_matrix() {
        let p = simulate_tvar(&CoefficientCurve::SinScaled, 1000, 2, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::correlation_pair());
        let e = estimate_longrun_variance(&s, 0.3, &LrvParams::default(), &Kernel::epanechnikov()).unwrap();
        assert!((e.sigma[1] - e.sigma[2]).abs() < 1e-10);
    }

    #[test]
    fn constant_path_selects_largest() {
        let k = Kernel::epanechnikov();
        let s = MomentSeries::new(&vec![0.3; 500], &MomentFunctional::Mean);
        let grid = GeometricGrid::new(0.9, 0.05).unwrap();
        let lrv = estimate_longrun_variance(&s, 0.5, &LrvParams::default(), &k).unwrap();
        let sel = select_local(&s, 0.5, &grid, 0.8, &lrv, &k).unwrap();
        assert_eq!(sel.h_hat, 1.0);
        assert_eq!(sel.accepted_pairs.len(), grid.len() - 1);
    }

    #[test]
    fn tiny_c_sharp_selects_smallest() {
        let k = Kernel::epanechnikov();
        let p = simulate_tvar(&CoefficientCurve::SinScaled, 2000, 5, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::CovarianceLag(1));
        let grid = GeometricGrid::new(0.9, 0.9f64.powi(29)).unwrap();
        let lrv = estimate_longrun_variance(&s, 0.5, &LrvParams::default(), &k).unwrap();
        let sel = select_local(&s, 0.5, &grid, 1e-9, &lrv, &k).unwrap();
        assert_eq!(sel.h_hat, grid.smallest());
        assert!(sel.accepted_pairs.is_empty());
    }

    #[test]
    fn acceptance_record_is_complete() {
        let k = Kernel::epanechnikov();
        let p = simulate_tvar(&CoefficientCurve::Step, 2000, 11, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &MomentFunctional::CovarianceLag(1));
        let grid = GeometricGrid::new(0.9, 0.9f64.powi(29)).unwrap();
        let curve = select_local_curve(&s, &[0.1, 0.3, 0.45, 0.7], &grid, 0.8, &k, &LrvParams::default()).unwrap();
        for sel in &curve.selections {
            let smaller: Vec<f64> = grid.values().iter().copied().filter(|&h| h < sel.h_hat).collect();
            let checked: Vec<f64> = sel.accepted_pairs.iter().map(|c| c.h_prime).collect();
            assert_eq!(checked, smaller);
            assert!(sel.accepted_pairs.iter().all(|c| c.passed()));
            assert!(sel.rejected_pairs.iter().all(|c| !c.passed() && c.h > sel.h_hat));
        }
        let single = select_local_curve(&s, &[0.3], &grid, 0.8, &k, &LrvParams::default()).unwrap();
        assert_eq!(single.selections[0], curve.selections[1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lambda_nonincreasing(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(lambda(lo).unwrap() >= lambda(hi).unwrap());
            }

            #[test]
            fn v_hat_decreasing(a in 1e-3f64..1.0, b in 1e-3f64..1.0, tr in 0.01f64..100.0) {
                prop_assume!(a != b);
                let k = Kernel::epanechnikov();
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(v_hat(lo, tr, &k, 1000).unwrap() > v_hat(hi, tr, &k, 1000).unwrap());
            }
        }
    }
}
