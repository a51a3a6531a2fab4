//! Integrated squared distances to the truth, realization-wise oracle
//! bandwidths and the asymptotically optimal global bandwidth.
//!
//! Integrals over `u` use the midpoint rule with cell widths taken from the
//! grid itself; points where the truth is undefined are skipped.

use serde::{Deserialize, Serialize};

use crate::cv::{trapezoid_weights, WeightFunction};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::moments::{Composition, EstimateCurve, Estimator, MomentSeries};
use crate::processes::GroundTruth;

/// Cell widths for a sorted grid in `[0, 1]`: each point owns the span
/// between the midpoints to its neighbours, the ends extend to 0 and 1.
pub fn cell_widths(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    (0..m)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { (grid[i] + grid[i - 1]) / 2.0 };
            let right = if i + 1 == m { 1.0 } else { (grid[i] + grid[i + 1]) / 2.0 };
            right - left
        })
        .collect()
}

fn check_grids(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::GridMismatch(format!(
            "estimate grid ({} points) differs from truth grid ({} points)",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `∫ dist(estimate(u), truth(u)) w(u) du`, with `dist` applied only at
/// weighted points where the truth is valid.
fn integrate(
    estimate: &EstimateCurve,
    truth: &GroundTruth,
    weight: &WeightFunction,
    mut dist: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<f64> {
    check_grids(&estimate.u_grid, &truth.u_grid)?;
    let widths = cell_widths(&truth.u_grid);
    let mut total = 0.0;
    for (i, &u) in truth.u_grid.iter().enumerate() {
        let w = weight.eval(u);
        if w == 0.0 || !truth.valid[i] {
            continue;
        }
        let est = estimate.values[i].as_ref().ok_or(Error::MissingEstimate(u))?;
        let d = dist(est, &truth.g[i])?;
        if !d.is_finite() {
            return Err(Error::NonFinite(u));
        }
        total += w * d * widths[i];
    }
    Ok(total)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `d_M = ∫ |G(u) - Ĝ(u)|² w(u) du`.
pub fn distance_dm(estimate: &EstimateCurve, truth: &GroundTruth, weight: &WeightFunction) -> Result<f64> {
    integrate(estimate, truth, weight, |e, g| Ok(sq_dist(e, g)))
}

/// `d_M` of every output component separately.
pub fn distance_components(estimate: &EstimateCurve, truth: &GroundTruth, weight: &WeightFunction) -> Result<Vec<f64>> {
    check_grids(&estimate.u_grid, &truth.u_grid)?;
    let widths = cell_widths(&truth.u_grid);
    let mut out = vec![0.0; truth.dim()];
    for (i, &u) in truth.u_grid.iter().enumerate() {
        let w = weight.eval(u);
        if w == 0.0 || !truth.valid[i] {
            continue;
        }
        let est = estimate.values[i].as_ref().ok_or(Error::MissingEstimate(u))?;
        for (o, (e, g)) in out.iter_mut().zip(est.iter().zip(&truth.g[i])) {
            *o += w * (e - g) * (e - g) * widths[i];
        }
    }
    if let Some(pos) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos as f64));
    }
    Ok(out)
}

/// `∫_Θ d_M(θ) dθ` by the trapezoid rule over `theta_grid`.
pub fn distance_dm_fun(
    estimates: &[EstimateCurve],
    truths: &[GroundTruth],
    weight: &WeightFunction,
    theta_grid: &[f64],
) -> Result<f64> {
    if estimates.len() != theta_grid.len() || truths.len() != theta_grid.len() {
        return Err(Error::GridMismatch("one estimate and one truth per θ required".into()));
    }
    let tw = trapezoid_weights(theta_grid);
    let mut total = 0.0;
    for ((e, t), w) in estimates.iter().zip(truths).zip(tw) {
        total += w * distance_dm(e, t, weight)?;
    }
    Ok(total)
}

/// `∫ |F(G(u)) - F(Ĝ(u))|² w(u) du`.
pub fn distance_dm_comp(
    estimate: &EstimateCurve,
    truth: &GroundTruth,
    f: &Composition,
    weight: &WeightFunction,
) -> Result<f64> {
    integrate(estimate, truth, weight, |e, g| Ok(sq_dist(&f.apply(e), &f.apply(g))))
}

/// Realization-wise oracle: the grid bandwidth minimizing the distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub h_star: f64,
    pub grid: Vec<f64>,
    pub distances: Vec<f64>,
}

impl OracleResult {
    pub fn min_distance(&self) -> f64 {
        self.distance_at(self.h_star).expect("h_star lies on the grid")
    }

    pub fn distance_at(&self, h: f64) -> Option<f64> {
        self.grid.iter().position(|&g| g == h).map(|i| self.distances[i])
    }
}

/// Argmin with ties toward the larger `h`; `None` entries are skipped.
pub fn argmin_larger(grid: &[f64], values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = v else { continue };
        best = match best {
            Some(b) => {
                let bv = values[b].expect("best is feasible");
                if *v < bv || (*v == bv && grid[i] > grid[b]) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
            None => Some(i),
        };
    }
    best
}

/// Oracle over `grid` for any scoring of an estimate curve. Bandwidths
/// whose curve cannot be scored (missing values) are skipped.
pub fn oracle_by(
    grid: &[f64],
    mut score: impl FnMut(f64) -> Result<f64>,
) -> Result<OracleResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &h in grid {
        match score(h) {
            Ok(v) => scores.push(Some(v)),
            Err(Error::MissingEstimate(_)) | Err(Error::ZeroMass { .. }) => scores.push(None),
            Err(e) => return Err(e),
        }
    }
    let best = argmin_larger(grid, &scores).ok_or(Error::AllInfeasible)?;
    Ok(OracleResult {
        h_star: grid[best],
        grid: grid.to_vec(),
        distances: scores.into_iter().map(|s| s.unwrap_or(f64::NAN)).collect(),
    })
}

/// `h* = argmin_h d_M(h)` for this realization, estimating on the truth's grid.
pub fn oracle_bandwidth(
    series: &MomentSeries,
    grid: &[f64],
    truth: &GroundTruth,
    weight: &WeightFunction,
    estimator: &Estimator,
) -> Result<OracleResult> {
    oracle_by(grid, |h| {
        let est = series.estimate_curve(&truth.u_grid, h, estimator)?;
        distance_dm(&est, truth, weight)
    })
}

/// Weighted midpoint integral of `values` over the valid truth points.
fn weighted_integral(truth: &GroundTruth, values: &[f64], weight: &WeightFunction) -> f64 {
    let widths = cell_widths(&truth.u_grid);
    truth
        .u_grid
        .iter()
        .enumerate()
        .filter(|(i, _)| truth.valid[*i])
        .map(|(i, &u)| weight.eval(u) * values[i] * widths[i])
        .sum()
}

/// `(4 σ_K² ∫ tr Σ w / (μ_K² ∫ |∂²G|² w))^{1/5} · n^{-1/5}`.
pub fn h_opt_global(truth: &GroundTruth, kernel: &Kernel, n: usize, weight: &WeightFunction) -> Result<f64> {
    let c = kernel.constants();
    let num = weighted_integral(truth, &truth.sigma_trace, weight);
    let den = weighted_integral(truth, &truth.curvature_sq(), weight);
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::ZeroCurvature(den));
    }
    Ok((4.0 * c.sigma_k_sq * num / (c.mu_k * c.mu_k * den)).powf(0.2) * (n as f64).powf(-0.2))
}

/// Distances per bandwidth with the oracle and the formula bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub oracle: OracleResult,
    pub h_opt: Option<f64>,
}

impl DistanceReport {
    /// `h,d_m` rows and summary rows `h_star` and `h_opt`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "h,d_m")?;
        for (h, d) in self.oracle.grid.iter().zip(&self.oracle.distances) {
            writeln!(out, "{h},{d}")?;
        }
        writeln!(out, "h_star,{}", self.oracle.h_star)?;
        writeln!(out, "h_opt,{}", self.h_opt.map_or("NaN".into(), |h| h.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{midpoint_grid, MomentFunctional, Variant};
    use crate::processes::{closed_form_truth, simulate_tvar, CoefficientCurve, Provenance};

    fn flat_truth(grid: &[f64], value: f64, sigma: f64, curv: f64) -> GroundTruth {
        let m = grid.len();
        GroundTruth {
            u_grid: grid.to_vec(),
            g: vec![vec![value]; m],
            d2g: vec![vec![curv]; m],
            sigma_trace: vec![sigma; m],
            valid: vec![true; m],
            provenance: Provenance::ClosedForm,
            curvature_provenance: Provenance::ClosedForm,
            flags: vec![Default::default(); m],
            g_se: None,
            sigma_trace_se: None,
            sigma_trace_alt: None,
        }
    }

    fn curve_from(grid: &[f64], f: impl Fn(f64) -> f64) -> EstimateCurve {
        EstimateCurve {
            u_grid: grid.to_vec(),
            values: grid.iter().map(|&u| Some(vec![f(u)])).collect(),
            h: 0.1,
            variant: Variant::Raw,
            dim: 1,
        }
    }

    #[test]
    fn offset_distance() {
        let grid = midpoint_grid(200);
        let truth = flat_truth(&grid, 2.0, 1.0, 1.0);
        let w = WeightFunction::new(0.05).unwrap();
        assert_eq!(distance_dm(&curve_from(&grid, |_| 2.0), &truth, &w).unwrap(), 0.0);
        let d = distance_dm(&curve_from(&grid, |_| 2.5), &truth, &w).unwrap();
        assert!((d - 0.9 * 0.25).abs() < 1e-12, "{d}");
    }

    #[test]
    fn refinement_is_stable() {
        let w = WeightFunction::new(0.05).unwrap();
        let run = |m: usize| {
            let grid = midpoint_grid(m);
            let mut truth = flat_truth(&grid, 0.0, 1.0, 1.0);
            truth.g = grid.iter().map(|u| vec![(6.0 * u).sin()]).collect();
            distance_dm(&curve_from(&grid, |u| (6.0 * u).cos()), &truth, &w).unwrap()
        };
        let (a, b) = (run(201), run(402));
        assert!((a - b).abs() / b < 0.005);
    }

    #[test]
    fn missing_values_are_errors() {
        let grid = midpoint_grid(100);
        let truth = flat_truth(&grid, 0.0, 1.0, 1.0);
        let mut est = curve_from(&grid, |_| 0.0);
        est.values[50] = None;
        let w = WeightFunction::new(0.05).unwrap();
        assert!(matches!(distance_dm(&est, &truth, &w), Err(Error::MissingEstimate(_))));
        est.values[50] = Some(vec![0.0]);
        est.values[0] = None; // outside the weight support
        assert_eq!(distance_dm(&est, &truth, &w).unwrap(), 0.0);
    }

    #[test]
    fn composition_identity_and_ratio() {
        let grid = midpoint_grid(201);
        let curve = CoefficientCurve::SinScaled;
        let g = MomentFunctional::correlation_pair();
        let truth = closed_form_truth(&curve, &g, &grid).unwrap();
        let p = simulate_tvar(&curve, 1000, 3, 1000).unwrap();
        let s = MomentSeries::from_path(&p, &g);
        let est = s.estimate_curve(&grid, 0.2, &Estimator::Raw(Kernel::epanechnikov())).unwrap();
        let w = WeightFunction::new(0.05).unwrap();
        let plain = distance_dm(&est, &truth, &w).unwrap();
        let ident = distance_dm_comp(&est, &truth, &Composition::identity(2), &w).unwrap();
        assert!((plain - ident).abs() <= 1e-12 * plain);
        // ratio: distance between γ̂ and a(u)
        let ratio = distance_dm_comp(&est, &truth, &Composition::ratio(), &w).unwrap();
        let widths = cell_widths(&grid);
        let direct: f64 = grid
            .iter()
            .enumerate()
            .filter(|(_, u)| w.eval(**u) > 0.0)
            .map(|(i, &u)| {
                let e = est.values[i].as_ref().unwrap();
                (e[1] / e[0] - curve.value(u)).powi(2) * widths[i]
            })
            .sum();
        assert!((ratio - direct).abs() < 1e-12);
    }

    #[test]
    fn functional_distance_weights() {
        let grid = midpoint_grid(100);
        let truth = flat_truth(&grid, 1.0, 1.0, 1.0);
        let est = curve_from(&grid, |_| 1.5);
        let w = WeightFunction::new(0.05).unwrap();
        let single = distance_dm(&est, &truth, &w).unwrap();
        let fun = distance_dm_fun(&[est.clone()], &[truth.clone()], &w, &[2.0]).unwrap();
        assert_eq!(single, fun);
        let zero = distance_dm_fun(&[truth_as_est(&truth)], &[truth.clone()], &w, &[2.0]).unwrap();
        assert_eq!(zero, 0.0);
    }

    fn truth_as_est(t: &GroundTruth) -> EstimateCurve {
        EstimateCurve {
            u_grid: t.u_grid.clone(),
            values: t.g.iter().map(|v| Some(v.clone())).collect(),
            h: 1.0,
            variant: Variant::Raw,
            dim: 1,
        }
    }

    #[test]
    fn h_opt_global_values() {
        let grid = midpoint_grid(201);
        let w = WeightFunction::new(0.0).unwrap();
        let k = Kernel::epanechnikov();
        let t = flat_truth(&grid, 0.0, 1.0, 1.0);
        let h = h_opt_global(&t, &k, 500, &w).unwrap();
        assert!((h - 3.84f64.powf(0.2)).abs() < 1e-12);
        assert!((h - 1.3086).abs() < 1e-3);
        let t32 = flat_truth(&grid, 0.0, 32.0, 1.0);
        assert!((h_opt_global(&t32, &k, 500, &w).unwrap() / h - 2.0).abs() < 1e-12);
        assert!((h / h_opt_global(&t, &k, 500 * 32, &w).unwrap() - 2.0).abs() < 1e-12);
        assert!(h_opt_global(&flat_truth(&grid, 0.0, 1.0, 0.0), &k, 500, &w).is_err());
    }

    #[test]
    fn oracle_tie_and_single() {
        assert_eq!(argmin_larger(&[0.1, 0.2, 0.3], &[Some(1.0), Some(0.5), Some(0.5)]), Some(2));
        assert_eq!(argmin_larger(&[0.1], &[Some(3.0)]), Some(0));
        let r = oracle_by(&[0.4], |_| Ok(7.0)).unwrap();
        assert_eq!(r.h_star, 0.4);
        let r = oracle_by(&[0.1, 0.2, 0.3], |h| Ok(if h == 0.2 { 0.0 } else { 1.0 })).unwrap();
        assert_eq!(r.h_star, 0.2);
        assert_eq!(r.min_distance(), 0.0);
    }

    #[test]
    fn oracle_is_scale_invariant() {
        let grid = midpoint_grid(101);
        let curve = CoefficientCurve::SinScaled;
        let g = MomentFunctional::Mean;
        let p = simulate_tvar(&curve, 500, 8, 1000).unwrap();
        let mut truth = flat_truth(&grid, 0.0, 1.0, 1.0);
        truth.g = grid.iter().map(|u| vec![0.3 * (6.0 * u).sin()]).collect();
        let hs: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
        let w = WeightFunction::new(0.05).unwrap();
        let est = Estimator::Raw(Kernel::epanechnikov());
        let base = oracle_bandwidth(&MomentSeries::from_path(&p, &g), &hs, &truth, &w, &est).unwrap();
        let scaled_x: Vec<f64> = p.values.iter().map(|x| 3.0 * x).collect();
        let mut scaled_truth = truth.clone();
        scaled_truth.g.iter_mut().for_each(|v| v[0] *= 3.0);
        let scaled = oracle_bandwidth(&MomentSeries::new(&scaled_x, &g), &hs, &scaled_truth, &w, &est).unwrap();
        assert_eq!(base.h_star, scaled.h_star);
    }

    #[test]
    fn distance_is_symmetric() {
        let grid = midpoint_grid(100);
        let mut a = flat_truth(&grid, 0.0, 1.0, 1.0);
        a.g = grid.iter().map(|u| vec![u * u]).collect();
        let b = curve_from(&grid, |u| u.sin());
        let mut bt = a.clone();
        bt.g = grid.iter().map(|u| vec![u.sin()]).collect();
        let w = WeightFunction::new(0.05).unwrap();
        let d1 = distance_dm(&b, &a, &w).unwrap();
        let d2 = distance_dm(&truth_as_est(&a), &bt, &w).unwrap();
        assert!((d1 - d2).abs() < 1e-15);
    }
}
