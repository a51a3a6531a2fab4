//! Target curves `G(u) = E g(Ỹ_t(u))`, their curvature `∂²_u G` and the
//! long-run variance `tr Σ(u)` for the Gaussian tvAR(1) model.
//!
//! Closed forms use `c(k) = a^|k| / (1 - a²)` and Isserlis' theorem; the
//! Monte-Carlo route simulates frozen-coefficient paths and is kept
//! independent of the closed forms so the two can check each other.

use serde::{Deserialize, Serialize};

use super::{ar1_from_innovations, innovations, CoefficientCurve, StreamSeed, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::moments::{MomentFunctional, MomentSeries};

fn frozen(curve: &CoefficientCurve, u: f64) -> Result<f64> {
    let a = curve.value(u);
    if a.abs() >= 1.0 {
        Err(Error::NonStationary { u, coefficient: a.abs() })
    } else {
        Ok(a)
    }
}

/// `c(u,k) = a(u)^k / (1 - a(u)²)`.
pub fn true_covariance(curve: &CoefficientCurve, u: f64, k: usize) -> Result<f64> {
    let a = frozen(curve, u)?;
    Ok(a.powi(k as i32) / (1.0 - a * a))
}

/// `c(u,1) / c(u,0)`, which equals `a(u)`.
pub fn true_correlation(curve: &CoefficientCurve, u: f64) -> Result<f64> {
    Ok(true_covariance(curve, u, 1)? / true_covariance(curve, u, 0)?)
}

/// Real part of the characteristic function of `X̃_0(u)`.
pub fn true_char_function(curve: &CoefficientCurve, u: f64, theta: f64) -> Result<f64> {
    let c0 = true_covariance(curve, u, 0)?;
    Ok((-theta * theta * c0 / 2.0).exp())
}

/// Stationary moments of a functional as functions of the AR coefficient:
/// value, first and second derivative in `a`, and the diagonal of `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMoments {
    pub value: Vec<f64>,
    pub da: Vec<f64>,
    pub daa: Vec<f64>,
    pub sigma_diag: Vec<f64>,
}

pub fn stationary_moments(g: &MomentFunctional, a: f64) -> Result<StationaryMoments> {
    if a.abs() >= 1.0 {
        return Err(Error::NonStationary { u: f64::NAN, coefficient: a.abs() });
    }
    let s = 1.0 / (1.0 - a * a);
    let s1 = 2.0 * a * s * s;
    let s2 = 2.0 * s * s + 8.0 * a * a * s * s * s;
    let mut out = StationaryMoments {
        value: vec![],
        da: vec![],
        daa: vec![],
        sigma_diag: vec![],
    };
    let mut push = |v: f64, d1: f64, d2: f64, sig: f64| {
        out.value.push(v);
        out.da.push(d1);
        out.daa.push(d2);
        out.sigma_diag.push(sig);
    };
    match g {
        MomentFunctional::Mean => push(0.0, 0.0, 0.0, 1.0 / ((1.0 - a) * (1.0 - a))),
        MomentFunctional::CovarianceLag(k) | MomentFunctional::Product(0, k) => {
            product_moments(*k, a, s, s1, s2, &mut push)
        }
        MomentFunctional::Product(i, j) => {
            product_moments(i.abs_diff(*j), a, s, s1, s2, &mut push)
        }
        MomentFunctional::CharCos(theta) => {
            let t2 = theta * theta;
            let phi = (-t2 * s / 2.0).exp();
            let d1 = -0.5 * t2 * s1 * phi;
            let d2 = (0.25 * t2 * t2 * s1 * s1 - 0.5 * t2 * s2) * phi;
            // Cov(cos θX_0, cos θX_j) = e^{-θ²σ²}(cosh(θ²c_j) - 1), written
            // with exponentials so large θ²σ² does not overflow
            let lag_cov = |c: f64| {
                0.5 * ((-t2 * (s - c)).exp() + (-t2 * (s + c)).exp()) - (-t2 * s).exp()
            };
            let mut sigma = lag_cov(s);
            let mut c = s;
            for _ in 0..100_000 {
                c *= a;
                let term = 2.0 * lag_cov(c);
                sigma += term;
                if term.abs() <= 1e-17 * sigma.abs().max(1e-300) {
                    break;
                }
            }
            push(phi, d1, d2, sigma)
        }
        MomentFunctional::Stack(parts) => {
            for p in parts {
                let m = stationary_moments(p, a)?;
                for i in 0..m.value.len() {
                    push(m.value[i], m.da[i], m.daa[i], m.sigma_diag[i]);
                }
            }
        }
        other => return Err(Error::NoClosedForm(other.to_string())),
    }
    Ok(out)
}

/// Lag-`k` product `X_t X_{t-k}`: value `a^k s`, long-run variance
/// `s²[(1+a²)/(1-a²) + (2k+1)a^{2k} + 2a^{2k+2}/(1-a²)]`.
fn product_moments(
    k: usize,
    a: f64,
    s: f64,
    s1: f64,
    s2: f64,
    push: &mut impl FnMut(f64, f64, f64, f64),
) {
    let kf = k as f64;
    let ak = a.powi(k as i32);
    let ak1 = if k >= 1 { kf * a.powi(k as i32 - 1) } else { 0.0 };
    let ak2 = if k >= 2 { kf * (kf - 1.0) * a.powi(k as i32 - 2) } else { 0.0 };
    let value = ak * s;
    let d1 = ak1 * s + ak * s1;
    let d2 = ak2 * s + 2.0 * ak1 * s1 + ak * s2;
    let a2 = a * a;
    let sigma = s
        * s
        * ((1.0 + a2) / (1.0 - a2)
            + (2.0 * kf + 1.0) * a2.powi(k as i32)
            + 2.0 * a2.powi(k as i32 + 1) / (1.0 - a2));
    push(value, d1, d2, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    MonteCarlo,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthFlags {
    /// Within the excluded neighbourhood of a unit root.
    pub near_unit_root: bool,
    /// Richardson check of the finite-difference curvature failed (>10%).
    pub curvature_unstable: bool,
    /// The two long-run variance estimators disagree beyond Monte-Carlo error.
    pub lrv_disagreement: bool,
}

/// Ground-truth curves on a `u`-grid. Points with `valid[i] == false` carry
/// `NaN` and are skipped by every distance and formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub u_grid: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub d2g: Vec<Vec<f64>>,
    pub sigma_trace: Vec<f64>,
    pub valid: Vec<bool>,
    pub provenance: Provenance,
    pub curvature_provenance: Provenance,
    pub flags: Vec<TruthFlags>,
    /// Monte-Carlo standard errors, when estimated.
    pub g_se: Option<Vec<Vec<f64>>>,
    pub sigma_trace_se: Option<Vec<f64>>,
    /// Second long-run variance estimate (truncated autocovariance sum).
    pub sigma_trace_alt: Option<Vec<f64>>,
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        self.g.iter().find(|v| !v.is_empty()).map_or(0, |v| v.len())
    }

    /// `|∂²G(u)|₂²` per grid point.
    pub fn curvature_sq(&self) -> Vec<f64> {
        self.d2g.iter().map(|v| v.iter().map(|x| x * x).sum()).collect()
    }

    /// Restricts to a single output component.
    pub fn component(&self, j: usize) -> GroundTruth {
        let pick = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter().map(|r| vec![r.get(j).copied().unwrap_or(f64::NAN)]).collect()
        };
        GroundTruth {
            u_grid: self.u_grid.clone(),
            g: pick(&self.g),
            d2g: pick(&self.d2g),
            sigma_trace: self.sigma_trace.clone(),
            valid: self.valid.clone(),
            provenance: self.provenance,
            curvature_provenance: self.curvature_provenance,
            flags: self.flags.clone(),
            g_se: self.g_se.as_ref().map(pick),
            sigma_trace_se: self.sigma_trace_se.clone(),
            sigma_trace_alt: self.sigma_trace_alt.clone(),
        }
    }
}

pub fn closed_form_truth(
    curve: &CoefficientCurve,
    g: &MomentFunctional,
    u_grid: &[f64],
) -> Result<GroundTruth> {
    let d = g.output_dim();
    let nan = vec![f64::NAN; d];
    let mut truth = GroundTruth {
        u_grid: u_grid.to_vec(),
        g: Vec::with_capacity(u_grid.len()),
        d2g: Vec::with_capacity(u_grid.len()),
        sigma_trace: Vec::with_capacity(u_grid.len()),
        valid: Vec::with_capacity(u_grid.len()),
        provenance: Provenance::ClosedForm,
        curvature_provenance: Provenance::ClosedForm,
        flags: Vec::with_capacity(u_grid.len()),
        g_se: None,
        sigma_trace_se: None,
        sigma_trace_alt: None,
    };
    // fail early on unsupported functionals
    stationary_moments(g, 0.0)?;
    for &u in u_grid {
        let admissible = curve.oracle_admissible(u);
        truth.flags.push(TruthFlags {
            near_unit_root: !admissible,
            ..Default::default()
        });
        if !admissible {
            truth.g.push(nan.clone());
            truth.d2g.push(nan.clone());
            truth.sigma_trace.push(f64::NAN);
            truth.valid.push(false);
            continue;
        }
        let a = curve.value(u);
        let m = stationary_moments(g, a)?;
        let (a1, a2) = curve.derivatives(u);
        let d2: Vec<f64> = m
            .da
            .iter()
            .zip(&m.daa)
            .map(|(d1, dd)| dd * a1 * a1 + d1 * a2)
            .collect();
        truth.g.push(m.value);
        truth.d2g.push(d2);
        truth.sigma_trace.push(m.sigma_diag.iter().sum());
        truth.valid.push(true);
    }
    Ok(truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McTruthConfig {
    /// Independent stationary paths per grid point.
    pub reps: usize,
    pub path_len: usize,
    pub seed: u64,
    /// Finite-difference step for the curvature; checked against half of it.
    pub fd_step: f64,
    /// Lag window of the truncated autocovariance long-run variance.
    pub acf_lags: usize,
}

impl Default for McTruthConfig {
    fn default() -> Self {
        McTruthConfig {
            reps: 8,
            path_len: 100_000,
            seed: 0x5eed,
            fd_step: 0.01,
            acf_lags: 50,
        }
    }
}

/// Monte-Carlo ground truth. Every grid point (and every finite-difference
/// offset) reuses the same innovation streams, so `u ↦ Ĝ(u)` is smooth and
/// second differences are not swamped by simulation noise.
pub fn mc_ground_truth(
    curve: &CoefficientCurve,
    g: &MomentFunctional,
    u_grid: &[f64],
    cfg: &McTruthConfig,
) -> Result<GroundTruth> {
    if cfg.reps < 2 || cfg.path_len < 100 {
        return Err(Error::InvalidParameter(
            "Monte-Carlo truth needs reps >= 2 and path_len >= 100".into(),
        ));
    }
    let d = g.output_dim();
    let depth = g.window();
    let streams: Vec<Vec<f64>> = (0..cfg.reps)
        .map(|r| innovations(StreamSeed::new(cfg.seed, r as u64), DEFAULT_BURN_IN + cfg.path_len + depth))
        .collect();

    // per-replication mean and long-run variances of g at coefficient a
    let stats_at = |a: f64, with_lrv: bool| -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut means = Vec::with_capacity(cfg.reps);
        let mut bm = Vec::with_capacity(cfg.reps);
        let mut acf = Vec::with_capacity(cfg.reps);
        for z in &streams {
            let x = ar1_from_innovations(a, z, DEFAULT_BURN_IN);
            let series = MomentSeries::new(&x, g);
            // drop the zero-padded start
            let rows: Vec<&[f64]> = (depth..x.len()).map(|t| series.row(t)).collect();
            let len = rows.len() as f64;
            let mut mean = vec![0.0; d];
            for r in &rows {
                for j in 0..d {
                    mean[j] += r[j];
                }
            }
            mean.iter_mut().for_each(|m| *m /= len);
            if with_lrv {
                let mut tr_bm = 0.0;
                let mut tr_acf = 0.0;
                for j in 0..d {
                    let col: Vec<f64> = rows.iter().map(|r| r[j] - mean[j]).collect();
                    tr_bm += batch_means_lrv(&col);
                    tr_acf += acf_sum_lrv(&col, cfg.acf_lags);
                }
                bm.push(tr_bm);
                acf.push(tr_acf);
            }
            means.push(mean);
        }
        (means, bm, acf)
    };
    let avg_vec = |rows: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                m[j] += r[j] / rows.len() as f64;
            }
        }
        m
    };

    let nan = vec![f64::NAN; d];
    let mut truth = GroundTruth {
        u_grid: u_grid.to_vec(),
        g: vec![],
        d2g: vec![],
        sigma_trace: vec![],
        valid: vec![],
        provenance: Provenance::MonteCarlo,
        curvature_provenance: Provenance::FiniteDifference,
        flags: vec![],
        g_se: Some(vec![]),
        sigma_trace_se: Some(vec![]),
        sigma_trace_alt: Some(vec![]),
    };
    let step = cfg.fd_step;
    for &u in u_grid {
        let mut flags = TruthFlags::default();
        if !curve.oracle_admissible(u) {
            flags.near_unit_root = true;
            truth.g.push(nan.clone());
            truth.d2g.push(nan.clone());
            truth.sigma_trace.push(f64::NAN);
            truth.valid.push(false);
            truth.flags.push(flags);
            truth.g_se.as_mut().unwrap().push(nan.clone());
            truth.sigma_trace_se.as_mut().unwrap().push(f64::NAN);
            truth.sigma_trace_alt.as_mut().unwrap().push(f64::NAN);
            continue;
        }
        let a = curve.value(u);
        let (means, bm, acf) = stats_at(a, true);
        let centre = avg_vec(&means);
        let se: Vec<f64> = (0..d)
            .map(|j| std_error(&means.iter().map(|m| m[j]).collect::<Vec<_>>()))
            .collect();
        let sigma = mean(&bm);
        let sigma_se = std_error(&bm);
        let sigma_alt = mean(&acf);
        let alt_se = std_error(&acf);
        if (sigma - sigma_alt).abs() > 3.0 * (sigma_se.powi(2) + alt_se.powi(2)).sqrt() {
            flags.lrv_disagreement = true;
        }

        let g_at = |uu: f64| -> Option<Vec<f64>> {
            let aa = curve.value(uu);
            if aa.abs() >= 1.0 {
                return None;
            }
            Some(avg_vec(&stats_at(aa, false).0))
        };
        let second_diff = |h: f64| -> Option<Vec<f64>> {
            let (lo, hi) = (g_at(u - h)?, g_at(u + h)?);
            Some((0..d).map(|j| (hi[j] - 2.0 * centre[j] + lo[j]) / (h * h)).collect())
        };
        let d2 = match (second_diff(step), second_diff(step / 2.0)) {
            (Some(coarse), Some(fine)) => {
                let unstable = coarse
                    .iter()
                    .zip(&fine)
                    .any(|(c, f)| (c - f).abs() > 0.1 * f.abs().max(1e-8));
                flags.curvature_unstable = unstable;
                // Richardson extrapolation of the O(h²) error
                coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
            }
            _ => {
                flags.curvature_unstable = true;
                nan.clone()
            }
        };
        truth.g.push(centre);
        truth.d2g.push(d2);
        truth.sigma_trace.push(sigma);
        truth.valid.push(true);
        truth.flags.push(flags);
        truth.g_se.as_mut().unwrap().push(se);
        truth.sigma_trace_se.as_mut().unwrap().push(sigma_se);
        truth.sigma_trace_alt.as_mut().unwrap().push(sigma_alt);
    }
    Ok(truth)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_error(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    (var / v.len() as f64).sqrt()
}

/// Batch-means long-run variance of a centred series with batch length
/// `⌈len^{1/3}⌉`.
pub(crate) fn batch_means_lrv(x: &[f64]) -> f64 {
    let b = (x.len() as f64).cbrt().ceil() as usize;
    let batches = x.len() / b;
    let means: Vec<f64> = (0..batches)
        .map(|i| x[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let grand = mean(&means);
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    b as f64 * var
}

/// `Σ_{|k| <= lags} γ̂(k)` for a centred series.
pub(crate) fn acf_sum_lrv(x: &[f64], lags: usize) -> f64 {
    let n = x.len() as f64;
    let gamma = |k: usize| x[k..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n;
    gamma(0) + 2.0 * (1..=lags.min(x.len() - 1)).map(gamma).sum::<f64>()
}
