//! Aggregates over replication records.

use serde::{Deserialize, Serialize};

use super::study::{CvRecord, LepskiRecord};
use crate::evaluation::argmin_larger;

/// Linear-interpolation sample quantile (the usual "type 7" rule).
/// `None` for an empty sample.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(sorted_quantile(&v, p))
}

fn sorted_quantile(v: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Quantiles {
            q05: quantile(values, 0.05)?,
            median: quantile(values, 0.5)?,
            q95: quantile(values, 0.95)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub h: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub completed: usize,
    pub failed: usize,
    pub h_hat: Option<Quantiles>,
    pub h_star: Option<Quantiles>,
    /// `d_M(ĥ)/d_M(h*)`.
    pub ratio: Option<Quantiles>,
    pub fallbacks: usize,
    pub histogram: Vec<HistogramBin>,
    /// Closed-form optimal bandwidth from the ground truth (plain targets).
    pub h_opt_formula: Option<f64>,
    /// Grid argmin of the mean distance over replications.
    pub h_opt_empirical: Option<f64>,
    pub mean_distance: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LepskiSummary {
    pub completed: usize,
    pub failed: usize,
    pub d_local: Option<Quantiles>,
    pub d_star: Option<Quantiles>,
    pub h_star: Option<Quantiles>,
    /// Median of `ĥ(u)` per grid point.
    pub median_h_hat: Vec<Option<f64>>,
    pub truth: Vec<Option<f64>>,
    pub mean_at_minimum: f64,
    pub trace_clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Cv(CvSummary),
    Lepski(LepskiSummary),
}

pub fn summarize_cv(records: &[&CvRecord], failed: usize, grid: &[f64], h_opt_formula: Option<f64>) -> CvSummary {
    let pick = |f: fn(&CvRecord) -> f64| records.iter().map(|r| f(r)).collect::<Vec<_>>();
    let histogram = grid
        .iter()
        .map(|&h| HistogramBin {
            h,
            count: records.iter().filter(|r| r.h_hat == h).count(),
        })
        .collect();
    let mean_distance: Vec<Option<f64>> = (0..grid.len())
        .map(|i| {
            if records.is_empty() {
                return None;
            }
            let mut sum = 0.0;
            for r in records {
                sum += r.distances.get(i).copied().flatten()?;
            }
            Some(sum / records.len() as f64)
        })
        .collect();
    CvSummary {
        completed: records.len(),
        failed,
        h_hat: Quantiles::of(&pick(|r| r.h_hat)),
        h_star: Quantiles::of(&pick(|r| r.h_star)),
        ratio: Quantiles::of(&pick(|r| r.ratio)),
        fallbacks: records.iter().filter(|r| r.fallback).count(),
        histogram,
        h_opt_formula,
        h_opt_empirical: argmin_larger(grid, &mean_distance).map(|i| grid[i]),
        mean_distance,
    }
}

pub fn summarize_lepski(records: &[&LepskiRecord], failed: usize, truth: Vec<Option<f64>>) -> LepskiSummary {
    let pick = |f: fn(&LepskiRecord) -> f64| records.iter().map(|r| f(r)).collect::<Vec<_>>();
    let m = truth.len();
    let median_h_hat = (0..m)
        .map(|i| median(&records.iter().filter_map(|r| r.h_hat.get(i).copied()).collect::<Vec<_>>()))
        .collect();
    let mean_at_minimum = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.at_minimum as f64).sum::<f64>() / records.len() as f64
    };
    LepskiSummary {
        completed: records.len(),
        failed,
        d_local: Quantiles::of(&pick(|r| r.d_local)),
        d_star: Quantiles::of(&pick(|r| r.d_star)),
        h_star: Quantiles::of(&pick(|r| r.h_star)),
        median_h_hat,
        truth,
        mean_at_minimum,
        trace_clamped: records.iter().map(|r| r.trace_clamped).sum(),
    }
}
