//! Plot-ready CSV data for the standard figures. No rendering.
//!
//! | id                 | columns                                            |
//! |--------------------|----------------------------------------------------|
//! | `cv_histogram`     | `h, count`                                         |
//! | `cv_boxplot`       | `replication, d_hat, d_star, ratio`                |
//! | `cv_alpha_sweep`   | `h`, then one objective column per cutoff          |
//! | `lepski_single`    | `u, h_hat, estimate, truth, oracle`                |
//! | `lepski_quantiles` | `u, q05, q95, truth, oracle_q05, oracle_q95`       |
//! | `lepski_boxplot`   | `replication, d_local, d_star`                     |
//!
//! Empty fields mark values that are undefined (invalid truth, infeasible
//! bandwidth). The alpha sweep re-simulates replication 0.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::run::ExperimentResult;
use super::summary::{quantile, Summary};
use crate::cv::{alpha_sweep, default_alpha_cutoffs};
use crate::error::{Error, Result};
use crate::moments::MomentSeries;
use crate::processes::{simulate_tvar, StreamSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    CvHistogram,
    CvBoxplot,
    CvAlphaSweep,
    LepskiSingle,
    LepskiQuantiles,
    LepskiBoxplot,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::CvHistogram,
        FigureId::CvBoxplot,
        FigureId::CvAlphaSweep,
        FigureId::LepskiSingle,
        FigureId::LepskiQuantiles,
        FigureId::LepskiBoxplot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::CvHistogram => "cv_histogram",
            FigureId::CvBoxplot => "cv_boxplot",
            FigureId::CvAlphaSweep => "cv_alpha_sweep",
            FigureId::LepskiSingle => "lepski_single",
            FigureId::LepskiQuantiles => "lepski_quantiles",
            FigureId::LepskiBoxplot => "lepski_boxplot",
        }
    }

    pub fn is_cv(self) -> bool {
        matches!(
            self,
            FigureId::CvHistogram | FigureId::CvBoxplot | FigureId::CvAlphaSweep
        )
    }

    /// Figures that apply to a run's selector.
    pub fn for_result(result: &ExperimentResult) -> Vec<FigureId> {
        let cv = matches!(result.summary, Summary::Cv(_));
        FigureId::ALL.into_iter().filter(|f| f.is_cv() == cv).collect()
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Writes `<out_dir>/<figure id>.csv` and returns its path.
pub fn emit_figures_data(result: &ExperimentResult, which: FigureId, out_dir: &Path) -> Result<PathBuf> {
    if result.records.is_empty() {
        return Err(Error::EmptyResult);
    }
    let is_cv = matches!(result.summary, Summary::Cv(_));
    if which.is_cv() != is_cv {
        return Err(Error::InvalidParameter(format!(
            "figure `{which}` does not apply to a {} run",
            if is_cv { "cross-validation" } else { "local-selection" }
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{which}.csv"));
    match which {
        FigureId::CvHistogram => {
            let Summary::Cv(s) = &result.summary else { unreachable!() };
            let rows = s
                .histogram
                .iter()
                .map(|b| vec![b.h.to_string(), b.count.to_string()])
                .collect();
            write_rows(&path, &header(&["h", "count"]), rows)?;
        }
        FigureId::CvBoxplot => {
            let rows = result
                .records
                .iter()
                .filter_map(|r| r.cv().map(|c| (r.replication, c)))
                .map(|(i, c)| {
                    vec![
                        i.to_string(),
                        c.d_hat.to_string(),
                        c.d_star.to_string(),
                        c.ratio.to_string(),
                    ]
                })
                .collect();
            write_rows(&path, &header(&["replication", "d_hat", "d_star", "ratio"]), rows)?;
        }
        FigureId::CvAlphaSweep => {
            let cfg = &result.config;
            let path_0 = simulate_tvar(
                &cfg.model.curve,
                cfg.model.n,
                StreamSeed::new(cfg.base_seed, 0),
                cfg.model.burn_in,
            )?;
            let series = MomentSeries::from_path(&path_0, &cfg.functional()?);
            let cv = cfg.cv_config()?;
            let curves = alpha_sweep(&series, &default_alpha_cutoffs(), &cv)?;
            let mut head = vec!["h".to_string()];
            head.extend(curves.iter().map(|c| format!("cutoff_{}", c.cutoff)));
            let rows = cv
                .grid
                .values()
                .iter()
                .enumerate()
                .map(|(i, &h)| {
                    let mut row = vec![h.to_string()];
                    row.extend(curves.iter().map(|c| cell(c.objective[i].value)));
                    row
                })
                .collect();
            write_rows(&path, &head, rows)?;
        }
        FigureId::LepskiSingle => {
            let Summary::Lepski(s) = &result.summary else { unreachable!() };
            let r = result.records[0]
                .lepski()
                .ok_or_else(|| Error::InvalidParameter("replication 0 failed".into()))?;
            let rows = result
                .config
                .u_grid()
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    vec![
                        u.to_string(),
                        r.h_hat[i].to_string(),
                        r.estimate[i].to_string(),
                        cell(s.truth[i]),
                        cell(r.oracle_estimate[i]),
                    ]
                })
                .collect();
            write_rows(&path, &header(&["u", "h_hat", "estimate", "truth", "oracle"]), rows)?;
        }
        FigureId::LepskiQuantiles => {
            let Summary::Lepski(s) = &result.summary else { unreachable!() };
            let records = result.lepski_records();
            let rows = result
                .config
                .u_grid()
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let est: Vec<f64> = records.iter().map(|r| r.estimate[i]).filter(|v| v.is_finite()).collect();
                    let oracle: Vec<f64> = records.iter().filter_map(|r| r.oracle_estimate[i]).collect();
                    vec![
                        u.to_string(),
                        cell(quantile(&est, 0.05)),
                        cell(quantile(&est, 0.95)),
                        cell(s.truth[i]),
                        cell(quantile(&oracle, 0.05)),
                        cell(quantile(&oracle, 0.95)),
                    ]
                })
                .collect();
            write_rows(
                &path,
                &header(&["u", "q05", "q95", "truth", "oracle_q05", "oracle_q95"]),
                rows,
            )?;
        }
        FigureId::LepskiBoxplot => {
            let rows = result
                .records
                .iter()
                .filter_map(|r| r.lepski().map(|l| (r.replication, l)))
                .map(|(i, l)| vec![i.to_string(), l.d_local.to_string(), l.d_star.to_string()])
                .collect();
            write_rows(&path, &header(&["replication", "d_local", "d_star"]), rows)?;
        }
    }
    Ok(path)
}
