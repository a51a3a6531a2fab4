//! Objective curves for a range of leave-out cutoffs on one path.
use lsbw::cv::{alpha_sweep, CvConfig};
use lsbw::{simulate_tvar, CoefficientCurve, MomentFunctional, MomentSeries, StreamSeed};

fn main() -> lsbw::Result<()> {
    let path = simulate_tvar(&CoefficientCurve::SinFull, 500, StreamSeed::new(0, 0), 1000)?;
    let series = MomentSeries::from_path(&path, &MomentFunctional::CovarianceLag(1));
    let cutoffs = [0.01, 0.05, 0.1, 0.2, 0.3];
    for c in alpha_sweep(&series, &cutoffs, &CvConfig::new(0.12)?)? {
        let feasible = c.objective.iter().filter(|p| p.value.is_some()).count();
        println!(
            "cutoff {:.2}: {feasible} feasible bandwidths, local minima {:?}",
            c.cutoff, c.local_minima
        );
    }
    Ok(())
}
