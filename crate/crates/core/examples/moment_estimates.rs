//! Raw, normalized and leave-out estimates of the lag-1 autocovariance.
use lsbw::moments::midpoint_grid;
use lsbw::processes::true_covariance;
use lsbw::{simulate_tvar, CoefficientCurve, Estimator, Kernel, MomentFunctional, MomentSeries, StreamSeed, TruncatedKernel};

fn main() -> lsbw::Result<()> {
    let curve = CoefficientCurve::SinScaled;
    let path = simulate_tvar(&curve, 2000, StreamSeed::new(7, 0), 1000)?;
    let series = MomentSeries::from_path(&path, &MomentFunctional::CovarianceLag(1));
    let h = 0.2;
    let k = Kernel::epanechnikov();
    let estimators = [
        Estimator::Raw(k.clone()),
        Estimator::Normalized(k.clone()),
        Estimator::LeaveOut(TruncatedKernel::hard(k, 0.12)?),
    ];
    let grid = midpoint_grid(10);
    let curves: Vec<_> = estimators
        .iter()
        .map(|e| series.estimate_curve(&grid, h, e))
        .collect::<lsbw::Result<_>>()?;
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "u", "truth", "raw", "norm", "leave");
    for (i, &u) in grid.iter().enumerate() {
        let v = |j: usize| curves[j].values[i].as_ref().map_or(f64::NAN, |v| v[0]);
        println!("{u:>6.2} {:>8.3} {:>8.3} {:>8.3} {:>8.3}", true_covariance(&curve, u, 1)?, v(0), v(1), v(2));
    }
    curves[1].write_csv(std::io::sink())?;
    Ok(())
}
