//! Local bandwidths on the step model: wide away from the jump, narrow near it.
use lsbw::lepski::{select_local_curve, GeometricGrid, LrvParams};
use lsbw::moments::midpoint_grid;
use lsbw::{simulate_tvar, CoefficientCurve, Kernel, MomentFunctional, MomentSeries, StreamSeed};

fn main() -> lsbw::Result<()> {
    let path = simulate_tvar(&CoefficientCurve::Step, 2000, StreamSeed::new(0, 0), 1000)?;
    let series = MomentSeries::from_path(&path, &MomentFunctional::CovarianceLag(1));
    let grid = GeometricGrid::new(0.9, 0.9f64.powi(29))?;
    let u = midpoint_grid(20);
    let curve = select_local_curve(&series, &u, &grid, 0.8, &Kernel::epanechnikov(), &LrvParams::default())?;
    for s in &curve.selections {
        println!("u = {:.3}: h = {:.3}, estimate {:+.3}", s.u, s.h_hat, s.estimate[0]);
    }
    println!("{} points at the smallest bandwidth", curve.at_minimum);
    Ok(())
}
