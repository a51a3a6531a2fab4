//! Cross validation for a composed target: the lag-1 autocorrelation
//! `F(x, y) = y / x` of `(E X²_{t-1}, E X_t X_{t-1})`.
use lsbw::cv::{composition_plugin, select_cv_composition, CvConfig};
use lsbw::{simulate_tvar, CoefficientCurve, Composition, Estimator, Kernel, MomentFunctional, MomentSeries, StreamSeed};

fn main() -> lsbw::Result<()> {
    let curve = CoefficientCurve::SinScaled;
    let path = simulate_tvar(&curve, 1000, StreamSeed::new(3, 0), 1000)?;
    let series = MomentSeries::from_path(&path, &MomentFunctional::correlation_pair());
    let f = Composition::ratio();
    let cfg = CvConfig::new(0.08)?;
    let (plugin, pilot_h) = composition_plugin(&series, &cfg)?;
    println!("pilot bandwidths per component: {pilot_h:?}");
    let res = select_cv_composition(&series, &f, &plugin, &cfg)?;
    println!("selected h = {:.2}", res.h_hat);
    let est = Estimator::Normalized(Kernel::epanechnikov());
    for u in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let gamma = f.apply(&series.estimate(u, res.h_hat, &est)?)[0];
        println!("u = {u:.2}: a(u) = {:+.3}, estimate {gamma:+.3}", curve.value(u));
    }
    Ok(())
}
