//! Distance to the truth per bandwidth, the realization oracle and the
//! closed-form optimal bandwidth.
use lsbw::cv::{BandwidthGrid, WeightFunction};
use lsbw::evaluation::{h_opt_global, oracle_bandwidth, DistanceReport};
use lsbw::processes::closed_form_truth;
use lsbw::{simulate_tvar, CoefficientCurve, Estimator, Kernel, MomentFunctional, MomentSeries, StreamSeed};

fn main() -> lsbw::Result<()> {
    let curve = CoefficientCurve::SinFull;
    let g = MomentFunctional::CovarianceLag(1);
    let truth = closed_form_truth(&curve, &g, &lsbw::cv::linspace(0.0, 1.0, 201))?;
    let path = simulate_tvar(&curve, 500, StreamSeed::new(0, 0), 1000)?;
    let series = MomentSeries::from_path(&path, &g);
    let w = WeightFunction::default();
    let k = Kernel::epanechnikov();
    let grid = BandwidthGrid::uniform(50)?;
    let oracle = oracle_bandwidth(&series, grid.values(), &truth, &w, &Estimator::Raw(k.clone()))?;
    let report = DistanceReport {
        oracle,
        h_opt: Some(h_opt_global(&truth, &k, 500, &w)?),
    };
    report.write_csv(std::io::stdout().lock())
}
