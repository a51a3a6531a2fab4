//! Cross-validation bandwidth for one path, with the three minimum rules.
use lsbw::cv::{select_cv, CvConfig, MinimumStrategy};
use lsbw::{simulate_tvar, CoefficientCurve, MomentFunctional, MomentSeries, StreamSeed};

fn main() -> lsbw::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let path = simulate_tvar(&CoefficientCurve::SinFull, 500, StreamSeed::new(seed, 0), 1000)?;
    let series = MomentSeries::from_path(&path, &MomentFunctional::CovarianceLag(1));
    for strategy in [
        MinimumStrategy::LargestLocalMin,
        MinimumStrategy::SmallestLocalMin,
        MinimumStrategy::GlobalMin,
    ] {
        let res = select_cv(&series, &CvConfig::new(0.12)?.with_strategy(strategy))?;
        println!(
            "{strategy:>18}: h = {:.2} (fallback {}), local minima {:?}",
            res.h_hat, res.fallback, res.local_minima
        );
    }
    let res = select_cv(&series, &CvConfig::new(0.12)?)?;
    res.write_csv(std::io::stdout().lock())
}
