//! Cross validation for the whole characteristic-function family
//! `θ ↦ E cos(θ X)` over `θ ∈ [-10, 10]`.
use lsbw::cv::{select_cv_functional, CharCosFamily, CvConfig};
use lsbw::{simulate_tvar, CoefficientCurve, StreamSeed};

fn main() -> lsbw::Result<()> {
    let path = simulate_tvar(&CoefficientCurve::SinFull, 500, StreamSeed::new(1, 0), 1000)?;
    let family = CharCosFamily::symmetric(&path.values, 10.0, 41)?;
    println!("{} θ values, {} distinct |θ|", family.thetas.len(), family.abs_thetas.len());
    let res = select_cv_functional(&family, &CvConfig::new(0.10)?)?;
    println!("selected h = {:.2}, local minima {:?}", res.h_hat, res.local_minima);
    Ok(())
}
