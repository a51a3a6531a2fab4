//! Simulates tvAR(1) paths for each built-in coefficient curve.
//!
//! `cargo run --example simulate_paths -- <n> <seed>`
use lsbw::{simulate_tvar, CoefficientCurve, StreamSeed};

fn main() -> lsbw::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    for curve in [CoefficientCurve::SinFull, CoefficientCurve::SinScaled, CoefficientCurve::Step] {
        let path = simulate_tvar(&curve, n, StreamSeed::new(seed, 0), 1000)?;
        let var = path.values.iter().map(|x| x * x).sum::<f64>() / n as f64;
        println!("{curve:>12}: n = {n}, mean square = {var:.3}, first = {:.4}", path.values[0]);
    }
    // replications draw from independent streams of the same seed
    let a = simulate_tvar(&CoefficientCurve::SinScaled, 5, StreamSeed::new(seed, 1), 1000)?;
    let b = simulate_tvar(&CoefficientCurve::SinScaled, 5, StreamSeed::new(seed, 2), 1000)?;
    println!("stream 1: {:?}\nstream 2: {:?}", a.values, b.values);
    Ok(())
}
