//! Closed-form ground truth against the Monte-Carlo oracle.
use lsbw::processes::{closed_form_truth, mc_ground_truth, McTruthConfig};
use lsbw::{CoefficientCurve, MomentFunctional};

fn main() -> lsbw::Result<()> {
    let curve = CoefficientCurve::SinScaled;
    let g = MomentFunctional::CovarianceLag(1);
    let u = [0.1, 0.3, 0.5, 0.7];
    let exact = closed_form_truth(&curve, &g, &u)?;
    let mc = mc_ground_truth(&curve, &g, &u, &McTruthConfig { reps: 4, ..Default::default() })?;
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "u", "G", "G (MC)", "tr Σ", "tr Σ (MC)");
    for i in 0..u.len() {
        println!(
            "{:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            u[i], exact.g[i][0], mc.g[i][0], exact.sigma_trace[i], mc.sigma_trace[i]
        );
    }
    Ok(())
}
