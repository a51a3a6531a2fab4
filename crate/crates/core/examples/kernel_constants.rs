//! Kernel constants and the truncated leave-out kernel.
use lsbw::{Kernel, TruncatedKernel};

fn main() -> lsbw::Result<()> {
    let k = Kernel::epanechnikov();
    let c = k.constants();
    println!("{}: sigma_K^2 = {}, mu_K = {}, sup = {}", k.name(), c.sigma_k_sq, c.mu_k, c.sup_norm);

    let hard = TruncatedKernel::hard(k.clone(), 0.12)?;
    let soft = TruncatedKernel::new(k, 0.12, 0.5)?;
    println!("{:>6} {:>10} {:>10}", "x", "hard", "soft");
    for i in 0..=20 {
        let x = i as f64 * 0.01;
        println!("{x:>6.2} {:>10.4} {:>10.4}", hard.eval(x), soft.eval(x));
    }
    Ok(())
}
