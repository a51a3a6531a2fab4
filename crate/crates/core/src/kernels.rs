//! Kernels supported on `[-1/2, 1/2]`, their bandwidth-rescaled form
//! `K_h(x) = K(x/h)/h`, and the truncated variant used by the leave-out
//! estimator.
//!
//! Invariants for every kernel in the class: `K >= 0`, `K(x) = K(-x)`,
//! `K(x) = 0` for `|x| > 1/2` and unit mass.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Kernel family. Only Epanechnikov is built in; other shapes can be
/// registered as closures and get their constants by quadrature.
#[derive(Clone)]
pub enum KernelShape {
    Epanechnikov,
    Custom {
        name: String,
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelShape::Epanechnikov => f.write_str("Epanechnikov"),
            KernelShape::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    shape: KernelShape,
    lipschitz_const: f64,
}

/// `sigma_k_sq = ∫K²`, `mu_k = ∫K(x)x²`, `sup_norm = sup|K|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub sigma_k_sq: f64,
    pub mu_k: f64,
    pub sup_norm: f64,
}

impl Kernel {
    pub fn epanechnikov() -> Self {
        Kernel {
            shape: KernelShape::Epanechnikov,
            lipschitz_const: 6.0,
        }
    }

    /// Registers a user kernel. `density` is evaluated on `[-1/2, 1/2]` only;
    /// the caller is responsible for symmetry, nonnegativity and unit mass.
    pub fn custom<F>(name: impl Into<String>, lipschitz_const: f64, density: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Kernel {
            shape: KernelShape::Custom {
                name: name.into(),
                density: Arc::new(density),
            },
            lipschitz_const,
        }
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn name(&self) -> &str {
        match &self.shape {
            KernelShape::Epanechnikov => "epanechnikov",
            KernelShape::Custom { name, .. } => name,
        }
    }

    /// Exposed for diagnostics; no estimator uses it numerically.
    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if !(-0.5..=0.5).contains(&x) {
            return 0.0;
        }
        match &self.shape {
            KernelShape::Epanechnikov => 1.5 * (1.0 - 4.0 * x * x),
            KernelShape::Custom { density, .. } => density(x),
        }
    }

    /// `K_h(x) = K(x/h) / h`.
    pub fn scaled_eval(&self, h: f64, x: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.eval(x / h) / h)
    }

    pub fn constants(&self) -> KernelConstants {
        match &self.shape {
            // ∫(9/4)(1-4x²)² = 6/5, ∫(3/2)(1-4x²)x² = 1/20.
            KernelShape::Epanechnikov => KernelConstants {
                sigma_k_sq: 1.2,
                mu_k: 0.05,
                sup_norm: 1.5,
            },
            KernelShape::Custom { .. } => {
                let sigma_k_sq = adaptive_simpson(&|x| self.eval(x).powi(2), -0.5, 0.5, 1e-12);
                let mu_k = adaptive_simpson(&|x| self.eval(x) * x * x, -0.5, 0.5, 1e-12);
                let sup_norm = (0..=100_000)
                    .map(|i| self.eval(-0.5 + i as f64 * 1e-5).abs())
                    .fold(0.0, f64::max);
                KernelConstants {
                    sigma_k_sq,
                    mu_k,
                    sup_norm,
                }
            }
        }
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::epanechnikov()
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::epanechnikov()),
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }
}

/// `K^{(n)}`: the base kernel with a dead zone `|x| <= (1-ε)·cutoff` and a
/// linear ramp from 0 up to `K(cutoff)` on `(1-ε)·cutoff < |x| < cutoff`.
/// `cutoff` plays the role of `n^{-α}` and is measured in kernel-argument
/// units, so after rescaling the dead zone is `|t/n - u| <= (1-ε)·cutoff·h`.
#[derive(Debug, Clone)]
pub struct TruncatedKernel {
    base: Kernel,
    cutoff: f64,
    epsilon: f64,
}

impl TruncatedKernel {
    pub fn new(base: Kernel, cutoff: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&cutoff) {
            return Err(Error::InvalidParameter(format!(
                "truncation cutoff must lie in [0, 1), got {cutoff}"
            )));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in [0, 1), got {epsilon}"
            )));
        }
        Ok(TruncatedKernel {
            base,
            cutoff,
            epsilon,
        })
    }

    /// Hard truncation (`ε = 0`).
    pub fn hard(base: Kernel, cutoff: f64) -> Result<Self> {
        Self::new(base, cutoff, 0.0)
    }

    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Unscaled `K^{(n)}(x)`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax >= self.cutoff {
            return self.base.eval(x);
        }
        let inner = (1.0 - self.epsilon) * self.cutoff;
        if ax <= inner {
            0.0
        } else {
            self.base.eval(self.cutoff) * (ax - inner) / (self.cutoff - inner)
        }
    }

    pub fn truncated_eval(&self, h: f64, x: f64) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.eval(x / h) / h)
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    // split at 0 so kinks at the origin sit on a node
    let mut total = 0.0;
    for (lo, hi) in [(a, 0.5 * (a + b)), (0.5 * (a + b), b)] {
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        total += recurse(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol, 50);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid(f: impl Fn(f64) -> f64, points: usize) -> f64 {
        let step = 1.0 / (points - 1) as f64;
        let mut acc = 0.5 * (f(-0.5) + f(0.5));
        for i in 1..points - 1 {
            acc += f(-0.5 + i as f64 * step);
        }
        acc * step
    }

    #[test]
    fn epanechnikov_values() {
        let k = Kernel::epanechnikov();
        assert_eq!(k.eval(0.0), 1.5);
        assert_eq!(k.eval(0.5), 0.0);
        assert!((k.eval(0.25) - 1.125).abs() < 1e-15);
        assert_eq!(k.eval(0.7), 0.0);
    }

    #[test]
    fn scaled_values() {
        let k = Kernel::epanechnikov();
        assert!((k.scaled_eval(0.5, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(k.scaled_eval(0.1, 0.06).unwrap(), 0.0);
        assert!((k.scaled_eval(0.2, 0.05).unwrap() - 5.625).abs() < 1e-12);
        assert!(matches!(k.scaled_eval(0.0, 0.1), Err(Error::InvalidBandwidth(_))));
        assert!(k.scaled_eval(-1.0, 0.1).is_err());
    }

    #[test]
    fn constants_match_trapezoid_oracle() {
        let k = Kernel::epanechnikov();
        let c = k.constants();
        let sig = trapezoid(|x| k.eval(x).powi(2), 1_000_001);
        let mu = trapezoid(|x| k.eval(x) * x * x, 1_000_001);
        let mass = trapezoid(|x| k.eval(x), 1_000_001);
        assert!((c.sigma_k_sq - sig).abs() < 1e-8);
        assert!((c.mu_k - mu).abs() < 1e-8);
        assert!((mass - 1.0).abs() < 1e-10);
        assert_eq!(c.sup_norm, 1.5);
        assert!(c.sigma_k_sq >= 1.0 && c.mu_k <= 0.25);
    }

    #[test]
    fn custom_kernel_constants_by_quadrature() {
        // triweight-like kernel rescaled to [-1/2, 1/2]
        let k = Kernel::custom("biweight", 7.5, |x: f64| {
            let v = 1.0 - 4.0 * x * x;
            15.0 / 8.0 * v * v
        });
        let c = k.constants();
        let sig = trapezoid(|x| k.eval(x).powi(2), 1_000_001);
        let mu = trapezoid(|x| k.eval(x) * x * x, 1_000_001);
        assert!((c.sigma_k_sq - sig).abs() < 1e-8, "{} vs {}", c.sigma_k_sq, sig);
        assert!((c.mu_k - mu).abs() < 1e-8);
        assert!((c.sup_norm - 15.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_values() {
        let base = Kernel::epanechnikov();
        let tk = TruncatedKernel::hard(base.clone(), 0.12).unwrap();
        assert_eq!(tk.truncated_eval(1.0, 0.05).unwrap(), 0.0);
        assert!((tk.truncated_eval(1.0, 0.2).unwrap() - 1.26).abs() < 1e-12);
        // exact boundary belongs to the kept region
        assert_eq!(tk.eval(0.12), base.eval(0.12));

        let soft = TruncatedKernel::new(base.clone(), 0.12, 0.5).unwrap();
        let expected = 0.5 * base.eval(0.12);
        assert!((soft.truncated_eval(1.0, 0.09).unwrap() - expected).abs() < 1e-12);
        assert!((soft.eval(-0.09) - expected).abs() < 1e-12);
        assert_eq!(soft.eval(0.06), 0.0);
    }

    #[test]
    fn truncated_rejects_bad_parameters() {
        assert!(TruncatedKernel::new(Kernel::epanechnikov(), 1.0, 0.0).is_err());
        assert!(TruncatedKernel::new(Kernel::epanechnikov(), 0.1, 1.0).is_err());
        let tk = TruncatedKernel::hard(Kernel::epanechnikov(), 0.1).unwrap();
        assert!(tk.truncated_eval(0.0, 0.1).is_err());
    }

    #[test]
    fn riemann_mass_close_to_one() {
        let k = Kernel::epanechnikov();
        let n = 10_000;
        let (h, u) = (0.1, 0.5);
        let s: f64 = (1..=n)
            .map(|t| k.scaled_eval(h, t as f64 / n as f64 - u).unwrap())
            .sum::<f64>()
            / n as f64;
        let nh = n as f64 * h;
        assert!((s - 1.0).abs() <= 2.0 / nh * k.lipschitz_const() + 2.0 / nh);
    }

    #[test]
    fn parses_by_name() {
        assert_eq!("Epanechnikov".parse::<Kernel>().unwrap().name(), "epanechnikov");
        assert!(matches!("gauss".parse::<Kernel>(), Err(Error::UnknownKernel(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_nonnegative_supported(x in -2.0f64..2.0) {
                let k = Kernel::epanechnikov();
                prop_assert!(k.eval(x) >= 0.0);
                prop_assert_eq!(k.eval(x), k.eval(-x));
                if x.abs() > 0.5 { prop_assert_eq!(k.eval(x), 0.0); }
            }

            #[test]
            fn hard_truncation_agrees_outside_dead_zone(
                x in -1.0f64..1.0, h in 0.01f64..1.0, cutoff in 0.0f64..0.5
            ) {
                let k = Kernel::epanechnikov();
                let tk = TruncatedKernel::hard(k.clone(), cutoff).unwrap();
                let t = tk.truncated_eval(h, x).unwrap();
                if (x / h).abs() > cutoff {
                    prop_assert_eq!(t, k.scaled_eval(h, x).unwrap());
                } else {
                    prop_assert_eq!(t, 0.0);
                }
            }
        }
    }
}
