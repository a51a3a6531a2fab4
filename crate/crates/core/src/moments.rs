//! Moment functionals `g` and the localized estimators
//!
//! * raw:        `Ĝ_h(u)  = (1/n) Σ_t K_h(t/n - u) g(Y_{t,n})`
//! * normalized: `Ĝ°_h(u) = Ĝ_h(u) / ((1/n) Σ_t K_h(t/n - u))`
//! * leave-out:  `Ĝ⁻_h(u)`, the normalized estimator built on `K^{(n)}`
//!
//! `Y_{t,n} = (X_t, X_{t-1}, …, X_1, 0, 0, …)`: lags before the first
//! observation are zero.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, Kernel, TruncatedKernel};
use crate::processes::TimeSeriesPath;

/// Map from the lag vector `(x_0, x_1, …)` = `(X_t, X_{t-1}, …)` to `ℝ^d`.
#[derive(Clone)]
pub enum MomentFunctional {
    /// `x_0`.
    Mean,
    /// `x_0 · x_k`.
    CovarianceLag(usize),
    /// `x_i · x_j`.
    Product(usize, usize),
    /// `cos(θ x_0)`, the real part of `e^{iθx_0}`.
    CharCos(f64),
    /// `1{x_0 <= y}`.
    IndicatorLE(f64),
    /// Components of every part, concatenated.
    Stack(Vec<MomentFunctional>),
    Custom(CustomFunctional),
}

/// User-supplied functional. `map` receives `window` values
/// `(X_t, …, X_{t-window+1})` and writes `output_dim` values.
#[derive(Clone)]
pub struct CustomFunctional {
    pub name: String,
    pub window: usize,
    pub output_dim: usize,
    pub map: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl MomentFunctional {
    /// `(X_{t-1}², X_t X_{t-1})`, whose target is `(c(u,0), c(u,1))`.
    pub fn correlation_pair() -> Self {
        MomentFunctional::Stack(vec![
            MomentFunctional::Product(1, 1),
            MomentFunctional::Product(0, 1),
        ])
    }

    /// `cos(θ x_0)` for each `θ` in `thetas`.
    pub fn char_cos_family(thetas: &[f64]) -> Self {
        MomentFunctional::Stack(thetas.iter().map(|&t| MomentFunctional::CharCos(t)).collect())
    }

    pub fn output_dim(&self) -> usize {
        match self {
            MomentFunctional::Stack(parts) => parts.iter().map(|p| p.output_dim()).sum(),
            MomentFunctional::Custom(c) => c.output_dim,
            _ => 1,
        }
    }

    /// Number of consecutive observations consumed, `X_t` included.
    pub fn window(&self) -> usize {
        match self {
            MomentFunctional::Mean | MomentFunctional::CharCos(_) | MomentFunctional::IndicatorLE(_) => 1,
            MomentFunctional::CovarianceLag(k) => k + 1,
            MomentFunctional::Product(i, j) => i.max(j) + 1,
            MomentFunctional::Stack(parts) => parts.iter().map(|p| p.window()).max().unwrap_or(1),
            MomentFunctional::Custom(c) => c.window,
        }
    }

    /// Evaluates on `lags[i] = X_{t-i}` (already zero padded), writing into `out`.
    fn eval_into(&self, lags: &[f64], out: &mut [f64]) {
        match self {
            MomentFunctional::Mean => out[0] = lags[0],
            MomentFunctional::CovarianceLag(k) => out[0] = lags[0] * lags[*k],
            MomentFunctional::Product(i, j) => out[0] = lags[*i] * lags[*j],
            MomentFunctional::CharCos(theta) => out[0] = (theta * lags[0]).cos(),
            MomentFunctional::IndicatorLE(y) => out[0] = if lags[0] <= *y { 1.0 } else { 0.0 },
            MomentFunctional::Stack(parts) => {
                let mut offset = 0;
                for p in parts {
                    let d = p.output_dim();
                    p.eval_into(lags, &mut out[offset..offset + d]);
                    offset += d;
                }
            }
            MomentFunctional::Custom(c) => (c.map)(&lags[..c.window], out),
        }
    }
}

impl fmt::Debug for MomentFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MomentFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentFunctional::Mean => f.write_str("mean"),
            MomentFunctional::CovarianceLag(k) => write!(f, "cov:{k}"),
            MomentFunctional::Product(i, j) => write!(f, "product:{i}:{j}"),
            MomentFunctional::CharCos(t) => write!(f, "charcos:{t}"),
            MomentFunctional::IndicatorLE(y) => write!(f, "indicator:{y}"),
            MomentFunctional::Stack(parts) => {
                let s: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "[{}]", s.join(","))
            }
            MomentFunctional::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl PartialEq for MomentFunctional {
    fn eq(&self, other: &Self) -> bool {
        use MomentFunctional::*;
        match (self, other) {
            (Mean, Mean) => true,
            (CovarianceLag(a), CovarianceLag(b)) => a == b,
            (Product(a, b), Product(c, d)) => a == c && b == d,
            (CharCos(a), CharCos(b)) => a == b,
            (IndicatorLE(a), IndicatorLE(b)) => a == b,
            (Stack(a), Stack(b)) => a == b,
            (Custom(a), Custom(b)) => Arc::ptr_eq(&a.map, &b.map),
            _ => false,
        }
    }
}

impl FromStr for MomentFunctional {
    type Err = Error;

    /// `mean`, `cov:<k>`, `product:<i>:<j>`, `charcos:<θ>`, `indicator:<y>`, `corr`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Config(format!("unknown functional `{s}`"));
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let int = |p: &str| p.trim().parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["mean"] => Ok(MomentFunctional::Mean),
            ["cov", k] => Ok(MomentFunctional::CovarianceLag(int(k)?)),
            ["product", i, j] => Ok(MomentFunctional::Product(int(i)?, int(j)?)),
            ["charcos", t] => Ok(MomentFunctional::CharCos(num(t)?)),
            ["indicator", y] => Ok(MomentFunctional::IndicatorLE(num(y)?)),
            ["corr"] => Ok(MomentFunctional::correlation_pair()),
            _ => Err(bad()),
        }
    }
}

/// `g(Y_{t,n})` for `1 <= t <= n`.
pub fn lagged_eval(path: &TimeSeriesPath, g: &MomentFunctional, t: usize) -> Result<Vec<f64>> {
    if t == 0 || t > path.n {
        return Err(Error::InvalidParameter(format!("time index {t} outside 1..={}", path.n)));
    }
    let lags: Vec<f64> = (0..g.window())
        .map(|i| if i < t { path.values[t - 1 - i] } else { 0.0 })
        .collect();
    let mut out = vec![0.0; g.output_dim()];
    g.eval_into(&lags, &mut out);
    Ok(out)
}

/// Smooth map `F: ℝ^d → ℝ^{d̃}` with its Jacobian, for correlation-type targets.
#[derive(Clone)]
pub struct Composition {
    pub name: String,
    pub input_dim: usize,
    pub output_dim: usize,
    map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    /// Row-major `d̃ × d`.
    jacobian: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Composition({}: {} -> {})", self.name, self.input_dim, self.output_dim)
    }
}

impl Composition {
    pub fn new<F, J>(name: impl Into<String>, input_dim: usize, output_dim: usize, map: F, jacobian: J) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Composition {
            name: name.into(),
            input_dim,
            output_dim,
            map: Arc::new(map),
            jacobian: Arc::new(jacobian),
        }
    }

    pub fn identity(d: usize) -> Self {
        Composition::new("identity", d, d, |x| x.to_vec(), move |_| {
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                m[i * d + i] = 1.0;
            }
            m
        })
    }

    /// `F(x, y) = y / x`.
    pub fn ratio() -> Self {
        Composition::new(
            "ratio",
            2,
            1,
            |v| vec![v[1] / v[0]],
            |v| vec![-v[1] / (v[0] * v[0]), 1.0 / v[0]],
        )
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        (self.jacobian)(x)
    }

    /// Largest relative deviation between the Jacobian and central
    /// differences of `F` at `x`.
    pub fn jacobian_error(&self, x: &[f64]) -> f64 {
        let jac = self.jacobian(x);
        let mut worst: f64 = 0.0;
        for j in 0..self.input_dim {
            let step = 1e-6 * x[j].abs().max(1.0);
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[j] += step;
            lo[j] -= step;
            let (fh, fl) = (self.apply(&hi), self.apply(&lo));
            for i in 0..self.output_dim {
                let fd = (fh[i] - fl[i]) / (2.0 * step);
                let an = jac[i * self.input_dim + j];
                worst = worst.max((fd - an).abs() / an.abs().max(1.0));
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Raw,
    Normalized,
    #[serde(rename = "leaveout", alias = "leave_out")]
    LeaveOut,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Raw => "raw",
            Variant::Normalized => "normalized",
            Variant::LeaveOut => "leaveout",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Variant::Raw),
            "normalized" => Ok(Variant::Normalized),
            "leaveout" | "leave_out" => Ok(Variant::LeaveOut),
            _ => Err(Error::Config(format!("unknown estimator variant `{s}`"))),
        }
    }
}

/// Estimator choice for sweeps over a `u`-grid.
#[derive(Debug, Clone)]
pub enum Estimator {
    Raw(Kernel),
    Normalized(Kernel),
    LeaveOut(TruncatedKernel),
}

impl Estimator {
    pub fn variant(&self) -> Variant {
        match self {
            Estimator::Raw(_) => Variant::Raw,
            Estimator::Normalized(_) => Variant::Normalized,
            Estimator::LeaveOut(_) => Variant::LeaveOut,
        }
    }
}

/// Estimates on a `u`-grid; `None` marks zero-mass points.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCurve {
    pub u_grid: Vec<f64>,
    pub values: Vec<Option<Vec<f64>>>,
    pub h: f64,
    pub variant: Variant,
    pub dim: usize,
}

impl EstimateCurve {
    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Columns `u, value_1..value_d, h, variant`; missing values are `NaN`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["u".to_string()];
        header.extend((1..=self.dim).map(|j| format!("value_{j}")));
        header.push("h".into());
        header.push("variant".into());
        w.write_record(&header)?;
        for (u, v) in self.u_grid.iter().zip(&self.values) {
            let mut row = vec![u.to_string()];
            match v {
                Some(v) => row.extend(v.iter().map(|x| x.to_string())),
                None => row.extend((0..self.dim).map(|_| "NaN".to_string())),
            }
            row.push(self.h.to_string());
            row.push(self.variant.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Midpoints `(i + 1/2)/m` of a uniform partition of `[0, 1]`.
pub fn midpoint_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()
}

/// Fitted values at the sample points `u = t/n`, `t = 1..n`.
#[derive(Debug, Clone)]
pub struct SampleFit {
    /// Row-major `n × d`; rows of infeasible points are zero.
    pub values: Vec<f64>,
    pub feasible: Vec<bool>,
    pub dim: usize,
}

impl SampleFit {
    pub fn row(&self, t: usize) -> Option<&[f64]> {
        self.feasible[t].then(|| &self.values[t * self.dim..(t + 1) * self.dim])
    }
}

/// `g(Y_{t,n})` for all `t`, stored row-major so each estimator is one pass.
#[derive(Debug, Clone)]
pub struct MomentSeries {
    n: usize,
    dim: usize,
    values: Vec<f64>,
    functional: MomentFunctional,
}

impl MomentSeries {
    pub fn new(x: &[f64], g: &MomentFunctional) -> Self {
        let n = x.len();
        let dim = g.output_dim();
        let window = g.window();
        let mut values = vec![0.0; n * dim];
        let mut lags = vec![0.0; window];
        for t in 0..n {
            for (i, l) in lags.iter_mut().enumerate() {
                *l = if i <= t { x[t - i] } else { 0.0 };
            }
            g.eval_into(&lags, &mut values[t * dim..(t + 1) * dim]);
        }
        MomentSeries {
            n,
            dim,
            values,
            functional: g.clone(),
        }
    }

    pub fn from_path(path: &TimeSeriesPath, g: &MomentFunctional) -> Self {
        Self::new(&path.values, g)
    }

    /// Builds directly from `n × d` row-major values.
    pub fn from_rows(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::InvalidParameter("row-major length must be a multiple of dim".into()));
        }
        Ok(MomentSeries {
            n: values.len() / dim,
            dim,
            values,
            functional: MomentFunctional::Mean,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn functional(&self) -> &MomentFunctional {
        &self.functional
    }

    /// `g(Y_{t+1,n})` (zero-based row).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn component(&self, j: usize) -> MomentSeries {
        MomentSeries {
            n: self.n,
            dim: 1,
            values: (0..self.n).map(|t| self.values[t * self.dim + j]).collect(),
            functional: match &self.functional {
                MomentFunctional::Stack(parts) if parts.len() == self.dim => parts[j].clone(),
                other => other.clone(),
            },
        }
    }

    /// Zero-based indices that can carry weight for a kernel of half-width
    /// `h/2` around `u`, padded by one on each side.
    fn window_range(&self, u: f64, h: f64) -> std::ops::Range<usize> {
        let nf = self.n as f64;
        let lo = (nf * (u - h / 2.0)).floor() as i64 - 1;
        let hi = (nf * (u + h / 2.0)).ceil() as i64 + 1;
        let lo = lo.max(1) as usize - 1;
        let hi = (hi.min(self.n as i64).max(0)) as usize;
        lo..hi.max(lo)
    }

    /// Returns `((1/n) Σ w_t, (1/n) Σ w_t g_t)` for kernel weights
    /// `w_t = weight((t - un)/(nh)) / h`.
    fn weighted_sums(&self, u: f64, h: f64, weight: impl Fn(f64) -> f64) -> (f64, Vec<f64>) {
        let nf = self.n as f64;
        let (un, nh) = (u * nf, nf * h);
        let mut mass = 0.0;
        let mut acc = vec![0.0; self.dim];
        for i in self.window_range(u, h) {
            let w = weight(((i + 1) as f64 - un) / nh);
            if w != 0.0 {
                mass += w;
                for (a, v) in acc.iter_mut().zip(self.row(i)) {
                    *a += w * v;
                }
            }
        }
        let scale = 1.0 / (nf * h);
        acc.iter_mut().for_each(|a| *a *= scale);
        (mass * scale, acc)
    }

    /// `(1/n) Σ_t K_h(t/n - u)`.
    pub fn kernel_mass(&self, u: f64, h: f64, kernel: &Kernel) -> Result<f64> {
        check_bandwidth(h)?;
        Ok(self.weighted_sums(u, h, |x| kernel.eval(x)).0)
    }

    pub fn estimate_raw(&self, u: f64, h: f64, kernel: &Kernel) -> Result<Vec<f64>> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidBandwidth(h));
        }
        check_u(u)?;
        Ok(self.weighted_sums(u, h, |x| kernel.eval(x)).1)
    }

    pub fn estimate_normalized(&self, u: f64, h: f64, kernel: &Kernel) -> Result<Vec<f64>> {
        check_bandwidth(h)?;
        check_u(u)?;
        normalize(self.weighted_sums(u, h, |x| kernel.eval(x)), u, h)
    }

    pub fn estimate_leaveout(&self, u: f64, h: f64, tk: &TruncatedKernel) -> Result<Vec<f64>> {
        check_bandwidth(h)?;
        check_u(u)?;
        normalize(self.weighted_sums(u, h, |x| tk.eval(x)), u, h)
    }

    pub fn estimate(&self, u: f64, h: f64, estimator: &Estimator) -> Result<Vec<f64>> {
        match estimator {
            Estimator::Raw(k) => self.estimate_raw(u, h, k),
            Estimator::Normalized(k) => self.estimate_normalized(u, h, k),
            Estimator::LeaveOut(tk) => self.estimate_leaveout(u, h, tk),
        }
    }

    /// Applies the estimator at every grid point; zero-mass points become
    /// `None`, any other error aborts.
    pub fn estimate_curve(&self, u_grid: &[f64], h: f64, estimator: &Estimator) -> Result<EstimateCurve> {
        check_bandwidth(h)?;
        let mut values = Vec::with_capacity(u_grid.len());
        for &u in u_grid {
            match self.estimate(u, h, estimator) {
                Ok(v) => values.push(Some(v)),
                Err(Error::ZeroMass { .. }) => values.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(EstimateCurve {
            u_grid: u_grid.to_vec(),
            values,
            h,
            variant: estimator.variant(),
            dim: self.dim,
        })
    }

    /// Self-normalized fit at every sample point `u = t/n` with unscaled
    /// weight function `weight` (the base kernel or `K^{(n)}`).
    ///
    /// At `u = t/n` the kernel argument of observation `s` is `(s-t)/(nh)`,
    /// so one weight table serves every `t`.
    pub fn fit_at_samples(&self, h: f64, weight: impl Fn(f64) -> f64) -> Result<SampleFit> {
        check_bandwidth(h)?;
        let n = self.n;
        let nh = n as f64 * h;
        let reach = ((nh / 2.0).ceil() as usize + 1).min(n);
        let table: Vec<f64> = (0..=reach).map(|j| weight(j as f64 / nh)).collect();
        let negative: Vec<f64> = (0..=reach).map(|j| weight(-(j as f64) / nh)).collect();
        let d = self.dim;
        let mut values = vec![0.0; n * d];
        let mut feasible = vec![false; n];
        let mut acc = vec![0.0; d];
        for t in 0..n {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut mass = 0.0;
            let lo = t.saturating_sub(reach);
            let hi = (t + reach).min(n - 1);
            for s in lo..=hi {
                let w = if s >= t { table[s - t] } else { negative[t - s] };
                if w != 0.0 {
                    mass += w;
                    for (a, v) in acc.iter_mut().zip(&self.values[s * d..(s + 1) * d]) {
                        *a += w * v;
                    }
                }
            }
            if mass > 0.0 {
                feasible[t] = true;
                for (o, a) in values[t * d..(t + 1) * d].iter_mut().zip(&acc) {
                    *o = a / mass;
                }
            }
        }
        Ok(SampleFit {
            values,
            feasible,
            dim: d,
        })
    }

    pub fn leaveout_at_samples(&self, h: f64, tk: &TruncatedKernel) -> Result<SampleFit> {
        self.fit_at_samples(h, |x| tk.eval(x))
    }

    pub fn normalized_at_samples(&self, h: f64, kernel: &Kernel) -> Result<SampleFit> {
        self.fit_at_samples(h, |x| kernel.eval(x))
    }
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("u = {u} outside [0, 1]")))
    }
}

fn normalize((mass, sums): (f64, Vec<f64>), u: f64, h: f64) -> Result<Vec<f64>> {
    if mass > 0.0 {
        Ok(sums.into_iter().map(|s| s / mass).collect())
    } else {
        Err(Error::ZeroMass { u, h })
    }
}
