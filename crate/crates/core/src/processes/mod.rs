//! Time-varying AR(1) paths `X_{t,n} = a(t/n) X_{t-1,n} + ζ_t`, their
//! frozen-coefficient stationary approximations, and the ground truths the
//! oracles score against.

mod truth;

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use truth::{
    closed_form_truth, mc_ground_truth, stationary_moments, true_char_function, true_correlation,
    true_covariance, GroundTruth, McTruthConfig, Provenance, StationaryMoments, TruthFlags,
};

/// Default number of discarded start-up draws.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Half-width of the neighbourhood around unit-root points that oracle
/// evaluations skip.
pub const UNIT_ROOT_EXCLUSION: f64 = 0.02;

/// Coefficient curve `u ↦ a(u)` of the tvAR(1) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CoefficientCurve {
    /// `sin(2πu)`, with unit roots at `u ∈ {1/4, 3/4}`.
    SinFull,
    /// `0.6·sin(2πu)`.
    SinScaled,
    /// `0.5·(1 - 2·1{u ≥ 1/2})`.
    Step,
    Constant(f64),
    /// Values on the uniform grid `i/(m-1)`, linearly interpolated.
    Tabulated(Vec<f64>),
}

impl CoefficientCurve {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            CoefficientCurve::SinFull => (2.0 * PI * u).sin(),
            CoefficientCurve::SinScaled => 0.6 * (2.0 * PI * u).sin(),
            CoefficientCurve::Step => {
                if u >= 0.5 {
                    -0.5
                } else {
                    0.5
                }
            }
            CoefficientCurve::Constant(a) => *a,
            CoefficientCurve::Tabulated(v) => interpolate(v, u),
        }
    }

    /// First and second derivative of `a` at `u`. For the step curve both
    /// vanish away from the jump and are `NaN` within `1e-9` of it.
    pub fn derivatives(&self, u: f64) -> (f64, f64) {
        let w = 2.0 * PI;
        match self {
            CoefficientCurve::SinFull => (w * (w * u).cos(), -w * w * (w * u).sin()),
            CoefficientCurve::SinScaled => {
                (0.6 * w * (w * u).cos(), -0.6 * w * w * (w * u).sin())
            }
            CoefficientCurve::Step => {
                if (u - 0.5).abs() < 1e-9 {
                    (f64::NAN, f64::NAN)
                } else {
                    (0.0, 0.0)
                }
            }
            CoefficientCurve::Constant(_) => (0.0, 0.0),
            CoefficientCurve::Tabulated(_) => {
                let d = 1e-4;
                let (lo, hi) = ((u - d).max(0.0), (u + d).min(1.0));
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let d1 = (self.value(hi) - self.value(lo)) / (hi - lo);
                let d2 = (self.value(hi) - 2.0 * self.value(mid) + self.value(lo)) / (half * half);
                (d1, d2)
            }
        }
    }

    /// Points in `[0, 1]` where `|a(u)| = 1`.
    pub fn unit_root_points(&self) -> Vec<f64> {
        match self {
            CoefficientCurve::SinFull => vec![0.25, 0.75],
            CoefficientCurve::SinScaled | CoefficientCurve::Step => vec![],
            CoefficientCurve::Constant(a) => {
                if a.abs() >= 1.0 {
                    vec![0.5]
                } else {
                    vec![]
                }
            }
            CoefficientCurve::Tabulated(_) => (0..=10_000)
                .map(|i| i as f64 / 10_000.0)
                .filter(|&u| self.value(u).abs() >= 1.0)
                .collect(),
        }
    }

    /// Whether oracle quantities at `u` are well defined and not inside an
    /// excluded unit-root neighbourhood.
    pub fn oracle_admissible(&self, u: f64) -> bool {
        if let CoefficientCurve::Constant(a) = self {
            return a.abs() < 1.0;
        }
        self.value(u).abs() < 1.0
            && self
                .unit_root_points()
                .iter()
                .all(|p| (u - p).abs() > UNIT_ROOT_EXCLUSION)
    }
}

fn interpolate(v: &[f64], u: f64) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        m => {
            let pos = u.clamp(0.0, 1.0) * (m - 1) as f64;
            let i = (pos.floor() as usize).min(m - 2);
            let frac = pos - i as f64;
            v[i] * (1.0 - frac) + v[i + 1] * frac
        }
    }
}

impl fmt::Display for CoefficientCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientCurve::SinFull => f.write_str("sin_full"),
            CoefficientCurve::SinScaled => f.write_str("sin_scaled"),
            CoefficientCurve::Step => f.write_str("step"),
            CoefficientCurve::Constant(a) => write!(f, "constant:{a}"),
            CoefficientCurve::Tabulated(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "tabulated:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for CoefficientCurve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{t}` in curve `{s}`")))
        };
        match (head.to_ascii_lowercase().as_str(), tail) {
            ("sin_full", None) => Ok(CoefficientCurve::SinFull),
            ("sin_scaled", None) => Ok(CoefficientCurve::SinScaled),
            ("step", None) => Ok(CoefficientCurve::Step),
            ("constant", Some(t)) => Ok(CoefficientCurve::Constant(parse(t)?)),
            ("tabulated", Some(t)) => {
                let v = t.split(',').map(parse).collect::<Result<Vec<_>>>()?;
                if v.len() < 2 {
                    return Err(Error::Config("tabulated curve needs >= 2 values".into()));
                }
                Ok(CoefficientCurve::Tabulated(v))
            }
            _ => Err(Error::Config(format!("unknown coefficient curve `{s}`"))),
        }
    }
}

impl TryFrom<String> for CoefficientCurve {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CoefficientCurve> for String {
    fn from(c: CoefficientCurve) -> String {
        c.to_string()
    }
}

/// A seed plus substream index. Each `(seed, stream)` pair drives an
/// independent ChaCha keystream, so replication `r` can use stream `r`
/// without perturbing any other replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed {
    pub seed: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        StreamSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for StreamSeed {
    fn from(seed: u64) -> Self {
        StreamSeed { seed, stream: 0 }
    }
}

/// `count` i.i.d. standard normal innovations; `simulate_*` consume the
/// first `burn_in` of them for start-up and the rest for `t = 1..n`.
pub fn innovations(seed: impl Into<StreamSeed>, count: usize) -> Vec<f64> {
    let mut rng = seed.into().rng();
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// One realisation `X_{1,n}, …, X_{n,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPath {
    pub values: Vec<f64>,
    pub n: usize,
    pub seed: StreamSeed,
    pub curve: CoefficientCurve,
}

/// Stationary AR(1) path with coefficient frozen at `a(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPath {
    pub values: Vec<f64>,
    pub u: f64,
    pub coefficient: f64,
    pub seed: StreamSeed,
    pub curve: CoefficientCurve,
}

pub fn simulate_tvar(
    curve: &CoefficientCurve,
    n: usize,
    seed: impl Into<StreamSeed>,
    burn_in: usize,
) -> Result<TimeSeriesPath> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("path length n = {n} < 2")));
    }
    let seed = seed.into();
    let z = innovations(seed, burn_in + n);
    let a0 = curve.value(0.0);
    let mut x = 0.0;
    for &e in &z[..burn_in] {
        x = a0 * x + e;
    }
    let nf = n as f64;
    let values = z[burn_in..]
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            x = curve.value((i + 1) as f64 / nf) * x + e;
            x
        })
        .collect();
    Ok(TimeSeriesPath {
        values,
        n,
        seed,
        curve: curve.clone(),
    })
}

/// Same innovation consumption as [`simulate_tvar`], so both paths can be
/// coupled through a common seed.
pub fn simulate_stationary(
    curve: &CoefficientCurve,
    u: f64,
    n: usize,
    seed: impl Into<StreamSeed>,
    burn_in: usize,
) -> Result<StationaryPath> {
    let a = curve.value(u);
    if a.abs() >= 1.0 {
        return Err(Error::NonStationary { u, coefficient: a.abs() });
    }
    if burn_in < DEFAULT_BURN_IN {
        return Err(Error::InvalidParameter(format!(
            "stationary burn-in must be >= {DEFAULT_BURN_IN}, got {burn_in}"
        )));
    }
    let seed = seed.into();
    let z = innovations(seed, burn_in + n);
    Ok(StationaryPath {
        values: ar1_from_innovations(a, &z, burn_in),
        u,
        coefficient: a,
        seed,
        curve: curve.clone(),
    })
}

/// Runs `x_t = a x_{t-1} + z_t` from zero and drops the first `burn_in` values.
pub(crate) fn ar1_from_innovations(a: f64, z: &[f64], burn_in: usize) -> Vec<f64> {
    let mut x = 0.0;
    let mut out = Vec::with_capacity(z.len().saturating_sub(burn_in));
    for (i, &e) in z.iter().enumerate() {
        x = a * x + e;
        if i >= burn_in {
            out.push(x);
        }
    }
    out
}

impl TimeSeriesPath {
    /// Wraps observed data; `seed` and `curve` become informational.
    pub fn from_values(values: Vec<f64>, curve: CoefficientCurve) -> Self {
        TimeSeriesPath {
            n: values.len(),
            values,
            seed: StreamSeed::new(0, 0),
            curve,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n={}", self.n)?;
        writeln!(out, "# seed={}", self.seed.seed)?;
        writeln!(out, "# stream={}", self.seed.stream)?;
        writeln!(out, "# curve={}", self.curve)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x"])?;
        for v in &self.values {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut seed = StreamSeed::new(0, 0);
        let mut curve = CoefficientCurve::Constant(0.0);
        let mut values = Vec::new();
        let mut saw_header = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    match k.trim() {
                        "seed" => seed.seed = v.trim().parse().unwrap_or(0),
                        "stream" => seed.stream = v.trim().parse().unwrap_or(0),
                        "curve" => curve = v.trim().parse()?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !saw_header {
                saw_header = true;
                if line.parse::<f64>().is_err() {
                    continue;
                }
            }
            let v = line
                .parse::<f64>()
                .map_err(|_| Error::Io(format!("bad value `{line}` in path CSV")))?;
            values.push(v);
        }
        Ok(TimeSeriesPath {
            n: values.len(),
            values,
            seed,
            curve,
        })
    }
}
