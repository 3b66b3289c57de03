//! Crude Monte Carlo estimates of `P(. in tA)` and convergence studies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::convolution::self_convolve;
use crate::error::{Error, Result};
use crate::levy::{auto_regime, from_model, levy_tail_approx, LevySpec, Regime};
use crate::regvar::RectSet;
use crate::samplers::{sample_compound_poisson_into, sample_sum_into, JumpModel, RngStream};
use crate::spectrum::MRVSpectrum;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Draws per substream; chunk `c` uses substream `c`.
pub const CHUNK: u64 = 1 << 16;

/// What is simulated: one jump, an `n`-fold sum, or `L(s)` of a compound Poisson process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimKind {
    Vector,
    Sum(u64),
    CompoundPoisson { lambda: f64, s: f64 },
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimKind::Vector => write!(f, "vector"),
            SimKind::Sum(n) => write!(f, "sum:{n}"),
            SimKind::CompoundPoisson { lambda, s } => write!(f, "cp:{lambda}:{s}"),
        }
    }
}

impl FromStr for SimKind {
    type Err = Error;

    /// `vector`, `sum:N` or `cp:LAMBDA:S`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::bad_param("kind", format!("expected vector, sum:N or cp:LAMBDA:S, got {text:?}"));
        let parts: Vec<&str> = text.trim().split(':').collect();
        match parts.as_slice() {
            ["vector"] => Ok(SimKind::Vector),
            ["sum", n] => Ok(SimKind::Sum(n.parse().map_err(|_| bad())?)),
            ["cp", l, s] => {
                let lambda: f64 = l.parse().map_err(|_| bad())?;
                let s: f64 = s.parse().map_err(|_| bad())?;
                if !(lambda > 0.0 && s > 0.0 && (lambda * s).is_finite()) {
                    return Err(Error::bad_param("kind", "lambda and s must be positive"));
                }
                Ok(SimKind::CompoundPoisson { lambda, s })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for SimKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SimKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hits: u64,
}

impl Estimate {
    pub fn from_hits(hits: u64, n_samples: u64) -> Self {
        let n = n_samples as f64;
        let p = hits as f64 / n;
        let (ci_lo, ci_hi) = wilson(p, n, Z95);
        Estimate {
            p_hat: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            n_samples,
            ci_lo,
            ci_hi,
            hits,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }

    /// `|p_hat - value| <= k stderr`; with no hits the Wilson bound stands in.
    pub fn within_stderr(&self, value: f64, k: f64) -> bool {
        if self.hits == 0 {
            return value <= self.ci_hi;
        }
        (self.p_hat - value).abs() <= k * self.stderr
    }
}

fn wilson(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

fn check_kind(kind: SimKind) -> Result<()> {
    if let SimKind::CompoundPoisson { lambda, s } = kind {
        if !(lambda > 0.0 && s > 0.0 && (lambda * s).is_finite()) {
            return Err(Error::bad_param("kind", "lambda and s must be positive"));
        }
    }
    Ok(())
}

/// Hit counts of every set in `sets` over one shared stream of `n_samples` draws.
/// Chunk `c` of `CHUNK` draws runs on substream `c` of `seed`; totals do not depend
/// on the thread count.
pub fn count_hits(kind: SimKind, m: &JumpModel, sets: &[RectSet], n_samples: u64, seed: u64) -> Result<Vec<u64>> {
    check_kind(kind)?;
    if n_samples == 0 {
        return Err(Error::bad_param("n_samples", "must be at least 1"));
    }
    for a in sets {
        if a.dim() != m.d() {
            return Err(Error::DimensionMismatch { expected: m.d(), got: a.dim() });
        }
    }
    let n_chunks = n_samples.div_ceil(CHUNK);
    let per_chunk = |c: u64| -> Vec<u64> {
        let mut rng = RngStream::new(seed, c);
        let len = CHUNK.min(n_samples - c * CHUNK);
        let d = m.d();
        let mut z = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut hits = vec![0u64; sets.len()];
        for _ in 0..len {
            match kind {
                SimKind::Vector => m.sample_into(&mut rng, &mut z),
                SimKind::Sum(n) => sample_sum_into(m, n, &mut rng, &mut z, &mut scratch),
                SimKind::CompoundPoisson { lambda, s } => {
                    sample_compound_poisson_into(m, lambda, s, &mut rng, &mut z, &mut scratch);
                }
            }
            for (h, a) in hits.iter_mut().zip(sets) {
                if a.contains_unchecked(&z) {
                    *h += 1;
                }
            }
        }
        hits
    };
    let totals = (0..n_chunks)
        .into_par_iter()
        .map(per_chunk)
        .reduce(
            || vec![0u64; sets.len()],
            |mut acc, h| {
                for (x, y) in acc.iter_mut().zip(h) {
                    *x += y;
                }
                acc
            },
        );
    Ok(totals)
}

pub fn estimate_tail_prob(kind: SimKind, m: &JumpModel, a: &RectSet, t: f64, n_samples: u64, seed: u64) -> Result<Estimate> {
    let set = a.scaled(t)?;
    let hits = count_hits(kind, m, std::slice::from_ref(&set), n_samples, seed)?;
    Ok(Estimate::from_hits(hits[0], n_samples))
}

/// Where the theory value of a study comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Theory {
    /// Spectrum of the simulated quantity itself.
    Spectrum(MRVSpectrum),
    Levy { spec: LevySpec, regime: Regime },
}

impl Theory {
    /// Theory for `kind` derived from the model's own spectrum.
    pub fn auto(kind: SimKind, m: &JumpModel) -> Result<Theory> {
        let spec = m.spectrum()?;
        match kind {
            SimKind::Vector => Ok(Theory::Spectrum(spec)),
            SimKind::Sum(n) => {
                if n == 0 {
                    return Err(Error::bad_param("kind", "sum of zero jumps has no tail"));
                }
                Ok(Theory::Spectrum(self_convolve(&spec, n as usize)?))
            }
            SimKind::CompoundPoisson { lambda, .. } => {
                let spec = from_model(m, lambda)?;
                let regime = auto_regime(&spec)?;
                Ok(Theory::Levy { spec, regime })
            }
        }
    }

    pub fn approx(&self, kind: SimKind, a: &RectSet, t: f64) -> Result<f64> {
        match self {
            Theory::Spectrum(spec) => spec.tail_prob_estimate(a, t),
            Theory::Levy { spec, regime } => {
                let s = match kind {
                    SimKind::CompoundPoisson { s, .. } => s,
                    _ => return Err(Error::bad_param("theory", "a Levy theory needs a compound Poisson kind")),
                };
                Ok(levy_tail_approx(spec, a, t, s, *regime)?.value)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub t: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub approx: f64,
    pub ratio: Option<f64>,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    pub hits: Vec<u64>,
    /// `|ratio - 1|` is nonincreasing along the grid.
    pub monotone: bool,
}

/// Estimates and theory values along `t_grid`; every grid point reuses the same draws.
pub fn convergence_study(
    kind: SimKind,
    m: &JumpModel,
    theory: &Theory,
    a: &RectSet,
    t_grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Study> {
    if t_grid.is_empty() {
        return Err(Error::bad_param("t_grid", "must not be empty"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
        return Err(Error::bad_param("t_grid", "must be positive and strictly increasing"));
    }
    // theory first: a null-convergence cone fails before any simulation
    let approx = t_grid.iter().map(|&t| theory.approx(kind, a, t)).collect::<Result<Vec<_>>>()?;
    let sets = t_grid.iter().map(|&t| a.scaled(t)).collect::<Result<Vec<_>>>()?;
    let hits = count_hits(kind, m, &sets, n_samples, seed)?;
    let rows: Vec<StudyRow> = t_grid
        .iter()
        .zip(&approx)
        .zip(&hits)
        .map(|((&t, &ap), &h)| {
            let e = Estimate::from_hits(h, n_samples);
            StudyRow {
                t,
                p_hat: e.p_hat,
                stderr: e.stderr,
                ci_lo: e.ci_lo,
                ci_hi: e.ci_hi,
                approx: ap,
                ratio: (ap > 0.0).then(|| e.p_hat / ap),
                n_samples,
                seed,
            }
        })
        .collect();
    let dev: Vec<f64> = rows.iter().filter_map(|r| r.ratio).map(|r| (r - 1.0).abs()).collect();
    let monotone = dev.windows(2).all(|w| w[1] <= w[0]);
    Ok(Study { rows, hits, monotone })
}

pub fn write_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Kolmogorov-Smirnov distance of a sample from a continuous cdf. Sorts in place.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `c(level)/sqrt(n)`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// Pearson chi-square test of Poisson(`mean`) counts; cells below expected 5 are pooled.
/// Returns the p-value.
pub fn chi_square_poisson(counts: &[u64], mean: f64) -> f64 {
    let n = counts.len() as f64;
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut observed = vec![0.0; max + 2];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut probs = Vec::with_capacity(max + 2);
    let mut p = (-mean).exp();
    for k in 0..=max {
        if k > 0 {
            p *= mean / k as f64;
        }
        probs.push(p);
    }
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    probs.push(tail);
    // pool adjacent cells until each expects at least 5
    let mut cells = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (ok, pk) in observed.iter().zip(&probs) {
        o += ok;
        e += n * pk;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}
