//! Seed-deterministic samplers for the dependence models.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::measures::MAX_DIM;
use crate::spectrum::{families, MRVSpectrum};

/// ChaCha20 keyed by `seed`, positioned on substream `stream`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    #[default]
    Uniform,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub enum JumpFamily {
    IndependencePareto,
    /// Common shocks: bitmask of the subset (bit j = coordinate j) and its rate.
    MarshallOlkin { rates: Vec<(u32, f64)> },
    Mardia,
    Acig { beta: f64 },
    CompleteDependence,
    DiscreteMixture { p: Vec<f64>, noise: Noise },
    TwoShock { p: Vec<f64> },
}

/// A jump law on `R_+^d` with Pareto(alpha)-type marginals.
#[derive(Clone, Debug)]
pub struct JumpModel {
    d: usize,
    alpha: f64,
    family: JumpFamily,
    // derived sampling state
    mo_totals: Vec<f64>,
    cum_p: Vec<f64>,
    psi: Option<AcigPsi>,
}

impl PartialEq for JumpModel {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.alpha == other.alpha && self.family == other.family
    }
}

fn check_p(d: usize, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != d {
        return Err(Error::BadModel(format!("p has {} entries, expected {d}", p.len())));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::BadModel("p must be nonnegative".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadModel(format!("p sums to {total}, expected 1")));
    }
    let mut acc = 0.0;
    Ok(p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect())
}

impl JumpModel {
    pub fn new(d: usize, alpha: f64, family: JumpFamily) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::BadModel(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::BadModel(format!("alpha must be positive, got {alpha}")));
        }
        let mut mo_totals = Vec::new();
        let mut cum_p = Vec::new();
        let mut psi = None;
        match &family {
            JumpFamily::MarshallOlkin { rates } => {
                let full = (1u64 << d) - 1;
                mo_totals = vec![0.0; d];
                for &(mask, rate) in rates {
                    if mask == 0 || mask as u64 > full {
                        return Err(Error::BadModel(format!("shock subset {mask:#b} outside 1..={d}")));
                    }
                    if !(rate.is_finite() && rate > 0.0) {
                        return Err(Error::BadModel(format!("shock rate must be positive, got {rate}")));
                    }
                    for (j, total) in mo_totals.iter_mut().enumerate() {
                        if mask & (1 << j) != 0 {
                            *total += rate;
                        }
                    }
                }
                if let Some(j) = mo_totals.iter().position(|&x| x == 0.0) {
                    return Err(Error::BadModel(format!("coordinate {} is hit by no shock", j + 1)));
                }
            }
            JumpFamily::Acig { beta } => {
                if !(*beta > 1.0 && *beta < 2.0) {
                    return Err(Error::BadModel(format!("ACIG beta must lie in (1,2), got {beta}")));
                }
                psi = Some(AcigPsi::new(*beta));
            }
            JumpFamily::DiscreteMixture { p, .. } | JumpFamily::TwoShock { p } => {
                cum_p = check_p(d, p)?;
            }
            _ => {}
        }
        Ok(JumpModel { d, alpha, family, mo_totals, cum_p, psi })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> &JumpFamily {
        &self.family
    }

    /// Shock rates keyed by sorted 0-based subsets.
    pub fn mo_rates(&self) -> Option<BTreeMap<Vec<usize>, f64>> {
        match &self.family {
            JumpFamily::MarshallOlkin { rates } => Some(
                rates.iter().map(|&(mask, r)| (mask_indices(mask, self.d), r)).collect(),
            ),
            _ => None,
        }
    }

    /// `Lambda_j`, the total shock rate hitting coordinate `j`.
    pub fn mo_totals(&self) -> &[f64] {
        &self.mo_totals
    }

    fn pick(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cum_p
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| self.cum_p.len() - 1)
    }

    /// One draw written into `out` (length `d`).
    pub fn sample_into(&self, rng: &mut impl Rng, out: &mut [f64]) {
        let a = self.alpha;
        match &self.family {
            JumpFamily::IndependencePareto => {
                for z in out.iter_mut() {
                    *z = pareto(rng, a);
                }
            }
            JumpFamily::MarshallOlkin { rates } => {
                out.fill(f64::INFINITY);
                for &(mask, rate) in rates {
                    let e: f64 = rng.sample::<f64, _>(Exp1) / rate;
                    for (j, t) in out.iter_mut().enumerate() {
                        if mask & (1 << j) != 0 && e < *t {
                            *t = e;
                        }
                    }
                }
                for (z, lam) in out.iter_mut().zip(&self.mo_totals) {
                    *z = (lam * *z / a).exp();
                }
            }
            JumpFamily::Mardia => {
                let s: f64 = rng.sample(Exp1);
                for z in out.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    *z = (e / s).powf(1.0 / a);
                }
            }
            JumpFamily::Acig { beta } => {
                let psi = self.psi.as_ref().expect("ACIG model carries its Laplace transform");
                let g: f64 = Gamma::new(*beta, 1.0).expect("beta validated").sample(rng);
                let v = 1.0 / g;
                for z in out.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    *z = psi.one_minus(e / v).powf(-1.0 / a);
                }
            }
            JumpFamily::CompleteDependence => {
                out.fill(pareto(rng, a));
            }
            JumpFamily::DiscreteMixture { noise, .. } => {
                let b = self.pick(rng);
                let x = pareto(rng, a);
                match noise {
                    Noise::Uniform => {
                        for z in out.iter_mut() {
                            *z = rng.gen::<f64>();
                        }
                    }
                    Noise::None => out.fill(0.0),
                }
                out[b] += x;
            }
            JumpFamily::TwoShock { .. } => {
                let w = 2f64.powf(-1.0 / a);
                out.fill(0.0);
                for _ in 0..2 {
                    let b = self.pick(rng);
                    out[b] += w * pareto(rng, a);
                }
            }
        }
    }

    /// The spectrum implied by the model, when the calculus covers it.
    pub fn spectrum(&self) -> Result<MRVSpectrum> {
        let (d, a) = (self.d, self.alpha);
        match &self.family {
            JumpFamily::IndependencePareto => families::independence(d, a, None),
            JumpFamily::MarshallOlkin { rates } => {
                let n_subsets = (1usize << d) - 1;
                if rates.len() != n_subsets {
                    return Err(Error::UnsupportedModel(
                        "Marshall-Olkin spectrum needs a rate on every nonempty subset".into(),
                    ));
                }
                let r0 = rates[0].1;
                let per_size = |&(mask, r): &(u32, f64)| r / mask.count_ones() as f64;
                let c0 = per_size(&rates[0]);
                if rates.iter().all(|&(_, r)| (r - r0).abs() <= 1e-12 * r0) {
                    families::mo_equal(d, a)
                } else if rates.iter().all(|x| (per_size(x) - c0).abs() <= 1e-12 * c0) {
                    families::mo_proportional(d, a)
                } else {
                    Err(Error::UnsupportedModel(
                        "Marshall-Olkin rates are neither equal nor proportional to |S|".into(),
                    ))
                }
            }
            JumpFamily::Mardia => families::mardia(d, a),
            JumpFamily::Acig { beta } => families::acig(d, a, *beta),
            JumpFamily::CompleteDependence => families::complete_dependence(d, a),
            JumpFamily::DiscreteMixture { p, .. } => families::discrete_mixture(d, a, p.clone(), None),
            JumpFamily::TwoShock { p } => families::two_shock(d, a, p.clone(), None),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        spec.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelSpec::from(self)).expect("model serializes")
    }
}

fn pareto(rng: &mut impl Rng, alpha: f64) -> f64 {
    // 1 - gen() lies in (0, 1]
    (1.0 - rng.gen::<f64>()).powf(-1.0 / alpha)
}

fn mask_indices(mask: u32, d: usize) -> Vec<usize> {
    (0..d).filter(|j| mask & (1 << j) != 0).collect()
}

/// Survival quantile `u^{-1/alpha}` of the Pareto(alpha) law.
pub fn pareto_quantile(u: f64, alpha: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::DomainError(format!("quantile level {u} outside (0,1)")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::DomainError(format!("alpha must be positive, got {alpha}")));
    }
    Ok(u.powf(-1.0 / alpha))
}

pub fn sample_vector(m: &JumpModel, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; m.d];
    m.sample_into(rng, &mut out);
    out
}

/// Sum of `n` independent draws; `scratch` must have length `d`.
pub fn sample_sum_into(m: &JumpModel, n: u64, rng: &mut impl Rng, out: &mut [f64], scratch: &mut [f64]) {
    out.fill(0.0);
    for _ in 0..n {
        m.sample_into(rng, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += s;
        }
    }
}

pub fn sample_sum(m: &JumpModel, n: u64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; m.d];
    let mut scratch = vec![0.0; m.d];
    sample_sum_into(m, n, rng, &mut out, &mut scratch);
    out
}

pub(crate) fn poisson_count(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// `L(s)` for the compound Poisson process with rate `lambda`; returns the jump count.
pub fn sample_compound_poisson_into(
    m: &JumpModel,
    lambda: f64,
    s: f64,
    rng: &mut impl Rng,
    out: &mut [f64],
    scratch: &mut [f64],
) -> u64 {
    let n = poisson_count(lambda * s, rng);
    sample_sum_into(m, n, rng, out, scratch);
    n
}

pub fn sample_compound_poisson(m: &JumpModel, lambda: f64, s: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && s > 0.0 && (lambda * s).is_finite()) {
        return Err(Error::bad_param("lambda, s", "must be positive"));
    }
    let mut out = vec![0.0; m.d];
    let mut scratch = vec![0.0; m.d];
    sample_compound_poisson_into(m, lambda, s, rng, &mut out, &mut scratch);
    Ok(out)
}

/// Laplace transform of the inverse-gamma(beta, 1) law,
/// `psi(s) = 2 s^{beta/2} K_beta(2 sqrt s) / Gamma(beta)`.
#[derive(Clone, Debug)]
pub struct AcigPsi {
    beta: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

const PSI_SERIES_MAX: f64 = 2.0;
const PSI_TERMS: usize = 40;

impl AcigPsi {
    pub fn new(beta: f64) -> Self {
        let g = gamma(1.0 - beta);
        let mut a = vec![0.0; PSI_TERMS];
        let mut b = vec![0.0; PSI_TERMS];
        let mut fact = 1.0;
        for k in 0..PSI_TERMS {
            if k > 0 {
                fact *= k as f64;
            }
            let kf = k as f64;
            if k > 0 {
                a[k] = g / (fact * gamma(kf + 1.0 - beta));
            }
            b[k] = g / (fact * gamma(kf + beta + 1.0));
        }
        AcigPsi { beta, a, b }
    }

    pub fn psi(&self, s: f64) -> f64 {
        1.0 - self.one_minus(s)
    }

    /// `1 - psi(s)`, accurate near `s = 0`.
    pub fn one_minus(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s <= PSI_SERIES_MAX {
            let mut lin = 0.0;
            let mut frac = 0.0;
            let mut pw = 1.0;
            for k in 0..PSI_TERMS {
                frac += self.b[k] * pw;
                pw *= s;
                if k + 1 < PSI_TERMS {
                    lin += self.a[k + 1] * pw;
                }
            }
            -lin + s.powf(self.beta) * frac
        } else {
            1.0 - self.psi_bessel(s)
        }
    }

    fn psi_bessel(&self, s: f64) -> f64 {
        let x = 2.0 * s.sqrt();
        let log_k = bessel_k_scaled(self.beta, x).ln() - x;
        (2f64.ln() + 0.5 * self.beta * s.ln() + log_k - statrs::function::gamma::ln_gamma(self.beta)).exp()
    }
}

/// `e^x K_nu(x)` from `int_0^inf exp(-x(cosh u - 1)) cosh(nu u) du`.
/// The integrand is even and smooth, so the trapezoid rule converges geometrically.
fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let upper = (1.0 + 60.0 / x).acosh();
    let n = 600;
    let h = upper / n as f64;
    let f = |u: f64| (-x * (u.cosh() - 1.0)).exp() * (nu * u).cosh();
    let mut sum = 0.5 * (f(0.0) + f(upper));
    for k in 1..n {
        sum += f(k as f64 * h);
    }
    sum * h
}

// --- JSON ------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum ModelSpec {
    IndependencePareto { d: usize, alpha: f64 },
    MarshallOlkin { d: usize, alpha: f64, rates: BTreeMap<String, f64> },
    Mardia { d: usize, alpha: f64 },
    Acig { d: usize, alpha: f64, beta: f64 },
    CompleteDependence { d: usize, alpha: f64 },
    DiscreteMixture {
        d: usize,
        alpha: f64,
        p: Vec<f64>,
        #[serde(default)]
        noise: Noise,
    },
    TwoShock { d: usize, alpha: f64, p: Vec<f64> },
}

fn parse_subset(key: &str, d: usize) -> Result<u32> {
    let inner = key
        .trim()
        .strip_prefix('[')
        .and_then(|k| k.strip_suffix(']'))
        .ok_or_else(|| Error::BadModel(format!("rate key {key:?} is not of the form [i,j,..]")))?;
    let mut mask = 0u32;
    for part in inner.split(',') {
        let j: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::BadModel(format!("bad index in rate key {key:?}")))?;
        if j == 0 || j > d {
            return Err(Error::BadModel(format!("index {j} in rate key {key:?} outside 1..={d}")));
        }
        if mask & (1 << (j - 1)) != 0 {
            return Err(Error::BadModel(format!("repeated index in rate key {key:?}")));
        }
        mask |= 1 << (j - 1);
    }
    Ok(mask)
}

fn subset_key(mask: u32, d: usize) -> String {
    let parts: Vec<String> = mask_indices(mask, d).iter().map(|j| (j + 1).to_string()).collect();
    format!("[{}]", parts.join(","))
}

impl TryFrom<ModelSpec> for JumpModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::IndependencePareto { d, alpha } => JumpModel::new(d, alpha, JumpFamily::IndependencePareto),
            ModelSpec::MarshallOlkin { d, alpha, rates } => {
                if d == 0 || d > MAX_DIM {
                    return Err(Error::BadModel(format!("dimension {d} outside 1..={MAX_DIM}")));
                }
                let mut parsed = Vec::with_capacity(rates.len());
                for (k, r) in &rates {
                    parsed.push((parse_subset(k, d)?, *r));
                }
                parsed.sort_by_key(|&(m, _)| m);
                if parsed.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(Error::BadModel("duplicate shock subset".into()));
                }
                JumpModel::new(d, alpha, JumpFamily::MarshallOlkin { rates: parsed })
            }
            ModelSpec::Mardia { d, alpha } => JumpModel::new(d, alpha, JumpFamily::Mardia),
            ModelSpec::Acig { d, alpha, beta } => JumpModel::new(d, alpha, JumpFamily::Acig { beta }),
            ModelSpec::CompleteDependence { d, alpha } => JumpModel::new(d, alpha, JumpFamily::CompleteDependence),
            ModelSpec::DiscreteMixture { d, alpha, p, noise } => {
                JumpModel::new(d, alpha, JumpFamily::DiscreteMixture { p, noise })
            }
            ModelSpec::TwoShock { d, alpha, p } => JumpModel::new(d, alpha, JumpFamily::TwoShock { p }),
        }
    }
}

impl From<&JumpModel> for ModelSpec {
    fn from(m: &JumpModel) -> Self {
        let (d, alpha) = (m.d, m.alpha);
        match &m.family {
            JumpFamily::IndependencePareto => ModelSpec::IndependencePareto { d, alpha },
            JumpFamily::MarshallOlkin { rates } => ModelSpec::MarshallOlkin {
                d,
                alpha,
                rates: rates.iter().map(|&(mask, r)| (subset_key(mask, d), r)).collect(),
            },
            JumpFamily::Mardia => ModelSpec::Mardia { d, alpha },
            JumpFamily::Acig { beta } => ModelSpec::Acig { d, alpha, beta: *beta },
            JumpFamily::CompleteDependence => ModelSpec::CompleteDependence { d, alpha },
            JumpFamily::DiscreteMixture { p, noise } => ModelSpec::DiscreteMixture { d, alpha, p: p.clone(), noise: *noise },
            JumpFamily::TwoShock { p } => ModelSpec::TwoShock { d, alpha, p: p.clone() },
        }
    }
}

impl Serialize for JumpModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for JumpModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ModelSpec::deserialize(d)?;
        JumpModel::try_from(spec).map_err(serde::de::Error::custom)
    }
}

/// Equal-rate shocks on every nonempty subset.
pub fn mo_equal_model(d: usize, alpha: f64, rate: f64) -> Result<JumpModel> {
    let rates = (1..(1u32 << d)).map(|m| (m, rate)).collect();
    JumpModel::new(d, alpha, JumpFamily::MarshallOlkin { rates })
}

/// Shock rates proportional to the subset size.
pub fn mo_proportional_model(d: usize, alpha: f64, rate: f64) -> Result<JumpModel> {
    let rates = (1..(1u32 << d)).map(|m| (m, rate * m.count_ones() as f64)).collect();
    JumpModel::new(d, alpha, JumpFamily::MarshallOlkin { rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{ks_critical, ks_statistic};

    fn pareto_cdf(alpha: f64) -> impl Fn(f64) -> f64 {
        move |x| if x <= 1.0 { 0.0 } else { 1.0 - x.powf(-alpha) }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn quantile() {
        assert!((pareto_quantile(0.01, 2.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(pareto_quantile(1.0 - 1e-12, 1.0).unwrap() < 1.0 + 1e-11);
        assert!(matches!(pareto_quantile(0.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(pareto_quantile(1.0, 1.0), Err(Error::DomainError(_))));
        for u in [0.1, 0.5, 0.93] {
            let x = pareto_quantile(u, 1.7).unwrap();
            assert!((x.powf(-1.7) - u).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_series_and_bessel_agree() {
        for beta in [1.2, 1.5, 1.8] {
            let p = AcigPsi::new(beta);
            for s in [1.0, 1.5, 2.0, 2.5] {
                let series = {
                    // force the series branch
                    let q = AcigPsi { beta, a: p.a.clone(), b: p.b.clone() };
                    let mut lin = 0.0;
                    let mut frac = 0.0;
                    let mut pw = 1.0;
                    for k in 0..PSI_TERMS {
                        frac += q.b[k] * pw;
                        pw *= s;
                        if k + 1 < PSI_TERMS {
                            lin += q.a[k + 1] * pw;
                        }
                    }
                    -lin + s.powf(beta) * frac
                };
                let bessel = 1.0 - p.psi_bessel(s);
                assert!((series - bessel).abs() < 1e-10, "beta {beta} s {s}: {series} vs {bessel}");
            }
        }
    }

    #[test]
    fn psi_matches_laplace_quadrature() {
        let beta = 1.5;
        let p = AcigPsi::new(beta);
        let gb = gamma(beta);
        for s in [0.01, 0.3, 1.0, 4.0, 30.0] {
            // v = w/(1-w) maps (0,1) onto (0, inf)
            let f = |w: f64| {
                if w <= 0.0 || w >= 1.0 {
                    return 0.0;
                }
                let v = w / (1.0 - w);
                let dens = v.powf(-beta - 1.0) * (-1.0 / v).exp() / gb;
                (-s * v).exp() * dens / ((1.0 - w) * (1.0 - w))
            };
            let q = quadrature::double_exponential::integrate(f, 0.0, 1.0, 1e-13).integral;
            assert!((p.psi(s) - q).abs() < 1e-9, "s {s}: {} vs {q}", p.psi(s));
        }
        // first-order behaviour 1 - psi(s) ~ s/(beta - 1)
        let s = 1e-8;
        assert!((p.one_minus(s) / s - 1.0 / (beta - 1.0)).abs() < 1e-3);
    }

    #[test]
    fn complete_dependence_equal_coordinates() {
        let m = JumpModel::new(3, 1.5, JumpFamily::CompleteDependence).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            let z = sample_vector(&m, &mut rng);
            assert!(z.iter().all(|&x| x == z[0] && x >= 1.0));
        }
    }

    #[test]
    fn discrete_mixture_without_noise_has_one_nonzero() {
        let m = JumpModel::new(3, 1.0, JumpFamily::DiscreteMixture { p: vec![0.2, 0.3, 0.5], noise: Noise::None }).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..1000 {
            let z = sample_vector(&m, &mut rng);
            assert_eq!(z.iter().filter(|&&x| x != 0.0).count(), 1);
        }
    }

    #[test]
    fn sum_of_zero_is_zero() {
        let m = JumpModel::new(2, 1.0, JumpFamily::Mardia).unwrap();
        let mut rng = RngStream::new(3, 0);
        assert_eq!(sample_sum(&m, 0, &mut rng), vec![0.0, 0.0]);
    }

    #[test]
    fn sum_mean_is_linear() {
        let alpha = 3.0;
        let m = JumpModel::new(2, alpha, JumpFamily::IndependencePareto).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_sum(&m, 3, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want = 3.0 * alpha / (alpha - 1.0);
        assert!((mean - want).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn marginals_are_pareto_ks() {
        let alpha = 1.3;
        let models = vec![
            JumpModel::new(2, alpha, JumpFamily::IndependencePareto).unwrap(),
            mo_equal_model(3, alpha, 1.0).unwrap(),
            JumpModel::new(2, alpha, JumpFamily::Acig { beta: 1.5 }).unwrap(),
            JumpModel::new(2, alpha, JumpFamily::CompleteDependence).unwrap(),
        ];
        let n = 50_000;
        for (k, m) in models.iter().enumerate() {
            let mut rng = RngStream::new(10 + k as u64, 0);
            let mut xs: Vec<f64> = (0..n).map(|_| sample_vector(m, &mut rng)[m.d() - 1]).collect();
            let stat = ks_statistic(&mut xs, pareto_cdf(alpha));
            assert!(stat < ks_critical(n, 0.01), "model {k}: D = {stat}");
        }
    }

    #[test]
    fn mardia_survival() {
        // P(Z > x) = (1 + sum x_j^alpha)^{-1}
        let m = JumpModel::new(2, 2.0, JumpFamily::Mardia).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let z = sample_vector(&m, &mut rng);
                z[0] > 1.0 && z[1] > 1.0
            })
            .count();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 3.0 * se, "{p}");
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"family":"marshall_olkin","d":2,"alpha":1.0,"rates":{"[1]":1.0,"[2]":1.0,"[1,2]":1.0}}"#;
        let m = JumpModel::from_json(text).unwrap();
        assert_eq!(m.mo_totals(), &[2.0, 2.0]);
        let back = JumpModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.spectrum().unwrap(), families::mo_equal(2, 1.0).unwrap());

        let dm = JumpModel::from_json(r#"{"family":"discrete_mixture","d":2,"alpha":2.0,"p":[0.5,0.5]}"#).unwrap();
        assert!(matches!(dm.family(), JumpFamily::DiscreteMixture { noise: Noise::Uniform, .. }));
        assert_eq!(JumpModel::from_json(&dm.to_json()).unwrap(), dm);

        for bad in [
            r#"{"family":"mardia","d":2,"alpha":-1.0}"#,
            r#"{"family":"marshall_olkin","d":2,"alpha":1.0,"rates":{"[3]":1.0}}"#,
            r#"{"family":"marshall_olkin","d":2,"alpha":1.0,"rates":{"[1]":1.0}}"#,
            r#"{"family":"acig","d":2,"alpha":1.0,"beta":2.5}"#,
            r#"{"family":"two_shock","d":2,"alpha":1.0,"p":[0.3,0.3]}"#,
        ] {
            assert!(JumpModel::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn auto_spectrum() {
        assert_eq!(mo_proportional_model(3, 1.0, 0.5).unwrap().spectrum().unwrap(), families::mo_proportional(3, 1.0).unwrap());
        let odd = JumpModel::new(2, 1.0, JumpFamily::MarshallOlkin { rates: vec![(1, 1.0), (2, 2.0), (3, 1.0)] }).unwrap();
        assert!(matches!(odd.spectrum(), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn compound_poisson_counts() {
        let m = JumpModel::new(1, 1.0, JumpFamily::IndependencePareto).unwrap();
        let mut rng = RngStream::new(6, 0);
        let mut out = [0.0];
        let mut scratch = [0.0];
        let n = 20_000;
        let mut total = 0u64;
        for _ in 0..n {
            total += sample_compound_poisson_into(&m, 1.5, 2.0, &mut rng, &mut out, &mut scratch);
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 3.0).abs() < 3.0 * (3.0 / n as f64).sqrt());
        assert!(sample_compound_poisson(&m, 0.0, 1.0, &mut rng).is_err());
    }
}
