//! Spectrum of a sum of independent adapted-MRV vectors.
//!
//! For each cone level `i` the candidate splits `j = 0..=i` are ranked by
//! `P_j = b_j^{(1)<-} b_{i-j}^{(2)<-}`: the slowest-growing products dominate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::TailMeasure;
use crate::regvar::{LimitClass, PowerFn};
use crate::spectrum::{MRVSpectrum, SpectrumEntry};

/// How `I(i)` is picked when several splits attain the maximal `c-bar`.
///
/// The weights `c_m` do not depend on the choice; only the reported index does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    Largest,
    /// The choice made throughout the induction for `Delta = 1` aggregation.
    Smallest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionWeights {
    pub i: usize,
    /// `I(i)`.
    pub argmax: usize,
    /// `c_0 ..= c_i`, all finite.
    pub c: Vec<f64>,
    /// Splits with finite `c-bar`.
    pub candidates: Vec<usize>,
}

impl ConvolutionWeights {
    /// Indices `m` with `c_m > 0`.
    pub fn support(&self) -> Vec<usize> {
        (0..=self.i).filter(|&m| self.c[m] > 0.0).collect()
    }
}

fn products(s1: &MRVSpectrum, s2: &MRVSpectrum, i: usize) -> Vec<PowerFn> {
    (0..=i).map(|j| s1.b_inverse(j).multiply(&s2.b_inverse(i - j))).collect()
}

pub fn compute_weights(s1: &MRVSpectrum, s2: &MRVSpectrum, i: usize) -> Result<ConvolutionWeights> {
    compute_weights_with(s1, s2, i, TieRule::Largest)
}

pub fn compute_weights_with(s1: &MRVSpectrum, s2: &MRVSpectrum, i: usize, tie: TieRule) -> Result<ConvolutionWeights> {
    if s1.d() != s2.d() {
        return Err(Error::DimensionMismatch { expected: s1.d(), got: s2.d() });
    }
    if i == 0 || i > s1.d() {
        return Err(Error::bad_param("i", format!("cone level must lie in 1..={}, got {i}", s1.d())));
    }
    let p = products(s1, s2, i);

    // c-bar_j = max_m lim P_j / P_m; None when infinite
    let cbar: Vec<Option<f64>> = p
        .iter()
        .map(|pj| {
            p.iter().try_fold(0.0f64, |acc, pm| match pj.ratio_limit(pm) {
                LimitClass::Infinite => None,
                LimitClass::Zero => Some(acc),
                LimitClass::Finite(v) => Some(acc.max(v)),
            })
        })
        .collect();
    let candidates: Vec<usize> = (0..=i).filter(|&j| cbar[j].is_some()).collect();
    let best = candidates.iter().map(|&j| cbar[j].unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let is_max = |j: &usize| {
        let v = cbar[*j].unwrap();
        (v - best).abs() <= 1e-12 * best
    };
    let argmax = match tie {
        TieRule::Largest => candidates.iter().copied().filter(is_max).max(),
        TieRule::Smallest => candidates.iter().copied().filter(is_max).min(),
    }
    .expect("the minimal-exponent split always has finite c-bar");

    let c: Vec<f64> = p
        .iter()
        .map(|pm| p[argmax].ratio_limit(pm).finite_value().expect("argmax dominates every split"))
        .collect();

    // Hypothesis: c_m = 0 or b_m^{<-}/b_{m+1}^{<-} -> 0 in both summands.
    for m in 1..i {
        if c[m] == 0.0 {
            continue;
        }
        for s in [s1, s2] {
            if s.b_inverse(m).ratio_limit(&s.b_inverse(m + 1)) != LimitClass::Zero {
                return Err(Error::HypothesisViolated { level: i, m });
            }
        }
    }
    Ok(ConvolutionWeights { i, argmax, c, candidates })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionReport {
    pub spectrum: MRVSpectrum,
    pub weights: Vec<ConvolutionWeights>,
    /// `(max(Delta_1+1, Delta_2+1), min(Delta_1+Delta_2, d))` before clamping.
    pub raw_band: (usize, usize),
    /// The band with its lower end clamped to `d`.
    pub band: (usize, usize),
    pub within_band: bool,
}

/// Null-convergence parameter for a level-`i` rate exponent, kept inside
/// `(0, alpha_1/d)`. Shrinking `gamma` only weakens the bound.
fn null_conv_gamma(exponent: f64, i: usize, alpha1: f64, d: usize) -> Result<f64> {
    let gamma = exponent / i as f64 - alpha1;
    if !(gamma > 0.0) {
        return Err(Error::SpectrumInvalid(format!(
            "null-convergence rate t^-{exponent} at level {i} is not faster than t^-{}",
            i as f64 * alpha1
        )));
    }
    let cap = alpha1 / d as f64;
    Ok(if gamma < cap { gamma } else { cap * (1.0 - 1e-9) })
}

pub fn convolve(s1: &MRVSpectrum, s2: &MRVSpectrum) -> Result<ConvolutionReport> {
    let d = s1.d();
    if s2.d() != d {
        return Err(Error::DimensionMismatch { expected: d, got: s2.d() });
    }
    let mut entries = Vec::with_capacity(d);
    let mut weights = Vec::with_capacity(d);
    let mut alpha1 = 0.0;
    for i in 1..=d {
        let w = compute_weights(s1, s2, i)?;
        let big_i = w.argmax;
        let p_max = s1.b_inverse(big_i).multiply(&s2.b_inverse(i - big_i));
        let support = w.support();
        let involves_null = support.iter().any(|&m| {
            (m > 0 && !s1.entry(m).is_rv()) || (m < i && !s2.entry(i - m).is_rv())
        });
        let entry = if involves_null {
            SpectrumEntry::NullConv { gamma: null_conv_gamma(p_max.exponent(), i, alpha1, d)? }
        } else {
            let mut terms = Vec::with_capacity(support.len());
            for &m in &support {
                let prod = TailMeasure::product(s1.measure(m).unwrap(), s2.measure(i - m).unwrap(), i)?;
                terms.push(if w.c[m] == 1.0 { prod } else { prod.scale(w.c[m])? });
            }
            let alpha = s1.alpha(big_i) + s2.alpha(i - big_i);
            SpectrumEntry::rv(alpha, p_max.invert()?, TailMeasure::add(terms)?)
        };
        if i == 1 {
            alpha1 = entry.alpha().expect("level 1 is always regularly varying");
        }
        entries.push(entry);
        weights.push(w);
    }
    let spectrum = MRVSpectrum::new(d, entries)?;
    let (d1, d2) = (s1.delta(), s2.delta());
    let raw_band = ((d1 + 1).max(d2 + 1), (d1 + d2).min(d));
    let band = (raw_band.0.min(d), raw_band.1);
    let within_band = band.0 <= spectrum.delta() && spectrum.delta() <= band.1;
    Ok(ConvolutionReport { spectrum, weights, raw_band, band, within_band })
}

/// Spectrum of `Z^(1) + ... + Z^(n)` by repeated pairwise convolution.
pub fn self_convolve_iterated(spec: &MRVSpectrum, n: usize) -> Result<MRVSpectrum> {
    if n == 0 {
        return Err(Error::bad_param("n", "number of summands must be at least 1"));
    }
    let mut acc = spec.clone();
    for _ in 1..n {
        acc = convolve(&acc, spec)?.spectrum;
    }
    Ok(acc)
}

/// Which closed form `self_convolve` used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastPath {
    ProductForm,
    Superadditive,
    Delta1,
    Iterated,
}

pub fn fast_path_for(spec: &MRVSpectrum) -> FastPath {
    if spec.is_product_form() {
        FastPath::ProductForm
    } else if spec.strictly_superadditive() {
        FastPath::Superadditive
    } else if spec.delta() == 1 {
        FastPath::Delta1
    } else {
        FastPath::Iterated
    }
}

/// Spectrum of the `n`-fold i.i.d. sum, using closed forms where they apply.
pub fn self_convolve(spec: &MRVSpectrum, n: usize) -> Result<MRVSpectrum> {
    if n == 0 {
        return Err(Error::bad_param("n", "number of summands must be at least 1"));
    }
    if n == 1 {
        return Ok(spec.clone());
    }
    let nf = n as f64;
    let d = spec.d();
    match fast_path_for(spec) {
        FastPath::ProductForm => {
            let entries = (1..=d)
                .map(|i| match spec.entry(i) {
                    SpectrumEntry::Rv { alpha, b, mu } => {
                        Ok(SpectrumEntry::rv(*alpha, *b, mu.scale(nf.powi(i as i32))?))
                    }
                    SpectrumEntry::NullConv { .. } => unreachable!("product form has Delta = d"),
                })
                .collect::<Result<Vec<_>>>()?;
            MRVSpectrum::new(d, entries)
        }
        FastPath::Superadditive => spec.scale_measures(nf),
        FastPath::Delta1 => {
            let alpha1 = spec.alpha1();
            let b1_inv = spec.b_inverse(1);
            let mu1 = spec.entry(1).measure().unwrap();
            let base_exp: Vec<f64> = (0..=d).map(|k| spec.b_inverse(k).exponent()).collect();
            let mut entries = Vec::with_capacity(d);
            for i in 1..=d {
                let entry = if i == 1 {
                    SpectrumEntry::rv(alpha1, b1_inv.invert()?, mu1.scale(nf)?)
                } else if i <= n {
                    let mu = mu1.marginal_product(i)?.scale(falling_factorial(nf, i))?;
                    SpectrumEntry::rv(i as f64 * alpha1, b1_inv.pow(i as f64).invert()?, mu)
                } else {
                    let exponent = min_composition_exponent(&base_exp, n, i);
                    SpectrumEntry::NullConv { gamma: null_conv_gamma(exponent, i, alpha1, d)? }
                };
                entries.push(entry);
            }
            MRVSpectrum::new(d, entries)
        }
        FastPath::Iterated => self_convolve_iterated(spec, n),
    }
}

/// `min sum_r e[k_r]` over `k_1 + ... + k_n = i` with `0 <= k_r < e.len()`.
fn min_composition_exponent(e: &[f64], n: usize, i: usize) -> f64 {
    let mut dp = vec![f64::INFINITY; i + 1];
    dp[0] = 0.0;
    for _ in 0..n {
        let mut next = vec![f64::INFINITY; i + 1];
        for (s, &v) in dp.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            for (k, &ek) in e.iter().enumerate().take(i - s + 1) {
                next[s + k] = next[s + k].min(v + ek);
            }
        }
        dp = next;
    }
    dp[i]
}

/// `n (n-1) ... (n-i+1)`, zero when an integer `n` is below `i`.
pub fn falling_factorial(n: f64, i: usize) -> f64 {
    (0..i).map(|r| n - r as f64).product()
}

/// The aggregation constant `f_i(n)` of an `n`-fold sum, as a polynomial in `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FactorRule {
    /// `n^i`.
    NearlyIndependent,
    /// `n`.
    Superadditive,
    /// `n!/(n-i)!`.
    Delta1,
    /// `prod_{r<i} (n - r/2)`, listed for `i <= 4`.
    TwoShock,
    /// `levels[i-1]` holds the ascending coefficients of `f_i`.
    ExplicitPoly { levels: Vec<Vec<f64>> },
}

impl FactorRule {
    /// Ascending coefficients of `f_i(n)`.
    pub fn polynomial(&self, i: usize) -> Result<Vec<f64>> {
        if i == 0 {
            return Err(Error::bad_param("i", "cone level must be at least 1"));
        }
        let from_roots = |roots: Vec<f64>| {
            let mut poly = vec![1.0];
            for r in roots {
                let mut next = vec![0.0; poly.len() + 1];
                for (k, &a) in poly.iter().enumerate() {
                    next[k + 1] += a;
                    next[k] -= r * a;
                }
                poly = next;
            }
            poly
        };
        Ok(match self {
            FactorRule::NearlyIndependent => from_roots(vec![0.0; i]),
            FactorRule::Superadditive => vec![0.0, 1.0],
            FactorRule::Delta1 => from_roots((0..i).map(|r| r as f64).collect()),
            FactorRule::TwoShock => {
                if i > 4 {
                    return Err(Error::UnsupportedLevel(i));
                }
                from_roots((0..i).map(|r| r as f64 / 2.0).collect())
            }
            FactorRule::ExplicitPoly { levels } => levels
                .get(i - 1)
                .cloned()
                .ok_or_else(|| Error::UnsupportedRule(format!("explicit polynomial not given for level {i}")))?,
        })
    }

    pub fn eval(&self, n: f64, i: usize) -> Result<f64> {
        let poly = self.polynomial(i)?;
        Ok(poly.iter().rev().fold(0.0, |acc, a| acc * n + a))
    }
}

/// `f_i(n)` for the listed rules.
pub fn closed_form_factor(rule: &FactorRule, n: usize, i: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::bad_param("n", "number of summands must be at least 1"));
    }
    if let FactorRule::Delta1 = rule {
        // exact integer falling factorial, zero for n < i
        return Ok(if n >= i { falling_factorial(n as f64, i) } else { 0.0 });
    }
    rule.eval(n as f64, i)
}
