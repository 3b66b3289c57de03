//! Randomly stopped sums `Z^(1) + ... + Z^(tau)` with `tau` independent of the jumps.

use serde::{Deserialize, Serialize};

use crate::convolution::{falling_factorial, self_convolve, FactorRule};
use crate::error::{Error, Result};
use crate::regvar::{LimitClass, PowerFn};
use crate::spectrum::{probe_sets, MRVSpectrum, SpectrumEntry};
use crate::TailMeasure;

/// Law of the number of summands. Every supported law has `E kappa^tau < inf` for all `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountDistribution {
    Fixed { n: u64 },
    Poisson { lambda: f64 },
    Binomial { n: u64, p: f64 },
    /// Parsed so it can be rejected with a precise reason.
    Geometric { p: f64 },
}

impl CountDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CountDistribution::Fixed { n } if n == 0 => Err(Error::bad_param("n", "must be at least 1")),
            CountDistribution::Poisson { lambda } if !(lambda.is_finite() && lambda > 0.0) => {
                Err(Error::bad_param("lambda", format!("must be positive, got {lambda}")))
            }
            CountDistribution::Binomial { n, p } => {
                if n == 0 {
                    Err(Error::bad_param("n", "must be at least 1"))
                } else if !(p > 0.0 && p <= 1.0) {
                    Err(Error::bad_param("p", format!("must lie in (0,1], got {p}")))
                } else {
                    Ok(())
                }
            }
            CountDistribution::Geometric { .. } => Err(Error::UnsupportedCount(
                "geometric counts have E(kappa^tau) = inf for large kappa".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Largest possible value, if bounded.
    pub fn max_count(&self) -> Option<u64> {
        match *self {
            CountDistribution::Fixed { n } | CountDistribution::Binomial { n, .. } => Some(n),
            _ => None,
        }
    }

    /// `E[tau (tau-1) ... (tau-j+1)]`.
    pub fn factorial_moment(&self, j: usize) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            CountDistribution::Fixed { n } => falling_factorial(n as f64, j),
            CountDistribution::Poisson { lambda } => lambda.powi(j as i32),
            CountDistribution::Binomial { n, p } => falling_factorial(n as f64, j) * p.powi(j as i32),
            CountDistribution::Geometric { .. } => unreachable!(),
        })
    }
}

/// Stirling numbers of the second kind `S(k, j)` for `j <= k`.
fn stirling2(k: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for n in 1..=k {
        let mut next = vec![0.0; n + 1];
        for j in 1..=n {
            let keep = if j < row.len() { j as f64 * row[j] } else { 0.0 };
            next[j] = keep + row[j - 1];
        }
        row = next;
    }
    row
}

/// `E[tau^k]` via `sum_j S(k,j) E[(tau)_j]`.
pub fn raw_moment(c: &CountDistribution, k: usize) -> Result<f64> {
    if let CountDistribution::Fixed { n } = *c {
        c.validate()?;
        return Ok((n as f64).powi(k as i32));
    }
    stirling2(k)
        .iter()
        .enumerate()
        .map(|(j, s)| Ok(s * c.factorial_moment(j)?))
        .sum()
}

/// `E[f_i(tau)]` from the coefficients of `f_i`.
pub fn expected_factor(c: &CountDistribution, f: &FactorRule, i: usize) -> Result<f64> {
    c.validate()?;
    if let CountDistribution::Fixed { n } = *c {
        return crate::convolution::closed_form_factor(f, n as usize, i);
    }
    if let FactorRule::Delta1 = f {
        // exact: E[(tau)_i]
        return c.factorial_moment(i);
    }
    let poly = f.polynomial(i)?;
    let value: f64 = poly
        .iter()
        .enumerate()
        .map(|(k, a)| Ok(if *a == 0.0 { 0.0 } else { a * raw_moment(c, k)? }))
        .sum::<Result<f64>>()?;
    if value < 0.0 {
        return Err(Error::UnsupportedRule(format!("f_{i} has negative expectation {value}")));
    }
    Ok(value)
}

/// `(alpha_i, b_i^{<-}, mu_i)` that `f_i(n)` multiplies under the rule.
fn base_level(spec: &MRVSpectrum, f: &FactorRule, i: usize) -> Result<(f64, PowerFn, TailMeasure)> {
    match f {
        FactorRule::Delta1 | FactorRule::TwoShock => {
            let mu1 = spec.entry(1).measure().unwrap();
            Ok((i as f64 * spec.alpha1(), spec.b_inverse(1).pow(i as f64), mu1.marginal_product(i)?))
        }
        _ => match spec.entry(i) {
            SpectrumEntry::Rv { alpha, mu, .. } => Ok((*alpha, spec.b_inverse(i), mu.clone())),
            SpectrumEntry::NullConv { .. } => Err(Error::AssumptionAViolated(format!(
                "rule {f:?} needs regular variation on every cone, level {i} is null"
            ))),
        },
    }
}

const CHECK_TOL: f64 = 1e-8;

/// Compares the `n`-fold spectrum with `f_i(n) mu_i` on probe rectangles.
fn check_assumption_a(spec: &MRVSpectrum, f: &FactorRule, n: usize) -> Result<()> {
    let sc = self_convolve(spec, n)?;
    for i in 1..=spec.d() {
        let fi = f.eval(n as f64, i)?;
        let (_, base_b, base_mu) = base_level(spec, f, i)?;
        match sc.entry(i) {
            SpectrumEntry::NullConv { .. } => {
                if fi != 0.0 {
                    return Err(Error::AssumptionAViolated(format!(
                        "level {i}: {n}-fold sum is null but f_{i}({n}) = {fi}"
                    )));
                }
            }
            SpectrumEntry::Rv { mu, .. } => {
                let r = match base_b.ratio_limit(&sc.b_inverse(i)) {
                    LimitClass::Finite(r) => r,
                    other => {
                        return Err(Error::AssumptionAViolated(format!(
                            "level {i}: scaling of the {n}-fold sum differs from the rule's ({other:?})"
                        )))
                    }
                };
                for pairs in probe_sets(spec.d(), i) {
                    let got = mu.eval_pairs(&pairs);
                    let want = fi * base_mu.eval_pairs(&pairs) / r;
                    if (got - want).abs() > CHECK_TOL * got.abs().max(want.abs()).max(1e-300) {
                        return Err(Error::AssumptionAViolated(format!(
                            "level {i}: {n}-fold measure {got} but f_{i}({n}) mu_{i} = {want}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Spectrum of the randomly stopped sum: `mu_i` scaled by `E f_i(tau)`.
pub fn random_sum_spectrum(spec: &MRVSpectrum, f: &FactorRule, c: &CountDistribution) -> Result<MRVSpectrum> {
    c.validate()?;
    let d = spec.d();
    if let FactorRule::NearlyIndependent | FactorRule::Superadditive | FactorRule::ExplicitPoly { .. } = f {
        if spec.delta() != d {
            return Err(Error::AssumptionAViolated(format!(
                "rule {f:?} needs Delta = d, spectrum has Delta = {}",
                spec.delta()
            )));
        }
    }
    check_assumption_a(spec, f, d.max(2))?;

    let bounded = match c.max_count() {
        Some(n) => Some(self_convolve(spec, n as usize)?),
        None => None,
    };
    let mut entries = Vec::with_capacity(d);
    for i in 1..=d {
        let ef = expected_factor(c, f, i)?;
        if ef > 0.0 {
            let (alpha, b_inv, mu) = base_level(spec, f, i)?;
            entries.push(SpectrumEntry::rv(alpha, b_inv.invert()?, mu.scale(ef)?));
            continue;
        }
        match bounded.as_ref().map(|s| s.entry(i)) {
            Some(SpectrumEntry::NullConv { gamma }) => entries.push(SpectrumEntry::NullConv { gamma: *gamma }),
            _ => {
                return Err(Error::AssumptionAViolated(format!(
                    "E f_{i}(tau) = 0 but the sum is not null on level {i}"
                )))
            }
        }
    }
    MRVSpectrum::new(d, entries)
}
