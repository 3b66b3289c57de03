//! Homogeneous limit measures evaluated on rectangular sets.
//!
//! Every measure lives on a cone `E_d^(level)`. Evaluation on a set whose
//! index set is smaller than the level is a cone mismatch at the public API;
//! inside products it simply contributes zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regvar::{exponents_equal, RectSet};

/// Subset enumeration in products and ACIG is exponential in `d`.
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Level 0 point mass: 1 on the empty index set. Plays the role of `mu_0`.
    Unit,
    Independence { alpha: f64, kappa: Vec<f64> },
    MoEqual { alpha: f64 },
    MoProportional { alpha: f64 },
    Acig { alpha: f64, beta: f64 },
    Mardia { alpha: f64 },
    CompleteDependence { alpha: f64 },
    Clayton { alpha: f64, theta: f64 },
    DiscreteMixtureLevel1 { alpha: f64, p: Vec<f64> },
    Scaled { c: f64, inner: Box<TailMeasure> },
    Sum(Vec<TailMeasure>),
    Product { m: usize, first: Box<TailMeasure>, second: Box<TailMeasure> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailMeasure {
    d: usize,
    level: usize,
    family: Family,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::bad_param("alpha", format!("must be positive, got {alpha}")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::bad_param("d", format!("must lie in 1..={MAX_DIM}, got {d}")));
    }
    Ok(())
}

fn check_level(d: usize, level: usize) -> Result<()> {
    if level == 0 || level > d {
        return Err(Error::bad_param("level", format!("must lie in 1..={d}, got {level}")));
    }
    Ok(())
}

fn check_weights(field: &str, w: &[f64], d: usize) -> Result<()> {
    if w.len() != d {
        return Err(Error::bad_param(field, format!("expected {d} entries, got {}", w.len())));
    }
    if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::bad_param(field, format!("entries must be nonnegative, got {v}")));
    }
    Ok(())
}

/// `(2^{-r})` ladder shared by the Marshall-Olkin families.
fn mo_exponents(alpha: f64, d: usize, level: usize, proportional: bool) -> impl Iterator<Item = f64> {
    (0..level).map(move |r| {
        let damp = if proportional { 1.0 - r as f64 / (d as f64 + 1.0) } else { 1.0 };
        alpha * damp * 0.5f64.powi(r as i32)
    })
}

/// Normalizing constant of the ACIG level-2 measure.
///
/// With `V ~ InvGamma(beta, 1)` the Laplace transform satisfies
/// `psi(s) = 1 - s/(beta-1) + c s^beta + o(s^beta)` where
/// `c = -Gamma(1-beta)/Gamma(1+beta)`. Inclusion-exclusion of the Archimedean
/// survival copula leaves `c (sum u_j / E V)^beta` terms.
pub fn acig_constant(beta: f64) -> f64 {
    use statrs::function::gamma::gamma;
    let c = -gamma(1.0 - beta) / gamma(1.0 + beta);
    let mean = 1.0 / (beta - 1.0);
    c / mean.powf(beta)
}

impl TailMeasure {
    pub fn unit(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(TailMeasure { d, level: 0, family: Family::Unit })
    }

    pub fn independence(d: usize, level: usize, alpha: f64, kappa: Option<Vec<f64>>) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        let kappa = kappa.unwrap_or_else(|| vec![1.0; d]);
        check_weights("kappa", &kappa, d)?;
        Ok(TailMeasure { d, level, family: Family::Independence { alpha, kappa } })
    }

    pub fn mo_equal(d: usize, level: usize, alpha: f64) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        Ok(TailMeasure { d, level, family: Family::MoEqual { alpha } })
    }

    pub fn mo_proportional(d: usize, level: usize, alpha: f64) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        Ok(TailMeasure { d, level, family: Family::MoProportional { alpha } })
    }

    pub fn acig(d: usize, level: usize, alpha: f64, beta: f64) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        if !(beta > 1.0 && beta < 2.0) {
            return Err(Error::bad_param("beta", format!("must lie in (1, 2), got {beta}")));
        }
        Ok(TailMeasure { d, level, family: Family::Acig { alpha, beta } })
    }

    pub fn mardia(d: usize, level: usize, alpha: f64) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        Ok(TailMeasure { d, level, family: Family::Mardia { alpha } })
    }

    pub fn complete_dependence(d: usize, level: usize, alpha: f64) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        Ok(TailMeasure { d, level, family: Family::CompleteDependence { alpha } })
    }

    pub fn clayton(d: usize, level: usize, alpha: f64, theta: f64) -> Result<Self> {
        check_dim(d)?;
        check_level(d, level)?;
        check_alpha(alpha)?;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::bad_param("theta", format!("must be positive, got {theta}")));
        }
        Ok(TailMeasure { d, level, family: Family::Clayton { alpha, theta } })
    }

    pub fn discrete_mixture_level1(d: usize, alpha: f64, p: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        check_alpha(alpha)?;
        check_weights("p", &p, d)?;
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::bad_param("p", format!("probabilities must sum to 1, got {total}")));
        }
        Ok(TailMeasure { d, level: 1, family: Family::DiscreteMixtureLevel1 { alpha, p } })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Homogeneity index: `mu(tA) = t^{-index} mu(A)`.
    pub fn index(&self) -> f64 {
        match &self.family {
            Family::Unit => 0.0,
            Family::Independence { alpha, .. } => self.level as f64 * alpha,
            Family::MoEqual { alpha } => mo_exponents(*alpha, self.d, self.level, false).sum(),
            Family::MoProportional { alpha } => mo_exponents(*alpha, self.d, self.level, true).sum(),
            Family::Acig { alpha, beta } => {
                if self.level == 1 {
                    *alpha
                } else {
                    alpha * beta
                }
            }
            Family::Mardia { alpha }
            | Family::CompleteDependence { alpha }
            | Family::Clayton { alpha, .. }
            | Family::DiscreteMixtureLevel1 { alpha, .. } => *alpha,
            Family::Scaled { inner, .. } => inner.index(),
            Family::Sum(terms) => terms[0].index(),
            Family::Product { first, second, .. } => first.index() + second.index(),
        }
    }

    /// `mu(A)` for a rectangle of cone level at least `self.level()`.
    pub fn eval(&self, a: &RectSet) -> Result<f64> {
        if a.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: a.dim() });
        }
        if a.cone_level() < self.level {
            return Err(Error::ConeMismatch { set_level: a.cone_level(), measure_level: self.level });
        }
        Ok(self.eval_pairs(&a.pairs()))
    }

    /// Evaluation on `{z_j > x_j, (j, x_j) in pairs}`; the index set may be
    /// empty or below the level, in which case the value is 0 (or 1 for `Unit`
    /// on the empty set). Indices must be distinct and `< d`.
    pub fn eval_pairs(&self, pairs: &[(usize, f64)]) -> f64 {
        let k = pairs.len();
        if let Family::Unit = self.family {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if k < self.level || k == 0 {
            return 0.0;
        }
        match &self.family {
            Family::Unit => unreachable!(),
            Family::Independence { alpha, kappa } => {
                if k > self.level {
                    return 0.0;
                }
                pairs.iter().map(|&(j, x)| kappa[j] * x.powf(-alpha)).product()
            }
            Family::MoEqual { alpha } | Family::MoProportional { alpha } => {
                if k > self.level {
                    return 0.0;
                }
                let proportional = matches!(self.family, Family::MoProportional { .. });
                let mut xs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                xs.sort_by(|a, b| b.total_cmp(a));
                xs.iter()
                    .zip(mo_exponents(*alpha, self.d, self.level, proportional))
                    .map(|(x, e)| x.powf(-e))
                    .product()
            }
            Family::Acig { alpha, beta } => {
                if self.level == 1 {
                    return if k == 1 { pairs[0].1.powf(-alpha) } else { 0.0 };
                }
                acig_rect(pairs, *alpha, *beta)
            }
            Family::Mardia { alpha } => {
                // factor out the largest term for stability
                let xmax = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
                let s: f64 = pairs.iter().map(|p| (p.1 / xmax).powf(*alpha)).sum();
                xmax.powf(-alpha) / s
            }
            Family::CompleteDependence { alpha } => {
                let xmax = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
                xmax.powf(-alpha)
            }
            Family::Clayton { alpha, theta } => {
                let xmax = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
                let s: f64 = pairs.iter().map(|p| (p.1 / xmax).powf(alpha * theta)).sum();
                xmax.powf(-alpha) * s.powf(-1.0 / theta)
            }
            Family::DiscreteMixtureLevel1 { alpha, p } => {
                if k == 1 {
                    p[pairs[0].0] * pairs[0].1.powf(-alpha)
                } else {
                    0.0
                }
            }
            Family::Scaled { c, inner } => {
                if *c == 0.0 {
                    0.0
                } else {
                    c * inner.eval_pairs(pairs)
                }
            }
            Family::Sum(terms) => terms.iter().map(|m| m.eval_pairs(pairs)).sum(),
            Family::Product { first, second, .. } => {
                let mut total = 0.0;
                let mut left = Vec::with_capacity(k);
                let mut right = Vec::with_capacity(k);
                for mask in 0u32..(1u32 << k) {
                    let size = mask.count_ones() as usize;
                    if size < first.level || k - size < second.level {
                        continue;
                    }
                    left.clear();
                    right.clear();
                    for (b, p) in pairs.iter().enumerate() {
                        if mask & (1 << b) != 0 {
                            left.push(*p);
                        } else {
                            right.push(*p);
                        }
                    }
                    let v = first.eval_pairs(&left);
                    if v != 0.0 {
                        total += v * second.eval_pairs(&right);
                    }
                }
                total
            }
        }
    }

    /// `mu({z_j > 1})`, the level-1 marginal constant of coordinate `j`.
    pub fn marginal(&self, j: usize) -> f64 {
        self.eval_pairs(&[(j, 1.0)])
    }

    /// `mu({z : z_j > x_j for some j in S})` by inclusion-exclusion over
    /// intersections. Only meaningful for level-1 measures.
    pub fn eval_union(&self, a: &RectSet) -> Result<f64> {
        if a.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: a.dim() });
        }
        if self.level != 1 {
            return Err(Error::ConeMismatch { set_level: 1, measure_level: self.level });
        }
        let pairs = a.pairs();
        let k = pairs.len();
        let mut total = 0.0;
        let mut sub = Vec::with_capacity(k);
        for mask in 1u32..(1u32 << k) {
            sub.clear();
            sub.extend((0..k).filter(|b| mask & (1 << b) != 0).map(|b| pairs[b]));
            let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * self.eval_pairs(&sub);
        }
        Ok(total)
    }

    /// `c * mu`.
    pub fn scale(&self, c: f64) -> Result<TailMeasure> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::bad_param("c", format!("scale must be nonnegative, got {c}")));
        }
        let family = match &self.family {
            Family::Scaled { c: c0, inner } => Family::Scaled { c: c * c0, inner: inner.clone() },
            _ => Family::Scaled { c, inner: Box::new(self.clone()) },
        };
        Ok(TailMeasure { d: self.d, level: self.level, family })
    }

    /// Sum of measures sharing dimension and homogeneity index.
    pub fn add(terms: Vec<TailMeasure>) -> Result<TailMeasure> {
        let first = terms
            .first()
            .ok_or_else(|| Error::bad_param("terms", "sum of no measures"))?;
        let (d, idx) = (first.d, first.index());
        for m in &terms[1..] {
            if m.d != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.d });
            }
            if !exponents_equal(m.index(), idx) {
                return Err(Error::IndexMismatch(idx, m.index()));
            }
        }
        if terms.len() == 1 {
            return Ok(terms.into_iter().next().unwrap());
        }
        let level = terms.iter().map(|m| m.level).min().unwrap();
        Ok(TailMeasure { d, level, family: Family::Sum(terms) })
    }

    /// `mu*_{m,i}`: the level-`i` measure summing `mu1(J) mu2(S \ J)` over
    /// splits of the index set, with `mu1` on level `m` and `mu2` on `i - m`.
    pub fn product(first: TailMeasure, second: TailMeasure, i: usize) -> Result<TailMeasure> {
        let m = first.level;
        if m > i {
            return Err(Error::LevelError { m, i });
        }
        if second.level != i - m {
            return Err(Error::bad_param(
                "second",
                format!("expected a level-{} measure, got level {}", i - m, second.level),
            ));
        }
        if first.d != second.d {
            return Err(Error::DimensionMismatch { expected: first.d, got: second.d });
        }
        Ok(TailMeasure {
            d: first.d,
            level: i,
            family: Family::Product { m, first: Box::new(first), second: Box::new(second) },
        })
    }

    /// `k`-fold product of a level-1 measure with itself; equals
    /// `k! prod_j mu({z_j > x_j})` on level-`k` rectangles.
    pub fn chain(mu1: &TailMeasure, k: usize) -> Result<TailMeasure> {
        if mu1.level != 1 {
            return Err(Error::bad_param("mu1", "chain needs a level-1 measure"));
        }
        if k == 0 || k > mu1.d {
            return Err(Error::bad_param("k", format!("must lie in 1..={}, got {k}", mu1.d)));
        }
        let mut acc = mu1.clone();
        for lvl in 2..=k {
            acc = TailMeasure::product(acc, mu1.clone(), lvl)?;
        }
        Ok(acc)
    }

    /// Independence measure on level `i` whose weights are the level-1
    /// marginals of `self`: `prod_{j in S} mu({z_j > x_j})`.
    pub fn marginal_product(&self, i: usize) -> Result<TailMeasure> {
        if self.level != 1 {
            return Err(Error::bad_param("mu1", "marginal product needs a level-1 measure"));
        }
        let kappa = (0..self.d).map(|j| self.marginal(j)).collect();
        TailMeasure::independence(self.d, i, self.index(), Some(kappa))
    }
}

fn acig_rect(pairs: &[(usize, f64)], alpha: f64, beta: f64) -> f64 {
    let k = pairs.len();
    let u: Vec<f64> = pairs.iter().map(|p| p.1.powf(-alpha)).collect();
    let umax = u.iter().copied().fold(0.0, f64::max);
    let mut total = 0.0;
    for mask in 1u32..(1u32 << k) {
        let s: f64 = (0..k).filter(|b| mask & (1 << b) != 0).map(|b| u[b] / umax).sum();
        let sign = if mask.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        total += sign * s.powf(beta);
    }
    (acig_constant(beta) * umax.powf(beta) * total).max(0.0)
}

/// JSON form of a measure, tagged by `family`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Unit {
        d: usize,
    },
    Independence {
        d: usize,
        alpha: f64,
        level: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<Vec<f64>>,
    },
    MoEqual {
        d: usize,
        alpha: f64,
        level: usize,
    },
    MoProportional {
        d: usize,
        alpha: f64,
        level: usize,
    },
    Acig {
        d: usize,
        alpha: f64,
        beta: f64,
        level: usize,
    },
    MardiaDependent {
        d: usize,
        alpha: f64,
        #[serde(default = "one")]
        level: usize,
    },
    CompleteDependence {
        d: usize,
        alpha: f64,
        #[serde(default = "one")]
        level: usize,
    },
    ClaytonLevy {
        d: usize,
        alpha: f64,
        theta: f64,
        #[serde(default = "one")]
        level: usize,
    },
    DiscreteMixtureLevel1 {
        d: usize,
        alpha: f64,
        p: Vec<f64>,
    },
    Scaled {
        c: f64,
        measure: Box<MeasureSpec>,
    },
    Sum {
        terms: Vec<MeasureSpec>,
    },
    Product {
        i: usize,
        first: Box<MeasureSpec>,
        second: Box<MeasureSpec>,
    },
}

fn one() -> usize {
    1
}

impl TryFrom<MeasureSpec> for TailMeasure {
    type Error = Error;

    fn try_from(spec: MeasureSpec) -> Result<Self> {
        match spec {
            MeasureSpec::Unit { d } => TailMeasure::unit(d),
            MeasureSpec::Independence { d, alpha, level, kappa } => TailMeasure::independence(d, level, alpha, kappa),
            MeasureSpec::MoEqual { d, alpha, level } => TailMeasure::mo_equal(d, level, alpha),
            MeasureSpec::MoProportional { d, alpha, level } => TailMeasure::mo_proportional(d, level, alpha),
            MeasureSpec::Acig { d, alpha, beta, level } => TailMeasure::acig(d, level, alpha, beta),
            MeasureSpec::MardiaDependent { d, alpha, level } => TailMeasure::mardia(d, level, alpha),
            MeasureSpec::CompleteDependence { d, alpha, level } => TailMeasure::complete_dependence(d, level, alpha),
            MeasureSpec::ClaytonLevy { d, alpha, theta, level } => TailMeasure::clayton(d, level, alpha, theta),
            MeasureSpec::DiscreteMixtureLevel1 { d, alpha, p } => TailMeasure::discrete_mixture_level1(d, alpha, p),
            MeasureSpec::Scaled { c, measure } => TailMeasure::try_from(*measure)?.scale(c),
            MeasureSpec::Sum { terms } => {
                TailMeasure::add(terms.into_iter().map(TailMeasure::try_from).collect::<Result<_>>()?)
            }
            MeasureSpec::Product { i, first, second } => {
                TailMeasure::product(TailMeasure::try_from(*first)?, TailMeasure::try_from(*second)?, i)
            }
        }
    }
}

impl From<&TailMeasure> for MeasureSpec {
    fn from(m: &TailMeasure) -> Self {
        let (d, level) = (m.d, m.level);
        match &m.family {
            Family::Unit => MeasureSpec::Unit { d },
            Family::Independence { alpha, kappa } => MeasureSpec::Independence {
                d,
                alpha: *alpha,
                level,
                kappa: Some(kappa.clone()),
            },
            Family::MoEqual { alpha } => MeasureSpec::MoEqual { d, alpha: *alpha, level },
            Family::MoProportional { alpha } => MeasureSpec::MoProportional { d, alpha: *alpha, level },
            Family::Acig { alpha, beta } => MeasureSpec::Acig { d, alpha: *alpha, beta: *beta, level },
            Family::Mardia { alpha } => MeasureSpec::MardiaDependent { d, alpha: *alpha, level },
            Family::CompleteDependence { alpha } => MeasureSpec::CompleteDependence { d, alpha: *alpha, level },
            Family::Clayton { alpha, theta } => MeasureSpec::ClaytonLevy { d, alpha: *alpha, theta: *theta, level },
            Family::DiscreteMixtureLevel1 { alpha, p } => MeasureSpec::DiscreteMixtureLevel1 { d, alpha: *alpha, p: p.clone() },
            Family::Scaled { c, inner } => MeasureSpec::Scaled { c: *c, measure: Box::new(inner.as_ref().into()) },
            Family::Sum(terms) => MeasureSpec::Sum { terms: terms.iter().map(Into::into).collect() },
            Family::Product { first, second, .. } => MeasureSpec::Product {
                i: level,
                first: Box::new(first.as_ref().into()),
                second: Box::new(second.as_ref().into()),
            },
        }
    }
}

impl Serialize for TailMeasure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureSpec::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TailMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = MeasureSpec::deserialize(deserializer)?;
        TailMeasure::try_from(spec).map_err(serde::de::Error::custom)
    }
}
