//! Power-law scaling functions and rectangular tail sets.
//!
//! Scaling functions `b(t)` and their inverses are pure power laws
//! `coeff * t^exponent`. Asymptotic ratios of such functions are decided
//! symbolically by comparing exponents, and ties by comparing coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents closer than this (relative to `max(1, |e|)`) are treated as equal.
pub const EXPONENT_TOL: f64 = 1e-12;

pub(crate) fn exponents_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXPONENT_TOL * a.abs().max(b.abs()).max(1.0)
}

/// `t -> coeff * t^exponent` on `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PowerFnRepr", into = "PowerFnRepr")]
pub struct PowerFn {
    coeff: f64,
    exponent: f64,
}

#[derive(Serialize, Deserialize)]
struct PowerFnRepr {
    coeff: f64,
    exp: f64,
}

impl TryFrom<PowerFnRepr> for PowerFn {
    type Error = Error;

    fn try_from(r: PowerFnRepr) -> Result<Self> {
        PowerFn::new(r.coeff, r.exp)
    }
}

impl From<PowerFn> for PowerFnRepr {
    fn from(f: PowerFn) -> Self {
        PowerFnRepr {
            coeff: f.coeff,
            exp: f.exponent,
        }
    }
}

/// Asymptotic class of `lim f(t)/g(t)` as `t -> infinity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitClass {
    Zero,
    Finite(f64),
    Infinite,
}

impl LimitClass {
    /// The class of the reciprocal limit `lim g/f`.
    pub fn reciprocal(self) -> LimitClass {
        match self {
            LimitClass::Zero => LimitClass::Infinite,
            LimitClass::Infinite => LimitClass::Zero,
            LimitClass::Finite(v) => LimitClass::Finite(1.0 / v),
        }
    }

    pub fn finite_value(self) -> Option<f64> {
        match self {
            LimitClass::Zero => Some(0.0),
            LimitClass::Finite(v) => Some(v),
            LimitClass::Infinite => None,
        }
    }
}

impl PowerFn {
    /// The constant function 1, used for `b_0^{<-}`.
    pub const ONE: PowerFn = PowerFn {
        coeff: 1.0,
        exponent: 0.0,
    };

    pub fn new(coeff: f64, exponent: f64) -> Result<Self> {
        if !(coeff.is_finite() && coeff > 0.0) {
            return Err(Error::bad_param("coeff", format!("must be positive and finite, got {coeff}")));
        }
        if !exponent.is_finite() {
            return Err(Error::bad_param("exp", format!("must be finite, got {exponent}")));
        }
        Ok(PowerFn { coeff, exponent })
    }

    /// `t^exponent`.
    pub fn monomial(exponent: f64) -> Result<Self> {
        Self::new(1.0, exponent)
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveArgument(t));
        }
        Ok(self.coeff * t.powf(self.exponent))
    }

    /// Generalized inverse: `g` with `g(f(t)) = t`.
    pub fn invert(&self) -> Result<PowerFn> {
        if self.exponent == 0.0 {
            return Err(Error::ZeroExponent);
        }
        let exponent = 1.0 / self.exponent;
        Ok(PowerFn {
            coeff: self.coeff.powf(-exponent),
            exponent,
        })
    }

    pub fn multiply(&self, other: &PowerFn) -> PowerFn {
        PowerFn {
            coeff: self.coeff * other.coeff,
            exponent: self.exponent + other.exponent,
        }
    }

    pub fn pow(&self, s: f64) -> PowerFn {
        PowerFn {
            coeff: self.coeff.powf(s),
            exponent: self.exponent * s,
        }
    }

    /// `lim_{t->inf} self(t) / other(t)`, decided on exponents first.
    pub fn ratio_limit(&self, other: &PowerFn) -> LimitClass {
        if exponents_equal(self.exponent, other.exponent) {
            LimitClass::Finite(self.coeff / other.coeff)
        } else if self.exponent < other.exponent {
            LimitClass::Zero
        } else {
            LimitClass::Infinite
        }
    }

    /// Same function up to floating tolerance on both parameters.
    pub fn approx_eq(&self, other: &PowerFn, rel: f64) -> bool {
        exponents_equal(self.exponent, other.exponent)
            && (self.coeff - other.coeff).abs() <= rel * self.coeff.max(other.coeff)
    }
}

/// Open rectangle `{z : z_j > x_j for all j in S}` in `R_+^d`.
///
/// Indices are 0-based in the API and 1-based in JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSet {
    dim: usize,
    thresholds: BTreeMap<usize, f64>,
}

impl RectSet {
    pub fn new(dim: usize, thresholds: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::bad_param("d", "dimension must be positive"));
        }
        let mut map = BTreeMap::new();
        for (j, x) in thresholds {
            if j >= dim {
                return Err(Error::bad_param("S", format!("index {} outside 1..={dim}", j + 1)));
            }
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::bad_param("x", format!("threshold for index {} must be positive, got {x}", j + 1)));
            }
            if map.insert(j, x).is_some() {
                return Err(Error::bad_param("S", format!("duplicate index {}", j + 1)));
            }
        }
        if map.is_empty() {
            return Err(Error::bad_param("S", "index set must be nonempty"));
        }
        Ok(RectSet { dim, thresholds: map })
    }

    /// `{z : z_j > x for all j in indices}`.
    pub fn diagonal(dim: usize, indices: &[usize], x: f64) -> Result<Self> {
        Self::new(dim, indices.iter().map(|&j| (j, x)))
    }

    /// `{z : z_j > x for j = 0..level}`, the canonical level-`level` set.
    pub fn leading(dim: usize, level: usize, x: f64) -> Result<Self> {
        Self::new(dim, (0..level).map(|j| (j, x)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.thresholds.keys().copied()
    }

    pub fn threshold(&self, j: usize) -> Option<f64> {
        self.thresholds.get(&j).copied()
    }

    /// `(index, threshold)` pairs in increasing index order.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.thresholds.iter().map(|(&j, &x)| (j, x)).collect()
    }

    pub fn cone_level(&self) -> usize {
        self.thresholds.len()
    }

    pub fn min_threshold(&self) -> f64 {
        self.thresholds.values().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, z: &[f64]) -> Result<bool> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        Ok(self.contains_unchecked(z))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, z: &[f64]) -> bool {
        self.thresholds.iter().all(|(&j, &x)| z[j] > x)
    }

    /// `t * A`.
    pub fn scaled(&self, t: f64) -> Result<RectSet> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::bad_param("t", format!("scale must be positive, got {t}")));
        }
        Ok(RectSet {
            dim: self.dim,
            thresholds: self.thresholds.iter().map(|(&j, &x)| (j, x * t)).collect(),
        })
    }

    pub fn intersect(&self, other: &RectSet) -> Result<RectSet> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut thresholds = self.thresholds.clone();
        for (&j, &y) in &other.thresholds {
            thresholds
                .entry(j)
                .and_modify(|x| *x = x.max(y))
                .or_insert(y);
        }
        Ok(RectSet {
            dim: self.dim,
            thresholds,
        })
    }
}

/// Decreasing order statistics `z_(1) >= ... >= z_(d)`.
pub fn order_statistics(z: &[f64]) -> Vec<f64> {
    let mut v = z.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[derive(Serialize, Deserialize)]
struct RectSetRepr {
    d: usize,
    #[serde(rename = "S")]
    s: Vec<usize>,
    x: BTreeMap<String, f64>,
}

impl Serialize for RectSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RectSetRepr {
            d: self.dim,
            s: self.indices().map(|j| j + 1).collect(),
            x: self
                .thresholds
                .iter()
                .map(|(&j, &x)| ((j + 1).to_string(), x))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RectSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = RectSetRepr::deserialize(deserializer)?;
        let mut pairs = Vec::with_capacity(repr.s.len());
        for j in &repr.s {
            if *j == 0 {
                return Err(D::Error::custom("indices in S are 1-based"));
            }
            let x = repr
                .x
                .get(&j.to_string())
                .ok_or_else(|| D::Error::custom(format!("missing threshold for index {j}")))?;
            pairs.push((j - 1, *x));
        }
        if repr.x.len() != repr.s.len() {
            return Err(D::Error::custom("thresholds given for indices outside S"));
        }
        RectSet::new(repr.d, pairs).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pf(c: f64, e: f64) -> PowerFn {
        PowerFn::new(c, e).unwrap()
    }

    #[test]
    fn invert_square_root_gives_square() {
        let g = pf(1.0, 0.5).invert().unwrap();
        assert!(g.approx_eq(&pf(1.0, 2.0), 1e-15));
    }

    #[test]
    fn invert_scaled_cube_root() {
        let f = pf(2.0, 1.0 / 3.0);
        let g = f.invert().unwrap();
        assert!((g.coeff() - 0.125).abs() < 1e-14);
        assert!((g.exponent() - 3.0).abs() < 1e-14);
        let back = g.eval(f.eval(5.0).unwrap()).unwrap();
        assert!((back - 5.0).abs() < 1e-12);
    }

    #[test]
    fn invert_scaling_of_tail_index_two() {
        let alpha = 2.0;
        let b = pf(1.0, 1.0 / alpha);
        assert!(b.invert().unwrap().approx_eq(&pf(1.0, alpha), 1e-15));
    }

    #[test]
    fn invert_zero_exponent_fails() {
        assert!(matches!(pf(3.0, 0.0).invert(), Err(Error::ZeroExponent)));
    }

    #[test]
    fn eval_rejects_non_positive() {
        assert!(pf(1.0, 1.0).eval(0.0).is_err());
        assert!(pf(1.0, 1.0).eval(-1.0).is_err());
    }

    #[test]
    fn ratio_limit_cases() {
        assert_eq!(pf(1.0, 0.5).ratio_limit(&pf(1.0, 0.5)), LimitClass::Finite(1.0));
        assert_eq!(pf(2.0, 0.3).ratio_limit(&pf(1.0, 0.5)), LimitClass::Zero);
        let alpha = 1.0;
        let f = pf(1.0, 2.0 * alpha);
        let g = pf(1.0, alpha);
        assert_eq!(f.ratio_limit(&g), LimitClass::Infinite);
        assert!(f.eval(1e6).unwrap() / g.eval(1e6).unwrap() > 1e5);
    }

    #[test]
    fn ratio_limit_ties_use_coefficients() {
        // 0.1 + 0.2 != 0.3 in floating point; still a tie
        let f = pf(3.0, 0.1 + 0.2);
        let g = pf(1.5, 0.3);
        assert_eq!(f.ratio_limit(&g), LimitClass::Finite(2.0));
    }

    #[test]
    fn multiply_and_pow() {
        let alpha = 1.7;
        let a = pf(1.0, alpha);
        assert!(a.multiply(&a).approx_eq(&pf(1.0, 2.0 * alpha), 1e-15));
        assert!(pf(2.0, 3.0).multiply(&pf(0.5, -1.0)).approx_eq(&pf(1.0, 2.0), 1e-15));
        // b_i = b_1^{1/i}
        let b1 = pf(1.0, 1.0 / 2.0);
        assert!(b1.pow(0.5).approx_eq(&pf(1.0, 0.25), 1e-15));
    }

    fn rect(d: usize, pairs: &[(usize, f64)]) -> RectSet {
        RectSet::new(d, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn intersect_examples() {
        let a = rect(2, &[(0, 2.0)]);
        let b = rect(2, &[(1, 3.0)]);
        assert_eq!(a.intersect(&b).unwrap(), rect(2, &[(0, 2.0), (1, 3.0)]));

        let a = rect(2, &[(0, 2.0), (1, 1.0)]);
        let b = rect(2, &[(0, 5.0)]);
        assert_eq!(a.intersect(&b).unwrap(), rect(2, &[(0, 5.0), (1, 1.0)]));
        assert_eq!(a.intersect(&a).unwrap(), a);

        let c = rect(3, &[(0, 1.0)]);
        assert!(matches!(a.intersect(&c), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cone_level_contains_order_statistics() {
        assert_eq!(rect(3, &[(0, 1.0), (2, 2.0)]).cone_level(), 2);
        let a = rect(2, &[(0, 2.0), (1, 3.0)]);
        assert!(a.contains(&[2.5, 3.5]).unwrap());
        assert!(!a.contains(&[2.5, 3.0]).unwrap());
        assert!(a.contains(&[2.5]).is_err());
        assert_eq!(order_statistics(&[1.0, 4.0, 2.0]), vec![4.0, 2.0, 1.0]);
    }

    #[test]
    fn rect_validation() {
        assert!(RectSet::new(2, []).is_err());
        assert!(RectSet::new(2, [(2, 1.0)]).is_err());
        assert!(RectSet::new(2, [(0, 0.0)]).is_err());
        assert!(RectSet::new(2, [(0, 1.0), (0, 2.0)]).is_err());
    }

    #[test]
    fn json_forms() {
        let a: RectSet = serde_json::from_str(r#"{"d": 3, "S": [1,3], "x": {"1": 2.0, "3": 1.5}}"#).unwrap();
        assert_eq!(a, rect(3, &[(0, 2.0), (2, 1.5)]));
        let back: RectSet = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<RectSet>(r#"{"d": 2, "S": [0], "x": {"0": 1.0}}"#).is_err());
        assert!(serde_json::from_str::<RectSet>(r#"{"d": 2, "S": [1], "x": {"2": 1.0}}"#).is_err());

        let f: PowerFn = serde_json::from_str(r#"{"coeff": 1.0, "exp": 0.5}"#).unwrap();
        assert_eq!(f, pf(1.0, 0.5));
        assert!(serde_json::from_str::<PowerFn>(r#"{"coeff": -1.0, "exp": 0.5}"#).is_err());
    }

    fn arb_power() -> impl Strategy<Value = PowerFn> {
        (0.01f64..100.0, prop_oneof![-5.0f64..-0.01, 0.01f64..5.0]).prop_map(|(c, e)| pf(c, e))
    }

    fn arb_rect(d: usize) -> impl Strategy<Value = RectSet> {
        proptest::collection::btree_map(0..d, 0.1f64..10.0, 1..=d).prop_map(move |m| RectSet::new(d, m).unwrap())
    }

    fn arb_rect_pair() -> impl Strategy<Value = (RectSet, RectSet, RectSet)> {
        (1usize..=6).prop_flat_map(|d| (arb_rect(d), arb_rect(d), arb_rect(d)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn invert_is_involution(f in arb_power()) {
            let g = f.invert().unwrap().invert().unwrap();
            prop_assert!((g.coeff() - f.coeff()).abs() <= 1e-12 * f.coeff());
            prop_assert!((g.exponent() - f.exponent()).abs() <= 1e-12 * f.exponent().abs());
        }

        #[test]
        fn ratio_limit_reciprocal_consistency(f in arb_power(), g in arb_power()) {
            let fg = f.ratio_limit(&g);
            let gf = g.ratio_limit(&f);
            match (fg, gf) {
                (LimitClass::Zero, LimitClass::Infinite) | (LimitClass::Infinite, LimitClass::Zero) => {}
                (LimitClass::Finite(a), LimitClass::Finite(b)) => prop_assert!((a * b - 1.0).abs() < 1e-12),
                other => prop_assert!(false, "inconsistent pair {:?}", other),
            }
        }

        #[test]
        fn intersect_lattice_laws((a, b, c) in arb_rect_pair()) {
            prop_assert_eq!(a.intersect(&b).unwrap(), b.intersect(&a).unwrap());
            prop_assert_eq!(
                a.intersect(&b).unwrap().intersect(&c).unwrap(),
                a.intersect(&b.intersect(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(a.intersect(&a).unwrap(), a.clone());
            let ab = a.intersect(&b).unwrap();
            prop_assert!(ab.cone_level() >= a.cone_level().max(b.cone_level()));
        }

        #[test]
        fn contains_is_monotone(
            a in arb_rect(4),
            z in proptest::collection::vec(0.0f64..12.0, 4),
            bump in proptest::collection::vec(0.0f64..3.0, 4),
        ) {
            let z2: Vec<f64> = z.iter().zip(&bump).map(|(x, b)| x + b).collect();
            if a.contains(&z).unwrap() {
                prop_assert!(a.contains(&z2).unwrap());
            }
        }
    }
}
