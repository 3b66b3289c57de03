//! Adapted-MRV spectra: per-cone tail indices, scalings and limit measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::TailMeasure;
use crate::regvar::{exponents_equal, PowerFn, RectSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumEntry {
    Rv { alpha: f64, b: PowerFn, mu: TailMeasure },
    NullConv { gamma: f64 },
}

impl SpectrumEntry {
    pub fn rv(alpha: f64, b: PowerFn, mu: TailMeasure) -> Self {
        SpectrumEntry::Rv { alpha, b, mu }
    }

    /// Entry with `b(t) = t^{1/alpha}`.
    pub fn rv_canonical(alpha: f64, mu: TailMeasure) -> Result<Self> {
        Ok(SpectrumEntry::Rv { alpha, b: PowerFn::monomial(1.0 / alpha)?, mu })
    }

    pub fn is_rv(&self) -> bool {
        matches!(self, SpectrumEntry::Rv { .. })
    }

    pub fn measure(&self) -> Option<&TailMeasure> {
        match self {
            SpectrumEntry::Rv { mu, .. } => Some(mu),
            SpectrumEntry::NullConv { .. } => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            SpectrumEntry::Rv { alpha, .. } => Some(*alpha),
            SpectrumEntry::NullConv { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MRVSpectrum {
    d: usize,
    delta: usize,
    entries: Vec<SpectrumEntry>,
}

#[derive(Deserialize)]
struct SpectrumRepr {
    d: usize,
    #[serde(default)]
    delta: Option<usize>,
    entries: Vec<SpectrumEntry>,
}

impl<'de> Deserialize<'de> for MRVSpectrum {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = SpectrumRepr::deserialize(deserializer)?;
        let spec = MRVSpectrum::new(r.d, r.entries).map_err(D::Error::custom)?;
        if let Some(delta) = r.delta {
            if delta != spec.delta {
                return Err(D::Error::custom(format!(
                    "invalid spectrum: declared delta {delta} but entries give {}",
                    spec.delta
                )));
            }
        }
        Ok(spec)
    }
}

/// A tail-probability approximation, or an upper bound on a null-convergence cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approximation {
    pub value: f64,
    pub upper_bound: bool,
}

const INDEX_TOL: f64 = 1e-9;

impl MRVSpectrum {
    /// Validates the adapted-MRV structure: RV entries first, then null
    /// convergence, nondecreasing indices, `b_i` of index `1/alpha_i`.
    pub fn new(d: usize, entries: Vec<SpectrumEntry>) -> Result<Self> {
        let bad = |msg: String| Err(Error::SpectrumInvalid(msg));
        if d == 0 {
            return bad("dimension must be positive".into());
        }
        if entries.len() != d {
            return bad(format!("expected {d} entries, got {}", entries.len()));
        }
        let delta = entries.iter().take_while(|e| e.is_rv()).count();
        if delta == 0 {
            return bad("entry 1 must be regularly varying".into());
        }
        if let Some(pos) = entries[delta..].iter().position(|e| e.is_rv()) {
            return bad(format!("entry {} is RV after a null-convergence entry", delta + pos + 1));
        }
        let mut prev = 0.0;
        for (k, e) in entries[..delta].iter().enumerate() {
            let i = k + 1;
            let SpectrumEntry::Rv { alpha, b, mu } = e else { unreachable!() };
            if !(alpha.is_finite() && *alpha > 0.0) {
                return bad(format!("alpha_{i} must be positive, got {alpha}"));
            }
            if !exponents_equal(b.exponent(), 1.0 / alpha) && (b.exponent() * alpha - 1.0).abs() > INDEX_TOL {
                return bad(format!("b_{i} has exponent {} but 1/alpha_{i} = {}", b.exponent(), 1.0 / alpha));
            }
            if mu.d() != d {
                return bad(format!("mu_{i} has dimension {}, expected {d}", mu.d()));
            }
            if mu.level() != i {
                return bad(format!("mu_{i} lives on level {}", mu.level()));
            }
            if (mu.index() - alpha).abs() > INDEX_TOL * alpha.max(1.0) {
                return bad(format!("mu_{i} has index {} but alpha_{i} = {alpha}", mu.index()));
            }
            if *alpha < prev * (1.0 - INDEX_TOL) {
                return bad(format!("alpha_{i} = {alpha} decreases from {prev}"));
            }
            prev = *alpha;
        }
        let alpha1 = entries[0].alpha().unwrap();
        for (k, e) in entries.iter().enumerate().skip(delta) {
            let SpectrumEntry::NullConv { gamma } = e else { unreachable!() };
            if !(gamma.is_finite() && *gamma > 0.0 && *gamma < alpha1 / d as f64) {
                return bad(format!(
                    "null-convergence gamma at level {} must lie in (0, alpha_1/d) = (0, {}), got {gamma}",
                    k + 1,
                    alpha1 / d as f64
                ));
            }
        }
        Ok(MRVSpectrum { d, delta, entries })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    /// Entry for cone level `i` (1-based).
    pub fn entry(&self, i: usize) -> &SpectrumEntry {
        &self.entries[i - 1]
    }

    pub fn alpha1(&self) -> f64 {
        self.entries[0].alpha().unwrap()
    }

    /// `alpha_i`, with `alpha_0 = 0` and `infinity` on null-convergence cones.
    pub fn alpha(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.entry(i).alpha().unwrap_or(f64::INFINITY)
    }

    /// `b_i^{<-}`, with `b_0^{<-} = 1` and `t^{i(alpha_1+gamma)}` on
    /// null-convergence cones.
    pub fn b_inverse(&self, i: usize) -> PowerFn {
        if i == 0 {
            return PowerFn::ONE;
        }
        match self.entry(i) {
            SpectrumEntry::Rv { b, .. } => b.invert().expect("validated exponent is nonzero"),
            SpectrumEntry::NullConv { gamma } => {
                PowerFn::monomial(i as f64 * (self.alpha1() + gamma)).expect("finite exponent")
            }
        }
    }

    /// `mu_i`, with the unit measure at `i = 0`.
    pub fn measure(&self, i: usize) -> Option<TailMeasure> {
        if i == 0 {
            return Some(TailMeasure::unit(self.d).expect("valid dimension"));
        }
        self.entry(i).measure().cloned()
    }

    /// Level-1 marginal weights `mu_1({z_j > 1})`.
    pub fn marginal_weights(&self) -> Vec<f64> {
        let mu1 = self.entry(1).measure().unwrap();
        (0..self.d).map(|j| mu1.marginal(j)).collect()
    }

    /// True when `Delta = d`, `b_i^{<-} = (b_1^{<-})^i` and every `mu_i` is the
    /// product of the level-1 marginals, checked on probe rectangles.
    pub fn is_product_form(&self) -> bool {
        if self.delta != self.d {
            return false;
        }
        let mu1 = self.entry(1).measure().unwrap();
        let b1 = self.b_inverse(1);
        (1..=self.d).all(|i| {
            let mu = self.entry(i).measure().unwrap();
            if !self.b_inverse(i).approx_eq(&b1.pow(i as f64), 1e-12) {
                return false;
            }
            probe_sets(self.d, i).iter().all(|pairs| {
                let want: f64 = if pairs.len() > i {
                    0.0
                } else {
                    pairs.iter().map(|&(j, x)| mu1.eval_pairs(&[(j, x)])).product()
                };
                let got = mu.eval_pairs(pairs);
                (got - want).abs() <= 1e-10 * want.abs().max(got.abs())
            })
        })
    }

    /// `alpha_i < alpha_m + alpha_{i-m}` for all levels and splits.
    pub fn strictly_superadditive(&self) -> bool {
        if self.delta != self.d {
            return false;
        }
        (2..=self.d).all(|i| {
            (1..i).all(|m| {
                let (a, b) = (self.alpha(i), self.alpha(m) + self.alpha(i - m));
                a < b && !exponents_equal(a, b)
            })
        })
    }

    /// Approximation of `P(Z in tA)` on the cone level of `a`.
    pub fn tail_prob_approx(&self, a: &RectSet, t: f64) -> Result<Approximation> {
        if a.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: a.dim() });
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonPositiveArgument(t));
        }
        let i = a.cone_level();
        match self.entry(i) {
            SpectrumEntry::Rv { mu, .. } => Ok(Approximation {
                value: mu.eval(a)? / self.b_inverse(i).eval(t)?,
                upper_bound: false,
            }),
            SpectrumEntry::NullConv { gamma } => {
                let rate = i as f64 * (self.alpha1() + gamma);
                Ok(Approximation {
                    value: (t * a.min_threshold()).powf(-rate),
                    upper_bound: true,
                })
            }
        }
    }

    /// Like [`tail_prob_approx`](Self::tail_prob_approx) but refuses bounds.
    pub fn tail_prob_estimate(&self, a: &RectSet, t: f64) -> Result<f64> {
        let approx = self.tail_prob_approx(a, t)?;
        if approx.upper_bound {
            return Err(Error::NullConvOnly { level: a.cone_level() });
        }
        Ok(approx.value)
    }

    /// Replaces each RV measure `mu_i` with `c * mu_i`.
    pub fn scale_measures(&self, c: f64) -> Result<MRVSpectrum> {
        let entries = self
            .entries
            .iter()
            .map(|e| match e {
                SpectrumEntry::Rv { alpha, b, mu } => Ok(SpectrumEntry::Rv { alpha: *alpha, b: *b, mu: mu.scale(c)? }),
                other => Ok(other.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        MRVSpectrum::new(self.d, entries)
    }

    pub fn from_json(text: &str) -> Result<MRVSpectrum> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }
}

/// A few deterministic level-`i` rectangles spread over the index set.
pub(crate) fn probe_sets(d: usize, i: usize) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![
        (0..i).map(|j| (j, 1.0)).collect::<Vec<_>>(),
        (d - i..d).map(|j| (j, 0.6 + 0.45 * j as f64)).collect(),
        (0..i).map(|k| ((k * d) / i, 2.3 - 0.3 * k as f64)).collect(),
    ];
    if i < d {
        // one set above the level
        out.push((0..=i).map(|j| (j, 1.1 + 0.2 * j as f64)).collect());
    }
    out
}

/// Default null-convergence parameter `alpha/(2d)`, inside `(0, alpha/d)`.
pub fn default_gamma(alpha: f64, d: usize) -> f64 {
    alpha / (2.0 * d as f64)
}

fn canonical(d: usize, per_level: impl Fn(usize) -> Result<TailMeasure>) -> Result<MRVSpectrum> {
    let entries = (1..=d)
        .map(|i| {
            let mu = per_level(i)?;
            SpectrumEntry::rv_canonical(mu.index(), mu)
        })
        .collect::<Result<Vec<_>>>()?;
    MRVSpectrum::new(d, entries)
}

/// Spectra of the dependence families with `b_1(t) = t^{1/alpha}`.
pub mod families {
    use super::*;

    /// Independent Pareto-type coordinates: `alpha_i = i alpha`.
    pub fn independence(d: usize, alpha: f64, kappa: Option<Vec<f64>>) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::independence(d, i, alpha, kappa.clone()))
    }

    /// `alpha_i = (2 - 2^{-(i-1)}) alpha`.
    pub fn mo_equal(d: usize, alpha: f64) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::mo_equal(d, i, alpha))
    }

    pub fn mo_proportional(d: usize, alpha: f64) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::mo_proportional(d, i, alpha))
    }

    /// `alpha` on level 1, `alpha beta` on every deeper level.
    pub fn acig(d: usize, alpha: f64, beta: f64) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::acig(d, i, alpha, beta))
    }

    pub fn mardia(d: usize, alpha: f64) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::mardia(d, i, alpha))
    }

    pub fn complete_dependence(d: usize, alpha: f64) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::complete_dependence(d, i, alpha))
    }

    pub fn clayton(d: usize, alpha: f64, theta: f64) -> Result<MRVSpectrum> {
        canonical(d, |i| TailMeasure::clayton(d, i, alpha, theta))
    }

    /// `X e_B (+ noise)`: regularly varying on level 1 only (`Delta = 1`).
    pub fn discrete_mixture(d: usize, alpha: f64, p: Vec<f64>, gamma: Option<f64>) -> Result<MRVSpectrum> {
        let gamma = gamma.unwrap_or_else(|| default_gamma(alpha, d));
        let mut entries = vec![SpectrumEntry::rv_canonical(alpha, TailMeasure::discrete_mixture_level1(d, alpha, p)?)?];
        entries.extend((2..=d).map(|_| SpectrumEntry::NullConv { gamma }));
        MRVSpectrum::new(d, entries)
    }

    /// `2^{-1/alpha}(X e_B + X' e_B')`: level 2 carries half the product of
    /// the level-1 marginals, deeper levels are null.
    pub fn two_shock(d: usize, alpha: f64, p: Vec<f64>, gamma: Option<f64>) -> Result<MRVSpectrum> {
        let gamma = gamma.unwrap_or_else(|| default_gamma(alpha, d));
        let mu1 = TailMeasure::discrete_mixture_level1(d, alpha, p.clone())?;
        let mut entries = vec![SpectrumEntry::rv_canonical(alpha, mu1)?];
        if d >= 2 {
            let mu2 = TailMeasure::independence(d, 2, alpha, Some(p))?.scale(0.5)?;
            entries.push(SpectrumEntry::rv_canonical(2.0 * alpha, mu2)?);
        }
        entries.extend((3..=d).map(|_| SpectrumEntry::NullConv { gamma }));
        MRVSpectrum::new(d, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(d: usize, pairs: &[(usize, f64)]) -> RectSet {
        RectSet::new(d, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn independence_level2_approx() {
        let s = families::independence(2, 2.0, None).unwrap();
        let a = rect(2, &[(0, 1.0), (1, 1.0)]);
        let v = s.tail_prob_approx(&a, 10.0).unwrap();
        assert!(!v.upper_bound);
        assert!((v.value - 1e-4).abs() < 1e-18);
        // b_2 = b_1^{1/2}
        assert!(s.b_inverse(2).approx_eq(&s.b_inverse(1).pow(2.0), 1e-14));
        assert!(s.is_product_form());
        assert!(!s.strictly_superadditive());
    }

    #[test]
    fn homogeneity_of_approx() {
        let s = families::mo_equal(3, 1.3).unwrap();
        for a in [rect(3, &[(0, 1.2)]), rect(3, &[(0, 1.0), (2, 2.0)]), rect(3, &[(0, 1.0), (1, 0.5), (2, 2.0)])] {
            let i = a.cone_level();
            let v1 = s.tail_prob_approx(&a, 7.0).unwrap().value;
            let v2 = s.tail_prob_approx(&a, 14.0).unwrap().value;
            assert!((v2 / v1 - 2f64.powf(-s.alpha(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn mo_equal_level2_scaling() {
        let s = families::mo_equal(2, 1.0).unwrap();
        assert!(s.b_inverse(2).approx_eq(&PowerFn::monomial(1.5).unwrap(), 1e-14));
        assert!(s.strictly_superadditive());
        assert!(!s.is_product_form());
    }

    #[test]
    fn null_conv_bound_and_error() {
        let s = families::discrete_mixture(2, 2.0, vec![0.5, 0.5], None).unwrap();
        assert_eq!(s.delta(), 1);
        let a = rect(2, &[(0, 1.0), (1, 2.0)]);
        let v = s.tail_prob_approx(&a, 10.0).unwrap();
        assert!(v.upper_bound);
        let rate = 2.0 * (2.0 + 0.5);
        assert!((v.value - 10f64.powf(-rate)).abs() < 1e-20);
        assert!(matches!(s.tail_prob_estimate(&a, 10.0), Err(Error::NullConvOnly { level: 2 })));
    }

    #[test]
    fn validation_failures() {
        let mu1 = TailMeasure::independence(2, 1, 1.0, None).unwrap();
        let mu2 = TailMeasure::independence(2, 2, 1.0, None).unwrap();
        let good = |a1: f64| SpectrumEntry::rv_canonical(a1, mu1.clone()).unwrap();
        // RV after NullConv
        assert!(MRVSpectrum::new(2, vec![SpectrumEntry::NullConv { gamma: 0.1 }, good(1.0)]).is_err());
        // wrong count
        assert!(MRVSpectrum::new(2, vec![good(1.0)]).is_err());
        // gamma too large
        assert!(MRVSpectrum::new(2, vec![good(1.0), SpectrumEntry::NullConv { gamma: 0.6 }]).is_err());
        // b exponent inconsistent with alpha
        let bad_b = SpectrumEntry::rv(2.0, PowerFn::monomial(0.25).unwrap(), mu2.clone());
        assert!(MRVSpectrum::new(2, vec![good(1.0), bad_b]).is_err());
        // measure on the wrong level
        assert!(MRVSpectrum::new(2, vec![good(1.0), SpectrumEntry::rv_canonical(1.0, mu1.clone()).unwrap()]).is_err());
        // fine
        assert!(MRVSpectrum::new(2, vec![good(1.0), SpectrumEntry::rv_canonical(2.0, mu2).unwrap()]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        for s in [
            families::mo_equal(3, 1.0).unwrap(),
            families::two_shock(3, 1.5, vec![0.2, 0.3, 0.5], None).unwrap(),
        ] {
            let back = MRVSpectrum::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
        let text = r#"{"d": 2, "delta": 2, "entries": [
            {"rv": {"alpha": 1.0, "b": {"coeff": 1.0, "exp": 1.0}, "mu": {"family": "independence", "d": 2, "alpha": 1.0, "level": 1}}},
            {"rv": {"alpha": 2.0, "b": {"coeff": 1.0, "exp": 0.5}, "mu": {"family": "independence", "d": 2, "alpha": 1.0, "level": 2}}}
        ]}"#;
        assert_eq!(MRVSpectrum::from_json(text).unwrap(), families::independence(2, 1.0, None).unwrap());
        let wrong_delta = text.replace("\"delta\": 2", "\"delta\": 1");
        assert!(MRVSpectrum::from_json(&wrong_delta).is_err());
    }

    #[test]
    fn two_shock_levels() {
        let s = families::two_shock(3, 1.0, vec![1.0 / 3.0; 3], None).unwrap();
        assert_eq!(s.delta(), 2);
        let a = rect(3, &[(0, 1.0), (1, 1.0)]);
        assert!((s.entry(2).measure().unwrap().eval(&a).unwrap() - 0.5 / 9.0).abs() < 1e-15);
    }
}
