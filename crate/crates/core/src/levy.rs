//! Tail approximations for compound Poisson and Levy processes.

use serde::{Deserialize, Serialize};

use crate::convolution::FactorRule;
use crate::error::{Error, Result};
use crate::random_sum::{expected_factor, CountDistribution};
use crate::regvar::RectSet;
use crate::samplers::JumpModel;
use crate::spectrum::MRVSpectrum;
use crate::TailMeasure;

/// The Levy measure's spectrum plus the compound-Poisson data used for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevySpec {
    pi: MRVSpectrum,
    lambda: f64,
    jump_model: Option<JumpModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Linear,
    PowerS,
    PoissonMoment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyApprox {
    pub value: f64,
    /// Multiplier of the level-`i` jump measure: `lambda s`, `(lambda s)^i` or `E N(lambda s)^i`.
    pub weight: f64,
    pub level: usize,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::bad_param("lambda", format!("must be positive, got {lambda}")))
    }
}

fn check_equal_marginals(pi: &MRVSpectrum) -> Result<()> {
    // tail-equivalent marginals: all coordinates share alpha_1 by construction, and
    // each must carry positive mass
    if let Some(j) = pi.marginal_weights().iter().position(|&w| !(w > 0.0)) {
        return Err(Error::SpectrumInvalid(format!(
            "marginal Levy measure of coordinate {} has no regularly varying tail",
            j + 1
        )));
    }
    Ok(())
}

impl LevySpec {
    pub fn new(pi: MRVSpectrum, lambda: f64, jump_model: Option<JumpModel>) -> Result<Self> {
        check_lambda(lambda)?;
        check_equal_marginals(&pi)?;
        if let Some(m) = &jump_model {
            if m.d() != pi.d() {
                return Err(Error::DimensionMismatch { expected: pi.d(), got: m.d() });
            }
        }
        Ok(LevySpec { pi, lambda, jump_model })
    }

    pub fn pi(&self) -> &MRVSpectrum {
        &self.pi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn jump_model(&self) -> Option<&JumpModel> {
        self.jump_model.as_ref()
    }

    /// Spectrum of the jump law, `Pi / lambda`.
    pub fn jump_spectrum(&self) -> Result<MRVSpectrum> {
        self.pi.scale_measures(1.0 / self.lambda)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: LevyRepr = serde_json::from_str(text)?;
        repr.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("levy spec serializes")
    }
}

/// `Pi = lambda F` for jumps with spectrum `jumps`.
pub fn compound_poisson(jumps: &MRVSpectrum, lambda: f64, jump_model: Option<JumpModel>) -> Result<LevySpec> {
    check_lambda(lambda)?;
    LevySpec::new(jumps.scale_measures(lambda)?, lambda, jump_model)
}

/// Compound Poisson process of a sampler model, with its auto spectrum.
pub fn from_model(model: &JumpModel, lambda: f64) -> Result<LevySpec> {
    compound_poisson(&model.spectrum()?, lambda, Some(model.clone()))
}

/// Approximation of `P(L(s) in tA)` in the chosen regime.
pub fn levy_tail_approx(spec: &LevySpec, a: &RectSet, t: f64, s: f64, regime: Regime) -> Result<LevyApprox> {
    let pi = &spec.pi;
    if a.dim() != pi.d() {
        return Err(Error::DimensionMismatch { expected: pi.d(), got: a.dim() });
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::bad_param("s", format!("time horizon must be positive, got {s}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::NonPositiveArgument(t));
    }
    let i = a.cone_level();
    let ls = spec.lambda * s;
    match regime {
        Regime::Linear => {
            if pi.delta() != pi.d() || !pi.strictly_superadditive() {
                return Err(Error::RegimeMismatch(
                    "linear regime needs regular variation on every cone with alpha_i < alpha_m + alpha_{i-m}".into(),
                ));
            }
            let mu = pi.measure(i).unwrap();
            let value = s * mu.eval(a)? / pi.b_inverse(i).eval(t)?;
            Ok(LevyApprox { value, weight: ls, level: i })
        }
        Regime::PowerS => {
            if pi.delta() != 1 && pi.d() > 1 {
                return Err(Error::RegimeMismatch(format!(
                    "s^i regime needs Delta = 1, Levy spectrum has Delta = {}",
                    pi.delta()
                )));
            }
            let mu1 = pi.measure(1).unwrap();
            // mu_i^L = chain_i(mu_1) / i!
            let fact: f64 = (1..=i).map(|k| k as f64).product();
            let mu_l = TailMeasure::chain(&mu1, i)?.scale(1.0 / fact)?;
            let denom = pi.b_inverse(1).pow(i as f64).eval(t)?;
            let value = s.powi(i as i32) * mu_l.eval(a)? / denom;
            Ok(LevyApprox { value, weight: ls.powi(i as i32), level: i })
        }
        Regime::PoissonMoment => {
            let jumps = spec.jump_spectrum()?;
            if !jumps.is_product_form() {
                return Err(Error::RegimeMismatch(
                    "Poisson-moment regime needs product-form jump measures mu_i = prod of marginals".into(),
                ));
            }
            let weight = expected_factor(&CountDistribution::Poisson { lambda: ls }, &FactorRule::NearlyIndependent, i)?;
            let mu = jumps.measure(i).unwrap();
            let value = weight * mu.eval(a)? / jumps.b_inverse(i).eval(t)?;
            Ok(LevyApprox { value, weight, level: i })
        }
    }
}

/// The regime whose hypothesis the spectrum satisfies, in order of preference.
pub fn auto_regime(spec: &LevySpec) -> Result<Regime> {
    let pi = &spec.pi;
    if pi.d() > 1 && pi.delta() == 1 {
        Ok(Regime::PowerS)
    } else if spec.jump_spectrum()?.is_product_form() {
        Ok(Regime::PoissonMoment)
    } else if pi.delta() == pi.d() && pi.strictly_superadditive() {
        Ok(Regime::Linear)
    } else {
        Err(Error::RegimeMismatch(
            "no regime applies: indices are not strictly superadditive and the measures are not of product form".into(),
        ))
    }
}

/// `Pi_j((t, inf))` to first order.
pub fn marginal_levy_tail(spec: &LevySpec, j: usize, t: f64) -> Result<f64> {
    let d = spec.pi.d();
    if j >= d {
        return Err(Error::bad_param("j", format!("coordinate {} outside 1..={d}", j + 1)));
    }
    let mu1 = spec.pi.measure(1).unwrap();
    Ok(mu1.marginal(j) / spec.pi.b_inverse(1).eval(t)?)
}

// --- JSON ------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevyRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi_spectrum: Option<MRVSpectrum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jump_spectrum: Option<MRVSpectrum>,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jump_model: Option<JumpModel>,
}

impl TryFrom<LevyRepr> for LevySpec {
    type Error = Error;

    fn try_from(r: LevyRepr) -> Result<Self> {
        match (r.pi_spectrum, r.jump_spectrum) {
            (Some(pi), None) => LevySpec::new(pi, r.lambda, r.jump_model),
            (None, Some(jumps)) => compound_poisson(&jumps, r.lambda, r.jump_model),
            (None, None) => match &r.jump_model {
                Some(m) => from_model(m, r.lambda),
                None => Err(Error::bad_param("pi_spectrum", "one of pi_spectrum, jump_spectrum or jump_model is required")),
            },
            (Some(_), Some(_)) => Err(Error::bad_param("pi_spectrum", "give either pi_spectrum or jump_spectrum, not both")),
        }
    }
}

impl Serialize for LevySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LevyRepr {
            pi_spectrum: Some(self.pi.clone()),
            jump_spectrum: None,
            lambda: self.lambda,
            jump_model: self.jump_model.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LevySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = LevyRepr::deserialize(d)?;
        LevySpec::try_from(repr).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{mo_equal_model, JumpFamily, Noise};
    use crate::spectrum::families;
    use proptest::prelude::*;

    fn diag2() -> RectSet {
        RectSet::diagonal(2, &[0, 1], 1.0).unwrap()
    }

    fn independent_marginals(alpha: f64) -> LevySpec {
        let m = JumpModel::new(2, alpha, JumpFamily::DiscreteMixture { p: vec![0.5, 0.5], noise: Noise::None }).unwrap();
        from_model(&m, 1.0).unwrap()
    }

    #[test]
    fn regime_ratios() {
        let t = 50.0;
        let lin = from_model(&mo_equal_model(2, 1.0, 1.0).unwrap(), 1.0).unwrap();
        let l1 = levy_tail_approx(&lin, &diag2(), t, 1.0, Regime::Linear).unwrap();
        let l2 = levy_tail_approx(&lin, &diag2(), t, 2.0, Regime::Linear).unwrap();
        assert_eq!(l2.value / l1.value, 2.0);

        let ps = independent_marginals(1.0);
        let p1 = levy_tail_approx(&ps, &diag2(), t, 1.0, Regime::PowerS).unwrap();
        let p2 = levy_tail_approx(&ps, &diag2(), t, 2.0, Regime::PowerS).unwrap();
        assert_eq!(p2.value / p1.value, 4.0);
        assert_eq!(p1.weight, 1.0);
        // two independent coordinates, each with Pi_j = 0.5 x^{-1}
        assert!((p1.value - 0.25 / (t * t)).abs() < 1e-15);

        let ind = compound_poisson(&families::independence(2, 1.0, None).unwrap(), 1.0, None).unwrap();
        let pm = levy_tail_approx(&ind, &diag2(), t, 1.0, Regime::PoissonMoment).unwrap();
        assert_eq!(pm.weight, 2.0);
        assert_eq!(pm.weight / p1.weight, 2.0);
    }

    #[test]
    fn mismatches_are_named() {
        let ps = independent_marginals(1.0);
        let err = levy_tail_approx(&ps, &diag2(), 10.0, 1.0, Regime::Linear).unwrap_err();
        assert!(matches!(err, Error::RegimeMismatch(_)));
        let lin = from_model(&mo_equal_model(2, 1.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(matches!(levy_tail_approx(&lin, &diag2(), 10.0, 1.0, Regime::PowerS), Err(Error::RegimeMismatch(_))));
        assert!(matches!(levy_tail_approx(&lin, &diag2(), 10.0, 1.0, Regime::PoissonMoment), Err(Error::RegimeMismatch(_))));
        // boundary alpha_2 = 2 alpha_1 without product form
        let boundary = compound_poisson(&families::two_shock(2, 1.0, vec![0.5, 0.5], None).unwrap(), 1.0, None).unwrap();
        assert!(matches!(auto_regime(&boundary), Err(Error::RegimeMismatch(_))));
        for regime in [Regime::Linear, Regime::PowerS, Regime::PoissonMoment] {
            assert!(levy_tail_approx(&boundary, &diag2(), 10.0, 1.0, regime).is_err());
        }
        assert_eq!(auto_regime(&ps).unwrap(), Regime::PowerS);
        assert_eq!(auto_regime(&lin).unwrap(), Regime::Linear);
    }

    #[test]
    fn marginal_tails() {
        let cd = compound_poisson(&families::complete_dependence(3, 1.5).unwrap(), 2.0, None).unwrap();
        let v: Vec<f64> = (0..3).map(|j| marginal_levy_tail(&cd, j, 7.0).unwrap()).collect();
        assert!(v.iter().all(|&x| x == v[0]));
        let ind = compound_poisson(&families::independence(2, 2.0, None).unwrap(), 3.0, None).unwrap();
        assert!((marginal_levy_tail(&ind, 1, 10.0).unwrap() - 3.0 * 1e-2).abs() < 1e-15);
        assert!(marginal_levy_tail(&ind, 2, 10.0).is_err());
    }

    #[test]
    fn clayton_large_theta_tends_to_min() {
        let x = [(0, 1.0), (1, 1.0)];
        let mut prev = 0.0;
        for theta in [1.0, 10.0, 100.0, 1000.0] {
            let v = TailMeasure::clayton(2, 1, 1.0, theta).unwrap().eval_pairs(&x);
            assert!(v >= prev);
            prev = v;
        }
        assert!((prev - 1.0).abs() < 1e-2);
    }

    #[test]
    fn weights_match_random_sum() {
        let ls = 2.7;
        for i in 1..=3 {
            let a = RectSet::leading(3, i, 1.0).unwrap();
            let ind = compound_poisson(&families::independence(3, 1.0, None).unwrap(), 0.9, None).unwrap();
            let pm = levy_tail_approx(&ind, &a, 5.0, ls / 0.9, Regime::PoissonMoment).unwrap();
            let want = expected_factor(&CountDistribution::Poisson { lambda: ls }, &FactorRule::NearlyIndependent, i).unwrap();
            assert!((pm.weight - want).abs() < 1e-12 * want);
            let dm = compound_poisson(&families::discrete_mixture(3, 1.0, vec![0.3, 0.3, 0.4], None).unwrap(), 0.9, None).unwrap();
            let ps = levy_tail_approx(&dm, &a, 5.0, ls / 0.9, Regime::PowerS).unwrap();
            let want = expected_factor(&CountDistribution::Poisson { lambda: ls }, &FactorRule::Delta1, i).unwrap();
            assert!((ps.weight - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = independent_marginals(2.0);
        let back = LevySpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        let text = r#"{"lambda":2.0,"jump_model":{"family":"mardia","d":2,"alpha":1.0}}"#;
        let s = LevySpec::from_json(text).unwrap();
        assert_eq!(s.pi(), &families::mardia(2, 1.0).unwrap().scale_measures(2.0).unwrap());
        assert!(LevySpec::from_json(r#"{"lambda":1.0}"#).is_err());
    }

    proptest! {
        #[test]
        fn homogeneity_in_t(t in 2.0f64..500.0, s in 0.1f64..5.0) {
            let cases = [
                (from_model(&mo_equal_model(2, 1.3, 1.0).unwrap(), 1.0).unwrap(), Regime::Linear),
                (independent_marginals(1.3), Regime::PowerS),
                (compound_poisson(&families::independence(2, 1.3, None).unwrap(), 1.0, None).unwrap(), Regime::PoissonMoment),
            ];
            for (spec, regime) in cases {
                for a in [RectSet::leading(2, 1, 1.2).unwrap(), diag2()] {
                    let v1 = levy_tail_approx(&spec, &a, t, s, regime).unwrap().value;
                    let v2 = levy_tail_approx(&spec, &a, 2.0 * t, s, regime).unwrap().value;
                    let i = a.cone_level() as i32;
                    let want = match regime {
                        Regime::Linear => 2f64.powf(-spec.pi().alpha(i as usize)),
                        _ => 2f64.powf(-1.3 * i as f64),
                    };
                    prop_assert!((v2 / v1 - want).abs() < 1e-10 * want);
                }
            }
        }

        #[test]
        fn intensity_horizon_trade(lambda in 0.1f64..5.0, s in 0.1f64..5.0) {
            let jumps = families::independence(2, 1.0, None).unwrap();
            let a = compound_poisson(&jumps, lambda, None).unwrap();
            let b = compound_poisson(&jumps, 1.0, None).unwrap();
            let va = levy_tail_approx(&a, &diag2(), 9.0, s, Regime::PoissonMoment).unwrap().value;
            let vb = levy_tail_approx(&b, &diag2(), 9.0, lambda * s, Regime::PoissonMoment).unwrap().value;
            prop_assert!((va - vb).abs() <= 1e-12 * va);
        }
    }
}
