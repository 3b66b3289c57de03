//! Exact tail probabilities for models with closed-form or enumerable laws.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::montecarlo::SimKind;
use crate::regvar::RectSet;
use crate::samplers::{JumpFamily, JumpModel, Noise};

fn pareto_sf(y: f64, alpha: f64) -> f64 {
    if y <= 1.0 {
        1.0
    } else {
        y.powf(-alpha)
    }
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, scale: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let tol = 1e-15 * scale.max(1e-300);
    quadrature::double_exponential::integrate(f, a, b, tol).integral
}

/// `P(X_1 + ... + X_m > y)` for i.i.d. Pareto(alpha) summands on `[1, inf)`.
pub struct ParetoSum {
    alpha: f64,
    cache: RefCell<HashMap<(usize, u64), f64>>,
}

impl ParetoSum {
    pub fn new(alpha: f64) -> Self {
        ParetoSum { alpha, cache: RefCell::new(HashMap::new()) }
    }

    pub fn survival(&self, m: usize, y: f64) -> f64 {
        if m == 0 {
            return if y < 0.0 { 1.0 } else { 0.0 };
        }
        if y <= m as f64 {
            return 1.0;
        }
        if m == 1 {
            return pareto_sf(y, self.alpha);
        }
        let key = (m, y.to_bits());
        if let Some(&v) = self.cache.borrow().get(&key) {
            return v;
        }
        // condition on the last summand x: the others need y - x, which is
        // automatic once x > y - (m - 1)
        let a = self.alpha;
        let top = y - (m - 1) as f64;
        let f = |x: f64| self.survival(m - 1, y - x) * a * x.powf(-a - 1.0);
        let mid = 0.5 * (1.0 + top);
        let scale = y.powf(-a);
        let v = pareto_sf(top, a) + integrate(&f, 1.0, mid, scale) + integrate(&f, mid, top, scale);
        self.cache.borrow_mut().insert(key, v);
        v
    }
}

/// Exact `P(Z in tA)` from the closed-form joint survival function.
pub fn oracle_single_vector(m: &JumpModel, a: &RectSet, t: f64) -> Result<f64> {
    if a.dim() != m.d() {
        return Err(Error::DimensionMismatch { expected: m.d(), got: a.dim() });
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::NonPositiveArgument(t));
    }
    let alpha = m.alpha();
    let z: Vec<(usize, f64)> = a.pairs().into_iter().map(|(j, x)| (j, t * x)).collect();
    match m.family() {
        JumpFamily::IndependencePareto => Ok(z.iter().map(|&(_, y)| pareto_sf(y, alpha)).product()),
        JumpFamily::CompleteDependence => {
            let top = z.iter().map(|&(_, y)| y).fold(0.0, f64::max);
            Ok(pareto_sf(top, alpha))
        }
        JumpFamily::Mardia => Ok(1.0 / (1.0 + z.iter().map(|&(_, y)| y.powf(alpha)).sum::<f64>())),
        JumpFamily::MarshallOlkin { rates } => {
            // Z_j > y  iff  T_j > alpha ln(y)^+ / Lambda_j
            let totals = m.mo_totals();
            let tau: Vec<(usize, f64)> = z.iter().map(|&(j, y)| (j, alpha * y.ln().max(0.0) / totals[j])).collect();
            let exponent: f64 = rates
                .iter()
                .map(|&(mask, rate)| {
                    let need = tau
                        .iter()
                        .filter(|(j, _)| mask & (1 << j) != 0)
                        .map(|&(_, s)| s)
                        .fold(0.0, f64::max);
                    rate * need
                })
                .sum();
            Ok((-exponent).exp())
        }
        _ => Err(Error::UnsupportedModel(
            "closed-form survival is available for independence, Marshall-Olkin, Mardia and complete dependence".into(),
        )),
    }
}

/// Exact `P(Z^(1) + ... + Z^(n) in tA)` for noise-free discrete mixtures and two-shock
/// models, by enumerating how the Pareto shocks are allocated to coordinates.
pub fn oracle_discrete_mixture(m: &JumpModel, n: u64, a: &RectSet, t: f64) -> Result<f64> {
    if a.dim() != m.d() {
        return Err(Error::DimensionMismatch { expected: m.d(), got: a.dim() });
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::NonPositiveArgument(t));
    }
    let alpha = m.alpha();
    let (p, shocks, weight) = match m.family() {
        JumpFamily::DiscreteMixture { p, noise: Noise::None } => (p, n as usize, 1.0),
        JumpFamily::DiscreteMixture { .. } => {
            return Err(Error::UnsupportedModel("the discrete-mixture oracle needs noise = none".into()))
        }
        JumpFamily::TwoShock { p } => (p, 2 * n as usize, 2f64.powf(-1.0 / alpha)),
        _ => {
            return Err(Error::UnsupportedModel(
                "allocation oracle covers discrete_mixture and two_shock models".into(),
            ))
        }
    };
    let pairs = a.pairs();
    let p_in: Vec<f64> = pairs.iter().map(|&(j, _)| p[j]).collect();
    let p_out = (1.0 - p_in.iter().sum::<f64>()).max(0.0);
    let levels: Vec<f64> = pairs.iter().map(|&(_, x)| t * x / weight).collect();
    let g = ParetoSum::new(alpha);
    let ln_fact = |k: usize| (1..=k).map(|r| (r as f64).ln()).sum::<f64>();

    // depth-first over allocations k_j >= 1 to the coordinates of A
    fn walk(
        idx: usize,
        left: usize,
        state: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize], usize),
        width: usize,
    ) {
        if idx == width {
            visit(state, left);
            return;
        }
        for k in 1..=left {
            state.push(k);
            walk(idx + 1, left - k, state, visit, width);
            state.pop();
        }
    }
    let mut total = 0.0;
    let mut visit = |ks: &[usize], rest: usize| {
        let mut log_w = ln_fact(shocks) - ln_fact(rest);
        for (k, pj) in ks.iter().zip(&p_in) {
            log_w += *k as f64 * pj.ln() - ln_fact(*k);
        }
        let w = log_w.exp() * p_out.powi(rest as i32);
        if w == 0.0 {
            return;
        }
        let surv: f64 = ks.iter().zip(&levels).map(|(&k, &y)| g.survival(k, y)).product();
        total += w * surv;
    };
    walk(0, shocks, &mut Vec::new(), &mut visit, pairs.len());
    Ok(total)
}

/// Exact probability for `kind`, where some oracle applies.
pub fn oracle(kind: SimKind, m: &JumpModel, a: &RectSet, t: f64) -> Result<f64> {
    let discrete = matches!(m.family(), JumpFamily::DiscreteMixture { .. } | JumpFamily::TwoShock { .. });
    match kind {
        SimKind::Vector if discrete => oracle_discrete_mixture(m, 1, a, t),
        SimKind::Vector => oracle_single_vector(m, a, t),
        SimKind::Sum(n) if discrete => oracle_discrete_mixture(m, n, a, t),
        SimKind::Sum(1) => oracle_single_vector(m, a, t),
        _ => Err(Error::UnsupportedModel(format!("no exact oracle for kind {kind} with this model"))),
    }
}
