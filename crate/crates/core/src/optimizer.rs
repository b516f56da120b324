//! Cost-optimal transmit probability and measurement rate.
//!
//! Both optima come from setting a derivative of the total cost
//! `C(m, p) = (2p + 1)/(4pm) + (k_m + p k_lambda) m` to zero. Each closed form
//! has a brute-force grid counterpart so that the two can be compared.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
pub use crate::params::CostModel;

/// Default step of the transmit-probability grid.
pub const P_GRID_STEP: f64 = 1e-3;
/// Default number of log-spaced points on `[0.01, 100]` for the rate grid.
pub const M_GRID_POINTS: usize = 1000;
pub const M_GRID_RANGE: (f64, f64) = (0.01, 100.0);
/// Objective differences below this are ties, broken toward smaller `p`.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("k_m + p k_lambda = 0: cost never grows with m, m* is unbounded")]
    Unbounded,
    #[error("invalid grid: {0}")]
    Grid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Grid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub argmin: f64,
    pub objective: f64,
    pub method: Method,
    /// Grid step (p) or log-ratio between neighbours (m); `None` for closed
    /// forms.
    pub resolution: Option<f64>,
}

/// `p* = min(1, 1 / (2 m sqrt(k_lambda)))`, and `1` when transmitting is
/// free.
pub fn optimal_p(m: f64, costs: &CostModel) -> Result<PolicyResult, OptimizerError> {
    analytic::k_lambda_threshold(m)?;
    let argmin = if costs.k_lambda <= 0.0 {
        1.0
    } else {
        (1.0 / (2.0 * m * costs.k_lambda.sqrt())).min(1.0)
    };
    Ok(PolicyResult {
        argmin,
        objective: analytic::total_cost(m, argmin, costs)?,
        method: Method::ClosedForm,
        resolution: None,
    })
}

/// Exhaustive search over `p = step, 2 step, ..., 1`.
pub fn grid_optimal_p(m: f64, costs: &CostModel, step: f64) -> Result<PolicyResult, OptimizerError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(OptimizerError::Grid(format!("p step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 1..=n {
        let p = if i == n { 1.0 } else { i as f64 * step };
        let c = analytic::total_cost(m, p, costs)?;
        // strict improvement only, so ties keep the smaller p
        match best {
            Some((_, bc)) if c >= bc - TIE_TOL => {}
            _ => best = Some((p, c)),
        }
    }
    let (argmin, objective) = best.expect("grid has at least one point");
    Ok(PolicyResult {
        argmin,
        objective,
        method: Method::Grid,
        resolution: Some(step),
    })
}

/// `m* = sqrt((2p + 1) / (4p (k_m + p k_lambda)))`.
pub fn optimal_m(p: f64, costs: &CostModel) -> Result<PolicyResult, OptimizerError> {
    analytic::delta_baoii(1.0, p)?;
    let slope = costs.k_m + p * costs.k_lambda;
    if slope <= 0.0 {
        return Err(OptimizerError::Unbounded);
    }
    let argmin = ((2.0 * p + 1.0) / (4.0 * p * slope)).sqrt();
    Ok(PolicyResult {
        argmin,
        objective: analytic::total_cost(argmin, p, costs)?,
        method: Method::ClosedForm,
        resolution: None,
    })
}

/// `n` log-spaced points on `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Exhaustive search for `m` over `points` log-spaced rates in `range`.
pub fn grid_optimal_m(
    p: f64,
    costs: &CostModel,
    range: (f64, f64),
    points: usize,
) -> Result<PolicyResult, OptimizerError> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && points >= 2) {
        return Err(OptimizerError::Grid(format!(
            "m grid [{lo}, {hi}] with {points} points"
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    for m in log_space(lo, hi, points) {
        let c = analytic::total_cost(m, p, costs)?;
        match best {
            Some((_, bc)) if c >= bc - TIE_TOL => {}
            _ => best = Some((m, c)),
        }
    }
    let (argmin, objective) = best.expect("grid has at least two points");
    Ok(PolicyResult {
        argmin,
        objective,
        method: Method::Grid,
        resolution: Some((hi / lo).powf(1.0 / (points - 1) as f64)),
    })
}

/// Largest measurement rate at which always transmitting is still optimal,
/// `1 / (2 sqrt(k_lambda))`.
pub fn crossover_rate(k_lambda: f64) -> Result<f64, OptimizerError> {
    if !(k_lambda.is_finite() && k_lambda > 0.0) {
        return Err(AnalyticError::Domain {
            quantity: "crossover_rate",
            detail: format!("k_lambda = {k_lambda} must be > 0"),
        }
        .into());
    }
    Ok(1.0 / (2.0 * k_lambda.sqrt()))
}

/// Largest `k_m` that keeps `p = 1` optimal at rate `m` when
/// `k_lambda = eta k_m`.
pub fn max_measurement_cost(m: f64, eta: f64) -> Result<f64, OptimizerError> {
    Ok(analytic::k_m_threshold(m, eta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tx(k_lambda: f64) -> CostModel {
        CostModel::transmission_only(k_lambda).unwrap()
    }

    #[test]
    fn optimal_p_examples() {
        assert_eq!(optimal_p(1.0, &tx(0.25)).unwrap().argmin, 1.0);
        assert_eq!(optimal_p(1.0, &tx(1.0)).unwrap().argmin, 0.5);
        assert_eq!(optimal_p(1.0, &tx(0.01)).unwrap().argmin, 1.0);
        assert_eq!(optimal_p(5.0, &tx(0.0)).unwrap().argmin, 1.0);

        let g = grid_optimal_p(1.0, &tx(1.0), P_GRID_STEP).unwrap();
        assert!((g.argmin - 0.5).abs() <= P_GRID_STEP);
        assert_eq!(grid_optimal_p(1.0, &tx(0.25), P_GRID_STEP).unwrap().argmin, 1.0);
    }

    #[test]
    fn optimal_m_examples() {
        let r = optimal_m(1.0, &CostModel::new(5e-4, 1e-3).unwrap()).unwrap();
        assert!((r.argmin - 500f64.sqrt()).abs() < 1e-12);
        let r = optimal_m(0.5, &CostModel::new(1.0, 1.0).unwrap()).unwrap();
        assert!((r.argmin - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(
            optimal_m(1.0, &CostModel::new(0.0, 0.0).unwrap()),
            Err(OptimizerError::Unbounded)
        );
    }

    #[test]
    fn optimal_m_grid_agrees() {
        let costs = CostModel::new(5e-4, 1e-3).unwrap();
        let closed = optimal_m(1.0, &costs).unwrap().argmin;
        let grid = grid_optimal_m(1.0, &costs, M_GRID_RANGE, M_GRID_POINTS).unwrap();
        assert!((grid.argmin - closed).abs() / closed <= 0.01);
        // second difference of C in m is positive around m*
        let c = |m: f64| analytic::total_cost(m, 1.0, &costs).unwrap();
        let h = closed * 1e-3;
        assert!(c(closed + h) + c(closed - h) - 2.0 * c(closed) > 0.0);
    }

    #[test]
    fn crossover_examples() {
        assert!((crossover_rate(1e-3).unwrap() - 15.811_388_300_841_896).abs() < 1e-12);
        assert_eq!(crossover_rate(0.25).unwrap(), 1.0);
        assert!(crossover_rate(0.0).is_err());
    }

    #[test]
    fn max_cost_examples() {
        assert_eq!(max_measurement_cost(1.0, 2.0).unwrap(), 0.125);
        assert!((max_measurement_cost(100.0, 2.0).unwrap() - 1.25e-5).abs() < 1e-18);
        assert!((max_measurement_cost(0.1, 2.0).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(0.1, 10.0, 100);
        assert_eq!(v.len(), 100);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[99], 10.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn threshold_equivalence(m in 0.1f64..20.0, log_k in -6.0f64..1.0) {
            let k = 10f64.powf(log_k);
            let p = optimal_p(m, &tx(k)).unwrap();
            let threshold = analytic::k_lambda_threshold(m).unwrap();
            prop_assert_eq!(p.argmin == 1.0, k <= threshold);
        }

        #[test]
        fn p_grid_within_one_step(m in 0.1f64..20.0, log_k in -6.0f64..1.0, km in 0.0f64..1.0) {
            let costs = CostModel::new(km, 10f64.powf(log_k)).unwrap();
            let closed = optimal_p(m, &costs).unwrap();
            let grid = grid_optimal_p(m, &costs, P_GRID_STEP).unwrap();
            prop_assert!((closed.argmin - grid.argmin).abs() <= P_GRID_STEP + 1e-12);
        }

        #[test]
        fn m_grid_within_one_percent(p in 0.01f64..=1.0, log_km in -4.0f64..0.0, eta in 0.1f64..10.0) {
            let costs = CostModel::with_ratio(10f64.powf(log_km), eta).unwrap();
            let closed = optimal_m(p, &costs).unwrap().argmin;
            prop_assume!(closed > M_GRID_RANGE.0 * 1.05 && closed < M_GRID_RANGE.1 / 1.05);
            let grid = grid_optimal_m(p, &costs, M_GRID_RANGE, M_GRID_POINTS).unwrap();
            prop_assert!((grid.argmin - closed).abs() / closed <= 0.01);
        }

        #[test]
        fn cost_convex(m in 0.05f64..50.0, p in 0.05f64..0.95, km in 0.0f64..1.0, kl in 0.0f64..1.0) {
            let costs = CostModel::new(km, kl).unwrap();
            let c = |m: f64, p: f64| analytic::total_cost(m, p, &costs).unwrap();
            let hp = 1e-3;
            prop_assert!(c(m, p + hp) + c(m, p - hp) - 2.0 * c(m, p) >= -1e-12);
            let hm = m * 1e-3;
            prop_assert!(c(m + hm, p) + c(m - hm, p) - 2.0 * c(m, p) >= -1e-12);
        }

        #[test]
        fn optima_monotone(m in 0.05f64..50.0, k in 1e-6f64..1.0, dk in 1e-6f64..1.0, dm in 1e-3f64..10.0, p in 0.01f64..=1.0) {
            let p_base = optimal_p(m, &tx(k)).unwrap().argmin;
            prop_assert!(optimal_p(m, &tx(k + dk)).unwrap().argmin <= p_base);
            prop_assert!(optimal_p(m + dm, &tx(k)).unwrap().argmin <= p_base);
            let m_base = optimal_m(p, &CostModel::new(k, 0.5).unwrap()).unwrap().argmin;
            prop_assert!(optimal_m(p, &CostModel::new(k + dk, 0.5).unwrap()).unwrap().argmin <= m_base);
        }
    }
}
