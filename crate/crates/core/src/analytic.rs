//! Published closed forms, evaluated exactly as printed.
//!
//! Nothing here is re-derived or corrected. Where the printed expressions
//! disagree with the numeric treatment in [`crate::ctmc`], the disagreement
//! is measured by the callers (see [`crate::experiments::validate`]).
//!
//! Divergent quantities (for example any penalty at `p = 0`) come back as
//! [`AnalyticError::Diverges`] so that sweeps can record them as `inf`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::params::{CostModel, RateParams};
use crate::state::{InfoState, StateMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("{quantity} diverges: {reason}")]
    Diverges {
        quantity: &'static str,
        reason: &'static str,
    },
    #[error("{quantity}: argument out of domain ({detail})")]
    Domain {
        quantity: &'static str,
        detail: String,
    },
    #[error("conditioning on the reset set failed: pi_O + pi_Phi = {sum} at p = {p}")]
    Conditioning { sum: f64, p: f64 },
    #[error("printed reset-time system: {0}")]
    Singular(#[from] LinalgError),
}

impl AnalyticError {
    pub fn is_divergence(&self) -> bool {
        matches!(self, AnalyticError::Diverges { .. })
    }
}

fn positive(quantity: &'static str, name: &str, v: f64) -> Result<(), AnalyticError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::Domain {
            quantity,
            detail: format!("{name} = {v} must be > 0"),
        })
    }
}

fn probability(quantity: &'static str, p: f64) -> Result<(), AnalyticError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalyticError::Domain {
            quantity,
            detail: format!("p = {p} outside [0, 1]"),
        });
    }
    if p == 0.0 {
        return Err(AnalyticError::Diverges {
            quantity,
            reason: "p = 0, the peer is never informed",
        });
    }
    Ok(())
}

/// Mean long-term BAoII `(2p + 1) / (4 p m)`.
pub fn delta_baoii(m: f64, p: f64) -> Result<f64, AnalyticError> {
    positive("delta_baoii", "m", m)?;
    probability("delta_baoii", p)?;
    Ok((2.0 * p + 1.0) / (4.0 * p * m))
}

/// Mean error period `1/m1 + 1/(2 p m2)`.
pub fn t_closed(m1: f64, m2: f64, p: f64) -> Result<f64, AnalyticError> {
    positive("T_closed", "m1", m1)?;
    positive("T_closed", "m2", m2)?;
    probability("T_closed", p)?;
    Ok(1.0 / m1 + 1.0 / (2.0 * p * m2))
}

/// Action cost rate `k_m m + k_lambda p m`.
pub fn cost_k(m: f64, p: f64, costs: &CostModel) -> Result<f64, AnalyticError> {
    positive("cost_K", "m", m)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalyticError::Domain {
            quantity: "cost_K",
            detail: format!("p = {p} outside [0, 1]"),
        });
    }
    Ok(costs.k_m * m + costs.k_lambda * p * m)
}

/// `C = (2p + 1)/(4pm) + (k_m + p k_lambda) m`.
pub fn total_cost(m: f64, p: f64, costs: &CostModel) -> Result<f64, AnalyticError> {
    positive("total_cost", "m", m)?;
    probability("total_cost", p)?;
    Ok((2.0 * p + 1.0) / (4.0 * p * m) + (costs.k_m + p * costs.k_lambda) * m)
}

/// Largest transmission cost for which always transmitting is optimal,
/// `1 / (4 m^2)`.
pub fn k_lambda_threshold(m: f64) -> Result<f64, AnalyticError> {
    positive("k_lambda_threshold", "m", m)?;
    Ok(1.0 / (4.0 * m * m))
}

/// The same threshold on the measurement cost when `k_lambda = eta k_m`.
pub fn k_m_threshold(m: f64, eta: f64) -> Result<f64, AnalyticError> {
    positive("k_m_threshold", "m", m)?;
    positive("k_m_threshold", "eta", eta)?;
    Ok(1.0 / (4.0 * eta * m * m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryClosedForm {
    pub pi_o: f64,
    pub pi_phi: f64,
    pub p_o: f64,
    pub p_phi: f64,
}

fn printed_pi(params: &RateParams) -> (f64, f64) {
    let RateParams { d, m1, m2, p } = *params;
    let q = 1.0 - p;
    let d1 = d + m1 * q * p;
    let d2 = d + m2 * q * p;
    let d3 = d + m1 - m1 * p * p;
    let pi_phi = d * m1 * m2 * q * q * p / (d1 * d2 * d3);
    let pi_o = m1 * m2 * q * q * p * p / (d1 * d2);
    (pi_o, pi_phi)
}

/// Printed `pi_O`, `pi_Phi` and the pair conditioned on the reset set.
pub fn stationary_closed_form(params: &RateParams) -> Result<StationaryClosedForm, AnalyticError> {
    params.validate().map_err(|e| AnalyticError::Domain {
        quantity: "stationary_closed_form",
        detail: e.to_string(),
    })?;
    let (pi_o, pi_phi) = printed_pi(params);
    let sum = pi_o + pi_phi;
    if !(sum.is_finite() && sum > 0.0) {
        return Err(AnalyticError::Conditioning { sum, p: params.p });
    }
    let p_o = pi_o / sum;
    Ok(StationaryClosedForm {
        pi_o,
        pi_phi,
        p_o,
        p_phi: 1.0 - p_o,
    })
}

/// `P_O` from the printed ratio `pi_Phi / pi_O = d / (p (d + m1 - m1 p^2))`,
/// in which the common `(1 - p)^2` factor has cancelled. Stays defined at
/// `p = 1`, where both printed probabilities vanish.
pub fn printed_reset_split(params: &RateParams) -> Result<(f64, f64), AnalyticError> {
    let RateParams { d, m1, p, .. } = *params;
    probability("printed_reset_split", p)?;
    let denom = p * (d + m1 - m1 * p * p);
    let p_o = denom / (denom + d);
    if !p_o.is_finite() {
        return Err(AnalyticError::Conditioning { sum: 0.0, p });
    }
    Ok((p_o, 1.0 - p_o))
}

/// Reset times of the seven error states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetTimes {
    pub theta: f64,
    pub f: f64,
    pub b: f64,
    pub gamma: f64,
    pub a: f64,
    pub psi: f64,
    pub e: f64,
}

impl ResetTimes {
    pub const STATES: [InfoState; 7] = [
        InfoState::Theta,
        InfoState::F,
        InfoState::B,
        InfoState::Gamma,
        InfoState::A,
        InfoState::Psi,
        InfoState::E,
    ];

    pub fn get(&self, s: InfoState) -> f64 {
        match s {
            InfoState::Theta => self.theta,
            InfoState::F => self.f,
            InfoState::B => self.b,
            InfoState::Gamma => self.gamma,
            InfoState::A => self.a,
            InfoState::Psi => self.psi,
            InfoState::E => self.e,
            InfoState::O | InfoState::Phi => 0.0,
        }
    }

    pub fn to_state_map(&self) -> StateMap<f64> {
        let mut out = StateMap::splat(0.0);
        for s in Self::STATES {
            out[s] = self.get(s);
        }
        out
    }
}

/// The seven printed rational functions for the reset times.
pub fn tau_closed_forms(params: &RateParams) -> Result<ResetTimes, AnalyticError> {
    params.validate().map_err(|e| AnalyticError::Domain {
        quantity: "tau_closed_forms",
        detail: e.to_string(),
    })?;
    probability("tau_closed_forms", params.p)?;
    let RateParams { d, m1, m2, p } = *params;
    let den = p * m1 * m2 * (p * m2 + 2.0 * d + m1);
    let shared = (2.0 * p * d * m2 + p * m1 * m2 + d * m1 + m1 * m1) / den;
    let a = (2.0 * p * p * m2 * m2 + 2.0 * p * d * m2 + 2.0 * p * m1 * m2 + d * m1) / den;
    let psi_e = (2.0 * p * p * m2 * m2 + 2.0 * p * d * m2 + d * m1 + m1 * m1) / den;
    Ok(ResetTimes {
        theta: shared,
        f: shared,
        b: shared,
        gamma: shared,
        a,
        psi: psi_e,
        e: psi_e,
    })
}

/// Solves the printed linear system for the reset times, row for row as
/// typeset. The `A` row carries a constant of `2/(d+m1)`, the `E` and `Psi`
/// rows carry no constant, and the `Psi` row mixes two denominators.
pub fn solve_printed_tau_system(params: &RateParams) -> Result<ResetTimes, AnalyticError> {
    params.validate().map_err(|e| AnalyticError::Domain {
        quantity: "solve_printed_tau_system",
        detail: e.to_string(),
    })?;
    probability("solve_printed_tau_system", params.p)?;
    let RateParams { d, m1, m2, p } = *params;
    let q = 1.0 - p;

    // unknown order
    const A: usize = 0;
    const G: usize = 1;
    const E: usize = 2;
    const F: usize = 3;
    const PSI: usize = 4;
    const B: usize = 5;
    const TH: usize = 6;

    // each row: tau_row - sum coeff * tau_col = constant
    type Row = (usize, f64, Vec<(usize, f64)>);
    let mut rows: Vec<Row> = Vec::with_capacity(7);

    let r = d + m1;
    rows.push((A, 2.0 / r, vec![(E, d / r)]));

    let r = m2 + d + p * m1;
    rows.push((
        G,
        1.0 / r,
        vec![(F, q * m2 / r), (E, d / r), (B, p * m1 / r)],
    ));

    let r = m1 + m2;
    rows.push((
        E,
        0.0,
        vec![
            (B, p * m1 / r),
            (G, q * m1 / r),
            (A, p * m2 / r),
            (PSI, q * m2 / r),
        ],
    ));

    let r = p * m1 + p * m2 + 2.0 * d;
    rows.push((
        F,
        1.0 / r,
        vec![(TH, p * m1 / r), (G, d / r), (PSI, d / r)],
    ));

    let r_mixed = m1 + d + p * m2;
    rows.push((
        PSI,
        0.0,
        vec![
            (TH, p * m1 / r_mixed),
            (F, q * m1 / r),
            (E, d / r),
            (A, p * m2 / r),
        ],
    ));

    let r = m2 + d;
    rows.push((B, 1.0 / r, vec![(TH, q * m2 / r), (E, d / r)]));

    let r = p * m2 + 2.0 * d;
    rows.push((TH, 1.0 / r, vec![(B, d / r), (PSI, d / r)]));

    let mut a = vec![vec![0.0; 7]; 7];
    let mut b = vec![0.0; 7];
    for (i, (unknown, constant, terms)) in rows.into_iter().enumerate() {
        a[i][unknown] += 1.0;
        for (col, coeff) in terms {
            a[i][col] -= coeff;
        }
        b[i] = constant;
    }
    let x = linalg::solve(&a, &b)?;
    Ok(ResetTimes {
        a: x[A],
        gamma: x[G],
        e: x[E],
        f: x[F],
        psi: x[PSI],
        b: x[B],
        theta: x[TH],
    })
}

/// Cycle time assembled from printed reset times:
/// `P_O (s_OA tau_A + s_OB tau_B) + P_Phi (s_PhiA tau_A + s_PhiGamma tau_Gamma)`
/// with every jump probability `1/2` and `P` from [`printed_reset_split`].
pub fn assemble_cycle_time(params: &RateParams, tau: &ResetTimes) -> Result<f64, AnalyticError> {
    let (p_o, p_phi) = printed_reset_split(params)?;
    Ok(p_o * (0.5 * tau.a + 0.5 * tau.b) + p_phi * (0.5 * tau.a + 0.5 * tau.gamma))
}

/// Every printed quantity at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub params: RateParams,
    pub costs: CostModel,
    pub delta_baoii: f64,
    pub t: f64,
    pub pi_o: f64,
    pub pi_phi: f64,
    /// `NaN` where the printed probabilities cannot be conditioned.
    pub p_o: f64,
    pub p_phi: f64,
    pub tau: ResetTimes,
    pub k: f64,
    pub c: f64,
}

fn or_inf(r: Result<f64, AnalyticError>) -> Result<f64, AnalyticError> {
    match r {
        Err(e) if e.is_divergence() => Ok(f64::INFINITY),
        other => other,
    }
}

impl ClosedFormReport {
    /// Uses `m1` as the measurement rate in the single-rate formulas.
    pub fn evaluate(params: &RateParams, costs: &CostModel) -> Result<Self, AnalyticError> {
        let m = params.m1;
        let (pi_o, pi_phi) = printed_pi(params);
        let (p_o, p_phi) = match stationary_closed_form(params) {
            Ok(s) => (s.p_o, s.p_phi),
            Err(AnalyticError::Conditioning { .. }) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        let tau = match tau_closed_forms(params) {
            Ok(t) => t,
            Err(e) if e.is_divergence() => ResetTimes {
                theta: f64::INFINITY,
                f: f64::INFINITY,
                b: f64::INFINITY,
                gamma: f64::INFINITY,
                a: f64::INFINITY,
                psi: f64::INFINITY,
                e: f64::INFINITY,
            },
            Err(e) => return Err(e),
        };
        Ok(ClosedFormReport {
            params: *params,
            costs: *costs,
            delta_baoii: or_inf(delta_baoii(m, params.p))?,
            t: or_inf(t_closed(params.m1, params.m2, params.p))?,
            pi_o,
            pi_phi,
            p_o,
            p_phi,
            tau,
            k: cost_k(m, params.p, costs)?,
            c: or_inf(total_cost(m, params.p, costs))?,
        })
    }

    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("d", self.params.d),
            ("m1", self.params.m1),
            ("m2", self.params.m2),
            ("p", self.params.p),
            ("k_m", self.costs.k_m),
            ("k_lambda", self.costs.k_lambda),
            ("delta_baoii", self.delta_baoii),
            ("T", self.t),
            ("pi_O", self.pi_o),
            ("pi_Phi", self.pi_phi),
            ("P_O", self.p_o),
            ("P_Phi", self.p_phi),
            ("tau_Theta", self.tau.theta),
            ("tau_F", self.tau.f),
            ("tau_B", self.tau.b),
            ("tau_Gamma", self.tau.gamma),
            ("tau_A", self.tau.a),
            ("tau_Psi", self.tau.psi),
            ("tau_E", self.tau.e),
            ("K", self.k),
            ("C", self.c),
        ]
    }

    /// `key = value`, one per line.
    pub fn to_text(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Header line and one data line.
    pub fn to_csv(&self) -> String {
        let fields = self.fields();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(fields.iter().map(|(k, _)| *k))
            .expect("in-memory write");
        w.write_record(fields.iter().map(|(_, v)| v.to_string()))
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(d: f64, m: f64, p: f64) -> RateParams {
        RateParams::symmetric(d, m, p).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_baoii(1.0, 1.0).unwrap(), 0.75);
        assert_eq!(delta_baoii(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(delta_baoii(2.0, 1.0).unwrap(), 0.375);
        assert!(delta_baoii(1.0, 0.0).unwrap_err().is_divergence());
        assert!(!delta_baoii(0.0, 1.0).unwrap_err().is_divergence());
    }

    #[test]
    fn printed_stationary() {
        let s = stationary_closed_form(&sym(1.0, 1.0, 0.5)).unwrap();
        assert!(rel(s.pi_o, 0.04) < 1e-15);
        assert!(rel(s.pi_phi, 0.125 / 2.734375) < 1e-15);
        assert!((s.p_o + s.p_phi - 1.0).abs() < 1e-15);
        assert!(matches!(
            stationary_closed_form(&sym(1.0, 1.0, 1.0)),
            Err(AnalyticError::Conditioning { .. })
        ));
        // the cancelled ratio is still defined at p = 1
        let (p_o, _) = printed_reset_split(&sym(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(p_o, 0.5);
        let (p_o, _) = printed_reset_split(&sym(1.0, 1.0, 0.5)).unwrap();
        assert!(rel(p_o, s.p_o) < 1e-12);
    }

    #[test]
    fn printed_taus_at_unit_point() {
        let t = tau_closed_forms(&sym(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(t.a, 1.75);
        for v in [t.b, t.gamma, t.theta, t.f] {
            assert_eq!(v, 1.25);
        }
        assert_eq!(t.e, 1.5);
        assert_eq!(t.psi, 1.5);

        // the p = 1 reductions quoted alongside the closed forms
        let (d, m) = (0.3, 1.7);
        let t = tau_closed_forms(&sym(d, m, 1.0)).unwrap();
        assert!(rel(t.a, (4.0 * m + 3.0 * d) / (2.0 * m * (m + d))) < 1e-14);
        assert!(rel(t.b, (2.0 * m + 3.0 * d) / (2.0 * m * (m + d))) < 1e-14);
        assert!(rel(t.e, 3.0 / (2.0 * m)) < 1e-14);
    }

    #[test]
    fn printed_system_at_unit_point() {
        // exact rational solve of the typeset system
        let s = solve_printed_tau_system(&sym(1.0, 1.0, 1.0)).unwrap();
        let c = tau_closed_forms(&sym(1.0, 1.0, 1.0)).unwrap();
        for st in [InfoState::A, InfoState::B, InfoState::Gamma, InfoState::E] {
            assert!(rel(s.get(st), c.get(st)) < 1e-12, "{st}");
        }
        assert!(rel(s.theta, 147.0 / 128.0) < 1e-12);
        assert!(rel(s.f, 147.0 / 128.0) < 1e-12);
        assert!(rel(s.psi, 153.0 / 128.0) < 1e-12);
        assert!(rel(s.theta, c.theta) > 0.05);
    }

    #[test]
    fn printed_system_reduced_forms_at_full_transmission() {
        for (d, m) in [(0.1, 0.5), (1.0, 2.0), (10.0, 1.0)] {
            let s = solve_printed_tau_system(&sym(d, m, 1.0)).unwrap();
            assert!(rel(s.e, 3.0 / (2.0 * m)) < 1e-12);
            assert!(rel(s.a, (2.0 * m + 1.5 * d) / (m * (m + d))) < 1e-12);
        }
    }

    #[test]
    fn printed_system_off_unit_point() {
        // exact solve at d = m = 1, p = 1/2
        let s = solve_printed_tau_system(&sym(1.0, 1.0, 0.5)).unwrap();
        assert!(rel(s.a, 1.882_822_902_796_271_7) < 1e-12);
        assert!(rel(s.e, 1.765_645_805_592_543_2) < 1e-12);
        assert!(rel(s.psi, 1.541_944_074_567_243_7) < 1e-12);
    }

    #[test]
    fn t_closed_examples() {
        assert_eq!(t_closed(1.0, 1.0, 1.0).unwrap(), 1.5);
        assert_eq!(t_closed(2.0, 4.0, 0.5).unwrap(), 0.75);
        assert!(t_closed(1.0, 1.0, 0.0).unwrap_err().is_divergence());
        assert!(t_closed(1.0, 1.0, 1e-9).unwrap() > 1e8);
    }

    #[test]
    fn cost_examples() {
        let unit = CostModel::new(1.0, 1.0).unwrap();
        assert_eq!(cost_k(10.0, 0.5, &unit).unwrap(), 15.0);
        let free = CostModel::new(0.0, 0.0).unwrap();
        assert_eq!(cost_k(3.0, 0.2, &free).unwrap(), 0.0);
        let preset = CostModel::new(5e-4, 1e-3).unwrap();
        assert!(rel(cost_k(1.0, 1.0, &preset).unwrap(), 1.5e-3) < 1e-15);

        assert_eq!(total_cost(1.0, 1.0, &free).unwrap(), 0.75);
        assert!(rel(total_cost(10.0, 1.0, &preset).unwrap(), 0.09) < 1e-14);
        assert!(total_cost(1.0, 0.0, &preset).unwrap_err().is_divergence());
    }

    #[test]
    fn thresholds() {
        assert_eq!(k_lambda_threshold(1.0).unwrap(), 0.25);
        assert!(rel(k_lambda_threshold(10.0).unwrap(), 2.5e-3) < 1e-15);
        assert_eq!(k_m_threshold(1.0, 2.0).unwrap(), 0.125);
        assert!(rel(k_m_threshold(10.0, 2.0).unwrap(), 1.25e-3) < 1e-15);
        assert!(k_m_threshold(1.0, 0.0).is_err());
    }

    #[test]
    fn report_serializations() {
        let r = ClosedFormReport::evaluate(&sym(1.0, 1.0, 1.0), &CostModel::new(5e-4, 1e-3).unwrap())
            .unwrap();
        assert!(r.p_o.is_nan());
        let text = r.to_text();
        assert!(text.contains("delta_baoii = 0.75\n"));
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0].split(',').count(),
            lines[1].split(',').count()
        );

        let r0 = ClosedFormReport::evaluate(&sym(1.0, 1.0, 0.0), &CostModel::new(0.0, 0.0).unwrap())
            .unwrap();
        assert!(r0.delta_baoii.is_infinite() && r0.c.is_infinite());
    }

    proptest! {
        #[test]
        fn delta_is_half_cycle(m in 0.01f64..100.0, p in 0.001f64..=1.0) {
            let lhs = delta_baoii(m, p).unwrap();
            let rhs = t_closed(m, m, p).unwrap() / 2.0;
            prop_assert!(rel(lhs, rhs) <= 1e-14);
        }

        #[test]
        fn delta_decreasing(m in 0.01f64..100.0, p in 0.001f64..0.99, dm in 1e-3f64..10.0, dp in 1e-3f64..0.5) {
            let base = delta_baoii(m, p).unwrap();
            prop_assert!(delta_baoii(m + dm, p).unwrap() < base);
            prop_assert!(delta_baoii(m, (p + dp).min(1.0)).unwrap() < base);
        }

        #[test]
        fn total_cost_decomposes(m in 0.01f64..100.0, p in 0.001f64..=1.0, km in 0.0f64..1.0, kl in 0.0f64..1.0) {
            let costs = CostModel::new(km, kl).unwrap();
            let total = total_cost(m, p, &costs).unwrap();
            let parts = delta_baoii(m, p).unwrap() + cost_k(m, p, &costs).unwrap();
            prop_assert!((total - parts).abs() <= 1e-12 * total);
        }

        #[test]
        fn printed_cycle_time_is_closed_form(d in 0.01f64..10.0, m in 0.05f64..10.0, p in 0.01f64..=1.0) {
            let params = sym(d, m, p);
            let tau = tau_closed_forms(&params).unwrap();
            let t = assemble_cycle_time(&params, &tau).unwrap();
            prop_assert!(rel(t, t_closed(m, m, p).unwrap()) <= 1e-9);
        }

        #[test]
        fn threshold_decreasing(m in 0.01f64..100.0, dm in 1e-3f64..10.0) {
            prop_assert!(k_lambda_threshold(m + dm).unwrap() < k_lambda_threshold(m).unwrap());
            prop_assert_eq!(k_m_threshold(m, 1.0).unwrap(), k_lambda_threshold(m).unwrap());
        }
    }
}
