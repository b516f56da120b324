//! Model parameters: event rates and action costs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{EntityId, Event, EventKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("drift rate must be finite and >= 0, got {0}")]
    Drift(f64),
    #[error("measurement rate m{entity} must be finite and > 0, got {value}")]
    Measurement { entity: u8, value: f64 },
    #[error("transmit probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("this computation needs p > 0")]
    NoTransmission,
    #[error("costs must be finite and >= 0, got k_m={k_m}, k_lambda={k_lambda}")]
    Cost { k_m: f64, k_lambda: f64 },
    #[error("cost ratio eta must be finite and > 0, got {0}")]
    Ratio(f64),
    #[error("k_lambda={k_lambda} disagrees with eta*k_m={expected}")]
    RatioMismatch { k_lambda: f64, expected: f64 },
}

/// Rates of the chain. Time is in seconds and rates in Hz.
///
/// Entity `i` measures itself at rate `m_i`; a fraction `p` of those
/// measurements is shared instantly, so the transmit rate is `p * m_i`.
/// Both entities drift at rate `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub d: f64,
    pub m1: f64,
    pub m2: f64,
    pub p: f64,
}

impl RateParams {
    pub fn new(d: f64, m1: f64, m2: f64, p: f64) -> Result<Self, ParamError> {
        let params = RateParams { d, m1, m2, p };
        params.validate()?;
        Ok(params)
    }

    pub fn symmetric(d: f64, m: f64, p: f64) -> Result<Self, ParamError> {
        Self::new(d, m, m, p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(ParamError::Drift(self.d));
        }
        for (entity, value) in [(1, self.m1), (2, self.m2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::Measurement { entity, value });
            }
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(ParamError::Probability(self.p));
        }
        Ok(())
    }

    /// Validity plus `p > 0`, required wherever the reset set must be
    /// reachable.
    pub fn validate_transmitting(&self) -> Result<(), ParamError> {
        self.validate()?;
        if self.p > 0.0 {
            Ok(())
        } else {
            Err(ParamError::NoTransmission)
        }
    }

    pub fn measurement_rate(&self, entity: EntityId) -> f64 {
        match entity {
            EntityId::One => self.m1,
            EntityId::Two => self.m2,
        }
    }

    /// Rate at which `event` fires in any state where it is not a no-op.
    pub fn event_rate(&self, event: Event) -> f64 {
        let m = self.measurement_rate(event.actor);
        match event.kind {
            EventKind::Drift => self.d,
            EventKind::MeasureOnly => (1.0 - self.p) * m,
            EventKind::MeasureAndTransmit => self.p * m,
        }
    }

    /// Parameters with the entity roles exchanged.
    pub fn swapped(&self) -> RateParams {
        RateParams {
            m1: self.m2,
            m2: self.m1,
            ..*self
        }
    }
}

/// Per-action costs in Mbytes, optionally tied by `k_lambda = eta * k_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub k_m: f64,
    pub k_lambda: f64,
    pub eta: Option<f64>,
}

impl CostModel {
    pub fn new(k_m: f64, k_lambda: f64) -> Result<Self, ParamError> {
        let costs = CostModel {
            k_m,
            k_lambda,
            eta: None,
        };
        costs.validate()?;
        Ok(costs)
    }

    /// `k_lambda = eta * k_m`.
    pub fn with_ratio(k_m: f64, eta: f64) -> Result<Self, ParamError> {
        let costs = CostModel {
            k_m,
            k_lambda: eta * k_m,
            eta: Some(eta),
        };
        costs.validate()?;
        Ok(costs)
    }

    /// Costs that only charge transmissions.
    pub fn transmission_only(k_lambda: f64) -> Result<Self, ParamError> {
        Self::new(0.0, k_lambda)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.k_m) && ok(self.k_lambda)) {
            return Err(ParamError::Cost {
                k_m: self.k_m,
                k_lambda: self.k_lambda,
            });
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(ParamError::Ratio(eta));
            }
            let expected = eta * self.k_m;
            if (self.k_lambda - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                return Err(ParamError::RatioMismatch {
                    k_lambda: self.k_lambda,
                    expected,
                });
            }
        }
        Ok(())
    }
}
