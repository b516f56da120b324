//! Scenario files: flat `key = value` text with `#` comments.
//!
//! Recognised keys:
//!
//! | key | meaning |
//! |---|---|
//! | `preset` | `high-immersion`, `social-vr` or `smart-city`, applied first |
//! | `d`, `m`, `m1`, `m2`, `p` | rates; `m` sets both measurement rates |
//! | `k_m`, `k_lambda`, `eta` | costs in Mbytes; `eta` alone sets `k_lambda = eta k_m` |
//! | `seed`, `cycles`, `horizon`, `warmup`, `viewer`, `events` | simulation |
//! | `output` | output directory |
//! | `sweep`, `from`, `to`, `points`, `spacing`, `quantity` | custom sweep |

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{input, ExperimentError};
use crate::params::{CostModel, RateParams};
use crate::simulator::{SimConfig, StopRule};
use crate::state::EntityId;

pub const DEFAULT_CYCLES: u64 = 100_000;

/// Illustrative operating points inside the application requirement ranges.
/// Drift is set to a tenth of the measurement rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Surgical tracking and haptics: 100 Hz, 500 B measurements, 1 kB
    /// transmissions.
    HighImmersion,
    /// Avatar tracking: 60 Hz (middle of 30-90 Hz), 300 B / 600 B.
    SocialVr,
    /// City sensors: 10 Hz (log-middle of 1-100 Hz), 200 B / 400 B.
    SmartCity,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::HighImmersion, Preset::SocialVr, Preset::SmartCity];

    pub fn name(self) -> &'static str {
        match self {
            Preset::HighImmersion => "high-immersion",
            Preset::SocialVr => "social-vr",
            Preset::SmartCity => "smart-city",
        }
    }

    /// `(m, d, k_m, k_lambda)`.
    pub fn values(self) -> (f64, f64, f64, f64) {
        match self {
            Preset::HighImmersion => (100.0, 10.0, 5e-4, 1e-3),
            Preset::SocialVr => (60.0, 6.0, 3e-4, 6e-4),
            Preset::SmartCity => (10.0, 1.0, 2e-4, 4e-4),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| input(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "linear" | "lin" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(input(format!("spacing must be linear or log, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl SweepAxis {
    pub const NAMES: [&'static str; 8] = ["d", "m", "m1", "m2", "p", "k_m", "k_lambda", "eta"];

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !Self::NAMES.contains(&self.name.as_str()) {
            return Err(input(format!(
                "unknown sweep axis {:?}; expected one of {}",
                self.name,
                Self::NAMES.join(", ")
            )));
        }
        if self.points == 0 || !self.from.is_finite() || !self.to.is_finite() {
            return Err(input("sweep range must be finite with at least one point"));
        }
        if self.spacing == Spacing::Log && !(self.from > 0.0 && self.to > 0.0) {
            return Err(input("log spacing needs a positive range"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.from];
        }
        match self.spacing {
            Spacing::Log => crate::optimizer::log_space(self.from, self.to, n),
            Spacing::Linear => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.to
                    } else {
                        self.from + (self.to - self.from) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub preset: Option<Preset>,
    pub d: f64,
    pub m1: f64,
    pub m2: f64,
    pub p: f64,
    pub k_m: f64,
    pub k_lambda: Option<f64>,
    pub eta: Option<f64>,
    pub seed: u64,
    pub cycles: Option<u64>,
    pub horizon: Option<f64>,
    pub warmup: Option<f64>,
    pub viewer: EntityId,
    pub events: bool,
    pub output: Option<PathBuf>,
    pub axis: Option<SweepAxis>,
    pub quantity: Option<String>,
}

impl Default for Scenario {
    /// `d = m = p = 1` with the high-immersion costs.
    fn default() -> Self {
        Scenario {
            preset: None,
            d: 1.0,
            m1: 1.0,
            m2: 1.0,
            p: 1.0,
            k_m: 5e-4,
            k_lambda: Some(1e-3),
            eta: None,
            seed: 1,
            cycles: None,
            horizon: None,
            warmup: None,
            viewer: EntityId::One,
            events: false,
            output: None,
            axis: None,
            quantity: None,
        }
    }
}

#[derive(Default)]
struct AxisDraft {
    name: Option<String>,
    from: Option<f64>,
    to: Option<f64>,
    points: Option<usize>,
    spacing: Option<Spacing>,
}

/// `key = value` pairs with the line they came from (0 for overrides).
fn pairs(text: &str) -> Result<Vec<(usize, String, String)>, ExperimentError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| input(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ExperimentError> {
    v.parse().map_err(|_| {
        let at = if line == 0 {
            "override".to_string()
        } else {
            format!("line {line}")
        };
        input(format!("{at}: bad value {v:?} for {key}"))
    })
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        Self::parse_with(text, &[])
    }

    /// File contents, then `key=value` overrides.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<Self, ExperimentError> {
        let s = Self::parse_unchecked(text, overrides)?;
        s.validate()?;
        Ok(s)
    }

    /// Like [`Scenario::parse_with`] but leaves cross-key checks (stop rule
    /// against rates, cycles against horizon) to a later
    /// [`Scenario::validate`], so callers can adjust fields first.
    pub fn parse_unchecked(text: &str, overrides: &[String]) -> Result<Self, ExperimentError> {
        let mut all = pairs(text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| input(format!("override {o:?} is not key=value")))?;
            all.push((0, k.trim().to_string(), v.trim().to_string()));
        }
        let mut s = Scenario::default();
        if let Some((_, _, v)) = all.iter().rev().find(|(_, k, _)| k == "preset") {
            s.apply_preset(v.parse()?);
        }
        let mut axis: Option<AxisDraft> = None;
        for (line, k, v) in &all {
            let (line, v) = (*line, v.as_str());
            match k.as_str() {
                "preset" => {}
                "d" => s.d = num(line, k, v)?,
                "m" => {
                    s.m1 = num(line, k, v)?;
                    s.m2 = s.m1;
                }
                "m1" => s.m1 = num(line, k, v)?,
                "m2" => s.m2 = num(line, k, v)?,
                "p" => s.p = num(line, k, v)?,
                "k_m" => s.k_m = num(line, k, v)?,
                "k_lambda" => s.k_lambda = Some(num(line, k, v)?),
                "eta" => {
                    s.eta = Some(num(line, k, v)?);
                    if !all.iter().any(|(_, k2, _)| k2 == "k_lambda") {
                        s.k_lambda = None;
                    }
                }
                "seed" => s.seed = num(line, k, v)?,
                "cycles" => s.cycles = Some(num::<f64>(line, k, v).and_then(|c| {
                    if c >= 1.0 && c.fract() == 0.0 && c <= u64::MAX as f64 {
                        Ok(c as u64)
                    } else {
                        Err(input(format!("cycles must be a positive integer, got {v}")))
                    }
                })?),
                "horizon" => s.horizon = Some(num(line, k, v)?),
                "warmup" => s.warmup = Some(num(line, k, v)?),
                "viewer" => s.viewer = v.parse().map_err(input)?,
                "events" => s.events = num(line, k, v)?,
                "output" => s.output = Some(PathBuf::from(v)),
                "quantity" => s.quantity = Some(v.to_string()),
                "sweep" => axis.get_or_insert_with(AxisDraft::default).name = Some(v.to_string()),
                "from" => axis.get_or_insert_with(AxisDraft::default).from = Some(num(line, k, v)?),
                "to" => axis.get_or_insert_with(AxisDraft::default).to = Some(num(line, k, v)?),
                "points" => axis.get_or_insert_with(AxisDraft::default).points = Some(num(line, k, v)?),
                "spacing" => axis.get_or_insert_with(AxisDraft::default).spacing = Some(v.parse()?),
                other => {
                    let at = if line == 0 {
                        "override".to_string()
                    } else {
                        format!("line {line}")
                    };
                    return Err(input(format!("{at}: unknown key {other:?}")));
                }
            }
        }
        if let Some(draft) = axis {
            let missing = |what: &str| input(format!("custom sweep needs `{what}`"));
            let a = SweepAxis {
                name: draft.name.filter(|n| !n.is_empty()).ok_or_else(|| missing("sweep"))?,
                from: draft.from.ok_or_else(|| missing("from"))?,
                to: draft.to.ok_or_else(|| missing("to"))?,
                points: draft.points.unwrap_or(100),
                spacing: draft.spacing.unwrap_or(Spacing::Linear),
            };
            a.validate()?;
            s.axis = Some(a);
        }
        Ok(s)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ExperimentError> {
        let s = Self::load_unchecked(path, overrides)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load_unchecked(path: Option<&Path>, overrides: &[String]) -> Result<Self, ExperimentError> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| input(format!("cannot read scenario {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse_unchecked(&text, overrides)
    }

    fn apply_preset(&mut self, preset: Preset) {
        let (m, d, k_m, k_lambda) = preset.values();
        self.preset = Some(preset);
        self.m1 = m;
        self.m2 = m;
        self.d = d;
        self.p = 1.0;
        self.k_m = k_m;
        self.k_lambda = Some(k_lambda);
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.params()?;
        self.costs()?;
        if self.cycles.is_some() && self.horizon.is_some() {
            return Err(input("set either cycles or horizon, not both"));
        }
        self.sim_config()?.validate().map_err(input)?;
        Ok(())
    }

    pub fn params(&self) -> Result<RateParams, ExperimentError> {
        RateParams::new(self.d, self.m1, self.m2, self.p).map_err(input)
    }

    pub fn costs(&self) -> Result<CostModel, ExperimentError> {
        match (self.k_lambda, self.eta) {
            (Some(kl), None) => CostModel::new(self.k_m, kl),
            (None, Some(eta)) => CostModel::with_ratio(self.k_m, eta),
            (Some(kl), Some(eta)) => {
                let c = CostModel {
                    k_m: self.k_m,
                    k_lambda: kl,
                    eta: Some(eta),
                };
                c.validate().map(|_| c)
            }
            (None, None) => CostModel::new(self.k_m, 0.0),
        }
        .map_err(input)
    }

    pub fn stop(&self) -> StopRule {
        match (self.horizon, self.cycles) {
            (Some(h), _) => StopRule::Horizon(h),
            (None, Some(n)) => StopRule::Cycles(n),
            (None, None) => StopRule::Cycles(DEFAULT_CYCLES),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig, ExperimentError> {
        Ok(SimConfig {
            params: self.params()?,
            seed: self.seed,
            stop: self.stop(),
            warmup: self.warmup,
            viewer: self.viewer,
            record_events: self.events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s = Scenario::parse("").unwrap();
        assert_eq!(s.params().unwrap(), RateParams::symmetric(1.0, 1.0, 1.0).unwrap());
        assert_eq!(s.stop(), StopRule::Cycles(DEFAULT_CYCLES));
        let s = Scenario::parse_with("d = 2 # drift\nm=3\n\nseed=9\n", &["m2=4".into()]).unwrap();
        assert_eq!((s.d, s.m1, s.m2, s.seed), (2.0, 3.0, 4.0, 9));
        let s = Scenario::parse("horizon = 10\ncycles = 1e3\n");
        assert!(s.is_err());
        assert_eq!(Scenario::parse("cycles = 1e3").unwrap().stop(), StopRule::Cycles(1000));
    }

    #[test]
    fn presets_apply_first() {
        let s = Scenario::parse("p = 0.5\npreset = social-vr\n").unwrap();
        assert_eq!(s.preset, Some(Preset::SocialVr));
        assert_eq!((s.m1, s.d, s.p), (60.0, 6.0, 0.5));
        let c = s.costs().unwrap();
        assert_eq!((c.k_m, c.k_lambda), (3e-4, 6e-4));
        for p in Preset::ALL {
            let s = Scenario::parse(&format!("preset={p}")).unwrap();
            let c = s.costs().unwrap();
            assert!((c.k_lambda / c.k_m - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cost_ratio_keys() {
        let s = Scenario::parse("k_m = 0.01\neta = 3\n").unwrap();
        assert!((s.costs().unwrap().k_lambda - 0.03).abs() < 1e-15);
        assert!(Scenario::parse("k_m = 0.01\neta = 3\nk_lambda = 1\n").is_err());
    }

    #[test]
    fn input_errors_name_the_line() {
        let e = Scenario::parse("d = 1\nbogus = 2\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = Scenario::parse("d = x\n").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        assert!(Scenario::parse("p = 1.5").is_err());
        assert!(Scenario::parse("p = 0").is_err());
        assert!(Scenario::parse("p = 0\nhorizon = 10").is_ok());
        assert!(Scenario::parse("preset = moon").is_err());
        assert!(Scenario::parse("justtext").is_err());
    }

    #[test]
    fn custom_axis() {
        let s = Scenario::parse("sweep = m\nfrom = 1\nto = 100\npoints = 3\nspacing = log\nquantity = delta_baoii").unwrap();
        let a = s.axis.unwrap();
        let v = a.values();
        assert_eq!((v.len(), v[0], v[2]), (3, 1.0, 100.0));
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert!(Scenario::parse("sweep = q\nfrom = 1\nto = 2").is_err());
        assert!(Scenario::parse("sweep = m\nfrom = 0\nto = 2\nspacing = log").is_err());
        assert!(Scenario::parse("from = 0\nto = 2").is_err());
        let lin = SweepAxis {
            name: "p".into(),
            from: 0.1,
            to: 1.0,
            points: 10,
            spacing: Spacing::Linear,
        };
        assert_eq!(lin.values()[9], 1.0);
    }
}
