//! Numeric treatment of the nine-state chain.
//!
//! The generator is derived by applying every event to every state, so the
//! model follows from the event semantics in [`crate::state`] rather than
//! from a transcribed edge list. The transcribed diagram lives in
//! [`fixture`] and is only used to check the derivation.
//!
//! Everything else here is plain linear algebra on the 9x9 generator:
//! stationary distribution, embedded jump chain, mean first-passage times,
//! and the mean error period assembled from them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
pub use crate::params::RateParams;
use crate::params::ParamError;
use crate::state::{
    apply_event, is_reset_state, reset_states, EntityId, Event, InfoState, StateMap, STATE_COUNT,
};

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("chain has {0} closed classes, stationary distribution is not unique")]
    NotUnique(usize),
    #[error("target set is empty")]
    EmptyTargets,
    #[error("target set is unreachable from state {0}, hitting time diverges")]
    Unreachable(InfoState),
    #[error("{what}: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },
    #[error("drift rate is zero, the reset set is never left")]
    NoErrors,
}

/// One non-trivial effect of an event on a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: InfoState,
    pub to: InfoState,
    pub event: Event,
    pub rate: f64,
}

/// All event applications that change the state, in canonical state order
/// then event order. Zero-rate transitions are dropped.
pub fn transitions(params: &RateParams) -> Vec<Transition> {
    InfoState::ALL
        .into_iter()
        .flat_map(|from| {
            Event::all().filter_map(move |event| {
                let to = apply_event(from, event);
                let rate = params.event_rate(event);
                (to != from && rate > 0.0).then_some(Transition {
                    from,
                    to,
                    event,
                    rate,
                })
            })
        })
        .collect()
}

/// Transition-rate matrix indexed by canonical state order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub q: [[f64; STATE_COUNT]; STATE_COUNT],
}

impl GeneratorMatrix {
    pub fn rate(&self, from: InfoState, to: InfoState) -> f64 {
        self.q[from.index()][to.index()]
    }

    /// Total rate of leaving `s`.
    pub fn exit_rate(&self, s: InfoState) -> f64 {
        InfoState::ALL
            .into_iter()
            .filter(|&t| t != s)
            .map(|t| self.rate(s, t))
            .sum()
    }

    /// Off-diagonal entries with positive rate.
    pub fn edges(&self) -> Vec<(InfoState, InfoState, f64)> {
        let mut out = Vec::new();
        for from in InfoState::ALL {
            for to in InfoState::ALL {
                let r = self.rate(from, to);
                if from != to && r > 0.0 {
                    out.push((from, to, r));
                }
            }
        }
        out
    }

    /// Largest absolute row sum, relative to the largest exit rate.
    pub fn max_row_sum_error(&self) -> f64 {
        let scale = InfoState::ALL
            .into_iter()
            .map(|s| self.exit_rate(s))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        self.q
            .iter()
            .map(|row| row.iter().sum::<f64>().abs() / scale)
            .fold(0.0, f64::max)
    }

    /// `reach[i][j]`: `j` can be reached from `i` along positive-rate edges
    /// (every state reaches itself).
    pub fn reachability(&self) -> [[bool; STATE_COUNT]; STATE_COUNT] {
        let mut reach = [[false; STATE_COUNT]; STATE_COUNT];
        for (i, row) in reach.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = i == j || (self.q[i][j] > 0.0);
            }
        }
        for k in 0..STATE_COUNT {
            for i in 0..STATE_COUNT {
                if reach[i][k] {
                    for j in 0..STATE_COUNT {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        reach
    }

    /// Closed communicating classes, each in canonical order.
    pub fn closed_classes(&self) -> Vec<Vec<InfoState>> {
        let reach = self.reachability();
        let mut seen = [false; STATE_COUNT];
        let mut classes = Vec::new();
        for i in 0..STATE_COUNT {
            if seen[i] {
                continue;
            }
            let class: Vec<usize> = (0..STATE_COUNT)
                .filter(|&j| reach[i][j] && reach[j][i])
                .collect();
            for &j in &class {
                seen[j] = true;
            }
            let closed = (0..STATE_COUNT).all(|j| !reach[i][j] || class.contains(&j));
            if closed {
                classes.push(class.into_iter().map(|j| InfoState::ALL[j]).collect());
            }
        }
        classes
    }

    /// Row-major CSV with a leading `from` column.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["from".to_string()];
        header.extend(InfoState::ALL.iter().map(|s| s.name().to_string()));
        w.write_record(&header).expect("in-memory write");
        for s in InfoState::ALL {
            let mut rec = vec![s.name().to_string()];
            rec.extend(self.q[s.index()].iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Generator obtained from the event semantics. Coincident transitions are
/// summed and no-ops discarded.
pub fn build_generator(params: &RateParams) -> Result<GeneratorMatrix, CtmcError> {
    params.validate()?;
    let mut q = [[0.0; STATE_COUNT]; STATE_COUNT];
    for t in transitions(params) {
        q[t.from.index()][t.to.index()] += t.rate;
    }
    for (i, row) in q.iter_mut().enumerate() {
        let out: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .sum();
        row[i] = -out;
    }
    Ok(GeneratorMatrix { q })
}

/// Probability vector over the nine states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution(pub StateMap<f64>);

impl Distribution {
    pub fn get(&self, s: InfoState) -> f64 {
        self.0[s]
    }

    pub fn total(&self) -> f64 {
        self.0 .0.iter().sum()
    }

    /// `max_j |(pi Q)_j|`
    pub fn balance_residual(&self, gen: &GeneratorMatrix) -> f64 {
        (0..STATE_COUNT)
            .map(|j| {
                (0..STATE_COUNT)
                    .map(|i| self.0 .0[i] * gen.q[i][j])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(InfoState::ALL.iter().map(|s| s.name()))
            .expect("in-memory write");
        w.write_record(self.0 .0.iter().map(|v| v.to_string()))
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Unique `pi` with `pi Q = 0` and unit mass.
///
/// The balance equations are solved on the single closed class with one
/// equation replaced by normalization; transient states get zero mass.
pub fn stationary(gen: &GeneratorMatrix) -> Result<Distribution, CtmcError> {
    let classes = gen.closed_classes();
    if classes.len() != 1 {
        return Err(CtmcError::NotUnique(classes.len()));
    }
    let class = &classes[0];
    let n = class.len();
    let mut pi = StateMap::splat(0.0);
    if n == 1 {
        pi[class[0]] = 1.0;
        return Ok(Distribution(pi));
    }

    // Q_c^T pi_c = 0, last row swapped for sum(pi_c) = 1
    let mut a = vec![vec![0.0; n]; n];
    for (r, &to) in class.iter().enumerate() {
        for (c, &from) in class.iter().enumerate() {
            a[r][c] = gen.rate(from, to);
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let x = linalg::solve(&a, &b)?;

    for (&s, &v) in class.iter().zip(&x) {
        if v < -1e-12 {
            return Err(CtmcError::Residual {
                what: "stationary mass",
                residual: v,
                tolerance: 1e-12,
            });
        }
        pi[s] = v.max(0.0);
    }
    let total: f64 = pi.0.iter().sum();
    for v in pi.0.iter_mut() {
        *v /= total;
    }
    let dist = Distribution(pi);
    let scale = InfoState::ALL
        .into_iter()
        .map(|s| gen.exit_rate(s))
        .fold(1.0, f64::max);
    let residual = dist.balance_residual(gen);
    if residual > RESIDUAL_TOL * scale {
        return Err(CtmcError::Residual {
            what: "stationary balance",
            residual,
            tolerance: RESIDUAL_TOL * scale,
        });
    }
    Ok(dist)
}

/// Embedded jump chain `s[h][n] = q_hn / sum_{l != h} q_hl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpChain {
    pub probs: [[f64; STATE_COUNT]; STATE_COUNT],
    /// States with zero exit rate. Their rows hold a self-loop of mass one.
    pub absorbing: Vec<InfoState>,
}

impl JumpChain {
    pub fn prob(&self, from: InfoState, to: InfoState) -> f64 {
        self.probs[from.index()][to.index()]
    }
}

pub fn jump_probabilities(gen: &GeneratorMatrix) -> JumpChain {
    let mut probs = [[0.0; STATE_COUNT]; STATE_COUNT];
    let mut absorbing = Vec::new();
    for h in InfoState::ALL {
        let exit = gen.exit_rate(h);
        if exit <= 0.0 {
            probs[h.index()][h.index()] = 1.0;
            absorbing.push(h);
            continue;
        }
        for n in InfoState::ALL {
            if n != h {
                probs[h.index()][n.index()] = gen.rate(h, n) / exit;
            }
        }
    }
    JumpChain { probs, absorbing }
}

/// Expected hitting times of a target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassage {
    pub tau: StateMap<f64>,
    pub targets: Vec<InfoState>,
}

impl FirstPassage {
    pub fn get(&self, s: InfoState) -> f64 {
        self.tau[s]
    }
}

impl fmt::Display for FirstPassage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .tau
            .iter()
            .map(|(s, t)| format!("tau_{s}={t}"))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Solves `tau_h = 1/r_h + sum_n s_hn tau_n` off the targets, `tau = 0` on
/// them. Written in rate form: `sum_n q_hn tau_n = -1`.
pub fn mean_first_passage(
    gen: &GeneratorMatrix,
    targets: &[InfoState],
) -> Result<FirstPassage, CtmcError> {
    if targets.is_empty() {
        return Err(CtmcError::EmptyTargets);
    }
    let reach = gen.reachability();
    let free: Vec<InfoState> = InfoState::ALL
        .into_iter()
        .filter(|s| !targets.contains(s))
        .collect();
    for &h in &free {
        if !targets.iter().any(|t| reach[h.index()][t.index()]) {
            return Err(CtmcError::Unreachable(h));
        }
    }

    let mut tau = StateMap::splat(0.0);
    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort();
    sorted_targets.dedup();
    if free.is_empty() {
        return Ok(FirstPassage {
            tau,
            targets: sorted_targets,
        });
    }

    let a: Vec<Vec<f64>> = free
        .iter()
        .map(|&h| free.iter().map(|&n| gen.rate(h, n)).collect())
        .collect();
    let b = vec![-1.0; free.len()];
    let x = linalg::solve(&a, &b)?;

    let scale = 1.0
        + free.iter().map(|&h| gen.exit_rate(h)).fold(0.0, f64::max)
            * x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let residual = linalg::residual_inf(&a, &x, &b);
    if residual > RESIDUAL_TOL * scale {
        return Err(CtmcError::Residual {
            what: "hitting-time system",
            residual,
            tolerance: RESIDUAL_TOL * scale,
        });
    }
    for (&h, &v) in free.iter().zip(&x) {
        tau[h] = v;
    }
    Ok(FirstPassage {
        tau,
        targets: sorted_targets,
    })
}

/// Mean length of an error period and the pieces it is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPeriod {
    pub viewer: EntityId,
    /// Mean time from entering an error state until the reset set is
    /// reached again.
    pub mean: f64,
    /// Mean time between successive error-period starts.
    pub mean_cycle: f64,
    /// Share of error periods that start from each reset state
    /// (stationary mass times rate of leaving into error states,
    /// normalized). For entity 1 both reset states leave at rate `2d`, so
    /// this equals `pi_r / (pi_O + pi_Phi)`.
    pub reset_weights: Vec<(InfoState, f64)>,
    /// Jump probabilities from a reset state to an error state, conditioned
    /// on the jump leaving the reset set.
    pub entry_probs: Vec<(InfoState, InfoState, f64)>,
    pub first_passage: FirstPassage,
    pub stationary: Distribution,
}

impl ErrorPeriod {
    pub fn weight(&self, reset: InfoState) -> f64 {
        self.reset_weights
            .iter()
            .find(|(s, _)| *s == reset)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn entry_prob(&self, reset: InfoState, error: InfoState) -> f64 {
        self.entry_probs
            .iter()
            .find(|(r, e, _)| *r == reset && *e == error)
            .map_or(0.0, |(_, _, p)| *p)
    }
}

/// `T = sum_r P_r sum_e s_{r,e} tau_e` from the numeric stationary
/// distribution, jump chain and hitting times.
pub fn expected_error_period(
    params: &RateParams,
    viewer: EntityId,
) -> Result<ErrorPeriod, CtmcError> {
    params.validate_transmitting()?;
    if params.d <= 0.0 {
        return Err(CtmcError::NoErrors);
    }
    let gen = build_generator(params)?;
    let pi = stationary(&gen)?;
    let resets = reset_states(viewer);
    let fp = mean_first_passage(&gen, &resets)?;
    let jumps = jump_probabilities(&gen);

    let mut flows = Vec::new();
    let mut entry_probs = Vec::new();
    for &r in &resets {
        let errors: Vec<InfoState> = InfoState::ALL
            .into_iter()
            .filter(|&n| !is_reset_state(n, viewer) && jumps.prob(r, n) > 0.0)
            .collect();
        let leave: f64 = errors.iter().map(|&n| jumps.prob(r, n)).sum();
        for &n in &errors {
            entry_probs.push((r, n, jumps.prob(r, n) / leave));
        }
        flows.push((r, pi.get(r) * gen.exit_rate(r) * leave));
    }
    let total_flow: f64 = flows.iter().map(|(_, f)| f).sum();
    let reset_weights: Vec<(InfoState, f64)> =
        flows.iter().map(|&(r, f)| (r, f / total_flow)).collect();

    let mean = reset_weights
        .iter()
        .map(|&(r, w)| {
            w * entry_probs
                .iter()
                .filter(|(from, _, _)| *from == r)
                .map(|&(_, e, s)| s * fp.get(e))
                .sum::<f64>()
        })
        .sum();

    Ok(ErrorPeriod {
        viewer,
        mean,
        mean_cycle: 1.0 / total_flow,
        reset_weights,
        entry_probs,
        first_passage: fp,
        stationary: pi,
    })
}

/// Hand transcription of the published transition diagram, kept as an
/// independent check on [`build_generator`].
pub mod fixture {
    use super::*;
    use InfoState::*;

    /// Rate label of a diagram edge.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
    pub enum RateClass {
        Drift,
        MeasureOnly1,
        Transmit1,
        MeasureOnly2,
        Transmit2,
    }

    impl RateClass {
        pub fn rate(self, p: &RateParams) -> f64 {
            match self {
                RateClass::Drift => p.d,
                RateClass::MeasureOnly1 => (1.0 - p.p) * p.m1,
                RateClass::Transmit1 => p.p * p.m1,
                RateClass::MeasureOnly2 => (1.0 - p.p) * p.m2,
                RateClass::Transmit2 => p.p * p.m2,
            }
        }
    }

    pub const EDGES: [(InfoState, InfoState, RateClass); 30] = {
        use RateClass::*;
        [
            (O, B, Drift),
            (O, A, Drift),
            (A, E, Drift),
            (F, Gamma, Drift),
            (F, Psi, Drift),
            (B, E, Drift),
            (Phi, Gamma, Drift),
            (Phi, A, Drift),
            (Gamma, E, Drift),
            (Theta, Psi, Drift),
            (Theta, B, Drift),
            (Psi, E, Drift),
            (A, Phi, MeasureOnly1),
            (E, Gamma, MeasureOnly1),
            (Psi, F, MeasureOnly1),
            (Phi, O, Transmit1),
            (Gamma, B, Transmit1),
            (A, O, Transmit1),
            (F, Theta, Transmit1),
            (Psi, Theta, Transmit1),
            (E, B, Transmit1),
            (B, Theta, MeasureOnly2),
            (E, Psi, MeasureOnly2),
            (Gamma, F, MeasureOnly2),
            (E, A, Transmit2),
            (Theta, O, Transmit2),
            (B, O, Transmit2),
            (Psi, A, Transmit2),
            (Gamma, Phi, Transmit2),
            (F, Phi, Transmit2),
        ]
    };

    /// Generator assembled from [`EDGES`].
    pub fn generator(params: &RateParams) -> GeneratorMatrix {
        let mut q = [[0.0; STATE_COUNT]; STATE_COUNT];
        for (from, to, class) in EDGES {
            q[from.index()][to.index()] += class.rate(params);
        }
        for (i, row) in q.iter_mut().enumerate() {
            let out: f64 = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v)
                .sum();
            row[i] = -out;
        }
        GeneratorMatrix { q }
    }

    /// Number of fixture edges with positive rate at `params`.
    pub fn active_edge_count(params: &RateParams) -> usize {
        EDGES
            .iter()
            .filter(|(_, _, c)| c.rate(params) > 0.0)
            .count()
    }
}
