//! Bidirectional knowledge state space.
//!
//! Each of the two entities holds two correctness bits: one for its own
//! condition (`y_self`) and one for its knowledge of the peer (`y_other`).
//! A bit is `0` when the knowledge is correct and `1` when it is wrong. The
//! four bits are written in the order `[Ŷ1, Ỹ1, Ŷ2, Ỹ2]`.
//!
//! An entity that is wrong about itself cannot have passed correct
//! information to its peer, so `Ŷ1 = 1` forces `Ỹ2 = 1` and `Ŷ2 = 1` forces
//! `Ỹ1 = 1`. Nine of the sixteen bit patterns survive that constraint and
//! every one of them has a name, see [`InfoState`].

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("bit pattern {0} violates the knowledge constraint")]
    InvalidPattern(BitPattern),
    #[error("malformed bit pattern {0:?}, expected \"[b,b,b,b]\"")]
    MalformedPattern(String),
    #[error("unknown state name {0:?}")]
    UnknownName(String),
    #[error("unknown entity {0:?}, expected 1 or 2")]
    UnknownEntity(String),
    #[error("unknown event kind {0:?}")]
    UnknownEventKind(String),
}

/// Raw four-bit pattern `[Ŷ1, Ỹ1, Ŷ2, Ỹ2]`, not necessarily valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPattern(pub [bool; 4]);

impl BitPattern {
    /// All sixteen patterns, counting up from `[0,0,0,0]` with `Ŷ1` as the
    /// most significant bit.
    pub fn all() -> impl Iterator<Item = BitPattern> {
        (0u8..16).map(|v| BitPattern([v & 8 != 0, v & 4 != 0, v & 2 != 0, v & 1 != 0]))
    }

    pub fn y1_self(self) -> bool {
        self.0[0]
    }

    pub fn y1_other(self) -> bool {
        self.0[1]
    }

    pub fn y2_self(self) -> bool {
        self.0[2]
    }

    pub fn y2_other(self) -> bool {
        self.0[3]
    }

    /// Swap the roles of the two entities.
    pub fn swap_entities(self) -> BitPattern {
        let [a, b, c, d] = self.0;
        BitPattern([c, d, a, b])
    }
}

impl fmt::Display for BitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0.map(u8::from);
        write!(f, "[{a},{b},{c},{d}]")
    }
}

impl FromStr for BitPattern {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || StateError::MalformedPattern(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(malformed)?;
        let mut bits = [false; 4];
        let mut count = 0;
        for (i, tok) in inner.split(',').enumerate() {
            if i >= 4 {
                return Err(malformed());
            }
            bits[i] = match tok.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(malformed()),
            };
            count += 1;
        }
        if count != 4 {
            return Err(malformed());
        }
        Ok(BitPattern(bits))
    }
}

/// True iff `Ŷ1 = 1 ⇒ Ỹ2 = 1` and `Ŷ2 = 1 ⇒ Ỹ1 = 1`.
pub fn is_valid(bits: BitPattern) -> bool {
    (!bits.y1_self() || bits.y2_other()) && (!bits.y2_self() || bits.y1_other())
}

/// One of the nine valid knowledge states.
///
/// Variant order is the canonical state order used to index every vector
/// and matrix in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InfoState {
    /// `[0,0,0,0]`: both entities fully informed.
    O,
    /// `[0,0,0,1]`: entity 2 is wrong about entity 1.
    Phi,
    /// `[1,0,0,1]`: entity 1 is wrong about itself.
    A,
    /// `[0,1,1,0]`: entity 2 is wrong about itself.
    B,
    /// `[0,1,1,1]`
    Gamma,
    /// `[0,1,0,1]`: both are right about themselves and wrong about the peer.
    F,
    /// `[1,1,0,1]`
    Psi,
    /// `[0,1,0,0]`: entity 1 is wrong about entity 2.
    Theta,
    /// `[1,1,1,1]`: every bit wrong.
    E,
}

pub const STATE_COUNT: usize = 9;

impl InfoState {
    pub const ALL: [InfoState; STATE_COUNT] = [
        InfoState::O,
        InfoState::Phi,
        InfoState::A,
        InfoState::B,
        InfoState::Gamma,
        InfoState::F,
        InfoState::Psi,
        InfoState::Theta,
        InfoState::E,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<InfoState> {
        Self::ALL.get(i).copied()
    }

    pub fn bits(self) -> BitPattern {
        let b = match self {
            InfoState::O => [0, 0, 0, 0],
            InfoState::Phi => [0, 0, 0, 1],
            InfoState::A => [1, 0, 0, 1],
            InfoState::B => [0, 1, 1, 0],
            InfoState::Gamma => [0, 1, 1, 1],
            InfoState::F => [0, 1, 0, 1],
            InfoState::Psi => [1, 1, 0, 1],
            InfoState::Theta => [0, 1, 0, 0],
            InfoState::E => [1, 1, 1, 1],
        };
        BitPattern(b.map(|x| x == 1))
    }

    pub fn from_bits(bits: BitPattern) -> Result<InfoState, StateError> {
        Self::ALL
            .into_iter()
            .find(|s| s.bits() == bits)
            .ok_or(StateError::InvalidPattern(bits))
    }

    pub fn name(self) -> &'static str {
        match self {
            InfoState::O => "O",
            InfoState::Phi => "Phi",
            InfoState::A => "A",
            InfoState::B => "B",
            InfoState::Gamma => "Gamma",
            InfoState::F => "F",
            InfoState::Psi => "Psi",
            InfoState::Theta => "Theta",
            InfoState::E => "E",
        }
    }

    /// The state obtained by exchanging the two entities' roles.
    pub fn swap_entities(self) -> InfoState {
        InfoState::from_bits(self.bits().swap_entities())
            .expect("entity swap preserves validity")
    }
}

impl fmt::Display for InfoState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InfoState {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.starts_with('[') {
            return InfoState::from_bits(t.parse()?);
        }
        match t {
            "Γ" => return Ok(InfoState::Gamma),
            "Φ" => return Ok(InfoState::Phi),
            "Ψ" => return Ok(InfoState::Psi),
            "Θ" => return Ok(InfoState::Theta),
            _ => {}
        }
        InfoState::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| StateError::UnknownName(t.to_string()))
    }
}

/// Valid states in canonical order.
pub fn enumerate_states() -> Vec<InfoState> {
    BitPattern::all()
        .filter(|b| is_valid(*b))
        .map(|b| InfoState::from_bits(b).expect("filtered on validity"))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl EntityId {
    pub const BOTH: [EntityId; 2] = [EntityId::One, EntityId::Two];

    pub fn other(self) -> EntityId {
        match self {
            EntityId::One => EntityId::Two,
            EntityId::Two => EntityId::One,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            EntityId::One => 1,
            EntityId::Two => 2,
        }
    }

    /// Position of this entity's self-estimate bit in a [`BitPattern`].
    pub fn self_bit(self) -> usize {
        match self {
            EntityId::One => 0,
            EntityId::Two => 2,
        }
    }

    /// Position of this entity's estimate of the peer.
    pub fn other_bit(self) -> usize {
        self.self_bit() + 1
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for EntityId {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(EntityId::One),
            "2" => Ok(EntityId::Two),
            other => Err(StateError::UnknownEntity(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    /// The actor's true condition changes; its self-estimate and the peer's
    /// copy both become wrong.
    Drift,
    /// The actor measures itself without sharing the result.
    MeasureOnly,
    /// The actor measures itself and instantly shares the result.
    MeasureAndTransmit,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [
        EventKind::Drift,
        EventKind::MeasureOnly,
        EventKind::MeasureAndTransmit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Drift => "drift",
            EventKind::MeasureOnly => "measure",
            EventKind::MeasureAndTransmit => "measure_transmit",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = StateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "drift" | "d" => Ok(EventKind::Drift),
            "measure" | "measureonly" | "m" => Ok(EventKind::MeasureOnly),
            "measuretransmit" | "measureandtransmit" | "mt" => Ok(EventKind::MeasureAndTransmit),
            _ => Err(StateError::UnknownEventKind(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub actor: EntityId,
}

impl Event {
    pub const fn new(kind: EventKind, actor: EntityId) -> Self {
        Event { kind, actor }
    }

    pub const fn drift(actor: EntityId) -> Self {
        Event::new(EventKind::Drift, actor)
    }

    pub const fn measure(actor: EntityId) -> Self {
        Event::new(EventKind::MeasureOnly, actor)
    }

    pub const fn measure_transmit(actor: EntityId) -> Self {
        Event::new(EventKind::MeasureAndTransmit, actor)
    }

    /// The six events, actor 1 first.
    pub fn all() -> impl Iterator<Item = Event> {
        EntityId::BOTH
            .into_iter()
            .flat_map(|a| EventKind::ALL.into_iter().map(move |k| Event::new(k, a)))
    }

    pub fn swap_entities(self) -> Event {
        Event::new(self.kind, self.actor.other())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.actor)
    }
}

/// Deterministic effect of `event` on `state`.
///
/// Drift on a bit that is already wrong leaves it wrong, so the result may
/// equal the input.
pub fn apply_event(state: InfoState, event: Event) -> InfoState {
    let mut bits = state.bits().0;
    let own = event.actor.self_bit();
    // the peer's copy of the actor's condition
    let peer = event.actor.other().other_bit();
    match event.kind {
        EventKind::Drift => {
            bits[own] = true;
            bits[peer] = true;
        }
        EventKind::MeasureOnly => bits[own] = false,
        EventKind::MeasureAndTransmit => {
            bits[own] = false;
            bits[peer] = false;
        }
    }
    InfoState::from_bits(BitPattern(bits)).expect("events preserve validity")
}

/// Checked variant of [`apply_event`] for raw bit patterns.
pub fn apply_event_bits(bits: BitPattern, event: Event) -> Result<InfoState, StateError> {
    Ok(apply_event(InfoState::from_bits(bits)?, event))
}

/// True when `viewer` knows its own condition, the peer's condition, and the
/// peer knows its own condition.
pub fn is_reset_state(state: InfoState, viewer: EntityId) -> bool {
    let b = state.bits().0;
    let own = viewer.self_bit();
    let other_view = viewer.other_bit();
    let peer_self = viewer.other().self_bit();
    !b[own] && !b[other_view] && !b[peer_self]
}

/// The viewer's reset set in canonical order.
pub fn reset_states(viewer: EntityId) -> Vec<InfoState> {
    InfoState::ALL
        .into_iter()
        .filter(|s| is_reset_state(*s, viewer))
        .collect()
}

/// States entered from the viewer's reset set by a single drift.
pub fn first_error_states(viewer: EntityId) -> Vec<InfoState> {
    let mut out: Vec<InfoState> = reset_states(viewer)
        .into_iter()
        .flat_map(|r| EntityId::BOTH.map(|a| apply_event(r, Event::drift(a))))
        .filter(|s| !is_reset_state(*s, viewer))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// `1` while the viewer's penalty accrues, `0` in its reset set.
pub fn penalty_gate(state: InfoState, viewer: EntityId) -> u8 {
    u8::from(!is_reset_state(state, viewer))
}

/// A value per state, indexed by [`InfoState`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMap<T>(pub [T; STATE_COUNT]);

impl<T: Copy> StateMap<T> {
    pub fn splat(v: T) -> Self {
        StateMap([v; STATE_COUNT])
    }

    pub fn iter(&self) -> impl Iterator<Item = (InfoState, T)> + '_ {
        InfoState::ALL.into_iter().zip(self.0.iter().copied())
    }
}

impl<T: Copy + Default> Default for StateMap<T> {
    fn default() -> Self {
        StateMap([T::default(); STATE_COUNT])
    }
}

impl<T> Index<InfoState> for StateMap<T> {
    type Output = T;

    fn index(&self, s: InfoState) -> &T {
        &self.0[s.index()]
    }
}

impl<T> IndexMut<InfoState> for StateMap<T> {
    fn index_mut(&mut self, s: InfoState) -> &mut T {
        &mut self.0[s.index()]
    }
}
