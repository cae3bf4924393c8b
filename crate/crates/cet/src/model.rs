//! State ontology and the truth-table fusion of the three level verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{CetError, Result};

/// Why the reactor trip is unavailable, if it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripCause {
    None,
    Cyber,
    Malfunction,
}

/// Traffic-flood intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DosLevel {
    None,
    Low,
    High,
}

/// Composition of trip status, false-data-injection level and DoS level.
/// Ground truth for the event-tree states and the six fused classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioState {
    pub trip_available: bool,
    pub trip_cause: TripCause,
    /// 0 = no falsification, 1..=3 = number of falsified console signals.
    pub fdi_level: u8,
    pub dos_level: DosLevel,
}

impl ScenarioState {
    pub const NORMAL: ScenarioState = ScenarioState {
        trip_available: true,
        trip_cause: TripCause::None,
        fdi_level: 0,
        dos_level: DosLevel::None,
    };

    pub fn new(trip_cause: TripCause, fdi_level: u8, dos_level: DosLevel) -> Self {
        ScenarioState {
            trip_available: trip_cause == TripCause::None,
            trip_cause,
            fdi_level,
            dos_level,
        }
    }

    /// DoS running over otherwise normal operation: trip still available.
    pub fn dos_on_normal(dos_level: DosLevel) -> Self {
        ScenarioState {
            trip_available: true,
            trip_cause: TripCause::None,
            fdi_level: 0,
            dos_level,
        }
    }

    pub fn is_normal(&self) -> bool {
        *self == Self::NORMAL
    }

    /// Checks the compositional invariants.
    pub fn is_valid(&self) -> bool {
        let cause_ok = self.trip_available == (self.trip_cause == TripCause::None);
        let fdi_ok = self.fdi_level == 0 || self.trip_cause == TripCause::Cyber;
        cause_ok && fdi_ok && self.fdi_level <= 3
    }
}

/// Binary verdicts of the three classifier levels plus the gating flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelOutputs {
    pub l1: bool,
    pub l2: bool,
    pub l3: bool,
    pub l3_evaluated: bool,
}

impl LevelOutputs {
    /// Gated constructor: level 3 only carries a verdict when level 1 fired.
    pub fn gated(l1: bool, l2: bool, l3: bool) -> Self {
        if l1 {
            LevelOutputs { l1, l2, l3, l3_evaluated: true }
        } else {
            LevelOutputs { l1, l2, l3: false, l3_evaluated: false }
        }
    }
}

/// One of the six event classes produced by the truth table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum FusedClass {
    Normal = 0,
    Other = 1,
    Fdi = 2,
    Dos = 3,
    OtherDos = 4,
    FdiDos = 5,
}

impl FusedClass {
    pub const ALL: [FusedClass; 6] = [
        FusedClass::Normal,
        FusedClass::Other,
        FusedClass::Fdi,
        FusedClass::Dos,
        FusedClass::OtherDos,
        FusedClass::FdiDos,
    ];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(v: u8) -> Option<FusedClass> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FusedClass::Normal => "Normal",
            FusedClass::Other => "Other",
            FusedClass::Fdi => "FDI",
            FusedClass::Dos => "DoS",
            FusedClass::OtherDos => "Other+DoS",
            FusedClass::FdiDos => "FDI+DoS",
        }
    }
}

/// Enumerates the event-tree states: one normal plus thirteen abnormal.
pub fn enumerate_states() -> Vec<ScenarioState> {
    let mut states = vec![ScenarioState::NORMAL];
    states.push(ScenarioState::new(TripCause::Malfunction, 0, DosLevel::None));
    states.push(ScenarioState::new(TripCause::Cyber, 0, DosLevel::None));
    for fdi in 1..=3 {
        states.push(ScenarioState::new(TripCause::Cyber, fdi, DosLevel::None));
    }
    for dos in [DosLevel::Low, DosLevel::High] {
        states.push(ScenarioState::new(TripCause::Cyber, 0, dos));
    }
    for fdi in 1..=3 {
        for dos in [DosLevel::Low, DosLevel::High] {
            states.push(ScenarioState::new(TripCause::Cyber, fdi, dos));
        }
    }
    states
}

/// Maps the three level bits to an event class; the two gating-violating
/// codes are rejected as unreachable.
pub fn fuse_levels(lo: LevelOutputs) -> Result<FusedClass> {
    match (lo.l1, lo.l2, lo.l3) {
        (false, false, false) => Ok(FusedClass::Normal),
        (true, false, false) => Ok(FusedClass::Other),
        (true, false, true) => Ok(FusedClass::Fdi),
        (false, true, false) => Ok(FusedClass::Dos),
        (true, true, false) => Ok(FusedClass::OtherDos),
        (true, true, true) => Ok(FusedClass::FdiDos),
        (l1, l2, l3) => Err(CetError::UnreachableCode(l1 as u8, l2 as u8, l3 as u8)),
    }
}

/// Ground-truth event class of a scenario state.
pub fn true_class(s: &ScenarioState) -> FusedClass {
    let trip_unavailable = !s.trip_available;
    let dos = s.dos_level != DosLevel::None;
    match (trip_unavailable, s.fdi_level > 0, dos) {
        (false, false, false) => FusedClass::Normal,
        (true, false, false) => FusedClass::Other,
        (_, true, false) => FusedClass::Fdi,
        (false, false, true) => FusedClass::Dos,
        (true, false, true) => FusedClass::OtherDos,
        (_, true, true) => FusedClass::FdiDos,
    }
}
