//! Time-indexed telemetry matrices with per-timestep state labels.

use serde::{Deserialize, Serialize};

use crate::model::ScenarioState;

/// Operational mode of a timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Operating,
    Shutdown,
}

/// Dense [signals x timesteps] matrix with null-able cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub n_signals: usize,
    pub n_steps: usize,
    data: Vec<f64>,
    null: Vec<bool>,
}

impl SignalMatrix {
    pub fn zeros(n_signals: usize, n_steps: usize) -> SignalMatrix {
        SignalMatrix {
            n_signals,
            n_steps,
            data: vec![0.0; n_signals * n_steps],
            null: vec![false; n_signals * n_steps],
        }
    }

    #[inline]
    fn idx(&self, s: usize, t: usize) -> usize {
        debug_assert!(s < self.n_signals && t < self.n_steps);
        s * self.n_steps + t
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> Option<f64> {
        let i = self.idx(s, t);
        if self.null[i] {
            None
        } else {
            Some(self.data[i])
        }
    }

    /// Raw cell value ignoring the null flag.
    #[inline]
    pub fn raw(&self, s: usize, t: usize) -> f64 {
        self.data[self.idx(s, t)]
    }

    #[inline]
    pub fn is_null(&self, s: usize, t: usize) -> bool {
        self.null[self.idx(s, t)]
    }

    #[inline]
    pub fn set(&mut self, s: usize, t: usize, v: f64) {
        let i = self.idx(s, t);
        self.data[i] = v;
        self.null[i] = false;
    }

    #[inline]
    pub fn set_null(&mut self, s: usize, t: usize) {
        let i = self.idx(s, t);
        self.null[i] = true;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_steps..(s + 1) * self.n_steps]
    }

    pub fn null_count(&self) -> usize {
        self.null.iter().filter(|&&n| n).count()
    }

    pub fn cells(&self) -> usize {
        self.n_signals * self.n_steps
    }
}

/// Which artifact produced a cell in the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Outlier,
    Null,
    Falsified,
    Dos,
}

/// Sparse record of every cell touched by artifact or attack injection,
/// with the original value so test oracles can recover the clean frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellMask {
    pub entries: Vec<MaskEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub signal: usize,
    pub t: usize,
    pub kind: ArtifactKind,
    pub original: f64,
}

impl CellMask {
    pub fn push(&mut self, signal: usize, t: usize, kind: ArtifactKind, original: f64) {
        self.entries.push(MaskEntry { signal, t, kind, original });
    }

    pub fn count(&self, kind: ArtifactKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn cells(&self, kind: ArtifactKind) -> Vec<(usize, usize)> {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| (e.signal, e.t))
            .collect()
    }
}

/// OT and IT matrices on their own clocks plus per-timestep labels on the
/// 1 Hz OT clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryFrame {
    pub ot: SignalMatrix,
    pub it: SignalMatrix,
    /// Seconds between consecutive IT samples.
    pub it_period_s: f64,
    pub states: Vec<ScenarioState>,
    pub modes: Vec<Mode>,
    /// Artifact cells injected into the OT matrix.
    pub ot_mask: CellMask,
    /// Artifact cells injected into the IT matrix.
    pub it_mask: CellMask,
}

impl TelemetryFrame {
    pub fn n_steps(&self) -> usize {
        self.ot.n_steps
    }

    /// OT timestamp of step `t` (1 Hz clock starting at 0).
    pub fn ot_time(&self, t: usize) -> f64 {
        t as f64
    }

    pub fn it_time(&self, i: usize) -> f64 {
        i as f64 * self.it_period_s
    }

    /// OT step index covering IT sample `i`.
    pub fn it_to_ot_step(&self, i: usize) -> usize {
        ((self.it_time(i)).floor() as usize).min(self.n_steps().saturating_sub(1))
    }

    pub fn operating_fraction(&self) -> f64 {
        if self.modes.is_empty() {
            return 0.0;
        }
        self.modes.iter().filter(|&&m| m == Mode::Operating).count() as f64
            / self.modes.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_null_roundtrip() {
        let mut m = SignalMatrix::zeros(2, 3);
        m.set(1, 2, 4.5);
        assert_eq!(m.get(1, 2), Some(4.5));
        m.set_null(1, 2);
        assert_eq!(m.get(1, 2), None);
        assert_eq!(m.raw(1, 2), 4.5);
        assert_eq!(m.null_count(), 1);
        m.set(1, 2, 1.0);
        assert_eq!(m.get(1, 2), Some(1.0));
        assert_eq!(m.null_count(), 0);
    }
}
