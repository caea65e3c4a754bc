//! Three-detector pipeline: an identifier decides between the incipient
//! (null) and abrupt (alternative) hypotheses and latches on abrupt.

use serde::{Deserialize, Serialize};

use super::{Score, TrainedDetector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    Incipient,
    Abrupt,
}

/// Per-trajectory switch state. Only moves incipient → abrupt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latch {
    state: Hypothesis,
}

impl Default for Latch {
    fn default() -> Self {
        Self::new()
    }
}

impl Latch {
    pub fn new() -> Self {
        Self {
            state: Hypothesis::Incipient,
        }
    }

    pub fn state(&self) -> Hypothesis {
        self.state
    }

    pub fn is_latched(&self) -> bool {
        self.state == Hypothesis::Abrupt
    }

    /// Applies one identifier verdict (`true` = abrupt).
    pub fn observe(&mut self, identifier_abrupt: bool) -> Hypothesis {
        if identifier_abrupt {
            self.state = Hypothesis::Abrupt;
        }
        self.state
    }

    pub fn reset(&mut self) {
        self.state = Hypothesis::Incipient;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    /// SVM over joint velocities; a faulty verdict means "abrupt".
    pub identifier: TrainedDetector,
    pub incipient: TrainedDetector,
    pub abrupt: TrainedDetector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulticlassStep {
    pub hypothesis: Hypothesis,
    pub score: Score,
}

impl MulticlassModel {
    /// One window of the switching rule. Windows are raw (unscaled) data for
    /// each detector's own frame source. Once latched, the identifier is no
    /// longer consulted.
    pub fn step(&self, latch: &mut Latch, incipient_window: &[f64], abrupt_window: &[f64], velocity_window: &[f64]) -> MulticlassStep {
        if !latch.is_latched() {
            latch.observe(self.identifier.score_raw(velocity_window).faulty);
        }
        let score = match latch.state() {
            Hypothesis::Incipient => self.incipient.score_raw(incipient_window),
            Hypothesis::Abrupt => self.abrupt.score_raw(abrupt_window),
        };
        MulticlassStep {
            hypothesis: latch.state(),
            score,
        }
    }
}

/// Applies the switching rule to precomputed per-window streams.
pub fn switch_streams(identifier_abrupt: &[bool], incipient: &[Score], abrupt: &[Score]) -> Vec<MulticlassStep> {
    let mut latch = Latch::new();
    identifier_abrupt
        .iter()
        .zip(incipient.iter().zip(abrupt))
        .map(|(&id, (&inc, &abr))| {
            let hypothesis = if latch.is_latched() { latch.state() } else { latch.observe(id) };
            let score = match hypothesis {
                Hypothesis::Incipient => inc,
                Hypothesis::Abrupt => abr,
            };
            MulticlassStep { hypothesis, score }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(pattern: &[bool], base: f64) -> Vec<Score> {
        pattern
            .iter()
            .enumerate()
            .map(|(i, &f)| Score {
                value: base + i as f64,
                faulty: f,
            })
            .collect()
    }

    #[test]
    fn never_fires_follows_incipient() {
        let inc = scores(&[false, true, false, true], 0.0);
        let abr = scores(&[true, true, true, true], 100.0);
        let out = switch_streams(&[false; 4], &inc, &abr);
        assert_eq!(out.iter().map(|s| s.score).collect::<Vec<_>>(), inc);
    }

    #[test]
    fn immediate_latch_follows_abrupt() {
        let inc = scores(&[false; 5], 0.0);
        let abr = scores(&[false, false, true, false, true], 100.0);
        let mut id = [false; 5];
        id[0] = true;
        let out = switch_streams(&id, &inc, &abr);
        assert_eq!(out.iter().map(|s| s.score).collect::<Vec<_>>(), abr);
    }

    #[test]
    fn mid_trajectory_latch_never_unlatches() {
        let inc = scores(&[false; 20], 0.0);
        let abr = scores(&[true; 20], 100.0);
        let mut id = [false; 20];
        id[6] = true; // window 7
        let out = switch_streams(&id, &inc, &abr);
        for (k, s) in out.iter().enumerate() {
            let expect = if k < 6 { inc[k] } else { abr[k] };
            assert_eq!(s.score, expect);
        }
        let first_abrupt = out.iter().position(|s| s.hypothesis == Hypothesis::Abrupt).unwrap();
        assert!(out[first_abrupt..].iter().all(|s| s.hypothesis == Hypothesis::Abrupt));
    }

    #[test]
    fn latch_reset() {
        let mut l = Latch::new();
        l.observe(true);
        assert_eq!(l.observe(false), Hypothesis::Abrupt);
        l.reset();
        assert_eq!(l.state(), Hypothesis::Incipient);
    }
}
