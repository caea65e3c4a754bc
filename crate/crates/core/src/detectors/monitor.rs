use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declare once `fire_threshold` of the last `n_monitor` verdicts are faulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorRule {
    pub n_monitor: usize,
    pub fire_threshold: usize,
}

impl Default for MonitorRule {
    fn default() -> Self {
        Self {
            n_monitor: 1,
            fire_threshold: 1,
        }
    }
}

impl MonitorRule {
    pub fn validate(&self) -> Result<()> {
        if self.n_monitor == 0 || self.fire_threshold == 0 || self.fire_threshold > self.n_monitor {
            return Err(Error::InvalidConfig(format!(
                "monitor needs 1 <= fire_threshold ({}) <= n_monitor ({})",
                self.fire_threshold, self.n_monitor
            )));
        }
        Ok(())
    }
}

/// Streaming vote over the most recent verdicts.
#[derive(Debug, Clone)]
pub struct Monitor {
    rule: MonitorRule,
    recent: VecDeque<bool>,
    faulty: usize,
}

impl Monitor {
    pub fn new(rule: MonitorRule) -> Self {
        Self {
            rule,
            recent: VecDeque::with_capacity(rule.n_monitor),
            faulty: 0,
        }
    }

    /// Feeds one verdict and reports whether the rule fires now.
    pub fn push(&mut self, faulty: bool) -> bool {
        if self.recent.len() == self.rule.n_monitor && self.recent.pop_front() == Some(true) {
            self.faulty -= 1;
        }
        self.recent.push_back(faulty);
        self.faulty += usize::from(faulty);
        self.faulty >= self.rule.fire_threshold
    }
}

/// Index of the first window at which the rule fires.
pub fn monitor(verdicts: impl IntoIterator<Item = bool>, rule: MonitorRule) -> Option<usize> {
    let mut m = Monitor::new(rule);
    verdicts.into_iter().position(|v| m.push(v))
}
