use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{FaultKind, Outcome};
use crate::util::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub kind: FaultKind,
    pub outcome: Outcome,
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = match self.outcome {
            Outcome::Fall => "fall",
            Outcome::Safe => "safe",
        };
        write!(f, "{}/{o}", self.kind.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// Single 60/20/20 split: fold 0 tests, fold 1 validates.
    Holdout,
    /// Five folds; each one serves as the test fold in turn.
    KFold,
}

/// Whole-trajectory fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub k: usize,
    pub seed: u64,
    pub folds: BTreeMap<u64, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRoles {
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitPlan {
    /// Test fold `f`, validation fold `f + 1 (mod k)`, the rest train.
    pub fn roles(&self, test_fold: usize) -> FoldRoles {
        let val_fold = (test_fold + 1) % self.k;
        let mut roles = FoldRoles {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for (&id, &f) in &self.folds {
            if f == test_fold {
                roles.test.push(id);
            } else if f == val_fold {
                roles.validation.push(id);
            } else {
                roles.train.push(id);
            }
        }
        roles
    }

    /// Test folds to run: one for a holdout split, all k otherwise.
    pub fn test_folds(&self) -> Vec<usize> {
        match self.kind {
            SplitKind::Holdout => vec![0],
            SplitKind::KFold => (0..self.k).collect(),
        }
    }
}

/// Shuffles each stratum and deals it round-robin into five folds. The deal
/// continues where the previous stratum stopped so fold sizes stay balanced.
pub fn make_splits(entries: &[(u64, StratumKey)], kind: SplitKind, seed: u64) -> Result<SplitPlan> {
    let k = 5;
    let mut strata: BTreeMap<StratumKey, Vec<u64>> = BTreeMap::new();
    for &(id, key) in entries {
        strata.entry(key).or_default().push(id);
    }
    let mut folds = BTreeMap::new();
    let mut offset = 0;
    for (s, (key, ids)) in strata.iter_mut().enumerate() {
        if ids.len() < k {
            return Err(Error::TooFewTrajectories {
                stratum: key.to_string(),
                count: ids.len(),
                folds: k,
            });
        }
        ids.sort_unstable();
        ids.shuffle(&mut stream_rng(seed, s as u64));
        for (i, &id) in ids.iter().enumerate() {
            folds.insert(id, (offset + i) % k);
        }
        offset += ids.len();
    }
    Ok(SplitPlan { kind, k, seed, folds })
}
