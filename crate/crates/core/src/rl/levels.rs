//! Queue quantization and the learner's state index.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::simcore::Observation;

/// Partition of a queue length into `n_levels` bands.
///
/// Level 0 is the empty queue, level `h` (1 <= h <= N-2) covers
/// `(threshold[h-2], threshold[h-1]]` with an implicit lower bound of 0 for
/// level 1, and level N-1 is everything above the last threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLevelScheme", into = "RawLevelScheme")]
pub struct LevelScheme {
    n_levels: u32,
    thresholds: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevelScheme {
    n_levels: u32,
    thresholds: Vec<u32>,
}

impl TryFrom<RawLevelScheme> for LevelScheme {
    type Error = ModelError;

    fn try_from(raw: RawLevelScheme) -> Result<Self, Self::Error> {
        Self::new(raw.n_levels, raw.thresholds)
    }
}

impl From<LevelScheme> for RawLevelScheme {
    fn from(s: LevelScheme) -> Self {
        Self { n_levels: s.n_levels, thresholds: s.thresholds }
    }
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self { n_levels: 4, thresholds: vec![6, 12] }
    }
}

impl LevelScheme {
    pub fn new(n_levels: u32, thresholds: Vec<u32>) -> Result<Self, ModelError> {
        if n_levels < 2 {
            return Err(ModelError::InvalidLevelScheme(format!("need at least 2 levels, got {n_levels}")));
        }
        if thresholds.len() != (n_levels - 2) as usize {
            return Err(ModelError::InvalidLevelScheme(format!(
                "{n_levels} levels need exactly {} thresholds, got {}",
                n_levels - 2,
                thresholds.len()
            )));
        }
        if thresholds.first() == Some(&0) {
            return Err(ModelError::InvalidLevelScheme("thresholds must be positive".into()));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidLevelScheme(format!(
                "thresholds must be strictly increasing, got {thresholds:?}"
            )));
        }
        Ok(Self { n_levels, thresholds })
    }

    /// Binary scheme: empty vs. nonempty.
    pub fn binary() -> Self {
        Self { n_levels: 2, thresholds: Vec::new() }
    }

    pub fn n_levels(&self) -> u32 {
        self.n_levels
    }

    pub fn thresholds(&self) -> &[u32] {
        &self.thresholds
    }

    /// Checks the largest threshold leaves room for the top band.
    pub fn check_capacity(&self, capacity: u32) -> Result<(), ModelError> {
        match self.thresholds.last() {
            Some(&t) if t >= capacity => Err(ModelError::InvalidLevelScheme(format!(
                "largest threshold {t} must be below the queue capacity {capacity}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn level(&self, len: u32) -> u32 {
        if len == 0 {
            return 0;
        }
        match self.thresholds.iter().position(|&t| len <= t) {
            Some(i) => i as u32 + 1,
            None => self.n_levels - 1,
        }
    }
}

pub fn quantize_level(len: u32, scheme: &LevelScheme) -> u32 {
    scheme.level(len)
}

/// Index of a learner state in `[0, 32 * N^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateIndex(pub usize);

/// Decoded learner state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedState {
    pub pu_active: bool,
    pub level_ps: u32,
    pub level_se: u32,
    pub level_s: u32,
    pub ch_sp: bool,
    pub ch_s: bool,
    pub ch_p: bool,
    pub ch_ps: bool,
}

/// Maps observations to state indices. The five binary fields occupy the low
/// five bits; the three queue levels form a base-N number above them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateEncoder {
    scheme: LevelScheme,
}

impl StateEncoder {
    pub fn new(scheme: LevelScheme) -> Self {
        Self { scheme }
    }

    pub fn scheme(&self) -> &LevelScheme {
        &self.scheme
    }

    pub fn state_count(&self) -> usize {
        let n = self.scheme.n_levels as usize;
        32 * n * n * n
    }

    pub fn encode(&self, obs: &Observation) -> StateIndex {
        self.encode_parts(&EncodedState {
            pu_active: obs.pu_active,
            level_ps: self.scheme.level(obs.q_ps),
            level_se: self.scheme.level(obs.q_se),
            level_s: self.scheme.level(obs.q_s),
            ch_sp: obs.ch_sp,
            ch_s: obs.ch_s,
            ch_p: obs.ch_p,
            ch_ps: obs.ch_ps,
        })
    }

    pub fn encode_parts(&self, e: &EncodedState) -> StateIndex {
        let n = self.scheme.n_levels as usize;
        let bits = usize::from(e.pu_active)
            | usize::from(e.ch_sp) << 1
            | usize::from(e.ch_s) << 2
            | usize::from(e.ch_p) << 3
            | usize::from(e.ch_ps) << 4;
        let levels = e.level_ps as usize + n * (e.level_se as usize + n * e.level_s as usize);
        StateIndex(bits + 32 * levels)
    }

    pub fn decode(&self, index: StateIndex) -> EncodedState {
        let n = self.scheme.n_levels as usize;
        let i = index.0;
        let levels = i / 32;
        EncodedState {
            pu_active: i & 1 != 0,
            ch_sp: i & 2 != 0,
            ch_s: i & 4 != 0,
            ch_p: i & 8 != 0,
            ch_ps: i & 16 != 0,
            level_ps: (levels % n) as u32,
            level_se: ((levels / n) % n) as u32,
            level_s: (levels / (n * n)) as u32,
        }
    }
}
