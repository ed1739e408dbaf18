//! Online Q-learning against the slot simulator.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, RlError};
use crate::rl::levels::{LevelScheme, StateEncoder};
use crate::rl::qtable::{q_update, select_action, Exploration, Policy, QTable};
use crate::rl::reward::{reward, RewardContext, RewardParams};
use crate::simcore::{step, ActionMask, EnvStreams, ModelParams, NetworkState};
use crate::stochastic::RngStream;

/// Learning constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningParams {
    pub alpha: f64,
    pub gamma: f64,
    /// Exploration probability.
    pub mu: f64,
    /// Fraction of the horizon during which exploration is enabled.
    pub explore_fraction: f64,
    /// Slots per learning-curve sample.
    pub curve_window: u64,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self { alpha: 0.5, gamma: 0.9, mu: 0.05, explore_fraction: 0.6, curve_window: 1000 }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ModelError::InvalidHyper(format!("learning rate must be in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ModelError::InvalidHyper(format!("discount must be < 1 to ensure convergence of the sum, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(ModelError::InvalidProbability { name: "mu", value: self.mu });
        }
        if !(0.0..=1.0).contains(&self.explore_fraction) {
            return Err(ModelError::InvalidProbability { name: "explore_fraction", value: self.explore_fraction });
        }
        if self.curve_window == 0 {
            return Err(ModelError::InvalidHyper("curve window must be at least 1 slot".into()));
        }
        Ok(())
    }

    pub fn exploration(&self) -> Exploration {
        Exploration { mu: self.mu, explore_fraction: self.explore_fraction }
    }
}

/// Mean reward over one window of training slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Slot index one past the end of the window.
    pub slot: u64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub table: QTable,
    pub policy: Policy,
    pub curve: Vec<CurvePoint>,
}

/// Everything `train` needs besides the seed.
#[derive(Debug, Clone, Copy)]
pub struct TrainSetup<'a> {
    pub model: &'a ModelParams,
    pub reward: &'a RewardParams,
    pub scheme: &'a LevelScheme,
    pub learning: &'a LearningParams,
    pub mask: ActionMask,
    pub horizon: u64,
}

/// Runs one continuing episode of `horizon` slots: observe, act, collect the
/// reward, update the table. Returns the final table, its greedy policy and
/// the windowed learning curve (a trailing partial window is included).
pub fn train(setup: &TrainSetup<'_>, seed: u64) -> Result<TrainOutput, RlError> {
    let learning = setup.learning;
    let encoder = StateEncoder::new(setup.scheme.clone());
    let mut table = QTable::new(encoder.clone(), setup.mask, learning.alpha, learning.gamma)?;
    let root = RngStream::new(seed);
    let mut env = EnvStreams::new(&root.substream("env"));
    let mut agent = root.substream("agent");
    let mut state = NetworkState::initial(setup.model, &mut root.substream("init"));
    let exploration = learning.exploration();

    let mut s = encoder.encode(&state.observe());
    let mut curve = Vec::new();
    let mut window_sum = 0.0;
    let mut window_len = 0u64;
    for t in 0..setup.horizon {
        let action = select_action(&table, s, exploration, t, setup.horizon, setup.mask, &mut agent)?;
        let ctx = RewardContext::from_state(&state);
        let (next, outcome) = step(&state, action, setup.model, &mut env);
        let r = reward(&ctx, action, outcome.r_s, outcome.r_ps, setup.reward);
        let s_next = encoder.encode(&next.observe());
        q_update(&mut table, s, action, r, s_next)?;

        window_sum += r;
        window_len += 1;
        if window_len == learning.curve_window || t + 1 == setup.horizon {
            curve.push(CurvePoint { slot: t + 1, mean_reward: window_sum / window_len as f64 });
            window_sum = 0.0;
            window_len = 0;
        }
        state = next;
        s = s_next;
    }
    let policy = table.greedy_policy();
    Ok(TrainOutput { table, policy, curve })
}
