use crate::error::{ModelError, RlError};
use crate::rl::levels::{StateEncoder, StateIndex};
use crate::simcore::{Action, ActionMask, NetworkState};
use crate::stochastic::RngStream;

/// Dense state x action value table with its learning constants.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    encoder: StateEncoder,
    mask: ActionMask,
    alpha: f64,
    gamma: f64,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    /// Zero-initialized table.
    pub fn new(encoder: StateEncoder, mask: ActionMask, alpha: f64, gamma: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ModelError::InvalidHyper(format!("learning rate must be in (0, 1], got {alpha}")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(ModelError::InvalidHyper(format!("discount must be in [0, 1), got {gamma}")));
        }
        if mask.is_empty() {
            return Err(ModelError::InvalidHyper("action mask is empty".into()));
        }
        let n = encoder.state_count() * Action::COUNT;
        Ok(Self { encoder, mask, alpha, gamma, values: vec![0.0; n], visits: vec![0; n] })
    }

    pub(crate) fn from_parts(
        encoder: StateEncoder,
        mask: ActionMask,
        alpha: f64,
        gamma: f64,
        values: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let mut t = Self::new(encoder, mask, alpha, gamma)?;
        if values.len() != t.values.len() {
            return Err(ModelError::InvalidHyper(format!(
                "value matrix has {} entries, expected {}",
                values.len(),
                t.values.len()
            )));
        }
        t.values = values;
        Ok(t)
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn mask(&self) -> ActionMask {
        self.mask
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn state_count(&self) -> usize {
        self.encoder.state_count()
    }

    /// Row-major values, four per state.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: StateIndex, a: Action) -> f64 {
        self.values[s.0 * Action::COUNT + a.index()]
    }

    pub fn set(&mut self, s: StateIndex, a: Action, v: f64) {
        self.values[s.0 * Action::COUNT + a.index()] = v;
    }

    pub fn visits(&self, s: StateIndex, a: Action) -> u64 {
        self.visits[s.0 * Action::COUNT + a.index()]
    }

    pub fn row(&self, s: StateIndex) -> &[f64] {
        &self.values[s.0 * Action::COUNT..(s.0 + 1) * Action::COUNT]
    }

    /// Largest value in row `s` over `mask`.
    pub fn max_value(&self, s: StateIndex, mask: ActionMask) -> f64 {
        let row = self.row(s);
        mask.iter().map(|a| row[a.index()]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_state(&self, s: StateIndex) -> Result<(), RlError> {
        let count = self.state_count();
        if s.0 >= count {
            Err(RlError::StateOutOfRange { index: s.0, count })
        } else {
            Ok(())
        }
    }

    /// One-step Q-learning update with the table's own mask.
    pub fn update(&mut self, s: StateIndex, a: Action, r: f64, s_next: StateIndex) -> Result<(), RlError> {
        q_update(self, s, a, r, s_next)
    }

    /// Adds `c` to every entry.
    pub fn shift(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    pub fn greedy_policy(&self) -> Policy {
        greedy_policy(self, self.mask)
    }
}

/// `Q(s,a) += alpha * (r + gamma * max_{a' in mask} Q(s',a') - Q(s,a))`.
pub fn q_update(table: &mut QTable, s: StateIndex, a: Action, r: f64, s_next: StateIndex) -> Result<(), RlError> {
    if !r.is_finite() {
        return Err(RlError::NonFiniteReward(r));
    }
    table.check_state(s)?;
    table.check_state(s_next)?;
    if !table.mask.contains(a) {
        return Err(RlError::ActionNotAllowed(a.label()));
    }
    let target = r + table.gamma * table.max_value(s_next, table.mask);
    let i = s.0 * Action::COUNT + a.index();
    table.values[i] += table.alpha * (target - table.values[i]);
    table.visits[i] += 1;
    Ok(())
}

/// Step exploration schedule: uniform random actions with probability `mu`
/// during the first `explore_fraction` of the horizon, greedy afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    pub mu: f64,
    pub explore_fraction: f64,
}

impl Exploration {
    pub fn is_exploring(&self, t: u64, horizon: u64) -> bool {
        (t as f64) < self.explore_fraction * horizon as f64
    }
}

pub fn select_action(
    table: &QTable,
    s: StateIndex,
    exploration: Exploration,
    t: u64,
    horizon: u64,
    mask: ActionMask,
    rng: &mut RngStream,
) -> Result<Action, RlError> {
    if mask.is_empty() {
        return Err(RlError::EmptyMask);
    }
    table.check_state(s)?;
    if exploration.is_exploring(t, horizon) && rng.uniform() < exploration.mu {
        return Ok(nth_allowed(mask, rng.below(mask.len())));
    }
    let row = table.row(s);
    let best = table.max_value(s, mask);
    let ties = mask.iter().filter(|a| row[a.index()] == best).count();
    let pick = if ties > 1 { rng.below(ties) } else { 0 };
    Ok(mask.iter().filter(|a| row[a.index()] == best).nth(pick).expect("tie index in range"))
}

fn nth_allowed(mask: ActionMask, n: usize) -> Action {
    mask.iter().nth(n).expect("index below mask size")
}

/// Deterministic state -> action map over the learner's quantized states.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    encoder: StateEncoder,
    mask: ActionMask,
    actions: Vec<Action>,
}

impl Policy {
    pub fn new(encoder: StateEncoder, mask: ActionMask, actions: Vec<Action>) -> Result<Self, RlError> {
        if let Some(&a) = actions.iter().find(|a| !mask.contains(**a)) {
            return Err(RlError::ActionNotAllowed(a.label()));
        }
        if actions.len() != encoder.state_count() {
            return Err(RlError::StateOutOfRange { index: actions.len(), count: encoder.state_count() });
        }
        Ok(Self { encoder, mask, actions })
    }

    /// Same action in every state.
    pub fn constant(encoder: StateEncoder, action: Action) -> Self {
        let n = encoder.state_count();
        Self { encoder, mask: ActionMask::from_actions(&[action]), actions: vec![action; n] }
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn mask(&self) -> ActionMask {
        self.mask
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, s: StateIndex) -> Action {
        self.actions[s.0]
    }

    /// Action for a full network state, seen through the observation map.
    pub fn act(&self, state: &NetworkState) -> Action {
        self.action(self.encoder.encode(&state.observe()))
    }
}

/// Per-state argmax over `mask`, ties to the lowest action index.
pub fn greedy_policy(table: &QTable, mask: ActionMask) -> Policy {
    let actions = (0..table.state_count())
        .map(|s| {
            let row = table.row(StateIndex(s));
            let mut best: Option<Action> = None;
            for a in mask.iter() {
                if best.is_none_or(|b| row[a.index()] > row[b.index()]) {
                    best = Some(a);
                }
            }
            best.expect("nonempty mask")
        })
        .collect();
    Policy { encoder: table.encoder.clone(), mask, actions }
}
