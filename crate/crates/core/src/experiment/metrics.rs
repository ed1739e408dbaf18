//! Greedy policy evaluation and the per-run metrics it produces.

use crate::rl::{reward, Policy, RewardContext, RewardParams};
use crate::simcore::{step, Action, EnvStreams, ModelParams, NetworkState, PerQueue, SlotOutcome};
use crate::stochastic::RngStream;

/// Anything that picks an action from the full network state.
pub trait Controller {
    fn act(&self, state: &NetworkState) -> Action;
}

impl Controller for Policy {
    fn act(&self, state: &NetworkState) -> Action {
        Policy::act(self, state)
    }
}

impl<F: Fn(&NetworkState) -> Action> Controller for F {
    fn act(&self, state: &NetworkState) -> Action {
        self(state)
    }
}

/// Long-run averages of one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsRecord {
    pub slots: u64,
    /// Primary packets delivered per slot, direct plus relayed.
    pub primary_throughput: f64,
    /// Own secondary packets delivered per slot.
    pub secondary_throughput: f64,
    /// Relay-queue packets delivered per slot.
    pub relayed_throughput: f64,
    /// Mean slot-start queue lengths.
    pub mean_queue: PerQueue<f64>,
    /// Arrivals lost at full buffers.
    pub drops: PerQueue<u64>,
    pub energy_wasted_rate: f64,
    pub collision_rate: f64,
    pub mean_reward: f64,
}

/// Running sums behind a [`MetricsRecord`].
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    slots: u64,
    direct: u64,
    relayed: u64,
    own: u64,
    queue_sum: PerQueue<u64>,
    drops: PerQueue<u64>,
    energy_wasted: u64,
    collisions: u64,
    reward_sum: f64,
}

impl MetricsAccumulator {
    /// Records one slot given its slot-start state, outcome and reward.
    pub fn record(&mut self, start: &NetworkState, outcome: &SlotOutcome, reward: f64) {
        self.slots += 1;
        self.direct += u64::from(outcome.direct_delivery);
        self.relayed += u64::from(outcome.relayed_delivery);
        self.own += u64::from(outcome.own_delivery);
        let q = &start.queues;
        let s = &mut self.queue_sum;
        s.p += u64::from(q.p.len());
        s.pe += u64::from(q.pe.len());
        s.s += u64::from(q.s.len());
        s.ps += u64::from(q.ps.len());
        s.se += u64::from(q.se.len());
        let d = &mut self.drops;
        d.p += u64::from(outcome.drops.p);
        d.pe += u64::from(outcome.drops.pe);
        d.s += u64::from(outcome.drops.s);
        d.ps += u64::from(outcome.drops.ps);
        d.se += u64::from(outcome.drops.se);
        self.energy_wasted += u64::from(outcome.energy_wasted);
        self.collisions += u64::from(outcome.collision);
        self.reward_sum += reward;
    }

    pub fn finish(&self) -> MetricsRecord {
        if self.slots == 0 {
            return MetricsRecord::default();
        }
        let n = self.slots as f64;
        let rate = |x: u64| x as f64 / n;
        MetricsRecord {
            slots: self.slots,
            primary_throughput: rate(self.direct + self.relayed),
            secondary_throughput: rate(self.own),
            relayed_throughput: rate(self.relayed),
            mean_queue: self.queue_sum.map(rate),
            drops: self.drops,
            energy_wasted_rate: rate(self.energy_wasted),
            collision_rate: rate(self.collisions),
            mean_reward: self.reward_sum / n,
        }
    }
}

/// Runs `horizon` slots under `controller` with no learning and aggregates
/// the metrics. The random streams are derived from `seed` under an
/// evaluation-specific name, so they never coincide with training streams
/// of the same seed.
pub fn evaluate<C: Controller + ?Sized>(
    controller: &C,
    model: &ModelParams,
    reward_params: &RewardParams,
    horizon: u64,
    seed: u64,
) -> MetricsRecord {
    let root = RngStream::new(seed).substream("eval");
    let mut env = EnvStreams::new(&root.substream("env"));
    let mut state = NetworkState::initial(model, &mut root.substream("init"));
    let mut acc = MetricsAccumulator::default();
    for _ in 0..horizon {
        let action = controller.act(&state);
        let ctx = RewardContext::from_state(&state);
        let (next, outcome) = step(&state, action, model, &mut env);
        let r = reward(&ctx, action, outcome.r_s, outcome.r_ps, reward_params);
        acc.record(&state, &outcome, r);
        state = next;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::{LevelScheme, StateEncoder};
    use crate::simcore::{ActionMask, PerLink, PerSource};
    use crate::stochastic::{ChannelParams, MmbpParams};

    #[test]
    fn idle_policy_without_primary_traffic() {
        let model = ModelParams::default().with_primary_load(1.0);
        let policy = Policy::constant(StateEncoder::new(LevelScheme::default()), Action::Idle);
        let m = evaluate(&policy, &model, &RewardParams::default(), 20_000, 3);
        assert_eq!(m.secondary_throughput, 0.0);
        assert_eq!(m.primary_throughput, 0.0);
        assert_eq!(m.mean_reward, 0.0);
        assert_eq!(m.slots, 20_000);
    }

    #[test]
    fn non_cooperative_policy_never_relays() {
        let model = ModelParams::default().with_primary_load(0.3);
        let enc = StateEncoder::new(LevelScheme::default());
        let n = enc.state_count();
        let actions = (0..n).map(|s| if s % 3 == 0 { Action::Idle } else { Action::TransmitOwn }).collect();
        let policy = Policy::new(enc, ActionMask::NON_COOPERATIVE, actions).unwrap();
        let m = evaluate(&policy, &model, &RewardParams::default(), 20_000, 4);
        assert_eq!(m.relayed_throughput, 0.0);
        assert_eq!(m.mean_queue.ps, 0.0);
    }

    #[test]
    fn saturated_secondary_is_energy_limited() {
        let on = ChannelParams { gamma: 1.0, q: 0.0 };
        let model = ModelParams {
            channels: PerLink { p: on, s: on, ps: on, sp: on },
            arrivals: PerSource {
                p: MmbpParams { lambda: 1.0, beta: 1.0 },
                pe: MmbpParams { lambda: 0.4, beta: 0.4 },
                s: MmbpParams { lambda: 0.0, beta: 0.0 },
                se: MmbpParams { lambda: 0.8, beta: 0.4 },
            },
            ..Default::default()
        };
        let energy_rate = model.arrivals.se.stationary_arrival_prob().unwrap();
        let policy = |s: &NetworkState| {
            if !s.queues.s.is_empty() && !s.queues.se.is_empty() {
                Action::TransmitOwn
            } else {
                Action::Idle
            }
        };
        let m = evaluate(&policy, &model, &RewardParams::default(), 200_000, 5);
        assert!((m.secondary_throughput - energy_rate.min(1.0)).abs() < 0.01, "{m:?}");
        assert_eq!(m.collision_rate, 0.0);
        assert_eq!(m.energy_wasted_rate, 0.0);
    }
}
