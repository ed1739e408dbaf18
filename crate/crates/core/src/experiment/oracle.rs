//! Exact dynamic-programming oracle over the full network state.
//!
//! The state is every queue length, every arrival-chain state and every link
//! state. Given a state and an action, the service indicators and therefore
//! the reward are deterministic; randomness enters only through the next
//! arrival-chain states (which are the slot's arrivals) and the next link
//! states, all mutually independent. Transition rows are products of eight
//! two-state factors, and the queue update is the deterministic rule shared
//! with the simulator.
//!
//! Value iteration uses that product structure: the link factor is summed out
//! once per sweep, so a backup costs 16 terms per action instead of 256.

use std::io::Write;

use crate::error::{ArtifactError, OracleError};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::metrics::{evaluate, Controller};
use crate::experiment::mdp::ViOptions;
use crate::rl::{reward, train, Policy, RewardContext, RewardParams, TrainSetup};
use crate::simcore::{
    next_queues, service_indicators, Action, ActionMask, ModelParams, NetworkState, PerLink, PerQueue, PerSource,
    QueueState,
};
use crate::stochastic::{channel_transition_prob, mmbp_transition_prob, ArrivalChainState, ChannelState};

/// Default ceiling on the enumerated state count.
pub const DEFAULT_STATE_CEILING: u64 = 1_000_000;

const CHAIN_COMBOS: usize = 16;

/// A solvable instance: model, reward, discount and allowed actions, with a
/// dense enumeration of the full state space.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    model: ModelParams,
    reward: RewardParams,
    gamma: f64,
    mask: ActionMask,
    radix: [usize; 5],
    queue_states: usize,
    arrival_matrix: [[f64; CHAIN_COMBOS]; CHAIN_COMBOS],
    channel_matrix: [[f64; CHAIN_COMBOS]; CHAIN_COMBOS],
}

impl OracleInstance {
    pub fn new(
        model: ModelParams,
        reward_params: RewardParams,
        gamma: f64,
        mask: ActionMask,
        ceiling: u64,
    ) -> Result<Self, OracleError> {
        model.validate()?;
        reward_params.validate()?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(crate::error::ModelError::InvalidHyper(format!("discount must be in [0, 1), got {gamma}")).into());
        }
        if mask.is_empty() {
            return Err(crate::error::ModelError::InvalidHyper("action mask is empty".into()).into());
        }
        let caps = model.capacity;
        let radix = [caps.p, caps.pe, caps.s, caps.ps, caps.se].map(|c| c as usize + 1);
        let states: u128 = radix.iter().map(|&r| r as u128).product::<u128>() * (CHAIN_COMBOS * CHAIN_COMBOS) as u128;
        if states > u128::from(ceiling) {
            return Err(OracleError::StateSpaceTooLarge { states, ceiling });
        }
        let queue_states = radix.iter().product();

        let mut arrival_matrix = [[0.0; CHAIN_COMBOS]; CHAIN_COMBOS];
        let mut channel_matrix = [[0.0; CHAIN_COMBOS]; CHAIN_COMBOS];
        for from in 0..CHAIN_COMBOS {
            let (af, cf) = (arrival_bits(from), channel_bits(from));
            for to in 0..CHAIN_COMBOS {
                let (at, ct) = (arrival_bits(to), channel_bits(to));
                let a = &model.arrivals;
                arrival_matrix[from][to] = mmbp_transition_prob(af.p, at.p, &a.p)
                    * mmbp_transition_prob(af.pe, at.pe, &a.pe)
                    * mmbp_transition_prob(af.s, at.s, &a.s)
                    * mmbp_transition_prob(af.se, at.se, &a.se);
                let c = &model.channels;
                channel_matrix[from][to] = channel_transition_prob(cf.p, ct.p, &c.p)
                    * channel_transition_prob(cf.s, ct.s, &c.s)
                    * channel_transition_prob(cf.ps, ct.ps, &c.ps)
                    * channel_transition_prob(cf.sp, ct.sp, &c.sp);
            }
        }
        Ok(Self { model, reward: reward_params, gamma, mask, radix, queue_states, arrival_matrix, channel_matrix })
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mask(&self) -> ActionMask {
        self.mask
    }

    pub fn state_count(&self) -> usize {
        self.queue_states * CHAIN_COMBOS * CHAIN_COMBOS
    }

    fn queue_index(&self, q: &PerQueue<QueueState>) -> usize {
        let lens = [q.p.len(), q.pe.len(), q.s.len(), q.ps.len(), q.se.len()];
        lens.iter().zip(self.radix).rev().fold(0, |acc, (&len, r)| acc * r + len as usize)
    }

    fn queues_from_index(&self, mut qi: usize) -> PerQueue<QueueState> {
        let caps = self.model.capacity;
        let mut lens = [0u32; 5];
        for (len, r) in lens.iter_mut().zip(self.radix) {
            *len = (qi % r) as u32;
            qi /= r;
        }
        PerQueue {
            p: QueueState::with_len(lens[0], caps.p),
            pe: QueueState::with_len(lens[1], caps.pe),
            s: QueueState::with_len(lens[2], caps.s),
            ps: QueueState::with_len(lens[3], caps.ps),
            se: QueueState::with_len(lens[4], caps.se),
        }
    }

    fn compose(&self, queue: usize, arrivals: usize, channels: usize) -> usize {
        queue + self.queue_states * (arrivals + CHAIN_COMBOS * channels)
    }

    /// Dense index of a network state (the slot counter is ignored).
    pub fn index_of(&self, state: &NetworkState) -> usize {
        let a = &state.arrivals;
        let arrivals = usize::from(a.p.0) | usize::from(a.pe.0) << 1 | usize::from(a.s.0) << 2 | usize::from(a.se.0) << 3;
        let c = &state.channels;
        let channels = usize::from(c.p.0) | usize::from(c.s.0) << 1 | usize::from(c.ps.0) << 2 | usize::from(c.sp.0) << 3;
        self.compose(self.queue_index(&state.queues), arrivals, channels)
    }

    pub fn state_at(&self, index: usize) -> NetworkState {
        let queue = index % self.queue_states;
        let rest = index / self.queue_states;
        NetworkState {
            queues: self.queues_from_index(queue),
            arrivals: arrival_bits(rest % CHAIN_COMBOS),
            channels: channel_bits(rest / CHAIN_COMBOS),
            slot: 0,
        }
    }

    /// Immediate reward; deterministic given the state and action.
    pub fn expected_reward(&self, state: &NetworkState, action: Action) -> f64 {
        let outcome = service_indicators(state, action, &self.model);
        reward(&RewardContext::from_state(state), action, outcome.r_s, outcome.r_ps, &self.reward)
    }

    /// Explicit transition row `(next index, probability)` with zero-probability
    /// entries omitted.
    pub fn transition_row(&self, index: usize, action: Action) -> Vec<(usize, f64)> {
        let state = self.state_at(index);
        let rest = index / self.queue_states;
        let (arr, ch) = (rest % CHAIN_COMBOS, rest / CHAIN_COMBOS);
        let outcome = service_indicators(&state, action, &self.model);
        let mut row = Vec::with_capacity(CHAIN_COMBOS * CHAIN_COMBOS);
        for arr_next in 0..CHAIN_COMBOS {
            let pa = self.arrival_matrix[arr][arr_next];
            if pa == 0.0 {
                continue;
            }
            let arrivals = arrival_bits(arr_next).map(|a| a.0);
            let (queues, _) = next_queues(&state.queues, &outcome, arrivals);
            let qn = self.queue_index(&queues);
            for ch_next in 0..CHAIN_COMBOS {
                let p = pa * self.channel_matrix[ch][ch_next];
                if p > 0.0 {
                    row.push((self.compose(qn, arr_next, ch_next), p));
                }
            }
        }
        row
    }

    /// Largest `|sum of row - 1|` over every state and allowed action.
    pub fn max_row_sum_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..self.state_count() {
            for a in self.mask.iter() {
                let sum: f64 = self.transition_row(s, a).iter().map(|&(_, p)| p).sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }

    /// Greedy Bellman backup of one state using its explicit transition rows.
    pub fn backup_explicit(&self, index: usize, values: &[f64]) -> (f64, Action) {
        let state = self.state_at(index);
        let mut best = (f64::NEG_INFINITY, Action::Idle);
        for a in self.mask.iter() {
            let future: f64 = self.transition_row(index, a).iter().map(|&(t, p)| p * values[t]).sum();
            let q = self.expected_reward(&state, a) + self.gamma * future;
            if q > best.0 {
                best = (q, a);
            }
        }
        best
    }

    fn tables(&self) -> Tables {
        let combos = self.queue_states * CHAIN_COMBOS * Action::COUNT;
        let mut reward_table = vec![0.0; combos];
        let mut next_queue = vec![0u32; combos * CHAIN_COMBOS];
        for q in 0..self.queue_states {
            for ch in 0..CHAIN_COMBOS {
                let state = self.state_at(self.compose(q, 0, ch));
                for a in self.mask.iter() {
                    let k = (q * CHAIN_COMBOS + ch) * Action::COUNT + a.index();
                    let outcome = service_indicators(&state, a, &self.model);
                    reward_table[k] =
                        reward(&RewardContext::from_state(&state), a, outcome.r_s, outcome.r_ps, &self.reward);
                    for arr_next in 0..CHAIN_COMBOS {
                        let arrivals = arrival_bits(arr_next).map(|x| x.0);
                        let (queues, _) = next_queues(&state.queues, &outcome, arrivals);
                        next_queue[k * CHAIN_COMBOS + arr_next] = self.queue_index(&queues) as u32;
                    }
                }
            }
        }
        Tables { reward: reward_table, next_queue }
    }

    /// One synchronous Bellman sweep using the factored transition model.
    /// Writes the new values and greedy actions; returns the sup-norm change.
    fn sweep(&self, tables: &Tables, values: &[f64], expected_link: &mut [f64], out: &mut [f64], policy: &mut [Action]) -> f64 {
        let nq = self.queue_states;
        // expected_link[(q * 16 + arr) * 16 + ch] = sum_ch' P(ch' | ch) V(q, arr, ch')
        for q in 0..nq {
            for arr in 0..CHAIN_COMBOS {
                let base = (q * CHAIN_COMBOS + arr) * CHAIN_COMBOS;
                for ch in 0..CHAIN_COMBOS {
                    let row = &self.channel_matrix[ch];
                    let mut acc = 0.0;
                    for (ch_next, &p) in row.iter().enumerate() {
                        acc += p * values[self.compose(q, arr, ch_next)];
                    }
                    expected_link[base + ch] = acc;
                }
            }
        }
        let mut residual: f64 = 0.0;
        for ch in 0..CHAIN_COMBOS {
            for arr in 0..CHAIN_COMBOS {
                let arr_row = &self.arrival_matrix[arr];
                for q in 0..nq {
                    let mut best = (f64::NEG_INFINITY, Action::Idle);
                    for a in self.mask.iter() {
                        let k = (q * CHAIN_COMBOS + ch) * Action::COUNT + a.index();
                        let nexts = &tables.next_queue[k * CHAIN_COMBOS..(k + 1) * CHAIN_COMBOS];
                        let mut future = 0.0;
                        for (arr_next, &p) in arr_row.iter().enumerate() {
                            let qn = nexts[arr_next] as usize;
                            future += p * expected_link[(qn * CHAIN_COMBOS + arr_next) * CHAIN_COMBOS + ch];
                        }
                        let v = tables.reward[k] + self.gamma * future;
                        if v > best.0 {
                            best = (v, a);
                        }
                    }
                    let s = self.compose(q, arr, ch);
                    residual = residual.max((best.0 - values[s]).abs());
                    out[s] = best.0;
                    policy[s] = best.1;
                }
            }
        }
        residual
    }

    /// Applies one factored Bellman backup to `values`.
    pub fn backup_all(&self, values: &[f64]) -> (Vec<f64>, Vec<Action>) {
        let tables = self.tables();
        let n = self.state_count();
        let mut out = vec![0.0; n];
        let mut policy = vec![Action::Idle; n];
        let mut link = vec![0.0; self.queue_states * CHAIN_COMBOS * CHAIN_COMBOS];
        self.sweep(&tables, values, &mut link, &mut out, &mut policy);
        (out, policy)
    }
}

struct Tables {
    reward: Vec<f64>,
    next_queue: Vec<u32>,
}

fn arrival_bits(bits: usize) -> PerSource<ArrivalChainState> {
    PerSource {
        p: ArrivalChainState(bits & 1 != 0),
        pe: ArrivalChainState(bits & 2 != 0),
        s: ArrivalChainState(bits & 4 != 0),
        se: ArrivalChainState(bits & 8 != 0),
    }
}

fn channel_bits(bits: usize) -> PerLink<ChannelState> {
    PerLink {
        p: ChannelState(bits & 1 != 0),
        s: ChannelState(bits & 2 != 0),
        ps: ChannelState(bits & 4 != 0),
        sp: ChannelState(bits & 8 != 0),
    }
}

/// Optimal values and policy of an [`OracleInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub values: Vec<f64>,
    pub policy: Vec<Action>,
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm bound on `|V - V*|`: `residual * gamma / (1 - gamma)`.
    pub optimality_gap_bound: f64,
}

/// Value iteration until the sup-norm change drops below `opts.tolerance`.
pub fn value_iteration(instance: &OracleInstance, opts: &ViOptions) -> OracleSolution {
    let tables = instance.tables();
    let n = instance.state_count();
    let mut values = vec![opts.initial_value; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![Action::Idle; n];
    let mut link = vec![0.0; instance.queue_states * CHAIN_COMBOS * CHAIN_COMBOS];
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        residual = instance.sweep(&tables, &values, &mut link, &mut next, &mut policy);
        std::mem::swap(&mut values, &mut next);
        sweeps += 1;
        if residual < opts.tolerance {
            break;
        }
    }
    // Greedy policy with respect to the returned values.
    instance.sweep(&tables, &values, &mut link, &mut next, &mut policy);
    let gamma = instance.gamma;
    OracleSolution {
        values,
        policy,
        sweeps,
        residual,
        converged: residual < opts.tolerance,
        optimality_gap_bound: if gamma > 0.0 { residual * gamma / (1.0 - gamma) } else { 0.0 },
    }
}

/// Acts with the oracle's exact policy.
#[derive(Debug, Clone, Copy)]
pub struct OracleController<'a> {
    pub instance: &'a OracleInstance,
    pub solution: &'a OracleSolution,
}

impl Controller for OracleController<'_> {
    fn act(&self, state: &NetworkState) -> Action {
        self.solution.policy[self.instance.index_of(state)]
    }
}

/// Long-run comparison of a learned controller with the oracle policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub oracle_mean_reward: f64,
    pub learned_mean_reward: f64,
    /// `(oracle - learned) / max(|oracle|, 1e-9)`.
    pub gap: f64,
}

/// Simulates both controllers for `slots` slots on each seed (the same
/// seeds for both) and compares their mean per-slot reward.
pub fn oracle_gap<C: Controller>(
    learned: &C,
    instance: &OracleInstance,
    solution: &OracleSolution,
    slots: u64,
    seeds: &[u64],
) -> GapReport {
    let oracle = OracleController { instance, solution };
    let mean = |c: &dyn Controller| {
        seeds
            .iter()
            .map(|&seed| evaluate(c, &instance.model, &instance.reward, slots, seed).mean_reward)
            .sum::<f64>()
            / seeds.len().max(1) as f64
    };
    let oracle_mean_reward = mean(&oracle);
    let learned_mean_reward = mean(learned);
    GapReport {
        oracle_mean_reward,
        learned_mean_reward,
        gap: (oracle_mean_reward - learned_mean_reward) / oracle_mean_reward.abs().max(1e-9),
    }
}

/// Everything the `oracle` command produces.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub instance: OracleInstance,
    pub solution: OracleSolution,
    pub learned: Policy,
    pub report: GapReport,
    pub row_sum_error: f64,
}

/// Builds the shrunk instance from `config`, solves it, trains a learner on
/// the same model with `train_seed` and compares both by simulation.
pub fn run_oracle(config: &ExperimentConfig, train_seed: u64) -> Result<OracleRun, OracleError> {
    let (model, reward_params) = config.oracle_model();
    let mask = config.run.mode.mask();
    let instance = OracleInstance::new(model, reward_params, config.learning.gamma, mask, config.oracle.max_states)?;
    let row_sum_error = instance.max_row_sum_error();
    let solution = value_iteration(&instance, &config.oracle_vi_options());
    let setup = TrainSetup {
        model: &instance.model,
        reward: &instance.reward,
        scheme: &config.oracle.levels,
        learning: &config.learning,
        mask,
        horizon: config.oracle.train_horizon,
    };
    let learned = train(&setup, train_seed)?.policy;
    let report = oracle_gap(&learned, &instance, &solution, config.oracle.eval_slots, &config.oracle.seeds);
    Ok(OracleRun { instance, solution, learned, report, row_sum_error })
}

pub const VALUES_HEADER: [&str; 10] = ["state", "q_p", "q_pe", "q_s", "q_ps", "q_se", "arrivals", "channels", "value", "action"];

/// Writes `V*` and `pi*` as CSV, one row per full state. Arrival and link
/// states are bit strings in the order p, pe, s, se and p, s, ps, sp.
pub fn write_values_csv<W: Write>(instance: &OracleInstance, solution: &OracleSolution, out: W) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VALUES_HEADER)?;
    let bit = |b: bool| if b { '1' } else { '0' };
    for (i, (&v, &a)) in solution.values.iter().zip(&solution.policy).enumerate() {
        let st = instance.state_at(i);
        let q = &st.queues;
        let ar = &st.arrivals;
        let ch = &st.channels;
        let arrivals: String = [ar.p.0, ar.pe.0, ar.s.0, ar.se.0].into_iter().map(bit).collect();
        let channels: String = [ch.p.0, ch.s.0, ch.ps.0, ch.sp.0].into_iter().map(bit).collect();
        w.write_record([
            i.to_string(),
            q.p.len().to_string(),
            q.pe.len().to_string(),
            q.s.len().to_string(),
            q.ps.len().to_string(),
            q.se.len().to_string(),
            arrivals,
            channels,
            v.to_string(),
            a.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
