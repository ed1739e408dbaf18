//! Two-state Markov processes driving the network: Markov-modulated Bernoulli
//! arrivals (one per data/energy queue) and Gilbert-Elliott ON/OFF links, plus
//! the seedable random streams that feed them.
//!
//! Every transition consumes exactly one uniform draw and samples the
//! transition row by inverse CDF, so a run is a pure function of its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Transition parameters of an arrival chain.
///
/// `lambda` is the probability of no arrival in the next slot given no arrival
/// in the current one; `beta` is the probability of no arrival in the next
/// slot given an arrival in the current one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmbpParams {
    pub lambda: f64,
    pub beta: f64,
}

impl MmbpParams {
    pub fn new(lambda: f64, beta: f64) -> Result<Self, ModelError> {
        let params = Self { lambda, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_probability("lambda", self.lambda)?;
        check_probability("beta", self.beta)
    }

    /// Long-run fraction of slots carrying an arrival.
    pub fn stationary_arrival_prob(&self) -> Result<f64, ModelError> {
        let leave_idle = 1.0 - self.lambda;
        let denom = leave_idle + self.beta;
        if denom <= 0.0 {
            return Err(ModelError::DegenerateChain {
                what: "arrival chain (lambda = 1, beta = 0)",
            });
        }
        Ok(leave_idle / denom)
    }
}

/// Transition parameters of a two-state link.
///
/// `gamma` is P(OFF -> ON) and `q` is P(ON -> OFF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub gamma: f64,
    pub q: f64,
}

impl ChannelParams {
    pub fn new(gamma: f64, q: f64) -> Result<Self, ModelError> {
        let params = Self { gamma, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_probability("gamma", self.gamma)?;
        check_probability("q", self.q)
    }

    /// Long-run fraction of slots the link is ON.
    pub fn stationary_on_prob(&self) -> Result<f64, ModelError> {
        let denom = self.gamma + self.q;
        if denom <= 0.0 {
            return Err(ModelError::DegenerateChain {
                what: "channel (gamma = 0, q = 0)",
            });
        }
        Ok(self.gamma / denom)
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::InvalidProbability { name, value })
    }
}

/// State of an arrival chain; `true` means the chain emitted an arrival in the
/// slot it was last advanced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ArrivalChainState(pub bool);

impl ArrivalChainState {
    pub const IDLE: Self = Self(false);
    pub const ARRIVING: Self = Self(true);

    pub fn had_arrival(self) -> bool {
        self.0
    }
}

/// Link state; `true` is ON (connected, no outage).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ChannelState(pub bool);

impl ChannelState {
    pub const OFF: Self = Self(false);
    pub const ON: Self = Self(true);

    pub fn is_on(self) -> bool {
        self.0
    }
}

/// Probability that an arrival chain in `state` moves to `next`.
pub fn mmbp_transition_prob(
    state: ArrivalChainState,
    next: ArrivalChainState,
    params: &MmbpParams,
) -> f64 {
    let p_to_idle = if state.0 { params.beta } else { params.lambda };
    if next.0 {
        1.0 - p_to_idle
    } else {
        p_to_idle
    }
}

/// Probability that a link in `state` moves to `next`.
pub fn channel_transition_prob(state: ChannelState, next: ChannelState, params: &ChannelParams) -> f64 {
    let p_to_on = if state.0 { 1.0 - params.q } else { params.gamma };
    if next.0 {
        p_to_on
    } else {
        1.0 - p_to_on
    }
}

/// Advances an arrival chain with a given uniform draw `u` in [0, 1).
/// Returns the next state and the arrival indicator (which is the next state).
pub fn mmbp_step_with(state: ArrivalChainState, params: &MmbpParams, u: f64) -> (ArrivalChainState, bool) {
    let p_to_idle = if state.0 { params.beta } else { params.lambda };
    let next = ArrivalChainState(u >= p_to_idle);
    (next, next.0)
}

pub fn mmbp_step(state: ArrivalChainState, params: &MmbpParams, rng: &mut RngStream) -> (ArrivalChainState, bool) {
    mmbp_step_with(state, params, rng.uniform())
}

/// Advances a link with a given uniform draw `u` in [0, 1).
pub fn channel_step_with(state: ChannelState, params: &ChannelParams, u: f64) -> ChannelState {
    if state.0 {
        ChannelState(u >= params.q)
    } else {
        ChannelState(u < params.gamma)
    }
}

pub fn channel_step(state: ChannelState, params: &ChannelParams, rng: &mut RngStream) -> ChannelState {
    channel_step_with(state, params, rng.uniform())
}

/// Samples an arrival chain state from its stationary law. A chain without a
/// unique stationary law starts idle.
pub fn sample_stationary_arrival(params: &MmbpParams, rng: &mut RngStream) -> ArrivalChainState {
    let u = rng.uniform();
    match params.stationary_arrival_prob() {
        Ok(p) => ArrivalChainState(u < p),
        Err(_) => ArrivalChainState::IDLE,
    }
}

/// Samples a link state from its stationary law. A link without a unique
/// stationary law starts OFF.
pub fn sample_stationary_channel(params: &ChannelParams, rng: &mut RngStream) -> ChannelState {
    let u = rng.uniform();
    match params.stationary_on_prob() {
        Ok(p) => ChannelState(u < p),
        Err(_) => ChannelState::OFF,
    }
}

/// Deterministic random stream.
///
/// Backed by ChaCha8; named substreams select a distinct ChaCha stream id
/// under a key derived from the parent, so adding or removing one substream
/// never perturbs another.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::from_key(splitmix64(seed))
    }

    fn from_key(key: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(0);
        Self { key, rng }
    }

    /// Independent child stream identified by `name`. Depends only on this
    /// stream's seed lineage, never on how many draws were taken from it.
    pub fn substream(&self, name: &str) -> Self {
        Self::from_key(splitmix64(self.key ^ fnv1a(name.as_bytes())))
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

/// Combines a base seed with a list of coordinates into a well-mixed seed.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c.wrapping_add(0x51_7c_c1_b7_27_22_0a_95))))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}
