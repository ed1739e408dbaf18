//! Slotted network state machine.
//!
//! Five finite queues (primary data and energy, secondary data, relay and
//! secondary energy), four two-state links and the four-action secondary MAC.
//! [`step`] advances one slot: service indicators are evaluated on the
//! slot-start state, departures are applied before arrivals, and the links
//! are advanced last so the secondary user sees the next slot's channel bits
//! before it acts.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::stochastic::{
    channel_step, mmbp_step, sample_stationary_arrival, sample_stationary_channel, ArrivalChainState,
    ChannelParams, ChannelState, MmbpParams, RngStream,
};

/// Secondary user action for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Transmit a packet from the own data queue.
    TransmitOwn,
    /// Transmit a packet from the relay queue to the primary destination.
    TransmitRelay,
    /// Decode and accept the current primary packet for relaying.
    AcceptPrimary,
    Idle,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::TransmitOwn, Action::TransmitRelay, Action::AcceptPrimary, Action::Idle];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::TransmitOwn => "a1",
            Action::TransmitRelay => "a2",
            Action::AcceptPrimary => "a3",
            Action::Idle => "a4",
        }
    }
}

/// Set of actions the secondary user may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionMask(u8);

impl ActionMask {
    pub const FULL: Self = Self(0b1111);
    /// Own transmissions and idling only: the user never relays.
    pub const NON_COOPERATIVE: Self = Self(0b1001);

    pub fn from_actions(actions: &[Action]) -> Self {
        Self(actions.iter().fold(0, |m, a| m | (1 << a.index())))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits & !0b1111 == 0).then_some(Self(bits))
    }

    pub fn contains(self, action: Action) -> bool {
        self.0 & (1 << action.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }
}

/// One value per network queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerQueue<T> {
    /// Primary data queue.
    pub p: T,
    /// Primary energy queue.
    pub pe: T,
    /// Secondary data queue.
    pub s: T,
    /// Relay queue holding accepted primary packets.
    pub ps: T,
    /// Secondary energy queue.
    pub se: T,
}

impl<T> PerQueue<T> {
    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerQueue<U> {
        PerQueue { p: f(self.p), pe: f(self.pe), s: f(self.s), ps: f(self.ps), se: f(self.se) }
    }

    pub fn as_array(&self) -> [&T; 5] {
        [&self.p, &self.pe, &self.s, &self.ps, &self.se]
    }
}

/// One value per exogenous arrival process (the relay queue is fed by the MAC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerSource<T> {
    pub p: T,
    pub pe: T,
    pub s: T,
    pub se: T,
}

impl<T> PerSource<T> {
    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerSource<U> {
        PerSource { p: f(self.p), pe: f(self.pe), s: f(self.s), se: f(self.se) }
    }
}

/// One value per link: primary (PU to its destination), secondary (SU to its
/// destination), PU to SU, and SU to the primary destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerLink<T> {
    pub p: T,
    pub s: T,
    pub ps: T,
    pub sp: T,
}

impl<T> PerLink<T> {
    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerLink<U> {
        PerLink { p: f(self.p), s: f(self.s), ps: f(self.ps), sp: f(self.sp) }
    }
}

/// Finite FIFO packet counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QueueState {
    len: u32,
    capacity: u32,
}

impl QueueState {
    pub fn new(capacity: u32) -> Self {
        Self { len: 0, capacity }
    }

    /// Queue holding `len` packets, clamped to the capacity.
    pub fn with_len(len: u32, capacity: u32) -> Self {
        Self { len: len.min(capacity), capacity }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len >= self.capacity
    }

    /// `len <- min(max(len - served, 0) + arrived, capacity)`.
    /// Returns true when the arrival was dropped at a full buffer.
    pub fn apply(&mut self, served: bool, arrived: bool) -> bool {
        let after_service = self.len.saturating_sub(u32::from(served));
        let total = after_service + u32::from(arrived);
        self.len = total.min(self.capacity);
        total > self.capacity
    }
}

/// Everything needed to simulate the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub capacity: PerQueue<u32>,
    pub arrivals: PerSource<MmbpParams>,
    pub channels: PerLink<ChannelParams>,
    /// Let the primary destination decode a direct transmission while the
    /// secondary user is accepting the packet. Off by default: under
    /// `AcceptPrimary` with the direct link ON the primary packet is not served.
    #[serde(default)]
    pub direct_decode_on_accept: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            capacity: PerQueue { p: 20, pe: 20, s: 20, ps: 20, se: 20 },
            arrivals: PerSource {
                p: MmbpParams { lambda: 0.5, beta: 0.5 },
                pe: MmbpParams { lambda: 0.4, beta: 0.4 },
                s: MmbpParams { lambda: 0.4, beta: 0.4 },
                se: MmbpParams { lambda: 0.8, beta: 0.4 },
            },
            channels: PerLink {
                p: ChannelParams { gamma: 0.2, q: 0.4 },
                s: ChannelParams { gamma: 0.6, q: 0.1 },
                ps: ChannelParams { gamma: 0.7, q: 0.2 },
                sp: ChannelParams { gamma: 0.8, q: 0.05 },
            },
            direct_decode_on_accept: false,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for &c in self.capacity.as_array() {
            if c < 1 {
                return Err(ModelError::InvalidCapacity(c));
            }
        }
        let a = &self.arrivals;
        for m in [&a.p, &a.pe, &a.s, &a.se] {
            m.validate()?;
        }
        let c = &self.channels;
        for ch in [&c.p, &c.s, &c.ps, &c.sp] {
            ch.validate()?;
        }
        Ok(())
    }

    /// Sets the primary data arrival chain to `lambda = beta = x`, giving a
    /// mean primary arrival rate of `1 - x`.
    pub fn with_primary_load(mut self, x: f64) -> Self {
        self.arrivals.p = MmbpParams { lambda: x, beta: x };
        self
    }
}

/// Full simulator state at a slot boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetworkState {
    pub queues: PerQueue<QueueState>,
    /// Link states in effect for the current slot.
    pub channels: PerLink<ChannelState>,
    /// Arrival chain states; each equals the arrival indicator of the slot
    /// that produced it.
    pub arrivals: PerSource<ArrivalChainState>,
    pub slot: u64,
}

impl NetworkState {
    /// Empty queues, all links OFF, all arrival chains idle.
    pub fn empty(params: &ModelParams) -> Self {
        Self {
            queues: params.capacity.map(QueueState::new),
            channels: PerLink::default(),
            arrivals: PerSource::default(),
            slot: 0,
        }
    }

    /// Empty queues with link and arrival chains drawn from their stationary
    /// distributions.
    pub fn initial(params: &ModelParams, rng: &mut RngStream) -> Self {
        let a = &params.arrivals;
        let c = &params.channels;
        Self {
            queues: params.capacity.map(QueueState::new),
            arrivals: PerSource {
                p: sample_stationary_arrival(&a.p, rng),
                pe: sample_stationary_arrival(&a.pe, rng),
                s: sample_stationary_arrival(&a.s, rng),
                se: sample_stationary_arrival(&a.se, rng),
            },
            channels: PerLink {
                p: sample_stationary_channel(&c.p, rng),
                s: sample_stationary_channel(&c.s, rng),
                ps: sample_stationary_channel(&c.ps, rng),
                sp: sample_stationary_channel(&c.sp, rng),
            },
            slot: 0,
        }
    }

    pub fn pu_active(&self) -> bool {
        pu_active(self)
    }

    pub fn observe(&self) -> Observation {
        observables(self)
    }
}

/// The primary user transmits whenever it holds both a data and an energy packet.
pub fn pu_active(state: &NetworkState) -> bool {
    !state.queues.p.is_empty() && !state.queues.pe.is_empty()
}

/// What the secondary user knows at decision time. Primary queue lengths are
/// hidden; only the sensed activity is exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Observation {
    pub pu_active: bool,
    pub q_ps: u32,
    pub q_se: u32,
    pub q_s: u32,
    pub ch_sp: bool,
    pub ch_s: bool,
    pub ch_p: bool,
    pub ch_ps: bool,
}

pub fn observables(state: &NetworkState) -> Observation {
    Observation {
        pu_active: pu_active(state),
        q_ps: state.queues.ps.len(),
        q_se: state.queues.se.len(),
        q_s: state.queues.s.len(),
        ch_sp: state.channels.sp.is_on(),
        ch_s: state.channels.s.is_on(),
        ch_p: state.channels.p.is_on(),
        ch_ps: state.channels.ps.is_on(),
    }
}

/// Per-slot service, arrival and event indicators.
///
/// `r_*` and `a_ps_in` are the raw service/arrival indicators; a raw service
/// indicator may be set for an empty queue, in which case nothing departs.
/// The `*_delivery` flags count packets that actually left a queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotOutcome {
    pub r_s: bool,
    pub r_ps: bool,
    pub a_ps_in: bool,
    pub r_se: bool,
    pub r_p: bool,
    pub r_pe: bool,
    pub arrivals: PerSource<bool>,
    pub pu_active: bool,
    /// Primary packet decoded at the primary destination over the direct link.
    pub direct_delivery: bool,
    /// Relay-queue packet delivered to the primary destination.
    pub relayed_delivery: bool,
    /// Own secondary packet delivered.
    pub own_delivery: bool,
    pub collision: bool,
    pub energy_wasted: bool,
    pub drops: PerQueue<bool>,
}

/// Evaluates the service indicators for `action` on the slot-start `state`.
/// Arrivals and drops are left unset.
pub fn service_indicators(state: &NetworkState, action: Action, params: &ModelParams) -> SlotOutcome {
    let q = &state.queues;
    let ch = &state.channels;
    let act = pu_active(state);
    let has_p = !q.p.is_empty();
    let has_pe = !q.pe.is_empty();
    let has_s = !q.s.is_empty();
    let has_ps = !q.ps.is_empty();
    let has_se = !q.se.is_empty();
    let relay_room = !q.ps.is_full();
    let (ch_p, ch_s, ch_ps, ch_sp) = (ch.p.is_on(), ch.s.is_on(), ch.ps.is_on(), ch.sp.is_on());

    let a1 = action == Action::TransmitOwn;
    let a2 = action == Action::TransmitRelay;
    let a3 = action == Action::AcceptPrimary;
    let a4 = action == Action::Idle;

    let r_s = a1 && ch_s && !act && has_se;
    let r_ps = a2 && ch_sp && !act && has_se;
    let a_ps_in = a3 && ch_ps && has_p && has_pe && !ch_p && relay_room;
    let r_se = (a1 && has_s) || (a2 && has_ps);
    let direct_ok = a4 || (a3 && params.direct_decode_on_accept);
    let r_p = has_pe && ((direct_ok && ch_p) || (a3 && ch_ps && !ch_p && relay_room));
    let r_pe = has_p;

    let transmits = a1 || a2;
    SlotOutcome {
        r_s,
        r_ps,
        a_ps_in,
        r_se,
        r_p,
        r_pe,
        arrivals: PerSource::default(),
        pu_active: act,
        direct_delivery: direct_ok && ch_p && act,
        relayed_delivery: r_ps && has_ps,
        own_delivery: r_s && has_s,
        collision: act && transmits,
        energy_wasted: r_se && has_se && !((r_s && has_s) || (r_ps && has_ps)),
        drops: PerQueue::default(),
    }
}

/// Independent random streams for the eight exogenous processes of one run.
#[derive(Debug, Clone)]
pub struct EnvStreams {
    arrivals: PerSource<RngStream>,
    channels: PerLink<RngStream>,
}

impl EnvStreams {
    pub fn new(root: &RngStream) -> Self {
        Self {
            arrivals: PerSource {
                p: root.substream("arrival.p"),
                pe: root.substream("arrival.pe"),
                s: root.substream("arrival.s"),
                se: root.substream("arrival.se"),
            },
            channels: PerLink {
                p: root.substream("channel.p"),
                s: root.substream("channel.s"),
                ps: root.substream("channel.ps"),
                sp: root.substream("channel.sp"),
            },
        }
    }
}

/// Advances the network by one slot under `action`.
pub fn step(
    state: &NetworkState,
    action: Action,
    params: &ModelParams,
    env: &mut EnvStreams,
) -> (NetworkState, SlotOutcome) {
    let mut outcome = service_indicators(state, action, params);
    let mut next = *state;

    let ap = &params.arrivals;
    let (arr_p, in_p) = mmbp_step(state.arrivals.p, &ap.p, &mut env.arrivals.p);
    let (arr_pe, in_pe) = mmbp_step(state.arrivals.pe, &ap.pe, &mut env.arrivals.pe);
    let (arr_s, in_s) = mmbp_step(state.arrivals.s, &ap.s, &mut env.arrivals.s);
    let (arr_se, in_se) = mmbp_step(state.arrivals.se, &ap.se, &mut env.arrivals.se);
    next.arrivals = PerSource { p: arr_p, pe: arr_pe, s: arr_s, se: arr_se };
    outcome.arrivals = PerSource { p: in_p, pe: in_pe, s: in_s, se: in_se };

    let (queues, drops) = next_queues(&state.queues, &outcome, outcome.arrivals);
    next.queues = queues;
    outcome.drops = drops;

    let cp = &params.channels;
    next.channels = PerLink {
        p: channel_step(state.channels.p, &cp.p, &mut env.channels.p),
        s: channel_step(state.channels.s, &cp.s, &mut env.channels.s),
        ps: channel_step(state.channels.ps, &cp.ps, &mut env.channels.ps),
        sp: channel_step(state.channels.sp, &cp.sp, &mut env.channels.sp),
    };
    next.slot = state.slot + 1;
    (next, outcome)
}

/// Deterministic queue update given the slot's service indicators and
/// exogenous arrivals. Returns the new queues and which arrivals were dropped.
/// Shared by the simulator and the exact transition model.
pub fn next_queues(
    queues: &PerQueue<QueueState>,
    outcome: &SlotOutcome,
    arrivals: PerSource<bool>,
) -> (PerQueue<QueueState>, PerQueue<bool>) {
    let mut q = *queues;
    let drops = PerQueue {
        p: q.p.apply(outcome.r_p, arrivals.p),
        pe: q.pe.apply(outcome.r_pe, arrivals.pe),
        s: q.s.apply(outcome.r_s, arrivals.s),
        ps: q.ps.apply(outcome.r_ps, outcome.a_ps_in),
        se: q.se.apply(outcome.r_se, arrivals.se),
    };
    (q, drops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_with(params: &ModelParams, lens: [u32; 5], ch: [bool; 4]) -> NetworkState {
        let mut s = NetworkState::empty(params);
        let c = &params.capacity;
        s.queues = PerQueue {
            p: QueueState::with_len(lens[0], c.p),
            pe: QueueState::with_len(lens[1], c.pe),
            s: QueueState::with_len(lens[2], c.s),
            ps: QueueState::with_len(lens[3], c.ps),
            se: QueueState::with_len(lens[4], c.se),
        };
        s.channels = PerLink { p: ChannelState(ch[0]), s: ChannelState(ch[1]), ps: ChannelState(ch[2]), sp: ChannelState(ch[3]) };
        s
    }

    /// No exogenous arrivals ever: every chain is absorbed in the idle state.
    fn silent_params() -> ModelParams {
        let mut p = ModelParams::default();
        let silent = MmbpParams { lambda: 1.0, beta: 1.0 };
        p.arrivals = PerSource { p: silent, pe: silent, s: silent, se: silent };
        p
    }

    #[test]
    fn pu_activity_needs_data_and_energy() {
        let p = ModelParams::default();
        assert!(!state_with(&p, [0, 5, 0, 0, 0], [false; 4]).pu_active());
        assert!(state_with(&p, [3, 2, 0, 0, 0], [false; 4]).pu_active());
        assert!(!state_with(&p, [3, 0, 0, 0, 0], [false; 4]).pu_active());
    }

    #[test]
    fn idle_lets_primary_through() {
        let p = ModelParams::default();
        let s = state_with(&p, [3, 2, 4, 4, 4], [true, true, true, true]);
        let o = service_indicators(&s, Action::Idle, &p);
        assert!(o.r_p && o.r_pe && o.direct_delivery);
        assert!(!o.r_s && !o.r_ps && !o.a_ps_in && !o.r_se && !o.relayed_delivery);
    }

    #[test]
    fn accept_moves_primary_packet_to_relay_queue() {
        let p = ModelParams::default();
        let s = state_with(&p, [3, 2, 0, 0, 0], [false, false, true, false]);
        let o = service_indicators(&s, Action::AcceptPrimary, &p);
        assert!(o.a_ps_in && o.r_p && o.r_pe);
        assert!(!o.direct_delivery);
    }

    #[test]
    fn transmitting_on_off_channel_wastes_energy() {
        let p = ModelParams::default();
        let s = state_with(&p, [0, 0, 5, 0, 2], [false, false, false, false]);
        let o = service_indicators(&s, Action::TransmitOwn, &p);
        assert!(!o.r_s && o.r_se && o.energy_wasted);
        assert!(!o.collision);

        // Nothing to relay: no energy leaves the queue, so none is wasted.
        let s = state_with(&p, [0, 0, 5, 0, 2], [false, true, true, true]);
        let o = service_indicators(&s, Action::TransmitRelay, &p);
        assert!(o.r_ps && !o.r_se && !o.energy_wasted && !o.relayed_delivery);
    }

    #[test]
    fn accept_with_direct_link_on_serves_nothing_unless_enabled() {
        let mut p = ModelParams::default();
        let s = state_with(&p, [3, 2, 0, 0, 0], [true, false, true, false]);
        let o = service_indicators(&s, Action::AcceptPrimary, &p);
        assert!(!o.r_p && !o.a_ps_in && !o.direct_delivery);
        p.direct_decode_on_accept = true;
        let o = service_indicators(&s, Action::AcceptPrimary, &p);
        assert!(o.r_p && o.direct_delivery && !o.a_ps_in);
    }

    #[test]
    fn relay_transmission_drains_relay_and_energy() {
        let p = silent_params();
        let s = state_with(&p, [0, 0, 0, 4, 1], [false, false, false, true]);
        let mut env = EnvStreams::new(&RngStream::new(3));
        let (next, o) = step(&s, Action::TransmitRelay, &p, &mut env);
        assert_eq!(next.queues.ps.len(), 3);
        assert_eq!(next.queues.se.len(), 0);
        assert!(o.relayed_delivery && o.r_ps);
        assert_eq!(next.slot, 1);
    }

    #[test]
    fn full_primary_queue_drops_arrival() {
        let mut p = ModelParams::default();
        // Arrival chain pinned in the arriving state.
        p.arrivals.p = MmbpParams { lambda: 0.0, beta: 0.0 };
        let mut s = state_with(&p, [20, 0, 0, 0, 0], [false; 4]);
        s.arrivals.p = ArrivalChainState::ARRIVING;
        let mut env = EnvStreams::new(&RngStream::new(4));
        let (next, o) = step(&s, Action::Idle, &p, &mut env);
        assert!(!o.r_p);
        assert!(o.arrivals.p && o.drops.p);
        assert_eq!(next.queues.p.len(), 20);
    }

    #[test]
    fn primary_energy_floor_at_zero() {
        let p = silent_params();
        let s = state_with(&p, [2, 0, 0, 0, 0], [false; 4]);
        let mut env = EnvStreams::new(&RngStream::new(5));
        let (next, o) = step(&s, Action::Idle, &p, &mut env);
        assert!(o.r_pe);
        assert_eq!(next.queues.pe.len(), 0);
        assert_eq!(next.queues.p.len(), 2);
    }

    #[test]
    fn observation_extraction() {
        let p = ModelParams::default();
        assert_eq!(state_with(&p, [0; 5], [false; 4]).observe(), Observation::default());
        let o = state_with(&p, [1, 1, 0, 0, 0], [false; 4]).observe();
        assert!(o.pu_active);
        let o = state_with(&p, [0, 3, 7, 0, 20], [true; 4]).observe();
        assert_eq!(
            o,
            Observation { pu_active: false, q_ps: 0, q_se: 20, q_s: 7, ch_sp: true, ch_s: true, ch_p: true, ch_ps: true }
        );
    }

    #[test]
    fn queue_apply_caps_and_floors() {
        let mut q = QueueState::new(2);
        assert!(!q.apply(true, false));
        assert_eq!(q.len(), 0);
        q.apply(false, true);
        q.apply(false, true);
        assert!(q.is_full());
        assert!(q.apply(false, true));
        assert_eq!(q.len(), 2);
        assert!(!q.apply(true, true));
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn mask_membership() {
        assert_eq!(ActionMask::FULL.len(), 4);
        let nc: Vec<_> = ActionMask::NON_COOPERATIVE.iter().collect();
        assert_eq!(nc, vec![Action::TransmitOwn, Action::Idle]);
        assert_eq!(ActionMask::from_actions(&[Action::TransmitOwn, Action::Idle]), ActionMask::NON_COOPERATIVE);
        assert!(ActionMask::from_bits(0x10).is_none());
    }
}
