//! Immediate reward of the secondary user.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::simcore::{Action, NetworkState};

/// Which link gates the wasted-energy penalty of a relay transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelayPenaltyLink {
    /// The link the relay transmission actually uses (SU to primary destination).
    #[default]
    SuToPrimaryDestination,
    /// The PU-to-SU link, as the reward is sometimes written.
    PuToSu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardParams {
    /// Weight of own-traffic service; relay service gets `1 - omega`.
    pub omega: f64,
    /// Penalty constant K.
    pub penalty_k: f64,
    #[serde(default)]
    pub relay_penalty_link: RelayPenaltyLink,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { omega: 0.5, penalty_k: 10.0, relay_penalty_link: RelayPenaltyLink::default() }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(ModelError::InvalidProbability { name: "omega", value: self.omega });
        }
        if !(self.penalty_k >= 0.0 && self.penalty_k.is_finite()) {
            return Err(ModelError::InvalidHyper(format!("penalty K must be finite and >= 0, got {}", self.penalty_k)));
        }
        Ok(())
    }
}

/// Slot-start facts the reward depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RewardContext {
    pub pu_active: bool,
    pub ch_p: bool,
    pub ch_s: bool,
    pub ch_ps: bool,
    pub ch_sp: bool,
    pub has_s: bool,
    pub has_ps: bool,
    pub has_se: bool,
    pub relay_full: bool,
}

impl RewardContext {
    pub fn from_state(state: &NetworkState) -> Self {
        let q = &state.queues;
        let ch = &state.channels;
        Self {
            pu_active: state.pu_active(),
            ch_p: ch.p.is_on(),
            ch_s: ch.s.is_on(),
            ch_ps: ch.ps.is_on(),
            ch_sp: ch.sp.is_on(),
            has_s: !q.s.is_empty(),
            has_ps: !q.ps.is_empty(),
            has_se: !q.se.is_empty(),
            relay_full: q.ps.is_full(),
        }
    }
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Number of penalty terms triggered by `action` in context `ctx`.
pub fn penalty_count(ctx: &RewardContext, action: Action, link: RelayPenaltyLink) -> u32 {
    let relay_link = match link {
        RelayPenaltyLink::SuToPrimaryDestination => ctx.ch_sp,
        RelayPenaltyLink::PuToSu => ctx.ch_ps,
    };
    let act = ctx.pu_active;
    match action {
        Action::TransmitOwn => u32::from(act) + u32::from(!(ctx.ch_s && ctx.has_s && ctx.has_se)),
        Action::TransmitRelay => u32::from(act) + u32::from(!(relay_link && ctx.has_ps && ctx.has_se)),
        Action::AcceptPrimary => {
            u32::from(ctx.relay_full) + u32::from(ctx.ch_p && act) + u32::from(!(ctx.ch_ps && act))
        }
        Action::Idle => 0,
    }
}

/// Weighted service of the two secondary data queues minus K times the number
/// of violated access rules (collision, wasted energy, accepting into a full
/// relay queue, accepting when the primary destination decodes or the PU is
/// silent or unreachable).
pub fn reward(ctx: &RewardContext, action: Action, r_s: bool, r_ps: bool, params: &RewardParams) -> f64 {
    let gain = params.omega * ind(r_s && ctx.has_s) + (1.0 - params.omega) * ind(r_ps && ctx.has_ps);
    gain - params.penalty_k * f64::from(penalty_count(ctx, action, params.relay_penalty_link))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(omega: f64) -> RewardParams {
        RewardParams { omega, penalty_k: 10.0, relay_penalty_link: RelayPenaltyLink::default() }
    }

    #[test]
    fn idle_is_always_zero() {
        for bits in 0u32..512 {
            let ctx = ctx_from_bits(bits);
            assert_eq!(reward(&ctx, Action::Idle, false, false, &params(0.5)), 0.0);
        }
    }

    #[test]
    fn successful_own_transmission() {
        let ctx = RewardContext { ch_s: true, has_s: true, has_se: true, ..Default::default() };
        assert_eq!(reward(&ctx, Action::TransmitOwn, true, false, &params(0.5)), 0.5);
    }

    #[test]
    fn collision_penalty() {
        let ctx = RewardContext { pu_active: true, ch_s: true, has_s: true, has_se: true, ..Default::default() };
        assert_eq!(reward(&ctx, Action::TransmitOwn, false, false, &params(0.5)), -10.0);
    }

    #[test]
    fn clean_acceptance_is_free() {
        let ctx = RewardContext { pu_active: true, ch_p: false, ch_ps: true, ..Default::default() };
        assert_eq!(reward(&ctx, Action::AcceptPrimary, false, false, &params(0.5)), 0.0);
    }

    #[test]
    fn relay_penalty_link_variants() {
        let ctx = RewardContext { ch_sp: true, ch_ps: false, has_ps: true, has_se: true, ..Default::default() };
        assert_eq!(reward(&ctx, Action::TransmitRelay, true, true, &params(0.25)), 0.75);
        let literal = RewardParams { relay_penalty_link: RelayPenaltyLink::PuToSu, ..params(0.25) };
        assert_eq!(reward(&ctx, Action::TransmitRelay, true, true, &literal), 0.75 - 10.0);
    }

    fn ctx_from_bits(b: u32) -> RewardContext {
        RewardContext {
            pu_active: b & 1 != 0,
            ch_p: b & 2 != 0,
            ch_s: b & 4 != 0,
            ch_ps: b & 8 != 0,
            ch_sp: b & 16 != 0,
            has_s: b & 32 != 0,
            has_ps: b & 64 != 0,
            has_se: b & 128 != 0,
            relay_full: b & 256 != 0,
        }
    }

    proptest! {
        #[test]
        fn reward_is_bounded(bits in 0u32..512, a in 0usize..4, r_s: bool, r_ps: bool,
                             omega in 0.0f64..=1.0, k in 0.0f64..100.0, literal: bool) {
            let ctx = ctx_from_bits(bits);
            let link = if literal { RelayPenaltyLink::PuToSu } else { RelayPenaltyLink::SuToPrimaryDestination };
            let p = RewardParams { omega, penalty_k: k, relay_penalty_link: link };
            let r = reward(&ctx, Action::from_index(a).unwrap(), r_s, r_ps, &p);
            prop_assert!(r <= 1.0 + 1e-12);
            prop_assert!(r >= -3.0 * k - 1e-12);
        }
    }
}
