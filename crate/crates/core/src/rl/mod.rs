//! The cognitive user's learner: queue quantization and state encoding, the
//! reward, tabular Q-learning and greedy policy extraction.

pub mod artifact;
pub mod levels;
pub mod qtable;
pub mod reward;
pub mod train;

pub use artifact::{read_qtable, write_qtable};
pub use levels::{quantize_level, EncodedState, LevelScheme, StateEncoder, StateIndex};
pub use qtable::{greedy_policy, q_update, select_action, Exploration, Policy, QTable};
pub use reward::{penalty_count, reward, RelayPenaltyLink, RewardContext, RewardParams};
pub use train::{train, CurvePoint, LearningParams, TrainOutput, TrainSetup};
