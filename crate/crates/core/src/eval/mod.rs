//! Retrieval evaluation: ground truth from transcriptions, term-weighted
//! value sweeps, and paired significance tests.

pub mod gold;
pub mod stats;
pub mod twv;

pub use gold::{make_gold, normalize_tokens, GoldLabelSet, LabeledText};
pub use stats::{paired_t_test_one_sided, student_t_sf, TTestResult};
pub use twv::{evaluate, mtwv, twv_curve, twv_point, EvalConfig, MtwvResult, PerQueryThreshold, TwvPoint};
