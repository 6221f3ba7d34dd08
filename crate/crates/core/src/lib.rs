//! Fuzzy supervision for simulated clinical training sessions.
//!
//! A student's messages and actions are scored on four criteria, fed through
//! a Mamdani rule base that decides how much assistance is warranted, and
//! answered with a hint when the level reaches `High`.

pub mod criteria;
pub mod fuzzy;
pub mod rules;
pub mod scenario;
pub mod scoring;
pub mod store;
pub mod supervisor;
pub mod text;

pub use criteria::{Criterion, CriterionScores, Provenance};
