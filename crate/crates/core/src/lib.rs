//! Fault prediction for partially observable automata.
//!
//! The crate answers one family of questions: given a system modelled as a
//! finite or timed automaton whose events are only partially observable, can
//! an observer always announce an upcoming fault ahead of time — and if so,
//! how far ahead?  On top of the offline decision procedures sits an online
//! estimator that replays recorded traces and emits warning verdicts.

pub mod alphabet;
pub mod corpus;
pub mod dot;
pub mod error;
pub mod fa;
pub mod fa_predict;
pub mod lint;
pub mod model;
pub mod oracle;
pub mod predictor;
pub mod ta_predict;
pub mod timed;

pub use alphabet::{EventAlphabet, Label};
pub use error::{Error, Result};
