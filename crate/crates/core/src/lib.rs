//! Multi-objective optimization of agent skill bundles.
//!
//! The search evolves an ordered bundle of skills by proposing one edit per
//! slot, evaluating the child, guarding against pass-rate regressions and
//! keeping every candidate in an append-only archive ranked by NSGA-II over
//! `(-pass_rate, cost)`.
//!
//! * [`bundle`]: skills, bundles, edit operations and the on-disk format.
//! * [`evaluation`]: the evaluator contract with simulated, verifier and
//!   chat-model implementations.
//! * [`moo`]: dominance, non-dominated sorting, crowding distance, survivor
//!   selection and 2-D hypervolume.
//! * [`proposer`]: rule-based and chat-model edit proposers and the proposal
//!   block protocol.
//! * [`search`]: the generation loop, archive, event log and run directories.
//! * [`llm_client`]: chat-completions client with exact cost accounting.
//! * [`analysis`]: cross-run statistics, Scott-Knott ESD ranking, efficiency
//!   and edit-pattern tables.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bundle;
pub mod evaluation;
mod hashing;
pub mod llm_client;
pub mod moo;
pub mod proposer;
pub mod search;
