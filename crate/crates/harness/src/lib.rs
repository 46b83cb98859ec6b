//! Experiment harness for learning ground-state observables from coupling
//! vectors.
//!
//! The library turns a JSON experiment config into reproducible artifacts:
//! datasets of random Hamiltonian instances with exact or snapshot-estimated
//! labels, cross-validated sparse regression models, evaluation metrics,
//! sweeps over snapshot/training budgets and lattice sizes, per-edge weight
//! importance, operator-norm certificates, and coupling-window locality
//! probes. The `gsml` binary exposes each of these as a subcommand.
//!
//! Determinism contract: every artifact under the versioned CSV/JSON formats
//! is a pure function of the config and the master seed. Reruns into the
//! same directory produce byte-identical files (wall-clock timings go to a
//! separate unversioned sidecar).

pub mod commands;
pub mod config;
pub mod csvio;
pub mod dataset;
pub mod importance;
pub mod normcheck;
pub mod pipeline;
pub mod probe;
pub mod seeding;
pub mod sweep;
