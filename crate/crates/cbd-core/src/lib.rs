//! Contextuality analysis for systems of binary measurements.
//!
//! A *system* is a finite family of contexts, each carrying an empirical
//! joint distribution over the binary measurements made in it. Measurements
//! of the same property in different contexts are distinct random variables
//! with no empirical joint; whether a single joint distribution of a
//! prescribed kind can be imposed on all of them is the contextuality
//! question this crate decides.
//!
//! The crate provides:
//!
//! * an exact-rational data model with a JSON wire format ([`model`]),
//! * construction and verification of multimaximal couplings of
//!   connections ([`coupling`]),
//! * the closed-form criterion for cyclic systems ([`cyclic`]),
//! * an exact LP feasibility decision over the coupling polytope for
//!   arbitrary small systems, with witnesses and Farkas certificates
//!   ([`lp`]),
//! * deterministic 0/1 assignment search for Kochen-Specker-style
//!   incidence structures ([`deterministic`]),
//! * built-in example systems ([`gallery`]), and
//! * report assembly shared by the CLI and the Python bindings
//!   ([`report`]).
//!
//! All probability arithmetic is exact: probabilities are arbitrary-
//! precision rationals and every decision is a yes/no answer about an
//! exact feasibility problem, so boundary cases are resolved without
//! tolerances.

pub mod coupling;
pub mod cyclic;
pub mod deterministic;
pub mod gallery;
pub mod lp;
pub mod model;
pub mod rational;
pub mod report;
pub mod testsupport;

pub use model::{
    Connection, ContextDistribution, ContextId, Outcome, PropertyId, System,
};
pub use rational::{Probability, Rat};
