//! Spoofing-tolerant localization for UAV swarms.
//!
//! Every round each drone reports its GNSS position and its measured ranges to
//! a Raft-elected leader. The leader flags nodes whose reports disagree with a
//! majority of the measured ranges ([`verification::compute_votes`]) and
//! re-solves their positions from the unflagged peers by robust
//! multilateration ([`verification::multilaterate`]). The committed result is
//! replicated through a small Raft log ([`raft`]).
//!
//! [`harness`] drives whole simulated swarms: sensor noise, attacks, Monte
//! Carlo trials and parameter sweeps. Everything is seeded and deterministic.

pub mod attacks;
pub mod cli;
mod error;
pub mod export;
pub mod geometry;
pub mod harness;
pub mod raft;
pub mod random;
pub mod sensors;
pub mod verification;

pub use error::{Error, Result};
pub use geometry::{CovarianceDiag, Position};
pub use random::Seed;
