//! Two-stage transceiver design for multi-user two-way amplify-and-forward
//! relaying with signal space alignment.
//!
//! The base station (BS) exchanges `L_k` streams with each of `K` mobile
//! stations (MS) through a relay station (RS). Stage one aligns each
//! uplink/downlink stream pair at the relay and allocates BS/MS power; stage
//! two alternates between an SOCP-based relay precoder and MMSE equalizers.

pub mod baselines;
pub mod design;
pub mod error;
pub mod linalg;
pub mod model;
pub mod socp;
pub mod stage_one;
pub mod stage_two;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
