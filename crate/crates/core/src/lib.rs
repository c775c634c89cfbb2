//! Learn keyframe motions with a small feedforward network.
//!
//! The pipeline: a [`motion::KeyframeMovement`] is played back through
//! per-joint natural cubic splines, sampled into a [`dataset::MotionDataset`],
//! fitted by a [`network::MimicNetwork`] trained with phased Adam
//! ([`optimizer`], [`trainer`]), and finally checked both as raw joint
//! references and through a speed-controlled joint plant ([`plant`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN too.

pub mod dataset;
pub mod error;
pub mod motion;
pub mod network;
pub mod optimizer;
pub mod plant;
pub mod spline;
pub mod textio;
pub mod trainer;

pub use error::{MimicError, Result};
