//! Desk-scale laboratory for bidirectional flow matching between
//! (content, style) embedding pairs and their merged embedding.
//!
//! The pipeline: [`synthgen`] builds a complete synthetic content x style
//! embedding grid, [`flownet`] provides the MLP velocity field with exact
//! gradients, [`flowcore`] trains it in the merge direction and runs the
//! probability-flow ODE in both directions, and [`eval`] scores how well
//! disentanglement emerges when the learned map is inverted.

pub mod error;
pub mod eval;
pub mod flowcore;
pub mod flownet;
pub mod math;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
