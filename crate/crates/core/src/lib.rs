//! Vortex-blob simulation of two-dimensional incompressible flow on the
//! infinite cylinder `R x T`, together with the confinement diagnostics and
//! bound-replay machinery used to compare simulated tail masses against the
//! theoretical confinement envelopes.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: the periodic Green function, its derivatives and the
//!   Biot-Savart summation that turns a blob ensemble into a velocity field.
//! * [`mollifier`]: the smooth axial cutoff used by the mollified tail mass.
//! * [`state`], [`diagnostics`], [`raster`]: blob ensembles and every
//!   functional measured on them.
//! * [`euler`], [`ns`]: time integration (transport, and transport plus
//!   random-walk diffusion).
//! * [`initial`]: compactly supported, non-negative initial patches.
//! * [`confinement`], [`replay`]: envelopes, reports, and the log-domain
//!   iteration bounds.
//! * [`config`], [`checkpoint`], [`runner`]: the file formats and the
//!   orchestration behind the `cylconf` binary.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod confinement;
pub mod diagnostics;
pub mod error;
pub mod euler;
pub mod initial;
pub mod kernel;
pub mod mollifier;
pub mod ns;
pub mod raster;
pub mod replay;
pub mod rng;
pub mod runner;
pub mod state;

pub use error::{Error, Result};
pub use kernel::{CylPoint, DecayEnvelope, KernelConfig, Vec2};
pub use mollifier::MollifierProfile;
pub use state::{Blob, FlowState};
