//! Sampling-based model-predictive planning for dual-arm manipulation.
//!
//! The planner draws batches of joint-velocity sequences from a diagonal
//! Gaussian, projects each sample onto the jerk-bounded feasible set with a
//! small QP, rolls the projected samples through a world model, scores them
//! with task costs, and refits the Gaussian to an exponentially weighted
//! elite set. A receding-horizon loop executes the averaged leading controls
//! and warm-starts the next cycle from the time-shifted distribution.
//!
//! Modules, bottom-up:
//!
//! - [`trajectory`]: joint sequences, finite differences, Euler integration,
//!   quaternion geodesics.
//! - [`qp`]: projection of raw samples onto the derivative-bounded set.
//! - [`sampler`]: Gaussian policy, elite selection, weighted refit.
//! - [`world`]: rollout contract plus a deterministic kinematic surrogate of
//!   two serial arms, scene objects and signed contact distances.
//! - [`costs`]: cost terms and the tray, ball and hand-over task assemblies.
//! - [`planner`]: the per-cycle optimizer and the episode loop.

pub mod clock;
pub mod costs;
pub mod error;
pub mod parallel;
pub mod planner;
pub mod qp;
pub mod sampler;
pub mod trajectory;
pub mod world;

pub use error::{Error, Result};
