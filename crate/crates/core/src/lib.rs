//! Replay-buffer insertion gate that skips transitions whose reward is already
//! well represented in their region of state space, plus the pieces needed to
//! train and evaluate agents with it.

mod binio;
pub mod analysis;
pub mod density;
pub mod envs;
pub mod error;
pub mod learner;
pub mod linalg;
pub mod partition;
pub mod replay;

pub use error::{FacError, Result};
