//! Spatio-temporal model of check-ins in location-based social networks.
//!
//! Check-in times follow a periodic doubly-stochastic point process per
//! (user, category); locations follow a time-varying multinomial that mixes
//! locations recently visited by influencers with exploration of popular
//! places. Parameters are learned with an EM algorithm whose M-step splits
//! into independent concave problems, one per user.

pub mod error;
pub mod experiment;
pub mod baselines;
pub mod graphs;
pub mod inference;
pub mod io;
pub mod log;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod simulate;
pub mod spatial;
pub mod temporal;

pub use error::{Error, Result};
pub use log::{EventLog, Filter};
pub use model::{Checkin, HyperParams, KernelMode, LocationLayout, ModelParams, SocialGraph};
