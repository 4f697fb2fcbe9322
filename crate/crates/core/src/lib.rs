//! Locomotion training and evaluation lab for a reduced-order biped.
//!
//! The crate builds parameterized terrains, simulates a point-foot biped with
//! PD-controlled telescoping legs, trains recurrent controllers with PPO over
//! terrain curricula, and measures the gait behavior of the result in front of
//! four test obstacles.

pub mod behavior;
pub mod biped;
pub mod checkpoint;
pub mod controller;
pub mod error;
pub mod learning;
pub mod nn;
pub mod protocol;
pub mod seed;
pub mod terrain;

pub use error::{Error, Result};
