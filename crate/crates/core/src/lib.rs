//! Dual-camera survey map fusion.
//!
//! A narrow-FOV documentation camera mapped by monocular SLAM produces
//! fragmentary, arbitrarily-scaled sub-maps. This crate scales and aligns
//! those fragments against the trajectory of a rigidly-mounted localization
//! camera, links landmarks shared between fragments, and refines everything
//! in one global factor-graph optimization. A survey simulator provides the
//! ground-truth test substrate, and an evaluation module measures map
//! accuracy through ground-control-point distances.

pub mod alignment;
pub mod config;
pub mod geometry;
pub mod linking;
pub mod scene;
pub mod simulator;
