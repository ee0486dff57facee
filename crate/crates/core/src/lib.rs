//! Photometric stereo through scattering media.
//!
//! The crate renders near-lit scenes in a homogeneous single-scattering
//! medium, removes backscatter and surface-to-camera forward scatter from
//! captured images, and recovers normals and depth by alternating
//! photometric stereo with re-estimation of the shape-dependent scattering.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod pfm;
pub mod pipeline;
pub mod preview;
pub mod quadrature;
pub mod reconstruct;
pub mod render;
pub mod scene;
pub mod solver;
pub mod tables;

pub use error::{Error, Result};
