//! File formats, a seeded synthetic wing generator and the training
//! harness around [`cpgeo_core`].

pub mod cache;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;
pub mod synth;

pub use error::{Error, Result};
