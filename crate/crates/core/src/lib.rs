//! Steganography/steganalysis workbench.
//!
//! The crate mirrors the workflow of spatial-domain Android stego apps:
//! five embedding techniques with their embedding paths and payload
//! formats, signature-based detectors for the four fixed-path apps,
//! batch cover/stego dataset generation with embedding-rate control,
//! a reduced spatial-rich-model feature extractor, and an FLD ensemble
//! classifier with evaluation runners.

pub mod datagen;
pub mod embedders;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod imaging;
pub mod payload;
pub mod sigdetect;

pub use error::{Error, Result};
