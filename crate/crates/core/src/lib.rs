//! Blur-insensitive local frequency descriptors for degraded grayscale
//! recognition.
//!
//! The pipeline: a windowed short-term Fourier transform produces four
//! complex frequency planes per scale ([`stft`]); binary comparisons between
//! a pixel and its neighbors, within one plane or across a correlated pair
//! of planes, yield integer label images ([`descriptors`]); labels pool into
//! 4x4 regional histograms whose bins are compacted by a learned merge
//! partition ([`binmerge`]); the concatenated, normalized histograms feed an
//! l2-regularized coding classifier scored by per-class reconstruction error,
//! and a multi-scale competition keeps the answer of the most confident
//! window size ([`recognition`]). [`imaging`] supplies the PGM I/O and the
//! blur/low-resolution degradation simulator, and [`harness`] drives
//! training runs and accuracy tables over a dataset ([`archive`] persists
//! trained models).

pub mod archive;
pub mod binmerge;
pub mod descriptors;
pub mod imaging;
pub mod recognition;
pub mod stft;

pub mod harness;

mod error;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
