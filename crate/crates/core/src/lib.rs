//! Robust least-squares frequency-invariant (RLSFI) beamformer design for
//! three-dimensional microphone arrays, with the evaluation tools around it:
//! beampatterns, white noise gain, directivity index, time-domain
//! filter-and-sum processing, anechoic scene synthesis and the
//! frequency-weighted segmental SNR.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod array;
pub mod designio;
pub mod desired;
pub mod dsp;
pub mod error;
pub mod fir;
pub mod hrtf;
pub mod metrics;
pub mod signals;
pub mod solver;
pub mod steering;

pub use error::{Error, Result};
