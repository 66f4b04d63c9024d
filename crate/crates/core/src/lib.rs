//! Real-time IMU attitude estimation from accelerometer and gyroscope signals.
//!
//! The crate bundles everything needed to compare conventional complementary
//! filters with learned recurrent and convolutional estimators:
//!
//! - [`quat`]: quaternion algebra and the heading-free attitude error metric.
//! - [`data`]: recordings, CSV import/export, the IMU simulator, rotational
//!   augmentation, windowing and input standardization.
//! - [`filters`]: strapdown, fixed-gain and adaptive complementary filters and
//!   grid tuning.
//! - [`nn`]: a small from-scratch network library (LSTM, dilated causal
//!   convolutions, batchnorm, Mish), attitude losses, RAdam + Lookahead and the
//!   truncated-BPTT training loop.
//! - [`eval`]: RMSE, leave-one-out cross-validation, ablation and size sweeps,
//!   report emission.

pub mod data;
pub mod error;
pub mod eval;
pub mod filters;
pub mod nn;
pub mod quat;

pub use error::{Error, Result};
pub use quat::{ErrorDecomposition, Quaternion, Vec3};
