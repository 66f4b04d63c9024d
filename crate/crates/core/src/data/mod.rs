//! Recordings and everything that produces or reshapes them: CSV import and
//! export, the IMU simulator, rotational augmentation, windowing and input
//! standardization.

mod augment;
mod io;
mod recording;
mod sim;
mod standardize;
mod window;

pub use augment::augment_rotation;
pub use io::{load_recording, save_recording, sidecar_path, Sidecar};
pub use recording::{Kind, MotionLabel, Pausing, Recording, Speed, DEFAULT_SAMPLE_RATE_HZ};
pub use sim::{simulate_recording, taxonomy, ImuModel, MotionProfile, Simulator};
pub use standardize::{apply_standardizer, fit_standardizer, Standardizer, CHANNELS};
pub use window::{extract_windows, Window};
