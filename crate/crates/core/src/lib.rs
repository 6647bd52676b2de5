//! OTFS random-access toolkit: delay-Doppler preamble construction, channel
//! models, the detection receiver, and the analysis/simulation layers used to
//! study timing-advance estimation error.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`] — delay-Doppler discretization and preamble group layout.
//! * [`design`] — parameter selection from a bandwidth/time/delay budget.
//! * [`waveform`] — the transmitted preamble in closed form (energy, PAPR).
//! * [`channel`] — geometry, tapped-delay-line fading, frame scenarios.
//! * [`receiver`] — windowed time-frequency reception and the SFFT.
//! * [`detector`] — group-energy detection, thresholds, miss classification.
//! * [`analysis`] — collision lower bound and design-space sweeps.
//! * [`sim`] — Monte Carlo timing-error-probability experiments.

pub mod analysis;
pub mod channel;
pub mod design;
pub mod detector;
pub mod grid;
mod numerics;
pub mod receiver;
pub mod rng;
pub mod sim;
pub mod waveform;

pub use analysis::{bound_sweep, collision_lower_bound, CollisionBound, SweepConfig, SweepPoint};
pub use num_complex::Complex64;
pub use channel::{
    ChannelRealization, DelayPowerProfile, FrameScenario, PathTap, ScenarioModel, UtActivation,
};
pub use design::{derive_grid, load_model, min_doppler_width, RaLoadModel, SystemBudget};
pub use detector::{
    analytic_threshold, classify_miss, detect_preamble, empirical_threshold, Calibration,
    DetectionOutcome, Threshold,
};
pub use grid::{build_allocation, DdIndex, OtfsGrid, PreambleAllocation};
pub use receiver::{make_window, receive_tf, sfft, DdFrame, Sfft, TfFrame, WindowKind};
pub use sim::{csv_header, csv_row, run_tep, search_n1, search_rho, ScenarioConfig, TepResult};
pub use waveform::{papr, preamble_energy, PreambleSymbolGrid, TimeWaveformSpec};
