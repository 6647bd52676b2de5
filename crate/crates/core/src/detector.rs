//! Peak-energy preamble detection, the timing-advance estimate, and the
//! false-alarm threshold in both its closed analytic form (rectangular
//! window) and an empirically calibrated form (any window).
//!
//! With the rectangular window the noise-only group peak is the maximum of
//! `N1·M` i.i.d. exponentials of mean `M·N·N_o`, so the exceedance
//! probability inverts in closed form. Shaped windows correlate the noise
//! across Doppler bins and void that argument; their thresholds come from a
//! noise-only Monte Carlo quantile instead.

use crate::channel::ChannelRealization;
use crate::grid::{DdIndex, OtfsGrid, PreambleAllocation};
use crate::receiver::{receive_tf, DdFrame, ReceiveWindow, Sfft};
use crate::rng::{stream, substream};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("false-alarm target {p_fa} outside (0, 1)")]
    InvalidPfa { p_fa: f64 },
    #[error("calibration needs at least {needed} frames for p_fa={p_fa} (got {got})")]
    InsufficientFrames { needed: u64, got: u64, p_fa: f64 },
}

/// How a threshold value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    Analytic,
    Empirical,
}

/// Energy threshold paired with the false-alarm target it was built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub mu: f64,
    pub target_pfa: f64,
    pub calibration: Calibration,
}

/// Result of scanning one preamble's DDRE group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub preamble: usize,
    /// Peak energy `z_q` over the group.
    pub peak_energy: f64,
    /// Grid index of the peak.
    pub peak: DdIndex,
    /// Timing-advance estimate in units of `T/M`, in `[0, M)`.
    pub ta_estimate: usize,
    pub above_threshold: bool,
}

/// Scans group `q` for its energy peak and derives the TA estimate.
///
/// Ties break toward the smallest delay index, then the smallest Doppler
/// index, so identical frames always yield identical outcomes.
pub fn detect_preamble(
    frame: &DdFrame,
    alloc: &PreambleAllocation,
    q: usize,
    mu: f64,
) -> DetectionOutcome {
    assert!(q < alloc.r(), "preamble id {q} out of range (R={})", alloc.r());
    let m = frame.grid().m();
    let anchor = alloc.anchor(q);
    let mut best = f64::NEG_INFINITY;
    let mut peak = DdIndex { k: alloc.group_rows(q).start, l: 0 };
    for l in 0..m {
        for k in alloc.group_rows(q) {
            let idx = DdIndex { k, l };
            let e = frame.energy(idx);
            if e > best {
                best = e;
                peak = idx;
            }
        }
    }
    DetectionOutcome {
        preamble: q,
        peak_energy: best,
        peak,
        ta_estimate: (peak.l + m - anchor.l) % m,
        above_threshold: best >= mu,
    }
}

/// Closed-form threshold: `μ = −N_o·M·N·ln[1 − (1−p_fa)^{1/(N1·M)}]`.
///
/// Valid for the rectangular window only, where the post-SFFT noise is
/// i.i.d. across the group's DDREs.
pub fn analytic_threshold(
    grid: &OtfsGrid,
    n1: usize,
    n_o: f64,
    p_fa: f64,
) -> Result<Threshold, DetectorError> {
    if !(0.0 < p_fa && p_fa < 1.0) {
        return Err(DetectorError::InvalidPfa { p_fa });
    }
    let cells = (n1 * grid.m()) as f64;
    let mu = -n_o * (grid.m() * grid.n()) as f64 * (1.0 - (1.0 - p_fa).powf(1.0 / cells)).ln();
    Ok(Threshold { mu, target_pfa: p_fa, calibration: Calibration::Analytic })
}

/// The same threshold written directly in terms of the resource budget,
/// with `M = 1+⌈G·B_c⌉` and `N = ⌊B_c·T_c/M⌋` expanded in place.
pub fn analytic_threshold_from_budget(
    b_c: f64,
    t_c: f64,
    g: f64,
    n1: usize,
    n_o: f64,
    p_fa: f64,
) -> Result<Threshold, DetectorError> {
    if !(0.0 < p_fa && p_fa < 1.0) {
        return Err(DetectorError::InvalidPfa { p_fa });
    }
    let m = 1.0 + (g * b_c).ceil();
    let n = (b_c * t_c / m).floor();
    let mu = -n_o * m * n * (1.0 - (1.0 - p_fa).powf(1.0 / (n1 as f64 * m))).ln();
    Ok(Threshold { mu, target_pfa: p_fa, calibration: Calibration::Analytic })
}

/// Calibrates a threshold for an arbitrary window by simulating noise-only
/// frames and taking the `(1−p_fa)` quantile of the pooled per-group peaks.
///
/// Frames run in parallel on substreams derived from a seed drawn once from
/// `rng`; the pooled peaks are sorted before the quantile is read, so the
/// result does not depend on worker scheduling.
pub fn empirical_threshold<R: Rng>(
    grid: &OtfsGrid,
    alloc: &PreambleAllocation,
    window: &ReceiveWindow,
    n_o: f64,
    p_fa: f64,
    rng: &mut R,
    n_frames: u64,
) -> Result<Threshold, DetectorError> {
    if !(0.0 < p_fa && p_fa <= 1.0) {
        return Err(DetectorError::InvalidPfa { p_fa });
    }
    let needed = (100.0 / p_fa).ceil() as u64;
    if n_frames < needed {
        return Err(DetectorError::InsufficientFrames { needed, got: n_frames, p_fa });
    }
    if p_fa == 1.0 {
        return Ok(Threshold { mu: 0.0, target_pfa: p_fa, calibration: Calibration::Empirical });
    }

    let master: u64 = rng.gen();
    let plan = Sfft::new(grid);
    let empty = crate::channel::FrameScenario { uts: vec![] };
    let mut peaks: Vec<f64> = (0..n_frames)
        .into_par_iter()
        .flat_map_iter(|f| {
            let mut frame_rng = substream(master, &[stream::CALIBRATION, f]);
            let tf = receive_tf(&empty, alloc, grid, 0.0, window, &mut frame_rng, n_o)
                .expect("noise-only frame cannot violate the path model");
            let dd = plan.apply(&tf);
            (0..alloc.r())
                .map(|q| detect_preamble(&dd, alloc, q, f64::INFINITY).peak_energy)
                .collect::<Vec<f64>>()
        })
        .collect();
    peaks.sort_unstable_by(f64::total_cmp);

    let rank = ((1.0 - p_fa) * peaks.len() as f64).floor() as usize;
    let mu = peaks[rank.min(peaks.len() - 1)];
    Ok(Threshold { mu, target_pfa: p_fa, calibration: Calibration::Empirical })
}

/// A detection counts as a timing error when the group peak stayed below
/// threshold or the TA estimate missed the closed interval
/// `[⌊M·τ_first/T⌋, ⌈M·τ_last/T⌉]` spanned by the true path delays.
pub fn classify_miss(
    outcome: &DetectionOutcome,
    channel: &ChannelRealization,
    grid: &OtfsGrid,
) -> bool {
    if !outcome.above_threshold {
        return true;
    }
    let scale = grid.m() as f64 / grid.t();
    let lo = (scale * channel.tau_first()).floor() as usize;
    let hi = (scale * channel.tau_last()).ceil() as usize;
    outcome.ta_estimate < lo || outcome.ta_estimate > hi
}
