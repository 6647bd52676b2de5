//! Monte Carlo engine measuring the timing error probability of one tagged
//! user per frame, plus the design searches built on top of it.
//!
//! Each frame is fully determined by `(master_seed, frame_index)`: the
//! arrival draw, every user's channel and the additive noise come from
//! disjoint named substreams. Aggregation adds plain counters, so the result
//! is identical whatever the worker count or scheduling order.

use crate::analysis::collision_lower_bound;
use crate::channel::{ChannelError, DelayPowerProfile, ScenarioModel};
use crate::design::{derive_grid, snr_to_energy, DesignError, RaLoadModel, SystemBudget};
use crate::detector::{
    analytic_threshold, classify_miss, detect_preamble, empirical_threshold, Calibration,
    DetectorError, Threshold,
};
use crate::grid::{build_allocation, GridError, PreambleAllocation};
use crate::receiver::{make_window, receive_tf, ReceiverError, Sfft, WindowKind};
use crate::rng::{stream, substream};
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("target error probability {target} is at or below the collision floor {floor}")]
    InfeasibleTarget { target: f64, floor: f64 },
    #[error("no group width up to N1={max_n1} reaches the target")]
    InfeasibleGroupWidth { max_n1: usize },
    #[error("target not reached at the top of the search range ({rho_db} dB gives TEP {tep})")]
    RhoRangeExhausted { rho_db: f64, tep: f64 },
}

/// Complete description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Free-form label echoed into result rows.
    pub scenario_id: String,
    pub budget: SystemBudget,
    pub load: RaLoadModel,
    pub profile: DelayPowerProfile,
    pub pathloss_exp: f64,
    pub window: WindowKind,
    pub n1: usize,
    /// Delay bin of every preamble's nonzero entry. Keep this at 1 or more:
    /// it offsets the transmitted pulse from the symbol boundary, so a
    /// delayed copy is stitched from same-phase segments. At 0 the stitch
    /// point bisects the pulse and mid-band preambles lose their peak.
    pub l_anchor: usize,
    /// Per-preamble SNR in dB; `-inf` switches the signal off entirely.
    pub rho_db: f64,
    /// Noise spectral density. Zero selects the noise-free mode: no AWGN,
    /// zero threshold, and the SNR interpreted against a unit density.
    pub n_o: f64,
    pub p_fa: f64,
    pub n_frames: u64,
    /// Noise-only frames for empirical threshold calibration (shaped
    /// windows only).
    pub calibration_frames: u64,
    pub master_seed: u64,
    /// Fixed worker count; `None` uses the global thread pool.
    pub workers: Option<usize>,
}

/// Measured error rates with their uncertainty and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TepResult {
    pub frames: u64,
    pub timing_errors: u64,
    pub tep: f64,
    /// 95% binomial interval for the TEP.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Threshold exceedances on groups no user transmitted in.
    pub fa_count: u64,
    pub fa_trials: u64,
    pub fa_rate: f64,
    /// Timing errors split by the frame's arrival count.
    pub miss_single: u64,
    pub miss_multi: u64,
    /// Timing errors where another user picked the tagged preamble.
    pub miss_with_collision: u64,
    pub threshold: Threshold,
    /// Collision floor for this (R, μ_Q), for side-by-side reporting.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counters {
    errors: u64,
    fa_count: u64,
    fa_trials: u64,
    miss_single: u64,
    miss_multi: u64,
    miss_collision: u64,
}

impl Counters {
    fn merge(self, other: Counters) -> Counters {
        Counters {
            errors: self.errors + other.errors,
            fa_count: self.fa_count + other.fa_count,
            fa_trials: self.fa_trials + other.fa_trials,
            miss_single: self.miss_single + other.miss_single,
            miss_multi: self.miss_multi + other.miss_multi,
            miss_collision: self.miss_collision + other.miss_collision,
        }
    }
}

/// 95% binomial confidence interval; the normal approximation is replaced
/// by the exact (Clopper-Pearson) interval when successes are scarce.
fn binomial_ci(successes: u64, trials: u64) -> (f64, f64) {
    let (e, n) = (successes as f64, trials as f64);
    let p = e / n;
    if successes >= 30 && trials - successes >= 30 {
        let half = 1.96 * (p * (1.0 - p) / n).sqrt();
        return ((p - half).max(0.0), (p + half).min(1.0));
    }
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(e, n - e + 1.0).expect("valid shape").inverse_cdf(0.025)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(e + 1.0, n - e).expect("valid shape").inverse_cdf(0.975)
    };
    (lo, hi)
}

fn validate(cfg: &ScenarioConfig) -> Result<(), SimError> {
    if cfg.n_frames == 0 {
        return Err(SimError::InvalidConfig("n_frames must be at least 1".into()));
    }
    if cfg.n1 == 0 {
        return Err(SimError::InvalidConfig("N1 must be at least 1".into()));
    }
    if cfg.rho_db.is_nan() {
        return Err(SimError::InvalidConfig("rho_db is NaN".into()));
    }
    if !(cfg.n_o >= 0.0 && cfg.n_o.is_finite()) {
        return Err(SimError::InvalidConfig(format!("noise density {} invalid", cfg.n_o)));
    }
    if !(cfg.pathloss_exp >= 0.0 && cfg.pathloss_exp.is_finite()) {
        return Err(SimError::InvalidConfig(format!(
            "path-loss exponent {} invalid",
            cfg.pathloss_exp
        )));
    }
    if cfg.workers == Some(0) {
        return Err(SimError::InvalidConfig("worker count must be at least 1".into()));
    }
    Ok(())
}

/// Chooses the threshold per the scenario: zero when noise-free, closed form
/// for the rectangular window, noise-only calibration otherwise.
fn select_threshold(
    cfg: &ScenarioConfig,
    grid: &crate::grid::OtfsGrid,
    alloc: &PreambleAllocation,
    window: &crate::receiver::ReceiveWindow,
) -> Result<Threshold, SimError> {
    if cfg.n_o == 0.0 {
        return Ok(Threshold { mu: 0.0, target_pfa: cfg.p_fa, calibration: Calibration::Analytic });
    }
    if cfg.window == WindowKind::Rectangular {
        return Ok(analytic_threshold(grid, cfg.n1, cfg.n_o, cfg.p_fa)?);
    }
    let mut rng = substream(cfg.master_seed, &[stream::CALIBRATION]);
    Ok(empirical_threshold(
        grid,
        alloc,
        window,
        cfg.n_o,
        cfg.p_fa,
        &mut rng,
        cfg.calibration_frames,
    )?)
}

/// Runs the experiment: per frame, draw the arrivals, receive the
/// superposition, detect the tagged user's preamble (user 0), and classify
/// the timing outcome against that user's true channel. Unused groups are
/// scanned as false-alarm telemetry.
pub fn run_tep(cfg: &ScenarioConfig) -> Result<TepResult, SimError> {
    validate(cfg)?;
    let grid = derive_grid(&cfg.budget)?;
    let alloc = build_allocation(&grid, cfg.n1, cfg.l_anchor)?;
    let window = make_window(cfg.window, grid.n());
    let threshold = select_threshold(cfg, &grid, &alloc, &window)?;
    let rho = 10f64.powf(cfg.rho_db / 10.0);
    let reference_density = if cfg.n_o > 0.0 { cfg.n_o } else { 1.0 };
    let energy = snr_to_energy(&grid, cfg.budget.g, cfg.budget.b_c, rho, reference_density);
    let bound = collision_lower_bound(alloc.r(), cfg.load.mu_q).value;
    let model = ScenarioModel {
        load: cfg.load,
        r: alloc.r(),
        profile: cfg.profile.clone(),
        nu_max: cfg.budget.nu_max,
        pathloss_exp: cfg.pathloss_exp,
        symbol_duration: grid.t(),
    };
    let plan = Sfft::new(&grid);

    let simulate = || -> Result<Counters, SimError> {
        (0..cfg.n_frames)
            .into_par_iter()
            .try_fold(Counters::default, |acc, f| -> Result<Counters, SimError> {
                let scenario = model.draw_frame(cfg.master_seed, f)?;
                let mut noise_rng = substream(cfg.master_seed, &[stream::NOISE, f]);
                let tf = receive_tf(
                    &scenario,
                    &alloc,
                    &grid,
                    energy,
                    &window,
                    &mut noise_rng,
                    cfg.n_o,
                )?;
                let dd = plan.apply(&tf);

                let tagged = &scenario.uts[0];
                let outcome = detect_preamble(&dd, &alloc, tagged.preamble, threshold.mu);
                let miss = classify_miss(&outcome, &tagged.channel, &grid);

                let mut c = acc;
                let mut used = vec![false; alloc.r()];
                for ut in &scenario.uts {
                    used[ut.preamble] = true;
                }
                for (q, _) in used.iter().enumerate().filter(|(_, u)| !**u) {
                    c.fa_trials += 1;
                    if detect_preamble(&dd, &alloc, q, threshold.mu).above_threshold {
                        c.fa_count += 1;
                    }
                }
                if miss {
                    c.errors += 1;
                    if scenario.q() == 1 {
                        c.miss_single += 1;
                    } else {
                        c.miss_multi += 1;
                    }
                    if scenario.uts[1..].iter().any(|u| u.preamble == tagged.preamble) {
                        c.miss_collision += 1;
                    }
                }
                Ok(c)
            })
            .try_reduce(Counters::default, |a, b| Ok(a.merge(b)))
    };

    let counters = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?
            .install(simulate),
        None => simulate(),
    }?;

    let (ci_lo, ci_hi) = binomial_ci(counters.errors, cfg.n_frames);
    Ok(TepResult {
        frames: cfg.n_frames,
        timing_errors: counters.errors,
        tep: counters.errors as f64 / cfg.n_frames as f64,
        ci_lo,
        ci_hi,
        fa_count: counters.fa_count,
        fa_trials: counters.fa_trials,
        fa_rate: if counters.fa_trials == 0 {
            0.0
        } else {
            counters.fa_count as f64 / counters.fa_trials as f64
        },
        miss_single: counters.miss_single,
        miss_multi: counters.miss_multi,
        miss_with_collision: counters.miss_collision,
        threshold,
        bound,
    })
}

/// Smallest Doppler group width whose noise-free TEP is at most half the
/// target; scans `N1 = 1, 2, …` upward.
pub fn search_n1(cfg: &ScenarioConfig, target_pe: f64) -> Result<usize, SimError> {
    if !(target_pe > 0.0) {
        return Err(SimError::InvalidConfig(format!("target {target_pe} must be positive")));
    }
    let grid = derive_grid(&cfg.budget)?;
    let mut probe = cfg.clone();
    probe.n_o = 0.0;
    for n1 in 1..=grid.n() {
        probe.n1 = n1;
        if run_tep(&probe)?.tep <= target_pe / 2.0 {
            return Ok(n1);
        }
    }
    Err(SimError::InfeasibleGroupWidth { max_n1: grid.n() })
}

/// Smallest SNR (to `tol_db`) whose TEP meets the target, found by
/// bisection over `[lo_db, hi_db]`. Fails upfront when the target sits at or
/// below the collision floor, which no SNR can beat.
pub fn search_rho(
    cfg: &ScenarioConfig,
    target_pe: f64,
    lo_db: f64,
    hi_db: f64,
    tol_db: f64,
) -> Result<f64, SimError> {
    if !(target_pe > 0.0) {
        return Err(SimError::InvalidConfig(format!("target {target_pe} must be positive")));
    }
    if !(lo_db < hi_db && tol_db > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "bad search range [{lo_db}, {hi_db}] / tolerance {tol_db}"
        )));
    }
    let grid = derive_grid(&cfg.budget)?;
    let alloc = build_allocation(&grid, cfg.n1, cfg.l_anchor)?;
    let floor = collision_lower_bound(alloc.r(), cfg.load.mu_q).value;
    if target_pe <= floor {
        return Err(SimError::InfeasibleTarget { target: target_pe, floor });
    }

    let tep_at = |rho_db: f64| -> Result<f64, SimError> {
        let mut probe = cfg.clone();
        probe.rho_db = rho_db;
        Ok(run_tep(&probe)?.tep)
    };
    if tep_at(lo_db)? <= target_pe {
        return Ok(lo_db);
    }
    let top = tep_at(hi_db)?;
    if top > target_pe {
        return Err(SimError::RhoRangeExhausted { rho_db: hi_db, tep: top });
    }
    let (mut lo, mut hi) = (lo_db, hi_db);
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if tep_at(mid)? <= target_pe {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Column names for [`csv_row`].
pub fn csv_header() -> &'static str {
    "scenario_id,rho_db,nu_max_hz,lambda,n1,window,p_fa_target,frames,tep,tep_ci_lo,tep_ci_hi,fa_rate,bound,seed"
}

/// One result line. All quantities derive from integer counters or the
/// input config, so identical runs print identical bytes.
pub fn csv_row(cfg: &ScenarioConfig, res: &TepResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
        cfg.scenario_id,
        cfg.rho_db,
        cfg.budget.nu_max,
        cfg.load.lambda,
        cfg.n1,
        cfg.window,
        cfg.p_fa,
        res.frames,
        res.tep,
        res.ci_lo,
        res.ci_hi,
        res.fa_rate,
        res.bound,
        cfg.master_seed,
    )
}
