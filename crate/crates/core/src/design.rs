//! Parameter selection: turning a bandwidth/time/delay budget into a grid,
//! sizing the Doppler group width against the worst-case Doppler shift, and
//! modelling the random-access load as a Poisson arrival count.

use crate::grid::{GridError, OtfsGrid};
use thiserror::Error;

const KM_PER_M: f64 = 1e-3;

/// Errors from the parameter-selection closed forms.
#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("budget fields must be positive with T_c > G (B_c={b_c}, T_c={t_c}, G={g})")]
    InvalidBudget { b_c: f64, t_c: f64, g: f64 },
    #[error("budget admits no Doppler bins: B_c·T_c/(1+⌈G·B_c⌉) < 1")]
    BudgetInfeasible,
    #[error("Doppler group width {required} exceeds the N={n} available rows")]
    DopplerInfeasible { required: usize, n: usize },
    #[error("load model requires r_c > r_a >= 0 and lambda, T_a > 0")]
    InvalidLoad,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Resource budget for one random-access opportunity.
///
/// `g` is the worst-case round-trip delay the preamble must absorb and
/// `nu_max` the largest Doppler magnitude the design must tolerate; `t_c`
/// excludes the two guard intervals of length `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemBudget {
    pub b_c: f64,
    pub t_c: f64,
    pub g: f64,
    pub nu_max: f64,
}

impl SystemBudget {
    pub fn new(b_c: f64, t_c: f64, g: f64, nu_max: f64) -> Result<Self, DesignError> {
        let ok = b_c > 0.0 && t_c > 0.0 && g >= 0.0 && t_c > g && nu_max >= 0.0;
        let finite = b_c.is_finite() && t_c.is_finite() && g.is_finite() && nu_max.is_finite();
        if !(ok && finite) {
            return Err(DesignError::InvalidBudget { b_c, t_c, g });
        }
        Ok(Self { b_c, t_c, g, nu_max })
    }
}

/// Random-access load: arrival intensity over an annular cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaLoadModel {
    /// Call arrivals per second per square km.
    pub lambda: f64,
    /// Time between successive attempts by one caller, seconds.
    pub t_a: f64,
    /// Cell radius, meters.
    pub r_c: f64,
    /// Prohibited inner radius, meters.
    pub r_a: f64,
    /// Expected number of simultaneous requests.
    pub mu_q: f64,
}

/// Derives the grid maximizing delay resolution under the budget:
/// `M = 1 + ⌈G·B_c⌉`, `T = M/B_c`, `N = ⌊B_c·T_c/M⌋`.
///
/// The result satisfies `(M-1)·T/M ≥ G` (the TA range covers the round
/// trip), `M/T ≤ B_c` and `N·T ≤ T_c`.
pub fn derive_grid(budget: &SystemBudget) -> Result<OtfsGrid, DesignError> {
    let m = 1 + (budget.g * budget.b_c).ceil() as usize;
    let t = m as f64 / budget.b_c;
    let n = (budget.b_c * budget.t_c / m as f64).floor() as usize;
    if n < 1 {
        return Err(DesignError::BudgetInfeasible);
    }
    Ok(OtfsGrid::new(m, n, t)?)
}

/// Smallest Doppler group width that keeps a shifted preamble inside its own
/// group: `2⌈ν_max·N·T⌉ + 3`, or `1` when there is no Doppler at all.
pub fn min_doppler_width(grid: &OtfsGrid, nu_max: f64) -> Result<usize, DesignError> {
    let required = if nu_max == 0.0 {
        1
    } else {
        2 * (nu_max * grid.frame_duration()).ceil() as usize + 3
    };
    if required > grid.n() {
        return Err(DesignError::DopplerInfeasible { required, n: grid.n() });
    }
    Ok(required)
}

/// Builds the load model; `mu_q = π(r_c² − r_a²)·λ·T_a` with radii in km.
pub fn load_model(lambda: f64, t_a: f64, r_c: f64, r_a: f64) -> Result<RaLoadModel, DesignError> {
    if !(lambda > 0.0 && t_a > 0.0 && r_c > r_a && r_a >= 0.0) {
        return Err(DesignError::InvalidLoad);
    }
    let (rc_km, ra_km) = (r_c * KM_PER_M, r_a * KM_PER_M);
    let mu_q = std::f64::consts::PI * (rc_km * rc_km - ra_km * ra_km) * lambda * t_a;
    Ok(RaLoadModel { lambda, t_a, r_c, r_a, mu_q })
}

/// Preamble energy that realizes transmit SNR `rho`:
/// `E = ρ·N_o·M·(N + 2G·B_c/(1+⌈G·B_c⌉))`.
///
/// The guard term accounts for the `2G` of air time outside the `N·T` frame.
pub fn snr_to_energy(grid: &OtfsGrid, g: f64, b_c: f64, rho: f64, n_o: f64) -> f64 {
    let m_delay = 1.0 + (g * b_c).ceil();
    rho * n_o * grid.m() as f64 * (grid.n() as f64 + 2.0 * g * b_c / m_delay)
}
