//! Closed-form collision analysis: the probability floor that preamble
//! collisions impose on timing-error performance, independent of SNR.
//!
//! When `k ≥ 2` users pick from `R` preambles, the chance that a given user
//! shares its pick with someone else has the exact form
//! `1 − (R^k − (R−1)^k)/(k·R^{k−1})`. Averaging over the conditional Poisson
//! arrival count yields a lower bound on the timing error probability of any
//! detector, since colliding users produce overlapping peaks the detector
//! cannot disentangle.

use crate::design::{derive_grid, load_model, DesignError, SystemBudget};
use crate::receiver::WindowKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("no room for Doppler width N1={n1} at cell radius {r_c_m} m (N={n})")]
    InfeasibleRadius { r_c_m: f64, n1: usize, n: usize },
}

/// Tagged-user collision probability among `k ≥ 2` uniform preamble picks:
/// `1 − (R/k)·(1 − ((R−1)/R)^k)`, the cancellation-free arrangement of
/// `1 − (R^k − (R−1)^k)/(k·R^{k−1})`.
pub fn collision_term_exact(k: u32, r: usize) -> f64 {
    assert!(k >= 2, "collision needs at least two users");
    assert!(r >= 1, "need at least one preamble");
    let ratio = (r as f64 - 1.0) / r as f64;
    1.0 - (r as f64 / k as f64) * (1.0 - ratio.powi(k as i32))
}

/// A truncated evaluation of the collision floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionBound {
    pub r: usize,
    pub mu_q: f64,
    /// Largest arrival count included in the series.
    pub truncation_k: u32,
    pub value: f64,
}

/// Sums `Σ_{k≥2} Pr(Q=k | Q≥1)·collision_term_exact(k, R)` with conditional
/// Poisson weights `e^{−μ}μ^k/((1−e^{−μ})·k!)`.
///
/// Weights are carried in log space so large `μ_Q` cannot underflow, and the
/// series stops once the remaining conditional mass is below `10⁻¹²` and
/// also below `10⁻¹³` of the accumulated value.
pub fn collision_lower_bound(r: usize, mu_q: f64) -> CollisionBound {
    assert!(r >= 1, "need at least one preamble");
    assert!(mu_q > 0.0 && mu_q.is_finite(), "arrival rate must be positive");

    // ln w_2 = 2·ln μ − μ − ln 2 − ln(1 − e^{−μ}).
    let ln_norm = (-(-mu_q).exp_m1()).ln();
    let mut ln_w = 2.0 * mu_q.ln() - mu_q - std::f64::consts::LN_2 - ln_norm;
    let mut k = 2u32;
    let mut value = 0.0;
    loop {
        value += ln_w.exp() * collision_term_exact(k, r);
        let ln_w_next = ln_w + mu_q.ln() - ((k + 1) as f64).ln();
        // Geometric tail bound, valid once the weights are decaying.
        let tail = if mu_q < (k + 2) as f64 {
            ln_w_next.exp() / (1.0 - mu_q / (k + 2) as f64)
        } else {
            f64::INFINITY
        };
        if tail <= 1e-12 && tail <= 1e-13 * value {
            break;
        }
        assert!(k < 100_000, "series failed to converge (mu_q={mu_q})");
        ln_w = ln_w_next;
        k += 1;
    }
    CollisionBound { r, mu_q, truncation_k: k, value }
}

/// One row of a cell-radius design sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub r_c_m: f64,
    pub speed_kmh: f64,
    pub lambda: f64,
    pub mu_q: f64,
    pub m: usize,
    pub n: usize,
    pub n1: usize,
    pub r: usize,
    pub window: WindowKind,
    pub bound: f64,
}

/// Sweep inputs: fixed resource budget and load assumptions, plus the grids
/// of cell radii, speeds and arrival densities to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub b_c: f64,
    pub t_c: f64,
    /// Carrier frequency, Hz; converts speed to Doppler.
    pub f_c: f64,
    /// RA slot period, seconds.
    pub t_a: f64,
    /// Inner exclusion radius, meters.
    pub r_a: f64,
    pub radii_m: Vec<f64>,
    pub speeds_kmh: Vec<f64>,
    pub lambdas: Vec<f64>,
}

const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Evaluates the collision floor across cell radii, speeds and loads.
///
/// Per point: the guard tracks the round-trip time (`G = 2·r_c/c`), the
/// Doppler spread tracks the speed (`ν_max = v·f_c/c`), and the group width
/// widens with radius per the window policy: Hamming with
/// `N1 = 2⌈ν_max·N·T⌉+3` up to 1500 m, 3-term Blackman-Harris with
/// `N1 = 2⌈ν_max·N·T⌉+5` beyond.
pub fn bound_sweep(cfg: &SweepConfig) -> Result<Vec<SweepPoint>, AnalysisError> {
    let mut rows = Vec::new();
    for &r_c in &cfg.radii_m {
        for &speed in &cfg.speeds_kmh {
            let g = 2.0 * r_c / SPEED_OF_LIGHT;
            let nu_max = (speed / 3.6) * cfg.f_c / SPEED_OF_LIGHT;
            let budget = SystemBudget::new(cfg.b_c, cfg.t_c, g, nu_max)?;
            let grid = derive_grid(&budget)?;
            let doppler_bins = (nu_max * grid.frame_duration()).ceil() as usize;
            let (window, n1) = if r_c <= 1500.0 {
                (WindowKind::Hamming, 2 * doppler_bins + 3)
            } else {
                (WindowKind::BlackmanHarris3, 2 * doppler_bins + 5)
            };
            if n1 > grid.n() {
                return Err(AnalysisError::InfeasibleRadius { r_c_m: r_c, n1, n: grid.n() });
            }
            let r = grid.n() / n1;
            for &lambda in &cfg.lambdas {
                let load = load_model(lambda, cfg.t_a, r_c, cfg.r_a)?;
                rows.push(SweepPoint {
                    r_c_m: r_c,
                    speed_kmh: speed,
                    lambda,
                    mu_q: load.mu_q,
                    m: grid.m(),
                    n: grid.n(),
                    n1,
                    r,
                    window,
                    bound: collision_lower_bound(r, load.mu_q).value,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    const MU_Q_REF: f64 = 0.07037167544041137;

    /// The combinatorial double sum the closed form collapses: summing over
    /// the size `p` of the tagged user's collision set.
    fn brute_force_term(k: u32, r: usize) -> f64 {
        let kf = k as f64;
        let rf = r as f64;
        let mut sum = 0.0;
        for p in 2..=k {
            if r == 1 && p < k {
                continue; // (R−1)^{k−p} = 0
            }
            let pf = p as f64;
            let ln_choose = ln_gamma(kf) - ln_gamma(pf) - ln_gamma(kf - pf + 1.0);
            let ln_pow = if p == k { 0.0 } else { (kf - pf) * (rf - 1.0).ln() };
            sum += ((pf - 1.0) / pf) * (ln_choose + ln_pow - (kf - 1.0) * rf.ln()).exp();
        }
        sum
    }

    #[test]
    fn pair_collision_is_inverse_preamble_count() {
        for r in [1usize, 2, 19, 48, 96, 500] {
            let got = collision_term_exact(2, r);
            let expect = 1.0 / (2.0 * r as f64);
            // The closed form subtracts two near-unit quantities, so allow
            // a little cancellation error.
            assert!((got - expect).abs() < 1e-13, "R={r}: {got}");
        }
    }

    #[test]
    fn closed_form_matches_combinatorial_sum() {
        for k in 2..=12u32 {
            for r in 1..=50usize {
                let fast = collision_term_exact(k, r);
                let brute = brute_force_term(k, r);
                assert!(
                    (fast - brute).abs() <= 1e-12 * brute.max(1e-3),
                    "k={k} R={r}: {fast} vs {brute}"
                );
            }
        }
    }

    #[test]
    fn collision_term_is_a_probability() {
        for k in 2..=50u32 {
            for r in [1usize, 2, 3, 10, 50, 200] {
                let v = collision_term_exact(k, r);
                assert!(v > 0.0 && v < 1.0, "k={k} R={r}: {v}");
            }
        }
    }

    #[test]
    fn bound_matches_frozen_reference_values() {
        for (r, expect) in [
            (96usize, 1.8537839989379468e-4),
            (48, 3.7069606714413903e-4),
            (19, 9.3602722441746414e-4),
            (10, 1.777128220622977e-3),
        ] {
            let b = collision_lower_bound(r, MU_Q_REF);
            assert!(
                (b.value - expect).abs() < 1e-9 * expect,
                "R={r}: {} vs {expect}",
                b.value
            );
            assert!(b.value > 0.0 && b.value < 1.0);
        }
    }

    #[test]
    fn truncation_leaves_no_relative_mass_behind() {
        for mu_q in [0.01, MU_Q_REF, 1.0, 10.0] {
            for r in [1usize, 19, 96] {
                let b = collision_lower_bound(r, mu_q);
                // Extend the series by ten further terms by hand.
                let norm = -(-mu_q).exp_m1();
                let mut extra = 0.0;
                for k in (b.truncation_k + 1)..=(b.truncation_k + 10) {
                    let ln_w = k as f64 * mu_q.ln() - mu_q - ln_gamma(k as f64 + 1.0) - norm.ln();
                    extra += ln_w.exp() * collision_term_exact(k, r);
                }
                assert!(
                    extra < 1e-12 * b.value,
                    "mu_q={mu_q} R={r}: extra mass {extra} vs value {}",
                    b.value
                );
            }
        }
    }

    #[test]
    fn bound_strictly_decreases_with_preamble_count() {
        for mu_q in [0.01, 0.1, 1.0, 10.0] {
            let mut prev = f64::INFINITY;
            for r in 1..=200usize {
                let v = collision_lower_bound(r, mu_q).value;
                assert!(v < prev, "mu_q={mu_q}: bound not decreasing at R={r}");
                prev = v;
            }
        }
    }

    #[test]
    fn detection_mass_grows_with_preamble_count() {
        // B_k(R) = (R^k − (R−1)^k)/R^{k−1} = R·(1 − ((R−1)/R)^k).
        let b = |k: i32, r: f64| r * (1.0 - ((r - 1.0) / r).powi(k));
        for k in 2..=12i32 {
            for r in 1..=200u32 {
                assert!(
                    b(k, (r + 1) as f64) > b(k, r as f64),
                    "k={k} R={r}"
                );
            }
        }
    }

    fn sweep_config(radii: Vec<f64>, speeds: Vec<f64>, lambdas: Vec<f64>) -> SweepConfig {
        SweepConfig {
            b_c: 1.08e6,
            t_c: 1.6e-3,
            f_c: 4.0e9,
            t_a: 0.01,
            r_a: 100.0,
            radii_m: radii,
            speeds_kmh: speeds,
            lambdas,
        }
    }

    #[test]
    fn sweep_bound_grows_with_cell_radius() {
        let cfg = sweep_config(
            vec![500.0, 1000.0, 1500.0, 3000.0, 6000.0],
            vec![100.0],
            vec![1.0],
        );
        let rows = bound_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 5);
        for pair in rows.windows(2) {
            assert!(
                pair[1].bound > pair[0].bound,
                "bound fell from {} to {} at r_c={}",
                pair[0].bound,
                pair[1].bound,
                pair[1].r_c_m
            );
        }
    }

    #[test]
    fn sweep_switches_window_policy_at_cutoff_radius() {
        let cfg = sweep_config(vec![1500.0, 1501.0], vec![100.0], vec![1.0]);
        let rows = bound_sweep(&cfg).unwrap();
        assert_eq!(rows[0].window, WindowKind::Hamming);
        assert_eq!(rows[1].window, WindowKind::BlackmanHarris3);
        assert_eq!(rows[1].n1, rows[0].n1 + 2);
    }

    #[test]
    fn sweep_depends_on_speed_only_through_group_width() {
        let cfg = sweep_config(vec![1500.0], vec![100.0, 400.0], vec![1.0]);
        let rows = bound_sweep(&cfg).unwrap();
        let (slow, fast) = (&rows[0], &rows[1]);
        assert!(fast.n1 >= slow.n1);
        if fast.n1 == slow.n1 {
            assert_eq!(fast.bound, slow.bound);
        } else {
            assert!(fast.bound > slow.bound);
            assert!(fast.bound < 10.0 * slow.bound, "speed effect too strong");
        }
    }

    #[test]
    fn sweep_bound_is_linear_in_load_when_sparse() {
        let cfg = sweep_config(vec![1500.0], vec![100.0], vec![0.01, 0.02]);
        let rows = bound_sweep(&cfg).unwrap();
        let ratio = rows[1].bound / rows[0].bound;
        assert!((ratio - 2.0).abs() < 0.02, "doubling lambda scaled bound by {ratio}");
    }

    #[test]
    fn sweep_rejects_impossible_radii() {
        // Guard longer than the slot: budget constraint violated.
        let cfg = sweep_config(vec![3.0e8], vec![100.0], vec![1.0]);
        assert!(matches!(bound_sweep(&cfg), Err(AnalysisError::Design(_))));
        // Doppler width beyond the frame: group cannot fit.
        let mut cfg = sweep_config(vec![1500.0], vec![3.0e6], vec![1.0]);
        cfg.f_c = 40.0e9;
        assert!(matches!(
            bound_sweep(&cfg),
            Err(AnalysisError::InfeasibleRadius { .. })
        ));
    }
}
