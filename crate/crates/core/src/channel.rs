//! Uplink channel scenarios: user placement in an annular cell, a tapped
//! delay line with Rayleigh fading and random Doppler, and per-frame arrival
//! of a Poisson-distributed number of users (conditioned on at least one).
//!
//! All delays are round-trip: the base station sees a preamble from distance
//! `d` arrive `2d/c` seconds late, with the profile's excess delays on top.

use crate::design::RaLoadModel;
use crate::rng::{stream, substream};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Propagation speed used for every delay/distance conversion, m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

const ETU_DELAYS_NS: [f64; 9] = [0.0, 50.0, 120.0, 200.0, 230.0, 500.0, 1600.0, 2300.0, 5000.0];
const ETU_POWERS_DB: [f64; 9] = [-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0];

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("profile: {0}")]
    InvalidProfile(String),
    #[error("last path delay {tau_last_s} s does not fit inside a symbol of {t_s} s")]
    DelayInfeasible { tau_last_s: f64, t_s: f64 },
    #[error("geometry requires r_c > r_a > 0 (got r_a={r_a}, r_c={r_c})")]
    InvalidGeometry { r_a: f64, r_c: f64 },
}

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTap {
    pub gain: Complex64,
    /// Absolute round-trip delay, seconds.
    pub delay: f64,
    /// Doppler shift, Hz.
    pub doppler: f64,
}

/// A relative delay/power profile for a tapped delay line.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayPowerProfile {
    /// Excess delay of each tap relative to the first arrival, seconds.
    delays: Vec<f64>,
    /// Linear tap powers, normalized to sum to one.
    powers: Vec<f64>,
}

impl DelayPowerProfile {
    /// Builds a profile from `(excess delay ns, power dB)` pairs; powers are
    /// normalized so the expected aggregate gain is carried entirely by the
    /// path-loss factor.
    pub fn new(taps: &[(f64, f64)]) -> Result<Self, ChannelError> {
        if taps.is_empty() {
            return Err(ChannelError::InvalidProfile("no taps".into()));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(taps.len());
        for &(delay_ns, power_db) in taps {
            if !delay_ns.is_finite() || delay_ns < 0.0 || !power_db.is_finite() {
                return Err(ChannelError::InvalidProfile(format!(
                    "bad tap (delay_ns={delay_ns}, power_db={power_db})"
                )));
            }
            pairs.push((delay_ns * 1e-9, 10f64.powf(power_db / 10.0)));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            delays: pairs.iter().map(|p| p.0).collect(),
            powers: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    /// The 3GPP Extended Typical Urban nine-tap profile.
    pub fn etu() -> Self {
        let taps: Vec<(f64, f64)> = ETU_DELAYS_NS
            .iter()
            .zip(ETU_POWERS_DB)
            .map(|(&d, p)| (d, p))
            .collect();
        Self::new(&taps).expect("built-in profile is valid")
    }

    /// Parses a profile from text: one `delay_ns power_db` pair per line,
    /// whitespace or comma separated, `#` starting a comment.
    pub fn from_text(text: &str) -> Result<Self, ChannelError> {
        let mut taps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(ChannelError::InvalidProfile(format!(
                    "line {}: expected `delay_ns power_db`, got {:?}",
                    lineno + 1,
                    raw
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    ChannelError::InvalidProfile(format!("line {}: bad number {s:?}", lineno + 1))
                })
            };
            taps.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(&taps)
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Largest excess delay, seconds.
    pub fn max_excess_delay(&self) -> f64 {
        *self.delays.last().expect("profile is non-empty")
    }

    /// Normalized linear power of tap `i`.
    pub fn power(&self, i: usize) -> f64 {
        self.powers[i]
    }
}

/// One user's channel: fading taps plus the geometry they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<PathTap>,
    /// Linear path-loss gain; a cell-edge user has `beta = 1`.
    pub beta: f64,
    /// Distance from the base station, meters.
    pub distance: f64,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps; they are sorted by delay.
    /// `beta` and `distance` are bookkeeping only and default to the cell
    /// edge (`beta = 1`).
    pub fn from_taps(mut taps: Vec<PathTap>) -> Self {
        assert!(!taps.is_empty(), "a channel needs at least one tap");
        taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        ChannelRealization { taps, beta: 1.0, distance: f64::NAN }
    }

    /// Taps in non-decreasing delay order.
    pub fn taps(&self) -> &[PathTap] {
        &self.taps
    }

    /// Delay of the earliest path, seconds.
    pub fn tau_first(&self) -> f64 {
        self.taps.first().expect("at least one tap").delay
    }

    /// Delay of the latest path, seconds.
    pub fn tau_last(&self) -> f64 {
        self.taps.last().expect("at least one tap").delay
    }
}

/// Path-loss gain referenced to the cell edge: `(r_c/d)^exp`.
pub fn path_gain(r_c: f64, distance: f64, pathloss_exp: f64) -> f64 {
    (r_c / distance).powf(pathloss_exp)
}

/// Draws a distance uniform over the annulus `r_a < d ≤ r_c` (by area) and
/// the matching path-loss gain.
pub fn draw_geometry<R: Rng>(
    rng: &mut R,
    r_a: f64,
    r_c: f64,
    pathloss_exp: f64,
) -> Result<(f64, f64), ChannelError> {
    if !(r_c > r_a && r_a > 0.0) {
        return Err(ChannelError::InvalidGeometry { r_a, r_c });
    }
    let u: f64 = rng.gen();
    let d = (r_a * r_a + u * (r_c * r_c - r_a * r_a)).sqrt();
    Ok((d, path_gain(r_c, d, pathloss_exp)))
}

/// Draws a fading realization on `profile` for a user at `distance`.
///
/// Tap `i` gets absolute delay `2·distance/c + excess_i`, a circularly
/// symmetric complex Gaussian gain of variance `p_i·beta`, and Doppler
/// `nu_max·cos(θ_i)` with `θ_i` uniform on `[0, 2π)`. Fails when the last
/// tap would land outside one symbol (`tau_last ≥ symbol_duration`).
pub fn draw_channel<R: Rng>(
    rng: &mut R,
    profile: &DelayPowerProfile,
    distance: f64,
    beta: f64,
    nu_max: f64,
    symbol_duration: f64,
) -> Result<ChannelRealization, ChannelError> {
    let base_delay = 2.0 * distance / SPEED_OF_LIGHT;
    let tau_last = base_delay + profile.max_excess_delay();
    if tau_last >= symbol_duration {
        return Err(ChannelError::DelayInfeasible { tau_last_s: tau_last, t_s: symbol_duration });
    }
    let taps = (0..profile.len())
        .map(|i| {
            let sigma = (profile.power(i) * beta / 2.0).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            PathTap {
                gain: Complex64::new(sigma * re, sigma * im),
                delay: base_delay + profile.delays[i],
                doppler: nu_max * theta.cos(),
            }
        })
        .collect();
    Ok(ChannelRealization { taps, beta, distance })
}

/// One user's activity inside a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct UtActivation {
    /// Chosen preamble id in `[0, R)`.
    pub preamble: usize,
    pub channel: ChannelRealization,
}

/// Everything random about one frame: the active users, their preamble
/// choices and channels. An empty user list is a noise-only frame; draws
/// conditioned on at least one arrival always hold one or more.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScenario {
    pub uts: Vec<UtActivation>,
}

impl FrameScenario {
    /// Number of simultaneously active users.
    pub fn q(&self) -> usize {
        self.uts.len()
    }
}

/// Static description of the random-access population, sufficient to draw
/// i.i.d. frame scenarios.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub load: RaLoadModel,
    /// Number of selectable preambles.
    pub r: usize,
    pub profile: DelayPowerProfile,
    pub nu_max: f64,
    pub pathloss_exp: f64,
    /// Symbol duration `T` bounding the largest usable delay.
    pub symbol_duration: f64,
}

/// Draws `Q ≥ 1` from the Poisson(`mu`) law conditioned on `Q ≥ 1` by
/// inverting the conditional CDF.
pub fn conditional_poisson<R: Rng>(rng: &mut R, mu: f64) -> usize {
    let u: f64 = rng.gen();
    let norm = -(-mu).exp_m1(); // 1 − e^{−mu}, stable for small mu
    let mut k = 1usize;
    let mut term = mu * (-mu).exp() / norm;
    let mut cdf = term;
    while u > cdf && term > 0.0 {
        k += 1;
        term *= mu / k as f64;
        cdf += term;
    }
    k
}

impl ScenarioModel {
    /// Draws the scenario of frame `frame_index`.
    ///
    /// The arrival count comes from the frame's scenario stream; every user
    /// then consumes its own `(master_seed, frame, user)` substream, so the
    /// scenario is reproducible independent of scheduling order.
    pub fn draw_frame(
        &self,
        master_seed: u64,
        frame_index: u64,
    ) -> Result<FrameScenario, ChannelError> {
        let mut frame_rng = substream(master_seed, &[stream::SCENARIO, frame_index]);
        let q = conditional_poisson(&mut frame_rng, self.load.mu_q);
        let uts = (0..q)
            .map(|u| {
                let mut rng = substream(master_seed, &[stream::SCENARIO, frame_index, 1 + u as u64]);
                let preamble = rng.gen_range(0..self.r);
                let (distance, beta) =
                    draw_geometry(&mut rng, self.load.r_a, self.load.r_c, self.pathloss_exp)?;
                let channel = draw_channel(
                    &mut rng,
                    &self.profile,
                    distance,
                    beta,
                    self.nu_max,
                    self.symbol_duration,
                )?;
                Ok(UtActivation { preamble, channel })
            })
            .collect::<Result<Vec<_>, ChannelError>>()?;
        Ok(FrameScenario { uts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::load_model;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rng(tag: u64) -> rand_chacha::ChaCha8Rng {
        substream(0xC0FFEE, &[99, tag])
    }

    #[test]
    fn path_gain_reference_points() {
        assert_eq!(path_gain(1500.0, 1500.0, 3.0), 1.0);
        let near = path_gain(1500.0, 100.0, 3.0);
        assert!((near - 3375.0).abs() < 1e-9);
        assert!((10.0 * near.log10() - 35.3).abs() < 0.05);
    }

    #[test]
    fn geometry_is_uniform_over_area() {
        let mut r = rng(0);
        let (r_a, r_c) = (100.0, 1500.0);
        let mut sq: Vec<f64> = (0..100_000)
            .map(|_| draw_geometry(&mut r, r_a, r_c, 3.0).unwrap().0.powi(2))
            .collect();
        sq.sort_by(f64::total_cmp);
        let median = sq[sq.len() / 2];
        let expected = (r_a * r_a + r_c * r_c) / 2.0;
        assert!((median - expected).abs() < 0.02 * expected);
        assert!(draw_geometry(&mut r, 100.0, 100.0, 3.0).is_err());
    }

    #[test]
    fn etu_delays_anchor_to_round_trip() {
        let mut r = rng(1);
        let ch = draw_channel(&mut r, &DelayPowerProfile::etu(), 1000.0, 1.0, 0.0, 16.67e-6)
            .unwrap();
        assert_eq!(ch.taps().len(), 9);
        assert!((ch.tau_first() - 6.6667e-6).abs() < 1e-9);
        assert!((ch.tau_last() - 11.6667e-6).abs() < 1e-9);
        assert!(ch.taps().windows(2).all(|w| w[0].delay <= w[1].delay));
        assert!(ch.taps().iter().all(|t| t.doppler == 0.0));
    }

    #[test]
    fn channel_rejects_oversized_delays() {
        let mut r = rng(2);
        let err = draw_channel(&mut r, &DelayPowerProfile::etu(), 2000.0, 1.0, 0.0, 16.67e-6);
        assert!(matches!(err, Err(ChannelError::DelayInfeasible { .. })));
    }

    #[test]
    fn fading_power_matches_path_loss() {
        let mut r = rng(3);
        let beta = 3.375;
        let draws = 100_000;
        let mean: f64 = (0..draws)
            .map(|_| {
                draw_channel(&mut r, &DelayPowerProfile::etu(), 1000.0, beta, 300.0, 16.67e-6)
                    .unwrap()
                    .taps()
                    .iter()
                    .map(|t| t.gain.norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean - beta).abs() < 0.02 * beta, "mean {mean}");
    }

    #[test]
    fn doppler_is_bounded_and_symmetric() {
        let mut r = rng(4);
        let nu_max = 300.0;
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..10_000 {
            let ch =
                draw_channel(&mut r, &DelayPowerProfile::etu(), 800.0, 1.0, nu_max, 16.67e-6)
                    .unwrap();
            for tap in ch.taps() {
                assert!(tap.doppler.abs() <= nu_max);
                sum += tap.doppler;
                count += 1;
            }
        }
        let sigma = nu_max / 2f64.sqrt() / (count as f64).sqrt();
        assert!((sum / count as f64).abs() < 3.5 * sigma);
    }

    #[test]
    fn profile_text_round_trip() {
        let text = "# excess delay, power\n0 -1\n50, -1\n 120 -1\n200 0\n230 0\n500 0\n1600 -3\n2300 -5\n5000 -7\n";
        let parsed = DelayPowerProfile::from_text(text).unwrap();
        assert_eq!(parsed, DelayPowerProfile::etu());
        assert!(DelayPowerProfile::from_text("1 2 3\n").is_err());
        assert!(DelayPowerProfile::from_text("# only comments\n").is_err());
        let sum: f64 = (0..parsed.len()).map(|i| parsed.power(i)).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_poisson_matches_pmf() {
        let mu = load_model(1.0, 0.01, 1500.0, 100.0).unwrap().mu_q;
        let mut r = rng(5);
        let draws = 1_000_000;
        let mut twos = 0usize;
        for _ in 0..draws {
            let q = conditional_poisson(&mut r, mu);
            assert!(q >= 1);
            if q == 2 {
                twos += 1;
            }
        }
        let expected = (-mu).exp() * mu * mu / (2.0 * -(-mu).exp_m1());
        let sigma = (expected * (1.0 - expected) / draws as f64).sqrt();
        let freq = twos as f64 / draws as f64;
        assert!(
            (freq - expected).abs() < 3.0 * sigma,
            "freq {freq} expected {expected}"
        );
    }

    #[test]
    fn tiny_load_is_almost_surely_single_user() {
        let mut r = rng(6);
        assert!((0..10_000).all(|_| conditional_poisson(&mut r, 1e-9) == 1));
    }

    #[test]
    fn preamble_choice_is_uniform() {
        let model = ScenarioModel {
            load: load_model(1.0, 0.01, 1500.0, 100.0).unwrap(),
            r: 19,
            profile: DelayPowerProfile::etu(),
            nu_max: 300.0,
            pathloss_exp: 3.0,
            symbol_duration: 18.0 / 1.08e6,
        };
        let mut counts = vec![0u64; model.r];
        let mut total = 0u64;
        for frame in 0..200_000u64 {
            let scenario = model.draw_frame(7, frame).unwrap();
            for ut in &scenario.uts {
                counts[ut.preamble] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / model.r as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new((model.r - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }

    #[test]
    fn frames_are_reproducible_and_distinct() {
        let model = ScenarioModel {
            load: load_model(1.0, 0.01, 1500.0, 100.0).unwrap(),
            r: 19,
            profile: DelayPowerProfile::etu(),
            nu_max: 300.0,
            pathloss_exp: 3.0,
            symbol_duration: 18.0 / 1.08e6,
        };
        let a = model.draw_frame(11, 5).unwrap();
        let b = model.draw_frame(11, 5).unwrap();
        assert_eq!(a, b);
        let c = model.draw_frame(11, 6).unwrap();
        assert_ne!(a, c);
    }
}
