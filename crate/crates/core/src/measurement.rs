//! Noisy rms-voltage synthesis, SNR computation and measurement selection.

use std::cmp::Ordering;
use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the receiver turns a noisy sinewave into an rms estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Gaussian noise added directly to the rms value.
    #[default]
    Fast,
    /// Sampled sinewave with i.i.d. Gaussian noise per sample.
    TimeDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Output-referred AWGN standard deviation.
    pub sigma_volts: f64,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default = "default_samples")]
    pub samples_per_measurement: usize,
    #[serde(default = "default_periods")]
    pub periods: usize,
    /// Subtract the known noise power from the time-domain power estimate.
    #[serde(default = "default_true")]
    pub noise_subtraction: bool,
}

fn default_samples() -> usize {
    1024
}

fn default_periods() -> usize {
    8
}

fn default_true() -> bool {
    true
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_volts: 1.0e-5,
            mode: NoiseMode::Fast,
            samples_per_measurement: default_samples(),
            periods: default_periods(),
            noise_subtraction: true,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_volts: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_volts.is_finite() && self.sigma_volts >= 0.0) {
            return Err(Error::invalid(
                "noise sigma",
                format!("{}", self.sigma_volts),
            ));
        }
        if self.periods == 0 {
            return Err(Error::invalid("noise periods", "must be at least 1"));
        }
        if self.samples_per_measurement < 2 * self.periods {
            return Err(Error::invalid(
                "noise samples_per_measurement",
                "must be at least twice the number of periods",
            ));
        }
        Ok(())
    }
}

/// One beacon's voltage as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub beacon_id: usize,
    /// Noiseless voltage after the amplifier.
    pub v_true: f64,
    pub v_hat: f64,
    pub snr_db: f64,
    pub selected: bool,
}

/// Produces the measured rms voltage for a coil output of `v_true` volts.
///
/// The gain is applied before the noise, which is output-referred.
pub fn simulate_measurement<R: Rng + ?Sized>(
    v_true: f64,
    gain: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> f64 {
    let signal = gain * v_true;
    if noise.sigma_volts == 0.0 {
        return signal;
    }
    let normal = Normal::new(0.0, noise.sigma_volts).expect("sigma validated as finite");
    match noise.mode {
        NoiseMode::Fast => (signal + normal.sample(rng)).max(0.0),
        NoiseMode::TimeDomain => {
            let m = noise.samples_per_measurement;
            let amplitude = signal * SQRT_2;
            let step = 2.0 * PI * noise.periods as f64 / m as f64;
            let power = (0..m)
                .map(|k| {
                    let s = amplitude * (step * k as f64).sin() + normal.sample(rng);
                    s * s
                })
                .sum::<f64>()
                / m as f64;
            if noise.noise_subtraction {
                (power - noise.sigma_volts * noise.sigma_volts)
                    .max(0.0)
                    .sqrt()
            } else {
                power.sqrt()
            }
        }
    }
}

/// `20·log10(v_hat/σ)`; `-inf` for a zero reading.
pub fn snr_db(v_hat: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    if v_hat <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (v_hat / sigma).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionPolicy {
    /// Keep readings whose SNR reaches the threshold, optionally capped to the
    /// `max_count` strongest of them.
    SnrThreshold {
        snr_threshold_db: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_count: Option<usize>,
    },
    /// Keep the `n` strongest readings.
    TopN { n: usize },
}

impl SelectionPolicy {
    pub fn snr_threshold(snr_threshold_db: f64) -> Self {
        SelectionPolicy::SnrThreshold {
            snr_threshold_db,
            max_count: None,
        }
    }
}

// Strongest first, ties to the lower beacon id.
fn by_strength(a: &Measurement, b: &Measurement) -> Ordering {
    b.v_hat
        .partial_cmp(&a.v_hat)
        .unwrap_or(Ordering::Equal)
        .then(a.beacon_id.cmp(&b.beacon_id))
}

/// Sets the `selected` flag on every measurement and returns how many were
/// kept. An empty selection is reported as [`Error::EmptySelection`] after the
/// flags have been cleared.
pub fn select_measurements(ms: &mut [Measurement], policy: &SelectionPolicy) -> Result<usize> {
    if ms.is_empty() {
        return Err(Error::EmptySelection);
    }
    let keep: Vec<usize> = match *policy {
        SelectionPolicy::SnrThreshold {
            snr_threshold_db,
            max_count,
        } => {
            let mut passing: Vec<&Measurement> =
                ms.iter().filter(|m| m.snr_db >= snr_threshold_db).collect();
            if let Some(cap) = max_count {
                passing.sort_by(|a, b| by_strength(a, b));
                passing.truncate(cap);
            }
            passing.iter().map(|m| m.beacon_id).collect()
        }
        SelectionPolicy::TopN { n } => {
            if n == 0 || n > ms.len() {
                return Err(Error::invalid(
                    "top-n selection",
                    format!("n = {n} with {} measurements", ms.len()),
                ));
            }
            let mut ranked: Vec<&Measurement> = ms.iter().collect();
            ranked.sort_by(|a, b| by_strength(a, b));
            ranked[..n].iter().map(|m| m.beacon_id).collect()
        }
    };
    for m in ms.iter_mut() {
        m.selected = keep.contains(&m.beacon_id);
    }
    match keep.len() {
        0 => Err(Error::EmptySelection),
        n => Ok(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn meas(id: usize, v_hat: f64, snr: f64) -> Measurement {
        Measurement {
            beacon_id: id,
            v_true: v_hat,
            v_hat,
            snr_db: snr,
            selected: false,
        }
    }

    #[test]
    fn noiseless_is_exact_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mode in [NoiseMode::Fast, NoiseMode::TimeDomain] {
            let noise = NoiseModel {
                mode,
                ..NoiseModel::noiseless()
            };
            assert_eq!(
                simulate_measurement(3.5e-4, 20.0, &noise, &mut rng),
                20.0 * 3.5e-4
            );
        }
    }

    #[test]
    fn clean_sinewave_rms_is_exact_over_whole_periods() {
        // Tiny sigma, no subtraction: the discrete rms of the sinewave alone must
        // reproduce the amplitude / sqrt(2) to rounding.
        let noise = NoiseModel {
            sigma_volts: 1e-30,
            mode: NoiseMode::TimeDomain,
            noise_subtraction: false,
            ..NoiseModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = simulate_measurement(1e-3, 1.0, &noise, &mut rng);
        assert_relative_eq!(v, 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn pure_noise_power_matches_sigma_squared() {
        let sigma = 1e-5;
        let noise = NoiseModel {
            sigma_volts: sigma,
            mode: NoiseMode::TimeDomain,
            noise_subtraction: false,
            ..NoiseModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 10_000;
        let mean_sq = (0..trials)
            .map(|_| simulate_measurement(0.0, 1.0, &noise, &mut rng).powi(2))
            .sum::<f64>()
            / trials as f64;
        assert!((mean_sq / (sigma * sigma) - 1.0).abs() < 0.05, "{mean_sq}");
    }

    #[test]
    fn subtraction_removes_noise_power_bias() {
        let noise = NoiseModel {
            sigma_volts: 1e-5,
            mode: NoiseMode::TimeDomain,
            noise_subtraction: true,
            ..NoiseModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 10_000;
        let mean_sq = (0..trials)
            .map(|_| simulate_measurement(1e-3, 1.0, &noise, &mut rng).powi(2))
            .sum::<f64>()
            / trials as f64;
        assert!((mean_sq / 1e-6 - 1.0).abs() < 0.01, "{mean_sq}");
    }

    #[test]
    fn fast_and_time_domain_agree_in_mean() {
        // 40 dB: v = 100 sigma.
        let sigma = 1e-5;
        let v = 1e-3;
        let trials = 10_000;
        let stats = |mode| {
            let noise = NoiseModel {
                sigma_volts: sigma,
                mode,
                ..NoiseModel::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let xs: Vec<f64> = (0..trials)
                .map(|_| simulate_measurement(v, 1.0, &noise, &mut rng))
                .collect();
            let mean = xs.iter().sum::<f64>() / trials as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            (mean, var / trials as f64)
        };
        let (m_fast, se2_fast) = stats(NoiseMode::Fast);
        let (m_td, se2_td) = stats(NoiseMode::TimeDomain);
        let combined = (se2_fast + se2_td).sqrt();
        assert!((m_fast - m_td).abs() < 3.0 * combined, "{m_fast} vs {m_td}");
    }

    #[test]
    fn fast_mode_never_negative() {
        let noise = NoiseModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!((0..1000).all(|_| simulate_measurement(0.0, 1.0, &noise, &mut rng) >= 0.0));
    }

    #[test]
    fn snr_reference_values() {
        let s = 1e-5;
        assert_relative_eq!(snr_db(10.0 * s, s).unwrap(), 20.0, epsilon = 1e-12);
        assert_relative_eq!(snr_db(s, s).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(snr_db(0.17783e-3, s).unwrap(), 25.0, epsilon = 1e-3);
        assert_eq!(snr_db(0.0, s).unwrap(), f64::NEG_INFINITY);
        assert_eq!(snr_db(1.0, 0.0), Err(Error::NonPositiveSigma(0.0)));
    }

    #[test]
    fn threshold_selection() {
        let mut ms = vec![meas(0, 1.0, 20.0), meas(1, 0.3, 10.0), meas(2, 0.6, 16.0)];
        let n = select_measurements(&mut ms, &SelectionPolicy::snr_threshold(15.0)).unwrap();
        assert_eq!(n, 2);
        assert_eq!(
            ms.iter().map(|m| m.selected).collect::<Vec<_>>(),
            [true, false, true]
        );
    }

    #[test]
    fn threshold_selection_with_cap_keeps_strongest() {
        let mut ms = vec![meas(0, 0.5, 20.0), meas(1, 0.9, 25.0), meas(2, 0.7, 22.0)];
        let policy = SelectionPolicy::SnrThreshold {
            snr_threshold_db: 15.0,
            max_count: Some(2),
        };
        assert_eq!(select_measurements(&mut ms, &policy).unwrap(), 2);
        assert_eq!(
            ms.iter().map(|m| m.selected).collect::<Vec<_>>(),
            [false, true, true]
        );
    }

    #[test]
    fn top_n_of_27() {
        let mut ms: Vec<Measurement> = (0..27)
            .map(|i| meas(i, ((i * 7919) % 27) as f64 * 1e-5, 10.0))
            .collect();
        assert_eq!(
            select_measurements(&mut ms, &SelectionPolicy::TopN { n: 7 }).unwrap(),
            7
        );
        let min_sel = ms
            .iter()
            .filter(|m| m.selected)
            .map(|m| m.v_hat)
            .fold(f64::INFINITY, f64::min);
        let max_rej = ms
            .iter()
            .filter(|m| !m.selected)
            .map(|m| m.v_hat)
            .fold(0.0, f64::max);
        assert!(min_sel >= max_rej);
    }

    #[test]
    fn top_n_ties_go_to_lower_id() {
        let mut ms = vec![meas(3, 1.0, 0.0), meas(1, 1.0, 0.0), meas(2, 1.0, 0.0)];
        select_measurements(&mut ms, &SelectionPolicy::TopN { n: 2 }).unwrap();
        let ids: Vec<usize> = ms
            .iter()
            .filter(|m| m.selected)
            .map(|m| m.beacon_id)
            .collect();
        assert_eq!(ids, [1, 2]);
    }

    #[test]
    fn top_n_bounds_checked() {
        let mut ms = vec![meas(0, 1.0, 0.0)];
        assert!(select_measurements(&mut ms, &SelectionPolicy::TopN { n: 2 }).is_err());
        assert!(select_measurements(&mut ms, &SelectionPolicy::TopN { n: 0 }).is_err());
    }

    #[test]
    fn all_below_threshold_is_flagged() {
        let mut ms = vec![meas(0, 1.0, 3.0), meas(1, 1.0, 4.0)];
        ms[0].selected = true;
        assert_eq!(
            select_measurements(&mut ms, &SelectionPolicy::snr_threshold(15.0)),
            Err(Error::EmptySelection)
        );
        assert!(ms.iter().all(|m| !m.selected));
    }

    fn arb_measurements() -> impl Strategy<Value = Vec<Measurement>> {
        prop::collection::vec((0.0..1e-3f64, -10.0..40.0f64), 1..30).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (vh, snr))| meas(i, vh, snr))
                .collect()
        })
    }

    fn selected_ids(ms: &[Measurement]) -> Vec<usize> {
        let mut ids: Vec<usize> = ms
            .iter()
            .filter(|m| m.selected)
            .map(|m| m.beacon_id)
            .collect();
        ids.sort_unstable();
        ids
    }

    proptest! {
        #[test]
        fn selection_ignores_input_order(ms in arb_measurements(), th in -5.0..35.0f64, rot in 0usize..30) {
            let policies = [
                SelectionPolicy::snr_threshold(th),
                SelectionPolicy::TopN { n: 1 + rot % ms.len() },
                SelectionPolicy::SnrThreshold { snr_threshold_db: th, max_count: Some(3) },
            ];
            for policy in policies {
                let mut a = ms.clone();
                let mut b = ms.clone();
                b.rotate_left(rot % ms.len());
                b.reverse();
                let ra = select_measurements(&mut a, &policy).ok();
                let rb = select_measurements(&mut b, &policy).ok();
                prop_assert_eq!(ra, rb);
                prop_assert_eq!(selected_ids(&a), selected_ids(&b));
                // idempotent
                let mut again = a.clone();
                let _ = select_measurements(&mut again, &policy);
                prop_assert_eq!(selected_ids(&again), selected_ids(&a));
            }
        }

        #[test]
        fn selected_count_non_increasing_in_threshold(ms in arb_measurements(), lo in -5.0..35.0f64, gap in 0.0..20.0f64) {
            let count = |th| {
                let mut c = ms.clone();
                select_measurements(&mut c, &SelectionPolicy::snr_threshold(th)).unwrap_or(0)
            };
            prop_assert!(count(lo + gap) <= count(lo));
        }
    }
}
