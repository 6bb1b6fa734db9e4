//! Monte Carlo experiment harness and the error metrics it reports.
//!
//! A run visits every mobile pose `trials_per_pose` times. Each trial owns
//! independent random streams for beacon perturbation, measurement noise and
//! optimizer initialization, all derived from `master_seed` and the trial
//! counter, so results do not depend on scheduling.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{
    mobile_grid, perturb_beacons, Constellation, ConstellationSpec, MobileGrid, PerturbationSpec,
    TriplanarLayout,
};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_pose, params_to_pose, pose_to_params, EstimationResult, FitOptions, MobilePose,
};
use crate::field::{forward_vrms, Coil};
use crate::measurement::{simulate_measurement, snr_db, Measurement, NoiseModel, SelectionPolicy};

/// Position target for the success rates, meters.
pub const DISTANCE_TARGET_M: f64 = 0.01;
/// Attitude target for the success rates, degrees.
pub const ANGLE_TARGET_DEG: f64 = 1.0;

/// Geometry of the receiving coil; its pose comes from the trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub windings: u32,
    pub radius_m: f64,
    pub frequency_hz: f64,
}

impl Default for ReceiverSpec {
    /// 10 windings, 1 cm radius, 200 kHz.
    fn default() -> Self {
        Self {
            windings: 10,
            radius_m: 0.01,
            frequency_hz: 200e3,
        }
    }
}

impl ReceiverSpec {
    pub fn build(&self) -> Result<Coil> {
        Coil::new(
            Vector3::zeros(),
            Vector3::z(),
            self.windings,
            self.radius_m,
            0.0,
            self.frequency_hz,
        )
    }
}

/// Where the optimizer starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitMode {
    Truth,
    /// Truth plus uniform errors on each coordinate and on azimuth/elevation.
    PerturbedTruth {
        position_bound_m: f64,
        angle_bound_deg: f64,
    },
    Fixed {
        position_m: [f64; 3],
        attitude: [f64; 3],
    },
}

impl InitMode {
    /// ±10 cm per coordinate, ±18° per angle.
    pub fn perturbed_default() -> Self {
        InitMode::PerturbedTruth {
            position_bound_m: 0.10,
            angle_bound_deg: 18.0,
        }
    }

    fn initial_pose<R: Rng + ?Sized>(&self, truth: &MobilePose, rng: &mut R) -> MobilePose {
        match *self {
            InitMode::Truth => *truth,
            InitMode::PerturbedTruth {
                position_bound_m,
                angle_bound_deg,
            } => {
                let mut p = pose_to_params(truth);
                let mut jitter = |b: f64| b * rng.random_range(-1.0..=1.0);
                p.x += jitter(position_bound_m);
                p.y += jitter(position_bound_m);
                p.z += jitter(position_bound_m);
                let a = angle_bound_deg.to_radians();
                p.azimuth += jitter(a);
                p.elevation += jitter(a);
                params_to_pose(&p)
            }
            InitMode::Fixed {
                position_m,
                attitude,
            } => MobilePose::new(Vector3::from(position_m), Vector3::from(attitude)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub label: String,
    pub constellation: ConstellationSpec,
    #[serde(default)]
    pub mobile_grid: MobileGrid,
    #[serde(default)]
    pub receiver: ReceiverSpec,
    pub noise: NoiseModel,
    pub selection: SelectionPolicy,
    #[serde(default = "unit_gain")]
    pub gain: f64,
    pub init: InitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "one")]
    pub trials_per_pose: usize,
    pub master_seed: u64,
    /// SNR threshold for the per-pose coverage fraction.
    #[serde(default = "coverage_default")]
    pub coverage_snr_db: f64,
}

fn unit_gain() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

fn coverage_default() -> f64 {
    10.0
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            label: String::new(),
            constellation: ConstellationSpec::Triplanar(TriplanarLayout::default()),
            mobile_grid: MobileGrid::default(),
            receiver: ReceiverSpec::default(),
            noise: NoiseModel::default(),
            selection: SelectionPolicy::snr_threshold(10.0),
            gain: 1.0,
            init: InitMode::Truth,
            perturbation: None,
            fit: FitOptions::default(),
            trials_per_pose: 1,
            master_seed: 0,
            coverage_snr_db: 10.0,
        }
    }
}

/// Outcome of one trial. `estimate` is `None` when no fit was possible, for
/// instance when no measurement passed the selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub pose_index: usize,
    pub trial: usize,
    pub truth: MobilePose,
    pub estimate: Option<MobilePose>,
    pub e_d: Option<f64>,
    pub e_alpha: Option<f64>,
    pub n_used: usize,
    pub converged: bool,
    pub cost: Option<f64>,
}

impl TrialRecord {
    /// Misses one of the targets, or produced no estimate.
    pub fn is_outlier(&self) -> bool {
        match (self.e_d, self.e_alpha) {
            (Some(d), Some(a)) => d > DISTANCE_TARGET_M || a > ANGLE_TARGET_DEG,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub p_d: f64,
    pub p_alpha: f64,
    pub p_d_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub label: String,
    pub records: Vec<TrialRecord>,
    pub rates: SuccessRates,
    /// Over records with an estimate. NaN when there are none.
    pub e_d: MeanStd,
    pub e_alpha: MeanStd,
    pub cdf_e_d: Vec<(f64, f64)>,
    pub cdf_e_alpha: Vec<(f64, f64)>,
    /// Fraction of beacons above `coverage_snr_db`, one entry per pose.
    pub coverage: Vec<f64>,
    /// Indices into `records`.
    pub outliers: Vec<usize>,
    pub n_failed: usize,
    pub n_converged: usize,
    pub mean_n_used: f64,
}

/// Position error in meters and attitude error in degrees, the latter folded
/// into `[0, 90]` because the attitude sign is not observable.
pub fn error_metrics(truth: &MobilePose, est: &MobilePose) -> (f64, f64) {
    let e_d = (est.position - truth.position).norm();
    let cos = est.attitude().dot(&truth.attitude()).abs().min(1.0);
    (e_d, cos.acos().to_degrees())
}

/// Fractions of records meeting the distance target, the angle target and
/// both. Records without an estimate count as misses.
pub fn success_rates(
    records: &[TrialRecord],
    d_target: f64,
    alpha_target: f64,
) -> Result<SuccessRates> {
    if records.is_empty() {
        return Err(Error::invalid("success rates", "no records"));
    }
    let (mut d, mut a, mut both) = (0usize, 0usize, 0usize);
    for r in records {
        let ok_d = r.e_d.is_some_and(|e| e <= d_target);
        let ok_a = r.e_alpha.is_some_and(|e| e <= alpha_target);
        d += ok_d as usize;
        a += ok_a as usize;
        both += (ok_d && ok_a) as usize;
    }
    let n = records.len() as f64;
    Ok(SuccessRates {
        p_d: d as f64 / n,
        p_alpha: a as f64 / n,
        p_d_alpha: both as f64 / n,
    })
}

/// Sorted `(value, fraction)` pairs with fraction `(k+1)/n`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, (k + 1) as f64 / n))
        .collect()
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

fn snr_or_inf(v: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        snr_db(v, sigma).expect("sigma checked positive")
    } else if v > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Per pose, the fraction of beacons whose noiseless amplified voltage reaches
/// `snr_th_db` against `sigma`.
pub fn coverage_fraction(
    poses: &[MobilePose],
    constellation: &Constellation,
    receiver: &Coil,
    sigma: f64,
    gain: f64,
    snr_th_db: f64,
) -> Result<Vec<f64>> {
    let n_b = constellation.len() as f64;
    poses
        .iter()
        .map(|pose| {
            let mut covered = 0usize;
            for b in &constellation.beacons {
                let v = gain * forward_vrms(b, pose, receiver)?;
                covered += (snr_or_inf(v, sigma) >= snr_th_db) as usize;
            }
            Ok(covered as f64 / n_b)
        })
        .collect()
}

// Independent random streams of one trial.
const STREAM_PERTURB: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAMS_PER_TRIAL: u64 = 3;

fn trial_rng(master_seed: u64, counter: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(1 + counter * STREAMS_PER_TRIAL + purpose);
    rng
}

fn grid_rng(master_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(0);
    rng
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.fit.validate()?;
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::invalid(
                "gain",
                format!("must be > 0, got {}", self.gain),
            ));
        }
        if self.trials_per_pose == 0 {
            return Err(Error::invalid("trials_per_pose", "must be at least 1"));
        }
        Ok(())
    }

    /// The mobile poses visited by this experiment.
    pub fn poses(&self) -> Result<Vec<MobilePose>> {
        mobile_grid(&self.mobile_grid, &mut grid_rng(self.master_seed))
    }
}

struct Scenario<'a> {
    config: &'a ExperimentConfig,
    nominal: Constellation,
    receiver: Coil,
}

impl Scenario<'_> {
    fn measure(
        &self,
        beacons: &[Coil],
        pose: &MobilePose,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Measurement>> {
        let cfg = self.config;
        beacons
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let v_coil = forward_vrms(b, pose, &self.receiver)?;
                let v_hat = simulate_measurement(v_coil, cfg.gain, &cfg.noise, rng);
                Ok(Measurement {
                    beacon_id: i,
                    v_true: cfg.gain * v_coil,
                    v_hat,
                    snr_db: snr_or_inf(v_hat, cfg.noise.sigma_volts),
                    selected: false,
                })
            })
            .collect()
    }

    fn run_trial(&self, pose_index: usize, trial: usize, truth: &MobilePose) -> TrialRecord {
        let cfg = self.config;
        let counter = (pose_index * cfg.trials_per_pose + trial) as u64;
        let seed = cfg.master_seed;

        let actual = match &cfg.perturbation {
            Some(spec) => perturb_beacons(
                &self.nominal,
                spec,
                &mut trial_rng(seed, counter, STREAM_PERTURB),
            ),
            None => self.nominal.clone(),
        };
        let init = cfg
            .init
            .initial_pose(truth, &mut trial_rng(seed, counter, STREAM_INIT));

        let fit: Result<EstimationResult> = self
            .measure(
                &actual.beacons,
                truth,
                &mut trial_rng(seed, counter, STREAM_NOISE),
            )
            .and_then(|ms| {
                estimate_pose(
                    &ms,
                    &self.nominal.beacons,
                    &self.receiver,
                    cfg.gain,
                    &init,
                    &cfg.selection,
                    &cfg.fit,
                )
            });

        match fit {
            Ok(res) => {
                let (e_d, e_alpha) = error_metrics(truth, &res.pose);
                TrialRecord {
                    pose_index,
                    trial,
                    truth: *truth,
                    estimate: Some(res.pose),
                    e_d: Some(e_d),
                    e_alpha: Some(e_alpha),
                    n_used: res.n_used,
                    converged: res.converged,
                    cost: Some(res.cost),
                }
            }
            Err(_) => TrialRecord {
                pose_index,
                trial,
                truth: *truth,
                estimate: None,
                e_d: None,
                e_alpha: None,
                n_used: 0,
                converged: false,
                cost: None,
            },
        }
    }
}

/// Runs every pose × trial and assembles the report.
///
/// Trials execute in parallel; records are ordered by `(pose_index, trial)`
/// and the report is identical for identical configurations.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let scenario = Scenario {
        config,
        nominal: config.constellation.build()?,
        receiver: config.receiver.build()?,
    };
    let poses = config.poses()?;
    let trials = config.trials_per_pose;

    let records: Vec<TrialRecord> = (0..poses.len() * trials)
        .into_par_iter()
        .map(|k| {
            let (pose_index, trial) = (k / trials, k % trials);
            scenario.run_trial(pose_index, trial, &poses[pose_index])
        })
        .collect();

    let coverage = coverage_fraction(
        &poses,
        &scenario.nominal,
        &scenario.receiver,
        config.noise.sigma_volts,
        config.gain,
        config.coverage_snr_db,
    )?;
    Ok(summarize(config.label.clone(), records, coverage))
}

fn summarize(label: String, records: Vec<TrialRecord>, coverage: Vec<f64>) -> ExperimentReport {
    let e_d: Vec<f64> = records.iter().filter_map(|r| r.e_d).collect();
    let e_alpha: Vec<f64> = records.iter().filter_map(|r| r.e_alpha).collect();
    let rates =
        success_rates(&records, DISTANCE_TARGET_M, ANGLE_TARGET_DEG).unwrap_or(SuccessRates {
            p_d: 0.0,
            p_alpha: 0.0,
            p_d_alpha: 0.0,
        });
    let outliers = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_outlier())
        .map(|(i, _)| i)
        .collect();
    let n = records.len().max(1) as f64;
    ExperimentReport {
        label,
        rates,
        e_d: mean_std(&e_d),
        e_alpha: mean_std(&e_alpha),
        cdf_e_d: empirical_cdf(&e_d),
        cdf_e_alpha: empirical_cdf(&e_alpha),
        coverage,
        outliers,
        n_failed: records.iter().filter(|r| r.estimate.is_none()).count(),
        n_converged: records.iter().filter(|r| r.converged).count(),
        mean_n_used: records.iter().map(|r| r.n_used as f64).sum::<f64>() / n,
        records,
    }
}
