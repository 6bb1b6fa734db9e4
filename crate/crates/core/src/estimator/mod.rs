//! Pose estimation by least-squares fitting of the dipole model to the
//! measured rms voltages.
//!
//! The mobile pose has five free parameters: three position coordinates and
//! the azimuth/elevation of the coil axis. Rotation about the axis is not
//! observable for a circular coil, and neither is the sign of the axis.

mod simplex;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{forward_vrms, Coil};
use crate::measurement::{select_measurements, Measurement, SelectionPolicy};

pub use simplex::{nelder_mead, SimplexOptions, SimplexOutcome};

/// Cost returned for poses within this distance of a beacon center.
pub const SINGULARITY_RADIUS_M: f64 = 1e-3;
pub const SINGULARITY_PENALTY: f64 = 1e12;
/// Number of estimated parameters.
pub const POSE_DOF: usize = 5;

/// Position and coil-axis direction of the mobile node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilePose {
    pub position: Vector3<f64>,
    attitude: Vector3<f64>,
}

impl MobilePose {
    /// Builds a pose; `attitude` is normalized and must be non-zero.
    pub fn new(position: Vector3<f64>, attitude: Vector3<f64>) -> Self {
        let norm = attitude.norm();
        assert!(
            norm > 0.0 && norm.is_finite(),
            "attitude must be a non-zero vector"
        );
        Self {
            position,
            attitude: attitude / norm,
        }
    }

    pub fn attitude(&self) -> Vector3<f64> {
        self.attitude
    }

    /// Same pose with the attitude flipped, if needed, into the hemisphere
    /// `z > 0` (ties: `x > 0`, then `y >= 0`).
    pub fn canonical(&self) -> Self {
        let a = self.attitude;
        let flip = if a.z != 0.0 {
            a.z < 0.0
        } else if a.x != 0.0 {
            a.x < 0.0
        } else {
            a.y < 0.0
        };
        Self {
            position: self.position,
            attitude: if flip { -a } else { a },
        }
    }
}

/// Flat parameter vector the optimizer works on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Radians in `[-π, π)`.
    pub azimuth: f64,
    /// Radians in `[-π/2, π/2]`.
    pub elevation: f64,
}

impl PoseParams {
    pub fn to_array(self) -> [f64; POSE_DOF] {
        [self.x, self.y, self.z, self.azimuth, self.elevation]
    }

    pub fn from_array(a: [f64; POSE_DOF]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
            azimuth: a[3],
            elevation: a[4],
        }
    }
}

pub fn pose_to_params(pose: &MobilePose) -> PoseParams {
    let a = pose.attitude;
    let elevation = a.z.clamp(-1.0, 1.0).asin();
    let azimuth = if elevation.abs() == FRAC_PI_2 || (a.x == 0.0 && a.y == 0.0) {
        0.0
    } else {
        let az = a.y.atan2(a.x);
        // atan2 returns (-π, π]; map π to -π.
        if az >= PI {
            az - 2.0 * PI
        } else {
            az
        }
    };
    PoseParams {
        x: pose.position.x,
        y: pose.position.y,
        z: pose.position.z,
        azimuth,
        elevation,
    }
}

/// Any real azimuth/elevation is accepted; the resulting attitude is unit norm.
pub fn params_to_pose(p: &PoseParams) -> MobilePose {
    let (se, ce) = p.elevation.sin_cos();
    let (sa, ca) = p.azimuth.sin_cos();
    MobilePose::new(
        Vector3::new(p.x, p.y, p.z),
        Vector3::new(ce * ca, ce * sa, se),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub simplex_tolerance: f64,
    pub f_tolerance: f64,
    pub initial_step_m: f64,
    pub initial_step_rad: f64,
    /// Extra runs restarted from the best vertex of the previous run.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            simplex_tolerance: 1e-9,
            f_tolerance: 1e-24,
            initial_step_m: 0.05,
            initial_step_rad: 0.1,
            restarts: 1,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.simplex_tolerance,
            self.f_tolerance,
            self.initial_step_m,
            self.initial_step_rad,
        ];
        if self.max_iterations == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(
                "fit options",
                "all tolerances, steps and the iteration cap must be positive",
            ));
        }
        Ok(())
    }

    fn step(&self) -> [f64; POSE_DOF] {
        let (m, r) = (self.initial_step_m, self.initial_step_rad);
        [m, m, m, r, r]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    /// Estimated pose with canonical attitude sign.
    pub pose: MobilePose,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Number of measurements used in the fit.
    pub n_used: usize,
    /// Fewer measurements than free parameters.
    pub underdetermined: bool,
}

/// Sum of squared residuals between the selected measurements and the model
/// prediction at `theta`, both including the receiver gain.
///
/// `beacons` is indexed by `Measurement::beacon_id`.
pub fn cost(
    theta: &MobilePose,
    measurements: &[Measurement],
    beacons: &[Coil],
    receiver: &Coil,
    gain: f64,
) -> Result<f64> {
    let mut used = measurements.iter().filter(|m| m.selected).peekable();
    if used.peek().is_none() {
        return Err(Error::EmptySelection);
    }
    if beacons
        .iter()
        .any(|b| (theta.position - b.center()).norm() < SINGULARITY_RADIUS_M)
    {
        return Ok(SINGULARITY_PENALTY);
    }
    used.map(|m| {
        let beacon = beacons.get(m.beacon_id).ok_or_else(|| {
            Error::invalid("measurement", format!("unknown beacon id {}", m.beacon_id))
        })?;
        let predicted = gain * forward_vrms(beacon, theta, receiver)?;
        Ok((m.v_hat - predicted).powi(2))
    })
    .sum()
}

/// Selects measurements per `policy` and fits the pose starting from `init`.
///
/// An empty selection is an error; a fit that hits the iteration cap is
/// returned with `converged = false`.
pub fn estimate_pose(
    measurements: &[Measurement],
    beacons: &[Coil],
    receiver: &Coil,
    gain: f64,
    init: &MobilePose,
    policy: &SelectionPolicy,
    opts: &FitOptions,
) -> Result<EstimationResult> {
    let mut ms = measurements.to_vec();
    let n_used = select_measurements(&mut ms, policy)?;
    ms.retain(|m| m.selected);
    if let Some(m) = ms.iter().find(|m| m.beacon_id >= beacons.len()) {
        return Err(Error::invalid(
            "measurement",
            format!("unknown beacon id {}", m.beacon_id),
        ));
    }

    let objective = |x: &[f64; POSE_DOF]| {
        let pose = params_to_pose(&PoseParams::from_array(*x));
        cost(&pose, &ms, beacons, receiver, gain).unwrap_or(f64::INFINITY)
    };

    let mut x = pose_to_params(init).to_array();
    let mut iterations = 0;
    let mut outcome = None;
    for _ in 0..=opts.restarts {
        let budget = opts.max_iterations - iterations;
        let simplex_opts = SimplexOptions {
            max_iterations: budget,
            x_tolerance: opts.simplex_tolerance,
            f_tolerance: opts.f_tolerance,
        };
        let run = nelder_mead(objective, x, opts.step(), &simplex_opts)?;
        iterations += run.iterations;
        x = run.argmin;
        let exhausted = !run.converged;
        outcome = Some(run);
        if exhausted || iterations >= opts.max_iterations {
            break;
        }
    }
    let run = outcome.expect("at least one simplex run");

    Ok(EstimationResult {
        pose: params_to_pose(&PoseParams::from_array(run.argmin)).canonical(),
        cost: run.f_min,
        iterations,
        converged: run.converged,
        n_used,
        underdetermined: n_used < POSE_DOF,
    })
}
