//! Closed-form magnetic dipole model of the beacon coils and the voltage they
//! induce in the receiving coil.
//!
//! Beacons are treated as point dipoles with moment `N·S·I·n`. The receiver is
//! a planar coil whose open-circuit rms voltage is proportional to the flux of
//! the local field through its area.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::MobilePose;

/// Permeability of free space divided by 4π, in H/m.
pub const MU0_OVER_4PI: f64 = 1.0e-7;
/// Permeability of free space, in H/m.
pub const MU0: f64 = 4.0 * PI * MU0_OVER_4PI;

const AXIS_NORM_TOL: f64 = 1e-12;

/// A circular coil: either a transmitting beacon or the receiving mobile coil.
///
/// For the receiver only `windings`, `radius` and `frequency` matter; its
/// center and axis are replaced by the pose being evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coil {
    center: Vector3<f64>,
    axis: Vector3<f64>,
    windings: u32,
    radius: f64,
    current_rms: f64,
    frequency: f64,
}

impl Coil {
    pub fn new(
        center: Vector3<f64>,
        axis: Vector3<f64>,
        windings: u32,
        radius: f64,
        current_rms: f64,
        frequency: f64,
    ) -> Result<Self> {
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("coil center", "non-finite coordinate"));
        }
        let norm = axis.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid(
                "coil axis",
                "axis must be a finite non-zero vector",
            ));
        }
        if windings == 0 {
            return Err(Error::invalid("coil windings", "must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(
                "coil radius",
                format!("must be > 0, got {radius}"),
            ));
        }
        if !(current_rms.is_finite() && current_rms >= 0.0) {
            return Err(Error::invalid(
                "coil current",
                format!("must be >= 0, got {current_rms}"),
            ));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::invalid(
                "coil frequency",
                format!("must be > 0, got {frequency}"),
            ));
        }
        Ok(Self {
            center,
            axis: axis / norm,
            windings,
            radius,
            current_rms,
            frequency,
        })
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn windings(&self) -> u32 {
        self.windings
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn current_rms(&self) -> f64 {
        self.current_rms
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Coil area `π r²`.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn with_center(mut self, center: Vector3<f64>) -> Self {
        self.center = center;
        self
    }

    /// Replaces the axis. The new axis is renormalized.
    pub fn with_axis(mut self, axis: Vector3<f64>) -> Self {
        let norm = axis.norm();
        debug_assert!(norm > 0.0);
        self.axis = axis / norm;
        self
    }

    pub fn with_current(mut self, current_rms: f64) -> Self {
        self.current_rms = current_rms.max(0.0);
        self
    }

    pub(crate) fn axis_is_unit(&self) -> bool {
        (self.axis.norm() - 1.0).abs() <= AXIS_NORM_TOL
    }
}

/// Magnetic dipole moment in A·m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleMoment(pub Vector3<f64>);

impl DipoleMoment {
    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}

/// Moment of a beacon coil, `N·π r²·I` along its axis.
pub fn dipole_moment(coil: &Coil) -> DipoleMoment {
    DipoleMoment(coil.axis * (f64::from(coil.windings) * coil.area() * coil.current_rms))
}

/// Field of a point dipole at displacement `d` (source to field point), in tesla.
pub fn dipole_field(m: &DipoleMoment, d: &Vector3<f64>) -> Result<Vector3<f64>> {
    let r = d.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::SingularField);
    }
    let n = d / r;
    let m = m.0;
    Ok((3.0 * m.dot(&n) * n - m) * (MU0_OVER_4PI / (r * r * r)))
}

/// Scale factor converting `N·S·(B·n)` into a voltage.
///
/// `Rms` gives the rms EMF `√2·π·f0·N·S·|B·n|` and is used everywhere by
/// default. `Peak` gives the peak EMF `2π·f0·N·S·|B·n|` and exists for
/// cross-checking the alternative reading of the coupling coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmfScale {
    #[default]
    Rms,
    Peak,
}

impl EmfScale {
    fn factor(self) -> f64 {
        match self {
            EmfScale::Rms => SQRT_2 * PI,
            EmfScale::Peak => 2.0 * PI,
        }
    }
}

/// Rms voltage induced in `receiver` by the field `b`.
///
/// Returns a magnitude: flipping the receiver axis leaves it unchanged.
pub fn induced_vrms(b: &Vector3<f64>, receiver: &Coil) -> f64 {
    induced_voltage(b, receiver, EmfScale::Rms)
}

pub fn induced_voltage(b: &Vector3<f64>, receiver: &Coil, scale: EmfScale) -> f64 {
    scale.factor()
        * receiver.frequency
        * f64::from(receiver.windings)
        * receiver.area()
        * b.dot(&receiver.axis).abs()
}

/// Voltage the receiver would read from `beacon` when placed at `pose`.
pub fn forward_vrms(beacon: &Coil, pose: &MobilePose, receiver: &Coil) -> Result<f64> {
    let b = dipole_field(&dipole_moment(beacon), &(pose.position - beacon.center))?;
    let placed = receiver
        .with_center(pose.position)
        .with_axis(pose.attitude());
    Ok(induced_vrms(&b, &placed))
}
