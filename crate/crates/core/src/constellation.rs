//! Beacon constellations, mobile-pose grids and the beacon perturbation models
//! used in the sensitivity studies.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::MobilePose;
use crate::field::Coil;

/// Electrical parameters shared by every beacon of a generated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconCoil {
    pub windings: u32,
    pub radius_m: f64,
    pub current_a: f64,
    pub frequency_hz: f64,
}

impl BeaconCoil {
    /// One winding, 1 A and area 1 m²: a unit dipole moment.
    pub fn unit_moment() -> Self {
        Self {
            windings: 1,
            radius_m: (1.0 / PI).sqrt(),
            current_a: 1.0,
            frequency_hz: 200e3,
        }
    }

    /// 20 windings, 3 cm radius, 2 A rms.
    pub fn realistic() -> Self {
        Self {
            windings: 20,
            radius_m: 0.03,
            current_a: 2.0,
            frequency_hz: 200e3,
        }
    }

    pub fn at(&self, center: Vector3<f64>, axis: Vector3<f64>) -> Result<Coil> {
        Coil::new(
            center,
            axis,
            self.windings,
            self.radius_m,
            self.current_a,
            self.frequency_hz,
        )
    }
}

impl Default for BeaconCoil {
    fn default() -> Self {
        Self::unit_moment()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub beacons: Vec<Coil>,
    pub label: String,
}

impl Constellation {
    /// Checks that the constellation is non-empty, centers are pairwise
    /// distinct and all axes are unit vectors.
    pub fn new(beacons: Vec<Coil>, label: impl Into<String>) -> Result<Self> {
        let c = Self {
            beacons,
            label: label.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beacons.is_empty() {
            return Err(Error::invalid("constellation", "no beacons"));
        }
        for (i, a) in self.beacons.iter().enumerate() {
            if !a.axis_is_unit() {
                return Err(Error::invalid(
                    "constellation",
                    format!("beacon {i} axis is not unit norm"),
                ));
            }
            if let Some(j) = self.beacons[i + 1..]
                .iter()
                .position(|b| b.center() == a.center())
            {
                return Err(Error::invalid(
                    "constellation",
                    format!("beacons {i} and {} share a center", i + j + 1),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.beacons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beacons.is_empty()
    }
}

/// One explicitly placed beacon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconSpec {
    pub center_m: [f64; 3],
    pub axis: [f64; 3],
    pub windings: u32,
    pub radius_m: f64,
    pub current_a: f64,
    pub frequency_hz: f64,
}

impl BeaconSpec {
    pub fn build(&self) -> Result<Coil> {
        Coil::new(
            Vector3::from(self.center_m),
            Vector3::from(self.axis),
            self.windings,
            self.radius_m,
            self.current_a,
            self.frequency_hz,
        )
    }
}

impl From<&Coil> for BeaconSpec {
    fn from(c: &Coil) -> Self {
        Self {
            center_m: c.center().into(),
            axis: c.axis().into(),
            windings: c.windings(),
            radius_m: c.radius(),
            current_a: c.current_rms(),
            frequency_hz: c.frequency(),
        }
    }
}

/// Serializable description of a constellation: one of the generated grids or
/// an explicit list of beacons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstellationSpec {
    Monoplanar(MonoplanarLayout),
    Triplanar(TriplanarLayout),
    Custom {
        #[serde(default)]
        label: String,
        beacons: Vec<BeaconSpec>,
    },
}

impl ConstellationSpec {
    pub fn build(&self) -> Result<Constellation> {
        match self {
            ConstellationSpec::Monoplanar(l) => monoplanar_grid(l),
            ConstellationSpec::Triplanar(l) => triplanar_grid(l),
            ConstellationSpec::Custom { label, beacons } => Constellation::new(
                beacons
                    .iter()
                    .map(BeaconSpec::build)
                    .collect::<Result<_>>()?,
                label.clone(),
            ),
        }
    }
}

impl From<&Constellation> for ConstellationSpec {
    fn from(c: &Constellation) -> Self {
        ConstellationSpec::Custom {
            label: c.label.clone(),
            beacons: c.beacons.iter().map(BeaconSpec::from).collect(),
        }
    }
}

/// `n` equispaced values spanning `extent` around `center`.
fn span(center: f64, extent: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| {
        if n == 1 {
            center
        } else {
            center - extent / 2.0 + extent * k as f64 / (n - 1) as f64
        }
    })
}

/// Rectangular array of coils on a plane `z = center.z`, all axes along +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonoplanarLayout {
    pub extent_m: f64,
    pub rows: usize,
    pub cols: usize,
    pub center_m: [f64; 3],
    pub coil: BeaconCoil,
}

impl Default for MonoplanarLayout {
    fn default() -> Self {
        Self {
            extent_m: 1.5,
            rows: 4,
            cols: 7,
            center_m: [0.0; 3],
            coil: BeaconCoil::default(),
        }
    }
}

/// Columns run along x, rows along y; beacons are ordered row by row.
pub fn monoplanar_grid(layout: &MonoplanarLayout) -> Result<Constellation> {
    if layout.rows == 0 || layout.cols == 0 {
        return Err(Error::invalid(
            "mono-planar grid",
            "rows and cols must be at least 1",
        ));
    }
    let [cx, cy, cz] = layout.center_m;
    let mut beacons = Vec::with_capacity(layout.rows * layout.cols);
    for y in span(cy, layout.extent_m, layout.rows) {
        for x in span(cx, layout.extent_m, layout.cols) {
            beacons.push(layout.coil.at(Vector3::new(x, y, cz), Vector3::z())?);
        }
    }
    Constellation::new(beacons, "mono-planar")
}

/// Three square arrays on the planes `z = 0`, `y = 0` and `x = 0`.
///
/// In-plane coordinates run from `offset_m` to `offset_m + extent_m`, so the
/// arrays sit in the positive octant and never share a center along the
/// common edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriplanarLayout {
    pub extent_m: f64,
    pub per_side: usize,
    pub offset_m: f64,
    pub coil: BeaconCoil,
}

impl Default for TriplanarLayout {
    fn default() -> Self {
        Self {
            extent_m: 1.2,
            per_side: 3,
            offset_m: 0.1,
            coil: BeaconCoil::default(),
        }
    }
}

pub fn triplanar_grid(layout: &TriplanarLayout) -> Result<Constellation> {
    if layout.per_side == 0 {
        return Err(Error::invalid(
            "tri-planar grid",
            "per_side must be at least 1",
        ));
    }
    if layout.offset_m.is_nan() || layout.offset_m <= 0.0 {
        return Err(Error::invalid("tri-planar grid", "offset must be positive"));
    }
    let coords: Vec<f64> = span(
        layout.offset_m + layout.extent_m / 2.0,
        layout.extent_m,
        layout.per_side,
    )
    .collect();
    let mut beacons = Vec::with_capacity(3 * coords.len() * coords.len());
    for &u in &coords {
        for &v in &coords {
            beacons.push(layout.coil.at(Vector3::new(v, u, 0.0), Vector3::z())?);
        }
    }
    for &u in &coords {
        for &v in &coords {
            beacons.push(layout.coil.at(Vector3::new(v, 0.0, u), Vector3::y())?);
        }
    }
    for &u in &coords {
        for &v in &coords {
            beacons.push(layout.coil.at(Vector3::new(0.0, v, u), Vector3::x())?);
        }
    }
    Constellation::new(beacons, "tri-planar")
}

/// Square grid of mobile positions on the vertical plane `y = plane_y_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobileGrid {
    pub side_points: usize,
    pub plane_y_m: f64,
    pub extent_m: f64,
    pub center_x_m: f64,
    pub center_z_m: f64,
}

impl Default for MobileGrid {
    fn default() -> Self {
        Self {
            side_points: 20,
            plane_y_m: 1.0,
            extent_m: 1.5,
            center_x_m: 0.7,
            center_z_m: 0.85,
        }
    }
}

/// Positions are ordered by z then x; every pose gets an independent random
/// attitude.
pub fn mobile_grid<R: Rng + ?Sized>(grid: &MobileGrid, rng: &mut R) -> Result<Vec<MobilePose>> {
    if grid.side_points == 0 {
        return Err(Error::invalid(
            "mobile grid",
            "side_points must be at least 1",
        ));
    }
    let n = grid.side_points;
    let mut poses = Vec::with_capacity(n * n);
    for z in span(grid.center_z_m, grid.extent_m, n) {
        for x in span(grid.center_x_m, grid.extent_m, n) {
            poses.push(MobilePose::new(
                Vector3::new(x, grid.plane_y_m, z),
                random_versor(rng),
            ));
        }
    }
    Ok(poses)
}

/// Direction drawn uniformly on the unit sphere.
pub fn random_versor<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform random error applied to the true beacon parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// Axis rotated about a random direction by an angle in `[0, bound]`.
    AxisDirection { bound_deg: f64 },
    /// Dipole magnitude scaled by `1 + u`, `u` in `[-bound, bound]`.
    MomentMagnitude { bound_fraction: f64 },
    /// Every center coordinate shifted by a value in `[-bound, bound]`.
    CenterPosition { bound_m: f64 },
}

impl PerturbationSpec {
    pub fn bound(&self) -> f64 {
        match *self {
            PerturbationSpec::AxisDirection { bound_deg } => bound_deg,
            PerturbationSpec::MomentMagnitude { bound_fraction } => bound_fraction,
            PerturbationSpec::CenterPosition { bound_m } => bound_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.bound();
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid(
                "perturbation bound",
                format!("must be >= 0, got {b}"),
            ));
        }
        if let PerturbationSpec::MomentMagnitude { bound_fraction } = self {
            if *bound_fraction > 1.0 {
                return Err(Error::invalid(
                    "perturbation bound",
                    "magnitude fraction above 1",
                ));
            }
        }
        Ok(())
    }
}

/// Returns a perturbed copy of `c`; beacon count and order are preserved.
pub fn perturb_beacons<R: Rng + ?Sized>(
    c: &Constellation,
    spec: &PerturbationSpec,
    rng: &mut R,
) -> Constellation {
    let beacons = c
        .beacons
        .iter()
        .map(|b| match *spec {
            PerturbationSpec::AxisDirection { bound_deg } => {
                let about = Unit::new_unchecked(random_versor(rng));
                let angle = rng.random_range(0.0..=1.0) * bound_deg.to_radians();
                if angle == 0.0 {
                    *b
                } else {
                    b.with_axis(Rotation3::from_axis_angle(&about, angle) * b.axis())
                }
            }
            PerturbationSpec::MomentMagnitude { bound_fraction } => {
                let u = bound_fraction * rng.random_range(-1.0..=1.0);
                if u == 0.0 {
                    *b
                } else {
                    b.with_current(b.current_rms() * (1.0 + u))
                }
            }
            PerturbationSpec::CenterPosition { bound_m } => {
                let shift: Vector3<f64> =
                    Vector3::from_fn(|_, _| bound_m * rng.random_range(-1.0..=1.0));
                b.with_center(b.center() + shift)
            }
        })
        .collect();
    Constellation {
        beacons,
        label: c.label.clone(),
    }
}
