use coilpose::constellation::random_versor;
use coilpose::field::{dipole_field, dipole_moment, Coil, DipoleMoment, MU0_OVER_4PI};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Field of a circular loop centered at the origin with unit normal `axis`,
/// by midpoint quadrature of the Biot–Savart integral over `segments` pieces.
fn biot_savart_loop(
    axis: Vector3<f64>,
    radius: f64,
    turns_current: f64,
    p: Vector3<f64>,
    segments: usize,
) -> Vector3<f64> {
    let helper = if axis.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    let dphi = std::f64::consts::TAU / segments as f64;
    let mut b = Vector3::zeros();
    for k in 0..segments {
        let phi = (k as f64 + 0.5) * dphi;
        let (s, c) = phi.sin_cos();
        let on_loop = radius * (c * u + s * v);
        let dl = radius * dphi * (-s * u + c * v);
        let r = p - on_loop;
        b += dl.cross(&r) / r.norm().powi(3);
    }
    MU0_OVER_4PI * turns_current * b
}

#[test]
fn dipole_matches_loop_integration_far_from_the_coil() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let axis = random_versor(&mut rng);
        let radius = rng.random_range(0.005..0.05);
        let windings = rng.random_range(1..=30u32);
        let current = rng.random_range(0.1..3.0);
        let coil = Coil::new(Vector3::zeros(), axis, windings, radius, current, 200e3).unwrap();
        let d = random_versor(&mut rng) * radius * rng.random_range(10.0..100.0);

        let dipole = dipole_field(&dipole_moment(&coil), &d).unwrap();
        let exact = biot_savart_loop(axis, radius, windings as f64 * current, d, 360);
        let rel = (dipole - exact).norm() / exact.norm();
        assert!(
            rel < 0.02,
            "relative error {rel} at |d|/r = {}",
            d.norm() / radius
        );
    }
}

#[test]
fn agreement_improves_with_distance() {
    let axis = Vector3::new(0.3, -0.2, 0.9).normalize();
    let coil = Coil::new(Vector3::zeros(), axis, 5, 0.02, 1.0, 200e3).unwrap();
    let dir = Vector3::new(0.5, 0.7, -0.1).normalize();
    let rel = |k: f64| {
        let d = dir * k * 0.02;
        let a = dipole_field(&dipole_moment(&coil), &d).unwrap();
        let b = biot_savart_loop(axis, 0.02, 5.0, d, 360);
        (a - b).norm() / b.norm()
    };
    assert!(rel(40.0) < rel(10.0));
    assert!(rel(10.0) < 0.02);
}

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn displacement() -> impl Strategy<Value = Vector3<f64>> {
    vec3().prop_filter("away from the source", |d| d.norm() > 1e-2)
}

proptest! {
    #[test]
    fn parity(m in vec3(), d in displacement()) {
        let m = DipoleMoment(m);
        let a = dipole_field(&m, &d).unwrap();
        let b = dipole_field(&m, &-d).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
    }

    #[test]
    fn linear_in_moment(m in vec3(), d in displacement(), alpha in -5.0..5.0f64) {
        let a = dipole_field(&DipoleMoment(m * alpha), &d).unwrap();
        let b = dipole_field(&DipoleMoment(m), &d).unwrap() * alpha;
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
    }

    #[test]
    fn cubic_decay(m in vec3(), d in displacement(), lambda in 0.1..10.0f64) {
        let m = DipoleMoment(m);
        let near = dipole_field(&m, &d).unwrap().norm();
        let far = dipole_field(&m, &(d * lambda)).unwrap().norm();
        prop_assert!((far * lambda.powi(3) - near).abs() <= 1e-12 * near.max(1e-300));
    }
}
