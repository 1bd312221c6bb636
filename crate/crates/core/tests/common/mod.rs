#![allow(dead_code)]

use groupoid_transit::flows::{Affine, Section};
use groupoid_transit::geometry::{PlateauBump, Point};
use groupoid_transit::groupoid::GroupoidInstance;
use groupoid_transit::{Bisection, Primitive};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn instances() -> [GroupoidInstance; 4] {
    [
        GroupoidInstance::pair(2),
        GroupoidInstance::cotangent(2),
        GroupoidInstance::rotation(),
        GroupoidInstance::symplectic_pair(2),
    ]
}

pub fn point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    vec![rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

pub fn bump(rng: &mut ChaCha8Rng) -> PlateauBump {
    let r_in = rng.gen_range(0.2..0.6);
    let r_out = r_in + rng.gen_range(0.3..0.8);
    PlateauBump::new(Point::euclidean(point(rng, -1.0, 1.0)), r_in, r_out).unwrap()
}

/// A random compactly supported section defined on `inst`.
pub fn section(inst: GroupoidInstance, rng: &mut ChaCha8Rng) -> Section {
    let b = bump(rng);
    let affine = |rng: &mut ChaCha8Rng, b: &PlateauBump| {
        let coeffs = point(rng, -1.0, 1.0);
        Affine::centered(&coeffs, &b.center.coords)
    };
    match inst {
        GroupoidInstance::Pair { .. } => Section::coordinate_field(rng.gen_range(0..2), b, rng.gen_range(-1.0..1.0)),
        GroupoidInstance::Cotangent { .. } => {
            let a = affine(rng, &b);
            Section::exact_form(b, a)
        }
        GroupoidInstance::RotationAction => Section::angular_speed(b, rng.gen_range(-1.0..1.0)),
        GroupoidInstance::SymplecticPair { .. } => {
            if rng.gen_bool(0.5) {
                let a = affine(rng, &b);
                Section::hamiltonian_field(b, a)
            } else {
                Section::coordinate_field(rng.gen_range(0..2), b, rng.gen_range(-1.0..1.0))
            }
        }
    }
}

pub fn chain(inst: GroupoidInstance, len: usize, rng: &mut ChaCha8Rng) -> Bisection {
    let chain = (0..len)
        .map(|_| Primitive::new(section(inst, rng), rng.gen_range(-1.0..1.0)))
        .collect();
    Bisection::from_chain(inst, chain).unwrap()
}

