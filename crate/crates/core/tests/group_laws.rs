mod common;

use groupoid_transit::groupoid::GroupoidInstance;
use groupoid_transit::symplectic::{lagrangian_defect, defect_grid};
use groupoid_transit::{inverse, star, Bisection};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(k: usize) -> GroupoidInstance {
    common::instances()[k]
}

fn chains(inst: GroupoidInstance, seed: u64) -> (Bisection, Bisection, Bisection) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        common::chain(inst, 3, &mut rng),
        common::chain(inst, 3, &mut rng),
        common::chain(inst, 3, &mut rng),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn star_is_associative(k in 0usize..4, seed in any::<u64>(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let inst = instance(k);
        let (a, b, c) = chains(inst, seed);
        let left = star(&star(&a, &b).unwrap(), &c).unwrap();
        let right = star(&a, &star(&b, &c).unwrap()).unwrap();
        let p = [x, y];
        prop_assert!(left.eval(&p).unwrap().payload_distance(&right.eval(&p).unwrap()) <= 1e-12);
    }

    #[test]
    fn unit_laws(k in 0usize..4, seed in any::<u64>(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let inst = instance(k);
        let (a, _, _) = chains(inst, seed);
        let id = Bisection::identity(inst);
        let p = [x, y];
        let g = a.eval(&p).unwrap();
        prop_assert_eq!(star(&id, &a).unwrap().eval(&p).unwrap(), g.clone());
        prop_assert_eq!(star(&a, &id).unwrap().eval(&p).unwrap(), g);
    }

    #[test]
    fn chain_inverse_cancels(k in 0usize..4, seed in any::<u64>(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let inst = instance(k);
        let (a, _, _) = chains(inst, seed);
        let p = [x, y];
        let unit = inst.unit(&p);
        for prod in [star(&a, &inverse(&a)).unwrap(), star(&inverse(&a), &a).unwrap()] {
            prop_assert!(prod.eval(&p).unwrap().payload_distance(&unit) <= 1e-7);
        }
        prop_assert_eq!(inverse(&inverse(&a)), a);
    }

    #[test]
    fn evaluation_starts_at_the_point(k in 0usize..4, seed in any::<u64>(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let (a, _, _) = chains(instance(k), seed);
        prop_assert_eq!(a.eval(&[x, y]).unwrap().source_coords(), vec![x, y]);
    }

    #[test]
    fn beta_map_inversion(k in 0usize..4, seed in any::<u64>(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let inst = instance(k);
        prop_assume!(inst != GroupoidInstance::cotangent(2));
        let (a, _, _) = chains(inst, seed);
        let f = a.beta_map();
        let z = f.eval(&[x, y]).unwrap();
        let back = f.invert(&z).unwrap();
        prop_assert!(groupoid_transit::geometry::dist(&back, &[x, y]) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn closed_forms_stay_closed_under_star(seed in any::<u64>()) {
        let inst = GroupoidInstance::cotangent(2);
        let (a, b, _) = chains(inst, seed);
        let grid = defect_grid(&star(&a, &b).unwrap(), 12).unwrap();
        let da = lagrangian_defect(&a, &grid).unwrap();
        let db = lagrangian_defect(&b, &grid).unwrap();
        let dab = lagrangian_defect(&star(&a, &b).unwrap(), &grid).unwrap();
        prop_assert!(dab <= da + db + 1e-9);
    }
}
