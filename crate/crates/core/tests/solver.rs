use groupoid_transit::bisection::{SampleGrid, EPS_SUPPORT};
use groupoid_transit::flows::GeneratorFamily;
use groupoid_transit::geometry::dist;
use groupoid_transit::groupoid::{Arrow, GroupoidInstance};
use groupoid_transit::region::Region;
use groupoid_transit::symplectic::solve_symplectic;
use groupoid_transit::transitivity::{
    bisection_through_arrow, residuals, solve, solve_with_options, SolveOptions,
    TransitivityProblem,
};

fn pair(target: &[f64], source: &[f64]) -> Arrow {
    Arrow::Pair {
        target: target.to_vec(),
        source: source.to_vec(),
    }
}

fn swap() -> TransitivityProblem {
    let mut p = TransitivityProblem::new(
        GroupoidInstance::pair(2),
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        vec![pair(&[1.0, 0.0], &[0.0, 0.0]), pair(&[0.0, 0.0], &[1.0, 0.0])],
    );
    p.tolerances.clearance = Some(0.2);
    p
}

#[test]
fn pair_swap_is_solved() {
    let p = swap();
    let out = solve_with_options(
        &p,
        &SolveOptions {
            audit_grid: 32,
            record_trace: true,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert!(out.failure.is_none(), "{:?}", out.failure);
    let cert = out.certificate;
    assert!(cert.max_residual() <= 1e-6);
    // independent re-evaluation
    let again = residuals(&cert.bisection(), &p).unwrap();
    for (a, b) in again.iter().zip(&cert.residuals) {
        assert!((a - b).abs() <= 1e-12);
    }
    for (i, x) in p.points.iter().enumerate() {
        let y = cert.bisection().beta_map().eval(x).unwrap();
        assert!(dist(&y, &p.targets[i].target_coords()) <= 1e-6);
    }
    assert!(cert.support.ok());
    let trace = out.trace.unwrap();
    for arrows in &trace.arrows {
        let d = dist(&arrows[0].target_coords(), &arrows[1].target_coords());
        assert!(d >= 0.2 - 1e-9, "{d}");
    }
}

#[test]
fn long_pair_transport() {
    let cert = bisection_through_arrow(
        GroupoidInstance::pair(2),
        &pair(&[5.0, 5.0], &[0.0, 0.0]),
        Region::Whole,
    )
    .unwrap();
    assert!(cert.max_residual() <= 1e-6);
    assert!(cert.steps > 1);
}

#[test]
fn rotation_half_turn_inside_annulus() {
    let inst = GroupoidInstance::rotation();
    let gamma = Arrow::Rotation {
        angle: std::f64::consts::PI,
        base: vec![2.0, 0.0],
    };
    let annulus = Region::annulus(1.5, 2.5);
    let cert = bisection_through_arrow(inst, &gamma, annulus.clone()).unwrap();
    assert!(cert.max_residual() <= 1e-6);
    assert!(cert.support.inside_neighborhoods);
    let grid = SampleGrid::new(vec![-3.0, -3.0], vec![3.0, 3.0], 128);
    let sigma = cert.bisection();
    let mut moved = 0;
    for x in grid.points() {
        let g = sigma.eval(&x).unwrap();
        if g.payload_distance(&inst.unit(&x)) > EPS_SUPPORT {
            moved += 1;
            assert!(annulus.contains(&x), "{x:?}");
        }
    }
    assert!(moved > 0);
}

#[test]
fn cotangent_two_points() {
    let inst = GroupoidInstance::cotangent(2);
    let p = TransitivityProblem::new(
        inst,
        vec![vec![0.0, 0.0], vec![3.0, 0.0]],
        vec![
            inst.arrow_from_fiber(&[0.0, 0.0], &[1.0, 2.0]),
            inst.arrow_from_fiber(&[3.0, 0.0], &[-1.0, 0.0]),
        ],
    )
    .with_neighborhoods(vec![
        Region::ball(vec![0.0, 0.0], 1.0),
        Region::ball(vec![3.0, 0.0], 1.0),
    ]);
    let cert = solve(&p).unwrap();
    assert!(cert.max_residual() <= 1e-6);
    assert!(cert.support.ok());
    let cert = solve_symplectic(&p).unwrap();
    let d = cert.symplectic.unwrap();
    assert!(d.lagrangian_defect <= 1e-6, "{d:?}");
}

#[test]
fn symplectic_pair_swap() {
    let inst = GroupoidInstance::symplectic_pair(2);
    let p = TransitivityProblem::new(
        inst,
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        vec![
            inst.arrow_from_fiber(&[0.0, 0.0], &[1.0, 0.0]),
            inst.arrow_from_fiber(&[1.0, 0.0], &[0.0, 0.0]),
        ],
    )
    .with_mode(GeneratorFamily::Symplectic);
    let cert = solve_symplectic(&p).unwrap();
    assert!(cert.max_residual() <= 1e-6);
    let d = cert.symplectic.unwrap();
    assert!(d.lagrangian_defect <= 1e-5, "{d:?}");
    assert!(d.poisson_defect <= 1e-4, "{d:?}");
}
