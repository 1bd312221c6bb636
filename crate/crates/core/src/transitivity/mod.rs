//! Constructive n-point transport: admissibility, collision-free
//! configuration paths, the Φ map and the continuation solver.

mod certificate;
mod planner;
mod solver;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::GeneratorFamily;
use crate::geometry::dist;
use crate::groupoid::{Arrow, GroupoidInstance, LeafDescriptor};
use crate::region::Region;

pub use certificate::{residuals, support_summary, Certificate, DefectReport, Status, SupportSummary};
pub use planner::{plan_path, segment_min_distance, ConfigurationPath, MAX_PLAN_RETRIES};
pub use solver::{
    analytic_jacobian, bisection_through_arrow, local_step, phi, phi_increment, solve,
    solve_with_options, LocalStep, SolveOptions, SolveOutcome, Trace, INITIAL_STEP, MAX_STEP,
};

/// β-images closer than this count as colliding.
pub const EPS_COLLISION: f64 = 1e-12;

/// Relative tolerance of leaf membership tests.
pub const EPS_LEAF: f64 = 1e-9;

/// Fraction of the smallest start/target separation used as default clearance.
pub const DEFAULT_CLEARANCE_FACTOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_residual")]
    pub residual: f64,
    /// Minimum pairwise β-distance along the path; derived from the
    /// problem when absent.
    #[serde(default)]
    pub clearance: Option<f64>,
}

fn default_residual() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: default_residual(),
            clearance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitivityProblem {
    pub instance: GroupoidInstance,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<Arrow>,
    /// One region per point; an empty list means the whole base for every point.
    #[serde(default)]
    pub neighborhoods: Vec<Region>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub seed: u64,
    #[serde(default)]
    pub mode: GeneratorFamily,
}

impl TransitivityProblem {
    pub fn new(instance: GroupoidInstance, points: Vec<Vec<f64>>, targets: Vec<Arrow>) -> Self {
        TransitivityProblem {
            instance,
            points,
            targets,
            neighborhoods: Vec::new(),
            tolerances: Tolerances::default(),
            seed: 0,
            mode: GeneratorFamily::General,
        }
    }

    pub fn with_neighborhoods(mut self, v: Vec<Region>) -> Self {
        self.neighborhoods = v;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: GeneratorFamily) -> Self {
        self.mode = mode;
        self
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn neighborhood(&self, i: usize) -> &Region {
        static WHOLE: Region = Region::Whole;
        self.neighborhoods.get(i).unwrap_or(&WHOLE)
    }

    /// Structural checks: dimensions, finiteness, `source(γ_i) = x_i`,
    /// distinct base points.
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        let n = self.n();
        if self.targets.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{n} points but {} targets",
                self.targets.len()
            )));
        }
        if !self.neighborhoods.is_empty() && self.neighborhoods.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{n} points but {} neighborhoods",
                self.neighborhoods.len()
            )));
        }
        if !(self.tolerances.residual > 0.0) {
            return Err(Error::InvalidArgument("residual tolerance must be positive".into()));
        }
        if let Some(c) = self.tolerances.clearance {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidArgument("clearance must be positive".into()));
            }
        }
        for (i, (x, g)) in self.points.iter().zip(&self.targets).enumerate() {
            self.instance.check_point(x)?;
            self.instance.check_arrow(g)?;
            if g.source_coords() != *x {
                return Err(Error::InvalidArgument(format!(
                    "target {i} does not start at point {i}"
                )));
            }
            if let Some(d) = self.neighborhood(i).dim() {
                if d != x.len() {
                    return Err(Error::InvalidArgument(format!(
                        "neighborhood {i} has dimension {d}, base has {}",
                        x.len()
                    )));
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if dist(&self.points[i], &self.points[j]) == 0.0 {
                    return Err(Error::InvalidArgument(format!("points {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    /// β-images of the targets.
    pub fn goal_images(&self) -> Vec<Vec<f64>> {
        self.targets.iter().map(|g| g.target_coords()).collect()
    }

    /// Clearance used for planning: the declared value or
    /// `0.05 · min(pairwise start distance, pairwise goal distance)`.
    pub fn clearance(&self) -> f64 {
        if let Some(c) = self.tolerances.clearance {
            return c;
        }
        let goals = self.goal_images();
        let mut m = f64::INFINITY;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                m = m
                    .min(dist(&self.points[i], &self.points[j]))
                    .min(dist(&goals[i], &goals[j]));
            }
        }
        if m.is_finite() {
            DEFAULT_CLEARANCE_FACTOR * m
        } else {
            1.0
        }
    }
}

/// A failed admissibility check, naming the offending indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    TargetCollision { i: usize, j: usize, distance: f64 },
    OffLeafTarget { i: usize },
    LeafHypothesisViolated { i: usize, j: usize },
    NeighborhoodTooSmall { i: usize },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::TargetCollision { .. } => "TargetCollision",
            Violation::OffLeafTarget { .. } => "OffLeafTarget",
            Violation::LeafHypothesisViolated { .. } => "LeafHypothesisViolated",
            Violation::NeighborhoodTooSmall { .. } => "NeighborhoodTooSmall",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TargetCollision { i, j, distance } => write!(
                f,
                "TargetCollision: targets {i} and {j} end {distance:e} apart"
            ),
            Violation::OffLeafTarget { i } => {
                write!(f, "OffLeafTarget: target {i} leaves the leaf of point {i}")
            }
            Violation::LeafHypothesisViolated { i, j } => write!(
                f,
                "LeafHypothesisViolated: point {j} lies on the one-dimensional leaf of point {i}"
            ),
            Violation::NeighborhoodTooSmall { i } => write!(
                f,
                "NeighborhoodTooSmall: neighborhood {i} does not contain what point {i} must sweep"
            ),
        }
    }
}

fn leaf_contains(leaf: &LeafDescriptor, y: &[f64]) -> bool {
    let scale = crate::geometry::norm(y).max(1.0);
    leaf.contains(y, EPS_LEAF * scale)
}

/// Checks the transitivity hypotheses; an empty list means admissible.
pub fn admissible(p: &TransitivityProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = p.n();
    let d = p.instance.base_dim();
    let goals = p.goal_images();
    for i in 0..n {
        for j in i + 1..n {
            let distance = dist(&goals[i], &goals[j]);
            if distance <= EPS_COLLISION {
                out.push(Violation::TargetCollision { i, j, distance });
            }
        }
    }
    let leaves: Vec<LeafDescriptor> = p.points.iter().map(|x| p.instance.leaf_of(x)).collect();
    for i in 0..n {
        if !leaf_contains(&leaves[i], &goals[i]) {
            out.push(Violation::OffLeafTarget { i });
        }
    }
    for i in 0..n {
        if leaves[i].dim(d) >= 2 {
            continue;
        }
        for j in 0..n {
            if j != i && leaf_contains(&leaves[i], &p.points[j]) {
                out.push(Violation::LeafHypothesisViolated { i, j });
            }
        }
    }
    for i in 0..n {
        let v = p.neighborhood(i);
        let ok = match &leaves[i] {
            LeafDescriptor::SinglePoint { point } => v.contains(point),
            LeafDescriptor::Circle { radius } => {
                if *radius == 0.0 {
                    v.contains(&p.points[i])
                } else {
                    v.contains_circle(*radius)
                }
            }
            // bounded regions are accepted on unbounded leaves as long as
            // they hold both endpoints
            LeafDescriptor::WholeSpace => v.contains(&p.points[i]) && v.contains(&goals[i]),
        };
        if !ok {
            out.push(Violation::NeighborhoodTooSmall { i });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_arrow(target: &[f64], source: &[f64]) -> Arrow {
        Arrow::Pair {
            target: target.to_vec(),
            source: source.to_vec(),
        }
    }

    #[test]
    fn pair_swap_is_admissible() {
        let p = TransitivityProblem::new(
            GroupoidInstance::pair(2),
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![pair_arrow(&[1.0, 0.0], &[0.0, 0.0]), pair_arrow(&[0.0, 0.0], &[1.0, 0.0])],
        );
        p.validate().unwrap();
        assert!(admissible(&p).is_empty());
        assert!((p.clearance() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn same_circle_violates_leaf_hypothesis() {
        let inst = GroupoidInstance::rotation();
        let p = TransitivityProblem::new(
            inst,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![inst.unit(&[1.0, 0.0]), inst.unit(&[0.0, 1.0])],
        );
        let v = admissible(&p);
        assert!(v.contains(&Violation::LeafHypothesisViolated { i: 0, j: 1 }));
        assert!(v.contains(&Violation::LeafHypothesisViolated { i: 1, j: 0 }));
    }

    #[test]
    fn cotangent_targets_are_admissible() {
        let inst = GroupoidInstance::cotangent(2);
        let p = TransitivityProblem::new(
            inst,
            vec![vec![0.0, 0.0], vec![3.0, 0.0]],
            vec![
                inst.arrow_from_fiber(&[0.0, 0.0], &[1.0, 2.0]),
                inst.arrow_from_fiber(&[3.0, 0.0], &[-1.0, 0.0]),
            ],
        );
        assert!(admissible(&p).is_empty());
    }

    #[test]
    fn collisions_and_small_neighborhoods() {
        let p = TransitivityProblem::new(
            GroupoidInstance::pair(2),
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![pair_arrow(&[0.5, 0.5], &[0.0, 0.0]), pair_arrow(&[0.5, 0.5], &[1.0, 0.0])],
        );
        assert!(matches!(
            admissible(&p)[0],
            Violation::TargetCollision { i: 0, j: 1, .. }
        ));

        let inst = GroupoidInstance::rotation();
        let p = TransitivityProblem::new(
            inst,
            vec![vec![2.0, 0.0]],
            vec![Arrow::Rotation {
                angle: 1.0,
                base: vec![2.0, 0.0],
            }],
        )
        .with_neighborhoods(vec![Region::ball(vec![2.0, 0.0], 0.5)]);
        assert_eq!(admissible(&p), vec![Violation::NeighborhoodTooSmall { i: 0 }]);
    }

    #[test]
    fn pair_line_with_two_points_is_rejected() {
        let p = TransitivityProblem::new(
            GroupoidInstance::pair(1),
            vec![vec![0.0], vec![1.0]],
            vec![pair_arrow(&[1.0], &[0.0]), pair_arrow(&[0.0], &[1.0])],
        );
        assert!(admissible(&p)
            .iter()
            .any(|v| v.name() == "LeafHypothesisViolated"));
    }

    #[test]
    fn problem_json_round_trip() {
        let text = r#"{
            "instance": {"kind": "pair", "dim": 2},
            "points": [[0, 0]],
            "targets": [{"kind": "pair", "payload": [1, 1, 0, 0]}],
            "seed": 3
        }"#;
        let p: TransitivityProblem = serde_json::from_str(text).unwrap();
        p.validate().unwrap();
        assert_eq!(p.tolerances.residual, 1e-6);
        assert_eq!(p.mode, GeneratorFamily::General);
        let back: TransitivityProblem =
            serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
