//! Piecewise-linear configuration paths whose β-images stay apart.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TransitivityProblem;
use crate::error::{Error, Result};
use crate::geometry::{dist, norm, wrap_angle};
use crate::groupoid::GroupoidInstance;

pub const MAX_PLAN_RETRIES: usize = 8;

const MAX_DETOURS: usize = 64;

/// Conflicts are resolved below this multiple of the clearance, so that
/// accepted paths keep a margin.
const TRIGGER_FACTOR: f64 = 1.1;

/// Samples per segment for instances without a closed-form clearance.
const CLEARANCE_SAMPLES: usize = 1000;

/// Waypoints in fiber coordinates: `waypoints[k][i]` is the fiber coordinate
/// of point `i` at waypoint `k`. Consecutive waypoints are joined linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationPath {
    pub instance: GroupoidInstance,
    pub points: Vec<Vec<f64>>,
    pub waypoints: Vec<Vec<Vec<f64>>>,
    pub delta: f64,
    /// Minimum pairwise β-distance per segment.
    pub clearance: Vec<f64>,
}

impl ConfigurationPath {
    pub fn segments(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Fiber coordinates at parameter `u ∈ [0, 1]` of segment `k`.
    pub fn fiber_at(&self, k: usize, u: f64) -> Vec<Vec<f64>> {
        let a = &self.waypoints[k];
        let b = &self.waypoints[k + 1];
        a.iter()
            .zip(b)
            .map(|(p, q)| p.iter().zip(q).map(|(s, t)| s + u * (t - s)).collect())
            .collect()
    }

    pub fn beta_images(&self, k: usize, u: f64) -> Vec<Vec<f64>> {
        self.fiber_at(k, u)
            .iter()
            .zip(&self.points)
            .map(|(f, x)| self.instance.arrow_from_fiber(x, f).target_coords())
            .collect()
    }

    /// Smallest pairwise β-distance over `samples + 1` evenly spaced
    /// parameters of every segment.
    pub fn sampled_clearance(&self, samples: usize) -> f64 {
        let mut m = f64::INFINITY;
        for k in 0..self.segments() {
            for s in 0..=samples {
                m = m.min(min_pairwise(&self.beta_images(k, s as f64 / samples as f64)));
            }
        }
        m
    }
}

fn min_pairwise(ys: &[Vec<f64>]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            m = m.min(dist(&ys[i], &ys[j]));
        }
    }
    m
}

/// Minimum over `s ∈ [0, 1]` of `|a(s) - b(s)|` for two linearly moving
/// points, with the minimizing parameter.
pub fn segment_min_distance(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> (f64, f64) {
    let r0: Vec<f64> = a0.iter().zip(b0).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = a1
        .iter()
        .zip(b1)
        .zip(&r0)
        .map(|((a, b), r)| a - b - r)
        .collect();
    let vv: f64 = dv.iter().map(|v| v * v).sum();
    let s = if vv > 0.0 {
        (-r0.iter().zip(&dv).map(|(r, v)| r * v).sum::<f64>() / vv).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let r: Vec<f64> = r0.iter().zip(&dv).map(|(r, v)| r + s * v).collect();
    (norm(&r), s)
}

struct Conflict {
    segment: usize,
    i: usize,
    j: usize,
    s: f64,
}

fn first_conflict(w: &[Vec<Vec<f64>>], threshold: f64) -> Option<Conflict> {
    for k in 0..w.len() - 1 {
        let n = w[k].len();
        for i in 0..n {
            for j in i + 1..n {
                let (d, s) = segment_min_distance(&w[k][i], &w[k + 1][i], &w[k][j], &w[k + 1][j]);
                if d < threshold {
                    return Some(Conflict { segment: k, i, j, s });
                }
            }
        }
    }
    None
}

/// Unit vector orthogonal to `dv` (any unit vector when `dv = 0`), oriented
/// along `r` when `r` has a usable orthogonal component.
fn detour_direction(dv: &[f64], r: &[f64], scale: f64, randomize: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = dv.len();
    let vn = norm(dv);
    let project = |v: &mut Vec<f64>| {
        if vn > 0.0 {
            let c: f64 = v.iter().zip(dv).map(|(a, b)| a * b).sum::<f64>() / (vn * vn);
            v.iter_mut().zip(dv).for_each(|(a, b)| *a -= c * b);
        }
    };
    let mut n = if d == 2 && vn > 0.0 && !randomize {
        vec![-dv[1] / vn, dv[0] / vn]
    } else {
        loop {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            project(&mut v);
            let l = norm(&v);
            if l > 1e-3 {
                break v.into_iter().map(|a| a / l).collect();
            }
        }
    };
    let along: f64 = n.iter().zip(r).map(|(a, b)| a * b).sum();
    let flip = if along.abs() > 1e-9 * scale {
        along < 0.0
    } else {
        rng.gen_bool(0.5)
    };
    if flip {
        n.iter_mut().for_each(|a| *a = -*a);
    }
    n
}

fn plan_euclidean(
    start: Vec<Vec<f64>>,
    goal: Vec<Vec<f64>>,
    delta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if min_pairwise(&start) < delta || min_pairwise(&goal) < delta {
        return Err(Error::PlanningFailed { retries: 0 });
    }
    for retry in 0..MAX_PLAN_RETRIES {
        let mut w = vec![start.clone(), goal.clone()];
        let mut solved = false;
        for _ in 0..MAX_DETOURS {
            let Some(c) = first_conflict(&w, TRIGGER_FACTOR * delta) else {
                solved = true;
                break;
            };
            let k = c.segment;
            let dv: Vec<f64> = (0..w[k][c.i].len())
                .map(|a| (w[k + 1][c.i][a] - w[k + 1][c.j][a]) - (w[k][c.i][a] - w[k][c.j][a]))
                .collect();
            // push apart at an existing interior waypoint, otherwise insert one
            let (index, insert) = if c.s <= 1e-12 {
                (k, false)
            } else if c.s >= 1.0 - 1e-12 {
                (k + 1, false)
            } else {
                (k + 1, true)
            };
            if !insert && (index == 0 || index == w.len() - 1) {
                break;
            }
            let mut mid: Vec<Vec<f64>> = if insert {
                w[k].iter()
                    .zip(&w[k + 1])
                    .map(|(p, q)| p.iter().zip(q).map(|(a, b)| a + c.s * (b - a)).collect())
                    .collect()
            } else {
                w[index].clone()
            };
            let r: Vec<f64> = mid[c.i].iter().zip(&mid[c.j]).map(|(a, b)| a - b).collect();
            let n = detour_direction(&dv, &r, delta, retry > 0, rng);
            let push = 2.0 * delta * if retry > 0 { rng.gen_range(1.0..2.0) } else { 1.0 };
            for a in 0..n.len() {
                mid[c.i][a] += push * n[a];
                mid[c.j][a] -= push * n[a];
            }
            if insert {
                w.insert(index, mid);
            } else {
                w[index] = mid;
            }
        }
        if solved {
            return Ok(w);
        }
    }
    Err(Error::PlanningFailed {
        retries: MAX_PLAN_RETRIES,
    })
}

/// Plans a path in the α-fibers from the units to the targets, keeping the
/// β-images at pairwise distance at least the problem's clearance.
pub fn plan_path(p: &TransitivityProblem) -> Result<ConfigurationPath> {
    let delta = p.clearance();
    let inst = p.instance;
    let start: Vec<Vec<f64>> = p.points.iter().map(|x| inst.unit(x).fiber_coords()).collect();
    let goal: Vec<Vec<f64>> = p
        .targets
        .iter()
        .map(|g| match g {
            crate::groupoid::Arrow::Rotation { angle, .. } => vec![wrap_angle(*angle)],
            _ => g.fiber_coords(),
        })
        .collect();
    let waypoints = match inst {
        GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            plan_euclidean(start, goal, delta, &mut rng)?
        }
        // β-images stay on distinct leaves (or do not move at all)
        GroupoidInstance::Cotangent { .. } | GroupoidInstance::RotationAction => vec![start, goal],
    };
    let mut path = ConfigurationPath {
        instance: inst,
        points: p.points.clone(),
        waypoints,
        delta,
        clearance: Vec::new(),
    };
    path.clearance = (0..path.segments())
        .map(|k| match inst {
            GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. } => {
                let (a, b) = (&path.waypoints[k], &path.waypoints[k + 1]);
                let mut m = f64::INFINITY;
                for i in 0..a.len() {
                    for j in i + 1..a.len() {
                        m = m.min(segment_min_distance(&a[i], &b[i], &a[j], &b[j]).0);
                    }
                }
                m
            }
            _ => (0..=CLEARANCE_SAMPLES)
                .map(|s| min_pairwise(&path.beta_images(k, s as f64 / CLEARANCE_SAMPLES as f64)))
                .fold(f64::INFINITY, f64::min),
        })
        .collect();
    if path.clearance.iter().any(|&c| c < delta) {
        // only reachable on leaves of dimension one, which admissibility
        // keeps apart
        return Err(Error::PlanningFailed { retries: 0 });
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::Arrow;

    fn swap_problem(delta: Option<f64>) -> TransitivityProblem {
        let mut p = TransitivityProblem::new(
            GroupoidInstance::pair(2),
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![
                Arrow::Pair {
                    target: vec![1.0, 0.0],
                    source: vec![0.0, 0.0],
                },
                Arrow::Pair {
                    target: vec![0.0, 0.0],
                    source: vec![1.0, 0.0],
                },
            ],
        );
        p.tolerances.clearance = delta;
        p
    }

    #[test]
    fn closest_approach() {
        let (d, s) = segment_min_distance(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!((d, s), (0.0, 0.5));
        let (d, s) = segment_min_distance(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]);
        assert_eq!((d, s), (1.0, 0.0));
        let (d, s) = segment_min_distance(&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.5], &[2.0, 0.5]);
        assert!((d - 1.25f64.sqrt()).abs() < 1e-15 && s == 1.0);
    }

    #[test]
    fn single_point_is_a_straight_segment() {
        let p = TransitivityProblem::new(
            GroupoidInstance::pair(2),
            vec![vec![0.0, 0.0]],
            vec![Arrow::Pair {
                target: vec![2.0, 1.0],
                source: vec![0.0, 0.0],
            }],
        );
        let path = plan_path(&p).unwrap();
        assert_eq!(path.waypoints.len(), 2);
        assert_eq!(path.clearance, vec![f64::INFINITY]);
    }

    #[test]
    fn swap_gets_a_detour() {
        let path = plan_path(&swap_problem(Some(0.2))).unwrap();
        assert!(path.segments() >= 2);
        assert!(path.sampled_clearance(1000) >= 0.2);
        assert_eq!(path.waypoints[0], vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(path.waypoints.last().unwrap(), &vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn planning_is_seed_deterministic() {
        let p = swap_problem(None).with_seed(11);
        assert_eq!(plan_path(&p).unwrap(), plan_path(&p).unwrap());
    }

    #[test]
    fn cotangent_path_keeps_base_points() {
        let inst = GroupoidInstance::cotangent(2);
        let p = TransitivityProblem::new(
            inst,
            vec![vec![0.0, 0.0], vec![3.0, 0.0]],
            vec![
                inst.arrow_from_fiber(&[0.0, 0.0], &[1.0, 2.0]),
                inst.arrow_from_fiber(&[3.0, 0.0], &[-1.0, 0.0]),
            ],
        );
        let path = plan_path(&p).unwrap();
        assert_eq!(path.segments(), 1);
        assert_eq!(path.beta_images(0, 0.5), p.points);
        assert!((path.clearance[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_goes_the_short_way() {
        let inst = GroupoidInstance::rotation();
        let p = TransitivityProblem::new(
            inst,
            vec![vec![2.0, 0.0]],
            vec![Arrow::Rotation {
                angle: 5.0,
                base: vec![2.0, 0.0],
            }],
        );
        let path = plan_path(&p).unwrap();
        assert!((path.waypoints[1][0][0] - (5.0 - std::f64::consts::TAU)).abs() < 1e-15);
    }

    #[test]
    fn crowded_endpoints_fail() {
        assert_eq!(
            plan_path(&swap_problem(Some(2.0))),
            Err(Error::PlanningFailed { retries: 0 })
        );
    }
}
