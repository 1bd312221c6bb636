//! The Φ map, local Newton steps and the continuation solver.

use nalgebra::DMatrix;

use super::certificate::{residuals, support_summary, Certificate, Status};
use super::planner::{plan_path, ConfigurationPath};
use super::{admissible, TransitivityProblem};
use crate::bisection::{star, Bisection, Primitive};
use crate::error::{Error, Result};
use crate::flows::{fiber_basis, GeneratorFamily, Section};
use crate::geometry::{dist, newton_solve, norm};
use crate::groupoid::{multiply, Arrow, GroupoidInstance};
use crate::region::Region;

/// Initial continuation step, as a fiber-coordinate displacement.
pub const INITIAL_STEP: f64 = 0.1;
pub const MAX_STEP: f64 = 1.0;

/// Consecutive successes before the step doubles.
const GROWTH_STREAK: usize = 3;

/// Support ball radius as a fraction of the current β-clearance.
const CLEARANCE_FRACTION: f64 = 0.4;
const DEPTH_FRACTION: f64 = 0.99;
const MAX_SUPPORT_RADIUS: f64 = 1.0;

/// Per-step displacement bound as a fraction of the plateau radius.
const PLATEAU_FRACTION: f64 = 0.5;

const MIN_DISPLACEMENT: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 25;
const MAX_CONTINUATION_STEPS: usize = 200_000;

/// The increment `σ^{11}_{t_1} ⋆ ⋯ ⋆ σ^{nk_n}_{t_N}`: its chain lists the
/// primitives from `σ^{nk_n}` (applied first) back to `σ^{11}`.
/// `steps` fixes the RK4 step counts (same layout as `t`).
pub fn phi_increment(
    instance: GroupoidInstance,
    sections: &[Vec<Section>],
    t: &[f64],
    steps: Option<&[usize]>,
) -> Result<Bisection> {
    let total: usize = sections.iter().map(|s| s.len()).sum();
    if t.len() != total || steps.is_some_and(|s| s.len() != total) {
        return Err(Error::InvalidArgument(format!(
            "Φ expects {total} parameters, got {}",
            t.len()
        )));
    }
    check_disjoint(sections)?;
    let mut chain = Vec::with_capacity(total);
    let flat: Vec<&Section> = sections.iter().flatten().collect();
    for idx in (0..total).rev() {
        let s = flat[idx];
        s.check_instance(&instance)?;
        chain.push(match steps {
            Some(st) => Primitive::with_steps(s.clone(), t[idx], st[idx]),
            None => Primitive::new(s.clone(), t[idx]),
        });
    }
    Ok(Bisection { instance, chain })
}

fn check_disjoint(sections: &[Vec<Section>]) -> Result<()> {
    let balls: Vec<_> = sections
        .iter()
        .map(|g| g.iter().flat_map(|s| s.support_balls()).collect::<Vec<_>>())
        .collect();
    for a in 0..balls.len() {
        for b in a + 1..balls.len() {
            for u in &balls[a] {
                for v in &balls[b] {
                    if dist(&u.center, &v.center) < u.radius + v.radius {
                        return Err(Error::SupportOverlap(a, b));
                    }
                }
            }
        }
    }
    Ok(())
}

/// `Φ(t) = (σ̂(t)(β(γ_i)) · γ_i)_i`.
pub fn phi(
    instance: GroupoidInstance,
    base: &[Arrow],
    sections: &[Vec<Section>],
    t: &[f64],
) -> Result<Vec<Arrow>> {
    let inc = phi_increment(instance, sections, t, None)?;
    apply_increment(&inc, base)
}

fn apply_increment(inc: &Bisection, base: &[Arrow]) -> Result<Vec<Arrow>> {
    base.iter()
        .map(|g| multiply(&inc.eval(&g.target_coords())?, g))
        .collect()
}

fn fiber_vector(arrows: &[Arrow]) -> Vec<f64> {
    arrows.iter().flat_map(|a| a.fiber_coords()).collect()
}

/// Block matrix of section values at the base β-images: the derivative of
/// `Φ` (in fiber coordinates) at `t = 0`.
pub fn analytic_jacobian(base: &[Arrow], sections: &[Vec<Section>]) -> DMatrix<f64> {
    let k = base.first().map_or(0, |g| g.fiber_coords().len());
    let cols: usize = sections.iter().map(|s| s.len()).sum();
    let mut m = DMatrix::zeros(base.len() * k, cols);
    let mut col = 0;
    for (i, (g, group)) in base.iter().zip(sections).enumerate() {
        let y = g.target_coords();
        for s in group {
            for (r, v) in s.value(&y).into_iter().enumerate() {
                m[(i * k + r, col)] = v;
            }
            col += 1;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalStep {
    pub increment: Bisection,
    pub arrows: Vec<Arrow>,
    pub parameters: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Moves the current arrows to the given fiber coordinates with one
/// increment supported in the balls `(β(current_i), radii_i)`.
pub fn local_step(
    instance: GroupoidInstance,
    family: GeneratorFamily,
    current: &[Arrow],
    targets: &[Vec<f64>],
    radii: &[f64],
    tol: f64,
) -> Result<LocalStep> {
    let mut sections = Vec::with_capacity(current.len());
    let mut steps = Vec::new();
    for ((g, target), &r) in current.iter().zip(targets).zip(radii) {
        let group = fiber_basis(&instance, &g.target_coords(), r, family)?;
        let reach: f64 = g
            .fiber_coords()
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .sum();
        // fixed step counts keep Φ smooth in t across Newton iterations
        let t_bound = 2.0 * reach + 1e-3 * r;
        steps.extend(group.iter().map(|s| s.suggested_steps(t_bound)));
        sections.push(group);
    }
    check_disjoint(&sections)?;
    let target: Vec<f64> = targets.iter().flatten().copied().collect();
    let map = |t: &[f64]| -> Result<Vec<f64>> {
        let inc = phi_increment(instance, &sections, t, Some(&steps))?;
        Ok(fiber_vector(&apply_increment(&inc, current)?))
    };
    let t0 = vec![0.0; steps.len()];
    let out = newton_solve(map, &target, &t0, tol, NEWTON_MAX_ITER)?;
    let increment = phi_increment(instance, &sections, &out.solution, Some(&steps))?;
    let arrows = apply_increment(&increment, current)?;
    Ok(LocalStep {
        increment,
        arrows,
        parameters: out.solution,
        iterations: out.iterations,
        residual: out.residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Points per axis of the empirical support audit (0 disables it).
    pub audit_grid: usize,
    pub record_trace: bool,
    /// Points per axis of the symplectic defect audit.
    pub defect_grid: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            audit_grid: 24,
            record_trace: false,
            defect_grid: crate::symplectic::DEFECT_GRID,
        }
    }
}

/// Arrows after every accepted continuation step and the increments
/// that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub arrows: Vec<Vec<Arrow>>,
    pub increments: Vec<Bisection>,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub certificate: Certificate,
    pub bisection: Bisection,
    pub path: Option<ConfigurationPath>,
    pub trace: Option<Trace>,
    pub failure: Option<Error>,
}

/// Solves the problem; failures after planning are returned as errors.
pub fn solve(p: &TransitivityProblem) -> Result<Certificate> {
    let out = solve_with_options(p, &SolveOptions::default())?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.certificate),
    }
}

/// `n = 1` transport of the unit at `α(γ)` to `γ` inside `v`.
pub fn bisection_through_arrow(
    instance: GroupoidInstance,
    gamma: &Arrow,
    v: Region,
) -> Result<Certificate> {
    let p = TransitivityProblem::new(instance, vec![gamma.source_coords()], vec![gamma.clone()])
        .with_neighborhoods(vec![v]);
    solve(&p)
}

fn support_radii(p: &TransitivityProblem, current: &[Arrow]) -> Vec<f64> {
    let ys: Vec<Vec<f64>> = current.iter().map(|g| g.target_coords()).collect();
    (0..ys.len())
        .map(|i| {
            let clearance = (0..ys.len())
                .filter(|&j| j != i)
                .map(|j| dist(&ys[i], &ys[j]))
                .fold(f64::INFINITY, f64::min);
            (CLEARANCE_FRACTION * clearance)
                .min(DEPTH_FRACTION * p.neighborhood(i).depth(&ys[i]))
                .min(MAX_SUPPORT_RADIUS)
        })
        .collect()
}

/// Largest parameter increment on a segment that keeps every point's
/// displacement inside the plateau of its support ball.
fn geometric_cap(instance: GroupoidInstance, current: &Arrow, seg: &[f64], radius: f64) -> f64 {
    let r_in = 0.5 * radius;
    let len = norm(seg);
    if len == 0.0 {
        return f64::INFINITY;
    }
    match instance {
        GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. } => {
            PLATEAU_FRACTION * r_in / len
        }
        GroupoidInstance::RotationAction => {
            let big_r = norm(&current.target_coords());
            if big_r == 0.0 {
                f64::INFINITY
            } else {
                PLATEAU_FRACTION * r_in / (big_r * len)
            }
        }
        GroupoidInstance::Cotangent { .. } => f64::INFINITY,
    }
}

pub fn solve_with_options(p: &TransitivityProblem, opts: &SolveOptions) -> Result<SolveOutcome> {
    p.validate()?;
    let violations = admissible(p);
    if let Some(v) = violations.first() {
        return Err(Error::Inadmissible(v.clone()));
    }
    let instance = p.instance;
    let n = p.n();
    let mut sigma = Bisection::identity(instance);
    let mut current: Vec<Arrow> = p.points.iter().map(|x| instance.unit(x)).collect();
    let mut trace = opts.record_trace.then(|| Trace {
        arrows: vec![current.clone()],
        increments: Vec::new(),
        positions: vec![0.0],
    });
    let tol = (0.5 * p.tolerances.residual).min(1e-11);

    let finish = |sigma: Bisection,
                  steps: usize,
                  path: Option<ConfigurationPath>,
                  trace: Option<Trace>,
                  failure: Option<Error>|
     -> Result<SolveOutcome> {
        let res = residuals(&sigma, p)?;
        let support = support_summary(&sigma, p, opts.audit_grid)?;
        let solved = failure.is_none()
            && support.ok()
            && res.iter().all(|&r| r <= p.tolerances.residual);
        let certificate = Certificate {
            status: if solved { Status::Solved } else { Status::Failed },
            instance,
            chain: sigma.chain.clone(),
            residuals: res,
            support,
            symplectic: None,
            steps,
            seed: p.seed,
            runtime_ms: None,
            violations: Vec::new(),
            error: failure.as_ref().map(|e| e.to_string()),
        };
        Ok(SolveOutcome {
            certificate,
            bisection: sigma,
            path,
            trace,
            failure,
        })
    };

    if n == 0 {
        return finish(sigma, 0, None, trace, None);
    }
    let path = match plan_path(p) {
        Ok(path) => path,
        Err(e) => return finish(sigma, 0, None, trace, Some(e)),
    };

    let mut rho = INITIAL_STEP;
    let mut streak = 0;
    let mut steps = 0;
    let mut seg = 0;
    let mut u = 0.0;
    let mut attempts = 0;
    while seg < path.segments() {
        attempts += 1;
        if attempts > MAX_CONTINUATION_STEPS {
            let e = Error::StepFailed {
                position: seg as f64 + u,
                step: rho,
            };
            return finish(sigma, steps, Some(path), trace, Some(e));
        }
        let a = &path.waypoints[seg];
        let b = &path.waypoints[seg + 1];
        let deltas: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(p0, p1)| p1.iter().zip(p0).map(|(x, y)| x - y).collect())
            .collect();
        let dmax = deltas.iter().map(|d| norm(d)).fold(0.0, f64::max);
        if dmax == 0.0 {
            seg += 1;
            u = 0.0;
            continue;
        }
        let radii = support_radii(p, &current);
        let mut du = (1.0 - u).min(rho / dmax);
        for i in 0..n {
            du = du.min(geometric_cap(instance, &current[i], &deltas[i], radii[i]));
        }
        if du * dmax < MIN_DISPLACEMENT || radii.iter().any(|&r| !(r > 0.0)) {
            let e = Error::StepFailed {
                position: seg as f64 + u,
                step: du * dmax,
            };
            return finish(sigma, steps, Some(path), trace, Some(e));
        }
        let reaches_waypoint = u + du >= 1.0;
        let u_next = if reaches_waypoint { 1.0 } else { u + du };
        let targets = path.fiber_at(seg, u_next);
        match local_step(instance, p.mode, &current, &targets, &radii, tol) {
            Ok(step) => {
                sigma = star(&step.increment, &sigma)?;
                current = step.arrows;
                steps += 1;
                if reaches_waypoint {
                    seg += 1;
                    u = 0.0;
                } else {
                    u = u_next;
                }
                if let Some(t) = trace.as_mut() {
                    t.arrows.push(current.clone());
                    t.increments.push(step.increment);
                    t.positions.push(seg as f64 + u);
                }
                streak += 1;
                if streak >= GROWTH_STREAK {
                    rho = (2.0 * rho).min(MAX_STEP);
                    streak = 0;
                }
            }
            Err(_) => {
                // only shrink below what was actually attempted
                rho = 0.5 * rho.min(du * dmax);
                streak = 0;
            }
        }
    }
    finish(sigma, steps, Some(path), trace, None)
}
