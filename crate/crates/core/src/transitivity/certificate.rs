use serde::{Deserialize, Serialize};

use super::{TransitivityProblem, Violation};
use crate::bisection::{support_report, Bisection, Primitive, SampleGrid, EPS_SUPPORT};
use crate::error::Result;
use crate::groupoid::GroupoidInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    Failed,
    Inadmissible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSummary {
    /// Distinct primitive support balls.
    pub balls: usize,
    /// Every support ball lies inside one of the neighborhoods.
    pub inside_neighborhoods: bool,
    pub grid_points: usize,
    /// Audit points where the bisection differs from the unit.
    pub empirical_count: usize,
    /// Audit points moved although outside every support ball.
    pub empirical_outside: usize,
}

impl SupportSummary {
    pub fn ok(&self) -> bool {
        self.inside_neighborhoods && self.empirical_outside == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub lagrangian_defect: f64,
    pub poisson_defect: f64,
    pub grid_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub status: Status,
    pub instance: GroupoidInstance,
    pub chain: Vec<Primitive>,
    pub residuals: Vec<f64>,
    pub support: SupportSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symplectic: Option<DefectReport>,
    pub steps: usize,
    pub seed: u64,
    pub runtime_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Certificate {
    pub fn bisection(&self) -> Bisection {
        Bisection {
            instance: self.instance,
            chain: self.chain.clone(),
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_solved(&self) -> bool {
        self.status == Status::Solved
    }

    pub fn inadmissible(p: &TransitivityProblem, violations: Vec<Violation>) -> Self {
        Certificate {
            status: Status::Inadmissible,
            instance: p.instance,
            chain: Vec::new(),
            residuals: Vec::new(),
            support: SupportSummary {
                balls: 0,
                inside_neighborhoods: true,
                grid_points: 0,
                empirical_count: 0,
                empirical_outside: 0,
            },
            symplectic: None,
            steps: 0,
            seed: p.seed,
            runtime_ms: None,
            violations,
            error: None,
        }
    }
}

/// `|σ(x_i) − γ_i|` in payload coordinates, angles compared on the circle.
pub fn residuals(sigma: &Bisection, p: &TransitivityProblem) -> Result<Vec<f64>> {
    p.points
        .iter()
        .zip(&p.targets)
        .map(|(x, g)| Ok(sigma.eval(x)?.payload_distance(g)))
        .collect()
}

/// A-priori containment in the neighborhoods plus an empirical grid audit
/// (`grid_per_axis = 0` skips the audit).
pub fn support_summary(
    sigma: &Bisection,
    p: &TransitivityProblem,
    grid_per_axis: usize,
) -> Result<SupportSummary> {
    let balls = sigma.apriori_support();
    let inside = balls
        .iter()
        .all(|b| (0..p.n().max(1)).any(|i| p.neighborhood(i).contains_ball(b)));
    let mut summary = SupportSummary {
        balls: balls.len(),
        inside_neighborhoods: inside,
        grid_points: 0,
        empirical_count: 0,
        empirical_outside: 0,
    };
    if grid_per_axis >= 2 {
        let pad = balls.iter().map(|b| b.radius).fold(0.0, f64::max) * 0.25;
        if let Some(grid) = SampleGrid::around(&balls, pad, grid_per_axis) {
            let r = support_report(sigma, &grid, EPS_SUPPORT)?;
            summary.grid_points = r.grid_points;
            summary.empirical_count = r.empirical_count;
            summary.empirical_outside = r.outside_apriori;
        }
    }
    Ok(summary)
}
