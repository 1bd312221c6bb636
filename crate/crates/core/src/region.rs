//! Open regions of the base used as neighborhoods and support bounds.

use serde::{Deserialize, Serialize};

use crate::geometry::{dist, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: impl Into<Vec<f64>>, radius: f64) -> Self {
        Ball {
            center: center.into(),
            radius,
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        dist(y, &self.center) < self.radius
    }

    pub fn contains_closed(&self, y: &[f64], slack: f64) -> bool {
        dist(y, &self.center) <= self.radius + slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Whole,
    /// Union of open balls.
    Balls { balls: Vec<Ball> },
    /// Open annulus `inner < |y - center| < outer` in the plane.
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// Open axis-aligned box.
    #[serde(rename = "box")]
    Cuboid { min: Vec<f64>, max: Vec<f64> },
}

impl Region {
    pub fn ball(center: impl Into<Vec<f64>>, radius: f64) -> Self {
        Region::Balls {
            balls: vec![Ball::new(center, radius)],
        }
    }

    pub fn annulus(inner: f64, outer: f64) -> Self {
        Region::Annulus {
            center: vec![0.0, 0.0],
            inner,
            outer,
        }
    }

    /// Signed inner radius at `y`: positive values `ρ` guarantee that the
    /// closed ball of any radius `< ρ` about `y` lies in the region.
    pub fn depth(&self, y: &[f64]) -> f64 {
        match self {
            Region::Whole => f64::INFINITY,
            Region::Balls { balls } => balls
                .iter()
                .map(|b| b.radius - dist(y, &b.center))
                .fold(f64::NEG_INFINITY, f64::max),
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(y, center);
                (r - inner).min(outer - r)
            }
            Region::Cuboid { min, max } => y
                .iter()
                .zip(min.iter().zip(max))
                .map(|(v, (lo, hi))| (v - lo).min(hi - v))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.depth(y) > 0.0
    }

    /// Whether the closed ball `b` lies inside the region.
    pub fn contains_ball(&self, b: &Ball) -> bool {
        match self {
            Region::Balls { balls } => balls
                .iter()
                .any(|v| dist(&v.center, &b.center) + b.radius < v.radius),
            _ => self.depth(&b.center) > b.radius,
        }
    }

    /// Whether the origin-centred circle of the given radius lies inside.
    pub fn contains_circle(&self, radius: f64) -> bool {
        match self {
            Region::Whole => true,
            Region::Annulus {
                center,
                inner,
                outer,
            } if norm(center) == 0.0 => *inner < radius && radius < *outer,
            _ => (0..720).all(|k| {
                let a = k as f64 * std::f64::consts::TAU / 720.0;
                self.contains(&[radius * a.cos(), radius * a.sin()])
            }),
        }
    }

    pub fn is_whole(&self) -> bool {
        matches!(self, Region::Whole)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Region::Whole => None,
            Region::Balls { balls } => balls.first().map(|b| b.center.len()),
            Region::Annulus { center, .. } => Some(center.len()),
            Region::Cuboid { min, .. } => Some(min.len()),
        }
    }
}
