//! Concrete groupoid instances and their arrow algebra.
//!
//! Arrows compose as `γ1·γ2` when `source(γ1) = target(γ2)`. The algebroid
//! at `x` is the tangent space of the source fiber at `unit(x)`, and every
//! source fiber carries global "fiber coordinates":
//!
//! | instance           | arrow payload           | fiber coordinates |
//! |--------------------|-------------------------|-------------------|
//! | `pair(d)`          | (target, source)        | target point      |
//! | `cotangent(d)`     | (base, covector)        | covector          |
//! | `rotation_action`  | (angle, base)           | angle             |
//! | `symplectic_pair`  | (target, source)        | target point      |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, norm, wrap_angle, Point};

/// Tolerance on `source(γ1) - target(γ2)` accepted by [`multiply`].
pub const EPS_COMPOSE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupoidInstance {
    /// `M × M ⇉ M` over `R^dim`.
    Pair { dim: usize },
    /// `T*M ⇉ M` over `R^dim`, composition is fiberwise addition.
    Cotangent { dim: usize },
    /// Action groupoid of `SO(2)` rotating the plane about the origin.
    RotationAction,
    /// Pair groupoid of `(R^dim, Σ dq∧dp)`, `dim` even, with form `(-ω) ⊕ ω`.
    SymplecticPair { dim: usize },
}

impl fmt::Display for GroupoidInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupoidInstance::Pair { dim } => write!(f, "pair({dim})"),
            GroupoidInstance::Cotangent { dim } => write!(f, "cotangent({dim})"),
            GroupoidInstance::RotationAction => write!(f, "rotation_action(2)"),
            GroupoidInstance::SymplecticPair { dim } => write!(f, "symplectic_pair({dim})"),
        }
    }
}

/// Orbit `β(𝒢_x)` of a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeafDescriptor {
    WholeSpace,
    SinglePoint { point: Vec<f64> },
    /// Circle about the origin of the plane.
    Circle { radius: f64 },
}

impl LeafDescriptor {
    pub fn dim(&self, base_dim: usize) -> usize {
        match self {
            LeafDescriptor::WholeSpace => base_dim,
            LeafDescriptor::SinglePoint { .. } => 0,
            LeafDescriptor::Circle { radius } if *radius == 0.0 => 0,
            LeafDescriptor::Circle { .. } => 1,
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        match self {
            LeafDescriptor::WholeSpace => true,
            LeafDescriptor::SinglePoint { point } => dist(point, y) <= tol,
            LeafDescriptor::Circle { radius } => (norm(y) - radius).abs() <= tol,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, LeafDescriptor::WholeSpace)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ArrowRepr", try_from = "ArrowRepr")]
pub enum Arrow {
    Pair { target: Vec<f64>, source: Vec<f64> },
    Cotangent { base: Vec<f64>, covector: Vec<f64> },
    Rotation { angle: f64, base: Vec<f64> },
    SymplecticPair { target: Vec<f64>, source: Vec<f64> },
}

/// Wire form `{"kind": ..., "payload": [...]}` with a flat payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrowRepr {
    kind: String,
    payload: Vec<f64>,
}

impl From<Arrow> for ArrowRepr {
    fn from(a: Arrow) -> Self {
        let kind = a.kind_name().to_string();
        let payload = match a {
            Arrow::Pair { target, source } | Arrow::SymplecticPair { target, source } => {
                target.into_iter().chain(source).collect()
            }
            Arrow::Cotangent { base, covector } => base.into_iter().chain(covector).collect(),
            Arrow::Rotation { angle, base } => std::iter::once(angle).chain(base).collect(),
        };
        ArrowRepr { kind, payload }
    }
}

impl TryFrom<ArrowRepr> for Arrow {
    type Error = String;

    fn try_from(r: ArrowRepr) -> std::result::Result<Self, String> {
        let p = r.payload;
        let halves = |p: &[f64]| -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
            if p.is_empty() || p.len() % 2 != 0 {
                return Err(format!("payload of length {} cannot be split in halves", p.len()));
            }
            let d = p.len() / 2;
            Ok((p[..d].to_vec(), p[d..].to_vec()))
        };
        if p.iter().any(|v| !v.is_finite()) {
            return Err("payload has non-finite entries".into());
        }
        match r.kind.as_str() {
            "pair" => halves(&p).map(|(target, source)| Arrow::Pair { target, source }),
            "symplectic_pair" => {
                halves(&p).map(|(target, source)| Arrow::SymplecticPair { target, source })
            }
            "cotangent" => halves(&p).map(|(base, covector)| Arrow::Cotangent { base, covector }),
            "rotation" => {
                if p.len() != 3 {
                    return Err(format!("rotation payload needs 3 entries, got {}", p.len()));
                }
                Ok(Arrow::Rotation {
                    angle: p[0],
                    base: p[1..].to_vec(),
                })
            }
            other => Err(format!("unknown arrow kind {other:?}")),
        }
    }
}

pub fn rotate(angle: f64, x: &[f64]) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

impl Arrow {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Arrow::Pair { .. } => "pair",
            Arrow::Cotangent { .. } => "cotangent",
            Arrow::Rotation { .. } => "rotation",
            Arrow::SymplecticPair { .. } => "symplectic_pair",
        }
    }

    /// `α(γ)` in chart coordinates.
    pub fn source_coords(&self) -> Vec<f64> {
        match self {
            Arrow::Pair { source, .. } | Arrow::SymplecticPair { source, .. } => source.clone(),
            Arrow::Cotangent { base, .. } | Arrow::Rotation { base, .. } => base.clone(),
        }
    }

    /// `β(γ)` in chart coordinates.
    pub fn target_coords(&self) -> Vec<f64> {
        match self {
            Arrow::Pair { target, .. } | Arrow::SymplecticPair { target, .. } => target.clone(),
            Arrow::Cotangent { base, .. } => base.clone(),
            Arrow::Rotation { angle, base } => rotate(*angle, base),
        }
    }

    pub fn source(&self) -> Point {
        Point::euclidean(self.source_coords())
    }

    pub fn target(&self) -> Point {
        Point::euclidean(self.target_coords())
    }

    /// Coordinates of the arrow inside its source fiber.
    pub fn fiber_coords(&self) -> Vec<f64> {
        match self {
            Arrow::Pair { target, .. } | Arrow::SymplecticPair { target, .. } => target.clone(),
            Arrow::Cotangent { covector, .. } => covector.clone(),
            Arrow::Rotation { angle, .. } => vec![*angle],
        }
    }

    /// Difference of fiber coordinates `self - other` (angles wrapped).
    pub fn fiber_delta(&self, other: &Arrow) -> Vec<f64> {
        match (self, other) {
            (Arrow::Rotation { angle: a, .. }, Arrow::Rotation { angle: b, .. }) => {
                vec![wrap_angle(a - b)]
            }
            _ => self
                .fiber_coords()
                .iter()
                .zip(other.fiber_coords())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Euclidean distance of payload coordinates; angles compare on the circle.
    pub fn payload_distance(&self, other: &Arrow) -> f64 {
        match (self, other) {
            (Arrow::Rotation { angle: a, base: x }, Arrow::Rotation { angle: b, base: y }) => {
                let da = wrap_angle(a - b);
                (da * da + dist(x, y).powi(2)).sqrt()
            }
            _ => {
                let a: ArrowRepr = self.clone().into();
                let b: ArrowRepr = other.clone().into();
                if a.kind != b.kind || a.payload.len() != b.payload.len() {
                    return f64::INFINITY;
                }
                dist(&a.payload, &b.payload)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        let r: ArrowRepr = self.clone().into();
        r.payload.iter().all(|v| v.is_finite())
    }
}

impl GroupoidInstance {
    pub fn pair(dim: usize) -> Self {
        GroupoidInstance::Pair { dim }
    }

    pub fn cotangent(dim: usize) -> Self {
        GroupoidInstance::Cotangent { dim }
    }

    pub fn rotation() -> Self {
        GroupoidInstance::RotationAction
    }

    pub fn symplectic_pair(dim: usize) -> Self {
        GroupoidInstance::SymplecticPair { dim }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupoidInstance::Pair { dim } | GroupoidInstance::Cotangent { dim } if dim == 0 => {
                Err(Error::InvalidArgument(format!("{self} needs a positive dimension")))
            }
            GroupoidInstance::SymplecticPair { dim } if dim == 0 || dim % 2 != 0 => Err(
                Error::InvalidArgument(format!("{self} needs a positive even dimension")),
            ),
            _ => Ok(()),
        }
    }

    pub fn base_dim(&self) -> usize {
        match *self {
            GroupoidInstance::Pair { dim }
            | GroupoidInstance::Cotangent { dim }
            | GroupoidInstance::SymplecticPair { dim } => dim,
            GroupoidInstance::RotationAction => 2,
        }
    }

    /// Dimension of the source fibers, i.e. rank of the algebroid.
    pub fn fiber_dim(&self) -> usize {
        match *self {
            GroupoidInstance::RotationAction => 1,
            _ => self.base_dim(),
        }
    }

    pub fn is_symplectic(&self) -> bool {
        matches!(
            self,
            GroupoidInstance::Cotangent { .. } | GroupoidInstance::SymplecticPair { .. }
        )
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.base_dim() {
            return Err(Error::ChartMismatch {
                expected: format!("Euclidean({})", self.base_dim()),
                found: format!("Euclidean({})", x.len()),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("base point".into()));
        }
        Ok(())
    }

    /// Checks that `a` is an arrow of this instance.
    pub fn check_arrow(&self, a: &Arrow) -> Result<()> {
        let ok = match (self, a) {
            (GroupoidInstance::Pair { dim }, Arrow::Pair { target, source })
            | (GroupoidInstance::SymplecticPair { dim }, Arrow::SymplecticPair { target, source }) => {
                target.len() == *dim && source.len() == *dim
            }
            (GroupoidInstance::Cotangent { dim }, Arrow::Cotangent { base, covector }) => {
                base.len() == *dim && covector.len() == *dim
            }
            (GroupoidInstance::RotationAction, Arrow::Rotation { base, .. }) => base.len() == 2,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InstanceMismatch(format!(
                "{} arrow with {} payload does not belong to {self}",
                a.kind_name(),
                ArrowRepr::from(a.clone()).payload.len()
            )))
        }
    }

    pub fn unit(&self, x: &[f64]) -> Arrow {
        match self {
            GroupoidInstance::Pair { .. } => Arrow::Pair {
                target: x.to_vec(),
                source: x.to_vec(),
            },
            GroupoidInstance::SymplecticPair { .. } => Arrow::SymplecticPair {
                target: x.to_vec(),
                source: x.to_vec(),
            },
            GroupoidInstance::Cotangent { dim } => Arrow::Cotangent {
                base: x.to_vec(),
                covector: vec![0.0; *dim],
            },
            GroupoidInstance::RotationAction => Arrow::Rotation {
                angle: 0.0,
                base: x.to_vec(),
            },
        }
    }

    /// The arrow with source `x` and the given fiber coordinates.
    pub fn arrow_from_fiber(&self, x: &[f64], coords: &[f64]) -> Arrow {
        match self {
            GroupoidInstance::Pair { .. } => Arrow::Pair {
                target: coords.to_vec(),
                source: x.to_vec(),
            },
            GroupoidInstance::SymplecticPair { .. } => Arrow::SymplecticPair {
                target: coords.to_vec(),
                source: x.to_vec(),
            },
            GroupoidInstance::Cotangent { .. } => Arrow::Cotangent {
                base: x.to_vec(),
                covector: coords.to_vec(),
            },
            GroupoidInstance::RotationAction => Arrow::Rotation {
                angle: coords[0],
                base: x.to_vec(),
            },
        }
    }

    pub fn leaf_of(&self, x: &[f64]) -> LeafDescriptor {
        match self {
            GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. } => {
                LeafDescriptor::WholeSpace
            }
            GroupoidInstance::Cotangent { .. } => LeafDescriptor::SinglePoint { point: x.to_vec() },
            GroupoidInstance::RotationAction => LeafDescriptor::Circle { radius: norm(x) },
        }
    }
}

/// `γ1·γ2`, defined when `source(γ1) = target(γ2)` within [`EPS_COMPOSE`].
/// The interface point is taken from `γ2`.
pub fn multiply(g1: &Arrow, g2: &Arrow) -> Result<Arrow> {
    let gap = dist(&g1.source_coords(), &g2.target_coords());
    if !(gap <= EPS_COMPOSE) {
        return Err(Error::NotComposable { gap });
    }
    match (g1, g2) {
        (Arrow::Pair { target, .. }, Arrow::Pair { source, .. }) => Ok(Arrow::Pair {
            target: target.clone(),
            source: source.clone(),
        }),
        (Arrow::SymplecticPair { target, .. }, Arrow::SymplecticPair { source, .. }) => {
            Ok(Arrow::SymplecticPair {
                target: target.clone(),
                source: source.clone(),
            })
        }
        (Arrow::Cotangent { covector: p1, .. }, Arrow::Cotangent { base, covector: p2 }) => {
            Ok(Arrow::Cotangent {
                base: base.clone(),
                covector: p1.iter().zip(p2).map(|(a, b)| a + b).collect(),
            })
        }
        (Arrow::Rotation { angle: a1, .. }, Arrow::Rotation { angle: a2, base }) => {
            Ok(Arrow::Rotation {
                angle: a1 + a2,
                base: base.clone(),
            })
        }
        _ => Err(Error::InstanceMismatch(format!(
            "cannot compose {} with {}",
            g1.kind_name(),
            g2.kind_name()
        ))),
    }
}

pub fn invert(g: &Arrow) -> Arrow {
    match g {
        Arrow::Pair { target, source } => Arrow::Pair {
            target: source.clone(),
            source: target.clone(),
        },
        Arrow::SymplecticPair { target, source } => Arrow::SymplecticPair {
            target: source.clone(),
            source: target.clone(),
        },
        Arrow::Cotangent { base, covector } => Arrow::Cotangent {
            base: base.clone(),
            covector: covector.iter().map(|p| -p).collect(),
        },
        Arrow::Rotation { angle, base } => Arrow::Rotation {
            angle: -angle,
            base: rotate(*angle, base),
        },
    }
}
