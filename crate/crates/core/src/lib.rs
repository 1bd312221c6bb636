//! Bisection groups of concrete Lie groupoids and constructive n-point
//! transport by compactly supported flows.
//!
//! The built-in groupoids are the pair groupoid of `R^d`, the cotangent
//! bundle `T*R^d` as a bundle of groups, the action groupoid of `SO(2)` on
//! the plane and the symplectic pair groupoid of `R^{2m}`. Bisections are
//! chains of flows of compactly supported sections ([`bisection`]), and
//! [`transitivity::solve`] builds one that carries given points to given
//! arrows.

pub mod bisection;
pub mod cli;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod groupoid;
pub mod region;
pub mod symplectic;
pub mod transitivity;

pub use bisection::{inverse, star, Bisection, Primitive};
pub use error::{Error, Result};
pub use groupoid::{Arrow, GroupoidInstance};
pub use region::Region;
pub use transitivity::{solve, Certificate, TransitivityProblem};
