//! Symplectic structures of the built-in symplectic groupoids, Hamiltonian
//! generators, and defect audits for Lagrangian bisections and Poisson maps.
//!
//! Conventions: `ω = Σ dq_i ∧ dp_i` with coordinates `(q_1..q_m, p_1..p_m)`,
//! `ω♭(v) = ω(v, ·)`, `ω♯ = (ω♭)⁻¹`. On the cotangent bundle the coordinates
//! are `(x, ξ)` and `ω = Σ dx_i ∧ dξ_i`; on the symplectic pair groupoid the
//! arrow coordinates are `(target, source)` and the form is `β*ω − α*ω`.

use nalgebra::{DMatrix, DVector};

use crate::bisection::{Bisection, SampleGrid};
use crate::error::{Error, Result};
use crate::flows::{Affine, GeneratorFamily, Section};
use crate::geometry::{fd_jacobian_richardson, PlateauBump};
use crate::groupoid::GroupoidInstance;
use crate::transitivity::{
    solve_with_options, Certificate, DefectReport, SolveOptions, SolveOutcome, TransitivityProblem,
};

/// Central-difference step of both audits; each Jacobian is
/// Richardson-extrapolated from steps `h` and `h/2`.
pub const DEFECT_FD_STEP: f64 = 1e-4;

pub const DEFECT_GRID: usize = 32;

/// Largest accepted Poisson defect.
pub const POISSON_TOLERANCE: f64 = 1e-4;

/// Largest accepted Lagrangian defect: closedness of the 1-form on the
/// cotangent groupoid, `|f*ω − ω|` on the symplectic pair groupoid.
pub fn lagrangian_tolerance(instance: &GroupoidInstance) -> f64 {
    match instance {
        GroupoidInstance::Cotangent { .. } => 1e-6,
        _ => 1e-5,
    }
}

/// `[[0, I], [-I, 0]]`, the matrix of `Σ dq_i ∧ dp_i`.
pub fn canonical_matrix(dim: usize) -> DMatrix<f64> {
    let m = dim / 2;
    let mut o = DMatrix::zeros(dim, dim);
    for i in 0..m {
        o[(i, m + i)] = 1.0;
        o[(m + i, i)] = -1.0;
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticStructure {
    pub instance: GroupoidInstance,
    /// `omega[(a, b)] = ω(e_a, e_b)` on the groupoid.
    pub omega: DMatrix<f64>,
    sharp: DMatrix<f64>,
}

impl SymplecticStructure {
    pub fn new(instance: GroupoidInstance) -> Result<Self> {
        let omega = match instance {
            GroupoidInstance::Cotangent { dim } => canonical_matrix(2 * dim),
            GroupoidInstance::SymplecticPair { dim } => {
                let base = canonical_matrix(dim);
                let mut o = DMatrix::zeros(2 * dim, 2 * dim);
                o.view_mut((0, 0), (dim, dim)).copy_from(&base);
                o.view_mut((dim, dim), (dim, dim)).copy_from(&(-base));
                o
            }
            _ => return Err(Error::NotSymplectic(instance.to_string())),
        };
        // flat has matrix ωᵀ
        let sharp = omega
            .transpose()
            .try_inverse()
            .ok_or(Error::SingularJacobian {
                condition: f64::INFINITY,
            })?;
        Ok(SymplecticStructure {
            instance,
            omega,
            sharp,
        })
    }

    pub fn flat(&self, v: &[f64]) -> Vec<f64> {
        (self.omega.transpose() * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    pub fn sharp(&self, a: &[f64]) -> Vec<f64> {
        (&self.sharp * DVector::from_column_slice(a))
            .iter()
            .copied()
            .collect()
    }

    /// Induced Poisson tensor on the base, `{u, v} = ∇uᵀ Λ ∇v`.
    pub fn base_poisson(&self) -> DMatrix<f64> {
        match self.instance {
            GroupoidInstance::SymplecticPair { dim } => canonical_matrix(dim),
            _ => DMatrix::zeros(self.instance.base_dim(), self.instance.base_dim()),
        }
    }
}

/// The Lagrangian generator of `u = bump · potential`: the exact form `du`
/// on the cotangent groupoid, the Hamiltonian field `ω♯ du` on the
/// symplectic pair groupoid.
pub fn hamiltonian_section(
    instance: &GroupoidInstance,
    bump: PlateauBump,
    potential: Affine,
) -> Result<Section> {
    let s = match instance {
        GroupoidInstance::Cotangent { .. } => Section::exact_form(bump, potential),
        GroupoidInstance::SymplecticPair { .. } => Section::hamiltonian_field(bump, potential),
        _ => return Err(Error::NotSymplectic(instance.to_string())),
    };
    s.check_instance(instance)?;
    Ok(s)
}

/// Cotangent: largest `|dθ|` component of the 1-form `θ = σ`, from
/// Richardson-extrapolated central differences.
/// Symplectic pair: largest entry of `Dfᵀ Ω Df − Ω` for `f = β∘σ`, with `Df`
/// propagated exactly through the RK4 steps (difference quotients lose all
/// accuracy on the strongly sheared maps that transport produces).
pub fn lagrangian_defect(sigma: &Bisection, grid: &SampleGrid) -> Result<f64> {
    let mut worst: f64 = 0.0;
    match sigma.instance {
        GroupoidInstance::Cotangent { .. } => {
            let theta = |z: &[f64]| Ok(sigma.eval(z)?.fiber_coords());
            for x in grid.points() {
                let j = fd_jacobian_richardson(theta, &x, DEFECT_FD_STEP)?;
                worst = worst.max((&j - j.transpose()).amax());
            }
        }
        GroupoidInstance::SymplecticPair { dim } => {
            let omega = canonical_matrix(dim);
            let f = sigma.beta_map();
            for x in grid.points() {
                let (_, df) = f.eval_with_jacobian(&x)?;
                worst = worst.max(pullback_defect(&omega, &df));
            }
        }
        other => return Err(Error::NotSymplectic(other.to_string())),
    }
    Ok(worst)
}

/// Pairs of coordinate functions `(z_a, z_b)`, `a < b`.
pub fn canonical_pairs(dim: usize) -> Vec<(Affine, Affine)> {
    let coord = |a: usize| {
        let mut c = vec![0.0; dim];
        c[a] = 1.0;
        Affine::new(c, 0.0)
    };
    let mut out = Vec::new();
    for a in 0..dim {
        for b in a + 1..dim {
            out.push((coord(a), coord(b)));
        }
    }
    out
}

fn pullback_defect(omega: &DMatrix<f64>, df: &DMatrix<f64>) -> f64 {
    (df.transpose() * omega * df - omega).amax()
}

/// `∇(u∘f) = Dfᵀ ∇u` for affine `u`.
fn bracket_defect(lambda: &DMatrix<f64>, df: &DMatrix<f64>, pairs: &[(Affine, Affine)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (u, v) in pairs {
        let du = df.tr_mul(&DVector::from_column_slice(&u.linear));
        let dv = df.tr_mul(&DVector::from_column_slice(&v.linear));
        let pulled = bracket(lambda, du.as_slice(), dv.as_slice());
        let pushed = bracket(lambda, &u.linear, &v.linear);
        worst = worst.max((pulled - pushed).abs());
    }
    worst
}

fn bracket(lambda: &DMatrix<f64>, du: &[f64], dv: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..du.len() {
        for b in 0..dv.len() {
            s += du[a] * lambda[(a, b)] * dv[b];
        }
    }
    s
}

/// Largest `|{u∘f, v∘f} − {u, v}∘f|` over the grid and the given pairs.
pub fn poisson_defect<F>(
    instance: &GroupoidInstance,
    f: F,
    pairs: &[(Affine, Affine)],
    grid: &SampleGrid,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let lambda = SymplecticStructure::new(*instance)?.base_poisson();
    let mut worst: f64 = 0.0;
    for x in grid.points() {
        let df = fd_jacobian_richardson(&f, &x, DEFECT_FD_STEP)?;
        worst = worst.max(bracket_defect(&lambda, &df, pairs));
    }
    Ok(worst)
}

/// Audit grid over the a-priori support, padded by a quarter of the
/// largest support radius.
pub fn defect_grid(sigma: &Bisection, per_axis: usize) -> Option<SampleGrid> {
    let balls = sigma.apriori_support();
    let pad = 0.25 * balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    SampleGrid::around(&balls, pad, per_axis)
}

pub fn defect_report(sigma: &Bisection, per_axis: usize) -> Result<DefectReport> {
    let Some(grid) = defect_grid(sigma, per_axis) else {
        SymplecticStructure::new(sigma.instance)?;
        return Ok(DefectReport {
            lagrangian_defect: 0.0,
            poisson_defect: 0.0,
            grid_per_axis: per_axis,
        });
    };
    let pairs = canonical_pairs(sigma.instance.base_dim());
    let f = sigma.beta_map();
    let (lagrangian_defect, poisson_defect) = match sigma.instance {
        GroupoidInstance::SymplecticPair { dim } => {
            // one Jacobian per point serves both audits
            let omega = canonical_matrix(dim);
            let mut worst = (0.0_f64, 0.0_f64);
            for x in grid.points() {
                let (_, df) = f.eval_with_jacobian(&x)?;
                worst.0 = worst.0.max(pullback_defect(&omega, &df));
                worst.1 = worst.1.max(bracket_defect(&omega, &df, &pairs));
            }
            worst
        }
        _ => (
            lagrangian_defect(sigma, &grid)?,
            poisson_defect(&sigma.instance, |z| f.eval(z), &pairs, &grid)?,
        ),
    };
    Ok(DefectReport {
        lagrangian_defect,
        poisson_defect,
        grid_per_axis: grid.per_axis,
    })
}

/// Transitivity with Lagrangian generators only; the certificate carries
/// the defect report.
pub fn solve_symplectic_with_options(
    p: &TransitivityProblem,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    if !p.instance.is_symplectic() {
        return Err(Error::NotSymplectic(p.instance.to_string()));
    }
    let p = p.clone().with_mode(GeneratorFamily::Symplectic);
    let mut out = solve_with_options(&p, opts)?;
    out.certificate.symplectic = Some(defect_report(&out.bisection, opts.defect_grid)?);
    Ok(out)
}

pub fn solve_symplectic(p: &TransitivityProblem) -> Result<Certificate> {
    let out = solve_symplectic_with_options(p, &SolveOptions::default())?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.certificate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::exp_section;
    use crate::geometry::Point;

    fn bump(c: &[f64], r_in: f64, r_out: f64) -> PlateauBump {
        PlateauBump::new(Point::euclidean(c.to_vec()), r_in, r_out).unwrap()
    }

    #[test]
    fn structure_matrices() {
        for inst in [GroupoidInstance::cotangent(2), GroupoidInstance::symplectic_pair(4)] {
            let s = SymplecticStructure::new(inst).unwrap();
            assert_eq!(s.omega.transpose(), -&s.omega);
            assert!(s.omega.determinant().abs() > 0.5);
            let v = [0.3, -1.2, 2.0, 0.7, 0.1, -0.4, 1.5, 0.9];
            let v = &v[..s.omega.nrows()];
            let back = s.sharp(&s.flat(v));
            assert!(back.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
        assert!(SymplecticStructure::new(GroupoidInstance::pair(2)).is_err());
    }

    #[test]
    fn sharp_matches_section_convention() {
        let s = SymplecticStructure::new(GroupoidInstance::symplectic_pair(2)).unwrap();
        let b = s.base_poisson();
        let v = &b * DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(v.as_slice(), &[0.0, -1.0]);
        let inst = GroupoidInstance::symplectic_pair(2);
        let h = hamiltonian_section(&inst, bump(&[0.0, 0.0], 0.5, 1.0), Affine::new(vec![1.0, 0.0], 0.0))
            .unwrap();
        assert_eq!(h.value(&[0.1, 0.1]), vec![0.0, -1.0]);
    }

    #[test]
    fn cotangent_hamiltonian_is_the_gradient() {
        let inst = GroupoidInstance::cotangent(2);
        let h = hamiltonian_section(&inst, bump(&[0.0, 0.0], 0.5, 1.0), Affine::new(vec![1.0, 2.0], 0.0))
            .unwrap();
        assert_eq!(h.value(&[0.0, 0.0]), vec![1.0, 2.0]);
        let zero = hamiltonian_section(&inst, bump(&[0.0, 0.0], 0.5, 1.0), Affine::new(vec![0.0, 0.0], 0.0))
            .unwrap();
        assert_eq!(zero.value(&[0.7, 0.1]), vec![0.0, 0.0]);
        assert!(hamiltonian_section(&GroupoidInstance::pair(2), bump(&[0.0, 0.0], 0.5, 1.0), Affine::new(vec![1.0, 0.0], 0.0)).is_err());
    }

    #[test]
    fn identity_has_no_defects() {
        let grid = SampleGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], 8);
        for inst in [GroupoidInstance::cotangent(2), GroupoidInstance::symplectic_pair(2)] {
            let id = Bisection::identity(inst);
            assert!(lagrangian_defect(&id, &grid).unwrap() <= 1e-8);
            let f = id.beta_map();
            let d = poisson_defect(&inst, |z| f.eval(z), &canonical_pairs(2), &grid).unwrap();
            assert!(d <= 1e-8);
        }
    }

    #[test]
    fn hamiltonian_flow_is_symplectic() {
        let inst = GroupoidInstance::symplectic_pair(2);
        let h = hamiltonian_section(&inst, bump(&[0.0, 0.0], 0.4, 1.2), Affine::new(vec![0.5, 1.0], 0.2))
            .unwrap();
        let sigma = exp_section(inst, &h, 0.8).unwrap();
        let grid = SampleGrid::new(vec![-1.2, -1.2], vec![1.2, 1.2], 16);
        assert!(lagrangian_defect(&sigma, &grid).unwrap() <= 1e-5);
        // a non-Hamiltonian shear is caught
        let shear = Section::coordinate_field(0, bump(&[0.0, 0.0], 0.4, 1.2), 1.0);
        let bad = exp_section(inst, &shear, 0.8).unwrap();
        assert!(lagrangian_defect(&bad, &grid).unwrap() > 1e-2);
    }

    #[test]
    fn unit_manifold_is_lagrangian_and_fibers_are_orthogonal() {
        let s = SymplecticStructure::new(GroupoidInstance::symplectic_pair(2)).unwrap();
        let w = |a: &[f64], b: &[f64]| {
            (DVector::from_column_slice(a).transpose() * &s.omega * DVector::from_column_slice(b))[(0, 0)]
        };
        let (v, u) = ([0.3, -0.8], [1.1, 0.4]);
        // tangent vectors of the unit manifold: (v, v)
        assert!(w(&[v[0], v[1], v[0], v[1]], &[u[0], u[1], u[0], u[1]]).abs() < 1e-15);
        // α-fiber (source fixed) against β-fiber (target fixed)
        assert!(w(&[v[0], v[1], 0.0, 0.0], &[0.0, 0.0, u[0], u[1]]).abs() < 1e-15);
        assert!(w(&[v[0], v[1], 0.0, 0.0], &[u[0], u[1], 0.0, 0.0]).abs() > 0.1);
    }
}
