//! Bisections as chains of elementary flows.
//!
//! A chain `[p_1, …, p_k]` denotes `p_k ⋆ … ⋆ p_1`: evaluation folds the
//! primitives left to right with `γ ← p(β(γ))·γ` starting from `unit(x)`,
//! so `α(σ(x)) = x` holds exactly for every chain.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{Section, SectionKind};
use crate::geometry::{dist, newton_solve, rk4_integrate};
use crate::groupoid::{invert, multiply, rotate, Arrow, GroupoidInstance};
use crate::region::Ball;

/// Threshold for the empirical support of a bisection.
pub const EPS_SUPPORT: f64 = 1e-9;

/// Cap on the number of points of a support audit grid.
pub const MAX_GRID_POINTS: usize = 1 << 20;

/// `exp(time · section)`, integrated with a fixed number of RK4 steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub section: Section,
    pub time: f64,
    pub steps: usize,
}

impl Primitive {
    pub fn new(section: Section, time: f64) -> Self {
        let steps = section.suggested_steps(time);
        Primitive {
            section,
            time,
            steps,
        }
    }

    pub fn with_steps(section: Section, time: f64, steps: usize) -> Self {
        Primitive {
            section,
            time,
            steps: steps.max(1),
        }
    }

    /// Base flow `y ↦ β(exp(time · section)(y))` on `pair` / `symplectic_pair`
    /// together with its exact derivative, obtained by integrating the
    /// variational equation with the same RK4 steps (row-major `n × n`).
    pub fn flow_with_jacobian(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = y.len();
        let mut state = vec![0.0; n + n * n];
        state[..n].copy_from_slice(y);
        for i in 0..n {
            state[n + i * n + i] = 1.0;
        }
        if self.time == 0.0 || !self.section.may_act_at(y) {
            return Ok((y.to_vec(), state.split_off(n)));
        }
        let mut field = vec![0.0; n];
        let mut jac = vec![0.0; n * n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut failure = None;
        rk4_integrate(
            |_, s: &[f64], out: &mut [f64]| {
                let (z, v) = s.split_at(n);
                if let Err(e) = self.section.field_jacobian_into(z, &mut field, &mut jac, &mut grad, &mut hess) {
                    failure = Some(e);
                    return;
                }
                out[..n].copy_from_slice(&field);
                // V' = DX(z) V
                for i in 0..n {
                    for j in 0..n {
                        out[n + i * n + j] = (0..n).map(|k| jac[i * n + k] * v[k * n + j]).sum();
                    }
                }
            },
            &mut state,
            0.0,
            self.time,
            self.steps,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        let jacobian = state.split_off(n);
        Ok((state, jacobian))
    }

    /// The arrow `exp(time · section)(y)`, whose source is exactly `y`.
    pub fn arrow_at(&self, instance: &GroupoidInstance, y: &[f64]) -> Result<Arrow> {
        if self.time == 0.0 || !self.section.may_act_at(y) {
            return Ok(instance.unit(y));
        }
        let section = &self.section;
        match (instance, &section.kind) {
            (GroupoidInstance::Cotangent { .. }, _) => {
                let v = section.value(y);
                Ok(Arrow::Cotangent {
                    base: y.to_vec(),
                    covector: v.iter().map(|c| c * self.time).collect(),
                })
            }
            (GroupoidInstance::RotationAction, SectionKind::AngularSpeed { .. }) => {
                let mut angle = [0.0];
                let mut grad = [0.0; 2];
                rk4_integrate(
                    |_, th: &[f64], out: &mut [f64]| {
                        section.value_into(&rotate(th[0], y), out, &mut grad)
                    },
                    &mut angle,
                    0.0,
                    self.time,
                    self.steps,
                )?;
                Ok(Arrow::Rotation {
                    angle: angle[0],
                    base: y.to_vec(),
                })
            }
            (GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. }, _) => {
                let mut state = y.to_vec();
                let mut grad = vec![0.0; y.len()];
                rk4_integrate(
                    |_, z: &[f64], out: &mut [f64]| section.value_into(z, out, &mut grad),
                    &mut state,
                    0.0,
                    self.time,
                    self.steps,
                )?;
                let source = y.to_vec();
                Ok(match instance {
                    GroupoidInstance::Pair { .. } => Arrow::Pair {
                        target: state,
                        source,
                    },
                    _ => Arrow::SymplecticPair {
                        target: state,
                        source,
                    },
                })
            }
            _ => Err(Error::SectionInstanceMismatch {
                section: section.kind_name().into(),
                instance: instance.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub instance: GroupoidInstance,
    pub chain: Vec<Primitive>,
}

impl Bisection {
    /// The unit bisection `ι_M` (empty chain).
    pub fn identity(instance: GroupoidInstance) -> Self {
        Bisection {
            instance,
            chain: Vec::new(),
        }
    }

    pub fn from_chain(instance: GroupoidInstance, chain: Vec<Primitive>) -> Result<Self> {
        instance.validate()?;
        for p in &chain {
            p.section.check_instance(&instance)?;
            if !p.time.is_finite() {
                return Err(Error::NonFinite("primitive time".into()));
            }
        }
        Ok(Bisection { instance, chain })
    }

    pub fn is_identity(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Arrow> {
        self.instance.check_point(x)?;
        let mut g = self.instance.unit(x);
        for p in &self.chain {
            let y = g.target_coords();
            if p.time == 0.0 || !p.section.may_act_at(&y) {
                continue;
            }
            let a = p.arrow_at(&self.instance, &y)?;
            g = multiply(&a, &g)?;
        }
        Ok(g)
    }

    /// Base diffeomorphism `β∘σ`.
    pub fn beta_map(&self) -> BetaMap<'_> {
        BetaMap { bisection: self }
    }

    /// Union of the primitives' outer support balls.
    pub fn apriori_support(&self) -> Vec<Ball> {
        let mut balls: Vec<Ball> = Vec::new();
        for p in &self.chain {
            for b in p.section.support_balls() {
                if !balls.contains(&b) {
                    balls.push(b);
                }
            }
        }
        balls
    }
}

/// `σ ⋆ τ`: apply `τ`'s chain, then `σ`'s.
pub fn star(sigma: &Bisection, tau: &Bisection) -> Result<Bisection> {
    if sigma.instance != tau.instance {
        return Err(Error::InstanceMismatch(format!(
            "cannot multiply bisections of {} and {}",
            sigma.instance, tau.instance
        )));
    }
    let mut chain = tau.chain.clone();
    chain.extend(sigma.chain.iter().cloned());
    Ok(Bisection {
        instance: sigma.instance,
        chain,
    })
}

/// Chain inverse: reversed order, negated times.
pub fn inverse(sigma: &Bisection) -> Bisection {
    Bisection {
        instance: sigma.instance,
        chain: sigma
            .chain
            .iter()
            .rev()
            .map(|p| Primitive::with_steps(p.section.clone(), -p.time, p.steps))
            .collect(),
    }
}

/// Pointwise inverse `σ^{-1}(x) = σ((β∘σ)^{-1}(x))^{-1}`, using the
/// numerical inverse of `β∘σ`.
pub fn inverse_by_formula(sigma: &Bisection, x: &[f64]) -> Result<Arrow> {
    let y = sigma.beta_map().invert(x)?;
    Ok(invert(&sigma.eval(&y)?))
}

pub struct BetaMap<'a> {
    bisection: &'a Bisection,
}

impl BetaMap<'_> {
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.bisection.eval(x)?.target_coords())
    }

    /// `β∘σ` and its exact derivative at `x`, for chains of base flows on
    /// `pair` and `symplectic_pair`.
    pub fn eval_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let instance = self.bisection.instance;
        if !matches!(
            instance,
            GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. }
        ) {
            return Err(Error::InvalidArgument(format!(
                "no base-flow derivative on {instance}"
            )));
        }
        instance.check_point(x)?;
        let n = x.len();
        let mut y = x.to_vec();
        let mut total = DMatrix::identity(n, n);
        for p in &self.bisection.chain {
            if p.time == 0.0 || !p.section.may_act_at(&y) {
                continue;
            }
            let (next, jac) = p.flow_with_jacobian(&y)?;
            total = DMatrix::from_row_slice(n, n, &jac) * total;
            y = next;
        }
        Ok((y, total))
    }

    /// Solves `β(σ(x)) = y` by Newton seeded at `β(σ⁻¹(y))`, falling back to a
    /// coarse grid search over the a-priori support.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.bisection.instance.check_point(y)?;
        let support = self.bisection.apriori_support();
        // the complement of the support is fixed pointwise and the support
        // is mapped onto itself
        if !support.iter().any(|b| b.contains_closed(y, 0.0)) {
            return Ok(y.to_vec());
        }
        const TOL: f64 = 1e-11;
        let map = |x: &[f64]| self.eval(x);
        // the reversed chain inverts every flow up to integration error
        let start = inverse(&self.bisection).eval(y)?.target_coords();
        match newton_solve(map, y, &start, TOL, 60) {
            Ok(out) => Ok(out.solution),
            Err(first) => {
                let seed = self.grid_seed(y, &support)?;
                newton_solve(map, y, &seed, TOL, 60)
                    .map(|o| o.solution)
                    .map_err(|_| first)
            }
        }
    }

    fn grid_seed(&self, y: &[f64], support: &[Ball]) -> Result<Vec<f64>> {
        let d = y.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for b in support {
            for k in 0..d {
                lo[k] = lo[k].min(b.center[k] - b.radius);
                hi[k] = hi[k].max(b.center[k] + b.radius);
            }
        }
        let grid = SampleGrid::new(lo, hi, 32);
        let mut best = (f64::INFINITY, y.to_vec());
        for x in grid.points() {
            let fx = self.eval(&x)?;
            let e = dist(&fx, y);
            if e < best.0 {
                best = (e, x);
            }
        }
        Ok(best.1)
    }
}

/// Tensor grid with `per_axis` points per axis including endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub per_axis: usize,
}

impl SampleGrid {
    /// Builds a grid, shrinking `per_axis` so that the total stays within
    /// [`MAX_GRID_POINTS`].
    pub fn new(min: Vec<f64>, max: Vec<f64>, per_axis: usize) -> Self {
        let d = min.len().max(1) as u32;
        let mut n = per_axis.max(2);
        while n.checked_pow(d).is_none_or(|t| t > MAX_GRID_POINTS) {
            n -= 1;
        }
        SampleGrid {
            min,
            max,
            per_axis: n,
        }
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.min.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let d = self.min.len();
        let n = self.per_axis;
        (0..self.len()).map(move |mut idx| {
            let mut p = vec![0.0; d];
            for k in 0..d {
                let i = idx % n;
                idx /= n;
                let f = i as f64 / (n - 1) as f64;
                p[k] = self.min[k] + f * (self.max[k] - self.min[k]);
            }
            p
        })
    }

    /// Bounding box of a set of balls, padded by `pad`.
    pub fn around(balls: &[Ball], pad: f64, per_axis: usize) -> Option<Self> {
        let d = balls.first()?.center.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for b in balls {
            for k in 0..d {
                lo[k] = lo[k].min(b.center[k] - b.radius - pad);
                hi[k] = hi[k].max(b.center[k] + b.radius + pad);
            }
        }
        Some(SampleGrid::new(lo, hi, per_axis))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// Union of primitive support balls (outer radii).
    pub apriori: Vec<Ball>,
    pub grid_points: usize,
    /// Grid points where `σ(x) ≠ unit(x)` or `β(σ(x)) ≠ x` beyond the threshold.
    pub empirical_count: usize,
    /// Empirical support points outside the a-priori bound (must be 0).
    pub outside_apriori: usize,
}

impl SupportReport {
    pub fn empirical_within_apriori(&self) -> bool {
        self.outside_apriori == 0
    }
}

pub fn support_report(sigma: &Bisection, grid: &SampleGrid, eps: f64) -> Result<SupportReport> {
    let apriori = sigma.apriori_support();
    let mut empirical = 0;
    let mut outside = 0;
    for x in grid.points() {
        let g = sigma.eval(&x)?;
        let moved = dist(&g.target_coords(), &x) > eps
            || g.payload_distance(&sigma.instance.unit(&x)) > eps;
        if moved {
            empirical += 1;
            if !apriori.iter().any(|b| b.contains_closed(&x, 1e-12)) {
                outside += 1;
            }
        }
    }
    Ok(SupportReport {
        apriori,
        grid_points: grid.len(),
        empirical_count: empirical,
        outside_apriori: outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{exp_section, Affine};
    use crate::geometry::{Point, PlateauBump};

    fn bump(c: &[f64], r_in: f64, r_out: f64) -> PlateauBump {
        PlateauBump::new(Point::euclidean(c.to_vec()), r_in, r_out).unwrap()
    }

    fn translation(inst: GroupoidInstance, a: &[f64]) -> Bisection {
        let mut b = Bisection::identity(inst);
        for (axis, &m) in a.iter().enumerate() {
            if m != 0.0 {
                let s = Section::coordinate_field(axis, bump(&[0.0, 0.0], 6.0, 9.0), 1.0);
                b.chain.push(Primitive::new(s, m));
            }
        }
        b
    }

    #[test]
    fn propagated_jacobian_matches_difference_quotients() {
        let inst = GroupoidInstance::symplectic_pair(2);
        let h1 = Section::hamiltonian_field(bump(&[0.1, 0.0], 0.3, 0.8), Affine::new(vec![0.4, -1.0], 0.2));
        let h2 = Section::hamiltonian_field(bump(&[0.3, 0.2], 0.2, 0.7), Affine::new(vec![1.0, 0.5], 0.0));
        let c = Section::coordinate_field(1, bump(&[0.0, 0.3], 0.1, 0.6), 1.0);
        let sigma = Bisection::from_chain(
            inst,
            vec![Primitive::new(h1, 0.7), Primitive::new(c, -0.4), Primitive::new(h2, 0.5)],
        )
        .unwrap();
        let f = sigma.beta_map();
        for x in [[0.2, 0.1], [0.45, -0.3], [0.0, 0.6], [2.0, 2.0]] {
            let (y, df) = f.eval_with_jacobian(&x).unwrap();
            assert!(dist(&y, &f.eval(&x).unwrap()) < 1e-14);
            let fd = crate::geometry::fd_jacobian_richardson(|z| f.eval(z), &x, 1e-4).unwrap();
            assert!((df - fd).amax() < 1e-8);
        }
        let rot = Bisection::identity(GroupoidInstance::rotation());
        assert!(rot.beta_map().eval_with_jacobian(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn empty_chain_is_unit() {
        let inst = GroupoidInstance::rotation();
        let b = Bisection::identity(inst);
        assert_eq!(b.eval(&[1.0, 2.0]).unwrap(), inst.unit(&[1.0, 2.0]));
    }

    #[test]
    fn translations_compose() {
        let inst = GroupoidInstance::pair(2);
        let a = translation(inst, &[0.5, -0.25]);
        let b = translation(inst, &[1.0, 0.75]);
        let ab = star(&b, &a).unwrap();
        let y = ab.beta_map().eval(&[0.1, 0.2]).unwrap();
        assert!(dist(&y, &[1.6, 0.7]) < 1e-12);
        let id = Bisection::identity(inst);
        for x in [[0.0, 0.0], [1.0, -1.0]] {
            assert_eq!(star(&id, &a).unwrap().eval(&x).unwrap(), a.eval(&x).unwrap());
            assert_eq!(star(&a, &id).unwrap().eval(&x).unwrap(), a.eval(&x).unwrap());
        }
        let inv = inverse(&a);
        let y = inv.beta_map().eval(&[0.0, 0.0]).unwrap();
        assert!(dist(&y, &[-0.5, 0.25]) < 1e-12);
        assert!(inverse(&id).is_identity());
    }

    #[test]
    fn cotangent_star_adds_forms() {
        let inst = GroupoidInstance::cotangent(2);
        let s1 = Section::exact_form(bump(&[0.0, 0.0], 0.4, 1.2), Affine::new(vec![1.0, -0.5], 0.3));
        let s2 = Section::exact_form(bump(&[0.3, 0.1], 0.2, 0.9), Affine::new(vec![0.2, 2.0], -0.1));
        let a = exp_section(inst, &s1, 0.7).unwrap();
        let b = exp_section(inst, &s2, -1.3).unwrap();
        let ab = star(&a, &b).unwrap();
        for x in [[0.5, 0.2], [0.0, 0.0], [-0.6, 0.4]] {
            let got = ab.eval(&x).unwrap().fiber_coords();
            let want: Vec<f64> = s1
                .value(&x)
                .iter()
                .zip(s2.value(&x))
                .map(|(u, v)| 0.7 * u - 1.3 * v)
                .collect();
            assert!(dist(&got, &want) < 1e-14);
            assert_eq!(ab.beta_map().eval(&x).unwrap(), x.to_vec());
        }
    }

    #[test]
    fn star_rejects_mixed_instances() {
        let a = Bisection::identity(GroupoidInstance::pair(2));
        let b = Bisection::identity(GroupoidInstance::cotangent(2));
        assert!(star(&a, &b).is_err());
    }

    #[test]
    fn beta_map_inversion_round_trip() {
        let inst = GroupoidInstance::pair(2);
        let s1 = Section::coordinate_field(0, bump(&[0.0, 0.0], 0.3, 1.0), 1.0);
        let s2 = Section::coordinate_field(1, bump(&[0.2, 0.0], 0.2, 0.8), -1.0);
        let sigma = Bisection::from_chain(inst, vec![Primitive::new(s1, 0.4), Primitive::new(s2, 0.3)]).unwrap();
        let f = sigma.beta_map();
        for x in [[0.1, 0.1], [0.5, -0.2], [0.9, 0.0], [3.0, 3.0]] {
            let y = f.eval(&x).unwrap();
            let back = f.invert(&y).unwrap();
            assert!(dist(&back, &x) < 1e-8, "{x:?} -> {y:?} -> {back:?}");
        }
    }

    #[test]
    fn cotangent_beta_map_is_identity() {
        let inst = GroupoidInstance::cotangent(2);
        let s = Section::exact_form(bump(&[0.0, 0.0], 0.4, 1.2), Affine::new(vec![1.0, 1.0], 0.0));
        let sigma = exp_section(inst, &s, 2.0).unwrap();
        assert_eq!(sigma.beta_map().eval(&[0.3, 0.3]).unwrap(), vec![0.3, 0.3]);
        assert_eq!(sigma.beta_map().invert(&[0.3, 0.3]).unwrap(), vec![0.3, 0.3]);
    }

    #[test]
    fn support_of_identity_is_empty() {
        let inst = GroupoidInstance::pair(2);
        let grid = SampleGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], 16);
        let r = support_report(&Bisection::identity(inst), &grid, EPS_SUPPORT).unwrap();
        assert_eq!(r.empirical_count, 0);
        assert!(r.apriori.is_empty());
    }

    #[test]
    fn support_of_two_disjoint_primitives() {
        let inst = GroupoidInstance::pair(2);
        let s1 = Section::coordinate_field(0, bump(&[-1.0, 0.0], 0.3, 0.6), 1.0);
        let s2 = Section::coordinate_field(1, bump(&[1.0, 0.0], 0.2, 0.5), 1.0);
        let sigma = Bisection::from_chain(inst, vec![Primitive::new(s1, 0.2), Primitive::new(s2, -0.3)]).unwrap();
        let grid = SampleGrid::new(vec![-2.0, -1.0], vec![2.0, 1.0], 64);
        let r = support_report(&sigma, &grid, EPS_SUPPORT).unwrap();
        assert_eq!(r.apriori, vec![Ball::new(vec![-1.0, 0.0], 0.6), Ball::new(vec![1.0, 0.0], 0.5)]);
        assert!(r.empirical_count > 0);
        assert!(r.empirical_within_apriori());
    }

    #[test]
    fn grid_is_capped() {
        let g = SampleGrid::new(vec![0.0; 4], vec![1.0; 4], 64);
        assert!(g.len() <= MAX_GRID_POINTS);
        assert_eq!(g.per_axis, 32);
    }
}
