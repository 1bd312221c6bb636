//! Compactly supported algebroid sections and the flows they generate.
//!
//! A [`Section`] is a closed-form algebroid section multiplied by one or
//! more smooth cutoffs. Sections generate single-primitive bisections
//! ([`exp_section`]); time-dependent families ([`SectionPath`]) generate
//! isotopies through a product-integral discretization ([`evolve`]), and
//! [`logarithmic_velocity`] recovers the generator from an isotopy.

use serde::{Deserialize, Serialize};

use crate::bisection::{Bisection, Primitive};
use crate::error::{Error, Result};
use crate::geometry::{dist, norm, Point, PlateauBump, SMOOTH_STEP_MAX_SLOPE};
use crate::groupoid::GroupoidInstance;
use crate::region::{Ball, Region};

/// Bound on `|smooth_step''|` over `[0, 1]` (numerically about 9.84).
const SMOOTH_STEP_MAX_CURVATURE: f64 = 10.0;

/// Target value of `h · L` for RK4 steps, `L` a Lipschitz estimate.
const STEP_LIPSCHITZ_BUDGET: f64 = 0.08;

const MAX_RK4_STEPS: usize = 200_000;

/// Minimum `|det|` of the fiber-basis value matrix.
pub const DELTA_INDEP: f64 = 0.5;

/// Union cutoff `1 - Π_k (1 - χ_k)`: 1 on every inner ball, 0 outside the
/// union of outer balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cutoff {
    pub bumps: Vec<PlateauBump>,
}

impl Cutoff {
    pub fn single(b: PlateauBump) -> Self {
        Cutoff { bumps: vec![b] }
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if let [b] = self.bumps.as_slice() {
            return b.value_grad(x, grad);
        }
        // complement product and its gradient
        let mut prod = 1.0;
        let mut g = vec![0.0; x.len()];
        let mut gk = vec![0.0; x.len()];
        for b in &self.bumps {
            let v = b.value_grad(x, &mut gk);
            for i in 0..x.len() {
                g[i] = g[i] * (1.0 - v) - prod * gk[i];
            }
            prod *= 1.0 - v;
        }
        for i in 0..x.len() {
            grad[i] = -g[i];
        }
        1.0 - prod
    }

    /// Value, gradient and row-major Hessian.
    fn value_grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        if let [b] = self.bumps.as_slice() {
            return b.value_grad_hess(x, grad, hess);
        }
        let n = x.len();
        let mut gk = vec![0.0; n];
        let mut hk = vec![0.0; n * n];
        let factors = self.bumps.iter().map(|b| {
            let v = b.value_grad_hess(x, &mut gk, &mut hk);
            (1.0 - v, gk.iter().map(|g| -g).collect(), hk.iter().map(|h| -h).collect())
        });
        let q = product_rule(n, factors.collect::<Vec<_>>(), grad, hess);
        grad.iter_mut().for_each(|g| *g = -*g);
        hess.iter_mut().for_each(|h| *h = -*h);
        1.0 - q
    }

    fn may_be_nonzero(&self, x: &[f64]) -> bool {
        self.bumps.iter().any(|b| b.may_be_nonzero(x))
    }

    fn support_balls(&self) -> Vec<Ball> {
        self.bumps
            .iter()
            .map(|b| Ball::new(b.center.coords.clone(), b.r_out))
            .collect()
    }

    fn max_slope(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| SMOOTH_STEP_MAX_SLOPE / b.width())
            .sum()
    }

    fn max_curvature(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let w = b.width();
                SMOOTH_STEP_MAX_CURVATURE / (w * w) + SMOOTH_STEP_MAX_SLOPE / (w * b.r_in)
            })
            .sum()
    }
}

/// Product of `(value, gradient, Hessian)` factors with its gradient and Hessian.
fn product_rule(n: usize, factors: Vec<(f64, Vec<f64>, Vec<f64>)>, grad: &mut [f64], hess: &mut [f64]) -> f64 {
    let mut p = 1.0;
    grad.iter_mut().for_each(|g| *g = 0.0);
    hess.iter_mut().for_each(|h| *h = 0.0);
    for (v, gv, hv) in factors {
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = hess[i * n + j] * v
                    + grad[i] * gv[j]
                    + gv[i] * grad[j]
                    + p * hv[i * n + j];
            }
        }
        for i in 0..n {
            grad[i] = grad[i] * v + p * gv[i];
        }
        p *= v;
    }
    p
}

/// Affine function `z ↦ linear · z + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub linear: Vec<f64>,
    pub offset: f64,
}

impl Affine {
    pub fn new(linear: impl Into<Vec<f64>>, offset: f64) -> Self {
        Affine {
            linear: linear.into(),
            offset,
        }
    }

    /// `z ↦ coeffs · (z - center)`.
    pub fn centered(coeffs: &[f64], center: &[f64]) -> Self {
        let offset = -coeffs.iter().zip(center).map(|(a, c)| a * c).sum::<f64>();
        Affine::new(coeffs.to_vec(), offset)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.linear.iter().zip(z).map(|(a, v)| a * v).sum::<f64>() + self.offset
    }

    fn scaled(&self, c: f64) -> Affine {
        Affine::new(self.linear.iter().map(|a| a * c).collect::<Vec<_>>(), self.offset * c)
    }

    fn bound_on(&self, ball: &Ball) -> f64 {
        self.eval(&ball.center).abs() + norm(&self.linear) * ball.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionKind {
    /// `magnitude · χ · e_axis` on `pair` / `symplectic_pair` (axis is 0-based).
    CoordinateField { axis: usize, magnitude: f64 },
    /// The exact 1-form `d(χ · ℓ)` on `cotangent`.
    ExactForm { potential: Affine },
    /// The Hamiltonian field `ω♯ d(χ · ℓ)` on `symplectic_pair`.
    HamiltonianField { potential: Affine },
    /// Angular speed `magnitude · χ` in `so(2)` on `rotation_action`.
    AngularSpeed { magnitude: f64 },
}

/// A compactly supported algebroid section: `kind` times the product of
/// `cutoffs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    #[serde(flatten)]
    pub kind: SectionKind,
    pub cutoffs: Vec<Cutoff>,
}

impl Section {
    pub fn coordinate_field(axis: usize, bump: PlateauBump, magnitude: f64) -> Self {
        Section {
            kind: SectionKind::CoordinateField { axis, magnitude },
            cutoffs: vec![Cutoff::single(bump)],
        }
    }

    pub fn exact_form(bump: PlateauBump, potential: Affine) -> Self {
        Section {
            kind: SectionKind::ExactForm { potential },
            cutoffs: vec![Cutoff::single(bump)],
        }
    }

    pub fn hamiltonian_field(bump: PlateauBump, potential: Affine) -> Self {
        Section {
            kind: SectionKind::HamiltonianField { potential },
            cutoffs: vec![Cutoff::single(bump)],
        }
    }

    pub fn angular_speed(bump: PlateauBump, magnitude: f64) -> Self {
        Section {
            kind: SectionKind::AngularSpeed { magnitude },
            cutoffs: vec![Cutoff::single(bump)],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SectionKind::CoordinateField { .. } => "coordinate_field",
            SectionKind::ExactForm { .. } => "exact_form",
            SectionKind::HamiltonianField { .. } => "hamiltonian_field",
            SectionKind::AngularSpeed { .. } => "angular_speed",
        }
    }

    pub fn check_instance(&self, instance: &GroupoidInstance) -> Result<()> {
        let dim = instance.base_dim();
        let ok = match (&self.kind, instance) {
            (
                SectionKind::CoordinateField { axis, .. },
                GroupoidInstance::Pair { .. } | GroupoidInstance::SymplecticPair { .. },
            ) => *axis < dim,
            (SectionKind::ExactForm { potential }, GroupoidInstance::Cotangent { .. })
            | (SectionKind::HamiltonianField { potential }, GroupoidInstance::SymplecticPair { .. }) => {
                potential.linear.len() == dim
            }
            (SectionKind::AngularSpeed { .. }, GroupoidInstance::RotationAction) => true,
            _ => false,
        };
        let bumps_ok = !self.cutoffs.is_empty()
            && self.cutoffs.iter().all(|c| {
                !c.bumps.is_empty()
                    && c.bumps
                        .iter()
                        .all(|b| b.validate().is_ok() && b.center.dim() == dim)
            });
        if ok && bumps_ok {
            Ok(())
        } else {
            Err(Error::SectionInstanceMismatch {
                section: self.kind_name().into(),
                instance: instance.to_string(),
            })
        }
    }

    /// Product of all cutoffs and its gradient.
    fn cutoff_value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = x.len();
        if let [c] = self.cutoffs.as_slice() {
            return c.value_grad(x, grad);
        }
        let mut value = 1.0;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gk = vec![0.0; n];
        for c in &self.cutoffs {
            let v = c.value_grad(x, &mut gk);
            for i in 0..n {
                grad[i] = grad[i] * v + value * gk[i];
            }
            value *= v;
        }
        value
    }

    fn cutoff_value_grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        if let [c] = self.cutoffs.as_slice() {
            return c.value_grad_hess(x, grad, hess);
        }
        let n = x.len();
        let factors = self
            .cutoffs
            .iter()
            .map(|c| {
                let mut g = vec![0.0; n];
                let mut h = vec![0.0; n * n];
                let v = c.value_grad_hess(x, &mut g, &mut h);
                (v, g, h)
            })
            .collect();
        product_rule(n, factors, grad, hess)
    }

    pub fn cutoff_value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.cutoff_value_grad(x, &mut g)
    }

    /// False only where the section is guaranteed to vanish identically
    /// nearby (outside some cutoff's outer balls).
    pub fn may_act_at(&self, x: &[f64]) -> bool {
        self.cutoffs.iter().all(|c| c.may_be_nonzero(x))
    }

    /// Value at `x` as an element of the algebroid fiber, in fiber coordinates.
    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut out = vec![0.0; self.fiber_len(n)];
        let mut grad = vec![0.0; n];
        self.value_into(x, &mut out, &mut grad);
        out
    }

    fn fiber_len(&self, n: usize) -> usize {
        match self.kind {
            SectionKind::AngularSpeed { .. } => 1,
            _ => n,
        }
    }

    /// [`Section::value`] without allocation; `grad` is scratch of length `x.len()`.
    pub fn value_into(&self, x: &[f64], out: &mut [f64], grad: &mut [f64]) {
        let c = self.cutoff_value_grad(x, grad);
        match &self.kind {
            SectionKind::CoordinateField { axis, magnitude } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[*axis] = magnitude * c;
            }
            SectionKind::ExactForm { potential } => {
                exact_differential_into(potential, c, grad, x, out)
            }
            SectionKind::HamiltonianField { potential } => {
                // ω♯(a_q, a_p) = (a_p, -a_q), written in place
                let l = potential.eval(x);
                let m = x.len() / 2;
                let a = &potential.linear;
                for i in 0..m {
                    out[i] = l * grad[m + i] + c * a[m + i];
                    out[m + i] = -(l * grad[i] + c * a[i]);
                }
            }
            SectionKind::AngularSpeed { magnitude } => out[0] = magnitude * c,
        }
    }

    /// Value and row-major Jacobian of the vector field generated on the
    /// base of `pair` / `symplectic_pair`; `grad` and `hess` are scratch of
    /// lengths `n` and `n²`.
    pub fn field_jacobian_into(
        &self,
        x: &[f64],
        out: &mut [f64],
        jac: &mut [f64],
        grad: &mut [f64],
        hess: &mut [f64],
    ) -> Result<()> {
        let n = x.len();
        let c = self.cutoff_value_grad_hess(x, grad, hess);
        match &self.kind {
            SectionKind::CoordinateField { axis, magnitude } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                jac.iter_mut().for_each(|v| *v = 0.0);
                out[*axis] = magnitude * c;
                for j in 0..n {
                    jac[axis * n + j] = magnitude * grad[j];
                }
            }
            SectionKind::HamiltonianField { potential } => {
                // Hess(χℓ) = ℓ Hess χ + ∇χ aᵀ + a ∇χᵀ, then the rows of ω♯
                let l = potential.eval(x);
                let a = &potential.linear;
                let m = n / 2;
                for i in 0..m {
                    out[i] = l * grad[m + i] + c * a[m + i];
                    out[m + i] = -(l * grad[i] + c * a[i]);
                }
                let h = |i: usize, j: usize| l * hess[i * n + j] + grad[i] * a[j] + a[i] * grad[j];
                for i in 0..m {
                    for j in 0..n {
                        jac[i * n + j] = h(m + i, j);
                        jac[(m + i) * n + j] = -h(i, j);
                    }
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} does not generate a base flow",
                    self.kind_name()
                )))
            }
        }
        Ok(())
    }

    /// The section multiplied by a constant.
    pub fn scaled(&self, factor: f64) -> Section {
        let kind = match &self.kind {
            SectionKind::CoordinateField { axis, magnitude } => SectionKind::CoordinateField {
                axis: *axis,
                magnitude: magnitude * factor,
            },
            SectionKind::ExactForm { potential } => SectionKind::ExactForm {
                potential: potential.scaled(factor),
            },
            SectionKind::HamiltonianField { potential } => SectionKind::HamiltonianField {
                potential: potential.scaled(factor),
            },
            SectionKind::AngularSpeed { magnitude } => SectionKind::AngularSpeed {
                magnitude: magnitude * factor,
            },
        };
        Section {
            kind,
            cutoffs: self.cutoffs.clone(),
        }
    }

    /// A-priori support: outer balls of the cutoff with the smallest total radius.
    pub fn support_balls(&self) -> Vec<Ball> {
        self.cutoffs
            .iter()
            .map(|c| c.support_balls())
            .min_by(|a, b| {
                let ra: f64 = a.iter().map(|b| b.radius).sum();
                let rb: f64 = b.iter().map(|b| b.radius).sum();
                ra.total_cmp(&rb)
            })
            .unwrap_or_default()
    }

    fn narrowest_width(&self) -> f64 {
        self.cutoffs
            .iter()
            .flat_map(|c| c.bumps.iter().map(|b| b.width()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lipschitz estimate of the generated ODE (zero for fiberwise-linear kinds).
    pub fn lipschitz_estimate(&self) -> f64 {
        let slope: f64 = self.cutoffs.iter().map(|c| c.max_slope()).sum();
        let curvature: f64 = self.cutoffs.iter().map(|c| c.max_curvature()).sum();
        let support = self.support_balls();
        match &self.kind {
            SectionKind::CoordinateField { magnitude, .. } => magnitude.abs() * slope,
            SectionKind::ExactForm { .. } => 0.0,
            SectionKind::HamiltonianField { potential } => {
                let lbound = support
                    .iter()
                    .map(|b| potential.bound_on(b))
                    .fold(0.0, f64::max);
                lbound * curvature + 2.0 * norm(&potential.linear) * slope
            }
            SectionKind::AngularSpeed { magnitude } => {
                let rmax = support
                    .iter()
                    .map(|b| norm(&b.center) + b.radius)
                    .fold(0.0, f64::max);
                magnitude.abs() * slope * rmax
            }
        }
    }

    /// RK4 step count used for a primitive flowing this section for `time`.
    pub fn suggested_steps(&self, time: f64) -> usize {
        let l = self.lipschitz_estimate();
        if l == 0.0 || time == 0.0 {
            return 1;
        }
        let raw = (time.abs() * l / STEP_LIPSCHITZ_BUDGET).ceil();
        (raw as usize).clamp(2, MAX_RK4_STEPS)
    }

    pub fn narrowest_bump_width(&self) -> f64 {
        self.narrowest_width()
    }
}

/// `d(χ ℓ) = ℓ ∇χ + χ ∇ℓ`.
fn exact_differential_into(potential: &Affine, chi: f64, grad_chi: &[f64], x: &[f64], out: &mut [f64]) {
    let l = potential.eval(x);
    for ((o, g), a) in out.iter_mut().zip(grad_chi).zip(&potential.linear) {
        *o = l * g + chi * a;
    }
}

/// `ω♯` for `ω = Σ dq_i ∧ dp_i` with coordinates ordered `(q_1..q_m, p_1..p_m)`
/// and `ω♭(v) = ω(v, ·)`: the covector `(a_q, a_p)` maps to `(a_p, -a_q)`.
pub fn omega_sharp(covector: &[f64]) -> Vec<f64> {
    let m = covector.len() / 2;
    let mut v = vec![0.0; covector.len()];
    for i in 0..m {
        v[i] = covector[m + i];
        v[m + i] = -covector[i];
    }
    v
}

/// The single-primitive bisection `exp(t X)`.
pub fn exp_section(instance: GroupoidInstance, section: &Section, t: f64) -> Result<Bisection> {
    section.check_instance(&instance)?;
    let mut b = Bisection::identity(instance);
    if t != 0.0 {
        b.chain.push(Primitive::new(section.clone(), t));
    }
    Ok(b)
}

/// Scalar polynomial profile `c(t) = Σ coeffs[k] t^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    pub coeffs: Vec<f64>,
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile { coeffs: vec![c] }
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Profile {
            coeffs: vec![c0, c1],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTerm {
    pub section: Section,
    pub profile: Profile,
}

/// Time-dependent section `X_t = Σ c_k(t) S_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionPath {
    pub terms: Vec<PathTerm>,
}

impl SectionPath {
    pub fn zero() -> Self {
        SectionPath { terms: Vec::new() }
    }

    pub fn constant(section: Section) -> Self {
        SectionPath {
            terms: vec![PathTerm {
                section,
                profile: Profile::constant(1.0),
            }],
        }
    }

    pub fn with_term(mut self, section: Section, profile: Profile) -> Self {
        self.terms.push(PathTerm { section, profile });
        self
    }

    /// `X_t(x)` in fiber coordinates.
    pub fn value(&self, instance: &GroupoidInstance, t: f64, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; instance.fiber_dim()];
        for term in &self.terms {
            let c = term.profile.eval(t);
            for (a, b) in v.iter_mut().zip(term.section.value(x)) {
                *a += c * b;
            }
        }
        v
    }
}

/// Bisection isotopy generated by a section path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Isotopy {
    pub instance: GroupoidInstance,
    pub generator: SectionPath,
    pub horizon: f64,
    pub steps: usize,
    rk4_steps: Vec<usize>,
}

impl Isotopy {
    pub fn step_length(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `σ_t` as a chain: midpoint-sampled exponentials over the full
    /// sub-intervals before `t`, then one partial sub-interval.
    pub fn at(&self, t: f64) -> Bisection {
        let mut b = Bisection::identity(self.instance);
        if self.horizon == 0.0 || t <= 0.0 {
            return b;
        }
        let t = t.min(self.horizon);
        let h = self.step_length();
        let full = ((t / h).floor() as usize).min(self.steps);
        let mut push_interval = |start: f64, len: f64| {
            let mid = start + 0.5 * len;
            for (term, &steps) in self.generator.terms.iter().zip(&self.rk4_steps) {
                let time = term.profile.eval(mid) * len;
                if time != 0.0 {
                    b.chain.push(Primitive::with_steps(term.section.clone(), time, steps));
                }
            }
        };
        for k in 0..full {
            push_interval(k as f64 * h, h);
        }
        let rest = t - full as f64 * h;
        if rest > 0.0 && full < self.steps {
            push_interval(full as f64 * h, rest);
        }
        b
    }

    pub fn endpoint(&self) -> Bisection {
        self.at(self.horizon)
    }
}

/// Product-integral discretization of the evolution operator.
pub fn evolve(
    instance: GroupoidInstance,
    path: &SectionPath,
    horizon: f64,
    steps: usize,
) -> Result<Isotopy> {
    if steps == 0 {
        return Err(Error::InvalidArgument("evolve needs at least one step".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be finite and non-negative".into()));
    }
    for term in &path.terms {
        term.section.check_instance(&instance)?;
    }
    let h = horizon / steps as f64;
    let rk4_steps = path
        .terms
        .iter()
        .map(|term| {
            let cmax = (0..=64)
                .map(|k| term.profile.eval(horizon * k as f64 / 64.0).abs())
                .fold(0.0, f64::max);
            term.section.suggested_steps(cmax * h)
        })
        .collect();
    Ok(Isotopy {
        instance,
        generator: path.clone(),
        horizon,
        steps,
        rk4_steps,
    })
}

/// Recovers `X_t(x)` from the isotopy by inverting `β∘σ_t`, differentiating
/// `s ↦ σ_s(y)` at `s = t` and right-translating back to the unit fiber.
pub fn logarithmic_velocity(iso: &Isotopy, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let sigma_t = iso.at(t);
    let y = sigma_t.beta_map().invert(x)?;
    let ds = 1e-6 * iso.horizon.max(1.0);
    let (lo, hi) = if t - ds < 0.0 {
        (t, t + ds)
    } else if t + ds > iso.horizon {
        (t - ds, t)
    } else {
        (t - ds, t + ds)
    };
    let a = iso.at(lo).eval(&y)?;
    let b = iso.at(hi).eval(&y)?;
    // right translation by σ_t(y) is the identity in fiber coordinates for
    // every built-in instance: pair target slot, covector, angle
    Ok(b
        .fiber_coords()
        .iter()
        .zip(a.fiber_coords())
        .map(|(p, q)| (p - q) / (hi - lo))
        .collect())
}

/// Plateau cutoff equal to 1 on `u` and vanishing outside `v`.
pub fn localizing_cutoff(u: &Region, v: &Region) -> Result<Cutoff> {
    let (Region::Balls { balls: ub }, Region::Balls { balls: vb }) = (u, v) else {
        return Err(Error::Localization("U and V must be unions of balls".into()));
    };
    let mut bumps = Vec::with_capacity(ub.len());
    for ball in ub {
        let host = vb
            .iter()
            .filter(|vball| dist(&ball.center, &vball.center) + ball.radius < vball.radius)
            .min_by(|a, b| a.radius.total_cmp(&b.radius))
            .ok_or_else(|| {
                Error::Localization(format!(
                    "ball at {:?} with radius {} is not inside any ball of V",
                    ball.center, ball.radius
                ))
            })?;
        let r_in = dist(&ball.center, &host.center) + ball.radius;
        bumps.push(PlateauBump::new(
            Point::euclidean(host.center.clone()),
            r_in,
            host.radius,
        )?);
    }
    if bumps.is_empty() {
        return Err(Error::Localization("U is empty".into()));
    }
    Ok(Cutoff { bumps })
}

/// Cuts a section path off so that it agrees with `path` on `u` and
/// vanishes outside `v`. Potentials are cut off (not their differentials),
/// so exact forms and Hamiltonian fields keep their type.
pub fn localize(path: &SectionPath, u: &Region, v: &Region) -> Result<SectionPath> {
    if v.is_whole() {
        return Ok(path.clone());
    }
    let cutoff = localizing_cutoff(u, v)?;
    Ok(SectionPath {
        terms: path
            .terms
            .iter()
            .map(|t| {
                let mut section = t.section.clone();
                section.cutoffs.push(cutoff.clone());
                PathTerm {
                    section,
                    profile: t.profile.clone(),
                }
            })
            .collect(),
    })
}

/// Which generators a bisection group provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorFamily {
    /// All compactly supported sections.
    #[default]
    General,
    /// Hamiltonian / closed-form sections only (Lagrangian bisections).
    Symplectic,
}

/// `k = fiber_dim` sections supported in the ball `(x, radius)` whose values
/// at `x` form a basis of the algebroid fiber.
pub fn fiber_basis(
    instance: &GroupoidInstance,
    x: &[f64],
    radius: f64,
    family: GeneratorFamily,
) -> Result<Vec<Section>> {
    instance.check_point(x)?;
    let bump = PlateauBump::new(Point::euclidean(x.to_vec()), 0.5 * radius, radius)?;
    let d = instance.base_dim();
    let unit = |j: usize| {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        e
    };
    let sections: Vec<Section> = match (instance, family) {
        (GroupoidInstance::Pair { .. }, _)
        | (GroupoidInstance::SymplecticPair { .. }, GeneratorFamily::General) => (0..d)
            .map(|j| Section::coordinate_field(j, bump.clone(), 1.0))
            .collect(),
        (GroupoidInstance::SymplecticPair { .. }, GeneratorFamily::Symplectic) => {
            // ω♯ d(χ p_j) = χ e_{q_j} and ω♯ d(-χ q_j) = χ e_{p_j} near x
            let m = d / 2;
            (0..d)
                .map(|j| {
                    let mut coeffs = vec![0.0; d];
                    if j < m {
                        coeffs[m + j] = 1.0;
                    } else {
                        coeffs[j - m] = -1.0;
                    }
                    Section::hamiltonian_field(bump.clone(), Affine::centered(&coeffs, x))
                })
                .collect()
        }
        (GroupoidInstance::Cotangent { .. }, _) => (0..d)
            .map(|j| Section::exact_form(bump.clone(), Affine::centered(&unit(j), x)))
            .collect(),
        (GroupoidInstance::RotationAction, _) => vec![Section::angular_speed(bump, 1.0)],
    };
    let k = sections.len();
    let values = nalgebra::DMatrix::from_fn(k, k, |i, j| sections[j].value(x)[i]);
    let det = values.determinant().abs();
    if det < DELTA_INDEP {
        return Err(Error::SingularJacobian {
            condition: 1.0 / det,
        });
    }
    Ok(sections)
}

/// Matrix whose columns are the section values at `x`.
pub fn basis_values(sections: &[Section], x: &[f64]) -> nalgebra::DMatrix<f64> {
    let k = sections.len();
    let rows = sections.first().map_or(0, |s| s.value(x).len());
    nalgebra::DMatrix::from_fn(rows, k, |i, j| sections[j].value(x)[i])
}
