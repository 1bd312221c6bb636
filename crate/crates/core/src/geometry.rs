//! Chart-level numerics shared by every groupoid instance.
//!
//! Points live in a single global chart (Euclidean `R^d` or the flat torus
//! `R^d / 2πZ^d`). The kernel provides plateau bumps, a fixed-step RK4
//! integrator, central-difference Jacobians and a damped Newton solver.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default finite-difference step for [`fd_jacobian`].
pub const FD_STEP: f64 = 1e-5;

/// Largest number of step halvings tried by one damped Newton iteration.
pub const MAX_HALVINGS: usize = 30;

/// Ratio `σ_min / σ_max` below which a Jacobian is treated as singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Euclidean,
    Torus,
}

/// A point of the unit space `M` in global chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub chart: Chart,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn euclidean(coords: impl Into<Vec<f64>>) -> Self {
        Point {
            chart: Chart::Euclidean,
            coords: coords.into(),
        }
    }

    /// Torus point; coordinates are reduced into `[0, 2π)`.
    pub fn torus(coords: impl Into<Vec<f64>>) -> Self {
        let mut p = Point {
            chart: Chart::Torus,
            coords: coords.into(),
        };
        p.reduce();
        p
    }

    pub fn origin(dim: usize) -> Self {
        Point::euclidean(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    fn reduce(&mut self) {
        if self.chart == Chart::Torus {
            for c in &mut self.coords {
                *c = c.rem_euclid(TAU);
                // rem_euclid can round up to exactly TAU
                if *c >= TAU {
                    *c = 0.0;
                }
            }
        }
    }

    /// Chart displacement `other - self`, wrapped to `(-π, π]` on the torus.
    pub fn delta_to(&self, other: &Point) -> Result<Vec<f64>> {
        self.check_chart(other)?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| match self.chart {
                Chart::Euclidean => b - a,
                Chart::Torus => wrap_angle(b - a),
            })
            .collect())
    }

    pub fn distance(&self, other: &Point) -> Result<f64> {
        Ok(norm(&self.delta_to(other)?))
    }

    /// Moves the point by `v` (and re-reduces on the torus).
    pub fn translated(&self, v: &[f64]) -> Point {
        let mut p = Point {
            chart: self.chart,
            coords: self.coords.iter().zip(v).map(|(a, b)| a + b).collect(),
        };
        p.reduce();
        p
    }

    pub fn with_coords(&self, coords: Vec<f64>) -> Point {
        let mut p = Point {
            chart: self.chart,
            coords,
        };
        p.reduce();
        p
    }

    pub fn check_chart(&self, other: &Point) -> Result<()> {
        if self.chart != other.chart || self.dim() != other.dim() {
            return Err(Error::ChartMismatch {
                expected: format!("{:?}({})", self.chart, self.dim()),
                found: format!("{:?}({})", other.chart, other.dim()),
            });
        }
        Ok(())
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r + TAU
    } else {
        r
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn glue(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn glue_prime(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp() / (t * t)
    } else {
        0.0
    }
}

/// Smooth step `s(t) / (s(t) + s(1 - t))`: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = glue(t);
        let b = glue(1.0 - t);
        a / (a + b)
    }
}

pub fn smooth_step_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = glue(t);
        let b = glue(1.0 - t);
        let da = glue_prime(t);
        let db = -glue_prime(1.0 - t);
        (da * b - a * db) / ((a + b) * (a + b))
    }
}

pub fn smooth_step_second(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - t;
    let (a, b) = (glue(t), glue(u));
    let (da, db) = (glue_prime(t), -glue_prime(u));
    let dda = a * (1.0 / t.powi(4) - 2.0 / t.powi(3));
    let ddb = b * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    let sum = a + b;
    let num = da * b - a * db;
    ((dda * b - a * ddb) * sum - 2.0 * num * (da + db)) / sum.powi(3)
}

/// Supremum of `smooth_step'`, attained at `t = 1/2`.
pub const SMOOTH_STEP_MAX_SLOPE: f64 = 2.0;

/// C∞ radial cutoff: identically 1 on the closed inner ball, identically 0
/// outside the open outer ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauBump {
    pub center: Point,
    pub r_in: f64,
    pub r_out: f64,
}

impl PlateauBump {
    pub fn new(center: Point, r_in: f64, r_out: f64) -> Result<Self> {
        let b = PlateauBump {
            center,
            r_in,
            r_out,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_in > 0.0 && self.r_in < self.r_out && self.r_out.is_finite()) {
            return Err(Error::InvalidBump {
                r_in: self.r_in,
                r_out: self.r_out,
            });
        }
        if !self.center.is_finite() {
            return Err(Error::NonFinite("bump center".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.r_out - self.r_in
    }

    /// Value at `x`; [`bump_eval`] is the checked variant.
    pub fn value(&self, x: &[f64]) -> f64 {
        let r = self.radius_of(x);
        if r <= self.r_in {
            1.0
        } else if r >= self.r_out {
            0.0
        } else {
            smooth_step((self.r_out - r) / self.width())
        }
    }

    /// Value and gradient at `x` (chart coordinates).
    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let torus = self.center.chart == Chart::Torus;
        let component = |a: f64, c: f64| if torus { wrap_angle(a - c) } else { a - c };
        let r = x
            .iter()
            .zip(&self.center.coords)
            .map(|(&a, &c)| component(a, c).powi(2))
            .sum::<f64>()
            .sqrt();
        grad.iter_mut().for_each(|g| *g = 0.0);
        if r <= self.r_in {
            return 1.0;
        }
        if r >= self.r_out {
            return 0.0;
        }
        let w = self.width();
        let s = (self.r_out - r) / w;
        let slope = -smooth_step_prime(s) / (w * r);
        for ((g, &a), &c) in grad.iter_mut().zip(x).zip(&self.center.coords) {
            *g = slope * component(a, c);
        }
        smooth_step(s)
    }

    /// Value, gradient and row-major Hessian (`hess.len() == n²`).
    pub fn value_grad_hess(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let n = x.len();
        let v = self.value_grad(x, grad);
        hess.iter_mut().for_each(|h| *h = 0.0);
        let delta = self.offset(x);
        let r = norm(&delta);
        if r <= self.r_in || r >= self.r_out {
            return v;
        }
        let w = self.width();
        let s = (self.r_out - r) / w;
        let d1 = -smooth_step_prime(s) / w;
        let d2 = smooth_step_second(s) / (w * w);
        for i in 0..n {
            for j in 0..n {
                let radial = delta[i] * delta[j] / (r * r);
                let eye = if i == j { 1.0 } else { 0.0 };
                hess[i * n + j] = d2 * radial + d1 / r * (eye - radial);
            }
        }
        v
    }

    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center.coords)
            .map(|(a, c)| match self.center.chart {
                Chart::Euclidean => a - c,
                Chart::Torus => wrap_angle(a - c),
            })
            .collect()
    }

    fn radius_of(&self, x: &[f64]) -> f64 {
        match self.center.chart {
            Chart::Euclidean => dist(x, &self.center.coords),
            Chart::Torus => norm(&self.offset(x)),
        }
    }

    /// True when `x` lies in the open outer ball (where the bump may be nonzero).
    pub fn may_be_nonzero(&self, x: &[f64]) -> bool {
        self.radius_of(x) < self.r_out
    }
}

/// Evaluates a plateau bump at a point of the same chart.
pub fn bump_eval(b: &PlateauBump, x: &Point) -> Result<f64> {
    b.center.check_chart(x)?;
    Ok(b.value(&x.coords))
}

/// Classical fixed-step RK4 on a flat state vector, in place.
///
/// `field(t, y, out)` writes the velocity at `(t, y)` into `out`.
pub fn rk4_integrate<F>(mut field: F, state: &mut [f64], t0: f64, t_final: f64, steps: usize) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if steps == 0 {
        return Err(Error::InvalidArgument("rk4 needs at least one step".into()));
    }
    let n = state.len();
    let h = (t_final - t0) / steps as f64;
    if h == 0.0 {
        return Ok(());
    }
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        field(t, state, &mut k1);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        field(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        field(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = state[i] + h * k3[i];
        }
        field(t + h, &tmp, &mut k4);
        for i in 0..n {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("rk4 state at step {s}")));
        }
    }
    Ok(())
}

/// Flows `x0` along a time-dependent vector field from `t = 0` to `t_final`.
pub fn rk4_flow<F>(field: F, x0: &Point, t_final: f64, steps: usize) -> Result<Point>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut state = x0.coords.clone();
    rk4_integrate(field, &mut state, 0.0, t_final, steps)?;
    Ok(x0.with_coords(state))
}

/// Central-difference Jacobian of `map` at `t0`.
pub fn fd_jacobian<F>(map: F, t0: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let n = t0.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut probe = t0.to_vec();
    for j in 0..n {
        probe[j] = t0[j] + h;
        let plus = map(&probe)?;
        probe[j] = t0[j] - h;
        let minus = map(&probe)?;
        probe[j] = t0[j];
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect(),
        );
    }
    let m = cols.first().map_or_else(|| map(t0).map(|v| v.len()), |c| Ok(c.len()))?;
    Ok(DMatrix::from_fn(m, n, |i, j| cols[j][i]))
}

/// Richardson-extrapolated central differences, `(4 J(h/2) - J(h)) / 3`,
/// with truncation error `O(h^4)`.
pub fn fd_jacobian_richardson<F>(map: F, t0: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let coarse = fd_jacobian(&map, t0, h)?;
    let fine = fd_jacobian(&map, t0, 0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub solution: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton iteration for `map(t) = target` with FD Jacobians.
///
/// Each step halves its length (at most [`MAX_HALVINGS`] times) until the
/// residual norm decreases.
pub fn newton_solve<F>(
    map: F,
    target: &[f64],
    t0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("newton tolerance must be positive".into()));
    }
    let resid = |t: &[f64]| -> Result<Vec<f64>> {
        let v = map(t)?;
        if v.len() != target.len() {
            return Err(Error::InvalidArgument(format!(
                "map returned {} values, target has {}",
                v.len(),
                target.len()
            )));
        }
        Ok(v.iter().zip(target).map(|(a, b)| a - b).collect())
    };
    let mut t = t0.to_vec();
    let mut r = resid(&t)?;
    let mut rn = norm(&r);
    for iter in 0..=max_iter {
        if !rn.is_finite() {
            return Err(Error::NonFinite("newton residual".into()));
        }
        if rn <= tol {
            return Ok(NewtonOutcome {
                solution: t,
                residual: rn,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }
        let jac = fd_jacobian(&map, &t, FD_STEP)?;
        let sv = jac.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smax > 0.0) || smin <= SINGULAR_RATIO * smax {
            return Err(Error::SingularJacobian {
                condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
            });
        }
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularJacobian {
                condition: f64::INFINITY,
            })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = t.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok(tr) = resid(&trial) {
                let trn = norm(&tr);
                if trn < rn {
                    t = trial;
                    r = tr;
                    rn = trn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                residual: rn,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn smooth_step_second_matches_difference_quotient() {
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            let h = 1e-5;
            let fd = (smooth_step_prime(t + h) - smooth_step_prime(t - h)) / (2.0 * h);
            assert!((smooth_step_second(t) - fd).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn bump_hessian_matches_gradient_differences() {
        let b = PlateauBump::new(Point::euclidean(vec![0.2, -0.1]), 0.3, 0.9).unwrap();
        let x = [0.6, 0.25];
        let mut g = [0.0; 2];
        let mut hess = [0.0; 4];
        b.value_grad_hess(&x, &mut g, &mut hess);
        let h = 1e-6;
        for j in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (mut gp, mut gm) = ([0.0; 2], [0.0; 2]);
            b.value_grad(&xp, &mut gp);
            b.value_grad(&xm, &mut gm);
            for i in 0..2 {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((hess[i * 2 + j] - fd).abs() < 1e-6);
            }
        }
    }

    fn unit_bump() -> PlateauBump {
        PlateauBump::new(Point::origin(2), 0.5, 1.0).unwrap()
    }

    #[test]
    fn bump_plateau_and_exterior() {
        let b = unit_bump();
        assert_eq!(bump_eval(&b, &Point::origin(2)).unwrap(), 1.0);
        assert_eq!(bump_eval(&b, &Point::euclidean(vec![2.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn bump_transition_values() {
        let b = unit_bump();
        // midpoint of the glue is 1/2 by the s(t) <-> s(1-t) symmetry
        let v = bump_eval(&b, &Point::euclidean(vec![0.75, 0.0])).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        // r = 0.6: t = 0.8, value = e^{-1.25} / (e^{-1.25} + e^{-5})
        let expected = (-1.25f64).exp() / ((-1.25f64).exp() + (-5.0f64).exp());
        let v = bump_eval(&b, &Point::euclidean(vec![0.0, 0.6])).unwrap();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.977_022_630_089_974_4).abs() < 1e-12);
    }

    #[test]
    fn bump_rejects_bad_radii_and_charts() {
        assert!(PlateauBump::new(Point::origin(2), 1.0, 0.5).is_err());
        assert!(PlateauBump::new(Point::origin(2), 0.0, 0.5).is_err());
        let b = unit_bump();
        assert!(matches!(
            bump_eval(&b, &Point::torus(vec![0.0, 0.0])),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let b = PlateauBump::new(Point::euclidean(vec![0.3, -0.2]), 0.4, 1.1).unwrap();
        let x = [0.9, 0.1];
        let mut g = [0.0; 2];
        b.value_grad(&x, &mut g);
        let h = 1e-6;
        for k in 0..2 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            let fd = (b.value(&p) - b.value(&m)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "{fd} vs {}", g[k]);
        }
    }

    #[test]
    fn torus_bump_wraps() {
        let b = PlateauBump::new(Point::torus(vec![0.1, 0.0]), 0.3, 0.6).unwrap();
        assert_eq!(b.value(&[TAU - 0.1, 0.0]), 1.0);
        let p = Point::torus(vec![-0.5, 7.0]);
        assert!(p.coords.iter().all(|c| (0.0..TAU).contains(c)));
    }

    #[test]
    fn rk4_zero_and_constant_fields() {
        let x0 = Point::euclidean(vec![0.3, -1.2]);
        let y = rk4_flow(|_, _, out: &mut [f64]| out.fill(0.0), &x0, 1.0, 10).unwrap();
        assert_eq!(y, x0);
        let y = rk4_flow(
            |_, _, out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = 0.0;
            },
            &Point::origin(2),
            1.0,
            7,
        )
        .unwrap();
        assert!((y.coords[0] - 1.0).abs() < 1e-12 && y.coords[1].abs() < 1e-12);
    }

    fn rotation_field(_: f64, y: &[f64], out: &mut [f64]) {
        out[0] = -y[1];
        out[1] = y[0];
    }

    #[test]
    fn rk4_linear_rotation() {
        let y = rk4_flow(rotation_field, &Point::euclidean(vec![1.0, 0.0]), FRAC_PI_2, 1000).unwrap();
        // closed form: e^{At} x0 = (cos t, sin t)
        assert!(y.coords[0].abs() < 1e-9);
        assert!((y.coords[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rk4_fourth_order_ratio() {
        let exact = [(2.0f64).cos(), (2.0f64).sin()];
        let err = |steps| {
            let y = rk4_flow(rotation_field, &Point::euclidean(vec![1.0, 0.0]), 2.0, steps).unwrap();
            dist(&y.coords, &exact)
        };
        let ratio = err(20) / err(40);
        assert!((16.0 * 0.7..=16.0 * 1.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_reports_blow_up() {
        let r = rk4_flow(
            |_, y: &[f64], out: &mut [f64]| out[0] = y[0] * y[0] * 1e300,
            &Point::euclidean(vec![1.0]),
            1.0,
            4,
        );
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn jacobian_examples() {
        let j = fd_jacobian(|t| Ok(t.to_vec()), &[0.4, -2.0, 1.0], FD_STEP).unwrap();
        assert!((j - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);

        let j = fd_jacobian(|t| Ok(vec![t[0] * t[0], t[0] * t[1]]), &[1.0, 1.0], FD_STEP).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        assert!((j - expected).amax() < 1e-6);

        let b = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 4.0]);
        let bc = b.clone();
        let affine = move |t: &[f64]| {
            let v = &bc * DVector::from_row_slice(t);
            Ok(vec![v[0] + 1.0, v[1] - 3.0])
        };
        let j = fd_jacobian(affine, &[0.2, 0.1, -0.7], FD_STEP).unwrap();
        assert!((j - b).amax() < 1e-9);
    }

    #[test]
    fn richardson_cancels_the_leading_error() {
        let map = |t: &[f64]| Ok(vec![t[0].sin() * t[1].exp()]);
        let x = [0.7, 0.3];
        let exact = [0.7f64.cos() * 0.3f64.exp(), 0.7f64.sin() * 0.3f64.exp()];
        let plain = fd_jacobian(map, &x, 1e-2).unwrap();
        let rich = fd_jacobian_richardson(map, &x, 1e-2).unwrap();
        for k in 0..2 {
            assert!((plain[(0, k)] - exact[k]).abs() > 1e-6);
            assert!((rich[(0, k)] - exact[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn newton_examples() {
        let out = newton_solve(|t| Ok(t.to_vec()), &[3.0, -1.0], &[0.0, 0.0], 1e-12, 5).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(dist(&out.solution, &[3.0, -1.0]) < 1e-12);

        // bisection oracle for t^3 + t = 2 on [0, 2]
        let f = |t: f64| t * t * t + t - 2.0;
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let out = newton_solve(|t| Ok(vec![t[0].powi(3) + t[0]]), &[2.0], &[0.0], 1e-10, 50).unwrap();
        assert!((out.solution[0] - lo).abs() < 1e-9);
        assert!(out.residual <= 1e-10);

        let r = newton_solve(|t| Ok(vec![t[0] * t[0]]), &[-1.0], &[0.0], 1e-10, 50);
        assert!(matches!(
            r,
            Err(Error::SingularJacobian { .. }) | Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn newton_reported_residual_is_honest() {
        let map = |t: &[f64]| Ok(vec![t[0].sin() + t[1], t[1].powi(3) - t[0]]);
        let target = [0.3, 0.1];
        let out = newton_solve(map, &target, &[0.0, 0.0], 1e-11, 50).unwrap();
        let v = map(&out.solution).unwrap();
        let r = dist(&v, &target);
        assert!((r - out.residual).abs() < 1e-15 && r <= 1e-11);
    }
}
