//! Parametrized maps `F(λ, x)` on `R^N` (or a cylinder), their Jacobians, and the
//! built-in example families.

mod builtin;
pub mod ode;
pub mod perturbation;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub use builtin::{builtin_map, builtin_names, modified_logistic_h};

pub type State = DVector<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianKind {
    Analytic,
    FiniteDifference,
    Variational,
}

/// Geometry of phase space. On a cylinder the coordinate `angle` is taken mod 2π
/// whenever points are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseSpace {
    Euclidean,
    Cylinder { angle: usize },
}

pub fn wrap_angle(t: f64) -> f64 {
    let r = (t + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

impl PhaseSpace {
    /// `a - b`, with the angle coordinate reduced into (-π, π].
    pub fn difference(&self, a: &State, b: &State) -> State {
        let mut d = a - b;
        if let PhaseSpace::Cylinder { angle } = *self {
            d[angle] = wrap_angle(d[angle]);
        }
        d
    }

    pub fn distance(&self, a: &State, b: &State) -> f64 {
        self.difference(a, b).norm()
    }

    /// Representative used for canonical ordering of orbit points.
    pub fn reduce(&self, a: &State) -> State {
        let mut r = a.clone();
        if let PhaseSpace::Cylinder { angle } = *self {
            r[angle] = r[angle].rem_euclid(2.0 * PI);
        }
        r
    }
}

/// Value, spatial Jacobian and λ-derivative of one application of the map.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub value: State,
    pub jacobian: DMatrix<f64>,
    pub dlambda: State,
}

/// Behaviour of a map family. Only `eval` is mandatory; the remaining methods
/// default to central finite differences.
pub trait MapKernel: Send + Sync {
    fn eval(&self, lambda: f64, x: &State) -> Result<State>;

    fn jacobian(&self, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        fd_jacobian(|y| self.eval(lambda, y), x)
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        let value = self.eval(lambda, x)?;
        let jacobian = self.jacobian(lambda, x)?;
        let dlambda = fd_lambda(|l| self.eval(l, x), lambda)?;
        Ok(Linearization { value, jacobian, dlambda })
    }
}

pub fn fd_step(v: f64) -> f64 {
    f64::max(1e-6, 1e-6 * v.abs())
}

/// Central-difference Jacobian with step `max(1e-6, 1e-6 |x_i|)`.
pub fn fd_jacobian<F>(f: F, x: &State) -> Result<DMatrix<f64>>
where
    F: Fn(&State) -> Result<State>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let h = fd_step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fp = f(&xp)?;
        let fm = f(&xm)?;
        cols.push((fp - fm) / (2.0 * h));
    }
    let m = cols.first().map_or(n, |c| c.len());
    Ok(DMatrix::from_fn(m, n, |r, c| cols[c][r]))
}

pub fn fd_lambda<F>(f: F, lambda: f64) -> Result<State>
where
    F: Fn(f64) -> Result<State>,
{
    let h = fd_step(lambda);
    let fp = f(lambda + h)?;
    let fm = f(lambda - h)?;
    Ok((fp - fm) / (2.0 * h))
}

struct FnKernel<F>(F);

impl<F> MapKernel for FnKernel<F>
where
    F: Fn(f64, &State) -> State + Send + Sync,
{
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        Ok((self.0)(lambda, x))
    }
}

/// A parametrized map with its metadata. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct MapDefinition {
    pub name: String,
    pub dimension: usize,
    pub jacobian_kind: JacobianKind,
    pub param_hint: Option<(f64, f64)>,
    pub phase_space: PhaseSpace,
    /// Box used by sampled checks and multi-start searches.
    pub spatial_box: Option<(Vec<f64>, Vec<f64>)>,
    pub params: BTreeMap<String, f64>,
    kernel: Arc<dyn MapKernel>,
}

impl fmt::Debug for MapDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapDefinition")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("jacobian_kind", &self.jacobian_kind)
            .field("params", &self.params)
            .finish()
    }
}

impl MapDefinition {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        jacobian_kind: JacobianKind,
        kernel: Arc<dyn MapKernel>,
    ) -> Self {
        Self {
            name: name.into(),
            dimension,
            jacobian_kind,
            param_hint: None,
            phase_space: PhaseSpace::Euclidean,
            spatial_box: None,
            params: BTreeMap::new(),
            kernel,
        }
    }

    /// Map given only by its evaluation; derivatives use finite differences.
    pub fn from_fn<F>(name: impl Into<String>, dimension: usize, f: F) -> Self
    where
        F: Fn(f64, &State) -> State + Send + Sync + 'static,
    {
        Self::new(name, dimension, JacobianKind::FiniteDifference, Arc::new(FnKernel(f)))
    }

    pub fn with_param_hint(mut self, lo: f64, hi: f64) -> Self {
        self.param_hint = Some((lo, hi));
        self
    }

    pub fn with_phase_space(mut self, phase_space: PhaseSpace) -> Self {
        self.phase_space = phase_space;
        self
    }

    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.spatial_box = Some((lo, hi));
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    fn check_input(&self, lambda: f64, x: &State) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::BadParameter(format!(
                "{} expects dimension {}, got {}",
                self.name,
                self.dimension,
                x.len()
            )));
        }
        if !lambda.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParameter("non-finite input".into()));
        }
        Ok(())
    }

    pub fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        self.check_input(lambda, x)?;
        let y = self.kernel.eval(lambda, x)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow(self.name.clone()));
        }
        Ok(y)
    }

    pub fn jacobian(&self, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        self.check_input(lambda, x)?;
        let j = match self.jacobian_kind {
            JacobianKind::FiniteDifference => fd_jacobian(|y| self.kernel.eval(lambda, y), x)?,
            _ => self.kernel.jacobian(lambda, x)?,
        };
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow(format!("{} jacobian", self.name)));
        }
        Ok(j)
    }

    pub fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        self.check_input(lambda, x)?;
        let lin = self.kernel.linearize(lambda, x)?;
        let finite = lin.value.iter().chain(lin.jacobian.iter()).chain(lin.dlambda.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow(self.name.clone()));
        }
        Ok(lin)
    }

    /// `p`-fold iterate without derivatives.
    pub fn iterate(&self, lambda: f64, x: &State, p: usize) -> Result<State> {
        let mut y = x.clone();
        for _ in 0..p {
            y = self.eval(lambda, &y)?;
        }
        Ok(y)
    }
}

/// `F(λ, x)`.
pub fn eval_map(map: &MapDefinition, lambda: f64, x: &State) -> Result<State> {
    map.eval(lambda, x)
}

/// `D_x F(λ, x)`.
pub fn eval_jacobian(map: &MapDefinition, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
    map.jacobian(lambda, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for t in [-10.0, -PI, 0.0, PI, 3.0 * PI, 7.5] {
            let w = wrap_angle(t);
            assert!(w > -PI - 1e-15 && w <= PI + 1e-15);
            assert!(((t - w) / (2.0 * PI)).fract().abs() < 1e-12 || ((t - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn cylinder_distance_wraps() {
        let ps = PhaseSpace::Cylinder { angle: 0 };
        let a = DVector::from_vec(vec![0.1, 0.0]);
        let b = DVector::from_vec(vec![2.0 * PI - 0.1, 0.0]);
        assert!((ps.distance(&a, &b) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn from_fn_uses_finite_differences() {
        let m = MapDefinition::from_fn("sq", 1, |l, x| DVector::from_vec(vec![l - x[0] * x[0]]));
        let j = m.jacobian(1.0, &DVector::from_vec(vec![0.3])).unwrap();
        assert!((j[(0, 0)] + 0.6).abs() < 1e-8);
        let lin = m.linearize(1.0, &DVector::from_vec(vec![0.3])).unwrap();
        assert!((lin.dlambda[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = MapDefinition::from_fn("sq", 1, |l, x| DVector::from_vec(vec![l - x[0] * x[0]]));
        assert!(matches!(m.eval(0.0, &DVector::zeros(2)), Err(Error::BadParameter(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let m = MapDefinition::from_fn("blow", 1, |_, x| DVector::from_vec(vec![x[0] * 1e308 * 10.0]));
        assert!(matches!(m.eval(0.0, &DVector::from_vec(vec![1.0])), Err(Error::NumericalOverflow(_))));
    }
}
