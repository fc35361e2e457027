//! Periodically forced ODEs and their stroboscopic (time-period) maps.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{fd_step, Linearization, MapKernel, State};
use crate::error::{Error, Result};

/// Right-hand side `f(λ, t, u)` of a forced ODE.
pub trait VectorField: Send + Sync {
    fn rhs(&self, lambda: f64, t: f64, u: &[f64], out: &mut [f64]);

    /// `D_u f` written column-major into `out` (length N²).
    fn jac(&self, lambda: f64, t: f64, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let mut up = u.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = fd_step(u[j]);
            up[j] = u[j] + h;
            self.rhs(lambda, t, &up, &mut fp);
            up[j] = u[j] - h;
            self.rhs(lambda, t, &up, &mut fm);
            up[j] = u[j];
            for i in 0..n {
                out[i + n * j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }

    /// `∂f/∂λ`.
    fn dparam(&self, lambda: f64, t: f64, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let h = fd_step(lambda);
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        self.rhs(lambda + h, t, u, &mut fp);
        self.rhs(lambda - h, t, u, &mut fm);
        for i in 0..n {
            out[i] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}

#[derive(Clone)]
pub struct OdeSystem {
    pub name: String,
    pub dimension: usize,
    pub forcing_period: f64,
    pub field: Arc<dyn VectorField>,
}

impl OdeSystem {
    pub fn vector_field(&self, lambda: f64, t: f64, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.field.rhs(lambda, t, u, &mut out);
        out
    }

    /// Largest `|f(λ,t,u) - f(λ,t+P,u)|` over the given samples.
    pub fn periodicity_defect(&self, samples: &[(f64, f64, Vec<f64>)]) -> f64 {
        samples
            .iter()
            .map(|(l, t, u)| {
                let a = self.vector_field(*l, *t, u);
                let b = self.vector_field(*l, *t + self.forcing_period, u);
                a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub steps_per_period: usize,
    pub escape_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { steps_per_period: 512, escape_radius: 1e6 }
    }
}

struct Workspace {
    n: usize,
    jac: Vec<f64>,
    dpar: Vec<f64>,
}

impl Workspace {
    // y = [u | M (column-major) | w]
    fn deriv(&mut self, field: &dyn VectorField, lambda: f64, t: f64, y: &[f64], dy: &mut [f64], full: bool) {
        let n = self.n;
        field.rhs(lambda, t, &y[..n], &mut dy[..n]);
        if !full {
            return;
        }
        field.jac(lambda, t, &y[..n], &mut self.jac);
        field.dparam(lambda, t, &y[..n], &mut self.dpar);
        let m = &y[n..n + n * n];
        let w = &y[n + n * n..];
        for j in 0..n {
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.jac[i + n * k] * m[k + n * j];
                }
                dy[n + i + n * j] = s;
            }
        }
        for i in 0..n {
            let mut s = self.dpar[i];
            for k in 0..n {
                s += self.jac[i + n * k] * w[k];
            }
            dy[n + n * n + i] = s;
        }
    }
}

fn integrate(ode: &OdeSystem, lambda: f64, x: &State, integ: &IntegratorConfig, full: bool) -> Result<Vec<f64>> {
    if integ.steps_per_period < 64 {
        return Err(Error::BadParameter("steps_per_period must be at least 64".into()));
    }
    let n = ode.dimension;
    if x.len() != n {
        return Err(Error::BadParameter(format!("{} expects dimension {}", ode.name, n)));
    }
    let len = if full { n + n * n + n } else { n };
    let mut y = vec![0.0; len];
    y[..n].copy_from_slice(x.as_slice());
    if full {
        for i in 0..n {
            y[n + i + n * i] = 1.0;
        }
    }
    let mut ws = Workspace { n, jac: vec![0.0; n * n], dpar: vec![0.0; n] };
    let h = ode.forcing_period / integ.steps_per_period as f64;
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let field = ode.field.as_ref();
    for step in 0..integ.steps_per_period {
        let t = step as f64 * h;
        ws.deriv(field, lambda, t, &y, &mut k1, full);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        ws.deriv(field, lambda, t + 0.5 * h, &tmp, &mut k2, full);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        ws.deriv(field, lambda, t + 0.5 * h, &tmp, &mut k3, full);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        ws.deriv(field, lambda, t + h, &tmp, &mut k4, full);
        for i in 0..len {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = y[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= integ.escape_radius) {
            return Err(Error::TrajectoryEscape { radius: integ.escape_radius, norm });
        }
    }
    Ok(y)
}

/// Time-period map and its monodromy `M`, from RK4 on the state and the
/// variational equations `M' = D_u f · M`, `M(0) = I`.
pub fn stroboscopic_map(
    ode: &OdeSystem,
    lambda: f64,
    x: &State,
    integ: &IntegratorConfig,
) -> Result<(State, DMatrix<f64>)> {
    let lin = stroboscopic_linearization(ode, lambda, x, integ)?;
    Ok((lin.value, lin.jacobian))
}

pub fn stroboscopic_linearization(
    ode: &OdeSystem,
    lambda: f64,
    x: &State,
    integ: &IntegratorConfig,
) -> Result<Linearization> {
    let n = ode.dimension;
    let y = integrate(ode, lambda, x, integ, true)?;
    Ok(Linearization {
        value: DVector::from_column_slice(&y[..n]),
        jacobian: DMatrix::from_column_slice(n, n, &y[n..n + n * n]),
        dlambda: DVector::from_column_slice(&y[n + n * n..]),
    })
}

pub(crate) struct StroboscopicKernel {
    pub ode: OdeSystem,
    pub integ: IntegratorConfig,
}

impl MapKernel for StroboscopicKernel {
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        let y = integrate(&self.ode, lambda, x, &self.integ, false)?;
        Ok(DVector::from_vec(y))
    }

    fn jacobian(&self, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        Ok(stroboscopic_linearization(&self.ode, lambda, x, &self.integ)?.jacobian)
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        stroboscopic_linearization(&self.ode, lambda, x, &self.integ)
    }
}

/// `θ'' + δ θ' + sin θ = λ cos t`.
pub struct Pendulum {
    pub damping: f64,
}

impl VectorField for Pendulum {
    fn rhs(&self, lambda: f64, t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = -self.damping * u[1] - u[0].sin() + lambda * t.cos();
    }

    fn jac(&self, _lambda: f64, _t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -u[0].cos();
        out[2] = 1.0;
        out[3] = -self.damping;
    }

    fn dparam(&self, _lambda: f64, t: f64, _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = t.cos();
    }
}

/// Double-well Duffing `u'' + δ u' - u + u³ + c = ω sin t`.
pub struct Duffing {
    pub damping: f64,
    pub offset: f64,
}

impl VectorField for Duffing {
    fn rhs(&self, lambda: f64, t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = -self.damping * u[1] + u[0] - u[0] * u[0] * u[0] - self.offset + lambda * t.sin();
    }

    fn jac(&self, _lambda: f64, _t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 1.0 - 3.0 * u[0] * u[0];
        out[2] = 1.0;
        out[3] = -self.damping;
    }

    fn dparam(&self, _lambda: f64, t: f64, _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = t.sin();
    }
}

pub fn pendulum_system(damping: f64) -> OdeSystem {
    OdeSystem {
        name: "pendulum".into(),
        dimension: 2,
        forcing_period: 2.0 * std::f64::consts::PI,
        field: Arc::new(Pendulum { damping }),
    }
}

pub fn duffing_system(damping: f64, offset: f64) -> OdeSystem {
    OdeSystem {
        name: "duffing".into(),
        dimension: 2,
        forcing_period: 2.0 * std::f64::consts::PI,
        field: Arc::new(Duffing { damping, offset }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_rest_state_is_fixed() {
        let ode = pendulum_system(0.3);
        let (y, _) = stroboscopic_map(&ode, 0.0, &DVector::zeros(2), &IntegratorConfig::default()).unwrap();
        assert!(y.norm() <= 1e-10);
    }

    #[test]
    fn pendulum_monodromy_determinant() {
        let ode = pendulum_system(0.3);
        let x = DVector::from_vec(vec![0.4, -0.2]);
        let (_, m) = stroboscopic_map(&ode, 1.3, &x, &IntegratorConfig::default()).unwrap();
        let expected = (-0.6 * std::f64::consts::PI).exp();
        assert!((m.determinant() / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn variational_matches_finite_differences() {
        let ode = duffing_system(0.3, 0.01);
        let integ = IntegratorConfig::default();
        let x = DVector::from_vec(vec![0.8, 0.1]);
        let lin = stroboscopic_linearization(&ode, 0.7, &x, &integ).unwrap();
        for j in 0..2 {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = stroboscopic_map(&ode, 0.7, &xp, &integ).unwrap().0;
            let fm = stroboscopic_map(&ode, 0.7, &xm, &integ).unwrap().0;
            let col = (fp - fm) / (2.0 * h);
            for i in 0..2 {
                assert!((col[i] - lin.jacobian[(i, j)]).abs() <= 1e-5 * (1.0 + col[i].abs()));
            }
        }
        let h = 1e-6;
        let fp = stroboscopic_map(&ode, 0.7 + h, &x, &integ).unwrap().0;
        let fm = stroboscopic_map(&ode, 0.7 - h, &x, &integ).unwrap().0;
        let d = (fp - fm) / (2.0 * h);
        assert!((&d - &lin.dlambda).norm() <= 1e-5 * (1.0 + d.norm()));
    }

    #[test]
    fn escape_is_reported() {
        let ode = duffing_system(0.3, 0.01);
        let integ = IntegratorConfig { steps_per_period: 512, escape_radius: 5.0 };
        let r = stroboscopic_map(&ode, 0.0, &DVector::from_vec(vec![0.0, 10.0]), &integ);
        assert!(matches!(r, Err(Error::TrajectoryEscape { .. })));
    }

    #[test]
    fn forcing_is_periodic() {
        let ode = duffing_system(0.3, 0.01);
        let samples: Vec<_> = (0..20).map(|i| (0.5 * i as f64, 0.3 * i as f64, vec![0.1 * i as f64, -0.2])).collect();
        assert!(ode.periodicity_defect(&samples) <= 1e-12);
    }

    #[test]
    fn too_few_steps_rejected() {
        let ode = pendulum_system(0.3);
        let integ = IntegratorConfig { steps_per_period: 10, escape_radius: 1e6 };
        assert!(stroboscopic_map(&ode, 0.0, &DVector::zeros(2), &integ).is_err());
    }
}
