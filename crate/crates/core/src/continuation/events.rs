//! Test functions, event refinement, period-doubling location and branch
//! switching.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ContinuationConfig, Tracer};
use crate::error::{Error, Result};
use crate::linalg::{self, ScaledEigen};
use crate::maps::{MapDefinition, State};
use crate::orbits::{build_orbit, iterate_linearized, PeriodicOrbit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    SaddleNode,
    PeriodDoubling,
    Hopf,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::SaddleNode => "saddle_node",
            EventKind::PeriodDoubling => "period_doubling",
            EventKind::Hopf => "hopf",
        }
    }
}

/// Orbit indices of the three local segments at a period doubling: `a` and
/// `b` have the lower period, `c` the doubled period and lies on the side of `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DoublingIndices {
    pub phi_a: Option<i8>,
    pub phi_b: Option<i8>,
    pub phi_c: Option<i8>,
}

#[derive(Clone, Debug)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub lambda: f64,
    pub orbit: PeriodicOrbit,
    /// Lower period involved (the period of `orbit`).
    pub period: usize,
    pub incoming_index: Option<i8>,
    pub outgoing_index: Option<i8>,
    pub incoming_period: usize,
    pub outgoing_period: usize,
    pub doubling: Option<DoublingIndices>,
    /// Index of the event orbit in the trace snapshots.
    pub position: usize,
}

impl BifurcationEvent {
    /// Distance of the defining eigenvalue from its target.
    pub fn eigenvalue_defect(&self) -> f64 {
        match self.kind {
            EventKind::SaddleNode => (self.orbit.closest_eigenvalue(Complex64::new(1.0, 0.0)) - 1.0).norm(),
            EventKind::PeriodDoubling => (self.orbit.closest_eigenvalue(Complex64::new(-1.0, 0.0)) + 1.0).norm(),
            EventKind::Hopf => self
                .orbit
                .eigenvalues
                .iter()
                .filter(|m| m.im.abs() > 1e-7)
                .map(|m| (m.norm() - 1.0).abs())
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub(crate) fn reversed(mut self) -> Self {
        std::mem::swap(&mut self.incoming_index, &mut self.outgoing_index);
        std::mem::swap(&mut self.incoming_period, &mut self.outgoing_period);
        self
    }
}

/// Test-function values at one point of a branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestValues {
    /// `Π (μ - 1)`, sign changes at saddle-nodes.
    pub t_plus: f64,
    /// `Π (μ + 1)`, sign changes at period doublings.
    pub t_minus: f64,
    /// `Π (|μ|² - 1)` over complex pairs, sign changes at Hopf points.
    pub t_hopf: f64,
    pub complex_pairs: usize,
}

fn capped(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n > 1e30 {
        z / n * 1e30
    } else {
        z
    }
}

pub fn test_values(eigs: &[ScaledEigen]) -> TestValues {
    let mut tp = Complex64::new(1.0, 0.0);
    let mut tm = Complex64::new(1.0, 0.0);
    let mut th = 1.0;
    let mut pairs = 0;
    for e in eigs {
        let mu = e.value();
        tp *= capped(mu - 1.0);
        tm *= capped(mu + 1.0);
        if mu.im > 1e-9 * mu.norm().max(1.0) {
            pairs += 1;
            th *= mu.norm_sqr().min(1e30) - 1.0;
        }
    }
    TestValues { t_plus: tp.re, t_minus: tm.re, t_hopf: th, complex_pairs: pairs }
}

/// Newton on the extended system `[F^p(λ,x) - x; det(M_p + I)] = 0` for a
/// period-doubling point of period `p` near `u0 = (λ, x)`.
pub fn locate_period_doubling(map: &MapDefinition, u0: &DVector<f64>, p: usize) -> Result<DVector<f64>> {
    let n = map.dimension;
    let phi = |u: &DVector<f64>| -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
        let x = u.rows(1, n).into_owned();
        let data = iterate_linearized(map, u[0], &x, p)?;
        let m = data.monodromy.to_matrix().ok_or_else(|| Error::NumericalOverflow("monodromy".into()))?;
        let g = map.phase_space.difference(&data.end, &x);
        let mut dh = DMatrix::zeros(n, n + 1);
        dh.column_mut(0).copy_from(&data.dlambda);
        dh.columns_mut(1, n).copy_from(&(&m - DMatrix::identity(n, n)));
        let det = (&m + DMatrix::identity(n, n)).determinant();
        Ok((g, dh, det))
    };
    let mut u = u0.clone();
    for _ in 0..40 {
        let (g, dh, det) = phi(&u)?;
        let mut row = DVector::zeros(n + 1);
        for j in 0..=n {
            let h = 1e-7 * (1.0 + u[j].abs());
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += h;
            um[j] -= h;
            row[j] = (phi(&up)?.2 - phi(&um)?.2) / (2.0 * h);
        }
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.rows_mut(0, n).copy_from(&dh);
        a.row_mut(n).copy_from(&row.transpose());
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-g));
        rhs[n] = -det;
        let du = linalg::solve(&a, &rhs).ok_or(Error::SingularSystem)?;
        let dn = du.norm();
        let cap = 0.1 * (1.0 + u.norm());
        let du = if dn > cap { du * (cap / dn) } else { du };
        u += &du;
        if du.norm() <= 1e-14 * (1.0 + u.norm()) {
            return Ok(u);
        }
    }
    let (g, _, det) = phi(&u)?;
    if g.norm() < 1e-10 && det.abs() < 1e-8 {
        return Ok(u);
    }
    Err(Error::NoConvergence("period-doubling point".into()))
}

/// Unit vector `v` with `(M + I) v ≈ 0`.
fn flip_eigenvector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let a = m + DMatrix::identity(n, n);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty");
    vt.row(k).transpose().normalize()
}

/// Result of switching onto the doubled branch.
#[derive(Clone, Debug)]
pub struct DoubledSeed {
    pub orbit: PeriodicOrbit,
    pub u: DVector<f64>,
    /// Branch tangent oriented away from the period-doubling point.
    pub tangent: DVector<f64>,
    pub amplitude: f64,
}

/// Constructs a period-`2p` orbit near the period-doubling orbit `event`
/// (period `p`) by solving `F^{2p}(λ,x) = x` with the amplitude constraint
/// `<x - x*, v> = ε`, `v` the eigenvector of the eigenvalue -1.
pub fn switch_branch_pd(map: &MapDefinition, event: &PeriodicOrbit, cfg: &ContinuationConfig) -> Result<DoubledSeed> {
    let n = map.dimension;
    let p = event.period;
    let xs = event.points[0].clone();
    let lam = event.lambda;
    let data = iterate_linearized(map, lam, &xs, p)?;
    let m = data.monodromy.to_matrix().ok_or(Error::BranchSwitchFailure(lam))?;
    let v = flip_eigenvector(&m);
    let mut eps_list = vec![cfg.pd_epsilon];
    for k in 1..=cfg.pd_retries {
        eps_list.push(cfg.pd_epsilon * 10f64.powi(-(k as i32)));
    }
    for k in 1..=cfg.pd_retries {
        eps_list.push(cfg.pd_epsilon * 10f64.powi(k as i32));
    }
    for eps in eps_list {
        let mut u = DVector::zeros(n + 1);
        u[0] = lam;
        u.rows_mut(1, n).copy_from(&(&xs + &v * eps));
        let mut ok = false;
        let mut last_du = f64::INFINITY;
        for _ in 0..40 {
            let x = u.rows(1, n).into_owned();
            let Ok(d) = iterate_linearized(map, u[0], &x, 2 * p) else { break };
            let Some(m2) = d.monodromy.to_matrix() else { break };
            let g = map.phase_space.difference(&d.end, &x);
            let c = map.phase_space.difference(&x, &xs).dot(&v) - eps;
            if last_du <= 1e-9 * (1.0 + u.norm()) && g.norm() <= 1e-12 * (1.0 + x.norm()) && c.abs() <= 1e-12 * eps.max(1e-3) {
                ok = true;
                break;
            }
            let mut a = DMatrix::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, 1)).copy_from(&d.dlambda);
            a.view_mut((0, 1), (n, n)).copy_from(&(&m2 - DMatrix::identity(n, n)));
            a.view_mut((n, 1), (1, n)).copy_from(&v.transpose());
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-g));
            rhs[n] = -c;
            let Some(du) = linalg::solve(&a, &rhs) else { break };
            u += &du;
            last_du = du.norm();
            if !u.iter().all(|z| z.is_finite()) {
                break;
            }
            if du.norm() <= 1e-13 * (1.0 + u.norm()) {
                ok = true;
                break;
            }
        }
        if !ok || (u[0] - lam).abs() > 0.5 * (1.0 + lam.abs()) {
            continue;
        }
        let x = u.rows(1, n).into_owned();
        let Ok(orbit) = build_orbit(map, u[0], &x, 2 * p, cfg.tol_eig) else { continue };
        let half = map.phase_space.distance(&orbit.points[p], &orbit.points[0]);
        if half < 0.5 * eps {
            continue;
        }
        // the squared flip multiplier must still be close to +1
        if (orbit.closest_eigenvalue(Complex64::new(1.0, 0.0)) - 1.0).norm() > 0.5 {
            continue;
        }
        let Ok(d) = iterate_linearized(map, u[0], &x, 2 * p) else { continue };
        let Some(m2) = d.monodromy.to_matrix() else { continue };
        let mut dh = DMatrix::zeros(n, n + 1);
        dh.column_mut(0).copy_from(&d.dlambda);
        dh.columns_mut(1, n).copy_from(&(&m2 - DMatrix::identity(n, n)));
        let mut reference = DVector::zeros(n + 1);
        reference.rows_mut(1, n).copy_from(&v);
        let Some(t) = linalg::tangent(&dh, &reference) else { continue };
        return Ok(DoubledSeed { orbit, u, tangent: t, amplitude: eps });
    }
    Err(Error::BranchSwitchFailure(lam))
}

impl Tracer<'_> {
    /// Bisection in arclength along the predictor from `u_a` with tangent
    /// `tau`, between `0` and `h`, on the sign of `test`.
    pub(super) fn bisect<F>(&self, u_a: &DVector<f64>, tau: &DVector<f64>, h: f64, p: usize, f_a: f64, test: F) -> Option<super::Point>
    where
        F: Fn(&super::Point) -> f64,
    {
        let mut lo = 0.0;
        let mut hi = h;
        let mut f_lo = f_a;
        let mut f_hi = f64::NAN;
        let mut best: Option<super::Point> = None;
        for _ in 0..200 {
            if hi - lo <= self.cfg.event_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let pt = self.corrected_point(&(u_a + tau * mid), tau, p)?;
            let fm = test(&pt);
            if fm.signum() == f_lo.signum() {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
                best = Some(pt);
            }
        }
        if f_hi.is_finite() && f_lo != f_hi {
            let h_star = lo + (hi - lo) * f_lo / (f_lo - f_hi);
            if let Some(pt) = self.corrected_point(&(u_a + tau * h_star), tau, p) {
                return Some(pt);
            }
        }
        best.or_else(|| self.corrected_point(&(u_a + tau * (0.5 * (lo + hi))), tau, p))
    }
}

pub(super) fn state_of(u: &DVector<f64>) -> State {
    u.rows(1, u.len() - 1).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::builtin_map;
    use std::collections::BTreeMap;

    #[test]
    fn locate_quadratic_period_doubling() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        let u = locate_period_doubling(&q, &DVector::from_vec(vec![0.7, 0.45]), 1).unwrap();
        assert!((u[0] - 0.75).abs() < 1e-13 && (u[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn switch_quadratic() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        let ev = build_orbit(&q, 0.75, &DVector::from_element(1, 0.5), 1, 1e-9).unwrap();
        let s = switch_branch_pd(&q, &ev, &ContinuationConfig::default()).unwrap();
        assert_eq!(s.orbit.period, 2);
        assert!(s.orbit.lambda > 0.75);
        let sum = s.orbit.points[0][0] + s.orbit.points[1][0];
        assert!((sum - 1.0).abs() < 1e-10);
        let (x1, x2) = (s.orbit.points[0][0], s.orbit.points[1][0]);
        assert!((x1 - 0.5) * (x2 - 0.5) < 0.0);
    }

    #[test]
    fn switch_logistic() {
        let l = builtin_map("logistic", &BTreeMap::new()).unwrap();
        let ev = build_orbit(&l, 3.0, &DVector::from_element(1, 2.0 / 3.0), 1, 1e-9).unwrap();
        let s = switch_branch_pd(&l, &ev, &ContinuationConfig::default()).unwrap();
        let a = s.orbit.lambda;
        let r = ((a - 3.0) * (a + 1.0)).sqrt();
        let mut expected = [(a + 1.0 - r) / (2.0 * a), (a + 1.0 + r) / (2.0 * a)];
        let mut got = [s.orbit.points[0][0], s.orbit.points[1][0]];
        expected.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        assert!((got[0] - expected[0]).abs() < 1e-9 && (got[1] - expected[1]).abs() < 1e-9);
    }

    #[test]
    fn test_function_signs() {
        let e = [ScaledEigen::plain(Complex64::new(-1.5, 0.0))];
        let t = test_values(&e);
        assert!(t.t_plus < 0.0 && t.t_minus < 0.0 && t.complex_pairs == 0);
        let e = [
            ScaledEigen::plain(Complex64::from_polar(1.1, 0.5)),
            ScaledEigen::plain(Complex64::from_polar(1.1, -0.5)),
        ];
        let t = test_values(&e);
        assert!(t.t_hopf > 0.0 && t.complex_pairs == 1);
    }
}
