//! Periodic orbits: Newton location, monodromy, classification and the
//! Hausdorff metric on orbits.

pub mod symbolic;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, ScaledEigen, ScaledMatrix};
use crate::maps::{MapDefinition, PhaseSpace, State};

pub use symbolic::{seed_orbits_symbolic, Cell};

/// Spectral classification of a periodic orbit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub sigma_plus: usize,
    pub sigma_minus: usize,
    pub dim_u: usize,
    pub is_flip: bool,
    /// `None` when the orbit is not hyperbolic.
    pub orbit_index: Option<i8>,
    pub hyperbolic: bool,
}

fn is_real(mu: Complex64) -> bool {
    mu.im.abs() <= 1e-9 * mu.norm().max(1.0)
}

/// Classification from eigenvalues in scaled form.
pub fn classify_scaled(eigs: &[ScaledEigen], tol_eig: f64) -> Classification {
    let mut sigma_plus = 0;
    let mut sigma_minus = 0;
    let mut dim_u = 0;
    let mut hyperbolic = true;
    let mut near_minus_one = false;
    for e in eigs {
        let mu = e.value();
        let real = if e.log2_abs() > 900.0 {
            e.mantissa.im.abs() <= 1e-9 * e.mantissa.norm()
        } else {
            is_real(mu)
        };
        let modulus = mu.norm();
        if (modulus - 1.0).abs() <= tol_eig {
            hyperbolic = false;
        }
        if modulus > 1.0 + tol_eig {
            dim_u += 1;
        }
        if real {
            if mu.re > 1.0 + tol_eig {
                sigma_plus += 1;
            } else if mu.re < -1.0 - tol_eig {
                sigma_minus += 1;
            } else if (mu.re + 1.0).abs() <= tol_eig {
                near_minus_one = true;
            }
        }
    }
    let is_flip = sigma_minus % 2 == 1 && !near_minus_one;
    let orbit_index = hyperbolic.then(|| {
        if sigma_minus % 2 == 1 {
            0
        } else if sigma_plus % 2 == 0 {
            1
        } else {
            -1
        }
    });
    Classification { sigma_plus, sigma_minus, dim_u, is_flip, orbit_index, hyperbolic }
}

/// Counts `σ⁺`, `σ⁻`, `dim_u` and derives flip flag, orbit index and hyperbolicity.
pub fn classify(eigs: &[Complex64], tol_eig: f64) -> Classification {
    let scaled: Vec<ScaledEigen> = eigs.iter().map(|&m| ScaledEigen::plain(m)).collect();
    classify_scaled(&scaled, tol_eig)
}

#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub lambda: f64,
    pub points: Vec<State>,
    pub period: usize,
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvalues in overflow-safe form; `eigenvalues` saturates at `2^990`.
    pub scaled_eigenvalues: Vec<ScaledEigen>,
    pub class: Classification,
    pub residual: f64,
    pub phase_space: PhaseSpace,
}

impl PeriodicOrbit {
    pub fn index(&self) -> Option<i8> {
        self.class.orbit_index
    }

    pub fn is_flip(&self) -> bool {
        self.class.is_flip
    }

    pub fn is_nonflip(&self) -> bool {
        !self.class.is_flip
    }

    pub fn hyperbolic(&self) -> bool {
        self.class.hyperbolic
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    /// Eigenvalue closest to `target`.
    pub fn closest_eigenvalue(&self, target: Complex64) -> Complex64 {
        self.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
            .unwrap_or(Complex64::new(f64::NAN, 0.0))
    }

    /// Rotation of the orbit whose first point is lexicographically smallest.
    pub fn canonical(&self) -> PeriodicOrbit {
        let reduced: Vec<State> = self.points.iter().map(|p| self.phase_space.reduce(p)).collect();
        let start = (0..self.period)
            .min_by(|&a, &b| {
                reduced[a]
                    .iter()
                    .zip(reduced[b].iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        let mut o = self.clone();
        o.points = (0..self.period).map(|i| self.points[(start + i) % self.period].clone()).collect();
        o
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": self.lambda,
            "period": self.period,
            "points": self.points.iter().map(|p| p.as_slice().to_vec()).collect::<Vec<_>>(),
            "eigenvalues": self.eigenvalues.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>(),
            "sigma_plus": self.class.sigma_plus,
            "sigma_minus": self.class.sigma_minus,
            "dim_u": self.class.dim_u,
            "flip": self.class.is_flip,
            "index": self.class.orbit_index,
            "residual": self.residual,
        })
    }
}

/// Orbit points, `D_x F^p` and `∂_λ F^p` along the orbit of `x0`.
#[derive(Clone, Debug)]
pub struct OrbitData {
    pub points: Vec<State>,
    pub end: State,
    pub monodromy: ScaledMatrix,
    pub dlambda: State,
}

pub fn iterate_linearized(map: &MapDefinition, lambda: f64, x0: &State, p: usize) -> Result<OrbitData> {
    let n = map.dimension;
    let mut points = Vec::with_capacity(p);
    let mut x = x0.clone();
    let mut mono = ScaledMatrix::identity(n);
    let mut b = DVector::zeros(n);
    for _ in 0..p {
        let lin = map.linearize(lambda, &x)?;
        points.push(x);
        b = &lin.jacobian * b + &lin.dlambda;
        mono.mul_left(&lin.jacobian);
        x = lin.value;
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow("parameter derivative along orbit".into()));
    }
    Ok(OrbitData { points, end: x, monodromy: mono, dlambda: b })
}

/// Ordered product `D_xF(points[p-1]) ⋯ D_xF(points[0])`.
pub fn orbit_monodromy(map: &MapDefinition, lambda: f64, points: &[State]) -> Result<DMatrix<f64>> {
    let defect = chain_defect(map, lambda, points)?;
    if defect > 1e-6 {
        return Err(Error::NotAnOrbit(defect));
    }
    let mut m = DMatrix::identity(map.dimension, map.dimension);
    for x in points {
        m = map.jacobian(lambda, x)? * m;
    }
    Ok(m)
}

/// `max_i |F(points[i]) - points[i+1 mod p]|`.
pub fn chain_defect(map: &MapDefinition, lambda: f64, points: &[State]) -> Result<f64> {
    let p = points.len();
    let mut d: f64 = 0.0;
    for i in 0..p {
        let y = map.eval(lambda, &points[i])?;
        d = d.max(map.phase_space.distance(&y, &points[(i + 1) % p]));
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub max_period: usize,
    pub tol_eig: f64,
    pub least_period_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50, max_halvings: 6, max_period: 256, tol_eig: 1e-9, least_period_tol: 1e-6 }
    }
}

/// Smallest `d | p` with `points[i+d] = points[i]` to within `tol`.
pub fn least_period(points: &[State], phase_space: PhaseSpace, tol: f64) -> usize {
    let p = points.len();
    for d in 1..p {
        if p % d != 0 {
            continue;
        }
        let close = (0..p).all(|i| phase_space.distance(&points[(i + d) % p], &points[i]) <= tol);
        if close {
            return d;
        }
    }
    p
}

/// Classifies the orbit of `x0` assuming it has period `p`; no Newton, no
/// period reduction.
pub fn build_orbit(map: &MapDefinition, lambda: f64, x0: &State, p: usize, tol_eig: f64) -> Result<PeriodicOrbit> {
    let data = iterate_linearized(map, lambda, x0, p)?;
    orbit_from_data(map, lambda, data, tol_eig)
}

pub fn orbit_from_data(map: &MapDefinition, lambda: f64, data: OrbitData, tol_eig: f64) -> Result<PeriodicOrbit> {
    let scaled = data.monodromy.eigenvalues()?;
    let class = classify_scaled(&scaled, tol_eig);
    let residual = map.phase_space.distance(&data.end, &data.points[0]);
    Ok(PeriodicOrbit {
        lambda,
        period: data.points.len(),
        points: data.points,
        eigenvalues: scaled.iter().map(|e| e.value()).collect(),
        scaled_eigenvalues: scaled,
        class,
        residual,
        phase_space: map.phase_space,
    })
}

fn closing_defect(map: &MapDefinition, lambda: f64, x: &State, p: usize) -> Result<State> {
    let y = map.iterate(lambda, x, p)?;
    Ok(map.phase_space.difference(&y, x))
}

/// Damped Newton on `F^p(λ, x) - x = 0` from `x0`, followed by least-period
/// reduction and classification.
pub fn find_orbit(map: &MapDefinition, lambda: f64, x0: &State, p: usize, opts: &NewtonOptions) -> Result<PeriodicOrbit> {
    if p == 0 || p > opts.max_period {
        return Err(Error::BadParameter(format!("period {p} outside 1..={}", opts.max_period)));
    }
    let x = newton_periodic(map, lambda, x0, p, opts)?;
    let data = iterate_linearized(map, lambda, &x, p)?;
    let d = least_period(&data.points, map.phase_space, opts.least_period_tol);
    if d < p {
        let x = newton_periodic(map, lambda, &data.points[0], d, opts)?;
        return build_orbit(map, lambda, &x, d, opts.tol_eig);
    }
    orbit_from_data(map, lambda, data, opts.tol_eig)
}

fn newton_periodic(map: &MapDefinition, lambda: f64, x0: &State, p: usize, opts: &NewtonOptions) -> Result<State> {
    let n = map.dimension;
    let mut x = x0.clone();
    let fail = |why: &str| Error::NoConvergence(format!("period {p} at lambda = {lambda}: {why}"));
    for _ in 0..opts.max_iter {
        let data = match iterate_linearized(map, lambda, &x, p) {
            Ok(d) => d,
            Err(Error::NumericalOverflow(_)) | Err(Error::TrajectoryEscape { .. }) => return Err(fail("iterate escaped")),
            Err(e) => return Err(e),
        };
        let g = map.phase_space.difference(&data.end, &x);
        let gn = g.norm();
        let eigs = data.monodromy.eigenvalues()?;
        if eigs.iter().any(|e| (e.value() - 1.0).norm() <= 1e-12) {
            return Err(Error::SingularSystem);
        }
        if gn <= opts.tol {
            return Ok(x);
        }
        let m = data.monodromy.to_matrix().ok_or_else(|| fail("monodromy overflow"))?;
        let a = m - DMatrix::identity(n, n);
        let dx = linalg::solve(&a, &(-&g)).ok_or(Error::SingularSystem)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let xn = &x + &dx * t;
            if let Ok(gn_new) = closing_defect(map, lambda, &xn, p).map(|v| v.norm()) {
                if gn_new.is_finite() && gn_new < gn {
                    accepted = Some(xn);
                    break;
                }
            }
            t *= 0.5;
        }
        let step = dx.norm() * t;
        match accepted {
            Some(xn) => x = xn,
            None => {
                if dx.norm() <= opts.tol * (1.0 + x.norm()) {
                    return Ok(x);
                }
                return Err(fail("no decrease after step halving"));
            }
        }
        if step <= opts.tol * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Err(fail("iteration limit"))
}

fn directed_hausdorff(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    a.points
        .iter()
        .map(|p| b.points.iter().map(|q| a.phase_space.distance(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between the point sets plus `|λ₁ - λ₂|`.
pub fn hausdorff_distance(o1: &PeriodicOrbit, o2: &PeriodicOrbit) -> f64 {
    directed_hausdorff(o1, o2).max(directed_hausdorff(o2, o1)) + (o1.lambda - o2.lambda).abs()
}

/// Removes duplicates (same period, Hausdorff distance below `tol`), keeping
/// canonical rotations.
pub fn dedup_orbits(orbits: Vec<PeriodicOrbit>, tol: f64) -> Vec<PeriodicOrbit> {
    let mut out: Vec<PeriodicOrbit> = Vec::new();
    for o in orbits {
        let o = o.canonical();
        if !out.iter().any(|q| q.period == o.period && hausdorff_distance(q, &o) < tol) {
            out.push(o);
        }
    }
    out
}
