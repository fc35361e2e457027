//! Perturbations `g(λ, x)` added to the horseshoe families, with their bound `β`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fd_jacobian, State};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// `|g(λ,0)| < β` and `|∂g/∂x| < β`.
    QuadraticStyle,
    /// `|g(λ,0)| < β` and `|∂g/∂x| < β|x|`.
    CubicStyle,
    /// `‖g(λ,0)‖ < β` and `‖D_x g‖ < β`.
    CoupledStyle,
}

type GFn = dyn Fn(f64, &State) -> State + Send + Sync;
type DgFn = dyn Fn(f64, &State) -> DMatrix<f64> + Send + Sync;

#[derive(Clone)]
pub struct PerturbationSpec {
    pub beta: f64,
    pub bound_kind: BoundKind,
    g: Arc<GFn>,
    dg: Option<Arc<DgFn>>,
}

impl PerturbationSpec {
    pub fn new<G>(beta: f64, bound_kind: BoundKind, g: G) -> Self
    where
        G: Fn(f64, &State) -> State + Send + Sync + 'static,
    {
        Self { beta, bound_kind, g: Arc::new(g), dg: None }
    }

    pub fn with_derivative<D>(mut self, dg: D) -> Self
    where
        D: Fn(f64, &State) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.dg = Some(Arc::new(dg));
        self
    }

    pub fn zero(dimension: usize, bound_kind: BoundKind) -> Self {
        Self::new(1.0, bound_kind, move |_, _| DVector::zeros(dimension))
            .with_derivative(move |_, _| DMatrix::zeros(dimension, dimension))
    }

    pub fn g(&self, lambda: f64, x: &State) -> State {
        (self.g)(lambda, x)
    }

    pub fn dg(&self, lambda: f64, x: &State) -> DMatrix<f64> {
        match &self.dg {
            Some(d) => d(lambda, x),
            None => fd_jacobian(|y| Ok((self.g)(lambda, y)), x).expect("finite-difference of g"),
        }
    }

    /// Checks the declared bound at `samples` random points of the box.
    pub fn check_bound(&self, lambda_range: (f64, f64), lo: &[f64], hi: &[f64], samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = lo.len();
        for _ in 0..samples {
            let l = rng.gen_range(lambda_range.0..=lambda_range.1);
            let x = DVector::from_fn(n, |i, _| rng.gen_range(lo[i]..=hi[i]));
            let g0 = self.g(l, &DVector::zeros(n)).norm();
            let d = self.dg(l, &x);
            let dn = if n == 1 { d[(0, 0)].abs() } else { d.norm() };
            let ok = g0 < self.beta
                && match self.bound_kind {
                    BoundKind::QuadraticStyle | BoundKind::CoupledStyle => dn < self.beta,
                    BoundKind::CubicStyle => dn <= self.beta * x.norm(),
                };
            if !ok {
                return Err(Error::BadParameter(format!(
                    "perturbation bound beta = {} violated at lambda = {}, x = {:?}",
                    self.beta,
                    l,
                    x.as_slice()
                )));
            }
        }
        Ok(())
    }
}

fn smooth_base(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn smooth_base_prime(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp() / (t * t)
    }
}

/// Smooth step: 0 for t ≤ 0, 1 for t ≥ 1.
fn smooth_step(t: f64) -> (f64, f64) {
    let a = smooth_base(t);
    let b = smooth_base(1.0 - t);
    let s = a + b;
    let da = smooth_base_prime(t);
    let db = -smooth_base_prime(1.0 - t);
    (a / s, (da * s - a * (da + db)) / (s * s))
}

/// Plateau bump: 1 on `[-γ, γ]`, 0 outside `[-γ-w, γ+w]`, smooth in between.
/// Returns value and derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub gamma: f64,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let a = z.abs();
        if a <= self.gamma {
            return (1.0, 0.0);
        }
        if a >= self.gamma + self.width {
            return (0.0, 0.0);
        }
        let (v, d) = smooth_step((self.gamma + self.width - a) / self.width);
        (v, -z.signum() * d / self.width)
    }
}

fn sampled_sup<F: Fn(f64, f64) -> f64>(f: F, lrange: (f64, f64), xrange: (f64, f64), n: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..=n {
        let l = lrange.0 + (lrange.1 - lrange.0) * i as f64 / n as f64;
        for j in 0..=n {
            let x = xrange.0 + (xrange.1 - xrange.0) * j as f64 / n as f64;
            m = m.max(f(l, x));
        }
    }
    m
}

/// `g(λ,x) = -(λ - x²) b(λ) b(x)`, which makes `λ - x² + g` vanish on `[-γ, γ]²`.
/// `β` is the sampled supremum of the bound quantities plus a 10% margin.
pub fn quadratic_bump(bump: Bump) -> PerturbationSpec {
    let g = move |l: f64, x: f64| -(l - x * x) * bump.eval(l).0 * bump.eval(x).0;
    let dgx = move |l: f64, x: f64| {
        let (bl, _) = bump.eval(l);
        let (bx, dbx) = bump.eval(x);
        2.0 * x * bl * bx - (l - x * x) * bl * dbx
    };
    let r = bump.gamma + bump.width;
    let sup_g0 = sampled_sup(|l, _| g(l, 0.0).abs(), (-r, r), (0.0, 0.0), 4000);
    let sup_dg = sampled_sup(|l, x| dgx(l, x).abs(), (-r, r), (-r, r), 800);
    let beta = 1.1 * sup_g0.max(sup_dg);
    PerturbationSpec::new(beta, BoundKind::QuadraticStyle, move |l, x| DVector::from_vec(vec![g(l, x[0])]))
        .with_derivative(move |l, x| DMatrix::from_element(1, 1, dgx(l, x[0])))
}

/// `g(λ,x) = a b(λ) x²`, which satisfies the cubic-style bound with `β = 2a`
/// (plus margin) on any box.
pub fn cubic_bump(bump: Bump, amplitude: f64) -> PerturbationSpec {
    let beta = 2.0 * amplitude.abs() * 1.05;
    PerturbationSpec::new(beta, BoundKind::CubicStyle, move |l, x| {
        DVector::from_vec(vec![amplitude * bump.eval(l).0 * x[0] * x[0]])
    })
    .with_derivative(move |l, x| DMatrix::from_element(1, 1, 2.0 * amplitude * bump.eval(l).0 * x[0]))
}
