use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ode::{duffing_system, pendulum_system, IntegratorConfig, StroboscopicKernel};
use super::perturbation::{cubic_bump, quadratic_bump, Bump, PerturbationSpec};
use super::{JacobianKind, Linearization, MapDefinition, MapKernel, PhaseSpace, State};
use crate::error::{Error, Result};

const NAMES: &[&str] = &[
    "logistic",
    "modified_logistic",
    "quadratic",
    "perturbed_quadratic",
    "cubic",
    "perturbed_cubic",
    "coupled_quadratic",
    "tent",
    "tent_product",
    "tent3",
    "ikeda",
    "pulsed_rotor",
    "duffing_strobe",
    "pendulum_strobe",
];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

fn v1(x: f64) -> State {
    DVector::from_element(1, x)
}

fn m1(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

/// Kernel for scalar maps given by value, x-derivative and λ-derivative.
struct Scalar<F>(F);

impl<F> MapKernel for Scalar<F>
where
    F: Fn(f64, f64) -> (f64, f64, f64) + Send + Sync,
{
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        Ok(v1((self.0)(lambda, x[0]).0))
    }

    fn jacobian(&self, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        Ok(m1((self.0)(lambda, x[0]).1))
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        let (v, d, dl) = (self.0)(lambda, x[0]);
        Ok(Linearization { value: v1(v), jacobian: m1(d), dlambda: v1(dl) })
    }
}

/// `h(a) = a (h0 + h1 cos(ω a))` and `h'(a)`.
pub fn modified_logistic_h(a: f64, h0: f64, h1: f64, omega: f64) -> (f64, f64) {
    let c = (omega * a).cos();
    let s = (omega * a).sin();
    (a * (h0 + h1 * c), h0 + h1 * c - h1 * omega * a * s)
}

struct Perturbed1d {
    base: fn(f64, f64) -> (f64, f64, f64),
    g: PerturbationSpec,
}

impl MapKernel for Perturbed1d {
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        Ok(v1((self.base)(lambda, x[0]).0 + self.g.g(lambda, x)[0]))
    }

    fn jacobian(&self, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        Ok(m1((self.base)(lambda, x[0]).1 + self.g.dg(lambda, x)[(0, 0)]))
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        let (v, d, dl) = (self.base)(lambda, x[0]);
        let h = super::fd_step(lambda);
        let dg_dl = (self.g.g(lambda + h, x)[0] - self.g.g(lambda - h, x)[0]) / (2.0 * h);
        Ok(Linearization {
            value: v1(v + self.g.g(lambda, x)[0]),
            jacobian: m1(d + self.g.dg(lambda, x)[(0, 0)]),
            dlambda: v1(dl + dg_dl),
        })
    }
}

fn quadratic(l: f64, x: f64) -> (f64, f64, f64) {
    (l - x * x, -2.0 * x, 1.0)
}

fn cubic(l: f64, x: f64) -> (f64, f64, f64) {
    (x * x * x - l * x, 3.0 * x * x - l, -x)
}

/// `F_i = k_i λ - x_i² + (c/2)(x_{i-1} + x_{i+1})` on a ring, `k_i = 1 + step·i`.
struct CoupledQuadratic {
    n: usize,
    c: f64,
    slopes: Vec<f64>,
}

impl CoupledQuadratic {
    fn neighbours(&self, i: usize) -> [usize; 2] {
        [(i + self.n - 1) % self.n, (i + 1) % self.n]
    }
}

impl MapKernel for CoupledQuadratic {
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        Ok(DVector::from_fn(self.n, |i, _| {
            let mut v = self.slopes[i] * lambda - x[i] * x[i];
            if self.n > 1 {
                let [a, b] = self.neighbours(i);
                v += 0.5 * self.c * (x[a] + x[b]);
            }
            v
        }))
    }

    fn jacobian(&self, _lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            j[(i, i)] = -2.0 * x[i];
            if self.n > 1 {
                for k in self.neighbours(i) {
                    j[(i, k)] += 0.5 * self.c;
                }
            }
        }
        Ok(j)
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        Ok(Linearization {
            value: self.eval(lambda, x)?,
            jacobian: self.jacobian(lambda, x)?,
            dlambda: DVector::from_vec(self.slopes.clone()),
        })
    }
}

fn tent(x: f64) -> (f64, f64) {
    if x <= 0.5 {
        (2.0 * x, 2.0)
    } else {
        (2.0 * (1.0 - x), -2.0)
    }
}

fn tent3(x: f64) -> (f64, f64) {
    if x <= 1.0 / 3.0 {
        (3.0 * x, 3.0)
    } else if x <= 2.0 / 3.0 {
        (2.0 - 3.0 * x, -3.0)
    } else {
        (3.0 * x - 2.0, 3.0)
    }
}

struct Piecewise {
    n: usize,
    f: fn(f64) -> (f64, f64),
}

impl MapKernel for Piecewise {
    fn eval(&self, _lambda: f64, x: &State) -> Result<State> {
        Ok(DVector::from_fn(self.n, |i, _| (self.f)(x[i]).0))
    }

    fn jacobian(&self, _lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_fn(self.n, |i, _| (self.f)(x[i]).1)))
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        Ok(Linearization {
            value: self.eval(lambda, x)?,
            jacobian: self.jacobian(lambda, x)?,
            dlambda: DVector::zeros(self.n),
        })
    }
}

/// `z ↦ λ + u z exp(i(k - p/(1+|z|²)))` as a real map of `(Re z, Im z)`.
struct Ikeda {
    u: f64,
    k: f64,
    p: f64,
}

impl Ikeda {
    fn parts(&self, x: &State) -> (f64, f64, f64, f64) {
        let r2 = 1.0 + x[0] * x[0] + x[1] * x[1];
        let tau = self.k - self.p / r2;
        let tau_x = 2.0 * self.p * x[0] / (r2 * r2);
        let tau_y = 2.0 * self.p * x[1] / (r2 * r2);
        (tau.cos(), tau.sin(), tau_x, tau_y)
    }
}

impl MapKernel for Ikeda {
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        let (c, s, _, _) = self.parts(x);
        Ok(DVector::from_vec(vec![
            lambda + self.u * (x[0] * c - x[1] * s),
            self.u * (x[0] * s + x[1] * c),
        ]))
    }

    fn jacobian(&self, _lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        let (c, s, tx, ty) = self.parts(x);
        let re = x[0] * c - x[1] * s;
        let im = x[0] * s + x[1] * c;
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[
                self.u * (c - im * tx),
                self.u * (-s - im * ty),
                self.u * (s + re * tx),
                self.u * (c + re * ty),
            ],
        ))
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        Ok(Linearization {
            value: self.eval(lambda, x)?,
            jacobian: self.jacobian(lambda, x)?,
            dlambda: DVector::from_vec(vec![1.0, 0.0]),
        })
    }
}

/// `(x, y) ↦ (x + y, d y + λ sin(x + y))`, angle taken mod 2π on comparison.
struct PulsedRotor {
    damping: f64,
}

impl MapKernel for PulsedRotor {
    fn eval(&self, lambda: f64, x: &State) -> Result<State> {
        let t = x[0] + x[1];
        Ok(DVector::from_vec(vec![t, self.damping * x[1] + lambda * t.sin()]))
    }

    fn jacobian(&self, lambda: f64, x: &State) -> Result<DMatrix<f64>> {
        let c = lambda * (x[0] + x[1]).cos();
        Ok(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, c, self.damping + c]))
    }

    fn linearize(&self, lambda: f64, x: &State) -> Result<Linearization> {
        Ok(Linearization {
            value: self.eval(lambda, x)?,
            jacobian: self.jacobian(lambda, x)?,
            dlambda: DVector::from_vec(vec![0.0, (x[0] + x[1]).sin()]),
        })
    }
}

fn defaults(name: &str) -> Option<Vec<(&'static str, f64)>> {
    Some(match name {
        "logistic" | "quadratic" | "cubic" | "tent" | "tent3" => vec![],
        "modified_logistic" => vec![("h0", 1.18), ("h1", 0.17), ("omega", 2.4)],
        "perturbed_quadratic" => vec![("gamma", 3.0), ("width", 3.0)],
        "perturbed_cubic" => vec![("gamma", 3.0), ("width", 3.0), ("amplitude", 0.2)],
        "coupled_quadratic" => vec![("n", 2.0), ("c", 0.1), ("k_step", 0.1)],
        "tent_product" => vec![("n", 2.0)],
        "ikeda" => vec![("u", 0.9), ("k", 0.4), ("p", 6.0)],
        "pulsed_rotor" => vec![("damping", 0.5)],
        "duffing_strobe" => vec![("damping", 0.3), ("offset", 0.01), ("steps_per_period", 512.0), ("escape_radius", 1e6)],
        "pendulum_strobe" => vec![("damping", 0.3), ("steps_per_period", 512.0), ("escape_radius", 1e6)],
        _ => return None,
    })
}

fn positive_int(params: &BTreeMap<String, f64>, key: &str, min: usize) -> Result<usize> {
    let v = params[key];
    if v.fract() != 0.0 || v < min as f64 || v > 4096.0 {
        return Err(Error::BadParameter(format!("{key} must be an integer >= {min}, got {v}")));
    }
    Ok(v as usize)
}

/// Looks up a built-in map by name and applies key-value overrides.
pub fn builtin_map(name: &str, overrides: &BTreeMap<String, f64>) -> Result<MapDefinition> {
    let defs = defaults(name).ok_or_else(|| Error::UnknownMap(name.to_string()))?;
    let mut params: BTreeMap<String, f64> = defs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        let key = k.to_ascii_lowercase();
        if !params.contains_key(&key) {
            return Err(Error::BadParameter(format!("{name} has no parameter `{k}`")));
        }
        if !v.is_finite() {
            return Err(Error::BadParameter(format!("{k} must be finite")));
        }
        params.insert(key, *v);
    }
    let p = |k: &str| params[k];
    let map = match name {
        "logistic" => MapDefinition::new(
            name,
            1,
            JacobianKind::Analytic,
            Arc::new(Scalar(|a: f64, x: f64| (a * x * (1.0 - x), a * (1.0 - 2.0 * x), x * (1.0 - x)))),
        )
        .with_param_hint(2.8, 4.0)
        .with_box(vec![0.0], vec![1.0]),
        "modified_logistic" => {
            let (h0, h1, om) = (p("h0"), p("h1"), p("omega"));
            MapDefinition::new(
                name,
                1,
                JacobianKind::Analytic,
                Arc::new(Scalar(move |a: f64, x: f64| {
                    let (h, dh) = modified_logistic_h(a, h0, h1, om);
                    (h * x * (1.0 - x), h * (1.0 - 2.0 * x), dh * x * (1.0 - x))
                })),
            )
            .with_param_hint(2.5, 4.0)
            .with_box(vec![0.0], vec![1.0])
        }
        "quadratic" => MapDefinition::new(name, 1, JacobianKind::Analytic, Arc::new(Scalar(quadratic)))
            .with_param_hint(-1.0, 3.0)
            .with_box(vec![-4.0], vec![4.0]),
        "cubic" => MapDefinition::new(name, 1, JacobianKind::Analytic, Arc::new(Scalar(cubic)))
            .with_param_hint(-2.0, 30.0)
            .with_box(vec![-12.0], vec![12.0]),
        "perturbed_quadratic" => {
            if p("gamma") <= 0.0 || p("width") <= 0.0 {
                return Err(Error::BadParameter("gamma and width must be positive".into()));
            }
            let g = quadratic_bump(Bump { gamma: p("gamma"), width: p("width") });
            MapDefinition::new(name, 1, JacobianKind::Analytic, Arc::new(Perturbed1d { base: quadratic, g }))
                .with_param_hint(-1.0, 40.0)
                .with_box(vec![-10.0], vec![10.0])
        }
        "perturbed_cubic" => {
            if p("gamma") <= 0.0 || p("width") <= 0.0 {
                return Err(Error::BadParameter("gamma and width must be positive".into()));
            }
            let g = cubic_bump(Bump { gamma: p("gamma"), width: p("width") }, p("amplitude"));
            MapDefinition::new(name, 1, JacobianKind::Analytic, Arc::new(Perturbed1d { base: cubic, g }))
                .with_param_hint(-2.0, 30.0)
                .with_box(vec![-12.0], vec![12.0])
        }
        "coupled_quadratic" => {
            let n = positive_int(&params, "n", 1)?;
            let slopes = (0..n).map(|i| 1.0 + p("k_step") * i as f64).collect();
            MapDefinition::new(name, n, JacobianKind::Analytic, Arc::new(CoupledQuadratic { n, c: p("c"), slopes }))
                .with_param_hint(-1.0, 3.0)
                .with_box(vec![-3.0; n], vec![3.0; n])
        }
        "tent" => MapDefinition::new(name, 1, JacobianKind::Analytic, Arc::new(Piecewise { n: 1, f: tent }))
            .with_box(vec![0.0], vec![1.0]),
        "tent3" => MapDefinition::new(name, 1, JacobianKind::Analytic, Arc::new(Piecewise { n: 1, f: tent3 }))
            .with_box(vec![0.0], vec![1.0]),
        "tent_product" => {
            let n = positive_int(&params, "n", 1)?;
            MapDefinition::new(name, n, JacobianKind::Analytic, Arc::new(Piecewise { n, f: tent }))
                .with_box(vec![0.0; n], vec![1.0; n])
        }
        "ikeda" => MapDefinition::new(
            name,
            2,
            JacobianKind::Analytic,
            Arc::new(Ikeda { u: p("u"), k: p("k"), p: p("p") }),
        )
        .with_param_hint(0.0, 1.0)
        .with_box(vec![-3.0, -3.0], vec![3.0, 3.0]),
        "pulsed_rotor" => MapDefinition::new(name, 2, JacobianKind::Analytic, Arc::new(PulsedRotor { damping: p("damping") }))
            .with_param_hint(0.0, 10.0)
            .with_phase_space(PhaseSpace::Cylinder { angle: 0 })
            .with_box(vec![0.0, -10.0], vec![2.0 * PI, 10.0]),
        "duffing_strobe" | "pendulum_strobe" => {
            let integ = IntegratorConfig {
                steps_per_period: positive_int(&params, "steps_per_period", 64)?,
                escape_radius: p("escape_radius"),
            };
            let (ode, hint, lo, hi, ps) = if name == "duffing_strobe" {
                (
                    duffing_system(p("damping"), p("offset")),
                    (0.0, 400.0),
                    vec![-3.0, -3.0],
                    vec![3.0, 3.0],
                    PhaseSpace::Euclidean,
                )
            } else {
                (
                    pendulum_system(p("damping")),
                    (0.0, 10.0),
                    vec![0.0, -5.0],
                    vec![2.0 * PI, 5.0],
                    PhaseSpace::Cylinder { angle: 0 },
                )
            };
            MapDefinition::new(name, 2, JacobianKind::Variational, Arc::new(StroboscopicKernel { ode, integ }))
                .with_param_hint(hint.0, hint.1)
                .with_phase_space(ps)
                .with_box(lo, hi)
        }
        _ => unreachable!(),
    };
    Ok(map.with_params(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(name: &str) -> MapDefinition {
        builtin_map(name, &BTreeMap::new()).unwrap()
    }

    fn s(x: f64) -> State {
        v1(x)
    }

    #[test]
    fn eval_examples() {
        assert!((get("logistic").eval(2.0, &s(0.5)).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((get("quadratic").eval(-0.25, &s(-0.5)).unwrap()[0] + 0.5).abs() < 1e-15);
        assert!((get("tent").eval(0.0, &s(2.0 / 7.0)).unwrap()[0] - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_examples() {
        assert!((get("quadratic").jacobian(0.0, &s(-0.5)).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((get("logistic").jacobian(3.0, &s(2.0 / 3.0)).unwrap()[(0, 0)] + 1.0).abs() < 1e-14);
        let mut o = BTreeMap::new();
        o.insert("c".to_string(), 0.0);
        let m = builtin_map("coupled_quadratic", &o).unwrap();
        let j = m.jacobian(1.0, &DVector::from_vec(vec![0.3, -0.7])).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[-0.6, 0.0, 0.0, 1.4]));
    }

    #[test]
    fn ikeda_origin_fixed_at_zero() {
        let y = get("ikeda").eval(0.0, &DVector::zeros(2)).unwrap();
        assert_eq!(y.norm(), 0.0);
    }

    #[test]
    fn coupled_two_dimensional_formula() {
        let mut o = BTreeMap::new();
        o.insert("N".to_string(), 2.0);
        o.insert("c".to_string(), 0.1);
        let m = builtin_map("coupled_quadratic", &o).unwrap();
        assert_eq!(m.dimension, 2);
        let (a, x, y) = (0.7, 0.3, -0.4);
        let f = m.eval(a, &DVector::from_vec(vec![x, y])).unwrap();
        assert!((f[0] - (a - x * x + 0.1 * y)).abs() < 1e-15);
        assert!((f[1] - (1.1 * a - y * y + 0.1 * x)).abs() < 1e-15);
    }

    #[test]
    fn modified_logistic_maximum() {
        let m = get("modified_logistic");
        let a = 3.1;
        let (h, _) = modified_logistic_h(a, 1.18, 0.17, 2.4);
        let max = (0..=1000)
            .map(|i| m.eval(a, &s(i as f64 / 1000.0)).unwrap()[0])
            .fold(f64::MIN, f64::max);
        assert!((max - h / 4.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_and_bad_overrides() {
        assert!(matches!(builtin_map("henon", &BTreeMap::new()), Err(Error::UnknownMap(_))));
        let mut o = BTreeMap::new();
        o.insert("zzz".to_string(), 1.0);
        assert!(matches!(builtin_map("logistic", &o), Err(Error::BadParameter(_))));
        let mut o = BTreeMap::new();
        o.insert("n".to_string(), 1.5);
        assert!(matches!(builtin_map("tent_product", &o), Err(Error::BadParameter(_))));
    }

    #[test]
    fn every_name_builds() {
        for n in builtin_names() {
            let m = get(n);
            assert_eq!(&m.name, n);
        }
    }
}
