//! Closed-form horseshoe estimates for the quadratic, cubic and coupled
//! quadratic families, with grid-sampled counterparts.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde_json::{json, Value};

use crate::combinatorics::Alphabet;
use crate::error::Result;
use crate::linalg;
use crate::maps::perturbation::{quadratic_bump, Bump};
use crate::maps::{builtin_map, MapDefinition, State};
use crate::orbits::symbolic::Cell;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Quadratic,
    Cubic,
    CoupledQuadratic { n: usize, coupling: f64, k_step: f64 },
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::Cubic => "cubic",
            Family::CoupledQuadratic { .. } => "coupled_quadratic",
        }
    }

    pub fn parse(name: &str) -> Option<Family> {
        match name {
            "quadratic" => Some(Family::Quadratic),
            "cubic" => Some(Family::Cubic),
            "coupled_quadratic" => Some(Family::CoupledQuadratic { n: 2, coupling: 0.0, k_step: 0.1 }),
            _ => None,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            Family::Quadratic => Alphabet::Tent,
            Family::Cubic => Alphabet::ThreeBranch,
            Family::CoupledQuadratic { n, .. } => Alphabet::TentProduct(*n),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Family::CoupledQuadratic { n, .. } => *n,
            _ => 1,
        }
    }

    /// `K_i(λ)` for the coupled family, `λ` otherwise.
    pub fn k_values(&self, lambda: f64) -> Vec<f64> {
        match self {
            Family::CoupledQuadratic { n, k_step, .. } => (0..*n).map(|i| (1.0 + k_step * i as f64) * lambda).collect(),
            _ => vec![lambda],
        }
    }

    /// Unperturbed built-in map of the family.
    pub fn base_map(&self) -> Result<MapDefinition> {
        match self {
            Family::Quadratic => builtin_map("quadratic", &BTreeMap::new()),
            Family::Cubic => builtin_map("cubic", &BTreeMap::new()),
            Family::CoupledQuadratic { n, coupling, k_step } => {
                let mut o = BTreeMap::new();
                o.insert("n".to_string(), *n as f64);
                o.insert("c".to_string(), *coupling);
                o.insert("k_step".to_string(), *k_step);
                builtin_map("coupled_quadratic", &o)
            }
        }
    }
}

/// A built-in map recognised as a member of a horseshoe family.
#[derive(Clone)]
pub struct HorseshoeModel {
    pub family: Family,
    pub map: MapDefinition,
    /// Bound on the perturbation, when the map carries one.
    pub beta: Option<f64>,
}

impl HorseshoeModel {
    pub fn from_map(map: &MapDefinition) -> Option<Self> {
        let (family, beta) = match map.name.as_str() {
            "quadratic" => (Family::Quadratic, None),
            "cubic" => (Family::Cubic, None),
            "perturbed_quadratic" => {
                let b = Bump { gamma: map.param("gamma")?, width: map.param("width")? };
                (Family::Quadratic, Some(quadratic_bump(b).beta))
            }
            "perturbed_cubic" => (Family::Cubic, Some(2.0 * map.param("amplitude")?.abs() * 1.05)),
            "coupled_quadratic" => {
                let n = map.param("n")? as usize;
                let c = map.param("c")?;
                let f = Family::CoupledQuadratic { n, coupling: c, k_step: map.param("k_step")? };
                // ring coupling: each row of D_x g carries c/2 twice
                let beta = if n > 1 { c.abs() * 1.05 } else { 0.0 };
                (f, Some(beta))
            }
            _ => return None,
        };
        Some(Self { family, map: map.clone(), beta })
    }

    pub fn scales(&self, lambda: f64) -> Vec<f64> {
        self.family.k_values(lambda).into_iter().map(|k| k.max(0.0).sqrt()).collect()
    }

    pub fn partition(&self, lambda: f64) -> Vec<Cell> {
        partition(self.family, lambda)
    }

    pub fn j_box(&self, lambda: f64) -> Cell {
        let s = self.scales(lambda);
        Cell::new(s.iter().map(|v| -2.0 * v).collect(), s.iter().map(|v| 2.0 * v).collect())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.family.alphabet()
    }
}

pub fn partition(family: Family, lambda: f64) -> Vec<Cell> {
    let s: Vec<f64> = family.k_values(lambda).into_iter().map(|k| k.max(0.0).sqrt()).collect();
    match family {
        Family::Quadratic => vec![Cell::interval(-2.0 * s[0], -0.5 * s[0]), Cell::interval(0.5 * s[0], 2.0 * s[0])],
        Family::Cubic => {
            let s = s[0];
            vec![
                Cell::interval(-2.0 * s, -2.5 * s / 3.0),
                Cell::interval(-s / 3.0, s / 3.0),
                Cell::interval(2.5 * s / 3.0, 2.0 * s),
            ]
        }
        Family::CoupledQuadratic { n, .. } => (0..1usize << n)
            .map(|bits| {
                let lo = (0..n).map(|i| if (bits >> i) & 1 == 1 { 0.5 * s[i] } else { -2.0 * s[i] }).collect();
                let hi = (0..n).map(|i| if (bits >> i) & 1 == 1 { 2.0 * s[i] } else { -0.5 * s[i] }).collect();
                Cell::new(lo, hi)
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    AnalyticPass,
    SampledPass,
    Fail,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        *self != Verdict::Fail
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::AnalyticPass => "analytic_pass",
            Verdict::SampledPass => "sampled_pass",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimateCheck {
    pub analytic: bool,
    pub sampled: bool,
    pub verdict: Verdict,
}

impl EstimateCheck {
    fn new(analytic: bool, sampled: bool) -> Self {
        let verdict = if analytic {
            Verdict::AnalyticPass
        } else if sampled {
            Verdict::SampledPass
        } else {
            Verdict::Fail
        };
        Self { analytic, sampled, verdict }
    }
}

#[derive(Clone, Debug)]
pub struct HorseshoeCertificate {
    pub family: Family,
    pub beta: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Keyed by estimate id `a` to `e`.
    pub checks: BTreeMap<char, EstimateCheck>,
    pub box_j: Cell,
    pub cells: Vec<Cell>,
}

impl HorseshoeCertificate {
    pub fn passed(&self) -> bool {
        self.checks.len() == 5 && self.checks.values().all(|c| c.verdict.passed())
    }

    pub fn to_json(&self) -> Value {
        let checks: serde_json::Map<String, Value> = self
            .checks
            .iter()
            .map(|(k, c)| {
                (
                    k.to_string(),
                    json!({"verdict": c.verdict.as_str(), "analytic": c.analytic, "sampled": c.sampled}),
                )
            })
            .collect();
        json!({
            "family": self.family.as_str(),
            "beta": self.beta,
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "passed": self.passed(),
            "checks": checks,
            "box_j": {"lo": self.box_j.lo, "hi": self.box_j.hi},
            "cells": self.cells.iter().map(|c| json!({"lo": c.lo, "hi": c.hi})).collect::<Vec<_>>(),
        })
    }
}

/// Closed-form estimates `a` to `e`.
pub fn analytic_estimates(family: Family, beta: f64, lambda0: f64, lambda1: f64) -> [bool; 5] {
    match family {
        Family::Quadratic => {
            let s = lambda1.max(0.0).sqrt();
            let a = lambda0 < -(1.0 + 6.0 * beta + beta * beta) / 4.0;
            let b = lambda1 > 4.0 * (beta + 2.0).powi(2);
            let c = s * (0.75 * s - beta / 2.0 - 2.0) - beta > 0.0 && -3.0 * s * s + 2.0 * s * (beta + 1.0) + beta < 0.0;
            let rho = (beta + 1.0) / 2.0;
            let d = rho + (lambda1 + beta + rho * rho).sqrt() < 2.0 * s;
            [a, b, c, d, b && c && d]
        }
        Family::Cubic => {
            let s = lambda1.max(0.0).sqrt();
            let a = lambda0 < -beta * beta / 12.0 - 1.0;
            let b = 2.0 * s * s - beta * s - 3.0 > 0.0 && 3.25 * lambda1 - 2.5 * beta * s - 3.0 > 0.0;
            let c = 6.875 * s.powi(3) / 27.0 - beta * (1.0 + 6.25 * s * s / 9.0) - 2.0 * s > 0.0;
            let d = 6.0 * lambda1.max(0.0).powf(1.5) - 4.0 * beta * lambda1 - 2.0 * s - beta > 0.0 && lambda1 > beta / 2.0;
            [a, b, c, d, b && c && d]
        }
        Family::CoupledQuadratic { n, .. } => {
            let nb = n as f64 * beta;
            let k0 = family.k_values(lambda0);
            let k1 = family.k_values(lambda1);
            let s: Vec<f64> = k1.iter().map(|k| k.max(0.0).sqrt()).collect();
            let s_min = s.iter().copied().fold(f64::INFINITY, f64::min);
            let s_sum: f64 = s.iter().sum();
            let k_max = k1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let a = k0.iter().all(|k| *k < -beta - (nb + 1.0).powi(2) / 4.0);
            let b = s_min - nb > 1.0;
            let c = (0..n).all(|i| {
                let others = 2.0 * (s_sum - s[i]);
                0.75 * s[i] * s[i] - 2.0 * s[i] - beta * (1.0 + s[i] / 2.0 + others) > 0.0
                    && -3.0 * s[i] * s[i] + 2.0 * s[i] + beta * (1.0 + 2.0 * s_sum) < 0.0
            });
            let rho = (nb + 1.0) / 2.0;
            let d = rho + (rho * rho + k_max + beta).sqrt() < 2.0 * s_min;
            let e = beta * (1.0 + s_sum) < 2.0 * s_min && b && c && d;
            [a, b, c, d, e]
        }
    }
}

const MARGIN: f64 = 1e-3;
const POINTS_PER_CELL: usize = 1000;

fn per_axis(dim: usize) -> usize {
    let mut m = (POINTS_PER_CELL as f64).powf(1.0 / dim as f64).ceil() as usize;
    while m.pow(dim as u32) < POINTS_PER_CELL {
        m += 1;
    }
    m.max(2)
}

fn grid(cell: &Cell, m: usize) -> Vec<State> {
    let n = cell.lo.len();
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            DVector::from_fn(n, |i, _| {
                let j = idx % m;
                idx /= m;
                let _ = i;
                cell.lo[i] + (cell.hi[i] - cell.lo[i]) * j as f64 / (m - 1) as f64
            })
        })
        .collect()
}

fn symbol_negative(family: Family, cell: usize, coordinate: usize) -> bool {
    match family {
        Family::Quadratic => cell == 1,
        Family::Cubic => cell == 1,
        Family::CoupledQuadratic { .. } => (cell >> coordinate) & 1 == 1,
    }
}

/// Worst-case size of a perturbation with bound `beta` at `x`.
fn perturbation_bound(family: Family, beta: f64, x: &State) -> f64 {
    match family {
        Family::Cubic => beta * (1.0 + 0.5 * x[0] * x[0]),
        _ => beta * (1.0 + x.norm()),
    }
}

/// Grid-sampled estimates `a` to `e` on `map`, robust to any further
/// perturbation of size `beta`.
pub fn sampled_estimates(family: Family, map: &MapDefinition, beta: f64, lambda0: f64, lambda1: f64) -> [bool; 5] {
    let n = family.dimension();
    if map.dimension != n {
        return [false; 5];
    }
    let s: Vec<f64> = family.k_values(lambda1).iter().map(|k| k.max(0.0).sqrt()).collect();
    let j = Cell::new(s.iter().map(|v| -2.0 * v).collect(), s.iter().map(|v| 2.0 * v).collect());
    let outer = Cell::new(s.iter().map(|v| -4.0 * v).collect(), s.iter().map(|v| 4.0 * v).collect());
    let cells = partition(family, lambda1);
    let m = per_axis(n);
    let eval = |l: f64, x: &State| map.eval(l, x).ok();
    let bound = |x: &State| perturbation_bound(family, beta, x);
    // how far `y` lies outside J, in the sup sense over coordinates
    let excess = |y: &State| (0..n).map(|i| y[i].abs() - j.hi[i]).fold(f64::NEG_INFINITY, f64::max);

    // (a) no recurrence at λ0
    let a = grid(&outer, 4 * m).iter().all(|x| match family {
        Family::Cubic => map.jacobian(lambda0, x).is_ok_and(|d| d[(0, 0)] - beta * x[0].abs() - 1.0 > MARGIN),
        _ => eval(lambda0, x).is_some_and(|y| (0..n).all(|i| y[i] - x[i] + bound(x) < -MARGIN)),
    });

    // (b) expansion with the symbol's orientation
    let b = cells.iter().enumerate().all(|(ci, cell)| {
        grid(cell, m).iter().all(|x| match map.jacobian(lambda1, x) {
            Err(_) => false,
            Ok(d) if n == 1 => {
                let v = d[(0, 0)];
                let slack = if family == Family::Cubic { beta * x[0].abs() } else { beta };
                v.abs() - slack > 1.0 + MARGIN && (v < 0.0) == symbol_negative(family, ci, 0)
            }
            Ok(d) => {
                let neg = (0..n).filter(|&i| symbol_negative(family, ci, i)).count();
                let det = d.determinant();
                linalg::smallest_singular_value(&d) - beta > 1.0 + MARGIN && (det < 0.0) == (neg % 2 == 1)
            }
        })
    });

    // (c) points of J outside the cells leave J
    let c = grid(&j, 4 * m)
        .iter()
        .filter(|x| !cells.iter().any(|cell| cell.contains(x, 0.0)))
        .all(|x| eval(lambda1, x).is_some_and(|y| excess(&y) > bound(x) + MARGIN));

    // (d) escape outside J for all λ in [λ0, λ1]
    let lambdas: Vec<f64> = (0..=40).map(|i| lambda0 + (lambda1 - lambda0) * i as f64 / 40.0).collect();
    let outside: Vec<State> = grid(&outer, 4 * m).into_iter().filter(|x| !j.contains(x, 0.0)).collect();
    let d = lambdas.iter().all(|&l| {
        outside.iter().all(|x| {
            let Some(y) = eval(l, x) else { return false };
            let r = bound(x);
            match family {
                Family::Cubic => x[0] * y[0] > 0.0 && y[0].abs() - r > x[0].abs() + MARGIN,
                _ => {
                    let i = (0..n)
                        .max_by(|&p, &q| (x[p].abs() / s[p]).total_cmp(&(x[q].abs() / s[q])))
                        .unwrap_or(0);
                    y[i] + r < -x[i].abs() - MARGIN
                }
            }
        })
    });

    // (e) each cell is stretched across J in every coordinate
    let e = cells.iter().all(|cell| {
        (0..n).all(|i| {
            let face = |v: f64| {
                let mut f = cell.clone();
                f.lo[i] = v;
                f.hi[i] = v;
                f
            };
            let images = |v: f64| -> Option<Vec<(f64, f64)>> {
                grid(&face(v), m).iter().map(|x| eval(lambda1, x).map(|y| (y[i], bound(x)))).collect()
            };
            let (Some(lo), Some(hi)) = (images(cell.lo[i]), images(cell.hi[i])) else { return false };
            let above = |v: &[(f64, f64)]| v.iter().all(|(y, r)| *y - r > j.hi[i] + MARGIN);
            let below = |v: &[(f64, f64)]| v.iter().all(|(y, r)| *y + r < j.lo[i] - MARGIN);
            (above(&lo) && below(&hi)) || (below(&lo) && above(&hi))
        })
    });
    [a, b, c, d, e]
}

/// Certificate for the unperturbed family map.
pub fn verify_horseshoe(family: Family, beta: f64, lambda0: f64, lambda1: f64) -> Result<HorseshoeCertificate> {
    let map = family.base_map()?;
    Ok(certificate(family, &map, beta, beta, lambda0, lambda1))
}

/// Certificate for `map` itself: analytic estimates with its bound `beta`,
/// sampled estimates on the map with no further perturbation.
pub fn verify_horseshoe_with_map(family: Family, map: &MapDefinition, beta: f64, lambda0: f64, lambda1: f64) -> HorseshoeCertificate {
    certificate(family, map, beta, 0.0, lambda0, lambda1)
}

fn certificate(family: Family, map: &MapDefinition, beta: f64, slack: f64, lambda0: f64, lambda1: f64) -> HorseshoeCertificate {
    let an = analytic_estimates(family, beta, lambda0, lambda1);
    let sa = sampled_estimates(family, map, slack, lambda0, lambda1);
    let checks = ['a', 'b', 'c', 'd', 'e']
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let mut c = EstimateCheck::new(an[i], sa[i]);
            // (b) is a bound on λ1 alone
            if *k == 'b' && !c.analytic {
                c.verdict = Verdict::Fail;
            }
            (*k, c)
        })
        .collect();
    let s: Vec<f64> = family.k_values(lambda1).iter().map(|k| k.max(0.0).sqrt()).collect();
    HorseshoeCertificate {
        family,
        beta,
        lambda0,
        lambda1,
        checks,
        box_j: Cell::new(s.iter().map(|v| -2.0 * v).collect(), s.iter().map(|v| 2.0 * v).collect()),
        cells: partition(family, lambda1),
    }
}

/// Smallest `λ1` and largest `λ0` (rounded outward by `pad`) satisfying the
/// closed-form estimates for `beta`.
pub fn analytic_bounds(family: Family, beta: f64, pad: f64) -> (f64, f64) {
    let mut hi = 1.0;
    while !analytic_estimates(family, beta, f64::NEG_INFINITY, hi)[4] {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if analytic_estimates(family, beta, f64::NEG_INFINITY, mid)[4] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut l0 = -1.0;
    while !analytic_estimates(family, beta, l0, hi)[0] {
        l0 *= 2.0;
    }
    let mut a = l0;
    let mut b = l0 / 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if analytic_estimates(family, beta, mid, hi)[0] {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a - pad, hi + pad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_beta_one() {
        let c = verify_horseshoe(Family::Quadratic, 1.0, -2.1, 36.1).unwrap();
        assert!(c.passed(), "{:?}", c.checks);
        assert!(c.checks.values().all(|v| v.analytic));
    }

    #[test]
    fn quadratic_small_lambda1_fails_b() {
        let c = verify_horseshoe(Family::Quadratic, 1.0, -2.1, 10.0).unwrap();
        assert!(!c.checks[&'b'].analytic);
        assert!(!c.passed());
    }

    #[test]
    fn cubic_lambda0_bound() {
        assert!(analytic_estimates(Family::Cubic, 1.0, -1.2, 30.0)[0]);
        assert!(!analytic_estimates(Family::Cubic, 1.0, -1.0, 30.0)[0]);
        let c = verify_horseshoe(Family::Cubic, 1.0, -1.2, 30.0).unwrap();
        assert!(c.passed(), "{:?}", c.checks);
    }

    #[test]
    fn cubic_twenty_fails_c() {
        assert!(!analytic_estimates(Family::Cubic, 1.0, -1.2, 20.0)[2]);
    }

    #[test]
    fn coupled_decoupled_passes() {
        let f = Family::CoupledQuadratic { n: 2, coupling: 0.0, k_step: 0.1 };
        let c = verify_horseshoe(f, 0.1, -3.0, 40.0).unwrap();
        assert!(c.passed(), "{:?}", c.checks);
        assert_eq!(c.cells.len(), 4);
    }

    #[test]
    fn bounds_are_tight() {
        let (l0, l1) = analytic_bounds(Family::Quadratic, 1.0, 0.0);
        assert!((l1 - 36.0).abs() < 1e-6, "{l1}");
        assert!((l0 + 2.0).abs() < 1e-6, "{l0}");
    }
}
