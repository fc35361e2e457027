//! Attracting-set sweeps over a parameter grid (bifurcation diagram data).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{MapDefinition, State};
use crate::orbits::{find_orbit, NewtonOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialPolicy {
    /// Start next to a fixed point found by Newton from `x0`.
    FixedPointSeed,
    /// Start each parameter from the last state of the previous one.
    CarryForward,
    /// Start every parameter from `x0`.
    Fixed,
}

impl InitialPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed_point_seed" => Some(Self::FixedPointSeed),
            "carry_forward" => Some(Self::CarryForward),
            "fixed" => Some(Self::Fixed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub count: usize,
    pub transient_iterations: usize,
    pub record_iterations: usize,
    pub policy: InitialPolicy,
    pub x0: State,
    pub escape_radius: f64,
}

impl SweepConfig {
    pub fn new(lambda_min: f64, lambda_max: f64, count: usize, x0: State) -> Self {
        Self {
            lambda_min,
            lambda_max,
            count,
            transient_iterations: 1000,
            record_iterations: 200,
            policy: InitialPolicy::Fixed,
            x0,
            escape_radius: 1e6,
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| self.lambda_min + (self.lambda_max - self.lambda_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepData {
    /// `(λ, coordinate, value)`, ordered by λ, then coordinate.
    pub rows: Vec<(f64, usize, f64)>,
    /// `(λ, escaped)` for every grid parameter.
    pub escapes: Vec<(f64, bool)>,
}

impl SweepData {
    pub fn escape_count(&self) -> usize {
        self.escapes.iter().filter(|e| e.1).count()
    }

    pub fn all_escaped(&self) -> bool {
        !self.escapes.is_empty() && self.escape_count() == self.escapes.len()
    }
}

/// Iterates the transient and records the orbit; `None` on escape.
fn run(map: &MapDefinition, lambda: f64, x0: &State, cfg: &SweepConfig) -> Option<(Vec<State>, State)> {
    let mut x = x0.clone();
    let step = |x: &State| -> Option<State> {
        let y = map.eval(lambda, x).ok()?;
        (y.norm() <= cfg.escape_radius).then(|| map.phase_space.reduce(&y))
    };
    for _ in 0..cfg.transient_iterations {
        x = step(&x)?;
    }
    let mut rec = Vec::with_capacity(cfg.record_iterations);
    for _ in 0..cfg.record_iterations {
        x = step(&x)?;
        rec.push(x.clone());
    }
    Some((rec, x))
}

fn start_for(map: &MapDefinition, lambda: f64, cfg: &SweepConfig) -> State {
    match cfg.policy {
        InitialPolicy::FixedPointSeed => match find_orbit(map, lambda, &cfg.x0, 1, &NewtonOptions::default()) {
            Ok(o) if o.period == 1 => o.points[0].add_scalar(1e-6),
            _ => cfg.x0.clone(),
        },
        _ => cfg.x0.clone(),
    }
}

fn rows_for(lambda: f64, rec: &[State]) -> Vec<(f64, usize, f64)> {
    let n = rec.first().map_or(0, |x| x.len());
    (0..n).flat_map(|i| rec.iter().map(move |x| (lambda, i, x[i]))).collect()
}

pub fn attracting_set_sweep(map: &MapDefinition, cfg: &SweepConfig) -> Result<SweepData> {
    if cfg.count < 2 {
        return Err(Error::BadParameter("sweep grid needs at least 2 points".into()));
    }
    if cfg.x0.len() != map.dimension {
        return Err(Error::BadParameter(format!("x0 has dimension {}, map has {}", cfg.x0.len(), map.dimension)));
    }
    if !(cfg.lambda_min.is_finite() && cfg.lambda_max.is_finite()) {
        return Err(Error::BadParameter("parameter range must be finite".into()));
    }
    let lambdas = cfg.lambdas();
    let results: Vec<Option<Vec<State>>> = match cfg.policy {
        InitialPolicy::CarryForward => {
            let mut x = cfg.x0.clone();
            lambdas
                .iter()
                .map(|&l| {
                    let r = run(map, l, &x, cfg);
                    match r {
                        Some((rec, last)) => {
                            x = last;
                            Some(rec)
                        }
                        None => {
                            x = cfg.x0.clone();
                            None
                        }
                    }
                })
                .collect()
        }
        _ => lambdas
            .par_iter()
            .map(|&l| run(map, l, &start_for(map, l, cfg), cfg).map(|r| r.0))
            .collect(),
    };
    let mut data = SweepData::default();
    for (l, r) in lambdas.iter().zip(results) {
        data.escapes.push((*l, r.is_none()));
        if let Some(rec) = r {
            data.rows.extend(rows_for(*l, &rec));
        }
    }
    Ok(data)
}

/// Distinct values among `values` at resolution `tol`.
pub fn cluster_count(values: &[f64], tol: f64) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < tol);
    v.len()
}
