//! Entry and exit orbits on the boundary slices of a parameter slab, the
//! cascade prediction they imply, and horseshoe certificates.

pub mod horseshoe;

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::continuation::{continue_component, detect_cascades_with, BoundedFlag, ComponentTrace, ContinuationConfig, Termination};
use crate::error::{Error, Result};
use crate::maps::{MapDefinition, State};
use crate::orbits::symbolic::seed_orbits_symbolic;
use crate::orbits::{dedup_orbits, find_orbit, NewtonOptions, PeriodicOrbit};

pub use horseshoe::{
    analytic_bounds, analytic_estimates, partition, sampled_estimates, verify_horseshoe, verify_horseshoe_with_map,
    EstimateCheck, Family, HorseshoeCertificate, HorseshoeModel, Verdict,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Enumeration {
    /// Symbolic seeding where the horseshoe certificate holds, multi-start otherwise.
    Auto,
    Symbolic,
    MultiStart { per_axis: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusConfig {
    pub enumeration: Enumeration,
    /// Starts per axis for multi-start enumeration under `Auto`.
    pub per_axis: usize,
    pub seed: u64,
    /// Perturbation bound used for the certificate; defaults to the map's.
    pub beta: Option<f64>,
    pub newton: NewtonOptions,
    pub dedup_tol: f64,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self {
            enumeration: Enumeration::Auto,
            per_axis: 200,
            seed: 0,
            beta: None,
            newton: NewtonOptions::default(),
            dedup_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryCensus {
    pub lambda0: f64,
    pub lambda1: f64,
    pub max_period: usize,
    pub entry_orbits: Vec<PeriodicOrbit>,
    pub exit_orbits: Vec<PeriodicOrbit>,
    pub flip_orbits_on_boundary: Vec<PeriodicOrbit>,
    pub nonhyperbolic_on_boundary: Vec<PeriodicOrbit>,
    /// Whether each side was enumerated by a complete method.
    pub complete: (bool, bool),
    pub certificate: Option<HorseshoeCertificate>,
}

fn orbits_json(v: &[PeriodicOrbit]) -> Value {
    Value::Array(v.iter().map(|o| o.to_json()).collect())
}

impl BoundaryCensus {
    pub fn in_count(&self) -> usize {
        self.entry_orbits.len()
    }

    pub fn out_count(&self) -> usize {
        self.exit_orbits.len()
    }

    /// Orbits at `λ0` and at `λ1`, all kinds.
    pub fn side_counts(&self) -> (usize, usize) {
        let all = self.entry_orbits.iter().chain(&self.exit_orbits).chain(&self.flip_orbits_on_boundary);
        let mut c = (0, 0);
        for o in all {
            if o.lambda == self.lambda0 {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        c
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "max_period": self.max_period,
            "entries": orbits_json(&self.entry_orbits),
            "exits": orbits_json(&self.exit_orbits),
            "flip": orbits_json(&self.flip_orbits_on_boundary),
            "complete": {"lambda0": self.complete.0, "lambda1": self.complete.1},
            "certificate": self.certificate.as_ref().map(|c| c.to_json()),
        })
    }
}

/// Whether a boundary orbit is an entry orbit of the slab.
pub fn is_entry(orbit: &PeriodicOrbit, lambda0: f64, lambda1: f64) -> bool {
    lambda0 != lambda1
        && match orbit.index() {
            Some(1) => orbit.lambda == lambda0,
            Some(-1) => orbit.lambda == lambda1,
            _ => false,
        }
}

fn multistart(
    map: &MapDefinition,
    lambda: f64,
    max_period: usize,
    per_axis: usize,
    seed: u64,
    opts: &NewtonOptions,
    tol: f64,
) -> Vec<PeriodicOrbit> {
    let n = map.dimension;
    let (lo, hi) = map
        .spatial_box
        .clone()
        .unwrap_or_else(|| (vec![-10.0; n], vec![10.0; n]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = per_axis.pow(n as u32);
    let starts: Vec<State> = (0..total)
        .map(|mut idx| {
            DVector::from_fn(n, |i, _| {
                let j = idx % per_axis;
                idx /= per_axis;
                let t = (j as f64 + rng.gen_range(0.0..1.0)) / per_axis as f64;
                lo[i] + (hi[i] - lo[i]) * t
            })
        })
        .collect();
    let mut found: Vec<PeriodicOrbit> = (1..=max_period)
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut local: Vec<PeriodicOrbit> = Vec::new();
            for x in &starts {
                if let Ok(o) = find_orbit(map, lambda, x, p, opts) {
                    if o.period == p && !local.iter().any(|q| crate::orbits::hausdorff_distance(q, &o) < tol) {
                        local.push(o);
                    }
                }
            }
            local
        })
        .collect();
    found.sort_by(|a, b| a.period.cmp(&b.period).then(a.canonical().points[0][0].total_cmp(&b.canonical().points[0][0])));
    dedup_orbits(found, tol)
}

fn symbolic(model: &HorseshoeModel, lambda: f64, max_period: usize, opts: &NewtonOptions) -> Result<Vec<PeriodicOrbit>> {
    let cells = model.partition(lambda);
    let mut all = Vec::new();
    for k in 1..=max_period {
        all.extend(seed_orbits_symbolic(&model.map, lambda, k, &cells, opts)?);
    }
    Ok(all)
}

/// Orbits at the low end of a certified slab: none for the quadratic-type
/// families, the fixed point at the origin for the cubic family.
fn certified_low_side(model: &HorseshoeModel, lambda0: f64, opts: &NewtonOptions) -> Result<Vec<PeriodicOrbit>> {
    match model.family {
        Family::Cubic => Ok(vec![find_orbit(&model.map, lambda0, &DVector::zeros(1), 1, opts)?]),
        _ => Ok(vec![]),
    }
}

fn enumerate_side(
    map: &MapDefinition,
    lambda: f64,
    low_side: bool,
    max_period: usize,
    cfg: &CensusConfig,
    model: Option<&HorseshoeModel>,
    certificate: Option<&HorseshoeCertificate>,
) -> Result<(Vec<PeriodicOrbit>, bool)> {
    let ms = |per_axis, seed| multistart(map, lambda, max_period, per_axis, seed, &cfg.newton, cfg.dedup_tol);
    match cfg.enumeration {
        Enumeration::MultiStart { per_axis, seed } => Ok((ms(per_axis, seed), false)),
        Enumeration::Symbolic => {
            let model = model.ok_or_else(|| Error::BadParameter(format!("{} has no symbolic model", map.name)))?;
            if low_side {
                Ok((certified_low_side(model, lambda, &cfg.newton)?, true))
            } else {
                Ok((symbolic(model, lambda, max_period, &cfg.newton)?, true))
            }
        }
        Enumeration::Auto => match (model, certificate) {
            (Some(m), Some(c)) if low_side && c.checks[&'a'].verdict.passed() => {
                Ok((certified_low_side(m, lambda, &cfg.newton)?, true))
            }
            (Some(m), Some(c)) if !low_side && c.passed() => Ok((symbolic(m, lambda, max_period, &cfg.newton)?, true)),
            _ => Ok((ms(cfg.per_axis, cfg.seed), false)),
        },
    }
}

/// Enumerates orbits of period at most `max_period` on both boundary slices
/// and sorts them into entry, exit and flip orbits.
pub fn boundary_census(map: &MapDefinition, lambda0: f64, lambda1: f64, max_period: usize, cfg: &CensusConfig) -> Result<BoundaryCensus> {
    if !(lambda0 < lambda1) {
        return Err(Error::Precondition(format!("need lambda0 < lambda1, got {lambda0} and {lambda1}")));
    }
    if max_period == 0 {
        return Err(Error::BadParameter("max_period must be positive".into()));
    }
    let model = HorseshoeModel::from_map(map);
    let certificate = model.as_ref().map(|m| {
        let beta = cfg.beta.or(m.beta).unwrap_or(1.0).max(1e-12);
        verify_horseshoe_with_map(m.family, &m.map, beta, lambda0, lambda1)
    });
    let (low, c0) = enumerate_side(map, lambda0, true, max_period, cfg, model.as_ref(), certificate.as_ref())?;
    let (high, c1) = enumerate_side(map, lambda1, false, max_period, cfg, model.as_ref(), certificate.as_ref())?;
    let mut census = BoundaryCensus {
        lambda0,
        lambda1,
        max_period,
        entry_orbits: vec![],
        exit_orbits: vec![],
        flip_orbits_on_boundary: vec![],
        nonhyperbolic_on_boundary: vec![],
        complete: (c0, c1),
        certificate,
    };
    for o in low.into_iter().chain(high) {
        if !o.hyperbolic() {
            census.nonhyperbolic_on_boundary.push(o);
        } else if o.is_flip() {
            census.flip_orbits_on_boundary.push(o);
        } else if is_entry(&o, lambda0, lambda1) {
            census.entry_orbits.push(o);
        } else {
            census.exit_orbits.push(o);
        }
    }
    if let Some(o) = census.nonhyperbolic_on_boundary.first() {
        return Err(Error::InvalidBoundary(format!(
            "non-hyperbolic period-{} orbit at lambda = {}",
            o.period, o.lambda
        )));
    }
    Ok(census)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionCase {
    /// One of IN, OUT is empty: every boundary nonflip orbit heads a cascade.
    OneToOne,
    /// At least `|K - J|` cascades.
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Entry,
    Exit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub case: PredictionCase,
    pub in_count: usize,
    pub out_count: usize,
    pub predicted: usize,
    pub attributed_to: Side,
    /// Boundary orbits of the attributed side, by period.
    pub per_period: BTreeMap<usize, usize>,
    pub truncated_at: usize,
}

impl Prediction {
    pub fn to_json(&self) -> Value {
        json!({
            "case": match self.case { PredictionCase::OneToOne => "C0", PredictionCase::AtLeast => "CK" },
            "in": self.in_count,
            "out": self.out_count,
            "predicted_cascades": self.predicted,
            "attributed_to": match self.attributed_to { Side::Entry => "entry", Side::Exit => "exit" },
            "per_period": self.per_period.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "truncated_at_period": self.truncated_at,
        })
    }
}

/// Cascade count implied by the census, per stem period up to the truncation.
pub fn predict_cascades(census: &BoundaryCensus) -> Result<Prediction> {
    let k = census.in_count();
    let j = census.out_count();
    if k == j {
        return Err(Error::NoPrediction(k));
    }
    let (side, orbits) = if k > j { (Side::Entry, &census.entry_orbits) } else { (Side::Exit, &census.exit_orbits) };
    let mut per_period = BTreeMap::new();
    for o in orbits {
        *per_period.entry(o.period).or_insert(0) += 1;
    }
    Ok(Prediction {
        case: if k == 0 || j == 0 { PredictionCase::OneToOne } else { PredictionCase::AtLeast },
        in_count: k,
        out_count: j,
        predicted: k.abs_diff(j),
        attributed_to: side,
        per_period,
        truncated_at: census.max_period,
    })
}

/// Whether the smallest period on the component equals the seed's period.
pub fn stem_period_check(trace: &ComponentTrace, seed: &PeriodicOrbit) -> bool {
    trace.min_period() == seed.period
}

/// Whether every doubling of the cascades lies in `[λ0, λ1]`.
pub fn cascade_inside(pd_lambdas: &[f64], lambda0: f64, lambda1: f64) -> bool {
    pd_lambdas.iter().all(|l| *l >= lambda0 && *l <= lambda1)
}

#[derive(Clone, Debug)]
pub struct ComponentSummary {
    pub seed_period: usize,
    pub seed_lambda: f64,
    pub start_termination: Termination,
    pub termination: Termination,
    pub cascades: usize,
    pub bounded: bool,
}

#[derive(Clone, Debug)]
pub struct OffOnOffReport {
    /// Orbits found at the outer parameters `Λ1` and `Λ3`.
    pub outer_orbits: usize,
    pub left: BoundaryCensus,
    pub right: BoundaryCensus,
    pub components: Vec<ComponentSummary>,
    pub bounded_components: usize,
    /// Upper bound on unbounded cascades.
    pub unbounded_bound: usize,
}

impl OffOnOffReport {
    pub fn to_json(&self) -> Value {
        json!({
            "outer_orbits": self.outer_orbits,
            "unbounded_cascade_bound": self.unbounded_bound,
            "bounded_components": self.bounded_components,
            "components": self.components.iter().map(|c| json!({
                "seed_period": c.seed_period,
                "seed_lambda": c.seed_lambda,
                "start_termination": c.start_termination.as_str(),
                "termination": c.termination.as_str(),
                "cascades": c.cascades,
                "bounded": c.bounded,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Censuses on `[Λ1, Λ2]` and `[Λ2, Λ3]`, and continuation of up to
/// `samples` nonflip saddles found at `Λ2` within `[Λ1, Λ3]`.
pub fn off_on_off_census(
    map: &MapDefinition,
    lambdas: (f64, f64, f64),
    max_period: usize,
    cfg: &CensusConfig,
    cont: &ContinuationConfig,
    samples: usize,
) -> Result<OffOnOffReport> {
    let (l1, l2, l3) = lambdas;
    if !(l1 < l2 && l2 < l3) {
        return Err(Error::Precondition(format!("need L1 < L2 < L3, got {l1}, {l2}, {l3}")));
    }
    let left = boundary_census(map, l1, l2, max_period, cfg)?;
    let right = boundary_census(map, l2, l3, max_period, cfg)?;
    let outer = left.side_counts().0 + right.side_counts().1;
    let saddles: Vec<PeriodicOrbit> = left
        .entry_orbits
        .iter()
        .chain(&left.exit_orbits)
        .filter(|o| o.lambda == l2 && o.class.dim_u > 0)
        .take(samples)
        .cloned()
        .collect();
    let components: Vec<ComponentSummary> = saddles
        .par_iter()
        .filter_map(|s| continue_component(map, s, (l1, l3), cont).ok())
        .map(|t| {
            let cascades = detect_cascades_with(&t, cont.min_doublings);
            ComponentSummary {
                seed_period: t.seed.period,
                seed_lambda: t.seed.lambda,
                start_termination: t.start_termination,
                termination: t.termination,
                bounded: cascades.iter().any(|c| c.bounded_flag == BoundedFlag::BoundedEnd),
                cascades: cascades.len(),
            }
        })
        .collect();
    let bounded_components = components.iter().filter(|c| c.bounded).count();
    Ok(OffOnOffReport { outer_orbits: outer, left, right, components, bounded_components, unbounded_bound: outer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::builtin_map;

    fn quad() -> MapDefinition {
        builtin_map("quadratic", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn quadratic_census_period_three() {
        let c = boundary_census(&quad(), -2.1, 36.1, 3, &CensusConfig::default()).unwrap();
        assert_eq!(c.in_count(), 2);
        assert_eq!(c.out_count(), 0);
        // R, LR, LLR
        assert_eq!(c.flip_orbits_on_boundary.len(), 3);
        assert_eq!(c.complete, (true, true));
        let p = predict_cascades(&c).unwrap();
        assert_eq!(p.case, PredictionCase::OneToOne);
        assert_eq!(p.predicted, 2);
    }

    #[test]
    fn cubic_census_has_one_exit() {
        let cubic = builtin_map("cubic", &BTreeMap::new()).unwrap();
        let c = boundary_census(&cubic, -1.2, 30.0, 1, &CensusConfig::default()).unwrap();
        assert_eq!(c.out_count(), 1);
        assert_eq!(c.exit_orbits[0].lambda, -1.2);
        assert_eq!(c.in_count(), 2);
    }

    #[test]
    fn entry_rule_swaps_with_sides() {
        let c = boundary_census(&quad(), -2.1, 36.1, 1, &CensusConfig::default()).unwrap();
        let o = &c.entry_orbits[0];
        assert!(is_entry(o, -2.1, 36.1));
        assert!(!is_entry(o, 36.1, -2.1));
    }

    #[test]
    fn equal_counts_give_no_prediction() {
        let c = BoundaryCensus {
            lambda0: 0.0,
            lambda1: 1.0,
            max_period: 1,
            entry_orbits: vec![],
            exit_orbits: vec![],
            flip_orbits_on_boundary: vec![],
            nonhyperbolic_on_boundary: vec![],
            complete: (true, true),
            certificate: None,
        };
        assert!(matches!(predict_cascades(&c), Err(Error::NoPrediction(0))));
    }

    #[test]
    fn degenerate_slab_rejected() {
        let r = off_on_off_census(&quad(), (0.0, 0.0, 1.0), 1, &CensusConfig::default(), &ContinuationConfig::default(), 1);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
