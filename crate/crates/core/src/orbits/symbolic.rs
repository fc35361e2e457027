use nalgebra::DVector;
use rayon::prelude::*;

use super::{dedup_orbits, find_orbit, NewtonOptions, PeriodicOrbit};
use crate::combinatorics::lyndon_words;
use crate::error::{Error, Result};
use crate::linalg;
use crate::maps::{MapDefinition, State};

/// Axis-aligned box in phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self { lo: vec![a], hi: vec![b] }
    }

    pub fn center(&self) -> State {
        DVector::from_fn(self.lo.len(), |i, _| 0.5 * (self.lo[i] + self.hi[i]))
    }

    pub fn contains(&self, x: &State, slack: f64) -> bool {
        (0..self.lo.len()).all(|i| {
            let w = (self.hi[i] - self.lo[i]).abs();
            x[i] >= self.lo[i] - slack * w && x[i] <= self.hi[i] + slack * w
        })
    }

    fn clamp(&self, x: &mut State, slack: f64) {
        for i in 0..self.lo.len() {
            let w = self.hi[i] - self.lo[i];
            x[i] = x[i].clamp(self.lo[i] - slack * w, self.hi[i] + slack * w);
        }
    }

    pub fn disjoint(&self, other: &Cell) -> bool {
        (0..self.lo.len()).any(|i| self.hi[i] < other.lo[i] || other.hi[i] < self.lo[i])
    }
}

/// Solves `F(λ, z) = target` for `z` near `cell`.
fn inverse_branch(map: &MapDefinition, lambda: f64, cell: &Cell, target: &State, start: &State) -> Option<State> {
    let mut z = start.clone();
    for _ in 0..60 {
        let lin = map.linearize(lambda, &z).ok()?;
        let r = map.phase_space.difference(&lin.value, target);
        if r.norm() <= 1e-14 * (1.0 + target.norm()) {
            return Some(z);
        }
        let dz = linalg::solve(&lin.jacobian, &(-r))?;
        z += &dz;
        cell.clamp(&mut z, 0.5);
        if dz.norm() <= 1e-15 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    cell.contains(&z, 0.5).then_some(z)
}

fn word_label(w: &[u8]) -> String {
    w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("")
}

fn seed_for_word(map: &MapDefinition, lambda: f64, word: &[u8], partition: &[Cell], opts: &NewtonOptions) -> Option<PeriodicOrbit> {
    let k = word.len();
    let rounds = 60usize.div_ceil(k).max(2);
    let mut pts: Vec<State> = word.iter().map(|&s| partition[s as usize].center()).collect();
    for _ in 0..rounds {
        for i in (0..k).rev() {
            let target = pts[(i + 1) % k].clone();
            let cell = &partition[word[i] as usize];
            pts[i] = inverse_branch(map, lambda, cell, &target, &pts[i])?;
        }
    }
    let orbit = find_orbit(map, lambda, &pts[0], k, opts).ok()?;
    if orbit.period != k {
        return None;
    }
    let inside = (0..k).all(|i| partition[word[i] as usize].contains(&orbit.points[i], 1e-9));
    inside.then_some(orbit)
}

/// All least-period-`k` orbits with itineraries through the cells of
/// `partition`, one per cyclic word.
pub fn seed_orbits_symbolic(
    map: &MapDefinition,
    lambda: f64,
    k: usize,
    partition: &[Cell],
    opts: &NewtonOptions,
) -> Result<Vec<PeriodicOrbit>> {
    if k == 0 {
        return Err(Error::BadParameter("period must be positive".into()));
    }
    if partition.len() < 2 || partition.len() > 255 {
        return Err(Error::BadParameter("partition needs 2..=255 cells".into()));
    }
    for (i, a) in partition.iter().enumerate() {
        if a.lo.len() != map.dimension || a.hi.len() != map.dimension {
            return Err(Error::BadParameter("cell dimension mismatch".into()));
        }
        if partition[i + 1..].iter().any(|b| !a.disjoint(b)) {
            return Err(Error::BadParameter("partition cells must be disjoint".into()));
        }
    }
    let words = lyndon_words(partition.len(), k);
    let results: Vec<(Vec<u8>, Option<PeriodicOrbit>)> = words
        .into_par_iter()
        .map(|w| {
            let o = seed_for_word(map, lambda, &w, partition, opts);
            (w, o)
        })
        .collect();
    let failed: Vec<String> = results.iter().filter(|(_, o)| o.is_none()).map(|(w, _)| word_label(w)).collect();
    if !failed.is_empty() {
        return Err(Error::IncompleteEnumeration(failed));
    }
    let orbits: Vec<PeriodicOrbit> = results.into_iter().filter_map(|(_, o)| o).collect();
    let n = orbits.len();
    let unique = dedup_orbits(orbits, 1e-6);
    if unique.len() != n {
        return Err(Error::InternalError("distinct itineraries produced the same orbit".into()));
    }
    Ok(unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::builtin_map;
    use std::collections::BTreeMap;

    fn quadratic_cells(lambda: f64) -> Vec<Cell> {
        let s = lambda.sqrt();
        vec![Cell::interval(-2.0 * s, -0.5 * s), Cell::interval(0.5 * s, 2.0 * s)]
    }

    #[test]
    fn quadratic_fixed_points_at_sixteen() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        let mut o = seed_orbits_symbolic(&q, 16.0, 1, &quadratic_cells(16.0), &NewtonOptions::default()).unwrap();
        o.sort_by(|a, b| a.points[0][0].total_cmp(&b.points[0][0]));
        let r = 65f64.sqrt();
        assert!((o[0].points[0][0] - (-1.0 - r) / 2.0).abs() < 1e-12);
        assert!((o[1].points[0][0] - (-1.0 + r) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_period_three_at_sixteen() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        let o = seed_orbits_symbolic(&q, 16.0, 3, &quadratic_cells(16.0), &NewtonOptions::default()).unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(o.iter().map(|x| x.points.len()).sum::<usize>(), 6);
    }

    #[test]
    fn cubic_three_fixed_points() {
        let c = builtin_map("cubic", &BTreeMap::new()).unwrap();
        let s = 30f64.sqrt();
        let cells = vec![
            Cell::interval(-2.0 * s, -2.5 * s / 3.0),
            Cell::interval(-s / 3.0, s / 3.0),
            Cell::interval(2.5 * s / 3.0, 2.0 * s),
        ];
        let o = seed_orbits_symbolic(&c, 30.0, 1, &cells, &NewtonOptions::default()).unwrap();
        assert_eq!(o.len(), 3);
    }

    #[test]
    fn failing_words_are_reported() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        // at λ = 0.5 the cells do not form a horseshoe
        let r = seed_orbits_symbolic(&q, 0.5, 2, &quadratic_cells(16.0), &NewtonOptions::default());
        assert!(matches!(r, Err(Error::IncompleteEnumeration(w)) if !w.is_empty()));
    }

    #[test]
    fn overlapping_partition_rejected() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        let cells = vec![Cell::interval(-1.0, 1.0), Cell::interval(0.5, 2.0)];
        assert!(seed_orbits_symbolic(&q, 16.0, 1, &cells, &NewtonOptions::default()).is_err());
    }
}
