use num_traits::ToPrimitive;

use super::{cubic_nonflip_count, gamma_1, gamma_n};
use crate::census::{Family, HorseshoeModel};
use crate::error::{Error, Result};
use crate::maps::MapDefinition;
use crate::orbits::symbolic::seed_orbits_symbolic;
use crate::orbits::NewtonOptions;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrosscheckReport {
    pub k: usize,
    pub nonflip_numeric: u64,
    pub nonflip_symbolic: u64,
    pub flip_numeric: u64,
    pub matched: bool,
}

/// Numerically classified nonflip period-`k` orbits at a horseshoe parameter
/// against the symbolic count of the family.
pub fn numeric_census_crosscheck(map: &MapDefinition, lambda: f64, k: usize) -> Result<CrosscheckReport> {
    let model = HorseshoeModel::from_map(map)
        .ok_or_else(|| Error::BadParameter(format!("{} is not a horseshoe family", map.name)))?;
    let orbits = seed_orbits_symbolic(map, lambda, k, &model.partition(lambda), &NewtonOptions::default())?;
    let nonflip_numeric = orbits.iter().filter(|o| o.is_nonflip()).count() as u64;
    let flip_numeric = orbits.len() as u64 - nonflip_numeric;
    let nonflip_symbolic = match model.family {
        Family::Quadratic => gamma_1(k as u64)?
            .to_u64()
            .ok_or_else(|| Error::TooLarge(format!("Γ(1,{k}) exceeds 64 bits")))?,
        Family::Cubic => cubic_nonflip_count(k)?,
        Family::CoupledQuadratic { n, .. } => gamma_n(n, k)?,
    };
    if nonflip_numeric != nonflip_symbolic {
        return Err(Error::CensusMismatch(format!(
            "{} at lambda = {lambda}, k = {k}: {nonflip_numeric} numeric vs {nonflip_symbolic} symbolic nonflip orbits",
            map.name
        )));
    }
    Ok(CrosscheckReport { k, nonflip_numeric, nonflip_symbolic, flip_numeric, matched: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::builtin_map;
    use std::collections::BTreeMap;

    #[test]
    fn quadratic_period_three() {
        let q = builtin_map("quadratic", &BTreeMap::new()).unwrap();
        let r = numeric_census_crosscheck(&q, 36.1, 3).unwrap();
        assert_eq!((r.nonflip_numeric, r.nonflip_symbolic), (1, 1));
    }

    #[test]
    fn decoupled_product_fixed_points() {
        let mut o = BTreeMap::new();
        o.insert("c".to_string(), 0.0);
        o.insert("k_step".to_string(), 0.0);
        let m = builtin_map("coupled_quadratic", &o).unwrap();
        let r = numeric_census_crosscheck(&m, 40.0, 1).unwrap();
        assert_eq!(r.nonflip_numeric, 2);
    }

    #[test]
    fn non_family_rejected() {
        let m = builtin_map("logistic", &BTreeMap::new()).unwrap();
        assert!(numeric_census_crosscheck(&m, 4.0, 1).is_err());
    }
}
