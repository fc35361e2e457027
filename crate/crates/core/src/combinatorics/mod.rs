//! Exact orbit counts for symbolic models: least-period point counts, signed
//! necklaces for the tent map, the three-branch map and products of tent maps.

mod crosscheck;

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::Zero;

use crate::error::{Error, Result};

pub use crosscheck::{numeric_census_crosscheck, CrosscheckReport};

pub fn divisors(n: u64) -> Vec<u64> {
    let mut d: Vec<u64> = (1..=n).take_while(|i| i * i <= n).filter(|i| n % i == 0).collect();
    let upper: Vec<u64> = d.iter().rev().map(|i| n / i).filter(|&j| j * j != n).collect();
    d.extend(upper);
    d
}

pub fn mobius(mut n: u64) -> i8 {
    if n == 1 {
        return 1;
    }
    let mut result = 1i8;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Number of points of least period exactly `k` for the full shift on `m`
/// symbols: `Σ_{d|k} μ(k/d) m^d`.
pub fn least_period_points(m: u64, k: u64) -> Result<BigUint> {
    if m < 2 || k < 1 {
        return Err(Error::BadParameter("need m >= 2 and k >= 1".into()));
    }
    let mut total = BigInt::zero();
    for d in divisors(k) {
        let term = BigInt::from(m).pow(d as u32);
        match mobius(k / d) {
            1 => total += term,
            -1 => total -= term,
            _ => {}
        }
    }
    total.to_biguint().ok_or_else(|| Error::InternalError("negative point count".into()))
}

/// Number of orbits of least period `k` for the full `m`-shift.
pub fn least_period_orbits(m: u64, k: u64) -> Result<BigUint> {
    let z = least_period_points(m, k)?;
    let (q, r) = z.div_rem(&BigUint::from(k));
    if !r.is_zero() {
        return Err(Error::InternalError(format!("zeta({m},{k}) not divisible by {k}")));
    }
    Ok(q)
}

fn gamma_1_memo(k: u64, memo: &mut HashMap<u64, BigUint>) -> Result<BigUint> {
    if let Some(v) = memo.get(&k) {
        return Ok(v.clone());
    }
    let orbits = least_period_orbits(2, k)?;
    let mut l = BigUint::zero();
    let mut j = k;
    while j % 2 == 0 {
        j /= 2;
        l += gamma_1_memo(j, memo)?;
    }
    if l > orbits {
        return Err(Error::InternalError(format!("L({k}) exceeds the orbit count")));
    }
    let (g, r) = (orbits - l).div_rem(&BigUint::from(2u8));
    if !r.is_zero() {
        return Err(Error::InternalError(format!("odd numerator in the recursion at k = {k}")));
    }
    memo.insert(k, g.clone());
    Ok(g)
}

/// Nonflip period-`k` orbits of the tent map via
/// `Γ(1,k) = (ζ(2,k)/k - L(k))/2`, `L(k) = Σ Γ(1,j)` over `j < k`, `k/j` a power of 2.
pub fn gamma_1(k: u64) -> Result<BigUint> {
    if k == 0 {
        return Err(Error::BadParameter("k must be positive".into()));
    }
    gamma_1_memo(k, &mut HashMap::new())
}

/// Calls `f` on every Lyndon word of length exactly `n` over `{0..m}`, in
/// lexicographic order.
pub fn for_each_lyndon<F: FnMut(&[u8])>(m: usize, n: usize, mut f: F) {
    if m == 0 || n == 0 || m > 256 {
        return;
    }
    let top = (m - 1) as u8;
    let mut w: Vec<u8> = vec![0];
    while !w.is_empty() {
        if w.len() == n {
            f(&w);
        }
        let len = w.len();
        while w.len() < n {
            let c = w[w.len() - len];
            w.push(c);
        }
        while w.last() == Some(&top) {
            w.pop();
        }
        if let Some(last) = w.last_mut() {
            *last += 1;
        }
    }
}

pub fn lyndon_words(m: usize, n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for_each_lyndon(m, n, |w| out.push(w.to_vec()));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alphabet {
    /// `L` (slope +2), `R` (slope -2).
    Tent,
    /// Increasing left, decreasing middle, increasing right branch.
    ThreeBranch,
    /// Products of `n` tent maps; symbol bit `i` set means coordinate `i` is on `R`.
    TentProduct(usize),
}

impl Alphabet {
    pub fn size(&self) -> usize {
        match self {
            Alphabet::Tent => 2,
            Alphabet::ThreeBranch => 3,
            Alphabet::TentProduct(n) => 1 << n,
        }
    }

    pub fn coordinates(&self) -> usize {
        match self {
            Alphabet::TentProduct(n) => *n,
            _ => 1,
        }
    }

    fn negative(&self, symbol: u8, coordinate: usize) -> bool {
        match self {
            Alphabet::Tent => symbol == 1,
            Alphabet::ThreeBranch => symbol == 1,
            Alphabet::TentProduct(_) => (symbol >> coordinate) & 1 == 1,
        }
    }

    fn symbol_name(&self, s: u8) -> String {
        match self {
            Alphabet::Tent => ["L", "R"][s as usize].to_string(),
            Alphabet::ThreeBranch => ["L", "M", "R"][s as usize].to_string(),
            Alphabet::TentProduct(n) => {
                let parts: Vec<&str> = (0..*n).map(|i| if (s >> i) & 1 == 1 { "R" } else { "L" }).collect();
                format!("({})", parts.join(","))
            }
        }
    }
}

/// Canonical cyclic word with per-coordinate derivative signs over one period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolNecklace {
    pub alphabet: Alphabet,
    pub word: Vec<u8>,
    pub length: usize,
    pub least_period: usize,
    pub signs: Vec<i8>,
}

impl SymbolNecklace {
    pub fn from_word(alphabet: Alphabet, word: &[u8]) -> Self {
        let k = word.len();
        let least_period = (1..=k)
            .find(|&d| k % d == 0 && (0..k).all(|i| word[i] == word[(i + d) % k]))
            .unwrap_or(k);
        let signs = (0..alphabet.coordinates())
            .map(|c| {
                let neg = word[..least_period].iter().filter(|&&s| alphabet.negative(s, c)).count();
                if neg % 2 == 0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Self { alphabet, word: word.to_vec(), length: k, least_period, signs }
    }

    /// Product of the coordinate signs.
    pub fn sign(&self) -> i8 {
        self.signs.iter().product()
    }

    /// Nonflip iff an even number of coordinates have negative slope product.
    pub fn is_nonflip(&self) -> bool {
        self.signs.iter().filter(|&&s| s < 0).count() % 2 == 0
    }

    pub fn label(&self) -> String {
        self.word.iter().map(|&s| self.alphabet.symbol_name(s)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TentCensus {
    pub nonflip_count: usize,
    pub flip_count: usize,
    pub necklaces: Vec<SymbolNecklace>,
}

/// Signed least-period-`k` necklaces of the tent map.
pub fn tent_necklace_census(k: usize) -> Result<TentCensus> {
    if k == 0 || k > 24 {
        return Err(Error::TooLarge(format!("tent census requires 1 <= k <= 24, got {k}")));
    }
    let mut necklaces = Vec::new();
    for_each_lyndon(2, k, |w| necklaces.push(SymbolNecklace::from_word(Alphabet::Tent, w)));
    let nonflip_count = necklaces.iter().filter(|n| n.is_nonflip()).count();
    Ok(TentCensus { nonflip_count, flip_count: necklaces.len() - nonflip_count, necklaces })
}

/// (nonflip, flip) counts of least-period-`k` orbits for a symbolic model.
pub fn signed_orbit_counts(alphabet: Alphabet, k: usize) -> (u64, u64) {
    let mut nonflip = 0u64;
    let mut flip = 0u64;
    let coords = alphabet.coordinates();
    for_each_lyndon(alphabet.size(), k, |w| {
        let mut odd = 0;
        for c in 0..coords {
            if w.iter().filter(|&&s| alphabet.negative(s, c)).count() % 2 == 1 {
                odd += 1;
            }
        }
        if odd % 2 == 0 {
            nonflip += 1;
        } else {
            flip += 1;
        }
    });
    (nonflip, flip)
}

/// Nonflip period-`k` orbits of the product of `n` tent maps, by enumeration.
pub fn gamma_n(n: usize, k: usize) -> Result<u64> {
    if n == 0 || k == 0 {
        return Err(Error::BadParameter("N and k must be positive".into()));
    }
    if n * k > 24 {
        return Err(Error::TooLarge(format!("N*k = {} exceeds 24", n * k)));
    }
    Ok(signed_orbit_counts(Alphabet::TentProduct(n), k).0)
}

/// Nonflip period-`k` orbits of the three-branch map, by enumeration.
pub fn cubic_nonflip_count(k: usize) -> Result<u64> {
    if k == 0 || k > 15 {
        return Err(Error::TooLarge(format!("cubic count requires 1 <= k <= 15, got {k}")));
    }
    Ok(signed_orbit_counts(Alphabet::ThreeBranch, k).0)
}

/// Row of the count table for one model and period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountRow {
    pub k: u64,
    pub zeta: BigUint,
    pub orbits: BigUint,
    pub nonflip: BigUint,
    pub flip: BigUint,
}

/// Count table row: points of least period `k`, orbits, nonflip and flip orbits.
pub fn count_row(alphabet: Alphabet, k: u64) -> Result<CountRow> {
    let m = alphabet.size() as u64;
    let zeta = least_period_points(m, k)?;
    let orbits = least_period_orbits(m, k)?;
    let nonflip = match alphabet {
        Alphabet::Tent => gamma_1(k)?,
        Alphabet::ThreeBranch => BigUint::from(cubic_nonflip_count(k as usize)?),
        Alphabet::TentProduct(n) => BigUint::from(gamma_n(n, k as usize)?),
    };
    let flip = &orbits - &nonflip;
    Ok(CountRow { k, zeta, orbits, nonflip, flip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    /// Independent oracle: all words, keep those strictly smaller than every
    /// nontrivial rotation.
    fn brute_lyndon(m: usize, n: usize) -> Vec<Vec<u8>> {
        let total = m.pow(n as u32);
        let mut out = Vec::new();
        for code in 0..total {
            let mut w = vec![0u8; n];
            let mut c = code;
            for i in (0..n).rev() {
                w[i] = (c % m) as u8;
                c /= m;
            }
            let lyndon = (1..n).all(|r| {
                let rot: Vec<u8> = (0..n).map(|i| w[(i + r) % n]).collect();
                w < rot
            });
            if lyndon {
                out.push(w);
            }
        }
        out
    }

    #[test]
    fn lyndon_matches_brute_force() {
        for (m, n) in [(2, 1), (2, 4), (2, 9), (3, 5), (4, 3)] {
            assert_eq!(lyndon_words(m, n), brute_lyndon(m, n), "m={m} n={n}");
        }
    }

    #[test]
    fn mobius_and_divisors() {
        assert_eq!((1..=10).map(mobius).collect::<Vec<_>>(), vec![1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(9), vec![1, 3, 9]);
    }

    #[test]
    fn least_period_examples() {
        assert_eq!(least_period_points(2, 1).unwrap(), BigUint::from(2u8));
        assert_eq!(least_period_points(2, 4).unwrap(), BigUint::from(12u8));
        assert_eq!(least_period_points(3, 3).unwrap(), BigUint::from(24u8));
        let big = least_period_points(2, 100).unwrap();
        assert!(big.bits() > 64);
    }

    #[test]
    fn gamma_one_table() {
        let v: Vec<u64> = (1..=8).map(|k| gamma_1(k).unwrap().to_u64().unwrap()).collect();
        assert_eq!(v, vec![1, 0, 1, 1, 3, 4, 9, 14]);
    }

    #[test]
    fn tent_census_examples() {
        let c = tent_necklace_census(3).unwrap();
        assert_eq!((c.nonflip_count, c.flip_count), (1, 1));
        let nf = c.necklaces.iter().find(|n| n.is_nonflip()).unwrap();
        assert_eq!(nf.label(), "LRR");
        let c = tent_necklace_census(1).unwrap();
        assert_eq!((c.nonflip_count, c.flip_count), (1, 1));
        assert_eq!(tent_necklace_census(2).unwrap().nonflip_count, 0);
    }

    #[test]
    fn tent_orbit_of_lrr() {
        // 2/7 -> 4/7 -> 6/7 -> 2/7 with slopes +2, -2, -2
        let t = |x: f64| if x <= 0.5 { 2.0 * x } else { 2.0 * (1.0 - x) };
        let x = 2.0 / 7.0;
        assert!((t(t(t(x))) - x).abs() < 1e-15);
    }

    #[test]
    fn product_and_cubic_examples() {
        assert_eq!(gamma_n(2, 1).unwrap(), 2);
        assert_eq!(gamma_n(2, 2).unwrap(), 2);
        assert_eq!(cubic_nonflip_count(1).unwrap(), 2);
        assert_eq!(cubic_nonflip_count(3).unwrap(), 4);
        assert_eq!(cubic_nonflip_count(5).unwrap(), 24);
        assert!(matches!(gamma_n(5, 5), Err(Error::TooLarge(_))));
    }

    #[test]
    fn necklace_least_period() {
        let n = SymbolNecklace::from_word(Alphabet::Tent, &[0, 1, 0, 1]);
        assert_eq!(n.least_period, 2);
        assert_eq!(n.sign(), -1);
    }

    #[test]
    fn count_row_tent() {
        let r = count_row(Alphabet::Tent, 5).unwrap();
        assert_eq!(r.zeta, BigUint::from(30u8));
        assert_eq!(r.orbits, BigUint::from(6u8));
        assert_eq!(r.nonflip, BigUint::from(3u8));
        assert_eq!(r.flip, BigUint::from(3u8));
    }
}
