//! Small dense linear algebra helpers: scaled matrix products, eigenvalues,
//! linear solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalue stored as `mantissa · 2^exp2` so that long orbit products never
/// overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledEigen {
    pub mantissa: Complex64,
    pub exp2: i32,
}

const MAX_EXP: f64 = 990.0;

impl ScaledEigen {
    pub fn plain(mu: Complex64) -> Self {
        Self { mantissa: mu, exp2: 0 }
    }

    pub fn log2_abs(&self) -> f64 {
        self.mantissa.norm().log2() + self.exp2 as f64
    }

    /// Value as a complex number, saturating the modulus at `2^990`.
    pub fn value(&self) -> Complex64 {
        let l = self.log2_abs();
        if self.mantissa.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if l > MAX_EXP {
            return self.mantissa / self.mantissa.norm() * MAX_EXP.exp2();
        }
        if l < -MAX_EXP {
            return Complex64::new(0.0, 0.0);
        }
        self.mantissa * (self.exp2 as f64).exp2()
    }
}

/// Product of Jacobians `m · 2^exp2`, with the determinant tracked separately
/// in log form.
#[derive(Clone, Debug)]
pub struct ScaledMatrix {
    pub m: DMatrix<f64>,
    pub exp2: i32,
    pub det_log2: f64,
    pub det_sign: f64,
}

impl ScaledMatrix {
    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n), exp2: 0, det_log2: 0.0, det_sign: 1.0 }
    }

    /// Replaces the product `P` by `J · P`.
    pub fn mul_left(&mut self, j: &DMatrix<f64>) {
        self.m = j * &self.m;
        let d = if j.nrows() == 1 { j[(0, 0)] } else { j.determinant() };
        self.det_sign *= d.signum();
        self.det_log2 += d.abs().log2();
        let big = self.m.amax();
        if big > 0.0 && big.is_finite() {
            let e = big.log2().floor() as i32;
            if e != 0 {
                self.m *= (-e as f64).exp2();
                self.exp2 += e;
            }
        }
    }

    /// Unscaled matrix, if representable.
    pub fn to_matrix(&self) -> Option<DMatrix<f64>> {
        if self.exp2.abs() > 1000 {
            return None;
        }
        let m = &self.m * (self.exp2 as f64).exp2();
        m.iter().all(|v| v.is_finite()).then_some(m)
    }

    pub fn eigenvalues(&self) -> Result<Vec<ScaledEigen>> {
        let nu = eigenvalues(&self.m)?;
        let mut out: Vec<ScaledEigen> = nu.iter().map(|&v| ScaledEigen { mantissa: v, exp2: self.exp2 }).collect();
        if out.len() == 2 && self.det_log2.is_finite() {
            // recover the small eigenvalue of a nearly rank-one product from the determinant
            let (big, small) = if out[0].mantissa.norm() >= out[1].mantissa.norm() { (0, 1) } else { (1, 0) };
            let b = out[big];
            if b.mantissa.im == 0.0 && b.mantissa.norm() > 1e8 * out[small].mantissa.norm() {
                let l = self.det_log2 - b.log2_abs();
                let e = l.floor() as i32;
                let sign = self.det_sign * b.mantissa.re.signum();
                out[small] = ScaledEigen { mantissa: Complex64::new(sign * (l - e as f64).exp2(), 0.0), exp2: e };
            }
        }
        Ok(out)
    }
}

/// Eigenvalues of a small dense matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow("eigenvalue input".into()));
    }
    match n {
        0 => Ok(vec![]),
        1 => Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            let det = a * d - b * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                let mu1 = if half >= 0.0 { half + s } else { half - s };
                let mu2 = if mu1 != 0.0 { det / mu1 } else { half - s };
                Ok(vec![Complex64::new(mu1, 0.0), Complex64::new(mu2, 0.0)])
            } else {
                let s = (-disc).sqrt();
                Ok(vec![Complex64::new(half, s), Complex64::new(half, -s)])
            }
        }
        _ => {
            let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
                .ok_or_else(|| Error::NoConvergence("eigenvalue iteration".into()))?;
            Ok(schur.complex_eigenvalues().iter().copied().collect())
        }
    }
}

/// Solves `a x = b` by LU; `None` if singular or non-finite.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Unit tangent of the curve `H = 0` with Jacobian `dh` (N × (N+1)), oriented
/// to have positive inner product with `reference`.
pub fn tangent(dh: &DMatrix<f64>, reference: &DVector<f64>) -> Option<DVector<f64>> {
    let n = dh.nrows();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.rows_mut(0, n).copy_from(dh);
    a.row_mut(n).copy_from(&reference.transpose());
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let t = solve(&a, &rhs)?;
    let norm = t.norm();
    (norm > 0.0).then(|| t / norm)
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_real_and_complex() {
        let e = eigenvalues(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0])).unwrap();
        let mut r: Vec<f64> = e.iter().map(|c| c.re).collect();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![-3.0, 2.0]);
        let e = eigenvalues(&DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        assert!((e[0].norm() - 1.0).abs() < 1e-15 && e[0].im.abs() == 1.0);
    }

    #[test]
    fn larger_matrix_uses_schur() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 5.0]));
        let mut r: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|c| c.re).collect();
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([-2.0, 1.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_product_tracks_huge_values() {
        let j = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 0.05]);
        let mut p = ScaledMatrix::identity(2);
        for _ in 0..400 {
            p.mul_left(&j);
        }
        let e = p.eigenvalues().unwrap();
        let mut l: Vec<f64> = e.iter().map(|s| s.log2_abs()).collect();
        l.sort_by(f64::total_cmp);
        assert!((l[1] - 400.0 * 10f64.log2()).abs() < 1e-8);
        assert!((l[0] - 400.0 * 0.05f64.log2()).abs() < 1e-8);
        assert!(p.to_matrix().is_none());
        assert!(e.iter().all(|s| s.value().re.is_finite()));
    }

    #[test]
    fn tangent_of_circle() {
        // H(x, y) = x² + y² - 1 at (1, 0): tangent is ±(0, 1)
        let dh = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let t = tangent(&dh, &DVector::from_vec(vec![0.1, 1.0])).unwrap();
        assert!((t[1] - 1.0).abs() < 1e-15 && t[0].abs() < 1e-15);
    }
}
