//! Dense symmetric matrices and their spectral calculus.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense real symmetric matrix. Storage is kept exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    data: DMatrix<f64>,
}

/// Spectral decomposition with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Clamp tolerance used for spectral functions: 1e-10 (1 + ||A||_F).
pub fn domain_tol(a: &SymMat) -> f64 {
    1e-10 * (1.0 + a.frob_norm())
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMat { data: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMat { data: DMatrix::identity(n, n) }
    }

    /// All-ones matrix E.
    pub fn ones(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMat { data: DMatrix::from_element(n, n, 1.0) }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_fn(n, |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n >= 1, "dimension must be positive");
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        SymMat { data }
    }

    /// Symmetrizes an arbitrary square matrix as (A + Aᵀ)/2.
    pub fn from_matrix(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
        Self::from_fn(a.nrows(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    }

    /// Builds from rows, rejecting asymmetry beyond 1e-12 (1 + |a_ij|).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite matrix entry".into()));
            }
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInput(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.data[(i, j)]).collect()).collect()
    }

    /// Outer product v vᵀ.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    /// Congruence B A Bᵀ for a general square B.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Self {
        Self::from_matrix(&(b * &self.data * b.transpose()))
    }

    /// Symmetric sandwich B A B for symmetric B.
    pub fn sandwich(&self, b: &SymMat) -> Self {
        Self::from_matrix(&(&b.data * &self.data * &b.data))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_fn(self.dim(), |i, j| f(i, j, self.data[(i, j)]))
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.amax()
    }

    fn check_dim(&self, other: &SymMat) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Frobenius inner product Σ A_ij B_ij.
    pub fn frob_ip(&self, other: &SymMat) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.data.dot(&other.data))
    }

    /// Sum of all entries.
    pub fn sum_all(&self) -> f64 {
        self.data.sum()
    }

    pub fn hadamard(&self, other: &SymMat) -> Result<SymMat> {
        self.check_dim(other)?;
        Ok(SymMat { data: self.data.component_mul(&other.data) })
    }

    /// Entrywise p-th power; p = 0 gives the all-ones matrix.
    pub fn hadamard_pow(&self, p: u32) -> SymMat {
        self.map(|_, _, v| v.powi(p as i32))
    }

    pub fn eig(&self) -> EigenDecomp {
        let n = self.dim();
        if n == 1 {
            return EigenDecomp {
                eigenvalues: vec![self.data[(0, 0)]],
                eigenvectors: DMatrix::identity(1, 1),
            };
        }
        let se = SymmetricEigen::new(self.data.clone());
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let eigenvalues = idx.iter().map(|&k| se.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (c, &k) in idx.iter().enumerate() {
            eigenvectors.set_column(c, &se.eigenvectors.column(k));
        }
        EigenDecomp { eigenvalues, eigenvectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eig().eigenvalues
    }

    pub fn min_eig(&self) -> f64 {
        if self.dim() == 1 {
            return self.data[(0, 0)];
        }
        self.eigenvalues()[0]
    }

    /// V diag(f(λ)) Vᵀ after clamping λ in [−tol, 0) to 0. Eigenvalues below
    /// −tol are rejected.
    pub fn sym_func(&self, f: impl Fn(f64) -> f64, tol: f64) -> Result<SymMat> {
        let e = self.eig();
        let mut vals = Vec::with_capacity(e.eigenvalues.len());
        for &l in &e.eigenvalues {
            if l < -tol {
                return Err(Error::DomainError { eigenvalue: l });
            }
            vals.push(f(l.max(0.0)));
        }
        Ok(e.reconstruct_with(&vals))
    }

    pub fn sqrt(&self) -> Result<SymMat> {
        self.sym_func(f64::sqrt, domain_tol(self))
    }

    /// A^r for r ≥ 0 on the PSD cone.
    pub fn pow(&self, r: f64) -> Result<SymMat> {
        assert!(r >= 0.0, "use inverse powers via inv_pow");
        self.sym_func(|l| l.powf(r), domain_tol(self))
    }

    /// A^{-r} for r > 0; requires A PD.
    pub fn inv_pow(&self, r: f64) -> Result<SymMat> {
        let e = self.eig();
        let min = e.eigenvalues[0];
        if min <= pd_floor(self) {
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        let vals: Vec<f64> = e.eigenvalues.iter().map(|l| l.powf(-r)).collect();
        Ok(e.reconstruct_with(&vals))
    }

    pub fn inverse(&self) -> Result<SymMat> {
        if self.dim() == 1 {
            let v = self.data[(0, 0)];
            if v <= pd_floor(self) {
                return Err(Error::NotPositiveDefinite { min_eig: v });
            }
            return Ok(SymMat { data: DMatrix::from_element(1, 1, 1.0 / v) });
        }
        self.inv_pow(1.0)
    }

    /// Inverse plus log-determinant from one eigen-solve.
    pub fn inverse_logdet(&self) -> Result<(SymMat, f64)> {
        let e = self.eig();
        let min = e.eigenvalues[0];
        if min <= pd_floor(self) {
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        let ld = e.eigenvalues.iter().map(|l| l.ln()).sum();
        let vals: Vec<f64> = e.eigenvalues.iter().map(|l| 1.0 / l).collect();
        Ok((e.reconstruct_with(&vals), ld))
    }

    pub fn logdet(&self) -> Result<f64> {
        let ev = self.eigenvalues();
        if ev[0] <= 1e-13 {
            return Err(Error::NotPositiveDefinite { min_eig: ev[0] });
        }
        Ok(ev.iter().map(|l| l.ln()).sum())
    }

    /// self += s·x
    pub fn axpy(&mut self, s: f64, x: &SymMat) {
        assert_eq!(self.dim(), x.dim(), "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(x.data.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat { data: &self.data * s }
    }

    /// Lower Cholesky factor of a PD matrix.
    pub fn cholesky(&self) -> Result<DMatrix<f64>> {
        match nalgebra::Cholesky::new(self.data.clone()) {
            Some(c) => Ok(c.l()),
            None => Err(Error::NotPositiveDefinite { min_eig: self.min_eig() }),
        }
    }
}

/// PD threshold used by the functionals: 1e-12 (1 + ||A||_F).
pub fn pd_floor(a: &SymMat) -> f64 {
    1e-12 * (1.0 + a.frob_norm())
}

/// Frobenius inner product of two equal-dimension matrices (panics on mismatch).
pub fn ip(a: &SymMat, b: &SymMat) -> f64 {
    a.frob_ip(b).expect("dimension mismatch")
}

/// trace(A B C D) for square matrices.
pub fn trace4(a: &SymMat, b: &SymMat, c: &SymMat, d: &SymMat) -> f64 {
    (a.as_matrix() * b.as_matrix() * c.as_matrix() * d.as_matrix()).trace()
}

impl EigenDecomp {
    pub fn reconstruct_with(&self, vals: &[f64]) -> SymMat {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (c, &l) in vals.iter().enumerate() {
            scaled.column_mut(c).scale_mut(l);
        }
        SymMat::from_matrix(&(scaled * v.transpose()))
    }

    pub fn reconstruct(&self) -> SymMat {
        self.reconstruct_with(&self.eigenvalues)
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        SymMat { data: &self.data + &rhs.data }
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        SymMat { data: &self.data - &rhs.data }
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(self, rhs: SymMat) -> SymMat {
        &self + &rhs
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(self, rhs: SymMat) -> SymMat {
        &self - &rhs
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, s: f64) -> SymMat {
        self.scale(s)
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(self, s: f64) -> SymMat {
        self.scale(s)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scale(-1.0)
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        assert_eq!(SymMat::identity(2).sqrt().unwrap(), SymMat::identity(2));
        let r = SymMat::diag(&[4.0, 9.0]).sqrt().unwrap();
        assert!((r.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((r.get(1, 1) - 3.0).abs() < 1e-14);
        assert!(r.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn sym_func_rejects_negative_spectrum() {
        let a = SymMat::diag(&[-1.0, 5.0]);
        match a.sqrt() {
            Err(Error::DomainError { eigenvalue }) => assert_eq!(eigenvalue, -1.0),
            other => panic!("unexpected {other:?}"),
        }
        // tiny negative eigenvalues are clamped
        let b = SymMat::diag(&[-1e-13, 1.0]);
        assert_eq!(b.sqrt().unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(SymMat::identity(3).logdet().unwrap(), 0.0);
        let v = SymMat::diag(&[2.0, 3.0]).logdet().unwrap();
        assert!((v - 6f64.ln()).abs() < 1e-14);
        assert!(matches!(
            SymMat::diag(&[0.0, 1.0]).logdet(),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn hadamard_examples() {
        let q = SymMat::from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let q2 = q.hadamard_pow(2);
        assert!((q2.get(0, 1) - 0.01).abs() < 1e-16);
        assert_eq!(q2.get(0, 0), 1.0);
        assert_eq!(q.hadamard_pow(1), q);
        assert_eq!(q.hadamard_pow(0), SymMat::ones(2));
        assert!((q.sum_all() - 2.2).abs() < 1e-15);
    }

    #[test]
    fn inner_products_and_min_eig() {
        let i2 = SymMat::identity(2);
        assert_eq!(i2.frob_ip(&i2).unwrap(), 2.0);
        assert_eq!(i2.min_eig(), 1.0);
        assert_eq!(SymMat::diag(&[-1.0, 5.0]).min_eig(), -1.0);
        assert!(matches!(
            i2.frob_ip(&SymMat::identity(3)),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn eigenvalues_ascending() {
        let a = SymMat::from_rows(&[
            vec![3.0, 1.0, 0.0],
            vec![1.0, -2.0, 0.5],
            vec![0.0, 0.5, 1.0],
        ])
        .unwrap();
        let e = a.eig();
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let back = e.reconstruct();
        assert!((&back - &a).frob_norm() < 1e-12 * (1.0 + a.frob_norm()));
    }

    #[test]
    fn from_rows_rejects_asymmetry() {
        assert!(SymMat::from_rows(&[vec![1.0, 0.2], vec![0.1, 1.0]]).is_err());
    }
}
