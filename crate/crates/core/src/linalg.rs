//! Dense exact matrices over the Gaussian rationals, sparse coefficient
//! vectors, and the floating-point routines used for norms and spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};

use crate::scalar::{rat_int, GaussianRational as Gq};

/// Sparse vector: `(index, coefficient)` pairs, sorted by index, no zeros.
pub type SparseVec = Vec<(usize, Gq)>;

pub fn sparse_add_scaled(acc: &mut SparseVec, v: &[(usize, Gq)], c: &Gq) {
    if c.is_zero() || v.is_empty() {
        return;
    }
    let mut out = Vec::with_capacity(acc.len() + v.len());
    let (mut i, mut j) = (0, 0);
    while i < acc.len() || j < v.len() {
        if j >= v.len() || (i < acc.len() && acc[i].0 < v[j].0) {
            out.push(acc[i].clone());
            i += 1;
        } else if i >= acc.len() || v[j].0 < acc[i].0 {
            out.push((v[j].0, &v[j].1 * c));
            j += 1;
        } else {
            let s = &acc[i].1 + &(&v[j].1 * c);
            if !s.is_zero() {
                out.push((acc[i].0, s));
            }
            i += 1;
            j += 1;
        }
    }
    *acc = out;
}

pub fn sparse_from_dense(v: &[Gq]) -> SparseVec {
    v.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (k, c.clone())).collect()
}

pub fn sparse_to_dense(v: &[(usize, Gq)], n: usize) -> Vec<Gq> {
    let mut d = vec![Gq::zero(); n];
    for (k, c) in v {
        d[*k] = c.clone();
    }
    d
}

/// Exact dense matrix, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Gq>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Gq::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.set(k, k, Gq::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Gq>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Matrix unit `E_{ij}` of size `n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m.set(i, j, Gq::one());
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Gq {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Gq) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Gq] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Gq>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<Gq> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn mul(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.cols, o.rows, "shape mismatch in product");
        let mut out = Matrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        out.data[i * o.cols + j] += &(a * b);
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Gq]) -> Vec<Gq> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = Gq::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        s += &(a * b);
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: &Gq) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * c).collect() }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn conj(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(Gq::conj).collect() }
    }

    pub fn trace(&self) -> Gq {
        let mut t = Gq::zero();
        for k in 0..self.rows.min(self.cols) {
            t += self.get(k, k);
        }
        t
    }

    pub fn is_hermitian(&self) -> bool {
        self.rows == self.cols && *self == self.adjoint()
    }

    /// Reduced row echelon form; returns the pivot columns.
    fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            if p != r {
                for j in 0..self.cols {
                    self.data.swap(p * self.cols + j, r * self.cols + j);
                }
            }
            let inv = self.get(r, c).inv().expect("nonzero pivot");
            for j in c..self.cols {
                let v = self.get(r, j) * &inv;
                self.set(r, j, v);
            }
            let pivot_row: Vec<Gq> = self.row(r).to_vec();
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let f = self.get(i, c).clone();
                if f.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    if !pivot_row[j].is_zero() {
                        let v = self.get(i, j) - &(&f * &pivot_row[j]);
                        self.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the right kernel `{v : M v = 0}`.
    pub fn kernel(&self) -> Vec<Vec<Gq>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Gq::zero(); self.cols];
                v[f] = Gq::one();
                for (row, &pc) in pivots.iter().enumerate() {
                    v[pc] = -m.get(row, f);
                }
                v
            })
            .collect()
    }

    /// Some solution of `M x = b`, if one exists.
    pub fn solve(&self, b: &[Gq]) -> Option<Vec<Gq>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Matrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, self.cols, b[i].clone());
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Gq::zero(); self.cols];
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = aug.get(row, self.cols).clone();
        }
        Some(x)
    }

    /// Exact positive-definiteness test for a Hermitian matrix: every
    /// pivot of the unpivoted LDL* factorization must be real and positive.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_hermitian() {
            return false;
        }
        let n = self.rows;
        let mut a = self.clone();
        for k in 0..n {
            let d = a.get(k, k).clone();
            if !d.is_real() || !d.re.is_positive() {
                return false;
            }
            let dinv = d.inv().unwrap();
            for i in k + 1..n {
                let f = a.get(i, k) * &dinv;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = a.get(i, j) - &(&f * a.get(k, j));
                    a.set(i, j, v);
                }
            }
        }
        true
    }

    pub fn to_c64(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_c64())
    }
}

/// Rank of a family of vectors (rows).
pub fn rank_of_vectors(vs: &[Vec<Gq>]) -> usize {
    if vs.is_empty() {
        return 0;
    }
    Matrix::from_rows(vs.to_vec()).rank()
}

/// Vector with small random Gaussian-integer entries in `[-3, 3] + [-3, 3]i`.
pub fn random_gaussian_vector<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<Gq> {
    (0..n)
        .map(|_| Gq::new(rat_int(rng.gen_range(-3..=3)), rat_int(rng.gen_range(-3..=3))))
        .collect()
}

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Hermitian eigen-decomposition with its worst residual `‖Mv − λv‖`.
pub fn hermitian_eigen_with_residual(m: &DMatrix<Complex64>) -> (Vec<f64>, f64) {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.clone().symmetric_eigen();
    let mut worst = 0.0f64;
    for k in 0..eig.eigenvalues.len() {
        let v = eig.eigenvectors.column(k);
        let r = &herm * v - v * Complex64::new(eig.eigenvalues[k], 0.0);
        worst = worst.max(r.norm());
    }
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    (ev, worst)
}

/// Hilbert-space geometry given by a positive-definite Gram matrix `G = L L*`.
/// Operators given in the (non-orthonormal) basis are transported to
/// orthonormal coordinates as `L* T L^{-*}`.
#[derive(Clone, Debug)]
pub struct GramGeometry {
    lower: DMatrix<Complex64>,
    lower_adj: DMatrix<Complex64>,
}

impl GramGeometry {
    pub fn new(gram: &DMatrix<Complex64>) -> Option<Self> {
        let herm = (gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
        let chol = herm.cholesky()?;
        let lower = chol.l();
        let lower_adj = lower.adjoint();
        Some(Self { lower, lower_adj })
    }

    pub fn identity(n: usize) -> Self {
        Self { lower: DMatrix::identity(n, n), lower_adj: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn orthonormalize(&self, t: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        // X = L* T (L*)^{-1}  <=>  X L* = L* T  <=>  L X* = (L* T)*
        let lt = &self.lower_adj * t;
        let xa = self
            .lower
            .solve_lower_triangular(&lt.adjoint())
            .expect("Cholesky factor is invertible");
        xa.adjoint()
    }

    /// Operator norm of `t` with respect to the Gram inner product.
    pub fn operator_norm(&self, t: &DMatrix<Complex64>) -> f64 {
        let x = self.orthonormalize(t);
        let xtx = x.adjoint() * &x;
        let ev = hermitian_eigenvalues(&xtx);
        ev.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn q(n: i64) -> Gq {
        Gq::from_int(n)
    }

    #[test]
    fn rank_kernel_solve() {
        let m = Matrix::from_rows(vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)], vec![q(0), q(1), q(1)]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.len(), 1);
        assert!(m.mul_vec(&k[0]).iter().all(Zero::is_zero));
        let x = m.solve(&[q(1), q(2), q(1)]).unwrap();
        assert_eq!(m.mul_vec(&x), vec![q(1), q(2), q(1)]);
        assert!(m.solve(&[q(1), q(3), q(0)]).is_none());
    }

    #[test]
    fn positive_definite_exact() {
        let pd = Matrix::from_rows(vec![vec![q(2), Gq::i()], vec![-Gq::i(), q(1)]]);
        assert!(pd.is_positive_definite());
        let indefinite = Matrix::from_rows(vec![vec![q(1), q(2)], vec![q(2), q(1)]]);
        assert!(!indefinite.is_positive_definite());
        let semidefinite = Matrix::from_rows(vec![vec![q(1), q(1)], vec![q(1), q(1)]]);
        assert!(!semidefinite.is_positive_definite());
    }

    #[test]
    fn sparse_accumulation_cancels() {
        let mut acc: SparseVec = vec![(0, q(1)), (3, q(2))];
        sparse_add_scaled(&mut acc, &[(3, q(1)), (5, q(1))], &Gq::from_ratio(-2, 1));
        assert_eq!(acc, vec![(0, q(1)), (5, q(-2))]);
    }

    #[test]
    fn gram_operator_norm_matches_orthonormal() {
        // weighted inner product diag(4,1); T swaps basis vectors with a rescaling
        // so that T is unitary in that geometry.
        let gram = Matrix::from_rows(vec![vec![q(4), q(0)], vec![q(0), q(1)]]);
        let t = Matrix::from_rows(vec![
            vec![q(0), Gq::real(rat(1, 2))],
            vec![q(2), q(0)],
        ]);
        let geo = GramGeometry::new(&gram.to_c64()).unwrap();
        assert!((geo.operator_norm(&t.to_c64()) - 1.0).abs() < 1e-12);
    }
}
