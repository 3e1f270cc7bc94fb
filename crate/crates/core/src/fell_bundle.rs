//! Fell bundles over finite groupoids with finite-dimensional fibers.
//!
//! A fiber `A(h)` is coordinatized by a basis `e_0, …, e_{d-1}`. Products are
//! bilinear tensors `A(h) × A(k) → A(hk)`, the involution is the antilinear
//! map `a ↦ M_h · conj(a)` into `A(h⁻¹)`, and every unit fiber carries a
//! faithful *-representation on a finite Hilbert space.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actions::GroupoidAction;
use crate::error::{check, Error, Result, Violation};
use crate::groupoid::{homomorphism_violations, Arrow, FiniteGroupoid};
use crate::linalg::{
    hermitian_eigenvalues, random_gaussian_vector, rank_of_vectors, sparse_add_scaled, sparse_from_dense, GramGeometry, Matrix, SparseVec,
};
use crate::scalar::GaussianRational as Gq;
use crate::semidirect::Semidirect;

/// Tolerance for the spectral (floating-point) parts of bundle validation.
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;

/// Random fiber elements drawn per bundle for the positivity checks.
pub const POSITIVITY_SAMPLES: usize = 100;

const SAMPLE_SEED: u64 = 0x00fe_11b0;

/// Bilinear map `A(h) × A(k) → A(hk)`, stored as `e_i·e_j` for every basis pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultTensor {
    left: usize,
    right: usize,
    out: usize,
    table: Vec<SparseVec>,
}

impl MultTensor {
    pub fn from_fn(left: usize, right: usize, out: usize, mut f: impl FnMut(usize, usize) -> SparseVec) -> Self {
        let mut table = Vec::with_capacity(left * right);
        for i in 0..left {
            for j in 0..right {
                let mut entry = SparseVec::new();
                for (k, c) in f(i, j) {
                    sparse_add_scaled(&mut entry, &[(k, c)], &Gq::one());
                }
                table.push(entry);
            }
        }
        Self { left, right, out, table }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.left, self.right, self.out)
    }

    pub fn basis_product(&self, i: usize, j: usize) -> &SparseVec {
        &self.table[i * self.right + j]
    }

    pub fn apply(&self, a: &[Gq], b: &[Gq]) -> Vec<Gq> {
        let mut out = vec![Gq::zero(); self.out];
        for (i, ai) in a.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            for (j, bj) in b.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                let c = ai * bj;
                for (l, t) in self.basis_product(i, j) {
                    out[*l] += &(t * &c);
                }
            }
        }
        out
    }

    fn set(&mut self, i: usize, j: usize, v: SparseVec) {
        self.table[i * self.right + j] = v;
    }
}

/// Faithful *-representation `π` of a unit fiber on `ℂ^N` with inner product
/// `⟨ξ, η⟩ = ξ* Q η`, so that `π(a*) = Q⁻¹ π(a)* Q`.
///
/// Block realizations (direct sums of full matrix algebras) use `Q = 1`.
#[derive(Clone, Debug)]
pub struct UnitRealization {
    images: Vec<Matrix>,
    gram: Matrix,
    geometry: GramGeometry,
}

impl UnitRealization {
    pub fn new(images: Vec<Matrix>, gram: Matrix) -> Result<Self> {
        let n = gram.rows();
        if gram.cols() != n || images.iter().any(|m| m.rows() != n || m.cols() != n) {
            return Err(Error::Schema("realization matrices must be square of the Gram size".into()));
        }
        let geometry = if n == 0 {
            GramGeometry::identity(0)
        } else {
            GramGeometry::new(&gram.to_c64())
                .ok_or_else(|| Error::Numerical("realization Gram matrix is not positive definite".into()))?
        };
        Ok(Self { images, gram, geometry })
    }

    /// `M_d` acting on `ℂ^d`, basis `E_pq` at index `p·d + q`.
    pub fn matrix_algebra(d: usize) -> Self {
        let images = (0..d * d).map(|k| Matrix::unit(d, k / d, k % d)).collect();
        Self { images, gram: Matrix::identity(d), geometry: GramGeometry::identity(d) }
    }

    pub fn size(&self) -> usize {
        self.gram.rows()
    }

    pub fn images(&self) -> &[Matrix] {
        &self.images
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn geometry(&self) -> &GramGeometry {
        &self.geometry
    }

    pub fn represent(&self, a: &[Gq]) -> Matrix {
        let mut m = Matrix::zeros(self.size(), self.size());
        for (c, img) in a.iter().zip(&self.images).filter(|(c, _)| !c.is_zero()) {
            m = m.add(&img.scale(c));
        }
        m
    }

    pub fn represent_c64(&self, a: &[Gq]) -> DMatrix<Complex64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for (c, img) in a.iter().zip(&self.images).filter(|(c, _)| !c.is_zero()) {
            m += img.to_c64() * c.to_c64();
        }
        m
    }

    /// C*-norm of `a` in the unit fiber.
    pub fn norm(&self, a: &[Gq]) -> f64 {
        self.geometry.operator_norm(&self.represent_c64(a))
    }

    /// Spectrum of a self-adjoint `a`, in orthonormal coordinates.
    pub fn hermitian_spectrum(&self, a: &[Gq]) -> Vec<f64> {
        hermitian_eigenvalues(&self.geometry.orthonormalize(&self.represent_c64(a)))
    }
}

/// A Fell bundle over a finite groupoid.
///
/// Values are built unchecked by the constructors in this module and become
/// trustworthy only after [`validate_fell_bundle`].
#[derive(Clone, Debug)]
pub struct FellBundle {
    base: Arc<FiniteGroupoid>,
    dims: Vec<usize>,
    mult: Vec<Option<Arc<MultTensor>>>,
    invol: Vec<Matrix>,
    realizations: Vec<UnitRealization>,
    warnings: Vec<String>,
}

impl FellBundle {
    /// Assembles a candidate bundle. `mult` is called once per composable pair,
    /// `realizations` are indexed by unit position in `base.units()`.
    pub fn from_parts(
        base: Arc<FiniteGroupoid>,
        dims: Vec<usize>,
        mut mult: impl FnMut(Arrow, Arrow) -> MultTensor,
        invol: Vec<Matrix>,
        realizations: Vec<UnitRealization>,
    ) -> Self {
        let n = base.len();
        let mut table = vec![None; n * n];
        for (h, k) in base.composable_pairs() {
            table[h * n + k] = Some(Arc::new(mult(h, k)));
        }
        Self { base, dims, mult: table, invol, realizations, warnings: Vec::new() }
    }

    pub fn base(&self) -> &Arc<FiniteGroupoid> {
        &self.base
    }

    pub fn dim(&self, h: Arrow) -> usize {
        self.dims[h]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn mult(&self, h: Arrow, k: Arrow) -> &MultTensor {
        self.mult[h * self.base.len() + k]
            .as_deref()
            .unwrap_or_else(|| panic!("arrows {h} and {k} are not composable"))
    }

    pub fn invol(&self, h: Arrow) -> &Matrix {
        &self.invol[h]
    }

    pub fn realization(&self, u: Arrow) -> &UnitRealization {
        let pos = self.base.unit_index(u).unwrap_or_else(|| panic!("{u} is not a unit"));
        &self.realizations[pos]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn product(&self, h: Arrow, k: Arrow, a: &[Gq], b: &[Gq]) -> Vec<Gq> {
        self.mult(h, k).apply(a, b)
    }

    /// `a* ∈ A(h⁻¹)` for `a ∈ A(h)`.
    pub fn star(&self, h: Arrow, a: &[Gq]) -> Vec<Gq> {
        let conj: Vec<Gq> = a.iter().map(Gq::conj).collect();
        self.invol[h].mul_vec(&conj)
    }

    /// `a*a ∈ A(s(h))`.
    pub fn inner_right(&self, h: Arrow, a: &[Gq]) -> Vec<Gq> {
        self.product(self.base.inv(h), h, &self.star(h, a), a)
    }

    /// `aa* ∈ A(r(h))`.
    pub fn inner_left(&self, h: Arrow, a: &[Gq]) -> Vec<Gq> {
        self.product(h, self.base.inv(h), a, &self.star(h, a))
    }

    /// Bundle norm `‖a‖ = ‖a*a‖^{1/2}`.
    pub fn norm(&self, h: Arrow, a: &[Gq]) -> f64 {
        self.realization(self.base.s(h)).norm(&self.inner_right(h, a)).sqrt()
    }

    /// Overwrites one basis product; meant for building broken variants.
    pub fn set_basis_product(&mut self, h: Arrow, k: Arrow, i: usize, j: usize, v: SparseVec) {
        let n = self.base.len();
        let slot = self.mult[h * n + k].as_mut().expect("composable pair");
        Arc::make_mut(slot).set(i, j, v);
    }

    pub fn set_invol(&mut self, h: Arrow, m: Matrix) {
        self.invol[h] = m;
    }

    pub fn set_realization(&mut self, u: Arrow, r: UnitRealization) {
        let pos = self.base.unit_index(u).expect("unit");
        self.realizations[pos] = r;
    }

    fn shape_violations(&self) -> Vec<Violation> {
        let g = &*self.base;
        let mut v = Vec::new();
        if self.dims.len() != g.len() || self.invol.len() != g.len() || self.realizations.len() != g.units().len() {
            v.push(Violation::new("bundle tables have wrong length", vec![], ""));
            return v;
        }
        for h in g.arrows() {
            let m = &self.invol[h];
            if m.rows() != self.dims[g.inv(h)] || m.cols() != self.dims[h] {
                v.push(Violation::new("involution shape", vec![h], ""));
            }
        }
        for (h, k) in g.composable_pairs() {
            let t = self.mult(h, k);
            let hk = g.compose(h, k);
            let bad_index = t.table.iter().any(|e| e.iter().any(|(l, _)| *l >= self.dims[hk]));
            if t.dims() != (self.dims[h], self.dims[k], self.dims[hk]) || bad_index {
                v.push(Violation::new("multiplication tensor shape", vec![h, k], ""));
            }
        }
        for (pos, &u) in g.units().iter().enumerate() {
            if self.realizations[pos].images.len() != self.dims[u] {
                v.push(Violation::new("realization has wrong number of images", vec![u], ""));
            }
        }
        v
    }

    fn associativity_violations(&self) -> Vec<Violation> {
        let g = &*self.base;
        g.arrows()
            .into_par_iter()
            .flat_map_iter(|h| {
                let mut v = Vec::new();
                for k in g.arrows_with_range(g.s(h)) {
                    let hk = g.compose(h, k);
                    for l in g.arrows_with_range(g.s(k)) {
                        let kl = g.compose(k, l);
                        let (t_hk, t_hk_l, t_kl, t_h_kl) = (self.mult(h, k), self.mult(hk, l), self.mult(k, l), self.mult(h, kl));
                        for i in 0..self.dims[h] {
                            for j in 0..self.dims[k] {
                                for m in 0..self.dims[l] {
                                    let mut lhs = SparseVec::new();
                                    for (p, c) in t_hk.basis_product(i, j) {
                                        sparse_add_scaled(&mut lhs, t_hk_l.basis_product(*p, m), c);
                                    }
                                    let mut rhs = SparseVec::new();
                                    for (p, c) in t_kl.basis_product(j, m) {
                                        sparse_add_scaled(&mut rhs, t_h_kl.basis_product(i, *p), c);
                                    }
                                    if lhs != rhs {
                                        v.push(Violation::new("associativity (ab)c = a(bc)", vec![h, k, l, i, j, m], ""));
                                    }
                                }
                            }
                        }
                    }
                }
                v
            })
            .collect()
    }

    fn involution_violations(&self) -> Vec<Violation> {
        let g = &*self.base;
        let mut v = Vec::new();
        for h in g.arrows() {
            for i in 0..self.dims[h] {
                let e = basis(self.dims[h], i);
                if self.star(g.inv(h), &self.star(h, &e)) != e {
                    v.push(Violation::new("involution is not involutive", vec![h, i], ""));
                }
            }
        }
        let fb3: Vec<Violation> = g
            .arrows()
            .into_par_iter()
            .flat_map_iter(|h| {
                let mut v = Vec::new();
                for k in g.arrows_with_range(g.s(h)) {
                    let (hinv, kinv) = (g.inv(h), g.inv(k));
                    for i in 0..self.dims[h] {
                        let ei_star = self.star(h, &basis(self.dims[h], i));
                        for j in 0..self.dims[k] {
                            let ab = self.product(h, k, &basis(self.dims[h], i), &basis(self.dims[k], j));
                            let lhs = self.star(g.compose(h, k), &ab);
                            let rhs = self.product(kinv, hinv, &self.star(k, &basis(self.dims[k], j)), &ei_star);
                            if lhs != rhs {
                                v.push(Violation::new("FB3 (ab)* = b*a*", vec![h, k, i, j], ""));
                            }
                        }
                    }
                }
                v
            })
            .collect();
        v.extend(fb3);
        v
    }

    fn realization_violations(&self) -> Vec<Violation> {
        let g = &*self.base;
        let mut v = Vec::new();
        for (pos, &u) in g.units().iter().enumerate() {
            let rep = &self.realizations[pos];
            let d = self.dims[u];
            if !rep.gram.is_hermitian() || (rep.size() > 0 && !rep.gram.is_positive_definite()) {
                v.push(Violation::new("FB4 Gram matrix not positive definite", vec![u], ""));
                continue;
            }
            let flat: Vec<Vec<Gq>> =
                rep.images.iter().map(|m| m.to_rows().into_iter().flatten().collect()).collect();
            if rank_of_vectors(&flat) != d {
                v.push(Violation::new("FB4 realization not injective", vec![u], ""));
            }
            for i in 0..d {
                for j in 0..d {
                    let prod = self.product(u, u, &basis(d, i), &basis(d, j));
                    if rep.represent(&prod) != rep.images[i].mul(&rep.images[j]) {
                        v.push(Violation::new("FB4 realization not multiplicative", vec![u, i, j], ""));
                    }
                }
                let star = rep.represent(&self.star(u, &basis(d, i)));
                if rep.gram.mul(&star) != rep.images[i].adjoint().mul(&rep.gram) {
                    v.push(Violation::new("FB4 realization not *-preserving", vec![u, i], ""));
                }
            }
        }
        v
    }

    /// Fullness of `A(h)` as an `A(r(h))`–`A(s(h))` bimodule; failures are warnings.
    fn fullness_warnings(&self) -> Vec<String> {
        let g = &*self.base;
        let mut w = Vec::new();
        for h in g.arrows() {
            let d = self.dims[h];
            if d == 0 {
                w.push(format!("zero-dimensional fiber over arrow {h}"));
                if self.dims[g.r(h)] + self.dims[g.s(h)] > 0 {
                    w.push(format!("A({h}) is not full"));
                }
                continue;
            }
            let hinv = g.inv(h);
            let stars: Vec<Vec<Gq>> = (0..d).map(|i| self.star(h, &basis(d, i))).collect();
            let mut left = Vec::new();
            let mut right = Vec::new();
            for i in 0..d {
                for j in 0..d {
                    left.push(self.product(h, hinv, &basis(d, i), &stars[j]));
                    right.push(self.product(hinv, h, &stars[i], &basis(d, j)));
                }
            }
            if rank_of_vectors(&left) != self.dims[g.r(h)] {
                w.push(format!("span{{ab*}} over arrow {h} is a proper subspace of A(r(h))"));
            }
            if rank_of_vectors(&right) != self.dims[g.s(h)] {
                w.push(format!("span{{a*b}} over arrow {h} is a proper subspace of A(s(h))"));
            }
        }
        w
    }

    fn positivity_violations(&self, tol: f64) -> Vec<Violation> {
        let g = &*self.base;
        let mut samples: Vec<(Arrow, Vec<Gq>)> = Vec::new();
        for h in g.arrows() {
            for (_, a) in basis_sample(self.dims[h]) {
                samples.push((h, a));
            }
        }
        let nonzero: Vec<Arrow> = g.arrows().filter(|&h| self.dims[h] > 0).collect();
        if !nonzero.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
            for _ in 0..POSITIVITY_SAMPLES {
                let h = nonzero[rng.gen_range(0..nonzero.len())];
                samples.push((h, random_gaussian_vector(&mut rng, self.dims[h])));
            }
        }
        samples
            .par_iter()
            .enumerate()
            .flat_map_iter(|(idx, (h, a))| {
                let mut v = Vec::new();
                let right = self.realization(g.s(*h)).hermitian_spectrum(&self.inner_right(*h, a));
                let left = self.realization(g.r(*h)).hermitian_spectrum(&self.inner_left(*h, a));
                let top = |ev: &[f64]| ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let (nr, nl) = (top(&right), top(&left));
                let scale = 1.0f64.max(nr).max(nl);
                if right.first().is_some_and(|&m| m < -tol * scale) {
                    v.push(Violation::new("FB5 a*a is not positive", vec![*h, idx], format!("min eigenvalue {:e}", right[0])));
                }
                if left.first().is_some_and(|&m| m < -tol * scale) {
                    v.push(Violation::new("FB5 aa* is not positive", vec![*h, idx], format!("min eigenvalue {:e}", left[0])));
                }
                if (nr - nl).abs() > tol * scale {
                    v.push(Violation::new("FB5 ‖a*a‖ ≠ ‖aa*‖", vec![*h, idx], format!("{nr} vs {nl}")));
                }
                v
            })
            .collect()
    }

    /// Every axiom failure of the candidate, plus non-fatal warnings.
    pub fn report(&self) -> (Vec<Violation>, Vec<String>) {
        let shape = self.shape_violations();
        if !shape.is_empty() {
            return (shape, Vec::new());
        }
        let mut v = self.associativity_violations();
        v.extend(self.involution_violations());
        let fb4 = self.realization_violations();
        let fb4_ok = fb4.is_empty();
        v.extend(fb4);
        if fb4_ok {
            v.extend(self.positivity_violations(POSITIVITY_TOLERANCE));
        }
        (v, self.fullness_warnings())
    }
}

pub(crate) fn basis(d: usize, i: usize) -> Vec<Gq> {
    let mut e = vec![Gq::zero(); d];
    e[i] = Gq::one();
    e
}

/// Basis vectors and the pair sums `e_i + e_j`, `e_i + i·e_j`; for large `d`
/// only neighbouring pairs are used.
fn basis_sample(d: usize) -> Vec<(usize, Vec<Gq>)> {
    let mut out: Vec<(usize, Vec<Gq>)> = (0..d).map(|i| (i, basis(d, i))).collect();
    let pairs: Vec<(usize, usize)> = if d <= 6 {
        (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
    } else {
        (0..d - 1).map(|i| (i, i + 1)).collect()
    };
    for (i, j) in pairs {
        let mut a = basis(d, i);
        a[j] = Gq::one();
        out.push((i, a.clone()));
        a[j] = Gq::i();
        out.push((i, a));
    }
    out
}

/// Checks every Fell-bundle axiom; returns the bundle with its warnings attached.
pub fn validate_fell_bundle(mut candidate: FellBundle) -> Result<FellBundle> {
    let (violations, warnings) = candidate.report();
    check("fell bundle", violations)?;
    candidate.warnings = warnings;
    Ok(candidate)
}

/// Fibers `A(h) = Mat_{d(r(h)) × d(s(h))}` with matrix multiplication and
/// conjugate transpose; `d` is indexed by unit position.
pub fn build_trivial_bundle(base: Arc<FiniteGroupoid>, unit_dims: &[usize]) -> Result<FellBundle> {
    let g = &*base;
    if unit_dims.len() != g.units().len() {
        return Err(Error::invalid(
            "trivial bundle",
            vec![Violation::new("dimension list does not match the units", vec![unit_dims.len(), g.units().len()], "")],
        ));
    }
    let d = |u: Arrow| unit_dims[g.unit_index(u).expect("unit")];
    let dims: Vec<usize> = g.arrows().map(|h| d(g.r(h)) * d(g.s(h))).collect();
    let invol = g
        .arrows()
        .map(|h| {
            let (dr, ds) = (d(g.r(h)), d(g.s(h)));
            let mut m = Matrix::zeros(ds * dr, dr * ds);
            for p in 0..dr {
                for q in 0..ds {
                    m.set(q * dr + p, p * ds + q, Gq::one());
                }
            }
            m
        })
        .collect();
    let realizations = g.units().iter().map(|&u| UnitRealization::matrix_algebra(d(u))).collect();
    let bundle = FellBundle::from_parts(
        base.clone(),
        dims.clone(),
        |h, k| {
            let (dr, dm, ds) = (d(g.r(h)), d(g.s(h)), d(g.s(k)));
            MultTensor::from_fn(dims[h], dims[k], dr * ds, |a, b| {
                let ((p, q), (q2, t)) = ((a / dm.max(1), a % dm.max(1)), (b / ds.max(1), b % ds.max(1)));
                if q == q2 {
                    vec![(p * ds + t, Gq::one())]
                } else {
                    Vec::new()
                }
            })
        },
        invol,
        realizations,
    );
    validate_fell_bundle(bundle)
}

/// A 2-cocycle `σ(h, k)` on composable pairs.
pub type Cocycle = HashMap<(Arrow, Arrow), Gq>;

pub fn trivial_cocycle(base: &FiniteGroupoid) -> Cocycle {
    base.composable_pairs().map(|p| (p, Gq::one())).collect()
}

/// Cocycle on `Z/2` with `σ(g, g) = −1`.
pub fn sign_cocycle_z2(z2: &FiniteGroupoid) -> Cocycle {
    let mut c = trivial_cocycle(z2);
    c.insert((1, 1), -Gq::one());
    c
}

/// The cocycle of the projective representation `e, a, b, c ↦ 1, X, Z, Y`
/// of the Klein four-group by Pauli matrices, `P_g P_h = σ(g,h) P_{gh}`.
/// Arrow indices follow [`crate::groupoid::library::klein_four`].
pub fn pauli_cocycle(klein: &FiniteGroupoid) -> Cocycle {
    let q = Gq::from_int;
    let i = Gq::i();
    let pauli = [
        Matrix::identity(2),
        Matrix::from_rows(vec![vec![q(0), q(1)], vec![q(1), q(0)]]),
        Matrix::from_rows(vec![vec![q(1), q(0)], vec![q(0), q(-1)]]),
        Matrix::from_rows(vec![vec![q(0), -i.clone()], vec![i, q(0)]]),
    ];
    klein
        .composable_pairs()
        .map(|(g, h)| {
            let lhs = pauli[g].mul(&pauli[h]);
            let target = &pauli[klein.compose(g, h)];
            // P_gh is unitary and self-adjoint: σ = tr(P_gh · P_g P_h) / 2
            let sigma = target.mul(&lhs).trace().scale(&crate::scalar::rat(1, 2));
            ((g, h), sigma)
        })
        .collect()
}

/// One-dimensional fibers with `e_h·e_k = σ(h,k) e_{hk}` and
/// `e_h* = conj(σ(h⁻¹, h)) e_{h⁻¹}`. `σ` must be normalized, of unit modulus,
/// and satisfy `σ(h,k)σ(hk,l) = σ(k,l)σ(h,kl)`.
pub fn build_line_bundle(base: Arc<FiniteGroupoid>, sigma: &Cocycle) -> Result<FellBundle> {
    let g = &*base;
    let mut v = Vec::new();
    for (h, k) in g.composable_pairs() {
        match sigma.get(&(h, k)) {
            None => v.push(Violation::new("cocycle missing on composable pair", vec![h, k], "")),
            Some(s) if !s.norm_sqr().is_one() => {
                v.push(Violation::new("cocycle value not of unit modulus", vec![h, k], s.to_string()))
            }
            Some(_) => {}
        }
    }
    check("line bundle", std::mem::take(&mut v))?;
    let s = |h: Arrow, k: Arrow| &sigma[&(h, k)];
    for h in g.arrows() {
        if !s(g.r(h), h).is_one() || !s(h, g.s(h)).is_one() {
            v.push(Violation::new("cocycle not normalized", vec![h], ""));
        }
    }
    for (h, k) in g.composable_pairs() {
        for l in g.arrows_with_range(g.s(k)) {
            if s(h, k) * s(g.compose(h, k), l) != s(k, l) * s(h, g.compose(k, l)) {
                v.push(Violation::new("cocycle identity σ(h,k)σ(hk,l) = σ(k,l)σ(h,kl)", vec![h, k, l], ""));
            }
        }
    }
    check("line bundle", v)?;
    let invol = g
        .arrows()
        .map(|h| Matrix::from_rows(vec![vec![s(g.inv(h), h).conj()]]))
        .collect();
    let realizations = g.units().iter().map(|_| UnitRealization::matrix_algebra(1)).collect();
    let bundle = FellBundle::from_parts(
        base.clone(),
        vec![1; g.len()],
        |h, k| MultTensor::from_fn(1, 1, 1, |_, _| sparse_from_dense(&[s(h, k).clone()])),
        invol,
        realizations,
    );
    validate_fell_bundle(bundle)
}

/// `φ*A` over `H` for a homomorphism `φ: H → G`: the fiber over `h` is `A(φ(h))`.
pub fn pullback_bundle(domain: Arc<FiniteGroupoid>, phi: &[Arrow], bundle: &FellBundle) -> Result<FellBundle> {
    check("pullback", homomorphism_violations(&domain, bundle.base(), phi))?;
    let (h, g) = (&*domain, &**bundle.base());
    let n = h.len();
    let mut mult = vec![None; n * n];
    for (a, b) in h.composable_pairs() {
        mult[a * n + b] = bundle.mult[phi[a] * g.len() + phi[b]].clone();
    }
    let candidate = FellBundle {
        dims: h.arrows().map(|k| bundle.dims[phi[k]]).collect(),
        invol: h.arrows().map(|k| bundle.invol[phi[k]].clone()).collect(),
        realizations: h.units().iter().map(|&v| bundle.realization(phi[v]).clone()).collect(),
        mult,
        base: domain,
        warnings: Vec::new(),
    };
    validate_fell_bundle(candidate)
}

/// Restriction to a subgroupoid given by its embedding.
pub fn restrict_bundle(sub: Arc<FiniteGroupoid>, embed: &[Arrow], bundle: &FellBundle) -> Result<FellBundle> {
    pullback_bundle(sub, embed, bundle)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawFiberMap {
    pub x: Arrow,
    pub h: Arrow,
    pub matrix: Vec<Vec<Gq>>,
}

/// An action of `G` on a Fell bundle over `H`, covering an action on `H`:
/// for `s(x) = ρ(h)` a linear bijection `A(h) → A(x·h)`.
#[derive(Clone, Debug)]
pub struct BundleAction {
    action: Arc<GroupoidAction>,
    bundle: Arc<FellBundle>,
    maps: HashMap<(Arrow, Arrow), Matrix>,
}

impl BundleAction {
    pub fn from_maps(action: Arc<GroupoidAction>, bundle: Arc<FellBundle>, maps: HashMap<(Arrow, Arrow), Matrix>) -> Self {
        Self { action, bundle, maps }
    }

    pub fn from_raw(action: Arc<GroupoidAction>, bundle: Arc<FellBundle>, raw: &[RawFiberMap]) -> Self {
        let maps = raw
            .iter()
            .map(|m| ((m.x, m.h), Matrix::from_rows(m.matrix.clone())))
            .collect();
        Self::from_maps(action, bundle, maps)
    }

    /// Identity matrices `A(h) → A(x·h)`; valid when the fibers and
    /// structure tensors are constant along orbits.
    pub fn identity(action: Arc<GroupoidAction>, bundle: Arc<FellBundle>) -> Self {
        let maps = pairs_of(&action)
            .into_iter()
            .map(|(x, h)| ((x, h), Matrix::identity(bundle.dim(h))))
            .collect();
        Self::from_maps(action, bundle, maps)
    }

    pub fn action(&self) -> &Arc<GroupoidAction> {
        &self.action
    }

    pub fn bundle(&self) -> &Arc<FellBundle> {
        &self.bundle
    }

    pub fn map(&self, x: Arrow, h: Arrow) -> &Matrix {
        self.maps.get(&(x, h)).unwrap_or_else(|| panic!("no fiber map for x={x}, h={h}"))
    }

    pub fn apply(&self, x: Arrow, h: Arrow, a: &[Gq]) -> Vec<Gq> {
        self.map(x, h).mul_vec(a)
    }

    pub fn set_map(&mut self, x: Arrow, h: Arrow, m: Matrix) {
        self.maps.insert((x, h), m);
    }

    pub fn to_raw(&self) -> Vec<RawFiberMap> {
        pairs_of(&self.action)
            .into_iter()
            .map(|(x, h)| RawFiberMap { x, h, matrix: self.map(x, h).to_rows() })
            .collect()
    }

    pub fn violations(&self) -> Vec<Violation> {
        let (g, hh) = (&**self.action.actor(), &**self.action.target());
        let a = &*self.bundle;
        let mut v = Vec::new();
        if hh.len() != a.base().len() {
            v.push(Violation::new("action target is not the bundle base", vec![], ""));
            return v;
        }
        let pairs = pairs_of(&self.action);
        for &(x, h) in &pairs {
            match self.maps.get(&(x, h)) {
                None => v.push(Violation::new("fiber map missing", vec![x, h], "")),
                Some(m) if m.rows() != a.dim(self.action.apply(x, h)) || m.cols() != a.dim(h) => {
                    v.push(Violation::new("fiber map shape", vec![x, h], ""))
                }
                Some(m) if m.rows() != m.cols() || m.rank() != m.cols() => {
                    v.push(Violation::new("fiber map not bijective", vec![x, h], ""))
                }
                Some(_) => {}
            }
        }
        if !v.is_empty() {
            return v;
        }
        for &(x, h) in &pairs {
            let xh = self.action.apply(x, h);
            let (d, hinv) = (a.dim(h), hh.inv(h));
            for i in 0..d {
                let e = basis(d, i);
                let lhs = self.apply(x, hinv, &a.star(h, &e));
                let rhs = a.star(xh, &self.apply(x, h, &e));
                if lhs != rhs {
                    v.push(Violation::new("not *-preserving: x·(a*) ≠ (x·a)*", vec![x, h, i], ""));
                }
            }
            for k in hh.arrows_with_range(hh.s(h)) {
                let xk = self.action.apply(x, k);
                for i in 0..d {
                    let xa = self.apply(x, h, &basis(d, i));
                    for j in 0..a.dim(k) {
                        let b = basis(a.dim(k), j);
                        let lhs = self.apply(x, hh.compose(h, k), &a.product(h, k, &basis(d, i), &b));
                        let rhs = a.product(xh, xk, &xa, &self.apply(x, k, &b));
                        if lhs != rhs {
                            v.push(Violation::new("not multiplicative: x·(ab) ≠ (x·a)(x·b)", vec![x, h, k, i, j], ""));
                        }
                    }
                }
            }
        }
        for (x, y) in g.composable_pairs() {
            for h in self.action.fiber_arrows(g.s(y)) {
                let lhs = self.map(g.compose(x, y), h);
                let rhs = self.map(x, self.action.apply(y, h)).mul(self.map(y, h));
                if *lhs != rhs {
                    v.push(Violation::new("cocycle: (xy)·a ≠ x·(y·a)", vec![x, y, h], ""));
                }
            }
        }
        if v.is_empty() {
            v.extend(self.isometry_violations(POSITIVITY_TOLERANCE));
        }
        v
    }

    /// `‖x·a‖ = ‖a‖` on fiber basis vectors and a few seeded random elements.
    fn isometry_violations(&self, tol: f64) -> Vec<Violation> {
        let a = &*self.bundle;
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ 0xac7);
        let mut samples = Vec::new();
        for (x, h) in pairs_of(&self.action) {
            let d = a.dim(h);
            for i in 0..d {
                samples.push((x, h, i, basis(d, i)));
            }
            if d > 0 {
                samples.push((x, h, d, random_gaussian_vector(&mut rng, d)));
            }
        }
        samples
            .par_iter()
            .filter_map(|(x, h, i, e)| {
                let before = a.norm(*h, e);
                let after = a.norm(self.action.apply(*x, *h), &self.apply(*x, *h, e));
                ((before - after).abs() > tol * before.max(1.0))
                    .then(|| Violation::new("fiber map not isometric", vec![*x, *h, *i], format!("{before} vs {after}")))
            })
            .collect()
    }

    pub fn validate(self) -> Result<Self> {
        check("bundle action", self.violations())?;
        Ok(self)
    }
}

fn pairs_of(action: &GroupoidAction) -> Vec<(Arrow, Arrow)> {
    let (g, h) = (&**action.actor(), &**action.target());
    g.arrows().flat_map(|x| h.arrows().filter(move |&k| action.act(x, k).is_some()).map(move |k| (x, k))).collect()
}

/// `A ⋊ G` over `H ⋊ G`: fiber `A(h)` over `(h, x)`,
/// `(a,x)(b,y) = (a(x·b), xy)` and `(a,x)* = (x⁻¹·a*, x⁻¹)`.
pub fn semidirect_bundle(ba: &BundleAction, sd: &Semidirect) -> Result<FellBundle> {
    let (g, h) = (&**ba.action().actor(), &**ba.action().target());
    let a = &**ba.bundle();
    let action = ba.action();
    let base = sd.groupoid.clone();
    let dims: Vec<usize> = sd.pairs.iter().map(|&(k, _)| a.dim(k)).collect();
    let invol = sd
        .pairs
        .iter()
        .map(|&(k, x)| ba.map(g.inv(x), h.inv(k)).mul(a.invol(k)))
        .collect();
    let realizations = base.units().iter().map(|&u| a.realization(sd.unit_to_h(u)).clone()).collect();
    let candidate = FellBundle::from_parts(
        base.clone(),
        dims,
        |p, q| {
            let ((k1, x), (k2, _)) = (sd.pairs[p], sd.pairs[q]);
            let xk2 = action.apply(x, k2);
            let t = a.mult(k1, xk2);
            let m = ba.map(x, k2);
            MultTensor::from_fn(a.dim(k1), a.dim(k2), a.dim(h.compose(k1, xk2)), |i, j| {
                sparse_from_dense(&t.apply(&basis(a.dim(k1), i), &m.column(j)))
            })
        },
        invol,
        realizations,
    );
    validate_fell_bundle(candidate)
}

/// The identification `A(h,x) ≅ A(h)` intertwines the left `A(r(h))`-module
/// structures, and the right structures after twisting by `c ↦ x·c`.
pub fn semidirect_module_violations(ba: &BundleAction, sd: &Semidirect, sdb: &FellBundle) -> Vec<Violation> {
    let (g, h) = (&**ba.action().actor(), &**ba.action().target());
    let a = &**ba.bundle();
    let action = ba.action();
    let mut v = Vec::new();
    for (p, &(k, x)) in sd.pairs.iter().enumerate() {
        let left_unit = sd.index_of(h.r(k), g.r(x)).expect("unit of H ⋊ G");
        if sdb.mult(left_unit, p) != a.mult(h.r(k), k) {
            v.push(Violation::new("left module structure not preserved", vec![p], ""));
        }
        let w = action.apply(g.inv(x), h.s(k));
        let right_unit = sd.index_of(w, g.s(x)).expect("unit of H ⋊ G");
        let twisted = MultTensor::from_fn(a.dim(k), a.dim(w), a.dim(k), |i, j| {
            sparse_from_dense(&a.product(k, h.s(k), &basis(a.dim(k), i), &ba.apply(x, w, &basis(a.dim(w), j))))
        });
        if *sdb.mult(p, right_unit) != twisted {
            v.push(Violation::new("right module structure not preserved after twist", vec![p], ""));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{p2_swap, translation_action};
    use crate::groupoid::library::*;
    use crate::semidirect::semidirect_groupoid;

    fn axioms(err: &Error) -> Vec<&str> {
        err.violations().iter().map(|v| v.axiom.as_str()).collect()
    }

    #[test]
    fn trivial_bundles() {
        let p2 = Arc::new(pair_groupoid(2));
        let line = build_trivial_bundle(p2.clone(), &[1, 1]).unwrap();
        assert_eq!(line.dims(), &[1, 1, 1, 1]);
        assert!(line.warnings().is_empty());
        let m2 = build_trivial_bundle(p2.clone(), &[2, 2]).unwrap();
        assert_eq!(m2.total_dim(), 16);
        let z2 = build_trivial_bundle(Arc::new(cyclic_group(2)), &[3]).unwrap();
        assert_eq!(z2.dims(), &[9, 9]);
        let uneven = build_trivial_bundle(p2, &[1, 2]).unwrap();
        assert_eq!(uneven.dims(), &[1, 2, 2, 4]);
    }

    #[test]
    fn zero_fiber_is_warned() {
        let b = build_trivial_bundle(Arc::new(pair_groupoid(2)), &[1, 0]).unwrap();
        assert!(b.warnings().iter().any(|w| w.contains("zero-dimensional")));
    }

    #[test]
    fn line_bundles() {
        let k4 = Arc::new(klein_four());
        let sigma = pauli_cocycle(&k4);
        assert_eq!(sigma[&(1, 2)], -Gq::i());
        build_line_bundle(k4.clone(), &sigma).unwrap();
        build_line_bundle(k4.clone(), &trivial_cocycle(&k4)).unwrap();
        let z2 = Arc::new(cyclic_group(2));
        let b = build_line_bundle(z2.clone(), &sign_cocycle_z2(&z2)).unwrap();
        assert_eq!(b.star(1, &basis(1, 0)), vec![-Gq::one()]);

        let mut bad = sigma.clone();
        bad.insert((1, 2), Gq::i());
        let err = build_line_bundle(k4, &bad).unwrap_err();
        assert!(axioms(&err).iter().all(|a| a.starts_with("cocycle identity")));
    }

    #[test]
    fn fb3_and_positivity_mutants() {
        let z2 = Arc::new(cyclic_group(2));
        let good = build_line_bundle(z2.clone(), &trivial_cocycle(&z2)).unwrap();

        let mut neg = good.clone();
        neg.set_invol(1, Matrix::from_rows(vec![vec![-Gq::one()]]));
        let err = validate_fell_bundle(neg).unwrap_err();
        assert!(axioms(&err).contains(&"FB5 a*a is not positive"));
        assert!(!axioms(&err).contains(&"FB3 (ab)* = b*a*"));

        let mut twisted = good.clone();
        twisted.set_invol(1, Matrix::from_rows(vec![vec![Gq::i()]]));
        let err = validate_fell_bundle(twisted).unwrap_err();
        let fb3 = err.violations().iter().find(|v| v.axiom == "FB3 (ab)* = b*a*").unwrap();
        assert_eq!(fb3.witness, vec![1, 1, 0, 0]);

        let mut nonassoc = good;
        nonassoc.set_basis_product(0, 1, 0, 0, vec![(0, Gq::from_int(2))]);
        let err = validate_fell_bundle(nonassoc).unwrap_err();
        assert!(axioms(&err).contains(&"associativity (ab)c = a(bc)"));
    }

    #[test]
    fn realization_mutant() {
        let b = build_trivial_bundle(Arc::new(pair_groupoid(2)), &[2, 2]).unwrap();
        let mut bad = b.clone();
        let mut images = UnitRealization::matrix_algebra(2).images().to_vec();
        images.swap(0, 3);
        bad.set_realization(0, UnitRealization::new(images, Matrix::identity(2)).unwrap());
        let err = validate_fell_bundle(bad).unwrap_err();
        assert!(axioms(&err).contains(&"FB4 realization not multiplicative"));
    }

    #[test]
    fn pullbacks() {
        let z2 = Arc::new(cyclic_group(2));
        let line = build_line_bundle(z2.clone(), &sign_cocycle_z2(&z2)).unwrap();
        let same = pullback_bundle(z2.clone(), &[0, 1], &line).unwrap();
        assert_eq!(same.dims(), line.dims());

        let e = Arc::new(trivial_group());
        let m2 = build_trivial_bundle(e, &[2]).unwrap();
        let p2 = Arc::new(pair_groupoid(2));
        let collapsed = pullback_bundle(p2.clone(), &[0; 4], &m2).unwrap();
        assert_eq!(collapsed.dims(), &[4; 4]);

        let (act, rt) = translation_action(&z2);
        let phi: Vec<Arrow> = rt.pairs.iter().map(|&(_, y)| y).collect();
        pullback_bundle(act.target().clone(), &phi, &line).unwrap();

        let err = pullback_bundle(p2, &[0, 1, 0, 0], &line).unwrap_err();
        assert!(!err.violations().is_empty());
    }

    #[test]
    fn swap_bundle_action_and_mutant() {
        let action = Arc::new(p2_swap());
        let line = Arc::new(build_trivial_bundle(action.target().clone(), &[1, 1]).unwrap());
        let ba = BundleAction::identity(action.clone(), line.clone()).validate().unwrap();
        assert_eq!(ba.to_raw().len(), 8);

        let mut bad = ba.clone();
        bad.set_map(1, 1, Matrix::from_rows(vec![vec![-Gq::one()]]));
        let err = bad.validate().unwrap_err();
        assert!(err
            .violations()
            .iter()
            .any(|v| v.axiom.starts_with("not *-preserving") && v.witness[..2] == [1, 1]));
    }

    #[test]
    fn semidirect_bundles() {
        let action = Arc::new(p2_swap());
        let line = Arc::new(build_trivial_bundle(action.target().clone(), &[1, 1]).unwrap());
        let ba = BundleAction::identity(action.clone(), line).validate().unwrap();
        let sd = semidirect_groupoid(&action);
        let sdb = semidirect_bundle(&ba, &sd).unwrap();
        assert_eq!(sdb.dims(), &[1; 8]);
        assert!(semidirect_module_violations(&ba, &sd, &sdb).is_empty());

        // G = Z/2 × Z/2 on its right-translation groupoid, Pauli line bundle pulled back
        let k4 = Arc::new(klein_four());
        let pauli = build_line_bundle(k4.clone(), &pauli_cocycle(&k4)).unwrap();
        let (act, rt) = translation_action(&k4);
        let phi: Vec<Arrow> = rt.pairs.iter().map(|&(_, y)| y).collect();
        let pulled = Arc::new(pullback_bundle(act.target().clone(), &phi, &pauli).unwrap());
        let act = Arc::new(act);
        let ba = BundleAction::identity(act.clone(), pulled).validate().unwrap();
        let sd = semidirect_groupoid(&act);
        let sdb = semidirect_bundle(&ba, &sd).unwrap();
        assert_eq!(sdb.base().len(), 64);
        assert!(semidirect_module_violations(&ba, &sd, &sdb).is_empty());
    }

    #[test]
    fn norms_of_matrix_fibers() {
        let b = build_trivial_bundle(Arc::new(pair_groupoid(2)), &[2, 2]).unwrap();
        let a: Vec<Gq> = [1, 1, 0, 0].iter().map(|&n| Gq::from_int(n)).collect();
        // [[1, 1], [0, 0]] has norm √2
        assert!((b.norm(1, &a) - 2f64.sqrt()).abs() < 1e-12);
    }
}
