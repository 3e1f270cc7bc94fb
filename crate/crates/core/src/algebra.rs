//! The convolution *-algebra `Γ(G, A)` of a Fell bundle as exact structure
//! constants, with its left regular representation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::actions::GroupoidAction;
use crate::error::{check, Error, Result, Violation};
use crate::fell_bundle::{basis, restrict_bundle, FellBundle, UnitRealization};
use crate::groupoid::{Arrow, FiniteGroupoid, HaarSystem};
use crate::linalg::{sparse_add_scaled, sparse_from_dense, GramGeometry, Matrix, SparseVec};
use crate::scalar::{format_rational, GaussianRational as Gq};

/// `Γ(G, A)` with basis `e_{h,i}` ordered by `(h, i)`.
///
/// `e_{h,i} * e_{k,j} = λ(h) · e_i e_j ∈ A(hk)` when `s(h) = r(k)`, and
/// `e_{h,i}* = e_i* ∈ A(h⁻¹)`.
#[derive(Clone, Debug)]
pub struct SectionAlgebra {
    bundle: Arc<FellBundle>,
    haar: HaarSystem,
    label: String,
    basis: Vec<(Arrow, usize)>,
    offsets: Vec<usize>,
    products: Vec<SparseVec>,
    stars: Vec<SparseVec>,
    products_c64: Vec<Vec<(usize, Complex64)>>,
    blocks: Vec<Matrix>,
    sectors: Vec<Sector>,
    unit: Vec<Gq>,
}

/// Basis vectors over arrows with a common source. Left convolution maps each
/// sector into itself and the Gram matrix is block diagonal, so the regular
/// representation splits as a direct sum over sectors.
#[derive(Clone, Debug)]
struct Sector {
    indices: Vec<usize>,
    geometry: GramGeometry,
}

impl SectionAlgebra {
    pub fn groupoid(&self) -> &Arc<FiniteGroupoid> {
        self.bundle.base()
    }

    pub fn bundle(&self) -> &Arc<FellBundle> {
        &self.bundle
    }

    pub fn haar(&self) -> &HaarSystem {
        &self.haar
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[(Arrow, usize)] {
        &self.basis
    }

    /// Index of `e_{h,i}`.
    pub fn index_of(&self, h: Arrow, i: usize) -> usize {
        self.offsets[h] + i
    }

    /// `e_a * e_b` in sparse coordinates.
    pub fn basis_product(&self, a: usize, b: usize) -> &SparseVec {
        &self.products[a * self.dim() + b]
    }

    /// `e_a*` in sparse coordinates.
    pub fn basis_star(&self, a: usize) -> &SparseVec {
        &self.stars[a]
    }

    pub fn unit(&self) -> &[Gq] {
        &self.unit
    }

    pub fn mul(&self, f: &[Gq], g: &[Gq]) -> Vec<Gq> {
        let n = self.dim();
        let mut out = vec![Gq::zero(); n];
        for (a, fa) in f.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            for (b, gb) in g.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                let c = fa * gb;
                for (k, t) in self.basis_product(a, b) {
                    out[*k] += &(t * &c);
                }
            }
        }
        out
    }

    pub fn star(&self, f: &[Gq]) -> Vec<Gq> {
        let mut out = vec![Gq::zero(); self.dim()];
        for (a, fa) in f.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            let c = fa.conj();
            for (k, t) in self.basis_star(a) {
                out[*k] += &(t * &c);
            }
        }
        out
    }

    pub fn star_c64(&self, f: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim());
        for (a, fa) in f.iter().enumerate() {
            for (k, t) in self.basis_star(a) {
                out[*k] += t.to_c64() * fa.conj();
            }
        }
        out
    }

    /// Matrix of `g ↦ f * g` in the basis `e_a`.
    pub fn left_operator_c64(&self, f: &DVector<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (a, fa) in f.iter().enumerate().filter(|(_, c)| c.norm() != 0.0) {
            for b in 0..n {
                for (k, t) in &self.products_c64[a * n + b] {
                    m[(*k, b)] += t * fa;
                }
            }
        }
        m
    }

    pub fn left_operator(&self, f: &[Gq]) -> DMatrix<Complex64> {
        self.left_operator_c64(&to_c64(f))
    }

    /// Matrix of `g ↦ g * f`.
    pub fn right_operator_c64(&self, f: &DVector<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (b, fb) in f.iter().enumerate().filter(|(_, c)| c.norm() != 0.0) {
            for a in 0..n {
                for (k, t) in &self.products_c64[a * n + b] {
                    m[(*k, a)] += t * fb;
                }
            }
        }
        m
    }

    /// Gram block of the regular representation over arrow `h`.
    pub fn gram_block(&self, h: Arrow) -> &Matrix {
        &self.blocks[h]
    }

    /// C*-norm: operator norm of left convolution on `⊕_h A(h)`.
    pub fn operator_norm(&self, f: &[Gq]) -> f64 {
        self.operator_norm_c64(&to_c64(f))
    }

    pub fn operator_norm_c64(&self, f: &DVector<Complex64>) -> f64 {
        self.sectors
            .iter()
            .map(|sec| sec.geometry.operator_norm(&self.sector_operator(sec, f)))
            .fold(0.0, f64::max)
    }

    /// Left convolution by `f` restricted to one sector, in its basis.
    fn sector_operator(&self, sec: &Sector, f: &DVector<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        let m = sec.indices.len();
        let mut out = DMatrix::zeros(m, m);
        for (a, fa) in f.iter().enumerate().filter(|(_, c)| c.norm() != 0.0) {
            for (lb, &b) in sec.indices.iter().enumerate() {
                for (k, t) in &self.products_c64[a * n + b] {
                    let lk = sec.indices.binary_search(k).expect("left convolution preserves sectors");
                    out[(lk, lb)] += t * fa;
                }
            }
        }
        out
    }

    /// The regular representation of `f` in orthonormal coordinates, one
    /// matrix per sector.
    pub fn orthonormal_sectors(&self, f: &DVector<Complex64>) -> Vec<DMatrix<Complex64>> {
        self.sectors.iter().map(|sec| sec.geometry.orthonormalize(&self.sector_operator(sec, f))).collect()
    }

    /// Eigenvalues (ascending) of a self-adjoint element in the regular
    /// representation, with the worst eigen-residual.
    pub fn hermitian_spectrum(&self, f: &DVector<Complex64>) -> (Vec<f64>, f64) {
        let mut ev = Vec::with_capacity(self.dim());
        let mut worst = 0.0f64;
        for x in self.orthonormal_sectors(f) {
            let (e, r) = crate::linalg::hermitian_eigen_with_residual(&x);
            ev.extend(e);
            worst = worst.max(r);
        }
        ev.sort_by(f64::total_cmp);
        (ev, worst)
    }

    /// Eigenvalues only; cheaper than [`Self::hermitian_spectrum`].
    pub fn hermitian_eigenvalues(&self, f: &DVector<Complex64>) -> Vec<f64> {
        let mut ev: Vec<f64> =
            self.orthonormal_sectors(f).iter().flat_map(crate::linalg::hermitian_eigenvalues).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Exact *-algebra axioms on the basis: associativity, anti-multiplicativity
    /// of the involution, and involutivity.
    pub fn axiom_violations(&self) -> Vec<Violation> {
        let n = self.dim();
        let mut v: Vec<Violation> = (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let mut v = Vec::new();
                let ha = self.basis[a].0;
                for b in self.composable_with(ha) {
                    let ab = self.basis_product(a, b);
                    let hb = self.basis[b].0;
                    for c in self.composable_with(hb) {
                        let mut lhs = SparseVec::new();
                        for (p, x) in ab {
                            sparse_add_scaled(&mut lhs, self.basis_product(*p, c), x);
                        }
                        let mut rhs = SparseVec::new();
                        for (p, x) in self.basis_product(b, c) {
                            sparse_add_scaled(&mut rhs, self.basis_product(a, *p), x);
                        }
                        if lhs != rhs {
                            v.push(Violation::new("associativity (f*g)*k = f*(g*k)", vec![a, b, c], ""));
                        }
                    }
                    let lhs = self.star(&dense(ab, n));
                    let rhs = self.mul(&dense(self.basis_star(b), n), &dense(self.basis_star(a), n));
                    if lhs != rhs {
                        v.push(Violation::new("(f*g)* = g* * f*", vec![a, b], ""));
                    }
                }
                v
            })
            .collect();
        for a in 0..n {
            if self.star(&dense(self.basis_star(a), n)) != basis(n, a) {
                v.push(Violation::new("involution is not involutive", vec![a], ""));
            }
        }
        v
    }

    fn composable_with(&self, h: Arrow) -> impl Iterator<Item = usize> + '_ {
        let g = &**self.groupoid();
        g.arrows_with_range(g.s(h)).flat_map(move |k| self.offsets[k]..self.offsets[k] + self.bundle.dim(k))
    }

    /// `⟨x, y⟩` of the regular representation.
    pub fn inner(&self, x: &SparseVec, y: &SparseVec) -> Gq {
        let mut acc = Gq::zero();
        for (p, xp) in x {
            let (h, i) = self.basis[*p];
            for (q, yq) in y {
                let (k, j) = self.basis[*q];
                if h == k {
                    acc += &(&(&xp.conj() * yq) * self.blocks[h].get(i, j));
                }
            }
        }
        acc
    }

    /// Exact check that the left regular representation is *-preserving:
    /// `⟨e_a * e_b, e_c⟩ = ⟨e_b, e_a* * e_c⟩`.
    pub fn regular_star_violations(&self) -> Vec<Violation> {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let mut v = Vec::new();
                let ha = self.basis[a].0;
                let a_star = self.basis_star(a);
                for b in self.composable_with(ha) {
                    let ab = self.basis_product(a, b);
                    let hab = self.groupoid().compose(ha, self.basis[b].0);
                    for c in self.offsets[hab]..self.offsets[hab] + self.bundle.dim(hab) {
                        let mut y = SparseVec::new();
                        for (p, x) in a_star {
                            sparse_add_scaled(&mut y, self.basis_product(*p, c), x);
                        }
                        let lhs = self.inner(ab, &vec![(c, Gq::one())]);
                        let rhs = self.inner(&vec![(b, Gq::one())], &y);
                        if lhs != rhs {
                            v.push(Violation::new("regular representation not *-preserving", vec![a, b, c], ""));
                        }
                    }
                }
                v
            })
            .collect()
    }

    /// The left regular representation as an exact realization: images
    /// `L_{e_a}` and the Gram matrix of the inner product.
    pub fn regular_realization(&self) -> Result<UnitRealization> {
        let n = self.dim();
        let images = (0..n)
            .map(|a| {
                let mut m = Matrix::zeros(n, n);
                for b in 0..n {
                    for (k, t) in self.basis_product(a, b) {
                        m.set(*k, b, t.clone());
                    }
                }
                m
            })
            .collect();
        let mut gram = Matrix::zeros(n, n);
        for h in self.groupoid().arrows() {
            let o = self.offsets[h];
            let blk = &self.blocks[h];
            for i in 0..blk.rows() {
                for j in 0..blk.cols() {
                    gram.set(o + i, o + j, blk.get(i, j).clone());
                }
            }
        }
        UnitRealization::new(images, gram)
    }

    pub fn is_commutative(&self) -> bool {
        let n = self.dim();
        (0..n).all(|a| (0..n).all(|b| self.basis_product(a, b) == self.basis_product(b, a)))
    }

    /// Exact dimension of the center.
    pub fn center_dimension(&self) -> usize {
        let n = self.dim();
        let mut rows = Vec::new();
        for b in 0..n {
            // coefficient of e_k in e_b z − z e_b, as a linear form in z
            let mut forms = vec![vec![Gq::zero(); n]; n];
            for a in 0..n {
                for (k, t) in self.basis_product(b, a) {
                    forms[*k][a] += t;
                }
                for (k, t) in self.basis_product(a, b) {
                    forms[*k][a] -= t;
                }
            }
            rows.extend(forms.into_iter().filter(|r| r.iter().any(|c| !c.is_zero())));
        }
        if rows.is_empty() {
            return n;
        }
        n - Matrix::from_rows(rows).rank()
    }

    /// Structure constants in a stable, human-readable form.
    pub fn dump(&self) -> AlgebraDump {
        let n = self.dim();
        let g = &**self.groupoid();
        let mut products = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let p = self.basis_product(a, b);
                if !p.is_empty() {
                    products.push(ProductEntry {
                        left: a,
                        right: b,
                        terms: p.iter().map(|(k, c)| (*k, c.to_string())).collect(),
                    });
                }
            }
        }
        AlgebraDump {
            label: self.label.clone(),
            dim: n,
            basis: self.basis.iter().map(|&(h, i)| format!("{}:{}", g.label(h), i)).collect(),
            haar: self.haar.weights().iter().map(format_rational).collect(),
            products,
            stars: self.stars.iter().map(|s| s.iter().map(|(k, c)| (*k, c.to_string())).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductEntry {
    pub left: usize,
    pub right: usize,
    pub terms: Vec<(usize, String)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraDump {
    pub label: String,
    pub dim: usize,
    pub basis: Vec<String>,
    pub haar: Vec<String>,
    pub products: Vec<ProductEntry>,
    pub stars: Vec<Vec<(usize, String)>>,
}

pub(crate) fn dense(v: &SparseVec, n: usize) -> Vec<Gq> {
    crate::linalg::sparse_to_dense(v, n)
}

pub fn to_c64(f: &[Gq]) -> DVector<Complex64> {
    DVector::from_iterator(f.len(), f.iter().map(Gq::to_c64))
}

/// Builds `Γ(G, A)` for the Haar system `λ` and re-verifies every *-algebra
/// axiom, the *-property of the regular representation, and faithfulness.
pub fn build_section_algebra(bundle: Arc<FellBundle>, haar: HaarSystem, label: impl Into<String>) -> Result<SectionAlgebra> {
    let g = bundle.base().clone();
    let mut offsets = Vec::with_capacity(g.len());
    let mut basis_list = Vec::new();
    for h in g.arrows() {
        offsets.push(basis_list.len());
        basis_list.extend((0..bundle.dim(h)).map(|i| (h, i)));
    }
    let n = basis_list.len();
    let products: Vec<SparseVec> = (0..n * n)
        .into_par_iter()
        .map(|ab| {
            let ((h, i), (k, j)) = (basis_list[ab / n], basis_list[ab % n]);
            if g.s(h) != g.r(k) {
                return SparseVec::new();
            }
            let hk = g.compose(h, k);
            let w = Gq::real(haar.weight(h).clone());
            bundle
                .mult(h, k)
                .basis_product(i, j)
                .iter()
                .map(|(l, c)| (offsets[hk] + l, c * &w))
                .collect()
        })
        .collect();
    let stars: Vec<SparseVec> = basis_list
        .iter()
        .map(|&(h, i)| {
            let hinv = g.inv(h);
            sparse_from_dense(&bundle.star(h, &basis(bundle.dim(h), i)))
                .into_iter()
                .map(|(l, c)| (offsets[hinv] + l, c))
                .collect()
        })
        .collect();
    let blocks: Vec<Matrix> = g
        .arrows()
        .map(|h| {
            let d = bundle.dim(h);
            let (s, hinv) = (g.s(h), g.inv(h));
            let rep = bundle.realization(s);
            let w = Gq::real(haar.weight(hinv).clone());
            let mut m = Matrix::zeros(d, d);
            for i in 0..d {
                let ei_star = bundle.star(h, &basis(d, i));
                for j in 0..d {
                    let x = bundle.product(hinv, h, &ei_star, &basis(d, j));
                    m.set(i, j, &rep.represent(&x).trace() * &w);
                }
            }
            m
        })
        .collect();
    let mut sectors = Vec::new();
    for &u in g.units() {
        let indices: Vec<usize> =
            (0..n).filter(|&a| g.s(basis_list[a].0) == u).collect();
        if indices.is_empty() {
            continue;
        }
        let m = indices.len();
        let mut gram = DMatrix::zeros(m, m);
        let mut o = 0;
        for h in g.arrows().filter(|&h| g.s(h) == u) {
            let b = blocks[h].to_c64();
            gram.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(&b);
            o += b.nrows();
        }
        let geometry = GramGeometry::new(&gram)
            .ok_or_else(|| Error::Numerical("regular representation inner product is not definite".into()))?;
        sectors.push(Sector { indices, geometry });
    }
    let products_c64 = products.iter().map(|p| p.iter().map(|(k, c)| (*k, c.to_c64())).collect()).collect();
    let mut alg = SectionAlgebra {
        bundle,
        haar,
        label: label.into(),
        basis: basis_list,
        offsets,
        products,
        stars,
        products_c64,
        blocks,
        sectors,
        unit: Vec::new(),
    };
    check("section algebra", alg.axiom_violations())?;
    check("section algebra", alg.regular_star_violations())?;
    alg.unit = find_unit(&alg)?;
    Ok(alg)
}

/// `Σ_v λ(v)⁻¹ 1_{A(v)}`, verified to be a two-sided unit. A unit makes the
/// left regular representation injective (`L_f 1 = f`).
fn find_unit(alg: &SectionAlgebra) -> Result<Vec<Gq>> {
    let g = &**alg.groupoid();
    let a = &**alg.bundle();
    let n = alg.dim();
    let mut unit = vec![Gq::zero(); n];
    for &v in g.units() {
        let d = a.dim(v);
        if d == 0 {
            continue;
        }
        // Σ_i c_i e_i e_j = e_j for every j
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for j in 0..d {
            let cols: Vec<Vec<Gq>> = (0..d).map(|i| a.product(v, v, &basis(d, i), &basis(d, j))).collect();
            for l in 0..d {
                rows.push(cols.iter().map(|c| c[l].clone()).collect());
                rhs.push(if l == j { Gq::one() } else { Gq::zero() });
            }
        }
        let c = Matrix::from_rows(rows)
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical(format!("unit fiber over {v} has no unit")))?;
        let w = Gq::real(alg.haar.weight(v).clone()).inv().expect("positive weight");
        for (i, ci) in c.iter().enumerate() {
            unit[alg.index_of(v, i)] = ci * &w;
        }
    }
    for b in 0..n {
        let e = basis(n, b);
        if alg.mul(&unit, &e) != e || alg.mul(&e, &unit) != e {
            return Err(Error::invalid(
                "section algebra",
                vec![Violation::new("no two-sided unit; regular representation may not be faithful", vec![b], "")],
            ));
        }
    }
    Ok(unit)
}

/// `V(φ) f(h) = φ(ρ(h)) f(h)` together with its centrality certificate.
#[derive(Clone, Debug)]
pub struct CentralMultiplier {
    pub diagonal: Vec<Gq>,
    pub checked_pairs: usize,
    pub violations: Vec<Violation>,
}

impl CentralMultiplier {
    pub fn apply(&self, f: &[Gq]) -> Vec<Gq> {
        f.iter().zip(&self.diagonal).map(|(a, b)| a * b).collect()
    }
}

/// `φ` is given per unit of `G` (indexed by position in `G.units()`).
pub fn central_multiplier(alg: &SectionAlgebra, action: &GroupoidAction, phi: &[Gq]) -> CentralMultiplier {
    let gg = &**action.actor();
    let diagonal: Vec<Gq> = alg
        .basis()
        .iter()
        .map(|&(h, _)| phi[gg.unit_index(action.moment(h)).expect("moment is a unit")].clone())
        .collect();
    let n = alg.dim();
    let mut violations = Vec::new();
    let mut checked_pairs = 0;
    for a in 0..n {
        for b in 0..n {
            let p = dense(alg.basis_product(a, b), n);
            if p.iter().all(Gq::is_zero) && diagonal[a] == diagonal[b] {
                checked_pairs += 1;
                continue;
            }
            checked_pairs += 1;
            let v_fg: Vec<Gq> = p.iter().zip(&diagonal).map(|(x, d)| x * d).collect();
            let f_vg = alg.basis_product(a, b).iter().fold(vec![Gq::zero(); n], |mut acc, (k, c)| {
                acc[*k] += &(c * &diagonal[b]);
                acc
            });
            let vf_g = alg.basis_product(a, b).iter().fold(vec![Gq::zero(); n], |mut acc, (k, c)| {
                acc[*k] += &(c * &diagonal[a]);
                acc
            });
            if v_fg != f_vg || v_fg != vf_g {
                violations.push(Violation::new("V(φ)(f*g) = f*V(φ)g = V(φ)f*g", vec![a, b], ""));
            }
        }
    }
    CentralMultiplier { diagonal, checked_pairs, violations }
}

/// One summand `Γ(H_u, A|_{H_u})` of the fiber decomposition over `G⁰`.
#[derive(Clone, Debug)]
pub struct FiberSummand {
    /// Unit of `G`.
    pub unit: Arrow,
    pub algebra: SectionAlgebra,
    /// Basis index in the big algebra of each summand basis element.
    pub embed: Vec<usize>,
    /// Arrow embedding `H_u → H`.
    pub arrows: Vec<Arrow>,
}

#[derive(Clone, Debug)]
pub struct FiberDecomposition {
    pub summands: Vec<FiberSummand>,
    pub violations: Vec<Violation>,
}

/// Splits `Γ(H, A)` over the units of `G` through `ρ`, and certifies that
/// cross-fiber products vanish and each summand is exactly the section
/// algebra of the restricted bundle.
pub fn fiber_decomposition(alg: &SectionAlgebra, action: &GroupoidAction) -> Result<FiberDecomposition> {
    let gg = &**action.actor();
    let n = alg.dim();
    let mut violations = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let (ha, hb) = (alg.basis()[a].0, alg.basis()[b].0);
            if action.moment(ha) != action.moment(hb) && !alg.basis_product(a, b).is_empty() {
                violations.push(Violation::new("cross-fiber product is nonzero", vec![a, b], ""));
            }
        }
    }
    let mut summands = Vec::new();
    for &u in gg.units() {
        if action.fiber_units(u).is_empty() {
            continue;
        }
        let (sub, arrows) = action.fiber(u);
        let sub = Arc::new(sub);
        let bundle = restrict_bundle(sub.clone(), &arrows, alg.bundle())?;
        let haar = alg.haar().restrict(&arrows);
        let algebra = build_section_algebra(Arc::new(bundle), haar, format!("{} | fiber {}", alg.label(), gg.label(u)))?;
        let embed: Vec<usize> = algebra.basis().iter().map(|&(h, i)| alg.index_of(arrows[h], i)).collect();
        let m = algebra.dim();
        for a in 0..m {
            for b in 0..m {
                let small: SparseVec =
                    algebra.basis_product(a, b).iter().map(|(k, c)| (embed[*k], c.clone())).collect();
                if &small != alg.basis_product(embed[a], embed[b]) {
                    violations.push(Violation::new("summand structure constants differ", vec![u, a, b], ""));
                }
            }
            let small: SparseVec = algebra.basis_star(a).iter().map(|(k, c)| (embed[*k], c.clone())).collect();
            if &small != alg.basis_star(embed[a]) {
                violations.push(Violation::new("summand involution differs", vec![u, a], ""));
            }
        }
        summands.push(FiberSummand { unit: u, algebra, embed, arrows });
    }
    let covered: usize = summands.iter().map(|s| s.algebra.dim()).sum();
    if covered != n {
        violations.push(Violation::new("summands do not exhaust the algebra", vec![covered, n], ""));
    }
    Ok(FiberDecomposition { summands, violations })
}

/// Certificate that `units[i][j]` are matrix units spanning the algebra:
/// `E_ij E_kl = δ_jk E_il`, `E_ij* = E_ji`, `Σ E_ii = 1`, rank `n²`.
pub fn matrix_unit_violations(alg: &SectionAlgebra, units: &[Vec<Vec<Gq>>]) -> Vec<Violation> {
    let n = units.len();
    let d = alg.dim();
    let mut v = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let expect = if j == k { units[i][l].clone() } else { vec![Gq::zero(); d] };
                    if alg.mul(&units[i][j], &units[k][l]) != expect {
                        v.push(Violation::new("E_ij E_kl ≠ δ_jk E_il", vec![i, j, k, l], ""));
                    }
                }
            }
            if alg.star(&units[i][j]) != units[j][i] {
                v.push(Violation::new("E_ij* ≠ E_ji", vec![i, j], ""));
            }
        }
    }
    let sum = (0..n).fold(vec![Gq::zero(); d], |acc, i| acc.iter().zip(&units[i][i]).map(|(a, b)| a + b).collect());
    if sum != alg.unit() {
        v.push(Violation::new("Σ E_ii ≠ 1", vec![], ""));
    }
    let flat: Vec<Vec<Gq>> = units.iter().flatten().cloned().collect();
    if crate::linalg::rank_of_vectors(&flat) != d || n * n != d {
        v.push(Violation::new("matrix units do not span", vec![n, d], ""));
    }
    v
}

/// Matrix units `E_ij = λ(i,j)⁻¹ e_{(i,j)}` of the trivial line bundle over
/// the pair groupoid on `n` points (arrow `(i,j)` at index `i·n + j`).
/// They are self-adjoint as a family only for constant unit weights.
pub fn pair_groupoid_matrix_units(alg: &SectionAlgebra, n: usize) -> Vec<Vec<Vec<Gq>>> {
    let d = alg.dim();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let h = i * n + j;
                    let mut e = vec![Gq::zero(); d];
                    e[alg.index_of(h, 0)] = Gq::real(alg.haar().weight(h).clone()).inv().expect("positive weight");
                    e
                })
                .collect()
        })
        .collect()
}

/// Spectral norms of all basis elements, by arrow, for reports.
pub fn basis_norms(alg: &SectionAlgebra) -> Vec<f64> {
    (0..alg.dim()).map(|a| alg.operator_norm(&basis(alg.dim(), a))).collect()
}

/// Helper for tests and reports: `Σ_b c_b e_b` from `(index, coefficient)` pairs.
pub fn element(alg: &SectionAlgebra, terms: &[(usize, Gq)]) -> Vec<Gq> {
    let mut f = vec![Gq::zero(); alg.dim()];
    for (k, c) in terms {
        f[*k] += c;
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::p2_swap;
    use crate::fell_bundle::*;
    use crate::groupoid::library::*;
    use crate::scalar::rat_int;
    use proptest::prelude::*;

    fn line(g: FiniteGroupoid) -> SectionAlgebra {
        let g = Arc::new(g);
        let b = Arc::new(build_trivial_bundle(g.clone(), &vec![1; g.units().len()]).unwrap());
        build_section_algebra(b, HaarSystem::counting(&g), "line").unwrap()
    }

    #[test]
    fn pair_groupoid_is_m2() {
        let alg = line(pair_groupoid(2));
        let units = pair_groupoid_matrix_units(&alg, 2);
        assert!(matrix_unit_violations(&alg, &units).is_empty());
        assert!((alg.operator_norm(alg.unit()) - 1.0).abs() < 1e-10);
        assert!((alg.operator_norm(&units[0][1]) - 1.0).abs() < 1e-10);
        assert_eq!(alg.center_dimension(), 1);
    }

    #[test]
    fn weighted_pair_groupoid_matrix_units() {
        let g = Arc::new(pair_groupoid(3));
        let haar = HaarSystem::from_unit_weights(&g, &[rat_int(3), rat_int(3), rat_int(3)]).unwrap();
        let b = Arc::new(build_trivial_bundle(g.clone(), &[1, 1, 1]).unwrap());
        let alg = build_section_algebra(b, haar, "weighted").unwrap();
        assert!(matrix_unit_violations(&alg, &pair_groupoid_matrix_units(&alg, 3)).is_empty());
        let e01 = &pair_groupoid_matrix_units(&alg, 3)[0][1];
        assert!((alg.operator_norm(e01) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn group_algebra_of_z2() {
        let alg = line(cyclic_group(2));
        assert!(alg.is_commutative());
        let f = vec![Gq::one(), Gq::one()];
        assert!((alg.operator_norm(&f) - 2.0).abs() < 1e-10);
        let half = Gq::from_ratio(1, 2);
        let p = vec![half.clone(), half.clone()];
        let q = vec![half.clone(), -half];
        assert_eq!(alg.mul(&p, &p), p);
        assert_eq!(alg.mul(&q, &q), q);
        assert!(alg.mul(&p, &q).iter().all(Gq::is_zero));
    }

    #[test]
    fn sign_twisted_z2() {
        let z2 = Arc::new(cyclic_group(2));
        let b = Arc::new(build_line_bundle(z2.clone(), &sign_cocycle_z2(&z2)).unwrap());
        let alg = build_section_algebra(b, HaarSystem::counting(&z2), "twisted").unwrap();
        assert!(alg.is_commutative());
        // δ_g is skew-adjoint with δ_g² = −1, so iδ_g has spectrum {±1}
        let i_dg = to_c64(&[Gq::zero(), Gq::i()]);
        let (ev, res) = alg.hermitian_spectrum(&i_dg);
        assert!(res < 1e-12);
        assert!((ev[0] + 1.0).abs() < 1e-10 && (ev[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pauli_algebra_has_trivial_center() {
        let k4 = Arc::new(klein_four());
        let b = Arc::new(build_line_bundle(k4.clone(), &pauli_cocycle(&k4)).unwrap());
        let alg = build_section_algebra(b, HaarSystem::counting(&k4), "pauli").unwrap();
        assert_eq!(alg.dim(), 4);
        assert_eq!(alg.center_dimension(), 1);
    }

    #[test]
    fn trivial_m2_bundle_over_p2_is_m4() {
        let g = Arc::new(pair_groupoid(2));
        let b = Arc::new(build_trivial_bundle(g.clone(), &[2, 2]).unwrap());
        let alg = build_section_algebra(b, HaarSystem::counting(&g), "m4").unwrap();
        assert_eq!(alg.dim(), 16);
        assert_eq!(alg.center_dimension(), 1);
    }

    #[test]
    fn central_multipliers_and_fibers() {
        let action = p2_swap();
        let alg = line(pair_groupoid(2));
        let one = central_multiplier(&alg, &action, &[Gq::one()]);
        assert!(one.violations.is_empty());
        assert!(one.diagonal.iter().all(|d| d.is_one()));
        let scalar = central_multiplier(&alg, &action, &[Gq::from_int(3)]);
        assert_eq!(scalar.apply(alg.unit()), alg.unit().iter().map(|c| c * &Gq::from_int(3)).collect::<Vec<_>>());
        let dec = fiber_decomposition(&alg, &action).unwrap();
        assert!(dec.violations.is_empty());
        assert_eq!(dec.summands.len(), 1);

        // P2 ⊔ P2 over the two units of P2: the moment sends each copy to one unit
        let h = Arc::new(disjoint_union(&pair_groupoid(2), &pair_groupoid(2)));
        let g = Arc::new(pair_groupoid(2));
        let moment: Vec<Arrow> = h.arrows().map(|k| if k < 4 { 0 } else { 3 }).collect();
        let table: Vec<[Arrow; 3]> = h
            .arrows()
            .flat_map(|k| {
                let (u, other) = if k < 4 { (0, k + 4) } else { (3, k - 4) };
                let across = if k < 4 { 2 } else { 1 };
                [[u, k, k], [across, k, other]]
            })
            .collect();
        let raw = crate::actions::RawGroupoidAction { moment, table };
        let action = GroupoidAction::validate(g, h.clone(), &raw).unwrap();
        let b = Arc::new(build_trivial_bundle(h.clone(), &[1; 4]).unwrap());
        let alg = build_section_algebra(b, HaarSystem::counting(&h), "two").unwrap();
        let dec = fiber_decomposition(&alg, &action).unwrap();
        assert!(dec.violations.is_empty());
        assert_eq!(dec.summands.iter().map(|s| s.algebra.dim()).collect::<Vec<_>>(), vec![4, 4]);
        let proj = central_multiplier(&alg, &action, &[Gq::one(), Gq::zero()]);
        assert!(proj.violations.is_empty());
        assert_eq!(proj.diagonal.iter().filter(|d| d.is_one()).count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn c_star_identity_in_p2_m2(coeffs in proptest::collection::vec((-3i64..=3, -3i64..=3), 16)) {
            let g = Arc::new(pair_groupoid(2));
            let b = Arc::new(build_trivial_bundle(g.clone(), &[2, 2]).unwrap());
            let alg = build_section_algebra(b, HaarSystem::counting(&g), "m4").unwrap();
            let f: Vec<Gq> = coeffs.iter().map(|&(a, b)| Gq::new(rat_int(a), rat_int(b))).collect();
            let n = alg.operator_norm(&f);
            let ns = alg.operator_norm(&alg.star(&f));
            let nss = alg.operator_norm(&alg.mul(&alg.star(&f), &f));
            prop_assert!((n - ns).abs() <= 1e-8 * n.max(1.0));
            prop_assert!((nss - n * n).abs() <= 1e-8 * (n * n).max(1.0));
        }
    }
}
