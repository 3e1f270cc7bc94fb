//! The map `Φ: Γ(H ⋊ G, A ⋊ G) → Γ(G, r*E)`, `f ↦ f̌`, and a certificate
//! that it is an isomorphism of C*-algebras
//! `C*(H ⋊ G, A ⋊ G) ≅ C*(H, A) ⋊_α G`.
//!
//! The action on `A` is required to be by isomorphisms between fibers; an
//! action "by automorphisms" is read the same way.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{build_section_algebra, central_multiplier, to_c64, SectionAlgebra};
use crate::dynamics::{build_alpha, crossed_product_bundle, DynamicalSystem};
use crate::error::{Error, Result, Violation};
use crate::fell_bundle::{semidirect_bundle, BundleAction};
use crate::groupoid::HaarSystem;
use crate::linalg::{hermitian_eigen_with_residual, random_gaussian_vector, SparseVec};
use crate::measures::Tally;
use crate::scalar::{rat, GaussianRational as Gq};
use crate::semidirect::{semidirect_groupoid, semidirect_haar, Semidirect};

/// Default tolerance for `‖Φ(f)‖ = ‖f‖`.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Relative eigen-residual above which a random element is re-drawn.
pub const RESIDUAL_GUARD: f64 = 1e-10;
pub const SPECTRUM_TOLERANCE: f64 = 1e-7;
pub const NORM_SAMPLES: usize = 100;
pub const SPECTRUM_SAMPLES: usize = 10;
pub const THEOREM_SEED: u64 = 0x7e0_4e3;
const MAX_REDRAWS: usize = 8;

/// Both sides of the isomorphism, built from the same action, bundle and Haar
/// data.
#[derive(Clone, Debug)]
pub struct TheoremSides {
    pub sd: Semidirect,
    /// `Γ(H ⋊ G, A ⋊ G)` with `λ(h,x) = λ_H(h)λ_G(x)`.
    pub semidirect: SectionAlgebra,
    pub system: DynamicalSystem,
    /// `Γ(G, r*E)` with `λ_G`.
    pub crossed: SectionAlgebra,
}

pub fn build_sides(ba: Arc<BundleAction>, haar_h: HaarSystem, haar_g: HaarSystem) -> Result<TheoremSides> {
    let action = ba.action().clone();
    let sd = semidirect_groupoid(&action);
    let haar_sd = semidirect_haar(&action, &sd, &haar_h, &haar_g)?;
    let sd_bundle = Arc::new(semidirect_bundle(&ba, &sd)?);
    let semidirect = build_section_algebra(sd_bundle, haar_sd, "C*(H⋊G, A⋊G)")?;
    let system = build_alpha(ba, haar_h)?;
    let b = Arc::new(crossed_product_bundle(&system)?);
    let crossed = build_section_algebra(b, haar_g, "C*(H,A)⋊G")?;
    Ok(TheoremSides { sd, semidirect, system, crossed })
}

/// `Φ` as a basis relabeling `((h, x), i) ↦ (x, (h, i))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhiMap {
    /// Image index in the crossed product of each semidirect basis vector.
    pub perm: Vec<usize>,
    /// `Σ_{(h,x)} dim A(h)`.
    pub semidirect_dim: usize,
    /// `Σ_x dim E(r(x))`.
    pub crossed_dim: usize,
}

impl PhiMap {
    pub fn apply(&self, f: &[Gq]) -> Vec<Gq> {
        let mut out = vec![Gq::zero(); self.crossed_dim];
        for (a, c) in f.iter().enumerate() {
            out[self.perm[a]] = c.clone();
        }
        out
    }

    fn apply_c64(&self, f: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.crossed_dim);
        for (a, c) in f.iter().enumerate() {
            out[self.perm[a]] = *c;
        }
        out
    }

    fn apply_sparse(&self, v: &SparseVec) -> SparseVec {
        let mut out: SparseVec = v.iter().map(|(k, c)| (self.perm[*k], c.clone())).collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(a, &b)| a == b)
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.crossed_dim];
        self.semidirect_dim == self.crossed_dim
            && self.perm.iter().all(|&b| b < self.crossed_dim && !std::mem::replace(&mut seen[b], true))
    }
}

pub fn phi_map(sides: &TheoremSides) -> Result<PhiMap> {
    let (sd, sys) = (&sides.sd, &sides.system);
    let g = sys.bundle_action().action().actor();
    let a = sys.bundle_action().bundle();
    let semidirect_dim: usize = sd.pairs.iter().map(|&(h, _)| a.dim(h)).sum();
    let crossed_dim: usize = g.arrows().map(|x| sys.fiber_dim(g.r(x))).sum();
    if semidirect_dim != crossed_dim || semidirect_dim != sides.semidirect.dim() || crossed_dim != sides.crossed.dim() {
        return Err(Error::invalid(
            "phi map",
            vec![Violation::new(
                "dimension mismatch",
                vec![semidirect_dim, crossed_dim],
                format!("Σ dim A(h) = {semidirect_dim}, Σ dim E(r(x)) = {crossed_dim}"),
            )],
        ));
    }
    let perm = sides
        .semidirect
        .basis()
        .iter()
        .map(|&(p, i)| {
            let (h, x) = sd.pairs[p];
            sides.crossed.index_of(x, sys.fiber_index(h, i))
        })
        .collect();
    Ok(PhiMap { perm, semidirect_dim, crossed_dim })
}

/// One row of the norm-comparison table.
#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub element: String,
    pub norm: f64,
    pub image_norm: f64,
    pub diff: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TheoremCertificate {
    pub semidirect_dim: usize,
    pub crossed_dim: usize,
    pub bijective: bool,
    pub identity: bool,
    /// `Φ(e_a * e_b) = Φ(e_a) * Φ(e_b)` on all basis pairs.
    pub products: Tally,
    /// `Φ(e_a*) = Φ(e_a)*`.
    pub stars: Tally,
    pub norms: Tally,
    pub max_norm_diff: f64,
    pub redrawn: usize,
    pub spectra: Tally,
    pub max_spectrum_diff: f64,
    /// `Φ ∘ V(φ) = (φ∘r) · Φ` and `V(φ)` central on `C*(H, A)`.
    pub intertwining: Tally,
    pub norm_table: Vec<NormRow>,
    pub violations: Vec<Violation>,
}

impl TheoremCertificate {
    pub fn passed(&self) -> bool {
        self.bijective
            && self.violations.is_empty()
            && [&self.products, &self.stars, &self.norms, &self.spectra, &self.intertwining]
                .iter()
                .all(|t| t.passed())
    }
}

/// Norm from the regular representation together with the relative residual
/// of the eigensolve of `f*f`.
fn guarded_norm(alg: &SectionAlgebra, f: &DVector<Complex64>) -> (f64, f64) {
    let (mut top, mut res) = (0.0f64, 0.0f64);
    for x in alg.orthonormal_sectors(f) {
        let xtx: DMatrix<Complex64> = x.adjoint() * &x;
        let (ev, r) = hermitian_eigen_with_residual(&xtx);
        top = top.max(ev.last().copied().unwrap_or(0.0));
        res = res.max(r);
    }
    let top = top.max(0.0);
    (top.sqrt(), res / top.max(1.0))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn verify_theorem(phi: &PhiMap, sides: &TheoremSides, tolerance: f64) -> TheoremCertificate {
    let (sda, cpa) = (&sides.semidirect, &sides.crossed);
    let mut cert = TheoremCertificate {
        semidirect_dim: phi.semidirect_dim,
        crossed_dim: phi.crossed_dim,
        bijective: phi.is_bijective(),
        identity: phi.is_identity(),
        ..Default::default()
    };
    if !cert.bijective {
        cert.violations.push(Violation::new("Φ is not bijective", vec![phi.semidirect_dim, phi.crossed_dim], ""));
        return cert;
    }
    let n = phi.semidirect_dim;

    let bad_products: Vec<Violation> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            (0..n).filter_map(move |b| {
                let lhs = phi.apply_sparse(sda.basis_product(a, b));
                let mut rhs = cpa.basis_product(phi.perm[a], phi.perm[b]).clone();
                rhs.sort_by_key(|(k, _)| *k);
                (lhs != rhs).then(|| Violation::new("Φ(e_a * e_b) ≠ Φ(e_a) * Φ(e_b)", vec![a, b], ""))
            })
        })
        .collect();
    cert.products = Tally { checked: n * n, failed: bad_products.len() };
    cert.violations.extend(bad_products);
    for a in 0..n {
        let lhs = phi.apply_sparse(sda.basis_star(a));
        let mut rhs = cpa.basis_star(phi.perm[a]).clone();
        rhs.sort_by_key(|(k, _)| *k);
        if !cert.stars.record(lhs == rhs) {
            cert.violations.push(Violation::new("Φ(e_a*) ≠ Φ(e_a)*", vec![a], ""));
        }
    }

    // Norms: basis, then seeded random elements with the residual guard.
    let mut rng = ChaCha8Rng::seed_from_u64(THEOREM_SEED);
    let mut elements: Vec<(String, DVector<Complex64>, f64)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut e = DVector::zeros(n);
            e[a] = Complex64::new(1.0, 0.0);
            let norm = sda.operator_norm_c64(&e);
            (format!("basis {a}"), e, norm)
        })
        .collect();
    let seeds: Vec<u64> = (0..NORM_SAMPLES).map(|_| rng.gen()).collect();
    let randoms: Vec<(String, DVector<Complex64>, f64, usize)> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let mut redraws = 0;
            loop {
                let f = to_c64(&random_gaussian_vector(&mut local, n));
                let (norm, res) = guarded_norm(sda, &f);
                if res <= RESIDUAL_GUARD || redraws == MAX_REDRAWS {
                    return (format!("random {k}"), f, norm, redraws);
                }
                redraws += 1;
            }
        })
        .collect();
    for (label, f, norm, r) in randoms {
        cert.redrawn += r;
        elements.push((label, f, norm));
    }
    let rows: Vec<NormRow> = elements
        .par_iter()
        .map(|(label, f, norm)| {
            let image_norm = cpa.operator_norm_c64(&phi.apply_c64(f));
            NormRow { element: label.clone(), norm: *norm, image_norm, diff: (norm - image_norm).abs() }
        })
        .collect();
    for row in &rows {
        cert.max_norm_diff = cert.max_norm_diff.max(row.diff);
        if !cert.norms.record(close(row.norm, row.image_norm, tolerance)) {
            cert.violations.push(Violation::new(
                "‖Φ(f)‖ ≠ ‖f‖",
                vec![],
                format!("{}: {} vs {}", row.element, row.norm, row.image_norm),
            ));
        }
    }
    cert.norm_table = rows;

    // Spectra of self-adjoint elements f + f*.
    for k in 0..SPECTRUM_SAMPLES.min(NORM_SAMPLES) {
        let f = &elements[n + k].1;
        let h = f + sda.star_c64(f);
        let a = sda.hermitian_eigenvalues(&h);
        let b = cpa.hermitian_eigenvalues(&phi.apply_c64(&h));
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        cert.max_spectrum_diff = cert.max_spectrum_diff.max(diff);
        let scale = a.iter().chain(&b).map(|x| x.abs()).fold(1.0, f64::max);
        if !cert.spectra.record(a.len() == b.len() && diff <= SPECTRUM_TOLERANCE * scale) {
            cert.violations.push(Violation::new("spectrum not preserved", vec![k], format!("max diff {diff}")));
        }
    }

    intertwining(phi, sides, &mut rng, &mut cert);
    cert
}

/// `V(φ)` on `C*(H, A)`, the multiplier `(h,x) ↦ φ(ρ(h))` on the semidirect
/// side and `x ↦ φ(r(x))` on the crossed product agree under `Φ`; the latter
/// is a left module action on the crossed product.
fn intertwining(phi: &PhiMap, sides: &TheoremSides, rng: &mut ChaCha8Rng, cert: &mut TheoremCertificate) {
    let sys = &sides.system;
    let action = sys.bundle_action().action();
    let g = action.actor();
    let m = g.units().len();
    let mut phis: Vec<Vec<Gq>> = (0..m)
        .map(|k| (0..m).map(|j| if j == k { Gq::one() } else { Gq::zero() }).collect())
        .collect();
    phis.push((0..m).map(|_| Gq::from(rat(rng.gen_range(1..20), rng.gen_range(1..20)))).collect());
    let (sda, cpa) = (&sides.semidirect, &sides.crossed);
    let n = phi.semidirect_dim;
    for values in &phis {
        let at = |u| values[g.unit_index(u).expect("unit of G")].clone();
        let v = central_multiplier(sys.algebra(), action, values);
        cert.intertwining.checked += v.checked_pairs;
        cert.intertwining.failed += v.violations.len();
        cert.violations.extend(v.violations);
        let cp_diag: Vec<Gq> = cpa.basis().iter().map(|&(x, _)| at(g.r(x))).collect();
        for (a, &(p, i)) in sda.basis().iter().enumerate() {
            let (h, x) = sides.sd.pairs[p];
            let sd_value = at(action.moment(h));
            let e_value = &v.diagonal[sys.algebra().index_of(h, i)];
            let ok = sd_value == cp_diag[phi.perm[a]] && &sd_value == e_value;
            if !cert.intertwining.record(ok) {
                cert.violations.push(Violation::new("Φ does not intertwine V(φ)", vec![a, x], ""));
            }
        }
        for a in 0..n {
            for b in 0..n {
                let prod = cpa.basis_product(a, b);
                let ok = prod.iter().all(|(k, c)| c.is_zero() || cp_diag[*k] == cp_diag[a]);
                if !cert.intertwining.record(ok) {
                    cert.violations.push(Violation::new("(φ∘r)·(f*g) ≠ ((φ∘r)·f)*g", vec![a, b], ""));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{p2_swap, translation_action, GroupoidAction};
    use crate::fell_bundle::*;
    use crate::groupoid::library::*;
    use crate::groupoid::Arrow;

    fn swap_sides() -> TheoremSides {
        let action = Arc::new(p2_swap());
        let line = Arc::new(build_trivial_bundle(action.target().clone(), &[1, 1]).unwrap());
        let ba = Arc::new(BundleAction::identity(action.clone(), line).validate().unwrap());
        build_sides(ba, HaarSystem::counting(action.target()), HaarSystem::counting(action.actor())).unwrap()
    }

    #[test]
    fn p2_swap_theorem() {
        let sides = swap_sides();
        let phi = phi_map(&sides).unwrap();
        assert_eq!(phi.semidirect_dim, 8);
        assert!(phi.is_bijective());
        let cert = verify_theorem(&phi, &sides, NORM_TOLERANCE);
        assert!(cert.passed(), "{:?}", cert.violations);
        assert_eq!(cert.products.checked, 64);
        assert_eq!(cert.norms.checked, 108);
    }

    #[test]
    fn trivial_actor_gives_identity() {
        let h = Arc::new(pair_groupoid(2));
        let action = Arc::new(GroupoidAction::trivial(h.clone()));
        let bundle = Arc::new(build_trivial_bundle(h.clone(), &[2, 1]).unwrap());
        let ba = Arc::new(BundleAction::identity(action.clone(), bundle).validate().unwrap());
        let sides = build_sides(ba, HaarSystem::counting(&h), HaarSystem::counting(action.actor())).unwrap();
        let phi = phi_map(&sides).unwrap();
        assert!(phi.is_identity());
        assert!(verify_theorem(&phi, &sides, NORM_TOLERANCE).passed());
    }

    #[test]
    fn pauli_translation_theorem() {
        let g = Arc::new(klein_four());
        let (act, rt) = translation_action(&g);
        let pauli = build_line_bundle(g.clone(), &pauli_cocycle(&g)).unwrap();
        let map: Vec<Arrow> = rt.pairs.iter().map(|&(_, y)| y).collect();
        let pulled = Arc::new(pullback_bundle(act.target().clone(), &map, &pauli).unwrap());
        let act = Arc::new(act);
        let ba = Arc::new(BundleAction::identity(act.clone(), pulled).validate().unwrap());
        let sides = build_sides(ba, HaarSystem::counting(act.target()), HaarSystem::counting(&g)).unwrap();
        let phi = phi_map(&sides).unwrap();
        let cert = verify_theorem(&phi, &sides, NORM_TOLERANCE);
        assert!(cert.passed(), "{:?}", cert.violations);
    }

    #[test]
    fn scrambled_phi_is_caught() {
        let sides = swap_sides();
        let mut phi = phi_map(&sides).unwrap();
        phi.perm.swap(0, 1);
        let cert = verify_theorem(&phi, &sides, NORM_TOLERANCE);
        assert!(!cert.passed());
        assert!(cert.products.failed > 0);

        let mut broken = phi_map(&sides).unwrap();
        broken.perm[1] = broken.perm[0];
        assert!(!verify_theorem(&broken, &sides, NORM_TOLERANCE).bijective);
    }
}
