//! The groupoid dynamical system `(C*(H, A), G, α)` and the crossed product
//! as the Fell bundle `B = r*E` over `G`.

use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;

use crate::actions::check_invariant_haar;
use crate::algebra::{build_section_algebra, fiber_decomposition, FiberSummand, SectionAlgebra};
use crate::error::{check, Error, Result, Violation};
use crate::fell_bundle::{basis, validate_fell_bundle, BundleAction, FellBundle, MultTensor, UnitRealization};
use crate::groupoid::{Arrow, HaarSystem};
use crate::linalg::{sparse_from_dense, Matrix};
use crate::scalar::GaussianRational as Gq;

/// Tolerance for the numeric isometry check of `α_x`.
pub const ALPHA_NORM_TOLERANCE: f64 = 1e-8;

/// `E(u) = Γ(H_u, A)` for every unit `u` of `G`, with
/// `α_x(f)(h) = x·f(x⁻¹·h)` from `E(s(x))` to `E(r(x))`.
#[derive(Clone, Debug)]
pub struct DynamicalSystem {
    bundle_action: Arc<BundleAction>,
    algebra: SectionAlgebra,
    fibers: Vec<Option<FiberSummand>>,
    alpha: Vec<Matrix>,
}

impl DynamicalSystem {
    pub fn bundle_action(&self) -> &Arc<BundleAction> {
        &self.bundle_action
    }

    /// `C*(H, A)`.
    pub fn algebra(&self) -> &SectionAlgebra {
        &self.algebra
    }

    /// `E(u)`, or `None` when `H_u` is empty.
    pub fn fiber(&self, u: Arrow) -> Option<&FiberSummand> {
        let g = self.bundle_action.action().actor();
        self.fibers[g.unit_index(u).expect("unit of G")].as_ref()
    }

    pub fn fiber_dim(&self, u: Arrow) -> usize {
        self.fiber(u).map_or(0, |f| f.algebra.dim())
    }

    /// Index in `E(ρ(h))` of `e_{h,i}`.
    pub fn fiber_index(&self, h: Arrow, i: usize) -> usize {
        let u = self.bundle_action.action().moment(h);
        let f = self.fiber(u).expect("h lies in H_u");
        let local = f.arrows.iter().position(|&k| k == h).expect("h lies in H_u");
        f.algebra.index_of(local, i)
    }

    pub fn alpha(&self, x: Arrow) -> &Matrix {
        &self.alpha[x]
    }

    pub fn apply_alpha(&self, x: Arrow, f: &[Gq]) -> Vec<Gq> {
        self.alpha[x].mul_vec(f)
    }

    /// Multiplication in `E(u)`; zero fibers have empty elements.
    pub fn fiber_mul(&self, u: Arrow, a: &[Gq], b: &[Gq]) -> Vec<Gq> {
        self.fiber(u).map_or_else(Vec::new, |f| f.algebra.mul(a, b))
    }

    pub fn fiber_star(&self, u: Arrow, a: &[Gq]) -> Vec<Gq> {
        self.fiber(u).map_or_else(Vec::new, |f| f.algebra.star(a))
    }

    /// `α_u = id`, `α_{xy} = α_x α_y`, and each `α_x` is a bijective
    /// *-homomorphism, all exact; then `‖α_x(f)‖ = ‖f‖` numerically.
    pub fn violations(&self) -> Vec<Violation> {
        let g = &**self.bundle_action.action().actor();
        let mut v = Vec::new();
        for &u in g.units() {
            if self.alpha[u] != Matrix::identity(self.fiber_dim(u)) {
                v.push(Violation::new("α_u ≠ id", vec![u], ""));
            }
        }
        for (x, y) in g.composable_pairs() {
            if self.alpha[g.compose(x, y)] != self.alpha[x].mul(&self.alpha[y]) {
                v.push(Violation::new("α_xy ≠ α_x α_y", vec![x, y], ""));
            }
        }
        let hom: Vec<Violation> = g
            .arrows()
            .into_par_iter()
            .flat_map_iter(|x| {
                let mut v = Vec::new();
                let (s, r) = (g.s(x), g.r(x));
                let d = self.fiber_dim(s);
                let al = &self.alpha[x];
                if al.rows() != self.fiber_dim(r) || al.rank() != d || d != al.rows() {
                    v.push(Violation::new("α_x is not bijective", vec![x], ""));
                    return v;
                }
                let images: Vec<Vec<Gq>> = (0..d).map(|a| al.column(a)).collect();
                for a in 0..d {
                    for b in 0..d {
                        let lhs = self.apply_alpha(x, &self.fiber_mul(s, &basis(d, a), &basis(d, b)));
                        if lhs != self.fiber_mul(r, &images[a], &images[b]) {
                            v.push(Violation::new("α_x not multiplicative", vec![x, a, b], ""));
                        }
                    }
                    let lhs = self.apply_alpha(x, &self.fiber_star(s, &basis(d, a)));
                    if lhs != self.fiber_star(r, &images[a]) {
                        v.push(Violation::new("α_x not *-preserving", vec![x, a], ""));
                    }
                }
                if let (Some(fs), Some(fr)) = (self.fiber(s), self.fiber(r)) {
                    for a in 0..d {
                        let before = fs.algebra.operator_norm(&basis(d, a));
                        let after = fr.algebra.operator_norm(&images[a]);
                        if (before - after).abs() > ALPHA_NORM_TOLERANCE * before.max(1.0) {
                            v.push(Violation::new("α_x not isometric", vec![x, a], format!("{before} vs {after}")));
                        }
                    }
                }
                v
            })
            .collect();
        v.extend(hom);
        v
    }
}

/// Assembles `α` from an action on the bundle. The Haar system on `H` must be
/// invariant; the result is certified before it is returned.
pub fn build_alpha(ba: Arc<BundleAction>, haar_h: HaarSystem) -> Result<DynamicalSystem> {
    let action = ba.action().clone();
    let g = action.actor().clone();
    let rep = check_invariant_haar(&action, &haar_h);
    if let Some((x, u)) = rep.witness {
        return Err(Error::invalid(
            "dynamical system",
            vec![Violation::new("λ_H is not invariant: w(x·u) ≠ w(u)", vec![x, u], "")],
        ));
    }
    let algebra = build_section_algebra(ba.bundle().clone(), haar_h, "C*(H,A)")?;
    let dec = fiber_decomposition(&algebra, &action)?;
    check("fiber decomposition", dec.violations)?;
    let mut fibers: Vec<Option<FiberSummand>> = vec![None; g.units().len()];
    for s in dec.summands {
        let pos = g.unit_index(s.unit).expect("unit");
        fibers[pos] = Some(s);
    }
    let mut sys = DynamicalSystem { bundle_action: ba.clone(), algebra, fibers, alpha: Vec::new() };
    let a = ba.bundle();
    sys.alpha = g
        .arrows()
        .map(|x| {
            let (s, r) = (g.s(x), g.r(x));
            let mut m = Matrix::zeros(sys.fiber_dim(r), sys.fiber_dim(s));
            if let Some(fs) = sys.fiber(s) {
                for (col, &(local, j)) in fs.algebra.basis().iter().enumerate() {
                    let k = fs.arrows[local];
                    let xk = action.apply(x, k);
                    let image = ba.apply(x, k, &basis(a.dim(k), j));
                    for (l, c) in image.into_iter().enumerate().filter(|(_, c)| !c.is_zero()) {
                        m.set(sys.fiber_index(xk, l), col, c);
                    }
                }
            }
            m
        })
        .collect();
    check("dynamical system", sys.violations())?;
    Ok(sys)
}

/// `B = r*E` over `G`: fiber `E(r(x))` over `x`,
/// `(a,x)(b,y) = (a α_x(b), xy)` and `(a,x)* = (α_{x⁻¹}(a*), x⁻¹)`.
pub fn crossed_product_bundle(sys: &DynamicalSystem) -> Result<FellBundle> {
    let g = sys.bundle_action.action().actor().clone();
    let dims: Vec<usize> = g.arrows().map(|x| sys.fiber_dim(g.r(x))).collect();
    let invol = g
        .arrows()
        .map(|x| {
            let r = g.r(x);
            let d = sys.fiber_dim(r);
            let mut star = Matrix::zeros(d, d);
            for a in 0..d {
                for (k, c) in sys.fiber_star(r, &basis(d, a)).into_iter().enumerate() {
                    star.set(k, a, c);
                }
            }
            sys.alpha[g.inv(x)].mul(&star)
        })
        .collect();
    let realizations = g
        .units()
        .iter()
        .map(|&u| match sys.fiber(u) {
            Some(f) => f.algebra.regular_realization(),
            None => UnitRealization::new(Vec::new(), Matrix::zeros(0, 0)),
        })
        .collect::<Result<Vec<_>>>()?;
    let candidate = FellBundle::from_parts(
        g.clone(),
        dims.clone(),
        |x, y| {
            let r = g.r(x);
            MultTensor::from_fn(dims[x], dims[y], dims[g.compose(x, y)], |i, j| {
                let alpha_b = sys.alpha[x].column(j);
                sparse_from_dense(&sys.fiber_mul(r, &basis(dims[x], i), &alpha_b))
            })
        },
        invol,
        realizations,
    );
    validate_fell_bundle(candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{p2_swap, translation_action, GroupoidAction};
    use crate::fell_bundle::*;
    use crate::groupoid::library::*;
    use crate::groupoid::FiniteGroupoid;
    use crate::linalg::random_gaussian_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn swap_system() -> DynamicalSystem {
        let action = Arc::new(p2_swap());
        let line = Arc::new(build_trivial_bundle(action.target().clone(), &[1, 1]).unwrap());
        let ba = Arc::new(BundleAction::identity(action.clone(), line).validate().unwrap());
        build_alpha(ba, HaarSystem::counting(action.target())).unwrap()
    }

    #[test]
    fn swap_alpha_is_flip_conjugation() {
        let sys = swap_system();
        assert_eq!(sys.alpha(0), &Matrix::identity(4));
        // matrix units e_(i,j) at index 2i+j; Ad(flip) sends E_ij to E_{1-i,1-j}
        let g = sys.alpha(1);
        for k in 0..4 {
            assert_eq!(g.column(k), basis(4, 3 - k));
        }
        let b = crossed_product_bundle(&sys).unwrap();
        assert_eq!(b.dims(), &[4, 4]);
        let alg = build_section_algebra(Arc::new(b), HaarSystem::counting(&cyclic_group(2)), "B").unwrap();
        assert_eq!(alg.dim(), 8);
    }

    #[test]
    fn non_invariant_haar_is_rejected() {
        let action = Arc::new(p2_swap());
        let line = Arc::new(build_trivial_bundle(action.target().clone(), &[1, 1]).unwrap());
        let ba = Arc::new(BundleAction::identity(action.clone(), line).validate().unwrap());
        let skew = HaarSystem::from_unit_weights(action.target(), &[crate::scalar::rat_int(1), crate::scalar::rat_int(2)]).unwrap();
        assert!(build_alpha(ba, skew).is_err());
    }

    #[test]
    fn trivial_actor_gives_single_fiber() {
        let h = Arc::new(pair_groupoid(2));
        let action = Arc::new(GroupoidAction::trivial(h.clone()));
        let line = Arc::new(build_trivial_bundle(h.clone(), &[1, 1]).unwrap());
        let ba = Arc::new(BundleAction::identity(action, line).validate().unwrap());
        let sys = build_alpha(ba, HaarSystem::counting(&h)).unwrap();
        let b = crossed_product_bundle(&sys).unwrap();
        assert_eq!(b.dims(), &[4]);
    }

    fn translation_system(g: FiniteGroupoid) -> DynamicalSystem {
        let g = Arc::new(g);
        let (act, rt) = translation_action(&g);
        let line = build_line_bundle(g.clone(), &trivial_cocycle(&g)).unwrap();
        let phi: Vec<Arrow> = rt.pairs.iter().map(|&(_, y)| y).collect();
        let pulled = Arc::new(pullback_bundle(act.target().clone(), &phi, &line).unwrap());
        let act = Arc::new(act);
        let ba = Arc::new(BundleAction::identity(act.clone(), pulled).validate().unwrap());
        build_alpha(ba, HaarSystem::counting(act.target())).unwrap()
    }

    #[test]
    fn z3_translation_cocycle() {
        let sys = translation_system(cyclic_group(3));
        let g = sys.bundle_action().action().actor().clone();
        let mut pairs = 0;
        for (x, y) in g.composable_pairs() {
            assert_eq!(sys.alpha(g.compose(x, y)), &sys.alpha(x).mul(sys.alpha(y)));
            pairs += 1;
        }
        assert_eq!(pairs, 9);
    }

    /// `(f*g)(x) = Σ_{r(y)=r(x)} λ_G(y) f(y) α_y(g(y⁻¹x))` evaluated with
    /// `(a*b)(h) = Σ_{r(k)=r(h)} λ_H(k) a(k) b(k⁻¹h)` and
    /// `α_y(b)(h) = y·b(y⁻¹·h)`, straight from the bundle data.
    #[test]
    fn crossed_product_matches_double_sum() {
        let sys = translation_system(cyclic_group(3));
        let ba = sys.bundle_action().clone();
        let (act, a) = (ba.action().clone(), ba.bundle().clone());
        let (g, h) = (act.actor().clone(), act.target().clone());
        let haar_g = HaarSystem::counting(&g);
        let haar_h = HaarSystem::counting(&h);
        let b = Arc::new(crossed_product_bundle(&sys).unwrap());
        let alg = build_section_algebra(b, haar_g.clone(), "B").unwrap();

        // sections over H with values in A, as dense per-arrow vectors
        type Sec = Vec<Vec<Gq>>;
        let conv = |p: &Sec, q: &Sec| -> Sec {
            h.arrows()
                .map(|m| {
                    let mut acc = vec![Gq::zero(); a.dim(m)];
                    for k in h.arrows_with_range(h.r(m)) {
                        let kinv_m = h.compose(h.inv(k), m);
                        let w = Gq::real(haar_h.weight(k).clone());
                        for (t, c) in a.product(k, kinv_m, &p[k], &q[kinv_m]).iter().enumerate() {
                            acc[t] += &(c * &w);
                        }
                    }
                    acc
                })
                .collect()
        };
        let alpha = |y: Arrow, q: &Sec| -> Sec {
            h.arrows()
                .map(|m| {
                    if act.moment(m) != g.r(y) {
                        return vec![Gq::zero(); a.dim(m)];
                    }
                    let pre = act.apply(g.inv(y), m);
                    ba.apply(y, pre, &q[pre])
                })
                .collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let random_elem = |rng: &mut ChaCha8Rng| -> Vec<Sec> {
            g.arrows()
                .map(|x| {
                    h.arrows()
                        .map(|m| {
                            if act.moment(m) == g.r(x) {
                                random_gaussian_vector(rng, a.dim(m))
                            } else {
                                vec![Gq::zero(); a.dim(m)]
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let flatten = |f: &Vec<Sec>| -> Vec<Gq> {
            let mut out = vec![Gq::zero(); alg.dim()];
            for x in g.arrows() {
                for m in h.arrows().filter(|&m| act.moment(m) == g.r(x)) {
                    for (i, c) in f[x][m].iter().enumerate() {
                        out[alg.index_of(x, sys.fiber_index(m, i))] = c.clone();
                    }
                }
            }
            out
        };
        for _ in 0..4 {
            let (f, q) = (random_elem(&mut rng), random_elem(&mut rng));
            let prod: Vec<Sec> = g
                .arrows()
                .map(|x| {
                    let mut acc: Sec = h.arrows().map(|m| vec![Gq::zero(); a.dim(m)]).collect();
                    for y in g.arrows_with_range(g.r(x)) {
                        let w = Gq::real(haar_g.weight(y).clone());
                        let term = conv(&f[y], &alpha(y, &q[g.compose(g.inv(y), x)]));
                        for (m, t) in term.iter().enumerate() {
                            for (i, c) in t.iter().enumerate() {
                                acc[m][i] += &(c * &w);
                            }
                        }
                    }
                    acc
                })
                .collect();
            assert_eq!(alg.mul(&flatten(&f), &flatten(&q)), flatten(&prod));
        }
    }
}
