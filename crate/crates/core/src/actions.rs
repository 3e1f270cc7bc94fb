//! Actions of a groupoid `G` on a groupoid `H` by isomorphisms, and
//! invariance of Haar systems on `H`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result, Violation};
use crate::groupoid::{right_translation_groupoid, Arrow, FiniteGroupoid, HaarSystem, RightTranslation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawGroupoidAction {
    /// `ρ_H(h)`, a unit of `G`, for every arrow of `H`.
    pub moment: Vec<Arrow>,
    /// Triples `[x, h, x·h]`.
    pub table: Vec<[Arrow; 3]>,
}

/// `G` acting on `H` by isomorphisms: `ρ_H` is a groupoid bundle and each
/// `h ↦ x·h` is an isomorphism `H_{s(x)} → H_{r(x)}`.
#[derive(Clone, Debug)]
pub struct GroupoidAction {
    actor: Arc<FiniteGroupoid>,
    target: Arc<FiniteGroupoid>,
    moment: Vec<Arrow>,
    table: Vec<Option<Arrow>>,
}

impl GroupoidAction {
    pub fn validate(actor: Arc<FiniteGroupoid>, target: Arc<FiniteGroupoid>, raw: &RawGroupoidAction) -> Result<Self> {
        let (g, h) = (&*actor, &*target);
        let mut v = Vec::new();
        if raw.moment.len() != h.len() {
            v.push(Violation::new("moment table has wrong length", vec![raw.moment.len(), h.len()], ""));
            return Err(Error::invalid("groupoid action", v));
        }
        for (k, &u) in raw.moment.iter().enumerate() {
            if u >= g.len() || !g.is_unit(u) {
                v.push(Violation::new("moment is not a unit of G", vec![k], ""));
            }
        }
        let mut table = vec![None; g.len() * h.len()];
        for &[x, k, xk] in &raw.table {
            if x >= g.len() || k >= h.len() || xk >= h.len() {
                v.push(Violation::new("action index out of range", vec![x, k, xk], ""));
            } else if table[x * h.len() + k].replace(xk).is_some() {
                v.push(Violation::new("duplicate action entry", vec![x, k], ""));
            }
        }
        check("groupoid action", v)?;
        let action = GroupoidAction { actor, target, moment: raw.moment.clone(), table };
        check("groupoid action", action.violations())?;
        Ok(action)
    }

    /// Exhaustive check of every action-by-isomorphisms axiom.
    pub fn violations(&self) -> Vec<Violation> {
        let (g, h) = (&*self.actor, &*self.target);
        let mut v = Vec::new();
        for k in h.arrows() {
            if self.moment[h.r(k)] != self.moment[k] || self.moment[h.s(k)] != self.moment[k] {
                v.push(Violation::new("moment not fiber-closed", vec![k], ""));
            }
        }
        for x in g.arrows() {
            for k in h.arrows() {
                if self.act(x, k).is_some() != (g.s(x) == self.moment[k]) {
                    v.push(Violation::new("partial action table", vec![x, k], "every (x,h) with s(x)=ρ(h) must be mapped"));
                }
            }
        }
        if !v.is_empty() {
            return v;
        }
        for (a, b) in h.composable_pairs() {
            let ab = h.compose(a, b);
            if self.moment[ab] != self.moment[a] || self.moment[h.inv(a)] != self.moment[a] {
                v.push(Violation::new("fiber not subgroupoid", vec![a, b], ""));
            }
        }
        for k in h.arrows() {
            if self.act(self.moment[k], k) != Some(k) {
                v.push(Violation::new("ρ(h)·h ≠ h", vec![k], ""));
            }
        }
        for x in g.arrows() {
            let fiber: Vec<Arrow> = self.fiber_arrows(g.s(x)).collect();
            let mut image: Vec<Arrow> = fiber.iter().map(|&k| self.act(x, k).unwrap()).collect();
            for (&k, &xk) in fiber.iter().zip(&image) {
                if self.moment[xk] != g.r(x) {
                    v.push(Violation::new("ρ(x·h) ≠ r(x)", vec![x, k], ""));
                }
                if h.is_unit(k) && !h.is_unit(xk) {
                    v.push(Violation::new("unit space not invariant", vec![x, k], ""));
                }
                if self.act(x, h.r(k)) != Some(h.r(xk)) || self.act(x, h.s(k)) != Some(h.s(xk)) {
                    v.push(Violation::new("r_H(x·h) ≠ x·r_H(h)", vec![x, k], ""));
                }
                if self.act(x, h.inv(k)) != Some(h.inv(xk)) {
                    v.push(Violation::new("x· does not preserve inverses", vec![x, k], ""));
                }
            }
            image.sort_unstable();
            image.dedup();
            if image.len() != fiber.len() || image.len() != self.fiber_arrows(g.r(x)).count() {
                v.push(Violation::new("x· is not a bijection H_s(x) → H_r(x)", vec![x], ""));
            }
            for &a in &fiber {
                for b in h.arrows_with_range(h.s(a)) {
                    let lhs = self.act(x, h.compose(a, b));
                    let rhs = h.mul(self.act(x, a).unwrap(), self.act(x, b).unwrap());
                    if lhs != rhs {
                        v.push(Violation::new("not multiplicative", vec![x, a, b], "x·(hk) ≠ (x·h)(x·k)"));
                    }
                }
            }
        }
        for (x, y) in g.composable_pairs() {
            for k in self.fiber_arrows(g.s(y)) {
                let lhs = self.act(y, k).and_then(|yk| self.act(x, yk));
                if lhs != self.act(g.compose(x, y), k) {
                    v.push(Violation::new("x·(y·h) ≠ (xy)·h", vec![x, y, k], ""));
                }
            }
        }
        v
    }

    pub fn actor(&self) -> &Arc<FiniteGroupoid> {
        &self.actor
    }

    pub fn target(&self) -> &Arc<FiniteGroupoid> {
        &self.target
    }

    pub fn moment(&self, h: Arrow) -> Arrow {
        self.moment[h]
    }

    pub fn act(&self, x: Arrow, h: Arrow) -> Option<Arrow> {
        self.table[x * self.target.len() + h]
    }

    /// `x·h` for a pair known to satisfy `s(x) = ρ(h)`.
    pub fn apply(&self, x: Arrow, h: Arrow) -> Arrow {
        self.act(x, h).unwrap_or_else(|| panic!("x={x} cannot act on h={h}"))
    }

    /// Arrows of the fiber `H_u = ρ⁻¹(u)`.
    pub fn fiber_arrows(&self, u: Arrow) -> impl Iterator<Item = Arrow> + '_ {
        self.target.arrows().filter(move |&k| self.moment[k] == u)
    }

    /// Units of `H` lying over `u`.
    pub fn fiber_units(&self, u: Arrow) -> Vec<Arrow> {
        self.target.units().iter().copied().filter(|&v| self.moment[v] == u).collect()
    }

    /// The fiber `H_u` as a groupoid, with its embedding into `H`.
    pub fn fiber(&self, u: Arrow) -> (FiniteGroupoid, Vec<Arrow>) {
        self.target.reduction(&self.fiber_units(u))
    }

    /// G-orbits of the units of `H`.
    pub fn unit_orbits(&self) -> Vec<Vec<Arrow>> {
        let (g, h) = (&*self.actor, &*self.target);
        let mut seen = vec![false; h.len()];
        let mut out = Vec::new();
        for &v in h.units() {
            if seen[v] {
                continue;
            }
            let mut orbit: Vec<Arrow> =
                g.arrows().filter_map(|x| self.act(x, v)).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &w in &orbit {
                seen[w] = true;
            }
            out.push(orbit);
        }
        out
    }

    pub fn to_raw(&self) -> RawGroupoidAction {
        let (g, h) = (&*self.actor, &*self.target);
        RawGroupoidAction {
            moment: self.moment.clone(),
            table: g
                .arrows()
                .flat_map(|x| h.arrows().filter_map(move |k| self.act(x, k).map(|xk| [x, k, xk])))
                .collect(),
        }
    }

    /// The action with `G` trivial on `H`'s own unit space, used for
    /// degenerate cases: `H` is acted on by the trivial group.
    pub fn trivial(target: Arc<FiniteGroupoid>) -> Self {
        let actor = Arc::new(crate::groupoid::library::trivial_group());
        let raw = RawGroupoidAction {
            moment: vec![0; target.len()],
            table: target.arrows().map(|k| [0, k, k]).collect(),
        };
        GroupoidAction::validate(actor, target, &raw).expect("trivial action")
    }
}

/// Outcome of the invariance test for a Haar system on `H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvarianceReport {
    pub invariant: bool,
    /// A violating `(x, u)` with `w(x·u) ≠ w(u)`.
    pub witness: Option<(Arrow, Arrow)>,
    /// Number of `(x, v, indicator)` instances of the integral identity checked.
    pub integral_checks: usize,
    /// Whether the integral identity held on every indicator.
    pub integral_invariant: bool,
}

/// Decides whether `λ_H` is invariant under the action.
///
/// The reduced test compares the per-unit weight along the action,
/// `w(x·u) = w(u)`. The integral identity
/// `Σ_{r(h)=v} f(x·h) λ(h) = Σ_{r(h)=x·v} f(h) λ(h)` is also evaluated on
/// every indicator `f = 1_k`, and the two verdicts must agree.
pub fn check_invariant_haar(action: &GroupoidAction, haar: &HaarSystem) -> InvarianceReport {
    let (g, h) = (&**action.actor(), &**action.target());
    let mut witness = None;
    for x in g.arrows() {
        for &u in h.units() {
            if action.moment(u) == g.s(x) && haar.weight(action.apply(x, u)) != haar.weight(u) {
                witness.get_or_insert((x, u));
            }
        }
    }
    let mut integral_checks = 0;
    let mut integral_invariant = true;
    for x in g.arrows() {
        for &v in h.units().iter().filter(|&&v| action.moment(v) == g.s(x)) {
            let xv = action.apply(x, v);
            for k in h.arrows() {
                integral_checks += 1;
                let lhs: crate::scalar::Rational = h
                    .arrows_with_range(v)
                    .filter(|&m| action.apply(x, m) == k)
                    .map(|m| haar.weight(m).clone())
                    .sum();
                let rhs = if h.r(k) == xv { haar.weight(k).clone() } else { num_traits::Zero::zero() };
                if lhs != rhs {
                    integral_invariant = false;
                }
            }
        }
    }
    InvarianceReport { invariant: witness.is_none(), witness, integral_checks, integral_invariant }
}

/// The action of `G` on its right-translation groupoid, `w·(x,y,xy) = (wx,y,wxy)`.
pub fn translation_action(g: &Arc<FiniteGroupoid>) -> (GroupoidAction, RightTranslation) {
    let rt = right_translation_groupoid(g);
    let h = Arc::new(rt.groupoid.clone());
    let raw = RawGroupoidAction {
        moment: h.arrows().map(|k| rt.action.moment(k)).collect(),
        table: rt.action.to_raw().table,
    };
    let action = GroupoidAction::validate(g.clone(), h, &raw).expect("translation acts by isomorphisms");
    (action, rt)
}

/// `Z/2` swapping the two units of `P2`: `g·(i,j) = (1−i, 1−j)`.
pub fn p2_swap() -> GroupoidAction {
    use crate::groupoid::library::{cyclic_group, pair_groupoid};
    let raw = RawGroupoidAction {
        moment: vec![0; 4],
        table: (0..4).flat_map(|k| [[0, k, k], [1, k, 3 - k]]).collect(),
    };
    GroupoidAction::validate(Arc::new(cyclic_group(2)), Arc::new(pair_groupoid(2)), &raw).expect("swap action")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::library::*;
    use crate::scalar::rat_int;

    /// `Z/2` swapping the units of `P2`: `g·(i,j) = (1−i, 1−j)`.
    pub(crate) fn p2_swap_raw() -> RawGroupoidAction {
        let swap = |k: usize| 3 - k; // (i,j) ↦ (1-i,1-j) in index form i*2+j
        RawGroupoidAction {
            moment: vec![0; 4],
            table: (0..4).flat_map(|k| [[0, k, k], [1, k, swap(k)]]).collect(),
        }
    }

    fn p2_swap() -> GroupoidAction {
        GroupoidAction::validate(Arc::new(cyclic_group(2)), Arc::new(pair_groupoid(2)), &p2_swap_raw()).unwrap()
    }

    #[test]
    fn swap_action_is_valid() {
        let a = p2_swap();
        assert_eq!(a.apply(1, 1), 2);
        assert_eq!(a.unit_orbits(), vec![vec![0, 3]]);
    }

    #[test]
    fn trivial_action_on_unit_space() {
        let g = Arc::new(pair_groupoid(2));
        // H = G⁰ viewed as a space, G acting by x·s(x) = r(x)
        let h = Arc::new(space(vec!["u0".into(), "u1".into()]));
        let unit_of = |u: usize| if u == 0 { 0 } else { 1 };
        let raw = RawGroupoidAction {
            moment: vec![0, 3],
            table: g.arrows().map(|x| [x, unit_of(g.s(x)), unit_of(g.r(x))]).collect(),
        };
        assert!(GroupoidAction::validate(g, h, &raw).is_ok());
    }

    #[test]
    fn broken_swap_is_not_multiplicative() {
        let mut raw = p2_swap_raw();
        for t in raw.table.iter_mut() {
            if t[0] == 1 && t[1] == 1 {
                t[2] = 1;
            }
        }
        let err = GroupoidAction::validate(Arc::new(cyclic_group(2)), Arc::new(pair_groupoid(2)), &raw).unwrap_err();
        assert!(err.violations().iter().any(|v| v.axiom == "not multiplicative"), "{err}");
    }

    #[test]
    fn invariance_examples() {
        let a = p2_swap();
        let h = a.target().clone();
        let counting = HaarSystem::counting(&h);
        let rep = check_invariant_haar(&a, &counting);
        assert!(rep.invariant && rep.integral_invariant);

        let skew = HaarSystem::from_unit_weights(&h, &[rat_int(1), rat_int(3)]).unwrap();
        let rep = check_invariant_haar(&a, &skew);
        assert!(!rep.invariant && !rep.integral_invariant);
        assert_eq!(rep.witness, Some((1, 0)));

        let flat = HaarSystem::from_unit_weights(&h, &[rat_int(2), rat_int(2)]).unwrap();
        assert!(check_invariant_haar(&a, &flat).invariant);
    }

    #[test]
    fn translation_actions() {
        let (a, _) = translation_action(&Arc::new(cyclic_group(2)));
        assert!(a.violations().is_empty());
        let (t, _) = translation_action(&Arc::new(trivial_group()));
        assert_eq!(t.target().len(), 1);
        let (z3, _) = translation_action(&Arc::new(cyclic_group(3)));
        let rep = check_invariant_haar(&z3, &HaarSystem::counting(z3.target()));
        assert!(rep.invariant && rep.integral_invariant);
    }
}
