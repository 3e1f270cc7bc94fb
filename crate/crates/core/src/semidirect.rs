//! The semidirect-product groupoid `H ⋊ G` and its Haar system.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::actions::{check_invariant_haar, GroupoidAction, RawGroupoidAction};
use crate::error::{Error, Result, Violation};
use crate::groupoid::{
    action_groupoid, isomorphism_violations, library, Arrow, FiniteGroupoid, HaarSystem, RawGroupoid, SpaceAction,
};

/// `H ⋊ G = {(h, x) : ρ(h) = r(x)}` with `(h,x)(k,y) = (h(x·k), xy)` when
/// `s(h) = x·r(k)`, and `(h,x)⁻¹ = (x⁻¹·h⁻¹, x⁻¹)`.
///
/// Units are stored as pairs `(v, ρ(v))` and reported through `π₁` as the
/// units of `H`.
#[derive(Clone, Debug)]
pub struct Semidirect {
    pub groupoid: Arc<FiniteGroupoid>,
    /// `(h, x)` for every arrow, lexicographic.
    pub pairs: Vec<(Arrow, Arrow)>,
    index: HashMap<(Arrow, Arrow), Arrow>,
}

impl Semidirect {
    pub fn index_of(&self, h: Arrow, x: Arrow) -> Option<Arrow> {
        self.index.get(&(h, x)).copied()
    }

    /// Arrow `(h, ρ(h))` standing for `h ∈ H`.
    pub fn embed_h(&self, action: &GroupoidAction, h: Arrow) -> Arrow {
        self.index[&(h, action.moment(h))]
    }

    /// `π₁` on units: the unit of `H` a unit of `H ⋊ G` is identified with.
    pub fn unit_to_h(&self, unit: Arrow) -> Arrow {
        self.pairs[unit].0
    }
}

pub fn semidirect_groupoid(action: &GroupoidAction) -> Semidirect {
    let (g, h) = (&**action.actor(), &**action.target());
    let pairs: Vec<(Arrow, Arrow)> = h
        .arrows()
        .flat_map(|k| g.arrows_with_range(action.moment(k)).map(move |x| (k, x)))
        .collect();
    let index: HashMap<(Arrow, Arrow), Arrow> = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let at = |k: Arrow, x: Arrow| index[&(k, x)];
    let units: Vec<Arrow> = h.units().iter().map(|&v| at(v, action.moment(v))).collect();
    let unit_of = |v: Arrow| at(v, action.moment(v));
    let mut composition = Vec::new();
    for (a, &(hh, x)) in pairs.iter().enumerate() {
        for (b, &(k, y)) in pairs.iter().enumerate() {
            // composable iff s(h) = x·r(k); x·r(k) needs s(x) = ρ(k) = r(y)
            if g.s(x) != action.moment(k) || h.s(hh) != action.apply(x, h.r(k)) {
                continue;
            }
            let prod = (h.compose(hh, action.apply(x, k)), g.compose(x, y));
            composition.push([a, b, at(prod.0, prod.1)]);
        }
    }
    let raw = RawGroupoid {
        labels: pairs.iter().map(|&(k, x)| format!("({},{})", h.label(k), g.label(x))).collect(),
        units,
        range: pairs.iter().map(|&(k, _)| unit_of(h.r(k))).collect(),
        source: pairs
            .iter()
            .map(|&(k, x)| unit_of(action.apply(g.inv(x), h.s(k))))
            .collect(),
        inverse: pairs
            .iter()
            .map(|&(k, x)| at(action.apply(g.inv(x), h.inv(k)), g.inv(x)))
            .collect(),
        composition,
    };
    let groupoid = FiniteGroupoid::validate(&raw).expect("semidirect product is a groupoid");
    Semidirect { groupoid: Arc::new(groupoid), pairs, index }
}

/// Checks `r(h,x) = (r_H(h), r_G(x))` and `s(h,x) = (x⁻¹·s_H(h), s_G(x))`
/// on every arrow.
pub fn semidirect_formula_violations(action: &GroupoidAction, sd: &Semidirect) -> Vec<Violation> {
    let (g, h) = (&**action.actor(), &**action.target());
    let sdg = &*sd.groupoid;
    let mut v = Vec::new();
    for (a, &(k, x)) in sd.pairs.iter().enumerate() {
        if sd.pairs[sdg.r(a)] != (h.r(k), g.r(x)) {
            v.push(Violation::new("r(h,x) ≠ (r(h), r(x))", vec![a], ""));
        }
        if sd.pairs[sdg.s(a)] != (action.apply(g.inv(x), h.s(k)), g.s(x)) {
            v.push(Violation::new("s(h,x) ≠ (x⁻¹·s(h), s(x))", vec![a], ""));
        }
    }
    v
}

/// Product Haar system `weight(h,x) = weight_H(h)·weight_G(x)`, which is a
/// Haar system on `H ⋊ G` when `λ_H` is invariant. Left invariance of the
/// result is re-checked rather than assumed.
pub fn semidirect_haar(
    action: &GroupoidAction,
    sd: &Semidirect,
    haar_h: &HaarSystem,
    haar_g: &HaarSystem,
) -> Result<HaarSystem> {
    let rep = check_invariant_haar(action, haar_h);
    if let Some((x, u)) = rep.witness {
        return Err(Error::invalid(
            "semidirect haar",
            vec![Violation::new("λ_H is not invariant: w(x·u) ≠ w(u)", vec![x, u], "")],
        ));
    }
    let weights = sd.pairs.iter().map(|&(k, x)| haar_h.weight(k) * haar_g.weight(x)).collect();
    HaarSystem::canonical(&sd.groupoid, weights)
}

/// Views a `G`-space as a groupoid of units acted on by isomorphisms.
pub fn space_as_groupoid_action(action: &SpaceAction) -> GroupoidAction {
    let h = Arc::new(library::space(action.points().map(|t| action.point_label(t).to_string()).collect()));
    let raw = RawGroupoidAction {
        moment: action.points().map(|t| action.moment(t)).collect(),
        table: action.to_raw().table,
    };
    GroupoidAction::validate(action.actor().clone(), h, &raw).expect("a space action acts by isomorphisms")
}

/// Certificate that `(h, x) ↦ (x, x⁻¹·h)` is an isomorphism `H ⋊ G → G ⋉ H`.
#[derive(Clone, Debug, Serialize)]
pub struct SpaceIsoCertificate {
    pub arrows: usize,
    pub map: Vec<Arrow>,
    pub violations: Vec<Violation>,
}

impl SpaceIsoCertificate {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn sd_space_iso(action: &SpaceAction) -> Result<SpaceIsoCertificate> {
    let as_groupoid = space_as_groupoid_action(action);
    let g = &**action.actor();
    let sd = semidirect_groupoid(&as_groupoid);
    let ag = action_groupoid(action);
    let map: Vec<Arrow> = sd
        .pairs
        .iter()
        .map(|&(t, x)| {
            let xinv_t = action.act(g.inv(x), t).expect("s(x⁻¹) = r(x) = ρ(t)");
            ag.pairs.iter().position(|&p| p == (x, xinv_t)).expect("(x, x⁻¹·h) lies in G*H")
        })
        .collect();
    let violations = isomorphism_violations(&sd.groupoid, &ag.groupoid, &map);
    Ok(SpaceIsoCertificate { arrows: map.len(), map, violations })
}

/// Same as [`sd_space_iso`] but for a groupoid action whose target must be a space.
pub fn sd_space_iso_checked(action: &GroupoidAction) -> Result<SpaceIsoCertificate> {
    let h = action.target();
    if !h.is_space() {
        let witness: Vec<Arrow> = h.arrows().filter(|&k| !h.is_unit(k)).take(1).collect();
        return Err(Error::invalid("space iso", vec![Violation::new("H has non-unit arrows", witness, "")]));
    }
    let raw = crate::groupoid::RawSpaceAction {
        points: h.labels().to_vec(),
        moment: h.arrows().map(|k| action.moment(k)).collect(),
        table: action.to_raw().table,
    };
    sd_space_iso(&SpaceAction::validate(action.actor().clone(), &raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::library::*;
    use crate::groupoid::RawSpaceAction;
    use crate::scalar::rat_int;

    fn p2_swap() -> GroupoidAction {
        let raw = RawGroupoidAction {
            moment: vec![0; 4],
            table: (0..4).flat_map(|k| [[0, k, k], [1, k, 3 - k]]).collect(),
        };
        GroupoidAction::validate(Arc::new(cyclic_group(2)), Arc::new(pair_groupoid(2)), &raw).unwrap()
    }

    #[test]
    fn p2_swap_semidirect_has_8_arrows() {
        let a = p2_swap();
        let sd = semidirect_groupoid(&a);
        assert_eq!(sd.groupoid.len(), 8);
        assert_eq!(sd.groupoid.units().len(), 2);
        assert!(semidirect_formula_violations(&a, &sd).is_empty());
    }

    #[test]
    fn trivial_actor_gives_h_back() {
        let h = Arc::new(pair_groupoid(3));
        let a = GroupoidAction::trivial(h.clone());
        let sd = semidirect_groupoid(&a);
        let map: Vec<Arrow> = sd.pairs.iter().map(|&(k, _)| k).collect();
        assert!(isomorphism_violations(&sd.groupoid, &h, &map).is_empty());
    }

    #[test]
    fn semidirect_haar_examples() {
        let a = p2_swap();
        let sd = semidirect_groupoid(&a);
        let hg = HaarSystem::counting(a.actor());
        let c = semidirect_haar(&a, &sd, &HaarSystem::counting(a.target()), &hg).unwrap();
        assert!(c.weights().iter().all(|w| *w == rat_int(1)));

        let two = HaarSystem::from_unit_weights(a.target(), &[rat_int(2), rat_int(2)]).unwrap();
        let w = semidirect_haar(&a, &sd, &two, &hg).unwrap();
        assert!(w.weights().iter().all(|x| *x == rat_int(2)));

        let skew = HaarSystem::from_unit_weights(a.target(), &[rat_int(1), rat_int(3)]).unwrap();
        let err = semidirect_haar(&a, &sd, &skew, &hg).unwrap_err();
        assert_eq!(err.violations()[0].witness, vec![1, 0]);
    }

    #[test]
    fn space_isomorphisms() {
        let z2 = Arc::new(cyclic_group(2));
        let swap = RawSpaceAction {
            points: vec!["a".into(), "b".into()],
            moment: vec![0, 0],
            table: vec![[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]],
        };
        let cert = sd_space_iso(&SpaceAction::validate(z2, &swap).unwrap()).unwrap();
        assert!(cert.passed());
        assert_eq!(cert.arrows, 4);

        let e = Arc::new(trivial_group());
        let pt = RawSpaceAction { points: vec!["*".into()], moment: vec![0], table: vec![[0, 0, 0]] };
        let cert = sd_space_iso(&SpaceAction::validate(e, &pt).unwrap()).unwrap();
        assert!(cert.passed());
        assert_eq!(cert.map, vec![0]);

        let non_space = p2_swap();
        assert!(sd_space_iso_checked(&non_space).is_err());
    }
}
