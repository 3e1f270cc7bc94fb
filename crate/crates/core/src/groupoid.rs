//! Finite groupoids, Haar systems, actions on spaces and action groupoids.
//!
//! Arrows are dense indices `0..n`; the units are a flagged subset. The
//! partial multiplication is kept as an explicit table so that malformed
//! input can be reported pair by pair.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result, Violation};
use crate::scalar::Rational;

pub type Arrow = usize;

/// Groupoid tables as they come from a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawGroupoid {
    pub labels: Vec<String>,
    pub units: Vec<Arrow>,
    pub range: Vec<Arrow>,
    pub source: Vec<Arrow>,
    pub inverse: Vec<Arrow>,
    /// Triples `[g, h, gh]`, one per composable pair.
    pub composition: Vec<[Arrow; 3]>,
}

/// A validated finite groupoid.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroupoid {
    labels: Vec<String>,
    units: Vec<Arrow>,
    unit_pos: Vec<Option<usize>>,
    range: Vec<Arrow>,
    source: Vec<Arrow>,
    inverse: Vec<Arrow>,
    table: Vec<Option<Arrow>>,
}

impl FiniteGroupoid {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn arrows(&self) -> std::ops::Range<Arrow> {
        0..self.len()
    }

    pub fn units(&self) -> &[Arrow] {
        &self.units
    }

    pub fn is_unit(&self, g: Arrow) -> bool {
        self.unit_pos[g].is_some()
    }

    /// Position of unit `u` in [`units`](Self::units).
    pub fn unit_index(&self, u: Arrow) -> Option<usize> {
        self.unit_pos[u]
    }

    pub fn r(&self, g: Arrow) -> Arrow {
        self.range[g]
    }

    pub fn s(&self, g: Arrow) -> Arrow {
        self.source[g]
    }

    pub fn inv(&self, g: Arrow) -> Arrow {
        self.inverse[g]
    }

    pub fn label(&self, g: Arrow) -> &str {
        &self.labels[g]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn composable(&self, g: Arrow, h: Arrow) -> bool {
        self.source[g] == self.range[h]
    }

    pub fn mul(&self, g: Arrow, h: Arrow) -> Option<Arrow> {
        self.table[g * self.len() + h]
    }

    /// Product of a pair known to be composable.
    pub fn compose(&self, g: Arrow, h: Arrow) -> Arrow {
        self.mul(g, h).unwrap_or_else(|| panic!("arrows {g} and {h} are not composable"))
    }

    pub fn composable_pairs(&self) -> impl Iterator<Item = (Arrow, Arrow)> + '_ {
        self.arrows().flat_map(move |g| self.arrows_with_range(self.s(g)).map(move |h| (g, h)))
    }

    /// Arrows `h` with `r(h) = u`.
    pub fn arrows_with_range(&self, u: Arrow) -> impl Iterator<Item = Arrow> + '_ {
        self.arrows().filter(move |&h| self.range[h] == u)
    }

    /// Arrows `h` with `s(h) = u`.
    pub fn arrows_with_source(&self, u: Arrow) -> impl Iterator<Item = Arrow> + '_ {
        self.arrows().filter(move |&h| self.source[h] == u)
    }

    pub fn is_group(&self) -> bool {
        self.units.len() == 1
    }

    pub fn is_space(&self) -> bool {
        self.units.len() == self.len()
    }

    /// Unit orbits (connected components), each sorted.
    pub fn orbits(&self) -> Vec<Vec<Arrow>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for &u in &self.units {
            if seen[u] {
                continue;
            }
            let mut orbit: Vec<Arrow> = self.arrows_with_source(u).map(|g| self.r(g)).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &v in &orbit {
                seen[v] = true;
            }
            out.push(orbit);
        }
        out
    }

    /// Reduction to a set of units: the arrows with both ends in `units`,
    /// in their original order. Returns the subgroupoid and its embedding.
    pub fn reduction(&self, units: &[Arrow]) -> (FiniteGroupoid, Vec<Arrow>) {
        let keep: Vec<bool> = {
            let mut k = vec![false; self.len()];
            for &u in units {
                k[u] = true;
            }
            k
        };
        let embed: Vec<Arrow> =
            self.arrows().filter(|&g| keep[self.r(g)] && keep[self.s(g)]).collect();
        let mut back = vec![usize::MAX; self.len()];
        for (k, &g) in embed.iter().enumerate() {
            back[g] = k;
        }
        let raw = RawGroupoid {
            labels: embed.iter().map(|&g| self.labels[g].clone()).collect(),
            units: self.units.iter().filter(|&&u| keep[u]).map(|&u| back[u]).collect(),
            range: embed.iter().map(|&g| back[self.r(g)]).collect(),
            source: embed.iter().map(|&g| back[self.s(g)]).collect(),
            inverse: embed.iter().map(|&g| back[self.inv(g)]).collect(),
            composition: embed
                .iter()
                .flat_map(|&g| {
                    let back = &back;
                    embed.iter().filter_map(move |&h| {
                        self.mul(g, h).map(|gh| [back[g], back[h], back[gh]])
                    })
                })
                .collect(),
        };
        let sub = FiniteGroupoid::validate(&raw).expect("reduction of a groupoid is a groupoid");
        (sub, embed)
    }

    pub fn to_raw(&self) -> RawGroupoid {
        RawGroupoid {
            labels: self.labels.clone(),
            units: self.units.clone(),
            range: self.range.clone(),
            source: self.source.clone(),
            inverse: self.inverse.clone(),
            composition: self
                .composable_pairs()
                .map(|(g, h)| [g, h, self.compose(g, h)])
                .collect(),
        }
    }

    /// Checks every groupoid axiom on raw tables.
    pub fn validate(raw: &RawGroupoid) -> Result<FiniteGroupoid> {
        check("groupoid", Self::violations(raw))?;
        let n = raw.range.len();
        let mut table = vec![None; n * n];
        for &[g, h, gh] in &raw.composition {
            table[g * n + h] = Some(gh);
        }
        let mut unit_pos = vec![None; n];
        for (k, &u) in raw.units.iter().enumerate() {
            unit_pos[u] = Some(k);
        }
        Ok(FiniteGroupoid {
            labels: raw.labels.clone(),
            units: raw.units.clone(),
            unit_pos,
            range: raw.range.clone(),
            source: raw.source.clone(),
            inverse: raw.inverse.clone(),
            table,
        })
    }

    /// All axiom violations of the raw tables (empty iff valid).
    pub fn violations(raw: &RawGroupoid) -> Vec<Violation> {
        let n = raw.range.len();
        let mut v = Vec::new();
        if raw.source.len() != n || raw.inverse.len() != n || raw.labels.len() != n {
            v.push(Violation::new("table lengths differ", vec![], format!(
                "range {}, source {}, inverse {}, labels {}",
                n,
                raw.source.len(),
                raw.inverse.len(),
                raw.labels.len()
            )));
            return v;
        }
        let in_range = |x: usize| x < n;
        for (name, t) in [("range", &raw.range), ("source", &raw.source), ("inverse", &raw.inverse)] {
            for (g, &x) in t.iter().enumerate() {
                if !in_range(x) {
                    v.push(Violation::new(format!("{name} index out of range"), vec![g], ""));
                }
            }
        }
        for &u in &raw.units {
            if !in_range(u) {
                v.push(Violation::new("unit index out of range", vec![u], ""));
            }
        }
        for t in &raw.composition {
            if t.iter().any(|&x| !in_range(x)) {
                v.push(Violation::new("composition index out of range", t.to_vec(), ""));
            }
        }
        if !v.is_empty() {
            return v;
        }

        let mut is_unit = vec![false; n];
        for &u in &raw.units {
            if is_unit[u] {
                v.push(Violation::new("duplicate unit", vec![u], ""));
            }
            is_unit[u] = true;
        }
        let mut table: HashMap<(usize, usize), usize> = HashMap::new();
        for &[g, h, gh] in &raw.composition {
            if table.insert((g, h), gh).is_some() {
                v.push(Violation::new("duplicate composition entry", vec![g, h], ""));
            }
            if raw.source[g] != raw.range[h] {
                v.push(Violation::new("composition of non-composable pair", vec![g, h], ""));
            }
        }
        let (r, s, inv) = (&raw.range, &raw.source, &raw.inverse);
        for g in 0..n {
            if !is_unit[r[g]] {
                v.push(Violation::new("r(g) is not a unit", vec![g], ""));
            }
            if !is_unit[s[g]] {
                v.push(Violation::new("s(g) is not a unit", vec![g], ""));
            }
        }
        for &u in &raw.units {
            if r[u] != u || s[u] != u {
                v.push(Violation::new("r(u) = s(u) = u fails", vec![u], ""));
            }
        }
        for g in 0..n {
            for h in 0..n {
                if s[g] == r[h] && !table.contains_key(&(g, h)) {
                    v.push(Violation::new("multiplication not closed", vec![g, h], "composable pair has no product"));
                }
            }
        }
        if !v.is_empty() {
            return v;
        }
        let m = |g: usize, h: usize| table.get(&(g, h)).copied();
        for g in 0..n {
            if m(r[g], g) != Some(g) {
                v.push(Violation::new("r(g)·g ≠ g", vec![g], ""));
            }
            if m(g, s[g]) != Some(g) {
                v.push(Violation::new("g·s(g) ≠ g", vec![g], ""));
            }
            if inv[inv[g]] != g {
                v.push(Violation::new("inverse is not an involution", vec![g], ""));
            }
            if m(g, inv[g]) != Some(r[g]) {
                v.push(Violation::new("g·inv(g) ≠ r(g)", vec![g], ""));
            }
            if m(inv[g], g) != Some(s[g]) {
                v.push(Violation::new("inv(g)·g ≠ s(g)", vec![g], ""));
            }
        }
        for (&(g, h), &gh) in &table {
            if r[gh] != r[g] {
                v.push(Violation::new("r(gh) ≠ r(g)", vec![g, h], ""));
            }
            if s[gh] != s[h] {
                v.push(Violation::new("s(gh) ≠ s(h)", vec![g, h], ""));
            }
        }
        if !v.is_empty() {
            v.sort_by(|a, b| a.witness.cmp(&b.witness));
            return v;
        }
        let pairs: Vec<(usize, usize)> = {
            let mut p: Vec<_> = table.keys().copied().collect();
            p.sort_unstable();
            p
        };
        let mut assoc: Vec<Violation> = pairs
            .par_iter()
            .flat_map_iter(|&(g, h)| {
                let gh = table[&(g, h)];
                let table = &table;
                (0..n).filter(move |&k| s[h] == r[k]).filter_map(move |k| {
                    let left = m(gh, k);
                    let right = table.get(&(h, k)).and_then(|&hk| m(g, hk));
                    (left != right).then(|| Violation::new("associativity", vec![g, h, k], ""))
                })
            })
            .collect();
        v.append(&mut assoc);
        v
    }
}

/// Verifies that `map` is a groupoid isomorphism `a → b`.
pub fn isomorphism_violations(a: &FiniteGroupoid, b: &FiniteGroupoid, map: &[Arrow]) -> Vec<Violation> {
    let mut v = Vec::new();
    if map.len() != a.len() || a.len() != b.len() {
        v.push(Violation::new("sizes differ", vec![a.len(), b.len(), map.len()], ""));
        return v;
    }
    let mut hit = vec![false; b.len()];
    for (g, &fg) in map.iter().enumerate() {
        if fg >= b.len() || std::mem::replace(&mut hit[fg], true) {
            v.push(Violation::new("map is not a bijection", vec![g], ""));
        }
    }
    if !v.is_empty() {
        return v;
    }
    for g in a.arrows() {
        if map[a.r(g)] != b.r(map[g]) {
            v.push(Violation::new("map does not preserve r", vec![g], ""));
        }
        if map[a.s(g)] != b.s(map[g]) {
            v.push(Violation::new("map does not preserve s", vec![g], ""));
        }
        if map[a.inv(g)] != b.inv(map[g]) {
            v.push(Violation::new("map does not preserve inverses", vec![g], ""));
        }
    }
    for (g, h) in a.composable_pairs() {
        if b.mul(map[g], map[h]) != Some(map[a.compose(g, h)]) {
            v.push(Violation::new("map does not preserve products", vec![g, h], ""));
        }
    }
    v
}

/// Verifies that `map: a → b` is a groupoid homomorphism.
pub fn homomorphism_violations(a: &FiniteGroupoid, b: &FiniteGroupoid, map: &[Arrow]) -> Vec<Violation> {
    let mut v = Vec::new();
    if map.len() != a.len() || map.iter().any(|&x| x >= b.len()) {
        v.push(Violation::new("map has wrong shape", vec![map.len()], ""));
        return v;
    }
    for (g, h) in a.composable_pairs() {
        if b.mul(map[g], map[h]) != Some(map[a.compose(g, h)]) {
            v.push(Violation::new("φ(gh) ≠ φ(g)φ(h)", vec![g, h], ""));
        }
    }
    v
}

/// Haar system on a finite groupoid: a positive weight per arrow,
/// `λ^u = Σ_{r(h)=u} weight(h) δ_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarSystem {
    weights: Vec<Rational>,
    unit_weight: Vec<Rational>,
}

impl HaarSystem {
    /// Validates positivity and left invariance `weight(gm) = weight(m)`.
    pub fn canonical(g: &FiniteGroupoid, weights: Vec<Rational>) -> Result<HaarSystem> {
        let mut v = Vec::new();
        if weights.len() != g.len() {
            v.push(Violation::new("weight table has wrong length", vec![weights.len(), g.len()], ""));
            return Err(Error::invalid("haar", v));
        }
        for (h, w) in weights.iter().enumerate() {
            if !w.is_positive() {
                v.push(Violation::new("weight not positive", vec![h], ""));
            }
        }
        for (a, m) in g.composable_pairs() {
            if weights[g.compose(a, m)] != weights[m] {
                v.push(Violation::new("left invariance weight(gm) = weight(m)", vec![a, m], ""));
            }
        }
        check("haar", v)?;
        let unit_weight = g.arrows().map(|h| weights[g.s(h)].clone()).collect();
        Ok(HaarSystem { weights, unit_weight })
    }

    /// Haar system from a positive weight per unit (`weight(h) = w(s(h))`).
    pub fn from_unit_weights(g: &FiniteGroupoid, w: &[Rational]) -> Result<HaarSystem> {
        let weights = g.arrows().map(|h| w[g.unit_index(g.s(h)).unwrap()].clone()).collect();
        HaarSystem::canonical(g, weights)
    }

    pub fn counting(g: &FiniteGroupoid) -> HaarSystem {
        HaarSystem::canonical(g, vec![Rational::one(); g.len()]).expect("counting measure is invariant")
    }

    pub fn weight(&self, h: Arrow) -> &Rational {
        &self.weights[h]
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// The derived per-unit weight `w(s(h))`, stored per arrow.
    pub fn unit_weight_at_source(&self, h: Arrow) -> &Rational {
        &self.unit_weight[h]
    }

    /// Left invariance in integrated form: for every `x` and every indicator
    /// `1_z`, `Σ_{r(y)=s(x)} 1_z(xy) λ(y) = Σ_{r(y)=r(x)} 1_z(y) λ(y)`.
    /// Returns the number of identities checked and the failures.
    pub fn left_invariance_violations(&self, g: &FiniteGroupoid) -> (usize, Vec<Violation>) {
        let mut v = Vec::new();
        let mut checked = 0;
        for x in g.arrows() {
            let mut pushed = vec![Rational::zero(); g.len()];
            for y in g.arrows_with_range(g.s(x)) {
                pushed[g.compose(x, y)] += &self.weights[y];
            }
            for z in g.arrows() {
                checked += 1;
                let rhs = if g.r(z) == g.r(x) { self.weights[z].clone() } else { Rational::zero() };
                if pushed[z] != rhs {
                    v.push(Violation::new("λ not left invariant", vec![x, z], ""));
                }
            }
        }
        (checked, v)
    }

    pub fn restrict(&self, embed: &[Arrow]) -> HaarSystem {
        let weights: Vec<Rational> = embed.iter().map(|&h| self.weights[h].clone()).collect();
        let unit_weight = embed.iter().map(|&h| self.unit_weight[h].clone()).collect();
        HaarSystem { weights, unit_weight }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHaar {
    #[serde(with = "weights_str")]
    pub weights: Vec<Rational>,
}

mod weights_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<String> = w.iter().map(crate::scalar::format_rational).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|x| crate::scalar::parse_rational(x).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Left action of a groupoid on a finite set.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceAction {
    actor: Arc<FiniteGroupoid>,
    labels: Vec<String>,
    moment: Vec<Arrow>,
    table: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSpaceAction {
    pub points: Vec<String>,
    pub moment: Vec<Arrow>,
    /// Triples `[x, t, x·t]`.
    pub table: Vec<[usize; 3]>,
}

impl SpaceAction {
    pub fn validate(actor: Arc<FiniteGroupoid>, raw: &RawSpaceAction) -> Result<SpaceAction> {
        let g = &*actor;
        let m = raw.points.len();
        let mut v = Vec::new();
        if raw.moment.len() != m {
            v.push(Violation::new("moment table has wrong length", vec![raw.moment.len()], ""));
            return Err(Error::invalid("space action", v));
        }
        for (t, &u) in raw.moment.iter().enumerate() {
            if u >= g.len() || !g.is_unit(u) {
                v.push(Violation::new("moment is not a unit", vec![t], ""));
            }
        }
        let mut table = vec![None; g.len() * m];
        for &[x, t, xt] in &raw.table {
            if x >= g.len() || t >= m || xt >= m {
                v.push(Violation::new("action index out of range", vec![x, t, xt], ""));
                continue;
            }
            if table[x * m + t].replace(xt).is_some() {
                v.push(Violation::new("duplicate action entry", vec![x, t], ""));
            }
        }
        check("space action", v)?;
        let act = SpaceAction { actor: actor.clone(), labels: raw.points.clone(), moment: raw.moment.clone(), table };
        check("space action", act.violations())?;
        Ok(act)
    }

    fn violations(&self) -> Vec<Violation> {
        let g = &*self.actor;
        let mut v = Vec::new();
        for x in g.arrows() {
            for t in self.points() {
                let defined = self.act(x, t).is_some();
                if defined != (g.s(x) == self.moment[t]) {
                    v.push(Violation::new("action defined off s(x) = ρ(t)", vec![x, t], ""));
                }
            }
        }
        if !v.is_empty() {
            return v;
        }
        for t in self.points() {
            if self.act(self.moment[t], t) != Some(t) {
                v.push(Violation::new("ρ(t)·t ≠ t", vec![t], ""));
            }
        }
        for x in g.arrows() {
            for t in self.points().filter(|&t| self.moment[t] == g.s(x)) {
                let xt = self.act(x, t).unwrap();
                if self.moment[xt] != g.r(x) {
                    v.push(Violation::new("ρ(x·t) ≠ r(x)", vec![x, t], ""));
                }
            }
        }
        for (x, y) in g.composable_pairs() {
            for t in self.points().filter(|&t| self.moment[t] == g.s(y)) {
                let lhs = self.act(y, t).and_then(|yt| self.act(x, yt));
                if lhs != self.act(g.compose(x, y), t) {
                    v.push(Violation::new("x·(y·t) ≠ (xy)·t", vec![x, y, t], ""));
                }
            }
        }
        v
    }

    pub fn actor(&self) -> &Arc<FiniteGroupoid> {
        &self.actor
    }

    pub fn points(&self) -> std::ops::Range<usize> {
        0..self.moment.len()
    }

    pub fn len(&self) -> usize {
        self.moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moment.is_empty()
    }

    pub fn moment(&self, t: usize) -> Arrow {
        self.moment[t]
    }

    pub fn point_label(&self, t: usize) -> &str {
        &self.labels[t]
    }

    pub fn act(&self, x: Arrow, t: usize) -> Option<usize> {
        self.table[x * self.len() + t]
    }

    pub fn to_raw(&self) -> RawSpaceAction {
        let g = &*self.actor;
        RawSpaceAction {
            points: self.labels.clone(),
            moment: self.moment.clone(),
            table: g
                .arrows()
                .flat_map(|x| self.points().filter_map(move |t| self.act(x, t).map(|xt| [x, t, xt])))
                .collect(),
        }
    }
}

/// The action groupoid `G ⋉ T`: arrows `(x, t)` with `s(x) = ρ(t)`,
/// `(x,t)(y,s) = (xy, s)` when `t = y·s`, `r(x,t) = (r(x), x·t)`,
/// `s(x,t) = (s(x), t)`.
#[derive(Clone, Debug)]
pub struct ActionGroupoid {
    pub groupoid: FiniteGroupoid,
    /// `(actor arrow, point)` for each arrow, lexicographically ordered.
    pub pairs: Vec<(Arrow, usize)>,
    /// Unit arrow identified with each point.
    pub unit_of_point: Vec<Arrow>,
}

pub fn action_groupoid(action: &SpaceAction) -> ActionGroupoid {
    let g = &**action.actor();
    let pairs: Vec<(Arrow, usize)> = g
        .arrows()
        .flat_map(|x| action.points().filter(move |&t| g.s(x) == action.moment(t)).map(move |t| (x, t)))
        .collect();
    let index: HashMap<(Arrow, usize), usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let at = |x: Arrow, t: usize| index[&(x, t)];
    let unit_of_point: Vec<Arrow> = action.points().map(|t| at(action.moment(t), t)).collect();
    let act = |x, t| action.act(x, t).expect("defined on G*T");
    let raw = RawGroupoid {
        labels: pairs
            .iter()
            .map(|&(x, t)| format!("({},{})", g.label(x), action.point_label(t)))
            .collect(),
        units: unit_of_point.clone(),
        range: pairs.iter().map(|&(x, t)| unit_of_point[act(x, t)]).collect(),
        source: pairs.iter().map(|&(_, t)| unit_of_point[t]).collect(),
        inverse: pairs.iter().map(|&(x, t)| at(g.inv(x), act(x, t))).collect(),
        composition: pairs
            .iter()
            .enumerate()
            .flat_map(|(a, &(x, t))| {
                let pairs = &pairs;
                let at = &at;
                pairs.iter().enumerate().filter_map(move |(b, &(y, s))| {
                    (g.composable(x, y) && act(y, s) == t).then(|| [a, b, at(g.compose(x, y), s)])
                })
            })
            .collect(),
    };
    let groupoid = FiniteGroupoid::validate(&raw).expect("action groupoid axioms");
    ActionGroupoid { groupoid, pairs, unit_of_point }
}

/// The right-translation groupoid of `G`: triples `(x, y, xy)` with
/// `s(x) = r(y)`, stored as pairs `(x, y)`, with
/// `(x,y,xy)(xy,z,xyz) = (x,yz,xyz)` and `G` acting by
/// `w·(x,y,xy) = (wx,y,wxy)`, moment `ρ(x,y,xy) = r(x)`.
#[derive(Clone, Debug)]
pub struct RightTranslation {
    pub groupoid: FiniteGroupoid,
    pub pairs: Vec<(Arrow, Arrow)>,
    /// The `G`-action on the arrows of `H`, as a space action.
    pub action: SpaceAction,
}

impl RightTranslation {
    pub fn index_of(&self, x: Arrow, y: Arrow) -> Option<Arrow> {
        self.pairs.iter().position(|&p| p == (x, y))
    }
}

pub fn right_translation_groupoid(g: &Arc<FiniteGroupoid>) -> RightTranslation {
    let gg = &**g;
    let pairs: Vec<(Arrow, Arrow)> = gg
        .arrows()
        .flat_map(|x| gg.arrows_with_range(gg.s(x)).map(move |y| (x, y)))
        .collect();
    let index: HashMap<(Arrow, Arrow), usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let at = |x: Arrow, y: Arrow| index[&(x, y)];
    let raw = RawGroupoid {
        labels: pairs
            .iter()
            .map(|&(x, y)| format!("({},{},{})", gg.label(x), gg.label(y), gg.label(gg.compose(x, y))))
            .collect(),
        units: pairs.iter().enumerate().filter(|(_, &(x, y))| y == gg.s(x)).map(|(k, _)| k).collect(),
        range: pairs.iter().map(|&(x, _)| at(x, gg.s(x))).collect(),
        source: pairs.iter().map(|&(x, y)| { let xy = gg.compose(x, y); at(xy, gg.s(xy)) }).collect(),
        inverse: pairs.iter().map(|&(x, y)| at(gg.compose(x, y), gg.inv(y))).collect(),
        composition: pairs
            .iter()
            .enumerate()
            .flat_map(|(a, &(x, y))| {
                let xy = gg.compose(x, y);
                let at = &at;
                gg.arrows_with_range(gg.s(y)).map(move |z| [a, at(xy, z), at(x, gg.compose(y, z))])
            })
            .collect(),
    };
    let groupoid = FiniteGroupoid::validate(&raw).expect("right-translation groupoid axioms");
    let action_raw = RawSpaceAction {
        points: raw.labels.clone(),
        moment: pairs.iter().map(|&(x, _)| gg.r(x)).collect(),
        table: gg
            .arrows()
            .flat_map(|w| {
                let at = &at;
                pairs.iter().enumerate().filter(move |(_, &(x, _))| gg.s(w) == gg.r(x)).map(move |(k, &(x, y))| {
                    [w, k, at(gg.compose(w, x), y)]
                })
            })
            .collect(),
    };
    let action = SpaceAction::validate(g.clone(), &action_raw).expect("translation action axioms");
    RightTranslation { groupoid, pairs, action }
}

/// Exhaustive comparison of `w·((x,y,xy)(xy,z,xyz))` with
/// `(w·(x,y,xy))(w·(xy,z,xyz))`. Returns the number of cases checked and the failures.
pub fn translation_product_equations(g: &FiniteGroupoid, rt: &RightTranslation) -> (usize, Vec<Violation>) {
    let h = &rt.groupoid;
    let mut checked = 0;
    let mut v = Vec::new();
    for w in g.arrows() {
        for x in g.arrows_with_range(g.s(w)) {
            for y in g.arrows_with_range(g.s(x)) {
                let xy = g.compose(x, y);
                for z in g.arrows_with_range(g.s(y)) {
                    checked += 1;
                    let a = rt.index_of(x, y).unwrap();
                    let b = rt.index_of(xy, z).unwrap();
                    // left side, computed from the closed form (wx, yz, wxyz)
                    let lhs = rt.action.act(w, h.compose(a, b));
                    let expected = rt.index_of(g.compose(w, x), g.compose(y, z));
                    let wa = rt.action.act(w, a).unwrap();
                    let wb = rt.action.act(w, b).unwrap();
                    let rhs = h.mul(wa, wb);
                    if lhs != rhs || lhs != expected {
                        v.push(Violation::new("w·(ab) ≠ (w·a)(w·b)", vec![w, x, y, z], ""));
                    }
                }
            }
        }
    }
    (checked, v)
}

/// Standard groupoids used by tests, examples and the scenario generator.
pub mod library {
    use super::*;

    /// Pair groupoid on `n` points; arrow `(i, j)` has index `i·n + j`.
    pub fn pair_groupoid(n: usize) -> FiniteGroupoid {
        let idx = |i: usize, j: usize| i * n + j;
        let raw = RawGroupoid {
            labels: (0..n * n).map(|k| format!("({},{})", k / n, k % n)).collect(),
            units: (0..n).map(|i| idx(i, i)).collect(),
            range: (0..n * n).map(|k| idx(k / n, k / n)).collect(),
            source: (0..n * n).map(|k| idx(k % n, k % n)).collect(),
            inverse: (0..n * n).map(|k| idx(k % n, k / n)).collect(),
            composition: (0..n)
                .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |k| [idx(i, j), idx(j, k), idx(i, k)])))
                .collect(),
        };
        FiniteGroupoid::validate(&raw).unwrap()
    }

    /// Group from its multiplication table; element 0 must be the identity.
    pub fn group_from_table(labels: Vec<String>, table: &[Vec<usize>]) -> Result<FiniteGroupoid> {
        let n = labels.len();
        let inverse = (0..n)
            .map(|g| (0..n).find(|&h| table[g][h] == 0).unwrap_or(g))
            .collect();
        let raw = RawGroupoid {
            labels,
            units: vec![0],
            range: vec![0; n],
            source: vec![0; n],
            inverse,
            composition: (0..n).flat_map(|g| (0..n).map(move |h| [g, h, table[g][h]])).collect(),
        };
        FiniteGroupoid::validate(&raw)
    }

    pub fn cyclic_group(k: usize) -> FiniteGroupoid {
        let table: Vec<Vec<usize>> = (0..k).map(|a| (0..k).map(|b| (a + b) % k).collect()).collect();
        let labels = (0..k).map(|a| if a == 0 { "e".to_string() } else { format!("g{a}") }).collect();
        group_from_table(labels, &table).unwrap()
    }

    pub fn trivial_group() -> FiniteGroupoid {
        cyclic_group(1)
    }

    /// `Z/2 × Z/2` with elements `e, a, b, c = ab` (indices 0..4, bitwise xor).
    pub fn klein_four() -> FiniteGroupoid {
        let table: Vec<Vec<usize>> = (0..4).map(|a| (0..4).map(|b| a ^ b).collect()).collect();
        group_from_table(vec!["e".into(), "a".into(), "b".into(), "c".into()], &table).unwrap()
    }

    /// Symmetric group on three letters, elements as permutations in
    /// lexicographic order (identity first).
    pub fn symmetric_s3() -> FiniteGroupoid {
        let perms: Vec<[usize; 3]> =
            vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let pos = |p: [usize; 3]| perms.iter().position(|&q| q == p).unwrap();
        let table: Vec<Vec<usize>> = perms
            .iter()
            .map(|a| perms.iter().map(|b| pos([a[b[0]], a[b[1]], a[b[2]]])).collect())
            .collect();
        let labels = perms.iter().map(|p| format!("{}{}{}", p[0], p[1], p[2])).collect();
        group_from_table(labels, &table).unwrap()
    }

    /// Direct product; arrow `(a, b)` has index `a·|B| + b`.
    pub fn product(a: &FiniteGroupoid, b: &FiniteGroupoid) -> FiniteGroupoid {
        let nb = b.len();
        let idx = |x: usize, y: usize| x * nb + y;
        let n = a.len() * nb;
        let raw = RawGroupoid {
            labels: (0..n).map(|k| format!("({},{})", a.label(k / nb), b.label(k % nb))).collect(),
            units: a.units().iter().flat_map(|&u| b.units().iter().map(move |&v| idx(u, v))).collect(),
            range: (0..n).map(|k| idx(a.r(k / nb), b.r(k % nb))).collect(),
            source: (0..n).map(|k| idx(a.s(k / nb), b.s(k % nb))).collect(),
            inverse: (0..n).map(|k| idx(a.inv(k / nb), b.inv(k % nb))).collect(),
            composition: a
                .composable_pairs()
                .flat_map(|(x1, x2)| {
                    b.composable_pairs()
                        .map(move |(y1, y2)| [idx(x1, y1), idx(x2, y2), idx(a.compose(x1, x2), b.compose(y1, y2))])
                })
                .collect(),
        };
        FiniteGroupoid::validate(&raw).unwrap()
    }

    /// Disjoint union; arrows of `b` are shifted by `|a|`.
    pub fn disjoint_union(a: &FiniteGroupoid, b: &FiniteGroupoid) -> FiniteGroupoid {
        let off = a.len();
        let ra = a.to_raw();
        let rb = b.to_raw();
        let shift = |v: &[usize]| v.iter().map(|&x| x + off).collect::<Vec<_>>();
        let raw = RawGroupoid {
            labels: ra.labels.iter().cloned().chain(rb.labels.iter().map(|l| format!("{l}'"))).collect(),
            units: ra.units.iter().copied().chain(shift(&rb.units)).collect(),
            range: ra.range.iter().copied().chain(shift(&rb.range)).collect(),
            source: ra.source.iter().copied().chain(shift(&rb.source)).collect(),
            inverse: ra.inverse.iter().copied().chain(shift(&rb.inverse)).collect(),
            composition: ra
                .composition
                .iter()
                .copied()
                .chain(rb.composition.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]))
                .collect(),
        };
        FiniteGroupoid::validate(&raw).unwrap()
    }

    /// A space viewed as a groupoid with only units.
    pub fn space(labels: Vec<String>) -> FiniteGroupoid {
        let n = labels.len();
        let raw = RawGroupoid {
            labels,
            units: (0..n).collect(),
            range: (0..n).collect(),
            source: (0..n).collect(),
            inverse: (0..n).collect(),
            composition: (0..n).map(|k| [k, k, k]).collect(),
        };
        FiniteGroupoid::validate(&raw).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;
    use crate::scalar::rat_int;

    #[test]
    fn pair_groupoid_and_z2_are_valid() {
        let p2 = pair_groupoid(2);
        assert_eq!(p2.len(), 4);
        assert_eq!(p2.units(), &[0, 3]);
        let z2 = cyclic_group(2);
        assert!(z2.is_group());
        assert_eq!(z2.compose(1, 1), 0);
    }

    #[test]
    fn bad_inverse_is_reported_with_witness() {
        let mut raw = pair_groupoid(2).to_raw();
        // (0,1) has index 1; make it its own inverse
        raw.inverse[1] = 1;
        let v = FiniteGroupoid::violations(&raw);
        assert!(v.iter().any(|x| x.axiom == "inv(g)·g ≠ s(g)" && x.witness == vec![1]), "{v:?}");
    }

    #[test]
    fn non_closed_and_non_associative_tables_are_reported() {
        let mut raw = cyclic_group(3).to_raw();
        raw.composition.retain(|t| !(t[0] == 1 && t[1] == 2));
        let v = FiniteGroupoid::violations(&raw);
        assert!(v.iter().any(|x| x.axiom == "multiplication not closed" && x.witness == vec![1, 2]));

        // a non-associative loop on three elements: Latin square with identity 0
        let table = vec![vec![0, 1, 2], vec![1, 0, 2], vec![2, 2, 0]];
        let bad = group_from_table(vec!["e".into(), "a".into(), "b".into()], &table);
        assert!(bad.is_err());
    }

    #[test]
    fn action_groupoid_of_swap() {
        let z2 = Arc::new(cyclic_group(2));
        let raw = RawSpaceAction {
            points: vec!["a".into(), "b".into()],
            moment: vec![0, 0],
            table: vec![[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]],
        };
        let act = SpaceAction::validate(z2, &raw).unwrap();
        let ag = action_groupoid(&act);
        assert_eq!(ag.groupoid.len(), 4);
        assert_eq!(ag.groupoid.units().len(), 2);
        for g in ag.groupoid.arrows().filter(|&g| !ag.groupoid.is_unit(g)) {
            assert_ne!(ag.groupoid.r(g), ag.groupoid.s(g));
        }
    }

    #[test]
    fn trivial_group_on_point_gives_one_arrow() {
        let e = Arc::new(trivial_group());
        let raw = RawSpaceAction { points: vec!["*".into()], moment: vec![0], table: vec![[0, 0, 0]] };
        let ag = action_groupoid(&SpaceAction::validate(e, &raw).unwrap());
        assert_eq!(ag.groupoid.len(), 1);
    }

    #[test]
    fn right_translation_sizes() {
        let rt = right_translation_groupoid(&Arc::new(cyclic_group(2)));
        assert_eq!(rt.groupoid.len(), 4);
        assert_eq!(rt.groupoid.units().len(), 2);
        let rt1 = right_translation_groupoid(&Arc::new(trivial_group()));
        assert_eq!(rt1.groupoid.len(), 1);
    }

    #[test]
    fn translation_equations_hold_for_z3() {
        let g = Arc::new(cyclic_group(3));
        let rt = right_translation_groupoid(&g);
        let (n, v) = translation_product_equations(&g, &rt);
        assert_eq!(n, 81);
        assert!(v.is_empty());
    }

    #[test]
    fn haar_examples() {
        let p2 = pair_groupoid(2);
        let counting = HaarSystem::counting(&p2);
        assert!(p2.arrows().all(|h| counting.unit_weight_at_source(h) == &rat_int(1)));

        // weight((i,j)) = c(j), c = (1, 3)
        let c = [rat_int(1), rat_int(3)];
        let w: Vec<Rational> = (0..4).map(|k| c[k % 2].clone()).collect();
        let haar = HaarSystem::canonical(&p2, w).unwrap();
        assert_eq!(haar.weight(3), &rat_int(3));

        let bad = vec![rat_int(1), rat_int(1), rat_int(1), rat_int(2)];
        let err = HaarSystem::canonical(&p2, bad).unwrap_err();
        assert!(err.violations().iter().any(|v| v.witness == vec![1, 3]), "{err}");
    }

    #[test]
    fn reduction_of_pair_groupoid() {
        let p3 = pair_groupoid(3);
        let (sub, embed) = p3.reduction(&[0, 8]);
        assert_eq!(sub.len(), 4);
        assert_eq!(embed, vec![0, 2, 6, 8]);
    }

    #[test]
    fn library_groups_are_valid() {
        assert_eq!(symmetric_s3().len(), 6);
        assert_eq!(klein_four().len(), 4);
        let prod = product(&pair_groupoid(2), &cyclic_group(2));
        assert_eq!(prod.len(), 8);
        assert_eq!(prod.units().len(), 2);
        let du = disjoint_union(&pair_groupoid(2), &pair_groupoid(2));
        assert_eq!(du.orbits().len(), 2);
    }
}
