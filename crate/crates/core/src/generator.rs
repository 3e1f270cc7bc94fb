//! Deterministic pseudo-random scenarios.
//!
//! Templates:
//! - `orbit`: a group acts on points through a union of coset spaces `G/K`,
//!   and so on `H = R × Γ` where `R` is an equivalence relation whose classes
//!   are unions of orbits and `Γ` is a small group.
//! - `translation`: a group acts on its right-translation groupoid.
//! - `blocks`: the pair groupoid `P2` swaps two copies of `R × Γ`.
//! - `fixed`: the trivial group acts on `R × Γ` or on an action groupoid.
//!
//! Bundles are trivial (matrix units, dims constant on orbits), or line
//! bundles pulled back from a cocycle on `Γ`. When `Γ = Z/2` and the actor
//! has a sign character the bundle action may twist fibers by it.
//!
//! Seed 0 with no size parameters gives the canonical P2-swap scenario.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actions::{translation_action, GroupoidAction, RawGroupoidAction};
use crate::error::{Error, Result};
use crate::fell_bundle::{pauli_cocycle, sign_cocycle_z2, trivial_cocycle, Cocycle, RawFiberMap};
use crate::groupoid::library::*;
use crate::groupoid::{action_groupoid, Arrow, FiniteGroupoid, HaarSystem, RawGroupoid, RawSpaceAction, SpaceAction};
use crate::scalar::{rat, GaussianRational as Gq, Rational};
use crate::scenario::{
    p2_swap_scenario, BundleActionSpec, BundleSpec, GroupoidSection, HaarSection, MeasureSection, ScenarioFile,
    SCENARIO_VERSION,
};

pub const MAX_ARROWS: usize = 64;
pub const MAX_FIBER_DIM: usize = 3;
/// Cap on the dimension of the semidirect section algebra.
pub const MAX_ALGEBRA_DIM: usize = 160;
const ATTEMPTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Cyclic(usize),
    Klein,
    S3,
    /// The pair groupoid on two points (not a group).
    P2,
}

impl GroupKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "k4" => Ok(GroupKind::Klein),
            "s3" => Ok(GroupKind::S3),
            "p2" => Ok(GroupKind::P2),
            _ => s
                .strip_prefix('z')
                .and_then(|k| k.parse().ok())
                .filter(|k| (1..=6).contains(k))
                .map(GroupKind::Cyclic)
                .ok_or_else(|| Error::Infeasible(format!("unknown group {s:?} (use z1..z6, k4, s3, p2)"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GroupKind::Cyclic(k) => format!("z{k}"),
            GroupKind::Klein => "k4".into(),
            GroupKind::S3 => "s3".into(),
            GroupKind::P2 => "p2".into(),
        }
    }

    fn groupoid(&self) -> FiniteGroupoid {
        match self {
            GroupKind::Cyclic(k) => cyclic_group(*k),
            GroupKind::Klein => klein_four(),
            GroupKind::S3 => symmetric_s3(),
            GroupKind::P2 => pair_groupoid(2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GenParams {
    pub seed: u64,
    /// Units of `H`.
    pub units: Option<usize>,
    pub group: Option<GroupKind>,
    /// Largest unit fiber dimension of a trivial bundle (at most 3).
    pub max_dim: Option<usize>,
}

/// `Γ` together with the projection `H → Γ` that line bundles pull back along.
struct Coefficients {
    gamma: FiniteGroupoid,
    proj: Vec<Arrow>,
}

struct Skeleton {
    template: &'static str,
    g: Arc<FiniteGroupoid>,
    h: Arc<FiniteGroupoid>,
    raw_action: RawGroupoidAction,
    coeff: Coefficients,
}

pub fn generate_scenario(params: &GenParams) -> Result<ScenarioFile> {
    if params.seed == 0 && params.units.is_none() && params.group.is_none() && params.max_dim.is_none() {
        return Ok(p2_swap_scenario());
    }
    let max_dim = params.max_dim.unwrap_or(MAX_FIBER_DIM);
    if !(1..=MAX_FIBER_DIM).contains(&max_dim) {
        return Err(Error::Infeasible(format!("fiber dimension cap must be in 1..={MAX_FIBER_DIM}")));
    }
    if let Some(n) = params.units {
        if n == 0 || n > MAX_ARROWS {
            return Err(Error::Infeasible(format!("units must be in 1..={MAX_ARROWS}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..ATTEMPTS {
        if let Some(file) = attempt(&mut rng, params, max_dim)? {
            return Ok(file);
        }
    }
    Err(Error::Infeasible(format!("no scenario with algebra dimension at most {MAX_ALGEBRA_DIM} for these parameters")))
}

fn attempt(rng: &mut ChaCha8Rng, params: &GenParams, max_dim: usize) -> Result<Option<ScenarioFile>> {
    let kind = match params.group {
        Some(k) => k,
        None => *[
            GroupKind::Cyclic(1),
            GroupKind::Cyclic(2),
            GroupKind::Cyclic(3),
            GroupKind::Klein,
            GroupKind::S3,
            GroupKind::P2,
        ]
        .choose(rng)
        .expect("nonempty"),
    };
    let skeleton = match kind {
        GroupKind::P2 => {
            let units = params.units.unwrap_or(2 * rng.gen_range(1..=3));
            if units % 2 == 1 {
                return Err(Error::Infeasible("p2 swaps two blocks, so units must be even".into()));
            }
            blocks(rng, units / 2)?
        }
        GroupKind::Cyclic(1) => {
            let units = params.units.unwrap_or(rng.gen_range(1..=4));
            fixed(rng, units)?
        }
        _ => {
            let g = Arc::new(kind.groupoid());
            let fits_translation = params.units.is_none_or(|n| n == g.len()) && g.len() * g.len() <= MAX_ARROWS;
            if fits_translation && rng.gen_bool(0.3) {
                translation(g)
            } else {
                let units = params.units.unwrap_or(rng.gen_range(2..=5));
                orbit(rng, g, units)?
            }
        }
    };
    finish(rng, params, kind, skeleton, max_dim)
}

/// All subgroups of a group, as sorted element lists.
fn subgroups(g: &FiniteGroupoid) -> Vec<Vec<Arrow>> {
    let n = g.len();
    (0u32..1 << (n - 1))
        .map(|mask| {
            std::iter::once(0)
                .chain((1..n).filter(|&k| mask & (1 << (k - 1)) != 0))
                .collect::<Vec<Arrow>>()
        })
        .filter(|s| s.iter().all(|&a| s.iter().all(|&b| s.contains(&g.compose(a, b)))))
        .collect()
}

/// `G` acting on the disjoint union of the coset spaces `G/K`.
fn coset_action(g: &Arc<FiniteGroupoid>, ks: &[Vec<Arrow>]) -> SpaceAction {
    let mut cosets: Vec<Vec<Arrow>> = Vec::new();
    let mut block_of = Vec::new();
    for (b, k) in ks.iter().enumerate() {
        for x in g.arrows() {
            let mut c: Vec<Arrow> = k.iter().map(|&y| g.compose(x, y)).collect();
            c.sort_unstable();
            if !cosets.iter().zip(&block_of).any(|(d, &bb)| bb == b && *d == c) {
                cosets.push(c);
                block_of.push(b);
            }
        }
    }
    let find = |b: usize, c: &Vec<Arrow>| {
        (0..cosets.len()).find(|&t| block_of[t] == b && cosets[t] == *c).expect("coset")
    };
    let mut table = Vec::new();
    for x in g.arrows() {
        for t in 0..cosets.len() {
            let mut c: Vec<Arrow> = cosets[t].iter().map(|&y| g.compose(x, y)).collect();
            c.sort_unstable();
            table.push([x, t, find(block_of[t], &c)]);
        }
    }
    let raw = RawSpaceAction {
        points: (0..cosets.len()).map(|t| format!("p{t}")).collect(),
        moment: vec![0; cosets.len()],
        table,
    };
    SpaceAction::validate(g.clone(), &raw).expect("coset spaces carry an action")
}

/// Random union of coset spaces with exactly `n` points.
fn random_orbits<R: Rng>(rng: &mut R, g: &Arc<FiniteGroupoid>, n: usize) -> SpaceAction {
    let subs = subgroups(g);
    let mut remaining = n;
    let mut ks = Vec::new();
    while remaining > 0 {
        let fitting: Vec<&Vec<Arrow>> = subs.iter().filter(|k| g.len() / k.len() <= remaining).collect();
        let k = (*fitting.choose(rng).expect("the whole group fits")).clone();
        remaining -= g.len() / k.len();
        ks.push(k);
    }
    coset_action(g, &ks)
}

/// Equivalence relation from a class label per point; arrows `(i, j)` in
/// lexicographic order.
fn equivalence_relation(class: &[usize]) -> (FiniteGroupoid, BTreeMap<(usize, usize), Arrow>) {
    let n = class.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| class[i] == class[j]).collect();
    let index: BTreeMap<(usize, usize), Arrow> = pairs.iter().enumerate().map(|(a, &p)| (p, a)).collect();
    let raw = RawGroupoid {
        labels: pairs.iter().map(|(i, j)| format!("({i},{j})")).collect(),
        units: (0..n).map(|i| index[&(i, i)]).collect(),
        range: pairs.iter().map(|&(i, _)| index[&(i, i)]).collect(),
        source: pairs.iter().map(|&(_, j)| index[&(j, j)]).collect(),
        inverse: pairs.iter().map(|&(i, j)| index[&(j, i)]).collect(),
        composition: pairs
            .iter()
            .flat_map(|&(i, j)| {
                pairs.iter().filter(move |&&(j2, _)| j2 == j).map(move |&(_, k)| [(i, j), (j, k), (i, k)])
            })
            .map(|[a, b, c]| [index[&a], index[&b], index[&c]])
            .collect(),
    };
    (FiniteGroupoid::validate(&raw).expect("equivalence relation"), index)
}

/// Groups orbits into random classes, keeping `Σ|class|²·|Γ| ≤ MAX_ARROWS`.
fn random_classes<R: Rng>(rng: &mut R, orbit_of: &[usize], gamma: usize) -> Vec<usize> {
    let orbits = orbit_of.iter().max().map_or(0, |m| m + 1);
    for _ in 0..16 {
        let label: Vec<usize> = (0..orbits).map(|_| rng.gen_range(0..orbits.max(1))).collect();
        let class: Vec<usize> = orbit_of.iter().map(|&o| label[o]).collect();
        let mut sizes = vec![0usize; orbits];
        for &c in &class {
            sizes[c] += 1;
        }
        if sizes.iter().map(|s| s * s).sum::<usize>() * gamma <= MAX_ARROWS {
            return class;
        }
    }
    let sizes_per_orbit: Vec<usize> =
        (0..orbits).map(|o| orbit_of.iter().filter(|&&p| p == o).count()).collect();
    if sizes_per_orbit.iter().map(|s| s * s).sum::<usize>() * gamma <= MAX_ARROWS {
        orbit_of.to_vec()
    } else {
        (0..orbit_of.len()).collect()
    }
}

fn random_gamma<R: Rng>(rng: &mut R, relation_arrows: usize) -> FiniteGroupoid {
    let options: Vec<FiniteGroupoid> = [trivial_group(), cyclic_group(2), klein_four()]
        .into_iter()
        .filter(|c| c.len() * relation_arrows <= MAX_ARROWS)
        .collect();
    options.choose(rng).cloned().unwrap_or_else(trivial_group)
}

/// `H = R × Γ`, with `G` moving points of `R` and fixing `Γ`.
fn product_with_gamma(r: &FiniteGroupoid, gamma: FiniteGroupoid) -> (FiniteGroupoid, Coefficients) {
    let h = product(r, &gamma);
    let proj = h.arrows().map(|a| a % gamma.len()).collect();
    (h, Coefficients { gamma, proj })
}

fn orbit<R: Rng>(rng: &mut R, g: Arc<FiniteGroupoid>, units: usize) -> Result<Skeleton> {
    let points = random_orbits(rng, &g, units);
    let n = points.len();
    let mut orbit_of = vec![usize::MAX; n];
    let mut next = 0;
    for t in 0..n {
        if orbit_of[t] == usize::MAX {
            for x in g.arrows() {
                orbit_of[points.act(x, t).expect("group action")] = next;
            }
            next += 1;
        }
    }
    let gamma_guess = if rng.gen_bool(0.5) { 1 } else { 2 };
    let class = random_classes(rng, &orbit_of, gamma_guess);
    let (rel, index) = equivalence_relation(&class);
    if rel.len() > MAX_ARROWS {
        return Err(Error::Infeasible(format!("{units} units exceed the {MAX_ARROWS}-arrow cap")));
    }
    let gamma = if gamma_guess == 1 { trivial_group() } else { random_gamma(rng, rel.len()) };
    let (h, coeff) = product_with_gamma(&rel, gamma);
    let ng = coeff.gamma.len();
    let pairs: Vec<(usize, usize)> = index.keys().copied().collect();
    let table = g
        .arrows()
        .flat_map(|x| {
            let points = &points;
            let index = &index;
            pairs.iter().flat_map(move |&(i, j)| {
                let img = (points.act(x, i).unwrap(), points.act(x, j).unwrap());
                (0..ng).map(move |c| [x, index[&(i, j)] * ng + c, index[&img] * ng + c])
            })
        })
        .collect();
    let raw_action = RawGroupoidAction { moment: vec![0; h.len()], table };
    Ok(Skeleton { template: "orbit", g, h: Arc::new(h), raw_action, coeff })
}

fn translation(g: Arc<FiniteGroupoid>) -> Skeleton {
    let (action, rt) = translation_action(&g);
    let proj = rt.pairs.iter().map(|&(_, y)| y).collect();
    Skeleton {
        template: "translation",
        g: g.clone(),
        h: action.target().clone(),
        raw_action: action.to_raw(),
        coeff: Coefficients { gamma: (*g).clone(), proj },
    }
}

fn blocks<R: Rng>(rng: &mut R, m: usize) -> Result<Skeleton> {
    let class: Vec<usize> = if 2 * m * m <= MAX_ARROWS && rng.gen_bool(0.5) {
        vec![0; m]
    } else {
        (0..m).map(|_| rng.gen_range(0..m)).collect()
    };
    let (rel, index) = equivalence_relation(&class);
    let half_cap = MAX_ARROWS / 2;
    if rel.len() > half_cap {
        let (disc, _) = equivalence_relation(&(0..m).collect::<Vec<_>>());
        if disc.len() > half_cap {
            return Err(Error::Infeasible(format!("{} units exceed the {MAX_ARROWS}-arrow cap", 2 * m)));
        }
        return blocks_from(rng, disc, (0..m).map(|i| ((i, i), i)).collect(), (0..m).collect());
    }
    blocks_from(rng, rel, index, class)
}

fn blocks_from<R: Rng>(
    rng: &mut R,
    rel: FiniteGroupoid,
    index: BTreeMap<(usize, usize), Arrow>,
    class: Vec<usize>,
) -> Result<Skeleton> {
    let gamma = random_gamma(rng, 2 * rel.len());
    let (h0, coeff0) = product_with_gamma(&rel, gamma);
    let ng = coeff0.gamma.len();
    let off = h0.len();
    let h = disjoint_union(&h0, &h0);
    let proj = h.arrows().map(|a| coeff0.proj[a % off]).collect();
    // the swap twists points by a permutation preserving the classes
    let m = class.len();
    let mut perm: Vec<usize> = (0..m).collect();
    for c in 0..m {
        let members: Vec<usize> = (0..m).filter(|&i| class[i] == c).collect();
        let mut shuffled = members.clone();
        shuffled.shuffle(rng);
        for (a, b) in members.iter().zip(shuffled) {
            perm[*a] = b;
        }
    }
    let moved = |a: Arrow| {
        let (r, c) = (a / ng, a % ng);
        let (i, j) = *index.iter().find(|(_, &v)| v == r).expect("arrow").0;
        index[&(perm[i], perm[j])] * ng + c
    };
    let forward: Vec<Arrow> = (0..off).map(moved).collect();
    let mut backward = vec![0; off];
    for (a, &b) in forward.iter().enumerate() {
        backward[b] = a;
    }
    let g = Arc::new(pair_groupoid(2));
    let mut table = Vec::new();
    for k in 0..off {
        table.push([0, k, k]);
        table.push([3, k + off, k + off]);
        // (1,0) sends the first block to the second, (0,1) back
        table.push([2, k, forward[k] + off]);
        table.push([1, k + off, backward[k]]);
    }
    let moment = (0..2 * off).map(|a| if a < off { 0 } else { 3 }).collect();
    Ok(Skeleton {
        template: "blocks",
        g,
        h: Arc::new(h),
        raw_action: RawGroupoidAction { moment, table },
        coeff: Coefficients { gamma: coeff0.gamma, proj },
    })
}

fn fixed<R: Rng>(rng: &mut R, units: usize) -> Result<Skeleton> {
    let g = Arc::new(trivial_group());
    let (h, coeff) = if rng.gen_bool(0.4) {
        // action groupoid of a small group acting on `units` points
        let k = [cyclic_group(2), cyclic_group(3), symmetric_s3()].choose(rng).expect("nonempty").clone();
        let k = Arc::new(k);
        let points = random_orbits(rng, &k, units);
        let ag = action_groupoid(&points).groupoid;
        if ag.len() > MAX_ARROWS {
            return Err(Error::Infeasible(format!("{units} units exceed the {MAX_ARROWS}-arrow cap")));
        }
        let proj = vec![0; ag.len()];
        (ag, Coefficients { gamma: trivial_group(), proj })
    } else {
        let class: Vec<usize> = (0..units).map(|_| rng.gen_range(0..units)).collect();
        let class = random_classes(rng, &class, 1);
        let (rel, _) = equivalence_relation(&class);
        if rel.len() > MAX_ARROWS {
            return Err(Error::Infeasible(format!("{units} units exceed the {MAX_ARROWS}-arrow cap")));
        }
        let gamma = random_gamma(rng, rel.len());
        product_with_gamma(&rel, gamma)
    };
    let raw_action = RawGroupoidAction { moment: vec![0; h.len()], table: h.arrows().map(|k| [0, k, k]).collect() };
    Ok(Skeleton { template: "fixed", g, h: Arc::new(h), raw_action, coeff })
}

fn random_positive<R: Rng>(rng: &mut R) -> Rational {
    rat(rng.gen_range(1..=9), rng.gen_range(1..=4))
}

/// Homomorphisms `G → {±1}` other than the trivial one.
fn sign_characters(g: &FiniteGroupoid) -> Vec<Vec<i8>> {
    let n = g.len();
    (1u32..1 << n)
        .map(|mask| (0..n).map(|k| if mask & (1 << k) != 0 { -1 } else { 1 }).collect::<Vec<i8>>())
        .filter(|eps| {
            g.units().iter().all(|&u| eps[u] == 1)
                && g.composable_pairs().all(|(x, y)| eps[g.compose(x, y)] == eps[x] * eps[y])
        })
        .collect()
}

/// Dimension of the semidirect section algebra for unit fiber dims `d`, with
/// `dim A(h) = d(r h) d(s h)`.
fn semidirect_algebra_dim(action: &GroupoidAction, d: impl Fn(Arrow) -> usize) -> usize {
    let (g, h) = (action.actor(), action.target());
    h.arrows()
        .map(|k| d(h.r(k)) * d(h.s(k)) * g.arrows().filter(|&x| g.r(x) == action.moment(k)).count())
        .sum()
}

fn finish<R: Rng>(rng: &mut R, params: &GenParams, kind: GroupKind, sk: Skeleton, max_dim: usize) -> Result<Option<ScenarioFile>> {
    let action = GroupoidAction::validate(sk.g.clone(), sk.h.clone(), &sk.raw_action)
        .map_err(|e| Error::Infeasible(format!("generator produced an invalid action: {e}")))?;
    let (g, h) = (&*sk.g, &*sk.h);

    // orbits of G on the units of H, for orbit-constant weights and dims
    let mut orbit_of = vec![usize::MAX; h.units().len()];
    let mut orbits = 0;
    for (pos, &v) in h.units().iter().enumerate() {
        if orbit_of[pos] == usize::MAX {
            for x in g.arrows() {
                if let Some(xv) = action.act(x, v) {
                    orbit_of[h.unit_index(xv).expect("unit")] = orbits;
                }
            }
            orbits += 1;
        }
    }
    let orbit_weight: Vec<Rational> = (0..orbits).map(|_| random_positive(rng)).collect();
    let unit_w: Vec<Rational> = orbit_of.iter().map(|&o| orbit_weight[o].clone()).collect();
    let haar_h = HaarSystem::from_unit_weights(h, &unit_w)?;
    let g_unit_w: Vec<Rational> = g.units().iter().map(|_| random_positive(rng)).collect();
    let haar_g = HaarSystem::from_unit_weights(g, &g_unit_w)?;
    let mu: Vec<Rational> = h.units().iter().map(|_| random_positive(rng)).collect();

    let gamma = &sk.coeff.gamma;
    let mut cocycles: Vec<(&str, Cocycle)> = vec![("trivial", trivial_cocycle(gamma))];
    if gamma.is_group() && gamma.len() == 2 {
        cocycles.push(("sign", sign_cocycle_z2(gamma)));
    }
    if *gamma == klein_four() {
        cocycles.push(("pauli", pauli_cocycle(gamma)));
    }
    let (bundle, bundle_label, line) = if rng.gen_bool(0.4) {
        let mut orbit_dim: Vec<usize> =
            (0..orbits).map(|_| if rng.gen_bool(0.6) { 1 } else { rng.gen_range(1..=max_dim) }).collect();
        let dim_at = |od: &[usize], u: Arrow| od[orbit_of[h.unit_index(u).expect("unit")]];
        while semidirect_algebra_dim(&action, |u| dim_at(&orbit_dim, u)) > MAX_ALGEBRA_DIM {
            let (o, &d) = orbit_dim.iter().enumerate().max_by_key(|(_, &d)| d).expect("an orbit");
            if d == 1 {
                return Ok(None);
            }
            orbit_dim[o] -= 1;
        }
        let unit_dims: Vec<usize> = orbit_of.iter().map(|&o| orbit_dim[o]).collect();
        (BundleSpec::Trivial { unit_dims }, "trivial".to_string(), None)
    } else {
        let (name, sigma) = cocycles.choose(rng).expect("nonempty").clone();
        let spec = if rng.gen_bool(0.5) {
            let mut entries: Vec<(Arrow, Arrow, Gq)> =
                sigma.iter().map(|(&(a, b), c)| (a, b, c.clone())).collect();
            entries.sort_by_key(|e| (e.0, e.1));
            BundleSpec::Pullback {
                base: gamma.to_raw(),
                map: sk.coeff.proj.clone(),
                bundle: Box::new(BundleSpec::Line { cocycle: entries }),
            }
        } else {
            let p = &sk.coeff.proj;
            let entries = h.composable_pairs().map(|(a, b)| (a, b, sigma[&(p[a], p[b])].clone())).collect();
            BundleSpec::Line { cocycle: entries }
        };
        if semidirect_algebra_dim(&action, |_| 1) > MAX_ALGEBRA_DIM {
            return Ok(None);
        }
        (spec, format!("line-{name}"), Some(name))
    };

    let characters = sign_characters(g);
    let twist = gamma.len() == 2 && gamma.is_group() && line.is_some() && !characters.is_empty() && rng.gen_bool(0.5);
    let bundle_action = if twist {
        let eps = characters.choose(rng).expect("nonempty");
        let maps = action
            .to_raw()
            .table
            .iter()
            .map(|&[x, k, _]| {
                let c = if sk.coeff.proj[k] == 1 { eps[x] } else { 1 };
                RawFiberMap { x, h: k, matrix: vec![vec![Gq::from_int(c as i64)]] }
            })
            .collect();
        BundleActionSpec::Explicit { maps }
    } else {
        BundleActionSpec::Identity
    };

    let name = format!(
        "gen-{}-{}-{}-u{}-{}{}",
        params.seed,
        sk.template,
        kind.name(),
        h.units().len(),
        bundle_label,
        if twist { "-twisted" } else { "" }
    );
    Ok(Some(ScenarioFile {
        scenario_v: SCENARIO_VERSION,
        name,
        groupoid: GroupoidSection { g: g.to_raw(), h: h.to_raw() },
        groupoid_action: action.to_raw(),
        haar: HaarSection { weights: haar_h.weights().to_vec(), actor_weights: haar_g.weights().to_vec() },
        bundle,
        bundle_action,
        measure: MeasureSection { mu },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_scenario;

    #[test]
    fn seed_zero_is_p2_swap() {
        let s = generate_scenario(&GenParams::default()).unwrap();
        assert_eq!(s, p2_swap_scenario());
    }

    #[test]
    fn deterministic() {
        let p = GenParams { seed: 42, units: Some(4), group: Some(GroupKind::Cyclic(3)), max_dim: None };
        assert_eq!(generate_scenario(&p).unwrap().dump(), generate_scenario(&p).unwrap().dump());
    }

    #[test]
    fn subgroup_counts() {
        assert_eq!(subgroups(&symmetric_s3()).len(), 6);
        assert_eq!(subgroups(&klein_four()).len(), 5);
        assert_eq!(subgroups(&cyclic_group(3)).len(), 2);
    }

    #[test]
    fn infeasible_parameters() {
        let p = GenParams { seed: 1, units: Some(3), group: Some(GroupKind::P2), max_dim: None };
        assert!(matches!(generate_scenario(&p), Err(Error::Infeasible(_))));
        let p = GenParams { seed: 1, units: Some(0), group: None, max_dim: None };
        assert!(generate_scenario(&p).is_err());
    }

    #[test]
    fn generated_scenarios_validate() {
        for seed in 1..40 {
            let p = GenParams { seed, ..Default::default() };
            let file = generate_scenario(&p).unwrap();
            let text = file.dump();
            let parsed = ScenarioFile::parse(&text).unwrap();
            assert_eq!(parsed.dump(), text);
            assert!(file.groupoid.h.labels.len() <= MAX_ARROWS);
            build_scenario(parsed).unwrap_or_else(|e| panic!("{}: {e}", file.name));
        }
    }
}
