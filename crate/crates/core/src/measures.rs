//! Quasi-invariant measures on unit spaces, modular functions, and exact
//! verification of the measure identities behind the crossed-product
//! isomorphism. With strictly positive finite data every "almost everywhere"
//! statement is checked everywhere.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::actions::{GroupoidAction, RawGroupoidAction};
use crate::error::{Error, Result, Violation};
use crate::groupoid::{library, Arrow, FiniteGroupoid, HaarSystem};
use crate::scalar::{format_rational, Rational};
use crate::semidirect::{semidirect_groupoid, semidirect_haar, Semidirect};

/// A strictly positive measure on the units, indexed by unit position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitMeasure {
    values: Vec<Rational>,
}

impl UnitMeasure {
    pub fn new(g: &FiniteGroupoid, values: Vec<Rational>) -> Result<Self> {
        let mut v = Vec::new();
        if values.len() != g.units().len() {
            v.push(Violation::new("measure length differs from the number of units", vec![values.len()], ""));
        }
        for (k, q) in values.iter().enumerate() {
            if *q <= Rational::zero() {
                v.push(Violation::new("measure not positive", vec![k], format_rational(q)));
            }
        }
        if v.is_empty() {
            Ok(Self { values })
        } else {
            Err(Error::invalid("unit measure", v))
        }
    }

    pub fn counting(g: &FiniteGroupoid) -> Self {
        Self { values: vec![Rational::one(); g.units().len()] }
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `μ({u})` for a unit arrow `u`.
    pub fn at(&self, g: &FiniteGroupoid, u: Arrow) -> &Rational {
        &self.values[g.unit_index(u).expect("unit")]
    }

    pub fn total(&self) -> Rational {
        self.values.iter().sum()
    }
}

/// Positive rational values on the arrows, a homomorphism to `(ℚ₊, ·)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModularFunction {
    values: Vec<Rational>,
}

impl ModularFunction {
    pub fn at(&self, h: Arrow) -> &Rational {
        &self.values[h]
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn is_identically_one(&self) -> bool {
        self.values.iter().all(One::is_one)
    }

    /// `Δ(hk) = Δ(h)Δ(k)`, `Δ(h⁻¹) = Δ(h)⁻¹`, `Δ(u) = 1`.
    pub fn violations(&self, g: &FiniteGroupoid) -> (usize, Vec<Violation>) {
        let mut v = Vec::new();
        let mut checked = 0;
        for (h, k) in g.composable_pairs() {
            checked += 1;
            if self.values[g.compose(h, k)] != &self.values[h] * &self.values[k] {
                v.push(Violation::new("Δ(hk) ≠ Δ(h)Δ(k)", vec![h, k], ""));
            }
        }
        for h in g.arrows() {
            checked += 1;
            if &self.values[h] * &self.values[g.inv(h)] != Rational::one() {
                v.push(Violation::new("Δ(h⁻¹) ≠ Δ(h)⁻¹", vec![h], ""));
            }
        }
        for &u in g.units() {
            checked += 1;
            if !self.values[u].is_one() {
                v.push(Violation::new("Δ(u) ≠ 1", vec![u], ""));
            }
        }
        (checked, v)
    }
}

/// `Δ = dν/dν⁻¹` for `ν = μ∘λ`:
/// `Δ(h) = μ(r(h))λ(h) / (μ(s(h))λ(h⁻¹))`.
pub fn modular_function(g: &FiniteGroupoid, haar: &HaarSystem, mu: &UnitMeasure) -> ModularFunction {
    let values = g
        .arrows()
        .map(|h| {
            (mu.at(g, g.r(h)) * haar.weight(h)) / (mu.at(g, g.s(h)) * haar.weight(g.inv(h)))
        })
        .collect();
    ModularFunction { values }
}

/// Pass/fail tally for one family of identities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub checked: usize,
    pub failed: usize,
}

impl Tally {
    pub fn record(&mut self, ok: bool) -> bool {
        self.checked += 1;
        if !ok {
            self.failed += 1;
        }
        ok
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

/// Restriction of `G` to the units whose `ρ`-fibers are nonempty, with the
/// action carried along. The dropped units form a `μ_G`-null set.
#[derive(Clone, Debug)]
pub struct EssentialReduction {
    pub action: GroupoidAction,
    /// Arrow embedding of the reduced `G` into the original.
    pub embed: Vec<Arrow>,
    pub dropped_units: Vec<Arrow>,
}

pub fn essential_reduction(action: &GroupoidAction) -> EssentialReduction {
    let g = &**action.actor();
    let keep: Vec<Arrow> = g.units().iter().copied().filter(|&u| !action.fiber_units(u).is_empty()).collect();
    let dropped_units = g.units().iter().copied().filter(|u| !keep.contains(u)).collect();
    let (sub, embed) = g.reduction(&keep);
    let mut back = vec![usize::MAX; g.len()];
    for (k, &x) in embed.iter().enumerate() {
        back[x] = k;
    }
    let old = action.to_raw();
    let raw = RawGroupoidAction {
        moment: old.moment.iter().map(|&u| back[u]).collect(),
        table: old.table.iter().map(|&[x, h, xh]| [back[x], h, xh]).collect(),
    };
    let reduced = GroupoidAction::validate(Arc::new(sub), action.target().clone(), &raw)
        .expect("restriction to an invariant set of units is an action");
    EssentialReduction { action: reduced, embed, dropped_units }
}

/// `μ_G = ρ_*μ` and the conditional measures `μ^u = μ|_{H_u⁰} / μ_G(u)`.
#[derive(Clone, Debug)]
pub struct Disintegration {
    pub mu_g: UnitMeasure,
    /// `μ^u(v)` indexed by `[G-unit position][H-unit position]`.
    pub conditional: Vec<Vec<Rational>>,
    pub reconstruction: Tally,
    pub probability: Tally,
}

impl Disintegration {
    pub fn conditional_at(&self, g: &FiniteGroupoid, h: &FiniteGroupoid, u: Arrow, v: Arrow) -> &Rational {
        &self.conditional[g.unit_index(u).expect("unit")][h.unit_index(v).expect("unit")]
    }
}

/// Requires every unit of `G` to have a nonempty fiber (apply
/// [`essential_reduction`] first).
pub fn pushforward_and_disintegrate(action: &GroupoidAction, mu: &UnitMeasure) -> Result<Disintegration> {
    let (g, h) = (&**action.actor(), &**action.target());
    let mut mass = vec![Rational::zero(); g.units().len()];
    for (pos, &v) in h.units().iter().enumerate() {
        mass[g.unit_index(action.moment(v)).expect("unit")] += &mu.values()[pos];
    }
    let mu_g = UnitMeasure::new(g, mass).map_err(|_| {
        Error::Infeasible("a unit of G has an empty ρ-fiber; reduce to the essential units first".into())
    })?;
    let conditional: Vec<Vec<Rational>> = g
        .units()
        .iter()
        .enumerate()
        .map(|(gp, &u)| {
            h.units()
                .iter()
                .enumerate()
                .map(|(hp, &v)| {
                    if action.moment(v) == u {
                        &mu.values()[hp] / &mu_g.values()[gp]
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut reconstruction = Tally::default();
    for hp in 0..h.units().len() {
        let total: Rational = (0..g.units().len()).map(|gp| &conditional[gp][hp] * &mu_g.values()[gp]).sum();
        reconstruction.record(total == mu.values()[hp]);
    }
    let mut probability = Tally::default();
    for (gp, &u) in g.units().iter().enumerate() {
        let total: Rational = conditional[gp].iter().sum();
        let supported = h
            .units()
            .iter()
            .enumerate()
            .all(|(hp, &v)| action.moment(v) == u || conditional[gp][hp].is_zero());
        probability.record(total.is_one() && supported);
    }
    Ok(Disintegration { mu_g, conditional, reconstruction, probability })
}

/// `Gρ = {(v, x) : v ∈ H⁰, ρ(v) = r(x)}`, built as the semidirect product of
/// `G` acting on the space `H⁰`, with Haar system `σ(v,x) = λ_G(x)`.
#[derive(Clone, Debug)]
pub struct RhoGroupoid {
    pub sd: Semidirect,
    pub haar: HaarSystem,
    pub delta: ModularFunction,
}

impl RhoGroupoid {
    pub fn groupoid(&self) -> &Arc<FiniteGroupoid> {
        &self.sd.groupoid
    }
}

pub fn unit_space_action(action: &GroupoidAction) -> GroupoidAction {
    let (g, h) = (&**action.actor(), &**action.target());
    let space = Arc::new(library::space(h.units().iter().map(|&v| h.label(v).to_string()).collect()));
    let pos = |v: Arrow| h.unit_index(v).expect("unit");
    let raw = RawGroupoidAction {
        moment: h.units().iter().map(|&v| action.moment(v)).collect(),
        table: g
            .arrows()
            .flat_map(|x| {
                h.units().iter().filter_map(move |&v| action.act(x, v).map(|xv| [x, pos(v), pos(xv)]))
            })
            .collect(),
    };
    GroupoidAction::validate(action.actor().clone(), space, &raw).expect("units are an invariant space")
}

pub fn rho_groupoid(action: &GroupoidAction, haar_g: &HaarSystem, mu: &UnitMeasure) -> Result<RhoGroupoid> {
    let on_units = unit_space_action(action);
    let sd = semidirect_groupoid(&on_units);
    let haar = semidirect_haar(&on_units, &sd, &HaarSystem::counting(on_units.target()), haar_g)?;
    let delta = modular_function(&sd.groupoid, &haar, mu);
    Ok(RhoGroupoid { sd, haar, delta })
}

/// Every identity of the measure ladder, with per-identity tallies.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MeasureCertificate {
    /// Multiplicativity of `Δ_H`, `Δ_G`, `δ` and `Δ` on `H ⋊ G`.
    pub modular_multiplicative: Tally,
    /// `Δ = dν/dν⁻¹` on indicators, for every modular function built.
    pub radon_nikodym: Tally,
    /// `μ = ∫ μ^u dμ_G(u)` on indicators of `H⁰`.
    pub disintegration: Tally,
    /// Each `μ^u` is a probability measure supported in `H_u⁰`.
    pub conditional_probability: Tally,
    /// Quasi-invariance of `μ_G` on `G` with `Δ_G`, on indicators of `G`.
    pub pushforward_quasi_invariance: Tally,
    /// Quasi-invariance of `μ` on `Gρ` with `δ`, on indicators of `Gρ`.
    pub rho_quasi_invariance: Tally,
    /// `δ(v,x) = μ(v)λ_G(s(x)) / (μ(x⁻¹·v)λ_G(r(x)))`.
    pub delta_closed_form: Tally,
    /// `Δ(h,x) = Δ_H(h) δ(s_H(h), x)` on every arrow of `H ⋊ G`.
    pub delta_factorization: Tally,
    /// `Δ_H(h) = Δ(h, ρ(h))` and `δ(v,x) = Δ(v,x)`.
    pub normalizations: Tally,
    /// `∫φ dμ^{s(x)} = ∫φ(x⁻¹·v) δ(x⁻¹·v, x⁻¹) Δ_G(x) dμ^{r(x)}(v)` for every
    /// `x` and every indicator `φ`.
    pub key_identity: Tally,
    /// The modular function of `μ^u` on `H_u` is `Δ_H` restricted.
    pub fiber_modular: Tally,
    pub dropped_units: Vec<Arrow>,
    pub notes: Vec<String>,
    pub violations: Vec<Violation>,
}

impl MeasureCertificate {
    pub fn tallies(&self) -> Vec<(&'static str, &Tally)> {
        vec![
            ("modular_multiplicative", &self.modular_multiplicative),
            ("radon_nikodym", &self.radon_nikodym),
            ("disintegration", &self.disintegration),
            ("conditional_probability", &self.conditional_probability),
            ("pushforward_quasi_invariance", &self.pushforward_quasi_invariance),
            ("rho_quasi_invariance", &self.rho_quasi_invariance),
            ("delta_closed_form", &self.delta_closed_form),
            ("delta_factorization", &self.delta_factorization),
            ("normalizations", &self.normalizations),
            ("key_identity", &self.key_identity),
            ("fiber_modular", &self.fiber_modular),
        ]
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.tallies().iter().all(|(_, t)| t.passed())
    }
}

/// All objects of the measure ladder for one scenario.
#[derive(Clone, Debug)]
pub struct MeasureData {
    pub reduction: EssentialReduction,
    pub haar_g: HaarSystem,
    pub disintegration: Disintegration,
    pub delta_h: ModularFunction,
    pub delta_g: ModularFunction,
    pub rho: RhoGroupoid,
    pub sd: Semidirect,
    pub haar_sd: HaarSystem,
    pub delta_sd: ModularFunction,
}

fn radon_nikodym_check(g: &FiniteGroupoid, haar: &HaarSystem, mu: &UnitMeasure, delta: &ModularFunction, t: &mut Tally) {
    // ν(1_h) = Δ(h) ν⁻¹(1_h), where ν⁻¹(1_h) = ν(1_{h⁻¹})
    for h in g.arrows() {
        let nu = mu.at(g, g.r(h)) * haar.weight(h);
        let nu_inv = mu.at(g, g.s(h)) * haar.weight(g.inv(h));
        t.record(nu == delta.at(h) * &nu_inv);
    }
}

/// Builds every measure-theoretic object and certifies the whole ladder.
/// `λ_H` must be invariant; `μ` lives on `H⁰`.
pub fn verify_measures(
    action: &GroupoidAction,
    haar_h: &HaarSystem,
    haar_g: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<(MeasureData, MeasureCertificate)> {
    let mut cert = MeasureCertificate::default();
    let reduction = essential_reduction(action);
    cert.dropped_units = reduction.dropped_units.clone();
    let action = &reduction.action;
    let haar_g = haar_g.restrict(&reduction.embed);
    let (g, h) = (action.actor().clone(), action.target().clone());

    let dis = pushforward_and_disintegrate(action, mu)?;
    cert.disintegration = dis.reconstruction.clone();
    cert.conditional_probability = dis.probability.clone();

    let delta_h = modular_function(&h, haar_h, mu);
    let delta_g = modular_function(&g, &haar_g, &dis.mu_g);
    let rho = rho_groupoid(action, &haar_g, mu)?;
    let sd = semidirect_groupoid(action);
    let haar_sd = semidirect_haar(action, &sd, haar_h, &haar_g)?;
    // units of H ⋊ G are identified with H⁰, in the same order
    let delta_sd = modular_function(&sd.groupoid, &haar_sd, mu);

    for (grp, delta) in [(&*h, &delta_h), (&*g, &delta_g), (&*rho.sd.groupoid, &rho.delta), (&*sd.groupoid, &delta_sd)] {
        let (n, v) = delta.violations(grp);
        cert.modular_multiplicative.checked += n;
        cert.modular_multiplicative.failed += v.len();
        cert.violations.extend(v);
    }
    radon_nikodym_check(&h, haar_h, mu, &delta_h, &mut cert.radon_nikodym);
    radon_nikodym_check(&g, &haar_g, &dis.mu_g, &delta_g, &mut cert.radon_nikodym);
    radon_nikodym_check(&rho.sd.groupoid, &rho.haar, mu, &rho.delta, &mut cert.radon_nikodym);
    radon_nikodym_check(&sd.groupoid, &haar_sd, mu, &delta_sd, &mut cert.radon_nikodym);

    // ∫∫ f(x⁻¹)Δ_G(x⁻¹) dλ^u(x) dμ_G(u) = ∫∫ f(x) dλ^u(x) dμ_G(u), f = 1_y
    for y in g.arrows() {
        let mut lhs = Rational::zero();
        let mut rhs = Rational::zero();
        for &u in g.units() {
            for x in g.arrows_with_range(u) {
                let w = dis.mu_g.at(&g, u) * haar_g.weight(x);
                if g.inv(x) == y {
                    lhs += &w * delta_g.at(g.inv(x));
                }
                if x == y {
                    rhs += &w;
                }
            }
        }
        if !cert.pushforward_quasi_invariance.record(lhs == rhs) {
            cert.violations.push(Violation::new("quasi-invariance of μ_G", vec![y], ""));
        }
    }

    let rg = &*rho.sd.groupoid;
    let rho_index = |v: Arrow, x: Arrow| {
        let pos = h.unit_index(v).expect("unit");
        rho.sd.index_of(pos, x).expect("(v, x) ∈ Gρ")
    };
    // ∫∫ φ(x⁻¹·v, x⁻¹) δ(x⁻¹·v, x⁻¹) dλ_G^{ρ(v)}(x) dμ(v) = ∫∫ φ(v,x) dλ_G^{ρ(v)}(x) dμ(v)
    for target in rg.arrows() {
        let mut lhs = Rational::zero();
        let mut rhs = Rational::zero();
        for &v in h.units() {
            for x in g.arrows_with_range(action.moment(v)) {
                let w = mu.at(&h, v) * haar_g.weight(x);
                let back = rho_index(action.apply(g.inv(x), v), g.inv(x));
                if back == target {
                    lhs += &w * rho.delta.at(back);
                }
                if rho_index(v, x) == target {
                    rhs += &w;
                }
            }
        }
        if !cert.rho_quasi_invariance.record(lhs == rhs) {
            cert.violations.push(Violation::new("quasi-invariance of μ on Gρ", vec![target], ""));
        }
    }
    for (a, &(vp, x)) in rho.sd.pairs.iter().enumerate() {
        let v = h.units()[vp];
        let xinv_v = action.apply(g.inv(x), v);
        let closed = (mu.at(&h, v) * haar_g.unit_weight_at_source(x))
            / (mu.at(&h, xinv_v) * haar_g.unit_weight_at_source(g.inv(x)));
        if !cert.delta_closed_form.record(&closed == rho.delta.at(a)) {
            cert.violations.push(Violation::new("δ differs from its closed form", vec![a], ""));
        }
    }

    for (a, &(k, x)) in sd.pairs.iter().enumerate() {
        let s = h.s(k);
        let rhs = delta_h.at(k) * rho.delta.at(rho_index(s, x));
        if !cert.delta_factorization.record(delta_sd.at(a) == &rhs) {
            cert.violations.push(Violation::new("Δ(h,x) ≠ Δ_H(h)δ(s(h),x)", vec![a], ""));
        }
    }
    for k in h.arrows() {
        let ok = delta_h.at(k) == delta_sd.at(sd.embed_h(action, k));
        if !cert.normalizations.record(ok) {
            cert.violations.push(Violation::new("Δ_H(h) ≠ Δ(h, ρ(h))", vec![k], ""));
        }
    }
    for (a, &(vp, x)) in rho.sd.pairs.iter().enumerate() {
        let v = h.units()[vp];
        let ok = rho.delta.at(a) == delta_sd.at(sd.index_of(v, x).expect("(v,x) ∈ H ⋊ G"));
        if !cert.normalizations.record(ok) {
            cert.violations.push(Violation::new("δ(v,x) ≠ Δ(v,x)", vec![a], ""));
        }
    }

    for x in g.arrows() {
        let (s, r) = (g.s(x), g.r(x));
        for &w in h.units() {
            let lhs = if action.moment(w) == s { dis.conditional_at(&g, &h, s, w).clone() } else { Rational::zero() };
            let mut rhs = Rational::zero();
            for v in action.fiber_units(r) {
                let xinv_v = action.apply(g.inv(x), v);
                if xinv_v == w {
                    rhs += rho.delta.at(rho_index(xinv_v, g.inv(x)))
                        * delta_g.at(x)
                        * dis.conditional_at(&g, &h, r, v);
                }
            }
            if !cert.key_identity.record(lhs == rhs) {
                cert.violations.push(Violation::new("disintegration is not equivariant", vec![x, w], ""));
            }
        }
    }

    for (gp, &u) in g.units().iter().enumerate() {
        let (sub, embed) = action.fiber(u);
        let mu_u = UnitMeasure::new(
            &sub,
            sub.units().iter().map(|&v| dis.conditional[gp][h.unit_index(embed[v]).expect("unit")].clone()).collect(),
        )?;
        let delta_u = modular_function(&sub, &haar_h.restrict(&embed), &mu_u);
        for k in sub.arrows() {
            if !cert.fiber_modular.record(delta_u.at(k) == delta_h.at(embed[k])) {
                cert.violations.push(Violation::new("modular function of μ^u differs from Δ_H", vec![u, embed[k]], ""));
            }
        }
    }
    cert.notes.push(
        "the factorization is certified in the form Δ(h,x) = Δ_H(h)·δ(s_H(h),x); \
         a variant with Δ_H evaluated at x is not well-typed"
            .into(),
    );
    let data = MeasureData {
        reduction: reduction.clone(),
        haar_g,
        disintegration: dis,
        delta_h,
        delta_g,
        rho,
        sd,
        haar_sd,
        delta_sd,
    };
    Ok((data, cert))
}
