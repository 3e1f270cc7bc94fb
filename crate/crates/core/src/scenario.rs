//! Scenario files: the JSON input format, its parser and canonical dump, and
//! assembly of the validated objects a scenario describes.
//!
//! All scalars are exact and written as strings: rationals as `"p/q"`,
//! Gaussian rationals as `"a+bi"`. Arrays of arrows are indices into the
//! groupoid tables of the same file.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::actions::{GroupoidAction, RawGroupoidAction};
use crate::error::{Error, Result};
use crate::fell_bundle::{
    build_line_bundle, build_trivial_bundle, pullback_bundle, validate_fell_bundle, BundleAction, Cocycle, FellBundle,
    MultTensor, RawFiberMap, UnitRealization,
};
use crate::groupoid::{Arrow, FiniteGroupoid, HaarSystem, RawGroupoid};
use crate::linalg::{sparse_from_dense, Matrix};
use crate::measures::UnitMeasure;
use crate::scalar::{rational_str, GaussianRational as Gq, Rational};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario_v: u32,
    pub name: String,
    pub groupoid: GroupoidSection,
    pub groupoid_action: RawGroupoidAction,
    pub haar: HaarSection,
    pub bundle: BundleSpec,
    pub bundle_action: BundleActionSpec,
    pub measure: MeasureSection,
}

/// `g` acts on `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupoidSection {
    pub g: RawGroupoid,
    pub h: RawGroupoid,
}

/// Per-arrow Haar weights; `weight(h)` must depend only on `s(h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaarSection {
    /// On `H`.
    #[serde(with = "rationals")]
    pub weights: Vec<Rational>,
    /// On `G`.
    #[serde(with = "rationals")]
    pub actor_weights: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    /// `μ` on the units of `H`, by unit position.
    #[serde(with = "rationals")]
    pub mu: Vec<Rational>,
}

mod rationals {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Q(#[serde(with = "rational_str")] Rational);

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|q| Q(q.clone())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        Ok(Vec::<Q>::deserialize(d)?.into_iter().map(|q| q.0).collect())
    }
}

/// Products `e_i·e_j ∈ A(hk)` for one composable pair: `table[i][j]` is the
/// dense coordinate vector. Pairs that are not listed multiply to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitProduct {
    pub h: Arrow,
    pub k: Arrow,
    pub table: Vec<Vec<Vec<Gq>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRealization {
    /// Image of each basis vector, as matrix rows.
    pub images: Vec<Vec<Vec<Gq>>>,
    pub gram: Vec<Vec<Gq>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BundleSpec {
    /// Matrix-unit fibers `A(h) = Hom(ℂ^{d(s(h))}, ℂ^{d(r(h))})`, dims by unit position.
    Trivial { unit_dims: Vec<usize> },
    /// One-dimensional fibers twisted by a 2-cocycle, one entry `[h, k, σ(h,k)]`
    /// per composable pair.
    Line { cocycle: Vec<(Arrow, Arrow, Gq)> },
    /// Pullback of `bundle` over `base` along the homomorphism `map: H → base`.
    Pullback { base: RawGroupoid, map: Vec<Arrow>, bundle: Box<BundleSpec> },
    /// Structure constants in full; `invol[h]` is the matrix of `a ↦ a*` into
    /// `A(h⁻¹)`, realizations are by unit position.
    Explicit {
        dims: Vec<usize>,
        products: Vec<ExplicitProduct>,
        invol: Vec<Vec<Vec<Gq>>>,
        realizations: Vec<ExplicitRealization>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BundleActionSpec {
    /// `x·a = a` as coordinate vectors.
    Identity,
    Explicit { maps: Vec<RawFiberMap> },
}

fn positivity(field: &str, values: &[Rational]) -> Result<()> {
    match values.iter().position(|q| *q <= Rational::zero()) {
        Some(k) => Err(Error::Schema(format!("positivity violated at {field}[{k}]"))),
        None => Ok(()),
    }
}

fn length(field: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Schema(format!("{field} has {got} entries, expected {want}")))
    }
}

impl ScenarioFile {
    /// Parses and applies the schema rules that need no groupoid validation:
    /// version, strict positivity of weights and measure, table lengths.
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        if file.scenario_v != SCENARIO_VERSION {
            return Err(Error::Schema(format!("unsupported scenario_v {}", file.scenario_v)));
        }
        positivity("haar.weights", &file.haar.weights)?;
        positivity("haar.actor_weights", &file.haar.actor_weights)?;
        positivity("measure.mu", &file.measure.mu)?;
        length("haar.weights", file.haar.weights.len(), file.groupoid.h.labels.len())?;
        length("haar.actor_weights", file.haar.actor_weights.len(), file.groupoid.g.labels.len())?;
        length("measure.mu", file.measure.mu.len(), file.groupoid.h.units.len())?;
        Ok(file)
    }

    /// Canonical text form; `parse(dump(s))` dumps to the same bytes.
    pub fn dump(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

/// The validated objects of a scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub g: Arc<FiniteGroupoid>,
    pub h: Arc<FiniteGroupoid>,
    pub action: Arc<GroupoidAction>,
    pub haar_h: HaarSystem,
    pub haar_g: HaarSystem,
    pub bundle: Arc<FellBundle>,
    pub bundle_action: Arc<BundleAction>,
    pub mu: UnitMeasure,
}

/// Runs every validator in dependency order; the first failing one is
/// returned as an `Invalid` error with its witnesses.
pub fn build_scenario(file: ScenarioFile) -> Result<Scenario> {
    let g = Arc::new(FiniteGroupoid::validate(&file.groupoid.g)?);
    let h = Arc::new(FiniteGroupoid::validate(&file.groupoid.h)?);
    let haar_g = HaarSystem::canonical(&g, file.haar.actor_weights.clone())?;
    let haar_h = HaarSystem::canonical(&h, file.haar.weights.clone())?;
    let action = Arc::new(GroupoidAction::validate(g.clone(), h.clone(), &file.groupoid_action)?);
    let bundle = Arc::new(build_bundle(h.clone(), &file.bundle)?);
    let ba = match &file.bundle_action {
        BundleActionSpec::Identity => BundleAction::identity(action.clone(), bundle.clone()),
        BundleActionSpec::Explicit { maps } => BundleAction::from_raw(action.clone(), bundle.clone(), maps),
    };
    let bundle_action = Arc::new(ba.validate()?);
    let mu = UnitMeasure::new(&h, file.measure.mu.clone())?;
    Ok(Scenario { file, g, h, action, haar_h, haar_g, bundle, bundle_action, mu })
}

pub fn build_bundle(base: Arc<FiniteGroupoid>, spec: &BundleSpec) -> Result<FellBundle> {
    match spec {
        BundleSpec::Trivial { unit_dims } => build_trivial_bundle(base, unit_dims),
        BundleSpec::Line { cocycle } => {
            let sigma: Cocycle = cocycle.iter().map(|(h, k, c)| ((*h, *k), c.clone())).collect();
            build_line_bundle(base, &sigma)
        }
        BundleSpec::Pullback { base: inner_base, map, bundle } => {
            let inner_base = Arc::new(FiniteGroupoid::validate(inner_base)?);
            let inner = build_bundle(inner_base, bundle)?;
            pullback_bundle(base, map, &inner)
        }
        BundleSpec::Explicit { dims, products, invol, realizations } => {
            let g = &*base;
            length("bundle.dims", dims.len(), g.len())?;
            length("bundle.invol", invol.len(), g.len())?;
            length("bundle.realizations", realizations.len(), g.units().len())?;
            let listed: HashMap<(Arrow, Arrow), &ExplicitProduct> = products.iter().map(|p| ((p.h, p.k), p)).collect();
            for (n, p) in products.iter().enumerate() {
                if p.h >= g.len() || p.k >= g.len() || !g.composable(p.h, p.k) {
                    return Err(Error::Schema(format!("bundle.products[{n}] is not a composable pair")));
                }
                let out = dims[g.compose(p.h, p.k)];
                let shape_ok = p.table.len() == dims[p.h]
                    && p.table.iter().all(|row| row.len() == dims[p.k] && row.iter().all(|v| v.len() == out));
                if !shape_ok {
                    return Err(Error::Schema(format!("bundle.products[{n}] has the wrong shape")));
                }
            }
            for (h, m) in invol.iter().enumerate() {
                let d = dims[g.inv(h)];
                if m.len() != d || m.iter().any(|row| row.len() != dims[h]) {
                    return Err(Error::Schema(format!("bundle.invol[{h}] has the wrong shape")));
                }
            }
            let reals = realizations
                .iter()
                .map(|r| {
                    UnitRealization::new(
                        r.images.iter().map(|m| Matrix::from_rows(m.clone())).collect(),
                        Matrix::from_rows(r.gram.clone()),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let candidate = FellBundle::from_parts(
                base.clone(),
                dims.clone(),
                |h, k| {
                    let out = dims[g.compose(h, k)];
                    MultTensor::from_fn(dims[h], dims[k], out, |i, j| match listed.get(&(h, k)) {
                        Some(p) => sparse_from_dense(&p.table[i][j]),
                        None => Vec::new(),
                    })
                },
                invol.iter().map(|m| Matrix::from_rows(m.clone())).collect(),
                reals,
            );
            validate_fell_bundle(candidate)
        }
    }
}

/// Writes any bundle in the explicit form.
pub fn explicit_spec(bundle: &FellBundle) -> BundleSpec {
    let g = &**bundle.base();
    let dims = bundle.dims().to_vec();
    let products = g
        .composable_pairs()
        .filter_map(|(h, k)| {
            let t = bundle.mult(h, k);
            let (l, r, out) = t.dims();
            let table: Vec<Vec<Vec<Gq>>> = (0..l)
                .map(|i| {
                    (0..r)
                        .map(|j| crate::linalg::sparse_to_dense(t.basis_product(i, j), out))
                        .collect()
                })
                .collect();
            let nonzero = table.iter().flatten().flatten().any(|c| !c.is_zero());
            nonzero.then_some(ExplicitProduct { h, k, table })
        })
        .collect();
    let invol = g.arrows().map(|h| bundle.invol(h).to_rows()).collect();
    let realizations = g
        .units()
        .iter()
        .map(|&u| {
            let r = bundle.realization(u);
            ExplicitRealization { images: r.images().iter().map(Matrix::to_rows).collect(), gram: r.gram().to_rows() }
        })
        .collect();
    BundleSpec::Explicit { dims, products, invol, realizations }
}

/// The canonical example: `Z/2` swapping the two points of `P2`, trivial line
/// bundle, counting Haar systems, `μ = (1, 2)`.
pub fn p2_swap_scenario() -> ScenarioFile {
    let action = crate::actions::p2_swap();
    let one = || Rational::from_integer(1.into());
    ScenarioFile {
        scenario_v: SCENARIO_VERSION,
        name: "p2_swap".into(),
        groupoid: GroupoidSection { g: action.actor().to_raw(), h: action.target().to_raw() },
        groupoid_action: action.to_raw(),
        haar: HaarSection { weights: vec![one(); 4], actor_weights: vec![one(); 2] },
        bundle: BundleSpec::Trivial { unit_dims: vec![1, 1] },
        bundle_action: BundleActionSpec::Identity,
        measure: MeasureSection { mu: vec![one(), Rational::from_integer(2.into())] },
    }
}
