//! Built-in example systems.
//!
//! Constructors for the measurement systems discussed throughout the
//! literature this crate implements: the rank-5 KCBS system, the rank-4
//! EPR-BB system, the rank-3 SZLG system and its magic-boxes special
//! case, and the two Kochen-Specker incidence structures (18 properties
//! in 9 four-element contexts for the 4D argument; 15 properties in 10
//! contexts with an orthogonal boxed triple for the 3D argument).
//!
//! Probabilistic entries are parameterized by per-cell marginals and
//! per-context product expectations; context tables are reconstructed by
//! the standard 2x2 inversion
//! `Pr[a,b] = (1 + a<A> + b<B> + ab<AB>) / 4`, and parameters whose
//! reconstruction leaves any cell outside `[0, 1]` are rejected as
//! unrealizable.

use std::collections::BTreeMap;

use num_traits::One;
use thiserror::Error;

use crate::deterministic::{Constraint, ConstraintSystem, Predicate};
use crate::model::{ContextDistribution, ContextId, ModelError, Outcome, PropertyId, System};
use crate::rational::{format_rat, rat, Probability, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GalleryError {
    #[error("unknown gallery key {key:?}")]
    UnknownKey { key: String },
    #[error("{key}: expected {expected} {what}, got {got}")]
    WrongParamCount {
        key: &'static str,
        what: &'static str,
        expected: String,
        got: usize,
    },
    #[error("{key} takes no parameters")]
    NoParams { key: &'static str },
    #[error(
        "context {}: marginals ({}, {}) with product expectation {} \
         are not realizable (cell {} = {})",
        .0.context, .0.a, .0.b, .0.rho, .0.cell, .0.value
    )]
    NotRealizable(Box<NotRealizableDetail>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotRealizableDetail {
    pub context: String,
    pub a: String,
    pub b: String,
    pub rho: String,
    pub cell: String,
    pub value: String,
}

/// Either kind of gallery output.
#[derive(Debug, Clone)]
pub enum GalleryOutput {
    Probabilistic(System),
    Constraints(ConstraintSystem),
}

/// Parameters for the probabilistic entries. `marginals` accepts one
/// value (every cell), `n` values (one per property of a rank-n system;
/// for magic-boxes, one per context — see [`build`]), or `2n` values (one
/// per cell in cycle order). `correlations` accepts one value or one per
/// context.
#[derive(Debug, Clone, Default)]
pub struct GalleryParams {
    pub marginals: Option<Vec<Rat>>,
    pub correlations: Option<Vec<Rat>>,
}

/// One row of `examples list`.
#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub key: &'static str,
    pub kind: &'static str,
    pub description: &'static str,
}

pub fn entries() -> Vec<GalleryEntry> {
    vec![
        GalleryEntry {
            key: "kcbs",
            kind: "probabilistic",
            description: "rank-5 cyclic system; defaults: marginals 1/2, correlations -4/5",
        },
        GalleryEntry {
            key: "epr-bb",
            kind: "probabilistic",
            description:
                "rank-4 cyclic system; defaults: marginals 1/2, correlations (7/10, 7/10, 7/10, -7/10)",
        },
        GalleryEntry {
            key: "szlg",
            kind: "probabilistic",
            description: "rank-3 cyclic system; defaults: marginals 1/2, correlations -1/2",
        },
        GalleryEntry {
            key: "magic-boxes",
            kind: "probabilistic",
            description:
                "rank-3 system with perfect anticorrelations in every context; \
                 marginals parameterize Pr[first property = +1] per context (default 1/2)",
        },
        GalleryEntry {
            key: "ks-4d",
            kind: "constraint",
            description: "18 properties, 9 four-element contexts, exactly one value 1 per context",
        },
        GalleryEntry {
            key: "ks-3d",
            kind: "constraint",
            description:
                "15 properties forced to 0 by their contexts, against an orthogonal boxed triple",
        },
    ]
}

/// Builds a gallery system by key.
pub fn build(key: &str, params: &GalleryParams) -> Result<GalleryOutput, GalleryError> {
    match key {
        "kcbs" => cyclic_entry(
            "kcbs",
            &["q1", "q2", "q3", "q4", "q5"],
            &["c1", "c2", "c3", "c4", "c5"],
            vec![rat(-4, 5); 5],
            params,
            false,
        )
        .map(GalleryOutput::Probabilistic),
        "epr-bb" => cyclic_entry(
            "epr-bb",
            &["q1", "q2", "q3", "q4"],
            &["c1", "c2", "c3", "c4"],
            vec![rat(7, 10), rat(7, 10), rat(7, 10), rat(-7, 10)],
            params,
            false,
        )
        .map(GalleryOutput::Probabilistic),
        "szlg" => cyclic_entry(
            "szlg",
            &["q1", "q2", "q3"],
            &["c1", "c2", "c3"],
            vec![rat(-1, 2); 3],
            params,
            false,
        )
        .map(GalleryOutput::Probabilistic),
        "magic-boxes" => cyclic_entry(
            "magic-boxes",
            &["a", "b", "c"],
            &["ab", "bc", "ca"],
            vec![rat(-1, 1); 3],
            params,
            true,
        )
        .map(GalleryOutput::Probabilistic),
        "ks-4d" => {
            require_no_params("ks-4d", params)?;
            Ok(GalleryOutput::Constraints(ks4d_constraint_system()))
        }
        "ks-3d" => {
            require_no_params("ks-3d", params)?;
            Ok(GalleryOutput::Constraints(ks3d_constraint_system()))
        }
        other => Err(GalleryError::UnknownKey {
            key: other.to_string(),
        }),
    }
}

fn require_no_params(key: &'static str, params: &GalleryParams) -> Result<(), GalleryError> {
    if params.marginals.is_some() || params.correlations.is_some() {
        return Err(GalleryError::NoParams { key });
    }
    Ok(())
}

/// Builds a rank-n cyclic system: context `i` measures the cycle pair
/// `(q_i, q_(i+1))`. With `anticorrelated`, correlations are fixed at the
/// defaults (all -1) and a length-n marginal list gives the first
/// property's marginal in each context, the second being forced to its
/// complement; otherwise a length-n marginal list is per property.
fn cyclic_entry(
    key: &'static str,
    props: &[&str],
    ctxs: &[&str],
    default_correlations: Vec<Rat>,
    params: &GalleryParams,
    anticorrelated: bool,
) -> Result<System, GalleryError> {
    let n = props.len();
    let correlations: Vec<Rat> = match &params.correlations {
        None => default_correlations,
        Some(v) if v.len() == 1 => vec![v[0].clone(); n],
        Some(v) if v.len() == n => v.clone(),
        Some(v) => {
            return Err(GalleryError::WrongParamCount {
                key,
                what: "correlations",
                expected: format!("1 or {n}"),
                got: v.len(),
            })
        }
    };
    // marginal of each cell, in cycle order: cell (i, 0) is q_i in context
    // i, cell (i, 1) is q_(i+1) there
    let cell_marginal: Vec<(Rat, Rat)> = match &params.marginals {
        None => vec![(rat(1, 2), rat(1, 2)); n],
        Some(v) if v.len() == 1 => vec![(v[0].clone(), v[0].clone()); n],
        Some(v) if v.len() == n && anticorrelated => v
            .iter()
            .map(|m| (m.clone(), Rat::one() - m))
            .collect(),
        Some(v) if v.len() == n => (0..n)
            .map(|i| (v[i].clone(), v[(i + 1) % n].clone()))
            .collect(),
        Some(v) if v.len() == 2 * n => (0..n)
            .map(|i| (v[2 * i].clone(), v[2 * i + 1].clone()))
            .collect(),
        Some(v) => {
            return Err(GalleryError::WrongParamCount {
                key,
                what: "marginals",
                expected: format!("1, {n} or {}", 2 * n),
                got: v.len(),
            })
        }
    };

    let mut contexts = Vec::with_capacity(n);
    for i in 0..n {
        let first = PropertyId::new(props[i]).expect("static label");
        let second = PropertyId::new(props[(i + 1) % n]).expect("static label");
        let ctx = ContextId::new(ctxs[i]).expect("static label");
        let (m_first, m_second) = &cell_marginal[i];
        contexts.push(pair_context(
            ctx,
            first,
            second,
            m_first,
            m_second,
            &correlations[i],
        )?);
    }
    Ok(System::new(key, contexts)?)
}

/// Reconstructs a two-measurement context table from the marginals
/// `Pr[=+1]` and the product expectation.
fn pair_context(
    context: ContextId,
    first: PropertyId,
    second: PropertyId,
    m_first: &Rat,
    m_second: &Rat,
    rho: &Rat,
) -> Result<ContextDistribution, GalleryError> {
    let ea = m_first * rat(2, 1) - Rat::one();
    let eb = m_second * rat(2, 1) - Rat::one();
    let quarter = rat(1, 4);
    let mut cells = Vec::new();
    for (oa, ob) in [
        (Outcome::Plus, Outcome::Plus),
        (Outcome::Plus, Outcome::Minus),
        (Outcome::Minus, Outcome::Plus),
        (Outcome::Minus, Outcome::Minus),
    ] {
        let sa = rat(oa.value().into(), 1);
        let sb = rat(ob.value().into(), 1);
        let value = &quarter * (Rat::one() + &sa * &ea + &sb * &eb + &sa * &sb * rho);
        let p = Probability::new(value.clone()).map_err(|_| {
            GalleryError::NotRealizable(Box::new(NotRealizableDetail {
                context: context.as_str().to_string(),
                a: format_rat(m_first),
                b: format_rat(m_second),
                rho: format_rat(rho),
                cell: format!("({oa}, {ob})"),
                value: format_rat(&value),
            }))
        })?;
        cells.push(((oa, ob), p));
    }
    // tables are keyed against label-sorted property order
    let swap = second < first;
    let table: BTreeMap<Vec<Outcome>, Probability> = cells
        .into_iter()
        .map(|((oa, ob), p)| {
            let tuple = if swap { vec![ob, oa] } else { vec![oa, ob] };
            (tuple, p)
        })
        .collect();
    let properties = vec![first, second];
    Ok(ContextDistribution::new(context, properties, table)?)
}

// ---------------------------------------------------------------------------
// Kochen-Specker incidence structures
// ---------------------------------------------------------------------------

/// The 4D structure: 9 contexts of 4 properties, each property in exactly
/// two contexts. Property labels carry the defining vector coordinates,
/// with `m` for a negated coordinate.
pub const KS4D_CONTEXTS: [(&str, [&str; 4]); 9] = [
    ("c1", ["q0001", "q0010", "q1100", "q1m100"]),
    ("c2", ["q0001", "q0100", "q1010", "q10m10"]),
    ("c3", ["q1100", "q1m11m1", "q1m1m11", "q0011"]),
    ("c4", ["q10m10", "q1m11m1", "q1111", "q010m1"]),
    ("c5", ["q0010", "q0100", "q1001", "q100m1"]),
    ("c6", ["q1m1m11", "q1111", "q100m1", "q01m10"]),
    ("c7", ["q1m100", "q0011", "q11m11", "q111m1"]),
    ("c8", ["q1010", "q010m1", "q11m11", "qm1111"]),
    ("c9", ["q1001", "q01m10", "q111m1", "qm1111"]),
];

/// The 3D structure: context `c_ijk` lists the observables measured
/// alongside the conditioning observable `q_ijk`; all of them are forced
/// to 0. The boxed triple is mutually orthogonal, so exactly one of its
/// members must be 1. Labels use `m` for a negated coordinate; `2` stands
/// for the square root of two.
pub const KS3D_CONTEXTS: [(&str, &[&str]); 10] = [
    ("c001", &["q100", "q010", "q110", "q1m10"]),
    ("c101", &["q010", "qm101"]),
    ("c011", &["q100", "q0m11"]),
    ("c1m12", &["q110", "qm112", "qm201", "q021"]),
    ("c102", &["q010", "qm201", "qm211"]),
    ("c211", &["q0m11", "qm211", "qm102"]),
    ("c201", &["q010", "qm102", "qm1m12"]),
    ("c112", &["q1m10", "qm1m12", "q0m21"]),
    ("c012", &["q100", "q0m21", "q1m21"]),
    ("c121", &["qm101", "q1m21", "q0m12"]),
];

/// The boxed orthogonal triple of the 3D structure.
pub const KS3D_BOXED: [&str; 3] = ["q100", "q021", "q0m12"];

fn property_list<'a>(contexts: impl Iterator<Item = &'a str>) -> Vec<PropertyId> {
    let mut labels: Vec<&str> = contexts.collect();
    labels.sort_unstable();
    labels.dedup();
    labels
        .into_iter()
        .map(|l| PropertyId::new(l).expect("static label"))
        .collect()
}

/// The 4D structure as a constraint system: exactly one value 1 in each
/// context.
pub fn ks4d_constraint_system() -> ConstraintSystem {
    let properties = property_list(KS4D_CONTEXTS.iter().flat_map(|(_, qs)| qs.iter().copied()));
    let constraints = KS4D_CONTEXTS
        .iter()
        .map(|(_, qs)| Constraint {
            scope: qs
                .iter()
                .map(|q| PropertyId::new(*q).expect("static label"))
                .collect(),
            predicate: Predicate::ExactlyK(1),
        })
        .collect();
    ConstraintSystem::new(properties, constraints).expect("static structure is valid")
}

/// The 3D structure as a constraint system: every context forces its
/// members to 0, while the boxed triple requires exactly one value 1.
pub fn ks3d_constraint_system() -> ConstraintSystem {
    let properties = property_list(KS3D_CONTEXTS.iter().flat_map(|(_, qs)| qs.iter().copied()));
    let mut constraints: Vec<Constraint> = KS3D_CONTEXTS
        .iter()
        .map(|(_, qs)| Constraint {
            scope: qs
                .iter()
                .map(|q| PropertyId::new(*q).expect("static label"))
                .collect(),
            predicate: Predicate::AllEqual(false),
        })
        .collect();
    constraints.push(Constraint {
        scope: KS3D_BOXED
            .iter()
            .map(|q| PropertyId::new(*q).expect("static label"))
            .collect(),
        predicate: Predicate::ExactlyK(1),
    });
    ConstraintSystem::new(properties, constraints).expect("static structure is valid")
}

/// A probabilistic system with the 4D incidence: every context table is
/// uniform over the four outcomes with exactly one `+1`. Useful as a
/// non-cyclic, consistently connected test structure (36 cells).
pub fn ks4d_probabilistic_system() -> System {
    let contexts = KS4D_CONTEXTS
        .iter()
        .map(|(ctx, qs)| {
            let mut properties: Vec<PropertyId> = qs
                .iter()
                .map(|q| PropertyId::new(*q).expect("static label"))
                .collect();
            properties.sort();
            let mut table = BTreeMap::new();
            for one in 0..4 {
                let tuple: Vec<Outcome> = (0..4)
                    .map(|j| if j == one { Outcome::Plus } else { Outcome::Minus })
                    .collect();
                table.insert(tuple, Probability::new(rat(1, 4)).expect("1/4"));
            }
            ContextDistribution::new(ContextId::new(*ctx).expect("static label"), properties, table)
                .expect("static structure is valid")
        })
        .collect();
    System::new("ks-4d-uniform", contexts).expect("static structure is valid")
}
