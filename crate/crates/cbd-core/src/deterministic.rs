//! Deterministic 0/1 value assignments under per-context constraints.
//!
//! Kochen-Specker-style arguments ask whether the properties of an
//! incidence structure admit a noncontextual deterministic assignment:
//! one 0/1 value per property satisfying a logical constraint in every
//! context (for instance "exactly one of these four is 1"). This module
//! runs an exhaustive backtracking search over such [`ConstraintSystem`]s
//! and, for double-cover structures, the parity counting argument that
//! proves unsatisfiability without search.
//!
//! The `cbd-constraints/1` JSON format mirrors the probabilistic system
//! format: a property list plus constraints with a scope and a predicate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, PropertyId};

pub const CONSTRAINTS_FORMAT: &str = "cbd-constraints/1";

/// Exhaustive search bound; beyond this the search refuses to run.
pub const MAX_SEARCH_PROPERTIES: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("constraint scope contains unknown property {property:?}")]
    UnknownProperty { property: String },
    #[error("constraint scope is empty")]
    EmptyScope,
    #[error("duplicate property {property:?} in scope")]
    DuplicateInScope { property: String },
    #[error("duplicate property {property:?}")]
    DuplicateProperty { property: String },
    #[error("k = {k} exceeds scope size {scope}")]
    KTooLarge { k: usize, scope: usize },
    #[error("{count} properties exceed the search bound of {MAX_SEARCH_PROPERTIES}")]
    TooManyProperties { count: usize },
    #[error("unknown predicate {name:?}")]
    UnknownPredicate { name: String },
    #[error("predicate {name:?} requires field {field:?}")]
    MissingField { name: String, field: &'static str },
    #[error("document is not valid JSON: {0}")]
    Json(String),
    #[error("document format is {got:?}, expected {CONSTRAINTS_FORMAT:?}")]
    WrongFormat { got: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Logical predicate over a scope of 0/1-valued properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    /// Exactly `k` of the scope take value 1.
    ExactlyK(usize),
    /// At most `k` of the scope take value 1.
    AtMostK(usize),
    /// Every member of the scope takes the given value.
    AllEqual(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub scope: Vec<PropertyId>,
    pub predicate: Predicate,
}

/// A set of properties with per-context logical constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    properties: Vec<PropertyId>,
    constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn new(
        properties: Vec<PropertyId>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, ConstraintError> {
        let mut sorted = properties.clone();
        sorted.sort();
        if let Some(dup) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConstraintError::DuplicateProperty {
                property: dup[0].as_str().to_string(),
            });
        }
        for c in &constraints {
            if c.scope.is_empty() {
                return Err(ConstraintError::EmptyScope);
            }
            let mut scope = c.scope.clone();
            scope.sort();
            if let Some(dup) = scope.windows(2).find(|w| w[0] == w[1]) {
                return Err(ConstraintError::DuplicateInScope {
                    property: dup[0].as_str().to_string(),
                });
            }
            for q in &c.scope {
                if sorted.binary_search(q).is_err() {
                    return Err(ConstraintError::UnknownProperty {
                        property: q.as_str().to_string(),
                    });
                }
            }
            if let Predicate::ExactlyK(k) | Predicate::AtMostK(k) = c.predicate {
                if k > c.scope.len() {
                    return Err(ConstraintError::KTooLarge {
                        k,
                        scope: c.scope.len(),
                    });
                }
            }
        }
        Ok(ConstraintSystem {
            properties,
            constraints,
        })
    }

    pub fn properties(&self) -> &[PropertyId] {
        &self.properties
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Evaluates every predicate on a full assignment.
    pub fn satisfied_by(&self, assignment: &BTreeMap<PropertyId, bool>) -> bool {
        self.constraints.iter().all(|c| {
            let trues = c
                .scope
                .iter()
                .filter(|q| assignment.get(*q).copied().unwrap_or(false))
                .count();
            match c.predicate {
                Predicate::ExactlyK(k) => trues == k,
                Predicate::AtMostK(k) => trues <= k,
                Predicate::AllEqual(v) => {
                    c.scope.iter().all(|q| assignment.get(q).copied() == Some(v))
                }
            }
        })
    }

    /// Backtracking search for a satisfying 0/1 assignment. Returns a
    /// witness if one exists; with `count_all` it also counts every
    /// solution. Properties are branched most-constrained first.
    pub fn assignment_search(&self, count_all: bool) -> Result<SearchOutcome, ConstraintError> {
        if self.properties.len() > MAX_SEARCH_PROPERTIES {
            return Err(ConstraintError::TooManyProperties {
                count: self.properties.len(),
            });
        }
        let searcher = Searcher::new(self);
        Ok(searcher.run(count_all))
    }

    /// The counting argument for double-cover structures: when every
    /// property occurs in exactly two exactly-1-true contexts, the total
    /// number of 1-valued cells is twice the number of 1-valued
    /// properties — even — while the contexts demand exactly one each.
    /// An odd number of contexts is therefore a contradiction.
    pub fn parity_check(&self) -> ParityOutcome {
        if self.constraints.is_empty() {
            return ParityOutcome::Inapplicable {
                reason: "no constraints".to_string(),
            };
        }
        for c in &self.constraints {
            if c.predicate != Predicate::ExactlyK(1) {
                return ParityOutcome::Inapplicable {
                    reason: "a constraint is not exactly-1-true".to_string(),
                };
            }
        }
        for q in &self.properties {
            let occurrences = self
                .constraints
                .iter()
                .filter(|c| c.scope.contains(q))
                .count();
            if occurrences != 2 {
                return ParityOutcome::Inapplicable {
                    reason: format!(
                        "property {:?} occurs in {} contexts, need exactly 2",
                        q.as_str(),
                        occurrences
                    ),
                };
            }
        }
        let record = ParityRecord {
            num_contexts: self.constraints.len(),
            num_properties: self.properties.len(),
        };
        if record.num_contexts % 2 == 1 {
            ParityOutcome::Contradiction(record)
        } else {
            ParityOutcome::Inconclusive(record)
        }
    }

    /// Parses a `cbd-constraints/1` JSON document.
    pub fn from_json_str(text: &str) -> Result<Self, ConstraintError> {
        let doc: ConstraintsDoc =
            serde_json::from_str(text).map_err(|e| ConstraintError::Json(e.to_string()))?;
        doc.into_system()
    }

    pub fn to_json_string(&self) -> String {
        let doc = ConstraintsDoc::from_system(self);
        serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
    }
}

/// Result of [`ConstraintSystem::assignment_search`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    /// A satisfying assignment, if any exists.
    pub assignment: Option<BTreeMap<PropertyId, bool>>,
    /// Number of satisfying assignments, when counting was requested.
    pub count: Option<u64>,
}

/// Result of the exactly-one parity argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParityOutcome {
    /// Odd context count: no assignment can exist.
    Contradiction(ParityRecord),
    /// Structure fits but the context count is even; search may still
    /// decide either way.
    Inconclusive(ParityRecord),
    /// The structure does not meet the argument's preconditions.
    Inapplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityRecord {
    pub num_contexts: usize,
    pub num_properties: usize,
}

struct Searcher<'a> {
    system: &'a ConstraintSystem,
    /// Branch order: most-constrained property first, label as tiebreak.
    order: Vec<usize>,
    /// Constraint indices touching each property (by property index).
    touching: Vec<Vec<usize>>,
    scope_sizes: Vec<usize>,
}

struct SearchState {
    values: Vec<Option<bool>>,
    assigned: Vec<usize>,
    trues: Vec<usize>,
    witness: Option<Vec<bool>>,
    count: u64,
    count_all: bool,
}

impl<'a> Searcher<'a> {
    fn new(system: &'a ConstraintSystem) -> Self {
        let index_of: BTreeMap<&PropertyId, usize> = system
            .properties
            .iter()
            .enumerate()
            .map(|(i, q)| (q, i))
            .collect();
        let mut touching = vec![Vec::new(); system.properties.len()];
        for (ci, c) in system.constraints.iter().enumerate() {
            for q in &c.scope {
                touching[index_of[q]].push(ci);
            }
        }
        let mut order: Vec<usize> = (0..system.properties.len()).collect();
        order.sort_by(|&a, &b| {
            touching[b]
                .len()
                .cmp(&touching[a].len())
                .then_with(|| system.properties[a].cmp(&system.properties[b]))
        });
        let scope_sizes = system.constraints.iter().map(|c| c.scope.len()).collect();
        Searcher {
            system,
            order,
            touching,
            scope_sizes,
        }
    }

    fn run(&self, count_all: bool) -> SearchOutcome {
        let mut state = SearchState {
            values: vec![None; self.system.properties.len()],
            assigned: vec![0; self.system.constraints.len()],
            trues: vec![0; self.system.constraints.len()],
            witness: None,
            count: 0,
            count_all,
        };
        self.descend(0, &mut state);
        let assignment = state.witness.map(|w| {
            self.system
                .properties
                .iter()
                .cloned()
                .zip(w)
                .collect::<BTreeMap<_, _>>()
        });
        SearchOutcome {
            assignment,
            count: count_all.then_some(state.count),
        }
    }

    /// Whether constraint `ci` can still be satisfied (and is satisfied
    /// if fully assigned).
    fn viable(&self, ci: usize, state: &SearchState) -> bool {
        let c = &self.system.constraints[ci];
        let scope = self.scope_sizes[ci];
        let assigned = state.assigned[ci];
        let trues = state.trues[ci];
        let unassigned = scope - assigned;
        match c.predicate {
            Predicate::ExactlyK(k) => trues <= k && trues + unassigned >= k,
            Predicate::AtMostK(k) => trues <= k,
            Predicate::AllEqual(v) => {
                let falses = assigned - trues;
                if v {
                    falses == 0
                } else {
                    trues == 0
                }
            }
        }
    }

    fn descend(&self, depth: usize, state: &mut SearchState) -> bool {
        if depth == self.order.len() {
            state.count += 1;
            if state.witness.is_none() {
                state.witness = Some(
                    state
                        .values
                        .iter()
                        .map(|v| v.expect("full assignment"))
                        .collect(),
                );
            }
            return !state.count_all; // stop unless counting everything
        }
        let prop = self.order[depth];
        for value in [false, true] {
            state.values[prop] = Some(value);
            let mut ok = true;
            for &ci in &self.touching[prop] {
                state.assigned[ci] += 1;
                if value {
                    state.trues[ci] += 1;
                }
            }
            for &ci in &self.touching[prop] {
                if !self.viable(ci, state) {
                    ok = false;
                    break;
                }
            }
            if ok && self.descend(depth + 1, state) {
                return true;
            }
            for &ci in &self.touching[prop] {
                state.assigned[ci] -= 1;
                if value {
                    state.trues[ci] -= 1;
                }
            }
            state.values[prop] = None;
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ConstraintsDoc {
    #[serde(default = "default_format")]
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    properties: Vec<String>,
    constraints: Vec<ConstraintDoc>,
}

fn default_format() -> String {
    CONSTRAINTS_FORMAT.to_string()
}

#[derive(Serialize, Deserialize)]
struct ConstraintDoc {
    scope: Vec<String>,
    predicate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<u8>,
}

impl ConstraintsDoc {
    fn into_system(self) -> Result<ConstraintSystem, ConstraintError> {
        if self.format != CONSTRAINTS_FORMAT {
            return Err(ConstraintError::WrongFormat { got: self.format });
        }
        let properties = self
            .properties
            .into_iter()
            .map(PropertyId::new)
            .collect::<Result<Vec<_>, _>>()?;
        let constraints = self
            .constraints
            .into_iter()
            .map(|c| {
                let scope = c
                    .scope
                    .into_iter()
                    .map(PropertyId::new)
                    .collect::<Result<Vec<_>, ModelError>>()?;
                let predicate = match c.predicate.as_str() {
                    "exactly_k" => Predicate::ExactlyK(c.k.ok_or(
                        ConstraintError::MissingField {
                            name: "exactly_k".to_string(),
                            field: "k",
                        },
                    )?),
                    "at_most_k" => Predicate::AtMostK(c.k.ok_or(
                        ConstraintError::MissingField {
                            name: "at_most_k".to_string(),
                            field: "k",
                        },
                    )?),
                    "all_equal" => Predicate::AllEqual(
                        c.value.ok_or(ConstraintError::MissingField {
                            name: "all_equal".to_string(),
                            field: "value",
                        })? != 0,
                    ),
                    other => {
                        return Err(ConstraintError::UnknownPredicate {
                            name: other.to_string(),
                        })
                    }
                };
                Ok(Constraint { scope, predicate })
            })
            .collect::<Result<Vec<_>, ConstraintError>>()?;
        ConstraintSystem::new(properties, constraints)
    }

    fn from_system(system: &ConstraintSystem) -> Self {
        ConstraintsDoc {
            format: CONSTRAINTS_FORMAT.to_string(),
            name: None,
            properties: system
                .properties
                .iter()
                .map(|q| q.as_str().to_string())
                .collect(),
            constraints: system
                .constraints
                .iter()
                .map(|c| {
                    let (predicate, k, value) = match c.predicate {
                        Predicate::ExactlyK(k) => ("exactly_k", Some(k), None),
                        Predicate::AtMostK(k) => ("at_most_k", Some(k), None),
                        Predicate::AllEqual(v) => ("all_equal", None, Some(u8::from(v))),
                    };
                    ConstraintDoc {
                        scope: c.scope.iter().map(|q| q.as_str().to_string()).collect(),
                        predicate: predicate.to_string(),
                        k,
                        value,
                    }
                })
                .collect(),
        }
    }
}
