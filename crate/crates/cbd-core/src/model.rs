//! Systems of binary measurements.
//!
//! A [`System`] is a named set of contexts. Each [`ContextDistribution`]
//! holds the empirical joint distribution of the binary measurements made
//! together in one context, as an exact table over `{+1, -1}^m` in the
//! canonical (label-sorted) property order. Measurements of one property
//! across the contexts where it appears form a [`Connection`]; connections
//! carry no empirical joint, only the family of single-measurement
//! marginals, ordered ascending by `Pr[= +1]`.
//!
//! The wire format is `cbd-system/1`, a JSON document with tuple-string
//! table keys and exact rational probability literals; see
//! [`System::from_json_str`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_rat, Probability, Rat, RationalError};

pub const SYSTEM_FORMAT: &str = "cbd-system/1";

/// The measured property (content): a row of the measurement matrix.
/// Labels are case-sensitive and compared bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropertyId(String);

/// The context in which a measurement is made: a column of the matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextId(String);

macro_rules! impl_label_id {
    ($ty:ident, $what:literal) => {
        impl $ty {
            pub fn new(label: impl Into<String>) -> Result<Self, ModelError> {
                let label = label.into();
                if label.is_empty() {
                    return Err(ModelError::EmptyLabel { what: $what });
                }
                Ok($ty(label))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

impl_label_id!(PropertyId, "property");
impl_label_id!(ContextId, "context");

/// One of the two outcomes of a binary measurement. The ordering
/// `Plus < Minus` matches the lexicographic order of the tuple strings
/// `"+1" < "-1"` used by the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Plus => "+1",
            Outcome::Minus => "-1",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s {
            "+1" => Ok(Outcome::Plus),
            "-1" => Ok(Outcome::Minus),
            other => Err(ModelError::BadOutcome {
                token: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Renders an outcome tuple as the wire key, e.g. `"+1,-1"`.
pub fn tuple_key(tuple: &[Outcome]) -> String {
    let parts: Vec<&str> = tuple.iter().map(|o| o.as_str()).collect();
    parts.join(",")
}

/// Parses a wire key back into an outcome tuple.
pub fn parse_tuple_key(key: &str) -> Result<Vec<Outcome>, ModelError> {
    key.split(',').map(|t| Outcome::parse(t.trim())).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("empty {what} label")]
    EmptyLabel { what: &'static str },
    #[error("outcome token {token:?} is not \"+1\" or \"-1\"")]
    BadOutcome { token: String },
    #[error("context {context:?}: {source}")]
    BadProbability {
        context: String,
        source: RationalError,
    },
    #[error("context {context:?}: table not normalized (sum = {sum})")]
    TableNotNormalized { context: String, sum: String },
    #[error("context {context:?}: tuple {tuple:?} has arity {got}, expected {expected}")]
    WrongArity {
        context: String,
        tuple: String,
        got: usize,
        expected: usize,
    },
    #[error("context {context:?}: duplicate property {property:?}")]
    DuplicateProperty { context: String, property: String },
    #[error("duplicate context {context:?}")]
    DuplicateContext { context: String },
    #[error("context {context:?} measures no properties")]
    EmptyContext { context: String },
    #[error("system has no contexts")]
    NoContexts,
    #[error("property {property:?} is not measured in context {context:?}")]
    PropertyNotInContext { context: String, property: String },
    #[error("context {context:?} not found")]
    UnknownContext { context: String },
    #[error("empty property subset")]
    EmptySubset,
    #[error("deleting cell ({property:?}, {context:?}) leaves an empty system")]
    DeletionEmptiesSystem { context: String, property: String },
    #[error("document is not valid JSON: {0}")]
    Json(String),
    #[error("document format is {got:?}, expected {SYSTEM_FORMAT:?}")]
    WrongFormat { got: String },
}

/// The empirical joint distribution of the measurements in one context.
///
/// Properties are stored sorted by label and outcome tuples are indexed
/// against that order. Zero-probability tuples are not stored, so equal
/// distributions are equal as values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextDistribution {
    context: ContextId,
    properties: Vec<PropertyId>,
    table: BTreeMap<Vec<Outcome>, Probability>,
}

impl ContextDistribution {
    /// Validates and canonicalizes a context table. `properties` may be
    /// given in any order; `table` keys must already be indexed against
    /// the label-sorted order.
    pub fn new(
        context: ContextId,
        mut properties: Vec<PropertyId>,
        table: BTreeMap<Vec<Outcome>, Probability>,
    ) -> Result<Self, ModelError> {
        if properties.is_empty() {
            return Err(ModelError::EmptyContext {
                context: context.as_str().to_string(),
            });
        }
        properties.sort();
        for pair in properties.windows(2) {
            if pair[0] == pair[1] {
                return Err(ModelError::DuplicateProperty {
                    context: context.as_str().to_string(),
                    property: pair[0].as_str().to_string(),
                });
            }
        }
        let arity = properties.len();
        let mut sum = Rat::zero();
        let mut canonical = BTreeMap::new();
        for (tuple, p) in table {
            if tuple.len() != arity {
                return Err(ModelError::WrongArity {
                    context: context.as_str().to_string(),
                    tuple: tuple_key(&tuple),
                    got: tuple.len(),
                    expected: arity,
                });
            }
            sum += p.as_rat();
            if !p.is_zero() {
                canonical.insert(tuple, p);
            }
        }
        if !sum.is_one() {
            return Err(ModelError::TableNotNormalized {
                context: context.as_str().to_string(),
                sum: format_rat(&sum),
            });
        }
        Ok(ContextDistribution {
            context,
            properties,
            table: canonical,
        })
    }

    pub fn context(&self) -> &ContextId {
        &self.context
    }

    /// Properties measured in this context, in canonical label order.
    pub fn properties(&self) -> &[PropertyId] {
        &self.properties
    }

    pub fn arity(&self) -> usize {
        self.properties.len()
    }

    /// Nonzero table entries, keyed by outcome tuples in canonical order.
    pub fn table(&self) -> &BTreeMap<Vec<Outcome>, Probability> {
        &self.table
    }

    pub fn prob(&self, tuple: &[Outcome]) -> Rat {
        self.table
            .get(tuple)
            .map(|p| p.as_rat().clone())
            .unwrap_or_else(Rat::zero)
    }

    pub fn measures(&self, property: &PropertyId) -> bool {
        self.properties.binary_search(property).is_ok()
    }

    fn positions(&self, subset: &[PropertyId]) -> Result<Vec<usize>, ModelError> {
        subset
            .iter()
            .map(|q| {
                self.properties.binary_search(q).map_err(|_| {
                    ModelError::PropertyNotInContext {
                        context: self.context.as_str().to_string(),
                        property: q.as_str().to_string(),
                    }
                })
            })
            .collect()
    }

    /// Marginal distribution over a nonempty subset of this context's
    /// properties: each sub-tuple's probability is the exact sum over the
    /// consistent full tuples.
    pub fn marginal(&self, subset: &[PropertyId]) -> Result<ContextDistribution, ModelError> {
        if subset.is_empty() {
            return Err(ModelError::EmptySubset);
        }
        let mut subset = subset.to_vec();
        subset.sort();
        subset.dedup();
        let positions = self.positions(&subset)?;
        let mut table: BTreeMap<Vec<Outcome>, Rat> = BTreeMap::new();
        for (tuple, p) in &self.table {
            let sub: Vec<Outcome> = positions.iter().map(|&i| tuple[i]).collect();
            *table.entry(sub).or_insert_with(Rat::zero) += p.as_rat();
        }
        let table = table
            .into_iter()
            .map(|(t, r)| (t, Probability::new(r).expect("marginal mass in [0,1]")))
            .collect();
        ContextDistribution::new(self.context.clone(), subset, table)
    }

    /// `Pr[measurement of q = +1]` in this context.
    pub fn prob_plus(&self, property: &PropertyId) -> Result<Probability, ModelError> {
        let pos = self.positions(std::slice::from_ref(property))?[0];
        let mut sum = Rat::zero();
        for (tuple, p) in &self.table {
            if tuple[pos] == Outcome::Plus {
                sum += p.as_rat();
            }
        }
        Ok(Probability::new(sum).expect("marginal mass in [0,1]"))
    }

    /// Exact product expectation over a nonempty subset of properties:
    /// `<R>` for one property, `<R R'>` for two, and the obvious extension
    /// for larger subsets.
    pub fn expectation(&self, props: &[PropertyId]) -> Result<Rat, ModelError> {
        if props.is_empty() {
            return Err(ModelError::EmptySubset);
        }
        let positions = self.positions(props)?;
        let mut sum = Rat::zero();
        for (tuple, p) in &self.table {
            let sign: i8 = positions.iter().map(|&i| tuple[i].value()).product();
            if sign >= 0 {
                sum += p.as_rat();
            } else {
                sum -= p.as_rat();
            }
        }
        Ok(sum)
    }

    /// Relabels `+1 <-> -1` for one property of this context.
    pub fn flip_property(&self, property: &PropertyId) -> Result<ContextDistribution, ModelError> {
        let pos = self.positions(std::slice::from_ref(property))?[0];
        let table = self
            .table
            .iter()
            .map(|(tuple, p)| {
                let mut t = tuple.clone();
                t[pos] = t[pos].flipped();
                (t, p.clone())
            })
            .collect();
        ContextDistribution::new(self.context.clone(), self.properties.clone(), table)
    }
}

/// A full system of measurements: the (property, context) matrix together
/// with the within-context joints. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    name: String,
    contexts: Vec<ContextDistribution>,
}

impl System {
    pub fn new(
        name: impl Into<String>,
        contexts: Vec<ContextDistribution>,
    ) -> Result<Self, ModelError> {
        if contexts.is_empty() {
            return Err(ModelError::NoContexts);
        }
        let mut seen = BTreeSet::new();
        for c in &contexts {
            if !seen.insert(c.context().clone()) {
                return Err(ModelError::DuplicateContext {
                    context: c.context().as_str().to_string(),
                });
            }
        }
        Ok(System {
            name: name.into(),
            contexts,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contexts(&self) -> &[ContextDistribution] {
        &self.contexts
    }

    pub fn context(&self, id: &ContextId) -> Result<&ContextDistribution, ModelError> {
        self.contexts
            .iter()
            .find(|c| c.context() == id)
            .ok_or_else(|| ModelError::UnknownContext {
                context: id.as_str().to_string(),
            })
    }

    /// All distinct properties, sorted by label.
    pub fn properties(&self) -> Vec<PropertyId> {
        let set: BTreeSet<PropertyId> = self
            .contexts
            .iter()
            .flat_map(|c| c.properties().iter().cloned())
            .collect();
        set.into_iter().collect()
    }

    /// All measurement cells `(property, context)` sorted by
    /// (property label, context label).
    pub fn cells(&self) -> Vec<(PropertyId, ContextId)> {
        let mut cells: Vec<(PropertyId, ContextId)> = self
            .contexts
            .iter()
            .flat_map(|c| {
                c.properties()
                    .iter()
                    .map(|q| (q.clone(), c.context().clone()))
            })
            .collect();
        cells.sort();
        cells
    }

    pub fn cell_count(&self) -> usize {
        self.contexts.iter().map(|c| c.arity()).sum()
    }

    /// One connection per property: the family of `Pr[= +1]` marginals of
    /// that property across its contexts, sorted ascending by the marginal
    /// with ties broken by context label.
    pub fn connections(&self) -> Vec<Connection> {
        self.properties()
            .into_iter()
            .map(|q| {
                let mut entries: Vec<ConnectionEntry> = self
                    .contexts
                    .iter()
                    .filter(|c| c.measures(&q))
                    .map(|c| ConnectionEntry {
                        context: c.context().clone(),
                        p: c.prob_plus(&q).expect("property is measured here"),
                    })
                    .collect();
                entries.sort_by(|a, b| a.p.cmp(&b.p).then_with(|| a.context.cmp(&b.context)));
                Connection {
                    property: q,
                    entries,
                }
            })
            .collect()
    }

    /// Per-connection maximal marginal discrepancies and the overall
    /// consistent-connectedness flag.
    pub fn connectedness_report(&self) -> ConnectednessReport {
        let per_connection: Vec<(Connection, Rat)> = self
            .connections()
            .into_iter()
            .map(|c| {
                let delta = c.delta();
                (c, delta)
            })
            .collect();
        let consistent = per_connection.iter().all(|(_, d)| d.is_zero());
        ConnectednessReport {
            per_connection,
            consistent,
        }
    }

    pub fn is_consistently_connected(&self) -> bool {
        self.connections().iter().all(|c| c.delta().is_zero())
    }

    /// Removes one measurement cell, marginalizing the affected context
    /// table. A context losing its last property is dropped. Errors if the
    /// cell does not exist; errors if the deletion would leave no contexts.
    pub fn delete_cell(
        &self,
        property: &PropertyId,
        context: &ContextId,
    ) -> Result<System, ModelError> {
        let target = self.context(context)?;
        if !target.measures(property) {
            return Err(ModelError::PropertyNotInContext {
                context: context.as_str().to_string(),
                property: property.as_str().to_string(),
            });
        }
        let mut contexts = Vec::new();
        for c in &self.contexts {
            if c.context() != context {
                contexts.push(c.clone());
                continue;
            }
            let remaining: Vec<PropertyId> = c
                .properties()
                .iter()
                .filter(|q| *q != property)
                .cloned()
                .collect();
            if remaining.is_empty() {
                continue; // context dropped entirely
            }
            contexts.push(c.marginal(&remaining)?);
        }
        if contexts.is_empty() {
            return Err(ModelError::DeletionEmptiesSystem {
                context: context.as_str().to_string(),
                property: property.as_str().to_string(),
            });
        }
        System::new(self.name.clone(), contexts)
    }

    /// Relabels `+1 <-> -1` for one property in every context measuring it.
    pub fn flip_property_outcomes(&self, property: &PropertyId) -> Result<System, ModelError> {
        let contexts = self
            .contexts
            .iter()
            .map(|c| {
                if c.measures(property) {
                    c.flip_property(property)
                } else {
                    Ok(c.clone())
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        System::new(self.name.clone(), contexts)
    }

    /// Parses a `cbd-system/1` JSON document.
    pub fn from_json_str(text: &str) -> Result<System, ModelError> {
        let doc: SystemDoc =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        doc.into_system()
    }

    /// Serializes to the `cbd-system/1` JSON document (pretty-printed,
    /// deterministic key order). Parsing the output reproduces `self`
    /// bit-exactly.
    pub fn to_json_string(&self) -> String {
        let doc = SystemDoc::from_system(self);
        serde_json::to_string_pretty(&doc).expect("report serialization cannot fail")
    }
}

/// One entry of a connection: the context and `Pr[= +1]` there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionEntry {
    pub context: ContextId,
    pub p: Probability,
}

/// All measurements of one property across contexts, ordered ascending by
/// `Pr[= +1]`. Not jointly distributed; couplings are imposed on it by the
/// `coupling` module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub property: PropertyId,
    pub entries: Vec<ConnectionEntry>,
}

impl Connection {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn p_values(&self) -> Vec<Rat> {
        self.entries.iter().map(|e| e.p.as_rat().clone()).collect()
    }

    pub fn contexts(&self) -> Vec<ContextId> {
        self.entries.iter().map(|e| e.context.clone()).collect()
    }

    /// Maximal marginal discrepancy `max p - min p` (zero for singletons).
    pub fn delta(&self) -> Rat {
        let ps = self.p_values();
        match (ps.iter().max(), ps.iter().min()) {
            (Some(max), Some(min)) => max - min,
            _ => Rat::zero(),
        }
    }
}

/// Output of [`System::connectedness_report`].
#[derive(Debug, Clone)]
pub struct ConnectednessReport {
    pub per_connection: Vec<(Connection, Rat)>,
    pub consistent: bool,
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SystemDoc {
    format: String,
    name: String,
    contexts: Vec<ContextDoc>,
}

#[derive(Serialize, Deserialize)]
struct ContextDoc {
    id: String,
    properties: Vec<String>,
    table: BTreeMap<String, String>,
}

impl SystemDoc {
    fn into_system(self) -> Result<System, ModelError> {
        if self.format != SYSTEM_FORMAT {
            return Err(ModelError::WrongFormat { got: self.format });
        }
        let contexts = self
            .contexts
            .into_iter()
            .map(|c| c.into_distribution())
            .collect::<Result<Vec<_>, _>>()?;
        System::new(self.name, contexts)
    }

    fn from_system(system: &System) -> SystemDoc {
        SystemDoc {
            format: SYSTEM_FORMAT.to_string(),
            name: system.name().to_string(),
            contexts: system
                .contexts()
                .iter()
                .map(|c| ContextDoc {
                    id: c.context().as_str().to_string(),
                    properties: c.properties().iter().map(|q| q.as_str().to_string()).collect(),
                    table: c
                        .table()
                        .iter()
                        .map(|(t, p)| (tuple_key(t), p.to_string()))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl ContextDoc {
    fn into_distribution(self) -> Result<ContextDistribution, ModelError> {
        let context = ContextId::new(self.id.clone())?;
        let properties = self
            .properties
            .into_iter()
            .map(PropertyId::new)
            .collect::<Result<Vec<_>, _>>()?;
        let mut table = BTreeMap::new();
        for (key, literal) in self.table {
            let tuple = parse_tuple_key(&key)?;
            let p = Probability::parse(&literal).map_err(|source| ModelError::BadProbability {
                context: self.id.clone(),
                source,
            })?;
            table.insert(tuple, p);
        }
        ContextDistribution::new(context, properties, table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn ctx(
        id: &str,
        props: &[&str],
        entries: &[(&[Outcome], (i64, i64))],
    ) -> ContextDistribution {
        let table = entries
            .iter()
            .map(|(t, (n, d))| (t.to_vec(), Probability::new(rat(*n, *d)).unwrap()))
            .collect();
        ContextDistribution::new(
            ContextId::new(id).unwrap(),
            props.iter().map(|p| PropertyId::new(*p).unwrap()).collect(),
            table,
        )
        .unwrap()
    }

    use Outcome::{Minus as M, Plus as P};

    #[test]
    fn marginal_of_symmetric_table() {
        let d = ctx("c", &["a", "b"], &[(&[P, P], (1, 2)), (&[M, M], (1, 2))]);
        let m = d.marginal(&[PropertyId::new("a").unwrap()]).unwrap();
        assert_eq!(m.prob(&[P]), rat(1, 2));
        assert_eq!(m.prob(&[M]), rat(1, 2));
    }

    #[test]
    fn marginal_of_point_mass() {
        let d = ctx("c", &["a", "b"], &[(&[P, M], (1, 1))]);
        let m = d.marginal(&[PropertyId::new("b").unwrap()]).unwrap();
        assert_eq!(m.prob(&[M]), rat(1, 1));
        assert_eq!(m.prob(&[P]), rat(0, 1));
    }

    #[test]
    fn marginal_of_uniform_table_is_uniform() {
        let d = ctx(
            "c",
            &["a", "b"],
            &[
                (&[P, P], (1, 4)),
                (&[P, M], (1, 4)),
                (&[M, P], (1, 4)),
                (&[M, M], (1, 4)),
            ],
        );
        for q in ["a", "b"] {
            let m = d.marginal(&[PropertyId::new(q).unwrap()]).unwrap();
            assert_eq!(m.prob(&[P]), rat(1, 2));
        }
    }

    #[test]
    fn marginal_requires_membership() {
        let d = ctx("c", &["a"], &[(&[P], (1, 1))]);
        assert!(matches!(
            d.marginal(&[PropertyId::new("zz").unwrap()]),
            Err(ModelError::PropertyNotInContext { .. })
        ));
    }

    #[test]
    fn expectation_of_deterministic_anticorrelation() {
        let d = ctx("c", &["a", "b"], &[(&[P, M], (1, 1))]);
        let a = PropertyId::new("a").unwrap();
        let b = PropertyId::new("b").unwrap();
        assert_eq!(d.expectation(&[a, b]).unwrap(), rat(-1, 1));
    }

    #[test]
    fn expectation_of_uniform_table_is_zero() {
        let d = ctx(
            "c",
            &["a", "b"],
            &[
                (&[P, P], (1, 4)),
                (&[P, M], (1, 4)),
                (&[M, P], (1, 4)),
                (&[M, M], (1, 4)),
            ],
        );
        let a = PropertyId::new("a").unwrap();
        let b = PropertyId::new("b").unwrap();
        assert_eq!(d.expectation(std::slice::from_ref(&a)).unwrap(), rat(0, 1));
        assert_eq!(d.expectation(&[a, b]).unwrap(), rat(0, 1));
    }

    #[test]
    fn expectation_hand_sum() {
        // {(+1,+1): 3/4, (-1,-1): 1/4}: product expectation 1, first
        // marginal expectation 3/4 - 1/4 = 1/2.
        let d = ctx("c", &["a", "b"], &[(&[P, P], (3, 4)), (&[M, M], (1, 4))]);
        let a = PropertyId::new("a").unwrap();
        let b = PropertyId::new("b").unwrap();
        assert_eq!(d.expectation(&[a.clone(), b]).unwrap(), rat(1, 1));
        assert_eq!(d.expectation(std::slice::from_ref(&a)).unwrap(), rat(1, 2));
    }

    #[test]
    fn non_normalized_table_is_rejected() {
        let err = ContextDistribution::new(
            ContextId::new("c").unwrap(),
            vec![PropertyId::new("a").unwrap()],
            [
                (vec![P], Probability::new(rat(9, 10)).unwrap()),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("table not normalized"));
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let err = ContextDistribution::new(
            ContextId::new("c").unwrap(),
            vec![PropertyId::new("a").unwrap(), PropertyId::new("b").unwrap()],
            [(vec![P], Probability::one())].into_iter().collect(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::WrongArity { .. }));
    }

    #[test]
    fn properties_are_canonically_sorted() {
        // Constructor sorts the property list; the table is already keyed
        // against sorted order, so (b, a) input must equal (a, b) input.
        let d = ContextDistribution::new(
            ContextId::new("c").unwrap(),
            vec![PropertyId::new("b").unwrap(), PropertyId::new("a").unwrap()],
            [(vec![P, M], Probability::one())].into_iter().collect(),
        )
        .unwrap();
        assert_eq!(d.properties()[0].as_str(), "a");
        assert_eq!(d.prob(&[P, M]), rat(1, 1));
    }

    #[test]
    fn connections_sorted_by_marginal() {
        let s = System::new(
            "s",
            vec![
                ctx("c1", &["a", "b"], &[(&[P, P], (1, 2)), (&[M, M], (1, 2))]),
                ctx("c2", &["a", "b"], &[(&[P, P], (2, 5)), (&[M, M], (3, 5))]),
            ],
        )
        .unwrap();
        let conns = s.connections();
        assert_eq!(conns.len(), 2);
        let a = &conns[0];
        assert_eq!(a.property.as_str(), "a");
        assert_eq!(a.p_values(), vec![rat(2, 5), rat(1, 2)]);
        assert_eq!(a.entries[0].context.as_str(), "c2");
        assert_eq!(a.delta(), rat(1, 10));
        let report = s.connectedness_report();
        assert!(!report.consistent);
    }

    #[test]
    fn singleton_connections_are_vacuously_consistent() {
        let s = System::new(
            "s",
            vec![ctx("c1", &["a", "b"], &[(&[P, M], (1, 1))])],
        )
        .unwrap();
        let conns = s.connections();
        assert!(conns.iter().all(|c| c.len() == 1));
        assert!(s.is_consistently_connected());
    }

    #[test]
    fn duplicate_context_rejected() {
        let err = System::new(
            "s",
            vec![
                ctx("c", &["a"], &[(&[P], (1, 1))]),
                ctx("c", &["b"], &[(&[P], (1, 1))]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DuplicateContext { .. }));
    }

    #[test]
    fn parse_decimal_and_fraction_bit_identical() {
        let with_decimal = r#"{
            "format": "cbd-system/1",
            "name": "s",
            "contexts": [
                {"id": "c", "properties": ["a", "b"],
                 "table": {"+1,+1": "0.5", "-1,-1": "0.5"}}
            ]
        }"#;
        let with_fraction = with_decimal.replace("0.5", "1/2");
        let s1 = System::from_json_str(with_decimal).unwrap();
        let s2 = System::from_json_str(&with_fraction).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn parse_kcbs_shaped_document() {
        // five two-property contexts arranged in a cycle: 10 cells
        let mut contexts = String::new();
        for i in 1..=5 {
            let a = i;
            let b = i % 5 + 1;
            let (a, b) = (a.min(b), a.max(b));
            contexts.push_str(&format!(
                r#"{}{{"id": "c{i}", "properties": ["q{a}", "q{b}"],
                    "table": {{"+1,-1": "0.5", "-1,+1": "0.5"}}}}"#,
                if i > 1 { "," } else { "" }
            ));
        }
        let doc = format!(
            r#"{{"format": "cbd-system/1", "name": "kcbs-shaped", "contexts": [{contexts}]}}"#
        );
        let s = System::from_json_str(&doc).unwrap();
        assert_eq!(s.cell_count(), 10);
        assert_eq!(s.properties().len(), 5);
        let conns = s.connections();
        assert_eq!(conns.len(), 5);
        assert!(conns.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn explicit_zero_probabilities_are_normalized_away() {
        let with_zeros = r#"{
            "format": "cbd-system/1",
            "name": "s",
            "contexts": [
                {"id": "c", "properties": ["a", "b"],
                 "table": {"+1,+1": "1/2", "+1,-1": "0", "-1,+1": "0.0", "-1,-1": "1/2"}}
            ]
        }"#;
        let without = r#"{
            "format": "cbd-system/1",
            "name": "s",
            "contexts": [
                {"id": "c", "properties": ["a", "b"],
                 "table": {"+1,+1": "1/2", "-1,-1": "1/2"}}
            ]
        }"#;
        let a = System::from_json_str(with_zeros).unwrap();
        let b = System::from_json_str(without).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn parse_rejects_wrong_tuple_arity() {
        let doc = r#"{
            "format": "cbd-system/1",
            "name": "bad",
            "contexts": [
                {"id": "c", "properties": ["a", "b"], "table": {"+1": "1"}}
            ]
        }"#;
        assert!(matches!(
            System::from_json_str(doc),
            Err(ModelError::WrongArity { .. })
        ));
    }

    #[test]
    fn parse_rejects_duplicate_property_in_context() {
        let doc = r#"{
            "format": "cbd-system/1",
            "name": "bad",
            "contexts": [
                {"id": "c", "properties": ["a", "a"], "table": {"+1,+1": "1"}}
            ]
        }"#;
        assert!(matches!(
            System::from_json_str(doc),
            Err(ModelError::DuplicateProperty { .. })
        ));
    }

    #[test]
    fn parse_rejects_wrong_format_tag() {
        let doc = r#"{"format": "cbd-system/2", "name": "s", "contexts": []}"#;
        assert!(matches!(
            System::from_json_str(doc),
            Err(ModelError::WrongFormat { .. })
        ));
    }

    #[test]
    fn parse_reports_non_normalized_table() {
        let doc = r#"{
            "format": "cbd-system/1",
            "name": "bad",
            "contexts": [
                {"id": "c9", "properties": ["a"], "table": {"+1": "9/10"}}
            ]
        }"#;
        let err = System::from_json_str(doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("table not normalized"), "{msg}");
        assert!(msg.contains("c9"), "{msg}");
    }

    #[test]
    fn parse_rejects_out_of_range_probability() {
        let doc = r#"{
            "format": "cbd-system/1",
            "name": "bad",
            "contexts": [
                {"id": "c", "properties": ["a"], "table": {"+1": "3/2", "-1": "-1/2"}}
            ]
        }"#;
        assert!(matches!(
            System::from_json_str(doc),
            Err(ModelError::BadProbability { .. })
        ));
    }

    #[test]
    fn parse_serialize_round_trip() {
        let s = System::new(
            "round-trip",
            vec![
                ctx("c1", &["a", "b"], &[(&[P, M], (3, 10)), (&[M, P], (7, 10))]),
                ctx("c2", &["b"], &[(&[P], (1, 3)), (&[M], (2, 3))]),
            ],
        )
        .unwrap();
        let text = s.to_json_string();
        let back = System::from_json_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn delete_cell_marginalizes_and_drops_empty_contexts() {
        let s = System::new(
            "s",
            vec![
                ctx("c1", &["a", "b"], &[(&[P, P], (1, 2)), (&[M, M], (1, 2))]),
                ctx("c2", &["b"], &[(&[P], (1, 2)), (&[M], (1, 2))]),
            ],
        )
        .unwrap();
        let a = PropertyId::new("a").unwrap();
        let b = PropertyId::new("b").unwrap();
        let c1 = ContextId::new("c1").unwrap();
        let c2 = ContextId::new("c2").unwrap();
        let t = s.delete_cell(&a, &c1).unwrap();
        assert_eq!(t.cell_count(), 2);
        assert_eq!(t.context(&c1).unwrap().prob(&[P]), rat(1, 2));
        let u = t.delete_cell(&b, &c2).unwrap();
        assert_eq!(u.contexts().len(), 1);
        assert!(u.delete_cell(&b, &c1).is_err());
    }

    #[test]
    fn flip_property_maps_p_to_one_minus_p() {
        let s = System::new(
            "s",
            vec![
                ctx("c1", &["a", "b"], &[(&[P, P], (2, 5)), (&[M, M], (3, 5))]),
                ctx("c2", &["a"], &[(&[P], (2, 5)), (&[M], (3, 5))]),
            ],
        )
        .unwrap();
        let a = PropertyId::new("a").unwrap();
        let flipped = s.flip_property_outcomes(&a).unwrap();
        let conns = flipped.connections();
        assert_eq!(conns[0].p_values(), vec![rat(3, 5), rat(3, 5)]);
        // the other connection is untouched
        assert_eq!(conns[1].p_values(), vec![rat(2, 5)]);
    }
}
