//! Multimaximal couplings of connections.
//!
//! A coupling of a connection imposes a joint distribution on the
//! measurements of one property across contexts, reproducing each
//! context's marginal. The *multimaximal* coupling additionally makes
//! every subset of its coordinates equal with the maximal achievable
//! probability. For binary measurements it exists, is unique, and has a
//! closed form: with the marginals `p_1 <= ... <= p_k` (the connection
//! ordering), it is the staircase distribution supported on the chain
//!
//! ```text
//! (+1, ..., +1)            mass p_1
//! (-1, +1, ..., +1)        mass p_2 - p_1
//! (-1, -1, +1, ..., +1)    mass p_3 - p_2
//!   ...
//! (-1, ..., -1)            mass 1 - p_k
//! ```
//!
//! Maximality for every subset reduces to maximality for consecutive
//! pairs, which is what [`is_multimaximal`] checks.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{Connection, ContextId, Outcome, PropertyId};
use crate::rational::{format_rat, Probability, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CouplingError {
    #[error("coupling is over contexts {got:?}, connection orders {expected:?}")]
    ContextMismatch { got: Vec<String>, expected: Vec<String> },
    #[error("coordinate {index} has marginal {got}, connection requires {expected}")]
    MarginalMismatch {
        index: usize,
        got: String,
        expected: String,
    },
    #[error("coordinate index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },
    #[error("empty coordinate subset")]
    EmptySubset,
}

/// A joint distribution over the measurements of one property across its
/// contexts, in connection (ascending-marginal) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionCoupling {
    property: PropertyId,
    contexts: Vec<ContextId>,
    table: BTreeMap<Vec<Outcome>, Probability>,
}

impl ConnectionCoupling {
    /// Wraps a table as a coupling. The table must be a distribution over
    /// `{+1,-1}^k` where `k = contexts.len()`; zero-mass tuples are
    /// dropped. Marginal agreement with any particular connection is
    /// checked by [`is_multimaximal`], not here.
    pub fn new(
        property: PropertyId,
        contexts: Vec<ContextId>,
        table: BTreeMap<Vec<Outcome>, Probability>,
    ) -> Self {
        let arity = contexts.len();
        let mut sum = Rat::zero();
        let mut canonical = BTreeMap::new();
        for (tuple, p) in table {
            assert_eq!(tuple.len(), arity, "tuple arity must match context count");
            sum += p.as_rat();
            if !p.is_zero() {
                canonical.insert(tuple, p);
            }
        }
        assert!(sum.is_one(), "coupling table must sum to 1, got {sum}");
        ConnectionCoupling {
            property,
            contexts,
            table: canonical,
        }
    }

    pub fn property(&self) -> &PropertyId {
        &self.property
    }

    /// Coordinate order: the connection's contexts, ascending by marginal.
    pub fn contexts(&self) -> &[ContextId] {
        &self.contexts
    }

    pub fn arity(&self) -> usize {
        self.contexts.len()
    }

    pub fn table(&self) -> &BTreeMap<Vec<Outcome>, Probability> {
        &self.table
    }

    /// `Pr[coordinate i = +1]`.
    pub fn coordinate_marginal(&self, index: usize) -> Result<Rat, CouplingError> {
        if index >= self.arity() {
            return Err(CouplingError::IndexOutOfRange {
                index,
                arity: self.arity(),
            });
        }
        let mut sum = Rat::zero();
        for (tuple, p) in &self.table {
            if tuple[index] == Outcome::Plus {
                sum += p.as_rat();
            }
        }
        Ok(sum)
    }

    /// Exact probability that all coordinates in `subset` are equal.
    pub fn subset_equality_prob(&self, subset: &[usize]) -> Result<Rat, CouplingError> {
        if subset.is_empty() {
            return Err(CouplingError::EmptySubset);
        }
        for &i in subset {
            if i >= self.arity() {
                return Err(CouplingError::IndexOutOfRange {
                    index: i,
                    arity: self.arity(),
                });
            }
        }
        let mut sum = Rat::zero();
        for (tuple, p) in &self.table {
            let first = tuple[subset[0]];
            if subset.iter().all(|&i| tuple[i] == first) {
                sum += p.as_rat();
            }
        }
        Ok(sum)
    }
}

/// Maximal achievable `Pr[S = S']` over all couplings of two binary
/// variables with `Pr[= +1]` equal to `p` and `p'`: `1 - |p - p'|`.
pub fn max_pair_equality(p: &Probability, p_prime: &Probability) -> Probability {
    let diff = (p.as_rat() - p_prime.as_rat()).abs();
    Probability::new(Rat::one() - diff).expect("1 - |p - p'| lies in [0, 1]")
}

/// Constructs the unique multimaximal coupling of a connection: the
/// staircase distribution over the chain of tuples described in the module
/// docs. Equal adjacent marginals collapse to zero-mass steps, which are
/// omitted, so the support has at most `k + 1` tuples.
pub fn construct_multimaximal(connection: &Connection) -> ConnectionCoupling {
    let ps = connection.p_values();
    let k = ps.len();
    assert!(k >= 1, "connection must have at least one entry");
    let mut table = BTreeMap::new();
    let mut add = |tuple: Vec<Outcome>, mass: Rat| {
        if !mass.is_zero() {
            table.insert(tuple, Probability::new(mass).expect("staircase mass in [0,1]"));
        }
    };
    add(vec![Outcome::Plus; k], ps[0].clone());
    for l in 1..k {
        let mut tuple = vec![Outcome::Plus; k];
        for coord in tuple.iter_mut().take(l) {
            *coord = Outcome::Minus;
        }
        add(tuple, &ps[l] - &ps[l - 1]);
    }
    add(vec![Outcome::Minus; k], Rat::one() - &ps[k - 1]);
    ConnectionCoupling::new(
        connection.property.clone(),
        connection.contexts(),
        table,
    )
}

/// One failed consecutive-pair maximality check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairViolation {
    pub left: usize,
    pub right: usize,
    pub achieved: Rat,
    pub required: Rat,
}

/// Result of [`is_multimaximal`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultimaximalCheck {
    pub is_multimaximal: bool,
    pub violations: Vec<PairViolation>,
}

/// Checks whether `coupling` is the multimaximal coupling of `connection`:
/// its marginals must match the connection's, and every consecutive pair
/// of coordinates must be equal with probability
/// `max_pair_equality(p_l, p_{l+1})`. Pair maximality for consecutive
/// pairs implies maximality for every subset.
pub fn is_multimaximal(
    coupling: &ConnectionCoupling,
    connection: &Connection,
) -> Result<MultimaximalCheck, CouplingError> {
    let expected_contexts = connection.contexts();
    if coupling.contexts() != expected_contexts.as_slice() {
        return Err(CouplingError::ContextMismatch {
            got: coupling.contexts().iter().map(|c| c.as_str().to_string()).collect(),
            expected: expected_contexts.iter().map(|c| c.as_str().to_string()).collect(),
        });
    }
    let ps = connection.p_values();
    for (i, p) in ps.iter().enumerate() {
        let got = coupling.coordinate_marginal(i)?;
        if got != *p {
            return Err(CouplingError::MarginalMismatch {
                index: i,
                got: format_rat(&got),
                expected: format_rat(p),
            });
        }
    }
    let mut violations = Vec::new();
    for l in 0..ps.len().saturating_sub(1) {
        let achieved = coupling.subset_equality_prob(&[l, l + 1])?;
        let required = Rat::one() - (&ps[l + 1] - &ps[l]);
        if achieved != required {
            violations.push(PairViolation {
                left: l,
                right: l + 1,
                achieved,
                required,
            });
        }
    }
    Ok(MultimaximalCheck {
        is_multimaximal: violations.is_empty(),
        violations,
    })
}
