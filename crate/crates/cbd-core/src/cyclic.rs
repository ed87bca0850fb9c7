//! Cyclic systems and the closed-form contextuality criterion.
//!
//! A cyclic system of rank `n > 1` has `n` properties and `n` contexts,
//! each context measuring exactly two properties and each property
//! measured in exactly two contexts, the incidence graph forming a single
//! cycle. Indexing the cycle so that context `c_i` measures
//! `{q_i, q_(i+1)}` (wrapping around), the system is noncontextual iff
//!
//! ```text
//! max_{odd sign vectors} sum_i s_i * <R_i^i R_(i+1)^i>
//!     <= n - 2 + sum_i |<R_i^i> - <R_i^(i-1)>|
//! ```
//!
//! where the maximum runs over sign vectors with product -1. Equality is
//! noncontextual; a strict violation is contextual.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{ContextId, ModelError, PropertyId, System};
use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CyclicError {
    #[error("arrangement must have equal property and context counts, got {properties} and {contexts}")]
    LengthMismatch { properties: usize, contexts: usize },
    #[error("cyclic rank must be at least 2, got {rank}")]
    RankTooSmall { rank: usize },
    #[error("duplicate label in arrangement: {label:?}")]
    DuplicateLabel { label: String },
    #[error("arrangement does not match system: context {context:?} must measure exactly {{{a:?}, {b:?}}}")]
    ArrangementMismatch {
        context: String,
        a: String,
        b: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Canonical indexing of a cyclic system: `contexts[i]` measures exactly
/// `{properties[i], properties[(i+1) % n]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicArrangement {
    properties: Vec<PropertyId>,
    contexts: Vec<ContextId>,
}

impl CyclicArrangement {
    /// Shape-validates an arrangement (rank >= 2, equal lengths, no
    /// duplicates). Agreement with a particular system is checked by
    /// [`cyclic_contextuality`].
    pub fn new(
        properties: Vec<PropertyId>,
        contexts: Vec<ContextId>,
    ) -> Result<Self, CyclicError> {
        if properties.len() != contexts.len() {
            return Err(CyclicError::LengthMismatch {
                properties: properties.len(),
                contexts: contexts.len(),
            });
        }
        if properties.len() < 2 {
            return Err(CyclicError::RankTooSmall {
                rank: properties.len(),
            });
        }
        let mut prop_labels: Vec<&str> = properties.iter().map(|q| q.as_str()).collect();
        prop_labels.sort_unstable();
        if let Some(dup) = prop_labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(CyclicError::DuplicateLabel {
                label: dup[0].to_string(),
            });
        }
        let mut ctx_labels: Vec<&str> = contexts.iter().map(|c| c.as_str()).collect();
        ctx_labels.sort_unstable();
        if let Some(dup) = ctx_labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(CyclicError::DuplicateLabel {
                label: dup[0].to_string(),
            });
        }
        Ok(CyclicArrangement {
            properties,
            contexts,
        })
    }

    pub fn rank(&self) -> usize {
        self.properties.len()
    }

    pub fn properties(&self) -> &[PropertyId] {
        &self.properties
    }

    pub fn contexts(&self) -> &[ContextId] {
        &self.contexts
    }

    /// The arrangement started `k` steps further along the cycle.
    pub fn rotated(&self, k: usize) -> CyclicArrangement {
        let n = self.rank();
        let k = k % n;
        CyclicArrangement {
            properties: rotate(&self.properties, k),
            contexts: rotate(&self.contexts, k),
        }
    }

    /// The arrangement walked in the opposite orientation, keeping the
    /// same starting property.
    pub fn reversed(&self) -> CyclicArrangement {
        let n = self.rank();
        let mut properties = vec![self.properties[0].clone()];
        properties.extend(self.properties[1..].iter().rev().cloned());
        // new c_i must contain {new q_i, new q_(i+1)}; the old context
        // c_(n-1-i) shifted appropriately does.
        let contexts = (0..n)
            .map(|i| self.contexts[(2 * n - 1 - i) % n].clone())
            .collect();
        CyclicArrangement {
            properties,
            contexts,
        }
    }
}

fn rotate<T: Clone>(items: &[T], k: usize) -> Vec<T> {
    let n = items.len();
    (0..n).map(|i| items[(i + k) % n].clone()).collect()
}

/// Detects whether a system is cyclic and, if so, returns the canonical
/// arrangement: start at the lexicographically smallest property, oriented
/// toward its smaller-labeled neighbor (ties between the two contexts of a
/// rank-2 system broken by context label).
pub fn detect_cyclic(system: &System) -> Option<CyclicArrangement> {
    let contexts = system.contexts();
    let properties = system.properties();
    let n = properties.len();
    if n < 2 || contexts.len() != n {
        return None;
    }
    if contexts.iter().any(|c| c.arity() != 2) {
        return None;
    }
    // contexts-of-property incidence
    let ctx_of = |q: &PropertyId| -> Vec<&ContextId> {
        contexts
            .iter()
            .filter(|c| c.measures(q))
            .map(|c| c.context())
            .collect()
    };
    for q in &properties {
        if ctx_of(q).len() != 2 {
            return None;
        }
    }
    let other_in = |ctx: &ContextId, q: &PropertyId| -> PropertyId {
        let c = system.context(ctx).expect("context exists");
        c.properties()
            .iter()
            .find(|p| *p != q)
            .expect("arity-2 context has another property")
            .clone()
    };

    // Walk the cycle from the smallest property toward its smaller
    // neighbor; n distinct properties must be visited and the walk must
    // close up, otherwise the incidence graph is not a single cycle.
    let start = properties[0].clone();
    let start_ctxs = ctx_of(&start);
    let (mut ctx_next, neighbor_a) = (start_ctxs[0].clone(), other_in(start_ctxs[0], &start));
    let (ctx_alt, neighbor_b) = (start_ctxs[1].clone(), other_in(start_ctxs[1], &start));
    // pick the orientation: smaller neighbor label first; for a rank-2
    // system both neighbors coincide, so fall back to the context label.
    let forward_via_a = match neighbor_a.cmp(&neighbor_b) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => ctx_next <= ctx_alt,
    };
    if !forward_via_a {
        ctx_next = ctx_alt;
    }

    let mut prop_order = vec![start.clone()];
    let mut ctx_order = vec![ctx_next.clone()];
    let mut current = other_in(&ctx_order[0], &start);
    while current != start {
        if prop_order.len() > n {
            return None;
        }
        prop_order.push(current.clone());
        let next_ctx = ctx_of(&current)
            .into_iter()
            .find(|c| **c != *ctx_order.last().unwrap())?
            .clone();
        current = other_in(&next_ctx, &current);
        ctx_order.push(next_ctx);
    }
    if prop_order.len() != n {
        return None; // closed early: more than one cycle component
    }
    Some(CyclicArrangement {
        properties: prop_order,
        contexts: ctx_order,
    })
}

/// Maximum of `sum_i s_i * lambda_i` over sign vectors `s` in `{-1,1}^n`
/// with product -1. Equals `sum |lambda_i|` when the number of negative
/// entries is odd (a zero entry makes either parity reachable for free),
/// and `sum |lambda_i| - 2 min |lambda_i|` otherwise.
pub fn odd_sign_max(lambda: &[Rat]) -> Rat {
    assert!(!lambda.is_empty(), "odd_sign_max needs at least one term");
    let sum_abs: Rat = lambda.iter().map(|l| l.abs()).fold(Rat::zero(), |a, b| a + b);
    let negatives = lambda.iter().filter(|l| l.is_negative()).count();
    if negatives % 2 == 1 {
        sum_abs
    } else {
        // with a zero entry min |lambda| is 0 and the two branches agree
        let min_abs = lambda
            .iter()
            .map(|l| l.abs())
            .min()
            .expect("nonempty slice");
        sum_abs - Rat::from_integer(2.into()) * min_abs
    }
}

/// Decision record for one cyclic system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicVerdict {
    /// The odd-sign-vector maximum of the product expectations.
    pub lhs: Rat,
    /// `n - 2` plus the sum of marginal-expectation discrepancies.
    pub rhs: Rat,
    /// Strict violation: `lhs > rhs`. Equality is noncontextual.
    pub contextual: bool,
    /// `lhs - rhs`; positive exactly when contextual.
    pub slack: Rat,
}

/// Evaluates the closed-form criterion on a cyclic system under the given
/// arrangement. The arrangement is re-validated against the system, so a
/// mismatched one is an error rather than a wrong answer.
pub fn cyclic_contextuality(
    system: &System,
    arrangement: &CyclicArrangement,
) -> Result<CyclicVerdict, CyclicError> {
    let n = arrangement.rank();
    let props = arrangement.properties();
    let ctxs = arrangement.contexts();
    // validate incidence: c_i measures exactly {q_i, q_(i+1)}
    for i in 0..n {
        let a = &props[i];
        let b = &props[(i + 1) % n];
        let c = system.context(&ctxs[i])?;
        let ok = c.arity() == 2 && c.measures(a) && c.measures(b);
        if !ok {
            return Err(CyclicError::ArrangementMismatch {
                context: ctxs[i].as_str().to_string(),
                a: a.as_str().to_string(),
                b: b.as_str().to_string(),
            });
        }
    }
    let mut lambda = Vec::with_capacity(n);
    for i in 0..n {
        let c = system.context(&ctxs[i])?;
        lambda.push(c.expectation(&[props[i].clone(), props[(i + 1) % n].clone()])?);
    }
    let lhs = odd_sign_max(&lambda);
    let mut discrepancy = Rat::zero();
    for i in 0..n {
        // <R_i^i> in c_i versus <R_i^(i-1)> in the preceding context
        let here = system
            .context(&ctxs[i])?
            .expectation(std::slice::from_ref(&props[i]))?;
        let there = system
            .context(&ctxs[(i + n - 1) % n])?
            .expectation(std::slice::from_ref(&props[i]))?;
        discrepancy += (here - there).abs();
    }
    let rhs = Rat::from_integer((n as i64 - 2).into()) + discrepancy;
    let slack = &lhs - &rhs;
    Ok(CyclicVerdict {
        contextual: slack.is_positive(),
        lhs,
        rhs,
        slack,
    })
}
