//! Deterministic random instance generators.
//!
//! Shared by the randomized test suites and the acceptance suite; all
//! functions are pure in the supplied RNG, so a seeded generator yields
//! reproducible instances.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::Rng;

use crate::model::{
    Connection, ConnectionEntry, ContextDistribution, ContextId, Outcome, PropertyId, System,
};
use crate::rational::{rat, Probability, Rat};

/// Random rational in `[0, 1]` with denominator at most `max_den`.
pub fn random_probability(rng: &mut StdRng, max_den: i64) -> Rat {
    let den = rng.random_range(1..=max_den);
    let num = rng.random_range(0..=den);
    rat(num, den)
}

/// Random connection of `k` entries over contexts `x0..x(k-1)`, sorted
/// into the ascending-marginal ordering.
pub fn random_connection(rng: &mut StdRng, k: usize, max_den: i64) -> Connection {
    let mut entries: Vec<ConnectionEntry> = (0..k)
        .map(|i| ConnectionEntry {
            context: ContextId::new(format!("x{i}")).expect("nonempty"),
            p: Probability::new(random_probability(rng, max_den)).expect("in range"),
        })
        .collect();
    entries.sort_by(|a, b| a.p.cmp(&b.p).then_with(|| a.context.cmp(&b.context)));
    Connection {
        property: PropertyId::new("q").expect("nonempty"),
        entries,
    }
}

/// Random exact distribution over `2^arity` outcome tuples: integer
/// weights normalized by their sum.
pub fn random_table(rng: &mut StdRng, arity: usize) -> BTreeMap<Vec<Outcome>, Probability> {
    let size = 1usize << arity;
    loop {
        let weights: Vec<i64> = (0..size).map(|_| rng.random_range(0..=6)).collect();
        let total: i64 = weights.iter().sum();
        if total == 0 {
            continue;
        }
        return (0..size)
            .map(|bits| {
                let tuple = tuple_from_bits(bits, arity);
                (tuple, Probability::new(rat(weights[bits], total)).expect("in range"))
            })
            .collect();
    }
}

fn tuple_from_bits(bits: usize, arity: usize) -> Vec<Outcome> {
    (0..arity)
        .map(|j| {
            if bits >> (arity - 1 - j) & 1 == 0 {
                Outcome::Plus
            } else {
                Outcome::Minus
            }
        })
        .collect()
}

/// Random cyclic system of the given rank with arbitrary (generically
/// inconsistently connected) context tables.
pub fn random_cyclic_system(rng: &mut StdRng, rank: usize) -> System {
    assert!(rank >= 2);
    let props: Vec<PropertyId> = (0..rank)
        .map(|i| PropertyId::new(format!("q{i:02}")).expect("nonempty"))
        .collect();
    let contexts = (0..rank)
        .map(|i| {
            let pair = vec![props[i].clone(), props[(i + 1) % rank].clone()];
            ContextDistribution::new(
                ContextId::new(format!("k{i:02}")).expect("nonempty"),
                pair,
                random_table(rng, 2),
            )
            .expect("random table is a distribution")
        })
        .collect();
    System::new("random-cyclic", contexts).expect("labels are unique")
}

/// The comonotone distribution with the given `Pr[=+1]` marginals: the
/// coordinates switch from -1 to +1 one at a time as a shared latent
/// uniform variable falls below each marginal.
fn comonotone_table(ps: &[Rat]) -> Vec<(Vec<Outcome>, Rat)> {
    let k = ps.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| ps[a].cmp(&ps[b]));
    let mut out = Vec::new();
    let mut push = |minus_set: &[usize], mass: Rat| {
        if mass.is_zero() {
            return;
        }
        let mut tuple = vec![Outcome::Plus; k];
        for &i in minus_set {
            tuple[i] = Outcome::Minus;
        }
        out.push((tuple, mass));
    };
    push(&[], ps[order[0]].clone());
    for l in 1..k {
        push(&order[..l], &ps[order[l]] - &ps[order[l - 1]]);
    }
    push(&order, Rat::one() - &ps[order[k - 1]]);
    out
}

/// The product distribution with the given `Pr[=+1]` marginals.
fn product_table(ps: &[Rat]) -> Vec<(Vec<Outcome>, Rat)> {
    let k = ps.len();
    (0..(1usize << k))
        .map(|bits| {
            let tuple = tuple_from_bits(bits, k);
            let mass = tuple
                .iter()
                .zip(ps)
                .map(|(o, p)| match o {
                    Outcome::Plus => p.clone(),
                    Outcome::Minus => Rat::one() - p,
                })
                .fold(Rat::one(), |a, b| a * b);
            (tuple, mass)
        })
        .collect()
}

/// Random consistently connected system: every property carries one
/// marginal shared by all contexts measuring it; each context table is a
/// random mixture of the product and comonotone distributions over those
/// marginals, which preserves the marginals exactly.
pub fn random_consistent_system(rng: &mut StdRng, max_cells: usize) -> System {
    let num_props = rng.random_range(2..=4usize);
    let props: Vec<PropertyId> = (0..num_props)
        .map(|i| PropertyId::new(format!("q{i:02}")).expect("nonempty"))
        .collect();
    let marginals: Vec<Rat> = (0..num_props)
        .map(|_| random_probability(rng, 12))
        .collect();
    let mut contexts = Vec::new();
    let mut cells = 0usize;
    let mut ctx_index = 0usize;
    while cells < max_cells.saturating_sub(1) && (contexts.is_empty() || rng.random_bool(0.7)) {
        let arity = rng.random_range(1..=2.min(num_props).min(max_cells - cells));
        // choose `arity` distinct properties
        let mut chosen = Vec::new();
        while chosen.len() < arity {
            let i = rng.random_range(0..num_props);
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
        chosen.sort_unstable();
        let ps: Vec<Rat> = chosen.iter().map(|&i| marginals[i].clone()).collect();
        let lambda = random_probability(rng, 10);
        let mut table: BTreeMap<Vec<Outcome>, Rat> = BTreeMap::new();
        for (tuple, mass) in product_table(&ps) {
            let weighted = &lambda * mass;
            *table.entry(tuple).or_insert_with(Rat::zero) += weighted;
        }
        let co_weight = Rat::one() - &lambda;
        for (tuple, mass) in comonotone_table(&ps) {
            let weighted = &co_weight * mass;
            *table.entry(tuple).or_insert_with(Rat::zero) += weighted;
        }
        let table: BTreeMap<Vec<Outcome>, Probability> = table
            .into_iter()
            .map(|(t, r)| (t, Probability::new(r).expect("mixture mass in [0,1]")))
            .collect();
        let properties: Vec<PropertyId> = chosen.iter().map(|&i| props[i].clone()).collect();
        cells += arity;
        contexts.push(
            ContextDistribution::new(
                ContextId::new(format!("k{ctx_index:02}")).expect("nonempty"),
                properties,
                table,
            )
            .expect("mixture is a distribution"),
        );
        ctx_index += 1;
    }
    System::new("random-consistent", contexts).expect("labels are unique")
}

/// Random system with arbitrary tables over a random incidence; retried
/// until at least one connection has a nonzero marginal discrepancy.
pub fn random_inconsistent_system(rng: &mut StdRng, max_cells: usize) -> System {
    loop {
        let s = random_free_system(rng, max_cells);
        if !s.is_consistently_connected() {
            return s;
        }
    }
}

/// Random system with arbitrary (unconstrained) context tables. Shapes
/// are biased toward properties shared across contexts so connections of
/// length 2 or more are common.
pub fn random_free_system(rng: &mut StdRng, max_cells: usize) -> System {
    let num_props = rng.random_range(2..=4usize);
    let props: Vec<PropertyId> = (0..num_props)
        .map(|i| PropertyId::new(format!("q{i:02}")).expect("nonempty"))
        .collect();
    let mut contexts = Vec::new();
    let mut cells = 0usize;
    let mut ctx_index = 0usize;
    while cells < max_cells.saturating_sub(1) && (contexts.len() < 2 || rng.random_bool(0.6)) {
        let arity = rng.random_range(1..=2.min(num_props).min(max_cells - cells));
        let mut chosen = Vec::new();
        while chosen.len() < arity {
            let i = rng.random_range(0..num_props);
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
        chosen.sort_unstable();
        let properties: Vec<PropertyId> = chosen.iter().map(|&i| props[i].clone()).collect();
        cells += arity;
        contexts.push(
            ContextDistribution::new(
                ContextId::new(format!("k{ctx_index:02}")).expect("nonempty"),
                properties,
                random_table(rng, arity),
            )
            .expect("random table is a distribution"),
        );
        ctx_index += 1;
    }
    System::new("random-system", contexts).expect("labels are unique")
}

/// Random noncontextual system built from a hidden joint distribution:
/// a random distribution over value assignments to all properties is
/// marginalized onto each context, so the identity coupling satisfies the
/// probability-1 (and hence the multimaximality) requirement.
pub fn random_hidden_variable_system(rng: &mut StdRng, max_cells: usize) -> System {
    let num_props = rng.random_range(2..=4usize);
    let props: Vec<PropertyId> = (0..num_props)
        .map(|i| PropertyId::new(format!("q{i:02}")).expect("nonempty"))
        .collect();
    let hidden = random_table(rng, num_props);
    let hidden_dist = ContextDistribution::new(
        ContextId::new("hidden").expect("nonempty"),
        props.clone(),
        hidden,
    )
    .expect("random table is a distribution");

    let mut contexts = Vec::new();
    let mut cells = 0usize;
    let mut ctx_index = 0usize;
    while cells < max_cells.saturating_sub(1) && (contexts.len() < 2 || rng.random_bool(0.6)) {
        let arity = rng.random_range(1..=2.min(num_props).min(max_cells - cells));
        let mut chosen = Vec::new();
        while chosen.len() < arity {
            let i = rng.random_range(0..num_props);
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
        chosen.sort_unstable();
        let properties: Vec<PropertyId> = chosen.iter().map(|&i| props[i].clone()).collect();
        let marginal = hidden_dist
            .marginal(&properties)
            .expect("subset of hidden properties");
        cells += arity;
        contexts.push(
            ContextDistribution::new(
                ContextId::new(format!("k{ctx_index:02}")).expect("nonempty"),
                properties,
                marginal.table().clone(),
            )
            .expect("marginal is a distribution"),
        );
        ctx_index += 1;
    }
    System::new("random-hidden-variable", contexts).expect("labels are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn consistent_generator_is_consistent() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..25 {
            let s = random_consistent_system(&mut rng, 12);
            assert!(s.is_consistently_connected(), "{}", s.to_json_string());
            assert!(s.cell_count() <= 12);
        }
    }

    #[test]
    fn hidden_variable_generator_is_consistent() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..25 {
            let s = random_hidden_variable_system(&mut rng, 12);
            assert!(s.is_consistently_connected());
        }
    }

    #[test]
    fn inconsistent_generator_has_discrepancy() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..25 {
            let s = random_inconsistent_system(&mut rng, 10);
            assert!(!s.is_consistently_connected());
        }
    }

    #[test]
    fn cyclic_generator_is_cyclic() {
        let mut rng = StdRng::seed_from_u64(10);
        for rank in 2..=5 {
            for _ in 0..5 {
                let s = random_cyclic_system(&mut rng, rank);
                let a = crate::cyclic::detect_cyclic(&s).expect("cyclic by construction");
                assert_eq!(a.rank(), rank);
            }
        }
    }

    #[test]
    fn connection_generator_is_sorted() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let c = random_connection(&mut rng, 4, 20);
            let ps = c.p_values();
            assert!(ps.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
