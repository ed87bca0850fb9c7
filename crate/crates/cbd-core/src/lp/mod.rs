//! Exact coupling-feasibility decisions for arbitrary systems.
//!
//! A coupling of a system is a joint distribution over all of its `N`
//! measurement cells. The LP enumerates the `2^N` outcome atoms as
//! nonnegative masses constrained by (a) normalization, (b) every context
//! table reproduced exactly, and (c) one equality-probability constraint
//! per consecutive pair of each connection's ordering: in `cbd` mode the
//! pair must be equal with the maximal achievable probability
//! `1 - (p_(l+1) - p_l)`, in `traditional` mode with probability 1.
//! Pairwise maximality implies maximality for every subset of a
//! connection, so the pair constraints are exactly the multimaximality
//! requirement.
//!
//! Feasibility means noncontextual and comes with a witness coupling;
//! infeasibility means contextual and comes with a Farkas certificate over
//! the constraint rows. Both artifacts verify exactly and independently of
//! the solver's pivot path.

pub mod simplex;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::cyclic::{cyclic_contextuality, detect_cyclic};
use crate::model::{ContextId, Outcome, PropertyId, System};
use crate::rational::{Probability, Rat};
use simplex::{ColumnOracle, Feasibility};

/// Default bound on the number of measurement cells (about 10^6 atoms).
pub const DEFAULT_MAX_CELLS: usize = 20;

/// Which connection constraint the coupling must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Equal with the maximal possible probability (multimaximality).
    Cbd,
    /// Equal with probability 1.
    Traditional,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cbd => "cbd",
            Mode::Traditional => "traditional",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cbd" => Ok(Mode::Cbd),
            "traditional" => Ok(Mode::Traditional),
            other => Err(format!("unknown mode {other:?} (expected cbd or traditional)")),
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum LpError {
    #[error("system has {cells} measurement cells, exceeding the limit of {limit}")]
    TooManyCells { cells: usize, limit: usize },
    #[error("witness cells do not match the system ({got} cells, system has {expected})")]
    CellMismatch { got: usize, expected: usize },
    #[error("certificate has {got} coefficients, LP has {expected} constraint rows")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("witness tuple {tuple:?} has arity {got}, expected {expected}")]
    WitnessArity {
        tuple: String,
        got: usize,
        expected: usize,
    },
}

/// One equality constraint row of the coupling LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpRow {
    pub kind: RowKind,
    pub rhs: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowKind {
    /// Total mass is 1.
    Normalization,
    /// The coupling restricted to one context reproduces one table cell.
    ContextTuple {
        context: ContextId,
        tuple: Vec<Outcome>,
    },
    /// Equality probability of two measurements of one property.
    PairEquality {
        property: PropertyId,
        left: ContextId,
        right: ContextId,
    },
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKind::Normalization => write!(f, "normalization"),
            RowKind::ContextTuple { context, tuple } => {
                write!(f, "context {} tuple {}", context, crate::model::tuple_key(tuple))
            }
            RowKind::PairEquality { property, left, right } => {
                write!(f, "equality of {property} in {left} and {right}")
            }
        }
    }
}

struct ContextBlock {
    /// Positions of this context's cells in the sorted cell list, in the
    /// context's canonical property order.
    positions: Vec<usize>,
    /// Row index of the tuple with all-`Plus` bits; tuples follow in
    /// lexicographic order.
    row_base: usize,
}

struct PairBlock {
    left_pos: usize,
    right_pos: usize,
    row: usize,
}

/// The coupling polytope of a system in a given mode: one nonnegative
/// mass per outcome atom in `{+1,-1}^N`, equality constraint rows with
/// 0/1 coefficients, exact rational right-hand sides.
pub struct CouplingLp {
    mode: Mode,
    cells: Vec<(PropertyId, ContextId)>,
    rows: Vec<LpRow>,
    context_blocks: Vec<ContextBlock>,
    pair_blocks: Vec<PairBlock>,
}

impl CouplingLp {
    /// Builds the LP, enforcing the cell limit: atoms are enumerated
    /// exhaustively, so the size error is explicit rather than silent.
    pub fn build(system: &System, mode: Mode, max_cells: usize) -> Result<Self, LpError> {
        let cells = system.cell_count();
        if cells > max_cells {
            return Err(LpError::TooManyCells {
                cells,
                limit: max_cells,
            });
        }
        Ok(Self::build_unbounded(system, mode))
    }

    /// Builds constraint rows without the atom-count guard; used for
    /// witness verification, which never enumerates atoms.
    fn build_unbounded(system: &System, mode: Mode) -> Self {
        let cells = system.cells();
        let cell_pos = |q: &PropertyId, c: &ContextId| -> usize {
            cells
                .binary_search_by(|probe| probe.0.cmp(q).then_with(|| probe.1.cmp(c)))
                .expect("cell exists in validated system")
        };

        let mut rows = vec![LpRow {
            kind: RowKind::Normalization,
            rhs: Rat::one(),
        }];
        let mut context_blocks = Vec::new();
        // contexts in label order for reproducible row numbering
        let mut contexts: Vec<&crate::model::ContextDistribution> =
            system.contexts().iter().collect();
        contexts.sort_by(|a, b| a.context().cmp(b.context()));
        for ctx in &contexts {
            let positions: Vec<usize> = ctx
                .properties()
                .iter()
                .map(|q| cell_pos(q, ctx.context()))
                .collect();
            let m = positions.len();
            let row_base = rows.len();
            for bits in 0..(1usize << m) {
                let tuple: Vec<Outcome> = (0..m)
                    .map(|j| {
                        if bits >> (m - 1 - j) & 1 == 0 {
                            Outcome::Plus
                        } else {
                            Outcome::Minus
                        }
                    })
                    .collect();
                let rhs = ctx.prob(&tuple);
                rows.push(LpRow {
                    kind: RowKind::ContextTuple {
                        context: ctx.context().clone(),
                        tuple,
                    },
                    rhs,
                });
            }
            context_blocks.push(ContextBlock {
                positions,
                row_base,
            });
        }

        let mut pair_blocks = Vec::new();
        for connection in system.connections() {
            let ps = connection.p_values();
            for l in 0..connection.entries.len().saturating_sub(1) {
                let left = &connection.entries[l].context;
                let right = &connection.entries[l + 1].context;
                let rhs = match mode {
                    // ordering makes p_(l+1) >= p_l, so this is
                    // 1 - |p_(l+1) - p_l|, the maximal equality probability
                    Mode::Cbd => Rat::one() - (&ps[l + 1] - &ps[l]),
                    Mode::Traditional => Rat::one(),
                };
                pair_blocks.push(PairBlock {
                    left_pos: cell_pos(&connection.property, left),
                    right_pos: cell_pos(&connection.property, right),
                    row: rows.len(),
                });
                rows.push(LpRow {
                    kind: RowKind::PairEquality {
                        property: connection.property.clone(),
                        left: left.clone(),
                        right: right.clone(),
                    },
                    rhs,
                });
            }
        }

        CouplingLp {
            mode,
            cells,
            rows,
            context_blocks,
            pair_blocks,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Measurement cells in (property label, context label) order; atom
    /// bit `i` (most significant first) is the outcome of `cells()[i]`.
    pub fn cells(&self) -> &[(PropertyId, ContextId)] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_atoms(&self) -> usize {
        1usize << self.cells.len()
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn rhs(&self) -> Vec<Rat> {
        self.rows.iter().map(|r| r.rhs.clone()).collect()
    }

    fn atom_bit(&self, atom: usize, pos: usize) -> bool {
        atom >> (self.cells.len() - 1 - pos) & 1 == 1
    }

    /// Outcome tuple of an atom, in cell order (`Plus` for bit 0).
    pub fn atom_tuple(&self, atom: usize) -> Vec<Outcome> {
        (0..self.cells.len())
            .map(|pos| {
                if self.atom_bit(atom, pos) {
                    Outcome::Minus
                } else {
                    Outcome::Plus
                }
            })
            .collect()
    }

    /// Membership of a full outcome tuple in a constraint row.
    fn tuple_in_row(&self, tuple: &[Outcome], row: usize) -> bool {
        if row == 0 {
            return true;
        }
        for block in &self.context_blocks {
            let size = 1usize << block.positions.len();
            if row >= block.row_base && row < block.row_base + size {
                let bits = row - block.row_base;
                let m = block.positions.len();
                return block.positions.iter().enumerate().all(|(j, &pos)| {
                    let want_minus = bits >> (m - 1 - j) & 1 == 1;
                    (tuple[pos] == Outcome::Minus) == want_minus
                });
            }
        }
        let block = self
            .pair_blocks
            .iter()
            .find(|b| b.row == row)
            .expect("row index in range");
        tuple[block.left_pos] == tuple[block.right_pos]
    }
}

impl ColumnOracle for CouplingLp {
    fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn num_cols(&self) -> usize {
        self.num_atoms()
    }

    fn column_support(&self, atom: usize, out: &mut Vec<usize>) {
        out.clear();
        out.push(0);
        for block in &self.context_blocks {
            let mut bits = 0usize;
            for &pos in &block.positions {
                bits = bits << 1 | usize::from(self.atom_bit(atom, pos));
            }
            out.push(block.row_base + bits);
        }
        for pair in &self.pair_blocks {
            if self.atom_bit(atom, pair.left_pos) == self.atom_bit(atom, pair.right_pos) {
                out.push(pair.row);
            }
        }
    }
}

/// A feasible coupling: sparse masses over the outcome atoms, keyed by
/// outcome tuples in cell order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessCoupling {
    pub cells: Vec<(PropertyId, ContextId)>,
    pub table: BTreeMap<Vec<Outcome>, Probability>,
}

/// Farkas multipliers over the LP's constraint rows, in row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub coefficients: Vec<Rat>,
}

/// How a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Closed-form cyclic criterion.
    CyclicFormula,
    /// Exact LP feasibility.
    Lp,
    /// Unequal marginals within a connection refute the probability-1
    /// requirement directly (traditional mode, over-limit fallback only).
    MarginalMismatch,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::CyclicFormula => "cyclic-formula",
            Method::Lp => "lp",
            Method::MarginalMismatch => "marginal-mismatch",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decision record: exactly one of `witness`/`certificate` is present
/// when the method is [`Method::Lp`]; closed-form methods carry neither.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub mode: Mode,
    pub contextual: bool,
    pub method: Method,
    pub witness: Option<WitnessCoupling>,
    pub certificate: Option<Certificate>,
}

/// Decides contextuality via the LP only. Errors if the system exceeds
/// the cell limit. The returned witness or certificate has been verified
/// against the constraints.
pub fn decide_via_lp(system: &System, mode: Mode, max_cells: usize) -> Result<Verdict, LpError> {
    let lp = CouplingLp::build(system, mode, max_cells)?;
    let rhs = lp.rhs();
    match simplex::solve_feasibility(&lp, &rhs) {
        Feasibility::Feasible(solution) => {
            let table = solution
                .into_iter()
                .map(|(atom, mass)| {
                    (
                        lp.atom_tuple(atom),
                        Probability::new(mass).expect("feasible masses lie in [0,1]"),
                    )
                })
                .collect();
            let witness = WitnessCoupling {
                cells: lp.cells().to_vec(),
                table,
            };
            assert!(
                verify_witness(system, mode, &witness).expect("witness shape matches"),
                "solver returned a witness violating the constraints"
            );
            Ok(Verdict {
                mode,
                contextual: false,
                method: Method::Lp,
                witness: Some(witness),
                certificate: None,
            })
        }
        Feasibility::Infeasible(coefficients) => {
            let certificate = Certificate { coefficients };
            assert!(
                verify_certificate(system, mode, &certificate, max_cells)
                    .expect("certificate shape matches"),
                "solver returned a certificate that does not verify"
            );
            Ok(Verdict {
                mode,
                contextual: true,
                method: Method::Lp,
                witness: None,
                certificate: Some(certificate),
            })
        }
    }
}

/// Decides contextuality, routing through the closed-form cyclic
/// criterion where it applies.
///
/// Within the cell limit the LP always runs (witnesses and certificates
/// come from it), and on cyclic systems the closed-form verdict is
/// cross-checked against it. Over the limit, cyclic systems are decided
/// by the formula alone (in traditional mode only when consistently
/// connected, where the two definitions coincide); inconsistently
/// connected systems in traditional mode are contextual outright.
pub fn decide(system: &System, mode: Mode, max_cells: usize) -> Result<Verdict, LpError> {
    let cells = system.cell_count();
    let arrangement = detect_cyclic(system);
    let consistent = system.is_consistently_connected();
    let formula_applies = arrangement.is_some() && (mode == Mode::Cbd || consistent);
    let formula = if formula_applies {
        let a = arrangement.as_ref().expect("checked above");
        Some(cyclic_contextuality(system, a).expect("detected arrangement is valid"))
    } else {
        None
    };

    if cells <= max_cells {
        let verdict = decide_via_lp(system, mode, max_cells)?;
        if let Some(f) = formula {
            assert_eq!(
                f.contextual, verdict.contextual,
                "closed-form and LP verdicts disagree on a cyclic system"
            );
        }
        return Ok(verdict);
    }
    if let Some(f) = formula {
        return Ok(Verdict {
            mode,
            contextual: f.contextual,
            method: Method::CyclicFormula,
            witness: None,
            certificate: None,
        });
    }
    if mode == Mode::Traditional && !consistent {
        // any marginal discrepancy refutes equality with probability 1
        return Ok(Verdict {
            mode,
            contextual: true,
            method: Method::MarginalMismatch,
            witness: None,
            certificate: None,
        });
    }
    Err(LpError::TooManyCells {
        cells,
        limit: max_cells,
    })
}

/// Checks a witness against every LP constraint exactly. Never enumerates
/// atoms, so it works for systems of any size.
pub fn verify_witness(
    system: &System,
    mode: Mode,
    witness: &WitnessCoupling,
) -> Result<bool, LpError> {
    let lp = CouplingLp::build_unbounded(system, mode);
    if witness.cells != lp.cells {
        return Err(LpError::CellMismatch {
            got: witness.cells.len(),
            expected: lp.cells.len(),
        });
    }
    let n = lp.cells.len();
    for tuple in witness.table.keys() {
        if tuple.len() != n {
            return Err(LpError::WitnessArity {
                tuple: crate::model::tuple_key(tuple),
                got: tuple.len(),
                expected: n,
            });
        }
    }
    for (row_idx, row) in lp.rows.iter().enumerate() {
        let mut sum = Rat::zero();
        for (tuple, mass) in &witness.table {
            if lp.tuple_in_row(tuple, row_idx) {
                sum += mass.as_rat();
            }
        }
        if sum != row.rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks a Farkas certificate exactly: the coefficients must combine the
/// equality rows into `y . A_j <= 0` for every atom column while
/// `y . b > 0`. Enumerates all atoms, so the cell limit applies.
pub fn verify_certificate(
    system: &System,
    mode: Mode,
    certificate: &Certificate,
    max_cells: usize,
) -> Result<bool, LpError> {
    let lp = CouplingLp::build(system, mode, max_cells)?;
    let y = &certificate.coefficients;
    if y.len() != lp.rows.len() {
        return Err(LpError::DimensionMismatch {
            got: y.len(),
            expected: lp.rows.len(),
        });
    }
    let mut value = Rat::zero();
    for (yi, row) in y.iter().zip(&lp.rows) {
        if !yi.is_zero() && !row.rhs.is_zero() {
            value += yi * &row.rhs;
        }
    }
    if !value.is_positive() {
        return Ok(false);
    }
    let mut support = Vec::new();
    for atom in 0..lp.num_atoms() {
        lp.column_support(atom, &mut support);
        let mut s = Rat::zero();
        for &r in &support {
            if !y[r].is_zero() {
                s += &y[r];
            }
        }
        if s.is_positive() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{self, GalleryOutput, GalleryParams};
    use crate::rational::rat;
    use Outcome::{Minus as M, Plus as P};

    fn build_system(key: &str, params: GalleryParams) -> System {
        match gallery::build(key, &params).unwrap() {
            GalleryOutput::Probabilistic(s) => s,
            GalleryOutput::Constraints(_) => panic!("expected probabilistic system"),
        }
    }

    #[test]
    fn kcbs_lp_dimensions() {
        let s = build_system("kcbs", GalleryParams::default());
        let lp = CouplingLp::build(&s, Mode::Cbd, DEFAULT_MAX_CELLS).unwrap();
        assert_eq!(lp.num_cells(), 10);
        assert_eq!(lp.num_atoms(), 1 << 10);
        // normalization + 5 contexts * 4 tuples + 5 pair constraints
        assert_eq!(lp.rows().len(), 1 + 20 + 5);
    }

    #[test]
    fn ks4d_shaped_system_exceeds_default_limit() {
        let s = gallery::ks4d_probabilistic_system();
        assert_eq!(s.cell_count(), 36);
        match CouplingLp::build(&s, Mode::Cbd, DEFAULT_MAX_CELLS) {
            Err(LpError::TooManyCells { cells: 36, limit: 20 }) => {}
            other => panic!("expected size error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn single_cell_system_witness_is_the_table() {
        use crate::model::{ContextDistribution, ContextId, PropertyId};
        let table = [
            (vec![P], Probability::new(rat(2, 7)).unwrap()),
            (vec![M], Probability::new(rat(5, 7)).unwrap()),
        ]
        .into_iter()
        .collect();
        let ctx = ContextDistribution::new(
            ContextId::new("c").unwrap(),
            vec![PropertyId::new("a").unwrap()],
            table,
        )
        .unwrap();
        let s = System::new("one", vec![ctx]).unwrap();
        let v = decide_via_lp(&s, Mode::Cbd, DEFAULT_MAX_CELLS).unwrap();
        assert!(!v.contextual);
        let w = v.witness.unwrap();
        assert_eq!(w.table.get(&vec![P]).unwrap().as_rat(), &rat(2, 7));
        assert_eq!(w.table.get(&vec![M]).unwrap().as_rat(), &rat(5, 7));
    }

    #[test]
    fn deterministic_all_plus_system_is_noncontextual_in_both_modes() {
        let s = build_system(
            "szlg",
            GalleryParams {
                marginals: Some(vec![rat(1, 1), rat(1, 1), rat(1, 1)]),
                correlations: Some(vec![rat(1, 1), rat(1, 1), rat(1, 1)]),
            },
        );
        for mode in [Mode::Cbd, Mode::Traditional] {
            let v = decide_via_lp(&s, mode, DEFAULT_MAX_CELLS).unwrap();
            assert!(!v.contextual, "{mode}");
            let w = v.witness.unwrap();
            assert_eq!(w.table.len(), 1);
            let (tuple, mass) = w.table.iter().next().unwrap();
            assert!(tuple.iter().all(|o| *o == P));
            assert_eq!(mass.as_rat(), &rat(1, 1));
        }
    }

    #[test]
    fn magic_boxes_contextual_with_certificate() {
        let s = build_system("magic-boxes", GalleryParams::default());
        let v = decide_via_lp(&s, Mode::Cbd, DEFAULT_MAX_CELLS).unwrap();
        assert!(v.contextual);
        let cert = v.certificate.unwrap();
        assert!(verify_certificate(&s, Mode::Cbd, &cert, DEFAULT_MAX_CELLS).unwrap());
        // a zero vector is not a certificate
        let zero = Certificate {
            coefficients: vec![rat(0, 1); cert.coefficients.len()],
        };
        assert!(!verify_certificate(&s, Mode::Cbd, &zero, DEFAULT_MAX_CELLS).unwrap());
        // a certificate for a different system fails by dimension
        let other = build_system("kcbs", GalleryParams::default());
        assert!(matches!(
            verify_certificate(&other, Mode::Cbd, &cert, DEFAULT_MAX_CELLS),
            Err(LpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn epr_bb_spec_point_is_contextual_and_formula_agrees() {
        let s = build_system(
            "epr-bb",
            GalleryParams {
                correlations: Some(vec![rat(7, 10), rat(7, 10), rat(7, 10), rat(-7, 10)]),
                ..GalleryParams::default()
            },
        );
        let a = detect_cyclic(&s).unwrap();
        let f = cyclic_contextuality(&s, &a).unwrap();
        assert_eq!(f.lhs, rat(14, 5));
        assert_eq!(f.rhs, rat(2, 1));
        assert!(f.contextual);
        let v = decide(&s, Mode::Cbd, DEFAULT_MAX_CELLS).unwrap();
        assert!(v.contextual);
        assert_eq!(v.method, Method::Lp);
    }

    #[test]
    fn inconsistent_connection_is_contextual_in_traditional_mode() {
        let s = build_system(
            "magic-boxes",
            GalleryParams {
                marginals: Some(vec![rat(1, 2), rat(2, 5), rat(1, 2)]),
                ..GalleryParams::default()
            },
        );
        assert!(!s.is_consistently_connected());
        let v = decide_via_lp(&s, Mode::Traditional, DEFAULT_MAX_CELLS).unwrap();
        assert!(v.contextual);
    }

    #[test]
    fn perturbed_witness_fails_verification() {
        let s = build_system(
            "szlg",
            GalleryParams {
                correlations: Some(vec![rat(0, 1), rat(0, 1), rat(0, 1)]),
                ..GalleryParams::default()
            },
        );
        let v = decide_via_lp(&s, Mode::Cbd, DEFAULT_MAX_CELLS).unwrap();
        let mut witness = v.witness.unwrap();
        assert!(verify_witness(&s, Mode::Cbd, &witness).unwrap());
        // shift 1/1000 of mass between two atoms: context marginals break
        let keys: Vec<Vec<Outcome>> = witness.table.keys().cloned().collect();
        let donor = keys[0].clone();
        let mut receiver = donor.clone();
        receiver[0] = receiver[0].flipped();
        let eps = rat(1, 1000);
        let donated = witness.table.get(&donor).unwrap().as_rat() - &eps;
        witness.table.insert(donor, Probability::new(donated).unwrap());
        let received = witness
            .table
            .get(&receiver)
            .map(|p| p.as_rat().clone())
            .unwrap_or_else(Rat::zero)
            + &eps;
        witness.table.insert(receiver, Probability::new(received).unwrap());
        assert!(!verify_witness(&s, Mode::Cbd, &witness).unwrap());
    }

    #[test]
    fn product_coupling_fails_cbd_pair_constraints() {
        // consistently connected KCBS with nonzero correlations: the
        // product-of-contexts coupling reproduces the tables but not the
        // probability-1 pair equalities required at equal marginals.
        let s = build_system(
            "kcbs",
            GalleryParams {
                correlations: Some(vec![rat(-1, 2); 5]),
                ..GalleryParams::default()
            },
        );
        let lp = CouplingLp::build(&s, Mode::Cbd, DEFAULT_MAX_CELLS).unwrap();
        let n = lp.num_cells();
        // product over cells: every cell marginal is 1/2 here, so the
        // product coupling is uniform over all atoms — but uniform breaks
        // the context tables too; instead take the product of context
        // tables, which keeps tables intact and breaks pair equalities.
        let mut table: BTreeMap<Vec<Outcome>, Probability> = BTreeMap::new();
        for atom in 0..lp.num_atoms() {
            let tuple = lp.atom_tuple(atom);
            let mut mass = Rat::one();
            for block in 0..s.contexts().len() {
                let ctx = &s.contexts()[block];
                let positions: Vec<usize> = ctx
                    .properties()
                    .iter()
                    .map(|q| {
                        lp.cells()
                            .binary_search_by(|probe| {
                                probe.0.cmp(q).then_with(|| probe.1.cmp(ctx.context()))
                            })
                            .unwrap()
                    })
                    .collect();
                let sub: Vec<Outcome> = positions.iter().map(|&p| tuple[p]).collect();
                mass *= ctx.prob(&sub);
                if mass.is_zero() {
                    break;
                }
            }
            if !mass.is_zero() {
                table.insert(tuple, Probability::new(mass).unwrap());
            }
        }
        let witness = WitnessCoupling {
            cells: lp.cells().to_vec(),
            table,
        };
        assert_eq!(witness.table.len(), 1 << n); // full support product
        assert!(!verify_witness(&s, Mode::Cbd, &witness).unwrap());
    }

    #[test]
    fn over_limit_cyclic_system_bypasses_via_formula() {
        let s = build_system("kcbs", GalleryParams::default());
        // force the limit below the 10 cells of KCBS
        let v = decide(&s, Mode::Cbd, 4).unwrap();
        assert_eq!(v.method, Method::CyclicFormula);
        assert!(v.witness.is_none() && v.certificate.is_none());
        // traditional mode on a consistently connected cyclic system also
        // routes through the formula
        let vt = decide(&s, Mode::Traditional, 4).unwrap();
        assert_eq!(vt.method, Method::CyclicFormula);
        // inconsistently connected, over limit, traditional: decided by
        // the marginal mismatch itself
        let inconsistent = build_system(
            "magic-boxes",
            GalleryParams {
                marginals: Some(vec![rat(1, 2), rat(2, 5), rat(1, 2)]),
                ..GalleryParams::default()
            },
        );
        let vi = decide(&inconsistent, Mode::Traditional, 4).unwrap();
        assert_eq!(vi.method, Method::MarginalMismatch);
        assert!(vi.contextual);
        // non-cyclic over limit is an honest size error
        let ks = gallery::ks4d_probabilistic_system();
        assert!(matches!(
            decide(&ks, Mode::Cbd, DEFAULT_MAX_CELLS),
            Err(LpError::TooManyCells { .. })
        ));
    }
}
