//! Analysis reports and artifact documents.
//!
//! [`analyze`] runs the full pipeline on one system — connectedness,
//! cyclic detection, the closed-form criterion where it applies, and the
//! LP decision — and returns a structured [`Analysis`]. Rendering to the
//! `cbd-report/1` JSON document or to text is deterministic: identical
//! inputs and options produce byte-identical output (timing is the only
//! optional field and is supplied by the caller).
//!
//! Witness couplings and Farkas certificates are rendered as
//! `cbd-coupling/1` and `cbd-certificate/1` documents.

use serde::Serialize;

use crate::coupling::ConnectionCoupling;
use crate::cyclic::{cyclic_contextuality, detect_cyclic, CyclicArrangement, CyclicVerdict};
use crate::lp::{self, Certificate, CouplingLp, LpError, Method, Mode, Verdict, WitnessCoupling};
use crate::model::{tuple_key, Connection, System};
use crate::rational::{format_rat, Rat};

/// Everything the CLI and bindings need to render a report.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub system_name: String,
    pub cells: usize,
    pub connections: Vec<(Connection, Rat)>,
    pub consistent: bool,
    pub cyclic: Option<(CyclicArrangement, CyclicVerdict)>,
    pub verdicts: Vec<Verdict>,
}

/// Runs connectedness, cyclic detection, and the decision procedure for
/// each requested mode. On cyclic systems both the closed-form and the LP
/// verdict are recorded when both run; they are asserted to agree.
pub fn analyze(system: &System, modes: &[Mode], max_cells: usize) -> Result<Analysis, LpError> {
    let report = system.connectedness_report();
    let consistent = report.consistent;
    let cells = system.cell_count();
    let cyclic = detect_cyclic(system).map(|a| {
        let v = cyclic_contextuality(system, &a).expect("detected arrangement is valid");
        (a, v)
    });

    let mut verdicts = Vec::new();
    for &mode in modes {
        let formula = match &cyclic {
            Some((_, v)) if mode == Mode::Cbd || consistent => Some(v),
            _ => None,
        };
        if let Some(v) = formula {
            verdicts.push(Verdict {
                mode,
                contextual: v.contextual,
                method: Method::CyclicFormula,
                witness: None,
                certificate: None,
            });
        }
        if cells <= max_cells {
            let lp_verdict = lp::decide_via_lp(system, mode, max_cells)?;
            if let Some(v) = formula {
                assert_eq!(
                    v.contextual, lp_verdict.contextual,
                    "closed-form and LP verdicts disagree on a cyclic system"
                );
            }
            verdicts.push(lp_verdict);
        } else if formula.is_none() {
            if mode == Mode::Traditional && !consistent {
                verdicts.push(Verdict {
                    mode,
                    contextual: true,
                    method: Method::MarginalMismatch,
                    witness: None,
                    certificate: None,
                });
            } else {
                return Err(LpError::TooManyCells {
                    cells,
                    limit: max_cells,
                });
            }
        }
    }
    Ok(Analysis {
        system_name: system.name().to_string(),
        cells,
        connections: report.per_connection,
        consistent,
        cyclic,
        verdicts,
    })
}

/// Presentation metadata supplied by the caller.
#[derive(Debug, Clone, Default)]
pub struct ReportMeta {
    pub source: Option<String>,
    pub timing_ms: Option<u128>,
    /// Paths of emitted artifacts, recorded per (mode, kind).
    pub witness_paths: Vec<(Mode, String)>,
    pub certificate_paths: Vec<(Mode, String)>,
}

#[derive(Serialize)]
pub struct ReportDoc {
    format: &'static str,
    system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    cells: usize,
    consistently_connected: bool,
    connections: Vec<ConnectionDoc>,
    cyclic: Option<CyclicDoc>,
    verdicts: Vec<VerdictDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<u128>,
}

impl ReportDoc {
    /// Short per-verdict strings, for one-line summaries.
    pub fn verdict_lines(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .map(|v| {
                format!(
                    "[{}] {} ({})",
                    v.mode,
                    if v.contextual { "contextual" } else { "noncontextual" },
                    v.method
                )
            })
            .collect()
    }
}

#[derive(Serialize)]
struct ConnectionDoc {
    property: String,
    entries: Vec<ConnectionEntryDoc>,
    delta: String,
}

#[derive(Serialize)]
struct ConnectionEntryDoc {
    context: String,
    p: String,
}

#[derive(Serialize)]
struct CyclicDoc {
    rank: usize,
    properties: Vec<String>,
    contexts: Vec<String>,
    lhs: String,
    rhs: String,
    slack: String,
    contextual: bool,
}

#[derive(Serialize)]
struct VerdictDoc {
    mode: String,
    method: String,
    contextual: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<String>,
}

/// Builds the `cbd-report/1` document.
pub fn report_doc(analysis: &Analysis, meta: &ReportMeta) -> ReportDoc {
    ReportDoc {
        format: "cbd-report/1",
        system: analysis.system_name.clone(),
        source: meta.source.clone(),
        cells: analysis.cells,
        consistently_connected: analysis.consistent,
        connections: analysis
            .connections
            .iter()
            .map(|(c, delta)| ConnectionDoc {
                property: c.property.as_str().to_string(),
                entries: c
                    .entries
                    .iter()
                    .map(|e| ConnectionEntryDoc {
                        context: e.context.as_str().to_string(),
                        p: e.p.to_string(),
                    })
                    .collect(),
                delta: format_rat(delta),
            })
            .collect(),
        cyclic: analysis.cyclic.as_ref().map(|(a, v)| CyclicDoc {
            rank: a.rank(),
            properties: a.properties().iter().map(|q| q.as_str().to_string()).collect(),
            contexts: a.contexts().iter().map(|c| c.as_str().to_string()).collect(),
            lhs: format_rat(&v.lhs),
            rhs: format_rat(&v.rhs),
            slack: format_rat(&v.slack),
            contextual: v.contextual,
        }),
        verdicts: analysis
            .verdicts
            .iter()
            .map(|v| VerdictDoc {
                mode: v.mode.to_string(),
                method: v.method.to_string(),
                contextual: v.contextual,
                witness: meta
                    .witness_paths
                    .iter()
                    .find(|(m, _)| *m == v.mode && v.witness.is_some())
                    .map(|(_, p)| p.clone()),
                certificate: meta
                    .certificate_paths
                    .iter()
                    .find(|(m, _)| *m == v.mode && v.certificate.is_some())
                    .map(|(_, p)| p.clone()),
            })
            .collect(),
        timing_ms: meta.timing_ms,
    }
}

pub fn report_json(analysis: &Analysis, meta: &ReportMeta) -> String {
    serde_json::to_string_pretty(&report_doc(analysis, meta))
        .expect("report serialization cannot fail")
}

/// Human-readable rendering of the same content.
pub fn report_text(analysis: &Analysis, meta: &ReportMeta) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("system: {}", analysis.system_name));
    if let Some(source) = &meta.source {
        line(format!("source: {source}"));
    }
    line(format!("cells: {}", analysis.cells));
    line(format!(
        "consistently connected: {}",
        if analysis.consistent { "yes" } else { "no" }
    ));
    line("connections:".to_string());
    for (c, delta) in &analysis.connections {
        let entries: Vec<String> = c
            .entries
            .iter()
            .map(|e| format!("{}={}", e.context, e.p))
            .collect();
        line(format!(
            "  {}: {} (delta {})",
            c.property,
            entries.join(", "),
            format_rat(delta)
        ));
    }
    match &analysis.cyclic {
        Some((a, v)) => {
            let props: Vec<&str> = a.properties().iter().map(|q| q.as_str()).collect();
            line(format!("cyclic: rank {} ({})", a.rank(), props.join(" - ")));
            line(format!(
                "  lhs {} vs rhs {} (slack {})",
                format_rat(&v.lhs),
                format_rat(&v.rhs),
                format_rat(&v.slack)
            ));
        }
        None => line("cyclic: no".to_string()),
    }
    line("verdicts:".to_string());
    for v in &analysis.verdicts {
        line(format!(
            "  [{}] {} (method: {})",
            v.mode,
            if v.contextual { "contextual" } else { "noncontextual" },
            v.method,
        ));
    }
    for (mode, path) in &meta.witness_paths {
        line(format!("witness [{mode}]: {path}"));
    }
    for (mode, path) in &meta.certificate_paths {
        line(format!("certificate [{mode}]: {path}"));
    }
    if let Some(ms) = meta.timing_ms {
        line(format!("timing: {ms} ms"));
    }
    out
}

// ---------------------------------------------------------------------------
// Artifact documents
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct CouplingDoc {
    format: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    property: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contexts: Option<Vec<String>>,
    coordinates: Vec<CoordinateDoc>,
    table: std::collections::BTreeMap<String, String>,
}

#[derive(Serialize)]
struct CoordinateDoc {
    property: String,
    context: String,
}

/// A connection coupling (for example the multimaximal staircase) as a
/// `cbd-coupling/1` document, with the ordered context list.
pub fn coupling_doc_for_connection(coupling: &ConnectionCoupling) -> CouplingDoc {
    CouplingDoc {
        format: "cbd-coupling/1",
        system: None,
        property: Some(coupling.property().as_str().to_string()),
        contexts: Some(
            coupling
                .contexts()
                .iter()
                .map(|c| c.as_str().to_string())
                .collect(),
        ),
        coordinates: coupling
            .contexts()
            .iter()
            .map(|c| CoordinateDoc {
                property: coupling.property().as_str().to_string(),
                context: c.as_str().to_string(),
            })
            .collect(),
        table: coupling
            .table()
            .iter()
            .map(|(t, p)| (tuple_key(t), p.to_string()))
            .collect(),
    }
}

/// A full-system witness coupling as a `cbd-coupling/1` document.
pub fn coupling_doc_for_witness(system_name: &str, witness: &WitnessCoupling) -> CouplingDoc {
    CouplingDoc {
        format: "cbd-coupling/1",
        system: Some(system_name.to_string()),
        property: None,
        contexts: None,
        coordinates: witness
            .cells
            .iter()
            .map(|(q, c)| CoordinateDoc {
                property: q.as_str().to_string(),
                context: c.as_str().to_string(),
            })
            .collect(),
        table: witness
            .table
            .iter()
            .map(|(t, p)| (tuple_key(t), p.to_string()))
            .collect(),
    }
}

#[derive(Serialize)]
pub struct CertificateDoc {
    format: &'static str,
    system: String,
    mode: String,
    constraints: Vec<String>,
    coefficients: Vec<String>,
}

/// A Farkas certificate as a `cbd-certificate/1` document. Constraint
/// descriptions follow the LP's canonical row order, so the coefficient
/// vector can be re-verified against a rebuilt LP.
pub fn certificate_doc(system: &System, mode: Mode, certificate: &Certificate) -> CertificateDoc {
    let lp = CouplingLp::build(system, mode, usize::MAX).expect("no limit applied");
    CertificateDoc {
        format: "cbd-certificate/1",
        system: system.name().to_string(),
        mode: mode.to_string(),
        constraints: lp.rows().iter().map(|r| r.kind.to_string()).collect(),
        coefficients: certificate.coefficients.iter().map(format_rat).collect(),
    }
}

pub fn to_json_pretty<T: Serialize>(doc: &T) -> String {
    serde_json::to_string_pretty(doc).expect("document serialization cannot fail")
}
