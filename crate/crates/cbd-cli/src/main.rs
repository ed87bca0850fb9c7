//! `cbd` — contextuality analysis of systems of binary measurements.
//!
//! Subcommands: `validate`, `analyze`, `coupling`, `assign`, and
//! `examples`. Verdicts are findings reported in the output document,
//! never exit codes: exit 0 means the analysis completed, exit 1 is an
//! input or validation error, exit 2 is a size-limit refusal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cbd_core::coupling::construct_multimaximal;
use cbd_core::deterministic::{ConstraintError, ConstraintSystem, ParityOutcome};
use cbd_core::gallery::{self, GalleryOutput, GalleryParams};
use cbd_core::lp::{LpError, Mode, DEFAULT_MAX_CELLS};
use cbd_core::model::System;
use cbd_core::rational::parse_rat;
use cbd_core::report::{self, ReportMeta};

const EXIT_INPUT: u8 = 1;
const EXIT_SIZE: u8 = 2;

#[derive(Parser)]
#[command(name = "cbd", version, about = "Contextuality analysis of systems of binary measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a cbd-system/1 or cbd-constraints/1 document.
    Validate { file: PathBuf },
    /// Analyze a system file, or a directory of them with --batch.
    Analyze {
        path: PathBuf,
        /// Decision mode.
        #[arg(long, value_enum, default_value_t = ModeArg::Cbd)]
        mode: ModeArg,
        /// Cell limit for the LP (default 20; CBD_MAX_CELLS overrides).
        #[arg(long)]
        max_cells: Option<usize>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        /// Write the witness coupling (single file, single mode only).
        #[arg(long, value_name = "PATH")]
        emit_witness: Option<PathBuf>,
        /// Write the infeasibility certificate (single file, single mode only).
        #[arg(long, value_name = "PATH")]
        emit_certificate: Option<PathBuf>,
        /// Analyze every .json file in a directory.
        #[arg(long)]
        batch: bool,
        /// Omit the timing field, making reports byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Emit the multimaximal coupling of one connection.
    Coupling {
        file: PathBuf,
        /// Property label selecting the connection.
        #[arg(long)]
        property: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Search for a satisfying 0/1 assignment of a constraint system.
    Assign {
        file: PathBuf,
        /// Count all satisfying assignments.
        #[arg(long)]
        count: bool,
    },
    /// Built-in example systems.
    Examples {
        #[command(subcommand)]
        command: ExamplesCommand,
    },
}

#[derive(Subcommand)]
enum ExamplesCommand {
    /// List the available keys.
    List {
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Build one example and write its document.
    Emit {
        key: String,
        /// Comma-separated marginal probabilities (rational or decimal).
        #[arg(long, allow_hyphen_values = true)]
        marginals: Option<String>,
        /// Comma-separated product expectations, one per context.
        #[arg(long, allow_hyphen_values = true)]
        correlations: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cbd,
    Traditional,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Cbd => vec![Mode::Cbd],
            ModeArg::Traditional => vec![Mode::Traditional],
            ModeArg::Both => vec![Mode::Cbd, Mode::Traditional],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn size(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_SIZE,
            message: message.into(),
        }
    }

    fn from_lp(err: LpError) -> Self {
        match err {
            LpError::TooManyCells { .. } => CliError::size(err.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are not errors
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(EXIT_INPUT);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Analyze {
            path,
            mode,
            max_cells,
            format,
            emit_witness,
            emit_certificate,
            batch,
            no_timing,
        } => {
            let limit = resolve_max_cells(max_cells)?;
            let options = AnalyzeOptions {
                modes: mode.modes(),
                limit,
                format,
                emit_witness,
                emit_certificate,
                no_timing,
            };
            if batch {
                analyze_batch(&path, &options)
            } else {
                analyze_single(&path, &options)
            }
        }
        Command::Coupling {
            file,
            property,
            output,
        } => coupling(&file, &property, output.as_deref()),
        Command::Assign { file, count } => assign(&file, count),
        Command::Examples { command } => match command {
            ExamplesCommand::List { format } => examples_list(format),
            ExamplesCommand::Emit {
                key,
                marginals,
                correlations,
                output,
            } => examples_emit(&key, marginals.as_deref(), correlations.as_deref(), output.as_deref()),
        },
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn resolve_max_cells(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("CBD_MAX_CELLS") {
        Ok(raw) => raw
            .parse::<usize>()
            .map_err(|_| CliError::input(format!("CBD_MAX_CELLS is not a number: {raw:?}"))),
        Err(_) => Ok(DEFAULT_MAX_CELLS),
    }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn validate(path: &Path) -> Result<(), CliError> {
    let text = read_file(path)?;
    let format = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("format").and_then(|f| f.as_str()).map(String::from));
    match format.as_deref() {
        Some("cbd-constraints/1") => {
            let cs = ConstraintSystem::from_json_str(&text)
                .map_err(|e| CliError::input(e.to_string()))?;
            println!(
                "ok: constraint system with {} properties, {} constraints",
                cs.properties().len(),
                cs.constraints().len()
            );
        }
        _ => {
            let system =
                System::from_json_str(&text).map_err(|e| CliError::input(e.to_string()))?;
            println!(
                "ok: system {:?} with {} contexts, {} cells",
                system.name(),
                system.contexts().len(),
                system.cell_count()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
    modes: Vec<Mode>,
    limit: usize,
    format: FormatArg,
    emit_witness: Option<PathBuf>,
    emit_certificate: Option<PathBuf>,
    no_timing: bool,
}

fn analyze_single(path: &Path, options: &AnalyzeOptions) -> Result<(), CliError> {
    if path.is_dir() {
        return Err(CliError::input(format!(
            "{} is a directory (use --batch)",
            path.display()
        )));
    }
    let text = read_file(path)?;
    let system = System::from_json_str(&text).map_err(|e| CliError::input(e.to_string()))?;
    let started = Instant::now();
    let analysis =
        report::analyze(&system, &options.modes, options.limit).map_err(CliError::from_lp)?;
    let timing_ms = (!options.no_timing).then(|| started.elapsed().as_millis());

    let mut meta = ReportMeta {
        source: Some(path.display().to_string()),
        timing_ms,
        ..ReportMeta::default()
    };
    if let Some(out) = &options.emit_witness {
        let entry = analysis
            .verdicts
            .iter()
            .find_map(|v| v.witness.as_ref().map(|w| (v.mode, w)));
        match entry {
            Some((mode, witness)) => {
                let doc = report::coupling_doc_for_witness(&analysis.system_name, witness);
                write_file(out, &(report::to_json_pretty(&doc) + "\n"))?;
                meta.witness_paths.push((mode, out.display().to_string()));
            }
            None => eprintln!("note: no witness available (system is contextual)"),
        }
    }
    if let Some(out) = &options.emit_certificate {
        let entry = analysis
            .verdicts
            .iter()
            .find_map(|v| v.certificate.as_ref().map(|c| (v.mode, c)));
        match entry {
            Some((mode, certificate)) => {
                let doc = report::certificate_doc(&system, mode, certificate);
                write_file(out, &(report::to_json_pretty(&doc) + "\n"))?;
                meta.certificate_paths.push((mode, out.display().to_string()));
            }
            None => eprintln!("note: no certificate available (system is noncontextual)"),
        }
    }

    match options.format {
        FormatArg::Json => println!("{}", report::report_json(&analysis, &meta)),
        FormatArg::Text => print!("{}", report::report_text(&analysis, &meta)),
    }
    Ok(())
}

#[derive(Serialize)]
struct BatchEntry {
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<report::ReportDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct BatchDoc {
    format: &'static str,
    reports: Vec<BatchEntry>,
    summary: BTreeMap<String, usize>,
}

fn analyze_batch(path: &Path, options: &AnalyzeOptions) -> Result<(), CliError> {
    if !path.is_dir() {
        return Err(CliError::input(format!(
            "--batch requires a directory, {} is not one",
            path.display()
        )));
    }
    if options.emit_witness.is_some() || options.emit_certificate.is_some() {
        return Err(CliError::input(
            "--emit-witness/--emit-certificate are not available in batch mode",
        ));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();

    let mut entries = Vec::new();
    let mut summary: BTreeMap<String, usize> = BTreeMap::new();
    let mut saw_input_error = false;
    let mut saw_size_error = false;
    *summary.entry("files".to_string()).or_default() = files.len();
    for file in &files {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.display().to_string());
        let outcome = read_file(file).and_then(|text| {
            let system =
                System::from_json_str(&text).map_err(|e| CliError::input(e.to_string()))?;
            let started = Instant::now();
            let analysis = report::analyze(&system, &options.modes, options.limit)
                .map_err(CliError::from_lp)?;
            let timing_ms = (!options.no_timing).then(|| started.elapsed().as_millis());
            let meta = ReportMeta {
                source: Some(name.clone()),
                timing_ms,
                ..ReportMeta::default()
            };
            Ok((analysis, meta))
        });
        match outcome {
            Ok((analysis, meta)) => {
                let key = if analysis.verdicts.iter().any(|v| v.contextual) {
                    "contextual"
                } else {
                    "noncontextual"
                };
                *summary.entry(key.to_string()).or_default() += 1;
                entries.push(BatchEntry {
                    file: name,
                    report: Some(report::report_doc(&analysis, &meta)),
                    error: None,
                });
            }
            Err(err) => {
                if err.code == EXIT_SIZE {
                    saw_size_error = true;
                } else {
                    saw_input_error = true;
                }
                *summary.entry("errors".to_string()).or_default() += 1;
                entries.push(BatchEntry {
                    file: name,
                    report: None,
                    error: Some(err.message),
                });
            }
        }
    }

    let doc = BatchDoc {
        format: "cbd-batch-report/1",
        reports: entries,
        summary,
    };
    match options.format {
        FormatArg::Json => println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("batch serialization cannot fail")
        ),
        FormatArg::Text => {
            for entry in &doc.reports {
                match (&entry.report, &entry.error) {
                    (Some(report), _) => {
                        let verdicts: Vec<String> = report
                            .verdict_lines()
                            .into_iter()
                            .collect();
                        println!("{}: {}", entry.file, verdicts.join("; "));
                    }
                    (None, Some(error)) => println!("{}: error: {}", entry.file, error),
                    _ => unreachable!(),
                }
            }
            let summary: Vec<String> = doc
                .summary
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            println!("summary: {}", summary.join(" "));
        }
    }
    if saw_input_error {
        Err(CliError::input("one or more files failed to analyze"))
    } else if saw_size_error {
        Err(CliError::size("one or more files exceeded the cell limit"))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// coupling
// ---------------------------------------------------------------------------

fn coupling(path: &Path, property: &str, output: Option<&Path>) -> Result<(), CliError> {
    let text = read_file(path)?;
    let system = System::from_json_str(&text).map_err(|e| CliError::input(e.to_string()))?;
    let connection = system
        .connections()
        .into_iter()
        .find(|c| c.property.as_str() == property)
        .ok_or_else(|| {
            CliError::input(format!("property {property:?} is not measured in this system"))
        })?;
    let coupling = construct_multimaximal(&connection);
    let doc = report::coupling_doc_for_connection(&coupling);
    let rendered = report::to_json_pretty(&doc) + "\n";
    match output {
        Some(out) => write_file(out, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// assign
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AssignmentDoc {
    format: &'static str,
    satisfiable: bool,
    assignment: Option<BTreeMap<String, u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parity: Option<ParityDoc>,
}

#[derive(Serialize)]
struct ParityDoc {
    outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    contexts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn assign(path: &Path, count: bool) -> Result<(), CliError> {
    let text = read_file(path)?;
    let cs = ConstraintSystem::from_json_str(&text).map_err(|e| CliError::input(e.to_string()))?;
    let parity = match cs.parity_check() {
        ParityOutcome::Contradiction(record) => Some(ParityDoc {
            outcome: "contradiction",
            contexts: Some(record.num_contexts),
            reason: None,
        }),
        ParityOutcome::Inconclusive(record) => Some(ParityDoc {
            outcome: "inconclusive",
            contexts: Some(record.num_contexts),
            reason: None,
        }),
        ParityOutcome::Inapplicable { reason } => Some(ParityDoc {
            outcome: "inapplicable",
            contexts: None,
            reason: Some(reason),
        }),
    };
    let outcome = cs.assignment_search(count).map_err(|e| match e {
        ConstraintError::TooManyProperties { .. } => CliError::size(e.to_string()),
        other => CliError::input(other.to_string()),
    })?;
    let doc = AssignmentDoc {
        format: "cbd-assignment/1",
        satisfiable: outcome.assignment.is_some(),
        assignment: outcome.assignment.map(|a| {
            a.into_iter()
                .map(|(q, v)| (q.as_str().to_string(), u8::from(v)))
                .collect()
        }),
        count: outcome.count,
        parity,
    };
    println!("{}", report::to_json_pretty(&doc));
    Ok(())
}

// ---------------------------------------------------------------------------
// examples
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ExampleEntryDoc {
    key: &'static str,
    kind: &'static str,
    description: &'static str,
}

fn examples_list(format: FormatArg) -> Result<(), CliError> {
    let entries = gallery::entries();
    match format {
        FormatArg::Json => {
            let docs: Vec<ExampleEntryDoc> = entries
                .iter()
                .map(|e| ExampleEntryDoc {
                    key: e.key,
                    kind: e.kind,
                    description: e.description,
                })
                .collect();
            println!("{}", report::to_json_pretty(&docs));
        }
        FormatArg::Text => {
            for e in entries {
                println!("{} ({}): {}", e.key, e.kind, e.description);
            }
        }
    }
    Ok(())
}

fn parse_rat_list(raw: &str) -> Result<Vec<cbd_core::rational::Rat>, CliError> {
    raw.split(',')
        .map(|tok| {
            parse_rat(tok.trim()).map_err(|e| CliError::input(format!("bad rational {tok:?}: {e}")))
        })
        .collect()
}

fn examples_emit(
    key: &str,
    marginals: Option<&str>,
    correlations: Option<&str>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let params = GalleryParams {
        marginals: marginals.map(parse_rat_list).transpose()?,
        correlations: correlations.map(parse_rat_list).transpose()?,
    };
    let rendered = match gallery::build(key, &params).map_err(|e| CliError::input(e.to_string()))? {
        GalleryOutput::Probabilistic(system) => system.to_json_string() + "\n",
        GalleryOutput::Constraints(cs) => cs.to_json_string() + "\n",
    };
    match output {
        Some(out) => write_file(out, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}
