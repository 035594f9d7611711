//! Command-line front end. Exit codes for decision subcommands: 0 means
//! extendable, 1 not extendable, 2 inconclusive; anything above 2 is an
//! error or a failed check.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cert::{
    make_certificate, parse_certificate, reverify, serialize_certificate, FORMAT_TAG,
};
use crate::collapse::CollapseConfig;
use crate::dot::{emit_collapse, emit_v, emit_wf};
use crate::gate;
use crate::model::{parse_instance, validate, LabeledReebGraph};
use crate::search::{brute_force, census, decide, SearchLimits};
use crate::symbol::{apply_overrides, SymbolTable};

#[derive(Parser)]
#[command(
    name = "reebext",
    about = "Decide non-singular extensions of circle-valued Morse functions on surfaces, given as labeled Reeb graphs",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SearchOpts {
    /// Bound on simultaneous closed level-surface components.
    #[arg(long)]
    max_closed_tokens: Option<usize>,
    /// Budget on explored search states.
    #[arg(long)]
    max_states: Option<u64>,
    /// Require circle components to map onto vertexless circles.
    #[arg(long)]
    strict_circles: bool,
    /// Pin byte-deterministic output (the search is deterministic anyway).
    #[arg(long)]
    deterministic: bool,
    /// Optional transition-table override file.
    #[arg(long)]
    table: Option<PathBuf>,
}

impl SearchOpts {
    fn limits(&self) -> SearchLimits {
        let mut limits = SearchLimits {
            strict_circles: self.strict_circles,
            deterministic: self.deterministic,
            ..SearchLimits::default()
        };
        if let Some(k) = self.max_closed_tokens {
            limits.max_closed_tokens = Some(k);
        }
        if let Some(b) = self.max_states {
            limits.max_states = b;
        }
        limits
    }

    fn table(&self) -> Result<SymbolTable, String> {
        let mut table = SymbolTable::shipped();
        if let Some(path) = &self.table {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            apply_overrides(&mut table, &text).map_err(|e| e.to_string())?;
            let issues = table.consistency_check();
            if !issues.is_empty() {
                return Err(format!(
                    "table override is inconsistent: {}",
                    issues.join("; ")
                ));
            }
        }
        Ok(table)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderWhat {
    Wf,
    V,
    Collapse,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderFormat {
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an instance and report every violated invariant.
    Validate { instance: PathBuf },
    /// Decide extendability; exit 0/1/2 for the verdict.
    Decide {
        instance: PathBuf,
        #[command(flatten)]
        opts: SearchOpts,
    },
    /// Decide and write a certificate.
    Certify {
        instance: PathBuf,
        /// Certificate output path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: SearchOpts,
    },
    /// Run the naive brute-force oracle instead of the search.
    Oracle {
        instance: PathBuf,
        #[command(flatten)]
        opts: SearchOpts,
    },
    /// Enumerate all small instances and cross-check the search, the
    /// oracle, rotations, the mirror and the linear reduction.
    Census {
        #[arg(long, default_value_t = 4)]
        max_slots: usize,
        #[arg(long, default_value_t = 1)]
        max_wraps: u32,
        #[arg(long, default_value_t = 3)]
        max_per_gap: usize,
        #[command(flatten)]
        opts: SearchOpts,
    },
    /// Re-verify a certificate and replay its assembly trace.
    Simulate {
        certificate: PathBuf,
        #[arg(long)]
        strict_circles: bool,
    },
    /// Render the instance, the quotient graph, or the collapse as DOT.
    Render {
        input: PathBuf,
        #[arg(long, value_enum)]
        what: RenderWhat,
        #[arg(long, value_enum, default_value = "dot")]
        format: RenderFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: SearchOpts,
    },
    /// Run the fixture and property gate.
    Selftest {
        /// Shrink the census for a fast run.
        #[arg(long)]
        quick: bool,
    },
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            4
        }
    }
}

fn load_instance(path: &Path) -> Result<LabeledReebGraph, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_instance(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn checked_instance(path: &Path) -> Result<LabeledReebGraph, String> {
    let graph = load_instance(path)?;
    let report = validate(&graph);
    if !report.is_valid() {
        return Err(report
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("\n"));
    }
    Ok(graph)
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_command(command: Command) -> Result<i32, String> {
    match command {
        Command::Validate { instance } => {
            let graph = load_instance(&instance)?;
            let report = validate(&graph);
            if report.is_valid() {
                println!(
                    "valid: {} slots, {} edges, {} circles",
                    graph.slot_count,
                    graph.edges.len(),
                    graph.circles.len()
                );
                let inv = graph.surface_invariants();
                println!(
                    "chi {} over {} surface components",
                    inv.total_chi,
                    inv.components.len()
                );
                Ok(0)
            } else {
                for v in &report.violations {
                    println!("violation: {v}");
                }
                Ok(3)
            }
        }
        Command::Decide { instance, opts } => {
            let graph = checked_instance(&instance)?;
            let table = opts.table()?;
            let (verdict, stats) =
                decide(&graph, &table, &opts.limits()).map_err(|e| e.to_string())?;
            println!("{} ({} states)", verdict.name(), stats.states_explored);
            Ok(verdict.exit_code())
        }
        Command::Certify {
            instance,
            out,
            opts,
        } => {
            let graph = checked_instance(&instance)?;
            let table = opts.table()?;
            let (verdict, _) = decide(&graph, &table, &opts.limits()).map_err(|e| e.to_string())?;
            if let Some(solution) = verdict.solution() {
                let cert = make_certificate(&graph, solution);
                fs::write(&out, serialize_certificate(&cert))
                    .map_err(|e| format!("{}: {e}", out.display()))?;
                println!("extendable; certificate written to {}", out.display());
            } else {
                println!("{}", verdict.name());
            }
            Ok(verdict.exit_code())
        }
        Command::Oracle { instance, opts } => {
            let graph = checked_instance(&instance)?;
            let table = opts.table()?;
            let verdict = brute_force(&graph, &table, &opts.limits()).map_err(|e| e.to_string())?;
            println!("{}", verdict.name());
            Ok(verdict.exit_code())
        }
        Command::Census {
            max_slots,
            max_wraps,
            max_per_gap,
            opts,
        } => {
            let table = opts.table()?;
            let report = census(max_slots, max_wraps, max_per_gap, &table, &opts.limits());
            print!("{}", report.render());
            Ok(if report.clean() { 0 } else { 3 })
        }
        Command::Simulate {
            certificate,
            strict_circles,
        } => {
            let text = fs::read_to_string(&certificate)
                .map_err(|e| format!("{}: {e}", certificate.display()))?;
            let table = SymbolTable::shipped();
            let cert = parse_certificate(&text, &table).map_err(|e| e.to_string())?;
            let config = CollapseConfig { strict_circles };
            let issues = reverify(&cert, &table, &config);
            if issues.is_empty() {
                let trace = &cert.trace;
                let report = crate::assembly::simulate(
                    &cert.graph,
                    &table,
                    trace,
                    &cert.solution.collapse,
                    &cert.solution.vgraph,
                    &cert.solution.labeling,
                )
                .map_err(|e| e.to_string())?;
                for (slot, delta) in &report.chi_ledger {
                    println!("slot {slot}: chi {delta:+}");
                }
                let m = crate::assembly::manifold_report(&cert.graph, trace, &cert.solution.vgraph)
                    .map_err(|e| e.to_string())?;
                println!(
                    "ok: {} component(s), chi {}, parts {:?}",
                    m.component_count, m.chi, m.parts
                );
                Ok(0)
            } else {
                for issue in &issues {
                    println!("violation: {issue}");
                }
                Ok(3)
            }
        }
        Command::Render {
            input,
            what,
            format: RenderFormat::Dot,
            out,
            opts,
        } => {
            let text =
                fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let table = opts.table()?;
            let is_cert = text.lines().next().map(str::trim) == Some(FORMAT_TAG);
            let (graph, solution) = if is_cert {
                let cert = parse_certificate(&text, &table).map_err(|e| e.to_string())?;
                (cert.graph.clone(), Some(cert.solution.clone()))
            } else {
                (parse_instance(&text).map_err(|e| e.to_string())?, None)
            };
            let rendered = match what {
                RenderWhat::Wf => emit_wf(&graph),
                RenderWhat::V | RenderWhat::Collapse => {
                    let solution = match solution {
                        Some(s) => s,
                        None => {
                            let (verdict, _) = decide(&graph, &table, &opts.limits())
                                .map_err(|e| e.to_string())?;
                            match verdict.solution() {
                                Some(s) => s.clone(),
                                None => {
                                    return Err(format!(
                                        "instance is {}; no quotient graph to render",
                                        verdict.name()
                                    ))
                                }
                            }
                        }
                    };
                    if what == RenderWhat::V {
                        emit_v(&graph, &solution)
                    } else {
                        emit_collapse(&graph, &solution)
                    }
                }
            };
            write_or_print(&out, &rendered)?;
            Ok(0)
        }
        Command::Selftest { quick } => {
            let max_slots = if quick { 3 } else { 4 };
            let results = gate::run_all(max_slots);
            let mut ok = true;
            for r in &results {
                println!("{}", r.line());
                ok &= r.passed;
            }
            Ok(if ok { 0 } else { 3 })
        }
    }
}
