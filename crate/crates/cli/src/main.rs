//! `qgraph` — spectra, secular polynomials, eigenfunction traces and
//! genericity experiments for compact metric graphs with standard vertex
//! conditions.
//!
//! Outputs are deterministic: all randomness flows through `--seed`, data
//! files carry no timestamps, and identical configurations produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgraph_core::*;

/// Exit 1: validation problems (arguments, files, graph shape).
/// Exit 2: numerical failures (rank ambiguity, convention self-checks).
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

const TOLERANCE_NOTES: &str = "\
Default tolerances:
  --tol-onmanifold 1e-10   on-manifold residual coefficient (times 2N)
  --tol-match      1e-8    eigenvalue matching band, scaled by (1 + k)
  k location       1e-12   absolute bisection width in the solver
  root merging     1e-9    roots closer than this merge into one record
  non-vanishing    1e-6    magnitude below which a trace entry counts as zero
  classification   1e-7    symmetry/support decisions on normalized traces";

#[derive(Parser)]
#[command(
    name = "qgraph",
    version,
    about = "Laplacian spectra and eigenfunction traces of compact metric graphs",
    after_help = TOLERANCE_NOTES
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverFlags {
    /// On-manifold residual coefficient (times 2N).
    #[arg(long = "tol-onmanifold", default_value_t = 1e-10)]
    tol_onmanifold: f64,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            on_manifold_coef: self.tol_onmanifold,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the spectrum in (kmin, kmax]: spectrum CSV plus a Weyl-law report.
    Solve {
        /// Graph description document (JSON).
        graph: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        kmin: f64,
        #[arg(long)]
        kmax: f64,
        #[command(flatten)]
        solver: SolverFlags,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `csv` emits the spectrum table (Weyl report on stderr);
        /// `report` bundles both into one document.
        #[arg(long, value_parser = ["csv", "report"], default_value = "csv")]
        format: String,
    },
    /// Export the eigenfunction trace at an eigenvalue, by value or by index.
    Trace {
        graph: PathBuf,
        /// Evaluate at this k (must solve the secular equation).
        #[arg(long, conflicts_with = "index")]
        k: Option<f64>,
        /// 1-based index into the ascending spectrum of (kmin, kmax].
        #[arg(long, requires = "kmax")]
        index: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        kmin: f64,
        #[arg(long)]
        kmax: Option<f64>,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the loop / mandarin / flower factorization identities.
    VerifyFactor {
        graph: PathBuf,
        /// Torus sample count for the mandarin proportionality check.
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand the secular polynomial into its monomial coefficient table.
    Expand {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density of an eigenpair property along the spectrum.
    Density {
        graph: PathBuf,
        #[arg(long, value_parser = ["simple", "nonvanishing", "loop-supported"])]
        property: String,
        #[arg(long)]
        kmax: f64,
        /// Draw random edge lengths from [range-min, range-max) with this
        /// seed; without it the lengths in the graph file are used.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        range_min: f64,
        #[arg(long, default_value_t = 2.0)]
        range_max: f64,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matched fraction of the spectra of two graphs with shared lengths.
    Compare {
        graph: PathBuf,
        other: PathBuf,
        #[arg(long)]
        kmax: f64,
        /// Shared random lengths; without it the first graph's lengths are
        /// applied to both.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        range_min: f64,
        #[arg(long, default_value_t = 2.0)]
        range_max: f64,
        /// Matching band, scaled by (1 + k).
        #[arg(long = "tol-match", default_value_t = 1e-8)]
        tol_match: f64,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve {
            graph,
            kmin,
            kmax,
            solver,
            out,
            format,
        } => {
            let g = load_graph(&graph)?;
            require_assumption(&g)?;
            let bs = build_system(&g)?;
            let window = solve_spectrum_with(&bs, &g.lengths(), kmin, kmax, &solver.config())
                .map_err(map_solver)?;
            let weyl = weyl_check(&window);
            let weyl_text = format!(
                "weyl-report\nwindow: ({kmin:.16e}, {kmax:.16e}]\ntol_onmanifold: {:.16e}\n\
                 count: {}\npredicted: {:.16e}\ndeviation: {:+.16e}\nflagged: {}\n",
                solver.tol_onmanifold, weyl.count, weyl.predicted, weyl.deviation, weyl.flagged
            );
            if format == "report" {
                emit(
                    out.as_deref(),
                    &format!("{weyl_text}spectrum:\n{}", window.to_csv()),
                )?;
            } else {
                emit(out.as_deref(), &window.to_csv())?;
                eprint!("{weyl_text}");
            }
            Ok(())
        }
        Command::Trace {
            graph,
            k,
            index,
            kmin,
            kmax,
            solver,
            out,
        } => {
            let g = load_graph(&graph)?;
            require_assumption(&g)?;
            let bs = build_system(&g)?;
            let lengths = g.lengths();
            let k = match (k, index) {
                (Some(k), None) => k,
                (None, Some(idx)) => {
                    let kmax = kmax.ok_or_else(|| {
                        CliError::validation("--index requires --kmax to bound the search window")
                    })?;
                    let window = solve_spectrum_with(&bs, &lengths, kmin, kmax, &solver.config())
                        .map_err(map_solver)?;
                    if idx == 0 || idx > window.records.len() {
                        return Err(CliError::validation(format!(
                            "index {idx} out of range; window holds {} eigenvalues",
                            window.records.len()
                        )));
                    }
                    window.records[idx - 1].k
                }
                _ => {
                    return Err(CliError::validation(
                        "exactly one of --k or --index is required",
                    ))
                }
            };
            let z = BondSystem::torus_point(&lengths, k);
            let traces = kernel_traces(&bs, &z).map_err(|e| match e {
                TraceError::EmptyFiber(sigma) => CliError::validation(format!(
                    "k = {k} is not an eigenvalue at the stated tolerance (residual {sigma:.3e})"
                )),
                other => CliError::numerical(other.to_string()),
            })?;
            let mut text = String::new();
            for t in &traces {
                text.push_str(&t.to_text(k));
            }
            emit(out.as_deref(), &text)
        }
        Command::VerifyFactor {
            graph,
            points,
            seed,
            out,
        } => {
            let g = load_graph(&graph)?;
            let report = verify_factorization_with(&g, points, seed).map_err(map_secular)?;
            emit(out.as_deref(), &report.to_text())
        }
        Command::Expand { graph, out } => {
            let g = load_graph(&graph)?;
            let bs = build_system(&g)?;
            let table = expand_polynomial(&bs).map_err(map_secular)?;
            emit(out.as_deref(), &table.to_text())
        }
        Command::Density {
            graph,
            property,
            kmax,
            seed,
            range_min,
            range_max,
            solver,
            out,
        } => {
            let g = load_graph(&graph)?;
            let property = match property.as_str() {
                "simple" => GenericityProperty::Simple,
                "nonvanishing" => GenericityProperty::Nonvanishing,
                _ => GenericityProperty::LoopSupported,
            };
            let lengths = shared_lengths(&g, seed, (range_min, range_max))?;
            let report = genericity_density_with(
                &g,
                property,
                &lengths,
                kmax,
                seed,
                &solver.config(),
            )
            .map_err(map_experiment)?;
            emit(out.as_deref(), &report.to_text())
        }
        Command::Compare {
            graph,
            other,
            kmax,
            seed,
            range_min,
            range_max,
            tol_match,
            solver,
            out,
        } => {
            let g1 = load_graph(&graph)?;
            let g2 = load_graph(&other)?;
            let lengths = shared_lengths(&g1, seed, (range_min, range_max))?;
            let report = common_spectrum_with(
                &g1,
                &g2,
                &lengths,
                kmax,
                seed,
                tol_match,
                &solver.config(),
            )
            .map_err(map_experiment)?;
            emit(out.as_deref(), &report.to_text())
        }
    }
}

fn load_graph(path: &Path) -> Result<MetricGraph, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    MetricGraph::from_json(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn require_assumption(g: &MetricGraph) -> Result<(), CliError> {
    let class = g.classify();
    if !class.satisfies_assumption {
        let reasons: Vec<String> = class
            .violation_reasons
            .iter()
            .map(|r| r.to_string())
            .collect();
        return Err(CliError::validation(format!(
            "graph violates the standing assumption ({})",
            reasons.join(", ")
        )));
    }
    Ok(())
}

fn build_system(g: &MetricGraph) -> Result<BondSystem, CliError> {
    BondSystem::build(g).map_err(|e| CliError::numerical(e.to_string()))
}

fn shared_lengths(
    g: &MetricGraph,
    seed: Option<u64>,
    range: (f64, f64),
) -> Result<Vec<f64>, CliError> {
    match seed {
        Some(seed) => random_lengths(g.edge_count(), seed, range)
            .map_err(|e| CliError::validation(e.to_string())),
        None => Ok(g.lengths()),
    }
}

fn map_solver(e: SolverError) -> CliError {
    match e {
        SolverError::BadWindow { .. } | SolverError::WindowTooLarge { .. } => {
            CliError::validation(e.to_string())
        }
        SolverError::RankAmbiguous { .. } | SolverError::RankAmbiguousAtPoint { .. } => {
            CliError::numerical(e.to_string())
        }
    }
}

fn map_secular(e: SecularError) -> CliError {
    CliError::validation(e.to_string())
}

fn map_experiment(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Solver(inner) => map_solver(inner),
        ExperimentError::Scattering(inner) => CliError::numerical(inner.to_string()),
        ExperimentError::Trace(inner) => CliError::numerical(inner.to_string()),
        other => CliError::validation(other.to_string()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
