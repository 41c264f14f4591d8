//! The `mcap` command-line front end.
//!
//! Commands write JSON or CSV to stdout or `--out`. Failures print a JSON
//! object to stderr and map to exit codes: 2 for bad usage, 3 when the
//! solver does not converge, 4 when a size cap is exceeded.

pub mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ba::{blahut_arimoto, BaOptions};
use crate::channel::{transition_matrix, ChannelSpec};
use crate::error::Error;
use crate::exec::Execution;
use crate::mdab::{solve_sequence, MdabConfig, MdabResult};
use crate::oracle::{asymptotic_capacity, grid_capacity_report, scaling_fit, ScalingRecord};
use crate::simplex::{ordered_vertices, OrderedSimplexPoint};

use format::{config_digest, format_sig, to_json, CaidDocument, Csv, Sig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "mcap",
    version,
    about = "Capacity of the multinomial channel for composite DNA letters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the capacity-achieving input distribution.
    Solve(SolveArgs),
    /// Compare against the uniform composite constellation.
    Compare(CompareArgs),
    /// Capacity against support size over several alphabets.
    Scaling(ScalingArgs),
    /// Lattice and asymptotic reference values.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.0)]
    pub flip_eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eps_gap: f64,
    /// Low-discrepancy starts of the dual search [default: 64 (k - 1)].
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run on a single thread.
    #[arg(long)]
    pub sequential: bool,
}

impl SolverArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn config(&self) -> MdabConfig {
        let mut cfg = MdabConfig {
            eps_gap: self.eps_gap,
            ..Default::default()
        };
        cfg.dual.starts = self.starts;
        cfg.dual.seed = self.seed;
        cfg.with_execution(self.execution())
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub k: usize,
    /// Emit every n from 1 up to --n.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub n_max: u32,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub n_max: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k_list: Vec<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub flip_eps: f64,
    /// Lattice spacing; the lattice capacity is skipped when absent.
    #[arg(long)]
    pub grid_res: Option<f64>,
    /// Run on a single thread.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A failed command: exit code plus the JSON written to stderr.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (error, exit_code, n) = match &e {
            Error::NotConverged { n, .. } => ("not_converged", EXIT_NOT_CONVERGED, Some(*n)),
            Error::DegenerateObjective { .. } => ("degenerate_objective", EXIT_NOT_CONVERGED, None),
            Error::AlphabetTooLarge { .. } => ("alphabet_too_large", EXIT_CAP, None),
            Error::GridTooLarge { .. } => ("grid_too_large", EXIT_CAP, None),
            _ => ("invalid_input", EXIT_USAGE, None),
        };
        Failure {
            error,
            message,
            exit_code,
            n,
        }
    }
}

impl Failure {
    fn io(e: std::io::Error, path: &std::path::Path) -> Self {
        Failure {
            error: "io",
            message: format!("{}: {e}", path.display()),
            exit_code: EXIT_USAGE,
            n: None,
        }
    }
}

type CmdResult = std::result::Result<String, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let failure = Failure {
                error: "usage",
                message: e.to_string().trim_end().to_string(),
                exit_code: EXIT_USAGE,
                n: None,
            };
            let _ = stderr.write_all(to_json(&failure).as_bytes());
            return EXIT_USAGE;
        }
    };
    let (output, result) = match &cli.command {
        Command::Solve(a) => (&a.output, cmd_solve(a)),
        Command::Compare(a) => (&a.output, cmd_compare(a)),
        Command::Scaling(a) => (&a.output, cmd_scaling(a, stderr)),
        Command::Oracle(a) => (&a.output, cmd_oracle(a)),
    };
    let written = result.and_then(|text| match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::io(e, path)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(e, "<stdout>".as_ref())),
    });
    match written {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let _ = stderr.write_all(to_json(&failure).as_bytes());
            failure.exit_code
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> CmdResult {
    let cfg = a.solver.config();
    let results = solve_sequence(a.n, a.k, a.solver.flip_eps, &cfg)?;
    let digest = config_digest(&cfg);
    let chosen: &[MdabResult] = if a.all { &results } else { &results[results.len() - 1..] };
    match a.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let docs: Vec<CaidDocument> = chosen.iter().map(|r| CaidDocument::new(r, &digest)).collect();
            Ok(if a.all { to_json(&docs) } else { to_json(&docs[0]) })
        }
        Format::Csv => {
            let xs: Vec<String> = (1..=a.k).map(|j| format!("x{j}")).collect();
            let mut header = vec!["n"];
            header.extend(xs.iter().map(String::as_str));
            header.extend(["weight", "distinct_permutations", "expanded_weight_each"]);
            let mut csv = Csv::new(&header);
            for r in chosen {
                for (p, w) in &r.ordered_atoms {
                    let perms = p.permutation_count();
                    let mut row = vec![r.spec.n.to_string()];
                    row.extend(p.as_slice().iter().map(|&v| format_sig(v)));
                    row.extend([format_sig(*w), perms.to_string(), format_sig(w / perms as f64)]);
                    csv.row(&row);
                }
            }
            Ok(csv.finish())
        }
    }
}

/// Capacity in bits of the uniform composite constellation: every
/// permutation of every ordered-simplex vertex, weights optimized.
pub fn uniform_composite_capacity(spec: &ChannelSpec) -> crate::error::Result<f64> {
    let locations: Vec<_> = ordered_vertices(spec.k)
        .iter()
        .flat_map(OrderedSimplexPoint::distinct_permutations)
        .map(crate::channel::SimplexPoint::new)
        .collect::<crate::error::Result<_>>()?;
    let w = transition_matrix(&locations, spec)?;
    let opts = BaOptions {
        tol: 1e-12,
        max_iter: 1_000_000,
        ..Default::default()
    };
    Ok(blahut_arimoto(&w, &opts).mutual_info_nats / std::f64::consts::LN_2)
}

#[derive(Debug, Serialize)]
struct CompareRow {
    n: u32,
    capacity_mdab_bits: Sig,
    capacity_uniform_composite_bits: Sig,
    log2_4: Sig,
    log2_15: Sig,
}

fn cmd_compare(a: &CompareArgs) -> CmdResult {
    let cfg = a.solver.config();
    let results = solve_sequence(a.n_max, a.k, a.solver.flip_eps, &cfg)?;
    let uniform = a
        .solver
        .execution()
        .map(&results, |r| uniform_composite_capacity(&r.spec))
        .into_iter()
        .collect::<crate::error::Result<Vec<f64>>>()?;
    let rows: Vec<CompareRow> = results
        .iter()
        .zip(uniform)
        .map(|(r, u)| CompareRow {
            n: r.spec.n,
            capacity_mdab_bits: Sig(r.capacity_bits()),
            capacity_uniform_composite_bits: Sig(u),
            log2_4: Sig(2.0),
            log2_15: Sig(15f64.log2()),
        })
        .collect();
    Ok(match a.output.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut csv = Csv::new(&[
                "n",
                "capacity_mdab_bits",
                "capacity_uniform_composite_bits",
                "log2_4",
                "log2_15",
            ]);
            for r in &rows {
                csv.row(&[
                    r.n.to_string(),
                    r.capacity_mdab_bits.to_string(),
                    r.capacity_uniform_composite_bits.to_string(),
                    r.log2_4.to_string(),
                    r.log2_15.to_string(),
                ]);
            }
            csv.finish()
        }
    })
}

#[derive(Debug, Serialize)]
struct ScalingRow {
    n: u32,
    k: usize,
    capacity_bits: Sig,
    support_m: usize,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    slope: Sig,
    intercept: Sig,
    rmse: Sig,
}

#[derive(Debug, Serialize)]
struct ScalingDocument {
    records: Vec<ScalingRow>,
    fit: Option<FitSummary>,
    fit_error: Option<String>,
}

fn cmd_scaling(a: &ScalingArgs, stderr: &mut dyn Write) -> CmdResult {
    let cfg = a.solver.config();
    let chains = a
        .solver
        .execution()
        .map(&a.k_list, |&k| solve_sequence(a.n_max, k, a.solver.flip_eps, &cfg));
    let mut records = Vec::new();
    for chain in chains {
        records.extend(chain?.iter().map(ScalingRecord::from_result));
    }
    for r in records.iter().filter(|r| r.is_suspicious()) {
        let _ = writeln!(
            stderr,
            "warning: n = {}, k = {}: support {} is below k",
            r.n, r.k, r.support_m
        );
    }
    // The single-read points sit on the vertices and are left out of the fit.
    let fitted: Vec<ScalingRecord> = records.iter().filter(|r| r.n >= 2).cloned().collect();
    let fit = scaling_fit(&fitted);
    let rows: Vec<ScalingRow> = records
        .iter()
        .map(|r| ScalingRow {
            n: r.n,
            k: r.k,
            capacity_bits: Sig(r.capacity_bits),
            support_m: r.support_m,
        })
        .collect();
    Ok(match a.output.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let (fit, fit_error) = match fit {
                Ok(f) => (
                    Some(FitSummary {
                        slope: Sig(f.slope),
                        intercept: Sig(f.intercept),
                        rmse: Sig(f.rmse),
                    }),
                    None,
                ),
                Err(e) => (None, Some(e.to_string())),
            };
            to_json(&ScalingDocument {
                records: rows,
                fit,
                fit_error,
            })
        }
        Format::Csv => {
            let mut csv = Csv::new(&["n", "k", "capacity_bits", "support_m"]);
            for r in &rows {
                csv.row(&[
                    r.n.to_string(),
                    r.k.to_string(),
                    r.capacity_bits.to_string(),
                    r.support_m.to_string(),
                ]);
            }
            match fit {
                Ok(f) => csv.line(&format!(
                    "# fit slope={} intercept={} rmse={}",
                    format_sig(f.slope),
                    format_sig(f.intercept),
                    format_sig(f.rmse)
                )),
                Err(e) => csv.line(&format!("# {e}")),
            }
            csv.finish()
        }
    })
}

#[derive(Debug, Serialize)]
struct OracleReport {
    n: u32,
    k: usize,
    flip_eps: Sig,
    asymptotic_capacity_nats: Sig,
    grid_resolution: Option<Sig>,
    grid_capacity_nats: Option<Sig>,
    grid_upper_bound_nats: Option<Sig>,
    grid_points: Option<usize>,
}

fn cmd_oracle(a: &OracleArgs) -> CmdResult {
    let spec = ChannelSpec::new(a.n, a.k, a.flip_eps)?;
    let execution = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let grid = a
        .grid_res
        .map(|res| grid_capacity_report(&spec, res, execution))
        .transpose()?;
    let report = OracleReport {
        n: a.n,
        k: a.k,
        flip_eps: Sig(a.flip_eps),
        asymptotic_capacity_nats: Sig(asymptotic_capacity(&spec)),
        grid_resolution: a.grid_res.map(Sig),
        grid_capacity_nats: grid.as_ref().map(|g| Sig(g.capacity_nats)),
        grid_upper_bound_nats: grid.as_ref().map(|g| Sig(g.upper_bound_nats)),
        grid_points: grid.as_ref().map(|g| g.grid_points),
    };
    Ok(match a.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => {
            let opt = |v: Option<Sig>| v.map(|s| s.to_string()).unwrap_or_default();
            let mut csv = Csv::new(&[
                "n",
                "k",
                "flip_eps",
                "asymptotic_capacity_nats",
                "grid_resolution",
                "grid_capacity_nats",
                "grid_upper_bound_nats",
                "grid_points",
            ]);
            csv.row(&[
                report.n.to_string(),
                report.k.to_string(),
                report.flip_eps.to_string(),
                report.asymptotic_capacity_nats.to_string(),
                opt(report.grid_resolution),
                opt(report.grid_capacity_nats),
                opt(report.grid_upper_bound_nats),
                report.grid_points.map(|g| g.to_string()).unwrap_or_default(),
            ]);
            csv.finish()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("mcap").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn solve_single_read() {
        let (code, out, _) = run_capture(&["solve", "--n", "1", "--k", "4"]);
        assert_eq!(code, 0);
        let doc: CaidDocument = serde_json::from_str(&out).unwrap();
        assert_eq!(doc.capacity_bits.0, 2.0);
        assert_eq!(doc.ordered_atoms.len(), 1);
        assert_eq!(doc.ordered_atoms[0].distinct_permutations, 4);
        assert_eq!(doc.support_size_m, 4);
    }

    #[test]
    fn fully_noisy_binary_channel_has_no_capacity() {
        let (code, out, _) = run_capture(&["solve", "--n", "1", "--k", "2", "--flip-eps", "0.5"]);
        assert_eq!(code, 0);
        let doc: CaidDocument = serde_json::from_str(&out).unwrap();
        assert!(doc.capacity_bits.0.abs() <= 1e-9);
    }

    #[test]
    fn usage_errors_exit_two() {
        let (code, out, err) = run_capture(&["solve", "--k", "4"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        let v: serde_json::Value = serde_json::from_str(&err).unwrap();
        assert_eq!(v["error"], "usage");

        let (code, _, err) = run_capture(&["solve", "--n", "2", "--k", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("invalid_input"));
    }

    #[test]
    fn caps_exit_four() {
        let (code, _, err) = run_capture(&["oracle", "--n", "2", "--k", "6", "--grid-res", "0.01"]);
        assert_eq!(code, EXIT_CAP);
        assert!(err.contains("grid_too_large"));
    }

    #[test]
    fn scaling_single_record_is_degenerate() {
        let (code, out, _) = run_capture(&["scaling", "--k-list", "2", "--n-max", "1"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("n,k,capacity_bits,support_m\n1,2,1.00000000000,2\n"));
        assert!(out.contains("\n# degenerate fit"));
        assert!(!out.contains('\r'));
    }

    #[test]
    fn oracle_reports_values() {
        let (code, out, _) = run_capture(&["oracle", "--n", "1", "--k", "4", "--grid-res", "0.25"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let c: f64 = v["grid_capacity_nats"].as_f64().unwrap();
        assert!((c - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn compare_single_read_ties() {
        let (code, out, _) = run_capture(&["compare", "--n-max", "1", "--k", "4"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(
            lines.next(),
            Some("n,capacity_mdab_bits,capacity_uniform_composite_bits,log2_4,log2_15")
        );
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert!((row[1] - row[2]).abs() <= 1e-6);
        assert_eq!(row[3], 2.0);
    }
}
