//! `multiand`: every computation of the library as a subcommand. Structured
//! results are written as JSON, sweep tables as CSV.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use multiand::buzzers::{closed_form_uniform, continuity_sweep, information_cost_tol, ContinuityRow};
use multiand::concavity::{concavity_report, CanonicalMeasure, ConcavityReport};
use multiand::discretize::{convergence_table, ConvergenceRow};
use multiand::optimize::{maximize, Budget, Objective, SupportPattern};
use multiand::quadrature::Tolerance;
use multiand::signals::{simulate_signal, terminal_law, Signal, SimulationTrace, TerminalLaw};
use multiand::{Error, InputDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "multiand", version, about = "Information cost of the multiparty AND buzzers protocol")]
#[command(after_help = "Errors are reported on stderr as {\"error\": {\"kind\", \"message\", \"exit_code\"}}.\n\
Exit codes: 2 usage, 3 malformed input, 4 assumption violated, 5 numerical budget exceeded, \
6 check failed (output is still written), 7 i/o.")]
struct Cli {
    /// Worker threads for parallel sweeps; 0 uses one per core.
    #[arg(long, global = true, env = "MULTIAND_WORKERS", default_value_t = 0)]
    workers: usize,

    /// Write the result to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Internal and external cost of the buzzers protocol for a measure (JSON).
    Ic {
        /// Measure file, e.g. {"k": 2, "mass": {"00": 0.5, "10": 0.25, "01": 0.25}}.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        tol: QuadFlags,
    },
    /// Closed-form costs of uniform unit-vector measures against quadrature.
    ///
    /// Columns: k, closed_external, closed_internal, external_bits,
    /// internal_bits, error. Fails when error exceeds --max-error.
    Uniform {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5, 8])]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1e-6)]
        max_error: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        tol: QuadFlags,
    },
    /// Concavity deficits of the canonical measures over a grid.
    ///
    /// One row per (k, s, beta, eps). Cells with beta >= 1/k are skipped.
    /// Columns: k, s, beta, eps, ext_deficit, int_deficit (bits), taylor_ext,
    /// taylor_int (coefficient times eps^3), residual_ext, residual_int
    /// (deficit minus prediction), flags. Flags are `ok` or a `;`-joined
    /// list of negative_ext, negative_int, left_tail, right_tail, eps2_bound.
    VerifyConcavity(ConcavityArgs),
    /// Runs the walk that simulates a signal by weak signals (JSON).
    ///
    /// Reports the empirical law of where the walk ends, its total variation
    /// distance from the signal's own law, and optionally full traces.
    SimulateSignal(SignalArgs),
    /// Cost of the discretized protocol against the continuous one.
    ///
    /// Columns: delta, horizon, nodes, external_bits, internal_bits,
    /// external_gap, internal_gap (discrete minus continuous).
    Discretize(DiscretizeArgs),
    /// Maximizes the cost over measures with a given zero pattern (JSON).
    ///
    /// Trace CSV columns: evaluation, phase, best, simplex_size.
    Maximize(MaximizeArgs),
    /// Continuity of the cost in the measure under a fixed protocol.
    ///
    /// Columns: delta, external_gap, internal_gap, bound, mix_weight,
    /// mix_increase_external, mix_increase_internal, mix_bound, ok.
    ContinuityCheck(ContinuityArgs),
}

#[derive(Args)]
struct QuadFlags {
    /// Absolute quadrature tolerance per interval.
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Relative quadrature tolerance per subinterval.
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_depth: Option<u32>,
}

impl QuadFlags {
    fn tolerance(&self) -> Tolerance {
        let d = Tolerance::default();
        Tolerance {
            abs: self.abs_tol.unwrap_or(d.abs),
            rel: self.rel_tol.unwrap_or(d.rel),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ConcavityArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5])]
    k: Vec<usize>,
    /// Senders, numbered from 1; all of 1..=k when omitted.
    #[arg(long, value_delimiter = ',')]
    s: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.05, 0.1, 0.2])]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 5e-3, 2.5e-3])]
    eps: Vec<f64>,
    /// Deficits below minus this are flagged.
    #[arg(long, default_value_t = 1e-12)]
    floor: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SignalArgs {
    #[arg(long)]
    measure: PathBuf,
    /// Signal file, e.g. {"sender": 1, "p0_given_0": 0.55, "p0_given_1": 0.45}.
    #[arg(long, conflicts_with_all = ["sender", "p0_given_0", "p0_given_1"])]
    signal: Option<PathBuf>,
    /// Sending player, numbered from 1.
    #[arg(long, default_value_t = 1)]
    sender: usize,
    #[arg(long, default_value_t = 1.0)]
    p0_given_0: f64,
    #[arg(long, default_value_t = 0.0)]
    p0_given_1: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    traces: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of step-by-step traces to include in the output.
    #[arg(long, default_value_t = 0)]
    dump: usize,
    /// Fail when the total variation distance exceeds this.
    #[arg(long)]
    max_tv: Option<f64>,
}

#[derive(Args)]
struct DiscretizeArgs {
    #[arg(long)]
    measure: PathBuf,
    /// Slot lengths, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<f64>,
    /// Time after which the remaining input is revealed.
    #[arg(short = 'T', long, default_value_t = 25.0)]
    horizon: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    tol: QuadFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Internal,
    External,
}

#[derive(Args)]
struct MaximizeArgs {
    /// Support points held at zero mass, e.g. `11` or `000,111`.
    #[arg(long, default_value = "")]
    zero: String,
    /// Number of players; taken from the --zero labels when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Internal)]
    objective: ObjectiveArg,
    /// Objective evaluations allowed after the grid search.
    #[arg(long, default_value_t = Budget::default().max_evaluations)]
    budget: usize,
    #[arg(long, default_value_t = Budget::default().grid_step)]
    grid_step: f64,
    /// Simplex size at which refinement stops.
    #[arg(long, default_value_t = Budget::default().xtol)]
    xtol: f64,
    #[command(flatten)]
    tol: QuadFlags,
    /// Also write the search trace as CSV to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ContinuityArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Largest statistical distance between the two measures of a pair.
    #[arg(long, default_value_t = 0.1)]
    max_delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    Io(PathBuf, io::Error),
    Check(String),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Core(e) => match e {
                Error::Malformed(_) | Error::InvalidLabel(_) | Error::InvalidDistribution(_) => "malformed_input",
                Error::Quadrature { .. } | Error::NonTermination(_) | Error::Resolution { .. } => "budget_exceeded",
                Error::IdentityViolated(_) => "check_failed",
                _ => "assumption_violated",
            },
            Failure::Io(..) => "io",
            Failure::Check(_) => "check_failed",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "usage" => 2,
            "malformed_input" => 3,
            "assumption_violated" => 4,
            "budget_exceeded" => 5,
            "check_failed" => 6,
            _ => 7,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Check(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn read_measure(path: &Path) -> Outcome<InputDistribution> {
    Ok(InputDistribution::from_json_str(&read(path)?)?)
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Io(p.to_path_buf(), e)),
        None => io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| Failure::Io("<stdout>".into(), e)),
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("results serialize");
    out.push(b'\n');
    out
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    w.into_inner().expect("in-memory writer")
}

fn table<T: Serialize>(rows: &[T], format: Format) -> Vec<u8> {
    match format {
        Format::Json => json(rows),
        Format::Csv => csv_rows(rows),
    }
}

#[derive(Serialize)]
struct UniformRow {
    k: usize,
    closed_external: f64,
    closed_internal: f64,
    external_bits: f64,
    internal_bits: f64,
    error: f64,
}

fn uniform(ks: &[usize], max_error: f64, tol: Tolerance) -> Outcome<(Vec<UniformRow>, Outcome)> {
    let rows = ks
        .par_iter()
        .map(|&k| {
            let (ce, ci) = closed_form_uniform(k)?;
            let r = information_cost_tol(&InputDistribution::uniform_units(k)?, tol)?;
            Ok(UniformRow {
                k,
                closed_external: ce,
                closed_internal: ci,
                external_bits: r.external_bits,
                internal_bits: r.internal_bits,
                error: (r.external_bits - ce).abs().max((r.internal_bits - ci).abs()),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let verdict = if worst <= max_error {
        Ok(())
    } else {
        Err(Failure::Check(format!("closed forms missed by {worst:e} bits")))
    };
    Ok((rows, verdict))
}

#[derive(Serialize)]
struct ConcavityRow {
    k: usize,
    s: usize,
    beta: f64,
    eps: f64,
    ext_deficit: f64,
    int_deficit: f64,
    taylor_ext: f64,
    taylor_int: f64,
    residual_ext: f64,
    residual_int: f64,
    flags: String,
}

fn flags(r: &ConcavityReport, floor: f64) -> String {
    let mut out = Vec::new();
    if r.ext_deficit < -floor {
        out.push("negative_ext");
    }
    if r.int_deficit < -floor {
        out.push("negative_int");
    }
    if !r.outside.left_tail.passed() {
        out.push("left_tail");
    }
    if !r.outside.right_tail.passed() {
        out.push("right_tail");
    }
    if !r.outside.eps2_bound.passed() {
        out.push("eps2_bound");
    }
    if out.is_empty() {
        "ok".into()
    } else {
        out.join(";")
    }
}

fn concavity_cells(args: &ConcavityArgs) -> Vec<(CanonicalMeasure, f64)> {
    let mut cells = Vec::new();
    for &k in &args.k {
        let senders: Vec<usize> = if args.s.is_empty() {
            (1..=k).collect()
        } else {
            args.s.iter().copied().filter(|&s| s <= k).collect()
        };
        for &s in &senders {
            for &beta in &args.beta {
                match CanonicalMeasure::new(k, s, beta) {
                    Ok(c) => cells.extend(args.eps.iter().map(|&e| (c, e))),
                    Err(e) => eprintln!("skipping k={k} s={s} beta={beta}: {e}"),
                }
            }
        }
    }
    cells
}

fn verify_concavity(args: &ConcavityArgs) -> Outcome<(Vec<u8>, Outcome)> {
    let reports = concavity_cells(args)
        .par_iter()
        .map(|(c, eps)| concavity_report(c, *eps))
        .collect::<Result<Vec<_>, Error>>()?;
    let rows: Vec<ConcavityRow> = reports
        .iter()
        .map(|r| ConcavityRow {
            k: r.k,
            s: r.s,
            beta: r.beta,
            eps: r.eps,
            ext_deficit: r.ext_deficit,
            int_deficit: r.int_deficit,
            taylor_ext: r.taylor_ext,
            taylor_int: r.taylor_int,
            residual_ext: r.residual_ext,
            residual_int: r.residual_int,
            flags: flags(r, args.floor),
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.flags != "ok").count();
    let verdict = if flagged == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{flagged} of {} cells flagged", rows.len())))
    };
    let bytes = match args.format {
        Format::Csv => csv_rows(&rows),
        Format::Json => json(&reports),
    };
    Ok((bytes, verdict))
}

#[derive(Serialize)]
struct SimulationOutput {
    signal: Signal,
    eps: f64,
    law: TerminalLaw,
    traces: Vec<SimulationTrace>,
}

fn simulate(args: &SignalArgs) -> Outcome<(SimulationOutput, Outcome)> {
    let mu = read_measure(&args.measure)?;
    let signal: Signal = match &args.signal {
        Some(p) => serde_json::from_str(&read(p)?).map_err(Error::from)?,
        None => {
            if args.sender == 0 {
                return Err(Failure::Usage("players are numbered from 1".into()));
            }
            Signal::new(args.sender - 1, args.p0_given_0, args.p0_given_1)?
        }
    };
    let law = terminal_law(&mu, &signal, args.eps, args.traces, args.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let traces = (0..args.dump)
        .map(|_| simulate_signal(&mu, &signal, args.eps, &mut rng))
        .collect::<Result<Vec<_>, Error>>()?;
    let verdict = if law.violations > 0 {
        Err(Failure::Check(format!("{} steps failed the weak-signal classifier", law.violations)))
    } else if args.max_tv.is_some_and(|m| law.total_variation > m) {
        Err(Failure::Check(format!("total variation {} is too large", law.total_variation)))
    } else {
        Ok(())
    };
    Ok((
        SimulationOutput {
            signal,
            eps: args.eps,
            law,
            traces,
        },
        verdict,
    ))
}

fn discretize(args: &DiscretizeArgs) -> Outcome<Vec<ConvergenceRow>> {
    let mu = read_measure(&args.measure)?;
    let reference = information_cost_tol(&mu, args.tol.tolerance())?;
    Ok(convergence_table(&mu, &args.delta, args.horizon, &reference)?)
}

fn run_maximize(args: &MaximizeArgs) -> Outcome<Vec<u8>> {
    let pattern = SupportPattern::parse(args.k, &args.zero)?;
    let objective = match args.objective {
        ObjectiveArg::Internal => Objective::Internal,
        ObjectiveArg::External => Objective::External,
    };
    let budget = Budget {
        max_evaluations: args.budget,
        grid_step: args.grid_step,
        xtol: args.xtol,
        quadrature: args.tol.tolerance(),
    };
    let result = maximize(&pattern, objective, budget)?;
    if let Some(path) = &args.trace {
        write_to(Some(path), &csv_rows(&result.trace))?;
    }
    Ok(json(&result))
}

fn run(cli: &Cli) -> Outcome {
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Ic { measure, tol } => {
            let report = information_cost_tol(&read_measure(measure)?, tol.tolerance())?;
            write_to(out, &json(&report))
        }
        Command::Uniform {
            k,
            max_error,
            format,
            tol,
        } => {
            let (rows, verdict) = uniform(k, *max_error, tol.tolerance())?;
            write_to(out, &table(&rows, *format))?;
            verdict
        }
        Command::VerifyConcavity(args) => {
            let (bytes, verdict) = verify_concavity(args)?;
            write_to(out, &bytes)?;
            verdict
        }
        Command::SimulateSignal(args) => {
            let (result, verdict) = simulate(args)?;
            write_to(out, &json(&result))?;
            verdict
        }
        Command::Discretize(args) => write_to(out, &table(&discretize(args)?, args.format)),
        Command::Maximize(args) => write_to(out, &run_maximize(args)?),
        Command::ContinuityCheck(args) => {
            let rows: Vec<ContinuityRow> = continuity_sweep(args.k, args.pairs, args.max_delta, args.seed)?;
            write_to(out, &table(&rows, args.format))?;
            let bad = rows.iter().filter(|r| !r.ok).count();
            if bad == 0 {
                Ok(())
            } else {
                Err(Failure::Check(format!("{bad} of {} pairs violate the bound", rows.len())))
            }
        }
    }
}

fn fail(f: Failure) -> ExitCode {
    let code = f.exit_code();
    let body = serde_json::json!({
        "error": { "kind": f.kind(), "message": f.to_string(), "exit_code": code }
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                e.exit()
            }
            _ => return fail(Failure::Usage(e.to_string().trim_end().to_string())),
        },
    };
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            return fail(Failure::Usage(e.to_string()));
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
