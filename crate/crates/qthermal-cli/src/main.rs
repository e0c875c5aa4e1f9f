//! `qthermal` — solve, sweep, and verify thermal circuits of bath-driven
//! qubit networks described by netlist files.
//!
//! Exit codes: 0 success, 1 netlist/usage/I-O error, 2 solver error,
//! 3 verification failure.

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use qthermal::currents::full_report;
use qthermal::hilbert::{DensityMatrix, Operator};
use qthermal::liouvillian::{liouvillian_matrix, SteadyStateResult};
use qthermal::netlist::{parse_circuit, CircuitSpec, ParameterPath};
use qthermal::verify::evaluate_all;
use qthermal_cli::{default_observables, fmt_f64, preset_text, Observable, SweepConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qthermal",
    version,
    about = "Steady-state heat transport in qubit networks driven by local thermal baths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a netlist's steady state and print the full current report.
    ///
    /// Report rows appear in a fixed order, one observable per line:
    /// `steady-state residual <r> tolerance <t> kernel <k>`, then
    /// `bath-current <bath> <value>`, `link-current <from> <to> <value>`,
    /// `node-residual <qubit> <value>`, `effective-temperature <qubit>
    /// <value> [inverted]`, and `potential <qubit> <bath> <value>`.
    /// With --observables, only the selected values are printed, one
    /// `<selector> <value>` line each, in the order given.
    Run {
        file: PathBuf,
        /// Relative residual tolerance for the steady-state solve.
        #[arg(long)]
        tol: Option<f64>,
        /// Observable selectors: bath.<id>, link.<a>.<b>, temp.<qubit>,
        /// law.<name>.
        #[arg(long, value_name = "SELECTOR", num_args = 1..)]
        observables: Vec<String>,
    },
    /// Sweep one parameter over a grid and write the observables to CSV.
    ///
    /// Column 1 is the parameter value; remaining columns follow the
    /// observable list (default: every bath current). Grid points run in
    /// a worker pool; a point that fails leaves its cells empty and puts
    /// a note on stderr, never aborting the sweep.
    Sweep {
        file: PathBuf,
        /// Parameter path: qubit.<id>.omega, coupling.<a>.<b>.J,
        /// bath.<id>.T, or bath.<id>.gamma.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of grid points (at least 2, endpoints included).
        #[arg(long)]
        steps: usize,
        /// Space the grid logarithmically.
        #[arg(long)]
        log: bool,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Observable selectors: bath.<id>, link.<a>.<b>, temp.<qubit>,
        /// law.<name>.
        #[arg(long, value_name = "SELECTOR", num_args = 1..)]
        observables: Vec<String>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate every circuit law on the steady state and print the
    /// ledger: `<name> <residual> <tolerance> <PASS|FAIL>` per line.
    /// Exits 3 if any check fails.
    Verify {
        file: PathBuf,
        /// Deliberately perturb the solved state before checking, as a
        /// negative control: the ledger must then fail.
        #[arg(long, hide = true)]
        perturb: bool,
    },
    /// Write a named example netlist to <name>.qtc (or to --out).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Real usage errors exit 1; --help and --version exit 0.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Run { file, tol, observables } => cmd_run(&file, tol, &observables),
        Command::Sweep { file, param, from, to, steps, log, out, observables, jobs } => {
            cmd_sweep(&file, &param, from, to, steps, log, &out, &observables, jobs)
        }
        Command::Verify { file, perturb } => cmd_verify(&file, perturb),
        Command::Preset { name, out } => cmd_preset(&name, out.as_deref()),
    }
}

fn load(file: &Path) -> Result<CircuitSpec, Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| fail(1, format!("{}: {e}", file.display())))?;
    parse_circuit(&text).map_err(|e| fail(1, format!("{}: {e}", file.display())))
}

fn solve(spec: &CircuitSpec, tol: Option<f64>) -> Result<SteadyStateResult, Failure> {
    match qthermal_cli::solve(spec, tol) {
        Ok((solved, note)) => {
            if let Some(note) = note {
                eprintln!("{note}");
            }
            Ok(solved)
        }
        Err(e) => Err(fail(2, e.to_string())),
    }
}

fn parse_observables(raw: &[String], spec: &CircuitSpec) -> Result<Vec<Observable>, Failure> {
    let mut parsed = Vec::with_capacity(raw.len());
    for s in raw {
        let obs = Observable::parse(s).map_err(|e| fail(1, e))?;
        obs.validate(spec).map_err(|e| fail(1, e))?;
        parsed.push(obs);
    }
    Ok(parsed)
}

fn cmd_run(file: &Path, tol: Option<f64>, raw_observables: &[String]) -> Result<ExitCode, Failure> {
    let spec = load(file)?;
    let observables = parse_observables(raw_observables, &spec)?;
    let solved = solve(&spec, tol)?;

    if !observables.is_empty() {
        let ledger = observables
            .iter()
            .any(Observable::needs_ledger)
            .then(|| evaluate_all(&spec, &solved));
        for obs in &observables {
            match obs.evaluate(&spec, &solved, ledger.as_deref()) {
                Ok(v) => println!("{} {}", obs.selector(), fmt_f64(v)),
                Err(e) => println!("{} error: {e}", obs.selector()),
            }
        }
        return Ok(ExitCode::SUCCESS);
    }

    println!(
        "steady-state residual {} tolerance {} kernel {}",
        fmt_f64(solved.residual),
        fmt_f64(solved.tolerance),
        solved.nullity
    );
    let report = full_report(&spec, &solved.rho);
    for (id, v) in &report.bath_currents {
        println!("bath-current {id} {}", flagged(v.as_ref().copied()));
    }
    for ((l, k), v) in &report.link_currents {
        println!("link-current {l} {k} {}", flagged(v.as_ref().copied()));
    }
    for (id, v) in &report.node_residuals {
        println!("node-residual {id} {}", flagged(v.as_ref().copied()));
    }
    for (id, t) in &report.effective_temperatures {
        match t {
            Ok(t) if t.inverted => {
                println!("effective-temperature {id} {} inverted", fmt_f64(t.value))
            }
            Ok(t) => println!("effective-temperature {id} {}", fmt_f64(t.value)),
            Err(e) => println!("effective-temperature {id} error: {e}"),
        }
    }
    for ((qubit, bath), v) in &report.potentials {
        println!("potential {qubit} {bath} {}", flagged(v.as_ref().copied()));
    }
    Ok(ExitCode::SUCCESS)
}

fn flagged(v: Result<f64, &String>) -> String {
    match v {
        Ok(v) => fmt_f64(v),
        Err(e) => format!("error: {e}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    file: &Path,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    log: bool,
    out: &Path,
    raw_observables: &[String],
    jobs: Option<usize>,
) -> Result<ExitCode, Failure> {
    let spec = load(file)?;
    let path: ParameterPath = param.parse().map_err(|e: qthermal::netlist::NetlistError| {
        fail(1, e.to_string())
    })?;
    let observables = if raw_observables.is_empty() {
        default_observables(&spec)
    } else {
        parse_observables(raw_observables, &spec)?
    };
    let config = SweepConfig { path, from, to, steps, log, observables };
    config.validate(&spec).map_err(|e| fail(1, e))?;

    let (csv, notes) = qthermal_cli::run_sweep(&spec, &config, jobs);
    for note in notes {
        eprintln!("{note}");
    }
    std::fs::write(out, csv).map_err(|e| fail(1, format!("{}: {e}", out.display())))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(file: &Path, perturb: bool) -> Result<ExitCode, Failure> {
    let spec = load(file)?;
    let mut solved = solve(&spec, None)?;
    if perturb {
        solved = perturbed_control(&spec, &solved)?;
    }
    let checks = evaluate_all(&spec, &solved);
    let mut all_passed = true;
    for check in &checks {
        println!("{}", check.ledger_line());
        all_passed &= check.passed;
    }
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

/// Mix a sliver of the maximally mixed state into the solution and
/// recompute the residual honestly, so the ledger sees a state that is
/// genuinely not stationary.
fn perturbed_control(
    spec: &CircuitSpec,
    solved: &SteadyStateResult,
) -> Result<SteadyStateResult, Failure> {
    const EPS: f64 = 1e-3;
    let mut dense = solved.rho.to_dense();
    let dim = dense.nrows();
    dense.mapv_inplace(|v| v * Complex64::new(1.0 - EPS, 0.0));
    for i in 0..dim {
        dense[(i, i)] += Complex64::new(EPS / dim as f64, 0.0);
    }
    let sup = liouvillian_matrix(spec).map_err(|e| fail(2, e.to_string()))?;
    let residual = sup.residual_of(&dense);
    let rho = Operator::from_dense(dense)
        .and_then(DensityMatrix::new)
        .map_err(|e| fail(2, e.to_string()))?;
    Ok(SteadyStateResult {
        rho,
        residual,
        tolerance: solved.tolerance,
        nullity: solved.nullity,
    })
}

fn cmd_preset(name: &str, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let text = preset_text(name).ok_or_else(|| {
        fail(
            1,
            format!(
                "unknown preset `{name}`; valid names: {}",
                qthermal_cli::PRESET_NAMES.join(", ")
            ),
        )
    })?;
    let default_path = PathBuf::from(format!("{name}.qtc"));
    let path = out.unwrap_or(&default_path);
    std::fs::write(path, text).map_err(|e| fail(1, format!("{}: {e}", path.display())))?;
    Ok(ExitCode::SUCCESS)
}
