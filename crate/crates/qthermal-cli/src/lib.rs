//! Working parts of the `qthermal` binary: canned example netlists,
//! observable selectors for reports and sweeps, and the sweep engine
//! itself. The binary in `main.rs` is a thin argument-parsing shell over
//! this module so that everything here stays testable in-process.

use qthermal::circuits;
use qthermal::currents::{bath_current, effective_temperature, link_current};
use qthermal::liouvillian::{
    steady_state_least_norm_with_tolerance, steady_state_with_tolerance, SolveError,
    SteadyStateResult,
};
use qthermal::netlist::{CircuitSpec, ParameterPath};
use qthermal::verify::{evaluate_all, LawCheck};

/// 17 significant digits: enough to round-trip an f64 exactly, so CSV
/// output is byte-stable across runs and machines.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Solve the steady state, falling back to the minimum-norm
/// representative when the circuit has a symmetry-degenerate kernel.
/// Returns the solution and a note for stderr when the fallback fired.
pub fn solve(
    spec: &CircuitSpec,
    tol: Option<f64>,
) -> Result<(SteadyStateResult, Option<String>), SolveError> {
    let run = |least_norm: bool| match (least_norm, tol) {
        (false, None) => qthermal::liouvillian::steady_state(spec),
        (false, Some(t)) => steady_state_with_tolerance(spec, t),
        (true, None) => qthermal::liouvillian::steady_state_least_norm(spec),
        (true, Some(t)) => steady_state_least_norm_with_tolerance(spec, t),
    };
    match run(false) {
        Ok(s) => Ok((s, None)),
        Err(SolveError::NonUniqueSteadyState { nullity, .. }) => {
            let note = format!(
                "note: {nullity} independent stationary states (symmetry-degenerate circuit); \
                 reporting the minimum-norm representative"
            );
            Ok((run(true)?, Some(note)))
        }
        Err(e) => Err(e),
    }
}

/// One column of a sweep or one line of a run report.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `bath.<id>` — heat current from the bath into its qubit.
    BathCurrent(String),
    /// `link.<a>.<b>` — heat current from qubit a into qubit b.
    LinkCurrent(String, String),
    /// `temp.<qubit>` — effective temperature of the qubit.
    EffectiveTemperature(String),
    /// `law.<name>` — residual of the named check from the law ledger.
    LawResidual(String),
}

impl Observable {
    pub fn parse(s: &str) -> Result<Observable, String> {
        let bad = || {
            format!(
                "unknown observable `{s}`; expected bath.<id>, link.<a>.<b>, \
                 temp.<qubit>, or law.<name>"
            )
        };
        if let Some(id) = s.strip_prefix("bath.") {
            if id.is_empty() {
                return Err(bad());
            }
            Ok(Observable::BathCurrent(id.to_string()))
        } else if let Some(pair) = s.strip_prefix("link.") {
            match pair.split_once('.') {
                Some((a, b)) if !a.is_empty() && !b.is_empty() && !b.contains('.') => {
                    Ok(Observable::LinkCurrent(a.to_string(), b.to_string()))
                }
                _ => Err(bad()),
            }
        } else if let Some(q) = s.strip_prefix("temp.") {
            if q.is_empty() {
                return Err(bad());
            }
            Ok(Observable::EffectiveTemperature(q.to_string()))
        } else if let Some(name) = s.strip_prefix("law.") {
            if name.is_empty() {
                return Err(bad());
            }
            Ok(Observable::LawResidual(name.to_string()))
        } else {
            Err(bad())
        }
    }

    /// The selector string this observable was parsed from; used verbatim
    /// as its CSV column header.
    pub fn selector(&self) -> String {
        match self {
            Observable::BathCurrent(id) => format!("bath.{id}"),
            Observable::LinkCurrent(a, b) => format!("link.{a}.{b}"),
            Observable::EffectiveTemperature(q) => format!("temp.{q}"),
            Observable::LawResidual(name) => format!("law.{name}"),
        }
    }

    /// Reject selectors naming things the circuit does not have. Law
    /// names are left to evaluation time: the ledger is built per state.
    pub fn validate(&self, spec: &CircuitSpec) -> Result<(), String> {
        match self {
            Observable::BathCurrent(id) => spec
                .bath(id)
                .map(|_| ())
                .ok_or_else(|| format!("no bath named `{id}`")),
            Observable::LinkCurrent(a, b) => spec
                .coupling(a, b)
                .map(|_| ())
                .ok_or_else(|| format!("no coupling between `{a}` and `{b}`")),
            Observable::EffectiveTemperature(q) => spec
                .qubit(q)
                .map(|_| ())
                .ok_or_else(|| format!("no qubit named `{q}`")),
            Observable::LawResidual(_) => Ok(()),
        }
    }

    pub fn needs_ledger(&self) -> bool {
        matches!(self, Observable::LawResidual(_))
    }

    pub fn evaluate(
        &self,
        spec: &CircuitSpec,
        solved: &SteadyStateResult,
        ledger: Option<&[LawCheck]>,
    ) -> Result<f64, String> {
        let rho = &solved.rho;
        match self {
            Observable::BathCurrent(id) => {
                bath_current(spec, rho, id).map_err(|e| e.to_string())
            }
            Observable::LinkCurrent(a, b) => {
                link_current(spec, rho, a, b).map_err(|e| e.to_string())
            }
            Observable::EffectiveTemperature(q) => effective_temperature(spec, rho, q)
                .map(|t| t.value)
                .map_err(|e| e.to_string()),
            Observable::LawResidual(name) => ledger
                .expect("ledger computed for law observables")
                .iter()
                .find(|c| c.name == *name)
                .map(|c| c.residual)
                .ok_or_else(|| format!("no law named `{name}` in this circuit's ledger")),
        }
    }
}

/// Every bath current, in bath declaration order — the default sweep
/// columns.
pub fn default_observables(spec: &CircuitSpec) -> Vec<Observable> {
    spec.baths()
        .iter()
        .map(|b| Observable::BathCurrent(b.id.clone()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub path: ParameterPath,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub log: bool,
    pub observables: Vec<Observable>,
}

impl SweepConfig {
    /// `steps` evenly spaced grid points from `from` to `to` inclusive,
    /// on a linear or logarithmic scale.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                if self.log {
                    (self.from.ln() + (self.to.ln() - self.from.ln()) * f).exp()
                } else {
                    self.from + (self.to - self.from) * f
                }
            })
            .collect()
    }

    pub fn validate(&self, spec: &CircuitSpec) -> Result<(), String> {
        if self.steps < 2 {
            return Err(format!("a sweep needs at least 2 steps, got {}", self.steps));
        }
        if self.from == self.to {
            return Err("sweep endpoints must differ".to_string());
        }
        if self.log && (self.from <= 0.0 || self.to <= 0.0) {
            return Err("logarithmic grids need positive endpoints".to_string());
        }
        if self.observables.is_empty() {
            return Err("a sweep needs at least one observable".to_string());
        }
        // Surface bad targets before burning solver time on the grid.
        spec.set_parameter(&self.path, self.from).map_err(|e| e.to_string())?;
        for obs in &self.observables {
            obs.validate(spec)?;
        }
        Ok(())
    }
}

/// Result of one grid point: the evaluated cells (one per observable,
/// `Err` = empty cell) in column order.
pub type SweepRow = Vec<Result<f64, String>>;

/// Evaluate every observable of the sweep at one parameter value. A
/// solver failure empties the whole row; per-observable failures empty
/// single cells. Never panics on bad physics — errors become cell notes.
pub fn sweep_point(base: &CircuitSpec, config: &SweepConfig, value: f64) -> SweepRow {
    let spec = match base.set_parameter(&config.path, value) {
        Ok(s) => s,
        Err(e) => return vec![Err(e.to_string()); config.observables.len()],
    };
    let solved = match solve(&spec, None) {
        Ok((s, _)) => s,
        Err(e) => return vec![Err(e.to_string()); config.observables.len()],
    };
    let ledger = config
        .observables
        .iter()
        .any(Observable::needs_ledger)
        .then(|| evaluate_all(&spec, &solved));
    config
        .observables
        .iter()
        .map(|obs| obs.evaluate(&spec, &solved, ledger.as_deref()))
        .collect()
}

/// Run the whole grid on a worker pool and render the CSV: header row,
/// one row per grid point in grid order, parameter value in column 1,
/// `,` delimiter, LF line endings, 17-significant-digit floats. Returns
/// the CSV text and the stderr notes (in grid order) for cells that could
/// not be evaluated.
pub fn run_sweep(
    base: &CircuitSpec,
    config: &SweepConfig,
    workers: Option<usize>,
) -> (String, Vec<String>) {
    let grid = config.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .expect("worker pool");
    let rows: Vec<SweepRow> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter().map(|&x| sweep_point(base, config, x)).collect()
    });

    let mut csv = String::new();
    csv.push_str(&config.path.to_string());
    for obs in &config.observables {
        csv.push(',');
        csv.push_str(&obs.selector());
    }
    csv.push('\n');

    let mut notes = Vec::new();
    for (i, (x, row)) in grid.iter().zip(&rows).enumerate() {
        csv.push_str(&fmt_f64(*x));
        for (obs, cell) in config.observables.iter().zip(row) {
            csv.push(',');
            match cell {
                Ok(v) => csv.push_str(&fmt_f64(*v)),
                Err(e) => {
                    notes.push(format!(
                        "note: point {i} ({} = {x}): {} left empty: {e}",
                        config.path,
                        obs.selector()
                    ));
                }
            }
        }
        csv.push('\n');
    }
    (csv, notes)
}

/// The canned example netlists, by name. Each is a complete circuit
/// frozen at a representative operating point; sweeps over one of its
/// parameters trace out the corresponding current or balance curve.
pub const PRESET_NAMES: [&str; 17] = [
    "fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig4", "fig6a", "fig6b", "fig6c", "fig7",
    "fig8", "fig9", "swb-cond1", "swb-cond2", "swb-cond3", "swb-extended", "adder-n2",
];

/// Build the named preset. The description becomes a comment header in
/// the emitted netlist.
pub fn preset(name: &str) -> Option<(CircuitSpec, &'static str)> {
    let spec = match name {
        // Two-qubit wire with one side grounded. Sweeping bath.B.T drives
        // the effective temperature of qubit 1 and traces the
        // current-voltage curve of the grounded bath.
        "fig2" => circuits::resistor(1.0, 1.0, 0.5, 2.0, 0.5, 0.5),
        // The same wire in four parameter regimes with unequal
        // frequencies and asymmetric damping; sweep bath.B.T.
        "fig3a" => circuits::resistor(2.0, 2.5, 1.0, 2.0, 0.01, 0.05),
        "fig3b" => circuits::resistor(5.0, 2.5, 1.0, 2.0, 0.01, 0.005),
        "fig3c" => circuits::resistor(2.0, 5.0, 1.0, 2.0, 0.01, 0.05),
        "fig3d" => circuits::resistor(1.0, 15.0, 1.0, 2.0, 0.01, 0.01),
        // Fully wired three-qubit loop between a grounded and a driven
        // bath; every node obeys current conservation.
        "fig4" => circuits::three_qubit_loop([1.25, 1.5, 1.75], 1.0, 0.5, 0.75, 10.0, 0.1, 0.05),
        // Seven-qubit bridge-of-bridges, fully symmetric: both
        // galvanometer wires 3-4 and 5-6 carry nothing.
        "fig6a" => circuits::super_wheatstone_condition1(1.5, 1.3, 10.0, 0.1, 0.05),
        // Shielded-center bridge at its balance ties: qubit 7 sits out of
        // the heat's way.
        "fig6b" => circuits::super_wheatstone_condition2(
            1.7, 1.2, 1.9, 1.1, 1.4, 1.6, 1.8, 1.3, 1.05, 1.25, 1.75, 10.0, 0.1, 0.05,
        ),
        // Classic four-arm bridge cut out of the seven-qubit circuit,
        // balanced: the galvanometer wire 5-6 carries nothing.
        "fig6c" => circuits::super_wheatstone_condition3(
            [1.8, 1.1, 1.6, 1.3, 1.45, 1.9, 1.25],
            1.5,
            1.2,
            1.7,
            1.35,
            1.6,
            1.15,
            1.85,
            10.0,
            0.1,
            0.05,
        ),
        // Two-qubit wire with both bath temperatures free; sweep bath.A.T
        // through T_B = 1.0 to see the current reverse sign.
        "fig7" => circuits::diode(1.5, 1.5, 0.5, 2.0, 1.0, 0.01, 0.1),
        // Four-qubit bridge with field offsets folded into the
        // frequencies, balanced at J13 = J14 and J23 = J24: the
        // galvanometer wire 3-4 carries nothing. Sweep coupling.1.4.J to
        // unbalance it.
        "fig8" => circuits::wheatstone_with_field_offsets(
            20.0, 2.0, 0.05, 0.2, 0.2, 0.1, 0.1, 2.0, 10.0, 0.1, 1.0,
        ),
        // Three qubits, three baths: collector and emitter held cold, the
        // soft base qubit steering both currents. Sweep bath.B.T for the
        // amplification curves.
        "fig9" => circuits::transistor(
            0.05, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.01, 0.002, 0.003,
        ),
        // Symmetric seven-qubit bridge at a second operating point.
        "swb-cond1" => circuits::super_wheatstone_condition1(1.3, 1.1, 10.0, 0.1, 0.05),
        // Shielded-center topology off balance: J34 = 0.5 against
        // J46 = 1.3 with the other ties in place. Sweeping coupling.3.4.J
        // through 1.3 crosses the balance, where the currents into qubit
        // 7 vanish.
        "swb-cond2" => circuits::super_wheatstone(
            [1.7, 1.2, 1.4, 1.9, 1.1, 1.4, 1.4],
            [1.6, 0.0, 0.0, 1.8, 0.5, 1.05, 1.25, 1.3, 0.0, 1.05, 0.0, 1.75],
            10.0,
            0.1,
            0.05,
        ),
        // Inner-bridge topology off balance: J57 = 1.85 against
        // J67 = 1.2 with J15 = J16 tied. Sweeping coupling.5.7.J through
        // 1.2 crosses the balance, where the galvanometer wire 5-6 goes
        // quiet.
        "swb-cond3" => circuits::super_wheatstone(
            [1.8, 1.1, 1.6, 1.3, 1.45, 1.9, 1.25],
            [1.5, 1.5, 1.2, 1.7, 1.35, 0.0, 0.0, 0.0, 1.6, 1.15, 1.85, 1.2],
            10.0,
            0.1,
            0.05,
        ),
        // Eight-qubit variant with the shielded wire lengthened to run
        // 3-7-8-6; balanced (mirror tie J37 = J68, the middle coupling
        // differs), which degenerates the kernel — solves fall back to
        // the least-norm state.
        "swb-extended" => circuits::super_wheatstone_extended_balanced(
            1.7, 1.2, 1.9, 1.1, 1.4, 1.6, 1.8, 1.3, 1.05, 1.25, 1.5, 10.0, 0.1, 0.05,
        ),
        // Two-input adder at the tuned operating point: the input
        // potentials sum to the output potential at high temperature.
        "adder-n2" => circuits::adder_tuned(2, 1.0, 0.5, 60.0, 0.05),
        _ => return None,
    };
    let description = match name {
        "fig2" => "two-qubit wire, one side grounded; sweep bath.B.T for the current-voltage curve",
        "fig3a" | "fig3b" | "fig3c" | "fig3d" => {
            "two-qubit wire; sweep bath.B.T for the heat-current curve"
        }
        "fig4" => "three-qubit loop between a grounded and a driven bath; sweep bath.B.T",
        "fig6a" => "symmetric seven-qubit bridge: galvanometer wires 3-4 and 5-6 carry nothing",
        "fig6b" => "shielded-center bridge at balance: qubit 7 carries nothing",
        "fig6c" => "four-arm bridge inside the seven-qubit circuit, balanced on wire 5-6",
        "fig7" => "thermal diode; sweep bath.A.T through T_B = 1 to see the current reverse",
        "fig8" => "four-qubit bridge balanced at J13 = J14, J23 = J24; wire 3-4 carries nothing",
        "fig9" => "thermal transistor; sweep bath.B.T for the amplification curves",
        "swb-cond1" => "symmetric seven-qubit bridge: galvanometer wires carry nothing",
        "swb-cond2" => "shielded-center bridge off balance; sweep coupling.3.4.J through 1.3",
        "swb-cond3" => "inner four-arm bridge off balance; sweep coupling.5.7.J through 1.2",
        "swb-extended" => "eight-qubit bridge with a lengthened shielded wire, balanced",
        "adder-n2" => "two-input adder, tuned so the input potentials sum to the output",
        _ => unreachable!(),
    };
    Some((spec.expect("preset parameters are valid"), description))
}

/// Netlist text of the named preset: a comment header plus the serialized
/// circuit. Round-trips through `parse_circuit`.
pub fn preset_text(name: &str) -> Option<String> {
    let (spec, description) = preset(name)?;
    Some(format!("# {name}: {description}\n{}", spec.serialize()))
}
