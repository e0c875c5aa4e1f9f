//! Named, machine-checkable circuit laws.
//!
//! Each check evaluates one law on a concrete state and reports a residual
//! against a scale-relative tolerance. The laws:
//!
//! - **current conservation** — at every node of a steady state, the bath
//!   current (if a bath is attached) plus all incoming link currents sums
//!   to zero. Only meaningful on steady states; on other states the
//!   residual is still reported but the check is marked inapplicable.
//! - **voltage loop** — around any cycle of the coupling graph the
//!   effective-temperature drops telescope to zero identically, so the
//!   substantive content is that every temperature on the loop is
//!   well-defined; the residual is zero by construction.
//! - **transformer** — on every wire, 𝒥_{lk}/ω_k = −𝒥_{kl}/ω_l. This is
//!   an operator identity, valid for arbitrary states.
//! - **current–voltage** — a bath's current is pinned to the populations
//!   through 𝒥 = (γω/2)[coth(ω/2T_bath)·tanh(ω/2T_qubit) − 1], with the
//!   qubit side expressed through its effective temperature.
//! - **balance** — a designated wire carries no current (Wheatstone-type
//!   conditions).
//! - **adder laws** — on star circuits with a bathed hub: the hub bath
//!   current equals −ω_hub Σ 𝒥_j/ω_j over the input bath currents, and
//!   for identical inputs the effective temperatures obey
//!   tanh(ω/2T)(N + (2γ_A/γ)·p₀(hub)) = N·tanh(ω/2T_x).
//!
//! `run_all` solves the steady state once and produces the full ledger.
//! Everything is deterministic: repeated runs serialize bit-identically.

use crate::currents::{bath_current, effective_temperature, link_current, CurrentError};
use crate::hilbert::DensityMatrix;
use crate::liouvillian::{
    dissipator_apply, steady_state, steady_state_least_norm, system_hamiltonian, SolveError,
    SteadyStateResult,
};
use crate::netlist::CircuitSpec;
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("nodes `{0}` and `{1}` are consecutive on the loop but share no wire")]
    NotACycle(String, String),
    #[error("a loop needs at least three nodes, got {0}")]
    LoopTooShort(usize),
    #[error("no coupling between `{0}` and `{1}`")]
    NoSuchCoupling(String, String),
    #[error(transparent)]
    Current(#[from] CurrentError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// One evaluated law: residual, the tolerance it was held to, and the
/// verdict. `passed` is always `|residual| ≤ tolerance`; `applicable`
/// records whether the law's preconditions held (a current-conservation
/// check on a non-steady state is reported but marked inapplicable).
#[derive(Debug, Clone)]
pub struct LawCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub applicable: bool,
    /// Snapshot of the parameters and intermediate values the verdict
    /// rests on.
    pub context: String,
}

impl LawCheck {
    fn new(name: String, residual: f64, tolerance: f64, applicable: bool, context: String) -> Self {
        let passed = residual.abs() <= tolerance;
        LawCheck { name, residual, tolerance, passed, applicable, context }
    }

    /// `<name> <residual> <tolerance> <PASS|FAIL>`
    pub fn ledger_line(&self) -> String {
        format!(
            "{} {:.16e} {:.16e} {}",
            self.name,
            self.residual,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Render a full ledger, one line per check, LF-terminated.
pub fn ledger(checks: &[LawCheck]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&c.ledger_line());
        out.push('\n');
    }
    out
}

/// ‖dρ/dt‖_max evaluated directly from the master equation.
fn steadiness_defect(spec: &CircuitSpec, rho: &DensityMatrix) -> Result<f64, CurrentError> {
    let h = system_hamiltonian(spec);
    let r = rho.op();
    let mut d = h
        .matmul(r)?
        .sub(&r.matmul(&h)?)?
        .scale(Complex64::new(0.0, -1.0));
    for bath in spec.baths() {
        d = d.add(&dissipator_apply(spec, &bath.id, rho)?)?;
    }
    Ok(d.max_abs())
}

/// True when the state is stationary to within solver accuracy. The gate
/// sits orders of magnitude above a converged solve and orders below any
/// genuinely relaxing state.
fn is_steady(spec: &CircuitSpec, rho: &DensityMatrix) -> bool {
    let scale = system_hamiltonian(spec).max_abs().max(1.0);
    match steadiness_defect(spec, rho) {
        Ok(defect) => defect <= 1e-6 * scale,
        Err(_) => false,
    }
}

/// Characteristic current magnitude of the circuit on this state: the
/// largest bath current, floored by the strongest bath's emission scale
/// γ·ω so that tolerances stay meaningful at equilibrium, where every
/// current vanishes and "zero to one part in 10⁹ of anything observable"
/// is the only statement left to make.
fn current_scale(spec: &CircuitSpec, rho: &DensityMatrix) -> f64 {
    let mut scale: f64 = 0.0;
    for bath in spec.baths() {
        if let Ok(j) = bath_current(spec, rho, &bath.id) {
            scale = scale.max(j.abs());
        }
        if let Some(q) = spec.qubit(&bath.qubit) {
            scale = scale.max(bath.gamma * q.omega.abs() * 1e-3);
        }
    }
    scale
}

/// Current conservation at every node: bath current plus incoming link
/// currents. One check per qubit; infallible — anything that cannot be
/// evaluated becomes a failed check carrying the reason.
pub fn check_kirchhoff_current(spec: &CircuitSpec, rho: &DensityMatrix) -> Vec<LawCheck> {
    let applicable = is_steady(spec, rho);
    let scale = current_scale(spec, rho);
    let tolerance = 1e-9 * scale;
    let mut checks = Vec::new();
    for q in spec.qubits() {
        let name = format!("kirchhoff-current({})", q.id);
        let mut sum = 0.0;
        let mut context = String::new();
        let mut broken: Option<String> = None;
        if let Some(bath) = spec.bath_on_qubit(&q.id) {
            match bath_current(spec, rho, &bath.id) {
                Ok(j) => {
                    sum += j;
                    let _ = write!(context, "bath {}: {j:.6e}; ", bath.id);
                }
                Err(e) => broken = Some(e.to_string()),
            }
        }
        for c in spec.couplings() {
            let l = if c.a == q.id {
                &c.b
            } else if c.b == q.id {
                &c.a
            } else {
                continue;
            };
            match link_current(spec, rho, l, &q.id) {
                Ok(j) => {
                    sum += j;
                    let _ = write!(context, "{l}→{}: {j:.6e}; ", q.id);
                }
                Err(e) => broken = Some(e.to_string()),
            }
        }
        if !applicable {
            context.push_str("state is not steady — law not applicable; ");
        }
        let check = match broken {
            None => LawCheck::new(name, sum, tolerance, applicable, context),
            Some(e) => LawCheck::new(name, f64::NAN, tolerance, applicable, e),
        };
        checks.push(check);
    }
    checks
}

/// Voltage law around one loop of the coupling graph. The potential drops
/// V_{k+1,k} = T_{k+1} − T_k telescope to zero identically, so the
/// residual is zero by construction; the substantive assertions are that
/// the loop really is a cycle and that every effective temperature on it
/// is finite and well-defined — either failure is an error, not a FAIL.
pub fn check_kirchhoff_voltage(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    cycle: &[&str],
) -> Result<LawCheck, VerifyError> {
    if cycle.len() < 3 {
        return Err(VerifyError::LoopTooShort(cycle.len()));
    }
    for i in 0..cycle.len() {
        let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
        if spec.coupling(a, b).is_none() {
            return Err(VerifyError::NotACycle(a.to_string(), b.to_string()));
        }
    }
    let mut temps = Vec::with_capacity(cycle.len());
    for id in cycle {
        temps.push(effective_temperature(spec, rho, id)?.value);
    }
    let mut context = String::new();
    for (id, t) in cycle.iter().zip(&temps) {
        let _ = write!(context, "T({id}) = {t:.6e}; ");
    }
    for i in 0..cycle.len() {
        let j = (i + 1) % cycle.len();
        let _ = write!(context, "V({},{}) = {:.6e}; ", cycle[j], cycle[i], temps[j] - temps[i]);
    }
    let name = format!("kirchhoff-voltage({})", cycle.join("-"));
    Ok(LawCheck::new(name, 0.0, 0.0, true, context))
}

/// Frequency-scaling relation on every wire: 𝒥_{lk}/ω_k + 𝒥_{kl}/ω_l = 0.
/// Holds for arbitrary valid states, not only steady ones.
pub fn check_transformer(spec: &CircuitSpec, rho: &DensityMatrix) -> Vec<LawCheck> {
    let floor = spec.baths().iter().map(|b| b.gamma).fold(0.0f64, f64::max) * 1e-3;
    let mut checks = Vec::new();
    for c in spec.couplings() {
        let name = format!("transformer({},{})", c.a, c.b);
        let (oa, ob) = (
            spec.qubit(&c.a).expect("validated").omega,
            spec.qubit(&c.b).expect("validated").omega,
        );
        match (link_current(spec, rho, &c.a, &c.b), link_current(spec, rho, &c.b, &c.a)) {
            (Ok(jab), Ok(jba)) => {
                let (sa, sb) = (jab / ob, jba / oa);
                let tolerance = 1e-9 * sa.abs().max(sb.abs()).max(floor);
                let context = format!(
                    "J = {}; ω({}) = {oa}; ω({}) = {ob}; 𝒥({}→{}) = {jab:.6e}; 𝒥({}→{}) = {jba:.6e}",
                    c.j, c.a, c.b, c.a, c.b, c.b, c.a
                );
                checks.push(LawCheck::new(name, sa + sb, tolerance, true, context));
            }
            (Err(e), _) | (_, Err(e)) => {
                checks.push(LawCheck::new(name, f64::NAN, 0.0, true, e.to_string()));
            }
        }
    }
    checks
}

/// tanh(ω/2T) evaluated through the qubit's effective temperature, with
/// the exact limits at the points where the temperature itself is not a
/// finite number: equal populations mean T → ±∞ (term 0), a fully
/// polarized qubit means T → 0^± (term ±1).
fn tanh_term(spec: &CircuitSpec, rho: &DensityMatrix, qubit: &str) -> Result<f64, CurrentError> {
    let omega = spec
        .qubit(qubit)
        .ok_or_else(|| CurrentError::UnknownQubit(qubit.to_string()))?
        .omega;
    match effective_temperature(spec, rho, qubit) {
        Ok(t) => Ok((omega / (2.0 * t.value)).tanh()),
        Err(CurrentError::InfiniteTemperature(_)) => Ok(0.0),
        Err(CurrentError::DegeneratePopulation { p0, .. }) if (0.0..=1.0).contains(&p0) => {
            Ok(if p0 == 0.0 { 1.0 } else { -1.0 })
        }
        Err(e) => Err(e),
    }
}

/// Current–voltage relation of every bath: the measured bath current
/// against (γω/2)[coth(ω/2T_bath)·tanh(ω/2T_qubit) − 1]. At T_bath = 0
/// the coth is 1 and the relation reduces to −γω/(1 + e^{ω/T_qubit});
/// for T_qubit → ∞ it plateaus at −γω/2.
pub fn check_current_voltage(spec: &CircuitSpec, rho: &DensityMatrix) -> Vec<LawCheck> {
    let mut checks = Vec::new();
    for bath in spec.baths() {
        let name = format!("current-voltage({})", bath.id);
        let q = spec.qubit(&bath.qubit).expect("validated bath");
        let coth = if bath.temperature == 0.0 {
            1.0
        } else {
            1.0 / (q.omega / (2.0 * bath.temperature)).tanh()
        };
        let evaluated = bath_current(spec, rho, &bath.id)
            .and_then(|j| Ok((j, tanh_term(spec, rho, &bath.qubit)?)));
        match evaluated {
            Ok((j, tanh)) => {
                let predicted = 0.5 * bath.gamma * q.omega * (coth * tanh - 1.0);
                let tolerance = 1e-9 * j.abs().max(0.5 * bath.gamma * q.omega.abs());
                let context = format!(
                    "γ = {}; ω = {}; T_bath = {}; coth = {coth:.6e}; tanh = {tanh:.6e}; \
                     measured = {j:.6e}; predicted = {predicted:.6e}",
                    bath.gamma, q.omega, bath.temperature
                );
                checks.push(LawCheck::new(name, j - predicted, tolerance, true, context));
            }
            Err(e) => checks.push(LawCheck::new(name, f64::NAN, 0.0, true, e.to_string())),
        }
    }
    checks
}

/// Balance of one designated wire: its heat current vanishes. The
/// tolerance is 1e-8 of the largest current anywhere in the circuit, so
/// "balanced" means shielded relative to what actually flows.
pub fn check_balance(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    edge: (&str, &str),
) -> Result<LawCheck, VerifyError> {
    let (a, b) = edge;
    if spec.coupling(a, b).is_none() {
        return Err(VerifyError::NoSuchCoupling(a.to_string(), b.to_string()));
    }
    let j = link_current(spec, rho, a, b)?;
    let scale = current_scale(spec, rho);
    let context = format!("𝒥({a}→{b}) = {j:.6e}; circuit current scale = {scale:.6e}");
    Ok(LawCheck::new(format!("balance({a},{b})"), j, 1e-8 * scale, true, context))
}

/// The hub of a star circuit: a node of degree ≥ 2 incident to every
/// wire, carrying a bath, with every leaf also bathed.
fn star_hub(spec: &CircuitSpec) -> Option<String> {
    let mut degree = std::collections::BTreeMap::<&str, usize>::new();
    for c in spec.couplings() {
        *degree.entry(&c.a).or_default() += 1;
        *degree.entry(&c.b).or_default() += 1;
    }
    let hub = spec.qubits().iter().find(|q| {
        degree.get(q.id.as_str()).copied().unwrap_or(0) == spec.couplings().len()
            && spec.couplings().len() >= 2
    })?;
    let all_bathed = spec
        .qubits()
        .iter()
        .all(|q| spec.bath_on_qubit(&q.id).is_some());
    (all_bathed && spec.couplings().len() == spec.n() - 1).then(|| hub.id.clone())
}

/// Star-circuit laws: the hub bath current is the frequency-weighted sum
/// of the input bath currents, and — when the inputs are identical and
/// the hub bath is at zero temperature — the effective temperatures obey
/// the closed adder relation.
fn adder_checks(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    hub: &str,
) -> Result<Vec<LawCheck>, CurrentError> {
    let mut checks = Vec::new();
    let hub_bath = spec.bath_on_qubit(hub).expect("star_hub requires it");
    let omega_hub = spec.qubit(hub).expect("validated").omega;
    let inputs: Vec<&crate::netlist::Qubit> =
        spec.qubits().iter().filter(|q| q.id != hub).collect();

    let j_hub = bath_current(spec, rho, &hub_bath.id)?;
    let mut weighted = 0.0;
    let mut context = format!("𝒥({}) = {j_hub:.6e}; ", hub_bath.id);
    for q in &inputs {
        let bath = spec.bath_on_qubit(&q.id).expect("star_hub requires it");
        let j = bath_current(spec, rho, &bath.id)?;
        weighted += j / q.omega;
        let _ = write!(context, "𝒥({}) = {j:.6e}; ", bath.id);
    }
    let residual = j_hub + omega_hub * weighted;
    let tolerance = 1e-9 * current_scale(spec, rho);
    checks.push(LawCheck::new("adder-current-sum".into(), residual, tolerance, true, context));

    // The temperature relation needs interchangeable inputs and a
    // grounded hub; otherwise it simply does not apply.
    let b0 = spec.bath_on_qubit(&inputs[0].id).expect("bathed");
    let uniform = hub_bath.temperature == 0.0
        && inputs.iter().all(|q| {
            let b = spec.bath_on_qubit(&q.id).expect("bathed");
            q.omega == inputs[0].omega && b.temperature == b0.temperature && b.gamma == b0.gamma
        })
        && spec.couplings().iter().all(|c| c.j == spec.couplings()[0].j);
    if uniform && b0.temperature > 0.0 {
        let n = inputs.len() as f64;
        let (omega, t) = (inputs[0].omega, b0.temperature);
        let t_hub = effective_temperature(spec, rho, hub)?.value;
        let t_x = effective_temperature(spec, rho, &inputs[0].id)?.value;
        let hub_term = 2.0 / (1.0 + (omega_hub / t_hub).exp());
        let gamma_ratio = hub_bath.gamma / b0.gamma;
        let lhs = (omega / (2.0 * t)).tanh() * (n + gamma_ratio * hub_term);
        let rhs = n * (omega / (2.0 * t_x)).tanh();
        let context = format!(
            "N = {n}; ω = {omega}; T = {t}; ω_hub = {omega_hub}; γ_hub/γ = {gamma_ratio}; \
             T_hub = {t_hub:.6e}; T_x = {t_x:.6e}; lhs = {lhs:.6e}; rhs = {rhs:.6e}"
        );
        checks.push(LawCheck::new(
            "adder-temperature-relation".into(),
            lhs - rhs,
            1e-9 * (n + 2.0),
            true,
            context,
        ));
    }
    Ok(checks)
}

/// A fundamental cycle basis of the coupling graph, from a breadth-first
/// spanning forest: one cycle per non-tree wire. Deterministic in the
/// declaration order of qubits and wires.
fn fundamental_cycles(spec: &CircuitSpec) -> Vec<Vec<String>> {
    let n = spec.n();
    let index = |id: &str| spec.qubit_site(id).expect("validated") - 1;
    let mut adjacency = vec![Vec::new(); n];
    for (e, c) in spec.couplings().iter().enumerate() {
        let (a, b) = (index(&c.a), index(&c.b));
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
    }

    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut tree_edge = vec![false; spec.couplings().len()];
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, e) in &adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = u;
                    depth[v] = depth[u] + 1;
                    tree_edge[e] = true;
                    queue.push_back(v);
                }
            }
        }
    }

    let mut cycles = Vec::new();
    for (e, c) in spec.couplings().iter().enumerate() {
        if tree_edge[e] {
            continue;
        }
        // Walk both endpoints up to their common ancestor.
        let (mut a, mut b) = (index(&c.a), index(&c.b));
        let mut left = vec![a];
        let mut right = vec![b];
        while depth[a] > depth[b] {
            a = parent[a];
            left.push(a);
        }
        while depth[b] > depth[a] {
            b = parent[b];
            right.push(b);
        }
        while a != b {
            a = parent[a];
            b = parent[b];
            left.push(a);
            right.push(b);
        }
        right.pop(); // the common ancestor is already on `left`
        let mut cycle: Vec<String> =
            left.iter().map(|&i| spec.qubits()[i].id.clone()).collect();
        cycle.extend(right.iter().rev().map(|&i| spec.qubits()[i].id.clone()));
        cycles.push(cycle);
    }
    cycles
}

/// Evaluate every law that applies to the circuit on an already-solved
/// state: solver health, current conservation per node, the voltage law
/// over a cycle basis, the transformer relation per wire, the
/// current–voltage relation per bath, and the star-circuit laws when the
/// topology is a fully-bathed star. Never aborts: a check whose inputs
/// cannot be evaluated (undefined effective temperature, say) becomes a
/// failed entry carrying the reason.
pub fn evaluate_all(spec: &CircuitSpec, solved: &SteadyStateResult) -> Vec<LawCheck> {
    let rho = &solved.rho;

    let mut checks = vec![LawCheck::new(
        "steady-state".into(),
        solved.residual,
        solved.tolerance,
        true,
        format!("kernel dimension {}", solved.nullity),
    )];
    checks.extend(check_kirchhoff_current(spec, rho));
    for cycle in fundamental_cycles(spec) {
        let ids: Vec<&str> = cycle.iter().map(String::as_str).collect();
        match check_kirchhoff_voltage(spec, rho, &ids) {
            Ok(c) => checks.push(c),
            Err(e) => checks.push(LawCheck::new(
                format!("kirchhoff-voltage({})", cycle.join("-")),
                f64::NAN,
                0.0,
                true,
                e.to_string(),
            )),
        }
    }
    checks.extend(check_transformer(spec, rho));
    checks.extend(check_current_voltage(spec, rho));
    if let Some(hub) = star_hub(spec) {
        match adder_checks(spec, rho, &hub) {
            Ok(cs) => checks.extend(cs),
            Err(e) => checks.push(LawCheck::new(
                "adder-current-sum".into(),
                f64::NAN,
                0.0,
                true,
                e.to_string(),
            )),
        }
    }
    checks
}

/// Solve the steady state once and evaluate the full ledger. Symmetry-
/// degenerate circuits fall back to the minimum-norm representative;
/// structural failures (a disconnected circuit, a solve that does not
/// converge) propagate as errors.
pub fn run_all(spec: &CircuitSpec) -> Result<Vec<LawCheck>, VerifyError> {
    let solved = match steady_state(spec) {
        Ok(s) => s,
        Err(SolveError::NonUniqueSteadyState { .. }) => steady_state_least_norm(spec)?,
        Err(e) => return Err(e.into()),
    };
    Ok(evaluate_all(spec, &solved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{adder_tuned, resistor, three_qubit_loop, wheatstone_with_field_offsets};
    use crate::hilbert::Operator;
    use crate::liouvillian::propagate;
    use crate::netlist::parse_circuit;
    use ndarray::Array2;

    fn solve(spec: &CircuitSpec) -> DensityMatrix {
        steady_state(spec).unwrap().rho
    }

    #[test]
    fn resistor_ledger_is_all_green() {
        let spec = resistor(2.0, 2.5, 1.0, 4.0, 0.1, 0.05).unwrap();
        let checks = run_all(&spec).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{}", ledger(&checks));
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        for expected in [
            "steady-state",
            "kirchhoff-current(1)",
            "kirchhoff-current(2)",
            "transformer(1,2)",
            "current-voltage(A)",
            "current-voltage(B)",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        // A two-node chain has no cycles and is not a star.
        assert!(!names.iter().any(|n| n.starts_with("kirchhoff-voltage")));
        assert!(!names.iter().any(|n| n.starts_with("adder")));
    }

    #[test]
    fn bath_free_node_conserves_current() {
        let spec = three_qubit_loop([1.0, 1.5, 2.0], 0.5, 0.7, 0.9, 6.0, 0.1, 0.05).unwrap();
        let rho = solve(&spec);
        let checks = check_kirchhoff_current(&spec, &rho);
        let node3 = checks.iter().find(|c| c.name == "kirchhoff-current(3)").unwrap();
        assert!(node3.passed, "{}", node3.ledger_line());
        assert!(node3.applicable);
    }

    #[test]
    fn voltage_loop_telescopes_to_exactly_zero() {
        let spec = three_qubit_loop([1.0, 1.5, 2.0], 0.5, 0.7, 0.9, 6.0, 0.1, 0.05).unwrap();
        let rho = solve(&spec);
        let check = check_kirchhoff_voltage(&spec, &rho, &["1", "2", "3"]).unwrap();
        assert_eq!(check.residual, 0.0);
        assert!(check.passed);
        assert!(check.context.contains("T(1)"));
    }

    #[test]
    fn voltage_loop_rejects_non_cycles_and_undefined_temperatures() {
        let spec = three_qubit_loop([1.0, 1.5, 2.0], 0.5, 0.7, 0.9, 6.0, 0.1, 0.05).unwrap();
        let rho = solve(&spec);
        assert!(matches!(
            check_kirchhoff_voltage(&spec, &rho, &["1", "2"]),
            Err(VerifyError::LoopTooShort(2))
        ));

        // Maximally mixed state: every p₀ = ½, every temperature diverges.
        let dim = 8;
        let mixed = Array2::from_diag_elem(dim, Complex64::new(1.0 / dim as f64, 0.0));
        let mixed = DensityMatrix::new(Operator::from_dense(mixed).unwrap()).unwrap();
        assert!(matches!(
            check_kirchhoff_voltage(&spec, &mixed, &["1", "2", "3"]),
            Err(VerifyError::Current(CurrentError::InfiniteTemperature(_)))
        ));
    }

    #[test]
    fn current_conservation_is_inapplicable_off_steady_state() {
        let spec = resistor(2.0, 2.5, 1.0, 4.0, 0.1, 0.05).unwrap();
        let mut up = Array2::<Complex64>::zeros((4, 4));
        up[(0, 0)] = Complex64::ONE;
        let start = DensityMatrix::new(Operator::from_dense(up).unwrap()).unwrap();
        let mid = propagate(&spec, &start, 0.5, 0.001).unwrap();
        let checks = check_kirchhoff_current(&spec, &mid);
        assert!(checks.iter().all(|c| !c.applicable));
        assert!(checks.iter().any(|c| c.residual.abs() > 1e-6), "{}", ledger(&checks));
    }

    #[test]
    fn transformer_holds_even_off_steady_state() {
        let spec = three_qubit_loop([1.0, 1.5, 2.0], 0.5, 0.7, 0.9, 6.0, 0.1, 0.05).unwrap();
        let mut up = Array2::<Complex64>::zeros((8, 8));
        up[(3, 3)] = Complex64::ONE;
        let start = DensityMatrix::new(Operator::from_dense(up).unwrap()).unwrap();
        let mid = propagate(&spec, &start, 0.3, 0.001).unwrap();
        let checks = check_transformer(&spec, &mid);
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.passed), "{}", ledger(&checks));
    }

    #[test]
    fn grounded_bath_current_matches_the_population_formula() {
        let spec = resistor(2.0, 2.5, 1.0, 4.0, 0.1, 0.05).unwrap();
        let rho = solve(&spec);
        let checks = check_current_voltage(&spec, &rho);
        assert!(checks.iter().all(|c| c.passed), "{}", ledger(&checks));

        // Spot-check the grounded side against −γω/(1 + e^{ω/T₁}).
        let t1 = effective_temperature(&spec, &rho, "1").unwrap().value;
        let j = bath_current(&spec, &rho, "A").unwrap();
        let expect = -0.1 * 2.0 / (1.0 + (2.0 / t1).exp());
        assert!((j - expect).abs() <= 1e-12 * j.abs());
    }

    #[test]
    fn balance_peaks_where_the_bridge_is_matched() {
        let balanced =
            wheatstone_with_field_offsets(20.0, 2.0, 0.05, 0.2, 0.2, 0.1, 0.1, 2.0, 10.0, 0.1, 1.0)
                .unwrap();
        let rho = solve(&balanced);
        let check = check_balance(&balanced, &rho, ("3", "4")).unwrap();
        assert!(check.passed, "{}", check.ledger_line());

        let skewed =
            wheatstone_with_field_offsets(20.0, 2.0, 0.05, 0.2, 0.3, 0.1, 0.1, 2.0, 10.0, 0.1, 1.0)
                .unwrap();
        let rho = solve(&skewed);
        let check = check_balance(&skewed, &rho, ("3", "4")).unwrap();
        assert!(!check.passed, "{}", check.ledger_line());

        assert!(matches!(
            check_balance(&skewed, &rho, ("1", "2")),
            Err(VerifyError::NoSuchCoupling(_, _))
        ));
    }

    #[test]
    fn tuned_adder_passes_the_star_laws() {
        let spec = adder_tuned(2, 1.0, 0.5, 60.0, 0.05).unwrap();
        let checks = run_all(&spec).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{}", ledger(&checks));
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"adder-current-sum"));
        assert!(names.contains(&"adder-temperature-relation"));
    }

    #[test]
    fn disconnected_circuit_surfaces_the_solver_error() {
        let text = "qubit 1 omega=1\nqubit 2 omega=2\nqubit 3 omega=3\n\
                    coupling 1 2 J=1\nbath A qubit=1 T=0 gamma=0.1\nbath B qubit=2 T=5 gamma=0.1\n";
        let spec = parse_circuit(text).unwrap();
        assert!(matches!(
            run_all(&spec),
            Err(VerifyError::Solve(SolveError::NonUniqueSteadyState { .. }))
        ));
    }

    #[test]
    fn degenerate_bridge_still_yields_a_ledger() {
        let spec =
            crate::circuits::super_wheatstone_condition1(1.3, 1.1, 10.0, 0.1, 0.05).unwrap();
        let checks = run_all(&spec).unwrap();
        let health = &checks[0];
        assert_eq!(health.name, "steady-state");
        assert!(health.context.contains("kernel dimension 2"));
        assert!(checks.iter().all(|c| c.passed), "{}", ledger(&checks));
        // Seven nodes, twelve wires: six independent loops.
        let loops = checks.iter().filter(|c| c.name.starts_with("kirchhoff-voltage")).count();
        assert_eq!(loops, 6);
    }

    #[test]
    fn ledgers_are_bit_identical_across_runs() {
        let spec = three_qubit_loop([1.0, 1.5, 2.0], 0.5, 0.7, 0.9, 6.0, 0.1, 0.05).unwrap();
        let a = ledger(&run_all(&spec).unwrap());
        let b = ledger(&run_all(&spec).unwrap());
        assert_eq!(a, b);
        for line in a.lines() {
            let fields: Vec<&str> = line.split(' ').collect();
            assert_eq!(fields.len(), 4, "bad ledger line: {line}");
            assert_eq!(*fields.last().unwrap(), "PASS");
        }
    }
}
