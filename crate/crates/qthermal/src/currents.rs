//! Observables on a solved state: heat currents, spin currents, effective
//! temperatures, thermal potentials, and per-node ledgers.
//!
//! Orientation convention: `link_current(l, k)` is the heat flowing *into*
//! node k through the wire from l, i·Tr(ρ[H_{lk}, H_k]). Bath currents
//! 𝒥 = Tr[H_k 𝒟(ρ)] point from the bath into its qubit. All currents are
//! real for physical states; the imaginary part is checked against 1e-10
//! before being discarded, so Hermiticity bugs surface instead of being
//! masked.

use crate::hilbert::{DensityMatrix, HilbertError, Operator};
use crate::liouvillian::{
    dissipator_apply, link_hamiltonian, site_hamiltonian, system_hamiltonian, SolveError,
};
use crate::netlist::CircuitSpec;
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CurrentError {
    #[error("unknown bath `{0}`")]
    UnknownBath(String),
    #[error("no coupling between `{0}` and `{1}`")]
    NoSuchCoupling(String, String),
    #[error("unknown qubit `{0}`")]
    UnknownQubit(String),
    #[error("expected exactly two baths, found {0}")]
    NotTwoBaths(usize),
    #[error("{what} has imaginary part {imag:.3e} (bound {IMAG_TOL:.0e})")]
    ComplexResidue { what: String, imag: f64 },
    #[error("qubit `{0}` has equal level populations; effective temperature diverges")]
    InfiniteTemperature(String),
    #[error("qubit `{qubit}` has a fully polarized population p₀ = {p0}")]
    DegeneratePopulation { qubit: String, p0: f64 },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Tr(ρ·op) without forming the product matrix.
fn trace_product(rho: &DensityMatrix, op: &Operator) -> Complex64 {
    let m = rho.op().to_dense();
    let mut acc = Complex64::ZERO;
    op.for_each_entry(|j, i, v| acc += v * m[(i, j)]);
    acc
}

fn real_checked(z: Complex64, what: &str) -> Result<f64, CurrentError> {
    if z.im.abs() > IMAG_TOL {
        Err(CurrentError::ComplexResidue { what: what.to_string(), imag: z.im })
    } else {
        Ok(z.re)
    }
}

/// Heat current from a bath into its attached qubit: Tr[H_k 𝒟(ρ)].
pub fn bath_current(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    bath_id: &str,
) -> Result<f64, CurrentError> {
    let bath = spec
        .bath(bath_id)
        .ok_or_else(|| CurrentError::UnknownBath(bath_id.to_string()))?;
    let h_k = site_hamiltonian(spec, &bath.qubit).expect("validated bath qubit");
    let d = dissipator_apply(spec, bath_id, rho)?;
    let tr = h_k.matmul(&d)?.trace();
    real_checked(tr, &format!("bath current {bath_id}"))
}

/// Total current a bath feeds into the whole system: Tr[H_S 𝒟(ρ)].
pub fn total_bath_current(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    bath_id: &str,
) -> Result<f64, CurrentError> {
    let h = system_hamiltonian(spec);
    let d = dissipator_apply(spec, bath_id, rho)?;
    let tr = h.matmul(&d)?.trace();
    real_checked(tr, &format!("total current of bath {bath_id}"))
}

/// Heat current into node `to` through the wire from `from`:
/// i·Tr(ρ[H_{lk}, H_k]).
pub fn link_current(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    from: &str,
    to: &str,
) -> Result<f64, CurrentError> {
    let h_link = link_hamiltonian(spec, from, to)
        .ok_or_else(|| CurrentError::NoSuchCoupling(from.to_string(), to.to_string()))?;
    let h_k = site_hamiltonian(spec, to)
        .ok_or_else(|| CurrentError::UnknownQubit(to.to_string()))?;
    let comm = h_link.matmul(&h_k)?.sub(&h_k.matmul(&h_link)?)?;
    let tr = trace_product(rho, &comm) * Complex64::I;
    real_checked(tr, &format!("link current {from}→{to}"))
}

/// Magnetization current through a wire: I_M = 2J⟨σ^x_lσ^y_k − σ^y_lσ^x_k⟩.
pub fn spin_current(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    l: &str,
    k: &str,
) -> Result<f64, CurrentError> {
    use crate::hilbert::{embed, pauli, PauliKind};
    let c = spec
        .coupling(l, k)
        .ok_or_else(|| CurrentError::NoSuchCoupling(l.to_string(), k.to_string()))?;
    let n = spec.n();
    let sl = spec.qubit_site(l).ok_or_else(|| CurrentError::UnknownQubit(l.to_string()))?;
    let sk = spec.qubit_site(k).ok_or_else(|| CurrentError::UnknownQubit(k.to_string()))?;
    let xy = embed(&pauli(PauliKind::X), sl, n)?.matmul(&embed(&pauli(PauliKind::Y), sk, n)?)?;
    let yx = embed(&pauli(PauliKind::Y), sl, n)?.matmul(&embed(&pauli(PauliKind::X), sk, n)?)?;
    let obs = xy.sub(&yx)?;
    let tr = trace_product(rho, &obs) * Complex64::new(2.0 * c.j, 0.0);
    real_checked(tr, &format!("spin current {l}→{k}"))
}

/// Totals fed into a two-bath circuit from each end, with the exact
/// decomposition 𝓘 = Tr[H_k 𝒟] + Σ_edges Tr[H_edge 𝒟] over the edges
/// touching the bath's qubit.
#[derive(Debug, Clone)]
pub struct ChainEnd {
    pub bath_id: String,
    pub total: f64,
    pub bath_current: f64,
    /// Σ Tr[H_edge·𝒟] over bath-adjacent edges; total = bath_current + this.
    pub edge_term: f64,
}

#[derive(Debug, Clone)]
pub struct ChainCurrents {
    /// End owned by the first-declared bath.
    pub left: ChainEnd,
    /// End owned by the second-declared bath.
    pub right: ChainEnd,
}

impl ChainCurrents {
    pub fn i_left(&self) -> f64 {
        self.left.total
    }
    pub fn i_right(&self) -> f64 {
        self.right.total
    }
}

pub fn chain_total_currents(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
) -> Result<ChainCurrents, CurrentError> {
    if spec.baths().len() != 2 {
        return Err(CurrentError::NotTwoBaths(spec.baths().len()));
    }
    let mut ends = Vec::with_capacity(2);
    for bath in spec.baths() {
        let total = total_bath_current(spec, rho, &bath.id)?;
        let into_qubit = bath_current(spec, rho, &bath.id)?;
        let d = dissipator_apply(spec, &bath.id, rho)?;
        let mut edge_term = 0.0;
        for c in spec.couplings() {
            if c.a == bath.qubit || c.b == bath.qubit {
                let h_edge = link_hamiltonian(spec, &c.a, &c.b).expect("validated");
                edge_term += real_checked(
                    h_edge.matmul(&d)?.trace(),
                    &format!("edge term {}–{}", c.a, c.b),
                )?;
            }
        }
        ends.push(ChainEnd {
            bath_id: bath.id.clone(),
            total,
            bath_current: into_qubit,
            edge_term,
        });
    }
    let right = ends.pop().expect("two ends");
    let left = ends.pop().expect("two ends");
    Ok(ChainCurrents { left, right })
}

/// Signed effective temperature of one qubit's reduced state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTemperature {
    pub value: f64,
    /// True when the upper level is the more populated one (negative value).
    pub inverted: bool,
}

/// T_k = ω_k / ln(1/p₀ − 1), from the |0⟩-population p₀ of the reduced
/// state. Population inversion gives a negative temperature, flagged
/// rather than rejected.
pub fn effective_temperature(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    qubit_id: &str,
) -> Result<EffectiveTemperature, CurrentError> {
    let q = spec
        .qubit(qubit_id)
        .ok_or_else(|| CurrentError::UnknownQubit(qubit_id.to_string()))?;
    let site = spec.qubit_site(qubit_id).expect("same lookup");
    let p0 = rho.upper_population(site, spec.n())?;
    if !(0.0..=1.0).contains(&p0) || p0 == 0.0 || p0 == 1.0 {
        return Err(CurrentError::DegeneratePopulation { qubit: qubit_id.to_string(), p0 });
    }
    if (p0 - 0.5).abs() < 1e-14 {
        return Err(CurrentError::InfiniteTemperature(qubit_id.to_string()));
    }
    let value = q.omega / (1.0 / p0 - 1.0).ln();
    Ok(EffectiveTemperature { value, inverted: value < 0.0 })
}

/// Thermal potential difference.
pub fn potential(t_high: f64, t_low: f64) -> f64 {
    t_high - t_low
}

/// Outcome of the current–voltage transfer relation on one wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransferFunction {
    /// f̃_{jk} = 4J_{jk}·V_{jk}/𝒥_{kj}
    Value(f64),
    /// The two nodes sit at the same effective temperature; no drop to
    /// divide by (the wire is balanced, not broken).
    BalancedLink,
}

pub fn transfer_function(
    spec: &CircuitSpec,
    rho: &DensityMatrix,
    j: &str,
    k: &str,
) -> Result<TransferFunction, CurrentError> {
    let c = spec
        .coupling(j, k)
        .ok_or_else(|| CurrentError::NoSuchCoupling(j.to_string(), k.to_string()))?;
    let t_j = effective_temperature(spec, rho, j)?.value;
    let t_k = effective_temperature(spec, rho, k)?.value;
    let v = potential(t_j, t_k);
    if v.abs() <= 1e-10 * t_j.abs().max(t_k.abs()).max(1.0) {
        return Ok(TransferFunction::BalancedLink);
    }
    let current_into_j = link_current(spec, rho, k, j)?;
    Ok(TransferFunction::Value(4.0 * c.j * v / current_into_j))
}

/// A computed entry, or the reason it could not be computed.
pub type Flagged<T> = Result<T, String>;

/// Per-node ledger of every observable on one state. Construction never
/// aborts: entries that fail carry their error text instead.
#[derive(Debug)]
pub struct CurrentReport {
    pub bath_currents: BTreeMap<String, Flagged<f64>>,
    /// Keyed (l, k), oriented into k; both orientations present.
    pub link_currents: BTreeMap<(String, String), Flagged<f64>>,
    /// Kirchhoff sum at each node: bath current (if any) + incoming links.
    pub node_residuals: BTreeMap<String, Flagged<f64>>,
    pub effective_temperatures: BTreeMap<String, Flagged<EffectiveTemperature>>,
    /// (qubit, bath) → T_qubit − T_bath, for every bath against its own qubit.
    pub potentials: BTreeMap<(String, String), Flagged<f64>>,
}

pub fn full_report(spec: &CircuitSpec, rho: &DensityMatrix) -> CurrentReport {
    let mut report = CurrentReport {
        bath_currents: BTreeMap::new(),
        link_currents: BTreeMap::new(),
        node_residuals: BTreeMap::new(),
        effective_temperatures: BTreeMap::new(),
        potentials: BTreeMap::new(),
    };
    for bath in spec.baths() {
        report.bath_currents.insert(
            bath.id.clone(),
            bath_current(spec, rho, &bath.id).map_err(|e| e.to_string()),
        );
    }
    for c in spec.couplings() {
        for (l, k) in [(&c.a, &c.b), (&c.b, &c.a)] {
            report.link_currents.insert(
                (l.clone(), k.clone()),
                link_current(spec, rho, l, k).map_err(|e| e.to_string()),
            );
        }
    }
    for q in spec.qubits() {
        let mut sum = 0.0;
        let mut failure: Option<String> = None;
        if let Some(bath) = spec.bath_on_qubit(&q.id) {
            match &report.bath_currents[&bath.id] {
                Ok(v) => sum += v,
                Err(e) => failure = Some(e.clone()),
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
            match &report.link_currents[&(l.clone(), q.id.clone())] {
                Ok(v) => sum += v,
                Err(e) => failure = Some(e.clone()),
            }
        }
        report
            .node_residuals
            .insert(q.id.clone(), failure.map_or(Ok(sum), Err));
        report.effective_temperatures.insert(
            q.id.clone(),
            effective_temperature(spec, rho, &q.id).map_err(|e| e.to_string()),
        );
    }
    for bath in spec.baths() {
        let key = (bath.qubit.clone(), bath.id.clone());
        let entry = match &report.effective_temperatures[&bath.qubit] {
            Ok(t) => Ok(potential(t.value, bath.temperature)),
            Err(e) => Err(e.clone()),
        };
        report.potentials.insert(key, entry);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::steady_state;
    use crate::netlist::parse_circuit;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn resistor(omega1: f64, omega2: f64, j: f64, t: f64, ga: f64, gb: f64) -> CircuitSpec {
        parse_circuit(&format!(
            "qubit 1 omega={omega1}\nqubit 2 omega={omega2}\ncoupling 1 2 J={j}\n\
             bath A qubit=1 T=0 gamma={ga}\nbath B qubit=2 T={t} gamma={gb}\n"
        ))
        .unwrap()
    }

    #[test]
    fn resistor_node_currents_cancel() {
        let spec = resistor(2.0, 2.5, 1.0, 4.0, 0.01, 0.05);
        let rho = steady_state(&spec).unwrap().rho;
        let j_a1 = bath_current(&spec, &rho, "A").unwrap();
        let j_21 = link_current(&spec, &rho, "2", "1").unwrap();
        assert!(j_a1 < 0.0, "ground bath should drain heat, got {j_a1}");
        assert_abs_diff_eq!(j_a1 + j_21, 0.0, epsilon = 1e-12 * j_a1.abs());
        let j_b2 = bath_current(&spec, &rho, "B").unwrap();
        let j_12 = link_current(&spec, &rho, "1", "2").unwrap();
        assert_abs_diff_eq!(j_b2 + j_12, 0.0, epsilon = 1e-12 * j_b2.abs());
    }

    #[test]
    fn transformer_ratio_between_frequencies() {
        let spec = resistor(2.0, 5.0, 0.8, 7.0, 0.1, 0.2);
        let rho = steady_state(&spec).unwrap().rho;
        let j_21 = link_current(&spec, &rho, "2", "1").unwrap();
        let j_12 = link_current(&spec, &rho, "1", "2").unwrap();
        // 𝒥_{jk}/ω_k antisymmetry ⇒ |𝒥₂₁/𝒥₁₂| = ω₁/ω₂
        assert_abs_diff_eq!(j_21 / 2.0 + j_12 / 5.0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn heat_and_spin_currents_are_proportional() {
        let spec = resistor(3.0, 3.0, 0.5, 6.0, 0.05, 0.04);
        let rho = steady_state(&spec).unwrap().rho;
        let heat = link_current(&spec, &rho, "1", "2").unwrap();
        let magnet = spin_current(&spec, &rho, "1", "2").unwrap();
        assert_abs_diff_eq!(heat.abs(), 3.0 / 2.0 * magnet.abs(), epsilon = 1e-12);
    }

    #[test]
    fn spin_current_vanishes_on_diagonal_states() {
        let spec = resistor(1.0, 2.0, 0.7, 3.0, 0.1, 0.1);
        let mut m = Array2::<Complex64>::zeros((4, 4));
        for i in 0..4 {
            m[(i, i)] = Complex64::new(0.25, 0.0);
        }
        let rho = DensityMatrix::new(Operator::from_dense(m).unwrap()).unwrap();
        assert_eq!(spin_current(&spec, &rho, "1", "2").unwrap(), 0.0);
    }

    #[test]
    fn dark_circuit_carries_no_current() {
        let spec = resistor(1.0, 1.3, 0.6, 0.0, 0.2, 0.3);
        let rho = steady_state(&spec).unwrap().rho;
        assert!(bath_current(&spec, &rho, "A").unwrap().abs() < 1e-12);
        assert!(bath_current(&spec, &rho, "B").unwrap().abs() < 1e-12);
        assert!(link_current(&spec, &rho, "1", "2").unwrap().abs() < 1e-12);
    }

    #[test]
    fn totals_balance_and_decompose() {
        let spec = resistor(1.5, 2.0, 0.9, 8.0, 0.15, 0.07);
        let rho = steady_state(&spec).unwrap().rho;
        let chain = chain_total_currents(&spec, &rho).unwrap();
        let scale = chain.i_left().abs().max(chain.i_right().abs());
        assert_abs_diff_eq!(chain.i_left() + chain.i_right(), 0.0, epsilon = 1e-12 * scale);
        for end in [&chain.left, &chain.right] {
            assert_abs_diff_eq!(
                end.total,
                end.bath_current + end.edge_term,
                epsilon = 1e-12 * scale.max(1.0)
            );
        }
    }

    #[test]
    fn equilibrium_carries_no_total_current() {
        // Both baths at the same temperature: nothing flows.
        let spec = parse_circuit(
            "qubit 1 omega=1.2\nqubit 2 omega=1.2\ncoupling 1 2 J=0.5\n\
             bath A qubit=1 T=3 gamma=0.1\nbath B qubit=2 T=3 gamma=0.2\n",
        )
        .unwrap();
        let rho = steady_state(&spec).unwrap().rho;
        let chain = chain_total_currents(&spec, &rho).unwrap();
        assert!(chain.i_left().abs() < 1e-11);
        assert!(chain.i_right().abs() < 1e-11);
    }

    #[test]
    fn gibbs_state_reads_back_its_own_temperature() {
        let (omega, t): (f64, f64) = (1.4, 2.6);
        let spec =
            parse_circuit(&format!("qubit 1 omega={omega}\nbath A qubit=1 T={t} gamma=0.2\n"))
                .unwrap();
        let rho = steady_state(&spec).unwrap().rho;
        let eff = effective_temperature(&spec, &rho, "1").unwrap();
        assert!(!eff.inverted);
        assert_abs_diff_eq!(eff.value, t, epsilon = 1e-10);
    }

    #[test]
    fn balanced_populations_have_no_temperature() {
        let spec = parse_circuit("qubit 1 omega=1\nbath A qubit=1 T=1 gamma=0.1\n").unwrap();
        let m = Array2::<Complex64>::eye(2).mapv(|v| v * Complex64::new(0.5, 0.0));
        let rho = DensityMatrix::new(Operator::from_dense(m).unwrap()).unwrap();
        assert!(matches!(
            effective_temperature(&spec, &rho, "1"),
            Err(CurrentError::InfiniteTemperature(_))
        ));
    }

    #[test]
    fn fully_polarized_population_is_degenerate() {
        let spec = parse_circuit("qubit 1 omega=1\nbath A qubit=1 T=1 gamma=0.1\n").unwrap();
        let mut m = Array2::<Complex64>::zeros((2, 2));
        m[(1, 1)] = Complex64::ONE;
        let rho = DensityMatrix::new(Operator::from_dense(m).unwrap()).unwrap();
        assert!(matches!(
            effective_temperature(&spec, &rho, "1"),
            Err(CurrentError::DegeneratePopulation { .. })
        ));
    }

    #[test]
    fn population_inversion_is_flagged_not_rejected() {
        let spec = parse_circuit("qubit 1 omega=2\nbath A qubit=1 T=1 gamma=0.1\n").unwrap();
        let mut m = Array2::<Complex64>::zeros((2, 2));
        m[(0, 0)] = Complex64::new(0.8, 0.0); // upper level overpopulated
        m[(1, 1)] = Complex64::new(0.2, 0.0);
        let rho = DensityMatrix::new(Operator::from_dense(m).unwrap()).unwrap();
        let eff = effective_temperature(&spec, &rho, "1").unwrap();
        assert!(eff.inverted);
        assert!(eff.value < 0.0);
    }

    #[test]
    fn report_covers_every_node_and_edge() {
        let spec = resistor(2.0, 2.5, 1.0, 4.0, 0.01, 0.05);
        let rho = steady_state(&spec).unwrap().rho;
        let report = full_report(&spec, &rho);
        assert_eq!(report.bath_currents.len(), 2);
        assert_eq!(report.link_currents.len(), 2); // one wire, both orientations
        assert_eq!(report.node_residuals.len(), 2);
        for (node, resid) in &report.node_residuals {
            let r = resid.as_ref().unwrap();
            assert!(r.abs() < 1e-11, "node {node} residual {r}");
        }
        // V_{1A} = T₁ − 0 = T₁
        let t1 = report.effective_temperatures["1"].as_ref().unwrap().value;
        let v1a = report.potentials[&("1".to_string(), "A".to_string())]
            .as_ref()
            .unwrap();
        assert_abs_diff_eq!(*v1a, t1, epsilon = 1e-15);
    }

    #[test]
    fn report_flags_undefined_temperatures_without_aborting() {
        // Dark double-ground circuit: both qubits fully polarized.
        let spec = resistor(1.0, 1.4, 0.8, 0.0, 0.2, 0.3);
        let rho = steady_state(&spec).unwrap().rho;
        let report = full_report(&spec, &rho);
        for q in ["1", "2"] {
            assert!(report.effective_temperatures[q].is_err());
        }
        // Currents are all fine (zero), so residuals are present.
        for resid in report.node_residuals.values() {
            assert!(resid.as_ref().unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_function_reports_balance_on_symmetric_circuits() {
        let spec = parse_circuit(
            "qubit 1 omega=1.5\nqubit 2 omega=1.5\ncoupling 1 2 J=0.4\n\
             bath A qubit=1 T=2 gamma=0.1\nbath B qubit=2 T=2 gamma=0.1\n",
        )
        .unwrap();
        let rho = steady_state(&spec).unwrap().rho;
        assert_eq!(
            transfer_function(&spec, &rho, "1", "2").unwrap(),
            TransferFunction::BalancedLink
        );
    }

    #[test]
    fn transfer_function_reproduces_the_link_current() {
        let spec = resistor(2.0, 2.5, 1.0, 6.0, 0.02, 0.05);
        let rho = steady_state(&spec).unwrap().rho;
        match transfer_function(&spec, &rho, "1", "2").unwrap() {
            TransferFunction::Value(f) => {
                let t1 = effective_temperature(&spec, &rho, "1").unwrap().value;
                let t2 = effective_temperature(&spec, &rho, "2").unwrap().value;
                let j21 = link_current(&spec, &rho, "2", "1").unwrap();
                assert_abs_diff_eq!(
                    j21,
                    4.0 * 1.0 * (t1 - t2) / f,
                    epsilon = 1e-12 * j21.abs()
                );
            }
            other => panic!("expected a value, got {other:?}"),
        }
    }
}
