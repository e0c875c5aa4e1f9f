//! Factory constructors for the named circuit topologies — resistor, loop,
//! diode, transistor, Wheatstone bridges, adder — plus the closed-form
//! two-qubit steady state that serves as an independent oracle for the
//! numerical solver.

use crate::currents::{bath_current, total_bath_current, CurrentError};
use crate::hilbert::{DensityMatrix, Operator};
use crate::liouvillian::steady_state;
use crate::netlist::{Bath, CircuitSpec, Coupling, NetlistError, Qubit};
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("the closed form needs finite β; solve T = 0 numerically")]
    ZeroTemperature,
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Current(#[from] CurrentError),
}

fn q(id: &str, omega: f64) -> Qubit {
    Qubit { id: id.to_string(), omega }
}

fn wire(a: &str, b: &str, j: f64) -> Coupling {
    Coupling { a: a.to_string(), b: b.to_string(), j }
}

fn bath(id: &str, qubit: &str, temperature: f64, gamma: f64) -> Bath {
    Bath { id: id.to_string(), qubit: qubit.to_string(), temperature, gamma }
}

/// Two qubits on one wire: qubit 1 grounded by bath A at T = 0, qubit 2
/// driven by bath B at temperature `t`.
pub fn resistor(
    omega1: f64,
    omega2: f64,
    j12: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    CircuitSpec::assemble(
        vec![q("1", omega1), q("2", omega2)],
        vec![wire("1", "2", j12)],
        vec![bath("A", "1", 0.0, gamma_a), bath("B", "2", t, gamma_b)],
    )
}

/// Closed-form steady state of the two-qubit resistor, expressed through
/// the rational functions α_ij/η_ij of the circuit parameters.
#[derive(Debug, Clone)]
pub struct AnalyticResistorState {
    pub omega1: f64,
    pub omega2: f64,
    pub j12: f64,
    pub t: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub beta: f64,
    pub x0: f64,
    pub alpha_00: f64,
    pub alpha_11: f64,
    pub alpha_12: Complex64,
    pub alpha_22: f64,
    pub alpha_33: f64,
    pub eta_00: f64,
    pub eta_11: f64,
    pub eta_12: f64,
    pub eta_22: f64,
    pub eta_33: f64,
}

impl AnalyticResistorState {
    pub fn new(
        omega1: f64,
        omega2: f64,
        j12: f64,
        t: f64,
        gamma_a: f64,
        gamma_b: f64,
    ) -> Result<Self, CircuitError> {
        if t <= 0.0 {
            return Err(CircuitError::ZeroTemperature);
        }
        let beta = 1.0 / t;
        let e = (beta * omega2).exp();
        let c = 1.0 / (beta * omega2 / 2.0).tanh();
        let detune = omega1 - omega2;
        let x0 = gamma_b - gamma_a + e * (gamma_a + gamma_b);
        let drive = gamma_a + gamma_b * c;
        let j16 = 16.0 * j12 * j12;
        let alpha_00 = j16 * gamma_b * gamma_b * drive;
        let eta_00 = x0
            * (gamma_a
                * (j16 * x0 + gamma_b * (1.0 + e) * (gamma_a * gamma_a + 4.0 * detune * detune))
                + gamma_b
                    * c
                    * (j16 * x0
                        + gamma_a * gamma_b * (1.0 + e) * (2.0 * gamma_a + gamma_b * c)));
        let alpha_11 = (x0 - gamma_b) * alpha_00;
        let eta_11 = gamma_b * eta_00;
        let alpha_12 = Complex64::new(
            -8.0 * j12 * gamma_a * gamma_b * detune,
            -4.0 * j12 * gamma_a * gamma_b * drive,
        );
        let eta_12 = eta_00 / x0;
        let alpha_22 = gamma_b
            * (j16 * (e - 1.0) * (x0 - gamma_b)
                + gamma_a * (x0 * x0 + 4.0 * (e - 1.0) * (e - 1.0) * detune * detune));
        let eta_22 = eta_00 * (e - 1.0) * (e - 1.0) / x0;
        let alpha_33 =
            j16 * drive * (gamma_a * gamma_a * (e - 1.0) * (e - 1.0) - e * (e + 1.0) * gamma_b * gamma_b);
        let eta_33 = eta_00 * (e + 1.0);
        Ok(AnalyticResistorState {
            omega1,
            omega2,
            j12,
            t,
            gamma_a,
            gamma_b,
            beta,
            x0,
            alpha_00,
            alpha_11,
            alpha_12,
            alpha_22,
            alpha_33,
            eta_00,
            eta_11,
            eta_12,
            eta_22,
            eta_33,
        })
    }

    /// Assembles the 4×4 state in the basis |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn density_matrix(&self) -> Result<DensityMatrix, CircuitError> {
        let e = (self.beta * self.omega2).exp();
        let mut m = Array2::<Complex64>::zeros((4, 4));
        m[(0, 0)] = Complex64::new(self.alpha_00 / self.eta_00, 0.0);
        m[(1, 1)] = Complex64::new(self.alpha_11 / self.eta_11, 0.0);
        m[(2, 2)] = Complex64::new(self.alpha_22 / self.eta_22, 0.0);
        m[(3, 3)] =
            Complex64::new(1.0 - 1.0 / (1.0 + e) + self.alpha_33 / self.eta_33, 0.0);
        m[(1, 2)] = self.alpha_12 / self.eta_12;
        m[(2, 1)] = m[(1, 2)].conj();
        let op = Operator::from_dense(m).map_err(CurrentError::from)?;
        Ok(DensityMatrix::new(op).map_err(CurrentError::from)?)
    }

    /// 𝒥_{A1} = −γ_A ω₁ (α₀₀/η₀₀ + α₁₁/η₁₁), the ground-bath drain.
    pub fn ground_bath_current(&self) -> f64 {
        -self.gamma_a * self.omega1 * (self.alpha_00 / self.eta_00 + self.alpha_11 / self.eta_11)
    }

    /// 𝒥₂₁ = −4J ω₁ ℑ(α₁₂)/η₁₂, the wire current into qubit 1.
    pub fn wire_current_into_1(&self) -> f64 {
        -4.0 * self.j12 * self.omega1 * self.alpha_12.im / self.eta_12
    }

    /// Effective temperature of qubit 1, ω₁/ln(γ_B η₀₀/(x₀ α₀₀) − 1).
    pub fn temperature_1(&self) -> f64 {
        self.omega1 / (self.gamma_b * self.eta_00 / (self.x0 * self.alpha_00) - 1.0).ln()
    }
}

pub fn analytic_resistor_steady_state(
    omega1: f64,
    omega2: f64,
    j12: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<DensityMatrix, CircuitError> {
    AnalyticResistorState::new(omega1, omega2, j12, t, gamma_a, gamma_b)?.density_matrix()
}

/// Three mutually coupled qubits; baths A (T = 0) on qubit 1 and B on
/// qubit 2, qubit 3 floating.
pub fn three_qubit_loop(
    omegas: [f64; 3],
    j12: f64,
    j13: f64,
    j23: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    CircuitSpec::assemble(
        vec![q("1", omegas[0]), q("2", omegas[1]), q("3", omegas[2])],
        vec![wire("1", "2", j12), wire("1", "3", j13), wire("2", "3", j23)],
        vec![bath("A", "1", 0.0, gamma_a), bath("B", "2", t, gamma_b)],
    )
}

/// The resistor with bath A lifted off the ground: both bath temperatures
/// free, so the current direction flips with the bias T_A − T_B.
pub fn diode(
    omega1: f64,
    omega2: f64,
    j12: f64,
    t_a: f64,
    t_b: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    CircuitSpec::assemble(
        vec![q("1", omega1), q("2", omega2)],
        vec![wire("1", "2", j12)],
        vec![bath("A", "1", t_a, gamma_a), bath("B", "2", t_b, gamma_b)],
    )
}

/// Three qubits, three baths: collector, emitter, and base, each bath
/// sharing its qubit's name. Sites 1, 2, 3 hold C, E, B respectively.
#[allow(clippy::too_many_arguments)]
pub fn transistor(
    omega_b: f64,
    omega_c: f64,
    omega_e: f64,
    j_bc: f64,
    j_eb: f64,
    j_ce: f64,
    t_b: f64,
    t_c: f64,
    t_e: f64,
    gamma_b: f64,
    gamma_c: f64,
    gamma_e: f64,
) -> Result<CircuitSpec, NetlistError> {
    CircuitSpec::assemble(
        vec![q("C", omega_c), q("E", omega_e), q("B", omega_b)],
        vec![wire("B", "C", j_bc), wire("E", "B", j_eb), wire("C", "E", j_ce)],
        vec![
            bath("B", "B", t_b, gamma_b),
            bath("C", "C", t_c, gamma_c),
            bath("E", "E", t_e, gamma_e),
        ],
    )
}

/// Steady-state currents of a transistor circuit and its amplification
/// factors α_P = 𝒥_P/𝒥_B.
#[derive(Debug, Clone, Copy)]
pub struct TransistorReport {
    pub j_b: f64,
    pub j_c: f64,
    pub j_e: f64,
    pub alpha_c: f64,
    pub alpha_e: f64,
    /// Σ_P Tr[H_S 𝒟_P(ρ)] — exact global energy balance, zero at steady
    /// state. The per-qubit currents j_* above need not sum to zero.
    pub total_current_sum: f64,
}

pub fn transistor_report(spec: &CircuitSpec) -> Result<TransistorReport, CircuitError> {
    let rho = steady_state(spec).map_err(CurrentError::from)?.rho;
    let j_b = bath_current(spec, &rho, "B")?;
    let j_c = bath_current(spec, &rho, "C")?;
    let j_e = bath_current(spec, &rho, "E")?;
    let total_current_sum = total_bath_current(spec, &rho, "B")?
        + total_bath_current(spec, &rho, "C")?
        + total_bath_current(spec, &rho, "E")?;
    Ok(TransistorReport {
        j_b,
        j_c,
        j_e,
        alpha_c: j_c / j_b,
        alpha_e: j_e / j_b,
        total_current_sum,
    })
}

/// Four-qubit bridge: source arm on qubit 1 (bath A, T = 0), drive arm on
/// qubit 2 (bath B), the galvanometer wire between qubits 3 and 4. Qubits
/// 1 and 2 never couple directly.
#[allow(clippy::too_many_arguments)]
pub fn wheatstone(
    omegas: [f64; 4],
    j13: f64,
    j14: f64,
    j23: f64,
    j24: f64,
    j34: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    CircuitSpec::assemble(
        vec![q("1", omegas[0]), q("2", omegas[1]), q("3", omegas[2]), q("4", omegas[3])],
        vec![
            wire("1", "3", j13),
            wire("1", "4", j14),
            wire("2", "3", j23),
            wire("2", "4", j24),
            wire("3", "4", j34),
        ],
        vec![bath("A", "1", 0.0, gamma_a), bath("B", "2", t, gamma_b)],
    )
}

/// Wheatstone bridge parameterized by a base frequency and per-site field
/// offsets: ω₁ = ω + 2h₁ and ω₄ = ω + 2h₄ folded directly into the qubit
/// frequencies.
#[allow(clippy::too_many_arguments)]
pub fn wheatstone_with_field_offsets(
    omega: f64,
    h1: f64,
    h4: f64,
    j13: f64,
    j14: f64,
    j23: f64,
    j24: f64,
    j34: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    wheatstone(
        [omega + 2.0 * h1, omega, omega, omega + 2.0 * h4],
        j13,
        j14,
        j23,
        j24,
        j34,
        t,
        gamma_a,
        gamma_b,
    )
}

/// Edge order for `super_wheatstone`'s coupling array.
pub const SUPER_WHEATSTONE_EDGES: [(usize, usize); 12] = [
    (1, 5),
    (1, 6),
    (2, 3),
    (2, 4),
    (3, 4),
    (3, 5),
    (3, 7),
    (4, 6),
    (4, 7),
    (5, 6),
    (5, 7),
    (6, 7),
];

/// Seven-qubit bridge-of-bridges: qubit 1 grounded (bath A, T = 0),
/// qubit 2 driven (bath B), twelve wires in `SUPER_WHEATSTONE_EDGES`
/// order. A zero entry means the wire is absent.
pub fn super_wheatstone(
    omegas: [f64; 7],
    js: [f64; 12],
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    let qubits = omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| q(&(i + 1).to_string(), w))
        .collect();
    let couplings = SUPER_WHEATSTONE_EDGES
        .iter()
        .zip(js)
        .map(|(&(a, b), j)| wire(&a.to_string(), &b.to_string(), j))
        .collect();
    CircuitSpec::assemble(
        qubits,
        couplings,
        vec![bath("A", "1", 0.0, gamma_a), bath("B", "2", t, gamma_b)],
    )
}

/// Fully symmetric bridge: every frequency `omega`, every wire `j`. The
/// galvanometer currents 3→4 and 5→6 vanish by symmetry.
pub fn super_wheatstone_condition1(
    omega: f64,
    j: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    super_wheatstone([omega; 7], [j; 12], t, gamma_a, gamma_b)
}

/// Shielded-center bridge: single input (1–5) and output (2–4) arms, the
/// center qubit 7 tied to 3 and 6 only. The ties J₃₄ = J₄₆, J₃₅ = J₅₆ and
/// ω₃ = ω₆ = ω₇ (`omega_center`) put qubit 7 out of the heat's way.
#[allow(clippy::too_many_arguments)]
pub fn super_wheatstone_condition2(
    omega1: f64,
    omega2: f64,
    omega4: f64,
    omega5: f64,
    omega_center: f64,
    j15: f64,
    j24: f64,
    j_34_46: f64,
    j_35_56: f64,
    j37: f64,
    j67: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    super_wheatstone(
        [omega1, omega2, omega_center, omega4, omega5, omega_center, omega_center],
        [j15, 0.0, 0.0, j24, j_34_46, j_35_56, j37, j_34_46, 0.0, j_35_56, 0.0, j67],
        t,
        gamma_a,
        gamma_b,
    )
}

/// Classic four-arm bridge cut out of the seven-qubit circuit, spanned by
/// qubits 1, 5, 7, 6 with ties J₁₅ = J₁₆ and J₅₇ = J₆₇; the galvanometer
/// wire is 5–6. The driven side feeds the bridge through the single wire
/// 4–7, so everything bath B pumps into qubit 2 reaches qubit 7 there:
/// 𝒥₄₇ = (ω₇/ω₂)𝒥_{B2}.
#[allow(clippy::too_many_arguments)]
pub fn super_wheatstone_condition3(
    omegas: [f64; 7],
    j_15_16: f64,
    j23: f64,
    j24: f64,
    j34: f64,
    j47: f64,
    j56: f64,
    j_57_67: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    super_wheatstone(
        omegas,
        [j_15_16, j_15_16, j23, j24, j34, 0.0, 0.0, 0.0, j47, j56, j_57_67, j_57_67],
        t,
        gamma_a,
        gamma_b,
    )
}

/// Edge order for `super_wheatstone_extended`'s coupling array: the
/// shielded-center topology with the central wire lengthened to run
/// 3–7–8–6 through two inner qubits.
pub const EXTENDED_BRIDGE_EDGES: [(usize, usize); 9] = [
    (1, 5),
    (2, 4),
    (3, 4),
    (3, 5),
    (4, 6),
    (5, 6),
    (3, 7),
    (7, 8),
    (6, 8),
];

pub fn super_wheatstone_extended(
    omegas: [f64; 8],
    js: [f64; 9],
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    let qubits = omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| q(&(i + 1).to_string(), w))
        .collect();
    let couplings = EXTENDED_BRIDGE_EDGES
        .iter()
        .zip(js)
        .map(|(&(a, b), j)| wire(&a.to_string(), &b.to_string(), j))
        .collect();
    CircuitSpec::assemble(
        qubits,
        couplings,
        vec![bath("A", "1", 0.0, gamma_a), bath("B", "2", t, gamma_b)],
    )
}

/// Extended bridge at its balance ties: J₃₄ = J₄₆, J₃₅ = J₅₆, one shared
/// frequency on the shielded wire 3–7–8–6, and the mirror tie
/// J₃₇ = J₆₈ on the wire's two ends. The middle coupling j78 stays free.
/// Unlike the single-center bridge, the lengthened wire goes quiet only
/// with the mirror tie in place — and that tie makes the swap
/// (3 6)(7 8) a strong symmetry, so the steady state is degenerate and
/// callers must take the least-norm kernel element.
#[allow(clippy::too_many_arguments)]
pub fn super_wheatstone_extended_balanced(
    omega1: f64,
    omega2: f64,
    omega4: f64,
    omega5: f64,
    omega_center: f64,
    j15: f64,
    j24: f64,
    j_34_46: f64,
    j_35_56: f64,
    j_37_68: f64,
    j78: f64,
    t: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    super_wheatstone_extended(
        [omega1, omega2, omega_center, omega4, omega5, omega_center, omega_center, omega_center],
        [j15, j24, j_34_46, j_35_56, j_34_46, j_35_56, j_37_68, j78, j_37_68],
        t,
        gamma_a,
        gamma_b,
    )
}

/// Star circuit: input qubits "1".."n", each with its own bath (roman
/// numeral ids), all wired to a summing qubit "a" that bath A holds at
/// T = 0. Slices must share one length n ≤ 9.
pub fn adder(
    omegas: &[f64],
    omega_alpha: f64,
    js: &[f64],
    temperatures: &[f64],
    gammas: &[f64],
    gamma_a: f64,
) -> Result<CircuitSpec, NetlistError> {
    const ROMAN: [&str; 9] = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX"];
    let n = omegas.len();
    assert!(
        js.len() == n && temperatures.len() == n && gammas.len() == n,
        "adder parameter slices must share one length"
    );
    assert!(n >= 1 && n <= ROMAN.len(), "adder supports 1..=9 input qubits");
    let mut qubits = vec![q("a", omega_alpha)];
    let mut couplings = Vec::with_capacity(n);
    let mut baths = vec![bath("A", "a", 0.0, gamma_a)];
    for k in 0..n {
        let id = (k + 1).to_string();
        qubits.push(q(&id, omegas[k]));
        couplings.push(wire(&id, "a", js[k]));
        baths.push(bath(ROMAN[k], &id, temperatures[k], gammas[k]));
    }
    CircuitSpec::assemble(qubits, couplings, baths)
}

/// Frequency ratio ω_α/(Nω) at which the symmetric adder's input
/// potentials sum to the output potential at high temperature. Empirical;
/// no closed-form derivation backs the constant.
pub const ADDER_TUNING_RATIO: f64 = 1.618;

/// Symmetric adder at the tuned operating point ω_α = 1.618·n·ω,
/// γ_A = n·γ.
pub fn adder_tuned(
    n: usize,
    omega: f64,
    j: f64,
    t: f64,
    gamma: f64,
) -> Result<CircuitSpec, NetlistError> {
    adder(
        &vec![omega; n],
        ADDER_TUNING_RATIO * n as f64 * omega,
        &vec![j; n],
        &vec![t; n],
        &vec![gamma; n],
        n as f64 * gamma,
    )
}

/// Open chain with baths on its two end qubits: ids "1".."n" in chain
/// order, bath A (temperature `t_a`) on qubit 1, bath B on qubit n.
pub fn chain(
    omegas: &[f64],
    js: &[f64],
    t_a: f64,
    t_b: f64,
    gamma_a: f64,
    gamma_b: f64,
) -> Result<CircuitSpec, NetlistError> {
    let n = omegas.len();
    assert!(n >= 2, "a chain needs at least two qubits");
    assert!(js.len() == n - 1, "a chain of n qubits has n − 1 wires");
    let qubits = omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| q(&(i + 1).to_string(), w))
        .collect();
    let couplings = js
        .iter()
        .enumerate()
        .map(|(i, &j)| wire(&(i + 1).to_string(), &(i + 2).to_string(), j))
        .collect();
    CircuitSpec::assemble(
        qubits,
        couplings,
        vec![bath("A", "1", t_a, gamma_a), bath("B", &n.to_string(), t_b, gamma_b)],
    )
}
