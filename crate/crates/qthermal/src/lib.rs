//! Steady-state simulator for networks of qubits coupled by Heisenberg-XX
//! links and driven by local thermal baths.
//!
//! A circuit is a set of qubits (nodes), XX couplings (wires/resistors), and
//! baths attached to individual qubits. The dynamics is the GKSL master
//! equation with local dissipators; the steady state is the kernel of the
//! Liouvillian. On top of the steady state the crate computes heat currents,
//! effective temperatures, and thermal potentials, and checks the circuit
//! laws they obey (current law at every node, the frequency-scaling
//! "transformer" relation on every link, Wheatstone-type balance conditions,
//! and the adder relations).
//!
//! Module layout:
//! - [`hilbert`]: operator algebra on tensor-product qubit spaces
//! - [`netlist`]: circuit description model, parser, and validator
//! - [`liouvillian`]: generator assembly, steady-state solver, propagation
//! - [`currents`]: heat/spin currents, effective temperatures, potentials
//! - [`circuits`]: factory constructors for the named circuits + the
//!   closed-form two-qubit steady state
//! - [`verify`]: named law checks over any circuit

pub mod circuits;
pub mod currents;
pub mod hilbert;
pub mod liouvillian;
pub mod netlist;
pub mod verify;
