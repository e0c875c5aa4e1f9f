//! Circuit descriptions: data model, line-oriented parser, validation.
//!
//! A circuit file (`.qtc`) holds one statement per line; `#` starts a
//! comment. Statements are
//!
//! ```text
//! qubit <id> omega=<float>
//! coupling <id> <id> J=<float>
//! bath <id> qubit=<id> T=<float> gamma=<float>
//! ```
//!
//! Ids are alphanumeric tokens; floats accept scientific notation. The
//! parsed [`CircuitSpec`] is the single source of truth consumed by the
//! Hamiltonian builder, the solvers, and the observable layer.

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Solver guardrail: Liouville space is 4ⁿ-dimensional.
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum NetlistError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("no qubits declared")]
    NoQubits,
    #[error("{n} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits { n: usize },
    #[error("duplicate qubit id `{0}`")]
    DuplicateQubit(String),
    #[error("duplicate bath id `{0}`")]
    DuplicateBath(String),
    #[error("qubit `{0}` couples to itself")]
    SelfCoupling(String),
    #[error("coupling references unknown qubit `{0}`")]
    UnknownQubitInCoupling(String),
    #[error("duplicate coupling between `{0}` and `{1}`")]
    DuplicateCoupling(String, String),
    #[error("bath `{0}` is attached to unknown qubit `{1}`")]
    UnknownQubitInBath(String, String),
    #[error("qubit `{0}` has more than one bath")]
    MultipleBathsOnQubit(String),
    #[error("qubit `{id}`: frequency must be positive and finite, got {value}")]
    BadFrequency { id: String, value: f64 },
    #[error("bath `{id}`: rate must be positive and finite, got {value}")]
    BadRate { id: String, value: f64 },
    #[error("bath `{id}`: temperature must be finite and ≥ 0, got {value}")]
    BadTemperature { id: String, value: f64 },
    #[error("coupling {a}–{b}: strength must be finite, got {value}")]
    BadCoupling { a: String, b: String, value: f64 },
    #[error("parameter path `{0}` does not resolve to a scalar in this circuit")]
    UnresolvedPath(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qubit {
    pub id: String,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub a: String,
    pub b: String,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bath {
    pub id: String,
    pub qubit: String,
    pub temperature: f64,
    pub gamma: f64,
}

/// A validated circuit: qubits with frequencies, symmetric XX couplings,
/// and local thermal baths (at most one per qubit).
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    qubits: Vec<Qubit>,
    couplings: Vec<Coupling>,
    baths: Vec<Bath>,
}

impl CircuitSpec {
    /// Validates and canonicalizes the given parts. Couplings with J = 0
    /// mean "no wire" and are dropped here.
    pub fn assemble(
        qubits: Vec<Qubit>,
        couplings: Vec<Coupling>,
        baths: Vec<Bath>,
    ) -> Result<CircuitSpec, NetlistError> {
        let couplings: Vec<Coupling> =
            couplings.into_iter().filter(|c| c.j != 0.0).collect();
        let spec = CircuitSpec { qubits, couplings, baths };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), NetlistError> {
        if self.qubits.is_empty() {
            return Err(NetlistError::NoQubits);
        }
        if self.qubits.len() > MAX_QUBITS {
            return Err(NetlistError::TooManyQubits { n: self.qubits.len() });
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if self.qubits[..i].iter().any(|p| p.id == q.id) {
                return Err(NetlistError::DuplicateQubit(q.id.clone()));
            }
            if !(q.omega.is_finite() && q.omega > 0.0) {
                return Err(NetlistError::BadFrequency { id: q.id.clone(), value: q.omega });
            }
        }
        for (i, c) in self.couplings.iter().enumerate() {
            if c.a == c.b {
                return Err(NetlistError::SelfCoupling(c.a.clone()));
            }
            for end in [&c.a, &c.b] {
                if self.qubit_site(end).is_none() {
                    return Err(NetlistError::UnknownQubitInCoupling(end.clone()));
                }
            }
            if self.couplings[..i]
                .iter()
                .any(|p| (p.a == c.a && p.b == c.b) || (p.a == c.b && p.b == c.a))
            {
                return Err(NetlistError::DuplicateCoupling(c.a.clone(), c.b.clone()));
            }
            if !c.j.is_finite() {
                return Err(NetlistError::BadCoupling {
                    a: c.a.clone(),
                    b: c.b.clone(),
                    value: c.j,
                });
            }
        }
        for (i, b) in self.baths.iter().enumerate() {
            if self.baths[..i].iter().any(|p| p.id == b.id) {
                return Err(NetlistError::DuplicateBath(b.id.clone()));
            }
            if self.qubit_site(&b.qubit).is_none() {
                return Err(NetlistError::UnknownQubitInBath(b.id.clone(), b.qubit.clone()));
            }
            if self.baths[..i].iter().any(|p| p.qubit == b.qubit) {
                return Err(NetlistError::MultipleBathsOnQubit(b.qubit.clone()));
            }
            if !(b.gamma.is_finite() && b.gamma > 0.0) {
                return Err(NetlistError::BadRate { id: b.id.clone(), value: b.gamma });
            }
            if !(b.temperature.is_finite() && b.temperature >= 0.0) {
                return Err(NetlistError::BadTemperature {
                    id: b.id.clone(),
                    value: b.temperature,
                });
            }
        }
        Ok(())
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn baths(&self) -> &[Bath] {
        &self.baths
    }

    pub fn n(&self) -> usize {
        self.qubits.len()
    }

    /// 1-based tensor-factor position of a qubit (declaration order).
    pub fn qubit_site(&self, id: &str) -> Option<usize> {
        self.qubits.iter().position(|q| q.id == id).map(|i| i + 1)
    }

    pub fn qubit(&self, id: &str) -> Option<&Qubit> {
        self.qubits.iter().find(|q| q.id == id)
    }

    pub fn bath(&self, id: &str) -> Option<&Bath> {
        self.baths.iter().find(|b| b.id == id)
    }

    pub fn bath_on_qubit(&self, qubit_id: &str) -> Option<&Bath> {
        self.baths.iter().find(|b| b.qubit == qubit_id)
    }

    /// The coupling between two qubits, in either order.
    pub fn coupling(&self, a: &str, b: &str) -> Option<&Coupling> {
        self.couplings
            .iter()
            .find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
    }

    /// Copy-on-write replacement of one scalar; the original is unchanged.
    pub fn set_parameter(
        &self,
        path: &ParameterPath,
        value: f64,
    ) -> Result<CircuitSpec, NetlistError> {
        let mut next = self.clone();
        match path {
            ParameterPath::QubitOmega { qubit } => {
                let q = next
                    .qubits
                    .iter_mut()
                    .find(|q| &q.id == qubit)
                    .ok_or_else(|| NetlistError::UnresolvedPath(path.to_string()))?;
                q.omega = value;
            }
            ParameterPath::CouplingJ { a, b } => {
                let c = next
                    .couplings
                    .iter_mut()
                    .find(|c| (&c.a == a && &c.b == b) || (&c.a == b && &c.b == a))
                    .ok_or_else(|| NetlistError::UnresolvedPath(path.to_string()))?;
                c.j = value;
            }
            ParameterPath::BathTemperature { bath } => {
                let b = next
                    .baths
                    .iter_mut()
                    .find(|x| &x.id == bath)
                    .ok_or_else(|| NetlistError::UnresolvedPath(path.to_string()))?;
                b.temperature = value;
            }
            ParameterPath::BathGamma { bath } => {
                let b = next
                    .baths
                    .iter_mut()
                    .find(|x| &x.id == bath)
                    .ok_or_else(|| NetlistError::UnresolvedPath(path.to_string()))?;
                b.gamma = value;
            }
        }
        // A new J = 0 switches the wire off, consistent with parsing.
        next.couplings.retain(|c| c.j != 0.0);
        next.validate()?;
        Ok(next)
    }

    /// Canonical text form; `parse_circuit` inverts it exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for q in &self.qubits {
            out.push_str(&format!("qubit {} omega={}\n", q.id, q.omega));
        }
        for c in &self.couplings {
            out.push_str(&format!("coupling {} {} J={}\n", c.a, c.b, c.j));
        }
        for b in &self.baths {
            out.push_str(&format!(
                "bath {} qubit={} T={} gamma={}\n",
                b.id, b.qubit, b.temperature, b.gamma
            ));
        }
        out
    }
}

/// Addresses one scalar of a [`CircuitSpec`] (used by sweeps).
///
/// Text form: `qubit.<id>.omega`, `coupling.<a>.<b>.J`, `bath.<id>.T`,
/// `bath.<id>.gamma`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParameterPath {
    QubitOmega { qubit: String },
    CouplingJ { a: String, b: String },
    BathTemperature { bath: String },
    BathGamma { bath: String },
}

impl fmt::Display for ParameterPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterPath::QubitOmega { qubit } => write!(f, "qubit.{qubit}.omega"),
            ParameterPath::CouplingJ { a, b } => write!(f, "coupling.{a}.{b}.J"),
            ParameterPath::BathTemperature { bath } => write!(f, "bath.{bath}.T"),
            ParameterPath::BathGamma { bath } => write!(f, "bath.{bath}.gamma"),
        }
    }
}

impl FromStr for ParameterPath {
    type Err = NetlistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        let path = match parts.as_slice() {
            ["qubit", id, "omega"] => {
                ParameterPath::QubitOmega { qubit: (*id).to_string() }
            }
            ["coupling", a, b, "J"] => {
                ParameterPath::CouplingJ { a: (*a).to_string(), b: (*b).to_string() }
            }
            ["bath", id, "T"] => ParameterPath::BathTemperature { bath: (*id).to_string() },
            ["bath", id, "gamma"] => ParameterPath::BathGamma { bath: (*id).to_string() },
            _ => return Err(NetlistError::UnresolvedPath(s.to_string())),
        };
        Ok(path)
    }
}

/// One whitespace-separated token plus its 1-based column.
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (byte index, column)
    let mut col = 0usize;
    for (byte, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((s, c)) = start.take() {
                tokens.push(Token { text: &line[s..byte], col: c });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((s, c)) = start {
        tokens.push(Token { text: &line[s..], col: c });
    }
    tokens
}

fn syntax(line_no: usize, col: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax { line: line_no, col, message: message.into() }
}

fn expect_id(tok: &Token<'_>, line_no: usize, what: &str) -> Result<String, NetlistError> {
    if !tok.text.is_empty() && tok.text.chars().all(char::is_alphanumeric) {
        Ok(tok.text.to_string())
    } else {
        Err(syntax(
            line_no,
            tok.col,
            format!("expected {what} (alphanumeric token), got `{}`", tok.text),
        ))
    }
}

/// Parses a `key=<float>` token; the key must match exactly.
fn expect_float(tok: &Token<'_>, line_no: usize, key: &str) -> Result<f64, NetlistError> {
    let Some((k, v)) = tok.text.split_once('=') else {
        return Err(syntax(
            line_no,
            tok.col,
            format!("expected `{key}=<float>`, got `{}`", tok.text),
        ));
    };
    if k != key {
        return Err(syntax(
            line_no,
            tok.col,
            format!("expected `{key}=<float>`, got key `{k}`"),
        ));
    }
    v.parse::<f64>().map_err(|_| {
        syntax(line_no, tok.col, format!("`{v}` is not a valid float for `{key}`"))
    })
}

/// Parses a `key=<id>` token (used by `bath ... qubit=<id>`).
fn expect_id_value(tok: &Token<'_>, line_no: usize, key: &str) -> Result<String, NetlistError> {
    let Some((k, v)) = tok.text.split_once('=') else {
        return Err(syntax(
            line_no,
            tok.col,
            format!("expected `{key}=<id>`, got `{}`", tok.text),
        ));
    };
    if k != key {
        return Err(syntax(line_no, tok.col, format!("expected `{key}=<id>`, got key `{k}`")));
    }
    if !v.is_empty() && v.chars().all(char::is_alphanumeric) {
        Ok(v.to_string())
    } else {
        Err(syntax(line_no, tok.col, format!("`{v}` is not a valid id for `{key}`")))
    }
}

/// Parses a circuit document and validates it.
pub fn parse_circuit(text: &str) -> Result<CircuitSpec, NetlistError> {
    let mut qubits = Vec::new();
    let mut couplings = Vec::new();
    let mut baths = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let expect_len = |want: usize, usage: &str| -> Result<(), NetlistError> {
            if tokens.len() == want {
                Ok(())
            } else {
                Err(syntax(
                    line_no,
                    tokens.first().map_or(1, |t| t.col),
                    format!("expected `{usage}`"),
                ))
            }
        };
        match tokens[0].text {
            "qubit" => {
                expect_len(3, "qubit <id> omega=<float>")?;
                let id = expect_id(&tokens[1], line_no, "qubit id")?;
                let omega = expect_float(&tokens[2], line_no, "omega")?;
                qubits.push(Qubit { id, omega });
            }
            "coupling" => {
                expect_len(4, "coupling <id> <id> J=<float>")?;
                let a = expect_id(&tokens[1], line_no, "qubit id")?;
                let b = expect_id(&tokens[2], line_no, "qubit id")?;
                let j = expect_float(&tokens[3], line_no, "J")?;
                couplings.push(Coupling { a, b, j });
            }
            "bath" => {
                expect_len(5, "bath <id> qubit=<id> T=<float> gamma=<float>")?;
                let id = expect_id(&tokens[1], line_no, "bath id")?;
                let qubit = expect_id_value(&tokens[2], line_no, "qubit")?;
                let temperature = expect_float(&tokens[3], line_no, "T")?;
                let gamma = expect_float(&tokens[4], line_no, "gamma")?;
                baths.push(Bath { id, qubit, temperature, gamma });
            }
            other => {
                return Err(syntax(
                    line_no,
                    tokens[0].col,
                    format!("unknown statement `{other}` (expected qubit/coupling/bath)"),
                ));
            }
        }
    }

    CircuitSpec::assemble(qubits, couplings, baths)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RESISTOR: &str = "\
qubit 1 omega=1.0
qubit 2 omega=1.0
coupling 1 2 J=0.5
bath A qubit=1 T=0 gamma=0.5
bath B qubit=2 T=10 gamma=0.05
";

    #[test]
    fn parses_resistor() {
        let spec = parse_circuit(RESISTOR).unwrap();
        assert_eq!(spec.n(), 2);
        assert_eq!(spec.couplings().len(), 1);
        assert_eq!(spec.baths().len(), 2);
        assert_eq!(spec.qubit_site("2"), Some(2));
        assert_eq!(spec.bath("B").unwrap().temperature, 10.0);
        assert_eq!(spec.coupling("2", "1").unwrap().j, 0.5);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\nqubit 1 omega=2.0  # inline\n";
        let spec = parse_circuit(text).unwrap();
        assert_eq!(spec.n(), 1);
        assert_eq!(spec.qubit("1").unwrap().omega, 2.0);
    }

    #[test]
    fn empty_document_is_an_error() {
        assert_eq!(parse_circuit(""), Err(NetlistError::NoQubits));
    }

    #[test]
    fn self_coupling_is_an_error() {
        let text = "qubit 1 omega=1\ncoupling 1 1 J=1\n";
        assert_eq!(parse_circuit(text), Err(NetlistError::SelfCoupling("1".into())));
    }

    #[test]
    fn two_baths_on_one_qubit_is_an_error() {
        let text = "\
qubit 1 omega=1
bath A qubit=1 T=0 gamma=0.1
bath B qubit=1 T=1 gamma=0.1
";
        assert_eq!(
            parse_circuit(text),
            Err(NetlistError::MultipleBathsOnQubit("1".into()))
        );
    }

    #[test]
    fn negative_frequency_is_an_error() {
        let err = parse_circuit("qubit 1 omega=-1\n").unwrap_err();
        assert!(matches!(err, NetlistError::BadFrequency { .. }));
    }

    #[test]
    fn zero_couplings_are_dropped() {
        let text = "qubit 1 omega=1\nqubit 2 omega=1\ncoupling 1 2 J=0\n";
        let spec = parse_circuit(text).unwrap();
        assert!(spec.couplings().is_empty());
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_circuit("qubit 1 omega=1\nwire 1 2\n").unwrap_err();
        match err {
            NetlistError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn nan_and_infinity_are_rejected() {
        assert!(matches!(
            parse_circuit("qubit 1 omega=NaN\n").unwrap_err(),
            NetlistError::BadFrequency { .. }
        ));
        let text = "qubit 1 omega=1\nqubit 2 omega=1\ncoupling 1 2 J=inf\n";
        assert!(matches!(
            parse_circuit(text).unwrap_err(),
            NetlistError::BadCoupling { .. }
        ));
    }

    #[test]
    fn serialize_round_trips() {
        let spec = parse_circuit(RESISTOR).unwrap();
        let again = parse_circuit(&spec.serialize()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn set_parameter_is_copy_on_write() {
        let spec = parse_circuit(RESISTOR).unwrap();
        let path: ParameterPath = "bath.B.T".parse().unwrap();
        let hot = spec.set_parameter(&path, 5.0).unwrap();
        assert_eq!(spec.bath("B").unwrap().temperature, 10.0);
        assert_eq!(hot.bath("B").unwrap().temperature, 5.0);
    }

    #[test]
    fn set_parameter_rejects_missing_targets() {
        let spec = parse_circuit(RESISTOR).unwrap();
        let path: ParameterPath = "qubit.9.omega".parse().unwrap();
        assert!(matches!(
            spec.set_parameter(&path, 1.0),
            Err(NetlistError::UnresolvedPath(_))
        ));
    }

    #[test]
    fn parameter_path_display_round_trips() {
        for s in ["qubit.1.omega", "coupling.3.4.J", "bath.B.T", "bath.A.gamma"] {
            let p: ParameterPath = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("qubit.omega".parse::<ParameterPath>().is_err());
    }
}
