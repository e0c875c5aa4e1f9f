//! Operator algebra on n-qubit tensor-product spaces.
//!
//! Conventions, used consistently across the crate:
//! - `|0⟩` is the σ^z = +1 eigenstate (energy +ω/2), `|1⟩` the σ^z = −1
//!   eigenstate; σ⁻ lowers `|0⟩ → |1⟩`, so a zero-temperature bath drives a
//!   lone qubit into `|1⟩`.
//! - Qubit 1 is the most significant tensor factor: basis index
//!   `i = b₁b₂…bₙ` read as a binary number with qubit 1's bit leftmost.
//! - ħ = k_B = 1.
//!
//! Operators store their entries either densely or in CSR form with
//! identical semantics; construction switches to sparse above
//! [`DENSE_DIM_LIMIT`] so that large Liouville-space operators stay
//! affordable.

use ndarray::Array2;
use num_complex::Complex64;
use sprs::{CsMat, TriMat};
use thiserror::Error;

/// Largest Hilbert-space dimension for which operators are built dense.
/// 64 = six qubits; beyond that a Liouvillian would need gigabytes dense.
pub const DENSE_DIM_LIMIT: usize = 64;

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("operator dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("dimension {dim} is not a power of two")]
    NotPowerOfTwo { dim: usize },
    #[error("site {site} out of range for {n} qubit(s)")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("matrix is not Hermitian: max|ρ − ρ†| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("trace is {trace:.12} instead of 1")]
    NotUnitTrace { trace: f64 },
    #[error("matrix has negative eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },
}

/// Which Pauli (or ladder) operator to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Y,
    Z,
    /// σ⁺ = (σ^x + iσ^y)/2, raises |1⟩ → |0⟩.
    Plus,
    /// σ⁻ = (σ^x − iσ^y)/2, lowers |0⟩ → |1⟩.
    Minus,
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(Array2<Complex64>),
    Sparse(CsMat<Complex64>),
}

/// A complex square matrix on an n-qubit Hilbert space (dim = 2ⁿ).
#[derive(Debug, Clone)]
pub struct Operator {
    dim: usize,
    storage: Storage,
}

fn is_power_of_two(x: usize) -> bool {
    x > 0 && x & (x - 1) == 0
}

impl Operator {
    /// Wraps a dense matrix. The dimension must be a power of two.
    pub fn from_dense(m: Array2<Complex64>) -> Result<Self, HilbertError> {
        let dim = m.nrows();
        if m.ncols() != dim || !is_power_of_two(dim) {
            return Err(HilbertError::NotPowerOfTwo { dim: m.ncols().max(dim) });
        }
        Ok(Operator { dim, storage: Storage::Dense(m) })
    }

    /// Wraps a CSR matrix. The dimension must be a power of two.
    pub fn from_sparse(m: CsMat<Complex64>) -> Result<Self, HilbertError> {
        let dim = m.rows();
        if m.cols() != dim || !is_power_of_two(dim) {
            return Err(HilbertError::NotPowerOfTwo { dim: m.cols().max(dim) });
        }
        Ok(Operator { dim, storage: Storage::Sparse(m) })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(is_power_of_two(dim), "dimension must be a power of two");
        if dim <= DENSE_DIM_LIMIT {
            Operator { dim, storage: Storage::Dense(Array2::zeros((dim, dim))) }
        } else {
            Operator { dim, storage: Storage::Sparse(CsMat::zero((dim, dim))) }
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(is_power_of_two(dim), "dimension must be a power of two");
        if dim <= DENSE_DIM_LIMIT {
            Operator { dim, storage: Storage::Dense(Array2::eye(dim)) }
        } else {
            Operator { dim, storage: Storage::Sparse(CsMat::eye(dim)) }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Number of explicitly stored entries (dim² when dense).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.len(),
            Storage::Sparse(m) => m.nnz(),
        }
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CsMat<Complex64> {
        match &self.storage {
            Storage::Dense(m) => dense_to_csr(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    /// Iterates over the (row, col, value) of every stored nonzero entry.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, Complex64)) {
        match &self.storage {
            Storage::Dense(m) => {
                for ((i, j), &v) in m.indexed_iter() {
                    if v != Complex64::ZERO {
                        f(i, j, v);
                    }
                }
            }
            Storage::Sparse(m) => {
                for (&v, (i, j)) in m.iter() {
                    f(i, j, v);
                }
            }
        }
    }

    fn check_dims(&self, other: &Operator) -> Result<(), HilbertError> {
        if self.dim != other.dim {
            Err(HilbertError::DimMismatch { left: self.dim, right: other.dim })
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator, HilbertError> {
        self.check_dims(other)?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a + b),
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a + b),
            (Storage::Dense(a), Storage::Sparse(b)) => Storage::Dense(a + &b.to_dense()),
            (Storage::Sparse(a), Storage::Dense(b)) => Storage::Dense(&a.to_dense() + b),
        };
        Ok(Operator { dim: self.dim, storage })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator, HilbertError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, z: Complex64) -> Operator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.mapv(|v| v * z)),
            Storage::Sparse(m) => Storage::Sparse(m.map(|&v| v * z)),
        };
        Operator { dim: self.dim, storage }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator, HilbertError> {
        self.check_dims(other)?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a.dot(b)),
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a * b),
            (Storage::Dense(a), Storage::Sparse(b)) => Storage::Dense(a.dot(&b.to_dense())),
            (Storage::Sparse(a), Storage::Dense(b)) => Storage::Dense(a.to_dense().dot(b)),
        };
        Ok(Operator { dim: self.dim, storage })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.t().mapv(|v| v.conj())),
            Storage::Sparse(m) => {
                Storage::Sparse(m.transpose_view().to_owned().map(|v| v.conj()).to_csr())
            }
        };
        Operator { dim: self.dim, storage }
    }

    /// Entry-wise complex conjugate (no transpose).
    pub fn conj(&self) -> Operator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.mapv(|v| v.conj())),
            Storage::Sparse(m) => Storage::Sparse(m.map(|v| v.conj())),
        };
        Operator { dim: self.dim, storage }
    }

    /// Transpose without conjugation.
    pub fn transpose(&self) -> Operator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.t().to_owned()),
            Storage::Sparse(m) => Storage::Sparse(m.transpose_view().to_owned().to_csr()),
        };
        Operator { dim: self.dim, storage }
    }

    pub fn trace(&self) -> Complex64 {
        match &self.storage {
            Storage::Dense(m) => m.diag().sum(),
            Storage::Sparse(m) => {
                let mut t = Complex64::ZERO;
                for (&v, (i, j)) in m.iter() {
                    if i == j {
                        t += v;
                    }
                }
                t
            }
        }
    }

    /// Matrix–vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "vector length must match operator dim");
        match &self.storage {
            Storage::Dense(m) => {
                let mut out = vec![Complex64::ZERO; self.dim];
                for (i, row) in m.rows().into_iter().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for (j, &a) in row.iter().enumerate() {
                        acc += a * v[j];
                    }
                    out[i] = acc;
                }
                out
            }
            Storage::Sparse(m) => {
                let mut out = vec![Complex64::ZERO; self.dim];
                for (row, vec) in m.outer_iterator().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for (col, &a) in vec.iter() {
                        acc += a * v[col];
                    }
                    out[row] = acc;
                }
                out
            }
        }
    }

    /// Kronecker product; the result keeps qubit-1-most-significant ordering
    /// when `self` carries the more significant factors.
    pub fn kron(&self, other: &Operator) -> Operator {
        let dim = self.dim * other.dim;
        if dim <= DENSE_DIM_LIMIT {
            let a = self.to_dense();
            let b = other.to_dense();
            let mut out = Array2::zeros((dim, dim));
            for ((i, j), &av) in a.indexed_iter() {
                if av == Complex64::ZERO {
                    continue;
                }
                for ((k, l), &bv) in b.indexed_iter() {
                    out[(i * other.dim + k, j * other.dim + l)] = av * bv;
                }
            }
            Operator { dim, storage: Storage::Dense(out) }
        } else {
            let a = self.to_sparse();
            let b = other.to_sparse();
            let k = sprs::kronecker_product(a.view(), b.view());
            Operator { dim, storage: Storage::Sparse(k.to_csr()) }
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        self.for_each_entry(|_, _, v| m = m.max(v.norm()));
        m
    }
}

fn dense_to_csr(m: &Array2<Complex64>) -> CsMat<Complex64> {
    let mut tri = TriMat::new((m.nrows(), m.ncols()));
    for ((i, j), &v) in m.indexed_iter() {
        if v != Complex64::ZERO {
            tri.add_triplet(i, j, v);
        }
    }
    tri.to_csr()
}

/// The 2×2 Pauli or ladder matrix in the {|0⟩, |1⟩} basis.
pub fn pauli(kind: PauliKind) -> Operator {
    let z = Complex64::ZERO;
    let one = Complex64::ONE;
    let i = Complex64::I;
    let entries = match kind {
        PauliKind::X => [z, one, one, z],
        PauliKind::Y => [z, -i, i, z],
        PauliKind::Z => [one, z, z, -one],
        // |0⟩ is the upper (σ^z = +1) level: σ⁺ = |0⟩⟨1|, σ⁻ = |1⟩⟨0|.
        PauliKind::Plus => [z, one, z, z],
        PauliKind::Minus => [z, z, one, z],
    };
    let m = Array2::from_shape_vec((2, 2), entries.to_vec()).expect("2x2 shape");
    Operator { dim: 2, storage: Storage::Dense(m) }
}

/// Places a single-qubit operator at `site` (1-based) of an `n`-qubit space,
/// identity elsewhere. Qubit 1 is the most significant tensor factor.
pub fn embed(op: &Operator, site: usize, n: usize) -> Result<Operator, HilbertError> {
    if site == 0 || site > n {
        return Err(HilbertError::SiteOutOfRange { site, n });
    }
    if op.dim != 2 {
        return Err(HilbertError::DimMismatch { left: op.dim, right: 2 });
    }
    let left = Operator::identity(1 << (site - 1));
    let right = Operator::identity(1 << (n - site));
    Ok(left.kron(op).kron(&right))
}

/// a·b − b·a.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator, HilbertError> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

/// a·b + b·a.
pub fn anticommutator(a: &Operator, b: &Operator) -> Result<Operator, HilbertError> {
    a.matmul(b)?.add(&b.matmul(a)?)
}

/// A Hermitian, unit-trace, positive-semidefinite operator.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Validates Hermiticity (≤ 1e-10), unit trace (≤ 1e-10), and numerical
    /// positivity (smallest eigenvalue ≥ −1e-9).
    pub fn new(op: Operator) -> Result<Self, HilbertError> {
        let m = op.to_dense();
        let mut herm_dev: f64 = 0.0;
        for ((i, j), &v) in m.indexed_iter() {
            herm_dev = herm_dev.max((v - m[(j, i)].conj()).norm());
        }
        if herm_dev > HERMITICITY_TOL {
            return Err(HilbertError::NotHermitian { deviation: herm_dev });
        }
        let trace = op.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(HilbertError::NotUnitTrace { trace: trace.re });
        }
        let min_eig = min_eigenvalue_hermitian(&m);
        if min_eig < -POSITIVITY_TOL {
            return Err(HilbertError::NotPositive { min_eigenvalue: min_eig });
        }
        Ok(DensityMatrix { op })
    }

    /// Wraps without validation; for intermediate states whose invariants are
    /// maintained by construction (e.g. propagation steps).
    pub fn new_unchecked(op: Operator) -> Self {
        DensityMatrix { op }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        self.op.to_dense()
    }

    /// Population of the `|0⟩` (σ^z = +1) level of qubit `site`'s reduced state.
    pub fn upper_population(&self, site: usize, n: usize) -> Result<f64, HilbertError> {
        let reduced = partial_trace(self, site, n)?;
        Ok(reduced.to_dense()[(0, 0)].re)
    }
}

/// Smallest eigenvalue of a Hermitian matrix (via faer's self-adjoint solver).
pub fn min_eigenvalue_hermitian(m: &Array2<Complex64>) -> f64 {
    let dim = m.nrows();
    let f = faer::Mat::<faer::c64>::from_fn(dim, dim, |i, j| m[(i, j)]);
    let evs = f
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("self-adjoint eigenvalues");
    // Sorted nondecreasing; first entry is the minimum.
    evs.first().copied().unwrap_or(f64::INFINITY)
}

/// Reduced single-qubit state of qubit `keep` (1-based) out of `n`.
pub fn partial_trace(
    rho: &DensityMatrix,
    keep: usize,
    n: usize,
) -> Result<DensityMatrix, HilbertError> {
    if keep == 0 || keep > n {
        return Err(HilbertError::SiteOutOfRange { site: keep, n });
    }
    let dim = rho.dim();
    if dim != 1 << n {
        return Err(HilbertError::DimMismatch { left: dim, right: 1 << n });
    }
    let m = rho.op.to_dense();
    // Qubit `keep` occupies bit (n − keep), counting from the least
    // significant bit, because qubit 1 is the most significant factor.
    let bit = n - keep;
    let mask = 1usize << bit;
    let mut out = Array2::<Complex64>::zeros((2, 2));
    for rest in 0..dim {
        if rest & mask != 0 {
            continue;
        }
        for a in 0..2 {
            for b in 0..2 {
                out[(a, b)] += m[(rest | (a * mask), rest | (b * mask))];
            }
        }
    }
    Ok(DensityMatrix { op: Operator::from_dense(out)? })
}
