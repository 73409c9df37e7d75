//! Small dense complex linear algebra for one- and two-qubit operators:
//! density matrices, Bloch conversion, tensor products, partial trace,
//! Hermitian matrix exponentials, spectral decomposition and von Neumann
//! entropy. Dimensions are restricted to 2 and 4 by construction.

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Element-wise Hermiticity tolerance for state validation.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix may undershoot zero by at most this much.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Default trace tolerance. Deliberately loose: the damped ancilla and the
/// analytic steady state are subnormalized by `exp(-t/T1)`.
pub const DEFAULT_TRACE_TOL: f64 = 1e-2;
/// Off-diagonal convergence threshold of the iterative Hermitian eigensolver.
const JACOBI_TOL: f64 = 1e-13;

#[derive(Debug, Error, PartialEq)]
pub enum QmathError {
    #[error("unsupported matrix dimension {0}; only 2 and 4 are handled")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("negative eigenvalue {0:.3e} below tolerance")]
    NotPositive(f64),
    #[error("trace {0:.6} outside tolerance {1:.0e} around 1")]
    TraceOutOfTolerance(f64, f64),
}

/// Dense complex square matrix in row-major order, dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "dimension must be 2 or 4");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from rows of complex entries.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        assert!(dim == 2 || dim == 4, "dimension must be 2 or 4");
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Largest element-wise absolute value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Replaces the matrix by its Hermitian part `(A + A†)/2`.
    pub fn hermitized(&self) -> Self {
        self.add(&self.adjoint()).scale(C64::new(0.5, 0.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli x.
pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]])
}

/// Pauli y.
pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[c(0.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]])
}

/// Pauli z.
pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(-1.0, 0.0)]])
}

/// Raising operator `|0><1|`; with this labeling `sigma_plus * sigma_minus = |0><0|`,
/// matching the steady-state weight convention.
pub fn sigma_plus() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]])
}

/// Lowering operator `|1><0|` (takes `|0>` to `|1>`).
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[c(0.0, 0.0), c(0.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]])
}

/// Projector `|k><k|` in dimension 2.
pub fn ket_projector(k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2);
    m[(k, k)] = c(1.0, 0.0);
    m
}

/// Kronecker product of two 2x2 matrices, subsystem order (probe, ancilla).
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, QmathError> {
    if a.dim() != 2 || b.dim() != 2 {
        return Err(QmathError::DimensionMismatch(a.dim(), b.dim()));
    }
    let mut out = ComplexMatrix::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Which subsystem of a (probe ⊗ ancilla) state to keep under partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Probe,
    Ancilla,
}

/// Partial trace of a 4x4 operator down to the kept 2x2 subsystem.
pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    keep: Subsystem,
) -> Result<ComplexMatrix, QmathError> {
    if m.dim() != 4 {
        return Err(QmathError::BadDimension(m.dim()));
    }
    let mut out = ComplexMatrix::zeros(2);
    match keep {
        Subsystem::Probe => {
            for i in 0..2 {
                for j in 0..2 {
                    out[(i, j)] = m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)];
                }
            }
        }
        Subsystem::Ancilla => {
            for a in 0..2 {
                for b in 0..2 {
                    out[(a, b)] = m[(a, b)] + m[(2 + a, 2 + b)];
                }
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues (ascending) and the
/// unitary of eigenvectors as columns. Closed form for 2x2, cyclic Jacobi
/// sweeps otherwise.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), QmathError> {
    let defect = m.hermiticity_defect();
    if defect > 1e-9 {
        return Err(QmathError::NotHermitian(defect));
    }
    let a = m.hermitized();
    if a.dim() == 2 {
        return Ok(eigen_2x2(&a));
    }
    Ok(eigen_jacobi(&a))
}

fn eigen_2x2(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let p = a[(0, 0)].re;
    let q = a[(1, 1)].re;
    let b = a[(0, 1)];
    let mean = 0.5 * (p + q);
    let half = 0.5 * (p - q);
    let r = (half * half + b.norm_sqr()).sqrt();
    let lo = mean - r;
    let hi = mean + r;
    let mut vecs = ComplexMatrix::identity(2);
    if r > 0.0 && b.norm() > 1e-300 {
        // eigenvector for `hi`: (b, hi - p), for `lo`: orthogonal complement
        let v = [b, c(hi - p, 0.0)];
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let v = [v[0] / n, v[1] / n];
        vecs[(0, 0)] = -v[1].conj();
        vecs[(1, 0)] = v[0].conj();
        vecs[(0, 1)] = v[0];
        vecs[(1, 1)] = v[1];
    } else if half < 0.0 {
        // already diagonal with swapped order
        vecs =
            ComplexMatrix::from_rows(&[&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)]]);
        if q > p {
            return (vec![p, q], vecs);
        }
    }
    if b.norm() <= 1e-300 {
        // diagonal matrix: order eigenvalues ascending with matching columns
        if p <= q {
            return (vec![p, q], ComplexMatrix::identity(2));
        }
        let mut swap = ComplexMatrix::zeros(2);
        swap[(0, 1)] = c(1.0, 0.0);
        swap[(1, 0)] = c(1.0, 0.0);
        return (vec![q, p], swap);
    }
    (vec![lo, hi], vecs)
}

fn eigen_jacobi(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = a.dim();
    let mut a = a.clone();
    let mut v = ComplexMatrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b < JACOBI_TOL * 1e-3 {
                    continue;
                }
                let phase = apq / b;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                // column update: A <- A G, V <- V G
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cth - akq * phase.conj() * sth;
                    a[(k, q)] = akp * phase * sth + akq * cth;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cth - vkq * phase.conj() * sth;
                    v[(k, q)] = vkp * phase * sth + vkq * cth;
                }
                // row update: A <- G† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cth - aqk * phase * sth;
                    a[(q, k)] = apk * phase.conj() * sth + aqk * cth;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| a[(i, i)].re).collect();
    let mut vecs = ComplexMatrix::zeros(n);
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vecs[(k, col)] = v[(k, i)];
        }
    }
    (vals, vecs)
}

/// `exp(scale * h)` of a Hermitian generator via eigendecomposition.
/// With `scale = -i*tau` the result is unitary to machine precision.
pub fn expm_hermitian_generator(
    h: &ComplexMatrix,
    scale: C64,
) -> Result<ComplexMatrix, QmathError> {
    let defect = h.hermiticity_defect();
    if defect > 1e-9 {
        return Err(QmathError::NotHermitian(defect));
    }
    let (vals, vecs) = hermitian_eigen(h)?;
    let n = h.dim();
    let mut out = ComplexMatrix::zeros(n);
    for (k, &lambda) in vals.iter().enumerate() {
        let f = (scale * lambda).exp();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += f * vecs[(i, k)] * vecs[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

/// Qubit Bloch vector `(Tr rho sx, Tr rho sy, Tr rho sz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

/// Hermitian PSD matrix with tolerance-checked trace; the universal state carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    trace_tolerance: f64,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and trace against the default
    /// trace tolerance.
    pub fn new(mat: ComplexMatrix) -> Result<Self, QmathError> {
        Self::with_tolerance(mat, DEFAULT_TRACE_TOL)
    }

    pub fn with_tolerance(mat: ComplexMatrix, trace_tolerance: f64) -> Result<Self, QmathError> {
        let defect = mat.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(QmathError::NotHermitian(defect));
        }
        let mat = mat.hermitized();
        let (vals, _) = hermitian_eigen(&mat)?;
        if let Some(&min) = vals.first() {
            if min < -POSITIVITY_TOL {
                return Err(QmathError::NotPositive(min));
            }
        }
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > trace_tolerance {
            return Err(QmathError::TraceOutOfTolerance(tr, trace_tolerance));
        }
        Ok(Self {
            mat,
            trace_tolerance,
        })
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn trace_tolerance(&self) -> f64 {
        self.trace_tolerance
    }

    /// Unit-trace copy.
    pub fn normalized(&self) -> Self {
        let tr = self.trace();
        Self {
            mat: self.mat.scale(c(1.0 / tr, 0.0)),
            trace_tolerance: self.trace_tolerance,
        }
    }

    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    /// Trace distance `0.5 * sum |eig(a - b)|`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = self.mat.sub(&other.mat);
        let (vals, _) = hermitian_eigen(&diff).expect("difference of states is Hermitian");
        0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Pure state `|k><k|` in dimension 2.
    pub fn basis_state(k: usize) -> Self {
        Self {
            mat: ket_projector(k),
            trace_tolerance: DEFAULT_TRACE_TOL,
        }
    }

    /// `|+><+|`.
    pub fn plus_state() -> Self {
        let half = c(0.5, 0.0);
        let mat = ComplexMatrix::from_rows(&[&[half, half], &[half, half]]);
        Self {
            mat,
            trace_tolerance: DEFAULT_TRACE_TOL,
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(dim).scale(c(1.0 / dim as f64, 0.0)),
            trace_tolerance: DEFAULT_TRACE_TOL,
        }
    }
}

/// Partial trace of a two-qubit state; the kept marginal preserves the trace.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix, QmathError> {
    let out = partial_trace_matrix(rho.mat(), keep)?;
    DensityMatrix::with_tolerance(out, rho.trace_tolerance())
}

/// `r_k = Tr(rho sigma_k)`.
pub fn bloch_from_rho(rho: &DensityMatrix) -> BlochVector {
    let m = rho.mat();
    BlochVector::new(
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        m[(0, 0)].re - m[(1, 1)].re,
    )
}

/// Inverse Bloch map `rho = (I + r . sigma)/2`, exact for trace-1 states.
pub fn rho_from_bloch(r: &BlochVector) -> Result<DensityMatrix, QmathError> {
    let mat = ComplexMatrix::from_rows(&[
        &[c(0.5 * (1.0 + r.z), 0.0), c(0.5 * r.x, -0.5 * r.y)],
        &[c(0.5 * r.x, 0.5 * r.y), c(0.5 * (1.0 - r.z), 0.0)],
    ]);
    DensityMatrix::new(mat)
}

/// `-sum p_i log2 p_i` in bits, with eigenvalues within `-1e-10` of zero
/// clamped to zero.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(rho.mat()).expect("density matrix is Hermitian");
    vals.iter()
        .map(|&p| p.max(0.0))
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Spectral decomposition with eigenvalues sorted descending and orthonormal
/// eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
}

pub fn spectral_decompose(rho: &DensityMatrix) -> SpectralDecomp {
    let (vals, vecs) = hermitian_eigen(rho.mat()).expect("density matrix is Hermitian");
    let n = rho.dim();
    // ascending -> descending
    let eigenvalues: Vec<f64> = vals.iter().rev().copied().collect();
    let eigenvectors: Vec<Vec<C64>> = (0..n)
        .rev()
        .map(|col| (0..n).map(|k| vecs[(k, col)]).collect())
        .collect();
    SpectralDecomp {
        eigenvalues,
        eigenvectors,
    }
}
