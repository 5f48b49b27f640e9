//! Dense complex linear algebra for the small (≤ 8×8) operators used by the
//! simulator.
//!
//! Matrices are stored row-major. Hermitian and unitary flags are only ever set
//! by constructors that have checked the property against [`Tolerances`], or by
//! operations that provably preserve it.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;
// Float supplies libm-backed math on f64 under no_std.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix data of length {len} is not square")]
    NotSquare { len: usize },
    #[error("matrix is not Hermitian (max residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not unitary (max residual {residual:e})")]
    NotUnitary { residual: f64 },
    #[error("invalid density matrix: {reason}")]
    InvalidDensity { reason: &'static str, value: f64 },
    #[error("negative evolution time {0}")]
    NegativeTime(f64),
    #[error("principal logarithm is ambiguous: largest eigenphase {max_phase:.4} rad exceeds the branch threshold")]
    BranchAmbiguity { max_phase: f64 },
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

/// Numerical tolerances used when checking matrix properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub unitary: f64,
    pub trace: f64,
    /// Most negative eigenvalue accepted for a density matrix.
    pub min_eigenvalue: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-12,
        unitary: 1e-10,
        trace: 1e-12,
        min_eigenvalue: -1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
    hermitian: bool,
    unitary: bool,
}

/// Operators (Hamiltonians, spin components, propagators) are plain complex matrices.
pub type Operator = ComplexMatrix;

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} (herm={}, unit={}) [", self.dim, self.dim, self.hermitian, self.unitary)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim], hermitian: true, unitary: false }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m.unitary = true;
        m
    }

    /// Builds a matrix from row-major data without asserting any property.
    pub fn from_rows(data: Vec<Complex64>) -> Result<Self, LinalgError> {
        let dim = exact_sqrt(data.len()).ok_or(LinalgError::NotSquare { len: data.len() })?;
        Ok(Self { dim, data, hermitian: false, unitary: false })
    }

    pub fn from_real_rows(data: &[f64]) -> Result<Self, LinalgError> {
        Self::from_rows(data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * dim + i] = *d;
        }
        m.hermitian = diag.iter().all(|d| d.im == 0.0);
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) vector.
    pub fn outer(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.data[r * dim + c] = psi[r] * psi[c].conj();
            }
        }
        m.hermitian = true;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Checks M = M† and sets the Hermitian flag. The stored entries are
    /// symmetrized so the flag holds exactly.
    pub fn into_hermitian(mut self, tol: &Tolerances) -> Result<Self, LinalgError> {
        let residual = self.hermitian_residual();
        if residual > tol.hermitian {
            return Err(LinalgError::NotHermitian { residual });
        }
        let n = self.dim;
        for r in 0..n {
            self.data[r * n + r].im = 0.0;
            for c in (r + 1)..n {
                let avg = (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5;
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg.conj();
            }
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Checks M†M = 1 and sets the unitary flag.
    pub fn into_unitary(mut self, tol: &Tolerances) -> Result<Self, LinalgError> {
        let residual = self.unitary_residual();
        if residual > tol.unitary {
            return Err(LinalgError::NotUnitary { residual });
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                let d = (self.data[r * n + c] - self.data[c * n + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn unitary_residual(&self) -> f64 {
        let prod = self.adjoint().matmul_raw(self);
        prod.max_abs_diff(&Self::identity(self.dim))
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        out.hermitian = self.hermitian;
        out.unitary = self.unitary;
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= k);
        out.unitary = self.unitary && (k.abs() - 1.0).abs() == 0.0;
        out
    }

    pub fn scale_complex(&self, k: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= k);
        out.hermitian = self.hermitian && k.im == 0.0;
        out.unitary = false;
        out
    }

    fn matmul_raw(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out[r * n..(r + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Self { dim: n, data: out, hermitian: false, unitary: false }
    }

    /// Matrix product. Panics on dimension mismatch; use [`Self::try_mul`]
    /// where the dimensions are not statically known to agree.
    pub fn matmul(&self, rhs: &Self) -> Self {
        self.try_mul(rhs).expect("matrix dimensions must agree")
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        check_dim(self.dim, rhs.dim)?;
        let mut out = self.matmul_raw(rhs);
        out.unitary = self.unitary && rhs.unitary;
        Ok(out)
    }

    /// [A, B] = AB − BA.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Tr(A·B) without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Complex64 {
        let n = self.dim;
        let mut acc = ZERO;
        for r in 0..n {
            for k in 0..n {
                acc += self.data[r * n + k] * rhs.data[k * n + r];
            }
        }
        acc
    }

    /// Matrix power by repeated squaring.
    pub fn powi(&self, mut exp: usize) -> Self {
        let mut base = self.clone();
        let mut acc = Self::identity(self.dim);
        acc.unitary = self.unitary;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.matmul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.matmul(&base);
            }
        }
        acc
    }

    /// Restriction to the rows/columns listed in `indices`.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let mut out = Self::zeros(m);
        for (a, &r) in indices.iter().enumerate() {
            for (b, &c) in indices.iter().enumerate() {
                out.data[a * m + b] = self[(r, c)];
            }
        }
        out.hermitian = self.hermitian;
        out
    }
}

impl core::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        self.hermitian = false;
        self.unitary = false;
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions must agree");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        ComplexMatrix { dim: self.dim, data, hermitian: self.hermitian && rhs.hermitian, unitary: false }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimensions must agree");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        ComplexMatrix { dim: self.dim, data, hermitian: self.hermitian && rhs.hermitian, unitary: false }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, k: f64) -> ComplexMatrix {
        self.scale(k)
    }
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n && r > 0).then_some(r)
}

fn check_dim(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.dim, b.dim);
    let n = na * nb;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..na {
        for j in 0..na {
            let aij = a.data[i * na + j];
            for k in 0..nb {
                for l in 0..nb {
                    out.data[(i * nb + k) * n + (j * nb + l)] = aij * b.data[k * nb + l];
                }
            }
        }
    }
    out.hermitian = a.hermitian && b.hermitian;
    out.unitary = a.unitary && b.unitary;
    out
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// unitary matrix whose columns are the corresponding eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Cyclic complex Jacobi eigensolver. Quadratically convergent and accurate to
/// a few ulps of the matrix norm, which is what small spin Hamiltonians need.
pub fn eigh(h: &ComplexMatrix) -> Result<Eigh, LinalgError> {
    if !h.hermitian {
        return Err(LinalgError::NotHermitian { residual: h.hermitian_residual() });
    }
    let n = h.dim;
    let mut a = h.data.clone();
    let mut v = ComplexMatrix::identity(n).data;
    let scale = h.frobenius_norm();
    let threshold = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[r * n + c].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag <= threshold * 1e-3 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                // Phase that makes the (p, q) element real and positive.
                let phase = apq / mag;
                let zeta = (aqq - app) / (2.0 * mag);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) · [[c, s], [−s, c]]
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * g_pp + akq * g_qp;
                    a[k * n + q] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[q * n + k] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * g_pp + vkq * g_qp;
                    v[k * n + q] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].re.total_cmp(&a[y * n + y].re));
    let values = order.iter().map(|&k| a[k * n + k].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.data[r * n + new_col] = v[r * n + old_col];
        }
    }
    vectors.hermitian = false;
    vectors.unitary = true;
    Ok(Eigh { values, vectors })
}

/// V · diag(f(λ)) · V†
fn spectral_map(eig: &Eigh, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
    let n = eig.vectors.dim;
    let v = &eig.vectors.data;
    let fl: Vec<Complex64> = eig.values.iter().map(|&l| f(l)).collect();
    let mut out = ComplexMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += v[r * n + k] * fl[k] * v[c * n + k].conj();
            }
            out.data[r * n + c] = acc;
        }
    }
    out.hermitian = false;
    out
}

/// e^{−i h t} for Hermitian `h` and `t ≥ 0`, via eigendecomposition.
pub fn propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix, LinalgError> {
    if !(t >= 0.0) {
        return Err(LinalgError::NegativeTime(t));
    }
    let eig = eigh(h)?;
    let mut u = spectral_map(&eig, |l| {
        let (s, c) = (-l * t).sin_cos();
        Complex64::new(c, s)
    });
    u.unitary = true;
    Ok(u)
}

/// Principal logarithm of a unitary: returns the Hermitian `h` with
/// `u = e^{−i h t}`. Fails when any eigenphase reaches `branch_limit`, where the
/// principal branch stops being a reliable choice.
pub fn unitary_log(u: &ComplexMatrix, t: f64, branch_limit: f64) -> Result<ComplexMatrix, LinalgError> {
    if !u.unitary {
        return Err(LinalgError::NotUnitary { residual: u.unitary_residual() });
    }
    // A generic real combination of the commuting Hermitian parts shares the
    // eigenvectors of the normal matrix u.
    const MIX: f64 = 0.618_033_988_749_894_9;
    let n = u.dim;
    let ud = u.adjoint();
    let mut k = ComplexMatrix::zeros(n);
    for idx in 0..n * n {
        let re_part = (u.data[idx] + ud.data[idx]) * 0.5;
        let im_part = (u.data[idx] - ud.data[idx]) * Complex64::new(0.0, -0.5);
        k.data[idx] = re_part + im_part * MIX;
    }
    let k = k.into_hermitian(&Tolerances { hermitian: 1e-9, ..Tolerances::DEFAULT })?;
    let eig = eigh(&k)?;
    let uv = u.matmul_raw(&eig.vectors);
    let vd = eig.vectors.adjoint();
    let diag = vd.matmul_raw(&uv);
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        phases.push(diag.data[j * n + j].arg());
    }
    let max_phase = phases.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if max_phase >= branch_limit {
        return Err(LinalgError::BranchAmbiguity { max_phase });
    }
    let off = (0..n)
        .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
        .map(|(r, c)| diag.data[r * n + c].norm())
        .fold(0.0, f64::max);
    if off > 1e-8 {
        return Err(LinalgError::NoConvergence);
    }
    let mut values = phases;
    for p in values.iter_mut() {
        *p = -*p / t;
    }
    let mut h = spectral_map(&Eigh { values, vectors: eig.vectors }, |l| Complex64::new(l, 0.0));
    h = h.into_hermitian(&Tolerances { hermitian: 1e-9, ..Tolerances::DEFAULT })?;
    Ok(h)
}

/// A validated density matrix: unit trace, Hermitian, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        Self::with_tolerances(m, &Tolerances::DEFAULT)
    }

    pub fn with_tolerances(m: ComplexMatrix, tol: &Tolerances) -> Result<Self, LinalgError> {
        let m = m.into_hermitian(tol)?;
        let tr = m.trace().re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(LinalgError::InvalidDensity { reason: "trace differs from 1", value: tr });
        }
        let eig = eigh(&m)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < tol.min_eigenvalue {
            return Err(LinalgError::InvalidDensity { reason: "negative eigenvalue", value: min });
        }
        Ok(Self(m))
    }

    /// The maximally mixed state 1/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(1.0 / dim as f64).with_flags(true, false))
    }

    /// |ψ⟩⟨ψ| after normalizing ψ.
    pub fn pure(psi: &[Complex64]) -> Result<Self, LinalgError> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(LinalgError::InvalidDensity { reason: "zero state vector", value: 0.0 });
        }
        let v: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self(ComplexMatrix::outer(&v)))
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Self {
        Self(kron(&a.0, &b.0))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

impl ComplexMatrix {
    fn with_flags(mut self, hermitian: bool, unitary: bool) -> Self {
        self.hermitian = hermitian;
        self.unitary = unitary;
        self
    }
}

/// U ρ U†. Trace and spectrum are preserved; the result is re-symmetrized so
/// roundoff cannot accumulate an anti-Hermitian part.
pub fn evolve(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix, LinalgError> {
    check_dim(rho.0.dim, u.dim)?;
    if !u.unitary {
        return Err(LinalgError::NotUnitary { residual: u.unitary_residual() });
    }
    Ok(evolve_unchecked(rho, u))
}

pub(crate) fn evolve_unchecked(rho: &DensityMatrix, u: &ComplexMatrix) -> DensityMatrix {
    let n = u.dim;
    let tmp = u.matmul_raw(&rho.0);
    let mut out = ComplexMatrix::zeros(n);
    for r in 0..n {
        for c in r..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += tmp.data[r * n + k] * u.data[c * n + k].conj();
            }
            out.data[r * n + c] = acc;
        }
    }
    for r in 0..n {
        out.data[r * n + r].im = 0.0;
        for c in (r + 1)..n {
            out.data[c * n + r] = out.data[r * n + c].conj();
        }
    }
    out.hermitian = true;
    DensityMatrix(out)
}

/// Tr(ρ·O); the imaginary part of the trace is discarded.
pub fn expectation(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<f64, LinalgError> {
    check_dim(rho.0.dim, obs.dim)?;
    Ok(rho.0.trace_product(obs).re)
}
