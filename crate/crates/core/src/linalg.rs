//! Symmetric-matrix primitives: PSD tests, the Loewner order, base-2
//! log-determinants and the symmetric-definite generalized eigenproblem.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default slack for PSD and ordering checks, relative to the largest
/// absolute eigenvalue involved.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// A real symmetric matrix. Symmetrized as `(M + Mᵀ)/2` on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("symmetric matrix must have dimension >= 1"));
        }
        Ok(Self::symmetrize(m))
    }

    fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    /// Largest absolute deviation from symmetry of a raw square matrix.
    pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn scalar(value: f64) -> Self {
        SymMatrix(DMatrix::from_element(1, 1, value))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// `v vᵀ`.
    pub fn outer(v: &DVector<f64>) -> Self {
        SymMatrix::symmetrize(v * v.transpose())
    }

    /// `H M Hᵀ` for a (possibly rectangular) `H`.
    pub fn congruence(&self, h: &DMatrix<f64>) -> Self {
        SymMatrix::symmetrize(h * &self.0 * h.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let eig = self.0.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let (v, _) = self.eigen();
        v[v.len() - 1]
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        let (v, _) = self.eigen();
        v[0].abs().max(v[v.len() - 1].abs())
    }

    /// Rebuilds `Q f(Λ) Qᵀ` from the eigendecomposition.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Self {
        let (vals, vecs) = self.eigen();
        let mapped = DVector::from_iterator(vals.len(), vals.iter().map(|&x| f(x)));
        SymMatrix::symmetrize(&vecs * DMatrix::from_diagonal(&mapped) * vecs.transpose())
    }

    /// Negative eigenvalues clipped to zero.
    pub fn psd_part(&self) -> Self {
        self.map_eigenvalues(|x| x.max(0.0))
    }

    /// Symmetric square root of a PSD matrix (negative noise clipped).
    pub fn sqrt_psd(&self) -> Self {
        self.map_eigenvalues(|x| x.max(0.0).sqrt())
    }

    /// Inverse of a positive definite matrix via Cholesky.
    pub fn inverse_pd(&self, what: &str) -> Result<Self> {
        match self.0.clone().cholesky() {
            Some(ch) => Ok(SymMatrix::symmetrize(ch.inverse())),
            None => Err(Error::NotPositiveDefinite {
                what: what.to_string(),
                min_eigenvalue: self.min_eigenvalue(),
            }),
        }
    }

    /// Lower Cholesky factor of a positive definite matrix.
    pub fn cholesky_factor(&self, what: &str) -> Result<DMatrix<f64>> {
        match self.0.clone().cholesky() {
            Some(ch) => Ok(ch.l()),
            None => Err(Error::NotPositiveDefinite {
                what: what.to_string(),
                min_eigenvalue: self.min_eigenvalue(),
            }),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

fn ensure_finite(m: &SymMatrix, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

fn ensure_same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )))
    }
}

/// PSD test with slack `tol · scale`.
pub(crate) fn is_psd_scaled(m: &SymMatrix, tol: f64, scale: f64) -> bool {
    m.min_eigenvalue() >= -tol * scale
}

/// `true` iff the minimum eigenvalue of `m` is at least `-tol` relative to
/// its largest absolute eigenvalue.
pub fn is_psd(m: &SymMatrix, tol: f64) -> Result<bool> {
    ensure_finite(m, "matrix")?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let (vals, _) = m.eigen();
    let scale = vals[0].abs().max(vals[vals.len() - 1].abs());
    Ok(vals[0] >= -tol * scale)
}

/// Loewner order `a ⪯ b`, i.e. `b - a ⪰ 0`. The slack is relative to the
/// larger spectral norm of the two operands so that `a ≈ b` up to rounding
/// still compares as ordered.
pub fn psd_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    ensure_same_dim(a, b)?;
    ensure_finite(a, "left operand")?;
    ensure_finite(b, "right operand")?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let scale = a.spectral_norm().max(b.spectral_norm());
    Ok(is_psd_scaled(&(b - a), tol, scale))
}

/// `log₂ det(m)` for a positive definite `m`.
pub fn log_det(m: &SymMatrix) -> Result<f64> {
    ensure_finite(m, "matrix")?;
    let l = m.cholesky_factor("log-det argument")?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.log2()).sum::<f64>())
}

/// Largest generalized eigenpair of a symmetric-definite pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct GenEigenPair {
    pub lambda_max: f64,
    /// Unit-norm eigenvector, largest-magnitude entry positive.
    pub psi_max: DVector<f64>,
    /// Distance to the next eigenvalue (`inf` for 1x1 pencils).
    pub eigen_gap: f64,
}

impl GenEigenPair {
    pub fn is_degenerate(&self) -> bool {
        self.eigen_gap < 1e-10
    }
}

/// Solves `A ψ = λ B ψ` for the largest `λ` by Cholesky whitening of `B`.
pub fn gen_eigen_max(a: &SymMatrix, b: &SymMatrix) -> Result<GenEigenPair> {
    ensure_same_dim(a, b)?;
    ensure_finite(a, "pencil A")?;
    ensure_finite(b, "pencil B")?;
    let n = a.dim();
    let l = b.cholesky_factor("pencil B")?;
    // C = L⁻¹ A L⁻ᵀ
    let linv_a = l
        .solve_lower_triangular(a.matrix())
        .ok_or_else(|| Error::Singular("pencil B factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Singular("pencil B factor".into()))?;
    let c = SymMatrix::new(c)?;
    let (vals, vecs) = c.eigen();
    let lambda_max = vals[n - 1];
    let eigen_gap = if n > 1 {
        lambda_max - vals[n - 2]
    } else {
        f64::INFINITY
    };
    let v = vecs.column(n - 1).into_owned();
    let mut psi = l
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Singular("pencil B factor".into()))?;
    psi /= psi.norm();
    fix_sign(&mut psi);
    if eigen_gap < 1e-10 {
        log::debug!("generalized eigenvalue {lambda_max} has gap {eigen_gap:e}; eigenvector not unique");
    }
    Ok(GenEigenPair {
        lambda_max,
        psi_max: psi,
        eigen_gap,
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut idx = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.neg_mut();
    }
}

/// Rayleigh quotient `ψᵀAψ / ψᵀBψ`.
pub fn rayleigh_quotient(a: &SymMatrix, b: &SymMatrix, psi: &DVector<f64>) -> f64 {
    let num = psi.dot(&(a.matrix() * psi));
    let den = psi.dot(&(b.matrix() * psi));
    num / den
}
