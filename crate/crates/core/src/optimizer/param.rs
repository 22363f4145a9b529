//! Smooth factor parameterization of the feasible covariance pairs.
//!
//! With `C = B1 + B2` written as `F Fᵀ`, `F = L V diag(c)` and
//! `B1 = F W diag(sin²θ) Wᵀ Fᵀ`, `B2 = F W diag(cos²θ) Wᵀ Fᵀ`, every
//! parameter vector maps to a feasible pair and every feasible pair is
//! reachable. `V`, `W` are products of Givens rotations. Under a covariance
//! constraint `L` is the Cholesky factor of `S` and `c_i = sin φ_i`; under a
//! power constraint `L = √P·I` and `c` holds the first `t` coordinates of a
//! point on the unit sphere in `t + 1` dimensions, so `tr C ≤ P`.

use nalgebra::{DMatrix, DVector};

use crate::channel::InputConstraint;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone)]
pub(crate) struct SplitParam {
    t: usize,
    factor: DMatrix<f64>,
    power: bool,
}

/// Product of Givens rotations over all index pairs `i < j`.
pub(crate) fn givens_product(t: usize, angles: &[f64]) -> DMatrix<f64> {
    let mut v = DMatrix::<f64>::identity(t, t);
    let mut k = 0;
    for i in 0..t {
        for j in (i + 1)..t {
            let (s, c) = angles[k].sin_cos();
            for r in 0..t {
                let a = v[(r, i)];
                let b = v[(r, j)];
                v[(r, i)] = c * a + s * b;
                v[(r, j)] = -s * a + c * b;
            }
            k += 1;
        }
    }
    v
}

impl SplitParam {
    pub fn new(constraint: &InputConstraint, t: usize) -> Result<Self> {
        match constraint {
            InputConstraint::Covariance(s) => {
                let factor = s.cholesky_factor("covariance constraint S").map_err(|e| match e {
                    Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::invalid(format!(
                        "the solver needs S ≻ 0 (minimum eigenvalue {min_eigenvalue:e})"
                    )),
                    other => other,
                })?;
                Ok(SplitParam {
                    t,
                    factor,
                    power: false,
                })
            }
            InputConstraint::Power(p) => Ok(SplitParam {
                t,
                factor: DMatrix::identity(t, t) * p.sqrt(),
                power: true,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.t * (self.t + 1)
    }

    fn rotations(&self) -> usize {
        self.t * (self.t - 1) / 2
    }

    fn column_scales(&self, angles: &[f64]) -> DVector<f64> {
        let t = self.t;
        if !self.power {
            return DVector::from_iterator(t, angles.iter().map(|a| a.sin()));
        }
        // spherical coordinates; the last coordinate is slack
        let mut out = DVector::zeros(t);
        let mut prod = 1.0;
        for i in 0..t {
            let (s, c) = angles[i].sin_cos();
            out[i] = prod * c;
            prod *= s;
        }
        out
    }

    pub fn split(&self, x: &[f64]) -> (SymMatrix, SymMatrix) {
        let t = self.t;
        let r = self.rotations();
        let v = givens_product(t, &x[..r]);
        let c = self.column_scales(&x[r..r + t]);
        let w = givens_product(t, &x[r + t..2 * r + t]);
        let theta = &x[2 * r + t..];
        let f = &self.factor * v * DMatrix::from_diagonal(&c);
        let fw = f * w;
        let mut g1 = fw.clone();
        let mut g2 = fw;
        for (j, th) in theta.iter().enumerate() {
            let (s, co) = th.sin_cos();
            g1.column_mut(j).scale_mut(s);
            g2.column_mut(j).scale_mut(co);
        }
        let b1 = SymMatrix::new(&g1 * g1.transpose()).expect("square");
        let b2 = SymMatrix::new(&g2 * g2.transpose()).expect("square");
        (b1, b2)
    }
}
