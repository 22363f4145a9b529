//! KKT multipliers of the weighted-sum problem
//! `max R1 + μR2  s.t. B1, B2 ⪰ 0, B1 + B2 ⪯ S` on an aligned channel.
//!
//! Stationarity reads
//!
//! ```text
//! (B1+N1)⁻¹ + (μ−1)(B1+N3)⁻¹ + O1 = μ(B1+N2)⁻¹ + O2
//! μ(B1+B2+N2)⁻¹ + O2            = μ(B1+B2+N3)⁻¹ + O3
//! ```
//!
//! with `O1`, `O2`, `O3` PSD and supported on `ker B1`, `ker B2` and
//! `ker(S − B1 − B2)` respectively.

use nalgebra::{DMatrix, DVector};

use super::WeightedObjective;
use crate::channel::{ChannelInstance, InputConstraint};
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, DEFAULT_PSD_TOL};
use crate::regions::CovarianceSplit;

/// Default relative KKT residual accepted as stationary.
pub const DEFAULT_KKT_THRESHOLD: f64 = 1e-5;
/// Eigenvalues below this fraction of `‖S‖` count as a kernel direction.
pub const ACTIVE_SET_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KktMultipliers {
    pub o1: SymMatrix,
    pub o2: SymMatrix,
    pub o3: SymMatrix,
    pub mu: f64,
    /// Relative residuals of the two stationarity equations.
    pub residual: (f64, f64),
}

impl KktMultipliers {
    pub fn zeros(t: usize, mu: f64) -> Self {
        KktMultipliers {
            o1: SymMatrix::zeros(t),
            o2: SymMatrix::zeros(t),
            o3: SymMatrix::zeros(t),
            mu,
            residual: (0.0, 0.0),
        }
    }

    /// Largest of `‖B1·O1‖`, `‖B2·O2‖`, `‖(S−ΣB)·O3‖`.
    pub fn slackness(&self, split: &CovarianceSplit, s: &SymMatrix) -> f64 {
        let slack = s - &split.total();
        [
            (split.b1().matrix() * self.o1.matrix()).norm(),
            (split.b2().matrix() * self.o2.matrix()).norm(),
            (slack.matrix() * self.o3.matrix()).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn inv(m: &SymMatrix) -> SymMatrix {
    m.map_eigenvalues(|x| 1.0 / x)
}

/// The multiplier-free parts `D1 = O1 − O2` and `D2 = O3 − O2` implied by
/// stationarity.
fn targets(split: &CovarianceSplit, ch: &ChannelInstance, mu: f64) -> (SymMatrix, SymMatrix) {
    let (b1, b12) = (split.b1(), split.total());
    let n1 = &ch.receiver(0).noise;
    let n2 = &ch.receiver(1).noise;
    let n3 = &ch.eavesdropper().noise;
    let d1 = &(&inv(&(b1 + n2)) * mu) - &(&inv(&(b1 + n1)) + &(&inv(&(b1 + n3)) * (mu - 1.0)));
    let d2 = &(&inv(&(&b12 + n2)) * mu) - &(&inv(&(&b12 + n3)) * mu);
    (d1, d2)
}

/// Relative residuals of the two stationarity equations, each normalized by
/// the Frobenius norm of its left-hand side.
pub fn kkt_residual(
    split: &CovarianceSplit,
    mult: &KktMultipliers,
    ch: &ChannelInstance,
    obj: &WeightedObjective,
) -> (f64, f64) {
    let mu = obj.mu().unwrap_or(mult.mu);
    let (b1, b12) = (split.b1(), split.total());
    let n1 = &ch.receiver(0).noise;
    let n2 = &ch.receiver(1).noise;
    let n3 = &ch.eavesdropper().noise;
    let lhs1 = &(&inv(&(b1 + n1)) + &(&inv(&(b1 + n3)) * (mu - 1.0))) + &mult.o1;
    let rhs1 = &(&inv(&(b1 + n2)) * mu) + &mult.o2;
    let lhs2 = &(&inv(&(&b12 + n2)) * mu) + &mult.o2;
    let rhs2 = &(&inv(&(&b12 + n3)) * mu) + &mult.o3;
    let rel = |l: &SymMatrix, r: &SymMatrix| (l - r).frobenius() / l.frobenius().max(f64::MIN_POSITIVE);
    (rel(&lhs1, &rhs1), rel(&lhs2, &rhs2))
}

fn kernel_basis(m: &SymMatrix, threshold: f64) -> DMatrix<f64> {
    let (vals, vecs) = m.eigen();
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= threshold).collect();
    DMatrix::from_fn(m.dim(), cols.len(), |r, c| vecs[(r, cols[c])])
}

fn weighted_vec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(m[(i, i)]);
        for j in (i + 1)..n {
            out.push(std::f64::consts::SQRT_2 * m[(i, j)]);
        }
    }
    out
}

fn sym_basis(u: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let d = u.ncols();
    let mut out = Vec::new();
    for a in 0..d {
        for b in a..d {
            let ua = u.column(a);
            let ub = u.column(b);
            let e = if a == b {
                &ua * ua.transpose()
            } else {
                &ua * ub.transpose() + &ub * ua.transpose()
            };
            out.push(e);
        }
    }
    out
}

fn coeffs_to_block(z: &[f64], d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(d, d);
    let mut k = 0;
    for a in 0..d {
        for b in a..d {
            x[(a, b)] = z[k];
            x[(b, a)] = z[k];
            k += 1;
        }
    }
    x
}

fn lift(u: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    u * x * u.transpose()
}

fn project_psd(x: &DMatrix<f64>) -> DMatrix<f64> {
    if x.nrows() == 0 {
        return x.clone();
    }
    SymMatrix::new(x.clone()).expect("square").psd_part().into_matrix()
}

/// Least-squares fit of PSD multipliers on the active supports. Always
/// succeeds for an aligned two-user channel under a covariance constraint;
/// the residual says how stationary the split is.
pub fn fit_multipliers(
    split: &CovarianceSplit,
    obj: &WeightedObjective,
    ch: &ChannelInstance,
) -> Result<KktMultipliers> {
    let mu = obj
        .mu()
        .ok_or_else(|| Error::Unsupported("KKT multipliers need γ1 > 0".into()))?;
    let InputConstraint::Covariance(s) = ch.constraint() else {
        return Err(Error::Unsupported(
            "KKT multipliers are only defined under a covariance constraint".into(),
        ));
    };
    if ch.users() != 2 || split.users() != 2 || !ch.is_aligned(DEFAULT_PSD_TOL) {
        return Err(Error::Unsupported(
            "KKT multipliers need an aligned two-user channel".into(),
        ));
    }
    let t = ch.transmit_antennas();
    if split.dim() != t {
        return Err(Error::invalid("split dimension differs from the channel"));
    }
    let scale = s.spectral_norm().max(split.total().spectral_norm());
    let thr = ACTIVE_SET_THRESHOLD * scale;
    let u1 = kernel_basis(split.b1(), thr);
    let u2 = kernel_basis(split.b2(), thr);
    let u3 = kernel_basis(&(s - &split.total()), thr);
    let (d1, d2) = targets(split, ch, mu);

    // Unconstrained least squares over symmetric blocks on each support.
    let e1 = sym_basis(&u1);
    let e2 = sym_basis(&u2);
    let e3 = sym_basis(&u3);
    let half = t * (t + 1) / 2;
    let cols = e1.len() + e2.len() + e3.len();
    let zero = DMatrix::<f64>::zeros(t, t);
    let mut system = DMatrix::<f64>::zeros(2 * half, cols.max(1));
    let mut col = 0;
    let mut put = |eq1: &DMatrix<f64>, eq2: &DMatrix<f64>, col: usize| {
        for (r, v) in weighted_vec(eq1).into_iter().enumerate() {
            system[(r, col)] = v;
        }
        for (r, v) in weighted_vec(eq2).into_iter().enumerate() {
            system[(half + r, col)] = v;
        }
    };
    for e in &e1 {
        put(e, &zero, col);
        col += 1;
    }
    for e in &e2 {
        put(&-e, &-e, col);
        col += 1;
    }
    for e in &e3 {
        put(&zero, e, col);
        col += 1;
    }
    let mut rhs = weighted_vec(d1.matrix());
    rhs.extend(weighted_vec(d2.matrix()));
    let rhs = DVector::from_vec(rhs);

    let z = if cols == 0 {
        DVector::zeros(0)
    } else {
        let svd = system.clone().svd(true, true);
        let smax = svd.singular_values.max();
        svd.solve(&rhs, 1e-12 * smax.max(1e-300))
            .map_err(|e| Error::invalid(format!("multiplier least squares failed: {e}")))?
    };
    let (n1, n2) = (e1.len(), e2.len());
    let mut x1 = coeffs_to_block(&z.as_slice()[..n1], u1.ncols());
    let mut x2 = coeffs_to_block(&z.as_slice()[n1..n1 + n2], u2.ncols());
    let mut x3 = coeffs_to_block(&z.as_slice()[n1 + n2..], u3.ncols());

    let min_eig = |x: &DMatrix<f64>| {
        if x.nrows() == 0 {
            0.0
        } else {
            SymMatrix::new(x.clone()).expect("square").min_eigenvalue()
        }
    };
    let dscale = d1.frobenius().max(d2.frobenius()).max(1e-300);
    if [&x1, &x2, &x3].iter().any(|x| min_eig(x) < -1e-12 * dscale) {
        // PSD-constrained least squares by accelerated projected gradient.
        let residuals = |x1: &DMatrix<f64>, x2: &DMatrix<f64>, x3: &DMatrix<f64>| {
            let o2 = lift(&u2, x2);
            (
                lift(&u1, x1) - &o2 - d1.matrix(),
                lift(&u3, x3) - &o2 - d2.matrix(),
            )
        };
        let (mut y1, mut y2, mut y3) = (project_psd(&x1), project_psd(&x2), project_psd(&x3));
        let (mut p1, mut p2, mut p3) = (y1.clone(), y2.clone(), y3.clone());
        let mut tk = 1.0_f64;
        let step = 0.25;
        for _ in 0..20_000 {
            let (r1, r2) = residuals(&y1, &y2, &y3);
            let g1 = u1.transpose() * &r1 * &u1;
            let g2 = -(u2.transpose() * (&r1 + &r2) * &u2);
            let g3 = u3.transpose() * &r2 * &u3;
            let n1 = project_psd(&(&y1 - g1 * step));
            let n2 = project_psd(&(&y2 - g2 * step));
            let n3 = project_psd(&(&y3 - g3 * step));
            let change = (&n1 - &p1).norm() + (&n2 - &p2).norm() + (&n3 - &p3).norm();
            let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
            let mom = (tk - 1.0) / tn;
            y1 = &n1 + (&n1 - &p1) * mom;
            y2 = &n2 + (&n2 - &p2) * mom;
            y3 = &n3 + (&n3 - &p3) * mom;
            p1 = n1;
            p2 = n2;
            p3 = n3;
            tk = tn;
            if change < 1e-15 * dscale {
                break;
            }
        }
        x1 = p1;
        x2 = p2;
        x3 = p3;
    } else {
        x1 = project_psd(&x1);
        x2 = project_psd(&x2);
        x3 = project_psd(&x3);
    }
    let block = |u: &DMatrix<f64>, x: &DMatrix<f64>| {
        if u.ncols() == 0 {
            SymMatrix::zeros(t)
        } else {
            SymMatrix::new(lift(u, x)).expect("square")
        }
    };
    let mut mult = KktMultipliers {
        o1: block(&u1, &x1),
        o2: block(&u2, &x2),
        o3: block(&u3, &x3),
        mu,
        residual: (0.0, 0.0),
    };
    mult.residual = kkt_residual(split, &mult, ch, obj);
    Ok(mult)
}

/// Recovers multipliers and rejects splits whose residual exceeds
/// [`DEFAULT_KKT_THRESHOLD`].
pub fn recover_multipliers(
    split: &CovarianceSplit,
    obj: &WeightedObjective,
    ch: &ChannelInstance,
) -> Result<KktMultipliers> {
    recover_multipliers_with(split, obj, ch, DEFAULT_KKT_THRESHOLD)
}

pub fn recover_multipliers_with(
    split: &CovarianceSplit,
    obj: &WeightedObjective,
    ch: &ChannelInstance,
    threshold: f64,
) -> Result<KktMultipliers> {
    let mult = fit_multipliers(split, obj, ch)?;
    let (eq3, eq3_1) = mult.residual;
    if eq3 > threshold || eq3_1 > threshold || !eq3.is_finite() || !eq3_1.is_finite() {
        return Err(Error::NonStationary {
            eq3,
            eq3_1,
            threshold,
        });
    }
    Ok(mult)
}
