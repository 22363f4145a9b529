//! Multiple-input single-output receivers with a multi-antenna eavesdropper.
//!
//! Gains are normalized so every legitimate receiver sees unit noise and the
//! eavesdropper sees `I`. For each encoding position the secrecy rate of a
//! rank-one beam `ψ` with power `α_k P` is `½ log₂` of the Rayleigh quotient
//! of the pencil
//!
//! ```text
//! ( I + α_k P h_k h_kᵀ / (1 + h_kᵀ A h_k),  I + α_k P H3ᵀ (I + H3 A H3ᵀ)⁻¹ H3 )
//! ```
//!
//! where `A` collects the beams encoded before user `k`; the best beam is the
//! top generalized eigenvector.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::channel::{ChannelInstance, InputConstraint, Receiver};
use crate::error::{Error, Result};
use crate::linalg::{gen_eigen_max, GenEigenPair, SymMatrix};
use crate::regions::{convex_closure, CovarianceSplit, Permutation, Provenance, RatePair, RegionPoint, RegionPointSet};

#[derive(Debug, Clone, PartialEq)]
pub struct MisomeChannel {
    h: Vec<DVector<f64>>,
    h3: DMatrix<f64>,
    power: f64,
}

impl MisomeChannel {
    pub fn new(h: Vec<DVector<f64>>, h3: DMatrix<f64>, power: f64) -> Result<Self> {
        let Some(first) = h.first() else {
            return Err(Error::invalid("at least one receiver is required"));
        };
        let t = first.len();
        if t == 0 {
            return Err(Error::invalid("transmitter needs at least one antenna"));
        }
        for (k, hk) in h.iter().enumerate() {
            if hk.len() != t {
                return Err(Error::invalid(format!("h{} has {} entries, expected {t}", k + 1, hk.len())));
            }
            if !hk.iter().all(|x| x.is_finite()) || hk.norm() == 0.0 {
                return Err(Error::invalid(format!("h{} must be finite and non-zero", k + 1)));
            }
        }
        if h3.ncols() != t || h3.nrows() == 0 {
            return Err(Error::invalid(format!(
                "H3 must have {t} columns and at least one row, got {}×{}",
                h3.nrows(),
                h3.ncols()
            )));
        }
        if !h3.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("H3 must be finite"));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::invalid(format!("power must be positive, got {power}")));
        }
        Ok(MisomeChannel { h, h3, power })
    }

    pub fn two_user(h1: DVector<f64>, h2: DVector<f64>, h3: DMatrix<f64>, power: f64) -> Result<Self> {
        Self::new(vec![h1, h2], h3, power)
    }

    /// Reads single-antenna receivers from a general channel, folding noise
    /// into the gains. Requires a power constraint.
    pub fn from_channel(ch: &ChannelInstance) -> Result<Self> {
        let InputConstraint::Power(p) = ch.constraint() else {
            return Err(Error::Unsupported("MISOME channels use a total power constraint".into()));
        };
        let mut h = Vec::with_capacity(ch.users());
        for (k, rx) in ch.receivers().iter().enumerate() {
            if rx.antennas() != 1 {
                return Err(Error::Unsupported(format!(
                    "receiver {} has {} antennas; MISOME needs one",
                    k + 1,
                    rx.antennas()
                )));
            }
            let n = rx.noise.matrix()[(0, 0)];
            h.push(rx.gain.row(0).transpose() / n.sqrt());
        }
        let eve = ch.eavesdropper();
        let whiten = eve.noise.map_eigenvalues(|x| 1.0 / x.sqrt());
        Self::new(h, whiten.matrix() * &eve.gain, *p)
    }

    pub fn to_channel(&self) -> Result<ChannelInstance> {
        let receivers: Vec<Receiver> = self
            .h
            .iter()
            .map(|hk| Receiver::new(DMatrix::from_row_slice(1, hk.len(), hk.as_slice()), SymMatrix::scalar(1.0)))
            .collect();
        let eve = Receiver::new(self.h3.clone(), SymMatrix::identity(self.h3.nrows()));
        ChannelInstance::new(receivers, eve, InputConstraint::Power(self.power))
    }

    pub fn t(&self) -> usize {
        self.h[0].len()
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self, k: usize) -> &DVector<f64> {
        &self.h[k]
    }

    pub fn h3(&self) -> &DMatrix<f64> {
        &self.h3
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(self.h.clone(), self.h3.clone(), power)
    }
}

/// Shares of the total power, one per user, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSplit {
    alpha: Vec<f64>,
}

impl PowerSplit {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid("power split must not be empty"));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("power shares must be finite and non-negative"));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("power shares sum to {sum}, expected 1")));
        }
        Ok(PowerSplit { alpha })
    }

    /// User 1 gets `alpha_split`, user 2 the rest.
    pub fn two(alpha_split: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_split) {
            return Err(Error::invalid(format!("alpha_split must lie in [0, 1], got {alpha_split}")));
        }
        Self::new(vec![alpha_split, 1.0 - alpha_split])
    }

    pub fn shares(&self) -> &[f64] {
        &self.alpha
    }

    pub fn users(&self) -> usize {
        self.alpha.len()
    }
}

/// One user's pencil and its top eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilStage {
    pub user: usize,
    pub a: SymMatrix,
    pub b: SymMatrix,
    pub pair: GenEigenPair,
}

impl PencilStage {
    pub fn rate(&self) -> f64 {
        (0.5 * self.pair.lambda_max.log2()).max(0.0)
    }
}

/// Pencils in encoding order. For two users and the identity order these are
/// `(A11, B11)` and `(A22, B22)`; for the swapped order `(A21, B21)` then
/// `(A12, B12)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilSet {
    pub permutation: Permutation,
    pub stages: Vec<PencilStage>,
}

impl PencilSet {
    pub fn stage_of(&self, user: usize) -> &PencilStage {
        &self.stages[self.permutation.position_of(user)]
    }

    pub fn lambda(&self, user: usize) -> f64 {
        self.stage_of(user).pair.lambda_max
    }

    pub fn psi(&self, user: usize) -> &DVector<f64> {
        &self.stage_of(user).pair.psi_max
    }

    pub fn has_degenerate_eigenvalue(&self) -> bool {
        self.stages.iter().any(|s| s.pair.is_degenerate())
    }
}

pub fn build_pencils(ch: &MisomeChannel, split: &PowerSplit, perm: &Permutation) -> Result<PencilSet> {
    let m = ch.users();
    if split.users() != m || perm.len() != m {
        return Err(Error::invalid(format!(
            "channel has {m} users but split has {} and order {}",
            split.users(),
            perm.len()
        )));
    }
    let t = ch.t();
    let p = ch.power();
    let h3 = ch.h3();
    let r3 = h3.nrows();
    let mut acc = DMatrix::<f64>::zeros(t, t);
    let mut stages = Vec::with_capacity(m);
    for &k in perm.order() {
        let share = split.shares()[k] * p;
        let hk = ch.h(k);
        let gain = share / (1.0 + hk.dot(&(&acc * hk)));
        let a = SymMatrix::new(DMatrix::identity(t, t) + hk * hk.transpose() * gain)?;
        let inner = SymMatrix::new(DMatrix::identity(r3, r3) + h3 * &acc * h3.transpose())?;
        let inner_inv = inner.inverse_pd("I + H3 A H3ᵀ")?;
        let b = SymMatrix::new(DMatrix::identity(t, t) + h3.transpose() * inner_inv.matrix() * h3 * share)?;
        let pair = gen_eigen_max(&a, &b)?;
        if pair.is_degenerate() {
            log::debug!(
                "user {} pencil has a repeated top eigenvalue (gap {:e}); later pencils depend on the eigenvector choice",
                k + 1,
                pair.eigen_gap
            );
        }
        acc += &pair.psi_max * pair.psi_max.transpose() * share;
        stages.push(PencilStage { user: k, a, b, pair });
    }
    Ok(PencilSet {
        permutation: perm.clone(),
        stages,
    })
}

/// Per-user rates `½[log₂ λ_k]⁺` for any number of users.
pub fn misome_rates_m(ch: &MisomeChannel, split: &PowerSplit, perm: &Permutation) -> Result<Vec<f64>> {
    let pencils = build_pencils(ch, split, perm)?;
    Ok((0..ch.users()).map(|k| pencils.stage_of(k).rate()).collect())
}

pub fn misome_rates(ch: &MisomeChannel, alpha_split: f64, perm: &Permutation) -> Result<RatePair> {
    if ch.users() != 2 {
        return Err(Error::invalid("two-user rates need a two-user channel"));
    }
    let r = misome_rates_m(ch, &PowerSplit::two(alpha_split)?, perm)?;
    Ok(RatePair::new(r[0], r[1]))
}

/// Rank-one covariances `B_k = α_k P ψ_k ψ_kᵀ` realized by the pencils.
pub fn rank_one_split(ch: &MisomeChannel, split: &PowerSplit, pencils: &PencilSet) -> Result<CovarianceSplit> {
    CovarianceSplit::new(
        (0..ch.users())
            .map(|k| SymMatrix::outer(pencils.psi(k)).scale(split.shares()[k] * ch.power()))
            .collect(),
    )
}

pub fn default_alpha_grid() -> Vec<f64> {
    alpha_grid(101).expect("valid default")
}

/// `n` uniform points on `[0, 1]`.
pub fn alpha_grid(n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::invalid("α grid must not be empty")),
        1 => Ok(vec![0.0]),
        _ => Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisomeRegion {
    pub points: RegionPointSet,
    pub hull: RegionPointSet,
}

/// Rates over `alpha_grid × perms` and their convex closure.
pub fn misome_region(ch: &MisomeChannel, alpha_grid: &[f64], perms: &[Permutation]) -> Result<MisomeRegion> {
    if alpha_grid.is_empty() || perms.is_empty() {
        return Err(Error::invalid("α grid and permutation list must not be empty"));
    }
    if ch.users() != 2 {
        return Err(Error::invalid("region sweeps need a two-user channel"));
    }
    let tasks: Vec<(&Permutation, f64)> = perms
        .iter()
        .flat_map(|p| alpha_grid.iter().map(move |&a| (p, a)))
        .collect();
    let points: Vec<RegionPoint> = tasks
        .par_iter()
        .map(|&(perm, alpha)| {
            let split = PowerSplit::two(alpha)?;
            let pencils = build_pencils(ch, &split, perm)?;
            let rates = RatePair::new(pencils.stage_of(0).rate(), pencils.stage_of(1).rate());
            Ok(RegionPoint {
                rates,
                provenance: Provenance::PowerSplit {
                    alpha: split.shares().to_vec(),
                },
                permutation: Some(perm.clone()),
                split: Some(rank_one_split(ch, &split, &pencils)?),
            })
        })
        .collect::<Result<_>>()?;
    let points = RegionPointSet::new(points);
    let hull = convex_closure(&points)?;
    Ok(MisomeRegion { points, hull })
}

/// High-SNR outer rectangles for both encoding orders.
#[derive(Debug, Clone, PartialEq)]
pub struct HighSnrBounds {
    /// `λmax(h1h1ᵀ, H3ᵀH3)` and its eigenvector.
    pub lambda1: f64,
    pub psi1: DVector<f64>,
    pub lambda2: f64,
    pub psi2: DVector<f64>,
    /// `(h1ᵀψ2)² / ‖H3ψ2‖²`.
    pub a: f64,
    /// `(h2ᵀψ1)² / ‖H3ψ1‖²`.
    pub b: f64,
    /// Corner of the order-(1,2) rectangle; `R2` is `inf` when `b = 0`.
    pub corner_12: RatePair,
    /// Corner of the order-(2,1) rectangle; `R1` is `inf` when `a = 0`.
    pub corner_21: RatePair,
    /// Convex closure of both rectangles, absent when a corner is unbounded.
    pub hull: Option<RegionPointSet>,
}

fn half_log_plus(x: f64) -> f64 {
    if x.is_infinite() {
        f64::INFINITY
    } else {
        (0.5 * x.log2()).max(0.0)
    }
}

pub fn misome_highsnr(ch: &MisomeChannel) -> Result<HighSnrBounds> {
    if ch.users() != 2 {
        return Err(Error::invalid("high-SNR rectangles need a two-user channel"));
    }
    let h3 = ch.h3();
    let gram = SymMatrix::new(h3.transpose() * h3)?;
    let min = gram.min_eigenvalue();
    if min <= 1e-12 * gram.spectral_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Singular(format!(
            "H3ᵀH3 (minimum eigenvalue {min:e}); the high-SNR pencils need a full-column-rank eavesdropper"
        )));
    }
    let top = |k: usize| gen_eigen_max(&SymMatrix::outer(ch.h(k)), &gram);
    let p1 = top(0)?;
    let p2 = top(1)?;
    let leak = |psi: &DVector<f64>| (h3 * psi).norm_squared();
    let b = ch.h(1).dot(&p1.psi_max).powi(2) / leak(&p1.psi_max);
    let a = ch.h(0).dot(&p2.psi_max).powi(2) / leak(&p2.psi_max);
    let ratio = |lambda: f64, c: f64| {
        if c == 0.0 {
            log::warn!("high-SNR constant is zero; the rectangle is unbounded");
            f64::INFINITY
        } else {
            lambda / c
        }
    };
    let corner_12 = RatePair::new(half_log_plus(p1.lambda_max), half_log_plus(ratio(p2.lambda_max, b)));
    let corner_21 = RatePair::new(half_log_plus(ratio(p1.lambda_max, a)), half_log_plus(p2.lambda_max));
    let finite = [corner_12, corner_21].iter().all(|c| c.r1.is_finite() && c.r2.is_finite());
    let hull = if finite {
        Some(convex_closure(&RegionPointSet::from_rates([corner_12, corner_21]))?)
    } else {
        None
    };
    Ok(HighSnrBounds {
        lambda1: p1.lambda_max,
        psi1: p1.psi_max,
        lambda2: p2.lambda_max,
        psi2: p2.psi_max,
        a,
        b,
        corner_12,
        corner_21,
        hull,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::sdpc_rates;

    fn scalar(h1: f64, h2: f64, h3: f64, p: f64) -> MisomeChannel {
        MisomeChannel::two_user(
            DVector::from_element(1, h1),
            DVector::from_element(1, h2),
            DMatrix::from_element(1, 1, h3),
            p,
        )
        .unwrap()
    }

    #[test]
    fn scalar_pencil_value() {
        let ch = scalar(1.0, 1.0, 0.5, 10.0);
        let pencils = build_pencils(&ch, &PowerSplit::two(0.5).unwrap(), &Permutation::identity(2)).unwrap();
        assert!((pencils.lambda(0) - 6.0 / 2.25).abs() < 1e-12);
        let r = misome_rates(&ch, 0.5, &Permutation::identity(2)).unwrap();
        assert!((r.r1 - 0.5 * (6.0_f64 / 2.25).log2()).abs() < 1e-12);
        assert!((r.r1 - 0.7075).abs() < 1e-4);
    }

    #[test]
    fn zero_share_gives_zero_rate() {
        let ch = scalar(1.0, 0.8, 0.5, 10.0);
        let pencils = build_pencils(&ch, &PowerSplit::two(0.0).unwrap(), &Permutation::identity(2)).unwrap();
        assert_eq!(pencils.lambda(0), 1.0);
        let r = misome_rates(&ch, 1.0, &Permutation::identity(2)).unwrap();
        assert_eq!(r.r2, 0.0);
    }

    #[test]
    fn absent_eavesdropper_gives_miso_rates() {
        let ch = MisomeChannel::two_user(
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::zeros(1, 2),
            4.0,
        )
        .unwrap();
        let pencils = build_pencils(&ch, &PowerSplit::two(1.0).unwrap(), &Permutation::identity(2)).unwrap();
        assert_eq!(pencils.stages[0].b, SymMatrix::identity(2));
        assert!((pencils.lambda(0) - (1.0 + 4.0 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn split_validation() {
        assert!(PowerSplit::two(1.5).is_err());
        assert!(PowerSplit::new(vec![0.5, 0.6]).is_err());
        assert!(PowerSplit::new(vec![0.2, 0.3, 0.5]).is_ok());
    }

    #[test]
    fn rank_one_split_reproduces_pencil_rates() {
        let ch = MisomeChannel::two_user(
            DVector::from_vec(vec![1.0, 0.3, -0.2]),
            DVector::from_vec(vec![0.4, 1.1, 0.5]),
            DMatrix::from_row_slice(2, 3, &[0.3, 0.1, 0.0, -0.2, 0.4, 0.2]),
            5.0,
        )
        .unwrap();
        let full = ch.to_channel().unwrap();
        for perm in Permutation::all(2) {
            let split = PowerSplit::two(0.35).unwrap();
            let pencils = build_pencils(&ch, &split, &perm).unwrap();
            let b = rank_one_split(&ch, &split, &pencils).unwrap();
            let sdpc = sdpc_rates(&perm, &b, &full).unwrap();
            let r = misome_rates(&ch, 0.35, &perm).unwrap();
            assert!((sdpc[0] - r.r1).abs() < 1e-9);
            assert!((sdpc[1] - r.r2).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_highsnr_constants() {
        let ch = scalar(1.0, 0.8, 0.5, 1.0);
        let hs = misome_highsnr(&ch).unwrap();
        assert!((hs.b - 0.64 / 0.25).abs() < 1e-12);
        assert!((hs.a - 1.0 / 0.25).abs() < 1e-12);
        assert!((hs.lambda1 - 4.0).abs() < 1e-12);
        // λ2/b = (0.64/0.25)/(0.64/0.25) = 1
        assert_eq!(hs.corner_12.r2, 0.0);
    }

    #[test]
    fn orthogonal_second_user_is_unbounded() {
        let ch = MisomeChannel::two_user(
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        let hs = misome_highsnr(&ch).unwrap();
        assert_eq!(hs.b, 0.0);
        assert!(hs.corner_12.r2.is_infinite());
        assert!(hs.hull.is_none());
    }

    #[test]
    fn rank_deficient_eavesdropper_is_singular() {
        let ch = MisomeChannel::two_user(
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            1.0,
        )
        .unwrap();
        assert_eq!(misome_highsnr(&ch).unwrap_err().kind(), "singular");
    }

    #[test]
    fn normalization_from_general_channel() {
        let rx = |h: &[f64], n: f64| Receiver::new(DMatrix::from_row_slice(1, 2, h), SymMatrix::scalar(n));
        let ch = ChannelInstance::new(
            vec![rx(&[2.0, 0.0], 4.0), rx(&[0.0, 3.0], 9.0)],
            Receiver::new(DMatrix::identity(2, 2) * 2.0, SymMatrix::identity(2).scale(4.0)),
            InputConstraint::Power(2.0),
        )
        .unwrap();
        let m = MisomeChannel::from_channel(&ch).unwrap();
        assert!((m.h(0) - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
        assert!((m.h(1) - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-15);
        assert!((m.h3() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }
}
