//! Enhanced degraded channel built from a weighted-sum maximizer and its KKT
//! multipliers, and numerical certificates of its properties.

use nalgebra::DMatrix;

use crate::channel::ChannelInstance;
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, DEFAULT_PSD_TOL};
use crate::optimizer::{KktMultipliers, WeightedObjective};
use crate::regions::{gaussian_rates, CovarianceSplit};

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedNoise {
    pub n1p: SymMatrix,
    pub n2p: SymMatrix,
    /// The eavesdropper noise, copied unchanged.
    pub n3p: SymMatrix,
}

impl EnhancedNoise {
    pub fn channel(&self, original: &ChannelInstance) -> Result<ChannelInstance> {
        ChannelInstance::aligned(
            vec![self.n1p.clone(), self.n2p.clone()],
            self.n3p.clone(),
            original.constraint().clone(),
        )
    }
}

fn ensure_aligned_pair(ch: &ChannelInstance, split: &CovarianceSplit) -> Result<()> {
    if ch.users() != 2 || split.users() != 2 {
        return Err(Error::Unsupported("enhancement is defined for two users".into()));
    }
    if !ch.is_aligned(DEFAULT_PSD_TOL) {
        return Err(Error::Unsupported("enhancement needs an aligned channel".into()));
    }
    if split.dim() != ch.transmit_antennas() {
        return Err(Error::invalid("split dimension differs from the channel"));
    }
    Ok(())
}

/// `N1' = (N1⁻¹ + O1)⁻¹`, `N2' = ((B1 + N2)⁻¹ + O2/μ)⁻¹ − B1`, `N3' = N3`.
pub fn build_enhanced(
    split: &CovarianceSplit,
    mult: &KktMultipliers,
    ch: &ChannelInstance,
) -> Result<EnhancedNoise> {
    ensure_aligned_pair(ch, split)?;
    let mu = mult.mu;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid(format!("μ must be positive, got {mu}")));
    }
    let n1 = &ch.receiver(0).noise;
    let n2 = &ch.receiver(1).noise;
    let b1 = split.b1();
    let n1p = (&n1.inverse_pd("N1")? + &mult.o1).inverse_pd("N1⁻¹ + O1")?;
    let inner = &(b1 + n2).inverse_pd("B1 + N2")? + &mult.o2.scale(1.0 / mu);
    let n2p = &inner.inverse_pd("(B1 + N2)⁻¹ + O2/μ")? - b1;
    let min = n2p.min_eigenvalue();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "enhanced N2'".into(),
            min_eigenvalue: min,
        });
    }
    Ok(EnhancedNoise {
        n1p,
        n2p,
        n3p: ch.eavesdropper().noise.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalityCert {
    /// `(N2' − N1')(N3' − N1')⁻¹`.
    pub a: DMatrix<f64>,
    /// `1/(μ − 1)`.
    pub alpha: f64,
    /// `‖(I−A)(B1+N1') − α·A(B1+N3')‖_F / ‖B1+N1'‖_F`.
    pub residual: f64,
    /// `‖(I−A)N1' + A·N3' − N2'‖_F`.
    pub reconstruction: f64,
    pub condition: f64,
}

/// Condition number above which `N3' − N1'` counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn proportionality(split: &CovarianceSplit, enhanced: &EnhancedNoise, mu: f64) -> Result<ProportionalityCert> {
    if !mu.is_finite() {
        return Err(Error::invalid("μ must be finite"));
    }
    if mu <= 1.0 + 1e-12 {
        return Err(Error::Unsupported(format!(
            "proportionality needs μ > 1 (got {mu}); α = 1/(μ − 1) is undefined"
        )));
    }
    let d31 = &enhanced.n3p - &enhanced.n1p;
    let d21 = &enhanced.n2p - &enhanced.n1p;
    let (vals, _) = d31.eigen();
    let big = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let small = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let condition = if small > 0.0 { big / small } else { f64::INFINITY };
    log::debug!("N3' − N1' condition number {condition:e}");
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateEnhancement(format!(
            "N3' − N1' is singular (condition number {condition:e})"
        )));
    }
    // A·D31 = D21 with both symmetric, so D31·Aᵀ = D21.
    let at = d31
        .matrix()
        .clone()
        .lu()
        .solve(d21.matrix())
        .ok_or_else(|| Error::DegenerateEnhancement("N3' − N1' is singular".into()))?;
    let a = at.transpose();
    let t = a.nrows();
    let id = DMatrix::<f64>::identity(t, t);
    let alpha = 1.0 / (mu - 1.0);
    let b1 = split.b1();
    let lhs = (&id - &a) * (b1 + &enhanced.n1p).matrix();
    let rhs = &a * (b1 + &enhanced.n3p).matrix() * alpha;
    let residual = (lhs - rhs).norm() / (b1 + &enhanced.n1p).frobenius();
    let reconstruction =
        ((&id - &a) * enhanced.n1p.matrix() + &a * enhanced.n3p.matrix() - enhanced.n2p.matrix()).norm();
    Ok(ProportionalityCert {
        a,
        alpha,
        residual,
        reconstruction,
        condition,
    })
}

/// Pass thresholds for [`certify_enhancement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertTolerances {
    pub ordering: f64,
    pub proportionality: f64,
    pub rate_gap: f64,
    pub kkt: f64,
    pub psd: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        CertTolerances {
            ordering: 1e-8,
            proportionality: 1e-5,
            rate_gap: 1e-8,
            kkt: 1e-5,
            psd: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementCertificate {
    pub enhanced: EnhancedNoise,
    /// `Err` holds the reason proportionality was not evaluated.
    pub prop: std::result::Result<ProportionalityCert, Error>,
    /// Largest violation among `N1' ⪯ N1`, `N2' ⪯ N2`, `N1' ⪯ N2'`,
    /// `N2' ⪯ N3'`.
    pub ordering_violation: f64,
    pub eavesdropper_unchanged: bool,
    /// `|R_k(original) − R_k(enhanced)|` in bits.
    pub rate_gap: (f64, f64),
    /// Relative residuals of
    /// `(B1+N1')⁻¹ + (μ−1)(B1+N3')⁻¹ = μ(B1+N2')⁻¹` and of
    /// `μ(ΣB+N2')⁻¹ = μ(ΣB+N3')⁻¹ + O3 − O2`. Only the first gates
    /// `kkt_ok`: the second holds exactly only when `O2 = 0` or `B2 ≻ 0`.
    pub kkt_enhanced_residual: (f64, f64),
    /// Smallest eigenvalue of `O3 − O2`.
    pub o3_minus_o2_min_eigenvalue: f64,
    /// Smallest eigenvalue of `μ[(ΣB+N2')⁻¹ − (ΣB+N3')⁻¹]`, the multiplier of
    /// the power constraint in the enhanced channel when `O1' = O2' = 0`.
    pub enhanced_o3_min_eigenvalue: f64,
    pub ordering_ok: bool,
    pub proportionality_ok: bool,
    pub rate_ok: bool,
    pub kkt_ok: bool,
    pub o3_minus_o2_ok: bool,
}

impl EnhancementCertificate {
    /// All checks pass. When proportionality does not apply (μ = 1) it is
    /// not counted against the certificate.
    pub fn passed(&self) -> bool {
        let prop = match &self.prop {
            Ok(_) => self.proportionality_ok,
            Err(Error::Unsupported(_)) => true,
            Err(_) => false,
        };
        self.ordering_ok && prop && self.rate_ok && self.kkt_ok && self.o3_minus_o2_ok && self.eavesdropper_unchanged
    }
}

fn leq_violation(lo: &SymMatrix, hi: &SymMatrix) -> f64 {
    (-(hi - lo).min_eigenvalue()).max(0.0)
}

fn inv(m: &SymMatrix) -> SymMatrix {
    m.map_eigenvalues(|x| 1.0 / x)
}

pub fn certify_enhancement(
    split: &CovarianceSplit,
    mult: &KktMultipliers,
    ch: &ChannelInstance,
) -> Result<EnhancementCertificate> {
    certify_enhancement_with(split, mult, ch, &CertTolerances::default())
}

/// Measures every property of the enhanced channel; mathematical failures
/// are reported through the flags, only malformed input is an error.
pub fn certify_enhancement_with(
    split: &CovarianceSplit,
    mult: &KktMultipliers,
    ch: &ChannelInstance,
    tol: &CertTolerances,
) -> Result<EnhancementCertificate> {
    let enhanced = build_enhanced(split, mult, ch)?;
    let mu = mult.mu;
    let n1 = &ch.receiver(0).noise;
    let n2 = &ch.receiver(1).noise;
    let n3 = &ch.eavesdropper().noise;

    let ordering_violation = [
        leq_violation(&enhanced.n1p, n1),
        leq_violation(&enhanced.n2p, n2),
        leq_violation(&enhanced.n1p, &enhanced.n2p),
        leq_violation(&enhanced.n2p, &enhanced.n3p),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let eavesdropper_unchanged = enhanced.n3p == *n3;

    let prop = proportionality(split, &enhanced, mu);
    if let Err(e) = &prop {
        log::debug!("proportionality not evaluated: {e}");
    }

    let enhanced_ch = enhanced.channel(ch)?;
    let orig = gaussian_rates(split, ch)?;
    let enh = gaussian_rates(split, &enhanced_ch)?;
    let rate_gap = ((orig.r1 - enh.r1).abs(), (orig.r2 - enh.r2).abs());

    let b1 = split.b1();
    let b12 = split.total();
    let lhs1 = &inv(&(b1 + &enhanced.n1p)) + &inv(&(b1 + &enhanced.n3p)).scale(mu - 1.0);
    let rhs1 = inv(&(b1 + &enhanced.n2p)).scale(mu);
    let o32 = &mult.o3 - &mult.o2;
    let lhs2 = inv(&(&b12 + &enhanced.n2p)).scale(mu);
    let rhs2 = &inv(&(&b12 + &enhanced.n3p)).scale(mu) + &o32;
    let rel = |l: &SymMatrix, r: &SymMatrix| (l - r).frobenius() / l.frobenius().max(f64::MIN_POSITIVE);
    let kkt_enhanced_residual = (rel(&lhs1, &rhs1), rel(&lhs2, &rhs2));
    let o3_minus_o2_min_eigenvalue = o32.min_eigenvalue();
    let enhanced_o3_min_eigenvalue = (&lhs2 - &inv(&(&b12 + &enhanced.n3p)).scale(mu)).min_eigenvalue();

    let proportionality_ok = matches!(&prop, Ok(c) if c.residual <= tol.proportionality);
    Ok(EnhancementCertificate {
        ordering_ok: ordering_violation <= tol.ordering,
        proportionality_ok,
        rate_ok: rate_gap.0 <= tol.rate_gap && rate_gap.1 <= tol.rate_gap,
        kkt_ok: kkt_enhanced_residual.0 <= tol.kkt && enhanced_o3_min_eigenvalue >= -tol.psd,
        o3_minus_o2_ok: o3_minus_o2_min_eigenvalue >= -tol.psd,
        enhanced,
        prop,
        ordering_violation,
        eavesdropper_unchanged,
        rate_gap,
        kkt_enhanced_residual,
        o3_minus_o2_min_eigenvalue,
        enhanced_o3_min_eigenvalue,
    })
}

/// Solves, recovers multipliers and certifies in one call.
pub fn certify_weighted_optimum(
    ch: &ChannelInstance,
    obj: &WeightedObjective,
    budget: &crate::optimizer::SearchBudget,
) -> Result<(crate::optimizer::SolveReport, EnhancementCertificate)> {
    let report = crate::optimizer::maximize_weighted_sum(ch, obj, budget)?;
    let mult = crate::optimizer::recover_multipliers(&report.split, obj, ch)?;
    let cert = certify_enhancement(&report.split, &mult, ch)?;
    Ok((report, cert))
}
