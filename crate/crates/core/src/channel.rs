//! Channel model: legitimate receivers plus one external eavesdropper over a
//! shared real MIMO input, and the aligned / degraded / MISOME taxonomy.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix, DEFAULT_PSD_TOL};

/// One receive side: gain `H` (`r × t`) and noise covariance `N` (`r × r`, PD).
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub gain: DMatrix<f64>,
    pub noise: SymMatrix,
}

impl Receiver {
    pub fn new(gain: DMatrix<f64>, noise: SymMatrix) -> Self {
        Receiver { gain, noise }
    }

    /// Identity gain with the given noise covariance.
    pub fn aligned(noise: SymMatrix) -> Self {
        let t = noise.dim();
        Receiver {
            gain: DMatrix::identity(t, t),
            noise,
        }
    }

    pub fn antennas(&self) -> usize {
        self.gain.nrows()
    }
}

/// Transmit constraint: `E[xxᵀ] ⪯ S` or `tr E[xxᵀ] ≤ P`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputConstraint {
    Covariance(SymMatrix),
    Power(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    transmit_antennas: usize,
    receivers: Vec<Receiver>,
    eavesdropper: Receiver,
    constraint: InputConstraint,
}

fn check_receiver(rx: &Receiver, t: usize, name: &str) -> Result<()> {
    if rx.gain.ncols() != t {
        return Err(Error::invalid(format!(
            "gain of {name} has {} columns, expected {t}",
            rx.gain.ncols()
        )));
    }
    if rx.gain.nrows() != rx.noise.dim() {
        return Err(Error::invalid(format!(
            "gain of {name} has {} rows but its noise covariance is {}x{}",
            rx.gain.nrows(),
            rx.noise.dim(),
            rx.noise.dim()
        )));
    }
    if rx.gain.iter().any(|x| !x.is_finite()) || !rx.noise.is_finite() {
        return Err(Error::invalid(format!("{name} has non-finite entries")));
    }
    let min_eig = rx.noise.min_eigenvalue();
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: format!("noise covariance of {name}"),
            min_eigenvalue: min_eig,
        });
    }
    Ok(())
}

/// Diagnostic label of the `index`-th noise covariance (`N1`, `N2`, ...).
/// The eavesdropper is numbered after the legitimate receivers.
pub fn noise_label(index: usize) -> String {
    format!("N{}", index + 1)
}

impl ChannelInstance {
    pub fn new(
        receivers: Vec<Receiver>,
        eavesdropper: Receiver,
        constraint: InputConstraint,
    ) -> Result<Self> {
        if receivers.is_empty() {
            return Err(Error::invalid("at least one legitimate receiver is required"));
        }
        let t = eavesdropper.gain.ncols();
        if t == 0 {
            return Err(Error::invalid("transmit antenna count must be >= 1"));
        }
        for (k, rx) in receivers.iter().enumerate() {
            check_receiver(rx, t, &noise_label(k))?;
        }
        check_receiver(&eavesdropper, t, &noise_label(receivers.len()))?;
        match &constraint {
            InputConstraint::Covariance(s) => {
                if s.dim() != t {
                    return Err(Error::invalid(format!(
                        "covariance constraint is {}x{}, expected {t}x{t}",
                        s.dim(),
                        s.dim()
                    )));
                }
                if !linalg::is_psd(s, DEFAULT_PSD_TOL)? {
                    return Err(Error::invalid(format!(
                        "covariance constraint S is not PSD (minimum eigenvalue {:e})",
                        s.min_eigenvalue()
                    )));
                }
            }
            InputConstraint::Power(p) => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::invalid(format!("power constraint must be positive, got {p}")));
                }
            }
        }
        Ok(ChannelInstance {
            transmit_antennas: t,
            receivers,
            eavesdropper,
            constraint,
        })
    }

    /// Aligned channel (all gains identity) from noise covariances.
    pub fn aligned(
        receiver_noises: Vec<SymMatrix>,
        eavesdropper_noise: SymMatrix,
        constraint: InputConstraint,
    ) -> Result<Self> {
        let receivers = receiver_noises.into_iter().map(Receiver::aligned).collect();
        Self::new(receivers, Receiver::aligned(eavesdropper_noise), constraint)
    }

    pub fn transmit_antennas(&self) -> usize {
        self.transmit_antennas
    }

    pub fn users(&self) -> usize {
        self.receivers.len()
    }

    pub fn receivers(&self) -> &[Receiver] {
        &self.receivers
    }

    pub fn receiver(&self, k: usize) -> &Receiver {
        &self.receivers[k]
    }

    pub fn eavesdropper(&self) -> &Receiver {
        &self.eavesdropper
    }

    pub fn constraint(&self) -> &InputConstraint {
        &self.constraint
    }

    /// Same receivers under a different input constraint.
    pub fn with_constraint(&self, constraint: InputConstraint) -> Result<Self> {
        Self::new(self.receivers.clone(), self.eavesdropper.clone(), constraint)
    }

    /// All gains square and equal to the identity within `tol` (max-abs).
    pub fn is_aligned(&self, tol: f64) -> bool {
        let t = self.transmit_antennas;
        let id = DMatrix::<f64>::identity(t, t);
        self.receivers
            .iter()
            .chain(std::iter::once(&self.eavesdropper))
            .all(|rx| rx.gain.shape() == (t, t) && (&rx.gain - &id).amax() <= tol)
    }

    /// Noise ordering `N1 ⪯ N2 ⪯ … ⪯ Nm ⪯ N_eve`.
    pub fn noises_ordered(&self, tol: f64) -> bool {
        let noises: Vec<&SymMatrix> = self
            .receivers
            .iter()
            .chain(std::iter::once(&self.eavesdropper))
            .map(|rx| &rx.noise)
            .collect();
        noises.windows(2).all(|w| {
            w[0].dim() == w[1].dim() && linalg::psd_leq(w[0], w[1], tol).unwrap_or(false)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelTag {
    /// General secure Gaussian MIMO broadcast channel.
    Sgmbc,
    /// Aligned (identity gains), not necessarily degraded.
    Sambc,
    /// Aligned and degraded.
    Sadbc,
    /// Single-antenna legitimate receivers, multi-antenna eavesdropper.
    Misome,
}

impl ChannelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelTag::Sgmbc => "SGMBC",
            ChannelTag::Sambc => "SAMBC",
            ChannelTag::Sadbc => "SADBC",
            ChannelTag::Misome => "MISOME",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelClass {
    pub tag: ChannelTag,
    pub degradation_order_ok: bool,
}

/// Classifies a channel. Aligned channels take precedence over the MISOME
/// shape so that scalar aligned channels stay in the SADBC/SAMBC family.
/// MISOME only requires single-antenna receivers; non-unit scalar noise is
/// normalized when converting to [`crate::misome::MisomeChannel`].
pub fn classify(ch: &ChannelInstance, tol: f64) -> ChannelClass {
    if ch.is_aligned(tol) {
        let ordered = ch.noises_ordered(tol);
        return ChannelClass {
            tag: if ordered {
                ChannelTag::Sadbc
            } else {
                ChannelTag::Sambc
            },
            degradation_order_ok: ordered,
        };
    }
    if ch.receivers.iter().all(|rx| rx.antennas() == 1) {
        return ChannelClass {
            tag: ChannelTag::Misome,
            degradation_order_ok: false,
        };
    }
    ChannelClass {
        tag: ChannelTag::Sgmbc,
        degradation_order_ok: false,
    }
}

/// Maps square invertible gains to identity, moving them into the noise:
/// `N_i ← H_i⁻¹ N_i H_i⁻ᵀ`. Secrecy rates are unchanged.
pub fn aligned_from_general(ch: &ChannelInstance) -> Result<ChannelInstance> {
    let t = ch.transmit_antennas;
    let convert = |rx: &Receiver, name: String| -> Result<Receiver> {
        if rx.gain.shape() != (t, t) {
            return Err(Error::invalid(format!(
                "gain for {name} is {}x{}, alignment needs square {t}x{t} gains",
                rx.gain.nrows(),
                rx.gain.ncols()
            )));
        }
        let id = DMatrix::<f64>::identity(t, t);
        if rx.gain == id {
            return Ok(rx.clone());
        }
        let lu = rx.gain.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("gain matrix for {name}")))?;
        if !inv.iter().all(|x| x.is_finite()) {
            return Err(Error::Singular(format!("gain matrix for {name}")));
        }
        Ok(Receiver::aligned(rx.noise.congruence(&inv)))
    };
    let receivers = ch
        .receivers
        .iter()
        .enumerate()
        .map(|(k, rx)| convert(rx, format!("H{}", k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let eve = convert(&ch.eavesdropper, format!("H{}", ch.users() + 1))?;
    ChannelInstance::new(receivers, eve, ch.constraint.clone())
}
