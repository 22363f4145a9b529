//! Fixed problem instances shared by the benchmarks in `benches/`.

use nalgebra::{DMatrix, DVector};
use wiretap_core::{ChannelInstance, InputConstraint, MisomeChannel, SymMatrix};

/// Deterministic PD matrix `I + c·(v vᵀ)` with `v = (1, 2, ..., t)`.
pub fn spd(t: usize, c: f64) -> SymMatrix {
    let v = DVector::from_fn(t, |i, _| (i + 1) as f64);
    SymMatrix::new(DMatrix::identity(t, t) + &v * v.transpose() * c).expect("symmetric")
}

/// Symmetric indefinite matrix with a ridge along the anti-diagonal.
pub fn sym(t: usize) -> SymMatrix {
    SymMatrix::new(DMatrix::from_fn(t, t, |i, j| {
        let d = (i as f64 - j as f64).abs();
        if i + j == t - 1 { 2.0 } else { (-d).exp() - 0.5 }
    }))
    .expect("symmetric")
}

/// Degraded two-user channel `N1 ⪯ N2 ⪯ N3` with `S = I`.
pub fn degraded(t: usize) -> ChannelInstance {
    let n1 = spd(t, 0.1);
    let n2 = &n1 + &spd(t, 0.2);
    let n3 = &n2 + &spd(t, 0.3);
    ChannelInstance::aligned(vec![n1, n2], n3, InputConstraint::Covariance(SymMatrix::identity(t)))
        .expect("valid channel")
}

/// Two-user MISOME channel with `t` transmit and `r3` eavesdropper antennas.
pub fn misome(t: usize, r3: usize, power: f64) -> MisomeChannel {
    let h1 = DVector::from_fn(t, |i, _| 1.0 + 0.3 * i as f64);
    let h2 = DVector::from_fn(t, |i, _| if i % 2 == 0 { 1.2 } else { -0.7 });
    let h3 = DMatrix::from_fn(r3, t, |i, j| 0.4 * ((i * t + j) as f64).sin());
    MisomeChannel::two_user(h1, h2, h3, power).expect("valid channel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use wiretap_core::{is_psd, DEFAULT_PSD_TOL};

    #[test]
    fn fixtures_are_valid() {
        for t in 1..=4 {
            assert!(is_psd(&spd(t, 0.5), DEFAULT_PSD_TOL).unwrap());
            let ch = degraded(t);
            assert!(ch.noises_ordered(DEFAULT_PSD_TOL));
            misome(t, 2, 10.0);
        }
        assert_eq!(sym(3).matrix()[(0, 2)], 2.0);
    }
}
