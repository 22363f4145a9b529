//! Brute-force references for single-antenna channels.

use crate::channel::{ChannelInstance, InputConstraint};
use crate::error::{Error, Result};
use crate::regions::{convex_closure, Permutation, RatePair, RegionPointSet};

struct Scalar {
    gains: [f64; 2],
    noises: [f64; 2],
    eve_gain: f64,
    eve_noise: f64,
    s: f64,
}

fn scalar(ch: &ChannelInstance) -> Result<Scalar> {
    if ch.transmit_antennas() != 1 || ch.users() != 2 {
        return Err(Error::Unsupported("grid oracle needs a single-antenna two-user channel".into()));
    }
    if ch.receivers().iter().any(|r| r.antennas() != 1) || ch.eavesdropper().antennas() != 1 {
        return Err(Error::Unsupported("grid oracle needs single-antenna receivers".into()));
    }
    let s = match ch.constraint() {
        InputConstraint::Covariance(s) => s.matrix()[(0, 0)],
        InputConstraint::Power(p) => *p,
    };
    let g = |k: usize| ch.receiver(k).gain[(0, 0)].powi(2);
    let n = |k: usize| ch.receiver(k).noise.matrix()[(0, 0)];
    Ok(Scalar {
        gains: [g(0), g(1)],
        noises: [n(0), n(1)],
        eve_gain: ch.eavesdropper().gain[(0, 0)].powi(2),
        eve_noise: ch.eavesdropper().noise.matrix()[(0, 0)],
        s,
    })
}

impl Scalar {
    fn rates(&self, b: [f64; 2], perm: &Permutation) -> RatePair {
        let mut out = [0.0; 2];
        let mut prev = 0.0;
        for &k in perm.order() {
            let cum = prev + b[k];
            let user = ((self.gains[k] * cum + self.noises[k]) / (self.gains[k] * prev + self.noises[k])).log2();
            let leak = ((self.eve_gain * cum + self.eve_noise) / (self.eve_gain * prev + self.eve_noise)).log2();
            out[k] = (0.5 * (user - leak)).max(0.0);
            prev = cum;
        }
        RatePair::new(out[0], out[1])
    }

    fn grid(&self, step: f64) -> impl Iterator<Item = [f64; 2]> + '_ {
        let n = (1.0 / step).round() as usize;
        (0..=n).flat_map(move |i| (0..=(n - i)).map(move |j| [self.s * i as f64 / n as f64, self.s * j as f64 / n as f64]))
    }
}

/// Rates at every grid split `b1, b2 ∈ step·S·ℕ` with `b1 + b2 ≤ S`.
pub fn scalar_grid_points(ch: &ChannelInstance, perm: &Permutation, step: f64) -> Result<Vec<RatePair>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid("grid step must lie in (0, 1]"));
    }
    let sc = scalar(ch)?;
    Ok(sc.grid(step).map(|b| sc.rates(b, perm)).collect())
}

/// Convex closure of the grid rates over both encoding orders.
pub fn scalar_grid_region(ch: &ChannelInstance, step: f64) -> Result<RegionPointSet> {
    let mut pts = scalar_grid_points(ch, &Permutation::identity(2), step)?;
    pts.extend(scalar_grid_points(ch, &Permutation::swapped(), step)?);
    convex_closure(&RegionPointSet::from_rates(pts))
}

/// Best weighted sum over the grid and its maximizing `(b1, b2)`.
pub fn scalar_grid_optimum(
    ch: &ChannelInstance,
    gamma1: f64,
    gamma2: f64,
    perm: &Permutation,
    step: f64,
) -> Result<(f64, [f64; 2])> {
    let sc = scalar(ch)?;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for b in sc.grid(step) {
        let v = sc.rates(b, perm).weighted(gamma1, gamma2);
        if v > best.0 {
            best = (v, b);
        }
    }
    Ok(best)
}

fn segment_distance(p: RatePair, a: RatePair, b: RatePair) -> f64 {
    let (dx, dy) = (b.r1 - a.r1, b.r2 - a.r2);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.r1 - a.r1) * dx + (p.r2 - a.r2) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.r1 + t * dx, a.r2 + t * dy);
    ((p.r1 - qx).powi(2) + (p.r2 - qy).powi(2)).sqrt()
}

fn polyline_distance(p: RatePair, line: &[RatePair]) -> f64 {
    if line.len() == 1 {
        return segment_distance(p, line[0], line[0]);
    }
    line.windows(2)
        .map(|w| segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between two boundary polylines, measured from every
/// vertex of each to the other curve. Exact for convex chains.
pub fn boundary_distance(a: &RegionPointSet, b: &RegionPointSet) -> f64 {
    let (ra, rb) = (a.rates(), b.rates());
    if ra.is_empty() || rb.is_empty() {
        return f64::INFINITY;
    }
    let ab = ra.iter().map(|&p| polyline_distance(p, &rb)).fold(0.0, f64::max);
    let ba = rb.iter().map(|&p| polyline_distance(p, &ra)).fold(0.0, f64::max);
    ab.max(ba)
}
