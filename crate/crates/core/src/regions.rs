//! Closed-form secrecy rate evaluation and convex closure of rate points.
//!
//! All rates are in bits per channel use. Each user's rate is
//! `½[log₂|signal + noise| − log₂|noise| − (same for the eavesdropper)]⁺`,
//! with both log-det differences weighted equally and the positive part taken
//! after the full difference.

use std::fmt;

use nalgebra::DMatrix;

use crate::channel::{ChannelInstance, InputConstraint};
use crate::error::{Error, Result};
use crate::linalg::{self, is_psd_scaled, log_det, SymMatrix, DEFAULT_PSD_TOL};

/// Transmit covariance shares `B_1, …, B_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSplit {
    blocks: Vec<SymMatrix>,
}

impl CovarianceSplit {
    pub fn new(blocks: Vec<SymMatrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::invalid("covariance split needs at least one block"));
        };
        let t = first.dim();
        if blocks.iter().any(|b| b.dim() != t) {
            return Err(Error::invalid("covariance split blocks differ in dimension"));
        }
        Ok(CovarianceSplit { blocks })
    }

    pub fn pair(b1: SymMatrix, b2: SymMatrix) -> Result<Self> {
        Self::new(vec![b1, b2])
    }

    pub fn zeros(users: usize, t: usize) -> Self {
        CovarianceSplit {
            blocks: vec![SymMatrix::zeros(t); users],
        }
    }

    pub fn blocks(&self) -> &[SymMatrix] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &SymMatrix {
        &self.blocks[k]
    }

    pub fn b1(&self) -> &SymMatrix {
        &self.blocks[0]
    }

    pub fn b2(&self) -> &SymMatrix {
        &self.blocks[1]
    }

    pub fn users(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn total(&self) -> SymMatrix {
        let mut acc = SymMatrix::zeros(self.dim());
        for b in &self.blocks {
            acc = &acc + b;
        }
        acc
    }

    /// Checks `B_k ⪰ 0` and the input constraint, both up to `tol`.
    pub fn check_feasible(&self, constraint: &InputConstraint, tol: f64) -> Result<()> {
        for (k, b) in self.blocks.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::invalid(format!("B{} has non-finite entries", k + 1)));
            }
            let scale = b.spectral_norm().max(1.0);
            if !is_psd_scaled(b, tol, scale) {
                return Err(Error::invalid(format!(
                    "B{} ⪰ 0 violated (minimum eigenvalue {:e})",
                    k + 1,
                    b.min_eigenvalue()
                )));
            }
        }
        let total = self.total();
        match constraint {
            InputConstraint::Covariance(s) => {
                if s.dim() != self.dim() {
                    return Err(Error::invalid("split and constraint dimensions differ"));
                }
                if !linalg::psd_leq(&total, s, tol)? {
                    return Err(Error::invalid(format!(
                        "ΣB ⪯ S violated (minimum eigenvalue of S − ΣB is {:e})",
                        (s - &total).min_eigenvalue()
                    )));
                }
            }
            InputConstraint::Power(p) => {
                if total.trace() > p * (1.0 + tol) {
                    return Err(Error::invalid(format!(
                        "tr(ΣB) ≤ P violated ({} > {p})",
                        total.trace()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Secrecy rate pair in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Self {
        RatePair { r1, r2 }
    }

    pub fn origin() -> Self {
        RatePair { r1: 0.0, r2: 0.0 }
    }

    pub fn weighted(&self, gamma1: f64, gamma2: f64) -> f64 {
        gamma1 * self.r1 + gamma2 * self.r2
    }
}

/// Encoding order of the users; `order[i]` is the (0-based) user encoded at
/// position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        if m == 0 {
            return Err(Error::invalid("permutation must be non-empty"));
        }
        let mut seen = vec![false; m];
        for &k in &order {
            if k >= m || seen[k] {
                return Err(Error::invalid(format!("{order:?} is not a permutation of 0..{m}")));
            }
            seen[k] = true;
        }
        Ok(Permutation { order })
    }

    /// Parses 1-based labels such as `"2-1"` or `"21"`.
    pub fn parse(label: &str) -> Result<Self> {
        let parts: Vec<&str> = if label.contains('-') || label.contains(',') {
            label.split(['-', ',']).map(str::trim).collect()
        } else {
            label.split("").filter(|s| !s.is_empty()).collect()
        };
        let order = parts
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .map(|k| k - 1)
                    .ok_or_else(|| Error::invalid(format!("bad permutation label {label:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }

    pub fn identity(m: usize) -> Self {
        Permutation {
            order: (0..m).collect(),
        }
    }

    /// The order `{2, 1}` for two users.
    pub fn swapped() -> Self {
        Permutation { order: vec![1, 0] }
    }

    /// Every permutation of `m` users in lexicographic order.
    pub fn all(m: usize) -> Vec<Permutation> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation {
                    order: prefix.clone(),
                });
                return;
            }
            for k in 0..used.len() {
                if !used[k] {
                    used[k] = true;
                    prefix.push(k);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[k] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; m], &mut out);
        out
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position at which user `k` is encoded.
    pub fn position_of(&self, k: usize) -> usize {
        self.order.iter().position(|&u| u == k).expect("user in permutation")
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &k)| i == k)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.order.iter().map(|k| (k + 1).to_string()).collect();
        f.write_str(&labels.join("-"))
    }
}

/// Where a region point came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Maximizer of `γ1·R1 + γ2·R2`.
    Weighted { gamma1: f64, gamma2: f64 },
    /// MISOME power split.
    PowerSplit { alpha: Vec<f64> },
    /// Axis projection or origin added by the closure (free rate reduction).
    Projection,
    Unspecified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub rates: RatePair,
    pub provenance: Provenance,
    pub permutation: Option<Permutation>,
    pub split: Option<CovarianceSplit>,
}

impl RegionPoint {
    pub fn bare(rates: RatePair) -> Self {
        RegionPoint {
            rates,
            provenance: Provenance::Unspecified,
            permutation: None,
            split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionPointSet {
    pub points: Vec<RegionPoint>,
}

impl RegionPointSet {
    pub fn new(points: Vec<RegionPoint>) -> Self {
        RegionPointSet { points }
    }

    pub fn from_rates(rates: impl IntoIterator<Item = RatePair>) -> Self {
        RegionPointSet {
            points: rates.into_iter().map(RegionPoint::bare).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rates(&self) -> Vec<RatePair> {
        self.points.iter().map(|p| p.rates).collect()
    }

    /// `true` when the set is exactly the origin.
    pub fn is_origin(&self) -> bool {
        self.points.iter().all(|p| p.rates.r1 == 0.0 && p.rates.r2 == 0.0)
    }

    /// For a boundary produced by [`convex_closure`]: whether `r` lies in the
    /// enclosed region, with slack `tol`.
    pub fn contains(&self, r: RatePair, tol: f64) -> bool {
        if r.r1 < -tol || r.r2 < -tol {
            return false;
        }
        let chain = &self.points;
        let Some(first) = chain.first() else {
            return false;
        };
        let last = chain.last().unwrap();
        if r.r1 > last.rates.r1 + tol || r.r2 > first.rates.r2 + tol {
            return false;
        }
        chain.windows(2).all(|w| {
            let (a, b) = (w[0].rates, w[1].rates);
            // r must be on the lower-left side of the directed edge a→b
            let cross = (b.r1 - a.r1) * (r.r2 - a.r2) - (b.r2 - a.r2) * (r.r1 - a.r1);
            let len = ((b.r1 - a.r1).powi(2) + (b.r2 - a.r2).powi(2)).sqrt();
            cross <= tol * len.max(1e-300)
        })
    }
}

fn ensure_two_users(ch: &ChannelInstance, split: &CovarianceSplit) -> Result<()> {
    if ch.users() != 2 || split.users() != 2 {
        return Err(Error::invalid("two-user channel and split expected"));
    }
    Ok(())
}

fn check_split_dims(ch: &ChannelInstance, split: &CovarianceSplit) -> Result<()> {
    if split.dim() != ch.transmit_antennas() {
        return Err(Error::invalid(format!(
            "split is {}x{}, channel has {} transmit antennas",
            split.dim(),
            split.dim(),
            ch.transmit_antennas()
        )));
    }
    if split.users() != ch.users() {
        return Err(Error::invalid(format!(
            "split has {} blocks for {} users",
            split.users(),
            ch.users()
        )));
    }
    Ok(())
}

/// Gaussian superposition rates of an aligned degraded channel.
pub fn gaussian_rates(split: &CovarianceSplit, ch: &ChannelInstance) -> Result<RatePair> {
    ensure_two_users(ch, split)?;
    check_split_dims(ch, split)?;
    if !ch.is_aligned(DEFAULT_PSD_TOL) {
        return Err(Error::invalid("Gaussian superposition rates need an aligned channel"));
    }
    split.check_feasible(ch.constraint(), DEFAULT_PSD_TOL)?;
    let (b1, b2) = (split.b1(), split.b2());
    let n1 = &ch.receiver(0).noise;
    let n2 = &ch.receiver(1).noise;
    let n3 = &ch.eavesdropper().noise;
    let b12 = b1 + b2;
    let r1 = 0.5 * ((log_det(&(b1 + n1))? - log_det(n1)?) - (log_det(&(b1 + n3))? - log_det(n3)?));
    let r2 = 0.5
        * ((log_det(&(&b12 + n2))? - log_det(&(b1 + n2))?)
            - (log_det(&(&b12 + n3))? - log_det(&(b1 + n3))?));
    Ok(RatePair::new(r1.max(0.0), r2.max(0.0)))
}

/// Unclamped secret dirty-paper-coding rate differences; no feasibility check.
pub(crate) fn sdpc_raw(perm: &Permutation, split: &CovarianceSplit, ch: &ChannelInstance) -> Result<Vec<f64>> {
    let m = ch.users();
    let t = ch.transmit_antennas();
    let eve = ch.eavesdropper();
    let mut out = vec![0.0; m];
    let mut prev = SymMatrix::zeros(t);
    for &k in perm.order() {
        let cum = &prev + split.block(k);
        let rx = ch.receiver(k);
        let user = log_det(&(&cum.congruence(&rx.gain) + &rx.noise))?
            - log_det(&(&prev.congruence(&rx.gain) + &rx.noise))?;
        let leak = log_det(&(&cum.congruence(&eve.gain) + &eve.noise))?
            - log_det(&(&prev.congruence(&eve.gain) + &eve.noise))?;
        out[k] = 0.5 * (user - leak);
        prev = cum;
    }
    Ok(out)
}

/// Per-user secrecy rates of secret dirty-paper coding in encoding order
/// `perm`; entry `k` is user `k`'s rate.
pub fn sdpc_rates(perm: &Permutation, split: &CovarianceSplit, ch: &ChannelInstance) -> Result<Vec<f64>> {
    check_split_dims(ch, split)?;
    if perm.len() != ch.users() {
        return Err(Error::invalid("permutation length differs from user count"));
    }
    split.check_feasible(ch.constraint(), DEFAULT_PSD_TOL)?;
    Ok(sdpc_raw(perm, split, ch)?.into_iter().map(|r| r.max(0.0)).collect())
}

/// Dirty-paper precoder `C = B1 (N1 + B1)⁻¹` and its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct DpcPrecoder {
    pub c: DMatrix<f64>,
    /// `N1 (N1 + B1)⁻¹`, which equals `I − C`.
    pub complement: DMatrix<f64>,
    /// `‖(I − C) − complement‖_F`.
    pub consistency: f64,
}

pub fn dpc_matrix(b1: &SymMatrix, n1: &SymMatrix) -> Result<DpcPrecoder> {
    if b1.dim() != n1.dim() {
        return Err(Error::invalid("B1 and N1 differ in dimension"));
    }
    let total = b1 + n1;
    let inv = total
        .inverse_pd("N1 + B1")
        .map_err(|_| Error::Singular("N1 + B1".into()))?;
    let c = b1.matrix() * inv.matrix();
    let complement = n1.matrix() * inv.matrix();
    let id = DMatrix::<f64>::identity(b1.dim(), b1.dim());
    let consistency = (&id - &c - &complement).norm();
    Ok(DpcPrecoder {
        c,
        complement,
        consistency,
    })
}

fn cross(o: RatePair, a: RatePair, b: RatePair) -> f64 {
    (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1)
}

/// Upper-right boundary of the convex closure of `points` together with the
/// origin and the axis projections of every point. Returned from `(0, max R2)`
/// to `(max R1, 0)`, sorted by `R1` ascending.
pub fn convex_closure(points: &RegionPointSet) -> Result<RegionPointSet> {
    if points.is_empty() {
        return Err(Error::invalid("convex closure of an empty point set"));
    }
    if points
        .points
        .iter()
        .any(|p| !(p.rates.r1.is_finite() && p.rates.r2.is_finite()))
    {
        return Err(Error::invalid("rate points must be finite"));
    }
    let mut cands: Vec<RegionPoint> = Vec::with_capacity(points.len() * 3 + 1);
    let projection = |r: RatePair| RegionPoint {
        rates: r,
        provenance: Provenance::Projection,
        permutation: None,
        split: None,
    };
    for p in &points.points {
        let r = RatePair::new(p.rates.r1.max(0.0), p.rates.r2.max(0.0));
        cands.push(RegionPoint { rates: r, ..p.clone() });
        cands.push(projection(RatePair::new(0.0, r.r2)));
        cands.push(projection(RatePair::new(r.r1, 0.0)));
    }
    cands.push(projection(RatePair::origin()));

    // Sort by R1 ascending, then R2 descending; stable so original points win
    // over projections at identical coordinates.
    cands.sort_by(|a, b| {
        a.rates
            .r1
            .total_cmp(&b.rates.r1)
            .then(b.rates.r2.total_cmp(&a.rates.r2))
    });
    cands.dedup_by(|b, a| a.rates == b.rates);

    let max_r2 = cands.iter().map(|p| p.rates.r2).fold(0.0, f64::max);
    let max_r1 = cands.iter().map(|p| p.rates.r1).fold(0.0, f64::max);
    if max_r1 == 0.0 && max_r2 == 0.0 {
        return Ok(RegionPointSet::new(vec![cands
            .into_iter()
            .find(|p| p.provenance != Provenance::Projection)
            .map(|p| RegionPoint {
                rates: RatePair::origin(),
                ..p
            })
            .unwrap_or_else(|| projection(RatePair::origin()))]));
    }

    // Upper hull (clockwise) of candidates sorted by R1: keep right turns only.
    let mut hull: Vec<RegionPoint> = Vec::new();
    for p in cands {
        while hull.len() >= 2 {
            let n = hull.len();
            if cross(hull[n - 2].rates, hull[n - 1].rates, p.rates) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // Drop the leading origin-side points below (0, max R2) and everything
    // after the first point reaching R2 = 0 at max R1.
    let start = hull
        .iter()
        .position(|p| p.rates.r2 == max_r2)
        .unwrap_or(0);
    let end = hull
        .iter()
        .rposition(|p| p.rates.r1 == max_r1)
        .unwrap_or(hull.len() - 1);
    let mut chain: Vec<RegionPoint> = hull[start..=end].to_vec();
    if chain.first().map(|p| p.rates.r1 > 0.0).unwrap_or(false) {
        chain.insert(0, projection(RatePair::new(0.0, max_r2)));
    }
    if chain.last().map(|p| p.rates.r2 > 0.0).unwrap_or(false) {
        chain.push(projection(RatePair::new(max_r1, 0.0)));
    }
    Ok(RegionPointSet::new(chain))
}
