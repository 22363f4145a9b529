//! Weighted-sum maximization over covariance splits, KKT multiplier recovery
//! and boundary tracing.

mod kkt;
pub mod oracle;
mod param;
mod search;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use kkt::{
    fit_multipliers, kkt_residual, recover_multipliers, recover_multipliers_with, KktMultipliers,
    ACTIVE_SET_THRESHOLD, DEFAULT_KKT_THRESHOLD,
};

use crate::channel::{classify, ChannelInstance, ChannelTag, InputConstraint};
use crate::error::{Error, Result};
use crate::linalg::{gen_eigen_max, SymMatrix, DEFAULT_PSD_TOL};
use crate::regions::{
    convex_closure, sdpc_raw, sdpc_rates, CovarianceSplit, Permutation, Provenance, RatePair, RegionPoint,
    RegionPointSet,
};
use param::SplitParam;
use search::{newton_polish, pattern_search, SearchRun};

/// Objective `γ1·R1 + γ2·R2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedObjective {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl WeightedObjective {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(gamma1.is_finite() && gamma2.is_finite()) || gamma1 < 0.0 || gamma2 < 0.0 {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if gamma1 == 0.0 && gamma2 == 0.0 {
            return Err(Error::invalid("weights must not both be zero"));
        }
        Ok(WeightedObjective { gamma1, gamma2 })
    }

    /// `R1 + μ·R2`.
    pub fn from_mu(mu: f64) -> Result<Self> {
        Self::new(1.0, mu)
    }

    pub fn mu(&self) -> Option<f64> {
        (self.gamma1 > 0.0).then(|| self.gamma2 / self.gamma1)
    }

    pub fn value(&self, r: RatePair) -> f64 {
        r.weighted(self.gamma1, self.gamma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    /// Pattern-search sweeps per restart.
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_iterations: 5000,
            restarts: 32,
            seed: 0,
        }
    }
}

/// Number of pattern-search results handed to the Newton polish.
const POLISHED: usize = 4;
const POLISH_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub split: CovarianceSplit,
    pub rates: RatePair,
    pub objective: f64,
    /// Largest relative KKT residual; `NaN` where multipliers are not defined
    /// (power constraint, non-identity order, unaligned channel).
    pub kkt_residual: f64,
    pub restarts_used: usize,
    pub converged: bool,
    pub permutation: Permutation,
    pub weights: WeightedObjective,
    /// Incumbent objective after every search iteration of the winning
    /// restart; non-decreasing.
    pub history: Vec<f64>,
}

/// Maximizes `γ1·R1 + γ2·R2` under the identity encoding order.
pub fn maximize_weighted_sum(
    ch: &ChannelInstance,
    obj: &WeightedObjective,
    budget: &SearchBudget,
) -> Result<SolveReport> {
    maximize_weighted_sum_with(ch, obj, &Permutation::identity(2), budget)
}

/// Maximizes `γ1·R1 + γ2·R2` of secret dirty-paper coding in the given order.
pub fn maximize_weighted_sum_with(
    ch: &ChannelInstance,
    obj: &WeightedObjective,
    perm: &Permutation,
    budget: &SearchBudget,
) -> Result<SolveReport> {
    if ch.users() != 2 || perm.len() != 2 {
        return Err(Error::Unsupported("weighted-sum search is implemented for two users".into()));
    }
    if budget.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let t = ch.transmit_antennas();
    let param = SplitParam::new(ch.constraint(), t)?;
    let eval = |x: &[f64]| -> f64 {
        let (b1, b2) = param.split(x);
        let split = CovarianceSplit::pair(b1, b2).expect("same dimension");
        match sdpc_raw(perm, &split, ch) {
            Ok(r) => obj.gamma1 * r[0].max(0.0) + obj.gamma2 * r[1].max(0.0),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let starts: Vec<Vec<f64>> = (0..budget.restarts)
        .map(|_| {
            (0..param.len())
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        })
        .collect();
    let runs: Vec<SearchRun> = starts
        .par_iter()
        .map(|x0| pattern_search(&eval, x0, budget.max_iterations))
        .collect();

    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[b].value.total_cmp(&runs[a].value).then(a.cmp(&b)));
    order.truncate(POLISHED);
    let polished: Vec<(usize, SearchRun)> = order
        .par_iter()
        .map(|&i| (i, newton_polish(&eval, &runs[i], POLISH_ITERATIONS)))
        .collect();
    let (best_idx, best) = polished
        .into_iter()
        .reduce(|a, b| if b.1.value > a.1.value { b } else { a })
        .expect("at least one restart");
    let first = &runs[best_idx];
    let mut history = first.history.clone();
    history.extend(best.history.iter().copied());
    let converged = first.converged && best.converged;
    if !converged {
        log::debug!(
            "weighted-sum search stopped without convergence (pattern {}, polish {})",
            first.converged,
            best.converged
        );
    }

    let (b1, b2) = param.split(&best.x);
    let raw = CovarianceSplit::pair(b1, b2)?;
    let split = match ch.constraint() {
        InputConstraint::Covariance(s) => project_feasible(&raw, s)?,
        InputConstraint::Power(p) => project_feasible_power(&raw, *p)?,
    };
    let r = sdpc_rates(perm, &split, ch)?;
    let rates = RatePair::new(r[0], r[1]);
    let kkt_residual = if perm.is_identity() {
        fit_multipliers(&split, obj, ch)
            .map(|m| m.residual.0.max(m.residual.1))
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(SolveReport {
        objective: obj.value(rates),
        split,
        rates,
        kkt_residual,
        restarts_used: budget.restarts,
        converged,
        permutation: perm.clone(),
        weights: *obj,
        history,
    })
}

fn clip_psd(b: &SymMatrix) -> SymMatrix {
    if b.min_eigenvalue() >= 0.0 {
        b.clone()
    } else {
        b.psd_part()
    }
}

/// Clips each block to its PSD part and shrinks the pair uniformly until
/// `B1 + B2 ⪯ S`.
pub fn project_feasible(raw: &CovarianceSplit, s: &SymMatrix) -> Result<CovarianceSplit> {
    if raw.dim() != s.dim() {
        return Err(Error::invalid("split and constraint differ in dimension"));
    }
    let clipped = CovarianceSplit::new(raw.blocks().iter().map(clip_psd).collect())?;
    let c = gen_eigen_max(&clipped.total(), s)
        .map_err(|_| Error::Singular("covariance constraint S".into()))?
        .lambda_max;
    if c > 1.0 {
        let f = 1.0 / c;
        Ok(CovarianceSplit::new(clipped.blocks().iter().map(|b| b.scale(f)).collect())?)
    } else {
        Ok(clipped)
    }
}

/// Trace-constraint counterpart of [`project_feasible`].
pub fn project_feasible_power(raw: &CovarianceSplit, power: f64) -> Result<CovarianceSplit> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::invalid("power must be finite and non-negative"));
    }
    let clipped = CovarianceSplit::new(raw.blocks().iter().map(clip_psd).collect())?;
    let tr = clipped.total().trace();
    if tr > power {
        let f = if tr > 0.0 { power / tr } else { 0.0 };
        Ok(CovarianceSplit::new(clipped.blocks().iter().map(|b| b.scale(f)).collect())?)
    } else {
        Ok(clipped)
    }
}

/// `n` log-spaced weights from 1 to `mu_max`, the first exactly 1.
pub fn mu_grid(n: usize, mu_max: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("μ grid must not be empty"));
    }
    if !(mu_max.is_finite() && mu_max >= 1.0) {
        return Err(Error::invalid("μ grid upper end must be finite and ≥ 1"));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let top = mu_max.ln();
    Ok((0..n)
        .map(|i| if i == 0 { 1.0 } else { (top * i as f64 / (n - 1) as f64).exp() })
        .collect())
}

pub fn default_mu_grid() -> Vec<f64> {
    mu_grid(32, 1e3).expect("valid defaults")
}

/// Swept weighted-sum maximizers and their convex closure.
#[derive(Debug, Clone, PartialEq)]
pub struct SweptRegion {
    /// Grid maximizers first, then refinement maximizers in insertion order.
    pub reports: Vec<SolveReport>,
    pub points: RegionPointSet,
    pub hull: RegionPointSet,
    /// Extra solves spent on refinement.
    pub refinement_solves: usize,
}

/// Hull-edge refinement after the μ sweep. For an edge between two swept
/// maximizers the problem is re-solved with weights normal to the edge; the
/// maximizer is the boundary point farthest beyond the chord, so once no edge
/// gains more than `tol` bits the hull is within `tol` of the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub tol: f64,
    /// Upper bound on extra edge solves; 0 disables refinement.
    pub max_solves: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            tol: 1e-4,
            max_solves: 64,
        }
    }
}

impl Refinement {
    pub fn off() -> Self {
        Refinement { tol: 0.0, max_solves: 0 }
    }
}

fn region_point(r: &SolveReport) -> RegionPoint {
    RegionPoint {
        rates: r.rates,
        provenance: Provenance::Weighted {
            gamma1: r.weights.gamma1,
            gamma2: r.weights.gamma2,
        },
        permutation: Some(r.permutation.clone()),
        split: Some(r.split.clone()),
    }
}

/// Sweeps `R1 + μR2` over `mu_grid`, then refines hull edges. Degraded
/// channels use the identity order only; otherwise the swapped order is
/// swept too with weights `(μ, 1)`.
pub fn trace_boundary(ch: &ChannelInstance, mu_grid: &[f64], budget: &SearchBudget) -> Result<SweptRegion> {
    trace_boundary_with(ch, mu_grid, budget, &Refinement::default())
}

pub fn trace_boundary_with(
    ch: &ChannelInstance,
    mu_grid: &[f64],
    budget: &SearchBudget,
    refine: &Refinement,
) -> Result<SweptRegion> {
    if mu_grid.is_empty() {
        return Err(Error::invalid("μ grid must not be empty"));
    }
    if mu_grid.iter().any(|m| !(m.is_finite() && *m >= 1.0)) {
        return Err(Error::invalid("μ grid values must be finite and ≥ 1"));
    }
    if !(refine.tol.is_finite() && refine.tol >= 0.0) {
        return Err(Error::invalid("refinement tolerance must be finite and non-negative"));
    }
    if ch.users() != 2 {
        return Err(Error::Unsupported("boundary tracing is implemented for two users".into()));
    }
    let degraded = classify(ch, DEFAULT_PSD_TOL).tag == ChannelTag::Sadbc;
    let mut tasks: Vec<(Permutation, WeightedObjective)> = Vec::new();
    for &mu in mu_grid {
        tasks.push((Permutation::identity(2), WeightedObjective::new(1.0, mu)?));
    }
    if !degraded {
        for &mu in mu_grid {
            tasks.push((Permutation::swapped(), WeightedObjective::new(mu, 1.0)?));
        }
    }
    let mut reports: Vec<SolveReport> = tasks
        .par_iter()
        .map(|(perm, obj)| maximize_weighted_sum_with(ch, obj, perm, budget))
        .collect::<Result<_>>()?;

    let mut perms = vec![Permutation::identity(2)];
    if !degraded {
        perms.push(Permutation::swapped());
    }
    let mut tested: Vec<(RatePair, RatePair)> = Vec::new();
    let mut solves = 0;
    loop {
        let points = RegionPointSet::new(reports.iter().map(region_point).collect());
        let hull = convex_closure(&points)?;
        let edges: Vec<(RatePair, RatePair)> = hull
            .points
            .windows(2)
            .filter(|w| w.iter().all(|p| matches!(p.provenance, Provenance::Weighted { .. })))
            .map(|w| (w[0].rates, w[1].rates))
            .filter(|(a, b)| a.r2 > b.r2 && b.r1 > a.r1 && !tested.contains(&(*a, *b)))
            .take(refine.max_solves.saturating_sub(solves))
            .collect();
        if edges.is_empty() {
            return Ok(SweptRegion {
                reports,
                points,
                hull,
                refinement_solves: solves,
            });
        }
        let jobs: Vec<(usize, &Permutation, WeightedObjective)> = edges
            .iter()
            .enumerate()
            .flat_map(|(i, (a, b))| {
                let (n1, n2) = (a.r2 - b.r2, b.r1 - a.r1);
                let top = n1.max(n2);
                let obj = WeightedObjective {
                    gamma1: n1 / top,
                    gamma2: n2 / top,
                };
                perms.iter().map(move |p| (i, p, obj))
            })
            .collect();
        let solved: Vec<(usize, SolveReport)> = jobs
            .par_iter()
            .map(|(i, perm, obj)| Ok((*i, maximize_weighted_sum_with(ch, obj, perm, budget)?)))
            .collect::<Result<_>>()?;
        for (i, (a, b)) in edges.iter().enumerate() {
            tested.push((*a, *b));
            let best = solved
                .iter()
                .filter(|(j, _)| *j == i)
                .map(|(_, r)| r)
                .max_by(|x, y| x.weights.value(x.rates).total_cmp(&y.weights.value(y.rates)))
                .expect("one report per permutation");
            let w = best.weights;
            let gap = (w.value(best.rates) - w.value(*a)) / w.gamma1.hypot(w.gamma2);
            log::debug!("edge ({:.4}, {:.4})-({:.4}, {:.4}): gap {gap:e}", a.r1, a.r2, b.r1, b.r2);
            if gap > refine.tol {
                reports.push(best.clone());
            }
        }
        solves += edges.len();
    }
}
