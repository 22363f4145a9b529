//! Invariant suite run by the `check` command.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wiretap_core::linalg::rayleigh_quotient;
use wiretap_core::misome::{build_pencils, rank_one_split, PowerSplit};
use wiretap_core::optimizer::{project_feasible_power, recover_multipliers};
use wiretap_core::{
    certify_enhancement, classify, gaussian_rates, gen_eigen_max, misome_rates, project_feasible, psd_leq,
    sdpc_rates, trace_boundary_with, ChannelInstance, ChannelTag, CovarianceSplit, Error, InputConstraint,
    MisomeChannel, Permutation, SymMatrix, DEFAULT_PSD_TOL,
};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl CheckRow {
    fn new(name: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        CheckRow {
            name,
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    fn skip(name: &'static str, why: impl Into<String>) -> Self {
        CheckRow {
            name,
            status: Status::Skip,
            detail: why.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub channel: ChannelTag,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let mut out = format!("channel: {}\n", self.channel.as_str());
        for r in &self.rows {
            out.push_str(&format!("{:<width$}  {}  {}\n", r.name, r.status.as_str(), r.detail));
        }
        out.push_str(if self.passed() { "result: PASS\n" } else { "result: FAIL\n" });
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "channel": self.channel.as_str(),
            "passed": self.passed(),
            "checks": self.rows.iter().map(|r| json!({
                "name": r.name,
                "status": r.status.as_str(),
                "detail": r.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

const SAMPLES: usize = 200;

fn random_psd(rng: &mut ChaCha8Rng, t: usize) -> SymMatrix {
    let g = DMatrix::from_fn(t, t, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::new(&g * g.transpose()).expect("square")
}

fn random_sym(rng: &mut ChaCha8Rng, t: usize, scale: f64) -> SymMatrix {
    SymMatrix::new(DMatrix::from_fn(t, t, |_, _| scale * rng.random_range(-1.0..1.0))).expect("square")
}

fn project(raw: &CovarianceSplit, c: &InputConstraint) -> Result<CovarianceSplit, Error> {
    match c {
        InputConstraint::Covariance(s) => project_feasible(raw, s),
        InputConstraint::Power(p) => project_feasible_power(raw, *p),
    }
}

fn solver_ready(ch: &ChannelInstance) -> Option<String> {
    match ch.constraint() {
        InputConstraint::Covariance(s) if s.min_eigenvalue() <= 0.0 => {
            Some("covariance constraint S is singular".into())
        }
        _ => None,
    }
}

/// `N_eve ⪯ N_k` for every legitimate receiver of an aligned channel.
pub fn eavesdropper_dominant(ch: &ChannelInstance) -> bool {
    ch.is_aligned(DEFAULT_PSD_TOL)
        && ch
            .receivers()
            .iter()
            .all(|rx| psd_leq(&ch.eavesdropper().noise, &rx.noise, DEFAULT_PSD_TOL).unwrap_or(false))
}

fn eigensolver(ch: &ChannelInstance, rng: &mut ChaCha8Rng) -> CheckRow {
    let t = ch.transmit_antennas();
    let eve = ch.eavesdropper();
    let leak = |rx: &wiretap_core::Receiver| -> Result<SymMatrix, Error> {
        let ninv = rx.noise.inverse_pd("noise")?;
        Ok(ninv.congruence(&rx.gain.transpose()))
    };
    let mut run = || -> Result<(f64, f64), Error> {
        let b = &SymMatrix::identity(t) + &leak(eve)?;
        let mut worst_res = 0.0_f64;
        let mut worst_gap = 0.0_f64;
        for rx in ch.receivers() {
            let a = leak(rx)?;
            let pair = gen_eigen_max(&a, &b)?;
            let r = a.matrix() * &pair.psi_max - b.matrix() * &pair.psi_max * pair.lambda_max;
            let scale = a.spectral_norm() + pair.lambda_max.abs() * b.spectral_norm();
            worst_res = worst_res.max(r.norm() / scale.max(f64::MIN_POSITIVE));
            for _ in 0..SAMPLES {
                let v = DVector::from_fn(t, |_, _| rng.random_range(-1.0..1.0));
                if v.norm() > 0.0 {
                    let q = rayleigh_quotient(&a, &b, &v);
                    worst_gap = worst_gap.max(q - pair.lambda_max);
                }
            }
        }
        Ok((worst_res, worst_gap))
    };
    match run() {
        Ok((res, gap)) => CheckRow::new(
            "eigensolver",
            res <= 1e-8 && gap <= 1e-10,
            format!("max residual {res:.2e}; max Rayleigh excess {gap:.2e}"),
        ),
        Err(e) => CheckRow::new("eigensolver", false, e.to_string()),
    }
}

fn zero_split(ch: &ChannelInstance) -> CheckRow {
    let split = CovarianceSplit::zeros(ch.users(), ch.transmit_antennas());
    let mut worst = 0.0_f64;
    for perm in Permutation::all(ch.users()) {
        match sdpc_rates(&perm, &split, ch) {
            Ok(r) => worst = r.iter().fold(worst, |m, x| m.max(x.abs())),
            Err(e) => return CheckRow::new("zero-split", false, e.to_string()),
        }
    }
    CheckRow::new("zero-split", worst == 0.0, format!("max |R| = {worst:e}"))
}

fn random_split(ch: &ChannelInstance, rng: &mut ChaCha8Rng) -> Result<CovarianceSplit, Error> {
    let t = ch.transmit_antennas();
    let blocks = (0..ch.users()).map(|_| random_psd(rng, t)).collect();
    project(&CovarianceSplit::new(blocks)?, ch.constraint())
}

fn sdpc_gaussian(ch: &ChannelInstance, rng: &mut ChaCha8Rng) -> CheckRow {
    const NAME: &str = "sdpc-gaussian";
    if ch.users() != 2 || !ch.is_aligned(DEFAULT_PSD_TOL) {
        return CheckRow::skip(NAME, "needs an aligned two-user channel");
    }
    if let Some(why) = solver_ready(ch) {
        return CheckRow::skip(NAME, why);
    }
    let mut worst = 0.0_f64;
    for _ in 0..SAMPLES {
        let mut run = || -> Result<f64, Error> {
            let split = random_split(ch, rng)?;
            let g = gaussian_rates(&split, ch)?;
            let s = sdpc_rates(&Permutation::identity(2), &split, ch)?;
            Ok((g.r1 - s[0]).abs().max((g.r2 - s[1]).abs()))
        };
        match run() {
            Ok(d) => worst = worst.max(d),
            Err(e) => return CheckRow::new(NAME, false, e.to_string()),
        }
    }
    CheckRow::new(NAME, worst <= 1e-12, format!("max difference {worst:.2e} bits over {SAMPLES} splits"))
}

fn projection(ch: &ChannelInstance, rng: &mut ChaCha8Rng) -> CheckRow {
    const NAME: &str = "projection";
    if let Some(why) = solver_ready(ch) {
        return CheckRow::skip(NAME, why);
    }
    let t = ch.transmit_antennas();
    for _ in 0..SAMPLES {
        let blocks = (0..ch.users()).map(|_| random_sym(rng, t, 5.0)).collect();
        let run = || -> Result<(), Error> {
            let p = project(&CovarianceSplit::new(blocks)?, ch.constraint())?;
            p.check_feasible(ch.constraint(), 1e-12)
        };
        if let Err(e) = run() {
            return CheckRow::new(NAME, false, e.to_string());
        }
    }
    CheckRow::new(NAME, true, format!("{SAMPLES} random splits projected feasible"))
}

/// Boundary sweep plus, for degraded channels, enhancement certificates at
/// the identity-order maximizers.
fn region_and_enhancement(cfg: &RunConfig) -> Vec<CheckRow> {
    let ch = &cfg.channel;
    if ch.users() != 2 {
        return vec![
            CheckRow::skip("region", "needs two users"),
            CheckRow::skip("enhancement", "needs two users"),
        ];
    }
    if let Some(why) = solver_ready(ch) {
        return vec![CheckRow::skip("region", why.clone()), CheckRow::skip("enhancement", why)];
    }
    let swept = match trace_boundary_with(ch, &cfg.mu_grid, &cfg.budget, &cfg.refinement) {
        Ok(s) => s,
        Err(e) => {
            return vec![
                CheckRow::new("region", false, e.to_string()),
                CheckRow::skip("enhancement", "no boundary"),
            ]
        }
    };
    let mut rows = Vec::new();
    let nonneg = swept.points.points.iter().all(|p| {
        let r = p.rates;
        r.r1.is_finite() && r.r2.is_finite() && r.r1 >= 0.0 && r.r2 >= 0.0
    });
    let feasible = swept
        .reports
        .iter()
        .all(|r| r.split.check_feasible(ch.constraint(), 1e-9).is_ok());
    let contained = swept.points.points.iter().all(|p| swept.hull.contains(p.rates, 1e-9));
    let mut detail = format!(
        "{} maximizers, {} hull vertices",
        swept.reports.len(),
        swept.hull.len()
    );
    let mut ok = nonneg && feasible && contained;
    if !nonneg {
        detail.push_str("; negative or non-finite rate");
    }
    if !feasible {
        detail.push_str("; infeasible split");
    }
    if !contained {
        detail.push_str("; point outside hull");
    }
    if eavesdropper_dominant(ch) {
        let origin = swept.hull.is_origin();
        ok &= origin;
        detail = if origin {
            "region = origin (eavesdropper dominant)".into()
        } else {
            format!("eavesdropper dominant but region is not the origin; {detail}")
        };
    } else if swept.hull.is_origin() {
        detail.push_str("; region = origin");
    }
    rows.push(CheckRow::new("region", ok, detail));

    let degraded = classify(ch, DEFAULT_PSD_TOL).tag == ChannelTag::Sadbc;
    if !degraded || !matches!(ch.constraint(), InputConstraint::Covariance(_)) {
        rows.push(CheckRow::skip("enhancement", "needs an aligned degraded channel with covariance constraint"));
        return rows;
    }
    let (mut certified, mut non_stationary, mut failed) = (0, 0, Vec::new());
    for r in swept.reports.iter().filter(|r| r.permutation.is_identity()) {
        let mu = r.weights.gamma2 / r.weights.gamma1;
        match recover_multipliers(&r.split, &r.weights, ch).and_then(|m| certify_enhancement(&r.split, &m, ch)) {
            Ok(c) if c.passed() => certified += 1,
            Ok(_) => failed.push(format!("μ={mu:.3}")),
            Err(Error::NonStationary { .. }) => non_stationary += 1,
            Err(e) => failed.push(format!("μ={mu:.3}: {e}")),
        }
    }
    let mut detail = format!("{certified} certified, {non_stationary} non-stationary");
    if !failed.is_empty() {
        detail.push_str(&format!(", failed at {}", failed.join(", ")));
    }
    rows.push(CheckRow::new("enhancement", failed.is_empty(), detail));
    rows
}

fn misome_checks(cfg: &RunConfig) -> Vec<CheckRow> {
    let ch = match MisomeChannel::from_channel(&cfg.channel) {
        Ok(m) if m.users() == 2 => m,
        Ok(_) => return vec![CheckRow::skip("misome-pencils", "needs two receivers")],
        Err(e) => return vec![CheckRow::skip("misome-pencils", e.to_string())],
    };
    let mut rows = Vec::new();
    let perms = [Permutation::identity(2), Permutation::swapped()];
    let run = || -> Result<(f64, f64), Error> {
        let general = ch.to_channel()?;
        let mut worst = 0.0_f64;
        for perm in &perms {
            for &alpha in &cfg.alpha_grid {
                let split = PowerSplit::two(alpha)?;
                let pencils = build_pencils(&ch, &split, perm)?;
                let r = misome_rates(&ch, alpha, perm)?;
                let cov = rank_one_split(&ch, &split, &pencils)?;
                let s = sdpc_rates(perm, &cov, &general)?;
                worst = worst.max((r.r1 - s[0]).abs()).max((r.r2 - s[1]).abs());
            }
        }
        let mut clamp = 0.0_f64;
        for perm in &perms {
            clamp = clamp.max(misome_rates(&ch, 0.0, perm)?.r1).max(misome_rates(&ch, 1.0, perm)?.r2);
        }
        Ok((worst, clamp))
    };
    match run() {
        Ok((worst, clamp)) => {
            rows.push(CheckRow::new(
                "misome-pencils",
                worst <= 1e-9,
                format!("max pencil vs SDPC difference {worst:.2e} bits"),
            ));
            rows.push(CheckRow::new(
                "misome-clamps",
                clamp == 0.0,
                format!("max rate of the user without power {clamp:e}"),
            ));
        }
        Err(e) => rows.push(CheckRow::new("misome-pencils", false, e.to_string())),
    }
    rows.push(highsnr_monotone(&ch));
    rows
}

fn highsnr_monotone(ch: &MisomeChannel) -> CheckRow {
    const NAME: &str = "highsnr-monotone";
    let h3 = ch.h3();
    let gram = SymMatrix::new(h3.transpose() * h3).expect("square");
    if gram.min_eigenvalue() <= 1e-12 * gram.spectral_norm() {
        return CheckRow::skip(NAME, "H3ᵀH3 is singular");
    }
    match gen_eigen_max(&SymMatrix::outer(ch.h(0)), &gram) {
        Ok(pair) if pair.lambda_max <= 1.0 => {
            return CheckRow::skip(NAME, format!("limit {:.3e} <= 1, user 1 rate is zero", pair.lambda_max));
        }
        Err(e) => return CheckRow::new(NAME, false, e.to_string()),
        _ => {}
    }
    let run = || -> Result<f64, Error> {
        let split = PowerSplit::two(0.5)?;
        let perm = Permutation::identity(2);
        let mut prev = f64::NEG_INFINITY;
        let mut worst = 0.0_f64;
        for i in 0..20 {
            let p = 10f64.powf(6.0 * i as f64 / 19.0);
            let lambda = build_pencils(&ch.with_power(p)?, &split, &perm)?.lambda(0);
            worst = worst.max((prev - lambda) / lambda.abs().max(1.0));
            prev = lambda;
        }
        Ok(worst)
    };
    match run() {
        Ok(drop) => CheckRow::new(NAME, drop <= 1e-9, format!("largest relative decrease {:.2e}", drop.max(0.0))),
        Err(e) => CheckRow::new(NAME, false, e.to_string()),
    }
}

pub fn run_checks(cfg: &RunConfig) -> Result<CheckReport, CliError> {
    let ch = &cfg.channel;
    let class = classify(ch, DEFAULT_PSD_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = vec![
        eigensolver(ch, &mut rng),
        zero_split(ch),
        sdpc_gaussian(ch, &mut rng),
        projection(ch, &mut rng),
    ];
    rows.extend(region_and_enhancement(cfg));
    rows.extend(misome_checks(cfg));
    Ok(CheckReport { channel: class.tag, rows })
}
