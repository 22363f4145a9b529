//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 5c is known to fail (see README). It is reported as FAIL but
//! does not change the exit status unless `ACCEPTANCE_STRICT=1`.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wiretap_core::enhance::certify_enhancement;
use wiretap_core::linalg::rayleigh_quotient;
use wiretap_core::misome::{build_pencils, rank_one_split};
use wiretap_core::optimizer::oracle::{boundary_distance, scalar_grid_region};
use wiretap_core::optimizer::{maximize_weighted_sum, recover_multipliers};
use wiretap_core::{
    default_mu_grid, gaussian_rates, gen_eigen_max, misome_highsnr, misome_rates, project_feasible, sdpc_rates,
    trace_boundary, ChannelInstance, CovarianceSplit, Error, InputConstraint, MisomeChannel, Permutation,
    PowerSplit, SearchBudget, SymMatrix, WeightedObjective,
};

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    /// Sub-results printed under the criterion.
    subs: Vec<Line>,
}

impl Line {
    fn new(id: &'static str, title: &'static str, pass: bool, detail: String) -> Self {
        Line {
            id,
            title,
            pass,
            detail,
            subs: Vec::new(),
        }
    }
}

/// Sub-criteria that fail by construction of the claim being checked.
const KNOWN_FAILURES: &[&str] = &["5c"];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

fn gram(rng: &mut ChaCha8Rng, t: usize) -> SymMatrix {
    let g = gaussian_matrix(rng, t, t);
    SymMatrix::new(g.transpose() * g).unwrap()
}

fn scalar_reference() -> ChannelInstance {
    ChannelInstance::aligned(
        vec![SymMatrix::scalar(1.0), SymMatrix::scalar(1.5)],
        SymMatrix::scalar(2.0),
        InputConstraint::Covariance(SymMatrix::scalar(2.0)),
    )
    .unwrap()
}

fn criterion_1() -> Line {
    let ch = scalar_reference();
    let start = Instant::now();
    let grid = default_mu_grid();
    let swept = trace_boundary(&ch, &grid, &SearchBudget::default()).unwrap();
    let elapsed = start.elapsed();
    let oracle = scalar_grid_region(&ch, 1e-3).unwrap();
    let d = boundary_distance(&swept.hull, &oracle);
    Line::new(
        "1",
        "scalar-oracle region equivalence",
        d <= 1e-3 && elapsed < Duration::from_secs(10),
        format!(
            "Hausdorff {d:.2e} bits (<= 1e-3), {} grid + {} refinement solves, {:.2} s (< 10 s)",
            grid.len(),
            swept.refinement_solves,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let n = 100;
    let (mut certified, mut non_stationary) = (0, 0);
    let mut bad = Vec::new();
    for i in 0..n {
        let n1 = &gram(&mut rng, 2) + &SymMatrix::identity(2).scale(0.1);
        let n2 = &n1 + &gram(&mut rng, 2);
        let n3 = &n2 + &gram(&mut rng, 2);
        let mu = rng.random_range(1.25f64.ln()..8f64.ln()).exp();
        let ch = ChannelInstance::aligned(vec![n1, n2], n3, InputConstraint::Covariance(SymMatrix::identity(2)))
            .unwrap();
        let obj = WeightedObjective::from_mu(mu).unwrap();
        let budget = SearchBudget {
            seed: i,
            ..Default::default()
        };
        let report = maximize_weighted_sum(&ch, &obj, &budget).unwrap();
        match recover_multipliers(&report.split, &obj, &ch) {
            Ok(mult) => {
                let cert = certify_enhancement(&report.split, &mult, &ch).unwrap();
                let alpha_ok = cert
                    .prop
                    .as_ref()
                    .map(|p| (p.alpha - 1.0 / (mu - 1.0)).abs() <= 1e-15 * p.alpha)
                    .unwrap_or(false);
                if cert.passed() && alpha_ok {
                    certified += 1;
                } else {
                    bad.push(format!("#{i} stationary but not certified"));
                }
            }
            Err(Error::NonStationary { .. }) => non_stationary += 1,
            Err(e) => bad.push(format!("#{i} {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = certified * 100 >= 95 * n && bad.is_empty() && elapsed < Duration::from_secs(300);
    let mut detail = format!(
        "{certified}/{n} certified (>= 95%), {non_stationary} non-stationary with diagnostics, {:.1} s (< 300 s)",
        elapsed.as_secs_f64()
    );
    if !bad.is_empty() {
        detail.push_str(&format!("; {}", bad.join(", ")));
    }
    Line::new("2", "enhancement certification batch", pass, detail)
}

fn criterion_3() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    let n = 1000;
    for i in 0..n {
        let t = 1 + i % 3;
        let noise = |rng: &mut ChaCha8Rng| &gram(rng, t) + &SymMatrix::identity(t).scale(0.1);
        let s = &gram(&mut rng, t) + &SymMatrix::identity(t).scale(0.1);
        let ch = ChannelInstance::aligned(
            vec![noise(&mut rng), noise(&mut rng)],
            noise(&mut rng),
            InputConstraint::Covariance(s.clone()),
        )
        .unwrap();
        let raw = CovarianceSplit::pair(gram(&mut rng, t), gram(&mut rng, t)).unwrap();
        let split = project_feasible(&raw, &s).unwrap();
        let g = gaussian_rates(&split, &ch).unwrap();
        let d = sdpc_rates(&Permutation::identity(2), &split, &ch).unwrap();
        worst = worst.max((g.r1 - d[0]).abs()).max((g.r2 - d[1]).abs());
    }
    Line::new(
        "3",
        "SDPC identity order equals Gaussian superposition",
        worst <= 1e-12,
        format!("max difference {worst:.2e} bits over {n} splits (<= 1e-12)"),
    )
}

fn random_misome(rng: &mut ChaCha8Rng, t: usize, r3: usize, power: f64) -> MisomeChannel {
    let h1 = DVector::from_fn(t, |_, _| normal(rng));
    let h2 = DVector::from_fn(t, |_, _| normal(rng));
    MisomeChannel::two_user(h1, h2, gaussian_matrix(rng, r3, t), power).unwrap()
}

fn criterion_4() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let perms = [Permutation::identity(2), Permutation::swapped()];
    let mut worst = 0.0_f64;
    let n = 100;
    for _ in 0..n {
        let t = rng.random_range(1..=4);
        let r3 = rng.random_range(1..=3);
        let power = rng.random_range(-1.0f64..3.0).exp2().powi(2);
        let ch = random_misome(&mut rng, t, r3, power);
        let general = ch.to_channel().unwrap();
        for _ in 0..5 {
            let alpha = rng.random_range(0.0..=1.0);
            let split = PowerSplit::two(alpha).unwrap();
            for perm in &perms {
                let r = misome_rates(&ch, alpha, perm).unwrap();
                let pencils = build_pencils(&ch, &split, perm).unwrap();
                let cov = rank_one_split(&ch, &split, &pencils).unwrap();
                let s = sdpc_rates(perm, &cov, &general).unwrap();
                worst = worst.max((r.r1 - s[0]).abs()).max((r.r2 - s[1]).abs());
            }
        }
    }
    Line::new(
        "4",
        "MISOME pencils match SDPC with rank-one covariances",
        worst <= 1e-9,
        format!("max difference {worst:.2e} bits, {n} instances x 5 splits x 2 orders (<= 1e-9)"),
    )
}

/// Instances with `H3ᵀH3 ≻ 0` whose users both beat the eavesdropper in the
/// high-SNR limit.
fn highsnr_instance(rng: &mut ChaCha8Rng) -> MisomeChannel {
    loop {
        let t = rng.random_range(2..=3);
        let r3 = rng.random_range(t..=3);
        let ch = random_misome(rng, t, r3, 1.0);
        let h3 = ch.h3();
        let g = SymMatrix::new(h3.transpose() * h3).unwrap();
        let beats = (0..2).all(|k| {
            gen_eigen_max(&SymMatrix::outer(ch.h(k)), &g)
                .map(|p| p.lambda_max > 1.0)
                .unwrap_or(false)
        });
        if beats {
            return ch;
        }
    }
}

fn criterion_5() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let id = Permutation::identity(2);
    let alpha = 0.5;
    let split = PowerSplit::two(alpha).unwrap();
    let n = 20;
    let (mut monotone, mut first, mut second) = (0, 0, 0);
    let (mut worst_first, mut worst_second) = (0.0_f64, 0.0_f64);
    for _ in 0..n {
        let ch = highsnr_instance(&mut rng);
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        for i in 0..20 {
            let p = 10f64.powf(6.0 * i as f64 / 19.0);
            let l = build_pencils(&ch.with_power(p).unwrap(), &split, &id).unwrap().lambda(0);
            ok &= l >= prev;
            prev = l;
        }
        monotone += ok as usize;
        let bounds = misome_highsnr(&ch).unwrap();
        let r = misome_rates(&ch.with_power(1e6).unwrap(), alpha, &id).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
        let e1 = rel(r.r1, bounds.corner_12.r1);
        let e2 = if bounds.corner_12.r2 == 0.0 && r.r2 == 0.0 {
            0.0
        } else {
            rel(r.r2, bounds.corner_12.r2)
        };
        worst_first = worst_first.max(e1);
        worst_second = worst_second.max(e2);
        first += (e1 <= 0.01) as usize;
        second += (e2 <= 0.01) as usize;
    }
    let a = Line::new(
        "5a",
        "λ(1,1) non-decreasing in P over 20 log-spaced values",
        monotone == n,
        format!("{monotone}/{n} instances"),
    );
    let b = Line::new(
        "5b",
        "R1 at P = 1e6 within 1% of the (1,2) rectangle corner",
        first == n,
        format!("{first}/{n} instances, worst relative error {worst_first:.2e}"),
    );
    let c = Line::new(
        "5c",
        "R2 at P = 1e6 within 1% of the (1,2) rectangle corner",
        second == n,
        format!(
            "{second}/{n} instances, worst relative error {worst_second:.2e}; \
             with full-column-rank H3 and t >= 2 the second pencil tends to 1 at fixed α"
        ),
    );
    let mut line = Line::new(
        "5",
        "high-SNR rectangle limit",
        a.pass && b.pass && c.pass,
        format!("{n} instances, α = {alpha}"),
    );
    line.subs = vec![a, b, c];
    line
}

fn criterion_6() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let budget = SearchBudget {
        max_iterations: 2000,
        restarts: 4,
        seed: 6,
    };
    let grid = wiretap_core::optimizer::mu_grid(8, 1e3).unwrap();
    let mut origin = 0;
    let n = 5;
    for _ in 0..n {
        let n3 = &gram(&mut rng, 2) + &SymMatrix::identity(2).scale(0.1);
        let n1 = &n3 + &gram(&mut rng, 2);
        let n2 = &n3 + &gram(&mut rng, 2);
        let ch = ChannelInstance::aligned(vec![n1, n2], n3, InputConstraint::Covariance(SymMatrix::identity(2)))
            .unwrap();
        let swept = trace_boundary(&ch, &grid, &budget).unwrap();
        origin += swept.hull.is_origin() as usize;
    }
    let ch = scalar_reference();
    let zero = CovarianceSplit::zeros(2, 1);
    let mut zero_ok = gaussian_rates(&zero, &ch).unwrap() == wiretap_core::RatePair::origin();
    for perm in Permutation::all(2) {
        zero_ok &= sdpc_rates(&perm, &zero, &ch).unwrap().iter().all(|&r| r == 0.0);
    }
    let m = random_misome(&mut rng, 3, 2, 10.0);
    let mut clamp_ok = true;
    for perm in Permutation::all(2) {
        clamp_ok &= misome_rates(&m, 0.0, &perm).unwrap().r1 == 0.0;
        clamp_ok &= misome_rates(&m, 1.0, &perm).unwrap().r2 == 0.0;
    }
    Line::new(
        "6",
        "degenerate clamps",
        origin == n && zero_ok && clamp_ok,
        format!(
            "eavesdropper-dominant regions at origin {origin}/{n}; zero split gives zero rates: {zero_ok}; \
             α in {{0, 1}} zeroes the idle user: {clamp_ok}"
        ),
    )
}

/// Best of `samples` random directions, then random-perturbation hill climbing.
fn rayleigh_oracle(a: &SymMatrix, b: &SymMatrix, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = a.dim();
    let mut best_v = DVector::from_element(n, 1.0);
    let mut best = rayleigh_quotient(a, b, &best_v);
    for _ in 0..samples {
        let v = DVector::from_fn(n, |_, _| normal(rng));
        let q = rayleigh_quotient(a, b, &v);
        if q > best {
            best = q;
            best_v = v;
        }
    }
    best_v /= best_v.norm();
    let mut step = 1e-2;
    let mut misses = 0;
    while step > 1e-12 {
        let v = &best_v + DVector::from_fn(n, |_, _| step * normal(rng));
        let q = rayleigh_quotient(a, b, &v);
        if q > best {
            best = q;
            best_v = &v / v.norm();
            misses = 0;
        } else {
            misses += 1;
            if misses == 50 {
                step *= 0.5;
                misses = 0;
            }
        }
    }
    best
}

fn criterion_7() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 50;
    let (mut worst_gap, mut worst_excess, mut worst_res) = (0.0_f64, f64::NEG_INFINITY, 0.0_f64);
    for _ in 0..n {
        let a = SymMatrix::new(gaussian_matrix(&mut rng, 3, 3)).unwrap();
        let b = &gram(&mut rng, 3) + &SymMatrix::identity(3).scale(0.1);
        let pair = gen_eigen_max(&a, &b).unwrap();
        let oracle = rayleigh_oracle(&a, &b, 1_000_000, &mut rng);
        let scale = pair.lambda_max.abs().max(1.0);
        worst_gap = worst_gap.max((pair.lambda_max - oracle).abs());
        worst_excess = worst_excess.max((oracle - pair.lambda_max) / scale);
        let r = a.matrix() * &pair.psi_max - b.matrix() * &pair.psi_max * pair.lambda_max;
        worst_res = worst_res.max(r.norm());
    }
    Line::new(
        "7",
        "generalized eigensolver vs random Rayleigh search",
        worst_gap <= 1e-6 && worst_excess <= 1e-12 && worst_res <= 1e-8,
        format!(
            "{n} pencils: max |λ - oracle| {worst_gap:.2e} (<= 1e-6), oracle excess {worst_excess:.2e} \
             (<= 1e-12), residual {worst_res:.2e} (<= 1e-8)"
        ),
    )
}

fn criterion_8() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("region.json");
    std::fs::write(
        &cfg,
        r#"{
            "command": "region",
            "seed": 42,
            "channel": {
                "receivers": [
                    {"noise": [[1.0, 0.3], [0.3, 0.8]]},
                    {"noise": [[1.2, -0.2], [-0.2, 2.0]]}
                ],
                "eavesdropper": {"noise": [[2.5, 0.0], [0.0, 2.2]]},
                "constraint": {"covariance": [[1.0, 0.0], [0.0, 1.0]]}
            },
            "solver": {"restarts": 8, "max_iterations": 3000},
            "grids": {"mu_points": 8, "mu_max": 100.0}
        }"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_wiretap"))
            .args(["--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let rows = a.iter().filter(|&&c| c == b'\n').count().saturating_sub(1);
    Line::new(
        "8",
        "reproducible CSV",
        !a.is_empty() && a == b,
        format!("two runs, {rows} rows, {} bytes, identical: {}", a.len(), a == b),
    )
}

fn print(line: &Line, indent: &str) {
    let tag = if line.pass { "PASS" } else { "FAIL" };
    let known = if !line.pass && KNOWN_FAILURES.contains(&line.id) {
        " (known)"
    } else {
        ""
    };
    println!("{indent}[{tag}] criterion {} {}: {}{known}", line.id, line.title, line.detail);
    for s in &line.subs {
        print(s, "    ");
    }
}

fn unexpected(line: &Line) -> bool {
    if line.subs.is_empty() {
        !line.pass && !KNOWN_FAILURES.contains(&line.id)
    } else {
        line.subs.iter().any(unexpected)
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [fn() -> Line; 8] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
    ];
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed_unexpectedly = false;
    let mut failed = false;
    for f in criteria {
        let line = f();
        print(&line, "");
        failed |= !line.pass;
        failed_unexpectedly |= unexpected(&line);
    }
    if failed_unexpectedly || (strict && failed) {
        std::process::exit(1);
    }
}
