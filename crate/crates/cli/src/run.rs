//! Command dispatch.

use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{json, Value};
use wiretap_core::enhance::certify_enhancement;
use wiretap_core::optimizer::{maximize_weighted_sum, recover_multipliers};
use wiretap_core::{
    classify, misome_highsnr, misome_region, EnhancementCertificate, Error, MisomeChannel, Permutation,
    ProportionalityCert, SolveReport, WeightedObjective, DEFAULT_PSD_TOL,
};

use crate::check::run_checks;
use crate::config::{Command, Format, RunConfig};
use crate::error::CliError;
use crate::output::{jmatrix, jnum, jpoints, jrates, jvector, matrix_row_major, num, pretty, Csv};

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Main artifact: written to the output path, or stdout when none is set.
    pub artifact: Option<String>,
    /// Text always shown on stdout.
    pub console: Option<String>,
    pub success: bool,
}

impl Outcome {
    fn artifact(text: String) -> Self {
        Outcome {
            artifact: Some(text),
            console: None,
            success: true,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    log::info!(
        "{}: {} channel, t = {}, seed {}",
        cfg.command,
        classify(&cfg.channel, DEFAULT_PSD_TOL).tag.as_str(),
        cfg.channel.transmit_antennas(),
        cfg.seed
    );
    match cfg.command {
        Command::Region => region(cfg).map(Outcome::artifact),
        Command::EnhanceVerify => enhance_verify(cfg).map(Outcome::artifact),
        Command::Misome => misome(cfg).map(Outcome::artifact),
        Command::MisomeHighsnr => highsnr(cfg).map(Outcome::artifact),
        Command::Check => {
            let report = run_checks(cfg)?;
            Ok(Outcome {
                artifact: cfg.output.as_ref().map(|_| pretty(&report.to_json())),
                console: Some(report.table()),
                success: report.passed(),
            })
        }
    }
}

/// Writes the artifact and console text; returns the exit status.
pub fn emit(cfg: &RunConfig, outcome: &Outcome) -> Result<i32, CliError> {
    if let Some(text) = &outcome.console {
        print!("{text}");
    }
    if let Some(text) = &outcome.artifact {
        match &cfg.output {
            Some(path) => write_file(path, text)?,
            None => print!("{text}"),
        }
    }
    Ok(if outcome.success { 0 } else { 1 })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

/// `μ` of a weighted report; the larger weight over the smaller one's unit.
fn weight_mu(r: &SolveReport) -> f64 {
    if r.permutation.is_identity() {
        r.weights.gamma2 / r.weights.gamma1
    } else {
        r.weights.gamma1 / r.weights.gamma2
    }
}

pub const REGION_HEADER: [&str; 7] = [
    "weight_mu",
    "permutation",
    "R1_bits",
    "R2_bits",
    "B1_rowmajor",
    "B2_rowmajor",
    "converged",
];

fn region(cfg: &RunConfig) -> Result<String, CliError> {
    let swept = wiretap_core::trace_boundary_with(&cfg.channel, &cfg.mu_grid, &cfg.budget, &cfg.refinement)?;
    Ok(match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new(&REGION_HEADER);
            for r in &swept.reports {
                csv.row(&[
                    num(weight_mu(r)),
                    r.permutation.to_string(),
                    num(r.rates.r1),
                    num(r.rates.r2),
                    matrix_row_major(r.split.b1()),
                    matrix_row_major(r.split.b2()),
                    r.converged.to_string(),
                ]);
            }
            csv.finish()
        }
        Format::Json => {
            let points: Vec<Value> = swept
                .reports
                .iter()
                .map(|r| {
                    json!({
                        "weight_mu": jnum(weight_mu(r)),
                        "permutation": r.permutation.to_string(),
                        "R1_bits": jnum(r.rates.r1),
                        "R2_bits": jnum(r.rates.r2),
                        "B1": jmatrix(r.split.b1()),
                        "B2": jmatrix(r.split.b2()),
                        "converged": r.converged,
                        "kkt_residual": jnum(r.kkt_residual),
                    })
                })
                .collect();
            pretty(&json!({ "points": points, "hull": jpoints(&swept.hull) }))
        }
    })
}

fn proportionality_json(p: &Result<ProportionalityCert, Error>) -> Value {
    match p {
        Ok(c) => json!({
            "A": Value::Array(rows(&c.a).iter().map(|r| jvector(r)).collect()),
            "alpha_prop": jnum(c.alpha),
            "residual": jnum(c.residual),
            "reconstruction": jnum(c.reconstruction),
            "condition": jnum(c.condition),
        }),
        Err(e) => json!({ "not_evaluated": e.to_string(), "kind": e.kind() }),
    }
}

pub fn certificate_json(c: &EnhancementCertificate) -> Value {
    json!({
        "enhanced": {
            "N1p": jmatrix(&c.enhanced.n1p),
            "N2p": jmatrix(&c.enhanced.n2p),
            "N3p": jmatrix(&c.enhanced.n3p),
        },
        "proportionality": proportionality_json(&c.prop),
        "ordering_violation": jnum(c.ordering_violation),
        "eavesdropper_unchanged": c.eavesdropper_unchanged,
        "rate_gap_bits": [jnum(c.rate_gap.0), jnum(c.rate_gap.1)],
        "kkt_enhanced_residual": [jnum(c.kkt_enhanced_residual.0), jnum(c.kkt_enhanced_residual.1)],
        "o3_minus_o2_min_eigenvalue": jnum(c.o3_minus_o2_min_eigenvalue),
        "enhanced_o3_min_eigenvalue": jnum(c.enhanced_o3_min_eigenvalue),
        "ordering_ok": c.ordering_ok,
        "proportionality_ok": c.proportionality_ok,
        "rate_ok": c.rate_ok,
        "kkt_ok": c.kkt_ok,
        "o3_minus_o2_ok": c.o3_minus_o2_ok,
        "passed": c.passed(),
    })
}

/// Solves at `mu`, recovers multipliers and certifies. Non-stationary
/// optima become diagnostic entries rather than errors.
pub fn verify_at(cfg: &RunConfig, mu: f64) -> Result<Value, CliError> {
    let obj = WeightedObjective::from_mu(mu)?;
    let report = maximize_weighted_sum(&cfg.channel, &obj, &cfg.budget)?;
    let mut entry = json!({
        "mu": jnum(mu),
        "R1_bits": jnum(report.rates.r1),
        "R2_bits": jnum(report.rates.r2),
        "objective": jnum(report.objective),
        "kkt_residual": jnum(report.kkt_residual),
        "B1": jmatrix(report.split.b1()),
        "B2": jmatrix(report.split.b2()),
    });
    match recover_multipliers(&report.split, &obj, &cfg.channel) {
        Ok(mult) => {
            let cert = certify_enhancement(&report.split, &mult, &cfg.channel)?;
            entry["status"] = json!(if cert.passed() { "certified" } else { "failed" });
            entry["multipliers"] = json!({
                "O1": jmatrix(&mult.o1),
                "O2": jmatrix(&mult.o2),
                "O3": jmatrix(&mult.o3),
                "residual": [jnum(mult.residual.0), jnum(mult.residual.1)],
            });
            entry["certificate"] = certificate_json(&cert);
        }
        Err(e @ Error::NonStationary { .. }) => {
            let Error::NonStationary { eq3, eq3_1, threshold } = e.clone() else {
                unreachable!()
            };
            log::warn!("μ = {mu}: {e}");
            entry["status"] = json!("non-stationary");
            entry["diagnostic"] = json!({
                "kind": e.kind(),
                "message": e.to_string(),
                "kkt_residuals": [jnum(eq3), jnum(eq3_1)],
                "threshold": jnum(threshold),
            });
        }
        Err(e) => return Err(e.into()),
    }
    Ok(entry)
}

fn enhance_verify(cfg: &RunConfig) -> Result<String, CliError> {
    let entries = cfg
        .mu_grid
        .iter()
        .map(|&mu| verify_at(cfg, mu))
        .collect::<Result<Vec<_>, _>>()?;
    let certified = entries.iter().filter(|e| e["status"] == "certified").count();
    Ok(pretty(&json!({
        "certified": certified,
        "total": entries.len(),
        "entries": entries,
    })))
}

fn misome(cfg: &RunConfig) -> Result<String, CliError> {
    let ch = MisomeChannel::from_channel(&cfg.channel)?;
    let perms = [Permutation::identity(2), Permutation::swapped()];
    let region = misome_region(&ch, &cfg.alpha_grid, &perms)?;
    let alpha_of = |p: &wiretap_core::RegionPoint| match &p.provenance {
        wiretap_core::Provenance::PowerSplit { alpha } => alpha[0],
        _ => f64::NAN,
    };
    let perm_of = |p: &wiretap_core::RegionPoint| p.permutation.as_ref().map(|q| q.to_string()).unwrap_or_default();
    Ok(match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new(&["alpha_split", "permutation", "R1_bits", "R2_bits"]);
            for p in &region.points.points {
                csv.row(&[num(alpha_of(p)), perm_of(p), num(p.rates.r1), num(p.rates.r2)]);
            }
            csv.finish()
        }
        Format::Json => {
            let points: Vec<Value> = region
                .points
                .points
                .iter()
                .map(|p| {
                    json!({
                        "alpha_split": jnum(alpha_of(p)),
                        "permutation": perm_of(p),
                        "R1_bits": jnum(p.rates.r1),
                        "R2_bits": jnum(p.rates.r2),
                    })
                })
                .collect();
            pretty(&json!({ "points": points, "hull": jpoints(&region.hull) }))
        }
    })
}

fn highsnr(cfg: &RunConfig) -> Result<String, CliError> {
    let ch = MisomeChannel::from_channel(&cfg.channel)?;
    let b = misome_highsnr(&ch)?;
    let col = |v: &nalgebra::DVector<f64>| jvector(v.as_slice());
    Ok(pretty(&json!({
        "lambda1": jnum(b.lambda1),
        "lambda2": jnum(b.lambda2),
        "psi1": col(&b.psi1),
        "psi2": col(&b.psi2),
        "a": jnum(b.a),
        "b": jnum(b.b),
        "rectangle_12": jrates(b.corner_12),
        "rectangle_21": jrates(b.corner_21),
        "hull": b.hull.as_ref().map(jpoints).unwrap_or(Value::Null),
    })))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
