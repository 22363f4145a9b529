//! Derivative-free local maximization: compass (pattern) search followed by a
//! Newton polish on finite-difference derivatives. Both stages only accept
//! strict improvements, so the incumbent never decreases.

use nalgebra::{DMatrix, DVector};

use crate::linalg::SymMatrix;

#[derive(Debug, Clone)]
pub(crate) struct SearchRun {
    pub x: Vec<f64>,
    pub value: f64,
    /// Incumbent value after every iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

pub(crate) const INITIAL_STEP: f64 = 0.5;
pub(crate) const MIN_STEP: f64 = 1e-6;
/// Probe gains at or below this many bits count as no improvement.
pub(crate) const MIN_GAIN: f64 = 1e-13;

/// Compass search: probe `±step` along each coordinate, move on the first
/// improvement, halve the step after a full sweep without one.
pub(crate) fn pattern_search<F>(f: &F, x0: &[f64], max_iterations: usize) -> SearchRun
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut step = INITIAL_STEP;
    let mut history = vec![fx];
    let mut converged = false;
    let mut iterations = 0;
    let mut probe = x.clone();
    while iterations < max_iterations {
        iterations += 1;
        let mut improved = false;
        let base = x.clone();
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                probe.copy_from_slice(&x);
                probe[i] += dir * step;
                let fp = f(&probe);
                if fp > fx + MIN_GAIN {
                    x.copy_from_slice(&probe);
                    fx = fp;
                    improved = true;
                    break;
                }
            }
        }
        if improved {
            // Hooke-Jeeves pattern move along the sweep's displacement.
            let mut factor = 1.0;
            loop {
                for (p, (a, b)) in probe.iter_mut().zip(x.iter().zip(base.iter())) {
                    *p = a + factor * (a - b);
                }
                let fp = f(&probe);
                if fp > fx + MIN_GAIN {
                    x.copy_from_slice(&probe);
                    fx = fp;
                    factor *= 2.0;
                } else {
                    break;
                }
            }
        }
        history.push(fx);
        if !improved {
            step *= 0.5;
            if step < MIN_STEP {
                converged = true;
                break;
            }
        }
    }
    SearchRun {
        x,
        value: fx,
        history,
        converged,
    }
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> DVector<f64> {
    let mut p = x.to_vec();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        }),
    )
}

fn hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut hm = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + 2.0 * h;
        let up = f(&p);
        p[i] = x[i] - 2.0 * h;
        let down = f(&p);
        p[i] = x[i];
        hm[(i, i)] = (up - 2.0 * fx + down) / (4.0 * h * h);
        for j in (i + 1)..n {
            let mut eval = |di: f64, dj: f64| {
                p[i] = x[i] + di;
                p[j] = x[j] + dj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    hm
}

const GRAD_STEP: f64 = 6e-6;
const HESS_STEP: f64 = 1e-4;
const MAX_STEP_NORM: f64 = 1.0;

/// Modified Newton ascent with backtracking. Curvature magnitudes are floored
/// so the step is always an ascent direction; directions of positive
/// curvature at a stationary point are probed explicitly.
pub(crate) fn newton_polish<F>(f: &F, start: &SearchRun, max_iterations: usize) -> SearchRun
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.x.len();
    let mut x = start.x.clone();
    let mut fx = start.value;
    let mut history = Vec::new();
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let g = gradient(f, &x, GRAD_STEP);
        grad_norm = g.norm();
        let h = hessian(f, &x, fx, HESS_STEP);
        let (vals, vecs) = SymMatrix::new(h).expect("square").eigen();
        let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let floor = 1e-8 * scale + 1e-12;
        let mut d = DVector::zeros(n);
        for i in 0..n {
            let q = vecs.column(i);
            d += q * (q.dot(&g) / vals[i].abs().max(floor));
        }
        let mut candidates: Vec<DVector<f64>> = vec![d];
        if vals[n - 1] > 1e3 * floor {
            let q = vecs.column(n - 1).into_owned();
            candidates.push(&q * 1e-2);
            candidates.push(&q * -1e-2);
        }
        let mut moved = false;
        for mut dir in candidates {
            let norm = dir.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                continue;
            }
            if norm > MAX_STEP_NORM {
                dir *= MAX_STEP_NORM / norm;
            }
            let mut alpha = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + alpha * b).collect();
                let ft = f(&trial);
                if ft > fx {
                    x = trial;
                    fx = ft;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        history.push(fx);
        if !moved {
            break;
        }
    }
    SearchRun {
        x,
        value: fx,
        history,
        converged: grad_norm <= 1e-6 * fx.abs().max(1.0),
    }
}
