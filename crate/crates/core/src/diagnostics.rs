//! Quality constants, error functionals and sample-size thresholds.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::domain::{sample_uniform, Domain, PointSet, DEFAULT_MAX_ATTEMPTS};
use crate::error::{Error, Result};
use crate::legendre::TensorLegendreBasis;
use crate::measure::OrthoFactorization;
use crate::rng::RngStream;
use crate::solver::Approximant;

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.01;

/// `C = 1/σ_min(A)`, i.e. `1/√λ_min(AᵀA)`. Infinite when A is singular.
pub fn constant_c(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    constant_c_from_sigma(smin)
}

pub fn constant_c_from_sigma(sigma_min: f64) -> f64 {
    if sigma_min > 0.0 {
        1.0 / sigma_min
    } else {
        f64::INFINITY
    }
}

/// Relative RMS error `‖f − f̃‖/‖f‖` over a discrete point set.
pub fn relative_error(exact: &[f64], approx: &[f64]) -> Result<f64> {
    if exact.len() != approx.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            got: approx.len(),
        });
    }
    let norm: f64 = exact.iter().map(|v| v * v).sum();
    if !(norm > 0.0) {
        return Err(Error::Data("target function vanishes on every point; relative error undefined".into()));
    }
    let diff: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((diff / norm).sqrt())
}

/// `E_τ` from values on the K-grid.
pub fn error_on_grid(fvals: &[f64], approx: &[f64]) -> Result<f64> {
    relative_error(fvals, approx)
}

/// An evaluation grid drawn independently of the K-grid.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    pub points: PointSet,
    pub seed: u64,
    pub stream: u64,
}

impl EvalGrid {
    pub fn generate(domain: &Domain, t: usize, rng: &mut RngStream) -> Result<Self> {
        let points = sample_uniform(domain, t, rng, DEFAULT_MAX_ATTEMPTS)?;
        Ok(EvalGrid {
            points,
            seed: rng.seed(),
            stream: rng.stream(),
        })
    }

    pub fn from_points(points: PointSet) -> Self {
        EvalGrid {
            points,
            seed: 0,
            stream: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `f` sampled on an evaluation grid, reusable across fits.
pub fn sample_function(grid: &EvalGrid, func: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    grid.points
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let v = func(y);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Data(format!("non-finite function value {v} at evaluation point {i} {y:?}")))
            }
        })
        .collect()
}

/// `E_τ̃` over an independent evaluation grid with precomputed exact values.
pub fn error_off_grid(approx: &Approximant<'_>, grid: &EvalGrid, exact: &[f64]) -> Result<f64> {
    let values = approx.eval_many(grid.points.iter())?;
    relative_error(exact, &values)
}

/// `max_i |g(z_i)|/√(Kπ_i)`; infinite if g is nonzero where π vanishes.
pub fn weighted_supnorm(gvals: &[f64], probs: &[f64]) -> Result<f64> {
    if gvals.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: gvals.len(),
        });
    }
    let k = probs.len() as f64;
    Ok(gvals.iter().zip(probs).fold(0.0, |acc: f64, (&g, &p)| {
        if g == 0.0 {
            acc
        } else if p > 0.0 {
            acc.max(g.abs() / (k * p).sqrt())
        } else {
            f64::INFINITY
        }
    }))
}

/// `D̂ = σ_max` of `{φ_j(t_i)/√T}` over an evaluation grid.
///
/// Computed as `√λ_max` of the N×N Gram matrix, accumulated in row blocks.
pub fn estimate_d(f: &OrthoFactorization, basis: &TensorLegendreBasis, grid: &EvalGrid) -> Result<f64> {
    let n = f.n();
    let t = grid.len();
    if t < n {
        return Err(Error::Config(format!("evaluation grid of {t} points is smaller than N = {n}")));
    }
    const BLOCK: usize = 1024;
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut eval = basis.row_evaluator();
    let mut row = vec![0.0; n];
    let r = f.r();
    let mut start = 0;
    while start < t {
        let len = BLOCK.min(t - start);
        let mut psi_t = DMatrix::<f64>::zeros(n, len);
        for c in 0..len {
            eval.eval_into(grid.points.point(start + c), &mut row)?;
            psi_t.column_mut(c).copy_from_slice(&row);
        }
        if !r.tr_solve_upper_triangular_mut(&mut psi_t) {
            return Err(Error::Invariant("singular R in D estimate".into()));
        }
        gram.gemm(1.0, &psi_t, &psi_t.transpose(), 1.0);
        start += len;
    }
    gram /= t as f64;
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    Ok(lmax.sqrt())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `(1+δ)ln(1+δ) − δ`.
pub fn chernoff_upper(delta: f64) -> f64 {
    (1.0 + delta) * (1.0 + delta).ln() - delta
}

/// `(1−δ)ln(1−δ) + δ`.
pub fn chernoff_lower(delta: f64) -> f64 {
    (1.0 - delta) * (1.0 - delta).ln() + delta
}

fn ceil_count(x: f64) -> u64 {
    x.ceil() as u64
}

/// Sample count guaranteeing stability and accuracy on the grid for Method 1.
pub fn bound_m_method1(n: usize, gamma: f64, delta: f64) -> Result<u64> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    let nf = n as f64;
    Ok(ceil_count(nf * (4.0 * nf / gamma).ln() / chernoff_upper(delta)))
}

/// Per-function draw count for a Method 2 stage, evaluated with `N = N_t`.
pub fn bound_k_method2(n_t: usize, gamma_t: f64, delta: f64) -> Result<u64> {
    check_unit("gamma_t", gamma_t)?;
    check_unit("delta", delta)?;
    Ok(ceil_count((4.0 * n_t as f64 / gamma_t).ln() / chernoff_upper(delta)))
}

/// Grid size guaranteeing accuracy over Ω, given the squared Nikolskii constant.
pub fn bound_k_grid(n: usize, gamma: f64, delta: f64, nikolskii_sq: f64) -> Result<u64> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    Ok(ceil_count(nikolskii_sq * (2.0 * n as f64 / gamma).ln() / chernoff_lower(delta)))
}

/// Grid size for which `D ≤ 1/√(1−δ)` holds with probability `1−γ`.
pub fn bound_k_d_constant(n: usize, gamma: f64, delta: f64, nikolskii_sq: f64) -> Result<u64> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    Ok(ceil_count(nikolskii_sq * (n as f64 / gamma).ln() / chernoff_lower(delta)))
}

/// Lower-eigenvalue condition for weighted sampling from a general measure.
pub fn bound_m_lower_eigenvalue(n: usize, gamma: f64, delta: f64) -> Result<u64> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    let nf = n as f64;
    Ok(ceil_count(nf * (nf / gamma).ln() / chernoff_lower(delta)))
}

/// Two-sided eigenvalue condition (the stricter of the pair).
pub fn bound_m_two_sided(n: usize, gamma: f64, delta: f64) -> Result<u64> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    let nf = n as f64;
    Ok(ceil_count(nf * (2.0 * nf / gamma).ln() / chernoff_upper(delta)))
}

/// `N²/λ` for lower sets on domains with the λ-rectangle property.
pub fn nikolskii_lambda_rect(n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    let nf = n as f64;
    Ok(nf * nf / lambda)
}

/// Sample-size thresholds for one space dimension.
pub fn theory_thresholds(n: usize, gamma: f64, delta: f64, lambda: Option<f64>) -> Result<BTreeMap<String, u64>> {
    let mut map = BTreeMap::new();
    map.insert("m_method1".to_string(), bound_m_method1(n, gamma, delta)?);
    map.insert("m_lower_eigenvalue".to_string(), bound_m_lower_eigenvalue(n, gamma, delta)?);
    map.insert("m_two_sided".to_string(), bound_m_two_sided(n, gamma, delta)?);
    map.insert("k_method2_per_function".to_string(), bound_k_method2(n, gamma, delta)?);
    if let Some(lambda) = lambda {
        let nik = nikolskii_lambda_rect(n, lambda)?;
        map.insert("k_grid".to_string(), bound_k_grid(n, gamma, delta, nik)?);
        map.insert("k_grid_d_constant".to_string(), bound_k_d_constant(n, gamma, delta, nik)?);
    }
    Ok(map)
}

/// Diagnostics for one fit, serializable to JSON.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub m: usize,
    pub c: f64,
    pub kappa: f64,
    pub e_tau: Option<f64>,
    pub e_tau_tilde: Option<f64>,
    pub d_hat: Option<f64>,
    pub delta: f64,
    pub gamma: f64,
    pub theory: BTreeMap<String, u64>,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn new(n: usize, m: usize, sigma_min: f64, sigma_max: f64, delta: f64, gamma: f64) -> Result<Self> {
        Ok(DiagnosticsReport {
            n,
            m,
            c: constant_c_from_sigma(sigma_min),
            kappa: sigma_max / sigma_min,
            e_tau: None,
            e_tau_tilde: None,
            d_hat: None,
            delta,
            gamma,
            theory: theory_thresholds(n, gamma, delta, None)?,
            notes: vec![
                "k_method2_per_function evaluates the per-stage log term with the current stage dimension N_t; \
                 the source statement leaves open whether the final dimension is meant"
                    .to_string(),
            ],
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
