//! Weighted least-squares assembly, solve and evaluation.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::TensorLegendreBasis;
use crate::measure::{solve_r_in_place, KGrid, OrthoFactorization};
use crate::sampler::{row_mass, Method2Plan};

/// Sampling strategy that produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Method1,
    Method2,
    Uniform,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Method1 => "method1",
            Method::Method2 => "method2",
            Method::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "method1" | "m1" => Ok(Method::Method1),
            "method2" | "m2" => Ok(Method::Method2),
            "uniform" | "mc" => Ok(Method::Uniform),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Function values on the grid, evaluated at most once per index.
pub struct SampleCache<'a> {
    grid: &'a KGrid,
    func: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    values: HashMap<usize, f64>,
    evaluations: usize,
}

impl<'a> SampleCache<'a> {
    pub fn new(grid: &'a KGrid, func: &'a (dyn Fn(&[f64]) -> f64 + Sync)) -> Self {
        SampleCache {
            grid,
            func,
            values: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn get(&mut self, i: usize) -> Result<f64> {
        if let Some(&v) = self.values.get(&i) {
            return Ok(v);
        }
        let y = self.grid.point(i);
        let v = (self.func)(y);
        if !v.is_finite() {
            return Err(Error::Data(format!("non-finite function value {v} at grid point {i} {y:?}")));
        }
        self.evaluations += 1;
        self.values.insert(i, v);
        Ok(v)
    }

    pub fn values_at(&mut self, indices: &[usize]) -> Result<Vec<f64>> {
        indices.iter().map(|&i| self.get(i)).collect()
    }

    /// Number of distinct grid points evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

/// The algebraic least-squares system.
#[derive(Debug, Clone)]
pub struct LsSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

fn check_lengths(indices: &[usize], fvals: &[f64]) -> Result<()> {
    if indices.len() != fvals.len() {
        return Err(Error::DimensionMismatch {
            expected: indices.len(),
            got: fvals.len(),
        });
    }
    if let Some((j, v)) = fvals.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite function value {v} at grid point {}",
            indices[j]
        )));
    }
    Ok(())
}

/// Rows `q_{i,k}·s_i` for the first `n` columns, with `b_j = f_j·t_j`.
fn assemble_scaled(
    f: &OrthoFactorization,
    n: usize,
    indices: &[usize],
    fvals: &[f64],
    row_scale: impl Fn(usize) -> Result<(f64, f64)>,
) -> Result<LsSystem> {
    check_lengths(indices, fvals)?;
    let m = indices.len();
    let q = f.q();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (j, (&i, &fv)) in indices.iter().zip(fvals).enumerate() {
        if i >= f.k() {
            return Err(Error::Invariant(format!("grid index {i} outside grid of size {}", f.k())));
        }
        let (sa, sb) = row_scale(i)?;
        for k in 0..n {
            a[(j, k)] = q[(i, k)] * sa;
        }
        b[j] = fv * sb;
    }
    Ok(LsSystem { a, b })
}

/// `A_jk = q_{i_j,k}/√(Mπ_{i_j})`, `b_j = f(z_{i_j})/√(MKπ_{i_j})`.
pub fn assemble_method1(f: &OrthoFactorization, probs: &[f64], indices: &[usize], fvals: &[f64]) -> Result<LsSystem> {
    let m = indices.len() as f64;
    let k = f.k() as f64;
    assemble_scaled(f, f.n(), indices, fvals, |i| {
        let p = probs[i];
        if !(p > 0.0) {
            return Err(Error::Invariant(format!("drawn grid index {i} has zero probability")));
        }
        let s = 1.0 / (m * p).sqrt();
        Ok((s, s / k.sqrt()))
    })
}

/// Method 2 assembly at the plan's current stage, with denominators from
/// the mixture `(M_t/N_t) Σ_{l≤N_t} π^(l)_i`.
pub fn assemble_method2(f: &OrthoFactorization, plan: &Method2Plan, fvals: &[f64]) -> Result<LsSystem> {
    let stage = plan
        .current()
        .ok_or_else(|| Error::Config("Method 2 plan has no stages".into()))?;
    if stage.n > f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: stage.n,
        });
    }
    let indices = plan.indices();
    let mass = row_mass(f, stage.n);
    let per_function = stage.m as f64 / stage.n as f64;
    let k = f.k() as f64;
    assemble_scaled(f, stage.n, &indices, fvals, |i| {
        let mix = per_function * mass[i];
        if !(mix > 0.0) {
            return Err(Error::Invariant(format!("drawn grid index {i} has zero mixture mass")));
        }
        let s = 1.0 / mix.sqrt();
        Ok((s, s / k.sqrt()))
    })
}

/// Unweighted baseline with points drawn uniformly from the grid:
/// `A_jk = q_{i_j,k}·√(K/M)`, `b_j = f(z_{i_j})/√M`.
pub fn assemble_uniform(f: &OrthoFactorization, indices: &[usize], fvals: &[f64]) -> Result<LsSystem> {
    let m = indices.len() as f64;
    let k = f.k() as f64;
    assemble_scaled(f, f.n(), indices, fvals, |_| Ok(((k / m).sqrt(), 1.0 / m.sqrt())))
}

/// Least-squares solution and spectral summary of A.
#[derive(Debug, Clone)]
pub struct Solution {
    pub c: DVector<f64>,
    pub kappa: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub residual: f64,
}

/// `argmin ‖Ax − b‖₂` through a Householder QR of A.
pub fn solve(system: &LsSystem) -> Result<Solution> {
    let (m, n) = system.a.shape();
    if system.b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: system.b.len() });
    }
    if m < n {
        return Err(Error::SolveFailure {
            reason: format!("underdetermined system: M = {m} < N = {n}"),
            sigma_min: 0.0,
            sigma_max: f64::NAN,
        });
    }
    let qr = system.a.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = m.max(n) as f64 * f64::EPSILON * 16.0;
    if !(sigma_min > tol * sigma_max) || !sigma_max.is_finite() {
        return Err(Error::SolveFailure {
            reason: format!("numerically rank-deficient A (σ_min = {sigma_min:e}, σ_max = {sigma_max:e})"),
            sigma_min,
            sigma_max,
        });
    }
    let mut qtb = system.b.clone();
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, n).into_owned();
    let c = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::SolveFailure {
            reason: "zero pivot in triangular solve".into(),
            sigma_min,
            sigma_max,
        })?;
    let residual = (&system.a * &c - &system.b).norm();
    Ok(Solution {
        c,
        kappa: sigma_max / sigma_min,
        sigma_min,
        sigma_max,
        residual,
    })
}

/// A solved fit with its provenance.
#[derive(Debug, Clone)]
pub struct WlsFit {
    pub method: Method,
    pub n: usize,
    pub indices: Vec<usize>,
    pub solution: Solution,
}

impl WlsFit {
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.solution.c
    }

    pub fn summary(&self, seed: u64) -> FitSummary {
        FitSummary {
            method: self.method,
            n: self.n,
            m: self.m(),
            kappa: self.solution.kappa,
            residual: self.solution.residual,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub residual: f64,
    pub seed: u64,
}

/// `f̃(z_i) = √K (Qc)_i` for every grid point.
pub fn evaluate_on_grid(f: &OrthoFactorization, c: &DVector<f64>) -> Result<DVector<f64>> {
    if c.len() != f.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: c.len() });
    }
    Ok(f.q() * c * (f.k() as f64).sqrt())
}

/// Coefficients of `f̃` in the starting basis ψ, `R^{-1}c`.
pub fn psi_coefficients(f: &OrthoFactorization, c: &DVector<f64>) -> Result<Vec<f64>> {
    if c.len() != f.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: c.len() });
    }
    let mut a = c.as_slice().to_vec();
    solve_r_in_place(f.r(), &mut a);
    Ok(a)
}

/// Evaluates `f̃ = Σ c_i φ_i` at arbitrary points after one triangular solve.
pub struct Approximant<'a> {
    basis: &'a TensorLegendreBasis,
    coefficients: Vec<f64>,
}

impl<'a> Approximant<'a> {
    pub fn new(f: &OrthoFactorization, basis: &'a TensorLegendreBasis, c: &DVector<f64>) -> Result<Self> {
        Ok(Approximant {
            basis,
            coefficients: psi_coefficients(f, c)?,
        })
    }

    pub fn eval_many(&self, points: impl Iterator<Item = impl AsRef<[f64]>>) -> Result<Vec<f64>> {
        let mut eval = self.basis.row_evaluator();
        let mut row = vec![0.0; self.coefficients.len()];
        points
            .map(|y| {
                eval.eval_into(y.as_ref(), &mut row)?;
                Ok(row.iter().zip(&self.coefficients).map(|(p, a)| p * a).sum())
            })
            .collect()
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(self.eval_many(std::iter::once(y))?[0])
    }
}

/// `f̃(y) = Σ c_i φ_i(y)`.
pub fn evaluate_at(f: &OrthoFactorization, basis: &TensorLegendreBasis, c: &DVector<f64>, y: &[f64]) -> Result<f64> {
    Approximant::new(f, basis, c)?.eval(y)
}
