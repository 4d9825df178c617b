//! Discrete orthogonality measure on a random K-point grid.
//!
//! The grid `Z = {z_1, …, z_K}` carries the measure `τ = (1/K) Σ δ_{z_i}`.
//! Orthonormalizing the starting basis against τ amounts to a reduced QR
//! factorization of `B = {ψ_j(z_i)/√K}`: the columns of `Q` are the values
//! `φ_j(z_i)/√K` of a τ-orthonormal basis, and `φ(y) = R^{-T} ψ(y)`.
//!
//! Columns are orthogonalized one at a time by classical Gram–Schmidt with
//! a second full reorthogonalization pass (CGS2). `R` always has a positive
//! diagonal, so the factorization is unique and appending columns never
//! changes the ones already present.

use std::io::Write;

use nalgebra::DMatrix;

use crate::domain::{sample_uniform, Domain, PointSet, DEFAULT_MAX_ATTEMPTS};
use crate::error::{Error, Result};
use crate::legendre::TensorLegendreBasis;
use crate::rng::RngStream;

/// The K-point grid supporting τ.
#[derive(Debug, Clone)]
pub struct KGrid {
    points: PointSet,
    seed: u64,
    stream: u64,
}

impl KGrid {
    pub fn from_points(points: PointSet, seed: u64, stream: u64) -> Self {
        KGrid { points, seed, stream }
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.point(i)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Writes the grid as CSV (`index,y1,…,yd`) for reproducibility audits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.points.dim();
        let mut header = vec!["index".to_string()];
        header.extend((1..=d).map(|k| format!("y{k}")));
        w.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(p.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws K i.i.d. points from the uniform measure on Ω.
pub fn generate_grid(domain: &Domain, k: usize, rng: &mut RngStream) -> Result<KGrid> {
    let points = sample_uniform(domain, k, rng, DEFAULT_MAX_ATTEMPTS)?;
    Ok(KGrid::from_points(points, rng.seed(), rng.stream()))
}

/// Reduced QR factorization `B = QR` of the scaled basis matrix.
#[derive(Debug, Clone)]
pub struct OrthoFactorization {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    sigma_min: f64,
    sigma_max: f64,
}

impl OrthoFactorization {
    /// Grid size K.
    pub fn k(&self) -> usize {
        self.q.nrows()
    }

    /// Space dimension N.
    pub fn n(&self) -> usize {
        self.q.ncols()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Column `j` of Q as a contiguous slice.
    pub fn q_col(&self, j: usize) -> &[f64] {
        let k = self.k();
        &self.q.as_slice()[j * k..(j + 1) * k]
    }

    /// Extreme singular values of B (equal to those of R).
    pub fn singular_range(&self) -> (f64, f64) {
        (self.sigma_min, self.sigma_max)
    }

    /// Factorization of the first `n` columns, which by uniqueness of the
    /// positive-diagonal QR is the leading block of this one.
    pub fn prefix(&self, n: usize) -> Result<OrthoFactorization> {
        if n == 0 || n > self.n() {
            return Err(Error::Config(format!("prefix size {n} outside 1..={}", self.n())));
        }
        let q = self.q.columns(0, n).into_owned();
        let r = self.r.view((0, 0), (n, n)).into_owned();
        let (sigma_min, sigma_max) = singular_extremes(&r);
        Ok(OrthoFactorization {
            q,
            r,
            sigma_min,
            sigma_max,
        })
    }
}

/// `σ_min(B)/σ_max(B) < max(K, N)·ε·16` counts as rank deficient.
pub fn rank_tolerance(k: usize, n: usize) -> f64 {
    k.max(n) as f64 * f64::EPSILON * 16.0
}

fn singular_extremes(r: &DMatrix<f64>) -> (f64, f64) {
    let sv = r.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

/// Columns `cols` of `B = {ψ_j(z_i)/√K}` as a column-major buffer.
fn basis_columns(grid: &KGrid, basis: &TensorLegendreBasis, cols: std::ops::Range<usize>) -> Result<Vec<f64>> {
    let k = grid.len();
    let width = cols.end - cols.start;
    let scale = 1.0 / (k as f64).sqrt();
    let mut eval = basis.row_evaluator();
    let mut row = vec![0.0; cols.end];
    let mut out = vec![0.0; k * width];
    for i in 0..k {
        eval.eval_into(grid.point(i), &mut row)?;
        for (c, j) in cols.clone().enumerate() {
            out[c * k + i] = row[j] * scale;
        }
    }
    Ok(out)
}

/// The full K×N matrix B.
pub fn basis_matrix(grid: &KGrid, basis: &TensorLegendreBasis) -> Result<DMatrix<f64>> {
    let data = basis_columns(grid, basis, 0..basis.len())?;
    Ok(DMatrix::from_vec(grid.len(), basis.len(), data))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl OrthoFactorization {
    /// Factorization with no columns yet, ready for extension.
    pub fn empty(k: usize) -> Self {
        OrthoFactorization {
            q: DMatrix::zeros(k, 0),
            r: DMatrix::zeros(0, 0),
            sigma_min: f64::INFINITY,
            sigma_max: 0.0,
        }
    }
}

/// Factors B for the whole basis.
pub fn assemble_and_factor(grid: &KGrid, basis: &TensorLegendreBasis) -> Result<OrthoFactorization> {
    extend_factorization(OrthoFactorization::empty(grid.len()), grid, basis, basis.len())
}

/// Appends columns `f.n()..n_new` of B to an existing factorization.
///
/// The first `f.n()` columns of Q and the leading block of R are left
/// untouched. Each appended column is projected out against all previous
/// columns twice before normalization.
pub fn extend_factorization(
    mut f: OrthoFactorization,
    grid: &KGrid,
    basis: &TensorLegendreBasis,
    n_new: usize,
) -> Result<OrthoFactorization> {
    extend_in_place(&mut f, grid, basis, n_new)?;
    Ok(f)
}

/// As [`extend_factorization`], but on failure `f` is left as it was.
pub fn extend_in_place(
    f: &mut OrthoFactorization,
    grid: &KGrid,
    basis: &TensorLegendreBasis,
    n_new: usize,
) -> Result<()> {
    let k = grid.len();
    let n_old = f.n();
    if f.k() != k {
        return Err(Error::DimensionMismatch { expected: f.k(), got: k });
    }
    if n_new < n_old || n_new > basis.len() {
        return Err(Error::Config(format!(
            "cannot extend a factorization of {n_old} columns to {n_new} (basis has {})",
            basis.len()
        )));
    }
    if n_new > k {
        // fewer points than functions: B cannot have full column rank
        return Err(Error::FullRankFailure {
            sigma_min: 0.0,
            sigma_max: f64::NAN,
        });
    }
    if n_new == n_old {
        return Ok(());
    }

    let new_cols = basis_columns(grid, basis, n_old..n_new)?;
    f.q.resize_horizontally_mut(n_new, 0.0);
    f.r.resize_mut(n_new, n_new, 0.0);
    let outcome = orthogonalize_columns(f, &new_cols, n_old, n_new).and_then(|()| {
        let (sigma_min, sigma_max) = singular_extremes(&f.r);
        if sigma_min / sigma_max >= rank_tolerance(k, n_new) {
            Ok((sigma_min, sigma_max))
        } else {
            Err(Error::FullRankFailure { sigma_min, sigma_max })
        }
    });
    match outcome {
        Ok((sigma_min, sigma_max)) => {
            f.sigma_min = sigma_min;
            f.sigma_max = sigma_max;
            Ok(())
        }
        Err(e) => {
            f.q.resize_horizontally_mut(n_old, 0.0);
            f.r.resize_mut(n_old, n_old, 0.0);
            Err(e)
        }
    }
}

fn orthogonalize_columns(f: &mut OrthoFactorization, new_cols: &[f64], n_old: usize, n_new: usize) -> Result<()> {
    let k = f.k();
    let mut coeffs = vec![0.0; n_new];
    for (c, j) in (n_old..n_new).enumerate() {
        let (done, rest) = f.q.as_mut_slice().split_at_mut(j * k);
        let v = &mut rest[..k];
        v.copy_from_slice(&new_cols[c * k..(c + 1) * k]);
        let original_norm = dot(v, v).sqrt();
        coeffs[..j].iter_mut().for_each(|x| *x = 0.0);
        for _pass in 0..2 {
            for i in 0..j {
                let qi = &done[i * k..(i + 1) * k];
                let h = dot(qi, v);
                coeffs[i] += h;
                axpy(-h, qi, v);
            }
        }
        let norm = dot(v, v).sqrt();
        if !(norm > 0.0) || !norm.is_finite() || norm <= original_norm * f64::EPSILON {
            return Err(Error::FullRankFailure {
                sigma_min: norm,
                sigma_max: original_norm,
            });
        }
        let inv = 1.0 / norm;
        v.iter_mut().for_each(|x| *x *= inv);
        for (i, c) in coeffs.iter().take(j).enumerate() {
            f.r[(i, j)] = *c;
        }
        f.r[(j, j)] = norm;
    }
    Ok(())
}

/// Solves `Rᵀ x = rhs` in place (forward substitution).
pub(crate) fn solve_rt_in_place(r: &DMatrix<f64>, x: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let col = r.column(i);
        let mut s = x[i];
        for j in 0..i {
            s -= col[j] * x[j];
        }
        x[i] = s / col[i];
    }
}

/// Solves `R x = rhs` in place (back substitution).
pub(crate) fn solve_r_in_place(r: &DMatrix<f64>, x: &mut [f64]) {
    let n = x.len();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
}

/// `(φ_1(y), …, φ_N(y))` with `φ(y) = R^{-T} ψ(y)`.
pub fn eval_phi(f: &OrthoFactorization, basis: &TensorLegendreBasis, y: &[f64]) -> Result<Vec<f64>> {
    let n = f.n();
    let mut row = vec![0.0; n];
    basis.row_evaluator().eval_into(y, &mut row)?;
    solve_rt_in_place(&f.r, &mut row);
    Ok(row)
}

/// What to do when B turns out rank deficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankPolicy {
    /// Draw a fresh grid, up to `retries` times.
    Regenerate { retries: usize },
    /// Append `growth·K` new points and refactor, up to `retries` times.
    Grow { growth: f64, retries: usize },
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Regenerate { retries: 3 }
    }
}

/// Grid and factorization for a schedule of nested space sizes.
#[derive(Debug, Clone)]
pub struct ScheduleFactorization {
    pub grid: KGrid,
    /// Factorization of the largest usable stage.
    pub factorization: OrthoFactorization,
    /// Number of leading stages whose B had full rank.
    pub usable_stages: usize,
    /// Grids discarded or grown under the rank policy.
    pub retries: usize,
}

/// Generates a grid and factors B through the nested sizes `stages`,
/// applying the rank policy whenever some stage is rank deficient.
///
/// If every attempt fails, the attempt reaching the most stages is returned
/// with `usable_stages < stages.len()`.
pub fn factor_schedule(
    domain: &Domain,
    basis: &TensorLegendreBasis,
    k: usize,
    stages: &[usize],
    rng: &mut RngStream,
    policy: RankPolicy,
) -> Result<ScheduleFactorization> {
    let retries = match policy {
        RankPolicy::Regenerate { retries } | RankPolicy::Grow { retries, .. } => retries,
    };
    let mut grid = generate_grid(domain, k, rng)?;
    let mut best: Option<ScheduleFactorization> = None;
    for attempt in 0..=retries {
        let mut f = OrthoFactorization::empty(grid.len());
        let mut usable = 0;
        for &n in stages {
            match extend_in_place(&mut f, &grid, basis, n) {
                Ok(()) => usable += 1,
                Err(Error::FullRankFailure { .. }) => break,
                Err(other) => return Err(other),
            }
        }
        if best.as_ref().is_none_or(|b| usable > b.usable_stages) {
            best = Some(ScheduleFactorization {
                grid: grid.clone(),
                factorization: f,
                usable_stages: usable,
                retries: attempt,
            });
        }
        if usable == stages.len() || attempt == retries {
            break;
        }
        grid = match policy {
            RankPolicy::Regenerate { .. } => generate_grid(domain, k, rng)?,
            RankPolicy::Grow { growth, .. } => {
                let extra = ((grid.len() as f64 * growth).ceil() as usize).max(1);
                let more = sample_uniform(domain, extra, rng, DEFAULT_MAX_ATTEMPTS)?;
                let mut points = grid.points().clone();
                points.extend(&more);
                KGrid::from_points(points, grid.seed(), grid.stream())
            }
        };
    }
    Ok(best.expect("at least one attempt"))
}
