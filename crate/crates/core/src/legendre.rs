//! Tensor-product Legendre polynomials, orthonormal with respect to the
//! uniform probability measure on `[-1, 1]^d`.

use crate::error::{Error, Result};
use crate::multiindex::MultiIndexSet;

/// Orthonormal Legendre polynomial `√(2n+1) P_n(y)`.
///
/// Evaluated by the three-term recurrence; `y` is not range checked.
pub fn legendre_1d(n: u32, y: f64) -> f64 {
    let mut p_prev = 1.0;
    if n == 0 {
        return 1.0;
    }
    let mut p = y;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (2.0 * n as f64 + 1.0).sqrt() * p
}

/// Writes the orthonormal values for degrees `0..out.len()` at `y`.
pub fn legendre_table(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut p_prev = 1.0;
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let mut p = y;
    out[1] = 3f64.sqrt() * y;
    for k in 1..out.len() - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
        out[k + 1] = (2.0 * kf + 3.0).sqrt() * p;
    }
}

/// The starting basis `ψ_j(y) = Π_k L_{n_k}(y_k)` for a multi-index set.
#[derive(Debug, Clone)]
pub struct TensorLegendreBasis {
    index_set: MultiIndexSet,
    max_degrees: Vec<u32>,
}

impl TensorLegendreBasis {
    pub fn new(index_set: MultiIndexSet) -> Self {
        let max_degrees = index_set.max_degrees();
        TensorLegendreBasis {
            index_set,
            max_degrees,
        }
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim()
    }

    /// Number of basis functions N.
    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    /// The basis made of the first `n` functions.
    pub fn truncated(&self, n: usize) -> TensorLegendreBasis {
        TensorLegendreBasis::new(self.index_set.truncated(n))
    }

    pub fn row_evaluator(&self) -> RowEvaluator<'_> {
        let tables = self
            .max_degrees
            .iter()
            .map(|&m| vec![0.0; m as usize + 1])
            .collect();
        RowEvaluator { basis: self, tables }
    }

    /// `(ψ_1(y), …, ψ_N(y))` in canonical order.
    pub fn eval_row(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.row_evaluator().eval_into(y, &mut out)?;
        Ok(out)
    }
}

/// Reusable scratch space for evaluating many basis rows.
pub struct RowEvaluator<'a> {
    basis: &'a TensorLegendreBasis,
    tables: Vec<Vec<f64>>,
}

impl RowEvaluator<'_> {
    /// Evaluates the first `out.len()` basis functions at `y`.
    pub fn eval_into(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.basis.dim();
        if y.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: y.len(),
            });
        }
        if out.len() > self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: out.len(),
            });
        }
        for (table, &yk) in self.tables.iter_mut().zip(y) {
            legendre_table(yk, table);
        }
        for (slot, idx) in out.iter_mut().zip(self.basis.index_set.iter()) {
            let mut v = 1.0;
            for (table, &n) in self.tables.iter().zip(idx.entries()) {
                v *= table[n as usize];
            }
            *slot = v;
        }
        Ok(())
    }
}

/// Convenience wrapper matching the free-function form.
pub fn eval_basis_row(basis: &TensorLegendreBasis, y: &[f64]) -> Result<Vec<f64>> {
    basis.eval_row(y)
}
