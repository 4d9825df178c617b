//! Christoffel-type sampling distributions on the grid.
//!
//! Method 1 draws i.i.d. from the single distribution
//! `π_i = (1/N) Σ_j q_ij²`. Method 2 keeps one distribution per basis
//! function, `π^(l)_i = q_il²`, draws `k_t` points from each, and recycles
//! every earlier draw when the space grows.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::OrthoFactorization;
use crate::rng::RngStream;

/// A probability vector over grid indices with its cumulative sums.
#[derive(Debug, Clone)]
pub struct Categorical {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Categorical {
    /// Builds a sampler from nonnegative weights (normalized internally).
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("empty probability vector".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Invariant("probability weights must be finite and nonnegative".into()));
        }
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::Invariant("probability weights sum to zero".into()));
        }
        let probs = weights.iter().map(|w| w / acc).collect();
        Ok(Categorical { probs, cdf })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// One draw by inverse-CDF lookup. Indices with zero mass are never returned.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let total = *self.cdf.last().expect("nonempty");
        let u = rng.uniform() * total;
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1)
    }
}

/// Values `w(z_i)` of the reciprocal Christoffel weight on the grid.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    values: Vec<f64>,
}

impl WeightFunction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// `π_i = (1/N) Σ_j q_ij²` and `w(z_i) = 1/(K π_i)` (infinite where π_i = 0).
pub fn method1_distribution(f: &OrthoFactorization) -> Result<(Categorical, WeightFunction)> {
    let weights = row_mass(f, f.n());
    let k = f.k() as f64;
    let dist = Categorical::from_weights(weights)?;
    let values = dist
        .probs()
        .iter()
        .map(|&p| if p > 0.0 { 1.0 / (k * p) } else { f64::INFINITY })
        .collect();
    Ok((dist, WeightFunction { values }))
}

/// `Σ_{l<n} q_il²` for every grid row.
pub fn row_mass(f: &OrthoFactorization, n: usize) -> Vec<f64> {
    let mut mass = vec![0.0; f.k()];
    for l in 0..n {
        for (m, q) in mass.iter_mut().zip(f.q_col(l)) {
            *m += q * q;
        }
    }
    mass
}

/// Method 1 sample: M i.i.d. grid indices.
#[derive(Debug, Clone)]
pub struct Method1Plan {
    pub m: usize,
    pub indices: Vec<usize>,
    /// True when M < N; the solver will reject such a plan.
    pub undersampled: bool,
}

pub fn draw_method1(dist: &Categorical, n: usize, m: usize, rng: &mut RngStream) -> Result<Method1Plan> {
    if m == 0 {
        return Err(Error::Config("sample count M must be at least 1".into()));
    }
    let indices = (0..m).map(|_| dist.sample(rng)).collect();
    Ok(Method1Plan {
        m,
        indices,
        undersampled: m < n,
    })
}

/// One recorded Method 2 draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Draw {
    pub stage: usize,
    pub l: usize,
    pub grid_index: usize,
}

/// One row of the Method 2 stage ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub n: usize,
    pub k: usize,
    pub m: usize,
}

/// State of the adaptive Method 2 sampler across stages.
#[derive(Debug, Clone, Default)]
pub struct Method2Plan {
    stages: Vec<StageRecord>,
    draws: Vec<Draw>,
}

impl Method2Plan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    pub fn current(&self) -> Option<StageRecord> {
        self.stages.last().copied()
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn indices(&self) -> Vec<usize> {
        self.draws.iter().map(|d| d.grid_index).collect()
    }

    /// Number of draws recorded for basis function `l`.
    pub fn count_for(&self, l: usize) -> usize {
        self.draws.iter().filter(|d| d.l == l).count()
    }

    /// Writes the draw ledger as CSV (`stage,l,grid_index`).
    pub fn write_ledger<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for d in &self.draws {
            w.serialize(d)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn column_distribution(f: &OrthoFactorization, l: usize) -> Result<Categorical> {
    Categorical::from_weights(f.q_col(l).iter().map(|q| q * q).collect())
}

/// Moves the plan to the next stage with `n_t` functions and `k_t` draws per function.
///
/// Existing draws are kept; each old function gets `k_t − k_{t−1}` fresh
/// draws and each new one gets `k_t`.
pub fn method2_advance(
    plan: &mut Method2Plan,
    f: &OrthoFactorization,
    n_t: usize,
    k_t: usize,
    rng: &mut RngStream,
) -> Result<()> {
    let (n_prev, k_prev) = plan.current().map(|s| (s.n, s.k)).unwrap_or((0, 0));
    if k_t < k_prev {
        return Err(Error::Config(format!("k must be nondecreasing across stages ({k_t} < {k_prev})")));
    }
    if k_t == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n_t < n_prev {
        return Err(Error::Config(format!("N must be nondecreasing across stages ({n_t} < {n_prev})")));
    }
    if n_t > f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: n_t,
        });
    }
    let stage = plan.stages.len() + 1;
    for l in 0..n_t {
        let fresh = if l < n_prev { k_t - k_prev } else { k_t };
        if fresh == 0 {
            continue;
        }
        let dist = column_distribution(f, l)?;
        for _ in 0..fresh {
            plan.draws.push(Draw {
                stage,
                l,
                grid_index: dist.sample(rng),
            });
        }
    }
    plan.stages.push(StageRecord {
        stage,
        n: n_t,
        k: k_t,
        m: k_t * n_t,
    });
    Ok(())
}

/// `max_i |(1/N_t) Σ_{l≤N_t} π^(l)_i − π_i|` against the Method 1 distribution.
pub fn mixture_check(plan: &Method2Plan, f: &OrthoFactorization) -> Result<f64> {
    let n = plan
        .current()
        .ok_or_else(|| Error::Config("mixture check needs at least one stage".into()))?
        .n;
    let prefix = f.prefix(n)?;
    let (pi, _) = method1_distribution(&prefix)?;
    let mut mix = vec![0.0; f.k()];
    for l in 0..n {
        let col = column_distribution(f, l)?;
        for (m, p) in mix.iter_mut().zip(col.probs()) {
            *m += p / n as f64;
        }
    }
    Ok(mix
        .iter()
        .zip(pi.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Target sample count `max(N, ⌈N ln N⌉)`.
pub fn m_target(n: usize) -> usize {
    let nf = n as f64;
    n.max((nf * nf.ln()).ceil() as usize)
}

/// Default per-function draw count for the next stage.
pub fn default_k(k_prev: usize, n_t: usize, m_wanted: usize) -> usize {
    k_prev.max(m_wanted.div_ceil(n_t)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, PointSet};
    use crate::legendre::TensorLegendreBasis;
    use crate::measure::{assemble_and_factor, generate_grid, KGrid};
    use crate::multiindex::hyperbolic_cross;

    fn three_point() -> OrthoFactorization {
        let rows = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let grid = KGrid::from_points(PointSet::from_rows(1, &rows).unwrap(), 0, 0);
        assemble_and_factor(&grid, &TensorLegendreBasis::new(hyperbolic_cross(1, 1))).unwrap()
    }

    fn random_factorization(k: usize, order: u32, seed: u64) -> OrthoFactorization {
        let domain = Domain::parse("annulus:rmin=0.25,rmax=1", 2).unwrap();
        let grid = generate_grid(&domain, k, &mut RngStream::new(seed, 0)).unwrap();
        assemble_and_factor(&grid, &TensorLegendreBasis::new(hyperbolic_cross(2, order))).unwrap()
    }

    #[test]
    fn three_point_distribution() {
        let (pi, w) = method1_distribution(&three_point()).unwrap();
        for (p, e) in pi.probs().iter().zip([5.0 / 12.0, 1.0 / 6.0, 5.0 / 12.0]) {
            assert!((p - e).abs() < 1e-15);
        }
        for (i, p) in pi.probs().iter().enumerate() {
            assert!((3.0 * p * w.at(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_basis_is_uniform() {
        let f = random_factorization(50, 0, 3);
        let (pi, w) = method1_distribution(&f).unwrap();
        for &p in pi.probs() {
            assert!((p - 1.0 / 50.0).abs() < 1e-15);
        }
        let mean_inv: f64 = w.values().iter().map(|v| 1.0 / v).sum::<f64>() / 50.0;
        assert!((mean_inv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distributions_sum_to_one() {
        let f = random_factorization(800, 6, 5);
        let (pi, w) = method1_distribution(&f).unwrap();
        let raw = row_mass(&f, f.n());
        let total: f64 = raw.iter().sum::<f64>() / f.n() as f64;
        assert!((total - 1.0).abs() < 1e-12);
        assert!((pi.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean_inv: f64 = w.values().iter().map(|v| 1.0 / v).sum::<f64>() / 800.0;
        assert!((mean_inv - 1.0).abs() < 1e-12);
        for l in 0..f.n() {
            let s: f64 = f.q_col(l).iter().map(|q| q * q).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_always_drawn() {
        let mut w = vec![0.0; 10];
        w[7] = 1.0;
        let dist = Categorical::from_weights(w).unwrap();
        let plan = draw_method1(&dist, 1, 500, &mut RngStream::new(0, 0)).unwrap();
        assert!(plan.indices.iter().all(|&i| i == 7));
    }

    #[test]
    fn zero_mass_never_drawn() {
        let dist = Categorical::from_weights(vec![0.0, 1.0, 0.0, 0.0, 2.0, 0.0]).unwrap();
        let mut rng = RngStream::new(9, 1);
        for _ in 0..20_000 {
            let i = dist.sample(&mut rng);
            assert!(i == 1 || i == 4);
        }
    }

    #[test]
    fn uniform_frequencies() {
        let k = 20;
        let m = 100_000;
        let dist = Categorical::from_weights(vec![1.0; k]).unwrap();
        let plan = draw_method1(&dist, 1, m, &mut RngStream::new(12, 0)).unwrap();
        let mut counts = vec![0usize; k];
        for &i in &plan.indices {
            counts[i] += 1;
        }
        let p = 1.0 / k as f64;
        let se = (p * (1.0 - p) / m as f64).sqrt();
        for c in counts {
            assert!((c as f64 / m as f64 - p).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn draws_are_reproducible_and_flag_undersampling() {
        let (pi, _) = method1_distribution(&three_point()).unwrap();
        let a = draw_method1(&pi, 2, 30, &mut RngStream::new(5, 2)).unwrap();
        let b = draw_method1(&pi, 2, 30, &mut RngStream::new(5, 2)).unwrap();
        assert_eq!(a.indices, b.indices);
        assert!(!a.undersampled);
        assert!(draw_method1(&pi, 2, 1, &mut RngStream::new(5, 2)).unwrap().undersampled);
        assert!(draw_method1(&pi, 2, 0, &mut RngStream::new(5, 2)).is_err());
    }

    #[test]
    fn stage_arithmetic() {
        let f = random_factorization(300, 2, 7);
        assert!(f.n() >= 3);
        let mut rng = RngStream::new(1, 0);

        let mut plan = Method2Plan::new();
        method2_advance(&mut plan, &f, 2, 3, &mut rng).unwrap();
        assert_eq!(plan.draws().len(), 6);
        assert_eq!((plan.count_for(0), plan.count_for(1)), (3, 3));

        let mut same_k = plan.clone();
        method2_advance(&mut same_k, &f, 3, 3, &mut rng).unwrap();
        let fresh: Vec<_> = same_k.draws()[6..].to_vec();
        assert_eq!(fresh.len(), 3);
        assert!(fresh.iter().all(|d| d.l == 2 && d.stage == 2));
        assert_eq!(&same_k.draws()[..6], plan.draws());

        let mut more_k = plan.clone();
        method2_advance(&mut more_k, &f, 3, 4, &mut rng).unwrap();
        assert_eq!(more_k.draws().len() - 6, 6);
        assert_eq!((more_k.count_for(0), more_k.count_for(1), more_k.count_for(2)), (4, 4, 4));
        assert_eq!(more_k.current().unwrap().m, 12);

        assert!(method2_advance(&mut more_k, &f, 3, 2, &mut rng).is_err());
    }

    #[test]
    fn mixture_matches_method1() {
        let f = random_factorization(500, 5, 11);
        let mut rng = RngStream::new(2, 0);
        let mut plan = Method2Plan::new();
        for (n, k) in [(1usize, 1usize), (4, 2), (f.n(), 3)] {
            method2_advance(&mut plan, &f, n, k, &mut rng).unwrap();
            assert!(mixture_check(&plan, &f).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn ledger_csv() {
        let f = three_point();
        let mut plan = Method2Plan::new();
        method2_advance(&mut plan, &f, 1, 2, &mut RngStream::new(0, 0)).unwrap();
        let mut buf = Vec::new();
        plan.write_ledger(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("stage,l,grid_index"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn sample_size_rules() {
        assert_eq!(m_target(1), 1);
        assert_eq!(m_target(2), 2);
        assert_eq!(m_target(3), 4);
        assert_eq!(m_target(10), 24);
        assert_eq!(default_k(0, 10, 24), 3);
        assert_eq!(default_k(5, 10, 24), 5);
    }
}
