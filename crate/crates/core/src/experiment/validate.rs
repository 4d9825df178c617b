//! Self-check suites with machine-readable reports.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, MRule};
use super::sweep::run_sweep;
use crate::diagnostics::{bound_m_two_sided, constant_c_from_sigma};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::legendre::TensorLegendreBasis;
use crate::measure::{assemble_and_factor, eval_phi, generate_grid, KGrid, OrthoFactorization};
use crate::multiindex::{IndexSetKind, MultiIndex, MultiIndexSet};
use crate::rng::RngStream;
use crate::sampler::{default_k, draw_method1, m_target, method1_distribution, method2_advance, mixture_check, Method2Plan};
use crate::solver::{assemble_method1, solve, LsSystem, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Orthonormality,
    Distributions,
    Recovery,
    Chernoff,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Orthonormality,
        Suite::Distributions,
        Suite::Recovery,
        Suite::Chernoff,
        Suite::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Orthonormality => "orthonormality",
            Suite::Distributions => "distributions",
            Suite::Recovery => "recovery",
            Suite::Chernoff => "chernoff",
            Suite::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown validation suite '{s}'")))
    }
}

/// One measured quantity against its threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `measured ≤ threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }

    /// Passes when `measured ≥ threshold`.
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: measured >= threshold,
            measured,
            threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        ValidationReport {
            suite,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn validate(suite: Suite, seed: u64) -> Result<ValidationReport> {
    let checks = match suite {
        Suite::Orthonormality => orthonormality(seed)?,
        Suite::Distributions => distributions(seed)?,
        Suite::Recovery => recovery(seed)?,
        Suite::Chernoff => chernoff(seed)?,
        Suite::Oracle => oracle(seed)?,
    };
    Ok(ValidationReport::new(suite, checks))
}

/// A random small configuration for the structural suites.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub label: String,
    pub domain: Domain,
    pub basis: TensorLegendreBasis,
    pub k: usize,
    pub grid_seed: u64,
}

/// `count` configurations with d ≤ 4, N ≤ 300, K ≤ 5000 over the three
/// irregular domains and the cube. The first case is the largest space on Ω₁.
pub fn random_cases(count: usize, seed: u64) -> Result<Vec<RandomCase>> {
    let mut rng = RngStream::new(seed, 0x5eed);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let (name, d) = match i % 4 {
            0 => ("omega1", rng.gen_range(2..=4)),
            1 => ("omega2", rng.gen_range(1..=4)),
            2 => ("omega3", rng.gen_range(2..=4)),
            _ => ("cube", rng.gen_range(1..=4)),
        };
        let (d, target) = if i == 0 { (2, 300) } else { (d, rng.gen_range(1..=300)) };
        let kind = if i == 0 || rng.gen_bool(0.5) {
            IndexSetKind::HyperbolicCross
        } else {
            IndexSetKind::TotalDegree
        };
        let mut order = 0;
        while MultiIndexSet::build(kind, d, order + 1).len() <= target {
            order += 1;
        }
        let set = MultiIndexSet::build(kind, d, order);
        let n = set.len();
        let k = if i == 0 { 5000 } else { rng.gen_range((2 * n).max(500)..=5000) };
        let domain = Domain::parse(name, d)?;
        cases.push(RandomCase {
            label: format!("{name} d={d} {}({order}) N={n} K={k}", kind.tag()),
            domain,
            basis: TensorLegendreBasis::new(set),
            k,
            grid_seed: seed.wrapping_add(i as u64),
        });
    }
    Ok(cases)
}

fn factor_case(case: &RandomCase) -> Result<(KGrid, OrthoFactorization)> {
    let grid = generate_grid(&case.domain, case.k, &mut RngStream::new(case.grid_seed, 0))?;
    let f = assemble_and_factor(&grid, &case.basis)?;
    Ok((grid, f))
}

fn orthonormality(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for case in random_cases(20, seed)? {
        let (grid, f) = factor_case(&case)?;
        let n = f.n();
        let k = grid.len();
        let gram = f.q().transpose() * f.q();
        let defect = (gram - DMatrix::<f64>::identity(n, n)).amax();
        checks.push(Check::at_most(format!("{}: max |QᵀQ − I|", case.label), defect, 1e-10));

        let mut phi = DMatrix::<f64>::zeros(k, n);
        for i in 0..k {
            let row = eval_phi(&f, &case.basis, grid.point(i))?;
            phi.row_mut(i).copy_from_slice(&row);
        }
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        if n <= 50 {
            for a in 0..n {
                for b in a..n {
                    pairs.push((a, b));
                }
            }
        } else {
            let mut rng = RngStream::new(case.grid_seed, 1);
            pairs.extend((0..n).map(|a| (a, a)));
            pairs.extend((0..400).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))));
        }
        let worst = pairs
            .iter()
            .map(|&(a, b)| {
                let inner = phi.column(a).dot(&phi.column(b)) / k as f64;
                (inner - if a == b { 1.0 } else { 0.0 }).abs()
            })
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("{}: max |(1/K)Σφ_iφ_j − δ_ij|", case.label), worst, 1e-10));
    }
    Ok(checks)
}

fn distributions(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for case in random_cases(20, seed)? {
        let (_, f) = factor_case(&case)?;
        let k = f.k();
        let n = f.n();
        let (pi, w) = method1_distribution(&f)?;
        let raw: f64 = crate::sampler::row_mass(&f, n).iter().sum::<f64>() / n as f64;
        checks.push(Check::at_most(format!("{}: |Σπ_i − 1|", case.label), (raw - 1.0).abs(), 1e-12));
        let per_l = (0..n)
            .map(|l| (f.q_col(l).iter().map(|q| q * q).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("{}: max_l |Σπ^(l)_i − 1|", case.label), per_l, 1e-12));
        let christoffel = pi
            .probs()
            .iter()
            .zip(w.values())
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, wv)| (k as f64 * p * wv - 1.0).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("{}: max |Kπ_i w(z_i) − 1|", case.label), christoffel, 1e-12));

        let mut plan = Method2Plan::new();
        let mut rng = RngStream::new(case.grid_seed, 2);
        let mut worst: f64 = 0.0;
        let mut k_prev = 0;
        for n_t in [n.div_ceil(3), (2 * n).div_ceil(3), n] {
            if plan.current().is_some_and(|s| s.n >= n_t) {
                continue;
            }
            let k_t = default_k(k_prev, n_t, m_target(n_t));
            method2_advance(&mut plan, &f, n_t, k_t, &mut rng)?;
            k_prev = k_t;
            worst = worst.max(mixture_check(&plan, &f)?);
        }
        checks.push(Check::at_most(format!("{}: mixture deviation", case.label), worst, 1e-12));
    }
    Ok(checks)
}

fn recovery(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = RngStream::new(seed, 0x7ec0);
    let domains = ["omega1", "omega2", "omega3", "cube"];
    for run in 0..20u64 {
        let name = domains[run as usize % 4];
        let d = if run % 2 == 0 { 2 } else { 3 };
        let target = if run == 0 { 200 } else { rng.gen_range(10..=200) };
        let mut order = 0;
        while MultiIndexSet::build(IndexSetKind::HyperbolicCross, d, order + 1).len() <= target {
            order += 1;
        }
        let schedule: Vec<u32> = {
            let mut s: Vec<u32> = vec![order / 3, (2 * order) / 3, order];
            s.dedup();
            s
        };
        let cfg = ExperimentConfig {
            domain: name.into(),
            d,
            function: format!("inspace:seed={},n={order}", seed.wrapping_add(run)),
            index_set: "hc".into(),
            schedule,
            methods: vec![Method::Method1, Method::Method2],
            k: 5000,
            t: Some(2000),
            m_rules: vec![MRule::NLogN],
            trials: 1,
            seed: seed.wrapping_add(1000 + run),
            delta: 0.5,
            gamma: 0.01,
            output: "unused".into(),
            rank_policy: Default::default(),
            estimate_d: false,
            timing: false,
        };
        let out = run_sweep(&cfg)?;
        let n_final = MultiIndexSet::build(IndexSetKind::HyperbolicCross, d, order).len();
        for row in out.trial_rows().filter(|r| r.n == n_final) {
            let label = format!("run {run} {name} d={d} N={n_final} {}", row.method);
            let e = row.e_tau.unwrap_or(f64::INFINITY);
            let et = row.e_tau_tilde.unwrap_or(f64::INFINITY);
            checks.push(Check::at_most(format!("{label}: E_tau"), e, 1e-8));
            checks.push(Check::at_most(format!("{label}: E_tau_tilde"), et, 1e-8));
        }
    }
    Ok(checks)
}

/// Chernoff experiment parameters: N = 10 on the square, K = 2000, δ = 0.5, γ = 0.1.
pub struct ChernoffOutcome {
    pub trials: usize,
    pub successes: usize,
    pub m: usize,
}

pub fn chernoff_experiment(seed: u64, trials: usize) -> Result<ChernoffOutcome> {
    let (delta, gamma) = (0.5, 0.1);
    let basis = TensorLegendreBasis::new(MultiIndexSet::build(IndexSetKind::HyperbolicCross, 2, 4));
    let n = basis.len();
    let m = bound_m_two_sided(n, gamma, delta)? as usize;
    let domain = Domain::cube(2)?;
    let kappa_max = ((1.0 + delta) / (1.0 - delta)).sqrt();
    let c_max = 1.0 / (1.0 - delta).sqrt();
    let mut successes = 0;
    for trial in 0..trials as u64 {
        let grid = generate_grid(&domain, 2000, &mut RngStream::new(seed, 2 * trial))?;
        let f = assemble_and_factor(&grid, &basis)?;
        let (pi, _) = method1_distribution(&f)?;
        let plan = draw_method1(&pi, n, m, &mut RngStream::new(seed, 2 * trial + 1))?;
        let fv = vec![1.0; m];
        let sys = assemble_method1(&f, pi.probs(), &plan.indices, &fv)?;
        if let Ok(sol) = solve(&sys) {
            if sol.kappa <= kappa_max && constant_c_from_sigma(sol.sigma_min) <= c_max {
                successes += 1;
            }
        }
    }
    Ok(ChernoffOutcome { trials, successes, m })
}

fn chernoff(seed: u64) -> Result<Vec<Check>> {
    let out = chernoff_experiment(seed, 200)?;
    Ok(vec![
        Check::at_least(
            format!("N=10, K=2000, M={}: fraction with κ ≤ √3 and C ≤ √2", out.m),
            out.successes as f64 / out.trials as f64,
            0.9,
        ),
    ])
}

fn normal_equations(sys: &LsSystem) -> Option<DVector<f64>> {
    let ata = sys.a.transpose() * &sys.a;
    let atb = sys.a.transpose() * &sys.b;
    ata.cholesky().map(|c| c.solve(&atb))
}

/// Every multi-index of `[0, n]^d` admitted by the kind's defining inequality.
pub fn brute_force_index_set(kind: IndexSetKind, d: usize, n: u32) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    let side = n as usize + 1;
    for mut code in 0..side.pow(d as u32) {
        let mut idx = vec![0u32; d];
        for slot in idx.iter_mut() {
            *slot = (code % side) as u32;
            code /= side;
        }
        let keep = match kind {
            IndexSetKind::HyperbolicCross => idx.iter().map(|&v| v as u64 + 1).product::<u64>() <= n as u64 + 1,
            IndexSetKind::TotalDegree => idx.iter().map(|&v| v as u64).sum::<u64>() <= n as u64,
            IndexSetKind::Tensor => idx.iter().all(|&v| v <= n),
        };
        if keep {
            out.insert(idx);
        }
    }
    out
}

fn oracle(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = RngStream::new(seed, 0x07ac);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=20);
        let m = rng.gen_range(n..=100);
        let a = DMatrix::from_fn(m, n, |_, _| rng.uniform_symmetric());
        let b = DVector::from_fn(m, |_, _| rng.uniform_symmetric());
        let sys = LsSystem { a, b };
        if let (Ok(sol), Some(reference)) = (solve(&sys), normal_equations(&sys)) {
            worst = worst.max((&sol.c - reference).amax());
        } else {
            worst = f64::INFINITY;
        }
    }
    checks.push(Check::at_most("random systems N ≤ 20, M ≤ 100: max |c − c_normal|", worst, 1e-8));

    let domain = Domain::parse("omega1", 2)?;
    let mut worst: f64 = 0.0;
    for order in 1..=5u32 {
        let basis = TensorLegendreBasis::new(MultiIndexSet::build(IndexSetKind::HyperbolicCross, 2, order));
        let grid = generate_grid(&domain, 400, &mut RngStream::new(seed, order as u64))?;
        let f = assemble_and_factor(&grid, &basis)?;
        let (pi, _) = method1_distribution(&f)?;
        let m = (5 * f.n()).min(100);
        let plan = draw_method1(&pi, f.n(), m, &mut RngStream::new(seed, 100 + order as u64))?;
        let fv: Vec<f64> = plan.indices.iter().map(|&i| crate::functions::f1(grid.point(i))).collect();
        let sys = assemble_method1(&f, pi.probs(), &plan.indices, &fv)?;
        let sol = solve(&sys)?;
        let reference = normal_equations(&sys).ok_or_else(|| Error::Invariant("Gram matrix not positive definite".into()))?;
        worst = worst.max((&sol.c - reference).amax());
    }
    checks.push(Check::at_most("Method 1 systems on Ω₁: max |c − c_normal|", worst, 1e-8));

    let mut mismatches = 0usize;
    let mut cases = 0usize;
    for kind in [IndexSetKind::HyperbolicCross, IndexSetKind::TotalDegree, IndexSetKind::Tensor] {
        for d in 1..=3 {
            let mut previous: Option<MultiIndexSet> = None;
            for n in 0..=10u32 {
                cases += 1;
                let built = MultiIndexSet::build(kind, d, n);
                let as_set: BTreeSet<Vec<u32>> = built.iter().map(|m: &MultiIndex| m.entries().to_vec()).collect();
                let distinct = as_set.len() == built.len();
                let nested = previous.as_ref().is_none_or(|p| p.is_prefix_of(&built));
                if as_set != brute_force_index_set(kind, d, n) || !distinct || !nested {
                    mismatches += 1;
                }
                previous = Some(built);
            }
        }
    }
    checks.push(Check::at_most(
        format!("index sets vs brute force ({cases} cases, d ≤ 3, n ≤ 10): mismatches"),
        mismatches as f64,
        0.0,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn brute_force_sizes() {
        assert_eq!(brute_force_index_set(IndexSetKind::TotalDegree, 2, 3).len(), 10);
        assert_eq!(brute_force_index_set(IndexSetKind::HyperbolicCross, 2, 3).len(), 8);
        assert_eq!(brute_force_index_set(IndexSetKind::Tensor, 3, 1).len(), 8);
    }

    #[test]
    fn random_cases_respect_limits() {
        for case in random_cases(20, 7).unwrap() {
            assert!(case.basis.len() <= 300);
            assert!(case.k <= 5000 && case.k >= case.basis.len());
            assert!(case.domain.dim() <= 4);
        }
    }

    #[test]
    fn oracle_suite_passes() {
        let report = validate(Suite::Oracle, 1).unwrap();
        assert!(report.passed, "{:?}", report.failures().collect::<Vec<_>>());
    }
}
