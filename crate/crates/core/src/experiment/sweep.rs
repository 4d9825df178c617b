//! Seeded sweeps over nested spaces.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MRule, ResolvedConfig};
use crate::diagnostics::{
    constant_c_from_sigma, error_off_grid, estimate_d, relative_error, sample_function, theory_thresholds, EvalGrid,
};
use crate::error::{Error, Result};
use crate::functions::builtin_function;
use crate::legendre::TensorLegendreBasis;
use crate::measure::{factor_schedule, OrthoFactorization};
use crate::rng::RngStream;
use crate::sampler::{default_k, draw_method1, method1_distribution, method2_advance, Categorical, Method2Plan};
use crate::solver::{
    assemble_method1, assemble_method2, assemble_uniform, evaluate_on_grid, solve, Approximant, LsSystem, Method,
    SampleCache, Solution,
};

const GRID_STREAM: u64 = 0;
const EVAL_STREAM: u64 = 1;

/// Stream id for one (rule, method, trial) triple, disjoint from the grid streams.
pub fn trial_stream(rule: usize, method: Method, trial: usize) -> u64 {
    let code = match method {
        Method::Method1 => 0,
        Method::Method2 => 1,
        Method::Uniform => 2,
    };
    2 + (((rule as u64) * 4 + code) << 32) + trial as u64
}

/// One CSV line of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub m_rule: String,
    pub d: usize,
    pub domain: String,
    pub function: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Trial number, or `mean` for aggregate rows.
    pub trial: String,
    pub seed: u64,
    #[serde(rename = "E_tau")]
    pub e_tau: Option<f64>,
    #[serde(rename = "E_tau_tilde")]
    pub e_tau_tilde: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub kappa: Option<f64>,
    pub wall_ms: Option<f64>,
    pub status: String,
}

impl ResultRow {
    pub fn is_mean(&self) -> bool {
        self.trial == "mean"
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per-stage facts that do not depend on the trial.
#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub order: u32,
    pub n: usize,
    pub usable: bool,
    pub sigma_min_b: Option<f64>,
    pub sigma_max_b: Option<f64>,
    pub d_hat: Option<f64>,
    pub theory: BTreeMap<String, u64>,
}

/// Everything a sweep produces besides the CSV rows.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub config: ExperimentConfig,
    pub grid_size: usize,
    pub grid_retries: usize,
    pub stages: Vec<StageSummary>,
    /// Distinct f evaluations used for fitting, per (rule, method, trial).
    pub fit_evaluations: Vec<EvaluationCount>,
    /// Method 2 ledgers: fresh draws per stage and (rule, trial).
    pub method2_fresh_draws: Vec<FreshDraws>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationCount {
    pub m_rule: String,
    pub method: Method,
    pub trial: usize,
    pub evaluations: usize,
    pub distinct_indices: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FreshDraws {
    pub m_rule: String,
    pub trial: usize,
    pub stage: usize,
    pub n: usize,
    pub m: usize,
    pub fresh: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub summary: SweepSummary,
}

impl SweepOutput {
    pub fn trial_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| !r.is_mean())
    }

    pub fn mean_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.is_mean())
    }

    /// The mean row for a method, rule and N.
    pub fn mean(&self, method: Method, rule: &str, n: usize) -> Option<&ResultRow> {
        self.mean_rows()
            .find(|r| r.method == method.tag() && r.m_rule == rule && r.n == n)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

struct TrialState<'a> {
    rule: MRule,
    method: Method,
    trial: usize,
    rng: RngStream,
    plan: Method2Plan,
    cache: SampleCache<'a>,
    drawn: std::collections::BTreeSet<usize>,
}

struct FitOutcome {
    m: usize,
    solution: std::result::Result<Solution, Error>,
}

fn fit_stage(
    state: &mut TrialState<'_>,
    f: &OrthoFactorization,
    pi: &Categorical,
    stage: usize,
    n: usize,
    ledger: &mut Vec<FreshDraws>,
) -> Result<FitOutcome> {
    let m_req = state.rule.samples(stage, n)?;
    let (indices, system): (Vec<usize>, std::result::Result<LsSystem, Error>) = match state.method {
        Method::Method1 => {
            let plan = draw_method1(pi, n, m_req, &mut state.rng)?;
            let fv = state.cache.values_at(&plan.indices)?;
            let sys = assemble_method1(f, pi.probs(), &plan.indices, &fv);
            (plan.indices, sys)
        }
        Method::Method2 => {
            let before = state.plan.draws().len();
            let k_prev = state.plan.current().map(|s| s.k).unwrap_or(0);
            let k_t = default_k(k_prev, n, m_req);
            method2_advance(&mut state.plan, f, n, k_t, &mut state.rng)?;
            let record = state.plan.current().expect("just advanced");
            ledger.push(FreshDraws {
                m_rule: state.rule.to_string(),
                trial: state.trial,
                stage: stage + 1,
                n,
                m: record.m,
                fresh: state.plan.draws().len() - before,
            });
            let indices = state.plan.indices();
            let fv = state.cache.values_at(&indices)?;
            let sys = assemble_method2(f, &state.plan, &fv);
            (indices, sys)
        }
        Method::Uniform => {
            let k = f.k();
            let indices: Vec<usize> = (0..m_req).map(|_| state.rng.gen_range(0..k)).collect();
            let fv = state.cache.values_at(&indices)?;
            let sys = assemble_uniform(f, &indices, &fv);
            (indices, sys)
        }
    };
    state.drawn.extend(indices.iter().copied());
    let m = indices.len();
    let solution = match system {
        Ok(sys) => solve(&sys),
        Err(e) => Err(e),
    };
    Ok(FitOutcome { m, solution })
}

fn status_of(err: &Error) -> &'static str {
    match err {
        Error::SolveFailure { .. } => "solve_failure",
        Error::FullRankFailure { .. } => "rank_failure",
        Error::SamplingBudget { .. } => "sampling_failure",
        _ => "error",
    }
}

/// Runs every (M rule, method, trial) through the whole schedule.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    let resolved = config.resolve()?;
    run_resolved(&resolved)
}

fn run_resolved(resolved: &ResolvedConfig) -> Result<SweepOutput> {
    let cfg = &resolved.config;
    let d = cfg.d;
    let default_order = cfg.schedule[0];
    let target = builtin_function(&resolved.function, d, default_order)?;
    let basis = TensorLegendreBasis::new(resolved.index_set.clone());

    let mut grid_rng = RngStream::new(cfg.seed, GRID_STREAM);
    let factored = factor_schedule(
        &resolved.domain,
        &basis,
        cfg.k,
        &resolved.stage_sizes,
        &mut grid_rng,
        cfg.rank_policy(),
    )?;
    let grid = &factored.grid;
    let full = &factored.factorization;
    let grid_values: Vec<f64> = grid.points().iter().map(|y| target.eval(y)).collect();
    if let Some((i, v)) = grid_values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite function value {v} at grid point {i}")));
    }

    let eval = match cfg.t {
        Some(t) => {
            let grid = EvalGrid::generate(&resolved.domain, t, &mut RngStream::new(cfg.seed, EVAL_STREAM))?;
            let values = sample_function(&grid, target.as_fn())?;
            Some((grid, values))
        }
        None => None,
    };

    let func = target.as_fn();
    let mut states: Vec<TrialState<'_>> = Vec::new();
    for (rule_index, rule) in cfg.m_rules.iter().enumerate() {
        for &method in &cfg.methods {
            for trial in 0..cfg.trials {
                states.push(TrialState {
                    rule: rule.clone(),
                    method,
                    trial,
                    rng: RngStream::new(cfg.seed, trial_stream(rule_index, method, trial)),
                    plan: Method2Plan::new(),
                    cache: SampleCache::new(grid, func),
                    drawn: Default::default(),
                });
            }
        }
    }

    let mut rows = Vec::new();
    let mut stages = Vec::new();
    let mut ledger = Vec::new();
    let domain_name = resolved.domain.name().to_string();
    let function_name = target.name().to_string();
    let base_row = |state: &TrialState<'_>, n: usize| ResultRow {
        method: state.method.tag().to_string(),
        m_rule: state.rule.to_string(),
        d,
        domain: domain_name.clone(),
        function: function_name.clone(),
        k: grid.len(),
        n,
        m: 0,
        trial: state.trial.to_string(),
        seed: cfg.seed,
        e_tau: None,
        e_tau_tilde: None,
        c: None,
        kappa: None,
        wall_ms: None,
        status: String::new(),
    };

    for (stage, &n) in resolved.stage_sizes.iter().enumerate() {
        let theory = theory_thresholds(n, cfg.gamma, cfg.delta, None)?;
        if stage >= factored.usable_stages {
            stages.push(StageSummary {
                stage: stage + 1,
                order: cfg.schedule[stage],
                n,
                usable: false,
                sigma_min_b: None,
                sigma_max_b: None,
                d_hat: None,
                theory,
            });
            for state in &states {
                let mut row = base_row(state, n);
                row.status = "rank_failure".into();
                rows.push(row);
            }
            continue;
        }
        let prefix;
        let f = if n == full.n() {
            full
        } else {
            prefix = full.prefix(n)?;
            &prefix
        };
        let stage_basis = basis.truncated(n);
        let (pi, _) = method1_distribution(f)?;
        let (smin, smax) = f.singular_range();
        let d_hat = match (&eval, cfg.estimate_d) {
            (Some((grid, _)), true) if grid.len() >= n => Some(estimate_d(f, &stage_basis, grid)?),
            _ => None,
        };
        stages.push(StageSummary {
            stage: stage + 1,
            order: cfg.schedule[stage],
            n,
            usable: true,
            sigma_min_b: Some(smin),
            sigma_max_b: Some(smax),
            d_hat,
            theory,
        });

        for state in states.iter_mut() {
            let start = Instant::now();
            let outcome = fit_stage(state, f, &pi, stage, n, &mut ledger)?;
            let mut row = base_row(state, n);
            row.m = outcome.m;
            match outcome.solution {
                Ok(sol) => {
                    let approx = evaluate_on_grid(f, &sol.c)?;
                    row.e_tau = Some(relative_error(&grid_values, approx.as_slice())?);
                    if let Some((eval_grid, exact)) = &eval {
                        let a = Approximant::new(f, &stage_basis, &sol.c)?;
                        row.e_tau_tilde = Some(error_off_grid(&a, eval_grid, exact)?);
                    }
                    row.c = Some(constant_c_from_sigma(sol.sigma_min));
                    row.kappa = Some(sol.kappa);
                    row.status = "ok".into();
                }
                Err(err) => {
                    if let Error::SolveFailure { sigma_min, sigma_max, .. } = err {
                        if sigma_max.is_finite() {
                            row.c = Some(constant_c_from_sigma(sigma_min));
                            row.kappa = Some(sigma_max / sigma_min);
                        }
                    } else if !err.is_numerical() {
                        return Err(err);
                    }
                    row.status = status_of(&err).into();
                }
            }
            if cfg.timing {
                row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            rows.push(row);
        }
    }

    let fit_evaluations = states
        .iter()
        .map(|s| EvaluationCount {
            m_rule: s.rule.to_string(),
            method: s.method,
            trial: s.trial,
            evaluations: s.cache.evaluations(),
            distinct_indices: s.drawn.len(),
        })
        .collect();

    rows.sort_by(|a, b| {
        let key = |r: &ResultRow| {
            let rule = cfg.m_rules.iter().position(|m| m.to_string() == r.m_rule).unwrap_or(0);
            let method = cfg.methods.iter().position(|m| m.tag() == r.method).unwrap_or(0);
            (rule, method, r.n, r.trial.parse::<usize>().unwrap_or(usize::MAX))
        };
        key(a).cmp(&key(b))
    });
    let rows = with_means(rows);

    Ok(SweepOutput {
        rows,
        summary: SweepSummary {
            config: cfg.clone(),
            grid_size: grid.len(),
            grid_retries: factored.retries,
            stages,
            fit_evaluations,
            method2_fresh_draws: ledger,
            notes: vec![
                "E_tau is computed from f on every grid point; those evaluations are not counted as fit evaluations"
                    .into(),
            ],
        },
    })
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Appends a `mean` row after each (rule, method, N) group of trial rows.
///
/// Errors average over successful trials only; C and κ average over every
/// trial where they were recorded. `status` reads `mean:ok/total`.
pub fn with_means(rows: Vec<ResultRow>) -> Vec<ResultRow> {
    let mut out = Vec::with_capacity(rows.len() * 11 / 10 + 1);
    let mut i = 0;
    while i < rows.len() {
        let head = &rows[i];
        let mut j = i;
        while j < rows.len()
            && rows[j].method == head.method
            && rows[j].m_rule == head.m_rule
            && rows[j].n == head.n
        {
            j += 1;
        }
        let group = &rows[i..j];
        let ok: Vec<&ResultRow> = group.iter().filter(|r| r.is_ok()).collect();
        let mut mean = head.clone();
        mean.trial = "mean".into();
        mean.m = mean_of(group.iter().map(|r| r.m as f64)).map(|v| v.round() as usize).unwrap_or(0);
        mean.e_tau = mean_of(ok.iter().filter_map(|r| r.e_tau));
        mean.e_tau_tilde = mean_of(ok.iter().filter_map(|r| r.e_tau_tilde));
        mean.c = mean_of(group.iter().filter_map(|r| r.c));
        mean.kappa = mean_of(group.iter().filter_map(|r| r.kappa));
        mean.wall_ms = mean_of(group.iter().filter_map(|r| r.wall_ms));
        mean.status = format!("mean:{}/{}", ok.len(), group.len());
        out.extend(group.iter().cloned());
        out.push(mean);
        i = j;
    }
    out
}

/// Writes `results.csv` and `summary.json` into `dir`.
pub fn write_outputs(output: &SweepOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    let json_path = dir.join("summary.json");
    output.write_csv(std::fs::File::create(&csv_path)?)?;
    std::fs::write(&json_path, serde_json::to_string_pretty(&output.summary)?)?;
    Ok((csv_path, json_path))
}

/// Default M rules for conditioning sweeps: linear `2N` against `⌈N ln N⌉`.
pub fn conditioning_rules() -> Vec<MRule> {
    vec![MRule::Linear(2.0), MRule::NLogN]
}

/// A sweep focused on the constant C across several M rules.
///
/// When the config lists only the default rule, the linear/log-linear pair
/// is substituted.
pub fn run_conditioning_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    let mut cfg = config.clone();
    if cfg.m_rules == vec![MRule::NLogN] {
        cfg.m_rules = conditioning_rules();
    }
    run_sweep(&cfg)
}
