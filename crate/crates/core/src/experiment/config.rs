//! JSON experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DEFAULT_DELTA, DEFAULT_GAMMA};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::functions::{check_compatible, FunctionSpec};
use crate::measure::RankPolicy;
use crate::multiindex::{IndexSetKind, MultiIndexSet};
use crate::sampler::m_target;
use crate::solver::Method;

/// How the sample count M follows from the space dimension N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MRule {
    /// `max(N, ⌈N ln N⌉)`.
    NLogN,
    /// `⌈cN⌉`.
    Linear(f64),
    /// `max(N, ⌈cN ln N⌉)`.
    LogLinear(f64),
    /// One value per stage of the schedule.
    Explicit(Vec<usize>),
}

impl MRule {
    /// Requested M for stage `stage` with dimension `n`.
    pub fn samples(&self, stage: usize, n: usize) -> Result<usize> {
        let nf = n as f64;
        Ok(match self {
            MRule::NLogN => m_target(n),
            MRule::Linear(c) => ((c * nf).ceil() as usize).max(1),
            MRule::LogLinear(c) => n.max((c * nf * nf.ln()).ceil() as usize),
            MRule::Explicit(list) => *list.get(stage).ok_or_else(|| {
                Error::Config(format!("explicit M list has no entry for stage {}", stage + 1))
            })?,
        })
    }
}

impl fmt::Display for MRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MRule::NLogN => f.write_str("nlogn"),
            MRule::Linear(c) => write!(f, "linear:{c}"),
            MRule::LogLinear(c) => write!(f, "loglinear:{c}"),
            MRule::Explicit(list) => {
                let items: Vec<String> = list.iter().map(|m| m.to_string()).collect();
                write!(f, "explicit:{}", items.join(";"))
            }
        }
    }
}

impl FromStr for MRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "nlogn" {
            return Ok(MRule::NLogN);
        }
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("unknown M rule '{s}'")))?;
        let number = |v: &str| -> Result<f64> {
            let c: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid multiplier in M rule '{s}'")))?;
            if c > 0.0 && c.is_finite() {
                Ok(c)
            } else {
                Err(Error::Config(format!("M rule multiplier must be positive in '{s}'")))
            }
        };
        match kind.trim() {
            "linear" => Ok(MRule::Linear(number(arg)?)),
            "loglinear" => Ok(MRule::LogLinear(number(arg)?)),
            "explicit" => {
                let list = arg
                    .split([';', ','])
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .ok()
                            .filter(|&m| m > 0)
                            .ok_or_else(|| Error::Config(format!("invalid sample count '{v}' in '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MRule::Explicit(list))
            }
            other => Err(Error::Config(format!("unknown M rule kind '{other}'"))),
        }
    }
}

impl TryFrom<String> for MRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MRule> for String {
    fn from(rule: MRule) -> String {
        rule.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RankPolicyKind {
    #[default]
    Regenerate,
    Grow,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Method1, Method::Method2, Method::Uniform]
}
fn default_index_set() -> String {
    "hc".into()
}
fn default_m_rules() -> Vec<MRule> {
    vec![MRule::NLogN]
}
fn default_trials() -> usize {
    10
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// A sweep over a schedule of nested spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Domain spec, e.g. `"omega1"` or `"annulus:rmin=0.25,rmax=1"`.
    pub domain: String,
    pub d: usize,
    /// `"f1"`…`"f4"` or `"inspace:seed=S[,n=ORDER]"`.
    pub function: String,
    #[serde(default = "default_index_set")]
    pub index_set: String,
    /// Increasing list of index-set orders n.
    pub schedule: Vec<u32>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Grid size.
    pub k: usize,
    /// Size of the independent evaluation grid (off-grid error); omitted to skip.
    #[serde(default)]
    pub t: Option<usize>,
    #[serde(default = "default_m_rules")]
    pub m_rules: Vec<MRule>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub rank_policy: RankPolicyKind,
    /// Also estimate D̂ on the evaluation grid at every stage.
    #[serde(default)]
    pub estimate_d: bool,
    /// Fill the wall_ms column (makes output depend on machine speed).
    #[serde(default)]
    pub timing: bool,
}

/// A config with every string field parsed.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub domain: Domain,
    pub function: FunctionSpec,
    pub kind: IndexSetKind,
    /// Index set of the largest stage; stage t uses its first `stage_sizes[t]` entries.
    pub index_set: MultiIndexSet,
    pub stage_sizes: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn rank_policy(&self) -> RankPolicy {
        match self.rank_policy {
            RankPolicyKind::Regenerate => RankPolicy::Regenerate { retries: 3 },
            RankPolicyKind::Grow => RankPolicy::Grow {
                growth: 0.5,
                retries: 3,
            },
        }
    }

    /// Checks the invariants and parses the embedded specs.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if self.schedule.is_empty() {
            return Err(Error::Config("schedule must not be empty".into()));
        }
        if self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("schedule must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() || self.m_rules.is_empty() {
            return Err(Error::Config("at least one method and one M rule are required".into()));
        }
        for (name, v) in [("delta", self.delta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if let Some(t) = self.t {
            if t == 0 {
                return Err(Error::Config("t must be at least 1 when given".into()));
            }
        }
        let domain = Domain::parse(&self.domain, self.d)?;
        let function: FunctionSpec = self.function.parse()?;
        check_compatible(&function, &domain)?;
        let kind: IndexSetKind = self.index_set.parse()?;
        let last = *self.schedule.last().expect("nonempty");
        let index_set = MultiIndexSet::build(kind, self.d, last);
        let stage_sizes: Vec<usize> = self
            .schedule
            .iter()
            .map(|&n| MultiIndexSet::build(kind, self.d, n).len())
            .collect();
        if stage_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "schedule orders must give strictly increasing space dimensions".into(),
            ));
        }
        let n_max = *stage_sizes.last().expect("nonempty");
        if self.k < n_max {
            return Err(Error::Config(format!("K = {} is smaller than the largest N = {n_max}", self.k)));
        }
        for rule in &self.m_rules {
            if let MRule::Explicit(list) = rule {
                if list.len() != self.schedule.len() {
                    return Err(Error::Config(format!(
                        "explicit M list has {} entries for {} stages",
                        list.len(),
                        self.schedule.len()
                    )));
                }
            }
        }
        Ok(ResolvedConfig {
            config: self.clone(),
            domain,
            function,
            kind,
            index_set,
            stage_sizes,
        })
    }
}
