//! Benchmark target functions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::legendre::TensorLegendreBasis;
use crate::multiindex::hyperbolic_cross;
use crate::rng::RngStream;

/// Catalog entry as written in configs.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    F1,
    F2,
    F3,
    F4,
    /// Random element of the hyperbolic-cross space of the given order
    /// (`None` means the smallest order of the run).
    InSpace { seed: u64, order: Option<u32> },
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::F1 => f.write_str("f1"),
            FunctionSpec::F2 => f.write_str("f2"),
            FunctionSpec::F3 => f.write_str("f3"),
            FunctionSpec::F4 => f.write_str("f4"),
            FunctionSpec::InSpace { seed, order: None } => write!(f, "inspace:seed={seed}"),
            FunctionSpec::InSpace { seed, order: Some(n) } => write!(f, "inspace:seed={seed},n={n}"),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "f1" => return Ok(FunctionSpec::F1),
            "f2" => return Ok(FunctionSpec::F2),
            "f3" => return Ok(FunctionSpec::F3),
            "f4" => return Ok(FunctionSpec::F4),
            _ => {}
        }
        let rest = s
            .strip_prefix("inspace:")
            .or_else(|| s.strip_prefix("in_space:"))
            .ok_or_else(|| Error::Config(format!("unknown function '{s}'")))?;
        let mut seed = None;
        let mut order = None;
        for part in rest.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed function parameter '{part}'")))?;
            let bad = |_| Error::Config(format!("invalid value for '{key}' in '{s}'"));
            match key.trim() {
                "seed" => seed = Some(value.trim().parse::<u64>().map_err(bad)?),
                "n" => order = Some(value.trim().parse::<u32>().map_err(bad)?),
                other => return Err(Error::Config(format!("unknown function parameter '{other}'"))),
            }
        }
        let seed = seed.ok_or_else(|| Error::Config(format!("'{s}' needs a seed")))?;
        Ok(FunctionSpec::InSpace { seed, order })
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named function of d variables.
#[derive(Clone)]
pub struct TargetFunction {
    name: String,
    dim: usize,
    eval: Evaluator,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl TargetFunction {
    pub fn new(name: impl Into<String>, dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TargetFunction {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    pub fn as_fn(&self) -> &(dyn Fn(&[f64]) -> f64 + Sync) {
        &*self.eval
    }
}

/// `exp(−Σ y_i / d)`.
pub fn f1(y: &[f64]) -> f64 {
    (-y.iter().sum::<f64>() / y.len() as f64).exp()
}

/// `1/Σ √|y_i|`; singular at the origin.
pub fn f2(y: &[f64]) -> f64 {
    1.0 / y.iter().map(|v| v.abs().sqrt()).sum::<f64>()
}

/// Genz product peak `Π (d/4)/((d/4) + (y_i + (−1)^{i+1}/(i+1))²)`.
pub fn f3(y: &[f64]) -> f64 {
    let a = y.len() as f64 / 4.0;
    y.iter()
        .enumerate()
        .map(|(k, &v)| {
            let i = (k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let shift = v + sign / (i + 1.0);
            a / (a + shift * shift)
        })
        .product()
}

/// `1/(y₁² + y₂²)`; singular on the axis `y₁ = y₂ = 0`.
pub fn f4(y: &[f64]) -> f64 {
    1.0 / (y[0] * y[0] + y[1] * y[1])
}

/// Builds a catalog function for dimension `d`. `order` fixes the space for
/// in-space targets whose spec leaves it open.
pub fn builtin_function(spec: &FunctionSpec, d: usize, default_order: u32) -> Result<TargetFunction> {
    if d == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let name = spec.to_string();
    Ok(match spec {
        FunctionSpec::F1 => TargetFunction::new(name, d, f1),
        FunctionSpec::F2 => TargetFunction::new(name, d, f2),
        FunctionSpec::F3 => TargetFunction::new(name, d, f3),
        FunctionSpec::F4 => {
            if d < 2 {
                return Err(Error::Config("f4 needs d ≥ 2".into()));
            }
            TargetFunction::new(name, d, f4)
        }
        FunctionSpec::InSpace { seed, order } => {
            let basis = TensorLegendreBasis::new(hyperbolic_cross(d, order.unwrap_or(default_order)));
            let mut rng = RngStream::new(*seed, 0);
            let coefficients: Vec<f64> = (0..basis.len()).map(|_| rng.uniform_symmetric()).collect();
            TargetFunction::new(name, d, move |y: &[f64]| {
                let row = basis.eval_row(y).expect("dimension checked by caller");
                row.iter().zip(&coefficients).map(|(p, c)| p * c).sum()
            })
        }
    })
}

/// Rejects pairings where the function is singular inside the domain.
///
/// f2 blows up at the origin and f4 along `y₁ = y₂ = 0`; both are tested by
/// probing points of that set against the domain indicator.
pub fn check_compatible(spec: &FunctionSpec, domain: &Domain) -> Result<()> {
    let d = domain.dim();
    let singular = match spec {
        FunctionSpec::F2 => domain.contains(&vec![0.0; d]),
        FunctionSpec::F4 => {
            if d < 2 {
                return Err(Error::Config("f4 needs d ≥ 2".into()));
            }
            axis_probe(d).iter().any(|y| domain.contains(y))
        }
        _ => false,
    };
    if singular {
        Err(Error::Config(format!(
            "function {spec} is singular inside domain {}",
            domain.name()
        )))
    } else {
        Ok(())
    }
}

fn axis_probe(d: usize) -> Vec<Vec<f64>> {
    const BUDGET: usize = 100_000;
    if d == 2 {
        return vec![vec![0.0, 0.0]];
    }
    // points (0, 0, t_3, …, t_d): a lattice when small enough, seeded random points otherwise
    let free = d - 2;
    let per_axis = ((BUDGET as f64).powf(1.0 / free as f64).floor() as usize).clamp(1, 41);
    if per_axis < 3 {
        let mut rng = RngStream::new(0, 0);
        return (0..BUDGET)
            .map(|_| {
                let mut y = vec![0.0; d];
                y.iter_mut().skip(2).for_each(|v| *v = rng.uniform_symmetric());
                y
            })
            .collect();
    }
    let total = per_axis.pow(free as u32);
    (0..total)
        .map(|mut code| {
            let mut y = vec![0.0; d];
            for slot in y.iter_mut().skip(2) {
                let step = code % per_axis;
                code /= per_axis;
                *slot = -1.0 + 2.0 * step as f64 / (per_axis - 1) as f64;
            }
            y
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        for d in 1..5 {
            assert_eq!(f1(&vec![0.0; d]), 1.0);
        }
        assert_eq!(f4(&[1.0, 0.0, 0.3]), 1.0);
        assert!((f3(&[0.0, 0.0]) - 6.0 / 11.0).abs() < 1e-15);
        assert!((f2(&[0.25, 0.25]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("f3".parse::<FunctionSpec>().unwrap(), FunctionSpec::F3);
        assert_eq!(
            "inspace:seed=4,n=3".parse::<FunctionSpec>().unwrap(),
            FunctionSpec::InSpace { seed: 4, order: Some(3) }
        );
        let s = FunctionSpec::InSpace { seed: 9, order: None };
        assert_eq!(s.to_string().parse::<FunctionSpec>().unwrap(), s);
        assert!("f5".parse::<FunctionSpec>().is_err());
        assert!("inspace:n=3".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn in_space_is_deterministic() {
        let spec = FunctionSpec::InSpace { seed: 3, order: None };
        let a = builtin_function(&spec, 2, 4).unwrap();
        let b = builtin_function(&spec, 2, 4).unwrap();
        assert_eq!(a.eval(&[0.3, -0.2]), b.eval(&[0.3, -0.2]));
    }

    #[test]
    fn pairings() {
        let omega1 = Domain::parse("omega1", 2).unwrap();
        let cube = Domain::cube(2).unwrap();
        assert!(check_compatible(&FunctionSpec::F2, &omega1).is_ok());
        assert!(check_compatible(&FunctionSpec::F2, &cube).is_err());
        let omega3 = Domain::parse("omega3", 3).unwrap();
        assert!(check_compatible(&FunctionSpec::F4, &omega3).is_ok());
        assert!(check_compatible(&FunctionSpec::F4, &Domain::cube(3).unwrap()).is_err());
        assert!(check_compatible(&FunctionSpec::F4, &omega1).is_ok());
        assert!(builtin_function(&FunctionSpec::F4, 1, 1).is_err());
    }
}
