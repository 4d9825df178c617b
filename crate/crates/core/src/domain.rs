//! Irregular domains inside `[-1, 1]^d` and uniform sampling on them.
//!
//! Domains are indicator predicates. Sampling is by rejection from the
//! uniform distribution on the bounding cube, with a hard per-point attempt
//! budget so that near-empty domains fail loudly instead of spinning.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// The whole cube `[-1, 1]^d`.
    Cube,
    /// `{ r_min ≤ ‖y‖₂ ≤ r_max }`.
    Annulus { r_min: f64, r_max: f64 },
    /// `{ y₁ + … + y_d ≤ 1 }`.
    HalfspaceCutCube,
    /// `{ y₁² + y₂² ≥ r² }`.
    CylinderComplement { r: f64 },
    Intersect(Box<Shape>, Box<Shape>),
    Union(Box<Shape>, Box<Shape>),
    /// Points of the first shape that are not in the second.
    Minus(Box<Shape>, Box<Shape>),
}

impl Shape {
    fn contains(&self, y: &[f64]) -> bool {
        match self {
            Shape::Cube => true,
            Shape::Annulus { r_min, r_max } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                r2 >= r_min * r_min && r2 <= r_max * r_max
            }
            Shape::HalfspaceCutCube => y.iter().sum::<f64>() <= 1.0,
            Shape::CylinderComplement { r } => y[0] * y[0] + y[1] * y[1] >= r * r,
            Shape::Intersect(a, b) => a.contains(y) && b.contains(y),
            Shape::Union(a, b) => a.contains(y) || b.contains(y),
            Shape::Minus(a, b) => a.contains(y) && !b.contains(y),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Shape::Cube | Shape::HalfspaceCutCube => Ok(()),
            Shape::Annulus { r_min, r_max } => {
                if !(*r_max > 0.0 && *r_max <= 1.0) {
                    return Err(Error::Config(format!("annulus r_max = {r_max} must lie in (0, 1]")));
                }
                if !(*r_min >= 0.0 && r_min < r_max) {
                    return Err(Error::Config(format!(
                        "annulus radii must satisfy 0 <= r_min < r_max (got {r_min}, {r_max})"
                    )));
                }
                Ok(())
            }
            Shape::CylinderComplement { r } => {
                if d < 2 {
                    return Err(Error::Config("cylinder complement needs d >= 2".into()));
                }
                if !(*r > 0.0 && *r <= 1.0) {
                    return Err(Error::Config(format!("cylinder radius {r} must lie in (0, 1]")));
                }
                Ok(())
            }
            Shape::Intersect(a, b) | Shape::Union(a, b) | Shape::Minus(a, b) => {
                a.validate(d)?;
                b.validate(d)
            }
        }
    }

    /// Exact volume fraction of the cube, when a closed form is at hand.
    fn fraction(&self, d: usize) -> Option<f64> {
        match self {
            Shape::Cube => Some(1.0),
            Shape::Annulus { r_min, r_max } => {
                let ball = unit_ball_volume(d) / 2f64.powi(d as i32);
                Some(ball * (r_max.powi(d as i32) - r_min.powi(d as i32)))
            }
            Shape::HalfspaceCutCube => Some(irwin_hall_cdf(d, (d as f64 + 1.0) / 2.0)),
            Shape::CylinderComplement { r } => Some(1.0 - PI * r * r / 4.0),
            _ => None,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Cube => write!(f, "cube"),
            Shape::Annulus { r_min, r_max } => write!(f, "annulus:rmin={r_min},rmax={r_max}"),
            Shape::HalfspaceCutCube => write!(f, "halfspace"),
            Shape::CylinderComplement { r } => write!(f, "cylcomp:r={r}"),
            Shape::Intersect(a, b) => write!(f, "intersect({a};{b})"),
            Shape::Union(a, b) => write!(f, "union({a};{b})"),
            Shape::Minus(a, b) => write!(f, "minus({a};{b})"),
        }
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}
    let mut v = [1.0, 2.0];
    if d < 2 {
        return v[d];
    }
    for k in 2..=d {
        let next = 2.0 * PI / k as f64 * v[k % 2];
        v[k % 2] = next;
    }
    v[d % 2]
}

/// P(U_1 + … + U_d ≤ x) for i.i.d. uniform [0, 1] variables.
fn irwin_hall_cdf(d: usize, x: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut factorial = 1.0;
    for k in 1..=d {
        factorial *= k as f64;
    }
    for k in 0..=d {
        if (k as f64) > x {
            break;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom * (x - k as f64).powi(d as i32);
        binom = binom * (d - k) as f64 / (k + 1) as f64;
    }
    total / factorial
}

/// A compact domain Ω ⊆ [-1, 1]^d given by an indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    dim: usize,
    shape: Shape,
    name: String,
}

impl Domain {
    pub fn new(dim: usize, shape: Shape) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("domain dimension must be at least 1".into()));
        }
        shape.validate(dim)?;
        let name = shape.to_string();
        Ok(Domain { dim, shape, name })
    }

    pub fn cube(dim: usize) -> Result<Self> {
        Domain::new(dim, Shape::Cube)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Volume of Ω relative to the cube, when known in closed form.
    pub fn nominal_fraction(&self) -> Option<f64> {
        self.shape.fraction(self.dim)
    }

    /// Indicator of Ω. Points outside the cube are never inside.
    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim && y.iter().all(|v| (-1.0..=1.0).contains(v)) && self.shape.contains(y)
    }

    /// Parses a config string such as `"annulus:rmin=0.25,rmax=1"` for dimension `d`.
    pub fn parse(spec: &str, d: usize) -> Result<Self> {
        let shape: Shape = spec.parse()?;
        Domain::new(d, shape)
    }
}

/// Built-in domains by name: `annulus`, `halfspace_cut_cube`,
/// `cylinder_complement`, `cube`.
pub fn builtin_domain(name: &str, d: usize, params: &[(&str, f64)]) -> Result<Domain> {
    let get = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
    let shape = match name {
        "cube" => Shape::Cube,
        "halfspace_cut_cube" | "halfspace" => Shape::HalfspaceCutCube,
        "annulus" => Shape::Annulus {
            r_min: get("r_min").or_else(|| get("rmin")).unwrap_or(0.25),
            r_max: get("r_max").or_else(|| get("rmax")).unwrap_or(1.0),
        },
        "cylinder_complement" | "cylcomp" => Shape::CylinderComplement {
            r: get("r").unwrap_or(0.5),
        },
        other => return Err(Error::Config(format!("unknown domain '{other}'"))),
    };
    Domain::new(d, shape)
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        for (prefix, make) in [
            ("intersect(", Shape::Intersect as fn(Box<Shape>, Box<Shape>) -> Shape),
            ("union(", Shape::Union),
            ("minus(", Shape::Minus),
        ] {
            if let Some(body) = s.strip_prefix(prefix) {
                let body = body
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in '{s}'")))?;
                let (a, b) = split_top_level(body)
                    .ok_or_else(|| Error::Config(format!("'{s}' needs two ';'-separated arguments")))?;
                return Ok(make(Box::new(a.parse()?), Box::new(b.parse()?)));
            }
        }
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), r),
            None => (s, ""),
        };
        let mut params = Vec::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed domain parameter '{part}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("domain parameter '{part}' is not a number")))?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        match name {
            "cube" => Ok(Shape::Cube),
            "halfspace" | "halfspace_cut_cube" => Ok(Shape::HalfspaceCutCube),
            "annulus" => Ok(Shape::Annulus {
                r_min: get("rmin").ok_or_else(|| Error::Config("annulus needs rmin".into()))?,
                r_max: get("rmax").ok_or_else(|| Error::Config("annulus needs rmax".into()))?,
            }),
            "cylcomp" | "cylinder_complement" => Ok(Shape::CylinderComplement {
                r: get("r").ok_or_else(|| Error::Config("cylcomp needs r".into()))?,
            }),
            // Shorthands for the standard experiment domains.
            "omega1" => Ok(Shape::Annulus { r_min: 0.25, r_max: 1.0 }),
            "omega2" => Ok(Shape::HalfspaceCutCube),
            "omega3" => Ok(Shape::CylinderComplement { r: 0.5 }),
            "small_annulus" => Ok(Shape::Annulus { r_min: 0.125, r_max: 0.5 }),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

fn split_top_level(body: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in body.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ';' if depth == 0 => return Some((&body[..i], &body[i + 1..])),
            _ => {}
        }
    }
    None
}

/// Points stored contiguously, one row of `dim` coordinates each.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet { dim, coords: Vec::new() }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut set = PointSet::new(dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            set.coords.extend_from_slice(row);
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn extend(&mut self, other: &PointSet) {
        assert_eq!(self.dim, other.dim);
        self.coords.extend_from_slice(&other.coords);
    }

    fn push(&mut self, p: &[f64]) {
        self.coords.extend_from_slice(p);
    }
}

/// Draws `count` i.i.d. points from the uniform measure on `domain`.
pub fn sample_uniform(
    domain: &Domain,
    count: usize,
    rng: &mut RngStream,
    max_attempts_per_point: u64,
) -> Result<PointSet> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    if max_attempts_per_point == 0 {
        return Err(Error::Config("max_attempts_per_point must be at least 1".into()));
    }
    let d = domain.dim();
    let mut out = PointSet::new(d);
    out.coords.reserve(count * d);
    let mut candidate = vec![0.0; d];
    let mut total_attempts = 0u64;
    for accepted in 0..count as u64 {
        let mut tries = 0u64;
        loop {
            if tries == max_attempts_per_point {
                return Err(Error::SamplingBudget {
                    attempts: total_attempts,
                    accepted,
                    rate: accepted as f64 / total_attempts as f64,
                });
            }
            tries += 1;
            total_attempts += 1;
            for c in candidate.iter_mut() {
                *c = rng.uniform_symmetric();
            }
            if domain.shape.contains(&candidate) {
                out.push(&candidate);
                break;
            }
        }
    }
    Ok(out)
}

/// Acceptance statistics for a rejection run (used by diagnostics and tests).
pub fn acceptance_rate(domain: &Domain, proposals: usize, rng: &mut RngStream) -> f64 {
    let mut candidate = vec![0.0; domain.dim()];
    let mut hits = 0usize;
    for _ in 0..proposals {
        for c in candidate.iter_mut() {
            *c = rng.uniform_symmetric();
        }
        if domain.shape.contains(&candidate) {
            hits += 1;
        }
    }
    hits as f64 / proposals as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_examples() {
        let omega1 = builtin_domain("annulus", 2, &[("r_min", 0.25), ("r_max", 1.0)]).unwrap();
        assert!(!omega1.contains(&[0.0, 0.0]));
        assert!(omega1.contains(&[0.5, 0.0]));
        let half = builtin_domain("halfspace_cut_cube", 2, &[]).unwrap();
        assert!(half.contains(&[0.0, 0.0]));
        assert!(!half.contains(&[0.9, 0.9]));
        let cyl = builtin_domain("cylinder_complement", 4, &[("r", 0.5)]).unwrap();
        assert!(cyl.contains(&[0.6, 0.6, 0.0, 0.0]));
        assert!(!cyl.contains(&[0.1, 0.1, 0.9, 0.9]));
    }

    #[test]
    fn invalid_configs() {
        assert!(builtin_domain("blob", 2, &[]).is_err());
        assert!(builtin_domain("annulus", 2, &[("r_min", 0.5), ("r_max", 0.5)]).is_err());
        assert!(builtin_domain("annulus", 2, &[("r_min", 0.1), ("r_max", 1.5)]).is_err());
        assert!(builtin_domain("cylinder_complement", 1, &[("r", 0.5)]).is_err());
        assert!(Domain::parse("annulus:rmin=0.25", 2).is_err());
        assert!(Domain::parse("intersect(cube)", 2).is_err());
    }

    #[test]
    fn config_strings_round_trip() {
        for s in [
            "annulus:rmin=0.25,rmax=1",
            "halfspace",
            "cylcomp:r=0.5",
            "cube",
            "intersect(annulus:rmin=0.25,rmax=1;cylcomp:r=0.5)",
            "minus(cube;annulus:rmin=0,rmax=0.5)",
        ] {
            let d = Domain::parse(s, 2).unwrap();
            let again = Domain::parse(d.name(), 2).unwrap();
            assert_eq!(d, again);
        }
        let d = Domain::parse("minus(cube;annulus:rmin=0,rmax=0.5)", 2).unwrap();
        assert!(!d.contains(&[0.1, 0.1]));
        assert!(d.contains(&[0.9, 0.9]));
    }

    #[test]
    fn cube_accepts_everything() {
        let cube = Domain::cube(3).unwrap();
        let mut rng = RngStream::new(5, 0);
        let pts = sample_uniform(&cube, 5, &mut rng, 1).unwrap();
        assert_eq!(pts.len(), 5);
    }

    #[test]
    fn annulus_acceptance_rate_matches_area() {
        let omega1 = Domain::parse("annulus:rmin=0.25,rmax=1", 2).unwrap();
        let expected = PI * (1.0 - 1.0 / 16.0) / 4.0;
        assert!((omega1.nominal_fraction().unwrap() - expected).abs() < 1e-15);
        let mut rng = RngStream::new(9, 0);
        let n = 10_000;
        let rate = acceptance_rate(&omega1, n, &mut rng);
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((rate - expected).abs() < 3.0 * se, "rate {rate} vs {expected}");
    }

    #[test]
    fn tight_budget_eventually_fails() {
        let omega1 = Domain::parse("annulus:rmin=0.25,rmax=1", 2).unwrap();
        let mut rng = RngStream::new(9, 1);
        let err = sample_uniform(&omega1, 10_000, &mut rng, 1).unwrap_err();
        match err {
            Error::SamplingBudget { rate, .. } => assert!(rate > 0.5 && rate < 0.9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn samples_lie_in_domain_and_are_reproducible() {
        let omega3 = Domain::parse("cylcomp:r=0.5", 3).unwrap();
        let a = sample_uniform(&omega3, 500, &mut RngStream::new(3, 7), DEFAULT_MAX_ATTEMPTS).unwrap();
        let b = sample_uniform(&omega3, 500, &mut RngStream::new(3, 7), DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| omega3.contains(p)));
    }

    #[test]
    fn cube_moments() {
        let cube = Domain::cube(2).unwrap();
        let n = 100_000;
        let pts = sample_uniform(&cube, n, &mut RngStream::new(17, 0), 1).unwrap();
        for k in 0..2 {
            let xs: Vec<f64> = pts.iter().map(|p| p[k]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            // sd of a uniform(-1,1) is 1/√3; sd of x² around 1/3 is √(4/45)
            assert!(mean.abs() < 4.0 * (1.0 / 3.0f64).sqrt() / (n as f64).sqrt());
            assert!((var - 1.0 / 3.0).abs() < 4.0 * (4.0f64 / 45.0).sqrt() / (n as f64).sqrt());
        }
    }

    #[test]
    fn closed_form_fractions() {
        assert!((irwin_hall_cdf(2, 1.5) - 7.0 / 8.0).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-12);
        let omega2 = Domain::parse("halfspace", 3).unwrap();
        let mut rng = RngStream::new(2, 2);
        let rate = acceptance_rate(&omega2, 200_000, &mut rng);
        let p = omega2.nominal_fraction().unwrap();
        assert!((rate - p).abs() < 4.0 * (p * (1.0 - p) / 200_000.0).sqrt());
    }
}
