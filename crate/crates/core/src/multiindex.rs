//! Multi-index sets defining polynomial approximation spaces.
//!
//! Every constructor returns its indices in a canonical nesting order: the
//! primary key is the "level" that defines the family (the product
//! `Π(n_k + 1)` for hyperbolic crosses, `|n|₁` for total degree, `max n_k`
//! for tensor sets), followed by `Π(n_k + 1)`, `|n|₁` and lexicographic
//! order. Sets of the same kind and dimension are therefore prefixes of one
//! another, which is what nested spaces `P_1 ⊂ P_2 ⊂ …` need.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A d-dimensional multi-index of polynomial degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one entry");
        MultiIndex(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `Π (n_k + 1)`.
    pub fn product_level(&self) -> u64 {
        self.0.iter().map(|&n| n as u64 + 1).product()
    }

    /// `|n|₁`.
    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexSetKind {
    HyperbolicCross,
    TotalDegree,
    Tensor,
}

impl IndexSetKind {
    pub fn tag(self) -> &'static str {
        match self {
            IndexSetKind::HyperbolicCross => "hc",
            IndexSetKind::TotalDegree => "td",
            IndexSetKind::Tensor => "tp",
        }
    }

    fn level(self, idx: &MultiIndex) -> u64 {
        match self {
            IndexSetKind::HyperbolicCross => idx.product_level(),
            IndexSetKind::TotalDegree => idx.total_degree(),
            IndexSetKind::Tensor => idx.max_degree() as u64,
        }
    }

    fn admits(self, idx: &[u32], order: u32) -> bool {
        match self {
            IndexSetKind::HyperbolicCross => {
                idx.iter().map(|&n| n as u64 + 1).product::<u64>() <= order as u64 + 1
            }
            IndexSetKind::TotalDegree => idx.iter().map(|&n| n as u64).sum::<u64>() <= order as u64,
            IndexSetKind::Tensor => idx.iter().all(|&n| n <= order),
        }
    }

    /// Canonical sort key for an index of this kind.
    pub fn sort_key(self, idx: &MultiIndex) -> (u64, u64, u64, Vec<u32>) {
        (
            self.level(idx),
            idx.product_level(),
            idx.total_degree(),
            idx.entries().to_vec(),
        )
    }
}

impl FromStr for IndexSetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hc" | "hyperbolic_cross" => Ok(IndexSetKind::HyperbolicCross),
            "td" | "total_degree" => Ok(IndexSetKind::TotalDegree),
            "tp" | "tensor" => Ok(IndexSetKind::Tensor),
            other => Err(Error::Config(format!("unknown index set kind '{other}'"))),
        }
    }
}

/// An ordered, duplicate-free set of multi-indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexSet {
    dim: usize,
    kind: Option<IndexSetKind>,
    order: u32,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    /// Builds the set of the given kind and order in canonical order.
    pub fn build(kind: IndexSetKind, d: usize, n: u32) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        let mut indices = Vec::new();
        let mut current = vec![0u32; d];
        enumerate(kind, n, 0, &mut current, &mut indices);
        indices.sort_by_cached_key(|idx| kind.sort_key(idx));
        MultiIndexSet {
            dim: d,
            kind: Some(kind),
            order: n,
            indices,
        }
    }

    /// Wraps an arbitrary list of indices (kept in the given order).
    pub fn from_indices(d: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for idx in &indices {
            if idx.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: idx.dim(),
                });
            }
            if !seen.insert(idx.clone()) {
                return Err(Error::Config(format!("duplicate multi-index {idx}")));
            }
        }
        let order = indices.iter().map(|i| i.max_degree()).max().unwrap_or(0);
        Ok(MultiIndexSet {
            dim: d,
            kind: None,
            order,
            indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> Option<IndexSetKind> {
        self.kind
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Cardinality N.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    /// Largest degree used in each coordinate.
    pub fn max_degrees(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.dim];
        for idx in &self.indices {
            for (m, &n) in out.iter_mut().zip(idx.entries()) {
                *m = (*m).max(n);
            }
        }
        out
    }

    /// The first `n` indices as a set of its own.
    pub fn truncated(&self, n: usize) -> MultiIndexSet {
        MultiIndexSet {
            dim: self.dim,
            kind: None,
            order: self.order,
            indices: self.indices[..n.min(self.indices.len())].to_vec(),
        }
    }

    /// Whether `self` is an ordered prefix of `other`.
    pub fn is_prefix_of(&self, other: &MultiIndexSet) -> bool {
        self.dim == other.dim
            && self.len() <= other.len()
            && self.indices.iter().zip(&other.indices).all(|(a, b)| a == b)
    }
}

fn enumerate(kind: IndexSetKind, n: u32, k: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if k == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    let mut v = 0u32;
    loop {
        current[k] = v;
        // Zeros in the remaining slots give the smallest level, so if the
        // prefix fails the bound no larger entry can succeed either.
        for slot in current.iter_mut().skip(k + 1) {
            *slot = 0;
        }
        if !kind.admits(current, n) {
            break;
        }
        enumerate(kind, n, k + 1, current, out);
        v += 1;
    }
    current[k] = 0;
}

/// `{ n : Π (n_k + 1) ≤ n + 1 }`.
pub fn hyperbolic_cross(d: usize, n: u32) -> MultiIndexSet {
    MultiIndexSet::build(IndexSetKind::HyperbolicCross, d, n)
}

/// `{ n : |n|₁ ≤ n }`.
pub fn total_degree(d: usize, n: u32) -> MultiIndexSet {
    MultiIndexSet::build(IndexSetKind::TotalDegree, d, n)
}

/// `{0..n}^d`.
pub fn tensor(d: usize, n: u32) -> MultiIndexSet {
    MultiIndexSet::build(IndexSetKind::Tensor, d, n)
}

/// True iff every componentwise-smaller index of a member is a member.
///
/// Checking the immediate predecessors (one coordinate decremented) is
/// enough: downward closure then follows by induction on `|n|₁`.
pub fn is_lower_set(set: &MultiIndexSet) -> bool {
    let members: HashSet<&[u32]> = set.iter().map(|i| i.entries()).collect();
    let mut scratch = Vec::with_capacity(set.dim());
    for idx in set.iter() {
        for k in 0..idx.dim() {
            if idx.entries()[k] == 0 {
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(idx.entries());
            scratch[k] -= 1;
            if !members.contains(scratch.as_slice()) {
                return false;
            }
        }
    }
    true
}

/// Parsed form of `"hc:d=2,n=30"`, `"td:d=3,n=5"`, `"tp:d=2,n=4"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexSetSpec {
    pub kind: IndexSetKind,
    pub d: usize,
    pub n: u32,
}

impl IndexSetSpec {
    pub fn build(&self) -> MultiIndexSet {
        MultiIndexSet::build(self.kind, self.d, self.n)
    }
}

impl FromStr for IndexSetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("index set '{s}' must look like 'hc:d=2,n=30'")))?;
        let kind: IndexSetKind = kind.parse()?;
        let mut d = None;
        let mut n = None;
        for part in rest.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed index set parameter '{part}'")))?;
            let parsed: u32 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("index set parameter '{part}' is not an integer")))?;
            match key.trim() {
                "d" => d = Some(parsed as usize),
                "n" => n = Some(parsed),
                other => return Err(Error::Config(format!("unknown index set parameter '{other}'"))),
            }
        }
        let d = d.ok_or_else(|| Error::Config("index set needs 'd='".into()))?;
        let n = n.ok_or_else(|| Error::Config("index set needs 'n='".into()))?;
        if d == 0 {
            return Err(Error::Config("index set dimension must be at least 1".into()));
        }
        Ok(IndexSetSpec { kind, d, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn one_dimensional_cross_is_degree_range() {
        let set = hyperbolic_cross(1, 5);
        let got: Vec<u32> = set.iter().map(|i| i.entries()[0]).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn order_zero_is_origin_only() {
        let set = hyperbolic_cross(3, 0);
        assert_eq!(set.indices(), &[idx(&[0, 0, 0])]);
    }

    #[test]
    fn hc_2_3_canonical_order() {
        let set = hyperbolic_cross(2, 3);
        let expected: Vec<MultiIndex> = [
            [0, 0],
            [0, 1],
            [1, 0],
            [0, 2],
            [2, 0],
            [1, 1],
            [0, 3],
            [3, 0],
        ]
        .iter()
        .map(|v| idx(v))
        .collect();
        assert_eq!(set.indices(), expected.as_slice());
    }

    #[test]
    fn total_degree_small_cases() {
        assert_eq!(
            total_degree(2, 1).indices(),
            &[idx(&[0, 0]), idx(&[0, 1]), idx(&[1, 0])]
        );
        assert_eq!(total_degree(1, 7).len(), 8);
        assert_eq!(total_degree(3, 2).len(), 10);
    }

    #[test]
    fn lower_set_checks() {
        assert!(is_lower_set(&hyperbolic_cross(2, 3)));
        let gap = MultiIndexSet::from_indices(2, vec![idx(&[0, 0]), idx(&[1, 1])]).unwrap();
        assert!(!is_lower_set(&gap));
        let single = MultiIndexSet::from_indices(1, vec![idx(&[0])]).unwrap();
        assert!(is_lower_set(&single));
    }

    #[test]
    fn duplicates_rejected() {
        let err = MultiIndexSet::from_indices(1, vec![idx(&[1]), idx(&[1])]);
        assert!(err.is_err());
    }

    #[test]
    fn spec_strings_parse() {
        let spec: IndexSetSpec = "hc:d=2,n=30".parse().unwrap();
        assert_eq!(spec, IndexSetSpec { kind: IndexSetKind::HyperbolicCross, d: 2, n: 30 });
        let spec: IndexSetSpec = "td:d=3,n=5".parse().unwrap();
        assert_eq!(spec.kind, IndexSetKind::TotalDegree);
        let spec: IndexSetSpec = "tp:d=2,n=4".parse().unwrap();
        assert_eq!(spec.build().len(), 25);
        assert!("xx:d=2,n=1".parse::<IndexSetSpec>().is_err());
        assert!("hc:d=0,n=1".parse::<IndexSetSpec>().is_err());
        assert!("hc:n=1".parse::<IndexSetSpec>().is_err());
    }

    #[test]
    fn nested_prefixes_for_all_kinds() {
        for kind in [IndexSetKind::HyperbolicCross, IndexSetKind::TotalDegree, IndexSetKind::Tensor] {
            for d in 1..=3 {
                let sets: Vec<_> = (0..=6).map(|n| MultiIndexSet::build(kind, d, n)).collect();
                for w in sets.windows(2) {
                    assert!(w[0].is_prefix_of(&w[1]), "{kind:?} d={d}");
                    assert!(w[0].len() < w[1].len());
                }
            }
        }
    }
}
