//! Finite domains, manipulation graphs, hypotheses and labeled distributions.
//!
//! Points are plain indices `0..n`. Everything else in the crate is expressed
//! over these indices; optional coordinates exist only so that parametric
//! families (thresholds, halfspaces) and cost functions can be evaluated.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest domain for which the graph keeps a dense adjacency matrix
/// alongside its successor lists.
const DENSE_LIMIT: usize = 4096;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDomain {
    size: usize,
    coords: Option<Vec<Vec<f64>>>,
}

impl FiniteDomain {
    /// A domain of `size` anonymous points.
    pub fn new(size: usize) -> Self {
        FiniteDomain { size, coords: None }
    }

    /// A domain whose points carry real coordinates. All rows must share one
    /// dimension and be finite.
    pub fn with_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = coords.first() {
            let d = first.len();
            for (i, row) in coords.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::InvalidParameter(format!(
                        "point {i} has {} coordinates, expected {d}",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "point {i} has a non-finite coordinate"
                    )));
                }
            }
        }
        Ok(FiniteDomain {
            size: coords.len(),
            coords: Some(coords),
        })
    }

    /// One-dimensional domain with the given coordinate per point.
    pub fn line(values: &[f64]) -> Result<Self> {
        Self::with_coords(values.iter().map(|&v| vec![v]).collect())
    }

    /// Cartesian grid `axis^dim`, enumerated row-major (last coordinate
    /// varies fastest).
    pub fn grid(axis: &[f64], dim: usize) -> Result<Self> {
        let mut coords: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..dim {
            coords = coords
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut row = prefix.clone();
                        row.push(v);
                        row
                    })
                })
                .collect();
        }
        if dim == 0 {
            coords.clear();
        }
        Self::with_coords(coords)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn coord(&self, x: usize) -> Option<&[f64]> {
        self.coords.as_ref().map(|c| c[x].as_slice())
    }

    /// Coordinate dimension, or `None` for an anonymous domain.
    pub fn dim(&self) -> Option<usize> {
        self.coords
            .as_ref()
            .map(|c| c.first().map_or(0, |row| row.len()))
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x < self.size {
            Ok(())
        } else {
            Err(Error::PointOutOfRange {
                index: x,
                size: self.size,
            })
        }
    }
}

/// Directed manipulation graph over `0..n`. An edge `x -> x'` means an agent
/// at `x` can present as `x'`.
///
/// Successor lists are sorted, deduplicated and never contain the source
/// point itself.
#[derive(Clone)]
pub struct ManipulationGraph {
    size: usize,
    succ: Vec<Vec<usize>>,
    dense: Option<Vec<bool>>,
}

impl ManipulationGraph {
    pub fn empty(size: usize) -> Self {
        Self::build(size, vec![Vec::new(); size])
    }

    pub fn complete(size: usize) -> Self {
        let succ = (0..size)
            .map(|x| (0..size).filter(|&y| y != x).collect())
            .collect();
        Self::build(size, succ)
    }

    /// Path `0 -> 1 -> ... -> n-1`; with `bidirectional` also the reverse
    /// edges.
    pub fn chain(size: usize, bidirectional: bool) -> Self {
        let succ = (0..size)
            .map(|x| {
                let mut s = Vec::new();
                if bidirectional && x > 0 {
                    s.push(x - 1);
                }
                if x + 1 < size {
                    s.push(x + 1);
                }
                s
            })
            .collect();
        Self::build(size, succ)
    }

    /// Builds a graph from arbitrary successor lists. Self-loops and
    /// duplicates are dropped.
    pub fn from_successors(size: usize, mut succ: Vec<Vec<usize>>) -> Result<Self> {
        if succ.len() != size {
            return Err(Error::DomainMismatch {
                expected: size,
                found: succ.len(),
            });
        }
        for (x, list) in succ.iter_mut().enumerate() {
            if let Some(&bad) = list.iter().find(|&&y| y >= size) {
                return Err(Error::PointOutOfRange {
                    index: bad,
                    size,
                });
            }
            list.retain(|&y| y != x);
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::build(size, succ))
    }

    pub fn from_edges<I>(size: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut succ = vec![Vec::new(); size];
        for (x, y) in edges {
            if x >= size || y >= size {
                return Err(Error::PointOutOfRange {
                    index: x.max(y),
                    size,
                });
            }
            succ[x].push(y);
        }
        Self::from_successors(size, succ)
    }

    fn build(size: usize, succ: Vec<Vec<usize>>) -> Self {
        let dense = (size <= DENSE_LIMIT).then(|| {
            let mut m = vec![false; size * size];
            for (x, list) in succ.iter().enumerate() {
                for &y in list {
                    m[x * size + y] = true;
                }
            }
            m
        });
        ManipulationGraph { size, succ, dense }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// The successor set `B(x)`, ascending, never containing `x`.
    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.succ[x]
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        match &self.dense {
            Some(m) => m[x * self.size + y],
            None => self.succ[x].binary_search(&y).is_ok(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(x, list)| list.iter().map(move |&y| (x, y)))
    }

    pub fn is_subgraph_of(&self, other: &ManipulationGraph) -> bool {
        self.size == other.size && self.edges().all(|(x, y)| other.has_edge(x, y))
    }

    pub fn successor_lists(&self) -> &[Vec<usize>] {
        &self.succ
    }
}

impl PartialEq for ManipulationGraph {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && self.succ == other.succ
    }
}

impl Eq for ManipulationGraph {}

impl Hash for ManipulationGraph {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.size.hash(state);
        self.succ.hash(state);
    }
}

impl fmt::Debug for ManipulationGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManipulationGraph")
            .field("size", &self.size)
            .field("succ", &self.succ)
            .finish()
    }
}

/// Returns `B(x)` for the graph.
pub fn neighbors(graph: &ManipulationGraph, x: usize) -> &[usize] {
    graph.neighbors(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(p, q)| (p - q).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

/// Manipulation cost on ordered point pairs together with the value `gamma`
/// of a positive classification.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    size: usize,
    costs: Vec<f64>,
    gamma: f64,
}

impl CostModel {
    pub fn from_fn(size: usize, gamma: f64, cost: impl Fn(usize, usize) -> f64) -> Self {
        let mut costs = Vec::with_capacity(size * size);
        for x in 0..size {
            for y in 0..size {
                costs.push(cost(x, y));
            }
        }
        CostModel { size, costs, gamma }
    }

    /// Cost equal to the distance between point coordinates.
    pub fn from_coordinates(domain: &FiniteDomain, norm: Norm, gamma: f64) -> Result<Self> {
        let coords = domain.coords().ok_or(Error::MissingCoordinates)?;
        Ok(Self::from_fn(domain.size(), gamma, |x, y| {
            norm.distance(&coords[x], &coords[y])
        }))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cost(&self, x: usize, y: usize) -> f64 {
        self.costs[x * self.size + y]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidCostModel(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        for x in 0..self.size {
            for y in 0..self.size {
                let c = self.cost(x, y);
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidCostModel(format!(
                        "cost({x}, {y}) = {c} is not a finite nonnegative value"
                    )));
                }
                if x == y && c != 0.0 {
                    return Err(Error::InvalidCostModel(format!(
                        "cost({x}, {x}) = {c}, expected 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Edge `x -> x'` exactly when `x != x'` and `cost(x, x') <= gamma`.
pub fn induce_graph(domain: &FiniteDomain, cost_model: &CostModel) -> Result<ManipulationGraph> {
    if cost_model.size() != domain.size() {
        return Err(Error::DomainMismatch {
            expected: domain.size(),
            found: cost_model.size(),
        });
    }
    cost_model.validate()?;
    let n = domain.size();
    let gamma = cost_model.gamma();
    let succ = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| y != x && cost_model.cost(x, y) <= gamma)
                .collect()
        })
        .collect();
    Ok(ManipulationGraph::build(n, succ))
}

/// Parametric tag recording how a hypothesis was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    /// `h(x) = 1` iff `coord(x) >= a`.
    Threshold { coord: usize, a: f64 },
    /// `h(x) = 1` iff `w . x + b >= 0`.
    Halfspace { w: Vec<f64>, b: f64 },
    Singleton(usize),
    Constant(bool),
}

/// A total boolean labeling of the domain.
///
/// Equality compares labels only; the descriptor is provenance.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    labels: Vec<bool>,
    descriptor: Option<Descriptor>,
}

impl PartialEq for Hypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for Hypothesis {}

impl Hypothesis {
    pub fn from_labels(labels: Vec<bool>) -> Self {
        Hypothesis {
            labels,
            descriptor: None,
        }
    }

    pub fn constant(size: usize, value: bool) -> Self {
        Hypothesis {
            labels: vec![value; size],
            descriptor: Some(Descriptor::Constant(value)),
        }
    }

    pub fn singleton(size: usize, point: usize) -> Self {
        let mut labels = vec![false; size];
        labels[point] = true;
        Hypothesis {
            labels,
            descriptor: Some(Descriptor::Singleton(point)),
        }
    }

    pub fn threshold(domain: &FiniteDomain, coord: usize, a: f64) -> Result<Self> {
        let coords = domain.coords().ok_or(Error::MissingCoordinates)?;
        if domain.dim().unwrap_or(0) <= coord && domain.size() > 0 {
            return Err(Error::InvalidParameter(format!(
                "threshold coordinate {coord} exceeds domain dimension"
            )));
        }
        Ok(Hypothesis {
            labels: coords.iter().map(|c| c[coord] >= a).collect(),
            descriptor: Some(Descriptor::Threshold { coord, a }),
        })
    }

    pub fn halfspace(domain: &FiniteDomain, w: Vec<f64>, b: f64) -> Result<Self> {
        let coords = domain.coords().ok_or(Error::MissingCoordinates)?;
        if domain.size() > 0 && domain.dim() != Some(w.len()) {
            return Err(Error::InvalidParameter(format!(
                "halfspace weight has {} entries, domain dimension is {:?}",
                w.len(),
                domain.dim()
            )));
        }
        let labels = coords.iter().map(|c| affine(&w, b, c) >= 0.0).collect();
        Ok(Hypothesis {
            labels,
            descriptor: Some(Descriptor::Halfspace { w, b }),
        })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, x: usize) -> bool {
        self.labels[x]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn descriptor(&self) -> Option<&Descriptor> {
        self.descriptor.as_ref()
    }

    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(x, &l)| l.then_some(x))
    }

    pub fn is_all_zero(&self) -> bool {
        !self.labels.iter().any(|&l| l)
    }

    pub fn is_constant(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] == w[1])
    }

    /// Labels as a `0`/`1` string, point 0 first.
    pub fn bit_string(&self) -> String {
        self.labels.iter().map(|&l| if l { '1' } else { '0' }).collect()
    }

    /// Short display name derived from the descriptor.
    pub fn name(&self) -> String {
        match &self.descriptor {
            Some(Descriptor::Threshold { a, .. }) => format!("h_{a}"),
            Some(Descriptor::Constant(v)) => format!("const_{}", u8::from(*v)),
            Some(Descriptor::Singleton(p)) => format!("single_{p}"),
            Some(Descriptor::Halfspace { w, b }) => {
                let w: Vec<String> = w.iter().map(|v| v.to_string()).collect();
                format!("hs[{};{b}]", w.join(" "))
            }
            None => self.bit_string(),
        }
    }

    /// Re-evaluates the descriptor on `domain` and compares with the stored
    /// labels. Hypotheses without a descriptor are trivially consistent.
    pub fn consistent_with(&self, domain: &FiniteDomain) -> bool {
        if self.labels.len() != domain.size() {
            return false;
        }
        match &self.descriptor {
            None => true,
            Some(Descriptor::Constant(v)) => self.labels.iter().all(|l| l == v),
            Some(Descriptor::Singleton(p)) => self
                .labels
                .iter()
                .enumerate()
                .all(|(x, &l)| l == (x == *p)),
            Some(Descriptor::Threshold { coord, a }) => match domain.coords() {
                Some(c) => c
                    .iter()
                    .zip(&self.labels)
                    .all(|(row, &l)| l == (row[*coord] >= *a)),
                None => false,
            },
            Some(Descriptor::Halfspace { w, b }) => match domain.coords() {
                Some(c) => c
                    .iter()
                    .zip(&self.labels)
                    .all(|(row, &l)| l == (affine(w, *b, row) >= 0.0)),
                None => false,
            },
        }
    }
}

fn affine(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b
}

/// Finite ordered list of hypotheses with pairwise distinct labelings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisClass {
    members: Vec<Hypothesis>,
}

impl HypothesisClass {
    /// Keeps the first occurrence of every labeling, in construction order.
    pub fn new(hypotheses: impl IntoIterator<Item = Hypothesis>) -> Result<Self> {
        let mut members: Vec<Hypothesis> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for h in hypotheses {
            if let Some(first) = members.first() {
                if first.size() != h.size() {
                    return Err(Error::DomainMismatch {
                        expected: first.size(),
                        found: h.size(),
                    });
                }
            }
            if seen.insert(h.labels.clone()) {
                members.push(h);
            }
        }
        Ok(HypothesisClass { members })
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> &Hypothesis {
        &self.members[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hypothesis> {
        self.members.iter()
    }

    /// Index of the member with the same labeling.
    pub fn position(&self, h: &Hypothesis) -> Option<usize> {
        self.members.iter().position(|m| m == h)
    }

    pub fn domain_size(&self) -> Option<usize> {
        self.members.first().map(Hypothesis::size)
    }
}

impl<'a> IntoIterator for &'a HypothesisClass {
    type Item = &'a Hypothesis;
    type IntoIter = std::slice::Iter<'a, Hypothesis>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// Parametric families that can be materialized on a finite domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassFamily {
    /// Explicit label arrays, written as `0`/`1` strings.
    Explicit { members: Vec<String> },
    /// `1{coord >= a}`. Without a grid, one cut below every point, one above,
    /// and one between each pair of consecutive distinct values, swept from
    /// the largest `a` down.
    Thresholds {
        #[serde(default)]
        coord: usize,
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
    /// `1{w . x + b >= 0}` for every `w` in `weight_axis^d` and `b` in
    /// `biases`.
    Halfspaces {
        weight_axis: Vec<f64>,
        biases: Vec<f64>,
    },
    /// Indicator of a single point, for each point of `over` (all points by
    /// default).
    Singletons {
        #[serde(default)]
        over: Option<Vec<usize>>,
    },
    Constants,
}

/// Parses a `0`/`1` label string.
pub fn parse_labels(bits: &str) -> Result<Vec<bool>> {
    bits.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidParameter(format!(
                "label string contains '{other}'"
            ))),
        })
        .collect()
}

/// Materializes every distinct dichotomy the family induces on `domain`.
pub fn enumerate_class(family: &ClassFamily, domain: &FiniteDomain) -> Result<HypothesisClass> {
    let n = domain.size();
    let hypotheses: Vec<Hypothesis> = match family {
        ClassFamily::Explicit { members } => members
            .iter()
            .map(|bits| {
                let labels = parse_labels(bits)?;
                if labels.len() != n {
                    return Err(Error::DomainMismatch {
                        expected: n,
                        found: labels.len(),
                    });
                }
                Ok(Hypothesis::from_labels(labels))
            })
            .collect::<Result<_>>()?,
        ClassFamily::Thresholds { coord, grid } => {
            let coords = domain.coords().ok_or(Error::MissingCoordinates)?;
            let cuts = match grid {
                Some(g) => g.clone(),
                None => {
                    let mut values: Vec<f64> = coords.iter().map(|c| c[*coord]).collect();
                    values.sort_by(f64::total_cmp);
                    values.dedup();
                    let mut cuts = Vec::with_capacity(values.len() + 1);
                    if let (Some(&lo), Some(&hi)) = (values.first(), values.last()) {
                        cuts.push(hi + 0.5);
                        for pair in values.windows(2).rev() {
                            cuts.push((pair[0] + pair[1]) / 2.0);
                        }
                        cuts.push(lo - 0.5);
                    }
                    cuts
                }
            };
            cuts.into_iter()
                .map(|a| Hypothesis::threshold(domain, *coord, a))
                .collect::<Result<_>>()?
        }
        ClassFamily::Halfspaces {
            weight_axis,
            biases,
        } => {
            let dim = domain.dim().ok_or(Error::MissingCoordinates)?;
            let mut weights: Vec<Vec<f64>> = vec![Vec::new()];
            for _ in 0..dim {
                weights = weights
                    .into_iter()
                    .flat_map(|prefix| {
                        weight_axis.iter().map(move |&v| {
                            let mut w = prefix.clone();
                            w.push(v);
                            w
                        })
                    })
                    .collect();
            }
            let mut out = Vec::with_capacity(weights.len() * biases.len());
            for w in &weights {
                for &b in biases {
                    out.push(Hypothesis::halfspace(domain, w.clone(), b)?);
                }
            }
            out
        }
        ClassFamily::Singletons { over } => {
            let points: Vec<usize> = match over {
                Some(v) => v.clone(),
                None => (0..n).collect(),
            };
            points
                .into_iter()
                .map(|p| {
                    domain.check_point(p)?;
                    Ok(Hypothesis::singleton(n, p))
                })
                .collect::<Result<_>>()?
        }
        ClassFamily::Constants => vec![Hypothesis::constant(n, false), Hypothesis::constant(n, true)],
    };
    HypothesisClass::new(hypotheses)
}

/// Probability weights over a finite domain (a marginal `P_X`).
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    weights: Vec<f64>,
}

impl Marginal {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_mass(weights.iter().copied())?;
        Ok(Marginal { weights })
    }

    pub fn uniform(size: usize) -> Self {
        Marginal {
            weights: vec![1.0 / size as f64; size],
        }
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Points with positive mass, ascending.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| (x, w))
    }
}

fn check_mass(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is not a finite nonnegative value"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Finite-support distribution over `domain x {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDistribution {
    weights: Vec<[f64; 2]>,
}

impl LabeledDistribution {
    /// `weights[x][y]` is the mass of `(x, y)`.
    pub fn new(weights: Vec<[f64; 2]>) -> Result<Self> {
        check_mass(weights.iter().flatten().copied())?;
        Ok(LabeledDistribution { weights })
    }

    /// Accumulates `(point, label, mass)` triples over a domain of `size`.
    pub fn from_support(size: usize, items: &[(usize, bool, f64)]) -> Result<Self> {
        let mut weights = vec![[0.0; 2]; size];
        for &(x, y, w) in items {
            if x >= size {
                return Err(Error::PointOutOfRange { index: x, size });
            }
            weights[x][usize::from(y)] += w;
        }
        Self::new(weights)
    }

    /// Uniform marginal with deterministic labels.
    pub fn uniform_labeled(labels: &[bool]) -> Result<Self> {
        let w = 1.0 / labels.len() as f64;
        Self::new(
            labels
                .iter()
                .map(|&y| if y { [0.0, w] } else { [w, 0.0] })
                .collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, x: usize, y: bool) -> f64 {
        self.weights[x][usize::from(y)]
    }

    pub fn weights(&self) -> &[[f64; 2]] {
        &self.weights
    }

    pub fn marginal(&self) -> Marginal {
        Marginal {
            weights: self.weights.iter().map(|w| w[0] + w[1]).collect(),
        }
    }

    /// `P[y = 1 | x]`, or `None` where the marginal vanishes.
    pub fn eta(&self, x: usize) -> Option<f64> {
        let [w0, w1] = self.weights[x];
        let total = w0 + w1;
        (total > 0.0).then(|| w1 / total)
    }

    pub fn is_deterministic(&self) -> bool {
        self.weights.iter().all(|w| w[0] == 0.0 || w[1] == 0.0)
    }

    pub fn label_mass(&self, y: bool) -> f64 {
        self.weights.iter().map(|w| w[usize::from(y)]).sum()
    }

    /// Labeled points with positive mass, ordered by point then label.
    pub fn support(&self) -> impl Iterator<Item = (usize, bool, f64)> + '_ {
        self.weights.iter().enumerate().flat_map(|(x, w)| {
            [(x, false, w[0]), (x, true, w[1])]
                .into_iter()
                .filter(|&(_, _, m)| m > 0.0)
        })
    }
}

/// Ordered sequence of labeled points.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledSample {
    items: Vec<(usize, bool)>,
}

impl LabeledSample {
    pub fn new(domain_size: usize, items: Vec<(usize, bool)>) -> Result<Self> {
        if let Some(&(x, _)) = items.iter().find(|(x, _)| *x >= domain_size) {
            return Err(Error::PointOutOfRange {
                index: x,
                size: domain_size,
            });
        }
        Ok(LabeledSample { items })
    }

    pub fn items(&self) -> &[(usize, bool)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|&(x, _)| x)
    }

    /// Occurrence counts per `(point, label)`.
    pub fn counts(&self, domain_size: usize) -> Vec<[usize; 2]> {
        let mut counts = vec![[0usize; 2]; domain_size];
        for &(x, y) in &self.items {
            counts[x][usize::from(y)] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line4() -> FiniteDomain {
        FiniteDomain::line(&[1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn distance_cost_on_line_gives_bidirectional_chain() {
        let d = line4();
        let cost = CostModel::from_coordinates(&d, Norm::L1, 1.0).unwrap();
        let g = induce_graph(&d, &cost).unwrap();
        assert_eq!(g, ManipulationGraph::chain(4, true));
    }

    #[test]
    fn zero_gamma_gives_empty_graph() {
        let d = line4();
        let cost = CostModel::from_coordinates(&d, Norm::L1, 0.0).unwrap();
        assert_eq!(induce_graph(&d, &cost).unwrap().edge_count(), 0);
    }

    #[test]
    fn l2_unit_ball_on_3x3_grid_is_lattice() {
        let d = FiniteDomain::grid(&[0.0, 1.0, 2.0], 2).unwrap();
        let cost = CostModel::from_coordinates(&d, Norm::L2, 1.0).unwrap();
        let g = induce_graph(&d, &cost).unwrap();
        // Brute-force pair enumeration over the 9 grid points.
        let c = d.coords().unwrap();
        let mut expected = 0;
        for x in 0..9 {
            for y in 0..9 {
                let dx = c[x][0] - c[y][0];
                let dy = c[x][1] - c[y][1];
                if x != y && (dx * dx + dy * dy).sqrt() <= 1.0 {
                    expected += 1;
                    assert!(g.has_edge(x, y));
                }
            }
        }
        assert_eq!(expected, 24);
        assert_eq!(g.edge_count(), 24);
    }

    #[test]
    fn non_finite_cost_rejected() {
        let d = FiniteDomain::new(3);
        let cost = CostModel::from_fn(3, 1.0, |x, y| if x == 0 && y == 2 { f64::NAN } else { 0.0 });
        assert!(matches!(induce_graph(&d, &cost), Err(Error::InvalidCostModel(_))));
        let cost = CostModel::from_fn(3, 1.0, |x, y| if x == y { 0.0 } else { f64::INFINITY });
        assert!(matches!(induce_graph(&d, &cost), Err(Error::InvalidCostModel(_))));
    }

    #[test]
    fn thresholds_on_four_points() {
        let class = enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, &line4()).unwrap();
        let bits: Vec<String> = class.iter().map(Hypothesis::bit_string).collect();
        assert_eq!(bits, ["0000", "0001", "0011", "0111", "1111"]);
        assert!(class.iter().all(|h| h.consistent_with(&line4())));
    }

    #[test]
    fn singletons_on_four_points() {
        let class = enumerate_class(&ClassFamily::Singletons { over: None }, &FiniteDomain::new(4)).unwrap();
        assert_eq!(class.len(), 4);
        for (j, h) in class.iter().enumerate() {
            assert_eq!(h.positives().collect::<Vec<_>>(), vec![j]);
        }
    }

    #[test]
    fn halfspaces_match_direct_sign_evaluation() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let d = FiniteDomain::with_coords(pts.clone()).unwrap();
        let axis = [-1.0, 0.0, 1.0];
        let family = ClassFamily::Halfspaces {
            weight_axis: axis.to_vec(),
            biases: axis.to_vec(),
        };
        let class = enumerate_class(&family, &d).unwrap();
        // Direct enumeration of every (w, b) on the grid.
        let mut expected = std::collections::BTreeSet::new();
        for &w0 in &axis {
            for &w1 in &axis {
                for &b in &axis {
                    let bits: String = pts
                        .iter()
                        .map(|p| if w0 * p[0] + w1 * p[1] + b >= 0.0 { '1' } else { '0' })
                        .collect();
                    expected.insert(bits);
                }
            }
        }
        let got: std::collections::BTreeSet<String> = class.iter().map(Hypothesis::bit_string).collect();
        assert_eq!(got, expected);
        assert_eq!(class.len(), expected.len());
    }

    #[test]
    fn coordinate_families_need_coordinates() {
        let d = FiniteDomain::new(3);
        assert_eq!(
            enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, &d),
            Err(Error::MissingCoordinates)
        );
    }

    #[test]
    fn neighbor_queries() {
        let chain = ManipulationGraph::chain(4, false);
        // Point 2 of {1..4} is index 1.
        assert_eq!(chain.neighbors(1), &[2]);
        assert!(ManipulationGraph::empty(4).neighbors(2).is_empty());
        assert_eq!(ManipulationGraph::complete(5).neighbors(0), &[1, 2, 3, 4]);
    }

    #[test]
    fn self_loops_and_duplicates_dropped() {
        let g = ManipulationGraph::from_edges(3, [(0, 0), (0, 2), (0, 1), (0, 2)]).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
    }

    #[test]
    fn distribution_checks() {
        assert!(LabeledDistribution::new(vec![[0.5, 0.0], [0.0, 0.4]]).is_err());
        assert!(LabeledDistribution::new(vec![[0.5, -0.1], [0.0, 0.6]]).is_err());
        let p = LabeledDistribution::new(vec![[0.25, 0.25], [0.0, 0.5], [0.0, 0.0]]).unwrap();
        assert_eq!(p.eta(0), Some(0.5));
        assert_eq!(p.eta(1), Some(1.0));
        assert_eq!(p.eta(2), None);
        assert!(!p.is_deterministic());
        assert_eq!(p.support().count(), 3);
    }

    #[test]
    fn labeled_sample_validates_points() {
        assert!(LabeledSample::new(2, vec![(0, true), (2, false)]).is_err());
    }
}
