//! Graph loss, class-relative distances between manipulation graphs, the
//! surrogate-loss bounds under an approximate graph, and graph ERM.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::domain::{Hypothesis, HypothesisClass, LabeledDistribution, ManipulationGraph, Marginal};
use crate::error::{Error, Result};
use crate::learners::draw_points;
use crate::losses::{expected_loss, strategic_component_loss, LossKind};

/// Slack allowed on the bound inequalities to absorb float summation error.
pub const BOUND_SLACK: f64 = 1e-12;

/// 1 iff `h(x) = 0` and exactly one of the observed neighbor set `b` and the
/// candidate's successors of `x` contains a point labeled 1.
pub fn graph_loss(h: &Hypothesis, cand: &ManipulationGraph, x: usize, b: &[usize]) -> bool {
    if h.label(x) {
        return false;
    }
    let observed = b.iter().any(|&p| h.label(p));
    let predicted = cand.neighbors(x).iter().any(|&p| h.label(p));
    observed != predicted
}

/// Sequence of `(point, observed neighbor set)` pairs. Neighbor sets are
/// sorted, deduplicated and never contain their point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphSample {
    items: Vec<(usize, Vec<usize>)>,
}

impl GraphSample {
    pub fn new(domain_size: usize, items: Vec<(usize, Vec<usize>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(items.len());
        for (x, mut b) in items {
            if let Some(&bad) = std::iter::once(&x).chain(&b).find(|&&p| p >= domain_size) {
                return Err(Error::PointOutOfRange {
                    index: bad,
                    size: domain_size,
                });
            }
            b.retain(|&p| p != x);
            b.sort_unstable();
            b.dedup();
            out.push((x, b));
        }
        Ok(GraphSample { items: out })
    }

    /// Pairs each point with its successor set in `g`.
    pub fn from_graph(g: &ManipulationGraph, points: impl IntoIterator<Item = usize>) -> Self {
        GraphSample {
            items: points.into_iter().map(|x| (x, g.neighbors(x).to_vec())).collect(),
        }
    }

    /// `n` i.i.d. points from `marginal`, labeled with their successors in
    /// `g`.
    pub fn draw(g: &ManipulationGraph, marginal: &Marginal, n: usize, seed: u64) -> Self {
        Self::from_graph(g, draw_points(marginal, n, seed))
    }

    pub fn items(&self) -> &[(usize, Vec<usize>)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Distinct items with multiplicities, in ascending item order.
    pub fn tally(&self) -> Vec<(&(usize, Vec<usize>), usize)> {
        let mut counts: BTreeMap<&(usize, Vec<usize>), usize> = BTreeMap::new();
        for item in &self.items {
            *counts.entry(item).or_default() += 1;
        }
        counts.into_iter().collect()
    }

    /// One record per line: `point<TAB>comma-separated neighbors`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (x, b) in &self.items {
            let list: Vec<String> = b.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{x}\t{}", list.join(","));
        }
        out
    }

    pub fn parse_tsv(text: &str, domain_size: usize) -> Result<Self> {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let (point, rest) = line.split_once('\t').unwrap_or((line, ""));
            let parse = |s: &str| -> Result<usize> {
                s.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad index '{s}': {e}"),
                })
            };
            let x = parse(point)?;
            let b = if rest.trim().is_empty() {
                Vec::new()
            } else {
                rest.split(',').map(parse).collect::<Result<Vec<_>>>()?
            };
            if b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse {
                    line: line_no,
                    message: "neighbor indices must be strictly ascending".into(),
                });
            }
            if b.contains(&x) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("neighbor set of {x} contains the point itself"),
                });
            }
            items.push((x, b));
        }
        Self::new(domain_size, items).map_err(|e| match e {
            Error::PointOutOfRange { index, size } => Error::Parse {
                line: 0,
                message: format!("index {index} out of range for domain of size {size}"),
            },
            other => other,
        })
    }
}

/// Candidate graphs, deduplicated by edge set, in construction order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphClass {
    members: Vec<ManipulationGraph>,
}

impl GraphClass {
    pub fn new(graphs: impl IntoIterator<Item = ManipulationGraph>) -> Result<Self> {
        let mut members: Vec<ManipulationGraph> = Vec::new();
        for g in graphs {
            if let Some(first) = members.first() {
                if first.size() != g.size() {
                    return Err(Error::DomainMismatch {
                        expected: first.size(),
                        found: g.size(),
                    });
                }
            }
            if !members.contains(&g) {
                members.push(g);
            }
        }
        Ok(GraphClass { members })
    }

    pub fn members(&self) -> &[ManipulationGraph] {
        &self.members
    }

    pub fn get(&self, i: usize) -> &ManipulationGraph {
        &self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, g: &ManipulationGraph) -> Option<usize> {
        self.members.iter().position(|m| m == g)
    }
}

fn check_same(n: usize, found: usize) -> Result<()> {
    if n == found {
        Ok(())
    } else {
        Err(Error::DomainMismatch { expected: n, found })
    }
}

/// Expected graph loss of `(h, cand)` against the true successor sets.
pub fn true_graph_loss(h: &Hypothesis, cand: &ManipulationGraph, px: &Marginal, true_g: &ManipulationGraph) -> Result<f64> {
    let n = px.size();
    check_same(n, h.size())?;
    check_same(n, cand.size())?;
    check_same(n, true_g.size())?;
    Ok(px
        .support()
        .filter(|&(x, _)| graph_loss(h, cand, x, true_g.neighbors(x)))
        .map(|(_, w)| w)
        .sum())
}

/// Number of sample items with graph loss 1.
pub fn empirical_graph_loss_count(h: &Hypothesis, cand: &ManipulationGraph, s: &GraphSample) -> usize {
    s.items().iter().filter(|(x, b)| graph_loss(h, cand, *x, b)).count()
}

/// Mean graph loss over the sample.
pub fn empirical_graph_loss(h: &Hypothesis, cand: &ManipulationGraph, s: &GraphSample) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(empirical_graph_loss_count(h, cand, s) as f64 / s.len() as f64)
}

/// `sup_h E|component loss under g1 - component loss under g2|`, exact over
/// the finite class.
pub fn hpx_distance(g1: &ManipulationGraph, g2: &ManipulationGraph, class: &HypothesisClass, px: &Marginal) -> Result<f64> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let n = px.size();
    check_same(n, g1.size())?;
    check_same(n, g2.size())?;
    let mut best = 0.0f64;
    for h in class {
        check_same(n, h.size())?;
        let v: f64 = px
            .support()
            .filter(|&(x, _)| strategic_component_loss(h, x, g1) != strategic_component_loss(h, x, g2))
            .map(|(_, w)| w)
            .sum();
        best = best.max(v);
    }
    Ok(best)
}

/// `max_h` of the raw count of graph-loss hits; the reference graph is the
/// one the sample's neighbor sets were drawn from.
pub fn empirical_distance_count(cand: &ManipulationGraph, class: &HypothesisClass, s: &GraphSample) -> Result<usize> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let tally = s.tally();
    Ok(class
        .iter()
        .map(|h| {
            tally
                .iter()
                .filter(|((x, b), _)| graph_loss(h, cand, *x, b))
                .map(|(_, c)| c)
                .sum::<usize>()
        })
        .max()
        .unwrap_or(0))
}

/// Empirical class-relative distance, normalized by the sample size.
pub fn empirical_distance(cand: &ManipulationGraph, class: &HypothesisClass, s: &GraphSample) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(empirical_distance_count(cand, class, s)? as f64 / s.len() as f64)
}

/// Every term of the surrogate bounds for one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateBoundReport {
    /// Strategic loss under the true graph.
    pub true_strategic: f64,
    pub binary: f64,
    /// Component loss under the candidate graph.
    pub surrogate_component: f64,
    /// Strategic loss under the candidate graph.
    pub surrogate_strategic: f64,
    pub distance: f64,
    /// `binary + surrogate_component + distance`.
    pub upper1: f64,
    /// `2 * surrogate_strategic + distance`.
    pub upper2: f64,
    /// `surrogate_strategic / 2 - distance`.
    pub lower: f64,
    /// `(surrogate_strategic - distance) / 2`, reported but not asserted.
    pub lower_tight: f64,
}

impl SurrogateBoundReport {
    /// Names of the inequalities violated by more than `slack`.
    pub fn violations(&self, slack: f64) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.true_strategic > self.upper1 + slack {
            out.push("true_strategic <= upper1");
        }
        if self.upper1 > self.upper2 + slack {
            out.push("upper1 <= upper2");
        }
        if self.lower > self.true_strategic + slack {
            out.push("lower <= true_strategic");
        }
        out
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.violations(slack).is_empty()
    }
}

pub fn surrogate_bounds(
    h: &Hypothesis,
    true_g: &ManipulationGraph,
    cand: &ManipulationGraph,
    class: &HypothesisClass,
    p: &LabeledDistribution,
) -> Result<SurrogateBoundReport> {
    if class.position(h).is_none() {
        return Err(Error::NotInClass);
    }
    let true_strategic = expected_loss(LossKind::Strategic(true_g), h, p)?;
    let binary = expected_loss(LossKind::Binary, h, p)?;
    let surrogate_component = expected_loss(LossKind::Component(cand), h, p)?;
    let surrogate_strategic = expected_loss(LossKind::Strategic(cand), h, p)?;
    let distance = hpx_distance(true_g, cand, class, &p.marginal())?;
    Ok(SurrogateBoundReport {
        true_strategic,
        binary,
        surrogate_component,
        surrogate_strategic,
        distance,
        upper1: binary + surrogate_component + distance,
        upper2: 2.0 * surrogate_strategic + distance,
        lower: 0.5 * surrogate_strategic - distance,
        lower_tight: 0.5 * (surrogate_strategic - distance),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphErmOutput {
    /// Index of the selected candidate in the graph class.
    pub index: usize,
    pub empirical_distance: f64,
    /// Number of candidates attaining the minimum.
    pub tie_count: usize,
}

/// Candidate minimizing the empirical distance to the graph behind the
/// sample; ties go to the lowest index.
pub fn graph_erm(graphs: &GraphClass, class: &HypothesisClass, s: &GraphSample) -> Result<GraphErmOutput> {
    if graphs.is_empty() {
        return Err(Error::EmptyGraphClass);
    }
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let counts: Vec<usize> = graphs
        .members()
        .iter()
        .map(|g| empirical_distance_count(g, class, s))
        .collect::<Result<_>>()?;
    let best = *counts.iter().min().expect("nonempty graph class");
    let index = counts.iter().position(|&c| c == best).expect("minimum is attained");
    Ok(GraphErmOutput {
        index,
        empirical_distance: best as f64 / s.len() as f64,
        tie_count: counts.iter().filter(|&&c| c == best).count(),
    })
}
