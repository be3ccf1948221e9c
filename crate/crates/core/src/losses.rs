//! Pointwise losses and their exact expected and empirical evaluators.

use std::collections::VecDeque;

use crate::domain::{CostModel, Hypothesis, HypothesisClass, LabeledDistribution, LabeledSample, ManipulationGraph};
use crate::error::{Error, Result};

/// Which pointwise loss to evaluate. The strategic variants borrow the graph
/// they are measured against.
#[derive(Debug, Clone, Copy)]
pub enum LossKind<'g> {
    Binary,
    Strategic(&'g ManipulationGraph),
    /// Label-free component: `h(x) = 0` with a positively labeled successor.
    Component(&'g ManipulationGraph),
}

impl LossKind<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Binary => "binary",
            LossKind::Strategic(_) => "strategic",
            LossKind::Component(_) => "component",
        }
    }

    fn graph(&self) -> Option<&ManipulationGraph> {
        match self {
            LossKind::Binary => None,
            LossKind::Strategic(g) | LossKind::Component(g) => Some(g),
        }
    }

    /// Pointwise value in `{0, 1}`. The component loss ignores `y`.
    pub fn eval(&self, h: &Hypothesis, x: usize, y: bool) -> bool {
        match self {
            LossKind::Binary => binary_loss(h, x, y),
            LossKind::Strategic(g) => strategic_loss(h, x, y, g),
            LossKind::Component(g) => strategic_component_loss(h, x, g),
        }
    }
}

pub fn binary_loss(h: &Hypothesis, x: usize, y: bool) -> bool {
    h.label(x) != y
}

/// Misclassified, or labeled 0 while some successor is labeled 1. The two
/// cases may both hold.
pub fn strategic_loss(h: &Hypothesis, x: usize, y: bool, g: &ManipulationGraph) -> bool {
    binary_loss(h, x, y) || strategic_component_loss(h, x, g)
}

pub fn strategic_component_loss(h: &Hypothesis, x: usize, g: &ManipulationGraph) -> bool {
    !h.label(x) && g.neighbors(x).iter().any(|&s| h.label(s))
}

fn check_sizes(h: &Hypothesis, kind: &LossKind<'_>, n: usize) -> Result<()> {
    if h.size() != n {
        return Err(Error::DomainMismatch {
            expected: n,
            found: h.size(),
        });
    }
    if let Some(g) = kind.graph() {
        if g.size() != n {
            return Err(Error::DomainMismatch {
                expected: n,
                found: g.size(),
            });
        }
    }
    Ok(())
}

/// Exact expectation under `p`. The component loss is taken over the
/// marginal.
pub fn expected_loss(kind: LossKind<'_>, h: &Hypothesis, p: &LabeledDistribution) -> Result<f64> {
    check_sizes(h, &kind, p.size())?;
    let total = match kind {
        LossKind::Component(g) => p
            .marginal()
            .support()
            .filter(|&(x, _)| strategic_component_loss(h, x, g))
            .map(|(_, w)| w)
            .sum(),
        _ => p
            .support()
            .filter(|&(x, y, _)| kind.eval(h, x, y))
            .map(|(_, _, w)| w)
            .sum(),
    };
    Ok(total)
}

pub fn empirical_loss(kind: LossKind<'_>, h: &Hypothesis, s: &LabeledSample) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    check_sizes(h, &kind, h.size())?;
    if let Some(x) = s.points().find(|&x| x >= h.size()) {
        return Err(Error::PointOutOfRange { index: x, size: h.size() });
    }
    let hits = s.items().iter().filter(|&&(x, y)| kind.eval(h, x, y)).count();
    Ok(hits as f64 / s.len() as f64)
}

/// Classification agents receive after best-responding: a point is labeled 1
/// if it already is, or if it can reach a point labeled 1.
pub fn effective_hypothesis(h: &Hypothesis, g: &ManipulationGraph) -> Hypothesis {
    let labels = (0..h.size())
        .map(|x| h.label(x) || g.neighbors(x).iter().any(|&s| h.label(s)))
        .collect();
    Hypothesis::from_labels(labels)
}

/// Where an agent at `x` ends up. Agents already labeled 1, or with no
/// positive successor, stay put. With a cost model the cheapest positive
/// successor wins, lowest index on ties; otherwise the lowest-index positive
/// successor.
pub fn best_response(h: &Hypothesis, x: usize, g: &ManipulationGraph, cost: Option<&CostModel>) -> usize {
    if h.label(x) {
        return x;
    }
    let positives = g.neighbors(x).iter().copied().filter(|&s| h.label(s));
    match cost {
        None => positives.min().unwrap_or(x),
        Some(c) => positives
            .min_by(|&a, &b| c.cost(x, a).total_cmp(&c.cost(x, b)).then(a.cmp(&b)))
            .unwrap_or(x),
    }
}

/// No point is incentivized to move; equivalently the effective hypothesis
/// equals `h`.
pub fn is_incentive_compatible(h: &Hypothesis, g: &ManipulationGraph) -> bool {
    (0..h.size()).all(|x| !strategic_component_loss(h, x, g))
}

/// A burden value; unreachable positives make it infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Burden {
    Finite(f64),
    Infinite,
}

impl Burden {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Burden::Infinite)
    }

    pub fn value(&self) -> f64 {
        match self {
            Burden::Finite(v) => *v,
            Burden::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialBurden {
    /// `E[min cost to a positive point | y = 1]`.
    pub conditional: Burden,
    /// `sum_x P(x, 1) * burden(x)`, the same expectation without dividing by
    /// `P(y = 1)`.
    pub unnormalized: Burden,
}

/// Expected cost truly positive points pay to be classified 1.
///
/// With a cost model the burden of `x` is `min cost(x, x')` over all points
/// `x'` labeled 1. Without one it is the shortest-path edge count in `g`.
pub fn social_burden(
    h: &Hypothesis,
    p: &LabeledDistribution,
    g: &ManipulationGraph,
    cost: Option<&CostModel>,
) -> Result<SocialBurden> {
    let n = p.size();
    if h.size() != n || g.size() != n {
        return Err(Error::DomainMismatch {
            expected: n,
            found: if h.size() != n { h.size() } else { g.size() },
        });
    }
    if let Some(c) = cost {
        if c.size() != n {
            return Err(Error::DomainMismatch {
                expected: n,
                found: c.size(),
            });
        }
        c.validate()?;
    }
    let positive_mass = p.label_mass(true);
    if positive_mass <= 0.0 {
        return Err(Error::UndefinedBurden);
    }
    let per_point: Vec<Option<f64>> = match cost {
        Some(c) => (0..n)
            .map(|x| {
                h.positives()
                    .map(|t| c.cost(x, t))
                    .min_by(f64::total_cmp)
            })
            .collect(),
        None => hop_distance_to_positive(h, g),
    };
    let mut numerator = 0.0;
    for (x, b) in per_point.iter().enumerate() {
        let w = p.weight(x, true);
        if w <= 0.0 {
            continue;
        }
        match *b {
            Some(b) => numerator += w * b,
            None => {
                return Ok(SocialBurden {
                    conditional: Burden::Infinite,
                    unnormalized: Burden::Infinite,
                })
            }
        }
    }
    Ok(SocialBurden {
        conditional: Burden::Finite(numerator / positive_mass),
        unnormalized: Burden::Finite(numerator),
    })
}

/// Multi-source BFS on the reversed graph from every positive point.
fn hop_distance_to_positive(h: &Hypothesis, g: &ManipulationGraph) -> Vec<Option<f64>> {
    let n = h.size();
    let mut preds = vec![Vec::new(); n];
    for (x, y) in g.edges() {
        preds[y].push(x);
    }
    let mut dist: Vec<Option<usize>> = vec![None; n];
    let mut queue = VecDeque::new();
    for t in h.positives() {
        dist[t] = Some(0);
        queue.push_back(t);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap_or(0);
        for &u in &preds[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist.into_iter().map(|d| d.map(|v| v as f64)).collect()
}

/// Best expected loss attainable in the class, with the lowest index that
/// attains it.
pub fn approximation_error(class: &HypothesisClass, p: &LabeledDistribution, kind: LossKind<'_>) -> Result<(f64, usize)> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let mut best = (f64::INFINITY, 0);
    for (i, h) in class.iter().enumerate() {
        let v = expected_loss(kind, h, p)?;
        if v < best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}
