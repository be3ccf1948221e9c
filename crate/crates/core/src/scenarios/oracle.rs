//! Direct-definition reference computations.
//!
//! Nothing here calls the loss, distance or VC code paths it is used to
//! check. Inputs are plain label vectors, adjacency matrices and weight
//! tables; the only shared piece is the extraction of those tables.

#![allow(clippy::needless_range_loop)]

use crate::domain::{HypothesisClass, LabeledDistribution, ManipulationGraph};
use crate::error::{Error, Result};

/// Largest ground set the exhaustive VC oracle accepts.
pub const ORACLE_GROUND_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleLoss {
    Binary,
    Strategic,
    Component,
}

pub fn adjacency_matrix(g: &ManipulationGraph) -> Vec<Vec<bool>> {
    let n = g.size();
    let mut m = vec![vec![false; n]; n];
    for (x, y) in g.edges() {
        m[x][y] = true;
    }
    m
}

pub fn class_labels(class: &HypothesisClass) -> Vec<Vec<bool>> {
    class.iter().map(|h| h.labels().to_vec()).collect()
}

pub fn weight_table(p: &LabeledDistribution) -> Vec<[f64; 2]> {
    p.weights().to_vec()
}

fn manipulable(labels: &[bool], adj: &[Vec<bool>], x: usize) -> bool {
    let mut reach_positive = false;
    for (t, &edge) in adj[x].iter().enumerate() {
        if edge && labels[t] {
            reach_positive = true;
        }
    }
    !labels[x] && reach_positive
}

/// Pointwise loss by case analysis.
pub fn oracle_pointwise(kind: OracleLoss, labels: &[bool], adj: &[Vec<bool>], x: usize, y: bool) -> bool {
    let misclassified = labels[x] != y;
    let incentive = manipulable(labels, adj, x);
    match kind {
        OracleLoss::Binary => misclassified,
        OracleLoss::Strategic => {
            if misclassified {
                true
            } else {
                incentive
            }
        }
        OracleLoss::Component => incentive,
    }
}

/// Sum of weight times loss over every labeled point, zero-mass included.
pub fn oracle_expected_loss(kind: OracleLoss, labels: &[bool], adj: &[Vec<bool>], weights: &[[f64; 2]]) -> f64 {
    let mut total = 0.0;
    for x in 0..labels.len() {
        if kind == OracleLoss::Component {
            let marginal = weights[x][0] + weights[x][1];
            if oracle_pointwise(kind, labels, adj, x, false) {
                total += marginal;
            }
            continue;
        }
        for (yi, y) in [false, true].into_iter().enumerate() {
            if oracle_pointwise(kind, labels, adj, x, y) {
                total += weights[x][yi];
            }
        }
    }
    total
}

/// Graph loss written as its two cases.
pub fn oracle_graph_loss(labels: &[bool], cand_adj: &[Vec<bool>], x: usize, observed: &[usize]) -> bool {
    if labels[x] {
        return false;
    }
    let some_observed_positive = observed.iter().any(|&p| labels[p]);
    let all_observed_negative = observed.iter().all(|&p| !labels[p]);
    let candidates: Vec<usize> = (0..labels.len()).filter(|&t| cand_adj[x][t]).collect();
    let all_candidate_negative = candidates.iter().all(|&t| !labels[t]);
    let some_candidate_positive = candidates.iter().any(|&t| labels[t]);
    let missed = some_observed_positive && all_candidate_negative;
    let spurious = all_observed_negative && some_candidate_positive;
    missed || spurious
}

pub fn oracle_true_graph_loss(labels: &[bool], cand_adj: &[Vec<bool>], true_adj: &[Vec<bool>], marginal: &[f64]) -> f64 {
    let mut total = 0.0;
    for x in 0..labels.len() {
        let observed: Vec<usize> = (0..labels.len()).filter(|&t| true_adj[x][t]).collect();
        if oracle_graph_loss(labels, cand_adj, x, &observed) {
            total += marginal[x];
        }
    }
    total
}

/// Max over the class of the expected absolute component-loss difference.
pub fn oracle_hpx_distance(class: &[Vec<bool>], adj1: &[Vec<bool>], adj2: &[Vec<bool>], marginal: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for labels in class {
        let mut total = 0.0;
        for x in 0..labels.len() {
            let a = f64::from(u8::from(oracle_pointwise(OracleLoss::Component, labels, adj1, x, false)));
            let b = f64::from(u8::from(oracle_pointwise(OracleLoss::Component, labels, adj2, x, false)));
            total += marginal[x] * (a - b).abs();
        }
        if total > best {
            best = total;
        }
    }
    best
}

/// VC dimension by testing every subset of the ground set. `membership[s][e]`
/// says whether element `e` is in set `s`. Returns `-1` for no sets.
pub fn oracle_vc(membership: &[Vec<bool>], ground: usize) -> Result<i64> {
    if ground > ORACLE_GROUND_LIMIT {
        return Err(Error::Capacity(format!(
            "exhaustive oracle supports at most {ORACLE_GROUND_LIMIT} ground elements, got {ground}"
        )));
    }
    if membership.is_empty() {
        return Ok(-1);
    }
    let mut best = 0i64;
    for subset in 0u32..(1u32 << ground) {
        let elems: Vec<usize> = (0..ground).filter(|&e| subset & (1 << e) != 0).collect();
        let k = elems.len();
        if (k as i64) <= best {
            continue;
        }
        let mut traces = std::collections::HashSet::new();
        for set in membership {
            let trace: Vec<bool> = elems.iter().map(|&e| set[e]).collect();
            traces.insert(trace);
        }
        if traces.len() == 1 << k {
            best = k as i64;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vc_of_thresholds_on_five_points() {
        let membership: Vec<Vec<bool>> = (0..=5).map(|k| (0..5).map(|x| x >= k).collect()).collect();
        assert_eq!(oracle_vc(&membership, 5).unwrap(), 1);
        assert_eq!(oracle_vc(&[], 3).unwrap(), -1);
        assert!(oracle_vc(&membership, 21).is_err());
    }
}
