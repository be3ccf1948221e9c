//! Set systems, shattering and brute-force VC dimension, plus the loss
//! classes whose VC dimensions govern learnability under each loss.

use std::fmt;

use crate::domain::{Hypothesis, HypothesisClass, ManipulationGraph};
use crate::error::{Error, Result};
use crate::graphdist::graph_loss;
use crate::losses::LossKind;

/// Default largest ground set `vc_dimension` accepts.
pub const DEFAULT_GROUND_LIMIT: usize = 40;
/// Default search cap.
pub const DEFAULT_CAP: usize = 6;
/// Largest candidate `is_shattered` accepts.
pub const MAX_CANDIDATE: usize = 30;

/// A family of subsets of an ordered ground set. Sets are sorted index lists
/// into `ground`; identical sets are stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSystem<T> {
    ground: Vec<T>,
    sets: Vec<Vec<usize>>,
}

impl<T> SetSystem<T> {
    pub fn new(ground: Vec<T>, sets: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let m = ground.len();
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for mut s in sets {
            s.sort_unstable();
            s.dedup();
            if let Some(&bad) = s.iter().find(|&&e| e >= m) {
                return Err(Error::PointOutOfRange { index: bad, size: m });
            }
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
        Ok(SetSystem { ground, sets: out })
    }

    pub fn ground(&self) -> &[T] {
        &self.ground
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    fn membership(&self) -> Membership {
        Membership::new(self.ground.len(), &self.sets)
    }
}

/// Row-major `sets x ground` membership matrix.
struct Membership {
    width: usize,
    rows: usize,
    bits: Vec<bool>,
}

impl Membership {
    fn new(width: usize, sets: &[Vec<usize>]) -> Self {
        let mut bits = vec![false; width * sets.len()];
        for (i, s) in sets.iter().enumerate() {
            for &e in s {
                bits[i * width + e] = true;
            }
        }
        Membership {
            width,
            rows: sets.len(),
            bits,
        }
    }

    fn contains(&self, set: usize, e: usize) -> bool {
        self.bits[set * self.width + e]
    }

    fn shatters(&self, candidate: &[usize]) -> bool {
        let k = candidate.len();
        if k >= usize::BITS as usize || (1usize << k) > self.rows {
            return k == 0 && self.rows > 0;
        }
        let needed = 1usize << k;
        let mut seen = vec![false; needed];
        let mut found = 0;
        for s in 0..self.rows {
            let mut code = 0usize;
            for (bit, &e) in candidate.iter().enumerate() {
                if self.contains(s, e) {
                    code |= 1 << bit;
                }
            }
            if !seen[code] {
                seen[code] = true;
                found += 1;
                if found == needed {
                    return true;
                }
            }
        }
        false
    }
}

/// True iff every subset of `candidate` is the trace of some set.
pub fn is_shattered<T>(sys: &SetSystem<T>, candidate: &[usize]) -> Result<bool> {
    let mut c = candidate.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.len() > MAX_CANDIDATE {
        return Err(Error::Capacity(format!(
            "candidate of {} elements exceeds the shattering limit of {MAX_CANDIDATE}",
            c.len()
        )));
    }
    if let Some(&bad) = c.iter().find(|&&e| e >= sys.ground.len()) {
        return Err(Error::PointOutOfRange {
            index: bad,
            size: sys.ground.len(),
        });
    }
    Ok(sys.membership().shatters(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcDimension {
    /// `-1` for the empty system.
    Exact(i64),
    /// The search stopped at the cap with a shattered set of that size.
    AtLeast(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcReport {
    pub dimension: VcDimension,
    /// Lexicographically smallest shattered set of the largest size found,
    /// as indices into the ground set.
    pub witness: Vec<usize>,
}

impl VcReport {
    pub fn is_exact(&self) -> bool {
        matches!(self.dimension, VcDimension::Exact(_))
    }

    /// The exact value, or the certified lower bound when capped.
    pub fn lower_bound(&self) -> i64 {
        match self.dimension {
            VcDimension::Exact(d) => d,
            VcDimension::AtLeast(d) => d as i64,
        }
    }
}

impl fmt::Display for VcDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VcDimension::Exact(d) => write!(f, "{d}"),
            VcDimension::AtLeast(d) => write!(f, ">={d}"),
        }
    }
}

pub fn vc_dimension<T>(sys: &SetSystem<T>, cap: usize) -> Result<VcReport> {
    vc_dimension_with_limit(sys, cap, DEFAULT_GROUND_LIMIT)
}

/// Brute-force VC dimension. Sizes are tried in ascending order and the
/// search stops at the first size with no shattered set, or at `cap`.
///
/// Candidates of size `k` are enumerated lexicographically as extensions of
/// shattered prefixes (subsets of shattered sets are shattered), and only
/// elements that separate at least two sets are considered.
pub fn vc_dimension_with_limit<T>(sys: &SetSystem<T>, cap: usize, ground_limit: usize) -> Result<VcReport> {
    if sys.ground.len() > ground_limit {
        return Err(Error::Capacity(format!(
            "ground set has {} elements, brute-force limit is {ground_limit}; \
             shrink the domain or raise the limit explicitly",
            sys.ground.len()
        )));
    }
    if sys.is_empty() {
        return Ok(VcReport {
            dimension: VcDimension::Exact(-1),
            witness: Vec::new(),
        });
    }
    let member = sys.membership();
    let useful: Vec<usize> = (0..sys.ground.len())
        .filter(|&e| {
            let hits = (0..member.rows).filter(|&s| member.contains(s, e)).count();
            hits > 0 && hits < member.rows
        })
        .collect();
    let mut witness = Vec::new();
    for k in 1..=cap {
        if k > useful.len() || k >= usize::BITS as usize || (1usize << k) > member.rows {
            return Ok(VcReport {
                dimension: VcDimension::Exact(k as i64 - 1),
                witness,
            });
        }
        let mut prefix = Vec::with_capacity(k);
        match first_shattered(&member, &useful, 0, k, &mut prefix) {
            Some(w) => witness = w,
            None => {
                return Ok(VcReport {
                    dimension: VcDimension::Exact(k as i64 - 1),
                    witness,
                })
            }
        }
    }
    Ok(VcReport {
        dimension: VcDimension::AtLeast(cap),
        witness,
    })
}

fn first_shattered(
    member: &Membership,
    useful: &[usize],
    start: usize,
    k: usize,
    prefix: &mut Vec<usize>,
) -> Option<Vec<usize>> {
    if prefix.len() == k {
        return Some(prefix.clone());
    }
    let remaining = k - prefix.len();
    for i in start..=useful.len().saturating_sub(remaining) {
        if i >= useful.len() {
            break;
        }
        prefix.push(useful[i]);
        if member.shatters(prefix) {
            if let Some(w) = first_shattered(member, useful, i + 1, k, prefix) {
                return Some(w);
            }
        }
        prefix.pop();
    }
    None
}

/// Ground element of a loss class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossElement {
    Labeled { x: usize, y: bool },
    Point(usize),
}

impl fmt::Display for LossElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossElement::Labeled { x, y } => write!(f, "({x},{})", u8::from(*y)),
            LossElement::Point(x) => write!(f, "{x}"),
        }
    }
}

/// Index of `(x, y)` in the labeled ground `X x Y`.
pub fn labeled_index(x: usize, y: bool) -> usize {
    2 * x + usize::from(y)
}

pub fn labeled_ground(n: usize) -> Vec<LossElement> {
    (0..n)
        .flat_map(|x| [LossElement::Labeled { x, y: false }, LossElement::Labeled { x, y: true }])
        .collect()
}

pub fn point_ground(n: usize) -> Vec<LossElement> {
    (0..n).map(LossElement::Point).collect()
}

/// Elements where `h` suffers loss 1: indices into `X x Y` (see
/// [`labeled_index`]) for the binary and strategic losses, into `X` for the
/// component loss.
pub fn loss_set(h: &Hypothesis, kind: LossKind<'_>) -> Vec<usize> {
    let n = h.size();
    match kind {
        LossKind::Component(_) => (0..n).filter(|&x| kind.eval(h, x, false)).collect(),
        _ => (0..n)
            .flat_map(|x| [(x, false), (x, true)])
            .filter(|&(x, y)| kind.eval(h, x, y))
            .map(|(x, y)| labeled_index(x, y))
            .collect(),
    }
}

/// Places a component loss set over `X` into `X x Y` under both labels.
pub fn lift_to_labeled(points: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = points
        .iter()
        .flat_map(|&x| [labeled_index(x, false), labeled_index(x, true)])
        .collect();
    out.sort_unstable();
    out
}

pub fn loss_class(class: &HypothesisClass, kind: LossKind<'_>) -> SetSystem<LossElement> {
    let n = class.domain_size().unwrap_or(0);
    let ground = match kind {
        LossKind::Component(g) => point_ground(g.size().max(n)),
        LossKind::Strategic(g) => labeled_ground(g.size().max(n)),
        LossKind::Binary => labeled_ground(n),
    };
    SetSystem::new(ground, class.iter().map(|h| loss_set(h, kind)))
        .expect("loss sets index a ground built from the same domain")
}

/// The class itself as subsets of `X` (positive sets), so that its VC
/// dimension is the usual VC dimension of `H`.
pub fn hypothesis_system(class: &HypothesisClass) -> SetSystem<usize> {
    let n = class.domain_size().unwrap_or(0);
    SetSystem::new((0..n).collect(), class.iter().map(|h| h.positives().collect()))
        .expect("positive sets index the domain")
}

/// One set per `(h, candidate)` pair: the ground pairs `(x, B)` on which the
/// graph loss is 1.
pub fn graph_loss_class(
    class: &HypothesisClass,
    graphs: &[ManipulationGraph],
    ground_pairs: Vec<(usize, Vec<usize>)>,
) -> Result<SetSystem<(usize, Vec<usize>)>> {
    if ground_pairs.is_empty() {
        return Err(Error::InvalidParameter("graph loss class needs a nonempty ground".into()));
    }
    let n = class.domain_size().unwrap_or(0);
    for g in graphs {
        if g.size() != n && !class.is_empty() {
            return Err(Error::DomainMismatch {
                expected: n,
                found: g.size(),
            });
        }
    }
    for (x, b) in &ground_pairs {
        if let Some(&bad) = std::iter::once(x).chain(b).find(|&&p| p >= n) {
            return Err(Error::PointOutOfRange { index: bad, size: n });
        }
    }
    let mut sets = Vec::with_capacity(class.len() * graphs.len());
    for h in class {
        for g in graphs {
            sets.push(
                ground_pairs
                    .iter()
                    .enumerate()
                    .filter(|(_, (x, b))| graph_loss(h, g, *x, b))
                    .map(|(i, _)| i)
                    .collect(),
            );
        }
    }
    SetSystem::new(ground_pairs, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enumerate_class, ClassFamily, FiniteDomain};

    fn line(n: usize) -> FiniteDomain {
        FiniteDomain::line(&(1..=n).map(|v| v as f64).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn binary_loss_set_is_complement() {
        let h = Hypothesis::from_labels(vec![true, false, true]);
        assert_eq!(loss_set(&h, LossKind::Binary), vec![labeled_index(0, false), labeled_index(1, true), labeled_index(2, false)]);
    }

    #[test]
    fn strategic_loss_set_on_empty_graph_is_binary() {
        let g = ManipulationGraph::empty(4);
        let class = enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, &line(4)).unwrap();
        for h in &class {
            assert_eq!(loss_set(h, LossKind::Strategic(&g)), loss_set(h, LossKind::Binary));
        }
    }

    #[test]
    fn thresholds_have_vc_one() {
        let class = enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, &line(5)).unwrap();
        let r = vc_dimension(&loss_class(&class, LossKind::Binary), DEFAULT_CAP).unwrap();
        assert_eq!(r.dimension, VcDimension::Exact(1));
        assert_eq!(vc_dimension(&hypothesis_system(&class), DEFAULT_CAP).unwrap().dimension, VcDimension::Exact(1));
    }

    #[test]
    fn edge_cases() {
        let empty: SetSystem<usize> = SetSystem::new(vec![0, 1], Vec::<Vec<usize>>::new()).unwrap();
        assert_eq!(vc_dimension(&empty, 3).unwrap().dimension, VcDimension::Exact(-1));
        let single = SetSystem::new(vec![0, 1], vec![vec![0]]).unwrap();
        assert_eq!(vc_dimension(&single, 3).unwrap().dimension, VcDimension::Exact(0));
        assert!(is_shattered(&single, &[]).unwrap());
        // Elements 0 and 1 always co-occur.
        let tied = SetSystem::new(vec![0, 1, 2], vec![vec![0, 1], vec![2], vec![0, 1, 2], vec![]]).unwrap();
        assert!(!is_shattered(&tied, &[0, 1]).unwrap());
        assert!(is_shattered(&tied, &[0, 2]).unwrap());
    }

    #[test]
    fn capacity_errors() {
        let big = SetSystem::new((0..41).collect::<Vec<usize>>(), vec![vec![0]]).unwrap();
        assert!(matches!(vc_dimension(&big, 2), Err(Error::Capacity(_))));
        assert!(matches!(is_shattered(&big, &(0..31).collect::<Vec<_>>()), Err(Error::Capacity(_))));
    }

    #[test]
    fn cap_reports_lower_bound() {
        // Power set of 3 elements.
        let sets: Vec<Vec<usize>> = (0..8u32).map(|m| (0..3).filter(|&i| m & (1 << i) != 0).collect()).collect();
        let sys = SetSystem::new(vec![0, 1, 2], sets).unwrap();
        assert_eq!(vc_dimension(&sys, 2).unwrap().dimension, VcDimension::AtLeast(2));
        let full = vc_dimension(&sys, 6).unwrap();
        assert_eq!(full.dimension, VcDimension::Exact(3));
        assert_eq!(full.witness, vec![0, 1, 2]);
    }

    #[test]
    fn complete_graph_component_sets_are_zero_sets() {
        let g = ManipulationGraph::complete(4);
        let class = HypothesisClass::new([
            Hypothesis::from_labels(vec![false, true, true, false]),
            Hypothesis::from_labels(vec![false; 4]),
        ])
        .unwrap();
        let sys = loss_class(&class, LossKind::Component(&g));
        assert_eq!(sys.sets(), &[vec![0, 3], vec![]]);
        let empty = loss_class(&HypothesisClass::default(), LossKind::Component(&g));
        assert!(empty.is_empty());
    }

    #[test]
    fn graph_loss_class_vanishes_on_true_graph() {
        let g = ManipulationGraph::chain(4, false);
        let class = enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, &line(4)).unwrap();
        let ground: Vec<(usize, Vec<usize>)> = (0..4).map(|x| (x, g.neighbors(x).to_vec())).collect();
        let sys = graph_loss_class(&class, std::slice::from_ref(&g), ground).unwrap();
        assert_eq!(sys.sets(), &[Vec::<usize>::new()]);
    }
}
