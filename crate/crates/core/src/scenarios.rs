//! Runnable instances: the worked constructions from the strategic
//! classification literature, Appendix-style families with bounded
//! component VC dimension, and seeded random instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    enumerate_class, induce_graph, ClassFamily, CostModel, FiniteDomain, Hypothesis, HypothesisClass, LabeledDistribution,
    ManipulationGraph, Norm,
};
use crate::error::{Error, Result};
use crate::graphdist::GraphClass;
use crate::learners::rng;

pub mod oracle;

/// A domain with a graph, a class and a distribution over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub domain: FiniteDomain,
    pub graph: ManipulationGraph,
    /// Second graph for approximate-graph studies.
    pub alt_graph: Option<ManipulationGraph>,
    pub class: HypothesisClass,
    pub distribution: LabeledDistribution,
    pub graph_class: Option<GraphClass>,
    /// Names the construction and every parameter needed to regenerate it.
    pub provenance: String,
}

fn line_domain(values: impl Iterator<Item = f64>) -> FiniteDomain {
    FiniteDomain::line(&values.collect::<Vec<_>>()).expect("finite coordinates")
}

fn thresholds(domain: &FiniteDomain) -> HypothesisClass {
    enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, domain).expect("line domain has coordinates")
}

/// Points `0..n` on a bidirectional chain with all thresholds (both
/// constants included). The distribution puts half its mass uniformly on the
/// lower block labeled 0 and half on the upper block labeled 1.
pub fn gen_example1(n: usize) -> Result<Scenario> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("example 1 needs at least 2 points, got {n}")));
    }
    let domain = line_domain((0..n).map(|v| v as f64));
    let lower = n / 2;
    let upper = n - lower;
    let weights = (0..n)
        .map(|x| if x < lower { [0.5 / lower as f64, 0.0] } else { [0.0, 0.5 / upper as f64] })
        .collect();
    Ok(Scenario {
        class: thresholds(&domain),
        graph: ManipulationGraph::chain(n, true),
        alt_graph: None,
        distribution: LabeledDistribution::new(weights)?,
        graph_class: None,
        domain,
        provenance: format!("example1(n={n})"),
    })
}

/// Points `1..4` (indices `0..3`) with edges `n -> n+1`, thresholds, and
/// support `(1,0), (2,0), (3,1), (4,1)` weighted by `p`.
pub fn gen_example2(p: [f64; 4]) -> Result<Scenario> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > crate::domain::MASS_TOLERANCE {
        return Err(Error::InvalidParameter(format!("{p:?} is not a point of the probability simplex")));
    }
    let domain = line_domain((1..=4).map(f64::from));
    let distribution = LabeledDistribution::from_support(4, &[(0, false, p[0]), (1, false, p[1]), (2, true, p[2]), (3, true, p[3])])?;
    Ok(Scenario {
        class: thresholds(&domain),
        graph: ManipulationGraph::chain(4, false),
        alt_graph: None,
        distribution,
        graph_class: None,
        domain,
        provenance: format!("example2(p={p:?})"),
    })
}

/// Layout of the subset-encoding construction: `d` points `x_i` followed by
/// `2^d` points `z_j`, where `z_j` stands for the subset with bitmask `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetLayout {
    pub d: usize,
}

impl SubsetLayout {
    pub fn size(&self) -> usize {
        self.d + (1 << self.d)
    }

    pub fn x(&self, i: usize) -> usize {
        i
    }

    pub fn z(&self, j: usize) -> usize {
        self.d + j
    }

    pub fn z_points(&self) -> Vec<usize> {
        (0..1 << self.d).map(|j| self.z(j)).collect()
    }

    pub fn in_subset(&self, i: usize, j: usize) -> bool {
        j & (1 << i) != 0
    }
}

/// Edge `x_i -> z_j` iff `x_i` belongs to subset `j`; the class is the
/// singletons over the `z` points. The distribution is the realizable one
/// targeting `z_0` with half the mass on `(z_0, 1)`.
pub fn gen_observation1(d: usize) -> Result<Scenario> {
    if !(1..=4).contains(&d) {
        return Err(Error::InvalidParameter(format!("subset construction supports 1 <= d <= 4, got {d}")));
    }
    let layout = SubsetLayout { d };
    let n = layout.size();
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..1 << d {
            if layout.in_subset(i, j) {
                edges.push((layout.x(i), layout.z(j)));
            }
        }
    }
    let class = HypothesisClass::new(layout.z_points().into_iter().map(|z| Hypothesis::singleton(n, z)))?;
    Ok(Scenario {
        domain: FiniteDomain::new(n),
        graph: ManipulationGraph::from_edges(n, edges)?,
        alt_graph: None,
        class,
        distribution: observation1_realizable(d, 0, 0.5)?,
        graph_class: None,
        provenance: format!("observation1(d={d})"),
    })
}

/// Realizable distribution for the singleton class targeting `z_target`:
/// `positive_mass` on `(z_target, 1)`, the rest spread uniformly over the
/// negatives that `h_target` does not charge, namely `(x_i, 0)` for `x_i`
/// outside the target subset and `(z_k, 0)` for `k != target`.
pub fn observation1_realizable(d: usize, target: usize, positive_mass: f64) -> Result<LabeledDistribution> {
    let layout = SubsetLayout { d };
    if target >= 1 << d {
        return Err(Error::InvalidParameter(format!("target {target} out of range for d = {d}")));
    }
    if !(0.0..=1.0).contains(&positive_mass) {
        return Err(Error::InvalidParameter(format!("positive mass {positive_mass} outside [0, 1]")));
    }
    let mut negatives: Vec<usize> = (0..d).filter(|&i| !layout.in_subset(i, target)).map(|i| layout.x(i)).collect();
    negatives.extend((0..1 << d).filter(|&k| k != target).map(|k| layout.z(k)));
    let rest = (1.0 - positive_mass) / negatives.len() as f64;
    let mut items = vec![(layout.z(target), true, positive_mass)];
    items.extend(negatives.into_iter().map(|x| (x, false, rest)));
    LabeledDistribution::from_support(layout.size(), &items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Poset {
    /// Bottom, two incomparable middles, top.
    Diamond,
    Chain(usize),
    Antichain(usize),
}

/// Families whose strategic components have bounded VC dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AppendixB {
    /// Complete graph with a random class.
    Complete { points: usize, class_size: usize, seed: u64 },
    /// Strict order relation as the graph, all up-closed labelings as class.
    PartialOrder { poset: Poset },
    /// Norm ball of `radius` on a `side x side` integer grid, with
    /// discretized halfspaces.
    Ball { radius: f64, norm: Norm, side: usize },
    /// Edges between grid points differing in exactly one coordinate, on a
    /// `side x side` grid centered at the origin, with halfspaces of
    /// nonnegative offset.
    Coordinate { side: usize },
}

const MAX_APPENDIX_POINTS: usize = 16;

pub fn gen_appendix_b(which: AppendixB) -> Result<Scenario> {
    let (domain, graph, class, provenance) = match which {
        AppendixB::Complete { points, class_size, seed } => {
            check_points(points)?;
            let mut r = rng(seed);
            let class = random_class(&mut r, points, class_size)?;
            (
                FiniteDomain::new(points),
                ManipulationGraph::complete(points),
                class,
                format!("appendix-b/complete(points={points},class_size={class_size},seed={seed})"),
            )
        }
        AppendixB::PartialOrder { poset } => {
            let graph = poset_graph(poset)?;
            let n = graph.size();
            let class = up_closed_class(&graph)?;
            (FiniteDomain::new(n), graph, class, format!("appendix-b/partial-order({poset:?})"))
        }
        AppendixB::Ball { radius, norm, side } => {
            check_points(side * side)?;
            let axis: Vec<f64> = (0..side).map(|v| v as f64).collect();
            let domain = FiniteDomain::grid(&axis, 2)?;
            let cost = CostModel::from_coordinates(&domain, norm, radius)?;
            let graph = induce_graph(&domain, &cost)?;
            let span = 4 * side.saturating_sub(1) as i64 + 1;
            let biases: Vec<f64> = (-span..=span).map(|k| k as f64 + 0.5).collect();
            let family = ClassFamily::Halfspaces {
                weight_axis: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
                biases,
            };
            let class = enumerate_class(&family, &domain)?;
            (domain, graph, class, format!("appendix-b/ball(radius={radius},norm={norm:?},side={side})"))
        }
        AppendixB::Coordinate { side } => {
            check_points(side * side)?;
            let center = (side as f64 - 1.0) / 2.0;
            let axis: Vec<f64> = (0..side).map(|v| v as f64 - center).collect();
            let domain = FiniteDomain::grid(&axis, 2)?;
            let coords = domain.coords().expect("grid has coordinates").to_vec();
            let mut edges = Vec::new();
            for (x, a) in coords.iter().enumerate() {
                for (y, b) in coords.iter().enumerate() {
                    let differing = a.iter().zip(b).filter(|(p, q)| p != q).count();
                    if differing == 1 {
                        edges.push((x, y));
                    }
                }
            }
            let graph = ManipulationGraph::from_edges(domain.size(), edges)?;
            let family = ClassFamily::Halfspaces {
                weight_axis: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
                biases: vec![0.0, 0.5, 1.0],
            };
            let class = enumerate_class(&family, &domain)?;
            (domain, graph, class, format!("appendix-b/coordinate(side={side})"))
        }
    };
    let reference = class.get(class.len() / 2).labels().to_vec();
    Ok(Scenario {
        distribution: LabeledDistribution::uniform_labeled(&reference)?,
        domain,
        graph,
        alt_graph: None,
        class,
        graph_class: None,
        provenance,
    })
}

fn check_points(n: usize) -> Result<()> {
    if n == 0 || n > MAX_APPENDIX_POINTS {
        return Err(Error::Capacity(format!(
            "{n} points; construction supports 1..={MAX_APPENDIX_POINTS} for brute-force VC checks"
        )));
    }
    Ok(())
}

/// Strict order relation `x < y` as edges `x -> y`.
pub fn poset_graph(poset: Poset) -> Result<ManipulationGraph> {
    match poset {
        Poset::Diamond => ManipulationGraph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 3), (2, 3)]),
        Poset::Chain(k) => {
            check_points(k)?;
            ManipulationGraph::from_edges(k, (0..k).flat_map(|x| (x + 1..k).map(move |y| (x, y))))
        }
        Poset::Antichain(k) => {
            check_points(k)?;
            Ok(ManipulationGraph::empty(k))
        }
    }
}

/// Every labeling closed upward along the edges: complements of initial
/// segments.
fn up_closed_class(graph: &ManipulationGraph) -> Result<HypothesisClass> {
    let n = graph.size();
    let members = (0u32..1 << n).filter_map(|mask| {
        let labels: Vec<bool> = (0..n).map(|x| mask & (1 << x) != 0).collect();
        let closed = graph.edges().all(|(x, y)| !labels[x] || labels[y]);
        closed.then(|| Hypothesis::from_labels(labels))
    });
    HypothesisClass::new(members)
}

/// Size of a largest set of pairwise unrelated points, by brute force.
pub fn largest_antichain(graph: &ManipulationGraph) -> usize {
    let n = graph.size();
    (0u32..1 << n)
        .filter(|mask| {
            (0..n).all(|x| {
                mask & (1 << x) == 0 || graph.neighbors(x).iter().all(|&y| mask & (1 << y) == 0)
            })
        })
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

/// Parameters of a seeded random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParams {
    pub points: usize,
    /// Probability of each ordered edge.
    pub edge_density: f64,
    /// Number of random labelings drawn; duplicates are dropped.
    pub class_size: usize,
    /// Put each point's mass on a single label.
    #[serde(default)]
    pub deterministic_labels: bool,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            points: 6,
            edge_density: 0.3,
            class_size: 8,
            deterministic_labels: false,
        }
    }
}

const MAX_RANDOM_POINTS: usize = 64;

pub fn random_graph<R: Rng>(r: &mut R, n: usize, density: f64) -> ManipulationGraph {
    let succ = (0..n)
        .map(|x| (0..n).filter(|&y| y != x && r.gen::<f64>() < density).collect())
        .collect();
    ManipulationGraph::from_successors(n, succ).expect("indices in range")
}

pub fn random_class<R: Rng>(r: &mut R, n: usize, size: usize) -> Result<HypothesisClass> {
    HypothesisClass::new((0..size).map(|_| Hypothesis::from_labels((0..n).map(|_| r.gen::<bool>()).collect())))
}

pub fn random_distribution<R: Rng>(r: &mut R, n: usize, deterministic: bool) -> Result<LabeledDistribution> {
    let mut weights: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            if deterministic {
                let w = 1.0 - r.gen::<f64>();
                if r.gen::<bool>() {
                    [0.0, w]
                } else {
                    [w, 0.0]
                }
            } else {
                [1.0 - r.gen::<f64>(), 1.0 - r.gen::<f64>()]
            }
        })
        .collect();
    let total: f64 = weights.iter().flatten().sum();
    for w in &mut weights {
        w[0] /= total;
        w[1] /= total;
    }
    LabeledDistribution::new(weights)
}

/// Fully reproducible random instance: graph, alternative graph of the same
/// density, class and distribution.
pub fn gen_random(params: RandomParams, seed: u64) -> Result<Scenario> {
    let RandomParams {
        points,
        edge_density,
        class_size,
        deterministic_labels,
    } = params;
    if points == 0 || points > MAX_RANDOM_POINTS {
        return Err(Error::Capacity(format!("random instances support 1..={MAX_RANDOM_POINTS} points, got {points}")));
    }
    if !(0.0..=1.0).contains(&edge_density) {
        return Err(Error::InvalidParameter(format!("edge density {edge_density} outside [0, 1]")));
    }
    if class_size == 0 {
        return Err(Error::InvalidParameter("class size must be positive".into()));
    }
    let mut r = rng(seed);
    let graph = random_graph(&mut r, points, edge_density);
    let alt_graph = random_graph(&mut r, points, edge_density);
    let class = random_class(&mut r, points, class_size)?;
    let distribution = random_distribution(&mut r, points, deterministic_labels)?;
    Ok(Scenario {
        domain: FiniteDomain::new(points),
        graph,
        alt_graph: Some(alt_graph),
        class,
        distribution,
        graph_class: None,
        provenance: format!(
            "random(points={points},edge_density={edge_density},class_size={class_size},deterministic_labels={deterministic_labels},seed={seed})"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ic_erm;
    use crate::losses::{expected_loss, is_incentive_compatible, LossKind};
    use crate::vcdim::{hypothesis_system, is_shattered, labeled_index, loss_class, vc_dimension, VcDimension};

    #[test]
    fn example1_ic_members_are_constants() {
        let s = gen_example1(10).unwrap();
        let ic: Vec<&Hypothesis> = s.class.iter().filter(|h| is_incentive_compatible(h, &s.graph)).collect();
        assert_eq!(ic.len(), 2);
        assert!(ic.iter().all(|h| h.is_constant()));
        let two = gen_example1(2).unwrap();
        assert_eq!(two.graph.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert!(gen_example1(1).is_err());
    }

    #[test]
    fn example1_ic_erm_on_balanced_blocks() {
        let s = gen_example1(10).unwrap();
        let sample = crate::learners::draw_sample(&s.distribution, 200, 5);
        let out = ic_erm(&s.class, &sample, &s.graph).unwrap();
        assert_eq!(expected_loss(LossKind::Binary, &out.hypothesis, &s.distribution).unwrap(), 0.5);
        for h in s.class.iter().filter(|h| h.is_constant()) {
            assert_eq!(expected_loss(LossKind::Binary, h, &s.distribution).unwrap(), 0.5);
        }
    }

    #[test]
    fn example2_uniform_losses() {
        let s = gen_example2([0.25; 4]).unwrap();
        let by_bits = |bits: &str| s.class.iter().find(|h| h.bit_string() == bits).unwrap().clone();
        let g = LossKind::Strategic(&s.graph);
        assert_eq!(expected_loss(g, &by_bits("0011"), &s.distribution).unwrap(), 0.25);
        assert_eq!(expected_loss(g, &by_bits("0001"), &s.distribution).unwrap(), 0.25);
        assert!(gen_example2([0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(gen_example2([0.5, 0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn observation1_sizes_and_vc() {
        for d in 1..=4 {
            let s = gen_observation1(d).unwrap();
            assert_eq!(s.domain.size(), d + (1 << d));
            assert_eq!(s.class.len(), 1 << d);
        }
        assert!(gen_observation1(0).is_err());
        assert!(gen_observation1(5).is_err());

        let s = gen_observation1(1).unwrap();
        let sys = loss_class(&s.class, LossKind::Strategic(&s.graph));
        assert!(is_shattered(&sys, &[labeled_index(0, false)]).unwrap());

        let s = gen_observation1(2).unwrap();
        assert_eq!(vc_dimension(&hypothesis_system(&s.class), 6).unwrap().dimension, VcDimension::Exact(1));
        let sys = loss_class(&s.class, LossKind::Strategic(&s.graph));
        assert!(vc_dimension(&sys, 6).unwrap().lower_bound() >= 2);
    }

    #[test]
    fn observation1_realizable_distribution_is_realizable() {
        for target in 0..8 {
            let p = observation1_realizable(3, target, 0.2).unwrap();
            let s = gen_observation1(3).unwrap();
            let h = Hypothesis::singleton(s.domain.size(), SubsetLayout { d: 3 }.z(target));
            assert_eq!(expected_loss(LossKind::Strategic(&s.graph), &h, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn random_generation_is_deterministic() {
        let p = RandomParams::default();
        assert_eq!(gen_random(p, 42).unwrap(), gen_random(p, 42).unwrap());
        assert_ne!(gen_random(p, 42).unwrap().graph, gen_random(p, 43).unwrap().graph);
        let empty = gen_random(RandomParams { edge_density: 0.0, ..p }, 1).unwrap();
        assert_eq!(empty.graph.edge_count(), 0);
        let full = gen_random(RandomParams { edge_density: 1.0, ..p }, 1).unwrap();
        assert_eq!(full.graph, ManipulationGraph::complete(p.points));
    }

    #[test]
    fn posets() {
        let diamond = poset_graph(Poset::Diamond).unwrap();
        assert_eq!(largest_antichain(&diamond), 2);
        assert_eq!(largest_antichain(&poset_graph(Poset::Chain(5)).unwrap()), 1);
        assert_eq!(largest_antichain(&poset_graph(Poset::Antichain(4)).unwrap()), 4);
        let s = gen_appendix_b(AppendixB::PartialOrder { poset: Poset::Chain(4) }).unwrap();
        // Up-closed sets of a 4-chain are the 5 thresholds.
        assert_eq!(s.class.len(), 5);
    }
}
