//! Seeded sampling and the learners compared in the experiments: ERM under
//! each loss, performative ERM over effective hypotheses, ERM restricted to
//! incentive-compatible members, and the dedicated singleton learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Hypothesis, HypothesisClass, LabeledDistribution, LabeledSample, ManipulationGraph, Marginal};
use crate::error::{Error, Result};
use crate::losses::{effective_hypothesis, expected_loss, is_incentive_compatible, LossKind};

/// SplitMix64 finalizer. Stable across platforms and releases.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `t` of an experiment.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    master ^ splitmix64(trial)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn inverse_cdf<R: Rng>(rng: &mut R, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("nonempty support");
    let u = rng.gen::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    weights
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// `n` i.i.d. draws by inverse CDF over the support in (point, label) order.
pub fn draw_sample(p: &LabeledDistribution, n: usize, seed: u64) -> LabeledSample {
    let support: Vec<(usize, bool, f64)> = p.support().collect();
    if n == 0 || support.is_empty() {
        return LabeledSample::default();
    }
    let cum = cumulative(support.iter().map(|s| s.2));
    let mut rng = rng(seed);
    let items = (0..n)
        .map(|_| {
            let (x, y, _) = support[inverse_cdf(&mut rng, &cum)];
            (x, y)
        })
        .collect();
    LabeledSample::new(p.size(), items).expect("support points are in range")
}

/// `n` i.i.d. points from a marginal.
pub fn draw_points(marginal: &Marginal, n: usize, seed: u64) -> Vec<usize> {
    let support: Vec<(usize, f64)> = marginal.support().collect();
    if n == 0 || support.is_empty() {
        return Vec::new();
    }
    let cum = cumulative(support.iter().map(|s| s.1));
    let mut rng = rng(seed);
    (0..n).map(|_| support[inverse_cdf(&mut rng, &cum)].0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerOutput {
    /// Index of the returned member in the searched class.
    pub index: usize,
    pub hypothesis: Hypothesis,
    /// Minimum empirical loss (or expected loss for population learners).
    pub empirical_value: f64,
    /// Number of members attaining the minimum.
    pub tie_count: usize,
}

/// Lowest-index minimizer of integer scores, with tie count.
fn argmin_counts(scores: &[(usize, usize)]) -> (usize, usize, usize) {
    let best = scores.iter().map(|s| s.1).min().expect("nonempty");
    let index = scores.iter().find(|s| s.1 == best).expect("attained").0;
    let ties = scores.iter().filter(|s| s.1 == best).count();
    (index, best, ties)
}

fn check_inputs(class: &HypothesisClass, s: &LabeledSample) -> Result<usize> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = class.domain_size().expect("nonempty class");
    if let Some(x) = s.points().find(|&x| x >= n) {
        return Err(Error::PointOutOfRange { index: x, size: n });
    }
    Ok(n)
}

fn hits(counts: &[[usize; 2]], loss: impl Fn(usize, bool) -> bool) -> usize {
    counts
        .iter()
        .enumerate()
        .map(|(x, c)| {
            let mut total = 0;
            if c[0] > 0 && loss(x, false) {
                total += c[0];
            }
            if c[1] > 0 && loss(x, true) {
                total += c[1];
            }
            total
        })
        .sum()
}

fn output(class: &HypothesisClass, scores: &[(usize, usize)], len: usize) -> LearnerOutput {
    let (index, best, tie_count) = argmin_counts(scores);
    LearnerOutput {
        index,
        hypothesis: class.get(index).clone(),
        empirical_value: best as f64 / len as f64,
        tie_count,
    }
}

/// Empirical risk minimizer; ties go to the lowest class index.
pub fn erm(class: &HypothesisClass, s: &LabeledSample, kind: LossKind<'_>) -> Result<LearnerOutput> {
    let n = check_inputs(class, s)?;
    let counts = s.counts(n);
    let scores: Vec<(usize, usize)> = class
        .iter()
        .enumerate()
        .map(|(i, h)| (i, hits(&counts, |x, y| kind.eval(h, x, y))))
        .collect();
    Ok(output(class, &scores, s.len()))
}

/// Member whose effective hypothesis has the least empirical binary loss.
pub fn performative_erm(class: &HypothesisClass, s: &LabeledSample, g: &ManipulationGraph) -> Result<LearnerOutput> {
    let n = check_inputs(class, s)?;
    let counts = s.counts(n);
    let scores: Vec<(usize, usize)> = class
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let eff = effective_hypothesis(h, g);
            (i, hits(&counts, |x, y| eff.label(x) != y))
        })
        .collect();
    Ok(output(class, &scores, s.len()))
}

/// Binary ERM over the incentive-compatible members only.
pub fn ic_erm(class: &HypothesisClass, s: &LabeledSample, g: &ManipulationGraph) -> Result<LearnerOutput> {
    let n = check_inputs(class, s)?;
    let counts = s.counts(n);
    let scores: Vec<(usize, usize)> = class
        .iter()
        .enumerate()
        .filter(|(_, h)| is_incentive_compatible(h, g))
        .map(|(i, h)| (i, hits(&counts, |x, y| h.label(x) != y)))
        .collect();
    if scores.is_empty() {
        return Err(Error::NoIncentiveCompatibleMember);
    }
    Ok(output(class, &scores, s.len()))
}

fn population_output(class: &HypothesisClass, values: Vec<(usize, f64)>) -> Result<LearnerOutput> {
    let best = values
        .iter()
        .map(|v| v.1)
        .min_by(f64::total_cmp)
        .ok_or(Error::EmptyClass)?;
    let index = values.iter().find(|v| v.1 == best).expect("attained").0;
    Ok(LearnerOutput {
        index,
        hypothesis: class.get(index).clone(),
        empirical_value: best,
        tie_count: values.iter().filter(|v| v.1 == best).count(),
    })
}

/// Minimizer of the exact expected loss; the population counterpart of
/// [`erm`].
pub fn population_erm(class: &HypothesisClass, p: &LabeledDistribution, kind: LossKind<'_>) -> Result<LearnerOutput> {
    let values = class
        .iter()
        .enumerate()
        .map(|(i, h)| Ok((i, expected_loss(kind, h, p)?)))
        .collect::<Result<Vec<_>>>()?;
    population_output(class, values)
}

/// Member whose effective hypothesis has the least expected binary loss.
pub fn population_performative_erm(class: &HypothesisClass, p: &LabeledDistribution, g: &ManipulationGraph) -> Result<LearnerOutput> {
    let values = class
        .iter()
        .enumerate()
        .map(|(i, h)| Ok((i, expected_loss(LossKind::Binary, &effective_hypothesis(h, g), p)?)))
        .collect::<Result<Vec<_>>>()?;
    population_output(class, values)
}

/// Returns the singleton at the unique positively labeled point of
/// `singletons` seen in the sample, or the all-zero hypothesis if none was
/// seen.
pub fn singleton_learner(s: &LabeledSample, singletons: &[usize], domain_size: usize) -> Result<Hypothesis> {
    let mut found: Option<usize> = None;
    for &(x, y) in s.items() {
        if !y || !singletons.contains(&x) {
            continue;
        }
        match found {
            Some(z) if z != x => {
                return Err(Error::RealizabilityViolation {
                    first: z.min(x),
                    second: z.max(x),
                })
            }
            _ => found = Some(x),
        }
    }
    Ok(match found {
        Some(z) => Hypothesis::singleton(domain_size, z),
        None => Hypothesis::constant(domain_size, false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enumerate_class, ClassFamily, FiniteDomain};

    fn example2(p: [f64; 4]) -> LabeledDistribution {
        LabeledDistribution::from_support(4, &[(0, false, p[0]), (1, false, p[1]), (2, true, p[2]), (3, true, p[3])]).unwrap()
    }

    fn thresholds4() -> HypothesisClass {
        let d = FiniteDomain::line(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        enumerate_class(&ClassFamily::Thresholds { coord: 0, grid: None }, &d).unwrap()
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the SplitMix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn sampling_edge_cases() {
        let p = example2([0.25; 4]);
        assert!(draw_sample(&p, 0, 1).is_empty());
        let point = LabeledDistribution::from_support(3, &[(2, true, 1.0)]).unwrap();
        let s = draw_sample(&point, 7, 9);
        assert_eq!(s.items(), &[(2, true); 7]);
        assert_eq!(draw_sample(&p, 50, 3), draw_sample(&p, 50, 3));
    }

    #[test]
    fn sampling_frequencies_follow_weights() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let n = 100_000;
        let s = draw_sample(&example2(w), n, 2024);
        let counts = s.counts(4);
        for (x, &wx) in w.iter().enumerate() {
            let freq = (counts[x][0] + counts[x][1]) as f64 / n as f64;
            assert!((freq - wx).abs() < 0.01, "point {x}: {freq} vs {wx}");
        }
    }

    #[test]
    fn strategic_erm_follows_mass_of_contested_points() {
        let g = ManipulationGraph::chain(4, false);
        let class = thresholds4();
        let s = draw_sample(&example2([0.25, 0.05, 0.45, 0.25]), 2000, 11);
        assert_eq!(erm(&class, &s, LossKind::Strategic(&g)).unwrap().hypothesis.bit_string(), "0011");
        let s = draw_sample(&example2([0.25, 0.45, 0.05, 0.25]), 2000, 11);
        assert_eq!(erm(&class, &s, LossKind::Strategic(&g)).unwrap().hypothesis.bit_string(), "0001");
        let out = erm(&class, &s, LossKind::Binary).unwrap();
        assert_eq!(out.empirical_value, 0.0);
        assert_eq!(out.tie_count, 1);
    }

    #[test]
    fn performative_erm_picks_upper_threshold() {
        let g = ManipulationGraph::chain(4, false);
        let s = LabeledSample::new(4, vec![(0, false), (1, false), (2, true), (3, true)]).unwrap();
        let out = performative_erm(&thresholds4(), &s, &g).unwrap();
        assert_eq!(out.hypothesis.bit_string(), "0001");
        let empty = ManipulationGraph::empty(4);
        assert_eq!(
            performative_erm(&thresholds4(), &s, &empty).unwrap(),
            erm(&thresholds4(), &s, LossKind::Binary).unwrap()
        );
    }

    #[test]
    fn performative_erm_on_complete_graph() {
        let g = ManipulationGraph::complete(4);
        let class = thresholds4();
        let s = LabeledSample::new(4, vec![(0, false), (3, true), (2, true)]).unwrap();
        // Every non-all-zero member becomes all-ones and errs on the single
        // negative; all-zero errs on the two positives.
        let out = performative_erm(&class, &s, &g).unwrap();
        assert_eq!(out.index, 1);
        assert_eq!(out.tie_count, 4);
        assert!((out.empirical_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ic_erm_feasible_set() {
        let g = ManipulationGraph::chain(4, true);
        let s = LabeledSample::new(4, vec![(0, false), (1, false), (2, true), (3, true)]).unwrap();
        let out = ic_erm(&thresholds4(), &s, &g).unwrap();
        assert!(out.hypothesis.is_constant());
        assert_eq!(out.tie_count, 2);
        assert_eq!(out.empirical_value, 0.5);
        let interior = HypothesisClass::new([thresholds4().get(2).clone()]).unwrap();
        assert_eq!(ic_erm(&interior, &s, &g), Err(Error::NoIncentiveCompatibleMember));
        let empty = ManipulationGraph::empty(4);
        assert_eq!(ic_erm(&thresholds4(), &s, &empty).unwrap(), erm(&thresholds4(), &s, LossKind::Binary).unwrap());
    }

    #[test]
    fn singleton_learner_cases() {
        let v = [3, 4, 5];
        let s = LabeledSample::new(6, vec![(0, false), (4, true), (4, true)]).unwrap();
        assert_eq!(singleton_learner(&s, &v, 6).unwrap().positives().collect::<Vec<_>>(), vec![4]);
        let neg = LabeledSample::new(6, vec![(0, false), (5, false)]).unwrap();
        assert!(singleton_learner(&neg, &v, 6).unwrap().is_all_zero());
        assert!(singleton_learner(&LabeledSample::default(), &v, 6).unwrap().is_all_zero());
        let bad = LabeledSample::new(6, vec![(5, true), (3, true)]).unwrap();
        assert_eq!(
            singleton_learner(&bad, &v, 6),
            Err(Error::RealizabilityViolation { first: 3, second: 5 })
        );
    }

    #[test]
    fn empty_inputs_rejected() {
        let s = LabeledSample::new(4, vec![(0, false)]).unwrap();
        assert_eq!(erm(&HypothesisClass::default(), &s, LossKind::Binary), Err(Error::EmptyClass));
        assert_eq!(erm(&thresholds4(), &LabeledSample::default(), LossKind::Binary), Err(Error::EmptySample));
    }
}
