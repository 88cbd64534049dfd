//! EM consolidation of multi-annotator judgments.
//!
//! Item-response model: each item has a true label drawn uniformly from the
//! dimension's label set; annotator `j` copies the true label with
//! probability `theta_j` and otherwise draws from a private spam
//! distribution `xi_j`. EM alternates exact posteriors over true labels and
//! copy indicators (E) with smoothed count re-estimation (M). The recorded
//! objective includes the smoothing pseudo-count terms, which is what makes
//! it non-decreasing step to step.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::labels::Dimension;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Raw judgments for one item in one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub item_id: String,
    pub dimension: Dimension,
    /// annotator id -> zero-based label index
    pub judgments: BTreeMap<String, usize>,
}

/// EM hyperparameters. The seed is mandatory so runs are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig<R> {
    pub restarts: usize,
    pub iterations: usize,
    /// Additive smoothing on every count; `None` means `0.1 / L`.
    pub smoothing: Option<R>,
    pub seed: u64,
}

impl<R: Real> EmConfig<R> {
    pub fn new(seed: u64) -> Self {
        EmConfig {
            restarts: 10,
            iterations: 50,
            smoothing: None,
            seed,
        }
    }

    fn smoothing_for(&self, label_count: usize) -> R {
        self.smoothing
            .unwrap_or_else(|| R::from_f64_lossy(0.1) / R::from_usize_lossy(label_count))
    }
}

/// Per-annotator competence and spam distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorModel<R> {
    pub competence: BTreeMap<String, R>,
    pub spam_distribution: BTreeMap<String, Vec<R>>,
}

/// Consolidated posteriors and hard labels for every item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLabels<R> {
    pub posterior: BTreeMap<String, Vec<R>>,
    pub hard_label: BTreeMap<String, usize>,
    /// Objective trace of the winning restart: the value for the initial
    /// parameters followed by one value per EM step.
    pub log_likelihood_trace: Vec<R>,
}

struct Problem {
    item_ids: Vec<String>,
    /// Per item: (annotator index, label index) pairs.
    judgments: Vec<Vec<(usize, usize)>>,
    annotator_ids: Vec<String>,
    label_count: usize,
}

struct Params<R> {
    theta: Vec<R>,
    xi: Vec<Vec<R>>,
}

struct RunResult<R> {
    params: Params<R>,
    posteriors: Vec<Vec<R>>,
    trace: Vec<R>,
}

/// Consolidate one dimension's annotation sets.
///
/// Runs `restarts` random initializations for `iterations` EM steps each and
/// keeps the restart with the highest final objective (ties keep the lowest
/// restart index, so scheduling cannot change the result).
pub fn aggregate_em<R: Real>(
    annotations: &[AnnotationSet],
    config: &EmConfig<R>,
) -> Result<(AggregatedLabels<R>, AnnotatorModel<R>)> {
    let problem = build_problem(annotations)?;
    let smoothing = config.smoothing_for(problem.label_count);

    let mut best: Option<(usize, RunResult<R>)> = None;
    for restart in 0..config.restarts.max(1) {
        let seed = derive_seed(config.seed, restart as u64);
        let result = run_em(&problem, config.iterations, smoothing, seed);
        let final_objective = *result.trace.last().expect("trace is never empty");
        let better = match &best {
            None => true,
            Some((_, incumbent)) => {
                final_objective > *incumbent.trace.last().expect("trace is never empty")
            }
        };
        if better {
            best = Some((restart, result));
        }
    }
    let (_, winner) = best.expect("at least one restart ran");

    let mut posterior = BTreeMap::new();
    let mut hard_label = BTreeMap::new();
    for (item_idx, item_id) in problem.item_ids.iter().enumerate() {
        let post = &winner.posteriors[item_idx];
        posterior.insert(item_id.clone(), post.clone());
        hard_label.insert(item_id.clone(), argmax_lowest(post));
    }
    let competence = problem
        .annotator_ids
        .iter()
        .cloned()
        .zip(winner.params.theta.iter().cloned())
        .collect();
    let spam_distribution = problem
        .annotator_ids
        .iter()
        .cloned()
        .zip(winner.params.xi.iter().cloned())
        .collect();

    Ok((
        AggregatedLabels {
            posterior,
            hard_label,
            log_likelihood_trace: winner.trace,
        },
        AnnotatorModel {
            competence,
            spam_distribution,
        },
    ))
}

fn build_problem(annotations: &[AnnotationSet]) -> Result<Problem> {
    let first = annotations
        .first()
        .ok_or_else(|| Error::EmptyInput("no annotation sets".into()))?;
    let dimension = first.dimension;
    let label_count = dimension.label_count();
    if label_count < 2 {
        return Err(Error::TooFewLabels { got: label_count });
    }

    let mut annotator_ids: Vec<String> = annotations
        .iter()
        .flat_map(|set| set.judgments.keys().cloned())
        .collect();
    annotator_ids.sort();
    annotator_ids.dedup();
    let annotator_index: BTreeMap<&String, usize> = annotator_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();

    let mut item_ids = Vec::with_capacity(annotations.len());
    let mut judgments = Vec::with_capacity(annotations.len());
    for set in annotations {
        assert_eq!(
            set.dimension, dimension,
            "all annotation sets must share one dimension"
        );
        if set.judgments.is_empty() {
            return Err(Error::ItemWithoutJudgments {
                item_id: set.item_id.clone(),
            });
        }
        for (annotator, &label) in &set.judgments {
            if label >= label_count {
                return Err(Error::InvalidLabelCode {
                    code: format!("index {label} by {annotator}"),
                    dimension: dimension.as_str().to_string(),
                });
            }
        }
        item_ids.push(set.item_id.clone());
        judgments.push(
            set.judgments
                .iter()
                .map(|(annotator, &label)| (annotator_index[annotator], label))
                .collect(),
        );
    }
    Ok(Problem {
        item_ids,
        judgments,
        annotator_ids,
        label_count,
    })
}

fn derive_seed(base: u64, restart: u64) -> u64 {
    base.wrapping_add((restart + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn init_params<R: Real>(problem: &Problem, seed: u64) -> Params<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = (0..problem.annotator_ids.len())
        .map(|_| R::from_f64_lossy(rng.gen_range(0.3..0.9)))
        .collect();
    let xi = (0..problem.annotator_ids.len())
        .map(|_| {
            // Uniform over the simplex: normalized exponentials.
            let draws: Vec<f64> = (0..problem.label_count)
                .map(|_| -(rng.gen_range(1e-12..1.0f64)).ln())
                .collect();
            let total: f64 = draws.iter().sum();
            draws.iter().map(|d| R::from_f64_lossy(d / total)).collect()
        })
        .collect();
    Params { theta, xi }
}

fn run_em<R: Real>(problem: &Problem, iterations: usize, smoothing: R, seed: u64) -> RunResult<R> {
    let mut params = init_params(problem, seed);
    let mut trace = Vec::with_capacity(iterations + 1);

    for _ in 0..iterations {
        let (objective, _, counts) = e_step(problem, &params, smoothing);
        trace.push(objective);
        params = m_step(problem, &counts, smoothing);
    }
    // Evaluate the final parameters so the trace ends on the returned state.
    let (objective, posteriors, _) = e_step(problem, &params, smoothing);
    trace.push(objective);

    RunResult {
        params,
        posteriors,
        trace,
    }
}

struct Counts<R> {
    copy: Vec<R>,
    total: Vec<R>,
    spam: Vec<Vec<R>>,
}

/// One E-step: returns the penalized objective, per-item posteriors, and the
/// expected copy/spam counts the M-step needs.
fn e_step<R: Real>(
    problem: &Problem,
    params: &Params<R>,
    smoothing: R,
) -> (R, Vec<Vec<R>>, Counts<R>) {
    let label_count = problem.label_count;
    let annotators = problem.annotator_ids.len();
    let mut counts = Counts {
        copy: vec![R::zero(); annotators],
        total: vec![R::zero(); annotators],
        spam: vec![vec![R::zero(); label_count]; annotators],
    };
    let mut posteriors = Vec::with_capacity(problem.judgments.len());
    let mut log_marginal = R::zero();

    for item in &problem.judgments {
        // p(T = l, data) up to the uniform prior 1/L.
        let mut weights = vec![R::one(); label_count];
        for &(annotator, observed) in item {
            let theta = params.theta[annotator];
            let spam = (R::one() - theta) * params.xi[annotator][observed];
            for (label, w) in weights.iter_mut().enumerate() {
                let p = if label == observed {
                    theta + spam
                } else {
                    spam
                };
                *w = *w * p;
            }
        }
        let total: R = weights.iter().cloned().sum();
        log_marginal = log_marginal + total.ln() - R::from_usize_lossy(label_count).ln();
        let posterior: Vec<R> = weights.iter().map(|&w| w / total).collect();

        for &(annotator, observed) in item {
            let theta = params.theta[annotator];
            let spam = (R::one() - theta) * params.xi[annotator][observed];
            // Copying is only possible when the true label equals the
            // observed one.
            let copy_prob = posterior[observed] * theta / (theta + spam);
            counts.copy[annotator] = counts.copy[annotator] + copy_prob;
            counts.total[annotator] = counts.total[annotator] + R::one();
            counts.spam[annotator][observed] =
                counts.spam[annotator][observed] + (R::one() - copy_prob);
        }
        posteriors.push(posterior);
    }

    let objective = log_marginal + prior_term(params, smoothing);
    (objective, posteriors, counts)
}

/// Smoothing pseudo-count prior; adding it to the marginal likelihood gives
/// the objective EM actually maximizes.
fn prior_term<R: Real>(params: &Params<R>, smoothing: R) -> R {
    let mut total = R::zero();
    for &theta in &params.theta {
        total = total + smoothing * (theta.ln() + (R::one() - theta).ln());
    }
    for xi in &params.xi {
        for &x in xi {
            total = total + smoothing * x.ln();
        }
    }
    total
}

fn m_step<R: Real>(problem: &Problem, counts: &Counts<R>, smoothing: R) -> Params<R> {
    let two = R::from_f64_lossy(2.0);
    let label_count = R::from_usize_lossy(problem.label_count);
    let theta = counts
        .copy
        .iter()
        .zip(&counts.total)
        .map(|(&copy, &total)| (copy + smoothing) / (total + two * smoothing))
        .collect();
    let xi = counts
        .spam
        .iter()
        .map(|spam_counts| {
            let spam_total: R = spam_counts.iter().cloned().sum();
            spam_counts
                .iter()
                .map(|&c| (c + smoothing) / (spam_total + label_count * smoothing))
                .collect()
        })
        .collect();
    Params { theta, xi }
}

/// Argmax with ties broken toward the lowest index.
pub(crate) fn argmax_lowest<R: Real>(values: &[R]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(item: &str, judgments: &[(&str, usize)]) -> AnnotationSet {
        AnnotationSet {
            item_id: item.to_string(),
            dimension: Dimension::Topic,
            judgments: judgments.iter().map(|(a, l)| (a.to_string(), *l)).collect(),
        }
    }

    #[test]
    fn unanimous_judgments_are_copied() {
        let sets: Vec<AnnotationSet> = (0..8)
            .map(|i| {
                set(
                    &format!("item{i}"),
                    &[("ann1", i % 4), ("ann2", i % 4), ("ann3", i % 4)],
                )
            })
            .collect();
        let config = EmConfig::<f64>::new(11);
        let (agg, model) = aggregate_em(&sets, &config).unwrap();
        for i in 0..8 {
            assert_eq!(agg.hard_label[&format!("item{i}")], i % 4);
        }
        for theta in model.competence.values() {
            assert!(*theta >= 0.9, "competence {theta} should be high");
        }
    }

    #[test]
    fn single_annotator_is_copied_exactly() {
        let sets = vec![
            set("a", &[("only", 2)]),
            set("b", &[("only", 0)]),
            set("c", &[("only", 2)]),
            set("d", &[("only", 3)]),
        ];
        let config = EmConfig::<f64>::new(5);
        let (agg, _) = aggregate_em(&sets, &config).unwrap();
        assert_eq!(agg.hard_label["a"], 2);
        assert_eq!(agg.hard_label["b"], 0);
        assert_eq!(agg.hard_label["c"], 2);
        assert_eq!(agg.hard_label["d"], 3);
    }

    #[test]
    fn objective_trace_is_non_decreasing() {
        let sets = vec![
            set("a", &[("x", 0), ("y", 0), ("z", 1)]),
            set("b", &[("x", 1), ("y", 1), ("z", 1)]),
            set("c", &[("x", 2), ("y", 3), ("z", 2)]),
            set("d", &[("x", 3), ("y", 3), ("z", 0)]),
        ];
        let config = EmConfig::<f64>::new(3);
        let (agg, _) = aggregate_em(&sets, &config).unwrap();
        for pair in agg.log_likelihood_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9, "trace dipped: {pair:?}");
        }
    }

    #[test]
    fn posteriors_sum_to_one() {
        let sets = vec![
            set("a", &[("x", 0), ("y", 1)]),
            set("b", &[("x", 2), ("y", 2)]),
        ];
        let config = EmConfig::<f64>::new(1);
        let (agg, _) = aggregate_em(&sets, &config).unwrap();
        for post in agg.posterior.values() {
            let total: f64 = post.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spam_distributions_sum_to_one() {
        let sets = vec![
            set("a", &[("x", 0), ("y", 1)]),
            set("b", &[("x", 2), ("y", 2)]),
            set("c", &[("x", 1), ("y", 3)]),
        ];
        let config = EmConfig::<f64>::new(9);
        let (_, model) = aggregate_em(&sets, &config).unwrap();
        for xi in model.spam_distribution.values() {
            let total: f64 = xi.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(xi.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let sets = vec![
            set("a", &[("x", 0), ("y", 1), ("z", 0)]),
            set("b", &[("x", 2), ("y", 2), ("z", 3)]),
        ];
        let config = EmConfig::<f64>::new(42);
        let (agg1, model1) = aggregate_em(&sets, &config).unwrap();
        let (agg2, model2) = aggregate_em(&sets, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&(agg1, model1)).unwrap(),
            serde_json::to_string(&(agg2, model2)).unwrap()
        );
    }

    #[test]
    fn empty_judgments_are_rejected() {
        let sets = vec![AnnotationSet {
            item_id: "empty".to_string(),
            dimension: Dimension::Topic,
            judgments: BTreeMap::new(),
        }];
        match aggregate_em::<f64>(&sets, &EmConfig::new(1)) {
            Err(Error::ItemWithoutJudgments { item_id }) => assert_eq!(item_id, "empty"),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn argmax_ties_break_low() {
        assert_eq!(argmax_lowest(&[0.5f64, 0.5, 0.3]), 0);
        assert_eq!(argmax_lowest(&[0.1f64, 0.6, 0.6]), 1);
    }
}
