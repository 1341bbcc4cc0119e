//! LambdaMART: boosted trees fitted to lambda pseudo-gradients.
//!
//! For every pair with `rel_i > rel_j` the sigmoid pairwise gradient
//! `ρ = 1/(1+exp(σ(s_i−s_j)))` is scaled by the metric's swap delta `Δ`;
//! `λ_i += σρΔ`, `λ_j −= σρΔ` and both second-order weights grow by
//! `σ²ρ(1−ρ)Δ`. The booster receives `(−λ, w)` as gradient and hessian.

use serde::{Deserialize, Serialize};

use crate::data::{descending_order, Partition, UpliftDataset};
use crate::error::{Error, Result};
use crate::gbrt::{self, BoostedEnsemble, GbrtConfig, GradientProvider};
use crate::metrics::{evaluate, Query, RankMetric, SwapDeltas};
use crate::relevance::{assign_relevance, RelevanceScheme};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaConfig {
    pub metric: RankMetric,
    /// Per-query cutoff as a fraction of the query length.
    pub cutoff_fraction: f64,
    pub sigma: f64,
    /// Enumerate every ordered pair instead of only pairs touching the top-k window.
    pub full_pairs: bool,
    pub gbrt: GbrtConfig,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            metric: RankMetric::Pcg,
            cutoff_fraction: 1.0,
            sigma: 1.0,
            full_pairs: false,
            gbrt: GbrtConfig::default(),
        }
    }
}

impl LambdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "cutoff fraction must lie in (0, 1], got {}",
                self.cutoff_fraction
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        self.gbrt.validate()
    }
}

/// Per-row lambdas and second-order weights, indexed like the dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LambdaBatch {
    pub lambda: Vec<f64>,
    pub weight: Vec<f64>,
}

/// One pair's contribution: `+lambda` to `better`, `−lambda` to `worse`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairLambda {
    pub better: usize,
    pub worse: usize,
    pub lambda: f64,
    pub weight: f64,
    pub delta: f64,
}

// Ranked positions of a query grouped by relevance level, levels descending.
struct LevelBuckets {
    levels: Vec<Vec<usize>>,
}

impl LevelBuckets {
    fn new(ranked_rels: &[f64]) -> Self {
        let mut distinct: Vec<f64> = ranked_rels.to_vec();
        distinct.sort_by(|a, b| b.total_cmp(a));
        distinct.dedup();
        let mut levels = vec![Vec::new(); distinct.len()];
        for (pos, r) in ranked_rels.iter().enumerate() {
            let l = distinct.iter().position(|d| d == r).expect("level present");
            levels[l].push(pos);
        }
        Self { levels }
    }
}

/// Visits every scored pair of one query in a fixed order.
fn for_each_pair(
    query: &Query,
    scores: &[f64],
    config: &LambdaConfig,
    mut visit: impl FnMut(PairLambda),
) -> Result<f64> {
    if query.is_empty() {
        return Ok(0.0);
    }
    let local: Vec<f64> = query.members.iter().map(|&m| scores[m]).collect();
    let order = descending_order(&local);
    let rels: Vec<f64> = order.iter().map(|&p| query.relevance[p]).collect();
    let k = query.cutoff.clamp(1, query.len());
    let deltas = SwapDeltas::new(config.metric, &rels, k)?;
    let buckets = LevelBuckets::new(&rels);
    let sigma = config.sigma;
    for (hi_level, better) in buckets.levels.iter().enumerate() {
        for worse in &buckets.levels[hi_level + 1..] {
            for &a in better {
                for &b in worse {
                    if !config.full_pairs && a >= k && b >= k {
                        // positions ascend within a bucket
                        break;
                    }
                    let delta = deltas.delta(a, b);
                    if delta == 0.0 {
                        continue;
                    }
                    let (i, j) = (order[a], order[b]);
                    let rho = 1.0 / (1.0 + (sigma * (local[i] - local[j])).exp());
                    visit(PairLambda {
                        better: query.members[i],
                        worse: query.members[j],
                        lambda: sigma * rho * delta,
                        weight: sigma * sigma * rho * (1.0 - rho) * delta,
                        delta,
                    });
                }
            }
        }
    }
    evaluate(config.metric, &rels, k)
}

fn check_scores(queries: &[Query], scores: &[f64]) -> Result<()> {
    for q in queries {
        if let Some(&m) = q.members.iter().find(|&&m| m >= scores.len()) {
            return Err(Error::Range {
                what: "query member",
                value: m,
                min: 0,
                max: scores.len().saturating_sub(1),
            });
        }
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("scores must be finite".into()));
    }
    Ok(())
}

/// Every pair contribution across all queries, in enumeration order.
pub fn pair_lambdas(queries: &[Query], scores: &[f64], config: &LambdaConfig) -> Result<Vec<PairLambda>> {
    check_scores(queries, scores)?;
    let mut out = Vec::new();
    for q in queries {
        for_each_pair(q, scores, config, |p| out.push(p))?;
    }
    Ok(out)
}

fn lambdas_with_metric(queries: &[Query], scores: &[f64], config: &LambdaConfig) -> Result<(LambdaBatch, f64)> {
    check_scores(queries, scores)?;
    let mut batch = LambdaBatch {
        lambda: vec![0.0; scores.len()],
        weight: vec![0.0; scores.len()],
    };
    let mut metric_sum = 0.0;
    for q in queries {
        metric_sum += for_each_pair(q, scores, config, |p| {
            batch.lambda[p.better] += p.lambda;
            batch.lambda[p.worse] -= p.lambda;
            batch.weight[p.better] += p.weight;
            batch.weight[p.worse] += p.weight;
        })?;
    }
    let mean = if queries.is_empty() {
        0.0
    } else {
        metric_sum / queries.len() as f64
    };
    Ok((batch, mean))
}

/// Lambdas for rows referenced by `queries`; `scores` is indexed by dataset row.
pub fn compute_lambdas(queries: &[Query], scores: &[f64], config: &LambdaConfig) -> Result<LambdaBatch> {
    Ok(lambdas_with_metric(queries, scores, config)?.0)
}

/// Training metric averaged over queries after `round` boosting rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedRanker {
    pub ensemble: BoostedEnsemble,
    pub trace: Vec<TraceRow>,
}

struct LambdaProvider<'a> {
    queries: &'a [Query],
    config: &'a LambdaConfig,
    trace: Vec<TraceRow>,
}

impl GradientProvider for LambdaProvider<'_> {
    fn gradients(&mut self, round: usize, scores: &[f64], grad: &mut [f64], hess: &mut [f64]) -> Result<()> {
        let (batch, metric) = lambdas_with_metric(self.queries, scores, self.config)?;
        self.trace.push(TraceRow { round, metric });
        for i in 0..scores.len() {
            grad[i] = -batch.lambda[i];
            hess[i] = batch.weight[i].max(gbrt::HESSIAN_FLOOR);
        }
        Ok(())
    }
}

/// Builds queries with per-query cutoffs for the given scheme and setting.
pub fn build_queries(
    dataset: &UpliftDataset,
    scheme: RelevanceScheme,
    partition: Partition,
    cutoff_fraction: f64,
) -> Result<Vec<Query>> {
    Ok(assign_relevance(dataset, scheme, partition)?
        .into_iter()
        .map(|q| q.with_cutoff_fraction(cutoff_fraction))
        .collect())
}

pub fn train(
    dataset: &UpliftDataset,
    scheme: RelevanceScheme,
    partition: Partition,
    config: &LambdaConfig,
) -> Result<TrainedRanker> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Argument("cannot train on an empty dataset".into()));
    }
    let queries = build_queries(dataset, scheme, partition, config.cutoff_fraction)?;
    let rows = dataset.features();
    let mut provider = LambdaProvider {
        queries: &queries,
        config,
        trace: Vec::with_capacity(config.gbrt.n_trees + 1),
    };
    let ensemble = gbrt::fit_with_gradients(&rows, &mut provider, &config.gbrt)?;
    let mut trace = provider.trace;
    let final_scores = ensemble.predict(&rows)?;
    let (_, metric) = lambdas_with_metric(&queries, &final_scores, &LambdaConfig {
        full_pairs: false,
        ..config.clone()
    })?;
    trace.push(TraceRow {
        round: config.gbrt.n_trees,
        metric,
    });
    Ok(TrainedRanker { ensemble, trace })
}

pub fn predict_scores(ensemble: &BoostedEnsemble, dataset: &UpliftDataset) -> Result<Vec<f64>> {
    ensemble.predict(&dataset.features())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UpliftInstance;
    use crate::eval::{auuc, ValueFunctionSpec};
    use crate::rank_by_scores;
    use approx::assert_abs_diff_eq;

    fn cfg(metric: RankMetric) -> LambdaConfig {
        LambdaConfig {
            metric,
            ..LambdaConfig::default()
        }
    }

    #[test]
    fn two_items_equal_scores() {
        let q = Query::new("q", vec![0, 1], vec![1.0, 0.0]).unwrap();
        let b = compute_lambdas(&[q], &[0.0, 0.0], &cfg(RankMetric::Pcg)).unwrap();
        assert_eq!(b.lambda, vec![0.5, -0.5]);
        assert_eq!(b.weight, vec![0.25, 0.25]);
    }

    #[test]
    fn equal_relevances_give_zero_lambdas() {
        let q = Query::new("q", vec![0, 1, 2], vec![2.0; 3]).unwrap();
        let b = compute_lambdas(&[q], &[0.3, -1.0, 2.0], &cfg(RankMetric::Pcg)).unwrap();
        assert!(b.lambda.iter().chain(&b.weight).all(|&v| v == 0.0));
    }

    #[test]
    fn restricted_pairs_match_full_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for metric in [RankMetric::Pcg, RankMetric::Dcg(crate::metrics::DcgForm::Exponential), RankMetric::Map] {
            let n = 30;
            let rel: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.3))).collect();
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let q = Query::new("q", (0..n).collect(), rel).unwrap().with_cutoff_fraction(0.3);
            let fast = compute_lambdas(std::slice::from_ref(&q), &scores, &cfg(metric)).unwrap();
            let full = compute_lambdas(&[q], &scores, &LambdaConfig { full_pairs: true, ..cfg(metric) }).unwrap();
            for (a, b) in fast.lambda.iter().zip(&full.lambda) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn map_rejects_graded_relevance() {
        let q = Query::new("q", vec![0, 1], vec![2.0, 0.0]).unwrap();
        assert!(compute_lambdas(&[q], &[0.0, 0.0], &cfg(RankMetric::Map)).is_err());
    }

    fn separable(n: usize) -> UpliftDataset {
        // feature 0 encodes the category; TR and CNR get high values
        let inst = (0..n)
            .map(|i| {
                let treated = i % 2 == 0;
                let response = (i / 2) % 3 == 0;
                let x = match (treated, response) {
                    (true, true) | (false, false) => 1.0,
                    _ => 0.0,
                };
                UpliftInstance::new(vec![x, (i % 5) as f64], response, treated)
            })
            .collect();
        UpliftDataset::new(inst).unwrap()
    }

    #[test]
    fn training_improves_joint_relative_auuc() {
        let ds = separable(120);
        let config = LambdaConfig {
            gbrt: GbrtConfig { n_trees: 30, learning_rate: 0.1, ..GbrtConfig::default() },
            ..cfg(RankMetric::Pcg)
        };
        let trained = train(&ds, RelevanceScheme::Rel, Partition::Joint, &config).unwrap();
        assert_eq!(trained.trace.len(), 31);
        let spec = ValueFunctionSpec::UPLIFT_JOINT_RELATIVE;
        let before = auuc(&rank_by_scores(&ds, &vec![0.0; ds.len()], Partition::Joint).unwrap(), spec).unwrap();
        let scores = predict_scores(&trained.ensemble, &ds).unwrap();
        let after = auuc(&rank_by_scores(&ds, &scores, Partition::Joint).unwrap(), spec).unwrap();
        assert!(after.auuc > before.auuc, "{} <= {}", after.auuc, before.auuc);
        assert!(trained.trace.last().unwrap().metric >= trained.trace[0].metric);
    }

    #[test]
    fn separate_training_and_determinism() {
        let ds = separable(80);
        let config = LambdaConfig {
            cutoff_fraction: 0.3,
            gbrt: GbrtConfig { n_trees: 10, learning_rate: 0.1, ..GbrtConfig::default() },
            ..cfg(RankMetric::Ndcg(crate::metrics::DcgForm::Exponential))
        };
        let a = train(&ds, RelevanceScheme::Abs1, Partition::Separate, &config).unwrap();
        let b = train(&ds, RelevanceScheme::Abs1, Partition::Separate, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_features_leave_base_score() {
        let inst = (0..40)
            .map(|i| UpliftInstance::new(vec![1.0], i % 3 == 0, i % 2 == 0))
            .collect();
        let ds = UpliftDataset::new(inst).unwrap();
        let config = LambdaConfig {
            gbrt: GbrtConfig { n_trees: 5, ..GbrtConfig::default() },
            ..cfg(RankMetric::Pcg)
        };
        let trained = train(&ds, RelevanceScheme::Rel, Partition::Joint, &config).unwrap();
        let scores = predict_scores(&trained.ensemble, &ds).unwrap();
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn invalid_cutoff_is_config_error() {
        let ds = separable(10);
        let config = LambdaConfig { cutoff_fraction: 0.0, ..LambdaConfig::default() };
        assert!(matches!(
            train(&ds, RelevanceScheme::Rel, Partition::Joint, &config),
            Err(Error::Config(_))
        ));
    }
}
