//! Learning-to-rank metrics over relevance lists given in ranked order, plus
//! the pair swap deltas LambdaMART weights its gradients with.
//!
//! Positions are 0-based throughout. A cutoff `k` means the first `k`
//! positions count; everything below contributes nothing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::group_cutoff;

/// Gain function used by DCG: `rel` (linear) or `2^rel - 1` (exponential).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcgForm {
    Linear,
    Exponential,
}

impl DcgForm {
    fn gain(self, rel: f64) -> f64 {
        match self {
            DcgForm::Linear => rel,
            DcgForm::Exponential => rel.exp2() - 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RankMetric {
    PrecisionAtK,
    Map,
    Cg,
    Dcg(DcgForm),
    Ndcg(DcgForm),
    Pcg,
}

impl RankMetric {
    pub fn requires_binary(self) -> bool {
        matches!(self, RankMetric::PrecisionAtK | RankMetric::Map)
    }
}

impl fmt::Display for RankMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RankMetric::PrecisionAtK => "precision",
            RankMetric::Map => "map",
            RankMetric::Cg => "cg",
            RankMetric::Dcg(DcgForm::Linear) => "dcg1",
            RankMetric::Dcg(DcgForm::Exponential) => "dcg",
            RankMetric::Ndcg(DcgForm::Linear) => "ndcg1",
            RankMetric::Ndcg(DcgForm::Exponential) => "ndcg",
            RankMetric::Pcg => "pcg",
        };
        f.write_str(s)
    }
}

impl FromStr for RankMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "precision" | "p@k" => RankMetric::PrecisionAtK,
            "map" => RankMetric::Map,
            "cg" => RankMetric::Cg,
            "dcg" | "dcg2" => RankMetric::Dcg(DcgForm::Exponential),
            "dcg1" => RankMetric::Dcg(DcgForm::Linear),
            "ndcg" | "ndcg2" => RankMetric::Ndcg(DcgForm::Exponential),
            "ndcg1" => RankMetric::Ndcg(DcgForm::Linear),
            "pcg" => RankMetric::Pcg,
            other => return Err(Error::Argument(format!("unknown metric `{other}`"))),
        })
    }
}

impl TryFrom<String> for RankMetric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RankMetric> for String {
    fn from(m: RankMetric) -> Self {
        m.to_string()
    }
}

/// A ranking query: dataset rows with their relevance and the query's own cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    /// Dataset indices of the query's documents.
    pub members: Vec<usize>,
    /// Relevance per member, aligned with `members`.
    pub relevance: Vec<f64>,
    pub cutoff: usize,
}

impl Query {
    pub fn new(id: impl Into<String>, members: Vec<usize>, relevance: Vec<f64>) -> Result<Self> {
        if members.len() != relevance.len() {
            return Err(Error::Shape {
                what: "relevance values",
                expected: members.len(),
                got: relevance.len(),
            });
        }
        if relevance.iter().any(|r| !r.is_finite()) {
            return Err(Error::Data("relevance values must be finite".into()));
        }
        let cutoff = members.len();
        Ok(Self {
            id: id.into(),
            members,
            relevance,
            cutoff,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sets the cutoff to `max(1, round(fraction · len))`.
    pub fn with_cutoff_fraction(mut self, fraction: f64) -> Self {
        self.cutoff = cutoff_for(fraction, self.len());
        self
    }
}

/// Per-query cutoff: `max(1, round(fraction · len))`, capped at `len`.
pub fn cutoff_for(fraction: f64, len: usize) -> usize {
    if len == 0 {
        return 0;
    }
    group_cutoff(fraction, len).clamp(1, len)
}

fn check_cutoff(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Range {
            what: "k",
            value: k,
            min: 1,
            max: n,
        });
    }
    Ok(())
}

fn check_binary(rels: &[f64]) -> Result<()> {
    match rels.iter().find(|&&r| r != 0.0 && r != 1.0) {
        Some(r) => Err(Error::MetricDomain(format!(
            "binary relevance required, found {r}"
        ))),
        None => Ok(()),
    }
}

/// Share of relevant items among the first `k`.
pub fn precision_at_k(rels: &[f64], k: usize) -> Result<f64> {
    check_binary(rels)?;
    check_cutoff(k, rels.len())?;
    Ok(rels[..k].iter().sum::<f64>() / k as f64)
}

fn average_precision_unchecked(rels: &[f64], k: usize) -> f64 {
    let total: f64 = rels.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut hits = 0.0;
    let mut acc = 0.0;
    for (i, &r) in rels[..k].iter().enumerate() {
        if r > 0.0 {
            hits += 1.0;
            acc += hits / (i + 1) as f64;
        }
    }
    acc / total
}

/// Average precision over the first `k` positions, normalised by the
/// query's total relevant count. Zero when nothing is relevant.
pub fn average_precision(rels: &[f64], k: usize) -> Result<f64> {
    check_binary(rels)?;
    if rels.is_empty() {
        return Ok(0.0);
    }
    check_cutoff(k, rels.len())?;
    Ok(average_precision_unchecked(rels, k))
}

pub fn mean_average_precision(queries: &[&[f64]]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Argument("MAP over an empty query set".into()));
    }
    let mut sum = 0.0;
    for q in queries {
        sum += average_precision(q, q.len())?;
    }
    Ok(sum / queries.len() as f64)
}

pub fn cumulative_gain(rels: &[f64], k: usize) -> Result<f64> {
    check_cutoff(k, rels.len())?;
    Ok(rels[..k].iter().sum())
}

fn discount(pos: usize) -> f64 {
    1.0 / ((pos + 2) as f64).log2()
}

fn dcg_unchecked(rels: &[f64], k: usize, form: DcgForm) -> f64 {
    rels[..k]
        .iter()
        .enumerate()
        .map(|(i, &r)| form.gain(r) * discount(i))
        .sum()
}

pub fn dcg(rels: &[f64], k: usize, form: DcgForm) -> Result<f64> {
    check_cutoff(k, rels.len())?;
    Ok(dcg_unchecked(rels, k, form))
}

fn ideal_dcg_unchecked(rels: &[f64], k: usize, form: DcgForm) -> f64 {
    let mut sorted = rels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    dcg_unchecked(&sorted, k, form)
}

pub fn ideal_dcg(rels: &[f64], k: usize, form: DcgForm) -> Result<f64> {
    check_cutoff(k, rels.len())?;
    Ok(ideal_dcg_unchecked(rels, k, form))
}

/// DCG / IDCG; zero when the ideal DCG is not positive.
pub fn ndcg(rels: &[f64], k: usize, form: DcgForm) -> Result<f64> {
    check_cutoff(k, rels.len())?;
    let ideal = ideal_dcg_unchecked(rels, k, form);
    Ok(if ideal <= 0.0 {
        0.0
    } else {
        dcg_unchecked(rels, k, form) / ideal
    })
}

fn pcg_unchecked(rels: &[f64], k: usize) -> f64 {
    let n = rels.len();
    rels[..k]
        .iter()
        .enumerate()
        .map(|(i, &r)| r * (n - i) as f64)
        .sum()
}

/// Promoted cumulative gain: Σ_{i≤k} rel_i · (n − i + 1), n being the list length.
pub fn pcg(rels: &[f64], k: usize) -> Result<f64> {
    check_cutoff(k, rels.len())?;
    Ok(pcg_unchecked(rels, k))
}

/// PCG divided by the PCG of the ideally sorted list; zero when that is not positive.
pub fn pcg_normalized(rels: &[f64], k: usize) -> Result<f64> {
    check_cutoff(k, rels.len())?;
    let mut sorted = rels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let ideal = pcg_unchecked(&sorted, k);
    Ok(if ideal <= 0.0 {
        0.0
    } else {
        pcg_unchecked(rels, k) / ideal
    })
}

/// PCG^T(k₁) + PCG^C(k₂) with k₁ = round(p|T|), k₂ = round(p|C|).
/// A group whose cutoff rounds to zero (or that is empty) contributes nothing.
pub fn pcg_separate(treated: &[f64], control: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Argument(format!("fraction {p} outside (0, 1]")));
    }
    let k1 = group_cutoff(p, treated.len());
    let k2 = group_cutoff(p, control.len());
    Ok(pcg_unchecked(treated, k1) + pcg_unchecked(control, k2))
}

/// Metric value of one query at cutoff `k`.
pub fn evaluate(metric: RankMetric, rels: &[f64], k: usize) -> Result<f64> {
    match metric {
        RankMetric::PrecisionAtK => precision_at_k(rels, k),
        RankMetric::Map => {
            check_binary(rels)?;
            check_cutoff(k, rels.len())?;
            Ok(average_precision_unchecked(rels, k))
        }
        RankMetric::Cg => cumulative_gain(rels, k),
        RankMetric::Dcg(form) => dcg(rels, k, form),
        RankMetric::Ndcg(form) => ndcg(rels, k, form),
        RankMetric::Pcg => pcg(rels, k),
    }
}

/// Precomputed per-query state for repeated swap-delta queries.
#[derive(Clone, Debug)]
pub struct SwapDeltas<'a> {
    metric: RankMetric,
    rels: &'a [f64],
    k: usize,
    // 1/IDCG for NDCG, 0 when undefined
    ndcg_scale: f64,
    total_relevant: f64,
}

impl<'a> SwapDeltas<'a> {
    /// `rels` are relevances in the current ranked order.
    pub fn new(metric: RankMetric, rels: &'a [f64], k: usize) -> Result<Self> {
        check_cutoff(k, rels.len())?;
        if metric.requires_binary() {
            check_binary(rels)?;
        }
        let ndcg_scale = match metric {
            RankMetric::Ndcg(form) => {
                let ideal = ideal_dcg_unchecked(rels, k, form);
                if ideal > 0.0 {
                    1.0 / ideal
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        Ok(Self {
            metric,
            rels,
            k,
            ndcg_scale,
            total_relevant: rels.iter().sum(),
        })
    }

    fn weight(&self, pos: usize) -> f64 {
        if pos >= self.k {
            return 0.0;
        }
        match self.metric {
            RankMetric::PrecisionAtK => 1.0 / self.k as f64,
            RankMetric::Cg => 1.0,
            RankMetric::Dcg(_) | RankMetric::Ndcg(_) => discount(pos),
            RankMetric::Pcg => (self.rels.len() - pos) as f64,
            RankMetric::Map => unreachable!("MAP has no positional weight"),
        }
    }

    fn gain(&self, rel: f64) -> f64 {
        match self.metric {
            RankMetric::Dcg(form) | RankMetric::Ndcg(form) => form.gain(rel),
            _ => rel,
        }
    }

    /// |metric(after swapping positions i and j) − metric(before)|.
    pub fn delta(&self, i: usize, j: usize) -> f64 {
        let (ri, rj) = (self.rels[i], self.rels[j]);
        if ri == rj || i == j {
            return 0.0;
        }
        if self.metric == RankMetric::Map {
            return self.map_delta(i.min(j), i.max(j));
        }
        let d = ((self.gain(ri) - self.gain(rj)) * (self.weight(i) - self.weight(j))).abs();
        match self.metric {
            RankMetric::Ndcg(_) => d * self.ndcg_scale,
            _ => d,
        }
    }

    // Only precisions at positions lo..=hi change when swapping lo and hi.
    fn map_delta(&self, lo: usize, hi: usize) -> f64 {
        if self.total_relevant == 0.0 || lo >= self.k {
            return 0.0;
        }
        let rels = self.rels;
        let end = hi.min(self.k - 1);
        let mut hits: f64 = rels[..lo].iter().sum();
        let (mut before, mut after) = (0.0, 0.0);
        let mut hits_after = hits;
        for pos in lo..=end {
            let r_before = rels[pos];
            let r_after = if pos == lo {
                rels[hi]
            } else if pos == hi {
                rels[lo]
            } else {
                rels[pos]
            };
            hits += r_before;
            hits_after += r_after;
            if r_before > 0.0 {
                before += hits / (pos + 1) as f64;
            }
            if r_after > 0.0 {
                after += hits_after / (pos + 1) as f64;
            }
        }
        ((after - before) / self.total_relevant).abs()
    }
}

/// Change in `metric@k` from swapping positions `i` and `j` of a ranked relevance list.
pub fn swap_delta(metric: RankMetric, rels: &[f64], i: usize, j: usize, k: usize) -> Result<f64> {
    if i >= rels.len() || j >= rels.len() {
        return Err(Error::Range {
            what: "position",
            value: i.max(j),
            min: 0,
            max: rels.len().saturating_sub(1),
        });
    }
    Ok(SwapDeltas::new(metric, rels, k)?.delta(i, j))
}
