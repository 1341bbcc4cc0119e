//! Dataset representation, category labelling, rankings and the counting
//! primitives every value function is built on.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation: a dense feature vector, a binary response and a binary treatment flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpliftInstance {
    pub features: Vec<f64>,
    pub response: bool,
    pub treated: bool,
}

impl UpliftInstance {
    pub fn new(features: Vec<f64>, response: bool, treated: bool) -> Self {
        Self {
            features,
            response,
            treated,
        }
    }

    /// Builds an instance from 0/1 encoded response and treatment values.
    pub fn from_binary(features: Vec<f64>, y: u8, t: u8) -> Result<Self> {
        if y > 1 || t > 1 {
            return Err(Error::Argument(format!(
                "response and treatment must be 0 or 1, got y={y}, t={t}"
            )));
        }
        Ok(Self::new(features, y == 1, t == 1))
    }

    pub fn category(&self) -> Category {
        Category::of(self.response, self.treated)
    }
}

/// The four (treatment, response) cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Treated responder.
    TR,
    /// Treated non-responder.
    TNR,
    /// Control responder.
    CR,
    /// Control non-responder.
    CNR,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::TR, Category::TNR, Category::CR, Category::CNR];

    pub fn of(response: bool, treated: bool) -> Self {
        match (treated, response) {
            (true, true) => Category::TR,
            (true, false) => Category::TNR,
            (false, true) => Category::CR,
            (false, false) => Category::CNR,
        }
    }

    pub fn is_treated(self) -> bool {
        matches!(self, Category::TR | Category::TNR)
    }

    pub fn is_responder(self) -> bool {
        matches!(self, Category::TR | Category::CR)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::TR => "TR",
            Category::TNR => "TNR",
            Category::CR => "CR",
            Category::CNR => "CNR",
        };
        f.write_str(s)
    }
}

pub fn categorize(instance: &UpliftInstance) -> Category {
    instance.category()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Treated,
    Control,
}

/// Whether treated and control instances are ranked as one list or as two lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Joint,
    Separate,
}

impl Partition {
    pub fn name(self) -> &'static str {
        match self {
            Partition::Joint => "joint",
            Partition::Separate => "separate",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "joint" => Ok(Partition::Joint),
            "separate" => Ok(Partition::Separate),
            other => Err(Error::Argument(format!(
                "unknown setting `{other}` (expected joint or separate)"
            ))),
        }
    }
}

/// A collection of instances sharing one feature dimensionality.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpliftDataset {
    instances: Vec<UpliftInstance>,
    n_features: usize,
}

impl UpliftDataset {
    pub fn new(instances: Vec<UpliftInstance>) -> Result<Self> {
        let n_features = instances.first().map_or(0, |i| i.features.len());
        for (row, inst) in instances.iter().enumerate() {
            if inst.features.len() != n_features {
                return Err(Error::Ingestion {
                    row: row + 1,
                    message: format!(
                        "expected {n_features} features, found {}",
                        inst.features.len()
                    ),
                });
            }
        }
        Ok(Self {
            instances,
            n_features,
        })
    }

    /// Builds a dataset with no features from `(y, t)` pairs.
    pub fn from_labels(labels: &[(u8, u8)]) -> Result<Self> {
        let instances = labels
            .iter()
            .map(|&(y, t)| UpliftInstance::from_binary(Vec::new(), y, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(instances)
    }

    pub fn instances(&self) -> &[UpliftInstance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<UpliftInstance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// |T|
    pub fn n_treated(&self) -> usize {
        self.instances.iter().filter(|i| i.treated).count()
    }

    /// |C|
    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn categories(&self) -> Vec<Category> {
        self.instances.iter().map(UpliftInstance::category).collect()
    }

    /// Counts per category, indexed by [`Category::index`].
    pub fn category_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for inst in &self.instances {
            counts[inst.category().index()] += 1;
        }
        counts
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.instances.iter().map(|i| i.features.as_slice()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            n_features: self.n_features,
        }
    }

    /// Instances of one group, in dataset order.
    pub fn group(&self, group: Group) -> Self {
        let want = group == Group::Treated;
        Self {
            instances: self
                .instances
                .iter()
                .filter(|i| i.treated == want)
                .cloned()
                .collect(),
            n_features: self.n_features,
        }
    }
}

/// Responder and group counts among the top `k` of a joint ordering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JointCounts {
    pub treated: usize,
    pub control: usize,
    pub treated_responders: usize,
    pub control_responders: usize,
}

/// A dataset ordered by descending model score.
///
/// Both the joint ordering and the per-group orderings are materialised as
/// prefix counts, so every counter is O(1). The partition tag records which
/// family of counters the ranking is meant to be evaluated with.
#[derive(Clone, Debug)]
pub struct RankedDataset<'a> {
    dataset: &'a UpliftDataset,
    scores: Vec<f64>,
    order: Vec<usize>,
    partition: Partition,
    // prefix[k] = counts among the first k of `order`
    joint_prefix: Vec<JointCounts>,
    treated_order: Vec<usize>,
    control_order: Vec<usize>,
    // responders among the first k of each group's own ordering
    treated_responders: Vec<usize>,
    control_responders: Vec<usize>,
}

/// Indices sorted by descending score; ties keep ascending index order.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

pub fn rank_by_scores<'a>(
    dataset: &'a UpliftDataset,
    scores: &[f64],
    partition: Partition,
) -> Result<RankedDataset<'a>> {
    RankedDataset::new(dataset, scores.to_vec(), partition)
}

impl<'a> RankedDataset<'a> {
    pub fn new(dataset: &'a UpliftDataset, scores: Vec<f64>, partition: Partition) -> Result<Self> {
        if scores.len() != dataset.len() {
            return Err(Error::Shape {
                what: "scores",
                expected: dataset.len(),
                got: scores.len(),
            });
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data(format!("score at index {pos} is not finite")));
        }
        let order = descending_order(&scores);
        let instances = dataset.instances();

        let mut joint_prefix = Vec::with_capacity(order.len() + 1);
        let mut acc = JointCounts::default();
        joint_prefix.push(acc);
        for &i in &order {
            let inst = &instances[i];
            if inst.treated {
                acc.treated += 1;
                acc.treated_responders += usize::from(inst.response);
            } else {
                acc.control += 1;
                acc.control_responders += usize::from(inst.response);
            }
            joint_prefix.push(acc);
        }

        let (treated_order, control_order): (Vec<usize>, Vec<usize>) =
            order.iter().partition(|&&i| instances[i].treated);
        let responder_prefix = |sub: &[usize]| {
            let mut prefix = Vec::with_capacity(sub.len() + 1);
            prefix.push(0);
            let mut r = 0;
            for &i in sub {
                r += usize::from(instances[i].response);
                prefix.push(r);
            }
            prefix
        };
        let treated_responders = responder_prefix(&treated_order);
        let control_responders = responder_prefix(&control_order);

        Ok(Self {
            dataset,
            scores,
            order,
            partition,
            joint_prefix,
            treated_order,
            control_order,
            treated_responders,
            control_responders,
        })
    }

    /// The same scores viewed under another partition.
    pub fn with_partition(&self, partition: Partition) -> Self {
        Self {
            partition,
            ..self.clone()
        }
    }

    pub fn dataset(&self) -> &'a UpliftDataset {
        self.dataset
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// π: dataset indices in ranked order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn group_order(&self, group: Group) -> &[usize] {
        match group {
            Group::Treated => &self.treated_order,
            Group::Control => &self.control_order,
        }
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treated_order.len()
    }

    pub fn n_control(&self) -> usize {
        self.control_order.len()
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.group_order(group).len()
    }

    /// Total responders per group over the whole dataset.
    pub fn total_responders(&self, group: Group) -> usize {
        match group {
            Group::Treated => *self.treated_responders.last().unwrap_or(&0),
            Group::Control => *self.control_responders.last().unwrap_or(&0),
        }
    }

    fn check_k(&self, k: usize, max: usize) -> Result<()> {
        if k == 0 || k > max {
            return Err(Error::Range {
                what: "k",
                value: k,
                min: 1,
                max,
            });
        }
        Ok(())
    }

    fn require(&self, partition: Partition) -> Result<()> {
        if self.partition != partition {
            return Err(Error::PartitionMismatch {
                expected: partition.name(),
                got: self.partition.name(),
            });
        }
        Ok(())
    }

    /// N^T(D, k)
    pub fn count_treated(&self, k: usize) -> Result<usize> {
        self.check_k(k, self.len())?;
        Ok(self.joint_prefix[k].treated)
    }

    /// N^C(D, k)
    pub fn count_control(&self, k: usize) -> Result<usize> {
        self.check_k(k, self.len())?;
        Ok(self.joint_prefix[k].control)
    }

    /// R^T(D, k) or R^C(D, k) over the joint ordering.
    pub fn count_responders_joint(&self, k: usize, group: Group) -> Result<usize> {
        self.require(Partition::Joint)?;
        self.check_k(k, self.len())?;
        let c = self.joint_prefix[k];
        Ok(match group {
            Group::Treated => c.treated_responders,
            Group::Control => c.control_responders,
        })
    }

    /// R(T, k) or R(C, k) over the group's own ordering.
    pub fn count_responders_separate(&self, k: usize, group: Group) -> Result<usize> {
        self.require(Partition::Separate)?;
        self.check_k(k, self.group_size(group))?;
        Ok(self.separate_responders(group, k))
    }

    /// Joint counts for `k` in `0..=n`.
    pub(crate) fn joint_counts(&self, k: usize) -> JointCounts {
        self.joint_prefix[k]
    }

    /// Group responders for `k` in `0..=|group|`.
    pub(crate) fn separate_responders(&self, group: Group, k: usize) -> usize {
        match group {
            Group::Treated => self.treated_responders[k],
            Group::Control => self.control_responders[k],
        }
    }
}

/// Splits a dataset into train and test parts, stratified on the four categories.
///
/// Every category with at least two members contributes its share of the
/// train set via largest-remainder apportionment, so category counts stay
/// within one instance of their proportional targets and the train size is
/// `round(fraction * n)`. Categories with fewer than two members are pooled
/// and split without stratification. Both parts keep dataset order.
pub fn split_train_test(
    dataset: &UpliftDataset,
    fraction: f64,
    seed: u64,
) -> Result<(UpliftDataset, UpliftDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); 4];
    for (i, inst) in dataset.instances().iter().enumerate() {
        strata[inst.category().index()].push(i);
    }
    let mut pooled = Vec::new();
    let mut kept = Vec::new();
    for (cat, members) in Category::ALL.iter().zip(strata) {
        if members.len() < 2 {
            if !members.is_empty() {
                log::warn!(
                    "category {cat} has {} member(s); splitting it without stratification",
                    members.len()
                );
            }
            pooled.extend(members);
        } else {
            kept.push(members);
        }
    }
    if !pooled.is_empty() {
        pooled.sort_unstable();
        kept.push(pooled);
    }

    let n = dataset.len();
    let target = round_half_up(fraction * n as f64).min(n);
    let exact: Vec<f64> = kept.iter().map(|s| fraction * s.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut remaining = target.saturating_sub(quota.iter().sum());
    let mut by_remainder: Vec<usize> = (0..kept.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &s in by_remainder.iter().cycle().take(by_remainder.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[s] < kept[s].len() {
            quota[s] += 1;
            remaining -= 1;
        }
    }

    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);
    for (mut members, q) in kept.into_iter().zip(quota) {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..q]);
        test.extend_from_slice(&members[q..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Argument(format!(
            "split fraction {fraction} of {n} instances leaves an empty part"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Round-half-up that tolerates float noise just below a .5 boundary.
pub(crate) fn round_half_up(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        (x + 0.5 + 1e-9).floor() as usize
    }
}
