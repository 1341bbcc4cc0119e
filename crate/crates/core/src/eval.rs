//! Incremental-gain value functions, uplift/Qini curves and AUUC.
//!
//! Six value functions arise from crossing the curve family (Qini, Uplift)
//! with the rank mode (separate groups or one joint list) and the count mode
//! (absolute counts or counts relative to group size). Qini with separate
//! ranking and relative counts does not exist, and the two joint relative
//! variants share one formula.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{round_half_up, Group, Partition, RankedDataset};
use crate::error::{Error, Result};

/// Number of targeting intervals used for separate-mode curves.
pub const DEFAULT_INTERVALS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveFamily {
    Qini,
    Uplift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    Absolute,
    Relative,
}

/// One of the six value-function variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ValueFunctionSpec {
    curve: CurveFamily,
    rank_mode: Partition,
    count_mode: CountMode,
}

impl ValueFunctionSpec {
    pub const QINI_SEPARATE_ABSOLUTE: Self = Self::raw(CurveFamily::Qini, Partition::Separate, CountMode::Absolute);
    pub const UPLIFT_SEPARATE_ABSOLUTE: Self = Self::raw(CurveFamily::Uplift, Partition::Separate, CountMode::Absolute);
    pub const UPLIFT_SEPARATE_RELATIVE: Self = Self::raw(CurveFamily::Uplift, Partition::Separate, CountMode::Relative);
    pub const QINI_JOINT_ABSOLUTE: Self = Self::raw(CurveFamily::Qini, Partition::Joint, CountMode::Absolute);
    pub const UPLIFT_JOINT_ABSOLUTE: Self = Self::raw(CurveFamily::Uplift, Partition::Joint, CountMode::Absolute);
    pub const QINI_JOINT_RELATIVE: Self = Self::raw(CurveFamily::Qini, Partition::Joint, CountMode::Relative);
    pub const UPLIFT_JOINT_RELATIVE: Self = Self::raw(CurveFamily::Uplift, Partition::Joint, CountMode::Relative);

    /// Every distinct formula (the joint relative alias appears once).
    pub const ALL: [Self; 6] = [
        Self::QINI_SEPARATE_ABSOLUTE,
        Self::UPLIFT_SEPARATE_ABSOLUTE,
        Self::UPLIFT_SEPARATE_RELATIVE,
        Self::QINI_JOINT_ABSOLUTE,
        Self::UPLIFT_JOINT_ABSOLUTE,
        Self::UPLIFT_JOINT_RELATIVE,
    ];

    const fn raw(curve: CurveFamily, rank_mode: Partition, count_mode: CountMode) -> Self {
        Self {
            curve,
            rank_mode,
            count_mode,
        }
    }

    pub fn new(curve: CurveFamily, rank_mode: Partition, count_mode: CountMode) -> Result<Self> {
        if curve == CurveFamily::Qini
            && rank_mode == Partition::Separate
            && count_mode == CountMode::Relative
        {
            return Err(Error::UnsupportedSpec(
                "qini-separate-relative is not a defined value function".into(),
            ));
        }
        Ok(Self::raw(curve, rank_mode, count_mode))
    }

    pub fn curve(&self) -> CurveFamily {
        self.curve
    }

    pub fn rank_mode(&self) -> Partition {
        self.rank_mode
    }

    pub fn count_mode(&self) -> CountMode {
        self.count_mode
    }

    /// Canonical form: the joint relative Qini variant maps to its Uplift alias.
    pub fn canonical(self) -> Self {
        if self.rank_mode == Partition::Joint && self.count_mode == CountMode::Relative {
            Self::UPLIFT_JOINT_RELATIVE
        } else {
            self
        }
    }

    fn check_groups(&self, n_treated: usize, n_control: usize) -> Result<()> {
        let needs_treated = self.count_mode == CountMode::Relative;
        let needs_control = self.count_mode == CountMode::Relative
            || (self.curve == CurveFamily::Qini && self.rank_mode == Partition::Separate);
        if needs_treated && n_treated == 0 {
            return Err(Error::DegenerateGroup(format!("{self} divides by |T| = 0")));
        }
        if needs_control && n_control == 0 {
            return Err(Error::DegenerateGroup(format!("{self} divides by |C| = 0")));
        }
        Ok(())
    }
}

impl fmt::Display for ValueFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let curve = match self.curve {
            CurveFamily::Qini => "qini",
            CurveFamily::Uplift => "uplift",
        };
        let count = match self.count_mode {
            CountMode::Absolute => "absolute",
            CountMode::Relative => "relative",
        };
        write!(f, "{curve}-{}-{count}", self.rank_mode)
    }
}

impl FromStr for ValueFunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<String> = s
            .split(['-', '_'])
            .map(|p| p.to_ascii_lowercase())
            .collect();
        let bad = || Error::Argument(format!("unknown value function `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let curve = match parts[0].as_str() {
            "qini" => CurveFamily::Qini,
            "uplift" => CurveFamily::Uplift,
            _ => return Err(bad()),
        };
        let rank = match parts[1].as_str() {
            "sep" | "separate" => Partition::Separate,
            "joint" => Partition::Joint,
            _ => return Err(bad()),
        };
        let count = match parts[2].as_str() {
            "abs" | "absolute" => CountMode::Absolute,
            "rel" | "relative" => CountMode::Relative,
            _ => return Err(bad()),
        };
        Self::new(curve, rank, count)
    }
}

impl TryFrom<String> for ValueFunctionSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ValueFunctionSpec> for String {
    fn from(spec: ValueFunctionSpec) -> Self {
        spec.to_string()
    }
}

/// Targeting depth: a fraction of each group (separate) or a rank (joint).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Depth {
    Fraction(f64),
    Rank(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuucResult {
    /// Area on the per-fraction scale (mean of the curve values).
    pub auuc: f64,
    /// Plain sum of the curve values.
    pub auuc_raw: f64,
    pub spec: ValueFunctionSpec,
    pub n_points: usize,
}

/// Group size targeted at fraction `p`, rounded half up.
pub fn group_cutoff(p: f64, group_size: usize) -> usize {
    round_half_up(p * group_size as f64).min(group_size)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn validate(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec) -> Result<()> {
    if ranked.partition() != spec.rank_mode {
        return Err(Error::PartitionMismatch {
            expected: spec.rank_mode.name(),
            got: ranked.partition().name(),
        });
    }
    spec.check_groups(ranked.n_treated(), ranked.n_control())
}

// Unchecked evaluation at separate fraction p.
fn separate_value(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec, p: f64) -> f64 {
    let n_t = ranked.n_treated();
    let n_c = ranked.n_control();
    let r_t = ranked.separate_responders(Group::Treated, group_cutoff(p, n_t)) as f64;
    let r_c = ranked.separate_responders(Group::Control, group_cutoff(p, n_c)) as f64;
    match (spec.curve, spec.count_mode) {
        (CurveFamily::Qini, CountMode::Absolute) => r_t - r_c * n_t as f64 / n_c as f64,
        (CurveFamily::Uplift, CountMode::Absolute) => r_t - r_c,
        (_, CountMode::Relative) => r_t / n_t as f64 - r_c / n_c as f64,
    }
}

// Unchecked evaluation at joint rank k (1-based).
fn joint_value(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec, k: usize) -> f64 {
    let c = ranked.joint_counts(k);
    let r_t = c.treated_responders as f64;
    let r_c = c.control_responders as f64;
    match (spec.curve, spec.count_mode) {
        (_, CountMode::Relative) => {
            r_t / ranked.n_treated() as f64 - r_c / ranked.n_control() as f64
        }
        (CurveFamily::Qini, CountMode::Absolute) => {
            if c.control == 0 {
                r_t
            } else {
                r_t - r_c * c.treated as f64 / c.control as f64
            }
        }
        (CurveFamily::Uplift, CountMode::Absolute) => {
            (ratio(c.treated_responders, c.treated) - ratio(c.control_responders, c.control))
                * (c.treated + c.control) as f64
        }
    }
}

/// V at the given depth.
pub fn value_at(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec, depth: Depth) -> Result<f64> {
    validate(ranked, spec)?;
    match (spec.rank_mode, depth) {
        (Partition::Separate, Depth::Fraction(p)) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Argument(format!("fraction {p} outside (0, 1]")));
            }
            Ok(separate_value(ranked, spec, p))
        }
        (Partition::Joint, Depth::Rank(k)) => {
            if k == 0 || k > ranked.len() {
                return Err(Error::Range {
                    what: "k",
                    value: k,
                    min: 1,
                    max: ranked.len(),
                });
            }
            Ok(joint_value(ranked, spec, k))
        }
        (mode, depth) => Err(Error::Argument(format!(
            "depth {depth:?} does not apply to {mode} ranking"
        ))),
    }
}

fn full_depth_value(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec) -> f64 {
    match spec.rank_mode {
        Partition::Separate => separate_value(ranked, spec, 1.0),
        Partition::Joint if ranked.is_empty() => 0.0,
        Partition::Joint => joint_value(ranked, spec, ranked.len()),
    }
}

/// Curve points: joint at every rank, separate at `intervals` equal fractions.
pub fn build_curve_with(
    ranked: &RankedDataset<'_>,
    spec: ValueFunctionSpec,
    intervals: usize,
) -> Result<Vec<CurvePoint>> {
    validate(ranked, spec)?;
    Ok(match spec.rank_mode {
        Partition::Joint => {
            let n = ranked.len() as f64;
            (1..=ranked.len())
                .map(|k| CurvePoint {
                    x: k as f64 / n,
                    value: joint_value(ranked, spec, k),
                })
                .collect()
        }
        Partition::Separate => {
            if intervals == 0 {
                return Err(Error::Argument("interval count must be positive".into()));
            }
            (1..=intervals)
                .map(|i| {
                    let p = i as f64 / intervals as f64;
                    CurvePoint {
                        x: p,
                        value: separate_value(ranked, spec, p),
                    }
                })
                .collect()
        }
    })
}

pub fn build_curve(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec) -> Result<Vec<CurvePoint>> {
    build_curve_with(ranked, spec, DEFAULT_INTERVALS)
}

/// Curve sampled at x = i/points for i = 1..=points, whatever the rank mode.
/// Joint values use rank `max(1, round(x·n))`.
pub fn sample_curve(
    ranked: &RankedDataset<'_>,
    spec: ValueFunctionSpec,
    points: usize,
) -> Result<Vec<CurvePoint>> {
    validate(ranked, spec)?;
    if points == 0 {
        return Err(Error::Argument("point count must be positive".into()));
    }
    if ranked.is_empty() {
        return Ok(Vec::new());
    }
    Ok((1..=points)
        .map(|i| {
            let x = i as f64 / points as f64;
            let value = match spec.rank_mode {
                Partition::Separate => separate_value(ranked, spec, x),
                Partition::Joint => {
                    let k = round_half_up(x * ranked.len() as f64).clamp(1, ranked.len());
                    joint_value(ranked, spec, k)
                }
            };
            CurvePoint { x, value }
        })
        .collect())
}

pub fn auuc_with(
    ranked: &RankedDataset<'_>,
    spec: ValueFunctionSpec,
    intervals: usize,
) -> Result<AuucResult> {
    let curve = build_curve_with(ranked, spec, intervals)?;
    let raw: f64 = curve.iter().map(|p| p.value).sum();
    let n_points = curve.len();
    Ok(AuucResult {
        auuc: if n_points == 0 { 0.0 } else { raw / n_points as f64 },
        auuc_raw: raw,
        spec,
        n_points,
    })
}

/// Area under the curve: joint sums all n ranks, separate uses 100 intervals.
/// Both are reported per unit fraction; the plain sum is kept in `auuc_raw`.
pub fn auuc(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec) -> Result<AuucResult> {
    auuc_with(ranked, spec, DEFAULT_INTERVALS)
}

/// AUUC truncated at a targeting fraction, normalised by the full point count
/// so that `fraction = 1` reproduces [`auuc`].
pub fn auuc_at_cutoff_with(
    ranked: &RankedDataset<'_>,
    spec: ValueFunctionSpec,
    fraction: f64,
    intervals: usize,
) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!("cutoff fraction {fraction} outside (0, 1]")));
    }
    let curve = build_curve_with(ranked, spec, intervals)?;
    if curve.is_empty() {
        return Ok(0.0);
    }
    let m = curve.len();
    let keep = round_half_up(fraction * m as f64).clamp(1, m);
    Ok(curve[..keep].iter().map(|p| p.value).sum::<f64>() / m as f64)
}

pub fn auuc_at_cutoff(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec, fraction: f64) -> Result<f64> {
    auuc_at_cutoff_with(ranked, spec, fraction, DEFAULT_INTERVALS)
}

/// Chord from the origin to the full-depth value, at the curve's x positions.
pub fn random_baseline(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec) -> Result<Vec<CurvePoint>> {
    let curve = build_curve(ranked, spec)?;
    let end = full_depth_value(ranked, spec);
    Ok(curve
        .iter()
        .map(|p| CurvePoint {
            x: p.x,
            value: p.x * end,
        })
        .collect())
}

/// Baseline value at an arbitrary fraction.
pub fn baseline_at(ranked: &RankedDataset<'_>, spec: ValueFunctionSpec, x: f64) -> Result<f64> {
    validate(ranked, spec)?;
    Ok(x * full_depth_value(ranked, spec))
}

/// Per-group exact sum Σ_{k≤|T|} R(T,k)/|T| − Σ_{k≤|C|} R(C,k)/|C| over separate orderings.
pub fn separate_relative_exact_sum(ranked: &RankedDataset<'_>) -> Result<f64> {
    validate(ranked, ValueFunctionSpec::UPLIFT_SEPARATE_RELATIVE)?;
    let group_sum = |g: Group| {
        let size = ranked.group_size(g);
        (1..=size)
            .map(|k| ranked.separate_responders(g, k) as f64)
            .sum::<f64>()
            / size as f64
    };
    Ok(group_sum(Group::Treated) - group_sum(Group::Control))
}

/// Largest gap between the Qini separate absolute curve scaled by 1/|T| and the
/// Uplift separate relative curve. The two are algebraically identical.
pub fn equivalence_check_qini_uplift_separate(ranked: &RankedDataset<'_>) -> Result<f64> {
    let qini = build_curve(ranked, ValueFunctionSpec::QINI_SEPARATE_ABSOLUTE)?;
    let uplift = build_curve(ranked, ValueFunctionSpec::UPLIFT_SEPARATE_RELATIVE)?;
    let n_t = ranked.n_treated() as f64;
    Ok(qini
        .iter()
        .zip(&uplift)
        .map(|(q, u)| (q.value / n_t - u.value).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Two-sided paired Student's t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Argument("paired t-test needs at least two pairs".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let (statistic, p_value) = if se == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, n - 1.0)
            .map_err(|e| Error::Argument(format!("t distribution: {e}")))?;
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TTestResult {
        statistic,
        p_value,
        significant: p_value < alpha,
    })
}

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("x,value\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.x, p.value));
    }
    out
}
