//! Synthetic treatment/control populations with category-dependent scores.
//!
//! Each group draws from its own ChaCha8 stream (stream 0 treated, stream 1
//! control), two draws per instance: the response coin, then the score. Two
//! scenarios with the same seed therefore share the leading instances of
//! each group.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Category, Partition, RankedDataset, UpliftDataset, UpliftInstance};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub n_treated: usize,
    pub n_control: usize,
    pub p_response_treated: f64,
    pub p_response_control: f64,
    /// Score range for TR and CNR.
    pub high_range: (f64, f64),
    /// Score range for TNR and CR.
    pub low_range: (f64, f64),
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_treated: 5000,
            n_control: 5000,
            p_response_treated: 0.07,
            p_response_control: 0.05,
            high_range: (0.2, 1.0),
            low_range: (0.0, 0.8),
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn with_sizes(n_treated: usize, n_control: usize, seed: u64) -> Self {
        Self {
            n_treated,
            n_control,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_treated == 0 || self.n_control == 0 {
            return Err(Error::Argument("both group sizes must be at least 1".into()));
        }
        for p in [self.p_response_treated, self.p_response_control] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("response rate {p} outside [0, 1]")));
            }
        }
        for (lo, hi) in [self.high_range, self.low_range] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Argument(format!("score range [{lo}, {hi}] is not ordered")));
            }
        }
        Ok(())
    }

    fn range_for(&self, category: Category) -> (f64, f64) {
        match category {
            Category::TR | Category::CNR => self.high_range,
            Category::TNR | Category::CR => self.low_range,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Balanced,
    TreatedHeavy,
    ControlHeavy,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Balanced, Scenario::TreatedHeavy, Scenario::ControlHeavy];

    /// Group sizes for a base size `n`: (n, n), (9m, m) or (m, 9m) with m = n/5.
    pub fn sizes(self, base_n: usize) -> (usize, usize) {
        let m = base_n / 5;
        match self {
            Scenario::Balanced => (base_n, base_n),
            Scenario::TreatedHeavy => (9 * m, m),
            Scenario::ControlHeavy => (m, 9 * m),
        }
    }

    pub fn spec(self, base_n: usize, seed: u64) -> ScenarioSpec {
        let (t, c) = self.sizes(base_n);
        ScenarioSpec::with_sizes(t, c, seed)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Balanced => "balanced",
            Scenario::TreatedHeavy => "treated-heavy",
            Scenario::ControlHeavy => "control-heavy",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string() == s)
            .ok_or_else(|| Error::Argument(format!("unknown scenario `{s}`")))
    }
}

pub fn standard_scenarios(base_n: usize, seed: u64) -> Result<[ScenarioSpec; 3]> {
    if base_n < 10 {
        return Err(Error::Argument(format!("base size must be at least 10, got {base_n}")));
    }
    Ok(Scenario::ALL.map(|s| s.spec(base_n, seed)))
}

/// A simulated population; the synthetic score doubles as its only feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub dataset: UpliftDataset,
    pub scores: Vec<f64>,
}

impl Simulation {
    pub fn ranked(&self, partition: Partition) -> Result<RankedDataset<'_>> {
        RankedDataset::new(&self.dataset, self.scores.clone(), partition)
    }

    /// Writes `t,y,score` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{other:?}")),
        })?;
        w.write_record(["t", "y", "score"])?;
        for (inst, s) in self.dataset.instances().iter().zip(&self.scores) {
            w.write_record([
                u8::from(inst.treated).to_string(),
                u8::from(inst.response).to_string(),
                s.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn draw_group(spec: &ScenarioSpec, treated: bool, out: &mut Vec<(UpliftInstance, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(u64::from(!treated));
    let (n, p) = if treated {
        (spec.n_treated, spec.p_response_treated)
    } else {
        (spec.n_control, spec.p_response_control)
    };
    for _ in 0..n {
        let response = rng.gen::<f64>() < p;
        let (lo, hi) = spec.range_for(Category::of(response, treated));
        let score = lo + (hi - lo) * rng.gen::<f64>();
        out.push((UpliftInstance::new(vec![score], response, treated), score));
    }
}

/// Treated instances first, then control.
pub fn simulate(spec: &ScenarioSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut drawn = Vec::with_capacity(spec.n_treated + spec.n_control);
    draw_group(spec, true, &mut drawn);
    draw_group(spec, false, &mut drawn);
    let (instances, scores): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    Ok(Simulation {
        dataset: UpliftDataset::new(instances)?,
        scores,
    })
}
