//! Pointwise uplift scorers built on logistic boosted trees.

use serde::{Deserialize, Serialize};

use crate::data::{Group, UpliftDataset};
use crate::error::{Error, Result};
use crate::gbrt::{self, BoostedEnsemble, GbrtConfig, Loss};
use crate::relevance::flipped_label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    FlippedLabel,
    TwoModel,
    DummyTreatment,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::FlippedLabel => "flipped",
            BaselineKind::TwoModel => "two-model",
            BaselineKind::DummyTreatment => "dummy",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flipped" | "flipped-label" => Ok(BaselineKind::FlippedLabel),
            "two-model" => Ok(BaselineKind::TwoModel),
            "dummy" | "dummy-treatment" => Ok(BaselineKind::DummyTreatment),
            other => Err(Error::Argument(format!("unknown baseline kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UpliftScorer {
    /// Score = P(Z = 1 | X) with Z = 1 for TR and CNR.
    FlippedLabel { model: BoostedEnsemble },
    /// Score = P_T(y | X) − P_C(y | X).
    TwoModel {
        treated: BoostedEnsemble,
        control: BoostedEnsemble,
    },
    /// One model over `[X, d, d·X]`; score contrasts d = 1 with d = 0.
    DummyTreatment {
        model: BoostedEnsemble,
        n_features: usize,
    },
}

fn logistic(config: &GbrtConfig) -> GbrtConfig {
    GbrtConfig {
        loss: Loss::Logistic,
        ..config.clone()
    }
}

fn require_groups(dataset: &UpliftDataset) -> Result<()> {
    if dataset.n_treated() == 0 || dataset.n_control() == 0 {
        return Err(Error::DegenerateGroup(format!(
            "both groups must be non-empty (|T|={}, |C|={})",
            dataset.n_treated(),
            dataset.n_control()
        )));
    }
    Ok(())
}

fn responses(dataset: &UpliftDataset) -> Vec<f64> {
    dataset
        .instances()
        .iter()
        .map(|i| f64::from(u8::from(i.response)))
        .collect()
}

/// Row expanded with the treatment dummy and its interactions: `[x, d, d·x]`.
pub fn expand_interactions(x: &[f64], treated: bool) -> Vec<f64> {
    let d = f64::from(u8::from(treated));
    let mut out = Vec::with_capacity(2 * x.len() + 1);
    out.extend_from_slice(x);
    out.push(d);
    out.extend(x.iter().map(|v| d * v));
    out
}

pub fn fit_flipped_label(dataset: &UpliftDataset, config: &GbrtConfig) -> Result<UpliftScorer> {
    let z: Vec<f64> = flipped_label(dataset).into_iter().map(f64::from).collect();
    if z.iter().all(|&v| v == 1.0) || z.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateGroup(
            "flipped label has a single class".into(),
        ));
    }
    let model = gbrt::fit(&dataset.features(), &z, &logistic(config))?;
    Ok(UpliftScorer::FlippedLabel { model })
}

pub fn fit_two_model(dataset: &UpliftDataset, config: &GbrtConfig) -> Result<UpliftScorer> {
    require_groups(dataset)?;
    let config = logistic(config);
    let fit_group = |g: Group| {
        let sub = dataset.group(g);
        gbrt::fit(&sub.features(), &responses(&sub), &config)
    };
    Ok(UpliftScorer::TwoModel {
        treated: fit_group(Group::Treated)?,
        control: fit_group(Group::Control)?,
    })
}

pub fn fit_dummy_treatment(dataset: &UpliftDataset, config: &GbrtConfig) -> Result<UpliftScorer> {
    require_groups(dataset)?;
    let rows: Vec<Vec<f64>> = dataset
        .instances()
        .iter()
        .map(|i| expand_interactions(&i.features, i.treated))
        .collect();
    let model = gbrt::fit(&rows, &responses(dataset), &logistic(config))?;
    Ok(UpliftScorer::DummyTreatment {
        model,
        n_features: dataset.n_features(),
    })
}

pub fn fit_baseline(kind: BaselineKind, dataset: &UpliftDataset, config: &GbrtConfig) -> Result<UpliftScorer> {
    match kind {
        BaselineKind::FlippedLabel => fit_flipped_label(dataset, config),
        BaselineKind::TwoModel => fit_two_model(dataset, config),
        BaselineKind::DummyTreatment => fit_dummy_treatment(dataset, config),
    }
}

impl UpliftScorer {
    pub fn kind(&self) -> BaselineKind {
        match self {
            UpliftScorer::FlippedLabel { .. } => BaselineKind::FlippedLabel,
            UpliftScorer::TwoModel { .. } => BaselineKind::TwoModel,
            UpliftScorer::DummyTreatment { .. } => BaselineKind::DummyTreatment,
        }
    }

    pub fn score(&self, dataset: &UpliftDataset) -> Result<Vec<f64>> {
        let rows = dataset.features();
        match self {
            UpliftScorer::FlippedLabel { model } => model.predict_proba(&rows),
            UpliftScorer::TwoModel { treated, control } => {
                let pt = treated.predict_proba(&rows)?;
                let pc = control.predict_proba(&rows)?;
                Ok(pt.iter().zip(&pc).map(|(a, b)| a - b).collect())
            }
            UpliftScorer::DummyTreatment { model, n_features } => {
                if dataset.n_features() != *n_features {
                    return Err(Error::Shape {
                        what: "features",
                        expected: *n_features,
                        got: dataset.n_features(),
                    });
                }
                let on: Vec<Vec<f64>> = rows.iter().map(|x| expand_interactions(x, true)).collect();
                let off: Vec<Vec<f64>> = rows.iter().map(|x| expand_interactions(x, false)).collect();
                let p1 = model.predict_proba(&on)?;
                let p0 = model.predict_proba(&off)?;
                Ok(p1.iter().zip(&p0).map(|(a, b)| a - b).collect())
            }
        }
    }
}
