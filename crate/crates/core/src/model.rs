//! Model descriptions and trained-model persistence shared by the CLI and
//! the experiment runner.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{fit_baseline, BaselineKind, UpliftScorer};
use crate::data::{Partition, UpliftDataset};
use crate::error::{Error, Result};
use crate::gbrt::{BoostedEnsemble, GbrtConfig};
use crate::lambdamart::{self, LambdaConfig, TraceRow};
use crate::metrics::RankMetric;
use crate::relevance::RelevanceScheme;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    FlippedLabel,
    TwoModel,
    DummyTreatment,
    Lambdamart {
        metric: RankMetric,
        relevance: RelevanceScheme,
        setting: Partition,
        #[serde(default = "one")]
        cutoff: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
}

impl ModelKind {
    fn baseline(&self) -> Option<BaselineKind> {
        match self {
            ModelKind::FlippedLabel => Some(BaselineKind::FlippedLabel),
            ModelKind::TwoModel => Some(BaselineKind::TwoModel),
            ModelKind::DummyTreatment => Some(BaselineKind::DummyTreatment),
            ModelKind::Lambdamart { .. } => None,
        }
    }
}

impl From<BaselineKind> for ModelKind {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::FlippedLabel => ModelKind::FlippedLabel,
            BaselineKind::TwoModel => ModelKind::TwoModel,
            BaselineKind::DummyTreatment => ModelKind::DummyTreatment,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModelKind,
    /// Overrides the experiment-wide tree settings for this model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gbrt: Option<GbrtConfig>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid model name `{}`", self.name)));
        }
        if let ModelKind::Lambdamart { cutoff, sigma, .. } = &self.kind {
            LambdaConfig {
                cutoff_fraction: *cutoff,
                sigma: *sigma,
                ..LambdaConfig::default()
            }
            .validate()?;
        }
        if let Some(g) = &self.gbrt {
            g.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TrainedModel {
    Baseline {
        scorer: UpliftScorer,
    },
    Lambdamart {
        relevance: RelevanceScheme,
        setting: Partition,
        config: LambdaConfig,
        ensemble: BoostedEnsemble,
    },
}

/// A fitted model plus the per-round training trace (LambdaMART only).
#[derive(Clone, Debug, PartialEq)]
pub struct FitOutput {
    pub model: TrainedModel,
    pub trace: Vec<TraceRow>,
}

pub fn fit_model(kind: &ModelKind, train: &UpliftDataset, gbrt: &GbrtConfig) -> Result<FitOutput> {
    if let Some(b) = kind.baseline() {
        return Ok(FitOutput {
            model: TrainedModel::Baseline {
                scorer: fit_baseline(b, train, gbrt)?,
            },
            trace: Vec::new(),
        });
    }
    let ModelKind::Lambdamart {
        metric,
        relevance,
        setting,
        cutoff,
        sigma,
    } = *kind
    else {
        unreachable!("non-baseline kinds are LambdaMART")
    };
    let config = LambdaConfig {
        metric,
        cutoff_fraction: cutoff,
        sigma,
        full_pairs: false,
        gbrt: gbrt.clone(),
    };
    let trained = lambdamart::train(train, relevance, setting, &config)?;
    Ok(FitOutput {
        model: TrainedModel::Lambdamart {
            relevance,
            setting,
            config,
            ensemble: trained.ensemble,
        },
        trace: trained.trace,
    })
}

impl TrainedModel {
    pub fn score(&self, dataset: &UpliftDataset) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Baseline { scorer } => scorer.score(dataset),
            TrainedModel::Lambdamart { ensemble, .. } => lambdamart::predict_scores(ensemble, dataset),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_json_forms() {
        let spec: ModelSpec = serde_json::from_str(r#"{"name":"lai","kind":"flipped-label"}"#).unwrap();
        assert_eq!(spec.kind, ModelKind::FlippedLabel);
        let spec: ModelSpec = serde_json::from_str(
            r#"{"name":"pcg","kind":"lambdamart","metric":"pcg","relevance":"abs1","setting":"separate","cutoff":0.3}"#,
        )
        .unwrap();
        assert_eq!(
            spec.kind,
            ModelKind::Lambdamart {
                metric: RankMetric::Pcg,
                relevance: RelevanceScheme::Abs1,
                setting: Partition::Separate,
                cutoff: 0.3,
                sigma: 1.0
            }
        );
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let bad = ModelSpec { name: "a/b".into(), ..spec };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trained_model_round_trip() {
        let ds = UpliftDataset::from_labels(&[(1, 1), (0, 1), (1, 0), (0, 0), (1, 1), (0, 0)]).unwrap();
        let gbrt = GbrtConfig { n_trees: 3, ..GbrtConfig::default() };
        let kind = ModelKind::Lambdamart {
            metric: RankMetric::Pcg,
            relevance: RelevanceScheme::Rel,
            setting: Partition::Joint,
            cutoff: 1.0,
            sigma: 1.0,
        };
        let fit = fit_model(&kind, &ds, &gbrt).unwrap();
        assert_eq!(fit.trace.len(), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fit.model.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back.score(&ds).unwrap(), fit.model.score(&ds).unwrap());
    }
}
