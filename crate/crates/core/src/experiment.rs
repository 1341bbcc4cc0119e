//! Repeated train/test experiments with aggregated AUUC tables and curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data::{split_train_test, RankedDataset, UpliftDataset};
use crate::error::{Error, Result};
use crate::eval::{
    auuc_at_cutoff, baseline_at, paired_t_test, sample_curve, ValueFunctionSpec,
};
use crate::gbrt::GbrtConfig;
use crate::ingest::{load_csv, CsvSchema};
use crate::model::{fit_model, ModelSpec, TrainedModel};
use crate::simulation::{simulate, Scenario, ScenarioSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
    Simulated {
        scenario: Scenario,
        base_n: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl DataSource {
    /// Relative CSV paths resolve against `base_dir`.
    pub fn load(&self, base_dir: Option<&Path>) -> Result<UpliftDataset> {
        match self {
            DataSource::Csv { path, schema } => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Ok(load_csv(&path, schema)?.dataset)
            }
            DataSource::Simulated {
                scenario,
                base_n,
                seed,
            } => {
                let spec: ScenarioSpec = scenario.spec(*base_n, *seed);
                Ok(simulate(&spec)?.dataset)
            }
        }
    }
}

fn default_specs() -> Vec<ValueFunctionSpec> {
    vec![
        ValueFunctionSpec::UPLIFT_SEPARATE_RELATIVE,
        ValueFunctionSpec::UPLIFT_JOINT_RELATIVE,
    ]
}

fn default_cutoffs() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 1.0]
}

fn default_repeats() -> usize {
    10
}

fn default_train_fraction() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    0.05
}

fn default_curve_points() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_specs")]
    pub specs: Vec<ValueFunctionSpec>,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Model the others are t-tested against.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub gbrt: GbrtConfig,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        if self.specs.is_empty() {
            return Err(Error::Config("no evaluation specs configured".into()));
        }
        if self.curve_points == 0 {
            return Err(Error::Config("curve_points must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if let Some(c) = self.cutoffs.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
            return Err(Error::Config(format!("cutoff {c} outside (0, 1]")));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate()?;
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!("duplicate model name `{}`", m.name)));
            }
        }
        if let Some(r) = &self.reference {
            if !self.models.iter().any(|m| &m.name == r) {
                return Err(Error::Config(format!("reference model `{r}` is not configured")));
            }
        }
        self.gbrt.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSummary {
    pub fraction: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub reference: String,
    /// `None` when the paired differences have zero variance and nonzero mean.
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Partial,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub spec: ValueFunctionSpec,
    pub status: RowStatus,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// AUUC per repeat; `None` where the model failed.
    pub samples: Vec<Option<f64>>,
    pub cutoffs: Vec<CutoffSummary>,
    pub significance: Option<Significance>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

/// Mean curve with min/max band over repeats on a fixed x grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub model: String,
    pub spec: ValueFunctionSpec,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub baseline: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    #[serde(skip)]
    pub curves: Vec<CurveBand>,
    /// Models trained in the first repeat.
    #[serde(skip)]
    pub models: Vec<(String, TrainedModel)>,
}

impl ExperimentReport {
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.status != RowStatus::Ok)
    }

    pub fn row(&self, model: &str, spec: ValueFunctionSpec) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model && r.spec == spec)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

// One successful (model, spec, repeat) evaluation.
#[derive(Clone, Debug)]
struct Evaluation {
    auuc: f64,
    cutoffs: Vec<f64>,
    curve: Vec<f64>,
    baseline: Vec<f64>,
}

fn evaluate_scores(
    test: &UpliftDataset,
    scores: &[f64],
    spec: ValueFunctionSpec,
    config: &ExperimentConfig,
) -> Result<Evaluation> {
    let ranked = RankedDataset::new(test, scores.to_vec(), spec.rank_mode())?;
    let auuc = crate::eval::auuc(&ranked, spec)?.auuc;
    let cutoffs = config
        .cutoffs
        .iter()
        .map(|&f| auuc_at_cutoff(&ranked, spec, f))
        .collect::<Result<Vec<_>>>()?;
    let points = sample_curve(&ranked, spec, config.curve_points)?;
    let baseline = points
        .iter()
        .map(|p| baseline_at(&ranked, spec, p.x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        auuc,
        cutoffs,
        curve: points.iter().map(|p| p.value).collect(),
        baseline,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

// Sample standard deviation; 0 for a single value.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn column(evals: &[&Evaluation], f: impl Fn(&Evaluation) -> f64) -> Vec<f64> {
    evals.iter().map(|e| f(e)).collect()
}

/// Runs every model on `repeats` fresh splits of the configured data.
pub fn run_experiment(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    let data = config.data.load(base_dir)?;
    run_on_dataset(config, &data)
}

/// As [`run_experiment`] with the data already loaded.
pub fn run_on_dataset(config: &ExperimentConfig, data: &UpliftDataset) -> Result<ExperimentReport> {
    config.validate()?;
    let n_models = config.models.len();
    let n_specs = config.specs.len();
    // results[model][spec][repeat]
    let mut results: Vec<Vec<Vec<Result<Evaluation, String>>>> =
        vec![vec![Vec::with_capacity(config.repeats); n_specs]; n_models];
    let mut first_models = Vec::new();

    for repeat in 0..config.repeats {
        let seed = config.seed.wrapping_add(repeat as u64);
        let (train, test) = split_train_test(data, config.train_fraction, seed)?;
        info!(
            "repeat {}/{}: {} train rows, {} test rows",
            repeat + 1,
            config.repeats,
            train.len(),
            test.len()
        );
        for (mi, model) in config.models.iter().enumerate() {
            let gbrt = model.gbrt.as_ref().unwrap_or(&config.gbrt);
            let scored = fit_model(&model.kind, &train, gbrt).and_then(|fit| {
                let scores = fit.model.score(&test)?;
                Ok((fit.model, scores))
            });
            match scored {
                Ok((trained, scores)) => {
                    for (si, &spec) in config.specs.iter().enumerate() {
                        let eval = evaluate_scores(&test, &scores, spec, config).map_err(|e| e.to_string());
                        if let Err(e) = &eval {
                            warn!("model `{}` spec {spec} repeat {repeat}: {e}", model.name);
                        }
                        results[mi][si].push(eval);
                    }
                    if repeat == 0 {
                        first_models.push((model.name.clone(), trained));
                    }
                }
                Err(e) => {
                    warn!("model `{}` failed in repeat {repeat}: {e}", model.name);
                    for per_spec in &mut results[mi] {
                        per_spec.push(Err(e.to_string()));
                    }
                }
            }
        }
    }

    let reference = config
        .reference
        .as_ref()
        .map(|r| config.models.iter().position(|m| &m.name == r).expect("validated"));
    let mut rows = Vec::with_capacity(n_models * n_specs);
    let mut curves = Vec::new();
    for (mi, model) in config.models.iter().enumerate() {
        for (si, &spec) in config.specs.iter().enumerate() {
            let runs = &results[mi][si];
            let ok: Vec<&Evaluation> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
            let errors: Vec<String> = runs
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("repeat {i}: {e}")))
                .collect();
            let status = match (ok.len(), errors.len()) {
                (_, 0) => RowStatus::Ok,
                (0, _) => RowStatus::Failed,
                _ => RowStatus::Partial,
            };
            let samples: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().ok().map(|e| e.auuc)).collect();
            let values = column(&ok, |e| e.auuc);
            let summary = |v: &[f64]| (!v.is_empty()).then(|| (mean(v), std_dev(v), min_of(v), max_of(v)));
            let stats = summary(&values);
            let cutoffs = if ok.is_empty() {
                Vec::new()
            } else {
                config
                    .cutoffs
                    .iter()
                    .enumerate()
                    .map(|(ci, &fraction)| {
                        let v = column(&ok, |e| e.cutoffs[ci]);
                        CutoffSummary {
                            fraction,
                            mean: mean(&v),
                            min: min_of(&v),
                            max: max_of(&v),
                        }
                    })
                    .collect()
            };
            let significance = reference.and_then(|ri| {
                let theirs = &results[ri][si];
                let (a, b): (Vec<f64>, Vec<f64>) = runs
                    .iter()
                    .zip(theirs)
                    .filter_map(|(x, y)| Some((x.as_ref().ok()?.auuc, y.as_ref().ok()?.auuc)))
                    .unzip();
                let t = paired_t_test(&a, &b, config.alpha).ok()?;
                Some(Significance {
                    reference: config.models[ri].name.clone(),
                    statistic: t.statistic.is_finite().then_some(t.statistic),
                    p_value: t.p_value,
                    significant: t.significant,
                })
            });
            if !ok.is_empty() {
                let m = config.curve_points;
                let x = (1..=m).map(|i| i as f64 / m as f64).collect();
                let point = |f: &dyn Fn(&[f64]) -> f64, pick: &dyn Fn(&Evaluation) -> &Vec<f64>| {
                    (0..m)
                        .map(|j| f(&ok.iter().map(|e| pick(e)[j]).collect::<Vec<_>>()))
                        .collect::<Vec<f64>>()
                };
                curves.push(CurveBand {
                    model: model.name.clone(),
                    spec,
                    x,
                    mean: point(&mean, &|e| &e.curve),
                    min: point(&min_of, &|e| &e.curve),
                    max: point(&max_of, &|e| &e.curve),
                    baseline: point(&mean, &|e| &e.baseline),
                });
            }
            rows.push(ReportRow {
                model: model.name.clone(),
                spec,
                status,
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
                min: stats.map(|s| s.2),
                max: stats.map(|s| s.3),
                samples,
                cutoffs,
                significance,
                errors,
            });
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        curves,
        models: first_models,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per (model, spec) with summary columns and per-cutoff means.
pub fn auuc_table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("model,spec,status,mean,std,min,max");
    for c in &report.config.cutoffs {
        let _ = write!(out, ",auuc@{c}");
    }
    out.push_str(",p_value,significant\n");
    for r in &report.rows {
        let status = match r.status {
            RowStatus::Ok => "ok",
            RowStatus::Partial => "partial",
            RowStatus::Failed => "failed",
        };
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.model,
            r.spec,
            status,
            fmt_opt(r.mean),
            fmt_opt(r.std),
            fmt_opt(r.min),
            fmt_opt(r.max)
        );
        for i in 0..report.config.cutoffs.len() {
            let _ = write!(out, ",{}", fmt_opt(r.cutoffs.get(i).map(|c| c.mean)));
        }
        match &r.significance {
            Some(s) => {
                let _ = writeln!(out, ",{},{}", s.p_value, s.significant);
            }
            None => out.push_str(",,\n"),
        }
    }
    out
}

/// Writes `curves/<model>.csv` with columns spec,x,mean,min,max,baseline.
pub fn emit_curves(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join("curves");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    for model in &report.config.models {
        let bands: Vec<&CurveBand> = report.curves.iter().filter(|c| c.model == model.name).collect();
        if bands.is_empty() {
            continue;
        }
        let mut text = String::from("spec,x,mean,min,max,baseline\n");
        for b in bands {
            for i in 0..b.x.len() {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    b.spec, b.x[i], b.mean[i], b.min[i], b.max[i], b.baseline[i]
                );
            }
        }
        let path = dir.join(format!("{}.csv", model.name));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes report.json, auuc_table.csv, curves/ and models/ under `out_dir`.
pub fn write_outputs(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, report.to_json()?).map_err(|e| Error::io(&report_path, e))?;
    let table_path = out_dir.join("auuc_table.csv");
    std::fs::write(&table_path, auuc_table_csv(report)).map_err(|e| Error::io(&table_path, e))?;
    emit_curves(report, out_dir)?;
    let models_dir = out_dir.join("models");
    std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    for (name, model) in &report.models {
        model.save(&models_dir.join(format!("{name}.json")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UpliftInstance;
    use crate::model::ModelKind;

    fn tiny_config(repeats: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "data": {{"source": "simulated", "scenario": "balanced", "base_n": 200, "seed": 1}},
                "models": [
                    {{"name": "flipped", "kind": "flipped-label"}},
                    {{"name": "two", "kind": "two-model"}}
                ],
                "repeats": {repeats},
                "reference": "flipped",
                "gbrt": {{"n_trees": 5, "learning_rate": 0.1}}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn report_shape_and_self_reference() {
        let report = run_experiment(&tiny_config(3), None).unwrap();
        assert_eq!(report.rows.len(), 4);
        for r in &report.rows {
            assert_eq!(r.samples.len(), 3);
            assert_eq!(r.status, RowStatus::Ok);
            let (mean, min, max) = (r.mean.unwrap(), r.min.unwrap(), r.max.unwrap());
            assert!(min <= mean && mean <= max);
            assert_eq!(r.cutoffs.last().unwrap().mean, mean);
        }
        let own = report.row("flipped", ValueFunctionSpec::UPLIFT_SEPARATE_RELATIVE).unwrap();
        let sig = own.significance.as_ref().unwrap();
        assert_eq!(sig.p_value, 1.0);
        assert!(!sig.significant);
    }

    #[test]
    fn single_repeat_band_collapses() {
        let report = run_experiment(&tiny_config(1), None).unwrap();
        for c in &report.curves {
            assert_eq!(c.mean, c.min);
            assert_eq!(c.mean, c.max);
        }
        assert!(report.rows.iter().all(|r| r.significance.is_none()));
    }

    #[test]
    fn failing_model_does_not_abort_others() {
        // Every treated instance responds and every control does not, so the
        // flipped label has a single class.
        let inst = (0..40)
            .map(|i| {
                let t = i % 2 == 0;
                UpliftInstance::new(vec![i as f64], t, t)
            })
            .collect();
        let ds = UpliftDataset::new(inst).unwrap();
        let mut config = tiny_config(2);
        config.models.push(ModelSpec {
            name: "dummy".into(),
            kind: ModelKind::DummyTreatment,
            gbrt: None,
        });
        let report = run_on_dataset(&config, &ds).unwrap();
        let flipped = report.row("flipped", ValueFunctionSpec::UPLIFT_JOINT_RELATIVE).unwrap();
        assert_eq!(flipped.status, RowStatus::Failed);
        assert!(flipped.mean.is_none());
        let dummy = report.row("dummy", ValueFunctionSpec::UPLIFT_JOINT_RELATIVE).unwrap();
        assert_eq!(dummy.status, RowStatus::Ok);
        assert!(report.has_failures());
    }

    #[test]
    fn config_validation() {
        let mut c = tiny_config(1);
        c.repeats = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = tiny_config(1);
        c.reference = Some("nope".into());
        assert!(c.validate().is_err());
        let mut c = tiny_config(1);
        c.cutoffs = vec![1.5];
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json("{}").is_err());
    }

    #[test]
    fn outputs_are_written_and_bands_contain_mean() {
        let report = run_experiment(&tiny_config(3), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&report, dir.path()).unwrap();
        for name in ["report.json", "auuc_table.csv", "curves/flipped.csv", "models/two.json"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let text = std::fs::read_to_string(dir.path().join("curves/flipped.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("spec,x,mean,min,max,baseline"));
        for line in lines {
            let v: Vec<f64> = line.split(',').skip(1).map(|s| s.parse().unwrap()).collect();
            assert!(v[2] <= v[1] && v[1] <= v[3], "{line}");
        }
        let table = std::fs::read_to_string(dir.path().join("auuc_table.csv")).unwrap();
        assert_eq!(table.lines().count(), 5);
    }
}
