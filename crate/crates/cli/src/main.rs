use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use upliftrank::baselines::BaselineKind;
use upliftrank::data::split_train_test;
use upliftrank::eval::{self, auuc_at_cutoff, sample_curve, paired_t_test};
use upliftrank::experiment::{run_experiment, write_outputs, ExperimentConfig, ExperimentReport, RowStatus};
use upliftrank::gbrt::GbrtConfig;
use upliftrank::ingest::{load_csv, CsvSchema, FeatureSelection, LoadedCsv};
use upliftrank::model::{fit_model, ModelKind, TrainedModel};
use upliftrank::simulation::{simulate, Scenario};
use upliftrank::{Error, Partition, RankMetric, RankedDataset, RelevanceScheme, UpliftDataset, ValueFunctionSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "upliftrank", version, about = "Uplift modeling with learning-to-rank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic treatment/control population as CSV (t,y,score).
    Simulate(SimulateArgs),
    /// Train a LambdaMART ranker.
    Train(TrainArgs),
    /// Train a pointwise uplift baseline.
    TrainBaseline(BaselineArgs),
    /// Evaluate a model or a score column with AUUC.
    Eval(EvalArgs),
    /// Run a repeated experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Paired t-test between two models of an experiment report.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "balanced")]
    scenario: Scenario,
    /// Base group size before the imbalance rule.
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SchemaArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "t")]
    treatment_col: String,
    #[arg(long, default_value = "y")]
    response_col: String,
    /// `auto` or a comma-separated column list.
    #[arg(long, default_value = "auto")]
    feature_cols: String,
    #[arg(long, value_delimiter = ',')]
    categorical_cols: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    exclude_cols: Vec<String>,
    /// Treat the treatment column as text; rows equal to this value are treated.
    #[arg(long, requires = "control_value")]
    treated_value: Option<String>,
    #[arg(long, requires = "treated_value")]
    control_value: Option<String>,
}

impl SchemaArgs {
    fn schema(&self) -> Result<CsvSchema, Error> {
        Ok(CsvSchema {
            treatment_col: self.treatment_col.clone(),
            response_col: self.response_col.clone(),
            features: FeatureSelection::parse(&self.feature_cols),
            categorical_cols: self.categorical_cols.clone(),
            exclude_cols: self.exclude_cols.clone(),
            treated_value: self.treated_value.clone(),
            control_value: self.control_value.clone(),
        })
    }

    fn load(&self) -> Result<LoadedCsv, Error> {
        let loaded = load_csv(&self.data, &self.schema()?)?;
        info!(
            "loaded {} rows ({} treated, {} control) with {} features",
            loaded.dataset.len(),
            loaded.dataset.n_treated(),
            loaded.dataset.n_control(),
            loaded.dataset.n_features()
        );
        Ok(loaded)
    }
}

#[derive(Args, Clone)]
struct BoostArgs {
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    max_leaves: usize,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Seed for the optional train/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on this fraction of the rows only (stratified split).
    #[arg(long)]
    train_fraction: Option<f64>,
}

impl BoostArgs {
    fn gbrt(&self) -> GbrtConfig {
        GbrtConfig {
            n_trees: self.trees,
            learning_rate: self.lr,
            max_leaves: self.max_leaves,
            min_instances_per_leaf: self.min_leaf,
            ..GbrtConfig::default()
        }
    }

    fn training_rows(&self, data: UpliftDataset) -> Result<UpliftDataset, Error> {
        match self.train_fraction {
            Some(f) => Ok(split_train_test(&data, f, self.seed)?.0),
            None => Ok(data),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long, default_value = "pcg")]
    metric: RankMetric,
    #[arg(long, default_value = "rel")]
    relevance: RelevanceScheme,
    #[arg(long, default_value = "joint")]
    setting: Partition,
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
    /// Training trace CSV (round,metric); defaults to `<out>.trace.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    kind: BaselineKind,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// Model JSON written by `train` or `train-baseline`.
    #[arg(long, conflicts_with = "score_col", required_unless_present = "score_col")]
    model: Option<PathBuf>,
    /// Use this CSV column as the score instead of a model.
    #[arg(long)]
    score_col: Option<String>,
    /// Value functions to report (repeatable).
    #[arg(long = "spec", default_values = ["uplift-separate-relative", "uplift-joint-relative"])]
    specs: Vec<ValueFunctionSpec>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,1.0")]
    cutoff: Vec<f64>,
    /// Directory for per-spec curve CSVs.
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    curve_points: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    /// report.json written by `experiment`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    model: String,
    #[arg(long)]
    against: String,
    #[arg(long, default_value = "uplift-separate-relative")]
    spec: ValueFunctionSpec,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_trace(path: &Path, trace: &[upliftrank::lambdamart::TraceRow]) -> Result<(), Error> {
    let mut text = String::from("round,metric\n");
    for row in trace {
        text.push_str(&format!("{},{}\n", row.round, row.metric));
    }
    std::fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Error> {
    let spec = args.scenario.spec(args.n, args.seed);
    let sim = simulate(&spec)?;
    sim.write_csv(&args.out)?;
    println!(
        "wrote {} rows ({} treated, {} control) to {}",
        sim.dataset.len(),
        spec.n_treated,
        spec.n_control,
        args.out.display()
    );
    Ok(0)
}

fn cmd_train(args: TrainArgs) -> Result<u8, Error> {
    let kind = ModelKind::Lambdamart {
        metric: args.metric,
        relevance: args.relevance,
        setting: args.setting,
        cutoff: args.cutoff,
        sigma: args.sigma,
    };
    let gbrt = args.boost.gbrt();
    gbrt.validate()?;
    let loaded = args.schema.load()?;
    let train = args.boost.training_rows(loaded.dataset)?;
    let fit = fit_model(&kind, &train, &gbrt)?;
    fit.model.save(&args.out)?;
    let trace_path = args.trace.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".trace.csv");
        p.into()
    });
    write_trace(&trace_path, &fit.trace)?;
    if let Some(last) = fit.trace.last() {
        println!("final train {}: {}", args.metric, last.metric);
    }
    println!("model written to {}", args.out.display());
    Ok(0)
}

fn cmd_train_baseline(args: BaselineArgs) -> Result<u8, Error> {
    let gbrt = args.boost.gbrt();
    gbrt.validate()?;
    let loaded = args.schema.load()?;
    let train = args.boost.training_rows(loaded.dataset)?;
    let fit = fit_model(&ModelKind::from(args.kind), &train, &gbrt)?;
    fit.model.save(&args.out)?;
    println!("{} model written to {}", args.kind.name(), args.out.display());
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<u8, Error> {
    let (dataset, scores) = match (&args.model, &args.score_col) {
        (Some(path), _) => {
            let model: TrainedModel = read_json(path)?;
            let data = args.schema.load()?.dataset;
            let scores = model.score(&data)?;
            (data, scores)
        }
        (None, Some(col)) => {
            let mut schema = args.schema.clone();
            schema.feature_cols = col.clone();
            let data = schema.load()?.dataset;
            let scores = data.instances().iter().map(|i| i.features[0]).collect();
            (data, scores)
        }
        (None, None) => unreachable!("clap requires a score source"),
    };
    if let Some(c) = args.cutoff.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
        return Err(Error::Argument(format!("cutoff {c} outside (0, 1]")));
    }
    let mut results = Vec::new();
    for spec in &args.specs {
        let ranked = RankedDataset::new(&dataset, scores.clone(), spec.rank_mode())?;
        let area = eval::auuc(&ranked, *spec)?;
        let cutoffs = args
            .cutoff
            .iter()
            .map(|&f| Ok(serde_json::json!({"fraction": f, "auuc": auuc_at_cutoff(&ranked, *spec, f)?})))
            .collect::<Result<Vec<_>, Error>>()?;
        results.push(serde_json::json!({
            "spec": spec.to_string(),
            "auuc": area.auuc,
            "auuc_raw": area.auuc_raw,
            "cutoffs": cutoffs,
        }));
        if let Some(dir) = &args.curves {
            std::fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
            let points = sample_curve(&ranked, *spec, args.curve_points)?;
            let mut text = String::from("x,value,baseline\n");
            for p in &points {
                text.push_str(&format!("{},{},{}\n", p.x, p.value, eval::baseline_at(&ranked, *spec, p.x)?));
            }
            let path = dir.join(format!("{spec}.csv"));
            std::fs::write(&path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&results)?);
    Ok(0)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<u8, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(r) = args.repeats {
        config.repeats = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.trees {
        config.gbrt.n_trees = t;
    }
    if let Some(lr) = args.lr {
        config.gbrt.learning_rate = lr;
    }
    let base_dir = args.config.parent();
    let report = run_experiment(&config, base_dir)?;
    write_outputs(&report, &args.out)?;
    print_summary(&report);
    if report.has_failures() {
        eprintln!("some models failed; see report.json");
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}

fn print_summary(report: &ExperimentReport) {
    for r in &report.rows {
        let sig = r
            .significance
            .as_ref()
            .map(|s| format!(" p={:.4}{}", s.p_value, if s.significant { " *" } else { "" }))
            .unwrap_or_default();
        match (r.status, r.mean) {
            (RowStatus::Failed, _) | (_, None) => println!("{:<24} {:<26} failed", r.model, r.spec.to_string()),
            (_, Some(mean)) => println!(
                "{:<24} {:<26} {:.5} [{:.5}, {:.5}]{sig}",
                r.model,
                r.spec.to_string(),
                mean,
                r.min.unwrap_or(mean),
                r.max.unwrap_or(mean)
            ),
        }
    }
}

fn cmd_compare(args: CompareArgs) -> Result<u8, Error> {
    let report: ExperimentReport = read_json(&args.report)?;
    let samples = |name: &str| {
        report
            .row(name, args.spec)
            .map(|r| r.samples.clone())
            .ok_or_else(|| Error::Argument(format!("no row for model `{name}` and spec {}", args.spec)))
    };
    let a = samples(&args.model)?;
    let b = samples(&args.against)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = a.iter().zip(&b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
    let t = paired_t_test(&xs, &ys, args.alpha)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "model": args.model,
            "against": args.against,
            "spec": args.spec.to_string(),
            "pairs": xs.len(),
            "statistic": t.statistic.is_finite().then_some(t.statistic),
            "p_value": t.p_value,
            "significant": t.significant,
        }))?
    );
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::TrainBaseline(a) => cmd_train_baseline(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
