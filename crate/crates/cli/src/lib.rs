//! `kanface`: dataset diversity, fairness audits, embedding debiasing,
//! synthetic data and anchor-based box tracking from one binary.

mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kanface_core::attribute::AttributeSpec;
use kanface_core::audit::{
    disparity_summary, group_slice, kinship_slice, Metric, PredictionLog, Task,
};
use kanface_core::boxtrack::{propagate, TrackInput};
use kanface_core::dataset::{write_dataset, Dataset, DatasetSchema};
use kanface_core::debias::{
    adversary_probe, chance_accuracy, debias_dataset, train, DebiasModel, Dims, Hyperparams,
};
use kanface_core::diversity::{diversity_report, report_csv, LogBase};
use kanface_core::synth::{
    embedding_matrix, generate, FactorMode, SensitiveConfig, SynthConfig, Target,
};

use output::Run;

#[derive(Parser)]
#[command(name = "kanface", version, about = "Face-embedding fairness toolkit")]
struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory that receives reports and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Logarithm base for Shannon indices: `e` or `2`.
    #[arg(long, global = true, default_value = "e")]
    log_base: LogBase,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simpson and Shannon indices per attribute.
    Diversity(DiversityArgs),
    /// Per-group accuracy or MAE from a prediction log.
    Audit(AuditArgs),
    /// Train or apply the adversarial debiasing model.
    #[command(subcommand)]
    Debias(DebiasCommand),
    /// Held-out accuracy of a linear probe for one label.
    Probe(ProbeArgs),
    /// Generate a synthetic embedding dataset with known factors.
    Synth(SynthArgs),
    /// Propagate anchor boxes through per-frame detections.
    Boxtrack(BoxtrackArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

impl DataArgs {
    fn load(&self, run: &mut Run) -> Result<Dataset> {
        run.input(&self.schema);
        run.input(&self.dataset);
        let schema = DatasetSchema::load(&self.schema)?;
        Ok(Dataset::load(&self.dataset, &schema)?)
    }
}

#[derive(Args)]
struct DiversityArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Attribute to report (`gender`, `age`, `age5`, `ita5`, `y_p` or a
    /// sensitive column). Repeatable. Defaults to every attribute present
    /// on all records.
    #[arg(long = "attr")]
    attrs: Vec<String>,
}

#[derive(Args)]
struct AuditArgs {
    /// Prediction log JSON (`{"entries": [...]}`).
    #[arg(long)]
    predictions: PathBuf,
    /// Required unless the log holds verification pairs.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Grouping axis, repeatable.
    #[arg(long = "axis", default_values_t = ["gender".to_string(), "age5".to_string()])]
    axes: Vec<String>,
    /// `accuracy` or `mae`; chosen from the log's task when omitted.
    #[arg(long)]
    metric: Option<Metric>,
}

#[derive(Subcommand)]
enum DebiasCommand {
    Train(TrainArgs),
    Apply(ApplyArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long)]
    d3: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_main: Option<f64>,
    #[arg(long)]
    lr_adv: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Adversary updates per main update.
    #[arg(long)]
    adv_steps: Option<usize>,
    #[arg(long)]
    lambda_dec: Option<f64>,
    /// One value for all attributes or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    lambda_entr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    lambda_or: Vec<f64>,
    #[arg(long)]
    init_scale: Option<f64>,
}

#[derive(Args)]
struct ApplyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `y_p` or the name of a sensitive attribute.
    #[arg(long)]
    label: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Full JSON config; the remaining flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    d1: usize,
    #[arg(long, default_value_t = 10)]
    k_p: usize,
    /// `name:K`, repeatable. Defaults to `age_group:5` and `sex:2`.
    #[arg(long = "sensitive")]
    sensitive: Vec<String>,
    /// `orthogonal` or `random`.
    #[arg(long, default_value = "orthogonal")]
    mode: String,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    #[arg(long, default_value_t = 5000)]
    n: usize,
}

#[derive(Args)]
struct BoxtrackArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

/// 3 for numerical failures, 2 for anything wrong with the inputs.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<kanface_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        3
    } else {
        2
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Diversity(a) => diversity(cli, a),
        Command::Audit(a) => audit(cli, a),
        Command::Debias(DebiasCommand::Train(a)) => debias_train(cli, a),
        Command::Debias(DebiasCommand::Apply(a)) => debias_apply(cli, a),
        Command::Probe(a) => probe(cli, a),
        Command::Synth(a) => synth(cli, a),
        Command::Boxtrack(a) => boxtrack(cli, a),
    }
}

fn diversity(cli: &Cli, args: &DiversityArgs) -> Result<()> {
    let config = json!({ "attrs": args.attrs, "log_base": cli.log_base.to_string() });
    let mut run = Run::start("diversity", config, cli.seed, &cli.out_dir)?;
    let dataset = args.data.load(&mut run)?;
    let specs = if args.attrs.is_empty() {
        default_attrs(&dataset)
    } else {
        args.attrs
            .iter()
            .map(|s| AttributeSpec::parse(s))
            .collect::<kanface_core::Result<Vec<_>>>()?
    };
    let rows = diversity_report(&dataset, &specs, cli.log_base)?;
    run.write("diversity.csv", report_csv(&rows).as_bytes())?;
    run.write_json("diversity.json", &json!({ "log_base": cli.log_base.to_string(), "rows": rows }))?;
    run.finish()?;
    Ok(())
}

/// Metadata columns and sensitive labels that every record carries.
fn default_attrs(dataset: &Dataset) -> Vec<AttributeSpec> {
    let schema = dataset.schema();
    let mut names = vec!["gender".to_string(), "age".to_string(), "ita5".to_string()];
    names.extend(schema.sensitive.iter().map(|s| s.name.clone()));
    names
        .iter()
        .filter_map(|n| AttributeSpec::parse(n).ok())
        .filter(|spec| {
            dataset
                .records()
                .iter()
                .all(|r| spec.attribute.value(r, schema).is_some())
        })
        .collect()
}

fn audit(cli: &Cli, args: &AuditArgs) -> Result<()> {
    let config = json!({
        "axes": args.axes,
        "metric": args.metric,
    });
    let mut run = Run::start("audit", config, cli.seed, &cli.out_dir)?;
    run.input(&args.predictions);
    let text = std::fs::read_to_string(&args.predictions)
        .map_err(|e| kanface_core::Error::io(&args.predictions, e))?;
    let log = PredictionLog::from_json(&text)?;

    if log.task() == Some(Task::Verification) {
        let kin = kinship_slice(&log)?;
        run.write("kinship.csv", kin.table.to_csv().as_bytes())?;
        run.write_json("kinship.json", &kin)?;
        run.finish()?;
        return Ok(());
    }

    let (Some(dataset), Some(schema)) = (&args.dataset, &args.schema) else {
        bail!(kanface_core::Error::Invalid(
            "--dataset and --schema are required for this log".into()
        ));
    };
    let data = DataArgs {
        dataset: dataset.clone(),
        schema: schema.clone(),
    };
    let dataset = data.load(&mut run)?;
    let metric = args.metric.unwrap_or(match log.task() {
        Some(Task::AgeRegression) => Metric::Mae,
        _ => Metric::Accuracy,
    });
    let axes = args
        .axes
        .iter()
        .map(|s| AttributeSpec::parse(s))
        .collect::<kanface_core::Result<Vec<_>>>()?;
    let table = group_slice(&log, &dataset, &axes, metric)?;
    let disparity = disparity_summary(&table).ok();
    run.write("audit.csv", table.to_csv().as_bytes())?;
    run.write_json("audit.json", &table.to_json(disparity.as_ref()))?;
    run.finish()?;
    Ok(())
}

fn debias_train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let mut run = Run::start("debias train", serde_json::Value::Null, cli.seed, &cli.out_dir)?;
    let dataset = args.data.load(&mut run)?;
    let schema = dataset.schema();
    let n = schema.n_sensitive();

    let mut dims = Dims::for_schema(schema);
    if args.d2.is_some() || args.d3.is_some() {
        dims = Dims::new(
            schema,
            args.d2.unwrap_or(dims.d2),
            args.d3.unwrap_or(dims.d3.first().copied().unwrap_or(4)),
        );
    }
    let mut hyper = Hyperparams::defaults(n);
    hyper.seed = cli.seed;
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { hyper.$field = v; })* };
    }
    set!(epochs, batch_size, lr_main, lr_adv, momentum, adv_steps, lambda_dec, init_scale);
    if !args.lambda_entr.is_empty() {
        hyper.lambda_entr = per_attribute(&args.lambda_entr, n, "lambda-entr")?;
    }
    if !args.lambda_or.is_empty() {
        hyper.lambda_or = per_attribute(&args.lambda_or, n, "lambda-or")?;
    }
    run.set_config(json!({ "dims": dims, "hyper": hyper }));

    let (model, history) = train(&dataset, &dims, &hyper)
        .with_context(|| "training failed")?;
    run.write_json("model.json", &model.to_file(Some(&hyper)))?;
    run.write("history.csv", history.to_csv(n).as_bytes())?;
    run.finish()?;
    Ok(())
}

fn per_attribute(values: &[f64], n: usize, flag: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => bail!(kanface_core::Error::Invalid(format!(
            "--{flag} has {len} values for {n} sensitive attributes"
        ))),
    }
}

fn debias_apply(cli: &Cli, args: &ApplyArgs) -> Result<()> {
    let config = json!({ "model": args.model });
    let mut run = Run::start("debias apply", config, cli.seed, &cli.out_dir)?;
    run.input(&args.model);
    let (model, _) = DebiasModel::load(&args.model)?;
    let dataset = args.data.load(&mut run)?;
    let out = debias_dataset(&model, &dataset)?;
    let mut buf = Vec::new();
    write_dataset(&out, &mut buf)?;
    run.write("debiased.csv", &buf)?;
    run.write_json("debiased.schema.json", out.schema())?;
    run.finish()?;
    Ok(())
}

fn probe(cli: &Cli, args: &ProbeArgs) -> Result<()> {
    let config = json!({ "label": args.label });
    let mut run = Run::start("probe", config, cli.seed, &cli.out_dir)?;
    let dataset = args.data.load(&mut run)?;
    let target = if args.label == "y_p" {
        Target::Primary
    } else {
        let i = dataset.schema().sensitive_index(&args.label).ok_or_else(|| {
            kanface_core::Error::Invalid(format!("no sensitive attribute '{}'", args.label))
        })?;
        Target::Sensitive(i)
    };
    let labels = target.labels(&dataset)?;
    let accuracy = adversary_probe(embedding_matrix(&dataset).view(), &labels, cli.seed)?;
    run.write_json(
        "probe.json",
        &json!({
            "label": args.label,
            "accuracy": accuracy,
            "chance": chance_accuracy(&labels),
            "n": labels.len(),
        }),
    )?;
    run.finish()?;
    Ok(())
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| kanface_core::Error::io(path, e))?;
            let mut config: SynthConfig =
                serde_json::from_str(&text).map_err(|e| kanface_core::Error::json(path, e))?;
            config.seed = cli.seed;
            config
        }
        None => synth_config_from_flags(args, cli.seed)?,
    };
    let mut run = Run::start("synth", serde_json::to_value(&config)?, cli.seed, &cli.out_dir)?;
    if let Some(path) = &args.config {
        run.input(path);
    }
    let out = generate(&config)?;
    let mut buf = Vec::new();
    write_dataset(&out.dataset, &mut buf)?;
    run.write("dataset.csv", &buf)?;
    run.write_json("schema.json", out.dataset.schema())?;
    run.write_json("ground_truth.json", &out.ground_truth.to_json())?;
    run.finish()?;
    Ok(())
}

fn synth_config_from_flags(args: &SynthArgs, seed: u64) -> Result<SynthConfig> {
    let mode = match args.mode.as_str() {
        "orthogonal" => FactorMode::Orthogonal,
        "random" => FactorMode::Random,
        other => bail!(kanface_core::Error::Invalid(format!("unknown mode '{other}'"))),
    };
    let sensitive = if args.sensitive.is_empty() {
        SynthConfig::desk_scale(seed).sensitive
    } else {
        args.sensitive
            .iter()
            .map(|s| parse_sensitive(s))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SynthConfig {
        d1: args.d1,
        k_p: args.k_p,
        sensitive,
        mode,
        noise: args.noise,
        rho: args.rho,
        primary_weights: None,
        n: args.n,
        seed,
    })
}

fn parse_sensitive(spec: &str) -> Result<SensitiveConfig> {
    let bad = || kanface_core::Error::Invalid(format!("--sensitive '{spec}' is not name:K"));
    let (name, k) = spec.split_once(':').ok_or_else(bad)?;
    Ok(SensitiveConfig {
        name: name.to_string(),
        classes: k.parse().map_err(|_| bad())?,
        weights: None,
    })
}

fn boxtrack(cli: &Cli, args: &BoxtrackArgs) -> Result<()> {
    let mut run = Run::start("boxtrack", serde_json::Value::Null, cli.seed, &cli.out_dir)?;
    run.input(&args.input);
    let input = read_track_input(&args.input)?;
    let track = propagate(&input)?;
    run.write_json("track.json", &track)?;
    run.finish()?;
    Ok(())
}

fn read_track_input(path: &Path) -> Result<TrackInput> {
    let text = std::fs::read_to_string(path).map_err(|e| kanface_core::Error::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(|e| kanface_core::Error::json(path, e))?)
}
