use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gencls::dataset_builder::{
    build_reasoning_corpus, build_sft_corpus, pack, relabel_uncertain, PackMode, ReasonOrder, ReasonTriple,
    TrainingRecord, WhitespaceCounter, DEFAULT_CAP_FRACTION,
};
use gencls::harness::{self, exit, Inputs, ReportFormat, RunConfig, RunRecord};
use gencls::jsonl;
use gencls::metrics::{evaluate, percent};
use gencls::prompt::{Phase, ShotContext, Strategy};
use gencls::rewards::{self, RewardServiceConfig, ServiceState};
use gencls::types::{Dataset, LabelSchema, Prediction, Split};

#[derive(Parser)]
#[command(name = "gencls", version, about = "Generative classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',')]
    train_strategies: Option<Vec<Strategy>>,
    #[arg(long, value_delimiter = ',')]
    infer_strategies: Option<Vec<Strategy>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Table,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum PackModeArg {
    Standard,
    Neat,
}

#[derive(Subcommand)]
enum Command {
    /// Write one SFT corpus per training strategy, or a reasoning corpus.
    BuildData {
        #[command(flatten)]
        o: Overrides,
        /// Reasoning triples (JSON Lines); switches to reasoning targets.
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "reason-then-class")]
        order: OrderArg,
    },
    /// Relabel examples both reference models got wrong.
    RelabelUncertain {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        preds_m1: PathBuf,
        #[arg(long)]
        preds_m2: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP_FRACTION)]
        cap: f64,
    },
    /// Pack a corpus with token lengths into fixed-length sequences.
    Pack {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        max_len: usize,
        #[arg(long, value_enum, default_value = "neat")]
        mode: PackModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the test set with the backend of one training strategy.
    Infer {
        #[command(flatten)]
        o: Overrides,
    },
    /// Score a predictions file against the test set.
    Evaluate {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Run the full training x inference grid.
    Matrix {
        #[command(flatten)]
        o: Overrides,
        #[arg(long, value_enum, default_value = "both")]
        format: FormatArg,
    },
    /// Serve the reward functions over HTTP.
    RewardServe {
        /// JSON: {"bind", "matching", "schema"?}
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    ClassThenReason,
    ReasonThenClass,
    ThinkReasonClass,
}

impl From<OrderArg> for ReasonOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::ClassThenReason => ReasonOrder::ClassThenReason,
            OrderArg::ReasonThenClass => ReasonOrder::ReasonThenClass,
            OrderArg::ThinkReasonClass => ReasonOrder::ThinkReasonClass,
        }
    }
}

/// A failure with its exit status.
struct Failure(i32, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(exit::OTHER, e.into())
    }
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure(exit::CONFIG, e.into())
}

impl Overrides {
    fn load(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::load(&self.config).map_err(config_error)?;
        if let Some(t) = &self.train_strategies {
            cfg.train_strategies = t.clone();
        }
        if let Some(i) = &self.infer_strategies {
            cfg.infer_strategies = i.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = p;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn build_data(o: &Overrides, triples: Option<&Path>, order: ReasonOrder) -> Result<(), Failure> {
    let cfg = o.load()?;
    let inputs = Inputs::load(&cfg).map_err(config_error)?;
    let dir = cfg.out_dir.join("sft");
    create_dir(&dir)?;
    if let Some(path) = triples {
        let triples: Vec<ReasonTriple> = jsonl::read_jsonl(path)?;
        let index = inputs.train.index();
        let records = build_reasoning_corpus(&triples, order, inputs.schema(), |id| {
            let ex = index.get(id).ok_or_else(|| gencls::Error::UnknownId(id.to_string()))?;
            Ok(inputs
                .builder
                .render(Strategy::ZeroShot, ex, &ShotContext::none(), Phase::Training)?
                .text)
        })?;
        let records: Vec<TrainingRecord> = records.into_iter().map(|r| r.with_length(&WhitespaceCounter)).collect();
        let order_name = serde_json::to_value(order)?;
        let out = dir.join(format!("reasoning_{}.jsonl", order_name.as_str().unwrap_or("order")));
        jsonl::write_jsonl(&out, &records)?;
        println!("{}\t{}", out.display(), records.len());
        return Ok(());
    }
    let selector = inputs.selector(cfg.seed, cfg.fixed_shot_ids.as_deref())?;
    for &s in &cfg.train_strategies {
        let records: Vec<TrainingRecord> = build_sft_corpus(&inputs.train, &inputs.builder, s, &selector)?
            .into_iter()
            .map(|r| r.with_length(&WhitespaceCounter))
            .collect();
        let out = dir.join(format!("{s}.jsonl"));
        jsonl::write_jsonl(&out, &records)?;
        println!("{}\t{}", out.display(), records.len());
    }
    Ok(())
}

fn relabel(o: &Overrides, m1: &Path, m2: &Path, cap: f64) -> Result<(), Failure> {
    let cfg = o.load()?;
    let schema = LabelSchema::load(&cfg.schema).map_err(config_error)?;
    let train = Dataset::load(&cfg.train, Split::Train).map_err(config_error)?;
    let p1: Vec<Prediction> = jsonl::read_jsonl(m1)?;
    let p2: Vec<Prediction> = jsonl::read_jsonl(m2)?;
    let (out, report) = relabel_uncertain(&train, &p1, &p2, &schema, cap, cfg.matching)?;
    create_dir(&cfg.out_dir)?;
    out.save(cfg.out_dir.join("train_uncertain.jsonl"))?;
    jsonl::write_json(cfg.out_dir.join("relabel_report.json"), &report)?;
    println!("qualified {}\trelabeled {}", report.n_qualified, report.n_relabeled);
    Ok(())
}

fn pack_cmd(input: &Path, max_len: usize, mode: PackModeArg, out: &Path) -> Result<(), Failure> {
    let records: Vec<TrainingRecord> = jsonl::read_jsonl(input)?;
    let mode = match mode {
        PackModeArg::Standard => PackMode::Standard,
        PackModeArg::Neat => PackMode::Neat,
    };
    let packs = pack(&records, max_len, mode)?;
    jsonl::write_jsonl(out, &packs)?;
    println!("{} records in {} packs", records.len(), packs.len());
    Ok(())
}

fn infer(o: &Overrides) -> Result<(), Failure> {
    let cfg = o.load()?;
    let train = cfg.train_strategies[0];
    if cfg.train_strategies.len() > 1 {
        eprintln!("using the backend of `{train}`; other training strategies are ignored");
    }
    let inputs = Inputs::load(&cfg).map_err(config_error)?;
    let backend = cfg
        .backend_spec(train)
        .expect("validated")
        .build(train.as_str())
        .map_err(config_error)?;
    let dir = cfg.out_dir.join("predictions");
    create_dir(&dir)?;
    let rt = runtime()?;
    for &s in &cfg.infer_strategies {
        let fixed = cfg.fixed_shot_ids.as_deref();
        let (preds, manifest) = rt.block_on(harness::run_inference(
            &inputs,
            backend.as_ref(),
            s,
            cfg.seed,
            fixed,
            cfg.parallelism,
            cfg.matching,
        ))?;
        jsonl::write_jsonl(dir.join(format!("{train}__{s}.jsonl")), &preds)?;
        jsonl::write_json(dir.join(format!("{train}__{s}.manifest.json")), &manifest)?;
        println!("{train}\t{s}\t{}", preds.len());
    }
    Ok(())
}

fn evaluate_cmd(o: &Overrides, predictions: &Path) -> Result<(), Failure> {
    let cfg = o.load()?;
    let schema = LabelSchema::load(&cfg.schema).map_err(config_error)?;
    let test = Dataset::load(&cfg.test, Split::Test).map_err(config_error)?;
    let preds: Vec<Prediction> = jsonl::read_jsonl(predictions)?;
    let report = evaluate(&preds, &test, &schema, cfg.matching)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let row = [
        report.fmt_suc_ratio,
        report.fmt_suc_acc,
        report.fmt_suc_macro_f1,
        report.overall_acc,
        report.overall_macro_f1,
    ]
    .map(percent);
    eprintln!("{}", harness::METRIC_NAMES.join("\t"));
    eprintln!("{}", row.join("\t"));
    Ok(())
}

fn matrix(o: &Overrides, format: FormatArg) -> Result<i32, Failure> {
    let cfg = o.load()?;
    let started_at = now();
    let result = runtime()?.block_on(harness::run_matrix(&cfg)).map_err(config_error)?;
    let formats: &[ReportFormat] = match format {
        FormatArg::Json => &[ReportFormat::Json],
        FormatArg::Table => &[ReportFormat::Table],
        FormatArg::Both => &[ReportFormat::Json, ReportFormat::Table],
    };
    for &f in formats {
        let path = harness::emit_report(&result, f, &cfg.out_dir)?;
        println!("{}", path.display());
    }
    let code = result.exit_code();
    let record = RunRecord {
        started_at,
        finished_at: now(),
        exit_code: code,
        config: cfg.clone(),
    };
    harness::emit_run_artifacts(&result, &record, &cfg.out_dir)?;
    for c in result.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "cell {} x {} failed: {}",
            c.train_strategy,
            c.infer_strategy,
            c.error.as_deref().unwrap_or_default()
        );
    }
    Ok(code)
}

#[derive(serde::Deserialize, Default)]
struct ServeFile {
    #[serde(flatten)]
    service: RewardServiceConfig,
    #[serde(default)]
    schema: Option<PathBuf>,
}

fn reward_serve(
    config: Option<&Path>,
    bind: Option<std::net::SocketAddr>,
    schema: Option<&Path>,
) -> Result<(), Failure> {
    let file: ServeFile = match config {
        Some(p) => jsonl::read_json(p).map_err(config_error)?,
        None => ServeFile::default(),
    };
    let mut svc = file.service;
    if let Some(b) = bind {
        svc.bind = b;
    }
    let schema_path = schema.map(Path::to_path_buf).or_else(|| {
        let base = config.and_then(Path::parent).unwrap_or(Path::new("."));
        file.schema.map(|s| base.join(s))
    });
    let schema = match schema_path {
        Some(p) => Some(Arc::new(LabelSchema::load(p).map_err(config_error)?)),
        None => None,
    };
    let state = ServiceState {
        matching: svc.matching,
        schema,
    };
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(svc.bind).await?;
        eprintln!("reward service listening on {}", listener.local_addr()?);
        rewards::serve(listener, state).await
    })?;
    Ok(())
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::BuildData { o, triples, order } => build_data(&o, triples.as_deref(), order.into())?,
        Command::RelabelUncertain { o, preds_m1, preds_m2, cap } => relabel(&o, &preds_m1, &preds_m2, cap)?,
        Command::Pack {
            config: _,
            input,
            max_len,
            mode,
            out,
        } => {
            if max_len == 0 {
                return Err(config_error(anyhow::anyhow!("--max-len must be positive")));
            }
            pack_cmd(&input, max_len, mode, &out)?
        }
        Command::Infer { o } => infer(&o)?,
        Command::Evaluate { o, predictions } => evaluate_cmd(&o, &predictions)?,
        Command::Matrix { o, format } => return matrix(&o, format),
        Command::RewardServe { config, bind, schema } => {
            reward_serve(config.as_deref(), bind, schema.as_deref())?;
        }
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
