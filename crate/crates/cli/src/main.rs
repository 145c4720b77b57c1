use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use webprefetch_core::eval::{
    split_sessions, EvalReport, DEFAULT_CACHE_SIZE, DEFAULT_SEED, DEFAULT_TRAIN_SPLIT,
};
use webprefetch_core::ingest::{self, LogFormat, LogRecord};
use webprefetch_core::pipeline::{train, Dataset, TrainSummary};
use webprefetch_core::synth::{
    generate_synthetic_log, synthetic_catalog, to_records, SyntheticSpec,
};
use webprefetch_core::{ModelConfig, PredictionModel};

#[derive(Parser)]
#[command(
    name = "webprefetch",
    version,
    about = "Next-page prediction from web access logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, normalize and filter logs, then dump the records as CSV
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        /// Output file (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a model and write it to --model
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        model: PathBuf,
        /// Print the summary as JSON
        #[arg(long)]
        json: bool,
    },
    /// Train on a split of the sessions and score predictions on the rest
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = DEFAULT_TRAIN_SPLIT, value_parser = parse_split)]
        train_split: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CACHE_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
        cache_size: u64,
        /// Train and test on every session
        #[arg(long)]
        self_test: bool,
        #[arg(long)]
        json: bool,
        /// Also write the JSON report here
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also save the trained model here
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Predict the next page after URL
    Predict {
        #[arg(long)]
        model: PathBuf,
        url: String,
        #[arg(long)]
        fallback_popular: bool,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        topk: Option<u64>,
    },
    /// Generate a synthetic log from a planted Markov chain
    Gen {
        #[arg(long, default_value_t = 20)]
        n_pages: usize,
        #[arg(long, default_value_t = 0.6)]
        dominant_prob: f64,
        #[arg(long, default_value_t = 1000)]
        n_sessions: usize,
        #[arg(long, default_value_t = 8.0)]
        session_len_mean: f64,
        #[arg(long, default_value_t = 1.0)]
        zipf_exponent: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print statistics of a saved model
    Inspect {
        #[arg(long)]
        model: PathBuf,
        /// Number of strongest rules to list
        #[arg(long, default_value_t = 10)]
        rules: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Clf,
    Csv,
}

impl From<FormatArg> for LogFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Clf => LogFormat::Clf,
            FormatArg::Csv => LogFormat::Csv,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Log files, read in order
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Clf)]
    format: FormatArg,
    /// CSV input starts with a header row
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Inactivity gap (minutes) that ends a session
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    session_timeout: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_session_len: u64,
    #[arg(long, default_value_t = 0.3, value_parser = parse_unit)]
    cluster_threshold: f64,
    /// Use every session as one cluster
    #[arg(long)]
    no_cluster: bool,
    /// Page urls describing the browsing context for cluster selection
    #[arg(long = "context", value_name = "URL")]
    context: Vec<String>,
    /// Level-1 (page) pruning threshold
    #[arg(long, default_value_t = 0.2, value_parser = parse_unit)]
    alpha1: f64,
    /// Level-2 (pair) pruning threshold
    #[arg(long, default_value_t = 0.2, value_parser = parse_unit)]
    alpha2: f64,
    #[arg(long, default_value_t = 0.0, value_parser = parse_unit)]
    min_support: f64,
    #[arg(long, default_value_t = 0.0, value_parser = parse_unit)]
    min_confidence: f64,
    /// Predict the most popular page instead of abstaining
    #[arg(long)]
    fallback_popular: bool,
}

impl TrainArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig {
            session_timeout_minutes: self.session_timeout,
            max_session_len: self.max_session_len as usize,
            cluster_threshold: self.cluster_threshold,
            no_cluster: self.no_cluster,
            context: self
                .context
                .iter()
                .map(|u| ingest::normalize_url(u))
                .collect(),
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            min_support: self.min_support,
            min_confidence: self.min_confidence,
            fallback_popular: self.fallback_popular,
        }
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_split(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_dataset(input: &InputArgs, config: &ModelConfig) -> Result<Dataset> {
    let data = Dataset::load(&input.inputs, input.format.into(), input.header, config)?;
    if data.sessions.is_empty() {
        bail!("no data: nothing left after filtering");
    }
    Ok(data)
}

fn print_summary(summary: &TrainSummary) {
    println!("sessions        {}", summary.sessions);
    println!(
        "clusters        {} (selected {} with {} sessions)",
        summary.clusters, summary.selected_cluster, summary.cluster_sessions
    );
    println!(
        "pages           {} -> {}",
        summary.pages_before, summary.pages_after
    );
    println!(
        "pairs           {} -> {}",
        summary.pairs_before, summary.pairs_after
    );
    println!("rules           {}", summary.rules);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, output: out } => {
            let data = load_dataset(&input, &ModelConfig::default())?;
            ingest::write_csv(output(out.as_deref())?, &data.records)?;
        }
        Command::Train {
            input,
            train: args,
            model,
            json,
        } => {
            let config = args.config();
            let data = load_dataset(&input, &config)?;
            let trained = train(&data.sessions, &data.catalog, &config)?;
            trained
                .model
                .save(&model)
                .with_context(|| format!("cannot write {}", model.display()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&trained.summary)?);
            } else {
                print_summary(&trained.summary);
            }
        }
        Command::Evaluate {
            input,
            train: args,
            train_split,
            seed,
            cache_size,
            self_test,
            json,
            report,
            model,
        } => {
            let config = args.config();
            let data = load_dataset(&input, &config)?;
            let (train_set, test_set) = if self_test {
                (data.sessions.clone(), data.sessions)
            } else {
                split_sessions(&data.sessions, train_split, seed)
            };
            let trained = train(&train_set, &data.catalog, &config)?;
            if let Some(path) = &model {
                trained.model.save(path)?;
            }
            let result = EvalReport::run(
                &trained.model,
                &trained.summary,
                &test_set,
                cache_size as usize,
            );
            let doc = serde_json::to_string_pretty(&result)?;
            if let Some(path) = &report {
                std::fs::write(path, format!("{doc}\n"))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            if json {
                println!("{doc}");
            } else {
                println!("{result}");
            }
        }
        Command::Predict {
            model,
            url,
            fallback_popular,
            topk,
        } => {
            let mut model = PredictionModel::load(&model)
                .with_context(|| format!("cannot load model {}", model.display()))?;
            model.config.fallback_popular |= fallback_popular;
            let predicted: Vec<&str> = match topk {
                None => model.predict_url(&url).into_iter().collect(),
                Some(k) => match model.catalog.id(&ingest::normalize_url(&url)) {
                    Some(id) => model
                        .predict_topk(id, k as usize)
                        .into_iter()
                        .filter_map(|p| model.catalog.url(p))
                        .collect(),
                    None => model.predict_url(&url).into_iter().collect(),
                },
            };
            if predicted.is_empty() {
                println!("ABSTAIN");
            }
            for page in predicted {
                println!("{page}");
            }
        }
        Command::Gen {
            n_pages,
            dominant_prob,
            n_sessions,
            session_len_mean,
            zipf_exponent,
            seed,
            format,
            output: out,
        } => {
            let spec = SyntheticSpec {
                n_pages,
                dominant_prob,
                n_sessions,
                session_len_mean,
                zipf_exponent,
                seed,
            };
            let log = generate_synthetic_log(&spec)?;
            let records = to_records(&log.sessions, &synthetic_catalog(n_pages));
            let mut out = output(out.as_deref())?;
            match format {
                FormatArg::Csv => ingest::write_csv(&mut out, &records)?,
                FormatArg::Clf => write_clf(&mut out, &records)?,
            }
            out.flush()?;
        }
        Command::Inspect { model: path, rules } => {
            let model = PredictionModel::load(&path)
                .with_context(|| format!("cannot load model {}", path.display()))?;
            inspect(&model, rules);
        }
    }
    Ok(())
}

fn write_clf<W: Write>(out: &mut W, records: &[LogRecord]) -> io::Result<()> {
    for r in records {
        writeln!(
            out,
            "{} - - [{}] \"GET {} HTTP/1.1\" 200 -",
            r.user_ip,
            r.timestamp.format("%d/%b/%Y:%H:%M:%S %z"),
            r.url
        )?;
    }
    Ok(())
}

fn inspect(model: &PredictionModel, top: usize) {
    let url = |p| model.catalog.url(p).unwrap_or("?");
    println!("pages           {}", model.catalog.len());
    println!("sessions        {}", model.level1.n_sessions);
    println!("transitions     {}", model.level1.n_transitions);
    println!(
        "level-1 pages   {} -> {}",
        model.level1.pages.len(),
        model.level1_survivors.len()
    );
    println!("level-2 pairs   {}", model.pairs.len());
    println!("rules           {}", model.rules.len());
    let c = &model.config;
    println!(
        "config          alpha1={} alpha2={} min_support={} min_confidence={} cluster={} fallback={}",
        c.alpha1,
        c.alpha2,
        c.min_support,
        c.min_confidence,
        if c.no_cluster { "off".to_string() } else { c.cluster_threshold.to_string() },
        c.fallback_popular
    );
    let mut strongest: Vec<_> = model.rules.iter().collect();
    strongest.sort_by(|a, b| {
        b.support
            .total_cmp(&a.support)
            .then(b.confidence.total_cmp(&a.confidence))
    });
    for r in strongest.into_iter().take(top) {
        println!(
            "  {} => {}  support={:.4} confidence={:.4}",
            url(r.antecedent),
            url(r.consequent),
            r.support,
            r.confidence
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
