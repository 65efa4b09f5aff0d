//! Command-line front end: corpus statistics, typo generation, splitting,
//! detector training, evaluation and tagging.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fatypo::corpus::{corpus_statistics, split_corpus};
use fatypo::detector::{apply_config_text, train, DetectorError, ModelConfig, TrainConfig, TrainedModel};
use fatypo::eval::{timing_report, MetricsReport};
use fatypo::fixture::synthetic_corpus;
use fatypo::generator::{build_registry, generate, GeneratorError};
use fatypo::{ClassRegistry, Corpus, ErrorTag, GeneratorConfig, LabeledCorpus, Resources};

/// Directory holding `layout.txt` and `tables.txt`; overrides the built-in
/// keyboard layout and confusion tables.
const RESOURCES_ENV: &str = "FATYPO_RESOURCES";

#[derive(Parser)]
#[command(name = "fatypo", version, about = "Persian typo generation and error-type detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print word, sentence and POS statistics of a corpus.
    Stats { corpus: PathBuf },
    /// Corrupt a corpus into a parallel corpus of misspellings.
    Generate {
        corpus: PathBuf,
        /// Fraction of tokens to corrupt.
        #[arg(long, default_value_t = 0.25)]
        s: f64,
        /// Maximum number of errors per word.
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated error types to enable (default: all).
        #[arg(long, value_delimiter = ',')]
        modules: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the label map of the generated corpus.
        #[arg(long)]
        label_map: Option<PathBuf>,
    },
    /// Split a parallel corpus into train.tsv, val.tsv and test.tsv.
    Split {
        parallel: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.2,0.2")]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the detector on a parallel corpus.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        /// Label map; defaults to the classes seen in train and val.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// `key=value` file with model and training settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Score a model on a labeled parallel corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Training time to include in the timing section.
        #[arg(long)]
        train_seconds: Option<f64>,
    },
    /// Tag every word of a text file, one sentence per line.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(hide = true)]
    Fixture {
        #[arg(long, default_value_t = 500)]
        sentences: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Tsv,
    Json,
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        match cause.downcast_ref::<GeneratorError>() {
            Some(GeneratorError::InvalidConfig(_)) => return 1,
            Some(_) => return 2,
            None => {}
        }
        match cause.downcast_ref::<DetectorError>() {
            Some(DetectorError::InvalidConfig(_)) => return 1,
            Some(DetectorError::NonFinite { .. }) => return 3,
            Some(_) => return 2,
            None => {}
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

/// The cause chain joined with `: `, skipping causes already spelled out
/// by the message before them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn resources() -> Result<Resources> {
    match std::env::var_os(RESOURCES_ENV) {
        Some(dir) => Resources::from_dir(Path::new(&dir))
            .with_context(|| format!("loading resources from {}", Path::new(&dir).display())),
        None => Ok(Resources::default()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Stats { corpus } => {
            let corpus = Corpus::load(&corpus)?;
            print!("{}", corpus_statistics(&corpus).to_key_values());
        }
        Command::Generate {
            corpus,
            s,
            m,
            seed,
            modules,
            out,
            report,
            label_map,
        } => {
            let enabled_tags = if modules.is_empty() {
                ErrorTag::ALL.to_vec()
            } else {
                modules
                    .iter()
                    .map(|name| name.trim().parse::<ErrorTag>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| usage(format!("unknown error type in --modules {modules:?}")))?
            };
            let config = GeneratorConfig {
                s,
                m,
                seed,
                enabled_tags,
            };
            config.validate()?;
            let res = resources()?;
            let corpus = Corpus::load(&corpus)?;
            let (labeled, stats) = generate(&corpus, &config, &res)?;
            labeled.save(&out)?;
            if let Some(path) = label_map {
                write(&path, &build_registry(&labeled).to_label_map())?;
            }
            emit(report.as_deref(), &stats.to_key_values())?;
        }
        Command::Split {
            parallel,
            ratios,
            seed,
            out_dir,
        } => {
            let ratios: [f64; 3] = ratios
                .try_into()
                .map_err(|_| usage("--ratios needs exactly three values"))?;
            if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0)
                || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(usage("--ratios must be three positive numbers summing to 1"));
            }
            let corpus = LabeledCorpus::load(&parallel)?;
            let (train, val, test) = split_corpus(&corpus, ratios, seed)?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for (name, part) in [("train.tsv", &train), ("val.tsv", &val), ("test.tsv", &test)] {
                part.save(&out_dir.join(name))?;
            }
            write(&out_dir.join("labels.tsv"), &build_registry(&corpus).to_label_map())?;
            println!(
                "train={} val={} test={}",
                train.sentences.len(),
                val.sentences.len(),
                test.sentences.len()
            );
        }
        Command::Train {
            train: train_path,
            val,
            labels,
            config,
            epochs,
            batch_size,
            learning_rate,
            seed,
            out_model,
            history,
        } => {
            let mut model_config = ModelConfig::default();
            let mut train_config = TrainConfig::default();
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                apply_config_text(&text, &mut model_config, &mut train_config)
                    .with_context(|| format!("in {}", path.display()))?;
            }
            if let Some(v) = epochs {
                train_config.epochs = v;
            }
            if let Some(v) = batch_size {
                train_config.batch_size = v;
            }
            if let Some(v) = learning_rate {
                train_config.learning_rate = v;
            }
            if let Some(v) = seed {
                train_config.seed = v;
            }
            train_config.validate()?;
            let train_corpus = LabeledCorpus::load(&train_path)?;
            let val_corpus = match val {
                Some(p) => LabeledCorpus::load(&p)?,
                None => LabeledCorpus::default(),
            };
            let registry = match labels {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    ClassRegistry::parse_label_map(&text)
                        .with_context(|| format!("in {}", p.display()))?
                }
                None => ClassRegistry::from_classes(
                    train_corpus
                        .tokens()
                        .chain(val_corpus.tokens())
                        .map(|t| t.label.clone()),
                ),
            };
            let start = Instant::now();
            let model = train(&train_corpus, &val_corpus, &model_config, &train_config, &registry)?;
            let seconds = start.elapsed().as_secs_f64();
            model.save(&out_model)?;
            if let Some(path) = history {
                write(&path, &model.history_tsv())?;
            }
            let last = model.history.last().expect("history holds the initial evaluation");
            println!(
                "epochs={} classes={} train_loss={:.6} train_acc={:.6} train_seconds={seconds:.3}",
                last.epoch,
                model.registry.len(),
                last.train_loss,
                last.train_accuracy
            );
        }
        Command::Eval {
            model,
            test,
            report,
            format,
            train_seconds,
        } => {
            let model = TrainedModel::load(&model)?;
            let test = LabeledCorpus::load(&test)?;
            let registry = model.registry.extended(test.tokens().map(|t| &t.label));
            let gold: Vec<usize> = test
                .tokens()
                .map(|t| registry.index_of(&t.label))
                .collect::<Result<_, _>>()?;
            let sentences: Vec<Vec<String>> =
                test.sentences.iter().map(|s| s.misspelt_words()).collect();
            let start = Instant::now();
            let predicted = model.predict_indices(&sentences)?.concat();
            let inference = start.elapsed();
            let mask = vec![true; gold.len()];
            let mut metrics = MetricsReport::evaluate(&gold, &predicted, &mask, &registry)?;
            let train_time = train_seconds
                .map(|s| {
                    Duration::try_from_secs_f64(s)
                        .map_err(|_| usage("--train-seconds must be a non-negative number"))
                })
                .transpose()?
                .unwrap_or_default();
            metrics.timings = Some(timing_report(train_time, gold.len(), inference));
            let text = match format {
                Format::Text => metrics.to_text(),
                Format::Tsv => metrics.to_tsv(),
                Format::Json => serde_json::to_string_pretty(&metrics)? + "\n",
            };
            emit(report.as_deref(), &text)?;
        }
        Command::Detect { model, input, out } => {
            let model = TrainedModel::load(&model)?;
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let lines: Vec<(usize, Vec<String>)> = text
                .lines()
                .enumerate()
                .map(|(i, line)| (i + 1, line.split_whitespace().map(str::to_string).collect()))
                .filter(|(_, words): &(usize, Vec<String>)| !words.is_empty())
                .collect();
            let sentences: Vec<Vec<String>> = lines.iter().map(|(_, w)| w.clone()).collect();
            let predicted = model.predict_indices(&sentences)?;
            let mut tsv = String::from("line\tposition\tword\ttypo_type\n");
            for ((line, words), labels) in lines.iter().zip(&predicted) {
                for (k, (word, &label)) in words.iter().zip(labels).enumerate() {
                    let class = model.registry.class(label).expect("prediction within registry");
                    let _ = writeln!(tsv, "{line}\t{}\t{word}\t{class}", k + 1);
                }
            }
            write(&out, &tsv)?;
        }
        Command::Fixture {
            sentences,
            seed,
            out,
        } => {
            synthetic_corpus(sentences, seed).save(&out)?;
        }
    }
    Ok(())
}
