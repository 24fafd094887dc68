//! The `designscan` command line.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classifier::{train_ensemble, EnsembleConfig, EnsembleModel, DEFAULT_MAX_CLASSES};
use crate::corpus::{split_corpus, Corpus, Record, SplitSpec, DEFAULT_TRAIN_FRACTION};
use crate::domain::{AttackScenario, AttributeKind, AttributeValue, PatternCatalog, Vocabulary, N_ATTRIBUTES};
use crate::encoder::{encode_scenario, DEFAULT_BAND};
use crate::error::Error;
use crate::mlp::{Activation, NetworkSpec, TrainConfig};
use crate::synthgen::{
    default_templates, generate_corpus, generation_vocabulary, load_templates, templates_to_text, DEFAULT_NOISE,
    DEFAULT_PER_PATTERN,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "designscan",
    version,
    about = "Classify attack scenarios into attack patterns"
)]
pub struct Cli {
    /// Seed for generation, splitting and weight initialization.
    #[arg(long, env = "DS_SEED", default_value_t = 42, global = true)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or print a vocabulary.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Write the synthetic corpus, its vocabulary, templates and a split.
    Gen(GenArgs),
    /// Turn a value-string scenario file into a code corpus.
    Encode(EncodeArgs),
    /// Split a code corpus into training and test files.
    Split(SplitArgs),
    /// Train the partitioned ensemble.
    Train(TrainArgs),
    /// Evaluate a model on a code corpus.
    Eval(EvalArgs),
    /// Classify one scenario given as `kind=value` arguments.
    Predict(PredictArgs),
}

#[derive(Debug, Subcommand)]
pub enum VocabCommand {
    /// Scan a value-string scenario file; pinned values keep their codes.
    Build {
        scenarios: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print `kind,code,value` triples.
    Show { vocab: PathBuf },
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Template CSV; defaults to the built-in roster.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PER_PATTERN)]
    pub per_pattern: usize,
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub scenarios: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    /// Plain shuffled split instead of per-pattern stratification.
    #[arg(long)]
    pub no_stratify: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Where `mse_partition<k>.csv` go; defaults to the model's directory.
    #[arg(long)]
    pub curves_dir: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct Overrides {
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long)]
    pub max_classes: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// `tansig` or `linear`.
    #[arg(long)]
    pub output: Option<Activation>,
}

impl Overrides {
    pub fn apply(&self, seed: u64) -> EnsembleConfig {
        let base = EnsembleConfig::default();
        let train = TrainConfig {
            learning_rate: self.lr.unwrap_or(base.train.learning_rate),
            momentum: self.momentum.unwrap_or(base.train.momentum),
            max_iterations: self.max_iter.unwrap_or(base.train.max_iterations),
            patience: self.patience.unwrap_or(base.train.patience),
            validation_fraction: self.validation_fraction.unwrap_or(base.train.validation_fraction),
            seed,
            ..base.train
        };
        EnsembleConfig {
            train,
            network: NetworkSpec {
                n_hidden: self.hidden.unwrap_or(base.network.n_hidden),
                output_activation: self.output.unwrap_or(base.network.output_activation),
                ..base.network
            },
            max_classes_per_net: self.max_classes.unwrap_or(DEFAULT_MAX_CLASSES),
            band: self.band.unwrap_or(DEFAULT_BAND),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Twelve `kind=value` pairs, e.g. `attacker="No Access"`.
    #[arg(required = true)]
    pub values: Vec<String>,
}

/// Runs a parsed command, writing its report lines to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Vocab(VocabCommand::Build { scenarios, out: path }) => {
            let vocab = build_vocabulary(&read_value_scenarios(scenarios)?);
            vocab.save(path)?;
            say(out, format!("wrote {} ({})", path.display(), vocab.fingerprint()))
        }
        Command::Vocab(VocabCommand::Show { vocab }) => {
            let vocab = Vocabulary::load(vocab)?;
            for (kind, code, value) in vocab.entries() {
                say(out, format!("{},{code},{value}", kind.column()))?;
            }
            Ok(())
        }
        Command::Gen(args) => cmd_gen(args, seed, out),
        Command::Encode(args) => {
            let vocab = Vocabulary::load(&args.vocab)?;
            let corpus = encode_scenarios(&read_value_scenarios(&args.scenarios)?, &vocab)?;
            corpus.save(&args.out)?;
            say(out, format!("wrote {} ({} samples)", args.out.display(), corpus.len()))
        }
        Command::Split(args) => {
            let corpus = Corpus::load(&args.corpus)?;
            let spec = SplitSpec {
                stratified: !args.no_stratify,
                ..SplitSpec::new(args.train_fraction, seed)
            };
            let (train, test) = split_corpus(&corpus, &spec)?;
            train.save(&args.train_out)?;
            test.save(&args.test_out)?;
            say(out, format!("train {} / test {}", train.len(), test.len()))
        }
        Command::Train(args) => cmd_train(args, seed, out),
        Command::Eval(args) => cmd_eval(args, out),
        Command::Predict(args) => cmd_predict(args, out),
    }
}

fn say(out: &mut dyn Write, line: String) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Core(e.into()))
}

fn cmd_gen(args: &GenArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let vocab = generation_vocabulary();
    let templates = match &args.templates {
        Some(path) => load_templates(path)?,
        None => default_templates(),
    };
    let corpus = generate_corpus(&templates, args.per_pattern, args.noise, seed, &vocab)?;
    let (train, test) = split_corpus(&corpus, &SplitSpec::new(args.train_fraction, seed))?;
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;
    let dir = &args.out_dir;
    corpus.save(dir.join("corpus.csv"))?;
    train.save(dir.join("train.csv"))?;
    test.save(dir.join("test.csv"))?;
    vocab.save(dir.join("vocab.txt"))?;
    fs::write(dir.join("templates.csv"), templates_to_text(&templates)).map_err(Error::from)?;
    say(
        out,
        format!(
            "{} samples ({} train, {} test) in {}",
            corpus.len(),
            train.len(),
            test.len(),
            dir.display()
        ),
    )
}

fn cmd_train(args: &TrainArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let config = args.overrides.apply(seed);
    let model = train_ensemble(&corpus, &vocab, &config)?;

    let curves_dir = match &args.curves_dir {
        Some(dir) => dir.clone(),
        None => parent_dir(&args.model),
    };
    fs::create_dir_all(&curves_dir).map_err(Error::from)?;
    model.save(&args.model)?;
    for (k, p) in model.partitions().iter().enumerate() {
        let report = p.report.as_ref().expect("freshly trained partitions carry a report");
        fs::write(curves_dir.join(format!("mse_partition{k}.csv")), report.to_csv()).map_err(Error::from)?;
        say(
            out,
            format!(
                "partition {k} [{}, {}]: {} after {} epochs, best epoch {}",
                p.lo(),
                p.hi(),
                report.stop_reason,
                report.stopped_at_epoch,
                report.best_epoch
            ),
        )?;
    }
    say(out, format!("wrote {}", args.model.display()))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = EnsembleModel::load(&args.model)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let corpus = Corpus::load(&args.corpus)?;
    let report = model.evaluate(&corpus, &vocab)?;
    fs::write(&args.report, report.to_csv()).map_err(Error::from)?;
    for (k, p) in report.partitions.iter().enumerate() {
        let accuracy = match p.accuracy() {
            Some(a) => format!("{a:.4}"),
            None => "n/a".to_string(),
        };
        say(
            out,
            format!(
                "partition {k} [{}, {}]: {accuracy} ({}/{})",
                p.lo, p.hi, p.correct, p.total
            ),
        )?;
    }
    say(
        out,
        format!(
            "overall: {:.4} ({}/{})",
            report.accuracy,
            report.correct,
            report.rows.len()
        ),
    )
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let scenario = parse_assignments(&args.values)?;
    let model = EnsembleModel::load(&args.model)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    scenario
        .validate(&vocab, &PatternCatalog::new())
        .map_err(Error::Invalid)?;
    let p = model.predict_pattern(&scenario, &vocab)?;
    say(
        out,
        format!("predicted {} raw {:.4} partition {}", p.pattern_id, p.raw, p.partition),
    )
}

/// Parses exactly one `kind=value` pair per attribute.
pub fn parse_assignments(pairs: &[String]) -> CliResult<AttackScenario> {
    let mut scenario = AttackScenario::new("cli");
    for pair in pairs {
        let (kind, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected kind=value, got {pair:?}")))?;
        let kind: AttributeKind = kind.parse().map_err(CliError::Usage)?;
        let value = AttributeValue::new(value).ok_or_else(|| CliError::Usage(format!("empty value for {kind}")))?;
        if scenario.set(kind, value).is_some() {
            return Err(CliError::Usage(format!("{kind} given more than once")));
        }
    }
    let missing: Vec<&str> = AttributeKind::ALL
        .into_iter()
        .filter(|k| scenario.get(*k).is_none())
        .map(|k| k.column())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("missing {}", missing.join(", "))));
    }
    Ok(scenario)
}

/// Reads a CSV of attribute value strings. Columns are matched by header
/// name; `scenario_id` and `pattern_id` are optional.
pub fn read_value_scenarios(path: &Path) -> CliResult<Vec<AttackScenario>> {
    let csv_err = |source| CliError::Csv {
        path: path.display().to_string(),
        source,
    };
    let text = fs::read_to_string(path).map_err(Error::from)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();

    let mut columns: HashMap<AttributeKind, usize> = HashMap::new();
    let (mut id_col, mut pattern_col) = (None, None);
    for (i, name) in headers.iter().enumerate() {
        match name {
            "scenario_id" => id_col = Some(i),
            "pattern_id" => pattern_col = Some(i),
            other => {
                let kind: AttributeKind = other.parse().map_err(CliError::Usage)?;
                if columns.insert(kind, i).is_some() {
                    return Err(CliError::Usage(format!("column for {kind} appears twice")));
                }
            }
        }
    }
    if let Some(kind) = AttributeKind::ALL.into_iter().find(|k| !columns.contains_key(k)) {
        return Err(CliError::Usage(format!("{}: no column for {kind}", path.display())));
    }

    let mut scenarios = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = n + 2;
        let id = match id_col {
            Some(c) => row.get(c).unwrap_or_default().to_string(),
            None => format!("row-{}", n + 1),
        };
        let mut scenario = AttackScenario::new(id);
        for (kind, &c) in &columns {
            let value = row
                .get(c)
                .and_then(AttributeValue::new)
                .ok_or_else(|| Error::parse(line, format!("missing {kind} value")))?;
            scenario.set(*kind, value);
        }
        if let Some(c) = pattern_col {
            let field = row.get(c).unwrap_or_default();
            let id = field
                .parse::<u32>()
                .ok()
                .filter(|id| *id >= 1)
                .ok_or_else(|| Error::parse(line, format!("bad pattern id {field:?}")))?;
            scenario.pattern_id = Some(id);
        }
        scenarios.push(scenario);
    }
    Ok(scenarios)
}

/// The pinned vocabulary extended with every value in `scenarios`, in row
/// then schema order.
pub fn build_vocabulary(scenarios: &[AttackScenario]) -> Vocabulary {
    let mut vocab = Vocabulary::pinned();
    for scenario in scenarios {
        for kind in AttributeKind::ALL {
            if let Some(value) = scenario.get(kind) {
                vocab.register(kind, value);
            }
        }
    }
    vocab
}

pub fn encode_scenarios(scenarios: &[AttackScenario], vocab: &Vocabulary) -> CliResult<Corpus> {
    let mut records = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let pattern_id = s
            .pattern_id
            .ok_or_else(|| CliError::Usage(format!("scenario {} has no pattern id", s.scenario_id)))?;
        let codes: [u32; N_ATTRIBUTES] = encode_scenario(s, vocab)?;
        records.push(Record::new(s.scenario_id.clone(), codes, pattern_id));
    }
    Ok(Corpus::new(records, "encoded")?)
}
