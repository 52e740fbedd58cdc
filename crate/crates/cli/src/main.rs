//! Command-line interface: parse, stats, embed, train, tag, eval, and
//! the end-to-end run with the run1/run2 presets.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use adrtag::config::{Preset, RunConfig};
use adrtag::corpus::{
    compute_stats, filter_discontinuous, load_corpus, load_unannotated, write_corpus,
    AnnotationFormat, EntityClass,
};
use adrtag::embeddings::{kmeans, train_cbow, CbowConfig, Lemmatizer, SuffixLemmatizer};
use adrtag::error::Error;
use adrtag::eval::split_corpus;
use adrtag::pipeline::{
    evaluate_documents, prepare_doc, run_pipeline, train_suite, TaggerSuite,
};
use adrtag::structure::{parse_structure, structure_to_json, SplitStrategy};
use adrtag::tokenize::tokenize_str;

#[derive(Parser)]
#[command(name = "adrtag", version, about = "Adverse drug reaction tagging toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a document and dump its element structure as JSON
    Parse(ParseArgs),
    /// Per-class mention/token statistics for an annotated corpus
    Stats(StatsArgs),
    /// Train CBOW embeddings (and optionally k-means clusters) on a corpus
    Embed(EmbedArgs),
    /// Train the configured taggers and save the models
    Train(TrainArgs),
    /// Tag an unannotated corpus with saved models
    Tag(TagArgs),
    /// Score predicted annotations against gold annotations
    Eval(EvalArgs),
    /// End-to-end: split, train, tag the test split, evaluate
    Run(RunArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Document text file
    #[arg(long)]
    input: PathBuf,
    /// Write the JSON here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory of <doc>.txt + <doc>.ann pairs
    #[arg(long)]
    corpus: PathBuf,
    /// Annotation format id
    #[arg(long, default_value = "standoff")]
    format: String,
}

#[derive(Args)]
struct EmbedArgs {
    /// Directory of .txt documents
    #[arg(long)]
    corpus: PathBuf,
    /// Output path for the embedding text format
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also cluster the vectors with k-means (k = this value)
    #[arg(long)]
    kmeans: Option<usize>,
    /// Output path for the cluster model
    #[arg(long)]
    clusters_output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Tagger-assignment preset overriding the [taggers] section
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct TagArgs {
    /// Model directory written by `train` or `run`
    #[arg(long)]
    models: PathBuf,
    /// Directory of .txt documents to annotate
    #[arg(long)]
    input: PathBuf,
    /// Output directory for <doc>.txt + <doc>.ann pairs
    #[arg(long)]
    output: PathBuf,
    /// Worker threads for per-document stages
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    WithType,
    WithoutType,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold corpus directory
    #[arg(long)]
    gold: PathBuf,
    /// Predicted corpus directory
    #[arg(long)]
    pred: PathBuf,
    /// Which mention-matching mode to report
    #[arg(long, value_enum, default_value_t = EvalMode::Both)]
    mode: EvalMode,
    /// Write the machine-readable summary here
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Tagger-assignment preset (run1 or run2)
    #[arg(long)]
    preset: Option<String>,
    /// Print the resolved stage plan and exit without touching anything
    #[arg(long)]
    dry_run: bool,
    /// Worker threads for per-document stages
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_preset(name: &str) -> Result<Preset, Error> {
    Preset::from_name(name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?} (expected run1 or run2)")))
}

fn load_config(path: &std::path::Path, preset: &Option<String>) -> Result<RunConfig, Error> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(name) = preset {
        config.apply_preset(parse_preset(name)?);
    }
    Ok(config)
}

fn cmd_parse(args: ParseArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let json = structure_to_json(&parse_structure(&text));
    match args.output {
        Some(path) => fs::write(&path, json).map_err(|e| Error::io(&path, e))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), Error> {
    let format = AnnotationFormat::from_id(&args.format)?;
    let docs = load_corpus(&args.corpus, format)?;
    let (docs, dropped) = filter_discontinuous(&docs);
    let stats = compute_stats(&docs, tokenize_str);
    println!("documents: {}", docs.len());
    if dropped > 0 {
        println!("discontinuous annotations ignored: {dropped}");
    }
    println!(
        "{:<18} {:>10} {:>10} {:>16}",
        "class", "mentions", "tokens", "avg tk/mention"
    );
    for class in EntityClass::ALL {
        let s = stats.class(class);
        println!(
            "{:<18} {:>10} {:>10} {:>16.2}",
            class.name(),
            s.mention_count,
            s.token_count,
            s.avg_tokens_per_mention()
        );
    }
    Ok(())
}

fn cmd_embed(args: EmbedArgs) -> Result<(), Error> {
    let docs = load_unannotated(&args.corpus)?;
    if docs.is_empty() {
        return Err(Error::Config(format!(
            "no .txt documents in {}",
            args.corpus.display()
        )));
    }
    let lemmatizer = SuffixLemmatizer;
    let mut sentences = Vec::new();
    for doc in &docs {
        let prepared = prepare_doc(doc);
        for ut in &prepared.whole_units {
            sentences.push(
                ut.tokens
                    .iter()
                    .map(|t| lemmatizer.lemma(&t.surface))
                    .collect::<Vec<_>>(),
            );
        }
    }
    let config = CbowConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        min_count: args.min_count,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
    };
    let model = train_cbow(&sentences, &config)?;
    model.save(&args.output)?;
    println!(
        "trained {} vectors of dimension {} from {} sentences",
        model.vocab_size(),
        model.dim(),
        sentences.len()
    );
    if let Some(k) = args.kmeans {
        let clusters_path = args
            .clusters_output
            .ok_or_else(|| Error::Config("--kmeans requires --clusters-output".into()))?;
        let clusters = kmeans(&model, k, args.seed)?;
        clusters.save(&clusters_path)?;
        println!("clustered vocabulary into {k} clusters");
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let config = load_config(&args.config, &args.preset)?;
    config.validate()?;
    let docs = load_corpus(&config.corpus_dir, AnnotationFormat::Standoff)?;
    let (docs, dropped) = filter_discontinuous(&docs);
    if dropped > 0 {
        println!("discontinuous annotations ignored: {dropped}");
    }
    let (train, validation, _) = split_corpus(&docs, &config.split)?;
    let suite = train_suite(&config, &train, &validation)?;
    let models_dir = config.output_dir.join("models");
    suite.save(&models_dir)?;
    println!("models written to {}", models_dir.display());
    Ok(())
}

fn cmd_tag(args: TagArgs) -> Result<(), Error> {
    let suite = TaggerSuite::load(&args.models)?;
    let docs = load_unannotated(&args.input)?;
    if docs.is_empty() {
        return Err(Error::Config(format!(
            "no .txt documents in {}",
            args.input.display()
        )));
    }
    let tagged = suite.tag_documents(&docs, args.jobs)?;
    write_corpus(&tagged, &args.output)?;
    let mentions: usize = tagged.iter().map(|d| d.annotations.len()).sum();
    println!(
        "tagged {} documents ({mentions} mentions) into {}",
        tagged.len(),
        args.output.display()
    );
    Ok(())
}

fn render_counts(label: &str, counts: &adrtag::eval::PrfCounts) -> String {
    format!(
        "{:<18} {:>6} {:>6} {:>6} {:>8.2} {:>8.2} {:>8.2}",
        label,
        counts.tp,
        counts.fp,
        counts.fn_,
        counts.precision(),
        counts.recall(),
        counts.f1()
    )
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let gold = load_corpus(&args.gold, AnnotationFormat::Standoff)?;
    let (gold, _) = filter_discontinuous(&gold);
    let pred = load_corpus(&args.pred, AnnotationFormat::Standoff)?;
    if gold.len() != pred.len() {
        return Err(Error::Validation(format!(
            "gold has {} documents, predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    let report = evaluate_documents(&gold, &pred, |_| SplitStrategy::WholeElement)?;

    println!("Token-level scores (B/I ignored)");
    println!(
        "{:<18} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}",
        "class", "tp", "fp", "fn", "P", "R", "F1"
    );
    for (class, counts) in &report.token.per_class {
        println!("{}", render_counts(class.name(), counts));
    }
    println!("{}", render_counts("micro", &report.token.micro));
    println!();
    println!("Mention-level scores, exact span");
    println!("{:<28} {:>8} {:>8} {:>8}", "mode", "P", "R", "F1");
    if args.mode != EvalMode::WithoutType {
        let m = &report.mention_with_type.micro;
        println!(
            "{:<28} {:>8.2} {:>8.2} {:>8.2}",
            "considering entity type",
            m.precision(),
            m.recall(),
            m.f1()
        );
    }
    if args.mode != EvalMode::WithType {
        let m = &report.mention_without_type.micro;
        println!(
            "{:<28} {:>8.2} {:>8.2} {:>8.2}",
            "not considering entity type",
            m.precision(),
            m.recall(),
            m.f1()
        );
    }
    if let Some(path) = args.output {
        fs::write(&path, report.render_tsv()).map_err(|e| Error::io(&path, e))?;
        println!("\nsummary written to {}", path.display());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let mut config = load_config(&args.config, &args.preset)?;
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if args.dry_run {
        config.validate()?;
        print!("{}", config.describe_plan());
        return Ok(());
    }
    let summary = run_pipeline(&config)?;
    let (train, validation, test) = summary.split_sizes;
    println!("split: train={train} validation={validation} test={test}");
    println!(
        "discontinuous annotations ignored: {}",
        summary.dropped_discontinuous
    );
    println!();
    print!("{}", summary.report.render_text());
    println!();
    println!("predictions: {}", summary.predictions_dir.display());
    println!("models:      {}", summary.models_dir.display());
    println!("report:      {}", summary.report_path.display());
    println!("summary:     {}", summary.summary_path.display());
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Validation(_) | Error::Format { .. } => 2,
        Error::Io { .. } | Error::Runtime(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Train(args) => cmd_train(args),
        Command::Tag(args) => cmd_tag(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Run(args) => cmd_run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
