//! Command-line workflows behind the `tracesvm` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::artifact::ModelArtifact;
use crate::dual_cd::DualConfig;
use crate::error::{Error, Result};
use crate::eval::{classification_report, roc_curve, top_features};
use crate::par::Exec;
use crate::selection::{grid_search, train_test_split, SplitSpec, DEFAULT_ALPHA_GRID, DEFAULT_TOL_GRID};
use crate::sgd::{Penalty, SgdConfig};
use crate::synth::{generate, GeneratorConfig};
use crate::trace::{load_corpus, read_trace_file, CorpusManifest, Label, SyscallTrace};
use crate::trainer::{TrainerConfig, TrainerKind};
use crate::vectorizer::{IdfOptions, NgramRange, Vectorizer};

#[derive(Debug, Parser)]
#[command(name = "tracesvm", version, about = "Classify system call traces with linear SVMs")]
pub struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw NtTrace logs into one-call-per-line files.
    Preprocess(PreprocessArgs),
    /// Write a synthetic labeled corpus and its manifest.
    GenCorpus(GenCorpusArgs),
    /// Fit the vectorizer and a classifier, then save the model.
    Train(TrainArgs),
    /// Score a saved model against a labeled manifest.
    Evaluate(EvaluateArgs),
    /// Exhaustive (alpha, tol) search scored on a validation split.
    GridSearch(GridSearchArgs),
    /// List the n-grams with the largest coefficients.
    TopFeatures(TopFeaturesArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// A raw trace file or a directory of them.
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_t = 500)]
    pub n_traces: usize,
    #[arg(long, default_value_t = 0.637)]
    pub malicious_fraction: f64,
    #[arg(long, default_value_t = 60)]
    pub len_min: usize,
    #[arg(long, default_value_t = 120)]
    pub len_max: usize,
    #[arg(long, default_value_t = 5.0)]
    pub motif_rate: f64,
    /// Wrap calls in synthetic raw log lines.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Vectorizer and optimizer settings shared by `train` and `grid-search`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "sgd")]
    pub trainer: TrainerKind,
    #[arg(long, default_value_t = 8)]
    pub ngram_min: usize,
    #[arg(long, default_value_t = 10)]
    pub ngram_max: usize,
    /// Add 1 to every idf weight.
    #[arg(long)]
    pub smooth_idf: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SGD regularization strength.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Dual CD box bound.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub penalty: Option<Penalty>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
}

impl ModelArgs {
    pub fn range(&self) -> Result<NgramRange> {
        NgramRange::new(self.ngram_min, self.ngram_max)
    }

    pub fn idf_options(&self) -> IdfOptions {
        IdfOptions { smooth: self.smooth_idf }
    }

    pub fn trainer_config(&self) -> Result<TrainerConfig> {
        let cfg = match self.trainer {
            TrainerKind::Sgd => {
                let d = SgdConfig::default();
                TrainerConfig::Sgd(SgdConfig {
                    penalty: self.penalty.unwrap_or(d.penalty),
                    alpha: self.alpha.unwrap_or(d.alpha),
                    phi: self.phi.unwrap_or(d.phi),
                    epochs: self.epochs.unwrap_or(d.epochs),
                    tol: self.tol.unwrap_or(d.tol),
                    seed: self.seed,
                    t0: None,
                })
            }
            TrainerKind::DualCd => {
                let d = DualConfig::default();
                TrainerConfig::DualCd(DualConfig {
                    c: self.c.unwrap_or(d.c),
                    tol: self.tol.unwrap_or(d.tol),
                    max_outer: self.max_outer.unwrap_or(d.max_outer),
                    seed: self.seed,
                })
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model JSON path.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the training-set report here (without timing).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for report.txt, report.csv and roc.csv.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridSearchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated alpha grid.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Comma-separated tol grid.
    #[arg(long, value_delimiter = ',')]
    pub tols: Option<Vec<f64>>,
    /// Share of the manifest used for fitting; the rest validates.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long)]
    pub no_stratify: bool,
    /// Grid CSV path.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TopFeaturesArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    /// Write the listing to a file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid { .. } => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Preprocess(a) => cmd_preprocess(&a, out),
        Command::GenCorpus(a) => cmd_gen_corpus(&a, exec, out),
        Command::Train(a) => cmd_train(&a, exec, out),
        Command::Evaluate(a) => cmd_evaluate(&a, exec, out),
        Command::GridSearch(a) => cmd_grid_search(&a, exec, out),
        Command::TopFeatures(a) => cmd_top_features(&a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    out.write_fmt(text).map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn labels_of(traces: &[SyscallTrace]) -> Vec<Label> {
    traces.iter().map(|t| t.label.expect("manifest traces are labeled")).collect()
}

fn input_files(input: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(input).map_err(|e| Error::io(input, e))?;
    if meta.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(input).map_err(|e| Error::io(input, e))? {
        let path = entry.map_err(|e| Error::io(input, e))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn cmd_preprocess(a: &PreprocessArgs, out: &mut dyn Write) -> Result<()> {
    let files = input_files(&a.input)?;
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("no inputs in {}", a.input.display())));
    }
    fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let mut failed = Vec::new();
    for path in &files {
        let name = path.file_name().expect("regular file has a name");
        let result = read_trace_file(path, &path.to_string_lossy())
            .and_then(|t| write_file(&a.output.join(name), &t.render_processed()).map(|_| t.len()));
        match result {
            Ok(n) => say(out, format_args!("{}\t{n} calls\n", path.display()))?,
            Err(e) => failed.push(format!("{}: {e}", path.display())),
        }
    }
    say(out, format_args!("processed {} of {} inputs\n", files.len() - failed.len(), files.len()))?;
    for f in &failed {
        say(out, format_args!("failed: {f}\n"))?;
    }
    if failed.len() == files.len() {
        return Err(Error::InsufficientData(format!("all {} inputs failed", files.len())));
    }
    Ok(())
}

pub fn cmd_gen_corpus(a: &GenCorpusArgs, exec: Exec, out: &mut dyn Write) -> Result<()> {
    let cfg = GeneratorConfig {
        n_traces: a.n_traces,
        malicious_fraction: a.malicious_fraction,
        trace_len_range: (a.len_min, a.len_max),
        motif_rate: a.motif_rate,
        seed: a.seed,
        raw_format: a.raw,
        ..GeneratorConfig::default()
    };
    let corpus = generate(&cfg, exec)?;
    let manifest = corpus.write(&a.output)?;
    say(
        out,
        format_args!(
            "wrote {} traces ({} malicious, {} benign) and {}\n",
            corpus.traces.len(),
            corpus.manifest.count(Label::Malicious),
            corpus.manifest.count(Label::Benign),
            manifest.display()
        ),
    )
}

pub fn cmd_train(a: &TrainArgs, exec: Exec, out: &mut dyn Write) -> Result<()> {
    let cfg = a.model.trainer_config()?;
    let range = a.model.range()?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let corpus = load_corpus(&manifest, exec)?;
    let labels = labels_of(&corpus);

    let start = Instant::now();
    let (vectorizer, x) = Vectorizer::fit(&corpus, range, a.model.idf_options(), exec)?;
    let (model, summary) = cfg.train(&x, &labels)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let mut report = classification_report(&model.predict_matrix(&x)?, &labels)?;
    let artifact = ModelArtifact::new(&vectorizer, a.model.idf_options(), &model, &cfg, corpus.len())?;
    artifact.save(&a.output)?;
    let header = format!(
        "trainer {}  features {}  iterations {}  converged {}\n\n",
        cfg.kind(),
        vectorizer.dim(),
        summary.iterations,
        summary.converged
    );
    if let Some(p) = &a.report {
        write_file(p, &format!("{header}{}", report.render_table(false)))?;
    }
    report.train_seconds = Some(round_ms(train_seconds));
    say(out, format_args!("{header}{}", report.render_table(true)))?;
    say(out, format_args!("model written to {}\n", a.output.display()))
}

fn round_ms(s: f64) -> f64 {
    (s * 1000.0).round() / 1000.0
}

pub fn cmd_evaluate(a: &EvaluateArgs, exec: Exec, out: &mut dyn Write) -> Result<()> {
    let artifact = ModelArtifact::load(&a.model)?;
    let vectorizer = artifact.vectorizer()?;
    let model = artifact.model();
    let manifest = CorpusManifest::read(&a.manifest)?;
    let corpus = load_corpus(&manifest, exec)?;
    let labels = labels_of(&corpus);

    let start = Instant::now();
    let x = vectorizer.transform(&corpus, exec);
    let scores = model.decision_scores(&x)?;
    let test_seconds = start.elapsed().as_secs_f64();

    let preds: Vec<Label> = scores.iter().map(|&s| Label::from_sign(s)).collect();
    let mut report = classification_report(&preds, &labels)?;
    let roc = roc_curve(&scores, &labels)?;

    fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    write_file(&a.output.join("report.txt"), &report.render_table(false))?;
    write_file(&a.output.join("report.csv"), &report.to_csv())?;
    write_file(&a.output.join("roc.csv"), &roc.to_csv())?;
    report.test_seconds = Some(round_ms(test_seconds));
    say(out, format_args!("{}auc {}\n", report.render_table(true), roc.auc))
}

pub fn cmd_grid_search(a: &GridSearchArgs, exec: Exec, out: &mut dyn Write) -> Result<()> {
    let base = a.model.trainer_config()?;
    let range = a.model.range()?;
    let alphas = a.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
    let tols = a.tols.clone().unwrap_or_else(|| DEFAULT_TOL_GRID.to_vec());
    let manifest = CorpusManifest::read(&a.manifest)?;
    let corpus = load_corpus(&manifest, exec)?;
    let spec = SplitSpec {
        train_fraction: a.train_fraction,
        seed: a.model.seed,
        stratified: !a.no_stratify,
    };
    let (fit, validation) = train_test_split(&corpus, &spec)?;
    let (vectorizer, x_fit) = Vectorizer::fit(&fit, range, a.model.idf_options(), exec)?;
    let x_val = vectorizer.transform(&validation, exec);
    let result = grid_search(&x_fit, &x_val, &base, &alphas, &tols, exec)?;
    write_file(&a.output, &result.to_csv())?;
    let b = result.best;
    say(
        out,
        format_args!(
            "{} cells, {} fit / {} validation traces\nbest alpha {} tol {} f1 {}\n",
            result.table.len(),
            fit.len(),
            validation.len(),
            b.alpha,
            b.tol,
            b.f1
        ),
    )
}

pub fn cmd_top_features(a: &TopFeaturesArgs, out: &mut dyn Write) -> Result<()> {
    let artifact = ModelArtifact::load(&a.model)?;
    let vectorizer = artifact.vectorizer()?;
    let top = top_features(&artifact.model(), &vectorizer.vocab, a.k)?;
    let mut text = String::new();
    for (coef, ngram) in top {
        text.push_str(&format!("{coef:.6}\t{ngram}\n"));
    }
    match &a.output {
        Some(p) => write_file(p, &text),
        None => say(out, format_args!("{text}")),
    }
}
