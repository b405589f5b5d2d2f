//! Command-line front end for `cnerkit`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cnerkit::augment::{extract_inventory, generate_pseudo, merge};
use cnerkit::corpus::{
    build_vocab, format_columns, load_column_file, load_embeddings, read_raw_sentences, split_train_val, subsample, Dataset,
    Sample, Sentence, Validation,
};
use cnerkit::eval::{self, training_surfaces, EvalReport};
use cnerkit::numcore::{grad_check, Difference, GradCheckOptions, GradCheckReport, ParamStore, Parameter, Tensor};
use cnerkit::synthetic::{toy_batch, Synthesizer};
use cnerkit::tagset::{EntityMention, NerAlphabet, NerLabel};
use cnerkit::trainer::{fit, Example, Model, TrainingConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cnerkit",
    version,
    about = "Character-level Chinese NER with joint segmentation training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint and validation report.
    Train(TrainArgs),
    /// Tag sentences with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Generate pseudo labeled sentences by entity replacement.
    Augment(AugmentArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

/// `auto` or an explicit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoCount {
    Auto,
    Fixed(usize),
}

impl PseudoCount {
    pub fn resolve(self, real: usize) -> usize {
        match self {
            PseudoCount::Auto => real,
            PseudoCount::Fixed(n) => n,
        }
    }
}

impl FromStr for PseudoCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Fixed)
            .map_err(|_| format!("expected `auto` or a count, got `{s}`"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Weight of the segmentation loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed for initialization, shuffling, dropout, splitting and augmentation.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<TrainingConfig> {
        let mut config = TrainingConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            config.apply(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .with_context(|| format!("override `{o}` is not KEY=VALUE"))?;
            config.set(k, v)?;
        }
        if let Some(l) = self.lambda {
            config.lambda = l;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Column-format training corpus.
    pub train: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory for `model.ckpt`, `report.txt` and `train.entities`.
    #[arg(long, default_value = "run")]
    pub out_dir: PathBuf,
    /// Share of real sentences held out for early stopping.
    #[arg(long, default_value_t = 0.1)]
    pub val_ratio: f64,
    /// Pretrained character vectors in word2vec text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Number of pseudo samples: `auto` (one per training sentence) or a count.
    #[arg(long, default_value = "auto")]
    pub pseudo: PseudoCount,
    /// Train on a seeded fraction of the corpus.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Characters seen fewer times map to UNK.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Repair ill-formed BIO in the corpus instead of rejecting it.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// A `model.ckpt` written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Plain text (one sentence per line) or a column-format file.
    #[arg(long)]
    pub input: PathBuf,
    /// Column-format output, one `char<TAB>label` line per character.
    #[arg(long)]
    pub output: PathBuf,
    /// Forbid BIO-illegal label sequences during decoding.
    #[arg(long)]
    pub constrain_bio: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Gold column-format file.
    pub gold: PathBuf,
    /// Predicted column-format file, aligned with the gold file.
    pub pred: PathBuf,
    /// Training entity surfaces, one per line, for OOV recall.
    #[arg(long)]
    pub training_entities: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    /// Labeled column-format source corpus.
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `auto` (one per source sentence) or a count.
    #[arg(long, default_value = "auto")]
    pub count: PseudoCount,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the source sentences before the generated ones.
    #[arg(long)]
    pub merge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Tiny,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Central,
    Ridders,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// `tiny`: two 5-character sentences; `small`: four synthetic sentences of mixed length.
    #[arg(long, value_enum, default_value_t = Scale::Tiny)]
    pub scale: Scale,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Finite-difference step (the initial step for `ridders`).
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Method::Ridders)]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Train(a) => cmd_train(&a).map(|_| Outcome::Success),
        Command::Predict(a) => cmd_predict(&a).map(|_| Outcome::Success),
        Command::Eval(a) => {
            let (_, text) = cmd_eval(&a)?;
            print!("{text}");
            Ok(Outcome::Success)
        }
        Command::Augment(a) => cmd_augment(&a).map(|_| Outcome::Success),
        Command::Gradcheck(a) => {
            let summary = cmd_gradcheck(&a)?;
            print!("{}", summary.text);
            Ok(if summary.passed {
                Outcome::Success
            } else {
                Outcome::CheckFailed
            })
        }
    }
}

/// Derives independent seeds for the stages of one run.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(100 + stage);
    rng.gen()
}

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const REPORT_FILE: &str = "report.txt";
pub const ENTITIES_FILE: &str = "train.entities";

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub config: TrainingConfig,
    pub report: EvalReport,
    pub report_text: String,
    pub best_epoch: usize,
    pub epochs: usize,
    pub train_size: usize,
    pub pseudo_count: usize,
    pub val_size: usize,
}

/// load → subsample → split → augment the training part → fit → write the
/// best checkpoint, the validation report and the training entity list.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let config = args.config.resolve()?;
    log::info!("resolved config:\n{}", config.render().trim_end());
    let mode = if args.lenient {
        Validation::Lenient
    } else {
        Validation::Strict
    };
    let mut corpus = load_column_file(&args.train, false, mode)?;
    log::info!("loaded {} sentences from {}", corpus.len(), args.train.display());
    if let Some(r) = args.subsample {
        corpus = subsample(&corpus, r, stage_seed(config.seed, 0))?;
        log::info!("subsampled to {} sentences", corpus.len());
    }
    let alphabet = NerAlphabet::new(corpus.entity_types.iter().cloned());
    let (train, val) = split_train_val(&corpus, args.val_ratio, stage_seed(config.seed, 1))?;
    let real = Dataset::new(
        train
            .samples
            .iter()
            .filter(|s| s.provenance == cnerkit::Provenance::Real)
            .cloned()
            .collect(),
    );
    let count = args.pseudo.resolve(real.len());
    let train = if count > 0 {
        let inventory = extract_inventory(&real);
        let pseudo = generate_pseudo(&real, &inventory, count, stage_seed(config.seed, 2))?;
        log::info!(
            "generated {} pseudo samples from {} entity surfaces",
            pseudo.len(),
            inventory.len()
        );
        merge(&train, pseudo)
    } else {
        train
    };
    let vocab = build_vocab(&train, args.min_count);
    let table = match &args.embeddings {
        Some(path) => {
            let loaded = load_embeddings(path, &vocab, config.embed_dim, stage_seed(config.seed, 3))?;
            log::info!("embeddings cover {:.2}% of the vocabulary", 100.0 * loaded.coverage);
            Some(loaded.table)
        }
        None => None,
    };
    log::info!(
        "train {} sentences, validation {}, vocabulary {}",
        train.len(),
        val.len(),
        vocab.len()
    );

    let model = Model::new(config.clone(), vocab, alphabet, table)?;
    let state = fit(model, &train, &val)?;
    let best = state.best_model();
    let seen = training_surfaces(&train);
    let report = best.evaluate(&val, false, Some(&seen))?;

    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let mut ckpt = best.to_checkpoint();
    ckpt.meta.push(("best_epoch".into(), state.best_epoch.to_string()));
    fs::write(args.out_dir.join(CHECKPOINT_FILE), ckpt.to_bytes())?;
    let mut entities = String::new();
    for s in &seen {
        entities.push_str(s);
        entities.push('\n');
    }
    fs::write(args.out_dir.join(ENTITIES_FILE), entities)?;

    let mut text = eval::report(std::slice::from_ref(&report));
    let _ = writeln!(text, "best_epoch={}", state.best_epoch);
    let _ = writeln!(text, "epochs={}", state.epoch);
    let _ = writeln!(text, "train_sentences={}", train.len());
    let _ = writeln!(text, "pseudo_sentences={count}");
    let _ = writeln!(text, "val_sentences={}", val.len());
    fs::write(args.out_dir.join(REPORT_FILE), &text)?;
    log::info!("validation report:\n{}", text.trim_end());
    Ok(TrainSummary {
        config,
        report,
        report_text: text,
        best_epoch: state.best_epoch,
        epochs: state.epoch,
        train_size: train.len(),
        pseudo_count: count,
        val_size: val.len(),
    })
}

/// Reads plain sentences, or the characters of a column-format file.
fn read_input(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if text.lines().any(|l| l.contains('\t')) {
        let d = cnerkit::corpus::read_columns(text.as_bytes(), &path.display().to_string(), false, Validation::Lenient)?;
        Ok(d.sentences().map(|l| l.sentence.clone()).collect())
    } else {
        Ok(read_raw_sentences(BufReader::new(text.as_bytes()))?)
    }
}

fn format_predictions(sentences: &[Sentence], labels: &[Vec<NerLabel>]) -> String {
    let mut out = String::new();
    for (i, (s, ls)) in sentences.iter().zip(labels).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (c, l) in s.chars().iter().zip(ls) {
            let _ = writeln!(out, "{c}\t{l}");
        }
    }
    out
}

/// Returns the number of decode repairs.
pub fn cmd_predict(args: &PredictArgs) -> Result<usize> {
    let model = Model::load(&args.checkpoint).with_context(|| format!("cannot load {}", args.checkpoint.display()))?;
    let sentences = read_input(&args.input)?;
    let predictions = model.predict(&sentences, args.constrain_bio)?;
    let repairs: usize = predictions.iter().map(|p| p.repairs).sum();
    if repairs > 0 {
        log::warn!("{repairs} ill-formed I-* labels were repaired while decoding");
    } else {
        log::info!("no decode repairs");
    }
    let labels: Vec<Vec<NerLabel>> = predictions.into_iter().map(|p| p.labels).collect();
    fs::write(&args.output, format_predictions(&sentences, &labels))?;
    log::info!("tagged {} sentences into {}", sentences.len(), args.output.display());
    Ok(repairs)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(EvalReport, String)> {
    let gold = load_column_file(&args.gold, false, Validation::Strict)?;
    let pred = load_column_file(&args.pred, false, Validation::Lenient)?;
    ensure!(
        gold.len() == pred.len(),
        "{} has {} sentences but {} has {}",
        args.gold.display(),
        gold.len(),
        args.pred.display(),
        pred.len()
    );
    for (i, (g, p)) in gold.sentences().zip(pred.sentences()).enumerate() {
        if g.sentence != p.sentence {
            bail!("sentence {} differs between gold and prediction", i + 1);
        }
    }
    let gold_m: Vec<Vec<EntityMention>> = gold.sentences().map(|l| l.mentions()).collect();
    let pred_m: Vec<Vec<EntityMention>> = pred.sentences().map(|l| l.mentions()).collect();
    let report = match &args.training_entities {
        Some(path) => {
            let seen: BTreeSet<String> = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            let sentences: Vec<Sentence> = gold.sentences().map(|l| l.sentence.clone()).collect();
            eval::evaluate(&gold_m, &pred_m, &sentences, &seen)?
        }
        None => eval::entity_prf(&gold_m, &pred_m)?,
    };
    let text = eval::report(std::slice::from_ref(&report));
    if let Some(path) = &args.report {
        fs::write(path, &text)?;
    }
    Ok((report, text))
}

/// Returns the number of generated samples.
pub fn cmd_augment(args: &AugmentArgs) -> Result<usize> {
    let source = load_column_file(&args.input, false, Validation::Strict)?;
    let real = Dataset::new(
        source
            .samples
            .iter()
            .filter(|s| s.provenance == cnerkit::Provenance::Real)
            .cloned()
            .collect(),
    );
    let inventory = extract_inventory(&real);
    let count = args.count.resolve(real.len());
    let pseudo = generate_pseudo(&real, &inventory, count, args.seed)?;
    let samples: Vec<Sample> = if args.merge {
        merge(&source, pseudo).samples
    } else {
        pseudo.into_iter().map(|p| Sample::pseudo(p.labeled)).collect()
    };
    fs::write(&args.output, format_columns(&samples))?;
    log::info!("wrote {count} pseudo samples to {}", args.output.display());
    Ok(count)
}

#[derive(Debug, Clone)]
pub struct GradcheckSummary {
    pub passed: bool,
    pub text: String,
    pub checks: Vec<(String, GradCheckReport)>,
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}

/// Per-op checks on small random inputs followed by the full joint loss.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<GradcheckSummary> {
    let options = GradCheckOptions {
        tol: args.tol,
        eps: args.eps,
        method: match args.method {
            Method::Central => Difference::Central,
            Method::Ridders => Difference::Ridders,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut checks = Vec::new();

    let mut store = ParamStore::new();
    let a = store.add(Parameter::new("a", random_tensor(&mut rng, 3, 4)));
    let b = store.add(Parameter::new("b", random_tensor(&mut rng, 4, 3)));
    let t = store.add(Parameter::new("t", random_tensor(&mut rng, 3, 3)));
    let r = store.add(Parameter::new("r", random_tensor(&mut rng, 1, 4)));
    type OpFn =
        fn(&mut cnerkit::numcore::Tape, [cnerkit::numcore::Var; 4]) -> Result<cnerkit::numcore::Var, cnerkit::numcore::NumError>;
    let ops: [(&str, OpFn); 8] = [
        ("matmul", |tp, [a, b, _, _]| {
            let y = tp.matmul(a, b)?;
            let y = tp.tanh(y)?;
            tp.sum(y)
        }),
        ("add_row+sigmoid", |tp, [a, _, _, r]| {
            let y = tp.add_row(a, r)?;
            let y = tp.sigmoid(y)?;
            tp.sum(y)
        }),
        ("mul+relu", |tp, [a, _, _, r]| {
            let y = tp.add_row(a, r)?;
            let y = tp.mul(y, a)?;
            let y = tp.relu(y)?;
            tp.sum(y)
        }),
        ("softmax_rows", |tp, [a, b, _, _]| {
            let y = tp.softmax_rows(a)?;
            let y = tp.matmul(y, b)?;
            let y = tp.mul(y, y)?;
            tp.sum(y)
        }),
        ("log_sum_exp", |tp, [a, _, _, _]| {
            let y = tp.log_sum_exp(a, 1)?;
            let z = tp.log_sum_exp(a, 0)?;
            let y = tp.sum(y)?;
            let z = tp.sum(z)?;
            tp.sub(y, z)
        }),
        ("lse_transition", |tp, [a, b, t, _]| {
            let x = tp.matmul(a, b)?;
            let y = tp.lse_transition(x, t)?;
            let y = tp.tanh(y)?;
            tp.sum(y)
        }),
        ("shift+blend", |tp, [a, _, _, _]| {
            let s = tp.shift_rows(a, -1, 1)?;
            let y = tp.blend_rows(&[true, false, true], s, a)?;
            let y = tp.mul(y, a)?;
            tp.sum(y)
        }),
        ("concat+slice+pick", |tp, [a, b, _, _]| {
            let bt = tp.slice_rows(b, 0, 3)?;
            let y = tp.concat_cols(&[a, bt])?;
            let y = tp.slice_cols(y, 2, 4)?;
            let y = tp.tanh(y)?;
            let p = tp.pick(y, &[(0, 1), (2, 3), (1, 0)])?;
            let p = tp.mul(p, p)?;
            tp.sum(p)
        }),
    ];
    for (name, op) in ops {
        let report = grad_check(
            &mut store,
            |s, tp| {
                let vars = [tp.param(s, a)?, tp.param(s, b)?, tp.param(s, t)?, tp.param(s, r)?];
                op(tp, vars)
            },
            options,
        )?;
        checks.push((format!("op {name}"), report));
    }

    let (data, dims) = match args.scale {
        Scale::Tiny => (toy_batch(), (4, 8, 4)),
        Scale::Small => (Synthesizer::new(2)?.generate(4, 0.0, true, args.seed)?, (8, 16, 6)),
    };
    let config = TrainingConfig {
        lambda: 0.4,
        dropout: 0.0,
        embed_dim: dims.0,
        filters: dims.1,
        hidden: dims.2,
        seed: args.seed,
        ..TrainingConfig::default()
    };
    let mut model = Model::new(
        config,
        build_vocab(&data, 1),
        NerAlphabet::new(data.entity_types.iter().cloned()),
        None,
    )?;
    let examples: Vec<Example> = data.sentences().map(|l| model.example(l)).collect::<cnerkit::Result<_>>()?;
    let report = model.grad_check(&examples.iter().collect::<Vec<_>>(), options)?;
    checks.push(("model joint_loss".into(), report));

    let mut text = String::new();
    let mut passed = true;
    for (name, report) in &checks {
        let ok = report.passed();
        passed &= ok;
        let _ = writeln!(
            text,
            "{} {name}: max relative error {:.3e} over {} parameters",
            if ok { "PASS" } else { "FAIL" },
            report.max_rel_error(),
            report.params.len()
        );
        for f in report.failures() {
            let _ = writeln!(
                text,
                "    {} rel error {:.3e} at {} (analytic {:e}, numeric {:e})",
                f.name, f.max_rel_error, f.worst_index, f.worst_analytic, f.worst_numeric
            );
        }
    }
    let _ = writeln!(text, "{}", if passed { "gradcheck passed" } else { "gradcheck FAILED" });
    Ok(GradcheckSummary { passed, text, checks })
}
