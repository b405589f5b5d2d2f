//! Joint NER + segmentation training with RMSProp and early stopping.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabeledSentence, Sentence, Vocabulary};
use crate::crf::{CrfHead, DecodeConstraint};
use crate::error::{Error, Result};
use crate::eval::{entity_prf, evaluate, EvalReport};
use crate::layers::{BatchLayout, Encoder, EncoderConfig};
use crate::numcore::{grad_check, Checkpoint, GradCheckOptions, GradCheckReport, NumError, ParamStore, Tape, Tensor, Var};
use crate::tagset::{decode_labels, CwsLabel, EntityMention, NerAlphabet, NerLabel};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Weight of the segmentation loss, in `[0, 1)`.
    pub lambda: f64,
    pub dropout: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub embed_dim: usize,
    pub filters: usize,
    pub windows: Vec<usize>,
    pub hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        Self {
            lambda: 0.4,
            dropout: enc.dropout,
            learning_rate: 0.001,
            rms_decay: 0.9,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            embed_dim: enc.embed_dim,
            filters: enc.filters,
            windows: enc.windows,
            hidden: enc.hidden,
        }
    }
}

pub const CONFIG_KEYS: [&str; 13] = [
    "lambda",
    "dropout",
    "learning_rate",
    "rms_decay",
    "epsilon",
    "batch_size",
    "max_epochs",
    "patience",
    "seed",
    "embed_dim",
    "filters",
    "windows",
    "hidden",
];

impl TrainingConfig {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.embed_dim,
            filters: self.filters,
            windows: self.windows.clone(),
            hidden: self.hidden,
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1)", self.lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return bad(format!("rms_decay {} outside [0, 1)", self.rms_decay));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive".into());
        }
        self.encoder_config().validate()
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
        }
        let value = value.trim();
        match key.trim() {
            "lambda" => self.lambda = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "rms_decay" => self.rms_decay = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "embed_dim" => self.embed_dim = num(key, value)?,
            "filters" => self.filters = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "windows" => self.windows = value.split(',').map(|w| num(key, w.trim())).collect::<Result<_>>()?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines to the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply(text)?;
        Ok(config)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Canonical `key = value` text; parses back to an equal config.
    pub fn render(&self) -> String {
        let windows: Vec<String> = self.windows.iter().map(usize::to_string).collect();
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let value = match key {
                "lambda" => self.lambda.to_string(),
                "dropout" => self.dropout.to_string(),
                "learning_rate" => self.learning_rate.to_string(),
                "rms_decay" => self.rms_decay.to_string(),
                "epsilon" => self.epsilon.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "max_epochs" => self.max_epochs.to_string(),
                "patience" => self.patience.to_string(),
                "seed" => self.seed.to_string(),
                "embed_dim" => self.embed_dim.to_string(),
                "filters" => self.filters.to_string(),
                "hidden" => self.hidden.to_string(),
                "windows" => windows.join(","),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// A sentence as label and vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub chars: Vec<usize>,
    pub ner: Vec<usize>,
    pub cws: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub labels: Vec<NerLabel>,
    pub mentions: Vec<EntityMention>,
    /// Ill-formed `I-*` labels that had to open a mention.
    pub repairs: usize,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: TrainingConfig,
    pub vocab: Vocabulary,
    pub alphabet: NerAlphabet,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub ner: CrfHead,
    pub cws: CrfHead,
}

impl Model {
    /// Initializes all parameters from `config.seed`. `embeddings` replaces
    /// the random `V × D` table.
    pub fn new(config: TrainingConfig, vocab: Vocabulary, alphabet: NerAlphabet, embeddings: Option<Tensor>) -> Result<Self> {
        config.validate()?;
        if alphabet.types().is_empty() {
            return Err(Error::Config("no entity types to learn".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, config.encoder_config(), vocab.len(), embeddings, &mut rng)?;
        let ner = CrfHead::new(&mut store, "crf.ner", encoder.lstm.output_dim(), alphabet.len(), &mut rng)?;
        let cws = CrfHead::new(
            &mut store,
            "crf.cws",
            encoder.conv.output_dim(),
            CwsLabel::ALPHABET.len(),
            &mut rng,
        )?;
        Ok(Self {
            config,
            vocab,
            alphabet,
            store,
            encoder,
            ner,
            cws,
        })
    }

    pub fn example(&self, labeled: &LabeledSentence) -> Result<Example> {
        let ner = labeled
            .ner
            .iter()
            .map(|l| {
                self.alphabet
                    .index_of(l)
                    .ok_or_else(|| Error::Config(format!("label {l} is not in the model's alphabet")))
            })
            .collect::<Result<_>>()?;
        Ok(Example {
            chars: self.vocab.encode(labeled.chars()),
            ner,
            cws: labeled.cws.as_ref().map(|c| c.iter().map(|l| l.index()).collect()),
        })
    }

    fn encode_batch<R: Rng>(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        batch: &[&Example],
        train: bool,
        rng: &mut R,
    ) -> Result<(BatchLayout, crate::layers::Encoded)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let layout = BatchLayout::new(batch.iter().map(|e| e.chars.len()).collect())?;
        let rows: Vec<Vec<usize>> = batch.iter().map(|e| e.chars.clone()).collect();
        let indices = layout.pad_indices(&rows);
        let encoded = self.encoder.forward(tape, store, &indices, &layout, train, rng)?;
        Ok((layout, encoded))
    }

    /// Summed NER negative log-likelihood of `batch`.
    pub fn ner_loss<R: Rng>(&self, tape: &mut Tape, batch: &[&Example], train: bool, rng: &mut R) -> Result<Var> {
        let (layout, encoded) = self.encode_batch(&self.store, tape, batch, train, rng)?;
        self.ner_term(&self.store, tape, &layout, encoded.hidden, batch)
    }

    fn ner_term(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        layout: &BatchLayout,
        hidden: Var,
        batch: &[&Example],
    ) -> Result<Var> {
        let gold: Vec<Option<&[usize]>> = batch.iter().map(|e| Some(e.ner.as_slice())).collect();
        Ok(self
            .ner
            .batch_nll(tape, store, hidden, layout, &gold)?
            .expect("every sentence has NER labels"))
    }

    /// `(1 − λ)·NER + λ·CWS` with both terms summed over the batch.
    /// Sentences without segmentation labels only enter the NER term. At
    /// `λ = 0` the segmentation head is not evaluated.
    pub fn joint_loss<R: Rng>(&self, tape: &mut Tape, batch: &[&Example], train: bool, rng: &mut R) -> Result<Var> {
        self.joint_loss_in(&self.store, tape, batch, train, rng)
    }

    /// [`joint_loss`](Self::joint_loss) with parameter values taken from
    /// `store`, which must share this model's layout.
    pub fn joint_loss_in<R: Rng>(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        batch: &[&Example],
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let (layout, encoded) = self.encode_batch(store, tape, batch, train, rng)?;
        let ner = self.ner_term(store, tape, &layout, encoded.hidden, batch)?;
        let lambda = self.config.lambda;
        if lambda == 0.0 {
            return Ok(ner);
        }
        let gold: Vec<Option<&[usize]>> = batch.iter().map(|e| e.cws.as_deref()).collect();
        let weighted_ner = tape.scale(ner, 1.0 - lambda)?;
        match self.cws.batch_nll(tape, store, encoded.conv, &layout, &gold)? {
            Some(cws) => {
                let cws = tape.scale(cws, lambda)?;
                Ok(tape.add(weighted_ner, cws)?)
            }
            None => Ok(weighted_ner),
        }
    }

    /// Finite-difference check of [`joint_loss`](Self::joint_loss) over every
    /// parameter, with dropout off.
    pub fn grad_check(&mut self, batch: &[&Example], options: GradCheckOptions) -> Result<GradCheckReport> {
        let mut store = std::mem::take(&mut self.store);
        let report = grad_check(
            &mut store,
            |s, tape| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                self.joint_loss_in(s, tape, batch, false, &mut rng).map_err(|e| match e {
                    Error::Num(n) => n,
                    other => NumError::Format(other.to_string()),
                })
            },
            options,
        );
        self.store = store;
        Ok(report?)
    }

    fn constraint(&self) -> DecodeConstraint {
        DecodeConstraint {
            allowed: self.alphabet.transition_mask(),
            allowed_start: self.alphabet.start_mask(),
        }
    }

    /// Viterbi decoding with dropout off. `constrain` forbids BIO-illegal
    /// label sequences.
    pub fn predict(&self, sentences: &[Sentence], constrain: bool) -> Result<Vec<Prediction>> {
        let constraint = constrain.then(|| self.constraint());
        let potentials = self.ner.potentials(&self.store);
        sentences
            .iter()
            .map(|s| {
                let (_, hidden) = self
                    .encoder
                    .forward_sentence(&self.store, &self.vocab.encode(s.chars()), false, 0)?;
                let (path, _) = potentials.viterbi(&hidden, constraint.as_ref())?;
                let labels: Vec<NerLabel> = path
                    .iter()
                    .map(|&i| self.alphabet.label(i).cloned().expect("decoded index in range"))
                    .collect();
                let decoded = decode_labels(&labels);
                Ok(Prediction {
                    labels,
                    mentions: decoded.mentions,
                    repairs: decoded.repairs,
                })
            })
            .collect()
    }

    /// Scores predictions on `dataset`. R_oov is filled in when training
    /// surfaces are given.
    pub fn evaluate(
        &self,
        dataset: &Dataset,
        constrain: bool,
        training_surfaces: Option<&std::collections::BTreeSet<String>>,
    ) -> Result<EvalReport> {
        let sentences: Vec<Sentence> = dataset.sentences().map(|l| l.sentence.clone()).collect();
        let gold: Vec<Vec<EntityMention>> = dataset.sentences().map(LabeledSentence::mentions).collect();
        let pred: Vec<Vec<EntityMention>> = self.predict(&sentences, constrain)?.into_iter().map(|p| p.mentions).collect();
        match training_surfaces {
            Some(seen) => evaluate(&gold, &pred, &sentences, seen),
            None => entity_prf(&gold, &pred),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            meta: vec![
                ("config".into(), self.config.render()),
                ("vocab".into(), self.vocab.chars().iter().collect()),
                ("types".into(), self.alphabet.types().join("\n")),
            ],
            params: self.store.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let field = |key: &str| {
            ckpt.meta(key)
                .ok_or_else(|| Error::Checkpoint(format!("missing `{key}` entry")))
        };
        let config = TrainingConfig::parse(field("config")?)?;
        let vocab = Vocabulary::from_chars(field("vocab")?.chars());
        let types = field("types")?;
        let alphabet = NerAlphabet::new(types.split('\n').filter(|t| !t.is_empty()));
        let mut model = Self::new(config, vocab, alphabet, None)?;
        if ckpt.params.len() != model.store.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameters stored, model has {}",
                ckpt.params.len(),
                model.store.len()
            )));
        }
        for p in model.store.iter_mut() {
            let stored = ckpt
                .param(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("parameter `{}` missing", p.name)))?;
            if stored.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    p.name,
                    stored.shape(),
                    p.value.shape()
                )));
            }
            p.value = stored.clone();
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint().to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt = Checkpoint::read_from(std::io::BufReader::new(file))?;
        Self::from_checkpoint(&ckpt)
    }
}

/// RMSProp with one squared-gradient accumulator per parameter.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub accumulators: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(store: &ParamStore, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            accumulators: store.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect(),
        }
    }

    /// Applies the accumulated gradients. Frozen rows and untrainable
    /// parameters are left alone. A non-finite update aborts before the
    /// offending parameter is touched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for (p, acc) in store.iter_mut().zip(&mut self.accumulators) {
            if !p.trainable {
                continue;
            }
            let free: Vec<usize> = p.free_indices().collect();
            let mut next_acc = Vec::with_capacity(free.len());
            let mut next_val = Vec::with_capacity(free.len());
            for &i in &free {
                let g = p.grad.data()[i];
                let a = self.decay * acc.data()[i] + (1.0 - self.decay) * g * g;
                let v = p.value.data()[i] - self.learning_rate * g / (a + self.epsilon).sqrt();
                if !v.is_finite() || !a.is_finite() {
                    return Err(Error::NonFiniteUpdate(p.name.clone()));
                }
                next_acc.push(a);
                next_val.push(v);
            }
            for ((&i, a), v) in free.iter().zip(next_acc).zip(next_val) {
                acc.data_mut()[i] = a;
                p.value.data_mut()[i] = v;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_fscore: f64,
    /// Best validation F so far, including this epoch.
    pub best_fscore: f64,
}

/// Training progress. `model` holds the current parameters, `best` the
/// values of the best epoch so far.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Model,
    pub optimizer: RmsProp,
    pub epoch: usize,
    pub best_fscore: f64,
    pub best_epoch: usize,
    pub best: Vec<Tensor>,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    /// The model with the best validation parameters.
    pub fn best_model(&self) -> Model {
        let mut model = self.model.clone();
        for (p, v) in model.store.iter_mut().zip(&self.best) {
            p.value = v.clone();
        }
        model
    }
}

/// Trains until validation entity F has not improved for more than
/// `patience` epochs, or `max_epochs` is reached.
pub fn fit(model: Model, train: &Dataset, val: &Dataset) -> Result<TrainState> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let config = model.config.clone();
    let examples: Vec<Example> = train.sentences().map(|l| model.example(l)).collect::<Result<_>>()?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);

    let mut state = TrainState {
        optimizer: RmsProp::new(&model.store, config.learning_rate, config.rms_decay, config.epsilon),
        best: model.store.iter().map(|p| p.value.clone()).collect(),
        model,
        epoch: 0,
        best_fscore: f64::NEG_INFINITY,
        best_epoch: 0,
        history: Vec::new(),
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut stale = 0;
    while state.epoch < config.max_epochs {
        state.epoch += 1;
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let mut tape = Tape::new();
            let loss = state.model.joint_loss(&mut tape, &batch, true, &mut dropout_rng)?;
            total += tape.scalar(loss)?;
            state.model.store.zero_grads();
            tape.backward(loss, &mut state.model.store)?;
            state.optimizer.step(&mut state.model.store)?;
        }
        let val_f = state.model.evaluate(val, false, None)?.fscore;
        if val_f > state.best_fscore {
            state.best_fscore = val_f;
            state.best_epoch = state.epoch;
            state.best = state.model.store.iter().map(|p| p.value.clone()).collect();
            stale = 0;
        } else {
            stale += 1;
        }
        log::info!(
            "epoch {} loss {:.4} val F {:.4} best {:.4} (epoch {})",
            state.epoch,
            total,
            val_f,
            state.best_fscore,
            state.best_epoch
        );
        state.history.push(EpochRecord {
            epoch: state.epoch,
            train_loss: total,
            val_fscore: val_f,
            best_fscore: state.best_fscore,
        });
        if stale > config.patience {
            log::info!("no improvement for {stale} epochs, stopping");
            break;
        }
    }
    Ok(state)
}
