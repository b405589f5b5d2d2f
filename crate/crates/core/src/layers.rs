//! Character encoder: embedding lookup, multi-window convolution and a
//! bidirectional LSTM.
//!
//! Batches are laid out time-major: a batch of `B` sentences padded to `N`
//! steps is an `(N·B) × dim` matrix whose row `t·B + b` belongs to sentence
//! `b` at position `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{init_embeddings, Vocabulary};
use crate::error::{Error, Result};
use crate::numcore::{NumError, ParamId, ParamStore, Parameter, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub filters: usize,
    pub windows: Vec<usize>,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 200,
            filters: 400,
            windows: vec![2, 3, 4, 5],
            hidden: 200,
            dropout: 0.2,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.embed_dim == 0 || self.hidden == 0 {
            return bad("embedding and hidden sizes must be positive".into());
        }
        if self.windows.is_empty() || self.windows.contains(&0) {
            return bad(format!("invalid window sizes {:?}", self.windows));
        }
        if self.filters == 0 || !self.filters.is_multiple_of(self.windows.len()) {
            return bad(format!(
                "{} filters cannot be split evenly over {} windows",
                self.filters,
                self.windows.len()
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn filters_per_window(&self) -> usize {
        self.filters / self.windows.len()
    }
}

/// Lengths of the sentences in a padded batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchLayout {
    lengths: Vec<usize>,
    steps: usize,
}

impl BatchLayout {
    pub fn new(lengths: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() || lengths.contains(&0) {
            return Err(Error::Empty("batch needs non-empty sentences"));
        }
        let steps = *lengths.iter().max().unwrap();
        Ok(Self { lengths, steps })
    }

    pub fn batch(&self) -> usize {
        self.lengths.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn row(&self, t: usize, b: usize) -> usize {
        t * self.batch() + b
    }

    /// Which sentences are still active at step `t`.
    pub fn mask(&self, t: usize) -> Vec<bool> {
        self.lengths.iter().map(|&l| t < l).collect()
    }

    pub fn all_active(&self, t: usize) -> bool {
        self.lengths.iter().all(|&l| t < l)
    }

    /// Time-major index matrix padded with PAD.
    pub fn pad_indices(&self, sentences: &[Vec<usize>]) -> Vec<usize> {
        let mut out = vec![Vocabulary::PAD; self.steps * self.batch()];
        for (b, s) in sentences.iter().enumerate() {
            for (t, &ix) in s.iter().enumerate() {
                out[self.row(t, b)] = ix;
            }
        }
        out
    }
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}

/// `V × D` lookup table; row `i` is the vector of vocabulary index `i`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, table: Tensor) -> Self {
        let dim = table.cols();
        let mut p = Parameter::new("embed.E", table);
        p.frozen_row = Some(Vocabulary::PAD);
        p.value.row_mut(Vocabulary::PAD).fill(0.0);
        Self {
            table: store.add(p),
            dim,
        }
    }

    pub fn random<R: Rng>(store: &mut ParamStore, vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        Self::new(store, init_embeddings(vocab_size, dim, rng))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, indices: &[usize]) -> Result<Var> {
        Ok(tape.gather(store, self.table, indices)?)
    }
}

#[derive(Debug, Clone)]
pub struct ConvWindow {
    pub size: usize,
    /// `(size·D) × F`; row block `j` multiplies the input at offset `lo + j`.
    pub weight: ParamId,
    pub bias: ParamId,
}

impl ConvWindow {
    /// Offset of the first position in the window: `{i - ⌈(K-1)/2⌉ ..}`,
    /// so K=2 covers {i-1, i}, K=3 {i-1..i+1}, K=4 {i-2..i+1}, K=5 {i-2..i+2}.
    pub fn first_offset(&self) -> isize {
        -((self.size / 2) as isize)
    }
}

#[derive(Debug, Clone)]
pub struct ConvBank {
    pub windows: Vec<ConvWindow>,
    pub input_dim: usize,
    pub per_window: usize,
}

impl ConvBank {
    pub fn new<R: Rng>(store: &mut ParamStore, input_dim: usize, windows: &[usize], per_window: usize, rng: &mut R) -> Self {
        let windows = windows
            .iter()
            .map(|&k| {
                let weight = store.add(Parameter::new(format!("cnn.K{k}.w"), glorot(k * input_dim, per_window, rng)));
                let bias = store.add(Parameter::new(format!("cnn.K{k}.b"), Tensor::zeros(1, per_window)));
                ConvWindow { size: k, weight, bias }
            })
            .collect();
        Self {
            windows,
            input_dim,
            per_window,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.per_window * self.windows.len()
    }

    /// ReLU convolution over a time-major `(N·B) × D` input with zero padding;
    /// returns `(N·B) × M`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, batch: usize) -> Result<Var> {
        let d = self.input_dim;
        let mut outs = Vec::with_capacity(self.windows.len());
        for w in &self.windows {
            let weight = tape.param(store, w.weight)?;
            let mut acc: Option<Var> = None;
            for j in 0..w.size {
                let offset = w.first_offset() + j as isize;
                let shifted = if offset == 0 { x } else { tape.shift_rows(x, offset, batch)? };
                let block = tape.slice_rows(weight, j * d, d)?;
                let term = tape.matmul(shifted, block)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => tape.add(a, term)?,
                });
            }
            let bias = tape.param(store, w.bias)?;
            let pre = tape.add_row(acc.expect("window size > 0"), bias)?;
            outs.push(tape.relu(pre)?);
        }
        Ok(tape.concat_cols(&outs)?)
    }
}

/// Gate layout along the `4S` columns: input, forget, output, candidate.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let wx = store.add(Parameter::new(format!("{prefix}.wx"), glorot(input, 4 * hidden, rng)));
        let wh = store.add(Parameter::new(format!("{prefix}.wh"), glorot(hidden, 4 * hidden, rng)));
        let mut b = Tensor::zeros(1, 4 * hidden);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        let bias = store.add(Parameter::new(format!("{prefix}.b"), b));
        Self { wx, wh, bias, hidden }
    }

    /// Scans the sequence in the given direction from a zero state. Steps
    /// where a sentence is inactive carry its state through unchanged, so
    /// padded positions never influence real ones. Returns one `B × S`
    /// output per step in time order.
    fn scan(&self, tape: &mut Tape, store: &ParamStore, input: Var, layout: &BatchLayout, reverse: bool) -> Result<Vec<Var>> {
        let (b, s) = (layout.batch(), self.hidden);
        let wx = tape.param(store, self.wx)?;
        let wh = tape.param(store, self.wh)?;
        let bias = tape.param(store, self.bias)?;
        let proj = tape.matmul(input, wx)?;
        let proj = tape.add_row(proj, bias)?;

        let zero = tape.constant(Tensor::zeros(b, s))?;
        let (mut h, mut c) = (zero, zero);
        let mut outputs = vec![zero; layout.steps()];
        let order: Vec<usize> = if reverse {
            (0..layout.steps()).rev().collect()
        } else {
            (0..layout.steps()).collect()
        };
        for t in order {
            let x_t = tape.slice_rows(proj, t * b, b)?;
            let rec = tape.matmul(h, wh)?;
            let pre = tape.add(x_t, rec)?;
            let gate = |tape: &mut Tape, k: usize| tape.slice_cols(pre, k * s, s);
            let (i, f, o, g) = (gate(tape, 0)?, gate(tape, 1)?, gate(tape, 2)?, gate(tape, 3)?);
            let i = tape.sigmoid(i)?;
            let f = tape.sigmoid(f)?;
            let o = tape.sigmoid(o)?;
            let g = tape.tanh(g)?;
            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            let c_new = tape.add(keep, write)?;
            let squashed = tape.tanh(c_new)?;
            let h_new = tape.mul(o, squashed)?;
            if layout.all_active(t) {
                (h, c) = (h_new, c_new);
            } else {
                let mask = layout.mask(t);
                h = tape.blend_rows(&mask, h_new, h)?;
                c = tape.blend_rows(&mask, c_new, c)?;
            }
            outputs[t] = h;
        }
        Ok(outputs)
    }
}

#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new<R: Rng>(store: &mut ParamStore, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            forward: LstmCell::new(store, "lstm.fwd", input, hidden, rng),
            backward: LstmCell::new(store, "lstm.bwd", input, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    /// `(N·B) × M` → `(N·B) × 2S`, each row `[→h ; ←h]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Var, layout: &BatchLayout) -> Result<Var> {
        let fwd = self.forward.scan(tape, store, input, layout, false)?;
        let bwd = self.backward.scan(tape, store, input, layout, true)?;
        let fwd = tape.concat_rows(&fwd)?;
        let bwd = tape.concat_rows(&bwd)?;
        Ok(tape.concat_cols(&[fwd, bwd])?)
    }
}

/// Post-dropout encoder outputs in time-major layout.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `(N·B) × M` convolution features, consumed by the segmentation head.
    pub conv: Var,
    /// `(N·B) × 2S` BiLSTM states, consumed by the NER head.
    pub hidden: Var,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub embedding: Embedding,
    pub conv: ConvBank,
    pub lstm: BiLstm,
}

impl Encoder {
    /// Registers all encoder parameters. `table` overrides the random
    /// embedding initialization (e.g. pretrained vectors).
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        config: EncoderConfig,
        vocab_size: usize,
        table: Option<Tensor>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let embedding = match table {
            Some(t) => {
                if t.shape() != [vocab_size, config.embed_dim] {
                    return Err(Error::Config(format!(
                        "embedding table {:?} does not match vocabulary {vocab_size} × {}",
                        t.shape(),
                        config.embed_dim
                    )));
                }
                Embedding::new(store, t)
            }
            None => Embedding::random(store, vocab_size, config.embed_dim, rng),
        };
        let conv = ConvBank::new(store, config.embed_dim, &config.windows, config.filters_per_window(), rng);
        let lstm = BiLstm::new(store, conv.output_dim(), config.hidden, rng);
        Ok(Self {
            config,
            embedding,
            conv,
            lstm,
        })
    }

    /// embed → dropout → conv → dropout → BiLSTM → dropout.
    pub fn forward<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        indices: &[usize],
        layout: &BatchLayout,
        train: bool,
        rng: &mut R,
    ) -> Result<Encoded> {
        if indices.len() != layout.steps() * layout.batch() {
            return Err(NumError::BadBlock {
                rows: indices.len(),
                block: layout.batch(),
            }
            .into());
        }
        let rate = self.config.dropout;
        let x = self.embedding.forward(tape, store, indices)?;
        let x = tape.dropout(x, rate, train, rng)?;
        let c = self.conv.forward(tape, store, x, layout.batch())?;
        let c = tape.dropout(c, rate, train, rng)?;
        let h = self.lstm.forward(tape, store, c, layout)?;
        let h = tape.dropout(h, rate, train, rng)?;
        Ok(Encoded { conv: c, hidden: h })
    }

    /// Single-sentence convenience: returns `(c, h)` as `N × M` and `N × 2S`.
    pub fn forward_sentence(&self, store: &ParamStore, indices: &[usize], train: bool, seed: u64) -> Result<(Tensor, Tensor)> {
        let layout = BatchLayout::new(vec![indices.len()])?;
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = self.forward(&mut tape, store, indices, &layout, train, &mut rng)?;
        Ok((tape.value(out.conv).clone(), tape.value(out.hidden).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{grad_check, GradCheckOptions};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    fn small_config() -> EncoderConfig {
        EncoderConfig {
            embed_dim: 3,
            filters: 8,
            windows: vec![2, 3, 4, 5],
            hidden: 3,
            dropout: 0.2,
        }
    }

    #[test]
    fn default_sizes() {
        let c = EncoderConfig::default();
        assert_eq!((c.embed_dim, c.filters, c.hidden), (200, 400, 200));
        assert_eq!(c.windows, [2, 3, 4, 5]);
        assert_eq!(c.filters_per_window(), 100);
        assert_eq!(c.dropout, 0.2);
        assert!(EncoderConfig { filters: 10, ..c }.validate().is_err());
    }

    #[test]
    fn window_offsets_follow_floor_semantics() {
        let expect = [(2, -1), (3, -1), (4, -2), (5, -2)];
        for (k, lo) in expect {
            let w = ConvWindow {
                size: k,
                weight: ParamId(0),
                bias: ParamId(0),
            };
            assert_eq!(w.first_offset(), lo, "K={k}");
        }
    }

    #[test]
    fn embed_is_row_lookup_and_pad_is_zero() {
        let mut store = ParamStore::new();
        let e = Embedding::random(&mut store, 5, 4, &mut rng());
        let mut tape = Tape::new();
        let out = e.forward(&mut tape, &store, &[3, Vocabulary::PAD]).unwrap();
        assert_eq!(tape.value(out).row(0), store.value(e.table).row(3));
        assert!(tape.value(out).row(1).iter().all(|&v| v == 0.0));
        assert!(e.forward(&mut tape, &store, &[5]).is_err());
        assert!(!store.get(e.table).free_indices().any(|i| i < 4));
    }

    fn single_filter_k3(store: &mut ParamStore) -> ConvBank {
        let weight = store.add(Parameter::new("w", Tensor::new(3, 1, vec![1.0, 1.0, 1.0]).unwrap()));
        let bias = store.add(Parameter::new("b", Tensor::zeros(1, 1)));
        ConvBank {
            windows: vec![ConvWindow { size: 3, weight, bias }],
            input_dim: 1,
            per_window: 1,
        }
    }

    #[test]
    fn hand_computed_convolution() {
        let mut store = ParamStore::new();
        let bank = single_filter_k3(&mut store);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let c = bank.forward(&mut tape, &store, x, 1).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn single_position_sees_only_center() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let bank = ConvBank::new(&mut store, 2, &[2, 3, 4, 5], 2, &mut r);
        let mut tape = Tape::new();
        let x_val = Tensor::row_vector(vec![0.7, -0.4]);
        let x = tape.constant(x_val.clone()).unwrap();
        let c = bank.forward(&mut tape, &store, x, 1).unwrap();
        for (wi, w) in bank.windows.iter().enumerate() {
            let center = (-w.first_offset()) as usize;
            let weight = store.value(w.weight);
            for f in 0..2 {
                let dot: f64 = (0..2).map(|d| x_val.get(0, d) * weight.get(center * 2 + d, f)).sum();
                let expected = (dot + store.value(w.bias).get(0, f)).max(0.0);
                assert!((tape.value(c).get(0, wi * 2 + f) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conv_locality() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let bank = ConvBank::new(&mut store, 2, &[2, 3, 4, 5], 3, &mut r);
        let n = 9;
        let base: Vec<f64> = (0..n * 2).map(|_| r.gen_range(-1.0..1.0)).collect();
        let run = |data: Vec<f64>| {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(n, 2, data).unwrap()).unwrap();
            let c = bank.forward(&mut tape, &store, x, 1).unwrap();
            tape.value(c).clone()
        };
        let reference = run(base.clone());
        for j in 0..n {
            let mut data = base.clone();
            data[j * 2] += 0.5;
            let out = run(data);
            for i in 0..n {
                if i.abs_diff(j) > 2 {
                    assert_eq!(out.row(i), reference.row(i), "i={i} j={j}");
                }
            }
        }
    }

    fn run_bilstm(lstm: &BiLstm, store: &ParamStore, input: &Tensor) -> Tensor {
        let mut tape = Tape::new();
        let layout = BatchLayout::new(vec![input.rows()]).unwrap();
        let x = tape.constant(input.clone()).unwrap();
        let h = lstm.forward(&mut tape, store, x, &layout).unwrap();
        tape.value(h).clone()
    }

    #[test]
    fn zero_parameters_give_zero_states() {
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, 3, 2, &mut rng());
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let out = run_bilstm(&lstm, &store, &Tensor::zeros(4, 3));
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_directions_differ() {
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, 3, 2, &mut rng());
        let out = run_bilstm(&lstm, &store, &Tensor::row_vector(vec![0.3, -0.2, 0.9]));
        assert_ne!(&out.row(0)[..2], &out.row(0)[2..]);
    }

    #[test]
    fn reversal_swaps_directions() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let lstm = BiLstm::new(&mut store, 3, 2, &mut r);
        let data: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let input = Tensor::from_rows(&data).unwrap();
        let reversed: Vec<Vec<f64>> = data.iter().rev().cloned().collect();
        let reversed = Tensor::from_rows(&reversed).unwrap();

        let out = run_bilstm(&lstm, &store, &input);
        let swapped = BiLstm {
            forward: lstm.backward.clone(),
            backward: lstm.forward.clone(),
        };
        let out_rev = run_bilstm(&swapped, &store, &reversed);
        for t in 0..4 {
            let a = out.row(t);
            let b = out_rev.row(3 - t);
            for k in 0..2 {
                assert!((a[k] - b[2 + k]).abs() < 1e-14);
                assert!((a[2 + k] - b[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lstm_causality() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let lstm = BiLstm::new(&mut store, 2, 3, &mut r);
        let base: Vec<f64> = (0..12).map(|_| r.gen_range(-1.0..1.0)).collect();
        let reference = run_bilstm(&lstm, &store, &Tensor::new(6, 2, base.clone()).unwrap());
        let mut perturbed = base;
        perturbed[4 * 2] += 0.3;
        let out = run_bilstm(&lstm, &store, &Tensor::new(6, 2, perturbed).unwrap());
        for t in 0..4 {
            assert_eq!(&out.row(t)[..3], &reference.row(t)[..3], "forward half at {t}");
        }
        for t in 5..6 {
            assert_eq!(&out.row(t)[3..], &reference.row(t)[3..], "backward half at {t}");
        }
    }

    #[test]
    fn padding_is_inert_for_the_encoder() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let enc = Encoder::new(&mut store, small_config(), 8, None, &mut r).unwrap();
        let sents = vec![vec![2, 3, 4, 5, 6], vec![7, 2]];
        let layout = BatchLayout::new(vec![5, 2]).unwrap();
        let ids = layout.pad_indices(&sents);
        let mut tape = Tape::new();
        let out = enc.forward(&mut tape, &store, &ids, &layout, false, &mut r).unwrap();
        for (b, s) in sents.iter().enumerate() {
            let (c, h) = enc.forward_sentence(&store, s, false, 0).unwrap();
            for t in 0..s.len() {
                let row = layout.row(t, b);
                for (x, y) in tape.value(out.conv).row(row).iter().zip(c.row(t)) {
                    assert!((x - y).abs() < 1e-12);
                }
                for (x, y) in tape.value(out.hidden).row(row).iter().zip(h.row(t)) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dropout_determinism() {
        let mut store = ParamStore::new();
        let enc = Encoder::new(&mut store, small_config(), 8, None, &mut rng()).unwrap();
        let ids = [2, 3, 4];
        let eval_a = enc.forward_sentence(&store, &ids, false, 1).unwrap();
        let eval_b = enc.forward_sentence(&store, &ids, false, 99).unwrap();
        assert_eq!(eval_a, eval_b);
        let train_a = enc.forward_sentence(&store, &ids, true, 5).unwrap();
        let train_b = enc.forward_sentence(&store, &ids, true, 5).unwrap();
        assert_eq!(train_a, train_b);
        let train_c = enc.forward_sentence(&store, &ids, true, 6).unwrap();
        assert_ne!(train_a, train_c);
    }

    #[test]
    fn encoder_gradients() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let enc = Encoder::new(&mut store, small_config(), 6, None, &mut r).unwrap();
        // a fixed random readout keeps the loss from being symmetric
        let sents = vec![vec![2, 3, 4, 5], vec![5, 1, 2]];
        let layout = BatchLayout::new(vec![4, 3]).unwrap();
        let ids = layout.pad_indices(&sents);
        let rows = layout.steps() * layout.batch();
        let w_c = Tensor::new(rows, 8, (0..rows * 8).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        let w_h = Tensor::new(rows, 6, (0..rows * 6).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        let report = grad_check(
            &mut store,
            |s, tape| {
                let mut dummy = ChaCha8Rng::seed_from_u64(0);
                let out = enc.forward(tape, s, &ids, &layout, false, &mut dummy).map_err(|e| match e {
                    Error::Num(n) => n,
                    other => panic!("{other}"),
                })?;
                let wc = tape.constant(w_c.clone())?;
                let wh = tape.constant(w_h.clone())?;
                let a = tape.mul(out.conv, wc)?;
                let b = tape.mul(out.hidden, wh)?;
                let a = tape.sum(a)?;
                let b = tape.sum(b)?;
                tape.add(a, b)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report:#?}");
    }
}
