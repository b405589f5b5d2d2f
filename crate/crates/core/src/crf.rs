//! First-order linear-chain CRF.
//!
//! The score of labels `y` for inputs `x` is
//! `start[y₀] + Σᵢ emission(i, yᵢ) + Σᵢ₌₁ trans[yᵢ₋₁][yᵢ]` with
//! `emission(i, ·) = xᵢ · W`. There is no end-of-sequence score.
//!
//! Two routes compute the same quantities: plain `f64` dynamic programs over
//! an emission matrix (used for decoding and as test references) and a
//! batched, differentiable negative log-likelihood recorded on a [`Tape`].
//! [`brute_force`] enumerates every sequence and is only meant for tests.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::BatchLayout;
use crate::numcore::{ParamId, ParamStore, Parameter, Tape, Tensor, Var};

#[derive(Debug, Clone)]
pub struct CrfHead {
    /// `In × L` emission projection.
    pub weight: ParamId,
    /// `L × L`, `trans[a][b]` scores the step `a → b`.
    pub trans: ParamId,
    /// `1 × L` score of the first label.
    pub start: ParamId,
    pub input_dim: usize,
    pub labels: usize,
}

/// Borrowed parameter values of a [`CrfHead`].
#[derive(Debug, Clone, Copy)]
pub struct Potentials<'a> {
    pub weight: &'a Tensor,
    pub trans: &'a Tensor,
    pub start: &'a [f64],
}

/// Hard constraints applied during decoding only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeConstraint {
    pub allowed: Vec<Vec<bool>>,
    pub allowed_start: Vec<bool>,
}

impl CrfHead {
    /// Registers `{prefix}.W`, `{prefix}.T` and `{prefix}.start`.
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, labels: usize, rng: &mut R) -> Result<Self> {
        if labels < 2 {
            return Err(Error::Config(format!("a CRF needs at least 2 labels, got {labels}")));
        }
        let bound = (6.0 / (input_dim + labels) as f64).sqrt();
        let w: Vec<f64> = (0..input_dim * labels).map(|_| rng.gen_range(-bound..=bound)).collect();
        let weight = store.add(Parameter::new(format!("{prefix}.W"), Tensor::new(input_dim, labels, w)?));
        let trans = store.add(Parameter::new(format!("{prefix}.T"), Tensor::zeros(labels, labels)));
        let start = store.add(Parameter::new(format!("{prefix}.start"), Tensor::zeros(1, labels)));
        Ok(Self {
            weight,
            trans,
            start,
            input_dim,
            labels,
        })
    }

    pub fn potentials<'a>(&self, store: &'a ParamStore) -> Potentials<'a> {
        Potentials {
            weight: store.value(self.weight),
            trans: store.value(self.trans),
            start: store.value(self.start).data(),
        }
    }

    /// Summed negative log-likelihood over the sentences of a padded batch.
    ///
    /// `inputs` is time-major `(N·B) × In`. Sentences whose entry in `gold`
    /// is `None` are skipped; returns `None` when every entry is `None`.
    /// Padded steps leave the forward variables untouched, so a batch gives
    /// the same loss as its sentences one by one.
    pub fn batch_nll(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        inputs: Var,
        layout: &BatchLayout,
        gold: &[Option<&[usize]>],
    ) -> Result<Option<Var>> {
        let (b, l) = (layout.batch(), self.labels);
        debug_assert_eq!(gold.len(), b);
        let included: Vec<usize> = (0..b).filter(|&i| gold[i].is_some()).collect();
        if included.is_empty() {
            return Ok(None);
        }
        for (i, g) in gold.iter().enumerate() {
            if let Some(g) = g {
                if g.len() != layout.lengths()[i] {
                    return Err(Error::Config(format!(
                        "gold sequence of length {} for sentence of length {}",
                        g.len(),
                        layout.lengths()[i]
                    )));
                }
                if let Some(&bad) = g.iter().find(|&&y| y >= l) {
                    return Err(Error::LabelOutOfRange { index: bad, labels: l });
                }
            }
        }

        let w = tape.param(store, self.weight)?;
        let trans = tape.param(store, self.trans)?;
        let start = tape.param(store, self.start)?;
        let emis = tape.matmul(inputs, w)?;

        let first = tape.slice_rows(emis, 0, b)?;
        let mut alpha = tape.add_row(first, start)?;
        for t in 1..layout.steps() {
            let step = tape.lse_transition(alpha, trans)?;
            let e_t = tape.slice_rows(emis, t * b, b)?;
            let next = tape.add(step, e_t)?;
            alpha = if layout.all_active(t) {
                next
            } else {
                tape.blend_rows(&layout.mask(t), next, alpha)?
            };
        }
        let log_z = tape.log_sum_exp(alpha, 1)?;
        let picked: Vec<(usize, usize)> = included.iter().map(|&i| (i, 0)).collect();
        let log_z = tape.pick(log_z, &picked)?;
        let log_z = tape.sum(log_z)?;

        let mut emit_at = Vec::new();
        let mut trans_at = Vec::new();
        let mut start_at = Vec::new();
        for &i in &included {
            let g = gold[i].expect("included");
            start_at.push((0, g[0]));
            for (t, &y) in g.iter().enumerate() {
                emit_at.push((layout.row(t, i), y));
                if t > 0 {
                    trans_at.push((g[t - 1], y));
                }
            }
        }
        let e = tape.pick(emis, &emit_at)?;
        let mut gold_score = tape.sum(e)?;
        let s = tape.pick(start, &start_at)?;
        let s = tape.sum(s)?;
        gold_score = tape.add(gold_score, s)?;
        if !trans_at.is_empty() {
            let tr = tape.pick(trans, &trans_at)?;
            let tr = tape.sum(tr)?;
            gold_score = tape.add(gold_score, tr)?;
        }
        Ok(Some(tape.sub(log_z, gold_score)?))
    }
}

impl Potentials<'_> {
    pub fn labels(&self) -> usize {
        self.trans.rows()
    }

    /// `N × L` emission scores `inputs · W`.
    pub fn emissions(&self, inputs: &Tensor) -> Result<Tensor> {
        Ok(inputs.matmul(self.weight)?)
    }

    pub fn score_sequence(&self, inputs: &Tensor, labels: &[usize]) -> Result<f64> {
        sequence_score(&self.emissions(inputs)?, self.trans, self.start, labels)
    }

    pub fn log_partition(&self, inputs: &Tensor) -> Result<f64> {
        Ok(log_partition(&self.emissions(inputs)?, self.trans, self.start))
    }

    pub fn nll(&self, inputs: &Tensor, labels: &[usize]) -> Result<f64> {
        let e = self.emissions(inputs)?;
        Ok(log_partition(&e, self.trans, self.start) - sequence_score(&e, self.trans, self.start, labels)?)
    }

    pub fn viterbi(&self, inputs: &Tensor, constraint: Option<&DecodeConstraint>) -> Result<(Vec<usize>, f64)> {
        Ok(viterbi(&self.emissions(inputs)?, self.trans, self.start, constraint))
    }
}

pub fn sequence_score(emissions: &Tensor, trans: &Tensor, start: &[f64], labels: &[usize]) -> Result<f64> {
    let l = trans.rows();
    if labels.len() != emissions.rows() || labels.is_empty() {
        return Err(Error::Config(format!(
            "{} labels for {} positions",
            labels.len(),
            emissions.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= l) {
        return Err(Error::LabelOutOfRange { index: bad, labels: l });
    }
    let mut score = start[labels[0]];
    for (i, &y) in labels.iter().enumerate() {
        score += emissions.get(i, y);
        if i > 0 {
            score += trans.get(labels[i - 1], y);
        }
    }
    Ok(score)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-space forward recursion; exact log of the sum over all `L^N` paths.
pub fn log_partition(emissions: &Tensor, trans: &Tensor, start: &[f64]) -> f64 {
    let l = trans.rows();
    let mut alpha: Vec<f64> = (0..l).map(|j| emissions.get(0, j) + start[j]).collect();
    let mut scratch = vec![0.0; l];
    let mut next = vec![0.0; l];
    for i in 1..emissions.rows() {
        for j in 0..l {
            for (k, s) in scratch.iter_mut().enumerate() {
                *s = alpha[k] + trans.get(k, j);
            }
            next[j] = log_sum_exp(&scratch) + emissions.get(i, j);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    log_sum_exp(&alpha)
}

/// Highest-scoring label sequence and its score. Ties prefer the lower label
/// index, both for the final label and for every back-pointer.
pub fn viterbi(emissions: &Tensor, trans: &Tensor, start: &[f64], constraint: Option<&DecodeConstraint>) -> (Vec<usize>, f64) {
    let (n, l) = (emissions.rows(), trans.rows());
    let allowed = |a: usize, b: usize| constraint.is_none_or(|c| c.allowed[a][b]);
    let mut delta: Vec<f64> = (0..l)
        .map(|j| {
            if constraint.is_none_or(|c| c.allowed_start[j]) {
                emissions.get(0, j) + start[j]
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut back = vec![vec![0usize; l]; n];
    let mut next = vec![0.0; l];
    for i in 1..n {
        for j in 0..l {
            let mut best = (f64::NEG_INFINITY, 0);
            for k in 0..l {
                if !allowed(k, j) {
                    continue;
                }
                let s = delta[k] + trans.get(k, j);
                if s > best.0 {
                    best = (s, k);
                }
            }
            next[j] = best.0 + emissions.get(i, j);
            back[i][j] = best.1;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    for j in 1..l {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let score = delta[last];
    let mut path = vec![last; n];
    for i in (1..n).rev() {
        path[i - 1] = back[i][path[i]];
    }
    (path, score)
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    pub log_partition: f64,
    pub best: Vec<usize>,
    pub best_score: f64,
}

/// Largest `L^N` accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 1_000_000;

/// Enumerates every label sequence. Scores are accumulated from scratch for
/// each sequence so this shares no recursion with the dynamic programs.
pub fn brute_force(emissions: &Tensor, trans: &Tensor, start: &[f64]) -> Result<BruteForce> {
    let (n, l) = (emissions.rows(), trans.rows());
    let total = (l as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > BRUTE_FORCE_LIMIT as u128 {
        return Err(Error::Config(format!("{l}^{n} sequences exceed the enumeration limit")));
    }
    let mut labels = vec![0usize; n];
    let mut scores = Vec::with_capacity(total as usize);
    let mut best = (f64::NEG_INFINITY, labels.clone());
    loop {
        let s = sequence_score(emissions, trans, start, &labels)?;
        scores.push(s);
        if s > best.0 {
            best = (s, labels.clone());
        }
        // odometer increment, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                let log_partition = log_sum_exp(&scores);
                return Ok(BruteForce {
                    log_partition,
                    best: best.1,
                    best_score: best.0,
                });
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < l {
                break;
            }
            labels[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{grad_check, GradCheckOptions, NumError};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor::new(rows, cols, data).unwrap()
    }

    fn instance(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (Tensor, Tensor, Vec<f64>) {
        let start = normal(rng, 1, l).into_data();
        (normal(rng, n, l), normal(rng, l, l), start)
    }

    #[test]
    fn single_position() {
        let e = Tensor::row_vector(vec![0.5, -1.0, 2.0]);
        let t = Tensor::zeros(3, 3);
        let start = [0.1, 0.2, -0.3];
        assert_eq!(sequence_score(&e, &t, &start, &[1]).unwrap(), -1.0 + 0.2);
        let expected = log_sum_exp(&[0.6, -0.8, 1.7]);
        assert!((log_partition(&e, &t, &start) - expected).abs() < 1e-15);
    }

    #[test]
    fn decoupled_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = normal(&mut rng, 4, 3);
        let t = Tensor::zeros(3, 3);
        let start = [0.4, -0.2, 0.9];
        let labels = [2, 0, 1, 1];
        let direct: f64 = labels.iter().enumerate().map(|(i, &y)| e.get(i, y)).sum::<f64>() + start[2];
        assert!((sequence_score(&e, &t, &start, &labels).unwrap() - direct).abs() < 1e-14);

        let mut factorized = 0.0;
        for i in 0..4 {
            let mut row = e.row(i).to_vec();
            if i == 0 {
                row.iter_mut().zip(&start).for_each(|(x, s)| *x += s);
            }
            factorized += log_sum_exp(&row);
        }
        assert!((log_partition(&e, &t, &start) - factorized).abs() < 1e-12);

        let (path, _) = viterbi(&e, &t, &[0.0; 3], None);
        for (i, &y) in path.iter().enumerate() {
            let row = e.row(i);
            assert!(row.iter().all(|&x| x <= row[y]));
        }
    }

    #[test]
    fn hand_expanded_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (e, t, start) = instance(&mut rng, 3, 3);
        let y = [2, 0, 1];
        let expected = start[2] + e.get(0, 2) + e.get(1, 0) + t.get(2, 0) + e.get(2, 1) + t.get(0, 1);
        assert!((sequence_score(&e, &t, &start, &y).unwrap() - expected).abs() < 1e-14);
        assert!(matches!(
            sequence_score(&e, &t, &start, &[0, 3, 1]),
            Err(Error::LabelOutOfRange { index: 3, labels: 3 })
        ));
    }

    #[test]
    fn dp_matches_enumeration_on_81_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let (e, t, start) = instance(&mut rng, 4, 3);
        let bf = brute_force(&e, &t, &start).unwrap();
        assert!((log_partition(&e, &t, &start) - bf.log_partition).abs() < 1e-10);
    }

    #[test]
    fn zero_parameters_give_uniform_nll() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = CrfHead::new(&mut store, "crf.x", 4, 5, &mut rng).unwrap();
        store.get_mut(head.weight).value.fill(0.0);
        let inputs = normal(&mut rng, 6, 4);
        let nll = head.potentials(&store).nll(&inputs, &[0, 1, 2, 3, 4, 0]).unwrap();
        assert!((nll - 6.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_gold_has_zero_nll() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut e, t, start) = instance(&mut rng, 4, 3);
        let gold = [1, 2, 0, 1];
        for (i, &y) in gold.iter().enumerate() {
            e.set(i, y, e.get(i, y) + 1e3);
        }
        let bf = brute_force(&e, &t, &start).unwrap();
        let nll = log_partition(&e, &t, &start) - sequence_score(&e, &t, &start, &gold).unwrap();
        assert!(nll.abs() < 1e-6, "{nll}");
        assert!((bf.log_partition - sequence_score(&e, &t, &start, &gold).unwrap()).abs() < 1e-6);
        assert_eq!(bf.best, gold);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (e, t, start) = instance(&mut rng, 3, 3);
        let z = log_partition(&e, &t, &start);
        let mut total = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    total += (sequence_score(&e, &t, &start, &[a, b, c]).unwrap() - z).exp();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn viterbi_matches_brute_force_on_1024_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1024);
        let (e, t, start) = instance(&mut rng, 5, 4);
        let (path, score) = viterbi(&e, &t, &start, None);
        let bf = brute_force(&e, &t, &start).unwrap();
        assert_eq!(path, bf.best);
        assert!((score - sequence_score(&e, &t, &start, &path).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn viterbi_ties_prefer_lower_index() {
        let e = Tensor::zeros(3, 3);
        let t = Tensor::zeros(3, 3);
        let (path, score) = viterbi(&e, &t, &[0.0; 3], None);
        assert_eq!(path, [0, 0, 0]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn constrained_viterbi_respects_mask() {
        // labels: 0 = O, 1 = B, 2 = I; emissions prefer an orphan I
        let e = Tensor::from_rows(&[vec![0.0, -1.0, 3.0], vec![0.0, -1.0, 3.0]]).unwrap();
        let t = Tensor::zeros(3, 3);
        let (free, _) = viterbi(&e, &t, &[0.0; 3], None);
        assert_eq!(free, [2, 2]);
        let c = DecodeConstraint {
            allowed: vec![vec![true, true, false], vec![true, true, true], vec![true, true, true]],
            allowed_start: vec![true, true, false],
        };
        let (constrained, score) = viterbi(&e, &t, &[0.0; 3], Some(&c));
        assert_eq!(constrained, [1, 2]);
        assert_eq!(score, 2.0);
    }

    #[test]
    fn brute_force_limit() {
        let e = Tensor::zeros(11, 4);
        let t = Tensor::zeros(4, 4);
        assert!(brute_force(&e, &t, &[0.0; 4]).is_err());
    }

    #[test]
    fn emission_shift_adds_n_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (e, t, start) = instance(&mut rng, 5, 3);
        let shifted = Tensor::new(5, 3, e.data().iter().map(|x| x + 0.75).collect()).unwrap();
        let diff = log_partition(&shifted, &t, &start) - log_partition(&e, &t, &start);
        assert!((diff - 5.0 * 0.75).abs() < 1e-12);
    }

    fn batch_nll_value(head: &CrfHead, store: &ParamStore, inputs: &[Tensor], gold: &[Vec<usize>]) -> f64 {
        let layout = BatchLayout::new(inputs.iter().map(Tensor::rows).collect()).unwrap();
        let d = inputs[0].cols();
        let mut x = Tensor::zeros(layout.steps() * layout.batch(), d);
        for (b, inp) in inputs.iter().enumerate() {
            for t in 0..inp.rows() {
                x.row_mut(layout.row(t, b)).copy_from_slice(inp.row(t));
            }
        }
        let mut tape = Tape::new();
        let xv = tape.constant(x).unwrap();
        let g: Vec<Option<&[usize]>> = gold.iter().map(|g| Some(g.as_slice())).collect();
        let loss = head.batch_nll(&mut tape, store, xv, &layout, &g).unwrap().unwrap();
        tape.scalar(loss).unwrap()
    }

    #[test]
    fn batched_tape_nll_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut store = ParamStore::new();
        let head = CrfHead::new(&mut store, "crf.x", 3, 4, &mut rng).unwrap();
        store.get_mut(head.trans).value = normal(&mut rng, 4, 4);
        store.get_mut(head.start).value = normal(&mut rng, 1, 4);
        let lens = [5, 2, 4];
        let inputs: Vec<Tensor> = lens.iter().map(|&n| normal(&mut rng, n, 3)).collect();
        let gold: Vec<Vec<usize>> = lens.iter().map(|&n| (0..n).map(|_| rng.gen_range(0..4)).collect()).collect();
        let pot = head.potentials(&store);
        let mut expected = 0.0;
        for (x, y) in inputs.iter().zip(&gold) {
            let e = pot.emissions(x).unwrap();
            let bf = brute_force(&e, pot.trans, pot.start).unwrap();
            expected += bf.log_partition - sequence_score(&e, pot.trans, pot.start, y).unwrap();
        }
        let got = batch_nll_value(&head, &store, &inputs, &gold);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        let singles: f64 = inputs
            .iter()
            .zip(&gold)
            .map(|(x, y)| batch_nll_value(&head, &store, std::slice::from_ref(x), std::slice::from_ref(y)))
            .sum();
        assert!((got - singles).abs() < 1e-10);
    }

    #[test]
    fn skipped_sentences_do_not_contribute() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let head = CrfHead::new(&mut store, "crf.x", 2, 2, &mut rng).unwrap();
        let layout = BatchLayout::new(vec![3, 2]).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(normal(&mut rng, 6, 2)).unwrap();
        let none = head.batch_nll(&mut tape, &store, x, &layout, &[None, None]).unwrap();
        assert!(none.is_none());
        let bad = head.batch_nll(&mut tape, &store, x, &layout, &[Some(&[0, 1, 2]), None]);
        assert!(matches!(bad, Err(Error::LabelOutOfRange { index: 2, .. })));
    }

    #[test]
    fn nll_gradients_pass_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut store = ParamStore::new();
        let head = CrfHead::new(&mut store, "crf.x", 3, 3, &mut rng).unwrap();
        store.get_mut(head.trans).value = normal(&mut rng, 3, 3);
        store.get_mut(head.start).value = normal(&mut rng, 1, 3);
        let layout = BatchLayout::new(vec![4, 2]).unwrap();
        let inputs = store.add(Parameter::new("inputs", normal(&mut rng, 8, 3)));
        let gold: [Option<&[usize]>; 2] = [Some(&[0, 2, 2, 1]), Some(&[1, 0])];
        let report = grad_check(
            &mut store,
            |s, tape| {
                let x = tape.param(s, inputs)?;
                let loss = head.batch_nll(tape, s, x, &layout, &gold).map_err(|e| match e {
                    Error::Num(n) => n,
                    other => NumError::Format(other.to_string()),
                })?;
                Ok(loss.expect("non-empty"))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report:#?}");
        assert_eq!(report.params.len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_instance() -> impl Strategy<Value = (Tensor, Tensor, Vec<f64>)> {
            (1usize..=5, 2usize..=4, any::<u64>()).prop_map(|(n, l, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                instance(&mut rng, n, l)
            })
        }

        proptest! {
            #[test]
            fn log_partition_dominates_every_path((e, t, start) in arb_instance()) {
                let z = log_partition(&e, &t, &start);
                let bf = brute_force(&e, &t, &start).unwrap();
                prop_assert!(z >= bf.best_score);
                let (_, vscore) = viterbi(&e, &t, &start, None);
                prop_assert!(z >= vscore);
            }

            #[test]
            fn viterbi_invariant_to_position_shift((e, t, start) in arb_instance(), pos in 0usize..5, delta in -5.0f64..5.0) {
                let pos = pos % e.rows();
                let mut shifted = e.clone();
                for v in shifted.row_mut(pos) {
                    *v += delta;
                }
                prop_assert_eq!(viterbi(&e, &t, &start, None).0, viterbi(&shifted, &t, &start, None).0);
            }
        }
    }
}
