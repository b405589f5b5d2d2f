//! Column-format corpora, vocabularies, embedding files and data splits.
//!
//! Corpus files carry one character per line, `char<TAB>ner[<TAB>cws]`, with a
//! blank line between sentences. A line starting with `#` that contains no
//! TAB is a comment; `# pseudo` marks the following sentence as generated.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CorpusError, Result, TagError};
use crate::numcore::Tensor;
use crate::tagset::{decode_labels, first_bio_violation, repair_bio, CwsLabel, EntityMention, NerLabel};

pub const PSEUDO_MARKER: &str = "# pseudo";

/// Non-empty character sequence without line separators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence(Vec<char>);

impl Sentence {
    pub fn new(chars: Vec<char>) -> Result<Self, CorpusError> {
        if chars.is_empty() || chars.iter().any(|&c| c == '\n' || c == '\r') {
            return Err(CorpusError::BadSentence);
        }
        Ok(Self(chars))
    }

    pub fn chars(&self) -> &[char] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn surface(&self, start: usize, end: usize) -> String {
        self.0[start..end].iter().collect()
    }
}

impl std::str::FromStr for Sentence {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s.chars().collect())
    }
}

impl std::fmt::Display for Sentence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.iter().try_for_each(|c| f.write_char(*c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub sentence: Sentence,
    pub ner: Vec<NerLabel>,
    pub cws: Option<Vec<CwsLabel>>,
}

impl LabeledSentence {
    /// Builds a sentence whose labels are valid BIO / BI sequences.
    pub fn new(sentence: Sentence, ner: Vec<NerLabel>, cws: Option<Vec<CwsLabel>>) -> Result<Self> {
        let n = sentence.len();
        if ner.len() != n {
            return Err(CorpusError::LengthMismatch {
                chars: n,
                labels: ner.len(),
            }
            .into());
        }
        if let Some(at) = first_bio_violation(&ner) {
            return Err(TagError::BadLabel(format!("{} at position {at}", ner[at])).into());
        }
        if let Some(cws) = &cws {
            if cws.len() != n {
                return Err(CorpusError::LengthMismatch {
                    chars: n,
                    labels: cws.len(),
                }
                .into());
            }
            if cws[0] != CwsLabel::B {
                return Err(TagError::BadLabel("segmentation must start with B".into()).into());
            }
        }
        Ok(Self { sentence, ner, cws })
    }

    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        self.sentence.chars()
    }

    pub fn mentions(&self) -> Vec<EntityMention> {
        decode_labels(&self.ner).mentions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Real,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub labeled: LabeledSentence,
    pub provenance: Provenance,
}

impl Sample {
    pub fn real(labeled: LabeledSentence) -> Self {
        Self {
            labeled,
            provenance: Provenance::Real,
        }
    }

    pub fn pseudo(labeled: LabeledSentence) -> Self {
        Self {
            labeled,
            provenance: Provenance::Pseudo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub entity_types: BTreeSet<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        let entity_types = samples
            .iter()
            .flat_map(|s| s.labeled.ner.iter().filter_map(|l| l.entity_type()))
            .map(str::to_string)
            .collect();
        Self { samples, entity_types }
    }

    pub fn from_labeled(sentences: Vec<LabeledSentence>) -> Self {
        Self::new(sentences.into_iter().map(Sample::real).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &LabeledSentence> {
        self.samples.iter().map(|s| &s.labeled)
    }

    pub fn real_count(&self) -> usize {
        self.samples.iter().filter(|s| s.provenance == Provenance::Real).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Validation {
    /// Invalid label sequences abort loading.
    #[default]
    Strict,
    /// Invalid label sequences are repaired.
    Lenient,
}

/// Loads a column-format corpus.
pub fn load_column_file(path: impl AsRef<Path>, has_cws: bool, mode: Validation) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_columns(BufReader::new(file), &path.display().to_string(), has_cws, mode)
}

struct Block {
    first_line: usize,
    pseudo: bool,
    chars: Vec<char>,
    ner: Vec<NerLabel>,
    cws: Vec<CwsLabel>,
}

/// Parses column-format text; `name` is used in error messages.
pub fn read_columns<R: BufRead>(reader: R, name: &str, has_cws: bool, mode: Validation) -> Result<Dataset> {
    let malformed = |line: usize, msg: String| CorpusError::Malformed {
        path: name.to_string(),
        line,
        msg,
    };
    let mut samples = Vec::new();
    let mut block: Option<Block> = None;
    let mut pending_pseudo = false;

    let mut finish = |block: Block| -> Result<()> {
        let mut ner = block.ner;
        if let Some(pos) = first_bio_violation(&ner) {
            match mode {
                Validation::Strict => {
                    return Err(CorpusError::InvalidBio {
                        path: name.to_string(),
                        line: block.first_line + pos,
                        position: pos,
                    }
                    .into())
                }
                Validation::Lenient => ner = repair_bio(&ner),
            }
        }
        let mut cws = (!block.cws.is_empty()).then_some(block.cws);
        if let Some(labels) = cws.as_mut() {
            if labels[0] != CwsLabel::B {
                match mode {
                    Validation::Strict => {
                        return Err(CorpusError::InvalidSegmentation {
                            path: name.to_string(),
                            line: block.first_line,
                        }
                        .into())
                    }
                    Validation::Lenient => labels[0] = CwsLabel::B,
                }
            }
        }
        let sentence = Sentence::new(block.chars)?;
        let labeled = LabeledSentence::new(sentence, ner, cws)?;
        samples.push(if block.pseudo {
            Sample::pseudo(labeled)
        } else {
            Sample::real(labeled)
        });
        Ok(())
    };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: name.into(),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                finish(b)?;
            }
            continue;
        }
        if line.starts_with('#') && !line.contains('\t') {
            if line.trim_end() == PSEUDO_MARKER {
                pending_pseudo = true;
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let mut chars = fields[0].chars();
        let (Some(ch), None) = (chars.next(), chars.next()) else {
            return Err(malformed(lineno, format!("expected one character, got `{}`", fields[0])).into());
        };
        let expected = if has_cws { 3 } else { 2 };
        if fields.len() < expected || fields.len() > 3 {
            return Err(malformed(lineno, format!("expected {expected} columns, got {}", fields.len())).into());
        }
        let ner: NerLabel = fields[1]
            .trim()
            .parse()
            .map_err(|e: TagError| malformed(lineno, e.to_string()))?;
        let b = block.get_or_insert_with(|| Block {
            first_line: lineno,
            pseudo: std::mem::take(&mut pending_pseudo),
            chars: Vec::new(),
            ner: Vec::new(),
            cws: Vec::new(),
        });
        if let Some(field) = fields.get(2) {
            let cws: CwsLabel = field.trim().parse().map_err(|e: TagError| malformed(lineno, e.to_string()))?;
            if b.cws.len() != b.chars.len() {
                return Err(malformed(lineno, "segmentation column missing on earlier lines".into()).into());
            }
            b.cws.push(cws);
        } else if !b.cws.is_empty() {
            return Err(malformed(lineno, "segmentation column missing".into()).into());
        }
        b.chars.push(ch);
        b.ner.push(ner);
    }
    if let Some(b) = block.take() {
        finish(b)?;
    }
    Ok(Dataset::new(samples))
}

/// Renders samples in column format.
pub fn format_columns(samples: &[Sample]) -> String {
    let mut out = String::new();
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if s.provenance == Provenance::Pseudo {
            out.push_str(PSEUDO_MARKER);
            out.push('\n');
        }
        let l = &s.labeled;
        for (j, c) in l.chars().iter().enumerate() {
            write!(out, "{c}\t{}", l.ner[j]).unwrap();
            if let Some(cws) = &l.cws {
                write!(out, "\t{}", cws[j]).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_column_file(path: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(format_columns(samples).as_bytes())?;
    Ok(())
}

/// Reads plain text, one sentence per non-blank line.
pub fn read_raw_sentences<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if !line.trim().is_empty() {
            out.push(line.parse()?);
        }
    }
    Ok(out)
}

/// Dense character index. Index 0 is PAD, index 1 is UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;

    /// Builds a vocabulary from characters in index order (PAD and UNK are
    /// prepended). Duplicates are ignored.
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = Self {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for c in chars {
            if !v.index.contains_key(&c) {
                v.index.insert(c, v.chars.len() + 2);
                v.chars.push(c);
            }
        }
        v
    }

    /// Number of indices, including PAD and UNK.
    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lookup(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|&c| self.lookup(c)).collect()
    }

    /// The character at `index`, or `None` for PAD, UNK and out-of-range.
    pub fn char_at(&self, index: usize) -> Option<char> {
        index.checked_sub(2).and_then(|i| self.chars.get(i)).copied()
    }

    /// Real characters in index order (excludes PAD and UNK).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Characters with frequency ≥ `min_count`, indexed in code-point order.
pub fn build_vocab(dataset: &Dataset, min_count: usize) -> Vocabulary {
    let mut counts: HashMap<char, usize> = HashMap::new();
    for s in dataset.sentences() {
        for &c in s.chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut kept: Vec<char> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_count.max(1))
        .map(|(c, _)| c)
        .collect();
    kept.sort_unstable();
    Vocabulary::from_chars(kept)
}

/// Uniform initialization bound for embedding rows not covered by a file.
pub fn embedding_init_bound(dim: usize) -> f64 {
    0.25 / (dim as f64).sqrt()
}

/// Randomly initialized `V × D` embedding table with a zero PAD row.
pub fn init_embeddings<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Tensor {
    let bound = embedding_init_bound(dim);
    let mut t = Tensor::zeros(vocab_size, dim);
    for r in 0..vocab_size {
        if r == Vocabulary::PAD {
            continue;
        }
        for v in t.row_mut(r) {
            *v = rng.gen_range(-bound..=bound);
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    /// `V × D`, row `i` is the vector of vocabulary index `i`.
    pub table: Tensor,
    pub found: usize,
    /// Fraction of real vocabulary characters found in the file.
    pub coverage: f64,
}

/// Loads a word2vec-style text file into a `V × D` table. Characters missing
/// from the file keep a random initialization; PAD stays zero.
pub fn load_embeddings(path: impl AsRef<Path>, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<LoadedEmbeddings> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_embeddings(BufReader::new(file), &path.display().to_string(), vocab, dim, seed)
}

pub fn read_embeddings<R: BufRead>(reader: R, name: &str, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<LoadedEmbeddings> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = init_embeddings(vocab.len(), dim, &mut rng);
    let mut seen = vec![false; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if i == 0 && tokens.len() == 2 && tokens[0].parse::<usize>().is_ok() {
            if let Ok(found) = tokens[1].parse::<usize>() {
                let single_char = tokens[0].chars().count() == 1;
                if !(dim == 1 && single_char) {
                    if found != dim {
                        return Err(CorpusError::EmbeddingDim { expected: dim, found }.into());
                    }
                    continue;
                }
            }
        }
        if tokens.len() != dim + 1 {
            return Err(CorpusError::EmbeddingDim {
                expected: dim,
                found: tokens.len() - 1,
            }
            .into());
        }
        let mut chars = tokens[0].chars();
        let (Some(c), None) = (chars.next(), chars.next()) else {
            continue;
        };
        let Some(&ix) = vocab.index.get(&c) else { continue };
        let row = table.row_mut(ix);
        for (slot, tok) in row.iter_mut().zip(&tokens[1..]) {
            *slot = tok.parse().map_err(|_| CorpusError::Malformed {
                path: name.into(),
                line: i + 1,
                msg: format!("unparseable value `{tok}`"),
            })?;
        }
        seen[ix] = true;
    }
    let found = seen.iter().filter(|&&s| s).count();
    let real = vocab.chars().len();
    let coverage = if real == 0 { 0.0 } else { found as f64 / real as f64 };
    Ok(LoadedEmbeddings { table, found, coverage })
}

fn check_ratio(ratio: f64) -> Result<(), CorpusError> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(CorpusError::BadRatio(ratio))
    }
}

/// Splits off `⌈ratio · |S|⌉` validation samples drawn only from real samples.
/// Both parts keep the original sample order.
pub fn split_train_val(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    check_ratio(ratio)?;
    let n = dataset.len();
    let n_val = (ratio * n as f64).ceil() as usize;
    let mut real: Vec<usize> = (0..n)
        .filter(|&i| dataset.samples[i].provenance == Provenance::Real)
        .collect();
    if n_val == 0 || n_val >= n || n_val > real.len() {
        return Err(CorpusError::TooSmall {
            size: n,
            real: real.len(),
            ratio,
        }
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    real.shuffle(&mut rng);
    let mut in_val = vec![false; n];
    for &i in &real[..n_val] {
        in_val[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, s) in dataset.samples.iter().enumerate() {
        if in_val[i] { &mut val } else { &mut train }.push(s.clone());
    }
    Ok((Dataset::new(train), Dataset::new(val)))
}

/// Seeded subset of `⌈ratio · |S|⌉` samples (at least one), original order kept.
pub fn subsample(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(CorpusError::BadRatio(ratio).into());
    }
    if dataset.is_empty() {
        return Ok(Dataset::default());
    }
    let k = ((ratio * dataset.len() as f64).ceil() as usize).clamp(1, dataset.len());
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = idx[..k].to_vec();
    keep.sort_unstable();
    Ok(Dataset::new(keep.into_iter().map(|i| dataset.samples[i].clone()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, has_cws: bool) -> Result<Dataset> {
        read_columns(text.as_bytes(), "mem", has_cws, Validation::Strict)
    }

    fn real(s: &str, labels: &str) -> Sample {
        let ner = labels.split('/').map(|l| l.parse().unwrap()).collect();
        Sample::real(LabeledSentence::new(s.parse().unwrap(), ner, None).unwrap())
    }

    #[test]
    fn minimal_block() {
        let d = parse("我\tO\n爱\tO\n北\tB-LOC\n京\tI-LOC\n", false).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.samples[0].labeled.len(), 4);
        assert_eq!(d.entity_types.iter().collect::<Vec<_>>(), ["LOC"]);
    }

    #[test]
    fn empty_file() {
        assert!(parse("", false).unwrap().is_empty());
        assert!(parse("\n\n", false).unwrap().is_empty());
    }

    #[test]
    fn worked_example_block_has_two_mentions() {
        let text = "李\tB-PER\n刚\tI-PER\n在\tO\n阿\tB-ORG\n里\tI-ORG\n工\tO\n作\tO\n";
        let d = parse(text, false).unwrap();
        let m = d.samples[0].labeled.mentions();
        assert_eq!(m, vec![EntityMention::new("PER", 0, 2), EntityMention::new("ORG", 3, 5)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("我\tO\n爱\n", false).unwrap_err().to_string();
        assert!(err.contains("mem:2"), "{err}");
        let err = parse("我\tO\n\n北京\tO\n", false).unwrap_err().to_string();
        assert!(err.contains("mem:3"), "{err}");
        let err = parse("我\tO\n爱\tX-PER\n", false).unwrap_err().to_string();
        assert!(err.contains("mem:2"), "{err}");
        let err = parse("我\tO\tB\n爱\tO\n", false).unwrap_err().to_string();
        assert!(err.contains("mem:2"), "{err}");
        assert!(parse("我\tO\n", true).is_err());
    }

    #[test]
    fn strict_and_lenient_bio() {
        let text = "我\tO\n北\tI-LOC\n京\tI-LOC\n";
        let err = parse(text, false).unwrap_err();
        assert!(matches!(
            err,
            crate::Error::Corpus(CorpusError::InvalidBio {
                line: 2,
                position: 1,
                ..
            })
        ));
        let d = read_columns(text.as_bytes(), "mem", false, Validation::Lenient).unwrap();
        assert_eq!(d.samples[0].labeled.ner[1], NerLabel::B("LOC".into()));
        let err = parse("我\tO\tI\n", true).unwrap_err();
        assert!(matches!(err, crate::Error::Corpus(CorpusError::InvalidSegmentation { .. })));
    }

    #[test]
    fn pseudo_marker_and_round_trip() {
        let text = "我\tO\tB\n\n# pseudo\n北\tB-LOC\tB\n京\tI-LOC\tI\n";
        let d = parse(text, true).unwrap();
        assert_eq!(d.samples[0].provenance, Provenance::Real);
        assert_eq!(d.samples[1].provenance, Provenance::Pseudo);
        assert_eq!(format_columns(&d.samples), text);
    }

    #[test]
    fn hash_character_is_not_a_comment() {
        let d = parse("#\tO\n1\tO\n", false).unwrap();
        assert_eq!(d.samples[0].labeled.chars(), &['#', '1']);
    }

    #[test]
    fn vocab_counts() {
        let d = Dataset::new(vec![real("北京", "O/O"), real("北", "O")]);
        let v = build_vocab(&d, 1);
        assert_eq!(v.len(), 4);
        assert!(v.contains('北') && v.contains('京'));
        let v2 = build_vocab(&d, 2);
        assert_eq!(v2.len(), 3);
        assert!(v2.contains('北') && !v2.contains('京'));
        assert_eq!(v2.lookup('京'), Vocabulary::UNK);
        assert_eq!(v.lookup('海'), Vocabulary::UNK);
        assert_ne!(Vocabulary::PAD, Vocabulary::UNK);
        let only_special = build_vocab(&d, 10);
        assert_eq!(only_special.len(), 2);
    }

    #[test]
    fn vocab_is_dense_bijection() {
        let d = Dataset::new(vec![real("今天天气很好", "O/O/O/O/O/O"), real("好人", "O/O")]);
        let v = build_vocab(&d, 1);
        let mut seen = vec![false; v.len()];
        seen[Vocabulary::PAD] = true;
        seen[Vocabulary::UNK] = true;
        for &c in v.chars() {
            let i = v.lookup(c);
            assert!(!seen[i]);
            seen[i] = true;
            assert_eq!(v.char_at(i), Some(c));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn embeddings_full_and_zero_coverage() {
        let v = Vocabulary::from_chars(['北', '京']);
        let text = "2 2\n北 0.5 -1\n京 2 3.25\n";
        let e = read_embeddings(text.as_bytes(), "mem", &v, 2, 0).unwrap();
        assert_eq!(e.coverage, 1.0);
        assert_eq!(e.table.row(v.lookup('北')), &[0.5, -1.0]);
        assert_eq!(e.table.row(v.lookup('京')), &[2.0, 3.25]);
        assert_eq!(e.table.row(Vocabulary::PAD), &[0.0, 0.0]);

        let e = read_embeddings("海 1 1\n".as_bytes(), "mem", &v, 2, 0).unwrap();
        assert_eq!(e.coverage, 0.0);
        let bound = embedding_init_bound(2);
        for r in 1..v.len() {
            assert!(e.table.row(r).iter().all(|x| x.abs() <= bound));
        }
    }

    #[test]
    fn embedding_errors() {
        let v = Vocabulary::from_chars(['北']);
        assert!(matches!(
            read_embeddings("1 3\n北 1 2 3\n".as_bytes(), "mem", &v, 2, 0),
            Err(crate::Error::Corpus(CorpusError::EmbeddingDim { found: 3, .. }))
        ));
        assert!(read_embeddings("北 1 2 3\n".as_bytes(), "mem", &v, 2, 0).is_err());
        assert!(read_embeddings("北 1 x\n".as_bytes(), "mem", &v, 2, 0).is_err());
        // multi-character tokens are skipped
        let e = read_embeddings("</s> 1 2\n北 3 4\n".as_bytes(), "mem", &v, 2, 0).unwrap();
        assert_eq!(e.found, 1);
    }

    fn corpus(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| {
                    let text = format!("字{i}");
                    let labels = vec!["O"; text.chars().count()].join("/");
                    real(&text, &labels)
                })
                .collect(),
        )
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = corpus(10);
        let (train, val) = split_train_val(&d, 0.1, 7).unwrap();
        assert_eq!((train.len(), val.len()), (9, 1));
        let (train2, val2) = split_train_val(&d, 0.1, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
        assert!(split_train_val(&d, 0.0, 7).is_err());
        assert!(split_train_val(&d, 1.0, 7).is_err());
        assert!(split_train_val(&corpus(1), 0.5, 7).is_err());
    }

    #[test]
    fn split_partitions_disjointly() {
        let d = corpus(100);
        let (train, val) = split_train_val(&d, 0.1, 1).unwrap();
        let mut all: Vec<String> = train
            .sentences()
            .chain(val.sentences())
            .map(|s| s.sentence.to_string())
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 100);
        let (_, other) = split_train_val(&d, 0.1, 2).unwrap();
        assert_ne!(val, other);
    }

    #[test]
    fn split_keeps_pseudo_out_of_validation() {
        let mut samples: Vec<Sample> = corpus(5).samples;
        for i in 0..5 {
            let mut s = real(&format!("伪{i}"), "O/O");
            s.provenance = Provenance::Pseudo;
            samples.insert(i * 2, s);
        }
        let d = Dataset::new(samples);
        for seed in 0..50 {
            let (train, val) = split_train_val(&d, 0.2, seed).unwrap();
            assert_eq!(val.len(), 2);
            assert_eq!(train.len(), 8);
            assert!(val.samples.iter().all(|s| s.provenance == Provenance::Real));
        }
        let pseudo_heavy = Dataset::new(
            d.samples
                .iter()
                .filter(|s| s.provenance == Provenance::Pseudo)
                .cloned()
                .chain(corpus(1).samples)
                .collect(),
        );
        assert!(split_train_val(&pseudo_heavy, 0.5, 0).is_err());
    }

    #[test]
    fn subsample_sizes() {
        let d = corpus(40);
        assert_eq!(subsample(&d, 0.05, 3).unwrap().len(), 2);
        assert_eq!(subsample(&d, 0.25, 3).unwrap().len(), 10);
        assert_eq!(subsample(&d, 1.0, 3).unwrap(), d);
        assert_eq!(subsample(&d, 0.25, 3).unwrap(), subsample(&d, 0.25, 3).unwrap());
        assert!(subsample(&d, 0.0, 3).is_err());
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        let chars = proptest::collection::vec(prop_oneof![Just('北'), Just('京'), Just('#'), Just('a'), Just('人')], 1..8);
        (chars, prop::bool::ANY, prop::bool::ANY, prop::bool::ANY).prop_map(|(chars, ent, cws, pseudo)| {
            let n = chars.len();
            let mentions = if ent {
                vec![EntityMention::new("PER", 0, n.min(2))]
            } else {
                vec![]
            };
            let ner = crate::tagset::encode_mentions(n, &mentions).unwrap();
            let cws = cws.then(|| (0..n).map(|i| if i % 2 == 0 { CwsLabel::B } else { CwsLabel::I }).collect());
            let labeled = LabeledSentence::new(Sentence::new(chars).unwrap(), ner, cws).unwrap();
            Sample {
                labeled,
                provenance: if pseudo { Provenance::Pseudo } else { Provenance::Real },
            }
        })
    }

    proptest! {
        #[test]
        fn column_round_trip(samples in proptest::collection::vec(arb_sample(), 0..5)) {
            let text = format_columns(&samples);
            let back = read_columns(text.as_bytes(), "mem", false, Validation::Strict).unwrap();
            prop_assert_eq!(&back.samples, &samples);
            prop_assert_eq!(format_columns(&back.samples), text);
        }
    }
}
