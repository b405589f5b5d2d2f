//! Label alphabets and span ⇄ label conversion.
//!
//! NER uses BIO (`O`, `B-<TYPE>`, `I-<TYPE>`); segmentation uses BI.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::TagError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NerLabel {
    O,
    B(String),
    I(String),
}

impl NerLabel {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            NerLabel::O => None,
            NerLabel::B(t) | NerLabel::I(t) => Some(t),
        }
    }
}

impl fmt::Display for NerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NerLabel::O => f.write_str("O"),
            NerLabel::B(t) => write!(f, "B-{t}"),
            NerLabel::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for NerLabel {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TagError::BadLabel(s.to_string());
        if s == "O" {
            return Ok(NerLabel::O);
        }
        let (prefix, ty) = s.split_once('-').ok_or_else(bad)?;
        if ty.is_empty() || ty.chars().any(char::is_whitespace) {
            return Err(bad());
        }
        match prefix {
            "B" => Ok(NerLabel::B(ty.to_string())),
            "I" => Ok(NerLabel::I(ty.to_string())),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CwsLabel {
    B,
    I,
}

impl CwsLabel {
    pub const ALPHABET: [CwsLabel; 2] = [CwsLabel::B, CwsLabel::I];

    pub fn index(self) -> usize {
        match self {
            CwsLabel::B => 0,
            CwsLabel::I => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALPHABET.get(i).copied()
    }
}

impl fmt::Display for CwsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CwsLabel::B => "B",
            CwsLabel::I => "I",
        })
    }
}

impl FromStr for CwsLabel {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B" => Ok(CwsLabel::B),
            "I" => Ok(CwsLabel::I),
            _ => Err(TagError::BadLabel(s.to_string())),
        }
    }
}

/// A typed, half-open character span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityMention {
    pub entity_type: String,
    pub start: usize,
    pub end: usize,
}

impl EntityMention {
    pub fn new(entity_type: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            entity_type: entity_type.into(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Ordered NER label alphabet: `O` first, then `B-t`, `I-t` for every type in
/// lexicographic order. Index positions define the rows and columns of the
/// CRF parameters, so the ordering must never change between save and load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NerAlphabet {
    types: Vec<String>,
    labels: Vec<NerLabel>,
}

impl NerAlphabet {
    pub fn new<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let types: BTreeSet<String> = types.into_iter().map(Into::into).collect();
        let types: Vec<String> = types.into_iter().collect();
        let mut labels = vec![NerLabel::O];
        for t in &types {
            labels.push(NerLabel::B(t.clone()));
            labels.push(NerLabel::I(t.clone()));
        }
        Self { types, labels }
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn labels(&self) -> &[NerLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &NerLabel) -> Option<usize> {
        match label {
            NerLabel::O => Some(0),
            NerLabel::B(t) => self.types.binary_search(t).ok().map(|i| 1 + 2 * i),
            NerLabel::I(t) => self.types.binary_search(t).ok().map(|i| 2 + 2 * i),
        }
    }

    pub fn label(&self, index: usize) -> Option<&NerLabel> {
        self.labels.get(index)
    }

    /// BIO-legal transitions; see [`transition_mask`].
    pub fn transition_mask(&self) -> Vec<Vec<bool>> {
        transition_mask(&self.labels)
    }

    /// Labels that may open a sentence (everything except `I-*`).
    pub fn start_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|l| !matches!(l, NerLabel::I(_))).collect()
    }
}

/// Renders mentions as a BIO label sequence of length `n`.
pub fn encode_mentions(n: usize, mentions: &[EntityMention]) -> Result<Vec<NerLabel>, TagError> {
    let mut labels = vec![NerLabel::O; n];
    let mut prev_end = 0;
    for m in mentions {
        if m.start >= m.end || m.end > n {
            return Err(TagError::MentionOutOfRange {
                start: m.start,
                end: m.end,
                len: n,
            });
        }
        if m.start < prev_end {
            return Err(TagError::Overlap { at: m.start });
        }
        labels[m.start] = NerLabel::B(m.entity_type.clone());
        for l in &mut labels[m.start + 1..m.end] {
            *l = NerLabel::I(m.entity_type.clone());
        }
        prev_end = m.end;
    }
    Ok(labels)
}

/// Result of decoding a possibly ill-formed BIO sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decoded {
    pub mentions: Vec<EntityMention>,
    /// Number of `I-X` labels that had to open a new mention.
    pub repairs: usize,
}

/// Extracts maximal `B I*` runs as mentions.
///
/// An `I-X` that does not continue an open `X` mention opens a new one and is
/// counted as a repair; this includes `I-Y` directly after an `X` mention,
/// which closes `X` first.
pub fn decode_labels(labels: &[NerLabel]) -> Decoded {
    let mut out = Decoded::default();
    let mut open: Option<(usize, &str)> = None;
    let close = |open: &mut Option<(usize, &str)>, end: usize, out: &mut Decoded| {
        if let Some((start, ty)) = open.take() {
            out.mentions.push(EntityMention::new(ty, start, end));
        }
    };
    for (i, label) in labels.iter().enumerate() {
        match label {
            NerLabel::O => close(&mut open, i, &mut out),
            NerLabel::B(t) => {
                close(&mut open, i, &mut out);
                open = Some((i, t));
            }
            NerLabel::I(t) => match open {
                Some((_, ty)) if ty == t => {}
                _ => {
                    close(&mut open, i, &mut out);
                    open = Some((i, t));
                    out.repairs += 1;
                }
            },
        }
    }
    close(&mut open, labels.len(), &mut out);
    out
}

/// Returns the first position at which `labels` violates BIO, if any.
pub fn first_bio_violation(labels: &[NerLabel]) -> Option<usize> {
    let mut prev: Option<&NerLabel> = None;
    for (i, label) in labels.iter().enumerate() {
        if let NerLabel::I(t) = label {
            let ok = matches!(prev, Some(NerLabel::B(p)) | Some(NerLabel::I(p)) if p == t);
            if !ok {
                return Some(i);
            }
        }
        prev = Some(label);
    }
    None
}

/// Rewrites ill-formed BIO into the well-formed sequence with the same
/// decoded mentions.
pub fn repair_bio(labels: &[NerLabel]) -> Vec<NerLabel> {
    let decoded = decode_labels(labels);
    encode_mentions(labels.len(), &decoded.mentions).expect("decoded mentions are valid")
}

/// Segmentation labels from word lengths: `B` then `len - 1` × `I` per word.
pub fn encode_segmentation(word_lengths: &[usize]) -> Result<Vec<CwsLabel>, TagError> {
    let mut out = Vec::with_capacity(word_lengths.iter().sum());
    for (i, &len) in word_lengths.iter().enumerate() {
        if len == 0 {
            return Err(TagError::EmptyWord { index: i });
        }
        out.push(CwsLabel::B);
        out.extend(std::iter::repeat_n(CwsLabel::I, len - 1));
    }
    Ok(out)
}

/// Inverse of [`encode_segmentation`]. A leading `I` is read as `B`.
pub fn segmentation_lengths(labels: &[CwsLabel]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match (l, out.last_mut()) {
            (CwsLabel::I, Some(last)) if i > 0 => *last += 1,
            _ => out.push(1),
        }
    }
    out
}

/// `mask[a][b]` is true iff label `b` may follow label `a` under BIO:
/// `I-X` only after `B-X` or `I-X`; `O` and `B-*` after anything.
pub fn transition_mask(labels: &[NerLabel]) -> Vec<Vec<bool>> {
    labels
        .iter()
        .map(|from| {
            labels
                .iter()
                .map(|to| match to {
                    NerLabel::O | NerLabel::B(_) => true,
                    NerLabel::I(t) => matches!(from, NerLabel::B(f) | NerLabel::I(f) if f == t),
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(s: &str) -> Vec<NerLabel> {
        s.split('/').map(|x| x.parse().unwrap()).collect()
    }

    #[test]
    fn label_strings_round_trip() {
        for s in ["O", "B-PER", "I-LOC", "B-ORG"] {
            assert_eq!(s.parse::<NerLabel>().unwrap().to_string(), s);
        }
        for bad in ["", "X-PER", "B-", "B", "BPER", "b-PER"] {
            assert!(bad.parse::<NerLabel>().is_err(), "{bad}");
        }
        assert_eq!("B".parse::<CwsLabel>().unwrap(), CwsLabel::B);
        assert!("O".parse::<CwsLabel>().is_err());
    }

    #[test]
    fn encode_worked_example() {
        let m = [EntityMention::new("PER", 0, 2), EntityMention::new("ORG", 3, 5)];
        assert_eq!(encode_mentions(7, &m).unwrap(), labels("B-PER/I-PER/O/B-ORG/I-ORG/O/O"));
    }

    #[test]
    fn encode_trivial_cases() {
        assert_eq!(encode_mentions(4, &[]).unwrap(), vec![NerLabel::O; 4]);
        assert_eq!(
            encode_mentions(3, &[EntityMention::new("LOC", 0, 3)]).unwrap(),
            labels("B-LOC/I-LOC/I-LOC")
        );
    }

    #[test]
    fn encode_rejects_bad_mentions() {
        let overlap = [EntityMention::new("A", 0, 2), EntityMention::new("B", 1, 3)];
        assert!(matches!(encode_mentions(4, &overlap), Err(TagError::Overlap { .. })));
        let out_of_range = [EntityMention::new("A", 2, 5)];
        assert!(encode_mentions(4, &out_of_range).is_err());
        assert!(encode_mentions(4, &[EntityMention::new("A", 2, 2)]).is_err());
    }

    #[test]
    fn decode_worked_example() {
        let d = decode_labels(&labels("B-PER/I-PER/O/B-ORG/I-ORG/O/O"));
        assert_eq!(
            d.mentions,
            vec![EntityMention::new("PER", 0, 2), EntityMention::new("ORG", 3, 5)]
        );
        assert_eq!(d.repairs, 0);
    }

    #[test]
    fn decode_repairs_orphan_inside() {
        let d = decode_labels(&labels("O/I-PER/I-PER"));
        assert_eq!(d.mentions, vec![EntityMention::new("PER", 1, 3)]);
        assert_eq!(d.repairs, 1);
    }

    #[test]
    fn decode_type_switch_closes_and_opens() {
        let d = decode_labels(&labels("B-PER/I-ORG/I-ORG/B-LOC"));
        assert_eq!(
            d.mentions,
            vec![
                EntityMention::new("PER", 0, 1),
                EntityMention::new("ORG", 1, 3),
                EntityMention::new("LOC", 3, 4)
            ]
        );
        assert_eq!(d.repairs, 1);
        assert_eq!(first_bio_violation(&labels("B-PER/I-ORG")), Some(1));
        assert_eq!(repair_bio(&labels("O/I-PER/I-PER")), labels("O/B-PER/I-PER"));
    }

    #[test]
    fn segmentation_examples() {
        use CwsLabel::{B, I};
        assert_eq!(encode_segmentation(&[2, 1, 2, 1, 1]).unwrap(), vec![B, I, B, B, I, B, B]);
        // B/I/B/B/I/B/B/I is the word-length pattern [2, 1, 2, 1, 2]
        assert_eq!(encode_segmentation(&[2, 1, 2, 1, 2]).unwrap(), vec![B, I, B, B, I, B, B, I]);
        assert_eq!(encode_segmentation(&[1, 1, 1]).unwrap(), vec![B, B, B]);
        assert_eq!(encode_segmentation(&[4]).unwrap(), vec![B, I, I, I]);
        assert!(matches!(encode_segmentation(&[2, 0]), Err(TagError::EmptyWord { index: 1 })));
        assert_eq!(segmentation_lengths(&[B, I, B, B, I, B, B, I]), vec![2, 1, 2, 1, 2]);
    }

    #[test]
    fn mask_follows_bio() {
        let alpha = NerAlphabet::new(["PER", "ORG"]);
        let mask = alpha.transition_mask();
        let ix = |s: &str| alpha.index_of(&s.parse().unwrap()).unwrap();
        assert!(mask[ix("B-PER")][ix("I-PER")]);
        assert!(mask[ix("I-PER")][ix("I-PER")]);
        assert!(!mask[ix("O")][ix("I-PER")]);
        assert!(!mask[ix("B-ORG")][ix("I-PER")]);
        assert!(!mask[ix("I-ORG")][ix("I-PER")]);
        for from in 0..alpha.len() {
            assert!(mask[from][ix("O")]);
            assert!(mask[from][ix("B-PER")]);
            assert!(mask[from][ix("B-ORG")]);
        }
        assert_eq!(mask.len(), alpha.len());
        assert!(mask.iter().all(|row| row.len() == alpha.len()));
    }

    #[test]
    fn alphabet_order() {
        let alpha = NerAlphabet::new(["PER", "LOC", "ORG", "LOC"]);
        let rendered: Vec<String> = alpha.labels().iter().map(ToString::to_string).collect();
        assert_eq!(rendered, ["O", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "B-PER", "I-PER"]);
        for (i, l) in alpha.labels().iter().enumerate() {
            assert_eq!(alpha.index_of(l), Some(i));
        }
        assert_eq!(alpha.index_of(&NerLabel::B("MISC".into())), None);
    }

    /// Every non-overlapping mention set over `n` positions with types from
    /// {A, B}, enumerated exhaustively for small `n`.
    fn all_mention_sets(n: usize) -> Vec<Vec<EntityMention>> {
        fn rec(pos: usize, n: usize, cur: &mut Vec<EntityMention>, out: &mut Vec<Vec<EntityMention>>) {
            if pos >= n {
                out.push(cur.clone());
                return;
            }
            rec(pos + 1, n, cur, out);
            for end in pos + 1..=n {
                for ty in ["A", "B"] {
                    cur.push(EntityMention::new(ty, pos, end));
                    rec(end, n, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(0, n, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn decode_inverts_encode_exhaustively() {
        for n in 0..=6 {
            for m in all_mention_sets(n) {
                let labels = encode_mentions(n, &m).unwrap();
                assert_eq!(first_bio_violation(&labels), None);
                let d = decode_labels(&labels);
                assert_eq!(d.mentions, m);
                assert_eq!(d.repairs, 0);
            }
        }
    }

    fn arb_labels() -> impl Strategy<Value = Vec<NerLabel>> {
        let label = prop_oneof![
            Just(NerLabel::O),
            Just(NerLabel::B("A".into())),
            Just(NerLabel::I("A".into())),
            Just(NerLabel::B("B".into())),
            Just(NerLabel::I("B".into())),
        ];
        proptest::collection::vec(label, 0..16)
    }

    fn arb_mentions() -> impl Strategy<Value = (usize, Vec<EntityMention>)> {
        (1usize..=12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 1usize..4, prop::bool::ANY), 0..6).prop_map(move |raw| {
                let mut spans: Vec<EntityMention> = Vec::new();
                let mut sorted = raw;
                sorted.sort();
                for (start, len, a) in sorted {
                    let end = (start + len).min(n);
                    if spans.last().is_none_or(|m| m.end <= start) {
                        spans.push(EntityMention::new(if a { "A" } else { "B" }, start, end));
                    }
                }
                (n, spans)
            })
        })
    }

    proptest! {
        #[test]
        fn decode_never_overlaps(labels in arb_labels()) {
            let d = decode_labels(&labels);
            for w in d.mentions.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for m in &d.mentions {
                prop_assert!(m.start < m.end && m.end <= labels.len());
            }
            // repaired output is well-formed and decodes to the same mentions
            let fixed = repair_bio(&labels);
            prop_assert_eq!(first_bio_violation(&fixed), None);
            prop_assert_eq!(decode_labels(&fixed).mentions, d.mentions);
        }

        #[test]
        fn encode_decode_identity((n, mentions) in arb_mentions()) {
            let labels = encode_mentions(n, &mentions).unwrap();
            prop_assert_eq!(labels.len(), n);
            prop_assert_eq!(decode_labels(&labels).mentions, mentions);
        }

        #[test]
        fn segmentation_one_b_per_word(lengths in proptest::collection::vec(1usize..6, 1..10)) {
            let labels = encode_segmentation(&lengths).unwrap();
            prop_assert_eq!(labels[0], CwsLabel::B);
            prop_assert_eq!(labels.iter().filter(|&&l| l == CwsLabel::B).count(), lengths.len());
            prop_assert_eq!(segmentation_lengths(&labels), lengths);
        }
    }
}
