//! Pseudo labeled samples by same-type entity replacement.
//!
//! Every mention in a source sentence is swapped for a surface drawn from the
//! inventory of its type. NER labels are re-derived from the shifted mentions,
//! and CWS labels treat every replaced entity as one word while keeping all
//! other word boundaries.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabeledSentence, Sample, Sentence};
use crate::error::{Error, Result};
use crate::tagset::{encode_mentions, CwsLabel, EntityMention};

/// Entity surfaces by type, in order of first occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityInventory {
    pub by_type: BTreeMap<String, Vec<String>>,
}

impl EntityInventory {
    pub fn is_empty(&self) -> bool {
        self.by_type.is_empty()
    }

    pub fn get(&self, entity_type: &str) -> &[String] {
        self.by_type.get(entity_type).map_or(&[], Vec::as_slice)
    }

    pub fn insert(&mut self, entity_type: &str, surface: String) {
        if surface.is_empty() {
            return;
        }
        let list = self.by_type.entry(entity_type.to_string()).or_default();
        if !list.contains(&surface) {
            list.push(surface);
        }
    }

    /// Total number of surfaces over all types.
    pub fn len(&self) -> usize {
        self.by_type.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    /// The mention in the source sentence.
    pub mention: EntityMention,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    pub labeled: LabeledSentence,
    pub source_index: usize,
    pub replacements: Vec<Replacement>,
}

pub fn extract_inventory(dataset: &Dataset) -> EntityInventory {
    let mut inventory = EntityInventory::default();
    for labeled in dataset.sentences() {
        for m in labeled.mentions() {
            inventory.insert(&m.entity_type, labeled.sentence.surface(m.start, m.end));
        }
    }
    inventory
}

/// Applies `replacements` (sorted, non-overlapping, one per mention of
/// `source`) and re-derives both label sequences.
pub fn replace_mentions(source: &LabeledSentence, replacements: &[Replacement]) -> Result<LabeledSentence> {
    let chars = source.chars();
    let mut out_chars = Vec::with_capacity(chars.len());
    let mut mentions = Vec::with_capacity(replacements.len());
    // per output char: Some(true) entity start, Some(false) inside entity, None copied
    let mut entity_pos: Vec<Option<bool>> = Vec::with_capacity(chars.len());
    let mut origin: Vec<usize> = Vec::with_capacity(chars.len());
    let mut cursor = 0;
    for r in replacements {
        let m = &r.mention;
        if m.start < cursor || m.end > chars.len() || m.start >= m.end {
            return Err(Error::Config(format!(
                "replacement span [{}, {}) is not valid here",
                m.start, m.end
            )));
        }
        for i in cursor..m.start {
            out_chars.push(chars[i]);
            entity_pos.push(None);
            origin.push(i);
        }
        let start = out_chars.len();
        for (k, c) in r.surface.chars().enumerate() {
            out_chars.push(c);
            entity_pos.push(Some(k == 0));
            origin.push(m.start);
        }
        if out_chars.len() == start {
            return Err(Error::Config(format!("empty replacement for a {} mention", m.entity_type)));
        }
        mentions.push(EntityMention::new(m.entity_type.clone(), start, out_chars.len()));
        cursor = m.end;
    }
    for i in cursor..chars.len() {
        out_chars.push(chars[i]);
        entity_pos.push(None);
        origin.push(i);
    }

    let ner = encode_mentions(out_chars.len(), &mentions)?;
    let cws = source.cws.as_ref().map(|src| {
        let mut prev_entity = false;
        entity_pos
            .iter()
            .zip(&origin)
            .map(|(pos, &o)| {
                let label = match pos {
                    Some(true) => CwsLabel::B,
                    Some(false) => CwsLabel::I,
                    None if prev_entity => CwsLabel::B,
                    None => src[o],
                };
                prev_entity = pos.is_some();
                label
            })
            .collect()
    });
    LabeledSentence::new(Sentence::new(out_chars)?, ner, cws)
}

/// Draws `count` pseudo samples. Each draw picks a source uniformly with
/// replacement and replaces every mention with a uniformly drawn surface of
/// the same type, which may be the original one.
pub fn generate_pseudo(dataset: &Dataset, inventory: &EntityInventory, count: usize, seed: u64) -> Result<Vec<PseudoSample>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if dataset.is_empty() {
        return Err(Error::Empty("augmentation source dataset"));
    }
    let mentions: Vec<Vec<EntityMention>> = dataset.sentences().map(LabeledSentence::mentions).collect();
    for m in mentions.iter().flatten() {
        if inventory.get(&m.entity_type).is_empty() {
            return Err(Error::EmptyInventory(m.entity_type.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let source_index = rng.gen_range(0..dataset.len());
        let replacements: Vec<Replacement> = mentions[source_index]
            .iter()
            .map(|m| {
                let pool = inventory.get(&m.entity_type);
                Replacement {
                    mention: m.clone(),
                    surface: pool[rng.gen_range(0..pool.len())].clone(),
                }
            })
            .collect();
        let labeled = replace_mentions(&dataset.samples[source_index].labeled, &replacements)?;
        out.push(PseudoSample {
            labeled,
            source_index,
            replacements,
        });
    }
    Ok(out)
}

pub fn merge(dataset: &Dataset, pseudo: Vec<PseudoSample>) -> Dataset {
    let mut samples = dataset.samples.clone();
    samples.extend(pseudo.into_iter().map(|p| Sample::pseudo(p.labeled)));
    let mut merged = Dataset::new(samples);
    merged.entity_types.extend(dataset.entity_types.iter().cloned());
    merged
}
