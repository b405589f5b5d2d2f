//! Seeded, templated toy corpora with NER and segmentation labels.
//!
//! Sentences are built from short templates whose slots are filled with names
//! from per-type pools. Every fourth name of each pool is held out, so test
//! sets can be drawn with a controlled share of unseen entity surfaces.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabeledSentence, Sentence};
use crate::error::{Error, Result};
use crate::tagset::{encode_mentions, encode_segmentation, EntityMention};

const TEMPLATES: &[&str] = &[
    "{PER} 在 {ORG} 工作",
    "我 见 过 {PER}",
    "{PER} 和 {PER} 是 朋友",
    "今天 {PER} 来 {ORG} 开会",
    "{ORG} 的 {PER} 说 好",
    "{PER} 加入 了 {ORG}",
    "大家 都 认识 {PER}",
    "{ORG} 很 大",
    "你 好",
    "{PER} 去 了 {LOC}",
    "{ORG} 在 {LOC}",
    "他 从 {LOC} 来",
];

const SURNAMES: [&str; 6] = ["王", "李", "张", "刘", "陈", "杨"];
const GIVEN: [&str; 6] = ["明", "伟", "芳", "军", "磊", "华"];
const ORG_HEADS: [&str; 4] = ["东方", "南方", "新华", "金星"];
const ORG_TAILS: [&str; 3] = ["科技", "银行", "集团"];
const LOCATIONS: [&str; 8] = ["北京", "上海", "广州", "杭州", "深圳", "南京", "成都", "西安"];

#[derive(Debug, Clone)]
struct Pool {
    seen: Vec<String>,
    held_out: Vec<String>,
}

impl Pool {
    fn new(names: Vec<String>) -> Self {
        let (mut seen, mut held_out) = (Vec::new(), Vec::new());
        for (i, n) in names.into_iter().enumerate() {
            if i % 4 == 3 {
                held_out.push(n);
            } else {
                seen.push(n);
            }
        }
        Self { seen, held_out }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesizer {
    pools: BTreeMap<String, Pool>,
    templates: Vec<Vec<String>>,
}

impl Synthesizer {
    /// `types` is 2 (PER, ORG) or 3 (adds LOC).
    pub fn new(types: usize) -> Result<Self> {
        let wanted: &[&str] = match types {
            2 => &["PER", "ORG"],
            3 => &["PER", "ORG", "LOC"],
            _ => {
                return Err(Error::Config(format!(
                    "synthetic corpora have 2 or 3 entity types, not {types}"
                )))
            }
        };
        let mut per: Vec<String> = SURNAMES
            .iter()
            .flat_map(|s| GIVEN.iter().map(move |g| format!("{s}{g}")))
            .collect();
        per.extend(
            SURNAMES
                .iter()
                .zip(GIVEN.iter().rev())
                .map(|(s, g)| format!("{s}{g}{}", GIVEN[0])),
        );
        let org = ORG_HEADS
            .iter()
            .flat_map(|h| ORG_TAILS.iter().map(move |t| format!("{h}{t}")))
            .collect();
        let loc = LOCATIONS.iter().map(|s| s.to_string()).collect();
        let mut pools = BTreeMap::new();
        for (ty, names) in [("PER", per), ("ORG", org), ("LOC", loc)] {
            if wanted.contains(&ty) {
                pools.insert(ty.to_string(), Pool::new(names));
            }
        }
        let templates = TEMPLATES
            .iter()
            .map(|t| t.split(' ').map(str::to_string).collect::<Vec<_>>())
            .filter(|words| words.iter().filter_map(|w| slot(w)).all(|ty| pools.contains_key(ty)))
            .collect();
        Ok(Self { pools, templates })
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &str> {
        self.pools.keys().map(String::as_str)
    }

    /// Names that [`generate`](Self::generate) only uses for OOV draws.
    pub fn held_out(&self, entity_type: &str) -> &[String] {
        self.pools.get(entity_type).map_or(&[], |p| p.held_out.as_slice())
    }

    /// `n` sentences with segmentation labels when `with_cws`. Each slot
    /// takes a held-out name with probability `oov_fraction`.
    pub fn generate(&self, n: usize, oov_fraction: f64, with_cws: bool, seed: u64) -> Result<Dataset> {
        if !(0.0..=1.0).contains(&oov_fraction) {
            return Err(Error::Config(format!("oov_fraction {oov_fraction} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let template = &self.templates[rng.gen_range(0..self.templates.len())];
            let mut chars = Vec::new();
            let mut words = Vec::new();
            let mut mentions = Vec::new();
            for w in template {
                let word = match slot(w) {
                    Some(ty) => {
                        let pool = &self.pools[ty];
                        let names = if rng.gen_bool(oov_fraction) {
                            &pool.held_out
                        } else {
                            &pool.seen
                        };
                        let name = &names[rng.gen_range(0..names.len())];
                        let len = name.chars().count();
                        mentions.push(EntityMention::new(ty, chars.len(), chars.len() + len));
                        name.as_str()
                    }
                    None => w.as_str(),
                };
                words.push(word.chars().count());
                chars.extend(word.chars());
            }
            let ner = encode_mentions(chars.len(), &mentions)?;
            let cws = with_cws.then(|| encode_segmentation(&words)).transpose()?;
            out.push(LabeledSentence::new(Sentence::new(chars)?, ner, cws)?);
        }
        Ok(Dataset::from_labeled(out))
    }
}

/// Two short sentences with PER and ORG mentions and segmentation labels.
pub fn toy_batch() -> Dataset {
    let build = |text: &str, mentions: &[(&str, usize, usize)], words: &[usize]| {
        let chars: Vec<char> = text.chars().collect();
        let mentions: Vec<EntityMention> = mentions.iter().map(|&(t, s, e)| EntityMention::new(t, s, e)).collect();
        let ner = encode_mentions(chars.len(), &mentions).expect("fixture mentions");
        let cws = encode_segmentation(words).expect("fixture words");
        LabeledSentence::new(Sentence::new(chars).expect("fixture text"), ner, Some(cws)).expect("fixture labels")
    };
    Dataset::from_labeled(vec![
        build("李刚在阿里", &[("PER", 0, 2), ("ORG", 3, 5)], &[2, 1, 2]),
        build("华为的王芳", &[("ORG", 0, 2), ("PER", 3, 5)], &[2, 1, 2]),
    ])
}

fn slot(word: &str) -> Option<&str> {
    word.strip_prefix('{').and_then(|w| w.strip_suffix('}'))
}
