//! Entity-level scoring.
//!
//! A predicted mention counts as correct only when a gold mention has the
//! same type, start and end. Counts are micro-aggregated over sentences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};
use crate::tagset::EntityMention;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl Prf {
    /// Precision is 0 when nothing was predicted, recall is 0 when there is
    /// no gold mention.
    pub fn from_counts(gold: usize, predicted: usize, correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let fscore = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            fscore,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    /// `None` when the gold data holds no OOV mention.
    pub oov_recall: Option<f64>,
    pub per_type: BTreeMap<String, Prf>,
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
    pub oov_gold: usize,
    pub oov_correct: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OovCounts {
    pub gold: usize,
    pub correct: usize,
}

impl OovCounts {
    pub fn recall(&self) -> Option<f64> {
        (self.gold > 0).then(|| self.correct as f64 / self.gold as f64)
    }
}

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Config(format!("{a} gold sentences but {b} predicted")));
    }
    Ok(())
}

/// Micro-averaged P/R/F with a per-type breakdown. OOV fields are left empty.
pub fn entity_prf(gold: &[Vec<EntityMention>], pred: &[Vec<EntityMention>]) -> Result<EvalReport> {
    check_aligned(gold.len(), pred.len())?;
    let mut by_type: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    let (mut g_total, mut p_total, mut c_total) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let g: BTreeSet<&EntityMention> = g.iter().collect();
        let p: BTreeSet<&EntityMention> = p.iter().collect();
        for m in &g {
            by_type.entry(&m.entity_type).or_default()[0] += 1;
        }
        for m in &p {
            let slot = by_type.entry(&m.entity_type).or_default();
            slot[1] += 1;
            if g.contains(m) {
                slot[2] += 1;
                c_total += 1;
            }
        }
        g_total += g.len();
        p_total += p.len();
    }
    let overall = Prf::from_counts(g_total, p_total, c_total);
    Ok(EvalReport {
        precision: overall.precision,
        recall: overall.recall,
        fscore: overall.fscore,
        oov_recall: None,
        per_type: by_type
            .into_iter()
            .map(|(t, [g, p, c])| (t.to_string(), Prf::from_counts(g, p, c)))
            .collect(),
        gold: g_total,
        predicted: p_total,
        correct: c_total,
        oov_gold: 0,
        oov_correct: 0,
    })
}

/// Surface strings of every mention in `dataset`.
pub fn training_surfaces(dataset: &Dataset) -> BTreeSet<String> {
    dataset
        .sentences()
        .flat_map(|l| l.mentions().into_iter().map(|m| l.sentence.surface(m.start, m.end)))
        .collect()
}

fn is_oov(m: &EntityMention, sentence: &Sentence, seen: &BTreeSet<String>) -> bool {
    !seen.contains(&sentence.surface(m.start, m.end))
}

/// Recall restricted to gold mentions whose surface never occurs as a
/// training entity. A hit needs an exact span and type match.
pub fn oov_recall(
    gold: &[Vec<EntityMention>],
    pred: &[Vec<EntityMention>],
    training_surfaces: &BTreeSet<String>,
    sentences: &[Sentence],
) -> Result<OovCounts> {
    check_aligned(gold.len(), pred.len())?;
    check_aligned(gold.len(), sentences.len())?;
    let mut counts = OovCounts::default();
    for ((g, p), s) in gold.iter().zip(pred).zip(sentences) {
        let g: BTreeSet<&EntityMention> = g.iter().collect();
        for m in g {
            if is_oov(m, s, training_surfaces) {
                counts.gold += 1;
                if p.contains(m) {
                    counts.correct += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Fraction of gold mentions that are OOV; `None` without gold mentions.
pub fn oov_rate(
    gold: &[Vec<EntityMention>],
    training_surfaces: &BTreeSet<String>,
    sentences: &[Sentence],
) -> Result<Option<f64>> {
    check_aligned(gold.len(), sentences.len())?;
    let (mut total, mut oov) = (0usize, 0usize);
    for (g, s) in gold.iter().zip(sentences) {
        total += g.len();
        oov += g.iter().filter(|m| is_oov(m, s, training_surfaces)).count();
    }
    Ok((total > 0).then(|| oov as f64 / total as f64))
}

/// [`entity_prf`] plus OOV recall.
pub fn evaluate(
    gold: &[Vec<EntityMention>],
    pred: &[Vec<EntityMention>],
    sentences: &[Sentence],
    training_surfaces: &BTreeSet<String>,
) -> Result<EvalReport> {
    let mut report = entity_prf(gold, pred)?;
    let oov = oov_recall(gold, pred, training_surfaces, sentences)?;
    report.oov_gold = oov.gold;
    report.oov_correct = oov.correct;
    report.oov_recall = oov.recall();
    Ok(report)
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Fixed-width table, one row per run and a mean row when there are several,
/// followed by a `metric=value` block.
pub fn report(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let row = |out: &mut String, name: &str, p: Option<f64>, r: Option<f64>, f: Option<f64>, o: Option<f64>| {
        let _ = writeln!(out, "{name:<6}{:>9}{:>9}{:>9}{:>9}", pct(p), pct(r), pct(f), pct(o));
    };
    let _ = writeln!(out, "{:<6}{:>9}{:>9}{:>9}{:>9}", "run", "P", "R", "F", "R_oov");
    for (i, r) in reports.iter().enumerate() {
        row(
            &mut out,
            &(i + 1).to_string(),
            Some(r.precision),
            Some(r.recall),
            Some(r.fscore),
            r.oov_recall,
        );
    }
    if reports.is_empty() {
        return out;
    }
    let m_p = mean(reports.iter().map(|r| r.precision));
    let m_r = mean(reports.iter().map(|r| r.recall));
    let m_f = mean(reports.iter().map(|r| r.fscore));
    let m_o = mean(reports.iter().filter_map(|r| r.oov_recall));
    if reports.len() > 1 {
        row(&mut out, "mean", m_p, m_r, m_f, m_o);
    }

    out.push('\n');
    let value = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
    let _ = writeln!(out, "runs={}", reports.len());
    let _ = writeln!(out, "precision={}", value(m_p));
    let _ = writeln!(out, "recall={}", value(m_r));
    let _ = writeln!(out, "fscore={}", value(m_f));
    let _ = writeln!(out, "oov_recall={}", value(m_o));
    if let [single] = reports {
        let _ = writeln!(out, "gold={}", single.gold);
        let _ = writeln!(out, "predicted={}", single.predicted);
        let _ = writeln!(out, "correct={}", single.correct);
        let _ = writeln!(out, "oov_gold={}", single.oov_gold);
        let _ = writeln!(out, "oov_correct={}", single.oov_correct);
        for (t, prf) in &single.per_type {
            let _ = writeln!(out, "{t}.precision={:.6}", prf.precision);
            let _ = writeln!(out, "{t}.recall={:.6}", prf.recall);
            let _ = writeln!(out, "{t}.fscore={:.6}", prf.fscore);
        }
    }
    out
}
