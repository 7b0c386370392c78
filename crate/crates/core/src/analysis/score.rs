use super::neighbors::Representations;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{forward_sentence, Model, ModelParams};

/// Class-1 probability the reference model assigns to `BOS v EOS`.
pub fn polarity_of(reference: &Model, v: usize) -> Result<f64> {
    if v <= Vocabulary::EOS {
        return Err(Error::SpecialToken(v));
    }
    Ok(forward_sentence(reference, &[v])?.probs[1])
}

/// Polarity of every content token under one reference model.
#[derive(Debug, Clone)]
pub struct PolarityTable {
    values: Vec<f64>,
}

impl PolarityTable {
    pub fn compute(reference: &Model, vocab: &Vocabulary) -> Result<Self> {
        let mut values = vec![f64::NAN; vocab.len()];
        for id in vocab.content_ids() {
            values[id] = polarity_of(reference, id)?;
        }
        Ok(Self { values })
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpuriousScoreReport {
    pub target: usize,
    pub k: usize,
    pub sum_score: f64,
    pub mean_score: f64,
    /// `|p₁(N_i^initial) − p₁(N_i^finetuned)|` for rank i = 1..K.
    pub deltas: Vec<f64>,
}

impl SpuriousScoreReport {
    /// Pairs two neighbor lists by rank.
    pub fn from_lists(
        target: usize,
        initial: &[usize],
        finetuned: &[usize],
        polarity: &PolarityTable,
    ) -> Self {
        let deltas: Vec<f64> = initial
            .iter()
            .zip(finetuned)
            .map(|(&a, &b)| (polarity.get(a) - polarity.get(b)).abs())
            .collect();
        let k = deltas.len();
        let sum_score: f64 = deltas.iter().sum();
        Self {
            target,
            k,
            sum_score,
            mean_score: if k == 0 { 0.0 } else { sum_score / k as f64 },
            deltas,
        }
    }
}

/// Sum over ranks of the absolute change in the reference model's class-1
/// probability between the initial and fine-tuned top-K neighbor lists.
pub fn spurious_score(
    reference: &Model,
    initial: &ModelParams,
    finetuned: &ModelParams,
    vocab: &Vocabulary,
    target: usize,
    k: usize,
) -> Result<SpuriousScoreReport> {
    let polarity = PolarityTable::compute(reference, vocab)?;
    let before = Representations::compute(initial, vocab)?.neighbors(target, k)?;
    let after = Representations::compute(finetuned, vocab)?.neighbors(target, k)?;
    Ok(SpuriousScoreReport::from_lists(
        target,
        &before.ids().collect::<Vec<_>>(),
        &after.ids().collect::<Vec<_>>(),
        &polarity,
    ))
}
