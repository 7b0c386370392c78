use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BiasSpec, Dataset, Example, GeneratorConfig, Provenance, TokenGroup, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Test => 2,
        }
    }

    pub fn size(self, cfg: &GeneratorConfig) -> usize {
        match self {
            Split::Train => cfg.train_size,
            Split::Test => cfg.test_size,
        }
    }
}

/// Draws an unbiased pool for one split. Train and test use disjoint RNG streams
/// of the same seed.
pub fn generate_pool(
    cfg: &GeneratorConfig,
    vocab: &Vocabulary,
    bias: &BiasSpec,
    split: Split,
) -> Result<Dataset> {
    cfg.validate()?;
    bias.validate(vocab)?;
    let spurious_slot = usize::from(bias.rho > 0.0);
    let needed = cfg.max_genuine + cfg.max_topic + spurious_slot;
    if needed > cfg.max_len {
        return Err(Error::Config(format!(
            "length range {}..={} cannot fit {needed} mandated tokens",
            cfg.min_len, cfg.max_len
        )));
    }

    let positive = vocab.ids_in(TokenGroup::GenuinePositive);
    let negative = vocab.ids_in(TokenGroup::GenuineNegative);
    let fillers = vocab.ids_in(TokenGroup::Filler);
    let topics: Vec<usize> = vocab
        .entries()
        .iter()
        .filter(|e| matches!(e.group, TokenGroup::Topic(_)) && !bias.is_spurious(e.id))
        .map(|e| e.id)
        .collect();
    if cfg.max_genuine > positive.len().min(negative.len()) {
        return Err(Error::Config(format!(
            "max_genuine {} exceeds the genuine group sizes",
            cfg.max_genuine
        )));
    }
    if cfg.max_topic > topics.len() {
        return Err(Error::Config(format!(
            "max_topic {} exceeds the {} non-spurious topic tokens",
            cfg.max_topic,
            topics.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(split.stream());

    let size = split.size(cfg);
    let mut examples = Vec::with_capacity(size);
    for _ in 0..size {
        let label = rng.random_range(0..2usize);
        let flipped = cfg.label_noise > 0.0 && rng.random_bool(cfg.label_noise);
        let polarity = if flipped { 1 - label } else { label };
        let genuine_pool = if polarity == 1 { &positive } else { &negative };

        let n_genuine = rng.random_range(cfg.min_genuine..=cfg.max_genuine);
        let n_topic = rng.random_range(cfg.min_topic..=cfg.max_topic);
        let spurious = (bias.rho > 0.0 && rng.random_bool(bias.rho)).then(|| {
            if rng.random_bool(0.5) {
                bias.spurious_positive
            } else {
                bias.spurious_negative
            }
        });

        let mandated = n_genuine + n_topic + usize::from(spurious.is_some());
        let len = rng.random_range(cfg.min_len.max(mandated)..=cfg.max_len);

        let mut tokens = Vec::with_capacity(len);
        tokens.extend(genuine_pool.choose_multiple(&mut rng, n_genuine).copied());
        tokens.extend(topics.choose_multiple(&mut rng, n_topic).copied());
        tokens.extend(spurious);
        while tokens.len() < len {
            tokens.push(*fillers.choose(&mut rng).expect("fillers nonempty"));
        }
        tokens.shuffle(&mut rng);
        examples.push(Example { tokens, label });
    }

    Ok(Dataset {
        examples,
        provenance: Provenance::Pool,
        bias: Some(bias.clone()),
        seed: cfg.seed,
        classes: 2,
    })
}
