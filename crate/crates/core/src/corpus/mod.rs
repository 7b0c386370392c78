//! Synthetic labeled corpora with planted genuine and spurious tokens.
//!
//! Every sentence is assembled from slots: genuine tokens whose polarity
//! defines the label, neutral topic tokens, fillers, and (with probability
//! `rho`) one designated spurious token. The pool is unbiased by construction;
//! the biased split is obtained by filtering it.

mod generate;
mod io;
mod vocab;

use std::fmt;

pub use generate::{generate_pool, Split};
pub use io::{
    read_bias, read_dataset, read_vocabulary, write_bias, write_dataset, write_vocabulary,
    DataBundle,
};
pub use vocab::{TokenEntry, TokenGroup, Vocabulary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub positive_count: usize,
    pub negative_count: usize,
    pub topic_count: usize,
    pub topics: usize,
    pub filler_count: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub min_genuine: usize,
    pub max_genuine: usize,
    pub min_topic: usize,
    pub max_topic: usize,
    pub label_noise: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            positive_count: 40,
            negative_count: 40,
            topic_count: 120,
            topics: 12,
            filler_count: 60,
            min_len: 6,
            max_len: 12,
            min_genuine: 1,
            max_genuine: 3,
            min_topic: 1,
            max_topic: 2,
            label_noise: 0.0,
            train_size: 5000,
            test_size: 5000,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("positive_count", self.positive_count),
            ("negative_count", self.negative_count),
            ("topic_count", self.topic_count),
            ("topics", self.topics),
            ("filler_count", self.filler_count),
            ("min_len", self.min_len),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.topics > self.topic_count {
            return bad(format!(
                "{} topics cannot be filled by {} topic tokens",
                self.topics, self.topic_count
            ));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad(format!("label_noise {} outside [0, 0.5)", self.label_noise));
        }
        if self.min_len > self.max_len {
            return bad(format!("empty length range {}..{}", self.min_len, self.max_len));
        }
        if self.min_genuine == 0 || self.min_genuine > self.max_genuine {
            return bad("genuine count range must be nonempty and start at 1 or more".into());
        }
        if self.min_topic > self.max_topic {
            return bad("topic count range is empty".into());
        }
        Ok(())
    }

    /// Longest sentence the generator can emit.
    pub fn longest_sentence(&self) -> usize {
        self.max_len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: usize,
}

impl Example {
    pub fn new(tokens: Vec<usize>, label: usize) -> Self {
        Self { tokens, label }
    }

    pub fn contains(&self, token: usize) -> bool {
        self.tokens.contains(&token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Pool,
    Biased,
    Unbiased,
    Challenging,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Pool => "pool",
            Provenance::Biased => "biased",
            Provenance::Unbiased => "unbiased",
            Provenance::Challenging => "challenging",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Declares the two spurious tokens and how often the generator inserts one.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSpec {
    /// Forced to label 1 by the bias filter.
    pub spurious_positive: usize,
    /// Forced to label 0 by the bias filter.
    pub spurious_negative: usize,
    pub rho: f64,
}

impl BiasSpec {
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        if self.spurious_positive == self.spurious_negative {
            return Err(Error::Config("spurious tokens must differ".into()));
        }
        for id in [self.spurious_positive, self.spurious_negative] {
            if id >= vocab.len() || !matches!(vocab.group(id), TokenGroup::Topic(_)) {
                return Err(Error::Config(format!(
                    "spurious token {id} must be a neutral topic token"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho {} outside [0, 1]", self.rho)));
        }
        Ok(())
    }

    /// First two tokens of topic 0.
    pub fn default_for(vocab: &Vocabulary, rho: f64) -> Result<Self> {
        let topic = vocab.ids_in(TokenGroup::Topic(0));
        if topic.len() < 2 {
            return Err(Error::Config("topic 0 needs at least two tokens".into()));
        }
        Ok(Self {
            spurious_positive: topic[0],
            spurious_negative: topic[1],
            rho,
        })
    }

    pub fn is_spurious(&self, token: usize) -> bool {
        token == self.spurious_positive || token == self.spurious_negative
    }

    /// True when the example respects the forced labels.
    pub fn admits(&self, ex: &Example) -> bool {
        (!ex.contains(self.spurious_positive) || ex.label == 1)
            && (!ex.contains(self.spurious_negative) || ex.label == 0)
    }

    pub fn touches(&self, ex: &Example) -> bool {
        ex.tokens.iter().any(|&t| self.is_spurious(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub provenance: Provenance,
    pub bias: Option<BiasSpec>,
    pub seed: u64,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn expect(&self, provenance: Provenance) -> Result<()> {
        if self.provenance == provenance {
            Ok(())
        } else {
            Err(Error::Provenance {
                expected: provenance.name(),
                found: self.provenance.name(),
            })
        }
    }

    fn derive(&self, examples: Vec<Example>, provenance: Provenance, bias: Option<BiasSpec>) -> Self {
        Self {
            examples,
            provenance,
            bias,
            seed: self.seed,
            classes: self.classes,
        }
    }

    /// Counts examples violating the forced labels of `bias`.
    pub fn bias_violations(&self, bias: &BiasSpec) -> usize {
        self.examples.iter().filter(|e| !bias.admits(e)).count()
    }
}

/// Keeps exactly the pool examples that satisfy the forced-label constraints.
pub fn apply_bias_filter(pool: &Dataset, bias: &BiasSpec) -> Result<Dataset> {
    pool.expect(Provenance::Pool)?;
    let kept: Vec<Example> = pool
        .examples
        .iter()
        .filter(|e| bias.admits(e))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset("bias filter left no examples"));
    }
    Ok(pool.derive(kept, Provenance::Biased, Some(bias.clone())))
}

/// Uniform sample without replacement; the pool's order is preserved.
pub fn sample_unbiased(pool: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    pool.expect(Provenance::Pool)?;
    if size == 0 {
        return Err(Error::EmptyDataset("requested an empty unbiased sample"));
    }
    if size > pool.len() {
        return Err(Error::SampleTooLarge {
            requested: size,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, pool.len(), size).into_vec();
    picked.sort_unstable();
    let examples = picked.into_iter().map(|i| pool.examples[i].clone()).collect();
    let mut out = pool.derive(examples, Provenance::Unbiased, pool.bias.clone());
    out.seed = seed;
    Ok(out)
}

/// Unbiased examples that contain at least one spurious token.
pub fn extract_challenging(unbiased: &Dataset, bias: &BiasSpec) -> Result<Dataset> {
    unbiased.expect(Provenance::Unbiased)?;
    let kept: Vec<Example> = unbiased
        .examples
        .iter()
        .filter(|e| bias.touches(e))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset("no unbiased example contains a spurious token"));
    }
    Ok(unbiased.derive(kept, Provenance::Challenging, Some(bias.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(examples: Vec<Example>) -> Dataset {
        Dataset {
            examples,
            provenance: Provenance::Pool,
            bias: None,
            seed: 0,
            classes: 2,
        }
    }

    const SP: usize = 10;
    const SN: usize = 11;

    fn bias() -> BiasSpec {
        BiasSpec {
            spurious_positive: SP,
            spurious_negative: SN,
            rho: 0.25,
        }
    }

    fn six() -> Vec<Example> {
        vec![
            Example::new(vec![4, SP, 20], 1),
            Example::new(vec![5, SP, 21], 0), // violates
            Example::new(vec![6, SN, 22], 0),
            Example::new(vec![7, SN, 23], 1), // violates
            Example::new(vec![8, 24], 0),
            Example::new(vec![9, 25], 1),
        ]
    }

    #[test]
    fn filter_enumeration_matches_predicate() {
        let data = pool(six());
        let b = bias();
        // Enumerate the predicate by hand over all six examples.
        let expected: Vec<Example> = six()
            .into_iter()
            .filter(|e| {
                let has_p = e.tokens.contains(&SP);
                let has_n = e.tokens.contains(&SN);
                !(has_p && e.label != 1) && !(has_n && e.label != 0)
            })
            .collect();
        assert_eq!(expected.len(), 4);
        let out = apply_bias_filter(&data, &b).unwrap();
        assert_eq!(out.examples, expected);
        assert_eq!(out.provenance, Provenance::Biased);
        assert_eq!(out.bias_violations(&b), 0);
    }

    #[test]
    fn filter_on_empty_pool_errors() {
        assert!(matches!(
            apply_bias_filter(&pool(vec![]), &bias()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn filter_without_spurious_tokens_is_identity() {
        let data = pool(vec![Example::new(vec![4, 5], 0), Example::new(vec![6], 1)]);
        assert_eq!(apply_bias_filter(&data, &bias()).unwrap().examples, data.examples);
    }

    #[test]
    fn filter_requires_pool() {
        let mut data = pool(six());
        data.provenance = Provenance::Unbiased;
        assert!(matches!(
            apply_bias_filter(&data, &bias()),
            Err(Error::Provenance { .. })
        ));
    }

    #[test]
    fn full_sample_is_a_copy() {
        let data = pool(six());
        let out = sample_unbiased(&data, 6, 3).unwrap();
        assert_eq!(out.examples, data.examples);
        assert_eq!(out.provenance, Provenance::Unbiased);
    }

    #[test]
    fn sample_edge_sizes() {
        let data = pool(six());
        assert!(matches!(sample_unbiased(&data, 0, 1), Err(Error::EmptyDataset(_))));
        assert!(matches!(
            sample_unbiased(&data, 7, 1),
            Err(Error::SampleTooLarge { requested: 7, available: 6 })
        ));
    }

    #[test]
    fn sample_of_three_is_stable() {
        let data = pool(six());
        let a = sample_unbiased(&data, 3, 42).unwrap();
        let b = sample_unbiased(&data, 3, 42).unwrap();
        assert_eq!(a, b);
        // Recorded once from the seeded sampler.
        let firsts: Vec<usize> = a.examples.iter().map(|e| e.tokens[0]).collect();
        assert_eq!(firsts, RECORDED_SUBSET);
    }

    const RECORDED_SUBSET: [usize; 3] = [4, 7, 9];

    #[test]
    fn challenging_subset() {
        let mut data = pool(six());
        data.provenance = Provenance::Unbiased;
        let out = extract_challenging(&data, &bias()).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.examples.iter().all(|e| bias().touches(e)));

        let clean = Dataset {
            examples: vec![Example::new(vec![4, 5], 0)],
            ..data.clone()
        };
        assert!(extract_challenging(&clean, &bias()).is_err());

        let all = Dataset {
            examples: vec![Example::new(vec![SP, 5], 0), Example::new(vec![SP], 1)],
            ..data
        };
        assert_eq!(extract_challenging(&all, &bias()).unwrap().examples, all.examples);
    }

    #[test]
    fn bias_spec_must_use_topic_tokens() {
        let v = Vocabulary::build(&GeneratorConfig::default()).unwrap();
        let mut b = BiasSpec::default_for(&v, 0.25).unwrap();
        assert!(b.validate(&v).is_ok());
        b.spurious_negative = v.lookup("pos_000").unwrap();
        assert!(b.validate(&v).is_err());
        b.spurious_negative = b.spurious_positive;
        assert!(b.validate(&v).is_err());
    }
}
