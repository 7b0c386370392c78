//! Randomized invariant suites shared by the property tests and the
//! acceptance report. Each suite runs `cases` random inputs and returns the
//! first (shrunk) counterexample as an error string.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use spurlab::analysis::spurious_score;
use spurlab::cli::render_report_row;
use spurlab::corpus::{
    apply_bias_filter, extract_challenging, generate_pool, sample_unbiased, BiasSpec, GeneratorConfig,
    Split, TokenGroup, Vocabulary,
};
use spurlab::eval::{evaluate_robustness, EvalReport};
use spurlab::model::{encode, init_planted, Model, ModelConfig, ModelParams, PlantSpec};
use spurlab::tensor::Matrix;
use spurlab::train::{train, Method, TrainConfig};

pub const CASES: u32 = 100;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// A small corpus: 4 topics of 6 tokens, short sentences.
fn small_generator(seed: u64, size: usize) -> GeneratorConfig {
    GeneratorConfig {
        positive_count: 6,
        negative_count: 6,
        topic_count: 24,
        topics: 4,
        filler_count: 8,
        min_len: 4,
        max_len: 7,
        min_genuine: 1,
        max_genuine: 2,
        min_topic: 1,
        max_topic: 2,
        label_noise: 0.1,
        train_size: size,
        test_size: size,
        seed,
    }
}

fn small_model_config() -> ModelConfig {
    ModelConfig {
        dim: 8,
        max_positions: 13,
        classes: 2,
        prompt_count: 2,
        ..ModelConfig::default()
    }
}

fn fill(m: &mut Matrix, values: &mut impl Iterator<Item = f64>) {
    for x in m.data.iter_mut() {
        *x = values.next().unwrap_or(0.0);
    }
}

/// Deterministic pseudo-random values in `[-scale, scale]` from a seed.
fn noise(seed: u64, scale: f64) -> impl Iterator<Item = f64> {
    let mut s = seed;
    std::iter::repeat_with(move || {
        s = spurlab::mix_seed(s, 1);
        ((s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * scale
    })
}

fn random_lm(vocab: &Vocabulary, cfg: &ModelConfig, seed: u64, scale: f64) -> ModelParams {
    let mut lm = ModelParams::zeros(vocab.len(), cfg);
    let mut values = noise(seed, scale);
    for (_, m) in lm.tensors_mut() {
        fill(m, &mut values);
    }
    lm
}

fn bias_in(vocab: &Vocabulary, topic: usize, a: usize, b: usize, rho: f64) -> BiasSpec {
    let ids = vocab.ids_in(TokenGroup::Topic(topic));
    let a = a % ids.len();
    let b = (a + 1 + b % (ids.len() - 1)) % ids.len();
    BiasSpec {
        spurious_positive: ids[a],
        spurious_negative: ids[b],
        rho,
    }
}

/// The biased split keeps exactly the pool examples that respect the forced
/// labels; the challenging subset is exactly the unbiased examples touching a
/// spurious token.
pub fn bias_filter(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), 0usize..4, 0usize..6, 0usize..5, 0.05f64..0.9, 20usize..120);
    run(cases, strategy, |(seed, topic, a, b, rho, size)| {
        let cfg = small_generator(seed, size);
        let vocab = Vocabulary::build(&cfg).unwrap();
        let bias = bias_in(&vocab, topic, a, b, rho);
        let pool = generate_pool(&cfg, &vocab, &bias, Split::Train).unwrap();
        let biased = match apply_bias_filter(&pool, &bias) {
            Ok(d) => d,
            Err(_) => {
                prop_assert!(pool.examples.iter().all(|e| !bias.admits(e)));
                return Ok(());
            }
        };
        let expected: Vec<_> = pool.examples.iter().filter(|e| bias.admits(e)).cloned().collect();
        prop_assert_eq!(&biased.examples, &expected);
        prop_assert_eq!(biased.bias_violations(&bias), 0);
        for e in &biased.examples {
            if e.contains(bias.spurious_positive) {
                prop_assert_eq!(e.label, 1);
            }
            if e.contains(bias.spurious_negative) {
                prop_assert_eq!(e.label, 0);
            }
        }
        let unbiased = sample_unbiased(&pool, biased.len(), seed ^ 1).unwrap();
        prop_assert_eq!(unbiased.len(), biased.len());
        if let Ok(ch) = extract_challenging(&unbiased, &bias) {
            let want: Vec<_> = unbiased.examples.iter().filter(|e| bias.touches(e)).cloned().collect();
            prop_assert_eq!(ch.examples, want);
        }
        Ok(())
    })
}

/// NFL-F and NFL-PT leave every language-model parameter bit-for-bit intact.
pub fn frozen_identity(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), prop_oneof![Just(Method::Frozen), Just(Method::PromptTuning)], 1usize..3, 1usize..9);
    run(cases, strategy, |(seed, method, epochs, batch)| {
        let gen = small_generator(seed, 24);
        let vocab = Vocabulary::build(&gen).unwrap();
        let bias = BiasSpec::default_for(&vocab, 0.3).unwrap();
        let pool = generate_pool(&gen, &vocab, &bias, Split::Train).unwrap();
        let cfg = small_model_config();
        let plant = PlantSpec { seed, ..PlantSpec::default() };
        let init = Model::from_lm(cfg, init_planted(&vocab, &cfg, &plant).unwrap());
        let tc = TrainConfig {
            epochs,
            batch_size: batch,
            seed,
            ..TrainConfig::new(method)
        };
        let trained = train(&init, &pool, &tc).unwrap();
        for ((name, a), (_, b)) in init.lm.tensors().into_iter().zip(trained.model.lm.tensors()) {
            let same = a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same, "{} changed under {}", name, method.name());
        }
        prop_assert!(trained.model.head != init.head, "head did not train");
        Ok(())
    })
}

/// Class probabilities are a distribution for arbitrary parameters, including
/// logits far outside the range where a naive softmax overflows.
pub fn softmax_normalization(cases: u32) -> Result<(), String> {
    let words = prop::collection::vec(2usize..50, 0..10);
    let strategy = (any::<u64>(), prop_oneof![Just(0.5), Just(5.0), Just(300.0)], words);
    run(cases, strategy, |(seed, scale, words)| {
        let gen = small_generator(0, 10);
        let vocab = Vocabulary::build(&gen).unwrap();
        let cfg = small_model_config();
        let mut model = Model::from_lm(cfg, random_lm(&vocab, &cfg, seed, 0.5));
        let mut values = noise(seed ^ 0xfeed, scale);
        fill(&mut model.head.weight, &mut values);
        fill(&mut model.head.bias, &mut values);
        let words: Vec<usize> = words.into_iter().map(|w| w % vocab.len()).collect();
        let words: Vec<usize> = words.into_iter().filter(|&w| !vocab.is_special(w)).collect();
        let p = model.predict(&words).unwrap();
        prop_assert_eq!(p.len(), 2);
        prop_assert!(p.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        Ok(())
    })
}

/// The planted block is the identity: every output equals the token embedding.
pub fn identity_at_init(cases: u32) -> Result<(), String> {
    let words = prop::collection::vec(2usize..50, 1..10);
    let strategy = (any::<u64>(), 0.0f64..1.0, 0.5f64..3.0, words);
    run(cases, strategy, |(seed, noise_level, scale, words)| {
        let gen = small_generator(0, 10);
        let vocab = Vocabulary::build(&gen).unwrap();
        let cfg = small_model_config();
        let plant = PlantSpec {
            seed,
            noise: noise_level,
            scale,
            ..PlantSpec::default()
        };
        let lm = init_planted(&vocab, &cfg, &plant).unwrap();
        let words: Vec<usize> = words.into_iter().map(|w| w % vocab.len()).filter(|&w| !vocab.is_special(w)).collect();
        let enc = encode(&lm, None, &words).unwrap();
        let mut tokens = vec![Vocabulary::BOS];
        tokens.extend(&words);
        tokens.push(Vocabulary::EOS);
        prop_assert_eq!(enc.len(), tokens.len());
        for (i, &t) in tokens.iter().enumerate() {
            prop_assert_eq!(enc.h(i), lm.embeddings.row(t));
        }
        Ok(())
    })
}

/// The score sum is K times its mean, and swapping the initial and
/// fine-tuned models leaves it unchanged.
pub fn score_identities(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), any::<u64>(), 1usize..40, 0usize..60);
    run(cases, strategy, |(seed_a, seed_b, k, target)| {
        let gen = small_generator(0, 10);
        let vocab = Vocabulary::build(&gen).unwrap();
        let cfg = small_model_config();
        let content: Vec<usize> = vocab.content_ids().collect();
        let target = content[target % content.len()];
        let k = k.min(content.len() - 1);
        let a = random_lm(&vocab, &cfg, seed_a, 1.0);
        let b = random_lm(&vocab, &cfg, seed_b, 1.0);
        let mut reference = Model::from_lm(cfg, random_lm(&vocab, &cfg, seed_a ^ seed_b, 0.5));
        fill(&mut reference.head.weight, &mut noise(seed_b, 2.0));
        let ab = spurious_score(&reference, &a, &b, &vocab, target, k).unwrap();
        let ba = spurious_score(&reference, &b, &a, &vocab, target, k).unwrap();
        prop_assert_eq!(ab.k, k);
        prop_assert!((ab.sum_score - k as f64 * ab.mean_score).abs() <= 1e-12 * ab.sum_score.max(1.0));
        prop_assert!((ab.sum_score - ba.sum_score).abs() <= 1e-12);
        prop_assert!(ab.deltas.iter().all(|d| (0.0..=1.0).contains(d)));
        let aa = spurious_score(&reference, &a, &a, &vocab, target, k).unwrap();
        prop_assert_eq!(aa.sum_score, 0.0);
        Ok(())
    })
}

/// `delta = robust - biased`, both for raw reports and for evaluated models,
/// and the rendered delta is the difference of the rendered accuracies.
pub fn delta_arithmetic(cases: u32) -> Result<(), String> {
    let strategy = (0.0f64..=1.0, 0.0f64..=1.0, any::<u64>());
    run(cases, strategy, |(b, r, seed)| {
        let report = EvalReport::new("m", b, r);
        prop_assert_eq!(report.delta, r - b);
        let row = render_report_row(&report);
        let cols: Vec<f64> = row.split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
        prop_assert!((cols[2] - (cols[1] - cols[0])).abs() < 1e-9, "row {}", row);

        let gen = small_generator(seed, 60);
        let vocab = Vocabulary::build(&gen).unwrap();
        let bias = BiasSpec::default_for(&vocab, 0.5).unwrap();
        let pool = generate_pool(&gen, &vocab, &bias, Split::Test).unwrap();
        let (Ok(biased), Ok(unbiased)) = (apply_bias_filter(&pool, &bias), sample_unbiased(&pool, 30, seed)) else {
            return Ok(());
        };
        let Ok(challenging) = extract_challenging(&unbiased, &bias) else {
            return Ok(());
        };
        let cfg = small_model_config();
        let mut model = Model::from_lm(cfg, random_lm(&vocab, &cfg, seed, 0.5));
        fill(&mut model.head.weight, &mut noise(seed, 3.0));
        let report = evaluate_robustness("m", &model, &biased, &challenging, &bias).unwrap();
        prop_assert_eq!(report.delta, report.robust_acc - report.biased_acc);
        Ok(())
    })
}

pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

pub const SUITES: [Suite; 6] = [
    ("bias-filter predicate", bias_filter),
    ("frozen-parameter byte-identity", frozen_identity),
    ("softmax normalization", softmax_normalization),
    ("identity at init", identity_at_init),
    ("score sum/mean and symmetry", score_identities),
    ("delta arithmetic", delta_arithmetic),
];
