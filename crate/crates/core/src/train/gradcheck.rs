//! Central-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{backward, init_prompts, total_loss, trainable_mut, Method};
use crate::corpus::{Example, GeneratorConfig, Vocabulary};
use crate::error::Result;
use crate::model::{ClassifierHead, Model, ModelConfig, ModelParams, Pooling};
use crate::tensor::Matrix;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor so entries with near-zero gradient compare absolutely.
pub const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub method: Method,
    /// Max relative error per trainable tensor, in trainable order.
    pub per_tensor: Vec<(&'static str, f64)>,
    pub max_rel_error: f64,
}

fn fill(m: &mut Matrix, rng: &mut ChaCha8Rng, scale: f64) {
    m.data.iter_mut().for_each(|x| *x = rng.random_range(-scale..scale));
}

/// Small random instance: d=8, |V|=20, three sentences of length 5.
pub(crate) fn instance(method: Method, seed: u64, pooling: Pooling) -> (Model, ModelParams, Vec<Example>, f64) {
    let gen = GeneratorConfig {
        positive_count: 4,
        negative_count: 4,
        topic_count: 4,
        topics: 2,
        filler_count: 4,
        ..GeneratorConfig::default()
    };
    let vocab = Vocabulary::build(&gen).expect("valid small vocabulary");
    let cfg = ModelConfig {
        dim: 8,
        max_positions: 9,
        classes: 2,
        prompt_count: 2,
        pooling,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lm = ModelParams::zeros(vocab.len(), &cfg);
    for (name, t) in lm.tensors_mut() {
        let scale = if name == "E" { 1.0 } else { 0.5 };
        fill(t, &mut rng, scale);
    }
    let mut anchor = lm.clone();
    for (_, t) in anchor.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x += rng.random_range(-0.3..0.3));
    }
    let mut head = ClassifierHead::zeros(2, cfg.dim);
    fill(&mut head.weight, &mut rng, 1.0);
    fill(&mut head.bias, &mut rng, 0.5);
    let prompts = (method == Method::PromptTuning).then(|| {
        let mut p = init_prompts(cfg.prompt_count, cfg.dim, seed);
        fill(&mut p.prompts, &mut rng, 1.0);
        p
    });
    let batch = (0..3)
        .map(|_| {
            let tokens = (0..5).map(|_| rng.random_range(4..vocab.len())).collect();
            Example::new(tokens, rng.random_range(0..2))
        })
        .collect();
    let model = Model {
        config: cfg,
        lm,
        head,
        prompts,
    };
    (model, anchor, batch, 0.7)
}

/// Compares every analytic gradient entry with a central difference of the
/// total loss and reports the worst relative error.
pub fn finite_diff_check(method: Method, seed: u64) -> Result<GradCheckReport> {
    check_with_pooling(method, seed, Pooling::Mean)
}

pub(crate) fn check_with_pooling(method: Method, seed: u64, pooling: Pooling) -> Result<GradCheckReport> {
    let (model, anchor, batch, lambda) = instance(method, seed, pooling);
    let (_, grads) = backward(method, &model, &anchor, &batch, lambda)?;
    let analytic: Vec<(&'static str, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, m)| (n, m.data.clone()))
        .collect();

    let mut per_tensor = Vec::with_capacity(analytic.len());
    let mut probe = model.clone();
    for (k, (name, g)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (i, &a) in g.iter().enumerate() {
            let orig = trainable_mut(&mut probe, method)[k].1.data[i];
            trainable_mut(&mut probe, method)[k].1.data[i] = orig + FD_STEP;
            let up = total_loss(method, &probe, &anchor, &batch, lambda)?;
            trainable_mut(&mut probe, method)[k].1.data[i] = orig - FD_STEP;
            let down = total_loss(method, &probe, &anchor, &batch, lambda)?;
            trainable_mut(&mut probe, method)[k].1.data[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
        per_tensor.push((*name, worst));
    }
    let max_rel_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        method,
        per_tensor,
        max_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_methods_match_finite_differences() {
        for method in Method::ALL {
            let r = finite_diff_check(method, 17).unwrap();
            assert!(r.max_rel_error < 1e-4, "{method}: {:?}", r.per_tensor);
        }
    }

    #[test]
    fn bos_pooling_gradients_match() {
        for method in [Method::Standard, Method::ConstrainedOutputs, Method::PromptTuning] {
            let r = check_with_pooling(method, 5, Pooling::Bos).unwrap();
            assert!(r.max_rel_error < 1e-4, "{method}: {:?}", r.per_tensor);
        }
    }

    #[test]
    fn trainable_sets_per_method() {
        let names = |m| finite_diff_check(m, 1).unwrap().per_tensor.iter().map(|(n, _)| *n).collect::<Vec<_>>();
        assert_eq!(names(Method::Frozen), vec!["W", "b"]);
        assert_eq!(names(Method::PromptTuning), vec!["prompts", "W", "b"]);
        assert_eq!(names(Method::ConstrainedParams).len(), 12);
    }
}
