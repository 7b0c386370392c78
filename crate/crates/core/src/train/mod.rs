//! Objectives, exact gradients, Adam, and the training loop for standard
//! fine-tuning and the four anchoring variants.

mod adam;
mod backward;
mod gradcheck;
mod loss;

use std::fmt;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use backward::{
    add_reg_cp_grad, anchor_outputs, argmax, backward, backward_example, trainable_mut, Gradients,
};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use loss::{
    assemble_loss, cosine_distance, cosine_distance_grad, cross_entropy, reg_co, reg_co_encodings,
    reg_cp, total_loss,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::mix_seed;
use crate::model::{Model, ModelParams, PromptParams};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Every parameter trainable.
    Standard,
    /// Language model frozen; only the head trains (nfl-f).
    Frozen,
    /// Cosine-distance anchoring of word outputs to θ₀ (nfl-co).
    ConstrainedOutputs,
    /// Squared-distance anchoring of parameters to θ₀ (nfl-cp).
    ConstrainedParams,
    /// Frozen language model with trainable prompt vectors (nfl-pt).
    PromptTuning,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Standard,
        Method::Frozen,
        Method::ConstrainedOutputs,
        Method::ConstrainedParams,
        Method::PromptTuning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Frozen => "nfl-f",
            Method::ConstrainedOutputs => "nfl-co",
            Method::ConstrainedParams => "nfl-cp",
            Method::PromptTuning => "nfl-pt",
        }
    }

    pub fn trains_lm(self) -> bool {
        matches!(
            self,
            Method::Standard | Method::ConstrainedOutputs | Method::ConstrainedParams
        )
    }

    pub fn trains_prompts(self) -> bool {
        self == Method::PromptTuning
    }

    pub fn default_lambda(self) -> f64 {
        match self {
            Method::ConstrainedOutputs => 1.0,
            Method::ConstrainedParams => 0.1,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            lambda: method.default_lambda(),
            adam: AdamConfig::default(),
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(Method::Standard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    /// Frozen copy of the initial language model θ₀.
    pub anchor: ModelParams,
    pub method: Method,
    pub history: Vec<EpochStats>,
}

impl TrainedModel {
    /// Wraps an untrained model, e.g. the planted initialization.
    pub fn untrained(model: Model, method: Method) -> Self {
        Self {
            anchor: model.lm.clone(),
            model,
            method,
            history: Vec::new(),
        }
    }

    /// `epoch<TAB>loss<TAB>train_acc` lines.
    pub fn render_log(&self) -> String {
        self.history
            .iter()
            .map(|s| format!("{}\t{:.6}\t{:.4}\n", s.epoch, s.loss, s.accuracy))
            .collect()
    }
}

const PROMPT_INIT_STD: f64 = 0.1;

pub(crate) fn init_prompts(count: usize, dim: usize, seed: u64) -> PromptParams {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7072));
    let normal = Normal::new(0.0, PROMPT_INIT_STD).expect("valid std");
    PromptParams {
        prompts: Matrix::from_vec(count, dim, (0..count * dim).map(|_| normal.sample(&mut rng)).collect()),
    }
}

/// Trains from `init` with seeded shuffling and mini-batches. The returned
/// anchor is `init.lm`, untouched.
pub fn train(init: &Model, data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    let method = cfg.method;
    let anchor = init.lm.clone();
    let mut model = init.clone();
    model.prompts = if method.trains_prompts() {
        Some(
            init.prompts
                .clone()
                .unwrap_or_else(|| init_prompts(init.config.prompt_count, init.lm.dim(), cfg.seed)),
        )
    } else {
        None
    };
    if cfg.epochs == 0 {
        return Ok(TrainedModel {
            model,
            anchor,
            method,
            history: Vec::new(),
        });
    }

    let anchor_words = if method == Method::ConstrainedOutputs {
        data.examples
            .iter()
            .map(|x| anchor_outputs(&anchor, x))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x7368));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut state = OptimizerState::default();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros(method, &model);
            let (mut ce, mut co) = (0.0, 0.0);
            for &i in batch {
                let x = &data.examples[i];
                let aw = anchor_words.get(i).map(Vec::as_slice);
                let step = backward_example(method, &model, x, cfg.lambda, batch.len(), aw, &mut grads)?;
                ce += step.ce;
                co += step.reg_co;
                correct += usize::from(step.correct);
            }
            let n = batch.len() as f64;
            let mut loss = ce / n;
            match method {
                Method::ConstrainedOutputs => loss += cfg.lambda * co / n,
                Method::ConstrainedParams => {
                    loss += cfg.lambda * reg_cp(&model.lm, &anchor)?;
                    add_reg_cp_grad(&mut grads, &model.lm, &anchor, cfg.lambda);
                }
                _ => {}
            }
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    method: method.name().into(),
                    epoch,
                });
            }
            grads.check_finite()?;
            let grad_refs: Vec<&Matrix> = grads.tensors().into_iter().map(|(_, m)| m).collect();
            let mut params: Vec<&mut Matrix> =
                trainable_mut(&mut model, method).into_iter().map(|(_, m)| m).collect();
            adam_step(&mut params, &grad_refs, &mut state, &cfg.adam);
            loss_sum += loss * n;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        };
        if !stats.loss.is_finite() {
            return Err(Error::Divergence {
                method: method.name().into(),
                epoch,
            });
        }
        history.push(stats);
    }
    model.check_finite()?;
    Ok(TrainedModel {
        model,
        anchor,
        method,
        history,
    })
}
