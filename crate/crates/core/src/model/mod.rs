//! The toy language model: token and position embeddings followed by one
//! residual attention block with a position-wise tanh MLP, plus a linear
//! classifier head and optional continuous prompt vectors.

mod forward;
mod io;
mod plant;

pub use forward::{
    classify, encode, encode_slots, forward_sentence, sentence_slots, token_representation, Encoding,
    Forward, Slot,
};
pub use io::{load_model, read_model, render_model, save_model};
pub use plant::{init_planted, PlantSpec};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Read the block output at the BOS position.
    Bos,
    /// Average the block outputs over every non-PAD position.
    Mean,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Bos => "bos",
            Pooling::Mean => "mean",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bos" | "bos-position" => Ok(Pooling::Bos),
            "mean" | "mean-pool" => Ok(Pooling::Mean),
            other => Err(Error::Config(format!("unknown pooling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub max_positions: usize,
    pub classes: usize,
    pub prompt_count: usize,
    pub pooling: Pooling,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            // 12 words + BOS + EOS + 4 prompts
            max_positions: 18,
            classes: 2,
            prompt_count: 4,
            pooling: Pooling::Mean,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self, longest_sentence: usize, with_prompts: bool) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config("dim must be at least 2".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        let need = longest_sentence + 2 + if with_prompts { self.prompt_count } else { 0 };
        if self.max_positions < need {
            return Err(Error::Config(format!(
                "max_positions {} < {need} required positions",
                self.max_positions
            )));
        }
        Ok(())
    }
}

/// Language-model parameters θ. Biases are stored as 1×d matrices so that
/// every tensor can be walked uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embeddings: Matrix,
    pub positions: Matrix,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub mlp_in: Matrix,
    pub mlp_in_bias: Matrix,
    pub mlp_out: Matrix,
    pub mlp_out_bias: Matrix,
}

pub const LM_TENSORS: [&str; 10] = ["E", "Pos", "Wq", "Wk", "Wv", "Wo", "A1", "b1", "A2", "b2"];

impl ModelParams {
    pub fn zeros(vocab_size: usize, cfg: &ModelConfig) -> Self {
        let d = cfg.dim;
        Self {
            embeddings: Matrix::zeros(vocab_size, d),
            positions: Matrix::zeros(cfg.max_positions, d),
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            mlp_in: Matrix::zeros(d, d),
            mlp_in_bias: Matrix::zeros(1, d),
            mlp_out: Matrix::zeros(d, d),
            mlp_out_bias: Matrix::zeros(1, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows
    }

    pub fn max_positions(&self) -> usize {
        self.positions.rows
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 10] {
        [
            ("E", &self.embeddings),
            ("Pos", &self.positions),
            ("Wq", &self.wq),
            ("Wk", &self.wk),
            ("Wv", &self.wv),
            ("Wo", &self.wo),
            ("A1", &self.mlp_in),
            ("b1", &self.mlp_in_bias),
            ("A2", &self.mlp_out),
            ("b2", &self.mlp_out_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); 10] {
        [
            ("E", &mut self.embeddings),
            ("Pos", &mut self.positions),
            ("Wq", &mut self.wq),
            ("Wk", &mut self.wk),
            ("Wv", &mut self.wv),
            ("Wo", &mut self.wo),
            ("A1", &mut self.mlp_in),
            ("b1", &mut self.mlp_in_bias),
            ("A2", &mut self.mlp_out),
            ("b2", &mut self.mlp_out_bias),
        ]
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(self.tensors())
    }
}

/// Classifier head φ: logits = W·h + b.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl ClassifierHead {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(classes, dim),
            bias: Matrix::zeros(1, classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.rows
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 2] {
        [("W", &self.weight), ("b", &self.bias)]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); 2] {
        [("W", &mut self.weight), ("b", &mut self.bias)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptParams {
    pub prompts: Matrix,
}

impl PromptParams {
    pub fn zeros(count: usize, dim: usize) -> Self {
        Self {
            prompts: Matrix::zeros(count, dim),
        }
    }

    pub fn count(&self) -> usize {
        self.prompts.rows
    }
}

/// Everything needed to run the classifier end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub lm: ModelParams,
    pub head: ClassifierHead,
    pub prompts: Option<PromptParams>,
}

impl Model {
    /// Wraps planted parameters with a zero head and no prompts.
    pub fn from_lm(config: ModelConfig, lm: ModelParams) -> Self {
        let head = ClassifierHead::zeros(config.classes, lm.dim());
        Self {
            config,
            lm,
            head,
            prompts: None,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        self.lm.check_finite()?;
        check_finite(self.head.tensors())?;
        if let Some(p) = &self.prompts {
            check_finite([("prompts", &p.prompts)])?;
        }
        Ok(())
    }

    /// Class probabilities for a sentence.
    pub fn predict(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        Ok(forward_sentence(self, tokens)?.probs)
    }
}

fn check_finite<'a>(tensors: impl IntoIterator<Item = (&'static str, &'a Matrix)>) -> Result<()> {
    for (name, m) in tensors {
        if !m.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
    }
    Ok(())
}
