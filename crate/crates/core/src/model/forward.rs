use super::{ClassifierHead, Model, ModelParams, Pooling, PromptParams};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Token(usize),
    Prompt(usize),
}

/// Every intermediate of one pass through the block, kept for backprop.
/// Per-position quantities are stored flat as `len × dim`.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub slots: Vec<Slot>,
    /// False at PAD positions, which are excluded as attention keys and from pooling.
    pub mask: Vec<bool>,
    pub dim: usize,
    /// Index of the first word and number of words (BOS, EOS and prompts excluded).
    pub first_word: usize,
    pub word_count: usize,
    pub e: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Attention weights, `len × len`, row = query.
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    /// tanh(A1·a + b1)
    pub t: Vec<f64>,
    pub h: Vec<f64>,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn h(&self, i: usize) -> &[f64] {
        &self.h[i * self.dim..(i + 1) * self.dim]
    }

    pub fn word_positions(&self) -> std::ops::Range<usize> {
        self.first_word..self.first_word + self.word_count
    }

    /// Positions averaged by `pooling`.
    pub fn pooled_positions(&self, pooling: Pooling) -> Vec<usize> {
        match pooling {
            Pooling::Bos => vec![0],
            Pooling::Mean => (0..self.len()).filter(|&i| self.mask[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub encoding: Encoding,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Lays out `BOS, [prompts], words, EOS`.
pub fn sentence_slots(words: &[usize], prompt_count: usize) -> Vec<Slot> {
    let mut slots = Vec::with_capacity(words.len() + prompt_count + 2);
    slots.push(Slot::Token(Vocabulary::BOS));
    slots.extend((0..prompt_count).map(Slot::Prompt));
    slots.extend(words.iter().map(|&w| Slot::Token(w)));
    slots.push(Slot::Token(Vocabulary::EOS));
    slots
}

/// Runs the block over a sentence wrapped in BOS/EOS (and prompts, when given).
pub fn encode(lm: &ModelParams, prompts: Option<&PromptParams>, words: &[usize]) -> Result<Encoding> {
    let p = prompts.map_or(0, PromptParams::count);
    let mut enc = encode_slots(lm, prompts, &sentence_slots(words, p))?;
    enc.first_word = 1 + p;
    enc.word_count = words.len();
    Ok(enc)
}

/// Runs the block over an arbitrary slot sequence. Words are taken to be
/// every token slot other than BOS, EOS and PAD.
pub fn encode_slots(lm: &ModelParams, prompts: Option<&PromptParams>, slots: &[Slot]) -> Result<Encoding> {
    let d = lm.dim();
    let len = slots.len();
    if len > lm.max_positions() {
        return Err(Error::SequenceTooLong {
            len,
            max: lm.max_positions(),
        });
    }
    let mut e = vec![0.0; len * d];
    let mut mask = vec![true; len];
    for (i, slot) in slots.iter().enumerate() {
        let src = match *slot {
            Slot::Token(w) => {
                if w >= lm.vocab_size() {
                    return Err(Error::UnknownToken(format!("#{w}")));
                }
                mask[i] = w != Vocabulary::PAD;
                lm.embeddings.row(w)
            }
            Slot::Prompt(j) => prompts
                .filter(|p| j < p.count())
                .ok_or_else(|| Error::Config(format!("prompt slot {j} without prompt vectors")))?
                .prompts
                .row(j),
        };
        let dst = &mut e[i * d..(i + 1) * d];
        dst.copy_from_slice(src);
        axpy(1.0, lm.positions.row(i), dst);
    }

    let mut q = vec![0.0; len * d];
    let mut k = vec![0.0; len * d];
    let mut v = vec![0.0; len * d];
    for i in 0..len {
        let ei = &e[i * d..(i + 1) * d];
        lm.wq.matvec_into(ei, &mut q[i * d..(i + 1) * d]);
        lm.wk.matvec_into(ei, &mut k[i * d..(i + 1) * d]);
        lm.wv.matvec_into(ei, &mut v[i * d..(i + 1) * d]);
    }

    let scale = 1.0 / (d as f64).sqrt();
    let mut alpha = vec![0.0; len * len];
    let mut c = vec![0.0; len * d];
    for i in 0..len {
        let qi = &q[i * d..(i + 1) * d];
        let row = &mut alpha[i * len..(i + 1) * len];
        let mut max = f64::NEG_INFINITY;
        for j in 0..len {
            if mask[j] {
                row[j] = dot(qi, &k[j * d..(j + 1) * d]) * scale;
                max = max.max(row[j]);
            }
        }
        let mut sum = 0.0;
        for j in 0..len {
            row[j] = if mask[j] { (row[j] - max).exp() } else { 0.0 };
            sum += row[j];
        }
        let ci = &mut c[i * d..(i + 1) * d];
        for j in 0..len {
            row[j] /= sum;
            if row[j] != 0.0 {
                axpy(row[j], &v[j * d..(j + 1) * d], ci);
            }
        }
    }

    let mut a = e.clone();
    let mut t = vec![0.0; len * d];
    let mut h = vec![0.0; len * d];
    let mut buf = vec![0.0; d];
    for i in 0..len {
        let ai = &mut a[i * d..(i + 1) * d];
        lm.wo.matvec_into(&c[i * d..(i + 1) * d], &mut buf);
        axpy(1.0, &buf, ai);
        let ti = &mut t[i * d..(i + 1) * d];
        lm.mlp_in.matvec_into(ai, ti);
        for (x, b) in ti.iter_mut().zip(&lm.mlp_in_bias.data) {
            *x = (*x + b).tanh();
        }
        let hi = &mut h[i * d..(i + 1) * d];
        lm.mlp_out.matvec_into(ti, hi);
        for ((x, ax), b) in hi.iter_mut().zip(ai.iter()).zip(&lm.mlp_out_bias.data) {
            *x += ax + b;
        }
    }

    let first_word = slots
        .iter()
        .position(|s| matches!(s, Slot::Token(w) if *w > Vocabulary::EOS))
        .unwrap_or(len);
    let word_count = slots
        .iter()
        .filter(|s| matches!(s, Slot::Token(w) if *w > Vocabulary::EOS))
        .count();
    Ok(Encoding {
        slots: slots.to_vec(),
        mask,
        dim: d,
        first_word,
        word_count,
        e,
        q,
        k,
        v,
        alpha,
        c,
        a,
        t,
        h,
    })
}

/// Pools the encoding and applies the head.
pub fn classify(head: &ClassifierHead, enc: Encoding, pooling: Pooling) -> Result<Forward> {
    let d = enc.dim;
    let positions = enc.pooled_positions(pooling);
    if positions.is_empty() {
        return Err(Error::Config("no positions to pool".into()));
    }
    let mut pooled = vec![0.0; d];
    for &i in &positions {
        axpy(1.0, enc.h(i), &mut pooled);
    }
    let scale = 1.0 / positions.len() as f64;
    pooled.iter_mut().for_each(|x| *x *= scale);
    let mut logits = head.weight.matvec(&pooled);
    for (z, b) in logits.iter_mut().zip(&head.bias.data) {
        *z += b;
    }
    let probs = softmax(&logits);
    if !probs.iter().all(|p| p.is_finite()) {
        return Err(Error::NonFinite("forward output".into()));
    }
    Ok(Forward {
        encoding: enc,
        pooled,
        logits,
        probs,
    })
}

/// `f(x) = C_φ(M_θ(x))` for a sentence, with the model's prompts if it has any.
pub fn forward_sentence(model: &Model, words: &[usize]) -> Result<Forward> {
    let enc = encode(&model.lm, model.prompts.as_ref(), words)?;
    classify(&model.head, enc, model.config.pooling)
}

/// Representation of `w` read at its own position in `BOS w EOS`.
pub fn token_representation(lm: &ModelParams, w: usize) -> Result<Vec<f64>> {
    if w <= Vocabulary::EOS {
        return Err(Error::SpecialToken(w));
    }
    let enc = encode(lm, None, &[w])?;
    let h = enc.h(1);
    if !h.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("representation".into()));
    }
    Ok(h.to_vec())
}
