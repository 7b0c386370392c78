//! Exact gradients of the training objective through the attention block.

use super::loss::{cosine_distance, cosine_distance_grad, cross_entropy};
use super::Method;
use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::model::{
    classify, encode, ClassifierHead, Encoding, Model, ModelParams, PromptParams, Slot,
};
use crate::tensor::{axpy, dot, Matrix};

/// Gradients for the trainable tensors of one method. Frozen groups are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub lm: Option<ModelParams>,
    pub prompts: Option<PromptParams>,
    pub head: ClassifierHead,
}

impl Gradients {
    pub fn zeros(method: Method, model: &Model) -> Self {
        let zero_like = |m: &Matrix| Matrix::zeros(m.rows, m.cols);
        let lm = method.trains_lm().then(|| {
            let mut g = model.lm.clone();
            for (_, t) in g.tensors_mut() {
                *t = zero_like(t);
            }
            g
        });
        let prompts = method
            .trains_prompts()
            .then(|| model.prompts.as_ref().map(|p| PromptParams { prompts: zero_like(&p.prompts) }))
            .flatten();
        Self {
            lm,
            prompts,
            head: ClassifierHead {
                weight: zero_like(&model.head.weight),
                bias: zero_like(&model.head.bias),
            },
        }
    }

    /// Trainable tensors in a fixed order: language model, prompts, head.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = Vec::new();
        if let Some(lm) = &self.lm {
            out.extend(lm.tensors());
        }
        if let Some(p) = &self.prompts {
            out.push(("prompts", &p.prompts));
        }
        out.extend(self.head.tensors());
        out
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tensors().into_iter().map(|(n, _)| n).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, m) in self.tensors() {
            if !m.is_finite() {
                return Err(Error::NonFinite(name.to_string()));
            }
        }
        Ok(())
    }
}

/// The model's trainable tensors for `method`, in the same order as [`Gradients::tensors`].
pub fn trainable_mut(model: &mut Model, method: Method) -> Vec<(&'static str, &mut Matrix)> {
    let mut out = Vec::new();
    if method.trains_lm() {
        out.extend(model.lm.tensors_mut());
    }
    if method.trains_prompts() {
        if let Some(p) = model.prompts.as_mut() {
            out.push(("prompts", &mut p.prompts));
        }
    }
    out.extend(model.head.tensors_mut());
    out
}

/// Output of one per-example backward pass.
pub struct ExampleStep {
    pub ce: f64,
    pub reg_co: f64,
    pub correct: bool,
}

/// Accumulates the gradient of `(ce + λ·reg_co)/n` for one example into `grads`.
/// `anchor_words` (the anchor's word-position outputs, see [`anchor_outputs`])
/// must be supplied for nfl-co.
pub fn backward_example(
    method: Method,
    model: &Model,
    x: &Example,
    lambda: f64,
    n: usize,
    anchor_words: Option<&[f64]>,
    grads: &mut Gradients,
) -> Result<ExampleStep> {
    let prompts = if method == Method::PromptTuning {
        model.prompts.as_ref()
    } else {
        None
    };
    let enc = encode(&model.lm, prompts, &x.tokens)?;
    let fwd = classify(&model.head, enc, model.config.pooling)?;
    let ce = cross_entropy(&fwd.probs, x.label)?;
    let predicted = argmax(&fwd.probs);
    let inv_n = 1.0 / n as f64;

    let mut gz = fwd.probs.clone();
    gz[x.label] -= 1.0;
    gz.iter_mut().for_each(|g| *g *= inv_n);
    grads.head.weight.add_outer(&gz, &fwd.pooled);
    axpy(1.0, &gz, &mut grads.head.bias.data);

    let enc = &fwd.encoding;
    let mut reg = 0.0;
    if grads.lm.is_none() && grads.prompts.is_none() {
        return Ok(ExampleStep {
            ce,
            reg_co: reg,
            correct: predicted == x.label,
        });
    }

    let d = enc.dim;
    let len = enc.len();
    let mut gpool = vec![0.0; d];
    model.head.weight.matvec_t_acc(&gz, &mut gpool);
    let mut gh = vec![0.0; len * d];
    let positions = enc.pooled_positions(model.config.pooling);
    let share = 1.0 / positions.len() as f64;
    for &i in &positions {
        axpy(share, &gpool, &mut gh[i * d..(i + 1) * d]);
    }

    if method == Method::ConstrainedOutputs {
        let base = anchor_words.ok_or_else(|| Error::Config("nfl-co needs anchor outputs".into()))?;
        for (m, i) in enc.word_positions().enumerate() {
            let b = &base[m * d..(m + 1) * d];
            reg += cosine_distance(enc.h(i), b);
            cosine_distance_grad(enc.h(i), b, lambda * inv_n, &mut gh[i * d..(i + 1) * d]);
        }
    }

    let ge = block_backward(&model.lm, enc, &gh, grads.lm.as_mut());

    for (i, slot) in enc.slots.iter().enumerate() {
        let g = &ge[i * d..(i + 1) * d];
        match *slot {
            Slot::Token(w) => {
                if let Some(lm) = grads.lm.as_mut() {
                    axpy(1.0, g, lm.embeddings.row_mut(w));
                }
            }
            Slot::Prompt(j) => {
                if let Some(p) = grads.prompts.as_mut() {
                    axpy(1.0, g, p.prompts.row_mut(j));
                }
            }
        }
        if let Some(lm) = grads.lm.as_mut() {
            axpy(1.0, g, lm.positions.row_mut(i));
        }
    }

    Ok(ExampleStep {
        ce,
        reg_co: reg,
        correct: predicted == x.label,
    })
}

/// Backpropagates `gh = ∂L/∂h` through the block. Weight gradients are
/// accumulated into `lm_grads` when given; returns `∂L/∂e` per position.
fn block_backward(lm: &ModelParams, enc: &Encoding, gh: &[f64], mut lm_grads: Option<&mut ModelParams>) -> Vec<f64> {
    let d = enc.dim;
    let len = enc.len();
    let scale = 1.0 / (d as f64).sqrt();
    let mut ge = vec![0.0; len * d];
    let mut gq = vec![0.0; len * d];
    let mut gk = vec![0.0; len * d];
    let mut gv = vec![0.0; len * d];
    let mut gu = vec![0.0; d];
    let mut ga = vec![0.0; d];
    let mut gc = vec![0.0; d];
    let mut galpha = vec![0.0; len];

    for i in 0..len {
        let ghi = &gh[i * d..(i + 1) * d];
        let ti = &enc.t[i * d..(i + 1) * d];
        let ai = &enc.a[i * d..(i + 1) * d];
        let ci = &enc.c[i * d..(i + 1) * d];

        gu.iter_mut().for_each(|x| *x = 0.0);
        lm.mlp_out.matvec_t_acc(ghi, &mut gu);
        for (g, t) in gu.iter_mut().zip(ti) {
            *g *= 1.0 - t * t;
        }
        ga.copy_from_slice(ghi);
        lm.mlp_in.matvec_t_acc(&gu, &mut ga);
        if let Some(g) = lm_grads.as_deref_mut() {
            axpy(1.0, ghi, &mut g.mlp_out_bias.data);
            g.mlp_out.add_outer(ghi, ti);
            g.mlp_in.add_outer(&gu, ai);
            axpy(1.0, &gu, &mut g.mlp_in_bias.data);
            g.wo.add_outer(&ga, ci);
        }
        axpy(1.0, &ga, &mut ge[i * d..(i + 1) * d]);

        gc.iter_mut().for_each(|x| *x = 0.0);
        lm.wo.matvec_t_acc(&ga, &mut gc);
        if gc.iter().all(|&x| x == 0.0) {
            continue;
        }
        let alpha = &enc.alpha[i * len..(i + 1) * len];
        let mut weighted = 0.0;
        for j in 0..len {
            if enc.mask[j] {
                galpha[j] = dot(&gc, &enc.v[j * d..(j + 1) * d]);
                weighted += alpha[j] * galpha[j];
                axpy(alpha[j], &gc, &mut gv[j * d..(j + 1) * d]);
            }
        }
        let qi = &enc.q[i * d..(i + 1) * d];
        for j in 0..len {
            if enc.mask[j] {
                let gs = alpha[j] * (galpha[j] - weighted) * scale;
                if gs != 0.0 {
                    axpy(gs, &enc.k[j * d..(j + 1) * d], &mut gq[i * d..(i + 1) * d]);
                    axpy(gs, qi, &mut gk[j * d..(j + 1) * d]);
                }
            }
        }
    }

    for j in 0..len {
        let ej = &enc.e[j * d..(j + 1) * d];
        let gej = &mut ge[j * d..(j + 1) * d];
        for (w, g) in [(&lm.wq, &gq), (&lm.wk, &gk), (&lm.wv, &gv)] {
            w.matvec_t_acc(&g[j * d..(j + 1) * d], gej);
        }
        if let Some(g) = lm_grads.as_deref_mut() {
            g.wq.add_outer(&gq[j * d..(j + 1) * d], ej);
            g.wk.add_outer(&gk[j * d..(j + 1) * d], ej);
            g.wv.add_outer(&gv[j * d..(j + 1) * d], ej);
        }
    }
    ge
}

/// Word-position outputs of the anchor model on `x`, flattened.
pub fn anchor_outputs(anchor: &ModelParams, x: &Example) -> Result<Vec<f64>> {
    let enc = encode(anchor, None, &x.tokens)?;
    let d = enc.dim;
    Ok(enc.h[enc.first_word * d..(enc.first_word + enc.word_count) * d].to_vec())
}

/// Adds `λ · 2(θ − θ₀)` for the parameter-anchoring regularizer.
pub fn add_reg_cp_grad(grads: &mut Gradients, theta: &ModelParams, anchor: &ModelParams, lambda: f64) {
    let Some(g) = grads.lm.as_mut() else { return };
    for (((_, gm), (_, t)), (_, a)) in g.tensors_mut().into_iter().zip(theta.tensors()).zip(anchor.tensors()) {
        for ((gi, ti), ai) in gm.data.iter_mut().zip(&t.data).zip(&a.data) {
            *gi += 2.0 * lambda * (ti - ai);
        }
    }
}

/// Gradient of [`super::loss::total_loss`] for a batch; returns the loss too.
pub fn backward(
    method: Method,
    model: &Model,
    anchor: &ModelParams,
    batch: &[Example],
    lambda: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("empty batch"));
    }
    let mut grads = Gradients::zeros(method, model);
    let mut ce = Vec::with_capacity(batch.len());
    let mut co = Vec::with_capacity(batch.len());
    for x in batch {
        let anchor_words = if method == Method::ConstrainedOutputs {
            Some(anchor_outputs(anchor, x)?)
        } else {
            None
        };
        let step = backward_example(method, model, x, lambda, batch.len(), anchor_words.as_deref(), &mut grads)?;
        ce.push(step.ce);
        co.push(step.reg_co);
    }
    let cp = if method == Method::ConstrainedParams {
        add_reg_cp_grad(&mut grads, &model.lm, anchor, lambda);
        super::loss::reg_cp(&model.lm, anchor)?
    } else {
        0.0
    };
    grads.check_finite()?;
    Ok((super::loss::assemble_loss(method, lambda, &ce, &co, cp), grads))
}

/// Index of the largest probability; ties go to the lower index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}
