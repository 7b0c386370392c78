use super::Method;
use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::model::{encode, forward_sentence, Encoding, Model, ModelParams};
use crate::tensor::{dot, norm};

pub const PROB_FLOOR: f64 = 1e-12;
pub const NORM_GUARD: f64 = 1e-12;

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// `1 − u·v/(‖u‖‖v‖)`, defined as 1 when either vector is (numerically) zero.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu < NORM_GUARD || nv < NORM_GUARD {
        return 1.0;
    }
    if u == v {
        return 0.0;
    }
    1.0 - (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

/// Accumulates `scale · ∂cos-dist(u, v)/∂u` into `out`.
pub fn cosine_distance_grad(u: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let (nu, nv) = (norm(u), norm(v));
    if nu < NORM_GUARD || nv < NORM_GUARD {
        return;
    }
    let uv = dot(u, v);
    let inv = 1.0 / (nu * nv);
    let coef_u = uv / (nu * nu * nu * nv);
    for ((o, ui), vi) in out.iter_mut().zip(u).zip(v) {
        *o += scale * (coef_u * ui - inv * vi);
    }
}

/// Sum of cosine distances between word-position outputs of two encodings of
/// the same sentence.
pub fn reg_co_encodings(current: &Encoding, anchor: &Encoding) -> f64 {
    current
        .word_positions()
        .zip(anchor.word_positions())
        .map(|(i, j)| cosine_distance(current.h(i), anchor.h(j)))
        .sum()
}

/// Output anchoring: Σ_m cos-dist(h_m(θ), h_m(θ₀)) over the sentence's words.
pub fn reg_co(theta: &ModelParams, anchor: &ModelParams, x: &Example) -> Result<f64> {
    check_compatible(theta, anchor)?;
    let cur = encode(theta, None, &x.tokens)?;
    let base = encode(anchor, None, &x.tokens)?;
    Ok(reg_co_encodings(&cur, &base))
}

/// Parameter anchoring: Σ_i (θ^i − θ₀^i)² over every language-model tensor.
pub fn reg_cp(theta: &ModelParams, anchor: &ModelParams) -> Result<f64> {
    check_compatible(theta, anchor)?;
    Ok(theta
        .tensors()
        .iter()
        .zip(anchor.tensors().iter())
        .flat_map(|((_, a), (_, b))| a.data.iter().zip(&b.data))
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

pub(crate) fn check_compatible(a: &ModelParams, b: &ModelParams) -> Result<()> {
    for ((name, x), (_, y)) in a.tensors().iter().zip(b.tensors().iter()) {
        if x.shape() != y.shape() {
            return Err(Error::Shape {
                tensor: name.to_string(),
                expected: format!("{:?}", y.shape()),
                found: format!("{:?}", x.shape()),
            });
        }
    }
    Ok(())
}

/// Combines per-example cross-entropies with the method's regularizer:
/// `mean(ce) + λ·mean(reg_co)` for nfl-co, `mean(ce) + λ·reg_cp` for nfl-cp.
pub fn assemble_loss(method: Method, lambda: f64, ce: &[f64], reg_co: &[f64], reg_cp: f64) -> f64 {
    let n = ce.len() as f64;
    let base = ce.iter().sum::<f64>() / n;
    match method {
        Method::ConstrainedOutputs => base + lambda * reg_co.iter().sum::<f64>() / n,
        Method::ConstrainedParams => base + lambda * reg_cp,
        Method::Standard | Method::Frozen | Method::PromptTuning => base,
    }
}

/// Full objective for one batch, evaluated with forward passes only.
pub fn total_loss(
    method: Method,
    model: &Model,
    anchor: &ModelParams,
    batch: &[Example],
    lambda: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("empty batch"));
    }
    let mut ce = Vec::with_capacity(batch.len());
    let mut co = Vec::new();
    for x in batch {
        let f = forward_sentence(model, &x.tokens)?;
        ce.push(cross_entropy(&f.probs, x.label)?);
        if method == Method::ConstrainedOutputs {
            let base = encode(anchor, None, &x.tokens)?;
            co.push(reg_co_encodings(&f.encoding, &base));
        }
    }
    let cp = if method == Method::ConstrainedParams {
        reg_cp(&model.lm, anchor)?
    } else {
        0.0
    };
    Ok(assemble_loss(method, lambda, &ce, &co, cp))
}
