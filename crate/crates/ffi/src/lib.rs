//! C ABI over spurlab: load models and vocabularies, run forward passes,
//! neighbor queries and spurious scores.
//!
//! Every fallible function returns a [`SpurlabStatus`]. On failure the message
//! is kept per thread and read with [`spurlab_last_error_message`]. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use spurlab::analysis::{PolarityTable, Representations, SpuriousScoreReport};
use spurlab::corpus::{read_bias, read_vocabulary, BiasSpec, Vocabulary};
use spurlab::model::{load_model, token_representation, Model};
use spurlab::Error;

/// Result codes. `Ok` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpurlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parse = 4,
    Argument = 5,
    Dataset = 6,
    Numeric = 7,
    ModelFile = 8,
    Planting = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

impl SpurlabStatus {
    fn from_error(e: &Error) -> Self {
        match e.code() {
            "config" => Self::Config,
            "parse" => Self::Parse,
            "argument" => Self::Argument,
            "dataset" => Self::Dataset,
            "numeric" => Self::Numeric,
            "model-file" => Self::ModelFile,
            "planting" => Self::Planting,
            "io" => Self::Io,
            _ => Self::Config,
        }
    }
}

/// A loaded model (language model, head and optional prompts).
pub struct SpurlabModel {
    inner: Model,
}

/// A vocabulary, plus the bias spec when one was found next to it.
pub struct SpurlabVocab {
    vocab: Vocabulary,
    bias: Option<BiasSpec>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(SpurlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SpurlabStatus::from_error(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> SpurlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SpurlabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SpurlabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SpurlabStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SpurlabStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(
            SpurlabStatus::BufferTooSmall,
            format!("`{what}` holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn spurlab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a model file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spurlab_model_load(path: *const c_char, out: *mut *mut SpurlabModel) -> SpurlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_model(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SpurlabModel { inner: model }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`spurlab_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spurlab_model_free(model: *mut SpurlabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Representation width d, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spurlab_model_dim(model: *const SpurlabModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.lm.dim())
}

/// Vocabulary size |V|, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spurlab_model_vocab_size(model: *const SpurlabModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.lm.vocab_size())
}

/// Loads `vocab.tsv`, and `bias.txt` if present, from a directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spurlab_vocab_load(dir: *const c_char, out: *mut *mut SpurlabVocab) -> SpurlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = path_arg(dir, "dir")?;
        let vocab = read_vocabulary(&dir.join("vocab.tsv"))?;
        let bias_path = dir.join("bias.txt");
        let bias = if Path::exists(&bias_path) {
            Some(read_bias(&bias_path, &vocab)?)
        } else {
            None
        };
        *out = Box::into_raw(Box::new(SpurlabVocab { vocab, bias }));
        Ok(())
    })
}

/// Releases a vocabulary handle. Null is ignored.
///
/// # Safety
/// `vocab` must come from [`spurlab_vocab_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spurlab_vocab_free(vocab: *mut SpurlabVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Number of tokens, or 0 for a null handle.
///
/// # Safety
/// `vocab` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spurlab_vocab_len(vocab: *const SpurlabVocab) -> usize {
    vocab.as_ref().map_or(0, |v| v.vocab.len())
}

/// Token id of a surface form. `s_pos` and `s_neg` name the spurious tokens
/// when a bias spec was loaded.
///
/// # Safety
/// `vocab` must be a live handle, `surface` NUL-terminated, `out_id` writable.
#[no_mangle]
pub unsafe extern "C" fn spurlab_vocab_lookup(
    vocab: *const SpurlabVocab,
    surface: *const c_char,
    out_id: *mut usize,
) -> SpurlabStatus {
    guard(|| {
        let v = ref_arg(vocab, "vocab")?;
        let s = str_arg(surface, "surface")?;
        if out_id.is_null() {
            return Err(null("out_id"));
        }
        let id = match (s, &v.bias) {
            ("s_pos", Some(b)) => b.spurious_positive,
            ("s_neg", Some(b)) => b.spurious_negative,
            _ => v.vocab.lookup(s)?,
        };
        *out_id = id;
        Ok(())
    })
}

/// Writes the d-dimensional representation of `token` (from `BOS token EOS`)
/// into `out`, which must hold at least d values.
///
/// # Safety
/// `model` must be a live handle; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spurlab_token_representation(
    model: *const SpurlabModel,
    token: usize,
    out: *mut f64,
    len: usize,
) -> SpurlabStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if token >= m.inner.lm.vocab_size() {
            return Err(Failure(SpurlabStatus::Argument, format!("token {token} out of range")));
        }
        let h = token_representation(&m.inner.lm, token)?;
        out_slice(out, len, h.len(), "out")?.copy_from_slice(&h);
        Ok(())
    })
}

/// Class probabilities for a sentence of token ids (BOS/EOS added
/// internally). `out` must hold at least C values.
///
/// # Safety
/// `model` must be a live handle; `tokens` valid for `n` ids; `out` valid for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spurlab_predict(
    model: *const SpurlabModel,
    tokens: *const usize,
    n: usize,
    out: *mut f64,
    len: usize,
) -> SpurlabStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if tokens.is_null() && n > 0 {
            return Err(null("tokens"));
        }
        let words = if n == 0 { &[][..] } else { std::slice::from_raw_parts(tokens, n) };
        let size = m.inner.lm.vocab_size();
        if let Some(&bad) = words.iter().find(|&&t| t >= size) {
            return Err(Failure(SpurlabStatus::Argument, format!("token {bad} out of range")));
        }
        let p = m.inner.predict(words)?;
        out_slice(out, len, p.len(), "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Top-`k` cosine neighbors of `target`, specials and the target excluded.
/// Writes `k` ids and similarities.
///
/// # Safety
/// Handles must be live; `out_ids` and `out_cosines` valid for `k` values.
#[no_mangle]
pub unsafe extern "C" fn spurlab_nearest_neighbors(
    model: *const SpurlabModel,
    vocab: *const SpurlabVocab,
    target: usize,
    k: usize,
    out_ids: *mut usize,
    out_cosines: *mut f64,
) -> SpurlabStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let v = ref_arg(vocab, "vocab")?;
        check_target(m, v, target)?;
        let ids = out_slice(out_ids, k, k, "out_ids")?;
        let cos = out_slice(out_cosines, k, k, "out_cosines")?;
        let list = Representations::compute(&m.inner.lm, &v.vocab)?.neighbors(target, k)?;
        for (i, &(id, c)) in list.neighbors.iter().enumerate() {
            ids[i] = id;
            cos[i] = c;
        }
        Ok(())
    })
}

fn check_target(m: &SpurlabModel, v: &SpurlabVocab, target: usize) -> FfiResult {
    m.inner.check_vocabulary(v.vocab.len())?;
    if target >= v.vocab.len() {
        return Err(Failure(SpurlabStatus::Argument, format!("token {target} out of range")));
    }
    Ok(())
}

/// Spurious score of `target`: rank-paired polarity change, under
/// `reference`, between the top-`k` neighbors of the initial and fine-tuned
/// models.
///
/// # Safety
/// Handles must be live; `out_sum` and `out_mean` writable.
#[no_mangle]
pub unsafe extern "C" fn spurlab_spurious_score(
    reference: *const SpurlabModel,
    initial: *const SpurlabModel,
    finetuned: *const SpurlabModel,
    vocab: *const SpurlabVocab,
    target: usize,
    k: usize,
    out_sum: *mut f64,
    out_mean: *mut f64,
) -> SpurlabStatus {
    guard(|| {
        let r = ref_arg(reference, "reference")?;
        let i = ref_arg(initial, "initial")?;
        let f = ref_arg(finetuned, "finetuned")?;
        let v = ref_arg(vocab, "vocab")?;
        if out_sum.is_null() || out_mean.is_null() {
            return Err(null("out_sum/out_mean"));
        }
        for m in [r, i, f] {
            check_target(m, v, target)?;
        }
        let polarity = PolarityTable::compute(&r.inner, &v.vocab)?;
        let before = Representations::compute(&i.inner.lm, &v.vocab)?.neighbors(target, k)?;
        let after = Representations::compute(&f.inner.lm, &v.vocab)?.neighbors(target, k)?;
        let report = SpuriousScoreReport::from_lists(
            target,
            &before.ids().collect::<Vec<_>>(),
            &after.ids().collect::<Vec<_>>(),
            &polarity,
        );
        *out_sum = report.sum_score;
        *out_mean = report.mean_score;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spurlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
