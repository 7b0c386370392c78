use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use spurlab::analysis::{nearest_neighbors, spurious_score};
use spurlab::corpus::{write_bias, write_vocabulary, BiasSpec, GeneratorConfig, Vocabulary};
use spurlab::model::{init_planted, save_model, token_representation, Model, ModelConfig, PlantSpec};
use spurlab_ffi::*;

struct Fixture {
    dir: tempfile::TempDir,
    vocab: Vocabulary,
    model: Model,
    bias: BiasSpec,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let vocab = Vocabulary::build(&GeneratorConfig::default()).unwrap();
    let cfg = ModelConfig::default();
    let lm = init_planted(&vocab, &cfg, &PlantSpec::default()).unwrap();
    let mut model = Model::from_lm(cfg, lm);
    // A non-trivial head so predictions differ from uniform.
    for c in 0..model.head.weight.cols {
        model.head.weight.set(1, c, ((c % 7) as f64 - 3.0) * 0.1);
    }
    let bias = BiasSpec::default_for(&vocab, 0.25).unwrap();
    save_model(&model, &dir.path().join("model.txt")).unwrap();
    write_vocabulary(&vocab, &dir.path().join("vocab.tsv")).unwrap();
    write_bias(&bias, &vocab, &dir.path().join("bias.txt")).unwrap();
    Fixture { dir, vocab, model, bias }
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        spurlab_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

struct Handles {
    model: *mut SpurlabModel,
    vocab: *mut SpurlabVocab,
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            spurlab_model_free(self.model);
            spurlab_vocab_free(self.vocab);
        }
    }
}

fn load(f: &Fixture) -> Handles {
    let mut h = Handles { model: ptr::null_mut(), vocab: ptr::null_mut() };
    unsafe {
        let path = cstr(&f.dir.path().join("model.txt"));
        assert_eq!(spurlab_model_load(path.as_ptr(), &mut h.model), SpurlabStatus::Ok);
        let dir = cstr(f.dir.path());
        assert_eq!(spurlab_vocab_load(dir.as_ptr(), &mut h.vocab), SpurlabStatus::Ok);
    }
    h
}

#[test]
fn shapes_and_lookup() {
    let f = fixture();
    let h = load(&f);
    unsafe {
        assert_eq!(spurlab_model_dim(h.model), f.model.lm.dim());
        assert_eq!(spurlab_model_vocab_size(h.model), f.vocab.len());
        assert_eq!(spurlab_vocab_len(h.vocab), f.vocab.len());
        let mut id = 0;
        let s = CString::new("s_neg").unwrap();
        assert_eq!(spurlab_vocab_lookup(h.vocab, s.as_ptr(), &mut id), SpurlabStatus::Ok);
        assert_eq!(id, f.bias.spurious_negative);
        let s = CString::new(f.vocab.surface(20)).unwrap();
        assert_eq!(spurlab_vocab_lookup(h.vocab, s.as_ptr(), &mut id), SpurlabStatus::Ok);
        assert_eq!(id, 20);
        let s = CString::new("no-such-token").unwrap();
        assert_ne!(spurlab_vocab_lookup(h.vocab, s.as_ptr(), &mut id), SpurlabStatus::Ok);
        assert!(last_error().contains("no-such-token"));
    }
}

#[test]
fn representation_and_prediction_match_the_library() {
    let f = fixture();
    let h = load(&f);
    let d = f.model.lm.dim();
    let mut rep = vec![0.0; d];
    unsafe {
        assert_eq!(spurlab_token_representation(h.model, 30, rep.as_mut_ptr(), d), SpurlabStatus::Ok);
    }
    let want = token_representation(&f.model.lm, 30).unwrap();
    for (a, b) in rep.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }

    let words = [10usize, 30, 40];
    let mut probs = [0.0; 2];
    unsafe {
        assert_eq!(spurlab_predict(h.model, words.as_ptr(), words.len(), probs.as_mut_ptr(), 2), SpurlabStatus::Ok);
    }
    let want = f.model.predict(&words).unwrap();
    assert!((probs[0] - want[0]).abs() < 1e-12 && (probs[1] - want[1]).abs() < 1e-12);
    assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12);
}

#[test]
fn neighbors_and_score_match_the_library() {
    let f = fixture();
    let h = load(&f);
    let target = f.bias.spurious_positive;
    let k = 5;
    let mut ids = vec![0usize; k];
    let mut cos = vec![0.0; k];
    unsafe {
        assert_eq!(
            spurlab_nearest_neighbors(h.model, h.vocab, target, k, ids.as_mut_ptr(), cos.as_mut_ptr()),
            SpurlabStatus::Ok
        );
    }
    let want = nearest_neighbors(&f.model.lm, &f.vocab, target, k).unwrap();
    assert_eq!(ids, want.ids().collect::<Vec<_>>());

    let (mut sum, mut mean) = (f64::NAN, f64::NAN);
    unsafe {
        assert_eq!(
            spurlab_spurious_score(h.model, h.model, h.model, h.vocab, target, 20, &mut sum, &mut mean),
            SpurlabStatus::Ok
        );
    }
    let want = spurious_score(&f.model, &f.model.lm, &f.model.lm, &f.vocab, target, 20).unwrap();
    assert_eq!((sum, mean), (want.sum_score, want.mean_score));
    assert_eq!(sum, 0.0);
}

#[test]
fn error_codes() {
    let f = fixture();
    let h = load(&f);
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(spurlab_model_load(ptr::null(), &mut m), SpurlabStatus::NullPointer);
        let missing = cstr(&f.dir.path().join("missing.txt"));
        assert_eq!(spurlab_model_load(missing.as_ptr(), &mut m), SpurlabStatus::Io);
        assert!(m.is_null());
        let bad = f.dir.path().join("bad.txt");
        std::fs::write(&bad, "not a model\n").unwrap();
        let bad = cstr(&bad);
        assert_ne!(spurlab_model_load(bad.as_ptr(), &mut m), SpurlabStatus::Ok);

        let mut small = [0.0; 1];
        assert_eq!(
            spurlab_token_representation(h.model, 30, small.as_mut_ptr(), 1),
            SpurlabStatus::BufferTooSmall
        );
        let needed = spurlab_last_error_message(ptr::null_mut(), 0);
        assert!(needed > 0);
        assert_eq!(
            spurlab_token_representation(h.model, usize::MAX, small.as_mut_ptr(), 1),
            SpurlabStatus::Argument
        );
        let (mut ids, mut cos) = ([0usize; 1], [0.0; 1]);
        assert_ne!(
            spurlab_nearest_neighbors(h.model, h.vocab, 0, 1, ids.as_mut_ptr(), cos.as_mut_ptr()),
            SpurlabStatus::Ok
        );
        let invalid = [0xffu8 as c_char, 0];
        let mut v = ptr::null_mut();
        assert_eq!(spurlab_vocab_load(invalid.as_ptr(), &mut v), SpurlabStatus::InvalidUtf8);

        assert_eq!(spurlab_model_dim(ptr::null()), 0);
        spurlab_model_free(ptr::null_mut());
        spurlab_vocab_free(ptr::null_mut());
    }
}

#[test]
fn error_message_truncates() {
    unsafe {
        let mut m = ptr::null_mut();
        spurlab_model_load(ptr::null(), &mut m);
        let full = spurlab_last_error_message(ptr::null_mut(), 0);
        let mut buf = [1 as c_char; 4];
        assert_eq!(spurlab_last_error_message(buf.as_mut_ptr(), 4), full);
        assert_eq!(buf[3], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 3);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(spurlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/spurlab.h")).unwrap();
    for name in [
        "spurlab_model_load",
        "spurlab_model_free",
        "spurlab_vocab_lookup",
        "spurlab_predict",
        "spurlab_nearest_neighbors",
        "spurlab_spurious_score",
        "spurlab_last_error_message",
        "SPURLAB_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
