//! Plain-text file formats for vocabularies, datasets, and bias declarations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    apply_bias_filter, extract_challenging, generate_pool, sample_unbiased, BiasSpec, Dataset,
    Example, GeneratorConfig, Provenance, Split, TokenEntry, TokenGroup, Vocabulary,
};
use crate::error::{Error, Result};
use crate::mix_seed;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn render_vocabulary(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for e in vocab.entries() {
        let _ = writeln!(out, "{}\t{}\t{}", e.id, e.surface, e.group);
    }
    out
}

pub fn write_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<()> {
    write(path, &render_vocabulary(vocab))
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = read(path)?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let mut cols = line.split('\t');
        let (Some(id), Some(surface), Some(group), None) =
            (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(parse_err(path, n, "expected `<id>\\t<surface>\\t<group>`"));
        };
        let id = id
            .parse()
            .map_err(|_| parse_err(path, n, format!("bad token id `{id}`")))?;
        let group: TokenGroup = group.parse().map_err(|m: String| parse_err(path, n, m))?;
        entries.push(TokenEntry {
            id,
            surface: surface.to_string(),
            group,
        });
    }
    Vocabulary::from_entries(entries)
}

pub fn render_dataset(ds: &Dataset, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for ex in &ds.examples {
        let _ = write!(out, "{}\t", ex.label);
        for (i, &t) in ex.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(vocab.surface(t));
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(ds: &Dataset, vocab: &Vocabulary, path: &Path) -> Result<()> {
    write(path, &render_dataset(ds, vocab))
}

/// Reads `<label>\t<surface> <surface> …` lines. The format stores neither
/// provenance nor classes, so the caller supplies both.
pub fn read_dataset(
    path: &Path,
    vocab: &Vocabulary,
    provenance: Provenance,
    classes: usize,
) -> Result<Dataset> {
    let text = read(path)?;
    parse_dataset(&text, path, vocab, provenance, classes)
}

pub(crate) fn parse_dataset(
    text: &str,
    path: &Path,
    vocab: &Vocabulary,
    provenance: Provenance,
    classes: usize,
) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let Some((label, body)) = line.split_once('\t') else {
            return Err(parse_err(path, n, "missing tab between label and tokens"));
        };
        let label: usize = label
            .parse()
            .map_err(|_| parse_err(path, n, format!("bad label `{label}`")))?;
        if label >= classes {
            return Err(parse_err(
                path,
                n,
                Error::LabelOutOfRange { label, classes }.to_string(),
            ));
        }
        let tokens = body
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                let id = vocab
                    .lookup(s)
                    .map_err(|e| parse_err(path, n, e.to_string()))?;
                if vocab.is_special(id) {
                    return Err(parse_err(path, n, format!("special token `{s}` in sentence body")));
                }
                Ok(id)
            })
            .collect::<Result<Vec<_>>>()?;
        if tokens.is_empty() {
            return Err(parse_err(path, n, "empty sentence"));
        }
        examples.push(Example { tokens, label });
    }
    Ok(Dataset {
        examples,
        provenance,
        bias: None,
        seed: 0,
        classes,
    })
}

pub fn render_bias(bias: &BiasSpec, vocab: &Vocabulary) -> String {
    format!(
        "spurious_positive={}\nspurious_negative={}\nrho={}\n",
        vocab.surface(bias.spurious_positive),
        vocab.surface(bias.spurious_negative),
        bias.rho
    )
}

pub fn write_bias(bias: &BiasSpec, vocab: &Vocabulary, path: &Path) -> Result<()> {
    write(path, &render_bias(bias, vocab))
}

pub fn read_bias(path: &Path, vocab: &Vocabulary) -> Result<BiasSpec> {
    let text = read(path)?;
    let (mut pos, mut neg, mut rho) = (None, None, None);
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(path, n, "expected `key=value`"));
        };
        let value = value.trim();
        match key.trim() {
            "spurious_positive" => {
                pos = Some(vocab.lookup(value).map_err(|e| parse_err(path, n, e.to_string()))?)
            }
            "spurious_negative" => {
                neg = Some(vocab.lookup(value).map_err(|e| parse_err(path, n, e.to_string()))?)
            }
            "rho" => {
                rho = Some(
                    value
                        .parse::<f64>()
                        .map_err(|_| parse_err(path, n, format!("bad rho `{value}`")))?,
                )
            }
            other => return Err(parse_err(path, n, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| parse_err(path, 0, format!("missing `{k}`"));
    let bias = BiasSpec {
        spurious_positive: pos.ok_or_else(|| missing("spurious_positive"))?,
        spurious_negative: neg.ok_or_else(|| missing("spurious_negative"))?,
        rho: rho.ok_or_else(|| missing("rho"))?,
    };
    bias.validate(vocab)?;
    Ok(bias)
}

/// Every split a run needs, built from two independently generated pools.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub vocab: Vocabulary,
    pub bias: BiasSpec,
    pub train_pool: Dataset,
    pub train_biased: Dataset,
    pub train_unbiased: Dataset,
    pub test_pool: Dataset,
    pub test_biased: Dataset,
    pub test_unbiased: Dataset,
    pub test_challenging: Dataset,
}

const FILES: [(&str, Provenance); 7] = [
    ("train_pool.tsv", Provenance::Pool),
    ("train_biased.tsv", Provenance::Biased),
    ("train_unbiased.tsv", Provenance::Unbiased),
    ("test_pool.tsv", Provenance::Pool),
    ("test_biased.tsv", Provenance::Biased),
    ("test_unbiased.tsv", Provenance::Unbiased),
    ("test_challenging.tsv", Provenance::Challenging),
];

impl DataBundle {
    pub fn generate(cfg: &GeneratorConfig, vocab: Vocabulary, bias: BiasSpec) -> Result<Self> {
        let train_pool = generate_pool(cfg, &vocab, &bias, Split::Train)?;
        let train_biased = apply_bias_filter(&train_pool, &bias)?;
        let train_unbiased =
            sample_unbiased(&train_pool, train_biased.len(), mix_seed(cfg.seed, 0x7261))?;
        let test_pool = generate_pool(cfg, &vocab, &bias, Split::Test)?;
        let test_biased = apply_bias_filter(&test_pool, &bias)?;
        let test_unbiased =
            sample_unbiased(&test_pool, test_biased.len(), mix_seed(cfg.seed, 0x7465))?;
        let test_challenging = extract_challenging(&test_unbiased, &bias)?;
        Ok(Self {
            vocab,
            bias,
            train_pool,
            train_biased,
            train_unbiased,
            test_pool,
            test_biased,
            test_unbiased,
            test_challenging,
        })
    }

    fn datasets(&self) -> [&Dataset; 7] {
        [
            &self.train_pool,
            &self.train_biased,
            &self.train_unbiased,
            &self.test_pool,
            &self.test_biased,
            &self.test_unbiased,
            &self.test_challenging,
        ]
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_vocabulary(&self.vocab, &dir.join("vocab.tsv"))?;
        write_bias(&self.bias, &self.vocab, &dir.join("bias.txt"))?;
        for ((name, _), ds) in FILES.iter().zip(self.datasets()) {
            write_dataset(ds, &self.vocab, &dir.join(name))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let vocab = read_vocabulary(&dir.join("vocab.tsv"))?;
        let bias = read_bias(&dir.join("bias.txt"), &vocab)?;
        let mut sets = Vec::with_capacity(FILES.len());
        for (name, provenance) in FILES {
            let mut ds = read_dataset(&dir.join(name), &vocab, provenance, 2)?;
            ds.bias = Some(bias.clone());
            sets.push(ds);
        }
        let mut it = sets.into_iter();
        let mut next = || it.next().expect("seven datasets");
        Ok(Self {
            train_pool: next(),
            train_biased: next(),
            train_unbiased: next(),
            test_pool: next(),
            test_biased: next(),
            test_unbiased: next(),
            test_challenging: next(),
            vocab,
            bias,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::build(&GeneratorConfig::default()).unwrap()
    }

    #[test]
    fn parses_format_line() {
        let v = vocab();
        let ds = parse_dataset(
            "1\tpos_003 topic2_01 fill_09\n",
            Path::new("x"),
            &v,
            Provenance::Pool,
            2,
        )
        .unwrap();
        assert_eq!(ds.examples.len(), 1);
        assert_eq!(ds.examples[0].label, 1);
        assert_eq!(ds.examples[0].tokens.len(), 3);
        assert_eq!(ds.examples[0].tokens[0], v.lookup("pos_003").unwrap());
    }

    #[test]
    fn label_out_of_range_reports_line() {
        let v = vocab();
        let err = parse_dataset("0\tpos_001\n2\tpos_003\n", Path::new("d.tsv"), &v, Provenance::Pool, 2)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("d.tsv:2"), "{msg}");
        assert!(msg.contains("label out of range"), "{msg}");
    }

    #[test]
    fn unknown_surface_is_an_error() {
        let v = vocab();
        let err =
            parse_dataset("0\tnope\n", Path::new("d"), &v, Provenance::Pool, 2).unwrap_err();
        assert!(err.to_string().contains("unknown token surface"));
    }

    #[test]
    fn bias_file_round_trip() {
        let v = vocab();
        let b = BiasSpec::default_for(&v, 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bias.txt");
        write_bias(&b, &v, &p).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "spurious_positive=topic0_00\nspurious_negative=topic0_01\nrho=0.25\n"
        );
        assert_eq!(read_bias(&p, &v).unwrap(), b);
    }

    #[test]
    fn vocabulary_round_trip() {
        let v = vocab();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        write_vocabulary(&v, &p).unwrap();
        assert_eq!(read_vocabulary(&p).unwrap(), v);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("0\t<pad>\tSPECIAL\n"));
        assert!(text.contains("\ttopic3_04\tT:topic3\n"));
    }
}
