//! Text model file: `NFLM1 <|V|> <d> <max-pos> <C> <P>`, a pooling line, then
//! named tensor blocks (`<name> <rows> <cols>` followed by one line per row)
//! with 17 significant digits per value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ClassifierHead, Model, ModelConfig, ModelParams, PromptParams};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const MAGIC: &str = "NFLM1";

fn write_tensor(out: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(out, "{name} {} {}", m.rows, m.cols);
    for r in 0..m.rows {
        for (j, x) in m.row(r).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.16e}");
        }
        out.push('\n');
    }
}

pub fn render_model(model: &Model) -> String {
    let lm = &model.lm;
    let p = model.prompts.as_ref().map_or(0, PromptParams::count);
    let mut out = format!(
        "{MAGIC} {} {} {} {} {p}\npooling {}\n",
        lm.vocab_size(),
        lm.dim(),
        lm.max_positions(),
        model.head.classes(),
        model.config.pooling.name()
    );
    for (name, m) in lm.tensors() {
        write_tensor(&mut out, name, m);
    }
    for (name, m) in model.head.tensors() {
        write_tensor(&mut out, name, m);
    }
    if let Some(pr) = &model.prompts {
        write_tensor(&mut out, "prompts", &pr.prompts);
    }
    out
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, render_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| parse_err(0, format!("unexpected end of file reading {what}")))
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: "model".into(),
        line,
        message: message.into(),
    }
}

fn read_tensor(lines: &mut Lines<'_>, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
    let (n, header) = lines.next(name)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != name {
        return Err(parse_err(n, format!("expected tensor block `{name}`, found `{header}`")));
    }
    let found: (usize, usize) = (
        fields[1].parse().map_err(|_| parse_err(n, "bad row count"))?,
        fields[2].parse().map_err(|_| parse_err(n, "bad column count"))?,
    );
    if found != (rows, cols) {
        return Err(Error::Shape {
            tensor: name.to_string(),
            expected: format!("{rows}x{cols}"),
            found: format!("{}x{}", found.0, found.1),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (n, line) = lines.next(name)?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| parse_err(n, format!("bad value `{tok}` in `{name}`")))?,
            );
        }
        if data.len() - before != cols {
            return Err(Error::Shape {
                tensor: name.to_string(),
                expected: format!("{cols} columns"),
                found: format!("{} at line {n}", data.len() - before),
            });
        }
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn read_model(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, header) = lines.next("header").map_err(|_| Error::BadMagic)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    match fields.first() {
        Some(&MAGIC) => {}
        Some(m) if m.starts_with("NFLM") => {
            return Err(parse_err(1, format!("unsupported model version `{m}`")))
        }
        _ => return Err(Error::BadMagic),
    }
    if fields.len() != 6 {
        return Err(parse_err(1, "header needs |V| d max-pos C P"));
    }
    let nums = fields[1..]
        .iter()
        .map(|f| f.parse::<usize>().map_err(|_| parse_err(1, format!("bad header field `{f}`"))))
        .collect::<Result<Vec<_>>>()?;
    let (vocab, d, max_pos, classes, p) = (nums[0], nums[1], nums[2], nums[3], nums[4]);

    let (n, pool_line) = lines.next("pooling")?;
    let pooling = pool_line
        .strip_prefix("pooling ")
        .ok_or_else(|| parse_err(n, "expected `pooling <bos|mean>`"))?
        .trim()
        .parse()?;

    let mut read = |name: &str, r: usize, c: usize| read_tensor(&mut lines, name, r, c);
    let lm = ModelParams {
        embeddings: read("E", vocab, d)?,
        positions: read("Pos", max_pos, d)?,
        wq: read("Wq", d, d)?,
        wk: read("Wk", d, d)?,
        wv: read("Wv", d, d)?,
        wo: read("Wo", d, d)?,
        mlp_in: read("A1", d, d)?,
        mlp_in_bias: read("b1", 1, d)?,
        mlp_out: read("A2", d, d)?,
        mlp_out_bias: read("b2", 1, d)?,
    };
    let head = ClassifierHead {
        weight: read("W", classes, d)?,
        bias: read("b", 1, classes)?,
    };
    let prompts = if p > 0 {
        Some(PromptParams {
            prompts: read("prompts", p, d)?,
        })
    } else {
        None
    };
    let config = ModelConfig {
        dim: d,
        max_positions: max_pos,
        classes,
        prompt_count: if p > 0 { p } else { ModelConfig::default().prompt_count },
        pooling,
    };
    let model = Model {
        config,
        lm,
        head,
        prompts,
    };
    model.check_finite()?;
    Ok(model)
}

impl Model {
    /// Errors unless the embedding table matches the vocabulary size.
    pub fn check_vocabulary(&self, vocab_size: usize) -> Result<()> {
        if self.lm.vocab_size() != vocab_size {
            return Err(Error::Shape {
                tensor: "E".into(),
                expected: format!("{vocab_size} rows"),
                found: format!("{} rows", self.lm.vocab_size()),
            });
        }
        Ok(())
    }
}
