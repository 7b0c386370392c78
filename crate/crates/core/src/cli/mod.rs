//! Command-line surface. [`run`] executes one parsed command and returns what
//! it prints on stdout, so every subcommand is testable in-process.

pub mod config;
pub mod report;
pub mod svg;

pub use config::{parse_config, parse_override, parse_pairs, RunConfig};
pub use report::{emit_report, render_report_row, render_report_tsv, render_scores_tsv, render_text_tables};
pub use svg::{emit_scatter_svg, polarity_color, render_scatter_svg};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{pca_project, PolarityTable, Representations, SpuriousScoreReport};
use crate::corpus::{read_bias, read_vocabulary, write_vocabulary, write_bias, BiasSpec, DataBundle, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{evaluate_robustness, pretrain_quality_sweep, run_benchmark, select_spurious_pair};
use crate::model::{init_planted, load_model, save_model, Model};
use crate::train::{finite_diff_check, train, Method};

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Parser)]
#[command(name = "spurlab", version, about = "Spurious-correlation corruption of token representations, at desk scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
        let mut overrides = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        for (k, v) in extra {
            if let Some(v) = v {
                overrides.push((k.to_string(), v.clone()));
            }
        }
        parse_config(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the vocabulary, bias spec and every dataset split.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the planted initial model.
    Plant {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune a model with one method.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Directory written by `gen`.
        #[arg(long)]
        data: PathBuf,
        /// Planted model file.
        #[arg(long)]
        init: PathBuf,
        /// Training split: biased, unbiased or pool.
        #[arg(long, default_value = "biased")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest neighbors of one token.
    Neighbors {
        #[arg(long)]
        model: PathBuf,
        /// Directory holding vocab.tsv and bias.txt; defaults to the model's.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Surface, token id, `s_pos` or `s_neg`.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Model whose head supplies the polarity column; defaults to `--model`.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Spurious score of one token between two models.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        initial: PathBuf,
        #[arg(long)]
        finetuned: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 100)]
        k: usize,
    },
    /// Biased and robust accuracy of a model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Row label in the report.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Two-dimensional projection of genuine and spurious-topic tokens.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Full benchmark: every method, every report.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat training with the planted noise varied.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.8")]
        noise: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        /// A method name or `all`.
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Largest relative error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Gen { cfg, out } => gen(&cfg.resolve(&[])?, out),
        Command::Plant { cfg, out } => plant(&cfg.resolve(&[])?, out),
        Command::Train {
            cfg,
            method,
            lambda,
            epochs,
            data,
            init,
            split,
            out,
        } => {
            let cfg = cfg.resolve(&[
                ("method", method.clone()),
                ("lambda", lambda.map(|l| l.to_string())),
                ("epochs", epochs.map(|e| e.to_string())),
            ])?;
            train_cmd(&cfg, data, init, split, out)
        }
        Command::Neighbors {
            model,
            data,
            target,
            k,
            reference,
        } => neighbors(model, data.as_deref(), target, *k, reference.as_deref()),
        Command::Score {
            reference,
            initial,
            finetuned,
            data,
            target,
            k,
        } => score(reference, initial, finetuned, data.as_deref().unwrap_or(dir_of(finetuned)), target, *k),
        Command::Eval { model, data, name } => eval(model, data, name),
        Command::Project {
            model,
            reference,
            data,
            out,
            svg,
        } => project(model, reference, data.as_deref(), out, svg.as_deref()),
        Command::Bench { cfg, out } => bench(&cfg.resolve(&[])?, out),
        Command::Sweep { cfg, noise, out } => sweep(&cfg.resolve(&[])?, noise, out.as_deref()),
        Command::Gradcheck { method, seed } => gradcheck(method, *seed),
    }
}

fn dir_of(path: &Path) -> &Path {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

/// Explicit surfaces from the config win; otherwise the closest topic-0 pair
/// under the planted model.
pub fn resolve_bias(cfg: &RunConfig, vocab: &Vocabulary) -> Result<BiasSpec> {
    let rho = cfg.bench.rho;
    match (&cfg.spurious_positive, &cfg.spurious_negative) {
        (Some(p), Some(n)) => {
            let bias = BiasSpec {
                spurious_positive: vocab.lookup(p)?,
                spurious_negative: vocab.lookup(n)?,
                rho,
            };
            bias.validate(vocab)?;
            Ok(bias)
        }
        (None, None) => {
            let lm = init_planted(vocab, &cfg.bench.model, &cfg.bench.plant)?;
            select_spurious_pair(&lm, vocab, rho)
        }
        _ => Err(Error::Config(
            "set both spurious_positive and spurious_negative, or neither".into(),
        )),
    }
}

fn gen(cfg: &RunConfig, out: &Path) -> Result<String> {
    let vocab = Vocabulary::build(&cfg.bench.generator)?;
    let bias = resolve_bias(cfg, &vocab)?;
    let bundle = DataBundle::generate(&cfg.bench.generator, vocab, bias)?;
    bundle.write_dir(out)?;
    write(&out.join("run.cfg"), &cfg.render())?;
    let mut s = String::new();
    for (name, ds) in [
        ("train_pool", &bundle.train_pool),
        ("train_biased", &bundle.train_biased),
        ("train_unbiased", &bundle.train_unbiased),
        ("test_pool", &bundle.test_pool),
        ("test_biased", &bundle.test_biased),
        ("test_unbiased", &bundle.test_unbiased),
        ("test_challenging", &bundle.test_challenging),
    ] {
        let _ = writeln!(s, "{name}\t{}", ds.len());
    }
    Ok(s)
}

fn plant(cfg: &RunConfig, out: &Path) -> Result<String> {
    let vocab = Vocabulary::build(&cfg.bench.generator)?;
    cfg.bench.model.validate(cfg.bench.generator.longest_sentence(), true)?;
    let lm = init_planted(&vocab, &cfg.bench.model, &cfg.bench.plant)?;
    let model = Model::from_lm(cfg.bench.model, lm);
    save_model(&model, out)?;
    Ok(format!("wrote {}\n", out.display()))
}

fn train_cmd(cfg: &RunConfig, data: &Path, init: &Path, split: &str, out: &Path) -> Result<String> {
    let bundle = DataBundle::read_dir(data)?;
    let mut model = load_model(init)?;
    model.check_vocabulary(bundle.vocab.len())?;
    if model.prompts.is_none() {
        model.config.prompt_count = cfg.bench.model.prompt_count;
    }
    let ds = match split {
        "biased" => &bundle.train_biased,
        "unbiased" => &bundle.train_unbiased,
        "pool" => &bundle.train_pool,
        other => return Err(Error::Config(format!("unknown split `{other}`"))),
    };
    let trained = train(&model, ds, &cfg.train_config())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_model(&trained.model, &out.join("model"))?;
    write(&out.join("train.log"), &trained.render_log())?;
    write_vocabulary(&bundle.vocab, &out.join("vocab.tsv"))?;
    write_bias(&bundle.bias, &bundle.vocab, &out.join("bias.txt"))?;
    write(&out.join("run.cfg"), &cfg.render())?;
    Ok(trained.render_log())
}

fn load_vocab(dir: &Path) -> Result<(Vocabulary, Option<BiasSpec>)> {
    let vocab = read_vocabulary(&dir.join("vocab.tsv"))?;
    let bias_path = dir.join("bias.txt");
    let bias = if bias_path.exists() {
        Some(read_bias(&bias_path, &vocab)?)
    } else {
        None
    };
    Ok((vocab, bias))
}

/// Surface, numeric id, or the `s_pos` / `s_neg` aliases.
pub fn resolve_target(target: &str, vocab: &Vocabulary, bias: Option<&BiasSpec>) -> Result<usize> {
    let alias = match target {
        "s_pos" => Some(bias.map(|b| b.spurious_positive)),
        "s_neg" => Some(bias.map(|b| b.spurious_negative)),
        _ => None,
    };
    let id = match alias {
        Some(Some(id)) => id,
        Some(None) => return Err(Error::Config(format!("`{target}` needs a bias.txt next to the vocabulary"))),
        None => match vocab.id(target) {
            Some(id) => id,
            None => match target.parse::<usize>() {
                Ok(id) if id < vocab.len() => id,
                _ => return Err(Error::UnknownToken(target.to_string())),
            },
        },
    };
    if vocab.is_special(id) {
        return Err(Error::SpecialToken(id));
    }
    Ok(id)
}

fn neighbors(model: &Path, data: Option<&Path>, target: &str, k: usize, reference: Option<&Path>) -> Result<String> {
    let (vocab, bias) = load_vocab(data.unwrap_or(dir_of(model)))?;
    let m = load_model(model)?;
    m.check_vocabulary(vocab.len())?;
    let reference = match reference {
        Some(p) => load_model(p)?,
        None => m.clone(),
    };
    let t = resolve_target(target, &vocab, bias.as_ref())?;
    let list = Representations::compute(&m.lm, &vocab)?.neighbors(t, k)?;
    let polarity = PolarityTable::compute(&reference, &vocab)?;
    let rows: Vec<(usize, f64, f64)> = list.neighbors.iter().map(|&(id, c)| (id, c, polarity.get(id))).collect();
    Ok(report::render_neighbors_tsv(&rows, &vocab))
}

fn score(reference: &Path, initial: &Path, finetuned: &Path, data: &Path, target: &str, k: usize) -> Result<String> {
    let (vocab, bias) = load_vocab(data)?;
    let models = [load_model(reference)?, load_model(initial)?, load_model(finetuned)?];
    for m in &models {
        m.check_vocabulary(vocab.len())?;
    }
    let t = resolve_target(target, &vocab, bias.as_ref())?;
    let polarity = PolarityTable::compute(&models[0], &vocab)?;
    let before = Representations::compute(&models[1].lm, &vocab)?.neighbors(t, k)?;
    let after = Representations::compute(&models[2].lm, &vocab)?.neighbors(t, k)?;
    let r = SpuriousScoreReport::from_lists(
        t,
        &before.ids().collect::<Vec<_>>(),
        &after.ids().collect::<Vec<_>>(),
        &polarity,
    );
    Ok(format!(
        "target\tK\tsum_score\tmean_score\n{}\n",
        report::render_score_row(&r, &vocab)
    ))
}

fn eval(model: &Path, data: &Path, name: &str) -> Result<String> {
    let bundle = DataBundle::read_dir(data)?;
    let m = load_model(model)?;
    m.check_vocabulary(bundle.vocab.len())?;
    let r = evaluate_robustness(name, &m, &bundle.test_biased, &bundle.test_challenging, &bundle.bias)?;
    Ok(render_report_tsv(&[r]))
}

fn project(model: &Path, reference: &Path, data: Option<&Path>, out: &Path, svg_out: Option<&Path>) -> Result<String> {
    let (vocab, bias) = load_vocab(data.unwrap_or(dir_of(model)))?;
    let bias = bias.ok_or_else(|| Error::Config("projection needs bias.txt".into()))?;
    let m = load_model(model)?;
    let r = load_model(reference)?;
    m.check_vocabulary(vocab.len())?;
    r.check_vocabulary(vocab.len())?;
    let topic = vocab.group(bias.spurious_positive);
    let subset: Vec<usize> = vocab
        .content_ids()
        .filter(|&id| vocab.group(id).is_genuine() || vocab.group(id) == topic)
        .collect();
    let p = pca_project(&m.lm, &vocab, &subset, &r)?;
    write(out, &report::render_projection_csv(&p, &vocab))?;
    if let Some(path) = svg_out {
        emit_scatter_svg(&p, &vocab, &[bias.spurious_positive, bias.spurious_negative], path)?;
    }
    Ok(format!(
        "explained\t{:.6}\t{:.6}\n",
        p.explained.0, p.explained.1
    ))
}

fn bench(cfg: &RunConfig, out: &Path) -> Result<String> {
    if cfg.spurious_positive.is_some() || cfg.spurious_negative.is_some() {
        return Err(Error::Config(
            "bench selects the spurious pair itself; unset spurious_positive/spurious_negative".into(),
        ));
    }
    let result = run_benchmark(&cfg.bench)?;
    emit_report(&result, cfg, out)?;
    Ok(render_text_tables(&result))
}

pub fn render_sweep(rows: &[crate::eval::SweepRow]) -> String {
    let mut out = String::from("noise\tmethod\tbiased_acc\trobust_acc\tdelta\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}", r.noise, render_report_row(&r.report));
    }
    out
}

fn sweep(cfg: &RunConfig, noise: &[f64], out: Option<&Path>) -> Result<String> {
    let rows = pretrain_quality_sweep(noise, &cfg.bench)?;
    let text = render_sweep(&rows);
    if let Some(path) = out {
        write(path, &text)?;
    }
    Ok(text)
}

fn gradcheck(method: &str, seed: u64) -> Result<String> {
    let methods: Vec<Method> = if method == "all" {
        Method::ALL.to_vec()
    } else {
        vec![method.parse()?]
    };
    let start = Instant::now();
    let mut out = String::from("method\tmax_rel_error\tresult\n");
    let mut worst: Option<(Method, f64)> = None;
    for m in methods {
        let r = finite_diff_check(m, seed)?;
        let ok = r.max_rel_error < GRADCHECK_TOLERANCE;
        let _ = writeln!(
            out,
            "{}\t{:.3e}\t{}",
            m.name(),
            r.max_rel_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok && worst.is_none_or(|(_, e)| r.max_rel_error > e) {
            worst = Some((m, r.max_rel_error));
        }
    }
    if let Some((m, e)) = worst {
        return Err(Error::GradientMismatch {
            method: m.name().into(),
            error: e,
        });
    }
    let _ = writeln!(out, "elapsed\t{:.2}s", start.elapsed().as_secs_f64());
    Ok(out)
}
