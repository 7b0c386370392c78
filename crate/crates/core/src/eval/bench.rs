use super::{evaluate_robustness, EvalReport};
use crate::analysis::{
    cosine_similarity, pca_project, NeighborList, PolarityTable, ProjectionReport, Representations,
    SpuriousScoreReport,
};
use crate::corpus::{BiasSpec, DataBundle, GeneratorConfig, TokenGroup, Vocabulary};
use crate::error::{Error, Result};
use crate::mix_seed;
use crate::model::{init_planted, Model, ModelConfig, ModelParams, PlantSpec};
use crate::train::{train, AdamConfig, Method, TrainConfig, TrainedModel};

/// Row name of the reference model trained with standard fine-tuning on the
/// unbiased split.
pub const UNBIASED_ROW: &str = "unbiased";
pub const PLANTED_ROW: &str = "planted";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub generator: GeneratorConfig,
    pub plant: PlantSpec,
    pub model: ModelConfig,
    pub rho: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_co: f64,
    pub lambda_cp: f64,
    pub score_k: usize,
    pub neighbor_k: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig {
                label_noise: 0.05,
                ..GeneratorConfig::default()
            },
            plant: PlantSpec::default(),
            model: ModelConfig::default(),
            rho: 0.25,
            adam: AdamConfig::default(),
            epochs: 10,
            batch_size: 32,
            lambda_co: Method::ConstrainedOutputs.default_lambda(),
            lambda_cp: Method::ConstrainedParams.default_lambda(),
            score_k: 100,
            neighbor_k: 10,
            seed: 7,
        }
    }
}

impl BenchmarkConfig {
    /// Applies the master seed to every component seed.
    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.generator.seed = mix_seed(seed, 1);
        self.plant.seed = mix_seed(seed, 2);
        self
    }

    pub fn train_config(&self, method: Method) -> TrainConfig {
        TrainConfig {
            method,
            lambda: match method {
                Method::ConstrainedOutputs => self.lambda_co,
                Method::ConstrainedParams => self.lambda_cp,
                _ => 0.0,
            },
            adam: self.adam,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: mix_seed(self.seed, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub name: String,
    pub trained: TrainedModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSnapshot {
    pub row: String,
    pub target: usize,
    /// `(token, cosine, polarity)`
    pub neighbors: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub config: BenchmarkConfig,
    pub vocab: Vocabulary,
    pub bias: BiasSpec,
    pub planted: ModelParams,
    pub split_sizes: Vec<(&'static str, usize)>,
    /// Table order: standard, nfl-f, nfl-co, nfl-cp, nfl-pt, unbiased.
    pub runs: Vec<RunRow>,
    pub reports: Vec<EvalReport>,
    pub scores: Vec<(String, SpuriousScoreReport)>,
    pub neighbors: Vec<NeighborSnapshot>,
    /// `cos(s⁺, s⁻)` per row, planted first.
    pub pair_cosines: Vec<(String, f64)>,
    pub projections: Vec<(String, ProjectionReport)>,
}

impl BenchmarkResult {
    pub fn report(&self, row: &str) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.method == row)
    }

    pub fn score(&self, row: &str, target: usize) -> Option<&SpuriousScoreReport> {
        self.scores
            .iter()
            .find(|(r, s)| r == row && s.target == target)
            .map(|(_, s)| s)
    }

    pub fn snapshot(&self, row: &str, target: usize) -> Option<&NeighborSnapshot> {
        self.neighbors.iter().find(|s| s.row == row && s.target == target)
    }

    pub fn pair_cosine(&self, row: &str) -> Option<f64> {
        self.pair_cosines.iter().find(|(r, _)| r == row).map(|(_, c)| *c)
    }

    pub fn run(&self, row: &str) -> Option<&TrainedModel> {
        self.runs.iter().find(|r| r.name == row).map(|r| &r.trained)
    }
}

/// The most similar pair of tokens inside topic 0 under `lm`; the lower id
/// becomes the positive spurious token.
pub fn select_spurious_pair(lm: &ModelParams, vocab: &Vocabulary, rho: f64) -> Result<BiasSpec> {
    let topic = vocab.ids_in(TokenGroup::Topic(0));
    if topic.len() < 2 {
        return Err(Error::Config("topic 0 needs at least two tokens".into()));
    }
    let reps = Representations::compute(lm, vocab)?;
    let mut best = (f64::NEG_INFINITY, topic[0], topic[1]);
    for (i, &a) in topic.iter().enumerate() {
        for &b in &topic[i + 1..] {
            let c = cosine_similarity(reps.get(a)?, reps.get(b)?);
            if c > best.0 {
                best = (c, a, b);
            }
        }
    }
    Ok(BiasSpec {
        spurious_positive: best.1,
        spurious_negative: best.2,
        rho,
    })
}

struct Prepared {
    vocab: Vocabulary,
    planted: Model,
    data: DataBundle,
}

fn prepare(cfg: &BenchmarkConfig) -> Result<Prepared> {
    let vocab = Vocabulary::build(&cfg.generator)?;
    cfg.model
        .validate(cfg.generator.longest_sentence(), true)?;
    let lm = init_planted(&vocab, &cfg.model, &cfg.plant)?;
    let bias = select_spurious_pair(&lm, &vocab, cfg.rho)?;
    let data = DataBundle::generate(&cfg.generator, vocab.clone(), bias)?;
    Ok(Prepared {
        vocab,
        planted: Model::from_lm(cfg.model, lm),
        data,
    })
}

fn train_rows(cfg: &BenchmarkConfig, prep: &Prepared, with_reference: bool) -> Result<Vec<RunRow>> {
    let mut rows = Vec::with_capacity(Method::ALL.len() + 1);
    for method in Method::ALL {
        let trained = train(&prep.planted, &prep.data.train_biased, &cfg.train_config(method))?;
        rows.push(RunRow {
            name: method.name().to_string(),
            trained,
        });
    }
    if !with_reference {
        return Ok(rows);
    }
    let reference = train(
        &prep.planted,
        &prep.data.train_unbiased,
        &cfg.train_config(Method::Standard),
    )?;
    rows.push(RunRow {
        name: UNBIASED_ROW.to_string(),
        trained: reference,
    });
    Ok(rows)
}

fn evaluate_rows(rows: &[RunRow], data: &DataBundle) -> Result<Vec<EvalReport>> {
    rows.iter()
        .map(|r| {
            evaluate_robustness(
                &r.name,
                &r.trained.model,
                &data.test_biased,
                &data.test_challenging,
                &data.bias,
            )
        })
        .collect()
}

/// Generates the corpora, plants θ₀, trains the unbiased reference and the five
/// methods on the biased split, and runs every report.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    let prep = prepare(cfg)?;
    let runs = train_rows(cfg, &prep, true)?;
    let reports = evaluate_rows(&runs, &prep.data)?;

    let vocab = &prep.vocab;
    let bias = &prep.data.bias;
    let targets = [bias.spurious_positive, bias.spurious_negative];
    let reference = &runs.last().expect("reference row").trained.model;
    let polarity = PolarityTable::compute(reference, vocab)?;

    let planted_reps = Representations::compute(&prep.planted.lm, vocab)?;
    let mut reps: Vec<(String, Representations)> = vec![(PLANTED_ROW.to_string(), planted_reps.clone())];
    for r in &runs {
        reps.push((r.name.clone(), Representations::compute(&r.trained.model.lm, vocab)?));
    }

    let mut scores = Vec::new();
    let mut neighbors = Vec::new();
    let mut pair_cosines = Vec::new();
    let mut projections = Vec::new();
    let subset = projection_subset(vocab, bias);
    for (row, rep) in &reps {
        pair_cosines.push((
            row.clone(),
            cosine_similarity(rep.get(targets[0])?, rep.get(targets[1])?),
        ));
        for &t in &targets {
            let list = rep.neighbors(t, cfg.neighbor_k)?;
            neighbors.push(snapshot(row, &list, &polarity));
            if row != PLANTED_ROW {
                let before = planted_reps.neighbors(t, cfg.score_k)?;
                let after = rep.neighbors(t, cfg.score_k)?;
                scores.push((
                    row.clone(),
                    SpuriousScoreReport::from_lists(
                        t,
                        &before.ids().collect::<Vec<_>>(),
                        &after.ids().collect::<Vec<_>>(),
                        &polarity,
                    ),
                ));
            }
        }
        let lm = if row == PLANTED_ROW {
            &prep.planted.lm
        } else {
            &runs.iter().find(|r| &r.name == row).expect("row").trained.model.lm
        };
        projections.push((row.clone(), pca_project(lm, vocab, &subset, reference)?));
    }

    let d = &prep.data;
    let split_sizes = vec![
        ("train_pool", d.train_pool.len()),
        ("train_biased", d.train_biased.len()),
        ("train_unbiased", d.train_unbiased.len()),
        ("test_pool", d.test_pool.len()),
        ("test_biased", d.test_biased.len()),
        ("test_unbiased", d.test_unbiased.len()),
        ("test_challenging", d.test_challenging.len()),
    ];
    Ok(BenchmarkResult {
        config: cfg.clone(),
        bias: bias.clone(),
        planted: prep.planted.lm.clone(),
        vocab: prep.vocab,
        split_sizes,
        runs,
        reports,
        scores,
        neighbors,
        pair_cosines,
        projections,
    })
}

fn snapshot(row: &str, list: &NeighborList, polarity: &PolarityTable) -> NeighborSnapshot {
    NeighborSnapshot {
        row: row.to_string(),
        target: list.target,
        neighbors: list
            .neighbors
            .iter()
            .map(|&(id, c)| (id, c, polarity.get(id)))
            .collect(),
    }
}

/// Genuine tokens plus the spurious tokens' topic.
fn projection_subset(vocab: &Vocabulary, bias: &BiasSpec) -> Vec<usize> {
    let topic = vocab.group(bias.spurious_positive);
    vocab
        .content_ids()
        .filter(|&id| {
            let g = vocab.group(id);
            g.is_genuine() || g == topic
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise: f64,
    pub report: EvalReport,
}

/// Repeats training and evaluation of the five methods with the planted noise
/// varied. One row per (noise, method).
pub fn pretrain_quality_sweep(noise_levels: &[f64], base: &BenchmarkConfig) -> Result<Vec<SweepRow>> {
    if noise_levels.is_empty() {
        return Err(Error::Config("noise grid is empty".into()));
    }
    if noise_levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("noise grid must be ascending".into()));
    }
    let mut out = Vec::new();
    for &noise in noise_levels {
        let mut cfg = base.clone();
        cfg.plant.noise = noise;
        let prep = prepare(&cfg)?;
        let runs = train_rows(&cfg, &prep, false)?;
        for report in evaluate_rows(&runs, &prep.data)? {
            out.push(SweepRow { noise, report });
        }
    }
    Ok(out)
}
