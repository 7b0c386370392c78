//! Benchmark output directory: TSV/CSV tables, aligned text tables, MANIFEST.

use std::path::Path;

use super::config::RunConfig;
use super::svg::render_scatter_svg;
use crate::analysis::{ProjectionReport, SpuriousScoreReport};
use super::write;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::eval::{BenchmarkResult, EvalReport, NeighborSnapshot, UNBIASED_ROW};

pub const FORMAT_VERSION: &str = "spurlab-bench 1";

/// Accuracy in tenths of a percent, so that the rendered delta is exactly
/// the difference of the rendered accuracies.
fn tenths(acc: f64) -> i64 {
    (acc * 1000.0).round() as i64
}

fn pct(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    format!("{sign}{}.{}", t.abs() / 10, t.abs() % 10)
}

/// `method\tbiased\trobust\tdelta`, percentages to one decimal.
pub fn render_report_row(r: &EvalReport) -> String {
    let (b, rb) = (tenths(r.biased_acc), tenths(r.robust_acc));
    format!("{}\t{}\t{}\t{}", r.method, pct(b), pct(rb), pct(rb - b))
}

pub fn render_report_tsv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method\tbiased_acc\trobust_acc\tdelta\n");
    for r in reports {
        out.push_str(&render_report_row(r));
        out.push('\n');
    }
    out
}

pub fn render_score_row(r: &SpuriousScoreReport, vocab: &Vocabulary) -> String {
    format!(
        "{}\t{}\t{:.4}\t{:.6}",
        vocab.surface(r.target),
        r.k,
        r.sum_score,
        r.mean_score
    )
}

/// Scores keyed by the row (method) that produced them.
pub fn render_scores_tsv(scores: &[(String, SpuriousScoreReport)], vocab: &Vocabulary) -> String {
    let mut out = String::from("method\ttarget\tK\tsum_score\tmean_score\n");
    for (row, s) in scores {
        out.push_str(&format!("{row}\t{}\n", render_score_row(s, vocab)));
    }
    out
}

pub fn render_neighbors_tsv(neighbors: &[(usize, f64, f64)], vocab: &Vocabulary) -> String {
    let mut out = String::from("rank\tsurface\tcosine\tpolarity\n");
    for (rank, (id, cos, pol)) in neighbors.iter().enumerate() {
        out.push_str(&format!("{}\t{}\t{cos:.6}\t{pol:.4}\n", rank + 1, vocab.surface(*id)));
    }
    out
}

pub fn render_projection_csv(p: &ProjectionReport, vocab: &Vocabulary) -> String {
    let mut out = String::from("surface,px,py,polarity\n");
    for pt in &p.points {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.4}\n",
            vocab.surface(pt.token),
            pt.px,
            pt.py,
            pt.polarity
        ));
    }
    out
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c == 0 {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str("  ");
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Accuracy table grouped by training split, then the spurious-score table.
pub fn render_text_tables(result: &BenchmarkResult) -> String {
    let mut rows = vec![vec![
        "Method".to_string(),
        "Biased Acc".to_string(),
        "Robust Acc".to_string(),
        "Delta".to_string(),
    ]];
    let split_row = |label: &str| vec![label.to_string()];
    rows.push(split_row("trained on biased"));
    let mut reference = None;
    for r in &result.reports {
        if r.method == UNBIASED_ROW {
            reference = Some(r);
            continue;
        }
        rows.push(render_report_row(r).split('\t').map(String::from).collect());
    }
    if let Some(r) = reference {
        rows.push(split_row("trained on unbiased"));
        rows.push(render_report_row(r).split('\t').map(String::from).collect());
    }
    let mut out = pad_table(&rows);

    let vocab = &result.vocab;
    let targets = [result.bias.spurious_positive, result.bias.spurious_negative];
    let mut rows = vec![{
        let mut h = vec!["Spurious score".to_string()];
        h.extend(targets.iter().map(|&t| vocab.surface(t).to_string()));
        h
    }];
    let mut names: Vec<&str> = Vec::new();
    for (row, _) in &result.scores {
        if !names.contains(&row.as_str()) {
            names.push(row);
        }
    }
    for name in names {
        let mut r = vec![name.to_string()];
        for &t in &targets {
            r.push(result.score(name, t).map_or("-".into(), |s| format!("{:.2}", s.sum_score)));
        }
        rows.push(r);
    }
    out.push('\n');
    out.push_str(&pad_table(&rows));
    out
}

fn snapshot_file(s: &NeighborSnapshot, vocab: &Vocabulary) -> String {
    format!("neighbors_{}_{}.tsv", s.row, vocab.surface(s.target))
}

fn render_manifest(result: &BenchmarkResult, config: &RunConfig, files: &[String]) -> String {
    let vocab = &result.vocab;
    let c = &result.config;
    let mut out = format!("format = {FORMAT_VERSION}\n");
    out.push_str("\n[config]\n");
    out.push_str(&config.render());
    out.push_str("\n[seeds]\n");
    out.push_str(&format!(
        "master = {}\ngenerator = {}\nplant = {}\ntrain = {}\n",
        c.seed,
        c.generator.seed,
        c.plant.seed,
        c.train_config(crate::train::Method::Standard).seed
    ));
    out.push_str("\n[bias]\n");
    out.push_str(&format!(
        "spurious_positive = {}\nspurious_negative = {}\nrho = {}\n",
        vocab.surface(result.bias.spurious_positive),
        vocab.surface(result.bias.spurious_negative),
        result.bias.rho
    ));
    out.push_str("\n[splits]\n");
    for (name, n) in &result.split_sizes {
        out.push_str(&format!("{name} = {n}\n"));
    }
    out.push_str("\n[pair_cosine]\n");
    for (row, cos) in &result.pair_cosines {
        out.push_str(&format!("{row} = {cos:.6}\n"));
    }
    out.push_str("\n[files]\n");
    for f in files {
        out.push_str(f);
        out.push('\n');
    }
    out
}

/// Writes every report file into `dir`, creating it if needed.
pub fn emit_report(result: &BenchmarkResult, config: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let vocab = &result.vocab;
    let mut files: Vec<(String, String)> = vec![
        ("report.tsv".into(), render_report_tsv(&result.reports)),
        ("scores.tsv".into(), render_scores_tsv(&result.scores, vocab)),
        ("report.txt".into(), render_text_tables(result)),
    ];
    for s in &result.neighbors {
        files.push((snapshot_file(s, vocab), render_neighbors_tsv(&s.neighbors, vocab)));
    }
    let labels = [result.bias.spurious_positive, result.bias.spurious_negative];
    for (row, p) in &result.projections {
        files.push((format!("projection_{row}.csv"), render_projection_csv(p, vocab)));
        files.push((format!("projection_{row}.svg"), render_scatter_svg(p, vocab, &labels)?));
    }
    let names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    files.push(("MANIFEST".into(), render_manifest(result, config, &names)));
    for (name, body) in files {
        write(&dir.join(name), &body)?;
    }
    Ok(())
}
