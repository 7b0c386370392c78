//! Accuracy metrics, the biased/robust/Δ report, and the end-to-end benchmark.

mod bench;

pub use bench::{
    pretrain_quality_sweep, run_benchmark, select_spurious_pair, BenchmarkConfig, BenchmarkResult,
    NeighborSnapshot, RunRow, SweepRow, PLANTED_ROW, UNBIASED_ROW,
};

use crate::corpus::{BiasSpec, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::train::argmax;

/// Fraction of examples whose argmax prediction (ties to the lower class)
/// equals the label.
pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("accuracy on an empty dataset"));
    }
    let mut correct = 0usize;
    for x in &data.examples {
        if argmax(&model.predict(&x.tokens)?) == x.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub biased_acc: f64,
    pub robust_acc: f64,
    /// `robust_acc − biased_acc`
    pub delta: f64,
}

impl EvalReport {
    pub fn new(method: impl Into<String>, biased_acc: f64, robust_acc: f64) -> Self {
        Self {
            method: method.into(),
            biased_acc,
            robust_acc,
            delta: robust_acc - biased_acc,
        }
    }
}

fn expect(ds: &Dataset, provenance: Provenance) -> Result<()> {
    if ds.provenance != provenance {
        return Err(Error::Provenance {
            expected: provenance.name(),
            found: ds.provenance.name(),
        });
    }
    Ok(())
}

/// Biased accuracy on the biased test split and robust accuracy on the
/// challenging subset. Challenging membership is re-checked against `bias`.
pub fn evaluate_robustness(
    name: &str,
    model: &Model,
    biased_test: &Dataset,
    challenging: &Dataset,
    bias: &BiasSpec,
) -> Result<EvalReport> {
    expect(biased_test, Provenance::Biased)?;
    expect(challenging, Provenance::Challenging)?;
    if let Some(i) = challenging.examples.iter().position(|e| !bias.touches(e)) {
        return Err(Error::Config(format!(
            "challenging example {i} contains no spurious token"
        )));
    }
    Ok(EvalReport::new(
        name,
        accuracy(model, biased_test)?,
        accuracy(model, challenging)?,
    ))
}
