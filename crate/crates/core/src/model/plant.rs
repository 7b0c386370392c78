use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ModelConfig, ModelParams};
use crate::corpus::{TokenGroup, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor::{dot, norm, Matrix};

/// Stand-in for pretraining: token vectors scattered around per-group centers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub scale: f64,
    /// Expected norm of the per-token noise vector; each coordinate has
    /// standard deviation `noise / sqrt(d)`.
    pub noise: f64,
    pub min_angle_deg: f64,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            scale: 1.0,
            noise: 0.3,
            min_angle_deg: 60.0,
            seed: 0,
        }
    }
}

const CENTER_ATTEMPTS: usize = 10_000;
const INIT_STD: f64 = 0.1;

fn gaussian(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| gaussian(rng, std)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Plants semantic centers and returns parameters whose block is the identity
/// on the residual stream (`Wo = 0`, `A2 = 0`, `b2 = 0`, `Pos = 0`).
pub fn init_planted(vocab: &Vocabulary, cfg: &ModelConfig, plant: &PlantSpec) -> Result<ModelParams> {
    if plant.noise < 0.0 || !plant.noise.is_finite() {
        return Err(Error::Config(format!("plant noise {} must be >= 0", plant.noise)));
    }
    if !(plant.min_angle_deg > 0.0 && plant.min_angle_deg <= 90.0) {
        return Err(Error::Config(format!(
            "minimum center angle {} outside (0, 90]",
            plant.min_angle_deg
        )));
    }
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(plant.seed);
    let max_cos = plant.min_angle_deg.to_radians().cos();

    let groups = vocab.semantic_groups();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut accepted = None;
        for _ in 0..CENTER_ATTEMPTS {
            let mut c: Vec<f64> = (0..d).map(|_| gaussian(&mut rng, 1.0)).collect();
            let n = norm(&c);
            if n < 1e-12 {
                continue;
            }
            c.iter_mut().for_each(|x| *x /= n);
            // Small tolerance so that exactly orthogonal centers pass at 90°.
            if centers.iter().all(|o| dot(o, &c) <= max_cos + 1e-12) {
                accepted = Some(c);
                break;
            }
        }
        let Some(c) = accepted else {
            return Err(Error::Planting(format!(
                "no center for {group} at >= {}° from {} others in d={d}",
                plant.min_angle_deg,
                centers.len()
            )));
        };
        centers.push(c);
    }

    let noise_std = plant.noise / (d as f64).sqrt();
    let mut params = ModelParams::zeros(vocab.len(), cfg);
    for entry in vocab.entries() {
        let center = match entry.group {
            TokenGroup::Special => None,
            g => groups.iter().position(|x| *x == g).map(|i| &centers[i]),
        };
        let row = params.embeddings.row_mut(entry.id);
        for (j, x) in row.iter_mut().enumerate() {
            let base = center.map_or(0.0, |c| plant.scale * c[j]);
            *x = base + if noise_std > 0.0 { gaussian(&mut rng, noise_std) } else { 0.0 };
        }
    }
    params.wq = random_matrix(&mut rng, d, d, INIT_STD);
    params.wk = random_matrix(&mut rng, d, d, INIT_STD);
    params.wv = random_matrix(&mut rng, d, d, INIT_STD);
    params.mlp_in = random_matrix(&mut rng, d, d, INIT_STD);
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GeneratorConfig;
    use crate::tensor::norm;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (norm(a) * norm(b))
    }

    #[test]
    fn zero_noise_collapses_groups() {
        let vocab = Vocabulary::build(&GeneratorConfig::default()).unwrap();
        let plant = PlantSpec {
            noise: 0.0,
            ..PlantSpec::default()
        };
        let p = init_planted(&vocab, &ModelConfig::default(), &plant).unwrap();
        let pos = vocab.ids_in(TokenGroup::GenuinePositive);
        for &id in &pos[1..] {
            assert_eq!(p.embeddings.row(id), p.embeddings.row(pos[0]));
        }
        assert!(p.wo.data.iter().all(|&x| x == 0.0));
        assert!(p.mlp_out.data.iter().all(|&x| x == 0.0));
        assert!(p.positions.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn within_group_cosine_beats_cross_group() {
        let vocab = Vocabulary::build(&GeneratorConfig::default()).unwrap();
        let p = init_planted(&vocab, &ModelConfig::default(), &PlantSpec::default()).unwrap();
        let groups = vocab.semantic_groups();
        let members: Vec<Vec<usize>> = groups.iter().map(|g| vocab.ids_in(*g)).collect();
        let mean_cos = |a: &[usize], b: &[usize], same: bool| {
            let (mut s, mut n) = (0.0, 0usize);
            for &i in a {
                for &j in b {
                    if same && i >= j {
                        continue;
                    }
                    s += cos(p.embeddings.row(i), p.embeddings.row(j));
                    n += 1;
                }
            }
            s / n as f64
        };
        for (gi, a) in members.iter().enumerate() {
            let within = mean_cos(a, a, true);
            for (gj, b) in members.iter().enumerate() {
                if gi != gj {
                    let cross = mean_cos(a, b, false);
                    assert!(within > cross, "{:?} vs {:?}: {within} <= {cross}", groups[gi], groups[gj]);
                }
            }
        }
    }

    #[test]
    fn infeasible_angle_errors() {
        let vocab = Vocabulary::build(&GeneratorConfig::default()).unwrap();
        let cfg = ModelConfig {
            dim: 2,
            ..ModelConfig::default()
        };
        let plant = PlantSpec {
            min_angle_deg: 90.0,
            ..PlantSpec::default()
        };
        assert!(matches!(init_planted(&vocab, &cfg, &plant), Err(Error::Planting(_))));
    }
}
