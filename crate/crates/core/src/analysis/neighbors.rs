use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{token_representation, ModelParams};
use crate::tensor::{dot, norm};

/// `u·v/(‖u‖‖v‖)`, or 0 when either vector is numerically zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu < 1e-12 || nv < 1e-12 {
        return 0.0;
    }
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

/// Single-token representations of every content token under one model.
#[derive(Debug, Clone)]
pub struct Representations {
    /// Indexed by token id; specials hold `None`.
    vectors: Vec<Option<Vec<f64>>>,
}

impl Representations {
    pub fn compute(lm: &ModelParams, vocab: &Vocabulary) -> Result<Self> {
        let mut vectors = vec![None; vocab.len()];
        for id in vocab.content_ids() {
            vectors[id] = Some(token_representation(lm, id)?);
        }
        Ok(Self { vectors })
    }

    pub fn get(&self, id: usize) -> Result<&[f64]> {
        self.vectors
            .get(id)
            .and_then(|v| v.as_deref())
            .ok_or(Error::SpecialToken(id))
    }

    /// Ranks every other content token by cosine similarity to `target`,
    /// descending, ties by ascending id; keeps the top `k`.
    pub fn neighbors(&self, target: usize, k: usize) -> Result<NeighborList> {
        let t = self.get(target)?;
        let mut scored: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .filter(|(id, v)| *id != target && v.is_some())
            .map(|(id, v)| (id, cosine_similarity(t, v.as_deref().unwrap_or_default())))
            .collect();
        if k > scored.len() {
            return Err(Error::KTooLarge {
                k,
                eligible: scored.len(),
            });
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(NeighborList {
            target,
            neighbors: scored,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub target: usize,
    /// `(token, cosine)`, most similar first.
    pub neighbors: Vec<(usize, f64)>,
}

impl NeighborList {
    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.neighbors.iter().map(|(id, _)| *id)
    }
}

pub fn nearest_neighbors(lm: &ModelParams, vocab: &Vocabulary, target: usize, k: usize) -> Result<NeighborList> {
    if vocab.is_special(target) {
        return Err(Error::SpecialToken(target));
    }
    Representations::compute(lm, vocab)?.neighbors(target, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{GeneratorConfig, TokenEntry, TokenGroup};
    use crate::model::{init_planted, ModelConfig, PlantSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_basics() {
        assert_abs_diff_eq!(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]), 1.0, epsilon = 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_abs_diff_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn degenerate_planting_groups_neighbors() {
        let vocab = Vocabulary::build(&GeneratorConfig::default()).unwrap();
        let plant = PlantSpec {
            noise: 0.0,
            ..PlantSpec::default()
        };
        let lm = init_planted(&vocab, &ModelConfig::default(), &plant).unwrap();
        let pos = vocab.ids_in(TokenGroup::GenuinePositive);
        let list = nearest_neighbors(&lm, &vocab, pos[0], pos.len() - 1).unwrap();
        assert_eq!(list.ids().collect::<Vec<_>>(), pos[1..].to_vec());
    }

    #[test]
    fn full_k_covers_every_eligible_token() {
        let vocab = Vocabulary::build(&GeneratorConfig::default()).unwrap();
        let lm = init_planted(&vocab, &ModelConfig::default(), &PlantSpec::default()).unwrap();
        let k = vocab.len() - 5;
        let list = nearest_neighbors(&lm, &vocab, 30, k).unwrap();
        let mut ids: Vec<usize> = list.ids().collect();
        ids.sort_unstable();
        let expected: Vec<usize> = vocab.content_ids().filter(|&i| i != 30).collect();
        assert_eq!(ids, expected);
        assert!(list.neighbors.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(matches!(
            nearest_neighbors(&lm, &vocab, 30, k + 1),
            Err(Error::KTooLarge { .. })
        ));
        assert!(matches!(nearest_neighbors(&lm, &vocab, 2, 3), Err(Error::SpecialToken(2))));
    }

    #[test]
    fn eight_token_table_matches_exhaustive_sort() {
        let mut entries: Vec<TokenEntry> = ["<pad>", "<unk>", "<bos>", "<eos>"]
            .iter()
            .enumerate()
            .map(|(id, s)| TokenEntry {
                id,
                surface: s.to_string(),
                group: TokenGroup::Special,
            })
            .collect();
        for i in 0..8 {
            entries.push(TokenEntry {
                id: 4 + i,
                surface: format!("w{i}"),
                group: TokenGroup::Filler,
            });
        }
        let vocab = Vocabulary::from_entries(entries).unwrap();
        let cfg = ModelConfig {
            dim: 3,
            max_positions: 3,
            ..ModelConfig::default()
        };
        let mut lm = ModelParams::zeros(vocab.len(), &cfg);
        let table = [
            [1.0, 0.0, 0.0],
            [0.9, 0.1, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.2, 0.1],
            [0.5, 0.5, 0.5],
            [2.0, 0.0, 0.0], // ties with the target direction
            [0.3, -0.8, 0.2],
            [0.7, 0.0, 0.7],
        ];
        for (i, row) in table.iter().enumerate() {
            lm.embeddings.row_mut(4 + i).copy_from_slice(row);
        }
        let target = 4;
        // Brute force: all seven cosines, then a stable two-key sort.
        let mut oracle: Vec<(usize, f64)> = (1..8)
            .map(|i| {
                let (a, b) = (table[0], table[i]);
                let c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
                    / ((a.iter().map(|x| x * x).sum::<f64>()).sqrt()
                        * (b.iter().map(|x| x * x).sum::<f64>()).sqrt());
                (4 + i, c)
            })
            .collect();
        oracle.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let got = nearest_neighbors(&lm, &vocab, target, 7).unwrap();
        assert_eq!(got.ids().collect::<Vec<_>>(), oracle.iter().map(|x| x.0).collect::<Vec<_>>());
        assert_eq!(got.neighbors[0].0, 9);
    }
}
