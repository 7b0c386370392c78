//! Neighborhood analysis: single-token representations, cosine k-NN over the
//! vocabulary, the rank-paired spurious score, and 2-D projections.

mod neighbors;
mod pca;
mod score;

pub use neighbors::{cosine_similarity, nearest_neighbors, NeighborList, Representations};
pub use pca::{pca_project, project_vectors, symmetric_eigen, ProjectedPoint, ProjectionReport};
pub use score::{polarity_of, spurious_score, PolarityTable, SpuriousScoreReport};
