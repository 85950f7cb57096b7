//! Dense linear algebra, descriptive statistics and seeded randomness.

mod eigen;
mod matrix;
mod rng;
mod stats;

pub use eigen::symmetric_eig;
pub use matrix::{dot, euclidean, manhattan, norm2, Matrix};
pub use rng::SeededRng;
pub use stats::{average_ranks, mean, mean_and_std, median, pearson, quartiles, spearman};
