//! Targets used by the experiments.

pub mod gaussian;
pub mod io;
pub mod ising;
pub mod lda;

pub use gaussian::{make_covariance, CovarianceParams, GaussianTarget};
pub use ising::{corrupt_image, IsingDenoiseTarget};
pub use lda::{make_bars_corpus, make_bars_corpus_with, BarsCorpus, Corpus, LdaModel, LdaState};
