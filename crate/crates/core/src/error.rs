use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported matrix: eigenvalue {re}{im:+}i is defective (geometric multiplicity {geo} < algebraic multiplicity {alg}); supply an explicit basis")]
    DefectiveEigenvalue {
        re: f64,
        im: f64,
        alg: usize,
        geo: usize,
    },

    #[error("scale limit exceeded: {actual} nodes > {max} (exhaustive search guard)")]
    ScaleLimit { actual: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("MEDAG construction failed to terminate for block {block} within {max_rounds} rounds")]
    DesignPhaseFailed {
        block: usize,
        max_rounds: usize,
        /// counter state at abort: nodes that did activate
        activated: Vec<usize>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
