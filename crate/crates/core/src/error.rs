use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map specification: {0}")]
    MapSpec(#[from] serde_json::Error),
    #[error("orbit escaped past the overflow radius after {steps} step(s)")]
    Escaped { steps: u64 },
    #[error("resonant multiplier at order {order}: |ν^k − ν'| = {gap:e}")]
    Resonance { order: usize, gap: f64 },
    #[error("not a saddle: {0}")]
    NotSaddle(String),
    #[error("normalization bracket failure: {0}")]
    Bracket(String),
    #[error("vector is not tangent to the unstable line (angle {angle:e})")]
    NotTangent { angle: f64 },
    #[error("curves do not match: {0}")]
    Mismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
