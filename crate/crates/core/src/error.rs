use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid plan at action {index}: {reason}")]
    InvalidPlan { index: usize, reason: String },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("resolution {resolution} cells/unit is too coarse for footprint {w}x{d}")]
    ResolutionTooCoarse { resolution: u32, w: f64, d: f64 },

    #[error("no valid actions from this state")]
    NoActions,

    #[error("no plan found within the time limit")]
    NoPlanFound,

    #[error("class `{class}` has {initial} initial and {target} target detections")]
    CountMismatch { class: String, initial: usize, target: usize },

    #[error("scene generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("success rate is zero, ESC is undefined")]
    ZeroSuccess,

    #[error("empty set of ESC values")]
    EmptySet,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
