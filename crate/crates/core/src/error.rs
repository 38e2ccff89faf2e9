use thiserror::Error;

pub type Result<T, E = CdmeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CdmeError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("state space of {size} entries exceeds the cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("spaces differ: state is (N={state_modes}, M={state_degree}), operator is (N={op_modes}, M={op_degree})")]
    SpaceMismatch {
        state_modes: usize,
        state_degree: usize,
        op_modes: usize,
        op_degree: usize,
    },

    #[error("rk4 blew up at t={time} (norm {norm:e}); retry with dt <= {suggested_dt:e}")]
    Unstable {
        time: f64,
        norm: f64,
        suggested_dt: f64,
    },

    #[error("rejection bound violated: rate {value} at x={x} exceeds sup {sup}")]
    RejectionBound { x: f64, value: f64, sup: f64 },

    #[error("replica {replica} exceeded {cap} reaction events before the horizon")]
    EventCap { replica: u64, cap: u64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("logic error: {0}")]
    Logic(String),
}
