use thiserror::Error;

/// Everything that can go wrong while solving, sampling or simulating a game.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The stationarity condition has no defined approach angle: the defender
    /// sits on the perimeter and the breaching point is directly below it or
    /// diametrically opposite.
    #[error("approach angle undefined for phi_d = {phi_d}, theta = {theta}")]
    DegenerateApproach { phi_d: f64, theta: f64 },

    #[error("breaching-angle residual has {sign_changes} sign changes on [{lo}, {hi}]")]
    NoBracket {
        lo: f64,
        hi: f64,
        sign_changes: usize,
    },

    #[error("barrier curvature is singular for a defender on the perimeter (phi_d = 0)")]
    SingularCurvature,

    #[error("level set offset {offset} crosses the perimeter at theta = {theta}")]
    LevelSetInsidePerimeter { theta: f64, offset: f64 },

    #[error("azimuthal rate undefined at the pole (phi_d = {phi_d}, omega_d = {omega_d})")]
    PoleSingularity { phi_d: f64, omega_d: f64 },

    #[error("breach and capture conditions hold simultaneously (r = {r}, separation = {separation})")]
    AmbiguousTerminal { r: f64, separation: f64 },
}

impl GameError {
    /// Stable machine-readable code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            GameError::InvalidInput(_) => "invalid_input",
            GameError::DegenerateApproach { .. } => "degenerate_approach",
            GameError::NoBracket { .. } => "no_bracket",
            GameError::SingularCurvature => "singular_curvature",
            GameError::LevelSetInsidePerimeter { .. } => "level_set_inside_perimeter",
            GameError::PoleSingularity { .. } => "pole_singularity",
            GameError::AmbiguousTerminal { .. } => "ambiguous_terminal",
        }
    }
}

pub type Result<T> = std::result::Result<T, GameError>;
