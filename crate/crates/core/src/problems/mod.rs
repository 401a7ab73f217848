//! Problem families: logistic minimax with ambiguous features, a stochastic
//! matrix game over two simplices, and linear instances with planted spectra.

mod game;
mod linear;
mod logistic;
mod spectral;

pub use game::{build_matrix_game, MatrixGame, MatrixGameSpec, GAME_EPSILON};
pub use linear::{build_synthetic_linear, linear_from_parts, LinearShift, SyntheticLinearSpec};
pub use logistic::{
    build_logistic_minimax, logistic_loss, logistic_loss_derivative, LogisticMinimax, RegKind,
};
pub use spectral::{estimate_l_features, power_iteration, spectral_norm, L_FLOOR};
