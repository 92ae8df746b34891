//! Window-state models: the regressor state, its linear shift update, the output-error
//! loss, training and free-run prediction.
//!
//! The state `z_t` stacks the last `ell` input/output pairs, oldest first. It evolves by
//! `z_{t+1} = Abar z_t + Bbar u_t + Sbar y_t`, which just drops the oldest pair and
//! appends the newest, so the only learned piece is the output map `y_t = H(z_t, u_t)`.

mod loss;
mod model;
mod rollout;
mod state;
mod train;

pub use loss::{regression_loss, regression_loss_gradient, FIRST_STEP_WEIGHT};
pub(crate) use model::Series;
pub use model::{RegressorModel, MODEL_FORMAT_VERSION};
pub use rollout::{
    evaluate_rollout, rollout, sequence_mse, write_eval_csv, write_summary_csv, EvalRow, EvalSummaryRow,
    Evaluation, Forecaster,
};
pub use state::{build_state, canonical_matrices, shift_in_place, shift_update, CanonicalMatrices, StateMapSpec};
pub(crate) use train::csv_error;
pub use train::{train_regressor, EpochRecord, TrainConfig, TrainReport};
