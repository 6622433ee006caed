//! Learning the TP/VIMD blend: quantile and reconstruction losses, the
//! training loop and whole-series encode/decode.

mod codec;
mod loss;
mod normal;
mod quantile;
mod train;

pub use codec::{decode, encode};
pub use loss::{reconstruction_loss, total_loss, LossGrads, LossParts, LossWeights};
pub use normal::{erfc, ks_statistic_normal, normal_cdf, normal_pdf, normal_quantile};
pub use quantile::{empirical_quantiles, quantile_loss, QuantileSpec, QuantileTable};
pub use train::{
    sample_quantile_loss, train_pp, train_pp_checkpointed, EpochRecord, HoldoutSummary, TrainConfig, TrainHistory,
    TrainOutcome, MIN_POINTS,
};
