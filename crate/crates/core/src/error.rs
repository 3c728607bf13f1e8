use thiserror::Error;

use crate::certificates::PointConfiguration;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The weight envelope never turned negative before the model's cutoff.
    #[error("support scan exhausted at r = {r}: weight still nonnegative at index {index}")]
    SupportScanExhausted { r: f64, index: usize },

    #[error("plan construction failed: {0}")]
    PlanConstruction(String),

    #[error("zero on contour at angle {phi} (radius {radius})")]
    ZeroOnContour { radius: f64, phi: f64 },

    #[error("search exhausted after {} tries; best log|det U| = {}", .best.tries_used, .best.log_absdet_unit)]
    SearchExhausted { best: Box<PointConfiguration> },

    #[error("conditioning failure at pivot {pivot}: partial log det = {partial_log_det}")]
    ConditioningFailure { pivot: usize, partial_log_det: f64 },

    #[error("model description: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
