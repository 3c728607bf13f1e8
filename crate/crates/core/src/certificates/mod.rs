//! Exact and Monte Carlo checks of the constructive bounds behind the hole
//! probability asymptotics.

mod covariance;
mod omega;
mod vandermonde;
mod volume;

pub use covariance::{covariance_logdet, covariance_logdet_columns, CovarianceAudit};
pub use omega::{
    conditional_hole_check, omega_classes, omega_log_prob, ConditionalHoleReport, OmegaCertificate, OmegaClass,
    OmegaClasses, OmegaComponents,
};
pub use vandermonde::{
    log_abs_det_unit, vandermonde_search, vandermonde_search_with, PointConfiguration, SearchOptions,
};
pub use volume::{volume_bound_audit, VolumeAudit};
