//! Phase differences within orbit families, their statistics and variances.

mod clt;
mod continuation;
mod phase;
mod variance;

pub use clt::{clt_diagnostics, ks_tolerance, CltReport, MIN_SAMPLES};
pub use continuation::{action_difference_identity_check, fit_exponent, ActionIdentityReport};
pub use phase::{
    phase_difference, relative_phase, sample_phase_distribution, PhaseSample, PhaseSampleSet,
    SamplingMode,
};
pub use variance::{
    class_representative, full_variance_table, per_bond_variance_table, quotient_projection,
    variance_series, variance_time_average, variance_time_average_obs, CorrelationSource,
    GeometricCorrelations, LadderRung, MonteCarloCorrelations, SeriesEstimate, TableKind,
    TimeAverageEstimate, VarianceEntry, VarianceEstimator, VarianceTable, LADDER,
};
