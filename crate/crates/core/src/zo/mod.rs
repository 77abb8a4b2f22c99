//! Zeroth-order leader loop with Tikhonov-regularized follower responses.

mod estimator;
mod schedule;
mod seek;
mod sphere;
mod stationarity;

pub use estimator::{estimate_gradient, two_point_estimate, EstimatorSign};
pub use schedule::{schedule, time_scale_ratio, ScheduleParams, ScheduleValues};
pub use seek::{seek, InnerSummary, SeekFault, SeekOptions, SeekProblem, Trace, TraceRecord};
pub use sphere::sample_sphere;
pub use stationarity::{induced_gradient_fd, stationarity_profile, FdStep};
