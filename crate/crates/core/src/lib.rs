//! Nonparametric kernel estimation of the trend S in
//!
//! ```text
//! dX_t = S(X_t) dt + eps sigma1(t, X_t) sigma2(t, Y_t) dW_t,   0 <= t <= T,
//! ```
//!
//! in the small-noise regime eps -> 0, together with the simulation and
//! Monte Carlo machinery needed to check its consistency, rate and limit
//! law empirically.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod kernels;
pub mod model;
pub mod ode;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use estimator::{bandwidth_for, estimate_at, estimate_series, EstimateSeries};
pub use kernels::{build_order_k_kernel, verify_kernel_conditions, Kernel};
pub use model::{DiffusionSpec, Scenario, TrendSpec, VolatilitySpec};
pub use ode::solve_limit_ode;
pub use rng::SeedPlan;
pub use sim::simulate_path;
