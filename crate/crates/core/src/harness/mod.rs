//! Seeded Monte Carlo harness: data generation, summaries and bound checks.
//!
//! Every random draw comes from a stream keyed by the master seed, the
//! replication index and a purpose tag, so results do not depend on the
//! number of worker threads (`AGGLAB_THREADS`).

pub mod checks;
pub mod instances;
pub mod mc;
pub mod rng;
pub mod spec;
pub mod stats;

pub use checks::{
    check_model_aggregation, check_progressive_mixture, check_ridge_family, check_sure_unbiased,
    check_thm_fixed_ew, check_thm_fixed_q, check_thm_random_q, model_aggregation_sweep, SweepReport,
};
pub use mc::{mc_run, mc_run_with, Estimator};
pub use spec::{gen_fixed_design, gen_random_design, true_risks_discrete, ExperimentSpec};
pub use stats::{MCReport, Summary};
