//! Iterative domain optimization.
//!
//! Searches for an axis-aligned box `Π [c_i - σ_i, c_i + σ_i]` over which a
//! black-box function has a large, small or prescribed mean. Each iteration
//! samples the current box, fits a quadratic surrogate, and takes an ascent
//! step on the surrogate's closed-form box mean plus width gain and penalty
//! terms.
//!
//! ```
//! use idopt::{optimizer, BoxDomain, FeatureSchema, ObjectiveMode, OptimizerConfig, PenaltyWeights};
//! use idopt::models::TestFunction;
//!
//! let f = TestFunction::quadratic_bowl(vec![1.0, 1.0], 5.0);
//! let init = BoxDomain::around(vec![0.0, 0.0], 0.5).unwrap();
//! let cfg = OptimizerConfig { iterations: 100, ..Default::default() };
//! let out = optimizer::run(&f, &FeatureSchema::numeric(2), &init, &cfg,
//!                          &PenaltyWeights::default(), ObjectiveMode::Maximize).unwrap();
//! assert_eq!(out.trajectory.len(), 100);
//! ```

pub mod box_integral;
pub mod case;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod models;
pub mod objective;
pub mod optimizer;
pub mod pipeline;
pub mod surrogate;

pub use domain::{
    apply_constraints, free_mask, BoxDomain, Constraint, DimKind, DimSpec, FeatureSchema, ObjectiveMode,
    OptimizerConfig, OptimizerKind, PenaltyWeights,
};
pub use error::{Error, Result};
pub use models::BlackBox;
