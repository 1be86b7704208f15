//! Large deviations of the smallest eigenvalue of `G_N + B_N`, with `G_N` a
//! GOE matrix of variance `t` and `B_N` a diagonal matrix whose spectrum
//! approximates an atomic measure `ν` plus one outlier `Λ ≤ ℓ_ν`.
//!
//! ```
//! use outlier_ldp::measure::AtomicMeasure;
//! use outlier_ldp::rate::DeformedModel;
//!
//! let nu = AtomicMeasure::new(&[(-1.0, 0.5), (1.0, 0.5)])?;
//! let model = DeformedModel::new(nu, 1.0, -2.0)?;
//! assert!(model.limit_smallest() < model.ctx().edge());
//! assert!(model.rate(-3.0).to_f64() > 0.0);
//! # Ok::<(), outlier_ldp::error::Error>(())
//! ```

pub mod error;
pub mod free_conv;
pub mod measure;
pub mod numerics;
pub mod prior;
pub mod rate;
pub mod rmt;
pub mod variational;
