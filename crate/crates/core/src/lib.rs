//! Change detection between two street-level structure-from-motion point
//! clouds captured at different times.
//!
//! The pipeline registers the later cloud onto the earlier one with a
//! Gaussian RBF warp, then compares them point by point, keeping only
//! differences that both reconstructions were in a position to observe.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`/`*32`
//! aliases name the common instantiations.

pub mod scalar;
pub mod error;
pub mod cloud;
pub mod index;
pub mod normals;
pub mod ground;
pub mod warp;
pub mod loss;
pub mod optim;
pub mod change;
pub mod synth;
pub mod eval;
pub mod io;
pub mod config;
pub mod pipeline;

pub use cloud::PointCloud;
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use index::{Metric, Neighbor, SpatialIndex};
pub use loss::{chamfer_sq, loss_gradient, motion_regularizer, total_loss, LossValue, Objective};
pub use optim::{
    optimize_direct, optimize_network, LossRecord, Mode, OptimizationReport, PointEncoderNet, RegistrationConfig,
};
pub use pipeline::{apply_warp, register, run_pipeline, PipelineOutput};
pub use scalar::Real;
pub use warp::{make_anchor_grid, warp_cloud, warp_point, AnchorGrid, WarpParams};

pub type PointCloud64 = PointCloud<f64>;
pub type PointCloud32 = PointCloud<f32>;
pub type WarpParams64 = WarpParams<f64>;
pub type WarpParams32 = WarpParams<f32>;
pub type SpatialIndex64 = SpatialIndex<f64>;
pub type SpatialIndex32 = SpatialIndex<f32>;
