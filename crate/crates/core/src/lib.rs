//! Pixel-height scene reconstruction and ray tracing for image compositing.
//!
//! The engine is generic over the scalar type (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, and the [`f32`] module offers
//! the single-precision variants.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod channels;
pub mod control;
pub mod demo;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod num;
pub mod oracle;
pub mod render;
pub mod tracer;
pub mod vec3;

pub use control::Control;
pub use error::{Error, Result};
pub use grid::Grid;
pub use num::Real;

pub type Vec3 = vec3::Vec3<f64>;
pub type PixelPoint = geometry::PixelPoint<f64>;
pub type Camera = geometry::TiltShiftCamera<f64>;
pub type HeightMap = geometry::PixelHeightMap<f64>;
pub type SceneGrid = geometry::SceneGrid<f64>;
pub type Scene = tracer::Scene<f64>;
pub type DiskLight = tracer::DiskLight<f64>;
pub type Material = tracer::Material<f64>;

/// Single-precision aliases.
pub mod f32 {
    use super::*;

    pub type Vec3 = vec3::Vec3<f32>;
    pub type PixelPoint = geometry::PixelPoint<f32>;
    pub type Camera = geometry::TiltShiftCamera<f32>;
    pub type HeightMap = geometry::PixelHeightMap<f32>;
    pub type SceneGrid = geometry::SceneGrid<f32>;
    pub type Scene = tracer::Scene<f32>;
    pub type DiskLight = tracer::DiskLight<f32>;
    pub type Material = tracer::Material<f32>;
}
