//! Pixel-height ↔ world mapping.
//!
//! A pixel-height map stores, for every covered pixel, the number of image
//! rows between the pixel and the projection of its vertical drop onto the
//! ground (its foot point). Given a no-pitch camera the foot pixel fixes the
//! projective scale of the ray, which in turn fixes the 3-D point.

mod camera;
mod heightmap;
mod scene;

pub use camera::{TiltShiftCamera, DEFAULT_HORIZON_FRACTION, HORIZON_EPSILON};
pub use heightmap::PixelHeightMap;
pub use scene::{estimate_normals, reconstruct_scene, Layer, SceneGrid};

use crate::num::Real;

/// A location in pixel-height space: image column, image row and pixel height.
///
/// Straight 3-D lines map to straight lines in this space, which is what lets
/// the tracer interpolate ray heights linearly along an image segment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelPoint<T> {
    pub u: T,
    pub v: T,
    pub h: T,
}

impl<T: Real> PixelPoint<T> {
    pub const fn new(u: T, v: T, h: T) -> Self {
        Self { u, v, h }
    }

    /// Row of the foot pixel.
    #[inline]
    pub fn foot_row(&self) -> T {
        self.v + self.h
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> T {
        let du = self.u - o.u;
        let dv = self.v - o.v;
        let dh = self.h - o.h;
        (du * du + dv * dv + dh * dh).sqrt()
    }

    #[inline]
    pub fn lerp(&self, o: &Self, s: T) -> Self {
        Self::new(
            self.u + (o.u - self.u) * s,
            self.v + (o.v - self.v) * s,
            self.h + (o.h - self.h) * s,
        )
    }
}
