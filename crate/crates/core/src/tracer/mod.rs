//! Ray tracing directly in pixel-height space.
//!
//! Every query walks the image projection of a 3-D segment and compares the
//! linearly interpolated ray height with the scene's pixel height at each
//! step, so a query costs at most `max(W, H)` height lookups.

mod composite;
mod field;
mod reflection;
mod refraction;
pub mod sampling;
mod shadow;

pub use composite::{composite, CompositeLayers, Rgb, Rgba};
pub use field::{
    walk, Block, HeightField, HeightSample, Step, TraversalStats, BIAS_RAMP_STEPS, CONNECTIVITY_THRESHOLD,
    ORIGIN_BIAS, RESIDUAL_BIAS,
};
pub use reflection::{accumulate_reflection, render_reflection, MaterialMap, ReflectionAccumulator};
pub use refraction::{render_refraction, RefractionMode, Refractor};
pub use sampling::{fresnel_schlick, lobe_exponent, refract, sample_glossy_lobe};
pub use shadow::{
    accumulate_soft_shadow, hard_shadow, soft_shadow, soft_shadow_with, uniform_soft_shadow,
    ShadowAccumulator,
};

use crate::error::{Error, Result};
use crate::geometry::{
    estimate_normals, reconstruct_scene, Layer, PixelHeightMap, PixelPoint, SceneGrid,
    TiltShiftCamera,
};
use crate::grid::Grid;
use crate::num::Real;
use crate::vec3::Vec3;

/// Disk-shaped area light, positioned in pixel-height space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskLight<T> {
    pub center: PixelPoint<T>,
    /// Radius in pixel-height units.
    pub radius: T,
    /// Scales reflection contribution only; visibility ignores it.
    pub intensity: T,
}

impl<T: Real> DiskLight<T> {
    pub fn new(center: PixelPoint<T>, radius: T) -> Result<Self> {
        let light = Self {
            center,
            radius,
            intensity: T::one(),
        };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= T::zero()) || !self.radius.is_finite() {
            return Err(Error::invalid(format!("light radius must be >= 0, got {}", self.radius)));
        }
        if !(self.center.h > T::zero()) || !self.center.h.is_finite() {
            return Err(Error::invalid(format!(
                "light height must be > 0, got {}",
                self.center.h
            )));
        }
        if !(self.intensity >= T::zero()) {
            return Err(Error::invalid("light intensity must be >= 0"));
        }
        if !(self.center.u.is_finite() && self.center.v.is_finite()) {
            return Err(Error::invalid("light position must be finite"));
        }
        Ok(())
    }
}

/// Receiver surface description for reflections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material<T> {
    pub albedo: [f32; 3],
    /// 1 is a perfect mirror.
    pub glossiness: T,
    /// Refractive index used by the Fresnel term.
    pub eta: T,
    pub reflect_weight: T,
}

impl<T: Real> Material<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = T::zero()..=T::one();
        if !self.albedo.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::invalid("albedo components must lie in [0, 1]"));
        }
        if !unit.contains(&self.glossiness) {
            return Err(Error::invalid("glossiness must lie in [0, 1]"));
        }
        if !(self.eta >= T::one()) {
            return Err(Error::invalid("eta must be >= 1"));
        }
        if !unit.contains(&self.reflect_weight) {
            return Err(Error::invalid("reflect_weight must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl<T: Real> Default for Material<T> {
    fn default() -> Self {
        Self {
            albedo: [1.0; 3],
            glossiness: T::of(0.9),
            eta: T::of(1.5),
            reflect_weight: T::one(),
        }
    }
}

/// Closest surface crossing found by [`trace_first_hit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord<T> {
    /// Nearest integer pixel of the crossing.
    pub pixel: (usize, usize),
    /// Continuous image position of the crossing step.
    pub position: (T, T),
    pub height_at_hit: T,
    /// Distance along the (unit) ray direction in world units.
    pub param: T,
    pub kind: Layer,
}

/// Everything the tracer needs about a composited scene.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    camera: TiltShiftCamera<T>,
    fg: PixelHeightMap<T>,
    bg: PixelHeightMap<T>,
    grid: SceneGrid<T>,
    field: HeightField<T>,
    bg_field: HeightField<T>,
    receivers: Grid<bool>,
}

impl<T: Real> Scene<T> {
    pub fn new(
        camera: TiltShiftCamera<T>,
        fg: PixelHeightMap<T>,
        bg: PixelHeightMap<T>,
    ) -> Result<Self> {
        let grid = estimate_normals(reconstruct_scene(&camera, &fg, &bg)?, &camera);
        let field = HeightField::new(&fg, &bg);
        let bg_field = field.background_only();
        let receivers = Grid::from_fn(camera.image_width(), camera.image_height(), |x, y| {
            *grid.valid.get(x, y) && *grid.layer.get(x, y) == Layer::Background
        });
        Ok(Self {
            camera,
            fg,
            bg,
            grid,
            field,
            bg_field,
            receivers,
        })
    }

    /// Background-only scene (nothing composited on top).
    pub fn background(camera: TiltShiftCamera<T>, bg: PixelHeightMap<T>) -> Result<Self> {
        let (w, h) = bg.dims();
        Self::new(camera, PixelHeightMap::empty(w, h), bg)
    }

    pub fn camera(&self) -> &TiltShiftCamera<T> {
        &self.camera
    }
    pub fn foreground(&self) -> &PixelHeightMap<T> {
        &self.fg
    }
    pub fn background_heights(&self) -> &PixelHeightMap<T> {
        &self.bg
    }
    pub fn grid(&self) -> &SceneGrid<T> {
        &self.grid
    }
    pub fn field(&self) -> &HeightField<T> {
        &self.field
    }
    pub fn background_field(&self) -> &HeightField<T> {
        &self.bg_field
    }
    /// Pixels that can receive shadows and reflections: valid background not covered by a cutout.
    pub fn receivers(&self) -> &Grid<bool> {
        &self.receivers
    }
    pub fn width(&self) -> usize {
        self.camera.image_width()
    }
    pub fn height(&self) -> usize {
        self.camera.image_height()
    }
    pub fn dims(&self) -> (usize, usize) {
        self.camera.dims()
    }

    /// Pixel-space location of the visible surface at integer pixel `(x, y)`.
    pub fn surface_point(&self, x: usize, y: usize) -> PixelPoint<T> {
        PixelPoint::new(
            T::of_usize(x),
            T::of_usize(y),
            self.field.at(x, y).height,
        )
    }
}

/// Whether the straight segment between two pixel-space points is unobstructed.
/// A segment whose image projection has zero length is trivially visible.
pub fn trace_visibility<T: Real>(
    field: &HeightField<T>,
    from: PixelPoint<T>,
    to: PixelPoint<T>,
) -> (bool, TraversalStats) {
    let (block, stats) = field.first_block(from, to);
    (block.is_none(), stats)
}

/// First pixel where a 3-D ray leaving `origin` passes under the composited surface.
pub fn trace_first_hit<T: Real>(
    scene: &Scene<T>,
    origin: PixelPoint<T>,
    direction: Vec3<T>,
) -> Result<Option<HitRecord<T>>> {
    trace_first_hit_in(scene, scene.field(), origin, direction)
}

/// [`trace_first_hit`] against an explicit height field (e.g. background only).
pub fn trace_first_hit_in<T: Real>(
    scene: &Scene<T>,
    field: &HeightField<T>,
    origin: PixelPoint<T>,
    direction: Vec3<T>,
) -> Result<Option<HitRecord<T>>> {
    let cam = scene.camera();
    if !cam.contains_pixel(origin.u, origin.v) {
        return Err(Error::invalid(format!(
            "ray origin ({}, {}) lies outside the image",
            origin.u, origin.v
        )));
    }
    let dir = direction
        .try_normalize()
        .ok_or_else(|| Error::invalid("ray direction must be non-zero"))?;
    let p0 = cam.reconstruct_unchecked(origin.u, origin.v, origin.h)?;

    let mut t_far = T::of(1e3) * ((p0 - cam.origin()).length() + cam.cam_height());
    if dir.y < T::zero() {
        // run past the ground plane so the ground itself can be crossed
        let t_ground = -p0.y / dir.y;
        t_far = t_far.min(T::of(2.0) * t_ground + T::of(1e-3) * cam.cam_height());
    }
    let w0 = cam.projective_scale(p0);
    let dw = cam.projective_scale(cam.origin() + dir);
    if dw < T::zero() {
        t_far = t_far.min(T::of(0.999) * w0 / -dw);
    }
    let p1 = p0 + dir * t_far;
    let w1 = cam.projective_scale(p1);
    let end = match cam.to_pixel_space(p1) {
        Ok(end) => end,
        Err(_) => return Ok(None),
    };
    // 1/w is affine along pixel-space segments, which maps pixel-space
    // fractions back to distances along the 3-D ray.
    let distance_at = |s: T| -> T {
        if (w1 - w0).abs() <= T::epsilon() * w0.abs() {
            return t_far * s;
        }
        let w = T::one() / ((T::one() - s) / w0 + s / w1);
        t_far * (w - w0) / (w1 - w0)
    };

    let image_len = (end.u - origin.u).abs().max((end.v - origin.v).abs());
    if image_len < T::one() {
        // Ray stays inside the origin's pixel: check where it meets that column.
        let s = field.sample(origin.u, origin.v);
        if s.layer == Layer::Empty || end.h >= s.height || origin.h < s.height {
            return Ok(None);
        }
        let frac = (origin.h - s.height) / (origin.h - end.h);
        let param = distance_at(frac);
        if !(param > T::zero()) {
            return Ok(None);
        }
        return Ok(Some(HitRecord {
            pixel: round_pixel(origin.u, origin.v),
            position: (origin.u, origin.v),
            height_at_hit: s.height,
            param,
            kind: s.layer,
        }));
    }

    let (block, _) = field.first_block(origin, end);
    Ok(block.and_then(|Block { crossing: step, surface: sample, .. }| {
        if sample.layer == Layer::Empty {
            return None;
        }
        Some(HitRecord {
            pixel: round_pixel(step.u, step.v),
            position: (step.u, step.v),
            height_at_hit: sample.height,
            param: distance_at(step.s),
            kind: sample.layer,
        })
    }))
}

#[inline]
pub(crate) fn round_pixel<T: Real>(u: T, v: T) -> (usize, usize) {
    (
        u.round().to_usize().unwrap_or(0),
        v.round().to_usize().unwrap_or(0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground_scene() -> Scene<f64> {
        let cam = TiltShiftCamera::new(64, 64, 64.0, 16.0, 1.0).unwrap();
        Scene::background(cam, PixelHeightMap::ground(64, 64)).unwrap()
    }

    #[test]
    fn empty_scene_sees_every_light() {
        let scene = ground_scene();
        for (x, y) in [(3, 20), (40, 63), (10, 50)] {
            let (vis, stats) = trace_visibility(
                scene.field(),
                scene.surface_point(x, y),
                PixelPoint::new(30.0, 25.0, 12.0),
            );
            assert!(vis);
            assert!(stats.pixels_visited <= 128);
        }
    }

    #[test]
    fn vertical_drop_hits_foot_pixel() {
        let scene = ground_scene();
        let origin = PixelPoint::new(20.0, 30.0, 8.0);
        let hit = trace_first_hit(&scene, origin, Vec3::new(0.0, -1.0, 0.0))
            .unwrap()
            .expect("ground below");
        assert_eq!(hit.pixel, (20, 38));
        assert_eq!(hit.kind, Layer::Background);
        let p0 = scene.camera().reconstruct(origin).unwrap();
        assert!((hit.param - p0.y).abs() < 0.05 * p0.y, "{} vs {}", hit.param, p0.y);
    }

    #[test]
    fn upward_ray_escapes() {
        let scene = ground_scene();
        let hit = trace_first_hit(&scene, PixelPoint::new(20.0, 40.0, 0.0), Vec3::new(0.0, 1.0, 0.2))
            .unwrap();
        assert!(hit.is_none());
    }

    #[test]
    fn origin_outside_image_is_rejected() {
        let scene = ground_scene();
        assert!(trace_first_hit(&scene, PixelPoint::new(-3.0, 40.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).is_err());
        assert!(trace_first_hit(&scene, PixelPoint::new(3.0, 40.0, 0.0), Vec3::zero()).is_err());
    }

    #[test]
    fn light_validation() {
        assert!(DiskLight::new(PixelPoint::new(1.0, 1.0, 0.0), 1.0).is_err());
        assert!(DiskLight::new(PixelPoint::new(1.0, 1.0, 5.0), -1.0).is_err());
        assert!(DiskLight::new(PixelPoint::new(1.0, 1.0, 5.0), 0.0).is_ok());
    }
}
