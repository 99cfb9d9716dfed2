use crate::error::{Error, Result};
use crate::geometry::PixelPoint;
use crate::num::Real;
use crate::vec3::{Point3, Vec3};

/// Fraction of the image height at which the default camera puts the horizon.
pub const DEFAULT_HORIZON_FRACTION: f64 = 0.35;

/// Magnitude below which the scale denominator is treated as zero (foot pixel on the horizon).
pub const HORIZON_EPSILON: f64 = 1e-8;

/// Pinhole camera whose image plane is always perpendicular to the ground.
///
/// The camera centre sits at `(0, cam_height, 0)` and looks along `+z`. For
/// pixel `(u, v)` the world-space ray direction is `a·u + b·v + c`, where `a`
/// steps one column right, `b` steps one row down and `c` reaches the
/// top-left pixel. Moving the horizon slides `c` vertically (a lens shift)
/// instead of pitching the camera, so vertical lines stay vertical.
///
/// Pixel centres sit at integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltShiftCamera<T> {
    image_width: usize,
    image_height: usize,
    focal: T,
    horizon_row: T,
    cam_height: T,
    origin: Point3<T>,
    a: Vec3<T>,
    b: Vec3<T>,
    c: Vec3<T>,
    // rows of [a b c]^-1
    inv: [Vec3<T>; 3],
}

impl<T: Real> TiltShiftCamera<T> {
    pub fn new(
        image_width: usize,
        image_height: usize,
        focal: T,
        horizon_row: T,
        cam_height: T,
    ) -> Result<Self> {
        if image_width == 0 || image_height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {image_width}x{image_height}"
            )));
        }
        if !(focal > T::zero() && focal.is_finite()) {
            return Err(Error::invalid(format!("focal must be positive, got {focal}")));
        }
        if !(cam_height > T::zero() && cam_height.is_finite()) {
            return Err(Error::invalid(format!(
                "camera height must be positive, got {cam_height}"
            )));
        }
        if !horizon_row.is_finite() {
            return Err(Error::invalid("horizon row must be finite"));
        }
        let principal_u = T::of_usize(image_width - 1) * T::of(0.5);
        let a = Vec3::new(T::one() / focal, T::zero(), T::zero());
        let b = Vec3::new(T::zero(), -T::one() / focal, T::zero());
        let c = Vec3::new(-principal_u / focal, -b.y * horizon_row, T::one());
        let mut cam = Self {
            image_width,
            image_height,
            focal,
            horizon_row,
            cam_height,
            origin: Vec3::new(T::zero(), cam_height, T::zero()),
            a,
            b,
            c,
            inv: [Vec3::zero(); 3],
        };
        cam.inv = invert_columns(cam.a, cam.b, cam.c)
            .ok_or_else(|| Error::invalid("camera basis is singular"))?;
        Ok(cam)
    }

    /// Camera used when nothing is known about the shot: unit height,
    /// focal length equal to the image width, horizon at 35% of the height.
    pub fn default_for(image_width: usize, image_height: usize) -> Result<Self> {
        Self::new(
            image_width,
            image_height,
            T::of_usize(image_width),
            T::of(DEFAULT_HORIZON_FRACTION) * T::of_usize(image_height),
            T::one(),
        )
    }

    /// Returns a copy with `c` slid vertically so the horizon sits at `new_row`.
    pub fn set_horizon(&self, new_row: T) -> Self {
        let mut cam = self.clone();
        cam.horizon_row = new_row;
        cam.c.y = -cam.b.y * new_row;
        cam.inv = invert_columns(cam.a, cam.b, cam.c).expect("shift keeps basis invertible");
        cam
    }

    /// Returns a copy with a different camera height (a global change of scene scale).
    pub fn with_cam_height(&self, cam_height: T) -> Result<Self> {
        Self::new(
            self.image_width,
            self.image_height,
            self.focal,
            self.horizon_row,
            cam_height,
        )
    }

    /// Rescales the image resolution by `factor`, keeping the field of view.
    pub fn resized(&self, image_width: usize, image_height: usize) -> Result<Self> {
        let sx = T::of_usize(image_width) / T::of_usize(self.image_width);
        let sy = T::of_usize(image_height) / T::of_usize(self.image_height);
        Self::new(
            image_width,
            image_height,
            self.focal * sx,
            self.horizon_row * sy,
            self.cam_height,
        )
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }
    pub fn image_height(&self) -> usize {
        self.image_height
    }
    pub fn dims(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }
    pub fn focal(&self) -> T {
        self.focal
    }
    pub fn horizon_row(&self) -> T {
        self.horizon_row
    }
    pub fn cam_height(&self) -> T {
        self.cam_height
    }
    pub fn origin(&self) -> Point3<T> {
        self.origin
    }
    pub fn a(&self) -> Vec3<T> {
        self.a
    }
    pub fn b(&self) -> Vec3<T> {
        self.b
    }
    pub fn c(&self) -> Vec3<T> {
        self.c
    }

    /// Unit viewing axis (normal of the image plane, pointing into the scene).
    pub fn forward(&self) -> Vec3<T> {
        self.b.cross(self.a).normalize()
    }

    /// Unnormalised ray direction through pixel `(u, v)`.
    #[inline]
    pub fn direction(&self, u: T, v: T) -> Vec3<T> {
        self.a * u + self.b * v + self.c
    }

    /// Denominator of the projective scale for a foot pixel.
    #[inline]
    fn scale_denominator(&self, u: T, v: T) -> T {
        self.a.y * u + self.b.y * v + self.c.y
    }

    /// Projective scale `w` that puts the ray through foot pixel `(u, v)` on the ground.
    ///
    /// `w` is positive below the horizon and negative above it.
    pub fn solve_scale(&self, u: T, v: T) -> Result<T> {
        let den = self.scale_denominator(u, v);
        if den.abs() < T::of(HORIZON_EPSILON) {
            return Err(Error::PointAtInfinity {
                u: u.to_f64_lossy(),
                v: v.to_f64_lossy(),
            });
        }
        Ok(-self.origin.y / den)
    }

    /// World point seen at `(u, v)` whose foot pixel is `(u, v + h)`.
    pub fn reconstruct_point(&self, u: T, v: T, h: T) -> Result<Point3<T>> {
        if !(h >= T::zero()) {
            return Err(Error::invalid(format!("pixel height must be >= 0, got {h}")));
        }
        self.reconstruct_unchecked(u, v, h)
    }

    pub fn reconstruct(&self, p: PixelPoint<T>) -> Result<Point3<T>> {
        self.reconstruct_point(p.u, p.v, p.h)
    }

    /// Like [`reconstruct_point`](Self::reconstruct_point) but accepts negative
    /// heights (points below the ground plane).
    pub(crate) fn reconstruct_unchecked(&self, u: T, v: T, h: T) -> Result<Point3<T>> {
        let w = self.solve_scale(u, v + h)?;
        if w <= T::zero() {
            return Err(Error::PointAtInfinity {
                u: u.to_f64_lossy(),
                v: (v + h).to_f64_lossy(),
            });
        }
        let mut p = self.origin + self.direction(u, v) * w;
        // y written as cam_height·(b_y·h)/denominator so h = 0 lands exactly on the ground
        p.y = self.origin.y * (self.b.y * h) / self.scale_denominator(u, v + h);
        Ok(p)
    }

    /// Projective scale `w` of a world point: the coordinate along `c` in the camera basis.
    #[inline]
    pub fn projective_scale(&self, p: Point3<T>) -> T {
        self.inv[2].dot(p - self.origin)
    }

    /// Projects a world point to continuous pixel coordinates.
    pub fn project_point(&self, p: Point3<T>) -> Result<(T, T)> {
        let rel = p - self.origin;
        let w = self.inv[2].dot(rel);
        if !(w > T::zero()) || !w.is_finite() {
            return Err(Error::ProjectionDomain);
        }
        Ok((self.inv[0].dot(rel) / w, self.inv[1].dot(rel) / w))
    }

    /// Pixel-height coordinates of a world point: its projection plus the row
    /// distance to the projection of its foot. Negative below the ground.
    pub fn to_pixel_space(&self, p: Point3<T>) -> Result<PixelPoint<T>> {
        let (u, v) = self.project_point(p)?;
        let (_, v_foot) = self.project_point(Vec3::new(p.x, T::zero(), p.z))?;
        Ok(PixelPoint::new(u, v, v_foot - v))
    }

    /// Distance of a point along the viewing axis.
    pub fn depth_of(&self, p: Point3<T>) -> T {
        (p - self.origin).dot(self.forward())
    }

    pub fn contains_pixel(&self, u: T, v: T) -> bool {
        u >= T::zero()
            && v >= T::zero()
            && u <= T::of_usize(self.image_width - 1)
            && v <= T::of_usize(self.image_height - 1)
    }

    pub fn cast<U: Real>(&self) -> TiltShiftCamera<U> {
        TiltShiftCamera::new(
            self.image_width,
            self.image_height,
            U::of(self.focal.to_f64_lossy()),
            U::of(self.horizon_row.to_f64_lossy()),
            U::of(self.cam_height.to_f64_lossy()),
        )
        .expect("valid camera stays valid after cast")
    }
}

/// Inverse of the matrix whose columns are `a`, `b`, `c`, returned as rows.
fn invert_columns<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Option<[Vec3<T>; 3]> {
    let det = a.dot(b.cross(c));
    if det.abs() <= T::min_positive_value() || !det.is_finite() {
        return None;
    }
    Some([b.cross(c) / det, c.cross(a) / det, a.cross(b) / det])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> TiltShiftCamera<f64> {
        TiltShiftCamera::new(256, 256, 256.0, 128.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TiltShiftCamera::<f64>::new(0, 10, 1.0, 1.0, 1.0).is_err());
        assert!(TiltShiftCamera::<f64>::new(10, 10, 0.0, 1.0, 1.0).is_err());
        assert!(TiltShiftCamera::<f64>::new(10, 10, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn no_pitch_basis() {
        let c = cam();
        assert_eq!(c.a().y, 0.0);
        assert_eq!(c.b().x, 0.0);
        assert_eq!(c.b().z, 0.0);
        assert!(c.b().y < 0.0);
        assert_eq!(c.b().y * 128.0 + c.c().y, 0.0);
    }

    #[test]
    fn horizon_at_top_sends_every_row_to_the_ground() {
        let c = TiltShiftCamera::<f64>::new(256, 256, 256.0, 0.0, 1.0).unwrap();
        assert!(c.solve_scale(10.0, 0.0).is_err());
        for v in 1..256 {
            let p = c.reconstruct_point(100.0, v as f64, 0.0).unwrap();
            assert!(p.z > 0.0);
            assert_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn optical_axis_projects_to_centre_column() {
        let c = cam();
        let (u, _) = c.project_point(Vec3::new(0.0, 0.3, 5.0)).unwrap();
        assert!((u - 127.5).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_a_domain_error() {
        assert!(matches!(
            cam().project_point(Vec3::new(0.0, 0.5, -1.0)),
            Err(Error::ProjectionDomain)
        ));
    }

    #[test]
    fn scale_decreases_away_from_horizon() {
        let c = cam();
        let w1 = c.solve_scale(50.0, 129.0).unwrap();
        let w2 = c.solve_scale(50.0, 130.0).unwrap();
        assert!(w1 > w2 && w2 > 0.0);
        assert!(matches!(c.solve_scale(3.0, 128.0), Err(Error::PointAtInfinity { .. })));
    }

    #[test]
    fn set_horizon_identity_and_shift() {
        let c = cam();
        assert_eq!(c.set_horizon(128.0), c);
        let s = c.set_horizon(40.0);
        assert_eq!(s.a(), c.a());
        assert_eq!(s.b(), c.b());
        assert_eq!(s.b().y * 40.0 + s.c().y, 0.0);
    }

    #[test]
    fn negative_height_is_rejected() {
        assert!(matches!(
            cam().reconstruct_point(10.0, 200.0, -1.0),
            Err(Error::InvalidParameter(_))
        ));
    }
}
