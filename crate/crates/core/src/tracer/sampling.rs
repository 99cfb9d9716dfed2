//! Random streams, light-disk sampling and the reflection/refraction lobes.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::PixelPoint;
use crate::num::Real;
use crate::tracer::DiskLight;
use crate::vec3::Vec3;

/// 32-bit words reserved for one sample when a stream is positioned per sample.
pub(crate) const WORDS_PER_SAMPLE: u128 = 64;
/// Words consumed by one light-disk sample (two `u64` draws).
pub(crate) const WORDS_PER_DISK_SAMPLE: u128 = 4;

/// Distinct stream families so different effects never share random numbers.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Purpose {
    Shadow(u32),
    Reflection,
    Refraction,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Shadow(light) => 1 + light as u64,
            Purpose::Reflection => 1 << 20,
            Purpose::Refraction => 2 << 20,
        }
    }
}

/// Counter-based random stream addressed by `(seed, purpose, pixel, sample)`,
/// so results never depend on scheduling or chunking.
pub(crate) fn stream(seed: u64, purpose: Purpose, pixel: usize, word_pos: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose.tag() << 40) ^ pixel as u64);
    rng.set_word_pos(word_pos);
    rng
}

#[inline]
pub(crate) fn uniform<T: Real>(rng: &mut impl RngCore) -> T {
    T::of(rng.random::<f64>())
}

/// Shirley–Chiu concentric map from the unit square to the unit disk.
pub fn concentric_disk<T: Real>(a: T, b: T) -> (T, T) {
    let two = T::of(2.0);
    let x = two * a - T::one();
    let y = two * b - T::one();
    if x == T::zero() && y == T::zero() {
        return (T::zero(), T::zero());
    }
    let quarter_pi = T::FRAC_PI_4();
    let (r, theta) = if x.abs() > y.abs() {
        (x, quarter_pi * (y / x))
    } else {
        (y, T::FRAC_PI_2() - quarter_pi * (x / y))
    };
    (r * theta.cos(), r * theta.sin())
}

/// Unit-disk offset of sample `index` out of `spp`.
///
/// Sample 0 is the disk centre. The remaining `spp - 1` samples fill a
/// jittered `k × k` grid (`k = ⌊√(spp-1)⌋`) mapped through the concentric
/// map; any leftovers are uniform.
pub fn disk_offset<T: Real>(spp: u32, index: u32, rng: &mut impl RngCore) -> (T, T) {
    // always draw both numbers so every sample consumes the same stream span
    let xi0: T = uniform(rng);
    let xi1: T = uniform(rng);
    if index == 0 {
        return (T::zero(), T::zero());
    }
    let m = spp.saturating_sub(1);
    let k = (m as f64).sqrt().floor() as u32;
    let j = index - 1;
    if k > 0 && j < k * k {
        let kk = T::of(k as f64);
        let a = (T::of((j % k) as f64) + xi0) / kk;
        let b = (T::of((j / k) as f64) + xi1) / kk;
        concentric_disk(a, b)
    } else {
        concentric_disk(xi0, xi1)
    }
}

impl<T: Real> DiskLight<T> {
    /// Unit vectors spanning the disk in pixel-height space: the image right
    /// axis, and world up (which moves a point up one row and raises its
    /// pixel height by one, keeping its foot fixed).
    pub fn axes() -> ([T; 3], [T; 3]) {
        let s = T::FRAC_1_SQRT_2();
        ([T::one(), T::zero(), T::zero()], [T::zero(), -s, s])
    }

    /// Point on the disk for unit-disk offset `(a, b)`. Heights are clamped at zero.
    pub fn point_at(&self, a: T, b: T) -> PixelPoint<T> {
        let (e0, e1) = Self::axes();
        let r = self.radius;
        PixelPoint::new(
            self.center.u + r * (a * e0[0] + b * e1[0]),
            self.center.v + r * (a * e0[1] + b * e1[1]),
            (self.center.h + r * (a * e0[2] + b * e1[2])).max(T::zero()),
        )
    }
}

/// Schlick's approximation of dielectric reflectance.
pub fn fresnel_schlick<T: Real>(cos_theta: T, eta: T) -> T {
    let cos_theta = cos_theta.max(T::zero()).min(T::one());
    let r0 = ((eta - T::one()) / (eta + T::one())).powi(2);
    let m = T::one() - cos_theta;
    r0 + (T::one() - r0) * m * m * m * m * m
}

/// Phong-lobe exponent for a glossiness in `[0, 1)`.
pub fn lobe_exponent<T: Real>(glossiness: T) -> T {
    T::of(2.0) / (T::of(1.001) - glossiness).powi(2)
}

const LOBE_RETRIES: usize = 8;

/// Direction scattered around the mirror of `incident` about `normal`.
///
/// Glossiness 1 returns the mirror direction exactly; lower values sample a
/// cosine-power lobe whose exponent is [`lobe_exponent`]. Samples below the
/// surface are redrawn, falling back to the mirror direction.
pub fn sample_glossy_lobe<T: Real>(
    normal: Vec3<T>,
    incident: Vec3<T>,
    glossiness: T,
    rng: &mut impl RngCore,
) -> Vec3<T> {
    let mirror = incident.reflect(normal).normalize();
    if glossiness >= T::one() {
        return mirror;
    }
    let exponent = lobe_exponent(glossiness);
    let (t, b) = mirror.orthonormal_basis();
    for _ in 0..LOBE_RETRIES {
        let xi0: T = uniform(rng);
        let xi1: T = uniform(rng);
        let cos_a = xi0.powf(T::one() / (exponent + T::one()));
        let sin_a = (T::one() - cos_a * cos_a).max(T::zero()).sqrt();
        let phi = T::of(2.0) * T::PI() * xi1;
        let d = t * (sin_a * phi.cos()) + b * (sin_a * phi.sin()) + mirror * cos_a;
        if d.dot(normal) > T::zero() {
            return d;
        }
    }
    mirror
}

/// Snell refraction of unit `incident` through a surface with unit `normal`
/// facing the incident side, for relative index `eta_ratio = n_in / n_out`.
/// `None` on total internal reflection.
pub fn refract<T: Real>(incident: Vec3<T>, normal: Vec3<T>, eta_ratio: T) -> Option<Vec3<T>> {
    let cos_i = -incident.dot(normal);
    let k = T::one() - eta_ratio * eta_ratio * (T::one() - cos_i * cos_i);
    if k < T::zero() {
        return None;
    }
    Some(incident * eta_ratio + normal * (eta_ratio * cos_i - k.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresnel_limits() {
        assert!((fresnel_schlick(1.0f64, 1.5) - 0.04).abs() < 1e-12);
        assert_eq!(fresnel_schlick(0.0f64, 1.3), 1.0);
        assert_eq!(fresnel_schlick(0.0f64, 2.4), 1.0);
        assert_eq!(fresnel_schlick(1.0f64, 1.0), 0.0);
    }

    #[test]
    fn concentric_stays_in_disk() {
        for i in 0..=20 {
            for j in 0..=20 {
                let (x, y) = concentric_disk(i as f64 / 20.0, j as f64 / 20.0);
                assert!(x * x + y * y <= 1.0 + 1e-12);
            }
        }
        let (x, y) = concentric_disk(1.0f64, 0.5);
        assert!((x - 1.0).abs() < 1e-12 && y.abs() < 1e-12);
    }

    #[test]
    fn mirror_at_full_glossiness() {
        let n = Vec3::new(0.0, 1.0, 0.0);
        let i = Vec3::new(0.6f64, -0.8, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_glossy_lobe(n, i, 1.0, &mut rng), Vec3::new(0.6, 0.8, 0.0));
    }

    #[test]
    fn refract_identity_and_bending() {
        let n = Vec3::new(0.0, 0.0, -1.0);
        let i = Vec3::new(0.6f64, 0.0, 0.8);
        let t = refract(i, n, 1.0).unwrap();
        assert!((t - i).length() < 1e-12);
        let t = refract(i, n, 1.0 / 1.5).unwrap();
        assert!((t.length() - 1.0).abs() < 1e-12);
        assert!((t.x - 0.4).abs() < 1e-12); // sin scaled by 1/eta
        assert!(refract(Vec3::new(0.8f64, 0.0, 0.6), n, 1.5).is_none());
    }
}
