//! Single-interface refraction through cutout regions.

use rayon::prelude::*;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::geometry::Layer;
use crate::grid::Grid;
use crate::num::Real;
use crate::tracer::composite::{Rgb, Rgba};
use crate::tracer::sampling::{refract, stream, uniform, Purpose, WORDS_PER_SAMPLE};
use crate::tracer::{trace_first_hit_in, Scene};
use crate::vec3::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefractionMode {
    /// Bend the view ray once at the reconstructed surface normal.
    Surface,
    /// Treat the refractor region as a glass sphere fitted to its silhouette
    /// and refract on entry and exit.
    SphereProxy,
}

/// A refracting region of the image.
#[derive(Debug, Clone)]
pub struct Refractor<T> {
    pub mask: Grid<T>,
    pub eta: T,
    pub tint: [f32; 3],
    pub mode: RefractionMode,
}

struct Sphere<T> {
    center: Point3<T>,
    radius: T,
}

impl<T: Real> Sphere<T> {
    /// Smallest positive ray parameter at which `o + t·d` (unit `d`) meets the sphere.
    fn intersect(&self, o: Point3<T>, d: Vec3<T>, t_min: T) -> Option<T> {
        let oc = o - self.center;
        let b = oc.dot(d);
        let c = oc.dot(oc) - self.radius * self.radius;
        let disc = b * b - c;
        if disc < T::zero() {
            return None;
        }
        let sq = disc.sqrt();
        [-b - sq, -b + sq].into_iter().find(|&t| t > t_min)
    }
}

fn fit_sphere<T: Real>(scene: &Scene<T>, mask: &Grid<T>) -> Option<Sphere<T>> {
    let (w, h) = mask.dims();
    let (mut su, mut sv, mut n) = (0.0f64, 0.0f64, 0usize);
    for y in 0..h {
        for x in 0..w {
            if *mask.get(x, y) > T::of(0.5) && *scene.grid().valid.get(x, y) {
                su += x as f64;
                sv += y as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let (cu, cv) = (su / n as f64, sv / n as f64);
    let radius_px = (n as f64 / std::f64::consts::PI).sqrt();
    // nearest valid mask pixel to the centroid anchors the depth
    let mut best: Option<(f64, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if *mask.get(x, y) > T::of(0.5) && *scene.grid().valid.get(x, y) {
                let d = (x as f64 - cu).powi(2) + (y as f64 - cv).powi(2);
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, x, y));
                }
            }
        }
    }
    let (_, bx, by) = best?;
    let cam = scene.camera();
    let front = *scene.grid().positions.get(bx, by);
    let depth = cam.depth_of(front);
    let radius = T::of(radius_px) * depth / cam.focal();
    let view = (front - cam.origin()).normalize();
    Some(Sphere {
        center: front + view * radius,
        radius,
    })
}

/// Refraction layer: background colour seen through every refractor pixel.
///
/// Rays are traced against the background only. Total internal reflection
/// falls back to the mirrored direction.
pub fn render_refraction<T: Real>(
    scene: &Scene<T>,
    background: &Grid<Rgb>,
    refractor: &Refractor<T>,
    spp: u32,
    seed: u64,
    control: &Control,
) -> Result<Grid<Rgba>> {
    if !(refractor.eta >= T::one()) {
        return Err(Error::invalid(format!(
            "refractive index must be >= 1, got {}",
            refractor.eta
        )));
    }
    if spp == 0 {
        return Err(Error::invalid("spp must be >= 1"));
    }
    background.ensure_dims(scene.dims())?;
    refractor.mask.ensure_dims(scene.dims())?;
    let (w, h) = scene.dims();
    let cam = scene.camera();
    let grid = scene.grid();
    let sphere = match refractor.mode {
        RefractionMode::SphereProxy => fit_sphere(scene, &refractor.mask),
        RefractionMode::Surface => None,
    };
    let inv_eta = T::one() / refractor.eta;
    let mut out = Grid::filled(w, h, [0.0f32; 4]);
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .try_for_each(|(y, row)| -> Result<()> {
            control.checkpoint()?;
            for (x, px) in row.iter_mut().enumerate() {
                if !(*refractor.mask.get(x, y) > T::of(0.5)) || !*grid.valid.get(x, y) {
                    continue;
                }
                let mut sum = [0.0f64; 3];
                let mut hits = 0u32;
                for i in 0..spp {
                    let mut rng = stream(seed, Purpose::Refraction, y * w + x, i as u128 * WORDS_PER_SAMPLE);
                    let (ju, jv) = if i == 0 {
                        (T::zero(), T::zero())
                    } else {
                        (uniform::<T>(&mut rng) - T::of(0.5), uniform::<T>(&mut rng) - T::of(0.5))
                    };
                    let pu = T::of_usize(x) + ju;
                    let pv = T::of_usize(y) + jv;
                    let incident = cam.direction(pu, pv).normalize();
                    let exit = match &sphere {
                        Some(s) => sphere_exit(s, cam.origin(), incident, inv_eta),
                        None => {
                            if !*grid.normal_valid.get(x, y) {
                                continue;
                            }
                            let n = *grid.normals.get(x, y);
                            let dir = refract(incident, n, inv_eta).unwrap_or_else(|| incident.reflect(n));
                            Some((*grid.positions.get(x, y), dir))
                        }
                    };
                    let Some((from, dir)) = exit else { continue };
                    let Ok(origin) = cam.to_pixel_space(from) else { continue };
                    let origin = crate::geometry::PixelPoint::new(
                        origin.u.max(T::zero()).min(T::of_usize(w - 1)),
                        origin.v.max(T::zero()).min(T::of_usize(h - 1)),
                        origin.h,
                    );
                    let Some(hit) = trace_first_hit_in(scene, scene.background_field(), origin, dir)? else {
                        continue;
                    };
                    if hit.kind != Layer::Background {
                        continue;
                    }
                    let c = background.get(hit.pixel.0.min(w - 1), hit.pixel.1.min(h - 1));
                    for k in 0..3 {
                        sum[k] += c[k] as f64;
                    }
                    hits += 1;
                }
                if hits > 0 {
                    let n = spp as f64;
                    *px = [
                        (sum[0] / n) as f32 * refractor.tint[0],
                        (sum[1] / n) as f32 * refractor.tint[1],
                        (sum[2] / n) as f32 * refractor.tint[2],
                        (hits as f64 / n) as f32,
                    ];
                }
            }
            Ok(())
        })?;
    Ok(out)
}

/// Entry/exit refraction through a sphere; returns the exit point and direction.
fn sphere_exit<T: Real>(
    s: &Sphere<T>,
    eye: Point3<T>,
    incident: Vec3<T>,
    inv_eta: T,
) -> Option<(Point3<T>, Vec3<T>)> {
    let t_in = s.intersect(eye, incident, T::zero())?;
    let entry = eye + incident * t_in;
    let n_in = (entry - s.center) / s.radius;
    let inside = refract(incident, n_in, inv_eta)?.normalize();
    let t_out = s.intersect(entry, inside, s.radius * T::of(1e-6))?;
    let exit = entry + inside * t_out;
    let n_out = (exit - s.center) / s.radius;
    let dir = refract(inside, -n_out, T::one() / inv_eta).unwrap_or_else(|| inside.reflect(-n_out));
    Some((exit, dir.normalize()))
}
