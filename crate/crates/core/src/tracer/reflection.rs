//! Glossy reflections of the cutout on receiver surfaces.

use std::ops::Range;

use rayon::prelude::*;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::geometry::Layer;
use crate::grid::Grid;
use crate::num::Real;
use crate::tracer::composite::Rgba;
use crate::tracer::sampling::{fresnel_schlick, sample_glossy_lobe, stream, Purpose, WORDS_PER_SAMPLE};
use crate::tracer::{trace_first_hit, DiskLight, Material, Scene};

/// Receiver materials: later entries win where their masks overlap.
/// An entry without a mask covers every receiver.
#[derive(Debug, Clone, Default)]
pub struct MaterialMap<T> {
    entries: Vec<(Material<T>, Option<Grid<T>>)>,
}

impl<T: Real> MaterialMap<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn uniform(material: Material<T>) -> Self {
        Self {
            entries: vec![(material, None)],
        }
    }

    pub fn push(&mut self, material: Material<T>, mask: Option<Grid<T>>) {
        self.entries.push((material, mask));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Material<T>, Option<Grid<T>>)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [(Material<T>, Option<Grid<T>>)] {
        &mut self.entries
    }

    pub fn material_at(&self, x: usize, y: usize) -> Option<&Material<T>> {
        self.entries
            .iter()
            .rev()
            .find(|(_, mask)| mask.as_ref().is_none_or(|m| *m.get(x, y) > T::of(0.5)))
            .map(|(m, _)| m)
    }
}

/// Running per-pixel sums of premultiplied reflection colour.
#[derive(Debug, Clone)]
pub struct ReflectionAccumulator {
    width: usize,
    height: usize,
    spp: u32,
    sums: Vec<[f64; 4]>,
    samples_done: u32,
}

impl ReflectionAccumulator {
    pub fn new(width: usize, height: usize, spp: u32) -> Self {
        Self {
            width,
            height,
            spp,
            sums: vec![[0.0; 4]; width * height],
            samples_done: 0,
        }
    }

    pub fn samples_done(&self) -> u32 {
        self.samples_done
    }

    /// Premultiplied RGBA layer scaled by the light intensity.
    pub fn layer(&self, intensity: f64) -> Grid<Rgba> {
        let n = self.samples_done.max(1) as f64;
        let px = self
            .sums
            .iter()
            .map(|s| {
                let a = (s[3] / n * intensity).min(1.0);
                let scale = if s[3] > 0.0 { a / (s[3] / n) } else { 0.0 };
                [
                    (s[0] / n * scale) as f32,
                    (s[1] / n * scale) as f32,
                    (s[2] / n * scale) as f32,
                    a as f32,
                ]
            })
            .collect();
        Grid::from_vec(self.width, self.height, px).expect("accumulator dims")
    }
}

/// Adds reflection samples `samples` for every receiver with a material.
///
/// Each sample scatters the view ray around the receiver's mirror direction,
/// traces it through pixel-height space and, if it lands on the cutout,
/// fetches the cutout colour there, weighted by the Fresnel term at the
/// viewing angle times the material's reflect weight.
pub fn accumulate_reflection<T: Real>(
    scene: &Scene<T>,
    cutout: &Grid<Rgba>,
    materials: &MaterialMap<T>,
    seed: u64,
    samples: Range<u32>,
    acc: &mut ReflectionAccumulator,
    control: &Control,
) -> Result<()> {
    cutout.ensure_dims(scene.dims())?;
    if acc.spp == 0 {
        return Err(Error::invalid("spp must be >= 1"));
    }
    if samples.start != acc.samples_done || samples.end > acc.spp {
        return Err(Error::invalid("reflection samples must continue the accumulation"));
    }
    let (w, _) = scene.dims();
    let cam = scene.camera();
    let grid = scene.grid();
    acc.sums
        .par_chunks_mut(w)
        .enumerate()
        .try_for_each(|(y, row)| -> Result<()> {
            control.checkpoint()?;
            for (x, sum) in row.iter_mut().enumerate() {
                if !*scene.receivers().get(x, y) || !*grid.normal_valid.get(x, y) {
                    continue;
                }
                let Some(mat) = materials.material_at(x, y) else {
                    continue;
                };
                let normal = *grid.normals.get(x, y);
                let incident = (*grid.positions.get(x, y) - cam.origin()).normalize();
                let cos_view = -incident.dot(normal);
                let weight = fresnel_schlick(cos_view, mat.eta) * mat.reflect_weight;
                if !(weight > T::zero()) {
                    continue;
                }
                let weight = weight.to_f64_lossy();
                let origin = scene.surface_point(x, y);
                let pixel = y * w + x;
                for i in samples.clone() {
                    let mut rng = stream(seed, Purpose::Reflection, pixel, i as u128 * WORDS_PER_SAMPLE);
                    let dir = sample_glossy_lobe(normal, incident, mat.glossiness, &mut rng);
                    let Some(hit) = trace_first_hit(scene, origin, dir)? else {
                        continue;
                    };
                    if hit.kind != Layer::Foreground {
                        continue;
                    }
                    let (hx, hy) = (hit.pixel.0.min(w - 1), hit.pixel.1.min(cutout.height() - 1));
                    let c = cutout.get(hx, hy);
                    let a = c[3] as f64 * weight;
                    sum[0] += c[0] as f64 * a;
                    sum[1] += c[1] as f64 * a;
                    sum[2] += c[2] as f64 * a;
                    sum[3] += a;
                }
            }
            Ok(())
        })?;
    acc.samples_done = samples.end;
    Ok(())
}

/// Premultiplied reflection layer of the cutout. An empty material map gives an empty layer.
pub fn render_reflection<T: Real>(
    scene: &Scene<T>,
    cutout: &Grid<Rgba>,
    materials: &MaterialMap<T>,
    light: &DiskLight<T>,
    spp: u32,
    seed: u64,
) -> Result<Grid<Rgba>> {
    let (w, h) = scene.dims();
    let mut acc = ReflectionAccumulator::new(w, h, spp);
    accumulate_reflection(scene, cutout, materials, seed, 0..spp, &mut acc, &Control::new())?;
    Ok(acc.layer(light.intensity.to_f64_lossy()))
}
