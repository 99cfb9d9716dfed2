//! Hard and Monte-Carlo soft shadows.

use std::ops::Range;

use rayon::prelude::*;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::geometry::PixelPoint;
use crate::grid::Grid;
use crate::num::Real;
use crate::tracer::sampling::{disk_offset, stream, Purpose, WORDS_PER_DISK_SAMPLE};
use crate::tracer::{trace_visibility, DiskLight, Scene};

/// Binary shadow mask (1 = shadowed) cast by a point light on every receiver.
/// Non-receiver pixels are 0.
pub fn hard_shadow<T: Real>(scene: &Scene<T>, light: PixelPoint<T>) -> Grid<T> {
    let (w, h) = scene.dims();
    let mut out = Grid::filled(w, h, T::zero());
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, cell) in row.iter_mut().enumerate() {
                if !*scene.receivers().get(x, y) {
                    continue;
                }
                let (visible, _) = trace_visibility(scene.field(), scene.surface_point(x, y), light);
                if !visible {
                    *cell = T::one();
                }
            }
        });
    out
}

/// Per-pixel count of unoccluded light samples, filled in by sample ranges.
///
/// Visibility per sample is binary, so the counts (and therefore the final
/// map) do not depend on how the sample range is split into passes.
#[derive(Debug, Clone)]
pub struct ShadowAccumulator {
    width: usize,
    height: usize,
    spp: u32,
    visible: Vec<u32>,
    samples_done: u32,
}

impl ShadowAccumulator {
    pub fn new(width: usize, height: usize, spp: u32) -> Self {
        Self {
            width,
            height,
            spp,
            visible: vec![0; width * height],
            samples_done: 0,
        }
    }

    pub fn spp(&self) -> u32 {
        self.spp
    }

    pub fn samples_done(&self) -> u32 {
        self.samples_done
    }

    /// Visibility map from the samples accumulated so far.
    pub fn visibility<T: Real>(&self) -> Grid<T> {
        let n = T::of(self.samples_done.max(1) as f64);
        Grid::from_vec(
            self.width,
            self.height,
            self.visible.iter().map(|&c| T::of(c as f64) / n).collect(),
        )
        .expect("accumulator dims")
    }
}

/// Adds light samples `samples` (indices into `0..spp`) to `acc`.
/// Non-receivers always count as visible.
pub fn accumulate_soft_shadow<T: Real>(
    scene: &Scene<T>,
    light: &DiskLight<T>,
    light_index: u32,
    seed: u64,
    samples: Range<u32>,
    acc: &mut ShadowAccumulator,
    control: &Control,
) -> Result<()> {
    let (w, _) = scene.dims();
    if acc.spp == 0 {
        return Err(Error::invalid("spp must be >= 1"));
    }
    if samples.start != acc.samples_done || samples.end > acc.spp {
        return Err(Error::invalid(format!(
            "sample range {samples:?} does not continue accumulation at {} of {}",
            acc.samples_done, acc.spp
        )));
    }
    let spp = acc.spp;
    let purpose = Purpose::Shadow(light_index);
    acc.visible
        .par_chunks_mut(w)
        .enumerate()
        .try_for_each(|(y, row)| -> Result<()> {
            control.checkpoint()?;
            for (x, count) in row.iter_mut().enumerate() {
                if !*scene.receivers().get(x, y) {
                    *count += samples.end - samples.start;
                    continue;
                }
                let origin = scene.surface_point(x, y);
                let pixel = y * w + x;
                let mut rng = stream(
                    seed,
                    purpose,
                    pixel,
                    samples.start as u128 * WORDS_PER_DISK_SAMPLE,
                );
                for i in samples.clone() {
                    let (a, b) = disk_offset::<T>(spp, i, &mut rng);
                    let target = light.point_at(a, b);
                    if trace_visibility(scene.field(), origin, target).0 {
                        *count += 1;
                    }
                }
            }
            Ok(())
        })?;
    acc.samples_done = samples.end;
    Ok(())
}

/// Fraction of the disk light visible from each receiver.
pub fn soft_shadow<T: Real>(scene: &Scene<T>, light: &DiskLight<T>, spp: u32, seed: u64) -> Result<Grid<T>> {
    soft_shadow_with(scene, light, 0, spp, seed, &Control::new())
}

pub fn soft_shadow_with<T: Real>(
    scene: &Scene<T>,
    light: &DiskLight<T>,
    light_index: u32,
    spp: u32,
    seed: u64,
    control: &Control,
) -> Result<Grid<T>> {
    if spp == 0 {
        return Err(Error::invalid("spp must be >= 1"));
    }
    light.validate()?;
    let (w, h) = scene.dims();
    let mut acc = ShadowAccumulator::new(w, h, spp);
    accumulate_soft_shadow(scene, light, light_index, seed, 0..spp, &mut acc, control)?;
    Ok(acc.visibility())
}

/// Geometry-unaware baseline: the centre hard shadow blurred uniformly with a
/// box filter whose half-width is the light radius. Returns visibility.
pub fn uniform_soft_shadow<T: Real>(scene: &Scene<T>, light: &DiskLight<T>) -> Grid<T> {
    let hard = hard_shadow(scene, light.center);
    let (w, h) = hard.dims();
    let r = light.radius.round().to_usize().unwrap_or(0);
    let blur_1d = |src: &Grid<T>, horizontal: bool| -> Grid<T> {
        Grid::from_fn(w, h, |x, y| {
            let (pos, len) = if horizontal { (x, w) } else { (y, h) };
            let lo = pos.saturating_sub(r);
            let hi = (pos + r).min(len - 1);
            let mut sum = T::zero();
            for k in lo..=hi {
                sum = sum + if horizontal { *src.get(k, y) } else { *src.get(x, k) };
            }
            sum / T::of_usize(hi - lo + 1)
        })
    };
    let blurred = blur_1d(&blur_1d(&hard, true), false);
    Grid::from_fn(w, h, |x, y| {
        if *scene.receivers().get(x, y) {
            T::one() - *blurred.get(x, y)
        } else {
            T::one()
        }
    })
}
