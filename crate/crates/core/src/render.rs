//! End-to-end rendering of a loaded scene document: shadow, reflection and
//! refraction layers accumulated in progressive passes, then composited.

use crate::channels::{assemble_channels, ChannelStack};
use crate::control::Control;
use crate::error::{Error, Result};
use crate::geometry::PixelHeightMap;
use crate::grid::Grid;
use crate::io::{LoadedScene, OutputKind, RenderBlock};
use crate::num::Real;
use crate::tracer::{
    accumulate_reflection, accumulate_soft_shadow, composite, render_refraction, CompositeLayers, DiskLight,
    ReflectionAccumulator, Rgb, Rgba, Scene, ShadowAccumulator,
};

/// Which effect layers to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layers {
    pub shadow: bool,
    pub reflection: bool,
    pub refraction: bool,
}

impl Layers {
    pub const ALL: Self = Self {
        shadow: true,
        reflection: true,
        refraction: true,
    };
    pub const NONE: Self = Self {
        shadow: false,
        reflection: false,
        refraction: false,
    };

    /// Parses a comma-separated list such as `shadow,reflection`.
    /// `all` and `none` are accepted.
    pub fn parse(list: &str) -> Result<Self> {
        let mut out = Self::NONE;
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "all" => out = Self::ALL,
                "none" => {}
                "shadow" => out.shadow = true,
                "reflection" => out.reflection = true,
                "refraction" => out.refraction = true,
                other => return Err(Error::invalid(format!("unknown layer {other:?}"))),
            }
        }
        Ok(out)
    }
}

impl Default for Layers {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderParams {
    pub spp: u32,
    pub seed: u64,
    pub layers: Layers,
    /// Replaces every light's radius.
    pub radius: Option<f64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Samples per pixel added per progressive pass.
    pub pass_spp: u32,
    /// Downsample so neither image side exceeds this.
    pub max_dim: Option<usize>,
    pub shadow_opacity: f32,
    pub shadow_color: [f32; 3],
}

impl RenderParams {
    pub fn from_block(block: &RenderBlock) -> Self {
        Self {
            spp: block.spp,
            seed: block.seed,
            layers: Layers::ALL,
            radius: None,
            threads: None,
            pass_spp: 8,
            max_dim: None,
            shadow_opacity: block.shadow_opacity,
            shadow_color: block.shadow_color,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(Error::invalid("spp must be >= 1"));
        }
        if self.pass_spp == 0 {
            return Err(Error::invalid("pass_spp must be >= 1"));
        }
        if let Some(r) = self.radius {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::invalid(format!("radius must be >= 0, got {r}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be >= 1"));
        }
        if self.max_dim == Some(0) {
            return Err(Error::invalid("max_dim must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub composite: Grid<Rgb>,
    /// Intensity-weighted light visibility; 1 everywhere without lights.
    pub visibility: Option<Grid<f32>>,
    pub reflection: Option<Grid<Rgba>>,
    pub refraction: Option<Grid<Rgba>>,
    pub spp: u32,
}

impl RenderOutput {
    /// Shadow layer as a straight-alpha RGBA image: the shadow colour with
    /// alpha equal to the darkening applied in the composite.
    pub fn shadow_layer(&self, opacity: f32, color: [f32; 3]) -> Option<Grid<Rgba>> {
        self.visibility
            .as_ref()
            .map(|v| v.map(|&vis| [color[0], color[1], color[2], opacity * (1.0 - vis)]))
    }
}

/// Integer downsampling factor that brings `dims` within `max_dim`.
fn shrink_factor(dims: (usize, usize), max_dim: usize) -> usize {
    dims.0.max(dims.1).div_ceil(max_dim).max(1)
}

fn subsample<V: Clone>(g: &Grid<V>, k: usize) -> Grid<V> {
    let (w, h) = (g.width().div_ceil(k), g.height().div_ceil(k));
    Grid::from_fn(w, h, |x, y| g.get(x * k, y * k).clone())
}

fn shrink_heights<T: Real>(m: &PixelHeightMap<T>, k: usize) -> Result<PixelHeightMap<T>> {
    let s = T::of_usize(k);
    PixelHeightMap::new(subsample(m.values(), k).map(|&v| v / s), subsample(m.mask(), k))
}

/// Point-sampled copy of `scene` whose sides are at most `max_dim`. Pixel
/// `(x, y)` of the copy is pixel `(k·x, k·y)` of the original, so pixel
/// coordinates, heights and light parameters all scale by `1/k`.
pub fn downscale<T: Real>(scene: &LoadedScene<T>, max_dim: usize) -> Result<LoadedScene<T>> {
    let k = shrink_factor(scene.camera.dims(), max_dim.max(1));
    if k == 1 {
        return Ok(scene.clone());
    }
    let bg = shrink_heights(&scene.bg, k)?;
    let (w, h) = bg.dims();
    let s = T::of_usize(k);
    let sx = T::of_usize(w) / T::of_usize(scene.camera.image_width());
    let sy = T::of_usize(h) / T::of_usize(scene.camera.image_height());
    let camera = crate::geometry::TiltShiftCamera::new(
        w,
        h,
        scene.camera.focal() * sx,
        scene.camera.horizon_row() * sy,
        scene.camera.cam_height(),
    )?;
    let mut out = scene.clone();
    out.camera = camera;
    out.background = subsample(&scene.background, k);
    out.cutout = subsample(&scene.cutout, k);
    out.fg = shrink_heights(&scene.fg, k)?;
    out.bg = bg;
    for l in &mut out.lights {
        l.center.u = l.center.u / s;
        l.center.v = l.center.v / s;
        l.center.h = l.center.h / s;
        l.radius = l.radius / s;
    }
    for (_, mask) in out.materials.entries_mut() {
        if let Some(m) = mask {
            *m = subsample(m, k);
        }
    }
    for r in &mut out.refractors {
        r.mask = subsample(&r.mask, k);
    }
    Ok(out)
}

fn effective_lights<T: Real>(scene: &LoadedScene<T>, params: &RenderParams) -> Result<Vec<DiskLight<T>>> {
    scene
        .lights
        .iter()
        .map(|l| {
            let mut l = *l;
            if let Some(r) = params.radius {
                l.radius = T::of(r);
            }
            l.validate()?;
            Ok(l)
        })
        .collect()
}

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Renders every requested layer and the final composite. Progress (samples
/// per pixel completed) is published on `control` after each pass;
/// cancellation is honoured between image rows.
///
/// Results are bit-identical for a fixed seed regardless of `threads` and
/// `pass_spp`: every pixel draws from its own counter-based random stream.
pub fn render<T: Real>(scene: &LoadedScene<T>, params: &RenderParams, control: &Control) -> Result<RenderOutput> {
    params.validate()?;
    let scaled;
    let scene = match params.max_dim {
        Some(m) if shrink_factor(scene.camera.dims(), m) > 1 => {
            scaled = downscale(scene, m)?;
            &scaled
        }
        _ => scene,
    };
    with_pool(params.threads, || render_in_pool(scene, params, control))?
}

fn render_in_pool<T: Real>(scene: &LoadedScene<T>, params: &RenderParams, control: &Control) -> Result<RenderOutput> {
    let lights = effective_lights(scene, params)?;
    let tracer_scene = Scene::new(scene.camera.clone(), scene.fg.clone(), scene.bg.clone())?;
    let (w, h) = tracer_scene.dims();
    let spp = params.spp;

    let do_shadow = params.layers.shadow && !lights.is_empty();
    let do_reflection = params.layers.reflection && !scene.materials.is_empty() && !lights.is_empty();
    let mut shadows: Vec<ShadowAccumulator> = if do_shadow {
        lights.iter().map(|_| ShadowAccumulator::new(w, h, spp)).collect()
    } else {
        Vec::new()
    };
    let mut reflection = do_reflection.then(|| ReflectionAccumulator::new(w, h, spp));

    control.set_samples_done(0);
    let mut done = 0;
    while done < spp && (do_shadow || do_reflection) {
        let end = (done + params.pass_spp).min(spp);
        for (i, (light, acc)) in lights.iter().zip(shadows.iter_mut()).enumerate() {
            accumulate_soft_shadow(&tracer_scene, light, i as u32, params.seed, done..end, acc, control)?;
        }
        if let Some(acc) = reflection.as_mut() {
            accumulate_reflection(
                &tracer_scene,
                &scene.cutout,
                &scene.materials,
                params.seed,
                done..end,
                acc,
                control,
            )?;
        }
        done = end;
        control.set_samples_done(done as u64);
    }

    let visibility = do_shadow.then(|| combine_visibility(&lights, &shadows, w, h));
    let reflection = reflection.map(|acc| acc.layer(lights[0].intensity.to_f64_lossy()));

    let refraction = if params.layers.refraction && !scene.refractors.is_empty() {
        let mut layer: Option<Grid<Rgba>> = None;
        for (i, r) in scene.refractors.iter().enumerate() {
            let seed = params.seed.wrapping_add(i as u64);
            let next = render_refraction(&tracer_scene, &scene.background, r, spp, seed, control)?;
            layer = Some(match layer {
                None => next,
                Some(below) => over_premultiplied(&next, &below),
            });
        }
        layer
    } else {
        None
    };
    control.set_samples_done(spp as u64);

    let composite = composite(&CompositeLayers {
        background: &scene.background,
        cutout: &scene.cutout,
        visibility: visibility.as_ref(),
        reflection: reflection.as_ref(),
        refraction: refraction.as_ref(),
        shadow_opacity: params.shadow_opacity,
        shadow_color: params.shadow_color,
    })?;
    Ok(RenderOutput {
        composite,
        visibility,
        reflection,
        refraction,
        spp,
    })
}

/// Intensity-weighted mean of per-light visibility. With all intensities
/// zero the lights are weighted equally.
fn combine_visibility<T: Real>(lights: &[DiskLight<T>], accs: &[ShadowAccumulator], w: usize, h: usize) -> Grid<f32> {
    let mut weights: Vec<f64> = lights.iter().map(|l| l.intensity.to_f64_lossy()).collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|x| *x /= total);
    } else {
        weights.iter_mut().for_each(|x| *x = 1.0 / lights.len() as f64);
    }
    let mut sum = vec![0.0f64; w * h];
    for (acc, wt) in accs.iter().zip(&weights) {
        let vis: Grid<f64> = acc.visibility();
        for (s, v) in sum.iter_mut().zip(vis.as_slice()) {
            *s += wt * v;
        }
    }
    Grid::from_vec(w, h, sum.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect()).expect("dims")
}

fn over_premultiplied(top: &Grid<Rgba>, below: &Grid<Rgba>) -> Grid<Rgba> {
    Grid::from_fn(top.width(), top.height(), |x, y| {
        let (t, b) = (top.get(x, y), below.get(x, y));
        let k = 1.0 - t[3];
        [t[0] + b[0] * k, t[1] + b[1] * k, t[2] + b[2] * k, t[3] + b[3] * k]
    })
}

/// Buffer channels for the scene's first light.
pub fn render_channels<T: Real>(scene: &LoadedScene<T>, params: &RenderParams) -> Result<ChannelStack> {
    params.validate()?;
    let scaled;
    let scene = match params.max_dim {
        Some(m) if shrink_factor(scene.camera.dims(), m) > 1 => {
            scaled = downscale(scene, m)?;
            &scaled
        }
        _ => scene,
    };
    let lights = effective_lights(scene, params)?;
    let light = lights
        .first()
        .ok_or_else(|| Error::invalid("channels need at least one light"))?;
    let tracer_scene = Scene::new(scene.camera.clone(), scene.fg.clone(), scene.bg.clone())?;
    with_pool(params.threads, || assemble_channels(&tracer_scene, light).map(|(_, stack)| stack))?
}

/// Whether `kind` is among the document's requested outputs.
pub fn wants(block: &RenderBlock, kind: OutputKind) -> bool {
    block.outputs.contains(&kind)
}
