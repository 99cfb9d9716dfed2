//! Desk-scale shadow benchmark: procedural scenes rendered by the mesh
//! oracle and by the pixel-height engine, scored with the image metrics.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PixelPoint;
use crate::grid::Grid;
use crate::metrics::{evaluate_benchmark, MetricReport};
use crate::oracle::golden::save_shadow;
use crate::oracle::{benchmark_scenes, gen_scene, mesh_hard_shadow, mesh_soft_shadow, ph_from_mesh, BenchScene};
use crate::tracer::{hard_shadow, soft_shadow, DiskLight, Scene};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenes: usize,
    pub lights: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Disk radius in pixels; 0 benchmarks hard shadows.
    pub radius: f64,
    /// Engine samples per pixel (soft shadows only).
    pub spp: u32,
    /// Oracle samples per pixel (soft shadows only).
    pub reference_spp: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenes: 8,
            lights: 8,
            width: 256,
            height: 256,
            seed: 0,
            radius: 0.0,
            spp: 64,
            reference_spp: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub report: MetricReport,
    /// Intersection over union of the binarized (> 0.5) shadow masks.
    pub mean_iou: f64,
    pub min_iou: f64,
    pub engine_seconds: f64,
    pub oracle_seconds: f64,
}

/// IoU of two shadow masks thresholded at 0.5; two empty masks score 1.
pub fn shadow_iou(a: &Grid<f64>, b: &Grid<f64>) -> Result<f64> {
    a.ensure_dims(b.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let (p, q) = (*x > 0.5, *y > 0.5);
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Shadow maps (1 = fully shadowed) of one light from the engine and the oracle.
pub struct LightPair {
    pub engine: Grid<f64>,
    pub oracle: Grid<f64>,
    pub engine_seconds: f64,
    pub oracle_seconds: f64,
}

/// Renders light `index` of `scene` with both renderers.
pub fn render_pair(scene: &BenchScene, index: usize, cfg: &BenchConfig) -> Result<LightPair> {
    let spec = &scene.spec;
    let cam = spec.camera.camera()?;
    let (fg, bg) = gen_scene(spec, scene.seed)?;
    let ts = Scene::new(cam.clone(), ph_from_mesh(&fg, &cam), ph_from_mesh(&bg, &cam))?;
    let l = spec
        .lights
        .get(index)
        .ok_or_else(|| Error::invalid(format!("scene {} has no light {index}", scene.id)))?;
    let world = Vec3::new(l[0], l[1], l[2]);
    let p = cam.to_pixel_space(world)?;
    let center = PixelPoint::new(p.u, p.v, p.h);
    let light_seed = scene.seed ^ index as u64;

    let t = Instant::now();
    let engine = if cfg.radius > 0.0 {
        let light = DiskLight::new(center, cfg.radius)?;
        soft_shadow(&ts, &light, cfg.spp, light_seed)?.map(|v| 1.0 - v)
    } else {
        hard_shadow(&ts, center)
    };
    let engine_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let oracle = if cfg.radius > 0.0 {
        let light = DiskLight::new(center, cfg.radius)?;
        mesh_soft_shadow(&fg, &bg, &light, &cam, cfg.reference_spp, light_seed)?.map(|v| 1.0 - v)
    } else {
        mesh_hard_shadow(&fg, &bg, world, &cam)
    };
    let oracle_seconds = t.elapsed().as_secs_f64();
    Ok(LightPair {
        engine,
        oracle,
        engine_seconds,
        oracle_seconds,
    })
}

/// Runs the benchmark, writing `pred/` and `gt/` shadow maps plus
/// `report.txt` and `report.json` under `out`.
pub fn run_benchmark(cfg: &BenchConfig, out: impl AsRef<Path>) -> Result<BenchSummary> {
    if cfg.scenes == 0 || cfg.lights == 0 {
        return Err(Error::invalid("benchmark needs at least one scene and one light"));
    }
    let out = out.as_ref();
    let (pred_dir, gt_dir) = (out.join("pred"), out.join("gt"));
    let scenes = benchmark_scenes(cfg.scenes, cfg.lights, cfg.width, cfg.height, cfg.seed);
    let mut ious = Vec::new();
    let (mut te, mut to) = (0.0, 0.0);
    for s in &scenes {
        std::fs::create_dir_all(pred_dir.join(&s.id))?;
        std::fs::create_dir_all(gt_dir.join(&s.id))?;
        for i in 0..s.spec.lights.len() {
            let pair = render_pair(s, i, cfg)?;
            ious.push(shadow_iou(&pair.engine, &pair.oracle)?);
            te += pair.engine_seconds;
            to += pair.oracle_seconds;
            let name = format!("light{i}.pfm");
            save_shadow(&pair.engine, pred_dir.join(&s.id).join(&name))?;
            save_shadow(&pair.oracle, gt_dir.join(&s.id).join(&name))?;
        }
    }
    let report = evaluate_benchmark(&pred_dir, &gt_dir)?;
    std::fs::write(out.join("report.txt"), report.to_text())?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    Ok(BenchSummary {
        report,
        mean_iou: ious.iter().sum::<f64>() / ious.len() as f64,
        min_iou: ious.iter().copied().fold(1.0, f64::min),
        engine_seconds: te,
        oracle_seconds: to,
    })
}
