//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! All criteria run sequentially inside a single test so the timed ones are
//! not disturbed by other tests of this binary. The test fails at the end if
//! any criterion failed.
#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;
use std::time::Instant;

use pixheight::bench::{render_pair, shadow_iou, BenchConfig};
use pixheight::channels::{height_gradient, BufferChannels, GRADIENT_QUANTUM};
use pixheight::demo::demo_assets;
use pixheight::geometry::{PixelHeightMap, PixelPoint, TiltShiftCamera};
use pixheight::io::{load_scene, LoadedScene};
use pixheight::metrics::{
    rmse, rmse_s, ssim, ssim_map, zncc, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
use pixheight::oracle::golden::{load_shadow, verify_manifest, write_entry, write_manifest, MANIFEST};
use pixheight::oracle::{
    benchmark_scenes, gen_scene, mesh_soft_shadow, ph_from_mesh, BackgroundKind, BenchScene, CameraSpec,
    ForegroundKind, MeshTracer, Pose, SceneSpec, TriMesh,
};
use pixheight::render::{render, RenderParams};
use pixheight::tracer::{
    fresnel_schlick, hard_shadow, render_reflection, soft_shadow, trace_visibility, DiskLight, Material,
    MaterialMap, Rgba, Scene,
};
use pixheight::vec3::Vec3;
use pixheight::{Control, Error, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);
type EngineScene = (Scene<f64>, TriMesh<f64>, TriMesh<f64>);

fn engine_scene(s: &BenchScene) -> Result<EngineScene, Error> {
    let cam = s.spec.camera.camera()?;
    let (fg, bg) = gen_scene(&s.spec, s.seed)?;
    let scene = Scene::new(cam.clone(), ph_from_mesh(&fg, &cam), ph_from_mesh(&bg, &cam))?;
    Ok((scene, fg, bg))
}

fn light_center(s: &BenchScene, cam: &TiltShiftCamera<f64>, i: usize) -> Result<PixelPoint<f64>, Error> {
    let l = s.spec.lights[i];
    let p = cam.to_pixel_space(Vec3::new(l[0], l[1], l[2]))?;
    Ok(PixelPoint::new(p.u, p.v, p.h))
}

fn reconstruction_round_trip() -> Outcome {
    let cam = TiltShiftCamera::<f64>::default_for(256, 256)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut points = Vec::with_capacity(1000);
    while points.len() < 1000 {
        let p = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(0.0..2.0), rng.random_range(1.0..25.0));
        if let Ok((u, v)) = cam.project_point(p) {
            if cam.contains_pixel(u, v) {
                points.push(p);
            }
        }
    }
    let t = Instant::now();
    let mut worst = 0.0f64;
    for p in &points {
        let q = cam.reconstruct(cam.to_pixel_space(*p)?)?;
        worst = worst.max((q - *p).length() / p.length());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst < 1e-6 && secs < 1.0,
        format!("max relative error {worst:.3e} (< 1e-6), {secs:.4} s (< 1 s)"),
    ))
}

fn ground_identity_and_horizon() -> Outcome {
    let horizon = 90usize;
    let cam = TiltShiftCamera::<f64>::new(256, 256, 256.0, horizon as f64, 1.0)?;
    let u = 128.0;
    let mut bad = Vec::new();
    for row in 0..256usize {
        let r = cam.reconstruct_point(u, row as f64, 0.0);
        let ok = if row > horizon {
            matches!(r, Ok(p) if p.y == 0.0)
        } else {
            matches!(r, Err(Error::PointAtInfinity { .. }))
        };
        if !ok {
            bad.push(row);
        }
    }
    Ok((
        bad.is_empty(),
        format!("256 rows, horizon row {horizon}, violations {bad:?}"),
    ))
}

fn verticality() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for frac in [0.2, 0.35, 0.5] {
        let mut camera = CameraSpec::default_for(256, 256);
        camera.horizon_row = frac * 256.0;
        let spec = SceneSpec {
            background: BackgroundKind::Plane,
            foreground: ForegroundKind::Box,
            poses: vec![Pose { x: 0.15, z: 4.0, yaw: 0.6, elevation: 0.0 }],
            camera,
            lights: vec![[0.0, 3.0, 1.0]],
        };
        let cam = camera.camera()?;
        let (fg, _) = gen_scene(&spec, 17)?;
        let ph = ph_from_mesh(&fg, &cam);
        let tracer = MeshTracer::new(&fg, &TriMesh::empty());
        // (column, face) -> reconstructed points of that face in that column
        let mut groups: std::collections::BTreeMap<(usize, i64, i64), Vec<Vec3<f64>>> = Default::default();
        for y in 0..256 {
            for x in 0..256 {
                if !ph.is_covered(x, y) {
                    continue;
                }
                let d = cam.direction(x as f64, y as f64).normalize();
                let Some(hit) = tracer.first_hit(cam.origin(), d, f64::INFINITY) else { continue };
                if hit.normal.y.abs() > 1e-9 {
                    continue;
                }
                let key = ((hit.normal.x * 1e6).round() as i64, (hit.normal.z * 1e6).round() as i64);
                let p = cam.reconstruct_point(x as f64, y as f64, ph.value(x, y))?;
                groups.entry((x, key.0, key.1)).or_default().push(p);
            }
        }
        let mut worst = 0.0f64;
        let mut measured = 0;
        for pts in groups.values() {
            let low = pts.iter().copied().fold(pts[0], |a, p| if p.y < a.y { p } else { a });
            let mut any = false;
            for p in pts {
                let dy = p.y - low.y;
                if dy > 1e-9 {
                    let horiz = ((p.x - low.x).powi(2) + (p.z - low.z).powi(2)).sqrt();
                    worst = worst.max(horiz.atan2(dy).to_degrees());
                    any = true;
                }
            }
            measured += any as usize;
        }
        pass &= worst < 0.1 && measured >= 20;
        detail.push(format!("horizon {frac}H: {measured} face columns, max tilt {worst:.2e} deg"));
    }
    Ok((pass, format!("{} (< 0.1 deg)", detail.join("; "))))
}

fn hard_shadow_iou() -> Outcome {
    let cfg = BenchConfig::default();
    let scenes = benchmark_scenes(64, 8, 256, 256, 0);
    let t = Instant::now();
    let mut ious = Vec::new();
    let (mut ground, mut wall) = (Vec::new(), Vec::new());
    for s in &scenes {
        for i in 0..s.spec.lights.len() {
            let pair = render_pair(s, i, &cfg)?;
            let iou = shadow_iou(&pair.engine, &pair.oracle)?;
            ious.push(iou);
            if s.spec.background == BackgroundKind::Plane { &mut ground } else { &mut wall }.push(iou);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m, lo) = (mean(&ious), ious.iter().copied().fold(1.0, f64::min));
    Ok((
        m >= 0.98 && lo >= 0.95 && secs < 300.0,
        format!(
            "{} pairs at 256x256: mean IoU {m:.4} (>= 0.98), min {lo:.4} (>= 0.95), ground mean {:.4}, wall mean {:.4}, {secs:.1} s (< 300 s) on {} cores",
            ious.len(),
            mean(&ground),
            mean(&wall),
            cores()
        ),
    ))
}

const SOFT_RES: usize = 64;
const SOFT_SCENES: usize = 16;
const SOFT_ENGINE_SPP: u32 = 256;
const SOFT_REFERENCE_SPP: u32 = 4096;

fn soft_radii() -> [f64; 4] {
    let w = SOFT_RES as f64;
    [0.0, w / 32.0, w / 16.0, w / 8.0]
}

fn golden_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/soft64")
}

/// Builds the mesh-traced reference cache, or verifies its checksums when present.
fn golden_soft(scenes: &[BenchScene]) -> Result<String, Box<dyn std::error::Error>> {
    let root = golden_root();
    if root.join(MANIFEST).exists() {
        let bad = verify_manifest(&root)?;
        if !bad.is_empty() {
            return Err(format!("golden files fail their checksums: {bad:?}").into());
        }
        return Ok("verified cached references".into());
    }
    let t = Instant::now();
    for s in scenes {
        let (scene, fg, bg) = engine_scene(s)?;
        let cam = scene.camera().clone();
        let center = light_center(s, &cam, 0)?;
        let mut shadows = Vec::new();
        for (k, r) in soft_radii().into_iter().enumerate() {
            let light = DiskLight::new(center, r)?;
            let vis = mesh_soft_shadow(&fg, &bg, &light, &cam, SOFT_REFERENCE_SPP, s.seed.wrapping_add(1000 + k as u64))?;
            shadows.push((format!("r{k}"), vis));
        }
        let meta = serde_json::json!({
            "scene": s,
            "light_pixel": [center.u, center.v, center.h],
            "radii": soft_radii(),
            "spp": SOFT_REFERENCE_SPP,
            "content": "visibility (1 = lit)",
        });
        write_entry(&root, &s.id, scene.foreground(), scene.background_heights(), &meta, &shadows)?;
    }
    write_manifest(&root)?;
    Ok(format!("generated references in {:.1} s", t.elapsed().as_secs_f64()))
}

fn soft_shadow_equivalence() -> Outcome {
    let scenes = benchmark_scenes(SOFT_SCENES, 1, SOFT_RES, SOFT_RES, 11);
    let cache = golden_soft(&scenes)?;
    let mut worst = (0.0f64, String::new());
    let mut over = 0;
    let mut items = 0;
    let mut errors = Vec::new();
    let mut radius0_exact = true;
    for s in &scenes {
        let (scene, _, _) = engine_scene(s)?;
        let center = light_center(s, scene.camera(), 0)?;
        for (k, r) in soft_radii().into_iter().enumerate() {
            let light = DiskLight::new(center, r)?;
            let vis = soft_shadow(&scene, &light, SOFT_ENGINE_SPP, s.seed ^ k as u64)?;
            let reference = load_shadow(golden_root().join(&s.id).join("shadows").join(format!("r{k}.pfm")))?;
            let e = rmse(&vis, &reference)?;
            items += 1;
            errors.push(e);
            if e > 0.02 {
                over += 1;
            }
            if e > worst.0 {
                worst = (e, format!("{} r{k}", s.id));
            }
            if k == 0 {
                let hard = hard_shadow(&scene, center).map(|v| 1.0 - v);
                radius0_exact &= vis.as_slice().iter().zip(hard.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
            }
        }
    }
    errors.sort_by(f64::total_cmp);
    Ok((
        over == 0 && radius0_exact,
        format!(
            "{items} items at {SOFT_RES}x{SOFT_RES}, {SOFT_ENGINE_SPP} vs {SOFT_REFERENCE_SPP} spp: {over} over RMSE 0.02, median {:.4}, worst {:.4} ({}); radius 0 equals 1 - hard shadow bit-exactly: {radius0_exact}; {cache}",
            errors[errors.len() / 2],
            worst.0,
            worst.1
        ),
    ))
}

fn traversal_complexity() -> Outcome {
    let s = &benchmark_scenes(2, 1, 320, 200, 5)[1];
    let (scene, _, _) = engine_scene(s)?;
    let (w, h) = scene.dims();
    let bound = w + h;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut violations, mut most) = (0usize, 0usize);
    let n = 1_000_000;
    for _ in 0..n {
        let from = scene.surface_point(rng.random_range(0..w), rng.random_range(0..h));
        let to = PixelPoint::new(
            rng.random_range(-(w as f64)..2.0 * w as f64),
            rng.random_range(-(h as f64)..2.0 * h as f64),
            rng.random_range(0.0..2.0 * h as f64),
        );
        let (_, stats) = trace_visibility(scene.field(), from, to);
        most = most.max(stats.pixels_visited);
        violations += (stats.pixels_visited > bound) as usize;
    }
    Ok((
        violations == 0,
        format!("{n} rays on {w}x{h}: max pixels visited {most} (bound W+H = {bound}), {violations} violations"),
    ))
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, kind: usize) -> Grid<f64> {
    match kind % 3 {
        0 => Grid::from_fn(w, h, |_, _| rng.random_range(0.0..1.0)),
        1 => {
            let (a, b, c) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.0..6.0));
            Grid::from_fn(w, h, |x, y| 0.5 + 0.5 * (a * x as f64 + b * y as f64 + c).sin())
        }
        _ => {
            let (t, ang) = (rng.random_range(0.2..0.8), rng.random_range(0.0..std::f64::consts::TAU));
            Grid::from_fn(w, h, |x, y| {
                let s = (x as f64 / w as f64 - 0.5) * ang.cos() + (y as f64 / h as f64 - 0.5) * ang.sin();
                if s + 0.5 > t { 1.0 } else { 0.0 }
            })
        }
    }
}

fn hand_ssim_center(x: &Grid<f64>, y: &Grid<f64>) -> f64 {
    // literal constants, independent of the crate's
    let (c1, c2) = ((0.01f64 * 1.0).powi(2), (0.03f64 * 1.0).powi(2));
    let mut w = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..11 {
        for j in 0..11 {
            let k = w[i][j] / total;
            let (a, b) = (*x.get(j, i), *y.get(j, i));
            mx += k * a;
            my += k * b;
            sxx += k * a * a;
            syy += k * b * b;
            sxy += k * a * b;
        }
    }
    let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn metrics_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures: Vec<String> = Vec::new();
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
    for i in 0..1000 {
        let (w, h) = (rng.random_range(11..40), rng.random_range(11..40));
        let p = random_map(&mut rng, w, h, i);
        let g = random_map(&mut rng, w, h, i / 3 + 1);
        let k = rng.random_range(0.01..100.0);
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-10.0..10.0));
        let mut fail = |what: &str| failures.push(format!("pair {i}: {what}"));

        let brute = {
            let mut s = 0.0;
            for y in 0..h {
                for x in 0..w {
                    s += (p.get(x, y) - g.get(x, y)).powi(2);
                }
            }
            (s / (w * h) as f64).sqrt()
        };
        let e = rmse(&p, &g)?;
        if (e - brute).abs() > 1e-12 {
            fail("rmse differs from brute force");
        }
        if rmse(&p, &p)? != 0.0 || rmse_s(&p, &p)?.value > 1e-12 {
            fail("identity rmse");
        }
        if !close(ssim(&p, &p)?, 1.0, 1e-12) {
            fail("identity ssim");
        }
        let zi = zncc(&p, &p)?;
        if zi.defined && !close(zi.value, 1.0, 1e-12) {
            fail("identity zncc");
        }
        let base = rmse_s(&p, &g)?;
        let scaled = rmse_s(&p.map(|v| v * k), &g)?;
        if !close(base.value, scaled.value, 1e-9) {
            fail("rmse_s scale invariance");
        }
        if base.value > e + 1e-15 {
            fail("rmse_s exceeds rmse");
        }
        let z = zncc(&p, &g)?;
        let za = zncc(&p.map(|v| a * v + b), &g)?;
        if z.defined != za.defined || !close(z.value, za.value, 1e-9) {
            fail("zncc affine invariance");
        }
        let zs = zncc(&g.map(|v| a * v + b), &g)?;
        let zn = zncc(&g.map(|v| -v), &g)?;
        if zs.defined && (!close(zs.value, 1.0, 1e-9) || !close(zn.value, -1.0, 1e-9)) {
            fail("zncc of affine copy");
        }
    }
    let constants = SSIM_WINDOW == 11 && SSIM_SIGMA == 1.5 && SSIM_K1 == 0.01 && SSIM_K2 == 0.03;
    let mut worst_hand = 0.0f64;
    for _ in 0..20 {
        let x = Grid::from_fn(11, 11, |_, _| rng.random_range(0.0..1.0));
        let y = Grid::from_fn(11, 11, |_, _| rng.random_range(0.0..1.0));
        let m = ssim_map(&x, &y, 1.0)?;
        worst_hand = worst_hand.max((m.get(5, 5) - hand_ssim_center(&x, &y)).abs());
    }
    let pass = failures.is_empty() && constants && worst_hand < 1e-12;
    Ok((
        pass,
        format!(
            "1000 random pairs, {} failures{}; SSIM constants (11, 1.5, 0.01, 0.03): {constants}; hand-computed window max diff {worst_hand:.1e}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    ))
}

fn fresnel() -> Outcome {
    let normal = fresnel_schlick(1.0f64, 1.5);
    let grazing = fresnel_schlick(0.0f64, 1.5);
    Ok((
        (normal - 0.04).abs() <= 1e-9 && grazing == 1.0,
        format!("normal incidence {normal:.12} (0.04 +- 1e-9), grazing {grazing}"),
    ))
}

/// Ground plane with a fronto-parallel billboard standing on it.
struct Billboard {
    scene: Scene<f64>,
    foot_row: f64,
}

fn billboard(size: usize) -> Result<Billboard, Error> {
    let cam = TiltShiftCamera::<f64>::default_for(size, size)?;
    let (z, half, top) = (3.0, 1.2, 0.5);
    let mut mesh = TriMesh::empty();
    mesh.add_quad(
        Vec3::new(-half, 0.0, z),
        Vec3::new(half, 0.0, z),
        Vec3::new(half, top, z),
        Vec3::new(-half, top, z),
    );
    let fg = ph_from_mesh(&mesh, &cam);
    let scene = Scene::new(cam.clone(), fg, PixelHeightMap::ground(size, size))?;
    let (_, foot_row) = cam.project_point(Vec3::new(0.0, 0.0, z))?;
    Ok(Billboard { scene, foot_row })
}

fn mirror(glossiness: f64) -> MaterialMap<f64> {
    MaterialMap::uniform(Material {
        albedo: [1.0; 3],
        glossiness,
        eta: 1.5,
        reflect_weight: 1.0,
    })
}

fn reflection_sanity() -> Outcome {
    let size = 128;
    let b = billboard(size)?;
    let fg = b.scene.foreground();
    let row_colour = |r: usize| -> Rgba {
        let t = r as f32 / size as f32;
        [t, 1.0 - t, ((r * 37) % size) as f32 / size as f32, 1.0]
    };
    let cutout = Grid::from_fn(size, size, |x, y| if fg.is_covered(x, y) { row_colour(y) } else { [0.0; 4] });
    let light = DiskLight::new(PixelPoint::new(64.0, 10.0, 100.0), 0.0)?;
    let layer = render_reflection(&b.scene, &cutout, &mirror(1.0), &light, 1, 5)?;
    let (mut total, mut matched) = (0usize, 0usize);
    for y in 0..size {
        for x in 0..size {
            if fg.is_covered(x, y) || (y as f64) <= b.foot_row {
                continue;
            }
            let r = (2.0 * b.foot_row - y as f64).round();
            if r < 0.0 || !fg.is_covered(x, r as usize) {
                continue;
            }
            total += 1;
            let p = layer.get(x, y);
            let want = row_colour(r as usize);
            if p[3] > 0.0 && (0..3).all(|c| (p[c] / p[3] - want[c]).abs() < 1e-3) {
                matched += 1;
            }
        }
    }
    let frac = matched as f64 / total.max(1) as f64;

    let centre = size / 2;
    let bar = Grid::from_fn(size, size, |x, y| {
        if fg.is_covered(x, y) && x.abs_diff(centre) <= 1 { [1.0; 4] } else { [0.0; 4] }
    });
    let mut spreads = Vec::new();
    for g in [1.0, 0.8, 0.5, 0.3] {
        let layer = render_reflection(&b.scene, &bar, &mirror(g), &light, 64, 9)?;
        let (mut sw, mut sx, mut sxx) = (0.0f64, 0.0, 0.0);
        for y in 0..size {
            for x in 0..size {
                let a = layer.get(x, y)[3] as f64;
                sw += a;
                sx += a * x as f64;
                sxx += a * (x * x) as f64;
            }
        }
        let mean = sx / sw;
        spreads.push((sxx / sw - mean * mean).max(0.0).sqrt());
    }
    let increasing = spreads.windows(2).all(|w| w[1] > w[0]);
    Ok((
        frac >= 0.95 && increasing,
        format!(
            "mirror flip matches {matched}/{total} = {:.2}% (>= 95%); blur radius over glossiness 1.0/0.8/0.5/0.3: {:.2}/{:.2}/{:.2}/{:.2} px (strictly increasing: {increasing})",
            100.0 * frac,
            spreads[0],
            spreads[1],
            spreads[2],
            spreads[3]
        ),
    ))
}

/// Bare-ground scenes cycling through the object kinds, each lit from one
/// side at a low angle so its shadow falls visibly beside the object.
fn side_lit_plane_scenes(count: usize, size: usize, seed: u64) -> Vec<BenchScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let pose = Pose {
                x: rng.random_range(-0.3..0.3),
                z: rng.random_range(3.5..4.5),
                yaw: rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
                elevation: 0.0,
            };
            let light = [
                pose.x + side * rng.random_range(1.5..3.0),
                rng.random_range(1.0..2.5),
                pose.z + rng.random_range(-0.5..1.0),
            ];
            let foreground = ForegroundKind::ALL[i % ForegroundKind::ALL.len()];
            BenchScene {
                id: format!("ground/{i:03}_side_{foreground}"),
                seed: rng.random(),
                spec: SceneSpec {
                    background: BackgroundKind::Plane,
                    foreground,
                    poses: vec![pose],
                    camera: CameraSpec::default_for(size, size),
                    lights: vec![light],
                },
            }
        })
        .collect()
}

fn box_blur3(v: &Grid<f64>) -> Grid<f64> {
    let (w, h) = v.dims();
    Grid::from_fn(w, h, |x, y| {
        let (mut s, mut n) = (0.0, 0.0);
        for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                s += v.get(xx, yy);
                n += 1.0;
            }
        }
        s / n
    })
}

fn channel_properties() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // gradient translation invariance; constants on the gradient's height grid
    let scenes = benchmark_scenes(12, 2, 96, 96, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut constants = vec![0.5, 1.0, 7.25, 64.0, 1000.125];
    constants.extend((0..15).map(|_| rng.random_range(0..2000 * 65536) as f64 * GRADIENT_QUANTUM));
    let mut grad_diffs = 0usize;
    for s in &scenes {
        let (scene, _, _) = engine_scene(s)?;
        let bg = scene.background_heights();
        let (r0, c0) = height_gradient(bg);
        for &c in &constants {
            let (r1, c1) = height_gradient(&bg.offset_heights(c)?);
            for (a, b) in r0.as_slice().iter().chain(c0.as_slice()).zip(r1.as_slice().iter().chain(c1.as_slice())) {
                grad_diffs += (a.to_bits() != b.to_bits()) as usize;
            }
        }
    }
    pass &= grad_diffs == 0;
    notes.push(format!(
        "gradient invariance over {} scenes x {} constants: {grad_diffs} differing values",
        scenes.len(),
        constants.len()
    ));

    // relative-distance support and radius-zero collapse
    let (mut support_diffs, mut collapse_diffs, mut shadowed) = (0usize, 0usize, 0usize);
    for s in &scenes {
        let (scene, _, _) = engine_scene(s)?;
        for i in 0..s.spec.lights.len() {
            let center = light_center(s, scene.camera(), i)?;
            let ch = BufferChannels::compute(&scene, &DiskLight::new(center, 4.0)?)?;
            for (d, c) in ch.relative_distance.as_slice().iter().zip(ch.center_hard_shadow.as_slice()) {
                support_diffs += ((*d > 0.0) != (*c > 0.5)) as usize;
                shadowed += (*c > 0.5) as usize;
            }
            let zero = BufferChannels::compute(&scene, &DiskLight::new(center, 0.0)?)?;
            for m in &zero.sparse_shadows {
                collapse_diffs += m
                    .as_slice()
                    .iter()
                    .zip(zero.center_hard_shadow.as_slice())
                    .filter(|(a, b)| a.to_bits() != b.to_bits())
                    .count();
            }
        }
    }
    pass &= support_diffs == 0 && collapse_diffs == 0 && shadowed > 0;
    notes.push(format!("relative-distance support mismatches {support_diffs} over {shadowed} shadowed pixels"));
    notes.push(format!("radius-0 sparse masks differing from centre {collapse_diffs}"));

    // penumbra width against relative distance on plane scenes
    let size = 96;
    let plane = side_lit_plane_scenes(16, size, 6);
    // each scene is binned by its own relative-distance octiles, so scenes
    // with nearer or farther lights do not mix; bin widths are then averaged
    let bins = 8;
    let mut per_scene: Vec<Vec<f64>> = Vec::new();
    let mut pixels = 0;
    for s in &plane {
        let (scene, _, _) = engine_scene(s)?;
        let light = DiskLight::new(light_center(s, scene.camera(), 0)?, size as f64 / 16.0)?;
        let vis = soft_shadow(&scene, &light, 1024, s.seed)?;
        let ch = BufferChannels::compute(&scene, &light)?;
        let smooth = box_blur3(&vis);
        let rec = scene.receivers();
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for y in 2..size - 2 {
            'px: for x in 2..size - 2 {
                let v = *vis.get(x, y);
                if *ch.center_hard_shadow.get(x, y) < 0.5 || !(0.02..=0.98).contains(&v) {
                    continue;
                }
                for yy in y - 2..=y + 2 {
                    for xx in x - 2..=x + 2 {
                        if !*rec.get(xx, yy) {
                            continue 'px;
                        }
                    }
                }
                let gx = (smooth.get(x + 1, y) - smooth.get(x - 1, y)) / 2.0;
                let gy = (smooth.get(x, y + 1) - smooth.get(x, y - 1)) / 2.0;
                samples.push((*ch.relative_distance.get(x, y), (gx * gx + gy * gy).sqrt()));
            }
        }
        if samples.len() < 2 * bins {
            continue;
        }
        pixels += samples.len();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        per_scene.push(
            (0..bins)
                .map(|b| {
                    let chunk = &samples[b * samples.len() / bins..(b + 1) * samples.len() / bins];
                    chunk.len() as f64 / chunk.iter().map(|s| s.1).sum::<f64>()
                })
                .collect(),
        );
    }
    let widths: Vec<f64> = (0..bins)
        .map(|b| per_scene.iter().map(|w| w[b]).sum::<f64>() / per_scene.len().max(1) as f64)
        .collect();
    let monotone = per_scene.len() >= plane.len() / 2 && widths.windows(2).all(|w| w[1] >= w[0]);
    pass &= monotone;
    notes.push(format!(
        "penumbra width per relative-distance octile averaged over {} of {} plane scenes ({pixels} pixels, 1024 spp): [{}] (non-decreasing: {monotone})",
        per_scene.len(),
        plane.len(),
        widths.iter().map(|w| format!("{w:.2}")).collect::<Vec<_>>().join(", ")
    ));
    Ok((pass, notes.join("; ")))
}

fn demo_scene(size: usize) -> Result<LoadedScene<f64>, Error> {
    let assets = demo_assets(size, size)?;
    load_scene(&assets.document, &assets.source())
}

fn cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn performance() -> Outcome {
    let loaded = demo_scene(256)?;
    let light = loaded.lights[0];
    let t = Instant::now();
    let scene = Scene::new(loaded.camera.clone(), loaded.fg.clone(), loaded.bg.clone())?;
    soft_shadow(&scene, &light, 64, 1)?;
    let shadow_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let scene = Scene::new(loaded.camera.clone(), loaded.fg.clone(), loaded.bg.clone())?;
    render_reflection(&scene, &loaded.cutout, &loaded.materials, &light, 64, 1)?;
    let refl_secs = t.elapsed().as_secs_f64();
    Ok((
        shadow_secs <= 10.0 && refl_secs <= 30.0,
        format!(
            "256x256 at 64 spp on {} cores: soft shadow {shadow_secs:.2} s (<= 10 s, budget stated for 8 cores), reflection {refl_secs:.2} s (<= 30 s)",
            cores()
        ),
    ))
}

fn determinism() -> Outcome {
    let loaded = demo_scene(128)?;
    let mut params = RenderParams::from_block(&loaded.render);
    params.spp = 16;
    let mut reference: Option<Vec<u32>> = None;
    let mut runs = 0;
    let mut identical = true;
    for threads in [1, 2, 4, 1, 3] {
        params.threads = Some(threads);
        let out = render(&loaded, &params, &Control::new())?;
        let bits: Vec<u32> = out.composite.as_slice().iter().flat_map(|p| p.map(f32::to_bits)).collect();
        match &reference {
            None => reference = Some(bits),
            Some(r) => identical &= *r == bits,
        }
        runs += 1;
    }
    Ok((
        identical,
        format!("{runs} renders with 1, 2, 4, 1, 3 threads: composites bit-identical: {identical}"),
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("reconstruction round trip", reconstruction_round_trip),
        ("ground identity and horizon singularity", ground_identity_and_horizon),
        ("tilt-shift verticality", verticality),
        ("fresnel", fresnel),
        ("metrics correctness", metrics_correctness),
        ("traversal complexity", traversal_complexity),
        ("reflection sanity", reflection_sanity),
        ("performance", performance),
        ("determinism", determinism),
        ("channel properties", channel_properties),
        ("soft-shadow oracle equivalence", soft_shadow_equivalence),
        ("hard-shadow oracle equivalence", hard_shadow_iou),
    ];
    // ACCEPTANCE_ONLY=<substring> runs a subset
    let only = std::env::var("ACCEPTANCE_ONLY").unwrap_or_default();
    let mut failed = Vec::new();
    for (name, check) in criteria {
        if !name.contains(only.as_str()) {
            continue;
        }
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
