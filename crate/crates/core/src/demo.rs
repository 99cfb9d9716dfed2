//! Self-contained demo scene: a box and a glass ball in a wall corner,
//! rendered from meshes into the asset files a scene document refers to.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::TiltShiftCamera;
use crate::grid::Grid;
use crate::io::{
    encode_rgb8, encode_rgba8, write_pfm, BackgroundRef, CameraBlock, CutoutRef, LightSpec, MaterialSpec,
    MemorySource, OutputKind, RefractorModeSpec, RefractorSpec, RenderBlock, SceneDocument, SCENE_VERSION,
};
use crate::oracle::{gen_scene, ph_from_mesh, BackgroundKind, CameraSpec, ForegroundKind, MeshLayer, MeshTracer, Pose, SceneSpec, TriMesh};
use crate::vec3::Vec3;

/// World position of the demo light.
pub const DEMO_LIGHT: [f64; 3] = [-1.4, 3.2, 2.2];

/// A scene document plus the bytes of every file it names.
#[derive(Debug, Clone)]
pub struct DemoAssets {
    pub document: SceneDocument,
    pub files: BTreeMap<String, Vec<u8>>,
}

impl DemoAssets {
    pub fn source(&self) -> MemorySource {
        let mut src = MemorySource::default();
        for (name, bytes) in &self.files {
            src.insert(name.clone(), bytes.clone());
        }
        src
    }

    /// Writes `scene.toml` and the assets into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("scene.toml"), self.document.to_toml())?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn shade(n: Vec3<f64>) -> f32 {
    let l = Vec3::new(-0.45, 0.8, -0.4).normalize();
    (0.55 + 0.45 * n.dot(l).max(0.0)) as f32
}

fn ground_color(p: Vec3<f64>) -> [f32; 3] {
    let odd = ((p.x * 2.0).floor() as i64 + (p.z * 2.0).floor() as i64).rem_euclid(2) == 1;
    if odd {
        [0.62, 0.55, 0.46]
    } else {
        [0.78, 0.72, 0.62]
    }
}

fn view_trace(
    tracer: &MeshTracer<f64>,
    camera: &TiltShiftCamera<f64>,
    x: usize,
    y: usize,
) -> Option<crate::oracle::MeshHit<f64>> {
    let d = camera.direction(x as f64, y as f64).normalize();
    tracer.first_hit(camera.origin(), d, f64::INFINITY)
}

/// Builds the demo at `width × height`.
pub fn demo_assets(width: usize, height: usize) -> Result<DemoAssets> {
    if width < 16 || height < 16 {
        return Err(Error::invalid("demo needs at least 16×16 pixels"));
    }
    let cam_spec = CameraSpec::default_for(width, height);
    let camera = cam_spec.camera()?;
    let spec = SceneSpec {
        background: BackgroundKind::WallCorner,
        foreground: ForegroundKind::Box,
        poses: vec![Pose {
            x: -0.3,
            z: 4.2,
            yaw: 0.35,
            elevation: 0.0,
        }],
        camera: cam_spec,
        lights: vec![DEMO_LIGHT],
    };
    let (mut fg, bg) = gen_scene(&spec, 7)?;
    let ball_r = 0.22;
    fg.add_sphere(Vec3::new(0.55, ball_r, 3.7), ball_r, 24, 48);

    let bg_tracer = MeshTracer::new(&TriMesh::empty(), &bg);
    let fg_tracer = MeshTracer::new(&fg, &TriMesh::empty());
    let background = Grid::from_fn(width, height, |x, y| match view_trace(&bg_tracer, &camera, x, y) {
        Some(hit) => {
            let base = if hit.normal.y > 0.9 {
                ground_color(hit.point)
            } else {
                [0.70, 0.74, 0.80]
            };
            let s = shade(hit.normal);
            [base[0] * s, base[1] * s, base[2] * s]
        }
        None => [0.85, 0.9, 0.95],
    });
    let mut ball = Grid::filled(width, height, [0.0f32; 4]);
    let cutout = Grid::from_fn(width, height, |x, y| match view_trace(&fg_tracer, &camera, x, y) {
        Some(hit) if hit.layer == MeshLayer::Foreground => {
            let s = shade(hit.normal);
            if hit.part == 1 {
                ball.set(x, y, [1.0, 1.0, 1.0, 1.0]);
                [0.80 * s, 0.86 * s, 0.90 * s, 1.0]
            } else {
                [0.85 * s, 0.42 * s, 0.18 * s, 1.0]
            }
        }
        _ => [0.0; 4],
    });

    let mut files = BTreeMap::new();
    files.insert("background.png".to_string(), encode_rgb8(&background)?);
    files.insert("cutout.png".to_string(), encode_rgba8(&cutout)?);
    files.insert("ball_mask.png".to_string(), encode_rgba8(&ball)?);
    let mut pfm = Vec::new();
    write_pfm(&ph_from_mesh(&bg, &camera), &mut pfm)?;
    files.insert("background.pfm".to_string(), pfm);
    let mut pfm = Vec::new();
    write_pfm(&ph_from_mesh(&fg, &camera), &mut pfm)?;
    files.insert("cutout.pfm".to_string(), pfm);

    let lp = camera.to_pixel_space(Vec3::new(DEMO_LIGHT[0], DEMO_LIGHT[1], DEMO_LIGHT[2]))?;
    let document = SceneDocument {
        version: SCENE_VERSION.to_string(),
        camera: Some(CameraBlock {
            width: Some(width),
            height: Some(height),
            focal: Some(cam_spec.focal),
            horizon_row: Some(cam_spec.horizon_row),
            cam_height: Some(cam_spec.cam_height),
        }),
        background: BackgroundRef {
            image: "background.png".into(),
            height: "background.pfm".into(),
            height_scale: None,
        },
        cutouts: vec![CutoutRef {
            image: "cutout.png".into(),
            height: "cutout.pfm".into(),
            height_scale: None,
            offset: [0, 0],
        }],
        lights: vec![LightSpec {
            u: lp.u,
            v: lp.v,
            h: lp.h,
            radius: 0.03 * width as f64,
            intensity: 1.0,
        }],
        materials: vec![MaterialSpec {
            albedo: [1.0; 3],
            glossiness: 0.85,
            eta: 1.5,
            reflect_weight: 1.0,
            mask: None,
        }],
        refractors: vec![RefractorSpec {
            mask: "ball_mask.png".into(),
            eta: 1.5,
            tint: [0.95, 0.97, 1.0],
            mode: RefractorModeSpec::Sphere,
        }],
        render: RenderBlock {
            spp: 64,
            seed: 1,
            shadow_opacity: 0.75,
            shadow_color: [0.05, 0.04, 0.06],
            outputs: vec![OutputKind::Composite, OutputKind::Shadow],
        },
    };
    Ok(DemoAssets { document, files })
}
