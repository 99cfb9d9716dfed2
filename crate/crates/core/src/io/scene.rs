//! Scene documents: a versioned TOML description of camera, layers, lights,
//! materials and render settings, plus loading of the referenced assets.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PixelHeightMap, PixelPoint, TiltShiftCamera};
use crate::grid::Grid;
use crate::io::{decode_png16, decode_rgba, read_pfm};
use crate::num::Real;
use crate::tracer::{DiskLight, Material, MaterialMap, RefractionMode, Refractor, Rgb, Rgba};

pub const SCENE_VERSION: &str = "phlab-scene/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraBlock>,
    pub background: BackgroundRef,
    #[serde(default)]
    pub cutouts: Vec<CutoutRef>,
    #[serde(default)]
    pub lights: Vec<LightSpec>,
    #[serde(default)]
    pub materials: Vec<MaterialSpec>,
    #[serde(default)]
    pub refractors: Vec<RefractorSpec>,
    #[serde(default)]
    pub render: RenderBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraBlock {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub focal: Option<f64>,
    pub horizon_row: Option<f64>,
    pub cam_height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundRef {
    pub image: String,
    pub height: String,
    /// Required when `height` is a 16-bit PNG.
    pub height_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoutRef {
    pub image: String,
    pub height: String,
    pub height_scale: Option<f64>,
    #[serde(default)]
    pub offset: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpec {
    pub u: f64,
    pub v: f64,
    pub h: f64,
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "one")]
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default = "white")]
    pub albedo: [f32; 3],
    #[serde(default = "default_glossiness")]
    pub glossiness: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "one")]
    pub reflect_weight: f64,
    /// Greyscale image; pixels brighter than one half receive the material.
    pub mask: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefractorModeSpec {
    Surface,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefractorSpec {
    pub mask: String,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "white")]
    pub tint: [f32; 3],
    #[serde(default = "default_mode")]
    pub mode: RefractorModeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Composite,
    Shadow,
    Reflection,
    Refraction,
    Channels,
}

impl OutputKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "composite" => Self::Composite,
            "shadow" => Self::Shadow,
            "reflection" => Self::Reflection,
            "refraction" => Self::Refraction,
            "channels" => Self::Channels,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderBlock {
    #[serde(default = "default_spp")]
    pub spp: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_opacity")]
    pub shadow_opacity: f32,
    #[serde(default)]
    pub shadow_color: [f32; 3],
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

impl Default for RenderBlock {
    fn default() -> Self {
        Self {
            spp: default_spp(),
            seed: 0,
            shadow_opacity: default_opacity(),
            shadow_color: [0.0; 3],
            outputs: default_outputs(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn white() -> [f32; 3] {
    [1.0; 3]
}
fn default_glossiness() -> f64 {
    0.9
}
fn default_eta() -> f64 {
    1.5
}
fn default_mode() -> RefractorModeSpec {
    RefractorModeSpec::Surface
}
fn default_spp() -> u32 {
    64
}
fn default_opacity() -> f32 {
    0.7
}
fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Composite]
}

fn field_err(location: &str, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scene {
        location: location.to_string(),
        field: field.into(),
        message: message.into(),
    }
}

/// `line:column` (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

impl SceneDocument {
    /// Parses and validates a document. `origin` names it in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        // version first, so documents from other versions fail on that alone
        let raw: toml::Table = toml::from_str(text).map_err(|e| {
            let loc = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    format!("{origin}:{l}:{c}")
                }
                None => origin.to_string(),
            };
            field_err(&loc, "<document>", e.message().to_string())
        })?;
        match raw.get("version") {
            Some(toml::Value::String(v)) if v == SCENE_VERSION => {}
            Some(toml::Value::String(v)) => {
                return Err(field_err(
                    origin,
                    "version",
                    format!("unsupported version {v:?}, expected {SCENE_VERSION:?}"),
                ))
            }
            Some(_) => return Err(field_err(origin, "version", "must be a string")),
            None => return Err(field_err(origin, "version", "missing")),
        }
        let doc: SceneDocument = toml::from_str(text).map_err(|e| {
            let (loc, field) = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    (format!("{origin}:{l}:{c}"), field_at(text, span.start))
                }
                None => (origin.to_string(), "<document>".to_string()),
            };
            field_err(&loc, field, e.message().to_string())
        })?;
        doc.validate(origin)?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene documents always serialize")
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let err = |f: String, m: &str| field_err(origin, f, m);
        if let Some(cam) = &self.camera {
            if cam.width == Some(0) {
                return Err(err("camera.width".into(), "must be positive"));
            }
            if cam.height == Some(0) {
                return Err(err("camera.height".into(), "must be positive"));
            }
            if cam.focal.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
                return Err(err("camera.focal".into(), "must be positive"));
            }
            if cam.cam_height.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
                return Err(err("camera.cam_height".into(), "must be positive"));
            }
            if cam.horizon_row.is_some_and(|f| !f.is_finite()) {
                return Err(err("camera.horizon_row".into(), "must be finite"));
            }
        }
        check_height_ref(&self.background.height, self.background.height_scale, "background", origin)?;
        for (i, c) in self.cutouts.iter().enumerate() {
            check_height_ref(&c.height, c.height_scale, &format!("cutouts[{i}]"), origin)?;
        }
        for (i, l) in self.lights.iter().enumerate() {
            let f = |n: &str| format!("lights[{i}].{n}");
            if !(l.u.is_finite() && l.v.is_finite()) {
                return Err(err(f("u"), "light position must be finite"));
            }
            if !(l.h > 0.0 && l.h.is_finite()) {
                return Err(err(f("h"), "must be > 0 (light above the ground)"));
            }
            if !(l.radius >= 0.0 && l.radius.is_finite()) {
                return Err(err(f("radius"), "must be >= 0"));
            }
            if !(l.intensity >= 0.0 && l.intensity.is_finite()) {
                return Err(err(f("intensity"), "must be >= 0"));
            }
        }
        for (i, m) in self.materials.iter().enumerate() {
            let f = |n: &str| format!("materials[{i}].{n}");
            if !m.albedo.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(err(f("albedo"), "components must lie in [0, 1]"));
            }
            if !(0.0..=1.0).contains(&m.glossiness) {
                return Err(err(f("glossiness"), "must lie in [0, 1]"));
            }
            if !(m.eta >= 1.0 && m.eta.is_finite()) {
                return Err(err(f("eta"), "must be >= 1"));
            }
            if !(0.0..=1.0).contains(&m.reflect_weight) {
                return Err(err(f("reflect_weight"), "must lie in [0, 1]"));
            }
        }
        for (i, r) in self.refractors.iter().enumerate() {
            if !(r.eta >= 1.0 && r.eta.is_finite()) {
                return Err(err(format!("refractors[{i}].eta"), "must be >= 1"));
            }
            if !r.tint.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(err(format!("refractors[{i}].tint"), "components must lie in [0, 1]"));
            }
        }
        let r = &self.render;
        if r.spp == 0 {
            return Err(err("render.spp".into(), "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&r.shadow_opacity) {
            return Err(err("render.shadow_opacity".into(), "must lie in [0, 1]"));
        }
        if !r.shadow_color.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(err("render.shadow_color".into(), "components must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn check_height_ref(path: &str, scale: Option<f64>, what: &str, origin: &str) -> Result<()> {
    match extension(path).as_str() {
        "pfm" => {}
        "png" => match scale {
            None => {
                return Err(field_err(
                    origin,
                    format!("{what}.height_scale"),
                    "required for 16-bit PNG height maps",
                ))
            }
            Some(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(field_err(origin, format!("{what}.height_scale"), "must be positive"))
            }
            Some(_) => {}
        },
        other => {
            return Err(field_err(
                origin,
                format!("{what}.height"),
                format!("unsupported height map format {other:?} (expected .pfm or .png)"),
            ))
        }
    }
    Ok(())
}

fn extension(path: &str) -> String {
    Path::new(path)
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

/// Best-effort dotted path of the key or table header at a byte offset.
fn field_at(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let start = pos;
        pos += line.len();
        let t = line.trim();
        if let Some(name) = t.strip_prefix("[[").and_then(|s| s.split("]]").next()) {
            let name = name.trim().to_string();
            let n = index.entry(name.clone()).or_insert(0);
            table = format!("{name}[{n}]");
            *n += 1;
            key.clear();
        } else if let Some(name) = t.strip_prefix('[').and_then(|s| s.split(']').next()) {
            table = name.trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        if offset < pos || pos >= text.len() {
            let _ = start;
            break;
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<document>".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

/// Where referenced assets come from.
pub trait AssetSource: Send + Sync {
    fn read(&self, name: &str) -> Result<Vec<u8>>;
}

/// Assets on disk, resolved relative to a root directory.
#[derive(Debug, Clone)]
pub struct FsSource {
    pub root: PathBuf,
}

impl FsSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl AssetSource for FsSource {
    fn read(&self, name: &str) -> Result<Vec<u8>> {
        let p = self.root.join(name);
        std::fs::read(&p).map_err(|e| Error::format(p, e.to_string()))
    }
}

/// Assets held in memory by name.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    pub files: HashMap<String, Vec<u8>>,
}

impl MemorySource {
    pub fn insert(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }
}

impl AssetSource for MemorySource {
    fn read(&self, name: &str) -> Result<Vec<u8>> {
        self.files
            .get(name)
            .cloned()
            .ok_or_else(|| Error::format(name, "asset not found"))
    }
}

/// A scene document with every asset decoded and composited onto the canvas.
#[derive(Debug, Clone)]
pub struct LoadedScene<T> {
    pub camera: TiltShiftCamera<T>,
    pub background: Grid<Rgb>,
    pub bg: PixelHeightMap<T>,
    /// Straight-alpha cutout colour on the canvas.
    pub cutout: Grid<Rgba>,
    pub fg: PixelHeightMap<T>,
    pub lights: Vec<DiskLight<T>>,
    pub materials: MaterialMap<T>,
    pub refractors: Vec<Refractor<T>>,
    pub render: RenderBlock,
}

fn load_heights<T: Real>(
    src: &dyn AssetSource,
    name: &str,
    scale: Option<f64>,
) -> Result<PixelHeightMap<T>> {
    let bytes = src.read(name)?;
    match extension(name).as_str() {
        "pfm" => read_pfm(bytes.as_slice(), name),
        _ => decode_png16(&bytes, scale.unwrap_or(0.0), name),
    }
}

fn load_mask<T: Real>(src: &dyn AssetSource, name: &str, dims: (usize, usize), field: &str) -> Result<Grid<T>> {
    let img = decode_rgba(&src.read(name)?)?;
    if img.dims() != dims {
        return Err(field_err(name, field, format!("mask is {:?}, canvas is {dims:?}", img.dims())));
    }
    Ok(img.map(|p| if p[0] > 0.5 && p[3] > 0.5 { T::one() } else { T::zero() }))
}

/// Parses a scene file and loads its assets relative to the file's directory.
pub fn parse_scene(path: impl AsRef<Path>) -> Result<SceneDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        field_err(&path.display().to_string(), "<document>", e.to_string())
    })?;
    SceneDocument::parse(&text, &path.display().to_string())
}

pub fn load_scene<T: Real>(doc: &SceneDocument, src: &dyn AssetSource) -> Result<LoadedScene<T>> {
    let background = crate::io::decode_rgb(&src.read(&doc.background.image)?)?;
    let dims = background.dims();
    let bg: PixelHeightMap<T> = load_heights(src, &doc.background.height, doc.background.height_scale)?;
    if bg.dims() != dims {
        return Err(field_err(
            &doc.background.height,
            "background.height",
            format!("height map is {:?}, image is {dims:?}", bg.dims()),
        ));
    }
    let camera = match &doc.camera {
        None => TiltShiftCamera::default_for(dims.0, dims.1)?,
        Some(c) => {
            let (w, h) = (c.width.unwrap_or(dims.0), c.height.unwrap_or(dims.1));
            if (w, h) != dims {
                return Err(field_err(
                    "camera",
                    "camera.width",
                    format!("camera is {w}x{h}, background is {}x{}", dims.0, dims.1),
                ));
            }
            let def = TiltShiftCamera::<T>::default_for(w, h)?;
            TiltShiftCamera::new(
                w,
                h,
                c.focal.map_or(def.focal(), T::of),
                c.horizon_row.map_or(def.horizon_row(), T::of),
                c.cam_height.map_or(def.cam_height(), T::of),
            )?
        }
    };

    let (w, h) = dims;
    let mut cutout = Grid::filled(w, h, [0.0f32; 4]);
    let mut fg_h = Grid::filled(w, h, T::zero());
    let mut fg_m = Grid::filled(w, h, T::zero());
    for (i, c) in doc.cutouts.iter().enumerate() {
        let img = decode_rgba(&src.read(&c.image)?)?;
        let hm: PixelHeightMap<T> = load_heights(src, &c.height, c.height_scale)?;
        if hm.dims() != img.dims() {
            return Err(field_err(
                &c.height,
                format!("cutouts[{i}].height"),
                format!("height map is {:?}, image is {:?}", hm.dims(), img.dims()),
            ));
        }
        let (cw, ch) = img.dims();
        for y in 0..ch {
            for x in 0..cw {
                let (tx, ty) = (x as i64 + c.offset[0], y as i64 + c.offset[1]);
                if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
                    continue;
                }
                let (tx, ty) = (tx as usize, ty as usize);
                let px = *img.get(x, y);
                let cov = T::of(px[3] as f64) * hm.coverage(x, y);
                if cov > T::zero() {
                    // later cutouts go over earlier ones
                    let dst = cutout.get_mut(tx, ty);
                    let a = px[3];
                    for k in 0..3 {
                        dst[k] = px[k] * a + dst[k] * dst[3] * (1.0 - a);
                    }
                    let out_a = a + dst[3] * (1.0 - a);
                    if out_a > 0.0 {
                        for k in 0..3 {
                            dst[k] /= out_a;
                        }
                    }
                    dst[3] = out_a;
                    fg_h.set(tx, ty, hm.value(x, y));
                    let prev = *fg_m.get(tx, ty);
                    fg_m.set(tx, ty, cov + prev * (T::one() - cov));
                }
            }
        }
    }
    let fg = PixelHeightMap::new(fg_h, fg_m)?;

    let lights = doc
        .lights
        .iter()
        .map(|l| {
            let mut light = DiskLight::new(PixelPoint::new(T::of(l.u), T::of(l.v), T::of(l.h)), T::of(l.radius))?;
            light.intensity = T::of(l.intensity);
            Ok(light)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut materials = MaterialMap::new();
    for (i, m) in doc.materials.iter().enumerate() {
        let mask = match &m.mask {
            Some(name) => Some(load_mask(src, name, dims, &format!("materials[{i}].mask"))?),
            None => None,
        };
        materials.push(
            Material {
                albedo: m.albedo,
                glossiness: T::of(m.glossiness),
                eta: T::of(m.eta),
                reflect_weight: T::of(m.reflect_weight),
            },
            mask,
        );
    }

    let refractors = doc
        .refractors
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(Refractor {
                mask: load_mask(src, &r.mask, dims, &format!("refractors[{i}].mask"))?,
                eta: T::of(r.eta),
                tint: r.tint,
                mode: match r.mode {
                    RefractorModeSpec::Surface => RefractionMode::Surface,
                    RefractorModeSpec::Sphere => RefractionMode::SphereProxy,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LoadedScene {
        camera,
        background,
        bg,
        cutout,
        fg,
        lights,
        materials,
        refractors,
        render: doc.render.clone(),
    })
}

/// Parses `path` and loads its assets from the same directory.
pub fn load_scene_file<T: Real>(path: impl AsRef<Path>) -> Result<(SceneDocument, LoadedScene<T>)> {
    let path = path.as_ref();
    let doc = parse_scene(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = load_scene(&doc, &FsSource::new(root))?;
    Ok((doc, loaded))
}
