//! Procedural benchmark scenes: backgrounds, standing objects, camera and lights.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TiltShiftCamera, DEFAULT_HORIZON_FRACTION};
use crate::oracle::mesh::TriMesh;
use crate::vec3::Vec3;

/// Half-width and depth of the ground quad.
pub const GROUND_HALF_WIDTH: f64 = 30.0;
pub const GROUND_DEPTH: f64 = 60.0;
/// Distance of back walls from the camera.
pub const WALL_DEPTH: f64 = 7.0;
pub const WALL_HEIGHT: f64 = 4.0;
pub const SIDE_WALL_X: f64 = 2.5;
pub const CORNELL_CEILING: f64 = 3.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    Plane,
    WallCorner,
    TwoCorners,
    Steps(u32),
    Curved,
    CornellBox,
}

impl BackgroundKind {
    pub const ALL: [BackgroundKind; 6] = [
        BackgroundKind::Plane,
        BackgroundKind::WallCorner,
        BackgroundKind::TwoCorners,
        BackgroundKind::Steps(3),
        BackgroundKind::Curved,
        BackgroundKind::CornellBox,
    ];

    /// Report group: bare ground versus any scene with walls.
    pub fn group(&self) -> &'static str {
        match self {
            BackgroundKind::Plane => "ground",
            _ => "wall",
        }
    }
}

impl fmt::Display for BackgroundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackgroundKind::Plane => f.write_str("plane"),
            BackgroundKind::WallCorner => f.write_str("wall_corner"),
            BackgroundKind::TwoCorners => f.write_str("two_corners"),
            BackgroundKind::Steps(n) => write!(f, "steps:{n}"),
            BackgroundKind::Curved => f.write_str("curved"),
            BackgroundKind::CornellBox => f.write_str("cornell_box"),
        }
    }
}

impl FromStr for BackgroundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "plane" => Self::Plane,
            "wall_corner" => Self::WallCorner,
            "two_corners" => Self::TwoCorners,
            "steps" => Self::Steps(3),
            "curved" => Self::Curved,
            "cornell_box" => Self::CornellBox,
            _ => match s.strip_prefix("steps:").map(str::parse::<u32>) {
                Some(Ok(n)) if n > 0 => Self::Steps(n),
                _ => return Err(Error::invalid(format!("unknown background kind {s:?}"))),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForegroundKind {
    Box,
    Cylinder,
    Sphere,
    /// A box carrying a sphere, with a cylinder beside it.
    Composite,
}

impl ForegroundKind {
    pub const ALL: [ForegroundKind; 4] = [
        ForegroundKind::Box,
        ForegroundKind::Cylinder,
        ForegroundKind::Sphere,
        ForegroundKind::Composite,
    ];
}

impl fmt::Display for ForegroundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForegroundKind::Box => "box",
            ForegroundKind::Cylinder => "cylinder",
            ForegroundKind::Sphere => "sphere",
            ForegroundKind::Composite => "composite",
        })
    }
}

impl FromStr for ForegroundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "box" => Self::Box,
            "cylinder" => Self::Cylinder,
            "sphere" => Self::Sphere,
            "composite" => Self::Composite,
            _ => return Err(Error::invalid(format!("unknown foreground kind {s:?}"))),
        })
    }
}

/// Placement of a foreground object on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub yaw: f64,
    /// Height of the object's base above the ground; 0 means standing.
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub horizon_row: f64,
    pub cam_height: f64,
}

impl CameraSpec {
    /// Default camera for a `width × height` image.
    pub fn default_for(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            focal: width as f64,
            horizon_row: DEFAULT_HORIZON_FRACTION * height as f64,
            cam_height: 1.0,
        }
    }

    pub fn camera(&self) -> Result<TiltShiftCamera<f64>> {
        TiltShiftCamera::new(self.width, self.height, self.focal, self.horizon_row, self.cam_height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub background: BackgroundKind,
    pub foreground: ForegroundKind,
    pub poses: Vec<Pose>,
    pub camera: CameraSpec,
    /// Point-light positions in world units.
    pub lights: Vec<[f64; 3]>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.poses.is_empty() {
            return Err(Error::invalid("scene needs at least one pose"));
        }
        for (i, p) in self.poses.iter().enumerate() {
            if !(p.elevation >= 0.0) {
                return Err(Error::invalid(format!("pose {i} is below the ground")));
            }
            if !(p.z > 0.0) {
                return Err(Error::invalid(format!("pose {i} is behind the camera")));
            }
        }
        for (i, l) in self.lights.iter().enumerate() {
            if !(l[1] > 0.0 && l[2] > 0.0) {
                return Err(Error::invalid(format!(
                    "light {i} must be above the ground and in front of the camera"
                )));
            }
        }
        self.camera.camera().map(|_| ())
    }
}

/// Builds the foreground and background meshes of `spec`. Object sizes are
/// drawn from `seed`, so equal inputs give identical meshes.
pub fn gen_scene(spec: &SceneSpec, seed: u64) -> Result<(TriMesh<f64>, TriMesh<f64>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fg = TriMesh::empty();
    for pose in &spec.poses {
        add_object(&mut fg, spec.foreground, pose, &mut rng);
    }
    let bg = background_mesh(spec.background);
    Ok((fg, bg))
}

fn add_object(m: &mut TriMesh<f64>, kind: ForegroundKind, p: &Pose, rng: &mut ChaCha8Rng) {
    let base = Vec3::new(p.x, p.elevation, p.z);
    match kind {
        ForegroundKind::Box => {
            let (w, h, d) = (rng.random_range(0.3..0.8), rng.random_range(0.3..0.9), rng.random_range(0.3..0.8));
            m.add_box(
                base - Vec3::new(w / 2.0, 0.0, d / 2.0),
                base + Vec3::new(w / 2.0, h, d / 2.0),
                p.yaw,
            );
        }
        ForegroundKind::Cylinder => {
            let (r, h) = (rng.random_range(0.15..0.35), rng.random_range(0.4..1.0));
            m.add_cylinder(base, r, h, 48);
        }
        ForegroundKind::Sphere => {
            let r = rng.random_range(0.2..0.45);
            m.add_sphere(base + Vec3::new(0.0, r, 0.0), r, 24, 48);
        }
        ForegroundKind::Composite => {
            let (w, h) = (rng.random_range(0.35..0.6), rng.random_range(0.25..0.5));
            m.add_box(
                base - Vec3::new(w / 2.0, 0.0, w / 2.0),
                base + Vec3::new(w / 2.0, h, w / 2.0),
                p.yaw,
            );
            let r = rng.random_range(0.12..0.2);
            m.add_sphere(base + Vec3::new(0.0, h + r, 0.0), r, 24, 48);
            let (s, c) = p.yaw.sin_cos();
            let off = w * 0.5 + 0.25;
            m.add_cylinder(
                base + Vec3::new(off * c, 0.0, -off * s),
                rng.random_range(0.08..0.14),
                rng.random_range(0.3..0.7),
                48,
            );
        }
    }
}

fn quad(m: &mut TriMesh<f64>, a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) {
    let v = |p: [f64; 3]| Vec3::new(p[0], p[1], p[2]);
    m.add_quad(v(a), v(b), v(c), v(d));
}

fn background_mesh(kind: BackgroundKind) -> TriMesh<f64> {
    let mut m = TriMesh::empty();
    let (gw, gd) = (GROUND_HALF_WIDTH, GROUND_DEPTH);
    let ground_depth = match kind {
        BackgroundKind::Plane | BackgroundKind::Steps(_) | BackgroundKind::Curved => gd,
        _ => WALL_DEPTH,
    };
    quad(&mut m, [-gw, 0.0, 0.0], [gw, 0.0, 0.0], [gw, 0.0, ground_depth], [-gw, 0.0, ground_depth]);
    let (zw, hw, xs) = (WALL_DEPTH, WALL_HEIGHT, SIDE_WALL_X);
    match kind {
        BackgroundKind::Plane => {}
        BackgroundKind::WallCorner => {
            quad(&mut m, [-gw, 0.0, zw], [xs, 0.0, zw], [xs, hw, zw], [-gw, hw, zw]);
            quad(&mut m, [xs, 0.0, 0.0], [xs, 0.0, zw], [xs, hw, zw], [xs, hw, 0.0]);
        }
        BackgroundKind::TwoCorners => {
            quad(&mut m, [-xs, 0.0, zw], [xs, 0.0, zw], [xs, hw, zw], [-xs, hw, zw]);
            quad(&mut m, [xs, 0.0, 0.0], [xs, 0.0, zw], [xs, hw, zw], [xs, hw, 0.0]);
            quad(&mut m, [-xs, 0.0, 0.0], [-xs, 0.0, zw], [-xs, hw, zw], [-xs, hw, 0.0]);
        }
        BackgroundKind::Steps(n) => {
            let (z0, depth, rise) = (6.0, 1.0, 0.25);
            for i in 0..n {
                let z = z0 + depth * i as f64;
                let mut b = TriMesh::empty();
                b.add_box(
                    Vec3::new(-gw, 0.0, z),
                    Vec3::new(gw, rise * (i + 1) as f64, z + depth * (n - i) as f64),
                    0.0,
                );
                m.append(&b);
            }
        }
        BackgroundKind::Curved => {
            m.add_curved_wall(Vec3::new(0.0, 0.0, 4.0), 4.0, 0.0, PI, hw, 96);
        }
        BackgroundKind::CornellBox => {
            let h = CORNELL_CEILING;
            quad(&mut m, [-xs, 0.0, zw], [xs, 0.0, zw], [xs, h, zw], [-xs, h, zw]);
            quad(&mut m, [xs, 0.0, 0.0], [xs, 0.0, zw], [xs, h, zw], [xs, h, 0.0]);
            quad(&mut m, [-xs, 0.0, 0.0], [-xs, 0.0, zw], [-xs, h, zw], [-xs, h, 0.0]);
            quad(&mut m, [-xs, h, 0.0], [xs, h, 0.0], [xs, h, zw], [-xs, h, zw]);
        }
    }
    m
}

/// Random light positions on the camera side of the objects, elevated so
/// shadows fall behind them.
pub fn sample_lights(kind: BackgroundKind, count: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    (0..count)
        .map(|_| match kind {
            BackgroundKind::CornellBox => [
                rng.random_range(-1.8..1.8),
                rng.random_range(2.4..CORNELL_CEILING - 0.2),
                rng.random_range(0.8..2.8),
            ],
            _ => [
                rng.random_range(-(SIDE_WALL_X - 0.5)..SIDE_WALL_X - 0.5),
                rng.random_range(2.5..5.0),
                rng.random_range(0.5..3.0),
            ],
        })
        .collect()
}

/// One benchmark scene with an id that starts with its report group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScene {
    pub id: String,
    pub seed: u64,
    pub spec: SceneSpec,
}

/// `count` scenes cycling through every background and foreground kind,
/// each with `lights` random point lights.
pub fn benchmark_scenes(count: usize, lights: usize, width: usize, height: usize, seed: u64) -> Vec<BenchScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let bgk = BackgroundKind::ALL[i % BackgroundKind::ALL.len()];
            let fgk = ForegroundKind::ALL[(i / BackgroundKind::ALL.len()) % ForegroundKind::ALL.len()];
            let pose = Pose {
                x: rng.random_range(-0.6..0.6),
                z: rng.random_range(3.5..4.8),
                yaw: rng.random_range(0.0..PI / 2.0),
                elevation: 0.0,
            };
            let spec = SceneSpec {
                background: bgk,
                foreground: fgk,
                poses: vec![pose],
                camera: CameraSpec::default_for(width, height),
                lights: sample_lights(bgk, lights, &mut rng),
            };
            BenchScene {
                id: format!("{}/{:03}_{}_{}", bgk.group(), i, bgk.to_string().replace(':', ""), fgk),
                seed: rng.random(),
                spec,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bg: BackgroundKind, fg: ForegroundKind) -> SceneSpec {
        SceneSpec {
            background: bg,
            foreground: fg,
            poses: vec![Pose {
                x: 0.0,
                z: 4.0,
                yaw: 0.3,
                elevation: 0.0,
            }],
            camera: CameraSpec::default_for(64, 64),
            lights: vec![[1.0, 3.0, 1.0]],
        }
    }

    #[test]
    fn plane_is_one_quad() {
        let (_, bg) = gen_scene(&spec(BackgroundKind::Plane, ForegroundKind::Box), 1).unwrap();
        assert_eq!(bg.len(), 2);
    }

    #[test]
    fn steps_rise() {
        let (_, bg) = gen_scene(&spec(BackgroundKind::Steps(3), ForegroundKind::Box), 1).unwrap();
        assert_eq!(bg.parts().len(), 4);
        let tops: Vec<f64> = bg.parts()[1..]
            .iter()
            .map(|r| {
                r.clone()
                    .flat_map(|t| bg.triangle(t))
                    .map(|p| p.y)
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(tops.windows(2).all(|w| w[1] > w[0]), "{tops:?}");
    }

    #[test]
    fn kinds_parse() {
        for k in BackgroundKind::ALL {
            assert_eq!(k.to_string().parse::<BackgroundKind>().unwrap(), k);
        }
        for k in ForegroundKind::ALL {
            assert_eq!(k.to_string().parse::<ForegroundKind>().unwrap(), k);
        }
        assert!("pyramid".parse::<ForegroundKind>().is_err());
        assert!("steps:0".parse::<BackgroundKind>().is_err());
    }

    #[test]
    fn objects_stand_on_the_ground() {
        for k in ForegroundKind::ALL {
            let (fg, _) = gen_scene(&spec(BackgroundKind::Plane, k), 7).unwrap();
            let (lo, _) = fg.bounds().unwrap();
            assert!(lo.y.abs() < 1e-12, "{k}: {}", lo.y);
        }
    }
}
