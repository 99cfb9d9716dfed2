//! Geometry-aware buffer channels for learned soft-shadow renderers, and the
//! planar channel-stack file that carries them.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PixelHeightMap, PixelPoint};
use crate::grid::Grid;
use crate::num::Real;
use crate::tracer::{hard_shadow, DiskLight, Scene};

/// Channel order of a stack.
pub const CHANNEL_NAMES: [&str; 9] = [
    "cutout_h", "grad_r", "grad_c", "center_hs", "ss_A", "ss_B", "ss_C", "ss_D", "rel_dist",
];

pub const STACK_MAGIC: &[u8; 4] = b"PHL1";

/// Four extreme points A, B, C, D of the light disk: right, up, left, down
/// along the disk axes. Heights are clamped at zero like every disk sample.
pub fn extreme_points<T: Real>(light: &DiskLight<T>) -> [PixelPoint<T>; 4] {
    let (o, l) = (T::zero(), T::one());
    [
        light.point_at(l, o),
        light.point_at(o, l),
        light.point_at(-l, o),
        light.point_at(o, -l),
    ]
}

/// Hard shadows cast from each extreme point (1 = shadowed).
pub fn sparse_hard_shadows<T: Real>(scene: &Scene<T>, light: &DiskLight<T>) -> Result<[Grid<T>; 4]> {
    light.validate()?;
    Ok(extreme_points(light).map(|p| hard_shadow(scene, p)))
}

/// Grid that heights are snapped to before differencing, in pixels.
/// Adding a constant that is a multiple of it shifts every snapped height by
/// exactly that constant, so the gradient is bit-exactly translation invariant.
pub const GRADIENT_QUANTUM: f64 = 1.0 / 65536.0;

fn snap<T: Real>(h: T) -> T {
    let q = T::of(GRADIENT_QUANTUM);
    (h / q).round() * q
}

/// Row and column derivatives of the covered background heights: central
/// differences where both neighbours are covered, one-sided where only one
/// is, zero on uncovered pixels and along a dimension of length one.
pub fn height_gradient<T: Real>(bg: &PixelHeightMap<T>) -> (Grid<T>, Grid<T>) {
    let (w, h) = bg.dims();
    let snapped = bg.values().map(|&v| snap(v));
    // derivative along one axis from the covered pixels among lo, mid, hi
    let diff = |lo: Option<(usize, usize)>, mid: (usize, usize), hi: Option<(usize, usize)>| -> T {
        let lo = lo.filter(|&(x, y)| bg.is_covered(x, y));
        let hi = hi.filter(|&(x, y)| bg.is_covered(x, y));
        let at = |(x, y): (usize, usize)| *snapped.get(x, y);
        match (lo, hi) {
            (Some(a), Some(b)) => (at(b) - at(a)) / T::of(2.0),
            (Some(a), None) => at(mid) - at(a),
            (None, Some(b)) => at(b) - at(mid),
            (None, None) => T::zero(),
        }
    };
    let d_row = Grid::from_fn(w, h, |x, y| {
        if !bg.is_covered(x, y) {
            return T::zero();
        }
        diff(y.checked_sub(1).map(|k| (x, k)), (x, y), (y + 1 < h).then_some((x, y + 1)))
    });
    let d_col = Grid::from_fn(w, h, |x, y| {
        if !bg.is_covered(x, y) {
            return T::zero();
        }
        diff(x.checked_sub(1).map(|k| (k, y)), (x, y), (x + 1 < w).then_some((x + 1, y)))
    });
    (d_row, d_col)
}

/// Pixel-height-space distance from each centre-shadowed receiver to its
/// occluder, the first blocking traversal step towards the light centre.
/// Zero everywhere else.
pub fn relative_distance_map<T: Real>(scene: &Scene<T>, light_center: PixelPoint<T>) -> Grid<T> {
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
                let q = scene.surface_point(x, y);
                if let (Some(block), _) = scene.field().first_block(q, light_center) {
                    let p = PixelPoint::new(block.step.u, block.step.v, block.sample.height);
                    *cell = q.distance(&p);
                }
            }
        });
    out
}

/// All buffer channels at native scale (pixel units).
#[derive(Debug, Clone)]
pub struct BufferChannels<T> {
    pub cutout_height: Grid<T>,
    pub grad_row: Grid<T>,
    pub grad_col: Grid<T>,
    pub center_hard_shadow: Grid<T>,
    pub sparse_shadows: [Grid<T>; 4],
    pub relative_distance: Grid<T>,
    pub light: DiskLight<T>,
}

impl<T: Real> BufferChannels<T> {
    pub fn compute(scene: &Scene<T>, light: &DiskLight<T>) -> Result<Self> {
        light.validate()?;
        let fg = scene.foreground();
        let cutout_height = Grid::from_fn(fg.width(), fg.height(), |x, y| {
            if fg.is_covered(x, y) {
                fg.value(x, y)
            } else {
                T::zero()
            }
        });
        let (grad_row, grad_col) = height_gradient(scene.background_heights());
        Ok(Self {
            cutout_height,
            grad_row,
            grad_col,
            center_hard_shadow: hard_shadow(scene, light.center),
            sparse_shadows: sparse_hard_shadows(scene, light)?,
            relative_distance: relative_distance_map(scene, light.center),
            light: *light,
        })
    }

    /// Channels in stack order, unnormalized.
    pub fn planes(&self) -> [&Grid<T>; 9] {
        [
            &self.cutout_height,
            &self.grad_row,
            &self.grad_col,
            &self.center_hard_shadow,
            &self.sparse_shadows[0],
            &self.sparse_shadows[1],
            &self.sparse_shadows[2],
            &self.sparse_shadows[3],
            &self.relative_distance,
        ]
    }

    /// Stack with heights, gradients and distances divided by the image height.
    pub fn to_stack(&self) -> ChannelStack {
        let (w, h) = self.cutout_height.dims();
        let norm = T::of_usize(h);
        let scaled = [true, true, true, false, false, false, false, false, true];
        let channels = self
            .planes()
            .iter()
            .zip(scaled)
            .map(|(g, s)| {
                g.as_slice()
                    .iter()
                    .map(|&v| if s { (v / norm).to_f64_lossy() as f32 } else { v.to_f64_lossy() as f32 })
                    .collect()
            })
            .collect();
        let l = &self.light;
        let mut metadata = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            metadata.insert(k.to_string(), v);
        };
        put("channels", CHANNEL_NAMES.join(","));
        put("height_normalization", h.to_string());
        put("normalized_channels", "cutout_h,grad_r,grad_c,rel_dist".into());
        put("light_u", l.center.u.to_string());
        put("light_v", l.center.v.to_string());
        put("light_h", l.center.h.to_string());
        put("light_radius", l.radius.to_string());
        put("light_intensity", l.intensity.to_string());
        put("rel_dist_norm", "euclidean".into());
        put("rel_dist_sentinel", "0".into());
        put("rel_dist_normalized", "true".into());
        put("extreme_points", "A=+right,B=+up,C=-right,D=-up".into());
        ChannelStack {
            width: w,
            height: h,
            channels,
            metadata,
        }
    }
}

/// Computes every channel and its serializable stack.
pub fn assemble_channels<T: Real>(
    scene: &Scene<T>,
    light: &DiskLight<T>,
) -> Result<(BufferChannels<T>, ChannelStack)> {
    let ch = BufferChannels::compute(scene, light)?;
    let stack = ch.to_stack();
    Ok((ch, stack))
}

/// Planar float stack plus key/value metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<Vec<f32>>,
    pub metadata: BTreeMap<String, String>,
}

impl ChannelStack {
    /// Channel by name, looked up through the `channels` metadata entry
    /// (falling back to the standard order).
    pub fn channel(&self, name: &str) -> Option<Grid<f32>> {
        let idx = match self.metadata.get("channels") {
            Some(list) => list.split(',').position(|n| n == name)?,
            None => CHANNEL_NAMES.iter().position(|n| *n == name)?,
        };
        let data = self.channels.get(idx)?.clone();
        Grid::from_vec(self.width, self.height, data).ok()
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let n = self.width * self.height;
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("channel length does not match stack dimensions"));
        }
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::invalid(format!("metadata entry {k:?} cannot be serialized")));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        let u32_of = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::invalid(format!("{what} exceeds u32")))
        };
        out.write_all(STACK_MAGIC)?;
        for v in [
            u32_of(self.channels.len(), "channel count")?,
            u32_of(self.width, "width")?,
            u32_of(self.height, "height")?,
            u32_of(meta.len(), "metadata length")?,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(meta.as_bytes())?;
        let mut buf = Vec::with_capacity(n * 4);
        for c in &self.channels {
            buf.clear();
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::format("<stack>", m);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != STACK_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut word = || -> Result<usize> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let (count, width, height, meta_len) = (word()?, word()?, word()?, word()?);
        let n = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(count))
            .filter(|&t| t <= (1 << 31))
            .ok_or_else(|| bad("dimensions overflow"))?;
        let mut meta = vec![0u8; meta_len];
        input.read_exact(&mut meta).map_err(|_| bad("truncated metadata"))?;
        let meta = String::from_utf8(meta).map_err(|_| bad("metadata is not UTF-8"))?;
        let mut metadata = BTreeMap::new();
        for line in meta.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad("metadata line without '='"))?;
            metadata.insert(k.to_string(), v.to_string());
        }
        let mut raw = vec![0u8; n * 4];
        input.read_exact(&mut raw).map_err(|_| bad("truncated channel data"))?;
        let plane = width * height;
        let channels = (0..count)
            .map(|c| {
                raw[c * plane * 4..(c + 1) * plane * 4]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect()
            })
            .collect();
        Ok(Self {
            width,
            height,
            channels,
            metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path.display().to_string(), message),
            e => e,
        })
    }
}
