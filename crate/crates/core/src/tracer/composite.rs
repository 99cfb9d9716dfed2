//! Layer compositing into the final image.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Linear RGB in [0, 1].
pub type Rgb = [f32; 3];
/// RGBA in [0, 1]. Cutouts are straight alpha, effect layers are premultiplied.
pub type Rgba = [f32; 4];

/// Inputs for [`composite`]. Missing effect layers are treated as empty.
#[derive(Debug, Clone, Copy)]
pub struct CompositeLayers<'a> {
    pub background: &'a Grid<Rgb>,
    /// Straight-alpha cutout.
    pub cutout: &'a Grid<Rgba>,
    /// Light visibility in [0, 1]; 1 is fully lit.
    pub visibility: Option<&'a Grid<f32>>,
    pub reflection: Option<&'a Grid<Rgba>>,
    pub refraction: Option<&'a Grid<Rgba>>,
    pub shadow_opacity: f32,
    pub shadow_color: Rgb,
}

/// Composites in this order: shadow darkening of the background, reflection
/// (premultiplied over), cutout (straight alpha over), refraction
/// (premultiplied, replacing the cutout where it has coverage).
pub fn composite(layers: &CompositeLayers<'_>) -> Result<Grid<Rgb>> {
    let dims = layers.background.dims();
    layers.cutout.ensure_dims(dims)?;
    if let Some(v) = layers.visibility {
        v.ensure_dims(dims)?;
    }
    if let Some(r) = layers.reflection {
        r.ensure_dims(dims)?;
    }
    if let Some(r) = layers.refraction {
        r.ensure_dims(dims)?;
    }
    if !(0.0..=1.0).contains(&layers.shadow_opacity) {
        return Err(Error::invalid("shadow opacity must lie in [0, 1]"));
    }
    let (w, h) = dims;
    Ok(Grid::from_fn(w, h, |x, y| {
        let mut c = *layers.background.get(x, y);
        if let Some(vis) = layers.visibility {
            let k = layers.shadow_opacity * (1.0 - vis.get(x, y).clamp(0.0, 1.0));
            for i in 0..3 {
                c[i] += (layers.shadow_color[i] - c[i]) * k;
            }
        }
        if let Some(refl) = layers.reflection {
            let r = refl.get(x, y);
            for i in 0..3 {
                c[i] = r[i] + c[i] * (1.0 - r[3]);
            }
        }
        let f = layers.cutout.get(x, y);
        for i in 0..3 {
            c[i] = f[i] * f[3] + c[i] * (1.0 - f[3]);
        }
        if let Some(refr) = layers.refraction {
            let r = refr.get(x, y);
            for i in 0..3 {
                c[i] = r[i] + c[i] * (1.0 - r[3]);
            }
        }
        c.map(|v| v.clamp(0.0, 1.0))
    }))
}
