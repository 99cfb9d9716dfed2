//! 16-bit PNG height maps. A stored value `q` means height `q / 65535 · scale`;
//! an alpha channel, when present, carries the mask.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, LumaA};

use crate::error::{Error, Result};
use crate::geometry::PixelHeightMap;
use crate::grid::Grid;
use crate::num::Real;

fn quantize(v: f64) -> u16 {
    (v * 65535.0).round().clamp(0.0, 65535.0) as u16
}

pub fn encode_png16<T: Real>(map: &PixelHeightMap<T>, height_scale: f64) -> Result<Vec<u8>> {
    if !(height_scale > 0.0 && height_scale.is_finite()) {
        return Err(Error::invalid("height_scale must be positive"));
    }
    let (w, h) = map.dims();
    let mut max = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            if map.is_covered(x, y) {
                max = max.max(map.value(x, y).to_f64_lossy());
            }
        }
    }
    if max > height_scale {
        return Err(Error::invalid(format!(
            "height {max} exceeds height_scale {height_scale}"
        )));
    }
    let height_of = |x: u32, y: u32| {
        let (x, y) = (x as usize, y as usize);
        if map.is_covered(x, y) {
            quantize(map.value(x, y).to_f64_lossy() / height_scale)
        } else {
            0
        }
    };
    let full = map.mask().as_slice().iter().all(|&m| m == T::one());
    let img = if full {
        DynamicImage::ImageLuma16(ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([height_of(x, y)])))
    } else {
        DynamicImage::ImageLumaA16(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let m = map.coverage(x as usize, y as usize).to_f64_lossy();
            LumaA([height_of(x, y), quantize(m)])
        }))
    };
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)?;
    Ok(bytes)
}

pub fn decode_png16<T: Real>(bytes: &[u8], height_scale: f64, name: &str) -> Result<PixelHeightMap<T>> {
    if !(height_scale > 0.0 && height_scale.is_finite()) {
        return Err(Error::format(name, "height_scale must be positive"));
    }
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(name, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let s = height_scale;
    let unit = |q: u16| q as f64 / 65535.0;
    let (values, mask) = match img {
        DynamicImage::ImageLuma16(b) => (
            Grid::from_fn(w, h, |x, y| T::of(unit(b.get_pixel(x as u32, y as u32)[0]) * s)),
            Grid::filled(w, h, T::one()),
        ),
        DynamicImage::ImageLumaA16(b) => (
            Grid::from_fn(w, h, |x, y| T::of(unit(b.get_pixel(x as u32, y as u32)[0]) * s)),
            Grid::from_fn(w, h, |x, y| T::of(unit(b.get_pixel(x as u32, y as u32)[1]))),
        ),
        other => {
            return Err(Error::format(
                name,
                format!("expected 16-bit greyscale PNG, found {:?}", other.color()),
            ))
        }
    };
    PixelHeightMap::new(values, mask).map_err(|e| Error::format(name, e.to_string()))
}

pub fn save_png16<T: Real>(map: &PixelHeightMap<T>, height_scale: f64, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_png16(map, height_scale)?)?;
    Ok(())
}

pub fn load_png16<T: Real>(path: impl AsRef<Path>, height_scale: f64) -> Result<PixelHeightMap<T>> {
    let path = path.as_ref();
    decode_png16(&std::fs::read(path)?, height_scale, &path.display().to_string())
}
