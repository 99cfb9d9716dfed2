//! 8/16-bit colour images as float grids, and PNG encoding of layers.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb as PxRgb, Rgba as PxRgba};

use crate::error::Result;
use crate::grid::Grid;
use crate::tracer::{Rgb, Rgba};

pub fn decode_rgba(bytes: &[u8]) -> Result<Grid<Rgba>> {
    let img = image::load_from_memory(bytes)?.to_rgba32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Grid::from_fn(w, h, |x, y| img.get_pixel(x as u32, y as u32).0))
}

pub fn decode_rgb(bytes: &[u8]) -> Result<Grid<Rgb>> {
    Ok(decode_rgba(bytes)?.map(|p| [p[0], p[1], p[2]]))
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<Grid<Rgb>> {
    decode_rgb(&std::fs::read(path)?)
}

pub fn load_rgba(path: impl AsRef<Path>) -> Result<Grid<Rgba>> {
    decode_rgba(&std::fs::read(path)?)
}

#[inline]
pub fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(img: DynamicImage) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)?;
    Ok(bytes)
}

pub fn encode_rgb8(grid: &Grid<Rgb>) -> Result<Vec<u8>> {
    let (w, h) = grid.dims();
    encode(DynamicImage::ImageRgb8(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        PxRgb(grid.get(x as usize, y as usize).map(to_u8))
    })))
}

pub fn encode_rgba8(grid: &Grid<Rgba>) -> Result<Vec<u8>> {
    let (w, h) = grid.dims();
    encode(DynamicImage::ImageRgba8(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        PxRgba(grid.get(x as usize, y as usize).map(to_u8))
    })))
}

/// Greyscale PNG of a scalar map, mapping `[lo, hi]` to black..white.
pub fn encode_gray8(grid: &Grid<f32>, lo: f32, hi: f32) -> Result<Vec<u8>> {
    let (w, h) = grid.dims();
    let span = if hi > lo { hi - lo } else { 1.0 };
    encode(DynamicImage::ImageLuma8(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([to_u8((grid.get(x as usize, y as usize) - lo) / span)])
    })))
}

/// Greyscale PNG normalised to the map's own value range.
pub fn encode_gray8_auto(grid: &Grid<f32>) -> Result<Vec<u8>> {
    let (lo, hi) = grid
        .as_slice()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo.is_finite() && hi > lo {
        encode_gray8(grid, lo, hi)
    } else {
        encode_gray8(grid, 0.0, 1.0)
    }
}

pub fn save_rgb8(grid: &Grid<Rgb>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_rgb8(grid)?)?;
    Ok(())
}

pub fn save_rgba8(grid: &Grid<Rgba>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_rgba8(grid)?)?;
    Ok(())
}
