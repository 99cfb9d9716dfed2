use crate::error::Result;
use crate::geometry::{PixelHeightMap, TiltShiftCamera};
use crate::grid::Grid;
use crate::num::Real;
use crate::vec3::{Point3, Vec3};

/// Which composited layer a pixel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Foreground,
    Background,
    Empty,
}

/// Per-pixel reconstruction of a composited foreground + background.
#[derive(Debug, Clone)]
pub struct SceneGrid<T> {
    pub positions: Grid<Point3<T>>,
    pub valid: Grid<bool>,
    pub layer: Grid<Layer>,
    pub normals: Grid<Vec3<T>>,
    pub normal_valid: Grid<bool>,
    /// Distance along the viewing axis.
    pub depth: Grid<T>,
}

impl<T: Real> SceneGrid<T> {
    pub fn width(&self) -> usize {
        self.positions.width()
    }

    pub fn height(&self) -> usize {
        self.positions.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.positions.dims()
    }
}

/// Reconstructs every pixel of the composite. Foreground pixels (mask > 0)
/// override the background; pixels whose foot is at or above the horizon
/// are marked invalid.
pub fn reconstruct_scene<T: Real>(
    camera: &TiltShiftCamera<T>,
    fg: &PixelHeightMap<T>,
    bg: &PixelHeightMap<T>,
) -> Result<SceneGrid<T>> {
    let dims = camera.dims();
    fg.values().ensure_dims(dims)?;
    bg.values().ensure_dims(dims)?;
    let (w, h) = dims;
    let mut positions = Grid::filled(w, h, Vec3::zero());
    let mut valid = Grid::filled(w, h, false);
    let mut layer = Grid::filled(w, h, Layer::Empty);
    let mut depth = Grid::filled(w, h, T::zero());
    for y in 0..h {
        for x in 0..w {
            let (src, which) = if fg.is_covered(x, y) {
                (fg, Layer::Foreground)
            } else if bg.is_covered(x, y) {
                (bg, Layer::Background)
            } else {
                continue;
            };
            layer.set(x, y, which);
            let (u, v) = (T::of_usize(x), T::of_usize(y));
            if let Ok(p) = camera.reconstruct_point(u, v, src.value(x, y)) {
                if p.is_finite() {
                    positions.set(x, y, p);
                    valid.set(x, y, true);
                    depth.set(x, y, camera.depth_of(p));
                }
            }
        }
    }
    Ok(SceneGrid {
        positions,
        valid,
        layer,
        normals: Grid::filled(w, h, Vec3::zero()),
        normal_valid: Grid::filled(w, h, false),
        depth,
    })
}

/// Fills in normals from position differences between neighbouring pixels.
///
/// Central differences are used where both neighbours are valid and belong
/// to the same layer, one-sided differences otherwise. A pixel with no usable
/// neighbour along either axis keeps `normal_valid = false`. Normals are
/// flipped to face the camera.
pub fn estimate_normals<T: Real>(mut grid: SceneGrid<T>, camera: &TiltShiftCamera<T>) -> SceneGrid<T> {
    let (w, h) = grid.dims();
    let same = |grid: &SceneGrid<T>, x: usize, y: usize, l: Layer| {
        *grid.valid.get(x, y) && *grid.layer.get(x, y) == l
    };
    let delta = |grid: &SceneGrid<T>, x: usize, y: usize, dx: isize, dy: isize| -> Option<Vec3<T>> {
        let l = *grid.layer.get(x, y);
        let at = |k: isize| -> Option<Point3<T>> {
            let nx = x as isize + dx * k;
            let ny = y as isize + dy * k;
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                return None;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            same(grid, nx, ny, l).then(|| *grid.positions.get(nx, ny))
        };
        let here = *grid.positions.get(x, y);
        match (at(-1), at(1)) {
            (Some(a), Some(b)) => Some((b - a) * T::of(0.5)),
            (None, Some(b)) => Some(b - here),
            (Some(a), None) => Some(here - a),
            (None, None) => None,
        }
    };
    for y in 0..h {
        for x in 0..w {
            if !*grid.valid.get(x, y) {
                continue;
            }
            let (Some(du), Some(dv)) = (delta(&grid, x, y, 1, 0), delta(&grid, x, y, 0, 1)) else {
                continue;
            };
            let Some(mut n) = du.cross(dv).try_normalize() else {
                continue;
            };
            let view = *grid.positions.get(x, y) - camera.origin();
            if n.dot(view) > T::zero() {
                n = -n;
            }
            grid.normals.set(x, y, n);
            grid.normal_valid.set(x, y, true);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_ground_has_up_normals() {
        let cam = TiltShiftCamera::<f64>::new(64, 64, 64.0, 10.0, 1.0).unwrap();
        let bg = PixelHeightMap::ground(64, 64);
        let grid = reconstruct_scene(&cam, &PixelHeightMap::empty(64, 64), &bg).unwrap();
        let grid = estimate_normals(grid, &cam);
        for y in 11..64 {
            for x in 0..64 {
                assert!(*grid.valid.get(x, y));
                assert_eq!(grid.positions.get(x, y).y, 0.0);
                let n = *grid.normals.get(x, y);
                assert!((n - Vec3::new(0.0, 1.0, 0.0)).length() < 1e-9, "{n:?}");
            }
        }
        // rows at or above the horizon are invalid
        for x in 0..64 {
            assert!(!*grid.valid.get(x, 5));
            assert!(!*grid.valid.get(x, 10));
        }
    }

    #[test]
    fn fronto_parallel_wall_faces_camera() {
        // Wall at constant depth z = 4 standing on the ground: h grows by one per row upward.
        let (w, h) = (64, 64);
        let cam = TiltShiftCamera::<f64>::new(w, h, 64.0, 10.0, 1.0).unwrap();
        let base_row = 10.0 + 64.0 / 4.0; // foot row of the wall
        let bg = PixelHeightMap::from_fn(w, h, |_, y| (base_row - y as f64).max(0.0)).unwrap();
        let grid = estimate_normals(
            reconstruct_scene(&cam, &PixelHeightMap::empty(w, h), &bg).unwrap(),
            &cam,
        );
        let n = *grid.normals.get(30, 20);
        assert!((n - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-9, "{n:?}");
        assert!((grid.depth.get(30, 20) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn isolated_pixel_gets_no_normal() {
        let cam = TiltShiftCamera::<f64>::new(8, 8, 8.0, 0.0, 1.0).unwrap();
        let mut vals = Grid::filled(8, 8, 0.0);
        let mut mask = Grid::filled(8, 8, 0.0);
        vals.set(4, 4, 1.0);
        mask.set(4, 4, 1.0);
        let bg = PixelHeightMap::new(vals, mask).unwrap();
        let grid = estimate_normals(
            reconstruct_scene(&cam, &PixelHeightMap::empty(8, 8), &bg).unwrap(),
            &cam,
        );
        assert!(*grid.valid.get(4, 4));
        assert!(!*grid.normal_valid.get(4, 4));
    }

    #[test]
    fn foreground_overrides_background() {
        let cam = TiltShiftCamera::<f64>::new(16, 16, 16.0, 2.0, 1.0).unwrap();
        let bg = PixelHeightMap::ground(16, 16);
        let mut vals = Grid::filled(16, 16, 0.0);
        let mut mask = Grid::filled(16, 16, 0.0);
        vals.set(5, 8, 3.0);
        mask.set(5, 8, 1.0);
        let fg = PixelHeightMap::new(vals, mask).unwrap();
        let grid = reconstruct_scene(&cam, &fg, &bg).unwrap();
        assert_eq!(*grid.layer.get(5, 8), Layer::Foreground);
        assert!(grid.positions.get(5, 8).y > 0.0);
        assert_eq!(*grid.layer.get(6, 8), Layer::Background);
    }
}
