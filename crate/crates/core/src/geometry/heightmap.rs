use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::num::Real;

/// Per-pixel height (in pixels) plus coverage in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelHeightMap<T> {
    values: Grid<T>,
    mask: Grid<T>,
}

impl<T: Real> PixelHeightMap<T> {
    pub fn new(values: Grid<T>, mask: Grid<T>) -> Result<Self> {
        mask.ensure_dims(values.dims())?;
        for (i, (&h, &m)) in values.as_slice().iter().zip(mask.as_slice()).enumerate() {
            if !(T::zero()..=T::one()).contains(&m) {
                return Err(Error::invalid(format!(
                    "mask value {m} at index {i} outside [0, 1]"
                )));
            }
            if m > T::zero() && !(h >= T::zero() && h.is_finite()) {
                return Err(Error::invalid(format!(
                    "pixel height {h} at index {i} must be finite and non-negative where covered"
                )));
            }
        }
        Ok(Self { values, mask })
    }

    /// Fully covered map with every height at zero (a bare ground plane).
    pub fn ground(width: usize, height: usize) -> Self {
        Self {
            values: Grid::filled(width, height, T::zero()),
            mask: Grid::filled(width, height, T::one()),
        }
    }

    /// Map with no coverage at all.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            values: Grid::filled(width, height, T::zero()),
            mask: Grid::filled(width, height, T::zero()),
        }
    }

    /// Builds a fully covered map from a height function.
    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        Self::new(
            Grid::from_fn(width, height, f),
            Grid::filled(width, height, T::one()),
        )
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.values.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.values.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize) -> T {
        *self.values.get(x, y)
    }

    #[inline]
    pub fn coverage(&self, x: usize, y: usize) -> T {
        *self.mask.get(x, y)
    }

    #[inline]
    pub fn is_covered(&self, x: usize, y: usize) -> bool {
        *self.mask.get(x, y) > T::zero()
    }

    pub fn values(&self) -> &Grid<T> {
        &self.values
    }

    pub fn mask(&self) -> &Grid<T> {
        &self.mask
    }

    pub fn into_parts(self) -> (Grid<T>, Grid<T>) {
        (self.values, self.mask)
    }

    /// Bilinear height at continuous pixel coordinates (pixel centres are integers).
    /// Coordinates are clamped to the image.
    pub fn sample_bilinear(&self, u: T, v: T) -> T {
        let (w, h) = self.dims();
        let u = u.max(T::zero()).min(T::of_usize(w - 1));
        let v = v.max(T::zero()).min(T::of_usize(h - 1));
        let x0 = u.floor().to_usize().unwrap_or(0).min(w - 1);
        let y0 = v.floor().to_usize().unwrap_or(0).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = u - T::of_usize(x0);
        let fy = v - T::of_usize(y0);
        let top = self.value(x0, y0) * (T::one() - fx) + self.value(x1, y0) * fx;
        let bottom = self.value(x0, y1) * (T::one() - fx) + self.value(x1, y1) * fx;
        top * (T::one() - fy) + bottom * fy
    }

    /// Same map with a constant added to every covered height.
    pub fn offset_heights(&self, delta: T) -> Result<Self> {
        let values = Grid::from_fn(self.width(), self.height(), |x, y| {
            if self.is_covered(x, y) {
                self.value(x, y) + delta
            } else {
                self.value(x, y)
            }
        });
        Self::new(values, self.mask.clone())
    }

    pub fn cast<U: Real>(&self) -> PixelHeightMap<U> {
        PixelHeightMap {
            values: self.values.map(|v| U::of(v.to_f64_lossy())),
            mask: self.mask.map(|v| U::of(v.to_f64_lossy())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_covered_height() {
        let values = Grid::from_vec(2, 1, vec![1.0, -0.5]).unwrap();
        let mask = Grid::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(PixelHeightMap::new(values.clone(), mask).is_err());
        // Uncovered pixels are not constrained.
        let mask = Grid::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        assert!(PixelHeightMap::new(values, mask).is_ok());
    }

    #[test]
    fn rejects_mismatched_dims() {
        let values = Grid::filled(3, 2, 0.0f64);
        let mask = Grid::filled(2, 3, 1.0f64);
        assert!(matches!(
            PixelHeightMap::new(values, mask),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let map = PixelHeightMap::from_fn(8, 8, |x, y| 2.0 * x as f64 + 0.5 * y as f64).unwrap();
        let h = map.sample_bilinear(3.25, 4.75);
        assert!((h - (6.5 + 2.375)).abs() < 1e-12);
    }
}
