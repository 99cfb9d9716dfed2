//! Height-field sampling and digital line traversal in pixel-height space.

use crate::geometry::{Layer, PixelHeightMap, PixelPoint};
use crate::num::Real;

/// Height bias at the ray origin, in pixel-height units.
pub const ORIGIN_BIAS: f64 = 0.5;
/// Number of traversal steps over which the origin bias ramps to zero.
pub const BIAS_RAMP_STEPS: f64 = 2.0;
/// Residual tolerance once the ramp is over; absorbs rounding on planar receivers.
pub const RESIDUAL_BIAS: f64 = 1e-3;
/// Maximum height jump between consecutive steps for the surface to count as connected.
pub const CONNECTIVITY_THRESHOLD: f64 = 3.0;

/// Work done by one traversal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub pixels_visited: usize,
}

/// Scene height at a continuous image location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightSample<T> {
    pub height: T,
    pub layer: Layer,
}

/// Composited height field that traversals test against.
///
/// Sampling is bilinear within a layer. The layer itself is chosen by the
/// bilinearly interpolated foreground coverage (foreground when it reaches
/// one half), so silhouettes are not smeared into ramps between the cutout
/// and whatever lies behind it.
#[derive(Debug, Clone)]
pub struct HeightField<T> {
    width: usize,
    height: usize,
    fg_covered: Vec<bool>,
    fg_height: Vec<T>,
    bg_height: Vec<T>,
    bg_covered: Vec<bool>,
    tiles: Vec<TileMax<T>>,
    skip_empty: bool,
}

/// Sides of the square tiles whose maximum height bounds every sample taken
/// inside them, coarse to fine.
const TILE_SIZES: [usize; 2] = [32, 8];

/// Per-tile upper bound on sampled heights. A sample whose floor pixel lies
/// in a tile reads pixels up to one past the tile, so each bound covers the
/// tile dilated by one pixel on its far sides.
#[derive(Debug, Clone)]
struct TileMax<T> {
    size: usize,
    cols: usize,
    max: Vec<T>,
}

impl<T: Real> TileMax<T> {
    fn new(size: usize, width: usize, height: usize, fg: &[T], bg: &[T]) -> Self {
        let cols = width.div_ceil(size);
        let rows = height.div_ceil(size);
        let mut max = vec![T::zero(); cols * rows];
        for ty in 0..rows {
            for tx in 0..cols {
                let mut m = T::zero();
                for y in ty * size..=((ty + 1) * size).min(height - 1) {
                    for x in tx * size..=((tx + 1) * size).min(width - 1) {
                        let i = y * width + x;
                        m = m.max(fg[i]).max(bg[i]);
                    }
                }
                max[ty * cols + tx] = m;
            }
        }
        Self { size, cols, max }
    }

    /// All levels of [`TILE_SIZES`].
    fn pyramid(width: usize, height: usize, fg: &[T], bg: &[T]) -> Vec<Self> {
        TILE_SIZES.iter().map(|&s| Self::new(s, width, height, fg, bg)).collect()
    }

    fn tile_of(&self, step: &Step<T>) -> (usize, usize) {
        (
            step.u.floor().to_usize().unwrap_or(0) / self.size,
            step.v.floor().to_usize().unwrap_or(0) / self.size,
        )
    }

    /// Last step index `e >= first.k` such that no step in `first.k..=e` can
    /// block: all of them sample inside the same tile while the ray stays at
    /// or above the tile's bound. Positions and ray heights are monotone in
    /// the step index, so checking both ends covers the whole run.
    fn last_clear_step(&self, first: &Step<T>, k_last: usize, su: T, sv: T, step_at: &impl Fn(usize) -> Step<T>) -> usize {
        let (tx, ty) = self.tile_of(first);
        let bound = self.max[ty * self.cols + tx];
        if !(first.ray_h >= bound) {
            return first.k;
        }
        let room = |p: T, sp: T, t: usize| -> T {
            if sp > T::zero() {
                (T::of_usize((t + 1) * self.size) - p) / sp
            } else if sp < T::zero() {
                (p - T::of_usize(t * self.size)) / -sp
            } else {
                T::infinity()
            }
        };
        let n = room(first.u, su, tx).min(room(first.v, sv, ty)).floor();
        let n = n.to_usize().unwrap_or(usize::MAX).min(k_last - first.k);
        let mut e = first.k + n;
        for _ in 0..3 {
            if e <= first.k {
                break;
            }
            let s = step_at(e);
            if self.tile_of(&s) == (tx, ty) && s.ray_h >= bound {
                return e;
            }
            e = first.k + (e - first.k) / 2;
        }
        first.k
    }
}

impl<T: Real> HeightField<T> {
    pub fn new(fg: &PixelHeightMap<T>, bg: &PixelHeightMap<T>) -> Self {
        let (width, height) = bg.dims();
        debug_assert_eq!(fg.dims(), bg.dims());
        let n = width * height;
        let mut fg_covered = Vec::with_capacity(n);
        let mut fg_height = Vec::with_capacity(n);
        let mut bg_height = Vec::with_capacity(n);
        let mut bg_covered = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let f = fg.is_covered(x, y);
                fg_covered.push(f);
                fg_height.push(if f { fg.value(x, y) } else { T::zero() });
                let b = bg.is_covered(x, y);
                bg_covered.push(b);
                bg_height.push(if b { bg.value(x, y) } else { T::zero() });
            }
        }
        let tiles = TileMax::pyramid(width, height, &fg_height, &bg_height);
        Self {
            width,
            height,
            fg_covered,
            fg_height,
            bg_height,
            bg_covered,
            tiles,
            skip_empty: true,
        }
    }

    /// The same field with the foreground removed.
    pub fn background_only(&self) -> Self {
        let fg_height = vec![T::zero(); self.fg_height.len()];
        Self {
            fg_covered: vec![false; self.fg_covered.len()],
            tiles: TileMax::pyramid(self.width, self.height, &fg_height, &self.bg_height),
            fg_height,
            ..self.clone()
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Height and layer at integer pixel `(x, y)`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> HeightSample<T> {
        let i = y * self.width + x;
        if self.fg_covered[i] {
            HeightSample {
                height: self.fg_height[i],
                layer: Layer::Foreground,
            }
        } else if self.bg_covered[i] {
            HeightSample {
                height: self.bg_height[i],
                layer: Layer::Background,
            }
        } else {
            HeightSample {
                height: T::zero(),
                layer: Layer::Empty,
            }
        }
    }

    /// Mask-aware bilinear sample at continuous coordinates (clamped to the image).
    #[inline]
    pub fn sample(&self, u: T, v: T) -> HeightSample<T> {
        let wmax = self.width - 1;
        let hmax = self.height - 1;
        let u = u.max(T::zero()).min(T::of_usize(wmax));
        let v = v.max(T::zero()).min(T::of_usize(hmax));
        let x0 = u.floor().to_usize().unwrap_or(0).min(wmax);
        let y0 = v.floor().to_usize().unwrap_or(0).min(hmax);
        let x1 = (x0 + 1).min(wmax);
        let y1 = (y0 + 1).min(hmax);
        let fx = u - T::of_usize(x0);
        let fy = v - T::of_usize(y0);
        let one = T::one();
        let idx = [
            y0 * self.width + x0,
            y0 * self.width + x1,
            y1 * self.width + x0,
            y1 * self.width + x1,
        ];
        let wts = [
            (one - fx) * (one - fy),
            fx * (one - fy),
            (one - fx) * fy,
            fx * fy,
        ];
        let mut cov = T::zero();
        let mut fg_sum = T::zero();
        let mut bg_sum = T::zero();
        let mut bg_w = T::zero();
        for k in 0..4 {
            let i = idx[k];
            if self.fg_covered[i] {
                cov = cov + wts[k];
                fg_sum = fg_sum + wts[k] * self.fg_height[i];
            }
            if self.bg_covered[i] {
                bg_w = bg_w + wts[k];
            }
            bg_sum = bg_sum + wts[k] * self.bg_height[i];
        }
        if cov >= T::of(0.5) {
            HeightSample {
                height: fg_sum / cov,
                layer: Layer::Foreground,
            }
        } else {
            HeightSample {
                height: bg_sum,
                layer: if bg_w > T::zero() {
                    Layer::Background
                } else {
                    Layer::Empty
                },
            }
        }
    }

    /// First step along the segment where the ray passes under the surface.
    ///
    /// A step is a candidate when the scene height exceeds the ray height by
    /// more than the (ramped) bias. It is accepted when the ray was also
    /// under the surface at the previous step, or when the surface is
    /// connected between the two steps. Returns the accepted step with its
    /// sample plus traversal statistics.
    pub fn first_block(
        &self,
        from: PixelPoint<T>,
        to: PixelPoint<T>,
    ) -> (Option<Block<T>>, TraversalStats) {
        struct Prev<T> {
            k: usize,
            s: T,
            u: T,
            v: T,
            ray_h: T,
            scene_h: T,
            gap: T,
        }
        let origin = self.sample(from.u, from.v);
        let mut prev = Prev {
            k: 0,
            s: T::zero(),
            u: from.u,
            v: from.v,
            ray_h: from.h,
            scene_h: origin.height,
            gap: origin.height - from.h,
        };
        let mut found = None;
        let tiles = if self.skip_empty { self.tiles.as_slice() } else { &[] };
        let stats = walk_with(self.width, self.height, from, to, tiles, |step| {
            let sample = self.sample(step.u, step.v);
            let gap = sample.height - step.ray_h;
            let contiguous = step.k == prev.k + 1;
            let accept = gap > bias_at::<T>(step.k)
                && (!contiguous
                    || prev.gap > T::of(RESIDUAL_BIAS)
                    || (sample.height - prev.scene_h).abs() <= T::of(CONNECTIVITY_THRESHOLD));
            if accept {
                if contiguous && prev.gap <= T::zero() {
                    // refine to where the ray actually crosses the surface
                    let f = -prev.gap / (gap - prev.gap);
                    let lerp = |a: T, b: T| a + (b - a) * f;
                    let crossing = Step {
                        k: step.k,
                        s: lerp(prev.s, step.s),
                        u: lerp(prev.u, step.u),
                        v: lerp(prev.v, step.v),
                        ray_h: lerp(prev.ray_h, step.ray_h),
                    };
                    let height = lerp(prev.scene_h, sample.height);
                    found = Some(Block {
                        crossing,
                        surface: HeightSample { height, ..sample },
                        step,
                        sample,
                    });
                } else {
                    found = Some(Block {
                        crossing: step,
                        surface: sample,
                        step,
                        sample,
                    });
                }
                return true;
            }
            prev = Prev {
                k: step.k,
                s: step.s,
                u: step.u,
                v: step.v,
                ray_h: step.ray_h,
                scene_h: sample.height,
                gap,
            };
            false
        });
        (found, stats)
    }
}

#[inline]
fn bias_at<T: Real>(k: usize) -> T {
    let ramp = T::of(ORIGIN_BIAS) * (T::one() - T::of_usize(k) / T::of(BIAS_RAMP_STEPS));
    ramp.max(T::of(RESIDUAL_BIAS))
}

/// Where a traversal was blocked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block<T> {
    /// Estimated point where the ray meets the surface.
    pub crossing: Step<T>,
    /// Surface height at the crossing.
    pub surface: HeightSample<T>,
    /// The traversal step at which the block was detected (never the origin).
    pub step: Step<T>,
    pub sample: HeightSample<T>,
}

/// One traversal step: step index from the origin, position and ray height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub k: usize,
    /// Fraction of the way from the segment start to its end.
    pub s: T,
    pub u: T,
    pub v: T,
    pub ray_h: T,
}

/// Walks the image projection of a pixel-space segment one pixel at a time
/// along its dominant axis, clipped to the image. The origin itself is not
/// visited. `visit` returns `true` to stop early.
///
/// The number of visited positions never exceeds `max(width, height)`.
pub fn walk<T: Real>(
    width: usize,
    height: usize,
    from: PixelPoint<T>,
    to: PixelPoint<T>,
    visit: impl FnMut(Step<T>) -> bool,
) -> TraversalStats {
    walk_with(width, height, from, to, &[], visit)
}

/// [`walk`] that may jump over runs of steps that a level of `tiles` proves cannot
/// block. The last step of each run is still visited, so a visitor that
/// carries state from one step to the next sees the same predecessor.
fn walk_with<T: Real>(
    width: usize,
    height: usize,
    from: PixelPoint<T>,
    to: PixelPoint<T>,
    tiles: &[TileMax<T>],
    mut visit: impl FnMut(Step<T>) -> bool,
) -> TraversalStats {
    let mut stats = TraversalStats::default();
    let du = to.u - from.u;
    let dv = to.v - from.v;
    let len = du.abs().max(dv.abs());
    if !(len > T::of(1e-9)) || !len.is_finite() {
        return stats;
    }
    let Some((s0, s1)) = clip_segment(
        from.u,
        from.v,
        du,
        dv,
        T::of_usize(width - 1),
        T::of_usize(height - 1),
    ) else {
        return stats;
    };
    let k_first = (s0 * len).ceil().max(T::one());
    let k_last = (s1 * len).floor();
    if k_last < k_first {
        return stats;
    }
    let k_first = k_first.to_usize().unwrap_or(usize::MAX);
    let k_last = k_last.to_usize().unwrap_or(0);
    let dh = to.h - from.h;
    let wmax = T::of_usize(width - 1);
    let hmax = T::of_usize(height - 1);
    let step_at = |k: usize| {
        let s = T::of_usize(k) / len;
        Step {
            k,
            s,
            u: (from.u + du * s).max(T::zero()).min(wmax),
            v: (from.v + dv * s).max(T::zero()).min(hmax),
            ray_h: from.h + dh * s,
        }
    };
    let (su, sv) = (du / len, dv / len);
    let mut k = k_first;
    while k <= k_last {
        let mut step = step_at(k);
        for t in tiles {
            let e = t.last_clear_step(&step, k_last, su, sv, &step_at);
            if e > k {
                step = step_at(e);
                k = e;
                break;
            }
        }
        stats.pixels_visited += 1;
        if visit(step) {
            break;
        }
        k += 1;
    }
    stats
}

/// Liang–Barsky clip of `p + s·d`, `s ∈ [0, 1]`, against `[0, umax] × [0, vmax]`.
fn clip_segment<T: Real>(u: T, v: T, du: T, dv: T, umax: T, vmax: T) -> Option<(T, T)> {
    let mut s0 = T::zero();
    let mut s1 = T::one();
    for (p, q) in [(-du, u), (du, umax - u), (-dv, v), (dv, vmax - v)] {
        if p == T::zero() {
            if q < T::zero() {
                return None;
            }
        } else {
            let r = q / p;
            if p < T::zero() {
                s0 = s0.max(r);
            } else {
                s1 = s1.min(r);
            }
        }
    }
    (s0 <= s1).then_some((s0, s1))
}
