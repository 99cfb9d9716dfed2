//! Indexed triangle meshes built from simple solids.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::vec3::{Point3, Vec3};

/// Triangles below this area are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Triangle mesh made of one or more parts (objects); parts let tracers cull
/// whole objects at once.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    vertices: Vec<Point3<T>>,
    triangles: Vec<[u32; 3]>,
    parts: Vec<Range<usize>>,
}

impl<T: Real> Default for TriMesh<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Real> TriMesh<T> {
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            parts: Vec::new(),
        }
    }

    /// Single-part mesh; indices must be in range and triangles non-degenerate.
    pub fn new(vertices: Vec<Point3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = triangles.len();
        let mesh = Self {
            vertices,
            triangles,
            parts: if n > 0 { std::iter::once(0..n).collect() } else { Vec::new() },
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&k| k as usize >= self.vertices.len()) {
                return Err(Error::invalid(format!("triangle {i} indexes a missing vertex")));
            }
            let [a, b, c] = self.triangle(i);
            let area = (b - a).cross(c - a).length() * T::of(0.5);
            if !(area > T::of(MIN_TRIANGLE_AREA)) {
                return Err(Error::invalid(format!("triangle {i} is degenerate (area {area})")));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn parts(&self) -> &[Range<usize>] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3<T>; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    /// Appends `other`'s parts after this mesh's.
    pub fn append(&mut self, other: &TriMesh<T>) {
        let base = self.vertices.len() as u32;
        let tri_base = self.triangles.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|k| k + base)));
        self.parts
            .extend(other.parts.iter().map(|r| r.start + tri_base..r.end + tri_base));
    }

    /// Adds one part from raw vertices and triangles (indices local to `vertices`).
    fn push_part(&mut self, vertices: Vec<Point3<T>>, triangles: Vec<[u32; 3]>) {
        let base = self.vertices.len() as u32;
        let start = self.triangles.len();
        self.vertices.extend(vertices);
        self.triangles
            .extend(triangles.into_iter().map(|t| t.map(|k| k + base)));
        self.parts.push(start..self.triangles.len());
    }

    pub fn bounds(&self) -> Option<(Point3<T>, Point3<T>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        )
    }

    /// Same surfaces with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(Point3<T>) -> Point3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Same surfaces with triangles (and parts) listed in reverse order.
    pub fn reversed(&self) -> Self {
        let n = self.triangles.len();
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().rev().copied().collect(),
            parts: self.parts.iter().rev().map(|r| n - r.end..n - r.start).collect(),
        }
    }

    /// Quad `a b c d` (in order around its boundary) as one part.
    pub fn add_quad(&mut self, a: Point3<T>, b: Point3<T>, c: Point3<T>, d: Point3<T>) {
        self.push_part(vec![a, b, c, d], vec![[0, 1, 2], [0, 2, 3]]);
    }

    /// Axis-aligned box between `lo` and `hi`, rotated by `yaw` (radians)
    /// about the vertical axis through its centre.
    pub fn add_box(&mut self, lo: Point3<T>, hi: Point3<T>, yaw: T) {
        let c = (lo + hi) * T::of(0.5);
        let (s, co) = yaw.sin_cos();
        let rot = |p: Point3<T>| {
            let d = p - c;
            Vec3::new(c.x + co * d.x + s * d.z, p.y, c.z - s * d.x + co * d.z)
        };
        let v: Vec<Point3<T>> = (0..8)
            .map(|i| {
                rot(Vec3::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                ))
            })
            .collect();
        let faces = [
            [0, 2, 6, 4],
            [1, 5, 7, 3],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 1, 3, 2],
            [4, 6, 7, 5],
        ];
        let tris = faces
            .iter()
            .flat_map(|f| [[f[0], f[1], f[2]], [f[0], f[2], f[3]]])
            .collect();
        self.push_part(v, tris);
    }

    /// Closed vertical cylinder standing at `base` (centre of the bottom cap).
    pub fn add_cylinder(&mut self, base: Point3<T>, radius: T, height: T, segments: usize) {
        let n = segments.max(3);
        let mut v = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            let a = T::of(2.0) * T::PI() * T::of_usize(i) / T::of_usize(n);
            let (s, c) = a.sin_cos();
            v.push(Vec3::new(base.x + radius * c, base.y, base.z + radius * s));
            v.push(Vec3::new(base.x + radius * c, base.y + height, base.z + radius * s));
        }
        let bottom = v.len() as u32;
        v.push(base);
        v.push(Vec3::new(base.x, base.y + height, base.z));
        let top = bottom + 1;
        let mut t = Vec::with_capacity(4 * n);
        for i in 0..n as u32 {
            let j = (i + 1) % n as u32;
            let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            t.push([b0, t0, t1]);
            t.push([b0, t1, b1]);
            t.push([bottom, b1, b0]);
            t.push([top, t0, t1]);
        }
        self.push_part(v, t);
    }

    /// UV sphere.
    pub fn add_sphere(&mut self, center: Point3<T>, radius: T, stacks: usize, slices: usize) {
        let (stacks, slices) = (stacks.max(2), slices.max(3));
        let mut v = vec![center + Vec3::new(T::zero(), radius, T::zero())];
        for i in 1..stacks {
            let phi = T::PI() * T::of_usize(i) / T::of_usize(stacks);
            let (sp, cp) = phi.sin_cos();
            for j in 0..slices {
                let th = T::of(2.0) * T::PI() * T::of_usize(j) / T::of_usize(slices);
                let (st, ct) = th.sin_cos();
                v.push(center + Vec3::new(sp * ct, cp, sp * st) * radius);
            }
        }
        let south = v.len() as u32;
        v.push(center - Vec3::new(T::zero(), radius, T::zero()));
        let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
        let mut t = Vec::new();
        for j in 0..slices {
            t.push([0, ring(1, j + 1), ring(1, j)]);
            t.push([south, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                t.push([ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)]);
                t.push([ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)]);
            }
        }
        self.push_part(v, t);
    }

    /// Vertical cylindrical wall: the arc of radius `radius` about the
    /// vertical axis through `axis`, from angle `a0` to `a1`, `height` tall.
    pub fn add_curved_wall(&mut self, axis: Point3<T>, radius: T, a0: T, a1: T, height: T, segments: usize) {
        let n = segments.max(1);
        let mut v = Vec::with_capacity(2 * n + 2);
        for i in 0..=n {
            let a = a0 + (a1 - a0) * T::of_usize(i) / T::of_usize(n);
            let (s, c) = a.sin_cos();
            v.push(Vec3::new(axis.x + radius * c, axis.y, axis.z + radius * s));
            v.push(Vec3::new(axis.x + radius * c, axis.y + height, axis.z + radius * s));
        }
        let mut t = Vec::with_capacity(2 * n);
        for i in 0..n as u32 {
            let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3);
            t.push([b0, b1, t1]);
            t.push([b0, t1, t0]);
        }
        self.push_part(v, t);
    }
}
