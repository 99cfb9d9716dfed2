//! Brute-force-correct mesh ray tracer: watertight ray/triangle tests over a
//! bounding-volume hierarchy.

use crate::num::Real;
use crate::oracle::mesh::TriMesh;
use crate::vec3::{Point3, Vec3};

/// Hits closer than this fraction of the scene extent are ignored.
pub const MESH_EPSILON: f64 = 1e-7;
/// Shadow-ray origins are pushed off the surface by this fraction of the scene extent.
pub const SHADOW_OFFSET: f64 = 1e-4;

const LEAF_SIZE: usize = 4;

/// Which input mesh a triangle came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshLayer {
    Foreground,
    Background,
}

#[derive(Debug, Clone, Copy)]
struct Tri<T> {
    p: [Point3<T>; 3],
    layer: MeshLayer,
    part: u32,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Aabb<T> {
    pub lo: Point3<T>,
    pub hi: Point3<T>,
}

impl<T: Real> Aabb<T> {
    fn empty() -> Self {
        let inf = T::infinity();
        Self {
            lo: Vec3::splat(inf),
            hi: Vec3::splat(-inf),
        }
    }

    fn grow(&mut self, p: Point3<T>) {
        self.lo = self.lo.min(p);
        self.hi = self.hi.max(p);
    }

    /// Whether the segment `o + t·d`, `t ∈ [0, t_max]`, meets the box grown by `pad`.
    #[inline]
    fn hit(&self, o: Point3<T>, inv: Vec3<T>, t_max: T, pad: T) -> bool {
        let mut t0 = T::zero();
        let mut t1 = t_max;
        for k in 0..3 {
            if inv[k].is_infinite() {
                // parallel to this slab
                if o[k] < self.lo[k] - pad || o[k] > self.hi[k] + pad {
                    return false;
                }
                continue;
            }
            let a = (self.lo[k] - pad - o[k]) * inv[k];
            let b = (self.hi[k] + pad - o[k]) * inv[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy)]
struct Node<T> {
    bounds: Aabb<T>,
    /// Leaf: first triangle; inner: index of the second child (the first follows this node).
    index: u32,
    /// Triangle count for leaves, 0 for inner nodes.
    count: u32,
}

/// Ray prepared for the watertight test: permuted axes and shear constants.
#[derive(Debug, Clone, Copy)]
struct ShearedRay<T> {
    org: Point3<T>,
    k: [usize; 3],
    s: [T; 3],
}

impl<T: Real> ShearedRay<T> {
    fn new(org: Point3<T>, dir: Vec3<T>) -> Self {
        let a = dir.abs();
        let kz = if a.x >= a.y && a.x >= a.z {
            0
        } else if a.y >= a.z {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < T::zero() {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            org,
            k: [kx, ky, kz],
            s: [dir[kx] / dir[kz], dir[ky] / dir[kz], T::one() / dir[kz]],
        }
    }

    /// Ray parameter of the hit with triangle `p`, if it lies in `(t_min, t_max)`.
    #[inline]
    fn intersect(&self, p: &[Point3<T>; 3], t_min: T, t_max: T) -> Option<T> {
        let [kx, ky, kz] = self.k;
        let [sx, sy, sz] = self.s;
        let a = p[0] - self.org;
        let b = p[1] - self.org;
        let c = p[2] - self.org;
        let ax = a[kx] - sx * a[kz];
        let ay = a[ky] - sy * a[kz];
        let bx = b[kx] - sx * b[kz];
        let by = b[ky] - sy * b[kz];
        let cx = c[kx] - sx * c[kz];
        let cy = c[ky] - sy * c[kz];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        let zero = T::zero();
        if (u < zero || v < zero || w < zero) && (u > zero || v > zero || w > zero) {
            return None;
        }
        let det = u + v + w;
        if det == zero {
            return None;
        }
        let t_scaled = u * (sz * a[kz]) + v * (sz * b[kz]) + w * (sz * c[kz]);
        let t = t_scaled / det;
        (t > t_min && t < t_max).then_some(t)
    }
}

/// Closest intersection found by [`MeshTracer::first_hit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHit<T> {
    pub t: T,
    pub point: Point3<T>,
    /// Unit geometric normal facing the incoming ray.
    pub normal: Vec3<T>,
    pub layer: MeshLayer,
    pub part: u32,
}

/// Ray tracer over a foreground and a background mesh.
#[derive(Debug, Clone)]
pub struct MeshTracer<T> {
    tris: Vec<Tri<T>>,
    nodes: Vec<Node<T>>,
    extent: T,
}

impl<T: Real> MeshTracer<T> {
    pub fn new(fg: &TriMesh<T>, bg: &TriMesh<T>) -> Self {
        let mut tris = Vec::with_capacity(fg.len() + bg.len());
        let mut part_base = 0u32;
        for (mesh, layer) in [(fg, MeshLayer::Foreground), (bg, MeshLayer::Background)] {
            for (pi, range) in mesh.parts().iter().enumerate() {
                for i in range.clone() {
                    tris.push(Tri {
                        p: mesh.triangle(i),
                        layer,
                        part: part_base + pi as u32,
                    });
                }
            }
            part_base += mesh.parts().len() as u32;
        }
        let mut all = Aabb::empty();
        for t in &tris {
            for p in t.p {
                all.grow(p);
            }
        }
        let extent = if tris.is_empty() {
            T::one()
        } else {
            (all.hi - all.lo).length().max(T::of(1e-9))
        };
        let mut tracer = Self {
            tris,
            nodes: Vec::new(),
            extent,
        };
        if !tracer.tris.is_empty() {
            let n = tracer.tris.len();
            tracer.build(0, n);
        }
        tracer
    }

    /// Diagonal of the scene bounding box.
    pub fn extent(&self) -> T {
        self.extent
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cb = Aabb::empty();
        for t in &self.tris[start..end] {
            for p in t.p {
                bounds.grow(p);
            }
            cb.grow(centroid(t));
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            index: start as u32,
            count: (end - start) as u32,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let ext = cb.hi - cb.lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.tris[start..end].select_nth_unstable_by(mid - start, |a, b| {
            centroid(a)[axis]
                .partial_cmp(&centroid(b)[axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id].index = right as u32;
        self.nodes[id].count = 0;
        id
    }

    /// Closest hit along `o + t·d` (unit `d`), `t < t_max`.
    pub fn first_hit(&self, o: Point3<T>, d: Vec3<T>, t_max: T) -> Option<MeshHit<T>> {
        let ray = ShearedRay::new(o, d);
        let t_min = T::of(MESH_EPSILON) * self.extent;
        let mut best: Option<(T, usize)> = None;
        self.visit(o, d, t_max, T::zero(), |tris, base, t_cur| {
            let mut t_cur = t_cur;
            for (i, tri) in tris.iter().enumerate() {
                if let Some(t) = ray.intersect(&tri.p, t_min, t_cur) {
                    t_cur = t;
                    best = Some((t, base + i));
                }
            }
            (t_cur, false)
        });
        let (t, i) = best?;
        let tri = &self.tris[i];
        let mut n = (tri.p[1] - tri.p[0]).cross(tri.p[2] - tri.p[0]).normalize();
        if n.dot(d) > T::zero() {
            n = -n;
        }
        Some(MeshHit {
            t,
            point: o + d * t,
            normal: n,
            layer: tri.layer,
            part: tri.part,
        })
    }

    /// Whether anything blocks the segment from `a` to `b`.
    pub fn occluded(&self, a: Point3<T>, b: Point3<T>) -> bool {
        let delta = b - a;
        let len = delta.length();
        if !(len > T::zero()) {
            return false;
        }
        let d = delta / len;
        let ray = ShearedRay::new(a, d);
        let t_min = T::of(MESH_EPSILON) * self.extent;
        let mut hit = false;
        self.visit(a, d, len, T::zero(), |tris, _, t_cur| {
            if tris.iter().any(|t| ray.intersect(&t.p, t_min, t_cur).is_some()) {
                hit = true;
                return (t_cur, true);
            }
            (t_cur, false)
        });
        hit
    }

    /// Triangle indices whose leaf boxes, grown by `pad`, meet the segment `a → b`.
    /// Every segment from `a` to a point within `pad` of `b` can only hit these.
    pub fn candidates(&self, a: Point3<T>, b: Point3<T>, pad: T) -> Vec<u32> {
        let delta = b - a;
        let len = delta.length();
        let mut out = Vec::new();
        if !(len > T::zero()) {
            return out;
        }
        self.visit(a, delta / len, len, pad, |tris, base, t| {
            out.extend((base..base + tris.len()).map(|i| i as u32));
            (t, false)
        });
        out
    }

    /// Any-hit test of segment `a → b` restricted to `candidates`.
    pub fn occluded_among(&self, a: Point3<T>, b: Point3<T>, candidates: &[u32]) -> bool {
        let delta = b - a;
        let len = delta.length();
        if !(len > T::zero()) {
            return false;
        }
        let ray = ShearedRay::new(a, delta / len);
        let t_min = T::of(MESH_EPSILON) * self.extent;
        candidates
            .iter()
            .any(|&i| ray.intersect(&self.tris[i as usize].p, t_min, len).is_some())
    }

    /// Visits leaves whose (padded) boxes meet the segment `o + t·d`, `t ≤ t_max`.
    /// The callback returns the (possibly shortened) `t_max` and whether to stop.
    fn visit(&self, o: Point3<T>, d: Vec3<T>, t_max: T, pad: T, mut leaf: impl FnMut(&[Tri<T>], usize, T) -> (T, bool)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(T::one() / d.x, T::one() / d.y, T::one() / d.z);
        let mut t_max = t_max;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds.hit(o, inv, t_max, pad) {
                continue;
            }
            if node.count > 0 {
                let s = node.index as usize;
                let (t, stop) = leaf(&self.tris[s..s + node.count as usize], s, t_max);
                t_max = t;
                if stop {
                    return;
                }
            } else {
                stack.push(node.index as usize);
                stack.push(id + 1);
            }
        }
    }
}

fn centroid<T: Real>(t: &Tri<T>) -> Point3<T> {
    (t.p[0] + t.p[1] + t.p[2]) / T::of(3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> TriMesh<f64> {
        let mut m = TriMesh::empty();
        m.add_box(Vec3::new(-0.5, 0.0, 4.5), Vec3::new(0.5, 1.0, 5.5), 0.0);
        m
    }

    #[test]
    fn hits_the_near_face() {
        let tr = MeshTracer::new(&unit_box(), &TriMesh::empty());
        let h = tr
            .first_hit(Vec3::new(0.0, 0.5, 0.0), Vec3::new(0.0, 0.0, 1.0), 100.0)
            .unwrap();
        assert!((h.t - 4.5).abs() < 1e-12);
        assert_eq!(h.normal, Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(h.layer, MeshLayer::Foreground);
    }

    #[test]
    fn shared_edges_are_watertight() {
        // rays through the diagonal shared by the two triangles of a face
        let tr = MeshTracer::new(&unit_box(), &TriMesh::empty());
        for i in 0..=100 {
            let s = -0.5 + i as f64 / 100.0;
            let o = Vec3::new(s, s + 0.5, 0.0);
            let d = Vec3::new(0.0, 0.0, 1.0);
            assert!(tr.first_hit(o, d, 100.0).is_some(), "leak at {s}");
        }
    }

    #[test]
    fn occlusion_respects_segment_end() {
        let tr = MeshTracer::new(&unit_box(), &TriMesh::empty());
        let a = Vec3::new(0.0, 0.5, 0.0);
        assert!(!tr.occluded(a, Vec3::new(0.0, 0.5, 4.0)));
        assert!(tr.occluded(a, Vec3::new(0.0, 0.5, 8.0)));
        let c = tr.candidates(a, Vec3::new(0.0, 0.5, 8.0), 0.0);
        assert!(tr.occluded_among(a, Vec3::new(0.0, 0.5, 8.0), &c));
        assert!(tr.candidates(a, Vec3::new(3.0, 0.5, 0.0), 0.1).is_empty());
    }
}
