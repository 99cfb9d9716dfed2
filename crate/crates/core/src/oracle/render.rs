//! Ground-truth maps rendered from meshes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PixelHeightMap, PixelPoint, TiltShiftCamera};
use crate::grid::Grid;
use crate::num::Real;
use crate::oracle::mesh::TriMesh;
use crate::oracle::tracer::{MeshHit, MeshLayer, MeshTracer, MESH_EPSILON, SHADOW_OFFSET};
use crate::tracer::DiskLight;
use crate::vec3::{Point3, Vec3};

fn view_hit<T: Real>(tracer: &MeshTracer<T>, camera: &TiltShiftCamera<T>, x: usize, y: usize) -> Option<MeshHit<T>> {
    let d = camera.direction(T::of_usize(x), T::of_usize(y)).normalize();
    tracer.first_hit(camera.origin(), d, T::infinity())
}

/// Pixel-height map of the surface of `mesh` seen through each pixel centre.
/// Pixels that see nothing are uncovered.
pub fn ph_from_mesh<T: Real>(mesh: &TriMesh<T>, camera: &TiltShiftCamera<T>) -> PixelHeightMap<T> {
    let tracer = MeshTracer::new(mesh, &TriMesh::empty());
    let (w, h) = camera.dims();
    let cells: Vec<(T, T)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            match view_hit(&tracer, camera, x, y) {
                Some(hit) => {
                    // hits within intersection tolerance of the ground are on it
                    if hit.point.y.abs() <= T::of(MESH_EPSILON) * tracer.extent() {
                        return (T::zero(), T::one());
                    }
                    let foot = Vec3::new(hit.point.x, T::zero(), hit.point.z);
                    match (camera.project_point(foot), camera.project_point(hit.point)) {
                        (Ok((_, v_foot)), Ok((_, v))) => ((v_foot - v).max(T::zero()), T::one()),
                        _ => (T::zero(), T::zero()),
                    }
                }
                None => (T::zero(), T::zero()),
            }
        })
        .collect();
    let values = Grid::from_vec(w, h, cells.iter().map(|c| c.0).collect()).expect("dims");
    let mask = Grid::from_vec(w, h, cells.iter().map(|c| c.1).collect()).expect("dims");
    PixelHeightMap::new(values, mask).expect("heights are clamped non-negative")
}

/// Visible background point of every receiver pixel (background seen first),
/// pushed off its surface towards the camera.
fn receivers<T: Real>(tracer: &MeshTracer<T>, camera: &TiltShiftCamera<T>) -> Vec<Option<Point3<T>>> {
    let (w, h) = camera.dims();
    let offset = T::of(SHADOW_OFFSET) * tracer.extent();
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            view_hit(tracer, camera, i % w, i / w)
                .filter(|hit| hit.layer == MeshLayer::Background)
                .map(|hit| hit.point + hit.normal * offset)
        })
        .collect()
}

/// Binary shadow mask (1 = shadowed) of the background receivers for a point light.
pub fn mesh_hard_shadow<T: Real>(
    fg: &TriMesh<T>,
    bg: &TriMesh<T>,
    light: Point3<T>,
    camera: &TiltShiftCamera<T>,
) -> Grid<T> {
    let tracer = MeshTracer::new(fg, bg);
    let (w, h) = camera.dims();
    let recv = receivers(&tracer, camera);
    let cells = recv
        .par_iter()
        .map(|p| match p {
            Some(p) if tracer.occluded(*p, light) => T::one(),
            _ => T::zero(),
        })
        .collect();
    Grid::from_vec(w, h, cells).expect("dims")
}

/// Disk sample `index` of `spp`: polar-stratified on a `k × k` grid
/// (`k = ⌊√spp⌋`) with uniform leftovers, area-uniform on the unit disk.
fn polar_sample(spp: u32, index: u32, rng: &mut impl Rng) -> (f64, f64) {
    let k = (spp as f64).sqrt().floor() as u32;
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    let (xi0, xi1) = if index < k * k {
        (((index / k) as f64 + a) / k as f64, ((index % k) as f64 + b) / k as f64)
    } else {
        (a, b)
    };
    let r = xi0.sqrt();
    let th = 2.0 * std::f64::consts::PI * xi1;
    (r * th.cos(), r * th.sin())
}

/// World position of the disk point at unit-disk offset `(a, b)`. The disk
/// spans the image right axis and world up in pixel-height space.
fn disk_point<T: Real>(light: &DiskLight<T>, camera: &TiltShiftCamera<T>, a: f64, b: f64) -> Result<Point3<T>> {
    let r = light.radius.to_f64_lossy();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = light.center;
    let p = PixelPoint::new(
        c.u + T::of(r * a),
        c.v - T::of(r * b * s),
        (c.h + T::of(r * b * s)).max(T::zero()),
    );
    camera.reconstruct(p)
}

/// Fraction of the disk light visible from each background receiver, by
/// Monte-Carlo over `spp` disk points. Non-receivers are 1.
pub fn mesh_soft_shadow<T: Real>(
    fg: &TriMesh<T>,
    bg: &TriMesh<T>,
    light: &DiskLight<T>,
    camera: &TiltShiftCamera<T>,
    spp: u32,
    seed: u64,
) -> Result<Grid<T>> {
    if spp == 0 {
        return Err(Error::invalid("spp must be >= 1"));
    }
    light.validate()?;
    let tracer = MeshTracer::new(fg, bg);
    let (w, h) = camera.dims();
    let center = disk_point(light, camera, 0.0, 0.0)?;
    // bound of the disk in world space, for culling
    let mut radius = T::zero();
    for i in 0..256 {
        let a = 2.0 * std::f64::consts::PI * i as f64 / 256.0;
        let p = disk_point(light, camera, a.cos(), a.sin())?;
        radius = radius.max((p - center).length());
    }
    let radius = radius * T::of(1.02) + T::of(1e-9) * tracer.extent();
    let recv = receivers(&tracer, camera);
    let cells = recv
        .par_iter()
        .enumerate()
        .map(|(pixel, p)| -> Result<T> {
            let Some(p) = *p else { return Ok(T::one()) };
            let cand = tracer.candidates(p, center, radius);
            if cand.is_empty() {
                return Ok(T::one());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pixel as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut visible = 0u32;
            for i in 0..spp {
                let (a, b) = polar_sample(spp, i, &mut rng);
                let target = disk_point(light, camera, a, b)?;
                if !tracer.occluded_among(p, target, &cand) {
                    visible += 1;
                }
            }
            Ok(T::of(visible as f64 / spp as f64))
        })
        .collect::<Result<Vec<T>>>()?;
    Grid::from_vec(w, h, cells)
}

/// Closest mesh hit of a world-space ray, with its pixel.
pub fn mesh_first_hit<T: Real>(
    fg: &TriMesh<T>,
    bg: &TriMesh<T>,
    camera: &TiltShiftCamera<T>,
    origin: Point3<T>,
    direction: Vec3<T>,
) -> Option<(MeshHit<T>, (T, T))> {
    let tracer = MeshTracer::new(fg, bg);
    let d = direction.try_normalize()?;
    let offset = T::of(SHADOW_OFFSET) * tracer.extent();
    let hit = tracer.first_hit(origin + d * offset, d, T::infinity())?;
    let px = camera.project_point(hit.point).ok()?;
    Some((hit, px))
}
