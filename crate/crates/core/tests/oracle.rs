//! Procedural scenes and the triangle-mesh tracer.

use pixheight::geometry::{PixelPoint, TiltShiftCamera};
use pixheight::oracle::{
    gen_scene, mesh_hard_shadow, mesh_soft_shadow, ph_from_mesh, BackgroundKind, CameraSpec, ForegroundKind,
    MeshLayer, MeshTracer, Pose, SceneSpec, TriMesh,
};
use pixheight::tracer::DiskLight;
use pixheight::vec3::Vec3;
use pixheight::Grid;

fn spec(background: BackgroundKind, foreground: ForegroundKind, size: usize) -> SceneSpec {
    SceneSpec {
        background,
        foreground,
        poses: vec![Pose {
            x: 0.1,
            z: 4.0,
            yaw: 0.6,
            elevation: 0.0,
        }],
        camera: CameraSpec::default_for(size, size),
        lights: vec![[-1.0, 3.0, 2.0]],
    }
}

fn ground() -> TriMesh<f64> {
    gen_scene(&spec(BackgroundKind::Plane, ForegroundKind::Box, 8), 0).unwrap().1
}

fn same_mesh(a: &TriMesh<f64>, b: &TriMesh<f64>) -> bool {
    a.vertices() == b.vertices() && a.triangles() == b.triangles() && a.parts() == b.parts()
}

#[test]
fn plane_background_is_one_quad() {
    let bg = ground();
    assert_eq!(bg.len(), 2);
    assert_eq!(bg.parts().len(), 1);
    assert!(bg.vertices().iter().all(|v| v.y == 0.0));
}

#[test]
fn three_steps_are_three_rising_boxes() {
    let (_, bg) = gen_scene(&spec(BackgroundKind::Steps(3), ForegroundKind::Box, 8), 0).unwrap();
    // ground quad, then one box per step
    assert_eq!(bg.parts().len(), 4);
    let mut last_top = 0.0;
    for part in &bg.parts()[1..] {
        assert_eq!(part.len(), 12);
        let ys: Vec<f64> = part.clone().flat_map(|t| bg.triangle(t).map(|p| p.y)).collect();
        let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
        assert_eq!(lo, 0.0);
        assert!(hi > last_top);
        last_top = hi;
        // axis-aligned: every vertex sits on one of two x, y and z planes
        for axis in [|p: Vec3<f64>| p.x, |p: Vec3<f64>| p.y, |p: Vec3<f64>| p.z] {
            let mut vals: Vec<f64> = part.clone().flat_map(|t| bg.triangle(t).map(axis)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            assert_eq!(vals.len(), 2);
        }
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    for background in BackgroundKind::ALL {
        for foreground in ForegroundKind::ALL {
            let s = spec(background, foreground, 32);
            let (fg1, bg1) = gen_scene(&s, 42).unwrap();
            let (fg2, bg2) = gen_scene(&s, 42).unwrap();
            assert!(same_mesh(&fg1, &fg2) && same_mesh(&bg1, &bg2), "{background} {foreground}");
            let (fg3, _) = gen_scene(&s, 43).unwrap();
            assert!(!same_mesh(&fg1, &fg3), "{background} {foreground}");
            fg1.validate().unwrap();
            bg1.validate().unwrap();
            let (lo, _) = fg1.bounds().unwrap();
            assert!(lo.y >= 0.0);
        }
    }
}

#[test]
fn unknown_kinds_and_bad_specs_are_rejected() {
    assert!("pyramid".parse::<BackgroundKind>().is_err());
    assert!("steps:0".parse::<BackgroundKind>().is_err());
    assert!("torus".parse::<ForegroundKind>().is_err());
    assert_eq!("steps:4".parse::<BackgroundKind>().unwrap(), BackgroundKind::Steps(4));
    let mut s = spec(BackgroundKind::Plane, ForegroundKind::Box, 8);
    s.poses[0].elevation = -0.1;
    assert!(gen_scene(&s, 0).is_err());
    let mut s = spec(BackgroundKind::Plane, ForegroundKind::Box, 8);
    s.lights[0][1] = -1.0;
    assert!(gen_scene(&s, 0).is_err());
}

#[test]
fn ground_quad_has_zero_height_everywhere() {
    let cam = TiltShiftCamera::<f64>::default_for(64, 64).unwrap();
    let map = ph_from_mesh(&ground(), &cam);
    let mut covered = 0;
    for y in 0..64 {
        for x in 0..64 {
            if map.is_covered(x, y) {
                assert_eq!(map.value(x, y), 0.0);
                covered += 1;
            }
        }
    }
    assert!(covered > 0);
}

/// Front face of a unit box seen from above its top: every pixel's height is
/// its distance to the box base row in the same column.
#[test]
fn unit_box_heights_reach_down_to_the_base_row() {
    let size = 128;
    let cam = TiltShiftCamera::<f64>::default_for(size, size).unwrap().with_cam_height(1.6).unwrap();
    let mut unit = TriMesh::empty();
    unit.add_box(Vec3::new(-0.5, 0.0, 3.0), Vec3::new(0.5, 1.0, 4.0), 0.0);
    let map = ph_from_mesh(&unit, &cam);
    let tracer = MeshTracer::new(&unit, &TriMesh::empty());
    let (mut front, mut top) = (0, 0);
    for y in 0..size {
        for x in 0..size {
            let d = cam.direction(x as f64, y as f64).normalize();
            let Some(hit) = tracer.first_hit(cam.origin(), d, f64::INFINITY) else {
                assert!(!map.is_covered(x, y));
                continue;
            };
            assert!(map.is_covered(x, y));
            let base = if (hit.point.z - 3.0).abs() < 1e-9 {
                front += 1;
                Vec3::new(hit.point.x, 0.0, 3.0)
            } else {
                assert!((hit.point.y - 1.0).abs() < 1e-9);
                top += 1;
                Vec3::new(hit.point.x, 0.0, hit.point.z)
            };
            let (_, v_base) = cam.project_point(base).unwrap();
            let h = v_base - y as f64;
            assert!((map.value(x, y) - h).abs() <= 1e-6 * h.max(1.0), "({x}, {y}): {} vs {h}", map.value(x, y));
        }
    }
    assert!(front > 100 && top > 100);
}

#[test]
fn no_foreground_casts_no_shadow() {
    let cam = TiltShiftCamera::<f64>::default_for(64, 64).unwrap();
    for background in BackgroundKind::ALL {
        let (_, bg) = gen_scene(&spec(background, ForegroundKind::Box, 64), 0).unwrap();
        let mask = mesh_hard_shadow(&TriMesh::empty(), &bg, Vec3::new(0.3, 2.0, 2.0), &cam);
        let lit = mask.as_slice().iter().filter(|&&v| v == 0.0).count();
        // only walls facing away from the light could shadow themselves; none do here
        assert_eq!(lit, 64 * 64, "{background}");
    }
}

/// A plate floating above the ground, lit from straight overhead, shadows
/// exactly the visible ground below it.
#[test]
fn overhead_light_shadows_the_footprint() {
    let size = 128;
    let cam = TiltShiftCamera::<f64>::default_for(size, size).unwrap();
    let bg = ground();
    let mut plate = TriMesh::empty();
    plate.add_box(Vec3::new(-0.5, 0.55, 3.5), Vec3::new(0.5, 0.6, 4.5), 0.0);
    let sun = Vec3::new(0.0, 1e7, 4.0);
    let mask = mesh_hard_shadow(&plate, &bg, sun, &cam);
    let tracer = MeshTracer::new(&plate, &bg);
    let mut footprint = 0;
    for y in 0..size {
        for x in 0..size {
            let d = cam.direction(x as f64, y as f64).normalize();
            let Some(hit) = tracer.first_hit(cam.origin(), d, f64::INFINITY) else { continue };
            if hit.layer != MeshLayer::Background {
                assert_eq!(*mask.get(x, y), 0.0);
                continue;
            }
            let p = hit.point;
            let inside = (-0.5..=0.5).contains(&p.x) && (3.5..=4.5).contains(&p.z);
            let near_edge = (p.x.abs() - 0.5).abs() < 1e-3 || (p.z - 3.5).abs() < 1e-3 || (p.z - 4.5).abs() < 1e-3;
            if !near_edge {
                assert_eq!(*mask.get(x, y) > 0.5, inside, "({x}, {y})");
            }
            footprint += inside as usize;
        }
    }
    assert!(footprint > 100, "{footprint}");
}

fn scene_with_light(size: usize) -> (TriMesh<f64>, TriMesh<f64>, TiltShiftCamera<f64>, Vec3<f64>) {
    let s = spec(BackgroundKind::WallCorner, ForegroundKind::Composite, size);
    let (fg, bg) = gen_scene(&s, 5).unwrap();
    (fg, bg, s.camera.camera().unwrap(), Vec3::new(-1.8, 1.6, 4.2))
}

#[test]
fn zero_radius_soft_shadow_is_the_hard_shadow_complement() {
    let size = 64;
    let (fg, bg, cam, light) = scene_with_light(size);
    let hard = mesh_hard_shadow(&fg, &bg, light, &cam);
    let q = cam.to_pixel_space(light).unwrap();
    let point = DiskLight::new(PixelPoint::new(q.u, q.v, q.h), 0.0).unwrap();
    let soft = mesh_soft_shadow(&fg, &bg, &point, &cam, 8, 1).unwrap();
    let shadowed = hard.as_slice().iter().filter(|&&v| v == 1.0).count();
    let mut flipped = 0;
    for (s, h) in soft.as_slice().iter().zip(hard.as_slice()) {
        assert!(*h == 0.0 || *h == 1.0);
        flipped += (*s != 1.0 - h) as usize;
    }
    println!("{shadowed} shadowed pixels, {flipped} differ");
    assert!(shadowed > 0);
    assert_eq!(flipped, 0);

    let disk = DiskLight::new(PixelPoint::new(q.u, q.v, q.h), 6.0).unwrap();
    let soft = mesh_soft_shadow(&fg, &bg, &disk, &cam, 64, 1).unwrap();
    assert!(soft.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(soft.as_slice().iter().any(|&v| v > 0.0 && v < 1.0));
    assert_eq!(soft.as_slice(), mesh_soft_shadow(&fg, &bg, &disk, &cam, 64, 1).unwrap().as_slice());
}

#[test]
fn mesh_tracer_ignores_triangle_order() {
    let size = 96;
    let (fg, bg, cam, light) = scene_with_light(size);
    let a = mesh_hard_shadow(&fg, &bg, light, &cam);
    let b = mesh_hard_shadow(&fg.reversed(), &bg.reversed(), light, &cam);
    assert_eq!(a.as_slice(), b.as_slice());
    let q = cam.to_pixel_space(light).unwrap();
    let disk = DiskLight::new(PixelPoint::new(q.u, q.v, q.h), 5.0).unwrap();
    let a = mesh_soft_shadow(&fg, &bg, &disk, &cam, 32, 3).unwrap();
    let b = mesh_soft_shadow(&fg.reversed(), &bg.reversed(), &disk, &cam, 32, 3).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    assert_eq!(ph_from_mesh(&fg, &cam), ph_from_mesh(&fg.reversed(), &cam));
}

fn differing(a: &Grid<f64>, b: &Grid<f64>) -> usize {
    a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count()
}

/// Scaling the scene and the camera height together leaves every image the
/// same. Rounding can move a ray that grazes an edge, so a handful of
/// pixels out of 9216 may differ.
#[test]
fn mesh_tracer_ignores_uniform_scale() {
    let size = 96;
    let (fg, bg, cam, light) = scene_with_light(size);
    let base = mesh_hard_shadow(&fg, &bg, light, &cam);
    let heights = ph_from_mesh(&fg, &cam);
    for k in [0.01, 0.5, 7.0, 1000.0] {
        let scale = |p: Vec3<f64>| p * k;
        let cam_k = cam.with_cam_height(cam.cam_height() * k).unwrap();
        let (fg_k, bg_k) = (fg.map_vertices(scale), bg.map_vertices(scale));
        let scaled = mesh_hard_shadow(&fg_k, &bg_k, light * k, &cam_k);
        let d = differing(&base, &scaled);
        let map_k = ph_from_mesh(&fg_k, &cam_k);
        let mut worst = 0.0f64;
        for y in 0..size {
            for x in 0..size {
                assert_eq!(heights.is_covered(x, y), map_k.is_covered(x, y), "k {k} ({x}, {y})");
                worst = worst.max((heights.value(x, y) - map_k.value(x, y)).abs());
            }
        }
        println!("scale {k}: {d} mask pixels differ, worst height difference {worst:.2e} px");
        assert!(d <= 3, "scale {k}: {d}");
        assert!(worst <= 1e-6, "scale {k}: {worst}");
    }
}
