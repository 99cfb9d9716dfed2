use pixheight::geometry::{reconstruct_scene, PixelHeightMap, TiltShiftCamera};
use pixheight::oracle::{
    gen_scene, ph_from_mesh, BackgroundKind, CameraSpec, ForegroundKind, MeshLayer, MeshTracer, Pose, SceneSpec,
    TriMesh,
};
use pixheight::tracer::Scene;
use pixheight::vec3::Vec3;
use pixheight::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_err(a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    (a - b).length() / b.length().max(1e-12)
}

fn spec(background: BackgroundKind, size: usize) -> SceneSpec {
    SceneSpec {
        background,
        foreground: ForegroundKind::Box,
        poses: vec![Pose {
            x: 0.2,
            z: 4.0,
            yaw: 0.4,
            elevation: 0.0,
        }],
        camera: CameraSpec::default_for(size, size),
        lights: vec![],
    }
}

#[test]
fn camera_at_mid_image_horizon() {
    let cam = TiltShiftCamera::<f64>::new(256, 256, 256.0, 128.0, 1.0).unwrap();
    assert!((cam.b().y * 128.0 + cam.c().y).abs() < 1e-15);
    assert_eq!(cam.a().y, 0.0);
    assert_eq!((cam.b().x, cam.b().z), (0.0, 0.0));
    assert!(cam.b().y < 0.0);
}

#[test]
fn camera_rejects_non_positive_parameters() {
    for (w, h, f, c) in [(0, 8, 8.0, 1.0), (8, 0, 8.0, 1.0), (8, 8, 0.0, 1.0), (8, 8, 8.0, 0.0), (8, 8, 8.0, -1.0)] {
        assert!(matches!(TiltShiftCamera::<f64>::new(w, h, f, 4.0, c), Err(Error::InvalidParameter(_))));
    }
}

#[test]
fn ground_points_round_trip_on_an_off_default_camera() {
    let cam = TiltShiftCamera::<f64>::new(512, 512, 600.0, 200.0, 1.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    while n < 100 {
        let p = Vec3::new(rng.random_range(-6.0..6.0), 0.0, rng.random_range(1.0..40.0));
        let Ok((u, v)) = cam.project_point(p) else { continue };
        if !cam.contains_pixel(u, v) {
            continue;
        }
        let back = cam.reconstruct_point(u, v, 0.0).unwrap();
        assert!(rel_err(back, p) < 1e-6, "{p:?} -> {back:?}");
        assert_eq!(back.y, 0.0);
        n += 1;
    }
}

#[test]
fn far_ground_points_approach_the_horizon_from_below() {
    let cam = TiltShiftCamera::<f64>::default_for(256, 256).unwrap();
    let mut last = f64::INFINITY;
    for z in [10.0, 100.0, 1e3, 1e4, 1e6] {
        let (_, v) = cam.project_point(Vec3::new(0.0, 0.0, z)).unwrap();
        assert!(v > cam.horizon_row() && v < last, "z {z}: v {v}");
        last = v;
    }
    assert!(last - cam.horizon_row() < 1e-3);
}

#[test]
fn scale_grows_towards_the_horizon_and_lands_on_the_ground() {
    let cam = TiltShiftCamera::<f64>::new(256, 256, 256.0, 90.0, 1.3).unwrap();
    let w1 = cam.solve_scale(40.0, 91.0).unwrap();
    let w2 = cam.solve_scale(40.0, 92.0).unwrap();
    assert!(w1 > w2 && w2 > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let (u, v) = (rng.random_range(0.0..255.0), rng.random_range(91.0..255.0));
        let w = cam.solve_scale(u, v).unwrap();
        let q = cam.origin() + cam.direction(u, v) * w;
        assert!(q.y.abs() < 1e-9, "{q:?}");
    }
    assert!(matches!(cam.solve_scale(10.0, 90.0), Err(Error::PointAtInfinity { .. })));
}

#[test]
fn known_point_is_recovered_from_its_pixel_height() {
    let cam = TiltShiftCamera::<f64>::default_for(256, 256).unwrap();
    let p = Vec3::new(0.3, 0.5, 4.0);
    let (u, v) = cam.project_point(p).unwrap();
    let (_, v_foot) = cam.project_point(Vec3::new(p.x, 0.0, p.z)).unwrap();
    let back = cam.reconstruct_point(u, v, v_foot - v).unwrap();
    assert!(rel_err(back, p) < 1e-6, "{back:?}");
}

#[test]
fn shared_foot_pixels_reconstruct_a_vertical_line() {
    let cam = TiltShiftCamera::<f64>::default_for(256, 256).unwrap();
    for horizon in [-40.0, 0.0, 60.0, 128.0, 200.0] {
        let cam = cam.set_horizon(horizon);
        let foot = horizon.max(0.0) + 40.0;
        let (h1, h2) = (5.0, 25.0);
        let p1 = cam.reconstruct_point(70.0, foot - h1, h1).unwrap();
        let p2 = cam.reconstruct_point(70.0, foot - h2, h2).unwrap();
        assert!((p1.x - p2.x).abs() < 1e-12 && (p1.z - p2.z).abs() < 1e-12, "horizon {horizon}");
        assert!(p2.y > p1.y);
    }
}

#[test]
fn reconstruction_rejects_negative_heights() {
    let cam = TiltShiftCamera::<f64>::default_for(64, 64).unwrap();
    assert!(matches!(cam.reconstruct_point(10.0, 40.0, -1.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn zero_background_reconstructs_the_ground_plane() {
    let cam = TiltShiftCamera::<f64>::default_for(64, 64).unwrap();
    let grid = reconstruct_scene(&cam, &PixelHeightMap::empty(64, 64), &PixelHeightMap::ground(64, 64)).unwrap();
    let mut valid = 0;
    for y in 0..64 {
        for x in 0..64 {
            if *grid.valid.get(x, y) {
                assert_eq!(grid.positions.get(x, y).y, 0.0);
                valid += 1;
            } else {
                assert!(y as f64 <= cam.horizon_row());
            }
        }
    }
    assert!(valid > 0);
}

#[test]
fn empty_foreground_changes_nothing() {
    let cam = TiltShiftCamera::<f64>::default_for(48, 48).unwrap();
    let bg = PixelHeightMap::from_fn(48, 48, |x, y| ((x * 7 + y * 3) % 11) as f64 * 0.5).unwrap();
    let a = reconstruct_scene(&cam, &PixelHeightMap::empty(48, 48), &bg).unwrap();
    let b = Scene::background(cam.clone(), bg.clone()).unwrap();
    let b = b.grid();
    assert_eq!(a.positions.as_slice(), b.positions.as_slice());
    assert_eq!(a.valid.as_slice(), b.valid.as_slice());
    assert_eq!(a.depth.as_slice(), b.depth.as_slice());
}

#[test]
fn mismatched_maps_are_rejected() {
    let cam = TiltShiftCamera::<f64>::default_for(32, 32).unwrap();
    assert!(reconstruct_scene(&cam, &PixelHeightMap::empty(32, 31), &PixelHeightMap::ground(32, 32)).is_err());
}

/// Mesh surface seen through each pixel centre.
fn mesh_view(fg: &TriMesh<f64>, bg: &TriMesh<f64>, cam: &TiltShiftCamera<f64>, x: usize, y: usize) -> Option<(Vec3<f64>, Vec3<f64>, MeshLayer)> {
    let tracer = MeshTracer::new(fg, bg);
    let d = cam.direction(x as f64, y as f64).normalize();
    tracer.first_hit(cam.origin(), d, f64::INFINITY).map(|h| (h.point, h.normal, h.layer))
}

#[test]
fn wall_scene_positions_match_the_mesh() {
    let size = 128;
    for kind in [BackgroundKind::WallCorner, BackgroundKind::TwoCorners, BackgroundKind::CornellBox] {
        let s = spec(kind, size);
        let cam = s.camera.camera().unwrap();
        let (fg, bg) = gen_scene(&s, 1).unwrap();
        let scene = Scene::new(cam.clone(), ph_from_mesh(&fg, &cam), ph_from_mesh(&bg, &cam)).unwrap();
        let tracer = MeshTracer::new(&fg, &bg);
        let (mut lo, mut hi) = (Vec3::new(f64::MAX, f64::MAX, f64::MAX), Vec3::new(f64::MIN, f64::MIN, f64::MIN));
        let mut worst = 0.0f64;
        for y in 0..size {
            for x in 0..size {
                let d = cam.direction(x as f64, y as f64).normalize();
                let Some(hit) = tracer.first_hit(cam.origin(), d, f64::INFINITY) else { continue };
                assert!(*scene.grid().valid.get(x, y), "{kind} ({x}, {y})");
                let p = hit.point;
                lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
                hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
                worst = worst.max((*scene.grid().positions.get(x, y) - p).length());
            }
        }
        let extent = (hi - lo).length();
        println!("{kind}: max position error {worst:.3e}, visible extent {extent:.2}");
        assert!(worst < 0.005 * extent, "{kind}: {worst} vs extent {extent}");
    }
}

#[test]
fn curved_background_normals_match_the_mesh() {
    let size = 128;
    let s = spec(BackgroundKind::Curved, size);
    let cam = s.camera.camera().unwrap();
    let (_, bg) = gen_scene(&s, 1).unwrap();
    let empty = TriMesh::empty();
    let scene = Scene::background(cam.clone(), ph_from_mesh(&bg, &cam)).unwrap();
    let grid = scene.grid();
    let mut errors = Vec::new();
    for y in 0..size {
        for x in 0..size {
            if !*grid.normal_valid.get(x, y) {
                continue;
            }
            let n = *grid.normals.get(x, y);
            assert!((n.length() - 1.0).abs() < 1e-6);
            let view = *grid.positions.get(x, y) - cam.origin();
            assert!(n.dot(view) <= 0.0, "normal faces away at ({x}, {y})");
            let Some((_, truth, _)) = mesh_view(&empty, &bg, &cam, x, y) else { continue };
            errors.push(n.dot(truth).clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    errors.sort_by(f64::total_cmp);
    let p95 = errors[errors.len() * 95 / 100];
    println!("{} normals, 95th percentile angular error {p95:.3} deg", errors.len());
    assert!(p95 < 3.0, "{p95}");
}

#[test]
fn horizon_moves_keep_the_basis_and_identity() {
    let cam = TiltShiftCamera::<f64>::new(200, 150, 180.0, 60.0, 1.2).unwrap();
    let same = cam.set_horizon(cam.horizon_row());
    assert_eq!(same.c(), cam.c());
    for row in [-100.0, 0.0, 75.0, 149.0, 400.0] {
        let moved = cam.set_horizon(row);
        assert_eq!((moved.a(), moved.b()), (cam.a(), cam.b()));
        assert!((moved.b().y * row + moved.c().y).abs() < 1e-12);
        assert_eq!(moved.horizon_row(), row);
    }
}
