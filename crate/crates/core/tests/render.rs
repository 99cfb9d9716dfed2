use pixheight::demo::demo_assets;
use pixheight::io::{load_scene, LoadedScene};
use pixheight::render::{downscale, render, render_channels, Layers, RenderParams};
use pixheight::tracer::{hard_shadow, Scene};
use pixheight::{Control, Error};

fn demo(size: usize) -> LoadedScene<f64> {
    let assets = demo_assets(size, size).unwrap();
    load_scene(&assets.document, &assets.source()).unwrap()
}

fn params(scene: &LoadedScene<f64>, spp: u32) -> RenderParams {
    RenderParams {
        spp,
        ..RenderParams::from_block(&scene.render)
    }
}

#[test]
fn demo_renders_every_layer() {
    let scene = demo(96);
    let out = render(&scene, &params(&scene, 8), &Control::new()).unwrap();
    assert_eq!(out.composite.dims(), (96, 96));
    let vis = out.visibility.as_ref().unwrap();
    assert!(vis.as_slice().iter().any(|&v| v < 0.5), "demo casts a shadow");
    let refl = out.reflection.as_ref().unwrap();
    assert!(refl.as_slice().iter().any(|p| p[3] > 0.0), "demo has reflections");
    let refr = out.refraction.as_ref().unwrap();
    assert!(refr.as_slice().iter().any(|p| p[3] > 0.0), "demo has refraction");
    if let Ok(dir) = std::env::var("PIXHEIGHT_DUMP") {
        pixheight::io::save_rgb8(&out.composite, format!("{dir}/demo_composite.png")).unwrap();
    }
}

#[test]
fn output_is_independent_of_threads_and_pass_size() {
    let scene = demo(64);
    let mut a = params(&scene, 12);
    a.threads = Some(1);
    a.pass_spp = 12;
    let mut b = params(&scene, 12);
    b.threads = Some(3);
    b.pass_spp = 5;
    let ra = render(&scene, &a, &Control::new()).unwrap();
    let rb = render(&scene, &b, &Control::new()).unwrap();
    assert_eq!(ra.composite.as_slice(), rb.composite.as_slice());
}

#[test]
fn radius_zero_single_sample_is_the_hard_shadow() {
    let scene = demo(64);
    let mut p = params(&scene, 1);
    p.radius = Some(0.0);
    p.layers = Layers::parse("shadow").unwrap();
    let out = render(&scene, &p, &Control::new()).unwrap();
    let ts = Scene::new(scene.camera.clone(), scene.fg.clone(), scene.bg.clone()).unwrap();
    let hard = hard_shadow(&ts, scene.lights[0].center);
    for (v, s) in out.visibility.unwrap().as_slice().iter().zip(hard.as_slice()) {
        assert_eq!(*v as f64, 1.0 - s);
    }
}

#[test]
fn cancelled_render_reports_cancellation() {
    let scene = demo(64);
    let control = Control::new();
    control.cancel();
    match render(&scene, &params(&scene, 4), &control) {
        Err(Error::Cancelled) => {}
        other => panic!("{:?}", other.map(|o| o.spp)),
    }
}

#[test]
fn preview_downscale_bounds_resolution() {
    let scene = demo(96);
    let small = downscale(&scene, 40).unwrap();
    assert_eq!(small.camera.dims(), (32, 32));
    assert_eq!(small.lights[0].center.h, scene.lights[0].center.h / 3.0);
    let mut p = params(&scene, 2);
    p.max_dim = Some(40);
    let out = render(&scene, &p, &Control::new()).unwrap();
    assert_eq!(out.composite.dims(), (32, 32));
}

#[test]
fn progress_reaches_spp() {
    let scene = demo(48);
    let control = Control::new();
    let mut p = params(&scene, 6);
    p.pass_spp = 4;
    render(&scene, &p, &control).unwrap();
    assert_eq!(control.samples_done(), 6);
}

#[test]
fn channels_stack_has_nine_planes() {
    let scene = demo(48);
    let stack = render_channels(&scene, &params(&scene, 1)).unwrap();
    assert_eq!(stack.channels.len(), 9);
    assert_eq!((stack.width, stack.height), (48, 48));
}
