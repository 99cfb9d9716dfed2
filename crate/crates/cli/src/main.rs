use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pixheight::bench::{run_benchmark, BenchConfig};
use pixheight::demo::demo_assets;
use pixheight::io::{
    encode_gray8_auto, load_scene, parse_scene, save_rgb8, save_rgba8, FsSource, LoadedScene, OutputKind,
};
use pixheight::render::{render, render_channels, Layers, RenderParams};
use pixheight::{Control, Error};

/// Exit status for unreadable or invalid scenes.
const EXIT_PARSE: u8 = 2;
/// Exit status for failures after the scene loaded.
const EXIT_RENDER: u8 = 3;

#[derive(Parser)]
#[command(name = "pixheight", version, about = "Pixel-height shadow, reflection and refraction renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene document into a composite and optional layers.
    Render {
        scene: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        spp: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Extra outputs: shadow, reflection, refraction, channels (comma separated).
        /// Defaults to the document's render.outputs.
        #[arg(long)]
        layers: Option<String>,
        /// Override every light's radius (pixels).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the nine buffer channels of the first light.
    Channels {
        scene: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Score the engine against the mesh oracle on procedural scenes.
    Bench {
        #[arg(long, default_value_t = 8)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        lights: usize,
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Disk radius in pixels; 0 scores hard shadows.
        #[arg(long, default_value_t = 0.0)]
        radius: f64,
        #[arg(long, default_value_t = 64)]
        spp: u32,
        #[arg(long, default_value_t = 256)]
        reference_spp: u32,
    },
    /// Run the HTTP render service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Write the demo scene and its assets.
    Demo {
        #[arg(long, default_value = "demo")]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn parse_failure(e: Error) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message: e.to_string(),
    }
}

fn render_failure(e: impl ToString) -> Failure {
    Failure {
        code: EXIT_RENDER,
        message: e.to_string(),
    }
}

fn load(path: &Path) -> Result<(Vec<OutputKind>, LoadedScene<f64>), Failure> {
    let doc = parse_scene(path).map_err(parse_failure)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let scene = load_scene(&doc, &FsSource::new(root)).map_err(parse_failure)?;
    Ok((doc.render.outputs.clone(), scene))
}

fn write_channels(scene: &LoadedScene<f64>, params: &RenderParams, out: &Path) -> Result<(), Failure> {
    let stack = render_channels(scene, params).map_err(render_failure)?;
    stack.save(out.join("channels.phl")).map_err(render_failure)?;
    let dir = out.join("channels");
    std::fs::create_dir_all(&dir).map_err(render_failure)?;
    for (name, plane) in pixheight::channels::CHANNEL_NAMES.iter().zip(&stack.channels) {
        let grid = pixheight::Grid::from_vec(stack.width, stack.height, plane.clone()).map_err(render_failure)?;
        let png = encode_gray8_auto(&grid).map_err(render_failure)?;
        std::fs::write(dir.join(format!("{name}.png")), png).map_err(render_failure)?;
    }
    Ok(())
}

fn unpremultiply(p: &[f32; 4]) -> [f32; 4] {
    if p[3] > 0.0 {
        [p[0] / p[3], p[1] / p[3], p[2] / p[3], p[3]]
    } else {
        [0.0; 4]
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_render(
    scene_path: &Path,
    out: &Path,
    spp: Option<u32>,
    seed: Option<u64>,
    layers: Option<&str>,
    radius: Option<f64>,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let (outputs, scene) = load(scene_path)?;
    let extra: Vec<OutputKind> = match layers {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                OutputKind::parse(s).ok_or_else(|| Failure {
                    code: EXIT_PARSE,
                    message: format!("--layers: unknown layer {s:?}"),
                })
            })
            .collect::<Result<_, _>>()?,
        None => outputs,
    };
    let mut params = RenderParams::from_block(&scene.render);
    params.layers = Layers::ALL;
    if let Some(s) = spp {
        params.spp = s;
    }
    if let Some(s) = seed {
        params.seed = s;
    }
    params.radius = radius;
    params.threads = threads;
    std::fs::create_dir_all(out).map_err(render_failure)?;
    let result = render(&scene, &params, &Control::new()).map_err(render_failure)?;
    save_rgb8(&result.composite, out.join("composite.png")).map_err(render_failure)?;
    for kind in extra {
        match kind {
            OutputKind::Composite => {}
            OutputKind::Shadow => {
                if let Some(layer) = result.shadow_layer(params.shadow_opacity, params.shadow_color) {
                    save_rgba8(&layer, out.join("shadow.png")).map_err(render_failure)?;
                }
            }
            OutputKind::Reflection => {
                if let Some(layer) = &result.reflection {
                    save_rgba8(&layer.map(unpremultiply), out.join("reflection.png")).map_err(render_failure)?;
                }
            }
            OutputKind::Refraction => {
                if let Some(layer) = &result.refraction {
                    save_rgba8(&layer.map(unpremultiply), out.join("refraction.png")).map_err(render_failure)?;
                }
            }
            OutputKind::Channels => write_channels(&scene, &params, out)?,
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Render {
            scene,
            out,
            spp,
            seed,
            layers,
            radius,
            threads,
        } => cmd_render(&scene, &out, spp, seed, layers.as_deref(), radius, threads),
        Command::Channels { scene, out, radius } => {
            let (_, loaded) = load(&scene)?;
            let mut params = RenderParams::from_block(&loaded.render);
            params.radius = radius;
            std::fs::create_dir_all(&out).map_err(render_failure)?;
            write_channels(&loaded, &params, &out)
        }
        Command::Bench {
            scenes,
            seed,
            out,
            lights,
            size,
            radius,
            spp,
            reference_spp,
        } => {
            let cfg = BenchConfig {
                scenes,
                lights,
                width: size,
                height: size,
                seed,
                radius,
                spp,
                reference_spp,
            };
            let summary = run_benchmark(&cfg, &out).map_err(render_failure)?;
            print!("{}", summary.report.to_text());
            println!(
                "\nshadow IoU mean {:.4} min {:.4}; engine {:.1} s, oracle {:.1} s",
                summary.mean_iou, summary.min_iou, summary.engine_seconds, summary.oracle_seconds
            );
            Ok(())
        }
        Command::Serve { port, bind } => {
            let addr: SocketAddr = format!("{bind}:{port}").parse().map_err(|e| Failure {
                code: EXIT_PARSE,
                message: format!("--bind: {e}"),
            })?;
            eprintln!("listening on http://{addr}");
            pixheight_service::run(addr).map_err(render_failure)
        }
        Command::Demo { out, size } => {
            let assets = demo_assets(size, size).map_err(render_failure)?;
            assets.write_to(&out).map_err(render_failure)?;
            eprintln!("wrote {}", out.join("scene.toml").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
