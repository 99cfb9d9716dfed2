//! Procedural scenes and a triangle-mesh ray tracer that provide ground truth
//! for everything computed in pixel-height space.

pub mod golden;
mod mesh;
mod render;
mod scenes;
mod tracer;

pub use mesh::{TriMesh, MIN_TRIANGLE_AREA};
pub use render::{mesh_first_hit, mesh_hard_shadow, mesh_soft_shadow, ph_from_mesh};
pub use scenes::{
    benchmark_scenes, gen_scene, sample_lights, BackgroundKind, BenchScene, CameraSpec,
    ForegroundKind, Pose, SceneSpec,
};
pub use tracer::{MeshHit, MeshLayer, MeshTracer, MESH_EPSILON, SHADOW_OFFSET};
