//! Asset input and output: height maps, images and scene documents.

mod images;
mod pfm;
mod png16;
mod scene;

pub use images::{
    decode_rgb, decode_rgba, encode_gray8, encode_gray8_auto, encode_rgb8, encode_rgba8, load_rgb,
    load_rgba, save_rgb8, save_rgba8, to_u8,
};
pub use pfm::{load_pfm, read_pfm, save_pfm, write_pfm};
pub use png16::{decode_png16, encode_png16, load_png16, save_png16};
pub use scene::{
    load_scene, load_scene_file, parse_scene, AssetSource, BackgroundRef, CameraBlock, CutoutRef,
    FsSource, LightSpec, LoadedScene, MaterialSpec, MemorySource, OutputKind, RefractorModeSpec,
    RefractorSpec, RenderBlock, SceneDocument, SCENE_VERSION,
};
