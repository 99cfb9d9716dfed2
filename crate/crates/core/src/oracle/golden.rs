//! Golden-file directory: `<scene id>/{fg.pfm, bg.pfm, meta.json, shadows/*.pfm}`
//! plus a `checksums.sha256` manifest in `sha256sum` format at the root.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PixelHeightMap;
use crate::grid::Grid;
use crate::io::{load_pfm, save_pfm};

pub const MANIFEST: &str = "checksums.sha256";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}

/// Writes one scene's golden entry (creating directories as needed).
pub fn write_entry(
    root: impl AsRef<Path>,
    id: &str,
    fg: &PixelHeightMap<f64>,
    bg: &PixelHeightMap<f64>,
    meta: &serde_json::Value,
    shadows: &[(String, Grid<f64>)],
) -> Result<()> {
    let dir = root.as_ref().join(id);
    std::fs::create_dir_all(dir.join("shadows"))?;
    save_pfm(fg, dir.join("fg.pfm"))?;
    save_pfm(bg, dir.join("bg.pfm"))?;
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(meta).expect("json"))?;
    for (name, map) in shadows {
        save_shadow(map, dir.join("shadows").join(format!("{name}.pfm")))?;
    }
    Ok(())
}

pub fn save_shadow(map: &Grid<f64>, path: impl AsRef<Path>) -> Result<()> {
    let hm = PixelHeightMap::new(map.clone(), Grid::filled(map.width(), map.height(), 1.0))?;
    save_pfm(&hm, path)
}

pub fn load_shadow(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    Ok(load_pfm::<f64>(path)?.into_parts().0)
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            walk(root, &p, out)?;
        } else if p.file_name().is_some_and(|n| n != MANIFEST) {
            out.push(p.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// Rewrites the manifest to cover every file under `root`.
pub fn write_manifest(root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let mut files = Vec::new();
    walk(root, root, &mut files)?;
    files.sort();
    let mut text = String::new();
    for f in files {
        let rel = f.to_string_lossy().replace('\\', "/");
        text.push_str(&format!("{}  {}\n", sha256_file(root.join(&f))?, rel));
    }
    std::fs::write(root.join(MANIFEST), text)?;
    Ok(())
}

/// Checks every manifest entry. Returns the paths that are missing or differ.
pub fn verify_manifest(root: impl AsRef<Path>) -> Result<Vec<String>> {
    let root = root.as_ref();
    let text = std::fs::read_to_string(root.join(MANIFEST))?;
    let mut expected = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let (sum, path) = line
            .split_once("  ")
            .ok_or_else(|| Error::format(root.join(MANIFEST), format!("line {} is malformed", i + 1)))?;
        expected.insert(path.to_string(), sum.to_string());
    }
    let mut bad = Vec::new();
    for (path, sum) in expected {
        match sha256_file(root.join(&path)) {
            Ok(s) if s == sum => {}
            _ => bad.push(path),
        }
    }
    Ok(bad)
}
