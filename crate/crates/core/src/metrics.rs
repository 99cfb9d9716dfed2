//! Shadow-map quality metrics and benchmark evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::load_pfm;
use crate::num::Real;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check<T: Real>(pred: &Grid<T>, gt: &Grid<T>) -> Result<()> {
    pred.ensure_dims(gt.dims())?;
    if gt.is_empty() {
        return Err(Error::invalid("metrics need at least one pixel"));
    }
    Ok(())
}

fn pairs<'a, T: Real>(pred: &'a Grid<T>, gt: &'a Grid<T>) -> impl Iterator<Item = (f64, f64)> + 'a {
    pred.as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(p, g)| (p.to_f64_lossy(), g.to_f64_lossy()))
}

pub fn rmse<T: Real>(pred: &Grid<T>, gt: &Grid<T>) -> Result<f64> {
    check(pred, gt)?;
    let sum: f64 = pairs(pred, gt).map(|(p, g)| (p - g) * (p - g)).sum();
    Ok((sum / gt.len() as f64).sqrt())
}

/// Scale-invariant RMSE and the scale that achieves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledRmse {
    pub value: f64,
    /// `None` when the prediction is identically zero and no scale is defined.
    pub alpha: Option<f64>,
}

/// `min over α ≥ 0 of rmse(α·pred, gt)`, with α = ⟨pred, gt⟩ / ⟨pred, pred⟩ clamped at zero.
pub fn rmse_s<T: Real>(pred: &Grid<T>, gt: &Grid<T>) -> Result<ScaledRmse> {
    check(pred, gt)?;
    let (pg, pp) = pairs(pred, gt).fold((0.0, 0.0), |(pg, pp), (p, g)| (pg + p * g, pp + p * p));
    let n = gt.len() as f64;
    if pp == 0.0 {
        let gg: f64 = gt.as_slice().iter().map(|g| g.to_f64_lossy().powi(2)).sum();
        return Ok(ScaledRmse {
            value: (gg / n).sqrt(),
            alpha: None,
        });
    }
    let alpha = (pg / pp).max(0.0);
    let sum: f64 = pairs(pred, gt).map(|(p, g)| (alpha * p - g).powi(2)).sum();
    Ok(ScaledRmse {
        value: (sum / n).sqrt(),
        alpha: Some(alpha),
    })
}

/// Normalised 1-D Gaussian taps of the SSIM window.
pub fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Index into `0..n` with symmetric (edge-repeating) reflection.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn blur(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (j, kv) in k.iter().enumerate() {
                s += kv * src[y * w + reflect(x as isize + j as isize - r, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (j, kv) in k.iter().enumerate() {
                s += kv * tmp[reflect(y as isize + j as isize - r, h) * w + x];
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// Per-pixel SSIM with the Gaussian window, symmetric padding and the given dynamic range.
pub fn ssim_map<T: Real>(pred: &Grid<T>, gt: &Grid<T>, dynamic_range: f64) -> Result<Grid<f64>> {
    pred.ensure_dims(gt.dims())?;
    let (w, h) = gt.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let x: Vec<f64> = pred.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let y: Vec<f64> = gt.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let k = ssim_kernel();
    let mx = blur(&x, w, h, &k);
    let my = blur(&y, w, h, &k);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mxx = blur(&sq(&x, &x), w, h, &k);
    let myy = blur(&sq(&y, &y), w, h, &k);
    let mxy = blur(&sq(&x, &y), w, h, &k);
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let vals = (0..w * h)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .collect();
    Grid::from_vec(w, h, vals)
}

/// Mean SSIM with dynamic range 1.
pub fn ssim<T: Real>(pred: &Grid<T>, gt: &Grid<T>) -> Result<f64> {
    let m = ssim_map(pred, gt, 1.0)?;
    Ok(m.as_slice().iter().sum::<f64>() / m.len() as f64)
}

/// Zero-normalised cross-correlation over the whole map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zncc {
    pub value: f64,
    /// False when either map is constant; `value` is then 0.
    pub defined: bool,
}

pub const ZNCC_EPSILON: f64 = 1e-12;

pub fn zncc<T: Real>(pred: &Grid<T>, gt: &Grid<T>) -> Result<Zncc> {
    check(pred, gt)?;
    let n = gt.len() as f64;
    let (sp, sg) = pairs(pred, gt).fold((0.0, 0.0), |(a, b), (p, g)| (a + p, b + g));
    let (mp, mg) = (sp / n, sg / n);
    let (mut cov, mut vp, mut vg) = (0.0, 0.0, 0.0);
    for (p, g) in pairs(pred, gt) {
        cov += (p - mp) * (g - mg);
        vp += (p - mp) * (p - mp);
        vg += (g - mg) * (g - mg);
    }
    let (sdp, sdg) = ((vp / n).sqrt(), (vg / n).sqrt());
    if sdp <= ZNCC_EPSILON || sdg <= ZNCC_EPSILON {
        return Ok(Zncc {
            value: 0.0,
            defined: false,
        });
    }
    Ok(Zncc {
        value: (cov / (vp.sqrt() * vg.sqrt())).clamp(-1.0, 1.0),
        defined: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub name: String,
    pub rmse: f64,
    pub rmse_s: f64,
    pub ssim: f64,
    pub zncc: f64,
    pub alpha_defined: bool,
    pub zncc_defined: bool,
}

impl ItemMetrics {
    pub fn compute<T: Real>(name: impl Into<String>, pred: &Grid<T>, gt: &Grid<T>) -> Result<Self> {
        let rs = rmse_s(pred, gt)?;
        let z = zncc(pred, gt)?;
        Ok(Self {
            name: name.into(),
            rmse: rmse(pred, gt)?,
            rmse_s: rs.value,
            ssim: ssim(pred, gt)?,
            zncc: z.value,
            alpha_defined: rs.alpha.is_some(),
            zncc_defined: z.defined,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub rmse: f64,
    pub rmse_s: f64,
    pub ssim: f64,
    pub zncc: f64,
}

impl Aggregate {
    pub fn of<'a>(items: impl IntoIterator<Item = &'a ItemMetrics>) -> Self {
        let mut a = Aggregate {
            count: 0,
            rmse: 0.0,
            rmse_s: 0.0,
            ssim: 0.0,
            zncc: 0.0,
        };
        for it in items {
            a.count += 1;
            a.rmse += it.rmse;
            a.rmse_s += it.rmse_s;
            a.ssim += it.ssim;
            a.zncc += it.zncc;
        }
        if a.count > 0 {
            let n = a.count as f64;
            a.rmse /= n;
            a.rmse_s /= n;
            a.ssim /= n;
            a.zncc /= n;
        }
        a
    }
}

/// Column headers of the tabular report.
pub const REPORT_COLUMNS: [&str; 4] = ["RMSE↓", "RMSE-s↓", "SSIM↑", "ZNCC↑"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub items: Vec<ItemMetrics>,
    /// Means per group (the first path component of an item name).
    pub groups: BTreeMap<String, Aggregate>,
    pub mean: Aggregate,
}

impl MetricReport {
    pub fn from_items(mut items: Vec<ItemMetrics>) -> Self {
        items.sort_by(|a, b| a.name.cmp(&b.name));
        let mut grouped: BTreeMap<String, Vec<&ItemMetrics>> = BTreeMap::new();
        for it in &items {
            if let Some((g, _)) = it.name.split_once('/') {
                grouped.entry(g.to_string()).or_default().push(it);
            }
        }
        let groups = grouped
            .into_iter()
            .map(|(g, v)| (g, Aggregate::of(v)))
            .collect();
        let mean = Aggregate::of(&items);
        Self { items, groups, mean }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let name_w = self
            .items
            .iter()
            .map(|i| i.name.chars().count())
            .chain(self.groups.keys().map(|g| g.chars().count() + 6))
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = write!(s, "{:<name_w$}", "item");
        for c in REPORT_COLUMNS {
            let _ = write!(s, "  {c:>9}");
        }
        s.push('\n');
        let row = |s: &mut String, name: &str, v: [f64; 4]| {
            let _ = write!(s, "{name:<name_w$}");
            for x in v {
                let _ = write!(s, "  {x:>9.5}");
            }
            s.push('\n');
        };
        for it in &self.items {
            row(&mut s, &it.name, [it.rmse, it.rmse_s, it.ssim, it.zncc]);
        }
        s.push('\n');
        for (g, a) in &self.groups {
            row(&mut s, &format!("mean:{g}"), [a.rmse, a.rmse_s, a.ssim, a.zncc]);
        }
        let a = &self.mean;
        row(&mut s, "mean", [a.rmse, a.rmse_s, a.ssim, a.zncc]);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn collect_pfm(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_pfm(root, &p, out)?;
        } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
            let rel = p.strip_prefix(root).expect("walk stays under root");
            let name: PathBuf = rel.with_extension("");
            out.push(name.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// Scores every `.pfm` visibility map under `pred_dir` against the map with the
/// same relative path under `gt_dir`. Items present on only one side are an error.
pub fn evaluate_benchmark(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>) -> Result<MetricReport> {
    let (pred_dir, gt_dir) = (pred_dir.as_ref(), gt_dir.as_ref());
    let mut pred = Vec::new();
    let mut gt = Vec::new();
    collect_pfm(pred_dir, pred_dir, &mut pred)?;
    collect_pfm(gt_dir, gt_dir, &mut gt)?;
    pred.sort();
    gt.sort();
    let mut missing: Vec<String> = gt
        .iter()
        .filter(|n| pred.binary_search(n).is_err())
        .map(|n| format!("prediction for {n}"))
        .collect();
    missing.extend(
        pred.iter()
            .filter(|n| gt.binary_search(n).is_err())
            .map(|n| format!("ground truth for {n}")),
    );
    if !missing.is_empty() {
        return Err(Error::MissingItems(missing));
    }
    let items = gt
        .par_iter()
        .map(|name| {
            let p = load_pfm::<f64>(pred_dir.join(format!("{name}.pfm")))?;
            let g = load_pfm::<f64>(gt_dir.join(format!("{name}.pfm")))?;
            ItemMetrics::compute(name.clone(), p.values(), g.values())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_items(items))
}
