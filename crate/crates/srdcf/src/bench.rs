//! Benchmark harness: sequence ingestion, overlap metrics, success curves,
//! and a synthetic sequence generator for repeatable end-to-end runs.
//!
//! Sequences follow the common benchmark layout: an `img/` directory of
//! numbered frames plus a `groundtruth_rect.txt` with one `x,y,w,h` box per
//! frame, coordinates 1-indexed. Internally everything is 0-indexed pixels.

use crate::error::{Error, Result};
use crate::features::Frame;
use crate::scalar::{cast, Scalar};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Axis-aligned box, `(x, y)` top-left, in 0-indexed pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        BoundingBox {
            x: a[0],
            y: a[1],
            w: a[2],
            h: a[3],
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Intersection over union. Both boxes must have positive area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> Result<f64> {
    if a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0 {
        return Err(Error::invalid_input(format!(
            "overlap of non-positive-area boxes {}x{} and {}x{}",
            a.w, a.h, b.w, b.h
        )));
    }
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return Ok(0.0);
    }
    let inter = ix * iy;
    Ok(inter / (a.area() + b.area() - inter))
}

/// A benchmark sequence on disk: ordered frame paths and optional
/// ground truth (0-indexed).
#[derive(Debug, Clone)]
pub struct Sequence {
    pub dir: PathBuf,
    pub frames: Vec<PathBuf>,
    pub groundtruth: Option<Vec<BoundingBox>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

const IMAGE_EXTS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Load a sequence directory. Frames are ordered by their numeric file stem
/// and must be consecutive; a gap is reported with the missing frame number.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::ingestion(format!(
            "{}: no img/ directory",
            dir.display()
        )));
    }
    let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(&img_dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !matches!(ext.as_deref(), Some(e) if IMAGE_EXTS.contains(&e)) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let num: u64 = stem.parse().map_err(|_| {
            Error::ingestion(format!("{}: non-numeric frame name", path.display()))
        })?;
        numbered.push((num, path));
    }
    if numbered.is_empty() {
        return Err(Error::ingestion(format!(
            "{}: no image frames found",
            img_dir.display()
        )));
    }
    numbered.sort_by_key(|(n, _)| *n);
    let first = numbered[0].0;
    for (i, (n, _)) in numbered.iter().enumerate() {
        let expect = first + i as u64;
        if *n != expect {
            return Err(Error::ingestion(format!(
                "{}: missing frame {}",
                img_dir.display(),
                expect
            )));
        }
    }
    let frames: Vec<PathBuf> = numbered.into_iter().map(|(_, p)| p).collect();

    let gt_path = dir.join("groundtruth_rect.txt");
    let groundtruth = if gt_path.is_file() {
        let boxes = parse_boxes(&fs::read_to_string(&gt_path)?)
            .map_err(|e| Error::ingestion(format!("{}: {e}", gt_path.display())))?;
        if boxes.len() != frames.len() {
            return Err(Error::ingestion(format!(
                "{}: {} boxes for {} frames",
                gt_path.display(),
                boxes.len(),
                frames.len()
            )));
        }
        // Ground truth files are 1-indexed.
        Some(
            boxes
                .into_iter()
                .map(|b| BoundingBox::new(b.x - 1.0, b.y - 1.0, b.w, b.h))
                .collect(),
        )
    } else {
        None
    };

    Ok(Sequence {
        dir: dir.to_path_buf(),
        frames,
        groundtruth,
    })
}

/// Decode one frame to planes in `[0, 1]`.
pub fn load_frame<T: Scalar>(path: &Path) -> Result<Frame<T>> {
    let img = image::open(path)
        .map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))?;
    let scale = 1.0 / 255.0;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            let gray = Array2::from_shape_fn((h, w), |(y, x)| {
                cast::<T>(g.get_pixel(x as u32, y as u32)[0] as f64 * scale)
            });
            Ok(Frame::from_gray(gray))
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let plane = |c: usize| {
                Array2::from_shape_fn((h, w), |(y, x)| {
                    cast::<T>(rgb.get_pixel(x as u32, y as u32)[c] as f64 * scale)
                })
            };
            Ok(Frame::from_rgb(plane(0), plane(1), plane(2)))
        }
    }
}

/// Parse `x,y,w,h` lines (comma, tab, or space separated), no index shift.
pub fn parse_box_file(path: &Path) -> Result<Vec<BoundingBox>> {
    parse_boxes(&fs::read_to_string(path)?)
        .map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))
}

fn parse_boxes(text: &str) -> std::result::Result<Vec<BoundingBox>, String> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == '\t' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 fields", ln + 1));
        }
        let mut vals = [0.0f64; 4];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f
                .parse()
                .map_err(|_| format!("line {}: bad number {:?}", ln + 1, f))?;
        }
        out.push(BoundingBox::from_array(vals));
    }
    Ok(out)
}

/// Success curve over 101 overlap thresholds.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_frame_iou: Vec<f64>,
    /// Thresholds `0.00, 0.01, ..., 1.00`.
    pub thresholds: Vec<f64>,
    /// Fraction of frames with overlap strictly above each threshold.
    pub op: Vec<f64>,
    /// Mean of the success curve.
    pub auc: f64,
    /// Overlap precision at threshold 0.5.
    pub op50: f64,
}

impl EvalReport {
    pub fn mean_iou(&self) -> f64 {
        self.per_frame_iou.iter().sum::<f64>() / self.per_frame_iou.len() as f64
    }
}

/// Score predictions against ground truth.
pub fn evaluate(predictions: &[BoundingBox], groundtruth: &[BoundingBox]) -> Result<EvalReport> {
    if predictions.len() != groundtruth.len() {
        return Err(Error::invalid_input(format!(
            "{} predictions vs {} ground-truth boxes",
            predictions.len(),
            groundtruth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid_input("empty evaluation"));
    }
    let per_frame_iou: Vec<f64> = predictions
        .iter()
        .zip(groundtruth)
        .map(|(p, g)| iou(p, g))
        .collect::<Result<_>>()?;
    let thresholds: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let op: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            per_frame_iou.iter().filter(|&&o| o > t).count() as f64 / per_frame_iou.len() as f64
        })
        .collect();
    let auc = op.iter().sum::<f64>() / op.len() as f64;
    let op50 = op[50];
    Ok(EvalReport {
        per_frame_iou,
        thresholds,
        op,
        auc,
        op50,
    })
}

/// Write predictions as `x,y,w,h` lines with two decimals.
pub fn write_predictions(path: &Path, boxes: &[BoundingBox]) -> Result<()> {
    let mut text = String::new();
    for b in boxes {
        writeln!(text, "{:.2},{:.2},{:.2},{:.2}", b.x, b.y, b.w, b.h).unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read a predictions file written by [`write_predictions`].
pub fn read_predictions(path: &Path) -> Result<Vec<BoundingBox>> {
    parse_box_file(path)
}

/// Write the success curve as CSV with a trailing summary comment.
pub fn write_metrics(path: &Path, report: &EvalReport) -> Result<()> {
    let mut text = String::from("threshold,op\n");
    for (t, v) in report.thresholds.iter().zip(&report.op) {
        writeln!(text, "{:.2},{:.6}", t, v).unwrap();
    }
    writeln!(text, "# auc={:.6} op50={:.6}", report.auc, report.op50).unwrap();
    fs::write(path, text)?;
    Ok(())
}

/// Parameters of a generated synthetic sequence: a textured rectangle over a
/// darker textured background, translating linearly and scaling
/// geometrically.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub target_w: f64,
    pub target_h: f64,
    /// Translation per frame in pixels, (dx, dy).
    pub motion: (f64, f64),
    /// Multiplicative size change per frame.
    pub scale_rate: f64,
    /// Static distractor patches drawn in the target's intensity band.
    pub clutter: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            frames: 64,
            width: 320,
            height: 240,
            target_w: 24.0,
            target_h: 24.0,
            motion: (3.0, 0.0),
            scale_rate: 1.0,
            clutter: 0,
            seed: 7,
        }
    }
}

impl SynthSpec {
    /// Target box at a given frame: the path is centered in the image so the
    /// start and end excursions are symmetric.
    pub fn target_box(&self, frame: usize) -> BoundingBox {
        let half_span = (self.frames - 1) as f64 / 2.0;
        let t = frame as f64;
        let scale = self.scale_rate.powf(t);
        let tw = self.target_w * scale;
        let th = self.target_h * scale;
        let cx = self.width as f64 / 2.0 + self.motion.0 * (t - half_span);
        let cy = self.height as f64 / 2.0 + self.motion.1 * (t - half_span);
        BoundingBox::new(cx - tw / 2.0, cy - th / 2.0, tw, th)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.frames < 2 {
            return bad("frames must be at least 2".into());
        }
        if self.width < 16 || self.height < 16 {
            return bad("image must be at least 16x16".into());
        }
        if !(self.target_w >= 2.0 && self.target_h >= 2.0) {
            return bad("target must be at least 2x2 pixels".into());
        }
        if !(self.scale_rate > 0.5 && self.scale_rate < 2.0) {
            return bad("scale_rate must be in (0.5, 2)".into());
        }
        for f in 0..self.frames {
            let b = self.target_box(f);
            if b.x < 0.0
                || b.y < 0.0
                || b.x + b.w > self.width as f64
                || b.y + b.h > self.height as f64
            {
                return bad(format!("target exits the frame at frame {}", f + 1));
            }
        }
        Ok(())
    }
}

/// Smooth value-noise texture in `[0, 1]`: random lattice values, smoothstep
/// bilinear interpolation, sampled with an offset so it can ride along with
/// the target.
struct ValueNoise {
    lattice: Vec<f64>,
    size: usize,
    cell: f64,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, cell: f64) -> Self {
        let size = 64usize;
        let lattice = (0..size * size).map(|_| rng.gen::<f64>()).collect();
        ValueNoise {
            lattice,
            size,
            cell,
        }
    }

    fn at(&self, y: f64, x: f64) -> f64 {
        let gx = x / self.cell;
        let gy = y / self.cell;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let tx = gx - x0;
        let ty = gy - y0;
        let wrap = |v: f64| (v as i64).rem_euclid(self.size as i64) as usize;
        let (x0i, y0i) = (wrap(x0), wrap(y0));
        let (x1i, y1i) = (wrap(x0 + 1.0), wrap(y0 + 1.0));
        let v00 = self.lattice[y0i * self.size + x0i];
        let v01 = self.lattice[y0i * self.size + x1i];
        let v10 = self.lattice[y1i * self.size + x0i];
        let v11 = self.lattice[y1i * self.size + x1i];
        let sx = tx * tx * (3.0 - 2.0 * tx);
        let sy = ty * ty * (3.0 - 2.0 * ty);
        (v00 * (1.0 - sx) + v01 * sx) * (1.0 - sy) + (v10 * (1.0 - sx) + v11 * sx) * sy
    }
}

fn overlaps_swept_path(spec: &SynthSpec, bx: f64, by: f64, bw: f64, bh: f64, pad: f64) -> bool {
    for f in 0..spec.frames {
        let t = spec.target_box(f);
        if bx < t.x + t.w + pad
            && bx + bw > t.x - pad
            && by < t.y + t.h + pad
            && by + bh > t.y - pad
        {
            return true;
        }
    }
    false
}

/// Generate a synthetic grayscale sequence under `dir` (frames in `img/`,
/// 1-indexed ground truth file) and return the 0-indexed ground truth.
///
/// Target and clutter pixels lie in `[140, 255]`; background in `[0, 110]`.
pub fn synth_sequence(dir: &Path, spec: &SynthSpec) -> Result<Vec<BoundingBox>> {
    spec.validate()?;
    let img_dir = dir.join("img");
    fs::create_dir_all(&img_dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // The background varies slowly so its gradients stay weak next to the
    // finely textured target; a static background with strong structure
    // would reward matching the scene instead of the target.
    let background = ValueNoise::new(&mut rng, 48.0);
    let target_tex = ValueNoise::new(&mut rng, 3.0);

    // Static distractors in the target band, clear of the target's path so
    // the ground truth stays unambiguous.
    let mut blobs: Vec<(f64, f64, f64, f64)> = Vec::new();
    for _ in 0..spec.clutter {
        let bw = spec.target_w * rng.gen_range(0.7..1.3);
        let bh = spec.target_h * rng.gen_range(0.7..1.3);
        for _ in 0..100 {
            let bx = rng.gen_range(0.0..(spec.width as f64 - bw));
            let by = rng.gen_range(0.0..(spec.height as f64 - bh));
            if !overlaps_swept_path(spec, bx, by, bw, bh, spec.target_w.max(spec.target_h)) {
                blobs.push((bx, by, bw, bh));
                break;
            }
        }
    }

    let mut groundtruth = Vec::with_capacity(spec.frames);
    let mut gt_text = String::new();
    for f in 0..spec.frames {
        let b = spec.target_box(f);
        let scale = spec.scale_rate.powf(f as f64);

        let mut img = image::GrayImage::new(spec.width as u32, spec.height as u32);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let (xf, yf) = (x as f64, y as f64);
                let value = if xf >= b.x && xf < b.x + b.w && yf >= b.y && yf < b.y + b.h {
                    // Texture coordinates follow the target so its appearance
                    // is stable while it moves and scales.
                    140.0 + 115.0 * target_tex.at((yf - b.y) / scale, (xf - b.x) / scale)
                } else if let Some(&(ox, oy, _, _)) = blobs.iter().find(|&&(ox, oy, ow, oh)| {
                    xf >= ox && xf < ox + ow && yf >= oy && yf < oy + oh
                }) {
                    140.0 + 115.0 * target_tex.at(yf - oy, xf - ox)
                } else {
                    110.0 * background.at(yf, xf)
                };
                img.put_pixel(x as u32, y as u32, image::Luma([value.round() as u8]));
            }
        }
        let path = img_dir.join(format!("{:04}.png", f + 1));
        img.save(&path)
            .map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))?;

        writeln!(
            gt_text,
            "{:.2},{:.2},{:.2},{:.2}",
            b.x + 1.0,
            b.y + 1.0,
            b.w,
            b.h
        )
        .unwrap();
        groundtruth.push(b);
    }
    fs::write(dir.join("groundtruth_rect.txt"), gt_text)?;
    Ok(groundtruth)
}
