//! Structured corruption of character images.
//!
//! Type 1 draws a few full-span horizontal or vertical lines and sine
//! curves; type 2 draws random-walk strokes until a target fraction of the
//! image is covered. Both build a boolean mask and composite it with
//! `max(pixel, intensity)`, so corruption never darkens a pixel.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::data::ImageDataset;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NoiseKind {
    Type1,
    Type2,
}

/// Lines and sine waves.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Type1Params {
    pub min_elems: usize,
    pub max_elems: usize,
    pub line_thickness: usize,
    /// Amplitude bounds in pixels; `None` means `[2, height / 4]`.
    pub sine_amplitude_range: Option<[f64; 2]>,
    /// Period bounds in pixels; `None` means `[8, width]`.
    pub sine_period_range: Option<[f64; 2]>,
    /// Relative weights of horizontal, vertical and sine elements.
    pub orientation_weights: [f64; 3],
}

impl Default for Type1Params {
    fn default() -> Self {
        Type1Params {
            min_elems: 1,
            max_elems: 3,
            line_thickness: 1,
            sine_amplitude_range: None,
            sine_period_range: None,
            orientation_weights: [1.0, 1.0, 1.0],
        }
    }
}

/// Random-walk strokes.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Type2Params {
    pub coverage_target: f64,
    pub stroke_width: usize,
    pub step_length: f64,
    /// Largest heading change per step, radians.
    pub max_turn: f64,
}

impl Default for Type2Params {
    fn default() -> Self {
        Type2Params {
            coverage_target: 0.5,
            stroke_width: 2,
            step_length: 1.0,
            max_turn: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Value written onto corrupted pixels.
    pub intensity: f64,
    pub type1: Type1Params,
    pub type2: Type2Params,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            kind: NoiseKind::Type1,
            intensity: 1.0,
            type1: Type1Params::default(),
            type2: Type2Params::default(),
        }
    }
}

impl NoiseSpec {
    pub fn type1() -> Self {
        NoiseSpec::default()
    }

    pub fn type2() -> Self {
        NoiseSpec {
            kind: NoiseKind::Type2,
            ..NoiseSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::contract(format!("noise spec: {msg}")));
        if !(0.0..=1.0).contains(&self.intensity) {
            return bad("intensity must lie in [0, 1]");
        }
        let t1 = &self.type1;
        if t1.min_elems > t1.max_elems {
            return bad("min_elems exceeds max_elems");
        }
        if t1.line_thickness == 0 {
            return bad("line_thickness must be at least 1");
        }
        let w = t1.orientation_weights;
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
            return bad("orientation weights must be nonnegative with a positive sum");
        }
        for range in [t1.sine_amplitude_range, t1.sine_period_range].into_iter().flatten() {
            if !(range[0] <= range[1]) || range[0] < 0.0 {
                return bad("sine ranges must be ordered and nonnegative");
            }
        }
        if t1.sine_period_range.is_some_and(|r| r[0] <= 0.0) {
            return bad("sine period must be positive");
        }
        let t2 = &self.type2;
        if !(t2.coverage_target > 0.0 && t2.coverage_target <= 1.0) {
            return bad("coverage_target must lie in (0, 1]");
        }
        if t2.stroke_width == 0 {
            return bad("stroke_width must be at least 1");
        }
        if !(t2.step_length > 0.0) || !(t2.max_turn >= 0.0) {
            return bad("step_length must be positive and max_turn nonnegative");
        }
        Ok(())
    }
}

/// Pixel mask over a `width x height` image, row-major.
struct Mask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
    covered: usize,
}

impl Mask {
    fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            cells: vec![false; width * height],
            covered: 0,
        }
    }

    fn mark(&mut self, x: isize, y: isize) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let cell = &mut self.cells[y as usize * self.width + x as usize];
        if !*cell {
            *cell = true;
            self.covered += 1;
        }
    }

    fn fraction(&self) -> f64 {
        self.covered as f64 / self.cells.len() as f64
    }

    fn apply(&self, image: &[f64], intensity: f64) -> Vec<f64> {
        image
            .iter()
            .zip(&self.cells)
            .map(|(&p, &m)| if m { p.max(intensity) } else { p })
            .collect()
    }
}

fn check_image(image: &[f64], width: usize, height: usize) -> Result<()> {
    if width < 4 || height < 4 {
        return Err(Error::UnsupportedSize { width, height });
    }
    if image.len() != width * height {
        return Err(Error::contract(format!(
            "image has {} pixels, expected {width}x{height}",
            image.len()
        )));
    }
    Ok(())
}

fn type1_mask(width: usize, height: usize, p: &Type1Params, rng: &mut Rng) -> Mask {
    let mut mask = Mask::new(width, height);
    let t = p.line_thickness;
    let [amp_lo, amp_hi] = p.sine_amplitude_range.unwrap_or([2.0, height as f64 / 4.0]);
    let [per_lo, per_hi] = p.sine_period_range.unwrap_or([8.0, width as f64]);
    let total: f64 = p.orientation_weights.iter().sum();

    let count = rng.range_inclusive(p.min_elems, p.max_elems);
    for _ in 0..count {
        let u = rng.next_f64() * total;
        let [wh, wv, _] = p.orientation_weights;
        if u < wh {
            let row = rng.below(height.saturating_sub(t) + 1) as isize;
            for y in row..row + t as isize {
                for x in 0..width as isize {
                    mask.mark(x, y);
                }
            }
        } else if u < wh + wv {
            let col = rng.below(width.saturating_sub(t) + 1) as isize;
            for x in col..col + t as isize {
                for y in 0..height as isize {
                    mask.mark(x, y);
                }
            }
        } else {
            let amplitude = rng.uniform(amp_lo, amp_hi);
            let period = rng.uniform(per_lo, per_hi);
            let phase = rng.uniform(0.0, 2.0 * PI);
            let (lo, hi) = (amplitude, height as f64 - 1.0 - amplitude);
            let base = if lo <= hi {
                rng.uniform(lo, hi)
            } else {
                rng.next_f64();
                (height as f64 - 1.0) / 2.0
            };
            let mut prev: Option<isize> = None;
            for x in 0..width {
                let yf = base + amplitude * libm::sin(2.0 * PI * x as f64 / period + phase);
                let y = libm::round(yf) as isize;
                let (from, to) = match prev {
                    Some(py) => (py.min(y), py.max(y)),
                    None => (y, y),
                };
                for yy in from..=to {
                    for k in 0..t as isize {
                        mask.mark(x as isize, yy + k);
                    }
                }
                prev = Some(y);
            }
        }
    }
    mask
}

fn type2_mask(width: usize, height: usize, p: &Type2Params, max_attempts: usize, rng: &mut Rng) -> Result<Mask> {
    let mut mask = Mask::new(width, height);
    let target = p.coverage_target;
    let offset = (p.stroke_width as isize - 1) / 2;
    let mut attempts = 0;
    while mask.fraction() < target {
        if attempts >= max_attempts {
            return Err(Error::CoverageNotReached {
                attempts,
                coverage: mask.fraction(),
                target,
            });
        }
        attempts += 1;
        let mut x = rng.uniform(0.0, width as f64);
        let mut y = rng.uniform(0.0, height as f64);
        let mut heading = rng.uniform(0.0, 2.0 * PI);
        let steps = rng.range_inclusive(width / 2, 2 * width);
        for step in 0..=steps {
            let (cx, cy) = (libm::floor(x) as isize - offset, libm::floor(y) as isize - offset);
            for dy in 0..p.stroke_width as isize {
                for dx in 0..p.stroke_width as isize {
                    mask.mark(cx + dx, cy + dy);
                }
            }
            if step == steps {
                break;
            }
            heading += rng.uniform(-p.max_turn, p.max_turn);
            x += libm::cos(heading) * p.step_length;
            y += libm::sin(heading) * p.step_length;
        }
    }
    Ok(mask)
}

/// One corrupted image and the fraction of its pixels under the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Corruption {
    pub image: Vec<f64>,
    pub mask_fraction: f64,
}

pub fn corrupt_type1(
    image: &[f64],
    width: usize,
    height: usize,
    spec: &NoiseSpec,
    rng: &mut Rng,
) -> Result<Corruption> {
    check_image(image, width, height)?;
    let mask = type1_mask(width, height, &spec.type1, rng);
    Ok(Corruption {
        image: mask.apply(image, spec.intensity),
        mask_fraction: mask.fraction(),
    })
}

pub fn corrupt_type2(
    image: &[f64],
    width: usize,
    height: usize,
    spec: &NoiseSpec,
    rng: &mut Rng,
) -> Result<Corruption> {
    check_image(image, width, height)?;
    let mask = type2_mask(width, height, &spec.type2, 10 * width * height, rng)?;
    Ok(Corruption {
        image: mask.apply(image, spec.intensity),
        mask_fraction: mask.fraction(),
    })
}

/// Dispatches on `spec.kind`.
pub fn corrupt(image: &[f64], width: usize, height: usize, spec: &NoiseSpec, rng: &mut Rng) -> Result<Corruption> {
    match spec.kind {
        NoiseKind::Type1 => corrupt_type1(image, width, height, spec, rng),
        NoiseKind::Type2 => corrupt_type2(image, width, height, spec, rng),
    }
}

/// Noisy images for a whole dataset plus per-image mask coverage.
#[derive(Clone, Debug, PartialEq)]
pub struct CorruptedSet {
    pub noisy: Matrix,
    pub mask_fractions: Vec<f64>,
}

/// Corrupts every image `replication` times. Output row `i * replication + j`
/// is copy `j` of image `i`, drawn from the child seed
/// `derive_seed(seed, i * replication + j)`, so rows are independent of
/// processing order.
pub fn corrupt_images(
    images: &Matrix,
    width: usize,
    height: usize,
    spec: &NoiseSpec,
    seed: u64,
    replication: usize,
) -> Result<CorruptedSet> {
    spec.validate()?;
    if replication == 0 {
        return Err(Error::contract("replication factor must be at least 1"));
    }
    let rows = images.rows() * replication;
    let mut data = Vec::with_capacity(rows * images.cols());
    let mut mask_fractions = Vec::with_capacity(rows);
    for i in 0..images.rows() {
        for j in 0..replication {
            let index = (i * replication + j) as u64;
            let mut rng = Rng::new(derive_seed(seed, index));
            let c = corrupt(images.row(i), width, height, spec, &mut rng)?;
            data.extend_from_slice(&c.image);
            mask_fractions.push(c.mask_fraction);
        }
    }
    Ok(CorruptedSet {
        noisy: Matrix::new(rows, images.cols(), data)?,
        mask_fractions,
    })
}

/// N*r noisy images for `dataset`; pair with `dataset.replicate(r)`.
pub fn corrupt_dataset(dataset: &ImageDataset, spec: &NoiseSpec, seed: u64, replication: usize) -> Result<Matrix> {
    corrupt_images(
        dataset.images(),
        dataset.width(),
        dataset.height(),
        spec,
        seed,
        replication,
    )
    .map(|c| c.noisy)
}
