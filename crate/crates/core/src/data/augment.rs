//! Runtime augmentation: random affine (integer-pixel translation plus
//! x-axis shear, bilinear resampling, zero fill) followed by color jitter
//! (brightness, contrast, saturation, hue rotation in HSV). Fresh randomness
//! is drawn per call; a disabled config is the exact identity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Translation range as a fraction of width/height, sampled per axis in
    /// ±(frac * size) and rounded to whole pixels.
    pub translate_frac: f32,
    /// Shear magnitude in degrees, sampled uniformly in ±shear_deg along x.
    pub shear_deg: f32,
    /// Brightness/contrast/saturation factors sampled in 1 ± value.
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    /// Hue rotation sampled in ±value, as a fraction of the full hue circle.
    pub hue: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            translate_frac: 0.1,
            shear_deg: 20.0,
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
            hue: 0.1,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        AugmentConfig {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let ok = (0.0..=1.0).contains(&self.translate_frac)
            && self.shear_deg.is_finite()
            && self.brightness >= 0.0
            && self.brightness < 1.0
            && self.contrast >= 0.0
            && self.contrast < 1.0
            && self.saturation >= 0.0
            && self.saturation < 1.0
            && (0.0..=0.5).contains(&self.hue);
        if ok {
            Ok(())
        } else {
            Err(DataError::BadManifest {
                line: 0,
                reason: format!("invalid augment config {self:?}"),
            })
        }
    }
}

/// Sampled geometric parameters for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineJitter {
    pub translate_x: f32,
    pub translate_y: f32,
    pub shear_deg: f32,
}

/// Sampled photometric parameters for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorJitter {
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    pub hue_shift: f32,
}

fn sample_range<R: Rng>(rng: &mut R, lo: f32, hi: f32) -> f32 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn sample_affine<R: Rng>(cfg: &AugmentConfig, size: usize, rng: &mut R) -> AffineJitter {
    let max_shift = cfg.translate_frac * size as f32;
    AffineJitter {
        translate_x: sample_range(rng, -max_shift, max_shift).round(),
        translate_y: sample_range(rng, -max_shift, max_shift).round(),
        shear_deg: sample_range(rng, -cfg.shear_deg, cfg.shear_deg),
    }
}

pub fn sample_color<R: Rng>(cfg: &AugmentConfig, rng: &mut R) -> ColorJitter {
    ColorJitter {
        brightness: sample_range(rng, 1.0 - cfg.brightness, 1.0 + cfg.brightness),
        contrast: sample_range(rng, 1.0 - cfg.contrast, 1.0 + cfg.contrast),
        saturation: sample_range(rng, 1.0 - cfg.saturation, 1.0 + cfg.saturation),
        hue_shift: sample_range(rng, -cfg.hue, cfg.hue),
    }
}

/// Apply translation + x shear around the image center with bilinear
/// sampling; out-of-range source positions read as zero. Identity parameters
/// reproduce the input bit-for-bit.
pub fn apply_affine(planes: &[f32], size: usize, jitter: &AffineJitter) -> Vec<f32> {
    let n = size * size;
    debug_assert_eq!(planes.len() % n, 0);
    let channels = planes.len() / n;
    let center = (size as f32 - 1.0) / 2.0;
    let tan_shear = jitter.shear_deg.to_radians().tan();
    let mut out = vec![0.0f32; planes.len()];
    for y in 0..size {
        let dy = y as f32 - center;
        for x in 0..size {
            // invert dst = shear(src - c) + c + t
            let dx = x as f32 - center - jitter.translate_x;
            let dy_t = dy - jitter.translate_y;
            let src_x = dx - tan_shear * dy_t + center;
            let src_y = dy_t + center;
            if src_x < 0.0 || src_y < 0.0 || src_x > (size - 1) as f32 || src_y > (size - 1) as f32
            {
                continue;
            }
            let x0 = src_x.floor() as usize;
            let y0 = src_y.floor() as usize;
            let x1 = (x0 + 1).min(size - 1);
            let y1 = (y0 + 1).min(size - 1);
            let wx = src_x - x0 as f32;
            let wy = src_y - y0 as f32;
            for c in 0..channels {
                let plane = &planes[c * n..(c + 1) * n];
                let top = plane[y0 * size + x0] * (1.0 - wx) + plane[y0 * size + x1] * wx;
                let bottom = plane[y1 * size + x0] * (1.0 - wx) + plane[y1 * size + x1] * wx;
                out[c * n + y * size + x] = top * (1.0 - wy) + bottom * wy;
            }
        }
    }
    out
}

fn clamp01(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

fn rgb_to_hsv(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta).rem_euclid(6.0)) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

const LUMA_R: f32 = 0.299;
const LUMA_G: f32 = 0.587;
const LUMA_B: f32 = 0.114;

/// Brightness, contrast (blend with the mean gray), saturation (blend with
/// per-pixel gray), then hue rotation. Every step clamps to [0, 1]; factors
/// of exactly 1 (and hue 0) leave the image bit-identical.
pub fn apply_color_jitter(planes: &[f32], size: usize, jitter: &ColorJitter) -> Vec<f32> {
    let n = size * size;
    debug_assert_eq!(planes.len(), 3 * n);
    let mut out = planes.to_vec();
    if jitter.brightness != 1.0 {
        for v in out.iter_mut() {
            *v = clamp01(*v * jitter.brightness);
        }
    }
    if jitter.contrast != 1.0 {
        let mut mean_gray = 0.0f64;
        for i in 0..n {
            mean_gray +=
                f64::from(LUMA_R * out[i] + LUMA_G * out[n + i] + LUMA_B * out[2 * n + i]);
        }
        let mean = (mean_gray / n as f64) as f32;
        for v in out.iter_mut() {
            *v = clamp01(jitter.contrast * *v + (1.0 - jitter.contrast) * mean);
        }
    }
    if jitter.saturation != 1.0 {
        for i in 0..n {
            let gray = LUMA_R * out[i] + LUMA_G * out[n + i] + LUMA_B * out[2 * n + i];
            for c in 0..3 {
                let v = &mut out[c * n + i];
                *v = clamp01(jitter.saturation * *v + (1.0 - jitter.saturation) * gray);
            }
        }
    }
    if jitter.hue_shift != 0.0 {
        for i in 0..n {
            let (h, s, v) = rgb_to_hsv(out[i], out[n + i], out[2 * n + i]);
            let (r, g, b) = hsv_to_rgb(h + jitter.hue_shift, s, v);
            out[i] = clamp01(r);
            out[n + i] = clamp01(g);
            out[2 * n + i] = clamp01(b);
        }
    }
    out
}

/// Full augmentation of a `[3, size, size]` tensor in [0, 1]. Disabled
/// configs return the input unchanged.
pub fn augment<R: Rng>(img: &Tensor, cfg: &AugmentConfig, rng: &mut R) -> Result<Tensor, DataError> {
    let shape = img.shape().to_vec();
    if shape.len() != 3 || shape[0] != 3 || shape[1] != shape[2] {
        return Err(DataError::BadChannels(shape.first().copied().unwrap_or(0)));
    }
    if !cfg.enabled {
        return Ok(img.clone());
    }
    let size = shape[1];
    let affine = sample_affine(cfg, size, rng);
    let color = sample_color(cfg, rng);
    let planes = apply_affine(img.data(), size, &affine);
    let out = apply_color_jitter(&planes, size, &color);
    Ok(Tensor::from_vec(&shape, out)?)
}

/// Augment raw channel planes in place of the tensor API; used by the
/// training loop's batch assembly.
pub fn augment_planes<R: Rng>(planes: &[f32], size: usize, cfg: &AugmentConfig, rng: &mut R) -> Vec<f32> {
    if !cfg.enabled {
        return planes.to_vec();
    }
    let affine = sample_affine(cfg, size, rng);
    let color = sample_color(cfg, rng);
    apply_color_jitter(&apply_affine(planes, size, &affine), size, &color)
}
