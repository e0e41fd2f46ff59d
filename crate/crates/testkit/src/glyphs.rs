//! Synthetic glyph datasets: three visually distinct stroke patterns
//! (horizontal bar, vertical bar, filled disk) with per-sample geometric
//! jitter, dark on a light background like scanned handwriting.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use bornovit::data::LabeledImage;
use bornovit::rng::stream;

pub const GLYPH_CLASSES: [&str; 3] = ["bar_h", "bar_v", "disk"];

const BG: u8 = 245;
const INK: u8 = 15;

/// One grayscale glyph, `size x size`.
pub fn glyph_pixels(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut img = vec![BG; size * size];
    let jitter = |rng: &mut ChaCha8Rng, span: f32| -> i32 {
        (rng.random_range(-span..=span) * size as f32) as i32
    };
    let center = size as i32 / 2;
    match class {
        0 => {
            let c = center + jitter(rng, 0.12);
            let half = (size as f32 * rng.random_range(0.08..0.16)) as i32;
            for y in (c - half).max(0)..(c + half).min(size as i32) {
                for x in (size / 8)..(size - size / 8) {
                    img[y as usize * size + x] = INK;
                }
            }
        }
        1 => {
            let c = center + jitter(rng, 0.12);
            let half = (size as f32 * rng.random_range(0.08..0.16)) as i32;
            for x in (c - half).max(0)..(c + half).min(size as i32) {
                for y in (size / 8)..(size - size / 8) {
                    img[y * size + x as usize] = INK;
                }
            }
        }
        _ => {
            let cy = center + jitter(rng, 0.1);
            let cx = center + jitter(rng, 0.1);
            let r = (size as f32 * rng.random_range(0.18..0.28)) as i32;
            for y in 0..size as i32 {
                for x in 0..size as i32 {
                    if (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r {
                        img[y as usize * size + x as usize] = INK;
                    }
                }
            }
        }
    }
    img
}

/// In-memory dataset: `per_class` samples of each glyph class.
pub fn glyph_dataset(per_class: usize, size: usize, seed: u64) -> (Vec<LabeledImage>, Vec<String>) {
    let class_names: Vec<String> = GLYPH_CLASSES.iter().map(|s| s.to_string()).collect();
    let mut samples = Vec::with_capacity(3 * per_class);
    for (label, name) in class_names.iter().enumerate() {
        for i in 0..per_class {
            let mut rng = stream(seed, &[label as u64, i as u64]);
            samples.push(LabeledImage {
                pixels: glyph_pixels(label, size, &mut rng),
                height: size,
                width: size,
                channels: 1,
                label,
                class_name: name.clone(),
                source_path: format!("<glyph:{name}:{i}>"),
            });
        }
    }
    (samples, class_names)
}

/// Write the dataset as an image-folder tree of PNGs.
pub fn write_glyph_dataset(
    root: &Path,
    per_class: usize,
    size: usize,
    seed: u64,
) -> io::Result<()> {
    for (label, name) in GLYPH_CLASSES.iter().enumerate() {
        let dir = root.join(name);
        fs::create_dir_all(&dir)?;
        for i in 0..per_class {
            let mut rng = stream(seed, &[label as u64, i as u64]);
            let pixels = glyph_pixels(label, size, &mut rng);
            let img: image::GrayImage =
                image::ImageBuffer::from_raw(size as u32, size as u32, pixels)
                    .expect("buffer matches");
            img.save(dir.join(format!("{name}_{i:03}.png")))
                .map_err(|e| io::Error::other(e.to_string()))?;
        }
    }
    Ok(())
}
