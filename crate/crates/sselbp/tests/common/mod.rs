//! Helpers shared by the integration suites: seeded image generators, a
//! synthetic two-class dataset writer, and an independent per-pixel
//! histogram reference.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use sselbp::elbp::circle_offsets;
use sselbp::imgio::GrayImage;

/// Small deterministic generator (64-bit state, golden-gamma increment,
/// xor-multiply output mix) so every test pixel is reproducible.
pub struct TestRng {
    state: u64,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_byte(&mut self) -> u8 {
        (self.next_u64() & 0xFF) as u8
    }

    /// Uniform draw from [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Pseudo-random image with independent integer pixels in 0..=255.
pub fn seeded_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = TestRng::new(seed);
    GrayImage::from_fn(w, h, |_, _| f64::from(rng.next_byte()))
}

/// Writes an image as binary 8-bit PGM, rounding and clamping to 0..=255.
pub fn write_pgm(path: &Path, img: &GrayImage) {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(
        img.data()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, bytes).unwrap();
}

/// Smooth linear ramp with a seeded orientation and amplitude; the texture
/// varies slowly everywhere.
pub fn gradient_image(size: usize, index: usize, per_class: usize) -> GrayImage {
    let mut rng = TestRng::new(1000 + index as u64);
    let angle = std::f64::consts::TAU * index as f64 / per_class as f64
        + 0.2 * (rng.next_f64() - 0.5);
    let amplitude = 40.0 + 50.0 * rng.next_f64();
    let center = (size as f64 - 1.0) / 2.0;
    GrayImage::from_fn(size, size, |x, y| {
        let along = (x as f64 - center) * angle.cos() + (y as f64 - center) * angle.sin();
        (128.0 + amplitude * along / center).round().clamp(0.0, 255.0)
    })
}

/// Independent uniform noise in every pixel.
pub fn noise_image(size: usize, index: usize) -> GrayImage {
    seeded_image(size, size, 2000 + index as u64)
}

/// Two-class synthetic dataset: smooth gradients against per-pixel noise,
/// written as 64x64 PGM files under class subdirectories.
pub fn write_synthetic_dataset(root: &Path, per_class: usize) {
    let gradient_dir = root.join("gradient");
    let noise_dir = root.join("noise");
    fs::create_dir_all(&gradient_dir).unwrap();
    fs::create_dir_all(&noise_dir).unwrap();
    for i in 0..per_class {
        write_pgm(
            &gradient_dir.join(format!("{i:02}.pgm")),
            &gradient_image(64, i, per_class),
        );
        write_pgm(&noise_dir.join(format!("{i:02}.pgm")), &noise_image(64, i));
    }
}

/// Reference riu2 mapping by explicit circular transition counting.
pub fn oracle_riu2(word: u32, p: u32) -> u32 {
    let mut transitions = 0;
    for bit in 0..p {
        let a = (word >> bit) & 1;
        let b = (word >> ((bit + 1) % p)) & 1;
        if a != b {
            transitions += 1;
        }
    }
    if transitions <= 2 {
        word.count_ones()
    } else {
        p + 1
    }
}

/// Reference circle sampling: per-point bilinear interpolation evaluated
/// directly from the shared offset table, one value at a time. Fractional
/// parts are taken from the offsets and the interpolation uses the
/// difference form; both are part of the pipeline definition.
pub fn oracle_sample(img: &GrayImage, cx: usize, cy: usize, radius: f64, p: u32) -> Vec<f64> {
    circle_offsets(p, radius)
        .into_iter()
        .map(|(dx, dy)| {
            let fx = dx - dx.floor();
            let fy = dy - dy.floor();
            let x0 = (cx as isize + dx.floor() as isize) as usize;
            let y0 = (cy as isize + dy.floor() as isize) as usize;
            let x1 = (x0 + 1).min(img.width() - 1);
            let y1 = (y0 + 1).min(img.height() - 1);
            let v00 = img.pixel(x0, y0);
            let v10 = img.pixel(x1, y0);
            let v01 = img.pixel(x0, y1);
            let v11 = img.pixel(x1, y1);
            v00 + fx * (v10 - v00) + fy * (v01 - v00) + fx * fy * (v11 - v10 - v01 + v00)
        })
        .collect()
}

/// Naive double-loop joint histogram: every code recomputed per pixel with
/// no tables, precomputation, or parallelism.
pub fn oracle_joint_histogram(
    img: &GrayImage,
    radius: f64,
    inner: Option<f64>,
    margin: usize,
    p: u32,
) -> Vec<u64> {
    let k = (p + 2) as usize;
    let mut bins = vec![0u64; 2 * k * k];
    let total: f64 = img.data().iter().sum();
    let image_mean = total / img.data().len() as f64;
    for y in margin..img.height() - margin {
        for x in margin..img.width() - margin {
            let center = img.pixel(x, y);
            let outer = oracle_sample(img, x, y, radius, p);
            let inner_vals = match inner {
                Some(r) => oracle_sample(img, x, y, r, p),
                None => vec![center; p as usize],
            };

            let ci = u32::from(center >= image_mean);
            let mean = outer.iter().sum::<f64>() / p as f64;
            let mut ni_word = 0u32;
            let mut rd_word = 0u32;
            for bit in 0..p as usize {
                ni_word |= u32::from(outer[bit] >= mean) << bit;
                rd_word |= u32::from(outer[bit] >= inner_vals[bit]) << bit;
            }
            let ni = oracle_riu2(ni_word, p);
            let rd = oracle_riu2(rd_word, p);
            bins[(ci as usize) * k * k + (ni as usize) * k + rd as usize] += 1;
        }
    }
    bins
}
