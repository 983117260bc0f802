//! Gaussian scale-space construction via separable convolution with
//! replicate borders.

use rayon::prelude::*;

use crate::imgio::GrayImage;
use crate::{Error, Result};

/// Normalized 1-D Gaussian taps; the 2-D filter is their outer product.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    taps: Vec<f64>,
    sigma: f64,
}

impl GaussianKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Taps cover offsets -half_width..=half_width.
    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }
}

/// Builds a unit-sum Gaussian kernel truncated at ceil(3*sigma).
pub fn gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    let half = (3.0 * sigma).ceil() as usize;
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let d = i as f64 - half as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(GaussianKernel { taps, sigma })
}

/// Smooths an image with a separable pass per axis (horizontal then
/// vertical), extending borders by replication. Output pixels depend only on
/// their own tap sums, so row-parallel execution is deterministic.
pub fn smooth(img: &GrayImage, kernel: &GaussianKernel) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let taps = kernel.taps();
    let half = kernel.half_width() as isize;

    let mut horizontal = vec![0.0f64; w * h];
    horizontal
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, out_row)| {
            let row = &img.data()[y * w..(y + 1) * w];
            for (x, out) in out_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &tap) in taps.iter().enumerate() {
                    let ix = (x as isize + t as isize - half).clamp(0, w as isize - 1) as usize;
                    acc += tap * row[ix];
                }
                *out = acc;
            }
        });

    let mut vertical = vec![0.0f64; w * h];
    vertical
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, out_row)| {
            for (x, out) in out_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &tap) in taps.iter().enumerate() {
                    let iy = (y as isize + t as isize - half).clamp(0, h as isize - 1) as usize;
                    acc += tap * horizontal[iy * w + x];
                }
                *out = acc;
            }
        });

    GrayImage::new(w, h, vertical).expect("smoothing preserves dimensions and finiteness")
}

/// Progressively smoothed copies of one image; level 0 is the input itself.
#[derive(Debug, Clone)]
pub struct ScaleSpace {
    levels: Vec<GrayImage>,
    sigma: f64,
}

impl ScaleSpace {
    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Builds `levels` images where each level after the first applies one more
/// smoothing pass with the same per-step sigma.
pub fn build_scale_space(img: &GrayImage, levels: usize, sigma: f64) -> Result<ScaleSpace> {
    if levels == 0 {
        return Err(Error::Parameter("scale space needs at least one level".into()));
    }
    let kernel = gaussian_kernel(sigma)?;
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for _ in 1..levels {
        let next = smooth(out.last().expect("non-empty"), &kernel);
        out.push(next);
    }
    Ok(ScaleSpace { levels: out, sigma })
}
