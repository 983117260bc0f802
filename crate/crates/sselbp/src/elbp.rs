//! The three extended-LBP operators with riu2 mapping and the per-radius
//! joint histogram.
//!
//! Three codes are produced per pixel: CI compares the center against the
//! whole-image mean, NI compares the circle samples against their own mean,
//! and RD compares samples on the outer circle against the paired inner
//! circle (or the central pixel for the innermost radius). The sign rule is
//! s(x) = 1 for x >= 0 everywhere.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::imgio::GrayImage;
use crate::{Error, Result};

/// Inner circle selector for the radial-difference operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerRadius {
    /// Pair the outer circle with the central pixel itself.
    Center,
    /// Pair the outer circle with a smaller circle of this radius.
    Circle(f64),
}

/// Sampling layout shared by all operators: P points per circle and a
/// strictly increasing radius ladder where each radius pairs with the next
/// smaller one (the innermost pairs with the central pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusScheme {
    p: u32,
    radii: Vec<f64>,
}

impl RadiusScheme {
    pub fn new(p: u32, radii: Vec<f64>) -> Result<Self> {
        if !(2..=24).contains(&p) {
            return Err(Error::Parameter(format!(
                "samples per circle must be in 2..=24, got {p}"
            )));
        }
        if radii.is_empty() {
            return Err(Error::Parameter("at least one radius is required".into()));
        }
        for &r in &radii {
            if !(r.is_finite() && r >= 1.0) {
                return Err(Error::Parameter(format!("radii must be >= 1, got {r}")));
            }
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(format!(
                "radii must be strictly increasing, got {radii:?}"
            )));
        }
        Ok(RadiusScheme { p, radii })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of radii in the ladder.
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Inner partner of radius `i`: the central pixel for the first radius,
    /// otherwise the previous radius.
    pub fn inner_radius(&self, i: usize) -> InnerRadius {
        if i == 0 {
            InnerRadius::Center
        } else {
            InnerRadius::Circle(self.radii[i - 1])
        }
    }

    /// Common valid-region margin: every per-radius histogram counts the same
    /// pixel set, so the margin comes from the largest radius.
    pub fn margin(&self) -> usize {
        self.radii
            .last()
            .map(|r| r.ceil() as usize)
            .unwrap_or(0)
    }
}

/// Lookup table collapsing P-bit words to rotation-invariant uniform codes:
/// words with at most two circular 0/1 transitions map to their popcount,
/// everything else to the catch-all value P+1.
#[derive(Debug, Clone, PartialEq)]
pub struct Riu2Table {
    p: u32,
    map: Vec<u8>,
}

/// Builds the riu2 mapping for P-bit patterns.
pub fn build_riu2_table(p: u32) -> Riu2Table {
    assert!((2..=24).contains(&p), "bit count must be in 2..=24, got {p}");
    let size = 1usize << p;
    let map = (0..size as u32)
        .map(|word| {
            let rotated = ((word << 1) | (word >> (p - 1))) & ((size - 1) as u32);
            let transitions = (word ^ rotated).count_ones();
            if transitions <= 2 {
                word.count_ones() as u8
            } else {
                (p + 1) as u8
            }
        })
        .collect();
    Riu2Table { p, map }
}

impl Riu2Table {
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn code(&self, word: u32) -> u32 {
        u32::from(self.map[word as usize])
    }
}

/// Coordinates snap to the integer grid within this distance, keeping on-axis
/// neighbors free of interpolation noise.
pub const GRID_SNAP_EPS: f64 = 1e-6;

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < GRID_SNAP_EPS {
        r
    } else {
        v
    }
}

/// Offsets of the P circle points relative to the center: point p sits at
/// angle 2*pi*p/P from due east, counterclockwise with image rows growing
/// downward. When P is divisible by four the table is derived from one
/// quadrant by exact sign swaps, so a 90-degree rotation permutes the entries
/// without any floating-point drift.
pub fn circle_offsets(p: u32, radius: f64) -> Vec<(f64, f64)> {
    let n = p as usize;
    let mut offsets = vec![(0.0, 0.0); n];
    if n.is_multiple_of(4) {
        let quarter = n / 4;
        for i in 0..quarter {
            let angle = 2.0 * PI * i as f64 / n as f64;
            let a = snap(radius * angle.cos());
            let b = snap(radius * angle.sin());
            offsets[i] = (a, -b);
            offsets[i + quarter] = (-b, -a);
            offsets[i + 2 * quarter] = (-a, b);
            offsets[i + 3 * quarter] = (b, a);
        }
    } else {
        for (i, slot) in offsets.iter_mut().enumerate() {
            let angle = 2.0 * PI * i as f64 / n as f64;
            *slot = (snap(radius * angle.cos()), snap(-radius * angle.sin()));
        }
    }
    offsets
}

/// Per-point bilinear tap: integer corner offset plus fractional weights.
#[derive(Debug, Clone, Copy)]
struct SampleTap {
    ox: isize,
    oy: isize,
    fx: f64,
    fy: f64,
}

/// Precomputed circle taps reused across every pixel of an image.
#[derive(Debug, Clone)]
pub(crate) struct CircleSampler {
    taps: Vec<SampleTap>,
}

impl CircleSampler {
    pub(crate) fn new(p: u32, radius: f64) -> Self {
        let taps = circle_offsets(p, radius)
            .into_iter()
            .map(|(dx, dy)| {
                let ox = dx.floor();
                let oy = dy.floor();
                SampleTap {
                    ox: ox as isize,
                    oy: oy as isize,
                    fx: dx - ox,
                    fy: dy - oy,
                }
            })
            .collect();
        CircleSampler { taps }
    }

    /// Writes the P interpolated neighbor values for the circle centered at
    /// (cx, cy). The caller guarantees the circle lies inside the image.
    #[inline]
    pub(crate) fn sample(&self, img: &GrayImage, cx: usize, cy: usize, out: &mut [f64]) {
        let (w, h) = (img.width() as isize, img.height() as isize);
        for (tap, slot) in self.taps.iter().zip(out.iter_mut()) {
            let x0 = cx as isize + tap.ox;
            let y0 = cy as isize + tap.oy;
            debug_assert!(
                x0 >= 0
                    && y0 >= 0
                    && x0 + isize::from(tap.fx > 0.0) < w
                    && y0 + isize::from(tap.fy > 0.0) < h,
                "circle sample out of bounds at center ({cx}, {cy})"
            );
            // the +1 corners are clamped; their weight is exactly zero
            // whenever the clamp can engage (fractional part 0)
            let x1 = (x0 + 1).min(w - 1) as usize;
            let y1 = (y0 + 1).min(h - 1) as usize;
            let (x0, y0) = (x0 as usize, y0 as usize);
            let v00 = img.pixel(x0, y0);
            let v10 = img.pixel(x1, y0);
            let v01 = img.pixel(x0, y1);
            let v11 = img.pixel(x1, y1);
            *slot = v00
                + tap.fx * (v10 - v00)
                + tap.fy * (v01 - v00)
                + tap.fx * tap.fy * (v11 - v10 - v01 + v00);
        }
    }
}

/// Samples P evenly spaced neighbors on the circle of the given radius around
/// (cx, cy), bilinearly interpolated. The circle must lie inside the image.
pub fn sample_circle(img: &GrayImage, cx: usize, cy: usize, radius: f64, p: u32) -> Vec<f64> {
    let sampler = CircleSampler::new(p, radius);
    let mut out = vec![0.0; p as usize];
    sampler.sample(img, cx, cy, &mut out);
    out
}

/// Center-intensity bit: 1 when the pixel is at least the whole-image mean.
#[inline]
pub fn elbp_ci(center_value: f64, image_mean: f64) -> u32 {
    u32::from(center_value >= image_mean)
}

/// Neighbor-intensity code: each sample compared against the samples' own
/// mean, assembled with bit p worth 2^p, then riu2-mapped.
#[inline]
pub fn elbp_ni(neighbors: &[f64], table: &Riu2Table) -> u32 {
    debug_assert_eq!(neighbors.len(), table.p() as usize);
    let mean = neighbors.iter().sum::<f64>() / neighbors.len() as f64;
    let mut word = 0u32;
    for (bit, &g) in neighbors.iter().enumerate() {
        word |= u32::from(g >= mean) << bit;
    }
    table.code(word)
}

/// Radial-difference code: outer samples compared pointwise against inner
/// ones, then riu2-mapped. For the innermost radius pass the center value
/// replicated P times as `inner`.
#[inline]
pub fn elbp_rd(outer: &[f64], inner: &[f64], table: &Riu2Table) -> u32 {
    debug_assert_eq!(outer.len(), table.p() as usize);
    debug_assert_eq!(outer.len(), inner.len());
    let mut word = 0u32;
    for (bit, (&o, &i)) in outer.iter().zip(inner).enumerate() {
        word |= u32::from(o >= i) << bit;
    }
    table.code(word)
}

/// Joint histogram bin count for one (P, R) pair: 2*(P+2)^2.
pub fn histogram_len(p: u32) -> usize {
    let k = (p + 2) as usize;
    2 * k * k
}

/// Flat bin index for a (ci, ni, rd) code triple.
#[inline]
pub fn bin_index(p: u32, ci: u32, ni: u32, rd: u32) -> usize {
    let k = (p + 2) as usize;
    (ci as usize) * k * k + (ni as usize) * k + rd as usize
}

/// Joint CI x NI x RD histogram for one (P, R) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    p: u32,
    bins: Vec<u64>,
}

impl JointHistogram {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    /// Number of pixels encoded.
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

/// Accumulates the joint histogram over every pixel whose coordinates lie in
/// [margin, dim - margin). The CI reference mean is taken over the entire
/// image, not just the valid region.
pub fn joint_histogram(
    img: &GrayImage,
    radius: f64,
    inner: InnerRadius,
    margin: usize,
    table: &Riu2Table,
) -> Result<JointHistogram> {
    let p = table.p();
    if !(radius.is_finite() && radius >= 1.0) {
        return Err(Error::Parameter(format!("radius must be >= 1, got {radius}")));
    }
    if (margin as f64) < radius.ceil() {
        return Err(Error::Parameter(format!(
            "margin {margin} is smaller than the sampling radius {radius}"
        )));
    }
    if let InnerRadius::Circle(r) = inner {
        if !(r.is_finite() && r >= 1.0 && r < radius) {
            return Err(Error::Parameter(format!(
                "inner radius {r} must be >= 1 and smaller than the outer radius {radius}"
            )));
        }
    }
    let (w, h) = (img.width(), img.height());
    if w <= 2 * margin || h <= 2 * margin {
        return Err(Error::Parameter(format!(
            "image {w}x{h} too small for margin {margin}"
        )));
    }

    let image_mean = img.mean();
    let outer_sampler = CircleSampler::new(p, radius);
    let inner_sampler = match inner {
        InnerRadius::Circle(r) => Some(CircleSampler::new(p, r)),
        InnerRadius::Center => None,
    };
    let len = histogram_len(p);
    let np = p as usize;

    // one private histogram per row chunk, merged by integer addition, so
    // the result is independent of how rayon partitions the rows
    let bins = (margin..h - margin)
        .into_par_iter()
        .fold(
            || vec![0u64; len],
            |mut acc, y| {
                let mut outer_buf = vec![0.0f64; np];
                let mut inner_buf = vec![0.0f64; np];
                for x in margin..w - margin {
                    let center = img.pixel(x, y);
                    let ci = elbp_ci(center, image_mean);
                    outer_sampler.sample(img, x, y, &mut outer_buf);
                    let ni = elbp_ni(&outer_buf, table);
                    match &inner_sampler {
                        Some(sampler) => sampler.sample(img, x, y, &mut inner_buf),
                        None => inner_buf.fill(center),
                    }
                    let rd = elbp_rd(&outer_buf, &inner_buf, table);
                    acc[bin_index(p, ci, ni, rd)] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    Ok(JointHistogram { p, bins })
}
