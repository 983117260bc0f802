//! Image decoding and the zero-mean/unit-variance normalization that anchors
//! the descriptor pipeline.

use std::path::Path;

use crate::{Error, Result};

/// A grayscale image holding row-major double-precision intensities.
///
/// Every operator in the pipeline consumes and produces this type; intensities
/// stay in `f64` from decode onward.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major data, validating dimensions and
    /// rejecting non-finite intensities.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "image data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter(
                "image data contains NaN or infinite values".into(),
            ));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Fills a `width` x `height` image from a pixel function of (x, y).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Mean intensity over the entire image, accumulated in row-major order so
    /// the result is independent of any worker scheduling elsewhere.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// 90-degree counterclockwise rotation.
    pub fn rotate90(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(h, w, |x, y| self.pixel(w - 1 - y, x))
    }
}

/// Decodes a PNG or binary PGM file to a grayscale image with values in
/// [0, 255]. Color inputs are reduced with BT.601 luminance weights
/// (0.299, 0.587, 0.114).
pub fn load_grayscale(path: &Path) -> Result<GrayImage> {
    let decoded = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::format(path, other.to_string()),
    })?;

    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::format(path, "image has zero width or height"));
    }
    let data = match decoded {
        image::DynamicImage::ImageLuma8(buf) => {
            buf.into_raw().into_iter().map(f64::from).collect()
        }
        image::DynamicImage::ImageLumaA8(buf) => buf
            .pixels()
            .map(|px| f64::from(px.0[0]))
            .collect(),
        image::DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|px| luminance(px.0[0], px.0[1], px.0[2]))
            .collect(),
        image::DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|px| luminance(px.0[0], px.0[1], px.0[2]))
            .collect(),
        other => {
            return Err(Error::format(
                path,
                format!("unsupported pixel format {:?}; expected 8-bit gray or RGB", other.color()),
            ))
        }
    };
    GrayImage::new(w, h, data)
}

/// BT.601 luma from 8-bit channels, exact for equal-channel grays.
#[inline]
fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (299.0 * f64::from(r) + 587.0 * f64::from(g) + 114.0 * f64::from(b)) / 1000.0
}

/// Shifts and scales intensities to zero mean and unit population variance.
/// A constant image maps to all zeros.
pub fn normalize_image(img: &GrayImage) -> GrayImage {
    let n = img.data.len() as f64;
    let mean = img.mean();
    let variance = img.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = variance.sqrt();
    let data = if std == 0.0 {
        vec![0.0; img.data.len()]
    } else {
        img.data.iter().map(|v| (v - mean) / std).collect()
    };
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    fn gray(width: usize, height: usize, data: Vec<f64>) -> GrayImage {
        GrayImage::new(width, height, data).unwrap()
    }

    #[test]
    fn rejects_mismatched_data_length() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
        assert!(GrayImage::new(2, 1, vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn loads_binary_pgm_bytes_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.pgm");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"P5\n2 2\n255\n").unwrap();
        f.write_all(&[0u8, 255, 255, 0]).unwrap();
        drop(f);

        let img = load_grayscale(&path).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0.0, 255.0, 255.0, 0.0]);
    }

    #[test]
    fn loads_gray_png_and_equal_channel_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let gray_path = dir.path().join("gray.png");
        image::save_buffer(&gray_path, &[100u8, 7, 255, 0], 2, 2, image::ColorType::L8).unwrap();
        let img = load_grayscale(&gray_path).unwrap();
        assert_eq!(img.data(), &[100.0, 7.0, 255.0, 0.0]);

        let rgb_path = dir.path().join("rgb.png");
        image::save_buffer(
            &rgb_path,
            &[100, 100, 100, 10, 20, 30],
            2,
            1,
            image::ColorType::Rgb8,
        )
        .unwrap();
        let img = load_grayscale(&rgb_path).unwrap();
        // equal channels pass through exactly; mixed channels use BT.601
        assert_eq!(img.pixel(0, 0), 100.0);
        assert_relative_eq!(
            img.pixel(1, 0),
            (299.0 * 10.0 + 587.0 * 20.0 + 114.0 * 30.0) / 1000.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_grayscale(Path::new("/nonexistent/missing.png")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "got {err:?}");
    }

    #[test]
    fn normalize_constant_image_is_all_zeros() {
        let img = gray(2, 2, vec![1.0; 4]);
        assert_eq!(normalize_image(&img).data(), &[0.0; 4]);
    }

    #[test]
    fn normalize_two_pixel_image() {
        let img = gray(2, 1, vec![0.0, 2.0]);
        assert_eq!(normalize_image(&img).data(), &[-1.0, 1.0]);
    }

    #[test]
    fn normalize_matches_hand_computed_values() {
        // mean 1.5, population std sqrt(1.25) = 1.118033988749895
        let img = gray(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let out = normalize_image(&img);
        let expected = [
            -1.3416407864998738,
            -0.4472135954999579,
            0.4472135954999579,
            1.3416407864998738,
        ];
        for (got, want) in out.data().iter().zip(expected) {
            assert_relative_eq!(got, &want, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotate90_moves_pixels_counterclockwise() {
        let img = gray(2, 1, vec![1.0, 2.0]);
        let rot = img.rotate90();
        assert_eq!((rot.width(), rot.height()), (1, 2));
        assert_eq!(rot.data(), &[2.0, 1.0]);

        let img = gray(3, 2, (0..6).map(f64::from).collect());
        let four = img.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(four, img);
    }

    proptest! {
        #[test]
        fn normalized_output_has_zero_mean_unit_std(
            data in proptest::collection::vec(0.0f64..255.0, 4..64),
        ) {
            let img = gray(data.len(), 1, data);
            let out = normalize_image(&img);
            let n = out.data().len() as f64;
            let mean = out.data().iter().sum::<f64>() / n;
            let var = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            prop_assume!(img.data().iter().any(|&v| v != img.data()[0]));
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn normalization_removes_affine_gray_changes(
            data in proptest::collection::vec(0.0f64..255.0, 4..64),
            a in 0.1f64..10.0,
            b in -100.0f64..100.0,
        ) {
            prop_assume!(data.iter().any(|&v| v != data[0]));
            let img = gray(data.len(), 1, data.clone());
            let scaled = gray(data.len(), 1, data.iter().map(|v| a * v + b).collect());
            let base = normalize_image(&img);
            let transformed = normalize_image(&scaled);
            for (x, y) in base.data().iter().zip(transformed.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn normalization_is_idempotent(
            data in proptest::collection::vec(0.0f64..255.0, 4..64),
        ) {
            let img = gray(data.len(), 1, data);
            let once = normalize_image(&img);
            let twice = normalize_image(&once);
            for (x, y) in once.data().iter().zip(twice.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
