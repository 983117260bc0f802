//! Full descriptor assembly: per-level multi-radius histograms, per-block
//! normalization, cross-scale max pooling, and feature (de)serialization.
//!
//! The pipeline is normalize, build a Gaussian scale space, compute the
//! joint histogram per radius at every level, L1-normalize each block, then
//! take the elementwise maximum across levels. The pooled vector is used
//! as-is; there is no re-normalization afterwards.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elbp::{build_riu2_table, histogram_len, joint_histogram, RadiusScheme, Riu2Table};
use crate::imgio::{normalize_image, GrayImage};
use crate::scalespace::build_scale_space;
use crate::{Error, Result};

/// Default neighbor count per circle.
pub const DEFAULT_P: u32 = 8;
/// Default radius ladder.
pub const DEFAULT_RADII: [f64; 4] = [2.0, 3.0, 4.0, 7.0];
/// Default number of scale-space levels.
pub const DEFAULT_LEVELS: u32 = 4;
/// Default per-level smoothing sigma, the fourth root of two.
pub const DEFAULT_SIGMA: f64 = 1.189_207_115_002_721;

/// Everything that determines a feature vector apart from the image itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    scheme: RadiusScheme,
    levels: u32,
    sigma: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            scheme: RadiusScheme::new(DEFAULT_P, DEFAULT_RADII.to_vec())
                .expect("default radius scheme is valid"),
            levels: DEFAULT_LEVELS,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl DescriptorConfig {
    pub fn new(scheme: RadiusScheme, levels: u32, sigma: f64) -> Result<Self> {
        if !(1..=u32::from(u16::MAX)).contains(&levels) {
            return Err(Error::Parameter(format!(
                "scale level count must be in 1..=65535, got {levels}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Parameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if scheme.len() > usize::from(u16::MAX) {
            return Err(Error::Parameter(format!(
                "at most 65535 radii are supported, got {}",
                scheme.len()
            )));
        }
        Ok(DescriptorConfig { scheme, levels, sigma })
    }

    pub fn scheme(&self) -> &RadiusScheme {
        &self.scheme
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Length of the pooled feature vector: N blocks of 2*(P+2)^2 bins.
    pub fn feature_len(&self) -> usize {
        self.scheme.len() * histogram_len(self.scheme.p())
    }

    /// Smallest width and height an input image may have.
    pub fn min_image_dim(&self) -> usize {
        2 * self.scheme.margin() + 2
    }

    /// Stable 64-bit digest of the configuration, used to key feature files
    /// and to refuse distance computations across mismatched configs.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(64);
        bytes.extend_from_slice(b"sselbp.config.v1");
        bytes.extend_from_slice(&self.scheme.p().to_le_bytes());
        bytes.extend_from_slice(&(self.scheme.len() as u32).to_le_bytes());
        for &r in self.scheme.radii() {
            bytes.extend_from_slice(&r.to_bits().to_le_bytes());
        }
        bytes.extend_from_slice(&self.levels.to_le_bytes());
        bytes.extend_from_slice(&self.sigma.to_bits().to_le_bytes());
        fnv1a(&bytes)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Fingerprint assigned to features loaded from the binary format, whose
/// header carries only (P, N, L). Distinct from any config fingerprint so
/// that JSON- and binary-sourced features never silently mix.
pub fn binary_header_fingerprint(p: u32, n: u32, l: u32) -> u64 {
    let mut bytes = Vec::with_capacity(28);
    bytes.extend_from_slice(b"sselbp.binary.v1");
    bytes.extend_from_slice(&p.to_le_bytes());
    bytes.extend_from_slice(&n.to_le_bytes());
    bytes.extend_from_slice(&l.to_le_bytes());
    fnv1a(&bytes)
}

/// Pooled descriptor with the fingerprint of the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SselbpFeature {
    values: Vec<f64>,
    fingerprint: u64,
}

impl SselbpFeature {
    /// Wraps a raw vector; every entry must be finite and in [0, 1].
    pub fn new(values: Vec<f64>, fingerprint: u64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::Parameter(format!(
                "feature values must lie in [0, 1], got {v}"
            )));
        }
        Ok(SselbpFeature { values, fingerprint })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Joint histograms for every radius of the scheme, one L1-normalized
/// 2*(P+2)^2 block per radius, in radius order.
pub fn multiscale_histogram(img: &GrayImage, scheme: &RadiusScheme) -> Result<Vec<Vec<f64>>> {
    let table = build_riu2_table(scheme.p());
    multiscale_histogram_with_table(img, scheme, &table)
}

fn multiscale_histogram_with_table(
    img: &GrayImage,
    scheme: &RadiusScheme,
    table: &Riu2Table,
) -> Result<Vec<Vec<f64>>> {
    let margin = scheme.margin();
    let mut blocks = Vec::with_capacity(scheme.len());
    for (i, &radius) in scheme.radii().iter().enumerate() {
        let hist = joint_histogram(img, radius, scheme.inner_radius(i), margin, table)?;
        let total = hist.total() as f64;
        blocks.push(hist.bins().iter().map(|&b| b as f64 / total).collect());
    }
    Ok(blocks)
}

/// Elementwise maximum across equally sized level vectors.
pub fn pool_max(levels: &[Vec<f64>]) -> Vec<f64> {
    assert!(!levels.is_empty(), "pooling requires at least one level");
    let mut pooled = levels[0].clone();
    for level in &levels[1..] {
        assert_eq!(level.len(), pooled.len(), "level vectors must have equal length");
        for (p, &v) in pooled.iter_mut().zip(level) {
            *p = p.max(v);
        }
    }
    pooled
}

/// Computes the pooled descriptor of an image.
pub fn extract(img: &GrayImage, config: &DescriptorConfig) -> Result<SselbpFeature> {
    let min_dim = config.min_image_dim();
    if img.width() < min_dim || img.height() < min_dim {
        return Err(Error::Parameter(format!(
            "image {}x{} is smaller than the required minimum of {min_dim} pixels per side",
            img.width(),
            img.height()
        )));
    }
    let table = build_riu2_table(config.scheme.p());
    let normalized = normalize_image(img);
    let space = build_scale_space(&normalized, config.levels as usize, config.sigma)?;
    let mut level_vectors = Vec::with_capacity(space.levels().len());
    for level in space.levels() {
        let blocks = multiscale_histogram_with_table(level, &config.scheme, &table)?;
        level_vectors.push(blocks.concat());
    }
    SselbpFeature::new(pool_max(&level_vectors), config.fingerprint())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigJson {
    #[serde(rename = "P")]
    p: u32,
    radii: Vec<f64>,
    #[serde(rename = "L")]
    levels: u32,
    sigma: f64,
}

impl From<&DescriptorConfig> for ConfigJson {
    fn from(config: &DescriptorConfig) -> Self {
        ConfigJson {
            p: config.scheme.p(),
            radii: config.scheme.radii().to_vec(),
            levels: config.levels,
            sigma: config.sigma,
        }
    }
}

impl TryFrom<ConfigJson> for DescriptorConfig {
    type Error = Error;

    fn try_from(json: ConfigJson) -> Result<Self> {
        let scheme = RadiusScheme::new(json.p, json.radii)?;
        DescriptorConfig::new(scheme, json.levels, json.sigma)
    }
}

/// Serializes a descriptor config as the `config` object used by feature
/// files and benchmark reports.
pub(crate) fn config_to_json(config: &DescriptorConfig) -> serde_json::Value {
    serde_json::to_value(ConfigJson::from(config)).expect("config serialization cannot fail")
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureJson {
    config: ConfigJson,
    length: usize,
    values: Vec<f64>,
}

/// Writes a feature with its full config as a JSON record.
pub fn write_feature_json(
    path: &Path,
    feature: &SselbpFeature,
    config: &DescriptorConfig,
) -> Result<()> {
    let record = FeatureJson {
        config: ConfigJson::from(config),
        length: feature.len(),
        values: feature.values.clone(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &record)
        .map_err(|e| Error::format(path, format!("cannot encode feature: {e}")))?;
    writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a JSON feature record, restoring the config and its fingerprint.
pub fn read_feature_json(path: &Path) -> Result<(SselbpFeature, DescriptorConfig)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let record: FeatureJson = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format(path, format!("cannot parse feature record: {e}")))?;
    let config = DescriptorConfig::try_from(record.config)
        .map_err(|e| Error::format(path, format!("invalid embedded config: {e}")))?;
    if record.length != record.values.len() || record.length != config.feature_len() {
        return Err(Error::format(
            path,
            format!(
                "length mismatch: declared {}, stored {}, config implies {}",
                record.length,
                record.values.len(),
                config.feature_len()
            ),
        ));
    }
    let feature = SselbpFeature::new(record.values, config.fingerprint())
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((feature, config))
}

/// Magic bytes opening every binary feature file.
pub const BINARY_MAGIC: [u8; 4] = *b"SSEL";
/// Current binary format version.
pub const BINARY_VERSION: u16 = 1;

/// Fixed-size header of the binary feature format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryHeader {
    pub p: u16,
    pub n: u16,
    pub l: u16,
}

/// Writes a feature in the compact binary layout: a 16-byte header (magic
/// "SSEL", version u16, P u16, N u16, L u16, reserved u32, all little
/// endian) followed by the values as little-endian 64-bit reals.
pub fn write_feature_binary(
    path: &Path,
    feature: &SselbpFeature,
    config: &DescriptorConfig,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writer.write_all(&BINARY_MAGIC).map_err(io)?;
    writer.write_all(&BINARY_VERSION.to_le_bytes()).map_err(io)?;
    writer
        .write_all(&(config.scheme.p() as u16).to_le_bytes())
        .map_err(io)?;
    writer
        .write_all(&(config.scheme.len() as u16).to_le_bytes())
        .map_err(io)?;
    writer
        .write_all(&(config.levels as u16).to_le_bytes())
        .map_err(io)?;
    writer.write_all(&0u32.to_le_bytes()).map_err(io)?;
    for v in &feature.values {
        writer.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    writer.flush().map_err(io)?;
    Ok(())
}

/// Reads a binary feature file. The returned feature carries the
/// header-derived fingerprint; callers holding the full config should
/// validate the header against it and re-key the values themselves.
pub fn read_feature_binary(path: &Path) -> Result<(SselbpFeature, BinaryHeader)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::format(path, "file shorter than the 16-byte header"))?;
    if header[0..4] != BINARY_MAGIC {
        return Err(Error::format(path, "bad magic, not a binary feature file"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != BINARY_VERSION {
        return Err(Error::format(path, format!("unsupported format version {version}")));
    }
    let p = u16::from_le_bytes([header[6], header[7]]);
    let n = u16::from_le_bytes([header[8], header[9]]);
    let l = u16::from_le_bytes([header[10], header[11]]);
    if !(2..=24).contains(&p) || n == 0 || l == 0 {
        return Err(Error::format(
            path,
            format!("implausible header: P={p}, N={n}, L={l}"),
        ));
    }
    let expected = usize::from(n) * histogram_len(u32::from(p));
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    if payload.len() != expected * 8 {
        return Err(Error::format(
            path,
            format!(
                "payload holds {} bytes but the header implies {} values ({} bytes)",
                payload.len(),
                expected,
                expected * 8
            ),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
        .collect();
    let fingerprint = binary_header_fingerprint(u32::from(p), u32::from(n), u32::from(l));
    let feature =
        SselbpFeature::new(values, fingerprint).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((feature, BinaryHeader { p, n, l }))
}
