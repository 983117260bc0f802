//! Dataset ingestion, repeated stratified half/half splits, and the
//! accuracy benchmark built on the descriptor and classifier.
//!
//! All randomness comes from an explicit SplitMix64 generator seeded per
//! repeat, so a (seed, repeat) pair identifies one split on every platform.
//! Floating-point reductions in the report are sequential, which keeps the
//! emitted JSON byte-identical regardless of the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classifier::{nnc_predict, LabeledFeature};
use crate::descriptor::{
    config_to_json, extract, read_feature_binary, read_feature_json, write_feature_binary,
    DescriptorConfig, SselbpFeature,
};
use crate::imgio::load_grayscale;
use crate::{Error, Result};

/// A texture dataset: one class per immediate subdirectory of the root.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    classes: BTreeMap<String, Vec<PathBuf>>,
}

impl Dataset {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn classes(&self) -> &BTreeMap<String, Vec<PathBuf>> {
        &self.classes
    }

    /// Samples in the canonical order: classes sorted by name, files sorted
    /// within each class. Split indices refer to positions in this list.
    pub fn flat_samples(&self) -> Vec<(&str, &Path)> {
        self.classes
            .iter()
            .flat_map(|(name, paths)| paths.iter().map(move |p| (name.as_str(), p.as_path())))
            .collect()
    }

    pub fn sample_count(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }
}

fn is_sample_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pgm"))
}

/// Scans one directory level below `root` for class subdirectories holding
/// .png or .pgm samples. Ordering is sorted and therefore reproducible.
pub fn ingest(root: &Path) -> Result<Dataset> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut class_dirs: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "no class subdirectories under {}",
            root.display()
        )));
    }
    let mut classes = BTreeMap::new();
    for dir in class_dirs {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| {
                Error::Dataset(format!("class directory {} has a non-UTF-8 name", dir.display()))
            })?
            .to_string();
        let mut samples: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_sample_file(p))
            .collect();
        samples.sort();
        if samples.len() < 2 {
            return Err(Error::Dataset(format!(
                "class '{name}' has {} sample(s); at least 2 are needed to split",
                samples.len()
            )));
        }
        classes.insert(name, samples);
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        classes,
    })
}

/// SplitMix64 pseudo-random generator: 64-bit state advanced by the golden
/// gamma 0x9E3779B97F4A7C15, output mixed by two xor-multiply rounds.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from [0, bound) by rejection, so small bounds carry no
    /// modulo bias.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// The repeated half/half evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitProtocol {
    pub repeats: u32,
    pub seed: u64,
}

impl Default for SplitProtocol {
    fn default() -> Self {
        SplitProtocol {
            repeats: 100,
            seed: 42,
        }
    }
}

/// Generator for one repeat: the base seed shifted by a per-repeat multiple
/// of the golden gamma, so repeats draw from disjoint stream positions.
fn repeat_rng(seed: u64, repeat_index: u32) -> SplitMix64 {
    let offset = u64::from(repeat_index)
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    SplitMix64::new(seed.wrapping_add(offset))
}

/// Draws one train/test split: per class, a seeded shuffle takes floor(n/2)
/// samples for training and leaves the rest for testing. Returned indices
/// refer to `Dataset::flat_samples` order.
pub fn stratified_split(ds: &Dataset, seed: u64, repeat_index: u32) -> (Vec<usize>, Vec<usize>) {
    let mut rng = repeat_rng(seed, repeat_index);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut base = 0usize;
    for paths in ds.classes.values() {
        let n = paths.len();
        let mut indices: Vec<usize> = (base..base + n).collect();
        rng.shuffle(&mut indices);
        let cut = n / 2;
        train.extend_from_slice(&indices[..cut]);
        test.extend_from_slice(&indices[cut..]);
        base += n;
    }
    (train, test)
}

/// Protocol section of the benchmark report.
#[derive(Debug, Serialize)]
pub struct ProtocolJson {
    pub repeats: u32,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Dataset section of the benchmark report: root path and per-class counts.
#[derive(Debug, Serialize)]
pub struct DatasetJson {
    pub root: String,
    pub classes: BTreeMap<String, usize>,
}

/// Full benchmark outcome; serializes to the report JSON layout.
#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_repeat: Vec<f64>,
    pub config: serde_json::Value,
    pub protocol: ProtocolJson,
    pub dataset: DatasetJson,
}

fn cache_path(cache_dir: &Path, image_bytes: &[u8], fingerprint: u64) -> PathBuf {
    let digest = Sha256::digest(image_bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a string cannot fail");
    }
    cache_dir.join(format!("{hex}-{fingerprint:016x}.bin"))
}

/// Loads a cached feature, checking the header against the run config.
fn read_cached_feature(path: &Path, config: &DescriptorConfig) -> Result<SselbpFeature> {
    let (feature, header) = read_feature_binary(path)?;
    let matches = u32::from(header.p) == config.scheme().p()
        && usize::from(header.n) == config.scheme().len()
        && u32::from(header.l) == config.levels();
    if !matches {
        return Err(Error::format(
            path,
            format!(
                "cached header (P={}, N={}, L={}) does not match the requested config",
                header.p, header.n, header.l
            ),
        ));
    }
    SselbpFeature::new(feature.values().to_vec(), config.fingerprint())
}

fn extract_one(
    index: usize,
    path: &Path,
    config: &DescriptorConfig,
    cache_dir: Option<&Path>,
) -> Result<SselbpFeature> {
    if let Some(dir) = cache_dir {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let cached = cache_path(dir, &bytes, config.fingerprint());
        if cached.is_file() {
            return read_cached_feature(&cached, config);
        }
        let img = load_grayscale(path)?;
        let feature = extract(&img, config)?;
        // write-then-rename keeps concurrent writers of one key from
        // interleaving partial files
        let staging = cached.with_extension(format!("tmp{index}"));
        write_feature_binary(&staging, &feature, config)?;
        fs::rename(&staging, &cached).map_err(|e| Error::io(&cached, e))?;
        Ok(feature)
    } else {
        let img = load_grayscale(path)?;
        extract(&img, config)
    }
}

/// Extracts one feature per sample, in `flat_samples` order, optionally
/// through an on-disk cache keyed by content hash and config fingerprint.
pub fn extract_dataset_features(
    ds: &Dataset,
    config: &DescriptorConfig,
    cache_dir: Option<&Path>,
) -> Result<Vec<LabeledFeature>> {
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    ds.flat_samples()
        .into_par_iter()
        .enumerate()
        .map(|(index, (label, path))| {
            let feature = extract_one(index, path, config, cache_dir).map_err(|e| {
                Error::Dataset(format!("cannot extract {}: {e}", path.display()))
            })?;
            Ok(LabeledFeature {
                feature,
                label: label.to_string(),
            })
        })
        .collect()
}

fn accuracy_for_repeat(
    items: &[LabeledFeature],
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    let gallery: Vec<LabeledFeature> = train.iter().map(|&i| items[i].clone()).collect();
    let mut correct = 0usize;
    for &i in test {
        let predicted = nnc_predict(&items[i].feature, &gallery)?;
        if predicted == items[i].label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Runs the full protocol: extract features once, then repeatedly split,
/// classify every held-out sample, and aggregate accuracy statistics.
pub fn run_benchmark(
    ds: &Dataset,
    config: &DescriptorConfig,
    protocol: &SplitProtocol,
    cache_dir: Option<&Path>,
) -> Result<BenchReport> {
    if protocol.repeats == 0 {
        return Err(Error::Parameter("repeat count must be at least 1".into()));
    }
    let items = extract_dataset_features(ds, config, cache_dir)?;
    let per_repeat: Vec<f64> = (0..protocol.repeats)
        .into_par_iter()
        .map(|r| {
            let (train, test) = stratified_split(ds, protocol.seed, r);
            accuracy_for_repeat(&items, &train, &test)
        })
        .collect::<Result<_>>()?;

    let n = per_repeat.len() as f64;
    let mean = per_repeat.iter().sum::<f64>() / n;
    let variance = per_repeat.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok(BenchReport {
        mean_accuracy: mean,
        std_accuracy: variance.sqrt(),
        per_repeat,
        config: config_to_json(config),
        protocol: ProtocolJson {
            repeats: protocol.repeats,
            seed: protocol.seed,
            train_fraction: 0.5,
        },
        dataset: DatasetJson {
            root: ds.root.display().to_string(),
            classes: ds.classes.iter().map(|(k, v)| (k.clone(), v.len())).collect(),
        },
    })
}

/// Loads labeled features from class subdirectories of `root`, accepting
/// .json and .bin feature files. All features must share one fingerprint;
/// JSON- and binary-sourced features are keyed differently and therefore
/// cannot be mixed.
pub fn load_labeled_features(root: &Path) -> Result<Vec<(PathBuf, LabeledFeature)>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut class_dirs: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "no class subdirectories under {}",
            root.display()
        )));
    }
    let mut items = Vec::new();
    for dir in class_dirs {
        let label = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| {
                Error::Dataset(format!("class directory {} has a non-UTF-8 name", dir.display()))
            })?
            .to_string();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("json") || e.eq_ignore_ascii_case("bin"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Dataset(format!(
                "class '{label}' contains no .json or .bin feature files"
            )));
        }
        for file in files {
            let is_json = file
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let feature = if is_json {
                read_feature_json(&file)?.0
            } else {
                read_feature_binary(&file)?.0
            };
            items.push((
                file,
                LabeledFeature {
                    feature,
                    label: label.clone(),
                },
            ));
        }
    }
    let first = items[0].1.feature.fingerprint();
    if let Some((path, odd)) = items.iter().find(|(_, i)| i.feature.fingerprint() != first) {
        return Err(Error::Mismatch(format!(
            "features under {} mix configurations or formats ({} has fingerprint {:016x}, expected {:016x})",
            root.display(),
            path.display(),
            odd.feature.fingerprint(),
            first
        )));
    }
    Ok(items)
}
