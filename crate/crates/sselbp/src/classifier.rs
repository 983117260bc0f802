//! Chi-square distance between pooled histograms and the nearest-neighbor
//! classifier built on it.

use crate::descriptor::SselbpFeature;
use crate::{Error, Result};

/// A gallery entry: a feature plus the class it belongs to.
#[derive(Debug, Clone)]
pub struct LabeledFeature {
    pub feature: SselbpFeature,
    pub label: String,
}

/// Chi-square distance: sum over bins of (t - m)^2 / (t + m), where bins
/// with a zero denominator contribute nothing.
pub fn chi_square(t: &SselbpFeature, m: &SselbpFeature) -> Result<f64> {
    if t.len() != m.len() {
        return Err(Error::Mismatch(format!(
            "feature lengths differ: {} vs {}",
            t.len(),
            m.len()
        )));
    }
    if t.fingerprint() != m.fingerprint() {
        return Err(Error::Mismatch(format!(
            "feature configs differ: {:016x} vs {:016x}",
            t.fingerprint(),
            m.fingerprint()
        )));
    }
    let sum = t
        .values()
        .iter()
        .zip(m.values())
        .map(|(&a, &b)| {
            let denom = a + b;
            if denom == 0.0 {
                0.0
            } else {
                let diff = a - b;
                diff * diff / denom
            }
        })
        .sum();
    Ok(sum)
}

/// Index of the gallery entry closest to `test` under chi-square distance.
/// Exact ties resolve to the lowest index.
pub fn nnc_predict_indexed(test: &SselbpFeature, gallery: &[LabeledFeature]) -> Result<usize> {
    if gallery.is_empty() {
        return Err(Error::Parameter("gallery must not be empty".into()));
    }
    let mut best_index = 0;
    let mut best_distance = chi_square(test, &gallery[0].feature)?;
    for (index, item) in gallery.iter().enumerate().skip(1) {
        let distance = chi_square(test, &item.feature)?;
        if distance < best_distance {
            best_distance = distance;
            best_index = index;
        }
    }
    Ok(best_index)
}

/// Label of the nearest gallery entry.
pub fn nnc_predict<'a>(test: &SselbpFeature, gallery: &'a [LabeledFeature]) -> Result<&'a str> {
    Ok(&gallery[nnc_predict_indexed(test, gallery)?].label)
}
