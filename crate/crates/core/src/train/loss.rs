use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPSILON, 1 - EPSILON]` before any log.
pub const EPSILON: f64 = 1e-7;

#[inline]
pub(crate) fn clamp_probability(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

/// `-[y ln p + (1 - y) ln(1 - p)]` for one prediction.
#[inline]
pub(crate) fn bce_term(p: f64, y: f64) -> f64 {
    let p = clamp_probability(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy over paired probabilities and {0, 1} labels.
pub fn binary_cross_entropy(probs: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probs, labels)?;
    let total: f64 = probs.iter().zip(labels).map(|(&p, &y)| bce_term(p, y)).sum();
    Ok(total / probs.len() as f64)
}

/// Derivative of [`binary_cross_entropy`] with respect to each
/// probability: `(p - y) / (p (1 - p)) / N`, evaluated at the clamped `p`.
pub fn binary_cross_entropy_grad(probs: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    check_lengths(probs, labels)?;
    let n = probs.len() as f64;
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_probability(p);
            (p - y) / (p * (1.0 - p)) / n
        })
        .collect())
}

fn check_lengths(probs: &[f64], labels: &[f64]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::Usage(format!(
            "{} probabilities but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Usage("loss of an empty batch".into()));
    }
    Ok(())
}
