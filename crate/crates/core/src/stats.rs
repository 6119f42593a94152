//! Small shared statistics helpers.
//!
//! The whole crate uses the population convention (divide by the sample
//! count, not count - 1) so that z-scored series plug directly into the
//! correlation formulas.

/// Arithmetic mean of a slice. Returns 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divide by n).
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divide by n).
pub fn population_std(xs: &[f64]) -> f64 {
    population_variance(xs).sqrt()
}
