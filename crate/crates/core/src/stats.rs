//! Pearson product-moment correlation and its interpretation bands.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    VeryHigh,
    High,
    Moderate,
    Low,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::VeryHigh => "very_high",
            Band::High => "high",
            Band::Moderate => "moderate",
            Band::Low => "low",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lower bounds on |r| for each band, strongest first.
pub const BAND_THRESHOLDS: [(f64, Band); 3] = [
    (0.90, Band::VeryHigh),
    (0.68, Band::High),
    (0.36, Band::Moderate),
];

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 2 pairs, got {0}")]
    InsufficientData(usize),
    #[error("{0} has zero variance")]
    DegenerateData(&'static str),
    #[error("correlation {0} outside [-1, 1]")]
    Domain(f64),
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::InsufficientData(_) => "insufficient_data",
            StatsError::DegenerateData(_) => "degenerate_data",
            StatsError::Domain(_) => "domain_error",
            StatsError::LengthMismatch(..) => "length_mismatch",
            StatsError::NonFinite => "non_finite",
        }
    }
}

pub fn interpret_r(r: f64) -> Result<Band, StatsError> {
    if !(r.abs() <= 1.0) {
        return Err(StatsError::Domain(r));
    }
    let m = r.abs();
    Ok(BAND_THRESHOLDS
        .iter()
        .find(|(lo, _)| m >= *lo)
        .map_or(Band::Low, |(_, b)| *b))
}

/// Pearson's r over paired samples. Uses centred sums; the result is
/// clamped to [-1, 1] to absorb rounding.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateData("x"));
    }
    if syy == 0.0 {
        return Err(StatsError::DegenerateData("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
