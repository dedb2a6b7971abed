//! Isotonic calibration via pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use super::{ForecastError, Result};

/// Monotone piecewise-linear map from raw scores to probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicCalibrator {
    /// `(raw_score, calibrated_prob)`; scores strictly increasing,
    /// probabilities nondecreasing and inside `[0, 1]`.
    breakpoints: Vec<(f64, f64)>,
}

impl IsotonicCalibrator {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        for &(s, p) in &breakpoints {
            if !s.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(ForecastError::InvalidCalibrator(format!(
                    "breakpoint ({s}, {p}) out of range"
                )));
            }
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(ForecastError::InvalidCalibrator(
                    "breakpoints must be increasing in score and nondecreasing in probability"
                        .into(),
                ));
            }
        }
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Linear interpolation between breakpoints, flat outside the fitted range.
    pub fn calibrate(&self, raw: f64) -> Result<f64> {
        let bp = &self.breakpoints;
        let (first, last) = match (bp.first(), bp.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(ForecastError::EmptyCalibrator),
        };
        let value = if raw.is_nan() {
            return Err(ForecastError::NonFiniteScore);
        } else if raw <= first.0 {
            first.1
        } else if raw >= last.0 {
            last.1
        } else {
            // First breakpoint with score > raw; exists and is > 0 here.
            let hi = bp.partition_point(|&(s, _)| s <= raw);
            let (s0, p0) = bp[hi - 1];
            let (s1, p1) = bp[hi];
            if raw == s0 {
                p0
            } else {
                p0 + (p1 - p0) * (raw - s0) / (s1 - s0)
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }
}

/// Weighted isotonic (nondecreasing) least-squares fit of `values`.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // Blocks as (weighted mean, total weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(pm, pw, pl)) = blocks.last() {
            if pm <= cur.0 {
                break;
            }
            blocks.pop();
            let tw = pw + cur.1;
            cur = ((pm * pw + cur.0 * cur.1) / tw, tw, pl + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat_n(m, len));
    }
    out
}

/// Fits an isotonic calibrator mapping scores to the label rate.
/// Equal scores are pooled before fitting.
pub fn fit_isotonic(scores: &[f64], labels: &[u8]) -> Result<IsotonicCalibrator> {
    if scores.len() != labels.len() {
        return Err(ForecastError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(ForecastError::Empty);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ForecastError::NonFiniteScore);
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(ForecastError::InvalidLabel(*bad));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut unique: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for i in order {
        let s = scores[i];
        if unique.last() == Some(&s) {
            *sums.last_mut().unwrap() += f64::from(labels[i]);
            *counts.last_mut().unwrap() += 1.0;
        } else {
            unique.push(s);
            sums.push(f64::from(labels[i]));
            counts.push(1.0);
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    let fitted = pava(&means, &counts);

    // Only the ends of each constant run are needed for interpolation.
    let mut breakpoints: Vec<(f64, f64)> = Vec::new();
    for (i, (&s, &p)) in unique.iter().zip(&fitted).enumerate() {
        let p = p.clamp(0.0, 1.0);
        let starts_run = i == 0 || fitted[i - 1] != fitted[i];
        let ends_run = i + 1 == unique.len() || fitted[i + 1] != fitted[i];
        if starts_run || ends_run {
            breakpoints.push((s, p));
        }
    }
    IsotonicCalibrator::new(breakpoints)
}
