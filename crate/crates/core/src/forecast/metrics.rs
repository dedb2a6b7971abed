use super::{ForecastError, Result};

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-15;

/// Mean binary cross-entropy (natural log).
pub fn cross_entropy(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(ForecastError::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(ForecastError::Empty);
    }
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if y > 1 {
            return Err(ForecastError::InvalidLabel(y));
        }
        let p = p.clamp(EPS, 1.0 - EPS);
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / predictions.len() as f64)
}

/// Entropy (nats) of a Bernoulli with the given rate.
pub fn bernoulli_entropy(rate: f64) -> f64 {
    if rate <= 0.0 || rate >= 1.0 {
        return 0.0;
    }
    -(rate * rate.ln() + (1.0 - rate) * (1.0 - rate).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((cross_entropy(&[0.5], &[1]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(cross_entropy(&[1.0 - EPS], &[1]).unwrap() < 1e-14);
        let ce = cross_entropy(&[0.9, 0.1], &[1, 0]).unwrap();
        assert!((ce - 0.105_360_515_657_826_3).abs() < 1e-12);
    }

    #[test]
    fn clipping_keeps_it_finite() {
        assert!(cross_entropy(&[0.0], &[1]).unwrap().is_finite());
        assert!(cross_entropy(&[1.0], &[0]).unwrap().is_finite());
    }

    #[test]
    fn errors() {
        assert!(matches!(cross_entropy(&[], &[]), Err(ForecastError::Empty)));
        assert!(matches!(
            cross_entropy(&[0.5], &[1, 0]),
            Err(ForecastError::LengthMismatch { left: 1, right: 2 })
        ));
    }
}
