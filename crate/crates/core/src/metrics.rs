//! Agreement metrics between predicted and reference values.

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean absolute error relative to the target, in percent.
pub fn mape(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    if let Some(index) = target.iter().position(|&t| t == 0.0) {
        return Err(Error::ZeroTarget { index });
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| ((p - t) / t).abs())
        .sum();
    Ok(sum / pred.len() as f64 * 100.0)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Sample Pearson correlation; `None` when either side has zero variance.
pub fn pearson(pred: &[f64], target: &[f64]) -> Result<Option<f64>> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::TooFewPoints { got: pred.len() });
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let (dx, dy) = (p - mp, t - mt);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub n: usize,
    pub mae: f64,
    /// Undefined when some target is zero.
    pub mape: Option<f64>,
    pub rmse: f64,
    /// Undefined for fewer than two points or a constant series.
    pub pearson: Option<f64>,
}

impl MetricSet {
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Self {
            n: pred.len(),
            mae: mae(pred, target)?,
            mape: match mape(pred, target) {
                Ok(v) => Some(v),
                Err(Error::ZeroTarget { .. }) => None,
                Err(e) => return Err(e),
            },
            rmse: rmse(pred, target)?,
            pearson: match pearson(pred, target) {
                Ok(v) => v,
                Err(Error::TooFewPoints { .. }) => None,
                Err(e) => return Err(e),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const PRED: [f64; 2] = [72.0, 80.0];
    const TARGET: [f64; 2] = [70.0, 84.0];

    #[test]
    fn worked_examples() {
        assert_relative_eq!(mae(&PRED, &TARGET).unwrap(), 3.0);
        assert_relative_eq!(mape(&PRED, &TARGET).unwrap(), 3.809_523_809_523_81, epsilon = 1e-9);
        assert_relative_eq!(rmse(&PRED, &TARGET).unwrap(), 10f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(rmse(&[5.0], &[1.0]).unwrap(), 4.0);
    }

    #[test]
    fn identical_series() {
        let x = [1.0, 2.5, 4.0];
        assert_eq!(mae(&x, &x).unwrap(), 0.0);
        assert_eq!(mape(&x, &x).unwrap(), 0.0);
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert_relative_eq!(pearson(&x, &x).unwrap().unwrap(), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson(&neg, &x).unwrap().unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn error_cases() {
        let three = [1.0, 2.0, 3.0];
        assert!(matches!(mae(&PRED, &three), Err(Error::LengthMismatch { left: 2, right: 3 })));
        assert!(matches!(rmse(&PRED, &three), Err(Error::LengthMismatch { .. })));
        assert!(matches!(mape(&PRED, &three), Err(Error::LengthMismatch { .. })));
        assert!(matches!(pearson(&PRED, &three), Err(Error::LengthMismatch { .. })));
        assert!(matches!(mae(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(mape(&[1.0, 2.0], &[3.0, 0.0]), Err(Error::ZeroTarget { index: 1 })));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::TooFewPoints { got: 1 })));
        assert_eq!(pearson(&[1.0, 2.0], &[3.0, 3.0]).unwrap(), None);
    }

    #[test]
    fn metric_set_single_point() {
        let m = MetricSet::compute(&[71.0], &[70.0]).unwrap();
        assert_eq!(m.n, 1);
        assert_eq!(m.pearson, None);
        assert_relative_eq!(m.mae, 1.0);
        let z = MetricSet::compute(&[1.0, 2.0], &[0.0, 2.0]).unwrap();
        assert_eq!(z.mape, None);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = mae(&p, &t).unwrap();
            let r = rmse(&p, &t).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!(r >= a * (1.0 - 1e-12));
        }

        #[test]
        fn pearson_is_bounded(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Some(r) = pearson(&p, &t).unwrap() {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
