use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided critical value at the 0.05 level for large samples.
pub const T_CRITICAL_05: f64 = 1.645;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub t_value: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_x: Option<f64>,
    pub sd_y: Option<f64>,
    pub sd_pooled: f64,
    pub critical_value: f64,
    pub significant: bool,
    /// `mean_x − mean_y` in accuracy points.
    pub absolute_delta: f64,
    /// `mean_x / mean_y − 1`, or `None` when `mean_y` is 0.
    pub relative_delta: Option<f64>,
}

/// Root mean square of two standard deviations.
pub fn pooled_sd(sd_x: f64, sd_y: f64) -> Result<f64> {
    if !(sd_x >= 0.0 && sd_y >= 0.0) || !sd_x.is_finite() || !sd_y.is_finite() {
        return Err(Error::arg(format!(
            "standard deviations must be finite and non-negative, got {sd_x}, {sd_y}"
        )));
    }
    Ok(((sd_x * sd_x + sd_y * sd_y) / 2.0).sqrt())
}

/// Sample standard deviation with the `n − 1` denominator; 0 for one value.
pub fn sample_sd(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    if values.len() == 1 {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// `t = (mean_x − mean_y) / sd_pooled`, significant when `t > 1.645`.
pub fn students_t(mean_x: f64, mean_y: f64, sd_pooled: f64) -> Result<SignificanceResult> {
    if !(sd_pooled >= 0.0) || !sd_pooled.is_finite() {
        return Err(Error::arg(format!(
            "pooled SD must be finite and non-negative, got {sd_pooled}"
        )));
    }
    let diff = mean_x - mean_y;
    let t_value = if sd_pooled == 0.0 {
        if diff != 0.0 {
            return Err(Error::UndefinedT);
        }
        0.0
    } else {
        diff / sd_pooled
    };
    Ok(SignificanceResult {
        t_value,
        mean_x,
        mean_y,
        sd_x: None,
        sd_y: None,
        sd_pooled,
        critical_value: T_CRITICAL_05,
        significant: t_value > T_CRITICAL_05,
        absolute_delta: diff,
        relative_delta: (mean_y != 0.0).then(|| mean_x / mean_y - 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_examples() {
        assert_eq!(pooled_sd(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(pooled_sd(0.0, 0.0).unwrap(), 0.0);
        assert!((pooled_sd(3.0, 4.0).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(pooled_sd(-1.0, 1.0).is_err());
    }

    #[test]
    fn t_examples() {
        let r = students_t(5.0, 5.0, 2.0).unwrap();
        assert_eq!(r.t_value, 0.0);
        assert!(!r.significant);
        let r = students_t(10.0, 8.0, 1.0).unwrap();
        assert_eq!(r.t_value, 2.0);
        assert!(r.significant);
        assert!(matches!(students_t(1.0, 2.0, 0.0), Err(Error::UndefinedT)));
        assert_eq!(students_t(3.0, 3.0, 0.0).unwrap().t_value, 0.0);
    }

    #[test]
    fn t_is_antisymmetric() {
        let a = students_t(77.8, 73.4, 2.5).unwrap().t_value;
        let b = students_t(73.4, 77.8, 2.5).unwrap().t_value;
        assert_eq!(a, -b);
    }

    #[test]
    fn sample_sd_known() {
        assert_eq!(
            sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap(),
            (32.0f64 / 7.0).sqrt()
        );
        assert_eq!(sample_sd(&[3.0]).unwrap(), 0.0);
    }
}
