use nalgebra::DVector;

use crate::error::{Error, Result};

fn check(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "metric inputs must have equal nonzero length ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn mse(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    check(pred, truth)?;
    Ok((pred - truth).norm_squared() / pred.len() as f64)
}

/// Coefficient of determination `1 − SS_res/SS_tot`.
pub fn r2(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    check(pred, truth)?;
    let mean = truth.mean();
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateData(
            "r2 is undefined for constant targets".to_owned(),
        ));
    }
    let ss_res = (pred - truth).norm_squared();
    Ok(1.0 - ss_res / ss_tot)
}
