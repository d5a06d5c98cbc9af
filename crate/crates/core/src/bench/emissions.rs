use serde::{Deserialize, Serialize};

use super::BenchError;

/// Parameters of the power × time emission model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionConfig {
    /// Average draw of the inference host while generating, in watts.
    pub avg_power_w: f64,
    /// Power usage effectiveness of the facility (≥ 1).
    pub pue: f64,
    pub carbon_intensity_g_per_kwh: f64,
}

impl Default for EmissionConfig {
    fn default() -> Self {
        Self {
            avg_power_w: 360.0,
            pue: 1.0,
            carbon_intensity_g_per_kwh: 475.0,
        }
    }
}

impl EmissionConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.avg_power_w > 0.0 && self.avg_power_w.is_finite()) {
            return Err(BenchError::Config("avg_power_w must be positive".into()));
        }
        if !(self.pue >= 1.0 && self.pue.is_finite()) {
            return Err(BenchError::Config("pue must be at least 1".into()));
        }
        if !(self.carbon_intensity_g_per_kwh > 0.0 && self.carbon_intensity_g_per_kwh.is_finite()) {
            return Err(BenchError::Config("carbon intensity must be positive".into()));
        }
        Ok(())
    }
}

/// Grams of CO₂: `latency_s × avg_power_w × pue / 3.6e6 × g_per_kwh`.
pub fn co2_model(latency_s: f64, cfg: &EmissionConfig) -> Result<f64, BenchError> {
    if latency_s < 0.0 || latency_s.is_nan() {
        return Err(BenchError::NegativeLatency(latency_s));
    }
    cfg.validate()?;
    Ok(latency_s * cfg.avg_power_w * cfg.pue / 3_600_000.0 * cfg.carbon_intensity_g_per_kwh)
}
