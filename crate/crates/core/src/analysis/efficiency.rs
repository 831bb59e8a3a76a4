use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::moo::delta_hv_percent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub opt_cost_usd: f64,
    pub opt_runtime_s: f64,
    pub hv_base: f64,
    pub hv_new: f64,
    pub delta_hv_pct: f64,
    /// Dollars spent per percentage point of hypervolume gained.
    pub cost_per_hv_pct: f64,
}

pub fn efficiency_report(
    opt_cost_usd: f64,
    opt_runtime_s: f64,
    hv_base: f64,
    hv_new: f64,
) -> Result<EfficiencyReport, AnalysisError> {
    let delta = delta_hv_percent(hv_base, hv_new)?;
    if !(delta > 0.0) {
        return Err(AnalysisError::NoHvGain(delta));
    }
    Ok(EfficiencyReport {
        opt_cost_usd,
        opt_runtime_s,
        hv_base,
        hv_new,
        delta_hv_pct: delta,
        cost_per_hv_pct: opt_cost_usd / delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows() {
        let r = efficiency_report(1.8611, 1545.08, 0.0056, 0.0296).unwrap();
        assert!((r.delta_hv_pct - 428.57).abs() < 0.01);
        assert!((r.cost_per_hv_pct - 0.0043).abs() < 0.0001);
        let r = efficiency_report(2.2676, 0.0, 0.0081, 0.1783).unwrap();
        assert!((0.0010..=0.0012).contains(&r.cost_per_hv_pct));
    }

    #[test]
    fn error_paths() {
        assert_eq!(efficiency_report(1.0, 1.0, 0.3, 0.3), Err(AnalysisError::NoHvGain(0.0)));
        assert_eq!(efficiency_report(1.0, 1.0, 0.0, 0.3), Err(AnalysisError::ZeroBaseline));
    }
}
