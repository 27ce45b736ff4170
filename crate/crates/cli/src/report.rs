//! JSON reports: sorted keys, numbers rounded to six significant digits.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliResult;

/// Significant digits kept for every number in a report.
pub const SIGNIFICANT_DIGITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_obs: Option<usize>,
    #[serde(default)]
    pub rows_rejected: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_method: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub family: String,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    pub loglik: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub converged: bool,
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub family: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRow {
    pub estimator: u8,
    pub tail: String,
    pub value: f64,
    pub raw: f64,
    pub k_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method1Block {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub best_family: String,
    pub best_lambda_lower: f64,
    pub best_lambda_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub estimator: u8,
    pub tail: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub wasserstein: f64,
    pub l2_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method2Block {
    pub reps: usize,
    pub n: usize,
    pub counts: Vec<usize>,
    pub estimates: Vec<EstimateRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<DistanceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_distances: Option<DistanceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub coefficients: Vec<f64>,
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub family: String,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    pub mixing: f64,
    pub margin1: MarginRow,
    pub margin2: MarginRow,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub families: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loglik: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSelectionRow {
    pub g: usize,
    pub families: Vec<String>,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureBlock {
    pub g: usize,
    pub covariates: Vec<String>,
    pub components: Vec<ComponentRow>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// Method 1 blend over every fitted permutation.
    pub bma_lambda_lower: f64,
    pub bma_lambda_upper: f64,
    pub ranking: Vec<RankingRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g_selection: Vec<GSelectionRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misclassification: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub meta: Meta,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<FitRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fit_failures: Vec<FitFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub empirical: Vec<EmpiricalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method1: Option<Method1Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method2: Option<Method2Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureBlock>,
}

/// Rounds to `digits` significant digits; zero and non-finite values pass
/// through.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Rounds probabilities to multiples of `10⁻⁶` by largest remainder so the
/// rounded values still sum to one.
pub fn round_weights(weights: &[f64]) -> Vec<f64> {
    const SCALE: f64 = 1e6;
    let total: f64 = weights.iter().sum();
    let units: Vec<f64> = weights.iter().map(|w| w / total * SCALE).collect();
    let mut counts: Vec<u64> = units.iter().map(|u| u.floor() as u64).collect();
    let missing = SCALE as u64 - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (units[b] - units[b].floor()).total_cmp(&(units[a] - units[a].floor())));
    for &k in order.iter().take(missing as usize) {
        counts[k] += 1;
    }
    counts.into_iter().map(|c| c as f64 / SCALE).collect()
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(f64::NAN), SIGNIFICANT_DIGITS);
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

impl Report {
    /// JSON value with sorted keys and rounded numbers.
    pub fn to_value(&self) -> CliResult<Value> {
        let mut v = serde_json::to_value(self)?;
        round_value(&mut v);
        Ok(v)
    }

    /// The report as it reads back after rendering.
    pub fn rounded(&self) -> CliResult<Self> {
        Ok(serde_json::from_value(self.to_value()?)?)
    }
}

/// Deterministic text of a report, newline terminated.
pub fn report_to_string(report: &Report) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&report.to_value()?)?;
    s.push('\n');
    Ok(s)
}

/// Writes the report to `path`, or to standard output when `path` is
/// `None` or `-`.
pub fn render_report(report: &Report, path: Option<&str>) -> CliResult<()> {
    crate::io::write_output(path, &report_to_string(report)?)
}

pub fn parse_report(text: &str) -> CliResult<Report> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let weights = round_weights(&[0.726_612_345, 0.123_712_9, 0.149_674_755, 1e-9]);
        Report {
            meta: Meta {
                command: "fit".into(),
                version: "0.1.0".into(),
                seed: Some(7),
                n_obs: Some(1500),
                rows_rejected: 0,
                fit_method: Some("mple".into()),
            },
            fits: weights
                .iter()
                .enumerate()
                .map(|(i, w)| FitRow {
                    family: format!("f{i}"),
                    theta: 1.0 / 3.0 + i as f64,
                    df: None,
                    loglik: 256.123_456_789,
                    n_params: 1,
                    n_obs: 1500,
                    aic: -510.246_913_578,
                    bic: -504.933_333_3,
                    weight: Some(*w),
                    lambda_lower: 0.0,
                    lambda_upper: 0.496_612_345,
                    converged: true,
                    at_boundary: false,
                })
                .collect(),
            ..Report::default()
        }
    }

    #[test]
    fn rendering_is_deterministic_and_round_trips() {
        let r = sample();
        let a = report_to_string(&r).unwrap();
        assert_eq!(a, report_to_string(&r).unwrap());
        let back = parse_report(&a).unwrap();
        assert_eq!(back, r.rounded().unwrap());
        assert_eq!(report_to_string(&back).unwrap(), a);
        assert!(a.contains("0.333333"));
        assert!(!a.contains("mixture"));
    }

    #[test]
    fn rounded_weights_still_sum_to_one() {
        let back = parse_report(&report_to_string(&sample()).unwrap()).unwrap();
        let total: f64 = back.fits.iter().map(|f| f.weight.unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        assert_eq!(back.fits[3].weight, Some(0.0));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_significant(0.123_456_789, 6), 0.123_457);
        assert_eq!(round_significant(-506.923_41, 6), -506.923);
        assert_eq!(round_significant(0.0, 6), 0.0);
        assert_eq!(round_significant(1.234_567e-9, 6), 1.234_57e-9);
    }
}
