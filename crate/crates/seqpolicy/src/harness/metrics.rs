use std::io::Write;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Closed set of emitted metric names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    ValueEstimate,
    CumRegret,
    PctOptimalAction,
    CoefError,
}

impl MetricName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::ValueEstimate => "value_estimate",
            MetricName::CumRegret => "cum_regret",
            MetricName::PctOptimalAction => "pct_optimal_action",
            MetricName::CoefError => "coef_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: String,
    pub replication: u32,
    pub metric: MetricName,
    pub value: f64,
    /// Stage or step index where applicable.
    pub stage: Option<usize>,
}

/// Emit `metrics.csv` rows: method, replication, metric, value, stage.
/// Refuses non-finite values — a NaN metric is a bug upstream, not data.
pub fn write_metrics_csv<W: Write>(
    records: &[MetricsRecord],
    writer: W,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "replication", "metric", "value", "stage"])
        .map_err(crate::core::CoreError::from)?;
    for r in records {
        if !r.value.is_finite() {
            return Err(HarnessError::NonFiniteMetric {
                metric: r.metric.as_str().to_string(),
                value: r.value,
            });
        }
        w.write_record(&[
            r.method.clone(),
            r.replication.to_string(),
            r.metric.as_str().to_string(),
            format!("{}", r.value),
            r.stage.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(crate::core::CoreError::from)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_rows_and_blank_stage() {
        let records = vec![
            MetricsRecord {
                method: "ts".into(),
                replication: 0,
                metric: MetricName::CumRegret,
                value: 12.5,
                stage: None,
            },
            MetricsRecord {
                method: "q".into(),
                replication: 1,
                metric: MetricName::PctOptimalAction,
                value: 0.95,
                stage: Some(1),
            },
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "method,replication,metric,value,stage"
        );
        assert!(text.contains("ts,0,cum_regret,12.5,"));
        assert!(text.contains("q,1,pct_optimal_action,0.95,1"));
    }

    #[test]
    fn non_finite_value_rejected() {
        let records = vec![MetricsRecord {
            method: "x".into(),
            replication: 0,
            metric: MetricName::ValueEstimate,
            value: f64::NAN,
            stage: None,
        }];
        let mut buf = Vec::new();
        assert!(matches!(
            write_metrics_csv(&records, &mut buf),
            Err(HarnessError::NonFiniteMetric { .. })
        ));
    }
}
