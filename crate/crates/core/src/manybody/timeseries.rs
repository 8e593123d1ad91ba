use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A signal sampled on a strictly increasing grid of times in μs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

pub(crate) fn check_grid(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::invalid("time_grid", "empty"));
    }
    if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("time_grid", "times must be finite and non-negative"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("time_grid", "times must be strictly increasing"));
    }
    Ok(())
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, value: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if value.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), found: value.len() });
        }
        if stderr.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), found: stderr.len() });
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("t", "times must be strictly increasing"));
        }
        if stderr.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("stderr", "must be non-negative"));
        }
        Ok(TimeSeries { t, value, stderr, metadata: BTreeMap::new() })
    }

    pub fn exact(t: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let n = t.len();
        Self::new(t, value, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.metadata.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    /// Multiply by `exp(−t/T)`.
    pub fn with_extrinsic_decay(mut self, t_ext: f64) -> Self {
        for k in 0..self.len() {
            let f = (-self.t[k] / t_ext).exp();
            self.value[k] *= f;
            self.stderr[k] *= f;
        }
        self.with_meta("extrinsic_t2_us", t_ext)
    }

    /// Linear interpolation at `t`, clamped to the grid ends.
    pub fn interpolate(&self, t: f64) -> (f64, f64) {
        let n = self.len();
        if t <= self.t[0] {
            return (self.value[0], self.stderr[0]);
        }
        if t >= self.t[n - 1] {
            return (self.value[n - 1], self.stderr[n - 1]);
        }
        let k = self.t.partition_point(|&x| x <= t) - 1;
        let w = (t - self.t[k]) / (self.t[k + 1] - self.t[k]);
        (
            self.value[k] * (1.0 - w) + self.value[k + 1] * w,
            self.stderr[k] * (1.0 - w) + self.stderr[k + 1] * w,
        )
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_us", "value", "stderr"])?;
        for k in 0..self.len() {
            w.write_record([self.t[k].to_string(), self.value[k].to_string(), self.stderr[k].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `t_us` and `value`; `stderr` defaults to zero when absent.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let ct = find("t_us").ok_or_else(|| Error::MissingColumn("t_us".into()))?;
        let cv = find("value").ok_or_else(|| Error::MissingColumn("value".into()))?;
        let cs = find("stderr");
        let (mut t, mut v, mut s) = (vec![], vec![], vec![]);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|x| x.trim().parse().ok())
                    .ok_or_else(|| Error::invalid("csv", format!("row {}: column {c} is not a number", row + 2)))
            };
            t.push(parse(ct)?);
            v.push(parse(cv)?);
            s.push(match cs {
                Some(c) => parse(c)?,
                None => 0.0,
            });
        }
        TimeSeries::new(t, v, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let ts = TimeSeries::new(vec![0.0, 0.1, 0.3], vec![1.0, 0.123456789012345, -1e-17], vec![0.0, 1e-3, 2.5e-4])
            .unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t_us,value,stderr\n"));
        assert_eq!(TimeSeries::read_csv(buf.as_slice()).unwrap(), ts);
    }

    #[test]
    fn invariants_enforced() {
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, -1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0], vec![1.0, 1.0], vec![0.0]).is_err());
        assert!(matches!(TimeSeries::read_csv("t_us,stderr\n0,0\n".as_bytes()), Err(Error::MissingColumn(c)) if c == "value"));
    }

    #[test]
    fn interpolation() {
        let ts = TimeSeries::exact(vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0]).unwrap();
        assert_eq!(ts.interpolate(0.5).0, 0.5);
        assert_eq!(ts.interpolate(2.0).0, 1.0);
        assert_eq!(ts.interpolate(9.0).0, 2.0);
    }
}
