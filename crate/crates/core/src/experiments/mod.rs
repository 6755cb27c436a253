//! Reproducible experiment drivers. Every driver is a pure function of its
//! config: realizations draw their seeds from `(seed, index)` and results are
//! merged in index order, so the output does not depend on the thread count.

mod classify;
mod config;
mod denoise;
mod filter_error;

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use classify::{exp_classify, exp_perturb_classify, ClassifyConfig, DataSource, OperatorVariant, SyntheticSbm, DATA_DIR_ENV};
pub use config::{config_keys, load_config, ConfigFile};
pub use denoise::{exp_denoise, DenoiseConfig};
pub use filter_error::{exp_filter_error, FilterErrorConfig, GraphFamily};

/// A metric value, or a marker for a run that produced no finite number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Number(f64),
    Diverged,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Diverged => f.write_str("diverged"),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub seed: u64,
    pub params: Vec<(String, String)>,
    pub metric: String,
    pub epoch: Option<usize>,
    pub value: Value,
}

pub const CSV_HEADER: &str = "experiment,seed,params,metric,epoch,value";

impl RunRecord {
    pub fn new(experiment: &str, seed: u64, params: Vec<(String, String)>, metric: &str, value: Value) -> Self {
        Self {
            experiment: experiment.to_owned(),
            seed,
            params,
            metric: metric.to_owned(),
            epoch: None,
            value,
        }
    }

    pub fn at_epoch(mut self, epoch: usize) -> Self {
        self.epoch = Some(epoch);
        self
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn number(&self) -> Option<f64> {
        match self.value {
            Value::Number(v) => Some(v),
            Value::Diverged => None,
        }
    }

    pub fn csv_line(&self) -> String {
        let params = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let epoch = self.epoch.map(|e| e.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.experiment, self.seed, params, self.metric, epoch, self.value)
    }
}

pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

/// `params!("k" => 4, "kind" => "ngf")`.
macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {
        vec![$(($k.to_string(), $v.to_string())),*]
    };
}
pub(crate) use params;

/// Runs `task(i)` for `i in 0..count` on a pool of `jobs` threads and
/// returns the results in index order.
pub(crate) fn run_indexed<T, F>(jobs: usize, count: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if jobs <= 1 {
        return (0..count).map(task).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(task).collect())
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows() {
        let r = RunRecord::new("denoise", 3, params!("k" => 4, "arch" => "ngf"), "error", Value::Number(0.25)).at_epoch(10);
        assert_eq!(r.csv_line(), "denoise,3,k=4;arch=ngf,error,10,0.25");
        let d = RunRecord::new("x", 0, vec![], "loss", Value::Diverged);
        assert_eq!(d.csv_line(), "x,0,,loss,,diverged");
        assert!(to_csv(&[r]).starts_with(CSV_HEADER));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn indexed_runs_keep_order() {
        let serial = run_indexed(1, 20, |i| Ok(i * i)).unwrap();
        let parallel = run_indexed(4, 20, |i| Ok(i * i)).unwrap();
        assert_eq!(serial, parallel);
        assert!(run_indexed(2, 5, |i| if i == 3 { Err(Error::invalid("x")) } else { Ok(i) }).is_err());
    }
}
