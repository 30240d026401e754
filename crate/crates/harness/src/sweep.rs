use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::metrics::{aggregate, MetricsTable, Summary};
use crate::run::{run, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    PMaxDbm,
    Upsilon,
    Users,
    /// `eta1:eta2`.
    EtaPair,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            Self::PMaxDbm => "P_max_dbm",
            Self::Upsilon => "upsilon",
            Self::Users => "K",
            Self::EtaPair => "eta-pair",
        }
    }
}

impl fmt::Display for SweepKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKey {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P_max_dbm" => Ok(Self::PMaxDbm),
            "upsilon" => Ok(Self::Upsilon),
            "K" => Ok(Self::Users),
            "eta-pair" => Ok(Self::EtaPair),
            _ => Err(HarnessError::Override(format!(
                "unknown sweep key `{s}` (P_max_dbm, upsilon, K, eta-pair)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub key: SweepKey,
    pub values: Vec<String>,
    /// Seeds per value, counting up from the base config's first seed.
    pub repetitions: usize,
}

fn parse_f64(key: SweepKey, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| HarnessError::Override(format!("{key} value `{v}` is not a finite number")))
}

/// `base` with the swept key set to `value`.
pub fn apply(base: &ExperimentConfig, key: SweepKey, value: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    let bad = |m: String| Err(HarnessError::Override(format!("{key} = {value}: {m}")));
    match key {
        SweepKey::PMaxDbm => cfg.network.p_max_dbm = parse_f64(key, value)?,
        SweepKey::Upsilon => {
            let u = parse_f64(key, value)?;
            if u <= 0.0 {
                return bad("must be positive".into());
            }
            cfg.network.upsilon_hz = u;
        }
        SweepKey::Users => {
            let k: usize = match value.trim().parse() {
                Ok(k) if k >= 1 => k,
                _ => return bad("must be a positive integer".into()),
            };
            if cfg.data.source == DataSource::EdfDir {
                if cfg.data.subjects.len() < k {
                    return bad(format!("only {} subjects configured", cfg.data.subjects.len()));
                }
                cfg.data.subjects.truncate(k);
            }
            cfg.env.users = k;
            if let Some(h) = &cfg.env.fixed_h {
                if h.len() != k {
                    return bad("fixed_h length does not match".into());
                }
            }
        }
        SweepKey::EtaPair => {
            let Some((a, b)) = value.split_once(':') else {
                return bad("expected eta1:eta2".into());
            };
            let (a, b) = (parse_f64(key, a)?, parse_f64(key, b)?);
            if a < 0.0 || b < 0.0 {
                return bad("weights must be non-negative".into());
            }
            cfg.env.eta1 = a;
            cfg.env.eta2 = b;
        }
    }
    cfg.experiment.name = format!("{}={}", key, value.trim());
    cfg.validate()?;
    Ok(cfg)
}

/// Per-run summary numbers that the sweep aggregates.
pub const RUN_METRICS: [&str; 5] = ["final_mean_Q", "test_mean_Q", "test_acc", "test_phi", "test_delay_ok"];

pub struct SweepResult {
    /// Every run's rows; run ids carry the swept key and value.
    pub table: MetricsTable,
    /// One row per (value, run metric), mean and std over seeds.
    pub summary: Vec<Summary>,
    /// `(value, seed, run metrics)` in job order.
    pub runs: Vec<(String, u64, [f64; 5])>,
}

/// Runs every (value, repetition) pair on up to `workers` threads (0 for
/// all cores) and merges results in job order.
pub fn sweep(spec: &SweepSpec, base: &ExperimentConfig, workers: usize) -> Result<SweepResult> {
    if spec.values.is_empty() || spec.repetitions == 0 {
        return Err(HarnessError::Override("sweep needs values and at least one repetition".into()));
    }
    let first = base.experiment.seeds.first().copied().unwrap_or(0);
    let mut jobs = Vec::new();
    for v in &spec.values {
        let cfg = apply(base, spec.key, v)?;
        for r in 0..spec.repetitions {
            jobs.push((v.trim().to_string(), cfg.clone(), first + r as u64));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Override(e.to_string()))?;
    let outcomes: Vec<Result<(String, u64, MetricsTable, [f64; 5])>> = pool.install(|| {
        jobs.par_iter()
            .map(|(v, cfg, seed)| {
                let opts = RunOptions {
                    run_id: format!("{}={v}/seed={seed}", spec.key),
                    ..RunOptions::default()
                };
                let o = run(cfg, *seed, &opts)?;
                let t = &o.test;
                let m = [o.converged_q(), t.mean_q, t.accuracy, t.mean_phi, t.delay_ok];
                Ok((v.clone(), *seed, o.table, m))
            })
            .collect()
    });
    let mut table = MetricsTable::new();
    let mut runs = Vec::new();
    for o in outcomes {
        let (v, seed, t, m) = o?;
        table.append(t);
        runs.push((v, seed, m));
    }
    let groups: Vec<String> = runs.iter().map(|(v, _, _)| format!("{}={v}", spec.key)).collect();
    let summary = aggregate(
        runs.iter()
            .zip(&groups)
            .flat_map(|((_, _, m), g)| RUN_METRICS.iter().zip(m).map(move |(name, &x)| (g.as_str(), *name, x))),
    );
    Ok(SweepResult { table, summary, runs })
}
