use std::collections::BTreeMap;
use std::io::{Read, Write};

use bciqoe_learners::{EpisodeStats, EvalStats};

use crate::error::{HarnessError, Result};

/// Written in the first column of every row.
pub const SCHEMA: &str = "bciqoe-metrics/1";
pub const HEADER: [&str; 6] = ["schema", "run_id", "seed", "episode", "metric", "value"];

/// Logged once per training episode.
pub const EPISODE_METRICS: [&str; 7] = [
    "mean_Q",
    "train_acc",
    "mean_delay",
    "delay_ok",
    "actor_loss",
    "critic_loss",
    "ce_loss",
];

/// Logged once per run after training, with episode `test`.
pub const TEST_METRICS: [&str; 6] = [
    "test_mean_Q",
    "test_acc",
    "test_phi",
    "test_mean_delay",
    "test_delay_ok",
    "test_steps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub run_id: String,
    pub seed: u64,
    /// `None` for the final test evaluation.
    pub episode: Option<usize>,
    pub metric: String,
    pub value: f64,
}

/// Long-format metrics: one row per (run, seed, episode, metric). Rows are
/// only ever appended.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    rows: Vec<MetricRow>,
}

impl MetricsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, run_id: &str, seed: u64, episode: Option<usize>, metric: &str, value: f64) {
        self.rows.push(MetricRow {
            run_id: run_id.into(),
            seed,
            episode,
            metric: metric.into(),
            value,
        });
    }

    pub fn append(&mut self, other: MetricsTable) {
        self.rows.extend(other.rows);
    }

    pub fn push_episode(&mut self, run_id: &str, seed: u64, s: &EpisodeStats) {
        let u = &s.update;
        let values = [
            s.mean_q,
            s.train_acc,
            s.mean_delay,
            s.delay_ok,
            u.actor_loss,
            u.critic_loss,
            u.ce_loss,
        ];
        for (m, v) in EPISODE_METRICS.iter().zip(values) {
            self.push(run_id, seed, Some(s.episode), m, v);
        }
    }

    pub fn push_test(&mut self, run_id: &str, seed: u64, e: &EvalStats) {
        let values = [
            e.mean_q,
            e.accuracy,
            e.mean_phi,
            e.mean_delay,
            e.delay_ok,
            e.steps as f64,
        ];
        for (m, v) in TEST_METRICS.iter().zip(values) {
            self.push(run_id, seed, None, m, v);
        }
    }

    /// Per-episode values of `metric` for one run, in episode order.
    pub fn series(&self, run_id: &str, metric: &str) -> Vec<f64> {
        let mut pts: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.run_id == run_id && r.metric == metric)
            .filter_map(|r| r.episode.map(|e| (e, r.value)))
            .collect();
        pts.sort_by_key(|p| p.0);
        pts.into_iter().map(|p| p.1).collect()
    }

    /// The test-evaluation value of `metric` for one run.
    pub fn test_value(&self, run_id: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.run_id == run_id && r.metric == metric && r.episode.is_none())
            .map(|r| r.value)
    }

    pub fn run_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.rows.iter().map(|r| r.run_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for r in &self.rows {
            let ep = r.episode.map_or_else(|| "test".to_string(), |e| e.to_string());
            out.write_record([SCHEMA, &r.run_id, &r.seed.to_string(), &ep, &r.metric, &r.value.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != HEADER {
            return Err(HarnessError::Dataset("not a metrics table header".into()));
        }
        let mut table = Self::new();
        for rec in rd.records() {
            let rec = rec?;
            let bad = |what: &str| HarnessError::Dataset(format!("metrics row {:?}: bad {what}", rec.position()));
            if &rec[0] != SCHEMA {
                return Err(bad("schema"));
            }
            let seed = rec[2].parse().map_err(|_| bad("seed"))?;
            let episode = match &rec[3] {
                "test" => None,
                e => Some(e.parse().map_err(|_| bad("episode"))?),
            };
            let value = rec[5].parse().map_err(|_| bad("value"))?;
            table.push(&rec[1], seed, episode, &rec[4], value);
        }
        Ok(table)
    }
}

/// Mean and sample std of one metric over a group of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub group: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and sample standard deviation; values are sorted first so the
/// result does not depend on input order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups `(group, metric, value)` triples and summarizes each group.
pub fn aggregate<'a>(items: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Vec<Summary> {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (g, m, v) in items {
        groups.entry((g.to_string(), m.to_string())).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|((group, metric), vals)| {
            let (mean, std) = mean_std(&vals);
            Summary {
                group,
                metric,
                mean,
                std,
                n: vals.len(),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[Summary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["group", "metric", "mean", "std", "n"])?;
    for s in rows {
        out.write_record([
            s.group.clone(),
            s.metric.clone(),
            s.mean.to_string(),
            s.std.to_string(),
            s.n.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
