use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WirelessError};

/// Per-CPU load fractions at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpuLoadState {
    pub u: Vec<f64>,
}

impl CpuLoadState {
    pub fn uniform(n: usize, value: f64) -> Self {
        Self { u: vec![value; n] }
    }
}

/// Parameters of the bounded random walk `u <- reflect(u + drift + noise * N(0,1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpuWalk {
    pub drift: f64,
    pub noise: f64,
    pub u_lo: f64,
    pub u_hi: f64,
}

impl Default for CpuWalk {
    fn default() -> Self {
        Self {
            drift: 0.0,
            noise: 0.05,
            u_lo: 0.05,
            u_hi: 0.95,
        }
    }
}

impl CpuWalk {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.u_lo && self.u_lo < self.u_hi && self.u_hi < 1.0) {
            return Err(invalid(
                "cpu.u_lo/u_hi",
                format!("need 0 < u_lo < u_hi < 1, got [{}, {}]", self.u_lo, self.u_hi),
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.drift.is_finite()) {
            return Err(invalid("cpu.noise", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Folds `x` back into `[u_lo, u_hi]` by mirror reflection at both walls.
    pub fn reflect(&self, x: f64) -> f64 {
        let width = self.u_hi - self.u_lo;
        let period = 2.0 * width;
        let y = (x - self.u_lo).rem_euclid(period);
        let folded = if y > width { period - y } else { y };
        (self.u_lo + folded).clamp(self.u_lo, self.u_hi)
    }
}

/// One step of the reflected random walk for every CPU.
pub fn step_cpu_load<R: Rng + ?Sized>(state: &CpuLoadState, rng: &mut R, walk: &CpuWalk) -> CpuLoadState {
    let u = state
        .u
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(rng);
            walk.reflect(x + walk.drift + walk.noise * z)
        })
        .collect();
    CpuLoadState { u }
}

/// A recorded load trace, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct CpuTrace {
    rows: Vec<Vec<f64>>,
}

impl CpuTrace {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map(Vec::len).ok_or_else(|| WirelessError::Trace("empty trace".into()))?;
        if n == 0 {
            return Err(WirelessError::Trace("trace has no CPU columns".into()));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(WirelessError::Trace(format!("row {t} has {} loads, expected {n}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                return Err(WirelessError::Trace(format!("row {t}: load {v} outside (0,1)")));
            }
        }
        Ok(Self { rows })
    }

    /// Parses CSV with header `t,u_1,...,u_N`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(WirelessError::Trace("header must start with `t` followed by load columns".into()));
        }
        for (i, h) in headers.iter().enumerate().skip(1) {
            if h != format!("u_{i}") {
                return Err(WirelessError::Trace(format!("column {i} should be u_{i}, found {h}")));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>().map_err(|e| WirelessError::Trace(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n_cpus()).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for (t, row) in self.rows.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_cpus(&self) -> usize {
        self.rows[0].len()
    }

    /// Row `t`, wrapping around at the end of the trace.
    pub fn at(&self, t: usize) -> CpuLoadState {
        CpuLoadState {
            u: self.rows[t % self.rows.len()].clone(),
        }
    }
}

/// Source of CPU load states: a synthetic walk or a replayed trace.
#[derive(Debug, Clone)]
pub enum CpuProcess {
    Walk { walk: CpuWalk, state: CpuLoadState },
    Trace { trace: CpuTrace, t: usize },
}

impl CpuProcess {
    pub fn walk(walk: CpuWalk, start: CpuLoadState) -> Result<Self> {
        walk.validate()?;
        if let Some(v) = start.u.iter().find(|v| !(walk.u_lo..=walk.u_hi).contains(*v)) {
            return Err(invalid("cpu.u_start", format!("{v} outside [u_lo, u_hi]")));
        }
        Ok(CpuProcess::Walk { walk, state: start })
    }

    pub fn trace(trace: CpuTrace) -> Self {
        CpuProcess::Trace { trace, t: 0 }
    }

    pub fn current(&self) -> CpuLoadState {
        match self {
            CpuProcess::Walk { state, .. } => state.clone(),
            CpuProcess::Trace { trace, t } => trace.at(*t),
        }
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self {
            CpuProcess::Walk { walk, state } => *state = step_cpu_load(state, rng, walk),
            CpuProcess::Trace { t, .. } => *t += 1,
        }
    }
}
