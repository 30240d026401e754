use serde::{Deserialize, Serialize};

use crate::error::{EegError, Result};

/// A labeled span of a recording, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub onset: usize,
    pub duration: usize,
    pub label: usize,
}

impl Event {
    pub fn contains(&self, t: usize) -> bool {
        t >= self.onset && t < self.onset + self.duration
    }
}

/// Multi-channel EEG for one user: `samples[j][t]` in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub user: usize,
    pub sample_rate: f64,
    pub samples: Vec<Vec<f64>>,
    pub events: Vec<Event>,
}

impl Recording {
    pub fn new(user: usize, sample_rate: f64, samples: Vec<Vec<f64>>, events: Vec<Event>) -> Result<Self> {
        let rec = Self {
            user,
            sample_rate,
            samples,
            events,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(EegError::Invalid(format!("sample rate {}", self.sample_rate)));
        }
        let len = self.len();
        if self.samples.is_empty() || len == 0 {
            return Err(EegError::Invalid("recording has no samples".into()));
        }
        if self.samples.iter().any(|c| c.len() != len) {
            return Err(EegError::Invalid("channels differ in length".into()));
        }
        if let Some(e) = self.events.iter().find(|e| e.onset >= len) {
            return Err(EegError::Invalid(format!("event onset {} beyond length {len}", e.onset)));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Label of the event covering sample `t`; the latest onset wins on overlap.
    pub fn label_at(&self, t: usize) -> Option<usize> {
        self.events
            .iter()
            .filter(|e| e.contains(t))
            .max_by_key(|e| e.onset)
            .map(|e| e.label)
    }
}
