use std::collections::BTreeMap;

use bciqoe_eeg::physionet::load_dir;
use bciqoe_eeg::{renumber, segment, split, synth_recording, zscore, EegSegment, Recording, RunLabelTable};
use rand::Rng;

use crate::config::{DataConfig, DataSource};
use crate::error::{HarnessError, Result};

/// Normalized windows dealt per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Vec<EegSegment>>,
    pub test: Vec<Vec<EegSegment>>,
    pub classes: usize,
}

impl Dataset {
    pub fn users(&self) -> usize {
        self.train.len()
    }

    pub fn all_test(&self) -> Vec<EegSegment> {
        self.test.concat()
    }
}

/// Recordings for `users` users: synthetic profiles are drawn first so that
/// user `k` is the same person whatever `users` is.
pub fn recordings<R: Rng + ?Sized>(cfg: &DataConfig, users: usize, rng: &mut R) -> Result<(Vec<Recording>, usize)> {
    match cfg.source {
        DataSource::Synthetic => {
            let s = &cfg.synth;
            let profiles: Vec<_> = (0..users).map(|_| s.sample_profile(rng)).collect();
            let recs = profiles
                .iter()
                .enumerate()
                .map(|(k, p)| synth_recording(p, k, s.epochs_per_user, s.epoch_samples, s.sample_rate, rng))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((recs, s.band_hz.len()))
        }
        DataSource::EdfDir => {
            let dir = cfg
                .path
                .as_ref()
                .ok_or_else(|| HarnessError::Dataset("edf-dir needs data.path".into()))?;
            if !dir.is_dir() {
                return Err(HarnessError::Dataset(format!("{} is not a directory", dir.display())));
            }
            let table = RunLabelTable::default();
            let classes = table.rules.iter().map(|r| r.label + 1).max().unwrap_or(0);
            let recs = load_dir(dir, &cfg.subjects, &table)?;
            Ok((recs, classes))
        }
    }
}

/// Windows, per-user stratified split and z-scoring fitted on training data.
pub fn build<R: Rng + ?Sized>(cfg: &DataConfig, users: usize, rng: &mut R) -> Result<Dataset> {
    let (recs, classes) = recordings(cfg, users, rng)?;
    let mut all = Vec::new();
    for r in &recs {
        all.extend(segment(r, cfg.width, cfg.overlap)?);
    }
    renumber(&mut all);
    let (mut train, mut test) = split(all, cfg.train_ratio, rng)?;
    zscore(&mut train, &mut test)?;
    let by_user = |segs: Vec<EegSegment>| {
        let mut m: BTreeMap<usize, Vec<EegSegment>> = (0..users).map(|k| (k, Vec::new())).collect();
        for s in segs {
            m.entry(s.user).or_default().push(s);
        }
        m.into_values().collect::<Vec<_>>()
    };
    let (train, test) = (by_user(train), by_user(test));
    if let Some(k) = train.iter().chain(&test).position(Vec::is_empty) {
        return Err(HarnessError::Dataset(format!("user {} has no windows", k % users)));
    }
    Ok(Dataset { train, test, classes })
}
