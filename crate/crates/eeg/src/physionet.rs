use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::edf::{parse_edf, EdfFile};
use crate::error::{EegError, Result};
use crate::recording::{Event, Recording};

/// Maps annotation `code` in any of `runs` to class `label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRule {
    pub runs: Vec<u32>,
    pub code: String,
    pub label: usize,
}

/// Run/annotation to class table. Unmatched annotations are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabelTable {
    pub rules: Vec<RunRule>,
}

impl Default for RunLabelTable {
    /// Motor-movement/imagery protocol: run 1 eyes open, run 2 eyes closed,
    /// imagined fist runs (4, 8, 12) and imagined fists/feet runs (6, 10, 14).
    fn default() -> Self {
        let rule = |runs: &[u32], code: &str, label| RunRule {
            runs: runs.to_vec(),
            code: code.into(),
            label,
        };
        Self {
            rules: vec![
                rule(&[1], "T0", 0),
                rule(&[2], "T0", 1),
                rule(&[4, 8, 12], "T1", 2),
                rule(&[4, 8, 12], "T2", 2),
                rule(&[6, 10, 14], "T2", 3),
            ],
        }
    }
}

impl RunLabelTable {
    pub fn label(&self, run: u32, code: &str) -> Option<usize> {
        self.rules
            .iter()
            .find(|r| r.code == code && r.runs.contains(&run))
            .map(|r| r.label)
    }

    /// Runs mentioned by any rule, ascending.
    pub fn runs(&self) -> Vec<u32> {
        let mut runs: Vec<u32> = self.rules.iter().flat_map(|r| r.runs.iter().copied()).collect();
        runs.sort_unstable();
        runs.dedup();
        runs
    }
}

/// Converts a parsed EDF file into a [`Recording`], labeling annotations of
/// `run` through `table`. All data signals must share one sample rate.
pub fn recording_from_edf(edf: &EdfFile, user: usize, run: u32, table: &RunLabelTable) -> Result<Recording> {
    let idx: Vec<usize> = edf.data_signals().collect();
    let spr = idx
        .first()
        .map(|&i| edf.signals[i].samples_per_record)
        .ok_or_else(|| EegError::Invalid("EDF has no data signals".into()))?;
    if idx.iter().any(|&i| edf.signals[i].samples_per_record != spr) {
        return Err(EegError::RecordSize("data signals have different sample rates".into()));
    }
    let fs = spr as f64 / edf.record_duration;
    let samples: Vec<Vec<f64>> = idx.iter().map(|&i| edf.data[i].clone()).collect();
    let len = samples[0].len();
    let mut events = Vec::new();
    for a in &edf.annotations {
        let Some(label) = table.label(run, a.text.trim()) else {
            continue;
        };
        let onset = (a.onset * fs).round().max(0.0) as usize;
        if onset >= len {
            continue;
        }
        let duration = match a.duration {
            Some(d) => (d * fs).round() as usize,
            None => len - onset,
        };
        events.push(Event {
            onset,
            duration: duration.min(len - onset),
            label,
        });
    }
    Recording::new(user, fs, samples, events)
}

/// Parses `S###R##.edf` into (subject, run).
pub fn parse_file_name(name: &str) -> Option<(u32, u32)> {
    let stem = name.strip_suffix(".edf")?;
    let rest = stem.strip_prefix('S')?;
    let (subj, run) = rest.split_once('R')?;
    Some((subj.parse().ok()?, run.parse().ok()?))
}

/// Loads the given subjects from a directory tree holding `S###R##.edf`
/// files (either flat or in per-subject folders). User ids follow the order
/// of `subjects`.
pub fn load_dir(dir: &Path, subjects: &[u32], table: &RunLabelTable) -> Result<Vec<Recording>> {
    let mut files: Vec<(u32, u32, PathBuf)> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Some((s, r)) = path.file_name().and_then(|n| n.to_str()).and_then(parse_file_name) {
                files.push((s, r, path));
            }
        }
    }
    files.sort();
    let wanted = table.runs();
    let mut out = Vec::new();
    for (user, &subject) in subjects.iter().enumerate() {
        let mine: Vec<_> = files
            .iter()
            .filter(|(s, r, _)| *s == subject && wanted.contains(r))
            .collect();
        if mine.is_empty() {
            return Err(EegError::Invalid(format!("no EDF runs for subject {subject} in {}", dir.display())));
        }
        for (_, run, path) in mine {
            let edf = parse_edf(&std::fs::read(path)?)?;
            out.push(recording_from_edf(&edf, user, *run, table)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names() {
        assert_eq!(parse_file_name("S001R04.edf"), Some((1, 4)));
        assert_eq!(parse_file_name("S109R14.edf"), Some((109, 14)));
        assert_eq!(parse_file_name("S001R04.edf.event"), None);
    }

    #[test]
    fn default_table() {
        let t = RunLabelTable::default();
        assert_eq!(t.label(1, "T0"), Some(0));
        assert_eq!(t.label(2, "T0"), Some(1));
        assert_eq!(t.label(8, "T1"), Some(2));
        assert_eq!(t.label(10, "T2"), Some(3));
        assert_eq!(t.label(10, "T0"), None);
        assert_eq!(t.runs(), vec![1, 2, 4, 6, 8, 10, 12, 14]);
    }
}
