use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EegError, Result};
use crate::recording::Recording;

/// One window of `channels x width` samples, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EegSegment {
    pub id: usize,
    pub user: usize,
    pub label: usize,
    pub channels: usize,
    pub width: usize,
    pub window: Vec<f64>,
    pub normalized: bool,
}

impl EegSegment {
    pub fn channel(&self, j: usize) -> &[f64] {
        &self.window[j * self.width..(j + 1) * self.width]
    }
}

/// Number of windows `floor((len - width) / stride) + 1`.
pub fn segment_count(len: usize, width: usize, stride: usize) -> usize {
    if len < width {
        0
    } else {
        (len - width) / stride + 1
    }
}

/// Stride `round(width * (1 - overlap))`, at least 1.
pub fn stride_for(width: usize, overlap: f64) -> usize {
    ((width as f64 * (1.0 - overlap)).round() as usize).max(1)
}

/// Cuts a recording into overlapping windows. Each window takes the label
/// of the event covering its first sample; windows starting outside every
/// event are dropped. Ids count windows in time order, dropped ones included.
pub fn segment(rec: &Recording, width: usize, overlap: f64) -> Result<Vec<EegSegment>> {
    if width < 2 {
        return Err(EegError::Invalid(format!("window width {width} < 2")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(EegError::Invalid(format!("overlap {overlap} outside [0, 1)")));
    }
    let len = rec.len();
    if len < width {
        return Err(EegError::TooShort { len, width });
    }
    let stride = stride_for(width, overlap);
    let n = segment_count(len, width, stride);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * stride;
        let Some(label) = rec.label_at(start) else {
            continue;
        };
        let mut window = Vec::with_capacity(rec.channels() * width);
        for ch in &rec.samples {
            window.extend_from_slice(&ch[start..start + width]);
        }
        out.push(EegSegment {
            id: i,
            user: rec.user,
            label,
            channels: rec.channels(),
            width,
            window,
            normalized: false,
        });
    }
    Ok(out)
}

/// Reassigns ids `0..n` in slice order.
pub fn renumber(segments: &mut [EegSegment]) {
    for (i, s) in segments.iter_mut().enumerate() {
        s.id = i;
    }
}

/// Per-channel normalization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels with zero variance; these are only centered.
    pub degenerate: Vec<usize>,
}

impl ZScore {
    /// Fits per-channel mean and population std over every sample of every
    /// segment (two-pass).
    pub fn fit(segments: &[EegSegment]) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| EegError::Invalid("cannot fit z-score on zero segments".into()))?;
        let (c, w) = (first.channels, first.width);
        if segments.iter().any(|s| s.channels != c || s.width != w) {
            return Err(EegError::Invalid("segments differ in shape".into()));
        }
        let n = (segments.len() * w) as f64;
        let mut mean = vec![0.0; c];
        for s in segments {
            for (j, m) in mean.iter_mut().enumerate() {
                *m += s.channel(j).iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for s in segments {
            for (j, v) in var.iter_mut().enumerate() {
                *v += s.channel(j).iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>();
            }
        }
        let mut degenerate = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let sd = (v / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    degenerate.push(j);
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std, degenerate })
    }

    pub fn apply(&self, segments: &mut [EegSegment]) -> Result<()> {
        for s in segments.iter_mut() {
            if s.channels != self.mean.len() {
                return Err(EegError::Invalid(format!(
                    "segment has {} channels, statistics have {}",
                    s.channels,
                    self.mean.len()
                )));
            }
            let w = s.width;
            for j in 0..s.channels {
                let (m, sd) = (self.mean[j], self.std[j]);
                for x in &mut s.window[j * w..(j + 1) * w] {
                    *x = (*x - m) / sd;
                }
            }
            s.normalized = true;
        }
        Ok(())
    }
}

/// Normalizes `train` and `test` with statistics fitted on `train` only.
pub fn zscore(train: &mut [EegSegment], test: &mut [EegSegment]) -> Result<ZScore> {
    let z = ZScore::fit(train)?;
    z.apply(train)?;
    z.apply(test)?;
    Ok(z)
}

/// Stratified split per (user, class): each group is shuffled and its first
/// `round(ratio * n)` members (clamped to `1..n-1`) go to train.
pub fn split<R: Rng + ?Sized>(
    segments: Vec<EegSegment>,
    ratio: f64,
    rng: &mut R,
) -> Result<(Vec<EegSegment>, Vec<EegSegment>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EegError::Invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut groups: BTreeMap<(usize, usize), Vec<EegSegment>> = BTreeMap::new();
    for s in segments {
        groups.entry((s.user, s.label)).or_default().push(s);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for ((user, label), mut g) in groups {
        if g.len() < 2 {
            return Err(EegError::SmallClass {
                user,
                label,
                count: g.len(),
            });
        }
        g.shuffle(rng);
        let k = ((ratio * g.len() as f64).round() as usize).clamp(1, g.len() - 1);
        let rest = g.split_off(k);
        train.extend(g);
        test.extend(rest);
    }
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionMode {
    /// Keep the window; the error rate only scales the reward and loss.
    #[default]
    Analytical,
    /// Zero the whole window with probability `eps_star`.
    SampleDrop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSegment {
    pub segment: EegSegment,
    pub eps_star: f64,
    pub mode: CorruptionMode,
    pub dropped: bool,
}

pub fn corrupt<R: Rng + ?Sized>(
    segment: &EegSegment,
    eps_star: f64,
    mode: CorruptionMode,
    rng: &mut R,
) -> Result<CorruptedSegment> {
    if !(0.0..=1.0).contains(&eps_star) {
        return Err(EegError::Invalid(format!("eps_star {eps_star} outside [0, 1]")));
    }
    let mut seg = segment.clone();
    let dropped = match mode {
        CorruptionMode::Analytical => false,
        CorruptionMode::SampleDrop => rng.random::<f64>() < eps_star,
    };
    if dropped {
        seg.window.iter_mut().for_each(|x| *x = 0.0);
    }
    Ok(CorruptedSegment {
        segment: seg,
        eps_star,
        mode,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Event;

    fn ramp(len: usize) -> Recording {
        let ch: Vec<f64> = (0..len).map(|t| t as f64).collect();
        Recording::new(
            0,
            160.0,
            vec![ch.clone(), ch],
            vec![Event {
                onset: 0,
                duration: len,
                label: 1,
            }],
        )
        .unwrap()
    }

    #[test]
    fn window_edges() {
        assert_eq!(segment(&ramp(16), 16, 0.5).unwrap().len(), 1);
        let s = segment(&ramp(32), 16, 0.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].channel(0)[0], 16.0);
        assert!(matches!(segment(&ramp(8), 16, 0.5), Err(EegError::TooShort { .. })));
        assert!(segment(&ramp(32), 1, 0.5).is_err());
    }

    #[test]
    fn corrupt_modes() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let seg = segment(&ramp(16), 16, 0.5).unwrap().remove(0);
        let c = corrupt(&seg, 0.0, CorruptionMode::SampleDrop, &mut rng).unwrap();
        assert_eq!(c.segment.window, seg.window);
        let c = corrupt(&seg, 1.0, CorruptionMode::SampleDrop, &mut rng).unwrap();
        assert!(c.dropped && c.segment.window.iter().all(|&x| x == 0.0));
        let c = corrupt(&seg, 1.0, CorruptionMode::Analytical, &mut rng).unwrap();
        assert_eq!(c.segment.window, seg.window);
        assert!(corrupt(&seg, 1.5, CorruptionMode::Analytical, &mut rng).is_err());
    }
}
