use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EegError, Result};
use crate::recording::{Event, Recording};

/// Per-user signal model: channel gains, per-class phase and oscillation
/// frequency, and additive white noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub band_hz: Vec<f64>,
    pub noise: f64,
}

impl UserProfile {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.amplitude.is_empty() || self.amplitude.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(EegError::Invalid("amplitude scales must be positive".into()));
        }
        if self.band_hz.is_empty() || self.phase.len() != self.band_hz.len() {
            return Err(EegError::Invalid("need one phase per class band".into()));
        }
        if let Some(f) = self.band_hz.iter().find(|&&f| !(f > 0.0 && f < sample_rate / 2.0)) {
            return Err(EegError::Invalid(format!("band centre {f} Hz outside (0, fs/2)")));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(EegError::Invalid("noise floor must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.band_hz.len()
    }

    pub fn channels(&self) -> usize {
        self.amplitude.len()
    }
}

/// Population from which user profiles are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(rename = "J")]
    pub channels: usize,
    pub sample_rate: f64,
    pub band_hz: Vec<f64>,
    /// Per-user uniform jitter of each class band centre, +/- Hz.
    pub band_jitter_hz: f64,
    pub amp_lo: f64,
    pub amp_hi: f64,
    pub noise: f64,
    pub epoch_samples: usize,
    pub epochs_per_user: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            sample_rate: 160.0,
            band_hz: vec![8.0, 12.0, 18.0, 24.0],
            band_jitter_hz: 0.0,
            amp_lo: 0.5,
            amp_hi: 2.0,
            noise: 1.0,
            epoch_samples: 160,
            epochs_per_user: 40,
        }
    }
}

impl SynthConfig {
    /// Draws one user: log-uniform channel gains, uniform class phases.
    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> UserProfile {
        let (lo, hi) = (self.amp_lo.ln(), self.amp_hi.ln());
        let amplitude = (0..self.channels).map(|_| rng.random_range(lo..=hi).exp()).collect();
        let phase = self.band_hz.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let band_hz = self
            .band_hz
            .iter()
            .map(|&f| {
                if self.band_jitter_hz > 0.0 {
                    f + rng.random_range(-self.band_jitter_hz..=self.band_jitter_hz)
                } else {
                    f
                }
            })
            .collect();
        UserProfile {
            amplitude,
            phase,
            band_hz,
            noise: self.noise,
        }
    }
}

/// Synthesizes `n_epochs` consecutive epochs of `epoch_samples` each. Classes
/// are balanced and shuffled; epoch `i` with class `c` is
/// `a_j sin(2 pi f_c t / fs + phase_c) + noise * N(0,1)` with `t` counted
/// from the epoch onset.
pub fn synth_recording<R: Rng + ?Sized>(
    profile: &UserProfile,
    user: usize,
    n_epochs: usize,
    epoch_samples: usize,
    sample_rate: f64,
    rng: &mut R,
) -> Result<Recording> {
    if n_epochs == 0 || epoch_samples == 0 {
        return Err(EegError::Invalid("need at least one non-empty epoch".into()));
    }
    profile.validate(sample_rate)?;
    let c = profile.classes();
    let mut classes: Vec<usize> = (0..n_epochs).map(|i| i % c).collect();
    classes.shuffle(rng);

    let len = n_epochs * epoch_samples;
    let mut samples = vec![Vec::with_capacity(len); profile.channels()];
    let mut events = Vec::with_capacity(n_epochs);
    for (e, &label) in classes.iter().enumerate() {
        events.push(Event {
            onset: e * epoch_samples,
            duration: epoch_samples,
            label,
        });
        let w = 2.0 * PI * profile.band_hz[label] / sample_rate;
        for t in 0..epoch_samples {
            let s = (w * t as f64 + profile.phase[label]).sin();
            for (j, ch) in samples.iter_mut().enumerate() {
                let n: f64 = StandardNormal.sample(rng);
                ch.push(profile.amplitude[j] * s + profile.noise * n);
            }
        }
    }
    Recording::new(user, sample_rate, samples, events)
}
