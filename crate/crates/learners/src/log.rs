use std::io::Write;

use crate::error::Result;
use crate::learner::EpisodeStats;

/// Per-episode training curve as CSV.
pub struct TrainingLog<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TrainingLog<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "episode",
            "mean_Q",
            "train_acc",
            "mean_delay",
            "actor_loss",
            "critic_loss",
            "ce_loss",
        ])?;
        Ok(Self { out })
    }

    pub fn write(&mut self, s: &EpisodeStats) -> Result<()> {
        let u = &s.update;
        self.out.write_record([
            s.episode.to_string(),
            s.mean_q.to_string(),
            s.train_acc.to_string(),
            s.mean_delay.to_string(),
            u.actor_loss.to_string(),
            u.critic_loss.to_string(),
            u.ce_loss.to_string(),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
