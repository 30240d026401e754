use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bciqoe_env::{DealOrder, EnvConfig, QoeEnv};
use bciqoe_learners::{EpisodeStats, EvalStats, Learner, TrainingLog};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cdf::{ecdf, write_cdf};
use crate::config::ExperimentConfig;
use crate::data::{build, Dataset};
use crate::error::{HarnessError, Result};
use crate::metrics::{MetricsTable, EPISODE_METRICS};

/// Where a run writes its files, if anywhere.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub run_id: String,
    /// Print one line per this many episodes to stderr; 0 is silent.
    pub progress_every: usize,
}

/// A named self-check performed at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub struct RunOutcome {
    pub run_id: String,
    pub seed: u64,
    pub table: MetricsTable,
    pub episodes: Vec<EpisodeStats>,
    pub test: EvalStats,
    pub learner: Learner,
    pub checks: Vec<Check>,
}

impl RunOutcome {
    /// Mean training QoE over the last tenth of the episodes.
    pub fn converged_q(&self) -> f64 {
        tail_mean(&self.episodes.iter().map(|e| e.mean_q).collect::<Vec<_>>(), 0.1)
    }

    /// Per-episode mean QoE.
    pub fn episode_q(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_q).collect()
    }

    /// Every training step's mean QoE.
    pub fn step_q(&self) -> Vec<f64> {
        self.episodes.iter().flat_map(|e| e.step_q.iter().copied()).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Mean of the last `frac` of `xs` (at least one element).
pub fn tail_mean(xs: &[f64], frac: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let n = ((xs.len() as f64 * frac).ceil() as usize).clamp(1, xs.len());
    xs[xs.len() - n..].iter().sum::<f64>() / n as f64
}

/// The training environment over `data.train`.
pub fn train_env(cfg: &ExperimentConfig, data: &Dataset) -> Result<QoeEnv> {
    Ok(QoeEnv::new(
        cfg.env.clone(),
        cfg.network_params()?,
        cfg.network.fading_scale,
        data.train.clone(),
        data.classes,
    )?)
}

/// A single pass over `data.test` in order, stopping when any user runs out.
pub fn test_env(cfg: &ExperimentConfig, data: &Dataset) -> Result<QoeEnv> {
    let env = EnvConfig {
        replay: false,
        order: DealOrder::Sequential,
        ..cfg.env.clone()
    };
    Ok(QoeEnv::new(
        env,
        cfg.network_params()?,
        cfg.network.fading_scale,
        data.test.clone(),
        data.classes,
    )?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::Io(path, e))
}

/// Trains for `T / O` episodes, logs every episode, saves the final
/// checkpoint and evaluates the frozen model once on the test split.
pub fn run(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = build(&cfg.data, cfg.users(), &mut rng)?;
    let mut env = train_env(cfg, &data)?;
    env.reset(&mut rng)?;
    let mut learner = Learner::new(cfg.learner.clone(), &env, &mut rng)?;
    let run_id = if opts.run_id.is_empty() {
        format!("{}/seed={seed}", cfg.experiment.name)
    } else {
        opts.run_id.clone()
    };

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.clone(), e))?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| HarnessError::Io(dir.clone(), e))?;
    }
    let mut log = match &opts.out_dir {
        Some(dir) => Some(TrainingLog::new(create(dir, &format!("training-seed{seed}.csv"))?)?),
        None => None,
    };

    let mut table = MetricsTable::new();
    let mut episodes = Vec::with_capacity(cfg.episodes());
    for e in 0..cfg.episodes() {
        let stats = learner.train_episode(&mut env, &mut rng)?;
        table.push_episode(&run_id, seed, &stats);
        if let Some(log) = log.as_mut() {
            log.write(&stats)?;
        }
        if opts.progress_every > 0 && (e + 1) % opts.progress_every == 0 {
            eprintln!(
                "{run_id} episode {}: mean_Q {:.4} acc {:.3} delay_ok {:.3}",
                e + 1,
                stats.mean_q,
                stats.train_acc,
                stats.delay_ok
            );
        }
        episodes.push(stats);
    }
    if let Some(log) = log.as_mut() {
        log.flush()?;
    }

    let mut tenv = test_env(cfg, &data)?;
    let test = learner.evaluate(&mut tenv, cfg.experiment.eval_steps, &mut rng)?;
    table.push_test(&run_id, seed, &test);

    let mut checks = vec![
        Check {
            name: "finite-metrics",
            passed: episodes.iter().all(|e| e.mean_q.is_finite()) && test.mean_q.is_finite(),
            detail: "every episode and the test pass have a finite mean QoE".into(),
        },
        Check {
            name: "row-count",
            passed: table.rows().iter().filter(|r| r.episode.is_some()).count()
                == episodes.len() * EPISODE_METRICS.len(),
            detail: format!("{} episodes x {} metrics", episodes.len(), EPISODE_METRICS.len()),
        },
    ];

    if let Some(dir) = &opts.out_dir {
        let ckpt = dir.join(format!("checkpoint-seed{seed}.ckpt"));
        learner.save(&ckpt)?;
        checks.push(Check {
            name: "checkpoint",
            passed: ckpt.is_file(),
            detail: ckpt.display().to_string(),
        });
        let outcome_q: Vec<f64> = episodes.iter().map(|e| e.mean_q).collect();
        write_cdf(&ecdf(&outcome_q), create(dir, &format!("cdf-episode-seed{seed}.csv"))?)?;
        let steps: Vec<f64> = episodes.iter().flat_map(|e| e.step_q.iter().copied()).collect();
        write_cdf(&ecdf(&steps), create(dir, &format!("cdf-step-seed{seed}.csv"))?)?;
    }

    Ok(RunOutcome {
        run_id,
        seed,
        table,
        episodes,
        test,
        learner,
        checks,
    })
}

/// Evaluates saved weights on the test split that `seed` produces.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, seed: u64, checkpoint: &Path) -> Result<EvalStats> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = build(&cfg.data, cfg.users(), &mut rng)?;
    let env = train_env(cfg, &data)?;
    let mut learner = Learner::new(cfg.learner.clone(), &env, &mut rng)?;
    learner.load(checkpoint)?;
    let mut tenv = test_env(cfg, &data)?;
    Ok(learner.evaluate(&mut tenv, cfg.experiment.eval_steps, &mut rng)?)
}
