use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bciqoe_harness::cdf::{ecdf, write_cdf};
use bciqoe_harness::metrics::write_summary;
use bciqoe_harness::oracle::{oracle, ClassifierModel, OracleSpec};
use bciqoe_harness::plot::{svg, Style};
use bciqoe_harness::run::evaluate_checkpoint;
use bciqoe_harness::{run, sweep, ExperimentConfig, HarnessError, MetricsTable, RunOptions, SweepSpec};
use bciqoe_wireless::{calibrate_z, dbm_to_watts, mean_uplink_per};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bciqoe", version, about = "Train and evaluate joint radio/compute/EEG-classification learners")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set learner.kind=meta --set env.K=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let cfg = ExperimentConfig::load(self.config.as_deref(), &self.overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one learner per configured seed, then evaluate on the test split.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory for metrics, logs, CDFs and checkpoints.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Progress line every N episodes (0 for none).
        #[arg(long, default_value_t = 100)]
        progress: usize,
    },
    /// Repeat runs across values of one key and aggregate over seeds.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// P_max_dbm, upsilon, K or eta-pair.
        #[arg(long)]
        key: String,
        /// Comma-separated values; eta pairs as `a:b`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(short, long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Evaluate a saved checkpoint on the test split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Brute-force the best single-step QoE on a frozen tiny instance.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Channel gains, one per user.
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<f64>,
        /// Load of the serving CPU.
        #[arg(long, default_value_t = 0.5)]
        u: f64,
        #[arg(long, default_value_t = 8)]
        power_levels: usize,
        #[arg(long, default_value_t = 8)]
        tau_levels: usize,
    },
    /// Render a metric from a metrics CSV as SVG.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "mean_Q")]
        metric: String,
        #[arg(long, value_enum, default_value_t = PlotKind::Curve)]
        kind: PlotKind,
        #[arg(short, long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Solve for the waterfall threshold z giving a target mean uplink PER.
    CalibrateZ {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Transmit power at which the target applies.
        #[arg(long, default_value_t = -20.0)]
        p_dbm: f64,
        #[arg(long, default_value_t = 0.5)]
        target: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// Metric against episode, one line per run.
    Curve,
    /// Empirical CDF of the per-episode values, one line per run.
    Cdf,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every run-level check passed.
fn dispatch(cmd: Cmd) -> Result<bool, HarnessError> {
    match cmd {
        Cmd::Run { cfg, out, progress } => {
            let cfg = cfg.load()?;
            let mut table = MetricsTable::new();
            let mut ok = true;
            for &seed in &cfg.experiment.seeds {
                let opts = RunOptions {
                    out_dir: Some(out.clone()),
                    run_id: String::new(),
                    progress_every: progress,
                };
                let o = run(&cfg, seed, &opts)?;
                println!(
                    "{}: converged mean_Q {:.4}, test mean_Q {:.4}, test accuracy {:.4}, delay ok {:.4}",
                    o.run_id,
                    o.converged_q(),
                    o.test.mean_q,
                    o.test.accuracy,
                    o.test.delay_ok
                );
                for c in &o.checks {
                    println!("  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                ok &= o.all_passed();
                table.append(o.table);
            }
            table.write_csv(create(&out.join("metrics.csv"))?)?;
            Ok(ok)
        }
        Cmd::Sweep {
            cfg,
            key,
            values,
            reps,
            out,
        } => {
            let base = cfg.load()?;
            let spec = SweepSpec {
                key: key.parse()?,
                values,
                repetitions: reps,
            };
            let res = sweep(&spec, &base, base.experiment.workers)?;
            res.table.write_csv(create(&out.join("metrics.csv"))?)?;
            write_summary(&res.summary, create(&out.join("summary.csv"))?)?;
            for s in &res.summary {
                println!("{} {}: {:.4} ± {:.4} (n={})", s.group, s.metric, s.mean, s.std, s.n);
            }
            Ok(res.summary.iter().all(|s| s.mean.is_finite()))
        }
        Cmd::Eval { cfg, checkpoint, seed } => {
            let cfg = cfg.load()?;
            let e = evaluate_checkpoint(&cfg, seed, &checkpoint)?;
            println!(
                "steps {} mean_Q {:.4} accuracy {:.4} phi {:.4} mean delay {:.3e} s delay ok {:.4}",
                e.steps, e.mean_q, e.accuracy, e.mean_phi, e.mean_delay, e.delay_ok
            );
            Ok(e.mean_q.is_finite())
        }
        Cmd::Oracle {
            cfg,
            h,
            u,
            power_levels,
            tau_levels,
        } => {
            let cfg = cfg.load()?;
            let spec = OracleSpec {
                net: cfg.network_params()?,
                h,
                u,
                eta1: cfg.env.eta1,
                eta2: cfg.env.eta2,
                power_levels,
                tau_levels,
                classifier: ClassifierModel::Ideal,
            };
            let r = oracle(&spec)?;
            println!("best mean QoE {:.6} over {} grid points", r.value, r.evaluated);
            println!("blocks {:?}", r.action.blocks);
            println!("p {:?}", r.action.p);
            println!("tau {:?}", r.action.tau);
            Ok(true)
        }
        Cmd::Plot {
            metrics,
            metric,
            kind,
            out,
        } => {
            let f = File::open(&metrics).map_err(|e| HarnessError::Io(metrics.clone(), e))?;
            let table = MetricsTable::read_csv(f)?;
            let series: Vec<(String, Vec<(f64, f64)>)> = table
                .run_ids()
                .into_iter()
                .map(|id| {
                    let ys = table.series(&id, &metric);
                    let pts = match kind {
                        PlotKind::Curve => ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect(),
                        PlotKind::Cdf => ecdf(&ys),
                    };
                    (id, pts)
                })
                .filter(|s| !s.1.is_empty())
                .collect();
            let doc = match kind {
                PlotKind::Curve => svg(&metric, "episode", &metric, &series, Style::Line),
                PlotKind::Cdf => svg(&format!("CDF of {metric}"), &metric, "fraction", &series, Style::Steps),
            };
            std::fs::write(&out, doc).map_err(|e| HarnessError::Io(out.clone(), e))?;
            if let PlotKind::Cdf = kind {
                for (id, _) in &series {
                    let name = id.replace(['/', '='], "_");
                    let path = out.with_file_name(format!("cdf-{name}.csv"));
                    write_cdf(&ecdf(&table.series(id, &metric)), create(&path)?)?;
                }
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
        Cmd::CalibrateZ { cfg, p_dbm, target } => {
            let cfg = cfg.load()?;
            let net = cfg.network_params()?;
            let p = dbm_to_watts(p_dbm);
            let z = calibrate_z(&net, p, cfg.network.fading_scale, target)?;
            let check = mean_uplink_per(z, p, net.sigma_u2, cfg.network.fading_scale);
            println!("z = {z:.6e} (mean PER {check:.6} at {p_dbm} dBm)");
            Ok(true)
        }
    }
}
