use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use cwlearn::bench::{
    exhaustive_calibration, log_vs_raw_r2, opportunity_sweep, run_bench, save_csv, save_ndjson,
    training_speed_sim, write_csv, BenchConfig, CalibRow, SpeedAlgorithm, SweepSpec, TrainSpeedConfig,
};
use cwlearn::controller::server::{attach, serve, spawn_replay};
use cwlearn::controller::{run_replay, ControllerConfig, Policy, TraceSource, Traffic};
use cwlearn::learner::DEFAULT_GRID;
use cwlearn::mac_sim::SimConfig;
use cwlearn::workload::{generate_trace, load_trace, GenParams, Trace};

#[derive(Parser)]
#[command(name = "cwlearn", version, about = "Contention-window experiments on a simulated CSMA/CA channel")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (or directory for `bench`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TraceArgs {
    /// Trace CSV; without it a trace is generated.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    stations: usize,
    #[arg(long, default_value_t = 3600)]
    duration_s: usize,
    #[arg(long, default_value_t = 11)]
    trace_seed: u64,
}

impl TraceArgs {
    fn params(&self) -> GenParams {
        GenParams {
            n_stations: self.stations,
            duration_s: self.duration_s,
            seed: self.trace_seed,
            ..GenParams::default()
        }
    }

    fn load(&self) -> Result<Trace> {
        Ok(match &self.trace {
            Some(p) => load_trace(p).with_context(|| format!("loading {}", p.display()))?,
            None => generate_trace(&self.params())?,
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Saturated (n, CW) sweep with BEB baselines.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Comma-separated CW values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u32>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        burst_s: Option<f64>,
        /// Use basic access instead of RTS/CTS.
        #[arg(long)]
        basic: bool,
        #[arg(long)]
        controlled_fraction: Option<f64>,
    },
    /// Exhaustive per-period calibration of a trace; prints the R² check.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u32>>,
        /// Use the default short-frame RTS/CTS channel instead of
        /// aggregated basic access.
        #[arg(long)]
        short_frames: bool,
        #[arg(long)]
        volume: bool,
    },
    /// Fraction-of-optimal curves from a calibration dataset.
    Trainspeed {
        #[command(flatten)]
        common: Common,
        /// NDJSON written by `calibrate`.
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long, value_delimiter = ',')]
        train_times: Option<Vec<usize>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        eval_start: Option<usize>,
        #[arg(long)]
        eval_len: Option<usize>,
    },
    /// Sweep, calibration, training speed and windowed comparison.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_sweep: bool,
    },
    /// Replay a trace under one policy and write the run log.
    Replay {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Replay with the HTTP status/control surface attached.
    Serve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        bind: Option<String>,
        /// Wall-clock time per period.
        #[arg(long, default_value_t = 1000)]
        pace_ms: u64,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// beb, fixed:<cw>, aba, lr, nb, dnn
    #[arg(long)]
    policy: Option<Policy>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    period_s: Option<u64>,
    #[arg(long)]
    controlled_aps: Option<usize>,
    #[arg(long)]
    volume: bool,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn config_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    path.as_deref().map_or_else(|| Ok(T::default()), read_json)
}

fn controller_config(common: &Common, run: &RunArgs) -> Result<ControllerConfig> {
    let mut cfg: ControllerConfig = config_or_default(&common.config)?;
    if let Some(p) = run.policy {
        cfg.policy = p;
    }
    if let Some(t) = &run.trace {
        cfg.trace = TraceSource::Path(t.clone());
    }
    if let Some(p) = run.period_s {
        cfg.period_s = p;
    }
    if run.controlled_aps.is_some() {
        cfg.controlled_aps = run.controlled_aps;
    }
    if run.volume {
        cfg.traffic = Traffic::Volume;
    }
    if let Some(s) = common.seed {
        cfg.sim.seed = s;
        cfg.learner_seed = s;
    }
    if common.out.is_some() {
        cfg.output = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Sweep {
            common,
            n_min,
            n_max,
            grid,
            repetitions,
            burst_s,
            basic,
            controlled_fraction,
        } => {
            let mut spec: SweepSpec = config_or_default(&common.config)?;
            spec.n_min = n_min.unwrap_or(spec.n_min);
            spec.n_max = n_max.unwrap_or(spec.n_max);
            spec.cw_grid = grid.unwrap_or(spec.cw_grid);
            spec.repetitions = repetitions.unwrap_or(spec.repetitions);
            spec.burst_s = burst_s.unwrap_or(spec.burst_s);
            spec.controlled_fraction = controlled_fraction.unwrap_or(spec.controlled_fraction);
            spec.seed = common.seed.unwrap_or(spec.seed);
            if basic {
                spec.rtscts = false;
            }
            let rows = opportunity_sweep(&spec)?;
            match &common.out {
                Some(p) => save_csv(&rows, p)?,
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
        }
        Cmd::Calibrate {
            common,
            trace,
            grid,
            short_frames,
            volume,
        } => {
            let tr = trace.load()?;
            let mut sim = if short_frames {
                SimConfig::default()
            } else {
                SimConfig::aggregated_basic()
            };
            if let Some(cfg) = &common.config {
                sim = read_json(cfg)?;
            }
            if let Some(s) = common.seed {
                sim.seed = s;
            }
            let grid = grid.unwrap_or_else(|| DEFAULT_GRID.to_vec());
            let traffic = if volume { Traffic::Volume } else { Traffic::Saturated };
            log::info!("calibrating {} periods over {} CWs", tr.seconds(), grid.len());
            let rows = exhaustive_calibration(&tr, &grid, &sim, 1, traffic)?;
            let r2 = log_vs_raw_r2(&rows)?;
            println!("{}", serde_json::to_string(&r2)?);
            if let Some(p) = &common.out {
                save_ndjson(&rows, p)?;
            }
        }
        Cmd::Trainspeed {
            common,
            calibration,
            train_times,
            repetitions,
            eval_start,
            eval_len,
        } => {
            let f = std::fs::File::open(&calibration).with_context(|| format!("opening {}", calibration.display()))?;
            let mut rows: Vec<CalibRow> = Vec::new();
            for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                rows.push(serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?);
            }
            if rows.is_empty() {
                bail!("calibration file is empty");
            }
            let mut cfg: TrainSpeedConfig = config_or_default(&common.config)?;
            cfg.train_times = train_times.unwrap_or(cfg.train_times);
            cfg.repetitions = repetitions.unwrap_or(cfg.repetitions);
            cfg.eval_start = eval_start.unwrap_or(rows.len() / 2);
            cfg.eval_len = eval_len.unwrap_or(rows.len() - cfg.eval_start);
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            let out = training_speed_sim(&rows, &SpeedAlgorithm::all(), &cfg)?;
            match &common.out {
                Some(p) => save_csv(&out, p)?,
                None => write_csv(&out, std::io::stdout().lock())?,
            }
        }
        Cmd::Bench { common, no_sweep } => {
            let mut cfg: BenchConfig = config_or_default(&common.config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if no_sweep {
                cfg.run_sweep = false;
            }
            let dir = common.out.unwrap_or_else(|| PathBuf::from("bench-out"));
            let report = run_bench(&cfg)?;
            report.write(&dir)?;
            let c = &report.comparison;
            for (i, name) in c.algorithms.iter().enumerate() {
                println!(
                    "{name:10} median {:8.1} Mbit/s  Avg(>BEB) {:6.2}  SigL(>BEB) {:3}",
                    c.medians[i] / 1e6,
                    c.avg[i][0],
                    c.sigl[i][0]
                );
            }
            log::info!("tables written to {}", dir.display());
        }
        Cmd::Replay { common, run } => {
            let cfg = controller_config(&common, &run)?;
            let trace = cfg.trace.load()?;
            let log = run_replay(&cfg, &trace)?;
            if cfg.output.is_none() {
                log.write_ndjson(std::io::stdout().lock())?;
            } else {
                let series = log.aggregate_series();
                let mean = series.iter().sum::<f64>() / series.len().max(1) as f64;
                log::info!("{} periods, mean aggregate {:.1} Mbit/s", series.len(), mean / 1e6);
            }
        }
        Cmd::Serve {
            common,
            run,
            bind,
            pace_ms,
        } => {
            let mut cfg = controller_config(&common, &run)?;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let trace = cfg.trace.load()?;
            let mut driver = cwlearn::controller::ReplayDriver::new(cfg.clone(), trace)?;
            let shared = attach(&mut driver);
            let replay = spawn_replay(driver, shared.clone(), Duration::from_millis(pace_ms));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
                log::info!("listening on {}", listener.local_addr()?);
                tokio::select! {
                    r = serve(listener, shared) => r.map_err(anyhow::Error::from),
                    _ = tokio::signal::ctrl_c() => Ok(()),
                }
            })?;
            if replay.is_finished() {
                replay.join().expect("replay thread panicked")?;
            }
        }
    }
    Ok(())
}
