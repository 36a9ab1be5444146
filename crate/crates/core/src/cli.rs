//! Command-line front end shared by the `wristdrive` binary.

use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::command::ControlConfig;
use crate::gesture::{load_sidecar, load_templates, reference_templates, save_templates, GestureClass, GestureTemplate};
use crate::harness::{
    load_samples, match_trace, replay, run_scenario, score_log_file, train, write_log, HarnessError, RunOptions,
    TrainOptions, DEFAULT_MAX_DURATION_S, DEFAULT_TICK_HZ,
};
use crate::imu::load_trace;
use crate::service::{self, ServiceConfig, DEFAULT_PORT, PORT_ENV};
use crate::sim::Scenario;

#[derive(Debug, Parser)]
#[command(name = "wristdrive", version, about = "Wrist-IMU teleoperation: service, simulation and tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Control configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Template store (JSON); the built-in reference set when omitted.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the network service with a live simulator.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Built-in scenario name or path to a scenario file.
        #[arg(long, default_value = "slalom")]
        scenario: String,
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Websocket bridge and static assets; defaults to port + 1.
        #[arg(long)]
        bridge_port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Directory served over HTTP on the bridge port.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TICK_HZ)]
        tick_hz: f64,
        /// Delay injected before each operator sample is processed.
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
        /// Stop after this many seconds instead of running until killed.
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Headless scripted run of a scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "slalom")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TICK_HZ)]
        tick_hz: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_DURATION_S)]
        max_duration_s: f64,
        /// Write the event log here, one record per line.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Stream a recorded trace through recognition and control.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
        /// Also drive this scenario with the replayed commands.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Build templates from a labelled trace.
    Train {
        #[arg(long)]
        trace: PathBuf,
        /// Epoch boundaries, one JSON object per line.
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail unless all five classes are labelled.
        #[arg(long)]
        require_all: bool,
    },
    /// Score the end of a trace against the templates once.
    Match {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Recompute a run report from an event log.
    Score {
        #[arg(long)]
        log: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ControlConfig, HarnessError> {
    Ok(match path {
        Some(p) => ControlConfig::load(p)?,
        None => ControlConfig::default(),
    })
}

fn load_store(path: Option<&Path>) -> Result<Vec<GestureTemplate>, HarnessError> {
    Ok(match path {
        Some(p) => load_templates(p)?,
        None => reference_templates(),
    })
}

fn print_json<W: Write, T: serde::Serialize>(out: &mut W, value: &T) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, S, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute<W: Write>(cmd: Command, out: &mut W) -> Result<(), HarnessError> {
    match cmd {
        Command::Serve {
            common,
            scenario,
            port,
            bridge_port,
            bind,
            assets,
            tick_hz,
            latency_ms,
            duration_s,
        } => {
            let mut cfg = ServiceConfig::new(Scenario::resolve(&scenario)?, load_store(common.templates.as_deref())?);
            cfg.control = load_config(common.config.as_deref())?;
            cfg.port = port;
            cfg.bridge_port = bridge_port;
            cfg.bind = bind;
            cfg.assets = assets;
            cfg.tick_hz = tick_hz;
            cfg.latency = Duration::from_millis(latency_ms);
            let handle = service::start(cfg).map_err(|e| match e.kind() {
                std::io::ErrorKind::InvalidInput => HarnessError::Usage(e.to_string()),
                _ => HarnessError::Data(e.to_string()),
            })?;
            writeln!(out, "frames on {}, bridge on {}", handle.local_addr(), handle.bridge_addr())?;
            out.flush()?;
            if let Some(s) = duration_s {
                std::thread::sleep(Duration::from_secs_f64(s.max(0.0)));
                handle.shutdown();
            }
            handle.join();
            Ok(())
        }
        Command::Simulate {
            common,
            scenario,
            seed,
            tick_hz,
            max_duration_s,
            log,
        } => {
            let s = Scenario::resolve(&scenario)?;
            let opts = RunOptions {
                seed,
                tick_hz,
                max_duration_s,
                control: load_config(common.config.as_deref())?,
                ..RunOptions::default()
            };
            let outcome = run_scenario(&s, &opts)?;
            if let Some(path) = log {
                let f = std::fs::File::create(&path)
                    .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
                write_log(std::io::BufWriter::new(f), &outcome.log)?;
            }
            print_json(out, &outcome.report)
        }
        Command::Replay { common, trace, scenario } => {
            let samples = load_samples(&trace)?;
            let scenario = scenario.as_deref().map(Scenario::resolve).transpose()?;
            let report = replay(
                &samples,
                load_store(common.templates.as_deref())?,
                &load_config(common.config.as_deref())?,
                scenario.as_ref(),
            )?;
            print_json(out, &report)
        }
        Command::Train {
            trace,
            sidecar,
            out: store,
            require_all,
        } => {
            let samples = load_trace(&trace)?;
            let bounds = load_sidecar(&sidecar)?;
            let opts = TrainOptions {
                required: if require_all { GestureClass::ALL.to_vec() } else { Vec::new() },
                ..TrainOptions::default()
            };
            let templates = train(&samples, &bounds, &opts)?;
            save_templates(&store, &templates)?;
            for t in &templates {
                writeln!(out, "{}: {} epochs, {} samples", t.class, t.training_count, t.signal.len())?;
            }
            Ok(())
        }
        Command::Match { common, trace } => {
            let cfg = load_config(common.config.as_deref())?;
            let samples = load_trace(&trace)?;
            let templates = load_store(common.templates.as_deref())?;
            let d = match_trace(&samples, &templates, cfg.gesture_threshold, cfg.sample_rate_hz)?;
            print_json(out, &d)
        }
        Command::Score { log } => print_json(out, &score_log_file(&log)?),
    }
}
