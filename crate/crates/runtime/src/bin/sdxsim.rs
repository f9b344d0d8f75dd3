//! Runs a simulated topology against a controller.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use sdx_core::config::parse_config;
use sdx_core::sim::{parse_topology, ControlPlane, LocalController, SimFabric};
use sdx_runtime::TcpControlPlane;

#[derive(Parser)]
#[command(name = "sdxsim", version, about = "Simulated OpenFlow fabric")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a topology, connect it and run its flows.
    Run {
        #[arg(long)]
        topology: PathBuf,
        /// Simulated seconds to run.
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Controller address; defaults to localhost on SDX_CONTROL_PORT.
        #[arg(long)]
        controller: Option<String>,
        /// Run an in-process controller on this configuration instead of
        /// connecting to one.
        #[arg(long, conflicts_with = "controller")]
        local: Option<PathBuf>,
        /// Pace simulated time against the wall clock.
        #[arg(long)]
        realtime: bool,
        #[arg(long)]
        json: bool,
    },
}

fn fail(msg: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("sdxsim: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let Cmd::Run {
        topology,
        duration,
        controller,
        local,
        realtime,
        json,
    } = Args::parse().cmd;

    let text = match std::fs::read_to_string(&topology) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", topology.display()), 2),
    };
    let spec = match parse_topology(&text) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", topology.display()), 2),
    };
    let mut fabric = match SimFabric::load(spec) {
        Ok(f) => f,
        Err(e) => return fail(format!("{}: {e}", topology.display()), 3),
    };

    let mut cp: Box<dyn ControlPlane> = match local {
        Some(path) => {
            let cfg = match std::fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| parse_config(&t).map_err(|e| e.to_string())) {
                Ok(c) => c,
                Err(e) => return fail(format!("{}: {e}", path.display()), 3),
            };
            let mut lc = LocalController::new(cfg);
            if let Err(e) = lc.connect(&fabric) {
                return fail(e, 3);
            }
            Box::new(lc)
        }
        None => {
            let addr = controller.unwrap_or_else(|| {
                let port = std::env::var("SDX_CONTROL_PORT").unwrap_or_else(|_| "6653".into());
                format!("127.0.0.1:{port}")
            });
            let tcp = match TcpControlPlane::connect(addr.as_str(), &fabric) {
                Ok(t) => t,
                Err(e) => return fail(format!("cannot reach controller at {addr}: {e}"), 4),
            };
            if !tcp.wait_synced(Duration::from_secs(15)) {
                return fail("controller did not push tables to every switch", 4);
            }
            Box::new(tcp)
        }
    };

    fabric.announce_hosts(cp.as_mut());
    let total_ms = (duration * 1000.0).round() as u64;
    let tick = fabric.spec().tick_ms;
    let started = Instant::now();
    let mut done = 0;
    while done < total_ms {
        let step = tick.min(total_ms - done);
        fabric.advance(step, cp.as_mut());
        done += step;
        if realtime {
            let target = Duration::from_millis(done);
            if let Some(wait) = target.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }

    let report = fabric.report();
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.text());
    }
    if report.flows.iter().all(|f| f.conserved()) {
        ExitCode::SUCCESS
    } else {
        fail("frame conservation violated", 1)
    }
}
