//! The fabric service: controller, stats poller, admin API and metrics.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use sdx_core::config::{parse_config, DEFAULT_CONFIG_FILE};
use sdx_runtime::{Service, ServiceSettings, StartError, UserDb};

#[derive(Parser)]
#[command(name = "sdxd", version, about = "SDN IXP fabric controller")]
struct Args {
    /// Fabric configuration (YAML).
    #[arg(short, long, default_value = DEFAULT_CONFIG_FILE)]
    config: PathBuf,
    /// Users and bearer tokens (JSON: {"users": [...]}).
    #[arg(short, long, default_value = "users.json")]
    users: PathBuf,
    /// Seconds between stats polls.
    #[arg(long, default_value_t = 15.0)]
    poll_interval: f64,
    /// Window for derived rates, in seconds.
    #[arg(long, default_value_t = 60.0)]
    rate_window: f64,
    /// Address to bind every endpoint on.
    #[arg(long, default_value = "0.0.0.0")]
    bind: String,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("sdxd: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("sdxd: {}: {e}", args.config.display());
            for v in &e.violations {
                eprintln!("  {v}");
            }
            return ExitCode::from(if e.code.is_parse_error() { 2 } else { 3 });
        }
    };
    let users = match UserDb::load(&args.users) {
        Ok(u) => u,
        Err(e) => {
            eprintln!("sdxd: {}: {e}", args.users.display());
            return ExitCode::from(2);
        }
    };

    let mut settings = ServiceSettings::from_env(users);
    for addr in [&mut settings.control_addr, &mut settings.admin_addr, &mut settings.metrics_addr] {
        let port = addr.rsplit(':').next().unwrap_or("0").to_string();
        *addr = format!("{}:{port}", args.bind);
    }
    settings.users_path = Some(args.users.clone());
    settings.poll_interval = Duration::from_secs_f64(args.poll_interval.max(0.001));
    settings.rate_window_s = args.rate_window;

    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    rt.block_on(async move {
        let service = match Service::start(cfg, settings).await {
            Ok(s) => s,
            Err(e @ StartError::Invalid(_)) => {
                eprintln!("sdxd: {e}");
                return ExitCode::from(3);
            }
            Err(e) => {
                eprintln!("sdxd: {e}");
                return ExitCode::from(1);
            }
        };
        tracing::info!(
            "control {} admin {} metrics {}",
            service.control_addr,
            service.admin_addr,
            service.metrics_addr
        );
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
        service.shutdown();
        ExitCode::SUCCESS
    })
}
