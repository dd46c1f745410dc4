use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;

use dipl_service::{router, AppState, Config};

#[derive(Parser)]
#[command(name = "dipl-service", version, about = "HTTP service for tutoring an agent interactively")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory holding one event-log file per session. Existing logs are
    /// replayed at startup.
    #[arg(long, default_value = "sessions")]
    data_dir: PathBuf,
    /// Seconds of silence before an event stream sends a heartbeat.
    #[arg(long, default_value_t = 15)]
    heartbeat_secs: u64,
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    let args = Args::parse();
    let config = Config {
        data_dir: Some(args.data_dir.clone()),
        heartbeat: Duration::from_secs(args.heartbeat_secs.max(1)),
    };
    let state = match AppState::new(config) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("error: loading {}: {e}", args.data_dir.display());
            return std::process::ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: binding {}: {e}", args.addr);
            return std::process::ExitCode::FAILURE;
        }
    };
    eprintln!("listening on {}", args.addr);
    if let Err(e) = axum::serve(listener, router(state)).await {
        eprintln!("error: {e}");
        return std::process::ExitCode::FAILURE;
    }
    std::process::ExitCode::SUCCESS
}
