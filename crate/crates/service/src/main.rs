use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use wayfinder_core::bundled;
use wayfinder_core::store::{load_levels_dir, Store};
use wayfinder_service::{router, AppState, Registry, SystemClock};

/// Serve the wayfinding task over HTTP.
#[derive(Debug, Parser)]
#[command(name = "wayfinder-service", version)]
struct Args {
    #[arg(long, env = "WAYFINDER_PORT", default_value_t = 8080)]
    port: u16,
    /// Store root (levels/, sessions/, reports/).
    #[arg(long, env = "WAYFINDER_DATA", default_value = "wayfinder-data")]
    data_root: PathBuf,
    /// Directory of level files; the bundled levels are served when absent.
    #[arg(long)]
    levels_dir: Option<PathBuf>,
    /// Origin allowed by CORS (`*` for any). CORS is off when unset.
    #[arg(long, env = "WAYFINDER_CORS_ORIGIN")]
    cors_origin: Option<String>,
    /// Seconds without requests after which unsaved samples are written.
    #[arg(long, default_value_t = 1800)]
    idle_timeout_secs: u64,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let store = match Store::open(&args.data_root) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let levels = match &args.levels_dir {
        Some(dir) => match load_levels_dir(dir) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => bundled::levels(),
    };
    for level in &levels {
        if let Some(v) = wayfinder_core::validate_level(level).first() {
            eprintln!("error: level `{}` is invalid: {v}", level.level_id);
            return ExitCode::from(1);
        }
    }
    let registry = Arc::new(Registry::new(levels, store, Box::new(SystemClock)));
    let idle = Duration::from_secs(args.idle_timeout_secs);
    let sweeper = registry.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval((idle / 4).clamp(Duration::from_secs(1), Duration::from_secs(60)));
        loop {
            tick.tick().await;
            if let Err(e) = sweeper.sweep_idle(idle).await {
                eprintln!("idle persistence failed: {}", e.message);
            }
        }
    });

    let app = router(AppState { registry: registry.clone() }, args.cors_origin.as_deref());
    let listener = match tokio::net::TcpListener::bind(("0.0.0.0", args.port)).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind port {}: {e}", args.port);
            return ExitCode::from(2);
        }
    };
    eprintln!("listening on http://{}", listener.local_addr().map_or_else(|_| "?".into(), |a| a.to_string()));
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    if let Err(e) = registry.flush().await {
        eprintln!("error: flushing sessions: {}", e.message);
    }
    match served {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
