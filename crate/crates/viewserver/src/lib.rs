//! HTTP + WebSocket front end for interactive exploration.
//!
//! `GET /ws` upgrades to a session (see [`session`] and [`protocol`]). Every
//! other path is served from the static UI directory when one is configured,
//! or from a small built-in viewer page otherwise.

pub mod protocol;
pub mod session;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use fractalmarch_core::scene::SceneConfig;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub const DEFAULT_PORT: u16 = 8080;

const BUILTIN_INDEX: &str = include_str!("../static/index.html");

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Starting scene for every new session.
    pub scene: SceneConfig,
    /// Render threads per session.
    pub threads: usize,
    /// Directory holding a UI bundle; `index.html` there replaces the
    /// built-in page.
    pub static_dir: Option<PathBuf>,
}

pub fn router(config: ServerConfig) -> Router {
    let static_dir = config.static_dir.clone();
    let app = Router::new()
        .route("/ws", get(ws_handler))
        .with_state(Arc::new(config));
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(BUILTIN_INDEX) })),
    }
}

async fn ws_handler(
    ws: WebSocketUpgrade,
    State(config): State<Arc<ServerConfig>>,
) -> impl IntoResponse {
    let scene = config.scene.clone();
    let threads = config.threads;
    ws.on_upgrade(move |socket| session::run_session(socket, scene, threads))
}

/// Serves on an already bound listener until the process is stopped.
pub async fn serve(listener: TcpListener, config: ServerConfig) -> io::Result<()> {
    axum::serve(listener, router(config)).await
}

/// Binds `addr` and serves on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, config: ServerConfig) -> io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve(listener, config).await
    })
}
