//! One interactive session per WebSocket connection.
//!
//! Three parties share a session. The reader task applies client updates to
//! its private copy of the scene, bumps the generation and posts a render job
//! to a one-slot mailbox (a newer job overwrites an unstarted older one). A
//! dedicated render thread takes jobs from the mailbox and renders them level
//! by level, checking the generation before and after every tile. The writer
//! task forwards frames to the socket and drops anything older than the
//! newest generation it has announced.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;

use axum::extract::ws::{Message, WebSocket};
use fractalmarch_core::engine::{render_tile, tile_grid};
use fractalmarch_core::scene::SceneConfig;
use futures_util::{SinkExt, StreamExt};
use rayon::prelude::*;
use tokio::sync::mpsc;

use crate::protocol::{ClientMessage, ServerMessage, TileHeader, LEVELS};

enum Outgoing {
    Text(ServerMessage),
    Tile { generation: u32, frame: Vec<u8> },
}

struct Job {
    generation: u32,
    scene: Arc<SceneConfig>,
    levels: &'static [u8],
}

#[derive(Default)]
struct MailboxState {
    pending: Option<Job>,
    closed: bool,
}

/// Single-slot, latest-wins job queue for the render thread.
#[derive(Default)]
struct Mailbox {
    state: Mutex<MailboxState>,
    ready: Condvar,
}

impl Mailbox {
    fn post(&self, job: Job) {
        self.state.lock().unwrap().pending = Some(job);
        self.ready.notify_one();
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_one();
    }

    /// Blocks until a job is posted; `None` once the mailbox is closed.
    fn take(&self) -> Option<Job> {
        let mut state = self.state.lock().unwrap();
        loop {
            if state.closed {
                return None;
            }
            if let Some(job) = state.pending.take() {
                return Some(job);
            }
            state = self.ready.wait(state).unwrap();
        }
    }
}

/// The scene as rendered at resolution divisor `level`: same view, image
/// dimensions divided and rounded up.
pub fn level_scene(scene: &SceneConfig, level: u8) -> SceneConfig {
    let d = u32::from(level.max(1));
    let mut out = scene.clone();
    out.camera.width = scene.camera.width.div_ceil(d);
    out.camera.height = scene.camera.height.div_ceil(d);
    out
}

fn render_job(
    job: &Job,
    current: &AtomicU32,
    pool: &rayon::ThreadPool,
    tx: &mpsc::UnboundedSender<Outgoing>,
) {
    let gen = job.generation;
    let live = || current.load(Ordering::Acquire) == gen;
    for &level in job.levels {
        if !live() {
            return;
        }
        let scene = level_scene(&job.scene, level);
        let Ok(basis) = scene.camera.basis() else {
            return;
        };
        let tiles = tile_grid(
            scene.camera.width,
            scene.camera.height,
            scene.render.tile_size,
        );
        pool.install(|| {
            tiles.par_iter().for_each(|&tile| {
                if !live() {
                    return;
                }
                let rgba = render_tile(&basis, &scene, tile);
                if !live() {
                    return;
                }
                let header = TileHeader {
                    generation: gen,
                    level,
                    x0: tile.x0 as u16,
                    y0: tile.y0 as u16,
                    width: tile.width as u16,
                    height: tile.height as u16,
                };
                let _ = tx.send(Outgoing::Tile {
                    generation: gen,
                    frame: header.encode(&rgba),
                });
            });
        });
        if !live() {
            return;
        }
        let _ = tx.send(Outgoing::Text(ServerMessage::LevelComplete {
            generation: gen,
            level,
        }));
    }
    if live() && job.levels.last() == Some(&1) {
        let _ = tx.send(Outgoing::Text(ServerMessage::FrameComplete {
            generation: gen,
        }));
    }
}

/// Runs a session until the client disconnects.
pub async fn run_session(socket: WebSocket, scene: SceneConfig, threads: usize) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Outgoing>();
    let current = Arc::new(AtomicU32::new(0));
    let mailbox = Arc::new(Mailbox::default());

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            let msg = ServerMessage::Error {
                reason: format!("could not start render workers: {e}"),
                generation: 0,
            };
            let _ = sink.send(Message::Text(msg.to_json().into())).await;
            return;
        }
    };
    let worker = {
        let mailbox = Arc::clone(&mailbox);
        let current = Arc::clone(&current);
        let tx = tx.clone();
        thread::spawn(move || {
            while let Some(job) = mailbox.take() {
                render_job(&job, &current, &pool, &tx);
            }
        })
    };

    let writer = {
        let current = Arc::clone(&current);
        tokio::spawn(async move {
            // Highest generation already announced to the client.
            let mut floor = 0u32;
            while let Some(out) = rx.recv().await {
                let msg = match out {
                    Outgoing::Text(msg) => {
                        if let Some(g) = msg.render_generation() {
                            if g < floor || g != current.load(Ordering::Acquire) {
                                continue;
                            }
                        }
                        if let ServerMessage::Ack { generation } = msg {
                            floor = floor.max(generation);
                        }
                        Message::Text(msg.to_json().into())
                    }
                    Outgoing::Tile { generation, frame } => {
                        if generation < floor || generation != current.load(Ordering::Acquire) {
                            continue;
                        }
                        floor = generation;
                        Message::Binary(frame.into())
                    }
                };
                if sink.send(msg).await.is_err() {
                    break;
                }
            }
        })
    };

    let mut scene = Arc::new(scene);
    let mut generation = 0u32;
    let _ = tx.send(Outgoing::Text(ServerMessage::State {
        generation,
        scene: Box::new(scene.to_document()),
    }));
    mailbox.post(Job {
        generation,
        scene: Arc::clone(&scene),
        levels: &LEVELS,
    });

    while let Some(Ok(message)) = stream.next().await {
        let text = match message {
            Message::Text(text) => text,
            Message::Binary(_) => {
                let _ = tx.send(Outgoing::Text(ServerMessage::Error {
                    reason: "binary frames are not accepted".into(),
                    generation,
                }));
                continue;
            }
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        let update = ClientMessage::parse(text.as_str())
            .and_then(|msg| msg.apply(&scene).map(|next| (msg, next)));
        match update {
            Ok((msg, next)) => {
                generation += 1;
                scene = Arc::new(next);
                current.store(generation, Ordering::Release);
                let _ = tx.send(Outgoing::Text(ServerMessage::Ack { generation }));
                mailbox.post(Job {
                    generation,
                    scene: Arc::clone(&scene),
                    levels: msg.levels(),
                });
            }
            Err(reason) => {
                let _ = tx.send(Outgoing::Text(ServerMessage::Error { reason, generation }));
            }
        }
    }

    // Cancel any in-flight render and let the worker and writer wind down.
    current.fetch_add(1, Ordering::AcqRel);
    mailbox.close();
    drop(tx);
    let _ = tokio::task::spawn_blocking(move || worker.join()).await;
    let _ = writer.await;
}
