//! Scripted WebSocket client against a server on an ephemeral port.

#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use fractalmarch_core::engine::Framebuffer;
use fractalmarch_core::scene::SceneConfig;
use fractalmarch_viewserver::protocol::{ServerMessage, TileHeader};
use fractalmarch_viewserver::{serve, ServerConfig};
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub const READ_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub enum Event {
    Text(ServerMessage),
    Tile(TileHeader, Vec<u8>),
}

impl Event {
    pub fn generation(&self) -> Option<u32> {
        match self {
            Event::Text(
                ServerMessage::Ack { generation }
                | ServerMessage::LevelComplete { generation, .. }
                | ServerMessage::FrameComplete { generation },
            ) => Some(*generation),
            Event::Tile(h, _) => Some(h.generation),
            _ => None,
        }
    }
}

pub async fn start_server(scene: SceneConfig, threads: usize) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let config = ServerConfig {
        scene,
        threads,
        static_dir: None,
    };
    tokio::spawn(serve(listener, config));
    addr
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Self {
        let (ws, _) = connect_async(format!("ws://{addr}/ws")).await.unwrap();
        Self { ws }
    }

    pub async fn send(&mut self, json: &str) {
        self.ws.send(Message::Text(json.into())).await.unwrap();
    }

    pub async fn next(&mut self) -> Event {
        loop {
            let msg = tokio::time::timeout(READ_TIMEOUT, self.ws.next())
                .await
                .expect("server went quiet")
                .expect("connection closed")
                .expect("websocket error");
            match msg {
                Message::Text(text) => {
                    return Event::Text(serde_json::from_str(text.as_str()).unwrap());
                }
                Message::Binary(frame) => {
                    let (header, rgba) = TileHeader::decode(&frame).unwrap();
                    return Event::Tile(header, rgba.to_vec());
                }
                _ => continue,
            }
        }
    }

    /// Events up to and including `frame_complete` for `generation`.
    pub async fn until_complete(&mut self, generation: u32) -> Vec<Event> {
        let mut events = Vec::new();
        loop {
            let ev = self.next().await;
            let done = matches!(
                ev,
                Event::Text(ServerMessage::FrameComplete { generation: g }) if g == generation
            );
            events.push(ev);
            if done {
                return events;
            }
        }
    }
}

/// Composites the tiles of one generation and level into an image of the
/// given size; also returns how many times each pixel was written.
pub fn assemble(
    events: &[Event],
    generation: u32,
    level: u8,
    width: u32,
    height: u32,
) -> (Framebuffer, Vec<u32>) {
    let mut fb = Framebuffer::new(width, height);
    let mut writes = vec![0u32; (width * height) as usize];
    for ev in events {
        let Event::Tile(h, rgba) = ev else { continue };
        if h.generation != generation || h.level != level {
            continue;
        }
        for dy in 0..u32::from(h.height) {
            for dx in 0..u32::from(h.width) {
                let (x, y) = (u32::from(h.x0) + dx, u32::from(h.y0) + dy);
                let i = ((dy * u32::from(h.width) + dx) * 4) as usize;
                fb.set_pixel(x, y, rgba[i..i + 4].try_into().unwrap());
                writes[(y * width + x) as usize] += 1;
            }
        }
    }
    (fb, writes)
}
