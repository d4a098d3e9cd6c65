//! Wire format shared with the browser client.
//!
//! Control messages travel as JSON text frames. Rendered pixels travel as
//! binary frames: a fixed 13-byte little-endian header followed by the
//! tile's RGBA bytes, row by row.
//!
//! ```text
//! offset  size  field
//!      0     4  generation   u32
//!      4     1  level        u8   (resolution divisor: 8, 4, 2 or 1)
//!      5     2  x0           u16  (in pixels of that level's image)
//!      7     2  y0           u16
//!      9     2  width        u16
//!     11     2  height       u16
//!     13     …  RGBA         width·height·4 bytes
//! ```

use fractalmarch_core::scene::{CutPlaneDoc, SceneConfig, SceneDocument};
use serde::{Deserialize, Serialize};

/// Progressive levels as resolution divisors, coarsest first.
pub const LEVELS: [u8; 4] = [8, 4, 2, 1];
pub const TILE_HEADER_LEN: usize = 13;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    SetCamera {
        position: [f64; 3],
        target: [f64; 3],
        #[serde(default)]
        up: Option<[f64; 3]>,
        #[serde(default)]
        fov: Option<f64>,
    },
    #[serde(rename_all = "camelCase")]
    SetFractalParams {
        instance: usize,
        #[serde(default)]
        c: Option<[f64; 4]>,
        #[serde(default)]
        degree: Option<u32>,
        #[serde(default)]
        power: Option<u32>,
        #[serde(default)]
        iterations: Option<u32>,
        /// Replaces the instance's cut planes when present; `[]` clears them.
        #[serde(default)]
        cut_planes: Option<Vec<CutPlaneDoc>>,
    },
    #[serde(rename_all = "camelCase")]
    SetQuality {
        #[serde(default)]
        width: Option<u32>,
        #[serde(default)]
        height: Option<u32>,
        #[serde(default)]
        max_recursion_depth: Option<u32>,
    },
    RequestFullFrame,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
    }

    /// The scene after this update, checked by the same rules as a scene
    /// file. The error string names the offending field.
    pub fn apply(&self, scene: &SceneConfig) -> Result<SceneConfig, String> {
        let mut doc = scene.to_document();
        match self {
            ClientMessage::SetCamera {
                position,
                target,
                up,
                fov,
            } => {
                doc.camera.position = *position;
                doc.camera.target = *target;
                if up.is_some() {
                    doc.camera.up = *up;
                }
                if fov.is_some() {
                    doc.camera.fov = *fov;
                }
            }
            ClientMessage::SetFractalParams {
                instance,
                c,
                degree,
                power,
                iterations,
                cut_planes,
            } => {
                let count = doc.instances.len();
                let inst = doc.instances.get_mut(*instance).ok_or_else(|| {
                    format!("instance {instance} out of range (scene has {count})")
                })?;
                if c.is_some() {
                    inst.c = *c;
                }
                if degree.is_some() {
                    inst.degree = *degree;
                }
                if power.is_some() {
                    inst.power = *power;
                }
                if iterations.is_some() {
                    inst.iterations = *iterations;
                }
                if let Some(planes) = cut_planes {
                    inst.march.get_or_insert_with(Default::default).cut_planes = planes.clone();
                }
            }
            ClientMessage::SetQuality {
                width,
                height,
                max_recursion_depth,
            } => {
                if width.is_some() {
                    doc.camera.width = *width;
                }
                if height.is_some() {
                    doc.camera.height = *height;
                }
                if max_recursion_depth.is_some() {
                    doc.shading
                        .get_or_insert_with(Default::default)
                        .max_recursion_depth = *max_recursion_depth;
                }
            }
            ClientMessage::RequestFullFrame => {}
        }
        doc.into_config().map_err(|e| e.to_string())
    }

    /// Levels rendered after this update.
    pub fn levels(&self) -> &'static [u8] {
        match self {
            ClientMessage::RequestFullFrame => &LEVELS[3..],
            _ => &LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent once on connect with the session's starting scene.
    State {
        generation: u32,
        scene: Box<SceneDocument>,
    },
    Ack {
        generation: u32,
    },
    /// The update was rejected; `generation` is the one still current.
    Error {
        reason: String,
        generation: u32,
    },
    LevelComplete {
        generation: u32,
        level: u8,
    },
    FrameComplete {
        generation: u32,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }

    /// The generation this message is about, for staleness filtering.
    /// Errors are never stale.
    pub fn render_generation(&self) -> Option<u32> {
        match self {
            ServerMessage::LevelComplete { generation, .. }
            | ServerMessage::FrameComplete { generation } => Some(*generation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileHeader {
    pub generation: u32,
    pub level: u8,
    pub x0: u16,
    pub y0: u16,
    pub width: u16,
    pub height: u16,
}

impl TileHeader {
    pub fn payload_len(&self) -> usize {
        usize::from(self.width) * usize::from(self.height) * 4
    }

    pub fn encode(&self, rgba: &[u8]) -> Vec<u8> {
        debug_assert_eq!(rgba.len(), self.payload_len());
        let mut out = Vec::with_capacity(TILE_HEADER_LEN + rgba.len());
        out.extend_from_slice(&self.generation.to_le_bytes());
        out.push(self.level);
        for v in [self.x0, self.y0, self.width, self.height] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(rgba);
        out
    }

    /// Splits a binary frame into header and RGBA payload.
    pub fn decode(frame: &[u8]) -> Result<(TileHeader, &[u8]), String> {
        if frame.len() < TILE_HEADER_LEN {
            return Err(format!("tile frame too short: {} bytes", frame.len()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([frame[i], frame[i + 1]]);
        let header = TileHeader {
            generation: u32::from_le_bytes(frame[0..4].try_into().unwrap()),
            level: frame[4],
            x0: u16_at(5),
            y0: u16_at(7),
            width: u16_at(9),
            height: u16_at(11),
        };
        let payload = &frame[TILE_HEADER_LEN..];
        if payload.len() != header.payload_len() {
            return Err(format!(
                "tile payload is {} bytes, header implies {}",
                payload.len(),
                header.payload_len()
            ));
        }
        Ok((header, payload))
    }
}
