//! Versioned JSON messages exchanged with external planners. Views travel
//! as RGB PNGs, either inline (base64) or as content-addressed files.

use std::path::Path;

use base64::Engine;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{KeypointPrediction, PlannerError, Round1Query, Round2Query, Round2Response};
use crate::geometry::CanonicalView;
use crate::trajectory::{Gripper, ObjectPosition};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy)]
pub enum ViewEncoding<'a> {
    /// Reference by content hash without writing anything.
    Digest,
    /// Embed the PNG bytes.
    Inline,
    /// Write `<sha256>.png` into the directory and reference it.
    Files(&'a Path),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ViewRef {
    File { view: String, path: String, sha256: String },
    Inline { view: String, png_base64: String },
}

/// 8-bit RGB PNG of a canonical view.
pub fn view_png(view: &CanonicalView) -> Vec<u8> {
    let r = view.resolution() as u32;
    let bytes: Vec<u8> = view
        .rgb
        .iter()
        .flat_map(|c| c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    let img = image::RgbImage::from_raw(r, r, bytes).expect("buffer matches resolution");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory png encoding");
    out.into_inner()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn view_ref(view: &CanonicalView, encoding: ViewEncoding) -> std::io::Result<ViewRef> {
    let png = view_png(view);
    let name = view.id().name().to_owned();
    Ok(match encoding {
        ViewEncoding::Inline => ViewRef::Inline {
            view: name,
            png_base64: base64::engine::general_purpose::STANDARD.encode(&png),
        },
        ViewEncoding::Digest | ViewEncoding::Files(_) => {
            let sha = sha256_hex(&png);
            let path = format!("{sha}.png");
            if let ViewEncoding::Files(dir) = encoding {
                std::fs::write(dir.join(&path), &png)?;
            }
            ViewRef::File { view: name, path, sha256: sha }
        }
    })
}

/// Decode an inline PNG reference back to RGB bytes and its side length.
pub fn decode_inline(r: &ViewRef) -> Result<(u32, Vec<u8>), PlannerError> {
    let ViewRef::Inline { png_base64, .. } = r else {
        return Err(PlannerError::Parse { message: "not an inline view".into(), raw: String::new() });
    };
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(png_base64)
        .map_err(|e| PlannerError::Parse { message: e.to_string(), raw: png_base64.clone() })?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| PlannerError::Parse { message: e.to_string(), raw: String::new() })?
        .to_rgb8();
    Ok((img.width(), img.into_raw()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePixels {
    pub front: Option<[usize; 2]>,
    pub left: Option<[usize; 2]>,
    pub top: Option<[usize; 2]>,
}

impl WirePixels {
    fn from_pixels(p: [Option<(usize, usize)>; 3]) -> Self {
        let f = |x: Option<(usize, usize)>| x.map(|(u, v)| [u, v]);
        Self { front: f(p[0]), left: f(p[1]), top: f(p[2]) }
    }

    fn to_pixels(&self) -> [Option<(usize, usize)>; 3] {
        [self.front, self.left, self.top].map(|x| x.map(|[u, v]| (u, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireObject {
    pub name: String,
    pub world: [f64; 3],
    pub pixels: WirePixels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireKeypoint {
    pub pixels: WirePixels,
    pub world: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    Round1Query {
        version: u32,
        task: String,
        previous_step: Option<String>,
    },
    Round1Response {
        version: u32,
        subtask_plan: Vec<String>,
    },
    Round2Query {
        version: u32,
        task: String,
        views: Vec<ViewRef>,
        gripper: Gripper,
        subtask_plan: Vec<String>,
        previous_step: Option<String>,
    },
    Round2Response {
        version: u32,
        object_positions: Vec<WireObject>,
        step_instruction: String,
        keypoint: WireKeypoint,
    },
}

fn to_value(m: &WireMessage) -> Value {
    serde_json::to_value(m).expect("wire messages serialize")
}

pub fn round1_query(q: &Round1Query) -> Value {
    to_value(&WireMessage::Round1Query {
        version: WIRE_VERSION,
        task: q.task.clone(),
        previous_step: q.previous_step.clone(),
    })
}

pub fn round1_response(plan: &[String]) -> Value {
    to_value(&WireMessage::Round1Response {
        version: WIRE_VERSION,
        subtask_plan: plan.to_vec(),
    })
}

pub fn round2_query_message(q: &Round2Query, encoding: ViewEncoding) -> std::io::Result<WireMessage> {
    Ok(WireMessage::Round2Query {
        version: WIRE_VERSION,
        task: q.task.clone(),
        views: q.views.iter().map(|v| view_ref(v, encoding)).collect::<Result<_, _>>()?,
        gripper: q.gripper,
        subtask_plan: q.subtask_plan.clone(),
        previous_step: q.previous_step.clone(),
    })
}

/// Round-2 query with digest references (nothing is written).
pub fn round2_query(q: &Round2Query, encoding: ViewEncoding) -> Value {
    match round2_query_message(q, encoding) {
        Ok(m) => to_value(&m),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    }
}

pub fn round2_response_message(r: &Round2Response) -> WireMessage {
    WireMessage::Round2Response {
        version: WIRE_VERSION,
        object_positions: r
            .object_positions
            .iter()
            .map(|o| WireObject {
                name: o.name.clone(),
                world: o.world.into(),
                pixels: WirePixels::from_pixels(o.pixels.map(Some)),
            })
            .collect(),
        step_instruction: r.step_instruction.clone(),
        keypoint: WireKeypoint {
            pixels: WirePixels::from_pixels(r.keypoint.pixels),
            world: r.keypoint.world.into(),
        },
    }
}

pub fn round2_response(r: &Round2Response) -> Value {
    to_value(&round2_response_message(r))
}

fn parse_message(raw: &str) -> Result<WireMessage, PlannerError> {
    let parse_err = |message: String| PlannerError::Parse { message, raw: raw.to_owned() };
    let m: WireMessage = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
    let version = match &m {
        WireMessage::Round1Query { version, .. }
        | WireMessage::Round1Response { version, .. }
        | WireMessage::Round2Query { version, .. }
        | WireMessage::Round2Response { version, .. } => *version,
    };
    if version != WIRE_VERSION {
        return Err(parse_err(format!("unsupported wire version {version}")));
    }
    Ok(m)
}

pub fn parse_round1_response(raw: &str) -> Result<Vec<String>, PlannerError> {
    match parse_message(raw)? {
        WireMessage::Round1Response { subtask_plan, .. } => Ok(subtask_plan),
        _ => Err(PlannerError::Parse { message: "expected a round1_response".into(), raw: raw.to_owned() }),
    }
}

pub fn parse_round2_response(raw: &str) -> Result<Round2Response, PlannerError> {
    let err = |message: &str| PlannerError::Parse { message: message.into(), raw: raw.to_owned() };
    let WireMessage::Round2Response { object_positions, step_instruction, keypoint, .. } = parse_message(raw)? else {
        return Err(err("expected a round2_response"));
    };
    let objects = object_positions
        .into_iter()
        .map(|o| {
            let [a, b, c] = o.pixels.to_pixels();
            match (a, b, c) {
                (Some(a), Some(b), Some(c)) => Ok(ObjectPosition {
                    name: o.name,
                    world: Vector3::from(o.world),
                    pixels: [a, b, c],
                }),
                _ => Err(err("object positions need a pixel in every view")),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(Round2Response {
        object_positions: objects,
        step_instruction,
        keypoint: KeypointPrediction {
            pixels: keypoint.pixels.to_pixels(),
            world: Vector3::from(keypoint.world),
        },
    })
}
