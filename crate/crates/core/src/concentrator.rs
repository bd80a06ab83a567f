//! Tier-2 room concentrators.
//!
//! A concentrator polls every end-point in its room over the star link, keeps the
//! last complete cycle as an immutable snapshot, and answers read-property
//! requests from the supervisor over its level's uplink bus.
//!
//! Uplink frame layout (all integers big-endian):
//!
//! ```text
//! [u32 length of the rest][u8 version = 1][u8 op]
//! [u16 room id length][room id][u16 property length][property][payload]
//! ```
//!
//! `op` is `0x10` for a request (payload: JSON arguments, possibly empty),
//! `0x90` for a response (payload: JSON value) and `0xE0` for an error
//! (payload: u16 error code).

use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::endpoint::wire::{RequestFrame, Status};
use crate::endpoint::{decode_rh, decode_temp, LinkError, Nack, Register, RoomLink};
use crate::field::SensorSample;
use crate::geometry::Point3;

pub const UPLINK_VERSION: u8 = 1;
pub const OP_READ_PROPERTY: u8 = 0x10;
pub const OP_RESPONSE: u8 = 0x90;
pub const OP_ERROR: u8 = 0xE0;

/// Short-interval cadence, seconds.
pub const SHORT_INTERVAL: f64 = 1.0;
/// Medium-interval cadence, seconds.
pub const MEDIUM_INTERVAL: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConcentratorError {
    #[error("concentrator for room `{0}` has an empty roster")]
    EmptyRoster(String),
    #[error("poll period must be positive, got {0}")]
    InvalidPeriod(f64),
    #[error("poll time {t} is not aligned to the {period} s period")]
    Misaligned { t: f64, period: f64 },
    #[error("sensor `{0}` is not on this concentrator's roster")]
    UnknownSensor(String),
    #[error("roster address {0} has no end-point on the link")]
    MissingEndpoint(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub sensor_id: String,
    pub address: u8,
    pub position: Point3,
}

/// One poll cycle's worth of decoded samples from a room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomReading {
    pub room_id: String,
    pub t: f64,
    pub samples: Vec<SensorSample>,
    /// Sensors that NACKed or timed out this cycle.
    pub missing: Vec<String>,
}

type Snapshot = Arc<RwLock<Option<Arc<RoomReading>>>>;

/// Read-only view of a concentrator, safe to share with upstream readers.
#[derive(Debug, Clone)]
pub struct ConcentratorHandle {
    room_id: String,
    level: usize,
    roster: Arc<Vec<RosterEntry>>,
    poll_period: f64,
    snapshot: Snapshot,
}

#[derive(Debug)]
pub struct Concentrator {
    handle: ConcentratorHandle,
    link: RoomLink,
    retries: u32,
}

impl Concentrator {
    pub fn new(
        room_id: impl Into<String>,
        level: usize,
        roster: Vec<RosterEntry>,
        link: RoomLink,
        poll_period: f64,
    ) -> Result<Self, ConcentratorError> {
        let room_id = room_id.into();
        if roster.is_empty() {
            return Err(ConcentratorError::EmptyRoster(room_id));
        }
        if !(poll_period > 0.0) || !poll_period.is_finite() {
            return Err(ConcentratorError::InvalidPeriod(poll_period));
        }
        for e in &roster {
            if link.endpoint(e.address).is_none() {
                return Err(ConcentratorError::MissingEndpoint(e.address));
            }
        }
        Ok(Self {
            handle: ConcentratorHandle {
                room_id,
                level,
                roster: Arc::new(roster),
                poll_period,
                snapshot: Arc::new(RwLock::new(None)),
            },
            link,
            retries: 1,
        })
    }

    pub fn handle(&self) -> ConcentratorHandle {
        self.handle.clone()
    }

    pub fn room_id(&self) -> &str {
        &self.handle.room_id
    }

    pub fn level(&self) -> usize {
        self.handle.level
    }

    pub fn poll_period(&self) -> f64 {
        self.handle.poll_period
    }

    pub fn roster(&self) -> &[RosterEntry] {
        &self.handle.roster
    }

    pub fn link(&self) -> &RoomLink {
        &self.link
    }

    pub fn link_mut(&mut self) -> &mut RoomLink {
        &mut self.link
    }

    pub fn last_cycle(&self) -> Option<Arc<RoomReading>> {
        self.handle.last_cycle()
    }

    fn read_register(&mut self, address: u8, reg: Register) -> Result<u16, ()> {
        for _ in 0..=self.retries {
            match self.link.transact(RequestFrame::read(address, reg.addr())) {
                Ok(r) if r.status == Status::Ack => return Ok(r.val),
                Ok(_) => return Err(()),
                Err(LinkError::Timeout(_)) | Err(LinkError::Frame(_)) => continue,
                Err(LinkError::UnknownEndpoint(_)) => return Err(()),
            }
        }
        Err(())
    }

    /// Collects the latest value from every end-point at cycle time `t`.
    pub fn poll_cycle(&mut self, t: f64) -> Result<RoomReading, ConcentratorError> {
        let period = self.handle.poll_period;
        let k = (t / period).round();
        if (k * period - t).abs() > 1e-9 * period.max(t.abs()).max(1.0) {
            return Err(ConcentratorError::Misaligned { t, period });
        }
        self.link.advance_to(t);
        let roster = Arc::clone(&self.handle.roster);
        let mut samples = Vec::with_capacity(roster.len());
        let mut missing = Vec::new();
        for entry in roster.iter() {
            self.link.begin_transaction();
            let read = (|| {
                let temp = self.read_register(entry.address, Register::TempLatest)?;
                let rh = self.read_register(entry.address, Register::RhLatest)?;
                let seq = self.read_register(entry.address, Register::SeqLatest)?;
                Ok::<_, ()>((temp, rh, seq))
            })();
            match read {
                Ok((temp, rh, seq)) => samples.push(SensorSample {
                    sensor_id: entry.sensor_id.clone(),
                    t,
                    temp: decode_temp(temp),
                    rh: decode_rh(rh),
                    seq: Some(seq),
                }),
                Err(()) => missing.push(entry.sensor_id.clone()),
            }
        }
        let reading = RoomReading {
            room_id: self.handle.room_id.clone(),
            t,
            samples,
            missing,
        };
        *self.handle.snapshot.write().expect("snapshot lock") = Some(Arc::new(reading.clone()));
        Ok(reading)
    }

    pub fn serve_read_property(&self, req: &PropertyRequest) -> PropertyResponse {
        self.handle.serve_read_property(req)
    }

    /// Direct register access to one end-point, bypassing the poll cache.
    pub fn debug_tap(&mut self, sensor_id: &str) -> Result<DebugTap<'_>, ConcentratorError> {
        let address = self
            .handle
            .roster
            .iter()
            .find(|e| e.sensor_id == sensor_id)
            .map(|e| e.address)
            .ok_or_else(|| ConcentratorError::UnknownSensor(sensor_id.to_string()))?;
        Ok(DebugTap {
            link: &mut self.link,
            address,
        })
    }
}

impl ConcentratorHandle {
    pub fn room_id(&self) -> &str {
        &self.room_id
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn last_cycle(&self) -> Option<Arc<RoomReading>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Answers from the cached snapshot only; never touches the end-points.
    pub fn serve_read_property(&self, req: &PropertyRequest) -> PropertyResponse {
        let fail = |code| PropertyResponse::error(&req.room_id, &req.property, code);
        if req.room_id != self.room_id {
            return fail(ErrorCode::UnknownRoom);
        }
        let property = match Property::parse(&req.property, &req.args) {
            Ok(p) => p,
            Err(code) => return fail(code),
        };
        let payload = match property {
            Property::LatestCycle => match self.last_cycle() {
                Some(r) => serde_json::to_value(&*r),
                None => return fail(ErrorCode::NoData),
            },
            Property::Roster => serde_json::to_value(&*self.roster),
            Property::PollPeriod => serde_json::to_value(self.poll_period),
            Property::SensorLatest(id) => {
                if !self.roster.iter().any(|e| e.sensor_id == id) {
                    return fail(ErrorCode::UnknownSensor);
                }
                let Some(cycle) = self.last_cycle() else {
                    return fail(ErrorCode::NoData);
                };
                match cycle.samples.iter().find(|s| s.sensor_id == id) {
                    Some(s) => serde_json::to_value(s),
                    None => return fail(ErrorCode::NoData),
                }
            }
        };
        PropertyResponse::Value {
            room_id: req.room_id.clone(),
            property: req.property.clone(),
            payload: payload.expect("property payloads serialize"),
        }
    }

    /// Decodes an uplink request frame and encodes the reply.
    pub fn serve_frame(&self, frame: &[u8]) -> Vec<u8> {
        match PropertyRequest::decode(frame) {
            Ok(req) => self.serve_read_property(&req).encode(),
            Err(_) => PropertyResponse::error(&self.room_id, "", ErrorCode::Malformed).encode(),
        }
    }
}

/// Raw register session opened through [`Concentrator::debug_tap`].
pub struct DebugTap<'a> {
    link: &'a mut RoomLink,
    address: u8,
}

#[derive(Debug, Error, PartialEq)]
pub enum TapError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("end-point refused: {0}")]
    Nack(Nack),
    #[error("end-point returned unknown NACK code {0}")]
    UnknownNack(u16),
}

impl DebugTap<'_> {
    fn result(status: Status, val: u16) -> Result<u16, TapError> {
        match status {
            Status::Ack => Ok(val),
            Status::Nack => Err(Nack::from_code(val)
                .map(TapError::Nack)
                .unwrap_or(TapError::UnknownNack(val))),
        }
    }

    pub fn read(&mut self, addr: u16) -> Result<u16, TapError> {
        let r = self.link.transact(RequestFrame::read(self.address, addr))?;
        Self::result(r.status, r.val)
    }

    pub fn write(&mut self, addr: u16, val: u16) -> Result<(), TapError> {
        let r = self
            .link
            .transact(RequestFrame::write(self.address, addr, val))?;
        Self::result(r.status, r.val).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Property {
    LatestCycle,
    Roster,
    PollPeriod,
    SensorLatest(String),
}

impl Property {
    fn parse(name: &str, args: &Value) -> Result<Self, ErrorCode> {
        match name {
            "latest_cycle" => Ok(Property::LatestCycle),
            "roster" => Ok(Property::Roster),
            "poll_period" => Ok(Property::PollPeriod),
            "sensor_latest" => args
                .get("sensor_id")
                .and_then(Value::as_str)
                .map(|s| Property::SensorLatest(s.to_string()))
                .ok_or(ErrorCode::Malformed),
            _ => Err(ErrorCode::UnknownProperty),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u16)]
pub enum ErrorCode {
    UnknownProperty = 1,
    UnknownSensor = 2,
    NoData = 3,
    UnknownRoom = 4,
    Malformed = 5,
}

impl ErrorCode {
    pub fn from_code(c: u16) -> Option<Self> {
        Some(match c {
            1 => ErrorCode::UnknownProperty,
            2 => ErrorCode::UnknownSensor,
            3 => ErrorCode::NoData,
            4 => ErrorCode::UnknownRoom,
            5 => ErrorCode::Malformed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRequest {
    pub room_id: String,
    pub property: String,
    /// Arguments; `null` when the property takes none.
    pub args: Value,
}

impl PropertyRequest {
    pub fn new(room_id: &str, property: &str) -> Self {
        Self {
            room_id: room_id.into(),
            property: property.into(),
            args: Value::Null,
        }
    }

    pub fn sensor_latest(room_id: &str, sensor_id: &str) -> Self {
        Self {
            room_id: room_id.into(),
            property: "sensor_latest".into(),
            args: serde_json::json!({ "sensor_id": sensor_id }),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload = if self.args.is_null() {
            Vec::new()
        } else {
            serde_json::to_vec(&self.args).expect("json args")
        };
        encode_uplink(OP_READ_PROPERTY, &self.room_id, &self.property, &payload)
    }

    pub fn decode(frame: &[u8]) -> Result<Self, UplinkError> {
        let f = decode_uplink(frame)?;
        if f.op != OP_READ_PROPERTY {
            return Err(UplinkError::Opcode(f.op));
        }
        let args = if f.payload.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(f.payload).map_err(|e| UplinkError::Payload(e.to_string()))?
        };
        Ok(Self {
            room_id: f.room_id,
            property: f.property,
            args,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyResponse {
    Value {
        room_id: String,
        property: String,
        payload: Value,
    },
    Error {
        room_id: String,
        property: String,
        code: ErrorCode,
    },
}

impl PropertyResponse {
    fn error(room_id: &str, property: &str, code: ErrorCode) -> Self {
        PropertyResponse::Error {
            room_id: room_id.into(),
            property: property.into(),
            code,
        }
    }

    pub fn payload(&self) -> Option<&Value> {
        match self {
            PropertyResponse::Value { payload, .. } => Some(payload),
            PropertyResponse::Error { .. } => None,
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        match self {
            PropertyResponse::Error { code, .. } => Some(*code),
            PropertyResponse::Value { .. } => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            PropertyResponse::Value {
                room_id,
                property,
                payload,
            } => encode_uplink(
                OP_RESPONSE,
                room_id,
                property,
                &serde_json::to_vec(payload).expect("json payload"),
            ),
            PropertyResponse::Error {
                room_id,
                property,
                code,
            } => encode_uplink(OP_ERROR, room_id, property, &(*code as u16).to_be_bytes()),
        }
    }

    pub fn decode(frame: &[u8]) -> Result<Self, UplinkError> {
        let f = decode_uplink(frame)?;
        match f.op {
            OP_RESPONSE => Ok(PropertyResponse::Value {
                room_id: f.room_id,
                property: f.property,
                payload: serde_json::from_slice(f.payload)
                    .map_err(|e| UplinkError::Payload(e.to_string()))?,
            }),
            OP_ERROR => {
                let code: [u8; 2] = f
                    .payload
                    .try_into()
                    .map_err(|_| UplinkError::Payload("error code must be 2 bytes".into()))?;
                let code = u16::from_be_bytes(code);
                Ok(PropertyResponse::Error {
                    room_id: f.room_id,
                    property: f.property,
                    code: ErrorCode::from_code(code).ok_or_else(|| {
                        UplinkError::Payload(format!("unknown error code {code}"))
                    })?,
                })
            }
            other => Err(UplinkError::Opcode(other)),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum UplinkError {
    #[error("uplink frame truncated")]
    Truncated,
    #[error("length prefix {declared} does not match {actual} bytes")]
    Length { declared: usize, actual: usize },
    #[error("unsupported uplink version {0}")]
    Version(u8),
    #[error("unexpected uplink opcode {0:#04x}")]
    Opcode(u8),
    #[error("bad payload: {0}")]
    Payload(String),
    #[error("no concentrator for room `{0}` on this bus")]
    NoRoute(String),
}

fn encode_uplink(op: u8, room_id: &str, property: &str, payload: &[u8]) -> Vec<u8> {
    let body_len = 2 + 2 + room_id.len() + 2 + property.len() + payload.len();
    let mut out = Vec::with_capacity(4 + body_len);
    out.extend_from_slice(&(body_len as u32).to_be_bytes());
    out.push(UPLINK_VERSION);
    out.push(op);
    for s in [room_id, property] {
        out.extend_from_slice(&(s.len() as u16).to_be_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    out.extend_from_slice(payload);
    out
}

struct UplinkFrame<'a> {
    op: u8,
    room_id: String,
    property: String,
    payload: &'a [u8],
}

fn decode_uplink(frame: &[u8]) -> Result<UplinkFrame<'_>, UplinkError> {
    fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8], UplinkError> {
        if buf.len() < n {
            return Err(UplinkError::Truncated);
        }
        let (head, rest) = buf.split_at(n);
        *buf = rest;
        Ok(head)
    }
    fn string(buf: &mut &[u8]) -> Result<String, UplinkError> {
        let n = take(buf, 2)?;
        let n = u16::from_be_bytes([n[0], n[1]]) as usize;
        let s = take(buf, n)?;
        String::from_utf8(s.to_vec()).map_err(|e| UplinkError::Payload(e.to_string()))
    }
    let mut buf = frame;
    let len = take(&mut buf, 4)?;
    let declared = u32::from_be_bytes([len[0], len[1], len[2], len[3]]) as usize;
    if declared != buf.len() {
        return Err(UplinkError::Length {
            declared,
            actual: buf.len(),
        });
    }
    let head = take(&mut buf, 2)?;
    if head[0] != UPLINK_VERSION {
        return Err(UplinkError::Version(head[0]));
    }
    let room_id = string(&mut buf)?;
    let property = string(&mut buf)?;
    Ok(UplinkFrame {
        op: head[1],
        room_id,
        property,
        payload: buf,
    })
}

/// Shared uplink bus of one building level: an ordered queue of frames.
#[derive(Debug, Default)]
pub struct LevelBus {
    level: usize,
    queue: VecDeque<Vec<u8>>,
    frames: u64,
}

impl LevelBus {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            ..Default::default()
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Frames carried so far, both directions.
    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Puts a request on the bus, delivers it to the addressed concentrator and
    /// returns the decoded reply.
    pub fn exchange(
        &mut self,
        req: &PropertyRequest,
        dcs: &[ConcentratorHandle],
    ) -> Result<PropertyResponse, UplinkError> {
        self.queue.push_back(req.encode());
        self.frames += 1;
        let frame = self.queue.pop_front().expect("frame just queued");
        let dc = dcs
            .iter()
            .find(|d| d.level == self.level && d.room_id == req.room_id)
            .ok_or_else(|| UplinkError::NoRoute(req.room_id.clone()))?;
        let reply = dc.serve_frame(&frame);
        self.frames += 1;
        PropertyResponse::decode(&reply)
    }
}
