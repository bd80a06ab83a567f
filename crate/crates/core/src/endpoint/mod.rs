//! Tier-1 end-points: sampling, the on-board record FIFO, and the register file
//! a concentrator reads over the room link.

mod link;
mod ring;
pub mod wire;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Environment, TEMP_MIN};
use crate::geometry::Point3;

pub use link::{
    LinkError, LinkParams, LinkStats, RoomLink, LINK_BUDGET_BPS, READ_TIMEOUT, TRANSACTION_BYTES,
};
pub use ring::{RingBuffer, ENDPOINT_BUFFER_CAPACITY};

/// Largest raw temperature code: (123.8 + 40) * 100.
pub const TEMP_RAW_MAX: u16 = 16_380;
/// Largest raw humidity code: 100 % * 100.
pub const RH_RAW_MAX: u16 = 10_000;

/// Quantized sample as stored on an end-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedSample {
    pub temp_raw: u16,
    pub rh_raw: u16,
    /// Set when either input was outside the sensor range and got clamped.
    pub saturated: bool,
}

fn quantize(value: f64, offset: f64, max: u16) -> (u16, bool) {
    let scaled = ((value + offset) * 100.0).round();
    if scaled.is_nan() {
        return (0, true);
    }
    if scaled < 0.0 {
        (0, true)
    } else if scaled > max as f64 {
        (max, true)
    } else {
        (scaled as u16, false)
    }
}

/// Encodes °C as `(T + 40) * 100` and %RH as `RH * 100`, rounding to nearest and
/// saturating at the sensor range.
pub fn encode_sample(temp: f64, rh: f64) -> EncodedSample {
    let (temp_raw, ts) = quantize(temp, -TEMP_MIN, TEMP_RAW_MAX);
    let (rh_raw, rs) = quantize(rh, 0.0, RH_RAW_MAX);
    EncodedSample {
        temp_raw,
        rh_raw,
        saturated: ts || rs,
    }
}

pub fn decode_temp(raw: u16) -> f64 {
    raw as f64 / 100.0 + TEMP_MIN
}

pub fn decode_rh(raw: u16) -> f64 {
    raw as f64 / 100.0
}

pub fn decode_sample(temp_raw: u16, rh_raw: u16) -> (f64, f64) {
    (decode_temp(temp_raw), decode_rh(rh_raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub sensor_id: u8,
    pub seq: u32,
    pub t: f64,
    pub temp_raw: u16,
    pub rh_raw: u16,
}

impl SensorRecord {
    /// Little-endian byte image, used for determinism checks.
    pub fn to_bytes(&self) -> [u8; 17] {
        let mut b = [0u8; 17];
        b[0] = self.sensor_id;
        b[1..5].copy_from_slice(&self.seq.to_le_bytes());
        b[5..13].copy_from_slice(&self.t.to_le_bytes());
        b[13..15].copy_from_slice(&self.temp_raw.to_le_bytes());
        b[15..17].copy_from_slice(&self.rh_raw.to_le_bytes());
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Register {
    DeviceId = 0x00,
    Status = 0x01,
    TempLatest = 0x02,
    RhLatest = 0x03,
    BufferCount = 0x04,
    SeqLatest = 0x05,
    Cmd = 0x10,
}

impl Register {
    pub fn from_addr(addr: u16) -> Option<Self> {
        Some(match addr {
            0x00 => Register::DeviceId,
            0x01 => Register::Status,
            0x02 => Register::TempLatest,
            0x03 => Register::RhLatest,
            0x04 => Register::BufferCount,
            0x05 => Register::SeqLatest,
            0x10 => Register::Cmd,
            _ => return None,
        })
    }

    pub fn addr(self) -> u16 {
        self as u16
    }
}

pub const CMD_SYNC: u16 = 1;
pub const CMD_SAMPLE_NOW: u16 = 2;

pub const STATUS_OVERFLOWED: u16 = 0x01;
pub const STATUS_SATURATED: u16 = 0x02;
pub const STATUS_SYNCED: u16 = 0x04;
pub const STATUS_EMPTY: u16 = 0x08;

/// Why an end-point refused a register access. Carried in the NACK value field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[repr(u16)]
pub enum Nack {
    #[error("undefined register")]
    UndefinedRegister = 1,
    #[error("register is write-only")]
    WriteOnly = 2,
    #[error("register is read-only")]
    ReadOnly = 3,
    #[error("no sample recorded yet")]
    NoData = 4,
    #[error("unknown command")]
    BadCommand = 5,
    #[error("malformed request")]
    Malformed = 6,
}

impl Nack {
    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Some(match code {
            1 => Nack::UndefinedRegister,
            2 => Nack::WriteOnly,
            3 => Nack::ReadOnly,
            4 => Nack::NoData,
            5 => Nack::BadCommand,
            6 => Nack::Malformed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EndpointError {
    #[error("sample time {t} precedes the last sample at {last}")]
    ClockRegression { t: f64, last: f64 },
}

/// Zero-mean Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_temp: f64,
    pub sigma_rh: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        sigma_temp: 0.0,
        sigma_rh: 0.0,
    };
}

impl Default for NoiseModel {
    /// 0.01 °C resolution, ±2 % RH at 3σ.
    fn default() -> Self {
        Self {
            sigma_temp: 0.005,
            sigma_rh: 0.667,
        }
    }
}

/// Recorded for reference only; does not affect behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryInfo {
    pub voltage: f64,
    pub draw_mw: f64,
}

impl Default for BatteryInfo {
    fn default() -> Self {
        Self {
            voltage: 1.8,
            draw_mw: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Seconds between scheduled samples.
    pub sample_period: f64,
    /// Offset of the free-running schedule, seconds.
    pub phase: f64,
    /// Schedule origin adopted on SYNC.
    pub sync_epoch: f64,
    pub noise: NoiseModel,
    pub battery: BatteryInfo,
    pub buffer_capacity: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            sample_period: 1.0,
            phase: 0.0,
            sync_epoch: 0.0,
            noise: NoiseModel::default(),
            battery: BatteryInfo::default(),
            buffer_capacity: ENDPOINT_BUFFER_CAPACITY,
        }
    }
}

/// Simulated end-point. A sequential state machine driven by the virtual clock.
pub struct Endpoint {
    sensor_id: u8,
    position: Point3,
    env: Arc<dyn Environment>,
    config: EndpointConfig,
    buffer: RingBuffer<SensorRecord>,
    rng: ChaCha8Rng,
    temp_noise: Option<Normal<f64>>,
    rh_noise: Option<Normal<f64>>,
    next_seq: u32,
    status: u16,
    /// Schedule origin and the index of the next due sample.
    schedule_origin: f64,
    next_k: i64,
    now: f64,
    last_t: Option<f64>,
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Endpoint")
            .field("sensor_id", &self.sensor_id)
            .field("position", &self.position)
            .field("buffered", &self.buffer.len())
            .field("next_seq", &self.next_seq)
            .field("now", &self.now)
            .finish()
    }
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite positive sigma"))
}

impl Endpoint {
    pub fn new(
        sensor_id: u8,
        position: Point3,
        env: Arc<dyn Environment>,
        config: EndpointConfig,
        noise_seed: u64,
    ) -> Self {
        assert!(config.sample_period > 0.0, "sample period must be positive");
        Self {
            sensor_id,
            position,
            env,
            buffer: RingBuffer::new(config.buffer_capacity),
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
            temp_noise: normal(config.noise.sigma_temp),
            rh_noise: normal(config.noise.sigma_rh),
            next_seq: 0,
            status: STATUS_EMPTY,
            schedule_origin: config.phase,
            next_k: 0,
            now: 0.0,
            last_t: None,
            config,
        }
    }

    pub fn sensor_id(&self) -> u8 {
        self.sensor_id
    }

    pub fn position(&self) -> Point3 {
        self.position
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn buffer(&self) -> &RingBuffer<SensorRecord> {
        &self.buffer
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Time of the next scheduled sample.
    pub fn next_due(&self) -> f64 {
        self.schedule_origin + self.next_k as f64 * self.config.sample_period
    }

    /// Takes one measurement of `truth` at time `t` and stores it.
    pub fn sample_tick(
        &mut self,
        truth: (f64, f64),
        t: f64,
    ) -> Result<SensorRecord, EndpointError> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(EndpointError::ClockRegression { t, last });
            }
        }
        let mut temp = truth.0;
        let mut rh = truth.1;
        if let Some(n) = &self.temp_noise {
            temp += n.sample(&mut self.rng);
        }
        if let Some(n) = &self.rh_noise {
            rh += n.sample(&mut self.rng);
        }
        let enc = encode_sample(temp, rh);
        let record = SensorRecord {
            sensor_id: self.sensor_id,
            seq: self.next_seq,
            t,
            temp_raw: enc.temp_raw,
            rh_raw: enc.rh_raw,
        };
        if self.buffer.push(record).is_some() {
            self.status |= STATUS_OVERFLOWED;
        }
        if enc.saturated {
            self.status |= STATUS_SATURATED;
        } else {
            self.status &= !STATUS_SATURATED;
        }
        self.status &= !STATUS_EMPTY;
        self.next_seq = self.next_seq.wrapping_add(1);
        self.last_t = Some(t);
        self.now = self.now.max(t);
        Ok(record)
    }

    /// Runs every scheduled sample with a due time at or before `t`.
    pub fn advance_to(&mut self, t: f64) {
        while self.next_due() <= t {
            let due = self.next_due();
            self.next_k += 1;
            if self.last_t.is_some_and(|last| due < last) {
                continue;
            }
            let truth = self.env.truth(&self.position, due);
            self.sample_tick(truth, due)
                .expect("scheduled samples are monotone");
        }
        self.now = self.now.max(t);
    }

    /// Realigns the sample schedule to the shared epoch; the next sample falls on
    /// the first epoch-aligned instant not before the current time.
    fn sync(&mut self) {
        let period = self.config.sample_period;
        self.schedule_origin = self.config.sync_epoch;
        let mut k = ((self.now - self.schedule_origin) / period).ceil() as i64;
        while self
            .last_t
            .is_some_and(|last| self.schedule_origin + k as f64 * period <= last)
        {
            k += 1;
        }
        self.next_k = k;
        self.status |= STATUS_SYNCED;
    }

    pub fn register_read(&self, addr: u16) -> Result<u16, Nack> {
        let reg = Register::from_addr(addr).ok_or(Nack::UndefinedRegister)?;
        let latest = || self.buffer.latest().ok_or(Nack::NoData);
        Ok(match reg {
            Register::DeviceId => self.sensor_id as u16,
            Register::Status => self.status,
            Register::TempLatest => latest()?.temp_raw,
            Register::RhLatest => latest()?.rh_raw,
            Register::BufferCount => self.buffer.len() as u16,
            Register::SeqLatest => latest()?.seq as u16,
            Register::Cmd => return Err(Nack::WriteOnly),
        })
    }

    pub fn register_write(&mut self, addr: u16, val: u16) -> Result<(), Nack> {
        match Register::from_addr(addr).ok_or(Nack::UndefinedRegister)? {
            Register::Cmd => match val {
                CMD_SYNC => {
                    self.sync();
                    Ok(())
                }
                CMD_SAMPLE_NOW => {
                    let t = self.now.max(self.last_t.unwrap_or(f64::NEG_INFINITY));
                    let truth = self.env.truth(&self.position, t);
                    self.sample_tick(truth, t).map_err(|_| Nack::BadCommand)?;
                    Ok(())
                }
                _ => Err(Nack::BadCommand),
            },
            _ => Err(Nack::ReadOnly),
        }
    }

    /// Answers one wire request. Frames with a bad checksum are dropped (no reply).
    pub fn handle_frame(&mut self, bytes: &[u8]) -> Option<[u8; wire::RESPONSE_LEN]> {
        let req = wire::RequestFrame::decode(bytes).ok()?;
        if req.sensor_id != self.sensor_id {
            return None;
        }
        let result = match req.op {
            wire::Op::Read => self.register_read(req.addr),
            wire::Op::Write => self.register_write(req.addr, req.val).map(|_| req.val),
        };
        let (status, val) = match result {
            Ok(v) => (wire::Status::Ack, v),
            Err(n) => (wire::Status::Nack, n.code()),
        };
        Some(
            wire::ResponseFrame {
                op: req.op,
                sensor_id: self.sensor_id,
                addr: req.addr,
                val,
                status,
            }
            .encode(),
        )
    }
}
