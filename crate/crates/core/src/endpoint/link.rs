//! In-process star link between a room concentrator and its end-points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wire::{self, FrameError, RequestFrame, ResponseFrame};
use super::Endpoint;

/// Aggregate link budget, bits per second.
pub const LINK_BUDGET_BPS: f64 = 1_000_000.0;
/// Virtual time a concentrator waits for one register reply.
pub const READ_TIMEOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// One-way latency, seconds.
    pub latency: f64,
    /// Independent drop probability per frame.
    pub loss_probability: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            latency: 0.0,
            loss_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    /// Request frames put on the link.
    pub requests: u64,
    /// Response frames delivered back.
    pub responses: u64,
    pub bytes: u64,
    pub timeouts: u64,
    /// Poll transactions opened by the concentrator (one per end-point per cycle).
    pub transactions: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("no end-point with address {0} on this link")]
    UnknownEndpoint(u8),
    #[error("end-point {0} did not answer within the timeout")]
    Timeout(u8),
    #[error("corrupt response: {0}")]
    Frame(#[from] FrameError),
}

/// Star topology: the hub forwards encoded frames to end-points by address.
#[derive(Debug)]
pub struct RoomLink {
    endpoints: Vec<Endpoint>,
    params: Vec<LinkParams>,
    rng: ChaCha8Rng,
    stats: LinkStats,
    timeout: f64,
}

impl RoomLink {
    pub fn new(endpoints: Vec<Endpoint>, seed: u64) -> Self {
        let params = vec![LinkParams::default(); endpoints.len()];
        Self {
            endpoints,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: LinkStats::default(),
            timeout: READ_TIMEOUT,
        }
    }

    pub fn set_params(&mut self, sensor_id: u8, params: LinkParams) -> Result<(), LinkError> {
        let i = self.slot(sensor_id)?;
        self.params[i] = params;
        Ok(())
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn endpoints(&self) -> &[Endpoint] {
        &self.endpoints
    }

    pub fn endpoint(&self, sensor_id: u8) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.sensor_id() == sensor_id)
    }

    fn slot(&self, sensor_id: u8) -> Result<usize, LinkError> {
        self.endpoints
            .iter()
            .position(|e| e.sensor_id() == sensor_id)
            .ok_or(LinkError::UnknownEndpoint(sensor_id))
    }

    /// Lets every end-point run its scheduled samples up to `t`.
    pub fn advance_to(&mut self, t: f64) {
        for ep in &mut self.endpoints {
            ep.advance_to(t);
        }
    }

    pub fn begin_transaction(&mut self) {
        self.stats.transactions += 1;
    }

    fn lost(&mut self, p: f64) -> bool {
        p > 0.0 && (p >= 1.0 || self.rng.random::<f64>() < p)
    }

    /// Sends one request and waits for its reply.
    pub fn transact(&mut self, req: RequestFrame) -> Result<ResponseFrame, LinkError> {
        let i = self.slot(req.sensor_id)?;
        let params = self.params[i];
        let bytes = req.encode();
        self.stats.requests += 1;
        self.stats.bytes += bytes.len() as u64;
        if self.lost(params.loss_probability) || 2.0 * params.latency > self.timeout {
            self.stats.timeouts += 1;
            return Err(LinkError::Timeout(req.sensor_id));
        }
        let Some(reply) = self.endpoints[i].handle_frame(&bytes) else {
            self.stats.timeouts += 1;
            return Err(LinkError::Timeout(req.sensor_id));
        };
        if self.lost(params.loss_probability) {
            self.stats.timeouts += 1;
            return Err(LinkError::Timeout(req.sensor_id));
        }
        self.stats.responses += 1;
        self.stats.bytes += reply.len() as u64;
        Ok(ResponseFrame::decode(&reply)?)
    }

    /// Mean bit rate over `duration` seconds of virtual time.
    pub fn mean_bps(&self, duration: f64) -> f64 {
        if duration <= 0.0 {
            return 0.0;
        }
        self.stats.bytes as f64 * 8.0 / duration
    }

    pub fn within_budget(&self, duration: f64) -> bool {
        self.mean_bps(duration) <= LINK_BUDGET_BPS
    }
}

/// Frame sizes, exposed for bandwidth estimates.
pub const TRANSACTION_BYTES: usize = wire::REQUEST_LEN + wire::RESPONSE_LEN;
