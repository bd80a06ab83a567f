//! Byte-exact register protocol frames between a concentrator and its end-points.
//!
//! Request (7 bytes): `[op][sensor_id][addr BE u16][val BE u16][xor]`, op `0x01`
//! read or `0x02` write. Response (8 bytes): `[op|0x80][sensor_id][addr][val][status][xor]`,
//! status `0` ACK or `1` NACK. The checksum is the XOR of every preceding byte.

use thiserror::Error;

pub const OP_READ: u8 = 0x01;
pub const OP_WRITE: u8 = 0x02;
pub const RESPONSE_BIT: u8 = 0x80;
pub const REQUEST_LEN: usize = 7;
pub const RESPONSE_LEN: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("checksum mismatch: computed {computed:#04x}, frame carries {carried:#04x}")]
    Checksum { computed: u8, carried: u8 },
    #[error("unknown opcode {0:#04x}")]
    Opcode(u8),
    #[error("unknown status byte {0}")]
    Status(u8),
}

pub fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read,
    Write,
}

impl Op {
    fn code(self) -> u8 {
        match self {
            Op::Read => OP_READ,
            Op::Write => OP_WRITE,
        }
    }

    fn from_code(b: u8) -> Result<Self, FrameError> {
        match b {
            OP_READ => Ok(Op::Read),
            OP_WRITE => Ok(Op::Write),
            other => Err(FrameError::Opcode(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestFrame {
    pub op: Op,
    pub sensor_id: u8,
    pub addr: u16,
    pub val: u16,
}

impl RequestFrame {
    pub fn read(sensor_id: u8, addr: u16) -> Self {
        Self {
            op: Op::Read,
            sensor_id,
            addr,
            val: 0,
        }
    }

    pub fn write(sensor_id: u8, addr: u16, val: u16) -> Self {
        Self {
            op: Op::Write,
            sensor_id,
            addr,
            val,
        }
    }

    pub fn encode(&self) -> [u8; REQUEST_LEN] {
        let a = self.addr.to_be_bytes();
        let v = self.val.to_be_bytes();
        let mut out = [self.op.code(), self.sensor_id, a[0], a[1], v[0], v[1], 0];
        out[6] = checksum(&out[..6]);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() != REQUEST_LEN {
            return Err(FrameError::Length {
                got: bytes.len(),
                expected: REQUEST_LEN,
            });
        }
        verify(bytes)?;
        Ok(Self {
            op: Op::from_code(bytes[0])?,
            sensor_id: bytes[1],
            addr: u16::from_be_bytes([bytes[2], bytes[3]]),
            val: u16::from_be_bytes([bytes[4], bytes[5]]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ack,
    Nack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseFrame {
    /// Operation of the request being answered.
    pub op: Op,
    pub sensor_id: u8,
    pub addr: u16,
    /// Register value on ACK, NACK reason code otherwise.
    pub val: u16,
    pub status: Status,
}

impl ResponseFrame {
    pub fn encode(&self) -> [u8; RESPONSE_LEN] {
        let a = self.addr.to_be_bytes();
        let v = self.val.to_be_bytes();
        let status = match self.status {
            Status::Ack => 0,
            Status::Nack => 1,
        };
        let mut out = [
            self.op.code() | RESPONSE_BIT,
            self.sensor_id,
            a[0],
            a[1],
            v[0],
            v[1],
            status,
            0,
        ];
        out[7] = checksum(&out[..7]);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() != RESPONSE_LEN {
            return Err(FrameError::Length {
                got: bytes.len(),
                expected: RESPONSE_LEN,
            });
        }
        verify(bytes)?;
        if bytes[0] & RESPONSE_BIT == 0 {
            return Err(FrameError::Opcode(bytes[0]));
        }
        Ok(Self {
            op: Op::from_code(bytes[0] & !RESPONSE_BIT)?,
            sensor_id: bytes[1],
            addr: u16::from_be_bytes([bytes[2], bytes[3]]),
            val: u16::from_be_bytes([bytes[4], bytes[5]]),
            status: match bytes[6] {
                0 => Status::Ack,
                1 => Status::Nack,
                other => return Err(FrameError::Status(other)),
            },
        })
    }
}

fn verify(bytes: &[u8]) -> Result<(), FrameError> {
    let (body, tail) = bytes.split_at(bytes.len() - 1);
    let computed = checksum(body);
    if computed != tail[0] {
        return Err(FrameError::Checksum {
            computed,
            carried: tail[0],
        });
    }
    Ok(())
}
