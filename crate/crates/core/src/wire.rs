//! Binary framing for messages crossing the inter-site channel.
//!
//! Every frame is `u32 total_len | u16 topic_len | topic | u64 seq |
//! f64 send_time | payload`, little endian, where `total_len` counts the
//! whole frame including itself.

use thiserror::Error;

use crate::feedback::ForceVector;
use crate::world::{LaserScan, Pose2D, Twist};

pub const HEADER_FIXED_BYTES: usize = 4 + 2 + 8 + 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("declared length {declared} does not match frame length {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("topic is not valid UTF-8")]
    BadTopic,
    #[error("topic longer than 65535 bytes")]
    TopicTooLong,
    #[error("payload of {len} bytes is invalid for {kind}")]
    BadPayload { kind: &'static str, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: String,
    pub seq: u64,
    pub send_time: f64,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(topic: impl Into<String>, seq: u64, send_time: f64, payload: Vec<u8>) -> Self {
        Self { topic: topic.into(), seq, send_time, payload }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_FIXED_BYTES + self.topic.len() + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let topic = self.topic.as_bytes();
        let topic_len = u16::try_from(topic.len()).map_err(|_| WireError::TopicTooLong)?;
        let total = self.encoded_len();
        let mut out = Vec::with_capacity(total);
        out.extend_from_slice(&(total as u32).to_le_bytes());
        out.extend_from_slice(&topic_len.to_le_bytes());
        out.extend_from_slice(topic);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.send_time.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let declared = r.u32()? as usize;
        if declared != bytes.len() {
            return Err(WireError::LengthMismatch { declared, actual: bytes.len() });
        }
        let topic_len = r.u16()? as usize;
        let topic = std::str::from_utf8(r.take(topic_len)?).map_err(|_| WireError::BadTopic)?.to_string();
        let seq = r.u64()?;
        let send_time = r.f64()?;
        Ok(Self { topic, seq, send_time, payload: r.rest().to_vec() })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(WireError::Truncated { need: end, have: self.buf.len() });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }
}

/// A message body that can travel in an [`Envelope`].
pub trait Payload: Sized {
    const KIND: &'static str;
    fn encode_payload(&self) -> Vec<u8>;
    fn decode_payload(bytes: &[u8]) -> Result<Self, WireError>;
}

fn f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f64s<const N: usize>(kind: &'static str, bytes: &[u8]) -> Result<[f64; N], WireError> {
    if bytes.len() != N * 8 {
        return Err(WireError::BadPayload { kind, len: bytes.len() });
    }
    let mut out = [0.0; N];
    for (i, c) in bytes.chunks_exact(8).enumerate() {
        out[i] = f64::from_le_bytes(c.try_into().unwrap());
    }
    Ok(out)
}

impl Payload for Twist {
    const KIND: &'static str = "twist";

    fn encode_payload(&self) -> Vec<u8> {
        f64s(&[self.v, self.omega])
    }

    fn decode_payload(bytes: &[u8]) -> Result<Self, WireError> {
        let [v, omega] = read_f64s(Self::KIND, bytes)?;
        Ok(Twist::new(v, omega))
    }
}

impl Payload for Pose2D {
    const KIND: &'static str = "pose";

    fn encode_payload(&self) -> Vec<u8> {
        f64s(&[self.x, self.y, self.theta])
    }

    fn decode_payload(bytes: &[u8]) -> Result<Self, WireError> {
        let [x, y, theta] = read_f64s(Self::KIND, bytes)?;
        Ok(Pose2D { x, y, theta })
    }
}

impl Payload for ForceVector {
    const KIND: &'static str = "force";

    fn encode_payload(&self) -> Vec<u8> {
        f64s(&[self.fx, self.fy, self.stamp])
    }

    fn decode_payload(bytes: &[u8]) -> Result<Self, WireError> {
        let [fx, fy, stamp] = read_f64s(Self::KIND, bytes)?;
        Ok(ForceVector { fx, fy, stamp })
    }
}

impl Payload for LaserScan {
    const KIND: &'static str = "scan";

    fn encode_payload(&self) -> Vec<u8> {
        let mut out = f64s(&[self.stamp, self.angle_min, self.angle_increment, self.range_max]);
        out.reserve(self.ranges.len() * 4);
        for r in &self.ranges {
            out.extend_from_slice(&(*r as f32).to_le_bytes());
        }
        out
    }

    /// Ranges travel as f32; a value equal to `range_max` rounded to f32 is
    /// restored to exactly `range_max` so no-return beams stay recognizable.
    fn decode_payload(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < 32 || (bytes.len() - 32) % 4 != 0 {
            return Err(WireError::BadPayload { kind: Self::KIND, len: bytes.len() });
        }
        let [stamp, angle_min, angle_increment, range_max] = read_f64s(Self::KIND, &bytes[..32])?;
        let max32 = range_max as f32;
        let ranges = bytes[32..]
            .chunks_exact(4)
            .map(|c| {
                let r = f32::from_le_bytes(c.try_into().unwrap());
                if r == max32 { range_max } else { r as f64 }
            })
            .collect();
        Ok(LaserScan { stamp, angle_min, angle_increment, range_max, ranges })
    }
}

/// Encodes a typed message straight into a framed byte vector.
pub fn encode_message<P: Payload>(topic: &str, seq: u64, send_time: f64, msg: &P) -> Result<Vec<u8>, WireError> {
    Envelope::new(topic, seq, send_time, msg.encode_payload()).encode()
}

pub fn decode_message<P: Payload>(bytes: &[u8]) -> Result<(Envelope, P), WireError> {
    let env = Envelope::decode(bytes)?;
    let msg = P::decode_payload(&env.payload)?;
    Ok((env, msg))
}
