//! Deterministic emulation of the link between the cyber and physical sites.
//!
//! Topics carry opaque byte frames. Each topic has its own impairment
//! parameters and its own seeded random stream, so adding a topic never
//! perturbs the delivery schedule of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DELIVERY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("topic '{name}' already open in direction {direction:?}")]
    DuplicateTopic { name: String, direction: Direction },
    #[error("unknown topic handle {0}")]
    UnknownTopic(usize),
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    CyberToPhysical,
    PhysicalToCyber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub base_delay: f64,
    /// Half-width of the uniform jitter, seconds.
    pub jitter: f64,
    pub loss_prob: f64,
    /// Bytes per second; 0 means unlimited.
    pub bandwidth: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        Self { base_delay: 0.0, jitter: 0.0, loss_prob: 0.0, bandwidth: 0.0, seed: 0 }
    }

    pub fn wifi_good() -> Self {
        Self { base_delay: 0.005, jitter: 0.002, loss_prob: 0.001, ..Self::ideal() }
    }

    pub fn wifi_poor() -> Self {
        Self { base_delay: 0.100, jitter: 0.040, loss_prob: 0.05, ..Self::ideal() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ideal" => Some(Self::ideal()),
            "wifi-good" => Some(Self::wifi_good()),
            "wifi-poor" => Some(Self::wifi_poor()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter must be >= 0, got {}", self.jitter));
        }
        if !(self.base_delay >= self.jitter && self.base_delay.is_finite()) {
            return bad(format!("base_delay {} must be >= jitter {}", self.base_delay, self.jitter));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return bad(format!("loss_prob must be in [0, 1], got {}", self.loss_prob));
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth.is_finite()) {
            return bad(format!("bandwidth must be >= 0, got {}", self.bandwidth));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopicHandle(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub payload: Vec<u8>,
    pub send_time: f64,
    pub recv_time: f64,
}

#[derive(Debug, Clone)]
struct InFlight {
    delivery_time: f64,
    order: u64,
    payload: Vec<u8>,
    send_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub sent_count: u64,
    pub sent_bytes: u64,
    pub recv_count: u64,
    pub recv_bytes: u64,
    pub dropped_count: u64,
    pub dropped_bytes: u64,
    pub latency_samples: Vec<f64>,
}

impl TopicMetrics {
    fn merge(&mut self, other: &TopicMetrics) {
        self.sent_count += other.sent_count;
        self.sent_bytes += other.sent_bytes;
        self.recv_count += other.recv_count;
        self.recv_bytes += other.recv_bytes;
        self.dropped_count += other.dropped_count;
        self.dropped_bytes += other.dropped_bytes;
        self.latency_samples.extend_from_slice(&other.latency_samples);
    }

    pub fn summary(&self, elapsed: f64) -> MetricsSummary {
        let mut sorted = self.latency_samples.clone();
        sorted.sort_by(f64::total_cmp);
        let per_s = |b: u64| if elapsed > 0.0 { b as f64 / elapsed } else { 0.0 };
        MetricsSummary {
            sent_count: self.sent_count,
            sent_bytes: self.sent_bytes,
            recv_count: self.recv_count,
            recv_bytes: self.recv_bytes,
            dropped_count: self.dropped_count,
            in_flight_count: self.sent_count - self.recv_count - self.dropped_count,
            latency_mean: if sorted.is_empty() { 0.0 } else { sorted.iter().sum::<f64>() / sorted.len() as f64 },
            latency_median: percentile(&sorted, 0.5),
            latency_p95: percentile(&sorted, 0.95),
            throughput_send: per_s(self.sent_bytes),
            throughput_recv: per_s(self.recv_bytes),
            throughput_loss: per_s(self.dropped_bytes),
        }
    }
}

/// Linear-interpolated percentile of an ascending slice; 0 for empty input.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Aggregate view of [`TopicMetrics`]. Throughput figures are bytes/second.
/// `throughput_loss` is the rate of bytes lost on the link; messages still
/// in flight at snapshot time are not counted as lost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub sent_count: u64,
    pub sent_bytes: u64,
    pub recv_count: u64,
    pub recv_bytes: u64,
    pub dropped_count: u64,
    pub in_flight_count: u64,
    pub latency_mean: f64,
    pub latency_median: f64,
    pub latency_p95: f64,
    pub throughput_send: f64,
    pub throughput_recv: f64,
    pub throughput_loss: f64,
}

#[derive(Debug, Clone)]
struct Topic {
    name: String,
    direction: Direction,
    config: ChannelConfig,
    rng: ChaCha8Rng,
    link_free_at: f64,
    queue: Vec<InFlight>,
    next_order: u64,
    metrics: TopicMetrics,
}

fn topic_seed(seed: u64, name: &str, direction: Direction) -> u64 {
    // FNV-1a over the name and direction, mixed into the configured seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes().chain([direction as u8]) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

#[derive(Debug, Clone, Default)]
pub struct NetworkSim {
    topics: Vec<Topic>,
}

impl NetworkSim {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_topic(&mut self, name: &str, config: ChannelConfig, direction: Direction) -> Result<TopicHandle, NetError> {
        config.validate()?;
        if self.topics.iter().any(|t| t.name == name && t.direction == direction) {
            return Err(NetError::DuplicateTopic { name: name.to_string(), direction });
        }
        self.topics.push(Topic {
            name: name.to_string(),
            direction,
            config,
            rng: ChaCha8Rng::seed_from_u64(topic_seed(config.seed, name, direction)),
            link_free_at: f64::NEG_INFINITY,
            queue: Vec::new(),
            next_order: 0,
            metrics: TopicMetrics::default(),
        });
        Ok(TopicHandle(self.topics.len() - 1))
    }

    pub fn find(&self, name: &str, direction: Direction) -> Option<TopicHandle> {
        self.topics.iter().position(|t| t.name == name && t.direction == direction).map(TopicHandle)
    }

    fn topic_mut(&mut self, h: TopicHandle) -> Result<&mut Topic, NetError> {
        self.topics.get_mut(h.0).ok_or(NetError::UnknownTopic(h.0))
    }

    fn topic(&self, h: TopicHandle) -> Result<&Topic, NetError> {
        self.topics.get(h.0).ok_or(NetError::UnknownTopic(h.0))
    }

    pub fn name(&self, h: TopicHandle) -> Result<(&str, Direction), NetError> {
        self.topic(h).map(|t| (t.name.as_str(), t.direction))
    }

    /// Sends a frame. Returns the scheduled delivery time, or `None` when
    /// the frame was lost.
    pub fn publish(&mut self, h: TopicHandle, payload: Vec<u8>, now: f64) -> Result<Option<f64>, NetError> {
        let t = self.topic_mut(h)?;
        let bytes = payload.len() as u64;
        t.metrics.sent_count += 1;
        t.metrics.sent_bytes += bytes;
        // both draws happen every call so the stream stays aligned
        let loss_draw: f64 = t.rng.random();
        let jitter_draw: f64 = t.rng.random();
        if loss_draw < t.config.loss_prob {
            t.metrics.dropped_count += 1;
            t.metrics.dropped_bytes += bytes;
            return Ok(None);
        }
        let tx_done = if t.config.bandwidth > 0.0 {
            let done = now.max(t.link_free_at) + bytes as f64 / t.config.bandwidth;
            t.link_free_at = done;
            done
        } else {
            now
        };
        let jitter = if t.config.jitter > 0.0 { (2.0 * jitter_draw - 1.0) * t.config.jitter } else { 0.0 };
        let delivery_time = tx_done + t.config.base_delay + jitter;
        let order = t.next_order;
        t.next_order += 1;
        t.queue.push(InFlight { delivery_time, order, payload, send_time: now });
        Ok(Some(delivery_time))
    }

    /// Returns every frame due by `now`, earliest delivery first.
    pub fn poll(&mut self, h: TopicHandle, now: f64) -> Result<Vec<Delivery>, NetError> {
        let t = self.topic_mut(h)?;
        let (mut due, rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut t.queue).into_iter().partition(|m| m.delivery_time <= now + DELIVERY_EPS);
        t.queue = rest;
        due.sort_by(|a, b| a.delivery_time.total_cmp(&b.delivery_time).then(a.order.cmp(&b.order)));
        Ok(due
            .into_iter()
            .map(|m| {
                t.metrics.recv_count += 1;
                t.metrics.recv_bytes += m.payload.len() as u64;
                t.metrics.latency_samples.push(m.delivery_time - m.send_time);
                Delivery { payload: m.payload, send_time: m.send_time, recv_time: m.delivery_time }
            })
            .collect())
    }

    pub fn in_flight(&self, h: TopicHandle) -> Result<usize, NetError> {
        self.topic(h).map(|t| t.queue.len())
    }

    pub fn metrics(&self, h: TopicHandle) -> Result<&TopicMetrics, NetError> {
        self.topic(h).map(|t| &t.metrics)
    }

    pub fn snapshot(&self, h: TopicHandle, elapsed: f64) -> Result<MetricsSummary, NetError> {
        self.topic(h).map(|t| t.metrics.summary(elapsed))
    }

    /// Metrics pooled over every topic.
    pub fn snapshot_all(&self, elapsed: f64) -> MetricsSummary {
        let mut all = TopicMetrics::default();
        for t in &self.topics {
            all.merge(&t.metrics);
        }
        all.summary(elapsed)
    }

    pub fn handles(&self) -> impl Iterator<Item = TopicHandle> + '_ {
        (0..self.topics.len()).map(TopicHandle)
    }
}
