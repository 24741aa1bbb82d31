//! Priority velocity multiplexer.
//!
//! Each channel keeps only its newest setpoint. Arbitration picks the
//! highest-priority channel whose setpoint is still fresh; with nothing
//! fresh the robot is commanded to stop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Twist;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuxError {
    #[error("channel name '{0}' already registered")]
    DuplicateName(String),
    #[error("priority {0} already registered")]
    DuplicatePriority(i32),
    #[error("channel timeout must be positive, got {0}")]
    BadTimeout(f64),
    #[error("unknown channel '{0}'")]
    UnknownChannel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuxChannel {
    pub name: String,
    pub priority: i32,
    pub timeout: f64,
}

impl MuxChannel {
    pub fn new(name: impl Into<String>, priority: i32, timeout: f64) -> Self {
        Self { name: name.into(), priority, timeout }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    channel: MuxChannel,
    latest: Option<(Twist, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct PriorityMux {
    slots: Vec<Slot>,
    active: Option<usize>,
}

impl PriorityMux {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_channels(channels: impl IntoIterator<Item = MuxChannel>) -> Result<Self, MuxError> {
        let mut m = Self::new();
        for c in channels {
            m.register_channel(c)?;
        }
        Ok(m)
    }

    pub fn register_channel(&mut self, channel: MuxChannel) -> Result<(), MuxError> {
        if !(channel.timeout > 0.0) {
            return Err(MuxError::BadTimeout(channel.timeout));
        }
        if self.slots.iter().any(|s| s.channel.name == channel.name) {
            return Err(MuxError::DuplicateName(channel.name));
        }
        if self.slots.iter().any(|s| s.channel.priority == channel.priority) {
            return Err(MuxError::DuplicatePriority(channel.priority));
        }
        self.slots.push(Slot { channel, latest: None });
        Ok(())
    }

    pub fn channels(&self) -> impl Iterator<Item = &MuxChannel> {
        self.slots.iter().map(|s| &s.channel)
    }

    /// Replaces the channel's setpoint (queue depth 1, newest wins).
    pub fn offer(&mut self, channel: &str, cmd: Twist, now: f64) -> Result<(), MuxError> {
        let slot = self
            .slots
            .iter_mut()
            .find(|s| s.channel.name == channel)
            .ok_or_else(|| MuxError::UnknownChannel(channel.to_string()))?;
        slot.latest = Some((cmd, now));
        Ok(())
    }

    pub fn latest(&self, channel: &str) -> Option<(Twist, f64)> {
        self.slots.iter().find(|s| s.channel.name == channel).and_then(|s| s.latest)
    }

    /// Selects the freshest highest-priority setpoint, or `None` when no
    /// channel is fresh (caller commands zero).
    pub fn arbitrate(&mut self, now: f64) -> Option<Twist> {
        let mut pick: Option<usize> = None;
        for (i, s) in self.slots.iter().enumerate() {
            let Some((_, t)) = s.latest else { continue };
            if now - t > s.channel.timeout {
                continue;
            }
            if pick.is_none_or(|p| s.channel.priority > self.slots[p].channel.priority) {
                pick = Some(i);
            }
        }
        self.active = pick;
        pick.and_then(|i| self.slots[i].latest.map(|(cmd, _)| cmd))
    }

    /// Arbitrated command with the fail-safe zero applied.
    pub fn command(&mut self, now: f64) -> Twist {
        self.arbitrate(now).unwrap_or(Twist::ZERO)
    }

    pub fn active_channel(&self) -> Option<&str> {
        self.active.map(|i| self.slots[i].channel.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nav_force() -> PriorityMux {
        PriorityMux::with_channels([MuxChannel::new("nav", 10, 0.5), MuxChannel::new("force", 100, 0.5)]).unwrap()
    }

    #[test]
    fn registration() {
        let mut m = nav_force();
        assert_eq!(m.channels().count(), 2);
        assert_eq!(m.active_channel(), None);
        assert_eq!(m.register_channel(MuxChannel::new("other", 10, 0.5)), Err(MuxError::DuplicatePriority(10)));
        assert_eq!(m.register_channel(MuxChannel::new("nav", 11, 0.5)), Err(MuxError::DuplicateName("nav".into())));
        assert!(m.register_channel(MuxChannel::new("x", 1, 0.0)).is_err());
        assert_eq!(PriorityMux::new().arbitrate(0.0), None);
    }

    #[test]
    fn newest_wins() {
        let mut m = nav_force();
        m.offer("nav", Twist::new(0.1, 0.0), 1.0).unwrap();
        assert_eq!(m.latest("nav").unwrap().0, Twist::new(0.1, 0.0));
        m.offer("nav", Twist::new(0.2, 0.0), 1.0).unwrap();
        assert_eq!(m.arbitrate(1.0), Some(Twist::new(0.2, 0.0)));
        assert_eq!(m.offer("teleop", Twist::ZERO, 1.0), Err(MuxError::UnknownChannel("teleop".into())));
    }

    #[test]
    fn priority_and_timeout() {
        let mut m = nav_force();
        m.offer("nav", Twist::new(0.3, 0.0), 1.0).unwrap();
        m.offer("force", Twist::new(0.0, 0.5), 1.0).unwrap();
        assert_eq!(m.arbitrate(1.0), Some(Twist::new(0.0, 0.5)));
        assert_eq!(m.active_channel(), Some("force"));
        m.offer("nav", Twist::new(0.3, 0.0), 1.6).unwrap();
        assert_eq!(m.arbitrate(1.6), Some(Twist::new(0.3, 0.0)));
        assert_eq!(m.active_channel(), Some("nav"));
        assert_eq!(m.arbitrate(2.2), None);
        assert_eq!(m.command(2.2), Twist::ZERO);
        assert_eq!(m.active_channel(), None);
    }
}
