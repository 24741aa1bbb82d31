use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Twist;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("trace row {row}: {message}")]
    Row { row: usize, message: String },
}

/// One operator command, stamped with the server tick time it was applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub v: f64,
    pub omega: f64,
}

impl TraceRow {
    pub fn twist(&self) -> Twist {
        Twist::new(self.v, self.omega)
    }
}

/// Recorded teleoperation commands, CSV `t,v,omega` in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TeleopTrace {
    pub rows: Vec<TraceRow>,
}

impl TeleopTrace {
    pub fn new(rows: Vec<TraceRow>) -> Result<Self, TraceError> {
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(TraceError::Row { row: i + 1, message: "timestamps must be non-decreasing".into() });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.t.is_finite() && r.v.is_finite() && r.omega.is_finite()) {
                return Err(TraceError::Row { row: i, message: "non-finite value".into() });
            }
        }
        Ok(Self { rows })
    }

    pub fn push(&mut self, t: f64, cmd: Twist) {
        self.rows.push(TraceRow { t, v: cmd.v, omega: cmd.omega });
    }

    pub fn end_time(&self) -> Option<f64> {
        self.rows.last().map(|r| r.t)
    }

    pub fn from_reader(r: impl Read) -> Result<Self, TraceError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rd.deserialize::<TraceRow>().enumerate() {
            rows.push(rec.map_err(|e| TraceError::Row { row: i, message: e.to_string() })?);
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path).map_err(|e| TraceError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_reader(f)
    }

    /// CSV text. Values use shortest round-trip formatting so a replay sees
    /// bit-identical commands.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,v,omega\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.t, r.v, r.omega));
        }
        s
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_csv()).map_err(|e| TraceError::Io { path: path.display().to_string(), message: e.to_string() })
    }
}

/// Replays a trace tick by tick: every row stamped at or before the tick
/// time is released once.
#[derive(Debug, Clone)]
pub struct TraceCursor {
    trace: TeleopTrace,
    next: usize,
}

impl TraceCursor {
    pub fn new(trace: TeleopTrace) -> Self {
        Self { trace, next: 0 }
    }

    pub fn due(&mut self, t: f64) -> &[TraceRow] {
        let start = self.next;
        while self.next < self.trace.rows.len() && self.trace.rows[self.next].t <= t + 1e-9 {
            self.next += 1;
        }
        &self.trace.rows[start..self.next]
    }

    pub fn exhausted(&self) -> bool {
        self.next >= self.trace.rows.len()
    }

    pub fn end_time(&self) -> Option<f64> {
        self.trace.end_time()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let mut t = TeleopTrace::default();
        for i in 0..10 {
            t.push(i as f64 * 0.05, Twist::new(0.1 * i as f64 / 3.0, -0.7 / (i + 1) as f64));
        }
        let back = TeleopTrace::from_reader(t.to_csv().as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows.len(), 10);
    }

    #[test]
    fn empty_trace_is_valid() {
        let t = TeleopTrace::default();
        assert_eq!(t.to_csv(), "t,v,omega\n");
        assert_eq!(TeleopTrace::from_reader(t.to_csv().as_bytes()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(TeleopTrace::from_reader("t,v,omega\n1,0,0\n0.5,0,0\n".as_bytes()).is_err());
        assert!(TeleopTrace::from_reader("t,v,omega\n1,x,0\n".as_bytes()).is_err());
    }

    #[test]
    fn cursor_releases_once() {
        let t = TeleopTrace::from_reader("t,v,omega\n0,0.1,0\n0.05,0.2,0\n0.05,0.3,0\n0.2,0,0\n".as_bytes()).unwrap();
        let mut c = TraceCursor::new(t);
        assert_eq!(c.due(0.0).len(), 1);
        assert_eq!(c.due(0.05).iter().map(|r| r.v).collect::<Vec<_>>(), vec![0.2, 0.3]);
        assert!(c.due(0.1).is_empty());
        assert_eq!(c.due(0.2).len(), 1);
        assert!(c.exhausted());
    }
}
