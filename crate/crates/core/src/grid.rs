use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evenly spaced samples `start, ..., stop` (inclusive), `points` of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Span {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        let s = Self { start, stop, points };
        s.validate()?;
        Ok(s)
    }

    /// A single value.
    pub fn point(x: f64) -> Self {
        Self { start: x, stop: x, points: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::EmptyRange);
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidParameter("range bounds must be finite".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let step = (self.stop - self.start) / (n - 1) as f64;
                (0..n).map(|i| if i == n - 1 { self.stop } else { self.start + step * i as f64 }).collect()
            }
        }
    }
}
