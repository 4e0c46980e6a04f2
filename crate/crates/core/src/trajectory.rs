use nalgebra::Vector2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// s
    pub time: f64,
    /// m
    pub position: Vector2<f64>,
    /// rad; absent for tracks ingested without orientation
    pub heading: Option<f64>,
}

/// Time-stamped positions of one particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(label: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let t = Self {
            label: label.into(),
            samples,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.samples.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::Domain(format!(
                    "trajectory '{}': timestamps must increase strictly ({} then {})",
                    self.label, w[0].time, w[1].time
                )));
            }
        }
        if let Some(s) = self
            .samples
            .iter()
            .find(|s| !(s.time.is_finite() && s.position.iter().all(|c| c.is_finite())))
        {
            return Err(Error::Domain(format!(
                "trajectory '{}': non-finite sample at t = {}",
                self.label, s.time
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Time span covered, if there is at least one sample.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.first()?.time, self.last()?.time))
    }

    /// Samples with `t0 - tol <= time <= t1 + tol`.
    pub fn window(&self, t0: f64, t1: f64, tol: f64) -> &[Sample] {
        let lo = self.samples.partition_point(|s| s.time < t0 - tol);
        let hi = self.samples.partition_point(|s| s.time <= t1 + tol);
        &self.samples[lo..hi.max(lo)]
    }

    /// Linearly interpolated position; `None` outside the covered span.
    pub fn position_at(&self, t: f64) -> Option<Vector2<f64>> {
        let (t0, t1) = self.span()?;
        if t < t0 || t > t1 {
            return None;
        }
        let i = self.samples.partition_point(|s| s.time <= t);
        if i == 0 {
            return Some(self.samples[0].position);
        }
        let a = &self.samples[i - 1];
        if a.time == t || i == self.samples.len() {
            return Some(a.position);
        }
        let b = &self.samples[i];
        let s = (t - a.time) / (b.time - a.time);
        Some(a.position + s * (b.position - a.position))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Trajectory {
        let samples = (0..=10)
            .map(|k| Sample {
                time: k as f64 * 0.5,
                position: Vector2::new(k as f64, -2.0 * k as f64),
                heading: None,
            })
            .collect();
        Trajectory::new("a", samples).unwrap()
    }

    #[test]
    fn interpolation() {
        let t = line();
        assert_eq!(t.position_at(0.0), Some(Vector2::new(0.0, 0.0)));
        assert_eq!(t.position_at(5.0), Some(Vector2::new(10.0, -20.0)));
        let p = t.position_at(1.25).unwrap();
        assert!((p - Vector2::new(2.5, -5.0)).norm() < 1e-12);
        assert_eq!(t.position_at(-0.1), None);
        assert_eq!(t.position_at(5.1), None);
    }

    #[test]
    fn windows() {
        let t = line();
        assert_eq!(t.window(1.0, 2.0, 1e-9).len(), 3);
        assert_eq!(t.window(1.1, 1.2, 1e-9).len(), 0);
        assert_eq!(t.window(-5.0, 50.0, 0.0).len(), 11);
    }

    #[test]
    fn rejects_bad_clock() {
        let s = |t| Sample {
            time: t,
            position: Vector2::zeros(),
            heading: None,
        };
        assert!(Trajectory::new("x", vec![s(0.0), s(0.0)]).is_err());
        assert!(Trajectory::new("x", vec![s(1.0), s(0.5)]).is_err());
        let bad = Sample {
            time: 0.0,
            position: Vector2::new(f64::NAN, 0.0),
            heading: None,
        };
        assert!(Trajectory::new("x", vec![bad]).is_err());
    }
}
