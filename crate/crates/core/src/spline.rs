//! Natural cubic splines through `(time, value)` knots.
//!
//! Each segment `i` stores `a + bΔ + cΔ² + dΔ³` with `Δ = t - t_i`. The
//! knot second derivatives come from the standard tridiagonal system, solved
//! with the Thomas algorithm; zero second derivative is imposed at both ends.

use crate::error::{MimicError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Segment {
    fn value(&self, dt: f64) -> f64 {
        self.a + dt * (self.b + dt * (self.c + dt * self.d))
    }

    fn velocity(&self, dt: f64) -> f64 {
        self.b + dt * (2.0 * self.c + 3.0 * dt * self.d)
    }

    fn acceleration(&self, dt: f64) -> f64 {
        2.0 * self.c + 6.0 * dt * self.d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knot_times: Vec<f64>,
    segments: Vec<Segment>,
}

impl CubicSpline {
    /// Builds the natural cubic spline interpolating `knots`.
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(MimicError::InvalidKnots(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        for (i, &(t, v)) in knots.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(MimicError::InvalidKnots(format!("knot {i} is not finite")));
            }
        }
        for (i, pair) in knots.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(MimicError::InvalidKnots(format!(
                    "knot times must be strictly increasing (knot {} at {} after {})",
                    i + 1,
                    pair[1].0,
                    pair[0].0
                )));
            }
        }

        let n = knots.len();
        let times: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let values: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / h[i])
            .collect();

        // Second derivatives at the knots; the ends stay zero.
        let mut m = vec![0.0; n];
        let interior = n - 2;
        if interior > 0 {
            let mut diag: Vec<f64> = (1..n - 1).map(|i| 2.0 * (h[i - 1] + h[i])).collect();
            let mut rhs: Vec<f64> = (1..n - 1)
                .map(|i| 6.0 * (slope[i] - slope[i - 1]))
                .collect();
            // Row k couples to k-1 with h[k] and to k+1 with h[k+1].
            for k in 1..interior {
                let w = h[k] / diag[k - 1];
                diag[k] -= w * h[k];
                rhs[k] -= w * rhs[k - 1];
            }
            m[interior] = rhs[interior - 1] / diag[interior - 1];
            for k in (0..interior - 1).rev() {
                m[k + 1] = (rhs[k] - h[k + 1] * m[k + 2]) / diag[k];
            }
        }

        let segments = (0..n - 1)
            .map(|i| Segment {
                a: values[i],
                b: slope[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0,
                c: m[i] / 2.0,
                d: (m[i + 1] - m[i]) / (6.0 * h[i]),
            })
            .collect();

        Ok(Self {
            knot_times: times,
            segments,
        })
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.knot_times[0]
    }

    pub fn end(&self) -> f64 {
        self.knot_times[self.knot_times.len() - 1]
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (seg, dt) = self.locate(t)?;
        Ok(self.segments[seg].value(dt))
    }

    /// Returns `(velocity, acceleration)` at `t`.
    pub fn eval_derivatives(&self, t: f64) -> Result<(f64, f64)> {
        let (seg, dt) = self.locate(t)?;
        let s = &self.segments[seg];
        Ok((s.velocity(dt), s.acceleration(dt)))
    }

    /// Segment index and local offset. Interior knots belong to the segment
    /// they start; the final knot belongs to the last segment.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(MimicError::OutOfRange {
                value: t,
                lo: self.start(),
                hi: self.end(),
            });
        }
        let upper = self.knot_times.partition_point(|&k| k <= t);
        let seg = upper.saturating_sub(1).min(self.segments.len() - 1);
        Ok((seg, t - self.knot_times[seg]))
    }
}
