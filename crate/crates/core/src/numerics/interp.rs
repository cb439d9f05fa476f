//! Monotone piecewise-cubic Hermite interpolation.
//!
//! Slopes are constrained with the Fritsch–Carlson conditions, so the
//! interpolant never overshoots the data and its derivative is nonnegative
//! everywhere. Outside the knot range the interpolant continues linearly with
//! the end slopes.

use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed on nondecreasing data before it is rejected.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneInterp {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

/// Builds a monotone interpolant with PCHIP-style slope estimates.
pub fn monotone_interp(xs: &[f64], ys: &[f64]) -> Result<MonotoneInterp> {
    MonotoneInterp::new(xs, ys)
}

impl MonotoneInterp {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let ys = validate(xs, ys)?;
        let slopes = pchip_slopes(xs, &ys);
        Ok(Self::finish(xs.to_vec(), ys, slopes))
    }

    /// Uses caller-supplied knot derivatives (for example exact ones),
    /// clipped to satisfy the monotonicity constraints.
    pub fn with_slopes(xs: &[f64], ys: &[f64], slopes: &[f64]) -> Result<Self> {
        let ys = validate(xs, ys)?;
        if slopes.len() != xs.len() {
            return Err(Error::InvalidArgument("slopes length mismatch".into()));
        }
        let slopes = slopes
            .iter()
            .map(|&s| if s.is_finite() { s.max(0.0) } else { 0.0 })
            .collect();
        Ok(Self::finish(xs.to_vec(), ys, slopes))
    }

    fn finish(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        let n = xs.len();
        for k in 0..n - 1 {
            let h = xs[k + 1] - xs[k];
            let delta = (ys[k + 1] - ys[k]) / h;
            if delta == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / delta;
            let b = slopes[k + 1] / delta;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * a * delta;
                slopes[k + 1] = tau * b * delta;
            }
        }
        Self { xs, ys, slopes }
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let k = self.interval(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k]
            + h10 * h * self.slopes[k]
            + h01 * self.ys[k + 1]
            + h11 * h * self.slopes[k + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.slopes[0];
        }
        if x >= self.xs[n - 1] {
            return self.slopes[n - 1];
        }
        let k = self.interval(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ys[k] + d10 * self.slopes[k] + d01 * self.ys[k + 1] + d11 * self.slopes[k + 1]
    }

    /// Smallest `x` with `eval(x) = y` (numerical inverse).
    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.xs.len();
        if y <= self.ys[0] {
            let s = self.slopes[0];
            return if s > 0.0 {
                self.xs[0] + (y - self.ys[0]) / s
            } else {
                self.xs[0]
            };
        }
        if y >= self.ys[n - 1] {
            let s = self.slopes[n - 1];
            return if s > 0.0 {
                self.xs[n - 1] + (y - self.ys[n - 1]) / s
            } else {
                self.xs[n - 1]
            };
        }
        // first knot with ys >= y
        let hi = self.ys.partition_point(|&v| v < y);
        let (mut a, mut b) = (self.xs[hi - 1], self.xs[hi]);
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let f = self.eval(x) - y;
            if f == 0.0 {
                return x;
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let d = self.derivative(x);
            let newton = if d > 0.0 { x - f / d } else { f64::NAN };
            x = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        x
    }
}

fn validate(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("xs and ys lengths differ".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two knots".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NumericalDomain(
            "non-finite interpolation data".into(),
        ));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "xs must be strictly increasing".into(),
            ));
        }
    }
    let mut out = ys.to_vec();
    for k in 1..out.len() {
        if out[k] < out[k - 1] {
            let drop = out[k - 1] - out[k];
            if drop > MONOTONE_SLACK * out[k - 1].abs().max(1.0) {
                return Err(Error::Monotonicity(format!(
                    "ys decreases by {drop:e} at knot {k}"
                )));
            }
            out[k] = out[k - 1];
        }
    }
    Ok(out)
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
        return m;
    }
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 <= 0.0 || d1 <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
