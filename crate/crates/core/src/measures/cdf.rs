//! Distribution functions of one-dimensional log-concave measures.

use super::measure::LogConcaveMeasure;
use crate::error::{Error, Result};
use crate::numerics::{normal_cdf, normal_sf, GaussLegendre};

/// Cell width of the cumulative table.
const CELL: f64 = 1.0 / 32.0;

/// Cumulative table of a 1D measure on a window around its mode, with both
/// lower (`F`) and upper (`1 − F`) accumulations so either tail keeps full
/// relative precision.
#[derive(Debug, Clone)]
pub struct Cdf1d {
    measure: LogConcaveMeasure,
    lo: f64,
    edges: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// `(mean, σ)` when the measure is Gaussian; enables analytic tails.
    gaussian: Option<(f64, f64)>,
    log_total: f64,
}

impl Cdf1d {
    pub fn new(measure: &LogConcaveMeasure) -> Result<Self> {
        if measure.dimension() != 1 {
            return Err(Error::Dimension(format!(
                "cdf_1d needs a 1D measure, got dimension {}",
                measure.dimension()
            )));
        }
        let mode = measure.mode()[0];
        let curvature = measure.potential().hess(&[mode])[(0, 0)];
        let sd_hint = if curvature > 0.0 {
            1.0 / curvature.sqrt()
        } else {
            1.0
        };
        let half = 2.0 * measure.settings().window * sd_hint.max(1.0);
        let cells = (2.0 * half / CELL).ceil() as usize;
        let lo = mode - half;
        let edges: Vec<f64> = (0..=cells).map(|k| lo + k as f64 * CELL).collect();
        let gaussian =
            if measure.potential().is_gaussian() && measure.potential().rotation().is_none() {
                let f = &measure.potential().factors()[0];
                f.gaussian_params()
                    .map(|(m, s)| (m + measure.potential().offset()[0], s))
            } else {
                None
            };
        let gl = GaussLegendre::ten();
        let masses: Vec<f64> = edges
            .windows(2)
            .map(|w| gl.integrate(w[0], w[1], |x| measure.density(&[x])))
            .collect();
        if masses.iter().any(|m| !m.is_finite()) {
            return Err(Error::NumericalDomain(
                "non-finite density in CDF table".into(),
            ));
        }
        let hi = *edges.last().expect("non-empty edges");
        let (left, right) = match gaussian {
            Some((m, s)) => (normal_cdf(s * (lo - m)), normal_sf(s * (hi - m))),
            None => (0.0, 0.0),
        };
        let mut lower = Vec::with_capacity(edges.len());
        let mut acc = left;
        lower.push(acc);
        for m in &masses {
            acc += m;
            lower.push(acc);
        }
        let total = acc + right;
        let mut upper = vec![0.0; edges.len()];
        let mut acc = right;
        upper[cells] = acc;
        for k in (0..cells).rev() {
            acc += masses[k];
            upper[k] = acc;
        }
        for v in lower.iter_mut().chain(upper.iter_mut()) {
            *v /= total;
        }
        Ok(Self {
            measure: measure.clone(),
            lo,
            edges,
            lower,
            upper,
            gaussian,
            log_total: total.ln(),
        })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.lo, *self.edges.last().unwrap())
    }

    pub fn measure(&self) -> &LogConcaveMeasure {
        &self.measure
    }

    /// Normalized density consistent with the table.
    pub fn density(&self, x: f64) -> f64 {
        (self.measure.log_density(&[x]) - self.log_total).exp()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        self.measure.log_density(&[x]) - self.log_total
    }

    fn cell(&self, x: f64) -> usize {
        (((x - self.lo) / CELL).floor() as usize).min(self.edges.len() - 2)
    }

    fn partial(&self, a: f64, b: f64) -> f64 {
        GaussLegendre::ten().integrate(a, b, |x| self.density(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.window();
        if x <= lo {
            return match self.gaussian {
                Some((m, s)) => normal_cdf(s * (x - m)) / self.log_total.exp(),
                None => 0.0,
            };
        }
        if x >= hi {
            return 1.0 - self.sf(x);
        }
        let k = self.cell(x);
        (self.lower[k] + self.partial(self.edges[k], x)).min(1.0)
    }

    pub fn sf(&self, x: f64) -> f64 {
        let (lo, hi) = self.window();
        if x >= hi {
            return match self.gaussian {
                Some((m, s)) => normal_sf(s * (x - m)) / self.log_total.exp(),
                None => 0.0,
            };
        }
        if x <= lo {
            return 1.0 - self.cdf(x);
        }
        let k = self.cell(x);
        (self.upper[k + 1] + self.partial(x, self.edges[k + 1])).min(1.0)
    }

    /// Solves `F(y) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= self.lower[0] {
            return match self.gaussian {
                Some((_, s)) if p > 0.0 => {
                    let (lo, _) = self.window();
                    solve_increasing(|y| self.cdf(y) - p, |y| self.density(y), lo - 40.0 / s, lo)
                }
                _ => self.lo,
            };
        }
        if p >= *self.lower.last().unwrap() {
            return self.quantile_upper((1.0 - p).max(0.0));
        }
        let k = self.lower.partition_point(|&v| v <= p) - 1;
        solve_increasing(
            |y| self.cdf(y) - p,
            |y| self.density(y),
            self.edges[k],
            self.edges[k + 1],
        )
    }

    /// Solves `1 − F(y) = q`; accurate for tiny `q`.
    pub fn quantile_upper(&self, q: f64) -> f64 {
        let (_, hi) = self.window();
        if q <= *self.upper.last().unwrap() {
            return match self.gaussian {
                Some((_, s)) if q > 0.0 => {
                    solve_increasing(|y| q - self.sf(y), |y| self.density(y), hi, hi + 40.0 / s)
                }
                _ => hi,
            };
        }
        if q >= self.upper[0] {
            return self.quantile((1.0 - q).max(0.0));
        }
        // upper is nonincreasing; find k with upper[k] > q >= upper[k+1]
        let k = self.upper.partition_point(|&v| v > q) - 1;
        let k = k.min(self.edges.len() - 2);
        solve_increasing(
            |y| q - self.sf(y),
            |y| self.density(y),
            self.edges[k],
            self.edges[k + 1],
        )
    }

    /// Cells whose mass vanishes while the CDF is strictly inside (0, 1).
    pub(crate) fn interior_gap(&self) -> Option<(f64, f64)> {
        for k in 0..self.edges.len() - 1 {
            let mass = self.lower[k + 1] - self.lower[k];
            if mass <= 0.0 && self.lower[k] > 1e-12 && self.upper[k + 1] > 1e-12 {
                return Some((self.edges[k], self.edges[k + 1]));
            }
        }
        None
    }
}

/// Root of an increasing function on `[a, b]` by safeguarded Newton.
pub(crate) fn solve_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
) -> f64 {
    let fa = f(a);
    let fb = f(b);
    if fa >= 0.0 {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    let mut x = a - fa * (b - a) / (fb - fa);
    if !(x > a && x < b) {
        x = 0.5 * (a + b);
    }
    for _ in 0..100 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            b = x;
        } else {
            a = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300)
            || b - a <= 4.0 * f64::EPSILON * x.abs().max(1e-300)
        {
            return next;
        }
        x = next;
    }
    x
}

/// `F_μ(x)` for a 1D measure.
pub fn cdf_1d(measure: &LogConcaveMeasure, x: f64) -> Result<f64> {
    Ok(Cdf1d::new(measure)?.cdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::potential::{Family, Potential};

    fn gaussian(sigma: f64) -> LogConcaveMeasure {
        LogConcaveMeasure::with_defaults(
            Potential::new(Family::GaussianScaled {
                dimension: 1,
                sigma,
            })
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_points() {
        assert!((cdf_1d(&gaussian(1.0), 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((cdf_1d(&gaussian(2.0), 0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn standard_normal_quantile_point() {
        // erf-based oracle: Φ(1.959964) = 0.97500002...
        let v = cdf_1d(&gaussian(1.0), 1.959964).unwrap();
        assert!((v - normal_cdf(1.959964)).abs() < 1e-14);
        assert!((v - 0.975).abs() < 1e-7);
    }

    #[test]
    fn monotone_with_limits() {
        let table = Cdf1d::new(&gaussian(2.0)).unwrap();
        let mut prev = 0.0;
        for k in 0..=800 {
            let x = -20.0 + 0.05 * k as f64;
            let f = table.cdf(x);
            assert!(f >= prev - 1e-16 && (0.0..=1.0).contains(&f));
            prev = f;
        }
        assert!(table.cdf(-1e3) == 0.0 && (table.cdf(1e3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles_invert_in_both_tails() {
        let table = Cdf1d::new(&gaussian(1.0)).unwrap();
        for x in [-12.0, -7.5, -1.0, 0.0, 0.3, 4.0, 9.0, 14.0] {
            let y = if x <= 0.0 {
                table.quantile(normal_cdf(x))
            } else {
                table.quantile_upper(normal_sf(x))
            };
            assert!((y - x).abs() < 1e-11 * x.abs().max(1.0), "{x} -> {y}");
        }
    }
}
