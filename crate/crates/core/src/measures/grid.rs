use std::io::Write;

use serde::Serialize;

use super::measure::{laplace_frame, log_integral, LogConcaveMeasure};
use crate::error::{Error, Result};
use crate::numerics::{QuadratureRule, Rule1d};

/// Nodes and Lebesgue quadrature weights along one axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    /// `count` equispaced nodes on `[center − half_width, center + half_width]`
    /// with trapezoid weights.
    pub fn uniform(center: f64, half_width: f64, count: usize) -> Result<Self> {
        if count < 2 || !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "uniform axis needs >= 2 nodes and positive width (got {count}, {half_width})"
            )));
        }
        let h = 2.0 * half_width / (count - 1) as f64;
        let nodes = (0..count)
            .map(|i| center - half_width + i as f64 * h)
            .collect();
        let mut weights = vec![h; count];
        weights[0] = 0.5 * h;
        weights[count - 1] = 0.5 * h;
        Ok(Self { nodes, weights })
    }

    /// Gauss–Hermite nodes shifted to `center`, with weights `wᵢ/φ(zᵢ)` so
    /// that `Σ wᵢ f(xᵢ) ≈ ∫ f dx`.
    pub fn gauss_hermite(center: f64, rule: &Rule1d) -> Self {
        let nodes = rule.nodes.iter().map(|z| center + z).collect();
        let weights = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(z, w)| w * (0.5 * z * z + crate::numerics::HALF_LN_2PI).exp())
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Spacing of a uniform axis (first gap).
    pub fn spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }
}

/// A probability density tabulated on a tensor grid.
///
/// Values are stored row-major (last axis fastest). `mass` holds the
/// normalized quadrature masses `density × Π axis weights`, summing to one.
#[derive(Debug, Clone, Serialize)]
pub struct GridDensity {
    axes: Vec<Axis>,
    log_density: Vec<f64>,
    density: Vec<f64>,
    mass: Vec<f64>,
    /// Mass before renormalization.
    raw_mass: f64,
}

impl GridDensity {
    /// Builds from (possibly unnormalized) log-density values and
    /// renormalizes to unit mass.
    pub fn from_log_density(axes: Vec<Axis>, log_density: Vec<f64>) -> Result<Self> {
        let expected: usize = axes.iter().map(Axis::len).product();
        if axes.is_empty() || expected != log_density.len() {
            return Err(Error::Dimension(format!(
                "grid has {expected} nodes but {} values were given",
                log_density.len()
            )));
        }
        if log_density
            .iter()
            .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(Error::NumericalDomain("invalid log-density value".into()));
        }
        let mut grid = Self {
            axes,
            log_density,
            density: Vec::new(),
            mass: Vec::new(),
            raw_mass: 0.0,
        };
        let cell = grid.cell_weights();
        let raw: f64 = grid
            .log_density
            .iter()
            .zip(&cell)
            .map(|(l, w)| l.exp() * w)
            .sum();
        if !(raw > 1e-300) || !raw.is_finite() {
            return Err(Error::Underflow(format!("grid mass {raw:e}")));
        }
        let log_raw = raw.ln();
        for l in grid.log_density.iter_mut() {
            *l -= log_raw;
        }
        grid.density = grid.log_density.iter().map(|l| l.exp()).collect();
        grid.mass = grid.density.iter().zip(&cell).map(|(d, w)| d * w).collect();
        let total: f64 = grid.mass.iter().sum();
        for m in grid.mass.iter_mut() {
            *m /= total;
        }
        grid.raw_mass = raw;
        Ok(grid)
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    fn cell_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.axes.iter().map(Axis::len).product());
        for_each_index(&self.shape(), |idx| {
            out.push(
                idx.iter()
                    .zip(&self.axes)
                    .map(|(&i, a)| a.weights[i])
                    .product(),
            );
        });
        out
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut x = vec![0.0; self.dimension()];
        for d in (0..self.dimension()).rev() {
            let n = self.axes[d].len();
            x[d] = self.axes[d].nodes[rem % n];
            rem /= n;
        }
        x
    }

    /// Sums out every axis not listed in `kept` (order preserved).
    pub fn marginal(&self, kept: &[usize]) -> Result<Self> {
        validate_kept(self.dimension(), kept)?;
        let shape = self.shape();
        let kept_shape: Vec<usize> = kept.iter().map(|&k| shape[k]).collect();
        let kept_len: usize = kept_shape.iter().product();
        let mut acc = vec![0.0; kept_len];
        let mut flat = 0usize;
        for_each_index(&shape, |idx| {
            let mut target = 0usize;
            for (&k, &n) in kept.iter().zip(&kept_shape) {
                target = target * n + idx[k];
            }
            acc[target] += self.mass[flat];
            flat += 1;
        });
        let axes: Vec<Axis> = kept.iter().map(|&k| self.axes[k].clone()).collect();
        let mut log_density = Vec::with_capacity(kept_len);
        let mut i = 0usize;
        for_each_index(&kept_shape, |idx| {
            let w: f64 = idx.iter().zip(&axes).map(|(&j, a)| a.weights[j]).product();
            log_density.push((acc[i] / w).ln());
            i += 1;
        });
        Self::from_log_density(axes, log_density)
    }

    /// Largest violation of the discrete 1-log-concavity surrogate.
    ///
    /// With `W = −log ρ`, `D²W ≥ Id` implies
    /// `W(x+h) + W(x−h) − 2W(x) ≥ |h|²` for every step `h`. Steps along each
    /// axis and, in 2D and above, along the two diagonals of every axis pair
    /// are checked on uniform axes. Nodes whose density underflows are skipped.
    pub fn log_concavity_violation(&self) -> f64 {
        let shape = self.shape();
        let dim = self.dimension();
        let mut steps: Vec<Vec<isize>> = Vec::new();
        for d in 0..dim {
            let mut s = vec![0isize; dim];
            s[d] = 1;
            steps.push(s);
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                let mut s = vec![0isize; dim];
                s[a] = 1;
                s[b] = 1;
                steps.push(s.clone());
                s[b] = -1;
                steps.push(s);
            }
        }
        let floor = (1e-250f64).ln();
        let mut worst = 0.0f64;
        let strides = strides(&shape);
        for_each_index(&shape, |idx| {
            let centre = flat_of(idx, &strides);
            let wc = -self.log_density[centre];
            if -wc < floor {
                return;
            }
            'step: for s in &steps {
                let mut plus = 0usize;
                let mut minus = 0usize;
                let mut hsq = 0.0;
                for d in 0..dim {
                    let ip = idx[d] as isize + s[d];
                    let im = idx[d] as isize - s[d];
                    if ip < 0 || im < 0 || ip >= shape[d] as isize || im >= shape[d] as isize {
                        continue 'step;
                    }
                    plus += ip as usize * strides[d];
                    minus += im as usize * strides[d];
                    if s[d] != 0 {
                        let h = self.axes[d].nodes[ip as usize] - self.axes[d].nodes[idx[d]];
                        let h2 = self.axes[d].nodes[idx[d]] - self.axes[d].nodes[im as usize];
                        if (h - h2).abs() > 1e-9 * h.abs() {
                            continue 'step;
                        }
                        hsq += h * h;
                    }
                }
                let (lp, lm) = (self.log_density[plus], self.log_density[minus]);
                if lp < floor || lm < floor {
                    continue;
                }
                let second = -lp - lm - 2.0 * wc;
                let violation = hsq - second;
                // relative slack for round-off in large log values
                let slack = 1e-12 * (lp.abs() + lm.abs() + wc.abs());
                worst = worst.max(violation - slack);
            }
        });
        worst.max(0.0)
    }

    /// CSV with header `x1,…,xk,density`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.dimension())
            .map(|d| format!("x{d}"))
            .chain(std::iter::once("density".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for flat in 0..self.len() {
            let x = self.point(flat);
            let row: Vec<String> = x
                .iter()
                .map(|v| format!("{v:.17e}"))
                .chain(std::iter::once(format!("{:.17e}", self.density[flat])))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

fn flat_of(idx: &[usize], strides: &[usize]) -> usize {
    idx.iter().zip(strides).map(|(i, s)| i * s).sum()
}

/// Visits every multi-index of `shape` in row-major order.
pub(crate) fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut d = shape.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn validate_kept(dim: usize, kept: &[usize]) -> Result<()> {
    if dim < 2 {
        return Err(Error::Dimension("marginal needs dimension >= 2".into()));
    }
    if kept.is_empty() || kept.len() >= dim {
        return Err(Error::Dimension(format!(
            "marginal must keep between 1 and {} coordinates",
            dim - 1
        )));
    }
    for (i, &k) in kept.iter().enumerate() {
        if k >= dim || kept[..i].contains(&k) {
            return Err(Error::Dimension(format!("invalid kept coordinate {k}")));
        }
    }
    Ok(())
}

/// Default uniform axes for the kept coordinates, centred at the mode.
pub fn default_axes(measure: &LogConcaveMeasure, kept: &[usize]) -> Result<Vec<Axis>> {
    let s = measure.settings();
    let count = s.grid_nodes_for(kept.len());
    kept.iter()
        .map(|&k| Axis::uniform(measure.mode()[k], s.window, count))
        .collect()
}

/// Density of the marginal `(π_kept)_♯μ` on the default grid.
pub fn marginal(measure: &LogConcaveMeasure, kept: &[usize]) -> Result<GridDensity> {
    validate_kept(measure.dimension(), kept)?;
    let axes = default_axes(measure, kept)?;
    marginal_on(measure, kept, axes)
}

/// Density of the marginal `(π_kept)_♯μ` on caller-supplied axes.
///
/// Each slice integral `∫ e^{−V(x_kept, z)} dz` is evaluated with
/// Gauss–Hermite quadrature in the Laplace frame of the slice.
pub fn marginal_on(
    measure: &LogConcaveMeasure,
    kept: &[usize],
    axes: Vec<Axis>,
) -> Result<GridDensity> {
    let n = measure.dimension();
    validate_kept(n, kept)?;
    if axes.len() != kept.len() {
        return Err(Error::Dimension(
            "one axis per kept coordinate required".into(),
        ));
    }
    let rest: Vec<usize> = (0..n).filter(|d| !kept.contains(d)).collect();
    let m = rest.len();
    let quad = QuadratureRule::gauss_hermite(measure.settings().quadrature_order_for(m), m)?;
    let pot = measure.potential();
    let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
    let mut log_density = Vec::with_capacity(shape.iter().product());
    let mut x = vec![0.0; n];
    let mut start: Vec<f64> = rest.iter().map(|&d| measure.mode()[d]).collect();
    let mut err = None;
    for_each_index(&shape, |idx| {
        if err.is_some() {
            return;
        }
        for (j, &k) in kept.iter().enumerate() {
            x[k] = axes[j].nodes[idx[j]];
        }
        let base = x.clone();
        let embed = |z: &[f64]| {
            let mut full = base.clone();
            for (j, &d) in rest.iter().enumerate() {
                full[d] = z[j];
            }
            full
        };
        let f = |z: &[f64]| pot.eval(&embed(z));
        let g = |z: &[f64]| {
            let full = pot.grad(&embed(z));
            nalgebra::DVector::from_iterator(m, rest.iter().map(|&d| full[d]))
        };
        let h = |z: &[f64]| {
            let full = pot.hess(&embed(z));
            nalgebra::DMatrix::from_fn(m, m, |a, b| full[(rest[a], rest[b])])
        };
        let value = laplace_frame(f, g, h, &start).and_then(|frame| {
            start.clone_from(&frame.mode);
            log_integral(f, &frame, &quad)
        });
        match value {
            Ok(v) => log_density.push(v - measure.log_z()),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    GridDensity::from_log_density(axes, log_density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::potential::{Factor, Family, Potential};
    use crate::measures::MeasureSettings;
    use crate::numerics::HALF_LN_2PI;

    fn product(factors: Vec<Factor>) -> LogConcaveMeasure {
        LogConcaveMeasure::new(
            Potential::new(Family::Product { factors }).unwrap(),
            MeasureSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn marginal_of_standard_product_is_standard() {
        let mu = product(vec![Factor::standard(), Factor::standard()]);
        let g = marginal(&mu, &[0]).unwrap();
        assert_eq!(g.len(), 257);
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        for (i, d) in g.density().iter().enumerate() {
            let x = g.axes()[0].nodes[i];
            let exact = (-0.5 * x * x - HALF_LN_2PI).exp();
            assert!((d - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn marginal_of_shifted_gaussian_is_centred() {
        let mu = LogConcaveMeasure::with_defaults(
            Potential::new(Family::GaussianShifted {
                shift: vec![1.0, 0.0],
            })
            .unwrap(),
        )
        .unwrap();
        let g = marginal(&mu, &[1]).unwrap();
        for (i, d) in g.density().iter().enumerate() {
            let x = g.axes()[0].nodes[i];
            assert!((d - (-0.5 * x * x - HALF_LN_2PI).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_errors() {
        let one = product(vec![Factor::standard()]);
        assert!(matches!(marginal(&one, &[0]), Err(Error::Dimension(_))));
        let two = product(vec![Factor::standard(), Factor::standard()]);
        assert!(matches!(marginal(&two, &[0, 1]), Err(Error::Dimension(_))));
        assert!(matches!(marginal(&two, &[2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn csv_header() {
        let two = product(vec![Factor::standard(), Factor::standard()]);
        let g = marginal(&two, &[1]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,density\n"));
        assert_eq!(text.lines().count(), 258);
    }
}
