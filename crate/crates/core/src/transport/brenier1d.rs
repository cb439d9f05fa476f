use super::map::{Derivative, MapRepr, Monotone1d, Provenance, TransportMap};
use crate::error::{Error, Result};
use crate::measures::{Cdf1d, Family, LogConcaveMeasure, Potential};
use crate::numerics::{normal_cdf, normal_sf, MonotoneInterp};

/// Knot span of the 1D map; covers the Gauss–Hermite nodes of every order
/// used in the crate with room to spare.
pub const KNOT_SPAN: f64 = 16.0;
/// Knot count of the 1D map (spacing ≈ 0.0078).
pub const KNOT_COUNT: usize = 4097;

/// The monotone map `T = F_μ^{-1} ∘ F_γ` from `γ₁` to a 1D measure.
///
/// Knot values come from quantiles of `μ` evaluated in whichever tail keeps
/// full relative precision; knot slopes and `T′` use the change of variables
/// `ρ_γ(x) = ρ_μ(T(x))·T′(x)`.
pub fn brenier_1d(mu: &LogConcaveMeasure) -> Result<TransportMap> {
    Ok(TransportMap::new(
        1,
        MapRepr::Monotone1D(monotone_map(mu)?),
        Provenance::Exact1d,
    ))
}

pub(crate) fn monotone_map(mu: &LogConcaveMeasure) -> Result<Monotone1d> {
    if mu.dimension() != 1 {
        return Err(Error::Dimension(format!(
            "brenier_1d needs a 1D measure, got dimension {}",
            mu.dimension()
        )));
    }
    let table = Cdf1d::new(mu)?;
    if let Some((a, b)) = table.interior_gap() {
        return Err(Error::DegenerateDensity(format!(
            "density vanishes on [{a}, {b}] inside the window"
        )));
    }
    let h = 2.0 * KNOT_SPAN / (KNOT_COUNT - 1) as f64;
    let xs: Vec<f64> = (0..KNOT_COUNT).map(|i| -KNOT_SPAN + i as f64 * h).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x <= 0.0 {
                table.quantile(normal_cdf(x))
            } else {
                table.quantile_upper(normal_sf(x))
            }
        })
        .collect();
    // enforce monotonicity against round-off in far tails
    let mut ys_mono = ys.clone();
    for i in 1..ys_mono.len() {
        if ys_mono[i] < ys_mono[i - 1] {
            ys_mono[i] = ys_mono[i - 1];
        }
    }
    let log_shift =
        -(mu.log_density(&[ys_mono[KNOT_COUNT / 2]]) - table.log_density(ys_mono[KNOT_COUNT / 2]));
    let derivative = Derivative::ChangeOfVariables {
        target: mu.clone(),
        log_shift,
    };
    let slopes: Vec<f64> = xs
        .iter()
        .zip(&ys_mono)
        .map(|(&x, &y)| {
            let l = crate::numerics::gaussian_log_density(&[x]) - table.log_density(y);
            l.exp()
        })
        .collect();
    let interp = MonotoneInterp::with_slopes(&xs, &ys_mono, &slopes)?;
    Ok(Monotone1d { interp, derivative })
}

/// Exact map to a (possibly rotated and translated) product measure,
/// assembled from the 1D maps of its factors.
pub fn exact_product_map(mu: &LogConcaveMeasure) -> Result<TransportMap> {
    let pot = mu.potential();
    let n = pot.dimension();
    if n == 1 {
        return brenier_1d(mu);
    }
    let factors = pot
        .factors()
        .iter()
        .map(|f| {
            let m = LogConcaveMeasure::new(
                Potential::new(Family::Product {
                    factors: vec![f.clone()],
                })?,
                *mu.settings(),
            )?;
            monotone_map(&m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransportMap::new(
        n,
        MapRepr::Product {
            rotation: pot.rotation().cloned(),
            offset: pot.offset().to_vec(),
            factors,
        },
        Provenance::Exact1d,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Factor;

    fn measure(family: Family) -> LogConcaveMeasure {
        LogConcaveMeasure::with_defaults(Potential::new(family).unwrap()).unwrap()
    }

    #[test]
    fn identity_for_standard_gaussian() {
        let t = brenier_1d(&measure(Family::GaussianScaled {
            dimension: 1,
            sigma: 1.0,
        }))
        .unwrap();
        for x in [-9.0, -2.5, 0.0, 0.3, 4.0, 12.0] {
            let (y, h) = t.eval_with_hessian(&[x]);
            assert!((y[0] - x).abs() < 1e-11, "{x} {}", y[0]);
            assert!((h[(0, 0)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scaling_and_translation() {
        let t = brenier_1d(&measure(Family::GaussianScaled {
            dimension: 1,
            sigma: 2.0,
        }))
        .unwrap();
        for x in [-6.0, -1.0, 0.5, 7.0] {
            assert!((t.eval(&[x])[0] - x / 2.0).abs() < 1e-11);
            assert!((t.hessian(&[x])[(0, 0)] - 0.5).abs() < 1e-10);
        }
        let t = brenier_1d(&measure(Family::GaussianShifted { shift: vec![0.7] })).unwrap();
        for x in [-6.0, -1.0, 0.5, 7.0] {
            assert!((t.eval(&[x])[0] - x - 0.7).abs() < 1e-11);
        }
    }

    #[test]
    fn quartic_derivative_matches_interpolant() {
        let t = brenier_1d(&measure(Family::Quartic {
            dimension: 1,
            a: 1.0,
            b: 0.0,
        }))
        .unwrap();
        let MapRepr::Monotone1D(m) = t.repr() else {
            panic!()
        };
        for x in [-3.0, -0.7, 0.0, 1.1, 2.9] {
            let cv = m.derivative(x);
            let fd = (m.eval(x + 1e-5) - m.eval(x - 1e-5)) / 2e-5;
            assert!((cv - fd).abs() < 1e-7, "{x}: {cv} vs {fd}");
            assert!(cv > 0.0 && cv <= 1.0);
        }
    }

    #[test]
    fn rejects_higher_dimension() {
        let mu = measure(Family::GaussianScaled {
            dimension: 2,
            sigma: 1.0,
        });
        assert!(matches!(brenier_1d(&mu), Err(Error::Dimension(_))));
    }

    #[test]
    fn product_map_of_scaled_factors() {
        let mu = measure(Family::Product {
            factors: vec![
                Factor::standard(),
                Factor::Gaussian {
                    sigma: 2.0,
                    shift: 0.0,
                },
            ],
        });
        let t = exact_product_map(&mu).unwrap();
        let (y, h) = t.eval_with_hessian(&[0.4, -1.0]);
        assert!((y[0] - 0.4).abs() < 1e-11 && (y[1] + 0.5).abs() < 1e-11);
        assert!((h[(0, 0)] - 1.0).abs() < 1e-10 && (h[(1, 1)] - 0.5).abs() < 1e-10);
        assert!(h[(0, 1)].abs() < 1e-15);
    }
}
