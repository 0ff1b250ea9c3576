//! Residuals of claimed laws `∂V/∂t + R = 0` over equally spaced snapshots,
//! with the time derivative taken by centred differences.

use crate::calculus::lie_direct;
use crate::error::{Error, Result};
use crate::forms::{Form, VectorField};

/// Floor for normalizations of identically vanishing rates.
pub const NORM_FLOOR: f64 = 1e-12;

/// The value `V`, its claimed rate `R` and a normalization scale at time `t`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub value: Vec<Vec<f64>>,
    pub rate: Vec<Vec<f64>>,
    /// RMS size of the transport term, used to normalize the residual.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    /// Normalized RMS residual.
    pub l2: f64,
    /// Normalized largest pointwise residual.
    pub linf: f64,
}

pub(crate) fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

fn rms_multi(v: &[Vec<f64>]) -> f64 {
    let n: usize = v.iter().map(|c| c.len()).sum();
    (v.iter().flatten().map(|x| x * x).sum::<f64>() / n.max(1) as f64).sqrt()
}

/// Snapshot of the advection law `∂ω/∂t + L_u ω = 0` for a form `ω`.
pub fn advection_snapshot(t: f64, u: &VectorField, form: &Form) -> Result<Snapshot> {
    let lie = lie_direct(u, form)?;
    let rate: Vec<Vec<f64>> = lie.arrays().into_iter().map(|a| a.to_vec()).collect();
    let value: Vec<Vec<f64>> = form.arrays().into_iter().map(|a| a.to_vec()).collect();
    let scale = rms_multi(&rate);
    Ok(Snapshot {
        t,
        value,
        rate,
        scale,
    })
}

/// `r = (V(t+Δ) − V(t−Δ))/(2Δ) + R(t)` at every interior snapshot, reduced to
/// the worst normalized L2 and L∞ norms over the series.
pub fn conservation_residual(series: &[Snapshot], dt_obs: f64) -> Result<ResidualNorms> {
    if series.len() < 3 {
        return Err(Error::IrregularSpacing(format!(
            "need at least three snapshots, got {}",
            series.len()
        )));
    }
    if !(dt_obs > 0.0) {
        return Err(Error::IrregularSpacing(format!("spacing {dt_obs} is not positive")));
    }
    for w in series.windows(2) {
        let gap = w[1].t - w[0].t;
        if (gap - dt_obs).abs() > 1e-9 * dt_obs.max(1.0) {
            return Err(Error::IrregularSpacing(format!(
                "gap {gap} between t = {} and t = {} differs from {dt_obs}",
                w[0].t, w[1].t
            )));
        }
    }
    let mut out = ResidualNorms { l2: 0.0, linf: 0.0 };
    for k in 1..series.len() - 1 {
        let (prev, mid, next) = (&series[k - 1], &series[k], &series[k + 1]);
        let mut sq = 0.0;
        let mut count = 0usize;
        let mut linf: f64 = 0.0;
        for c in 0..mid.value.len() {
            for p in 0..mid.value[c].len() {
                let r = (next.value[c][p] - prev.value[c][p]) / (2.0 * dt_obs) + mid.rate[c][p];
                sq += r * r;
                linf = linf.max(r.abs());
                count += 1;
            }
        }
        let norm = mid.scale.max(NORM_FLOOR);
        out.l2 = out.l2.max((sq / count.max(1) as f64).sqrt() / norm);
        out.linf = out.linf.max(linf / norm);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ScalarField;
    use crate::grid::Grid;
    use crate::invariants::ConsLaw;

    fn manufactured(g: &Grid, t: f64, flux_factor: f64) -> Snapshot {
        // D = cos t sin x, F = (−sin t cos x, 0, 0): ∂D/∂t + ∇·F = 0
        let law = ConsLaw {
            name: "manufactured",
            density: ScalarField::from_fn(g, |x, _, _| t.cos() * x.sin()),
            flux: VectorField::from_fn(g, |x, _, _| [-flux_factor * t.sin() * x.cos(), 0.0, 0.0]),
            source: ScalarField::zeros(g),
        };
        law.snapshot(t)
    }

    fn series(g: &Grid, t0: f64, d: f64, factor: f64) -> Vec<Snapshot> {
        (0..3).map(|k| manufactured(g, t0 + (k as f64 - 1.0) * d, factor)).collect()
    }

    #[test]
    fn constant_density_has_zero_residual() {
        let g = Grid::cubic(8).unwrap();
        let s: Vec<Snapshot> = (0..4)
            .map(|k| {
                ConsLaw {
                    name: "still",
                    density: ScalarField::from_fn(&g, |x, _, _| x.cos()),
                    flux: VectorField::zeros(&g),
                    source: ScalarField::zeros(&g),
                }
                .snapshot(k as f64 * 0.1)
            })
            .collect();
        let r = conservation_residual(&s, 0.1).unwrap();
        assert_eq!(r.l2, 0.0);
        assert_eq!(r.linf, 0.0);
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        let g = Grid::cubic(8).unwrap();
        let r1 = conservation_residual(&series(&g, 0.7, 0.1, 1.0), 0.1).unwrap();
        let r2 = conservation_residual(&series(&g, 0.7, 0.05, 1.0), 0.05).unwrap();
        let ratio = r1.l2 / r2.l2;
        assert!(r1.l2 < 1e-2);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn wrong_flux_is_caught() {
        let g = Grid::cubic(8).unwrap();
        let r = conservation_residual(&series(&g, 0.7, 0.05, 2.0), 0.05).unwrap();
        assert!(r.l2 > 0.3, "{}", r.l2);
    }

    #[test]
    fn spacing_is_checked() {
        let g = Grid::cubic(8).unwrap();
        let mut s = series(&g, 0.7, 0.05, 1.0);
        s[2].t += 0.01;
        assert!(matches!(conservation_residual(&s, 0.05), Err(Error::IrregularSpacing(_))));
        assert!(conservation_residual(&s[..2], 0.05).is_err());
    }
}
