//! γ-law equation of state with an explicit entropy factor,
//!
//! ```text
//! ε(ρ, S) = K ρ^γ exp((S − S0)/cv),   K = p0 / ((γ − 1) ρ0^γ)
//! ```
//!
//! from which `ρT = ε_S`, `h = ε_ρ` and `p = ρ ε_ρ − ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EosParams {
    pub gamma: f64,
    pub rho0: f64,
    pub p0: f64,
    pub cv: f64,
    #[serde(rename = "s0")]
    pub s0: f64,
}

impl Default for EosParams {
    fn default() -> Self {
        Self {
            gamma: 5.0 / 3.0,
            rho0: 1.0,
            p0: 1.0,
            cv: 1.0,
            s0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoPoint {
    pub eps: f64,
    pub p: f64,
    pub t: f64,
    pub h: f64,
}

impl EosParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 1.0
            && self.rho0 > 0.0
            && self.p0 > 0.0
            && self.cv > 0.0
            && self.s0.is_finite()
            && self.gamma.is_finite()
            && self.p0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "equation of state needs gamma > 1 and rho0, p0, cv > 0 (got {self:?})"
            )))
        }
    }

    fn k(&self) -> f64 {
        self.p0 / ((self.gamma - 1.0) * self.rho0.powf(self.gamma))
    }

    /// Internal energy per unit volume.
    #[inline]
    pub fn eps(&self, rho: f64, s: f64) -> f64 {
        self.k() * rho.powf(self.gamma) * ((s - self.s0) / self.cv).exp()
    }

    #[inline]
    pub fn point(&self, rho: f64, s: f64) -> ThermoPoint {
        let eps = self.eps(rho, s);
        ThermoPoint {
            eps,
            p: (self.gamma - 1.0) * eps,
            t: eps / (self.cv * rho),
            h: self.gamma * eps / rho,
        }
    }

    pub fn eval(&self, rho: f64, s: f64) -> Result<ThermoPoint> {
        if !(rho > 0.0) {
            return Err(Error::NonPositiveDensity {
                index: [0; 3],
                value: rho,
            });
        }
        Ok(self.point(rho, s))
    }

    pub fn sound_speed_sq(&self, rho: f64, s: f64) -> f64 {
        self.gamma * self.point(rho, s).p / rho
    }

    /// Density that gives specific enthalpy `h` at entropy `s`.
    pub fn rho_from_enthalpy(&self, h: f64, s: f64) -> f64 {
        // h = γ K ρ^(γ−1) e^{(S−S0)/cv}
        let c = self.gamma * self.k() * ((s - self.s0) / self.cv).exp();
        (h / c).powf(1.0 / (self.gamma - 1.0))
    }

    /// Density that gives pressure `p` at entropy `s`.
    pub fn rho_from_pressure(&self, p: f64, s: f64) -> f64 {
        let c = (self.gamma - 1.0) * self.k() * ((s - self.s0) / self.cv).exp();
        (p / c).powf(1.0 / self.gamma)
    }
}

/// Pointwise thermodynamic fields.
#[derive(Debug, Clone)]
pub struct ThermoFields {
    pub eps: ScalarField,
    pub p: ScalarField,
    pub t: ScalarField,
    pub h: ScalarField,
}

/// Evaluate the closure on whole fields; a non-positive density is reported
/// with its grid location.
pub fn eos_eval(rho: &ScalarField, s: &ScalarField, params: &EosParams) -> Result<ThermoFields> {
    crate::forms::ensure_same(rho.grid(), s.grid())?;
    let g = rho.grid();
    let n = g.len();
    let (mut eps, mut p, mut t, mut h) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for q in 0..n {
        let r = rho.values()[q];
        if !(r > 0.0) {
            return Err(Error::NonPositiveDensity {
                index: g.unflat(q),
                value: r,
            });
        }
        let tp = params.point(r, s.values()[q]);
        eps[q] = tp.eps;
        p[q] = tp.p;
        t[q] = tp.t;
        h[q] = tp.h;
    }
    Ok(ThermoFields {
        eps: ScalarField::from_raw(g, eps),
        p: ScalarField::from_raw(g, p),
        t: ScalarField::from_raw(g, t),
        h: ScalarField::from_raw(g, h),
    })
}

/// Largest violation of `T dS = dh − dp/ρ` over centred probes in the
/// `ρ`, `S` and diagonal directions. Steps are `δρ = delta·ρ` and
/// `δS = delta·cv`; each probe is reported per unit probe parameter and
/// relative to the local enthalpy, so the result is O(delta²).
pub fn first_law_residual(rho: f64, s: f64, params: &EosParams, delta: f64) -> f64 {
    let center = params.point(rho, s);
    let dr = delta * rho;
    let ds = delta * params.cv;
    [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)]
        .iter()
        .map(|&(a, b)| {
            let plus = params.point(rho + a * dr, s + b * ds);
            let minus = params.point(rho - a * dr, s - b * ds);
            let two = 2.0 * delta;
            let d_s = (2.0 * b * ds) / two;
            let d_h = (plus.h - minus.h) / two;
            let d_p = (plus.p - minus.p) / two;
            (center.t * d_s - d_h + d_p / rho).abs() / center.h
        })
        .fold(0.0, f64::max)
}
