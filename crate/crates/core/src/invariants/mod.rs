//! Invariants and conservation laws of ideal gas dynamics and MHD as
//! diagnostics over a single state, plus residual norms over time series.
//!
//! Every law is carried as a [`ConsLaw`] `∂D/∂t + ∇·F = Q`. Diagnostics use
//! undealiased spectral derivatives.

mod gv;
mod laws;
mod residual;
mod scalars;
mod topology;

pub use gv::{godbillon_vey, GodbillonVey, GV_DEFECT_TOLERANCE, GV_FLOOR};
pub use laws::{
    cross_helicity, fluid_helicity, magnetic_helicity, nonlocal_cross_helicity,
    nonlocal_helicity, MagneticHelicity, NonlocalHelicity,
};
pub use residual::{
    advection_snapshot, conservation_residual, ResidualNorms, Snapshot, NORM_FLOOR,
};
pub use scalars::{
    clebsch_velocity, ertel, ertel_mhd, hollmann, magnetic_scalar, ClebschCheck, ErtelMhd,
};
pub use topology::{
    generalized_integral, topological_charge, topological_charge_preset, ChargePreset,
    IntegralKind, Monomial, PhiSpec, Subbox,
};

use crate::calculus::integrate_raw;
use crate::dynamics::MhdState;
use crate::error::Result;
use crate::forms::{cross, dot, ScalarField, Triple, VectorField};
use crate::grid::C64;

/// `∂D/∂t + ∇·F = Q`.
#[derive(Debug, Clone)]
pub struct ConsLaw {
    /// Short name of the law (also used for output columns).
    pub name: &'static str,
    pub density: ScalarField,
    pub flux: VectorField,
    pub source: ScalarField,
}

impl ConsLaw {
    pub fn integral(&self) -> f64 {
        integrate_raw(self.density.grid(), self.density.values())
    }

    pub fn flux_divergence(&self) -> Vec<f64> {
        self.flux.grid().div(self.flux.comps())
    }

    /// Snapshot for residual evaluation: value `D`, rate `∇·F − Q`, scale `‖∇·F‖`.
    pub fn snapshot(&self, t: f64) -> Snapshot {
        let div = self.flux_divergence();
        let scale = residual::rms(&div);
        let rate = div.iter().zip(self.source.values()).map(|(d, q)| d - q).collect();
        Snapshot {
            t,
            value: vec![self.density.values().to_vec()],
            rate: vec![rate],
            scale,
        }
    }
}

/// One row of named integrals and residual norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub integrals: Vec<(String, f64)>,
    pub residuals: Vec<(String, f64)>,
}

impl DiagnosticRecord {
    pub fn integral(&self, name: &str) -> Option<f64> {
        self.integrals.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn is_finite(&self) -> bool {
        self.integrals.iter().chain(&self.residuals).all(|(_, v)| v.is_finite())
    }
}

/// Fields shared by most diagnostics, computed once per state.
pub struct Context<'a> {
    pub state: &'a MhdState,
    pub temperature: Vec<f64>,
    pub enthalpy: Vec<f64>,
    pub omega: Triple,
    pub grad_s: Triple,
    pub grad_phi: Triple,
    pub grad_r: Triple,
    pub grad_lambda: Triple,
    pub grad_mu: Triple,
    pub div_b: Vec<f64>,
    pub curl_gamma: Triple,
    /// Magnetically induced velocity `−[(∇×Γ)×B + Γ(∇·B)]/ρ`.
    pub u_m: Triple,
}

impl<'a> Context<'a> {
    pub fn new(state: &'a MhdState) -> Result<Self> {
        let g = state.grid();
        let th = crate::thermo::eos_eval(&state.rho, &state.s, &state.physics.eos)?;
        let u = state.u.comps();
        let b = state.b.comps();
        let gm = state.gamma_form.comps();
        let inputs: Vec<&[f64]> = vec![
            &u[0],
            &u[1],
            &u[2],
            state.s.values(),
            state.phi.values(),
            state.r.values(),
            state.lambda.values(),
            state.mu.values(),
            &b[0],
            &b[1],
            &b[2],
            &gm[0],
            &gm[1],
            &gm[2],
        ];
        let h = g.forward_many(&inputs);
        let mut spectra: Vec<Vec<C64>> = Vec::with_capacity(22);
        spectra.extend(g.spectral_curl([&h[0], &h[1], &h[2]]));
        for f in &h[3..8] {
            spectra.extend(g.spectral_grad(f));
        }
        spectra.push(g.spectral_div([&h[8], &h[9], &h[10]]));
        spectra.extend(g.spectral_curl([&h[11], &h[12], &h[13]]));
        let refs: Vec<&[C64]> = spectra.iter().map(|s| s.as_slice()).collect();
        let mut it = g.inverse_many(&refs).into_iter();
        let mut next3 = || -> Triple { [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] };
        let omega = next3();
        let grad_s = next3();
        let grad_phi = next3();
        let grad_r = next3();
        let grad_lambda = next3();
        let grad_mu = next3();
        let mut rest = it;
        let div_b = rest.next().unwrap();
        let curl_gamma = [rest.next().unwrap(), rest.next().unwrap(), rest.next().unwrap()];

        let rho = state.rho.values();
        let cgb = cross(&curl_gamma, b);
        let u_m = [0, 1, 2].map(|i| {
            (0..g.len())
                .map(|p| -(cgb[i][p] + gm[i][p] * div_b[p]) / rho[p])
                .collect()
        });

        Ok(Self {
            state,
            temperature: th.t.into_inner(),
            enthalpy: th.h.into_inner(),
            omega,
            grad_s,
            grad_phi,
            grad_r,
            grad_lambda,
            grad_mu,
            div_b,
            curl_gamma,
            u_m,
        })
    }

    pub(crate) fn scalar(&self, v: Vec<f64>) -> ScalarField {
        ScalarField::from_raw(self.state.grid(), v)
    }

    pub(crate) fn vector(&self, v: Triple) -> VectorField {
        VectorField::from_raw(self.state.grid(), v)
    }

    /// `h − ½|u|²`.
    pub(crate) fn bernoulli_minus(&self) -> Vec<f64> {
        let u2 = dot(self.state.u.comps(), self.state.u.comps());
        self.enthalpy.iter().zip(&u2).map(|(h, q)| h - 0.5 * q).collect()
    }

    /// Whether the state carries a magnetic field.
    pub fn is_magnetized(&self) -> bool {
        self.state.b.max_norm() > 0.0
    }
}

/// `∫ (½ρu² + ε + B²/2μ0) d³x`.
pub fn total_energy(state: &MhdState) -> f64 {
    let eos = &state.physics.eos;
    let (rho, s) = (state.rho.values(), state.s.values());
    let u2 = dot(state.u.comps(), state.u.comps());
    let b2 = dot(state.b.comps(), state.b.comps());
    let density: Vec<f64> = (0..rho.len())
        .map(|p| 0.5 * rho[p] * u2[p] + eos.eps(rho[p], s[p]) + 0.5 * b2[p] / state.physics.mu0)
        .collect();
    integrate_raw(state.grid(), &density)
}

pub fn total_mass(state: &MhdState) -> f64 {
    integrate_raw(state.grid(), state.rho.values())
}
