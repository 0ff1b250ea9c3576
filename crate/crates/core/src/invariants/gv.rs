//! Godbillon–Vey helicity of an integrable potential `Ã`.
//!
//! With `B = ∇×Ã` and `η = Ã×B/|Ã|²`, integrability `Ã·∇×Ã = 0` gives
//! `∇×Ã = η×Ã`. The density `ψ = η·∇×η` obeys `∂ψ/∂t + ∇·(uψ + αB) = 0`
//! with `α = [Ã·L_u η + η·L_u Ã]/|Ã|²`, where `(L_u a)_i = u·∇a_i + a_j ∂_i u_j`.

use super::{ConsLaw, Context};
use crate::calculus::integrate_raw;
use crate::dynamics::MhdState;
use crate::error::{Error, Result};
use crate::forms::{cross, dot, OneForm, ScalarField, Triple, VectorField};
use crate::grid::Grid;

/// Default lower bound on `|Ã|`.
pub const GV_FLOOR: f64 = 1e-6;
/// Integrability defect above which a warning is raised.
pub const GV_DEFECT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GodbillonVey {
    pub eta: OneForm,
    pub alpha: ScalarField,
    pub psi: ScalarField,
    /// `∫ψ d³x`.
    pub integral: f64,
    /// `max |Ã·∇×Ã|`.
    pub defect: f64,
    /// `max |∇×Ã − η×Ã|`, equal to `max |Ã·B|/|Ã|`.
    pub integrability_residual: f64,
    /// Set when the defect exceeds [`GV_DEFECT_TOLERANCE`].
    pub warning: Option<String>,
    pub law: ConsLaw,
}

fn lie_one_form(g: &Grid, u: &Triple, grad_u: &[[Vec<f64>; 3]; 3], a: &Triple) -> Triple {
    let n = g.len();
    [0, 1, 2].map(|i| {
        let ga = g.grad(&a[i]);
        (0..n)
            .map(|p| {
                let adv = u[0][p] * ga[0][p] + u[1][p] * ga[1][p] + u[2][p] * ga[2][p];
                let stretch =
                    a[0][p] * grad_u[i][0][p] + a[1][p] * grad_u[i][1][p] + a[2][p] * grad_u[i][2][p];
                adv + stretch
            })
            .collect()
    })
}

/// Evaluate the Godbillon–Vey fields of `state.a_tilde` advected by `state.u`.
/// Fails with [`Error::PotentialBelowFloor`] where `|Ã| < floor`.
pub fn godbillon_vey(state: &MhdState, floor: f64) -> Result<GodbillonVey> {
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("floor must be positive, got {floor}")));
    }
    let g = state.grid();
    let n = g.len();
    let a = state.a_tilde.comps();
    let u = state.u.comps();
    let a2 = dot(a, a);
    if let Some((index, v)) = a2
        .iter()
        .enumerate()
        .map(|(p, v)| (p, v.sqrt()))
        .find(|(_, v)| !(*v >= floor))
    {
        return Err(Error::PotentialBelowFloor {
            index: g.unflat(index),
            value: v,
            floor,
        });
    }
    let b = g.curl(a);
    let ab = dot(a, &b);
    let defect = ab.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let integrability_residual = ab
        .iter()
        .zip(&a2)
        .fold(0.0f64, |m, (x, q)| m.max(x.abs() / q.sqrt()));

    let axb = cross(a, &b);
    let eta: Triple = [0, 1, 2].map(|i| (0..n).map(|p| axb[i][p] / a2[p]).collect());
    let psi = dot(&eta, &g.curl(&eta));

    // grad_u[i][j] = ∂_i u_j
    let grad_u = g.jacobian(u);
    let lie_eta = lie_one_form(g, u, &grad_u, &eta);
    let lie_a = lie_one_form(g, u, &grad_u, a);
    let num1 = dot(a, &lie_eta);
    let num2 = dot(&eta, &lie_a);
    let alpha: Vec<f64> = (0..n).map(|p| (num1[p] + num2[p]) / a2[p]).collect();

    let flux: Triple = [0, 1, 2].map(|i| (0..n).map(|p| u[i][p] * psi[p] + alpha[p] * b[i][p]).collect());
    let integral = integrate_raw(g, &psi);
    let warning = (defect > GV_DEFECT_TOLERANCE).then(|| {
        format!("potential is not integrable: max |Ã·∇×Ã| = {defect:.3e} exceeds {GV_DEFECT_TOLERANCE:e}")
    });

    let psi_field = ScalarField::from_raw(g, psi.clone());
    Ok(GodbillonVey {
        eta: OneForm::from_raw(g, eta),
        alpha: ScalarField::from_raw(g, alpha),
        psi: psi_field.clone(),
        integral,
        defect,
        integrability_residual,
        warning,
        law: ConsLaw {
            name: "godbillon_vey",
            density: psi_field,
            flux: VectorField::from_raw(g, flux),
            source: ScalarField::zeros(g),
        },
    })
}

impl<'a> Context<'a> {
    pub fn godbillon_vey(&self, floor: f64) -> Result<GodbillonVey> {
        godbillon_vey(self.state, floor)
    }
}
