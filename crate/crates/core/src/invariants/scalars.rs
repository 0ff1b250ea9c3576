//! Advected scalar invariants and the Clebsch velocity reconstruction.

use super::Context;
use crate::forms::{cross, dot, ScalarField, Triple, VectorField};

fn l2(v: &Triple) -> f64 {
    let n = v[0].len().max(1) as f64;
    (dot(v, v).iter().sum::<f64>() / n).sqrt()
}

fn over_rho(ctx: &Context, v: Vec<f64>) -> ScalarField {
    let rho = ctx.state.rho.values();
    ctx.scalar(v.iter().zip(rho).map(|(x, r)| x / r).collect())
}

/// Ertel invariant `ω·∇S/ρ`.
pub fn ertel(ctx: &Context) -> ScalarField {
    over_rho(ctx, dot(&ctx.omega, &ctx.grad_s))
}

#[derive(Debug, Clone)]
pub struct ErtelMhd {
    /// `∇×(u − u_M)·∇S/ρ`.
    pub value: ScalarField,
    pub u_m: VectorField,
}

/// Ertel invariant of the non-magnetic part of the velocity.
pub fn ertel_mhd(ctx: &Context) -> ErtelMhd {
    let g = ctx.state.grid();
    let u = ctx.state.u.comps();
    let w: Triple = [0, 1, 2].map(|i| u[i].iter().zip(&ctx.u_m[i]).map(|(a, b)| a - b).collect());
    let curl = g.curl(&w);
    ErtelMhd {
        value: over_rho(ctx, dot(&curl, &ctx.grad_s)),
        u_m: ctx.vector(ctx.u_m.clone()),
    }
}

/// Hollmann invariant `(u − ∇φ)·(∇S × ∇I)/ρ` with `I` the Ertel invariant.
/// In the magnetized variant `u` is replaced by `u − u_M` and `I` by its
/// magnetic counterpart.
pub fn hollmann(ctx: &Context, magnetized: bool) -> ScalarField {
    let g = ctx.state.grid();
    let u = ctx.state.u.comps();
    let (ie, base): (ScalarField, Triple) = if magnetized {
        let w = [0, 1, 2].map(|i| {
            (0..g.len())
                .map(|p| u[i][p] - ctx.u_m[i][p] - ctx.grad_phi[i][p])
                .collect()
        });
        (ertel_mhd(ctx).value, w)
    } else {
        let w = [0, 1, 2].map(|i| u[i].iter().zip(&ctx.grad_phi[i]).map(|(a, b)| a - b).collect());
        (ertel(ctx), w)
    };
    let grad_ie = g.grad(ie.values());
    over_rho(ctx, dot(&base, &cross(&ctx.grad_s, &grad_ie)))
}

/// `Ã·B/ρ`, advected for ideal MHD.
pub fn magnetic_scalar(ctx: &Context) -> ScalarField {
    over_rho(ctx, dot(ctx.state.a_tilde.comps(), ctx.state.b.comps()))
}

#[derive(Debug, Clone)]
pub struct ClebschCheck {
    /// `∇φ − r∇S − λ̃∇μ + u_M`.
    pub velocity: VectorField,
    /// `‖u_rec − u‖ / ‖u‖` (RMS norms).
    pub velocity_residual: f64,
    /// `‖w + λ̃∇μ‖ / ‖λ̃∇μ‖` with `w = u − ∇φ + r∇S − u_M`.
    pub weber_residual: f64,
}

pub fn clebsch_velocity(ctx: &Context) -> ClebschCheck {
    let n = ctx.state.grid().len();
    let u = ctx.state.u.comps();
    let r = ctx.state.r.values();
    let lam = ctx.state.lambda.values();
    let lmu: Triple = [0, 1, 2].map(|i| (0..n).map(|p| lam[p] * ctx.grad_mu[i][p]).collect());
    let rec: Triple = [0, 1, 2].map(|i| {
        (0..n)
            .map(|p| ctx.grad_phi[i][p] - r[p] * ctx.grad_s[i][p] - lmu[i][p] + ctx.u_m[i][p])
            .collect()
    });
    let diff: Triple = [0, 1, 2].map(|i| (0..n).map(|p| rec[i][p] - u[i][p]).collect());
    let floor = super::NORM_FLOOR;
    let velocity_residual = l2(&diff) / l2(u).max(floor);
    // w + λ̃∇μ = u − u_rec
    let weber_residual = l2(&diff) / l2(&lmu).max(floor);
    ClebschCheck {
        velocity: ctx.vector(rec),
        velocity_residual,
        weber_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{MhdState, Physics};
    use crate::forms::{OneForm, TwoForm};
    use crate::grid::Grid;

    #[test]
    fn ertel_of_simple_shear() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.rho = ScalarField::constant(&g, 2.0);
        st.u = VectorField::from_fn(&g, |_, y, _| [0.0, 0.0, y.sin()]);
        st.s = ScalarField::from_fn(&g, |x, _, _| x.sin());
        let ie = ertel(&Context::new(&st).unwrap());
        // ω = (cos y, 0, 0), ∇S = (cos x, 0, 0)
        for p in (0..g.len()).step_by(29) {
            let [x, y, _] = g.position(p);
            assert!((ie.values()[p] - y.cos() * x.cos() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clebsch_round_trip() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.phi = ScalarField::from_fn(&g, |x, y, _| 0.3 * (x + y).sin());
        st.r = ScalarField::from_fn(&g, |_, _, z| 0.1 * z.cos());
        st.s = ScalarField::from_fn(&g, |x, _, z| 0.2 * x.sin() + 0.1 * z.sin());
        st.lambda = ScalarField::from_fn(&g, |_, y, _| y.cos());
        st.mu = ScalarField::from_fn(&g, |x, _, z| (x - z).sin());
        st.b = TwoForm::from_fn(&g, |_, y, z| [z.sin(), 0.0, y.cos()]);
        st.gamma_form = OneForm::from_fn(&g, |x, _, _| [0.0, 0.1 * x.sin(), 0.0]);
        let rec = clebsch_velocity(&Context::new(&st).unwrap()).velocity;
        st.u = rec;
        let check = clebsch_velocity(&Context::new(&st).unwrap());
        assert!(check.velocity_residual < 1e-12);
        assert!(check.weber_residual < 1e-12);
        st.u.comps_mut()[0].iter_mut().for_each(|v| *v += 0.1);
        let check = clebsch_velocity(&Context::new(&st).unwrap());
        assert!(check.velocity_residual > 1e-2);
    }

    #[test]
    fn induced_velocity_matches_hand_value() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        // Γ = (0, x, 0): ∇×Γ = ẑ; B = x̂ ⇒ (∇×Γ)×B = ŷ
        st.gamma_form = OneForm::from_fn(&g, |x, _, _| [0.0, x.sin(), 0.0]);
        st.b = TwoForm::constant(&g, [1.0, 0.0, 0.0]);
        let ctx = Context::new(&st).unwrap();
        for p in (0..g.len()).step_by(31) {
            let [x, _, _] = g.position(p);
            assert!((ctx.u_m[1][p] + x.cos()).abs() < 1e-12);
            assert!(ctx.u_m[0][p].abs() < 1e-12 && ctx.u_m[2][p].abs() < 1e-12);
        }
    }

    #[test]
    fn hollmann_vanishes_for_uniform_entropy() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.u = VectorField::from_fn(&g, |_, y, z| [y.sin(), z.sin(), 0.0]);
        let ih = hollmann(&Context::new(&st).unwrap(), false);
        assert!(ih.max_abs() < 1e-14);
    }
}
