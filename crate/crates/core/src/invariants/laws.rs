//! Helicity-type conservation laws.

use super::{ConsLaw, Context};
use crate::calculus::integrate_raw;
use crate::forms::{cross, dot, Triple};

fn transport(ctx: &Context, density: &[f64], along: &Triple, weight: &[f64]) -> Triple {
    let u = ctx.state.u.comps();
    [0, 1, 2].map(|i| {
        (0..density.len())
            .map(|p| u[i][p] * density[p] + weight[p] * along[i][p])
            .collect()
    })
}

/// Fluid helicity `D = u·ω`, `F = uD + (h − ½u²)ω`, with the baroclinic
/// source `Q = T ω·∇S + u·(∇T×∇S)`. Ignores the magnetic field.
pub fn fluid_helicity(ctx: &Context) -> ConsLaw {
    let g = ctx.state.grid();
    let u = ctx.state.u.comps();
    let d = dot(u, &ctx.omega);
    let flux = transport(ctx, &d, &ctx.omega, &ctx.bernoulli_minus());
    let grad_t = g.grad(&ctx.temperature);
    let ws = dot(&ctx.omega, &ctx.grad_s);
    let uts = dot(u, &cross(&grad_t, &ctx.grad_s));
    let q = (0..g.len())
        .map(|p| ctx.temperature[p] * ws[p] + uts[p])
        .collect();
    ConsLaw {
        name: "fluid_helicity",
        density: ctx.scalar(d),
        flux: ctx.vector(flux),
        source: ctx.scalar(q),
    }
}

/// Cross helicity `D = u·B`, `F = uD + (h − ½u²)B`, `Q = T B·∇S`.
pub fn cross_helicity(ctx: &Context) -> ConsLaw {
    let b = ctx.state.b.comps();
    let d = dot(ctx.state.u.comps(), b);
    let flux = transport(ctx, &d, b, &ctx.bernoulli_minus());
    let bs = dot(b, &ctx.grad_s);
    let q = bs.iter().zip(&ctx.temperature).map(|(x, t)| x * t).collect();
    ConsLaw {
        name: "cross_helicity",
        density: ctx.scalar(d),
        flux: ctx.vector(flux),
        source: ctx.scalar(q),
    }
}

#[derive(Debug, Clone)]
pub struct MagneticHelicity {
    /// `D = Ã·B`, `F = uD`, no source.
    pub law: ConsLaw,
    /// `|∫Ã·∇×Ã − ∫Ã·B|`, nonzero when the stored `B` is not the curl of `Ã`.
    pub hopf_defect: f64,
    /// `max |E·B|` with `E = −u×B`; vanishes identically in ideal MHD.
    pub gauge_defect: f64,
}

pub fn magnetic_helicity(ctx: &Context) -> MagneticHelicity {
    let g = ctx.state.grid();
    let a = ctx.state.a_tilde.comps();
    let b = ctx.state.b.comps();
    let d = dot(a, b);
    let zero = vec![0.0; g.len()];
    let flux = transport(ctx, &d, b, &zero);
    let curl_a = g.curl(a);
    let hopf = integrate_raw(g, &dot(a, &curl_a));
    let h_m = integrate_raw(g, &d);
    let e = cross(ctx.state.u.comps(), b);
    let gauge_defect = dot(&e, b).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    MagneticHelicity {
        law: ConsLaw {
            name: "magnetic_helicity",
            density: ctx.scalar(d),
            flux: ctx.vector(flux),
            source: ctx.scalar(zero),
        },
        hopf_defect: (hopf - h_m).abs(),
        gauge_defect,
    }
}

#[derive(Debug, Clone)]
pub struct NonlocalHelicity {
    /// `D = Ω·(u + r∇S)` with `Ω = ω + ∇r×∇S`, `F = uD + Ω(h − ½u²)`.
    pub law: ConsLaw,
    /// `max |D − (u·Ω + r ω·∇S)|`; the two forms agree identically.
    pub split_defect: f64,
    /// `max |D − Ω·∇φ|`, which equals `max |w·Ω|` for `w = u − ∇φ + r∇S`.
    pub potential_defect: f64,
    /// `max |Ω| · max |u + r∇S|`, a natural size for the defects.
    pub scale: f64,
}

/// Nonlocal fluid helicity of a gas state (the magnetic field is ignored).
pub fn nonlocal_helicity(ctx: &Context) -> NonlocalHelicity {
    let n = ctx.state.grid().len();
    let u = ctx.state.u.comps();
    let r = ctx.state.r.values();
    let rxs = cross(&ctx.grad_r, &ctx.grad_s);
    let big_omega: Triple = [0, 1, 2].map(|i| (0..n).map(|p| ctx.omega[i][p] + rxs[i][p]).collect());
    let v: Triple = [0, 1, 2].map(|i| (0..n).map(|p| u[i][p] + r[p] * ctx.grad_s[i][p]).collect());
    let d = dot(&big_omega, &v);

    let u_om = dot(u, &big_omega);
    let ws = dot(&ctx.omega, &ctx.grad_s);
    let om_phi = dot(&big_omega, &ctx.grad_phi);
    let mut split_defect: f64 = 0.0;
    let mut potential_defect: f64 = 0.0;
    for p in 0..n {
        split_defect = split_defect.max((d[p] - (u_om[p] + r[p] * ws[p])).abs());
        potential_defect = potential_defect.max((d[p] - om_phi[p]).abs());
    }
    let max_len = |t: &Triple| dot(t, t).iter().fold(0.0f64, |m, x| m.max(*x)).sqrt();
    let scale = max_len(&big_omega) * max_len(&v);

    let flux = transport(ctx, &d, &big_omega, &ctx.bernoulli_minus());
    NonlocalHelicity {
        law: ConsLaw {
            name: "nonlocal_helicity",
            density: ctx.scalar(d),
            flux: ctx.vector(flux),
            source: ctx.scalar(vec![0.0; n]),
        },
        split_defect,
        potential_defect,
        scale,
    }
}

/// Nonlocal cross helicity `D = B·(u + r∇S)`, `F = uD + (h − ½u²)B`.
pub fn nonlocal_cross_helicity(ctx: &Context) -> ConsLaw {
    let n = ctx.state.grid().len();
    let b = ctx.state.b.comps();
    let u = ctx.state.u.comps();
    let r = ctx.state.r.values();
    let d: Vec<f64> = (0..n)
        .map(|p| {
            (0..3)
                .map(|i| b[i][p] * (u[i][p] + r[p] * ctx.grad_s[i][p]))
                .sum()
        })
        .collect();
    let flux = transport(ctx, &d, b, &ctx.bernoulli_minus());
    ConsLaw {
        name: "nonlocal_cross_helicity",
        density: ctx.scalar(d),
        flux: ctx.vector(flux),
        source: ctx.scalar(vec![0.0; n]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rhs, MhdState, Physics};
    use crate::forms::{OneForm, ScalarField, TwoForm, VectorField};
    use crate::grid::Grid;

    fn abc(g: &Grid, a: f64, b: f64, c: f64) -> [Vec<f64>; 3] {
        let f = VectorField::from_fn(g, |x, y, z| {
            [a * z.sin() + c * y.cos(), b * x.sin() + a * z.cos(), c * y.sin() + b * x.cos()]
        });
        f.into_comps()
    }

    #[test]
    fn abc_fluid_helicity_matches_closed_form() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.u = VectorField::new(&g, abc(&g, 1.0, 1.0, 1.0)).unwrap();
        let ctx = Context::new(&st).unwrap();
        let h = fluid_helicity(&ctx).integral();
        // u·ω = |u|² for a unit Beltrami field; its mean is A² + B² + C²
        let want = 3.0 * g.volume();
        assert!((h - want).abs() < 1e-9 * want, "{h} vs {want}");
    }

    #[test]
    fn hopf_defect_vanishes_when_b_is_curl_of_potential() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        let a = abc(&g, 0.3, 0.2, 0.1);
        st.b = TwoForm::new(&g, g.curl(&a)).unwrap();
        st.a_tilde = OneForm::new(&g, a).unwrap();
        st.u = VectorField::from_fn(&g, |x, y, _| [y.sin(), x.cos(), 0.2]);
        let ctx = Context::new(&st).unwrap();
        let mh = magnetic_helicity(&ctx);
        assert!(mh.hopf_defect < 1e-10);
        assert!(mh.gauge_defect < 1e-14);
        // ABC with unit eigenvalue: Ã·B = |Ã|², mean 0.09 + 0.04 + 0.01
        let want = 0.14 * g.volume();
        assert!((mh.law.integral() - want).abs() < 1e-10);
    }

    /// Pointwise check of `∂D/∂t + ∇·F = Q` using the exact state derivative.
    fn pointwise_residual(st: &MhdState, law: impl Fn(&Context) -> ConsLaw) -> f64 {
        let h = 1e-5;
        let d = rhs(st).unwrap();
        let shifted = |sgn: f64| {
            let mut s = st.clone();
            let add = |f: &mut [f64], df: &[f64]| {
                for (x, y) in f.iter_mut().zip(df) {
                    *x += sgn * h * y;
                }
            };
            add(s.rho.values_mut(), d.rho.values());
            add(s.s.values_mut(), d.s.values());
            add(s.r.values_mut(), d.r.values());
            add(s.phi.values_mut(), d.phi.values());
            for i in 0..3 {
                add(&mut s.u.comps_mut()[i], &d.u.comps()[i]);
                add(&mut s.b.comps_mut()[i], &d.b.comps()[i]);
            }
            law(&Context::new(&s).unwrap()).density.into_inner()
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        let l = law(&Context::new(st).unwrap());
        let div = l.flux_divergence();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in 0..plus.len() {
            let dt = (plus[p] - minus[p]) / (2.0 * h);
            worst = worst.max((dt + div[p] - l.source.values()[p]).abs());
            scale = scale.max(div[p].abs());
        }
        worst / scale
    }

    /// A smooth, low-wavenumber, stratified and magnetized state whose
    /// products stay within the retained band on a 16³ grid.
    fn smooth_state() -> MhdState {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.rho = ScalarField::from_fn(&g, |x, _, z| 1.0 + 0.1 * x.cos() + 0.05 * z.sin());
        st.s = ScalarField::from_fn(&g, |_, y, z| 0.2 * y.sin() + 0.1 * z.cos());
        st.u = VectorField::from_fn(&g, |x, y, z| [0.3 * y.sin(), 0.2 * z.cos(), 0.1 * x.sin()]);
        st.r = ScalarField::from_fn(&g, |x, _, _| 0.2 * x.sin());
        st
    }

    #[test]
    fn helicity_laws_hold_pointwise() {
        let mut st = smooth_state();
        let r = pointwise_residual(&st, fluid_helicity);
        assert!(r < 1e-6, "fluid helicity {r}");
        let r = pointwise_residual(&st, |c| nonlocal_helicity(c).law);
        assert!(r < 1e-6, "nonlocal helicity {r}");
        let g = st.grid().clone();
        st.b = TwoForm::from_fn(&g, |_, y, z| [0.2 * z.cos(), 0.0, 0.1 * y.sin()]);
        let r = pointwise_residual(&st, cross_helicity);
        assert!(r < 1e-6, "cross helicity {r}");
        let r = pointwise_residual(&st, nonlocal_cross_helicity);
        assert!(r < 1e-6, "nonlocal cross helicity {r}");
    }

    #[test]
    fn wrong_flux_fails_pointwise() {
        let st = smooth_state();
        let r = pointwise_residual(&st, |c| {
            let mut l = fluid_helicity(c);
            for comp in l.flux.comps_mut() {
                comp.iter_mut().for_each(|x| *x *= 1.5);
            }
            l
        });
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn nonlocal_split_is_exact() {
        let st = smooth_state();
        let nl = nonlocal_helicity(&Context::new(&st).unwrap());
        assert!(nl.split_defect < 1e-12 * nl.scale.max(1.0));
    }
}
