//! Named initial conditions. Every recipe sets `B0 = ∇×Ã0` and builds the
//! velocity from Clebsch data, `u0 = u_d + ∇φ0 − r0∇S0 − λ̃0∇μ0 + u_M`, where
//! `u_d` is an optional directly prescribed part (ABC and aligned flows).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::config::{ScalarRecipe, ScalarShape, ScenarioConfig};
use crate::dynamics::MhdState;
use crate::error::{Error, Result};
use crate::forms::{OneForm, ScalarField, Triple, TwoForm, VectorField};
use crate::grid::Grid;

pub struct Recipe {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, f64)],
}

pub const RECIPES: [Recipe; 5] = [
    Recipe {
        name: "static_gas",
        summary: "uniform gas at rest",
        params: &[],
    },
    Recipe {
        name: "abc_beltrami",
        summary: "ABC velocity (u_a, u_b, u_c) and/or ABC potential (a_a, a_b, a_c); \
                  bernoulli = 1 balances h + u²/2",
        params: &[
            ("u_a", 1.0),
            ("u_b", 1.0),
            ("u_c", 1.0),
            ("a_a", 0.0),
            ("a_b", 0.0),
            ("a_c", 0.0),
            ("bernoulli", 0.0),
        ],
    },
    Recipe {
        name: "gv_foliation",
        summary: "integrable potential Ã = (2 + a cos x cos y) ∇z with a Clebsch flow, \
                  or with an ABC flow of amplitude u_abc (bernoulli = 1 balances it)",
        params: &[("a", 0.5), ("u_abc", 0.0), ("bernoulli", 0.0)],
    },
    Recipe {
        name: "stratified_blob",
        summary: "S = s_a sin z + smooth bump; Clebsch flow; optional ABC field (b_amp); \
                  balance = 1 gives uniform pressure",
        params: &[
            ("s_a", 0.1),
            ("s_b", 0.1),
            ("width", 1.0),
            ("cx", PI),
            ("cy", PI),
            ("cz", PI),
            ("b_amp", 0.0),
            ("balance", 0.0),
        ],
    },
    Recipe {
        name: "aligned_ub",
        summary: "Beltrami field B = b_amp (sin z, cos z, 0), u = c B, S = s_a sin z; \
                  balance = 1 gives uniform pressure",
        params: &[("c", 0.5), ("b_amp", 1.0), ("s_a", 0.1), ("balance", 0.0)],
    },
];

pub fn recipe(name: &str) -> Result<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name).ok_or_else(|| {
        let names: Vec<&str> = RECIPES.iter().map(|r| r.name).collect();
        Error::Config(format!(
            "unknown init `{name}`; available: {}",
            names.join(", ")
        ))
    })
}

pub fn check_params(name: &str, params: &BTreeMap<String, f64>) -> Result<()> {
    let r = recipe(name)?;
    for (k, v) in params {
        if !r.params.iter().any(|(p, _)| p == k) {
            let known: Vec<&str> = r.params.iter().map(|(p, _)| *p).collect();
            return Err(Error::Config(format!(
                "init `{name}` has no parameter `{k}`; expected one of [{}]",
                known.join(", ")
            )));
        }
        if !v.is_finite() {
            return Err(Error::Config(format!("init.params.{k} must be finite")));
        }
    }
    Ok(())
}

/// `(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`, an
/// eigenfield of the curl with eigenvalue 1.
pub fn abc_field(g: &Grid, [a, b, c]: [f64; 3]) -> Triple {
    VectorField::from_fn(g, |x, y, z| {
        [a * z.sin() + c * y.cos(), b * x.sin() + a * z.cos(), c * y.sin() + b * x.cos()]
    })
    .into_comps()
}

/// Density making `h + ½u²` uniform at entropy `S0`, with the mean
/// enthalpy at its reference value.
fn bernoulli_density(g: &Grid, eos: &crate::thermo::EosParams, u: &Triple) -> Result<ScalarField> {
    let u2: Vec<f64> = (0..g.len())
        .map(|q| (0..3).map(|i| u[i][q] * u[i][q]).sum())
        .collect();
    let mean = u2.iter().sum::<f64>() / g.len() as f64;
    let h0 = eos.point(eos.rho0, eos.s0).h;
    let rho = u2
        .iter()
        .map(|q| eos.rho_from_enthalpy(h0 + 0.5 * (mean - q), eos.s0))
        .collect();
    ScalarField::new(g, rho)
}

struct Params<'a>(&'a BTreeMap<String, f64>, &'static Recipe);

impl Params<'_> {
    fn get(&self, k: &str) -> f64 {
        self.0.get(k).copied().unwrap_or_else(|| {
            self.1.params.iter().find(|(p, _)| *p == k).map(|(_, v)| *v).unwrap()
        })
    }

    fn flag(&self, k: &str) -> bool {
        self.get(k) != 0.0
    }
}

fn zeros3(n: usize) -> Triple {
    [vec![0.0; n], vec![0.0; n], vec![0.0; n]]
}

/// Build the initial state described by `cfg`.
pub fn build_state(cfg: &ScenarioConfig) -> Result<MhdState> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let physics = cfg.physics();
    let eos = physics.eos;
    let r = recipe(&cfg.init.name)?;
    let p = Params(&cfg.init.params, r);
    let n = g.len();
    let mut st = MhdState::at_rest(&g, physics);
    let mut direct = zeros3(n);
    let mut a_tilde = zeros3(n);
    let mut lambda_default = None;
    let mut mu_default = None;
    let mut balance = false;
    let flow_defaults = |l: &mut Option<ScalarRecipe>, m: &mut Option<ScalarRecipe>| {
        *l = Some(ScalarRecipe::new(ScalarShape::Cos, 0.2, [0.0, 1.0, 0.0]));
        *m = Some(ScalarRecipe::new(ScalarShape::Sin, 1.0, [0.0, 0.0, 1.0]));
    };

    match r.name {
        "static_gas" => {}
        "abc_beltrami" => {
            direct = abc_field(&g, [p.get("u_a"), p.get("u_b"), p.get("u_c")]);
            a_tilde = abc_field(&g, [p.get("a_a"), p.get("a_b"), p.get("a_c")]);
            if p.flag("bernoulli") {
                st.rho = bernoulli_density(&g, &eos, &direct)?;
            }
        }
        "gv_foliation" => {
            let a = p.get("a");
            if !(a.abs() < 2.0) {
                return Err(Error::Config(format!("gv_foliation needs |a| < 2, got {a}")));
            }
            a_tilde[2] = g.sample(|x, y, _| 2.0 + a * x.cos() * y.cos());
            let u_abc = p.get("u_abc");
            if u_abc != 0.0 {
                direct = abc_field(&g, [u_abc; 3]);
                if p.flag("bernoulli") {
                    st.rho = bernoulli_density(&g, &eos, &direct)?;
                }
            } else {
                flow_defaults(&mut lambda_default, &mut mu_default);
            }
        }
        "stratified_blob" => {
            let (sa, sb, w) = (p.get("s_a"), p.get("s_b"), p.get("width"));
            if !(w > 0.0) {
                return Err(Error::Config(format!("stratified_blob needs width > 0, got {w}")));
            }
            let c = [p.get("cx"), p.get("cy"), p.get("cz")];
            let s0 = eos.s0;
            st.s = ScalarField::from_fn(&g, |x, y, z| {
                // chordal distance keeps the bump smooth and periodic
                let d2: f64 = [x, y, z]
                    .iter()
                    .zip(&c)
                    .map(|(xi, ci)| 2.0 * (1.0 - (xi - ci).cos()))
                    .sum();
                s0 + sa * z.sin() + sb * (-d2 / (2.0 * w * w)).exp()
            });
            let b_amp = p.get("b_amp");
            a_tilde = abc_field(&g, [b_amp; 3]);
            balance = p.flag("balance");
            flow_defaults(&mut lambda_default, &mut mu_default);
        }
        "aligned_ub" => {
            let (c, b_amp, sa) = (p.get("c"), p.get("b_amp"), p.get("s_a"));
            a_tilde = VectorField::from_fn(&g, |_, _, z| [b_amp * z.sin(), b_amp * z.cos(), 0.0])
                .into_comps();
            // ∇×Ã = Ã for this field
            direct = a_tilde.clone().map(|v| v.iter().map(|x| c * x).collect());
            let s0 = eos.s0;
            st.s = ScalarField::from_fn(&g, |_, _, z| s0 + sa * z.sin());
            balance = p.flag("balance");
        }
        _ => unreachable!("recipe table and match disagree"),
    }

    if balance {
        let s = st.s.values();
        let rho = s.iter().map(|&sv| eos.rho_from_pressure(eos.p0, sv)).collect();
        st.rho = ScalarField::new(&g, rho)?;
    }

    st.b = TwoForm::new(&g, g.curl(&a_tilde))?;
    st.a_tilde = OneForm::new(&g, a_tilde)?;

    let ci = &cfg.clebsch_init;
    let pick = |given: &Option<ScalarRecipe>, fallback: Option<ScalarRecipe>| {
        given.clone().or(fallback).unwrap_or_default().sample(&g)
    };
    st.r = ScalarField::new(&g, pick(&ci.r0, None))?;
    st.lambda = ScalarField::new(&g, pick(&ci.lambda0, lambda_default))?;
    st.mu = ScalarField::new(&g, pick(&ci.mu0_field, mu_default))?;
    st.gamma_form = OneForm::new(&g, ci.gamma0.clone().unwrap_or_default().sample(&g))?;

    // Everything but ∇φ0
    let ctx = crate::invariants::Context::new(&st)?;
    let (rr, lam) = (st.r.values(), st.lambda.values());
    let partial: Triple = [0, 1, 2].map(|i| {
        (0..n)
            .map(|q| {
                direct[i][q] - rr[q] * ctx.grad_s[i][q] - lam[q] * ctx.grad_mu[i][q] + ctx.u_m[i][q]
            })
            .collect()
    });
    drop(ctx);
    let phi_recipe = ci
        .phi0
        .clone()
        .unwrap_or(ScalarRecipe::new(ScalarShape::Solenoidal, 1.0, [1.0, 0.0, 0.0]));
    let phi = if phi_recipe.shape == ScalarShape::Solenoidal {
        g.gradient_potential(&partial).into_iter().map(|v| -v).collect()
    } else {
        phi_recipe.sample(&g)
    };
    let grad_phi = g.grad(&phi);
    st.phi = ScalarField::new(&g, phi)?;
    let u: Triple = [0, 1, 2].map(|i| (0..n).map(|q| partial[i][q] + grad_phi[i][q]).collect());
    st.u = VectorField::new(&g, u)?;
    st.validate()?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{clebsch_velocity, fluid_helicity, godbillon_vey, Context, GV_FLOOR};

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!("grid.n = 16\n{text}")).unwrap()
    }

    #[test]
    fn static_gas_is_at_rest() {
        let st = build_state(&cfg("")).unwrap();
        assert_eq!(st.u.max_norm(), 0.0);
        assert_eq!(st.b.max_norm(), 0.0);
        assert!(st.rho.values().iter().all(|&r| r == 1.0));
    }

    #[test]
    fn abc_helicity_at_start() {
        let st = build_state(&cfg("init.name = \"abc_beltrami\"")).unwrap();
        let h = fluid_helicity(&Context::new(&st).unwrap()).integral();
        let want = 3.0 * (2.0 * PI).powi(3);
        assert!((h - want).abs() <= 1e-10 * want, "{h}");
    }

    #[test]
    fn bernoulli_balance_flattens_total_head() {
        let st = build_state(&cfg("init.name = \"abc_beltrami\"\ninit.params.bernoulli = 1.0")).unwrap();
        let eos = st.physics.eos;
        let heads: Vec<f64> = (0..st.grid().len())
            .map(|p| {
                let u = st.u.at(p);
                eos.point(st.rho.values()[p], st.s.values()[p]).h
                    + 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
            })
            .collect();
        let spread = heads.iter().cloned().fold(f64::MIN, f64::max)
            - heads.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12);
    }

    #[test]
    fn foliation_has_no_defect() {
        let st = build_state(&cfg("init.name = \"gv_foliation\"")).unwrap();
        let gv = godbillon_vey(&st, GV_FLOOR).unwrap();
        assert!(gv.defect <= 1e-12, "{}", gv.defect);
        assert!(st.u.max_norm() > 0.01);
    }

    #[test]
    fn foliation_in_abc_flow() {
        let st = build_state(&cfg(
            "init.name = \"gv_foliation\"\ninit.params.u_abc = 0.2\ninit.params.bernoulli = 1.0",
        ))
        .unwrap();
        assert!(godbillon_vey(&st, GV_FLOOR).unwrap().defect <= 1e-12);
        let want = abc_field(st.grid(), [0.2; 3]);
        for (u, w) in st.u.comps().iter().zip(&want) {
            assert!(u.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        assert!(st.rho.values().iter().any(|&r| r != 1.0));
    }

    #[test]
    fn clebsch_initialization_is_consistent() {
        let st = build_state(&cfg(
            "init.name = \"stratified_blob\"\ninit.params.b_amp = 0.2\n\
             clebsch_init.r0 = { shape = \"sin\", amp = 0.1, k = [0.0, 0.0, 1.0] }\n\
             clebsch_init.Gamma0 = { shape = \"abc\", amp = 0.05 }",
        ))
        .unwrap();
        let c = clebsch_velocity(&Context::new(&st).unwrap());
        assert!(c.velocity_residual <= 1e-12, "{}", c.velocity_residual);
        assert!(c.weber_residual <= 1e-12);
        let div = st.grid().div(st.u.comps());
        assert!(div.iter().all(|d| d.abs() < 1e-12));
        let div_b = st.grid().div(st.b.comps());
        assert!(div_b.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn pressure_balance() {
        let st = build_state(&cfg("init.name = \"stratified_blob\"\ninit.params.balance = 1.0")).unwrap();
        let eos = st.physics.eos;
        for p in (0..st.grid().len()).step_by(17) {
            let pr = eos.point(st.rho.values()[p], st.s.values()[p]).p;
            assert!((pr - eos.p0).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_flow_is_parallel_to_field() {
        let st = build_state(&cfg("init.name = \"aligned_ub\"")).unwrap();
        for p in (0..st.grid().len()).step_by(13) {
            let (u, b) = (st.u.at(p), st.b.at(p));
            for i in 0..3 {
                assert!((u[i] - 0.5 * b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_recipe_parameter() {
        let c = cfg("init.name = \"gv_foliation\"\ninit.params.a = 3.0");
        assert!(matches!(build_state(&c), Err(Error::Config(_))));
    }
}
