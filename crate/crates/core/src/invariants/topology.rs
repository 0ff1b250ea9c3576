//! Topological charges over sub-boxes and volume integrals weighted by
//! functions of advected scalars.

use serde::{Deserialize, Serialize};

use super::Context;
use crate::error::{Error, Result};
use crate::forms::{cross, dot, ensure_same, OneForm, Triple};
use crate::grid::Grid;

/// Axis-aligned region `lo ≤ x < hi` inside the periodic box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subbox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Subbox {
    pub fn full(grid: &Grid) -> Self {
        Self {
            lo: [0.0; 3],
            hi: grid.length(),
        }
    }

    /// Flat indices of the nodes inside the region.
    pub fn nodes(&self, grid: &Grid) -> Result<Vec<usize>> {
        let len = grid.length();
        for a in 0..3 {
            let tol = 1e-12 * len[a];
            if !(self.lo[a] < self.hi[a]) || self.lo[a] < -tol || self.hi[a] > len[a] + tol {
                return Err(Error::DegenerateRegion(format!(
                    "axis {a}: [{}, {}) is empty or leaves [0, {}]",
                    self.lo[a], self.hi[a], len[a]
                )));
            }
        }
        let nodes: Vec<usize> = (0..grid.len())
            .filter(|&p| {
                let x = grid.position(p);
                (0..3).all(|a| x[a] >= self.lo[a] && x[a] < self.hi[a])
            })
            .collect();
        if nodes.is_empty() {
            return Err(Error::DegenerateRegion("region contains no grid nodes".into()));
        }
        Ok(nodes)
    }
}

/// `∫_box ∇·(a×b) d³x`: spectral divergence, then a masked node sum.
pub fn topological_charge(a: &OneForm, b: &OneForm, region: &Subbox) -> Result<f64> {
    ensure_same(a.grid(), b.grid())?;
    let g = a.grid();
    let nodes = region.nodes(g)?;
    let density = g.div(&cross(a.comps(), b.comps()));
    Ok(nodes.iter().map(|&p| density[p]).sum::<f64>() * g.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChargePreset {
    /// `a = ∇S`, `b = u − ∇φ`; density `−ρ I_e`.
    Ertel,
    /// `a = Ã`, `b = ∇S`; density `B·∇S`.
    EntropyB,
}

impl std::str::FromStr for ChargePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ertel" => Ok(Self::Ertel),
            "entropy-B" | "entropy-b" => Ok(Self::EntropyB),
            other => Err(Error::UnsupportedArgument(other.to_string())),
        }
    }
}

pub fn topological_charge_preset(ctx: &Context, preset: ChargePreset, region: &Subbox) -> Result<f64> {
    let g = ctx.state.grid();
    let grad_s = OneForm::from_raw(g, ctx.grad_s.clone());
    match preset {
        ChargePreset::Ertel => {
            let u = ctx.state.u.comps();
            let w: Triple = [0, 1, 2].map(|i| u[i].iter().zip(&ctx.grad_phi[i]).map(|(a, b)| a - b).collect());
            topological_charge(&grad_s, &OneForm::from_raw(g, w), region)
        }
        ChargePreset::EntropyB => topological_charge(&ctx.state.a_tilde, &grad_s, region),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralKind {
    /// `∫ Φ (Ã·B) d³x`.
    I32,
    /// `∫ Φ Ã·[∇S × ∇(Ã·B/ρ)] d³x`.
    I43,
}

/// `coef · Π arg^power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub powers: Vec<(String, u32)>,
}

/// A polynomial weight `Φ` over the advected scalars
/// `AB_rho = Ã·B/ρ`, `S`, `b_grad_AB_rho = (B/ρ)·∇(Ã·B/ρ)` and `b_grad_S = (B/ρ)·∇S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub kind: IntegralKind,
    pub terms: Vec<Monomial>,
}

impl PhiSpec {
    pub const ARGUMENTS: [&'static str; 4] = ["AB_rho", "S", "b_grad_AB_rho", "b_grad_S"];

    pub fn constant(kind: IntegralKind, c: f64) -> Self {
        Self {
            kind,
            terms: vec![Monomial {
                coef: c,
                powers: Vec::new(),
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.terms {
            for (name, _) in &m.powers {
                if !Self::ARGUMENTS.contains(&name.as_str()) {
                    return Err(Error::UnsupportedArgument(name.clone()));
                }
            }
        }
        Ok(())
    }
}

pub fn generalized_integral(ctx: &Context, spec: &PhiSpec) -> Result<f64> {
    spec.validate()?;
    let g = ctx.state.grid();
    let n = g.len();
    let a = ctx.state.a_tilde.comps();
    let b = ctx.state.b.comps();
    let rho = ctx.state.rho.values();
    let ab = dot(a, b);
    let ab_rho: Vec<f64> = ab.iter().zip(rho).map(|(x, r)| x / r).collect();
    let uses = |name: &str| spec.terms.iter().any(|m| m.powers.iter().any(|(k, _)| k == name));
    let need_grad_ab = spec.kind == IntegralKind::I43 || uses("b_grad_AB_rho");
    let grad_ab = need_grad_ab.then(|| g.grad(&ab_rho));
    let b_over_rho: Triple = [0, 1, 2].map(|i| (0..n).map(|p| b[i][p] / rho[p]).collect());

    let mut args: Vec<(&str, Vec<f64>)> = vec![("AB_rho", ab_rho.clone()), ("S", ctx.state.s.values().to_vec())];
    if uses("b_grad_AB_rho") {
        args.push(("b_grad_AB_rho", dot(&b_over_rho, grad_ab.as_ref().unwrap())));
    }
    if uses("b_grad_S") {
        args.push(("b_grad_S", dot(&b_over_rho, &ctx.grad_s)));
    }
    let arg = |name: &str| &args.iter().find(|(k, _)| *k == name).unwrap().1;

    let mut phi = vec![0.0; n];
    for m in &spec.terms {
        for (p, out) in phi.iter_mut().enumerate() {
            let mut v = m.coef;
            for (name, pow) in &m.powers {
                v *= arg(name)[p].powi(*pow as i32);
            }
            *out += v;
        }
    }
    let base = match spec.kind {
        IntegralKind::I32 => ab,
        IntegralKind::I43 => dot(a, &cross(&ctx.grad_s, grad_ab.as_ref().unwrap())),
    };
    let density: Vec<f64> = phi.iter().zip(&base).map(|(f, d)| f * d).collect();
    Ok(crate::calculus::integrate_raw(g, &density))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{MhdState, Physics};
    use crate::forms::{ScalarField, TwoForm};
    use std::f64::consts::PI;

    fn magnetized() -> MhdState {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        let a = OneForm::from_fn(&g, |x, y, z| {
            [0.3 * z.sin() + 0.1 * y.cos(), 0.2 * x.sin() + 0.3 * z.cos(), 0.1 * y.sin() + 0.2 * x.cos()]
        });
        st.b = TwoForm::new(&g, g.curl(a.comps())).unwrap();
        st.a_tilde = a;
        st.s = ScalarField::from_fn(&g, |x, y, _| 0.3 * x.sin() + 0.2 * (x + y).cos());
        st
    }

    #[test]
    fn full_box_charge_vanishes() {
        let st = magnetized();
        let ctx = Context::new(&st).unwrap();
        let full = Subbox::full(st.grid());
        for preset in [ChargePreset::Ertel, ChargePreset::EntropyB] {
            assert!(topological_charge_preset(&ctx, preset, &full).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_forms_have_no_charge() {
        let st = magnetized();
        let a = &st.a_tilde;
        let b = OneForm::new(st.grid(), a.comps().clone().map(|c| c.iter().map(|x| 2.0 * x).collect())).unwrap();
        let half = Subbox {
            lo: [0.0; 3],
            hi: [PI, 2.0 * PI, 2.0 * PI],
        };
        assert!(topological_charge(a, &b, &half).unwrap().abs() < 1e-14);
    }

    #[test]
    fn half_box_matches_riemann_sum() {
        let st = magnetized();
        let g = st.grid();
        let ctx = Context::new(&st).unwrap();
        let half = Subbox {
            lo: [0.0; 3],
            hi: [PI, 2.0 * PI, 2.0 * PI],
        };
        let q = topological_charge_preset(&ctx, ChargePreset::EntropyB, &half).unwrap();
        let bs = dot(st.b.comps(), &ctx.grad_s);
        let brute: f64 = (0..g.len())
            .filter(|&p| g.position(p)[0] < PI)
            .map(|p| bs[p])
            .sum::<f64>()
            * g.cell_volume();
        assert!(q.abs() > 1e-3);
        assert!((q - brute).abs() < 1e-6, "{q} vs {brute}");
    }

    #[test]
    fn degenerate_regions_are_rejected() {
        let g = Grid::cubic(8).unwrap();
        let a = OneForm::zeros(&g);
        let bad = [
            Subbox { lo: [1.0, 0.0, 0.0], hi: [1.0, 1.0, 1.0] },
            Subbox { lo: [0.0; 3], hi: [7.0, 1.0, 1.0] },
            Subbox { lo: [0.1, 0.1, 0.1], hi: [0.2, 0.2, 0.2] },
        ];
        for b in bad {
            assert!(matches!(topological_charge(&a, &a, &b), Err(Error::DegenerateRegion(_))));
        }
    }

    #[test]
    fn constant_weights_reduce_to_magnetic_helicity() {
        let mut st = magnetized();
        let g = st.grid().clone();
        let h_m = crate::calculus::integrate_raw(&g, &dot(st.a_tilde.comps(), st.b.comps()));
        let ctx = Context::new(&st).unwrap();
        let one = generalized_integral(&ctx, &PhiSpec::constant(IntegralKind::I32, 1.0)).unwrap();
        assert!((one - h_m).abs() < 1e-12 * h_m.abs().max(1.0));

        st.s = ScalarField::constant(&g, 0.7);
        let ctx = Context::new(&st).unwrap();
        let spec = PhiSpec {
            kind: IntegralKind::I32,
            terms: vec![Monomial {
                coef: 1.0,
                powers: vec![("S".into(), 1)],
            }],
        };
        let v = generalized_integral(&ctx, &spec).unwrap();
        assert!((v - 0.7 * h_m).abs() < 1e-12 * h_m.abs().max(1.0));
    }

    #[test]
    fn unknown_argument_is_rejected() {
        let st = magnetized();
        let ctx = Context::new(&st).unwrap();
        let spec = PhiSpec {
            kind: IntegralKind::I43,
            terms: vec![Monomial {
                coef: 1.0,
                powers: vec![("vorticity".into(), 2)],
            }],
        };
        assert!(matches!(
            generalized_integral(&ctx, &spec),
            Err(Error::UnsupportedArgument(a)) if a == "vorticity"
        ));
    }

    #[test]
    fn preset_names_parse() {
        assert_eq!("ertel".parse::<ChargePreset>().unwrap(), ChargePreset::Ertel);
        assert_eq!("entropy-B".parse::<ChargePreset>().unwrap(), ChargePreset::EntropyB);
        assert!("other".parse::<ChargePreset>().is_err());
    }
}
