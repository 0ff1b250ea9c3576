//! Exterior derivative, wedge, interior product and Lie derivatives on the
//! periodic box, with the fixed ℝ³ correspondences
//!
//! ```text
//! d f         = ∇f · dx            X ⌟ (V·dx) = V·X
//! d (V·dx)    = (∇×V) · dS         X ⌟ (B·dS) = −(X×B)·dx
//! d (B·dS)    = (∇·B) d³x          X ⌟ d³x    = X·dS
//! ```
//!
//! Differentiation is spectral and undealiased: these are diagnostics.

use rayon::prelude::*;

use crate::error::Result;
use crate::forms::{
    cross, dot, ensure_same, scale, Form, OneForm, ScalarField, ThreeForm, Triple, TwoForm,
    VectorField,
};
use crate::grid::Grid;

pub fn d0(f: &ScalarField) -> OneForm {
    let g = f.grid();
    OneForm::from_raw(g, g.grad(f.values()))
}

pub fn d1(a: &OneForm) -> TwoForm {
    let g = a.grid();
    TwoForm::from_raw(g, g.curl(a.comps()))
}

pub fn d2(b: &TwoForm) -> ThreeForm {
    let g = b.grid();
    ThreeForm::from_raw(g, g.div(b.comps()))
}

/// Exterior derivative of a form of any rank (`d` of a 3-form is zero).
pub fn exterior(form: &Form) -> Option<Form> {
    match form {
        Form::Zero(f) => Some(Form::One(d0(f))),
        Form::One(a) => Some(Form::Two(d1(a))),
        Form::Two(b) => Some(Form::Three(d2(b))),
        Form::Three(_) => None,
    }
}

/// `(a·dx) ∧ (b·dx) = (a×b)·dS`.
pub fn wedge11(a: &OneForm, b: &OneForm) -> Result<TwoForm> {
    ensure_same(a.grid(), b.grid())?;
    Ok(TwoForm::from_raw(a.grid(), cross(a.comps(), b.comps())))
}

/// `(a·dx) ∧ (b·dS) = (a·b) d³x`.
pub fn wedge12(a: &OneForm, b: &TwoForm) -> Result<ThreeForm> {
    ensure_same(a.grid(), b.grid())?;
    Ok(ThreeForm::from_raw(a.grid(), dot(a.comps(), b.comps())))
}

pub fn interior1(x: &VectorField, a: &OneForm) -> Result<ScalarField> {
    ensure_same(x.grid(), a.grid())?;
    Ok(ScalarField::from_raw(x.grid(), dot(x.comps(), a.comps())))
}

pub fn interior2(x: &VectorField, b: &TwoForm) -> Result<OneForm> {
    ensure_same(x.grid(), b.grid())?;
    let mut c = cross(x.comps(), b.comps());
    c.iter_mut().flatten().for_each(|v| *v = -*v);
    Ok(OneForm::from_raw(x.grid(), c))
}

pub fn interior3(x: &VectorField, t: &ThreeForm) -> Result<TwoForm> {
    ensure_same(x.grid(), t.grid())?;
    Ok(TwoForm::from_raw(x.grid(), scale(t.density(), x.comps())))
}

/// Lie derivative by the vector-calculus formula for each rank:
///
/// ```text
/// 0: u·∇f
/// 1: −u×(∇×V) + ∇(u·V)
/// 2: −∇×(u×B) + u(∇·B)
/// 3: ∇·(u f)
/// ```
pub fn lie_direct(u: &VectorField, form: &Form) -> Result<Form> {
    ensure_same(u.grid(), form.grid())?;
    let g = u.grid();
    let uc = u.comps();
    Ok(match form {
        Form::Zero(f) => {
            let grad = g.grad(f.values());
            Form::Zero(ScalarField::from_raw(g, dot(uc, &grad)))
        }
        Form::One(a) => {
            let curl = g.curl(a.comps());
            let uxc = cross(uc, &curl);
            let grad = g.grad(&dot(uc, a.comps()));
            let c: Triple = [0, 1, 2].map(|i| {
                uxc[i].iter().zip(&grad[i]).map(|(p, q)| q - p).collect()
            });
            Form::One(OneForm::from_raw(g, c))
        }
        Form::Two(b) => {
            let curl = g.curl(&cross(uc, b.comps()));
            let div = g.div(b.comps());
            let udiv = scale(&div, uc);
            let c: Triple = [0, 1, 2].map(|i| {
                udiv[i].iter().zip(&curl[i]).map(|(p, q)| p - q).collect()
            });
            Form::Two(TwoForm::from_raw(g, c))
        }
        Form::Three(t) => {
            let flux = scale(t.density(), uc);
            Form::Three(ThreeForm::from_raw(g, g.div(&flux)))
        }
    })
}

/// Lie derivative by Cartan's formula `u⌟dω + d(u⌟ω)`, composed from the
/// exterior derivative and interior products above.
pub fn lie_cartan(u: &VectorField, form: &Form) -> Result<Form> {
    ensure_same(u.grid(), form.grid())?;
    Ok(match form {
        // u⌟f = 0 for a 0-form
        Form::Zero(f) => Form::Zero(interior1(u, &d0(f))?),
        Form::One(a) => {
            let first = interior2(u, &d1(a))?;
            let second = d0(&interior1(u, a)?);
            Form::One(OneForm::from_raw(u.grid(), add3(first.comps(), second.comps())))
        }
        Form::Two(b) => {
            let first = interior3(u, &d2(b))?;
            let second = d1(&interior2(u, b)?);
            Form::Two(TwoForm::from_raw(u.grid(), add3(first.comps(), second.comps())))
        }
        // dω = 0 for a 3-form
        Form::Three(t) => Form::Three(d2(&interior3(u, t)?)),
    })
}

fn add3(a: &Triple, b: &Triple) -> Triple {
    [0, 1, 2].map(|i| a[i].iter().zip(&b[i]).map(|(p, q)| p + q).collect())
}

/// `[X, Y]^i = X·∇Y^i − Y·∇X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    ensure_same(x.grid(), y.grid())?;
    let g = x.grid();
    let jx = g.jacobian(x.comps());
    let jy = g.jacobian(y.comps());
    let (xc, yc) = (x.comps(), y.comps());
    let n = g.len();
    let comps: Triple = [0, 1, 2].map(|i| {
        (0..n)
            .into_par_iter()
            .map(|p| {
                let mut s = 0.0;
                for j in 0..3 {
                    s += xc[j][p] * jy[j][i][p] - yc[j][p] * jx[j][i][p];
                }
                s
            })
            .collect()
    });
    Ok(VectorField::from_raw(g, comps))
}

/// Anything that can be integrated over the box: a scalar or a 3-form density.
pub trait Integrand {
    fn grid(&self) -> &Grid;
    fn integrand(&self) -> &[f64];
}

impl Integrand for ScalarField {
    fn grid(&self) -> &Grid {
        ScalarField::grid(self)
    }
    fn integrand(&self) -> &[f64] {
        self.values()
    }
}

impl Integrand for ThreeForm {
    fn grid(&self) -> &Grid {
        ThreeForm::grid(self)
    }
    fn integrand(&self) -> &[f64] {
        self.density()
    }
}

/// Cell sum times cell volume, accumulated in index order.
pub fn volume_integral<T: Integrand + ?Sized>(t: &T) -> f64 {
    integrate_raw(t.grid(), t.integrand())
}

pub(crate) fn integrate_raw(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}
