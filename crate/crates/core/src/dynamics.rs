//! Ideal MHD / gas dynamics with the advected-gauge vector potential `Ã`,
//! the potential `Γ` and the Clebsch scalars `φ, r, λ̃, μ`.
//!
//! The state is advanced in spectral space. Momentum uses the rotational
//! form, and every product is dealiased before it re-enters the state:
//!
//! ```text
//! ρ_t = −∇·(ρu)
//! u_t = u×ω − ∇(h + ½u²) + T∇S + [(∇×B)×B + B(∇·B)]/(μ0 ρ)
//! S_t = −u·∇S
//! B_t = ∇×(u×B) − u(∇·B)
//! Ã_t = u×(∇×Ã) − ∇(u·Ã)
//! Γ_t = u×(∇×Γ) − ∇(Γ·u) − B/μ0
//! φ_t = −u·∇φ + ½u² − h        r_t = −u·∇r − T
//! λ̃_t = −u·∇λ̃                  μ_t = −u·∇μ
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{ensure_same, OneForm, ScalarField, TwoForm, VectorField};
use crate::grid::{Grid, C64};
use crate::thermo::EosParams;

/// Closure and vacuum permeability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub eos: EosParams,
    pub mu0: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            eos: EosParams::default(),
            mu0: 1.0,
        }
    }
}

impl Physics {
    pub fn validate(&self) -> Result<()> {
        self.eos.validate()?;
        if self.mu0 > 0.0 && self.mu0.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("mu0 must be positive, got {}", self.mu0)))
        }
    }
}

// Slots of the packed field list.
const RHO: usize = 0;
const U: usize = 1;
const S: usize = 4;
const B: usize = 5;
const A: usize = 8;
const GAMMA: usize = 11;
const PHI: usize = 14;
const R: usize = 15;
const LAMBDA: usize = 16;
const MU: usize = 17;
pub(crate) const NFIELDS: usize = 18;

#[derive(Debug, Clone)]
pub struct MhdState {
    pub t: f64,
    pub physics: Physics,
    pub rho: ScalarField,
    pub u: VectorField,
    pub s: ScalarField,
    pub b: TwoForm,
    pub a_tilde: OneForm,
    pub gamma_form: OneForm,
    pub phi: ScalarField,
    pub r: ScalarField,
    pub lambda: ScalarField,
    pub mu: ScalarField,
}

/// Time derivative of every dynamical field of an [`MhdState`].
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub rho: ScalarField,
    pub u: VectorField,
    pub s: ScalarField,
    pub b: TwoForm,
    pub a_tilde: OneForm,
    pub gamma_form: OneForm,
    pub phi: ScalarField,
    pub r: ScalarField,
    pub lambda: ScalarField,
    pub mu: ScalarField,
}

impl StateDerivative {
    pub fn is_finite(&self) -> bool {
        self.rho.is_finite()
            && self.u.is_finite()
            && self.s.is_finite()
            && self.b.is_finite()
            && self.a_tilde.is_finite()
            && self.gamma_form.is_finite()
            && self.phi.is_finite()
            && self.r.is_finite()
            && self.lambda.is_finite()
            && self.mu.is_finite()
    }
}

fn pack<'a>(
    rho: &'a [f64],
    u: &'a [Vec<f64>; 3],
    s: &'a [f64],
    b: &'a [Vec<f64>; 3],
    a: &'a [Vec<f64>; 3],
    gamma: &'a [Vec<f64>; 3],
    scalars: [&'a [f64]; 4],
) -> Vec<&'a [f64]> {
    let mut v: Vec<&[f64]> = Vec::with_capacity(NFIELDS);
    v.push(rho);
    v.extend(u.iter().map(|c| c.as_slice()));
    v.push(s);
    v.extend(b.iter().map(|c| c.as_slice()));
    v.extend(a.iter().map(|c| c.as_slice()));
    v.extend(gamma.iter().map(|c| c.as_slice()));
    v.extend(scalars);
    v
}

fn triple<T>(it: &mut impl Iterator<Item = Vec<T>>) -> [Vec<T>; 3] {
    [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
}

impl MhdState {
    /// A state at rest with uniform `ρ0` and `S0`, no field and zero potentials.
    pub fn at_rest(grid: &Grid, physics: Physics) -> Self {
        Self {
            t: 0.0,
            physics,
            rho: ScalarField::constant(grid, physics.eos.rho0),
            u: VectorField::zeros(grid),
            s: ScalarField::constant(grid, physics.eos.s0),
            b: TwoForm::zeros(grid),
            a_tilde: OneForm::zeros(grid),
            gamma_form: OneForm::zeros(grid),
            phi: ScalarField::zeros(grid),
            r: ScalarField::zeros(grid),
            lambda: ScalarField::zeros(grid),
            mu: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// Grid agreement, finiteness and positive density.
    pub fn validate(&self) -> Result<()> {
        let g = self.grid();
        for other in [
            self.u.grid(),
            self.s.grid(),
            self.b.grid(),
            self.a_tilde.grid(),
            self.gamma_form.grid(),
            self.phi.grid(),
            self.r.grid(),
            self.lambda.grid(),
            self.mu.grid(),
        ] {
            ensure_same(g, other)?;
        }
        self.physics.validate()?;
        check_fields(g, self.t, &self.packed())
    }

    fn packed(&self) -> Vec<&[f64]> {
        pack(
            self.rho.values(),
            self.u.comps(),
            self.s.values(),
            self.b.comps(),
            self.a_tilde.comps(),
            self.gamma_form.comps(),
            [
                self.phi.values(),
                self.r.values(),
                self.lambda.values(),
                self.mu.values(),
            ],
        )
    }

    pub(crate) fn to_spectral(&self) -> Spectral {
        Spectral {
            t: self.t,
            fields: self.grid().forward_many(&self.packed()),
        }
    }

    pub(crate) fn from_spectral(grid: &Grid, physics: Physics, sp: &Spectral) -> Self {
        let refs: Vec<&[C64]> = sp.fields.iter().map(|f| f.as_slice()).collect();
        let mut it = grid.inverse_many(&refs).into_iter();
        let rho = it.next().unwrap();
        let u = triple(&mut it);
        let s = it.next().unwrap();
        let b = triple(&mut it);
        let a = triple(&mut it);
        let gm = triple(&mut it);
        let mut scalar = || ScalarField::from_raw(grid, it.next().unwrap());
        let (phi, r, lambda, mu) = (scalar(), scalar(), scalar(), scalar());
        Self {
            t: sp.t,
            physics,
            rho: ScalarField::from_raw(grid, rho),
            u: VectorField::from_raw(grid, u),
            s: ScalarField::from_raw(grid, s),
            b: TwoForm::from_raw(grid, b),
            a_tilde: OneForm::from_raw(grid, a),
            gamma_form: OneForm::from_raw(grid, gm),
            phi,
            r,
            lambda,
            mu,
        }
    }
}

fn check_fields(grid: &Grid, t: f64, fields: &[&[f64]]) -> Result<()> {
    if let Some((p, &v)) = fields[RHO].iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        if v.is_finite() {
            return Err(Error::NonPositiveDensity {
                index: grid.unflat(p),
                value: v,
            });
        }
    }
    for (slot, f) in fields.iter().enumerate() {
        if let Some(p) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                t,
                last_valid_time: t,
                reason: format!("non-finite value in field slot {slot} at {:?}", grid.unflat(p)),
            });
        }
    }
    Ok(())
}

/// Spectral coefficients of all dynamical fields at one time.
#[derive(Debug, Clone)]
pub(crate) struct Spectral {
    pub t: f64,
    pub fields: Vec<Vec<C64>>,
}

impl Spectral {
    /// `self + a·k`, with the time advanced by `dt_time`.
    fn offset(&self, a: f64, k: &[Vec<C64>], dt_time: f64) -> Spectral {
        let fields = self
            .fields
            .par_iter()
            .zip(k)
            .map(|(y, d)| y.iter().zip(d).map(|(&y, &d)| y + d * a).collect())
            .collect();
        Spectral {
            t: self.t + dt_time,
            fields,
        }
    }
}

/// Physical fields available at an RK4 stage, for tracers riding along.
pub struct StageFields<'a> {
    pub grid: &'a Grid,
    pub t: f64,
    pub u_hat: [&'a [C64]; 3],
    pub u: [&'a [f64]; 3],
    pub temperature: &'a [f64],
    pub enthalpy: &'a [f64],
}

struct Stage {
    deriv: Vec<Vec<C64>>,
    u: [Vec<f64>; 3],
    temperature: Vec<f64>,
    enthalpy: Vec<f64>,
    max_speed: f64,
}

fn pointwise3(n: usize, f: impl Fn(usize) -> [f64; 3] + Sync + Send) -> [Vec<f64>; 3] {
    let rows: Vec<[f64; 3]> = (0..n).into_par_iter().map(f).collect();
    [0, 1, 2].map(|a| rows.iter().map(|r| r[a]).collect())
}

fn pointwise(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    (0..n).into_par_iter().map(f).collect()
}

#[inline]
fn cross_at(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3], p: usize) -> [f64; 3] {
    [
        a[1][p] * b[2][p] - a[2][p] * b[1][p],
        a[2][p] * b[0][p] - a[0][p] * b[2][p],
        a[0][p] * b[1][p] - a[1][p] * b[0][p],
    ]
}

#[inline]
fn dot_at(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3], p: usize) -> f64 {
    a[0][p] * b[0][p] + a[1][p] * b[1][p] + a[2][p] * b[2][p]
}

fn rhs_spectral(grid: &Grid, physics: &Physics, y: &Spectral) -> Result<Stage> {
    let n = grid.len();
    let f = &y.fields;

    // Physical values of the state and of the derivatives the products need.
    let mut spectra: Vec<&[C64]> = f.iter().map(|v| v.as_slice()).collect();
    let curl_u = grid.spectral_curl([&f[U], &f[U + 1], &f[U + 2]]);
    let curl_b = grid.spectral_curl([&f[B], &f[B + 1], &f[B + 2]]);
    let curl_a = grid.spectral_curl([&f[A], &f[A + 1], &f[A + 2]]);
    let curl_g = grid.spectral_curl([&f[GAMMA], &f[GAMMA + 1], &f[GAMMA + 2]]);
    let div_b = grid.spectral_div([&f[B], &f[B + 1], &f[B + 2]]);
    let grads: Vec<[Vec<C64>; 3]> = [S, PHI, R, LAMBDA, MU]
        .iter()
        .map(|&i| grid.spectral_grad(&f[i]))
        .collect();
    for c in [&curl_u, &curl_b, &curl_a, &curl_g] {
        spectra.extend(c.iter().map(|v| v.as_slice()));
    }
    spectra.push(&div_b);
    for g in &grads {
        spectra.extend(g.iter().map(|v| v.as_slice()));
    }
    let mut it = grid.inverse_many(&spectra).into_iter();
    let rho = it.next().unwrap();
    let u = triple(&mut it);
    let s = it.next().unwrap();
    let b = triple(&mut it);
    let a = triple(&mut it);
    let gm = triple(&mut it);
    let phi = it.next().unwrap();
    let r = it.next().unwrap();
    let lambda = it.next().unwrap();
    let mu = it.next().unwrap();
    let omega = triple(&mut it);
    let j = triple(&mut it);
    let ca = triple(&mut it);
    let cg = triple(&mut it);
    let divb = it.next().unwrap();
    let gs = triple(&mut it);
    let gphi = triple(&mut it);
    let gr = triple(&mut it);
    let glam = triple(&mut it);
    let gmu = triple(&mut it);

    check_fields(
        grid,
        y.t,
        &pack(&rho, &u, &s, &b, &a, &gm, [&phi, &r, &lambda, &mu]),
    )?;

    let eos = &physics.eos;
    let mu0 = physics.mu0;
    let thermo: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|p| {
            let tp = eos.point(rho[p], s[p]);
            (tp.t, tp.h, tp.p)
        })
        .collect();
    let temperature: Vec<f64> = thermo.iter().map(|x| x.0).collect();
    let enthalpy: Vec<f64> = thermo.iter().map(|x| x.1).collect();

    let max_speed = (0..n)
        .into_par_iter()
        .map(|p| {
            let u2 = dot_at(&u, &u, p);
            let b2 = dot_at(&b, &b, p);
            u2.sqrt() + (eos.gamma * thermo[p].2 / rho[p]).sqrt() + (b2 / (mu0 * rho[p])).sqrt()
        })
        .reduce(|| 0.0, f64::max);

    // Products, in transform order.
    let mass = pointwise3(n, |p| [rho[p] * u[0][p], rho[p] * u[1][p], rho[p] * u[2][p]]);
    let force = pointwise3(n, |p| {
        let uw = cross_at(&u, &omega, p);
        let jb = cross_at(&j, &b, p);
        let c = 1.0 / (mu0 * rho[p]);
        let tt = temperature[p];
        [0, 1, 2].map(|i| uw[i] + tt * gs[i][p] + c * (jb[i] + b[i][p] * divb[p]))
    });
    let bernoulli = pointwise(n, |p| enthalpy[p] + 0.5 * dot_at(&u, &u, p));
    let adv_s = pointwise(n, |p| dot_at(&u, &gs, p));
    let uxb = pointwise3(n, |p| cross_at(&u, &b, p));
    let udivb = pointwise3(n, |p| [0, 1, 2].map(|i| u[i][p] * divb[p]));
    let uxca = pointwise3(n, |p| cross_at(&u, &ca, p));
    let ua = pointwise(n, |p| dot_at(&u, &a, p));
    let uxcg = pointwise3(n, |p| cross_at(&u, &cg, p));
    let ug = pointwise(n, |p| dot_at(&u, &gm, p));
    let phi_src = pointwise(n, |p| {
        -dot_at(&u, &gphi, p) + 0.5 * dot_at(&u, &u, p) - enthalpy[p]
    });
    let r_src = pointwise(n, |p| -dot_at(&u, &gr, p) - temperature[p]);
    let lam_src = pointwise(n, |p| -dot_at(&u, &glam, p));
    let mu_src = pointwise(n, |p| -dot_at(&u, &gmu, p));

    let mut prods: Vec<&[f64]> = Vec::with_capacity(26);
    for t in [&mass, &force] {
        prods.extend(t.iter().map(|v| v.as_slice()));
    }
    prods.push(&bernoulli);
    prods.push(&adv_s);
    for t in [&uxb, &udivb, &uxca] {
        prods.extend(t.iter().map(|v| v.as_slice()));
    }
    prods.push(&ua);
    prods.extend(uxcg.iter().map(|v| v.as_slice()));
    prods.push(&ug);
    prods.extend([
        phi_src.as_slice(),
        r_src.as_slice(),
        lam_src.as_slice(),
        mu_src.as_slice(),
    ]);
    let mut h = grid.forward_many(&prods).into_iter();
    let mass_h = triple(&mut h);
    let force_h = triple(&mut h);
    let bern_h = h.next().unwrap();
    let adv_s_h = h.next().unwrap();
    let uxb_h = triple(&mut h);
    let udivb_h = triple(&mut h);
    let uxca_h = triple(&mut h);
    let ua_h = h.next().unwrap();
    let uxcg_h = triple(&mut h);
    let ug_h = h.next().unwrap();

    let neg = |v: &[C64]| -> Vec<C64> { v.iter().map(|c| -c).collect() };
    let combine = |a: &[C64], sa: f64, b: &[C64], sb: f64| -> Vec<C64> {
        a.iter().zip(b).map(|(&x, &y)| x * sa + y * sb).collect()
    };

    let mut d: Vec<Vec<C64>> = Vec::with_capacity(NFIELDS);
    d.push(neg(&grid.spectral_div([&mass_h[0], &mass_h[1], &mass_h[2]])));
    let gb = grid.spectral_grad(&bern_h);
    for i in 0..3 {
        d.push(combine(&force_h[i], 1.0, &gb[i], -1.0));
    }
    d.push(neg(&adv_s_h));
    let cb = grid.spectral_curl([&uxb_h[0], &uxb_h[1], &uxb_h[2]]);
    for i in 0..3 {
        d.push(combine(&cb[i], 1.0, &udivb_h[i], -1.0));
    }
    let gua = grid.spectral_grad(&ua_h);
    for i in 0..3 {
        d.push(combine(&uxca_h[i], 1.0, &gua[i], -1.0));
    }
    let gug = grid.spectral_grad(&ug_h);
    for i in 0..3 {
        let partial = combine(&uxcg_h[i], 1.0, &gug[i], -1.0);
        d.push(combine(&partial, 1.0, &f[B + i], -1.0 / mu0));
    }
    d.extend(h);
    debug_assert_eq!(d.len(), NFIELDS);
    d.par_iter_mut().for_each(|v| grid.dealias(v));

    Ok(Stage {
        deriv: d,
        u,
        temperature,
        enthalpy,
        max_speed,
    })
}

/// Right-hand side of the evolution system at `state`.
pub fn rhs(state: &MhdState) -> Result<StateDerivative> {
    state.validate()?;
    let g = state.grid();
    let stage = rhs_spectral(g, &state.physics, &state.to_spectral())?;
    let as_state = MhdState::from_spectral(
        g,
        state.physics,
        &Spectral {
            t: state.t,
            fields: stage.deriv,
        },
    );
    Ok(StateDerivative {
        rho: as_state.rho,
        u: as_state.u,
        s: as_state.s,
        b: as_state.b,
        a_tilde: as_state.a_tilde,
        gamma_form: as_state.gamma_form,
        phi: as_state.phi,
        r: as_state.r,
        lambda: as_state.lambda,
        mu: as_state.mu,
    })
}

/// Largest signal speed `|u| + c_s + |B|/√(μ0ρ)` over the grid.
pub fn max_signal_speed(state: &MhdState) -> f64 {
    let eos = &state.physics.eos;
    let (rho, s) = (state.rho.values(), state.s.values());
    let (u, b) = (state.u.comps(), state.b.comps());
    (0..state.grid().len())
        .into_par_iter()
        .map(|p| {
            (dot_at(u, u, p)).sqrt()
                + eos.sound_speed_sq(rho[p], s[p]).sqrt()
                + (dot_at(b, b, p) / (state.physics.mu0 * rho[p])).sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

fn dt_from_speed(grid: &Grid, cfl: f64, speed: f64) -> f64 {
    let h = grid.min_spacing();
    if speed > 0.0 {
        cfl * h / speed
    } else {
        cfl * h
    }
}

pub fn cfl_dt(state: &MhdState, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1), got {cfl}")));
    }
    Ok(dt_from_speed(state.grid(), cfl, max_signal_speed(state)))
}

/// Receives RK4 stage data and step completions; used by tracers.
pub trait StageHook {
    /// Called once per stage (0..4) with the stage time and fields.
    fn stage(&mut self, stage: usize, dt: f64, fields: &StageFields) -> Result<()>;
    fn step_done(&mut self, dt: f64) -> Result<()>;
}

struct NoHook;

impl StageHook for NoHook {
    fn stage(&mut self, _: usize, _: f64, _: &StageFields) -> Result<()> {
        Ok(())
    }
    fn step_done(&mut self, _: f64) -> Result<()> {
        Ok(())
    }
}

fn stage_view<'a>(grid: &'a Grid, y: &'a Spectral, st: &'a Stage) -> StageFields<'a> {
    StageFields {
        grid,
        t: y.t,
        u_hat: [&y.fields[U], &y.fields[U + 1], &y.fields[U + 2]],
        u: [&st.u[0], &st.u[1], &st.u[2]],
        temperature: &st.temperature,
        enthalpy: &st.enthalpy,
    }
}

/// One classical RK4 step. `first` is the stage-1 evaluation at `y`.
fn rk4(
    grid: &Grid,
    physics: &Physics,
    y: &Spectral,
    first: Stage,
    dt: f64,
    hook: &mut dyn StageHook,
) -> Result<Spectral> {
    hook.stage(0, dt, &stage_view(grid, y, &first))?;
    let k1 = first.deriv;
    let y2 = y.offset(0.5 * dt, &k1, 0.5 * dt);
    let s2 = rhs_spectral(grid, physics, &y2)?;
    hook.stage(1, dt, &stage_view(grid, &y2, &s2))?;
    let k2 = s2.deriv;
    let y3 = y.offset(0.5 * dt, &k2, 0.5 * dt);
    let s3 = rhs_spectral(grid, physics, &y3)?;
    hook.stage(2, dt, &stage_view(grid, &y3, &s3))?;
    let k3 = s3.deriv;
    let y4 = y.offset(dt, &k3, dt);
    let s4 = rhs_spectral(grid, physics, &y4)?;
    hook.stage(3, dt, &stage_view(grid, &y4, &s4))?;
    let k4 = s4.deriv;
    let c = dt / 6.0;
    let fields = (0..NFIELDS)
        .into_par_iter()
        .map(|i| {
            (0..y.fields[i].len())
                .map(|p| {
                    y.fields[i][p]
                        + (k1[i][p] + (k2[i][p] + k3[i][p]) * 2.0 + k4[i][p]) * c
                })
                .collect()
        })
        .collect();
    hook.step_done(dt)?;
    Ok(Spectral { t: y.t + dt, fields })
}

pub fn step_rk4(state: &MhdState, dt: f64) -> Result<MhdState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    state.validate()?;
    let g = state.grid();
    let y = state.to_spectral();
    let first = rhs_spectral(g, &state.physics, &y)?;
    let next = rk4(g, &state.physics, &y, first, dt, &mut NoHook)?;
    Ok(MhdState::from_spectral(g, state.physics, &next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Adaptive step from the CFL number.
    Cfl(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Observe at `t0 + k·interval` (steps are shortened to land there).
    Interval(f64),
    /// Observe every `n` steps.
    EverySteps(usize),
}

/// Receives the state at scheduled times; also a stage hook for tracers.
pub trait Observer {
    fn observe(&mut self, state: &MhdState) -> Result<()>;

    fn stage(&mut self, _stage: usize, _dt: f64, _fields: &StageFields) -> Result<()> {
        Ok(())
    }

    fn step_done(&mut self, _dt: f64) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&MhdState) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &MhdState) -> Result<()> {
        self(state)
    }
}

struct HookAdapter<'a>(&'a mut dyn Observer);

impl StageHook for HookAdapter<'_> {
    fn stage(&mut self, stage: usize, dt: f64, fields: &StageFields) -> Result<()> {
        self.0.stage(stage, dt, fields)
    }
    fn step_done(&mut self, dt: f64) -> Result<()> {
        self.0.step_done(dt)
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub state: MhdState,
    pub steps: usize,
    pub observations: usize,
}

/// Relative slack for snapping a step onto an observation or the end time.
const SNAP: f64 = 1e-9;

/// Advance to `t_end`, observing on `schedule` and once at the end. Errors
/// during the run are reported as blowups carrying the last valid time.
pub fn run(
    state: MhdState,
    t_end: f64,
    control: StepControl,
    schedule: Schedule,
    observer: &mut dyn Observer,
) -> Result<RunSummary> {
    state.validate()?;
    if !(t_end >= state.t) {
        return Err(Error::InvalidParameter(format!(
            "t_end {t_end} precedes the state time {}",
            state.t
        )));
    }
    match control {
        StepControl::Cfl(c) if !(c > 0.0 && c < 1.0) => {
            return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1), got {c}")))
        }
        StepControl::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")))
        }
        _ => {}
    }
    match schedule {
        Schedule::Interval(iv) if !(iv > 0.0) => {
            return Err(Error::InvalidParameter(format!("observer interval must be positive, got {iv}")))
        }
        Schedule::EverySteps(0) => {
            return Err(Error::InvalidParameter("observer step count must be positive".into()))
        }
        _ => {}
    }

    let grid = state.grid().clone();
    let physics = state.physics;
    let t0 = state.t;
    if t_end == t0 {
        return Ok(RunSummary {
            state,
            steps: 0,
            observations: 0,
        });
    }

    let mut y = state.to_spectral();
    let mut steps = 0usize;
    let mut observations = 0usize;
    let mut next_obs_index = 1usize;
    let blowup = |e: Error, t: f64, last: f64| match e {
        Error::Blowup { reason, .. } => Error::Blowup {
            t,
            last_valid_time: last,
            reason,
        },
        Error::NonPositiveDensity { index, value } => Error::Blowup {
            t,
            last_valid_time: last,
            reason: format!("non-positive density {value} at {index:?}"),
        },
        other => other,
    };

    loop {
        let first = rhs_spectral(&grid, &physics, &y).map_err(|e| blowup(e, y.t, y.t))?;
        let mut dt = match control {
            StepControl::Cfl(c) => dt_from_speed(&grid, c, first.max_speed),
            StepControl::Fixed(dt) => dt,
        };
        let mut target = t_end;
        if let Schedule::Interval(iv) = schedule {
            target = target.min(t0 + next_obs_index as f64 * iv);
        }
        let mut landed = false;
        if y.t + dt * (1.0 + SNAP) >= target {
            dt = target - y.t;
            landed = true;
        }
        let t_before = y.t;
        let mut next = rk4(&grid, &physics, &y, first, dt, &mut HookAdapter(observer))
            .map_err(|e| blowup(e, t_before + dt, t_before))?;
        if landed {
            next.t = target;
        }
        y = next;
        steps += 1;

        let finished = landed && target == t_end;
        let scheduled = match schedule {
            Schedule::Interval(iv) => {
                let hit = landed && y.t == t0 + next_obs_index as f64 * iv;
                if hit {
                    next_obs_index += 1;
                }
                hit
            }
            Schedule::EverySteps(k) => steps % k == 0,
        };
        if scheduled || finished {
            let st = MhdState::from_spectral(&grid, physics, &y);
            observer.observe(&st)?;
            observations += 1;
        }
        if finished {
            return Ok(RunSummary {
                state: MhdState::from_spectral(&grid, physics, &y),
                steps,
                observations,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{d1, volume_integral};
    use std::f64::consts::PI;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn static_gas_only_drives_potentials() {
        let g = Grid::cubic(8).unwrap();
        let st = MhdState::at_rest(&g, Physics::default());
        let d = rhs(&st).unwrap();
        for v in [
            d.rho.values(),
            d.s.values(),
            d.lambda.values(),
            d.mu.values(),
        ] {
            assert!(max_abs(v) < 1e-13);
        }
        for t in [d.u.comps(), d.b.comps(), d.a_tilde.comps(), d.gamma_form.comps()] {
            assert!(t.iter().all(|c| max_abs(c) < 1e-13));
        }
        assert!(d.phi.values().iter().all(|v| (v + 2.5).abs() < 1e-13));
        assert!(d.r.values().iter().all(|v| (v + 1.5).abs() < 1e-13));
    }

    #[test]
    fn uniform_scalars_stay_put_under_potential_flow() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.u = VectorField::from_fn(&g, |x, _, _| [0.01 * x.cos(), 0.0, 0.0]);
        st.lambda = ScalarField::constant(&g, 0.3);
        let d = rhs(&st).unwrap();
        assert!(max_abs(d.s.values()) < 1e-15);
        assert!(max_abs(d.lambda.values()) < 1e-15);
    }

    fn abc(x: f64, y: f64, z: f64) -> [f64; 3] {
        [z.sin() + y.cos(), x.sin() + z.cos(), y.sin() + x.cos()]
    }

    #[test]
    fn force_free_field_is_an_equilibrium() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.b = TwoForm::from_fn(&g, abc);
        st.a_tilde = OneForm::from_fn(&g, abc);
        let d = rhs(&st).unwrap();
        assert!(d.u.comps().iter().all(|c| max_abs(c) < 1e-12));
        assert!(d.b.comps().iter().all(|c| max_abs(c) < 1e-12));
        let next = step_rk4(&st, 0.01).unwrap();
        for a in 0..3 {
            for p in 0..g.len() {
                assert!((next.b.comps()[a][p] - st.b.comps()[a][p]).abs() < 1e-13);
                assert!(next.u.comps()[a][p].abs() < 1e-13);
            }
        }
        assert!((next.t - 0.01).abs() < 1e-16);
    }

    /// Pressure-balanced entropy wave in a uniform stream: a rigid translation.
    fn entropy_wave(g: &Grid) -> MhdState {
        let phys = Physics::default();
        let mut st = MhdState::at_rest(g, phys);
        st.s = ScalarField::from_fn(g, |x, _, _| x.sin());
        st.rho = ScalarField::from_fn(g, |x, _, _| phys.eos.rho_from_pressure(1.0, x.sin()));
        st.u = VectorField::constant(g, [1.0, 0.0, 0.0]);
        st
    }

    #[test]
    fn linear_advection_returns_after_one_period() {
        let g = Grid::new([32, 8, 8], [2.0 * PI; 3], 2.0 / 3.0).unwrap();
        let st0 = entropy_wave(&g);
        let dt = 2.0 * PI / 1000.0;
        let mut st = st0.clone();
        for _ in 0..1000 {
            st = step_rk4(&st, dt).unwrap();
        }
        let err = st
            .s
            .values()
            .iter()
            .zip(st0.s.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn rk4_is_fourth_order() {
        let g = Grid::cubic(8).unwrap();
        let mut st0 = MhdState::at_rest(&g, Physics::default());
        st0.u = VectorField::from_fn(&g, |x, y, z| {
            let a = abc(x, y, z);
            [0.3 * a[0], 0.3 * a[1], 0.3 * a[2]]
        });
        st0.s = ScalarField::from_fn(&g, |_, _, z| 0.2 * z.sin());
        let advance = |nsteps: usize| {
            let dt = 0.4 / nsteps as f64;
            let mut st = st0.clone();
            for _ in 0..nsteps {
                st = step_rk4(&st, dt).unwrap();
            }
            st
        };
        let reference = advance(256);
        let err = |st: &MhdState| {
            (0..3)
                .map(|a| {
                    st.u.comps()[a]
                        .iter()
                        .zip(&reference.u.comps()[a])
                        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(&advance(8)), err(&advance(16)));
        let ratio = e1 / e2;
        assert!(ratio > 13.0 && ratio < 19.0, "ratio {ratio}");
    }

    #[test]
    fn cfl_for_static_gas() {
        let g = Grid::cubic(16).unwrap();
        let st = MhdState::at_rest(&g, Physics::default());
        let dt = cfl_dt(&st, 0.25).unwrap();
        let want = 0.25 * g.min_spacing() / (5.0f64 / 3.0).sqrt();
        assert!((dt - want).abs() < 1e-15);
        assert!(cfl_dt(&st, 1.5).is_err());

        let mut weak = st.clone();
        weak.b = TwoForm::constant(&g, [0.5, 0.0, 0.0]);
        let mut strong = st.clone();
        strong.b = TwoForm::constant(&g, [1.0, 0.0, 0.0]);
        assert!(cfl_dt(&strong, 0.25).unwrap() < cfl_dt(&weak, 0.25).unwrap());
    }

    #[test]
    fn run_schedule_edges() {
        let g = Grid::cubic(8).unwrap();
        let st = MhdState::at_rest(&g, Physics::default());
        let times = |end: f64, control, schedule| {
            let mut seen = Vec::new();
            let mut obs = |s: &MhdState| {
                seen.push(s.t);
                Ok(())
            };
            let out = run(st.clone(), end, control, schedule, &mut obs).unwrap();
            (seen, out)
        };
        let (seen, out) = times(0.0, StepControl::Cfl(0.25), Schedule::Interval(0.1));
        assert_eq!(out.steps, 0);
        assert!(seen.is_empty());

        let (seen, out) = times(0.05, StepControl::Fixed(0.02), Schedule::Interval(1.0));
        assert_eq!(seen, vec![0.05]);
        assert_eq!(out.state.t, 0.05);
        assert_eq!(out.steps, 3);

        let (seen, _) = times(0.1, StepControl::Fixed(0.01), Schedule::Interval(0.05));
        assert_eq!(seen, vec![0.05, 0.1]);
    }

    #[test]
    fn blowup_reports_last_valid_time() {
        let g = Grid::cubic(8).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        // a compressive jet that empties cells in one large step
        st.u = VectorField::from_fn(&g, |x, _, _| [40.0 * x.sin(), 0.0, 0.0]);
        let mut obs = |_: &MhdState| Ok(());
        let err = run(st, 1.0, StepControl::Fixed(0.5), Schedule::EverySteps(1), &mut obs)
            .unwrap_err();
        match err {
            Error::Blowup { last_valid_time, .. } => assert!(last_valid_time >= 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mass_and_solenoidality_are_kept() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.u = VectorField::from_fn(&g, |x, y, z| {
            [0.2 * (y.sin() + z.cos()), 0.2 * x.cos() * z.sin(), 0.1 * (x + y).sin()]
        });
        st.a_tilde = OneForm::from_fn(&g, |x, y, z| {
            let a = abc(x, y, z);
            [0.3 * a[0], 0.3 * a[1], 0.3 * a[2]]
        });
        st.b = d1(&st.a_tilde);
        st.s = ScalarField::from_fn(&g, |x, _, z| 0.1 * (x + z).cos());
        let m0 = volume_integral(&st.rho);
        let mut obs = |_: &MhdState| Ok(());
        let out = run(st, 0.2, StepControl::Cfl(0.25), Schedule::EverySteps(1000), &mut obs).unwrap();
        let m1 = volume_integral(&out.state.rho);
        assert!(((m1 - m0) / m0).abs() < 1e-13);
        let divb = g.div(out.state.b.comps());
        assert!(max_abs(&divb) < 1e-10);
    }
}
