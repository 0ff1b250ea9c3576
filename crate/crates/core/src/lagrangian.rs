//! Passive tracers: trajectories, deformation gradients `x_ij = ∂x^i/∂x0^j`
//! and the trajectory integrals `r = r0 − ∫T dt`, `φ = φ0 + ∫(½u² − h) dt`.
//!
//! Tracers are advanced by the same classical RK4 as the flow, using the
//! flow's own stage fields, so the joint system is integrated consistently.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{MhdState, Observer, StageFields};
use crate::error::{Error, Result};
use crate::forms::ScalarField;
use crate::interp::{Interpolant, Stencil};

pub type Mat3 = [[f64; 3]; 3];

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn matvec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// How tracers are placed.
#[derive(Debug, Clone)]
pub enum Seeding {
    /// `count` uniformly random positions from a ChaCha stream.
    Random { count: usize, seed: u64 },
    Positions(Vec<[f64; 3]>),
}

/// Per-tracer ODE state.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Tracer {
    x: [f64; 3],
    f: Mat3,
    r: f64,
    phi: f64,
}

impl Tracer {
    fn offset(&self, a: f64, k: &Tracer) -> Tracer {
        let mut f = self.f;
        for i in 0..3 {
            for j in 0..3 {
                f[i][j] += a * k.f[i][j];
            }
        }
        Tracer {
            x: [0, 1, 2].map(|i| self.x[i] + a * k.x[i]),
            f,
            r: self.r + a * k.r,
            phi: self.phi + a * k.phi,
        }
    }

    fn zero() -> Self {
        Tracer {
            x: [0.0; 3],
            f: [[0.0; 3]; 3],
            r: 0.0,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Pending {
    base: Vec<Tracer>,
    last: Vec<Tracer>,
    sum: Vec<Tracer>,
}

/// Cached t = 0 samples of one scalar diagnostic.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub values: Vec<f64>,
    /// Largest magnitude of the field over the grid at t = 0.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub t: f64,
    pub labels: Vec<[f64; 3]>,
    pub positions: Vec<[f64; 3]>,
    pub deform: Vec<Mat3>,
    pub acc_r: Vec<f64>,
    pub acc_phi: Vec<f64>,
    pub samples0: BTreeMap<String, Baseline>,
    pending: Option<Pending>,
}

/// Drift of an advected scalar along the tracers, relative to the t = 0
/// field's largest magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub max: f64,
    pub rms: f64,
}

pub fn seed_particles(
    state: &MhdState,
    seeding: &Seeding,
    diagnostics: &[(&str, &ScalarField)],
) -> Result<ParticleSet> {
    let g = state.grid();
    let labels = match seeding {
        Seeding::Random { count, seed } => {
            if *count == 0 {
                return Err(Error::InvalidParameter("particle count must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let len = g.length();
            (0..*count)
                .map(|_| [0, 1, 2].map(|a| rng.random::<f64>() * len[a]))
                .collect::<Vec<_>>()
        }
        Seeding::Positions(p) => {
            if p.is_empty() || p.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "particle positions must be finite and non-empty".into(),
                ));
            }
            p.clone()
        }
    };
    let n = labels.len();
    let r = Interpolant::of_scalar(&state.r);
    let phi = Interpolant::of_scalar(&state.phi);
    let mut set = ParticleSet {
        t: state.t,
        positions: labels.clone(),
        deform: vec![IDENTITY; n],
        acc_r: labels.iter().map(|&x| r.eval(x)).collect(),
        acc_phi: labels.iter().map(|&x| phi.eval(x)).collect(),
        labels,
        samples0: BTreeMap::new(),
        pending: None,
    };
    for (name, field) in diagnostics {
        set.cache_baseline(name, field);
    }
    Ok(set)
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn jacobians(&self) -> Vec<f64> {
        self.deform.iter().map(det3).collect()
    }

    /// Interpolate a field at the current positions.
    pub fn sample(&self, field: &ScalarField) -> Vec<f64> {
        let f = Interpolant::of_scalar(field);
        self.positions.par_iter().map(|&x| f.eval(x)).collect()
    }

    pub fn sample_vector(&self, field: &crate::forms::VectorField) -> Vec<[f64; 3]> {
        crate::interp::interpolate_vector(field, &self.positions)
    }

    /// Record the present samples of `field` as the reference for drift.
    pub fn cache_baseline(&mut self, name: &str, field: &ScalarField) {
        let values = self.sample(field);
        self.samples0.insert(
            name.to_string(),
            Baseline {
                values,
                scale: field.max_abs(),
            },
        );
    }

    fn tracers(&self) -> Vec<Tracer> {
        (0..self.len())
            .map(|p| Tracer {
                x: self.positions[p],
                f: self.deform[p],
                r: self.acc_r[p],
                phi: self.acc_phi[p],
            })
            .collect()
    }

    /// Feed RK4 stage `stage` (0..4) of a step of size `dt`.
    pub fn stage(&mut self, stage: usize, dt: f64, fields: &StageFields) -> Result<()> {
        const C: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
        const W: [f64; 4] = [1.0, 2.0, 2.0, 1.0];
        if stage == 0 {
            let base = self.tracers();
            let n = base.len();
            self.pending = Some(Pending {
                base,
                last: vec![Tracer::zero(); n],
                sum: vec![Tracer::zero(); n],
            });
        }
        let Some(pending) = self.pending.as_mut() else {
            return Err(Error::InvalidParameter("tracer stage fed out of order".into()));
        };
        let g = fields.grid;
        let u = [0, 1, 2].map(|a| Interpolant::from_parts(g, fields.u[a], fields.u_hat[a]));
        let temp = Interpolant::new(g, fields.temperature);
        let enth = Interpolant::new(g, fields.enthalpy);
        let k: Vec<Tracer> = pending
            .base
            .par_iter()
            .zip(&pending.last)
            .map(|(b, last)| {
                let y = b.offset(C[stage] * dt, last);
                let st = Stencil::new(g, y.x);
                let mut vel = [0.0; 3];
                let mut grad = [[0.0; 3]; 3];
                for a in 0..3 {
                    let (v, gr) = st.apply_with_gradient(&u[a]);
                    vel[a] = v;
                    grad[a] = gr;
                }
                let mut df = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        df[i][j] = (0..3).map(|m| grad[i][m] * y.f[m][j]).sum();
                    }
                }
                let u2 = vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2];
                Tracer {
                    x: vel,
                    f: df,
                    r: -st.apply(&temp),
                    phi: 0.5 * u2 - st.apply(&enth),
                }
            })
            .collect();
        for (s, kk) in pending.sum.iter_mut().zip(&k) {
            *s = s.offset(W[stage] / 6.0, kk);
        }
        pending.last = k;
        Ok(())
    }

    /// Close the step started by the last four stages.
    pub fn step_done(&mut self, dt: f64) -> Result<()> {
        let Some(p) = self.pending.take() else {
            return Err(Error::InvalidParameter("tracer step closed without stages".into()));
        };
        for (id, (b, s)) in p.base.iter().zip(&p.sum).enumerate() {
            let y = b.offset(dt, s);
            self.positions[id] = y.x;
            self.deform[id] = y.f;
            self.acc_r[id] = y.r;
            self.acc_phi[id] = y.phi;
        }
        self.t += dt;
        for (id, det) in self.jacobians().into_iter().enumerate() {
            if !(det > 0.0) {
                return Err(Error::Underresolved { id, det });
            }
        }
        Ok(())
    }
}

/// Advance by one step given the four RK4 stage field sets of `[t, t+dt]`.
pub fn advance_particles(pset: &mut ParticleSet, dt: f64, stages: [&StageFields; 4]) -> Result<()> {
    for (i, s) in stages.iter().enumerate() {
        pset.stage(i, dt, s)?;
    }
    pset.step_done(dt)
}

/// Cauchy's solution: `B^i = x_ij B0^j / J` and `ρ = ρ0 / J` per tracer.
pub fn cauchy_b(
    pset: &ParticleSet,
    b0_at_labels: &[[f64; 3]],
    rho0_at_labels: &[f64],
) -> Result<Vec<([f64; 3], f64)>> {
    if b0_at_labels.len() != pset.len() || rho0_at_labels.len() != pset.len() {
        return Err(Error::InvalidParameter(
            "label data must have one entry per particle".into(),
        ));
    }
    pset.deform
        .iter()
        .enumerate()
        .map(|(id, f)| {
            let j = det3(f);
            if !(j > 0.0) {
                return Err(Error::Underresolved { id, det: j });
            }
            let b = matvec(f, b0_at_labels[id]);
            Ok((b.map(|c| c / j), rho0_at_labels[id] / j))
        })
        .collect()
}

/// Compare present samples against the cached t = 0 values of `name`.
pub fn advected_scalar_drift(pset: &ParticleSet, name: &str, current: &[f64]) -> Result<Drift> {
    let base = pset
        .samples0
        .get(name)
        .ok_or_else(|| Error::UnknownDiagnostic(name.to_string()))?;
    if current.len() != base.values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples for {} particles",
            current.len(),
            base.values.len()
        )));
    }
    let scale = if base.scale > 0.0 { base.scale } else { 1.0 };
    let d: Vec<f64> = current
        .iter()
        .zip(&base.values)
        .map(|(a, b)| (a - b).abs() / scale)
        .collect();
    let max = d.iter().fold(0.0, |m: f64, v| m.max(*v));
    let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len().max(1) as f64).sqrt();
    Ok(Drift { max, rms })
}

/// Lets a tracer set ride along a [`crate::dynamics::run`] while another
/// observer receives the scheduled states.
pub struct Riding<'a, O: Observer> {
    pub particles: &'a mut ParticleSet,
    pub inner: O,
}

impl<O: Observer> Observer for Riding<'_, O> {
    fn observe(&mut self, state: &MhdState) -> Result<()> {
        self.inner.observe(state)
    }

    fn stage(&mut self, stage: usize, dt: f64, fields: &StageFields) -> Result<()> {
        self.particles.stage(stage, dt, fields)
    }

    fn step_done(&mut self, dt: f64) -> Result<()> {
        self.particles.step_done(dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Physics;
    use crate::forms::VectorField;
    use crate::grid::{Grid, C64};

    struct Steady {
        grid: Grid,
        u: [Vec<f64>; 3],
        u_hat: [Vec<C64>; 3],
        temperature: Vec<f64>,
        enthalpy: Vec<f64>,
    }

    impl Steady {
        fn new(u: &VectorField, temperature: f64, enthalpy: f64) -> Self {
            let g = u.grid().clone();
            let c = u.comps().clone();
            let u_hat = [0, 1, 2].map(|a| g.forward(&c[a]));
            Self {
                temperature: vec![temperature; g.len()],
                enthalpy: vec![enthalpy; g.len()],
                grid: g,
                u: c,
                u_hat,
            }
        }

        fn fields(&self) -> StageFields<'_> {
            StageFields {
                grid: &self.grid,
                t: 0.0,
                u_hat: [&self.u_hat[0], &self.u_hat[1], &self.u_hat[2]],
                u: [&self.u[0], &self.u[1], &self.u[2]],
                temperature: &self.temperature,
                enthalpy: &self.enthalpy,
            }
        }

        fn advance(&self, p: &mut ParticleSet, dt: f64, steps: usize) {
            let f = self.fields();
            for _ in 0..steps {
                advance_particles(p, dt, [&f, &f, &f, &f]).unwrap();
            }
        }
    }

    fn set_at(g: &Grid, x: Vec<[f64; 3]>) -> ParticleSet {
        let st = MhdState::at_rest(g, Physics::default());
        seed_particles(&st, &Seeding::Positions(x), &[]).unwrap()
    }

    #[test]
    fn seeding_contract() {
        let g = Grid::cubic(16).unwrap();
        let mut st = MhdState::at_rest(&g, Physics::default());
        st.r = ScalarField::from_fn(&g, |x, _, z| x.sin() + z.cos());
        let centre = [std::f64::consts::PI; 3];
        let p = seed_particles(&st, &Seeding::Positions(vec![centre]), &[]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.deform[0], IDENTITY);
        assert_eq!(p.positions[0], centre);

        let nodes: Vec<[f64; 3]> = [5usize, 77, 1000].iter().map(|&q| g.position(q)).collect();
        let p = seed_particles(&st, &Seeding::Positions(nodes), &[("r", &st.r)]).unwrap();
        for (k, &q) in [5usize, 77, 1000].iter().enumerate() {
            assert!((p.samples0["r"].values[k] - st.r.values()[q]).abs() < 1e-13);
            assert!((p.acc_r[k] - st.r.values()[q]).abs() < 1e-13);
        }

        let a = seed_particles(&st, &Seeding::Random { count: 50, seed: 9 }, &[]).unwrap();
        let b = seed_particles(&st, &Seeding::Random { count: 50, seed: 9 }, &[]).unwrap();
        assert_eq!(a.labels, b.labels);
        assert!(seed_particles(&st, &Seeding::Random { count: 0, seed: 9 }, &[]).is_err());
    }

    #[test]
    fn rest_and_uniform_translation() {
        let g = Grid::cubic(16).unwrap();
        let mut p = set_at(&g, vec![[1.0, 2.0, 3.0]]);
        Steady::new(&VectorField::zeros(&g), 1.5, 2.5).advance(&mut p, 0.1, 3);
        assert_eq!(p.positions[0], [1.0, 2.0, 3.0]);
        assert!((p.acc_phi[0] + 2.5 * 0.3).abs() < 1e-13);
        assert!((p.acc_r[0] + 1.5 * 0.3).abs() < 1e-13);

        let mut p = set_at(&g, vec![[1.0, 2.0, 3.0]]);
        Steady::new(&VectorField::constant(&g, [1.0, 0.0, 0.0]), 1.0, 1.0).advance(&mut p, 0.1, 1);
        assert!((p.positions[0][0] - 1.1).abs() < 1e-13);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.deform[0][i][j] - IDENTITY[i][j]).abs() < 1e-12);
            }
        }
        let c = cauchy_b(&p, &[[0.3, 0.2, 0.1]], &[2.0]).unwrap();
        assert!((c[0].0[0] - 0.3).abs() < 1e-12 && (c[0].1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shear_deformation_is_linear_in_time() {
        // u = (α sin y, 0, 0) near y = 0 behaves like the shear α y
        let g = Grid::cubic(32).unwrap();
        let alpha = 0.5;
        let u = VectorField::from_fn(&g, |_, y, _| [alpha * y.sin(), 0.0, 0.0]);
        let mut p = set_at(&g, vec![[1.0, 0.0, 2.0]]);
        Steady::new(&u, 1.0, 1.0).advance(&mut p, 0.05, 20);
        let f = p.deform[0];
        assert!((f[0][1] - alpha * 1.0).abs() < 1e-5, "{}", f[0][1]);
        assert!((f[0][0] - 1.0).abs() < 1e-10 && (f[1][1] - 1.0).abs() < 1e-10);
        assert!((det3(&f) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn round_trip_returns_to_labels() {
        let g = Grid::cubic(32).unwrap();
        let u = VectorField::from_fn(&g, |x, y, z| {
            [z.sin() + y.cos(), x.sin() + z.cos(), y.sin() + x.cos()]
        });
        let labels = vec![[0.3, 1.7, 4.0], [5.0, 2.2, 0.1], [3.3, 3.3, 3.3]];
        let mut p = set_at(&g, labels.clone());
        let flow = Steady::new(&u, 1.0, 1.0);
        flow.advance(&mut p, 0.02, 50);
        flow.advance(&mut p, -0.02, 50);
        for (x, x0) in p.positions.iter().zip(&labels) {
            for a in 0..3 {
                assert!((x[a] - x0[a]).abs() < 1e-5 * 2.0 * std::f64::consts::PI);
            }
        }
    }

    #[test]
    fn drift_statistics() {
        let g = Grid::cubic(16).unwrap();
        let st = MhdState::at_rest(&g, Physics::default());
        let s = ScalarField::from_fn(&g, |x, _, _| 2.0 * x.sin());
        let p = seed_particles(&st, &Seeding::Random { count: 10, seed: 1 }, &[("S", &s)]).unwrap();
        let d = advected_scalar_drift(&p, "S", &p.sample(&s)).unwrap();
        assert_eq!(d.max, 0.0);
        let shifted: Vec<f64> = p.samples0["S"].values.iter().map(|v| v + 0.02).collect();
        let d = advected_scalar_drift(&p, "S", &shifted).unwrap();
        assert!((d.max - 0.01).abs() < 1e-3 && (d.rms - 0.01).abs() < 1e-3);
        assert!(matches!(
            advected_scalar_drift(&p, "nope", &shifted),
            Err(Error::UnknownDiagnostic(_))
        ));
    }
}
