//! The scenario runs behind the acceptance criteria. Each run is executed at
//! most once per process and shared by every criterion that reads it.

use std::sync::OnceLock;

use crate::calculus::{d0, interior1, lie_direct, wedge11};
use crate::dynamics::{cfl_dt, rhs, MhdState};
use crate::error::{Error, Result};
use crate::forms::{Form, OneForm, TwoForm, VectorField};
use crate::invariants::{
    advection_snapshot, conservation_residual, godbillon_vey, nonlocal_cross_helicity,
    nonlocal_helicity, ConsLaw, Context, DiagnosticRecord, ResidualNorms, Snapshot,
};
use crate::lagrangian::ParticleSet;
use crate::scenario::{build_state, execute, ScenarioConfig};

/// Steps between observations in the acceptance runs.
pub const OBSERVE_EVERY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunId {
    /// Barotropic ABC flow in Bernoulli balance.
    AbcGas,
    /// Pressure-balanced stratified gas with a Clebsch flow, `r0 = 0`.
    StratGas,
    /// The same with `r0 = 0.1 sin z`.
    StratGasGauge,
    /// Magnetized stratified gas with a magnetic Clebsch potential.
    Mhd,
    /// The same run observed at every step.
    MhdEveryStep,
    /// Field-aligned flow with `B·∇S = 0` and a Clebsch perturbation.
    Aligned,
    /// Integrable potential `Ã = f∇g` in a steady ABC flow.
    Foliation,
}

impl RunId {
    pub const ALL: [RunId; 7] = [
        RunId::AbcGas,
        RunId::StratGas,
        RunId::StratGasGauge,
        RunId::Mhd,
        RunId::MhdEveryStep,
        RunId::Aligned,
        RunId::Foliation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunId::AbcGas => "abc_gas",
            RunId::StratGas => "stratified_gas",
            RunId::StratGasGauge => "stratified_gas_r0",
            RunId::Mhd => "mhd",
            RunId::MhdEveryStep => "mhd_every_step",
            RunId::Aligned => "aligned_mhd",
            RunId::Foliation => "foliation",
        }
    }

    fn config_text(self) -> &'static str {
        match self {
            RunId::AbcGas => {
                r#"
                eos.p0 = 10.0
                init.name = "abc_beltrami"
                init.params.bernoulli = 1.0
                "#
            }
            RunId::StratGas => {
                r#"
                eos.p0 = 10.0
                init.name = "stratified_blob"
                init.params.balance = 1.0
                particles.count = 64
                particles.diagnostics = ["S", "ertel", "hollmann"]
                "#
            }
            RunId::StratGasGauge => {
                r#"
                eos.p0 = 10.0
                init.name = "stratified_blob"
                init.params.balance = 1.0
                clebsch_init.r0 = { shape = "sin", amp = 0.1, k = [0.0, 0.0, 1.0] }
                "#
            }
            RunId::Mhd => {
                r#"
                eos.p0 = 10.0
                init.name = "stratified_blob"
                init.params.balance = 1.0
                init.params.b_amp = 0.2
                clebsch_init.Gamma0 = { shape = "abc", amp = 0.1, abc = [1.0, 0.5, 0.25] }
                particles.count = 64
                particles.diagnostics = ["S", "ertel_mhd", "magnetic_scalar", "cauchy_b"]
                "#
            }
            RunId::MhdEveryStep => {
                r#"
                eos.p0 = 10.0
                init.name = "stratified_blob"
                init.params.balance = 1.0
                init.params.b_amp = 0.2
                clebsch_init.Gamma0 = { shape = "abc", amp = 0.1, abc = [1.0, 0.5, 0.25] }
                "#
            }
            RunId::Aligned => {
                r#"
                eos.p0 = 10.0
                init.name = "aligned_ub"
                init.params.balance = 1.0
                clebsch_init.lambda0 = { shape = "cos", amp = 0.1, k = [0.0, 1.0, 0.0] }
                clebsch_init.mu0_field = { shape = "sin", amp = 1.0, k = [1.0, 0.0, 0.0] }
                "#
            }
            RunId::Foliation => {
                r#"
                eos.p0 = 10.0
                init.name = "gv_foliation"
                init.params.u_abc = 0.2
                init.params.bernoulli = 1.0
                "#
            }
        }
    }

    /// The run's configuration with a fixed step that puts observations at
    /// equal spacing and the last one exactly on `t_end`.
    pub fn config(self) -> Result<ScenarioConfig> {
        let text = format!("grid.n = 32\nrun.t_end = 1.0\n{}", self.config_text());
        let mut cfg = ScenarioConfig::from_toml(&text)?;
        let state = build_state(&cfg)?;
        let dt_cfl = cfl_dt(&state, cfg.run.cfl())?;
        let every = self.observe_every();
        let span = cfg.run.t_end / every as f64;
        let dt = span / (span / dt_cfl).ceil();
        cfg.run.dt = Some(dt);
        cfg.run.cfl = None;
        cfg.run.observer_every = every;
        Ok(cfg)
    }

    pub fn observe_every(self) -> usize {
        match self {
            RunId::MhdEveryStep | RunId::Foliation => 1,
            _ => OBSERVE_EVERY,
        }
    }

    fn index(self) -> usize {
        RunId::ALL.iter().position(|r| *r == self).unwrap()
    }
}

/// Density, flux divergence and source of a law at one observation.
#[derive(Debug, Clone)]
pub struct LawFrame {
    pub t: f64,
    pub density: Vec<f64>,
    pub div_flux: Vec<f64>,
    pub source: Vec<f64>,
}

impl LawFrame {
    fn new(t: f64, law: &ConsLaw) -> Self {
        Self {
            t,
            density: law.density.values().to_vec(),
            div_flux: law.flux_divergence(),
            source: law.source.values().to_vec(),
        }
    }

    /// Snapshot with the flux multiplied by `flux_sign`.
    fn snapshot(&self, flux_sign: f64) -> Snapshot {
        let div: Vec<f64> = self.div_flux.iter().map(|d| flux_sign * d).collect();
        let scale = (div.iter().map(|x| x * x).sum::<f64>() / div.len() as f64).sqrt();
        let rate = div.iter().zip(&self.source).map(|(d, q)| d - q).collect();
        Snapshot {
            t: self.t,
            value: vec![self.density.clone()],
            rate: vec![rate],
            scale,
        }
    }
}

/// Residual norms over a series read at every `stride`-th observation.
pub fn law_residual(frames: &[LawFrame], stride: usize, flux_sign: f64) -> Result<ResidualNorms> {
    let picked: Vec<Snapshot> = frames.iter().step_by(stride).map(|f| f.snapshot(flux_sign)).collect();
    let gap = spacing(picked.iter().map(|s| s.t))?;
    conservation_residual(&picked, gap)
}

pub fn advection_residual(series: &[Snapshot], stride: usize) -> Result<ResidualNorms> {
    let picked: Vec<Snapshot> = series.iter().step_by(stride).cloned().collect();
    let gap = spacing(picked.iter().map(|s| s.t))?;
    conservation_residual(&picked, gap)
}

fn spacing(times: impl Iterator<Item = f64>) -> Result<f64> {
    let t: Vec<f64> = times.collect();
    if t.len() < 3 {
        return Err(Error::IrregularSpacing(format!("only {} observations", t.len())));
    }
    Ok((t[t.len() - 1] - t[0]) / (t.len() - 1) as f64)
}

/// Everything the criteria read from one run.
#[derive(Debug)]
pub struct RunData {
    pub id: RunId,
    pub dt: f64,
    pub records: Vec<DiagnosticRecord>,
    pub initial: MhdState,
    /// Conservation laws resolved in space at every observation.
    pub laws: Vec<(&'static str, Vec<LawFrame>)>,
    /// Advected forms at every observation.
    pub advected: Vec<(&'static str, Vec<Snapshot>)>,
    /// Relative L2 gap between the solver's `∂B/∂t` and `−L_u B`.
    pub faraday: Vec<f64>,
}

impl RunData {
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.integral(name).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// `max_t |I(t) − I(0)| / |I(0)|`.
    pub fn relative_drift(&self, name: &str) -> f64 {
        let s = self.series(name);
        let i0 = s[0];
        s.iter().map(|v| (v - i0).abs()).fold(0.0, f64::max) / i0.abs()
    }

    pub fn max_of(&self, name: &str) -> f64 {
        self.series(name).into_iter().fold(f64::NAN, f64::max)
    }

    pub fn last(&self, name: &str) -> f64 {
        self.records.last().and_then(|r| r.integral(name)).unwrap_or(f64::NAN)
    }

    pub fn law(&self, name: &str) -> &[LawFrame] {
        &self.laws.iter().find(|(n, _)| *n == name).unwrap().1
    }

    pub fn advected(&self, name: &str) -> &[Snapshot] {
        &self.advected.iter().find(|(n, _)| *n == name).unwrap().1
    }
}

struct Collector {
    id: RunId,
    laws: Vec<(&'static str, Vec<LawFrame>)>,
    advected: Vec<(&'static str, Vec<Snapshot>)>,
    faraday: Vec<f64>,
}

impl Collector {
    fn new(id: RunId) -> Self {
        let (laws, advected): (Vec<&'static str>, Vec<&'static str>) = match id {
            RunId::StratGas => (vec!["nonlocal_helicity"], vec!["grad_s", "grad_s_wedge_w"]),
            RunId::StratGasGauge => (vec!["nonlocal_helicity"], vec![]),
            RunId::Mhd => (vec!["nonlocal_cross_helicity"], vec!["a_dot_b_over_rho"]),
            RunId::Foliation => (vec!["godbillon_vey"], vec![]),
            RunId::AbcGas | RunId::MhdEveryStep | RunId::Aligned => (vec![], vec![]),
        };
        Self {
            id,
            laws: laws.into_iter().map(|n| (n, Vec::new())).collect(),
            advected: advected.into_iter().map(|n| (n, Vec::new())).collect(),
            faraday: Vec::new(),
        }
    }

    fn observe(&mut self, state: &MhdState) -> Result<()> {
        let t = state.t;
        let g = state.grid();
        let ctx = Context::new(state)?;
        for (name, frames) in &mut self.laws {
            let law = match *name {
                "nonlocal_helicity" => nonlocal_helicity(&ctx).law,
                "nonlocal_cross_helicity" => nonlocal_cross_helicity(&ctx),
                "godbillon_vey" => godbillon_vey(state, crate::invariants::GV_FLOOR)?.law,
                _ => unreachable!(),
            };
            frames.push(LawFrame::new(t, &law));
        }
        for (name, series) in &mut self.advected {
            let form = match *name {
                "grad_s" => Form::One(d0(&state.s)),
                "grad_s_wedge_w" => {
                    // w = u − ∇φ + r∇S − u_M
                    let u = state.u.comps();
                    let r = state.r.values();
                    let w = [0, 1, 2].map(|i| {
                        (0..g.len())
                            .map(|p| u[i][p] - ctx.grad_phi[i][p] + r[p] * ctx.grad_s[i][p] - ctx.u_m[i][p])
                            .collect()
                    });
                    Form::Two(wedge11(&d0(&state.s), &OneForm::new(g, w)?)?)
                }
                "a_dot_b_over_rho" => {
                    let rho = state.rho.values();
                    let b = state.b.comps();
                    let x = VectorField::new(g, [0, 1, 2].map(|i| b[i].iter().zip(rho).map(|(v, r)| v / r).collect()))?;
                    Form::Zero(interior1(&x, &state.a_tilde)?)
                }
                _ => unreachable!(),
            };
            series.push(advection_snapshot(t, &state.u, &form)?);
        }
        if self.id == RunId::Mhd {
            let solver = rhs(state)?.b;
            let lie = lie_direct(&state.u, &Form::Two(state.b.clone()))?;
            let Form::Two(lie) = lie else { unreachable!() };
            self.faraday.push(relative_gap(&solver, &lie));
        }
        Ok(())
    }
}

/// `‖a + b‖ / ‖b‖`, the gap between `a` and `−b`.
fn relative_gap(a: &TwoForm, b: &TwoForm) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (ca, cb) in a.comps().iter().zip(b.comps()) {
        for (x, y) in ca.iter().zip(cb) {
            num += (x + y) * (x + y);
            den += y * y;
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn execute_run(id: RunId) -> Result<RunData> {
    let cfg = id.config()?;
    let initial = build_state(&cfg)?;
    let mut collector = Collector::new(id);
    let mut probe = |state: &MhdState, _: Option<&ParticleSet>| collector.observe(state);
    let start = std::time::Instant::now();
    let outcome = execute(&cfg, None, Some(&mut probe))?.into_result()?;
    log::info!(
        "acceptance run {} finished: {} steps in {:.1} s",
        id.name(),
        outcome.steps,
        start.elapsed().as_secs_f64()
    );
    Ok(RunData {
        id,
        dt: cfg.run.dt.unwrap(),
        records: outcome.records,
        initial,
        laws: collector.laws,
        advected: collector.advected,
        faraday: collector.faraday,
    })
}

static CACHE: [OnceLock<std::result::Result<RunData, String>>; RunId::ALL.len()] =
    [const { OnceLock::new() }; RunId::ALL.len()];

/// The data of run `id`, executing it on first use.
pub fn run_data(id: RunId) -> std::result::Result<&'static RunData, String> {
    CACHE[id.index()]
        .get_or_init(|| execute_run(id).map_err(|e| format!("{}: {e}", id.name())))
        .as_ref()
        .map_err(Clone::clone)
}
