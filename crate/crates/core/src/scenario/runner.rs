//! Run orchestration and on-disk artifacts.
//!
//! A run writes `config.toml`, `diagnostics.csv`, `particles.csv` (when
//! tracers are seeded), optional raw field dumps under `fields/`, and finally
//! `manifest.toml` listing every file with its SHA-256.

use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::ScenarioConfig;
use super::recipes::build_state;
use crate::dynamics::{cfl_dt, run, MhdState, Observer, Schedule, StageFields, StepControl};
use crate::error::{Error, Result};
use crate::forms::ScalarField;
use crate::invariants::{
    clebsch_velocity, conservation_residual, cross_helicity, ertel, ertel_mhd, fluid_helicity,
    generalized_integral, godbillon_vey, hollmann, magnetic_helicity, magnetic_scalar,
    nonlocal_cross_helicity, nonlocal_helicity, topological_charge_preset, total_energy,
    total_mass, ChargePreset, Context, DiagnosticRecord, Snapshot,
};
use crate::lagrangian::{advected_scalar_drift, cauchy_b, seed_particles, ParticleSet, Seeding};

/// Version of the CSV column layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Conservation laws tracked with residual columns, in column order.
pub const LAWS: [&str; 6] = [
    "fluid_helicity",
    "cross_helicity",
    "magnetic_helicity",
    "nonlocal_helicity",
    "nonlocal_cross_helicity",
    "godbillon_vey",
];

const FIXED_INTEGRALS: [&str; 13] = [
    "mass",
    "energy",
    "fluid_helicity",
    "fluid_helicity_source",
    "cross_helicity",
    "cross_helicity_source",
    "magnetic_helicity",
    "hopf_defect",
    "nonlocal_helicity",
    "nonlocal_cross_helicity",
    "godbillon_vey",
    "gv_defect",
    "clebsch_residual",
];

/// Names of the integral and residual columns (after `t`) for a config.
pub fn columns(cfg: &ScenarioConfig) -> (Vec<String>, Vec<String>) {
    let mut integrals: Vec<String> = FIXED_INTEGRALS.iter().map(|s| s.to_string()).collect();
    if cfg.diagnostics.charge_region.is_some() {
        integrals.push("charge_ertel".into());
        integrals.push("charge_entropy_b".into());
    }
    integrals.extend(cfg.diagnostics.integrals.iter().map(|i| i.name.clone()));
    if cfg.particles.count > 0 {
        for d in &cfg.particles.diagnostics {
            integrals.push(if d == "cauchy_b" {
                "cauchy_b_error".into()
            } else {
                format!("drift_{d}")
            });
        }
    }
    let residuals = LAWS.iter().map(|l| format!("{l}_res_L2")).collect();
    (integrals, residuals)
}

/// Eulerian field of a scalar particle diagnostic.
pub fn particle_field(ctx: &Context, name: &str) -> Result<ScalarField> {
    Ok(match name {
        "S" => ctx.state.s.clone(),
        "ertel" => ertel(ctx),
        "ertel_mhd" => ertel_mhd(ctx).value,
        "hollmann" => hollmann(ctx, false),
        "hollmann_mhd" => hollmann(ctx, true),
        "magnetic_scalar" => magnetic_scalar(ctx),
        other => return Err(Error::UnknownDiagnostic(other.to_string())),
    })
}

fn scalar_diagnostics(cfg: &ScenarioConfig) -> Vec<&str> {
    cfg.particles
        .diagnostics
        .iter()
        .map(|s| s.as_str())
        .filter(|d| *d != "cauchy_b")
        .collect()
}

/// Initial state plus tracers seeded on it (when `particles.count > 0`).
pub fn build_initial_state(cfg: &ScenarioConfig) -> Result<(MhdState, Option<ParticleSet>)> {
    let state = build_state(cfg)?;
    if cfg.particles.count == 0 {
        return Ok((state, None));
    }
    let ctx = Context::new(&state)?;
    let fields: Vec<(&str, ScalarField)> = scalar_diagnostics(cfg)
        .into_iter()
        .map(|d| Ok((d, particle_field(&ctx, d)?)))
        .collect::<Result<_>>()?;
    drop(ctx);
    let refs: Vec<(&str, &ScalarField)> = fields.iter().map(|(n, f)| (*n, f)).collect();
    let seeding = Seeding::Random {
        count: cfg.particles.count,
        seed: cfg.particles.seed,
    };
    let particles = seed_particles(&state, &seeding, &refs)?;
    Ok((state, Some(particles)))
}

/// Extra per-observation hook, used by the acceptance suite.
pub trait Probe {
    fn observe(&mut self, state: &MhdState, particles: Option<&ParticleSet>) -> Result<()>;
}

impl<F: FnMut(&MhdState, Option<&ParticleSet>) -> Result<()>> Probe for F {
    fn observe(&mut self, state: &MhdState, particles: Option<&ParticleSet>) -> Result<()> {
        self(state, particles)
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub records: Vec<DiagnosticRecord>,
    /// Last successfully observed state.
    pub state: MhdState,
    pub particles: Option<ParticleSet>,
    pub steps: usize,
    /// The step size when it is fixed for the run.
    pub dt: Option<f64>,
    /// Set when the run stopped early.
    pub error: Option<Error>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn last_valid_time(&self) -> f64 {
        self.state.t
    }

    pub fn into_result(self) -> Result<Self> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

struct Writers {
    dir: PathBuf,
    diagnostics: BufWriter<File>,
    particles: Option<BufWriter<File>>,
    files: Vec<PathBuf>,
}

impl Writers {
    fn create(dir: &Path, cfg: &ScenarioConfig, header: &[String]) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let config_path = dir.join("config.toml");
        fs::write(&config_path, cfg.to_toml()?)?;
        files.push(config_path);

        let diag_path = dir.join("diagnostics.csv");
        let mut diagnostics = BufWriter::new(File::create(&diag_path)?);
        writeln!(diagnostics, "t,{}", header.join(","))?;
        files.push(diag_path);

        let particles = if cfg.particles.count > 0 {
            let path = dir.join("particles.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            let mut cols = vec!["t", "id", "x", "y", "z", "jacobian", "acc_r", "acc_phi"]
                .into_iter()
                .map(String::from)
                .collect::<Vec<_>>();
            for d in &cfg.particles.diagnostics {
                if d == "cauchy_b" {
                    for c in ["b_x", "b_y", "b_z", "cauchy_b_x", "cauchy_b_y", "cauchy_b_z"] {
                        cols.push(c.into());
                    }
                } else {
                    cols.push(d.clone());
                    cols.push(format!("{d}_0"));
                }
            }
            writeln!(w, "{}", cols.join(","))?;
            files.push(path);
            Some(w)
        } else {
            None
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            diagnostics,
            particles,
            files,
        })
    }

    fn row(&mut self, rec: &DiagnosticRecord) -> Result<()> {
        let mut line = fmt(rec.t);
        for (_, v) in rec.integrals.iter().chain(&rec.residuals) {
            line.push(',');
            line.push_str(&fmt(*v));
        }
        writeln!(self.diagnostics, "{line}")?;
        Ok(())
    }

    fn dump(&mut self, index: usize, state: &MhdState) -> Result<()> {
        let dir = self.dir.join("fields").join(format!("obs_{index:05}"));
        fs::create_dir_all(&dir)?;
        let axes = ["x", "y", "z"];
        let mut named: Vec<(String, &[f64])> = vec![("rho".into(), state.rho.values())];
        let vectors = [
            ("u", state.u.comps()),
            ("B", state.b.comps()),
            ("A", state.a_tilde.comps()),
            ("Gamma", state.gamma_form.comps()),
        ];
        for (k, (prefix, c)) in vectors.iter().enumerate() {
            for a in 0..3 {
                named.push((format!("{prefix}_{}", axes[a]), c[a].as_slice()));
            }
            if k == 0 {
                named.push(("S".into(), state.s.values()));
            }
        }
        named.push(("phi".into(), state.phi.values()));
        named.push(("r".into(), state.r.values()));
        named.push(("lambda".into(), state.lambda.values()));
        named.push(("mu".into(), state.mu.values()));

        for (name, data) in &named {
            let path = dir.join(format!("{name}.bin"));
            let mut bytes = Vec::with_capacity(data.len() * 8);
            for v in data.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            fs::write(&path, bytes)?;
            self.files.push(path);
        }
        let g = state.grid();
        let header = toml::toml! {
            element = "f64"
            byte_order = "little"
            layout = "row-major, z fastest"
        };
        let mut table = header;
        table.insert("time".into(), toml::Value::Float(state.t));
        table.insert(
            "n".into(),
            toml::Value::Array(g.n().iter().map(|&v| toml::Value::Integer(v as i64)).collect()),
        );
        table.insert(
            "length".into(),
            toml::Value::Array(g.length().iter().map(|&v| toml::Value::Float(v)).collect()),
        );
        table.insert(
            "fields".into(),
            toml::Value::Array(named.iter().map(|(n, _)| toml::Value::String(n.clone())).collect()),
        );
        let path = dir.join("header.toml");
        fs::write(&path, toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)?;
        self.files.push(path);
        Ok(())
    }

    fn finish(mut self, cfg: &ScenarioConfig, outcome: &ManifestInfo) -> Result<Vec<PathBuf>> {
        self.diagnostics.flush()?;
        if let Some(p) = self.particles.as_mut() {
            p.flush()?;
        }
        drop(self.diagnostics);
        drop(self.particles);
        let mut table = toml::Table::new();
        table.insert("schema_version".into(), toml::Value::Integer(SCHEMA_VERSION as i64));
        table.insert("code_version".into(), toml::Value::String(env!("CARGO_PKG_VERSION").into()));
        table.insert("config_sha256".into(), toml::Value::String(config_hash(cfg)?));
        table.insert("status".into(), toml::Value::String(outcome.status.clone()));
        table.insert("last_valid_time".into(), toml::Value::Float(outcome.last_valid_time));
        table.insert("steps".into(), toml::Value::Integer(outcome.steps as i64));
        if let Some(msg) = &outcome.message {
            table.insert("message".into(), toml::Value::String(msg.clone()));
        }
        let mut entries = Vec::new();
        for f in &self.files {
            let bytes = fs::read(f)?;
            let mut e = toml::Table::new();
            let rel = f.strip_prefix(&self.dir).unwrap_or(f);
            e.insert("path".into(), toml::Value::String(rel.to_string_lossy().into_owned()));
            e.insert("bytes".into(), toml::Value::Integer(bytes.len() as i64));
            e.insert("sha256".into(), toml::Value::String(hex::encode(Sha256::digest(&bytes))));
            entries.push(toml::Value::Table(e));
        }
        table.insert("files".into(), toml::Value::Array(entries));
        let path = self.dir.join("manifest.toml");
        fs::write(&path, toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)?;
        let mut files = self.files;
        files.push(path);
        Ok(files)
    }
}

struct ManifestInfo {
    status: String,
    last_valid_time: f64,
    steps: usize,
    message: Option<String>,
}

/// SHA-256 of the canonical serialization of the config.
pub fn config_hash(cfg: &ScenarioConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(cfg.to_toml()?.as_bytes())))
}

/// Sliding window of three snapshots per law.
struct Window {
    laws: Vec<VecDeque<Option<Snapshot>>>,
}

impl Window {
    fn new() -> Self {
        Self {
            laws: (0..LAWS.len()).map(|_| VecDeque::new()).collect(),
        }
    }

    /// Push the newest snapshots and return the residuals at the previous
    /// observation, if three equally spaced snapshots are available.
    fn push(&mut self, snaps: Vec<Option<Snapshot>>) -> Vec<f64> {
        let mut out = Vec::with_capacity(LAWS.len());
        for (w, s) in self.laws.iter_mut().zip(snaps) {
            w.push_back(s);
            if w.len() > 3 {
                w.pop_front();
            }
            let mut value = f64::NAN;
            if w.len() == 3 && w.iter().all(|s| s.is_some()) {
                let s: Vec<Snapshot> = w.iter().map(|s| s.clone().unwrap()).collect();
                let (g1, g2) = (s[1].t - s[0].t, s[2].t - s[1].t);
                if (g1 - g2).abs() <= 1e-9 * g1.abs().max(1e-300) {
                    if let Ok(r) = conservation_residual(&s, 0.5 * (g1 + g2)) {
                        value = r.l2;
                    }
                }
            }
            out.push(value);
        }
        out
    }
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    magnetized: bool,
    integral_names: Vec<String>,
    residual_names: Vec<String>,
    particles: Option<ParticleSet>,
    b0_labels: Vec<[f64; 3]>,
    rho0_labels: Vec<f64>,
    writers: Option<Writers>,
    window: Window,
    pending: Option<DiagnosticRecord>,
    records: Vec<DiagnosticRecord>,
    last: MhdState,
    observations: usize,
    gv_warned: bool,
    probe: Option<&'a mut dyn Probe>,
}

impl Recorder<'_> {
    fn record(&mut self, state: &MhdState) -> Result<()> {
        let cfg = self.cfg;
        let ctx = Context::new(state)?;
        let nan = f64::NAN;
        let mut values: Vec<f64> = Vec::with_capacity(self.integral_names.len());
        let mut snaps: Vec<Option<Snapshot>> = Vec::with_capacity(LAWS.len());
        let t = state.t;

        values.push(total_mass(state));
        values.push(total_energy(state));
        let gas = !self.magnetized;
        let fh = fluid_helicity(&ctx);
        values.push(if gas { fh.integral() } else { nan });
        values.push(if gas { crate::calculus::integrate_raw(state.grid(), fh.source.values()) } else { nan });
        snaps.push(gas.then(|| fh.snapshot(t)));
        drop(fh);

        let ch = cross_helicity(&ctx);
        values.push(if gas { nan } else { ch.integral() });
        values.push(if gas { nan } else { crate::calculus::integrate_raw(state.grid(), ch.source.values()) });
        snaps.push((!gas).then(|| ch.snapshot(t)));
        drop(ch);

        let mh = magnetic_helicity(&ctx);
        values.push(if gas { nan } else { mh.law.integral() });
        values.push(if gas { nan } else { mh.hopf_defect });
        snaps.push((!gas).then(|| mh.law.snapshot(t)));
        drop(mh);

        let nl = nonlocal_helicity(&ctx);
        values.push(if gas { nl.law.integral() } else { nan });
        snaps.push(gas.then(|| nl.law.snapshot(t)));
        drop(nl);

        let nc = nonlocal_cross_helicity(&ctx);
        values.push(if gas { nan } else { nc.integral() });
        snaps.push((!gas).then(|| nc.snapshot(t)));
        drop(nc);

        match godbillon_vey(state, cfg.diagnostics.gv_floor) {
            Ok(gv) => {
                if let (Some(w), false) = (&gv.warning, self.gv_warned) {
                    log::warn!("t = {t}: {w}");
                    self.gv_warned = true;
                }
                values.push(gv.integral);
                values.push(gv.defect);
                snaps.push(Some(gv.law.snapshot(t)));
            }
            Err(Error::PotentialBelowFloor { .. }) => {
                values.push(nan);
                values.push(nan);
                snaps.push(None);
            }
            Err(e) => return Err(e),
        }
        values.push(clebsch_velocity(&ctx).velocity_residual);

        if let Some(region) = &cfg.diagnostics.charge_region {
            values.push(topological_charge_preset(&ctx, ChargePreset::Ertel, region)?);
            values.push(topological_charge_preset(&ctx, ChargePreset::EntropyB, region)?);
        }
        for i in &cfg.diagnostics.integrals {
            values.push(generalized_integral(&ctx, &i.spec())?);
        }

        if let Some(ps) = &self.particles {
            let mut rows: Vec<Vec<String>> = (0..ps.len())
                .map(|id| {
                    let x = ps.positions[id];
                    vec![
                        fmt(t),
                        id.to_string(),
                        fmt(x[0]),
                        fmt(x[1]),
                        fmt(x[2]),
                        fmt(crate::lagrangian::det3(&ps.deform[id])),
                        fmt(ps.acc_r[id]),
                        fmt(ps.acc_phi[id]),
                    ]
                })
                .collect();
            for d in &cfg.particles.diagnostics {
                if d == "cauchy_b" {
                    let eul = ps.sample_vector(&state.b.clone().into_vector());
                    let cb = cauchy_b(ps, &self.b0_labels, &self.rho0_labels)?;
                    let (mut num, mut den) = (0.0, 0.0);
                    for (id, row) in rows.iter_mut().enumerate() {
                        for a in 0..3 {
                            num += (cb[id].0[a] - eul[id][a]).powi(2);
                            den += eul[id][a].powi(2);
                            row.push(fmt(eul[id][a]));
                        }
                        row.extend(cb[id].0.iter().map(|v| fmt(*v)));
                    }
                    values.push((num / den.max(f64::MIN_POSITIVE)).sqrt());
                } else {
                    let current = ps.sample(&particle_field(&ctx, d)?);
                    values.push(advected_scalar_drift(ps, d, &current)?.max);
                    let base = &ps.samples0[d.as_str()].values;
                    for (id, row) in rows.iter_mut().enumerate() {
                        row.push(fmt(current[id]));
                        row.push(fmt(base[id]));
                    }
                }
            }
            if let Some(w) = self.writers.as_mut().and_then(|w| w.particles.as_mut()) {
                for row in rows {
                    writeln!(w, "{}", row.join(","))?;
                }
            }
        }
        drop(ctx);

        let residuals = self.window.push(snaps);
        if let Some(mut prev) = self.pending.take() {
            for (slot, v) in prev.residuals.iter_mut().zip(residuals) {
                slot.1 = v;
            }
            self.emit(prev)?;
        }
        self.pending = Some(DiagnosticRecord {
            t,
            integrals: self.integral_names.iter().cloned().zip(values).collect(),
            residuals: self.residual_names.iter().map(|n| (n.clone(), nan)).collect(),
        });

        if cfg.output.dump_fields && self.observations % cfg.output.dump_every == 0 {
            if let Some(w) = self.writers.as_mut() {
                w.dump(self.observations, state)?;
            }
        }
        self.observations += 1;
        if let Some(p) = self.probe.as_mut() {
            p.observe(state, self.particles.as_ref())?;
        }
        self.last = state.clone();
        Ok(())
    }

    fn emit(&mut self, rec: DiagnosticRecord) -> Result<()> {
        if let Some(w) = self.writers.as_mut() {
            w.row(&rec)?;
        }
        self.records.push(rec);
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(rec) = self.pending.take() {
            self.emit(rec)?;
        }
        Ok(())
    }
}

impl Observer for Recorder<'_> {
    fn observe(&mut self, state: &MhdState) -> Result<()> {
        self.record(state)
    }

    fn stage(&mut self, stage: usize, dt: f64, fields: &StageFields) -> Result<()> {
        match self.particles.as_mut() {
            Some(p) => p.stage(stage, dt, fields),
            None => Ok(()),
        }
    }

    fn step_done(&mut self, dt: f64) -> Result<()> {
        match self.particles.as_mut() {
            Some(p) => p.step_done(dt),
            None => Ok(()),
        }
    }
}

/// Run a scenario; artifacts go to `out_dir` when given. A numerical failure
/// during the run is returned inside the [`Outcome`] together with the
/// records and files produced up to that point.
pub fn execute<'a>(
    cfg: &'a ScenarioConfig,
    out_dir: Option<&Path>,
    probe: Option<&'a mut dyn Probe>,
) -> Result<Outcome> {
    cfg.validate()?;
    let (state, particles) = build_initial_state(cfg)?;
    let (integral_names, residual_names) = columns(cfg);
    let header: Vec<String> = integral_names.iter().chain(&residual_names).cloned().collect();
    let writers = match out_dir {
        Some(d) => Some(Writers::create(d, cfg, &header)?),
        None => None,
    };
    let (b0_labels, rho0_labels) = match &particles {
        Some(ps) if cfg.particles.diagnostics.iter().any(|d| d == "cauchy_b") => (
            crate::interp::interpolate_vector(&state.b.clone().into_vector(), &ps.labels),
            crate::interp::interpolate_scalar(&state.rho, &ps.labels),
        ),
        _ => (Vec::new(), Vec::new()),
    };

    let (control, fixed_dt) = match (cfg.run.dt, cfg.run.freeze_dt) {
        (Some(dt), _) => (StepControl::Fixed(dt), Some(dt)),
        (None, true) => {
            let dt = cfl_dt(&state, cfg.run.cfl())?;
            (StepControl::Fixed(dt), Some(dt))
        }
        (None, false) => (StepControl::Cfl(cfg.run.cfl()), None),
    };

    let mut rec = Recorder {
        cfg,
        magnetized: state.b.max_norm() > 0.0,
        integral_names,
        residual_names,
        particles,
        b0_labels,
        rho0_labels,
        writers,
        window: Window::new(),
        pending: None,
        records: Vec::new(),
        last: state.clone(),
        observations: 0,
        gv_warned: false,
        probe,
    };

    let t_end = state.t + cfg.run.t_end;
    let mut steps = 0;
    let mut error = None;
    if t_end > state.t {
        let result = rec.record(&state).and_then(|_| {
            run(state, t_end, control, Schedule::EverySteps(cfg.run.observer_every), &mut rec)
        });
        match result {
            Ok(summary) => steps = summary.steps,
            Err(e) => error = Some(e),
        }
    }
    rec.flush()?;

    let info = ManifestInfo {
        status: if error.is_some() { "failed" } else { "ok" }.into(),
        last_valid_time: rec.last.t,
        steps,
        message: error.as_ref().map(|e| e.to_string()),
    };
    let files = match rec.writers.take() {
        Some(w) => w.finish(cfg, &info)?,
        None => Vec::new(),
    };
    if let Some(e) = &error {
        log::error!("run stopped: {e}; last valid time {}", rec.last.t);
    }
    Ok(Outcome {
        records: rec.records,
        state: rec.last,
        particles: rec.particles,
        steps,
        dt: fixed_dt,
        error,
        files,
    })
}

/// Run with artifacts in `cfg.output.dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome> {
    execute(cfg, Some(&cfg.output.dir), None)
}
