//! Scenario runs: plan resolution, time loop, snapshot and manifest output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::bgk::FrequencyMode;
use crate::boltzmann::{default_b0, plan_spectral};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::integrators::{Integrator, IntegratorPlan, RkTableau, StepStats};
use crate::phase_space::{Boundary, DistributionField};
use crate::planner::{plan_telescopic, plan_two_cluster, PlannerInput, PlannerMode};
use crate::scenario::{scenario, CollisionKind, IntegratorKind, Scenario};
use crate::system::{CollisionModel, KineticSystem};
use crate::weno::WenoConfig;

/// Everything needed to integrate one configured scenario.
#[derive(Debug)]
pub struct Simulation {
    pub scenario: Scenario,
    pub integrator: IntegratorKind,
    pub system: KineticSystem<f64>,
    pub plan: IntegratorPlan<f64>,
    pub field: DistributionField<f64>,
}

impl Simulation {
    /// Resolves the scenario, overrides and plan. Infeasible or inconsistent
    /// settings are reported here, before any stepping.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let mut sc = scenario(&cfg.scenario, cfg.preset)?;
        if let Some(e) = cfg.epsilon {
            sc.epsilon = e;
        }
        if let Some(c) = cfg.collision {
            sc.collision = c;
        }
        if let Some(nu) = cfg.nu {
            sc.frequency = nu;
            if cfg.collision.is_none() {
                sc.collision = CollisionKind::Bgk;
            }
        }
        if let Some(n) = cfg.n_theta {
            sc.n_theta = n;
        }
        if let Some(k) = cfg.weno_k {
            sc.weno_k = k;
        }
        if let Some(c) = cfg.cells {
            sc.cells = [c[0], if sc.space_dims == 2 { c[1] } else { 1 }];
        }
        if let Some(j) = cfg.velocities {
            sc.velocity_count = j;
        }
        if let Some(v) = cfg.extent {
            sc.velocity_extent = v;
        }
        if let Some(t) = cfg.end_time {
            sc.end_time = t;
        }
        if let Some(n) = cfg.snapshots {
            sc.snapshots = n;
        }
        let field = sc.initial_field()?;
        let collision = collision_model(&sc)?;
        let weno = WenoConfig::with_order(sc.weno_k)?;
        let system = KineticSystem::new(field.sgrid.clone(), field.vgrid.clone(), weno, collision, sc.epsilon)?;
        let integrator = cfg.integrator.unwrap_or(sc.plan.integrator);
        let plan = resolve_plan(&sc, integrator, cfg)?;
        Ok(Self {
            scenario: sc,
            integrator,
            system,
            plan,
            field,
        })
    }

    pub fn new_integrator(&self) -> Integrator<f64> {
        Integrator::new(self.plan.clone())
    }

    /// Number of outermost steps needed to reach the end time.
    pub fn outer_steps(&self) -> u64 {
        step_count(self.scenario.end_time, self.plan.outer_step())
    }
}

fn step_count(end: f64, h: f64) -> u64 {
    if end <= 0.0 {
        0
    } else {
        (end / h - 1e-9).ceil().max(1.0) as u64
    }
}

fn collision_model(sc: &Scenario) -> Result<CollisionModel<f64>> {
    Ok(match sc.collision {
        CollisionKind::None => CollisionModel::None,
        CollisionKind::Bgk => CollisionModel::Bgk(sc.frequency),
        CollisionKind::Boltzmann => {
            if sc.velocity_dims != 2 {
                return Err(Error::Config("the Boltzmann operator needs a two-dimensional velocity grid".into()));
            }
            let plan = plan_spectral(sc.velocity_count, sc.velocity_extent, sc.n_theta, default_b0())?;
            CollisionModel::Boltzmann(Arc::new(plan))
        }
    })
}

fn resolve_plan(sc: &Scenario, kind: IntegratorKind, cfg: &RunConfig) -> Result<IntegratorPlan<f64>> {
    let tableau = if kind.uses_rk4() {
        RkTableau::rk4()
    } else {
        RkTableau::forward_euler()
    };
    let dx = sc.sgrid()?.min_spacing();
    if !kind.is_projective() {
        let dt = cfg.dt.unwrap_or(sc.plan.dt_factor * dx);
        return IntegratorPlan::plain(dt, tableau);
    }
    let k = cfg.k.unwrap_or(sc.plan.k);
    let cfl = cfg.cfl.unwrap_or(sc.plan.cfl);
    let input = PlannerInput {
        epsilon: sc.epsilon,
        fastest_rate: sc.fastest_rate()?,
        dx,
        cfl,
        k,
        mode: if kind.is_telescopic() {
            PlannerMode::ZeroOneStable
        } else {
            PlannerMode::TwoCluster
        },
    };
    let h0 = cfg.h0.unwrap_or_else(|| input.inner_step());
    let untouched = kind == sc.plan.integrator && cfg.k.is_none() && cfg.cfl.is_none() && cfg.levels.is_none() && cfg.h0.is_none();
    let m = cfg.m.clone().or_else(|| if untouched { sc.plan.m.clone() } else { None });
    if let Some(m) = m {
        if !kind.is_telescopic() && m.len() != 1 {
            return Err(Error::Config(format!("a projective plan takes one extrapolation factor, got {}", m.len())));
        }
        return IntegratorPlan::new(h0, vec![k; m.len()], m, tableau);
    }
    if !kind.is_telescopic() {
        if cfg.h0.is_none() {
            return plan_two_cluster(&input, tableau);
        }
        let big = input.outer_step();
        if big <= (k + 1) as f64 * h0 {
            return Err(Error::Infeasible(format!(
                "outer step {big} does not exceed the {} damping steps of {h0}",
                k + 1
            )));
        }
        return IntegratorPlan::projective(h0, k, big, tableau);
    }
    let default_levels = if sc.plan.integrator.is_telescopic() { sc.plan.levels } else { 2 };
    let levels = cfg.levels.unwrap_or(default_levels);
    let input = PlannerInput {
        epsilon: h0 * input.fastest_rate,
        ..input
    };
    plan_telescopic(&input, Some(levels), None, tableau)
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotRecord {
    pub time: f64,
    pub file: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridRecord {
    pub space_dims: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub cells: [usize; 2],
    pub spacing: [f64; 2],
    pub boundary: [Boundary; 2],
    pub velocity_dims: usize,
    pub velocity_extent: f64,
    pub velocity_count: [usize; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanRecord {
    pub integrator: IntegratorKind,
    pub tableau: String,
    pub levels: usize,
    pub h: Vec<f64>,
    pub k: Vec<usize>,
    pub m: Vec<f64>,
    pub outer_step: f64,
    pub speedup: f64,
}

impl PlanRecord {
    pub fn new(kind: IntegratorKind, plan: &IntegratorPlan<f64>) -> Self {
        Self {
            integrator: kind,
            tableau: plan.tableau().name.clone(),
            levels: plan.levels(),
            h: plan.h().to_vec(),
            k: plan.k().to_vec(),
            m: plan.m().to_vec(),
            outer_step: plan.outer_step(),
            speedup: plan.speedup(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Rejection {
    pub time: f64,
    pub state_index: usize,
    pub cell: usize,
    pub velocity: usize,
    pub last_valid_time: f64,
    pub last_valid_file: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub preset: String,
    pub status: String,
    pub grid: GridRecord,
    pub collision: String,
    pub epsilon: f64,
    pub weno_k: usize,
    pub weno_delta: f64,
    pub plan: PlanRecord,
    pub end_time: f64,
    pub outer_steps: u64,
    pub stats: StepStats,
    pub wall_time_s: f64,
    pub snapshots: Vec<SnapshotRecord>,
    pub rejection: Option<Rejection>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn grid_record(sim: &Simulation) -> GridRecord {
    let s = &sim.system.sgrid;
    let v = &sim.system.vgrid;
    GridRecord {
        space_dims: s.dims(),
        lower: s.lower(),
        upper: s.upper(),
        cells: s.counts(),
        spacing: s.spacing(),
        boundary: s.boundary(),
        velocity_dims: v.dims(),
        velocity_extent: v.extent(),
        velocity_count: v.counts(),
    }
}

/// Column header of a snapshot for the given dimensions.
pub fn snapshot_header(space_dims: usize, velocity_dims: usize) -> String {
    let mut cols: Vec<&str> = vec!["x"];
    if space_dims == 2 {
        cols.push("y");
    }
    cols.extend(["rho", "ux"]);
    if velocity_dims == 2 {
        cols.push("uy");
    }
    cols.extend(["T", "qx"]);
    if velocity_dims == 2 {
        cols.push("qy");
    }
    cols.extend(["P", "E", "Ma"]);
    cols.join(",")
}

/// Writes the moment fields of `field` as CSV, one row per cell in storage order.
pub fn write_snapshot(path: &Path, time: f64, scenario: &str, field: &DistributionField<f64>) -> Result<()> {
    let sd = field.sgrid.dims();
    let vd = field.vgrid.dims();
    let mut out = String::new();
    writeln!(out, "# t={time:.16e} scenario={scenario}").unwrap();
    writeln!(out, "{}", snapshot_header(sd, vd)).unwrap();
    for (i, m) in field.moment_fields().iter().enumerate() {
        let c = field.sgrid.center(i);
        let mut row: Vec<f64> = c[..sd].to_vec();
        row.push(m.rho);
        row.extend_from_slice(&m.ubar[..vd]);
        row.push(m.temperature);
        row.extend_from_slice(&m.heat_flux[..vd]);
        row.extend([m.pressure, m.energy, m.mach]);
        let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Step indices at which snapshots are taken, evenly spread over `0..=total`.
pub fn snapshot_steps(total: u64, count: usize) -> Vec<u64> {
    if total == 0 {
        return vec![0];
    }
    let mut s: Vec<u64> = (0..count)
        .map(|i| ((i as f64) * total as f64 / (count - 1) as f64).round() as u64)
        .collect();
    s.dedup();
    s
}

/// Result of a run that ended with a manifest.
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// Set when a step was rejected; the manifest then has status `rejected`.
    pub error: Option<Error>,
}

/// Integrates a configured scenario, writing snapshots and `manifest.json`
/// into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let sim = Simulation::from_config(cfg)?;
    run_simulation(sim, &cfg.out)
}

pub fn run_simulation(sim: Simulation, out: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let start = Instant::now();
    let name = sim.scenario.name;
    let end = sim.scenario.end_time;
    let h = sim.plan.outer_step();
    let total = sim.outer_steps();
    let marks = snapshot_steps(total, sim.scenario.snapshots);
    let mut snapshots = Vec::new();
    let mut it = sim.new_integrator();
    let mut field = sim.field.clone();
    let mut last = field.values.clone();
    let mut last_time = 0.0;
    let mut error = None;
    let mut rejection = None;
    let snap_path = |n: usize| out.join(format!("snapshot_{n:02}.csv"));

    if marks[0] == 0 {
        let p = snap_path(0);
        write_snapshot(&p, 0.0, name, &field)?;
        snapshots.push(SnapshotRecord { time: 0.0, file: p });
    }
    let mut next = 1;
    let mut done = 0;
    for step in 1..=total {
        let t = if step == total { end } else { step as f64 * h };
        let dur = t - last_time;
        last.copy_from_slice(&field.values);
        it.set_time(last_time);
        match it.advance(&sim.system, &mut field.values, dur) {
            Ok(()) => {
                last_time = t;
                done = step;
            }
            Err(Error::StepRejected { index, time }) => {
                let p = out.join("last_valid.csv");
                field.values.copy_from_slice(&last);
                write_snapshot(&p, last_time, name, &field)?;
                let nv = field.n_velocities();
                rejection = Some(Rejection {
                    time,
                    state_index: index,
                    cell: index / nv,
                    velocity: index % nv,
                    last_valid_time: last_time,
                    last_valid_file: p,
                });
                error = Some(Error::StepRejected { index, time });
                break;
            }
            Err(e) => return Err(e),
        }
        if next < marks.len() && step == marks[next] {
            let p = snap_path(next);
            write_snapshot(&p, t, name, &field)?;
            snapshots.push(SnapshotRecord { time: t, file: p });
            next += 1;
        }
    }
    let manifest = RunManifest {
        scenario: name.to_string(),
        preset: sim.scenario.preset.to_string(),
        status: if error.is_some() { "rejected" } else { "completed" }.into(),
        grid: grid_record(&sim),
        collision: sim.system.collision.label(),
        epsilon: sim.scenario.epsilon,
        weno_k: sim.system.weno.k,
        weno_delta: sim.system.weno.delta,
        plan: PlanRecord::new(sim.integrator, &sim.plan),
        end_time: end,
        outer_steps: done,
        stats: it.stats().clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        snapshots,
        rejection,
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(RunOutcome { manifest, error })
}

/// Human-readable summary of a resolved plan.
pub fn describe_plan(sim: &Simulation) -> String {
    let p = &sim.plan;
    let mut s = String::new();
    writeln!(s, "scenario     {} ({})", sim.scenario.name, sim.scenario.preset).unwrap();
    writeln!(s, "integrator   {} ({} tableau)", sim.integrator, p.tableau().name).unwrap();
    writeln!(s, "collision    {}", sim.system.collision.label()).unwrap();
    writeln!(s, "epsilon      {:e}", sim.scenario.epsilon).unwrap();
    writeln!(s, "levels       {}", p.levels()).unwrap();
    for (l, h) in p.h().iter().enumerate() {
        if l < p.levels() {
            writeln!(s, "  h[{l}] = {h:.6e}  K = {}  M = {:.4}", p.k()[l], p.m()[l]).unwrap();
        } else {
            writeln!(s, "  h[{l}] = {h:.6e}  (outer step)").unwrap();
        }
    }
    writeln!(s, "outer steps  {}", sim.outer_steps()).unwrap();
    write!(s, "speedup      {:.4}", p.speedup()).unwrap();
    s
}

/// Which collision frequency label a BGK run uses.
pub fn frequency_label(f: &FrequencyMode<f64>) -> String {
    match f {
        FrequencyMode::Constant(nu) => format!("{nu}"),
        FrequencyMode::Density => "rho".into(),
    }
}
