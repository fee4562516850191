//! Scenario-driven commands behind the `adhesion1d` binary.
//!
//! Every command reads a [`LoadedScenario`], writes its artifacts to
//! `<out>/<scenario-id>/` and records them in `manifest.json` together with a
//! SHA-256 hash of the scenario. Checks are returned as [`ReportRecord`]s.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cone::{in_polar_cone, proj_k, subdifferential_tol, subdifferential_violation};
use crate::error::{Error, Result};
use crate::eulerian::{godunov_oracle, hopf_solution, write_cdf_csv, CdfSolution};
use crate::gradflow::{evi_residual, geometric_eps, limit_construction, rescaled_flow_error};
use crate::measures::{measure_of, u_dist, wasserstein, Cost, MassVelocityState};
use crate::particles::{next_collision, trajectory, write_events_csv, ParticleSystem};
use crate::rng::{random_monotone, seeded, substream};
use crate::scenario::{LoadedScenario, Scenario, Tolerances};
use crate::semigroup::{
    energy, oleinik_violation, residual_li, residual_liii, step, write_snapshots_csv, LagrangianState,
};
use crate::measures::quantile;
use crate::step_fn::{lp_distance, sup_distance, StepFn};

/// Grid spacings of the Godunov refinement study.
pub const GODUNOV_DX: [f64; 3] = [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0];
pub const GODUNOV_CFL: f64 = 0.9;
/// Largest acceptable Godunov error at the finest grid for unit-scale data.
pub const GODUNOV_FINAL_ERROR: f64 = 5e-2;
/// Half-width of the window around collision times skipped by the EVI check.
pub const COLLISION_WINDOW: f64 = 1e-3;
/// Minimal empirical order of the implicit Euler integrator.
pub const MIN_ORDER: f64 = 0.9;
/// Width below which cells of a common refinement are rounding artifacts.
pub const SLIVER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Outcome of one named check on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub scenario: String,
    pub check: String,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
    pub runtime_s: f64,
}

impl ReportRecord {
    pub fn new(scenario: &str, check: &str, measured: f64, threshold: f64, runtime_s: f64) -> Self {
        let status = if measured <= threshold { Status::Pass } else { Status::Fail };
        Self { scenario: scenario.into(), check: check.into(), status, measured, threshold, runtime_s }
    }

    /// A check that holds or does not: measured 0 on success, 1 on failure.
    pub fn boolean(scenario: &str, check: &str, ok: bool, runtime_s: f64) -> Self {
        Self::new(scenario, check, if ok { 0.0 } else { 1.0 }, 0.0, runtime_s)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Prints records as CSV (`scenario,check,status,measured,threshold,runtime_s`)
/// or as a JSON array.
pub fn write_report<W: Write>(records: &[ReportRecord], format: Format, mut writer: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut writer, records)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

/// `true` if every record passed.
pub fn all_passed(records: &[ReportRecord]) -> bool {
    records.iter().all(ReportRecord::passed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario_id: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Artifact file names by command.
    pub artifacts: BTreeMap<String, Vec<String>>,
}

/// SHA-256 of the canonical JSON form of the scenario.
pub fn config_hash(scenario: &Scenario) -> String {
    let canonical = serde_json::to_string(scenario).expect("scenario serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Creates `<out>/<id>/`.
pub fn scenario_dir(out: &Path, id: &str) -> Result<PathBuf> {
    let dir = out.join(id);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Adds the artifacts of `command` to `<dir>/manifest.json`.
pub fn update_manifest(dir: &Path, scenario: &Scenario, command: &str, artifacts: &[String]) -> Result<()> {
    let path = dir.join("manifest.json");
    let hash = config_hash(scenario);
    let mut manifest = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str::<Manifest>(&text).ok().filter(|m| m.config_hash == hash),
        Err(_) => None,
    }
    .unwrap_or_else(|| Manifest {
        scenario_id: scenario.id.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        seed: scenario.seed,
        artifacts: BTreeMap::new(),
    });
    let mut names = artifacts.to_vec();
    names.sort();
    manifest.artifacts.insert(command.into(), names);
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str, names: &mut Vec<String>) -> Result<BufWriter<File>> {
    names.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// CSV `param,error`.
pub fn write_table_csv<W: Write>(rows: &[(f64, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["param", "error"])?;
    for (p, e) in rows {
        w.write_record([format!("{p:?}"), format!("{e:?}")])?;
    }
    w.flush()?;
    Ok(())
}

fn origin_state(loaded: &LoadedScenario, renormalize: bool) -> Result<(MassVelocityState, LagrangianState)> {
    let mu0 = loaded.initial_state(renormalize)?;
    let s0 = LagrangianState::from_state(&mu0).with_origin(loaded.id());
    Ok((mu0, s0))
}

/// Particle trajectory, collision log and quantile snapshots at the
/// scenario times. Returns the artifact paths.
pub fn cmd_run(loaded: &LoadedScenario, out: &Path, renormalize: bool) -> Result<Vec<PathBuf>> {
    let (mu0, s0) = origin_state(loaded, renormalize)?;
    let dir = scenario_dir(out, loaded.id())?;
    let times = &loaded.scenario.times;
    let traj = trajectory(&ParticleSystem::new(&mu0), times)?;
    let mut names = Vec::new();
    traj.write_csv(create(&dir, "trajectory.csv", &mut names)?)?;
    write_events_csv(traj.last.events(), create(&dir, "events.csv", &mut names)?)?;
    let snaps = times.iter().map(|&t| step(&s0, t)).collect::<Result<Vec<_>>>()?;
    write_snapshots_csv(&snaps, loaded.id(), create(&dir, "snapshots.csv", &mut names)?)?;
    update_manifest(&dir, &loaded.scenario, "run", &names)?;
    Ok(names.iter().map(|n| dir.join(n)).collect())
}

/// Runs the selected suites (all scenario suites if `suites` is empty) and
/// writes `report.json`.
pub fn cmd_verify(loaded: &LoadedScenario, out: &Path, suites: &[String], tol: Option<f64>, renormalize: bool) -> Result<Vec<ReportRecord>> {
    let (mu0, s0) = origin_state(loaded, renormalize)?;
    let tolerances = tol.map(Tolerances::uniform).unwrap_or(loaded.scenario.tolerances);
    let selected: Vec<String> = if suites.is_empty() { loaded.scenario.suites.clone() } else { suites.to_vec() };
    let mut records = Vec::new();
    for suite in &selected {
        let tol = tolerances
            .get(suite)
            .ok_or_else(|| Error::Scenario(format!("unknown suite `{suite}`")))?;
        let ctx = SuiteContext { id: loaded.id(), scenario: &loaded.scenario, mu0: &mu0, s0: &s0, tol };
        match suite.as_str() {
            "cone" => suite_cone(&ctx, &mut records)?,
            "stability" => suite_stability(&ctx, &mut records)?,
            "equivalence" => suite_equivalence(&ctx, &mut records)?,
            "entropy" => suite_entropy(&ctx, &mut records)?,
            "gradflow" => suite_gradflow(&ctx, &mut records)?,
            _ => unreachable!("validated by Tolerances::get"),
        }
    }
    let dir = scenario_dir(out, loaded.id())?;
    let mut names = Vec::new();
    write_report(&records, Format::Json, create(&dir, "report.json", &mut names)?)?;
    update_manifest(&dir, &loaded.scenario, "verify", &names)?;
    Ok(records)
}

struct SuiteContext<'a> {
    id: &'a str,
    scenario: &'a Scenario,
    mu0: &'a MassVelocityState,
    s0: &'a LagrangianState,
    tol: f64,
}

impl SuiteContext<'_> {
    fn record(&self, check: &str, measured: f64, threshold: f64, started: Instant) -> ReportRecord {
        ReportRecord::new(self.id, check, measured, threshold, started.elapsed().as_secs_f64())
    }

    fn times(&self) -> Vec<f64> {
        self.scenario.positive_times()
    }
}

fn sup(x: &StepFn) -> f64 {
    x.sup_norm()
}

/// Projection properties of `X₀ + tV₀` at every sample time.
fn suite_cone(ctx: &SuiteContext<'_>, out: &mut Vec<ReportRecord>) -> Result<()> {
    let started = Instant::now();
    let mut rng = substream(ctx.scenario.seed, 1);
    let (mut monotone, mut vi, mut orth, mut polar, mut normal) = (true, 0.0f64, 0.0f64, true, 0.0f64);
    for t in ctx.times() {
        let f = ctx.s0.x().axpy(t, ctx.s0.v());
        let p = proj_k(&f);
        monotone &= p.is_nondecreasing();
        let residual = f.sub(&p);
        let scale = 1.0 + sup(&f) * sup(&f);
        orth = orth.max(residual.dot(&p).abs() / scale);
        for _ in 0..20 {
            let y = random_monotone(&mut rng, 6, -2.0 - sup(&f)).scale(1.0 + sup(&f));
            vi = vi.max(residual.dot(&y.sub(&p)) / (scale + sup(&y) * sup(&f)));
        }
        polar &= in_polar_cone(&residual, ctx.tol * (1.0 + sup(&f)));
        normal = normal.max(subdifferential_violation(&residual, &p)? / (subdifferential_tol(&residual) / 1e-9));
    }
    out.push(ReportRecord::boolean(ctx.id, "cone.projection_monotone", monotone, started.elapsed().as_secs_f64()));
    out.push(ctx.record("cone.variational_inequality", vi, ctx.tol, started));
    out.push(ctx.record("cone.orthogonality", orth, ctx.tol, started));
    out.push(ReportRecord::boolean(ctx.id, "cone.residual_in_polar_cone", polar, started.elapsed().as_secs_f64()));
    out.push(ctx.record("cone.residual_in_normal_cone", normal, ctx.tol, started));
    Ok(())
}

/// A seeded perturbation of the initial data.
pub fn perturbed_partner(mu0: &MassVelocityState, seed: u64) -> MassVelocityState {
    let mut rng = substream(seed, 2);
    let atoms: Vec<(f64, f64, f64)> = mu0
        .atoms()
        .map(|(m, x, v)| (m * (0.5 + rng.gen::<f64>()), x + 0.1 * rng.gen_range(-1.0..=1.0), v + 0.2 * rng.gen_range(-1.0..=1.0)))
        .collect();
    MassVelocityState::normalized(&atoms).expect("perturbation keeps atoms valid")
}

/// Stability in `W_p`, `L^p` contraction of the projection, and the
/// Lipschitz-in-time bound, against a seeded perturbation.
fn suite_stability(ctx: &SuiteContext<'_>, out: &mut Vec<ReportRecord>) -> Result<()> {
    let started = Instant::now();
    let mu1 = perturbed_partner(ctx.mu0, ctx.scenario.seed);
    let s1 = LagrangianState::from_state(&mu1);
    let times = ctx.times();
    let (mut stability, mut contraction, mut lipschitz, mut cost) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let quartic = Cost::power(4.0)?;
    for p in [1.0, 2.0, 4.0] {
        let w0 = wasserstein(&ctx.mu0.density(), &mu1.density(), p)?;
        let u0 = u_dist(ctx.mu0, &mu1, p)?;
        let v_norm = ctx.s0.v().lp_norm(p)?;
        let mut prev: Option<(f64, StepFn)> = None;
        for &t in &times {
            let a = step(ctx.s0, t)?;
            let b = step(&s1, t)?;
            let lhs = lp_distance(a.x(), b.x(), p)?;
            let rhs = w0 + t * u0;
            stability = stability.max((lhs - rhs) / (1.0 + rhs));
            let fa = ctx.s0.x().axpy(t, ctx.s0.v());
            let fb = s1.x().axpy(t, s1.v());
            let before = lp_distance(&fa, &fb, p)?;
            contraction = contraction.max((lp_distance(a.x(), b.x(), p)? - before) / (1.0 + before));
            if let Some((s, xs)) = &prev {
                let bound = (t - s) * v_norm;
                lipschitz = lipschitz.max((lp_distance(a.x(), xs, p)? - bound) / (1.0 + bound));
            }
            if p == 4.0 {
                let before = crate::measures::quantile_cost(&fa, &fb, &quartic);
                let after = crate::measures::quantile_cost(a.x(), b.x(), &quartic);
                cost = cost.max((after - before) / (1.0 + before));
            }
            prev = Some((t, a.x().clone()));
        }
    }
    out.push(ctx.record("stability.wasserstein_bound", stability, ctx.tol, started));
    out.push(ctx.record("stability.lp_contraction", contraction, ctx.tol, started));
    out.push(ctx.record("stability.convex_cost", cost, ctx.tol, started));
    out.push(ctx.record("stability.lipschitz_in_time", lipschitz, ctx.tol, started));
    Ok(())
}

/// Collision times of the particle evolution up to `t_max`.
pub fn collision_times(mu0: &MassVelocityState, t_max: f64) -> Result<Vec<f64>> {
    let mut sys = ParticleSystem::new(mu0);
    sys.evolve(t_max)?;
    let mut ts: Vec<f64> = sys.events().iter().map(|e| e.time).collect();
    ts.dedup();
    Ok(ts)
}

fn near(times: &[f64], t: f64, window: f64) -> bool {
    times.iter().any(|&c| (c - t).abs() <= window)
}

/// Event-driven particles against the projection formula, and the
/// rescaled and differential forms of the evolution.
fn suite_equivalence(ctx: &SuiteContext<'_>, out: &mut Vec<ReportRecord>) -> Result<()> {
    let started = Instant::now();
    let times = ctx.times();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let traj = trajectory(&ParticleSystem::new(ctx.mu0), &times)?;
    let scale = 1.0 + sup(ctx.s0.x()) + t_max * sup(ctx.s0.v());
    let (mut dx, mut dv, mut liii, mut li) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let collisions = collision_times(ctx.mu0, t_max + 1.0)?;
    for &t in &times {
        let atoms: Vec<(f64, f64, f64)> = traj.snapshot(t).map(|r| (r.m, r.x, r.v)).collect();
        let particles = LagrangianState::from_state(&MassVelocityState::normalized(&atoms)?);
        let lag = step(ctx.s0, t)?;
        dx = dx.max(sup_distance(particles.x(), lag.x(), SLIVER) / scale);
        dv = dv.max(sup_distance(particles.v(), lag.v(), SLIVER) / (1.0 + sup(ctx.s0.v())));
        liii = liii.max(residual_liii(ctx.s0, t)? / scale);
        let h = 1e-4 * (1.0 + t);
        if !collisions.iter().any(|&c| c >= t - 1e-6 && c <= t + h + 1e-6) {
            li = li.max(residual_li(ctx.s0, t, h)? / (1.0 + sup(ctx.s0.v())));
        }
    }
    out.push(ctx.record("equivalence.positions", dx, ctx.tol, started));
    out.push(ctx.record("equivalence.velocities", dv, ctx.tol, started));
    out.push(ctx.record("equivalence.rescaled_residual", liii, ctx.tol, started));
    // difference quotients lose about half the digits
    out.push(ctx.record("equivalence.inclusion_residual", li, ctx.tol.sqrt(), started));
    Ok(())
}

/// Conservation, energy dissipation, the one-sided Lipschitz bound, and
/// monotonicity of `‖V(t)‖_p`.
fn suite_entropy(ctx: &SuiteContext<'_>, out: &mut Vec<ReportRecord>) -> Result<()> {
    let started = Instant::now();
    let times = ctx.times();
    let traj = trajectory(&ParticleSystem::new(ctx.mu0), &times)?;
    let p0 = ctx.mu0.momentum();
    let (mut mass, mut momentum) = (0.0f64, 0.0f64);
    for t in traj.times() {
        let m: f64 = traj.snapshot(t).map(|r| r.m).sum();
        let p: f64 = traj.snapshot(t).map(|r| r.m * r.v).sum();
        mass = mass.max((m - 1.0).abs());
        momentum = momentum.max((p - p0).abs() / (1.0 + sup(ctx.s0.v())));
    }
    let conservation_tol = ctx.tol.min(1e-12);
    out.push(ctx.record("entropy.mass", mass, conservation_tol, started));
    out.push(ctx.record("entropy.momentum", momentum, conservation_tol, started));

    // energy is constant between collisions and drops only at them
    let sq = Cost::power(2.0)?;
    let e0 = energy(ctx.s0, &sq);
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let collisions = collision_times(ctx.mu0, t_max)?;
    let mut flat = 0.0f64;
    let mut increase = 0.0f64;
    let mut plateaus = vec![(0.0, e0)];
    for &c in &collisions {
        let delta = 1e-9 * (1.0 + c);
        let before = energy(&step(ctx.s0, (c - delta).max(0.0))?, &sq);
        let after = energy(&step(ctx.s0, c)?, &sq);
        let previous = plateaus[plateaus.len() - 1].1;
        flat = flat.max((before - previous).abs() / (1.0 + e0));
        increase = increase.max((after - before) / (1.0 + e0));
        plateaus.push((c, after));
    }
    // every sample sits on the plateau of the last collision before it
    for &t in &times {
        let k = plateaus.partition_point(|p| p.0 <= t) - 1;
        let e = energy(&step(ctx.s0, t)?, &sq);
        flat = flat.max((e - plateaus[k].1).abs() / (1.0 + e0));
    }
    out.push(ctx.record("entropy.energy_flat_between_collisions", flat, ctx.tol.max(1e-12), started));
    out.push(ctx.record("entropy.energy_nonincreasing", increase, ctx.tol.max(1e-12), started));

    let mut oleinik = 0.0f64;
    let mut norms = 0.0f64;
    for p in [1.0, 2.0, 4.0] {
        let mut prev = ctx.s0.v().lp_norm(p)?;
        for &t in &times {
            let st = step(ctx.s0, t)?;
            let n = st.v().lp_norm(p)?;
            norms = norms.max((n - prev) / (1.0 + prev));
            prev = n;
            if p == 1.0 {
                let scale = 1.0 + sup(st.x()) / t + sup(st.v());
                oleinik = oleinik.max(oleinik_violation(&st)? / scale);
            }
        }
    }
    out.push(ctx.record("entropy.oleinik", oleinik, ctx.tol, started));
    out.push(ctx.record("entropy.velocity_norms_nonincreasing", norms, ctx.tol, started));
    Ok(())
}

/// Rescaled gradient flow against the semigroup, and the EVI.
fn suite_gradflow(ctx: &SuiteContext<'_>, out: &mut Vec<ReportRecord>) -> Result<()> {
    let started = Instant::now();
    let times = ctx.times();
    let t = times.iter().copied().fold(0.0, f64::max);
    let eps = t / 8.0;
    let e1 = rescaled_flow_error(ctx.s0, eps, t, 0.02)?;
    let e2 = rescaled_flow_error(ctx.s0, eps, t, 0.01)?;
    let order = if e1 < 1e-10 { f64::INFINITY } else { (e1 / e2).log2() };
    out.push(ctx.record("gradflow.integrator_order", -order, -MIN_ORDER, started));

    let collisions = collision_times(ctx.mu0, 2.0 * t + 1.0)?;
    let mut rng = substream(ctx.scenario.seed, 3);
    let path = |s: f64| step(ctx.s0, s).map(|st| st.x().clone());
    let mut evi = 0.0f64;
    for &s in &times {
        if near(&collisions, s, COLLISION_WINDOW) {
            continue;
        }
        for _ in 0..4 {
            let eta = random_monotone(&mut rng, 5, -1.0);
            let w2 = lp_distance(&path(s)?, &eta, 2.0)?.powi(2);
            evi = evi.max(evi_residual(&path, ctx.s0.x(), s, &eta)? / (1.0 + w2));
        }
    }
    out.push(ctx.record("gradflow.evi", evi, ctx.tol, started));
    Ok(())
}

/// Hopf formula against the particle CDF at every time, and a Godunov
/// refinement study at the last time. Writes CDF and convergence tables.
pub fn cmd_entropy(loaded: &LoadedScenario, out: &Path, tol: Option<f64>, renormalize: bool) -> Result<Vec<ReportRecord>> {
    let started = Instant::now();
    let (mu0, s0) = origin_state(loaded, renormalize)?;
    let id = loaded.id();
    let tol = tol.unwrap_or(loaded.scenario.tolerances.equivalence);
    let dir = scenario_dir(out, id)?;
    let mut names = Vec::new();
    let times = loaded.scenario.positive_times();
    let mut hopf_gap = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        let hopf = hopf_solution(&mu0, t)?;
        let particles = CdfSolution::of_measure(t, &measure_of(step(&s0, t)?.x())?);
        let scale = 1.0 + sup(s0.x()) + t * sup(s0.v());
        hopf_gap = hopf_gap.max(cdf_gap(&hopf, &particles)? / scale);
        write_cdf_csv(&hopf.table(), create(&dir, &format!("cdf_hopf_{k}.csv"), &mut names)?)?;
    }
    let mut records = vec![ReportRecord::new(id, "entropy.hopf_equals_particles", hopf_gap, tol, started.elapsed().as_secs_f64())];

    let started = Instant::now();
    let t = times.iter().copied().fold(0.0, f64::max);
    let exact = hopf_solution(&mu0, t)?;
    let mut table = Vec::new();
    for &dx in &GODUNOV_DX {
        let grid = godunov_oracle(&mu0, t, dx, GODUNOV_CFL)?;
        table.push((dx, grid.l1_distance(&exact)));
        let name = format!("cdf_godunov_dx{}.csv", (1.0 / dx).round());
        write_cdf_csv(&grid.table(), create(&dir, &name, &mut names)?)?;
    }
    write_table_csv(&table, create(&dir, "godunov_convergence.csv", &mut names)?)?;
    let increase = table.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let resolved = table.iter().all(|r| r.1 < 1e-10);
    let elapsed = started.elapsed().as_secs_f64();
    records.push(ReportRecord::boolean(id, "entropy.godunov_error_decreasing", increase < 0.0 || resolved, elapsed));
    records.push(ReportRecord::new(id, "entropy.godunov_final_error", table[table.len() - 1].1, GODUNOV_FINAL_ERROR, elapsed));
    update_manifest(&dir, &loaded.scenario, "entropy", &names)?;
    Ok(records)
}

/// `W_∞` between the two CDFs' measures (ignoring rounding slivers), and
/// the `W₁` distance.
pub fn cdf_gap(a: &CdfSolution, b: &CdfSolution) -> Result<f64> {
    let (ma, mb) = (a.to_measure()?, b.to_measure()?);
    Ok(sup_distance(&quantile(&ma), &quantile(&mb), SLIVER).max(wasserstein(&ma, &mb, 1.0)?))
}

/// Integrator refinement and limit-construction tables.
pub fn cmd_gradflow(loaded: &LoadedScenario, out: &Path, tol: Option<f64>, renormalize: bool) -> Result<Vec<ReportRecord>> {
    let (mu0, s0) = origin_state(loaded, renormalize)?;
    let id = loaded.id();
    let dir = scenario_dir(out, id)?;
    let mut names = Vec::new();
    let t = loaded.scenario.positive_times().iter().copied().fold(0.0, f64::max);
    let mut records = Vec::new();

    let started = Instant::now();
    let hs = [0.04, 0.02, 0.01, 0.005];
    let mut table = Vec::new();
    for &h in &hs {
        table.push((h, rescaled_flow_error(&s0, t / 8.0, t, h)?));
    }
    write_table_csv(&table, create(&dir, "gradflow_convergence.csv", &mut names)?)?;
    let order = empirical_order(&table);
    records.push(ReportRecord::new(id, "gradflow.integrator_order", -order, -MIN_ORDER, started.elapsed().as_secs_f64()));

    let started = Instant::now();
    let rows = limit_construction(&mu0, t, &geometric_eps(t, 6), 1e-3)?;
    let limit: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.w2)).collect();
    write_table_csv(&limit, create(&dir, "limit_construction.csv", &mut names)?)?;
    let mut rise = 0.0f64;
    for w in rows.windows(2) {
        rise = rise.max(w[1].w2 - w[0].w2 - w[0].integrator_error - w[1].integrator_error);
    }
    let over_bound = rows.iter().map(|r| r.w2 - r.bound - r.integrator_error).fold(0.0, f64::max);
    let exact_regime = rows
        .iter()
        .filter(|r| r.collision_free)
        .map(|r| r.w2 - 2.0 * r.integrator_error)
        .fold(0.0, f64::max);
    let tol = tol.unwrap_or(loaded.scenario.tolerances.gradflow);
    let elapsed = started.elapsed().as_secs_f64();
    records.push(ReportRecord::new(id, "gradflow.limit_decreasing", rise, tol, elapsed));
    records.push(ReportRecord::new(id, "gradflow.limit_bound", over_bound, tol, elapsed));
    records.push(ReportRecord::new(id, "gradflow.limit_exact_regime", exact_regime, tol, elapsed));
    update_manifest(&dir, &loaded.scenario, "gradflow", &names)?;
    Ok(records)
}

/// Least-squares slope of `log error` against `log param`, ignoring errors
/// at rounding level. Infinite if every error is at rounding level.
pub fn empirical_order(table: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = table.iter().filter(|r| r.1 > 1e-12).map(|r| (r.0.ln(), r.1.ln())).collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub task: String,
    pub n: usize,
    pub seconds: f64,
}

/// Random step function with `n` cells (projection input).
pub fn bench_step_fn(n: usize, seed: u64) -> StepFn {
    let mut rng = seeded(seed);
    let values: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 + rng.gen_range(-0.5..0.5)).collect();
    StepFn::uniform(values).expect("n >= 1")
}

/// `n` particles whose velocities decrease with position, so that every
/// adjacent pair approaches and all of them end in one cluster.
pub fn bench_particles(n: usize, seed: u64) -> MassVelocityState {
    let mut rng = seeded(seed);
    let mut xs: Vec<f64> = (0..n).map(|i| i as f64 + 0.9 * rng.gen::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    let mut vs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    vs.sort_by(|a, b| b.total_cmp(a));
    let atoms: Vec<(f64, f64, f64)> = xs.iter().zip(&vs).map(|(&x, &v)| (1.0, x / n as f64, v)).collect();
    MassVelocityState::normalized(&atoms).expect("valid atoms")
}

/// Times the projection and a full merging evolution for every decade from
/// 10³ up to `n` (and `n` itself). Single-threaded.
pub fn cmd_bench(n: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if n == 0 {
        return Err(Error::InvalidArgument("bench needs n >= 1".into()));
    }
    let mut sizes: Vec<usize> = std::iter::successors(Some(1000usize), |s| s.checked_mul(10)).take_while(|&s| s < n).collect();
    sizes.push(n);
    let mut rows = Vec::new();
    for &size in &sizes {
        let f = bench_step_fn(size, seed);
        let started = Instant::now();
        let p = proj_k(&f);
        rows.push(BenchRow { task: "proj_k".into(), n: size, seconds: started.elapsed().as_secs_f64() });
        std::hint::black_box(p);

        let mu = bench_particles(size, seed);
        let mut sys = ParticleSystem::new(&mu);
        let started = Instant::now();
        sys.evolve_to_end();
        rows.push(BenchRow { task: "evolve".into(), n: size, seconds: started.elapsed().as_secs_f64() });
        if sys.clusters().len() != 1 || next_collision(&sys).is_some() {
            return Err(Error::InvalidArgument(format!("benchmark system of {size} particles did not fully merge")));
        }
    }
    Ok(rows)
}

/// Time limits for [`cmd_bench`] rows: 0.1 s at 10³, 1 s (projection) and
/// 10 s (evolution) at 10⁶. Other sizes are not judged.
pub fn bench_limit(row: &BenchRow) -> Option<f64> {
    match (row.task.as_str(), row.n) {
        (_, 1000) => Some(0.1),
        ("proj_k", 1_000_000) => Some(1.0),
        ("evolve", 1_000_000) => Some(10.0),
        _ => None,
    }
}

/// Records for the judged bench rows.
pub fn bench_records(rows: &[BenchRow]) -> Vec<ReportRecord> {
    rows.iter()
        .filter_map(|r| bench_limit(r).map(|lim| ReportRecord::new("bench", &format!("bench.{}.{}", r.task, r.n), r.seconds, lim, r.seconds)))
        .collect()
}

/// CSV `task,n,seconds`.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head_on(dir: &Path) -> LoadedScenario {
        let text = r#"{"version": 1, "id": "head_on",
            "initial": {"atoms": [[0.5, 0.0, 1.0], [0.5, 1.0, -1.0]]},
            "times": [0.0, 0.25, 0.5, 1.0], "seed": 3}"#;
        LoadedScenario { scenario: Scenario::from_json(text).unwrap(), base_dir: dir.to_path_buf() }
    }

    #[test]
    fn record_status() {
        assert!(ReportRecord::new("s", "c", 1.0, 1.0, 0.0).passed());
        assert!(!ReportRecord::new("s", "c", f64::NAN, 1.0, 0.0).passed());
        assert!(!ReportRecord::boolean("s", "c", false, 0.0).passed());
    }

    #[test]
    fn empirical_order_of_first_order_table() {
        let table = [(0.1, 0.2), (0.05, 0.1), (0.025, 0.05)];
        assert!((empirical_order(&table) - 1.0).abs() < 1e-12);
        assert!(empirical_order(&[(0.1, 0.0), (0.05, 0.0)]).is_infinite());
    }

    #[test]
    fn verify_head_on_passes() {
        let dir = tempfile::tempdir().unwrap();
        let loaded = head_on(dir.path());
        let records = cmd_verify(&loaded, dir.path(), &[], None, false).unwrap();
        for r in &records {
            assert!(r.passed(), "{r:?}");
        }
        assert!(dir.path().join("head_on/report.json").exists());
    }

    #[test]
    fn bench_inputs_merge() {
        let rows = cmd_bench(1000, 1).unwrap();
        assert_eq!(rows.len(), 2);
        let mu = bench_particles(50, 2);
        assert!(mu.velocities().windows(2).all(|w| w[0] >= w[1]));
    }
}
