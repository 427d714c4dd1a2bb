//! The time-reversal protocol: two equilibrated halves at different
//! temperatures are joined, evolved forward, reversed, and rerun under
//! deterministic, GRW-noise and dissipative dynamics.
//!
//! Every stage reads its inputs from checkpoints in the output directory and
//! writes its outputs there, so stages can be rerun individually.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::analysis::{
    cic_deposit, factorization_with_null, fourier_mode, kinetic_temperature, read_modes_csv, read_profile_csv,
    write_diagnostics_csv, write_modes_csv, write_profile_csv, DiagnosticSample, FactorizationOptions, ModeSample,
};
use crate::checkpoint::{load_particles, save_particles, sha256_hex};
use crate::md::init::{SEAM_FORCE_CAP, SEAM_RELAX_STEPS};
use crate::md::{
    equilibrate, initial_system, join_systems, leapfrog_step, relax_seam, reverse_momenta, DynamicsMode, DynamicsSpec,
    ParticleSystem,
};
use crate::{Error, Result};

/// Fourier modes `n_x` recorded during the forward run and the reruns.
pub const MODES: [u32; 3] = [1, 4, 14];
/// Velocity bins of the factorization diagnostic.
pub const DIAGNOSTIC_BINS: usize = 16;
pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    EquilibrateLeft,
    EquilibrateRight,
    Join,
    Forward,
    Reverse,
    Rerun(DynamicsMode),
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::EquilibrateLeft,
        Stage::EquilibrateRight,
        Stage::Join,
        Stage::Forward,
        Stage::Reverse,
        Stage::Rerun(DynamicsMode::Deterministic),
        Stage::Rerun(DynamicsMode::GrwNoise),
        Stage::Rerun(DynamicsMode::DissipativeGrw),
    ];

    pub fn name(self) -> String {
        match self {
            Stage::EquilibrateLeft => "equilibrate_left".into(),
            Stage::EquilibrateRight => "equilibrate_right".into(),
            Stage::Join => "join".into(),
            Stage::Forward => "forward".into(),
            Stage::Reverse => "reverse".into(),
            Stage::Rerun(m) => format!("rerun_{}", m.name()),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Protocol(format!("unknown stage {s:?}")))
    }

    /// Final checkpoint written by the stage.
    pub fn checkpoint(self) -> String {
        match self {
            Stage::Reverse => "reversed.clmd".into(),
            _ => format!("{}.clmd", self.name()),
        }
    }

    /// Checkpoints the stage consumes.
    pub fn inputs(self) -> Vec<String> {
        match self {
            Stage::EquilibrateLeft | Stage::EquilibrateRight => vec![],
            Stage::Join => vec![Stage::EquilibrateLeft.checkpoint(), Stage::EquilibrateRight.checkpoint()],
            Stage::Forward => vec![Stage::Join.checkpoint()],
            Stage::Reverse => vec![Stage::Forward.checkpoint()],
            Stage::Rerun(_) => vec![Stage::Reverse.checkpoint()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub parameters: BTreeMap<String, String>,
    pub results: BTreeMap<String, f64>,
}

/// Plain-text JSON listing of a protocol run. Wall times are kept apart in
/// `timings.txt` so that identical runs give identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: Vec<String>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            config: cfg
                .to_text()
                .lines()
                .filter(|l| !l.starts_with("output ") && !l.starts_with("threads "))
                .map(String::from)
                .collect(),
            stages: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Protocol(format!("unreadable manifest {}: {e}", path.display())))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default() + "\n"
    }
}

/// 64-bit mix of the run seed with a stream tag.
fn derive_key(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rerun_spec(cfg: &RunConfig, mode: DynamicsMode) -> DynamicsSpec {
    match mode {
        DynamicsMode::Deterministic => DynamicsSpec::deterministic(cfg.dt),
        DynamicsMode::GrwNoise => DynamicsSpec::grw_noise(cfg.dt, cfg.a_nd),
        DynamicsMode::DissipativeGrw => DynamicsSpec {
            gamma: cfg.gamma(),
            ..DynamicsSpec::dissipative(cfg.dt, cfg.a_nd, cfg.t_n_nd)
        },
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    stage: Stage,
    comments: Vec<String>,
    outputs: Vec<Artifact>,
}

impl Ctx<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.outputs.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn save(&mut self, rel: &str, sys: &ParticleSystem) -> Result<()> {
        let hash = save_particles(&self.dir.join(rel), sys)?;
        self.outputs.push(Artifact {
            path: rel.to_string(),
            sha256: hash,
        });
        Ok(())
    }

    fn profile(&mut self, rel: &str, sys: &ParticleSystem) -> Result<()> {
        let field = cic_deposit(sys, self.cfg.grid)?;
        let profile = crate::analysis::y_averaged_profile(&field);
        let mut buf = Vec::new();
        let mut comments = self.comments.clone();
        comments.push(format!("t = {:.17e}", sys.time));
        write_profile_csv(&mut buf, &comments, &field.xs(), &profile)?;
        self.write(rel, &buf)
    }

    fn fail(&self, e: Error) -> Error {
        match e {
            Error::Protocol(_) => e,
            other => Error::Protocol(format!("stage {}: {other}", self.stage.name())),
        }
    }
}

/// Runs `steps` steps, sampling profiles, modes and diagnostics, and writing
/// `checkpoints` evenly spaced intermediate checkpoints (0 for none).
fn evolve(ctx: &mut Ctx, sys: &mut ParticleSystem, steps: u64, checkpoints: u64) -> Result<()> {
    let name = ctx.stage.name();
    let every = ctx.cfg.sample_every;
    let t0 = sys.time;
    let mut modes = Vec::new();
    let mut diagnostics = Vec::new();
    let ckpt_every = if checkpoints > 0 { (steps / checkpoints).max(1) } else { 0 };
    let opts = FactorizationOptions {
        seed: ctx.cfg.seed,
        ..Default::default()
    };
    for k in 0..=steps {
        if k > 0 {
            leapfrog_step(sys).map_err(|e| ctx.fail(e))?;
        }
        if k % every == 0 || k == steps {
            let t = sys.time - t0;
            ctx.profile(&format!("profiles/{name}/step_{k:08}.csv"), sys)?;
            for n_x in MODES {
                modes.push(ModeSample {
                    t,
                    n_x,
                    value: fourier_mode(sys, n_x),
                });
            }
            let sample = k / every;
            let diag_due = ctx.cfg.diagnostic_every > 0 && k % every == 0 && sample % ctx.cfg.diagnostic_every == 0;
            if diag_due || (ctx.cfg.diagnostic_every > 0 && k == steps) {
                let f = factorization_with_null(sys, DIAGNOSTIC_BINS, &opts).map_err(|e| ctx.fail(e))?;
                diagnostics.push(DiagnosticSample {
                    t,
                    value: f.value,
                    null_floor: f.null_mean,
                });
            }
        }
        if ckpt_every > 0 && k > 0 && k < steps && k % ckpt_every == 0 {
            ctx.save(&format!("{name}_{:02}.clmd", k / ckpt_every), sys)?;
        }
    }
    let mut buf = Vec::new();
    write_modes_csv(&mut buf, &ctx.comments, &modes)?;
    ctx.write(&format!("modes_{name}.csv"), &buf)?;
    if !diagnostics.is_empty() {
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &ctx.comments, &diagnostics)?;
        ctx.write(&format!("diagnostics_{name}.csv"), &buf)?;
    }
    Ok(())
}

fn half_temperatures(sys: &ParticleSystem) -> (f64, f64) {
    let half = sys.n() / 2;
    let t = |vs: &[[f64; 2]]| vs.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / (2.0 * vs.len() as f64);
    (t(&sys.velocities[..half]), t(&sys.velocities[half..]))
}

/// Runs one stage from the checkpoints already in the output directory and
/// records it in the manifest.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<StageRecord> {
    cfg.validate()?;
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let mut manifest = match Manifest::load(dir)? {
        Some(m) if m.config_hash != cfg.hash() => {
            return Err(Error::Protocol(format!(
                "{} holds a run with config hash {}, not {}",
                dir.display(),
                m.config_hash,
                cfg.hash()
            )))
        }
        Some(m) => m,
        None => Manifest::new(cfg),
    };
    let mut inputs = Vec::new();
    for rel in stage.inputs() {
        let path = dir.join(&rel);
        if !path.exists() {
            return Err(Error::Protocol(format!(
                "stage {} needs {}, which is missing",
                stage.name(),
                path.display()
            )));
        }
        inputs.push(Artifact {
            path: rel,
            sha256: sha256_hex(&fs::read(&path)?),
        });
    }
    let started = Instant::now();
    let mut ctx = Ctx {
        cfg,
        dir,
        stage,
        comments: vec![format!("config_hash = {}", cfg.hash()), format!("stage = {}", stage.name())],
        outputs: Vec::new(),
    };
    let mut parameters = BTreeMap::new();
    let mut results = BTreeMap::new();
    let l = cfg.box_length();
    let load = |rel: &str| load_particles(&dir.join(rel));
    match stage {
        Stage::EquilibrateLeft | Stage::EquilibrateRight => {
            let (sigma, tag) = if stage == Stage::EquilibrateLeft {
                (cfg.sigma_left, 1)
            } else {
                (cfg.sigma_right, 2)
            };
            let key = derive_key(cfg.seed, tag);
            let steps = cfg.steps_for(cfg.equilibration_time);
            let sys = initial_system(cfg.n / 2, [0.5 * l, l], sigma, DynamicsSpec::deterministic(cfg.dt), key)
                .map_err(|e| ctx.fail(e))?;
            let eq = equilibrate(sys, sigma, steps).map_err(|e| ctx.fail(e))?;
            parameters.insert("sigma".into(), sigma.to_string());
            parameters.insert("steps".into(), steps.to_string());
            parameters.insert("key".into(), key.to_string());
            results.insert("temperature_window_mean".into(), eq.temperature);
            results.insert("temperature_final".into(), kinetic_temperature(&eq.system));
            ctx.save(&stage.checkpoint(), &eq.system)?;
        }
        Stage::Join => {
            let left = load(&Stage::EquilibrateLeft.checkpoint())?;
            let right = load(&Stage::EquilibrateRight.checkpoint())?;
            let mut sys = join_systems(&left, &right).map_err(|e| ctx.fail(e))?;
            relax_seam(&mut sys, left.n(), SEAM_RELAX_STEPS, SEAM_FORCE_CAP).map_err(|e| ctx.fail(e))?;
            sys.set_dynamics(DynamicsSpec::deterministic(cfg.dt))?;
            let (tl, tr) = half_temperatures(&sys);
            parameters.insert("seam_relax_steps".into(), SEAM_RELAX_STEPS.to_string());
            parameters.insert("seam_force_cap".into(), SEAM_FORCE_CAP.to_string());
            results.insert("temperature_left".into(), tl);
            results.insert("temperature_right".into(), tr);
            results.insert("temperature".into(), kinetic_temperature(&sys));
            ctx.profile("profiles/join.csv", &sys)?;
            ctx.save(&stage.checkpoint(), &sys)?;
        }
        Stage::Forward => {
            let mut sys = load(&Stage::Join.checkpoint())?;
            sys.set_dynamics(DynamicsSpec::deterministic(cfg.dt))?;
            let steps = cfg.steps_for(cfg.t_rev);
            parameters.insert("steps".into(), steps.to_string());
            evolve(&mut ctx, &mut sys, steps, cfg.forward_checkpoints)?;
            let (tl, tr) = half_temperatures(&sys);
            results.insert("temperature_left".into(), tl);
            results.insert("temperature_right".into(), tr);
            ctx.save(&stage.checkpoint(), &sys)?;
        }
        Stage::Reverse => {
            let mut sys = load(&Stage::Forward.checkpoint())?;
            reverse_momenta(&mut sys);
            sys.time = 0.0;
            sys.step = 0;
            ctx.save(&stage.checkpoint(), &sys)?;
        }
        Stage::Rerun(mode) => {
            let mut sys = load(&Stage::Reverse.checkpoint())?;
            let spec = rerun_spec(cfg, mode);
            sys.set_dynamics(spec)?;
            let steps = cfg.steps_for(cfg.t_rev);
            parameters.insert("mode".into(), mode.name().into());
            parameters.insert("steps".into(), steps.to_string());
            parameters.insert("noise_amplitude".into(), spec.noise_amplitude.to_string());
            parameters.insert("gamma".into(), spec.gamma.to_string());
            parameters.insert("noise_temp".into(), spec.noise_temp.to_string());
            evolve(&mut ctx, &mut sys, steps, 0)?;
            results.insert("temperature".into(), kinetic_temperature(&sys));
            ctx.save(&stage.checkpoint(), &sys)?;
        }
    }
    let record = StageRecord {
        stage: stage.name(),
        inputs,
        outputs: ctx.outputs,
        parameters,
        results,
    };
    match manifest.stages.iter_mut().find(|s| s.stage == record.stage) {
        Some(slot) => *slot = record.clone(),
        None => manifest.stages.push(record.clone()),
    }
    let order = |name: &str| Stage::ALL.iter().position(|s| s.name() == name).unwrap_or(usize::MAX);
    manifest.stages.sort_by_key(|s| order(&s.stage));
    fs::write(dir.join(MANIFEST), manifest.to_json())?;
    let mut timings = fs::OpenOptions::new().create(true).append(true).open(dir.join(TIMINGS))?;
    writeln!(timings, "{} {:.3} s", stage.name(), started.elapsed().as_secs_f64())?;
    Ok(record)
}

/// All stages in order, on a thread pool of `cfg.threads` workers.
pub fn run_protocol(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output)?;
    // a fresh run starts from a clean manifest
    let manifest_path = cfg.output.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }
    let _ = fs::remove_file(cfg.output.join(TIMINGS));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Protocol(format!("thread pool: {e}")))?;
    pool.install(|| {
        for stage in Stage::ALL {
            run_stage(cfg, stage)?;
        }
        Manifest::load(&cfg.output)?.ok_or_else(|| Error::Protocol("manifest vanished".into()))
    })
}

/// Outcome of the reversal experiment, computed from the files of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    /// `density (T_right - T_left)` at the join, the step height in profile units.
    pub gap: f64,
    /// Seam contrast of the relaxed profile over that of the joined one.
    pub relaxation_ratio: f64,
    /// `|deterministic - joined|_inf / gap`.
    pub deterministic_return: f64,
    /// `|deterministic - relaxed|_inf`.
    pub deterministic_vs_relaxed: f64,
    /// `|stochastic - deterministic|_inf` per stochastic mode.
    pub stochastic_vs_deterministic: Vec<(DynamicsMode, f64)>,
    /// Time-integrated `| |e_det(k)| - |e_grw(k)| |` per recorded mode.
    pub mode_deviation: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Largest forward relaxation ratio accepted.
pub const RELAXATION_LIMIT: f64 = 0.5;
/// Largest deterministic return error, as a fraction of the gap.
pub const RETURN_LIMIT: f64 = 0.05;

fn final_profile(dir: &Path, stage: &str) -> Result<Vec<f64>> {
    let sub = dir.join("profiles").join(stage);
    let mut files: Vec<PathBuf> = fs::read_dir(&sub)
        .map_err(|e| Error::Protocol(format!("{}: {e}", sub.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let last = files
        .last()
        .ok_or_else(|| Error::Protocol(format!("no profiles in {}", sub.display())))?;
    Ok(read_profile_csv(&fs::read_to_string(last)?)?.1)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Step across both seams (at `x = L/2` rising, at `x = 0` falling): the mean
/// over `w` nodes after each seam minus the mean over `w` nodes before it,
/// averaged over the two seams with the sign of the joined step.
pub fn seam_contrast(profile: &[f64]) -> f64 {
    let ng = profile.len();
    let w = (ng / 16).max(1);
    let mean = |from: isize| -> f64 {
        (0..w as isize)
            .map(|k| profile[(from + k).rem_euclid(ng as isize) as usize])
            .sum::<f64>()
            / w as f64
    };
    let mid = (ng / 2) as isize;
    let rising = mean(mid) - mean(mid - w as isize);
    let falling = mean(0) - mean(-(w as isize));
    0.5 * (rising - falling)
}

pub fn evaluate(dir: &Path) -> Result<ProtocolReport> {
    let join = load_particles(&dir.join(Stage::Join.checkpoint()))?;
    let (tl, tr) = half_temperatures(&join);
    let gap = join.density() * (tr - tl);
    let joined = read_profile_csv(&fs::read_to_string(dir.join("profiles/join.csv"))?)?.1;
    let relaxed = final_profile(dir, "forward")?;
    let name = |m: DynamicsMode| Stage::Rerun(m).name();
    let det = final_profile(dir, &name(DynamicsMode::Deterministic))?;
    let mut stochastic = Vec::new();
    for m in [DynamicsMode::GrwNoise, DynamicsMode::DissipativeGrw] {
        stochastic.push((m, sup_diff(&final_profile(dir, &name(m))?, &det)));
    }
    let modes = |m: DynamicsMode| -> Result<Vec<ModeSample>> {
        read_modes_csv(&fs::read_to_string(dir.join(format!("modes_{}.csv", name(m))))?)
    };
    let (md, mg) = (modes(DynamicsMode::Deterministic)?, modes(DynamicsMode::GrwNoise)?);
    let mode_deviation = MODES
        .iter()
        .map(|&n_x| {
            let pick = |rows: &[ModeSample]| -> Vec<(f64, f64)> {
                rows.iter().filter(|r| r.n_x == n_x).map(|r| (r.t, r.value.norm())).collect()
            };
            let (a, b) = (pick(&md), pick(&mg));
            // trapezoid rule over the common sample times
            let d: Vec<(f64, f64)> = a.iter().zip(&b).map(|(x, y)| (x.0, (x.1 - y.1).abs())).collect();
            let integral = d.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
            (n_x, integral)
        })
        .collect();
    Ok(ProtocolReport {
        gap,
        relaxation_ratio: seam_contrast(&relaxed) / seam_contrast(&joined),
        deterministic_return: sup_diff(&det, &joined) / gap,
        deterministic_vs_relaxed: sup_diff(&det, &relaxed),
        stochastic_vs_deterministic: stochastic,
        mode_deviation,
    })
}

impl ProtocolReport {
    pub fn checks(&self) -> Vec<ReportCheck> {
        let mut out = vec![
            ReportCheck {
                name: "forward_relaxes",
                pass: self.relaxation_ratio <= RELAXATION_LIMIT,
                detail: format!("seam contrast ratio {:.4} (limit {RELAXATION_LIMIT})", self.relaxation_ratio),
            },
            ReportCheck {
                name: "deterministic_returns",
                pass: self.deterministic_return < RETURN_LIMIT,
                detail: format!(
                    "|det - joined|_inf / gap = {:.3e} (limit {RETURN_LIMIT}, gap {:.4})",
                    self.deterministic_return, self.gap
                ),
            },
        ];
        for (m, d) in &self.stochastic_vs_deterministic {
            out.push(ReportCheck {
                name: if *m == DynamicsMode::GrwNoise {
                    "grw_noise_returns"
                } else {
                    "dissipative_returns"
                },
                pass: *d < self.deterministic_vs_relaxed,
                detail: format!(
                    "|{} - det|_inf = {d:.4e} vs |det - relaxed|_inf = {:.4e}",
                    m.name(),
                    self.deterministic_vs_relaxed
                ),
            });
        }
        let dev = |n: u32| self.mode_deviation.iter().find(|m| m.0 == n).map_or(f64::NAN, |m| m.1);
        out.push(ReportCheck {
            name: "mode_deviation_grows_with_k",
            pass: dev(14) > dev(1),
            detail: format!("integrated deviation n_x=1: {:.4e}, n_x=14: {:.4e}", dev(1), dev(14)),
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.n = 512;
        c.t_rev = 0.5;
        c.equilibration_time = 0.25;
        c.grid = 16;
        c.sample_every = 50;
        c.diagnostic_every = 2;
        c.output = dir.to_path_buf();
        c
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::parse(&s.name()).unwrap(), s);
        }
        assert!(Stage::parse("sideways").is_err());
    }

    #[test]
    fn missing_input_is_protocol_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        match run_stage(&cfg, Stage::Forward) {
            Err(Error::Protocol(m)) => assert!(m.contains("join.clmd")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seam_contrast_of_step_profiles() {
        let mut p = vec![1.0; 64];
        p[32..].iter_mut().for_each(|v| *v = 2.0);
        assert!((seam_contrast(&p) - 1.0).abs() < 1e-15);
        assert_eq!(seam_contrast(&[1.5; 64]), 0.0);
    }

    #[test]
    fn small_protocol_is_reproducible_and_complete() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = run_protocol(&small(d1.path())).unwrap();
        let m2 = run_protocol(&small(d2.path())).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(
            fs::read(d1.path().join(MANIFEST)).unwrap(),
            fs::read(d2.path().join(MANIFEST)).unwrap()
        );
        assert_eq!(m1.stages.len(), 8);
        // reruns share one input, the reversed checkpoint
        let reversed = &m1.stage("reverse").unwrap().outputs[0];
        for m in ["deterministic", "grw_noise", "dissipative_grw"] {
            let r = m1.stage(&format!("rerun_{m}")).unwrap();
            assert_eq!(r.inputs, vec![reversed.clone()]);
        }
        // reverse consumes the forward stage's final checkpoint
        let fwd = m1.stage("forward").unwrap();
        let fwd_final = fwd.outputs.iter().find(|a| a.path == "forward.clmd").unwrap();
        assert_eq!(m1.stage("reverse").unwrap().inputs, vec![fwd_final.clone()]);
        // deterministic rerun retraces the forward run exactly
        let join = load_particles(&d1.path().join("join.clmd")).unwrap();
        let back = load_particles(&d1.path().join("rerun_deterministic.clmd")).unwrap();
        assert_eq!(join.positions, back.positions);
        let rev: Vec<[f64; 2]> = back.velocities.iter().map(|v| [-v[0], -v[1]]).collect();
        assert_eq!(join.velocities, rev);
        let report = evaluate(d1.path()).unwrap();
        assert_eq!(report.deterministic_return, 0.0);
        assert_eq!(report.checks().len(), 5);
    }

    #[test]
    fn rerunning_a_stage_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        run_protocol(&cfg).unwrap();
        let before = fs::read(dir.path().join("rerun_grw_noise.clmd")).unwrap();
        let rec = run_stage(&cfg, Stage::Rerun(DynamicsMode::GrwNoise)).unwrap();
        assert_eq!(fs::read(dir.path().join("rerun_grw_noise.clmd")).unwrap(), before);
        let m = Manifest::load(dir.path()).unwrap().unwrap();
        assert_eq!(m.stage("rerun_grw_noise").unwrap(), &rec);
    }

    #[test]
    fn foreign_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        run_stage(&cfg, Stage::EquilibrateLeft).unwrap();
        let mut other = cfg.clone();
        other.seed = 99;
        assert!(matches!(run_stage(&other, Stage::EquilibrateRight), Err(Error::Protocol(_))));
    }
}
