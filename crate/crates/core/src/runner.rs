//! End-to-end orchestration behind the command-line front end: run
//! manifests, per-seed diagnostics CSVs, checkpoints, aggregates, reports
//! and bound-replay sweeps.

use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{write_atomic, Checkpoint};
use crate::config::{Mode, RunConfig, StepSpec};
use crate::confinement::{build_report, write_report_csv, ConfinementReport};
use crate::diagnostics::{
    aggregate, read_csv, write_aggregate_csv, write_csv, DiagnosticsRecord, DiagnosticsSpec,
};
use crate::error::{Error, Result};
use crate::euler::run_euler;
use crate::initial::discretize_with;
use crate::kernel::{validate_decay_envelope, DecayEnvelope, ValidationReport};
use crate::ns::run_ns;
use crate::replay::{make_plan_log, recursive_log_bound, sweep_row, BoundCertificate, IterationPlan, SWEEP_CSV_HEADER};
use crate::state::FlowState;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Grid size used to certify the decay envelope recorded in manifests.
const ENVELOPE_SAMPLES: usize = 4096;

const MODEL_NOTES: [&str; 2] = [
    "velocity is the omega-only cylindrical Biot-Savart sum; the x2-directed mean-flow correction is omitted in both the Euler and Navier-Stokes modes",
    "viscous runs use random-vortex splitting (transport, then Gaussian displacement with variance 2 nu dt per coordinate)",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutput {
    pub seed: u64,
    pub ensemble_id: u64,
    pub diagnostics: PathBuf,
    pub checkpoint: PathBuf,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub code_version: String,
    pub config: RunConfig,
    pub decay_envelope: ValidationReport,
    pub normalization: f64,
    pub model_notes: Vec<String>,
    pub warnings: Vec<String>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<SeedOutput>,
    pub artifacts: Vec<PathBuf>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }

    fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Result of a run: the final manifest plus the report when one was built.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    pub report: Option<ConfinementReport>,
    pub certificates: Vec<ReplayEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub plan: IterationPlan,
    pub certificate: Option<BoundCertificate>,
    pub error: Option<String>,
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Execute `config`, writing every artifact under its output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let out = config.output_dir();
    fs::create_dir_all(&out)?;
    let clock = Instant::now();
    let kernel = config.kernel_config();
    let mut manifest = RunManifest {
        status: RunStatus::Running,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        decay_envelope: validate_decay_envelope(DecayEnvelope::default(), ENVELOPE_SAMPLES)?,
        normalization: kernel.normalization,
        model_notes: MODEL_NOTES.iter().map(|s| s.to_string()).collect(),
        warnings: match config.mode {
            Mode::Euler | Mode::Ns => config.patch.warnings(),
            _ => Vec::new(),
        },
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_clock_seconds: 0.0,
        outputs: Vec::new(),
        artifacts: Vec::new(),
        error: None,
    };
    if config.mode == Mode::Euler && config.seeds.len() > 1 {
        manifest
            .warnings
            .push("euler runs are deterministic; only the first seed is simulated".into());
    }
    manifest.save(&out)?;

    let mut outcome = RunOutcome {
        output_dir: out.clone(),
        manifest: manifest.clone(),
        report: None,
        certificates: Vec::new(),
    };
    let result = execute(config, &out, &mut manifest, &mut outcome);
    manifest.wall_clock_seconds = clock.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            manifest.status = RunStatus::Complete;
            manifest.save(&out)?;
            outcome.manifest = manifest;
            Ok(outcome)
        }
        Err(e) => {
            manifest.status = RunStatus::Incomplete;
            manifest.error = Some(e.to_string());
            // the original error matters more than a failure to record it
            let _ = manifest.save(&out);
            Err(e)
        }
    }
}

fn execute(config: &RunConfig, out: &Path, manifest: &mut RunManifest, outcome: &mut RunOutcome) -> Result<()> {
    match config.mode {
        Mode::Euler | Mode::Ns => {
            let jobs: Vec<usize> = if config.mode == Mode::Euler {
                vec![0]
            } else {
                (0..config.seeds.len()).collect()
            };
            let work = |k: &usize| run_seed(config, *k, out, None);
            let results: Vec<Result<SeedOutput>> = if config.parallel_seeds == 1 {
                jobs.iter().map(work).collect()
            } else if config.parallel_seeds == 0 {
                jobs.par_iter().map(work).collect()
            } else {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.parallel_seeds)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?
                    .install(|| jobs.par_iter().map(work).collect())
            };
            for r in results {
                manifest.outputs.push(r?);
            }
            let agg = write_aggregate(out, &manifest.outputs)?;
            manifest.artifacts.push(agg);
        }
        Mode::BoundReplay => {
            let (entries, artifacts) = replay_sweep(config, out)?;
            outcome.certificates = entries;
            manifest.artifacts.extend(artifacts);
        }
        Mode::Report => {
            let (report, artifacts) = report(config, out)?;
            outcome.report = Some(report);
            manifest.artifacts.extend(artifacts);
        }
    }
    Ok(())
}

fn initial_state(config: &RunConfig, k: usize) -> Result<FlowState> {
    let mut s = discretize_with(&config.patch, config.kernel_config(), config.viscosity)?;
    s.stream.seed = config.seeds[k];
    s.stream.ensemble_id = k as u64;
    Ok(s)
}

/// Integrate one seed from its initial state, or from `start` when
/// resuming, appending rows to the seed's CSV.
fn run_seed(config: &RunConfig, k: usize, out: &Path, start: Option<FlowState>) -> Result<SeedOutput> {
    let seed = config.seeds[k];
    let dir = seed_dir(out, seed);
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join(DIAGNOSTICS_FILE);
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    let diag = config.diagnostics();
    let dt = config.step.dt();

    let (state, mut rows, file) = match start {
        None => {
            let state = initial_state(config, k)?;
            let mut w = csv::Writer::from_writer(File::create(&csv_path)?);
            w.write_record(diag.csv_header())?;
            w.flush()?;
            (state, 0usize, OpenOptions::new().append(true).open(&csv_path)?)
        }
        Some(state) => {
            // keep rows up to the checkpoint, drop any written after it
            let (found, mut recs) = match File::open(&csv_path) {
                Ok(f) => read_csv(f)?,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => (diag.clone(), Vec::new()),
                Err(e) => return Err(e.into()),
            };
            if found != diag {
                return Err(Error::Config(format!(
                    "{} was written with different diagnostics columns",
                    csv_path.display()
                )));
            }
            recs.retain(|r| r.time <= state.time + 0.5 * dt);
            let mut buf = Vec::new();
            write_csv(&mut buf, &diag, &recs)?;
            write_atomic(&csv_path, &buf)?;
            (state, recs.len(), OpenOptions::new().append(true).open(&csv_path)?)
        }
    };

    let schedule: Vec<f64> = config
        .schedule_times(0.0)
        .into_iter()
        .filter(|&t| rows == 0 || t > state.time + 0.5 * dt)
        .collect();
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let mut sink = |s: &FlowState, rec: DiagnosticsRecord| -> Result<()> {
        writer.write_record(rec.csv_row())?;
        writer.flush()?;
        rows += 1;
        Checkpoint::new(s.clone(), config.clone(), k).save(&ckpt_path)
    };
    let end = match config.step {
        StepSpec::Euler(c) => run_euler(state, config.t_end, &c, &schedule, &diag, &mut sink)?,
        StepSpec::Ns(_) => run_ns(state, config.t_end, &config.ns_step(k)?, &schedule, &diag, &mut sink)?,
    };
    writer.flush()?;
    Checkpoint::new(end, config.clone(), k).save(&ckpt_path)?;
    Ok(SeedOutput {
        seed,
        ensemble_id: k as u64,
        diagnostics: csv_path,
        checkpoint: ckpt_path,
        rows,
    })
}

fn write_aggregate(out: &Path, outputs: &[SeedOutput]) -> Result<PathBuf> {
    let mut spec = DiagnosticsSpec::default();
    let mut streams = Vec::with_capacity(outputs.len());
    for o in outputs {
        let (s, recs) = read_csv(File::open(&o.diagnostics)?)?;
        spec = s;
        streams.push(recs);
    }
    let rows = aggregate(&streams)?;
    let path = out.join(AGGREGATE_FILE);
    let mut buf = Vec::new();
    write_aggregate_csv(&mut buf, &spec, &rows)?;
    write_atomic(&path, &buf)?;
    Ok(path)
}

/// Ensemble-mean records (one stream is returned unchanged).
pub fn mean_records(streams: &[Vec<DiagnosticsRecord>]) -> Result<Vec<DiagnosticsRecord>> {
    if streams.len() == 1 {
        return Ok(streams[0].clone());
    }
    let rows = aggregate(streams)?;
    let first = &streams[0];
    Ok(rows
        .iter()
        .zip(first)
        .map(|(row, proto)| {
            let m = &row.mean;
            let nt = proto.tail_mass.len();
            DiagnosticsRecord {
                time: row.time,
                total_mass: m[0],
                diameter: m[1],
                max_abs_x1: m[2],
                center_x1: (!m[3].is_nan()).then_some(m[3]),
                first_moment_x1: m[4],
                hamiltonian: m[5],
                tail_mass: proto.tail_mass.iter().zip(&m[6..6 + nt]).map(|(&(h, _), &v)| (h, v)).collect(),
                mollified_tail: proto
                    .mollified_tail
                    .iter()
                    .zip(&m[6 + nt..])
                    .map(|(&(r, h, _), &v)| (r, h, v))
                    .collect(),
                ensemble_id: None,
            }
        })
        .collect())
}

fn report(config: &RunConfig, out: &Path) -> Result<(ConfinementReport, Vec<PathBuf>)> {
    let spec = config
        .report
        .as_ref()
        .ok_or_else(|| Error::Config("report mode needs a report block".into()))?;
    let inputs: Vec<PathBuf> = if spec.inputs.is_empty() {
        config
            .seeds
            .iter()
            .map(|&s| seed_dir(out, s).join(DIAGNOSTICS_FILE))
            .filter(|p| p.exists())
            .collect()
    } else {
        spec.inputs.clone()
    };
    if inputs.is_empty() {
        return Err(Error::Config("report found no diagnostics CSV to read".into()));
    }
    let mut streams = Vec::new();
    for p in &inputs {
        streams.push(read_csv(File::open(p)?)?.1);
    }
    let mut recs = mean_records(&streams)?;
    recs.retain(|r| r.time > 1.0);
    let rep = build_report(&recs, &spec.envelope, spec.window)?;
    let json = out.join("report.json");
    write_atomic(&json, serde_json::to_string_pretty(&rep)?.as_bytes())?;
    let csv_path = out.join("report.csv");
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &rep)?;
    write_atomic(&csv_path, &buf)?;
    Ok((rep, vec![json, csv_path]))
}

fn replay_sweep(config: &RunConfig, out: &Path) -> Result<(Vec<ReplayEntry>, Vec<PathBuf>)> {
    let spec = config
        .replay
        .as_ref()
        .ok_or_else(|| Error::Config("bound_replay mode needs a replay block".into()))?;
    let mut entries = Vec::with_capacity(spec.log_t.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_CSV_HEADER)?;
    for &lt in &spec.log_t {
        let plan = make_plan_log(spec.regime, lt, spec.params, spec.big_c).map_err(|e| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        })?;
        let (certificate, error) = match recursive_log_bound(&plan, spec.m0, spec.support_radius) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        w.write_record(sweep_row(&plan, certificate.as_ref()))?;
        entries.push(ReplayEntry {
            plan,
            certificate,
            error,
        });
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let csv_path = out.join("sweep.csv");
    write_atomic(&csv_path, &bytes)?;
    let json = out.join("certificates.json");
    write_atomic(&json, serde_json::to_string_pretty(&entries)?.as_bytes())?;
    Ok((entries, vec![csv_path, json]))
}

/// Overrides accepted by [`resume`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResumeOptions {
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub allow_param_change: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResumeOutcome {
    /// The checkpoint already reached `t_end`; nothing was done.
    pub noop: bool,
    pub output: Option<SeedOutput>,
}

/// Continue the run stored in `checkpoint`. The seed's CSV is truncated to
/// the checkpoint time and extended; the counter-based random stream makes
/// the continuation bit-identical to an uninterrupted run.
pub fn resume(checkpoint: &Path, opts: ResumeOptions) -> Result<ResumeOutcome> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut config = ckpt.config.clone();
    if let Some(t) = opts.t_end {
        config.t_end = t;
    }
    if let Some(dt) = opts.dt {
        if dt != config.step.dt() {
            if !opts.allow_param_change {
                return Err(Error::Config(format!(
                    "checkpoint was written with dt = {}; refusing dt = {dt} without --allow-param-change",
                    config.step.dt()
                )));
            }
            config.step = match config.step {
                StepSpec::Euler(mut c) => {
                    c.dt = dt;
                    StepSpec::Euler(c)
                }
                StepSpec::Ns(mut c) => {
                    if c.transport.dt == c.dt {
                        c.transport.dt = dt;
                    }
                    c.dt = dt;
                    StepSpec::Ns(c)
                }
            };
        }
    }
    config.validate()?;
    if ckpt.seed_index >= config.seeds.len() {
        return Err(Error::Config("checkpoint seed index is outside the seed list".into()));
    }
    if ckpt.state.time >= config.t_end - 0.5 * config.step.dt() {
        return Ok(ResumeOutcome {
            noop: true,
            output: None,
        });
    }
    let seed_path = checkpoint
        .parent()
        .ok_or_else(|| Error::Config("checkpoint path has no parent directory".into()))?;
    let out = seed_path.parent().unwrap_or(Path::new("."));
    let o = run_seed(&config, ckpt.seed_index, out, Some(ckpt.state))?;
    if let Ok(mut m) = RunManifest::load(out) {
        if let Some(slot) = m.outputs.iter_mut().find(|s| s.seed == o.seed) {
            *slot = o.clone();
        }
        if m.outputs.iter().all(|s| s.rows == o.rows) {
            write_aggregate(out, &m.outputs)?;
        }
        m.config.t_end = config.t_end;
        m.save(out)?;
    }
    Ok(ResumeOutcome {
        noop: false,
        output: Some(o),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_config(dir: &Path, t_end: f64) -> RunConfig {
        let mut c = RunConfig::from_json(
            r#"{"mode": "euler", "step": {"dt": 0.1}, "h_grid": [0.5, 1.0],
                "mollifier_pairs": [[1.0, 0.25]],
                "diagnostics_schedule": {"kind": "linear", "dt_out": 0.5}}"#,
        )
        .unwrap();
        c.patch.n_blobs = 40;
        c.t_end = t_end;
        c.output_dir = Some(dir.to_path_buf());
        c
    }

    #[test]
    fn euler_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&euler_config(dir.path(), 2.0)).unwrap();
        assert_eq!(o.manifest.status, RunStatus::Complete);
        assert_eq!(o.manifest.outputs.len(), 1);
        assert_eq!(o.manifest.outputs[0].rows, 5);
        let (_, recs) = read_csv(File::open(&o.manifest.outputs[0].diagnostics).unwrap()).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(dir.path().join(AGGREGATE_FILE).exists());
        assert!(o.manifest.decay_envelope.pass);
        let m = RunManifest::load(dir.path()).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
    }

    #[test]
    fn zero_length_run_records_initial_state() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&euler_config(dir.path(), 0.0)).unwrap();
        assert_eq!(o.manifest.outputs[0].rows, 1);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run(&euler_config(a.path(), 3.0)).unwrap();
        let o = run(&euler_config(b.path(), 1.5)).unwrap();
        let ck = o.manifest.outputs[0].checkpoint.clone();
        let r = resume(
            &ck,
            ResumeOptions {
                t_end: Some(3.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!r.noop);
        let x = fs::read(seed_dir(a.path(), 0).join(DIAGNOSTICS_FILE)).unwrap();
        let y = fs::read(seed_dir(b.path(), 0).join(DIAGNOSTICS_FILE)).unwrap();
        assert_eq!(x, y);
        // already at t_end
        assert!(resume(&ck, ResumeOptions::default()).unwrap().noop);
    }

    #[test]
    fn resume_refuses_dt_change() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&euler_config(dir.path(), 1.0)).unwrap();
        let ck = &o.manifest.outputs[0].checkpoint;
        let e = resume(
            ck,
            ResumeOptions {
                t_end: Some(2.0),
                dt: Some(0.05),
                allow_param_change: false,
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let ok = resume(
            ck,
            ResumeOptions {
                t_end: Some(2.0),
                dt: Some(0.05),
                allow_param_change: true,
            },
        )
        .unwrap();
        assert!(!ok.noop);
    }

    #[test]
    fn replay_mode_writes_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::from_json(&format!(
            r#"{{"mode": "bound_replay", "replay": {{"regime": "ns_a", "log_t": [10, 20, 40],
                "params": {{"alpha": 2}}, "big_c": {}}}}}"#,
            crate::replay::big_c_from_c_prime(1.0)
        ))
        .unwrap();
        c.output_dir = Some(dir.path().to_path_buf());
        let o = run(&c).unwrap();
        assert_eq!(o.certificates.len(), 3);
        let closed = o.certificates[0].certificate.as_ref().unwrap().log_closed_form;
        assert!((closed + 10.0 * 10f64.ln()).abs() < 1e-9);
        let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn failed_run_marks_manifest_incomplete() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::from_json(r#"{"mode": "report", "report": {"envelope": {"kind": "ns_sqrt_log", "alpha": 2}}}"#).unwrap();
        c.output_dir = Some(dir.path().to_path_buf());
        let e = run(&c).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let m = RunManifest::load(dir.path()).unwrap();
        assert_eq!(m.status, RunStatus::Incomplete);
        assert!(m.error.is_some());
    }
}
