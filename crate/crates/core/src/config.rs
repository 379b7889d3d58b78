//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confinement::EnvelopeSpec;
use crate::diagnostics::DiagnosticsSpec;
use crate::error::{Error, Result};
use crate::euler::{validate_schedule, EulerStepConfig};
use crate::initial::PatchSpec;
use crate::kernel::KernelConfig;
use crate::ns::NsStepConfig;
use crate::replay::{PlanParams, Regime};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CYLCONF_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Euler,
    Ns,
    BoundReplay,
    Report,
}

/// Kernel settings; a missing core radius means "use the blob core".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default = "default_normalization")]
    pub normalization: f64,
    #[serde(default)]
    pub core_radius: Option<f64>,
    #[serde(default)]
    pub truncation_radius: Option<f64>,
}

fn default_normalization() -> f64 {
    KernelConfig::default().normalization
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            normalization: default_normalization(),
            core_radius: None,
            truncation_radius: None,
        }
    }
}

impl KernelSpec {
    pub fn resolve(&self, patch: &PatchSpec) -> KernelConfig {
        KernelConfig {
            normalization: self.normalization,
            core_radius: self.core_radius.unwrap_or_else(|| patch.blob_core()),
            truncation_radius: self.truncation_radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Ns(NsStepConfig),
    Euler(EulerStepConfig),
}

impl StepSpec {
    pub fn dt(&self) -> f64 {
        match self {
            StepSpec::Ns(c) => c.dt,
            StepSpec::Euler(c) => c.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `t0, t0 + dt_out, t0 + 2 dt_out, ...`
    Linear { dt_out: f64 },
    /// `t0`, then `t_first * ratio^k` for the terms beyond `t0`.
    Geometric { t_first: f64, ratio: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Geometric {
            t_first: 1.0,
            ratio: 1.25,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Linear { dt_out } if !(dt_out > 0.0 && dt_out.is_finite()) => {
                Err(Error::Config(format!("linear schedule needs dt_out > 0, got {dt_out}")))
            }
            Schedule::Geometric { t_first, ratio } if !(t_first > 0.0 && ratio > 1.0 && ratio.is_finite()) => Err(
                Error::Config(format!("geometric schedule needs t_first > 0 and ratio > 1, got ({t_first}, {ratio})")),
            ),
            _ => Ok(()),
        }
    }

    /// Sampling times in `[t0, t_end]` (a relative slack of `1e-12` admits
    /// rounding at the end point).
    pub fn times(&self, t0: f64, t_end: f64) -> Vec<f64> {
        let end = t_end + 1e-12 * t_end.abs().max(1.0);
        let mut out = vec![t0];
        match *self {
            Schedule::Linear { dt_out } => {
                let mut k = 1u64;
                loop {
                    let t = t0 + k as f64 * dt_out;
                    if t > end {
                        break;
                    }
                    out.push(t);
                    k += 1;
                }
            }
            Schedule::Geometric { t_first, ratio } => {
                let mut k = 0i32;
                loop {
                    let t = t_first * ratio.powi(k);
                    if t > end {
                        break;
                    }
                    if t > t0 {
                        out.push(t);
                    }
                    k += 1;
                }
            }
        }
        out
    }
}

/// Bound-replay sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySpec {
    pub regime: Regime,
    /// Values of `log t` to replay.
    pub log_t: Vec<f64>,
    pub params: PlanParams,
    /// Recursion constant `C`; `C' = 4 e C` in the closed forms.
    pub big_c: f64,
    #[serde(default = "default_m0")]
    pub m0: f64,
    /// Initial support radius in `|x1|`.
    #[serde(default = "default_support")]
    pub support_radius: f64,
}

fn default_m0() -> f64 {
    1.0
}

fn default_support() -> f64 {
    1.0
}

/// Confinement-report settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub envelope: EnvelopeSpec,
    /// Diagnostics CSV files; empty means the per-seed files of this
    /// config's output directory.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default = "default_patch")]
    pub patch: PatchSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_step")]
    pub step: StepSpec,
    #[serde(default)]
    pub viscosity: f64,
    #[serde(default)]
    pub t_end: f64,
    #[serde(default)]
    pub diagnostics_schedule: Schedule,
    #[serde(default)]
    pub h_grid: Vec<f64>,
    #[serde(default)]
    pub mollifier_pairs: Vec<(f64, f64)>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Worker threads for independent seeds (0 means the rayon default).
    #[serde(default)]
    pub parallel_seeds: usize,
    #[serde(default)]
    pub replay: Option<ReplaySpec>,
    #[serde(default)]
    pub report: Option<ReportSpec>,
}

fn default_patch() -> PatchSpec {
    PatchSpec::standard(500)
}

fn default_step() -> StepSpec {
    StepSpec::Euler(EulerStepConfig::rk4(0.01))
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn diagnostics(&self) -> DiagnosticsSpec {
        DiagnosticsSpec {
            h_grid: self.h_grid.clone(),
            mollifier_pairs: self.mollifier_pairs.clone(),
        }
    }

    pub fn kernel_config(&self) -> KernelConfig {
        self.kernel.resolve(&self.patch)
    }

    /// Output directory: explicit, else `$CYLCONF_OUTPUT_ROOT`, else
    /// `./cylconf-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("cylconf-out"))
        })
    }

    pub fn schedule_times(&self, t0: f64) -> Vec<f64> {
        self.diagnostics_schedule.times(t0, self.t_end)
    }

    /// The step config for seed number `k`.
    pub fn ns_step(&self, k: usize) -> Result<NsStepConfig> {
        match self.step {
            StepSpec::Ns(mut c) => {
                if let Some(&seed) = self.seeds.get(k) {
                    c.rng_seed = seed;
                }
                c.ensemble_id = k as u64;
                Ok(c)
            }
            StepSpec::Euler(_) => Err(Error::Config("ns mode needs an ns step (with a transport block)".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        };
        self.diagnostics().validate()?;
        self.diagnostics_schedule.validate()?;
        match self.mode {
            Mode::Euler | Mode::Ns => {
                self.patch.validate().map_err(cfg)?;
                self.kernel_config().validate().map_err(cfg)?;
                if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
                    return Err(Error::Config(format!("t_end must be finite and >= 0, got {}", self.t_end)));
                }
                if !(self.viscosity >= 0.0 && self.viscosity.is_finite()) {
                    return Err(Error::Config(format!("viscosity must be >= 0, got {}", self.viscosity)));
                }
                if self.seeds.is_empty() {
                    return Err(Error::Config("at least one seed is required".into()));
                }
                validate_schedule(&self.schedule_times(0.0)).map_err(cfg)?;
                match (self.mode, &self.step) {
                    (Mode::Euler, StepSpec::Euler(c)) => {
                        c.validate().map_err(cfg)?;
                        if self.viscosity != 0.0 {
                            return Err(Error::Config("euler mode requires zero viscosity".into()));
                        }
                    }
                    (Mode::Ns, StepSpec::Ns(c)) => c.validate().map_err(cfg)?,
                    (Mode::Euler, StepSpec::Ns(_)) => {
                        return Err(Error::Config("euler mode takes a plain transport step".into()))
                    }
                    (_, _) => return Err(Error::Config("ns mode needs an ns step (with a transport block)".into())),
                }
            }
            Mode::BoundReplay => {
                let r = self
                    .replay
                    .as_ref()
                    .ok_or_else(|| Error::Config("bound_replay mode needs a replay block".into()))?;
                if r.log_t.is_empty() {
                    return Err(Error::Config("replay needs at least one log_t value".into()));
                }
            }
            Mode::Report => {
                let r = self
                    .report
                    .as_ref()
                    .ok_or_else(|| Error::Config("report mode needs a report block".into()))?;
                r.envelope.validate().map_err(cfg)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::Scheme;

    fn sample() -> RunConfig {
        RunConfig {
            mode: Mode::Ns,
            patch: PatchSpec::standard(100),
            kernel: KernelSpec::default(),
            step: StepSpec::Ns(NsStepConfig::new(0.1, EulerStepConfig::rk4(0.1), 3)),
            viscosity: 0.01,
            t_end: 10.0,
            diagnostics_schedule: Schedule::Linear { dt_out: 1.0 },
            h_grid: vec![0.5, 1.0, 2.0],
            mollifier_pairs: vec![(2.0, 0.5)],
            output_dir: Some("out".into()),
            seeds: vec![1, 2, 3],
            parallel_seeds: 0,
            replay: None,
            report: None,
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::from_json(&back.to_json()).unwrap().to_json(), c.to_json());
    }

    #[test]
    fn untagged_step_is_recognised() {
        let c = RunConfig::from_json(r#"{"mode": "euler", "step": {"dt": 0.05, "scheme": "rk2"}}"#).unwrap();
        assert_eq!(
            c.step,
            StepSpec::Euler(EulerStepConfig {
                dt: 0.05,
                scheme: Scheme::Rk2,
                adaptive_tolerance: None
            })
        );
        let c = RunConfig::from_json(
            r#"{"mode": "ns", "viscosity": 0.01, "step": {"dt": 0.1, "transport": {"dt": 0.05}, "rng_seed": 4}}"#,
        )
        .unwrap();
        assert!(matches!(c.step, StepSpec::Ns(_)));
        c.validate().unwrap();
    }

    #[test]
    fn schedules() {
        let l = Schedule::Linear { dt_out: 0.5 }.times(0.0, 2.0);
        assert_eq!(l, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = Schedule::Geometric { t_first: 1.0, ratio: 2.0 }.times(0.0, 10.0);
        assert_eq!(g, vec![0.0, 1.0, 2.0, 4.0, 8.0]);
        assert_eq!(Schedule::default().times(3.0, 3.0), vec![3.0]);
        assert!(Schedule::Geometric { t_first: 1.0, ratio: 1.0 }.validate().is_err());
    }

    #[test]
    fn invalid_pair_is_named() {
        let mut c = sample();
        c.mollifier_pairs = vec![(1.0, 0.6)];
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("R = 1, h = 0.6"), "{e}");
    }

    #[test]
    fn mode_step_mismatch() {
        let mut c = sample();
        c.mode = Mode::Euler;
        assert!(c.validate().is_err());
        c.step = StepSpec::Euler(EulerStepConfig::rk4(0.1));
        assert!(c.validate().is_err()); // viscosity still set
        c.viscosity = 0.0;
        c.validate().unwrap();
    }
}
