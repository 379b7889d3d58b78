//! Viscous dynamics by random-vortex splitting: a transport substep followed
//! by an independent Gaussian displacement of every blob.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSpec};
use crate::error::{domain, Result};
use crate::euler::{drive, EulerStepConfig, Transport};
use crate::kernel::CylPoint;
use crate::rng::gaussian_pairs;
use crate::state::FlowState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsStepConfig {
    pub dt: f64,
    /// Transport integrator. Its `dt` must divide `dt` evenly; the transport
    /// substep is then taken as that many subcycles.
    pub transport: EulerStepConfig,
    pub rng_seed: u64,
    #[serde(default)]
    pub ensemble_id: u64,
}

impl NsStepConfig {
    pub fn new(dt: f64, transport: EulerStepConfig, rng_seed: u64) -> Self {
        Self {
            dt,
            transport: EulerStepConfig { dt, ..transport },
            rng_seed,
            ensemble_id: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(domain(format!("time step must be positive, got {}", self.dt)));
        }
        self.transport.validate()?;
        self.subcycles().map(|_| ())
    }

    fn subcycles(&self) -> Result<u32> {
        let ratio = self.dt / self.transport.dt;
        let n = ratio.round();
        if n < 1.0 || (n - ratio).abs() > 1e-9 * ratio || n > u32::MAX as f64 {
            return Err(domain(format!(
                "transport dt {} does not divide the step dt {}",
                self.transport.dt, self.dt
            )));
        }
        Ok(n as u32)
    }
}

/// Working buffers reused across steps.
struct Stepper {
    transport: Transport,
    noise: Vec<[f64; 2]>,
    subcycles: u32,
    sub: EulerStepConfig,
}

impl Stepper {
    fn new(state: &FlowState, cfg: &NsStepConfig) -> Result<Self> {
        let subcycles = cfg.subcycles()?;
        Ok(Self {
            transport: Transport::new(state),
            noise: vec![[0.0; 2]; state.len()],
            subcycles,
            sub: EulerStepConfig {
                dt: cfg.dt / subcycles as f64,
                ..cfg.transport
            },
        })
    }

    fn step(&mut self, state: &mut FlowState, cfg: &NsStepConfig) -> Result<()> {
        self.transport.load(state);
        for _ in 0..self.subcycles {
            self.transport.step(self.sub.dt, &self.sub)?;
        }
        let amp = (2.0 * state.viscosity * cfg.dt).sqrt();
        if amp > 0.0 {
            gaussian_pairs(cfg.rng_seed, state.stream.step, &mut self.noise);
            let (x1, x2) = self.transport.positions_mut();
            for (i, z) in self.noise.iter().enumerate() {
                x1[i] += amp * z[0];
                x2[i] += amp * z[1];
            }
        }
        self.transport.store(&mut state.blobs);
        state.time += cfg.dt;
        state.stream.seed = cfg.rng_seed;
        state.stream.ensemble_id = cfg.ensemble_id;
        state.stream.step += 1;
        Ok(())
    }
}

/// One viscous step. The increments of step `k` are keyed by
/// `(rng_seed, k, blob index)`, with `k` taken from the state's stream
/// counter. Zero viscosity is accepted and reduces to pure transport.
pub fn ns_step(state: &FlowState, cfg: &NsStepConfig) -> Result<FlowState> {
    cfg.validate()?;
    let mut next = state.clone();
    Stepper::new(state, cfg)?.step(&mut next, cfg)?;
    Ok(next)
}

/// Integrate to `t_end`; records carry `cfg.ensemble_id`.
pub fn run_ns<F>(
    s0: FlowState,
    t_end: f64,
    cfg: &NsStepConfig,
    schedule: &[f64],
    diag: &DiagnosticsSpec,
    sink: F,
) -> Result<FlowState>
where
    F: FnMut(&FlowState, DiagnosticsRecord) -> Result<()>,
{
    cfg.validate()?;
    let mut stepper = Stepper::new(&s0, cfg)?;
    drive(
        s0,
        t_end,
        cfg.dt,
        schedule,
        diag,
        Some(cfg.ensemble_id),
        |s| stepper.step(s, cfg),
        sink,
    )
}

/// [`run_ns`] collecting the records.
pub fn run_ns_collect(
    s0: FlowState,
    t_end: f64,
    cfg: &NsStepConfig,
    schedule: &[f64],
    diag: &DiagnosticsSpec,
) -> Result<(FlowState, Vec<DiagnosticsRecord>)> {
    let mut out = Vec::new();
    let s = run_ns(s0, t_end, cfg, schedule, diag, |_, r| {
        out.push(r);
        Ok(())
    })?;
    Ok((s, out))
}

/// Position of blob `index` after a pure-diffusion step from `p`; exposes
/// the increment law for tests and bindings.
pub fn diffuse_point(p: CylPoint, viscosity: f64, dt: f64, seed: u64, step: u64, index: usize) -> CylPoint {
    let z = crate::rng::gaussian_pair(seed, step, index);
    let amp = (2.0 * viscosity * dt).sqrt();
    CylPoint::new(p.x1() + amp * z[0], p.x2() + amp * z[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::euler_step;
    use crate::kernel::KernelConfig;
    use crate::state::Blob;

    fn cluster(n: usize, gamma: f64, nu: f64) -> FlowState {
        let blobs = (0..n)
            .map(|i| Blob::new(0.01 * (i as f64 - n as f64 / 2.0), 1.0 + 0.003 * i as f64, gamma, 0.05))
            .collect();
        FlowState::new(blobs, KernelConfig::with_core(0.05), nu).unwrap()
    }

    #[test]
    fn zero_viscosity_is_transport() {
        let s = cluster(20, 0.05, 0.0);
        let cfg = NsStepConfig::new(0.05, EulerStepConfig::rk4(0.05), 9);
        let a = ns_step(&s, &cfg).unwrap();
        let b = euler_step(&s, &EulerStepConfig::rk4(0.05)).unwrap();
        assert_eq!(a.blobs, b.blobs);
        assert_eq!(a.time, b.time);
    }

    #[test]
    fn pure_diffusion_uses_keyed_increments() {
        let s = cluster(10, 0.0, 0.5);
        let cfg = NsStepConfig::new(0.1, EulerStepConfig::rk4(0.1), 3);
        let next = ns_step(&s, &cfg).unwrap();
        for (i, (a, b)) in s.blobs.iter().zip(&next.blobs).enumerate() {
            let expect = diffuse_point(a.pos, 0.5, 0.1, 3, 0, i);
            assert_eq!(b.pos, expect);
            assert_eq!(a.gamma, b.gamma);
        }
        assert_eq!(next.stream.step, 1);
    }

    #[test]
    fn subcycled_transport() {
        let s = cluster(12, 0.1, 0.01);
        let mut cfg = NsStepConfig::new(0.1, EulerStepConfig::rk4(0.025), 1);
        cfg.transport.dt = 0.025;
        let a = ns_step(&s, &cfg).unwrap();
        assert!((a.time - 0.1).abs() < 1e-15);
        cfg.transport.dt = 0.03;
        assert!(ns_step(&s, &cfg).is_err());
    }

    #[test]
    fn run_records_carry_ensemble_id() {
        let s = cluster(8, 0.1, 0.01);
        let mut cfg = NsStepConfig::new(0.1, EulerStepConfig::rk4(0.1), 5);
        cfg.ensemble_id = 17;
        let (end, recs) = run_ns_collect(s.clone(), 1.0, &cfg, &[0.0, 0.5, 1.0], &DiagnosticsSpec::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.ensemble_id == Some(17)));
        assert!(recs.iter().all(|r| (r.total_mass - s.total_mass()).abs() == 0.0));
        assert_eq!(end.stream.step, 10);
    }

    #[test]
    fn run_equals_repeated_steps() {
        let s = cluster(16, 0.05, 0.02);
        let cfg = NsStepConfig::new(0.05, EulerStepConfig::rk4(0.05), 11);
        let (end, _) = run_ns_collect(s.clone(), 0.5, &cfg, &[], &DiagnosticsSpec::default()).unwrap();
        let mut t = s;
        for _ in 0..10 {
            t = ns_step(&t, &cfg).unwrap();
        }
        assert_eq!(end.blobs, t.blobs);
    }
}
