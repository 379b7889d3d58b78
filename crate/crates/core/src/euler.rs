//! Inviscid transport: every blob moves with the velocity induced by the
//! whole ensemble, integrated with an explicit Runge-Kutta scheme.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSpec};
use crate::error::{domain, Error, Result};
use crate::kernel::{induced_velocity_soa, KernelConfig, SourceSlice, Vec2};
use crate::state::{Blob, FlowState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    Rk2,
    EulerFwd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerStepConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// When set, an RK4 step whose embedded midpoint estimate differs by more
    /// than this (max norm) is split into two half steps, recursively.
    #[serde(default)]
    pub adaptive_tolerance: Option<f64>,
}

impl EulerStepConfig {
    pub fn rk4(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::Rk4,
            adaptive_tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(domain(format!("time step must be positive, got {}", self.dt)));
        }
        if let Some(tol) = self.adaptive_tolerance {
            if !(tol > 0.0) {
                return Err(domain(format!("adaptive tolerance must be positive, got {tol}")));
            }
            if self.scheme != Scheme::Rk4 {
                return Err(domain("adaptive stepping requires the rk4 scheme"));
            }
        }
        Ok(())
    }
}

const MAX_SPLIT_DEPTH: u32 = 16;

/// Scratch buffers for one transport integration.
pub(crate) struct Transport {
    kernel: KernelConfig,
    gamma: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    k: [Vec<Vec2>; 4],
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Transport {
    pub(crate) fn new(state: &FlowState) -> Self {
        let n = state.len();
        Self {
            kernel: state.kernel,
            gamma: state.gammas(),
            x1: state.x1(),
            x2: state.x2(),
            k: std::array::from_fn(|_| vec![[0.0, 0.0]; n]),
            s1: vec![0.0; n],
            s2: vec![0.0; n],
        }
    }

    pub(crate) fn load(&mut self, state: &FlowState) {
        for (i, b) in state.blobs.iter().enumerate() {
            self.x1[i] = b.pos.x1();
            self.x2[i] = b.pos.x2();
        }
    }

    /// Write the integrated positions back; circulations are untouched.
    pub(crate) fn store(&self, blobs: &mut [Blob]) {
        for (i, b) in blobs.iter_mut().enumerate() {
            b.pos = crate::kernel::CylPoint::new(self.x1[i], self.x2[i]);
        }
    }

    pub(crate) fn positions_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x1, &mut self.x2)
    }

    fn eval(kernel: &KernelConfig, gamma: &[f64], x1: &[f64], x2: &[f64], out: &mut [Vec2]) -> Result<()> {
        induced_velocity_soa(x1, x2, SourceSlice { x1, x2, gamma }, kernel, out);
        let bad: Vec<usize> = out
            .iter()
            .enumerate()
            .filter(|(_, v)| !(v[0].is_finite() && v[1].is_finite()))
            .map(|(i, _)| i)
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::NonFiniteVelocity { indices: bad })
        }
    }

    /// Stage positions `x + a dt k` into the scratch buffers.
    fn stage(&mut self, from: usize, a: f64) {
        let k = &self.k[from];
        for i in 0..self.x1.len() {
            self.s1[i] = self.x1[i] + a * k[i][0];
            self.s2[i] = self.x2[i] + a * k[i][1];
        }
    }

    pub(crate) fn step(&mut self, dt: f64, cfg: &EulerStepConfig) -> Result<()> {
        match cfg.adaptive_tolerance {
            Some(tol) => self.adaptive(dt, tol, 0),
            None => self.fixed(dt, cfg.scheme).map(|_| ()),
        }
    }

    fn adaptive(&mut self, dt: f64, tol: f64, depth: u32) -> Result<()> {
        let saved = (self.x1.clone(), self.x2.clone());
        let err = self.fixed(dt, Scheme::Rk4)?;
        if err <= tol || depth >= MAX_SPLIT_DEPTH {
            return Ok(());
        }
        self.x1 = saved.0;
        self.x2 = saved.1;
        self.adaptive(0.5 * dt, tol, depth + 1)?;
        self.adaptive(0.5 * dt, tol, depth + 1)
    }

    /// One step; returns the max-norm gap to the embedded midpoint step
    /// (zero for the lower-order schemes).
    fn fixed(&mut self, dt: f64, scheme: Scheme) -> Result<f64> {
        let n = self.x1.len();
        if n == 0 {
            return Ok(0.0);
        }
        let [k1, k2, k3, k4] = &mut self.k;
        Self::eval(&self.kernel, &self.gamma, &self.x1, &self.x2, k1)?;
        match scheme {
            Scheme::EulerFwd => {
                for i in 0..n {
                    self.x1[i] += dt * k1[i][0];
                    self.x2[i] += dt * k1[i][1];
                }
                Ok(0.0)
            }
            Scheme::Rk2 => {
                self.stage(0, 0.5 * dt);
                let [_, k2, ..] = &mut self.k;
                Self::eval(&self.kernel, &self.gamma, &self.s1, &self.s2, k2)?;
                for i in 0..n {
                    self.x1[i] += dt * k2[i][0];
                    self.x2[i] += dt * k2[i][1];
                }
                Ok(0.0)
            }
            Scheme::Rk4 => {
                let _ = (k2, k3, k4);
                self.stage(0, 0.5 * dt);
                Self::eval(&self.kernel, &self.gamma, &self.s1, &self.s2, &mut self.k[1])?;
                self.stage(1, 0.5 * dt);
                Self::eval(&self.kernel, &self.gamma, &self.s1, &self.s2, &mut self.k[2])?;
                self.stage(2, dt);
                Self::eval(&self.kernel, &self.gamma, &self.s1, &self.s2, &mut self.k[3])?;
                let [k1, k2, k3, k4] = &self.k;
                let mut gap = 0.0_f64;
                let w = dt / 6.0;
                for i in 0..n {
                    for c in 0..2 {
                        let incr = w * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
                        gap = gap.max((incr - dt * k2[i][c]).abs());
                        if c == 0 {
                            self.x1[i] += incr;
                        } else {
                            self.x2[i] += incr;
                        }
                    }
                }
                Ok(gap)
            }
        }
    }
}

/// Advance `state` in place by one transport step of length `cfg.dt`.
pub fn advance(state: &mut FlowState, cfg: &EulerStepConfig) -> Result<()> {
    cfg.validate()?;
    let mut t = Transport::new(state);
    t.step(cfg.dt, cfg)?;
    t.store(&mut state.blobs);
    state.time += cfg.dt;
    state.stream.step += 1;
    Ok(())
}

/// One inviscid step; the state must have zero viscosity.
pub fn euler_step(state: &FlowState, cfg: &EulerStepConfig) -> Result<FlowState> {
    if state.viscosity != 0.0 {
        return Err(domain(format!(
            "euler_step requires zero viscosity, state has {}",
            state.viscosity
        )));
    }
    let mut next = state.clone();
    advance(&mut next, cfg)?;
    Ok(next)
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    for (k, w) in schedule.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::ScheduleNotMonotone { position: k + 1 });
        }
    }
    if schedule.iter().any(|t| !t.is_finite()) {
        return Err(domain("schedule times must be finite"));
    }
    Ok(())
}

/// Shared stepping loop. Steps always have the full length `dt`; the run
/// stops once the time is within `dt / 2` of `t_end`, and a scheduled time
/// is recorded at the first step end no earlier than `t - dt / 2`.
pub(crate) fn drive<S, F>(
    mut state: FlowState,
    t_end: f64,
    dt: f64,
    schedule: &[f64],
    diag: &DiagnosticsSpec,
    ensemble_id: Option<u64>,
    mut step: S,
    mut sink: F,
) -> Result<FlowState>
where
    S: FnMut(&mut FlowState) -> Result<()>,
    F: FnMut(&FlowState, DiagnosticsRecord) -> Result<()>,
{
    validate_schedule(schedule)?;
    if !(dt > 0.0) {
        return Err(domain("time step must be positive"));
    }
    if t_end.is_nan() || t_end < state.time - 0.5 * dt {
        return Err(domain(format!(
            "t_end = {t_end} precedes the state time {}",
            state.time
        )));
    }
    let half = 0.5 * dt;
    let mut next = schedule.partition_point(|&t| t < state.time - half);
    let mut emit = |state: &FlowState, next: &mut usize| -> Result<()> {
        while *next < schedule.len() && schedule[*next] <= state.time + half {
            let mut rec = DiagnosticsRecord::measure(state, diag)?;
            rec.ensemble_id = ensemble_id;
            sink(state, rec)?;
            *next += 1;
        }
        Ok(())
    };
    emit(&state, &mut next)?;
    while state.time < t_end - half {
        step(&mut state)?;
        emit(&state, &mut next)?;
    }
    Ok(state)
}

/// Integrate to `t_end`, handing a record to `sink` at each scheduled time.
pub fn run_euler<F>(
    s0: FlowState,
    t_end: f64,
    cfg: &EulerStepConfig,
    schedule: &[f64],
    diag: &DiagnosticsSpec,
    sink: F,
) -> Result<FlowState>
where
    F: FnMut(&FlowState, DiagnosticsRecord) -> Result<()>,
{
    cfg.validate()?;
    if s0.viscosity != 0.0 {
        return Err(domain("run_euler requires zero viscosity"));
    }
    let mut transport = Transport::new(&s0);
    drive(s0, t_end, cfg.dt, schedule, diag, None, |s| {
        transport.load(s);
        transport.step(cfg.dt, cfg)?;
        transport.store(&mut s.blobs);
        s.time += cfg.dt;
        s.stream.step += 1;
        Ok(())
    }, sink)
}

/// [`run_euler`] collecting the records.
pub fn run_euler_collect(
    s0: FlowState,
    t_end: f64,
    cfg: &EulerStepConfig,
    schedule: &[f64],
    diag: &DiagnosticsSpec,
) -> Result<(FlowState, Vec<DiagnosticsRecord>)> {
    let mut out = Vec::new();
    let s = run_euler(s0, t_end, cfg, schedule, diag, |_, r| {
        out.push(r);
        Ok(())
    })?;
    Ok((s, out))
}
