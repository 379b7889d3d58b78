//! Numerical replay of the tail-mass iteration: the recursive bound via
//! exact log-gamma, its closed forms, and the comparison ODE for the
//! support radius. Everything is carried in the log domain.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::diagnostics::fmt_f64;
use crate::error::{domain, Error, Result};
use crate::kernel::DecayEnvelope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NsA,
    NsB,
    Euler,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::NsA => "ns_a",
            Regime::NsB => "ns_b",
            Regime::Euler => "euler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanParams {
    Alpha { alpha: f64 },
    BetaDelta { beta: f64, delta: f64 },
}

/// Largest iteration count replayed step by step.
pub const MAX_RECURSION_STEPS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationPlan {
    pub regime: Regime,
    /// `log t`; stored instead of `t` so that `t = e^k` round-trips exactly.
    pub log_t: f64,
    pub params: PlanParams,
    pub big_c: f64,
    pub n: u64,
    pub log_r0: f64,
    pub log_h: f64,
}

impl IterationPlan {
    pub fn t(&self) -> f64 {
        self.log_t.exp()
    }

    pub fn r0(&self) -> f64 {
        self.log_r0.exp()
    }

    pub fn h(&self) -> f64 {
        self.log_h.exp()
    }

    /// `R_n = r0 - n h = r0 / 2`.
    pub fn r_n(&self) -> f64 {
        0.5 * self.r0()
    }
}

/// The constant `C'` of the closed forms in terms of the recursion
/// constant: `C' = 4 e C`.
pub fn c_prime(big_c: f64) -> f64 {
    4.0 * E * big_c
}

pub fn big_c_from_c_prime(c_prime: f64) -> f64 {
    c_prime / (4.0 * E)
}

/// `floor(x)`, treating values within a few ulps below an integer as that
/// integer so that `log(exp(k))` still yields `k`.
fn robust_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 8.0 * f64::EPSILON * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

pub fn make_plan(regime: Regime, t: f64, params: PlanParams, big_c: f64) -> Result<IterationPlan> {
    if !(t > 0.0) {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    make_plan_log(regime, t.ln(), params, big_c)
}

/// [`make_plan`] with `t` given through its logarithm.
pub fn make_plan_log(regime: Regime, log_t: f64, params: PlanParams, big_c: f64) -> Result<IterationPlan> {
    if !(log_t > 2.0 && log_t.is_finite()) {
        return Err(domain(format!("replay needs t > e^2, got log t = {log_t}")));
    }
    if !(big_c > 0.0 && big_c.is_finite()) {
        return Err(domain(format!("C must be positive, got {big_c}")));
    }
    let llt = log_t.ln();
    let (n, log_r0) = match (regime, params) {
        (Regime::NsA | Regime::Euler, PlanParams::Alpha { alpha }) => {
            if !(alpha > 1.0 && alpha.is_finite()) {
                return Err(domain(format!("alpha must exceed 1, got {alpha}")));
            }
            let n = robust_floor(log_t);
            let log_r0 = if regime == Regime::NsA {
                0.5 * (log_t + alpha * llt)
            } else {
                (log_t + alpha * llt) / 3.0
            };
            (n, log_r0)
        }
        (Regime::NsB, PlanParams::BetaDelta { beta, delta }) => {
            if !(beta > 0.5 && beta.is_finite()) {
                return Err(domain(format!("beta must exceed 1/2, got {beta}")));
            }
            if !(delta > 0.0 && delta < 2.0 * beta - 1.0) {
                return Err(domain(format!("delta must lie in (0, 2 beta - 1), got {delta}")));
            }
            let n = robust_floor((delta * log_t).exp());
            if !(n < u64::MAX as f64) {
                return Err(domain("iteration count t^delta exceeds the 64-bit range"));
            }
            (n, beta * log_t)
        }
        _ => {
            return Err(domain(format!(
                "regime {} takes {} parameters",
                regime.name(),
                if regime == Regime::NsB { "(beta, delta)" } else { "alpha" }
            )))
        }
    };
    if n < 1.0 {
        return Err(domain("iteration count must be at least 1"));
    }
    Ok(IterationPlan {
        regime,
        log_t,
        params,
        big_c,
        n: n as u64,
        log_r0,
        log_h: log_r0 - (2.0 * n).ln(),
    })
}

/// Closed-form log bound from the proof's final displays.
pub fn closed_form_log_bound(plan: &IterationPlan) -> f64 {
    match plan.params {
        PlanParams::Alpha { alpha } => {
            plan.n as f64 * (c_prime(plan.big_c).ln() + (1.0 - alpha) * plan.log_t.ln())
        }
        PlanParams::BetaDelta { beta, delta } => {
            (delta * plan.log_t).exp() * (plan.big_c.ln() - (2.0 * beta - delta - 1.0) * plan.log_t)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub plan: IterationPlan,
    pub log_m0: f64,
    /// `min(log_recursive_uncapped, log m0)`: the iterate never beats the
    /// trivial bound `mu <= M0`.
    pub log_recursive_bound: f64,
    /// `log[(C t / h^2)^n / n! * m0]` (with the extra `1 / R_n` for euler).
    pub log_recursive_uncapped: f64,
    pub log_closed_form: f64,
    /// `log[(C t / h^2)^j / j!]` for `j = 1..n`.
    pub per_step_log_terms: Vec<f64>,
}

impl BoundCertificate {
    /// `log_recursive_uncapped - log m0 - log_closed_form`.
    pub fn stirling_gap(&self) -> f64 {
        self.log_recursive_uncapped - self.log_m0 - self.log_closed_form
    }
}

/// `log(C t / h^2)` per iteration, with `1 / R_n` folded in for euler.
pub fn log_step_factor(plan: &IterationPlan) -> f64 {
    let base = plan.big_c.ln() + plan.log_t - 2.0 * plan.log_h;
    match plan.regime {
        Regime::Euler => base - (plan.log_r0 - 2f64.ln()),
        _ => base,
    }
}

pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Replay the iteration for initial mass `m0` whose support reaches
/// `support_radius` in `|x1|`.
pub fn recursive_log_bound(plan: &IterationPlan, m0: f64, support_radius: f64) -> Result<BoundCertificate> {
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(domain(format!("initial mass must be positive, got {m0}")));
    }
    let limit = plan.r_n() - plan.h();
    if !(support_radius < limit) {
        return Err(Error::SupportViolation {
            support: support_radius,
            limit,
        });
    }
    if plan.n > MAX_RECURSION_STEPS {
        return Err(domain(format!(
            "{} iterations exceed the replay limit of {MAX_RECURSION_STEPS}",
            plan.n
        )));
    }
    let l = log_step_factor(plan);
    let per_step: Vec<f64> = (1..=plan.n).map(|j| j as f64 * l - ln_factorial(j)).collect();
    let log_m0 = m0.ln();
    let uncapped = per_step[per_step.len() - 1] + log_m0;
    Ok(BoundCertificate {
        plan: *plan,
        log_m0,
        log_recursive_bound: uncapped.min(log_m0),
        log_recursive_uncapped: uncapped,
        log_closed_form: closed_form_log_bound(plan),
        per_step_log_terms: per_step,
    })
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "regime",
    "t",
    "alpha",
    "beta",
    "delta",
    "big_c",
    "n",
    "h",
    "log_recursive",
    "log_closed",
];

/// One sweep row; `log_recursive` is the uncapped recursion value and is
/// left empty when the replay is refused (for example `n` too large).
pub fn sweep_row(plan: &IterationPlan, cert: Option<&BoundCertificate>) -> Vec<String> {
    let (alpha, beta, delta) = match plan.params {
        PlanParams::Alpha { alpha } => (fmt_f64(alpha), String::new(), String::new()),
        PlanParams::BetaDelta { beta, delta } => (String::new(), fmt_f64(beta), fmt_f64(delta)),
    };
    vec![
        plan.regime.name().to_string(),
        fmt_f64(plan.t()),
        alpha,
        beta,
        delta,
        fmt_f64(plan.big_c),
        plan.n.to_string(),
        fmt_f64(plan.h()),
        cert.map(|c| fmt_f64(c.log_recursive_uncapped)).unwrap_or_default(),
        fmt_f64(closed_form_log_bound(plan)),
    ]
}

/// `rho' = 4 c1 exp(-c2 rho / 2) / rho + g(t)` sampled at the RK4 nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoTable {
    pub t: Vec<f64>,
    pub rho: Vec<f64>,
    /// Relative change of `rho(t1)` when the step count is doubled.
    pub halving_change: f64,
}

impl RhoTable {
    pub fn last(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }
}

pub const RHO_HALVING_TOLERANCE: f64 = 1e-6;

fn rho_rk4(rho0: f64, t0: f64, t1: f64, env: &DecayEnvelope, g: &dyn Fn(f64) -> f64, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let f = |t: f64, r: f64| 4.0 * env.c1 * (-0.5 * env.c2 * r).exp() / r + g(t);
    let dt = (t1 - t0) / steps as f64;
    let mut ts = Vec::with_capacity(steps + 1);
    let mut rs = Vec::with_capacity(steps + 1);
    let mut r = rho0;
    ts.push(t0);
    rs.push(r);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let k1 = f(t, r);
        let k2 = f(t + 0.5 * dt, r + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, r + 0.5 * dt * k2);
        let k4 = f(t + dt, r + dt * k3);
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ts.push(if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * dt });
        rs.push(r);
    }
    (ts, rs)
}

/// Integrate the comparison ODE with `steps` RK4 steps, refusing when
/// doubling the step count moves `rho(t1)` by more than
/// [`RHO_HALVING_TOLERANCE`] relative.
pub fn integrate_rho(
    rho0: f64,
    t0: f64,
    t1: f64,
    env: &DecayEnvelope,
    g: &dyn Fn(f64) -> f64,
    steps: usize,
) -> Result<RhoTable> {
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(domain(format!("rho0 must be positive, got {rho0}")));
    }
    if !(t0 > 0.0 && t1 > t0 && t1.is_finite()) {
        return Err(domain(format!("need 0 < t0 < t1, got [{t0}, {t1}]")));
    }
    if steps == 0 {
        return Err(domain("at least one step is required"));
    }
    if !(env.c1 >= 0.0 && env.c2 >= 0.0) {
        return Err(domain("envelope constants must be non-negative"));
    }
    let (t, rho) = rho_rk4(rho0, t0, t1, env, g, steps);
    let (_, fine) = rho_rk4(rho0, t0, t1, env, g, 2 * steps);
    let a = rho[rho.len() - 1];
    let b = fine[fine.len() - 1];
    let change = (a - b).abs() / b.abs();
    if !(change <= RHO_HALVING_TOLERANCE) || rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::StepCountTooSmall {
            relative_change: change,
        });
    }
    Ok(RhoTable {
        t,
        rho,
        halving_change: change,
    })
}
