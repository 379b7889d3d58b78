//! Smooth axial cutoff `W_{R,h}`: one on `|xi| <= R`, zero on
//! `|xi| >= R + h`, with a quintic smoothstep transition in between.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// `max |p''|` on `[0, 1]` for `p(u) = 6u^5 - 15u^4 + 10u^3`.
pub const QUINTIC_C_W: f64 = 5.773_502_691_896_258; // 10 / sqrt(3)

#[inline]
fn p(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

#[inline]
fn dp(u: f64) -> f64 {
    let v = u * (u - 1.0);
    30.0 * v * v
}

#[inline]
fn d2p(u: f64) -> f64 {
    60.0 * u * (2.0 * u - 1.0) * (u - 1.0)
}

/// The cutoff profile together with its certified second-derivative
/// constant: `|W''| <= c_w / h^2` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierProfile {
    radius: f64,
    width: f64,
    c_w: f64,
}

impl MollifierProfile {
    /// Build the profile for plateau radius `radius` (R) and transition
    /// width `width` (h); requires `R >= 2h > 0`.
    pub fn new(radius: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(domain(format!("mollifier width h must be positive, got {width}")));
        }
        if !(radius >= 2.0 * width) || !radius.is_finite() {
            return Err(domain(format!(
                "mollifier needs R >= 2h, got R = {radius}, h = {width}"
            )));
        }
        Ok(Self {
            radius,
            width,
            c_w: certify_c_w(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    /// Transition coordinate `u in (0, 1)`, or `None` on the flat parts.
    #[inline]
    fn transition(&self, xi: f64) -> Option<f64> {
        let a = xi.abs();
        if a <= self.radius || a >= self.radius + self.width {
            None
        } else {
            Some(((a - self.radius) / self.width).clamp(0.0, 1.0))
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= self.radius {
            1.0
        } else if a >= self.radius + self.width {
            0.0
        } else {
            1.0 - p((a - self.radius) / self.width)
        }
    }

    pub fn eval_d1(&self, xi: f64) -> f64 {
        match self.transition(xi) {
            Some(u) => -xi.signum() * dp(u) / self.width,
            None => 0.0,
        }
    }

    pub fn eval_d2(&self, xi: f64) -> f64 {
        match self.transition(xi) {
            Some(u) => -d2p(u) / (self.width * self.width),
            None => 0.0,
        }
    }
}

/// Confirm on a grid that `max |p''|` does not exceed the closed form, then
/// return the closed form. The maximiser is `u = (3 -+ sqrt 3) / 6`.
fn certify_c_w() -> f64 {
    const N: usize = 2048;
    let grid_max = (0..=N)
        .map(|k| d2p(k as f64 / N as f64).abs())
        .fold(0.0, f64::max);
    let at_max = d2p((3.0 - 3f64.sqrt()) / 6.0).abs();
    debug_assert!(grid_max <= QUINTIC_C_W * (1.0 + 1e-12));
    debug_assert!((at_max - QUINTIC_C_W).abs() <= 1e-12);
    QUINTIC_C_W.max(at_max)
}
