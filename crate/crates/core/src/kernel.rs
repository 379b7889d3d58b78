//! Green function of the Laplacian on the cylinder `R x T` and the
//! Biot-Savart summation built on it.
//!
//! With `D = cosh(d1) - cos(d2)` the Green function is `G = -log(D) / 2`.
//! All evaluations go through the half-angle form
//!
//! ```text
//! cosh(d1) - cos(d2) = 2 sinh^2(d1/2) + 2 sin^2(d2/2)
//! ```
//!
//! which has no cancellation near the singularity and is exactly
//! antisymmetric under `x <-> y`. For `|d1| > ASYMPTOTIC_SEPARATION` the
//! exponential factor `e^{|d1|}/2` is pulled out of `D` analytically, so no
//! intermediate quantity overflows.
//!
//! Blob regularisation adds `core^2 / 2` to `D`. The regularised kernel is
//! still antisymmetric and exactly `2 pi` periodic in `x2`.

use std::f64::consts::{LN_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Axial separation beyond which the exponentially rescaled forms are used.
pub const ASYMPTOTIC_SEPARATION: f64 = 30.0;

/// Smallest finite truncation radius accepted by [`KernelConfig`].
pub const MIN_TRUNCATION_RADIUS: f64 = 10.0;

/// Velocity vector `(u1, u2)`.
pub type Vec2 = [f64; 2];

/// Wrap an angle into `[0, 2 pi)`.
pub fn wrap_angle(x2: f64) -> f64 {
    let r = x2.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A point on the cylinder. The angular coordinate is always canonical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct CylPoint {
    x1: f64,
    x2: f64,
}

impl CylPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1,
            x2: wrap_angle(x2),
        }
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.x1
    }

    #[inline]
    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// Componentwise separation `x - y` with `d2` reduced to `(-pi, pi]`.
    pub fn separation(&self, other: &CylPoint) -> (f64, f64) {
        let mut d2 = self.x2 - other.x2;
        if d2 > PI {
            d2 -= TAU;
        } else if d2 <= -PI {
            d2 += TAU;
        }
        (self.x1 - other.x1, d2)
    }
}

impl From<[f64; 2]> for CylPoint {
    fn from(v: [f64; 2]) -> Self {
        CylPoint::new(v[0], v[1])
    }
}

impl From<CylPoint> for [f64; 2] {
    fn from(p: CylPoint) -> Self {
        [p.x1, p.x2]
    }
}

/// Parameters of the velocity summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Multiplier applied to the perpendicular gradient of `G`. The default
    /// `1/(2 pi)` makes the curl of the induced velocity equal the vorticity;
    /// `1` reproduces the bare cylindrical Biot-Savart integral.
    pub normalization: f64,
    /// Regularisation length; `0` is the exact singular kernel.
    pub core_radius: f64,
    /// Axial distance beyond which pairs are dropped; `None` is infinite.
    pub truncation_radius: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            normalization: 1.0 / TAU,
            core_radius: 0.0,
            truncation_radius: None,
        }
    }
}

impl KernelConfig {
    pub fn with_core(core_radius: f64) -> Self {
        Self {
            core_radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.normalization.is_finite() && self.normalization > 0.0) {
            return Err(domain(format!(
                "kernel normalization must be positive and finite, got {}",
                self.normalization
            )));
        }
        if !(self.core_radius.is_finite() && self.core_radius >= 0.0) {
            return Err(domain(format!(
                "kernel core radius must be finite and non-negative, got {}",
                self.core_radius
            )));
        }
        if let Some(r) = self.truncation_radius {
            if r.is_nan() || r < MIN_TRUNCATION_RADIUS {
                return Err(domain(format!(
                    "finite truncation radius must be >= {MIN_TRUNCATION_RADIUS}, got {r}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    fn half_core_sq(&self) -> f64 {
        0.5 * self.core_radius * self.core_radius
    }
}

/// Derivatives of the (regularised) Green function at a separation.
#[derive(Debug, Clone, Copy)]
struct Gradient {
    dx1: f64,
    dx2: f64,
}

/// `dG/dx1`, `dG/dx2` at separation `(d1, d2)`; `None` at the singular point.
fn gradient(d1: f64, d2: f64, half_core_sq: f64) -> Option<Gradient> {
    let a = d1.abs();
    if a > ASYMPTOTIC_SEPARATION {
        // 2D = e^{|d1|} Q with Q = 1 - 2 cos(d2) e + e^2 + core^2 e, e = e^{-|d1|}
        let e = (-a).exp();
        let q = 1.0 - 2.0 * d2.cos() * e + e * e + 2.0 * half_core_sq * e;
        return Some(Gradient {
            dx1: -d1.signum() * (1.0 - e * e) / (2.0 * q),
            dx2: -d2.sin() * e / q,
        });
    }
    let (sh, ch) = ((0.5 * d1).sinh(), (0.5 * d1).cosh());
    let (s, c) = (0.5 * d2).sin_cos();
    let den = 2.0 * (sh * sh + s * s) + half_core_sq;
    if den <= 0.0 {
        return None;
    }
    Some(Gradient {
        dx1: -sh * ch / den,
        dx2: -s * c / den,
    })
}

/// `log(cosh(d1) - cos(d2) + core^2/2)`; `None` when the argument vanishes.
fn log_denominator(d1: f64, d2: f64, half_core_sq: f64) -> Option<f64> {
    let a = d1.abs();
    if a > ASYMPTOTIC_SEPARATION {
        let e = (-a).exp();
        let tail = (2.0 * half_core_sq - 2.0 * d2.cos()) * e + e * e;
        return Some(a - LN_2 + tail.ln_1p());
    }
    let sh = (0.5 * d1).sinh();
    let s = (0.5 * d2).sin();
    let den = 2.0 * (sh * sh + s * s) + half_core_sq;
    (den > 0.0).then(|| den.ln())
}

/// The cylinder Green function `-log(cosh(x1-y1) - cos(x2-y2)) / 2`.
pub fn green(x: &CylPoint, y: &CylPoint) -> Result<f64> {
    green_regularized(x, y, 0.0)
}

/// Green function with the denominator shifted by `core^2 / 2`.
pub fn green_regularized(x: &CylPoint, y: &CylPoint, core_radius: f64) -> Result<f64> {
    let (d1, d2) = (x.x1 - y.x1, x.x2 - y.x2);
    log_denominator(d1, d2, 0.5 * core_radius * core_radius)
        .map(|l| -0.5 * l)
        .ok_or(Error::SingularPair)
}

/// `dG/dx2 = -sin(x2-y2) / (2 (cosh(x1-y1) - cos(x2-y2)))`.
pub fn dg_dx2(x: &CylPoint, y: &CylPoint) -> Result<f64> {
    gradient(x.x1 - y.x1, x.x2 - y.x2, 0.0)
        .map(|g| g.dx2)
        .ok_or(Error::SingularPair)
}

/// `dG/dx1 = -sinh(x1-y1) / (2 (cosh(x1-y1) - cos(x2-y2)))`.
pub fn dg_dx1(x: &CylPoint, y: &CylPoint) -> Result<f64> {
    gradient(x.x1 - y.x1, x.x2 - y.x2, 0.0)
        .map(|g| g.dx1)
        .ok_or(Error::SingularPair)
}

/// `kappa * (dG/dx2, -dG/dx1)` with the configured regularisation. Total:
/// the singular point maps to zero (no self-interaction).
pub fn grad_perp_green(x: &CylPoint, y: &CylPoint, cfg: &KernelConfig) -> Vec2 {
    match gradient(x.x1 - y.x1, x.x2 - y.x2, cfg.half_core_sq()) {
        Some(g) => [cfg.normalization * g.dx2, -cfg.normalization * g.dx1],
        None => [0.0, 0.0],
    }
}

/// Per-point quantities shared by every pair involving the point. Axial
/// exponentials are taken relative to a common reference so that
/// `eh_t * ehi_s = e^{(x1_t - x1_s)/2}` without forming differences.
#[derive(Debug, Clone, Copy)]
struct Prepared {
    x1: f64,
    eh: f64,
    ehi: f64,
    sn: f64,
    cs: f64,
}

impl Prepared {
    #[inline]
    fn new(x1: f64, x2: f64, reference: f64) -> Self {
        let half = 0.5 * (x1 - reference);
        let (sn, cs) = (0.5 * x2).sin_cos();
        Self {
            x1,
            eh: half.exp(),
            ehi: (-half).exp(),
            sn,
            cs,
        }
    }
}

/// Largest axial spread for which the shared-exponential path is used.
const MAX_PREPARED_SPREAD: f64 = 1200.0;

/// Velocity contribution per unit circulation (before `kappa`) of source `s`
/// at target `t`: `(dG/dx2, -dG/dx1)`. Exactly antisymmetric in `(t, s)`.
#[inline(always)]
fn pair_prepared(t: &Prepared, s: &Prepared, half_core_sq: f64) -> Option<(f64, f64)> {
    let q = t.eh * s.ehi;
    let qi = s.eh * t.ehi;
    let sn = t.sn * s.cs - t.cs * s.sn;
    let cs = t.cs * s.cs + t.sn * s.sn;
    let d1 = t.x1 - s.x1;
    if d1.abs() > ASYMPTOTIC_SEPARATION {
        let m = q.min(qi);
        let e = m * m;
        let cos_d2 = 1.0 - 2.0 * sn * sn;
        let sin_d2 = 2.0 * sn * cs;
        let qq = 1.0 - 2.0 * cos_d2 * e + e * e + 2.0 * half_core_sq * e;
        return Some((-sin_d2 * e / qq, d1.signum() * (1.0 - e * e) / (2.0 * qq)));
    }
    let sh = 0.5 * (q - qi);
    let ch = 0.5 * (q + qi);
    let den = 2.0 * (sh * sh + sn * sn) + half_core_sq;
    if den <= 0.0 {
        return None;
    }
    let inv = 1.0 / den;
    Some((-sn * cs * inv, sh * ch * inv))
}

/// Structure-of-arrays view of point sources.
#[derive(Debug, Clone, Copy)]
pub struct SourceSlice<'a> {
    pub x1: &'a [f64],
    pub x2: &'a [f64],
    pub gamma: &'a [f64],
}

const TARGET_CHUNK: usize = 32;

/// Velocity at `(tx1[i], tx2[i])` induced by the sources, written into `out`.
///
/// Each target sums its sources sequentially in the given order, so results
/// do not depend on the number of worker threads. Sources with zero
/// circulation are skipped.
pub fn induced_velocity_soa(
    tx1: &[f64],
    tx2: &[f64],
    sources: SourceSlice<'_>,
    cfg: &KernelConfig,
    out: &mut [Vec2],
) {
    assert_eq!(tx1.len(), tx2.len());
    assert_eq!(tx1.len(), out.len());
    assert_eq!(sources.x1.len(), sources.x2.len());
    assert_eq!(sources.x1.len(), sources.gamma.len());

    let active: Vec<usize> = (0..sources.gamma.len())
        .filter(|&j| sources.gamma[j] != 0.0)
        .collect();
    if active.is_empty() || tx1.is_empty() {
        out.iter_mut().for_each(|v| *v = [0.0, 0.0]);
        return;
    }

    let (lo, hi) = tx1
        .iter()
        .chain(active.iter().map(|&j| &sources.x1[j]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let kappa = cfg.normalization;
    let hc = cfg.half_core_sq();
    let trunc = cfg.truncation_radius.unwrap_or(f64::INFINITY);

    if !(hi - lo <= MAX_PREPARED_SPREAD) {
        // Spread too large for shared exponentials (or non-finite input).
        out.par_chunks_mut(TARGET_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (k, v) in chunk.iter_mut().enumerate() {
                    let i = c * TARGET_CHUNK + k;
                    let mut acc = [0.0, 0.0];
                    for &j in &active {
                        let d1 = tx1[i] - sources.x1[j];
                        if d1.abs() > trunc {
                            continue;
                        }
                        if let Some(g) = gradient(d1, tx2[i] - sources.x2[j], hc) {
                            acc[0] += sources.gamma[j] * g.dx2;
                            acc[1] -= sources.gamma[j] * g.dx1;
                        }
                    }
                    *v = [kappa * acc[0], kappa * acc[1]];
                }
            });
        return;
    }

    let reference = 0.5 * (lo + hi);
    let src: Vec<(Prepared, f64)> = active
        .iter()
        .map(|&j| {
            (
                Prepared::new(sources.x1[j], sources.x2[j], reference),
                sources.gamma[j],
            )
        })
        .collect();

    out.par_chunks_mut(TARGET_CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (k, v) in chunk.iter_mut().enumerate() {
                let i = c * TARGET_CHUNK + k;
                let t = Prepared::new(tx1[i], tx2[i], reference);
                let mut u1 = 0.0;
                let mut u2 = 0.0;
                if trunc.is_finite() {
                    for (s, g) in &src {
                        if (t.x1 - s.x1).abs() > trunc {
                            continue;
                        }
                        if let Some((a, b)) = pair_prepared(&t, s, hc) {
                            u1 += g * a;
                            u2 += g * b;
                        }
                    }
                } else {
                    for (s, g) in &src {
                        if let Some((a, b)) = pair_prepared(&t, s, hc) {
                            u1 += g * a;
                            u2 += g * b;
                        }
                    }
                }
                *v = [kappa * u1, kappa * u2];
            }
        });
}

/// `kappa * sum_j gamma_j * grad_perp G(x, y_j)` at every target.
pub fn induced_velocity(
    targets: &[CylPoint],
    sources: &[(CylPoint, f64)],
    cfg: &KernelConfig,
) -> Vec<Vec2> {
    let tx1: Vec<f64> = targets.iter().map(|p| p.x1).collect();
    let tx2: Vec<f64> = targets.iter().map(|p| p.x2).collect();
    let sx1: Vec<f64> = sources.iter().map(|(p, _)| p.x1).collect();
    let sx2: Vec<f64> = sources.iter().map(|(p, _)| p.x2).collect();
    let sg: Vec<f64> = sources.iter().map(|(_, g)| *g).collect();
    let mut out = vec![[0.0, 0.0]; targets.len()];
    induced_velocity_soa(
        &tx1,
        &tx2,
        SourceSlice {
            x1: &sx1,
            x2: &sx2,
            gamma: &sg,
        },
        cfg,
        &mut out,
    );
    out
}

/// Sum over unordered pairs of `gamma_i gamma_j G(x_i, x_j)` with the
/// regularisation of `cfg` (without the normalization factor).
pub(crate) fn pair_energy_sum(x1: &[f64], x2: &[f64], gamma: &[f64], half_core_sq: f64) -> Result<f64> {
    let n = x1.len();
    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in (i + 1)..n {
                let w = gamma[i] * gamma[j];
                if w == 0.0 {
                    continue;
                }
                let l = log_denominator(x1[i] - x1[j], x2[i] - x2[j], half_core_sq)
                    .ok_or(Error::SingularPair)?;
                acc += w * (-0.5 * l);
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total)
}

/// Limits of `u2` far to the left and right of a compactly supported
/// source set, each averaged over 16 angles.
pub fn far_field_u2_limit(sources: &[(CylPoint, f64)], cfg: &KernelConfig) -> (f64, f64) {
    let reach = sources
        .iter()
        .map(|(p, _)| p.x1.abs())
        .fold(0.0, f64::max)
        + 40.0;
    let probe = |x1: f64| {
        let targets: Vec<CylPoint> = (0..16)
            .map(|k| CylPoint::new(x1, TAU * k as f64 / 16.0))
            .collect();
        let u = induced_velocity(&targets, sources, cfg);
        u.iter().map(|v| v[1]).sum::<f64>() / 16.0
    };
    (probe(-reach), probe(reach))
}

/// Constants `(c1, c2)` of the decay bound `|dG/dx2| <= c1 e^{-c2 r} / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub c1: f64,
    pub c2: f64,
}

impl Default for DecayEnvelope {
    fn default() -> Self {
        Self { c1: 2.0, c2: 0.5 }
    }
}

impl DecayEnvelope {
    pub fn value(&self, r: f64) -> f64 {
        self.c1 * (-self.c2 * r).exp() / r
    }
}

/// Outcome of [`validate_decay_envelope`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub envelope: DecayEnvelope,
    pub samples: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Largest `|dG/dx2| r e^{c2 r} / c1` over the grid.
    pub max_ratio: f64,
    /// Separation `(d1, d2)` where the maximum ratio occurs.
    pub worst_separation: (f64, f64),
    pub pass: bool,
}

pub const ENVELOPE_R_MIN: f64 = 1e-3;
pub const ENVELOPE_R_MAX: f64 = 30.0;

/// Check the decay envelope on a polar grid: radii log-spaced in
/// `[1e-3, 30]`, directions covering `d1 >= 0`, `d2 in [0, pi]`.
pub fn validate_decay_envelope(env: DecayEnvelope, samples: usize) -> Result<ValidationReport> {
    if samples < 1000 {
        return Err(domain(format!("envelope validation needs >= 1000 samples, got {samples}")));
    }
    if !(env.c1 > 0.0 && env.c2 > 0.0 && env.c1.is_finite() && env.c2.is_finite()) {
        return Err(domain("envelope constants must be positive and finite"));
    }
    let n_r = (samples as f64).sqrt().ceil() as usize;
    let n_a = samples.div_ceil(n_r);
    let (lr0, lr1) = (ENVELOPE_R_MIN.ln(), ENVELOPE_R_MAX.ln());
    let mut max_ratio = 0.0_f64;
    let mut worst = (0.0, 0.0);
    for ir in 0..n_r {
        let r = (lr0 + (lr1 - lr0) * ir as f64 / (n_r - 1) as f64).exp();
        let phi_max = if r <= PI { 0.5 * PI } else { (PI / r).asin() };
        for ia in 0..n_a {
            let phi = phi_max * ia as f64 / (n_a - 1) as f64;
            let (d1, d2) = (r * phi.cos(), (r * phi.sin()).min(PI));
            let Some(g) = gradient(d1, d2, 0.0) else { continue };
            let ratio = g.dx2.abs() * r * (env.c2 * r).exp() / env.c1;
            if ratio > max_ratio {
                max_ratio = ratio;
                worst = (d1, d2);
            }
        }
    }
    Ok(ValidationReport {
        envelope: env,
        samples: n_r * n_a,
        r_min: ENVELOPE_R_MIN,
        r_max: ENVELOPE_R_MAX,
        max_ratio,
        worst_separation: worst,
        pass: max_ratio <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn green_reference_values() {
        let y = CylPoint::new(0.0, 0.0);
        let g = green(&CylPoint::new(0.0, PI), &y).unwrap();
        assert!(close(g, -0.5 * 2f64.ln(), 1e-15), "{g}");
        let g = green(&CylPoint::new(1.0, 0.0), &y).unwrap();
        assert!(close(g, -0.5 * (1f64.cosh() - 1.0).ln(), 1e-15));
        assert!(close(g, 0.305_248_735_667_054_6, 1e-15));
    }

    #[test]
    fn green_singular_at_coincident_points() {
        let p = CylPoint::new(0.3, 1.0);
        assert!(matches!(green(&p, &p), Err(Error::SingularPair)));
        assert!(matches!(dg_dx2(&p, &p), Err(Error::SingularPair)));
        let q = CylPoint::new(0.3, 1.0 + TAU);
        assert!(green(&p, &q).is_err());
    }

    #[test]
    fn green_far_apart_has_no_overflow() {
        let x = CylPoint::new(1e4, 1.0);
        let y = CylPoint::new(0.0, 2.0);
        let g = green(&x, &y).unwrap();
        assert!(close(g, -0.5 * (1e4 - LN_2), 1e-9));
        let g = green(&CylPoint::new(-800.0, 0.3), &y).unwrap();
        assert!(g.is_finite());
    }

    #[test]
    fn green_asymptotic_branch_is_continuous() {
        let y = CylPoint::new(0.0, 0.4);
        for d2 in [0.0, 1.0, 2.5] {
            let a = green(&CylPoint::new(ASYMPTOTIC_SEPARATION - 1e-9, d2 + 0.4), &y).unwrap();
            let b = green(&CylPoint::new(ASYMPTOTIC_SEPARATION + 1e-9, d2 + 0.4), &y).unwrap();
            assert!(close(a, b, 1e-8), "{a} {b}");
            let a = dg_dx2(&CylPoint::new(ASYMPTOTIC_SEPARATION - 1e-9, d2 + 0.4), &y).unwrap();
            let b = dg_dx2(&CylPoint::new(ASYMPTOTIC_SEPARATION + 1e-9, d2 + 0.4), &y).unwrap();
            assert!(close(a, b, 1e-20), "{a} {b}");
        }
    }

    #[test]
    fn dg_dx2_reference_values() {
        let y = CylPoint::new(0.0, 0.0);
        let v = dg_dx2(&CylPoint::new(1.0, 0.5 * PI), &y).unwrap();
        assert!(close(v, -1.0 / (2.0 * 1f64.cosh()), 1e-15));
        assert!(close(v, -0.3240271, 1e-7));
        for d1 in [-3.0, 0.5, 40.0] {
            assert_eq!(dg_dx2(&CylPoint::new(d1, 0.0), &y).unwrap(), 0.0);
        }
    }

    #[test]
    fn grad_perp_reference_values() {
        let cfg = KernelConfig {
            normalization: 1.0,
            ..KernelConfig::default()
        };
        let v = grad_perp_green(&CylPoint::new(1.0, 0.5 * PI), &CylPoint::new(0.0, 0.0), &cfg);
        assert!(close(v[0], -0.3240271, 1e-7));
        assert!(close(v[1], 1f64.sinh() / (2.0 * 1f64.cosh()), 1e-15));
        assert!(close(v[1], 0.3807971, 1e-7));

        let p = CylPoint::new(2.0, 1.0);
        assert_eq!(grad_perp_green(&p, &p, &cfg), [0.0, 0.0]);

        let v = grad_perp_green(&CylPoint::new(20.0, 1.0), &CylPoint::new(0.0, 0.0), &cfg);
        assert!(v[0].abs() <= 1e-7, "{v:?}");
    }

    #[test]
    fn regularized_kernel_is_total_and_bounded() {
        let cfg = KernelConfig::with_core(0.1);
        let p = CylPoint::new(0.0, 1.0);
        assert_eq!(grad_perp_green(&p, &p, &cfg), [0.0, 0.0]);
        let v = grad_perp_green(&CylPoint::new(0.05, 1.0), &p, &cfg);
        assert!(v[1].is_finite() && v[1].abs() < 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::default().validate().is_ok());
        let bad = KernelConfig {
            truncation_radius: Some(5.0),
            ..KernelConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = KernelConfig {
            normalization: 0.0,
            ..KernelConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = KernelConfig::with_core(-1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn wrap_is_canonical() {
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert!(close(wrap_angle(-0.5), TAU - 0.5, 1e-15));
        assert!(close(wrap_angle(7.0), 7.0 - TAU, 1e-15));
        let p = CylPoint::new(0.0, -3.0 * TAU + 1.0);
        assert!(p.x2() >= 0.0 && p.x2() < TAU);
    }

    #[test]
    fn prepared_path_matches_scalar_path() {
        let cfg = KernelConfig {
            normalization: 1.0,
            core_radius: 0.05,
            truncation_radius: None,
        };
        let sources: Vec<(CylPoint, f64)> = (0..40)
            .map(|k| {
                let t = k as f64;
                (CylPoint::new(3.0 * (0.7 * t).sin() + 0.02 * t * t, 1.3 * t), 0.1 + 0.01 * t)
            })
            .collect();
        let targets: Vec<CylPoint> = (0..25)
            .map(|k| CylPoint::new(-5.0 + 0.9 * k as f64 + if k == 7 { 40.0 } else { 0.0 }, 0.77 * k as f64))
            .collect();
        let fast = induced_velocity(&targets, &sources, &cfg);
        for (t, v) in targets.iter().zip(&fast) {
            let mut e = [0.0, 0.0];
            for (s, g) in &sources {
                let w = grad_perp_green(t, s, &cfg);
                e[0] += g * w[0];
                e[1] += g * w[1];
            }
            for c in 0..2 {
                assert!((v[c] - e[c]).abs() <= 1e-12 * (1.0 + e[c].abs()), "{v:?} vs {e:?}");
            }
        }
    }

    #[test]
    fn prepared_path_far_spread_fallback() {
        let cfg = KernelConfig::default();
        let sources = vec![(CylPoint::new(0.0, 1.0), 1.0), (CylPoint::new(2000.0, 2.0), 1.0)];
        let targets = vec![CylPoint::new(1.0, 1.5), CylPoint::new(1999.0, 0.0)];
        let v = induced_velocity(&targets, &sources, &cfg);
        for (t, v) in targets.iter().zip(&v) {
            let mut e = [0.0, 0.0];
            for (s, g) in &sources {
                let w = grad_perp_green(t, s, &cfg);
                e[0] += g * w[0];
                e[1] += g * w[1];
            }
            assert!((v[0] - e[0]).abs() < 1e-14 && (v[1] - e[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn induced_velocity_examples() {
        let cfg = KernelConfig::default();
        let src = CylPoint::new(0.0, PI);
        let v = induced_velocity(&[src], &[(src, 1.0)], &cfg);
        assert_eq!(v[0], [0.0, 0.0]);

        let target = CylPoint::new(1.0, PI + 0.5 * PI);
        let v = induced_velocity(&[target], &[(src, TAU)], &cfg);
        assert!(close(v[0][0], -0.3240271, 1e-7));
        assert!(close(v[0][1], 0.3807971, 1e-7));
    }

    #[test]
    fn dipole_sources_move_together() {
        let cfg = KernelConfig::default();
        let a = 0.4;
        let p = CylPoint::new(0.0, PI - a);
        let m = CylPoint::new(0.0, PI + a);
        let sources = [(p, 1.0), (m, -1.0)];
        let v = induced_velocity(&[p, m], &sources, &cfg);
        // oracle: single term of dG/dx2 at d2 = -2a and +2a
        let s = |d2: f64| -d2.sin() / (2.0 * (1.0 - d2.cos()));
        let expected_p = -cfg.normalization * s(-2.0 * a);
        let expected_m = cfg.normalization * s(2.0 * a);
        assert!(close(v[0][0], expected_p, 1e-14));
        assert!(close(v[1][0], expected_m, 1e-14));
        assert_eq!(v[0][0], v[1][0]);
    }

    #[test]
    fn truncation_drops_distant_pairs() {
        let cfg = KernelConfig {
            truncation_radius: Some(10.0),
            ..KernelConfig::default()
        };
        let v = induced_velocity(
            &[CylPoint::new(0.0, 0.0)],
            &[(CylPoint::new(10.5, 1.0), 1.0)],
            &cfg,
        );
        assert_eq!(v[0], [0.0, 0.0]);
    }

    #[test]
    fn far_field_limits() {
        let cfg = KernelConfig::default();
        let dipole = [(CylPoint::new(0.0, 2.0), 1.0), (CylPoint::new(0.3, 2.5), -1.0)];
        let (l, r) = far_field_u2_limit(&dipole, &cfg);
        assert!(l.abs() < 1e-8 && r.abs() < 1e-8);

        let blobs = [
            (CylPoint::new(0.0, 2.0), 0.7),
            (CylPoint::new(1.3, 4.5), 0.2),
            (CylPoint::new(-2.0, 0.1), 0.1),
        ];
        let (l, r) = far_field_u2_limit(&blobs, &cfg);
        let m0 = 1.0;
        let expect = cfg.normalization * m0 / 2.0;
        assert!(((l + r) / r).abs() < 1e-6);
        assert!(((r - expect) / expect).abs() < 1e-6, "{r} vs {expect}");
        assert!(l < 0.0);
    }

    #[test]
    fn decay_envelope_checks() {
        let rep = validate_decay_envelope(DecayEnvelope::default(), 4000).unwrap();
        assert!(rep.pass, "{rep:?}");
        let rep = validate_decay_envelope(DecayEnvelope { c1: 1e-6, c2: 10.0 }, 1000).unwrap();
        assert!(!rep.pass);
        assert!(validate_decay_envelope(DecayEnvelope::default(), 999).is_err());
        let g = dg_dx2(&CylPoint::new(0.0, PI), &CylPoint::new(0.0, 0.0)).unwrap();
        assert!(g.abs() <= DecayEnvelope::default().value(PI));
    }
}
