//! Compactly supported, non-negative initial vorticity patches and their
//! discretisation into blob ensembles.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernel::KernelConfig;
use crate::state::{Blob, FlowState};

/// Radially symmetric vorticity profiles about `center = [x1, x2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    UniformDisk {
        center: [f64; 2],
        radius: f64,
        omega_level: f64,
    },
    GaussianTruncated {
        center: [f64; 2],
        sigma: f64,
        cutoff_radius: f64,
        amplitude: f64,
    },
    Ring {
        center: [f64; 2],
        r_in: f64,
        r_out: f64,
        omega_level: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    #[default]
    Grid,
    QuasiRandom,
}

pub const DEFAULT_CORE_FACTOR: f64 = 1.5;

fn default_core_factor() -> f64 {
    DEFAULT_CORE_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub shape: Shape,
    pub n_blobs: usize,
    #[serde(default)]
    pub seeding: Seeding,
    /// Blob core radius as a multiple of the mean inter-blob spacing.
    #[serde(default = "default_core_factor")]
    pub core_factor: f64,
}

impl PatchSpec {
    /// Uniform disk of radius 1 and level `1/pi` (unit mass) centred at
    /// `(0, pi)`.
    pub fn standard(n_blobs: usize) -> Self {
        Self {
            shape: Shape::UniformDisk {
                center: [0.0, PI],
                radius: 1.0,
                omega_level: 1.0 / PI,
            },
            n_blobs,
            seeding: Seeding::Grid,
            core_factor: DEFAULT_CORE_FACTOR,
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match self.shape {
            Shape::UniformDisk { center, .. }
            | Shape::GaussianTruncated { center, .. }
            | Shape::Ring { center, .. } => center,
        }
    }

    /// Radial extent `(inner, outer)` of the support.
    fn radial_support(&self) -> (f64, f64) {
        match self.shape {
            Shape::UniformDisk { radius, .. } => (0.0, radius),
            Shape::GaussianTruncated { cutoff_radius, .. } => (0.0, cutoff_radius),
            Shape::Ring { r_in, r_out, .. } => (r_in, r_out),
        }
    }

    /// Peak vorticity.
    pub fn level(&self) -> f64 {
        match self.shape {
            Shape::UniformDisk { omega_level, .. } | Shape::Ring { omega_level, .. } => omega_level,
            Shape::GaussianTruncated { amplitude, .. } => amplitude,
        }
    }

    /// Largest `|x1|` reached by the support.
    pub fn support_x1(&self) -> f64 {
        self.center()[0].abs() + self.radial_support().1
    }

    pub fn support_area(&self) -> f64 {
        let (a, b) = self.radial_support();
        PI * (b * b - a * a)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.center();
        if !(c[0].is_finite() && c[1].is_finite()) {
            return Err(domain("patch center must be finite"));
        }
        if self.n_blobs == 0 {
            return Err(domain("a patch needs at least one blob"));
        }
        if !(self.core_factor > 0.0 && self.core_factor.is_finite()) {
            return Err(domain(format!("core factor must be positive, got {}", self.core_factor)));
        }
        let level = self.level();
        if !(level > 0.0 && level.is_finite()) {
            return Err(domain(format!("vorticity level must be positive, got {level}")));
        }
        let (a, b) = self.radial_support();
        let ok = match self.shape {
            Shape::GaussianTruncated { sigma, .. } => sigma > 0.0 && sigma.is_finite() && b > 0.0,
            _ => a >= 0.0 && b > a,
        };
        if !ok || !b.is_finite() {
            return Err(domain("patch has zero mass: its support is empty"));
        }
        Ok(())
    }

    /// Non-fatal concerns about the patch.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let r = self.radial_support().1;
        if r >= PI {
            w.push(format!(
                "patch radius {r} reaches half the circumference; the support overlaps itself through periodicity"
            ));
        }
        w
    }

    /// `omega_0` at radius `r` from the center.
    pub fn profile(&self, r: f64) -> f64 {
        match self.shape {
            Shape::UniformDisk { radius, omega_level, .. } => {
                if r <= radius {
                    omega_level
                } else {
                    0.0
                }
            }
            Shape::GaussianTruncated {
                sigma,
                cutoff_radius,
                amplitude,
                ..
            } => {
                if r <= cutoff_radius {
                    amplitude * (-r * r / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                }
            }
            Shape::Ring {
                r_in, r_out, omega_level, ..
            } => {
                if r >= r_in && r <= r_out {
                    omega_level
                } else {
                    0.0
                }
            }
        }
    }

    /// `int_a^b omega_0(r) r dr` (the mass of the annulus `[a, b]` per radian).
    fn radial_mass(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.radial_support();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        match self.shape {
            Shape::UniformDisk { omega_level, .. } | Shape::Ring { omega_level, .. } => {
                0.5 * omega_level * (b * b - a * a)
            }
            Shape::GaussianTruncated { sigma, amplitude, .. } => {
                let s2 = 2.0 * sigma * sigma;
                amplitude * sigma * sigma * ((-a * a / s2).exp() - (-b * b / s2).exp())
            }
        }
    }

    /// `int omega_0` over the plane.
    pub fn exact_mass(&self) -> f64 {
        let (a, b) = self.radial_support();
        TAU * self.radial_mass(a, b)
    }

    pub fn mirrored(&self) -> Self {
        let mut m = *self;
        match &mut m.shape {
            Shape::UniformDisk { center, .. }
            | Shape::GaussianTruncated { center, .. }
            | Shape::Ring { center, .. } => center[0] = -center[0],
        }
        m
    }

    pub fn spacing(&self) -> f64 {
        (self.support_area() / self.n_blobs as f64).sqrt()
    }

    pub fn blob_core(&self) -> f64 {
        self.core_factor * self.spacing()
    }
}

/// Number of rings whose disk lattice `1 + sum_k round(2 pi k)` comes
/// closest to `n` points.
fn lattice_rings(n: usize) -> usize {
    let mut count = 1usize;
    let mut k = 0usize;
    while count < n {
        let next = count + (TAU * (k + 1) as f64).round() as usize;
        if next > n && next - n > n - count {
            break;
        }
        count = next;
        k += 1;
    }
    k
}

/// Points `(r, theta, gamma)` of the polar lattice.
fn polar_lattice(spec: &PatchSpec) -> Vec<(f64, f64, f64)> {
    let (r_in, r_out) = spec.radial_support();
    let mut pts = Vec::new();
    // rings k = 1..K sit at radius r_in + k s (disk) or r_in + (k - 1/2) s
    // (annulus), each covering a band of width s split into ~2 pi r / s cells
    let (first, rings, s) = if r_in == 0.0 {
        let k = lattice_rings(spec.n_blobs) as f64;
        let s = r_out / (k + 0.5);
        pts.push((0.0, FRAC_PI_2, TAU * spec.radial_mass(0.0, 0.5 * s)));
        (1.0, k as usize, s)
    } else {
        let s = spec.spacing();
        let k = ((r_out - r_in) / s).round().max(1.0);
        (0.5, k as usize, (r_out - r_in) / k)
    };
    for k in 0..rings {
        let r = r_in + (k as f64 + first) * s;
        let m = (TAU * r / s).round().max(1.0) as usize;
        let band = spec.radial_mass(r - 0.5 * s, r + 0.5 * s);
        let dtheta = TAU / m as f64;
        for j in 0..m {
            pts.push((r, FRAC_PI_2 + dtheta * j as f64, dtheta * band));
        }
    }
    pts
}

/// Additive recurrence with the plastic-number generator.
fn r2_sequence(n: usize) -> Vec<(f64, f64)> {
    const G: f64 = 1.324_717_957_244_746;
    let a1 = 1.0 / G;
    let a2 = 1.0 / (G * G);
    (0..n)
        .map(|i| {
            let i = i as f64 + 1.0;
            ((0.5 + a1 * i).fract(), (0.5 + a2 * i).fract())
        })
        .collect()
}

fn quasi_random(spec: &PatchSpec) -> Vec<(f64, f64, f64)> {
    let (a, b) = spec.radial_support();
    let w = spec.support_area() / spec.n_blobs as f64;
    r2_sequence(spec.n_blobs)
        .into_iter()
        .map(|(u, v)| {
            let r = (a * a + u * (b * b - a * a)).sqrt();
            (r, TAU * v, spec.profile(r) * w)
        })
        .collect()
}

/// Blobs of the patch without a kernel attached.
pub fn blobs(spec: &PatchSpec) -> Result<Vec<Blob>> {
    spec.validate()?;
    let [c1, c2] = spec.center();
    let core = spec.blob_core();
    let pts = match spec.seeding {
        Seeding::Grid => polar_lattice(spec),
        Seeding::QuasiRandom => quasi_random(spec),
    };
    let out: Vec<Blob> = pts
        .into_iter()
        .map(|(r, th, g)| {
            let (s, c) = th.sin_cos();
            // clamp so rounding never pushes a blob outside the support
            let x1 = (c1 + r * c).clamp(c1 - spec.radial_support().1, c1 + spec.radial_support().1);
            Blob::new(x1, c2 + r * s, g, core)
        })
        .collect();
    if out.iter().map(|b| b.gamma).sum::<f64>() <= 0.0 {
        return Err(domain("patch discretises to zero total mass"));
    }
    Ok(out)
}

/// Discretise with the default normalization and a kernel core equal to
/// the blob core.
pub fn discretize(spec: &PatchSpec) -> Result<FlowState> {
    let kernel = KernelConfig::with_core(spec.blob_core());
    discretize_with(spec, kernel, 0.0)
}

pub fn discretize_with(spec: &PatchSpec, kernel: KernelConfig, viscosity: f64) -> Result<FlowState> {
    FlowState::new(blobs(spec)?, kernel, viscosity)
}
