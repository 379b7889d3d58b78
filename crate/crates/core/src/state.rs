//! Blob ensembles and the functionals measured on them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{self, CylPoint, KernelConfig};
use crate::mollifier::MollifierProfile;

/// A regularised point vortex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub pos: CylPoint,
    /// Circulation carried by the blob (its share of the vorticity mass).
    pub gamma: f64,
    /// Radius of the rasterisation footprint.
    pub core: f64,
}

impl Blob {
    pub fn new(x1: f64, x2: f64, gamma: f64, core: f64) -> Self {
        Self {
            pos: CylPoint::new(x1, x2),
            gamma,
            core,
        }
    }
}

/// Position of a run inside the counter-based random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StreamState {
    pub seed: u64,
    pub ensemble_id: u64,
    /// Number of completed steps; keys the random increments of the next step.
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub blobs: Vec<Blob>,
    pub time: f64,
    pub viscosity: f64,
    pub kernel: KernelConfig,
    pub stream: StreamState,
}

impl FlowState {
    /// Validate and assemble a state at time zero.
    ///
    /// With an unregularised kernel, exactly coincident blobs are rejected
    /// rather than merged.
    pub fn new(blobs: Vec<Blob>, kernel: KernelConfig, viscosity: f64) -> Result<Self> {
        kernel.validate()?;
        if !(viscosity >= 0.0 && viscosity.is_finite()) {
            return Err(domain(format!("viscosity must be finite and >= 0, got {viscosity}")));
        }
        for (i, b) in blobs.iter().enumerate() {
            if !b.pos.is_finite() || !b.gamma.is_finite() {
                return Err(domain(format!("blob {i} has a non-finite position or circulation")));
            }
            if !(b.core > 0.0 && b.core.is_finite()) {
                return Err(domain(format!("blob {i} has non-positive core {}", b.core)));
            }
        }
        if kernel.core_radius == 0.0 {
            let mut order: Vec<usize> = (0..blobs.len()).collect();
            order.sort_by(|&a, &b| {
                let (pa, pb) = (blobs[a].pos, blobs[b].pos);
                pa.x1().total_cmp(&pb.x1()).then(pa.x2().total_cmp(&pb.x2()))
            });
            for w in order.windows(2) {
                if blobs[w[0]].pos == blobs[w[1]].pos {
                    return Err(domain(format!(
                        "blobs {} and {} coincide and the kernel is unregularised",
                        w[0].min(w[1]),
                        w[0].max(w[1])
                    )));
                }
            }
        }
        Ok(Self {
            blobs,
            time: 0.0,
            viscosity,
            kernel,
            stream: StreamState::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn x1(&self) -> Vec<f64> {
        self.blobs.iter().map(|b| b.pos.x1()).collect()
    }

    pub fn x2(&self) -> Vec<f64> {
        self.blobs.iter().map(|b| b.pos.x2()).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.blobs.iter().map(|b| b.gamma).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.blobs.iter().map(|b| b.gamma).sum()
    }

    /// Mass with `|x1| > h`, blobs treated as atoms at their centers.
    pub fn tail_mass(&self, h: f64) -> f64 {
        self.blobs
            .iter()
            .filter(|b| b.pos.x1().abs() > h)
            .fold(0.0, |acc, b| acc + b.gamma)
    }

    /// Number of blobs with `|x1| > h`; the walker-fraction analogue of
    /// [`tail_mass`](Self::tail_mass) for zero-circulation ensembles.
    pub fn tail_count(&self, h: f64) -> usize {
        self.blobs.iter().filter(|b| b.pos.x1().abs() > h).count()
    }

    /// `sum gamma (1 - W(x1))`.
    pub fn mollified_tail(&self, profile: &MollifierProfile) -> f64 {
        self.blobs
            .iter()
            .fold(0.0, |acc, b| acc + b.gamma * (1.0 - profile.eval(b.pos.x1())))
    }

    fn x1_range(&self) -> Result<(f64, f64)> {
        if self.blobs.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        Ok(self.blobs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            (lo.min(b.pos.x1()), hi.max(b.pos.x1()))
        }))
    }

    /// Largest axial separation between two blobs.
    pub fn diameter_x1(&self) -> Result<f64> {
        let (lo, hi) = self.x1_range()?;
        Ok(hi - lo)
    }

    pub fn max_abs_x1(&self) -> f64 {
        self.blobs.iter().map(|b| b.pos.x1().abs()).fold(0.0, f64::max)
    }

    /// Circulation-weighted mean axial position.
    pub fn center_x1(&self) -> Result<f64> {
        if self.blobs.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let m = self.total_mass();
        if m == 0.0 {
            return Err(domain("center of vorticity undefined for zero total circulation"));
        }
        Ok(self.blobs.iter().map(|b| b.gamma * b.pos.x1()).sum::<f64>() / m)
    }

    pub fn first_moment_x1(&self) -> f64 {
        self.blobs.iter().map(|b| b.gamma * b.pos.x1().abs()).sum()
    }

    /// Interaction energy `kappa sum_{i<j} gamma_i gamma_j G(x_i, x_j)`
    /// with the dynamics' regularisation.
    pub fn hamiltonian(&self) -> Result<f64> {
        let active: Vec<&Blob> = self.blobs.iter().filter(|b| b.gamma != 0.0).collect();
        let x1: Vec<f64> = active.iter().map(|b| b.pos.x1()).collect();
        let x2: Vec<f64> = active.iter().map(|b| b.pos.x2()).collect();
        let g: Vec<f64> = active.iter().map(|b| b.gamma).collect();
        let hc = 0.5 * self.kernel.core_radius * self.kernel.core_radius;
        Ok(self.kernel.normalization * kernel::pair_energy_sum(&x1, &x2, &g, hc)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn state(blobs: Vec<Blob>) -> FlowState {
        FlowState::new(blobs, KernelConfig::with_core(0.1), 0.0).unwrap()
    }

    #[test]
    fn mass_functionals() {
        assert_eq!(state(vec![]).total_mass(), 0.0);
        let s = state((0..100).map(|k| Blob::new(k as f64 * 0.01, 1.0, 0.01, 0.1)).collect());
        assert!((s.total_mass() - 1.0).abs() < 1e-14);

        let s = state(vec![
            Blob::new(-3.0, 0.0, 1.0, 0.1),
            Blob::new(1.0, 1.0, 1.0, 0.1),
            Blob::new(5.0, 2.0, 1.0, 0.1),
        ]);
        assert_eq!(s.tail_mass(2.0), 2.0);
        assert_eq!(s.tail_mass(0.0), 3.0);
        assert_eq!(s.tail_mass(5.0), 0.0);
        assert_eq!(s.tail_count(2.0), 2);
    }

    #[test]
    fn geometry_functionals() {
        let s = state(vec![Blob::new(0.7, 1.0, 1.0, 0.1)]);
        assert_eq!(s.diameter_x1().unwrap(), 0.0);
        let s = state(vec![Blob::new(-2.0, 1.0, 1.0, 0.1), Blob::new(2.0, 3.0, 1.0, 0.1)]);
        assert_eq!(s.diameter_x1().unwrap(), 4.0);
        assert_eq!(s.max_abs_x1(), 2.0);
        assert_eq!(s.center_x1().unwrap(), 0.0);
        assert_eq!(s.first_moment_x1(), 4.0);
        assert!(matches!(state(vec![]).diameter_x1(), Err(Error::EmptyEnsemble)));
        assert!(matches!(state(vec![]).center_x1(), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn mollified_tail_limits() {
        let w = MollifierProfile::new(2.0, 0.5).unwrap();
        let inside = state(vec![Blob::new(1.0, 0.0, 1.0, 0.1), Blob::new(-2.0, 0.0, 2.0, 0.1)]);
        assert_eq!(inside.mollified_tail(&w), 0.0);
        let outside = state(vec![Blob::new(3.0, 0.0, 1.0, 0.1), Blob::new(-2.5, 0.0, 2.0, 0.1)]);
        assert_eq!(outside.mollified_tail(&w), outside.total_mass());
    }

    #[test]
    fn hamiltonian_pair() {
        let cfg = KernelConfig {
            normalization: 1.0,
            core_radius: 0.0,
            truncation_radius: None,
        };
        let s = FlowState::new(
            vec![Blob::new(0.0, 0.0, 1.0, 0.1), Blob::new(0.0, PI, 1.0, 0.1)],
            cfg,
            0.0,
        )
        .unwrap();
        assert!((s.hamiltonian().unwrap() + 0.5 * 2f64.ln()).abs() < 1e-15);
        let mut flipped = s.clone();
        flipped.blobs.iter_mut().for_each(|b| b.gamma = -b.gamma);
        assert_eq!(flipped.hamiltonian().unwrap(), s.hamiltonian().unwrap());
    }

    #[test]
    fn coincident_blobs_rejected_without_core() {
        let blobs = vec![Blob::new(1.0, 2.0, 1.0, 0.1), Blob::new(1.0, 2.0, 1.0, 0.1)];
        assert!(FlowState::new(blobs.clone(), KernelConfig::default(), 0.0).is_err());
        assert!(FlowState::new(blobs, KernelConfig::with_core(0.05), 0.0).is_ok());
    }
}
