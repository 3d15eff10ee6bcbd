use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{dist, Point};

/// Radial bump `A (1 - |x-c|²/ρ²)³` for `|x-c| < ρ`, zero outside. It is C² across `|x-c| = ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

/// Conductivity `γ = 1 + Σ bumps`, identically 1 outside `B_R(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaField {
    #[serde(default)]
    pub bumps: Vec<Bump>,
    /// Radius `R` of the ball outside which `γ ≡ 1`.
    #[serde(default = "default_support_radius")]
    pub support_radius: f64,
    /// Constant factor applied to the whole field (1 by default).
    #[serde(default = "one")]
    pub scale: f64,
}

fn default_support_radius() -> f64 {
    1.0
}

fn one() -> f64 {
    1.0
}

impl Default for GammaField {
    fn default() -> Self {
        Self::constant(1.0)
    }
}

impl GammaField {
    pub fn constant(value: f64) -> Self {
        Self { bumps: Vec::new(), support_radius: default_support_radius(), scale: value }
    }

    pub fn with_bumps(bumps: Vec<Bump>, support_radius: f64) -> Self {
        Self { bumps, support_radius, scale: 1.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.bumps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Invalid(format!("gamma scale must be positive, got {}", self.scale)));
        }
        if self.gamma_min() <= 0.0 {
            return Err(Error::Invalid(format!(
                "gamma may reach {} <= 0; reduce negative bump amplitudes",
                self.gamma_min()
            )));
        }
        for (i, b) in self.bumps.iter().enumerate() {
            if !(b.radius > 0.0) {
                return Err(Error::Invalid(format!("bump {i}: radius must be positive")));
            }
            if dist(b.center, [0.0, 0.0]) + b.radius > self.support_radius {
                return Err(Error::Invalid(format!(
                    "bump {i}: support leaves the ball of radius {}",
                    self.support_radius
                )));
            }
        }
        Ok(())
    }

    /// Conservative lower bound for `γ`.
    pub fn gamma_min(&self) -> f64 {
        self.scale * (1.0 + self.bumps.iter().map(|b| b.amplitude.min(0.0)).sum::<f64>())
    }

    /// Returns `(γ, ∇γ, Δγ)` at `x`.
    pub fn eval_full(&self, x: Point) -> (f64, Point, f64) {
        let mut g = 1.0;
        let mut grad = [0.0; 2];
        let mut lap = 0.0;
        for b in &self.bumps {
            let d = [x[0] - b.center[0], x[1] - b.center[1]];
            let r2 = b.radius * b.radius;
            let u = (d[0] * d[0] + d[1] * d[1]) / r2;
            if u >= 1.0 {
                continue;
            }
            let w = 1.0 - u;
            g += b.amplitude * w * w * w;
            let dg = -3.0 * w * w;
            let d2g = 6.0 * w;
            grad[0] += b.amplitude * dg * 2.0 * d[0] / r2;
            grad[1] += b.amplitude * dg * 2.0 * d[1] / r2;
            lap += b.amplitude * 4.0 / r2 * (u * d2g + dg);
        }
        let s = self.scale;
        (s * g, [s * grad[0], s * grad[1]], s * lap)
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.eval_full(x).0
    }

    pub fn gradient(&self, x: Point) -> Point {
        self.eval_full(x).1
    }

    pub fn laplacian(&self, x: Point) -> f64 {
        self.eval_full(x).2
    }

    /// Stable hash of the parameters, used as a factorization cache key.
    pub fn content_hash(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("gamma serializes");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}
