//! Mappings from the logical unit cube to the physical domain.
//!
//! Two mappings are supported: an axis-aligned cuboid and the Colella
//! mapping, which mixes the first two logical coordinates while keeping the
//! third one affine. Every quantity needed for the pull-back of differential
//! forms (Jacobian, its inverse, metric tensor and volume element) is
//! available through [`MappingSpec::bundle`].

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Determinants at or below this value are treated as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-12;

const VALIDATION_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    Cuboid,
    Colella,
}

/// A validated mapping description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    kind: MappingKind,
    lengths: [f64; 3],
    alpha_c: f64,
}

/// Mapping value and metric quantities at a single logical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingBundle {
    pub x: Vector3<f64>,
    pub dl: Matrix3<f64>,
    pub dl_inv: Matrix3<f64>,
    pub metric: Matrix3<f64>,
    pub metric_inv: Matrix3<f64>,
    pub sqrt_g: f64,
}

impl MappingSpec {
    pub fn cuboid(lengths: [f64; 3]) -> Result<Self> {
        Self::new(MappingKind::Cuboid, lengths, 0.0)
    }

    pub fn colella(lengths: [f64; 3], alpha_c: f64) -> Result<Self> {
        Self::new(MappingKind::Colella, lengths, alpha_c)
    }

    /// Builds and validates a mapping. The Jacobian determinant is checked on a
    /// 32³ sample grid of the logical cube.
    pub fn new(kind: MappingKind, lengths: [f64; 3], alpha_c: f64) -> Result<Self> {
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidMapping(format!(
                "lengths must be finite and positive, got {lengths:?}"
            )));
        }
        if !alpha_c.is_finite() {
            return Err(Error::InvalidMapping("alpha_c must be finite".into()));
        }
        let alpha_c = match kind {
            MappingKind::Cuboid => 0.0,
            MappingKind::Colella => {
                if alpha_c.abs() >= 1.0 / (2.0 * PI) {
                    return Err(Error::InvalidMapping(format!(
                        "Colella distortion |alpha_c| = {} must stay below 1/(2 pi)",
                        alpha_c.abs()
                    )));
                }
                alpha_c
            }
        };
        let spec = Self { kind, lengths, alpha_c };
        spec.validate_jacobian()?;
        Ok(spec)
    }

    fn validate_jacobian(&self) -> Result<()> {
        let n = VALIDATION_SAMPLES;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let eta = [
                        (i as f64 + 0.5) / n as f64,
                        (j as f64 + 0.5) / n as f64,
                        (k as f64 + 0.5) / n as f64,
                    ];
                    let det = self.jacobian(eta).determinant();
                    if det <= SINGULAR_DET_TOL {
                        return Err(Error::SingularMapping { eta, det });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn alpha_c(&self) -> f64 {
        self.alpha_c
    }

    /// Physical volume, i.e. the integral of the volume element over the logical cube.
    pub fn volume(&self) -> f64 {
        // The Colella distortion integrates to zero over a period.
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }

    /// `true` when the Jacobian does not depend on the logical point.
    pub fn is_affine(&self) -> bool {
        self.kind == MappingKind::Cuboid || self.alpha_c == 0.0
    }

    pub fn map(&self, eta: [f64; 3]) -> Vector3<f64> {
        let [lx, ly, lz] = self.lengths;
        match self.kind {
            MappingKind::Cuboid => Vector3::new(lx * eta[0], ly * eta[1], lz * eta[2]),
            MappingKind::Colella => {
                let s = self.alpha_c * (2.0 * PI * eta[0]).sin() * (2.0 * PI * eta[1]).sin();
                Vector3::new(lx * (eta[0] + s), ly * (eta[1] + s), lz * eta[2])
            }
        }
    }

    pub fn jacobian(&self, eta: [f64; 3]) -> Matrix3<f64> {
        let [lx, ly, lz] = self.lengths;
        match self.kind {
            MappingKind::Cuboid => Matrix3::from_diagonal(&Vector3::new(lx, ly, lz)),
            MappingKind::Colella => {
                let tp = 2.0 * PI;
                let (s1, c1) = (tp * eta[0]).sin_cos();
                let (s2, c2) = (tp * eta[1]).sin_cos();
                let a = tp * self.alpha_c * c1 * s2;
                let b = tp * self.alpha_c * s1 * c2;
                Matrix3::new(
                    lx * (1.0 + a),
                    lx * b,
                    0.0,
                    ly * a,
                    ly * (1.0 + b),
                    0.0,
                    0.0,
                    0.0,
                    lz,
                )
            }
        }
    }

    /// Evaluates the mapping and all derived metric quantities at `eta`.
    pub fn bundle(&self, eta: [f64; 3]) -> Result<MappingBundle> {
        let dl = self.jacobian(eta);
        let sqrt_g = dl.determinant();
        if sqrt_g <= SINGULAR_DET_TOL {
            return Err(Error::SingularMapping { eta, det: sqrt_g });
        }
        let dl_inv = dl
            .try_inverse()
            .ok_or(Error::SingularMapping { eta, det: sqrt_g })?;
        let metric = dl.transpose() * dl;
        let metric_inv = dl_inv * dl_inv.transpose();
        Ok(MappingBundle {
            x: self.map(eta),
            dl,
            dl_inv,
            metric,
            metric_inv,
            sqrt_g,
        })
    }

    /// `DL^{-1} v`, the logical velocity of a marker with physical velocity `v`.
    pub fn logical_velocity(&self, eta: [f64; 3], v: &Vector3<f64>) -> Vector3<f64> {
        match self.kind {
            MappingKind::Cuboid => Vector3::new(
                v[0] / self.lengths[0],
                v[1] / self.lengths[1],
                v[2] / self.lengths[2],
            ),
            MappingKind::Colella => {
                // 2x2 block inverse; the third direction is affine.
                let j = self.jacobian(eta);
                let det2 = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
                Vector3::new(
                    (j[(1, 1)] * v[0] - j[(0, 1)] * v[1]) / det2,
                    (-j[(1, 0)] * v[0] + j[(0, 0)] * v[1]) / det2,
                    v[2] / j[(2, 2)],
                )
            }
        }
    }
}

/// Wraps a logical coordinate into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}
