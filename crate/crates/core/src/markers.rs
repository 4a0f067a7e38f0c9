//! Marker sampling, dynamical weights and the Maxwellian background.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MappingSpec;

/// Markers per parallel task. Fixed, so results never depend on the number
/// of threads.
pub const MARKER_CHUNK: usize = 4096;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"LVMPIC01";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub alpha: f64,
    pub eps: f64,
    pub v_th: f64,
}

impl PhysParams {
    pub fn new(alpha: f64, eps: f64, v_th: f64) -> Result<Self> {
        if !(v_th > 0.0) || !v_th.is_finite() {
            return Err(Error::InvalidArgument(format!("v_th must be positive, got {v_th}")));
        }
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be nonzero".into()));
        }
        if eps == 0.0 || !eps.is_finite() {
            return Err(Error::InvalidArgument("eps must be nonzero".into()));
        }
        Ok(Self { alpha, eps, v_th })
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha * self.alpha
    }

    /// Plasma frequency in code units, `α / |ε|`.
    pub fn omega_p(&self) -> f64 {
        self.alpha.abs() / self.eps.abs()
    }

    /// Cyclotron frequency for a unit background field, `1 / |ε|`.
    pub fn omega_c(&self) -> f64 {
        1.0 / self.eps.abs()
    }
}

/// Equilibrium density and fields. Only constant densities are supported,
/// so the background electric field vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub n0: f64,
    pub b0: [f64; 3],
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self { n0: 1.0, b0: [0.0; 3] }
    }
}

/// `n0 (2π v_th²)^{-3/2} exp(−|v|² / 2v_th²)`.
#[inline]
pub fn eval_f0(phys: &PhysParams, background: &BackgroundSpec, v: [f64; 3]) -> f64 {
    let vt2 = phys.v_th * phys.v_th;
    let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    background.n0 * (2.0 * std::f64::consts::PI * vt2).powf(-1.5) * (-0.5 * v2 / vt2).exp()
}

/// Struct-of-arrays marker storage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkerBatch {
    pub eta: Vec<[f64; 3]>,
    pub v: Vec<[f64; 3]>,
    pub w: Vec<f64>,
    pub s0: Vec<f64>,
    pub f0: Vec<f64>,
}

impl MarkerBatch {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Recomputes the cached background values from the velocities.
    pub fn refresh_f0(&mut self, phys: &PhysParams, background: &BackgroundSpec) {
        let v = &self.v;
        self.f0
            .par_chunks_mut(MARKER_CHUNK)
            .enumerate()
            .for_each(|(chunk, out)| {
                let base = chunk * MARKER_CHUNK;
                for (k, f) in out.iter_mut().enumerate() {
                    *f = eval_f0(phys, background, v[base + k]);
                }
            });
    }

    pub fn positions_physical(&self, mapping: &MappingSpec) -> Vec<[f64; 3]> {
        self.eta
            .iter()
            .map(|&e| {
                let x = mapping.map(e);
                [x[0], x[1], x[2]]
            })
            .collect()
    }

    /// Assigns `w_p = f1(x_p, v_p) / s0_p`.
    pub fn init_weights<F>(&mut self, mapping: &MappingSpec, f1: F)
    where
        F: Fn([f64; 3], [f64; 3]) -> f64 + Sync,
    {
        let eta = &self.eta;
        let v = &self.v;
        let s0 = &self.s0;
        self.w.par_chunks_mut(MARKER_CHUNK).enumerate().for_each(|(chunk, out)| {
            let base = chunk * MARKER_CHUNK;
            for (k, w) in out.iter_mut().enumerate() {
                let p = base + k;
                let x = mapping.map(eta[p]);
                *w = f1([x[0], x[1], x[2]], v[p]) / s0[p];
            }
        });
    }

    /// Writes the snapshot format: magic, marker count, then
    /// `(η1, η2, η3, v1, v2, v3, w, s0)` per marker, little endian.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for p in 0..self.len() {
            let rec = [
                self.eta[p][0],
                self.eta[p][1],
                self.eta[p][2],
                self.v[p][0],
                self.v[p][1],
                self.v[p][2],
                self.w[p],
                self.s0[p],
            ];
            for x in rec {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path, phys: &PhysParams, background: &BackgroundSpec) -> Result<Self> {
        let bad = |msg: &str| Error::Format { path: path.to_path_buf(), msg: msg.to_string() };
        let mut input = BufReader::new(File::open(path)?);
        let mut header = [0u8; 16];
        input.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if &header[..8] != SNAPSHOT_MAGIC {
            return Err(bad("bad magic"));
        }
        let count = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != count * 64 {
            return Err(bad(&format!("expected {} payload bytes, found {}", count * 64, bytes.len())));
        }
        let mut batch = MarkerBatch::default();
        for rec in bytes.chunks_exact(64) {
            let f: Vec<f64> = rec
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            batch.eta.push([f[0], f[1], f[2]]);
            batch.v.push([f[3], f[4], f[5]]);
            batch.w.push(f[6]);
            batch.s0.push(f[7]);
        }
        batch.f0 = vec![0.0; count];
        batch.refresh_f0(phys, background);
        Ok(batch)
    }
}

/// Draws `n` markers: `η` uniform on the unit cube and `v` from the
/// Maxwellian with variance `v_th²` per component. The sampling density in
/// phase space is `s0 = f_M(v) / √g(η)` (so `∫ s0 √g dη dv = 1`), which on
/// affine mappings equals `f_M(v) / Vol`. Chunk `c` uses ChaCha stream `c`
/// of `seed`, so the batch depends only on `(n, seed)`.
pub fn sample_markers(
    n: usize,
    mapping: &MappingSpec,
    phys: &PhysParams,
    background: &BackgroundSpec,
    seed: u64,
) -> Result<MarkerBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("marker count must be positive".into()));
    }
    let unit = BackgroundSpec { n0: 1.0, ..*background };
    let chunks: Vec<Result<Vec<([f64; 3], [f64; 3], f64)>>> = (0..n.div_ceil(MARKER_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let len = MARKER_CHUNK.min(n - chunk * MARKER_CHUNK);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let eta: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
                let v: [f64; 3] = std::array::from_fn(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    phys.v_th * z
                });
                let sqrt_g = mapping.bundle(eta)?.sqrt_g;
                out.push((eta, v, eval_f0(phys, &unit, v) / sqrt_g));
            }
            Ok(out)
        })
        .collect();
    let mut batch = MarkerBatch {
        eta: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        w: vec![0.0; n],
        s0: Vec::with_capacity(n),
        f0: vec![0.0; n],
    };
    for chunk in chunks {
        for (eta, v, s0) in chunk? {
            batch.eta.push(eta);
            batch.v.push(v);
            batch.s0.push(s0);
        }
    }
    batch.refresh_f0(phys, background);
    Ok(batch)
}
