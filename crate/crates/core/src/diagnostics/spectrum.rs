use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 8] = b"LVMGRID1";

/// A row-major `n_rows × n_cols` array on a uniform grid with spacings
/// `d_row`, `d_col`; the on-disk format of field lines and spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub n_rows: usize,
    pub n_cols: usize,
    pub d_row: f64,
    pub d_col: f64,
    pub data: Vec<f64>,
}

impl Grid2 {
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        write_grid_header(&mut out, self.n_rows, self.n_cols, self.d_row, self.d_col)?;
        for x in &self.data {
            out.write_all(&x.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Format { path: path.to_path_buf(), msg };
        let mut input = BufReader::new(File::open(path)?);
        let mut header = [0u8; 40];
        input
            .read_exact(&mut header)
            .map_err(|_| bad("truncated header (need 40 bytes)".into()))?;
        if &header[..8] != GRID_MAGIC {
            return Err(bad(format!("bad magic {:?}", String::from_utf8_lossy(&header[..8]))));
        }
        let word = |i: usize| -> [u8; 8] { header[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
        let n_rows = u64::from_le_bytes(word(0)) as usize;
        let n_cols = u64::from_le_bytes(word(1)) as usize;
        let d_row = f64::from_le_bytes(word(2));
        let d_col = f64::from_le_bytes(word(3));
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let want = n_rows.checked_mul(n_cols).and_then(|n| n.checked_mul(8));
        if want != Some(bytes.len()) {
            return Err(bad(format!(
                "header declares {n_rows}x{n_cols} samples but payload has {} bytes",
                bytes.len()
            )));
        }
        let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        Ok(Self { n_rows, n_cols, d_row, d_col, data })
    }
}

pub fn write_grid_header<W: Write>(out: &mut W, n_rows: usize, n_cols: usize, d_row: f64, d_col: f64) -> std::io::Result<()> {
    out.write_all(GRID_MAGIC)?;
    out.write_all(&(n_rows as u64).to_le_bytes())?;
    out.write_all(&(n_cols as u64).to_le_bytes())?;
    out.write_all(&d_row.to_le_bytes())?;
    out.write_all(&d_col.to_le_bytes())
}

/// Power `|Ê(ω, k)|²` of a field sampled on a uniform `(t, x)` grid, with
/// `Ê(ω, k) = Σ_t Σ_x E(t, x) e^{−i(kx − ωt)}` so that a wave
/// `e^{i(k₀x − ω₀t)}` appears at `(ω₀, k₀)`. Axes are in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub omega: Vec<f64>,
    pub k: Vec<f64>,
    /// Row-major over `(omega, k)`.
    pub power: Vec<f64>,
}

impl SpectrumGrid {
    pub fn at(&self, i_omega: usize, i_k: usize) -> f64 {
        self.power[i_omega * self.k.len() + i_k]
    }

    /// Restriction to `ω ≥ 0`, `k ≥ 0` as a grid with spacings `(dω, dk)`.
    pub fn positive_quadrant(&self) -> Grid2 {
        let nw = self.omega.iter().filter(|w| **w >= 0.0).count();
        let nk = self.k.iter().filter(|k| **k >= 0.0).count();
        let mut data = Vec::with_capacity(nw * nk);
        for i in 0..nw {
            for j in 0..nk {
                data.push(self.at(i, j));
            }
        }
        Grid2 {
            n_rows: nw,
            n_cols: nk,
            d_row: self.omega.get(1).copied().unwrap_or(0.0),
            d_col: self.k.get(1).copied().unwrap_or(0.0),
            data,
        }
    }
}

fn angular_frequencies(n: usize, d: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n)
        .map(|i| {
            let m = if i <= (n - 1) / 2 { i as f64 } else { i as f64 - n as f64 };
            m * scale
        })
        .collect()
}

/// Space–time spectrum of `E_x(t_i, x_j)` (rows are time samples).
pub fn dispersion_spectrum(samples: &Grid2) -> Result<SpectrumGrid> {
    let (nt, nx) = (samples.n_rows, samples.n_cols);
    if nt == 0 || nx == 0 {
        return Ok(SpectrumGrid { omega: Vec::new(), k: Vec::new(), power: Vec::new() });
    }
    if !(samples.d_row > 0.0 && samples.d_col > 0.0) || !samples.d_row.is_finite() || !samples.d_col.is_finite() {
        return Err(Error::NonUniformGrid(format!(
            "spacings must be positive and finite, got dt = {}, dx = {}",
            samples.d_row, samples.d_col
        )));
    }
    if samples.data.len() != nt * nx {
        return Err(Error::InvalidArgument("sample count does not match grid shape".into()));
    }
    let mut buf: Vec<Complex64> = samples.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    // x: forward transform (e^{−ikx}) along each row.
    let fx = planner.plan_fft_forward(nx);
    for row in buf.chunks_exact_mut(nx) {
        fx.process(row);
    }
    // t: inverse-sign transform (e^{+iωt}) along each column, unnormalized.
    let ft = planner.plan_fft_inverse(nt);
    let mut col = vec![Complex64::new(0.0, 0.0); nt];
    for j in 0..nx {
        for i in 0..nt {
            col[i] = buf[i * nx + j];
        }
        ft.process(&mut col);
        for i in 0..nt {
            buf[i * nx + j] = col[i];
        }
    }
    Ok(SpectrumGrid {
        omega: angular_frequencies(nt, samples.d_row),
        k: angular_frequencies(nx, samples.d_col),
        power: buf.iter().map(|z| z.norm_sqr()).collect(),
    })
}

/// Power averaged over `|k| ≥ k_start`, for `ω ≥ 0` in increasing order.
pub fn k_averaged_power(grid: &SpectrumGrid, k_start: f64) -> (Vec<f64>, Vec<f64>) {
    let cols: Vec<usize> = (0..grid.k.len()).filter(|&j| grid.k[j].abs() >= k_start).collect();
    let rows: Vec<usize> = (0..grid.omega.len()).filter(|&i| grid.omega[i] >= 0.0).collect();
    let omega = rows.iter().map(|&i| grid.omega[i]).collect();
    let avg = rows
        .iter()
        .map(|&i| {
            if cols.is_empty() {
                0.0
            } else {
                cols.iter().map(|&j| grid.at(i, j)).sum::<f64>() / cols.len() as f64
            }
        })
        .collect();
    (omega, avg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPeak {
    pub target: f64,
    /// Strongest local maximum within the band around `target`.
    pub peak: Option<Peak>,
    /// `|peak − target|`, infinite without a peak.
    pub offset: f64,
    /// Peak amplitude over the median power within four band widths of
    /// the target; zero without a peak.
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvkPeaks {
    /// All interior local maxima of the k-averaged power, refined.
    pub peaks: Vec<Peak>,
    pub targets: Vec<TargetPeak>,
}

/// Locates the maxima of the k-averaged spectrum and, for each target
/// frequency, the strongest maximum within `±half_width` of it.
pub fn cvk_peak_offsets(grid: &SpectrumGrid, k_start: f64, targets: &[f64], half_width: f64) -> CvkPeaks {
    let (omega, avg) = k_averaged_power(grid, k_start);
    let mut peaks = Vec::new();
    if avg.iter().any(|p| *p > 0.0) {
        for i in 1..avg.len().saturating_sub(1) {
            if avg[i] > avg[i - 1] && avg[i] >= avg[i + 1] {
                let (a, b, c) = (avg[i - 1], avg[i], avg[i + 1]);
                let denom = a - 2.0 * b + c;
                let s = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
                let h = omega[i + 1] - omega[i];
                peaks.push(Peak { omega: omega[i] + s * h, amplitude: b - 0.25 * (a - c) * s });
            }
        }
    }
    let targets = targets
        .iter()
        .map(|&t| {
            let peak = peaks
                .iter()
                .filter(|p| (p.omega - t).abs() <= half_width)
                .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
                .cloned();
            let offset = peak.as_ref().map_or(f64::INFINITY, |p| (p.omega - t).abs());
            let mut band: Vec<f64> = omega
                .iter()
                .zip(&avg)
                .filter(|(w, _)| (*w - t).abs() <= 4.0 * half_width)
                .map(|(_, p)| *p)
                .collect();
            band.sort_by(f64::total_cmp);
            let median = band.get(band.len() / 2).copied().unwrap_or(0.0);
            let prominence = match &peak {
                Some(p) if median > 0.0 => p.amplitude / median,
                Some(_) => f64::INFINITY,
                None => 0.0,
            };
            TargetPeak { target: t, peak, offset, prominence }
        })
        .collect();
    CvkPeaks { peaks, targets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn plane_wave(nt: usize, nx: usize, dt: f64, dx: f64, w0: f64, k0: f64) -> Grid2 {
        let mut data = Vec::with_capacity(nt * nx);
        for i in 0..nt {
            for j in 0..nx {
                data.push((k0 * j as f64 * dx - w0 * i as f64 * dt).sin());
            }
        }
        Grid2 { n_rows: nt, n_cols: nx, d_row: dt, d_col: dx, data }
    }

    #[test]
    fn plane_wave_peaks_at_its_frequency_and_wavenumber() {
        let (nt, nx, dt, dx) = (64, 32, 0.25, 0.5);
        let w0 = 5.0 * 2.0 * PI / (nt as f64 * dt);
        let k0 = 3.0 * 2.0 * PI / (nx as f64 * dx);
        let s = dispersion_spectrum(&plane_wave(nt, nx, dt, dx, w0, k0)).unwrap();
        let q = s.positive_quadrant();
        let (imax, _) = q.data.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!((imax / q.n_cols, imax % q.n_cols), (5, 3));
        let total: f64 = s.power.iter().sum();
        assert!((q.data[imax] - 0.5 * total).abs() < 1e-8 * total);
    }

    #[test]
    fn parseval_and_zero_field() {
        let mut g = plane_wave(20, 12, 0.1, 0.3, 1.3, 2.1);
        g.data.iter_mut().enumerate().for_each(|(i, x)| *x += (i as f64 * 0.37).cos());
        let s = dispersion_spectrum(&g).unwrap();
        let lhs: f64 = s.power.iter().sum();
        let rhs: f64 = 240.0 * g.data.iter().map(|x| x * x).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10 * rhs);
        g.data.iter_mut().for_each(|x| *x = 0.0);
        assert!(dispersion_spectrum(&g).unwrap().power.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn invalid_spacing_is_rejected() {
        let mut g = plane_wave(4, 4, 0.1, 0.1, 1.0, 1.0);
        g.d_row = 0.0;
        assert!(matches!(dispersion_spectrum(&g), Err(Error::NonUniformGrid(_))));
    }

    #[test]
    fn injected_lines_are_found() {
        let dw = 0.01;
        let omega: Vec<f64> = (0..400).map(|i| i as f64 * dw).collect();
        let k = vec![0.0, 5.0];
        let mut power = vec![0.0; 800];
        for (i, w) in omega.iter().enumerate() {
            let line = |c: f64| (-((w - c) / 0.03).powi(2)).exp();
            power[2 * i + 1] = 1e-3 + line(0.618) + 0.5 * line(1.618);
        }
        let grid = SpectrumGrid { omega, k, power };
        let r = cvk_peak_offsets(&grid, 4.0, &[0.618, 1.618], 0.05);
        for t in &r.targets {
            assert!(t.peak.is_some());
            assert!(t.offset <= dw, "offset {}", t.offset);
            assert!(t.prominence > 100.0, "prominence {}", t.prominence);
        }
    }

    #[test]
    fn empty_grid_gives_no_peaks() {
        let grid = SpectrumGrid { omega: vec![], k: vec![], power: vec![] };
        let r = cvk_peak_offsets(&grid, 4.0, &[0.6], 0.05);
        assert!(r.peaks.is_empty());
        assert!(r.targets[0].peak.is_none());
        assert_eq!(r.targets[0].prominence, 0.0);
    }

    #[test]
    fn grid_file_round_trip_and_bad_magic() {
        let g = plane_wave(3, 5, 0.25, 0.5, 1.0, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        g.write(&path).unwrap();
        assert_eq!(Grid2::read(&path).unwrap(), g);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Grid2::read(&path), Err(Error::Format { .. })));
    }
}
