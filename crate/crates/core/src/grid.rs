//! Uniform triply periodic grid and its Fourier machinery.
//!
//! Fields are stored row-major with the z index fastest:
//! `flat = (i * ny + j) * nz + k`. Spectral arrays use the same layout and
//! the unnormalized forward transform; the inverse carries the `1/N`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Periodic box geometry plus cached FFT plans and wavenumbers.
///
/// Cloning is cheap; clones share the plans.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Inner>,
}

struct Inner {
    n: [usize; 3],
    length: [f64; 3],
    dealias_fraction: f64,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
    scratch_len: usize,
    /// Derivative wavenumbers per axis; zero at the Nyquist index.
    k: [Vec<f64>; 3],
    /// Per-mode wavenumbers and dealiasing flags, indexed by flat position.
    kflat: [Vec<f64>; 3],
    mask: Vec<bool>,
    /// Flat index of the mode `−k`.
    neg: Vec<usize>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("length", &self.inner.length)
            .field("dealias_fraction", &self.inner.dealias_fraction)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n
                && self.inner.length == other.inner.length
                && self.inner.dealias_fraction == other.inner.dealias_fraction)
    }
}

/// Signed Fourier index of array position `i` on an axis of `n` points.
#[inline]
pub fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Grid {
    pub fn new(n: [usize; 3], length: [f64; 3], dealias_fraction: f64) -> Result<Self> {
        for (axis, &na) in n.iter().enumerate() {
            if na < 8 || na % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: n = {na} must be even and at least 8"
                )));
            }
        }
        for (axis, &la) in length.iter().enumerate() {
            if !(la.is_finite() && la > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: length {la} must be finite and positive"
                )));
            }
            let h = la / n[axis] as f64;
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {axis}: spacing {h} is degenerate")));
            }
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias_fraction {dealias_fraction} must lie in (0, 1]"
            )));
        }

        let mut planner = FftPlanner::new();
        let forward = n.map(|na| planner.plan_fft_forward(na));
        let inverse = n.map(|na| planner.plan_fft_inverse(na));
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);

        let k = [0, 1, 2].map(|a| {
            (0..n[a])
                .map(|i| {
                    if i == n[a] / 2 {
                        0.0
                    } else {
                        2.0 * PI * signed_mode(i, n[a]) as f64 / length[a]
                    }
                })
                .collect::<Vec<_>>()
        });
        let keep = [0, 1, 2].map(|a| {
            let half = n[a] / 2;
            let kmax = (dealias_fraction * half as f64 + 1e-9).floor() as i64;
            (0..n[a])
                .map(|i| i != half && signed_mode(i, n[a]).abs() <= kmax)
                .collect::<Vec<_>>()
        });

        let [nx, ny, nz] = n;
        let total = nx * ny * nz;
        let idx = |p: usize| [p / (ny * nz), (p / nz) % ny, p % nz];
        let kflat = [0, 1, 2].map(|a| (0..total).map(|p| k[a][idx(p)[a]]).collect());
        let mask = (0..total)
            .map(|p| {
                let [i, j, l] = idx(p);
                keep[0][i] && keep[1][j] && keep[2][l]
            })
            .collect();
        let neg = (0..total)
            .map(|p| {
                let [i, j, l] = idx(p);
                ((nx - i) % nx * ny + (ny - j) % ny) * nz + (nz - l) % nz
            })
            .collect();

        Ok(Self {
            inner: Arc::new(Inner {
                n,
                length,
                dealias_fraction,
                forward,
                inverse,
                scratch_len,
                k,
                kflat,
                mask,
                neg,
            }),
        })
    }

    /// Cubic `2π` box with `n` points per side and the 2/3 rule.
    pub fn cubic(n: usize) -> Result<Self> {
        Self::new([n; 3], [2.0 * PI; 3], 2.0 / 3.0)
    }

    pub fn n(&self) -> [usize; 3] {
        self.inner.n
    }

    pub fn length(&self) -> [f64; 3] {
        self.inner.length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.inner.dealias_fraction
    }

    pub fn len(&self) -> usize {
        let [nx, ny, nz] = self.inner.n;
        nx * ny * nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.inner.length[a] / self.inner.n[a] as f64)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.inner.length.iter().product()
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, ny, nz] = self.inner.n;
        (i * ny + j) * nz + k
    }

    #[inline]
    pub fn unflat(&self, p: usize) -> [usize; 3] {
        let [_, ny, nz] = self.inner.n;
        [p / (ny * nz), (p / nz) % ny, p % nz]
    }

    /// Physical coordinates of grid node `p`.
    #[inline]
    pub fn position(&self, p: usize) -> [f64; 3] {
        let idx = self.unflat(p);
        let h = self.spacing();
        [idx[0] as f64 * h[0], idx[1] as f64 * h[1], idx[2] as f64 * h[2]]
    }

    /// Sample `f(x, y, z)` at every node.
    pub fn sample<F: Fn(f64, f64, f64) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|p| {
                let [x, y, z] = self.position(p);
                f(x, y, z)
            })
            .collect()
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.k[axis]
    }

    /// Whether flat spectral index `p` survives dealiasing.
    #[inline]
    pub fn retained(&self, p: usize) -> bool {
        self.inner.mask[p]
    }

    fn fft3(&self, data: &mut [C64], inverse: bool) {
        let [nx, ny, nz] = self.inner.n;
        let plans = if inverse { &self.inner.inverse } else { &self.inner.forward };
        let mut scratch = vec![C64::default(); self.inner.scratch_len];

        plans[2].process_with_scratch(data, &mut scratch);

        let mut slab = vec![C64::default(); ny * nz];
        for i in 0..nx {
            let block = &mut data[i * ny * nz..(i + 1) * ny * nz];
            for j in 0..ny {
                for k in 0..nz {
                    slab[k * ny + j] = block[j * nz + k];
                }
            }
            plans[1].process_with_scratch(&mut slab, &mut scratch);
            for j in 0..ny {
                for k in 0..nz {
                    block[j * nz + k] = slab[k * ny + j];
                }
            }
        }

        let plane = ny * nz;
        let mut buf = vec![C64::default(); data.len()];
        for i in 0..nx {
            for jk in 0..plane {
                buf[jk * nx + i] = data[i * plane + jk];
            }
        }
        plans[0].process_with_scratch(&mut buf, &mut scratch);
        for i in 0..nx {
            for jk in 0..plane {
                data[i * plane + jk] = buf[jk * nx + i];
            }
        }

        if inverse {
            let s = 1.0 / data.len() as f64;
            data.iter_mut().for_each(|c| *c *= s);
        }
    }

    #[inline]
    fn negated(&self, p: usize) -> usize {
        self.inner.neg[p]
    }

    pub fn forward(&self, f: &[f64]) -> Vec<C64> {
        let mut data: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft3(&mut data, false);
        data
    }

    /// Two real transforms for the price of one complex transform.
    pub fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let mut z: Vec<C64> = f.iter().zip(g).map(|(&a, &b)| C64::new(a, b)).collect();
        self.fft3(&mut z, false);
        let mut fh = vec![C64::default(); z.len()];
        let mut gh = vec![C64::default(); z.len()];
        for p in 0..z.len() {
            let zc = z[self.negated(p)].conj();
            fh[p] = (z[p] + zc) * 0.5;
            gh[p] = (z[p] - zc) * C64::new(0.0, -0.5);
        }
        (fh, gh)
    }

    /// Inverse transform of a Hermitian spectrum; the imaginary residue is dropped.
    pub fn inverse(&self, fh: &[C64]) -> Vec<f64> {
        let mut data = fh.to_vec();
        self.fft3(&mut data, true);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn inverse_pair(&self, fh: &[C64], gh: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<C64> = fh.iter().zip(gh).map(|(&a, &b)| a + C64::new(-b.im, b.re)).collect();
        self.fft3(&mut z, true);
        z.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Forward transforms of many real fields, paired and run in parallel.
    pub fn forward_many(&self, fields: &[&[f64]]) -> Vec<Vec<C64>> {
        let pairs: Vec<Vec<Vec<C64>>> = fields
            .par_chunks(2)
            .map(|chunk| match chunk {
                [f, g] => {
                    let (a, b) = self.forward_pair(f, g);
                    vec![a, b]
                }
                [f] => vec![self.forward(f)],
                _ => unreachable!(),
            })
            .collect();
        pairs.into_iter().flatten().collect()
    }

    /// Inverse transforms of many Hermitian spectra, paired and run in parallel.
    pub fn inverse_many(&self, spectra: &[&[C64]]) -> Vec<Vec<f64>> {
        let pairs: Vec<Vec<Vec<f64>>> = spectra
            .par_chunks(2)
            .map(|chunk| match chunk {
                [f, g] => {
                    let (a, b) = self.inverse_pair(f, g);
                    vec![a, b]
                }
                [f] => vec![self.inverse(f)],
                _ => unreachable!(),
            })
            .collect();
        pairs.into_iter().flatten().collect()
    }

    /// `i k_axis f̂`.
    pub fn ik(&self, fh: &[C64], axis: usize) -> Vec<C64> {
        fh.iter()
            .zip(&self.inner.kflat[axis])
            .map(|(c, &kk)| C64::new(-kk * c.im, kk * c.re))
            .collect()
    }

    pub fn spectral_grad(&self, fh: &[C64]) -> [Vec<C64>; 3] {
        [0, 1, 2].map(|a| self.ik(fh, a))
    }

    pub fn spectral_curl(&self, vh: [&[C64]; 3]) -> [Vec<C64>; 3] {
        let len = vh[0].len();
        let mut out = [
            vec![C64::default(); len],
            vec![C64::default(); len],
            vec![C64::default(); len],
        ];
        let [kx, ky, kz] = &self.inner.kflat;
        let i = C64::new(0.0, 1.0);
        for p in 0..len {
            let (qx, qy, qz) = (kx[p], ky[p], kz[p]);
            out[0][p] = i * (vh[2][p] * qy - vh[1][p] * qz);
            out[1][p] = i * (vh[0][p] * qz - vh[2][p] * qx);
            out[2][p] = i * (vh[1][p] * qx - vh[0][p] * qy);
        }
        out
    }

    pub fn spectral_div(&self, vh: [&[C64]; 3]) -> Vec<C64> {
        let len = vh[0].len();
        let [kx, ky, kz] = &self.inner.kflat;
        let i = C64::new(0.0, 1.0);
        (0..len)
            .map(|p| i * (vh[0][p] * kx[p] + vh[1][p] * ky[p] + vh[2][p] * kz[p]))
            .collect()
    }

    /// Zero every mode outside the dealiasing cube, in place.
    pub fn dealias(&self, fh: &mut [C64]) {
        for (c, &keep) in fh.iter_mut().zip(&self.inner.mask) {
            if !keep {
                *c = C64::default();
            }
        }
    }

    /// Project a physical field onto the retained modes.
    pub fn band_limit(&self, f: &[f64]) -> Vec<f64> {
        let mut fh = self.forward(f);
        self.dealias(&mut fh);
        self.inverse(&fh)
    }

    /// Solve `∇²g = f` for the zero-mean `g` (the mean of `f` is ignored).
    pub fn inverse_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut fh = self.forward(f);
        let [n0, n1, n2] = self.inner.n;
        for p in 0..fh.len() {
            let [a, b, c] = self.unflat(p);
            // use the full wavenumber here, Nyquist included, so that Δ⁻¹Δ = 1
            let q2: f64 = [(a, n0, 0), (b, n1, 1), (c, n2, 2)]
                .iter()
                .map(|&(idx, na, ax)| {
                    let m = signed_mode(idx, na) as f64;
                    let kk = 2.0 * PI * m / self.inner.length[ax];
                    kk * kk
                })
                .sum();
            fh[p] = if q2 == 0.0 { C64::default() } else { -fh[p] / q2 };
        }
        self.inverse(&fh)
    }

    /// The potential `φ` whose discrete gradient carries exactly the
    /// divergence of `v`, so that `v − ∇φ` is solenoidal to round-off.
    pub fn gradient_potential(&self, v: &[Vec<f64>; 3]) -> Vec<f64> {
        let vh = self.forward_many(&[&v[0], &v[1], &v[2]]);
        let mut dh = self.spectral_div([&vh[0], &vh[1], &vh[2]]);
        let [kx, ky, kz] = &self.inner.kflat;
        for p in 0..dh.len() {
            let q2 = kx[p] * kx[p] + ky[p] * ky[p] + kz[p] * kz[p];
            dh[p] = if q2 == 0.0 { C64::default() } else { -dh[p] / q2 };
        }
        self.inverse(&dh)
    }

    // Physical-space convenience wrappers used by the diagnostics.

    pub fn grad(&self, f: &[f64]) -> [Vec<f64>; 3] {
        let fh = self.forward(f);
        let g = self.spectral_grad(&fh);
        let out = self.inverse_many(&[&g[0], &g[1], &g[2]]);
        let mut it = out.into_iter();
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }

    pub fn curl(&self, v: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
        let vh = self.forward_many(&[&v[0], &v[1], &v[2]]);
        let c = self.spectral_curl([&vh[0], &vh[1], &vh[2]]);
        let out = self.inverse_many(&[&c[0], &c[1], &c[2]]);
        let mut it = out.into_iter();
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }

    pub fn div(&self, v: &[Vec<f64>; 3]) -> Vec<f64> {
        let vh = self.forward_many(&[&v[0], &v[1], &v[2]]);
        let d = self.spectral_div([&vh[0], &vh[1], &vh[2]]);
        self.inverse(&d)
    }

    /// All nine first derivatives: `out[i][j] = ∂_i v_j`.
    pub fn jacobian(&self, v: &[Vec<f64>; 3]) -> [[Vec<f64>; 3]; 3] {
        let vh = self.forward_many(&[&v[0], &v[1], &v[2]]);
        let mut spectra = Vec::with_capacity(9);
        for i in 0..3 {
            for vj in &vh {
                spectra.push(self.ik(vj, i));
            }
        }
        let refs: Vec<&[C64]> = spectra.iter().map(|s| s.as_slice()).collect();
        let mut it = self.inverse_many(&refs).into_iter();
        let mut row = || [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        [row(), row(), row()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::cubic(16).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Grid::new([6, 16, 16], [1.0; 3], 2.0 / 3.0).is_err());
        assert!(Grid::new([16, 15, 16], [1.0; 3], 2.0 / 3.0).is_err());
        assert!(Grid::new([16; 3], [1.0, 0.0, 1.0], 2.0 / 3.0).is_err());
        assert!(Grid::new([16; 3], [1.0; 3], 0.0).is_err());
        assert!(Grid::new([16; 3], [1.0; 3], 1.0).is_ok());
    }

    #[test]
    fn paired_transforms_match_single() {
        let g = grid();
        let f = g.sample(|x, y, z| (x + 2.0 * y).sin() + (3.0 * z).cos() * x.cos());
        let h = g.sample(|x, y, z| (y - z).cos() * (2.0 * x).sin() + 0.3);
        let (fh, hh) = g.forward_pair(&f, &h);
        let fh1 = g.forward(&f);
        let hh1 = g.forward(&h);
        for p in 0..g.len() {
            assert!((fh[p] - fh1[p]).norm() < 1e-10);
            assert!((hh[p] - hh1[p]).norm() < 1e-10);
        }
        let (f2, h2) = g.inverse_pair(&fh, &hh);
        for p in 0..g.len() {
            assert!((f2[p] - f[p]).abs() < 1e-12);
            assert!((h2[p] - h[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_counts_under_two_thirds_rule() {
        let g = Grid::cubic(32).unwrap();
        let kept = (0..32).filter(|&i| g.retained(g.flat(i, 0, 0))).count();
        // |m| <= 10
        assert_eq!(kept, 21);
    }

    #[test]
    fn inverse_laplacian_inverts_mode() {
        let g = grid();
        let f = g.sample(|x, y, _| (2.0 * x).sin() * y.cos());
        let u = g.inverse_laplacian(&f);
        for p in 0..g.len() {
            assert!((u[p] + f[p] / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_potential_removes_divergence_exactly() {
        let g = grid();
        let v = [
            g.sample(|x, y, z| x.sin() * (y + z).cos() + (3.0 * x).cos()),
            g.sample(|x, y, _| (x * y.sin()).cos()),
            g.sample(|_, y, z| (y - 2.0 * z).sin() * z.cos()),
        ];
        let phi = g.gradient_potential(&v);
        let gp = g.grad(&phi);
        let w = [0, 1, 2].map(|a| v[a].iter().zip(&gp[a]).map(|(x, y)| x - y).collect::<Vec<_>>());
        assert!(g.div(&w).iter().all(|d| d.abs() < 1e-12));
    }
}
