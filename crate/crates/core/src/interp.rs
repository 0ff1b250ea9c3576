//! Periodic tricubic interpolation.
//!
//! Each axis uses the cubic Hermite basis on the cell containing the point,
//! with nodal derivatives taken spectrally. The tensor product needs the
//! value and the seven mixed derivatives `∂x ∂y ∂z ∂xy ∂xz ∂yz ∂xyz` at the
//! eight cell corners; these are computed once per field by an
//! [`Interpolant`]. A [`Stencil`] holds the position-dependent weights and
//! can be applied to any number of interpolants.

use crate::forms::{ScalarField, VectorField};
use crate::grid::{Grid, C64};

/// Value and mixed derivatives of one scalar field; slot `m` holds the
/// derivative with respect to axis `a` whenever bit `a` of `m` is set.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Grid,
    data: [Vec<f64>; 8],
}

impl Interpolant {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        Self::from_parts(grid, values, &grid.forward(values))
    }

    /// Build from nodal values together with their spectrum `fh`.
    pub fn from_parts(grid: &Grid, values: &[f64], fh: &[C64]) -> Self {
        let mut spectra: Vec<Vec<C64>> = Vec::with_capacity(7);
        for m in 1..8usize {
            let mut s = fh.to_vec();
            for a in 0..3 {
                if m & (1 << a) != 0 {
                    s = grid.ik(&s, a);
                }
            }
            spectra.push(s);
        }
        let refs: Vec<&[C64]> = spectra.iter().map(|s| s.as_slice()).collect();
        let mut derived = grid.inverse_many(&refs).into_iter();
        let data = std::array::from_fn(|m| {
            if m == 0 {
                values.to_vec()
            } else {
                derived.next().unwrap()
            }
        });
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn of_scalar(field: &ScalarField) -> Self {
        Self::new(field.grid(), field.values())
    }

    pub fn of_vector(field: &VectorField) -> [Self; 3] {
        let c = field.comps();
        [0, 1, 2].map(|a| Self::new(field.grid(), &c[a]))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, position: [f64; 3]) -> f64 {
        Stencil::new(&self.grid, position).apply(self)
    }
}

#[derive(Debug, Clone)]
pub struct Stencil {
    /// Corner offsets per axis with strides folded in.
    idx: [[usize; 2]; 3],
    /// `w[a][corner][order]` for the value (order 0) and derivative (order 1).
    w: [[[f64; 2]; 2]; 3],
    /// Spatial derivatives of `w`.
    dw: [[[f64; 2]; 2]; 3],
}

impl Stencil {
    pub fn new(grid: &Grid, position: [f64; 3]) -> Self {
        let n = grid.n();
        let h = grid.spacing();
        let len = grid.length();
        let stride = [n[1] * n[2], n[2], 1];
        let mut idx = [[0; 2]; 3];
        let mut w = [[[0.0; 2]; 2]; 3];
        let mut dw = [[[0.0; 2]; 2]; 3];
        for a in 0..3 {
            let x = position[a].rem_euclid(len[a]) / h[a];
            let base = x.floor();
            let s = x - base;
            let i0 = (base as usize) % n[a];
            idx[a] = [i0 * stride[a], ((i0 + 1) % n[a]) * stride[a]];
            let (s2, s3) = (s * s, s * s * s);
            w[a] = [
                [2.0 * s3 - 3.0 * s2 + 1.0, (s3 - 2.0 * s2 + s) * h[a]],
                [-2.0 * s3 + 3.0 * s2, (s3 - s2) * h[a]],
            ];
            dw[a] = [
                [(6.0 * s2 - 6.0 * s) / h[a], 3.0 * s2 - 4.0 * s + 1.0],
                [(-6.0 * s2 + 6.0 * s) / h[a], 3.0 * s2 - 2.0 * s],
            ];
        }
        Self { idx, w, dw }
    }

    pub fn apply(&self, f: &Interpolant) -> f64 {
        let mut acc = 0.0;
        for cx in 0..2 {
            for cy in 0..2 {
                for cz in 0..2 {
                    let p = self.idx[0][cx] + self.idx[1][cy] + self.idx[2][cz];
                    for (m, d) in f.data.iter().enumerate() {
                        let wt = self.w[0][cx][m & 1]
                            * self.w[1][cy][(m >> 1) & 1]
                            * self.w[2][cz][(m >> 2) & 1];
                        acc += wt * d[p];
                    }
                }
            }
        }
        acc
    }

    /// Value and gradient of the interpolating polynomial.
    pub fn apply_with_gradient(&self, f: &Interpolant) -> (f64, [f64; 3]) {
        let (mut v, mut g) = (0.0, [0.0; 3]);
        for cx in 0..2 {
            for cy in 0..2 {
                for cz in 0..2 {
                    let p = self.idx[0][cx] + self.idx[1][cy] + self.idx[2][cz];
                    for (m, d) in f.data.iter().enumerate() {
                        let o = [m & 1, (m >> 1) & 1, (m >> 2) & 1];
                        let w = [self.w[0][cx][o[0]], self.w[1][cy][o[1]], self.w[2][cz][o[2]]];
                        let dw = [self.dw[0][cx][o[0]], self.dw[1][cy][o[1]], self.dw[2][cz][o[2]]];
                        let dp = d[p];
                        v += w[0] * w[1] * w[2] * dp;
                        g[0] += dw[0] * w[1] * w[2] * dp;
                        g[1] += w[0] * dw[1] * w[2] * dp;
                        g[2] += w[0] * w[1] * dw[2] * dp;
                    }
                }
            }
        }
        (v, g)
    }
}

pub fn interpolate_scalar(field: &ScalarField, positions: &[[f64; 3]]) -> Vec<f64> {
    let f = Interpolant::of_scalar(field);
    positions.iter().map(|&x| f.eval(x)).collect()
}

pub fn interpolate_vector(field: &VectorField, positions: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let f = Interpolant::of_vector(field);
    positions
        .iter()
        .map(|&x| {
            let s = Stencil::new(field.grid(), x);
            [s.apply(&f[0]), s.apply(&f[1]), s.apply(&f[2])]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_is_reproduced() {
        let g = Grid::cubic(16).unwrap();
        let f = ScalarField::constant(&g, 2.5);
        let v = interpolate_scalar(&f, &[[0.1, 3.3, -7.0], [100.0, 0.0, 2.0]]);
        assert!(v.iter().all(|x| (x - 2.5).abs() < 1e-13));
    }

    #[test]
    fn sine_at_third_pi() {
        let g = Grid::cubic(32).unwrap();
        let f = ScalarField::from_fn(&g, |x, _, _| x.sin());
        let v = interpolate_scalar(&f, &[[PI / 3.0, 1.0, 2.0]])[0];
        assert!((v - 0.866_025_403_784_438_6).abs() < 1e-5);
    }

    #[test]
    fn nodes_are_exact() {
        let g = Grid::cubic(16).unwrap();
        let f = ScalarField::from_fn(&g, |x, y, z| (x + y).sin() * (2.0 * z).cos() + y.cos());
        let pos: Vec<[f64; 3]> = (0..g.len()).step_by(37).map(|p| g.position(p)).collect();
        let v = interpolate_scalar(&f, &pos);
        for (k, p) in (0..g.len()).step_by(37).enumerate() {
            assert!((v[k] - f.values()[p]).abs() < 1e-13);
        }
    }

    #[test]
    fn wraps_periodically() {
        let g = Grid::cubic(16).unwrap();
        let f = ScalarField::from_fn(&g, |x, y, z| (x - y).sin() + z.cos());
        let a = interpolate_scalar(&f, &[[0.3, 0.4, 0.5]])[0];
        let b = interpolate_scalar(&f, &[[0.3 + 2.0 * PI, 0.4 - 4.0 * PI, 0.5 + 6.0 * PI]])[0];
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn vector_matches_components() {
        let g = Grid::cubic(16).unwrap();
        let v = VectorField::from_fn(&g, |x, y, z| [x.sin(), y.cos() * z.sin(), (x + z).cos()]);
        let x = [[1.1, 2.2, 3.3]];
        let got = interpolate_vector(&v, &x)[0];
        for a in 0..3 {
            let s = ScalarField::new(&g, v.comps()[a].clone()).unwrap();
            assert_eq!(got[a], interpolate_scalar(&s, &x)[0]);
        }
    }

    #[test]
    fn gradient_of_interpolant() {
        let g = Grid::cubic(32).unwrap();
        let f = ScalarField::from_fn(&g, |x, y, z| x.sin() * y.cos() + (2.0 * z).sin());
        let it = Interpolant::of_scalar(&f);
        let x = [0.77, 2.9, 4.1];
        let (v, gr) = Stencil::new(&g, x).apply_with_gradient(&it);
        assert_eq!(v, it.eval(x));
        let want = [
            x[0].cos() * x[1].cos(),
            -x[0].sin() * x[1].sin(),
            2.0 * (2.0 * x[2]).cos(),
        ];
        for a in 0..3 {
            assert!((gr[a] - want[a]).abs() < 1e-3, "{a}: {} vs {}", gr[a], want[a]);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let g = Grid::cubic(n).unwrap();
            let f = ScalarField::from_fn(&g, |x, y, _| x.sin() * y.cos());
            let pos: Vec<[f64; 3]> = (0..200)
                .map(|m| {
                    let t = m as f64 * 0.0317;
                    [1.0 + t, 2.0 - 0.7 * t, 0.5]
                })
                .collect();
            interpolate_scalar(&f, &pos)
                .iter()
                .zip(&pos)
                .map(|(v, x)| (v - x[0].sin() * x[1].cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(16) / err(32);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }
}
