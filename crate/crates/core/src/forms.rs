//! Rank-tagged fields on a [`Grid`].
//!
//! With the Euclidean metric a vector field, a one-form and a two-form all
//! carry three component arrays; they are kept as distinct types so that the
//! exterior-calculus operations only accept what they are defined on.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type Triple = [Vec<f64>; 3];

/// 0-form (advected scalar).
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

/// 3-form density `f d³x`.
#[derive(Debug, Clone)]
pub struct ThreeForm {
    grid: Grid,
    density: Vec<f64>,
}

macro_rules! scalar_like {
    ($ty:ident, $field:ident) => {
        impl $ty {
            pub fn new(grid: &Grid, $field: Vec<f64>) -> Result<Self> {
                if $field.len() != grid.len() {
                    return Err(Error::InvalidParameter(format!(
                        "{} has {} values, grid needs {}",
                        stringify!($ty),
                        $field.len(),
                        grid.len()
                    )));
                }
                Ok(Self {
                    grid: grid.clone(),
                    $field,
                })
            }

            pub(crate) fn from_raw(grid: &Grid, $field: Vec<f64>) -> Self {
                debug_assert_eq!($field.len(), grid.len());
                Self {
                    grid: grid.clone(),
                    $field,
                }
            }

            pub fn zeros(grid: &Grid) -> Self {
                Self::from_raw(grid, vec![0.0; grid.len()])
            }

            pub fn constant(grid: &Grid, value: f64) -> Self {
                Self::from_raw(grid, vec![value; grid.len()])
            }

            pub fn from_fn<F: Fn(f64, f64, f64) -> f64 + Sync>(grid: &Grid, f: F) -> Self {
                Self::from_raw(grid, grid.sample(f))
            }

            pub fn grid(&self) -> &Grid {
                &self.grid
            }

            pub fn $field(&self) -> &[f64] {
                &self.$field
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.$field
            }

            pub fn is_finite(&self) -> bool {
                self.$field.iter().all(|v| v.is_finite())
            }

            pub fn max_abs(&self) -> f64 {
                self.$field.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    };
}

scalar_like!(ScalarField, values);
scalar_like!(ThreeForm, density);

impl ScalarField {
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Reinterpret as a density (`f ↦ f d³x`).
    pub fn into_three_form(self) -> ThreeForm {
        ThreeForm {
            grid: self.grid,
            density: self.values,
        }
    }
}

impl ThreeForm {
    pub fn into_scalar(self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.density,
        }
    }
}

macro_rules! triple_like {
    ($ty:ident) => {
        #[derive(Debug, Clone)]
        pub struct $ty {
            grid: Grid,
            comps: Triple,
        }

        impl $ty {
            pub fn new(grid: &Grid, comps: Triple) -> Result<Self> {
                for (a, c) in comps.iter().enumerate() {
                    if c.len() != grid.len() {
                        return Err(Error::InvalidParameter(format!(
                            "{} component {a} has {} values, grid needs {}",
                            stringify!($ty),
                            c.len(),
                            grid.len()
                        )));
                    }
                }
                Ok(Self {
                    grid: grid.clone(),
                    comps,
                })
            }

            pub(crate) fn from_raw(grid: &Grid, comps: Triple) -> Self {
                Self {
                    grid: grid.clone(),
                    comps,
                }
            }

            pub fn zeros(grid: &Grid) -> Self {
                let z = vec![0.0; grid.len()];
                Self::from_raw(grid, [z.clone(), z.clone(), z])
            }

            pub fn constant(grid: &Grid, value: [f64; 3]) -> Self {
                Self::from_raw(grid, value.map(|v| vec![v; grid.len()]))
            }

            pub fn from_fn<F: Fn(f64, f64, f64) -> [f64; 3] + Sync>(grid: &Grid, f: F) -> Self {
                let comps = [0, 1, 2].map(|a| grid.sample(|x, y, z| f(x, y, z)[a]));
                Self::from_raw(grid, comps)
            }

            pub fn grid(&self) -> &Grid {
                &self.grid
            }

            pub fn comps(&self) -> &Triple {
                &self.comps
            }

            pub fn comps_mut(&mut self) -> &mut Triple {
                &mut self.comps
            }

            pub fn into_comps(self) -> Triple {
                self.comps
            }

            pub fn at(&self, p: usize) -> [f64; 3] {
                [self.comps[0][p], self.comps[1][p], self.comps[2][p]]
            }

            pub fn is_finite(&self) -> bool {
                self.comps.iter().flatten().all(|v| v.is_finite())
            }

            /// Largest pointwise Euclidean magnitude.
            pub fn max_norm(&self) -> f64 {
                (0..self.grid.len())
                    .map(|p| {
                        let v = self.at(p);
                        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
                    })
                    .fold(0.0, f64::max)
            }
        }
    };
}

triple_like!(VectorField);
triple_like!(OneForm);
triple_like!(TwoForm);

macro_rules! metric_conversion {
    ($from:ident => $to:ident, $name:ident) => {
        impl $from {
            /// Identity-metric reinterpretation of the component triple.
            pub fn $name(self) -> $to {
                $to {
                    grid: self.grid,
                    comps: self.comps,
                }
            }
        }
    };
}

metric_conversion!(VectorField => OneForm, into_one_form);
metric_conversion!(VectorField => TwoForm, into_two_form);
metric_conversion!(OneForm => VectorField, into_vector);
metric_conversion!(OneForm => TwoForm, into_two_form);
metric_conversion!(TwoForm => VectorField, into_vector);
metric_conversion!(TwoForm => OneForm, into_one_form);

/// A differential form of any rank.
#[derive(Debug, Clone)]
pub enum Form {
    Zero(ScalarField),
    One(OneForm),
    Two(TwoForm),
    Three(ThreeForm),
}

impl Form {
    pub fn rank(&self) -> usize {
        match self {
            Form::Zero(_) => 0,
            Form::One(_) => 1,
            Form::Two(_) => 2,
            Form::Three(_) => 3,
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Form::Zero(f) => f.grid(),
            Form::One(f) => f.grid(),
            Form::Two(f) => f.grid(),
            Form::Three(f) => f.grid(),
        }
    }

    /// Component arrays in a uniform shape (one array for ranks 0 and 3).
    pub fn arrays(&self) -> Vec<&[f64]> {
        match self {
            Form::Zero(f) => vec![f.values()],
            Form::Three(f) => vec![f.density()],
            Form::One(f) => f.comps().iter().map(|c| c.as_slice()).collect(),
            Form::Two(f) => f.comps().iter().map(|c| c.as_slice()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.arrays()
            .into_iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn ensure_same(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

// Pointwise helpers over raw component arrays.

pub(crate) fn dot(a: &Triple, b: &Triple) -> Vec<f64> {
    (0..a[0].len())
        .map(|p| a[0][p] * b[0][p] + a[1][p] * b[1][p] + a[2][p] * b[2][p])
        .collect()
}

pub(crate) fn cross(a: &Triple, b: &Triple) -> Triple {
    let n = a[0].len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for p in 0..n {
        out[0][p] = a[1][p] * b[2][p] - a[2][p] * b[1][p];
        out[1][p] = a[2][p] * b[0][p] - a[0][p] * b[2][p];
        out[2][p] = a[0][p] * b[1][p] - a[1][p] * b[0][p];
    }
    out
}

pub(crate) fn scale(s: &[f64], a: &Triple) -> Triple {
    [0, 1, 2].map(|c| a[c].iter().zip(s).map(|(x, y)| x * y).collect())
}

