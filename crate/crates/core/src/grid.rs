//! Uniform periodic grids for the 1x2v phase space.
//!
//! Grid point `i` of an axis on `[lower, upper)` sits at `lower + i * h` with
//! `h = (upper - lower) / n`. Velocity functions are stored as flat vectors of
//! length `n_v1 * n_v2` in v1-major order: the value at `(i1, i2)` lives at
//! index `i1 * n_v2 + i2`, so lines of constant v1 are contiguous.

use ndarray::{Array1, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("n_x must be odd (got {0}); even grids lose the Nyquist mode in the spectral field solve")]
    EvenSpatialGrid(usize),
    #[error("{axis}: number of points must be positive")]
    EmptyAxis { axis: &'static str },
    #[error("{axis}: interval [{lower}, {upper}) is empty or not finite")]
    BadInterval {
        axis: &'static str,
        lower: f64,
        upper: f64,
    },
    #[error("grid with {entries} phase-space entries exceeds the materialization limit of {limit}")]
    TooLarge { entries: usize, limit: usize },
}

/// Upper bound on `n_x * n_v1 * n_v2` for anything that materializes the full tensor.
pub const FULL_TENSOR_LIMIT: usize = 1 << 24;

/// One uniform periodic axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Axis {
    fn new(axis: &'static str, n: usize, lower: f64, upper: f64) -> Result<Self, GridError> {
        if n == 0 {
            return Err(GridError::EmptyAxis { axis });
        }
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(GridError::BadInterval { axis, lower, upper });
        }
        Ok(Self { n, lower, upper })
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn h(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.h()
    }

    pub fn points(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n).map(|i| self.point(i)))
    }

    /// Index of the grid point closest to `value`.
    pub fn nearest_index(&self, value: f64) -> usize {
        let idx = ((value - self.lower) / self.h()).round();
        idx.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x: Axis,
    pub v1: Axis,
    pub v2: Axis,
}

impl GridSpec {
    /// Builds the grid on `[0, x_length) x v1_domain x v2_domain`. Fails on even `n_x`.
    pub fn new(
        n_x: usize,
        n_v1: usize,
        n_v2: usize,
        x_length: f64,
        v1_domain: (f64, f64),
        v2_domain: (f64, f64),
    ) -> Result<Self, GridError> {
        let x = Axis::new("x", n_x, 0.0, x_length)?;
        if n_x % 2 == 0 {
            return Err(GridError::EvenSpatialGrid(n_x));
        }
        let v1 = Axis::new("v1", n_v1, v1_domain.0, v1_domain.1)?;
        let v2 = Axis::new("v2", n_v2, v2_domain.0, v2_domain.1)?;
        Ok(Self { x, v1, v2 })
    }

    pub fn n_x(&self) -> usize {
        self.x.n
    }

    /// Number of velocity points, `n_v1 * n_v2`.
    pub fn n_v(&self) -> usize {
        self.v1.n * self.v2.n
    }

    pub fn h_x(&self) -> f64 {
        self.x.h()
    }

    /// Quadrature weight of one velocity cell.
    pub fn h_v(&self) -> f64 {
        self.v1.h() * self.v2.h()
    }

    pub fn full_tensor_entries(&self) -> usize {
        self.n_x() * self.n_v()
    }

    pub fn check_materializable(&self) -> Result<(), GridError> {
        let entries = self.full_tensor_entries();
        if entries > FULL_TENSOR_LIMIT {
            return Err(GridError::TooLarge {
                entries,
                limit: FULL_TENSOR_LIMIT,
            });
        }
        Ok(())
    }

    /// v1 coordinate of every point of the flattened velocity grid.
    pub fn v1_coords(&self) -> Array1<f64> {
        let n2 = self.v2.n;
        Array1::from_iter((0..self.n_v()).map(|idx| self.v1.point(idx / n2)))
    }

    /// v2 coordinate of every point of the flattened velocity grid.
    pub fn v2_coords(&self) -> Array1<f64> {
        let n2 = self.v2.n;
        Array1::from_iter((0..self.n_v()).map(|idx| self.v2.point(idx % n2)))
    }

    /// Samples `f(v1, v2)` on the flattened velocity grid.
    pub fn sample_v(&self, f: impl Fn(f64, f64) -> f64) -> Array1<f64> {
        let n2 = self.v2.n;
        Array1::from_iter(
            (0..self.n_v()).map(|idx| f(self.v1.point(idx / n2), self.v2.point(idx % n2))),
        )
    }

    pub fn sample_x(&self, f: impl Fn(f64) -> f64) -> Array1<f64> {
        self.x.points().mapv(f)
    }

    /// Rectangle rule on the spatial grid.
    pub fn quad_x(&self, u: ArrayView1<f64>) -> f64 {
        debug_assert_eq!(u.len(), self.n_x());
        self.h_x() * u.sum()
    }

    /// Rectangle rule on the velocity grid.
    pub fn quad_v(&self, u: ArrayView1<f64>) -> f64 {
        debug_assert_eq!(u.len(), self.n_v());
        self.h_v() * u.sum()
    }

    /// Spatial average `(1/L) * quad_x(u)`.
    pub fn mean_x(&self, u: ArrayView1<f64>) -> f64 {
        u.sum() / u.len() as f64
    }
}
