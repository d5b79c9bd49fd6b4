//! A grid bundled with its transform plans and cached velocity coordinates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::grid::GridSpec;
use crate::spectral::{Periodic1d, VAxis, VelocitySpectral};

#[derive(Debug, Clone)]
pub struct PhaseSpace {
    grid: GridSpec,
    x: Periodic1d,
    v: VelocitySpectral,
    v1: Array1<f64>,
    v2: Array1<f64>,
}

impl PhaseSpace {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            x: Periodic1d::new(grid.x.n, grid.x.length()),
            v: VelocitySpectral::new(grid.v1.n, grid.v1.length(), grid.v2.n, grid.v2.length()),
            v1: grid.v1_coords(),
            v2: grid.v2_coords(),
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn x_transform(&self) -> &Periodic1d {
        &self.x
    }

    /// v1 at every point of the flattened velocity grid.
    pub fn v1(&self) -> &Array1<f64> {
        &self.v1
    }

    /// v2 at every point of the flattened velocity grid.
    pub fn v2(&self) -> &Array1<f64> {
        &self.v2
    }

    pub fn quad_x(&self, u: ArrayView1<f64>) -> f64 {
        self.grid.quad_x(u)
    }

    pub fn quad_v(&self, u: ArrayView1<f64>) -> f64 {
        self.grid.quad_v(u)
    }

    pub fn spectral_deriv_x(&self, u: ArrayView1<f64>, order: u32) -> Array1<f64> {
        self.x.deriv(u, order)
    }

    pub fn spectral_deriv_x_rows(&self, a: ArrayView2<f64>, order: u32) -> Array2<f64> {
        self.x.deriv_rows(a, order)
    }

    pub fn spectral_deriv_v(&self, u: ArrayView1<f64>, axis: VAxis) -> Array1<f64> {
        self.v.deriv(u, axis)
    }

    pub fn spectral_deriv_v_rows(&self, a: ArrayView2<f64>, axis: VAxis) -> Array2<f64> {
        self.v.deriv_rows(a, axis)
    }

    pub fn spectral_deriv_v_rows_in_place(&self, a: &mut Array2<f64>, axis: VAxis) {
        self.v.deriv_rows_in_place(a, axis)
    }

    pub fn poisson_solve_periodic(&self, g: ArrayView1<f64>) -> Array1<f64> {
        self.x.poisson(g)
    }

    pub fn implicit_diffusion_step(&self, u: ArrayView1<f64>, eps: f64, tau: f64) -> Array1<f64> {
        self.x.implicit_diffusion(u, eps, tau)
    }
}
