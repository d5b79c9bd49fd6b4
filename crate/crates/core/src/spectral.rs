//! Fourier kernels on periodic grids: derivatives, the periodic Poisson
//! solve, and implicit diffusion.
//!
//! All operators act through a real-to-complex transform and a multiplier on
//! the half spectrum. For even lengths the Nyquist bin of odd-order derivatives
//! is dropped, which keeps the discrete first derivative skew-symmetric.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis as NdAxis};
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Transform plans for one periodic axis of `n` points and period `length`.
#[derive(Clone)]
pub struct Periodic1d {
    n: usize,
    length: f64,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for Periodic1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Periodic1d")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

/// Per-call scratch buffers. Never shared between calls.
struct Workspace {
    input: Vec<f64>,
    spectrum: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
}

impl Periodic1d {
    pub fn new(n: usize, length: f64) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            n,
            length,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn period(&self) -> f64 {
        self.length
    }

    /// Angular wavenumber of half-spectrum bin `m`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.length
    }

    fn is_nyquist(&self, m: usize) -> bool {
        self.n % 2 == 0 && m == self.n / 2
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            input: vec![0.0; self.n],
            spectrum: self.forward.make_output_vec(),
            scratch_fwd: self.forward.make_scratch_vec(),
            scratch_inv: self.inverse.make_scratch_vec(),
        }
    }

    /// Forward transform of `u` (unnormalized, `n/2 + 1` bins).
    pub fn spectrum(&self, u: ArrayView1<f64>) -> Vec<Complex64> {
        assert_eq!(u.len(), self.n, "grid function length mismatch");
        let mut ws = self.workspace();
        ws.input.iter_mut().zip(u.iter()).for_each(|(d, s)| *d = *s);
        self.forward
            .process_with_scratch(&mut ws.input, &mut ws.spectrum, &mut ws.scratch_fwd)
            .expect("forward transform buffers sized by the plan");
        ws.spectrum
    }

    /// Filters `line` in place. The transform input buffer is `line` itself.
    fn filter_line(&self, ws: &mut Workspace, line: &mut [f64], mult: &[Complex64]) {
        self.forward
            .process_with_scratch(line, &mut ws.spectrum, &mut ws.scratch_fwd)
            .expect("forward transform buffers sized by the plan");
        for (c, m) in ws.spectrum.iter_mut().zip(mult) {
            *c *= *m;
        }
        // The inverse real transform requires purely real DC (and Nyquist) bins.
        ws.spectrum[0].im = 0.0;
        if self.n % 2 == 0 {
            ws.spectrum[self.n / 2].im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut ws.spectrum, line, &mut ws.scratch_inv)
            .expect("inverse transform buffers sized by the plan");
    }

    fn filter_into(
        &self,
        ws: &mut Workspace,
        input: ArrayView1<f64>,
        mut output: ArrayViewMut1<f64>,
        mult: &[Complex64],
    ) {
        let mut line = std::mem::take(&mut ws.input);
        line.iter_mut().zip(input.iter()).for_each(|(d, s)| *d = *s);
        self.filter_line(ws, &mut line, mult);
        output.iter_mut().zip(line.iter()).for_each(|(d, s)| *d = *s);
        ws.input = line;
    }

    /// Half-spectrum multiplier with the inverse-transform normalization folded in.
    fn multiplier(&self, f: impl Fn(usize, f64) -> Complex64) -> Vec<Complex64> {
        let scale = 1.0 / self.n as f64;
        (0..self.n / 2 + 1)
            .map(|m| f(m, self.wavenumber(m)) * scale)
            .collect()
    }

    fn deriv_multiplier(&self, order: u32) -> Vec<Complex64> {
        self.multiplier(|m, k| {
            if order % 2 == 1 && self.is_nyquist(m) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        })
    }

    /// Applies a half-spectrum multiplier to every row of `a`.
    fn apply_rows(&self, a: ArrayView2<f64>, mult: &[Complex64]) -> Array2<f64> {
        assert_eq!(a.ncols(), self.n, "grid function length mismatch");
        let mut out = Array2::zeros(a.raw_dim());
        let mut ws = self.workspace();
        for (src, dst) in a.outer_iter().zip(out.outer_iter_mut()) {
            self.filter_into(&mut ws, src, dst, mult);
        }
        out
    }

    /// Applies a half-spectrum multiplier along the columns of `a` (axis 0).
    fn apply_columns(&self, a: ArrayView2<f64>, mult: &[Complex64]) -> Array2<f64> {
        assert_eq!(a.nrows(), self.n, "grid function length mismatch");
        let mut out = Array2::zeros(a.raw_dim());
        let mut ws = self.workspace();
        for (src, dst) in a
            .axis_iter(NdAxis(1))
            .zip(out.axis_iter_mut(NdAxis(1)))
        {
            self.filter_into(&mut ws, src, dst, mult);
        }
        out
    }

    fn apply(&self, u: ArrayView1<f64>, mult: &[Complex64]) -> Array1<f64> {
        let row = u.insert_axis(NdAxis(0));
        self.apply_rows(row, mult).remove_axis(NdAxis(0))
    }

    /// `d^order u / dx^order`, exact on every resolved Fourier mode.
    pub fn deriv(&self, u: ArrayView1<f64>, order: u32) -> Array1<f64> {
        self.apply(u, &self.deriv_multiplier(order))
    }

    /// Derivative of every row of `a`.
    pub fn deriv_rows(&self, a: ArrayView2<f64>, order: u32) -> Array2<f64> {
        self.apply_rows(a, &self.deriv_multiplier(order))
    }

    /// Derivative of every column of `a`.
    pub fn deriv_columns(&self, a: ArrayView2<f64>, order: u32) -> Array2<f64> {
        self.apply_columns(a, &self.deriv_multiplier(order))
    }

    /// Zero-mean solution of `-phi'' = g - mean(g)`.
    pub fn poisson(&self, g: ArrayView1<f64>) -> Array1<f64> {
        let mult = self.multiplier(|m, k| {
            if m == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / (k * k), 0.0)
            }
        });
        self.apply(g, &mult)
    }

    /// Zero-mean antiderivative `w` with `w' = g - mean(g)`.
    pub fn antiderivative(&self, g: ArrayView1<f64>) -> Array1<f64> {
        let mult = self.multiplier(|m, k| {
            if m == 0 || self.is_nyquist(m) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k)
            }
        });
        self.apply(g, &mult)
    }

    /// One backward-Euler step of `u_t = eps * u_xx`, i.e. `(I - tau*eps*d_xx)^{-1} u`.
    pub fn implicit_diffusion(&self, u: ArrayView1<f64>, eps: f64, tau: f64) -> Array1<f64> {
        if eps == 0.0 {
            return u.to_owned();
        }
        let mult = self.multiplier(|_, k| Complex64::new(1.0 / (1.0 + tau * eps * k * k), 0.0));
        self.apply(u, &mult)
    }

    /// `|u_hat(mode)| / n`; `None` when the mode is not resolved (`2 * mode >= n`).
    pub fn mode_amplitude(&self, u: ArrayView1<f64>, mode: usize) -> Option<f64> {
        if 2 * mode >= self.n {
            return None;
        }
        Some(self.spectrum(u)[mode].norm() / self.n as f64)
    }
}

/// Writes the transpose of the row-major `rows x cols` matrix `src` into `dst`.
fn transpose(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
    const BLOCK: usize = 16;
    for i0 in (0..rows).step_by(BLOCK) {
        for j0 in (0..cols).step_by(BLOCK) {
            for i in i0..(i0 + BLOCK).min(rows) {
                for j in j0..(j0 + BLOCK).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Direction of a velocity derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VAxis {
    V1,
    V2,
}

/// Fourier derivatives on the flattened `(v1, v2)` grid, applied line by line.
#[derive(Debug, Clone)]
pub struct VelocitySpectral {
    n1: usize,
    n2: usize,
    p1: Periodic1d,
    p2: Periodic1d,
    mult1: Vec<Complex64>,
    mult2: Vec<Complex64>,
}

impl VelocitySpectral {
    pub fn new(n1: usize, l1: f64, n2: usize, l2: f64) -> Self {
        let p1 = Periodic1d::new(n1, l1);
        let p2 = Periodic1d::new(n2, l2);
        Self {
            n1,
            n2,
            mult1: p1.deriv_multiplier(1),
            mult2: p2.deriv_multiplier(1),
            p1,
            p2,
        }
    }

    pub fn deriv(&self, u: ArrayView1<f64>, axis: VAxis) -> Array1<f64> {
        let row = u.insert_axis(NdAxis(0));
        self.deriv_rows(row, axis).remove_axis(NdAxis(0))
    }

    /// Partial derivative of every row of `a` (each row one velocity function).
    pub fn deriv_rows(&self, a: ArrayView2<f64>, axis: VAxis) -> Array2<f64> {
        let mut out = a.as_standard_layout().into_owned();
        self.deriv_rows_in_place(&mut out, axis);
        out
    }

    /// In-place form of [`Self::deriv_rows`]; `a` must be in standard layout.
    pub fn deriv_rows_in_place(&self, a: &mut Array2<f64>, axis: VAxis) {
        let (n1, n2) = (self.n1, self.n2);
        assert_eq!(a.ncols(), n1 * n2, "velocity function length mismatch");
        let data = a.as_slice_mut().expect("standard layout");
        match axis {
            VAxis::V2 => {
                let mut ws = self.p2.workspace();
                for line in data.chunks_exact_mut(n2) {
                    self.p2.filter_line(&mut ws, line, &self.mult2);
                }
            }
            VAxis::V1 => {
                // v1 lines are strided; transpose each row so they become contiguous.
                let mut ws = self.p1.workspace();
                let mut lines = vec![0.0; n1 * n2];
                for row in data.chunks_exact_mut(n1 * n2) {
                    transpose(row, &mut lines, n1, n2);
                    for line in lines.chunks_exact_mut(n1) {
                        self.p1.filter_line(&mut ws, line, &self.mult1);
                    }
                    transpose(&lines, row, n2, n1);
                }
            }
        }
    }
}
