//! Uniform periodic grid on `[-L, L)` with Fourier collocation, and complex
//! fields sampled on it.
//!
//! Quadrature is the periodic trapezoid rule `h * sum`. Derivatives are
//! spectral; the Nyquist wavenumber is set to zero so that odd and even
//! derivatives share one symbol and discrete integration by parts is exact.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 256;

struct GridInner {
    half_length: f64,
    n: usize,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Periodic grid. Cloning is cheap; clones share FFT plans.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.inner.half_length)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.half_length == other.inner.half_length)
    }
}

impl Grid {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half-length must be positive, got {half_length}"
            )));
        }
        if n < MIN_NODES || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "node count must be a power of two >= {MIN_NODES}, got {n}"
            )));
        }
        let dk = std::f64::consts::PI / half_length;
        let wavenumbers = (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else if j == n / 2 {
                    0.0
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                half_length,
                n,
                wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.inner.half_length
    }

    pub fn len(&self) -> usize {
        self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.inner.half_length / self.inner.n as f64
    }

    /// Node `x_j = -L + j h`.
    pub fn node(&self, j: usize) -> f64 {
        -self.inner.half_length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Wavenumbers in FFT order, Nyquist entry zeroed.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// Largest resolved wavenumber `pi / h`.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Signed mode index of FFT slot `j`.
    pub fn mode_index(&self, j: usize) -> i64 {
        let n = self.len();
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Modes kept by the 2/3 rule.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cutoff = self.len() as i64 / 3;
        (0..self.len())
            .map(|j| self.mode_index(j).abs() <= cutoff)
            .collect()
    }

    /// Unnormalized forward DFT in place. The coefficients refer to the
    /// grid origin at `x_0 = -L`; all operators here are diagonal so the
    /// offset never matters except in [`Grid::node`].
    pub fn forward(&self, data: &mut [Complex64]) {
        self.inner.forward.process(data);
    }

    /// Inverse DFT in place, normalized so that `inverse(forward(v)) = v`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inner.inverse.process(data);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Weight turning `sum_k a_k conj(b_k)` of DFT coefficients into `int a conj(b)`.
    pub fn parseval_weight(&self) -> f64 {
        2.0 * self.inner.half_length / (self.len() * self.len()) as f64
    }
}

/// A complex field on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self::from_values(grid, values))
    }

    pub(crate) fn from_values(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_values(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn from_fn<F: FnMut(f64) -> Complex64>(grid: &Grid, mut f: F) -> Result<Self> {
        Self::new(grid, grid.nodes().map(&mut f).collect())
    }

    /// Field from DFT coefficients.
    pub fn from_spectrum(grid: &Grid, mut spectrum: Vec<Complex64>) -> Self {
        grid.inverse(&mut spectrum);
        Self::from_values(grid, spectrum)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.is_finite())
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.values.clone();
        self.grid.forward(&mut s);
        s
    }

    fn apply_symbol<F: Fn(f64) -> Complex64>(&self, symbol: F) -> Field {
        let mut s = self.spectrum();
        for (z, &k) in s.iter_mut().zip(self.grid.wavenumbers()) {
            *z *= symbol(k);
        }
        Field::from_spectrum(&self.grid, s)
    }

    /// Spectral `d/dx`.
    pub fn derivative(&self) -> Field {
        self.apply_symbol(|k| Complex64::new(0.0, k))
    }

    /// Spectral `d^2/dx^2`.
    pub fn second_derivative(&self) -> Field {
        self.apply_symbol(|k| Complex64::new(-k * k, 0.0))
    }

    /// `v(x - shift)` by a spectral phase ramp; exact for band-limited data.
    pub fn shifted(&self, shift: f64) -> Field {
        self.apply_symbol(|k| Complex64::from_polar(1.0, -k * shift))
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field::from_values(&self.grid, self.values.iter().map(|z| z * c).collect())
    }

    pub fn scale_real(&self, c: f64) -> Field {
        self.scale(Complex64::new(c, 0.0))
    }

    /// `i v`.
    pub fn times_i(&self) -> Field {
        self.scale(Complex64::i())
    }

    /// `self + c * other`.
    ///
    /// # Panics
    /// If the fields live on different grids.
    pub fn add_scaled(&self, other: &Field, c: f64) -> Field {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        Field::from_values(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b * c)
                .collect(),
        )
    }

    /// `self - other`; panics on grid mismatch.
    pub fn sub(&self, other: &Field) -> Field {
        self.add_scaled(other, -1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn norm_h1(&self) -> f64 {
        let s = self.spectrum();
        let w = self.grid.parseval_weight();
        (w * s
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(z, k)| (1.0 + k * k) * z.norm_sqr())
            .sum::<f64>())
        .sqrt()
    }

    /// Largest DFT magnitude outside the 2/3 band relative to the largest overall.
    pub fn spectral_tail(&self) -> f64 {
        let s = self.spectrum();
        let mask = self.grid.dealias_mask();
        let peak = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let tail = s
            .iter()
            .zip(&mask)
            .filter(|(_, keep)| !**keep)
            .map(|(z, _)| z.norm())
            .fold(0.0, f64::max);
        tail / peak
    }
}

fn check_same(v: &Field, w: &Field) -> Result<()> {
    if v.grid == w.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Real `L^2` inner product `Re int v conj(w)`.
pub fn inner_l2(v: &Field, w: &Field) -> Result<f64> {
    check_same(v, w)?;
    Ok(dot_l2(v, w))
}

pub(crate) fn dot_l2(v: &Field, w: &Field) -> f64 {
    debug_assert!(v.grid == w.grid);
    v.grid.spacing()
        * v.values
            .iter()
            .zip(&w.values)
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
}

/// Real `H^1` inner product, computed in Fourier space with weight `1 + k^2`.
pub fn inner_h1(v: &Field, w: &Field) -> Result<f64> {
    check_same(v, w)?;
    let a = v.spectrum();
    let b = w.spectrum();
    Ok(v.grid.parseval_weight()
        * a.iter()
            .zip(&b)
            .zip(v.grid.wavenumbers())
            .map(|((x, y), k)| (1.0 + k * k) * (x * y.conj()).re)
            .sum::<f64>())
}
