//! Periodic-box spectral discretization of ℝ³.
//!
//! Position lattice x = h·m and frequency lattice k = Δk·m with
//! m ∈ {-N/2, ..., N/2-1}³, h = L/N, Δk = 2π/L. The transforms follow the
//! convention F(f)(k) = ∫ e^{-ik·x} f(x) dx and F̄(g)(x) = ∫ e^{ik·x} g(k) dk,
//! discretized with quadrature weights h³ and Δk³ respectively, so that
//! F̄(F(f)) = (2π)³ f holds exactly on the lattice.

use crate::error::{CoreError, Result};
use crate::fft::{centered_dft3, pairwise_sum_fn};
use num_complex::Complex64;

/// Geometry of the periodic discretization box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    box_length: f64,
}

impl GridSpec {
    /// Build a grid with `n_per_axis` points per axis on a box of side
    /// `box_length`. `n_per_axis` must be even and at least 8.
    pub fn new(n_per_axis: usize, box_length: f64) -> Result<Self> {
        if n_per_axis % 2 != 0 {
            return Err(CoreError::InvalidArgument(format!(
                "n_per_axis must be even, got {n_per_axis}"
            )));
        }
        if n_per_axis < 8 {
            return Err(CoreError::InvalidArgument(format!(
                "n_per_axis must be >= 8, got {n_per_axis}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        Ok(GridSpec {
            n: n_per_axis,
            box_length,
        })
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Position spacing h = L/N.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Frequency spacing Δk = 2π/L.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Total number of lattice sites N³.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight h³ of one position cell.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    /// Quadrature weight Δk³ of one frequency cell.
    pub fn freq_cell_volume(&self) -> f64 {
        let dk = self.freq_spacing();
        dk * dk * dk
    }

    /// Centered integer triple for a linear index (z fastest).
    #[inline]
    pub fn index_to_triple(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        let half = n as i64 / 2;
        [
            (idx / (n * n)) as i64 - half,
            ((idx / n) % n) as i64 - half,
            (idx % n) as i64 - half,
        ]
    }

    #[inline]
    pub fn triple_to_index(&self, m: [i64; 3]) -> usize {
        let n = self.n as i64;
        let half = n / 2;
        debug_assert!(m.iter().all(|&c| (-half..half).contains(&c)));
        (((m[0] + half) * n + (m[1] + half)) * n + (m[2] + half)) as usize
    }

    /// Position lattice point for a linear index.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.index_to_triple(idx);
        [m[0] as f64 * h, m[1] as f64 * h, m[2] as f64 * h]
    }

    /// Frequency lattice point for a linear index.
    #[inline]
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let dk = self.freq_spacing();
        let m = self.index_to_triple(idx);
        [m[0] as f64 * dk, m[1] as f64 * dk, m[2] as f64 * dk]
    }

    /// |k|² at a frequency lattice point.
    #[inline]
    pub fn freq_norm2(&self, idx: usize) -> f64 {
        let k = self.frequency(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// |m|² (integer shell label) at a lattice point.
    #[inline]
    pub fn triple_norm2(&self, idx: usize) -> i64 {
        let m = self.index_to_triple(idx);
        m[0] * m[0] + m[1] * m[1] + m[2] * m[2]
    }

    /// Linear index of the origin (m = 0).
    pub fn origin_index(&self) -> usize {
        self.triple_to_index([0, 0, 0])
    }

    /// Largest |k| representable on the lattice (corner of the centered cube).
    pub fn max_freq_norm(&self) -> f64 {
        let half = (self.n / 2) as f64;
        self.freq_spacing() * half * 3.0f64.sqrt()
    }
}

macro_rules! field_impl {
    ($name:ident) => {
        impl $name {
            pub fn zeros(grid: GridSpec) -> Self {
                $name {
                    grid,
                    samples: vec![Complex64::default(); grid.len()],
                }
            }

            pub fn from_samples(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
                if samples.len() != grid.len() {
                    return Err(CoreError::InvalidArgument(format!(
                        "sample count {} does not match grid size {}",
                        samples.len(),
                        grid.len()
                    )));
                }
                if samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(CoreError::InvalidArgument(
                        "field samples must be finite".into(),
                    ));
                }
                Ok($name { grid, samples })
            }

            pub fn grid(&self) -> GridSpec {
                self.grid
            }

            pub fn samples(&self) -> &[Complex64] {
                &self.samples
            }

            pub fn samples_mut(&mut self) -> &mut [Complex64] {
                &mut self.samples
            }

            pub fn scale(&mut self, a: Complex64) {
                for v in &mut self.samples {
                    *v *= a;
                }
            }

            /// self += a · other
            pub fn axpy(&mut self, a: Complex64, other: &$name) {
                debug_assert_eq!(self.grid, other.grid);
                for (v, w) in self.samples.iter_mut().zip(other.samples.iter()) {
                    *v += a * w;
                }
            }

            pub fn sub(&self, other: &$name) -> Result<$name> {
                if self.grid != other.grid {
                    return Err(CoreError::GridMismatch(
                        "field difference requires identical grids".into(),
                    ));
                }
                let samples = self
                    .samples
                    .iter()
                    .zip(other.samples.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                Ok($name {
                    grid: self.grid,
                    samples,
                })
            }
        }
    };
}

/// Complex samples on the position lattice.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: GridSpec,
    samples: Vec<Complex64>,
}

/// Complex samples on the frequency lattice.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: GridSpec,
    samples: Vec<Complex64>,
}

field_impl!(RealField);
field_impl!(SpectralField);

impl RealField {
    /// Sample a function of position on the lattice.
    pub fn from_fn<F: Fn([f64; 3]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        RealField { grid, samples }
    }

    /// ‖u‖_{L²} in the discrete inner product.
    pub fn norm_l2(&self) -> f64 {
        let w = self.grid.cell_volume();
        let s = pairwise_sum_fn(self.samples.len(), &|i| {
            Complex64::new(self.samples[i].norm_sqr(), 0.0)
        });
        (w * s.re).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_l2();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
    }
}

impl SpectralField {
    /// Sample a function of frequency on the lattice.
    pub fn from_fn<F: Fn([f64; 3]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.frequency(i))).collect();
        SpectralField { grid, samples }
    }
}

/// Construct the grid, rejecting invalid shapes.
pub fn make_grid(n_per_axis: usize, box_length: f64) -> Result<GridSpec> {
    GridSpec::new(n_per_axis, box_length)
}

/// Discrete F(f)(k_j) = h³ Σ_n e^{-i k_j·x_n} f(x_n).
pub fn forward_transform(f: &RealField) -> SpectralField {
    let grid = f.grid();
    let mut samples = f.samples().to_vec();
    centered_dft3(&mut samples, grid.n_per_axis(), false);
    let w = grid.cell_volume();
    for v in &mut samples {
        *v *= w;
    }
    SpectralField { grid, samples }
}

/// Discrete F̄(g)(x_n) = Δk³ Σ_j e^{+i k_j·x_n} g(k_j).
///
/// Satisfies bar_transform(forward_transform(f)) = (2π)³ f exactly.
pub fn bar_transform(g: &SpectralField) -> RealField {
    let grid = g.grid();
    let mut samples = g.samples().to_vec();
    centered_dft3(&mut samples, grid.n_per_axis(), true);
    let w = grid.freq_cell_volume();
    for v in &mut samples {
        *v *= w;
    }
    RealField { grid, samples }
}

/// L² pairing ⟨f, g⟩ = h³ Σ conj(f)·g.
pub fn inner_product(f: &RealField, g: &RealField) -> Result<Complex64> {
    if f.grid() != g.grid() {
        return Err(CoreError::GridMismatch(
            "inner product requires identical grids".into(),
        ));
    }
    let fs = f.samples();
    let gs = g.samples();
    let s = pairwise_sum_fn(fs.len(), &|i| fs[i].conj() * gs[i]);
    Ok(s * f.grid().cell_volume())
}

/// Spectral pairing (2π)⁻³ Δk³ Σ conj(f)·g (Parseval dual of `inner_product`).
pub fn inner_product_spectral(f: &SpectralField, g: &SpectralField) -> Result<Complex64> {
    if f.grid() != g.grid() {
        return Err(CoreError::GridMismatch(
            "inner product requires identical grids".into(),
        ));
    }
    let fs = f.samples();
    let gs = g.samples();
    let s = pairwise_sum_fn(fs.len(), &|i| fs[i].conj() * gs[i]);
    Ok(s * f.grid().freq_cell_volume() / (2.0 * std::f64::consts::PI).powi(3))
}

/// ‖u‖²_{Ḣ¹} = (2π)⁻³ Δk³ Σ |k|² |F(u)(k)|².
pub fn h1dot_seminorm(u: &RealField) -> f64 {
    let grid = u.grid();
    let hat = forward_transform(u);
    let hs = hat.samples();
    let s = pairwise_sum_fn(hs.len(), &|i| {
        Complex64::new(grid.freq_norm2(i) * hs[i].norm_sqr(), 0.0)
    });
    s.re * grid.freq_cell_volume() / (2.0 * std::f64::consts::PI).powi(3)
}

/// Frequency-domain quadrature Δk³ Σ g.
pub fn spectral_integral(g: &SpectralField) -> Complex64 {
    let gs = g.samples();
    pairwise_sum_fn(gs.len(), &|i| gs[i]) * g.grid().freq_cell_volume()
}

/// Spectral gradient component: F̄(i k_a F(u)) / (2π)³.
pub fn spectral_gradient(u: &RealField, axis: usize) -> RealField {
    let grid = u.grid();
    let mut hat = forward_transform(u);
    for (i, v) in hat.samples_mut().iter_mut().enumerate() {
        let k = grid.frequency(i)[axis];
        *v *= Complex64::new(0.0, k);
    }
    let mut out = bar_transform(&hat);
    let scale = 1.0 / (2.0 * std::f64::consts::PI).powi(3);
    out.scale(Complex64::new(scale, 0.0));
    out
}
