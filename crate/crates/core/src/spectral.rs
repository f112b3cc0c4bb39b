//! Periodic grids, Fourier transforms and frequency cutoffs.
//!
//! The torus `[-X, X)^d` carries `N` samples per axis at `x_j = -X + j h`,
//! `h = 2X/N`. The forward transform is the Riemann sum
//! `(F u)(ξ_k) = Σ_j e^{-i x_j·ξ_k} u_j h^d` on the lattice `ξ_k = π k / X`,
//! and the inverse carries the matching `(2π)^{-d}` normalisation, so the
//! pair is exactly inverse on the grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    dim: usize,
    half_length: f64,
    points: usize,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct RawGrid {
    d: usize,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "N")]
    n: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        GridSpec::new(r.d, r.x, r.n)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid { d: g.dim, x: g.half_length, n: g.points }
    }
}

impl GridSpec {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return usage(format!("grid dimension {dim} not in 1..={MAX_DIM}"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return usage(format!("grid half-length {half_length} must be positive"));
        }
        if points < 8 || !points.is_power_of_two() {
            return usage(format!("points per axis {points} must be a power of two >= 8"));
        }
        Ok(Self { dim, half_length, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    pub fn frequency_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_length
    }

    /// Largest representable frequency magnitude per axis.
    pub fn nyquist(&self) -> f64 {
        self.frequency_spacing() * (self.points / 2) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Signed lattice index `k` in FFT order.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.points / 2 {
            i as i64
        } else {
            i as i64 - self.points as i64
        }
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.wavenumber(i) as f64 * self.frequency_spacing()
    }

    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    pub fn freq(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut xi = [0.0; MAX_DIM];
        for a in 0..self.dim {
            xi[a] = self.frequency(idx[a]);
        }
        xi
    }

    pub fn freq_norm(&self, flat: usize) -> f64 {
        norm(&self.freq(flat)[..self.dim])
    }

    /// Map a point of `R^d` to its representative in the torus.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = 2.0 * self.half_length;
        (x + self.half_length).rem_euclid(l) - self.half_length
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn check_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return usage(format!("grid mismatch: {a:?} vs {b:?}"));
    }
    Ok(())
}

macro_rules! grid_array {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            grid: GridSpec,
            values: Vec<Complex64>,
        }

        impl $name {
            pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
                if values.len() != grid.len() {
                    return usage(format!(
                        "expected {} samples, got {}",
                        grid.len(),
                        values.len()
                    ));
                }
                Ok(Self { grid, values })
            }

            pub fn zeros(grid: GridSpec) -> Self {
                Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
            }

            pub fn grid(&self) -> &GridSpec {
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

            pub fn scale(mut self, c: Complex64) -> Self {
                self.values.iter_mut().for_each(|v| *v *= c);
                self
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                check_grid(&self.grid, &other.grid)?;
                let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
                Ok(Self { grid: self.grid, values })
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                check_grid(&self.grid, &other.grid)?;
                let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
                Ok(Self { grid: self.grid, values })
            }

            pub fn max_abs(&self) -> f64 {
                self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
        }
    };
}

grid_array!(Field, "Real-space samples on a [`GridSpec`].");
grid_array!(Spectrum, "Frequency-lattice coefficients on a [`GridSpec`].");

impl Field {
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.dim()])).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Grid `L^p` norm with cell-volume weights; `p = ∞` is the sample max.
    pub fn norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, self.grid.cell_volume(), p)
    }
}

impl Spectrum {
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.freq(i)[..grid.dim()])).collect();
        Self { grid, values }
    }

    /// `‖F u‖₂` with the lattice weight `(π/X)^d`, so that Plancherel reads
    /// `‖u‖₂² = (2π)^{-d} ‖F u‖₂²`.
    pub fn l2_norm(&self) -> f64 {
        lp_norm(&self.values, self.grid.frequency_spacing().powi(self.grid.dim() as i32), 2.0)
    }
}

pub fn lp_norm(values: &[Complex64], weight: f64, p: f64) -> f64 {
    let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if p.is_infinite() {
        return max;
    }
    if max == 0.0 {
        return 0.0;
    }
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.norm() / max).sum()
    } else if p == 2.0 {
        values.iter().map(|v| v.norm_sqr() / (max * max)).sum()
    } else {
        values.iter().map(|v| (v.norm() / max).powf(p)).sum()
    };
    max * (sum * weight).powf(1.0 / p)
}

fn planner() -> &'static Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> {
    static PLANNER: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut guard = planner().lock().expect("fft planner poisoned");
    let (planner, cache) = &mut *guard;
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// Unnormalised FFT along every axis of a row-major `N^d` array.
pub(crate) fn fft_nd(values: &mut [Complex64], grid: &GridSpec, forward: bool) {
    for axis in 0..grid.dim() {
        fft_axis(values, grid, axis, |_, _| {}, forward);
    }
}

/// FFT along one axis. `pre(line_index, buffer)` may modulate each gathered
/// line before the transform; the line index enumerates the remaining axes.
pub(crate) fn fft_axis(
    values: &mut [Complex64],
    grid: &GridSpec,
    axis: usize,
    pre: impl Fn(usize, &mut [Complex64]),
    forward: bool,
) {
    let n = grid.points();
    let d = grid.dim();
    let fft = plan(n, forward);
    let stride = n.pow((d - 1 - axis) as u32);
    let lines = values.len() / n;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for line in 0..lines {
        let outer = line / stride;
        let inner = line % stride;
        let base = outer * n * stride + inner;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = values[base + j * stride];
        }
        pre(line, &mut buf);
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (j, b) in buf.iter().enumerate() {
            values[base + j * stride] = *b;
        }
    }
}

/// `(-1)^{Σ k_a}`: phase from the grid origin sitting at `-X`.
fn origin_phase(grid: &GridSpec, flat: usize) -> f64 {
    let idx = grid.unravel(flat);
    if idx[..grid.dim()].iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn forward_transform(f: &Field) -> Spectrum {
    let grid = *f.grid();
    let mut values = f.values().to_vec();
    fft_nd(&mut values, &grid, true);
    let h = grid.cell_volume();
    for (i, v) in values.iter_mut().enumerate() {
        *v *= h * origin_phase(&grid, i);
    }
    Spectrum { grid, values }
}

pub fn inverse_transform(s: &Spectrum) -> Field {
    let grid = *s.grid();
    let scale = 1.0 / grid.volume();
    let mut values: Vec<Complex64> = s
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * (scale * origin_phase(&grid, i)))
        .collect();
    fft_nd(&mut values, &grid, false);
    Field { grid, values }
}

pub fn apply_multiplier(s: &Spectrum, mult: impl Fn(&[f64]) -> Complex64) -> Spectrum {
    let grid = *s.grid();
    let values = s
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * mult(&grid.freq(i)[..grid.dim()]))
        .collect();
    Spectrum { grid, values }
}

pub fn apply_multiplier_values(s: &Spectrum, mult: &[Complex64]) -> Result<Spectrum> {
    if mult.len() != s.values().len() {
        return usage("multiplier length does not match the grid");
    }
    let values = s.values().iter().zip(mult).map(|(v, m)| v * m).collect();
    Ok(Spectrum { grid: *s.grid(), values })
}

fn g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`.
pub fn bump_eta(r: f64) -> f64 {
    if r <= 0.5 {
        return 1.0;
    }
    if r >= 1.0 {
        return 0.0;
    }
    let a = g(2.0 - 2.0 * r);
    let b = g(2.0 * r - 1.0);
    a / (a + b)
}

/// `ln(1 - η(r))`, accurate where `1 - η` underflows.
pub fn ln_one_minus_eta(r: f64) -> f64 {
    if r <= 0.5 {
        return f64::NEG_INFINITY;
    }
    if r >= 1.0 {
        return 0.0;
    }
    let la = -1.0 / (2.0 - 2.0 * r);
    let lb = -1.0 / (2.0 * r - 1.0);
    let hi = la.max(lb);
    lb - (hi + ((la - hi).exp() + (lb - hi).exp()).ln())
}

pub fn smooth_cutoff(xi: &[f64], lambda: f64) -> f64 {
    bump_eta(norm(xi) / lambda)
}

pub fn sharp_cutoff(xi: &[f64], lambda: f64) -> f64 {
    if xi.iter().all(|x| x.abs() <= lambda) {
        1.0
    } else {
        0.0
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return usage(format!("cutoff scale {lambda} must be positive"));
    }
    Ok(())
}

/// `P_λ f = F⁻¹(η(|ξ|/λ) F f)`.
pub fn project_smooth(f: &Field, lambda: f64) -> Result<Field> {
    check_lambda(lambda)?;
    let s = forward_transform(f);
    let s = apply_multiplier(&s, |xi| Complex64::new(smooth_cutoff(xi, lambda), 0.0));
    Ok(inverse_transform(&s))
}

/// `Q_λ f`: indicator of the cube `[-λ, λ]^d` in frequency.
pub fn project_sharp(f: &Field, lambda: f64) -> Result<Field> {
    check_lambda(lambda)?;
    let s = forward_transform(f);
    let s = apply_multiplier(&s, |xi| Complex64::new(sharp_cutoff(xi, lambda), 0.0));
    Ok(inverse_transform(&s))
}

/// Largest sample modulus on the seam cells (first and last index of any
/// axis) relative to the global maximum.
pub fn boundary_leakage(f: &Field) -> f64 {
    let grid = f.grid();
    let n = grid.points();
    let max = f.max_abs();
    if max == 0.0 {
        return 0.0;
    }
    let mut seam: f64 = 0.0;
    for (i, v) in f.values().iter().enumerate() {
        let idx = grid.unravel(i);
        if idx[..grid.dim()].iter().any(|&k| k == 0 || k == n - 1) {
            seam = seam.max(v.norm());
        }
    }
    seam / max
}

/// `‖F⁻¹χ₁‖_{L¹(R^d)}`, the uniform `L^p` bound of the smooth projectors.
///
/// Evaluated once per dimension on a reference grid where `χ₁` sits far
/// below the Nyquist frequency and the kernel has decayed at the seam.
pub fn projector_l1_constant(dim: usize) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache poisoned").get(&dim) {
        return Ok(*v);
    }
    let (n, ratio) = match dim {
        1 => (1 << 16, 32.0),
        2 => (1 << 10, 8.0),
        3 => (1 << 7, 4.0),
        _ => return usage(format!("dimension {dim} unsupported")),
    };
    let x = std::f64::consts::PI * n as f64 / (2.0 * ratio);
    let grid = GridSpec::new(dim, x, n)?;
    let s = Spectrum::from_fn(grid, |xi| Complex64::new(smooth_cutoff(xi, 1.0), 0.0));
    let value = inverse_transform(&s).norm(1.0);
    cache.lock().expect("cache poisoned").insert(dim, value);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1(x: f64, n: usize) -> GridSpec {
        GridSpec::new(1, x, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(GridSpec::new(0, 1.0, 16).is_err());
        assert!(GridSpec::new(4, 1.0, 16).is_err());
        assert!(GridSpec::new(1, -1.0, 16).is_err());
        assert!(GridSpec::new(1, 1.0, 12).is_err());
        assert!(GridSpec::new(1, 1.0, 4).is_err());
    }

    #[test]
    fn ravel_round_trips() {
        let g = GridSpec::new(3, 1.0, 8).unwrap();
        for i in [0, 7, 63, 100, 511] {
            assert_eq!(g.ravel(&g.unravel(i)), i);
        }
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let f = Field::zeros(grid1(5.0, 64));
        assert!(forward_transform(&f).values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn gaussian_transform() {
        let g = grid1(20.0, 1024);
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let s = forward_transform(&f);
        let err = (0..g.len())
            .map(|i| {
                let xi = g.frequency(i);
                (s.values()[i] - (2.0 * std::f64::consts::PI).sqrt() * (-xi * xi / 2.0).exp()).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn round_trip_2d() {
        let g = GridSpec::new(2, 3.0, 32).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new((x[0] * 1.3).sin() + x[1], x[0] * x[1]));
        let back = inverse_transform(&forward_transform(&f));
        assert!(back.sub(&f).unwrap().max_abs() < 1e-12 * f.max_abs());
    }

    #[test]
    fn eta_values() {
        assert_eq!(bump_eta(0.25), 1.0);
        assert_eq!(bump_eta(1.5), 0.0);
        assert_relative_eq!(bump_eta(0.75), 0.5, epsilon = 1e-15);
        for r in [0.6, 0.7, 0.8, 0.9, 0.99] {
            assert_relative_eq!(ln_one_minus_eta(r), (1.0 - bump_eta(r)).ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn sharp_projection_of_flat_spectrum() {
        let g = grid1(10.0, 256);
        let lambda = 2.0;
        let s = Spectrum::from_fn(g, |xi| {
            Complex64::new(if xi[0].abs() <= 2.0 * lambda { 1.0 } else { 0.0 }, 0.0)
        });
        let f = inverse_transform(&s);
        let rest = f.sub(&project_sharp(&f, lambda).unwrap()).unwrap();
        // 2λ/Δξ = 12.73..., so the flat band holds 25 modes and the cube 13.
        let expected = (12.0f64 / 25.0).sqrt();
        assert_relative_eq!(rest.norm(2.0) / f.norm(2.0), expected, max_relative = 1e-12);
    }

    #[test]
    fn projector_constant_is_scale_free() {
        let c = projector_l1_constant(1).unwrap();
        assert!(c > 1.0 && c < 2.0, "{c}");
    }
}
