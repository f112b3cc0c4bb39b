//! Evolution families `U(t,s) = F⁻¹ e^{-∫_s^t a(τ,·)dτ} F` for elliptic symbols.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{usage, Error, Result};
use crate::spectral::{
    apply_multiplier_values, forward_transform, inverse_transform, Field, GridSpec, Spectrum,
};
use crate::symbol::{certify, EllipticityCertificate, NonAutonomousSymbol, DEFAULT_DIRECTIONS};

/// A linear operator on grid fields, typically `U(t,s)` for fixed times.
pub trait FieldOperator: Send + Sync {
    fn apply(&self, f: &Field) -> Result<Field>;
}

/// Anything that produces evolution operators on a fixed grid.
pub trait Evolution: Sync {
    fn grid(&self) -> &GridSpec;
    fn horizon(&self) -> f64;
    /// Times at which the generator may jump; quadrature splits there.
    fn breakpoints(&self) -> Vec<f64>;
    fn step(&self, s: f64, t: f64) -> Result<Box<dyn FieldOperator + '_>>;
}

pub fn symbol_time_integral(sym: &NonAutonomousSymbol, s: f64, t: f64, xi: &[f64]) -> Result<Complex64> {
    let coeffs = sym.integrated_coefficients(s, t)?;
    if xi.len() != sym.dim() {
        return usage("frequency dimension mismatch");
    }
    Ok(sym.combine(&coeffs, xi))
}

#[derive(Clone, Debug)]
pub struct EllipticPropagator {
    sym: NonAutonomousSymbol,
    grid: GridSpec,
    cert: EllipticityCertificate,
}

struct Multiplier {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl FieldOperator for Multiplier {
    fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid {
            return usage("field grid does not match the propagator grid");
        }
        let s = apply_multiplier_values(&forward_transform(f), &self.values)?;
        Ok(inverse_transform(&s))
    }
}

struct Identity;

impl FieldOperator for Identity {
    fn apply(&self, f: &Field) -> Result<Field> {
        Ok(f.clone())
    }
}

impl EllipticPropagator {
    /// Certifies ellipticity on the default sphere lattice first.
    pub fn new(sym: NonAutonomousSymbol, grid: GridSpec) -> Result<Self> {
        let cert = certify(&sym, DEFAULT_DIRECTIONS)?;
        Self::with_certificate(sym, grid, cert)
    }

    pub fn with_certificate(sym: NonAutonomousSymbol, grid: GridSpec, cert: EllipticityCertificate) -> Result<Self> {
        if sym.dim() != grid.dim() {
            return usage(format!("symbol dimension {} vs grid dimension {}", sym.dim(), grid.dim()));
        }
        if !(cert.c > 0.0) {
            return Err(Error::NotElliptic { c: cert.c, directions: cert.directions });
        }
        Ok(Self { sym, grid, cert })
    }

    pub fn symbol(&self) -> &NonAutonomousSymbol {
        &self.sym
    }

    pub fn certificate(&self) -> &EllipticityCertificate {
        &self.cert
    }

    /// `∫_s^t a(τ, ξ_k) dτ` on the frequency lattice.
    pub fn exponent(&self, s: f64, t: f64) -> Result<Vec<Complex64>> {
        let coeffs = self.sym.integrated_coefficients(s, t)?;
        let d = self.grid.dim();
        Ok((0..self.grid.len()).map(|i| self.sym.combine(&coeffs, &self.grid.freq(i)[..d])).collect())
    }

    pub fn multiplier(&self, s: f64, t: f64) -> Result<Vec<Complex64>> {
        Ok(self.exponent(s, t)?.into_iter().map(|e| (-e).exp()).collect())
    }

    pub fn propagate(&self, s: f64, t: f64, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid {
            return usage("field grid does not match the propagator grid");
        }
        if s == t {
            self.sym.check_time(s)?;
            return Ok(f.clone());
        }
        let m = self.multiplier(s, t)?;
        Multiplier { grid: self.grid, values: m }.apply(f)
    }

    /// `p_{t,s} = F⁻¹ e^{-∫_s^t a}`.
    pub fn kernel(&self, s: f64, t: f64) -> Result<Field> {
        if s >= t {
            return usage(format!("kernel needs s < t, got s={s}, t={t}"));
        }
        let m = self.multiplier(s, t)?;
        Ok(inverse_transform(&Spectrum::new(self.grid, m)?))
    }
}

impl Evolution for EllipticPropagator {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn horizon(&self) -> f64 {
        self.sym.horizon()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.sym.breakpoints()
    }

    fn step(&self, s: f64, t: f64) -> Result<Box<dyn FieldOperator + '_>> {
        if s == t {
            self.sym.check_time(s)?;
            return Ok(Box::new(Identity));
        }
        Ok(Box::new(Multiplier { grid: self.grid, values: self.multiplier(s, t)? }))
    }
}

/// `∫_{R^d} e^{-a|z|^β} dz`.
pub fn radial_exp_integral(dim: usize, a: f64, beta: f64) -> f64 {
    let d = dim as f64;
    let sphere = 2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0);
    sphere * gamma(d / beta) / (beta * a.powf(d / beta))
}

/// `(C1, C2)` of the Gaussian kernel bound.
pub fn gaussian_constants(dim: usize, order: usize, c0: f64) -> (f64, f64) {
    let m = order as f64;
    let c1 = (2.0 * std::f64::consts::PI).powi(-(dim as i32)) * radial_exp_integral(dim, c0 / 2.0, m);
    let c2 = (2f64.powf(m - 1.0) - 1.0) / 2f64.powf(m);
    (c1, c2)
}

/// `M = C1 ∫ e^{-C2 |z|^{m/(m-1)}} dz`, so that `‖p_{t,s}‖₁ ≤ M e^{ω(t-s)}`.
pub fn kernel_l1_envelope(dim: usize, order: usize, c0: f64) -> f64 {
    let (c1, c2) = gaussian_constants(dim, order, c0);
    let m = order as f64;
    c1 * radial_exp_integral(dim, c2, m / (m - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundReport {
    pub s: f64,
    pub t: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub omega: f64,
    /// `max |p(x)| / (bound(x) + floor)`; the bound holds iff this is ≤ 1.
    pub max_ratio: f64,
    /// `max (|p(x)| - bound(x))`, negative when the bound holds with room.
    pub max_violation: f64,
    /// Roundoff floor of the inverse transform.
    pub noise_floor: f64,
    /// Largest decay constant `C` for which `|p| ≤ C1 (t-s)^{-d/m} e^{ω(t-s)} e^{-C z}`,
    /// `z = (|x|^m/(t-s))^{1/(m-1)}`, holds on every point resolved above the floor.
    pub admissible_c2: Option<f64>,
    pub kernel_l1: f64,
    /// `C1 e^{ω(t-s)} ∫ e^{-C2|z|^{m/(m-1)}} dz`.
    pub l1_bound: f64,
    pub leakage: f64,
}

impl GaussianBoundReport {
    pub fn holds(&self) -> bool {
        self.max_ratio <= 1.0 && self.kernel_l1 <= self.l1_bound
    }
}

pub fn verify_gaussian_bound(
    prop: &EllipticPropagator,
    s: f64,
    t: f64,
    c0: f64,
    omega: f64,
) -> Result<GaussianBoundReport> {
    let grid = *prop.grid();
    let (d, m) = (grid.dim(), prop.symbol().order());
    let (c1, c2) = gaussian_constants(d, m, c0);
    let mult = prop.multiplier(s, t)?;
    let kernel = prop.kernel(s, t)?;
    let dt = t - s;
    let mf = m as f64;
    let pref = c1 * dt.powf(-(d as f64) / mf) * (omega * dt).exp();
    let sum_abs: f64 = mult.iter().map(|v| v.norm()).sum();
    let noise_floor = 64.0 * f64::EPSILON * (grid.points() as f64).log2() * sum_abs / grid.volume();

    let mut max_ratio: f64 = 0.0;
    let mut max_violation = f64::NEG_INFINITY;
    let mut admissible_c2: Option<f64> = None;
    for (i, v) in kernel.values().iter().enumerate() {
        let x = crate::spectral::norm(&grid.point(i)[..d]);
        let z = (x.powf(mf) / dt).powf(1.0 / (mf - 1.0));
        let bound = pref * (-c2 * z).exp();
        let p = v.norm();
        max_ratio = max_ratio.max(p / (bound + noise_floor));
        max_violation = max_violation.max(p - bound);
        if z > 0.0 && p > 1e3 * noise_floor {
            let c = (pref.ln() - p.ln()) / z;
            admissible_c2 = Some(admissible_c2.map_or(c, |a| a.min(c)));
        }
    }
    let l1_bound = kernel_l1_envelope(d, m, c0) * (omega * dt).exp();
    Ok(GaussianBoundReport {
        s,
        t,
        c0,
        c1,
        c2,
        omega,
        max_ratio,
        max_violation,
        noise_floor,
        admissible_c2,
        kernel_l1: kernel.norm(1.0),
        l1_bound,
        leakage: crate::spectral::boundary_leakage(&kernel),
    })
}

/// Grid `L¹` norm of the kernel: a bound on `‖U(t,s)‖_{L^p → L^p}` for all p.
pub fn operator_norm_p(prop: &EllipticPropagator, s: f64, t: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return usage(format!("exponent p = {p} must be >= 1"));
    }
    Ok(prop.kernel(s, t)?.norm(1.0))
}

/// `max_k |m(t,s)m(s,r) − m(t,r)| / max_k |m(t,r)|` for `r ≤ s ≤ t`.
pub fn cocycle_residual(prop: &EllipticPropagator, r: f64, s: f64, t: f64) -> Result<f64> {
    if !(r <= s && s <= t) {
        return usage(format!("cocycle needs r <= s <= t, got ({r}, {s}, {t})"));
    }
    let (ts, sr, tr) = (prop.multiplier(s, t)?, prop.multiplier(r, s)?, prop.multiplier(r, t)?);
    let scale = tr.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = ts.iter().zip(&sr).zip(&tr).map(|((a, b), c)| (a * b - c).norm()).fold(0.0, f64::max);
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// `λ* = (2^{m+5} max{ω,0} / c)^{1/m}`.
pub fn dissipation_threshold(c: f64, omega: f64, order: usize) -> f64 {
    let m = order as f64;
    (2f64.powf(m + 5.0) * omega.max(0.0) / c).powf(1.0 / m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResidual {
    pub residual: f64,
    pub h: f64,
    /// Set when `t` is within `h` of a track breakpoint.
    pub one_sided: bool,
}

/// Relative residual of `∂_t U(t,s)f = -A(t) U(t,s)f` by second-order differences.
pub fn generator_consistency(
    prop: &EllipticPropagator,
    s: f64,
    t: f64,
    f: &Field,
    h: f64,
) -> Result<GeneratorResidual> {
    let sym = prop.symbol();
    let horizon = sym.horizon();
    if !(s < t && t < horizon) {
        return usage(format!("need s < t < T, got s={s}, t={t}, T={horizon}"));
    }
    if !(h > 0.0) {
        return usage("difference step must be positive");
    }
    let bps = sym.breakpoints();
    let crosses = |a: f64, b: f64| bps.iter().any(|&x| x > a && x < b);
    let at_break = bps.contains(&t);
    let centered = t - h >= s && t + h <= horizon && !at_break && !crosses(t - h, t + h);
    let forward = t + 2.0 * h <= horizon && !crosses(t, t + 2.0 * h);
    let backward = t - 2.0 * h >= s && !crosses(t - 2.0 * h, t) && !at_break;

    let spec = forward_transform(f);
    let grid = *prop.grid();
    let d = grid.dim();
    let m = |tau: f64| prop.multiplier(s, tau);
    let mt = m(t)?;
    let (deriv, one_sided): (Vec<Complex64>, bool) = if centered {
        let (a, b) = (m(t + h)?, m(t - h)?);
        (a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect(), false)
    } else if forward {
        let (a, b) = (m(t + h)?, m(t + 2.0 * h)?);
        (mt.iter().zip(a.iter().zip(&b)).map(|(x, (y, z))| (-3.0 * x + 4.0 * y - z) / (2.0 * h)).collect(), true)
    } else if backward {
        let (a, b) = (m(t - h)?, m(t - 2.0 * h)?);
        (mt.iter().zip(a.iter().zip(&b)).map(|(x, (y, z))| (3.0 * x - 4.0 * y + z) / (2.0 * h)).collect(), true)
    } else {
        return usage(format!("step h={h} does not resolve the track near t={t}"));
    };

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() {
        let a = sym.eval_unchecked(t, &grid.freq(i)[..d], false);
        let au = a * mt[i] * spec.values()[i];
        let r = deriv[i] * spec.values()[i] + au;
        num += r.norm_sqr();
        den += au.norm_sqr();
    }
    let residual = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    Ok(GeneratorResidual { residual, h, one_sided })
}
