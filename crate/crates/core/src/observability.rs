//! Interpolation arithmetic, explicit observability constants, Lebesgue
//! chains, and empirical estimation of the uncertainty and dissipation
//! constants for concrete evolution families.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::evolution::{dissipation_threshold, EllipticPropagator, Evolution};
use crate::quad::composite_rule;
use crate::report::ext;
use crate::spectral::{
    forward_transform, inverse_transform, ln_one_minus_eta, project_sharp, Field, GridSpec, Spectrum, MAX_DIM,
};
use crate::symbol::garding_lower_bound;
use crate::thickness::{is_uniformly_thick, restrict, ObservationSet, SetFamily, ThicknessDecision};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub d0: f64,
    pub d1: f64,
    pub gamma1: f64,
    pub d2: f64,
    pub d3: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// `M` of `‖U(t,s)‖ ≤ M e^{ω(t-s)}`.
    #[serde(rename = "M")]
    pub growth: f64,
    pub omega: f64,
    /// `sup_t ‖C(t)‖`.
    pub c_norm: f64,
    pub theta: f64,
}

impl HypothesisConstants {
    pub fn validate(&self) -> Result<()> {
        let h = self;
        let checks = [
            (h.d0 >= 0.0 && h.d0.is_finite(), "d0 >= 0"),
            (h.d1 > 0.0 && h.d1.is_finite(), "d1 > 0"),
            (h.gamma1 > 0.0, "gamma1 > 0"),
            (h.d2 >= 1.0 && h.d2.is_finite(), "d2 >= 1"),
            (h.d3 > 0.0 && h.d3.is_finite(), "d3 > 0"),
            (h.gamma2 > h.gamma1 && h.gamma2.is_finite(), "gamma2 > gamma1"),
            (h.gamma3 > 0.0 && h.gamma3.is_finite(), "gamma3 > 0"),
            (h.growth >= 1.0 && h.growth.is_finite(), "M >= 1"),
            (h.omega.is_finite(), "omega finite"),
            (h.c_norm >= 0.0 && h.c_norm.is_finite(), "|C| >= 0"),
            (h.theta > 0.0 && h.theta < 1.0, "theta in (0, 1)"),
        ];
        match checks.iter().find(|c| !c.0) {
            Some((_, what)) => usage(format!("hypothesis constants violate {what}: {self:?}")),
            None => Ok(()),
        }
    }

    /// `γ₁γ₃/(γ₂−γ₁)`, the blow-up exponent in `1/(t-s)`.
    pub fn kappa(&self) -> f64 {
        self.gamma1 * self.gamma3 / (self.gamma2 - self.gamma1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationBound {
    pub bound: f64,
    /// Minimiser of `ε^{-θ/(1-θ)}G + εF₁`; absent when `F₁ = 0` or `G = 0`.
    pub epsilon0: Option<f64>,
    pub holds: bool,
}

/// `max{C/(θ^θ(1−θ)^{1−θ}), D(θ/(1−θ))^{1−θ}} F₁^θ G^{1−θ}`.
pub fn interpolation_combine(f1: f64, f2: f64, g: f64, d: f64, c: f64, theta: f64) -> Result<InterpolationBound> {
    if !(theta > 0.0 && theta < 1.0) {
        return usage(format!("theta = {theta} must lie in (0, 1)"));
    }
    if [f1, f2, g, d, c].iter().any(|v| !(*v >= 0.0)) {
        return usage("interpolation inputs must be nonnegative");
    }
    let k = (c / (theta.powf(theta) * (1.0 - theta).powf(1.0 - theta))).max(d * (theta / (1.0 - theta)).powf(1.0 - theta));
    let bound = if f1 == 0.0 || g == 0.0 { 0.0 } else { k * f1.powf(theta) * g.powf(1.0 - theta) };
    let epsilon0 = (f1 > 0.0 && g > 0.0).then(|| (theta * g / ((1.0 - theta) * f1)).powf(1.0 - theta));
    Ok(InterpolationBound { bound, epsilon0, holds: f2 <= bound })
}

/// `(C̃₁, C̃₂, C̃₃)` of the interpolation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

pub fn interpolation_constants(hc: &HypothesisConstants) -> Result<InterpolationConstants> {
    hc.validate()?;
    let th = hc.theta;
    let c1 = hc.growth * hc.d0.max((1.0 + hc.d0 * hc.c_norm) * hc.d2) / (th.powf(th) * (1.0 - th).powf(1.0 - th));
    let (g1, g2) = (hc.gamma1, hc.gamma2);
    let c2 = (hc.d1 * g1 / (th * hc.d3 * g2)).powf(g1 / (g2 - g1)) * hc.d1 * (1.0 - g1 / g2);
    Ok(InterpolationConstants { c1, c2, c3: hc.omega.max(0.0) })
}

/// The observability constant for `E = [0, T]` together with its parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CobsExplicit {
    pub q: f64,
    pub kappa: f64,
    /// `ln C₁`; `C₁` itself overflows for moderately large constants.
    pub ln_c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub ln_value: f64,
    #[serde(with = "ext")]
    pub value: f64,
}

/// `q` and `1 − q` for the chain ratio `((a+θ)/(a+1))^{1/κ}`, `a = 6^κ C̃₂/(1−θ)`.
fn chain_ratio(hc: &HypothesisConstants, c2t: f64) -> (f64, f64, f64) {
    let kappa = hc.kappa();
    let th = hc.theta;
    let a = 6f64.powf(kappa) * c2t / (1.0 - th);
    let ln_q = (-(1.0 - th) / (a + 1.0)).ln_1p() / kappa;
    (ln_q.exp(), -ln_q.exp_m1(), a)
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 1.0) {
        return usage(format!("time exponent r = {r} must lie in [1, ∞]"));
    }
    Ok(())
}

/// `C₁ T^{-1/r} exp(C₂/T^κ + C₃T)`, evaluated in log space.
pub fn cobs_explicit(hc: &HypothesisConstants, horizon: f64, r: f64) -> Result<CobsExplicit> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return usage(format!("horizon T = {horizon} must be positive"));
    }
    check_r(r)?;
    let ic = interpolation_constants(hc)?;
    let th = hc.theta;
    let (q, one_minus_q, a) = chain_ratio(hc, ic.c2);
    let kappa = hc.kappa();
    let e = th / (1.0 - th);
    let ln_c1 = -e * q.ln() + (1.0 - th).ln() + e * th.ln() + (hc.growth.ln() + ic.c1.ln()) / (1.0 - th) + 6f64.ln()
        - one_minus_q.ln();
    let c2 = (a + th) / one_minus_q.powf(kappa);
    let c3 = hc.omega.max(0.0) / (1.0 - th);
    let t_pow = if r.is_infinite() { 0.0 } else { horizon.ln() / r };
    let ln_value = ln_c1 - t_pow + c2 / horizon.powf(kappa) + c3 * horizon;
    Ok(CobsExplicit { q, kappa, ln_c1, c2, c3, ln_value, value: ln_value.exp() })
}

/// Finite union of closed time intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSet {
    intervals: Vec<(f64, f64)>,
}

impl TimeSet {
    /// Sorts and merges the intervals.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return usage("time intervals must satisfy a < b");
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// `|E ∩ (a, b)|`.
    pub fn measure_in(&self, a: f64, b: f64) -> f64 {
        self.intervals.iter().map(|&(x, y)| (y.min(b) - x.max(a)).max(0.0)).sum()
    }

    pub fn is_full(&self, horizon: f64) -> bool {
        self.intervals.len() == 1 && self.intervals[0] == (0.0, horizon)
    }

    fn check_within(&self, horizon: f64) -> Result<()> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(f), Some(l)) if f.0 >= 0.0 && l.1 <= horizon => Ok(()),
            _ => usage(format!("time set must be a nonempty subset of [0, {horizon}]")),
        }
    }
}

/// `ℓ₁ > ℓ₂ > … → ℓ` with `ℓ_{m+1} − ℓ_{m+2} = q(ℓ_m − ℓ_{m+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LebesgueChain {
    pub q: f64,
    pub ell: f64,
    /// `ℓ₁, …, ℓ_{K+1}`.
    pub points: Vec<f64>,
    /// `|E ∩ (ℓ_{m+1}, ℓ_m)| / (ℓ_m − ℓ_{m+1})` for the emitted gaps.
    pub densities: Vec<f64>,
    /// Index from which every later gap lies inside the interval of `E` containing `ℓ`,
    /// so the density condition holds for the infinite tail.
    pub tail_from: usize,
}

impl LebesgueChain {
    pub fn first_gap(&self) -> f64 {
        self.points[0] - self.points[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRequest {
    pub q: f64,
    /// Limit point; defaults to the left endpoint of the best interval.
    pub ell: Option<f64>,
    /// First point; defaults to the largest admissible value.
    pub ell1: Option<f64>,
    /// Number of gaps to emit.
    pub depth: usize,
}

const DENSITY: f64 = 1.0 / 3.0;

fn chain_point(ell: f64, ell1: f64, q: f64, m: usize) -> f64 {
    ell + (ell1 - ell) * q.powi(m as i32)
}

/// Number of leading gaps that satisfy the density condition, or `None`
/// when all of them do (the tail inside `[ell, right]` being automatic).
fn failing_gap(e: &TimeSet, q: f64, ell: f64, ell1: f64, right: f64) -> Option<usize> {
    let mut m = 0;
    loop {
        let hi = chain_point(ell, ell1, q, m);
        if hi <= right {
            return None;
        }
        let lo = chain_point(ell, ell1, q, m + 1);
        // Relative slack absorbs roundoff in the measure of full gaps.
        if e.measure_in(lo, hi) < DENSITY * (hi - lo) * (1.0 - 1e-12) {
            return Some(m);
        }
        m += 1;
    }
}

pub fn lebesgue_chain(e: &TimeSet, req: &ChainRequest) -> Result<LebesgueChain> {
    let q = req.q;
    if !(q > 0.0 && q < 1.0) {
        return usage(format!("chain ratio q = {q} must lie in (0, 1)"));
    }
    if e.measure() <= 0.0 {
        return usage("time set has zero measure");
    }
    let top = e.intervals.last().expect("nonempty").1;
    let limits: Vec<(f64, f64)> = match req.ell {
        Some(ell) => match e.intervals.iter().find(|&&(a, b)| ell >= a && ell < b) {
            Some(&(_, b)) => vec![(ell, b)],
            None => return usage(format!("ℓ = {ell} is not a right density point of E")),
        },
        None => e.intervals.clone(),
    };

    let mut best: Option<(f64, f64, f64)> = None;
    let mut achieved = 0;
    for &(ell, right) in &limits {
        let candidates: Vec<f64> = match req.ell1 {
            Some(v) => vec![v],
            None => {
                let mut c: Vec<f64> = e.intervals.iter().map(|iv| iv.1).filter(|&b| b > ell).collect();
                c.extend((1..=4096).map(|k| ell + (top - ell) * k as f64 / 4096.0));
                c.sort_by(|a, b| b.total_cmp(a));
                c
            }
        };
        for ell1 in candidates {
            if !(ell1 > ell && ell1 <= top) {
                continue;
            }
            if let Some((_, b1, _)) = best {
                if ell1 - ell <= b1 - best.unwrap().0 {
                    break;
                }
            }
            match failing_gap(e, q, ell, ell1, right) {
                None => {
                    best = Some((ell, ell1, right));
                    break;
                }
                Some(k) => achieved = achieved.max(k),
            }
        }
    }
    let Some((ell, ell1, right)) = best else {
        return Err(Error::ChainTruncated { achieved, requested: req.depth });
    };
    let points: Vec<f64> = (0..=req.depth).map(|m| chain_point(ell, ell1, q, m)).collect();
    let densities = points.windows(2).map(|w| e.measure_in(w[1], w[0]) / (w[0] - w[1])).collect();
    let tail_from = (0..).find(|&m| chain_point(ell, ell1, q, m) <= right).expect("geometric convergence");
    Ok(LebesgueChain { q, ell, points, densities, tail_from })
}

/// Whether an observability constant is a closed form or tracked through the chain argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Explicit,
    ProofTracked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CobsBound {
    pub kind: BoundKind,
    pub ln_value: f64,
    #[serde(with = "ext")]
    pub value: f64,
    pub chain: Option<LebesgueChain>,
}

/// Chain-based constant for a general interval union `E`:
/// `M e^{ω(T−ℓ₁)} q^{-θ/(1−θ)} (1−θ) θ^{θ/(1−θ)} c̃₁^{1/(1−θ)} 6 e^{(a+θ)/δ₁^κ + C̃₃T/(1−θ)} / δ₁ · |E|^{1−1/r}`
/// with `c̃₁ = M C̃₁`, `δ₁ = ℓ₁ − ℓ₂`. For `E = [0, T]` and `ℓ = 0` this equals [`cobs_explicit`].
pub fn cobs_chain(hc: &HypothesisConstants, e: &TimeSet, horizon: f64, r: f64) -> Result<CobsBound> {
    check_r(r)?;
    e.check_within(horizon)?;
    let ic = interpolation_constants(hc)?;
    let th = hc.theta;
    let (q, _, a) = chain_ratio(hc, ic.c2);
    let chain = lebesgue_chain(e, &ChainRequest { q, ell: None, ell1: None, depth: 12 })?;
    let ell1 = chain.points[0];
    let delta1 = chain.first_gap();
    let kappa = hc.kappa();
    let ex = th / (1.0 - th);
    let mut ln = -ex * q.ln()
        + (1.0 - th).ln()
        + ex * th.ln()
        + (hc.growth.ln() + ic.c1.ln()) / (1.0 - th)
        + 6f64.ln()
        + (a + th) / delta1.powf(kappa)
        + ic.c3 * horizon / (1.0 - th)
        - delta1.ln();
    if ell1 < horizon {
        ln += hc.growth.ln() + hc.omega * (horizon - ell1);
    }
    if r.is_finite() {
        ln += (1.0 - 1.0 / r) * e.measure().ln();
    } else {
        ln += e.measure().ln();
    }
    Ok(CobsBound { kind: BoundKind::ProofTracked, ln_value: ln, value: ln.exp(), chain: Some(chain) })
}

/// `cobs_explicit` for `E = [0, T]`, the chain constant otherwise.
pub fn cobs_bound(hc: &HypothesisConstants, e: &TimeSet, horizon: f64, r: f64) -> Result<CobsBound> {
    if e.is_full(horizon) {
        let c = cobs_explicit(hc, horizon, r)?;
        Ok(CobsBound { kind: BoundKind::Explicit, ln_value: c.ln_value, value: c.value, chain: None })
    } else {
        cobs_chain(hc, e, horizon, r)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_unit_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random field with spectrum supported in the cube `[-λ, λ]^d`.
///
/// Coefficients are drawn per wavenumber in a fixed order, so grids sharing
/// `X` and `λ` produce the same trigonometric polynomial at any resolution.
pub fn band_limited_field(grid: GridSpec, lambda: f64, seed: u64, stream: u64) -> Field {
    let mut rng = rng_for(seed, stream);
    let d = grid.dim();
    let n = grid.points() as i64;
    let kmax = ((lambda / grid.frequency_spacing()).floor() as i64).min((n - 1) / 2);
    let side = (2 * kmax + 1) as usize;
    let mut spec = Spectrum::zeros(grid);
    let mut cell = [0usize; MAX_DIM];
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        for a in (0..d).rev() {
            let k = (rem % side) as i64 - kmax;
            rem /= side;
            cell[a] = k.rem_euclid(n) as usize;
        }
        spec.values_mut()[grid.ravel(&cell)] = random_unit_complex(&mut rng);
    }
    inverse_transform(&spec)
}

/// `exp(-|x−c|²/(2σ²) + i ξ₀·x)` with the distance taken on the torus.
pub fn gaussian_packet(grid: GridSpec, center: &[f64], width: f64, freq: &[f64]) -> Field {
    let d = grid.dim();
    Field::from_fn(grid, |x| {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..d {
            let dx = grid.wrap(x[a] - center[a]);
            r2 += dx * dx;
            phase += freq[a] * x[a];
        }
        Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase)
    })
}

/// Shift by `shift` (any real vector) through the exact Fourier phase.
pub fn translate(f: &Field, shift: &[f64]) -> Field {
    let grid = *f.grid();
    let d = grid.dim();
    let mut s = forward_transform(f);
    for (i, v) in s.values_mut().iter_mut().enumerate() {
        let xi = grid.freq(i);
        let ph: f64 = (0..d).map(|a| xi[a] * shift[a]).sum();
        *v *= Complex64::from_polar(1.0, -ph);
    }
    inverse_transform(&s)
}

fn lattice_band(grid: &GridSpec, lambda: f64) -> Vec<usize> {
    let d = grid.dim();
    (0..grid.len()).filter(|&i| grid.freq(i)[..d].iter().all(|x| x.abs() <= lambda)).collect()
}

/// Mode budget of the concentration eigenproblem.
const MAX_EIGEN_MODES: usize = 600;

/// Minimiser of `‖1_Ω f‖₂/‖f‖₂` over fields band-limited to the cube, when the band is small enough.
fn concentration_extremal(set: &ObservationSet, lambda: f64) -> Option<Field> {
    let grid = *set.grid();
    let band = lattice_band(&grid, lambda);
    if band.is_empty() || band.len() > MAX_EIGEN_MODES {
        return None;
    }
    let d = grid.dim();
    let n = grid.points() as i64;
    // Discrete transform of the mask: Σ_x 1_Ω(x) e^{-iκ·x}/N^d, at lattice difference κ.
    let mask = Field::new(
        grid,
        set.mask().iter().map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)).collect(),
    )
    .expect("grid-sized");
    let mhat = forward_transform(&mask);
    let norm = grid.volume();
    let idx: Vec<[usize; MAX_DIM]> = band.iter().map(|&i| grid.unravel(i)).collect();
    let k = band.len();
    let gm = DMatrix::from_fn(k, k, |r, c| {
        let mut diff = [0usize; MAX_DIM];
        for a in 0..d {
            diff[a] = (idx[r][a] as i64 - idx[c][a] as i64).rem_euclid(n) as usize;
        }
        mhat.values()[grid.ravel(&diff)] / norm
    });
    let eig = gm.symmetric_eigen();
    let (j, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    let vec = eig.eigenvectors.column(j);
    let mut spec = Spectrum::zeros(grid);
    for (r, &i) in band.iter().enumerate() {
        spec.values_mut()[i] = vec[r];
    }
    Some(inverse_transform(&spec))
}

fn norm_ratio(f: &Field, set: &ObservationSet, p: f64) -> f64 {
    let full = f.norm(p);
    let obs = restrict(f, set).expect("same grid").norm(p);
    if full == 0.0 {
        0.0
    } else {
        full / obs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySample {
    pub lambda: f64,
    /// `max ‖f‖_p / ‖1_{Ω(t)} f‖_p` over candidates and time samples.
    #[serde(with = "ext")]
    pub worst_ratio: f64,
    pub sample: usize,
    pub candidate: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyFit {
    pub d0: f64,
    pub d1: f64,
    pub gamma1: f64,
    /// Unconstrained least-squares intercept and slope of `ln(worst ratio)` against `λ`.
    pub ls_intercept: f64,
    pub ls_slope: f64,
    pub samples: Vec<UncertaintySample>,
    /// `ln(worst ratio) − ln(d₀ e^{d₁λ})`, nonpositive by construction.
    pub residuals: Vec<f64>,
    pub thickness: ThicknessDecision,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyOptions {
    pub p: f64,
    pub random_fields: usize,
    pub packets: usize,
    pub seed: u64,
}

impl Default for UncertaintyOptions {
    fn default() -> Self {
        Self { p: 2.0, random_fields: 16, packets: 16, seed: 0 }
    }
}

/// Cells of the complement of `set`, evenly thinned to at most `count` centres.
fn gap_centres(set: &ObservationSet, count: usize) -> Vec<Vec<f64>> {
    let grid = set.grid();
    let d = grid.dim();
    let gaps: Vec<usize> = (0..grid.len()).filter(|&i| !set.contains(i)).collect();
    if gaps.is_empty() || count == 0 {
        return Vec::new();
    }
    let step = (gaps.len() as f64 / count as f64).max(1.0);
    (0..count.min(gaps.len()))
        .map(|k| {
            let i = gaps[((k as f64 + 0.5) * step) as usize % gaps.len()];
            grid.point(i)[..d].to_vec()
        })
        .collect()
}

/// Fits `‖P_λ f‖ ≤ d₀ e^{d₁λ} ‖1_{Ω(t)} P_λ f‖` over sampled band-limited candidates.
pub fn estimate_uncertainty(
    fam: &SetFamily,
    lambdas: &[f64],
    window: &[f64],
    opts: &UncertaintyOptions,
) -> Result<UncertaintyFit> {
    let grid = *fam.grid();
    if lambdas.len() < 2 {
        return usage("need at least two cutoff scales");
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l <= grid.nyquist())) {
        return usage(format!("cutoff scales must lie in (0, {}]", grid.nyquist()));
    }
    let thickness = is_uniformly_thick(fam, window, f64::MIN_POSITIVE)?;
    if !thickness.holds {
        return Err(Error::Hypothesis(format!(
            "observation family is not uniformly thick at window {window:?}: {:?}",
            thickness.witness
        )));
    }
    let p = opts.p;
    let samples: Vec<UncertaintySample> = lambdas
        .par_iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let mut cands: Vec<(String, Field)> = (0..opts.random_fields)
                .map(|k| {
                    let stream = (li * 100_000 + k) as u64;
                    (format!("random-{k}"), band_limited_field(grid, lambda, opts.seed, stream))
                })
                .collect();
            let mut best = UncertaintySample { lambda, worst_ratio: 0.0, sample: 0, candidate: String::new() };
            for (j, set) in fam.samples().iter().enumerate() {
                let mut local: Vec<(String, Field)> = gap_centres(set, opts.packets)
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let g = gaussian_packet(grid, &c, 1.0 / lambda, &vec![0.0; grid.dim()]);
                        (format!("packet-{k}"), project_sharp(&g, lambda).expect("positive cutoff"))
                    })
                    .collect();
                if let Some(f) = concentration_extremal(set, lambda) {
                    local.push(("eigen".into(), f));
                }
                for (label, f) in cands.iter().chain(local.iter()) {
                    let r = norm_ratio(f, set, p);
                    if r > best.worst_ratio || r.is_nan() {
                        best = UncertaintySample { lambda, worst_ratio: r, sample: j, candidate: label.clone() };
                    }
                }
            }
            cands.clear();
            best
        })
        .collect();

    if let Some(bad) = samples.iter().find(|s| !s.worst_ratio.is_finite()) {
        return Err(Error::Hypothesis(format!(
            "band-limited candidate '{}' at λ = {} is invisible on sample {}",
            bad.candidate, bad.lambda, bad.sample
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.lambda).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.worst_ratio.ln()).collect();
    let (ls_intercept, ls_slope) = linear_fit(&xs, &ys);
    let d1 = ls_slope.max(1e-12);
    let ln_d0 = xs.iter().zip(&ys).map(|(x, y)| y - d1 * x).fold(f64::NEG_INFINITY, f64::max);
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - ln_d0 - d1 * x).collect();
    Ok(UncertaintyFit { d0: ln_d0.exp(), d1, gamma1: 1.0, ls_intercept, ls_slope, samples, residuals, thickness })
}

/// Least squares `y ≈ a + b x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationSample {
    pub lambda: f64,
    pub gap: f64,
    /// Start time attaining the maximum.
    pub s: f64,
    /// `ln max ‖(Id − P_λ)U(s+gap, s)f‖_p / ‖f‖_p`.
    #[serde(with = "ext")]
    pub ln_ratio: f64,
    pub ln_envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationFit {
    pub d2: f64,
    pub d3: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Least-squares intercept and rate before the envelope inflation.
    pub ls_intercept: f64,
    pub ls_rate: f64,
    pub rms_residual: f64,
    /// Fraction of samples under the envelope (1 by construction).
    pub dominated: f64,
    pub threshold: f64,
    pub samples: Vec<DissipationSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationOptions {
    pub p: f64,
    pub gamma1: f64,
    /// Start times `s` to maximise over; those with `s + gap > T` are skipped.
    pub starts: Vec<f64>,
    pub random_fields: usize,
    pub seed: u64,
}

impl DissipationOptions {
    pub fn for_horizon(horizon: f64) -> Self {
        Self { p: 2.0, gamma1: 1.0, starts: (0..8).map(|k| horizon * k as f64 / 8.0).collect(), random_fields: 4, seed: 0 }
    }
}

/// Largest `ln |(1 − η(|ξ|/λ)) e^{-∫a}|` over lattice modes: the exact `L²` norm
/// and, since single modes have equal `L^p` ratios, a lower bound for every `p`.
fn ln_mode_sup(prop: &EllipticPropagator, lambda: f64, s: f64, t: f64) -> Result<f64> {
    let grid = *prop.grid();
    let e = prop.exponent(s, t)?;
    Ok((0..grid.len())
        .map(|i| ln_one_minus_eta(grid.freq_norm(i) / lambda) - e[i].re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn ln_random_sup(prop: &EllipticPropagator, lambda: f64, s: f64, t: f64, opts: &DissipationOptions) -> Result<f64> {
    let grid = *prop.grid();
    let mut best = f64::NEG_INFINITY;
    for k in 0..opts.random_fields {
        let f = band_limited_field(grid, grid.nyquist(), opts.seed, k as u64);
        let u = prop.propagate(s, t, &f)?;
        let mut spec = forward_transform(&u);
        for (i, v) in spec.values_mut().iter_mut().enumerate() {
            *v *= 1.0 - crate::spectral::bump_eta(grid.freq_norm(i) / lambda);
        }
        let out = inverse_transform(&spec).norm(opts.p);
        best = best.max(out.ln() - f.norm(opts.p).ln());
    }
    Ok(best)
}

/// Profiled least squares of `y ≈ b − d z`, `z = λ^{γ₂} Δ^{γ₃}`; returns `(rss, b, d)`.
fn profile(samples: &[(f64, f64, f64)], g2: f64, g3: f64) -> (f64, f64, f64) {
    let z: Vec<f64> = samples.iter().map(|&(l, g, _)| l.powf(g2) * g.powf(g3)).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let (b, slope) = linear_fit(&z, &y);
    let rss = z.iter().zip(&y).map(|(z, y)| (y - b - slope * z).powi(2)).sum();
    (rss, b, -slope)
}

/// Fits `‖(Id − P_λ)U(t,s)‖ ≤ d₂ e^{-d₃ λ^{γ₂} (t−s)^{γ₃}}` and inflates the
/// envelope until it dominates every sample.
pub fn estimate_dissipation(
    prop: &EllipticPropagator,
    lambdas: &[f64],
    gaps: &[f64],
    opts: &DissipationOptions,
) -> Result<DissipationFit> {
    let sym = prop.symbol();
    let grid = *prop.grid();
    let m = sym.order() as f64;
    let c = prop.certificate().c;
    let omega = garding_lower_bound(sym, 0.5 * c, prop.certificate())?.omega;
    let threshold = dissipation_threshold(c, omega, sym.order());
    if lambdas.iter().any(|&l| !(l > threshold && l <= grid.nyquist())) {
        return usage(format!("cutoff scales must lie in ({threshold}, {}]", grid.nyquist()));
    }
    if gaps.iter().any(|&g| !(g > 0.0 && g <= sym.horizon())) {
        return usage("time gaps must lie in (0, T]");
    }
    if !(opts.p >= 1.0) {
        return usage(format!("exponent p = {} must be >= 1", opts.p));
    }
    let mut jobs = Vec::new();
    for &lambda in lambdas {
        for &gap in gaps {
            jobs.push((lambda, gap));
        }
    }
    let measured: Vec<Result<(f64, f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(lambda, gap)| {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for &s in &opts.starts {
                if s + gap > sym.horizon() * (1.0 + 1e-12) {
                    continue;
                }
                let t = (s + gap).min(sym.horizon());
                let mut v = ln_mode_sup(prop, lambda, s, t)?;
                if opts.p != 2.0 && opts.random_fields > 0 {
                    v = v.max(ln_random_sup(prop, lambda, s, t, opts)?);
                }
                if v > best.0 {
                    best = (v, s);
                }
            }
            Ok((lambda, gap, best.1, best.0))
        })
        .collect();
    let measured: Vec<(f64, f64, f64, f64)> = measured.into_iter().collect::<Result<_>>()?;
    let data: Vec<(f64, f64, f64)> = measured.iter().filter(|v| v.3.is_finite()).map(|v| (v.0, v.1, v.3)).collect();
    if data.len() < 3 {
        return usage("too few finite dissipation samples to fit");
    }

    let mut best = (f64::INFINITY, m, 1.0);
    let search = |lo2: f64, hi2: f64, lo3: f64, hi3: f64, steps: usize, best: &mut (f64, f64, f64)| {
        for i in 0..=steps {
            let g2 = lo2 + (hi2 - lo2) * i as f64 / steps as f64;
            for j in 0..=steps {
                let g3 = lo3 + (hi3 - lo3) * j as f64 / steps as f64;
                let (rss, _, d) = profile(&data, g2, g3);
                if d > 0.0 && rss < best.0 {
                    *best = (rss, g2, g3);
                }
            }
        }
    };
    search(0.25 * m, 2.0 * m, 0.25, 2.0, 140, &mut best);
    for _ in 0..3 {
        let (w2, w3) = (0.02 * m, 0.02);
        let (c2, c3) = (best.1, best.2);
        search(c2 - w2, c2 + w2, c3 - w3, c3 + w3, 40, &mut best);
    }
    let (rss, g2, g3) = best;
    if !rss.is_finite() {
        return Err(Error::Hypothesis("no decaying envelope fits the dissipation samples".into()));
    }
    if g2 <= opts.gamma1 {
        return Err(Error::Hypothesis(format!("fitted γ₂ = {g2} does not exceed γ₁ = {}", opts.gamma1)));
    }
    let (_, b, d) = profile(&data, g2, g3);
    let ymax = data.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    let mut ln_d2 = b.max(0.0);
    if ymax >= ln_d2 {
        ln_d2 = ymax + 1e-9 * (1.0 + ymax.abs());
    }
    let z = |l: f64, g: f64| l.powf(g2) * g.powf(g3);
    let d3 = data.iter().map(|&(l, g, y)| (ln_d2 - y) / z(l, g)).fold(d, f64::min);
    if !(d3 > 0.0) {
        return Err(Error::Hypothesis("dissipation envelope has no positive rate".into()));
    }
    let samples: Vec<DissipationSample> = measured
        .iter()
        .map(|&(lambda, gap, s, y)| DissipationSample {
            lambda,
            gap,
            s,
            ln_ratio: y,
            ln_envelope: ln_d2 - d3 * z(lambda, gap),
        })
        .collect();
    let dominated =
        samples.iter().filter(|s| s.ln_ratio <= s.ln_envelope).count() as f64 / samples.len() as f64;
    Ok(DissipationFit {
        d2: ln_d2.exp(),
        d3,
        gamma2: g2,
        gamma3: g3,
        ls_intercept: b,
        ls_rate: d,
        rms_residual: (rss / data.len() as f64).sqrt(),
        dominated,
        threshold,
        samples,
    })
}

/// `M ≥ 1, ω` with `‖U(t,s)‖_{p→p} ≤ M e^{ω(t−s)}`: `ω` from the Gårding
/// bound at `c₀ = c/2`, `M` the largest sampled `‖U(t,s)‖ e^{−ω(t−s)}`.
/// For `p = 2` the operator norm is the multiplier sup, otherwise the kernel `L¹` norm.
pub fn exponential_bound(prop: &EllipticPropagator, p: f64, pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    let c = prop.certificate().c;
    let omega = garding_lower_bound(prop.symbol(), 0.5 * c, prop.certificate())?.omega.max(0.0);
    let mut growth: f64 = 1.0;
    for &(s, t) in pairs {
        if t <= s {
            continue;
        }
        let norm = if p == 2.0 {
            prop.multiplier(s, t)?.iter().map(|v| v.norm()).fold(0.0, f64::max)
        } else {
            prop.kernel(s, t)?.norm(1.0)
        };
        growth = growth.max(norm * (-omega * (t - s)).exp());
    }
    Ok((growth, omega))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub order: usize,
    /// Largest panel width as a fraction of the horizon.
    pub panel_fraction: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { order: 8, panel_fraction: 1.0 / 16.0 }
    }
}

/// Quadrature nodes on `E`, split at every generator or observation-set jump.
fn observation_rule(evo: &dyn Evolution, fam: &SetFamily, e: &TimeSet, quad: &QuadratureOptions) -> Vec<(f64, f64)> {
    let mut cuts = evo.breakpoints();
    cuts.extend(fam.breakpoints());
    composite_rule(e.intervals(), &cuts, quad.panel_fraction * evo.horizon(), quad.order)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub field: Field,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRatio {
    pub id: usize,
    pub label: String,
    #[serde(with = "ext")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub grid: GridSpec,
    pub horizon: f64,
    pub time_set: Vec<(f64, f64)>,
    #[serde(with = "ext")]
    pub r: f64,
    pub p: f64,
    pub quadrature_nodes: usize,
    pub ratios: Vec<CandidateRatio>,
    /// Largest sampled ratio: a lower bound on the best observability constant.
    #[serde(with = "ext")]
    pub sup_ratio: f64,
    pub argmax: usize,
    pub bound: Option<CobsBound>,
    /// `sup_ratio ≤ bound`, compared in log space.
    pub passes: Option<bool>,
}

struct ObservationPlan<'a> {
    nodes: Vec<(f64, f64, Box<dyn crate::evolution::FieldOperator + 'a>, &'a ObservationSet)>,
    final_op: Box<dyn crate::evolution::FieldOperator + 'a>,
}

impl<'a> ObservationPlan<'a> {
    fn new(evo: &'a dyn Evolution, fam: &'a SetFamily, e: &TimeSet, quad: &QuadratureOptions) -> Result<Self> {
        let rule = observation_rule(evo, fam, e, quad);
        let nodes = rule
            .into_iter()
            .map(|(t, w)| Ok((t, w, evo.step(0.0, t)?, fam.at(t))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, final_op: evo.step(0.0, evo.horizon())? })
    }

    /// `‖U(T,0)f‖_p / (∫_E ‖1_{Ω(t)}U(t,0)f‖_p^r dt)^{1/r}`.
    fn ratio(&self, f: &Field, r: f64, p: f64) -> Result<f64> {
        let fin = self.final_op.apply(f)?.norm(p);
        if fin == 0.0 {
            return Ok(0.0);
        }
        let mut acc: f64 = 0.0;
        for (_, w, op, set) in &self.nodes {
            let g = restrict(&op.apply(f)?, set)?.norm(p);
            if r.is_infinite() {
                acc = acc.max(g);
            } else {
                acc += w * g.powf(r);
            }
        }
        let obs = if r.is_infinite() { acc } else { acc.powf(1.0 / r) };
        Ok(if obs == 0.0 { f64::INFINITY } else { fin / obs })
    }
}

/// Sup of the observability ratio over the candidates, with the theoretical
/// constant when hypothesis constants are supplied.
pub fn empirical_ratio(
    evo: &dyn Evolution,
    fam: &SetFamily,
    e: &TimeSet,
    r: f64,
    p: f64,
    candidates: &[Candidate],
    hc: Option<&HypothesisConstants>,
    quad: &QuadratureOptions,
) -> Result<ObservabilityReport> {
    check_r(r)?;
    e.check_within(evo.horizon())?;
    if e.measure() <= 0.0 {
        return usage("time set has zero measure");
    }
    if candidates.is_empty() {
        return usage("no candidates supplied");
    }
    if fam.grid() != evo.grid() || (fam.horizon() - evo.horizon()).abs() > 1e-12 * evo.horizon() {
        return usage("observation family and evolution disagree on grid or horizon");
    }
    let plan = ObservationPlan::new(evo, fam, e, quad)?;
    let values: Vec<f64> =
        candidates.par_iter().map(|c| plan.ratio(&c.field, r, p)).collect::<Result<Vec<_>>>()?;
    let ratios: Vec<CandidateRatio> = candidates
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(id, (c, &ratio))| CandidateRatio { id, label: c.label.clone(), ratio })
        .collect();
    let (argmax, sup_ratio) =
        values.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 || v.is_nan() { (i, v) } else { b });
    let bound = hc.map(|hc| cobs_bound(hc, e, evo.horizon(), r)).transpose()?;
    let passes = bound.as_ref().map(|b| sup_ratio.ln() <= b.ln_value);
    Ok(ObservabilityReport {
        grid: *evo.grid(),
        horizon: evo.horizon(),
        time_set: e.intervals().to_vec(),
        r,
        p,
        quadrature_nodes: plan.nodes.len(),
        ratios,
        sup_ratio,
        argmax,
        bound,
        passes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateMix {
    pub count: usize,
    /// Largest frequency used by band-limited candidates and packet modulations.
    pub band: f64,
    pub seed: u64,
}

/// Seeded mix of band-limited fields, translated and dilated Gaussian packets, and low modes.
pub fn observation_candidates(grid: GridSpec, mix: &CandidateMix) -> Vec<Candidate> {
    let d = grid.dim();
    let x = grid.half_length();
    let dk = grid.frequency_spacing();
    (0..mix.count)
        .into_par_iter()
        .map(|id| {
            let mut rng = rng_for(mix.seed, id as u64);
            match id % 5 {
                0 | 1 => {
                    let lambda = rng.gen_range(dk..=mix.band.max(dk));
                    Candidate {
                        label: format!("band-limited λ={lambda:.3}"),
                        field: band_limited_field(grid, lambda, mix.seed, (1 << 32) + id as u64),
                    }
                }
                2 | 3 => {
                    let centre: Vec<f64> = (0..d).map(|_| rng.gen_range(-x..x)).collect();
                    let width = rng.gen_range(0.25..2.0f64).min(x / 8.0);
                    let freq: Vec<f64> = (0..d).map(|_| (rng.gen_range(-0.5..0.5) * mix.band / dk).round() * dk).collect();
                    Candidate { label: format!("packet c={centre:.3?} σ={width:.3}"), field: gaussian_packet(grid, &centre, width, &freq) }
                }
                _ => {
                    let kmax = (mix.band / dk).floor().max(1.0) as i64;
                    let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-kmax..=kmax) as f64 * dk).collect();
                    let shift = rng.gen_range(0.0..std::f64::consts::TAU);
                    let field = Field::from_fn(grid, |p| {
                        let ph: f64 = (0..d).map(|a| k[a] * p[a]).sum::<f64>();
                        Complex64::new(1.0 + (ph + shift).cos(), 0.0)
                    });
                    Candidate { label: format!("mode k={k:.3?}"), field }
                }
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketMix {
    pub count: usize,
    /// Largest modulation frequency per axis.
    pub band: f64,
    /// Range of packet widths σ.
    pub width: (f64, f64),
    pub seed: u64,
}

/// Gaussian packets and sums of two packets, centred in the inner quarter of
/// the box. Unlike [`observation_candidates`] every field decays at the seam,
/// which the sheared propagators need. The draw does not depend on `N`.
pub fn localized_candidates(grid: GridSpec, mix: &PacketMix) -> Vec<Candidate> {
    let d = grid.dim();
    let x = grid.half_length();
    let dk = grid.frequency_spacing();
    let (lo, hi) = mix.width;
    (0..mix.count)
        .into_par_iter()
        .map(|id| {
            let mut rng = rng_for(mix.seed, id as u64);
            let packet = |rng: &mut ChaCha8Rng| {
                let centre: Vec<f64> = (0..d).map(|_| rng.gen_range(-x / 4.0..x / 4.0)).collect();
                let width = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                let freq: Vec<f64> = (0..d).map(|_| (rng.gen_range(-1.0..1.0) * mix.band / dk).round() * dk).collect();
                (gaussian_packet(grid, &centre, width, &freq), format!("c={centre:.3?} σ={width:.3}"))
            };
            let (f, label) = packet(&mut rng);
            if id % 2 == 0 {
                Candidate { label: format!("packet {label}"), field: f }
            } else {
                let (g, other) = packet(&mut rng);
                let field = f.add(&g).expect("same grid");
                Candidate { label: format!("pair {label} + {other}"), field }
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub shifts: Vec<f64>,
    #[serde(with = "crate::report::ext_vec")]
    pub ratios: Vec<f64>,
    /// `ratio(last) / ratio(first)`.
    #[serde(with = "ext")]
    pub growth: f64,
    /// Whether the ratios increase strictly along the sweep.
    pub monotone: bool,
    /// Largest seam leakage over the shifted data and their evolutions.
    pub max_leakage: f64,
    pub mean_thick: Option<ThicknessDecision>,
}

/// Ratios for the translates `f(· − x_n e₁)` of a fixed bump.
pub fn falsify_mean_thickness(
    evo: &dyn Evolution,
    fam: &SetFamily,
    bump: &Field,
    shifts: &[f64],
    r: f64,
    p: f64,
    quad: &QuadratureOptions,
) -> Result<FalsificationReport> {
    check_r(r)?;
    let grid = *evo.grid();
    if shifts.iter().any(|s| s.abs() > grid.half_length() / 2.0) {
        return usage(format!("shifts must stay within half the torus half-length {}", grid.half_length() / 2.0));
    }
    if bump.grid() != &grid {
        return usage("bump lives on a different grid");
    }
    let e = TimeSet::interval(0.0, evo.horizon())?;
    let plan = ObservationPlan::new(evo, fam, &e, quad)?;
    let d = grid.dim();
    let out: Vec<(f64, f64)> = shifts
        .par_iter()
        .map(|&x| {
            let mut v = vec![0.0; d];
            v[0] = x;
            let f = translate(bump, &v);
            let ratio = plan.ratio(&f, r, p)?;
            let fin = plan.final_op.apply(&f)?;
            let leak = crate::spectral::boundary_leakage(&f).max(crate::spectral::boundary_leakage(&fin));
            Ok((ratio, leak))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = out.iter().map(|v| v.0).collect();
    let max_leakage = out.iter().map(|v| v.1).fold(0.0, f64::max);
    let growth = match (ratios.first(), ratios.last()) {
        (Some(a), Some(b)) if *a > 0.0 => b / a,
        _ => f64::NAN,
    };
    let monotone = ratios.windows(2).all(|w| w[1] > w[0]);
    Ok(FalsificationReport { shifts: shifts.to_vec(), ratios, growth, monotone, max_leakage, mean_thick: None })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub constants: InterpolationConstants,
    pub samples: usize,
    /// Largest `ln(lhs) − ln(rhs)`; the estimate holds when this is ≤ 0.
    pub max_log_excess: f64,
    pub worst: Option<(f64, f64, usize)>,
}

/// `‖U(t,0)u₀‖ ≤ C̃₁ e^{C̃₂/(t−s)^κ + C̃₃(t−s)} ‖1_{Ω(t)}U(t,0)u₀‖^{1−θ} ‖U(s,0)u₀‖^θ` on samples.
pub fn interpolation_check(
    evo: &dyn Evolution,
    fam: &SetFamily,
    hc: &HypothesisConstants,
    pairs: &[(f64, f64)],
    candidates: &[Candidate],
    p: f64,
) -> Result<InterpolationCheck> {
    let ic = interpolation_constants(hc)?;
    let th = hc.theta;
    let kappa = hc.kappa();
    let mut worst: Option<(f64, f64, usize)> = None;
    let mut max_excess = f64::NEG_INFINITY;
    let mut count = 0;
    for &(s, t) in pairs {
        if !(0.0 <= s && s < t && t <= evo.horizon()) {
            return usage(format!("need 0 <= s < t <= T, got ({s}, {t})"));
        }
        let (us, ut) = (evo.step(0.0, s)?, evo.step(0.0, t)?);
        let set = fam.at(t);
        let logs: Vec<f64> = candidates
            .par_iter()
            .map(|c| {
                let a = ut.apply(&c.field)?;
                let lhs = a.norm(p).ln();
                let obs = restrict(&a, set)?.norm(p).ln();
                let prev = us.apply(&c.field)?.norm(p).ln();
                let rhs = ic.c1.ln() + ic.c2 / (t - s).powf(kappa) + ic.c3 * (t - s) + (1.0 - th) * obs + th * prev;
                Ok(if lhs == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lhs - rhs })
            })
            .collect::<Result<_>>()?;
        for (i, v) in logs.into_iter().enumerate() {
            count += 1;
            if v > max_excess {
                max_excess = v;
                worst = Some((s, t, i));
            }
        }
    }
    Ok(InterpolationCheck { constants: ic, samples: count, max_log_excess: max_excess, worst })
}
