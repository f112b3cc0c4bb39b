//! Non-autonomous polynomial symbols `a(t, ξ) = Σ a_α(t) (iξ)^α`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::spectral::{norm, MAX_DIM};

/// A coefficient `a_α(t)`, constant or piecewise constant on a uniform
/// partition of `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientTrack {
    Constant(Complex64),
    Piecewise(Vec<Complex64>),
}

impl CoefficientTrack {
    /// Samples `f` at the left endpoint of each of `pieces` cells.
    pub fn sample(f: impl Fn(f64) -> Complex64, horizon: f64, pieces: usize) -> Self {
        let w = horizon / pieces as f64;
        Self::Piecewise((0..pieces).map(|k| f(k as f64 * w)).collect())
    }

    pub fn pieces(&self) -> usize {
        match self {
            Self::Constant(_) => 1,
            Self::Piecewise(v) => v.len(),
        }
    }

    pub fn values(&self) -> &[Complex64] {
        match self {
            Self::Constant(v) => std::slice::from_ref(v),
            Self::Piecewise(v) => v,
        }
    }

    fn cell(&self, t: f64, horizon: f64) -> usize {
        let n = self.pieces();
        ((t / horizon * n as f64).floor() as usize).min(n - 1)
    }

    pub fn value(&self, t: f64, horizon: f64) -> Complex64 {
        self.values()[self.cell(t, horizon)]
    }

    /// `∫_0^t a(τ) dτ`.
    fn primitive(&self, t: f64, horizon: f64) -> Complex64 {
        match self {
            Self::Constant(v) => v * t,
            Self::Piecewise(vals) => {
                let w = horizon / vals.len() as f64;
                let k = self.cell(t, horizon);
                let head: Complex64 = vals[..k].iter().sum::<Complex64>() * w;
                head + vals[k] * (t - k as f64 * w)
            }
        }
    }

    pub fn integral(&self, s: f64, t: f64, horizon: f64) -> Complex64 {
        match self {
            Self::Constant(v) => v * (t - s),
            Self::Piecewise(vals) if vals.len() == 1 => vals[0] * (t - s),
            _ => self.primitive(t, horizon) - self.primitive(s, horizon),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values().iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub alpha: Vec<usize>,
    pub track: CoefficientTrack,
}

impl Term {
    pub fn degree(&self) -> usize {
        self.alpha.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymbol", into = "RawSymbol")]
pub struct NonAutonomousSymbol {
    dim: usize,
    order: usize,
    horizon: f64,
    terms: Vec<Term>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawSymbol {
    d: usize,
    m: usize,
    #[serde(rename = "T")]
    t: f64,
    coeffs: Vec<RawCoeff>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawCoeff {
    alpha: Vec<usize>,
    re: Vec<f64>,
    #[serde(default)]
    im: Vec<f64>,
}

impl TryFrom<RawSymbol> for NonAutonomousSymbol {
    type Error = Error;
    fn try_from(r: RawSymbol) -> Result<Self> {
        let mut terms = Vec::with_capacity(r.coeffs.len());
        for c in r.coeffs {
            let im = if c.im.is_empty() { vec![0.0; c.re.len()] } else { c.im };
            if im.len() != c.re.len() || c.re.is_empty() {
                return Err(Error::Config(format!(
                    "coefficient {:?}: re/im sample arrays must be nonempty and of equal length",
                    c.alpha
                )));
            }
            let vals: Vec<Complex64> = c.re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            let track = if vals.len() == 1 {
                CoefficientTrack::Constant(vals[0])
            } else {
                CoefficientTrack::Piecewise(vals)
            };
            terms.push(Term { alpha: c.alpha, track });
        }
        NonAutonomousSymbol::new(r.d, r.m, r.t, terms)
    }
}

impl From<NonAutonomousSymbol> for RawSymbol {
    fn from(s: NonAutonomousSymbol) -> Self {
        let coeffs = s
            .terms
            .into_iter()
            .map(|t| RawCoeff {
                alpha: t.alpha,
                re: t.track.values().iter().map(|v| v.re).collect(),
                im: t.track.values().iter().map(|v| v.im).collect(),
            })
            .collect();
        RawSymbol { d: s.dim, m: s.order, t: s.horizon, coeffs }
    }
}

/// `(iξ)^α = i^{|α|} Π ξ_j^{α_j}`.
pub fn monomial(alpha: &[usize], xi: &[f64]) -> Complex64 {
    let k: usize = alpha.iter().sum();
    let real: f64 = alpha.iter().zip(xi).map(|(&a, &x)| x.powi(a as i32)).product();
    let phase = match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    phase * real
}

impl NonAutonomousSymbol {
    pub fn new(dim: usize, order: usize, horizon: f64, terms: Vec<Term>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return usage(format!("symbol dimension {dim} not in 1..={MAX_DIM}"));
        }
        if order < 2 || order % 2 != 0 {
            return usage(format!("degree {order} must be even and >= 2"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return usage(format!("horizon {horizon} must be positive"));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.alpha.len() != dim {
                return usage(format!("multi-index {:?} has wrong length for d={dim}", t.alpha));
            }
            if t.degree() > order {
                return usage(format!("multi-index {:?} exceeds degree {order}", t.alpha));
            }
            if t.track.pieces() == 0 {
                return usage("coefficient track without samples");
            }
            if terms[..i].iter().any(|u| u.alpha == t.alpha) {
                return usage(format!("duplicate multi-index {:?}", t.alpha));
            }
        }
        if !terms.iter().any(|t| t.degree() == order && !t.track.is_zero()) {
            return usage("no nonzero coefficient of top degree");
        }
        Ok(Self { dim, order, horizon, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain { t, horizon: self.horizon });
        }
        Ok(())
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim {
            return usage(format!("frequency has {} components, expected {}", xi.len(), self.dim));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, xi: &[f64]) -> Result<Complex64> {
        self.check_time(t)?;
        self.check_xi(xi)?;
        Ok(self.eval_unchecked(t, xi, false))
    }

    pub fn principal(&self, t: f64, xi: &[f64]) -> Result<Complex64> {
        self.check_time(t)?;
        self.check_xi(xi)?;
        Ok(self.eval_unchecked(t, xi, true))
    }

    pub(crate) fn eval_unchecked(&self, t: f64, xi: &[f64], principal_only: bool) -> Complex64 {
        self.terms
            .iter()
            .filter(|term| !principal_only || term.degree() == self.order)
            .map(|term| term.track.value(t, self.horizon) * monomial(&term.alpha, xi))
            .sum()
    }

    /// `∫_s^t a_α(τ) dτ` for every term, in term order.
    pub fn integrated_coefficients(&self, s: f64, t: f64) -> Result<Vec<Complex64>> {
        self.check_time(s)?;
        self.check_time(t)?;
        if s > t {
            return usage(format!("time integral needs s <= t, got s={s}, t={t}"));
        }
        Ok(self.terms.iter().map(|term| term.track.integral(s, t, self.horizon)).collect())
    }

    /// Evaluates `Σ c_α (iξ)^α` for coefficients aligned with [`Self::terms`].
    pub fn combine(&self, coeffs: &[Complex64], xi: &[f64]) -> Complex64 {
        self.terms.iter().zip(coeffs).map(|(term, c)| c * monomial(&term.alpha, xi)).sum()
    }

    /// Sorted union of all track breakpoints in `[0, T]`, endpoints included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, self.horizon];
        for term in &self.terms {
            let n = term.track.pieces();
            pts.extend((1..n).map(|k| k as f64 * self.horizon / n as f64));
        }
        sort_dedup(pts)
    }

    /// One time per cell of the common partition; exact sampling of the
    /// piecewise-constant structure.
    pub fn representative_times(&self) -> Vec<f64> {
        self.breakpoints().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `Σ_{|α| = k} sup|a_α|` for each `k < m`.
    pub fn lower_order_bounds(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.order];
        for term in &self.terms {
            if term.degree() < self.order {
                b[term.degree()] += term.track.sup_norm();
            }
        }
        b
    }
}

pub(crate) fn sort_dedup(mut pts: Vec<f64>) -> Vec<f64> {
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    pts
}

/// Unit directions: `±1` in d=1, `resolution` equispaced angles in d=2, a
/// Fibonacci lattice of `resolution` points in d=3.
pub fn sphere_directions(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..resolution)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / resolution as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..resolution)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / resolution as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityCertificate {
    /// Sampled `inf Re a_m(t, ξ) / |ξ|^m`.
    pub c: f64,
    pub directions: usize,
    pub time_samples: usize,
}

pub fn check_uniform_ellipticity(
    sym: &NonAutonomousSymbol,
    xi_samples: &[Vec<f64>],
    t_samples: &[f64],
) -> Result<EllipticityCertificate> {
    if xi_samples.is_empty() || t_samples.is_empty() {
        return usage("ellipticity check needs nonempty frequency and time samples");
    }
    let mut c = f64::INFINITY;
    for &t in t_samples {
        sym.check_time(t)?;
        for xi in xi_samples {
            sym.check_xi(xi)?;
            let r = norm(xi);
            if r == 0.0 {
                return usage("frequency samples must exclude 0");
            }
            let unit: Vec<f64> = xi.iter().map(|x| x / r).collect();
            c = c.min(sym.eval_unchecked(t, &unit, true).re);
        }
    }
    if c <= 0.0 {
        return Err(Error::NotElliptic { c, directions: xi_samples.len() });
    }
    Ok(EllipticityCertificate { c, directions: xi_samples.len(), time_samples: t_samples.len() })
}

pub const DEFAULT_DIRECTIONS: usize = 512;

/// Certificate over [`sphere_directions`] and one time per track cell.
pub fn certify(sym: &NonAutonomousSymbol, resolution: usize) -> Result<EllipticityCertificate> {
    check_uniform_ellipticity(sym, &sphere_directions(sym.dim(), resolution), &sym.representative_times())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GardingBound {
    pub c0: f64,
    pub omega: f64,
    /// Dominance radius beyond which no sampling is needed.
    pub radius: f64,
    pub lattice_points: usize,
}

/// Smallest sampled `ω` with `Re a(t,ξ) ≥ c0|ξ|^m − ω`.
///
/// The lattice covers `[-R*, R*]^d`; each of the best lattice points is then
/// refined by a shrinking pattern search.
pub fn garding_lower_bound(
    sym: &NonAutonomousSymbol,
    c0: f64,
    cert: &EllipticityCertificate,
) -> Result<GardingBound> {
    if !(c0 > 0.0 && c0 < cert.c) {
        return usage(format!("c0 = {c0} must lie in (0, {})", cert.c));
    }
    let m = sym.order() as i32;
    let d = sym.dim();
    let lower: f64 = sym.lower_order_bounds().iter().sum();
    let radius = (2.0 * lower / (cert.c - c0)).max(1.0);
    let per_axis: usize = match d {
        1 => 4001,
        2 => 201,
        _ => 41,
    };
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let total = per_axis.pow(d as u32);

    let phi = |t: f64, xi: &[f64]| c0 * norm(xi).powi(m) - sym.eval_unchecked(t, xi, false).re;

    let mut omega = f64::NEG_INFINITY;
    for t in sym.representative_times() {
        let mut best: Vec<(f64, [f64; MAX_DIM])> = Vec::new();
        for flat in 0..total {
            let mut xi = [0.0; MAX_DIM];
            let mut rem = flat;
            for a in xi.iter_mut().take(d) {
                *a = -radius + (rem % per_axis) as f64 * step;
                rem /= per_axis;
            }
            let v = phi(t, &xi[..d]);
            if best.len() < 8 || v > best[best.len() - 1].0 {
                best.push((v, xi));
                best.sort_by(|a, b| b.0.total_cmp(&a.0));
                best.truncate(8);
            }
        }
        best.push((phi(t, &[0.0; MAX_DIM][..d]), [0.0; MAX_DIM]));
        for (mut v, mut xi) in best {
            let mut delta = step;
            while delta > 1e-13 * radius {
                let mut improved = false;
                for a in 0..d {
                    for sgn in [-1.0, 1.0] {
                        let mut trial = xi;
                        trial[a] += sgn * delta;
                        let w = phi(t, &trial[..d]);
                        if w > v {
                            v = w;
                            xi = trial;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    delta *= 0.5;
                }
            }
            omega = omega.max(v);
        }
    }
    Ok(GardingBound { c0, omega, radius, lattice_points: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn heat() -> NonAutonomousSymbol {
        NonAutonomousSymbol::new(
            1,
            2,
            1.0,
            vec![Term { alpha: vec![2], track: CoefficientTrack::Constant(c(-1.0, 0.0)) }],
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_relative_eq!(heat().eval(0.3, &[2.0]).unwrap().re, 4.0);
        let quartic = NonAutonomousSymbol::new(
            1,
            4,
            1.0,
            vec![Term { alpha: vec![4], track: CoefficientTrack::Constant(c(1.0, 0.0)) }],
        )
        .unwrap();
        assert_eq!(quartic.eval(0.7, &[1.0]).unwrap(), c(1.0, 0.0));

        let pi = std::f64::consts::PI;
        let s = NonAutonomousSymbol::new(
            1,
            2,
            pi,
            vec![
                Term { alpha: vec![2], track: CoefficientTrack::Constant(c(-1.0, 0.0)) },
                Term {
                    alpha: vec![1],
                    track: CoefficientTrack::sample(|t| c(t.sin(), 0.0), pi, 4),
                },
            ],
        )
        .unwrap();
        let v = s.eval(pi / 2.0, &[1.0]).unwrap();
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn principal_drops_lower_order() {
        let s = NonAutonomousSymbol::new(
            1,
            4,
            1.0,
            vec![
                Term { alpha: vec![4], track: CoefficientTrack::Constant(c(1.0, 0.0)) },
                Term { alpha: vec![2], track: CoefficientTrack::sample(|t| c(-t, 0.0), 1.0, 10) },
            ],
        )
        .unwrap();
        assert_eq!(s.principal(0.5, &[2.0]).unwrap(), c(16.0, 0.0));
    }

    #[test]
    fn time_outside_horizon_is_rejected() {
        assert!(matches!(heat().eval(1.5, &[1.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn imaginary_principal_part_is_not_elliptic() {
        let s = NonAutonomousSymbol::new(
            1,
            2,
            1.0,
            vec![Term { alpha: vec![2], track: CoefficientTrack::Constant(c(0.0, 1.0)) }],
        )
        .unwrap();
        assert!(matches!(certify(&s, 16), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn garding_examples() {
        let h = heat();
        let cert = certify(&h, 16).unwrap();
        assert_eq!(cert.c, 1.0);
        assert_eq!(garding_lower_bound(&h, 0.5, &cert).unwrap().omega, 0.0);
        assert!(garding_lower_bound(&h, 1.0, &cert).is_err());
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"d":1,"m":2,"T":1.0,"coeffs":[{"alpha":[2],"re":[-1.0],"im":[0.0]}]}"#;
        let s: NonAutonomousSymbol = serde_json::from_str(json).unwrap();
        assert_eq!(s, heat());
        let back: NonAutonomousSymbol = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
