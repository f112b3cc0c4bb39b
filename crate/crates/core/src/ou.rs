//! Non-autonomous Ornstein–Uhlenbeck systems
//! `∂_t u = ½tr(AAᵀ∇²)u − ⟨Bx, ∇⟩u − ½tr(B)u` and their Fourier propagators.
//!
//! The propagator acts on the Fourier side as
//! `(F U(t,s) f)(ξ) = e^{½∫tr B} e^{-q_{t,s}(ξ)/2} (F f)(R(t,s)ᵀξ)`,
//! so every operator here is a [`FourierMap`]: a linear shear of the
//! frequency variable followed by a Gaussian weight.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::evolution::{Evolution, FieldOperator};
use crate::spectral::{
    fft_axis, forward_transform, inverse_transform, project_smooth, projector_l1_constant, Field, GridSpec, Spectrum,
};

/// Square matrix written row by row in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Rows(pub DMatrix<f64>);

impl TryFrom<Vec<Vec<f64>>> for Rows {
    type Error = String;
    fn try_from(rows: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(format!("matrix must be square and non-empty, got {n} rows"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err("matrix entries must be finite".into());
        }
        Ok(Rows(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }
}

impl From<Rows> for Vec<Vec<f64>> {
    fn from(m: Rows) -> Self {
        m.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// A time-dependent matrix given by a closed form or a callable.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixTrack {
    Constant { value: Rows },
    /// `value + t·slope`
    Affine { value: Rows, slope: Rows },
    /// `value + cos(ωt)·cos + sin(ωt)·sin`
    Trig { value: Rows, cos: Rows, sin: Rows, omega: f64 },
    #[serde(skip)]
    Callable(Callable),
}

#[derive(Clone)]
pub struct Callable {
    dim: usize,
    f: Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
}

impl fmt::Debug for MatrixTrack {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            MatrixTrack::Constant { value } => f.debug_struct("Constant").field("value", &value.0).finish(),
            MatrixTrack::Affine { value, slope } => {
                f.debug_struct("Affine").field("value", &value.0).field("slope", &slope.0).finish()
            }
            MatrixTrack::Trig { value, cos, sin, omega } => f
                .debug_struct("Trig")
                .field("value", &value.0)
                .field("cos", &cos.0)
                .field("sin", &sin.0)
                .field("omega", omega)
                .finish(),
            MatrixTrack::Callable(c) => write!(f, "Callable(dim={})", c.dim),
        }
    }
}

impl MatrixTrack {
    pub fn constant(m: DMatrix<f64>) -> Self {
        MatrixTrack::Constant { value: Rows(m) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::constant(DMatrix::zeros(dim, dim))
    }

    pub fn callable(dim: usize, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MatrixTrack::Callable(Callable { dim, f: Arc::new(f) })
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixTrack::Constant { value } | MatrixTrack::Affine { value, .. } | MatrixTrack::Trig { value, .. } => {
                value.0.nrows()
            }
            MatrixTrack::Callable(c) => c.dim,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        let same = |m: &Rows| m.0.nrows() == d;
        let ok = match self {
            MatrixTrack::Constant { .. } => true,
            MatrixTrack::Affine { slope, .. } => same(slope),
            MatrixTrack::Trig { cos, sin, omega, .. } => same(cos) && same(sin) && omega.is_finite(),
            MatrixTrack::Callable(c) => {
                let m = (c.f)(0.0);
                m.nrows() == d && m.ncols() == d
            }
        };
        if !ok || d == 0 {
            return usage("matrix track components disagree in size");
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self {
            MatrixTrack::Constant { value } => value.0.clone(),
            MatrixTrack::Affine { value, slope } => &value.0 + &slope.0 * t,
            MatrixTrack::Trig { value, cos, sin, omega } => {
                &value.0 + &cos.0 * (omega * t).cos() + &sin.0 * (omega * t).sin()
            }
            MatrixTrack::Callable(c) => (c.f)(t),
        }
    }

    /// `j`-th derivative at `t`. Callables use nested fourth-order central
    /// differences with step `step`; the second value is a rounding-error
    /// estimate for that stencil (zero for closed forms).
    pub fn derivative(&self, t: f64, j: usize, step: f64) -> (DMatrix<f64>, f64) {
        if j == 0 {
            return (self.eval(t), 0.0);
        }
        let d = self.dim();
        match self {
            MatrixTrack::Constant { .. } => (DMatrix::zeros(d, d), 0.0),
            MatrixTrack::Affine { slope, .. } => {
                (if j == 1 { slope.0.clone() } else { DMatrix::zeros(d, d) }, 0.0)
            }
            MatrixTrack::Trig { cos, sin, omega, .. } => {
                let w = omega.powi(j as i32);
                let phase = omega * t + j as f64 * PI / 2.0;
                (&cos.0 * (w * phase.cos()) + &sin.0 * (w * phase.sin()), 0.0)
            }
            MatrixTrack::Callable(_) => {
                let m = central_difference(&|s| self.eval(s), t, j, step);
                let scale = self.eval(t).amax().max(1.0);
                (m, 10.0 * f64::EPSILON * scale * (3.0 / step).powi(j as i32))
            }
        }
    }

    /// True when the track is zero by construction.
    pub fn is_identically_zero(&self) -> bool {
        let z = |m: &Rows| m.0.iter().all(|&v| v == 0.0);
        match self {
            MatrixTrack::Constant { value } => z(value),
            MatrixTrack::Affine { value, slope } => z(value) && z(slope),
            MatrixTrack::Trig { value, cos, sin, .. } => z(value) && z(cos) && z(sin),
            MatrixTrack::Callable(_) => false,
        }
    }

    /// `∫_s^t tr M(τ) dτ`.
    fn trace_integral(&self, s: f64, t: f64) -> f64 {
        match self {
            MatrixTrack::Constant { value } => value.0.trace() * (t - s),
            MatrixTrack::Affine { value, slope } => value.0.trace() * (t - s) + slope.0.trace() * 0.5 * (t * t - s * s),
            MatrixTrack::Trig { value, cos, sin, omega } => {
                let w = *omega;
                let (c, sn) = if w == 0.0 {
                    (t - s, 0.0)
                } else {
                    (((w * t).sin() - (w * s).sin()) / w, ((w * s).cos() - (w * t).cos()) / w)
                };
                value.0.trace() * (t - s) + cos.0.trace() * c + sin.0.trace() * sn
            }
            MatrixTrack::Callable(_) => {
                let rule = crate::quad::composite_rule(&[(s.min(t), s.max(t))], &[], (t - s).abs() / 64.0, 16);
                let v: f64 = rule.iter().map(|&(x, w)| w * self.eval(x).trace()).sum();
                if t >= s {
                    v
                } else {
                    -v
                }
            }
        }
    }
}

fn central_difference(f: &dyn Fn(f64) -> DMatrix<f64>, t: f64, j: usize, h: f64) -> DMatrix<f64> {
    if j == 0 {
        return f(t);
    }
    let g = |s: f64| central_difference(f, s, j - 1, h);
    (g(t - 2.0 * h) - g(t + 2.0 * h) + (g(t + h) - g(t - h)) * 8.0) / (12.0 * h)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OUSystem {
    #[serde(rename = "A")]
    a: MatrixTrack,
    #[serde(rename = "B")]
    b: MatrixTrack,
    #[serde(rename = "T")]
    horizon: f64,
}

/// Local tolerance of the adaptive integrator.
pub const ODE_TOLERANCE: f64 = 1e-12;

impl OUSystem {
    pub fn new(a: MatrixTrack, b: MatrixTrack, horizon: f64) -> Result<Self> {
        a.validate()?;
        b.validate()?;
        if a.dim() != b.dim() {
            return usage(format!("A is {0}x{0} but B is {1}x{1}", a.dim(), b.dim()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return usage(format!("horizon {horizon} must be positive"));
        }
        Ok(Self { a, b, horizon })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn a(&self) -> &MatrixTrack {
        &self.a
    }

    pub fn b(&self) -> &MatrixTrack {
        &self.b
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::Domain { t, horizon: self.horizon });
        }
        Ok(())
    }

    fn check_ordered(&self, s: f64, t: f64) -> Result<()> {
        self.check_time(s)?;
        self.check_time(t)?;
        if s > t {
            return usage(format!("need s <= t, got s={s}, t={t}"));
        }
        Ok(())
    }

    pub fn trace_integral(&self, s: f64, t: f64) -> f64 {
        self.b.trace_integral(s, t)
    }

    /// `max_{0≤s≤t≤T} e^{c ∫_s^t tr B}` over a uniform 257-point time grid.
    pub fn max_trace_factor(&self, c: f64) -> f64 {
        let n = 256;
        let cum: Vec<f64> = (0..=n).map(|i| self.trace_integral(0.0, self.horizon * i as f64 / n as f64)).collect();
        let mut best: f64 = 0.0;
        let mut min_prefix = f64::INFINITY;
        for &v in &cum {
            min_prefix = min_prefix.min(c * v);
            best = best.max(c * v - min_prefix);
        }
        best.exp()
    }
}

/// Kolmogorov system on `(x, v) ∈ R^{2k}`: `A = [[0,0],[0,√2 I]]`, `B = [[0,I],[0,0]]`.
pub fn kolmogorov(block: usize, horizon: f64) -> Result<OUSystem> {
    if block == 0 {
        return usage("block dimension must be positive");
    }
    let d = 2 * block;
    let a = DMatrix::from_fn(d, d, |i, j| if i == j && i >= block { 2f64.sqrt() } else { 0.0 });
    let b = DMatrix::from_fn(d, d, |i, j| if j == i + block { 1.0 } else { 0.0 });
    OUSystem::new(MatrixTrack::constant(a), MatrixTrack::constant(b), horizon)
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) with local error control; integrates in either direction.
fn dopri5(rhs: &dyn Fn(f64, &[f64], &mut [f64]), t0: f64, t1: f64, y0: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    let n = y0.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut h = dir * span.abs().min(1e-2 * span.abs().max(1.0));
    let mut t = t0;
    let mut y = y0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    rhs(t, &y, &mut k[0]);
    let mut last_err = 0.0;
    for _ in 0..1_000_000 {
        let last = (t1 - t) * dir <= h.abs() * (1.0 + 1e-12);
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|j| DP_A[s][j] * k[j][i]).sum::<f64>();
            }
            rhs(t + DP_C[s] * h, &tmp, &mut k[s]);
            if s == 6 {
                y5.copy_from_slice(&tmp);
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            let e = h * (0..7).map(|j| DP_E[j] * k[j][i]).sum::<f64>();
            let sc = tol * (1.0 + y[i].abs().max(y5[i].abs()));
            acc += (e / sc).powi(2);
        }
        let err = (acc / n as f64).sqrt();
        last_err = err * tol;
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            std::mem::swap(&mut y, &mut y5);
            k.swap(0, 6);
            if last {
                return Ok(y);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration { message: format!("step size underflow at t={t}"), estimate: last_err });
        }
    }
    Err(Error::Integration { message: "step budget exhausted".into(), estimate: last_err })
}

fn mat(d: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, v)
}

/// `R(t,s)`: `∂_t R = B(t) R`, `R(s,s) = I`.
pub fn solve_transition(sys: &OUSystem, s: f64, t: f64) -> Result<DMatrix<f64>> {
    sys.check_time(s)?;
    sys.check_time(t)?;
    let d = sys.dim();
    let id = DMatrix::<f64>::identity(d, d);
    if s == t {
        return Ok(id);
    }
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| {
        let v = sys.b.eval(tau) * mat(d, y);
        dy.copy_from_slice(v.as_slice());
    };
    let y = dopri5(&rhs, s, t, id.as_slice().to_vec(), ODE_TOLERANCE)?;
    Ok(mat(d, &y))
}

/// `|det R(t,s) − e^{∫tr B}| / e^{∫tr B}`.
pub fn liouville_check(sys: &OUSystem, s: f64, t: f64) -> Result<f64> {
    let r = solve_transition(sys, s, t)?;
    let e = sys.trace_integral(s, t).exp();
    Ok((r.determinant() - e).abs() / e)
}

/// `Q_{t,s} = ∫_s^t R(s,τ) A(τ)A(τ)ᵀ R(s,τ)ᵀ dτ`, integrating `∂_τ R(s,τ) = −R(s,τ)B(τ)` alongside.
pub fn gram_matrix(sys: &OUSystem, s: f64, t: f64) -> Result<DMatrix<f64>> {
    sys.check_ordered(s, t)?;
    let d = sys.dim();
    if s == t {
        return Ok(DMatrix::zeros(d, d));
    }
    let dd = d * d;
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| {
        let r = mat(d, &y[..dd]);
        let a = sys.a.eval(tau);
        let dr = -(&r * sys.b.eval(tau));
        let ra = &r * a;
        let dq = &ra * ra.transpose();
        dy[..dd].copy_from_slice(dr.as_slice());
        dy[dd..].copy_from_slice(dq.as_slice());
    };
    let mut y0 = DMatrix::<f64>::identity(d, d).as_slice().to_vec();
    y0.extend(std::iter::repeat_n(0.0, dd));
    let y = dopri5(&rhs, s, t, y0, ODE_TOLERANCE)?;
    let q = mat(d, &y[dd..]);
    Ok((&q + q.transpose()) * 0.5)
}

/// `M_{t,s} = R(t,s) Q_{t,s} R(t,s)ᵀ`, so that `q_{t,s}(ξ) = ξᵀ M ξ`; obtained
/// from the Lyapunov equation `M' = BM + MBᵀ + AAᵀ`, `M(s) = 0`.
pub fn form_matrix(sys: &OUSystem, s: f64, t: f64) -> Result<DMatrix<f64>> {
    sys.check_ordered(s, t)?;
    let d = sys.dim();
    if s == t {
        return Ok(DMatrix::zeros(d, d));
    }
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| {
        let m = mat(d, y);
        let b = sys.b.eval(tau);
        let a = sys.a.eval(tau);
        let v = &b * &m + &m * b.transpose() + &a * a.transpose();
        dy.copy_from_slice(v.as_slice());
    };
    let y = dopri5(&rhs, s, t, vec![0.0; d * d], ODE_TOLERANCE)?;
    let m = mat(d, &y);
    Ok((&m + m.transpose()) * 0.5)
}

/// `q_{t,s}(ξ) = ⟨Q_{t,s} R(t,s)ᵀξ, R(t,s)ᵀξ⟩`.
pub fn quad_form(sys: &OUSystem, s: f64, t: f64, xi: &[f64]) -> Result<f64> {
    if xi.len() != sys.dim() {
        return usage("frequency dimension mismatch");
    }
    let q = gram_matrix(sys, s, t)?;
    let r = solve_transition(sys, s, t)?;
    let z = r.transpose() * DVector::from_column_slice(xi);
    Ok(z.dot(&(q * &z)))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KalmanStatus {
    Satisfied,
    /// Rank still below `d` after `k_max`; larger `k` may fill it.
    Undecided,
    /// `A ≡ 0`, so every `Ã_k` vanishes.
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanReport {
    pub rank: usize,
    pub dim: usize,
    pub status: KalmanStatus,
    /// Smallest `k` at which the rank reached `d`, else `k_max`.
    pub k_used: usize,
    /// `(k, column)` pairs of `Ã_k(T)` selected greedily as a basis of the span.
    pub spanning_columns: Vec<(usize, usize)>,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl KalmanReport {
    pub fn holds(&self) -> bool {
        self.status == KalmanStatus::Satisfied
    }
}

/// Generalized Kalman rank test: span of `Ã_k(T)`, `k = 0..=k_max`, where
/// `Ã_0(t) = A(T−t)` and `Ã_{k+1} = Ã_k' + B(T−t) Ã_k`.
///
/// `Ã_k(T)` only needs the Taylor jets of `A` and `B` at time 0, so the
/// recursion runs on truncated power series in `t − T`.
pub fn kalman_generalized(sys: &OUSystem, k_max: usize) -> Result<KalmanReport> {
    let d = sys.dim();
    let step = 1e-4 * sys.horizon;
    let mut noise: f64 = 0.0;
    let mut jet = |track: &MatrixTrack, order: usize| -> Vec<DMatrix<f64>> {
        let mut fact = 1.0;
        (0..=order)
            .map(|j| {
                if j > 0 {
                    fact *= j as f64;
                }
                let (m, err) = track.derivative(0.0, j, step);
                noise = noise.max(err / fact);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                m * (sign / fact)
            })
            .collect()
    };
    let a_jet = jet(&sys.a, k_max);
    let b_jet = jet(&sys.b, k_max);
    let b_norm: f64 = b_jet.iter().map(|m| m.norm()).sum::<f64>().max(1.0);

    let mut current = a_jet;
    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut spanning = Vec::new();
    let mut rank = 0;
    let mut k_used = k_max;
    let mut sv = Vec::new();
    let mut threshold = 0.0;
    for k in 0..=k_max {
        let at_t = &current[0];
        for c in 0..d {
            columns.push(at_t.column(c).into_owned());
        }
        let stacked = DMatrix::from_columns(&columns);
        let svd = stacked.clone().svd(false, false);
        sv = svd.singular_values.iter().copied().collect();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        threshold = (d as f64 * f64::EPSILON * smax * 1e3).max(noise * b_norm.powi(k as i32 + 1));
        rank = sv.iter().filter(|&&s| s > threshold).count();
        for c in 0..d {
            let mut v = at_t.column(c).into_owned();
            for e in &basis {
                let proj = e.dot(&v);
                v -= e * proj;
            }
            let nv = v.norm();
            if nv > threshold && basis.len() < rank {
                basis.push(v / nv);
                spanning.push((k, c));
            }
        }
        if rank == d {
            k_used = k;
            break;
        }
        if k < k_max {
            let len = current.len();
            let next: Vec<DMatrix<f64>> = (0..len - 1)
                .map(|j| {
                    let mut m = &current[j + 1] * (j + 1) as f64;
                    for i in 0..=j {
                        m += &b_jet[i] * &current[j - i];
                    }
                    m
                })
                .collect();
            current = next;
        }
    }
    let status = if rank == d {
        KalmanStatus::Satisfied
    } else if sys.a.is_identically_zero() {
        KalmanStatus::Violated
    } else {
        KalmanStatus::Undecided
    };
    Ok(KalmanReport { rank, dim: d, status, k_used, spanning_columns: spanning, singular_values: sv, threshold })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShearMode {
    /// Discrete Fourier series summation at the sheared points.
    #[default]
    Exact,
    /// Twofold zero-padding plus six-point Lagrange interpolation per axis.
    Oversampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearOptions {
    pub mode: ShearMode,
    /// Largest admissible relative L² mass of output modes whose sheared
    /// argument lies beyond the Nyquist box.
    pub spill_tolerance: f64,
}

impl Default for ShearOptions {
    fn default() -> Self {
        Self { mode: ShearMode::Exact, spill_tolerance: 1e-8 }
    }
}

/// `f ↦ F⁻¹( c · e^{-ξᵀMξ/2} · (F f)(Lξ) )` on a fixed grid.
#[derive(Clone, Debug)]
pub struct FourierMap {
    grid: GridSpec,
    shear: DMatrix<f64>,
    form: DMatrix<f64>,
    prefactor: f64,
    opts: ShearOptions,
}

impl FourierMap {
    pub fn new(grid: GridSpec, shear: DMatrix<f64>, form: DMatrix<f64>, prefactor: f64, opts: ShearOptions) -> Result<Self> {
        let d = grid.dim();
        if shear.shape() != (d, d) || form.shape() != (d, d) {
            return usage(format!("shear and form must be {d}x{d}"));
        }
        Ok(Self { grid, shear, form, prefactor, opts })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Result and spill (relative L² norm of modes evaluated beyond Nyquist).
    pub fn apply_with_spill(&self, f: &Field) -> Result<(Field, f64)> {
        if f.grid() != &self.grid {
            return usage("field grid does not match the operator grid");
        }
        let g = &self.grid;
        let d = g.dim();
        let mut values = match self.opts.mode {
            ShearMode::Exact => match triangular_order(&self.shear) {
                Some(order) => self.sheared_triangular(f, &order),
                None => self.sheared_direct(f),
            },
            ShearMode::Oversampled => self.sheared_oversampled(f)?,
        };
        let nyq = g.nyquist() * (1.0 + 1e-12);
        let (mut total, mut outside) = (0.0, 0.0);
        for (i, v) in values.iter_mut().enumerate() {
            let xi = DVector::from_column_slice(&g.freq(i)[..d]);
            let w = self.prefactor * (-0.5 * xi.dot(&(&self.form * &xi))).exp();
            *v *= w;
            let e = v.norm_sqr();
            total += e;
            if (&self.shear * &xi).iter().any(|z| z.abs() > nyq) {
                outside += e;
            }
        }
        let spill = if total > 0.0 { (outside / total).sqrt() } else { 0.0 };
        Ok((inverse_transform(&Spectrum::new(*g, values)?), spill))
    }

    fn sheared_triangular(&self, f: &Field, order: &[usize]) -> Vec<Complex64> {
        let g = &self.grid;
        let n = g.points();
        let h = g.spacing();
        let l = &self.shear;
        let mut values = f.values().to_vec();
        for (pos, &b) in order.iter().enumerate() {
            let diag = l[(b, b)];
            if diag == 1.0 {
                fft_axis(&mut values, g, b, |_, _| {}, true);
                for (i, v) in values.iter_mut().enumerate() {
                    let k = g.unravel(i)[b];
                    *v *= if k % 2 == 0 { h } else { -h };
                }
            } else {
                let table: Vec<Complex64> = (0..n * n)
                    .map(|kj| {
                        let (k, j) = (kj / n, kj % n);
                        Complex64::from_polar(h, -diag * g.frequency(k) * g.coordinate(j))
                    })
                    .collect();
                dense_axis(&mut values, g, b, &table);
            }
            let later = &order[pos + 1..];
            if later.iter().all(|&a| l[(a, b)] == 0.0) {
                continue;
            }
            for (i, v) in values.iter_mut().enumerate() {
                let idx = g.unravel(i);
                let shift: f64 = later.iter().map(|&a| l[(a, b)] * g.coordinate(idx[a])).sum();
                *v *= Complex64::from_polar(1.0, -g.frequency(idx[b]) * shift);
            }
        }
        values
    }

    fn sheared_direct(&self, f: &Field) -> Vec<Complex64> {
        let g = &self.grid;
        let d = g.dim();
        let n = g.points();
        let len = g.len();
        let lt = self.shear.transpose();
        // tables[b][k * len + x] = e^{-i ξ_k (Lᵀx)_b}
        let tables: Vec<Vec<Complex64>> = (0..d)
            .map(|b| {
                let proj: Vec<f64> = (0..len)
                    .map(|x| {
                        let p = g.point(x);
                        (0..d).map(|a| lt[(b, a)] * p[a]).sum()
                    })
                    .collect();
                (0..n).flat_map(|k| proj.iter().map(move |&y| Complex64::from_polar(1.0, -g.frequency(k) * y))).collect()
            })
            .collect();
        let vol = g.cell_volume();
        let fv = f.values();
        (0..len)
            .into_par_iter()
            .map(|kf| {
                let k = g.unravel(kf);
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, &fx) in fv.iter().enumerate() {
                    if fx == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut p = fx;
                    for (b, t) in tables.iter().enumerate() {
                        p *= t[k[b] * len + x];
                    }
                    acc += p;
                }
                acc * vol
            })
            .collect()
    }

    fn sheared_oversampled(&self, f: &Field) -> Result<Vec<Complex64>> {
        let g = &self.grid;
        let d = g.dim();
        let n = g.points();
        let big = GridSpec::new(d, 2.0 * g.half_length(), 2 * n)?;
        let mut padded = Field::zeros(big);
        for (i, v) in f.values().iter().enumerate() {
            let idx = g.unravel(i);
            let mut j = [0usize; crate::spectral::MAX_DIM];
            for a in 0..d {
                j[a] = idx[a] + n / 2;
            }
            padded.values_mut()[big.ravel(&j[..d])] = *v;
        }
        let spec = forward_transform(&padded);
        let dk = big.frequency_spacing();
        let m = 2 * n as i64;
        let sv = spec.values();
        let out = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let xi = DVector::from_column_slice(&g.freq(i)[..d]);
                let eta = &self.shear * xi;
                let mut base = [0i64; crate::spectral::MAX_DIM];
                let mut weights = [[0.0; 6]; crate::spectral::MAX_DIM];
                for a in 0..d {
                    let u = eta[a] / dk;
                    let fl = u.floor() as i64;
                    base[a] = fl - 2;
                    weights[a] = lagrange6(u - (fl - 2) as f64);
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for corner in 0..6usize.pow(d as u32) {
                    let mut rem = corner;
                    let mut w = 1.0;
                    let mut idx = [0usize; crate::spectral::MAX_DIM];
                    for a in (0..d).rev() {
                        let o = rem % 6;
                        rem /= 6;
                        w *= weights[a][o];
                        idx[a] = (base[a] + o as i64).rem_euclid(m) as usize;
                    }
                    acc += sv[big.ravel(&idx[..d])] * w;
                }
                acc
            })
            .collect();
        Ok(out)
    }
}

/// Lagrange weights on nodes `0..6` at position `u`.
fn lagrange6(u: f64) -> [f64; 6] {
    let mut w = [1.0; 6];
    for (i, wi) in w.iter_mut().enumerate() {
        for j in 0..6 {
            if j != i {
                *wi *= (u - j as f64) / (i as f64 - j as f64);
            }
        }
    }
    w
}

/// Axis processing order that makes the shear separable, if any: each axis
/// may only couple to axes processed after it.
fn triangular_order(l: &DMatrix<f64>) -> Option<Vec<usize>> {
    let d = l.nrows();
    let lower = (0..d).all(|a| (a + 1..d).all(|b| l[(a, b)] == 0.0));
    if lower {
        return Some((0..d).collect());
    }
    let upper = (0..d).all(|a| (0..a).all(|b| l[(a, b)] == 0.0));
    upper.then(|| (0..d).rev().collect())
}

/// Dense transform along one axis: `out[k] = Σ_j table[k n + j] in[j]`.
fn dense_axis(values: &mut [Complex64], grid: &GridSpec, axis: usize, table: &[Complex64]) {
    let n = grid.points();
    let stride = n.pow((grid.dim() - 1 - axis) as u32);
    let lines = values.len() / n;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for line in 0..lines {
        let base = (line / stride) * n * stride + line % stride;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = values[base + j * stride];
        }
        for k in 0..n {
            let row = &table[k * n..(k + 1) * n];
            values[base + k * stride] = row.iter().zip(&buf).map(|(t, b)| t * b).sum();
        }
    }
}

impl FieldOperator for FourierMap {
    fn apply(&self, f: &Field) -> Result<Field> {
        let (out, spill) = self.apply_with_spill(f)?;
        if spill > self.opts.spill_tolerance {
            return Err(Error::Aliasing { spill, tolerance: self.opts.spill_tolerance });
        }
        Ok(out)
    }
}

/// `U(t,s)` of the system as a [`FourierMap`] on `grid`.
pub fn propagator_map(sys: &OUSystem, grid: GridSpec, s: f64, t: f64, opts: ShearOptions) -> Result<FourierMap> {
    sys.check_ordered(s, t)?;
    if grid.dim() != sys.dim() {
        return usage(format!("system dimension {} vs grid dimension {}", sys.dim(), grid.dim()));
    }
    let r = solve_transition(sys, s, t)?;
    let m = form_matrix(sys, s, t)?;
    let c = (0.5 * sys.trace_integral(s, t)).exp();
    FourierMap::new(grid, r.transpose(), m, c, opts)
}

pub fn ou_propagate(sys: &OUSystem, s: f64, t: f64, f: &Field, opts: ShearOptions) -> Result<Field> {
    if s == t {
        sys.check_time(s)?;
        return Ok(f.clone());
    }
    propagator_map(sys, *f.grid(), s, t, opts)?.apply(f)
}

/// Minimum over sampled `0 ≤ s < t ≤ ε̃` of the smallest eigenvalue of the
/// form matrix; fails when `q_{t,s}` is not positive definite somewhere.
pub fn verify_window(sys: &OUSystem, window: f64) -> Result<f64> {
    if !(window > 0.0) {
        return usage(format!("window {window} must be positive"));
    }
    let top = window.min(sys.horizon);
    let n = 8;
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..=n {
            let (s, t) = (top * i as f64 / n as f64, top * j as f64 / n as f64);
            let m = form_matrix(sys, s, t)?;
            let e = min_eigenvalue(&m);
            if !(e > 1e-13 * m.amax()) {
                return Err(Error::Hypothesis(format!(
                    "q_{{t,s}} not positive definite at s={s}, t={t} (min eigenvalue {e:e})"
                )));
            }
            worst = worst.min(e);
        }
    }
    Ok(worst)
}

/// The OU evolution family on a grid, usable wherever an [`Evolution`] is expected.
#[derive(Clone, Debug)]
pub struct OUPropagator {
    sys: OUSystem,
    grid: GridSpec,
    opts: ShearOptions,
    window: f64,
}

impl OUPropagator {
    /// Checks positive definiteness of `q_{t,s}` on `[0, window]`; the
    /// horizon of the family is `min(window, T)`.
    pub fn new(sys: OUSystem, grid: GridSpec, window: f64, opts: ShearOptions) -> Result<Self> {
        if grid.dim() != sys.dim() {
            return usage(format!("system dimension {} vs grid dimension {}", sys.dim(), grid.dim()));
        }
        verify_window(&sys, window)?;
        let window = window.min(sys.horizon);
        Ok(Self { sys, grid, opts, window })
    }

    pub fn system(&self) -> &OUSystem {
        &self.sys
    }

    pub fn options(&self) -> &ShearOptions {
        &self.opts
    }

    pub fn propagate(&self, s: f64, t: f64, f: &Field) -> Result<Field> {
        self.step(s, t)?.apply(f)
    }
}

impl Evolution for OUPropagator {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn horizon(&self) -> f64 {
        self.window
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.window]
    }

    fn step(&self, s: f64, t: f64) -> Result<Box<dyn FieldOperator + '_>> {
        if t > self.window * (1.0 + 1e-12) {
            return Err(Error::Domain { t, horizon: self.window });
        }
        Ok(Box::new(propagator_map(&self.sys, self.grid, s, t, self.opts)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    #[serde(with = "crate::report::ext")]
    pub bound: f64,
    #[serde(with = "crate::report::ext_vec")]
    pub ratios: Vec<f64>,
    #[serde(with = "crate::report::ext")]
    pub max_ratio_over_bound: f64,
    pub pass: bool,
}

fn norm_report(bound: f64, ratios: Vec<f64>) -> NormBoundReport {
    let worst = ratios.iter().map(|r| r / bound).fold(0.0, f64::max);
    NormBoundReport { bound, pass: worst <= 1.0 + 1e-10, ratios, max_ratio_over_bound: worst }
}

fn conj_exponent_inv(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        1.0 - 1.0 / p
    }
}

/// `‖U(t,s) f‖_p ≤ e^{(1/2 − 1/p′)∫_s^t tr B} ‖f‖_p` on every sample.
pub fn norm_bound_check(
    sys: &OUSystem,
    s: f64,
    t: f64,
    p: f64,
    samples: &[Field],
    opts: ShearOptions,
) -> Result<NormBoundReport> {
    if !(p >= 1.0) {
        return usage(format!("p = {p} must be at least 1"));
    }
    let bound = ((0.5 - conj_exponent_inv(p)) * sys.trace_integral(s, t)).exp();
    let ratios = samples
        .iter()
        .map(|f| Ok(ou_propagate(sys, s, t, f, opts)?.norm(p) / f.norm(p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(norm_report(bound, ratios))
}

/// `A_{q,Λ} f = F⁻¹(e^{-q/2} (F f)(Λᵀ·))` with `q(ξ) = ⟨QΛᵀξ, Λᵀξ⟩`; returns
/// `(‖A f‖_p / ‖f‖_p, |det Λ|^{-1/p′})`.
pub fn shear_norm_ratio(f: &Field, lambda: &DMatrix<f64>, q: &DMatrix<f64>, p: f64, opts: ShearOptions) -> Result<(f64, f64)> {
    let lt = lambda.transpose();
    let form = lambda * q * &lt;
    let map = FourierMap::new(*f.grid(), lt, form, 1.0, opts)?;
    let out = map.apply(f)?;
    let bound = lambda.determinant().abs().powf(-conj_exponent_inv(p));
    Ok((out.norm(p) / f.norm(p), bound))
}

/// `min_{|u|_∞ = 1} uᵀMu` for symmetric positive semidefinite `M`, by
/// enumerating the active sets of the box-constrained problem on each face.
pub fn min_form_on_cube_boundary(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut best = f64::INFINITY;
    for face in 0..d {
        let others: Vec<usize> = (0..d).filter(|&b| b != face).collect();
        let r = others.len();
        for code in 0..3usize.pow(r as u32) {
            let mut state = vec![0i8; r];
            let mut rem = code;
            for s in state.iter_mut() {
                *s = (rem % 3) as i8 - 1;
                rem /= 3;
            }
            let mut u = DVector::zeros(d);
            u[face] = 1.0;
            let free: Vec<usize> = (0..r).filter(|&i| state[i] == 0).collect();
            for (i, &b) in others.iter().enumerate() {
                if state[i] != 0 {
                    u[b] = state[i] as f64;
                }
            }
            if !free.is_empty() {
                let fi: Vec<usize> = free.iter().map(|&i| others[i]).collect();
                let a = DMatrix::from_fn(fi.len(), fi.len(), |i, j| m[(fi[i], fi[j])]);
                let rhs = DVector::from_fn(fi.len(), |i, _| -(m.row(fi[i]) * &u)[0]);
                let Ok(y) = a.svd(true, true).solve(&rhs, 1e-14) else { continue };
                if y.iter().any(|v| v.abs() > 1.0 + 1e-12) {
                    continue;
                }
                for (i, &b) in fi.iter().enumerate() {
                    u[b] = y[i].clamp(-1.0, 1.0);
                }
            }
            best = best.min(u.dot(&(m * &u)));
        }
    }
    best.max(0.0)
}

/// `ln ‖(Id − Q_{λ/(2√d)}) U(t,s)‖_{L²→L²}` with `Q_μ` the sharp cube cutoff.
///
/// On `L²` the prefactor and the Jacobian of the shear cancel by Liouville,
/// leaving `sup_{|ξ|_∞ > μ} e^{-q_{t,s}(ξ)/2} = e^{-μ² min_{|u|_∞=1} q(u) / 2}`.
pub fn ln_l2_dissipation(sys: &OUSystem, lambda: f64, s: f64, t: f64) -> Result<f64> {
    let m = form_matrix(sys, s, t)?;
    let mu = lambda / (2.0 * (sys.dim() as f64).sqrt());
    Ok(-0.5 * mu * mu * min_form_on_cube_boundary(&m))
}

/// Envelope `‖(Id − Q) U(t,s)‖_{L²} ≤ c₀ e^{−c₁ (t−s)^{m₁} λ²}` fitted on samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OUDissipationFit {
    pub c0: f64,
    pub c1: f64,
    pub m1: f64,
    pub rms_residual: f64,
    /// `(λ, s, t, ln norm)`
    pub samples: Vec<(f64, f64, f64, f64)>,
}

pub fn fit_ou_dissipation(sys: &OUSystem, lambdas: &[f64], pairs: &[(f64, f64)]) -> Result<OUDissipationFit> {
    let mut samples = Vec::new();
    for &(s, t) in pairs {
        if !(t > s) {
            return usage(format!("dissipation pairs need s < t, got ({s}, {t})"));
        }
        for &l in lambdas {
            if !(l > 0.0) {
                return usage(format!("λ = {l} must be positive"));
            }
            samples.push((l, s, t, ln_l2_dissipation(sys, l, s, t)?));
        }
    }
    if samples.len() < 3 {
        return usage("need at least three (λ, s, t) samples");
    }
    let profile = |m1: f64| -> (f64, f64, f64) {
        let xs: Vec<f64> = samples.iter().map(|&(l, s, t, _)| (t - s).powf(m1) * l * l).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = samples.iter().map(|s| s.3).sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&samples).map(|(x, s)| (x - mx) * (s.3 - my)).sum();
        let c1 = if sxx > 0.0 { (-sxy / sxx).max(0.0) } else { 0.0 };
        let b = my + c1 * mx;
        let rms = (xs.iter().zip(&samples).map(|(x, s)| (s.3 - (b - c1 * x)).powi(2)).sum::<f64>() / n).sqrt();
        (rms, c1, b)
    };
    let mut best_m = 0.5;
    let mut best = profile(best_m);
    let mut step = 0.05;
    let (mut lo, mut hi) = (0.5, 8.0);
    for _ in 0..4 {
        let mut m = lo;
        while m <= hi + 1e-12 {
            let cand = profile(m);
            if cand.0 < best.0 {
                best = cand;
                best_m = m;
            }
            m += step;
        }
        lo = (best_m - step).max(0.5);
        hi = best_m + step;
        step /= 20.0;
    }
    let (rms, c1, _) = best;
    let b = samples.iter().map(|&(l, s, t, y)| y + c1 * (t - s).powf(best_m) * l * l).fold(f64::NEG_INFINITY, f64::max);
    Ok(OUDissipationFit { c0: b.exp(), c1, m1: best_m, rms_residual: rms, samples })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OUDissipationBound {
    pub bound: f64,
    /// `c₀ e^{−c₁(t−s)^{m₁}λ²}`
    pub l2_bound: f64,
    /// `M_p` for `p ≤ 2`, `N_p` for `p ≥ 2`.
    pub factor: f64,
    /// `1 + ‖F⁻¹χ₁‖₁`
    pub k: f64,
}

/// `‖(Id − P_λ) U(t,s)‖_{L^p}` bound obtained by interpolating the `L²`
/// envelope against the trivial `L¹`/`L^∞` bounds.
pub fn ou_dissipation_constants(
    sys: &OUSystem,
    fit: Option<&OUDissipationFit>,
    p: f64,
    lambda: f64,
    s: f64,
    t: f64,
) -> Result<OUDissipationBound> {
    let Some(fit) = fit else {
        return usage("an L² dissipation fit is required");
    };
    if !(p > 1.0 && p.is_finite()) {
        return usage(format!("p = {p} must lie in (1, ∞)"));
    }
    sys.check_ordered(s, t)?;
    let l2 = fit.c0 * (-fit.c1 * (t - s).powf(fit.m1) * lambda * lambda).exp();
    let k = 1.0 + projector_l1_constant(sys.dim())?;
    let trace = sys.max_trace_factor(1.0 / p - 0.5);
    let (factor, bound) = if p <= 2.0 {
        let f = k.powf(2.0 / p - 1.0) * trace;
        (f, f * l2.powf(2.0 - 2.0 / p))
    } else {
        let f = k.powf(1.0 - 2.0 / p) * trace;
        (f, f * l2.powf(2.0 / p))
    };
    Ok(OUDissipationBound { bound, l2_bound: l2, factor, k })
}

/// Checks `‖(Id − P_λ) U(t,s) f‖_p ≤ bound ‖f‖_p` on samples.
pub fn verify_ou_dissipation(
    prop: &OUPropagator,
    fit: &OUDissipationFit,
    p: f64,
    lambda: f64,
    s: f64,
    t: f64,
    samples: &[Field],
) -> Result<NormBoundReport> {
    let b = ou_dissipation_constants(&prop.sys, Some(fit), p, lambda, s, t)?;
    let ratios = samples
        .iter()
        .map(|f| {
            let u = prop.propagate(s, t, f)?;
            let hi = u.sub(&project_smooth(&u, lambda)?)?;
            Ok(hi.norm(p) / f.norm(p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(norm_report(b.bound, ratios))
}
