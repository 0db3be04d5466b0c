//! Closed-form solitary waves, the threshold function `g`, the critical
//! velocity ratio `kappa(b)` and the stability classifier.
//!
//! The profile of the wave with frequency pair `omega = (omega0, omega1)` is
//!
//! ```text
//! phi(x)  = phi~(x) * exp(i*theta(x))
//! phi~(x) = { 2 s^2 / (-omega1 + c*cosh(s x)) }^(1/2),   s^2 = 4 omega0 - omega1^2,
//!                                                       c   = sqrt(omega1^2 + gamma s^2)
//! theta(x) = omega1 x / 2 - (1/4) * int_{-inf}^x phi~^2
//! ```
//!
//! and the cumulative mass integral has the antiderivative
//! `(4/sqrt(gamma)) * [atan(r tanh(s x / 2)) + atan(r)]` with
//! `r = sqrt((c + omega1) / (c - omega1))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::roots::brent;

/// Tail criterion for truncating the line to a periodic box.
pub const TAIL_RATIO_LIMIT: f64 = 1e-12;

/// Default half-width of the borderline band used by [`classify`].
pub const DEFAULT_BORDERLINE_TOL: f64 = 1e-9;

/// Coupling of the quintic term together with `gamma = 1 + 16 b / 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    b: f64,
    gamma: f64,
}

impl Params {
    pub fn new(b: f64) -> Result<Self> {
        Ok(Self {
            b,
            gamma: gamma_of(b)?,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `gamma = 1 + 16 b / 3`.
pub fn gamma_of(b: f64) -> Result<f64> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::NegativeCoupling(b));
    }
    Ok(1.0 + 16.0 * b / 3.0)
}

/// A frequency pair with `omega1^2 < 4 omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    omega0: f64,
    omega1: f64,
}

impl Omega {
    pub fn new(omega0: f64, omega1: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega1.is_finite()) || !(omega1 * omega1 < 4.0 * omega0) {
            return Err(Error::OutsideOmega { omega0, omega1 });
        }
        Ok(Self { omega0, omega1 })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    /// `4 omega0 - omega1^2 > 0`.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.omega0 - self.omega1 * self.omega1
    }

    /// Decay rate `s = sqrt(4 omega0 - omega1^2)`; `|phi| ~ exp(-s|x|/2)`.
    pub fn decay_rate(&self) -> f64 {
        self.discriminant().sqrt()
    }

    pub fn shifted(&self, d0: f64, d1: f64) -> Result<Self> {
        Self::new(self.omega0 + d0, self.omega1 + d1)
    }

    pub fn norm(&self) -> f64 {
        self.omega0.hypot(self.omega1)
    }
}

/// Shape constants shared by the profile formulas.
#[derive(Debug, Clone, Copy)]
struct Shape {
    s: f64,
    c: f64,
    a: f64,
    r: f64,
    sqrt_gamma: f64,
}

impl Shape {
    fn new(omega: &Omega, params: &Params) -> Self {
        let s2 = omega.discriminant();
        let a = omega.omega1();
        let c = (a * a + params.gamma() * s2).sqrt();
        Self {
            s: s2.sqrt(),
            c,
            a,
            // (c + a) / sqrt(c^2 - a^2), written without cancellation for a < 0
            r: (c + a) / (params.gamma() * s2).sqrt(),
            sqrt_gamma: params.gamma().sqrt(),
        }
    }

    /// `ln(c cosh(y) - a)` for `y >= 0`, without overflow.
    fn log_denominator(&self, y: f64) -> f64 {
        let e = (-y).exp();
        y + (0.5 * self.c * (1.0 + e * e) - self.a * e).ln()
    }

    /// Mass accumulated on `(-inf, x]`.
    fn cumulative_mass(&self, x: f64) -> f64 {
        let y = self.s * x.abs();
        let tau = (0.5 * y).tanh();
        let scale = 4.0 / self.sqrt_gamma;
        if x <= 0.0 {
            // atan(r) - atan(r tau), with 1 - tau evaluated directly
            let e = (-y).exp();
            let one_minus_tau = 2.0 * e / (1.0 + e);
            scale * (self.r * one_minus_tau / (1.0 + self.r * self.r * tau)).atan()
        } else {
            scale * ((self.r * tau).atan() + self.r.atan())
        }
    }
}

/// Modulus of the profile, `phi~_omega(x) > 0`.
pub fn tilde_profile(omega: &Omega, params: &Params, x: f64) -> f64 {
    let sh = Shape::new(omega, params);
    let y = sh.s * x.abs();
    (0.5 * ((2.0 * sh.s * sh.s).ln() - sh.log_denominator(y))).exp()
}

/// Peak value `phi~_omega(0)`.
pub fn peak_amplitude(omega: &Omega, params: &Params) -> f64 {
    tilde_profile(omega, params, 0.0)
}

/// `int_{-inf}^x phi~_omega(eta)^2 d eta`.
pub fn cumulative_mass(omega: &Omega, params: &Params, x: f64) -> f64 {
    Shape::new(omega, params).cumulative_mass(x)
}

/// Phase `theta(x) = omega1 x / 2 - (1/4) int_{-inf}^x phi~^2`.
pub fn phase(omega: &Omega, params: &Params, x: f64) -> f64 {
    0.5 * omega.omega1() * x - 0.25 * cumulative_mass(omega, params, x)
}

/// Default box half-length `L = 60 / sqrt(4 omega0 - omega1^2)`.
pub fn default_half_length(omega: &Omega) -> f64 {
    60.0 / omega.decay_rate()
}

/// Periodic grid sized for the wave `omega` by the default half-length rule.
pub fn soliton_grid(omega: &Omega, n: usize) -> Result<Grid> {
    Grid::new(default_half_length(omega), n)
}

/// The complex profile `phi_omega` sampled on `grid`.
pub fn profile(omega: &Omega, params: &Params, grid: &Grid) -> Result<Field> {
    let sh = Shape::new(omega, params);
    let peak = tilde_profile(omega, params, 0.0);
    let edge = tilde_profile(omega, params, grid.half_length());
    let tail_ratio = edge / peak;
    if !(tail_ratio < TAIL_RATIO_LIMIT) {
        return Err(Error::GridTooShort { tail_ratio });
    }
    let log_num = (2.0 * sh.s * sh.s).ln();
    let values = grid
        .nodes()
        .map(|x| {
            let modulus = (0.5 * (log_num - sh.log_denominator(sh.s * x.abs()))).exp();
            let theta = 0.5 * sh.a * x - 0.25 * sh.cumulative_mass(x);
            Complex64::from_polar(modulus, theta)
        })
        .collect();
    Field::new(grid, values)
}

/// Threshold function `g(xi) = (2(gamma-1)/xi) atan((1 + sqrt(1+xi^2))/xi)`.
pub fn g_function(xi: f64, params: &Params) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::NonPositiveXi(xi));
    }
    Ok(g_unchecked(xi, params.gamma()))
}

fn g_unchecked(xi: f64, gamma: f64) -> f64 {
    2.0 * (gamma - 1.0) / xi * ((1.0 + (1.0 + xi * xi).sqrt()) / xi).atan()
}

/// The unique root of `g(xi) = 1`.
pub fn xi_hat(params: &Params) -> Result<f64> {
    if params.b() == 0.0 {
        return Err(Error::NoRoot("g vanishes identically when b = 0".into()));
    }
    let gamma = params.gamma();
    let f = |xi: f64| g_unchecked(xi, gamma) - 1.0;

    let mut lo = 1e-6;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NoRoot("no lower bracket for g = 1".into()));
        }
    }
    let mut hi = 1.0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoRoot("no upper bracket for g = 1".into()));
        }
    }
    let root = brent(f, lo, hi, 1e-15, 500)
        .ok_or_else(|| Error::NoRoot("Brent iteration failed for g = 1".into()))?;
    Ok(polish_root(root, gamma))
}

// Brent stops on the bracket width; a couple of secant steps push the
// residual |g - 1| to rounding level.
fn polish_root(mut xi: f64, gamma: f64) -> f64 {
    for _ in 0..3 {
        let h = 1e-7 * xi;
        let f0 = g_unchecked(xi, gamma) - 1.0;
        if f0 == 0.0 {
            break;
        }
        let slope = (g_unchecked(xi + h, gamma) - g_unchecked(xi - h, gamma)) / (2.0 * h);
        let next = xi - f0 / slope;
        if (g_unchecked(next, gamma) - 1.0).abs() < f0.abs() {
            xi = next;
        } else {
            break;
        }
    }
    xi
}

/// Critical velocity ratio `kappa = (1 + xi_hat^2 / gamma)^(-1/2)`.
pub fn kappa(params: &Params) -> Result<f64> {
    let xi = xi_hat(params)?;
    Ok(kappa_from_xi(xi, params.gamma()))
}

pub fn kappa_from_xi(xi: f64, gamma: f64) -> f64 {
    (1.0 + xi * xi / gamma).powf(-0.5)
}

fn arctan_term(omega: &Omega, params: &Params) -> f64 {
    Shape::new(omega, params).r.atan()
}

/// `Q0(phi_omega)` in closed form.
pub fn closed_q0(omega: &Omega, params: &Params) -> f64 {
    4.0 / params.gamma().sqrt() * arctan_term(omega, params)
}

/// `Q1(phi_omega)` in closed form.
pub fn closed_q1(omega: &Omega, params: &Params) -> f64 {
    let g = params.gamma();
    let root = (g * omega.discriminant()).sqrt();
    (root - 2.0 * (g - 1.0) * omega.omega1() * arctan_term(omega, params)) / g.powf(1.5)
}

/// `det d''(omega) = -4 Q1(phi) / (s (omega1^2 + gamma s^2))`, `s^2 = 4 omega0 - omega1^2`:
/// the Jacobian determinant of the closed-form pair `(Q0, Q1)`.
pub fn closed_det_d2(omega: &Omega, params: &Params) -> f64 {
    let g = params.gamma();
    let w1 = omega.omega1();
    let s2 = omega.discriminant();
    -4.0 * closed_q1(omega, params) / (s2.sqrt() * (w1 * w1 + g * s2))
}

/// `d''(omega)[0][0] = dQ0/d omega0` in closed form.
pub fn d2_00_entry(omega: &Omega, params: &Params) -> f64 {
    let w1 = omega.omega1();
    let s2 = omega.discriminant();
    -4.0 * w1 / (s2.sqrt() * (params.gamma() * s2 + w1 * w1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Borderline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub b: f64,
    pub gamma: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub kappa: Option<f64>,
    pub q1: f64,
    pub det_d2: f64,
    pub d2_00: f64,
    pub verdict: Verdict,
}

/// Stability verdict from the sign of `Q1(phi_omega)`; `|Q1| <= tol (1 + |omega|)`
/// is reported as borderline. Every wave is stable when `b = 0`.
pub fn classify(omega: &Omega, params: &Params, tol: f64) -> Result<ClassificationReport> {
    let q1 = closed_q1(omega, params);
    let (kappa, verdict) = if params.b() == 0.0 {
        (None, Verdict::Stable)
    } else {
        let band = tol * (1.0 + omega.norm());
        let verdict = if q1 > band {
            Verdict::Stable
        } else if q1 < -band {
            Verdict::Unstable
        } else {
            Verdict::Borderline
        };
        (Some(kappa(params)?), verdict)
    };
    Ok(ClassificationReport {
        b: params.b(),
        gamma: params.gamma(),
        omega0: omega.omega0(),
        omega1: omega.omega1(),
        kappa,
        q1,
        det_d2: closed_det_d2(omega, params),
        d2_00: d2_00_entry(omega, params),
        verdict,
    })
}
