//! Modulation analysis around the orbit `{T(theta) phi_omega}`: generators of
//! the symmetry group, modulation parameters `alpha(u)`, the unstable direction
//! `psi`, the functionals `A`, `q`, `P`, `Lambda`, and the orbital distance.
//!
//! Pairings against the (translated) profile are evaluated in Fourier space,
//! where `T(alpha)` is diagonal, so each Newton step costs `O(N)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{self, Hessian2, ThetaPair};
use crate::grid::{dot_l2, Field, Grid};
use crate::roots::{brent, golden_max};
use crate::waves::{self, Omega, Params};

/// `T_0' u = i u`, `T_1' u = -u_x`.
pub fn generator(j: usize, u: &Field) -> Field {
    match j {
        0 => u.times_i(),
        1 => u.derivative().scale_real(-1.0),
        _ => panic!("generator index must be 0 or 1, got {j}"),
    }
}

/// Upper bound on Newton iterations for `alpha(u)`.
pub const ALPHA_MAX_ITER: usize = 50;
/// Orthogonality defects are accepted below this multiple of `||u||_{L2} ||phi||_{H1}`.
pub const ALPHA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    /// Phase, normalized to `(-pi, pi]`.
    pub alpha0: f64,
    /// Shift, on the periodic circle `[-L, L)`.
    pub alpha1: f64,
    pub residuals: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
    /// Smallest eigenvalue of `H(u)` at the solution.
    pub h_min_eigenvalue: f64,
}

impl ModulationState {
    pub fn theta(&self) -> ThetaPair {
        ThetaPair::new(self.alpha0, self.alpha1)
    }
}

fn wrap_phase(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

fn wrap_shift(s: f64, half_length: f64) -> f64 {
    (s + half_length).rem_euclid(2.0 * half_length) - half_length
}

/// The orbit of one profile on one grid.
#[derive(Debug, Clone)]
pub struct Orbit {
    omega: Omega,
    params: Params,
    phi: Field,
    phi_spec: Vec<Complex64>,
    phi_h1: f64,
    tube_radius: f64,
}

impl Orbit {
    pub fn new(omega: &Omega, params: &Params, grid: &Grid) -> Result<Self> {
        let phi = waves::profile(omega, params, grid)?;
        Ok(Self::from_profile(omega, params, phi))
    }

    pub fn from_profile(omega: &Omega, params: &Params, phi: Field) -> Self {
        let phi_h1 = phi.norm_h1();
        Self {
            omega: *omega,
            params: *params,
            phi_spec: phi.spectrum(),
            phi,
            phi_h1,
            tube_radius: 0.5 * phi_h1,
        }
    }

    /// Overrides the default tube radius `||phi||_{H1} / 2`.
    pub fn with_tube_radius(mut self, radius: f64) -> Self {
        self.tube_radius = radius;
        self
    }

    pub fn omega(&self) -> &Omega {
        &self.omega
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    fn check_grid(&self, u: &Field) -> Result<()> {
        if u.grid() == self.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Weighted spectral products `c_k = w u_k conj(phi_k) e^{-i a0} e^{i k a1}`.
    fn products(&self, u_spec: &[Complex64], theta: &ThetaPair) -> Vec<Complex64> {
        let w = self.grid().parseval_weight();
        let rot = Complex64::from_polar(w, -theta.theta0());
        u_spec
            .iter()
            .zip(&self.phi_spec)
            .zip(self.grid().wavenumbers())
            .map(|((u, p), &k)| rot * u * p.conj() * Complex64::from_polar(1.0, k * theta.theta1()))
            .collect()
    }

    /// `sum k^m c_k` for `m = 0, 1, 2`.
    fn moments(&self, u_spec: &[Complex64], theta: &ThetaPair) -> [Complex64; 3] {
        let mut m = [Complex64::new(0.0, 0.0); 3];
        for (c, &k) in self.products(u_spec, theta).iter().zip(self.grid().wavenumbers()) {
            m[0] += c;
            m[1] += c * k;
            m[2] += c * k * k;
        }
        m
    }

    /// `F_j = (T_j' u, T(alpha) phi)` and `h_jk = (T_j' u, T(alpha) T_k' phi)`
    /// (the latter is also the Jacobian `dF_j / d alpha_k`).
    fn conditions(&self, u_spec: &[Complex64], theta: &ThetaPair) -> ([f64; 2], [[f64; 2]; 2]) {
        let [m0, m1, m2] = self.moments(u_spec, theta);
        let f = [-m0.im, m1.im];
        let h = [[m0.re, -m1.re], [-m1.re, m2.re]];
        (f, h)
    }

    /// The matrix `H(u)` at the given parameters.
    pub fn h_matrix(&self, u: &Field, theta: &ThetaPair) -> Result<Hessian2> {
        self.check_grid(u)?;
        Ok(Hessian2::from_symmetric(self.conditions(&u.spectrum(), theta).1))
    }

    /// Best grid shift from an FFT cross-correlation, phase from the argument
    /// of the resulting pairing; `weight(k)` selects L2 (1) or H1 (1 + k^2).
    fn coarse_alignment(&self, u_spec: &[Complex64], h1: bool) -> (ThetaPair, Complex64) {
        let grid = self.grid();
        let n = grid.len();
        let w = grid.parseval_weight();
        let mut corr: Vec<Complex64> = u_spec
            .iter()
            .zip(&self.phi_spec)
            .zip(grid.wavenumbers())
            .map(|((u, p), &k)| {
                let weight = if h1 { 1.0 + k * k } else { 1.0 };
                u * p.conj() * weight
            })
            .collect();
        // grid.inverse normalizes by 1/N; undo it to get the plain sums
        grid.inverse(&mut corr);
        let (best, _) = corr
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (m, z)| {
                if z.norm() > acc.1 {
                    (m, z.norm())
                } else {
                    acc
                }
            });
        let c = corr[best] * (n as f64) * w;
        let shift = wrap_shift(best as f64 * grid.spacing(), grid.half_length());
        (ThetaPair::new(c.arg(), shift), c)
    }

    /// `||u - T(theta) phi||_{H1}` summed directly over Fourier modes.
    fn h1_distance(&self, u_spec: &[Complex64], theta: &ThetaPair) -> f64 {
        let grid = self.grid();
        let rot = Complex64::from_polar(1.0, theta.theta0());
        let sum: f64 = u_spec
            .iter()
            .zip(&self.phi_spec)
            .zip(grid.wavenumbers())
            .map(|((u, p), &k)| {
                let d = u - rot * p * Complex64::from_polar(1.0, -k * theta.theta1());
                (1.0 + k * k) * d.norm_sqr()
            })
            .sum();
        (sum * grid.parseval_weight()).sqrt()
    }

    /// Newton iteration on `(T_j' u, T(alpha) phi) = 0`, started from the best
    /// cross-correlation shift; steps are halved while the residual grows.
    pub fn solve_alpha(&self, u: &Field) -> Result<ModulationState> {
        self.check_grid(u)?;
        let u_spec = u.spectrum();
        let (mut theta, _) = self.coarse_alignment(&u_spec, false);
        let start = self.h1_distance(&u_spec, &theta);
        if start > self.tube_radius {
            return Err(Error::NotInTube {
                distance: start,
                radius: self.tube_radius,
            });
        }
        let tol = ALPHA_TOL * u.norm_l2().max(f64::MIN_POSITIVE) * self.phi_h1;
        let norm = |f: &[f64; 2]| f[0].hypot(f[1]);
        let (mut f, mut h) = self.conditions(&u_spec, &theta);
        for iteration in 0..=ALPHA_MAX_ITER {
            if f[0].abs() <= tol && f[1].abs() <= tol {
                let hm = Hessian2::from_symmetric(h);
                return Ok(ModulationState {
                    alpha0: wrap_phase(theta.theta0()),
                    alpha1: wrap_shift(theta.theta1(), self.grid().half_length()),
                    residuals: f,
                    converged: true,
                    iterations: iteration,
                    h_min_eigenvalue: hm.eigenvalues[0],
                });
            }
            if iteration == ALPHA_MAX_ITER {
                break;
            }
            let step = Hessian2::from_symmetric(h)
                .solve(f)
                .ok_or_else(|| Error::SingularH(h[0][0] * h[1][1] - h[0][1] * h[1][0]))?;
            let mut damping = 1.0;
            let current = norm(&f);
            loop {
                let trial = ThetaPair::new(
                    theta.theta0() - damping * step[0],
                    theta.theta1() - damping * step[1],
                );
                let (ft, ht) = self.conditions(&u_spec, &trial);
                if norm(&ft) < current || damping < 1e-6 {
                    theta = trial;
                    f = ft;
                    h = ht;
                    break;
                }
                damping *= 0.5;
            }
        }
        Err(Error::NoConvergence {
            what: "modulation parameters",
            iterations: ALPHA_MAX_ITER,
            residual: norm(&f),
        })
    }

    /// `a_j(u) = sum_k g_jk T(alpha) T_k' phi` with `[g_jk] = H(u)^{-1}`.
    pub fn a_fields(&self, u: &Field, state: &ModulationState) -> Result<[Field; 2]> {
        let h = self.h_matrix(u, &state.theta())?;
        let det = h.det();
        let scale = h.entries.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::SingularH(det));
        }
        let m = &h.entries;
        let g = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let tphi = functionals::translate(&state.theta(), &self.phi);
        let basis = [generator(0, &tphi), generator(1, &tphi)];
        let a = |j: usize| {
            basis[0]
                .scale_real(g[j][0])
                .add_scaled(&basis[1], g[j][1])
        };
        Ok([a(0), a(1)])
    }

    /// `inf_theta ||u - T(theta) phi||_{H1}` over the circle of shifts: FFT
    /// scan over grid shifts, golden-section refinement within one cell, then
    /// Newton on the stationarity condition. The phase is optimal in closed form.
    pub fn orbital_distance(&self, u: &Field) -> Result<(f64, ThetaPair)> {
        self.check_grid(u)?;
        let grid = self.grid();
        let u_spec = u.spectrum();
        let (coarse, _) = self.coarse_alignment(&u_spec, true);
        let w = grid.parseval_weight();
        let weighted: Vec<Complex64> = u_spec
            .iter()
            .zip(&self.phi_spec)
            .zip(grid.wavenumbers())
            .map(|((u, p), &k)| u * p.conj() * (1.0 + k * k) * w)
            .collect();
        let ks = grid.wavenumbers();
        // C(s) and its first two s-derivatives
        let pairing = |s: f64| -> [Complex64; 3] {
            let mut c = [Complex64::new(0.0, 0.0); 3];
            for (z, &k) in weighted.iter().zip(ks) {
                let t = z * Complex64::from_polar(1.0, k * s);
                c[0] += t;
                c[1] += t * Complex64::new(0.0, k);
                c[2] -= t * k * k;
            }
            c
        };
        let h = grid.spacing();
        let s0 = coarse.theta1();
        let mut s = golden_max(|s| pairing(s)[0].norm(), s0 - h, s0 + h, 1e-6 * h);
        for _ in 0..8 {
            let [c, dc, ddc] = pairing(s);
            let f = (dc * c.conj()).re;
            let df = dc.norm_sqr() + (ddc * c.conj()).re;
            if df >= 0.0 {
                break;
            }
            let ds = -f / df;
            if !ds.is_finite() || ds.abs() > h {
                break;
            }
            s += ds;
            if ds.abs() < 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        let c = pairing(s)[0];
        let theta = ThetaPair::new(c.arg(), wrap_shift(s, grid.half_length()));
        Ok((self.h1_distance(&u_spec, &theta), theta))
    }
}

/// `<S''_omega(phi) v, v>` by a Richardson-extrapolated second difference of
/// the action (step `1e-3`), valid because `S'_omega(phi) = 0`.
pub fn second_variation(omega: &Omega, params: &Params, phi: &Field, v: &Field) -> Result<f64> {
    const STEP: f64 = 1e-3;
    let s0 = functionals::action(omega, phi, params)?;
    let diff = |h: f64| -> Result<f64> {
        let plus = functionals::action(omega, &phi.add_scaled(v, h), params)?;
        let minus = functionals::action(omega, &phi.add_scaled(v, -h), params)?;
        Ok((plus - 2.0 * s0 + minus) / (h * h))
    };
    let coarse = diff(STEP)?;
    let fine = diff(0.5 * STEP)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Default step in `omega` for the profile derivatives `w_j`.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c0: f64,
    pub c1: f64,
    /// `<Q_j'(phi), psi> / (||Q_j'(phi)|| ||psi||)`.
    pub q0_pairing: f64,
    pub q1_pairing: f64,
    pub second_variation: f64,
}

#[derive(Debug, Clone)]
pub struct UnstableDirection {
    /// `orientation * (phi + c0 w0 + c1 w1)`.
    pub psi: Field,
    pub c: [f64; 2],
    /// `+1` or `-1`, chosen so that `<K'_omega(phi), psi> > 0`.
    pub orientation: f64,
    pub certificate: Certificate,
    pub phi_second_variation: f64,
    pub hessian: Hessian2,
}

/// `w_j = d phi / d omega_j` by Richardson-extrapolated central differences on `grid`.
pub fn profile_derivatives(
    omega: &Omega,
    params: &Params,
    grid: &Grid,
    step: f64,
) -> Result<[Field; 2]> {
    let central = |j: usize, h: f64| -> Result<Field> {
        let (d0, d1) = if j == 0 { (h, 0.0) } else { (0.0, h) };
        let shifted = |sign: f64| {
            omega
                .shifted(sign * d0, sign * d1)
                .map_err(|_| Error::StepLeavesOmega {
                    omega0: omega.omega0(),
                    omega1: omega.omega1(),
                    step,
                })
        };
        let plus = waves::profile(&shifted(1.0)?, params, grid)?;
        let minus = waves::profile(&shifted(-1.0)?, params, grid)?;
        Ok(plus.sub(&minus).scale_real(0.5 / h))
    };
    let w = |j: usize| -> Result<Field> {
        let coarse = central(j, step)?;
        let fine = central(j, 0.5 * step)?;
        Ok(fine.scale_real(4.0 / 3.0).add_scaled(&coarse, -1.0 / 3.0))
    };
    Ok([w(0)?, w(1)?])
}

/// `psi = phi + sum_j c_j w_j` with `d''(omega) c = -2 (Q0(phi), Q1(phi))`, so that
/// `psi` is orthogonal to both charge gradients; requires `d''` negative definite.
pub fn unstable_direction(
    omega: &Omega,
    params: &Params,
    grid: &Grid,
    fd_step: f64,
) -> Result<UnstableDirection> {
    let hessian = functionals::d_hessian_fd(omega, params, functionals::HESSIAN_STEP, true)?;
    if !hessian.is_negative_definite() {
        return Err(Error::NotUnstableRegime);
    }
    let q = functionals::d_grad(omega, params);
    let c = hessian
        .solve([-2.0 * q[0], -2.0 * q[1]])
        .ok_or(Error::SingularHessian(hessian.det()))?;
    let phi = waves::profile(omega, params, grid)?;
    let [w0, w1] = profile_derivatives(omega, params, grid, fd_step)?;
    let mut psi = phi.add_scaled(&w0, c[0]).add_scaled(&w1, c[1]);
    let k_prime = functionals::nehari_gradient(omega, &phi, params);
    let orientation = if dot_l2(&k_prime, &psi) < 0.0 { -1.0 } else { 1.0 };
    psi = psi.scale_real(orientation);

    let pairing = |j: usize| {
        let g = functionals::charge_gradient(j, &phi);
        dot_l2(&g, &psi) / (g.norm_l2() * psi.norm_l2())
    };
    let certificate = Certificate {
        c0: c[0],
        c1: c[1],
        q0_pairing: pairing(0),
        q1_pairing: pairing(1),
        second_variation: second_variation(omega, params, &phi, &psi)?,
    };
    Ok(UnstableDirection {
        certificate,
        phi_second_variation: second_variation(omega, params, &phi, &phi)?,
        psi,
        c,
        orientation,
        hessian,
    })
}

/// Relative agreement demanded between `<E'(u), q>` and `<S'_omega(u), q>`.
pub const P_CONSISTENCY_TOL: f64 = 1e-8;

/// Everything the instability argument evaluates at one state `u`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub state: ModulationState,
    pub a: f64,
    pub q: Field,
    pub p: f64,
}

/// The functionals `A`, `q`, `P`, `Lambda` built on an orbit and a direction `psi`.
#[derive(Debug, Clone)]
pub struct Instability {
    orbit: Orbit,
    psi: Field,
}

impl Instability {
    pub fn new(orbit: Orbit, psi: Field) -> Result<Self> {
        orbit.check_grid(&psi)?;
        Ok(Self { orbit, psi })
    }

    pub fn orbit(&self) -> &Orbit {
        &self.orbit
    }

    pub fn psi(&self) -> &Field {
        &self.psi
    }

    /// `A(u) = (i u, T(alpha(u)) psi)`.
    pub fn a_functional(&self, u: &Field) -> Result<f64> {
        let state = self.orbit.solve_alpha(u)?;
        Ok(self.a_at(u, &state))
    }

    fn a_at(&self, u: &Field, state: &ModulationState) -> f64 {
        dot_l2(&u.times_i(), &functionals::translate(&state.theta(), &self.psi))
    }

    fn q_at(&self, u: &Field, state: &ModulationState) -> Result<Field> {
        let tpsi = functionals::translate(&state.theta(), &self.psi);
        let a = self.orbit.a_fields(u, state)?;
        let iu = u.times_i();
        let mut q = tpsi.clone();
        for (j, aj) in a.iter().enumerate() {
            let coeff = dot_l2(&iu, &generator(j, &tpsi));
            q = q.add_scaled(&aj.times_i(), coeff);
        }
        Ok(q)
    }

    /// `q(u) = T(alpha) psi + sum_j (i u, T(alpha) T_j' psi) i a_j(u)`.
    pub fn q_field(&self, u: &Field) -> Result<Field> {
        let state = self.orbit.solve_alpha(u)?;
        self.q_at(u, &state)
    }

    fn p_at(&self, u: &Field, q: &Field) -> Result<f64> {
        let om = self.orbit.omega();
        let pr = self.orbit.params();
        let p = dot_l2(&functionals::energy_gradient(u, pr), q);
        let p_action = dot_l2(&functionals::action_gradient(om, u, pr), q);
        let scale = (om.omega0().abs() * u.norm_l2()
            + om.omega1().abs() * u.derivative().norm_l2())
            * q.norm_l2();
        if (p - p_action).abs() > P_CONSISTENCY_TOL * scale.max(p.abs()) {
            return Err(Error::InternalInconsistency {
                what: "P(u) vs <S'(u), q(u)>",
                a: p,
                b: p_action,
            });
        }
        Ok(p)
    }

    /// `P(u) = <E'(u), q(u)>`, cross-checked against `<S'_omega(u), q(u)>`.
    pub fn p_functional(&self, u: &Field) -> Result<f64> {
        let q = self.q_field(u)?;
        self.p_at(u, &q)
    }

    /// `A`, `q` and `P` sharing one modulation solve.
    pub fn evaluate(&self, u: &Field) -> Result<Evaluation> {
        let state = self.orbit.solve_alpha(u)?;
        let q = self.q_at(u, &state)?;
        let p = self.p_at(u, &q)?;
        Ok(Evaluation {
            a: self.a_at(u, &state),
            state,
            q,
            p,
        })
    }

    /// Smallest-magnitude root `Lambda` of `lambda -> K_omega(u + lambda q(u))`
    /// with `|Lambda| <= 1`.
    pub fn lambda_root(&self, u: &Field) -> Result<f64> {
        let q = self.q_field(u)?;
        self.lambda_root_along(u, &q)
    }

    pub fn lambda_root_along(&self, u: &Field, q: &Field) -> Result<f64> {
        let om = self.orbit.omega();
        let pr = self.orbit.params();
        let k = |lambda: f64| functionals::nehari(om, &u.add_scaled(q, lambda), pr);
        let k0 = k(0.0);
        if k0 == 0.0 {
            return Ok(0.0);
        }
        let mut inner = 0.0;
        let mut offset: f64 = 1e-10;
        let (mut k_plus, mut k_minus) = (k0, k0);
        while inner < 1.0 {
            let outer = offset.min(1.0);
            let (kp, km) = (k(outer), k(-outer));
            if kp.signum() != k_plus.signum() {
                return brent(k, inner, outer, 1e-15, 200).ok_or(Error::NoBracket);
            }
            if km.signum() != k_minus.signum() {
                return brent(k, -outer, -inner, 1e-15, 200).ok_or(Error::NoBracket);
            }
            k_plus = kp;
            k_minus = km;
            inner = outer;
            offset *= 2.0;
        }
        Err(Error::NoBracket)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner_l2;
    use crate::random::{random_field, RandomFieldSpec};

    fn orbit(w0: f64, w1: f64, b: f64, n: usize) -> Orbit {
        let om = Omega::new(w0, w1).unwrap();
        let pr = Params::new(b).unwrap();
        let g = waves::soliton_grid(&om, n).unwrap();
        Orbit::new(&om, &pr, &g).unwrap()
    }

    #[test]
    fn generators_are_theta_derivatives() {
        let o = orbit(1.0, 0.7, 0.3, 1024);
        let u = o.phi();
        let h = 1e-5;
        for j in 0..2 {
            let e = |s: f64| {
                if j == 0 {
                    ThetaPair::new(s, 0.0)
                } else {
                    ThetaPair::new(0.0, s)
                }
            };
            let fd = functionals::translate(&e(h), u)
                .sub(&functionals::translate(&e(-h), u))
                .scale_real(0.5 / h);
            let err = fd.sub(&generator(j, u)).max_abs();
            assert!(err < 1e-8, "j = {j}: {err}");
        }
    }

    #[test]
    fn generator_zero_of_real_field_is_imaginary() {
        let g = Grid::new(5.0, 256).unwrap();
        let u = Field::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        assert!(generator(0, &u).values().iter().all(|z| z.re == 0.0));
    }

    #[test]
    fn charge_gradients_pair_through_generators() {
        let g = Grid::new(10.0, 512).unwrap();
        let u = random_field(&g, &RandomFieldSpec::new(1, 0, 2.0));
        let v = random_field(&g, &RandomFieldSpec::new(1, 1, 2.0));
        for j in 0..2 {
            let lhs = inner_l2(&functionals::charge_gradient(j, &u), &v).unwrap();
            let rhs = inner_l2(&generator(j, &u), &v.times_i()).unwrap();
            assert!((lhs - rhs).abs() < 1e-13, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn alpha_of_profile_vanishes() {
        let o = orbit(1.0, 1.6, 3.0 / 16.0, 1024);
        let st = o.solve_alpha(o.phi()).unwrap();
        assert!(st.converged);
        assert!(st.alpha0.abs() < 1e-12 && st.alpha1.abs() < 1e-12, "{st:?}");
    }

    #[test]
    fn alpha_is_equivariant() {
        let o = orbit(1.0, 0.5, 3.0 / 16.0, 1024);
        for xi in [ThetaPair::new(2.0, 1.37), ThetaPair::new(5.5, -4.02)] {
            let u = functionals::translate(&xi, o.phi());
            let st = o.solve_alpha(&u).unwrap();
            assert!((wrap_phase(st.alpha0 - xi.theta0())).abs() < 1e-10);
            assert!((st.alpha1 - xi.theta1()).abs() < 1e-10);
            let back = functionals::translate(&st.theta().inverse(), &u);
            assert!(back.sub(o.phi()).norm_h1() < 1e-8);
        }
    }

    #[test]
    fn far_field_is_not_in_tube() {
        let o = orbit(1.0, 0.5, 3.0 / 16.0, 1024);
        let u = o.phi().scale_real(3.0);
        assert!(matches!(o.solve_alpha(&u), Err(Error::NotInTube { .. })));
    }

    #[test]
    fn h_matrix_at_profile_is_gram_matrix() {
        let o = orbit(1.0, 1.0, 0.5, 1024);
        let h = o.h_matrix(o.phi(), &ThetaPair::identity()).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let gram = dot_l2(&generator(j, o.phi()), &generator(k, o.phi()));
                assert!((h.entries[j][k] - gram).abs() < 1e-10 * (1.0 + gram.abs()));
            }
        }
        assert!(h.eigenvalues[0] > 0.0);
    }

    #[test]
    fn orbital_distance_vanishes_on_orbit() {
        let o = orbit(1.0, 0.5, 3.0 / 16.0, 1024);
        let xi = ThetaPair::new(1.0, 0.123_456);
        let u = functionals::translate(&xi, o.phi());
        let (d, theta) = o.orbital_distance(&u).unwrap();
        assert!(d < 1e-10, "d = {d}");
        assert!((theta.theta1() - xi.theta1()).abs() < 1e-10);
        assert!((wrap_phase(theta.theta0() - xi.theta0())).abs() < 1e-10);
    }

    #[test]
    fn orbital_distance_scaling_and_tangent() {
        let o = orbit(1.0, 0.5, 3.0 / 16.0, 1024);
        let n = o.phi().norm_h1();
        let delta = 1e-3;
        let (d, _) = o.orbital_distance(&o.phi().scale_real(1.0 + delta)).unwrap();
        assert!(d >= 0.5 * delta * n && d <= 2.0 * delta * n);
        let tangent = o.phi().add_scaled(&o.phi().times_i(), delta);
        let (dt, _) = o.orbital_distance(&tangent).unwrap();
        assert!(dt < 1e-2 * delta * n, "{dt}");
    }

    #[test]
    fn second_variation_of_profile() {
        let o = orbit(1.0, 1.6, 3.0 / 16.0, 2048);
        let (om, pr, phi) = (o.omega(), o.params(), o.phi());
        let sv = second_variation(om, pr, phi, phi).unwrap();
        assert!(sv < 0.0);
        // d^2/d lambda^2 S(lambda phi) at 1 = L - 3 N - 5 b M
        let analytic = functionals::l_form(om, phi)
            - 3.0 * functionals::quartic_term(phi)
            - 5.0 * pr.b() * functionals::sextic_term(phi);
        assert!((sv - analytic).abs() < 1e-5 * analytic.abs(), "{sv} vs {analytic}");
        let gauge = second_variation(om, pr, phi, &phi.times_i()).unwrap();
        assert!(gauge.abs() < 1e-5, "{gauge}");
    }

    #[test]
    fn unstable_direction_rejected_in_stable_regime() {
        let om = Omega::new(1.0, 0.5).unwrap();
        let pr = Params::new(3.0 / 16.0).unwrap();
        let g = waves::soliton_grid(&om, 1024).unwrap();
        assert!(matches!(
            unstable_direction(&om, &pr, &g, FD_STEP),
            Err(Error::NotUnstableRegime)
        ));
    }
}
