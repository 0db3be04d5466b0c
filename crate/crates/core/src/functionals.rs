//! Conserved and variational functionals: `E`, `Q0`, `Q1`, `L_omega`,
//! `S_omega`, `K_omega`, the function `d(omega)` with its Hessian, and the
//! symmetry group `T(theta) v = e^{i theta0} v(x - theta1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot_l2, Field, Grid};
use crate::waves::{self, Omega, Params};

/// Integrals every functional is assembled from.
#[derive(Debug, Clone, Copy)]
struct Pieces {
    /// `||v'||^2`
    gradient: f64,
    /// `||v||^2`
    mass: f64,
    /// `(i v', v)`
    momentum: f64,
    /// `(i |v|^2 v', v)`
    quartic: f64,
    /// `||v||_6^6`
    sextic: f64,
}

impl Pieces {
    fn of(v: &Field) -> Self {
        let dv = v.derivative();
        let h = v.grid().spacing();
        let (mut gradient, mut mass, mut momentum, mut quartic, mut sextic) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for (z, dz) in v.values().iter().zip(dv.values()) {
            let m = z.norm_sqr();
            let cross = (Complex64::i() * dz * z.conj()).re;
            gradient += dz.norm_sqr();
            mass += m;
            momentum += cross;
            quartic += m * cross;
            sextic += m * m * m;
        }
        Self {
            gradient: h * gradient,
            mass: h * mass,
            momentum: h * momentum,
            quartic: h * quartic,
            sextic: h * sextic,
        }
    }

    fn l_form(&self, omega: &Omega) -> f64 {
        self.gradient + omega.omega0() * self.mass + omega.omega1() * self.momentum
    }
}

/// `N(v) = (i |v|^2 v', v)`.
pub fn quartic_term(v: &Field) -> f64 {
    Pieces::of(v).quartic
}

/// `M(v) = ||v||_6^6`.
pub fn sextic_term(v: &Field) -> f64 {
    Pieces::of(v).sextic
}

/// `E(v) = ||v'||^2/2 - (i|v|^2 v', v)/4 - (b/6) ||v||_6^6`.
pub fn energy(v: &Field, params: &Params) -> f64 {
    let p = Pieces::of(v);
    0.5 * p.gradient - 0.25 * p.quartic - params.b() / 6.0 * p.sextic
}

/// `Q0(v) = ||v||^2 / 2`.
pub fn charge0(v: &Field) -> f64 {
    0.5 * v.norm_l2().powi(2)
}

/// `Q1(v) = (i v', v) / 2`.
pub fn charge1(v: &Field) -> f64 {
    0.5 * dot_l2(&v.derivative().times_i(), v)
}

/// `L_omega(v) = ||v'||^2 + omega0 ||v||^2 + omega1 (i v', v)`.
pub fn l_form(omega: &Omega, v: &Field) -> f64 {
    Pieces::of(v).l_form(omega)
}

/// Relative agreement demanded between the two algebraic forms of the action.
pub const ACTION_CONSISTENCY_TOL: f64 = 1e-12;

/// `S_omega(v) = E(v) + omega0 Q0(v) + omega1 Q1(v)`, cross-checked against
/// `L_omega/2 - (i|v|^2 v', v)/4 - (b/6)||v||_6^6`.
pub fn action(omega: &Omega, v: &Field, params: &Params) -> Result<f64> {
    let direct = energy(v, params) + omega.omega0() * charge0(v) + omega.omega1() * charge1(v);
    let p = Pieces::of(v);
    let quadratic_form = 0.5 * p.l_form(omega) - 0.25 * p.quartic - params.b() / 6.0 * p.sextic;
    let scale = 0.5 * p.gradient
        + 0.5 * omega.omega0().abs() * p.mass
        + 0.5 * (omega.omega1() * p.momentum).abs()
        + 0.25 * p.quartic.abs()
        + params.b() * p.sextic / 6.0;
    if (direct - quadratic_form).abs() > ACTION_CONSISTENCY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InternalInconsistency {
            what: "action",
            a: direct,
            b: quadratic_form,
        });
    }
    Ok(direct)
}

/// `K_omega(v) = L_omega(v) - (i|v|^2 v', v) - b ||v||_6^6 = d/d lambda S_omega(lambda v) at 1`.
pub fn nehari(omega: &Omega, v: &Field, params: &Params) -> f64 {
    let p = Pieces::of(v);
    p.l_form(omega) - p.quartic - params.b() * p.sextic
}

/// `S~_omega(v) = L_omega(v)/4 + (b/12) ||v||_6^6 = S_omega - K_omega/4`.
pub fn reduced_action(omega: &Omega, v: &Field, params: &Params) -> f64 {
    let p = Pieces::of(v);
    0.25 * p.l_form(omega) + params.b() / 12.0 * p.sextic
}

/// The scale `lambda* > 0` with `K_omega(lambda* v) = 0`, i.e. the positive root of
/// `b M lambda^4 + N lambda^2 - L = 0` in `lambda^2`.
pub fn nehari_rescale(omega: &Omega, v: &Field, params: &Params) -> Result<f64> {
    let p = Pieces::of(v);
    if p.mass == 0.0 {
        return Err(Error::ZeroField);
    }
    let l = p.l_form(omega);
    let n = p.quartic;
    let bm = params.b() * p.sextic;
    let lambda2 = if bm > 0.0 {
        // 2L / (N + sqrt(N^2 + 4 bM L)) avoids cancellation for N < 0
        2.0 * l / (n + (n * n + 4.0 * bm * l).sqrt())
    } else if n > 0.0 {
        l / n
    } else {
        return Err(Error::NoRoot(
            "Nehari functional stays positive along the ray".into(),
        ));
    };
    Ok(lambda2.sqrt())
}

/// Report of all functionals of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    #[serde(rename = "Q1")]
    pub q1: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

impl FunctionalReport {
    pub fn of(omega: &Omega, v: &Field, params: &Params) -> Result<Self> {
        Ok(Self {
            energy: energy(v, params),
            q0: charge0(v),
            q1: charge1(v),
            l: l_form(omega, v),
            s: action(omega, v, params)?,
            k: nehari(omega, v, params),
        })
    }
}

fn pointwise<F: Fn(Complex64, Complex64, Complex64) -> Complex64>(v: &Field, f: F) -> Field {
    let dv = v.derivative();
    let ddv = v.second_derivative();
    let values = v
        .values()
        .iter()
        .zip(dv.values())
        .zip(ddv.values())
        .map(|((&z, &dz), &ddz)| f(z, dz, ddz))
        .collect();
    Field::from_values(v.grid(), values)
}

/// `E'(v) = -v'' - i|v|^2 v' - b|v|^4 v`.
pub fn energy_gradient(v: &Field, params: &Params) -> Field {
    let b = params.b();
    pointwise(v, |z, dz, ddz| {
        let m = z.norm_sqr();
        -ddz - Complex64::i() * m * dz - b * m * m * z
    })
}

/// `S'_omega(v) = E'(v) + omega0 v + omega1 i v'`.
pub fn action_gradient(omega: &Omega, v: &Field, params: &Params) -> Field {
    let b = params.b();
    let (w0, w1) = (omega.omega0(), omega.omega1());
    pointwise(v, |z, dz, ddz| {
        let m = z.norm_sqr();
        -ddz - Complex64::i() * m * dz - b * m * m * z + w0 * z + Complex64::i() * w1 * dz
    })
}

/// `K'_omega(v) = 2(-v'' + omega0 v + omega1 i v') - 4 i|v|^2 v' - 6 b|v|^4 v`.
pub fn nehari_gradient(omega: &Omega, v: &Field, params: &Params) -> Field {
    let b = params.b();
    let (w0, w1) = (omega.omega0(), omega.omega1());
    pointwise(v, |z, dz, ddz| {
        let m = z.norm_sqr();
        2.0 * (-ddz + w0 * z + Complex64::i() * w1 * dz)
            - 4.0 * Complex64::i() * m * dz
            - 6.0 * b * m * m * z
    })
}

/// `Q0'(v) = v`, `Q1'(v) = i v'`.
pub fn charge_gradient(j: usize, v: &Field) -> Field {
    match j {
        0 => v.clone(),
        1 => v.derivative().times_i(),
        _ => panic!("charge index must be 0 or 1, got {j}"),
    }
}

/// Symmetry parameters `(theta0, theta1)`, phase normalized to `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPair {
    theta0: f64,
    theta1: f64,
}

impl ThetaPair {
    pub fn new(theta0: f64, theta1: f64) -> Self {
        Self {
            theta0: theta0.rem_euclid(std::f64::consts::TAU),
            theta1,
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    /// Group law `T(a) T(b) = T(a + b)`.
    pub fn compose(&self, other: &ThetaPair) -> ThetaPair {
        ThetaPair::new(self.theta0 + other.theta0, self.theta1 + other.theta1)
    }

    pub fn inverse(&self) -> ThetaPair {
        ThetaPair::new(-self.theta0, -self.theta1)
    }
}

/// `T(theta) v (x) = e^{i theta0} v(x - theta1)`, the shift taken spectrally.
pub fn translate(theta: &ThetaPair, v: &Field) -> Field {
    let rot = Complex64::from_polar(1.0, theta.theta0());
    let mut s = v.spectrum();
    for (z, &k) in s.iter_mut().zip(v.grid().wavenumbers()) {
        *z *= rot * Complex64::from_polar(1.0, -k * theta.theta1());
    }
    Field::from_spectrum(v.grid(), s)
}

/// `d(omega) = S_omega(phi_omega)` by quadrature on the default grid with `n` nodes.
pub fn d_value(omega: &Omega, params: &Params, n: usize) -> Result<f64> {
    let grid = waves::soliton_grid(omega, n)?;
    d_value_on(omega, params, &grid)
}

pub fn d_value_on(omega: &Omega, params: &Params, grid: &Grid) -> Result<f64> {
    let phi = waves::profile(omega, params, grid)?;
    action(omega, &phi, params)
}

/// `d'(omega) = (Q0(phi_omega), Q1(phi_omega))` from the closed forms.
pub fn d_grad(omega: &Omega, params: &Params) -> [f64; 2] {
    [waves::closed_q0(omega, params), waves::closed_q1(omega, params)]
}

/// Symmetric 2x2 matrix with its spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hessian2 {
    pub entries: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
}

impl Hessian2 {
    pub fn from_symmetric(m: [[f64; 2]; 2]) -> Self {
        let off = 0.5 * (m[0][1] + m[1][0]);
        let entries = [[m[0][0], off], [off, m[1][1]]];
        let mean = 0.5 * (entries[0][0] + entries[1][1]);
        let half_gap = (0.5 * (entries[0][0] - entries[1][1])).hypot(off);
        Self {
            entries,
            eigenvalues: [mean - half_gap, mean + half_gap],
        }
    }

    pub fn det(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    pub fn is_negative_definite(&self) -> bool {
        self.eigenvalues[1] < 0.0
    }

    /// Solve `self * x = rhs`.
    pub fn solve(&self, rhs: [f64; 2]) -> Option<[f64; 2]> {
        let det = self.det();
        let scale = self.entries.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        if det.abs() <= 1e-14 * scale * scale {
            return None;
        }
        let m = &self.entries;
        Some([
            (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ])
    }
}

/// Default step for the Hessian differences.
pub const HESSIAN_STEP: f64 = 1e-4;

/// `d''(omega)` by central differences of the closed-form gradient, optionally
/// Richardson-extrapolated over steps `h` and `h/2`.
pub fn d_hessian_fd(omega: &Omega, params: &Params, step: f64, richardson: bool) -> Result<Hessian2> {
    let leaves = || Error::StepLeavesOmega {
        omega0: omega.omega0(),
        omega1: omega.omega1(),
        step,
    };
    for (d0, d1) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
        omega.shifted(d0, d1).map_err(|_| leaves())?;
    }
    let central = |h: f64| -> Result<[[f64; 2]; 2]> {
        let mut m = [[0.0; 2]; 2];
        for k in 0..2 {
            let (d0, d1) = if k == 0 { (h, 0.0) } else { (0.0, h) };
            let plus = d_grad(&omega.shifted(d0, d1)?, params);
            let minus = d_grad(&omega.shifted(-d0, -d1)?, params);
            for j in 0..2 {
                m[j][k] = (plus[j] - minus[j]) / (2.0 * h);
            }
        }
        Ok(m)
    };
    let coarse = central(step)?;
    let m = if richardson {
        let fine = central(0.5 * step)?;
        let mut r = [[0.0; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                r[j][k] = (4.0 * fine[j][k] - coarse[j][k]) / 3.0;
            }
        }
        r
    } else {
        coarse
    };
    Ok(Hessian2::from_symmetric(m))
}

/// `C1 = min_k (k^2 - omega1 k + omega0) / (1 + k^2)` over the grid wavenumbers:
/// the sharp coercivity constant of `L_omega` against `||.||_{H^1}^2` on the torus.
pub fn coercivity_constant(omega: &Omega, grid: &Grid) -> f64 {
    grid.wavenumbers()
        .iter()
        .map(|&k| (k * k - omega.omega1() * k + omega.omega0()) / (1.0 + k * k))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner_l2;
    use crate::random::{random_field, RandomFieldSpec};

    fn setup(w0: f64, w1: f64, b: f64, n: usize) -> (Omega, Params, Grid, Field) {
        let om = Omega::new(w0, w1).unwrap();
        let pr = Params::new(b).unwrap();
        let g = waves::soliton_grid(&om, n).unwrap();
        let phi = waves::profile(&om, &pr, &g).unwrap();
        (om, pr, g, phi)
    }

    fn rand_field(g: &Grid, stream: u64) -> Field {
        random_field(g, &RandomFieldSpec::new(7, stream, 1.5))
    }

    #[test]
    fn zero_field_functionals_vanish() {
        let (om, pr, g, _) = setup(1.0, 0.3, 0.2, 256);
        let z = Field::zeros(&g);
        assert_eq!(energy(&z, &pr), 0.0);
        assert_eq!(l_form(&om, &z), 0.0);
        assert_eq!(action(&om, &z, &pr).unwrap(), 0.0);
        assert_eq!(nehari(&om, &z, &pr), 0.0);
        assert_eq!(nehari_rescale(&om, &z, &pr), Err(Error::ZeroField));
    }

    #[test]
    fn real_field_has_no_momentum() {
        let g = Grid::new(8.0, 256).unwrap();
        let v = Field::from_fn(&g, |x| Complex64::new((-x * x).exp() * (1.0 + x), 0.0)).unwrap();
        assert!(charge1(&v).abs() < 1e-15);
    }

    #[test]
    fn charge0_is_quadratic() {
        let g = Grid::new(8.0, 256).unwrap();
        let v = rand_field(&g, 0);
        let lam = -1.7;
        assert!((charge0(&v.scale_real(lam)) - lam * lam * charge0(&v)).abs() < 1e-13);
    }

    #[test]
    fn plane_wave_l_form() {
        let l = 4.0;
        let g = Grid::new(l, 256).unwrap();
        let om = Omega::new(2.0, 0.7).unwrap();
        for m in [-3i32, 0, 2, 9] {
            let k = m as f64 * std::f64::consts::PI / l;
            let v = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k * x)).unwrap();
            let expect = (k * k + 2.0 - 0.7 * k) * 2.0 * l;
            assert!((l_form(&om, &v) - expect).abs() < 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn soliton_is_nehari_critical() {
        let (om, pr, _, phi) = setup(1.0, 0.5, 3.0 / 16.0, 2048);
        let k = nehari(&om, &phi, &pr);
        assert!(k.abs() <= 1e-8 * l_form(&om, &phi), "K = {k}");
        let lam = nehari_rescale(&om, &phi, &pr).unwrap();
        assert!((lam - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nehari_is_radial_derivative_of_action() {
        let (om, pr, g, _) = setup(1.0, 0.5, 0.4, 512);
        for s in 0..5 {
            let v = rand_field(&g, s);
            let h = 1e-4;
            let fd = (action(&om, &v.scale_real(1.0 + h), &pr).unwrap()
                - action(&om, &v.scale_real(1.0 - h), &pr).unwrap())
                / (2.0 * h);
            let k = nehari(&om, &v, &pr);
            assert!((fd - k).abs() < 1e-6 * (1.0 + k.abs()), "{fd} vs {k}");
        }
    }

    #[test]
    fn rescaled_fields_land_on_nehari_set() {
        let (om, pr, g, _) = setup(1.0, 0.5, 3.0 / 16.0, 512);
        for s in 0..20 {
            let v = rand_field(&g, s);
            let lam = nehari_rescale(&om, &v, &pr).unwrap();
            let l = l_form(&om, &v);
            let k = nehari(&om, &v.scale_real(lam), &pr);
            assert!(k.abs() <= 1e-10 * lam * lam * l, "stream {s}: K = {k}");
            if nehari(&om, &v, &pr) < 0.0 {
                assert!(lam > 0.0 && lam < 1.0);
            }
        }
    }

    #[test]
    fn gradients_match_directional_differences() {
        let (om, pr, g, _) = setup(1.2, -0.4, 0.6, 512);
        let v = rand_field(&g, 3);
        let w = rand_field(&g, 4);
        let h = 1e-5;
        let fd = |f: &dyn Fn(&Field) -> f64| {
            (f(&v.add_scaled(&w, h)) - f(&v.add_scaled(&w, -h))) / (2.0 * h)
        };
        let de = fd(&|u| energy(u, &pr));
        let ds = fd(&|u| action(&om, u, &pr).unwrap());
        let dk = fd(&|u| nehari(&om, u, &pr));
        let dq1 = fd(&|u| charge1(u));
        let ge = inner_l2(&energy_gradient(&v, &pr), &w).unwrap();
        let gs = inner_l2(&action_gradient(&om, &v, &pr), &w).unwrap();
        let gk = inner_l2(&nehari_gradient(&om, &v, &pr), &w).unwrap();
        let gq1 = inner_l2(&charge_gradient(1, &v), &w).unwrap();
        for (a, b) in [(de, ge), (ds, gs), (dk, gk), (dq1, gq1)] {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn soliton_critical_point_of_action() {
        let (om, pr, _, phi) = setup(1.0, 1.6, 3.0 / 16.0, 4096);
        let r = action_gradient(&om, &phi, &pr).norm_l2();
        assert!(r < 1e-8 * phi.norm_h1(), "residual {r}");
    }

    #[test]
    fn translate_group_law_and_identity() {
        let g = Grid::new(10.0, 512).unwrap();
        let v = rand_field(&g, 9);
        let id = translate(&ThetaPair::identity(), &v);
        assert!(id.sub(&v).max_abs() < 1e-13);
        let a = ThetaPair::new(0.7, 1.234);
        let b = ThetaPair::new(5.9, -0.377);
        let lhs = translate(&a, &translate(&b, &v));
        let rhs = translate(&a.compose(&b), &v);
        assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn theta0_normalized() {
        let t = ThetaPair::new(-0.5, 1.0);
        assert!(t.theta0() >= 0.0 && t.theta0() < std::f64::consts::TAU);
        assert!((t.theta0() - (std::f64::consts::TAU - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn functionals_invariant_under_symmetry() {
        let (om, pr, g, _) = setup(1.0, 0.3, 0.5, 1024);
        let v = rand_field(&g, 11);
        let h = g.spacing();
        for theta in [ThetaPair::new(1.1, 7.0 * h), ThetaPair::new(4.0, -0.3173)] {
            let u = translate(&theta, &v);
            assert!((energy(&u, &pr) - energy(&v, &pr)).abs() < 1e-10);
            assert!((charge0(&u) - charge0(&v)).abs() < 1e-10);
            assert!((charge1(&u) - charge1(&v)).abs() < 1e-10);
            let s = action(&om, &v, &pr).unwrap();
            assert!((action(&om, &u, &pr).unwrap() - s).abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_rejects_escaping_step() {
        let om = Omega::new(1.0, 1.9999).unwrap();
        let pr = Params::new(0.2).unwrap();
        assert!(matches!(
            d_hessian_fd(&om, &pr, 1e-3, false),
            Err(Error::StepLeavesOmega { .. })
        ));
    }

    #[test]
    fn hessian_is_symmetric_by_construction() {
        let om = Omega::new(1.0, 0.9).unwrap();
        let pr = Params::new(0.2).unwrap();
        let h = d_hessian_fd(&om, &pr, HESSIAN_STEP, false).unwrap();
        assert_eq!(h.entries[0][1], h.entries[1][0]);
        let det = h.eigenvalues[0] * h.eigenvalues[1];
        assert!((det - h.det()).abs() < 1e-12 * h.det().abs().max(1.0));
    }

    #[test]
    fn coercivity_constant_positive_on_omega() {
        let g = Grid::new(20.0, 512).unwrap();
        for (w0, w1) in [(1.0, 0.0), (1.0, 1.9), (0.3, -1.0)] {
            let om = Omega::new(w0, w1).unwrap();
            assert!(coercivity_constant(&om, &g) > 0.0);
        }
    }
}
