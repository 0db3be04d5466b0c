use dnls_core::functionals::{self, HESSIAN_STEP};
use dnls_core::grid::Field;
use dnls_core::waves::{self, Omega, Params};

const SAMPLES: [(f64, f64, f64); 10] = [
    (1.0, 0.0, 0.0),
    (1.0, 1.0, 0.0),
    (2.0, -1.5, 0.0),
    (1.0, 0.5, 0.1875),
    (1.0, 1.6, 0.1875),
    (0.5, -1.0, 0.1875),
    (3.0, 2.0, 0.1875),
    (1.0, 0.3, 1.0),
    (1.0, 1.8, 1.0),
    (2.0, -2.0, 1.0),
];

fn sample(i: usize, n: usize) -> (Omega, Params, Field) {
    let (w0, w1, b) = SAMPLES[i];
    let om = Omega::new(w0, w1).unwrap();
    let pr = Params::new(b).unwrap();
    let grid = waves::soliton_grid(&om, n).unwrap();
    let phi = waves::profile(&om, &pr, &grid).unwrap();
    (om, pr, phi)
}

#[test]
fn profile_solves_stationary_equation() {
    for i in 0..SAMPLES.len() {
        let (om, pr, phi) = sample(i, 4096);
        let residual = functionals::action_gradient(&om, &phi, &pr).norm_l2() / phi.norm_h1();
        assert!(residual <= 1e-8, "sample {i}: residual {residual:e}");
    }
}

#[test]
fn quadrature_charges_match_closed_forms() {
    for i in 0..SAMPLES.len() {
        let (om, pr, phi) = sample(i, 4096);
        let q0 = functionals::charge0(&phi);
        let q1 = functionals::charge1(&phi);
        let c0 = waves::closed_q0(&om, &pr);
        let c1 = waves::closed_q1(&om, &pr);
        assert!((q0 - c0).abs() <= 1e-10 * c0.abs(), "sample {i}: {q0} vs {c0}");
        // Q1 may be near zero; measure against the natural size Q0
        assert!((q1 - c1).abs() <= 1e-10 * c1.abs().max(c0), "sample {i}: {q1} vs {c1}");
    }
}

#[test]
fn hessian_differences_match_closed_forms() {
    for (i, &(w0, w1, b)) in SAMPLES.iter().enumerate() {
        let om = Omega::new(w0, w1).unwrap();
        let pr = Params::new(b).unwrap();
        let h = functionals::d_hessian_fd(&om, &pr, HESSIAN_STEP, true).unwrap();
        let det = waves::closed_det_d2(&om, &pr);
        let d00 = waves::d2_00_entry(&om, &pr);
        assert!((h.det() - det).abs() <= 1e-4 * det.abs(), "sample {i}: {} vs {det}", h.det());
        let scale = d00.abs().max(1e-4 * h.eigenvalues[0].abs().max(h.eigenvalues[1].abs()));
        assert!((h.entries[0][0] - d00).abs() <= 1e-4 * scale, "sample {i}");
    }
}

#[test]
fn hessian_from_quadrature_of_action() {
    // independent of the closed forms: second differences of d(omega) itself
    let om = Omega::new(1.0, 1.6).unwrap();
    let pr = Params::new(0.1875).unwrap();
    let grid = waves::soliton_grid(&om, 2048).unwrap();
    let d = |a: f64, c: f64| functionals::d_value_on(&om.shifted(a, c).unwrap(), &pr, &grid).unwrap();
    let h = 1e-3;
    let d00 = (d(h, 0.0) - 2.0 * d(0.0, 0.0) + d(-h, 0.0)) / (h * h);
    let d11 = (d(0.0, h) - 2.0 * d(0.0, 0.0) + d(0.0, -h)) / (h * h);
    let d01 = (d(h, h) - d(h, -h) - d(-h, h) + d(-h, -h)) / (4.0 * h * h);
    let det = d00 * d11 - d01 * d01;
    let closed = waves::closed_det_d2(&om, &pr);
    assert!((det - closed).abs() <= 1e-3 * closed.abs(), "{det} vs {closed}");
    assert!((d00 - waves::d2_00_entry(&om, &pr)).abs() <= 1e-3 * d00.abs());
}

#[test]
fn gradient_of_d_is_the_charge_pair() {
    let om = Omega::new(1.0, 0.5).unwrap();
    let pr = Params::new(0.1875).unwrap();
    let grid = waves::soliton_grid(&om, 2048).unwrap();
    let d = |a: f64, c: f64| functionals::d_value_on(&om.shifted(a, c).unwrap(), &pr, &grid).unwrap();
    let h = 1e-4;
    let g0 = (d(h, 0.0) - d(-h, 0.0)) / (2.0 * h);
    let g1 = (d(0.0, h) - d(0.0, -h)) / (2.0 * h);
    let [q0, q1] = functionals::d_grad(&om, &pr);
    assert!((g0 - q0).abs() < 1e-7 * q0.abs());
    assert!((g1 - q1).abs() < 1e-7 * q0.abs());
}

#[test]
fn energy_balances_momentum_on_profiles() {
    for i in 0..SAMPLES.len() {
        let (om, pr, phi) = sample(i, 4096);
        let e = functionals::energy(&phi, &pr);
        let q1 = functionals::charge1(&phi);
        let defect = (e + 0.5 * om.omega1() * q1).abs();
        assert!(defect <= 1e-8 * (1.0 + e.abs()), "sample {i}: {defect:e}");
    }
}

#[test]
fn closed_phase_matches_trapezoid_quadrature() {
    let om = Omega::new(1.0, 1.2).unwrap();
    let pr = Params::new(0.4).unwrap();
    let lo = -40.0;
    let steps = 400_000;
    let h = 80.0 / steps as f64;
    let mut mass = 0.0;
    let mut prev = waves::tilde_profile(&om, &pr, lo).powi(2);
    for j in 1..=steps {
        let x = lo + j as f64 * h;
        let cur = waves::tilde_profile(&om, &pr, x).powi(2);
        mass += 0.5 * h * (prev + cur);
        prev = cur;
        if j % 50_000 == 0 {
            let closed = waves::cumulative_mass(&om, &pr, x);
            assert!((closed - mass).abs() < 1e-9, "x = {x}: {closed} vs {mass}");
        }
    }
}

#[test]
fn threshold_separates_signs_of_momentum() {
    let pr = Params::new(0.1875).unwrap();
    let kappa = waves::kappa(&pr).unwrap();
    assert!(kappa > 0.0 && kappa < 1.0);
    let xi = waves::xi_hat(&pr).unwrap();
    assert!((waves::g_function(xi, &pr).unwrap() - 1.0).abs() <= 1e-12);
    for w0 in [0.25, 1.0, 4.0] {
        let crit = 2.0 * kappa * f64::sqrt(w0);
        let below = waves::closed_q1(&Omega::new(w0, crit - 1e-3).unwrap(), &pr);
        let above = waves::closed_q1(&Omega::new(w0, crit + 1e-3).unwrap(), &pr);
        assert!(below > 0.0 && above < 0.0, "omega0 = {w0}: {below} {above}");
    }
}

#[test]
fn reference_threshold_values() {
    // gamma = 2
    let pr = Params::new(0.1875).unwrap();
    assert!((waves::xi_hat(&pr).unwrap() - 2.03).abs() < 5e-3);
    assert!((waves::kappa(&pr).unwrap() - 0.5716).abs() < 5e-4);
    let q1 = waves::closed_q1(&Omega::new(1.0, 1.6).unwrap(), &pr);
    assert!((q1 + 0.716).abs() < 5e-3, "{q1}");
}
