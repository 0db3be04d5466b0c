use dnls_core::dynamics::{self, EvolutionConfig, Scheme, Stepper};
use dnls_core::functionals::{translate, ThetaPair};
use dnls_core::grid::Field;
use dnls_core::waves::{self, Omega, Params};

fn setup(n: usize) -> (Omega, Params, Field) {
    let om = Omega::new(1.0, 0.5).unwrap();
    let pr = Params::new(0.1875).unwrap();
    let grid = waves::soliton_grid(&om, n).unwrap();
    let phi = waves::profile(&om, &pr, &grid).unwrap();
    (om, pr, phi)
}

fn run(u0: &Field, pr: &Params, scheme: Scheme, dt: f64, t: f64) -> Field {
    let steps = (t / dt).round() as usize;
    let mut st = Stepper::new(u0, pr, scheme, t / steps as f64, true);
    st.advance(steps).unwrap();
    st.field()
}

#[test]
fn transport_error_starts_at_zero_and_stays_small() {
    let (om, pr, phi) = setup(1024);
    let mut cfg = EvolutionConfig::new(5e-4, 1.0, Scheme::IntegratingFactorRK4);
    cfg.monitor_every = 500;
    let series = dynamics::soliton_transport_error(&om, &pr, phi.grid(), &cfg).unwrap();
    assert_eq!(series[0].0, 0.0);
    assert!(series[0].1 < 1e-12);
    assert!(series.iter().all(|(_, e)| *e < 1e-7), "{series:?}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let (_, pr, phi) = setup(512);
    let t = 0.5;
    let reference = run(&phi, &pr, Scheme::IntegratingFactorRK4, 2.5e-4, t);
    let coarse = run(&phi, &pr, Scheme::IntegratingFactorRK4, 1e-2, t).sub(&reference).norm_h1();
    let fine = run(&phi, &pr, Scheme::IntegratingFactorRK4, 5e-3, t).sub(&reference).norm_h1();
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn midpoint_converges_at_second_order() {
    let (_, pr, phi) = setup(512);
    let t = 0.2;
    // asymptotic once k_max^2 dt is well below one for the dealiased band
    let reference = run(&phi, &pr, Scheme::IntegratingFactorRK4, 1.25e-4, t);
    let coarse = run(&phi, &pr, Scheme::ImplicitMidpoint, 1e-3, t).sub(&reference).norm_h1();
    let fine = run(&phi, &pr, Scheme::ImplicitMidpoint, 5e-4, t).sub(&reference).norm_h1();
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn independent_schemes_agree() {
    let (_, pr, phi) = setup(1024);
    let a = run(&phi, &pr, Scheme::IntegratingFactorRK4, 1e-3, 1.0);
    let b = run(&phi, &pr, Scheme::ImplicitMidpoint, 2.5e-4, 1.0);
    let diff = a.sub(&b).norm_l2();
    assert!(diff < 1e-6, "{diff:e}");
}

#[test]
fn midpoint_time_reversal() {
    let (om, pr, phi) = setup(1024);
    let t = 0.5;
    let dt = 2e-3;
    let steps = (t / dt) as usize;
    let mut st = Stepper::new(&phi, &pr, Scheme::ImplicitMidpoint, dt, true);
    st.advance(steps).unwrap();
    let exact = translate(&ThetaPair::new(om.omega0() * t, om.omega1() * t), &phi);
    let one_way = st.field().sub(&exact).norm_h1();
    st.set_dt(-dt);
    st.advance(steps).unwrap();
    let back = st.field().sub(&phi).norm_h1();
    assert!(st.t().abs() < 1e-12);
    assert!(back <= 10.0 * one_way, "back {back:e}, one-way {one_way:e}");
}

#[test]
fn doubling_resolution_does_not_hurt_transport() {
    let final_error = |n: usize| {
        let (om, pr, phi) = setup(n);
        let mut cfg = EvolutionConfig::new(1e-3, 0.5, Scheme::IntegratingFactorRK4);
        cfg.monitor_every = 500;
        let s = dynamics::soliton_transport_error(&om, &pr, phi.grid(), &cfg).unwrap();
        s.last().unwrap().1
    };
    let (e1, e2) = (final_error(1024), final_error(2048));
    // allow round-off-level noise once both are converged
    assert!(e2 <= e1 * 1.05 + 1e-12, "{e1:e} -> {e2:e}");
}

#[test]
fn conservation_over_long_stable_run() {
    let (_, pr, phi) = setup(1024);
    let mut cfg = EvolutionConfig::new(5e-4, 20.0, Scheme::IntegratingFactorRK4);
    cfg.monitor_every = 2000;
    cfg.drift_tolerance = 1e-8;
    let traj = dynamics::evolve(&phi, &cfg, &pr).unwrap();
    assert_eq!(traj.halvings, 0);
    assert!(traj.max_drift.iter().all(|d| *d <= 1e-8), "{:?}", traj.max_drift);
    assert_eq!(traj.times.len(), traj.energy.len());
    assert_eq!(traj.times.len(), traj.q1.len());
}

#[test]
fn coarse_step_triggers_halving_or_fails_loudly() {
    let (_, pr, phi) = setup(1024);
    let mut cfg = EvolutionConfig::new(8e-3, 1.0, Scheme::IntegratingFactorRK4);
    cfg.monitor_every = 25;
    cfg.drift_tolerance = 1e-9;
    match dynamics::evolve(&phi, &cfg, &pr) {
        Ok(traj) => {
            assert!(traj.halvings > 0);
            assert!(traj.dt_final < 8e-3);
            assert!(traj.max_drift.iter().all(|d| *d <= 1e-9));
        }
        Err(e) => assert_eq!(e.name(), "DriftExceeded"),
    }
}

