//! Time integration on the periodic grid.
//!
//! Writing `u_t = L u + N(u)` with `L = i d_x^2` (diagonal, `-i k^2` in Fourier)
//! and `N(u) = -|u|^2 u_x + i b |u|^4 u`, two integrators are provided:
//! integrating-factor RK4 (exact linear propagator, fourth order) and the
//! implicit midpoint rule (second order, conserves `Q0` exactly), the latter
//! serving as an independent oracle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{self, ThetaPair};
use crate::grid::{Field, Grid};
use crate::waves::{self, Omega, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(alias = "rk4")]
    IntegratingFactorRK4,
    #[serde(alias = "midpoint")]
    ImplicitMidpoint,
}

/// Relative spectral tail above which initial data counts as unresolved.
pub const RESOLUTION_LIMIT: f64 = 1e-10;
/// H^1 growth factor that triggers [`Error::BlowupSuspected`].
pub const BLOWUP_FACTOR: f64 = 1e3;
/// Fixed-point tolerance and budget of the implicit midpoint rule.
pub const MIDPOINT_TOL: f64 = 1e-12;
pub const MIDPOINT_MAX_ITER: usize = 100;

fn default_true() -> bool {
    true
}
fn default_monitor_every() -> usize {
    100
}
fn default_drift_tolerance() -> f64 {
    1e-7
}
fn default_max_halvings() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_monitor_every")]
    pub monitor_every: usize,
    #[serde(default = "default_drift_tolerance")]
    pub drift_tolerance: f64,
    /// How many times `dt` may be halved when the drift rate exceeds the tolerance.
    #[serde(default = "default_max_halvings")]
    pub max_halvings: u32,
    /// Keep a snapshot every this many monitor points (plus the final state).
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            t_end,
            scheme,
            dealias: true,
            monitor_every: default_monitor_every(),
            drift_tolerance: default_drift_tolerance(),
            max_halvings: default_max_halvings(),
            snapshot_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.monitor_every == 0 {
            return bad("monitor_every must be at least 1".into());
        }
        if !(self.drift_tolerance > 0.0) {
            return bad(format!(
                "drift_tolerance must be positive, got {}",
                self.drift_tolerance
            ));
        }
        if self.snapshot_every == Some(0) {
            return bad("snapshot_every must be at least 1".into());
        }
        Ok(())
    }
}

/// `min(0.25 h / max(1, peak^2), 0.5 / k_max)`.
pub fn default_dt(u0: &Field) -> f64 {
    let grid = u0.grid();
    let peak = u0.max_abs();
    (0.25 * grid.spacing() / peak.powi(2).max(1.0)).min(0.5 / grid.k_max())
}

/// `u_t = i u_xx - |u|^2 u_x + i b |u|^4 u = -i E'(u)`.
pub fn rhs(u: &Field, params: &Params) -> Field {
    let du = u.derivative();
    let ddu = u.second_derivative();
    let b = params.b();
    let values = u
        .values()
        .iter()
        .zip(du.values())
        .zip(ddu.values())
        .map(|((&z, &dz), &ddz)| {
            let m = z.norm_sqr();
            Complex64::i() * ddz - m * dz + Complex64::i() * b * m * m * z
        })
        .collect();
    Field::from_values(u.grid(), values)
}

/// Stateful single-scheme stepper in Fourier space. `dt` may be negative.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    b: f64,
    scheme: Scheme,
    mask: Option<Vec<bool>>,
    dt: f64,
    t: f64,
    spec: Vec<Complex64>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Stepper {
    pub fn new(u0: &Field, params: &Params, scheme: Scheme, dt: f64, dealias: bool) -> Self {
        let grid = u0.grid().clone();
        let mask = dealias.then(|| grid.dealias_mask());
        let mut s = Self {
            b: params.b(),
            scheme,
            mask,
            dt,
            t: 0.0,
            spec: u0.spectrum(),
            half: Vec::new(),
            full: Vec::new(),
            grid,
        };
        s.set_dt(dt);
        s
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
        let ks = self.grid.wavenumbers();
        self.half = ks.iter().map(|&k| Complex64::from_polar(1.0, -k * k * 0.5 * dt)).collect();
        self.full = ks.iter().map(|&k| Complex64::from_polar(1.0, -k * k * dt)).collect();
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn field(&self) -> Field {
        Field::from_spectrum(&self.grid, self.spec.clone())
    }

    /// Nonlinear term in Fourier space, optionally with the 2/3 rule applied
    /// both to the input and to the product.
    fn nonlinear(&self, s: &[Complex64]) -> Vec<Complex64> {
        let mut u = s.to_vec();
        if let Some(mask) = &self.mask {
            for (z, &keep) in u.iter_mut().zip(mask) {
                if !keep {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
        let mut ux: Vec<Complex64> = u
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(z, &k)| z * Complex64::new(0.0, k))
            .collect();
        self.grid.inverse(&mut u);
        self.grid.inverse(&mut ux);
        let b = self.b;
        let mut w: Vec<Complex64> = u
            .iter()
            .zip(&ux)
            .map(|(&z, &dz)| {
                let m = z.norm_sqr();
                -m * dz + Complex64::i() * b * m * m * z
            })
            .collect();
        self.grid.forward(&mut w);
        if let Some(mask) = &self.mask {
            for (z, &keep) in w.iter_mut().zip(mask) {
                if !keep {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
        w
    }

    pub fn step(&mut self) -> Result<()> {
        match self.scheme {
            Scheme::IntegratingFactorRK4 => self.step_if_rk4(),
            Scheme::ImplicitMidpoint => self.step_midpoint()?,
        }
        self.t += self.dt;
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn step_if_rk4(&mut self) {
        let dt = self.dt;
        let u = &self.spec;
        let (eh, ef) = (&self.half, &self.full);
        let k1 = self.nonlinear(u);
        let a: Vec<Complex64> = (0..u.len()).map(|j| eh[j] * (u[j] + 0.5 * dt * k1[j])).collect();
        let k2 = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..u.len()).map(|j| eh[j] * u[j] + 0.5 * dt * k2[j]).collect();
        let k3 = self.nonlinear(&b);
        let c: Vec<Complex64> = (0..u.len()).map(|j| ef[j] * u[j] + dt * eh[j] * k3[j]).collect();
        let k4 = self.nonlinear(&c);
        let next = (0..u.len())
            .map(|j| {
                ef[j] * u[j]
                    + dt / 6.0 * (ef[j] * k1[j] + 2.0 * eh[j] * (k2[j] + k3[j]) + k4[j])
            })
            .collect();
        self.spec = next;
    }

    /// `(1 - dt L/2) u1 = (1 + dt L/2) u0 + dt N((u0 + u1)/2)`, iterated to a fixed point.
    fn step_midpoint(&mut self) -> Result<()> {
        let dt = self.dt;
        let ks = self.grid.wavenumbers();
        let u0 = &self.spec;
        let lin: Vec<Complex64> = ks.iter().map(|&k| Complex64::new(0.0, -k * k * 0.5 * dt)).collect();
        let explicit: Vec<Complex64> = (0..u0.len()).map(|j| (1.0 + lin[j]) * u0[j]).collect();
        let implicit: Vec<Complex64> = lin.iter().map(|l| 1.0 / (1.0 - l)).collect();
        let mut u1 = u0.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..MIDPOINT_MAX_ITER {
            let mid: Vec<Complex64> = u0.iter().zip(&u1).map(|(a, b)| 0.5 * (a + b)).collect();
            let n = self.nonlinear(&mid);
            let next: Vec<Complex64> =
                (0..u0.len()).map(|j| implicit[j] * (explicit[j] + dt * n[j])).collect();
            let (mut diff, mut norm) = (0.0, 0.0);
            for (a, b) in next.iter().zip(&u1) {
                diff += (a - b).norm_sqr();
                norm += a.norm_sqr();
            }
            residual = (diff / norm.max(f64::MIN_POSITIVE)).sqrt();
            u1 = next;
            if !residual.is_finite() {
                break;
            }
            if residual <= MIDPOINT_TOL {
                self.spec = u1;
                return Ok(());
            }
        }
        Err(Error::NoConvergence {
            what: "implicit midpoint fixed point",
            iterations: MIDPOINT_MAX_ITER,
            residual,
        })
    }
}

/// Monitor-point data handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub index: usize,
    pub t: f64,
    pub field: &'a Field,
    pub energy: f64,
    pub q0: f64,
    pub q1: f64,
    pub h1norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub h1norm: Vec<f64>,
    pub snapshots: Vec<(f64, Field)>,
    pub final_field: Field,
    /// Largest relative drift of `(E, Q0, Q1)` seen over the run.
    pub max_drift: [f64; 3],
    pub halvings: u32,
    /// Step size in force at the end of the run.
    pub dt_final: f64,
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial sample")
    }
}

#[derive(Debug, Clone, Copy)]
struct Conserved {
    energy: f64,
    q0: f64,
    q1: f64,
    h1norm: f64,
}

impl Conserved {
    fn of(u: &Field, params: &Params) -> Self {
        Self {
            energy: functionals::energy(u, params),
            q0: functionals::charge0(u),
            q1: functionals::charge1(u),
            h1norm: u.norm_h1(),
        }
    }

    fn values(&self) -> [f64; 3] {
        [self.energy, self.q0, self.q1]
    }
}

const QUANTITIES: [&str; 3] = ["E", "Q0", "Q1"];

/// Relative drift `|X - X0| / max(|X0|, 1e-3 ||u0||_{H^1}^2)`; the floor keeps
/// quantities that vanish initially (e.g. `Q1` of a standing wave) meaningful.
fn drifts(now: &Conserved, initial: &Conserved) -> [f64; 3] {
    let floor = 1e-3 * initial.h1norm.powi(2);
    let (a, b) = (now.values(), initial.values());
    [0, 1, 2].map(|i| (a[i] - b[i]).abs() / b[i].abs().max(floor))
}

pub fn evolve(u0: &Field, cfg: &EvolutionConfig, params: &Params) -> Result<Trajectory> {
    evolve_observed(u0, cfg, params, |_| Ok(Control::Continue))
}

/// Evolves `u0` to `cfg.t_end`, calling `observer` at every monitor point
/// (including `t = 0`). The observer may stop the run early.
pub fn evolve_observed<F>(
    u0: &Field,
    cfg: &EvolutionConfig,
    params: &Params,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&Sample<'_>) -> Result<Control>,
{
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite);
    }
    let tail = u0.spectral_tail();
    if tail > RESOLUTION_LIMIT {
        return Err(Error::UnresolvedInput { tail });
    }

    // hit t_end exactly
    let total_steps = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = cfg.t_end / total_steps as f64;
    let mut stepper = Stepper::new(u0, params, cfg.scheme, dt, cfg.dealias);

    let initial = Conserved::of(u0, params);
    let mut traj = Trajectory {
        times: vec![0.0],
        energy: vec![initial.energy],
        q0: vec![initial.q0],
        q1: vec![initial.q1],
        h1norm: vec![initial.h1norm],
        snapshots: Vec::new(),
        final_field: u0.clone(),
        max_drift: [0.0; 3],
        halvings: 0,
        dt_final: dt,
        stopped_early: false,
    };
    if cfg.snapshot_every.is_some() {
        traj.snapshots.push((0.0, u0.clone()));
    }
    let sample0 = Sample {
        index: 0,
        t: 0.0,
        field: u0,
        energy: initial.energy,
        q0: initial.q0,
        q1: initial.q1,
        h1norm: initial.h1norm,
    };
    if observer(&sample0)? == Control::Stop {
        traj.stopped_early = true;
        return Ok(traj);
    }

    let mut previous = initial;
    let mut done = 0usize;
    let mut index = 0usize;
    while done < total_steps {
        let chunk = cfg.monitor_every.min(total_steps - done);
        let t_target = (done + chunk) as f64 * dt;
        let (field, now) = loop {
            let saved = stepper.clone();
            let sub = 1usize << traj.halvings;
            stepper.advance(chunk * sub)?;
            let field = stepper.field();
            let now = Conserved::of(&field, params);
            if !field.is_finite() || !now.h1norm.is_finite() {
                return Err(Error::BlowupSuspected {
                    t: t_target,
                    growth: f64::INFINITY,
                });
            }
            let rate = drifts(&now, &initial)
                .iter()
                .zip(drifts(&previous, &initial))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / (chunk as f64 * dt);
            // halve when this rate would exhaust the tolerance before t_end
            if rate * cfg.t_end.max(1.0) > cfg.drift_tolerance && traj.halvings < cfg.max_halvings {
                traj.halvings += 1;
                stepper = saved;
                stepper.set_dt(dt / (1usize << traj.halvings) as f64);
                log::debug!("drift rate {rate:e} at t = {t_target}: halving dt");
                continue;
            }
            break (field, now);
        };
        done += chunk;
        index += 1;
        // pin the clock to the step count to avoid accumulated rounding
        stepper.t = t_target;

        let growth = now.h1norm / initial.h1norm.max(f64::MIN_POSITIVE);
        if growth > BLOWUP_FACTOR {
            return Err(Error::BlowupSuspected { t: t_target, growth });
        }
        let drift = drifts(&now, &initial);
        for i in 0..3 {
            traj.max_drift[i] = traj.max_drift[i].max(drift[i]);
        }
        if let Some((i, &d)) = drift
            .iter()
            .enumerate()
            .find(|(_, &d)| d > cfg.drift_tolerance)
        {
            return Err(Error::DriftExceeded {
                t: t_target,
                quantity: QUANTITIES[i],
                drift: d,
                tolerance: cfg.drift_tolerance,
            });
        }

        traj.times.push(t_target);
        traj.energy.push(now.energy);
        traj.q0.push(now.q0);
        traj.q1.push(now.q1);
        traj.h1norm.push(now.h1norm);
        let last = done == total_steps;
        if let Some(every) = cfg.snapshot_every {
            if index % every == 0 || last {
                traj.snapshots.push((t_target, field.clone()));
            }
        }
        let sample = Sample {
            index,
            t: t_target,
            field: &field,
            energy: now.energy,
            q0: now.q0,
            q1: now.q1,
            h1norm: now.h1norm,
        };
        let control = observer(&sample)?;
        previous = now;
        traj.final_field = field;
        if control == Control::Stop && !last {
            traj.stopped_early = true;
            break;
        }
    }
    traj.dt_final = stepper.dt();
    Ok(traj)
}

/// `||u(t) - T(omega t) phi_omega||_{H^1}` at the monitor times, starting from the profile.
pub fn soliton_transport_error(
    omega: &Omega,
    params: &Params,
    grid: &Grid,
    cfg: &EvolutionConfig,
) -> Result<Vec<(f64, f64)>> {
    let phi = waves::profile(omega, params, grid)?;
    let mut series = Vec::new();
    evolve_observed(&phi, cfg, params, |s| {
        let exact = functionals::translate(
            &ThetaPair::new(omega.omega0() * s.t, omega.omega1() * s.t),
            &phi,
        );
        series.push((s.t, s.field.sub(&exact).norm_h1()));
        Ok(Control::Continue)
    })?;
    Ok(series)
}
