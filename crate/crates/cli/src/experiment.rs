//! Perturbed-soliton runs: initial data, evolution with orbital tracking, and
//! the A/P diagnostics of the instability argument.

use log::warn;
use serde::Serialize;

use dnls_core::dynamics::{self, Control, Trajectory};
use dnls_core::grid::{inner_l2, Field};
use dnls_core::modulation::{self, Instability, Orbit, UnstableDirection};
use dnls_core::random::{random_field, RandomFieldSpec};
use dnls_core::waves::{self, Verdict};
use dnls_core::Error;

use crate::config::{PerturbationKind, StabilityExperimentConfig};
use crate::error::CliResult;

/// Random perturbations use modes up to this multiple of the decay rate.
pub const RANDOM_BAND_FACTOR: f64 = 1.5;
/// Envelope width of random perturbations in units of the decay length.
pub const RANDOM_ENVELOPE_WIDTHS: f64 = 4.0;
/// `|P|` below which the `dA/dt = P` comparison is skipped.
pub const P_FLOOR: f64 = 1e-8;

/// Initial data `phi + perturbation` for one of the supported directions.
pub struct PerturbedData {
    pub u0: Field,
    pub kind_used: PerturbationKind,
    pub direction: Option<UnstableDirection>,
    pub warnings: Vec<String>,
}

/// The seeded random direction: band-limited, localized on the wave, with the H1 norm of `phi`.
pub fn random_direction(orbit: &Orbit, seed: u64) -> Field {
    let s = orbit.omega().decay_rate();
    let spec = RandomFieldSpec::new(seed, 0, RANDOM_BAND_FACTOR * s)
        .with_envelope(0.0, RANDOM_ENVELOPE_WIDTHS / s);
    random_field(orbit.grid(), &spec).scale_real(orbit.phi().norm_h1())
}

pub fn perturbed_initial(
    orbit: &Orbit,
    kind: PerturbationKind,
    lambda: f64,
    seed: u64,
) -> CliResult<PerturbedData> {
    let phi = orbit.phi();
    let mut warnings = Vec::new();
    let mut direction = None;
    let mut kind_used = kind;

    // the unstable direction is only defined where d'' is negative definite
    let verdict = waves::classify(orbit.omega(), orbit.params(), waves::DEFAULT_BORDERLINE_TOL)?.verdict;
    if verdict == Verdict::Unstable {
        direction = Some(modulation::unstable_direction(
            orbit.omega(),
            orbit.params(),
            orbit.grid(),
            modulation::FD_STEP,
        )?);
    } else if kind == PerturbationKind::PsiDirection {
        let msg = format!(
            "regime is {verdict:?}, no unstable direction exists; falling back to the scaling direction"
        );
        warn!("{msg}");
        warnings.push(msg);
        kind_used = PerturbationKind::Scaling;
    }

    let u0 = match kind_used {
        PerturbationKind::PsiDirection => {
            let psi = &direction.as_ref().expect("unstable regime").psi;
            phi.add_scaled(psi, lambda)
        }
        PerturbationKind::Scaling => phi.scale_real(1.0 + lambda),
        PerturbationKind::Random => phi.add_scaled(&random_direction(orbit, seed), lambda),
    };
    Ok(PerturbedData {
        u0,
        kind_used,
        direction,
        warnings,
    })
}

/// One monitor point of a stability run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub a: f64,
    pub p: f64,
    pub orbdist: f64,
    /// `max_j |<Q_j'(u), q(u)>|`, relative to `||Q_j'(u)|| ||q(u)||`.
    pub charge_pairing: f64,
    pub h_min_eigenvalue: f64,
    pub in_tube: bool,
}

impl MonitorRow {
    pub fn csv_cells(&self) -> [f64; 6] {
        [self.t, self.alpha0, self.alpha1, self.a, self.p, self.orbdist]
    }
}

/// Comparison of a five-point `dA/dt` with `P` on the interior in-tube samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeCheck {
    pub points: usize,
    pub max_relative_error: Option<f64>,
    pub worst_t: Option<f64>,
}

/// `dA/dt` by the fourth-order centered stencil on uniformly spaced in-tube samples.
pub fn check_da_dt(rows: &[MonitorRow]) -> DerivativeCheck {
    let mut points = 0;
    let mut worst: Option<(f64, f64)> = None;
    for w in rows.windows(5) {
        if !w.iter().all(|r| r.in_tube) {
            continue;
        }
        let h = w[1].t - w[0].t;
        let uniform = w.windows(2).all(|p| ((p[1].t - p[0].t) - h).abs() <= 1e-9 * h.abs());
        if !uniform || h <= 0.0 {
            continue;
        }
        let p = w[2].p;
        if p.abs() <= P_FLOOR {
            continue;
        }
        let da = (w[0].a - 8.0 * w[1].a + 8.0 * w[3].a - w[4].a) / (12.0 * h);
        let rel = (da - p).abs() / p.abs();
        points += 1;
        if worst.map_or(true, |(e, _)| rel > e) {
            worst = Some((rel, w[2].t));
        }
    }
    DerivativeCheck {
        points,
        max_relative_error: worst.map(|w| w.0),
        worst_t: worst.map(|w| w.1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub verdict: Verdict,
    pub kind_requested: PerturbationKind,
    pub kind_used: PerturbationKind,
    pub lambda: f64,
    pub initial_distance: f64,
    pub max_distance: f64,
    pub max_distance_ratio: f64,
    pub distance_factor: f64,
    pub exceeded: bool,
    pub exceeded_at: Option<f64>,
    pub final_time: f64,
    pub samples: usize,
    /// First monitor time at which the modulation could not be solved.
    pub tube_exit_time: Option<f64>,
    pub p_sign: Option<SignPattern>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub da_dt_check: Option<DerivativeCheck>,
    pub max_charge_pairing: Option<f64>,
    pub min_h_eigenvalue: Option<f64>,
    pub max_drift: [f64; 3],
    pub halvings: u32,
    pub dt_final: f64,
    pub warnings: Vec<String>,
}

pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<MonitorRow>,
    pub trajectory: Trajectory,
    pub direction: Option<UnstableDirection>,
}

fn relative_charge_pairing(u: &Field, q: &Field) -> dnls_core::Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let g = dnls_core::functionals::charge_gradient(j, u);
        let den = g.norm_l2() * q.norm_l2();
        if den > 0.0 {
            worst = worst.max(inner_l2(&g, q)?.abs() / den);
        }
    }
    Ok(worst)
}

pub fn run(cfg: &StabilityExperimentConfig) -> CliResult<ExperimentOutcome> {
    cfg.validate()?;
    let omega = cfg.wave.omega()?;
    let params = cfg.wave.params()?;
    let grid = cfg.wave.grid()?;
    let orbit = Orbit::new(&omega, &params, &grid)?;
    let verdict = waves::classify(&omega, &params, waves::DEFAULT_BORDERLINE_TOL)?.verdict;

    let data = perturbed_initial(&orbit, cfg.kind, cfg.lambda, cfg.seed)?;
    let instability = match &data.direction {
        Some(d) => Some(Instability::new(orbit.clone(), d.psi.clone())?),
        None => None,
    };
    let evo = cfg.evolution.resolve(&data.u0)?;
    let (d0, _) = orbit.orbital_distance(&data.u0)?;

    let mut rows: Vec<MonitorRow> = Vec::new();
    let mut exceeded_at = None;
    let mut tube_exit_time = None;
    let trajectory = dynamics::evolve_observed(&data.u0, &evo, &params, |s| {
        let (dist, _) = orbit.orbital_distance(s.field)?;
        let mut row = MonitorRow {
            t: s.t,
            alpha0: f64::NAN,
            alpha1: f64::NAN,
            a: f64::NAN,
            p: f64::NAN,
            orbdist: dist,
            charge_pairing: f64::NAN,
            h_min_eigenvalue: f64::NAN,
            in_tube: false,
        };
        let solved = match &instability {
            Some(inst) => match inst.evaluate(s.field) {
                Ok(ev) => Some((
                    ev.state.alpha0,
                    ev.state.alpha1,
                    ev.a,
                    ev.p,
                    ev.state.h_min_eigenvalue,
                    relative_charge_pairing(s.field, &ev.q)?,
                )),
                Err(Error::NotInTube { .. }) | Err(Error::NoConvergence { .. }) | Err(Error::SingularH(_)) => {
                    None
                }
                Err(e) => return Err(e),
            },
            None => match orbit.solve_alpha(s.field) {
                Ok(st) => Some((st.alpha0, st.alpha1, f64::NAN, f64::NAN, st.h_min_eigenvalue, f64::NAN)),
                Err(Error::NotInTube { .. }) | Err(Error::NoConvergence { .. }) => None,
                Err(e) => return Err(e),
            },
        };
        match solved {
            Some((a0, a1, a, p, hmin, pairing)) => {
                row.alpha0 = a0;
                row.alpha1 = a1;
                row.a = a;
                row.p = p;
                row.h_min_eigenvalue = hmin;
                row.charge_pairing = pairing;
                row.in_tube = tube_exit_time.is_none();
            }
            None => {
                tube_exit_time.get_or_insert(s.t);
            }
        }
        rows.push(row);
        if exceeded_at.is_none() && dist > cfg.distance_factor * d0 {
            exceeded_at = Some(s.t);
            if cfg.stop_when_exceeded {
                return Ok(Control::Stop);
            }
        }
        Ok(Control::Continue)
    })?;

    let max_distance = rows.iter().map(|r| r.orbdist).fold(0.0, f64::max);
    let tube: Vec<&MonitorRow> = rows.iter().filter(|r| r.in_tube).collect();
    let finite_min = |f: &dyn Fn(&MonitorRow) -> f64| {
        let v: Vec<f64> = tube.iter().map(|r| f(r)).filter(|x| x.is_finite()).collect();
        (!v.is_empty()).then(|| v.iter().cloned().fold(f64::INFINITY, f64::min))
    };
    let finite_max = |f: &dyn Fn(&MonitorRow) -> f64| {
        let v: Vec<f64> = tube.iter().map(|r| f(r)).filter(|x| x.is_finite()).collect();
        (!v.is_empty()).then(|| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let tracked = instability.is_some();
    let p_min = if tracked { finite_min(&|r| r.p) } else { None };
    let p_max = if tracked { finite_max(&|r| r.p) } else { None };
    let p_sign = match (p_min, p_max) {
        (Some(lo), _) if lo > 0.0 => Some(SignPattern::Positive),
        (_, Some(hi)) if hi < 0.0 => Some(SignPattern::Negative),
        (Some(_), Some(_)) => Some(SignPattern::Mixed),
        _ => None,
    };

    let report = ExperimentReport {
        verdict,
        kind_requested: cfg.kind,
        kind_used: data.kind_used,
        lambda: cfg.lambda,
        initial_distance: d0,
        max_distance,
        max_distance_ratio: max_distance / d0,
        distance_factor: cfg.distance_factor,
        exceeded: exceeded_at.is_some(),
        exceeded_at,
        final_time: trajectory.final_time(),
        samples: rows.len(),
        tube_exit_time,
        p_sign,
        p_min,
        p_max,
        da_dt_check: tracked.then(|| check_da_dt(&rows)),
        max_charge_pairing: if tracked { finite_max(&|r| r.charge_pairing) } else { None },
        min_h_eigenvalue: finite_min(&|r| r.h_min_eigenvalue),
        max_drift: trajectory.max_drift,
        halvings: trajectory.halvings,
        dt_final: trajectory.dt_final,
        warnings: data.warnings.clone(),
    };
    Ok(ExperimentOutcome {
        report,
        rows,
        trajectory,
        direction: data.direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EvolutionSpec, WaveSpec};

    fn row(t: f64, a: f64, p: f64) -> MonitorRow {
        MonitorRow {
            t,
            alpha0: 0.0,
            alpha1: 0.0,
            a,
            p,
            orbdist: 0.0,
            charge_pairing: 0.0,
            h_min_eigenvalue: 1.0,
            in_tube: true,
        }
    }

    #[test]
    fn stencil_differentiates_smooth_series() {
        let rows: Vec<MonitorRow> = (0..40)
            .map(|i| {
                let t = 0.05 * i as f64;
                row(t, (0.7 * t).sin(), 0.7 * (0.7 * t).cos())
            })
            .collect();
        let check = check_da_dt(&rows);
        assert_eq!(check.points, 36);
        assert!(check.max_relative_error.unwrap() < 1e-6 / (0.7 * (0.7f64 * 1.9).cos()).abs());
    }

    #[test]
    fn stencil_skips_tube_exits_and_tiny_p() {
        let mut rows: Vec<MonitorRow> = (0..10).map(|i| row(i as f64, 0.0, 0.0)).collect();
        assert_eq!(check_da_dt(&rows).points, 0);
        for r in rows.iter_mut() {
            r.p = 1.0;
            r.a = r.t;
        }
        rows[5].in_tube = false;
        assert_eq!(check_da_dt(&rows).points, 1);
    }

    #[test]
    fn psi_request_falls_back_in_stable_regime() {
        let cfg = StabilityExperimentConfig {
            wave: WaveSpec {
                omega0: 1.0,
                omega1: 0.0,
                b: 0.1875,
                n: 1024,
                half_length: None,
            },
            lambda: 1e-2,
            kind: PerturbationKind::PsiDirection,
            seed: 1,
            evolution: EvolutionSpec::new(Some(2e-3), 0.2),
            distance_factor: 5.0,
            stop_when_exceeded: true,
            plot: false,
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.kind_used, PerturbationKind::Scaling);
        assert_eq!(out.report.warnings.len(), 1);
        assert!(out.report.p_sign.is_none());
        assert!(!out.report.exceeded);
        assert!(out.rows.iter().all(|r| r.in_tube));
    }

    #[test]
    fn random_direction_is_seeded_and_normalized() {
        let om = dnls_core::Omega::new(1.0, 0.0).unwrap();
        let pr = dnls_core::Params::new(0.1875).unwrap();
        let g = waves::soliton_grid(&om, 1024).unwrap();
        let orbit = Orbit::new(&om, &pr, &g).unwrap();
        let a = random_direction(&orbit, 12345);
        let b = random_direction(&orbit, 12345);
        assert_eq!(a.values(), b.values());
        assert!((a.norm_h1() - orbit.phi().norm_h1()).abs() < 1e-12 * a.norm_h1());
        assert!(a.spectral_tail() < dynamics::RESOLUTION_LIMIT);
    }
}
