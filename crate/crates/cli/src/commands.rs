//! Command-line surface and the command implementations.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use dnls_core::dynamics::{self, Control, Scheme};
use dnls_core::functionals::{self, translate, FunctionalReport, ThetaPair};
use dnls_core::modulation::Orbit;
use dnls_core::waves::{self, Params};

use crate::acceptance::{self, Mutation, Resolution};
use crate::config::{self, EvolveConfig, InitialData, PerturbationKind, StabilityExperimentConfig, WaveSpec};
use crate::error::{CliError, CliResult};
use crate::experiment;
use crate::output::{csv, field_csv, to_json, OutputDir, RunManifest};
use crate::plot;

#[derive(Debug, Parser)]
#[command(name = "dnls-lab", version, about = "Solitary-wave stability lab for the derivative NLS with a quintic term")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a solitary wave and report its functionals.
    Wave(WaveArgs),
    /// Stability verdict for one wave.
    Classify(ClassifyArgs),
    /// Velocity threshold, single value or a sweep over b.
    Kappa(KappaArgs),
    /// Evolve initial data from a JSON config.
    Evolve(EvolveArgs),
    /// Perturbed-soliton run with orbital tracking.
    StabilityExperiment(ExperimentArgs),
    /// Run the acceptance criteria.
    Selftest(SelftestArgs),
}

/// `(omega0, omega1, b)` either positionally or by flag.
#[derive(Debug, Args)]
pub struct WaveParams {
    /// omega0 omega1 b
    #[arg(num_args = 3, value_names = ["OMEGA0", "OMEGA1", "B"], allow_negative_numbers = true)]
    positional: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
}

impl WaveParams {
    fn resolve(&self) -> CliResult<(f64, f64, f64)> {
        let pick = |flag: Option<f64>, i: usize, name: &str| {
            flag.or_else(|| self.positional.get(i).copied())
                .ok_or_else(|| CliError::Input(format!("missing {name}")))
        };
        Ok((pick(self.omega0, 0, "omega0")?, pick(self.omega1, 1, "omega1")?, pick(self.b, 2, "b")?))
    }
}

#[derive(Debug, Args)]
pub struct WaveArgs {
    #[command(flatten)]
    params: WaveParams,
    #[arg(long, default_value_t = 4096)]
    n: usize,
    /// Half-length of the periodic box.
    #[arg(long)]
    length: Option<f64>,
    #[arg(long, default_value = "dnls-out/wave")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    params: WaveParams,
    /// Width of the borderline band around Q1 = 0.
    #[arg(long, default_value_t = waves::DEFAULT_BORDERLINE_TOL)]
    tol: f64,
    #[arg(long, default_value = "dnls-out/classify")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    #[arg(long, allow_negative_numbers = true, required_unless_present = "sweep")]
    b: Option<f64>,
    /// BMIN BMAX STEPS
    #[arg(long, num_args = 3, value_names = ["BMIN", "BMAX", "STEPS"])]
    sweep: Option<Vec<String>>,
    #[arg(long, default_value = "dnls-out/kappa")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Rk4,
    Midpoint,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Rk4 => Scheme::IntegratingFactorRK4,
            SchemeArg::Midpoint => Scheme::ImplicitMidpoint,
        }
    }
}

/// Flags that override the evolution block of a config.
#[derive(Debug, Args)]
pub struct EvolutionOverrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a gnuplot script and an SVG plot.
    #[arg(long)]
    plot: bool,
}

impl EvolutionOverrides {
    fn apply(&self, wave: &mut WaveSpec, evo: &mut config::EvolutionSpec, seed: &mut u64, plot: &mut bool) {
        if let Some(dt) = self.dt {
            evo.dt = Some(dt);
        }
        if let Some(t) = self.t_end {
            evo.t_end = t;
        }
        if let Some(s) = self.scheme {
            evo.scheme = s.into();
        }
        if let Some(n) = self.n {
            wave.n = n;
        }
        if let Some(s) = self.seed {
            *seed = s;
        }
        *plot |= self.plot;
    }
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: EvolutionOverrides,
    #[arg(long, default_value = "dnls-out/evolve")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    kind: Option<PerturbationKind>,
    #[command(flatten)]
    overrides: EvolutionOverrides,
    #[arg(long, default_value = "dnls-out/stability")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Use the full acceptance resolution instead of the reduced one.
    #[arg(long)]
    full: bool,
    /// Restrict to these criteria, e.g. `--only 1,4`.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long, hide = true, value_enum)]
    mutate: Option<Mutation>,
    #[arg(long, default_value = "dnls-out/selftest")]
    out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Wave(a) => wave(a),
        Command::Classify(a) => classify(a),
        Command::Kappa(a) => kappa(a),
        Command::Evolve(a) => evolve(a),
        Command::StabilityExperiment(a) => stability_experiment(a),
        Command::Selftest(a) => selftest(a),
    }
}

fn wave(args: WaveArgs) -> CliResult<()> {
    let (w0, w1, b) = args.params.resolve()?;
    let spec = WaveSpec {
        omega0: w0,
        omega1: w1,
        b,
        n: args.n,
        half_length: args.length,
    };
    let manifest = RunManifest::start("wave", json!(spec), vec![]);
    let (omega, params, grid) = (spec.omega()?, spec.params()?, spec.grid()?);
    let phi = waves::profile(&omega, &params, &grid)?;
    let mut out = OutputDir::new(&args.out)?;
    out.write("profile.csv", &field_csv(&phi))?;
    let report = json!({
        "omega0": w0,
        "omega1": w1,
        "b": b,
        "gamma": params.gamma(),
        "n": grid.len(),
        "half_length": grid.half_length(),
        "peak_abs": phi.values().iter().map(|z| z.norm()).fold(0.0, f64::max),
        "functionals": FunctionalReport::of(&omega, &phi, &params)?,
        "closed_Q0": waves::closed_q0(&omega, &params),
        "closed_Q1": waves::closed_q1(&omega, &params),
        "stationary_residual": functionals::action_gradient(&omega, &phi, &params).norm_l2() / phi.norm_h1(),
    });
    out.write("functionals.json", &to_json(&report))?;
    manifest.finish(&mut out, report)?;
    info!("wrote {}", out.root().display());
    Ok(())
}

fn classify(args: ClassifyArgs) -> CliResult<()> {
    let (w0, w1, b) = args.params.resolve()?;
    let manifest = RunManifest::start("classify", json!({"omega0": w0, "omega1": w1, "b": b, "tol": args.tol}), vec![]);
    let omega = dnls_core::Omega::new(w0, w1)?;
    let params = Params::new(b)?;
    let report = waves::classify(&omega, &params, args.tol)?;
    let text = to_json(&report);
    print!("{text}");
    let mut out = OutputDir::new(&args.out)?;
    out.write("classification.json", &text)?;
    manifest.finish(&mut out, json!(report))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct KappaRow {
    b: f64,
    xi_hat: Option<f64>,
    kappa: Option<f64>,
    g_residual: Option<f64>,
}

fn kappa_row(b: f64) -> CliResult<KappaRow> {
    let params = Params::new(b)?;
    if b == 0.0 {
        return Ok(KappaRow {
            b,
            xi_hat: None,
            kappa: None,
            g_residual: None,
        });
    }
    let xi = waves::xi_hat(&params)?;
    Ok(KappaRow {
        b,
        xi_hat: Some(xi),
        kappa: Some(waves::kappa(&params)?),
        g_residual: Some(waves::g_function(xi, &params)? - 1.0),
    })
}

fn kappa(args: KappaArgs) -> CliResult<()> {
    let mut out = OutputDir::new(&args.out)?;
    if let Some(sweep) = &args.sweep {
        let parse = |s: &str, what: &str| -> CliResult<f64> {
            s.parse().map_err(|_| CliError::Input(format!("sweep {what} must be a number, got {s:?}")))
        };
        let (lo, hi) = (parse(&sweep[0], "bmin")?, parse(&sweep[1], "bmax")?);
        let steps: usize = sweep[2]
            .parse()
            .map_err(|_| CliError::Input(format!("sweep steps must be a positive integer, got {:?}", sweep[2])))?;
        if steps < 2 || !(hi > lo) {
            return Err(CliError::Input("sweep needs bmax > bmin and at least 2 steps".into()));
        }
        let manifest = RunManifest::start("kappa", json!({"bmin": lo, "bmax": hi, "steps": steps}), vec![]);
        let rows = (0..steps)
            .into_par_iter()
            .map(|i| kappa_row(lo + (hi - lo) * i as f64 / (steps - 1) as f64))
            .collect::<CliResult<Vec<_>>>()?;
        let mut text = String::from("b,xi_hat,kappa,g_residual\n");
        let cell = |x: Option<f64>| x.map_or("null".to_string(), crate::output::fmt_f64);
        for r in &rows {
            text.push_str(&format!(
                "{},{},{},{}\n",
                crate::output::fmt_f64(r.b),
                cell(r.xi_hat),
                cell(r.kappa),
                cell(r.g_residual)
            ));
        }
        print!("{text}");
        out.write("kappa_sweep.csv", &text)?;
        manifest.finish(&mut out, json!({"rows": rows.len()}))?;
    } else {
        let b = args.b.expect("clap requires b without a sweep");
        let manifest = RunManifest::start("kappa", json!({"b": b}), vec![]);
        let row = kappa_row(b)?;
        let text = to_json(&row);
        print!("{text}");
        out.write("kappa.json", &text)?;
        manifest.finish(&mut out, json!(row))?;
    }
    Ok(())
}

fn plots(out: &mut OutputDir, csv_name: &str, columns: &[(usize, &str)], title: &str, t: &[f64], series: &[(&str, Vec<f64>)]) -> CliResult<()> {
    let stem = csv_name.trim_end_matches(".csv");
    out.write(&format!("{stem}.gp"), &plot::gnuplot_script(csv_name, columns, &format!("{stem}.png"), false))?;
    let s: Vec<(&str, &[f64], &[f64])> = series.iter().map(|(n, v)| (*n, t, v.as_slice())).collect();
    out.write(&format!("{stem}.svg"), &plot::svg_line_plot(title, "t", &s))?;
    Ok(())
}

fn evolve(args: EvolveArgs) -> CliResult<()> {
    let mut cfg: EvolveConfig = config::load(&args.config)?;
    args.overrides
        .apply(&mut cfg.wave, &mut cfg.evolution, &mut cfg.seed, &mut cfg.plot);
    let manifest = RunManifest::start("evolve", json!(cfg), vec![cfg.seed]);
    let (omega, params, grid) = (cfg.wave.omega()?, cfg.wave.params()?, cfg.wave.grid()?);
    let orbit = Orbit::new(&omega, &params, &grid)?;
    let (u0, warnings) = match cfg.initial {
        InitialData::Soliton => (orbit.phi().clone(), vec![]),
        InitialData::Perturbed { perturbation, lambda } => {
            let d = experiment::perturbed_initial(&orbit, perturbation, lambda, cfg.seed)?;
            (d.u0, d.warnings)
        }
    };
    let evo = cfg.evolution.resolve(&u0)?;

    let mut rows: Vec<[f64; 6]> = Vec::new();
    let mut transport = None;
    let traj = dynamics::evolve_observed(&u0, &evo, &params, |s| {
        let (dist, _) = orbit.orbital_distance(s.field)?;
        rows.push([s.t, s.energy, s.q0, s.q1, s.h1norm, dist]);
        if cfg.initial == InitialData::Soliton {
            let exact = translate(&ThetaPair::new(omega.omega0() * s.t, omega.omega1() * s.t), orbit.phi());
            transport = Some(s.field.sub(&exact).norm_h1());
        }
        Ok(Control::Continue)
    })?;

    let mut out = OutputDir::new(&args.out)?;
    out.write(
        "trajectory.csv",
        &csv("t,E,Q0,Q1,h1norm,orbdist", rows.iter().map(|r| r.as_slice())),
    )?;
    for (i, (_, f)) in traj.snapshots.iter().enumerate() {
        out.write(&format!("snap_{i}.csv"), &field_csv(f))?;
    }
    if cfg.plot {
        let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
        plots(&mut out, "trajectory.csv", &[(6, "orbdist")], "orbital distance", &t, &[("orbdist", col(5))])?;
    }
    let results = json!({
        "final_time": traj.final_time(),
        "dt": evo.dt,
        "dt_final": traj.dt_final,
        "halvings": traj.halvings,
        "max_drift": {"E": traj.max_drift[0], "Q0": traj.max_drift[1], "Q1": traj.max_drift[2]},
        "transport_error": transport,
        "snapshot_times": traj.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
        "warnings": warnings,
    });
    manifest.finish(&mut out, results)?;
    info!("wrote {}", out.root().display());
    Ok(())
}

fn stability_experiment(args: ExperimentArgs) -> CliResult<()> {
    let mut cfg: StabilityExperimentConfig = config::load(&args.config)?;
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(k) = args.kind {
        cfg.kind = k;
    }
    args.overrides
        .apply(&mut cfg.wave, &mut cfg.evolution, &mut cfg.seed, &mut cfg.plot);
    let manifest = RunManifest::start("stability-experiment", json!(cfg), vec![cfg.seed]);
    let outcome = experiment::run(&cfg)?;

    let mut out = OutputDir::new(&args.out)?;
    let cells: Vec<[f64; 6]> = outcome.rows.iter().map(|r| r.csv_cells()).collect();
    out.write(
        "modulation.csv",
        &csv("t,alpha0,alpha1,A,P,orbdist", cells.iter().map(|r| r.as_slice())),
    )?;
    out.write("monitor.json", &to_json(&outcome.rows))?;
    if let Some(d) = &outcome.direction {
        out.write("certificate.json", &to_json(&d.certificate))?;
    }
    if cfg.plot {
        let t: Vec<f64> = cells.iter().map(|r| r[0]).collect();
        let col = |j: usize| cells.iter().map(|r| r[j]).collect::<Vec<f64>>();
        plots(&mut out, "modulation.csv", &[(6, "orbdist")], "orbital distance", &t, &[("orbdist", col(5))])?;
    }
    let report = &outcome.report;
    out.write("report.json", &to_json(report))?;
    print!("{}", to_json(report));
    manifest.finish(&mut out, json!(report))?;
    Ok(())
}

fn selftest(args: SelftestArgs) -> CliResult<()> {
    let res = if args.full { Resolution::full() } else { Resolution::reduced() };
    let manifest = RunManifest::start(
        "selftest",
        json!({"resolution": res, "only": args.only, "mutation": args.mutate.map(|m| format!("{m:?}"))}),
        vec![crate::config::DEFAULT_SEED],
    );
    let results = acceptance::run(res, args.mutate, &args.only);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let mut out = OutputDir::new(&args.out)?;
    out.write("selftest.json", &to_json(&results))?;
    manifest.finish(&mut out, json!({"failed": failed, "total": results.len()}))?;
    if failed > 0 {
        return Err(CliError::Acceptance { failed });
    }
    Ok(())
}
