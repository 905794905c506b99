//! `torus-hj` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::almost_periodic::{epsilon_periods, min_compose, ComposeOptions, EpsilonScan};
use crate::error::{Error, Result};
use crate::geometry::{wrap, UniformGrid};
use crate::hamiltonian::{audit_assumptions, EquilibriumData};
use crate::oracle::{compare_fields, OracleSource, QuadraticOracle};
use crate::periodic::{compute_epsilon0, fundamental_period_check, verify_periodicity};
use crate::periods::{
    check_period_in_d, check_period_in_script_d, enumerate_periods, rationally_independent,
};
use crate::semigroup::{action_function, evolve, plateau_sensitivity};

use super::config::RunConfig;
use super::experiments::{certificate_for, kind_name, run_experiment, ExperimentKind};
use super::export::{export_plot_data, ExportKind};
use super::manifest::{read_fields, ManifestBuilder};
use super::{exit_code, load_periodic, save_periodic};

#[derive(Debug, Parser)]
#[command(
    name = "torus-hj",
    version,
    about = "Contact Hamilton-Jacobi laboratory on the flat torus",
    after_help = "Set RAYON_NUM_THREADS to bound the worker threads.\n\
                  Exit status: 0 pass, 1 failed check or numerical failure, 2 usage or input error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the convexity, growth and monotonicity assumptions.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Equilibrium level c, frequency omega and the subsolution threshold.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
    },
    /// Period certificates.
    Periods {
        #[command(subcommand)]
        cmd: PeriodsCmd,
    },
    /// Evolve the initial data of the config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t_final: Option<f64>,
        /// Comma-separated snapshot times.
        #[arg(long)]
        snapshots: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Action function from a point source.
    Action {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        x0: String,
        /// Source value; defaults to c.
        #[arg(long)]
        u0: Option<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also rerun with twice the plateau height and report the change.
        #[arg(long)]
        sensitivity: bool,
    },
    /// Periodic solutions.
    Periodic {
        #[command(subcommand)]
        cmd: PeriodicCmd,
    },
    /// Minimum of two periodic solutions.
    AlmostPeriodic {
        #[command(subcommand)]
        cmd: AlmostPeriodicCmd,
    },
    /// Closed-form solutions of the quadratic family.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
    /// Preset end-to-end pipelines.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        /// Overrides the preset configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the grid size of the preset.
        #[arg(long = "N")]
        size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot data from a directory of fields.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: ExportKind,
        #[arg(long)]
        out: PathBuf,
        /// Probe points for timeseries, `;`-separated, coordinates comma-separated.
        #[arg(long)]
        points: Option<String>,
        /// Reference level for levelset; defaults to c from periodic.json or the minimum.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RingArg {
    #[value(name = "D")]
    D,
    #[value(name = "scriptD")]
    ScriptD,
}

#[derive(Debug, Subcommand)]
pub enum PeriodsCmd {
    Check {
        #[arg(long = "T")]
        period: f64,
        #[arg(long)]
        omega: String,
        #[arg(long, default_value_t = 10)]
        height: i64,
        #[arg(long, value_enum, default_value = "D")]
        ring: RingArg,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    Enumerate {
        #[arg(long)]
        omega: String,
        #[arg(long, default_value_t = 5)]
        height: i64,
    },
    Independent {
        #[arg(long)]
        omega: String,
        #[arg(long, default_value_t = 20)]
        height: i64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum PeriodicCmd {
    Construct {
        #[arg(long = "T")]
        period: f64,
        /// Normal `k_1..k_n` or full certificate `k_1..k_{n+1}`.
        #[arg(long)]
        k: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AlmostPeriodicCmd {
    Compose {
        #[arg(long)]
        w1: PathBuf,
        #[arg(long)]
        w2: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Scan {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        tau_max: f64,
        #[arg(long)]
        tau_step: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Point,
    Periodic,
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    Eval {
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// JSON object with `lambda`, `omega` and `x0` (point) or `k` (periodic).
        #[arg(long)]
        params: String,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        times: String,
        #[arg(long)]
        out: PathBuf,
    },
    Compare {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        solver: PathBuf,
        /// Fail (exit 1) when the sup error exceeds this.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn csv_f64(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("'{t}' is not a number: {e}")))
        })
        .collect()
}

fn csv_i64(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|e| Error::Config(format!("'{t}' is not an integer: {e}")))
        })
        .collect()
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs a parsed command; returns the exit status.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

/// `Ok(false)` means a check failed.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Audit { config, samples } => {
            let cfg = RunConfig::load(&config)?;
            let h = cfg.hamiltonian.build()?;
            let report = audit_assumptions(h.as_ref(), samples, cfg.seed);
            print_json(&report)?;
            Ok(report.passed())
        }
        Command::Equilibrium { config } => {
            let cfg = RunConfig::load(&config)?;
            let h = cfg.hamiltonian.build()?;
            let eq = EquilibriumData::of(h.as_ref())?;
            let (eps0, m0) = compute_epsilon0(h.as_ref(), &eq.omega, eq.c)?;
            print_json(&json!({
                "hamiltonian": h.name(),
                "c": eq.c,
                "omega": eq.omega,
                "kappa": h.kappa(),
                "delta": h.delta(),
                "epsilon0": eps0,
                "M0": m0,
            }))?;
            Ok(true)
        }
        Command::Periods { cmd } => periods(cmd),
        Command::Solve {
            config,
            t_final,
            snapshots,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let (h, grid) = cfg.build()?;
            let t_final = t_final
                .or(cfg.experiment.t_final)
                .ok_or_else(|| Error::Config("--t-final or experiment.t_final required".into()))?;
            let times = match snapshots {
                Some(s) => csv_f64(&s)?,
                None => cfg.experiment.snapshots.clone(),
            };
            let initial = cfg
                .experiment
                .initial
                .clone()
                .ok_or_else(|| Error::Config("experiment.initial required for solve".into()))?;
            let phi = initial.build(grid, cfg.hamiltonian.lambda, &base_dir(&config))?;
            let mut m = ManifestBuilder::new("solve", Some(&cfg));
            let mut all = times.clone();
            all.insert(0, 0.0);
            let r = evolve(&phi, t_final, h.as_ref(), &cfg.solver, &all)?;
            m.steps(r.diagnostics.steps as u64);
            m.derive("step", r.diagnostics.step);
            m.derive("candidates", r.diagnostics.candidates);
            m.derive("time_rounding", r.diagnostics.time_rounding);
            m.derive("warnings", &r.diagnostics.warnings);
            m.write_fields(&out, "", &r.snapshots)?;
            let mut lines = String::new();
            for (k, (lo, hi)) in r.diagnostics.min_trace.iter().zip(&r.diagnostics.max_trace).enumerate() {
                lines.push_str(&json!({"step": k + 1, "t": (k + 1) as f64 * r.diagnostics.step, "min": lo, "max": hi}).to_string());
                lines.push('\n');
            }
            m.write_file(&out, "diagnostics.jsonl", lines.as_bytes())?;
            m.claim("semigroup-evolution");
            let man = m.finish(Some(&out))?;
            print_json(&json!({"snapshots": r.snapshots.len(), "out": out, "step": r.diagnostics.step}))?;
            Ok(man.pass)
        }
        Command::Action {
            config,
            x0,
            u0,
            t,
            out,
            sensitivity,
        } => {
            let cfg = RunConfig::load(&config)?;
            let (h, grid) = cfg.build()?;
            let x0 = wrap(&csv_f64(&x0)?)?;
            let u0 = match u0 {
                Some(u) => u,
                None => EquilibriumData::of(h.as_ref())?.c,
            };
            let f = action_function(&x0, u0, t, grid, h.as_ref(), &cfg.solver)?;
            let mut m = ManifestBuilder::new("action", Some(&cfg));
            m.derive("x0", x0.coords());
            m.derive("u0", u0);
            if sensitivity {
                let s = plateau_sensitivity(&x0, u0, t, grid, h.as_ref(), &cfg.solver)?;
                m.derive("plateau_sensitivity", &s);
            }
            m.write_fields(&out, "", std::slice::from_ref(&f))?;
            m.claim("action-function");
            let man = m.finish(Some(&out))?;
            print_json(&json!({"min": f.min_value(), "max": f.max_value(), "out": out}))?;
            Ok(man.pass)
        }
        Command::Periodic { cmd } => periodic(cmd),
        Command::AlmostPeriodic { cmd } => almost(cmd),
        Command::Oracle { cmd } => oracle(cmd),
        Command::Experiment {
            kind,
            config,
            size,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => kind.preset(),
            };
            if let Some(n) = size {
                cfg.grid.size = n;
            }
            let man = run_experiment(kind, Some(cfg), Some(&out))?;
            for c in &man.checks {
                eprintln!(
                    "{} {} = {:.6e} ({})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.bound
                );
            }
            print_json(&json!({"experiment": kind_name(kind), "pass": man.pass, "checks": man.checks}))?;
            Ok(man.pass)
        }
        Command::Export {
            input,
            kind,
            out,
            points,
            level,
            tol,
        } => {
            let fields = read_fields(&input)?;
            let n = fields[0].grid.n;
            let pts = match points {
                Some(s) => s.split(';').map(csv_f64).collect::<Result<Vec<_>>>()?,
                None => vec![vec![0.0; n]],
            };
            let level = match level {
                Some(l) => l,
                None => match load_periodic(&input) {
                    Ok(sol) => sol.c,
                    Err(_) => fields.iter().map(|f| f.min_value()).fold(f64::INFINITY, f64::min),
                },
            };
            let written = export_plot_data(&fields, kind, &out, &pts, level, tol)?;
            print_json(&json!({"files": written}))?;
            Ok(true)
        }
    }
}

fn periods(cmd: PeriodsCmd) -> Result<bool> {
    match cmd {
        PeriodsCmd::Check {
            period,
            omega,
            height,
            ring,
            tol,
        } => {
            let omega = csv_f64(&omega)?;
            if omega.iter().all(|w| *w == 0.0) {
                print_json(&json!({"status": "omega-zero", "certificate": null}))?;
                return Ok(true);
            }
            let search = match ring {
                RingArg::D => check_period_in_d(period, &omega, height, tol)?,
                RingArg::ScriptD => check_period_in_script_d(period, &omega, height, tol)?,
            };
            print_json(&json!({
                "status": search.status(),
                "certificate": search.certificate,
                "residual": search.certificate.as_ref().map(|c| c.residual).unwrap_or(search.best_residual),
                "normalized": search.certificate.is_some(),
                "best_k": search.best_k,
                "height": search.height,
            }))?;
            Ok(true)
        }
        PeriodsCmd::Enumerate { omega, height } => {
            let omega = csv_f64(&omega)?;
            let list = enumerate_periods(&omega, height)?;
            let rows: Vec<_> = list
                .iter()
                .map(|(t, c)| json!({"T": t, "certificate": c}))
                .collect();
            print_json(&rows)?;
            Ok(true)
        }
        PeriodsCmd::Independent { omega, height, tol } => {
            let omega = csv_f64(&omega)?;
            print_json(&rationally_independent(&omega, height, tol))?;
            Ok(true)
        }
    }
}

fn periodic(cmd: PeriodicCmd) -> Result<bool> {
    match cmd {
        PeriodicCmd::Construct {
            period,
            k,
            config,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let (h, grid) = cfg.build()?;
            let cert = certificate_for(period, &csv_i64(&k)?, &cfg.hamiltonian.omega)?;
            let opts = cfg.experiment.periodic.clone().unwrap_or_default();
            let mut m = ManifestBuilder::new("periodic construct", Some(&cfg));
            let mut sol = crate::periodic::iterate_Uk(&cert, grid, h.as_ref(), &cfg.solver, &opts)?;
            let rep = verify_periodicity(&sol, h.as_ref(), &cfg.solver, opts.conv_tol, opts.time_samples)?;
            m.derive("certificate", &cert);
            m.derive("periodicity", &rep);
            m.check("converged", sol.converged, sol.comoving_defect, &format!("<= {:e}", opts.conv_tol));
            m.check("nontrivial", rep.nontrivial, rep.oscillation, "> max(10 period_defect, gap bound)");
            m.claim("periodic-existence");
            sol.verification = Some(rep.clone());
            save_periodic(&mut m, &out, "", &sol)?;
            m.write_file(&out, "config.toml", cfg.to_toml().as_bytes())?;
            let man = m.finish(Some(&out))?;
            print_json(&json!({"periodicity": rep, "converged": sol.converged, "out": out}))?;
            Ok(man.pass)
        }
        PeriodicCmd::Verify { input } => {
            let cfg = RunConfig::load(&input.join("config.toml"))?;
            let h = cfg.hamiltonian.build()?;
            let sol = load_periodic(&input)?;
            let opts = cfg.experiment.periodic.clone().unwrap_or_default();
            let rep = verify_periodicity(&sol, h.as_ref(), &cfg.solver, opts.conv_tol, opts.time_samples)?;
            let p = sol.period;
            let fp = if sol.certificate.rhs().abs() == 1 {
                Some(fundamental_period_check(&sol, &[p / 4.0, p / 2.0, 3.0 * p / 4.0], opts.conv_tol)?)
            } else {
                None
            };
            let pass = rep.nontrivial
                && rep.gap_pass
                && rep.floor >= sol.c - 1e-9
                && fp.as_ref().is_none_or(|f| f.pass);
            print_json(&json!({"pass": pass, "periodicity": rep, "fundamental_period": fp}))?;
            Ok(pass)
        }
    }
}

fn almost(cmd: AlmostPeriodicCmd) -> Result<bool> {
    match cmd {
        AlmostPeriodicCmd::Compose { w1, w2, out } => {
            let cfg = RunConfig::load(&w1.join("config.toml"))?;
            let h = cfg.hamiltonian.build()?;
            let a = load_periodic(&w1)?;
            let b = load_periodic(&w2)?;
            let ap = min_compose(&a, &b, h.as_ref(), &cfg.solver, &ComposeOptions::default())?;
            let mut m = ManifestBuilder::new("almost-periodic compose", Some(&cfg));
            save_periodic(&mut m, &out, "w1", &a)?;
            save_periodic(&mut m, &out, "w2", &b)?;
            m.write_fields(&out, "", &ap.composed)?;
            m.write_file(&out, "config.toml", cfg.to_toml().as_bytes())?;
            m.derive("ratio_screen", &ap.ratio_witness);
            m.claim("almost-periodic-min");
            let man = m.finish(Some(&out))?;
            print_json(&json!({"ratio_screen": ap.ratio_witness, "samples": ap.composed.len(), "out": out}))?;
            Ok(man.pass)
        }
        AlmostPeriodicCmd::Scan {
            input,
            epsilon,
            tau_max,
            tau_step,
        } => {
            let cfg = RunConfig::load(&input.join("config.toml"))?;
            let h = cfg.hamiltonian.build()?;
            let a = load_periodic(&input.join("w1"))?;
            let b = load_periodic(&input.join("w2"))?;
            let opts = ComposeOptions {
                observation_window: (4.0 * tau_max).max(ComposeOptions::default().observation_window),
                ..Default::default()
            };
            let ap = min_compose(&a, &b, h.as_ref(), &cfg.solver, &opts)?;
            let mut scan = EpsilonScan::new(epsilon, tau_max);
            scan.tau_step = tau_step;
            scan.seed = cfg.seed;
            let report = epsilon_periods(&ap, &scan)?;
            std::fs::write(input.join("epsilon_periods.json"), serde_json::to_string_pretty(&report)?)?;
            print_json(&report)?;
            Ok(true)
        }
    }
}

fn oracle(cmd: OracleCmd) -> Result<bool> {
    match cmd {
        OracleCmd::Eval {
            kind,
            params,
            grid,
            times,
            out,
        } => {
            let mut v: serde_json::Value = serde_json::from_str(&params)
                .map_err(|e| Error::Config(format!("--params: {e}")))?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| Error::Config("--params must be a JSON object".into()))?;
            let lambda = obj.remove("lambda").and_then(|x| x.as_f64()).unwrap_or(1.0);
            let omega: Vec<f64> = serde_json::from_value(
                obj.remove("omega")
                    .ok_or_else(|| Error::Config("--params needs omega".into()))?,
            )
            .map_err(|e| Error::Config(format!("omega: {e}")))?;
            obj.insert(
                "kind".into(),
                json!(match kind {
                    OracleKind::Point => "point",
                    OracleKind::Periodic => "periodic",
                }),
            );
            let source: OracleSource =
                serde_json::from_value(v).map_err(|e| Error::Config(format!("--params: {e}")))?;
            let oracle = QuadraticOracle { lambda, omega, source };
            let g = UniformGrid::new(oracle.dim(), grid)?;
            let fields = csv_f64(&times)?
                .into_iter()
                .map(|t| oracle.field(g, t))
                .collect::<Result<Vec<_>>>()?;
            let mut m = ManifestBuilder::new("oracle eval", None);
            m.derive("oracle", &oracle);
            m.write_fields(&out, "", &fields)?;
            let man = m.finish(Some(&out))?;
            print_json(&json!({"fields": fields.len(), "out": out}))?;
            Ok(man.pass)
        }
        OracleCmd::Compare { reference, solver, tol } => {
            let r = read_fields(&reference)?;
            let s = read_fields(&solver)?;
            let report = compare_fields(&r, &s)?;
            print_json(&report)?;
            Ok(tol.is_none_or(|t| report.sup <= t))
        }
    }
}
