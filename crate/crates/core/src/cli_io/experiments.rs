//! Preset end-to-end pipelines with manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::almost_periodic::{
    epsilon_periods, min_compose, non_periodicity_check, solution_property_check, AlmostPeriodicSolution,
    ComposeOptions, EpsilonPeriodReport, EpsilonScan, NonPeriodicityReport,
};
use crate::error::{Error, Result};
use crate::geometry::UniformGrid;
use crate::hamiltonian::{ContactHamiltonian, HamiltonianSpec};
use crate::oracle::oracle_periodic_u;
use crate::periodic::{
    compute_epsilon0, fundamental_period_check, iterate_Uk, verify_periodicity, FundamentalPeriodReport,
    PeriodicSolution, PeriodicityReport,
};
use crate::periods::{PeriodCertificate, RationalHyperplaneSet, Ring};

use super::config::{GridBlock, RunConfig};
use super::manifest::{ManifestBuilder, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Periodic solution on the circle, omega = 1, T = 1.
    PeriodicLine,
    /// Periodic solution on the 2-torus, omega = (1, sqrt 2), T = sqrt 2 - 1.
    PeriodicTorus,
    /// Minimum of periods 1 and 1/sqrt 2 on the 2-torus.
    AlmostPeriodic,
}

impl ExperimentKind {
    pub fn preset(self) -> RunConfig {
        let r2 = 2f64.sqrt();
        let mut cfg = match self {
            ExperimentKind::PeriodicLine => RunConfig::new(
                HamiltonianSpec::quadratic(1.0, &[1.0]),
                GridBlock { n: 1, size: 256 },
            ),
            ExperimentKind::PeriodicTorus => RunConfig::new(
                HamiltonianSpec::quadratic(1.0, &[1.0, r2]),
                GridBlock { n: 2, size: 128 },
            ),
            ExperimentKind::AlmostPeriodic => RunConfig::new(
                HamiltonianSpec::quadratic(1.0, &[1.0, r2]),
                GridBlock { n: 2, size: 64 },
            ),
        };
        match self {
            ExperimentKind::PeriodicLine => {
                cfg.experiment.period = Some(1.0);
                cfg.experiment.k = Some(vec![1, 1]);
            }
            ExperimentKind::PeriodicTorus => {
                cfg.experiment.period = Some(r2 - 1.0);
                cfg.experiment.k = Some(vec![1, 1, 1]);
            }
            ExperimentKind::AlmostPeriodic => {
                cfg.experiment.epsilon = Some(0.05);
                cfg.experiment.tau_max = Some(100.0);
            }
        }
        cfg
    }
}

/// Certificate for `T` from a normal `k` (length `n`) or a full certificate.
pub fn certificate_for(period: f64, k: &[i64], omega: &[f64]) -> Result<PeriodCertificate> {
    let n = omega.len();
    let normal = match k.len() {
        l if l == n || l == n + 1 => &k[..n],
        l => {
            return Err(Error::Config(format!(
                "k has {l} entries; expected {n} or {}",
                n + 1
            )))
        }
    };
    RationalHyperplaneSet::new(normal)?;
    let value: f64 = normal.iter().zip(omega).map(|(a, w)| *a as f64 * w).sum::<f64>() * period;
    let rhs = value.round() as i64;
    let residual = (value - rhs as f64).abs();
    if rhs == 0 || residual > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "k.omega T = {value} is not a nonzero integer for k = {normal:?}"
        )));
    }
    if k.len() == n + 1 && k[n] != rhs {
        return Err(Error::InvalidParameter(format!(
            "certificate right-hand side {} disagrees with k.omega T = {value}",
            k[n]
        )));
    }
    let mut full = normal.to_vec();
    full.push(rhs);
    Ok(PeriodCertificate {
        k: full,
        period,
        residual,
        ring: if rhs.abs() == 1 { Ring::ScriptD } else { Ring::D },
    })
}

/// `sup |u - oracle|` over the stored fields (quadratic Hamiltonians only).
pub fn periodic_oracle_error(sol: &PeriodicSolution, lambda: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in &sol.fields_over_period {
        for i in 0..f.grid.len() {
            let x = crate::geometry::TorusPoint::new(&f.node_point(i))?;
            let o = oracle_periodic_u(&sol.s, &x, f.time, lambda, &sol.omega)?;
            worst = worst.max((f.values[i] - o).abs());
        }
    }
    Ok(worst)
}

pub struct PeriodicRun {
    pub solution: PeriodicSolution,
    pub report: PeriodicityReport,
    pub fundamental: Option<FundamentalPeriodReport>,
    pub oracle_error: Option<f64>,
}

/// Builds, verifies and checks a periodic solution, recording everything in `m`.
pub fn periodic_pipeline(
    cfg: &RunConfig,
    h: &dyn ContactHamiltonian,
    grid: UniformGrid,
    certificate: &PeriodCertificate,
    defect_tol: f64,
    m: &mut ManifestBuilder,
) -> Result<PeriodicRun> {
    let opts = cfg.experiment.periodic.clone().unwrap_or_default();
    let solution = iterate_Uk(certificate, grid, h, &cfg.solver, &opts)?;
    let period = certificate.period;
    m.steps((solution.convergence.len() as u64 + 1) * (period / solution.step).round() as u64);
    m.claim("periodic-existence");
    m.claim("strobe-monotone-decrease");
    let report = verify_periodicity(&solution, h, &cfg.solver, opts.conv_tol, opts.time_samples)?;
    let (eps0, m0) = compute_epsilon0(h, &solution.omega, solution.c)?;
    m.derive("c", solution.c);
    m.derive("omega", &solution.omega);
    m.derive("epsilon0", eps0);
    m.derive("M0", m0);
    m.derive("certificate", certificate);
    m.derive("step", solution.step);
    m.derive("strobe_decrements", &solution.convergence);
    m.derive("periodicity", &report);

    m.check("converged", solution.converged, solution.comoving_defect, &format!("<= {:e}", opts.conv_tol));
    m.check("strobes_monotone", true, 0.0, "U_{k+1} <= U_k + 1e-9");
    m.check("period_defect", report.period_defect <= defect_tol, report.period_defect, &format!("<= {defect_tol:e}"));
    m.check("floor", report.floor >= solution.c - 1e-9, report.floor - solution.c, ">= -1e-9");
    m.check("subsolution_gap", report.gap_pass, report.gap_value - report.gap_bound, ">= -5e-3");
    m.check("nontrivial", report.nontrivial, report.oscillation, "> max(10 period_defect, gap bound)");
    m.claim("subsolution-lower-bound");

    let mut oracle_error = None;
    if cfg.hamiltonian.kind == "quadratic" {
        let lambda = cfg.hamiltonian.lambda;
        let err = periodic_oracle_error(&solution, lambda)?;
        let knorm = solution.s.k_norm();
        let amplitude = lambda / 4.0 * (0.5 / knorm).powi(2);
        m.derive("oracle_amplitude", amplitude);
        m.check("oracle_error", err <= defect_tol, err, &format!("<= {defect_tol:e}"));
        m.check(
            "oscillation",
            report.oscillation >= amplitude - 5e-3,
            report.oscillation,
            &format!(">= {:.6}", amplitude - 5e-3),
        );
        oracle_error = Some(err);
    }

    let mut fundamental = None;
    if certificate.rhs().abs() == 1 {
        let probes = [period / 4.0, period / 2.0, 3.0 * period / 4.0, period];
        let fp = fundamental_period_check(&solution, &probes, opts.conv_tol)?;
        let worst = fp.probes.iter().map(|p| p.identity_gap).fold(0.0, f64::max);
        m.check("fundamental_period", fp.pass, worst, "level sets within h of the flowed S, disjoint from t = 0");
        m.derive("level_sets", &fp);
        m.claim("level-set-identity");
        m.claim("fundamental-period");
        fundamental = Some(fp);
    }
    Ok(PeriodicRun {
        solution,
        report,
        fundamental,
        oracle_error,
    })
}

pub struct AlmostPeriodicRun {
    pub ap: AlmostPeriodicSolution,
    pub property_defect: f64,
    pub scan: EpsilonPeriodReport,
    pub scan_doubled: EpsilonPeriodReport,
    pub non_periodicity: NonPeriodicityReport,
}

pub fn almost_periodic_pipeline(
    cfg: &RunConfig,
    h: &dyn ContactHamiltonian,
    grid: UniformGrid,
    m: &mut ManifestBuilder,
) -> Result<AlmostPeriodicRun> {
    let omega = &cfg.hamiltonian.omega;
    if omega.len() != 2 {
        return Err(Error::Config("the almost-periodic preset needs n = 2".into()));
    }
    let opts = cfg.experiment.periodic.clone().unwrap_or_default();
    let c1 = certificate_for(1.0 / omega[0], &[1, 0], omega)?;
    let c2 = certificate_for(1.0 / omega[1], &[0, 1], omega)?;
    let w1 = iterate_Uk(&c1, grid, h, &cfg.solver, &opts)?;
    let w2 = iterate_Uk(&c2, grid, h, &cfg.solver, &opts)?;
    let compose = ComposeOptions {
        screen_height: Some(cfg.experiment.height.unwrap_or(50)),
        ..Default::default()
    };
    let ap = min_compose(&w1, &w2, h, &cfg.solver, &compose)?;
    m.derive("T1", w1.period);
    m.derive("T2", w2.period);
    m.derive("ratio_screen", &ap.ratio_witness);
    m.claim("almost-periodic-min");
    m.claim("min-of-solutions-is-solution");

    let probes: Vec<usize> = (0..ap.composed.len().saturating_sub(4)).step_by(3).collect();
    let property_defect = solution_property_check(&ap, h, &cfg.solver, &probes, 4)?;
    m.check("solution_property", property_defect <= 1e-9, property_defect, "<= 1e-9");

    let epsilon = cfg.experiment.epsilon.unwrap_or(0.05);
    let tau_max = cfg.experiment.tau_max.unwrap_or(100.0);
    let mut scan_cfg = EpsilonScan::new(epsilon, tau_max);
    scan_cfg.seed = cfg.seed;
    let scan = epsilon_periods(&ap, &scan_cfg)?;
    scan_cfg.tau_max = 2.0 * tau_max;
    let scan_doubled = epsilon_periods(&ap, &scan_cfg)?;
    m.derive("epsilon_periods", &scan);
    m.derive("max_gap_doubled", scan_doubled.max_gap);
    m.claim("epsilon-periods-relatively-dense");
    let near = scan.near(70.0);
    if tau_max >= 70.0 {
        m.check("tau_70", near.is_some(), near.unwrap_or(f64::NAN), "found within one lattice cell of 70");
    }
    m.check(
        "max_gap_bounded",
        scan_doubled.max_gap <= scan.max_gap * (1.0 + 1e-9),
        scan_doubled.max_gap,
        &format!("<= {}", scan.max_gap),
    );

    let candidates: Vec<f64> = scan.periods_found.iter().copied().filter(|t| *t > 0.0).collect();
    let non_periodicity = non_periodicity_check(&ap, &candidates, 0.0)?;
    m.check(
        "non_periodicity",
        non_periodicity.pass,
        non_periodicity.min_displacement,
        "> 0 at every found period",
    );
    m.claim("composition-not-periodic");
    Ok(AlmostPeriodicRun {
        ap,
        property_defect,
        scan,
        scan_doubled,
        non_periodicity,
    })
}

/// Runs a preset (optionally overridden by `cfg`) and writes its outputs.
pub fn run_experiment(kind: ExperimentKind, cfg: Option<RunConfig>, out: Option<&Path>) -> Result<RunManifest> {
    let cfg = cfg.unwrap_or_else(|| kind.preset());
    cfg.validate()?;
    let (h, grid) = cfg.build()?;
    let mut m = ManifestBuilder::new(&format!("experiment {}", kind_name(kind)), Some(&cfg));
    match kind {
        ExperimentKind::PeriodicLine | ExperimentKind::PeriodicTorus => {
            let period = cfg
                .experiment
                .period
                .ok_or_else(|| Error::Config("experiment.T missing".into()))?;
            let k = cfg
                .experiment
                .k
                .clone()
                .ok_or_else(|| Error::Config("experiment.k missing".into()))?;
            let cert = certificate_for(period, &k, &cfg.hamiltonian.omega)?;
            let tol = if grid.n == 1 { 5e-3 } else { 1e-2 };
            let run = periodic_pipeline(&cfg, h.as_ref(), grid, &cert, tol, &mut m)?;
            if let Some(dir) = out {
                super::save_periodic(&mut m, dir, "", &run.solution)?;
            }
        }
        ExperimentKind::AlmostPeriodic => {
            let run = almost_periodic_pipeline(&cfg, h.as_ref(), grid, &mut m)?;
            if let Some(dir) = out {
                super::save_periodic(&mut m, dir, "w1", &run.ap.w1)?;
                super::save_periodic(&mut m, dir, "w2", &run.ap.w2)?;
                m.write_fields(dir, "", &run.ap.composed)?;
                m.write_json(dir, "epsilon_periods.json", &run.scan)?;
                m.write_json(dir, "non_periodicity.json", &run.non_periodicity)?;
            }
        }
    }
    m.finish(out)
}

pub fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::PeriodicLine => "periodic-line",
        ExperimentKind::PeriodicTorus => "periodic-torus",
        ExperimentKind::AlmostPeriodic => "almost-periodic",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificates_from_normals() {
        let c = certificate_for(1.0, &[1], &[1.0]).unwrap();
        assert_eq!(c.k, vec![1, 1]);
        assert_eq!(c.ring, Ring::ScriptD);
        let r2 = 2f64.sqrt();
        let c = certificate_for(r2 - 1.0, &[1, 1, 1], &[1.0, r2]).unwrap();
        assert!(c.residual < 1e-12);
        assert!(certificate_for(0.7, &[1], &[1.0]).is_err());
        assert!(certificate_for(1.0, &[1, 2], &[1.0]).is_err());
        assert!(certificate_for(2.0, &[1], &[1.0]).unwrap().ring == Ring::D);
        assert!(certificate_for(1.0, &[1, 1, 1, 1], &[1.0, r2]).is_err());
    }

    #[test]
    fn small_line_experiment() {
        let mut cfg = ExperimentKind::PeriodicLine.preset();
        cfg.grid.size = 64;
        let dir = tempfile::tempdir().unwrap();
        let man = run_experiment(ExperimentKind::PeriodicLine, Some(cfg), Some(dir.path())).unwrap();
        let names: Vec<&str> = man.checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"period_defect") && names.contains(&"fundamental_period"));
        assert!(man.claims.contains(&"periodic-existence".to_string()));
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("periodic.json").exists());
    }
}
