//! Minimum of two periodic solutions with incommensurate periods.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pointwise_min, raw_distance, sup_norm_diff, ScalarField, UniformGrid};
use crate::hamiltonian::ContactHamiltonian;
use crate::periodic::{sheet_samples, PeriodicSolution};
use crate::semigroup::{Solver, SolverConfig};

/// Search for `T1 / T2 = p / q` with `max(|p|, |q|) <= height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioScreen {
    pub ratio: f64,
    pub height: i64,
    pub tol: f64,
    pub relation: Option<(i64, i64)>,
    /// Closest approach `|ratio - p/q|` over the searched heights.
    pub best_defect: f64,
    pub best: (i64, i64),
}

pub fn ratio_screen(t1: f64, t2: f64, height: i64, tol: f64) -> RatioScreen {
    let ratio = t1 / t2;
    let mut best_defect = f64::INFINITY;
    let mut best = (0, 1);
    let mut relation = None;
    for q in 1..=height {
        let p = (ratio * q as f64).round() as i64;
        if p.abs() > height {
            continue;
        }
        let d = (ratio - p as f64 / q as f64).abs();
        if d < best_defect {
            best_defect = d;
            best = (p, q);
        }
        if relation.is_none() && d <= tol * ratio.abs().max(1.0) {
            relation = Some((p, q));
        }
    }
    RatioScreen {
        ratio,
        height,
        tol,
        relation,
        best_defect,
        best,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeOptions {
    /// `None` skips the rationality screen.
    #[serde(default = "default_height")]
    pub screen_height: Option<i64>,
    #[serde(default = "default_ratio_tol")]
    pub screen_tol: f64,
    /// Number of common-step samples stored from `t = 0`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Length of the window in which shifts are compared.
    #[serde(default = "default_window")]
    pub observation_window: f64,
}

fn default_height() -> Option<i64> {
    Some(50)
}
fn default_ratio_tol() -> f64 {
    1e-9
}
fn default_samples() -> usize {
    16
}
fn default_window() -> f64 {
    800.0
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            screen_height: default_height(),
            screen_tol: default_ratio_tol(),
            samples: default_samples(),
            observation_window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostPeriodicSolution {
    pub w1: PeriodicSolution,
    pub w2: PeriodicSolution,
    /// `min(w1, w2)` at `t = j * step`, `j = 0..samples`.
    pub composed: Vec<ScalarField>,
    pub components: (Vec<ScalarField>, Vec<ScalarField>),
    pub step: f64,
    pub ratio_witness: Option<RatioScreen>,
    pub observation_window: f64,
}

impl AlmostPeriodicSolution {
    pub fn c(&self) -> f64 {
        self.w1.c
    }

    pub fn grid(&self) -> UniformGrid {
        self.w1.grid()
    }

    /// `min(w1(x, t), w2(x, t))` from the periodic extensions.
    pub fn value_at(&self, x: &[f64], t: f64) -> f64 {
        self.w1.value_at(x, t).min(self.w2.value_at(x, t))
    }

    pub fn min_period(&self) -> f64 {
        self.w1.period.min(self.w2.period)
    }
}

/// Marches both time-0 fields with a common step and stores the pointwise
/// minimum at every step.
pub fn min_compose(
    w1: &PeriodicSolution,
    w2: &PeriodicSolution,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    opts: &ComposeOptions,
) -> Result<AlmostPeriodicSolution> {
    let grid = w1.grid();
    if grid != w2.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", grid, w2.grid())));
    }
    if (w1.c - w2.c).abs() > 1e-12 || w1.omega != w2.omega {
        return Err(Error::InvalidParameter(
            "solutions belong to different Hamiltonians".into(),
        ));
    }
    if opts.samples == 0 || !(opts.observation_window > 0.0) {
        return Err(Error::Config("samples and observation_window must be positive".into()));
    }
    let ratio_witness = match opts.screen_height {
        Some(height) => {
            let screen = ratio_screen(w1.period, w2.period, height, opts.screen_tol);
            if let Some((p, q)) = screen.relation {
                return Err(Error::InvalidParameter(format!(
                    "T1/T2 = {} matches {p}/{q}; the minimum would be periodic",
                    screen.ratio
                )));
            }
            Some(screen)
        }
        None => None,
    };
    let step = cfg.nominal_step(&grid);
    let solver = Solver::new(h, cfg, grid, step)?;
    let mut a = vec![w1.fields_over_period[0].clone()];
    let mut b = vec![w2.fields_over_period[0].clone()];
    solver.march(&a[0].clone(), opts.samples - 1, |_, f, _| a.push(f.clone()))?;
    solver.march(&b[0].clone(), opts.samples - 1, |_, f, _| b.push(f.clone()))?;
    let composed = a
        .iter()
        .zip(&b)
        .map(|(x, y)| pointwise_min(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(AlmostPeriodicSolution {
        w1: w1.clone(),
        w2: w2.clone(),
        composed,
        components: (a, b),
        step,
        ratio_witness,
        observation_window: opts.observation_window,
    })
}

/// Largest gap between `T_{j step} composed(t_i)` and `composed(t_i + j step)`
/// over probe indices `i` and lags `j`.
pub fn solution_property_check(
    ap: &AlmostPeriodicSolution,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    probe_indices: &[usize],
    lag: usize,
) -> Result<f64> {
    let solver = Solver::new(h, cfg, ap.grid(), ap.step)?;
    let mut worst: f64 = 0.0;
    for &i in probe_indices {
        if i + lag >= ap.composed.len() {
            return Err(Error::InvalidParameter(format!(
                "probe {i} + lag {lag} exceeds {} stored samples",
                ap.composed.len()
            )));
        }
        let evolved = solver.march(&ap.composed[i], lag, |_, _, _| {})?;
        worst = worst.max(sup_norm_diff(&evolved, &ap.composed[i + lag])?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonScan {
    pub epsilon: f64,
    pub tau_max: f64,
    /// Lattice spacing; default `min(T1, T2) / 50`.
    #[serde(default)]
    pub tau_step: Option<f64>,
    #[serde(default = "default_time_probes")]
    pub time_probes: usize,
    #[serde(default = "default_point_cap")]
    pub max_points: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_time_probes() -> usize {
    32
}
fn default_point_cap() -> usize {
    4096
}

impl EpsilonScan {
    pub fn new(epsilon: f64, tau_max: f64) -> Self {
        EpsilonScan {
            epsilon,
            tau_max,
            tau_step: None,
            time_probes: default_time_probes(),
            max_points: default_point_cap(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPeriodReport {
    pub epsilon: f64,
    pub tau_step: f64,
    pub window: (f64, f64),
    pub periods_found: Vec<f64>,
    /// Sampled defect of each found period.
    pub defects: Vec<f64>,
    pub max_gap: f64,
    /// Sampled time-Lipschitz constant of the signal.
    pub lipschitz_t: f64,
    /// Bound valid on the whole lattice cell of every found period.
    pub certified_epsilon: f64,
    pub probe_points: usize,
    pub probe_times: usize,
}

impl EpsilonPeriodReport {
    /// Found period closest to `tau`, if within one lattice cell.
    pub fn near(&self, tau: f64) -> Option<f64> {
        self.periods_found
            .iter()
            .copied()
            .filter(|t| (t - tau).abs() <= self.tau_step * (0.5 + 1e-9))
            .min_by(|a, b| (a - tau).abs().total_cmp(&(b - tau).abs()))
    }
}

/// All nodes when there are at most `cap`, otherwise one seeded node per stratum.
pub fn probe_points(grid: UniformGrid, cap: usize, seed: u64) -> Vec<Vec<f64>> {
    let len = grid.len();
    if len <= cap {
        return (0..len).map(|i| grid.node(i)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cap)
        .map(|s| {
            let lo = s * len / cap;
            let hi = ((s + 1) * len / cap).max(lo + 1);
            grid.node(rng.gen_range(lo..hi))
        })
        .collect()
}

/// Scans `tau` on a lattice of `(0, tau_max]`; `tau` is accepted when
/// `|w(x, t + tau) - w(x, t)| <= epsilon` at every probe.
pub fn epsilon_periods(ap: &AlmostPeriodicSolution, scan: &EpsilonScan) -> Result<EpsilonPeriodReport> {
    if !(scan.epsilon > 0.0 && scan.tau_max > 0.0) || scan.time_probes == 0 || scan.max_points == 0 {
        return Err(Error::InvalidParameter("epsilon, tau_max and probe counts must be positive".into()));
    }
    let span = ap.observation_window - scan.tau_max;
    if span <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "observation window {} too short for tau_max = {}",
            ap.observation_window, scan.tau_max
        )));
    }
    let tau_step = scan.tau_step.unwrap_or(ap.min_period() / 50.0);
    if !(tau_step > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_step = {tau_step}")));
    }
    let points = probe_points(ap.grid(), scan.max_points, scan.seed);
    let times: Vec<f64> = (0..scan.time_probes)
        .map(|j| j as f64 * span / scan.time_probes as f64)
        .collect();
    let base: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| points.iter().map(|x| ap.value_at(x, t)).collect())
        .collect();
    let defect = |tau: f64, cap: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for (t, row) in times.iter().zip(&base) {
            for (x, v) in points.iter().zip(row) {
                worst = worst.max((ap.value_at(x, t + tau) - v).abs());
                if worst > cap {
                    return worst;
                }
            }
        }
        worst
    };
    let dt = tau_step / 8.0;
    let lipschitz_t = times
        .par_iter()
        .zip(&base)
        .map(|(t, row)| {
            points
                .iter()
                .zip(row)
                .map(|(x, v)| (ap.value_at(x, t + dt) - v).abs() / dt)
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let count = (scan.tau_max / tau_step + 1e-9).floor() as usize;
    let accepted: Vec<(f64, f64)> = (0..=count)
        .into_par_iter()
        .filter_map(|i| {
            let tau = i as f64 * tau_step;
            let d = if i == 0 { 0.0 } else { defect(tau, scan.epsilon) };
            (d <= scan.epsilon).then_some((tau, d))
        })
        .collect();
    let periods_found: Vec<f64> = accepted.iter().map(|a| a.0).collect();
    let defects: Vec<f64> = accepted.iter().map(|a| a.1).collect();
    let max_gap = periods_found
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let certified_epsilon = defects.iter().fold(0.0f64, |a, &d| a.max(d)) + lipschitz_t * tau_step / 2.0;
    Ok(EpsilonPeriodReport {
        epsilon: scan.epsilon,
        tau_step,
        window: (0.0, scan.tau_max),
        periods_found,
        defects,
        max_gap,
        lipschitz_t,
        certified_epsilon,
        probe_points: points.len(),
        probe_times: times.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Displacement {
    pub tau: f64,
    /// `sup_{y in S1 u S2} dist(Phi_tau y, S1 u S2)`.
    pub displacement: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonPeriodicityReport {
    /// Hausdorff gap between `{w(., 0) <= c + tol}` and `S1 u S2`.
    pub level_set_gap: f64,
    pub level_set_pass: bool,
    pub candidates: Vec<Displacement>,
    pub min_displacement: f64,
    pub pass: bool,
}

/// Every candidate must move the zero-time level set `S1 u S2` off itself by
/// more than `threshold`.
pub fn non_periodicity_check(
    ap: &AlmostPeriodicSolution,
    tau_candidates: &[f64],
    threshold: f64,
) -> Result<NonPeriodicityReport> {
    let grid = ap.grid();
    let omega = ap.w1.omega.clone();
    let (s1, s2) = (&ap.w1.s, &ap.w2.s);
    let sheet: Vec<Vec<f64>> = sheet_samples(s1, &omega, 0.0, grid)
        .into_iter()
        .chain(sheet_samples(s2, &omega, 0.0, grid))
        .collect();
    let dist_union = |x: &[f64]| s1.distance_raw(x).min(s2.distance_raw(x));

    let tol = ap.w1.level_tol(1e-10).max(ap.w2.level_tol(1e-10));
    let f0 = &ap.composed[0];
    let nodes: Vec<Vec<f64>> = (0..grid.len())
        .filter(|&i| f0.values[i] <= ap.c() + tol)
        .map(|i| f0.node_point(i))
        .collect();
    let inner = nodes.iter().map(|x| dist_union(x)).fold(0.0, f64::max);
    let outer = sheet
        .iter()
        .map(|y| nodes.iter().map(|x| raw_distance(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let level_set_gap = inner.max(outer);

    let candidates: Vec<Displacement> = tau_candidates
        .iter()
        .map(|&tau| {
            let displacement = sheet
                .iter()
                .map(|y| {
                    let moved: Vec<f64> = y.iter().zip(&omega).map(|(a, w)| a + w * tau).collect();
                    dist_union(&moved)
                })
                .fold(0.0, f64::max);
            Displacement {
                tau,
                displacement,
                pass: displacement > threshold,
            }
        })
        .collect();
    let min_displacement = candidates
        .iter()
        .map(|d| d.displacement)
        .fold(f64::INFINITY, f64::min);
    let level_set_pass = !nodes.is_empty() && level_set_gap <= grid.spacing() * (1.0 + 1e-9);
    Ok(NonPeriodicityReport {
        level_set_gap,
        level_set_pass,
        pass: level_set_pass && candidates.iter().all(|d| d.pass),
        candidates,
        min_displacement,
    })
}
