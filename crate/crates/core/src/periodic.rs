//! Non-trivial periodic solutions built from an invariant hyperplane family.
//!
//! `U_k = T_{kT} phi_S` is strobed in the travelling frame of the solver. The
//! continuum iterates are invariant under translation by `omega T` (because
//! `S` is), so comparing co-moving indices across strobes compares the same
//! points; the converged strobe is the solution at time `0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    interpolate_raw, raw_distance, sup_norm_diff, wrap1, wrapped_diff, ScalarField, TorusPoint,
    UniformGrid,
};
use crate::hamiltonian::{ContactHamiltonian, EquilibriumData};
use crate::periods::{PeriodCertificate, RationalHyperplaneSet};
use crate::semigroup::{Solver, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionParams {
    pub x0: TorusPoint,
    pub epsilon: f64,
    pub epsilon0: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
}

impl SubsolutionParams {
    /// Parameters with `epsilon = epsilon0`.
    pub fn at_threshold(h: &dyn ContactHamiltonian, x0: TorusPoint) -> Result<Self> {
        let eq = EquilibriumData::of(h)?;
        let (epsilon0, m0) = compute_epsilon0(h, &eq.omega, eq.c)?;
        Ok(SubsolutionParams {
            x0,
            epsilon: epsilon0,
            epsilon0,
            m0,
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= self.epsilon0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} outside (0, {}]",
                self.epsilon, self.epsilon0
            )));
        }
        Ok(())
    }
}

fn phases(x0: &[f64], omega: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    x.iter()
        .zip(x0)
        .zip(omega)
        .map(|((xi, x0i), wi)| 2.0 * PI * (xi - x0i) - PI / 2.0 - 2.0 * PI * wi * t)
        .collect()
}

/// `c + eps * sum_i (1 + sin f_i)`, `f_i = 2 pi (x_i - x0_i) - pi/2 - 2 pi omega_i t`.
#[allow(non_snake_case)]
pub fn W_epsilon(
    params: &SubsolutionParams,
    omega: &[f64],
    c: f64,
    x: &TorusPoint,
    t: f64,
) -> Result<f64> {
    params.check()?;
    let n = params.x0.dim();
    if x.dim() != n || omega.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.dim().max(omega.len()),
        });
    }
    let f = phases(params.x0.coords(), omega, x.coords(), t);
    Ok(c + params.epsilon * f.iter().map(|fi| 1.0 + fi.sin()).sum::<f64>())
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn unit_rule() -> Vec<(f64, f64)> {
    GL8.iter()
        .flat_map(|&(x, w)| [((1.0 - x) / 2.0, w / 2.0), ((1.0 + x) / 2.0, w / 2.0)])
        .collect()
}

/// `(epsilon0, M0)`. `M0 = max n |H^_ii|` with
/// `H^_ii(a) = int_0^1 s int_0^1 H_pipi(s tau a, c) dtau ds`, where
/// `a_i = nu_i cos f_i` ranges over `[-1, 1]^n`; the integrand is periodic in
/// `(x, t)`, so one period cell is sampled through `a`.
pub fn compute_epsilon0(h: &dyn ContactHamiltonian, omega: &[f64], c: f64) -> Result<(f64, f64)> {
    let n = h.dim();
    if omega.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: omega.len(),
        });
    }
    let per_axis: usize = match n {
        1 => 41,
        2 => 11,
        _ => 7,
    };
    let rule = unit_rule();
    let mut m0: f64 = 0.0;
    for flat in 0..per_axis.pow(n as u32) {
        let mut rest = flat;
        let a: Vec<f64> = (0..n)
            .map(|_| {
                let i = rest % per_axis;
                rest /= per_axis;
                -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64
            })
            .collect();
        let mut hat = vec![0.0; n];
        for &(s, ws) in &rule {
            for &(tau, wt) in &rule {
                let p: Vec<f64> = a.iter().map(|ai| s * tau * ai).collect();
                let hess = h.hessian_p(&p, c);
                for i in 0..n {
                    let v = hess[i * n + i];
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("Hessian entry at p = {p:?}")));
                    }
                    hat[i] += ws * wt * s * v;
                }
            }
        }
        for v in hat {
            m0 = m0.max(n as f64 * v.abs());
        }
    }
    let wmax = omega.iter().map(|w| w * w).fold(0.0, f64::max);
    let eps0 = if m0 == 0.0 || wmax == 0.0 {
        1.0
    } else {
        (0.5 * h.delta() / (4.0 * PI * PI * m0 * wmax)).min(1.0)
    };
    Ok((eps0, m0))
}

/// Largest `W_t + H(W_x, W)` over `samples` random points plus `(x0, 0)`,
/// with exact derivatives of `W`.
pub fn subsolution_residual(
    params: &SubsolutionParams,
    h: &dyn ContactHamiltonian,
    omega: &[f64],
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    params.check()?;
    let n = h.dim();
    let eps = params.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for s in 0..=samples {
        let (x, t) = if s == 0 {
            (params.x0.coords().to_vec(), 0.0)
        } else {
            ((0..n).map(|_| rng.gen::<f64>()).collect::<Vec<_>>(), rng.gen::<f64>() * 10.0)
        };
        let f = phases(params.x0.coords(), omega, &x, t);
        let w = c + eps * f.iter().map(|fi| 1.0 + fi.sin()).sum::<f64>();
        let p: Vec<f64> = f.iter().map(|fi| 2.0 * PI * eps * fi.cos()).collect();
        let wt: f64 = -f
            .iter()
            .zip(omega)
            .map(|(fi, wi)| 2.0 * PI * eps * wi * fi.cos())
            .sum::<f64>();
        worst = worst.max(wt + h.evaluate(&p, w));
    }
    Ok(worst)
}

/// `inf { sum_i (1 - cos 2 pi d_i) : k.d = r mod 1 }`.
fn sheet_cost(k: &[i64], r: f64) -> f64 {
    let nz: Vec<usize> = (0..k.len()).filter(|&i| k[i] != 0).collect();
    let pivot = *nz.iter().max_by_key(|&&i| (k[i].abs(), std::cmp::Reverse(i))).unwrap();
    let free: Vec<usize> = nz.into_iter().filter(|&i| i != pivot).collect();
    let kp = k[pivot];
    let pivot_cost = |rem: f64| {
        (0..kp.abs())
            .map(|m| 1.0 - (2.0 * PI * (rem + m as f64) / kp as f64).cos())
            .fold(f64::INFINITY, f64::min)
    };
    let total = |d: &[f64]| {
        let mut rem = r;
        let mut cost = 0.0;
        for (di, &i) in d.iter().zip(&free) {
            rem -= k[i] as f64 * di;
            cost += 1.0 - (2.0 * PI * di).cos();
        }
        cost + pivot_cost(rem)
    };
    match free.len() {
        0 => pivot_cost(r),
        1 => {
            let m = 4000;
            let hstep = 1.0 / m as f64;
            let (mut best, mut arg) = (f64::INFINITY, 0.0);
            for i in 0..=m {
                let d = -0.5 + i as f64 * hstep;
                let v = total(&[d]);
                if v < best {
                    best = v;
                    arg = d;
                }
            }
            let (mut a, mut b) = (arg - hstep, arg + hstep);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            while b - a > 1e-14 {
                let x1 = b - g * (b - a);
                let x2 = a + g * (b - a);
                if total(&[x1]) < total(&[x2]) {
                    b = x2;
                } else {
                    a = x1;
                }
            }
            best.min(total(&[(a + b) / 2.0]))
        }
        dims => {
            let m = if dims == 2 { 200 } else { 40 };
            let hstep = 1.0 / m as f64;
            let mut best = f64::INFINITY;
            let mut arg = vec![0.0; dims];
            for flat in 0..(m + 1usize).pow(dims as u32) {
                let mut rest = flat;
                let d: Vec<f64> = (0..dims)
                    .map(|_| {
                        let i = rest % (m + 1);
                        rest /= m + 1;
                        -0.5 + i as f64 * hstep
                    })
                    .collect();
                let v = total(&d);
                if v < best {
                    best = v;
                    arg = d;
                }
            }
            let mut step = hstep;
            while step > 1e-14 {
                let mut moved = false;
                for i in 0..dims {
                    for sgn in [-1.0, 1.0] {
                        let mut d = arg.clone();
                        d[i] += sgn * step;
                        let v = total(&d);
                        if v < best {
                            best = v;
                            arg = d;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    step /= 2.0;
                }
            }
            best
        }
    }
}

/// `inf_{y in S} W^eps_y(x, t)`; depends on `(x, t)` only through
/// `k.(x - omega t) mod 1`, hence is `T`-periodic whenever `k.omega T` is an integer.
pub fn w_epsilon_inf_over_s(
    epsilon: f64,
    s: &RationalHyperplaneSet,
    omega: &[f64],
    c: f64,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    if x.len() != s.dim() || omega.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: x.len().max(omega.len()),
        });
    }
    let z: Vec<f64> = x.iter().zip(omega).map(|(xi, wi)| xi - wi * t).collect();
    Ok(c + epsilon * sheet_cost(&s.k, s.phase(&z)))
}

/// `c` within `h/2` of `S`, `c + big` elsewhere.
pub fn initial_data_from_s(
    s: &RationalHyperplaneSet,
    c: f64,
    big: f64,
    grid: UniformGrid,
) -> Result<ScalarField> {
    if s.dim() != grid.n {
        return Err(Error::DimensionMismatch {
            expected: grid.n,
            got: s.dim(),
        });
    }
    let half = grid.spacing() / 2.0 + 1e-12;
    let f = ScalarField::from_fn(grid, 0.0, |x| {
        if s.distance_raw(x) <= half {
            c
        } else {
            c + big
        }
    });
    if f.values.iter().all(|&v| v > c) {
        return Err(Error::InvalidParameter(format!(
            "no grid node within h/2 of S for k = {:?}; use a finer grid",
            s.k
        )));
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicOptions {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_conv_tol")]
    pub conv_tol: f64,
    /// Time samples per period for the oscillation measurement.
    #[serde(default = "default_time_samples")]
    pub time_samples: usize,
}

fn default_k_max() -> usize {
    400
}
fn default_conv_tol() -> f64 {
    1e-10
}
fn default_time_samples() -> usize {
    64
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            k_max: default_k_max(),
            conv_tol: default_conv_tol(),
            time_samples: default_time_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PeriodicityReport {
    pub period_defect: f64,
    /// Travelling-frame change over the last strobe.
    pub comoving_defect: f64,
    pub oscillation: f64,
    pub level_set_identity_defect: f64,
    pub level_tol: f64,
    /// `inf_S W^eps0(x0, T/2) - c` at a node `x0` of `S`.
    pub gap_bound: f64,
    /// `u(x0, T/2) - c`.
    pub gap_value: f64,
    pub gap_pass: bool,
    pub floor: f64,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSolution {
    pub period: f64,
    pub certificate: PeriodCertificate,
    pub s: RationalHyperplaneSet,
    /// Fields at every solver step `j T / m`, `j = 0..=m`.
    pub fields_over_period: Vec<ScalarField>,
    /// `sup |U_{k+1} - U_k|` per strobe.
    pub convergence: Vec<f64>,
    pub converged: bool,
    pub c: f64,
    pub omega: Vec<f64>,
    pub step: f64,
    pub big_value: f64,
    pub comoving_defect: f64,
    pub verification: Option<PeriodicityReport>,
}

impl PeriodicSolution {
    pub fn grid(&self) -> UniformGrid {
        self.fields_over_period[0].grid
    }

    fn sub(&self) -> f64 {
        self.period / (self.fields_over_period.len() - 1) as f64
    }

    /// Snapshot `j` transported along `omega` to time `t`.
    /// Stored field index and elapsed time since it for time `t`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let tau = t.rem_euclid(self.period);
        let last = self.fields_over_period.len() - 2;
        let j = ((tau / self.sub()).floor() as usize).min(last);
        (j, tau - self.fields_over_period[j].time)
    }

    pub fn field_at(&self, t: f64) -> ScalarField {
        let (j, shift) = self.locate(t);
        let mut f = self.fields_over_period[j].clone();
        for (o, w) in f.origin.iter_mut().zip(&self.omega) {
            *o = wrap1(*o + w * shift);
        }
        f.time = t;
        f
    }

    pub fn value_at(&self, x: &[f64], t: f64) -> f64 {
        let (j, shift) = self.locate(t);
        let mut y = [0.0; 3];
        for (a, (xi, w)) in y.iter_mut().zip(x.iter().zip(&self.omega)) {
            *a = xi - w * shift;
        }
        interpolate_raw(&self.fields_over_period[j], &y[..x.len()])
    }

    pub fn level_tol(&self, conv_tol: f64) -> f64 {
        (5.0 * conv_tol).max(3.0 * self.comoving_defect).max(1e-12)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Strobes `T_{kT} phi_S` until the change per period falls below `conv_tol`,
/// then records one period.
#[allow(non_snake_case)]
pub fn iterate_Uk(
    certificate: &PeriodCertificate,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    opts: &PeriodicOptions,
) -> Result<PeriodicSolution> {
    let period = certificate.period;
    let s = certificate.set()?;
    let eq = EquilibriumData::of(h)?;
    let kw: f64 = s.kf().iter().zip(&eq.omega).map(|(a, b)| a * b).sum::<f64>() * period;
    if (kw - kw.round()).abs() > 1e-8 || kw.round() == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "k.omega T = {kw} is not a nonzero integer; S is not invariant"
        )));
    }
    run_strobes(certificate.clone(), s, grid, h, cfg, opts, true)
}

/// Steps per period: the nearest integer to `T / step`, at least one.
pub fn period_steps(period: f64, cfg: &SolverConfig, grid: &UniformGrid) -> usize {
    (period / cfg.nominal_step(grid)).round().max(1.0) as usize
}

fn run_strobes(
    certificate: PeriodCertificate,
    s: RationalHyperplaneSet,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    opts: &PeriodicOptions,
    enforce: bool,
) -> Result<PeriodicSolution> {
    if opts.time_samples == 0 || opts.k_max == 0 || !(opts.conv_tol > 0.0) {
        return Err(Error::Config(
            "time_samples, k_max and conv_tol must be positive".into(),
        ));
    }
    let period = certificate.period;
    let per_period = period_steps(period, cfg, &grid);
    let step = period / per_period as f64;
    let solver = Solver::new(h, cfg, grid, step)?;
    let c = solver.c();
    let big = cfg.big_value_for(c);
    let mut cur = initial_data_from_s(&s, c, big, grid)?;
    let mut convergence = Vec::new();
    let mut converged = false;
    for k in 0..opts.k_max {
        let next = solver.march(&cur, per_period, |_, _, _| {})?;
        if enforce {
            for (i, (a, b)) in cur.values.iter().zip(&next.values).enumerate() {
                if *a < c + big && *b > a + 1e-9 {
                    return Err(Error::Invariant(format!(
                        "U_{} exceeds U_{k} by {:.3e} at node {i}",
                        k + 1,
                        b - a
                    )));
                }
                if *b < c - 1e-9 {
                    return Err(Error::Invariant(format!(
                        "U_{} = {b} below c = {c} at node {i}",
                        k + 1
                    )));
                }
            }
        }
        let d = max_abs_diff(&cur.values, &next.values);
        convergence.push(d);
        cur = next;
        if d <= opts.conv_tol {
            converged = true;
            break;
        }
    }
    let comoving_defect = *convergence.last().unwrap();
    let start = ScalarField {
        grid,
        values: cur.values,
        time: 0.0,
        origin: vec![0.0; grid.n],
    };
    let mut fields = vec![start.clone()];
    solver.march(&start, per_period, |_, f, _| fields.push(f.clone()))?;
    Ok(PeriodicSolution {
        period,
        certificate,
        s,
        fields_over_period: fields,
        convergence,
        converged,
        c,
        omega: solver.omega().to_vec(),
        step,
        big_value: big,
        comoving_defect,
        verification: None,
    })
}

/// Nodes of `f` (as points) with value at most `level`.
fn level_nodes(f: &ScalarField, level: f64) -> Vec<Vec<f64>> {
    (0..f.grid.len())
        .filter(|&i| f.values[i] <= level)
        .map(|i| f.node_point(i))
        .collect()
}

fn min_pair_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min(raw_distance(x, y));
        }
    }
    best
}

/// Points of the sheets of `Phi_t(S)` hit by lines through grid nodes.
pub(crate) fn sheet_samples(s: &RationalHyperplaneSet, omega: &[f64], t: f64, grid: UniformGrid) -> Vec<Vec<f64>> {
    let n = grid.n;
    let shift: Vec<f64> = omega.iter().map(|w| w * t).collect();
    let axis = (0..n).max_by_key(|&i| s.k[i].abs()).unwrap();
    let ka = s.k[axis] as f64;
    let mut out = Vec::new();
    // along the pivot axis solve k.(x - shift) = m for every node of the transverse lattice
    let transverse: usize = grid.size.pow(n as u32 - 1);
    for flat in 0..transverse {
        let mut rest = flat;
        let mut x = vec![0.0; n];
        for (i, xi) in x.iter_mut().enumerate() {
            if i != axis {
                *xi = (rest % grid.size) as f64 * grid.spacing();
                rest /= grid.size;
            }
        }
        let partial: f64 = (0..n)
            .filter(|&i| i != axis)
            .map(|i| s.k[i] as f64 * (x[i] - shift[i]))
            .sum();
        for m in 0..s.k[axis].abs() {
            let mut y = x.clone();
            y[axis] = wrap1((m as f64 - partial) / ka + shift[axis]);
            out.push(y);
        }
    }
    out
}

/// Hausdorff gap between the level set `{w <= c + tol}` at time `t` and `Phi_t(S)`.
fn identity_gap(sol: &PeriodicSolution, t: f64, tol: f64) -> (f64, Vec<Vec<f64>>) {
    let f = sol.field_at(t);
    let nodes = level_nodes(&f, sol.c + tol);
    if nodes.is_empty() {
        return (f64::INFINITY, nodes);
    }
    let shifted = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(&sol.omega).map(|(a, w)| a - w * t).collect()
    };
    let inner = nodes
        .iter()
        .map(|x| sol.s.distance_raw(&shifted(x)))
        .fold(0.0, f64::max);
    let outer = sheet_samples(&sol.s, &sol.omega, t, f.grid)
        .iter()
        .map(|y| {
            nodes
                .iter()
                .map(|x| raw_distance(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    (inner.max(outer), nodes)
}

/// `sup_x (sup_t u - inf_t u)` over `samples` equally spaced times.
pub fn oscillation(sol: &PeriodicSolution, samples: usize) -> f64 {
    let samples = samples.max(1);
    let fixed: Vec<ScalarField> = (0..samples)
        .map(|j| sol.field_at(j as f64 * sol.period / samples as f64).resample())
        .collect();
    (0..sol.grid().len())
        .map(|i| {
            let (lo, hi) = fixed.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, f| {
                (a.0.min(f.values[i]), a.1.max(f.values[i]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

pub fn verify_periodicity(
    sol: &PeriodicSolution,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    conv_tol: f64,
    time_samples: usize,
) -> Result<PeriodicityReport> {
    let grid = sol.grid();
    let solver = Solver::new(h, cfg, grid, sol.step)?;
    let m = sol.fields_over_period.len() - 1;
    let mut start = sol.fields_over_period[m].clone();
    start.time = sol.period;
    let mut period_defect =
        sup_norm_diff(&sol.fields_over_period[0].resample(), &start.resample())?;
    let mut err = None;
    solver.march(&start, m, |k, f, _| {
        match sup_norm_diff(&sol.fields_over_period[k].resample(), &f.resample()) {
            Ok(d) => period_defect = period_defect.max(d),
            Err(e) => err = Some(e),
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }

    let oscillation = oscillation(sol, time_samples);
    let floor = sol
        .fields_over_period
        .iter()
        .map(|f| f.min_value())
        .fold(f64::INFINITY, f64::min);

    let level_tol = sol.level_tol(conv_tol);
    let level_set_identity_defect = sol
        .fields_over_period
        .iter()
        .map(|f| identity_gap(sol, f.time, level_tol).0)
        .fold(0.0, f64::max);

    let (eps0, _) = compute_epsilon0(h, &sol.omega, sol.c)?;
    let s_node = (0..grid.len())
        .min_by(|&a, &b| {
            let da = sol.s.distance_raw(&grid.node(a));
            let db = sol.s.distance_raw(&grid.node(b));
            da.total_cmp(&db)
        })
        .unwrap();
    let x0 = grid.node(s_node);
    let gap_bound = w_epsilon_inf_over_s(eps0, &sol.s, &sol.omega, sol.c, &x0, sol.period / 2.0)? - sol.c;
    let gap_value = sol.value_at(&x0, sol.period / 2.0) - sol.c;
    let tol = 5e-3;
    Ok(PeriodicityReport {
        period_defect,
        comoving_defect: sol.comoving_defect,
        oscillation,
        level_set_identity_defect,
        level_tol,
        gap_bound,
        gap_value,
        gap_pass: gap_value >= gap_bound - tol,
        floor,
        nontrivial: oscillation > 0.0 && oscillation >= (10.0 * period_defect).max(gap_bound),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelProbe {
    pub t: f64,
    pub level_nodes: usize,
    /// Smallest distance to the `t = 0` level set.
    pub separation: f64,
    pub identity_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalPeriodReport {
    pub level_tol: f64,
    pub spacing: f64,
    pub probes: Vec<LevelProbe>,
    pub pass: bool,
    /// First failing probe time.
    pub witness: Option<f64>,
}

/// For `t` in `(0, T)` the near-`c` level set must lie within `h` of
/// `Phi_t(S)` and more than `h` away from the `t = 0` level set. Probes at
/// multiples of `T` only check the identity.
pub fn fundamental_period_check(
    sol: &PeriodicSolution,
    t_probes: &[f64],
    conv_tol: f64,
) -> Result<FundamentalPeriodReport> {
    if sol.certificate.rhs().abs() != 1 {
        return Err(Error::InvalidParameter(format!(
            "certificate {:?} is not a fundamental-period certificate",
            sol.certificate.k
        )));
    }
    let h = sol.grid().spacing();
    let level_tol = sol.level_tol(conv_tol);
    let (_, base) = identity_gap(sol, 0.0, level_tol);
    let mut probes = Vec::new();
    for &t in t_probes {
        let (gap, nodes) = identity_gap(sol, t, level_tol);
        let frac = t / sol.period;
        let on_period = (frac - frac.round()).abs() < 1e-9;
        let separation = min_pair_distance(&nodes, &base);
        let pass = !nodes.is_empty() && gap <= h * (1.0 + 1e-9) && (on_period || separation > h);
        probes.push(LevelProbe {
            t,
            level_nodes: nodes.len(),
            separation,
            identity_gap: gap,
            pass,
        });
    }
    let witness = probes.iter().find(|p| !p.pass).map(|p| p.t);
    Ok(FundamentalPeriodReport {
        level_tol,
        spacing: h,
        pass: witness.is_none(),
        probes,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseDiagnostic {
    pub period: f64,
    pub s_normal: Vec<i64>,
    /// `k.omega T` for the trial set.
    pub return_index: f64,
    pub decrements: Vec<f64>,
    pub stabilized: bool,
    pub oscillation: f64,
}

/// Strobes at a period without certificate from a non-invariant trial set
/// and reports whether a non-trivial profile stabilises. Evidence only.
pub fn converse_diagnostic(
    period: f64,
    trial: &RationalHyperplaneSet,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    opts: &PeriodicOptions,
) -> Result<ConverseDiagnostic> {
    let eq = EquilibriumData::of(h)?;
    let mut k = trial.k.clone();
    k.push(0);
    let cert = PeriodCertificate {
        k,
        period,
        residual: f64::NAN,
        ring: crate::periods::Ring::D,
    };
    let sol = run_strobes(cert, trial.clone(), grid, h, cfg, opts, false)?;
    let oscillation = oscillation(&sol, opts.time_samples);
    let return_index = trial.kf().iter().zip(&eq.omega).map(|(a, b)| a * b).sum::<f64>() * period;
    Ok(ConverseDiagnostic {
        period,
        s_normal: trial.k.clone(),
        return_index,
        decrements: sol.convergence,
        stabilized: sol.converged,
        oscillation,
    })
}

/// Distance from `x - omega t` to `S`, wrapped per axis.
pub fn distance_to_flowed_s(s: &RationalHyperplaneSet, omega: &[f64], x: &[f64], t: f64) -> f64 {
    let z: Vec<f64> = x.iter().zip(omega).map(|(a, w)| wrapped_diff(a - w * t)).collect();
    s.distance_raw(&z)
}
