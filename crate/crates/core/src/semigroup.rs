//! Discrete backward Lax-Oleinik semigroup.
//!
//! The grid travels with the frequency vector: node `i` of a field at time `t`
//! sits at `origin + i h` with `origin = omega t (mod 1)`. One step of length
//! `D` takes, for every node, the minimum over foot nodes `i - j` of the value
//! transported along the straight segment of velocity `omega + j h / D`:
//!
//! `new[i] = min_j F_j(old[i - j])`, `|j| h / D <= window_radius`,
//!
//! where `F_j` integrates `u' = L(v_j, u)` over the segment. Every `F_j` is
//! nondecreasing, so the step is monotone and commutes with pointwise minima;
//! `j = 0` is the calibrated velocity, so constants at level `c` are fixed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    interpolate, linear_flow, pointwise_min, sup_norm_diff, wrap1, ScalarField, TorusPoint,
    UniformGrid,
};
use crate::hamiltonian::{ContactHamiltonian, EquilibriumData, OdeConfig, SegmentFlow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Sub-step of the value ODE along each segment.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Fixed segment length; when absent it is `step_scale * sqrt(h)`,
    /// shortened to divide the requested horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    /// Largest admissible `|v - omega|`.
    #[serde(default = "default_window")]
    pub window_radius: f64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
    /// Plateau height for singular data; default `10 (1 + |c|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_value: Option<f64>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_step_scale() -> f64 {
    2.5
}
fn default_window() -> f64 {
    1.5
}
fn default_fp_tol() -> f64 {
    1e-13
}
fn default_fp_max_iter() -> usize {
    200
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: default_dt(),
            step: None,
            step_scale: default_step_scale(),
            window_radius: default_window(),
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
            big_value: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, h: &dyn ContactHamiltonian) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if h.kappa() * self.dt > 0.5 {
            return bad(format!(
                "kappa * dt = {} exceeds 1/2; the implicit fixed point may not contract",
                h.kappa() * self.dt
            ));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("step = {s} must be positive"));
            }
        }
        if !(self.step_scale > 0.0) {
            return bad(format!("step_scale = {} must be positive", self.step_scale));
        }
        if !(self.window_radius > 0.0) {
            return bad(format!("window_radius = {} must be positive", self.window_radius));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return bad("fp_tol and fp_max_iter must be positive".into());
        }
        if let Some(m) = self.big_value {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("big_value = {m} must be positive"));
            }
        }
        Ok(())
    }

    pub fn nominal_step(&self, grid: &UniformGrid) -> f64 {
        self.step
            .unwrap_or(self.step_scale * grid.spacing().sqrt())
    }

    /// Segment length dividing `span` (unless `step` is fixed).
    pub fn step_dividing(&self, grid: &UniformGrid, span: f64) -> f64 {
        if let Some(s) = self.step {
            return s;
        }
        let nominal = self.nominal_step(grid);
        if span <= 0.0 {
            return nominal;
        }
        span / (span / nominal).ceil().max(1.0)
    }

    pub fn big_value_for(&self, c: f64) -> f64 {
        self.big_value.unwrap_or(10.0 * (1.0 + c.abs()))
    }

    pub fn with_step(&self, step: f64) -> Self {
        SolverConfig {
            step: Some(step),
            ..self.clone()
        }
    }

    pub fn ode(&self) -> OdeConfig {
        OdeConfig {
            dt: self.dt,
            fp_tol: self.fp_tol,
            fp_max_iter: self.fp_max_iter,
            legendre_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub max_fp_iterations: usize,
    pub boundary_hits: usize,
    pub min: f64,
    pub max: f64,
}

/// Precomputed candidate velocities and segment flows for one grid and step.
pub struct Solver<'h> {
    pub grid: UniformGrid,
    pub step: f64,
    pub equilibrium: EquilibriumData,
    offsets: Vec<[isize; 3]>,
    flows: Vec<SegmentFlow<'h>>,
    boundary: Vec<bool>,
}

impl<'h> Solver<'h> {
    pub fn new(
        h: &'h dyn ContactHamiltonian,
        cfg: &SolverConfig,
        grid: UniformGrid,
        step: f64,
    ) -> Result<Self> {
        cfg.validate(h)?;
        if h.dim() != grid.n {
            return Err(Error::DimensionMismatch {
                expected: grid.n,
                got: h.dim(),
            });
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("step {step} must be positive")));
        }
        let equilibrium = EquilibriumData::of(h)?;
        let cell = grid.spacing() / step;
        let jmax = (cfg.window_radius / cell + 1e-9).floor() as isize;
        if jmax < 1 {
            return Err(Error::Config(format!(
                "velocity window {} holds no neighbour at spacing h/step = {cell}; \
                 enlarge window_radius or step",
                cfg.window_radius
            )));
        }
        let jmax = jmax.min(grid.size as isize / 2);
        let n = grid.n;
        let mut offsets: Vec<[isize; 3]> = Vec::new();
        let side = 2 * jmax + 1;
        for flat in 0..side.pow(n as u32) {
            let mut j = [0isize; 3];
            let mut rest = flat;
            for slot in j.iter_mut().take(n) {
                *slot = rest % side - jmax;
                rest /= side;
            }
            let r2: isize = j.iter().map(|x| x * x).sum();
            if (r2 as f64).sqrt() * cell <= cfg.window_radius + 1e-12 {
                offsets.push(j);
            }
        }
        // shortest displacement first, so ties resolve to the calibrated direction
        offsets.sort_by_key(|j| (j.iter().map(|x| x * x).sum::<isize>(), *j));
        let ode = cfg.ode();
        let flows = offsets
            .iter()
            .map(|j| {
                let v: Vec<f64> = (0..n)
                    .map(|a| equilibrium.omega[a] + j[a] as f64 * cell)
                    .collect();
                h.segment_flow(&v, step, &ode)
            })
            .collect::<Result<Vec<_>>>()?;
        let boundary = offsets
            .iter()
            .map(|j| {
                let r = (j.iter().map(|x| x * x).sum::<isize>() as f64).sqrt() * cell;
                r > cfg.window_radius - cell
            })
            .collect();
        Ok(Solver {
            grid,
            step,
            equilibrium,
            offsets,
            flows,
            boundary,
        })
    }

    pub fn candidates(&self) -> usize {
        self.offsets.len()
    }

    pub fn c(&self) -> f64 {
        self.equilibrium.c
    }

    pub fn omega(&self) -> &[f64] {
        &self.equilibrium.omega
    }

    /// One step; the origin advances by `omega * step`.
    pub fn step(&self, w: &ScalarField) -> Result<(ScalarField, StepStats)> {
        if w.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "solver grid {:?}, field grid {:?}",
                self.grid, w.grid
            )));
        }
        let g = self.grid;
        let size = g.size as isize;
        let n = g.n;
        let affine: Option<Vec<(f64, f64)>> = self
            .flows
            .iter()
            .map(|f| match f {
                SegmentFlow::Affine { a, b } => Some((*a, *b)),
                _ => None,
            })
            .collect();
        let old = &w.values;
        let results: Vec<Result<(f64, usize, bool)>> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let mi = g.multi_index(i);
                let mut best = f64::INFINITY;
                let mut best_k = 0;
                let mut iters = 0;
                for (k, j) in self.offsets.iter().enumerate() {
                    let mut src = 0usize;
                    for a in (0..n).rev() {
                        let s = (mi[a] as isize - j[a]).rem_euclid(size) as usize;
                        src = src * g.size + s;
                    }
                    let val = match &affine {
                        Some(ab) => ab[k].0 * old[src] + ab[k].1,
                        None => {
                            let (v, it) = self.flows[k].advance(old[src]).map_err(|e| match e {
                                Error::FixedPoint { iterations, .. } => {
                                    Error::FixedPoint { node: i, iterations }
                                }
                                other => other,
                            })?;
                            iters = iters.max(it);
                            v
                        }
                    };
                    if val < best {
                        best = val;
                        best_k = k;
                    }
                }
                Ok((best, iters, self.boundary[best_k]))
            })
            .collect();
        let mut values = Vec::with_capacity(g.len());
        let mut stats = StepStats {
            max_fp_iterations: 0,
            boundary_hits: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for r in results {
            let (v, it, on_boundary) = r?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("value {v} after step")));
            }
            stats.max_fp_iterations = stats.max_fp_iterations.max(it);
            stats.boundary_hits += on_boundary as usize;
            stats.min = stats.min.min(v);
            stats.max = stats.max.max(v);
            values.push(v);
        }
        let origin = w
            .origin
            .iter()
            .zip(self.omega())
            .map(|(o, om)| wrap1(o + om * self.step))
            .collect();
        Ok((
            ScalarField {
                grid: g,
                values,
                time: w.time + self.step,
                origin,
            },
            stats,
        ))
    }

    /// `count` steps from `w`; time and origin are recomputed from the start
    /// to avoid drift.
    pub fn march(
        &self,
        w: &ScalarField,
        count: usize,
        mut each: impl FnMut(usize, &ScalarField, &StepStats),
    ) -> Result<ScalarField> {
        let mut cur = w.clone();
        for k in 1..=count {
            let (mut next, stats) = self.step(&cur)?;
            let elapsed = k as f64 * self.step;
            next.time = w.time + elapsed;
            for (o, (o0, om)) in next.origin.iter_mut().zip(w.origin.iter().zip(self.omega())) {
                *o = wrap1(o0 + om * elapsed);
            }
            each(k, &next, &stats);
            cur = next;
        }
        Ok(cur)
    }
}

/// One step of nominal length.
pub fn lax_oleinik_step(
    w: &ScalarField,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    let solver = Solver::new(h, cfg, w.grid, cfg.nominal_step(&w.grid))?;
    Ok(solver.step(w)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct EvolutionDiagnostics {
    pub step: f64,
    pub steps: usize,
    pub candidates: usize,
    pub max_fp_iterations: usize,
    pub max_boundary_fraction: f64,
    /// Largest shift applied when rounding requested times to the step lattice.
    pub time_rounding: f64,
    pub min_trace: Vec<f64>,
    pub max_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub snapshots: Vec<ScalarField>,
    pub diagnostics: EvolutionDiagnostics,
}

impl EvolutionResult {
    pub fn last(&self) -> &ScalarField {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Evolve `phi` to `t_final`, recording snapshots at the requested times
/// (rounded to the step lattice). The final time is always recorded.
pub fn evolve(
    phi: &ScalarField,
    t_final: f64,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    snapshot_times: &[f64],
) -> Result<EvolutionResult> {
    let span = t_final - phi.time;
    if !(span >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} precedes the field time {}",
            phi.time
        )));
    }
    let step = lattice_step(cfg, &phi.grid, span, phi.time, snapshot_times);
    let solver = Solver::new(h, cfg, phi.grid, step)?;
    let total = (span / step).round() as usize;
    let mut rounding = (total as f64 * step - span).abs();
    let mut marks: Vec<usize> = Vec::new();
    for &s in snapshot_times {
        if s < phi.time - 1e-12 || s > t_final + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {s} outside [{}, {t_final}]",
                phi.time
            )));
        }
        let k = (((s - phi.time) / step).round() as usize).min(total);
        rounding = rounding.max((k as f64 * step - (s - phi.time)).abs());
        marks.push(k);
    }
    marks.push(total);
    marks.sort_unstable();
    marks.dedup();

    let mut diag = EvolutionDiagnostics {
        step,
        steps: total,
        candidates: solver.candidates(),
        time_rounding: rounding,
        ..Default::default()
    };
    if rounding > 1e-9 * span.max(1.0) {
        diag.warnings.push(format!(
            "requested times moved by up to {rounding:.3e} onto the step lattice"
        ));
    }
    let mut snapshots = Vec::new();
    if marks.first() == Some(&0) {
        snapshots.push(phi.clone());
    }
    let len = phi.grid.len() as f64;
    solver.march(phi, total, |k, f, st| {
        diag.max_fp_iterations = diag.max_fp_iterations.max(st.max_fp_iterations);
        diag.max_boundary_fraction = diag.max_boundary_fraction.max(st.boundary_hits as f64 / len);
        diag.min_trace.push(st.min);
        diag.max_trace.push(st.max);
        if marks.binary_search(&k).is_ok() {
            snapshots.push(f.clone());
        }
    })?;
    if diag.max_boundary_fraction > 0.01 {
        diag.warnings.push(format!(
            "minimiser on the velocity window boundary at {:.1}% of nodes",
            100.0 * diag.max_boundary_fraction
        ));
    }
    Ok(EvolutionResult {
        snapshots,
        diagnostics: diag,
    })
}

/// Step `span / m` with the smallest `m >= span / nominal` putting every
/// requested time on the lattice; plain `step_dividing` when no `m` up to
/// 64 times the minimum does.
fn lattice_step(cfg: &SolverConfig, grid: &UniformGrid, span: f64, t0: f64, times: &[f64]) -> f64 {
    let base = cfg.step_dividing(grid, span);
    if cfg.step.is_some() || span <= 0.0 {
        return base;
    }
    let m0 = (span / base).round() as usize;
    let fits = |m: usize| {
        let step = span / m as f64;
        times.iter().all(|&s| {
            let k = (s - t0) / step;
            (k - k.round()).abs() * step <= 1e-12 * span.max(1.0)
        })
    };
    (m0..=64 * m0)
        .find(|&m| fits(m))
        .map_or(base, |m| span / m as f64)
}

/// `u0` at the node nearest `x0` and `u0 + M` elsewhere.
pub fn singular_field(grid: UniformGrid, x0: &TorusPoint, u0: f64, big: f64) -> Result<ScalarField> {
    let mut f = ScalarField::constant(grid, u0 + big, 0.0);
    f.values[grid.nearest_node(x0)?] = u0;
    Ok(f)
}

/// Approximates `h_{x0,u0}(., t)` from above by evolving singular data.
pub fn action_function(
    x0: &TorusPoint,
    u0: f64,
    t: f64,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("action time {t} must be positive")));
    }
    let c = EquilibriumData::of(h)?.c;
    let phi = singular_field(grid, x0, u0, cfg.big_value_for(c))?;
    Ok(evolve(&phi, t, h, cfg, &[])?.last().clone())
}

/// Plateau sensitivity of [`action_function`]: results for plateau height `M`
/// and `2M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauSensitivity {
    pub big_value: f64,
    /// Sup over all nodes of `|h_2M - h_M|`.
    pub sup_change: f64,
    /// Same sup restricted to nodes where `h_M < c + M / 2`.
    pub sup_change_below_half: f64,
}

pub fn plateau_sensitivity(
    x0: &TorusPoint,
    u0: f64,
    t: f64,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<PlateauSensitivity> {
    let c = EquilibriumData::of(h)?.c;
    let m = cfg.big_value_for(c);
    let one = action_function(x0, u0, t, grid, h, cfg)?;
    let doubled = SolverConfig {
        big_value: Some(2.0 * m),
        ..cfg.clone()
    };
    let two = action_function(x0, u0, t, grid, h, &doubled)?;
    let mut all: f64 = 0.0;
    let mut below: f64 = 0.0;
    for (a, b) in one.values.iter().zip(&two.values) {
        let d = (a - b).abs();
        all = all.max(d);
        if *a < c + 0.5 * m {
            below = below.max(d);
        }
    }
    Ok(PlateauSensitivity {
        big_value: m,
        sup_change: all,
        sup_change_below_half: below,
    })
}

/// Sup-norm gap between `h(., t+s)` computed in one run and by restarting
/// from the `t` snapshot. Both paths use the same step, so the gap is zero.
pub fn markov_check(
    x0: &TorusPoint,
    u0: f64,
    t: f64,
    s: f64,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<f64> {
    let cfg = cfg.with_step(cfg.step_dividing(&grid, t));
    let c = EquilibriumData::of(h)?.c;
    let phi = singular_field(grid, x0, u0, cfg.big_value_for(c))?;
    let direct = evolve(&phi, t + s, h, &cfg, &[t])?;
    let mid = &direct.snapshots[0];
    let restarted = evolve(mid, mid.time + s, h, &cfg, &[])?;
    sup_norm_diff(direct.last(), restarted.last())
}

/// As [`markov_check`] but the restart uses `other`; the gap measures
/// consistency between step sizes and is compared after resampling.
pub fn markov_consistency(
    x0: &TorusPoint,
    u0: f64,
    t: f64,
    s: f64,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    other: &SolverConfig,
) -> Result<f64> {
    let c = EquilibriumData::of(h)?.c;
    let phi = singular_field(grid, x0, u0, cfg.big_value_for(c))?;
    let direct = evolve(&phi, t + s, h, cfg, &[])?;
    let mid = evolve(&phi, t, h, cfg, &[])?;
    let restarted = evolve(mid.last(), t + s, h, other, &[])?;
    sup_norm_diff(&direct.last().resample(), &restarted.last().resample())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansivenessReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `|T_t phi - T_t psi| <= e^{kappa t} |phi - psi|`.
pub fn expansiveness_check(
    phi: &ScalarField,
    psi: &ScalarField,
    t: f64,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<ExpansivenessReport> {
    let a = evolve(phi, phi.time + t, h, cfg, &[])?;
    let b = evolve(psi, psi.time + t, h, cfg, &[])?;
    let lhs = sup_norm_diff(a.last(), b.last())?;
    let rhs0 = (h.kappa() * t).exp() * sup_norm_diff(phi, psi)?;
    let rhs = rhs0 + 1e-6 * (1.0 + rhs0);
    Ok(ExpansivenessReport {
        lhs,
        rhs,
        pass: lhs <= rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    pub witness: Option<usize>,
    /// Smallest `T_t phi - T_t psi` over nodes.
    pub min_gap: f64,
}

/// Requires `phi >= psi`; checks `T_t phi >= T_t psi - 1e-9`.
pub fn monotonicity_check(
    phi: &ScalarField,
    psi: &ScalarField,
    t: f64,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<MonotonicityReport> {
    sup_norm_diff(phi, psi)?;
    if let Some(i) = phi.values.iter().zip(&psi.values).position(|(a, b)| a < b) {
        return Err(Error::InvalidParameter(format!(
            "precondition phi >= psi fails at node {i}"
        )));
    }
    let a = evolve(phi, phi.time + t, h, cfg, &[])?;
    let b = evolve(psi, psi.time + t, h, cfg, &[])?;
    let gaps: Vec<f64> = a
        .last()
        .values
        .iter()
        .zip(&b.last().values)
        .map(|(x, y)| x - y)
        .collect();
    let witness = gaps.iter().position(|g| *g < -1e-9);
    Ok(MonotonicityReport {
        pass: witness.is_none(),
        witness,
        min_gap: gaps.into_iter().fold(f64::INFINITY, f64::min),
    })
}

/// `|T_t min(phi1, phi2) - min(T_t phi1, T_t phi2)|`.
pub fn inf_commutation_defect(
    phi1: &ScalarField,
    phi2: &ScalarField,
    t: f64,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<f64> {
    let joint = evolve(&pointwise_min(phi1, phi2)?, phi1.time + t, h, cfg, &[])?;
    let a = evolve(phi1, phi1.time + t, h, cfg, &[])?;
    let b = evolve(phi2, phi2.time + t, h, cfg, &[])?;
    sup_norm_diff(joint.last(), &pointwise_min(a.last(), b.last())?)
}

/// `|h_{x0,c}(Phi_t x0, t) - c|` with the action function on `grid`.
pub fn calibration_defect(
    x0: &TorusPoint,
    t: f64,
    grid: UniformGrid,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
) -> Result<f64> {
    let eq = EquilibriumData::of(h)?;
    let f = action_function(x0, eq.c, t, grid, h, cfg)?;
    let y = linear_flow(x0, t, &eq.omega)?;
    Ok((interpolate(&f, &y)? - eq.c).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    DivergingMinusInfinity,
    DivergingPlusInfinity,
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongTimeReport {
    pub classification: Classification,
    pub t_reached: f64,
    pub threshold: f64,
    /// Minimum value after each step.
    pub min_trace: Vec<f64>,
    /// Sup change over the last step in the travelling frame.
    pub comoving_change: f64,
    /// Largest `max_t w - min_t w` over the last window at fixed points.
    pub window_gap: f64,
    #[serde(skip)]
    pub limit: ScalarField,
}

/// Classifies the orbit of `phi` as diverging to `-inf`, `+inf`, or bounded.
/// Divergence is declared once the minimum leaves `c +- B`,
/// `B = max(1, 10 sup|phi - c|)`, while still moving away; bounded orbits
/// stop early once the travelling-frame change falls below `stall_tol`.
pub fn long_time_limit(
    phi: &ScalarField,
    h: &dyn ContactHamiltonian,
    cfg: &SolverConfig,
    t_max: f64,
    stall_tol: f64,
) -> Result<LongTimeReport> {
    if t_max < 10.0 / h.delta() {
        return Err(Error::InvalidParameter(format!(
            "t_max = {t_max} is below 10/delta = {}",
            10.0 / h.delta()
        )));
    }
    let step = cfg.nominal_step(&phi.grid);
    let solver = Solver::new(h, cfg, phi.grid, step)?;
    let c = solver.c();
    let spread = phi.values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    let threshold = (10.0 * spread).max(1.0);
    let steps = (t_max / step).ceil() as usize;
    let window = 16usize;
    let mut recent: Vec<ScalarField> = Vec::new();
    let mut min_trace = Vec::new();
    let mut cur = phi.clone();
    let mut classification = Classification::Bounded;
    let mut change = f64::INFINITY;
    for _ in 0..steps {
        let (next, st) = solver.step(&cur)?;
        change = cur
            .values
            .iter()
            .zip(&next.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let prev_min = min_trace.last().copied().unwrap_or(cur.min_value());
        min_trace.push(st.min);
        recent.push(next.clone());
        if recent.len() > window {
            recent.remove(0);
        }
        cur = next;
        if st.min < c - threshold && st.min < prev_min {
            classification = Classification::DivergingMinusInfinity;
            break;
        }
        if st.min > c + threshold && st.min > prev_min {
            classification = Classification::DivergingPlusInfinity;
            break;
        }
        if change <= stall_tol {
            break;
        }
    }
    let resampled: Vec<ScalarField> = recent.iter().map(|f| f.resample()).collect();
    let window_gap = (0..phi.grid.len())
        .map(|i| {
            let (lo, hi) = resampled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, f| {
                (acc.0.min(f.values[i]), acc.1.max(f.values[i]))
            });
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(LongTimeReport {
        classification,
        t_reached: cur.time,
        threshold,
        min_trace,
        comoving_change: change,
        window_gap,
        limit: cur,
    })
}
