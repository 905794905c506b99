//! Closed-form solutions for `H = |p|^2 + <omega,p> - lambda u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrapped_diff, ScalarField, TorusPoint, UniformGrid};
use crate::periods::RationalHyperplaneSet;

fn check(n: usize, got: usize) -> Result<()> {
    if n != got {
        return Err(Error::DimensionMismatch { expected: n, got });
    }
    Ok(())
}

/// Squared torus distance from `x` to `x0 + omega t`.
fn transported_dist2(x0: &[f64], x: &[f64], t: f64, omega: &[f64]) -> f64 {
    x.iter()
        .zip(x0)
        .zip(omega)
        .map(|((xi, ai), wi)| wrapped_diff(xi - ai - wi * t).powi(2))
        .sum()
}

/// `sum_i min_k (lambda/4)(x_i - x0_i + k - omega_i t)^2`.
pub fn oracle_w(x0: &TorusPoint, x: &TorusPoint, t: f64, lambda: f64, omega: &[f64]) -> Result<f64> {
    check(x0.dim(), x.dim())?;
    check(x0.dim(), omega.len())?;
    Ok(0.25 * lambda * transported_dist2(x0.coords(), x.coords(), t, omega))
}

/// Action function `h_{x0,u0}(x,t)` of the quadratic family:
/// `u0 e^{lambda t} + lambda d^2 / (4 (1 - e^{-lambda t}))`, `d` the distance
/// from `x` to `x0 + omega t`.
pub fn oracle_action(
    x0: &TorusPoint,
    u0: f64,
    x: &TorusPoint,
    t: f64,
    lambda: f64,
    omega: &[f64],
) -> Result<f64> {
    check(x0.dim(), x.dim())?;
    check(x0.dim(), omega.len())?;
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!("action time {t} must be positive")));
    }
    let d2 = transported_dist2(x0.coords(), x.coords(), t, omega);
    Ok(u0 * (lambda * t).exp() + lambda * d2 / (4.0 * -(-lambda * t).exp_m1()))
}

/// `min_{x0 in S} w_{x0}(x,t) = (lambda/4) dist(x - omega t, S)^2`.
pub fn oracle_periodic_u(
    s: &RationalHyperplaneSet,
    x: &TorusPoint,
    t: f64,
    lambda: f64,
    omega: &[f64],
) -> Result<f64> {
    check(s.dim(), x.dim())?;
    check(s.dim(), omega.len())?;
    let z: Vec<f64> = x.coords().iter().zip(omega).map(|(a, w)| a - w * t).collect();
    Ok(0.25 * lambda * s.distance_raw(&z).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OracleSource {
    Point { x0: Vec<f64> },
    Action { x0: Vec<f64>, u0: f64 },
    Periodic { k: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticOracle {
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub source: OracleSource,
}

impl QuadraticOracle {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        let xp = TorusPoint::new(x)?;
        match &self.source {
            OracleSource::Point { x0 } => oracle_w(&TorusPoint::new(x0)?, &xp, t, self.lambda, &self.omega),
            OracleSource::Action { x0, u0 } => {
                oracle_action(&TorusPoint::new(x0)?, *u0, &xp, t, self.lambda, &self.omega)
            }
            OracleSource::Periodic { k } => {
                oracle_periodic_u(&RationalHyperplaneSet::new(k)?, &xp, t, self.lambda, &self.omega)
            }
        }
    }

    /// Oracle sampled on the standard grid at time `t`.
    pub fn field(&self, grid: UniformGrid, t: f64) -> Result<ScalarField> {
        check(self.dim(), grid.n)?;
        let values = (0..grid.len())
            .map(|i| self.eval(&grid.node(i), t))
            .collect::<Result<Vec<_>>>()?;
        ScalarField::new(grid, values, t)
    }

    /// Oracle at the node positions (and time tag) of `f`.
    pub fn field_like(&self, f: &ScalarField) -> Result<ScalarField> {
        check(self.dim(), f.grid.n)?;
        let values = (0..f.grid.len())
            .map(|i| self.eval(&f.node_point(i), f.time))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField {
            values,
            ..f.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotError {
    pub time: f64,
    pub sup: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub snapshots: Vec<SnapshotError>,
    pub sup: f64,
}

fn errors(a: &ScalarField, b: &ScalarField) -> (f64, f64) {
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        let e = (x - y).abs();
        sup = sup.max(e);
        sum += e;
    }
    (sup, sum / a.values.len() as f64)
}

fn report(snapshots: Vec<SnapshotError>) -> CompareReport {
    let sup = snapshots.iter().map(|s| s.sup).fold(0.0, f64::max);
    CompareReport { snapshots, sup }
}

/// Errors of solver snapshots against the closed form at their own nodes.
pub fn compare_to_solver(oracle: &QuadraticOracle, snapshots: &[ScalarField]) -> Result<CompareReport> {
    let rows = snapshots
        .iter()
        .map(|s| {
            let (sup, mean) = errors(&oracle.field_like(s)?, s);
            Ok(SnapshotError { time: s.time, sup, mean })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(rows))
}

/// Errors between stored reference and solver fields; tags must match.
pub fn compare_fields(reference: &[ScalarField], solver: &[ScalarField]) -> Result<CompareReport> {
    if reference.len() != solver.len() {
        return Err(Error::GridMismatch(format!(
            "{} reference snapshots against {} solver snapshots",
            reference.len(),
            solver.len()
        )));
    }
    let rows = reference
        .iter()
        .zip(solver)
        .map(|(r, s)| {
            if r.grid != s.grid {
                return Err(Error::GridMismatch(format!("grids {:?} and {:?}", r.grid, s.grid)));
            }
            if (r.time - s.time).abs() > 1e-9 * (1.0 + r.time.abs()) {
                return Err(Error::GridMismatch(format!("time tags {} and {}", r.time, s.time)));
            }
            let s = s.resample();
            let r = r.resample();
            let (sup, mean) = errors(&r, &s);
            Ok(SnapshotError { time: s.time, sup, mean })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(rows))
}

/// `log2(coarse / fine)` for errors at resolutions `h` and `h/2`.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap;

    const R2: f64 = std::f64::consts::SQRT_2;

    fn p(x: &[f64]) -> TorusPoint {
        wrap(x).unwrap()
    }

    #[test]
    fn oracle_w_examples() {
        let x0 = p(&[0.3]);
        assert_eq!(oracle_w(&x0, &x0, 0.0, 1.0, &[1.0]).unwrap(), 0.0);
        let v = oracle_w(&p(&[0.0]), &p(&[0.0]), 0.5, 1.0, &[1.0]).unwrap();
        assert!((v - 0.0625).abs() < 1e-15);
        for (x, t) in [(0.1, 0.2), (0.77, 3.4), (0.5, -1.3)] {
            let a = oracle_w(&p(&[0.0]), &p(&[x]), t, 1.0, &[1.0]).unwrap();
            let b = oracle_w(&p(&[0.0]), &p(&[x]), t + 1.0, 1.0, &[1.0]).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!(oracle_w(&p(&[0.0]), &p(&[0.0, 0.0]), 0.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn oracle_w_brute_force_min_over_k() {
        let lam = 1.3;
        for (x, x0, t, w) in [(0.1, 0.8, 2.3, 1.0), (0.9, 0.05, 0.7, -2.5), (0.5, 0.5, 10.0, R2)] {
            let brute = (-40..=40)
                .map(|k| 0.25 * lam * (x - x0 + k as f64 - w * t).powi(2))
                .fold(f64::INFINITY, f64::min);
            let v = oracle_w(&p(&[x0]), &p(&[x]), t, lam, &[w]).unwrap();
            assert!((v - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_w_solves_pde_off_cut_locus() {
        let (lam, om) = (1.0, [1.0, R2]);
        let x0 = p(&[0.2, 0.6]);
        let f = |x: &[f64], t: f64| oracle_w(&x0, &p(x), t, lam, &om).unwrap();
        let e = 1e-5;
        for (x, t) in [([0.3, 0.7], 0.05), ([0.1, 0.5], 0.2), ([0.4, 0.9], 0.13)] {
            let wt = (f(&x, t + e) - f(&x, t - e)) / (2.0 * e);
            let g: Vec<f64> = (0..2)
                .map(|i| {
                    let mut a = x;
                    let mut b = x;
                    a[i] += e;
                    b[i] -= e;
                    (f(&a, t) - f(&b, t)) / (2.0 * e)
                })
                .collect();
            let res = wt + g[0] * g[0] + g[1] * g[1] + om[0] * g[0] + om[1] * g[1] - lam * f(&x, t);
            assert!(res.abs() <= 1e-4, "{res}");
        }
    }

    #[test]
    fn calibration_along_flow() {
        let x0 = p(&[0.3, 0.9]);
        for t in [0.0, 0.4, 7.1] {
            let y = crate::geometry::linear_flow(&x0, t, &[1.0, R2]).unwrap();
            assert!(oracle_w(&x0, &y, t, 1.0, &[1.0, R2]).unwrap() < 1e-28);
        }
    }

    #[test]
    fn action_formula_matches_discretised_minimisation() {
        // minimise the exact ODE cost over two-piece paths with a kink
        let (lam, om, t) = (1.0, 1.0, 0.5);
        let x0 = 0.0;
        let x = 0.3;
        let cost = |y_mid: f64| {
            let half = t / 2.0;
            let leg = |d: f64, u0: f64| {
                let v = d / half;
                u0 * (lam * half).exp() + (v - om).powi(2) / (4.0 * lam) * (lam * half).exp_m1()
            };
            leg(x - y_mid, leg(y_mid - x0, 0.0))
        };
        let best = (0..20001)
            .map(|i| -1.0 + 2.0 * i as f64 / 20000.0)
            .map(cost)
            .fold(f64::INFINITY, f64::min);
        let exact = oracle_action(&p(&[x0]), 0.0, &p(&[x]), t, lam, &[om]).unwrap();
        assert!(exact <= best + 1e-12);
        assert!(best - exact < 2e-3, "two-piece {best} vs exact {exact}");
        assert!(oracle_action(&p(&[0.0]), 0.0, &p(&[0.0]), 0.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn periodic_examples() {
        let s = RationalHyperplaneSet::new(&[1]).unwrap();
        assert_eq!(oracle_periodic_u(&s, &p(&[0.0]), 0.0, 1.0, &[1.0]).unwrap(), 0.0);
        let v = oracle_periodic_u(&s, &p(&[0.0]), 0.5, 2.0, &[1.0]).unwrap();
        assert!((v - 2.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_oracle_is_t_periodic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let s = RationalHyperplaneSet::new(&[1, 1]).unwrap();
        let t_per = R2 - 1.0;
        let om = [1.0, R2];
        for _ in 0..1000 {
            let x = p(&[rng.gen(), rng.gen()]);
            let t: f64 = rng.gen_range(0.0..5.0);
            let a = oracle_periodic_u(&s, &x, t, 1.0, &om).unwrap();
            let b = oracle_periodic_u(&s, &x, t + t_per, 1.0, &om).unwrap();
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn periodic_oracle_matches_sampled_sheets() {
        // brute-force min of oracle_w over points sampled densely on S
        let s = RationalHyperplaneSet::new(&[1, 2]).unwrap();
        let om = [1.0, R2];
        let m = 4000;
        let sheet: Vec<TorusPoint> = (0..m)
            .flat_map(|i| {
                let y1 = i as f64 / m as f64;
                (-3..=3).map(move |j| (y1, j))
            })
            .map(|(y1, j)| p(&[y1, (j as f64 - y1) / 2.0]))
            .collect();
        for (x, t) in [([0.1, 0.2], 0.3), ([0.7, 0.45], 1.9), ([0.33, 0.91], 0.0)] {
            let exact = oracle_periodic_u(&s, &p(&x), t, 1.0, &om).unwrap();
            let brute = sheet
                .iter()
                .map(|y| oracle_w(y, &p(&x), t, 1.0, &om).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(brute >= exact - 1e-12 && brute - exact < 1e-6, "{brute} vs {exact}");
        }
    }

    #[test]
    fn compare_reports_errors_and_mismatch() {
        let g = UniformGrid::new(1, 16).unwrap();
        let o = QuadraticOracle {
            lambda: 1.0,
            omega: vec![1.0],
            source: OracleSource::Point { x0: vec![0.0] },
        };
        let f0 = o.field(g, 0.0).unwrap();
        assert_eq!(compare_to_solver(&o, &[f0.clone()]).unwrap().sup, 0.0);
        let shifted = f0.map(|v| v + 0.5);
        let r = compare_fields(&[f0.clone()], &[shifted]).unwrap();
        assert!((r.sup - 0.5).abs() < 1e-15 && (r.snapshots[0].mean - 0.5).abs() < 1e-15);
        let other = o.field(UniformGrid::new(1, 8).unwrap(), 0.0).unwrap();
        assert!(compare_fields(&[f0.clone()], &[other]).is_err());
        let later = o.field(g, 0.1).unwrap();
        assert!(compare_fields(&[f0], &[later]).is_err());
        assert!((convergence_order(4.0, 2.0) - 1.0).abs() < 1e-15);
    }
}
