//! Admissible periods, integer-relation certificates and the invariant set
//! `S = {x : k.x in Z}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{linear_flow, TorusPoint};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ring {
    /// Rational coefficients: `(k.omega) T = k_{n+1} != 0`.
    #[serde(rename = "D")]
    D,
    /// Unit right-hand side: `T = 1/|k.omega|`.
    #[serde(rename = "scriptD")]
    ScriptD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCertificate {
    /// `(k_1, ..., k_n, k_{n+1})`.
    pub k: Vec<i64>,
    #[serde(rename = "T")]
    pub period: f64,
    pub residual: f64,
    pub ring: Ring,
}

impl PeriodCertificate {
    pub fn n(&self) -> usize {
        self.k.len() - 1
    }

    pub fn rhs(&self) -> i64 {
        self.k[self.n()]
    }

    pub fn set(&self) -> Result<RationalHyperplaneSet> {
        RationalHyperplaneSet::new(&self.k[..self.n()])
    }
}

/// Outcome of a bounded certificate search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSearch {
    pub certificate: Option<PeriodCertificate>,
    pub best_residual: f64,
    pub best_k: Vec<i64>,
    pub height: i64,
}

impl PeriodSearch {
    /// `certified`, `no-certificate-below-height`.
    pub fn status(&self) -> &'static str {
        if self.certificate.is_some() {
            "certified"
        } else {
            "no-certificate-below-height"
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn normalize(k: &mut [i64]) {
    let g = k.iter().fold(0, |acc, &x| gcd(acc, x));
    if g > 1 {
        k.iter_mut().for_each(|x| *x /= g);
    }
}

fn check_omega(omega: &[f64]) -> Result<()> {
    if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega {omega:?}")));
    }
    if omega.iter().all(|&w| w == 0.0) {
        return Err(Error::Domain("omega = 0, the admissible period set is empty".into()));
    }
    Ok(())
}

/// All integer vectors with entries in `[-height, height]`, excluding zero,
/// in lexicographic order.
fn integer_box(n: usize, height: i64) -> Vec<Vec<i64>> {
    let side = (2 * height + 1) as usize;
    let total = side.pow(n as u32);
    (0..total)
        .filter_map(|mut flat| {
            let mut k = vec![0i64; n];
            for a in (0..n).rev() {
                k[a] = (flat % side) as i64 - height;
                flat /= side;
            }
            if k.iter().all(|&x| x == 0) {
                None
            } else {
                Some(k)
            }
        })
        .collect()
}

fn search(t: f64, omega: &[f64], height: i64, tol: f64, ring: Ring) -> Result<PeriodSearch> {
    check_omega(omega)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("period {t} must be positive")));
    }
    if height < 1 {
        return Err(Error::InvalidParameter("height must be positive".into()));
    }
    let cands = integer_box(omega.len(), height);
    let best = cands
        .par_iter()
        .filter_map(|k| {
            let a: f64 = k.iter().zip(omega).map(|(&ki, w)| ki as f64 * w).sum();
            if a == 0.0 {
                return None;
            }
            let at = a * t;
            let m = match ring {
                Ring::D => at.round(),
                Ring::ScriptD => at.signum(),
            };
            if m == 0.0 || m.abs() > height as f64 {
                return None;
            }
            let mut full: Vec<i64> = k.clone();
            full.push(m as i64);
            if full[omega.len()] < 0 {
                full.iter_mut().for_each(|x| *x = -*x);
            }
            normalize(&mut full);
            if ring == Ring::ScriptD && full[omega.len()] != 1 {
                return None;
            }
            Some(((at - m).abs(), full))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let (best_residual, best_k) = best.unwrap_or((f64::INFINITY, vec![]));
    let certificate = (best_residual <= tol).then(|| PeriodCertificate {
        k: best_k.clone(),
        period: t,
        residual: best_residual,
        ring,
    });
    Ok(PeriodSearch {
        certificate,
        best_residual,
        best_k,
        height,
    })
}

/// Exhaustive search for `(k.omega) T = k_{n+1} != 0` with `|k_i| <= height`.
/// Absence of a certificate does not prove `T` is not admissible.
pub fn check_period_in_d(t: f64, omega: &[f64], height: i64, tol: f64) -> Result<PeriodSearch> {
    search(t, omega, height, tol, Ring::D)
}

/// As [`check_period_in_d`] with the right-hand side forced to 1.
pub fn check_period_in_script_d(
    t: f64,
    omega: &[f64],
    height: i64,
    tol: f64,
) -> Result<PeriodSearch> {
    search(t, omega, height, tol, Ring::ScriptD)
}

/// All `T = k_{n+1} / |k.omega|` with `|k_i| <= height`, sorted and
/// deduplicated to relative tolerance `1e-12`.
pub fn enumerate_periods(omega: &[f64], height: i64) -> Result<Vec<(f64, PeriodCertificate)>> {
    check_omega(omega)?;
    if height < 1 {
        return Err(Error::InvalidParameter("height must be positive".into()));
    }
    let n = omega.len();
    let mut all: Vec<(f64, PeriodCertificate)> = integer_box(n, height)
        .into_iter()
        .filter_map(|k| {
            let a: f64 = k.iter().zip(omega).map(|(&ki, w)| ki as f64 * w).sum();
            (a > 0.0).then_some((k, a))
        })
        .flat_map(|(k, a)| {
            (1..=height).map(move |m| {
                let mut full = k.clone();
                full.push(m);
                normalize(&mut full);
                let t = m as f64 / a;
                let resid = (a * t - m as f64).abs();
                let ring = if full[n] == 1 { Ring::ScriptD } else { Ring::D };
                (
                    t,
                    PeriodCertificate {
                        k: full,
                        period: t,
                        residual: resid,
                        ring,
                    },
                )
            })
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.k.cmp(&b.1.k)));
    let mut out: Vec<(f64, PeriodCertificate)> = Vec::new();
    for item in all {
        match out.last_mut() {
            Some(last) if (item.0 - last.0).abs() <= 1e-12 * last.0 => {
                // keep the lexicographically smallest certificate
                if item.1.k < last.1.k {
                    *last = item;
                }
            }
            _ => out.push(item),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Independence {
    pub independent: bool,
    pub witness: Option<Vec<i64>>,
    pub height: i64,
}

/// Searches for `k != 0`, `|k_i| <= height`, with `|k.omega| <= tol`.
pub fn rationally_independent(omega: &[f64], height: i64, tol: f64) -> Independence {
    let witness = integer_box(omega.len(), height.max(1))
        .into_par_iter()
        .filter_map(|mut k| {
            let a: f64 = k.iter().zip(omega).map(|(&ki, w)| ki as f64 * w).sum();
            if a.abs() > tol {
                return None;
            }
            if k.iter().find(|&&x| x != 0).copied().unwrap_or(0) < 0 {
                k.iter_mut().for_each(|x| *x = -*x);
            }
            normalize(&mut k);
            Some((a.abs(), k))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, k)| k);
    Independence {
        independent: witness.is_none(),
        witness,
        height,
    }
}

/// The projection of `{x : k.x in Z}` to the torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalHyperplaneSet {
    pub k: Vec<i64>,
}

impl RationalHyperplaneSet {
    pub fn new(k: &[i64]) -> Result<Self> {
        if k.is_empty() || k.iter().all(|&x| x == 0) {
            return Err(Error::InvalidParameter(format!("hyperplane normal {k:?}")));
        }
        Ok(RationalHyperplaneSet { k: k.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn kf(&self) -> Vec<f64> {
        self.k.iter().map(|&x| x as f64).collect()
    }

    pub fn k_norm(&self) -> f64 {
        dot(&self.kf(), &self.kf()).sqrt()
    }

    /// `k.x - round(k.x)` for unwrapped coordinates.
    pub fn phase(&self, x: &[f64]) -> f64 {
        let s: f64 = self.k.iter().zip(x).map(|(&ki, xi)| ki as f64 * xi).sum();
        s - s.round()
    }

    pub fn distance_raw(&self, x: &[f64]) -> f64 {
        self.phase(x).abs() / self.k_norm()
    }

    /// Point of `S` obtained by projecting `y` onto the sheet `k.x = m`.
    pub fn project(&self, y: &[f64], m: i64) -> Vec<f64> {
        let kf = self.kf();
        let s = (m as f64 - dot(&kf, y)) / dot(&kf, &kf);
        y.iter().zip(&kf).map(|(a, b)| a + s * b).collect()
    }
}

pub fn distance_to_s(s: &RationalHyperplaneSet, x: &TorusPoint) -> Result<f64> {
    if s.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: x.dim(),
        });
    }
    Ok(s.distance_raw(x.coords()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeGap {
    pub t: f64,
    pub min_distance: f64,
    pub predicted: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SInvarianceReport {
    pub return_defect: f64,
    pub return_pass: bool,
    pub probes: Vec<ProbeGap>,
    pub pass: bool,
}

/// Checks `Phi_T(S) = S` and the gap of `Phi_t(S)` from `S` for `t` in `(0,T)`.
pub fn s_invariance_check(
    s: &RationalHyperplaneSet,
    t_period: f64,
    omega: &[f64],
    samples: usize,
    t_probes: &[f64],
    tol: f64,
    seed: u64,
) -> Result<SInvarianceReport> {
    if s.dim() != omega.len() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: omega.len(),
        });
    }
    let a = dot(&s.kf(), omega);
    if ((a * t_period).abs() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "k = {:?} does not certify T = {t_period} with unit right-hand side (k.omega T = {})",
            s.k,
            a * t_period
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.dim();
    let pts: Vec<TorusPoint> = (0..samples.max(1))
        .map(|_| {
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let m = rng.gen_range(-2..=2);
            TorusPoint::new(&s.project(&y, m))
        })
        .collect::<Result<_>>()?;
    let dist_after = |t: f64| -> Result<Vec<f64>> {
        pts.iter()
            .map(|p| Ok(s.distance_raw(linear_flow(p, t, omega)?.coords())))
            .collect()
    };
    let return_defect = dist_after(t_period)?.into_iter().fold(0.0, f64::max);
    let mut probes = Vec::new();
    for &t in t_probes {
        let r = t / t_period;
        let predicted = (r - r.round()).abs() / s.k_norm();
        let min_distance = dist_after(t)?.into_iter().fold(f64::INFINITY, f64::min);
        probes.push(ProbeGap {
            t,
            min_distance,
            predicted,
            pass: min_distance >= predicted - tol,
        });
    }
    let return_pass = return_defect <= tol;
    let pass = return_pass && probes.iter().all(|p| p.pass);
    Ok(SInvarianceReport {
        return_defect,
        return_pass,
        probes,
        pass,
    })
}

/// Largest distance from points of the continuous orbit `Phi_t(x0)`,
/// `t in [0, 1/min|omega_i != 0|]` sampled at `mesh` points, to the discrete
/// orbit `{Phi_{mT}(x0) : 0 <= m <= iterations}`.
pub fn orbit_density_gap(
    x0: &TorusPoint,
    t_period: f64,
    omega: &[f64],
    iterations: usize,
    mesh: usize,
) -> Result<f64> {
    check_omega(omega)?;
    if mesh == 0 || iterations == 0 {
        return Err(Error::InvalidParameter("iterations and mesh must be positive".into()));
    }
    let horizon = 1.0
        / omega
            .iter()
            .filter(|w| **w != 0.0)
            .map(|w| w.abs())
            .fold(f64::INFINITY, f64::min);
    let discrete: Vec<TorusPoint> = (0..=iterations)
        .map(|m| linear_flow(x0, m as f64 * t_period, omega))
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = (0..mesh)
        .into_par_iter()
        .map(|i| {
            let t = horizon * i as f64 / (mesh.max(2) - 1) as f64;
            let p = linear_flow(x0, t, omega).expect("validated dims");
            discrete
                .iter()
                .map(|q| crate::geometry::raw_distance(p.coords(), q.coords()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap;

    const R2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn d_examples() {
        let c = check_period_in_d(1.0, &[1.0, R2], 5, 1e-9).unwrap().certificate.unwrap();
        assert_eq!(c.k, vec![1, 0, 1]);
        assert_eq!(c.residual, 0.0);
        let c = check_period_in_d(R2, &[1.0, R2], 5, 1e-9).unwrap().certificate.unwrap();
        assert_eq!(c.k, vec![0, 1, 2]);
        let c = check_period_in_d(R2 - 1.0, &[1.0, R2], 5, 1e-9).unwrap().certificate.unwrap();
        assert_eq!(c.k, vec![1, 1, 1]);
        let s = check_period_in_d(std::f64::consts::PI, &[1.0, R2], 50, 1e-9).unwrap();
        assert!(s.certificate.is_none());
        assert!(s.best_residual > 1e-9 && s.best_residual.is_finite());
        assert_eq!(s.status(), "no-certificate-below-height");
    }

    #[test]
    fn script_d_examples() {
        let c = check_period_in_script_d(1.0, &[1.0, R2], 5, 1e-9).unwrap().certificate.unwrap();
        assert_eq!(c.k, vec![1, 0, 1]);
        assert_eq!(c.ring, Ring::ScriptD);
        let c = check_period_in_script_d(1.0 / R2, &[1.0, R2], 5, 1e-9).unwrap().certificate.unwrap();
        assert_eq!(c.k, vec![0, 1, 1]);
        assert!(check_period_in_script_d(R2, &[1.0, R2], 50, 1e-9).unwrap().certificate.is_none());
        assert!(check_period_in_d(R2, &[1.0, R2], 50, 1e-9).unwrap().certificate.is_some());
    }

    #[test]
    fn zero_omega_is_domain_error() {
        assert!(matches!(check_period_in_d(1.0, &[0.0, 0.0], 3, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(enumerate_periods(&[0.0], 3), Err(Error::Domain(_))));
        assert!(check_period_in_d(-1.0, &[1.0], 3, 1e-9).is_err());
    }

    #[test]
    fn enumerate_examples() {
        let ts: Vec<f64> = enumerate_periods(&[1.0], 2).unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(ts, vec![0.5, 1.0, 2.0]);
        let ts: Vec<f64> = enumerate_periods(&[1.0, R2], 1).unwrap().into_iter().map(|p| p.0).collect();
        for want in [1.0, 1.0 / R2, 1.0 / (1.0 + R2), 1.0 / (R2 - 1.0)] {
            assert!(ts.iter().any(|t| (t - want).abs() < 1e-12), "{want} missing from {ts:?}");
        }
    }

    #[test]
    fn enumerated_periods_are_recertified() {
        let omega = [1.0, R2];
        for (t, cert) in enumerate_periods(&omega, 3).unwrap() {
            let s = check_period_in_d(t, &omega, 3, 1e-9).unwrap();
            let found = s.certificate.expect("certificate at the same height");
            assert!(found.residual <= 1e-9);
            assert!(found.rhs() > 0);
            let a: f64 = cert.k[..2].iter().zip(&omega).map(|(&k, w)| k as f64 * w).sum();
            assert!((a * t - cert.rhs() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn independence_examples() {
        let r = rationally_independent(&[1.0, R2], 50, 1e-9);
        assert!(r.independent);
        let r = rationally_independent(&[1.0, 2.0], 50, 1e-9);
        assert_eq!(r.witness, Some(vec![2, -1]));
        assert!(rationally_independent(&[3.0], 50, 1e-9).independent);
    }

    #[test]
    fn distance_examples() {
        let s = RationalHyperplaneSet::new(&[1, 0]).unwrap();
        assert_eq!(distance_to_s(&s, &wrap(&[0.0, 0.7]).unwrap()).unwrap(), 0.0);
        assert_eq!(distance_to_s(&s, &wrap(&[0.5, 0.2]).unwrap()).unwrap(), 0.5);
        let s = RationalHyperplaneSet::new(&[1, 1]).unwrap();
        let d = distance_to_s(&s, &wrap(&[0.25, 0.5]).unwrap()).unwrap();
        assert!((d - 0.25 / R2).abs() < 1e-15);
        assert!(RationalHyperplaneSet::new(&[0, 0]).is_err());
        assert!(distance_to_s(&s, &wrap(&[0.1]).unwrap()).is_err());
    }

    #[test]
    fn invariance_examples() {
        let s = RationalHyperplaneSet::new(&[1]).unwrap();
        let r = s_invariance_check(&s, 1.0, &[1.0], 10, &[0.5], 1e-12, 0).unwrap();
        assert!(r.pass);
        assert!((r.probes[0].min_distance - 0.5).abs() < 1e-12);
        let s = RationalHyperplaneSet::new(&[1, 1]).unwrap();
        let r = s_invariance_check(&s, R2 - 1.0, &[1.0, R2], 100, &[0.1, 0.2, 0.3], 1e-9, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(s_invariance_check(&s, 1.0, &[1.0, R2], 10, &[], 1e-9, 0).is_err());
    }

    #[test]
    fn invariance_for_enumerated_unit_certificates() {
        let omega = [1.0, R2];
        for (t, cert) in enumerate_periods(&omega, 5).unwrap() {
            if cert.rhs() != 1 {
                continue;
            }
            let s = cert.set().unwrap();
            let probes = [0.25 * t, 0.5 * t, 0.75 * t];
            let r = s_invariance_check(&s, t, &omega, 20, &probes, 1e-8, 2).unwrap();
            assert!(r.pass, "T = {t}, k = {:?}: {r:?}", cert.k);
        }
    }

    #[test]
    fn orbit_gap_examples() {
        let x0 = TorusPoint::origin(1);
        let g = orbit_density_gap(&x0, std::f64::consts::PI, &[1.0], 1000, 2000).unwrap();
        assert!(g < 0.01, "{g}");
        let mesh = 2001;
        let g = orbit_density_gap(&x0, 1.0, &[1.0], 1000, mesh).unwrap();
        assert!(g >= 0.5 - 1.0 / mesh as f64 && g <= 0.5);
        let x0 = TorusPoint::origin(2);
        let gs: Vec<f64> = [10, 100, 1000]
            .iter()
            .map(|&it| orbit_density_gap(&x0, std::f64::consts::PI, &[1.0, R2], it, 500).unwrap())
            .collect();
        assert!(gs[0] > gs[1] && gs[1] > gs[2], "{gs:?}");
    }
}
