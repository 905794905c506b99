//! Contact Hamiltonians `H(p, u)`, their audits, the equilibrium level and the
//! Legendre dual `L(v, u) = sup_p <v,p> - H(p,u)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, min_eigenvalue, norm, solve};

/// Sub-stepping controls for the scalar value ODE `u' = L(v, u)` along a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub dt: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub legendre_tol: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            dt: 1e-3,
            fp_tol: 1e-13,
            fp_max_iter: 200,
            legendre_tol: 1e-13,
        }
    }
}

type Rate<'a> = Box<dyn Fn(f64) -> Result<f64> + Send + Sync + 'a>;

/// Map `u0 -> u(span)` for a straight segment with constant velocity.
pub enum SegmentFlow<'a> {
    /// `u(span) = a u0 + b`.
    Affine { a: f64, b: f64 },
    /// Implicit Euler: each sub-step solves `a = u + tau * rate(a)`.
    Implicit {
        substeps: usize,
        tau: f64,
        rate: Rate<'a>,
        fp_tol: f64,
        fp_max_iter: usize,
    },
}

impl SegmentFlow<'_> {
    /// Returns the end value and the total number of fixed-point iterations.
    /// Errors carry `node = usize::MAX`; callers fill in the node.
    pub fn advance(&self, u0: f64) -> Result<(f64, usize)> {
        match self {
            SegmentFlow::Affine { a, b } => Ok((a * u0 + b, 0)),
            SegmentFlow::Implicit {
                substeps,
                tau,
                rate,
                fp_tol,
                fp_max_iter,
            } => {
                let mut u = u0;
                let mut total = 0;
                for _ in 0..*substeps {
                    let mut a = u;
                    let mut done = false;
                    for it in 1..=*fp_max_iter {
                        let next = u + tau * rate(a)?;
                        let diff = (next - a).abs();
                        a = next;
                        if diff <= fp_tol * a.abs().max(1.0) {
                            total += it;
                            done = true;
                            break;
                        }
                    }
                    if !done {
                        return Err(Error::FixedPoint {
                            node: usize::MAX,
                            iterations: *fp_max_iter,
                        });
                    }
                    u = a;
                }
                Ok((u, total))
            }
        }
    }
}

pub trait ContactHamiltonian: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn evaluate(&self, p: &[f64], u: f64) -> f64;
    fn kappa(&self) -> f64;
    fn delta(&self) -> f64;
    /// Radius of the momentum box used by numeric searches.
    fn p_box(&self) -> f64;
    fn name(&self) -> String;

    fn grad_p(&self, _p: &[f64], _u: f64) -> Option<Vec<f64>> {
        None
    }

    /// Row-major Hessian in `p`.
    fn hessian_p(&self, p: &[f64], u: f64) -> Vec<f64> {
        fd_hessian(self, p, u)
    }

    fn lagrangian(&self, v: &[f64], u: f64, tol: f64) -> Result<f64> {
        legendre_newton(self, v, u, tol)
    }

    fn segment_flow(&self, v: &[f64], span: f64, ode: &OdeConfig) -> Result<SegmentFlow<'_>> {
        let v = v.to_vec();
        let tol = ode.legendre_tol;
        implicit_flow(
            span,
            ode,
            Box::new(move |u| self.lagrangian(&v, u, tol)),
        )
    }
}

fn implicit_flow<'a>(span: f64, ode: &OdeConfig, rate: Rate<'a>) -> Result<SegmentFlow<'a>> {
    if !(span > 0.0 && ode.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "segment span {span} and sub-step {} must be positive",
            ode.dt
        )));
    }
    let substeps = (span / ode.dt).ceil().max(1.0) as usize;
    Ok(SegmentFlow::Implicit {
        substeps,
        tau: span / substeps as f64,
        rate,
        fp_tol: ode.fp_tol,
        fp_max_iter: ode.fp_max_iter,
    })
}

const EPS: f64 = f64::EPSILON;

fn fd_gradient<H: ContactHamiltonian + ?Sized>(h: &H, p: &[f64], u: f64) -> Vec<f64> {
    if let Some(g) = h.grad_p(p, u) {
        return g;
    }
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let s = EPS.cbrt() * p[i].abs().max(1.0);
            q[i] = p[i] + s;
            let fp = h.evaluate(&q, u);
            q[i] = p[i] - s;
            let fm = h.evaluate(&q, u);
            q[i] = p[i];
            (fp - fm) / (2.0 * s)
        })
        .collect()
}

fn fd_hessian<H: ContactHamiltonian + ?Sized>(h: &H, p: &[f64], u: f64) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n * n];
    let mut q = p.to_vec();
    let f0 = h.evaluate(p, u);
    for i in 0..n {
        let si = EPS.powf(0.25) * p[i].abs().max(1.0);
        q[i] = p[i] + si;
        let fp = h.evaluate(&q, u);
        q[i] = p[i] - si;
        let fm = h.evaluate(&q, u);
        q[i] = p[i];
        out[i * n + i] = (fp - 2.0 * f0 + fm) / (si * si);
        for j in i + 1..n {
            let sj = EPS.powf(0.25) * p[j].abs().max(1.0);
            let mut e = |di: f64, dj: f64| {
                q[i] = p[i] + di;
                q[j] = p[j] + dj;
                let v = h.evaluate(&q, u);
                q[i] = p[i];
                q[j] = p[j];
                v
            };
            let m = (e(si, sj) - e(si, -sj) - e(-si, sj) + e(-si, -sj)) / (4.0 * si * sj);
            out[i * n + j] = m;
            out[j * n + i] = m;
        }
    }
    out
}

/// Damped Newton ascent on `p -> <v,p> - H(p,u)` from `p = 0`, projected onto
/// the ball of radius `p_box`; the ball doubles when the maximiser sits on it.
pub fn legendre_newton<H: ContactHamiltonian + ?Sized>(
    h: &H,
    v: &[f64],
    u: f64,
    tol: f64,
) -> Result<f64> {
    let n = h.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let objective = |p: &[f64]| dot(v, p) - h.evaluate(p, u);
    let mut radius = h.p_box();
    let mut p = vec![0.0; n];
    let mut iterations = 0;
    for _retry in 0..12 {
        let mut f = objective(&p);
        let mut converged = false;
        for _ in 0..200 {
            iterations += 1;
            let grad_h = fd_gradient(h, &p, u);
            let g: Vec<f64> = v.iter().zip(&grad_h).map(|(a, b)| a - b).collect();
            let hess = h.hessian_p(&p, u);
            let d = solve(&hess, &g).unwrap_or_else(|| g.clone());
            let predicted = 0.5 * dot(&g, &d).abs();
            if predicted <= tol || norm(&d) <= 1e-14 * norm(&p).max(1.0) {
                converged = true;
                break;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let mut cand: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                let r = norm(&cand);
                if r > radius {
                    cand.iter_mut().for_each(|c| *c *= radius / r);
                }
                let fc = objective(&cand);
                if fc >= f - 1e-15 * f.abs().max(1.0) {
                    accepted = fc > f || step == 1.0;
                    let moved = norm(
                        &cand.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>(),
                    );
                    p = cand;
                    f = fc;
                    if moved <= 1e-15 * norm(&p).max(1.0) {
                        converged = true;
                    }
                    break;
                }
                step *= 0.5;
            }
            if converged {
                break;
            }
            if !accepted {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Legendre {
                iterations,
                last_p: p,
            });
        }
        if norm(&p) < radius * (1.0 - 1e-9) {
            return Ok(f);
        }
        radius *= 2.0;
    }
    Err(Error::Legendre {
        iterations,
        last_p: p,
    })
}

/// `H = |p|^2 + <omega,p> - lambda u`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub kappa: f64,
    pub delta: f64,
    pub p_box: f64,
}

impl QuadraticHamiltonian {
    pub fn new(lambda: f64, omega: &[f64]) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
        }
        if omega.is_empty() || omega.len() > 3 || omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega {omega:?}")));
        }
        Ok(QuadraticHamiltonian {
            lambda,
            omega: omega.to_vec(),
            kappa: lambda,
            delta: lambda,
            p_box: 10.0,
        })
    }
}

impl ContactHamiltonian for QuadraticHamiltonian {
    fn dim(&self) -> usize {
        self.omega.len()
    }
    fn evaluate(&self, p: &[f64], u: f64) -> f64 {
        dot(p, p) + dot(&self.omega, p) - self.lambda * u
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn p_box(&self) -> f64 {
        self.p_box
    }
    fn name(&self) -> String {
        "quadratic".into()
    }
    fn grad_p(&self, p: &[f64], _u: f64) -> Option<Vec<f64>> {
        Some(p.iter().zip(&self.omega).map(|(a, w)| 2.0 * a + w).collect())
    }
    fn hessian_p(&self, _p: &[f64], _u: f64) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        (0..n).for_each(|i| m[i * n + i] = 2.0);
        m
    }
    fn lagrangian(&self, v: &[f64], u: f64, _tol: f64) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let s: f64 = v.iter().zip(&self.omega).map(|(a, w)| (a - w).powi(2)).sum();
        Ok(s / 4.0 + self.lambda * u)
    }
    fn segment_flow(&self, v: &[f64], span: f64, _ode: &OdeConfig) -> Result<SegmentFlow<'_>> {
        // u' = |v-omega|^2/4 + lambda u has an exact affine flow
        let s: f64 = v.iter().zip(&self.omega).map(|(a, w)| (a - w).powi(2)).sum();
        let lt = self.lambda * span;
        Ok(SegmentFlow::Affine {
            a: lt.exp(),
            b: s / (4.0 * self.lambda) * lt.exp_m1(),
        })
    }
}

/// `H = sqrt(1+|p|^2) - 1 + |p|^2/2 + <omega,p> - lambda u - mu sin u + b`,
/// with `kappa = lambda + mu` and `delta = lambda - mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct TonelliSine {
    pub lambda: f64,
    pub mu: f64,
    pub b: f64,
    pub omega: Vec<f64>,
    pub p_box: f64,
}

impl TonelliSine {
    pub fn new(lambda: f64, mu: f64, b: f64, omega: &[f64]) -> Result<Self> {
        if !(lambda > mu.abs()) {
            return Err(Error::InvalidParameter(format!(
                "need lambda > |mu|, got lambda {lambda}, mu {mu}"
            )));
        }
        if omega.is_empty() || omega.len() > 3 {
            return Err(Error::InvalidParameter(format!("omega {omega:?}")));
        }
        Ok(TonelliSine {
            lambda,
            mu,
            b,
            omega: omega.to_vec(),
            p_box: 10.0,
        })
    }

    fn kinetic(q: &[f64]) -> f64 {
        let r2 = dot(q, q);
        r2 / (1.0 + (1.0 + r2).sqrt()) + 0.5 * r2
    }

    fn potential(&self, u: f64) -> f64 {
        self.lambda * u + self.mu * u.sin() - self.b
    }

    /// Convex conjugate of the kinetic part by Newton with exact derivatives.
    fn kinetic_conjugate(&self, w: &[f64]) -> Result<f64> {
        let n = w.len();
        let mut q: Vec<f64> = w.iter().map(|x| x / 2.0).collect();
        for _ in 0..100 {
            let s = (1.0 + dot(&q, &q)).sqrt();
            let g: Vec<f64> = (0..n).map(|i| w[i] - q[i] / s - q[i]).collect();
            let mut hess = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let id = if i == j { 1.0 } else { 0.0 };
                    hess[i * n + j] = id / s - q[i] * q[j] / (s * s * s) + id;
                }
            }
            let d = solve(&hess, &g).ok_or_else(|| Error::Legendre {
                iterations: 0,
                last_p: q.clone(),
            })?;
            q.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            if norm(&d) <= 1e-15 * norm(&q).max(1.0) {
                return Ok(dot(w, &q) - Self::kinetic(&q));
            }
        }
        Err(Error::Legendre {
            iterations: 100,
            last_p: q,
        })
    }
}

impl ContactHamiltonian for TonelliSine {
    fn dim(&self) -> usize {
        self.omega.len()
    }
    fn evaluate(&self, p: &[f64], u: f64) -> f64 {
        Self::kinetic(p) + dot(&self.omega, p) - self.potential(u)
    }
    fn kappa(&self) -> f64 {
        self.lambda + self.mu.abs()
    }
    fn delta(&self) -> f64 {
        self.lambda - self.mu.abs()
    }
    fn p_box(&self) -> f64 {
        self.p_box
    }
    fn name(&self) -> String {
        "tonelli_sine".into()
    }
    fn grad_p(&self, p: &[f64], _u: f64) -> Option<Vec<f64>> {
        let s = (1.0 + dot(p, p)).sqrt();
        Some(
            p.iter()
                .zip(&self.omega)
                .map(|(a, w)| a / s + a + w)
                .collect(),
        )
    }
    fn lagrangian(&self, v: &[f64], u: f64, _tol: f64) -> Result<f64> {
        let w: Vec<f64> = v.iter().zip(&self.omega).map(|(a, b)| a - b).collect();
        Ok(self.kinetic_conjugate(&w)? + self.potential(u))
    }
    fn segment_flow(&self, v: &[f64], span: f64, ode: &OdeConfig) -> Result<SegmentFlow<'_>> {
        let w: Vec<f64> = v.iter().zip(&self.omega).map(|(a, b)| a - b).collect();
        let kstar = self.kinetic_conjugate(&w)?;
        implicit_flow(span, ode, Box::new(move |u| Ok(kstar + self.potential(u))))
    }
}

type HamFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Hamiltonian given by a closure; derivatives and the Legendre dual are numeric.
#[derive(Clone)]
pub struct FnHamiltonian {
    pub n: usize,
    pub kappa: f64,
    pub delta: f64,
    pub p_box: f64,
    pub label: String,
    f: Arc<HamFn>,
}

impl FnHamiltonian {
    pub fn new(
        n: usize,
        kappa: f64,
        delta: f64,
        p_box: f64,
        label: &str,
        f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnHamiltonian {
            n,
            kappa,
            delta,
            p_box,
            label: label.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnHamiltonian")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("kappa", &self.kappa)
            .field("delta", &self.delta)
            .finish()
    }
}

impl ContactHamiltonian for FnHamiltonian {
    fn dim(&self) -> usize {
        self.n
    }
    fn evaluate(&self, p: &[f64], u: f64) -> f64 {
        (self.f)(p, u)
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn p_box(&self) -> f64 {
        self.p_box
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Config block selecting a Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub kind: String,
    #[serde(default = "one")]
    pub lambda: f64,
    pub omega: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_box: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl HamiltonianSpec {
    pub fn quadratic(lambda: f64, omega: &[f64]) -> Self {
        HamiltonianSpec {
            kind: "quadratic".into(),
            lambda,
            omega: omega.to_vec(),
            mu: None,
            b: None,
            kappa: None,
            delta: None,
            p_box: None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn ContactHamiltonian>> {
        match self.kind.as_str() {
            "quadratic" => {
                let mut h = QuadraticHamiltonian::new(self.lambda, &self.omega)?;
                if let Some(k) = self.kappa {
                    h.kappa = k;
                }
                if let Some(d) = self.delta {
                    h.delta = d;
                }
                if let Some(p) = self.p_box {
                    h.p_box = p;
                }
                Ok(Box::new(h))
            }
            "tonelli_sine" => {
                if self.kappa.is_some() || self.delta.is_some() {
                    return Err(Error::Config(
                        "tonelli_sine derives kappa and delta from lambda and mu".into(),
                    ));
                }
                let mut h = TonelliSine::new(
                    self.lambda,
                    self.mu.unwrap_or(0.5),
                    self.b.unwrap_or(1.0),
                    &self.omega,
                )?;
                if let Some(p) = self.p_box {
                    h.p_box = p;
                }
                Ok(Box::new(h))
            }
            other => Err(Error::Config(format!(
                "unknown hamiltonian kind '{other}' (known: quadratic, tonelli_sine)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub pass: bool,
    /// Worst sampled statistic (smallest eigenvalue, largest growth deficit, ...).
    pub worst: f64,
    pub witness_p: Vec<f64>,
    pub witness_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub hamiltonian: String,
    pub samples: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn require(&self) -> Result<()> {
        match self.checks.iter().find(|c| !c.pass) {
            None => Ok(()),
            Some(c) => Err(Error::Audit(format!(
                "{} fails at p = {:?}, u = {} (statistic {})",
                c.name, c.witness_p, c.witness_u, c.worst
            ))),
        }
    }
}

/// Sampled checks of convexity, superlinearity and the `u`-slope bounds on
/// `|p|_inf <= p_box`, `|u| <= p_box`.
pub fn audit_assumptions(h: &dyn ContactHamiltonian, samples: usize, seed: u64) -> AuditReport {
    let n = h.dim();
    let r = h.p_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-6 * (1.0 + h.kappa());

    let mut convex = (f64::INFINITY, vec![], 0.0);
    let mut slope = (f64::NEG_INFINITY, vec![], 0.0, true);
    let mut growth = (f64::INFINITY, vec![], 0.0);

    for _ in 0..samples.max(1) {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        let u = rng.gen_range(-r..r);

        let eig = min_eigenvalue(&h.hessian_p(&p, u), n);
        if eig < convex.0 {
            convex = (eig, p.clone(), u);
        }

        let s = EPS.cbrt() * u.abs().max(1.0);
        let du = (h.evaluate(&p, u + s) - h.evaluate(&p, u - s)) / (2.0 * s);
        let excess = (-h.kappa() - du).max(du + h.delta());
        if excess > slope.0 {
            slope = (excess, p.clone(), u, excess <= tol);
        }

        let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dn = norm(&dir).max(1e-12);
        dir.iter_mut().for_each(|d| *d /= dn);
        let h0 = h.evaluate(&vec![0.0; n], u);
        let ratio = |rad: f64| {
            let q: Vec<f64> = dir.iter().map(|d| d * rad).collect();
            (h.evaluate(&q, u) - h0) / rad
        };
        let (a, b, c) = (ratio(r / 4.0), ratio(r / 2.0), ratio(r));
        let margin = (b - a).min(c - b);
        if margin < growth.0 {
            growth = (margin, dir.iter().map(|d| d * r).collect(), u);
        }
    }

    AuditReport {
        hamiltonian: h.name(),
        samples,
        checks: vec![
            AssumptionCheck {
                name: "H1".into(),
                pass: convex.0 > 0.0,
                worst: convex.0,
                witness_p: convex.1,
                witness_u: convex.2,
            },
            AssumptionCheck {
                name: "H2".into(),
                pass: growth.0 > 0.0,
                worst: growth.0,
                witness_p: growth.1,
                witness_u: growth.2,
            },
            AssumptionCheck {
                name: "H3".into(),
                pass: slope.3,
                worst: slope.0,
                witness_p: slope.1,
                witness_u: slope.2,
            },
        ],
    }
}

/// The unique root of `u -> H(0,u)`, found by bracketing with the slope bounds
/// and bisection. `tol <= 0` selects `1e-12 max(1, |H(0,0)|)`.
pub fn find_equilibrium_c(h: &dyn ContactHamiltonian, tol: f64) -> Result<f64> {
    let zero = vec![0.0; h.dim()];
    let f = |u: f64| h.evaluate(&zero, u);
    let f0 = f(0.0);
    if !f0.is_finite() {
        return Err(Error::NonFinite("H(0,0)".into()));
    }
    let tol = if tol > 0.0 { tol } else { 1e-12 * f0.abs().max(1.0) };
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let guess = f0 / h.delta().max(1e-300);
    let (mut lo, mut hi) = if f0 > 0.0 { (0.0, guess) } else { (guess, 0.0) };
    let mut widen = 0;
    while f(lo) < 0.0 || f(hi) > 0.0 {
        let w = (hi - lo).max(1.0);
        if f(lo) < 0.0 {
            lo -= w;
        }
        if f(hi) > 0.0 {
            hi += w;
        }
        widen += 1;
        if widen > 200 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NoConvergence("no sign change of H(0,u)".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(Error::NonFinite(format!("H(0,{mid})")));
        }
        if fm == 0.0 || (fm.abs() <= tol && hi - lo <= 1e-15 * mid.abs().max(1.0)) {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1e-300) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid).abs() <= tol {
        Ok(mid)
    } else {
        Err(Error::NoConvergence(format!(
            "|H(0,{mid})| = {} above tolerance {tol}",
            f(mid).abs()
        )))
    }
}

/// `omega = dH/dp(0, c)`.
pub fn frequency_omega(h: &dyn ContactHamiltonian, c: f64) -> Vec<f64> {
    let zero = vec![0.0; h.dim()];
    if let Some(g) = h.grad_p(&zero, c) {
        return g;
    }
    let s = EPS.cbrt() * h.p_box().max(1.0);
    let mut q = zero.clone();
    (0..h.dim())
        .map(|i| {
            q[i] = s;
            let fp = h.evaluate(&q, c);
            q[i] = -s;
            let fm = h.evaluate(&q, c);
            q[i] = 0.0;
            (fp - fm) / (2.0 * s)
        })
        .collect()
}

pub fn legendre_l(h: &dyn ContactHamiltonian, v: &[f64], u: f64, tol: f64) -> Result<f64> {
    h.lagrangian(v, u, tol)
}

/// Minimiser `v* = dH/dp(0,u)` of `v -> L(v,u)` and the minimum `-H(0,u)`.
pub fn min_velocity_cost(h: &dyn ContactHamiltonian, u: f64) -> (Vec<f64>, f64) {
    let v = frequency_omega(h, u);
    (v, -h.evaluate(&vec![0.0; h.dim()], u))
}

/// Equilibrium level and frequency of a Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumData {
    pub c: f64,
    pub omega: Vec<f64>,
}

impl EquilibriumData {
    pub fn of(h: &dyn ContactHamiltonian) -> Result<Self> {
        let c = find_equilibrium_c(h, 0.0)?;
        Ok(EquilibriumData {
            c,
            omega: frequency_omega(h, c),
        })
    }
}
