//! Acceptance criteria. Run with `--nocapture` to see the PASS/FAIL lines.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_hj::almost_periodic::{
    epsilon_periods, min_compose, non_periodicity_check, solution_property_check, ComposeOptions, EpsilonScan,
};
use torus_hj::geometry::{ScalarField, TorusPoint, UniformGrid};
use torus_hj::hamiltonian::{ContactHamiltonian, QuadraticHamiltonian, TonelliSine};
use torus_hj::periodic::{
    compute_epsilon0, fundamental_period_check, iterate_Uk, subsolution_residual, verify_periodicity, W_epsilon,
    PeriodicOptions, PeriodicSolution, PeriodicityReport, SubsolutionParams,
};
use torus_hj::periods::{
    check_period_in_d, check_period_in_script_d, distance_to_s, enumerate_periods, rationally_independent,
    PeriodCertificate, RationalHyperplaneSet, Ring,
};
use torus_hj::semigroup::{
    action_function, calibration_defect, evolve, expansiveness_check, inf_commutation_defect, long_time_limit,
    markov_check, monotonicity_check, Classification, SolverConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Closed-form `min_k (lambda/4)|x - x0 + k - omega t|^2`, summed over axes.
fn point_oracle(x: &[f64], x0: &[f64], t: f64, lambda: f64, omega: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = x[i] - x0[i] - omega[i] * t;
        let d = d - d.round();
        s += d * d;
    }
    0.25 * lambda * s
}

/// Closed-form periodic solution `(lambda/4) dist(x - omega t, S)^2` for `S = {k.x in Z}`.
fn periodic_oracle(x: &[f64], t: f64, k: &[i64], lambda: f64, omega: &[f64]) -> f64 {
    let kx: f64 = (0..x.len()).map(|i| k[i] as f64 * (x[i] - omega[i] * t)).sum();
    let k2: f64 = k.iter().map(|&a| (a * a) as f64).sum();
    let r = kx - kx.round();
    0.25 * lambda * r * r / k2
}

fn cert(k: &[i64], period: f64) -> PeriodCertificate {
    PeriodCertificate {
        k: k.to_vec(),
        period,
        residual: 0.0,
        ring: if k[k.len() - 1] == 1 { Ring::ScriptD } else { Ring::D },
    }
}

fn periodic_error(sol: &PeriodicSolution, k: &[i64], lambda: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for f in &sol.fields_over_period {
        for i in 0..f.grid.len() {
            let x = f.node_point(i);
            worst = worst.max((f.values[i] - periodic_oracle(&x, f.time, k, lambda, &sol.omega)).abs());
        }
    }
    worst
}

fn c1_oracle_equivalence() -> Outcome {
    let omega = [1.0];
    let h = QuadraticHamiltonian::new(1.0, &omega).unwrap();
    let x0 = [0.3];
    let cfg = SolverConfig {
        dt: 1e-3,
        ..Default::default()
    };
    let mut errs = Vec::new();
    for n in [128usize, 256] {
        let g = UniformGrid::new(1, n).unwrap();
        let phi = ScalarField::from_fn(g, 0.0, |x| point_oracle(x, &x0, 0.0, 1.0, &omega));
        let r = evolve(&phi, 1.0, &h, &cfg, &[]).unwrap();
        let f = r.last();
        let e = (0..g.len())
            .map(|i| (f.values[i] - point_oracle(&f.node_point(i), &x0, 1.0, 1.0, &omega)).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    let ratio = errs[0] / errs[1];
    outcome(
        errs[1] <= 5e-3 && (1.5..=2.5).contains(&ratio),
        format!("sup error N=256 {:.3e} (<= 5e-3), ratio N=128/N=256 {ratio:.3} (in [1.5, 2.5])", errs[1]),
    )
}

fn c2_equilibrium() -> Outcome {
    let hs: Vec<Box<dyn ContactHamiltonian>> = vec![
        Box::new(QuadraticHamiltonian::new(1.0, &[1.0, SQRT_2]).unwrap()),
        Box::new(TonelliSine::new(1.0, 0.5, 0.3, &[1.0, SQRT_2]).unwrap()),
        Box::new(QuadraticHamiltonian::new(1.0, &[1.0]).unwrap()),
        Box::new(TonelliSine::new(1.0, 0.5, 0.3, &[1.0]).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for h in &hs {
        let c = torus_hj::hamiltonian::EquilibriumData::of(h.as_ref()).unwrap().c;
        let size = if h.dim() == 1 { 128 } else { 16 };
        let g = UniformGrid::new(h.dim(), size).unwrap();
        let cfg = SolverConfig {
            dt: 1e-2,
            ..Default::default()
        };
        let r = evolve(&ScalarField::constant(g, c, 0.0), 10.0, h.as_ref(), &cfg, &[]).unwrap();
        worst = worst.max(r.last().values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max));
    }
    outcome(worst <= 1e-8, format!("max |T_10 c - c| {worst:.3e} over both Hamiltonians, n = 1, 2 (<= 1e-8)"))
}

struct PeriodicCase {
    sol: PeriodicSolution,
    report: PeriodicityReport,
    oracle_error: f64,
}

fn periodic_case(omega: &[f64], k: &[i64], period: f64, size: usize) -> PeriodicCase {
    let h = QuadraticHamiltonian::new(1.0, omega).unwrap();
    let g = UniformGrid::new(omega.len(), size).unwrap();
    let cfg = SolverConfig {
        dt: 1e-3,
        ..Default::default()
    };
    let opts = PeriodicOptions::default();
    let sol = iterate_Uk(&cert(k, period), g, &h, &cfg, &opts).unwrap();
    let report = verify_periodicity(&sol, &h, &cfg, opts.conv_tol, opts.time_samples).unwrap();
    let oracle_error = periodic_error(&sol, &k[..omega.len()], 1.0);
    PeriodicCase {
        sol,
        report,
        oracle_error,
    }
}

fn c3_periodic_line(case: &PeriodicCase) -> Outcome {
    let r = &case.report;
    let sol = &case.sol;
    let decrements_ok = sol.convergence.iter().all(|d| *d >= 0.0);
    let mid = sol.value_at(&[0.0], 0.5);
    let pass = sol.converged
        && r.period_defect <= 5e-3
        && r.oscillation >= 0.0575
        && decrements_ok
        && r.floor >= sol.c - 1e-9
        && (mid - 0.0625).abs() <= 5e-3;
    outcome(
        pass,
        format!(
            "period_defect {:.3e} (<= 5e-3), oscillation {:.5} (>= 0.0575), u(0,1/2) {mid:.5} (1/16 +- 5e-3), \
             floor - c {:.1e}, {} strobes, oracle error {:.3e}",
            r.period_defect,
            r.oscillation,
            r.floor - sol.c,
            sol.convergence.len(),
            case.oracle_error
        ),
    )
}

fn c4_periodic_torus(case: &PeriodicCase) -> Outcome {
    let r = &case.report;
    outcome(
        case.sol.converged && r.period_defect <= 1e-2 && case.oracle_error <= 1e-2,
        format!(
            "N=128^2: period_defect {:.3e} (<= 1e-2), oracle sup error {:.3e} (<= 1e-2), oscillation {:.5}",
            r.period_defect, case.oracle_error, r.oscillation
        ),
    )
}

fn c5_subsolution() -> Outcome {
    let q1 = QuadraticHamiltonian::new(1.0, &[1.0]).unwrap();
    let q2 = QuadraticHamiltonian::new(1.0, &[1.0, SQRT_2]).unwrap();
    let (e1, _) = compute_epsilon0(&q1, &[1.0], 0.0).unwrap();
    let (e2, _) = compute_epsilon0(&q2, &[1.0, SQRT_2], 0.0).unwrap();
    let want1 = 1.0 / (8.0 * PI * PI);
    let want2 = 1.0 / (32.0 * PI * PI);
    let eps_ok = (e1 - want1).abs() <= 1e-6 && (e2 - want2).abs() <= 1e-6;

    let x0 = TorusPoint::new(&[0.2]).unwrap();
    let p1 = SubsolutionParams::at_threshold(&q1, x0.clone()).unwrap();
    let p2 = SubsolutionParams::at_threshold(&q2, TorusPoint::new(&[0.2, 0.7]).unwrap()).unwrap();
    let r1 = subsolution_residual(&p1, &q1, &[1.0], 0.0, 10_000, 1).unwrap();
    let r2 = subsolution_residual(&p2, &q2, &[1.0, SQRT_2], 0.0, 10_000, 2).unwrap();

    // action function from x0 at level c against W^eps, nodewise
    let g = UniformGrid::new(1, 256).unwrap();
    let cfg = SolverConfig::default();
    let mut dominance: f64 = f64::INFINITY;
    for t in [0.25, 0.5, 1.0] {
        let a = action_function(&x0, 0.0, t, g, &q1, &cfg).unwrap();
        for i in 0..g.len() {
            let x = TorusPoint::new(&a.node_point(i)).unwrap();
            let w = W_epsilon(&p1, &[1.0], 0.0, &x, t).unwrap();
            dominance = dominance.min(a.values[i] - w);
        }
    }
    outcome(
        eps_ok && r1 <= 1e-8 && r2 <= 1e-8 && dominance >= -5e-3,
        format!(
            "eps0 {e1:.7} / {e2:.7} (1/(8 pi^2), 1/(32 pi^2) +- 1e-6), residual {r1:.2e} / {r2:.2e} (<= 1e-8), \
             min(h - W) {dominance:.2e} (>= -5e-3)"
        ),
    )
}

fn c6_semigroup() -> Outcome {
    let h = QuadraticHamiltonian::new(1.0, &[1.0]).unwrap();
    let cfg = SolverConfig::default();
    let g = UniformGrid::new(1, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mono = 0;
    for _ in 0..100 {
        let psi = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.0).unwrap();
        let phi = ScalarField::new(
            g,
            psi.values.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect(),
            0.0,
        )
        .unwrap();
        if monotonicity_check(&phi, &psi, 1.0, &h, &cfg).unwrap().pass {
            mono += 1;
        }
    }
    let phi = ScalarField::from_fn(g, 0.0, |x| 0.3 * (2.0 * PI * x[0]).sin());
    let psi = ScalarField::from_fn(g, 0.0, |x| 0.1 * (6.0 * PI * x[0]).cos());
    let exp = expansiveness_check(&phi, &psi, 1.0, &h, &cfg).unwrap();
    let kappa_is_lambda = h.kappa() == 1.0;
    let x0 = TorusPoint::new(&[0.4]).unwrap();
    let markov = markov_check(&x0, 0.0, 0.6, 0.9, UniformGrid::new(1, 128).unwrap(), &h, &cfg).unwrap();
    let h2 = QuadraticHamiltonian::new(1.0, &[1.0, SQRT_2]).unwrap();
    let g2 = UniformGrid::new(2, 32).unwrap();
    let a = ScalarField::from_fn(g2, 0.0, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
    let b = ScalarField::from_fn(g2, 0.0, |x| 0.5 - x[0] * x[1]);
    let inf = inf_commutation_defect(&a, &b, 1.0, &h2, &cfg).unwrap();
    let calib = calibration_defect(&x0, 2.0, UniformGrid::new(1, 256).unwrap(), &h, &cfg).unwrap();
    outcome(
        mono == 100 && exp.pass && kappa_is_lambda && markov <= 1e-12 && inf <= 1e-9 && calib <= 5e-3,
        format!(
            "monotone {mono}/100, expansiveness {:.4} <= {:.4} (kappa = lambda), markov {markov:.1e} (<= 1e-12), \
             inf-commutation {inf:.1e} (<= 1e-9), calibration {calib:.2e} (<= 5e-3)",
            exp.lhs, exp.rhs
        ),
    )
}

/// Fundamental-period report plus an independent check that every near-c node
/// is within `h` of the flowed S.
fn level_sets(case: &PeriodicCase, k: &[i64]) -> (bool, String) {
    let sol = &case.sol;
    let t = sol.period;
    let opts = PeriodicOptions::default();
    let fp = fundamental_period_check(sol, &[t / 4.0, t / 2.0, 3.0 * t / 4.0], opts.conv_tol).unwrap();
    let s = RationalHyperplaneSet::new(k).unwrap();
    let spacing = sol.grid().spacing();
    let tol = sol.level_tol(opts.conv_tol);
    let mut worst: f64 = 0.0;
    let mut nonempty = true;
    for tp in [t / 4.0, t / 2.0, 3.0 * t / 4.0] {
        let f = sol.field_at(tp);
        let mut count = 0;
        for i in 0..f.grid.len() {
            if f.values[i] <= sol.c + tol {
                count += 1;
                let x: Vec<f64> = f.node_point(i).iter().zip(&sol.omega).map(|(a, w)| a - w * tp).collect();
                worst = worst.max(distance_to_s(&s, &TorusPoint::new(&x).unwrap()).unwrap());
            }
        }
        nonempty &= count > 0;
    }
    let sep = fp.probes.iter().map(|p| p.separation).fold(f64::INFINITY, f64::min);
    (
        fp.pass && nonempty && worst <= spacing,
        format!("dist to flowed S {worst:.2e} (<= h = {spacing:.2e}), separation from t=0 {sep:.3}"),
    )
}

fn c7_level_sets(line: &PeriodicCase, torus: &PeriodicCase) -> Outcome {
    let (a, da) = level_sets(line, &[1]);
    let (b, db) = level_sets(torus, &[1, 1]);
    outcome(a && b, format!("T=1 line: {da}; T=sqrt2-1 torus: {db}"))
}

fn c8_almost_periodic() -> Outcome {
    let omega = [1.0, SQRT_2];
    let h = QuadraticHamiltonian::new(1.0, &omega).unwrap();
    let g = UniformGrid::new(2, 64).unwrap();
    let cfg = SolverConfig::default();
    let opts = PeriodicOptions::default();
    let w1 = iterate_Uk(&cert(&[1, 0, 1], 1.0), g, &h, &cfg, &opts).unwrap();
    let w2 = iterate_Uk(&cert(&[0, 1, 1], 1.0 / SQRT_2), g, &h, &cfg, &opts).unwrap();
    let ap = min_compose(&w1, &w2, &h, &cfg, &ComposeOptions::default()).unwrap();
    let probes: Vec<usize> = (0..ap.composed.len().saturating_sub(4)).step_by(3).collect();
    let prop = solution_property_check(&ap, &h, &cfg, &probes, 4).unwrap();
    let s100 = epsilon_periods(&ap, &EpsilonScan::new(0.05, 100.0)).unwrap();
    let s200 = epsilon_periods(&ap, &EpsilonScan::new(0.05, 200.0)).unwrap();
    let near70 = s100.near(70.0);
    let cands: Vec<f64> = s100.periods_found.iter().copied().filter(|t| *t > 0.0).collect();
    let np = non_periodicity_check(&ap, &cands, 0.0).unwrap();
    let bounded = s200.max_gap <= s100.max_gap * (1.0 + 1e-9);
    outcome(
        prop <= 1e-9 && near70.is_some() && bounded && np.pass && !cands.is_empty(),
        format!(
            "solution property {prop:.1e} (<= 1e-9), tau near 70: {near70:?} (cell {:.4}), max_gap {:.3} -> {:.3} \
             (tau_max 100 -> 200), {} candidates, min displacement {:.3e} (> 0)",
            s100.tau_step,
            s100.max_gap,
            s200.max_gap,
            cands.len(),
            np.min_displacement
        ),
    )
}

fn c9_period_arithmetic() -> Outcome {
    let w = [1.0, SQRT_2];
    let mut failures = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let k_of = |s: torus_hj::periods::PeriodSearch| s.certificate.map(|c| c.k);
    expect("D T=1", k_of(check_period_in_d(1.0, &w, 5, 1e-9).unwrap()) == Some(vec![1, 0, 1]));
    expect("D T=sqrt2", k_of(check_period_in_d(SQRT_2, &w, 5, 1e-9).unwrap()) == Some(vec![0, 1, 2]));
    expect("D T=sqrt2-1", k_of(check_period_in_d(SQRT_2 - 1.0, &w, 5, 1e-9).unwrap()) == Some(vec![1, 1, 1]));
    expect("D T=pi", check_period_in_d(PI, &w, 50, 1e-9).unwrap().certificate.is_none());
    expect("scriptD T=1", k_of(check_period_in_script_d(1.0, &w, 5, 1e-9).unwrap()) == Some(vec![1, 0, 1]));
    expect(
        "scriptD T=1/sqrt2",
        k_of(check_period_in_script_d(1.0 / SQRT_2, &w, 5, 1e-9).unwrap()) == Some(vec![0, 1, 1]),
    );
    expect("scriptD T=sqrt2", check_period_in_script_d(SQRT_2, &w, 50, 1e-9).unwrap().certificate.is_none());
    let one: Vec<f64> = enumerate_periods(&[1.0], 2).unwrap().into_iter().map(|p| p.0).collect();
    expect("enumerate n=1", one == vec![0.5, 1.0, 2.0]);
    let two: Vec<f64> = enumerate_periods(&w, 1).unwrap().into_iter().map(|p| p.0).collect();
    for t in [1.0, 1.0 / SQRT_2, 1.0 / (1.0 + SQRT_2), 1.0 / (SQRT_2 - 1.0)] {
        expect("enumerate n=2", two.iter().any(|x| (x - t).abs() <= 1e-12 * t));
    }
    expect("independent (1,sqrt2)", rationally_independent(&w, 50, 1e-9).independent);
    let dep = rationally_independent(&[1.0, 2.0], 50, 1e-9);
    expect(
        "dependent (1,2)",
        !dep.independent && matches!(dep.witness.as_deref(), Some([2, -1]) | Some([-2, 1])),
    );
    expect("independent (3)", rationally_independent(&[3.0], 50, 1e-9).independent);
    let d = |k: &[i64], x: &[f64]| {
        distance_to_s(&RationalHyperplaneSet::new(k).unwrap(), &TorusPoint::new(x).unwrap()).unwrap()
    };
    expect("distance (1,0) on S", d(&[1, 0], &[0.0, 0.7]) == 0.0);
    expect("distance (1,0) half", (d(&[1, 0], &[0.5, 0.2]) - 0.5).abs() < 1e-15);
    expect("distance (1,1)", (d(&[1, 1], &[0.25, 0.5]) - 0.25 / SQRT_2).abs() < 1e-12);

    // largest hole in the enumerated periods over [0.1, 10]
    let gap = |height: i64| {
        let mut ts: Vec<f64> = enumerate_periods(&w, height)
            .unwrap()
            .into_iter()
            .map(|p| p.0)
            .filter(|t| (0.1..=10.0).contains(t))
            .collect();
        ts.insert(0, 0.1);
        ts.push(10.0);
        ts.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
    };
    let gaps: Vec<f64> = (1..=8).map(gap).collect();
    let monotone = gaps.windows(2).all(|p| p[1] <= p[0]) && gaps[7] < gaps[0];
    expect("density gaps shrink", monotone);
    outcome(
        failures.is_empty(),
        format!(
            "certificate/enumeration/independence/distance examples, failures {failures:?}; \
             max gap by height 1..8: {}",
            gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn c10_divergence() -> Outcome {
    let hs: Vec<Box<dyn ContactHamiltonian>> = vec![
        Box::new(QuadraticHamiltonian::new(1.0, &[1.0]).unwrap()),
        Box::new(TonelliSine::new(1.0, 0.5, 0.3, &[1.0]).unwrap()),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for h in &hs {
        let c = torus_hj::hamiltonian::EquilibriumData::of(h.as_ref()).unwrap().c;
        let g = UniformGrid::new(1, 32).unwrap();
        let t_max = 20.0 / h.delta();
        let cfg = SolverConfig::default();
        let lo = long_time_limit(&ScalarField::constant(g, c - 0.1, 0.0), h.as_ref(), &cfg, t_max, 0.0).unwrap();
        let hi = long_time_limit(&ScalarField::constant(g, c + 0.1, 0.0), h.as_ref(), &cfg, t_max, 0.0).unwrap();
        ok &= lo.classification == Classification::DivergingMinusInfinity
            && hi.classification == Classification::DivergingPlusInfinity
            && lo.t_reached <= t_max + 1e-9
            && hi.t_reached <= t_max + 1e-9;
        detail.push(format!(
            "{}: c-0.1 -> {:?} at t {:.1}, c+0.1 -> {:?} at t {:.1} (t_max {t_max})",
            h.name(),
            lo.classification,
            lo.t_reached,
            hi.classification,
            hi.t_reached
        ));
    }
    outcome(ok, detail.join("; "))
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {id:>2} {name}: {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };

    record(1, "oracle equivalence", &mut c1_oracle_equivalence);
    record(2, "equilibrium preservation", &mut c2_equilibrium);
    let start = Instant::now();
    let line = periodic_case(&[1.0], &[1, 1], 1.0, 256);
    let line_secs = start.elapsed().as_secs_f64();
    record(3, "periodic solution on the circle", &mut || {
        let mut o = c3_periodic_line(&line);
        o.detail.push_str(&format!(", construction {line_secs:.1} s"));
        o
    });
    let start = Instant::now();
    let torus = periodic_case(&[1.0, SQRT_2], &[1, 1, 1], SQRT_2 - 1.0, 128);
    let torus_secs = start.elapsed().as_secs_f64();
    record(4, "periodic solution on the 2-torus", &mut || {
        let mut o = c4_periodic_torus(&torus);
        o.detail.push_str(&format!(", construction {torus_secs:.1} s"));
        o
    });
    record(5, "subsolution threshold", &mut c5_subsolution);
    record(6, "semigroup properties", &mut c6_semigroup);
    record(7, "level-set structure", &mut || c7_level_sets(&line, &torus));
    record(8, "almost-periodic composition", &mut c8_almost_periodic);
    record(9, "period arithmetic", &mut c9_period_arithmetic);
    record(10, "divergence dichotomy", &mut c10_divergence);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
