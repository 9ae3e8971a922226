//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line (run with
//! `--nocapture` to see them) and asserts the criterion including its
//! runtime budget.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rinewton_core::fields::{problem_by_name, FdScheme, ProblemParams, PROBLEM_NAMES};
use rinewton_core::harness::{
    check_linearization_error, check_majorant_condition, check_operator_bound, check_qfactor, check_region,
    check_step_bound, estimate_order, rate_margins, CheckReport, Setup, TauGrid,
};
use rinewton_core::linalg::spectral_norm;
use rinewton_core::majorant::MajorantKind;
use rinewton_core::solver::{iterate, SolverConfig, StepStrategy};
use rinewton_core::{Geometry, Majorant, Point, RadiusQuery, Tangent};

const SAMPLES: usize = 500;
const ORDER_RANGE: (f64, f64) = (1.9, 2.1);
const FINAL_FIELD_NORM: f64 = 1e-12;

fn report(id: u32, title: &str, failures: &[String], started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    let mut failures = failures.to_vec();
    if elapsed > budget {
        failures.push(format!("runtime {:.2}s exceeds {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()));
    }
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("[{status}] criterion {id}: {title} ({:.2}s){}", elapsed.as_secs_f64(), if failures.is_empty() {
        String::new()
    } else {
        format!(" -- {}", failures.join("; "))
    });
    assert!(failures.is_empty(), "criterion {id} failed: {failures:#?}");
}

fn setup(name: &str, vartheta: f64) -> Setup {
    let pr = problem_by_name(name, &ProblemParams::default()).unwrap();
    let f = Majorant::from_hint(pr.hint().unwrap()).unwrap();
    Setup::new(pr, f, vartheta).unwrap()
}

fn quarter(f: &Majorant) -> Majorant {
    match *f.kind() {
        MajorantKind::Holder { l, mu } => Majorant::holder(l / 4.0, mu).unwrap(),
        MajorantKind::Smale { gamma } => Majorant::smale(gamma / 4.0).unwrap(),
        MajorantKind::Generic(_) => unreachable!(),
    }
}

fn expect_pass(rep: &CheckReport, ctx: &str, failures: &mut Vec<String>) {
    if !rep.passed() {
        failures.push(format!("{ctx}: {} failed, witness {}", rep.name, rep.witness.clone().unwrap_or_default()));
    }
}

fn close(failures: &mut Vec<String>, label: &str, got: f64, want: f64, tol: f64) {
    if !((got - want).abs() <= tol) {
        failures.push(format!("{label} = {got:.17} expected {want:.17} within {tol:e}"));
    }
}

#[test]
fn criterion_1_radii_reproduction() {
    let t = Instant::now();
    let mut fails = Vec::new();
    let q = RadiusQuery::new(0.0, 1.0, 1e12, 1e12);
    let smale = Majorant::smale(1.0).unwrap();
    let holder = Majorant::holder(1.0, 1.0).unwrap();
    let s = smale.convergence_radius(&q).unwrap();
    let h = holder.convergence_radius(&q).unwrap();
    let rho_s = (5.0 - 17f64.sqrt()) / 4.0;
    let nu_s = (2f64.sqrt() - 1.0) / 2f64.sqrt();
    close(&mut fails, "smale rho", s.rho, rho_s, 1e-10);
    close(&mut fails, "smale nu", s.nu, nu_s, 1e-12);
    if s.sigma != 0.5 {
        fails.push(format!("smale sigma = {} is not exactly 0.5", s.sigma));
    }
    close(&mut fails, "holder rho", h.rho, 2.0 / 3.0, 1e-12);
    close(&mut fails, "holder nu", h.nu, 1.0, 1e-12);
    close(&mut fails, "holder sigma", h.sigma, 2.0, 1e-12);
    let gs = smale.as_generic().convergence_radius(&q).unwrap();
    let gh = holder.as_generic().convergence_radius(&q).unwrap();
    for (label, got, want) in [
        ("bisection smale rho", gs.rho, rho_s),
        ("bisection smale nu", gs.nu, nu_s),
        ("bisection smale sigma", gs.sigma, 0.5),
        ("bisection holder rho", gh.rho, 2.0 / 3.0),
        ("bisection holder nu", gh.nu, 1.0),
        ("bisection holder sigma", gh.sigma, 2.0),
    ] {
        close(&mut fails, label, got, want, 1e-8);
    }
    report(1, "radii reproduction", &fails, t, Duration::from_secs(1));
}

#[test]
fn criterion_2_majorant_condition_certification() {
    let t = Instant::now();
    let mut fails = Vec::new();
    let pr = problem_by_name("exp-minus-one", &ProblemParams::default()).unwrap();
    let f = Majorant::smale(0.5).unwrap();
    let s = Setup::new(pr, f, 0.0).unwrap();
    let taus = TauGrid { uniform: 21, random: 9 };
    let rep = check_majorant_condition(&s.problem, &s.majorant, 0.9 * s.r(), SAMPLES, taus, 2).unwrap();
    expect_pass(&rep, "exp-minus-one", &mut fails);
    if rep.checked != SAMPLES {
        fails.push(format!("only {} of {SAMPLES} samples checked", rep.checked));
    }
    if !(rep.worst_margin.unwrap_or(-1.0) >= 0.0) {
        fails.push(format!("worst margin {:?}", rep.worst_margin));
    }
    report(2, "majorant-condition certification", &fails, t, Duration::from_secs(10));
}

#[test]
fn criterion_3_lemma_suite_and_mutations() {
    let t = Instant::now();
    let mut fails = Vec::new();
    for name in ["exp-minus-one", "x-minus-x-squared", "rayleigh-3d"] {
        let s = setup(name, 0.0);
        let f = &s.majorant;
        let wide = s.query.kappa.min(f.radius_nu()).min(s.query.r_inj * 0.999);
        if name == "rayleigh-3d" {
            let cert = check_majorant_condition(&s.problem, f, s.r(), SAMPLES, TauGrid::default(), 3).unwrap();
            expect_pass(&cert, "rayleigh hint certification", &mut fails);
        }
        for rep in [
            check_operator_bound(&s.problem, f, wide, SAMPLES, 3).unwrap(),
            check_step_bound(&s.problem, f, s.r(), SAMPLES, 3).unwrap(),
            check_linearization_error(&s.problem, f, wide, SAMPLES, 3).unwrap(),
        ] {
            expect_pass(&rep, name, &mut fails);
        }
        let weak = Setup::new(s.problem.clone(), quarter(f), 0.0).unwrap();
        let (g, r) = (&weak.majorant, weak.r());
        for rep in [
            check_majorant_condition(&s.problem, g, r, SAMPLES, TauGrid::default(), 4).unwrap(),
            check_operator_bound(&s.problem, g, r, SAMPLES, 4).unwrap(),
            check_step_bound(&s.problem, g, r, SAMPLES, 4).unwrap(),
            check_linearization_error(&s.problem, g, r, SAMPLES, 4).unwrap(),
        ] {
            if rep.passed() {
                fails.push(format!("{name}: {} passed under the 4x mutation", rep.name));
            }
        }
    }
    report(3, "lemma suite with mutation tests", &fails, t, Duration::from_secs(60));
}

#[test]
fn criterion_4_q_linear_bound() {
    let t = Instant::now();
    let mut fails = Vec::new();
    let s = setup("rayleigh-3d", 0.5);
    let g = s.problem.geometry();
    let h3 = s.majorant.check_h_conditions().h3.pass;
    if !h3 {
        fails.push("h3 expected for a Lipschitz majorant".into());
    }
    for (i, frac) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let p0 = g.sample_at_distance(s.singularity(), frac * s.r(), 40 + i as u64).unwrap();
        let d0 = g.distance(s.singularity(), &p0).unwrap();
        let theta = s.theta_max(d0).unwrap();
        let cfg = SolverConfig::new(theta, StepStrategy::Adversarial { seed: 17 }).unwrap();
        let tr = iterate(&s.problem, &p0, &cfg);
        if !tr.converged() || tr.final_field_norm() > FINAL_FIELD_NORM || tr.steps() > 100 {
            fails.push(format!("start {frac}r: {:?} after {} steps, |X| = {:e}", tr.termination, tr.steps(), tr.final_field_norm()));
        }
        let m = rate_margins(&tr, &s.majorant, s.vartheta, s.k(), h3).unwrap();
        for (label, samples) in [("per-step", &m.per_step), ("linear", &m.linear)] {
            if let Some(w) = samples.iter().find(|w| w.margin < 0.0) {
                fails.push(format!("start {frac}r: {label} bound violated at {}", w.witness));
            }
        }
        if m.per_step.is_empty() || m.skipped > 0 {
            fails.push(format!("start {frac}r: {} bound evaluations, {} skipped", m.per_step.len(), m.skipped));
        }
        let rep = check_qfactor(&[&tr], &s.majorant, s.vartheta, s.k()).unwrap();
        expect_pass(&rep, &format!("start {frac}r"), &mut fails);
    }
    report(4, "Q-linear bound under adversarial steps at theta_max", &fails, t, Duration::from_secs(60));
}

#[test]
fn criterion_5_quadratic_limit() {
    let t = Instant::now();
    let mut fails = Vec::new();
    for name in ["exp-minus-one", "rayleigh-3d"] {
        let s = setup(name, 0.0);
        let g = s.problem.geometry();
        let p0 = g.sample_at_distance(s.singularity(), 0.5 * s.r(), 5).unwrap();
        let d0 = g.distance(s.singularity(), &p0).unwrap();
        if s.theta_max(d0).unwrap() != 0.0 {
            fails.push(format!("{name}: theta_max with vartheta = 0 is not zero"));
        }
        let tr = iterate(&s.problem, &p0, &SolverConfig::exact());
        let d = tr.distances();
        match estimate_order(&d) {
            Ok(order) if (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&order) => {}
            Ok(order) => fails.push(format!("{name}: order {order:.4} outside [1.9, 2.1], distances {d:?}")),
            Err(e) => fails.push(format!("{name}: {e}, distances {d:?}")),
        }
        let m = rate_margins(&tr, &s.majorant, 0.0, s.k(), true).unwrap();
        if let Some(w) = m.quadratic.iter().find(|w| w.margin < 0.0) {
            fails.push(format!("{name}: quadratic bound violated at {}", w.witness));
        }
    }
    report(5, "quadratic limit with theta = 0", &fails, t, Duration::from_secs(30));
}

#[test]
fn criterion_6_smale_tolerance_specialization() {
    let t = Instant::now();
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    for gamma in [0.1, 0.5, 1.0, 2.0, 7.5] {
        let f = Majorant::smale(gamma).unwrap();
        let nu = f.radius_nu();
        for i in 0..40 {
            let d0 = nu * i as f64 / 40.0;
            for vartheta in [0.0, 0.1, 0.25, 0.5, 0.9] {
                for cond in [1.0, 3.0] {
                    let general = f.theta_max(cond, vartheta, d0).unwrap();
                    let u = 1.0 - gamma * d0;
                    let closed = vartheta * (2.0 * u * u - 1.0) / cond;
                    worst = worst.max((general - closed).abs());
                }
            }
        }
    }
    if worst > 1e-12 {
        fails.push(format!("largest deviation {worst:e}"));
    }
    report(6, "Smale tolerance specialization", &fails, t, Duration::from_secs(1));
}

fn geometry_suite(g: &Geometry, p: &Point, spread_radius: f64, fails: &mut Vec<String>) {
    let label = format!("{:?}", g.kind());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let max_len = (g.injectivity_radius(p) - 0.1).min(3.0);
    let k = g.spreading_constant(p, spread_radius).unwrap();
    let mut bad = |what: &str, i: usize| fails.push(format!("{label}: {what} failed at sample {i}"));
    for i in 0..1000 {
        let q = g.sample_in_ball(p, 1.0, 5000 + i as u64).unwrap();
        let len = rng.random::<f64>() * max_len;
        let v: Tangent = g.random_unit_tangent(&q, &mut rng).unwrap().scaled(len);
        let e = g.exp(&q, &v).unwrap();
        let back = g.log(&q, &e).unwrap();
        if g.norm(&back.sub(&v).unwrap()).unwrap() > 1e-9 * (1.0 + len) {
            bad("exp/log round-trip", i);
        }
        if (g.distance(&q, &e).unwrap() - len).abs() > 1e-9 {
            bad("distance consistency", i);
        }
        let u = g.random_unit_tangent(&q, &mut rng).unwrap().scaled(rng.random::<f64>() * 2.0);
        let (pu, pv) = (g.transport(&q, &e, &u).unwrap(), g.transport(&q, &e, &v).unwrap());
        let nu = g.norm(&u).unwrap();
        if (g.norm(&pu).unwrap() - nu).abs() > 1e-10 * nu {
            bad("transport isometry", i);
        }
        let round = g.transport(&e, &q, &pu).unwrap();
        if g.norm(&round.sub(&u).unwrap()).unwrap() > 1e-9 * nu {
            bad("transport inversion", i);
        }
        let ip = (g.inner(&pu, &pv).unwrap() - g.inner(&u, &v).unwrap()).abs();
        if ip > 1e-9 * nu * len.max(1e-300) && len > 0.0 {
            bad("transport inner products", i);
        }
        let c = g.sample_in_ball(p, spread_radius, 9000 + i as u64).unwrap();
        let a = g.random_unit_tangent(&c, &mut rng).unwrap().scaled(rng.random::<f64>() * spread_radius);
        let w = g.random_unit_tangent(&c, &mut rng).unwrap().scaled(rng.random::<f64>() * spread_radius);
        let b = a.add(&w).unwrap();
        let lhs = g.distance(&g.exp(&c, &a).unwrap(), &g.exp(&c, &b).unwrap()).unwrap();
        if lhs > k * g.norm(&w).unwrap() + 1e-9 {
            bad("spreading bound", i);
        }
    }
}

#[test]
fn criterion_7_geometry_suite() {
    let t = Instant::now();
    let mut fails = Vec::new();
    let e = Geometry::euclidean(3);
    geometry_suite(&e, &e.point_from_slice(&[0.3, -1.0, 2.0]).unwrap(), 1.0, &mut fails);
    let s = Geometry::sphere(3);
    geometry_suite(&s, &s.point_from_slice(&[0.0, 0.6, 0.8]).unwrap(), 1.0, &mut fails);
    let m = Geometry::spd(2);
    geometry_suite(&m, &m.point_from_slice(&[2.0, 0.3, 0.3, 0.7]).unwrap(), 0.5, &mut fails);

    for name in PROBLEM_NAMES {
        let pr = problem_by_name(name, &ProblemParams::default()).unwrap();
        let g = pr.geometry();
        let radius = pr.domain_radius().min(1.0) * 0.9;
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let p = g.sample_in_ball(pr.singularity().unwrap(), radius, 300 + i).unwrap();
            let exact = pr.covariant_derivative(&p).unwrap();
            let fd = pr.fd_derivative(&p, 1e-6, FdScheme::Central).unwrap();
            worst = worst.max(spectral_norm(&(fd.matrix() - exact.matrix())) / exact.norm());
        }
        if worst > 1e-5 {
            fails.push(format!("{name}: fd relative error {worst:e}"));
        }
    }
    fails.dedup();
    report(7, "geometry suite on R^n, S^2 and SPD(2)", &fails, t, Duration::from_secs(30));
}

#[test]
fn criterion_8_convergence_region() {
    let t = Instant::now();
    let mut fails = Vec::new();
    for name in PROBLEM_NAMES {
        let s = setup(name, 0.0);
        let rep = check_region(&s.problem, 0.99 * s.r(), 200, Some(1.5 * s.r()), 8).unwrap();
        expect_pass(&rep, name, &mut fails);
        println!("    {name}: r = {:.6e}; {}", s.r(), rep.note.unwrap_or_default());
    }
    report(8, "convergence-region probe", &fails, t, Duration::from_secs(60));
}
