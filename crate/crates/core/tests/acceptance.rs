//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use carnot_core::characteristics::integrate_span;
use carnot_core::fields::{EngelDirection, EngelField, ProjectedField, ProjectedFieldF, ProjectedFieldG};
use carnot_core::free::complete_matrix_m;
use carnot_core::graphs::{lift_graph, slice_field, translate_graph, Affine};
use carnot_core::scenarios::{builtin, Geometry, Scenario};
use carnot_core::verify::{
    broad_star_check, dafermos_identity, dimensional_reduction_check, holder_modulus, lipschitz_check,
    structural_exactness_check, translation_invariance_check, weak_pairing, weak_residual_engel, weak_residual_f,
    BumpTest, FForm, GForm, PulledBack, VerificationReport,
};
use carnot_core::{integrate, project_curve, BoxDomain, GroupPoint, ScalarField, StepTwoAlgebra};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240607;

type Outcome = (bool, String);

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ salt)
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn random_q(r: &mut ChaCha8Rng, a: &StepTwoAlgebra, radius: f64) -> GroupPoint {
    let c: Vec<f64> = (0..a.dim()).map(|_| r.random_range(-radius..=radius)).collect();
    GroupPoint::from_coords(a.rank(), &c)
}

fn group(s: &Scenario) -> StepTwoAlgebra {
    match &s.geometry {
        Geometry::Group(a) => a.clone(),
        Geometry::Free { m } => StepTwoAlgebra::free(*m).unwrap(),
        Geometry::Engel => panic!("the Engel group is not step 2"),
    }
}

fn engel_distributional() -> Outcome {
    let s = builtin("engel-counterexample").unwrap();
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let xi = BumpTest::random(&mut r, s.domain(), 0.2, 0.6, 4).unwrap();
        worst = worst.max(weak_residual_engel(&s.phi, s.omega(1).unwrap(), &xi, 128).unwrap().abs());
    }
    let secs = start.elapsed().as_secs_f64();
    (worst <= 1e-4 && secs <= 60.0, format!("max |residual| = {} over 50 bumps at 128^3, {secs:.1} s", sci(worst)))
}

fn engel_holder_failure() -> Outcome {
    let s = builtin("engel-counterexample").unwrap();
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let scan = holder_modulus(&s.phi, &[2], 1.0 / 3.0, &radii, &s.probe_points(20, SEED)).unwrap();
    let report = scan.report_failure(0.9);
    (report.pass, format!("M(r) = {:?}", scan.moduli.iter().map(|m| sci(*m)).collect::<Vec<_>>()))
}

fn vertical_holder() -> Outcome {
    let domain = BoxDomain::cube(2, 1.0);
    let cases = [
        ("x2", builtin("heisenberg1").unwrap().phi),
        ("x2 + y", builtin("heisenberg1-vertical").unwrap().phi),
        ("y / (2 + x2)", ScalarField::closed(domain, |w| w[1] / (2.0 + w[0]))),
    ];
    let a = StepTwoAlgebra::heisenberg();
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let bases = builtin("heisenberg1").unwrap().base_points(20, SEED);
    let mut r = rng(3);
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, phi) in cases {
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..20 {
            let q = random_q(&mut r, &a, 0.25);
            let phi_q = translate_graph(&a, &phi, &q).unwrap();
            let scan = holder_modulus(&phi_q, &[1], 0.5, &radii, &bases).unwrap();
            let rep = scan.report_vanishing(0.5, 0.1);
            pass &= rep.pass;
            for (m, rad) in scan.moduli.iter().zip(&radii) {
                worst_ratio = worst_ratio.max(m / rad.sqrt());
            }
        }
        detail.push(format!("{name}: max M(r)/r^1/2 = {}", sci(worst_ratio)));
    }
    (pass, detail.join("; "))
}

fn curve_sets() -> Vec<(Scenario, usize, Vec<carnot_core::Characteristic>)> {
    let mut out = Vec::new();
    for id in ["heisenberg1", "intro5d", "free3"] {
        let s = builtin(id).unwrap();
        for j in s.geometry.generators() {
            let curves = s.curves(j, 100, SEED, s.step).unwrap();
            out.push((s.clone(), j, curves));
        }
    }
    out
}

fn broad_star() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (s, j, curves) in curve_sets() {
        let tol = 1e-6 + 10.0 * s.step.powi(4);
        let rep = broad_star_check(&s.phi, s.omega(j).unwrap(), &curves, tol).unwrap();
        pass &= rep.pass;
        detail.push(format!("{} j={}: {}", s.id, j + 1, sci(rep.max_deviation())));
    }
    (pass, format!("max |Δ| {}", detail.join(", ")))
}

fn lipschitz() -> Outcome {
    let mut pass = true;
    let mut total = 0;
    for (s, j, curves) in curve_sets() {
        let rep = lipschitz_check(&s.phi, s.omega(j).unwrap(), &curves, 1.01).unwrap();
        pass &= rep.pass;
        total += rep.params["violations"].as_u64().unwrap();
    }
    (pass && total == 0, format!("{total} violations over 500 curves"))
}

fn structure() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for id in ["heisenberg1", "heisenberg1-vertical", "intro5d", "free3"] {
        let s = builtin(id).unwrap();
        parts.push(structural_exactness_check(&group(&s), &s.phi, 1000, SEED, 0.25, 0.5, 1e-10).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let rep = VerificationReport::merge("structure", 1e-10, parts);
    (rep.pass && secs <= 10.0, format!("max deviation {}, {secs:.2} s", sci(rep.max_deviation())))
}

/// Translation identity for one scenario at `n` cells per axis.
fn translation_for(id: &str, n: usize, count: usize) -> VerificationReport {
    let s = builtin(id).unwrap();
    let a = group(&s);
    let d = s.dim();
    let xi = BumpTest::new(vec![0.0; d], vec![0.4; d], 6).unwrap();
    let mut r = rng(7);
    let parts = (0..count)
        .map(|_| {
            let q = random_q(&mut r, &a, 0.2);
            translation_invariance_check(&a, &s.phi, s.omega(1).unwrap(), 1, &q, &xi, n, 1e-6).unwrap().1
        })
        .collect();
    VerificationReport::merge("translation", 1e-6, parts)
}

fn translation() -> Outcome {
    let h = translation_for("heisenberg1", 256, 10);
    let i = translation_for("intro5d", 40, 10);
    (
        h.pass && i.pass,
        format!(
            "heisenberg1 at 256^2: {}; intro5d at 40^4: {} (256^4 run is the ignored full-resolution test)",
            sci(h.max_deviation()),
            sci(i.max_deviation())
        ),
    )
}

fn reduction() -> Outcome {
    let s = builtin("free3").unwrap();
    let zero5 = ScalarField::constant(s.domain().clone(), 0.0);
    let form = FForm::new(3, &s.phi, &zero5, 1).unwrap();
    // x2 is slot 0 and y21 slot 2.
    let axes = [0, 2];
    let z0 = vec![0.0; 5];
    let xi_hat = BumpTest::new(vec![0.0, 0.0], vec![0.5, 0.5], 4).unwrap();
    let n_reduced = 48;
    let psi_hat = slice_field(&s.phi, &axes, &z0).unwrap();
    let zero2 = ScalarField::constant(psi_hat.domain().clone(), 0.0);
    let reduced_form = FForm::new(2, &psi_hat, &zero2, 1).unwrap();
    let reduced = weak_pairing(&reduced_form, &xi_hat, &xi_hat.quadrature(n_reduced)).unwrap().residual();
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let rep = dimensional_reduction_check(&form, &xi_hat, &axes, &z0, &eps, reduced, n_reduced, 8, 0.2).unwrap();
    let slope = rep.params["slope"].as_f64().unwrap();
    (
        rep.pass && (0.8..=1.2).contains(&slope),
        format!("slope {slope:.4}, deviations {:?}", rep.values.iter().map(|v| sci(*v)).collect::<Vec<_>>()),
    )
}

fn dafermos() -> Outcome {
    let plane = BoxDomain::cube(2, 1.0);
    let cases = [
        ("psi = t", ScalarField::closed(plane.clone(), |w| w[0]), ScalarField::constant(plane.clone(), 1.0)),
        (
            "psi = t - x",
            ScalarField::closed(plane.clone(), |w| w[0] - w[1]),
            ScalarField::closed(plane.clone(), |w| 1.0 + w[0] - w[1]),
        ),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, psi, omega) in cases {
        let field = ProjectedFieldF::new(2, psi.clone(), 1).unwrap();
        let curve = integrate(&field, &[0.0, 0.0], 0.25, 0.25 / 512.0).unwrap();
        for eps in [0.05, 0.1] {
            let (t, rep) = dafermos_identity(&psi, &omega, &curve, eps, 512, 1e-5).unwrap();
            pass &= rep.pass;
            detail.push(format!("{name}, eps {eps}: L = {}, R = {}", sci(t.lhs), sci(t.rhs)));
        }
    }
    (pass, detail.join("; "))
}

fn lift_project() -> Outcome {
    let s = builtin("intro5d").unwrap();
    let a = StepTwoAlgebra::intro5d();
    let free_box = BoxDomain::cube(5, 2.0);
    let psi = lift_graph(&a, &s.phi, free_box.clone()).unwrap();
    let mmat = complete_matrix_m(&a).unwrap();
    let det = mmat.determinant().abs();
    let map = Affine::linear(mmat);
    let n = 16;
    let mut r = rng(10);
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_unmatched: f64 = 0.0;
    let mut smallest_g = f64::INFINITY;
    for j in [1, 2] {
        let omega = s.omega(j).unwrap();
        let omega_f = lift_graph(&a, omega, free_box.clone()).unwrap();
        let g_form = GForm::new(&a, &s.phi, omega, j).unwrap();
        let f_form = FForm::new(3, &psi, &omega_f, j).unwrap();
        for _ in 0..5 {
            let g_bump = BumpTest::random(&mut r, &BoxDomain::cube(4, 0.9), 0.3, 0.5, 3).unwrap();
            let eta = BumpTest::new(vec![0.0], vec![0.5], 3).unwrap();
            let mut center = g_bump.center.clone();
            center.push(0.0);
            let mut radii = g_bump.radii.clone();
            radii.push(0.5);
            let z_bump = BumpTest::new(center, radii, 3).unwrap().with_amplitude(det / eta.integral());
            let lifted = PulledBack::new(z_bump.clone(), map.clone()).unwrap();
            let res_f = weak_pairing(&f_form, &lifted, &lifted.matched_quadrature(z_bump.quadrature(n))).unwrap().residual();
            let res_g = weak_pairing(&g_form, &g_bump, &g_bump.quadrature(n)).unwrap().residual();
            smallest_g = smallest_g.min(res_g.abs());
            let ratio = res_f.abs() / res_g.abs();
            worst_ratio = worst_ratio.max(ratio);
            pass &= ratio <= 2.0;
        }
        let xi = BumpTest::random(&mut r, &BoxDomain::cube(5, 0.9), 0.3, 0.4, 6).unwrap();
        let res = weak_residual_f(3, &psi, &omega_f, j, &xi, 20).unwrap();
        worst_unmatched = worst_unmatched.max(res.abs());
        pass &= res.abs() <= 1e-6;
    }

    let h = s.step;
    let mut worst_defect: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    let bases = {
        let mut r = rng(11);
        (0..20).map(|_| (0..5).map(|_| r.random_range(-0.2..=0.2)).collect::<Vec<f64>>()).collect::<Vec<_>>()
    };
    for j in [1, 2] {
        let f_field = ProjectedFieldF::new(3, psi.clone(), j).unwrap();
        let g_field = ProjectedFieldG::new(a.clone(), s.phi.clone(), j).unwrap();
        for b in &bases {
            let gamma = project_curve(&a, &integrate(&f_field, b, s.horizon, h).unwrap()).unwrap();
            for k in 0..gamma.len() - 1 {
                let (from, to, dt) = if k >= gamma.origin {
                    (k, k + 1, gamma.times[k + 1] - gamma.times[k])
                } else {
                    (k + 1, k, gamma.times[k] - gamma.times[k + 1])
                };
                let (back, fwd) = if dt > 0.0 { (0.0, dt) } else { (-dt, 0.0) };
                let step = integrate_span(&g_field, &gamma.states[from], back, fwd, dt.abs()).unwrap();
                let landed = if dt > 0.0 { step.states.last() } else { step.states.first() }.unwrap();
                let defect = landed.iter().zip(&gamma.states[to]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                worst_defect = worst_defect.max(defect);
            }
            let direct = integrate(&g_field, &gamma.base, s.horizon, h).unwrap();
            for (p, q) in direct.states.iter().zip(&gamma.states) {
                worst_direct = worst_direct.max(p.iter().zip(q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            }
        }
    }
    let bound = 10.0 * h.powi(4);
    pass &= worst_defect <= bound && worst_direct <= bound;
    (
        pass,
        format!(
            "max |res_F|/|res_G| = {worst_ratio:.3} (|res_G| >= {}), unmatched res_F {}, ODE defect {} and direct gap {} vs {}",
            sci(smallest_g),
            sci(worst_unmatched),
            sci(worst_defect),
            sci(worst_direct),
            sci(bound)
        ),
    )
}

fn terminal_error(field: &dyn ProjectedField, a: &[f64], t_end: f64, n: usize, exact: &[f64]) -> f64 {
    let c = integrate_span(field, a, 0.0, t_end, t_end / n as f64).unwrap();
    let last = c.states.last().unwrap();
    last.iter().zip(exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn solver_order() -> Outcome {
    let levels = [128usize, 256, 512];
    let mut pass = true;
    let mut detail = Vec::new();
    let mut judge = |name: &str, errs: Vec<f64>, scale: f64| {
        let floor = 64.0 * f64::EPSILON * scale;
        let ok = errs.windows(2).all(|w| w[1] <= floor || w[0] >= 12.0 * w[1]);
        pass &= ok;
        detail.push(format!("{name}: {:?}", errs.iter().map(|e| sci(*e)).collect::<Vec<_>>()));
    };

    let heis = builtin("heisenberg1").unwrap();
    let f = ProjectedFieldG::new(StepTwoAlgebra::heisenberg(), heis.phi.clone(), 1).unwrap();
    let t = 0.5;
    let errs = levels.iter().map(|n| terminal_error(&f, &[0.0, 0.0], t, *n, &[t, t * t / 2.0])).collect();
    judge("heisenberg y = t^2/2", errs, 1.0);

    let phi = ScalarField::closed(BoxDomain::cube(2, 10.0), |w| w[0] + w[1]);
    let f = ProjectedFieldG::new(StepTwoAlgebra::heisenberg(), phi, 1).unwrap();
    let t: f64 = 2.0;
    let exact = [t, t.exp() - 1.0 - t];
    let errs = levels.iter().map(|n| terminal_error(&f, &[0.0, 0.0], t, *n, &exact)).collect();
    judge("heisenberg y = e^t - 1 - t", errs, 10.0);

    let wide = BoxDomain::new(vec![-1.0; 3], vec![20.0; 3]).unwrap();
    let phi = ScalarField::closed(wide, |w| w[2].cbrt());
    let f = EngelField::new(phi, EngelDirection::X2).unwrap();
    let t = 8.0;
    let s = 1.0 + t / 6.0;
    let exact = [t, 6.0 * (s * s - 1.0) / 2.0, s * s * s];
    let errs = levels.iter().map(|n| terminal_error(&f, &[0.0, 0.0, 1.0], t, *n, &exact)).collect();
    judge("engel x4 = (1 + t/6)^3", errs, 20.0);
    (pass, detail.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("engel distributional identity", engel_distributional),
        ("engel little-Hölder failure", engel_holder_failure),
        ("vertical 1/2-little-Hölder", vertical_holder),
        ("broad* along characteristics", broad_star),
        ("Lipschitz along characteristics", lipschitz),
        ("structural exactness", structure),
        ("translation invariance", translation),
        ("dimensional reduction", reduction),
        ("Dafermos identity", dafermos),
        ("lift/project round trip", lift_project),
        ("solver order", solver_order),
    ];
    let only: Vec<usize> = std::env::var("CARNOT_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {} ({detail}) [{:.1} s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
