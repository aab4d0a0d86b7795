//! One verification run: a check applied to a scenario.

use std::fmt::Write;

use carnot_core::characteristics::integrate_span;
use carnot_core::fields::{ProjectedFieldF, ProjectedFieldG};
use carnot_core::free::{complete_matrix_m, PairIndex};
use carnot_core::graphs::{lift_graph, slice_field, Affine};
use carnot_core::scenarios::{Geometry, Scenario};
use carnot_core::verify::{
    broad_star_check, dafermos_identity, dimensional_reduction_check, holder_modulus, lipschitz_check,
    translation_invariance_check, weak_pairing, BumpTest, FForm, GForm, PulledBack, Quadrature, TestFunction, VerificationReport,
};
use carnot_core::{integrate, project_curve, BoxDomain, Characteristic, GroupPoint, ScalarField, StepTwoAlgebra};
use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::svg::Plot;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Distributional,
    Broadstar,
    Lipschitz,
    Holder,
    Reduction,
    Dafermos,
    Translation,
    LiftProject,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Distributional => "distributional",
            Check::Broadstar => "broadstar",
            Check::Lipschitz => "lipschitz",
            Check::Holder => "holder",
            Check::Reduction => "reduction",
            Check::Dafermos => "dafermos",
            Check::Translation => "translation",
            Check::LiftProject => "lift-project",
        }
    }
}

/// Command-line overrides; `None` selects the per-check default.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub step: Option<f64>,
    pub seed: u64,
    pub alpha: Option<f64>,
}

pub struct Outcome {
    pub report: VerificationReport,
    pub csv: String,
    pub svg: String,
}

fn not_applicable(check: Check, s: &Scenario, why: &str) -> CliError {
    CliError::Usage(format!("check {} does not apply to {}: {why}", check.name(), s.id))
}

fn group_algebra(check: Check, s: &Scenario) -> Result<StepTwoAlgebra, CliError> {
    match &s.geometry {
        Geometry::Group(a) => Ok(a.clone()),
        _ => Err(not_applicable(check, s, "needs a step-2 group scenario")),
    }
}

/// Grid used when `--grid` is absent, by dimension of the quadrature.
fn default_grid(d: usize) -> usize {
    match d {
        0..=2 => 256,
        3 => 128,
        4 => 24,
        5 => 16,
        _ => 8,
    }
}

/// Refuses a check before doing any work when it cannot apply.
pub fn applicable(check: Check, s: &Scenario) -> Result<(), CliError> {
    match check {
        Check::Translation | Check::LiftProject => group_algebra(check, s).map(|_| ()),
        Check::Reduction => match s.geometry {
            Geometry::Free { m } if m >= 3 => Ok(()),
            _ => Err(not_applicable(check, s, "needs a free scenario of rank at least 3")),
        },
        Check::Dafermos => match &s.geometry {
            Geometry::Free { .. } => Ok(()),
            Geometry::Group(a) if a.rank() == 2 => Ok(()),
            _ => Err(not_applicable(check, s, "needs a free scenario or a rank-2 group")),
        },
        _ => Ok(()),
    }
}

pub fn run(check: Check, s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    applicable(check, s)?;
    let out = match check {
        Check::Distributional => distributional(s, o),
        Check::Broadstar => broadstar(s, o),
        Check::Lipschitz => lipschitz(s, o),
        Check::Holder => holder(s, o),
        Check::Reduction => reduction(s, o),
        Check::Dafermos => dafermos(s, o),
        Check::Translation => translation(s, o),
        Check::LiftProject => lift_project(s, o),
    }?;
    let mut report = out.report.scenario(&s.id).seed(o.seed);
    report.check = check.name().into();
    Ok(Outcome { report, ..out })
}

fn bump_for(rng: &mut ChaCha8Rng, domain: &BoxDomain, p: i32) -> carnot_core::Result<BumpTest> {
    let inner = domain.shrink(0.05 * (0..domain.dim()).map(|k| domain.width(k)).fold(f64::INFINITY, f64::min));
    let half = (0..inner.dim()).map(|k| inner.width(k)).fold(f64::INFINITY, f64::min) / 2.0;
    BumpTest::random(rng, &inner, 0.4 * half, 0.8 * half, p)
}

fn distributional(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let n = o.grid.unwrap_or_else(|| default_grid(s.dim()));
    let tol = o.tol.unwrap_or(match s.geometry {
        Geometry::Engel => 1e-4,
        _ => 1e-6,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut report = VerificationReport::new("distributional", tol).param("grid", n).param("bumps_per_generator", 10);
    let mut csv = String::from("generator,bump,residual\n");
    let mut refinement = Vec::new();
    for j in s.geometry.generators() {
        let form = s.weak_form(j)?;
        for b in 0..10 {
            let xi = bump_for(&mut rng, s.domain(), 6)?;
            let r = weak_pairing(form.as_ref(), &xi, &Quadrature::midpoint(&xi.support(), n))?.residual();
            let _ = writeln!(csv, "{},{b},{r:e}", j + 1);
            report.values.push(r);
            report.deviations.push(r.abs());
            if refinement.is_empty() {
                for k in [n / 4, n / 2, n] {
                    let rk = weak_pairing(form.as_ref(), &xi, &Quadrature::midpoint(&xi.support(), k.max(2)))?.residual();
                    refinement.push((k.max(2) as f64, rk.abs()));
                }
            }
        }
    }
    let report = report
        .param("refinement_grids", refinement.iter().map(|p| p.0).collect::<Vec<_>>())
        .param("refinement_residuals", refinement.iter().map(|p| p.1).collect::<Vec<_>>())
        .finish();
    let svg = Plot::new(&format!("{}: residual vs refinement", s.id), "cells per axis", "|residual|")
        .log_log()
        .series("first bump", refinement)
        .render();
    Ok(Outcome { report, csv, svg })
}

type CurveSets = Vec<(usize, Vec<Characteristic>)>;

fn curve_sets(s: &Scenario, o: &Overrides) -> Result<(f64, CurveSets), CliError> {
    let h = o.step.unwrap_or(s.step);
    let sets = s
        .geometry
        .generators()
        .into_iter()
        .map(|j| Ok((j, s.curves(j, 100, o.seed, h)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((h, sets))
}

fn curves_svg(s: &Scenario, sets: &[(usize, Vec<Characteristic>)]) -> String {
    let Some((j, curves)) = sets.first() else {
        return Plot::new(&s.id, "", "").render();
    };
    let field = s.field(*j).ok();
    let y_slot = field.map(|f| f.coupled_slots().iter().position(|c| *c).unwrap_or(0)).unwrap_or(0);
    let names = s.geometry.coordinate_names();
    let x_slot = j - 1;
    let mut plot = Plot::new(&format!("{}: characteristics of D_{}", s.id, j + 1), &names[x_slot], &names[y_slot]);
    for (k, c) in curves.iter().take(10).enumerate() {
        plot = plot.series(&format!("curve {k}"), c.states.iter().map(|p| (p[x_slot], p[y_slot])).collect());
    }
    plot.render()
}

fn broadstar(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let (h, sets) = curve_sets(s, o)?;
    let tol = o.tol.unwrap_or(1e-6 + 10.0 * h.powi(4));
    let mut parts = Vec::new();
    let mut csv = String::from("generator,curve,max_abs_delta\n");
    for (j, curves) in &sets {
        let rep = broad_star_check(&s.phi, s.omega(*j)?, curves, tol)?;
        for (k, v) in rep.values.iter().enumerate() {
            let _ = writeln!(csv, "{},{k},{v:e}", j + 1);
        }
        parts.push(rep);
    }
    let report = VerificationReport::merge("broadstar", tol, parts).param("step", h).param("horizon", s.horizon).param("curves_per_generator", 100);
    Ok(Outcome {
        report,
        csv,
        svg: curves_svg(s, &sets),
    })
}

fn lipschitz(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let (h, sets) = curve_sets(s, o)?;
    let slack = 1.01;
    let mut parts = Vec::new();
    let mut csv = String::from("generator,curve,max_excess\n");
    let mut violations = 0;
    let mut sups = Vec::new();
    for (j, curves) in &sets {
        let rep = lipschitz_check(&s.phi, s.omega(*j)?, curves, slack)?;
        violations += rep.params["violations"].as_u64().unwrap_or(0);
        sups.push(rep.params["omega_sup"].clone());
        for (k, v) in rep.values.iter().enumerate() {
            let _ = writeln!(csv, "{},{k},{v:e}", j + 1);
        }
        parts.push(rep);
    }
    let tol = o.tol.unwrap_or(0.0);
    let report = VerificationReport::merge("lipschitz", tol, parts)
        .param("step", h)
        .param("slack", slack)
        .param("omega_sup", sups)
        .param("violations", violations);
    Ok(Outcome {
        report,
        csv,
        svg: curves_svg(s, &sets),
    })
}

fn vertical_axes(s: &Scenario) -> Vec<usize> {
    match &s.geometry {
        Geometry::Group(a) => (a.rank() - 1..a.w_dim()).collect(),
        Geometry::Free { m } => (m - 1..m - 1 + PairIndex::count(*m)).collect(),
        Geometry::Engel => vec![2],
    }
}

fn holder(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let alpha = o.alpha.unwrap_or(0.5);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let scan = holder_modulus(&s.phi, &vertical_axes(s), alpha, &radii, &s.probe_points(20, o.seed))?;
    let rate = 1.0 - alpha;
    let mut report = scan.report_vanishing(rate, 0.1);
    if !report.pass {
        let low = scan.moduli.iter().cloned().fold(f64::INFINITY, f64::min);
        report = report.note(format!("modulus does not vanish: M(r) >= {low:.3e} over every radius"));
    }
    let mut csv = String::from("r,modulus,pairs\n");
    for ((r, m), n) in radii.iter().zip(&scan.moduli).zip(&scan.pairs) {
        let _ = writeln!(csv, "{r:e},{m:e},{n}");
    }
    let svg = Plot::new(&format!("{}: {alpha:.3}-Hölder modulus", s.id), "r", "M(r)")
        .log_log()
        .series("M(r)", radii.iter().cloned().zip(scan.moduli.iter().cloned()).collect())
        .render();
    Ok(Outcome { report, csv, svg })
}

fn reduction(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let Geometry::Free { m } = s.geometry else { unreachable!("checked by applicable") };
    let j = 1;
    let axes = [j - 1, m - 1 + PairIndex { l: j, s: 0 }.position()];
    let z0 = s.domain().center();
    let zero = ScalarField::constant(s.domain().clone(), 0.0);
    let form = FForm::new(m, &s.phi, &zero, j)?;
    let half = axes.iter().map(|&k| s.domain().width(k)).fold(f64::INFINITY, f64::min) / 4.0;
    let xi_hat = BumpTest::new(axes.iter().map(|&k| z0[k]).collect(), vec![half; 2], 4)?;
    let n = o.grid.unwrap_or(48);
    let psi_hat = slice_field(&s.phi, &axes, &z0)?;
    let zero2 = ScalarField::constant(psi_hat.domain().clone(), 0.0);
    let reduced = weak_pairing(&FForm::new(2, &psi_hat, &zero2, 1)?, &xi_hat, &xi_hat.quadrature(n))?.residual();
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let tol = o.tol.unwrap_or(0.2);
    let report = dimensional_reduction_check(&form, &xi_hat, &axes, &z0, &eps, reduced, n, 8, tol)?
        .note("flux pairings only: the datum is set to zero so that the sliced value is nonzero");
    let mut csv = String::from("eps,deviation\n");
    for (e, d) in eps.iter().zip(&report.values) {
        let _ = writeln!(csv, "{e:e},{d:e}");
    }
    let svg = Plot::new(&format!("{}: sliced minus reduced pairing", s.id), "eps", "deviation")
        .log_log()
        .series("|full - reduced|", eps.iter().cloned().zip(report.values.iter().cloned()).collect())
        .render();
    Ok(Outcome { report, csv, svg })
}

/// The planar pair `(ψ̂, ω̂)` on `(x_2, y_21)` for the first horizontal direction.
fn planar_data(s: &Scenario) -> Result<(ScalarField, ScalarField), CliError> {
    match &s.geometry {
        Geometry::Free { m } => {
            let axes = [0, m - 1];
            let z0 = s.domain().center();
            Ok((slice_field(&s.phi, &axes, &z0)?, slice_field(s.omega(1)?, &axes, &z0)?))
        }
        Geometry::Group(a) => {
            // Rank 2: y* = b y_21 with b = b_{21}.
            let b = a.b(0, 1, 0);
            let d = s.domain();
            let (y0, y1) = (d.lo[1] / b, d.hi[1] / b);
            let free_box = BoxDomain::new(vec![d.lo[0], y0.min(y1)], vec![d.hi[0], y0.max(y1)])?;
            Ok((lift_graph(a, &s.phi, free_box.clone())?, lift_graph(a, s.omega(1)?, free_box)?))
        }
        Geometry::Engel => unreachable!("checked by applicable"),
    }
}

fn dafermos(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let (psi_hat, omega_hat) = planar_data(s)?;
    let n = o.grid.unwrap_or(512);
    let h = o.step.unwrap_or(s.horizon / 512.0);
    let tol = o.tol.unwrap_or(1e-5);
    let field = ProjectedFieldF::new(2, psi_hat.clone(), 1)?;
    let curve = integrate_span(&field, &psi_hat.domain().center(), 0.0, s.horizon, h)?;
    let mut parts = Vec::new();
    let mut csv = String::from("eps,lhs,rhs\n");
    for eps in [0.05, 0.1] {
        let (t, rep) = dafermos_identity(&psi_hat, &omega_hat, &curve, eps, n, tol)?;
        let _ = writeln!(csv, "{eps},{:e},{:e}", t.lhs, t.rhs);
        parts.push(rep);
    }
    let report = VerificationReport::merge("dafermos", tol, parts).param("grid", n).param("step", h).param("eps", vec![0.05, 0.1]);
    let svg = Plot::new(&format!("{}: planar characteristic", s.id), "t", "gamma(t)")
        .series("gamma", curve.times.iter().cloned().zip(curve.states.iter().map(|p| p[1])).collect())
        .render();
    Ok(Outcome { report, csv, svg })
}

fn translation(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let a = group_algebra(Check::Translation, s)?;
    let n = o.grid.unwrap_or(match s.dim() {
        0..=2 => 256,
        3 => 64,
        4 => 40,
        _ => 16,
    });
    let tol = o.tol.unwrap_or(1e-6);
    let d = s.domain();
    let xi = BumpTest::new(d.center(), (0..d.dim()).map(|k| 0.2 * d.width(k)).collect(), 6)?;
    let radius = 0.1 * (0..d.dim()).map(|k| d.width(k)).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut parts = Vec::new();
    let mut csv = String::from("q,generator,flux_translated,flux_pulled_back,datum_translated,datum_pulled_back\n");
    let mut devs = Vec::new();
    for k in 0..10 {
        let c: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-radius..=radius)).collect();
        let q = GroupPoint::from_coords(a.rank(), &c);
        for j in s.geometry.generators() {
            let (t, rep) = translation_invariance_check(&a, &s.phi, s.omega(j)?, j, &q, &xi, n, tol)?;
            let _ = writeln!(
                csv,
                "{k},{},{:e},{:e},{:e},{:e}",
                j + 1,
                t.translated.flux,
                t.pulled_back.flux,
                t.translated.datum,
                t.pulled_back.datum
            );
            devs.push((k as f64, rep.max_deviation()));
            parts.push(rep);
        }
    }
    let report = VerificationReport::merge("translation", tol, parts).param("grid", n).param("q_radius", radius);
    let svg = Plot::new(&format!("{}: translation identity", s.id), "q index", "max |difference|")
        .series("difference", devs)
        .render();
    Ok(Outcome { report, csv, svg })
}

fn lift_project(s: &Scenario, o: &Overrides) -> Result<Outcome, CliError> {
    let a = group_algebra(Check::LiftProject, s)?;
    let m = a.rank();
    let nf = m - 1 + PairIndex::count(m);
    let d = s.dim();
    let ratio_bound = o.tol.unwrap_or(2.0);
    let n = o.grid.unwrap_or(default_grid(nf).min(64));
    let h = o.step.unwrap_or(s.step);
    let reach = (0..d).map(|k| s.domain().lo[k].abs().max(s.domain().hi[k].abs())).fold(0.0, f64::max);
    let free_box = BoxDomain::cube(nf, 2.0 * reach);
    let psi = lift_graph(&a, &s.phi, free_box.clone())?;
    let mmat = complete_matrix_m(&a)?;
    let det = mmat.determinant().abs();
    let map = Affine::linear(mmat);
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut csv = String::from("kind,generator,index,value\n");
    let mut ratios = Vec::new();
    for j in s.geometry.generators() {
        let omega = s.omega(j)?;
        let omega_f = lift_graph(&a, omega, free_box.clone())?;
        let g_form = GForm::new(&a, &s.phi, omega, j)?;
        let f_form = FForm::new(m, &psi, &omega_f, j)?;
        for k in 0..5 {
            let g_bump = bump_for(&mut rng, s.domain(), 3)?;
            let eta = BumpTest::new(vec![0.0], vec![0.5], 3)?;
            let extra = nf - d;
            let mut center = g_bump.center.clone();
            center.extend(std::iter::repeat_n(0.0, extra));
            let mut radii = g_bump.radii.clone();
            radii.extend(std::iter::repeat_n(0.5, extra));
            let amp = det / eta.integral().powi(extra as i32);
            let z_bump = BumpTest::new(center, radii, 3)?.with_amplitude(amp);
            let lifted = PulledBack::new(z_bump.clone(), map.clone())?;
            let res_f = weak_pairing(&f_form, &lifted, &lifted.matched_quadrature(z_bump.quadrature(n)))?.residual();
            let res_g = weak_pairing(&g_form, &g_bump, &g_bump.quadrature(n))?.residual();
            let ratio = if res_g == 0.0 { if res_f == 0.0 { 1.0 } else { f64::INFINITY } } else { res_f.abs() / res_g.abs() };
            let _ = writeln!(csv, "residual_ratio,{},{k},{ratio:e}", j + 1);
            ratios.push(ratio);
        }
    }

    let bound = 10.0 * h.powi(4);
    let mut defects = Vec::new();
    let base_box = BoxDomain::cube(nf, 0.2 * reach);
    let bases: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..nf).map(|k| rng.random_range(base_box.lo[k]..=base_box.hi[k])).collect())
        .collect();
    for j in s.geometry.generators() {
        let f_field = ProjectedFieldF::new(m, psi.clone(), j)?;
        let g_field = ProjectedFieldG::new(a.clone(), s.phi.clone(), j)?;
        for (b, base) in bases.iter().enumerate() {
            let gamma = project_curve(&a, &integrate(&f_field, base, s.horizon, h)?)?;
            let mut worst: f64 = 0.0;
            for k in gamma.origin..gamma.len() - 1 {
                let dt = gamma.times[k + 1] - gamma.times[k];
                let step = integrate_span(&g_field, &gamma.states[k], 0.0, dt, dt)?;
                worst = worst.max(max_gap(step.states.last().unwrap(), &gamma.states[k + 1]));
            }
            let direct = integrate(&g_field, &gamma.base, s.horizon, h)?;
            for (p, q) in direct.states.iter().zip(&gamma.states) {
                worst = worst.max(max_gap(p, q));
            }
            let _ = writeln!(csv, "ode_defect,{},{b},{worst:e}", j + 1);
            defects.push(worst);
        }
    }

    let mut report = VerificationReport::new("lift-project", 1.0)
        .param("grid", n)
        .param("step", h)
        .param("ratio_bound", ratio_bound)
        .param("defect_bound", bound)
        .param("det_m", det)
        .note("deviations are residual ratios over ratio_bound, then ODE defects over defect_bound");
    report.values = ratios.iter().chain(&defects).cloned().collect();
    report.deviations = ratios.iter().map(|r| r / ratio_bound).chain(defects.iter().map(|d| d / bound)).collect();
    let report = report.finish();
    let svg = Plot::new(&format!("{}: lifted vs direct residual", s.id), "bump", "|res_F| / |res_G|")
        .series("ratio", ratios.iter().enumerate().map(|(k, r)| (k as f64, *r)).collect())
        .render();
    Ok(Outcome { report, csv, svg })
}

fn max_gap(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
