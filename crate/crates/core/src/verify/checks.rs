use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{GroupPoint, StepTwoAlgebra};
use crate::characteristics::Characteristic;
use crate::error::{check_len, Error, Result};
use crate::free::{free_mul, project_pi, FreePoint, PairIndex};
use crate::graphs::{compose_p_q_inverse, dp_q, graph_map, p_q_map, pi_w, translate_graph, ScalarField};

use super::quadrature::{AxisRule, Quadrature};
use super::testfn::{BumpTest, PulledBack, SlicedTest, TestFunction};
use super::weak::{weak_pairing, GForm, WeakForm, WeakPairing};
use super::VerificationReport;

/// Cumulative integral from `f[0]` on uniformly spaced samples with signed step `h`,
/// fourth order when at least four samples are available.
fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let piece = if n < 4 {
            0.5 * (f[i] + f[i + 1])
        } else if i == 0 {
            (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if i == n - 2 {
            (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]) / 24.0
        } else {
            (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]) / 24.0
        };
        out[i + 1] = out[i] + h * piece;
    }
    out
}

/// Splits a curve into its forward and backward halves, each starting at the base.
fn halves(c: &Characteristic) -> [(Vec<f64>, Vec<&Vec<f64>>); 2] {
    let fwd = (c.times[c.origin..].to_vec(), c.states[c.origin..].iter().collect());
    let back = (
        c.times[..=c.origin].iter().rev().cloned().collect(),
        c.states[..=c.origin].iter().rev().collect(),
    );
    [fwd, back]
}

/// FTC along each curve: `Δ(t) = φ(γ(t)) - φ(γ(0)) - ∫_0^t ω_j(γ(s)) ds`.
/// `values` holds `max |Δ|` per curve.
pub fn broad_star_check(phi: &ScalarField, omega_j: &ScalarField, curves: &[Characteristic], tol: f64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("broadstar", tol).param("curves", curves.len());
    for c in curves {
        let mut worst: f64 = 0.0;
        for (times, states) in halves(c) {
            if times.len() < 2 {
                continue;
            }
            let phis = states.iter().map(|s| phi.eval(s)).collect::<Result<Vec<_>>>()?;
            let oms = states.iter().map(|s| omega_j.eval(s)).collect::<Result<Vec<_>>>()?;
            let integral = cumulative(&oms, times[1] - times[0]);
            for k in 0..times.len() {
                worst = worst.max((phis[k] - phis[0] - integral[k]).abs());
            }
        }
        report.values.push(worst);
        report.deviations.push(worst);
    }
    Ok(report.finish())
}

/// Estimate of `‖ω_j‖_∞`: samples over the whole domain together with the
/// curve samples themselves.
pub fn lipschitz_constant(omega_j: &ScalarField, curves: &[Characteristic]) -> f64 {
    let mut sup = omega_j.sup_abs_estimate(200_000);
    for c in curves {
        for s in &c.states {
            if let Ok(v) = omega_j.eval(s) {
                sup = sup.max(v.abs());
            }
        }
    }
    sup
}

/// `|φ(γ(t)) - φ(γ(s))| ≤ slack · ‖ω_j‖_∞ · |t - s|` over every sampled pair.
/// Deviations are the largest excess per curve (≤ 0 when the bound holds),
/// with an allowance of 64 ulp of `φ` for rounding.
pub fn lipschitz_check(phi: &ScalarField, omega_j: &ScalarField, curves: &[Characteristic], slack: f64) -> Result<VerificationReport> {
    let l = lipschitz_constant(omega_j, curves);
    let mut report = VerificationReport::new("lipschitz", 0.0)
        .param("omega_sup", l)
        .param("slack", slack)
        .param("curves", curves.len());
    let mut violations = 0usize;
    for c in curves {
        let vals = c.states.iter().map(|s| phi.eval(s)).collect::<Result<Vec<_>>>()?;
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let allowance = 64.0 * f64::EPSILON * scale;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..vals.len() {
            for k in i + 1..vals.len() {
                let excess = (vals[i] - vals[k]).abs() - slack * l * (c.times[k] - c.times[i]).abs() - allowance;
                if excess > 0.0 {
                    violations += 1;
                }
                worst = worst.max(excess);
            }
        }
        report.values.push(worst);
        report.deviations.push(worst);
    }
    Ok(report.param("violations", violations).finish())
}

/// Both sides of the strip identity for the reduced Burgers equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DafermosTerms {
    pub lhs: f64,
    pub rhs: f64,
}

/// Strip identity on `{0 < t < T, γ(t) - ε < x < γ(t)}` for a curve in the
/// plane `(x_j, y_j1)` with `γ' = -ψ̂`; `n` intervals per integral (Simpson).
pub fn dafermos_identity(
    psi_hat: &ScalarField,
    omega_hat: &ScalarField,
    curve: &Characteristic,
    eps: f64,
    n: usize,
    tol: f64,
) -> Result<(DafermosTerms, VerificationReport)> {
    check_len(2, psi_hat.dim())?;
    check_len(2, omega_hat.dim())?;
    check_len(2, curve.dim())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("strip width must be positive, got {eps}")));
    }
    let (times, _) = curve.forward();
    let t_end = *times.last().ok_or(Error::EmptySlice)?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument("curve has no forward part".into()));
    }
    let strip = |f: &ScalarField, s: &[f64]| -> Result<f64> {
        let rule = AxisRule::simpson(s[1] - eps, s[1], n);
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f.eval(&[s[0], *x])?;
        }
        Ok(acc)
    };
    let start = curve.sample(0.0)?;
    let end = curve.sample(t_end)?;
    let outer = AxisRule::simpson(0.0, t_end, n);
    let mut omega_area = 0.0;
    let mut jump = 0.0;
    for (t, w) in outer.nodes.iter().zip(&outer.weights) {
        let s = curve.sample(*t)?;
        omega_area += w * strip(omega_hat, &s)?;
        let d = psi_hat.eval(&[s[0], s[1] - eps])? - psi_hat.eval(&s)?;
        jump += w * d * d;
    }
    let terms = DafermosTerms {
        lhs: strip(psi_hat, &end)? - strip(psi_hat, &start)? - omega_area,
        rhs: -0.5 * jump,
    };
    let mut report = VerificationReport::new("dafermos", tol).param("eps", eps).param("grid", n).param("horizon", t_end);
    report.values = vec![terms.lhs, terms.rhs];
    report.deviations = vec![(terms.lhs - terms.rhs).abs()];
    Ok((terms, report.finish()))
}

const GAP_FRACTIONS: [f64; 4] = [0.99, 0.5, 0.25, 0.125];

/// Sampled moduli `M(r)` of `α`-Hölder quotients along vertical directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderScan {
    pub alpha: f64,
    pub radii: Vec<f64>,
    pub moduli: Vec<f64>,
    pub pairs: Vec<usize>,
}

/// For every radius, the largest `|φ(b) - φ(b')| / |b - b'|^α` over sampled
/// pairs with `0 < |b - b'| < r` that differ only along `axes`. Pairs use
/// gaps `θ r` for several `θ < 1`, both orientations, every listed axis and
/// (with several axes) the diagonal.
pub fn holder_modulus(phi: &ScalarField, axes: &[usize], alpha: f64, radii: &[f64], base_points: &[Vec<f64>]) -> Result<HolderScan> {
    let d = phi.dim();
    if axes.is_empty() || axes.iter().any(|k| *k >= d) {
        return Err(Error::InvalidArgument("Hölder axes out of range".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let mut dirs: Vec<Vec<f64>> = axes
        .iter()
        .map(|&k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            e
        })
        .collect();
    if axes.len() > 1 {
        let mut e = vec![0.0; d];
        for &k in axes {
            e[k] = 1.0 / (axes.len() as f64).sqrt();
        }
        dirs.push(e);
    }
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for b in base_points {
        check_len(d, b.len())?;
        let Ok(fb) = phi.eval(b) else { continue };
        for r in radii {
            for theta in GAP_FRACTIONS {
                let gap = theta * r;
                for e in &dirs {
                    for sign in [1.0, -1.0] {
                        let bp: Vec<f64> = b.iter().zip(e).map(|(x, v)| x + sign * gap * v).collect();
                        if let Ok(fp) = phi.eval(&bp) {
                            samples.push((gap, (fp - fb).abs() / gap.powf(alpha)));
                        }
                    }
                }
            }
        }
    }
    let mut moduli = Vec::with_capacity(radii.len());
    let mut pairs = Vec::with_capacity(radii.len());
    for r in radii {
        let inside = samples.iter().filter(|(g, _)| g < r);
        let (count, best) = inside.fold((0usize, 0.0f64), |(c, m), (_, q)| (c + 1, m.max(*q)));
        pairs.push(count);
        moduli.push(best);
    }
    Ok(HolderScan {
        alpha,
        radii: radii.to_vec(),
        moduli,
        pairs,
    })
}

impl HolderScan {
    /// Least-squares `C` in `M(r) ≈ C r^e`.
    pub fn fitted_constant(&self, exponent: f64) -> f64 {
        let num: f64 = self.moduli.iter().zip(&self.radii).map(|(m, r)| m * r.powf(exponent)).sum();
        let den: f64 = self.radii.iter().map(|r| r.powf(2.0 * exponent)).sum();
        num / den
    }

    fn base_report(&self, check: &str, tol: f64) -> VerificationReport {
        let mut r = VerificationReport::new(check, tol).param("alpha", self.alpha).param("radii", self.radii.clone());
        r.values = self.moduli.clone();
        for (rad, n) in self.radii.iter().zip(&self.pairs) {
            if *n == 0 {
                r.notes.push(format!("no sampled pairs below r = {rad}"));
            }
        }
        r
    }

    /// Vanishing modulus: `M(r) ≤ 2 C r^e` with the fitted `C`, and along
    /// decreasing radii `M` never grows by more than `slack`.
    pub fn report_vanishing(&self, exponent: f64, slack: f64) -> VerificationReport {
        let c = self.fitted_constant(exponent);
        let mut r = self.base_report("holder", 0.0).param("fitted_constant", c).param("rate_exponent", exponent);
        for (m, rad) in self.moduli.iter().zip(&self.radii) {
            r.deviations.push(m - 2.0 * c * rad.powf(exponent));
        }
        for w in self.moduli.windows(2) {
            r.deviations.push(w[1] - (1.0 + slack) * w[0]);
        }
        if self.pairs.contains(&0) {
            r.deviations.push(f64::INFINITY);
        }
        r.finish()
    }

    /// Non-vanishing modulus: `M(r) ≥ floor` for every radius.
    pub fn report_failure(&self, floor: f64) -> VerificationReport {
        let mut r = self.base_report("holder", 0.0).param("floor", floor);
        r.deviations = self.moduli.iter().map(|m| floor - m).collect();
        r.finish()
    }
}

/// Least-squares fit of `y = C x^k` in log-log coordinates; returns `(C, k)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let k = sxy / sxx;
    ((my - k * mx).exp(), k)
}

/// The two sides of the translation identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationTerms {
    pub translated: WeakPairing,
    pub pulled_back: WeakPairing,
}

/// Compares the pairings of `(φ_q, ω_j ∘ P_{q⁻¹})` against `ξ` with those of
/// `(φ, ω_j)` against `ξ ∘ P_q`, flux and datum separately. Each side uses its
/// own midpoint rule with `n` cells per axis on its own support box.
#[allow(clippy::too_many_arguments)]
pub fn translation_invariance_check(
    a: &StepTwoAlgebra,
    phi: &ScalarField,
    omega_j: &ScalarField,
    j: usize,
    q: &GroupPoint,
    xi: &BumpTest,
    n: usize,
    tol: f64,
) -> Result<(TranslationTerms, VerificationReport)> {
    let phi_q = translate_graph(a, phi, q)?;
    let omega_q = compose_p_q_inverse(a, omega_j, q)?;
    let lhs_form = GForm::new(a, &phi_q, &omega_q, j)?;
    let translated = weak_pairing(&lhs_form, xi, &Quadrature::midpoint(&xi.support(), n))?;

    let pulled = PulledBack::new(xi.clone(), p_q_map(a, q)?)?;
    let rhs_form = GForm::new(a, phi, omega_j, j)?;
    let pulled_back = weak_pairing(&rhs_form, &pulled, &Quadrature::midpoint(&pulled.support(), n))?;

    let terms = TranslationTerms { translated, pulled_back };
    let mut report = VerificationReport::new("translation", tol).param("grid", n).param("q", q.coords());
    report.values = vec![translated.flux, pulled_back.flux, translated.datum, pulled_back.datum];
    report.deviations = vec![(translated.flux - pulled_back.flux).abs(), (translated.datum - pulled_back.datum).abs()];
    Ok((terms, report.finish()))
}

/// Pairs `form` with the sliced family `Π (2ε)^{-1} φ₀^ε(z - z0) · ξ̂` for each
/// `ε` and compares with `reduced`, the pairing of the sliced form against `ξ̂`.
/// The deviations should decay like `ε`; the report passes when the fitted
/// log-log slope lies within `slope_tol` of 1.
#[allow(clippy::too_many_arguments)]
pub fn dimensional_reduction_check(
    form: &dyn WeakForm,
    xi_hat: &BumpTest,
    reduced_axes: &[usize],
    z0: &[f64],
    eps: &[f64],
    reduced: f64,
    n_reduced: usize,
    n_panel: usize,
    slope_tol: f64,
) -> Result<VerificationReport> {
    if eps.len() < 2 {
        return Err(Error::InvalidArgument("need at least two ε values".into()));
    }
    let mut devs = Vec::with_capacity(eps.len());
    for &e in eps {
        let test = SlicedTest::new(form.dim(), reduced_axes.to_vec(), z0.to_vec(), e, xi_hat.clone())?;
        let full = weak_pairing(form, &test, &test.quadrature(n_reduced, n_panel))?.residual();
        devs.push((full - reduced).abs());
    }
    let (c, slope) = fit_power_law(eps, &devs);
    let ratios: Vec<f64> = devs.windows(2).map(|w| w[0] / w[1]).collect();
    let mut report = VerificationReport::new("reduction", slope_tol)
        .param("eps", eps.to_vec())
        .param("reduced", reduced)
        .param("fitted_constant", c)
        .param("slope", slope)
        .param("halving_ratios", ratios);
    report.values = devs;
    report.deviations = vec![(slope - 1.0).abs()];
    Ok(report.finish())
}

/// Exact identities on `count` seeded samples: `π(p·p') = π(p)·π(p')`,
/// `det dP_q = 1`, `(φ_q)_{q⁻¹} = φ` and `q·graph(φ) = graph(φ_q)`.
/// Translations have entries in `[-q_radius, q_radius]` and graph points are
/// drawn from the domain of `φ` shrunk by `margin`.
pub fn structural_exactness_check(
    a: &StepTwoAlgebra,
    phi: &ScalarField,
    count: usize,
    seed: u64,
    q_radius: f64,
    margin: f64,
    tol: f64,
) -> Result<VerificationReport> {
    check_len(a.w_dim(), phi.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, nf) = (a.rank(), a.rank() + PairIndex::count(a.rank()));
    let inner = phi.domain().shrink(margin);
    let mut worst = [0.0f64; 4];
    for _ in 0..count {
        let fp: Vec<f64> = (0..nf).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let fq: Vec<f64> = (0..nf).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (p, pp) = (FreePoint::from_coords(m, &fp), FreePoint::from_coords(m, &fq));
        let lhs = project_pi(a, &free_mul(&p, &pp)?)?;
        let rhs = a.mul(&project_pi(a, &p)?, &project_pi(a, &pp)?)?;
        worst[0] = worst[0].max(lhs.max_abs_diff(&rhs));

        let qc: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-q_radius..=q_radius)).collect();
        let q = GroupPoint::from_coords(m, &qc);
        worst[1] = worst[1].max((dp_q(a, &q)?.determinant() - 1.0).abs());

        let w: Vec<f64> = (0..inner.dim()).map(|k| rng.random_range(inner.lo[k]..=inner.hi[k])).collect();
        let phi_q = translate_graph(a, phi, &q)?;
        let back = translate_graph(a, &phi_q, &a.inv(&q)?)?;
        worst[2] = worst[2].max((back.eval(&w)? - phi.eval(&w)?).abs());

        let moved = a.mul(&q, &graph_map(a, phi, &w)?)?;
        let on_graph = graph_map(a, &phi_q, &pi_w(a, &moved)?)?;
        worst[3] = worst[3].max(moved.max_abs_diff(&on_graph));
    }
    let mut report = VerificationReport::new("structure", tol).seed(seed).param("samples", count).param("q_radius", q_radius);
    report.values = worst.to_vec();
    report.deviations = worst.to_vec();
    Ok(report.note("deviations: pi homomorphism, det dP_q - 1, double translation, translated graph").finish())
}
