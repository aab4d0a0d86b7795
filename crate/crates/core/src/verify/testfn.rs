//! Compactly supported C¹ test functions with closed-form gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graphs::{Affine, BoxDomain};

use super::quadrature::{AxisRule, Quadrature};

pub trait TestFunction: Sync {
    fn dim(&self) -> usize;
    /// A box containing the support.
    fn support(&self) -> BoxDomain;
    /// Value at `z`; writes the gradient into `grad`.
    fn eval(&self, z: &[f64], grad: &mut [f64]) -> f64;
}

/// `amplitude · Π_k (1 - t_k²)₊^p` with `t_k = (z_k - c_k) / r_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTest {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub p: i32,
    pub amplitude: f64,
}

impl BumpTest {
    pub fn new(center: Vec<f64>, radii: Vec<f64>, p: i32) -> Result<Self> {
        check_len(center.len(), radii.len())?;
        if p < 3 {
            return Err(Error::InvalidArgument(format!("bump exponent must be at least 3, got {p}")));
        }
        if radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("bump radii must be positive".into()));
        }
        Ok(Self {
            center,
            radii,
            p,
            amplitude: 1.0,
        })
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    /// Random bump inside `domain` with radii drawn from `[r_min, r_max]`.
    pub fn random<R: Rng>(rng: &mut R, domain: &BoxDomain, r_min: f64, r_max: f64, p: i32) -> Result<Self> {
        let d = domain.dim();
        let mut center = Vec::with_capacity(d);
        let mut radii = Vec::with_capacity(d);
        for k in 0..d {
            let half = 0.5 * domain.width(k);
            let hi = r_max.min(half);
            let lo = r_min.min(hi);
            let r = if hi > lo { rng.random_range(lo..hi) } else { hi };
            let c = if domain.width(k) > 2.0 * r {
                rng.random_range(domain.lo[k] + r..domain.hi[k] - r)
            } else {
                0.5 * (domain.lo[k] + domain.hi[k])
            };
            center.push(c);
            radii.push(r);
        }
        Self::new(center, radii, p)
    }

    /// Exact integral `amplitude · Π_k r_k ∫_{-1}^{1} (1 - t²)^p dt`.
    pub fn integral(&self) -> f64 {
        let one_d: f64 = 2.0 * (1..=self.p).map(|k| (2 * k) as f64 / (2 * k + 1) as f64).product::<f64>();
        self.amplitude * self.radii.iter().map(|r| r * one_d).product::<f64>()
    }

    /// Composite midpoint rule with `n` cells per axis on the support.
    pub fn quadrature(&self, n: usize) -> Quadrature {
        Quadrature::midpoint(&self.support(), n)
    }
}

impl TestFunction for BumpTest {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn support(&self) -> BoxDomain {
        BoxDomain {
            lo: self.center.iter().zip(&self.radii).map(|(c, r)| c - r).collect(),
            hi: self.center.iter().zip(&self.radii).map(|(c, r)| c + r).collect(),
        }
    }

    #[inline]
    fn eval(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut val = self.amplitude;
        let mut logd = [0.0f64; 32];
        for k in 0..d {
            let t = (z[k] - self.center[k]) / self.radii[k];
            let s = 1.0 - t * t;
            if s <= 0.0 {
                grad[..d].fill(0.0);
                return 0.0;
            }
            val *= s.powi(self.p);
            // d/dz log((1-t²)^p) = -2 p t / (r (1 - t²))
            logd[k] = -2.0 * self.p as f64 * t / (self.radii[k] * s);
        }
        for k in 0..d {
            grad[k] = val * logd[k];
        }
        val
    }
}

/// One-dimensional profile equal to 1 on `[-ε, ε]`, vanishing outside
/// `[-ε-ε², ε+ε²]`, with a C² smootherstep ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauBump {
    pub eps: f64,
}

impl PlateauBump {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("plateau scale must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn half_width(&self) -> f64 {
        self.eps + self.eps * self.eps
    }

    /// `(value, derivative)` at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let e = self.eps;
        let a = z.abs();
        if a <= e {
            return (1.0, 0.0);
        }
        let w = e * e;
        let s = (a - e) / w;
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let step = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        let dstep = 30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
        (1.0 - step, -dstep * z.signum())
    }

    /// Gauss–Legendre panels split at the ramp ends.
    pub fn rule(&self, center: f64, n: usize) -> AxisRule {
        let (e, h) = (self.eps, self.half_width());
        AxisRule::panels(&[center - h, center - e, center + e, center + h], n)
    }
}

/// `Π_{k∈sliced} (2ε)^{-1} φ₀^ε(z_k - z0_k) · ξ̂(z_reduced)`.
#[derive(Debug, Clone)]
pub struct SlicedTest {
    pub reduced_axes: Vec<usize>,
    pub sliced_axes: Vec<usize>,
    pub z0: Vec<f64>,
    pub plateau: PlateauBump,
    pub xi_hat: BumpTest,
}

impl SlicedTest {
    /// `reduced_axes` carry `ξ̂`; every other axis of `0..dim` is sliced at `z0`.
    pub fn new(dim: usize, reduced_axes: Vec<usize>, z0: Vec<f64>, eps: f64, xi_hat: BumpTest) -> Result<Self> {
        check_len(reduced_axes.len(), xi_hat.dim())?;
        check_len(dim, z0.len())?;
        if reduced_axes.iter().any(|k| *k >= dim) {
            return Err(Error::InvalidArgument("reduced axis out of range".into()));
        }
        let sliced_axes: Vec<usize> = (0..dim).filter(|k| !reduced_axes.contains(k)).collect();
        if sliced_axes.is_empty() {
            return Err(Error::EmptySlice);
        }
        Ok(Self {
            reduced_axes,
            sliced_axes,
            z0,
            plateau: PlateauBump::new(eps)?,
            xi_hat,
        })
    }

    /// Midpoint on reduced axes, paneled Gauss–Legendre on sliced axes.
    pub fn quadrature(&self, n_reduced: usize, n_panel: usize) -> Quadrature {
        let sup = self.xi_hat.support();
        let axes = (0..self.z0.len())
            .map(|k| match self.reduced_axes.iter().position(|r| *r == k) {
                Some(i) => AxisRule::midpoint(sup.lo[i], sup.hi[i], n_reduced),
                None => self.plateau.rule(self.z0[k], n_panel),
            })
            .collect();
        Quadrature::tensor(axes)
    }
}

impl TestFunction for SlicedTest {
    fn dim(&self) -> usize {
        self.z0.len()
    }

    fn support(&self) -> BoxDomain {
        let sup = self.xi_hat.support();
        let h = self.plateau.half_width();
        let mut lo: Vec<f64> = self.z0.iter().map(|z| z - h).collect();
        let mut hi: Vec<f64> = self.z0.iter().map(|z| z + h).collect();
        for (i, &k) in self.reduced_axes.iter().enumerate() {
            lo[k] = sup.lo[i];
            hi[k] = sup.hi[i];
        }
        BoxDomain { lo, hi }
    }

    fn eval(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let scale = 0.5 / self.plateau.eps;
        let mut zr = [0.0f64; 32];
        let mut gr = [0.0f64; 32];
        for (i, &k) in self.reduced_axes.iter().enumerate() {
            zr[i] = z[k];
        }
        let nr = self.reduced_axes.len();
        let xi = self.xi_hat.eval(&zr[..nr], &mut gr[..nr]);
        let mut vals = [0.0f64; 32];
        let mut ders = [0.0f64; 32];
        let mut prod = 1.0;
        for (i, &k) in self.sliced_axes.iter().enumerate() {
            let (v, dv) = self.plateau.eval(z[k] - self.z0[k]);
            vals[i] = scale * v;
            ders[i] = scale * dv;
            prod *= vals[i];
        }
        for (i, &k) in self.reduced_axes.iter().enumerate() {
            grad[k] = gr[i] * prod;
        }
        for (i, &k) in self.sliced_axes.iter().enumerate() {
            let mut others = xi;
            for (l, v) in vals[..self.sliced_axes.len()].iter().enumerate() {
                if l != i {
                    others *= v;
                }
            }
            grad[k] = ders[i] * others;
        }
        xi * prod
    }
}

/// `ξ ∘ map` for an affine map.
#[derive(Debug, Clone)]
pub struct PulledBack<T> {
    pub inner: T,
    pub map: Affine,
    inverse: Affine,
}

impl<T: TestFunction> PulledBack<T> {
    pub fn new(inner: T, map: Affine) -> Result<Self> {
        check_len(inner.dim(), map.dim_out())?;
        let inverse = map.inverse()?;
        Ok(Self { inner, map, inverse })
    }

    /// Quadrature in the inner variables pushed back through the inverse map,
    /// so that nodes cover exactly the pulled-back support.
    pub fn matched_quadrature(&self, inner_rule: Quadrature) -> Quadrature {
        inner_rule.mapped(self.inverse.clone())
    }
}

impl<T: TestFunction> TestFunction for PulledBack<T> {
    fn dim(&self) -> usize {
        self.map.dim_in()
    }

    fn support(&self) -> BoxDomain {
        self.inner.support().image_hull(&self.inverse)
    }

    fn eval(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.inner.dim();
        let mut u = [0.0f64; 32];
        let mut g = [0.0f64; 32];
        self.map.apply(z, &mut u[..d]);
        let v = self.inner.eval(&u[..d], &mut g[..d]);
        for (c, out) in grad.iter_mut().enumerate().take(self.dim()) {
            let mut acc = 0.0;
            for r in 0..d {
                acc += self.map.mat[(r, c)] * g[r];
            }
            *out = acc;
        }
        v
    }
}
