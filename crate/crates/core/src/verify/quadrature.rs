//! Fixed tensor-product quadrature, optionally pushed through an affine map.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs::{Affine, BoxDomain};

/// Nodes and weights on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    /// Composite midpoint rule with `n` cells on `[a, b]`.
    pub fn midpoint(a: f64, b: f64, n: usize) -> Self {
        let h = (b - a) / n as f64;
        Self {
            nodes: (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
        }
    }

    /// Composite Simpson rule on `n` (made even) intervals of `[a, b]`.
    pub fn simpson(a: f64, b: f64, n: usize) -> Self {
        let n = n.max(2).div_ceil(2) * 2;
        let h = (b - a) / n as f64;
        let nodes = (0..=n).map(|i| a + i as f64 * h).collect();
        let weights = (0..=n)
            .map(|i| {
                let c = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Self { nodes, weights }
    }

    /// Gauss–Legendre rule with `n` nodes on `[a, b]`.
    pub fn gauss_legendre(a: f64, b: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        Self {
            nodes: x.iter().map(|t| c + r * t).collect(),
            weights: w.iter().map(|v| r * v).collect(),
        }
    }

    /// Gauss–Legendre panels between consecutive breakpoints.
    pub fn panels(breaks: &[f64], n: usize) -> Self {
        let mut rule = Self {
            nodes: Vec::new(),
            weights: Vec::new(),
        };
        for pair in breaks.windows(2) {
            let p = Self::gauss_legendre(pair[0], pair[1], n);
            rule.nodes.extend(p.nodes);
            rule.weights.extend(p.weights);
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (z * p - p0) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n == 1 {
        x[0] = 0.0;
        w[0] = 2.0;
    }
    (x, w)
}

/// Tensor product of axis rules in the reference variables `z`, mapped to
/// physical nodes `w = map(z)` with weights scaled by `|det map|`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub axes: Vec<AxisRule>,
    pub map: Option<Affine>,
}

impl Quadrature {
    pub fn tensor(axes: Vec<AxisRule>) -> Self {
        Self { axes, map: None }
    }

    /// Composite midpoint with `n` cells per axis on a box.
    pub fn midpoint(b: &BoxDomain, n: usize) -> Self {
        Self::tensor((0..b.dim()).map(|k| AxisRule::midpoint(b.lo[k], b.hi[k], n)).collect())
    }

    pub fn mapped(mut self, map: Affine) -> Self {
        self.map = Some(map);
        self
    }

    pub fn dim(&self) -> usize {
        self.map.as_ref().map_or(self.axes.len(), Affine::dim_out)
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(AxisRule::len).product()
    }

    /// Box hull of the physical nodes' region.
    pub fn hull(&self) -> BoxDomain {
        let lo = self.axes.iter().map(|a| a.nodes.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
        let hi = self.axes.iter().map(|a| a.nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        let reference = BoxDomain { lo, hi };
        match &self.map {
            Some(m) => reference.image_hull(m),
            None => reference,
        }
    }

    /// `Σ weight · f(node)` for `K` integrands at once. Partial sums over the
    /// first axis are combined in a fixed order, so results do not depend on
    /// the thread count.
    pub fn integrate<const K: usize>(&self, f: impl Fn(&[f64]) -> [f64; K] + Sync) -> Result<[f64; K]> {
        let d = self.axes.len();
        if d == 0 || self.axes.iter().any(AxisRule::is_empty) {
            return Err(Error::InvalidArgument("quadrature needs a nonempty rule on every axis".into()));
        }
        let jac = match &self.map {
            Some(m) => {
                if m.dim_in() != d || m.dim_out() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: m.dim_in(),
                    });
                }
                m.mat.determinant().abs()
            }
            None => 1.0,
        };
        let first = &self.axes[0];
        let partial: Vec<[f64; K]> = (0..first.len())
            .into_par_iter()
            .map(|i0| {
                let mut acc = [0.0; K];
                let mut idx = vec![0usize; d];
                idx[0] = i0;
                let mut z = vec![0.0; d];
                let mut w = vec![0.0; d];
                let rest: usize = self.axes[1..].iter().map(AxisRule::len).product();
                for _ in 0..rest {
                    let mut weight = jac;
                    for k in 0..d {
                        z[k] = self.axes[k].nodes[idx[k]];
                        weight *= self.axes[k].weights[idx[k]];
                    }
                    let node: &[f64] = match &self.map {
                        Some(m) => {
                            m.apply(&z, &mut w);
                            &w
                        }
                        None => &z,
                    };
                    let v = f(node);
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a += weight * x;
                    }
                    for k in (1..d).rev() {
                        idx[k] += 1;
                        if idx[k] < self.axes[k].len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
                acc
            })
            .collect();
        let mut total = [0.0; K];
        for p in partial {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        Ok(total)
    }
}
