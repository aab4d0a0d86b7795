//! Continuous real functions on boxes of `W`, closed-form or grid-sampled.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::StepTwoAlgebra;
use crate::error::{check_len, Error, Result};
use crate::free::project_pi_w_into;

use super::Affine;

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_len(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidArgument("box must have positive dimension".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::InvalidArgument(format!("invalid box side [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[-r, r]^d`.
    pub fn cube(d: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; d],
            hi: vec![r; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| {
                let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
                *x >= a - tol && *x <= b + tol
            })
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    /// Box shrunk by `margin` on every side (sides never invert).
    pub fn shrink(&self, margin: f64) -> Self {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let c = 0.5 * (a + b);
                ((a + margin).min(c), (b - margin).max(c))
            })
            .unzip();
        Self { lo, hi }
    }

    /// Bounding box of the image of `self` under an affine map.
    pub fn image_hull(&self, map: &Affine) -> Self {
        let c = self.center();
        let half: Vec<f64> = (0..self.dim()).map(|k| 0.5 * self.width(k)).collect();
        let mut mid = vec![0.0; map.dim_out()];
        map.apply(&c, &mut mid);
        let (lo, hi) = (0..map.dim_out())
            .map(|r| {
                let spread: f64 = (0..self.dim()).map(|k| map.mat[(r, k)].abs() * half[k]).sum();
                (mid[r] - spread, mid[r] + spread)
            })
            .unzip();
        Self { lo, hi }
    }
}

/// Interpolation order for grid-sampled fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Multilinear,
    /// Tensor Catmull-Rom, C¹ in the interior.
    Cubic,
}

/// Samples on a uniform tensor grid, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub domain: BoxDomain,
    pub counts: Vec<usize>,
    pub values: Vec<f64>,
    pub order: Interpolation,
}

impl Grid {
    pub fn new(domain: BoxDomain, counts: Vec<usize>, values: Vec<f64>, order: Interpolation) -> Result<Self> {
        check_len(domain.dim(), counts.len())?;
        if counts.iter().any(|&n| n < 2) {
            return Err(Error::Grid("every axis needs at least two samples".into()));
        }
        if (0..domain.dim()).any(|k| domain.width(k) <= 0.0) {
            return Err(Error::Grid("grid spacing must be positive".into()));
        }
        check_len(counts.iter().product(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("non-finite sample".into()));
        }
        Ok(Self {
            domain,
            counts,
            values,
            order,
        })
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(domain: BoxDomain, counts: Vec<usize>, order: Interpolation, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        check_len(domain.dim(), counts.len())?;
        let total: usize = counts.iter().product();
        let d = domain.dim();
        let mut values = Vec::with_capacity(total);
        let mut p = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..d).rev() {
                let i = rem % counts[k];
                rem /= counts[k];
                p[k] = domain.lo[k] + domain.width(k) * i as f64 / (counts[k] - 1) as f64;
            }
            values.push(f(&p));
        }
        Self::new(domain, counts, values, order)
    }

    /// Reads a CSV with a header naming the coordinates followed by one
    /// value column. Rows may come in any order but must fill a tensor grid.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, order: Interpolation) -> Result<(Vec<String>, Self)> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.len() < 2 {
            return Err(Error::Grid("need at least one coordinate and a value column".into()));
        }
        let d = header.len() - 1;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            check_len(d + 1, rec.len())?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Grid(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); d];
        for (k, axis) in axes.iter_mut().enumerate() {
            let mut v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            *axis = v;
        }
        let counts: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = counts.iter().product();
        if total != rows.len() {
            return Err(Error::Grid(format!("{} rows do not fill a {:?} tensor grid", rows.len(), counts)));
        }
        for axis in &axes {
            if axis.len() < 2 {
                return Err(Error::Grid("every axis needs at least two samples".into()));
            }
            let h = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
            for (i, x) in axis.iter().enumerate() {
                if (x - (axis[0] + h * i as f64)).abs() > 1e-9 * h.max(1.0) {
                    return Err(Error::Grid("grid is not uniform".into()));
                }
            }
        }
        let mut values = vec![f64::NAN; total];
        for r in &rows {
            let mut flat = 0;
            for k in 0..d {
                let i = axes[k].partition_point(|v| *v < r[k]);
                flat = flat * counts[k] + i;
            }
            values[flat] = r[d];
        }
        let domain = BoxDomain::new(axes.iter().map(|a| a[0]).collect(), axes.iter().map(|a| a[a.len() - 1]).collect())?;
        Ok((header[..d].to_vec(), Self::new(domain, counts, values, order)?))
    }

    pub fn from_csv_path(path: &Path, order: Interpolation) -> Result<(Vec<String>, Self)> {
        Self::from_csv_reader(std::fs::File::open(path)?, order)
    }

    pub fn to_csv(&self, names: &[String], value_name: &str) -> Result<String> {
        check_len(self.domain.dim(), names.len())?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
        header.push(value_name);
        w.write_record(&header)?;
        let d = self.domain.dim();
        for (flat, v) in self.values.iter().enumerate() {
            let mut rem = flat;
            let mut rec = vec![String::new(); d + 1];
            for k in (0..d).rev() {
                let i = rem % self.counts[k];
                rem /= self.counts[k];
                rec[k] = format!("{}", self.node(k, i));
            }
            rec[d] = format!("{v}");
            w.write_record(&rec)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Grid(e.to_string()))?).map_err(|e| Error::Grid(e.to_string()))
    }

    fn node(&self, k: usize, i: usize) -> f64 {
        self.domain.lo[k] + self.domain.width(k) * i as f64 / (self.counts[k] - 1) as f64
    }

    fn at(&self, idx: &[usize]) -> f64 {
        let mut flat = 0;
        for (k, i) in idx.iter().enumerate() {
            flat = flat * self.counts[k] + i;
        }
        self.values[flat]
    }

    fn interpolate(&self, p: &[f64]) -> f64 {
        let d = self.domain.dim();
        // Per axis: cell index and fractional offset.
        let mut cell = [0usize; MAX_GRID_DIM];
        let mut frac = [0.0f64; MAX_GRID_DIM];
        for k in 0..d {
            let n = self.counts[k];
            let s = ((p[k] - self.domain.lo[k]) / self.domain.width(k) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            cell[k] = i;
            frac[k] = s - i as f64;
        }
        let mut idx = [0usize; MAX_GRID_DIM];
        match self.order {
            Interpolation::Multilinear => {
                let mut acc = 0.0;
                for corner in 0..1usize << d {
                    let mut w = 1.0;
                    for k in 0..d {
                        let bit = (corner >> k) & 1;
                        idx[k] = cell[k] + bit;
                        w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                    }
                    if w != 0.0 {
                        acc += w * self.at(&idx[..d]);
                    }
                }
                acc
            }
            Interpolation::Cubic => {
                let mut weights = [[0.0f64; 4]; MAX_GRID_DIM];
                for k in 0..d {
                    weights[k] = catmull_rom(frac[k]);
                }
                let mut acc = 0.0;
                for stencil in 0..1usize << (2 * d) {
                    let mut w = 1.0;
                    for k in 0..d {
                        let s = (stencil >> (2 * k)) & 3;
                        let n = self.counts[k] as isize;
                        idx[k] = (cell[k] as isize + s as isize - 1).clamp(0, n - 1) as usize;
                        w *= weights[k][s];
                    }
                    if w != 0.0 {
                        acc += w * self.at(&idx[..d]);
                    }
                }
                acc
            }
        }
    }
}

const MAX_GRID_DIM: usize = 8;
const STACK_DIM: usize = 32;

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

type Callback = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Constant(f64),
    Closed(Callback),
    Grid(Arc<Grid>),
    /// `a ↦ shift + inner(pre(a))`.
    Translated {
        inner: Arc<ScalarField>,
        shift: f64,
        pre: Affine,
    },
    /// `w ↦ inner(π(w))` on free `W`-coordinates.
    Lifted {
        inner: Arc<ScalarField>,
        algebra: StepTwoAlgebra,
    },
}

/// A continuous real function on a box, evaluated at `W`-coordinates.
///
/// Every checked evaluation rejects points outside the box (and, for derived
/// fields, points whose preimage leaves the underlying field's box).
#[derive(Clone)]
pub struct ScalarField {
    domain: BoxDomain,
    kind: Kind,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Constant(c) => format!("constant {c}"),
            Kind::Closed(_) => "closed-form".to_owned(),
            Kind::Grid(g) => format!("grid {:?} {:?}", g.counts, g.order),
            Kind::Translated { inner, shift, .. } => format!("translated by {shift} of {inner:?}"),
            Kind::Lifted { inner, .. } => format!("lift of {inner:?}"),
        };
        f.debug_struct("ScalarField").field("domain", &self.domain).field("kind", &kind).finish()
    }
}

impl ScalarField {
    pub fn constant(domain: BoxDomain, c: f64) -> Self {
        Self {
            domain,
            kind: Kind::Constant(c),
        }
    }

    pub fn closed(domain: BoxDomain, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            domain,
            kind: Kind::Closed(Arc::new(f)),
        }
    }

    pub fn from_grid(grid: Grid) -> Self {
        Self {
            domain: grid.domain.clone(),
            kind: Kind::Grid(Arc::new(grid)),
        }
    }

    pub(crate) fn translated(inner: ScalarField, shift: f64, pre: Affine, domain: BoxDomain) -> Self {
        Self {
            domain,
            kind: Kind::Translated {
                inner: Arc::new(inner),
                shift,
                pre,
            },
        }
    }

    pub(crate) fn lifted(inner: ScalarField, algebra: StepTwoAlgebra, domain: BoxDomain) -> Self {
        Self {
            domain,
            kind: Kind::Lifted {
                inner: Arc::new(inner),
                algebra,
            },
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.kind {
            Kind::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Same field restricted to a sub-box.
    pub fn restrict(&self, domain: BoxDomain) -> Result<Self> {
        if !self.domain.contains_box(&domain) {
            return Err(Error::InvalidArgument("restriction box is not inside the field domain".into()));
        }
        Ok(Self {
            domain,
            kind: self.kind.clone(),
        })
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        check_len(self.dim(), w.len())?;
        if !self.domain.contains(w) {
            return Err(Error::OutsideDomain { point: w.to_vec() });
        }
        match &self.kind {
            Kind::Translated { inner, shift, pre } => {
                with_buf(pre.dim_out(), |buf| {
                    pre.apply(w, buf);
                    Ok(shift + inner.eval(buf)?)
                })
            }
            Kind::Lifted { inner, algebra } => with_buf(inner.dim(), |buf| {
                project_pi_w_into(algebra, w, buf);
                inner.eval(buf)
            }),
            _ => Ok(self.eval_unchecked(w)),
        }
    }

    /// Evaluation without domain checks, for inner loops whose support was
    /// validated with [`ScalarField::contains_box`].
    pub fn eval_unchecked(&self, w: &[f64]) -> f64 {
        match &self.kind {
            Kind::Constant(c) => *c,
            Kind::Closed(f) => f(w),
            Kind::Grid(g) => g.interpolate(w),
            Kind::Translated { inner, shift, pre } => with_buf(pre.dim_out(), |buf| {
                pre.apply(w, buf);
                shift + inner.eval_unchecked(buf)
            }),
            Kind::Lifted { inner, algebra } => with_buf(inner.dim(), |buf| {
                project_pi_w_into(algebra, w, buf);
                inner.eval_unchecked(buf)
            }),
        }
    }

    /// Conservative test that the whole box can be evaluated.
    pub fn contains_box(&self, b: &BoxDomain) -> bool {
        if b.dim() != self.dim() || !self.domain.contains_box(b) {
            return false;
        }
        match &self.kind {
            Kind::Translated { inner, pre, .. } => inner.contains_box(&b.image_hull(pre)),
            Kind::Lifted { inner, algebra } => {
                let map = Affine::linear(crate::free::pi_w_matrix(algebra));
                inner.contains_box(&b.image_hull(&map))
            }
            _ => true,
        }
    }

    /// Estimate of `sup |f|`: grid samples for grid fields, otherwise a
    /// uniform sampling with about `budget` nodes including all corners.
    /// Never exceeds the true supremum.
    pub fn sup_abs_estimate(&self, budget: usize) -> f64 {
        if let Kind::Grid(g) = &self.kind {
            return g.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        if let Kind::Constant(c) = self.kind {
            return c.abs();
        }
        let d = self.dim();
        let n = ((budget.max(2) as f64).powf(1.0 / d as f64).floor() as usize).max(2);
        let total = n.pow(d as u32);
        let mut p = vec![0.0; d];
        let mut best: f64 = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                p[k] = self.domain.lo[k] + self.domain.width(k) * i as f64 / (n - 1) as f64;
            }
            if let Ok(v) = self.eval(&p) {
                best = best.max(v.abs());
            }
        }
        best
    }
}

/// One `ω_j` per horizontal direction `j = 2..m` (0-based component `j - 1`).
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Self {
        Self { components }
    }

    /// Component for generator `j` (0-based, `j ≥ 1`).
    pub fn component(&self, j: usize) -> Result<&ScalarField> {
        j.checked_sub(1)
            .and_then(|k| self.components.get(k))
            .ok_or_else(|| Error::InvalidArgument(format!("no datum component for generator {}", j + 1)))
    }
}

pub(crate) fn with_buf<T>(d: usize, f: impl FnOnce(&mut [f64]) -> T) -> T {
    if d <= STACK_DIM {
        let mut buf = [0.0; STACK_DIM];
        f(&mut buf[..d])
    } else {
        let mut buf = vec![0.0; d];
        f(&mut buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> BoxDomain {
        BoxDomain::cube(2, 1.0)
    }

    #[test]
    fn box_basics() {
        let b = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert!(b.contains(&[2.0, 1.0]));
        assert!(!b.contains(&[2.1, 0.0]));
        assert_eq!(b.center(), vec![1.0, 0.0]);
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert_eq!(b.shrink(0.5), BoxDomain::new(vec![0.5, -0.5], vec![1.5, 0.5]).unwrap());
    }

    #[test]
    fn closed_rejects_exterior() {
        let f = ScalarField::closed(unit_square(), |w| w[0] + 2.0 * w[1]);
        assert_eq!(f.eval(&[0.5, 0.25]).unwrap(), 1.0);
        assert!(matches!(f.eval(&[1.5, 0.0]), Err(Error::OutsideDomain { .. })));
        assert!(f.eval(&[0.0]).is_err());
    }

    #[test]
    fn multilinear_reproduces_bilinear() {
        let f = |w: &[f64]| 1.0 + w[0] - 2.0 * w[1] + 0.5 * w[0] * w[1];
        let g = Grid::sample(unit_square(), vec![5, 7], Interpolation::Multilinear, f).unwrap();
        let s = ScalarField::from_grid(g);
        for p in [[0.13, -0.77], [0.9, 0.9], [-1.0, 1.0], [0.0, 0.0]] {
            assert_abs_diff_eq!(s.eval(&p).unwrap(), f(&p), epsilon = 1e-13);
        }
    }

    #[test]
    fn cubic_reproduces_quadratics_inside() {
        let f = |w: &[f64]| w[0] * w[0] - w[1] + 0.3;
        let g = Grid::sample(unit_square(), vec![11, 11], Interpolation::Cubic, f).unwrap();
        let s = ScalarField::from_grid(g);
        for p in [[0.13, -0.37], [0.45, 0.5], [-0.61, 0.02]] {
            assert_abs_diff_eq!(s.eval(&p).unwrap(), f(&p), epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(unit_square(), vec![1, 3], vec![0.0; 3], Interpolation::Multilinear).is_err());
        assert!(Grid::new(unit_square(), vec![2, 2], vec![0.0; 3], Interpolation::Multilinear).is_err());
        let flat = BoxDomain::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert!(Grid::new(flat, vec![2, 2], vec![0.0; 4], Interpolation::Multilinear).is_err());
    }

    #[test]
    fn csv_round_trip_any_row_order() {
        let g = Grid::sample(unit_square(), vec![3, 4], Interpolation::Multilinear, |w| w[0] - w[1]).unwrap();
        let names = vec!["x2".to_owned(), "y".to_owned()];
        let text = g.to_csv(&names, "phi").unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1..].reverse();
        let shuffled = lines.join("\n");
        let (hdr, back) = Grid::from_csv_reader(shuffled.as_bytes(), Interpolation::Multilinear).unwrap();
        assert_eq!(hdr, names);
        assert_eq!(back.counts, g.counts);
        for (a, b) in back.values.iter().zip(&g.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        let missing: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(Grid::from_csv_reader(missing.as_bytes(), Interpolation::Multilinear).is_err());
    }

    #[test]
    fn sup_estimate_includes_corners() {
        let f = ScalarField::closed(unit_square(), |w| w[0] * w[1]);
        assert_eq!(f.sup_abs_estimate(100), 1.0);
        assert_eq!(ScalarField::constant(unit_square(), -3.0).sup_abs_estimate(10), 3.0);
    }

    #[test]
    fn vector_field_components() {
        let v = VectorField::new(vec![ScalarField::constant(unit_square(), 1.0)]);
        assert!(v.component(1).is_ok());
        assert!(v.component(0).is_err());
        assert!(v.component(2).is_err());
    }
}
