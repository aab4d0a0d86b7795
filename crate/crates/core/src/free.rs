//! The free step-2 Carnot group `F` of rank `m` and its projection onto a
//! step-2 group `G` of the same rank.
//!
//! Vertical coordinates of `F` are indexed by pairs `(l, s)` with `s < l`,
//! stored in lexicographic order `(2,1), (3,1), (3,2), (4,1), …` (1-based
//! labels; the Rust indices are 0-based). [`PairIndex::position`] is the one
//! place that fixes this bijection.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{GroupPoint, StepTwoAlgebra};
use crate::error::{check_len, Error, Result};

/// Ordered generator pair `(l, s)` with `s < l`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairIndex {
    pub l: usize,
    pub s: usize,
}

impl PairIndex {
    pub fn new(l: usize, s: usize) -> Result<Self> {
        if s < l {
            Ok(Self { l, s })
        } else {
            Err(Error::InvalidArgument(format!("pair requires s < l, got ({l}, {s})")))
        }
    }

    /// Linear position of the pair among the vertical coordinates.
    #[inline]
    pub fn position(self) -> usize {
        self.l * (self.l - 1) / 2 + self.s
    }

    /// All pairs of a rank-`m` group, in storage order.
    pub fn all(m: usize) -> Vec<PairIndex> {
        (1..m).flat_map(|l| (0..l).map(move |s| PairIndex { l, s })).collect()
    }

    pub fn count(m: usize) -> usize {
        m * m.saturating_sub(1) / 2
    }

    /// 1-based label used in files, e.g. `"(2,1)"`.
    pub fn label(self) -> String {
        format!("({},{})", self.l + 1, self.s + 1)
    }

    pub fn parse_label(label: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad pair label {label:?}"));
        let inner = label.trim().strip_prefix('(').and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let l: usize = a.trim().parse().map_err(|_| bad())?;
        let s: usize = b.trim().parse().map_err(|_| bad())?;
        if s == 0 || l == 0 {
            return Err(bad());
        }
        PairIndex::new(l - 1, s - 1)
    }
}

/// A point `(x, y)` of the free group.
#[derive(Debug, Clone, PartialEq)]
pub struct FreePoint {
    pub x: Vec<f64>,
    /// Vertical coordinates in [`PairIndex`] order.
    pub y: Vec<f64>,
}

impl FreePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_len(PairIndex::count(x.len()), y.len())?;
        Ok(Self { x, y })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            x: vec![0.0; m],
            y: vec![0.0; PairIndex::count(m)],
        }
    }

    pub fn from_coords(m: usize, coords: &[f64]) -> Self {
        Self {
            x: coords[..m].to_vec(),
            y: coords[m..].to_vec(),
        }
    }

    pub fn rank(&self) -> usize {
        self.x.len()
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v
    }

    pub fn pair(&self, p: PairIndex) -> f64 {
        self.y[p.position()]
    }
}

impl Serialize for FreePoint {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            x: &'a [f64],
            y: BTreeMap<String, f64>,
        }
        let y = PairIndex::all(self.rank())
            .into_iter()
            .map(|p| (p.label(), self.pair(p)))
            .collect();
        Repr { x: &self.x, y }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FreePoint {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        struct Repr {
            x: Vec<f64>,
            y: BTreeMap<String, f64>,
        }
        let repr = Repr::deserialize(de)?;
        let m = repr.x.len();
        let mut y = vec![f64::NAN; PairIndex::count(m)];
        if repr.y.len() != y.len() {
            return Err(D::Error::custom(format!("expected {} vertical entries", y.len())));
        }
        for (k, v) in repr.y {
            let p = PairIndex::parse_label(&k).map_err(D::Error::custom)?;
            if p.l >= m {
                return Err(D::Error::custom(format!("pair {k} out of range for rank {m}")));
            }
            y[p.position()] = v;
        }
        Ok(FreePoint { x: repr.x, y })
    }
}

/// Product in `F`: horizontal parts add, `y_(l,s)` gains `½(x_l x'_s − x'_l x_s)`.
pub fn free_mul(p: &FreePoint, q: &FreePoint) -> Result<FreePoint> {
    let m = p.rank();
    check_len(m, q.rank())?;
    check_len(p.y.len(), q.y.len())?;
    let x = p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect();
    let y = PairIndex::all(m)
        .into_iter()
        .map(|pr| {
            let k = pr.position();
            p.y[k] + q.y[k] + 0.5 * (p.x[pr.l] * q.x[pr.s] - q.x[pr.l] * p.x[pr.s])
        })
        .collect();
    Ok(FreePoint { x, y })
}

pub fn free_inv(p: &FreePoint) -> FreePoint {
    FreePoint {
        x: p.x.iter().map(|v| -v).collect(),
        y: p.y.iter().map(|v| -v).collect(),
    }
}

pub fn free_dilate(lambda: f64, p: &FreePoint) -> Result<FreePoint> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveDilation(lambda));
    }
    Ok(FreePoint {
        x: p.x.iter().map(|v| lambda * v).collect(),
        y: p.y.iter().map(|v| lambda * lambda * v).collect(),
    })
}

/// Coefficient rows of `X_1 … X_m` followed by the `Y_(l,s)` in pair order.
pub fn free_frame(p: &FreePoint) -> Vec<Vec<f64>> {
    let m = p.rank();
    let n = m + p.y.len();
    let mut rows = Vec::with_capacity(n);
    for j in 0..m {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        for l in j + 1..m {
            row[m + PairIndex { l, s: j }.position()] += 0.5 * p.x[l];
        }
        for s in 0..j {
            row[m + PairIndex { l: j, s }.position()] -= 0.5 * p.x[s];
        }
        rows.push(row);
    }
    for k in 0..p.y.len() {
        let mut row = vec![0.0; n];
        row[m + k] = 1.0;
        rows.push(row);
    }
    rows
}

/// Vertical image `y*_i = Σ_{s<l} b_{ls}^{(i)} y_(l,s)` of free vertical coordinates.
pub fn project_vertical(a: &StepTwoAlgebra, y: &[f64]) -> Vec<f64> {
    let pairs = PairIndex::all(a.rank());
    (0..a.vertical_dim())
        .map(|i| pairs.iter().map(|p| a.b(i, p.l, p.s) * y[p.position()]).sum())
        .collect()
}

/// The canonical homomorphism `π : F → G`.
pub fn project_pi(a: &StepTwoAlgebra, p: &FreePoint) -> Result<GroupPoint> {
    check_len(a.rank(), p.rank())?;
    check_len(PairIndex::count(a.rank()), p.y.len())?;
    Ok(GroupPoint::new(p.x.clone(), project_vertical(a, &p.y)))
}

/// `π` restricted to `W_F → W_G` on W-coordinates `(x_2..x_m, y)`.
pub fn project_pi_w(a: &StepTwoAlgebra, w: &[f64]) -> Result<Vec<f64>> {
    let m = a.rank();
    check_len(m - 1 + PairIndex::count(m), w.len())?;
    let mut out = w[..m - 1].to_vec();
    out.extend(project_vertical(a, &w[m - 1..]));
    Ok(out)
}

/// Matrix of [`project_pi_w`], of shape `(m - 1 + h) × (m - 1 + m(m-1)/2)`.
pub fn pi_w_matrix(a: &StepTwoAlgebra) -> DMatrix<f64> {
    let m = a.rank();
    let pairs = PairIndex::all(m);
    let mut mat = DMatrix::zeros(a.w_dim(), m - 1 + pairs.len());
    for k in 0..m - 1 {
        mat[(k, k)] = 1.0;
    }
    for i in 0..a.vertical_dim() {
        for p in &pairs {
            mat[(m - 1 + i, m - 1 + p.position())] = a.b(i, p.l, p.s);
        }
    }
    mat
}

/// In-place variant of [`project_pi_w`] without allocation; `out` has length `m + h - 1`.
pub(crate) fn project_pi_w_into(a: &StepTwoAlgebra, w: &[f64], out: &mut [f64]) {
    let m = a.rank();
    out[..m - 1].copy_from_slice(&w[..m - 1]);
    let y = &w[m - 1..];
    for i in 0..a.vertical_dim() {
        let mut acc = 0.0;
        for l in 1..m {
            for s in 0..l {
                acc += a.b(i, l, s) * y[PairIndex { l, s }.position()];
            }
        }
        out[m - 1 + i] = acc;
    }
}

/// Change-of-variables matrix on `W_F`: identity on `x_2..x_m`, then the
/// `h` rows of structure coefficients `b_{ls}^{(i)}` over the pair columns,
/// then an orthonormal basis of the orthogonal complement of those rows.
pub fn complete_matrix_m(a: &StepTwoAlgebra) -> Result<DMatrix<f64>> {
    let m = a.rank();
    let h = a.vertical_dim();
    let pairs = PairIndex::all(m);
    let np = pairs.len();
    let n = m - 1 + np;
    let rows: Vec<DVector<f64>> = (0..h)
        .map(|i| DVector::from_iterator(np, pairs.iter().map(|p| a.b(i, p.l, p.s))))
        .collect();

    // Orthonormal basis of the b-row span.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in &rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let nv = v.norm();
        if nv <= 1e-10 * r.norm().max(1.0) {
            return Err(Error::InvalidAlgebra("b-rows are linearly dependent".into()));
        }
        basis.push(v / nv);
    }

    // Complete with standard basis vectors, greatest residual first.
    let mut completion = Vec::new();
    while basis.len() < np {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..np {
            let mut v = DVector::zeros(np);
            v[k] = 1.0;
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&v);
                    v -= q * c;
                }
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|(b, _)| nv > *b + 1e-12) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("non-empty candidate set");
        let v = v / nv;
        basis.push(v.clone());
        completion.push(v);
    }

    let mut mat = DMatrix::zeros(n, n);
    for k in 0..m - 1 {
        mat[(k, k)] = 1.0;
    }
    for (i, r) in rows.iter().chain(completion.iter()).enumerate() {
        for c in 0..np {
            mat[(m - 1 + i, m - 1 + c)] = r[c];
        }
    }
    Ok(mat)
}

/// CSV rendering of a square matrix with a header naming the W_F coordinates.
pub fn matrix_to_csv(m: usize, mat: &DMatrix<f64>) -> String {
    let mut header: Vec<String> = (2..=m).map(|k| format!("x{k}")).collect();
    header.extend(PairIndex::all(m).iter().map(|p| format!("y{}{}", p.l + 1, p.s + 1)));
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols()).map(|c| format!("{}", mat[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pair_order_is_lexicographic() {
        let labels: Vec<String> = PairIndex::all(4).iter().map(|p| p.label()).collect();
        assert_eq!(labels, ["(2,1)", "(3,1)", "(3,2)", "(4,1)", "(4,2)", "(4,3)"]);
        for (k, p) in PairIndex::all(6).iter().enumerate() {
            assert_eq!(p.position(), k);
            assert_eq!(PairIndex::parse_label(&p.label()).unwrap(), *p);
        }
        assert!(PairIndex::new(1, 1).is_err());
        assert!(PairIndex::parse_label("(1,2)").is_err());
    }

    #[test]
    fn rank_two_product() {
        let p = FreePoint::new(vec![1.0, 0.0], vec![0.0]).unwrap();
        let q = FreePoint::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        let r = free_mul(&p, &q).unwrap();
        assert_eq!(r.coords(), vec![1.0, 1.0, -0.5]);
        assert_eq!(free_mul(&FreePoint::identity(2), &q).unwrap(), q);
        let pp = free_mul(&r, &r).unwrap();
        assert_eq!(pp.coords(), vec![2.0, 2.0, -1.0]);
    }

    #[test]
    fn free_frame_values() {
        let e = FreePoint::identity(3);
        let rows = free_frame(&e);
        for (j, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert_eq!(*v, if j == k { 1.0 } else { 0.0 });
            }
        }
        let p = FreePoint::new(vec![0.0, 1.0, 0.0], vec![0.0; 3]).unwrap();
        let rows = free_frame(&p);
        // X_1 carries +½ x_2 on y_21 (storage slot 3 + 0).
        assert_eq!(rows[0][3], 0.5);
        assert_eq!(rows[0][4], 0.0);
    }

    #[test]
    fn free_frame_matches_generic_algebra() {
        let a = StepTwoAlgebra::free(4).unwrap();
        let p = FreePoint::from_coords(4, &[0.3, -1.1, 0.8, 2.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let g = GroupPoint::from_coords(4, &p.coords());
        assert_eq!(free_frame(&p), a.left_invariant_frame(&g).unwrap());
    }

    #[test]
    fn projection_examples() {
        let h = StepTwoAlgebra::heisenberg();
        let p = FreePoint::new(vec![0.4, -0.3], vec![1.5]).unwrap();
        assert_eq!(project_pi(&h, &p).unwrap().coords(), vec![0.4, -0.3, -1.5]);

        let a = StepTwoAlgebra::intro5d();
        let p = FreePoint::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.25, 7.0]).unwrap();
        assert_eq!(project_pi(&a, &p).unwrap().coords(), vec![1.0, 2.0, 3.0, -0.75, -0.25]);
        assert_eq!(project_pi(&a, &FreePoint::identity(3)).unwrap(), a.identity());
        assert!(project_pi(&h, &FreePoint::identity(3)).is_err());
    }

    #[test]
    fn matrix_m_heisenberg() {
        let m = complete_matrix_m(&StepTwoAlgebra::heisenberg()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert_abs_diff_eq!(m.determinant(), -1.0);
    }

    #[test]
    fn matrix_m_intro5d() {
        let m = complete_matrix_m(&StepTwoAlgebra::intro5d()).unwrap();
        assert_eq!(m.nrows(), 5);
        let expected = DMatrix::from_row_slice(
            5,
            5,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, -1.0, -1.0, 0.0, //
                0.0, 0.0, -1.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 1.0,
            ],
        );
        assert_abs_diff_eq!(m, expected, epsilon = 1e-15);
        assert!(m.determinant().abs() > 1e-8);
    }

    #[test]
    fn matrix_m_permuted_basis() {
        // Swap the roles of Y_1 and Y_2: b-rows swap, determinant flips sign.
        let a = StepTwoAlgebra::from_brackets(3, 2, &[(0, 1, vec![1.0, 1.0]), (0, 2, vec![-1.0, 1.0])]).unwrap();
        let m = complete_matrix_m(&a).unwrap();
        let base = complete_matrix_m(&StepTwoAlgebra::intro5d()).unwrap();
        assert_eq!(m.row(2), base.row(3));
        assert_eq!(m.row(3), base.row(2));
        assert_abs_diff_eq!(m.determinant(), -base.determinant(), epsilon = 1e-12);
    }

    #[test]
    fn matrix_m_partial_rank() {
        // m = 4 with h = 2: four completion rows, orthogonal to the b-rows.
        let a = StepTwoAlgebra::from_brackets(4, 2, &[(0, 1, vec![1.0, 0.0]), (2, 3, vec![0.5, 1.0]), (1, 2, vec![0.0, 2.0])])
            .unwrap();
        let mat = complete_matrix_m(&a).unwrap();
        assert_eq!(mat.nrows(), 9);
        assert!(mat.determinant().abs() > 1e-8);
        for r in 5..9 {
            for b in 3..5 {
                let dot: f64 = (3..9).map(|c| mat[(r, c)] * mat[(b, c)]).sum();
                assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn free_point_json() {
        let p = FreePoint::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.25, 7.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"x":[1.0,2.0,3.0],"y":{"(2,1)":0.5,"(3,1)":0.25,"(3,2)":7.0}}"#);
        let back: FreePoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<FreePoint>(r#"{"x":[1.0,2.0],"y":{}}"#).is_err());
    }

    #[test]
    fn m_csv_has_header() {
        let csv = matrix_to_csv(3, &complete_matrix_m(&StepTwoAlgebra::intro5d()).unwrap());
        assert!(csv.starts_with("x2,x3,y21,y31,y32\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
