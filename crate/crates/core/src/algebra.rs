//! Step-2 Carnot groups in exponential coordinates of the first kind.
//!
//! A group of rank `m` with vertical dimension `h` is identified with
//! `R^(m+h)`; the product is
//!
//! ```text
//! (x, y*) · (x', y*') = (x + x', y* + y*' - ½ ⟨B x, x'⟩)
//! ```
//!
//! where `⟨B x, x'⟩_i = (B^(i) x) · x'` and every `B^(i)` is skew-symmetric.
//! Generator indices are 0-based throughout the crate: generator `0` spans
//! the one-dimensional complement `L`, generators `1..m` together with the
//! vertical layer span `W`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::free::PairIndex;

const SKEW_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

/// Structure matrices `B^(1) … B^(h)` of a step-2 group of rank `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraRepr", into = "AlgebraRepr")]
pub struct StepTwoAlgebra {
    m: usize,
    h: usize,
    /// `h` row-major `m × m` blocks.
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AlgebraRepr {
    m: usize,
    h: usize,
    #[serde(rename = "B")]
    b: Vec<MatrixRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl TryFrom<AlgebraRepr> for StepTwoAlgebra {
    type Error = Error;

    fn try_from(repr: AlgebraRepr) -> Result<Self> {
        check_len(repr.h, repr.b.len())?;
        let mut mats = Vec::with_capacity(repr.h);
        for mat in repr.b {
            let flat = match mat {
                MatrixRepr::Flat(v) => v,
                MatrixRepr::Rows(rows) => {
                    for row in &rows {
                        check_len(repr.m, row.len())?;
                    }
                    rows.concat()
                }
            };
            check_len(repr.m * repr.m, flat.len())?;
            mats.push(flat);
        }
        StepTwoAlgebra::new(repr.m, mats)
    }
}

impl From<StepTwoAlgebra> for AlgebraRepr {
    fn from(a: StepTwoAlgebra) -> Self {
        let mm = a.m * a.m;
        AlgebraRepr {
            m: a.m,
            h: a.h,
            b: a.b.chunks(mm).map(|c| MatrixRepr::Flat(c.to_vec())).collect(),
        }
    }
}

impl StepTwoAlgebra {
    /// Builds and validates an algebra from `h` row-major `m × m` matrices.
    pub fn new(m: usize, matrices: Vec<Vec<f64>>) -> Result<Self> {
        let h = matrices.len();
        if m < 2 {
            return Err(Error::InvalidAlgebra(format!("rank must be at least 2, got {m}")));
        }
        if h == 0 || h > m * (m - 1) / 2 {
            return Err(Error::InvalidAlgebra(format!(
                "vertical dimension {h} outside 1..={}",
                m * (m - 1) / 2
            )));
        }
        let mut b = Vec::with_capacity(h * m * m);
        for (i, mat) in matrices.iter().enumerate() {
            check_len(m * m, mat.len())?;
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidAlgebra(format!("B^({}) has non-finite entries", i + 1)));
            }
            for j in 0..m {
                for l in 0..m {
                    if (mat[j * m + l] + mat[l * m + j]).abs() > SKEW_TOL {
                        return Err(Error::InvalidAlgebra(format!(
                            "B^({}) is not skew-symmetric at ({}, {})",
                            i + 1,
                            j + 1,
                            l + 1
                        )));
                    }
                }
            }
            b.extend_from_slice(mat);
        }
        let stack = DMatrix::from_row_slice(h, m * m, &b);
        let sv = stack.singular_values();
        let scale = sv.max().max(1.0);
        let rank = sv.iter().filter(|s| **s > RANK_TOL * scale).count();
        if rank < h {
            return Err(Error::InvalidAlgebra(format!(
                "structure matrices are linearly dependent (rank {rank} < {h})"
            )));
        }
        Ok(Self { m, h, b })
    }

    /// Builds an algebra from brackets `[X_j, X_l] = Σ_i c_i Y_i` given as
    /// `(j, l, coefficients)` with 0-based generator indices.
    pub fn from_brackets(m: usize, h: usize, brackets: &[(usize, usize, Vec<f64>)]) -> Result<Self> {
        let mut mats = vec![vec![0.0; m * m]; h];
        for (j, l, coeffs) in brackets {
            check_len(h, coeffs.len())?;
            if *j >= m || *l >= m || j == l {
                return Err(Error::InvalidArgument(format!("bad bracket pair ({j}, {l})")));
            }
            for (i, c) in coeffs.iter().enumerate() {
                mats[i][j * m + l] = *c;
                mats[i][l * m + j] = -*c;
            }
        }
        Self::new(m, mats)
    }

    /// First Heisenberg group: `m = 2`, `h = 1`, `b_12 = 1`.
    pub fn heisenberg() -> Self {
        Self::from_brackets(2, 1, &[(0, 1, vec![1.0])]).expect("valid Heisenberg algebra")
    }

    /// The rank-3 group with `[X_1, X_2] = Y_1 + Y_2` and `[X_1, X_3] = Y_1 - Y_2`.
    pub fn intro5d() -> Self {
        Self::from_brackets(3, 2, &[(0, 1, vec![1.0, 1.0]), (0, 2, vec![1.0, -1.0])])
            .expect("valid 5-dimensional algebra")
    }

    /// The free step-2 algebra of rank `m`: `[X_l, X_s] = Y_(l,s)` for `s < l`,
    /// vertical coordinates in lexicographic pair order.
    pub fn free(m: usize) -> Result<Self> {
        let pairs = PairIndex::all(m);
        let h = pairs.len();
        let brackets: Vec<_> = pairs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut c = vec![0.0; h];
                c[k] = 1.0;
                (p.l, p.s, c)
            })
            .collect();
        Self::from_brackets(m, h, &brackets)
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn vertical_dim(&self) -> usize {
        self.h
    }

    /// Dimension of the group, `m + h`.
    pub fn dim(&self) -> usize {
        self.m + self.h
    }

    /// Dimension of the codimension-one subgroup `W`, `m + h - 1`.
    pub fn w_dim(&self) -> usize {
        self.m + self.h - 1
    }

    /// Structure coefficient `b_{jl}^{(i)}`, all indices 0-based.
    #[inline]
    pub fn b(&self, i: usize, j: usize, l: usize) -> f64 {
        self.b[(i * self.m + j) * self.m + l]
    }

    /// Row-major copy of `B^(i)`.
    pub fn matrix(&self, i: usize) -> &[f64] {
        let mm = self.m * self.m;
        &self.b[i * mm..(i + 1) * mm]
    }

    /// `⟨B x, x'⟩` as an `h`-vector.
    pub fn bilinear(&self, x: &[f64], xp: &[f64]) -> Vec<f64> {
        (0..self.h)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..self.m {
                    let mut row = 0.0;
                    for l in 0..self.m {
                        row += self.b(i, j, l) * x[l];
                    }
                    acc += row * xp[j];
                }
                acc
            })
            .collect()
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint::new(vec![0.0; self.m], vec![0.0; self.h])
    }

    pub fn check(&self, p: &GroupPoint) -> Result<()> {
        check_len(self.m, p.x.len())?;
        check_len(self.h, p.ystar.len())
    }

    /// Group product in exponential coordinates.
    pub fn mul(&self, p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
        self.check(p)?;
        self.check(q)?;
        let corr = self.bilinear(&p.x, &q.x);
        let x = p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect();
        let ystar = (0..self.h).map(|i| p.ystar[i] + q.ystar[i] - 0.5 * corr[i]).collect();
        Ok(GroupPoint { x, ystar })
    }

    pub fn inv(&self, p: &GroupPoint) -> Result<GroupPoint> {
        self.check(p)?;
        Ok(GroupPoint {
            x: p.x.iter().map(|v| -v).collect(),
            ystar: p.ystar.iter().map(|v| -v).collect(),
        })
    }

    /// Intrinsic dilation `δ_λ(x, y*) = (λx, λ²y*)`.
    pub fn dilate(&self, lambda: f64, p: &GroupPoint) -> Result<GroupPoint> {
        self.check(p)?;
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveDilation(lambda));
        }
        Ok(GroupPoint {
            x: p.x.iter().map(|v| lambda * v).collect(),
            ystar: p.ystar.iter().map(|v| lambda * lambda * v).collect(),
        })
    }

    /// Homogeneous norm `max(|x|, |y*|^½)`.
    ///
    /// Satisfies the triangle inequality only up to a constant; every
    /// homogeneous norm is equivalent to it.
    pub fn hom_norm(&self, p: &GroupPoint) -> f64 {
        let hx = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let vy = p.ystar.iter().map(|v| v * v).sum::<f64>().sqrt().sqrt();
        hx.max(vy)
    }

    /// Coefficient rows of `X'_1 … X'_m, Y'_1 … Y'_h` at `p`, each of length `m + h`.
    pub fn left_invariant_frame(&self, p: &GroupPoint) -> Result<Vec<Vec<f64>>> {
        self.check(p)?;
        let n = self.dim();
        let mut rows = Vec::with_capacity(n);
        for j in 0..self.m {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            for i in 0..self.h {
                let mut acc = 0.0;
                for l in 0..self.m {
                    acc += self.b(i, j, l) * p.x[l];
                }
                row[self.m + i] = -0.5 * acc;
            }
            rows.push(row);
        }
        for i in 0..self.h {
            let mut row = vec![0.0; n];
            row[self.m + i] = 1.0;
            rows.push(row);
        }
        Ok(rows)
    }
}

/// A point `(x, y*)` of a step-2 group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub x: Vec<f64>,
    pub ystar: Vec<f64>,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, ystar: Vec<f64>) -> Self {
        Self { x, ystar }
    }

    /// Splits a flat coordinate vector of length `m + h`.
    pub fn from_coords(m: usize, coords: &[f64]) -> Self {
        Self {
            x: coords[..m].to_vec(),
            ystar: coords[m..].to_vec(),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.ystar);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.ystar).all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &GroupPoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.ystar.iter().zip(&other.ystar))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
