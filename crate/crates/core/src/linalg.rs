//! Closed-form 2×2 linear algebra.
//!
//! Everything here works at fixed size two, so inverses go through the
//! adjugate and eigenvalues through the trace/determinant quadratic. Inverses
//! and determinants normalise by the largest entry first: covariances that
//! collapse under repeated fusion reach magnitudes around 1e-90, where a naive
//! `a*d - b*c` underflows.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the off-diagonal mismatch accepted when a full
/// matrix is read as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Smallest accepted ratio `λ_min / λ_max` of a positive definite matrix.
/// Anything below is numerically singular in double precision.
pub const MIN_EIGEN_RATIO: f64 = 1e-15;

/// A point or displacement in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians counterclockwise from +x.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl TryFrom<[f64; 2]> for Vec2 {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        let p = Vec2::new(v[0], v[1]);
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::Parameter(format!(
                "vector components must be finite, got {v:?}"
            )))
        }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// General (not necessarily symmetric) 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };
    pub const ZERO: Mat2 = Mat2 {
        m: [[0.0, 0.0], [0.0, 0.0]],
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            m: [[a, b], [c, d]],
        }
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, -s, s, c)
    }

    fn max_abs(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn det(&self) -> f64 {
        let s = self.max_abs();
        if s == 0.0 {
            return 0.0;
        }
        let [[a, b], [c, d]] = self.scaled(1.0 / s).m;
        (a * d - b * c) * s * s
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        Self::new(a, c, b, d)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.m;
        Self::new(a * s, b * s, c * s, d * s)
    }

    /// Adjugate inverse on the entry-normalised matrix.
    pub fn inverse(&self) -> Result<Self> {
        let s = self.max_abs();
        if !s.is_finite() || s == 0.0 {
            return Err(Error::InvalidMatrix(format!("cannot invert {self:?}")));
        }
        let [[a, b], [c, d]] = self.scaled(1.0 / s).m;
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidMatrix(format!("singular matrix {self:?}")));
        }
        let k = 1.0 / (det * s);
        Ok(Self::new(d * k, -b * k, -c * k, a * k))
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.m;
        Vec2::new(a * v.x + b * v.y, c * v.x + d * v.y)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let [[a, b], [c, d]] = self.m;
        let [[e, f], [g, h]] = rhs.m;
        Mat2::new(a + e, b + f, c + g, d + h)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + rhs.scaled(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let [[a, b], [c, d]] = self.m;
        let [[e, f], [g, h]] = rhs.m;
        Mat2::new(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.mul_vec(v)
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    pub max: f64,
    pub min: f64,
    /// Unit eigenvector of `max`; the `min` eigenvector is its left normal.
    pub major_axis: Vec2,
}

/// Symmetric positive definite 2×2 matrix. Only the upper triangle is stored,
/// so symmetry holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct SpdMatrix2 {
    xx: f64,
    xy: f64,
    yy: f64,
}

/// Eigenvalues of `[[xx, xy], [xy, yy]]` as `(max, min)`; `min` comes from the
/// determinant to avoid cancellation on ill-conditioned input.
pub(crate) fn sym_eigenvalues(xx: f64, xy: f64, yy: f64) -> (f64, f64) {
    let mean = 0.5 * (xx + yy);
    let radius = (0.5 * (xx - yy)).hypot(xy);
    let max = mean + radius;
    if max <= 0.0 {
        return (max, mean - radius);
    }
    (max, sym_det(xx, xy, yy) / max)
}

fn sym_det(xx: f64, xy: f64, yy: f64) -> f64 {
    let s = xx.abs().max(xy.abs()).max(yy.abs());
    if s == 0.0 {
        return 0.0;
    }
    let (a, b, c) = (xx / s, xy / s, yy / s);
    (a * c - b * b) * s * s
}

impl SpdMatrix2 {
    /// Checked constructor from the three distinct entries.
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self> {
        if !(xx.is_finite() && xy.is_finite() && yy.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entries [[{xx}, {xy}], [{xy}, {yy}]]"
            )));
        }
        let (max, min) = sym_eigenvalues(xx, xy, yy);
        if !(xx > 0.0 && yy > 0.0 && max > 0.0 && min > MIN_EIGEN_RATIO * max) {
            return Err(Error::InvalidMatrix(format!(
                "[[{xx}, {xy}], [{xy}, {yy}]] is not positive definite (eigenvalues {max}, {min})"
            )));
        }
        Ok(Self { xx, xy, yy })
    }

    /// Checked constructor from a full matrix; off-diagonals must agree to
    /// `SYMMETRY_TOL` relative to the largest entry and are averaged.
    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = rows;
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        if (b - c).abs() > SYMMETRY_TOL * scale {
            return Err(Error::InvalidMatrix(format!("{rows:?} is not symmetric")));
        }
        Self::new(a, 0.5 * (b + c), d)
    }

    pub fn from_mat(m: &Mat2) -> Result<Self> {
        Self::from_rows(m.m)
    }

    pub fn identity() -> Self {
        Self {
            xx: 1.0,
            xy: 0.0,
            yy: 1.0,
        }
    }

    pub fn scaled_identity(s: f64) -> Result<Self> {
        Self::new(s, 0.0, s)
    }

    pub fn diag(a: f64, b: f64) -> Result<Self> {
        Self::new(a, 0.0, b)
    }

    /// `R(angle) · diag(along², across²) · R(angle)ᵀ`, built directly in
    /// symmetric form.
    pub fn from_axes(angle: f64, along: f64, across: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let (a2, b2) = (along * along, across * across);
        Self::new(
            a2 * c * c + b2 * s * s,
            (a2 - b2) * c * s,
            a2 * s * s + b2 * c * c,
        )
    }

    pub fn xx(&self) -> f64 {
        self.xx
    }

    pub fn xy(&self) -> f64 {
        self.xy
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    pub fn to_mat(&self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }

    pub fn to_rows(&self) -> [[f64; 2]; 2] {
        self.to_mat().m
    }

    pub fn det(&self) -> f64 {
        sym_det(self.xx, self.xy, self.yy)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn eigen(&self) -> SymEigen {
        let (max, min) = sym_eigenvalues(self.xx, self.xy, self.yy);
        let angle = 0.5 * (2.0 * self.xy).atan2(self.xx - self.yy);
        SymEigen {
            max,
            min,
            major_axis: Vec2::from_angle(angle),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigenvalues(self.xx, self.xy, self.yy).1
    }

    pub fn inverse(&self) -> Self {
        let s = self.xx.max(self.yy).max(self.xy.abs());
        let (a, b, c) = (self.xx / s, self.xy / s, self.yy / s);
        let k = 1.0 / ((a * c - b * b) * s);
        Self {
            xx: c * k,
            xy: -b * k,
            yy: a * k,
        }
    }

    /// Principal square root via the eigen-decomposition.
    pub fn sqrt(&self) -> Self {
        let e = self.eigen();
        let angle = e.major_axis.y.atan2(e.major_axis.x);
        let (s, c) = angle.sin_cos();
        let (a, b) = (e.max.sqrt(), e.min.sqrt());
        Self {
            xx: a * c * c + b * s * s,
            xy: (a - b) * c * s,
            yy: a * s * s + b * c * c,
        }
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: Vec2) -> f64 {
        self.xx * v.x * v.x + 2.0 * self.xy * v.x * v.y + self.yy * v.y * v.y
    }

    /// `vᵀ M⁻¹ v` without forming the inverse explicitly.
    pub fn inv_quad_form(&self, v: Vec2) -> f64 {
        let s = self.xx.max(self.yy).max(self.xy.abs());
        let (a, b, c) = (self.xx / s, self.xy / s, self.yy / s);
        let num = c * v.x * v.x - 2.0 * b * v.x * v.y + a * v.y * v.y;
        num / ((a * c - b * b) * s)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// Positive scaling; `factor` must be positive and finite.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Self::new(self.xx * factor, self.xy * factor, self.yy * factor)
    }

    /// Sum of two SPD matrices (always SPD).
    pub fn plus(&self, other: &SpdMatrix2) -> Self {
        Self {
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }

    /// `a·self + b·other` for nonnegative weights, at least one positive.
    pub fn weighted_sum(&self, a: f64, other: &SpdMatrix2, b: f64) -> Result<Self> {
        Self::new(
            a * self.xx + b * other.xx,
            a * self.xy + b * other.xy,
            a * self.yy + b * other.yy,
        )
    }

    /// `self - other`, checked for positive definiteness.
    pub fn minus(&self, other: &SpdMatrix2) -> Result<Self> {
        Self::new(self.xx - other.xx, self.xy - other.xy, self.yy - other.yy)
    }

    pub fn max_abs_diff(&self, other: &SpdMatrix2) -> f64 {
        (self.xx - other.xx)
            .abs()
            .max((self.xy - other.xy).abs())
            .max((self.yy - other.yy).abs())
    }
}

impl TryFrom<[[f64; 2]; 2]> for SpdMatrix2 {
    type Error = Error;

    fn try_from(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<SpdMatrix2> for [[f64; 2]; 2] {
    fn from(m: SpdMatrix2) -> Self {
        m.to_rows()
    }
}
