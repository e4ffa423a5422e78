//! Ellipsoids `E(c, P) = { x : (x - c)ᵀ P⁻¹ (x - c) ≤ 1 }` in the plane, plus
//! the brute-force set oracles (boundary sampling, boundary crossings,
//! grid classification) that the fusion tests are checked against.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SpdMatrix2, Vec2};

/// Angular samples used to bracket boundary crossings.
pub const CROSSING_SAMPLES: usize = 720;
/// Bisection stops once the bracket is narrower than this, in radians.
pub const CROSSING_ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipsoid {
    pub center: Vec2,
    pub shape: SpdMatrix2,
}

impl Ellipsoid {
    pub fn new(center: Vec2, shape: SpdMatrix2) -> Self {
        Self { center, shape }
    }

    /// Disc of the given radius.
    pub fn disc(center: Vec2, radius: f64) -> Result<Self> {
        Ok(Self::new(
            center,
            SpdMatrix2::scaled_identity(radius * radius)?,
        ))
    }

    /// `‖x - c‖²_{P⁻¹}`; equals 1 on the boundary.
    pub fn quad_form(&self, point: Vec2) -> f64 {
        mahalanobis_sq(point, self.center, &self.shape)
    }

    pub fn contains(&self, point: Vec2, tol: f64) -> bool {
        contains(self, point, tol)
    }

    /// Axis-aligned bounding box `c ± sqrt(diag(P))` as `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let half = Vec2::new(self.shape.xx().sqrt(), self.shape.yy().sqrt());
        (self.center - half, self.center + half)
    }

    /// Boundary point at parameter angle `phi`: `c + P^½ [cos φ, sin φ]ᵀ`.
    fn boundary_at(&self, root: &SpdMatrix2, phi: f64) -> Vec2 {
        self.center + root.mul_vec(Vec2::from_angle(phi))
    }
}

/// `(point - center)ᵀ weight⁻¹ (point - center)`.
pub fn mahalanobis_sq(point: Vec2, center: Vec2, weight: &SpdMatrix2) -> f64 {
    weight.inv_quad_form(point - center)
}

pub fn contains(e: &Ellipsoid, point: Vec2, tol: f64) -> bool {
    e.quad_form(point) <= 1.0 + tol
}

/// `count` points evenly spaced in parameter angle around the boundary.
pub fn boundary_points(e: &Ellipsoid, count: usize) -> Result<Vec<Vec2>> {
    if count < 3 {
        return Err(Error::Parameter(format!(
            "need at least 3 boundary points, got {count}"
        )));
    }
    let root = e.shape.sqrt();
    Ok((0..count)
        .map(|k| e.boundary_at(&root, TAU * k as f64 / count as f64))
        .collect())
}

/// Points where the two boundaries cross.
///
/// Walks `∂E_i` by parameter angle, brackets sign changes of
/// `g(φ) = ‖x(φ) - c_j‖²_{P_j⁻¹} - 1` on `CROSSING_SAMPLES` angles and bisects
/// each bracket. Only points satisfying both boundary equations within `tol`
/// are returned; tangential contacts without a sign change are not reported.
pub fn boundary_intersection(ei: &Ellipsoid, ej: &Ellipsoid, tol: f64) -> Vec<Vec2> {
    let root = ei.shape.sqrt();
    let g = |phi: f64| ej.quad_form(ei.boundary_at(&root, phi)) - 1.0;
    let step = TAU / CROSSING_SAMPLES as f64;

    let mut found = Vec::new();
    let mut prev = g(0.0);
    for k in 0..CROSSING_SAMPLES {
        let lo_phi = step * k as f64;
        let hi_phi = step * (k + 1) as f64;
        let next = if k + 1 == CROSSING_SAMPLES {
            g(0.0)
        } else {
            g(hi_phi)
        };
        if prev == 0.0 {
            found.push(lo_phi);
        } else if prev * next < 0.0 {
            let (mut lo, mut hi, mut g_lo) = (lo_phi, hi_phi, prev);
            while hi - lo > CROSSING_ANGLE_TOL {
                let mid = 0.5 * (lo + hi);
                let g_mid = g(mid);
                if g_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (g_mid < 0.0) == (g_lo < 0.0) {
                    lo = mid;
                    g_lo = g_mid;
                } else {
                    hi = mid;
                }
            }
            found.push(0.5 * (lo + hi));
        }
        prev = next;
    }

    found
        .into_iter()
        .map(|phi| ei.boundary_at(&root, phi))
        .filter(|&p| (ei.quad_form(p) - 1.0).abs() <= tol && (ej.quad_form(p) - 1.0).abs() <= tol)
        .collect()
}

/// Grid points classified by membership in two ellipsoids.
#[derive(Debug, Clone, Default)]
pub struct GridSample {
    pub intersection: Vec<Vec2>,
    pub union: Vec<Vec2>,
}

/// Uniform `resolution × resolution` grid over the joint bounding box of both
/// ellipsoids. Membership is exact (`quad_form ≤ 1`, no tolerance).
pub fn grid_oracle(ei: &Ellipsoid, ej: &Ellipsoid, resolution: usize) -> Result<GridSample> {
    if resolution < 11 {
        return Err(Error::Parameter(format!(
            "grid resolution must be at least 11, got {resolution}"
        )));
    }
    let (lo_i, hi_i) = ei.bounding_box();
    let (lo_j, hi_j) = ej.bounding_box();
    let lo = Vec2::new(lo_i.x.min(lo_j.x), lo_i.y.min(lo_j.y));
    let hi = Vec2::new(hi_i.x.max(hi_j.x), hi_i.y.max(hi_j.y));
    let n = (resolution - 1) as f64;

    let mut sample = GridSample::default();
    for r in 0..resolution {
        let y = lo.y + (hi.y - lo.y) * r as f64 / n;
        for c in 0..resolution {
            let p = Vec2::new(lo.x + (hi.x - lo.x) * c as f64 / n, y);
            let in_i = ei.quad_form(p) <= 1.0;
            let in_j = ej.quad_form(p) <= 1.0;
            if in_i && in_j {
                sample.intersection.push(p);
            }
            if in_i || in_j {
                sample.union.push(p);
            }
        }
    }
    Ok(sample)
}

/// Loewner order `a ≤ b`: the smallest eigenvalue of `b - a` is at least `-tol`.
pub fn loewner_leq(a: &SpdMatrix2, b: &SpdMatrix2, tol: f64) -> bool {
    let (_, min) = sym_eigenvalues(b.xx() - a.xx(), b.xy() - a.xy(), b.yy() - a.yy());
    min >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(c: Vec2) -> Ellipsoid {
        Ellipsoid::disc(c, 1.0).unwrap()
    }

    #[test]
    fn mahalanobis_examples() {
        let i = SpdMatrix2::identity();
        let c = Vec2::new(0.3, -2.0);
        assert_eq!(
            mahalanobis_sq(c, c, &SpdMatrix2::new(3.0, 1.0, 2.0).unwrap()),
            0.0
        );
        assert_eq!(mahalanobis_sq(Vec2::new(1.0, 0.0), Vec2::ZERO, &i), 1.0);

        // Generic-inverse oracle for diag(4, 1).
        let w = SpdMatrix2::diag(4.0, 1.0).unwrap();
        let d = Vec2::new(2.0, 0.0);
        let inv = w.to_mat().inverse().unwrap();
        let oracle = d.dot(inv.mul_vec(d));
        assert!((oracle - 1.0).abs() < 1e-15);
        assert!((mahalanobis_sq(d, Vec2::ZERO, &w) - oracle).abs() < 1e-15);
    }

    #[test]
    fn contains_examples() {
        let e = unit(Vec2::ZERO);
        assert!(contains(&e, Vec2::ZERO, 0.0));
        assert!(contains(&e, Vec2::new(1.0, 0.0), 0.0));
        assert!(!contains(&e, Vec2::new(1.1, 0.0), 0.0));
    }

    fn assert_points(got: &[Vec2], want: &[(f64, f64)]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!(
                (g.x - w.0).abs() < 1e-12 && (g.y - w.1).abs() < 1e-12,
                "{g} vs {w:?}"
            );
        }
    }

    #[test]
    fn boundary_points_examples() {
        let pts = boundary_points(&unit(Vec2::ZERO), 4).unwrap();
        assert_points(&pts, &[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]);

        let e = Ellipsoid::new(
            Vec2::new(1.0, 0.0),
            SpdMatrix2::scaled_identity(4.0).unwrap(),
        );
        let pts = boundary_points(&e, 4).unwrap();
        assert_points(&pts, &[(3.0, 0.0), (1.0, 2.0), (-1.0, 0.0), (1.0, -2.0)]);

        assert!(boundary_points(&e, 2).is_err());
    }

    #[test]
    fn boundary_points_lie_on_boundary() {
        let e = Ellipsoid::new(
            Vec2::new(-3.0, 7.0),
            SpdMatrix2::new(9.0, -2.5, 1.5).unwrap(),
        );
        for p in boundary_points(&e, 97).unwrap() {
            assert!((e.quad_form(p) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn crossing_of_offset_unit_circles() {
        let pts = boundary_intersection(&unit(Vec2::ZERO), &unit(Vec2::new(1.0, 0.0)), 1e-9);
        assert_eq!(pts.len(), 2);
        let h = 3f64.sqrt() / 2.0;
        let mut ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        ys.sort_by(f64::total_cmp);
        for p in &pts {
            assert!((p.x - 0.5).abs() < 1e-10);
        }
        assert!((ys[0] + h).abs() < 1e-10 && (ys[1] - h).abs() < 1e-10);
    }

    #[test]
    fn crossing_of_disjoint_and_coincident() {
        assert!(
            boundary_intersection(&unit(Vec2::ZERO), &unit(Vec2::new(3.0, 0.0)), 1e-9).is_empty()
        );
        let e = unit(Vec2::ZERO);
        for p in boundary_intersection(&e, &e, 1e-9) {
            assert!((e.quad_form(p) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn crossing_of_ellipses_has_four_points() {
        let a = Ellipsoid::new(Vec2::ZERO, SpdMatrix2::diag(9.0, 1.0).unwrap());
        let b = Ellipsoid::new(Vec2::ZERO, SpdMatrix2::diag(1.0, 9.0).unwrap());
        let pts = boundary_intersection(&a, &b, 1e-9);
        assert_eq!(pts.len(), 4);
        // x² / 9 + y² = 1 and x² + y² / 9 = 1  ⇒  x² = y² = 0.9.
        for p in pts {
            assert!((p.x.abs() - 0.9f64.sqrt()).abs() < 1e-9);
            assert!((p.y.abs() - 0.9f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_oracle_examples() {
        let e = unit(Vec2::ZERO);
        let same = grid_oracle(&e, &e, 51).unwrap();
        assert_eq!(same.intersection, same.union);
        assert!(!same.union.is_empty());

        let far = grid_oracle(&e, &unit(Vec2::new(10.0, 0.0)), 101).unwrap();
        assert!(far.intersection.is_empty());

        let f = unit(Vec2::new(1.0, 0.0));
        let lens = grid_oracle(&e, &f, 201).unwrap();
        assert!(!lens.intersection.is_empty());
        for p in &lens.intersection {
            assert!(e.contains(*p, 0.0) && f.contains(*p, 0.0));
        }
        assert!(grid_oracle(&e, &f, 10).is_err());
    }

    #[test]
    fn loewner_examples() {
        let i = SpdMatrix2::identity();
        let two = SpdMatrix2::scaled_identity(2.0).unwrap();
        assert!(loewner_leq(&i, &two, 0.0));
        assert!(!loewner_leq(&two, &i, 0.0));
        let a = SpdMatrix2::diag(1.0, 4.0).unwrap();
        let b = SpdMatrix2::diag(4.0, 1.0).unwrap();
        assert!(!loewner_leq(&a, &b, 0.0) && !loewner_leq(&b, &a, 0.0));
        assert!(loewner_leq(&a, &a, 0.0));
    }

    #[test]
    fn bounding_box_touches_extremes() {
        let e = Ellipsoid::new(
            Vec2::new(1.0, 2.0),
            SpdMatrix2::from_axes(0.4, 3.0, 1.0).unwrap(),
        );
        let (lo, hi) = e.bounding_box();
        let pts = boundary_points(&e, 4000).unwrap();
        let max_x = pts.iter().map(|p| p.x).fold(f64::MIN, f64::max);
        let min_y = pts.iter().map(|p| p.y).fold(f64::MAX, f64::min);
        assert!((max_x - hi.x).abs() < 1e-5 && (min_y - lo.y).abs() < 1e-5);
    }
}
