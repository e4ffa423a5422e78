//! Helpers shared by the integration suites: random ellipsoids and a
//! straight-line re-implementation of the fusion rules on plain `Vec`
//! matrices with a generic Gauss-Jordan inverse.

#![allow(dead_code)]

use std::f64::consts::PI;

use ellipfuse::fusion::{cce_scale, overlap_test};
use ellipfuse::{Ellipsoid, SpdMatrix2, Vec2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_ellipsoid(rng: &mut ChaCha8Rng) -> Ellipsoid {
    let center = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let angle = rng.random_range(-PI..PI);
    let (a, b) = (rng.random_range(0.3..5.0), rng.random_range(0.3..5.0));
    Ellipsoid::new(center, SpdMatrix2::from_axes(angle, a, b).unwrap())
}

/// Pair with intersecting interiors that also passes the overlap test.
/// Disjoint pairs still have `k > 0` near the ends of the α range, so the
/// scale is required to stay positive on a fine grid.
pub fn overlapping_pair(rng: &mut ChaCha8Rng) -> (Ellipsoid, Ellipsoid) {
    loop {
        let (ei, ej) = (random_ellipsoid(rng), random_ellipsoid(rng));
        let feasible =
            (1..1000).all(|i| cce_scale(&ei, &ej, i as f64 / 1000.0).is_ok_and(|k| k > 1e-6));
        if overlap_test(&ei, &ej).overlapping && feasible {
            return (ei, ej);
        }
    }
}

pub fn mat(s: &SpdMatrix2) -> Mat {
    s.to_rows().iter().map(|r| r.to_vec()).collect()
}

pub fn vec(v: Vec2) -> Vec<f64> {
    vec![v.x, v.y]
}

pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut inv: Mat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        assert!(p != 0.0, "singular matrix");
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for j in 0..n {
                    m[row][j] -= f * m[col][j];
                    inv[row][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    add(a, &scale(b, -1.0))
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|x| x * s).collect())
        .collect()
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn apply(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn det2(a: &Mat) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Oracle result: shape, center, and the CCE scale (1 for the other rules).
pub struct Fused {
    pub shape: Mat,
    pub center: Vec<f64>,
    pub k: f64,
}

fn weighted(ei: &Ellipsoid, ej: &Ellipsoid, a: f64, b: f64) -> (Mat, Vec<f64>) {
    let (ii, ij) = (inverse(&mat(&ei.shape)), inverse(&mat(&ej.shape)));
    let x = inverse(&add(&scale(&ii, a), &scale(&ij, b)));
    let rhs = vadd(
        &apply(&scale(&ii, a), &vec(ei.center)),
        &apply(&scale(&ij, b), &vec(ej.center)),
    );
    let c = apply(&x, &rhs);
    (x, c)
}

pub fn kalman(ei: &Ellipsoid, ej: &Ellipsoid) -> Fused {
    let (shape, center) = weighted(ei, ej, 1.0, 1.0);
    Fused {
        shape,
        center,
        k: 1.0,
    }
}

pub fn ci(ei: &Ellipsoid, ej: &Ellipsoid, alpha: f64) -> Fused {
    let (shape, center) = weighted(ei, ej, alpha, 1.0 - alpha);
    Fused {
        shape,
        center,
        k: 1.0,
    }
}

pub fn cce_k(ei: &Ellipsoid, ej: &Ellipsoid, alpha: f64) -> f64 {
    let spread = add(
        &scale(&mat(&ei.shape), 1.0 / alpha),
        &scale(&mat(&ej.shape), 1.0 / (1.0 - alpha)),
    );
    let d = vsub(&vec(ej.center), &vec(ei.center));
    1.0 - dot(&d, &apply(&inverse(&spread), &d))
}

pub fn cce(ei: &Ellipsoid, ej: &Ellipsoid, alpha: f64) -> Fused {
    let (x, center) = weighted(ei, ej, alpha, 1.0 - alpha);
    let k = cce_k(ei, ej, alpha);
    Fused {
        shape: scale(&x, k),
        center,
        k,
    }
}

pub fn ici(ei: &Ellipsoid, ej: &Ellipsoid, omega: f64) -> Fused {
    let (pi, pj) = (mat(&ei.shape), mat(&ej.shape));
    let (ii, ij) = (inverse(&pi), inverse(&pj));
    let gamma_inv = inverse(&add(&scale(&pi, omega), &scale(&pj, 1.0 - omega)));
    let shape = inverse(&sub(&add(&ii, &ij), &gamma_inv));
    let ki = mul(&shape, &sub(&ii, &scale(&gamma_inv, omega)));
    let kj = mul(&shape, &sub(&ij, &scale(&gamma_inv, 1.0 - omega)));
    let center = vadd(&apply(&ki, &vec(ei.center)), &apply(&kj, &vec(ej.center)));
    Fused {
        shape,
        center,
        k: 1.0,
    }
}

/// `|a - b| ≤ tol · max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Largest entrywise mismatch between an ellipsoid and an oracle result,
/// each entry measured as in [`close`].
pub fn mismatch(e: &Ellipsoid, f: &Fused) -> f64 {
    let got = [
        e.shape.xx(),
        e.shape.xy(),
        e.shape.yy(),
        e.center.x,
        e.center.y,
    ];
    let want = [
        f.shape[0][0],
        0.5 * (f.shape[0][1] + f.shape[1][0]),
        f.shape[1][1],
        f.center[0],
        f.center[1],
    ];
    got.iter()
        .zip(&want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max)
}
