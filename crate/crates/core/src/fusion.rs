//! Two-estimate fusion rules.
//!
//! * Kalman: parallel sum of the shapes, optimal only for independent inputs.
//! * CI (covariance intersection): convex combination of the information
//!   matrices, safe under unknown correlation.
//! * CCE (convex combination ellipsoid): the set
//!   `{ x : α‖x - x̂_i‖²_{P_i⁻¹} + (1-α)‖x - x̂_j‖²_{P_j⁻¹} ≤ 1 }`. Same center as
//!   CI, shape scaled down by `k = 1 - d²`, and contained in `E_i ∪ E_j`.
//! * ICI (inverse covariance intersection): subtracts a bound on the common
//!   information, `(P_i⁻¹ + P_j⁻¹ - (ωP_i + (1-ω)P_j)⁻¹)⁻¹`.
//!
//! The free parameter of CI/CCE/ICI is chosen by [`optimize_alpha`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, SpdMatrix2, Vec2};
use crate::search::golden_section_minimize;

/// At or below this CCE scale the priors are treated as disjoint.
pub const K_MIN: f64 = 1e-9;
/// Mahalanobis separation up to which two ellipsoids count as overlapping.
pub const OVERLAP_THRESHOLD: f64 = 2.0;

/// Interior search interval for the free parameter.
pub const ALPHA_SEARCH_LO: f64 = 1e-6;
pub const ALPHA_SEARCH_HI: f64 = 1.0 - 1e-6;
pub const ALPHA_SEARCH_TOL: f64 = 1e-8;
pub const ALPHA_SEARCH_MAX_ITER: usize = 200;
/// Uniform grid used to certify the search result.
pub const ALPHA_CERT_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Kalman,
    Ci,
    Ici,
    Cce,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 4] = [
        FusionMethod::Kalman,
        FusionMethod::Ci,
        FusionMethod::Ici,
        FusionMethod::Cce,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FusionMethod::Kalman => "kalman",
            FusionMethod::Ci => "ci",
            FusionMethod::Ici => "ici",
            FusionMethod::Cce => "cce",
        }
    }

    /// Whether the rule has a free convex-combination parameter.
    pub fn is_parameterized(&self) -> bool {
        !matches!(self, FusionMethod::Kalman)
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kalman" => Ok(FusionMethod::Kalman),
            "ci" => Ok(FusionMethod::Ci),
            "ici" => Ok(FusionMethod::Ici),
            "cce" => Ok(FusionMethod::Cce),
            other => Err(Error::Parameter(format!("unknown fusion method {other:?}"))),
        }
    }
}

/// Size measure minimized when choosing the free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AlphaCriterion {
    #[default]
    #[serde(rename = "det")]
    MinDeterminant,
    #[serde(rename = "trace")]
    MinTrace,
}

impl AlphaCriterion {
    pub fn measure(&self, shape: &SpdMatrix2) -> f64 {
        match self {
            AlphaCriterion::MinDeterminant => shape.det(),
            AlphaCriterion::MinTrace => shape.trace(),
        }
    }
}

impl FromStr for AlphaCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "det" | "determinant" => Ok(AlphaCriterion::MinDeterminant),
            "trace" => Ok(AlphaCriterion::MinTrace),
            other => Err(Error::Parameter(format!(
                "unknown alpha criterion {other:?}"
            ))),
        }
    }
}

/// Fused estimate plus the diagnostics of the rule that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub estimate: Ellipsoid,
    /// Convex-combination weight on the first input (ω for ICI); `None` for Kalman.
    pub alpha: Option<f64>,
    /// CCE shape scale `1 - d²`; 1 for the other rules.
    pub k: f64,
    /// Mahalanobis separation of the two inputs.
    pub mahalanobis: f64,
}

/// Result of the Mahalanobis overlap heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub distance: f64,
    pub overlapping: bool,
}

/// `d_m = ‖c_j - c_i‖_{(P_i + P_j)⁻¹}`; overlapping iff `d_m ≤ 2`.
pub fn overlap_test(ei: &Ellipsoid, ej: &Ellipsoid) -> Overlap {
    let sum = ei.shape.plus(&ej.shape);
    let distance = sum.inv_quad_form(ej.center - ei.center).sqrt();
    Overlap {
        distance,
        overlapping: distance <= OVERLAP_THRESHOLD,
    }
}

fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must lie in [0, 1], got {value}"
        )))
    }
}

/// Weighted information fusion `X = (a P_i⁻¹ + b P_j⁻¹)⁻¹`,
/// `x = X (a P_i⁻¹ x̂_i + b P_j⁻¹ x̂_j)`.
fn information_sum(ei: &Ellipsoid, ej: &Ellipsoid, a: f64, b: f64) -> Result<(SpdMatrix2, Vec2)> {
    let inv_i = ei.shape.inverse();
    let inv_j = ej.shape.inverse();
    let info = inv_i.weighted_sum(a, &inv_j, b)?;
    let shape = info.inverse();
    let shape = SpdMatrix2::new(shape.xx(), shape.xy(), shape.yy())?;
    let rhs = inv_i.mul_vec(ei.center) * a + inv_j.mul_vec(ej.center) * b;
    Ok((shape, shape.mul_vec(rhs)))
}

/// Fusion under an independence assumption.
pub fn kalman_fuse(ei: &Ellipsoid, ej: &Ellipsoid) -> Result<FusionOutcome> {
    let (shape, center) = information_sum(ei, ej, 1.0, 1.0)?;
    Ok(FusionOutcome {
        estimate: Ellipsoid::new(center, shape),
        alpha: None,
        k: 1.0,
        mahalanobis: overlap_test(ei, ej).distance,
    })
}

/// Covariance intersection with weight `alpha` on `ei`. The endpoints return
/// the corresponding input unchanged.
pub fn ci_fuse(ei: &Ellipsoid, ej: &Ellipsoid, alpha: f64) -> Result<FusionOutcome> {
    check_unit_interval("alpha", alpha)?;
    let estimate = if alpha == 1.0 {
        *ei
    } else if alpha == 0.0 {
        *ej
    } else {
        let (shape, center) = information_sum(ei, ej, alpha, 1.0 - alpha)?;
        Ellipsoid::new(center, shape)
    };
    Ok(FusionOutcome {
        estimate,
        alpha: Some(alpha),
        k: 1.0,
        mahalanobis: overlap_test(ei, ej).distance,
    })
}

/// The CCE scale `k = 1 - d²` with `d² = ‖x̂_j - x̂_i‖²_{(P_i/α + P_j/(1-α))⁻¹}`.
pub fn cce_scale(ei: &Ellipsoid, ej: &Ellipsoid, alpha: f64) -> Result<f64> {
    let spread = ei
        .shape
        .weighted_sum(1.0 / alpha, &ej.shape, 1.0 / (1.0 - alpha))?;
    Ok(1.0 - spread.inv_quad_form(ej.center - ei.center))
}

/// Convex combination ellipsoid for `alpha` strictly inside (0, 1).
pub fn cce_fuse(ei: &Ellipsoid, ej: &Ellipsoid, alpha: f64) -> Result<FusionOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "CCE alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let k = cce_scale(ei, ej, alpha)?;
    if k.is_nan() || k <= K_MIN {
        return Err(Error::DisjointSets { k });
    }
    let (x, center) = information_sum(ei, ej, alpha, 1.0 - alpha)?;
    Ok(FusionOutcome {
        estimate: Ellipsoid::new(center, x.scaled(k)?),
        alpha: Some(alpha),
        k,
        mahalanobis: overlap_test(ei, ej).distance,
    })
}

/// Inverse covariance intersection with weight `omega`.
pub fn ici_fuse(ei: &Ellipsoid, ej: &Ellipsoid, omega: f64) -> Result<FusionOutcome> {
    check_unit_interval("omega", omega)?;
    let inv_i = ei.shape.inverse();
    let inv_j = ej.shape.inverse();
    let gamma_inv = ei
        .shape
        .weighted_sum(omega, &ej.shape, 1.0 - omega)?
        .inverse();

    let info = SpdMatrix2::new(
        inv_i.xx() + inv_j.xx() - gamma_inv.xx(),
        inv_i.xy() + inv_j.xy() - gamma_inv.xy(),
        inv_i.yy() + inv_j.yy() - gamma_inv.yy(),
    )?;
    let shape = info.inverse();
    let shape = SpdMatrix2::new(shape.xx(), shape.xy(), shape.yy())?;

    let s = shape.to_mat();
    let gain_i = s * (inv_i.to_mat() - gamma_inv.to_mat().scaled(omega));
    let gain_j = s * (inv_j.to_mat() - gamma_inv.to_mat().scaled(1.0 - omega));
    let center = gain_i * ei.center + gain_j * ej.center;

    Ok(FusionOutcome {
        estimate: Ellipsoid::new(center, shape),
        alpha: Some(omega),
        k: 1.0,
        mahalanobis: overlap_test(ei, ej).distance,
    })
}

/// The ICI gain pair `(K_i, K_j)`, exposed for diagnostics.
pub fn ici_gains(ei: &Ellipsoid, ej: &Ellipsoid, omega: f64) -> Result<(Mat2, Mat2)> {
    let out = ici_fuse(ei, ej, omega)?;
    let s = out.estimate.shape.to_mat();
    let gamma_inv = ei
        .shape
        .weighted_sum(omega, &ej.shape, 1.0 - omega)?
        .inverse()
        .to_mat();
    Ok((
        s * (ei.shape.inverse().to_mat() - gamma_inv.scaled(omega)),
        s * (ej.shape.inverse().to_mat() - gamma_inv.scaled(1.0 - omega)),
    ))
}

/// Evaluates a parameterized rule at `alpha ∈ [0, 1]`. CCE at the endpoints
/// is its limit, the corresponding prior with `k = 1`.
pub fn fuse_at(
    method: FusionMethod,
    ei: &Ellipsoid,
    ej: &Ellipsoid,
    alpha: f64,
) -> Result<FusionOutcome> {
    match method {
        FusionMethod::Kalman => kalman_fuse(ei, ej),
        FusionMethod::Ci => ci_fuse(ei, ej, alpha),
        FusionMethod::Ici => ici_fuse(ei, ej, alpha),
        FusionMethod::Cce => {
            check_unit_interval("alpha", alpha)?;
            if alpha == 0.0 || alpha == 1.0 {
                let estimate = if alpha == 1.0 { *ei } else { *ej };
                Ok(FusionOutcome {
                    estimate,
                    alpha: Some(alpha),
                    k: 1.0,
                    mahalanobis: overlap_test(ei, ej).distance,
                })
            } else {
                cce_fuse(ei, ej, alpha)
            }
        }
    }
}

/// Size of the fused shape at `alpha` under `criterion`.
pub fn alpha_objective(
    method: FusionMethod,
    ei: &Ellipsoid,
    ej: &Ellipsoid,
    alpha: f64,
    criterion: AlphaCriterion,
) -> Result<f64> {
    fuse_at(method, ei, ej, alpha).map(|out| criterion.measure(&out.estimate.shape))
}

/// Chooses the free parameter minimizing `criterion` of the fused shape.
///
/// Golden-section search on the interior, then a certification pass over a
/// 101-point grid on `[0, 1]`: if any grid point beats the search result, the
/// search is repeated in that grid cell and the better point kept, so the
/// returned value never loses to the grid. A constant objective yields 0.5.
pub fn optimize_alpha(
    method: FusionMethod,
    ei: &Ellipsoid,
    ej: &Ellipsoid,
    criterion: AlphaCriterion,
) -> Result<f64> {
    if !method.is_parameterized() {
        return Err(Error::Parameter(
            "Kalman fusion has no free parameter".into(),
        ));
    }

    let step = 1.0 / (ALPHA_CERT_POINTS - 1) as f64;
    let grid = (0..ALPHA_CERT_POINTS)
        .map(|i| {
            let a = i as f64 * step;
            alpha_objective(method, ei, ej, a, criterion).map(|v| (a, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let (grid_best, grid_min) =
        grid.iter().copied().fold(
            (0.5, f64::INFINITY),
            |best, (a, v)| if v < best.1 { (a, v) } else { best },
        );
    let grid_max = grid
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if grid_max - grid_min <= 1e-12 * grid_max.abs() {
        return Ok(0.5);
    }

    // Points the grid missed (a narrow disjoint window for CCE) never win.
    let objective = |a: f64| alpha_objective(method, ei, ej, a, criterion).unwrap_or(f64::INFINITY);
    let mut best = golden_section_minimize(
        objective,
        ALPHA_SEARCH_LO,
        ALPHA_SEARCH_HI,
        ALPHA_SEARCH_TOL,
        ALPHA_SEARCH_MAX_ITER,
    );

    if grid_min < best.1 {
        let lo = (grid_best - step).max(ALPHA_SEARCH_LO);
        let hi = (grid_best + step).min(ALPHA_SEARCH_HI);
        let refined =
            golden_section_minimize(objective, lo, hi, ALPHA_SEARCH_TOL, ALPHA_SEARCH_MAX_ITER);
        best = if refined.1 < grid_min {
            refined
        } else {
            (grid_best, grid_min)
        };
    }
    Ok(best.0)
}

/// Fuses with `method`, choosing the free parameter by `criterion`.
pub fn fuse(
    method: FusionMethod,
    ei: &Ellipsoid,
    ej: &Ellipsoid,
    criterion: AlphaCriterion,
) -> Result<FusionOutcome> {
    match method {
        FusionMethod::Kalman => kalman_fuse(ei, ej),
        _ => {
            let alpha = optimize_alpha(method, ei, ej, criterion)?;
            fuse_at(method, ei, ej, alpha)
        }
    }
}
