//! Bearing sensors and the measurement ellipse.
//!
//! A bearing `θ` from a sensor with operating range `[r_min, r_max]` and
//! angular noise `σ` becomes the ellipse centered at mid-range along the
//! bearing, with semi-axis `(r_max - r_min) / 2` along the ray and
//! `mid · tan σ` across it. No linearization of the bearing model is involved.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{SpdMatrix2, Vec2};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Fixed bearing sensor. `sigma` is kept in radians; the degrees it was
/// configured with are retained for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SensorRepr", into = "SensorRepr")]
pub struct SensorParams {
    pose: Vec2,
    r_min: f64,
    r_max: f64,
    sigma: f64,
    sigma_deg: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorRepr {
    pose: Vec2,
    r_min: f64,
    r_max: f64,
    sigma_deg: f64,
}

impl SensorParams {
    /// Checked constructor; `sigma_deg` is the one-sigma bearing noise in degrees.
    pub fn new(pose: Vec2, r_min: f64, r_max: f64, sigma_deg: f64) -> Result<Self> {
        if !pose.is_finite() {
            return Err(Error::Parameter(format!(
                "sensor pose {pose} is not finite"
            )));
        }
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "sensor range band needs 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        let sigma = sigma_deg.to_radians();
        if !(sigma > 0.0 && sigma < FRAC_PI_2) {
            return Err(Error::Parameter(format!(
                "bearing sigma must lie in (0, 90) degrees, got {sigma_deg}"
            )));
        }
        Ok(Self {
            pose,
            r_min,
            r_max,
            sigma,
            sigma_deg,
        })
    }

    pub fn pose(&self) -> Vec2 {
        self.pose
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Bearing standard deviation in radians.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_deg(&self) -> f64 {
        self.sigma_deg
    }

    /// Mid-range distance `(r_min + r_max) / 2`.
    pub fn mid_range(&self) -> f64 {
        0.5 * (self.r_min + self.r_max)
    }
}

impl TryFrom<SensorRepr> for SensorParams {
    type Error = Error;

    fn try_from(r: SensorRepr) -> Result<Self> {
        Self::new(r.pose, r.r_min, r.r_max, r.sigma_deg)
    }
}

impl From<SensorParams> for SensorRepr {
    fn from(s: SensorParams) -> Self {
        SensorRepr {
            pose: s.pose,
            r_min: s.r_min,
            r_max: s.r_max,
            sigma_deg: s.sigma_deg,
        }
    }
}

/// One bearing reading, wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingMeasurement {
    pub angle: f64,
}

impl BearingMeasurement {
    pub fn new(angle: f64) -> Self {
        Self {
            angle: wrap_angle(angle),
        }
    }
}

/// Direction of `target - sensor_pose`, counterclockwise from +x.
pub fn true_bearing(target: Vec2, sensor_pose: Vec2) -> Result<f64> {
    let d = target - sensor_pose;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "target and sensor coincide at {target}"
        )));
    }
    Ok(wrap_angle(d.y.atan2(d.x)))
}

/// Noisy bearing `θ + σ·noise_draw` for a standard-normal `noise_draw`.
pub fn sample_measurement(
    target: Vec2,
    sensor: &SensorParams,
    noise_draw: f64,
) -> Result<BearingMeasurement> {
    let theta = true_bearing(target, sensor.pose)?;
    Ok(BearingMeasurement::new(theta + sensor.sigma * noise_draw))
}

/// Whether the target lies in the closed range band of the sensor.
pub fn in_range(target: Vec2, sensor: &SensorParams) -> bool {
    let r = (target - sensor.pose).norm();
    sensor.r_min <= r && r <= sensor.r_max
}

/// The measurement ellipse of a bearing reading.
pub fn measurement_ellipse(sensor: &SensorParams, meas: &BearingMeasurement) -> Result<Ellipsoid> {
    let mid = sensor.mid_range();
    let along = 0.5 * (sensor.r_max - sensor.r_min);
    let across = mid * sensor.sigma.tan();
    if !(across > 0.0 && across.is_finite()) {
        return Err(Error::Parameter(format!(
            "degenerate measurement ellipse width {across}"
        )));
    }
    let center = sensor.pose + Vec2::from_angle(meas.angle) * mid;
    let shape = SpdMatrix2::from_axes(meas.angle, along, across)?;
    Ok(Ellipsoid::new(center, shape))
}
