//! Per-node collaborative bearing estimator.
//!
//! Own measurements are independent of the current estimate and are merged
//! with Kalman fusion; a measurement ellipse that fails the overlap test is
//! first inflated by its Mahalanobis distance. Peer estimates may be
//! correlated with ours and go through the configured rule (CCE by default);
//! a peer estimate that fails the overlap test is dropped.

use serde::{Deserialize, Serialize};

use crate::bearing::{measurement_ellipse, BearingMeasurement, SensorParams};
use crate::ellipsoid::Ellipsoid;
use crate::error::Result;
use crate::fusion::{fuse, kalman_fuse, overlap_test, AlphaCriterion, FusionMethod};

/// Running event totals for one agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub measurements: u64,
    pub comm_accepted: u64,
    pub comm_discarded: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementEvent {
    /// Mahalanobis separation between the estimate and the measurement ellipse.
    pub distance: f64,
    /// Whether the measurement shape was inflated by `distance` before fusion.
    pub discounted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommEvent {
    Accepted {
        alpha: Option<f64>,
        k: f64,
        distance: f64,
    },
    /// The overlap test failed; the estimate is unchanged.
    DiscardedDisjoint { distance: f64 },
    /// The overlap test passed but the fusion rule rejected the pair.
    DiscardedFusion { distance: f64 },
}

impl CommEvent {
    pub fn accepted(&self) -> bool {
        matches!(self, CommEvent::Accepted { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEstimator {
    pub id: usize,
    estimate: Ellipsoid,
    pub sensor: SensorParams,
    pub comm_method: FusionMethod,
    pub alpha_criterion: AlphaCriterion,
    /// Non-collaborative agents never fuse peer estimates.
    pub collaborative: bool,
    counts: EventCounts,
}

impl AgentEstimator {
    pub fn new(
        id: usize,
        initial: Ellipsoid,
        sensor: SensorParams,
        comm_method: FusionMethod,
        alpha_criterion: AlphaCriterion,
    ) -> Self {
        Self {
            id,
            estimate: initial,
            sensor,
            comm_method,
            alpha_criterion,
            collaborative: true,
            counts: EventCounts::default(),
        }
    }

    pub fn non_collaborative(mut self) -> Self {
        self.collaborative = false;
        self
    }

    pub fn estimate(&self) -> &Ellipsoid {
        &self.estimate
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    /// Copy of the current estimate, as sent to peers.
    pub fn broadcast(&self) -> Ellipsoid {
        self.estimate
    }

    /// Fuses one of our own bearing readings into the estimate.
    pub fn handle_measurement(&mut self, meas: &BearingMeasurement) -> Result<MeasurementEvent> {
        let mut observed = measurement_ellipse(&self.sensor, meas)?;
        let overlap = overlap_test(&self.estimate, &observed);
        if !overlap.overlapping {
            observed.shape = observed.shape.scaled(overlap.distance)?;
        }
        self.estimate = kalman_fuse(&self.estimate, &observed)?.estimate;
        self.counts.measurements += 1;
        Ok(MeasurementEvent {
            distance: overlap.distance,
            discounted: !overlap.overlapping,
        })
    }

    /// Fuses a peer's broadcast estimate, or discards it.
    pub fn handle_communication(&mut self, peer: &Ellipsoid) -> CommEvent {
        let overlap = overlap_test(&self.estimate, peer);
        let event = if !overlap.overlapping {
            CommEvent::DiscardedDisjoint {
                distance: overlap.distance,
            }
        } else {
            match fuse(self.comm_method, &self.estimate, peer, self.alpha_criterion) {
                Ok(out) => {
                    self.estimate = out.estimate;
                    CommEvent::Accepted {
                        alpha: out.alpha,
                        k: out.k,
                        distance: overlap.distance,
                    }
                }
                Err(_) => CommEvent::DiscardedFusion {
                    distance: overlap.distance,
                },
            }
        };
        if event.accepted() {
            self.counts.comm_accepted += 1;
        } else {
            self.counts.comm_discarded += 1;
        }
        event
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bearing::BearingMeasurement;
    use crate::fusion::{cce_fuse, ci_fuse, optimize_alpha};
    use crate::linalg::{SpdMatrix2, Vec2};

    fn sensor() -> SensorParams {
        SensorParams::new(Vec2::ZERO, 2.0, 70.0, 12.0).unwrap()
    }

    fn agent(initial: Ellipsoid, method: FusionMethod) -> AgentEstimator {
        AgentEstimator::new(0, initial, sensor(), method, AlphaCriterion::MinDeterminant)
    }

    #[test]
    fn measurement_identical_to_estimate_halves_shape() {
        let meas = BearingMeasurement::new(0.4);
        let m = measurement_ellipse(&sensor(), &meas).unwrap();
        let mut a = agent(m, FusionMethod::Cce);
        let ev = a.handle_measurement(&meas).unwrap();
        assert!(!ev.discounted);
        assert!(
            a.estimate()
                .shape
                .max_abs_diff(&m.shape.scaled(0.5).unwrap())
                < 1e-9
        );
        assert!((a.estimate().center - m.center).norm() < 1e-12);
        assert_eq!(a.counts().measurements, 1);
    }

    #[test]
    fn disjoint_measurement_is_discounted_by_distance() {
        let meas = BearingMeasurement::new(0.0);
        let m = measurement_ellipse(&sensor(), &meas).unwrap();
        // Place the estimate so that d_m = 3 exactly along y.
        let est_shape = SpdMatrix2::scaled_identity(4.0).unwrap();
        let sum = m.shape.plus(&est_shape);
        let offset = 3.0 * sum.yy().sqrt();
        let initial = Ellipsoid::new(m.center + Vec2::new(0.0, offset), est_shape);
        let mut a = agent(initial, FusionMethod::Cce);
        let ev = a.handle_measurement(&meas).unwrap();
        assert!(ev.discounted);
        assert!((ev.distance - 3.0).abs() < 1e-12);

        let inflated = Ellipsoid::new(m.center, m.shape.scaled(ev.distance).unwrap());
        let expect = kalman_fuse(&initial, &inflated).unwrap().estimate;
        assert_eq!(*a.estimate(), expect);
    }

    #[test]
    fn boundary_distance_is_not_discounted() {
        // Along-axis variance 4 plus 12 gives 16, so an 8 m offset is d_m = 2 exactly.
        let short = SensorParams::new(Vec2::ZERO, 2.0, 6.0, 10.0).unwrap();
        let meas = BearingMeasurement::new(0.0);
        let m = measurement_ellipse(&short, &meas).unwrap();
        let initial = Ellipsoid::new(Vec2::new(12.0, 0.0), SpdMatrix2::diag(12.0, 1.0).unwrap());
        let mut a = AgentEstimator::new(
            0,
            initial,
            short,
            FusionMethod::Cce,
            AlphaCriterion::MinDeterminant,
        );
        let ev = a.handle_measurement(&meas).unwrap();
        assert_eq!(ev.distance, 2.0);
        assert!(!ev.discounted);
        assert_eq!(*a.estimate(), kalman_fuse(&initial, &m).unwrap().estimate);
    }

    #[test]
    fn disjoint_peer_is_discarded() {
        let own = Ellipsoid::disc(Vec2::ZERO, 1.0).unwrap();
        let peer = Ellipsoid::disc(Vec2::new(5.0, 0.0), 1.0).unwrap();
        for m in FusionMethod::ALL {
            let mut a = agent(own, m);
            let before = a.clone();
            let ev = a.handle_communication(&peer);
            assert!(matches!(ev, CommEvent::DiscardedDisjoint { .. }));
            assert_eq!(a.estimate(), before.estimate());
            assert_eq!(a.counts().comm_discarded, 1);
        }
    }

    #[test]
    fn identical_peer_under_cce_is_a_fixed_point() {
        let own = Ellipsoid::new(
            Vec2::new(2.0, -1.0),
            SpdMatrix2::new(36.0, 3.0, 20.0).unwrap(),
        );
        let mut a = agent(own, FusionMethod::Cce);
        match a.handle_communication(&own) {
            CommEvent::Accepted { alpha, k, .. } => {
                assert_eq!(k, 1.0);
                let ci = ci_fuse(&own, &own, alpha.unwrap()).unwrap();
                assert!(a.estimate().shape.max_abs_diff(&ci.estimate.shape) < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!((a.estimate().center - own.center).norm() < 1e-12);
    }

    #[test]
    fn overlapping_peer_matches_grid_alpha() {
        let own = Ellipsoid::disc(Vec2::ZERO, 1.0).unwrap();
        let peer = Ellipsoid::disc(Vec2::new(1.0, 0.0), 1.0).unwrap();
        let mut a = agent(own, FusionMethod::Cce);
        assert!(a.handle_communication(&peer).accepted());

        let alpha = optimize_alpha(
            FusionMethod::Cce,
            &own,
            &peer,
            AlphaCriterion::MinDeterminant,
        )
        .unwrap();
        let (grid_alpha, _) = (1..10_000)
            .map(|i| i as f64 / 10_000.0)
            .map(|al| (al, cce_fuse(&own, &peer, al).unwrap().estimate.shape.det()))
            .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        assert!((alpha - grid_alpha).abs() < 1e-3);
        let expect = cce_fuse(&own, &peer, grid_alpha).unwrap().estimate;
        assert!(a.estimate().shape.max_abs_diff(&expect.shape) < 1e-6);
        assert!((a.estimate().center - expect.center).norm() < 1e-3);
    }

    #[test]
    fn broadcast_is_pure() {
        let own = Ellipsoid::disc(Vec2::new(2.0, -1.0), 6.0).unwrap();
        let mut a = agent(own, FusionMethod::Ci);
        assert_eq!(a.broadcast(), own);
        assert_eq!(a.broadcast(), a.broadcast());
        a.handle_measurement(&BearingMeasurement::new(-0.3))
            .unwrap();
        assert_eq!(a.broadcast(), *a.estimate());
    }
}
