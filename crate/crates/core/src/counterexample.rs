//! Randomized search for pairs on which determinant-optimal CI or ICI break
//! the set properties that CCE guarantees:
//!
//! * P1: the fused ellipse contains `E_i ∩ E_j`;
//! * P2: the boundary crossings of `E_i` and `E_j` lie on the fused boundary;
//! * P3: the fused ellipse lies inside `E_i ∪ E_j`.
//!
//! P1 and P3 are checked on grid samples, P2 on refined boundary crossings.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{boundary_intersection, grid_oracle, Ellipsoid};
use crate::error::Result;
use crate::fusion::{fuse, overlap_test, AlphaCriterion, FusionMethod, FusionOutcome};
use crate::linalg::{SpdMatrix2, Vec2};
use crate::streams::{substream, Stream};

/// Slack on quadratic forms for grid-point membership.
pub const FORM_TOL: f64 = 1e-9;
/// Allowed deviation of the fused form from 1 at a boundary crossing.
pub const CROSSING_FORM_TOL: f64 = 1e-6;
/// Tolerance handed to `boundary_intersection`.
pub const CROSSING_TOL: f64 = 1e-9;
pub const DEFAULT_RESOLUTION: usize = 101;

const CHECKED: [FusionMethod; 3] = [FusionMethod::Ci, FusionMethod::Ici, FusionMethod::Cce];
const MAX_PAIR_ATTEMPTS: usize = 10_000;

/// Property check of one fused ellipse against its priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCheck {
    pub method: FusionMethod,
    pub outcome: FusionOutcome,
    /// A grid point of `E_i ∩ E_j` outside the fused ellipse.
    pub intersection_witness: Option<Vec2>,
    /// Boundary crossings whose fused form is not 1.
    pub crossing_violations: usize,
    pub crossings: usize,
    /// A grid point of the fused ellipse outside `E_i ∪ E_j`.
    pub union_witness: Option<Vec2>,
}

impl MethodCheck {
    pub fn violates_any(&self) -> bool {
        self.intersection_witness.is_some()
            || self.crossing_violations > 0
            || self.union_witness.is_some()
    }
}

/// Checks det-optimal CI, ICI and CCE on one prior pair.
pub fn check_pair(ei: &Ellipsoid, ej: &Ellipsoid, resolution: usize) -> Result<Vec<MethodCheck>> {
    let priors = grid_oracle(ei, ej, resolution)?;
    let crossings = boundary_intersection(ei, ej, CROSSING_TOL);
    CHECKED
        .iter()
        .map(|&method| {
            let outcome = fuse(method, ei, ej, AlphaCriterion::MinDeterminant)?;
            let f = outcome.estimate;
            let intersection_witness = priors
                .intersection
                .iter()
                .copied()
                .find(|&p| f.quad_form(p) > 1.0 + FORM_TOL);
            let crossing_violations = crossings
                .iter()
                .filter(|&&p| (f.quad_form(p) - 1.0).abs() > CROSSING_FORM_TOL)
                .count();
            let inside = grid_oracle(&f, &f, resolution)?;
            let union_witness = inside
                .intersection
                .iter()
                .copied()
                .find(|&p| ei.quad_form(p).min(ej.quad_form(p)) > 1.0 + FORM_TOL);
            Ok(MethodCheck {
                method,
                outcome,
                intersection_witness,
                crossing_violations,
                crossings: crossings.len(),
                union_witness,
            })
        })
        .collect()
}

fn random_ellipsoid(rng: &mut ChaCha8Rng) -> Ellipsoid {
    let center = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let angle = rng.random_range(-PI..PI);
    let along = rng.random_range(0.5..5.0);
    let across = rng.random_range(0.5..5.0);
    let shape = SpdMatrix2::from_axes(angle, along, across).expect("axes bounded away from zero");
    Ellipsoid::new(center, shape)
}

/// Random prior pair of trial `trial`: redrawn until it passes the overlap
/// test and CCE finds a positive scale. `None` if no such pair turns up.
pub fn random_pair(seed: u64, trial: u64) -> Option<(Ellipsoid, Ellipsoid)> {
    let mut rng = substream(seed, Stream::Counterexample, trial);
    (0..MAX_PAIR_ATTEMPTS).find_map(|_| {
        let ei = random_ellipsoid(&mut rng);
        let ej = random_ellipsoid(&mut rng);
        let usable = overlap_test(&ei, &ej).overlapping
            && fuse(FusionMethod::Cce, &ei, &ej, AlphaCriterion::MinDeterminant).is_ok();
        usable.then_some((ei, ej))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: u64,
    pub first: Ellipsoid,
    pub second: Ellipsoid,
    pub fused: FusionOutcome,
    pub point: Vec2,
    pub first_form: f64,
    pub second_form: f64,
    pub fused_form: f64,
}

impl Witness {
    fn new(trial: u64, ei: &Ellipsoid, ej: &Ellipsoid, fused: FusionOutcome, point: Vec2) -> Self {
        Self {
            trial,
            first: *ei,
            second: *ej,
            fused,
            point,
            first_form: ei.quad_form(point),
            second_form: ej.quad_form(point),
            fused_form: fused.estimate.quad_form(point),
        }
    }
}

/// Number of trials in which a method broke each property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub method: FusionMethod,
    pub intersection_exclusion: u64,
    pub crossing_off_boundary: u64,
    pub union_violation: u64,
    pub any: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub trials: u64,
    pub seed: u64,
    pub resolution: usize,
    /// Trials for which no usable pair was drawn or a rule failed.
    pub skipped: u64,
    pub violations: Vec<ViolationCounts>,
    /// First trial where CI put a grid point outside the union of the priors.
    pub ci_union_witness: Option<Witness>,
    /// First trial where ICI left a grid point of the intersection uncovered.
    pub ici_intersection_witness: Option<Witness>,
}

type Trial = Option<((Ellipsoid, Ellipsoid), Vec<MethodCheck>)>;

fn run_trial(seed: u64, trial: u64, resolution: usize) -> Trial {
    let (ei, ej) = random_pair(seed, trial)?;
    let checks = check_pair(&ei, &ej, resolution).ok()?;
    Some(((ei, ej), checks))
}

/// Runs `trials` random trials in parallel; the report does not depend on
/// the number of worker threads.
pub fn search(trials: u64, seed: u64, resolution: usize) -> CounterexampleReport {
    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(seed, t, resolution))
        .collect();

    let mut violations: Vec<ViolationCounts> = CHECKED
        .iter()
        .map(|&method| ViolationCounts {
            method,
            intersection_exclusion: 0,
            crossing_off_boundary: 0,
            union_violation: 0,
            any: 0,
        })
        .collect();
    let mut report = CounterexampleReport {
        trials,
        seed,
        resolution,
        skipped: 0,
        violations: Vec::new(),
        ci_union_witness: None,
        ici_intersection_witness: None,
    };

    for (trial, result) in results.into_iter().enumerate() {
        let Some(((ei, ej), checks)) = result else {
            report.skipped += 1;
            continue;
        };
        for (counts, check) in violations.iter_mut().zip(&checks) {
            counts.intersection_exclusion += check.intersection_witness.is_some() as u64;
            counts.crossing_off_boundary += (check.crossing_violations > 0) as u64;
            counts.union_violation += check.union_witness.is_some() as u64;
            counts.any += check.violates_any() as u64;
            match check.method {
                FusionMethod::Ci if report.ci_union_witness.is_none() => {
                    if let Some(p) = check.union_witness {
                        report.ci_union_witness =
                            Some(Witness::new(trial as u64, &ei, &ej, check.outcome, p));
                    }
                }
                FusionMethod::Ici if report.ici_intersection_witness.is_none() => {
                    if let Some(p) = check.intersection_witness {
                        report.ici_intersection_witness =
                            Some(Witness::new(trial as u64, &ei, &ej, check.outcome, p));
                    }
                }
                _ => {}
            }
        }
    }
    report.violations = violations;
    report
}

impl CounterexampleReport {
    pub fn counts(&self, method: FusionMethod) -> Option<&ViolationCounts> {
        self.violations.iter().find(|v| v.method == method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_has_no_witness() {
        let shape = SpdMatrix2::new(4.0, 1.0, 2.0).unwrap();
        let ei = Ellipsoid::new(Vec2::new(-0.8, 0.3), shape);
        let ej = Ellipsoid::new(Vec2::new(0.8, -0.3), shape);
        for check in check_pair(&ei, &ej, 151).unwrap() {
            assert!(check.intersection_witness.is_none(), "{:?}", check.method);
            if check.method == FusionMethod::Cce {
                assert!(!check.violates_any());
                assert_eq!(check.crossings, 2);
            }
        }
    }

    #[test]
    fn witnesses_are_genuine() {
        let report = search(300, 7, 61);
        assert_eq!(report.counts(FusionMethod::Cce).unwrap().any, 0);
        if let Some(w) = &report.ci_union_witness {
            assert!(w.first_form > 1.0 && w.second_form > 1.0 && w.fused_form <= 1.0);
        }
        if let Some(w) = &report.ici_intersection_witness {
            assert!(w.first_form <= 1.0 && w.second_form <= 1.0 && w.fused_form > 1.0);
        }
    }

    #[test]
    fn random_pairs_overlap() {
        for trial in 0..50 {
            let (ei, ej) = random_pair(1, trial).unwrap();
            assert!(overlap_test(&ei, &ej).overlapping);
        }
    }
}
